//! Metrics, report assembly and embedding export.

mod metrics;

pub use metrics::{
    class_counts, metric_auc, metric_hs, metric_os, metric_os_star, per_class_accuracy,
    side_accuracies, ClassCounts,
};

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::diff::Matrix;
use crate::error::{Error, Result};
use crate::graph::{openness, LabelSpace};

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub known: usize,
    /// Accuracy of classes `1..=K+1`.
    pub per_class_accuracy: Vec<f64>,
    pub class_counts: Vec<usize>,
    pub os: f64,
    pub os_star: f64,
    pub hs: f64,
    pub auc: f64,
    pub known_accuracy: f64,
    pub unknown_accuracy: f64,
    pub openness: f64,
}

/// `truth` and `predicted` are in the remapped space `1..=K+1`; `scores`
/// holds each node's unknown probability.
pub fn build_report(
    truth: &[usize],
    predicted: &[usize],
    scores: &[f64],
    ls: &LabelSpace,
) -> Result<EvalReport> {
    let known = ls.known();
    if scores.len() != truth.len() {
        return Err(Error::Metric(format!(
            "{} scores for {} nodes",
            scores.len(),
            truth.len()
        )));
    }
    let counts = class_counts(truth, predicted, known)?;
    let per_class = per_class_accuracy(truth, predicted, known)?
        .into_iter()
        .enumerate()
        .map(|(k, a)| a.ok_or_else(|| Error::Metric(format!("class {} has no instances", k + 1))))
        .collect::<Result<Vec<_>>>()?;
    let (known_accuracy, unknown_accuracy) = side_accuracies(truth, predicted, known)?;
    let flags: Vec<bool> = truth.iter().map(|&t| t == known + 1).collect();
    Ok(EvalReport {
        known,
        os: metric_os(truth, predicted, known)?,
        os_star: metric_os_star(truth, predicted, known)?,
        hs: metrics::harmonic(known_accuracy, unknown_accuracy),
        auc: metric_auc(scores, &flags)?,
        per_class_accuracy: per_class,
        class_counts: counts.total,
        known_accuracy,
        unknown_accuracy,
        openness: openness(ls),
    })
}

impl EvalReport {
    /// One `name=value` per line. Floats use the shortest exact form.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(out, "{k}={v}");
        };
        line("known", self.known.to_string());
        line("openness", self.openness.to_string());
        line("os", self.os.to_string());
        line("os_star", self.os_star.to_string());
        line("hs", self.hs.to_string());
        line("auc", self.auc.to_string());
        line("known_accuracy", self.known_accuracy.to_string());
        line("unknown_accuracy", self.unknown_accuracy.to_string());
        for (k, (acc, n)) in self
            .per_class_accuracy
            .iter()
            .zip(&self.class_counts)
            .enumerate()
        {
            line(&format!("class{}_accuracy", k + 1), acc.to_string());
            line(&format!("class{}_count", k + 1), n.to_string());
        }
        out
    }

    /// Headline metric by name, as used in summaries.
    pub fn metric(&self, name: &str) -> Option<f64> {
        match name {
            "os" => Some(self.os),
            "os_star" => Some(self.os_star),
            "hs" => Some(self.hs),
            "auc" => Some(self.auc),
            _ => None,
        }
    }
}

/// Headline metrics in table order.
pub const HEADLINE_METRICS: [&str; 4] = ["os_star", "auc", "os", "hs"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Network {
    Source,
    Target,
}

impl Network {
    fn tag(self) -> &'static str {
        match self {
            Network::Source => "source",
            Network::Target => "target",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRow {
    pub network: Network,
    pub node: usize,
    pub label: Option<usize>,
    pub values: Vec<f64>,
}

fn push_rows(
    out: &mut String,
    network: Network,
    h: &Matrix,
    labels: Option<&[usize]>,
) -> Result<()> {
    if let Some(l) = labels {
        if l.len() != h.nrows() {
            return Err(Error::RowMismatch {
                what: "embedding labels",
                found: l.len(),
                expected: h.nrows(),
            });
        }
    }
    for (i, row) in h.rows().into_iter().enumerate() {
        let _ = write!(out, "{},{i},", network.tag());
        if let Some(l) = labels {
            let _ = write!(out, "{}", l[i]);
        }
        for v in row {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    Ok(())
}

/// CSV with header `network,node,label,e0..e{d-1}`; the label cell is empty
/// when no ground truth is supplied.
pub fn export_embeddings(
    path: &Path,
    source: &Matrix,
    source_labels: Option<&[usize]>,
    target: &Matrix,
    target_labels: Option<&[usize]>,
) -> Result<()> {
    if source.ncols() != target.ncols() {
        return Err(Error::shape("export_embeddings", "embedding widths differ"));
    }
    let mut out = String::from("network,node,label");
    for d in 0..source.ncols() {
        let _ = write!(out, ",e{d}");
    }
    out.push('\n');
    push_rows(&mut out, Network::Source, source, source_labels)?;
    push_rows(&mut out, Network::Target, target, target_labels)?;
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_embeddings(path: &Path) -> Result<Vec<EmbeddingRow>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file = path.display().to_string();
    let err = |line: usize, message: String| Error::Parse {
        file: file.clone(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate();
    let width = match lines.next() {
        Some((_, header)) => header.split(',').count().saturating_sub(3),
        None => return Err(err(1, "empty file".into())),
    };
    let mut rows = Vec::new();
    for (i, line) in lines {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != width + 3 {
            return Err(err(i + 1, format!("expected {} cells", width + 3)));
        }
        let network = match cells[0] {
            "source" => Network::Source,
            "target" => Network::Target,
            other => return Err(err(i + 1, format!("unknown network {other:?}"))),
        };
        let node = cells[1].parse().map_err(|e| err(i + 1, format!("{e}")))?;
        let label = match cells[2] {
            "" => None,
            s => Some(s.parse().map_err(|e| err(i + 1, format!("{e}")))?),
        };
        let values = cells[3..]
            .iter()
            .map(|c| c.parse::<f64>().map_err(|e| err(i + 1, format!("{e}"))))
            .collect::<Result<Vec<_>>>()?;
        rows.push(EmbeddingRow {
            network,
            node,
            label,
            values,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn perfect_predictor() {
        let ls = LabelSpace::new(2, 3).unwrap();
        let t = [1, 2, 3, 3];
        let r = build_report(&t, &t, &[0.1, 0.2, 0.9, 0.8], &ls).unwrap();
        assert_eq!((r.os, r.os_star, r.hs, r.auc), (1.0, 1.0, 1.0, 1.0));
        assert!((r.openness - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn constant_unknown_predictor() {
        let ls = LabelSpace::new(2, 4).unwrap();
        let t = [1, 2, 3, 3, 1];
        let r = build_report(&t, &[3; 5], &[0.5; 5], &ls).unwrap();
        assert_eq!(r.os_star, 0.0);
        assert_eq!(r.unknown_accuracy, 1.0);
        assert_eq!(r.hs, 0.0);
        assert_eq!(r.auc, 0.5);
        let identity = (2.0 * r.os_star + r.per_class_accuracy[2]) / 3.0;
        assert_eq!(r.os, identity);
    }

    #[test]
    fn report_text_lists_every_class() {
        let ls = LabelSpace::new(2, 3).unwrap();
        let r = build_report(&[1, 2, 3], &[1, 3, 3], &[0.0, 0.6, 0.7], &ls).unwrap();
        let text = r.to_text();
        assert!(text.contains("os_star=0.5\n"));
        assert!(text.contains("class3_count=1\n"));
        assert_eq!(text.lines().count(), 8 + 6);
    }

    #[test]
    fn embeddings_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.csv");
        let hs = array![[0.1, -2.5], [1.0 / 3.0, 0.0], [7.0, 1e-300]];
        let ht = array![[0.2, 0.3], [0.4, std::f64::consts::PI]];
        export_embeddings(&path, &hs, Some(&[1, 2, 1]), &ht, Some(&[3, 1])).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 6);
        assert!(text.starts_with("network,node,label,e0,e1\n"));
        let rows = read_embeddings(&path).unwrap();
        assert_eq!(rows[3].network, Network::Target);
        assert_eq!(rows[3].label, Some(3));
        for (row, src) in rows.iter().zip(hs.rows().into_iter().chain(ht.rows())) {
            for (a, b) in row.values.iter().zip(src) {
                assert!((a - b).abs() <= 1e-9);
            }
        }
        export_embeddings(&path, &hs, None, &ht, None).unwrap();
        assert!(read_embeddings(&path).unwrap().iter().all(|r| r.label.is_none()));
    }
}
