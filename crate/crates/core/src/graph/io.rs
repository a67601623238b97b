//! Dataset directories: `edges.tsv`, `attrs.csv` and optionally `labels.txt`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::AttributedGraph;
use crate::diff::Matrix;
use crate::error::{Error, Result};

pub const EDGES_FILE: &str = "edges.tsv";
pub const ATTRS_FILE: &str = "attrs.csv";
pub const LABELS_FILE: &str = "labels.txt";

fn read(path: &Path) -> Result<String> {
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_err(file: &str, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        file: file.to_string(),
        line,
        message: message.into(),
    }
}

/// Content lines with their 1-based line numbers; blank lines and `#`
/// comments are skipped.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let line = raw.split('#').next().unwrap_or("").trim();
        (!line.is_empty()).then_some((i + 1, line))
    })
}

fn parse_edges(text: &str) -> Result<Vec<(usize, usize)>> {
    content_lines(text)
        .map(|(no, line)| {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 2 {
                return Err(parse_err(EDGES_FILE, no, "expected two node ids"));
            }
            let id = |s: &str| {
                s.parse::<usize>()
                    .map_err(|e| parse_err(EDGES_FILE, no, format!("bad node id {s:?}: {e}")))
            };
            Ok((id(fields[0])?, id(fields[1])?))
        })
        .collect()
}

fn parse_attrs(text: &str) -> Result<Matrix> {
    let mut values = Vec::new();
    let mut width = None;
    let mut rows = 0;
    for (no, line) in content_lines(text) {
        let row = line
            .split(',')
            .map(|s| {
                let s = s.trim();
                s.parse::<f64>()
                    .map_err(|e| parse_err(ATTRS_FILE, no, format!("bad value {s:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(parse_err(
                    ATTRS_FILE,
                    no,
                    format!("{} columns, expected {w}", row.len()),
                ))
            }
            _ => {}
        }
        values.extend(row);
        rows += 1;
    }
    let width = width.ok_or_else(|| parse_err(ATTRS_FILE, 0, "no attribute rows"))?;
    Matrix::from_shape_vec((rows, width), values)
        .map_err(|e| parse_err(ATTRS_FILE, 0, e.to_string()))
}

fn parse_labels(text: &str) -> Result<Vec<usize>> {
    content_lines(text)
        .map(|(no, line)| {
            let label = line
                .parse::<usize>()
                .map_err(|e| parse_err(LABELS_FILE, no, format!("bad label {line:?}: {e}")))?;
            if label == 0 {
                return Err(parse_err(LABELS_FILE, no, "class ids are 1-based"));
            }
            Ok(label)
        })
        .collect()
}

/// Loads a dataset directory.
///
/// With `expect_labels` the label file is required; otherwise it is read
/// only if present.
pub fn load_graph(dir: impl AsRef<Path>, expect_labels: bool) -> Result<AttributedGraph> {
    let dir = dir.as_ref();
    let edges = parse_edges(&read(&dir.join(EDGES_FILE))?)?;
    let attributes = parse_attrs(&read(&dir.join(ATTRS_FILE))?)?;
    let label_path = dir.join(LABELS_FILE);
    let labels = if expect_labels || label_path.is_file() {
        let labels = parse_labels(&read(&label_path)?)?;
        if labels.len() != attributes.nrows() {
            return Err(Error::RowMismatch {
                what: "labels",
                found: labels.len(),
                expected: attributes.nrows(),
            });
        }
        Some(labels)
    } else {
        None
    };
    AttributedGraph::new(edges, attributes, labels)
}

/// Writes `g` in the dataset directory format, creating `dir` if needed.
pub fn save_graph(g: &AttributedGraph, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let mut edges = String::new();
    for &(u, v) in g.edges() {
        let _ = writeln!(edges, "{u}\t{v}");
    }
    let mut attrs = String::new();
    for row in g.attributes().rows() {
        let mut first = true;
        for v in row {
            if !first {
                attrs.push(',');
            }
            first = false;
            let _ = write!(attrs, "{v}");
        }
        attrs.push('\n');
    }
    let write = |name: &str, body: &str| {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|e| Error::io(path, e))
    };
    write(EDGES_FILE, &edges)?;
    write(ATTRS_FILE, &attrs)?;
    if let Some(labels) = g.labels() {
        let mut body = String::new();
        for l in labels {
            let _ = writeln!(body, "{l}");
        }
        write(LABELS_FILE, &body)?;
    }
    Ok(())
}
