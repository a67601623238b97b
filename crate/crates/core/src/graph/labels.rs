use super::AttributedGraph;
use crate::error::{Error, Result};

/// Known classes `1..=K` kept as-is; original classes `K+1..=C` all map to
/// the single unknown class `K+1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabelSpace {
    known: usize,
    original: usize,
}

impl LabelSpace {
    pub fn new(known: usize, original: usize) -> Result<Self> {
        if known < 2 {
            return Err(Error::InvalidLabelSpace(format!(
                "need at least 2 known classes, got {known}"
            )));
        }
        if original <= known {
            return Err(Error::InvalidLabelSpace(format!(
                "original class count {original} must exceed known count {known}"
            )));
        }
        Ok(LabelSpace { known, original })
    }

    /// `K`.
    pub fn known(&self) -> usize {
        self.known
    }

    /// `C`.
    pub fn original(&self) -> usize {
        self.original
    }

    /// The unknown class id `K+1`.
    pub fn unknown(&self) -> usize {
        self.known + 1
    }

    /// Width of the open-set output space, `K+1`.
    pub fn output_classes(&self) -> usize {
        self.known + 1
    }

    pub fn map(&self, label: usize) -> Result<usize> {
        match label {
            0 => Err(Error::InvalidLabel {
                label,
                reason: "class ids are 1-based".into(),
            }),
            l if l > self.original => Err(Error::InvalidLabel {
                label,
                reason: format!("exceeds original class count {}", self.original),
            }),
            l if l <= self.known => Ok(l),
            _ => Ok(self.known + 1),
        }
    }

    pub fn map_all(&self, labels: &[usize]) -> Result<Vec<usize>> {
        labels.iter().map(|&l| self.map(l)).collect()
    }
}

/// Fraction of original target classes that are private: `(C-K)/C`.
pub fn openness(ls: &LabelSpace) -> f64 {
    (ls.original - ls.known) as f64 / ls.original as f64
}

/// Copy of `g` with labels folded into `1..=K+1`.
pub fn remap_labels(g: &AttributedGraph, ls: &LabelSpace) -> Result<AttributedGraph> {
    let mapped = ls.map_all(g.require_labels()?)?;
    g.with_labels(Some(mapped))
}
