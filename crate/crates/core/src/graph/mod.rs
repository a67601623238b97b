//! Attributed graphs and the analyses run on them.

mod homophily;
mod io;
mod labels;
mod sbm;

pub use homophily::{homophily_ratio, folding_check, HomophilyCheck, HOMOPHILY_TOL};
pub use io::{load_graph, save_graph, ATTRS_FILE, EDGES_FILE, LABELS_FILE};
pub use labels::{openness, remap_labels, LabelSpace};
pub use sbm::{generate_sbm_pair, SbmPairConfig, SbmSpec};

use std::collections::BTreeSet;

use crate::diff::Matrix;
use crate::error::{Error, Result};

/// Undirected simple graph with a dense attribute matrix and optional
/// 1-based class labels.
///
/// Immutable once built; every constructor validates the invariants
/// (endpoints in range, no self-loops, one attribute row and label per node).
#[derive(Debug, Clone, PartialEq)]
pub struct AttributedGraph {
    edges: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
    attributes: Matrix,
    labels: Option<Vec<usize>>,
}

impl AttributedGraph {
    /// Builds a graph from an edge list in any orientation. Duplicate edges
    /// collapse and self-loops are dropped.
    pub fn new(
        edges: impl IntoIterator<Item = (usize, usize)>,
        attributes: Matrix,
        labels: Option<Vec<usize>>,
    ) -> Result<Self> {
        let node_count = attributes.nrows();
        if node_count == 0 {
            return Err(Error::RowMismatch {
                what: "attributes",
                found: 0,
                expected: 1,
            });
        }
        if attributes.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("attributes"));
        }
        let mut set = BTreeSet::new();
        for (u, v) in edges {
            for index in [u, v] {
                if index >= node_count {
                    return Err(Error::NodeOutOfRange { index, node_count });
                }
            }
            if u != v {
                set.insert((u.min(v), u.max(v)));
            }
        }
        if let Some(labels) = &labels {
            if labels.len() != node_count {
                return Err(Error::RowMismatch {
                    what: "labels",
                    found: labels.len(),
                    expected: node_count,
                });
            }
            if labels.contains(&0) {
                return Err(Error::InvalidLabel {
                    label: 0,
                    reason: "class ids are 1-based".into(),
                });
            }
        }
        let mut neighbors = vec![Vec::new(); node_count];
        for &(u, v) in &set {
            neighbors[u].push(v);
            neighbors[v].push(u);
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }
        Ok(AttributedGraph {
            edges: set.into_iter().collect(),
            neighbors,
            attributes,
            labels,
        })
    }

    pub fn node_count(&self) -> usize {
        self.attributes.nrows()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn attr_dim(&self) -> usize {
        self.attributes.ncols()
    }

    /// Undirected edges as `(u, v)` with `u < v`, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Sorted neighbors of `node`, excluding itself.
    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.neighbors[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.neighbors[node].len()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.node_count() && self.neighbors[u].binary_search(&v).is_ok()
    }

    pub fn attributes(&self) -> &Matrix {
        &self.attributes
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn require_labels(&self) -> Result<&[usize]> {
        self.labels().ok_or(Error::Unlabeled)
    }

    /// Largest label present, i.e. the class count of a labeled graph.
    pub fn class_count(&self) -> Option<usize> {
        self.labels().and_then(|l| l.iter().copied().max())
    }

    pub fn with_labels(&self, labels: Option<Vec<usize>>) -> Result<Self> {
        AttributedGraph::new(self.edges.iter().copied(), self.attributes.clone(), labels)
    }

    /// Subgraph on `keep` (in the given order), with nodes renumbered
    /// `0..keep.len()`.
    pub fn induced_subgraph(&self, keep: &[usize]) -> Result<Self> {
        let mut position = vec![usize::MAX; self.node_count()];
        for (new, &old) in keep.iter().enumerate() {
            if old >= self.node_count() {
                return Err(Error::NodeOutOfRange {
                    index: old,
                    node_count: self.node_count(),
                });
            }
            position[old] = new;
        }
        let edges = self.edges.iter().filter_map(|&(u, v)| {
            let (a, b) = (position[u], position[v]);
            (a != usize::MAX && b != usize::MAX).then_some((a, b))
        });
        let attributes = self.attributes.select(ndarray::Axis(0), keep);
        let labels = self
            .labels
            .as_ref()
            .map(|l| keep.iter().map(|&i| l[i]).collect());
        AttributedGraph::new(edges, attributes, labels)
    }

    /// Relabels node `i` as `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.node_count();
        let mut inverse = vec![usize::MAX; n];
        for (old, &new) in perm.iter().enumerate() {
            if new >= n || inverse[new] != usize::MAX {
                return Err(Error::Config(format!("not a permutation of 0..{n}")));
            }
            inverse[new] = old;
        }
        // Row `new` of the permuted graph is row `inverse[new]` of this one.
        let attributes = self.attributes.select(ndarray::Axis(0), &inverse);
        let labels = self
            .labels
            .as_ref()
            .map(|l| inverse.iter().map(|&old| l[old]).collect());
        let edges = self.edges.iter().map(|&(u, v)| (perm[u], perm[v]));
        AttributedGraph::new(edges, attributes, labels)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> AttributedGraph {
        AttributedGraph::new([(0, 1), (1, 2)], Matrix::zeros((3, 2)), None).unwrap()
    }

    #[test]
    fn path_has_two_symmetric_edges() {
        let g = path3();
        assert_eq!(g.edge_count(), 2);
        for (u, v) in [(0, 1), (1, 2)] {
            assert!(g.has_edge(u, v) && g.has_edge(v, u));
        }
        assert!(!g.has_edge(0, 2));
        assert!(!g.has_edge(1, 1));
    }

    #[test]
    fn reversed_duplicate_collapses() {
        let g = AttributedGraph::new([(0, 1), (1, 0), (1, 1)], Matrix::zeros((2, 1)), None)
            .unwrap();
        assert_eq!(g.edges(), &[(0, 1)]);
    }

    #[test]
    fn out_of_range_endpoint() {
        let err = AttributedGraph::new([(0, 5)], Matrix::zeros((4, 1)), None).unwrap_err();
        assert!(matches!(
            err,
            Error::NodeOutOfRange {
                index: 5,
                node_count: 4
            }
        ));
    }

    #[test]
    fn label_count_must_match() {
        let err = AttributedGraph::new([], Matrix::zeros((3, 1)), Some(vec![1, 2])).unwrap_err();
        assert!(matches!(err, Error::RowMismatch { what: "labels", .. }));
    }

    #[test]
    fn induced_subgraph_renumbers() {
        let g = AttributedGraph::new(
            [(0, 1), (1, 2), (2, 3)],
            Matrix::zeros((4, 1)),
            Some(vec![1, 2, 3, 4]),
        )
        .unwrap();
        let sub = g.induced_subgraph(&[1, 2, 3]).unwrap();
        assert_eq!(sub.edges(), &[(0, 1), (1, 2)]);
        assert_eq!(sub.labels().unwrap(), &[2, 3, 4]);
    }
}
