use super::{AttributedGraph, LabelSpace};
use crate::error::{Error, Result};

/// Slack allowed when comparing homophily before and after label folding.
pub const HOMOPHILY_TOL: f64 = 1e-12;

/// Mean over non-isolated nodes of the fraction of neighbors sharing the
/// node's label. Isolated nodes have no defined fraction and are skipped.
pub fn homophily_ratio(g: &AttributedGraph) -> Result<f64> {
    homophily_with(g, g.require_labels()?)
}

pub(crate) fn homophily_with(g: &AttributedGraph, labels: &[usize]) -> Result<f64> {
    let mut total = 0.0;
    let mut counted = 0usize;
    for node in 0..g.node_count() {
        let nbrs = g.neighbors(node);
        if nbrs.is_empty() {
            continue;
        }
        let same = nbrs.iter().filter(|&&j| labels[j] == labels[node]).count();
        total += same as f64 / nbrs.len() as f64;
        counted += 1;
    }
    if counted == 0 {
        return Err(Error::Metric("homophily of a graph without edges".into()));
    }
    Ok(total / counted as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomophilyCheck {
    pub original: f64,
    pub remapped: f64,
    pub holds: bool,
}

/// Homophily over the original labels and over the folded `K+1` labels.
/// Folding can only turn inter-class edges into intra-class ones, so
/// `remapped >= original` must hold.
pub fn folding_check(g: &AttributedGraph, ls: &LabelSpace) -> Result<HomophilyCheck> {
    let labels = g.require_labels()?;
    let original = homophily_with(g, labels)?;
    let remapped = homophily_with(g, &ls.map_all(labels)?)?;
    Ok(HomophilyCheck {
        original,
        remapped,
        holds: remapped >= original - HOMOPHILY_TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diff::Matrix;

    fn graph(n: usize, edges: &[(usize, usize)], labels: Vec<usize>) -> AttributedGraph {
        AttributedGraph::new(edges.iter().copied(), Matrix::zeros((n, 1)), Some(labels)).unwrap()
    }

    #[test]
    fn path_hand_value() {
        let g = graph(3, &[(0, 1), (1, 2)], vec![1, 1, 2]);
        assert!((homophily_ratio(&g).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn complete_same_label() {
        let edges: Vec<_> = (0..5)
            .flat_map(|i| (i + 1..5).map(move |j| (i, j)))
            .collect();
        let g = graph(5, &edges, vec![3; 5]);
        assert_eq!(homophily_ratio(&g).unwrap(), 1.0);
    }

    #[test]
    fn alternating_bipartite() {
        let g = graph(4, &[(0, 1), (1, 2), (2, 3), (3, 0)], vec![1, 2, 1, 2]);
        assert_eq!(homophily_ratio(&g).unwrap(), 0.0);
    }

    #[test]
    fn isolated_nodes_skipped() {
        let g = graph(4, &[(0, 1)], vec![1, 1, 2, 2]);
        assert_eq!(homophily_ratio(&g).unwrap(), 1.0);
    }

    #[test]
    fn unlabeled_rejected() {
        let g = AttributedGraph::new([(0, 1)], Matrix::zeros((2, 1)), None).unwrap();
        assert!(matches!(homophily_ratio(&g), Err(Error::Unlabeled)));
    }

    #[test]
    fn folding_merges_private_classes() {
        let g = graph(3, &[(0, 1), (1, 2)], vec![1, 3, 4]);
        let check = folding_check(&g, &LabelSpace::new(2, 4).unwrap()).unwrap();
        assert_eq!(check.original, 0.0);
        assert!((check.remapped - 0.5).abs() < 1e-15);
        assert!(check.holds);
    }

    #[test]
    fn known_only_labels_unchanged() {
        let g = graph(4, &[(0, 1), (1, 2), (2, 3)], vec![1, 2, 2, 1]);
        let check = folding_check(&g, &LabelSpace::new(2, 5).unwrap()).unwrap();
        assert_eq!(check.original, check.remapped);
        assert!(check.holds);
    }
}
