//! Clustering-based pseudo-labels and signed domain-adaptation coefficients.
//!
//! Class and cluster ids are 1-based: clusters `1..=K` are seeded from the
//! source class means and cluster `K+1` from the pseudo-unknown set `U`.

use crate::diff::Matrix;
use crate::error::{Error, Result};
use crate::model::row_argmax;

/// Lloyd iteration budget.
pub const KMEANS_MAX_ITERS: usize = 100;

/// `K+1` centroids in embedding space, row `k-1` for cluster `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct CentroidSet {
    pub centroids: Matrix,
}

impl CentroidSet {
    pub fn cluster_count(&self) -> usize {
        self.centroids.nrows()
    }
}

/// Target nodes ranked by descending unknown score (lowest id first on
/// ties), truncated to `min(r, n)`.
pub fn top_unknown(unknown_scores: &[f64], r: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..unknown_scores.len()).collect();
    order.sort_by(|&a, &b| {
        unknown_scores[b]
            .total_cmp(&unknown_scores[a])
            .then(a.cmp(&b))
    });
    order.truncate(r.min(unknown_scores.len()));
    order
}

/// Centroids `1..=K` are per-class means of source embeddings; centroid
/// `K+1` is the mean target embedding over the `r` nodes with the highest
/// unknown score. Returns the centroids and that pseudo-unknown set.
pub fn init_centroids(
    source_embeddings: &Matrix,
    source_labels: &[usize],
    known: usize,
    target_embeddings: &Matrix,
    unknown_scores: &[f64],
    r: usize,
) -> Result<(CentroidSet, Vec<usize>)> {
    let dim = source_embeddings.ncols();
    if source_labels.len() != source_embeddings.nrows()
        || unknown_scores.len() != target_embeddings.nrows()
        || target_embeddings.ncols() != dim
    {
        return Err(Error::shape("init_centroids", "misaligned inputs"));
    }
    if r == 0 || target_embeddings.nrows() == 0 {
        return Err(Error::Config("pseudo-unknown set size must be positive".into()));
    }
    let mut centroids = Matrix::zeros((known + 1, dim));
    let mut counts = vec![0usize; known];
    for (row, &label) in source_embeddings.rows().into_iter().zip(source_labels) {
        if label == 0 || label > known {
            return Err(Error::InvalidLabel {
                label,
                reason: format!("source labels must lie in 1..={known}"),
            });
        }
        let mut c = centroids.row_mut(label - 1);
        c += &row;
        counts[label - 1] += 1;
    }
    for (k, &count) in counts.iter().enumerate() {
        if count == 0 {
            return Err(Error::EmptyClass(k + 1));
        }
        let mut c = centroids.row_mut(k);
        c /= count as f64;
    }
    let unknown_set = top_unknown(unknown_scores, r);
    {
        let mut c = centroids.row_mut(known);
        for &i in &unknown_set {
            c += &target_embeddings.row(i);
        }
        c /= unknown_set.len() as f64;
    }
    Ok((CentroidSet { centroids }, unknown_set))
}

fn squared_distance(a: ndarray::ArrayView1<f64>, b: ndarray::ArrayView1<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: ndarray::ArrayView1<f64>, centroids: &Matrix) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (k, c) in centroids.rows().into_iter().enumerate() {
        let d = squared_distance(point, c);
        if d < best_d {
            best = k;
            best_d = d;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    /// 1-based cluster per point.
    pub assignments: Vec<usize>,
    pub centroids: CentroidSet,
    /// Centroid updates performed before assignments stopped changing.
    pub iterations: usize,
}

/// Lloyd's algorithm from the given centroids with Euclidean distance, until
/// assignments are stable or [`KMEANS_MAX_ITERS`] updates. Ties go to the
/// lowest cluster; an empty cluster keeps its previous centroid.
pub fn kmeans_assign(points: &Matrix, init: &CentroidSet) -> Result<KMeansResult> {
    if points.ncols() != init.centroids.ncols() {
        return Err(Error::shape(
            "kmeans",
            format!(
                "points have {} dims, centroids {}",
                points.ncols(),
                init.centroids.ncols()
            ),
        ));
    }
    let mut centroids = init.centroids.clone();
    let assign = |c: &Matrix| -> Vec<usize> {
        points.rows().into_iter().map(|p| nearest(p, c)).collect()
    };
    let mut assignments = assign(&centroids);
    let mut iterations = 0;
    while iterations < KMEANS_MAX_ITERS {
        let mut sums = Matrix::zeros(centroids.dim());
        let mut counts = vec![0usize; centroids.nrows()];
        for (p, &k) in points.rows().into_iter().zip(&assignments) {
            let mut s = sums.row_mut(k);
            s += &p;
            counts[k] += 1;
        }
        for (k, &count) in counts.iter().enumerate() {
            if count > 0 {
                let mean = sums.row(k).mapv(|v| v / count as f64);
                centroids.row_mut(k).assign(&mean);
            }
        }
        iterations += 1;
        let next = assign(&centroids);
        if next == assignments {
            break;
        }
        assignments = next;
    }
    Ok(KMeansResult {
        assignments: assignments.into_iter().map(|k| k + 1).collect(),
        centroids: CentroidSet { centroids },
        iterations,
    })
}

/// A node gets pseudo-label `k` when its cluster is `k` and the classifier's
/// argmax is `k`. Nodes of `unknown_set` still unlabeled afterwards get the
/// unknown class `K+1`.
pub fn agree_labels(
    clusters: &[usize],
    probs: &Matrix,
    unknown_set: &[usize],
) -> Result<Vec<Option<usize>>> {
    if clusters.len() != probs.nrows() {
        return Err(Error::shape(
            "agree_labels",
            format!("{} clusters for {} rows", clusters.len(), probs.nrows()),
        ));
    }
    let unknown = probs.ncols();
    let mut labels: Vec<Option<usize>> = clusters
        .iter()
        .zip(row_argmax(probs))
        .map(|(&c, arg)| (c == arg + 1).then_some(c))
        .collect();
    for &i in unknown_set {
        let slot = labels
            .get_mut(i)
            .ok_or(Error::NodeOutOfRange {
                index: i,
                node_count: clusters.len(),
            })?;
        if slot.is_none() {
            *slot = Some(unknown);
        }
    }
    Ok(labels)
}

/// Which network a node belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeOrigin {
    Source,
    Target,
}

/// `-1` for target nodes pseudo-labeled unknown, `+1` for everything else
/// (source nodes, known pseudo-labels and unlabeled target nodes).
pub fn assign_lambda(origin: NodeOrigin, pseudo: Option<usize>, unknown: usize) -> f64 {
    match (origin, pseudo) {
        (NodeOrigin::Target, Some(l)) if l == unknown => -1.0,
        _ => 1.0,
    }
}

/// Pseudo-labeling outcome for one adaptation epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoLabelState {
    /// 1-based k-means cluster per target node.
    pub cluster_labels: Vec<usize>,
    /// 1-based classifier argmax per target node.
    pub predicted: Vec<usize>,
    /// Agreement pseudo-label per target node, `None` when unlabeled.
    pub pseudo_labels: Vec<Option<usize>>,
    pub unknown_set: Vec<usize>,
    /// Signed coefficient per target node.
    pub lambda: Vec<f64>,
    pub kmeans_iterations: usize,
}

impl PseudoLabelState {
    /// Runs the whole pipeline: centroids, k-means, agreement, coefficients.
    /// With `negative_lambda` off every coefficient is `+1`.
    pub fn compute(
        source_embeddings: &Matrix,
        source_labels: &[usize],
        target_embeddings: &Matrix,
        target_probs: &Matrix,
        r: usize,
        negative_lambda: bool,
    ) -> Result<Self> {
        let known = target_probs.ncols() - 1;
        let unknown_scores: Vec<f64> = target_probs.column(known).to_vec();
        let (centroids, unknown_set) = init_centroids(
            source_embeddings,
            source_labels,
            known,
            target_embeddings,
            &unknown_scores,
            r,
        )?;
        let km = kmeans_assign(target_embeddings, &centroids)?;
        let pseudo_labels = agree_labels(&km.assignments, target_probs, &unknown_set)?;
        let lambda = pseudo_labels
            .iter()
            .map(|&p| {
                if negative_lambda {
                    assign_lambda(NodeOrigin::Target, p, known + 1)
                } else {
                    1.0
                }
            })
            .collect();
        Ok(PseudoLabelState {
            cluster_labels: km.assignments,
            predicted: row_argmax(target_probs).into_iter().map(|k| k + 1).collect(),
            pseudo_labels,
            unknown_set,
            lambda,
            kmeans_iterations: km.iterations,
        })
    }

    pub fn labeled_count(&self) -> usize {
        self.pseudo_labels.iter().flatten().count()
    }

    pub fn negative_count(&self) -> usize {
        self.lambda.iter().filter(|&&l| l < 0.0).count()
    }

    /// Rows of the pseudo-label matrix as one-hot/all-zero vectors.
    pub fn pseudo_label_matrix(&self, classes: usize) -> Matrix {
        let mut m = Matrix::zeros((self.pseudo_labels.len(), classes));
        for (i, l) in self.pseudo_labels.iter().enumerate() {
            if let Some(k) = l {
                m[[i, k - 1]] = 1.0;
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn class_centroid_is_mean() {
        let hs = array![[0.0, 0.0], [2.0, 2.0], [5.0, 5.0]];
        let ht = array![[1.0, 0.0], [0.0, 1.0], [3.0, 3.0]];
        let (c, u) = init_centroids(&hs, &[1, 1, 2], 2, &ht, &[0.9, 0.1, 0.8], 2).unwrap();
        assert_eq!(c.centroids.row(0), array![1.0, 1.0]);
        assert_eq!(c.centroids.row(1), array![5.0, 5.0]);
        assert_eq!(u, vec![0, 2]);
        assert_eq!(c.centroids.row(2), array![2.0, 1.5]);
    }

    #[test]
    fn oversized_r_takes_everything() {
        assert_eq!(top_unknown(&[0.2, 0.5, 0.5], 10), vec![1, 2, 0]);
    }

    #[test]
    fn empty_known_class_rejected() {
        let hs = array![[0.0], [1.0]];
        let ht = array![[0.0]];
        assert!(matches!(
            init_centroids(&hs, &[1, 1], 2, &ht, &[0.5], 1),
            Err(Error::EmptyClass(2))
        ));
    }

    #[test]
    fn nearest_centroid_assignment() {
        let centroids = CentroidSet {
            centroids: array![[0.0, 1.0], [5.0, 5.0]],
        };
        let km = kmeans_assign(&array![[0.0, 0.0]], &centroids).unwrap();
        assert_eq!(km.assignments, vec![1]);
    }

    #[test]
    fn fixed_point_converges_immediately() {
        let centroids = CentroidSet {
            centroids: array![[0.0, 0.0], [4.0, 4.0]],
        };
        let points = array![[0.0, 0.0], [4.0, 4.0]];
        let km = kmeans_assign(&points, &centroids).unwrap();
        assert_eq!(km.iterations, 1);
        assert_eq!(km.assignments, vec![1, 2]);
        assert_eq!(km.centroids, centroids);
    }

    #[test]
    fn equidistant_point_goes_to_lowest_cluster() {
        let centroids = CentroidSet {
            centroids: array![[-1.0], [1.0]],
        };
        let km = kmeans_assign(&array![[0.0]], &centroids).unwrap();
        assert_eq!(km.assignments, vec![1]);
    }

    #[test]
    fn agreement_rules() {
        // K = 2, three classes; argmax per row is 2, 3, 3.
        let probs = array![[0.1, 0.6, 0.3], [0.1, 0.2, 0.7], [0.1, 0.2, 0.7]];
        let clusters = [2, 2, 2];
        let labels = agree_labels(&clusters, &probs, &[2]).unwrap();
        assert_eq!(labels, vec![Some(2), None, Some(3)]);
    }

    #[test]
    fn lambda_signs() {
        assert_eq!(assign_lambda(NodeOrigin::Source, Some(3), 3), 1.0);
        assert_eq!(assign_lambda(NodeOrigin::Source, None, 3), 1.0);
        assert_eq!(assign_lambda(NodeOrigin::Target, Some(3), 3), -1.0);
        assert_eq!(assign_lambda(NodeOrigin::Target, Some(1), 3), 1.0);
        assert_eq!(assign_lambda(NodeOrigin::Target, None, 3), 1.0);
    }

    /// Plain-loop Lloyd with the same tie and empty-cluster rules.
    fn lloyd_oracle(points: &[Vec<f64>], mut cents: Vec<Vec<f64>>) -> Vec<usize> {
        let dist = |a: &[f64], b: &[f64]| -> f64 {
            a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
        };
        let assign = |cents: &Vec<Vec<f64>>| -> Vec<usize> {
            points
                .iter()
                .map(|p| {
                    let mut best = 0;
                    for k in 1..cents.len() {
                        if dist(p, &cents[k]) < dist(p, &cents[best]) {
                            best = k;
                        }
                    }
                    best
                })
                .collect()
        };
        let mut a = assign(&cents);
        for _ in 0..KMEANS_MAX_ITERS {
            for (k, c) in cents.iter_mut().enumerate() {
                let members: Vec<&Vec<f64>> =
                    points.iter().zip(&a).filter(|(_, &j)| j == k).map(|(p, _)| p).collect();
                if !members.is_empty() {
                    for d in 0..c.len() {
                        c[d] = members.iter().map(|m| m[d]).sum::<f64>() / members.len() as f64;
                    }
                }
            }
            let next = assign(&cents);
            if next == a {
                break;
            }
            a = next;
        }
        a.into_iter().map(|k| k + 1).collect()
    }

    #[test]
    fn matches_plain_lloyd() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let points: Vec<Vec<f64>> = (0..30)
            .map(|i| {
                let c = (i % 3) as f64 * 3.0;
                vec![c + rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)]
            })
            .collect();
        let init = vec![vec![0.5, 0.5], vec![1.0, -1.0], vec![2.0, 0.0]];
        let m = Matrix::from_shape_fn((30, 2), |(i, j)| points[i][j]);
        let c = Matrix::from_shape_fn((3, 2), |(i, j)| init[i][j]);
        let km = kmeans_assign(&m, &CentroidSet { centroids: c }).unwrap();
        assert_eq!(km.assignments, lloyd_oracle(&points, init));
    }

    mod props {
        use super::super::*;
        use ndarray::Array2;
        use proptest::prelude::*;

        fn prob_rows(n: usize, c: usize) -> impl Strategy<Value = Matrix> {
            proptest::collection::vec(0.01f64..1.0, n * c).prop_map(move |v| {
                let mut m = Array2::from_shape_vec((n, c), v).unwrap();
                for mut row in m.rows_mut() {
                    let s = row.sum();
                    row /= s;
                }
                m
            })
        }

        proptest! {
            #[test]
            fn pseudo_labels_are_sound(
                probs in prob_rows(12, 4),
                clusters in proptest::collection::vec(1usize..=4, 12),
                r in 1usize..6,
            ) {
                let scores: Vec<f64> = probs.column(3).to_vec();
                let u = top_unknown(&scores, r);
                let labels = agree_labels(&clusters, &probs, &u).unwrap();
                let argmax = row_argmax(&probs);
                for (i, l) in labels.iter().enumerate() {
                    match l {
                        Some(k) if *k == clusters[i] && *k == argmax[i] + 1 => {}
                        Some(4) => prop_assert!(u.contains(&i)),
                        Some(_) => prop_assert!(false, "unsupported label at {i}"),
                        None => prop_assert!(!u.contains(&i)),
                    }
                    let lambda = assign_lambda(NodeOrigin::Target, *l, 4);
                    prop_assert_eq!(lambda == -1.0, *l == Some(4));
                }
                prop_assert_eq!(u.len(), r);
            }
        }
    }
}
