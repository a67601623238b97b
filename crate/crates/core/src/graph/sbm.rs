//! Stochastic block model pairs with Gaussian class-conditional attributes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::{AttributedGraph, LabelSpace};
use crate::diff::Matrix;
use crate::error::{Error, Result};

/// One network's block model.
///
/// Class `c` (1-based) has `class_sizes[c-1]` nodes whose attributes are
/// drawn from `N(class_means[c-1] + domain_shift · u, attr_std²)`, where `u`
/// is a unit direction shared by both networks of a pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SbmSpec {
    pub class_sizes: Vec<usize>,
    pub p_in: f64,
    pub p_out: f64,
    pub attr_dim: usize,
    pub class_means: Vec<Vec<f64>>,
    pub domain_shift: f64,
    pub attr_std: f64,
    pub seed: u64,
}

impl SbmSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.p_out && self.p_out < self.p_in && self.p_in <= 1.0) {
            return Err(Error::InvalidSbm(format!(
                "need 0 <= p_out < p_in <= 1, got p_in={} p_out={}",
                self.p_in, self.p_out
            )));
        }
        if self.class_sizes.is_empty() {
            return Err(Error::InvalidSbm("no classes".into()));
        }
        if let Some(c) = self.class_sizes.iter().position(|&s| s == 0) {
            return Err(Error::InvalidSbm(format!("class {} is empty", c + 1)));
        }
        if self.attr_dim == 0 {
            return Err(Error::InvalidSbm("attr_dim must be positive".into()));
        }
        if self.class_means.len() < self.class_sizes.len() {
            return Err(Error::InvalidSbm(format!(
                "{} class means for {} classes",
                self.class_means.len(),
                self.class_sizes.len()
            )));
        }
        if self.class_means.iter().any(|m| m.len() != self.attr_dim) {
            return Err(Error::InvalidSbm("class mean dimension != attr_dim".into()));
        }
        if !(self.attr_std >= 0.0 && self.attr_std.is_finite() && self.domain_shift.is_finite())
        {
            return Err(Error::InvalidSbm("attr_std/domain_shift must be finite, std >= 0".into()));
        }
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.class_sizes.iter().sum()
    }

    fn generate(&self, shift_direction: &[f64]) -> Result<AttributedGraph> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let labels: Vec<usize> = self
            .class_sizes
            .iter()
            .enumerate()
            .flat_map(|(c, &size)| std::iter::repeat_n(c + 1, size))
            .collect();
        let n = labels.len();

        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let p = if labels[i] == labels[j] {
                    self.p_in
                } else {
                    self.p_out
                };
                if rng.random::<f64>() < p {
                    edges.push((i, j));
                }
            }
        }

        let noise = Normal::new(0.0, self.attr_std)
            .map_err(|e| Error::InvalidSbm(e.to_string()))?;
        let mut attributes = Matrix::zeros((n, self.attr_dim));
        for (i, mut row) in attributes.rows_mut().into_iter().enumerate() {
            let mean = &self.class_means[labels[i] - 1];
            for (d, v) in row.iter_mut().enumerate() {
                *v = mean[d] + self.domain_shift * shift_direction[d] + noise.sample(&mut rng);
            }
        }
        AttributedGraph::new(edges, attributes, Some(labels))
    }
}

fn unit_direction(dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_d1ec_7104);
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-9 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Draws a source network over the known classes and a target network over
/// all original classes. The two graphs share no nodes; the attribute shift
/// direction is derived from the target seed.
pub fn generate_sbm_pair(
    source: &SbmSpec,
    target: &SbmSpec,
    ls: &LabelSpace,
) -> Result<(AttributedGraph, AttributedGraph)> {
    if source.attr_dim != target.attr_dim {
        return Err(Error::InvalidSbm(format!(
            "attr_dim differs: source {} vs target {}",
            source.attr_dim, target.attr_dim
        )));
    }
    if source.class_sizes.len() > ls.known() {
        return Err(Error::InvalidSbm(format!(
            "source has {} classes but only {} are known",
            source.class_sizes.len(),
            ls.known()
        )));
    }
    if target.class_sizes.len() != ls.original() {
        return Err(Error::InvalidSbm(format!(
            "target has {} classes, label space expects {}",
            target.class_sizes.len(),
            ls.original()
        )));
    }
    let direction = unit_direction(target.attr_dim, target.seed);
    Ok((source.generate(&direction)?, target.generate(&direction)?))
}

/// Convenience description of a symmetric desk-scale pair: equal class
/// sizes, class means drawn once and shared by both networks.
#[derive(Debug, Clone, PartialEq)]
pub struct SbmPairConfig {
    pub known: usize,
    pub private: usize,
    pub nodes_per_class: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub attr_dim: usize,
    /// Standard deviation of each class-mean coordinate.
    pub mean_scale: f64,
    pub attr_std: f64,
    /// Magnitude of the target-only attribute shift.
    pub shift: f64,
    pub seed: u64,
}

impl Default for SbmPairConfig {
    fn default() -> Self {
        SbmPairConfig {
            known: 5,
            private: 2,
            nodes_per_class: 60,
            p_in: 0.2,
            p_out: 0.01,
            attr_dim: 32,
            mean_scale: 1.0,
            attr_std: 1.0,
            shift: 1.0,
            seed: 0,
        }
    }
}

impl SbmPairConfig {
    pub fn label_space(&self) -> Result<LabelSpace> {
        LabelSpace::new(self.known, self.known + self.private)
    }

    pub fn specs(&self) -> Result<(SbmSpec, SbmSpec, LabelSpace)> {
        let ls = self.label_space()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mean_dist = Normal::new(0.0, self.mean_scale)
            .map_err(|e| Error::InvalidSbm(e.to_string()))?;
        let class_means: Vec<Vec<f64>> = (0..ls.original())
            .map(|_| (0..self.attr_dim).map(|_| mean_dist.sample(&mut rng)).collect())
            .collect();
        let source_seed: u64 = rng.random();
        let target_seed: u64 = rng.random();
        let base = SbmSpec {
            class_sizes: vec![self.nodes_per_class; self.known],
            p_in: self.p_in,
            p_out: self.p_out,
            attr_dim: self.attr_dim,
            class_means,
            domain_shift: 0.0,
            attr_std: self.attr_std,
            seed: source_seed,
        };
        let target = SbmSpec {
            class_sizes: vec![self.nodes_per_class; ls.original()],
            domain_shift: self.shift,
            seed: target_seed,
            ..base.clone()
        };
        Ok((base, target, ls))
    }

    /// Returns `(source, target, label space)`; target labels are original
    /// ids in `1..=C`.
    pub fn generate(&self) -> Result<(AttributedGraph, AttributedGraph, LabelSpace)> {
        let (s, t, ls) = self.specs()?;
        let (source, target) = generate_sbm_pair(&s, &t, &ls)?;
        Ok((source, target, ls))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn target_contains_private_classes() {
        let cfg = SbmPairConfig {
            known: 5,
            private: 2,
            nodes_per_class: 10,
            ..Default::default()
        };
        let (s, t, _) = cfg.generate().unwrap();
        assert!(s.labels().unwrap().iter().all(|&l| l <= 5));
        for c in [6, 7] {
            assert!(t.labels().unwrap().contains(&c));
        }
        assert_eq!(s.node_count(), 50);
        assert_eq!(t.node_count(), 70);
    }

    #[test]
    fn same_seed_same_graphs() {
        let cfg = SbmPairConfig {
            nodes_per_class: 15,
            seed: 42,
            ..Default::default()
        };
        assert_eq!(cfg.generate().unwrap(), cfg.generate().unwrap());
    }

    #[test]
    fn rejects_bad_specs() {
        let (mut s, t, ls) = SbmPairConfig::default().specs().unwrap();
        s.attr_dim += 1;
        assert!(generate_sbm_pair(&s, &t, &ls).is_err());

        let (mut s, t, ls) = SbmPairConfig::default().specs().unwrap();
        s.class_sizes[1] = 0;
        assert!(matches!(
            generate_sbm_pair(&s, &t, &ls),
            Err(Error::InvalidSbm(_))
        ));

        let (mut s, t, ls) = SbmPairConfig::default().specs().unwrap();
        s.p_out = s.p_in;
        assert!(generate_sbm_pair(&s, &t, &ls).is_err());
    }

    #[test]
    fn zero_shift_keeps_class_means() {
        // With no shift and no noise, attributes equal the shared class means.
        let cfg = SbmPairConfig {
            nodes_per_class: 4,
            shift: 0.0,
            attr_std: 0.0,
            ..Default::default()
        };
        let (s, t, _) = cfg.generate().unwrap();
        for c in 1..=5 {
            let si = s.labels().unwrap().iter().position(|&l| l == c).unwrap();
            let ti = t.labels().unwrap().iter().position(|&l| l == c).unwrap();
            assert_eq!(s.attributes().row(si), t.attributes().row(ti));
        }
    }
}
