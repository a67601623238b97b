use rand::seq::SliceRandom;
use rand::Rng;

/// Source and target node ids contributing to one iteration's losses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Minibatch {
    pub source: Vec<usize>,
    pub target: Vec<usize>,
}

/// Per-epoch batch schedule over two networks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchSampler {
    pub source_nodes: usize,
    pub target_nodes: usize,
    pub batch: usize,
}

fn cyclic_batch(perm: &[usize], iteration: usize, size: usize) -> Vec<usize> {
    let start = iteration * size;
    (start..start + size).map(|p| perm[p % perm.len()]).collect()
}

impl BatchSampler {
    pub fn new(source_nodes: usize, target_nodes: usize, batch: usize) -> Self {
        BatchSampler {
            source_nodes,
            target_nodes,
            batch: batch.max(1),
        }
    }

    pub fn iterations(&self) -> usize {
        self.source_nodes.max(self.target_nodes).div_ceil(self.batch)
    }

    /// Draws one shuffled permutation per network and walks it in chunks of
    /// `min(B, n)`, wrapping around when a network runs out before the other.
    pub fn epoch<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Minibatch> {
        let mut perm_s: Vec<usize> = (0..self.source_nodes).collect();
        let mut perm_t: Vec<usize> = (0..self.target_nodes).collect();
        perm_s.shuffle(rng);
        perm_t.shuffle(rng);
        let bs = self.batch.min(self.source_nodes);
        let bt = self.batch.min(self.target_nodes);
        (0..self.iterations())
            .map(|it| Minibatch {
                source: cyclic_batch(&perm_s, it, bs),
                target: cyclic_batch(&perm_t, it, bt),
            })
            .collect()
    }
}
