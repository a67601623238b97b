use std::sync::Arc;

use rand::Rng;

use crate::diff::{Matrix, SegmentIndex, Tape, Var};
use crate::error::{Error, Result};
use crate::graph::AttributedGraph;

/// Negative slope of the LeakyReLU applied to attention scores.
pub const ATTENTION_SLOPE: f64 = 0.2;

/// Uniform Glorot initialization in `±sqrt(6 / (fan_in + fan_out))`.
pub fn glorot<R: Rng + ?Sized>(rows: usize, cols: usize, fans: usize, rng: &mut R) -> Matrix {
    let bound = (6.0 / fans as f64).sqrt();
    Matrix::from_shape_fn((rows, cols), |_| rng.random_range(-bound..=bound))
}

/// Node features plus the `N_i ∪ {i}` neighborhoods of one graph, in the
/// form the tape consumes.
#[derive(Debug, Clone)]
pub struct GraphContext {
    pub features: Matrix,
    pub index: Arc<SegmentIndex>,
}

impl GraphContext {
    pub fn new(g: &AttributedGraph) -> Self {
        let groups = (0..g.node_count()).map(|i| {
            let nbrs = g.neighbors(i);
            let at = nbrs.partition_point(|&j| j < i);
            let mut group = Vec::with_capacity(nbrs.len() + 1);
            group.extend_from_slice(&nbrs[..at]);
            group.push(i);
            group.extend_from_slice(&nbrs[at..]);
            group
        });
        GraphContext {
            features: g.attributes().clone(),
            index: Arc::new(SegmentIndex::from_groups(groups)),
        }
    }

    pub fn node_count(&self) -> usize {
        self.features.nrows()
    }
}

/// How the outputs of multiple attention heads are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadMerge {
    Concat,
    Average,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionHead {
    /// `input_dim × out_dim` projection.
    pub weight: Matrix,
    /// Score vector applied to the center node's projection.
    pub attn_center: Matrix,
    /// Score vector applied to the neighbor's projection.
    pub attn_neighbor: Matrix,
}

/// Single graph attention layer: per head,
/// `out_i = Σ_{j ∈ N_i ∪ {i}} α_ij W x_j` with
/// `α_i· = softmax_j LeakyReLU(a_cᵀ W x_i + a_nᵀ W x_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionLayer {
    pub heads: Vec<AttentionHead>,
    pub merge: HeadMerge,
}

impl AttentionLayer {
    pub fn init<R: Rng + ?Sized>(
        input_dim: usize,
        out_dim: usize,
        head_count: usize,
        merge: HeadMerge,
        rng: &mut R,
    ) -> Self {
        let heads = (0..head_count)
            .map(|_| AttentionHead {
                weight: glorot(input_dim, out_dim, input_dim + out_dim, rng),
                attn_center: glorot(out_dim, 1, 2 * out_dim + 1, rng),
                attn_neighbor: glorot(out_dim, 1, 2 * out_dim + 1, rng),
            })
            .collect();
        AttentionLayer { heads, merge }
    }

    pub fn input_dim(&self) -> usize {
        self.heads[0].weight.nrows()
    }

    pub fn head_dim(&self) -> usize {
        self.heads[0].weight.ncols()
    }

    pub fn output_dim(&self) -> usize {
        match self.merge {
            HeadMerge::Concat => self.head_dim() * self.heads.len(),
            HeadMerge::Average => self.head_dim(),
        }
    }

    pub fn params(&self) -> Vec<&Matrix> {
        self.heads
            .iter()
            .flat_map(|h| [&h.weight, &h.attn_center, &h.attn_neighbor])
            .collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Matrix> {
        self.heads
            .iter_mut()
            .flat_map(|h| [&mut h.weight, &mut h.attn_center, &mut h.attn_neighbor])
            .collect()
    }

    pub fn param_names(&self, prefix: &str) -> Vec<String> {
        (0..self.heads.len())
            .flat_map(|h| {
                ["weight", "attn_center", "attn_neighbor"]
                    .map(|p| format!("{prefix}.head{h}.{p}"))
            })
            .collect()
    }

    /// Attention coefficients of one head, `E×1` in the context's edge order.
    pub fn attention(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        head: usize,
        projected: Var,
        ctx: &GraphContext,
    ) -> Result<Var> {
        let (ac, an) = (vars[3 * head + 1], vars[3 * head + 2]);
        let center = tape.matmul(projected, ac)?;
        let neighbor = tape.matmul(projected, an)?;
        let center = tape.gather_rows(center, ctx.index.owners())?;
        let neighbor = tape.gather_rows(neighbor, ctx.index.members())?;
        let scores = tape.add(center, neighbor)?;
        let scores = tape.leaky_relu(scores, ATTENTION_SLOPE)?;
        tape.segment_softmax(scores, &ctx.index)
    }

    /// Merged layer output before any activation.
    pub fn forward(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        input: Var,
        ctx: &GraphContext,
    ) -> Result<Var> {
        if vars.len() != 3 * self.heads.len() {
            return Err(Error::shape(
                "attention",
                format!("{} vars for {} heads", vars.len(), self.heads.len()),
            ));
        }
        let (rows, cols) = tape.value(input).dim();
        if rows != ctx.node_count() || cols != self.input_dim() {
            return Err(Error::shape(
                "attention",
                format!(
                    "input {rows}x{cols}, expected {}x{}",
                    ctx.node_count(),
                    self.input_dim()
                ),
            ));
        }
        let mut outputs = Vec::with_capacity(self.heads.len());
        for h in 0..self.heads.len() {
            let projected = tape.matmul(input, vars[3 * h])?;
            let alpha = self.attention(tape, vars, h, projected, ctx)?;
            outputs.push(tape.edge_aggregate(alpha, projected, &ctx.index)?);
        }
        match self.merge {
            HeadMerge::Concat if outputs.len() == 1 => Ok(outputs[0]),
            HeadMerge::Concat => tape.concat_cols(&outputs),
            HeadMerge::Average => {
                let mut acc = outputs[0];
                for &o in &outputs[1..] {
                    acc = tape.add(acc, o)?;
                }
                tape.scale(acc, 1.0 / outputs.len() as f64)
            }
        }
    }
}

/// Fully connected layer `x W + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Matrix,
    pub bias: Matrix,
}

impl Dense {
    pub fn init<R: Rng + ?Sized>(input_dim: usize, output_dim: usize, rng: &mut R) -> Self {
        Dense {
            weight: glorot(input_dim, output_dim, input_dim + output_dim, rng),
            bias: Matrix::zeros((1, output_dim)),
        }
    }

    pub fn forward(&self, tape: &mut Tape, vars: &[Var], input: Var) -> Result<Var> {
        let z = tape.matmul(input, vars[0])?;
        tape.add_row(z, vars[1])
    }
}

/// ReLU multilayer perceptron with a sigmoid scalar output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

impl Mlp {
    pub fn init<R: Rng + ?Sized>(input_dim: usize, hidden: &[usize], rng: &mut R) -> Self {
        let mut dims = vec![input_dim];
        dims.extend_from_slice(hidden);
        dims.push(1);
        let layers = dims
            .windows(2)
            .map(|w| Dense::init(w[0], w[1], rng))
            .collect();
        Mlp { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.nrows()
    }

    pub fn params(&self) -> Vec<&Matrix> {
        self.layers.iter().flat_map(|l| [&l.weight, &l.bias]).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Matrix> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weight, &mut l.bias])
            .collect()
    }

    pub fn param_names(&self, prefix: &str) -> Vec<String> {
        (0..self.layers.len())
            .flat_map(|i| [format!("{prefix}.layer{i}.weight"), format!("{prefix}.layer{i}.bias")])
            .collect()
    }

    /// Probability per row, `n×1`.
    pub fn forward(&self, tape: &mut Tape, vars: &[Var], input: Var) -> Result<Var> {
        if vars.len() != 2 * self.layers.len() {
            return Err(Error::shape(
                "mlp",
                format!("{} vars for {} layers", vars.len(), self.layers.len()),
            ));
        }
        if tape.value(input).ncols() != self.input_dim() {
            return Err(Error::shape(
                "mlp",
                format!(
                    "input width {}, expected {}",
                    tape.value(input).ncols(),
                    self.input_dim()
                ),
            ));
        }
        let mut x = input;
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            x = layer.forward(tape, &vars[2 * i..2 * i + 2], x)?;
            x = if i == last { tape.sigmoid(x)? } else { tape.relu(x)? };
        }
        Ok(x)
    }
}
