//! Tape-based reverse-mode differentiation over dense `f64` matrices.
//!
//! Every value on the tape is a 2-D matrix; scalars are `1×1` and vectors are
//! single columns. A forward pass records each primitive together with the
//! indices of its inputs, and [`Tape::backward`] walks the records in reverse
//! accumulating adjoints. The tape is append-only, so insertion order is a
//! topological order.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use ndarray::{s, Array2, Axis, Zip};

use crate::error::{Error, Result};

pub type Matrix = Array2<f64>;

/// Lower clamp applied to the argument of [`Tape::log`].
pub const LOG_CLAMP: f64 = 1e-12;

static NEXT_TAPE_ID: AtomicU64 = AtomicU64::new(1);

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var {
    tape: u64,
    index: usize,
}

/// Grouping of edge rows into contiguous segments, one per output row.
///
/// Segment `g` owns edge rows `offsets[g]..offsets[g + 1]`; edge row `e`
/// refers to input row `members[e]`. This is the CSR form of the
/// neighborhoods `N_i ∪ {i}` used by attention layers.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentIndex {
    offsets: Vec<usize>,
    members: Arc<[usize]>,
    owners: Arc<[usize]>,
}

impl SegmentIndex {
    /// Builds an index from per-segment member lists.
    pub fn from_groups<I, G>(groups: I) -> Self
    where
        I: IntoIterator<Item = G>,
        G: IntoIterator<Item = usize>,
    {
        let mut offsets = vec![0];
        let mut members = Vec::new();
        let mut owners = Vec::new();
        for (g, group) in groups.into_iter().enumerate() {
            for m in group {
                members.push(m);
                owners.push(g);
            }
            offsets.push(members.len());
        }
        SegmentIndex {
            offsets,
            members: members.into(),
            owners: owners.into(),
        }
    }

    pub fn segment_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn edge_count(&self) -> usize {
        self.members.len()
    }

    pub fn segment(&self, g: usize) -> std::ops::Range<usize> {
        self.offsets[g]..self.offsets[g + 1]
    }

    /// Input row referenced by each edge row.
    pub fn members(&self) -> &Arc<[usize]> {
        &self.members
    }

    /// Segment owning each edge row.
    pub fn owners(&self) -> &Arc<[usize]> {
        &self.owners
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(usize, usize),
    Add(usize, usize),
    AddRow(usize, usize),
    Mul(usize, usize),
    Affine(usize, f64),
    Relu(usize),
    LeakyRelu(usize, f64),
    Sigmoid(usize),
    Log(usize),
    RowSoftmax(usize),
    SegmentSoftmax(usize, Arc<SegmentIndex>),
    EdgeAggregate {
        weights: usize,
        values: usize,
        index: Arc<SegmentIndex>,
    },
    GatherRows(usize, Arc<[usize]>),
    SelectCols(usize, Vec<usize>),
    ConcatCols(Vec<usize>),
    ConcatRows(Vec<usize>),
    Sum(usize),
    Mean(usize),
    GradReversal(usize, Arc<[f64]>),
}

#[derive(Debug)]
struct Node {
    value: Matrix,
    op: Op,
}

/// Append-only record of a forward computation.
#[derive(Debug)]
pub struct Tape {
    id: u64,
    nodes: Vec<Node>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

fn ensure_finite(value: &Matrix, op: &'static str) -> Result<()> {
    if value.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(op))
    }
}

fn same_shape(op: &'static str, a: &Matrix, b: &Matrix) -> Result<()> {
    if a.dim() == b.dim() {
        Ok(())
    } else {
        Err(Error::shape(op, format!("{:?} vs {:?}", a.dim(), b.dim())))
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            id: NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn idx(&self, v: Var) -> Result<usize> {
        if v.tape == self.id && v.index < self.nodes.len() {
            Ok(v.index)
        } else {
            Err(Error::ForeignVar)
        }
    }

    fn push(&mut self, value: Matrix, op: Op, name: &'static str) -> Result<Var> {
        ensure_finite(&value, name)?;
        self.nodes.push(Node { value, op });
        Ok(Var {
            tape: self.id,
            index: self.nodes.len() - 1,
        })
    }

    /// Records a leaf (parameter or constant). Gradients are reported for every leaf.
    pub fn leaf(&mut self, value: Matrix) -> Result<Var> {
        self.push(value, Op::Leaf, "leaf")
    }

    pub fn scalar(&mut self, value: f64) -> Result<Var> {
        self.leaf(Matrix::from_elem((1, 1), value))
    }

    /// Forward value of `v`. Panics if `v` belongs to another tape.
    pub fn value(&self, v: Var) -> &Matrix {
        let i = self.idx(v).expect("variable from another tape");
        &self.nodes[i].value
    }

    pub fn scalar_value(&self, v: Var) -> f64 {
        self.value(v)[[0, 0]]
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ia, ib) = (self.idx(a)?, self.idx(b)?);
        let (va, vb) = (&self.nodes[ia].value, &self.nodes[ib].value);
        if va.ncols() != vb.nrows() {
            return Err(Error::shape(
                "matmul",
                format!("{:?} x {:?}", va.dim(), vb.dim()),
            ));
        }
        let out = va.dot(vb);
        self.push(out, Op::MatMul(ia, ib), "matmul")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ia, ib) = (self.idx(a)?, self.idx(b)?);
        same_shape("add", &self.nodes[ia].value, &self.nodes[ib].value)?;
        let out = &self.nodes[ia].value + &self.nodes[ib].value;
        self.push(out, Op::Add(ia, ib), "add")
    }

    /// Adds a `1×m` row vector to every row of an `n×m` matrix.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (ia, ib) = (self.idx(a)?, self.idx(row)?);
        let (va, vb) = (&self.nodes[ia].value, &self.nodes[ib].value);
        if vb.nrows() != 1 || vb.ncols() != va.ncols() {
            return Err(Error::shape(
                "add_row",
                format!("{:?} + row {:?}", va.dim(), vb.dim()),
            ));
        }
        let out = va + vb;
        self.push(out, Op::AddRow(ia, ib), "add_row")
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ia, ib) = (self.idx(a)?, self.idx(b)?);
        same_shape("mul", &self.nodes[ia].value, &self.nodes[ib].value)?;
        let out = &self.nodes[ia].value * &self.nodes[ib].value;
        self.push(out, Op::Mul(ia, ib), "mul")
    }

    /// `scale * x + shift`, elementwise.
    pub fn affine(&mut self, x: Var, scale: f64, shift: f64) -> Result<Var> {
        let i = self.idx(x)?;
        let out = self.nodes[i].value.mapv(|v| scale * v + shift);
        self.push(out, Op::Affine(i, scale), "affine")
    }

    pub fn scale(&mut self, x: Var, scale: f64) -> Result<Var> {
        self.affine(x, scale, 0.0)
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let i = self.idx(x)?;
        let out = self.nodes[i].value.mapv(|v| v.max(0.0));
        self.push(out, Op::Relu(i), "relu")
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Result<Var> {
        let i = self.idx(x)?;
        let out = self.nodes[i]
            .value
            .mapv(|v| if v > 0.0 { v } else { slope * v });
        self.push(out, Op::LeakyRelu(i, slope), "leaky_relu")
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        let i = self.idx(x)?;
        let out = self.nodes[i].value.mapv(sigmoid);
        self.push(out, Op::Sigmoid(i), "sigmoid")
    }

    /// Natural log of `max(x, LOG_CLAMP)`.
    pub fn log(&mut self, x: Var) -> Result<Var> {
        let i = self.idx(x)?;
        let out = self.nodes[i].value.mapv(|v| v.max(LOG_CLAMP).ln());
        self.push(out, Op::Log(i), "log")
    }

    pub fn row_softmax(&mut self, x: Var) -> Result<Var> {
        let i = self.idx(x)?;
        let mut out = self.nodes[i].value.clone();
        for mut row in out.rows_mut() {
            softmax_in_place(row.as_slice_mut().expect("row-major"));
        }
        self.push(out, Op::RowSoftmax(i), "row_softmax")
    }

    /// Softmax over the edge rows of each segment, independently per column.
    pub fn segment_softmax(&mut self, x: Var, index: &Arc<SegmentIndex>) -> Result<Var> {
        let i = self.idx(x)?;
        let value = &self.nodes[i].value;
        if value.nrows() != index.edge_count() {
            return Err(Error::shape(
                "segment_softmax",
                format!("{} rows for {} edges", value.nrows(), index.edge_count()),
            ));
        }
        let mut out = value.clone();
        let mut scratch = Vec::new();
        for g in 0..index.segment_count() {
            let range = index.segment(g);
            if range.is_empty() {
                continue;
            }
            for c in 0..out.ncols() {
                scratch.clear();
                scratch.extend(range.clone().map(|e| out[[e, c]]));
                softmax_in_place(&mut scratch);
                for (k, e) in range.clone().enumerate() {
                    out[[e, c]] = scratch[k];
                }
            }
        }
        self.push(
            out,
            Op::SegmentSoftmax(i, Arc::clone(index)),
            "segment_softmax",
        )
    }

    /// `out[g] = Σ_{e ∈ segment g} weights[e] · values[members[e]]`.
    ///
    /// `weights` is `E×1`, `values` is `n×d`, the result is `segments×d`.
    pub fn edge_aggregate(
        &mut self,
        weights: Var,
        values: Var,
        index: &Arc<SegmentIndex>,
    ) -> Result<Var> {
        let (iw, iv) = (self.idx(weights)?, self.idx(values)?);
        let (w, v) = (&self.nodes[iw].value, &self.nodes[iv].value);
        if w.ncols() != 1 || w.nrows() != index.edge_count() {
            return Err(Error::shape(
                "edge_aggregate",
                format!("weights {:?} for {} edges", w.dim(), index.edge_count()),
            ));
        }
        if index.members.iter().any(|&m| m >= v.nrows()) {
            return Err(Error::shape(
                "edge_aggregate",
                format!("member index beyond {} value rows", v.nrows()),
            ));
        }
        let mut out = Matrix::zeros((index.segment_count(), v.ncols()));
        for g in 0..index.segment_count() {
            let mut acc = out.row_mut(g);
            for e in index.segment(g) {
                acc.scaled_add(w[[e, 0]], &v.row(index.members[e]));
            }
        }
        self.push(
            out,
            Op::EdgeAggregate {
                weights: iw,
                values: iv,
                index: Arc::clone(index),
            },
            "edge_aggregate",
        )
    }

    /// Selects rows by index (repeats allowed).
    pub fn gather_rows(&mut self, x: Var, rows: &Arc<[usize]>) -> Result<Var> {
        let i = self.idx(x)?;
        let value = &self.nodes[i].value;
        if let Some(&bad) = rows.iter().find(|&&r| r >= value.nrows()) {
            return Err(Error::shape(
                "gather_rows",
                format!("row {bad} of {}", value.nrows()),
            ));
        }
        let out = value.select(Axis(0), rows);
        self.push(out, Op::GatherRows(i, Arc::clone(rows)), "gather_rows")
    }

    pub fn select_cols(&mut self, x: Var, cols: &[usize]) -> Result<Var> {
        let i = self.idx(x)?;
        let value = &self.nodes[i].value;
        if let Some(&bad) = cols.iter().find(|&&c| c >= value.ncols()) {
            return Err(Error::shape(
                "select_cols",
                format!("column {bad} of {}", value.ncols()),
            ));
        }
        let out = value.select(Axis(1), cols);
        self.push(out, Op::SelectCols(i, cols.to_vec()), "select_cols")
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        self.concat(parts, Axis(1))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        self.concat(parts, Axis(0))
    }

    fn concat(&mut self, parts: &[Var], axis: Axis) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::shape("concat", "no inputs"));
        }
        let ids = parts
            .iter()
            .map(|&p| self.idx(p))
            .collect::<Result<Vec<_>>>()?;
        let views: Vec<_> = ids.iter().map(|&i| self.nodes[i].value.view()).collect();
        let out = ndarray::concatenate(axis, &views)
            .map_err(|e| Error::shape("concat", e.to_string()))?;
        let op = if axis == Axis(1) {
            Op::ConcatCols(ids)
        } else {
            Op::ConcatRows(ids)
        };
        self.push(out, op, "concat")
    }

    /// Sum of all entries, as a `1×1` value.
    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let i = self.idx(x)?;
        let out = Matrix::from_elem((1, 1), self.nodes[i].value.sum());
        self.push(out, Op::Sum(i), "sum")
    }

    /// Mean of all entries, as a `1×1` value.
    pub fn mean(&mut self, x: Var) -> Result<Var> {
        let i = self.idx(x)?;
        let value = &self.nodes[i].value;
        if value.is_empty() {
            return Err(Error::shape("mean", "empty input"));
        }
        let out = Matrix::from_elem((1, 1), value.sum() / value.len() as f64);
        self.push(out, Op::Mean(i), "mean")
    }

    /// Gradient reversal with one coefficient for the whole input: identity
    /// forward, incoming gradient multiplied by `-lambda` backward.
    pub fn grad_reversal(&mut self, x: Var, lambda: f64) -> Result<Var> {
        let rows = self.value(x).nrows();
        self.grad_reversal_rows(x, vec![lambda; rows].into())
    }

    /// Gradient reversal with a coefficient per row.
    pub fn grad_reversal_rows(&mut self, x: Var, lambdas: Arc<[f64]>) -> Result<Var> {
        let i = self.idx(x)?;
        if lambdas.len() != self.nodes[i].value.nrows() {
            return Err(Error::shape(
                "grad_reversal",
                format!(
                    "{} coefficients for {} rows",
                    lambdas.len(),
                    self.nodes[i].value.nrows()
                ),
            ));
        }
        if lambdas.iter().any(|l| !l.is_finite()) {
            return Err(Error::NonFinite("grad_reversal"));
        }
        let out = self.nodes[i].value.clone();
        self.push(out, Op::GradReversal(i, lambdas), "grad_reversal")
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let root = self.idx(loss)?;
        let shape = self.nodes[root].value.dim();
        if shape != (1, 1) {
            return Err(Error::NotScalar(shape));
        }
        let mut grads: Vec<Option<Matrix>> = vec![None; root + 1];
        grads[root] = Some(Matrix::ones((1, 1)));

        for i in (0..=root).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf => {
                    grads[i] = Some(g);
                    continue;
                }
                Op::MatMul(a, b) => {
                    let ga = g.dot(&self.nodes[*b].value.t());
                    let gb = self.nodes[*a].value.t().dot(&g);
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, g);
                }
                Op::AddRow(a, b) => {
                    let gb = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    accumulate(&mut grads, *a, g);
                    accumulate(&mut grads, *b, gb);
                }
                Op::Mul(a, b) => {
                    let ga = &g * &self.nodes[*b].value;
                    let gb = &g * &self.nodes[*a].value;
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::Affine(a, scale) => accumulate(&mut grads, *a, g * *scale),
                Op::Relu(a) => {
                    let mut ga = g;
                    Zip::from(&mut ga)
                        .and(&self.nodes[*a].value)
                        .for_each(|d, &x| {
                            if x <= 0.0 {
                                *d = 0.0
                            }
                        });
                    accumulate(&mut grads, *a, ga);
                }
                Op::LeakyRelu(a, slope) => {
                    let mut ga = g;
                    Zip::from(&mut ga)
                        .and(&self.nodes[*a].value)
                        .for_each(|d, &x| {
                            if x <= 0.0 {
                                *d *= *slope
                            }
                        });
                    accumulate(&mut grads, *a, ga);
                }
                Op::Sigmoid(a) => {
                    let mut ga = g;
                    Zip::from(&mut ga)
                        .and(&node.value)
                        .for_each(|d, &y| *d *= y * (1.0 - y));
                    accumulate(&mut grads, *a, ga);
                }
                Op::Log(a) => {
                    let mut ga = g;
                    Zip::from(&mut ga)
                        .and(&self.nodes[*a].value)
                        .for_each(|d, &x| {
                            *d = if x > LOG_CLAMP { *d / x } else { 0.0 };
                        });
                    accumulate(&mut grads, *a, ga);
                }
                Op::RowSoftmax(a) => {
                    let y = &node.value;
                    let mut ga = &g * y;
                    for (mut row, yr) in ga.rows_mut().into_iter().zip(y.rows()) {
                        let dot = row.sum();
                        Zip::from(&mut row).and(&yr).for_each(|d, &yv| *d -= yv * dot);
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::SegmentSoftmax(a, index) => {
                    let y = &node.value;
                    let mut ga = &g * y;
                    for seg in 0..index.segment_count() {
                        let range = index.segment(seg);
                        for c in 0..ga.ncols() {
                            let dot: f64 = range.clone().map(|e| ga[[e, c]]).sum();
                            for e in range.clone() {
                                ga[[e, c]] -= y[[e, c]] * dot;
                            }
                        }
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::EdgeAggregate {
                    weights,
                    values,
                    index,
                } => {
                    let w = &self.nodes[*weights].value;
                    let v = &self.nodes[*values].value;
                    let mut gw = Matrix::zeros(w.dim());
                    let mut gv = Matrix::zeros(v.dim());
                    for seg in 0..index.segment_count() {
                        let gr = g.row(seg);
                        for e in index.segment(seg) {
                            let m = index.members[e];
                            gw[[e, 0]] = gr.dot(&v.row(m));
                            gv.row_mut(m).scaled_add(w[[e, 0]], &gr);
                        }
                    }
                    accumulate(&mut grads, *weights, gw);
                    accumulate(&mut grads, *values, gv);
                }
                Op::GatherRows(a, rows) => {
                    let mut ga = Matrix::zeros(self.nodes[*a].value.dim());
                    for (r, &src) in rows.iter().enumerate() {
                        let mut dst = ga.row_mut(src);
                        dst += &g.row(r);
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::SelectCols(a, cols) => {
                    let mut ga = Matrix::zeros(self.nodes[*a].value.dim());
                    for (k, &c) in cols.iter().enumerate() {
                        let mut dst = ga.column_mut(c);
                        dst += &g.column(k);
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::ConcatCols(parts) => {
                    let mut start = 0;
                    for &p in parts {
                        let w = self.nodes[p].value.ncols();
                        accumulate(&mut grads, p, g.slice(s![.., start..start + w]).to_owned());
                        start += w;
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut start = 0;
                    for &p in parts {
                        let h = self.nodes[p].value.nrows();
                        accumulate(&mut grads, p, g.slice(s![start..start + h, ..]).to_owned());
                        start += h;
                    }
                }
                Op::Sum(a) => {
                    let ga = Matrix::from_elem(self.nodes[*a].value.dim(), g[[0, 0]]);
                    accumulate(&mut grads, *a, ga);
                }
                Op::Mean(a) => {
                    let input = &self.nodes[*a].value;
                    let ga = Matrix::from_elem(input.dim(), g[[0, 0]] / input.len() as f64);
                    accumulate(&mut grads, *a, ga);
                }
                Op::GradReversal(a, lambdas) => {
                    let mut ga = g;
                    for (mut row, &l) in ga.rows_mut().into_iter().zip(lambdas.iter()) {
                        row *= -l;
                    }
                    accumulate(&mut grads, *a, ga);
                }
            }
        }

        Ok(Gradients {
            tape: self.id,
            shapes: self.nodes[..=root].iter().map(|n| n.value.dim()).collect(),
            grads,
        })
    }
}

fn accumulate(grads: &mut [Option<Matrix>], target: usize, g: Matrix) {
    match &mut grads[target] {
        Some(existing) => *existing += &g,
        slot @ None => *slot = Some(g),
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softmax_in_place(xs: &mut [f64]) {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for x in xs.iter_mut() {
        *x = (*x - max).exp();
        total += *x;
    }
    for x in xs.iter_mut() {
        *x /= total;
    }
}

/// Adjoints produced by [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients {
    tape: u64,
    shapes: Vec<(usize, usize)>,
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    /// Gradient of the loss with respect to a leaf; zero when the leaf does
    /// not influence the loss.
    pub fn get(&self, v: Var) -> Result<Matrix> {
        if v.tape != self.tape {
            return Err(Error::ForeignVar);
        }
        match self.shapes.get(v.index) {
            None => Ok(Matrix::zeros((0, 0))),
            Some(&shape) => Ok(self.grads[v.index]
                .clone()
                .unwrap_or_else(|| Matrix::zeros(shape))),
        }
    }

    /// Gradients for a list of leaves, in order.
    pub fn collect(&self, vars: &[Var]) -> Result<Vec<Matrix>> {
        vars.iter().map(|&v| self.get(v)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn softmax_of_zeros_is_uniform() {
        let mut t = Tape::new();
        let x = t.leaf(array![[0.0, 0.0]]).unwrap();
        let y = t.row_softmax(x).unwrap();
        assert_eq!(t.value(y), &array![[0.5, 0.5]]);
    }

    #[test]
    fn relu_clips_negative() {
        let mut t = Tape::new();
        let x = t.leaf(array![[-1.0, 2.0]]).unwrap();
        let y = t.relu(x).unwrap();
        assert_eq!(t.value(y), &array![[0.0, 2.0]]);
    }

    #[test]
    fn singleton_segment_softmax_is_one() {
        let index = Arc::new(SegmentIndex::from_groups([vec![0]]));
        let mut t = Tape::new();
        let x = t.leaf(array![[3.7]]).unwrap();
        let y = t.segment_softmax(x, &index).unwrap();
        assert_eq!(t.value(y), &array![[1.0]]);
    }

    #[test]
    fn linear_map_gradient() {
        let mut t = Tape::new();
        let w = t.leaf(array![[0.3, -0.7]]).unwrap();
        let x = t.leaf(array![[1.0], [2.0]]).unwrap();
        let y = t.matmul(w, x).unwrap();
        let loss = t.sum(y).unwrap();
        let g = t.backward(loss).unwrap();
        assert_eq!(g.get(w).unwrap(), array![[1.0, 2.0]]);
    }

    #[test]
    fn unreachable_leaf_has_zero_gradient() {
        let mut t = Tape::new();
        let a = t.leaf(array![[1.0, 2.0]]).unwrap();
        let unused = t.leaf(array![[5.0], [6.0]]).unwrap();
        let loss = t.sum(a).unwrap();
        let g = t.backward(loss).unwrap();
        assert_eq!(g.get(unused).unwrap(), Matrix::zeros((2, 1)));
    }

    #[test]
    fn grad_reversal_forward_is_identity() {
        let mut t = Tape::new();
        let x = t.leaf(array![[1.0, 2.0]]).unwrap();
        for lambda in [1.0, -1.0, 0.37] {
            let y = t.grad_reversal(x, lambda).unwrap();
            assert_eq!(t.value(y), t.value(x));
        }
    }

    #[test]
    fn grad_reversal_backward_flips_by_lambda() {
        for (lambda, expected) in [(1.0, -3.0), (-1.0, 3.0)] {
            let mut t = Tape::new();
            let x = t.leaf(array![[0.5]]).unwrap();
            let y = t.grad_reversal(x, lambda).unwrap();
            let loss = t.scale(y, 3.0).unwrap();
            let g = t.backward(loss).unwrap();
            assert_eq!(g.get(x).unwrap(), array![[expected]]);
        }
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut t = Tape::new();
        let x = t.leaf(array![[1.0, 2.0]]).unwrap();
        assert!(matches!(t.backward(x), Err(Error::NotScalar((1, 2)))));
    }

    #[test]
    fn foreign_var_rejected() {
        let mut a = Tape::new();
        let mut b = Tape::new();
        let x = a.scalar(1.0).unwrap();
        let _ = b.scalar(1.0).unwrap();
        assert!(matches!(b.backward(x), Err(Error::ForeignVar)));
        assert!(matches!(b.relu(x), Err(Error::ForeignVar)));
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut t = Tape::new();
        let a = t.leaf(Matrix::zeros((2, 3))).unwrap();
        let b = t.leaf(Matrix::zeros((2, 3))).unwrap();
        assert!(matches!(t.matmul(a, b), Err(Error::Shape { .. })));
        let c = t.leaf(Matrix::zeros((3, 2))).unwrap();
        assert!(matches!(t.add(a, c), Err(Error::Shape { .. })));
    }

    #[test]
    fn non_finite_leaf_rejected() {
        let mut t = Tape::new();
        assert!(matches!(
            t.leaf(array![[f64::NAN]]),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn log_is_clamped() {
        let mut t = Tape::new();
        let x = t.leaf(array![[0.0]]).unwrap();
        let y = t.log(x).unwrap();
        assert_eq!(t.scalar_value(y), LOG_CLAMP.ln());
    }
}
