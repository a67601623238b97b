//! Fixtures and oracles shared by the integration suites.
#![allow(dead_code)]

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uaga::diff::{check_gradients, GradCheckReport, Matrix, Tape, Var};
use uaga::graph::AttributedGraph;
use uaga::model::{
    classify, encode, loss_domain, loss_source, loss_target, loss_unknown, discriminate,
    GraphContext, ModelBundle, ModelConfig, UnknownThreshold,
};
use uaga::Result;

pub const FD_STEP: f64 = 1e-5;
pub const MODEL_TOL: f64 = 1e-5;

/// Ten-node source (classes 1..=2) and target (classes 1..=3 in the
/// remapped space) networks with four attributes.
pub struct TinyProblem {
    pub source: GraphContext,
    pub target: GraphContext,
    pub source_labels: Vec<usize>,
    pub pseudo: Vec<Option<usize>>,
    pub model: ModelBundle,
}

fn random_graph(rng: &mut ChaCha8Rng, n: usize, labels: Vec<usize>) -> AttributedGraph {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random_bool(0.3) {
                edges.push((u, v));
            }
        }
    }
    let x = Matrix::from_shape_fn((n, 4), |_| rng.random_range(-1.0..1.0));
    AttributedGraph::new(edges, x, Some(labels)).unwrap()
}

pub fn tiny_problem(seed: u64) -> TinyProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let source = random_graph(&mut rng, 10, (0..10).map(|i| i % 2 + 1).collect());
    let target = random_graph(&mut rng, 10, (0..10).map(|i| i % 3 + 1).collect());
    let cfg = ModelConfig {
        input_dim: 4,
        known: 2,
        encoder_heads: 2,
        head_dim: 3,
        classifier_heads: 2,
        discriminator_hidden: vec![5],
        mlp_classifier: false,
    };
    TinyProblem {
        source: GraphContext::new(&source),
        target: GraphContext::new(&target),
        source_labels: source.labels().unwrap().to_vec(),
        pseudo: vec![Some(1), None, Some(3), Some(2), None, Some(3), Some(1), None, None, Some(2)],
        model: ModelBundle::init(&cfg, &mut rng),
    }
}

impl TinyProblem {
    pub fn params(&self) -> Vec<Matrix> {
        self.model.named_params().into_iter().map(|(_, m)| m.clone()).collect()
    }
}

/// How a reversal point is realized inside a loss.
#[derive(Clone)]
pub enum Reversal {
    /// The tape's reversal primitive with one coefficient per row.
    Layer(Arc<[f64]>),
    /// `-λ x + (1+λ) x₀` with `x₀` frozen at the unperturbed parameters:
    /// same value as `x`, true derivative scaled by `-λ`.
    Surrogate(Arc<[f64]>, Matrix),
}

fn apply(tape: &mut Tape, x: Var, how: &Reversal) -> Result<Var> {
    match how {
        Reversal::Layer(l) => tape.grad_reversal_rows(x, l.clone()),
        Reversal::Surrogate(l, frozen) => {
            let cols = frozen.ncols();
            let neg = Matrix::from_shape_fn((l.len(), cols), |(r, _)| -l[r]);
            let keep = Matrix::from_shape_fn((l.len(), cols), |(r, c)| (1.0 + l[r]) * frozen[[r, c]]);
            let neg = tape.leaf(neg)?;
            let keep = tape.leaf(keep)?;
            let scaled = tape.mul(x, neg)?;
            tape.add(scaled, keep)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Source,
    Unknown,
    Target,
    Domain,
}

/// Builds one loss from parameter leaves. `reversal` sits between the
/// encoder and the classifier for `Unknown`, and between the encoder and the
/// discriminator for `Domain`; other losses ignore it.
pub fn loss_forward(
    p: &TinyProblem,
    kind: LossKind,
    reversal: Option<&Reversal>,
    tape: &mut Tape,
    vars: &[Var],
) -> Result<Var> {
    let bound = p.model.bind_vars(vars)?;
    let m = &p.model;
    match kind {
        LossKind::Source => {
            let h = encode(tape, m, &bound, &p.source)?;
            let y = classify(tape, m, &bound, h, &p.source)?;
            loss_source(tape, y, &p.source_labels)
        }
        LossKind::Unknown => {
            let mut h = encode(tape, m, &bound, &p.target)?;
            if let Some(r) = reversal {
                h = apply(tape, h, r)?;
            }
            let y = classify(tape, m, &bound, h, &p.target)?;
            loss_unknown(tape, y, UnknownThreshold::new(0.3)?)
        }
        LossKind::Target => {
            let h = encode(tape, m, &bound, &p.target)?;
            let y = classify(tape, m, &bound, h, &p.target)?;
            Ok(loss_target(tape, y, &p.pseudo)?.value)
        }
        LossKind::Domain => {
            let hs = encode(tape, m, &bound, &p.source)?;
            let ht = encode(tape, m, &bound, &p.target)?;
            let mut rows = tape.concat_rows(&[hs, ht])?;
            if let Some(r) = reversal {
                rows = apply(tape, rows, r)?;
            }
            let d = discriminate(tape, m, &bound, rows)?;
            let flags: Vec<bool> = (0..20).map(|i| i >= 10).collect();
            loss_domain(tape, d, &flags)
        }
    }
}

/// Value of the tensor a reversal is applied to, at the base parameters.
pub fn reversal_input(p: &TinyProblem, kind: LossKind) -> Matrix {
    let mut tape = Tape::new();
    let bound = p.model.bind(&mut tape).unwrap();
    let m = &p.model;
    match kind {
        LossKind::Unknown => {
            let h = encode(&mut tape, m, &bound, &p.target).unwrap();
            tape.value(h).clone()
        }
        LossKind::Domain => {
            let hs = encode(&mut tape, m, &bound, &p.source).unwrap();
            let ht = encode(&mut tape, m, &bound, &p.target).unwrap();
            let rows = tape.concat_rows(&[hs, ht]).unwrap();
            tape.value(rows).clone()
        }
        _ => panic!("no reversal point for {kind:?}"),
    }
}

pub fn analytic(p: &TinyProblem, kind: LossKind, reversal: Option<&Reversal>) -> Vec<Matrix> {
    let mut tape = Tape::new();
    let vars: Vec<Var> = p.params().into_iter().map(|m| tape.leaf(m).unwrap()).collect();
    let loss = loss_forward(p, kind, reversal, &mut tape, &vars).unwrap();
    tape.backward(loss).unwrap().collect(&vars).unwrap()
}

/// Finite-difference check of every parameter entry.
pub fn fd_report(p: &TinyProblem, kind: LossKind, reversal: Option<&Reversal>) -> GradCheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    check_gradients(
        |t, v| loss_forward(p, kind, reversal, t, v),
        &p.params(),
        FD_STEP,
        MODEL_TOL,
        None,
        &mut rng,
    )
    .unwrap()
}

pub fn max_abs_diff(a: &[Matrix], b: &[Matrix]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.iter().zip(y.iter()).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max)
}

/// Gradient checks for all four losses plus both reversal paths under
/// every coefficient pattern. Returns `(label, max relative error,
/// layer-vs-surrogate mismatch)` per check.
pub fn model_gradient_suite(p: &TinyProblem) -> Vec<(String, GradCheckReport, f64)> {
    let mut out = Vec::new();
    for kind in [LossKind::Source, LossKind::Unknown, LossKind::Target, LossKind::Domain] {
        out.push((format!("{kind:?}"), fd_report(p, kind, None), 0.0));
    }
    let patterns: [(&str, Vec<f64>); 3] = [
        ("+1", vec![1.0; 20]),
        ("-1", vec![-1.0; 20]),
        ("mixed", (0..20).map(|i| if i % 3 == 0 { -1.0 } else { 1.0 }).collect()),
    ];
    for kind in [LossKind::Unknown, LossKind::Domain] {
        let frozen = reversal_input(p, kind);
        for (name, lambdas) in &patterns {
            let lambdas: Arc<[f64]> = lambdas[..frozen.nrows()].iter().copied().collect();
            let layer = Reversal::Layer(lambdas.clone());
            let surrogate = Reversal::Surrogate(lambdas, frozen.clone());
            let report = fd_report(p, kind, Some(&surrogate));
            let mismatch = max_abs_diff(
                &analytic(p, kind, Some(&layer)),
                &analytic(p, kind, Some(&surrogate)),
            );
            out.push((format!("{kind:?} reversal λ={name}"), report, mismatch));
        }
    }
    out
}
