//! Encoder, classifier, discriminator and losses.

mod layers;
mod losses;

pub use layers::{
    glorot, AttentionHead, AttentionLayer, Dense, GraphContext, HeadMerge, Mlp, ATTENTION_SLOPE,
};
pub use losses::{
    loss_domain, loss_source, loss_target, loss_unknown, TargetLoss, UnknownThreshold,
};

use rand::Rng;

use crate::diff::{Matrix, Tape, Var};
use crate::error::{Error, Result};

/// Architecture of a [`ModelBundle`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub input_dim: usize,
    /// Number of known classes `K`; the classifier has `K+1` outputs.
    pub known: usize,
    pub encoder_heads: usize,
    pub head_dim: usize,
    pub classifier_heads: usize,
    pub discriminator_hidden: Vec<usize>,
    /// Replace the neighborhood-aggregating classifier with a per-node
    /// linear softmax head.
    pub mlp_classifier: bool,
}

impl ModelConfig {
    pub fn embedding_dim(&self) -> usize {
        self.encoder_heads * self.head_dim
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Classifier {
    Attention(AttentionLayer),
    Linear(Dense),
}

impl Classifier {
    pub fn params(&self) -> Vec<&Matrix> {
        match self {
            Classifier::Attention(l) => l.params(),
            Classifier::Linear(d) => vec![&d.weight, &d.bias],
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Matrix> {
        match self {
            Classifier::Attention(l) => l.params_mut(),
            Classifier::Linear(d) => vec![&mut d.weight, &mut d.bias],
        }
    }

    pub fn param_names(&self) -> Vec<String> {
        match self {
            Classifier::Attention(l) => l.param_names("classifier"),
            Classifier::Linear(_) => vec!["classifier.weight".into(), "classifier.bias".into()],
        }
    }

    pub fn output_classes(&self) -> usize {
        match self {
            Classifier::Attention(l) => l.output_dim(),
            Classifier::Linear(d) => d.weight.ncols(),
        }
    }
}

/// Parameters of the three networks.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub encoder: AttentionLayer,
    pub classifier: Classifier,
    pub discriminator: Mlp,
}

/// Tape leaves for every parameter of a bundle, grouped by network.
#[derive(Debug, Clone)]
pub struct BoundModel {
    pub encoder: Vec<Var>,
    pub classifier: Vec<Var>,
    pub discriminator: Vec<Var>,
}

fn bind_all(tape: &mut Tape, params: Vec<&Matrix>) -> Result<Vec<Var>> {
    params.into_iter().map(|p| tape.leaf(p.clone())).collect()
}

impl ModelBundle {
    pub fn init<R: Rng + ?Sized>(cfg: &ModelConfig, rng: &mut R) -> Self {
        let encoder = AttentionLayer::init(
            cfg.input_dim,
            cfg.head_dim,
            cfg.encoder_heads,
            HeadMerge::Concat,
            rng,
        );
        let emb = cfg.embedding_dim();
        let classes = cfg.known + 1;
        let classifier = if cfg.mlp_classifier {
            Classifier::Linear(Dense::init(emb, classes, rng))
        } else {
            Classifier::Attention(AttentionLayer::init(
                emb,
                classes,
                cfg.classifier_heads,
                HeadMerge::Average,
                rng,
            ))
        };
        let discriminator = Mlp::init(emb, &cfg.discriminator_hidden, rng);
        ModelBundle {
            encoder,
            classifier,
            discriminator,
        }
    }

    pub fn embedding_dim(&self) -> usize {
        self.encoder.output_dim()
    }

    pub fn output_classes(&self) -> usize {
        self.classifier.output_classes()
    }

    pub fn bind(&self, tape: &mut Tape) -> Result<BoundModel> {
        Ok(BoundModel {
            encoder: bind_all(tape, self.encoder.params())?,
            classifier: bind_all(tape, self.classifier.params())?,
            discriminator: bind_all(tape, self.discriminator.params())?,
        })
    }

    /// Groups leaves already on a tape, given in [`Self::named_params`]
    /// order, into per-network handles.
    pub fn bind_vars(&self, vars: &[Var]) -> Result<BoundModel> {
        let e = self.encoder.params().len();
        let c = self.classifier.params().len();
        let d = self.discriminator.params().len();
        if vars.len() != e + c + d {
            return Err(Error::shape(
                "bind_vars",
                format!("{} vars for {} parameters", vars.len(), e + c + d),
            ));
        }
        Ok(BoundModel {
            encoder: vars[..e].to_vec(),
            classifier: vars[e..e + c].to_vec(),
            discriminator: vars[e + c..].to_vec(),
        })
    }

    /// All parameters with stable names, in checkpoint order.
    pub fn named_params(&self) -> Vec<(String, &Matrix)> {
        let names = self
            .encoder
            .param_names("encoder")
            .into_iter()
            .chain(self.classifier.param_names())
            .chain(self.discriminator.param_names("discriminator"));
        let params = self
            .encoder
            .params()
            .into_iter()
            .chain(self.classifier.params())
            .chain(self.discriminator.params());
        names.zip(params).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out = self.encoder.params_mut();
        out.extend(self.classifier.params_mut());
        out.extend(self.discriminator.params_mut());
        out
    }

    /// Node embeddings `H` (inference only).
    pub fn embed(&self, ctx: &GraphContext) -> Result<Matrix> {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape)?;
        let h = encode(&mut tape, self, &bound, ctx)?;
        Ok(tape.value(h).clone())
    }

    /// Embeddings and `K+1` class probabilities (inference only).
    pub fn predict(&self, ctx: &GraphContext) -> Result<(Matrix, Matrix)> {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape)?;
        let h = encode(&mut tape, self, &bound, ctx)?;
        let p = classify(&mut tape, self, &bound, h, ctx)?;
        Ok((tape.value(h).clone(), tape.value(p).clone()))
    }
}

/// `H = ReLU(merged attention output)`, `n × (heads · head_dim)`.
pub fn encode(
    tape: &mut Tape,
    model: &ModelBundle,
    bound: &BoundModel,
    ctx: &GraphContext,
) -> Result<Var> {
    if ctx.features.ncols() != model.encoder.input_dim() {
        return Err(Error::shape(
            "encode",
            format!(
                "graph has {} attributes, encoder expects {}",
                ctx.features.ncols(),
                model.encoder.input_dim()
            ),
        ));
    }
    let x = tape.leaf(ctx.features.clone())?;
    let z = model.encoder.forward(tape, &bound.encoder, x, ctx)?;
    tape.relu(z)
}

/// Row-stochastic `n × (K+1)` class probabilities from embeddings `h`.
pub fn classify(
    tape: &mut Tape,
    model: &ModelBundle,
    bound: &BoundModel,
    h: Var,
    ctx: &GraphContext,
) -> Result<Var> {
    if tape.value(h).nrows() != ctx.node_count() {
        return Err(Error::shape(
            "classify",
            format!(
                "{} embedding rows for {} nodes",
                tape.value(h).nrows(),
                ctx.node_count()
            ),
        ));
    }
    let logits = match &model.classifier {
        Classifier::Attention(layer) => layer.forward(tape, &bound.classifier, h, ctx)?,
        Classifier::Linear(dense) => {
            if tape.value(h).ncols() != dense.weight.nrows() {
                return Err(Error::shape("classify", "embedding width mismatch"));
            }
            dense.forward(tape, &bound.classifier, h)?
        }
    };
    tape.row_softmax(logits)
}

/// Probability that each embedding row comes from the target network, `m×1`.
pub fn discriminate(
    tape: &mut Tape,
    model: &ModelBundle,
    bound: &BoundModel,
    h: Var,
) -> Result<Var> {
    model.discriminator.forward(tape, &bound.discriminator, h)
}

/// Index of the largest entry per row, lowest index on ties.
pub fn row_argmax(probs: &Matrix) -> Vec<usize> {
    probs
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}
