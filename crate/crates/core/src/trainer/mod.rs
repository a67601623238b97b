//! Two-stage training: separation of known from unknown, then
//! pseudo-label driven adaptation with signed domain alignment.

mod checkpoint;
mod config;
mod sampler;

pub use checkpoint::{Checkpoint, RngState, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::{Ablation, TrainConfig};
pub use sampler::{BatchSampler, Minibatch};

use std::fmt;
use std::sync::Arc;

use log::debug;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::diff::{AdamState, Matrix, Tape, Var};
use crate::error::{Error, Result};
use crate::eval::{build_report, EvalReport};
use crate::graph::{AttributedGraph, LabelSpace};
use crate::model::{
    classify, discriminate, encode, loss_domain, loss_source, loss_target, loss_unknown,
    row_argmax, BoundModel, GraphContext, ModelBundle,
};
use crate::pseudo::PseudoLabelState;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Separation,
    Adaptation,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Separation => "separation",
            Stage::Adaptation => "adaptation",
        }
    }
}

/// Per-epoch training record; losses are means over the epoch's iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRecord {
    pub epoch: usize,
    pub stage: Stage,
    pub l_s: f64,
    /// `L_u` in separation, `L_t` in adaptation.
    pub l_aux: f64,
    pub l_d: Option<f64>,
    pub pseudo_labeled: usize,
    pub negative_lambda: usize,
}

impl fmt::Display for LogRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let aux = match self.stage {
            Stage::Separation => "l_u",
            Stage::Adaptation => "l_t",
        };
        write!(
            f,
            "epoch={} stage={} l_s={} {aux}={} l_d=",
            self.epoch,
            self.stage.name(),
            self.l_s,
            self.l_aux
        )?;
        match self.l_d {
            Some(v) => write!(f, "{v}")?,
            None => f.write_str("-")?,
        }
        write!(
            f,
            " pseudo={} negative={}",
            self.pseudo_labeled, self.negative_lambda
        )
    }
}

/// Hooks into the training loop, all optional.
pub trait TrainObserver {
    /// Called after pseudo-labels and coefficients are recomputed, with the
    /// target class probabilities they were derived from.
    fn pseudo_labels(&mut self, _epoch: usize, _state: &PseudoLabelState, _target_probs: &Matrix) {}
    fn epoch_end(&mut self, _record: &LogRecord) {}
}

impl TrainObserver for () {}

/// Scalar terms of one iteration.
#[derive(Debug, Clone, Copy)]
pub struct StepLosses {
    pub total: Var,
    pub l_s: Var,
    pub aux: Var,
    pub l_d: Option<Var>,
}

fn arc_ids(ids: &[usize]) -> Arc<[usize]> {
    Arc::from(ids)
}

/// Source cross-entropy on the batch plus the unknown loss on the target
/// batch, reached through a reversal so the encoder maximizes it.
pub fn separation_loss(
    tape: &mut Tape,
    model: &ModelBundle,
    bound: &BoundModel,
    contexts: (&GraphContext, &GraphContext),
    batch: &Minibatch,
    source_labels: &[usize],
    cfg: &TrainConfig,
) -> Result<StepLosses> {
    let (src, tgt) = contexts;
    let hs = encode(tape, model, bound, src)?;
    let ht = encode(tape, model, bound, tgt)?;
    let ps = classify(tape, model, bound, hs, src)?;
    let ps = tape.gather_rows(ps, &arc_ids(&batch.source))?;
    let labels: Vec<usize> = batch.source.iter().map(|&i| source_labels[i]).collect();
    let l_s = loss_source(tape, ps, &labels)?;
    let ht_rev = tape.grad_reversal(ht, 1.0)?;
    let pt = classify(tape, model, bound, ht_rev, tgt)?;
    let pt = tape.gather_rows(pt, &arc_ids(&batch.target))?;
    let l_u = loss_unknown(tape, pt, cfg.unknown_threshold()?)?;
    Ok(StepLosses {
        total: tape.add(l_s, l_u)?,
        l_s,
        aux: l_u,
        l_d: None,
    })
}

/// Domain loss over the batch union. Embedding rows pass through a
/// per-row reversal: `+1` for source rows, `target_lambda[i]` for target
/// node `i`.
pub fn domain_term(
    tape: &mut Tape,
    model: &ModelBundle,
    bound: &BoundModel,
    embeddings: (Var, Var),
    batch: &Minibatch,
    target_lambda: &[f64],
) -> Result<Var> {
    let (hs, ht) = embeddings;
    let rows_s = tape.gather_rows(hs, &arc_ids(&batch.source))?;
    let rows_t = tape.gather_rows(ht, &arc_ids(&batch.target))?;
    let rows = tape.concat_rows(&[rows_s, rows_t])?;
    let lambdas: Arc<[f64]> = std::iter::repeat_n(1.0, batch.source.len())
        .chain(batch.target.iter().map(|&i| target_lambda[i]))
        .collect();
    let rows = tape.grad_reversal_rows(rows, lambdas)?;
    let d = discriminate(tape, model, bound, rows)?;
    let flags: Vec<bool> = std::iter::repeat_n(false, batch.source.len())
        .chain(std::iter::repeat_n(true, batch.target.len()))
        .collect();
    loss_domain(tape, d, &flags)
}

/// `L_s + β·L_t + L_d`, with `L_t` dropped under `no_self_training`.
#[allow(clippy::too_many_arguments)]
pub fn adaptation_loss(
    tape: &mut Tape,
    model: &ModelBundle,
    bound: &BoundModel,
    contexts: (&GraphContext, &GraphContext),
    batch: &Minibatch,
    source_labels: &[usize],
    pseudo: &PseudoLabelState,
    cfg: &TrainConfig,
) -> Result<StepLosses> {
    let (src, tgt) = contexts;
    let hs = encode(tape, model, bound, src)?;
    let ht = encode(tape, model, bound, tgt)?;
    let ps = classify(tape, model, bound, hs, src)?;
    let ps = tape.gather_rows(ps, &arc_ids(&batch.source))?;
    let labels: Vec<usize> = batch.source.iter().map(|&i| source_labels[i]).collect();
    let l_s = loss_source(tape, ps, &labels)?;
    let mut total = l_s;
    let l_t = if cfg.has(Ablation::NoSelfTraining) {
        tape.scalar(0.0)?
    } else {
        let pt = classify(tape, model, bound, ht, tgt)?;
        let pt = tape.gather_rows(pt, &arc_ids(&batch.target))?;
        let rows: Vec<Option<usize>> =
            batch.target.iter().map(|&i| pseudo.pseudo_labels[i]).collect();
        let l_t = loss_target(tape, pt, &rows)?.value;
        let weighted = tape.scale(l_t, cfg.beta)?;
        total = tape.add(total, weighted)?;
        l_t
    };
    let l_d = domain_term(tape, model, bound, (hs, ht), batch, &pseudo.lambda)?;
    total = tape.add(total, l_d)?;
    Ok(StepLosses {
        total,
        l_s,
        aux: l_t,
        l_d: Some(l_d),
    })
}

fn diverged(stage: Stage, epoch: usize) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::NonFinite(what) => Error::Diverged {
            stage: stage.name(),
            epoch,
            detail: format!("non-finite {what}"),
        },
        other => other,
    }
}

/// Everything produced by a completed run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub config: TrainConfig,
    pub model: ModelBundle,
    pub source_embeddings: Matrix,
    pub target_embeddings: Matrix,
    /// `n_t × (K+1)` class probabilities.
    pub target_probs: Matrix,
    /// 1-based, `K+1` meaning unknown.
    pub predictions: Vec<usize>,
    /// Present when the target carries labels with at least one private class.
    pub report: Option<EvalReport>,
    pub log: Vec<LogRecord>,
    pub checkpoint: Checkpoint,
}

/// Mutable training state for one run.
#[derive(Debug, Clone)]
pub struct Trainer {
    cfg: TrainConfig,
    source: GraphContext,
    target: GraphContext,
    source_labels: Vec<usize>,
    model: ModelBundle,
    adam_encoder: AdamState,
    adam_classifier: AdamState,
    adam_discriminator: AdamState,
    rng: ChaCha8Rng,
    sampler: BatchSampler,
    separation_epochs: usize,
    adaptation_epochs: usize,
    pseudo: Option<PseudoLabelState>,
    log: Vec<LogRecord>,
}

impl Trainer {
    pub fn new(source: &AttributedGraph, target: &AttributedGraph, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let labels = source.require_labels()?;
        if let Some(&bad) = labels.iter().find(|&&l| l > cfg.known) {
            return Err(Error::InvalidLabel {
                label: bad,
                reason: format!("source network may only use known classes 1..={}", cfg.known),
            });
        }
        if source.attr_dim() != target.attr_dim() {
            return Err(Error::Config(format!(
                "attribute dimensions differ: source {}, target {}",
                source.attr_dim(),
                target.attr_dim()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let model = ModelBundle::init(&cfg.model_config(source.attr_dim()), &mut rng);
        Ok(Trainer {
            adam_encoder: AdamState::new(cfg.lr, model.encoder.params()),
            adam_classifier: AdamState::new(cfg.lr, model.classifier.params()),
            adam_discriminator: AdamState::new(cfg.lr, model.discriminator.params()),
            sampler: BatchSampler::new(source.node_count(), target.node_count(), cfg.batch),
            source: GraphContext::new(source),
            target: GraphContext::new(target),
            source_labels: labels.to_vec(),
            model,
            rng,
            cfg,
            separation_epochs: 0,
            adaptation_epochs: 0,
            pseudo: None,
            log: Vec::new(),
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    /// Swaps the ablation set, e.g. to branch several variants from one
    /// separated model. Classifier architecture cannot change mid-run.
    pub fn set_ablations(&mut self, ablations: &[Ablation]) -> Result<()> {
        let mut cfg = self.cfg.clone();
        cfg.ablations.clear();
        for &a in ablations {
            cfg = cfg.with_ablation(a);
        }
        if cfg.has(Ablation::MlpClassifier) != self.cfg.has(Ablation::MlpClassifier) {
            return Err(Error::Config("classifier type is fixed at initialization".into()));
        }
        self.cfg = cfg;
        Ok(())
    }

    pub fn model(&self) -> &ModelBundle {
        &self.model
    }

    pub fn log(&self) -> &[LogRecord] {
        &self.log
    }

    pub fn pseudo_state(&self) -> Option<&PseudoLabelState> {
        self.pseudo.as_ref()
    }

    pub fn contexts(&self) -> (&GraphContext, &GraphContext) {
        (&self.source, &self.target)
    }

    fn step(&mut self, losses: &StepLosses, tape: &Tape, bound: &BoundModel, stage: Stage) -> Result<()> {
        let grads = tape.backward(losses.total)?;
        let g_enc = grads.collect(&bound.encoder)?;
        let g_cls = grads.collect(&bound.classifier)?;
        self.adam_encoder.step(&mut self.model.encoder.params_mut(), &g_enc)?;
        self.adam_classifier
            .step(&mut self.model.classifier.params_mut(), &g_cls)?;
        if stage == Stage::Adaptation {
            let g_disc = grads.collect(&bound.discriminator)?;
            self.adam_discriminator
                .step(&mut self.model.discriminator.params_mut(), &g_disc)?;
        }
        Ok(())
    }

    fn finish_epoch(
        &mut self,
        stage: Stage,
        epoch: usize,
        sums: [f64; 3],
        iterations: usize,
        observer: &mut dyn TrainObserver,
    ) -> LogRecord {
        let n = iterations.max(1) as f64;
        let (pseudo_labeled, negative_lambda) = match (&self.pseudo, stage) {
            (Some(p), Stage::Adaptation) => (p.labeled_count(), p.negative_count()),
            _ => (0, 0),
        };
        let record = LogRecord {
            epoch,
            stage,
            l_s: sums[0] / n,
            l_aux: sums[1] / n,
            l_d: (stage == Stage::Adaptation).then(|| sums[2] / n),
            pseudo_labeled,
            negative_lambda,
        };
        debug!("{record}");
        observer.epoch_end(&record);
        self.log.push(record.clone());
        record
    }

    pub fn separation_epoch(&mut self, observer: &mut dyn TrainObserver) -> Result<LogRecord> {
        let epoch = self.separation_epochs + 1;
        let on_err = diverged(Stage::Separation, epoch);
        let batches = self.sampler.epoch(&mut self.rng);
        let mut sums = [0.0; 3];
        for batch in &batches {
            let mut tape = Tape::new();
            let bound = self.model.bind(&mut tape)?;
            let losses = separation_loss(
                &mut tape,
                &self.model,
                &bound,
                (&self.source, &self.target),
                batch,
                &self.source_labels,
                &self.cfg,
            )
            .map_err(&on_err)?;
            sums[0] += tape.scalar_value(losses.l_s);
            sums[1] += tape.scalar_value(losses.aux);
            self.step(&losses, &tape, &bound, Stage::Separation)
                .map_err(&on_err)?;
        }
        self.separation_epochs = epoch;
        Ok(self.finish_epoch(Stage::Separation, epoch, sums, batches.len(), observer))
    }

    /// Recomputes pseudo-labels and coefficients from the current model.
    pub fn refresh_pseudo_labels(&mut self) -> Result<&PseudoLabelState> {
        self.refresh_with_probs().map(|_| self.pseudo.as_ref().expect("just computed"))
    }

    fn refresh_with_probs(&mut self) -> Result<Matrix> {
        let (hs, _) = self.model.predict(&self.source)?;
        let (ht, pt) = self.model.predict(&self.target)?;
        let state = PseudoLabelState::compute(
            &hs,
            &self.source_labels,
            &ht,
            &pt,
            self.cfg.r,
            !self.cfg.has(Ablation::NoNegativeLambda),
        )?;
        self.pseudo = Some(state);
        Ok(pt)
    }

    pub fn adaptation_epoch(&mut self, observer: &mut dyn TrainObserver) -> Result<LogRecord> {
        let epoch = self.adaptation_epochs + 1;
        let on_err = diverged(Stage::Adaptation, epoch);
        let probs = self.refresh_with_probs().map_err(&on_err)?;
        let pseudo = self.pseudo.take().expect("just computed");
        observer.pseudo_labels(epoch, &pseudo, &probs);
        let batches = self.sampler.epoch(&mut self.rng);
        let mut sums = [0.0; 3];
        let mut outcome = Ok(());
        for batch in &batches {
            let mut tape = Tape::new();
            let bound = self.model.bind(&mut tape)?;
            let losses = match adaptation_loss(
                &mut tape,
                &self.model,
                &bound,
                (&self.source, &self.target),
                batch,
                &self.source_labels,
                &pseudo,
                &self.cfg,
            ) {
                Ok(l) => l,
                Err(e) => {
                    outcome = Err(on_err(e));
                    break;
                }
            };
            sums[0] += tape.scalar_value(losses.l_s);
            sums[1] += tape.scalar_value(losses.aux);
            sums[2] += losses.l_d.map_or(0.0, |v| tape.scalar_value(v));
            if let Err(e) = self.step(&losses, &tape, &bound, Stage::Adaptation) {
                outcome = Err(on_err(e));
                break;
            }
        }
        self.pseudo = Some(pseudo);
        outcome?;
        self.adaptation_epochs = epoch;
        Ok(self.finish_epoch(Stage::Adaptation, epoch, sums, batches.len(), observer))
    }

    /// Runs both stages for their configured budgets, honoring ablations.
    pub fn run(&mut self, observer: &mut dyn TrainObserver) -> Result<()> {
        self.run_separation(observer)?;
        self.run_adaptation(observer)
    }

    pub fn run_separation(&mut self, observer: &mut dyn TrainObserver) -> Result<()> {
        if !self.cfg.has(Ablation::NoSeparation) {
            while self.separation_epochs < self.cfg.epochs_sep {
                self.separation_epoch(observer)?;
            }
        }
        Ok(())
    }

    pub fn run_adaptation(&mut self, observer: &mut dyn TrainObserver) -> Result<()> {
        if !self.cfg.has(Ablation::NoAdaptation) {
            while self.adaptation_epochs < self.cfg.epochs_adapt {
                self.adaptation_epoch(observer)?;
            }
        }
        Ok(())
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint::new(&self.cfg, &self.rng, &self.model)
    }

    /// Final embeddings and predictions; a report when `label_space` is
    /// given and the target carries labels.
    pub fn finish(self, target_labels: Option<&[usize]>, label_space: Option<&LabelSpace>) -> Result<TrainOutcome> {
        let checkpoint = self.checkpoint();
        let (hs, _) = self.model.predict(&self.source)?;
        let (ht, pt) = self.model.predict(&self.target)?;
        let predictions = predictions_from(&pt);
        let report = match (target_labels, label_space) {
            (Some(labels), Some(ls)) => {
                let truth = ls.map_all(labels)?;
                let scores: Vec<f64> = pt.column(ls.known()).to_vec();
                Some(build_report(&truth, &predictions, &scores, ls)?)
            }
            _ => None,
        };
        Ok(TrainOutcome {
            config: self.cfg,
            model: self.model,
            source_embeddings: hs,
            target_embeddings: ht,
            target_probs: pt,
            predictions,
            report,
            log: self.log,
            checkpoint,
        })
    }
}

fn predictions_from(probs: &Matrix) -> Vec<usize> {
    row_argmax(probs).into_iter().map(|k| k + 1).collect()
}

/// Label space implied by a labeled target: `C` is its largest label.
/// `None` when the target is unlabeled or has no private class.
pub fn infer_label_space(target: &AttributedGraph, known: usize) -> Option<LabelSpace> {
    let c = target.class_count()?;
    LabelSpace::new(known, c).ok()
}

/// Full pipeline with the label space inferred from the target labels.
pub fn train(source: &AttributedGraph, target: &AttributedGraph, cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_with(source, target, cfg, None, &mut ())
}

pub fn train_with(
    source: &AttributedGraph,
    target: &AttributedGraph,
    cfg: &TrainConfig,
    label_space: Option<&LabelSpace>,
    observer: &mut dyn TrainObserver,
) -> Result<TrainOutcome> {
    let mut trainer = Trainer::new(source, target, cfg.clone())?;
    trainer.run(observer)?;
    let inferred = infer_label_space(target, cfg.known);
    let ls = label_space.or(inferred.as_ref());
    trainer.finish(target.labels(), ls)
}

/// Class predictions in `1..=K+1`, lowest index on ties.
pub fn predict_target(model: &ModelBundle, target: &AttributedGraph) -> Result<Vec<usize>> {
    let (_, probs) = model.predict(&GraphContext::new(target))?;
    Ok(predictions_from(&probs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::SbmPairConfig;
    use ndarray::array;

    fn tiny_pair() -> (AttributedGraph, AttributedGraph, LabelSpace) {
        SbmPairConfig {
            known: 2,
            private: 1,
            nodes_per_class: 8,
            attr_dim: 4,
            p_in: 0.4,
            p_out: 0.05,
            seed: 3,
            ..SbmPairConfig::default()
        }
        .generate()
        .unwrap()
    }

    fn tiny_config() -> TrainConfig {
        TrainConfig {
            known: 2,
            r: 5,
            batch: 10,
            epochs_sep: 2,
            epochs_adapt: 2,
            encoder_heads: 2,
            head_dim: 4,
            disc_hidden: vec![6],
            seed: 1,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn argmax_prediction_rule() {
        assert_eq!(predictions_from(&array![[0.1, 0.2, 0.7]]), vec![3]);
        assert_eq!(predictions_from(&array![[1.0 / 3.0; 3]]), vec![1]);
    }

    #[test]
    fn zero_epochs_leave_model_unchanged() {
        let (s, t, _) = tiny_pair();
        let cfg = TrainConfig {
            epochs_sep: 0,
            epochs_adapt: 0,
            ..tiny_config()
        };
        let mut trainer = Trainer::new(&s, &t, cfg).unwrap();
        let before = trainer.model().clone();
        trainer.run(&mut ()).unwrap();
        assert_eq!(trainer.model(), &before);
        assert!(trainer.log().is_empty());
    }

    #[test]
    fn separation_leaves_discriminator_alone() {
        let (s, t, _) = tiny_pair();
        let mut trainer = Trainer::new(&s, &t, tiny_config()).unwrap();
        let before = trainer.model().clone();
        trainer.separation_epoch(&mut ()).unwrap();
        let after = trainer.model();
        assert_eq!(after.discriminator, before.discriminator);
        assert_ne!(after.encoder, before.encoder);
        assert_ne!(after.classifier, before.classifier);

        let before = after.clone();
        trainer.adaptation_epoch(&mut ()).unwrap();
        assert_ne!(trainer.model().discriminator, before.discriminator);
    }

    #[test]
    fn same_seed_same_outcome() {
        let (s, t, _) = tiny_pair();
        let a = train(&s, &t, &tiny_config()).unwrap();
        let b = train(&s, &t, &tiny_config()).unwrap();
        assert_eq!(a.report, b.report);
        assert_eq!(a.model, b.model);
        assert_eq!(a.checkpoint.to_bytes().unwrap(), b.checkpoint.to_bytes().unwrap());
        assert_eq!(a.log.len(), 4);
        assert!(a.report.is_some());
    }

    #[test]
    fn no_adaptation_matches_separation_only() {
        let (s, t, _) = tiny_pair();
        let cfg = tiny_config().with_ablation(Ablation::NoAdaptation);
        let ablated = train(&s, &t, &cfg).unwrap();
        let mut trainer = Trainer::new(&s, &t, tiny_config()).unwrap();
        trainer.run_separation(&mut ()).unwrap();
        assert_eq!(&ablated.model, trainer.model());
        assert_eq!(ablated.predictions, predict_target(trainer.model(), &t).unwrap());
    }

    #[test]
    fn no_separation_starts_adaptation_from_init() {
        let (s, t, _) = tiny_pair();
        let cfg = tiny_config().with_ablation(Ablation::NoSeparation);
        let out = train(&s, &t, &cfg).unwrap();
        assert!(out.log.iter().all(|r| r.stage == Stage::Adaptation));
        assert_eq!(out.log.len(), 2);
    }

    #[test]
    fn no_negative_lambda_forces_plus_one() {
        let (s, t, _) = tiny_pair();
        let cfg = tiny_config().with_ablation(Ablation::NoNegativeLambda);
        let mut trainer = Trainer::new(&s, &t, cfg).unwrap();
        trainer.run(&mut ()).unwrap();
        let p = trainer.pseudo_state().unwrap();
        assert!(p.lambda.iter().all(|&l| l == 1.0));
        assert!(p.pseudo_labels.iter().flatten().any(|&l| l == 3));
    }

    #[test]
    fn self_training_ablation_drops_target_loss() {
        let (s, t, _) = tiny_pair();
        let cfg = tiny_config().with_ablation(Ablation::NoSelfTraining);
        let out = train(&s, &t, &cfg).unwrap();
        let adapt: Vec<_> = out.log.iter().filter(|r| r.stage == Stage::Adaptation).collect();
        assert!(adapt.iter().all(|r| r.l_aux == 0.0));
    }

    #[test]
    fn mlp_classifier_variant_runs() {
        let (s, t, _) = tiny_pair();
        let cfg = tiny_config().with_ablation(Ablation::MlpClassifier);
        let out = train(&s, &t, &cfg).unwrap();
        assert!(matches!(out.model.classifier, crate::model::Classifier::Linear(_)));
        assert_eq!(out.target_probs.ncols(), 3);
    }

    #[test]
    fn empty_pseudo_labels_give_zero_target_loss() {
        let (s, t, _) = tiny_pair();
        let mut trainer = Trainer::new(&s, &t, tiny_config()).unwrap();
        let mut pseudo = trainer.refresh_pseudo_labels().unwrap().clone();
        pseudo.pseudo_labels.iter_mut().for_each(|p| *p = None);
        pseudo.lambda.iter_mut().for_each(|l| *l = 1.0);
        let model = trainer.model().clone();
        let mut tape = Tape::new();
        let bound = model.bind(&mut tape).unwrap();
        let batch = Minibatch {
            source: (0..16).collect(),
            target: (0..24).collect(),
        };
        let labels = s.labels().unwrap();
        let losses = adaptation_loss(
            &mut tape,
            &model,
            &bound,
            trainer.contexts(),
            &batch,
            labels,
            &pseudo,
            trainer.config(),
        )
        .unwrap();
        assert_eq!(tape.scalar_value(losses.aux), 0.0);
        let expected = tape.scalar_value(losses.l_s) + tape.scalar_value(losses.l_d.unwrap());
        assert!((tape.scalar_value(losses.total) - expected).abs() < 1e-12);
    }

    #[test]
    fn log_line_format() {
        let r = LogRecord {
            epoch: 3,
            stage: Stage::Separation,
            l_s: 0.5,
            l_aux: 0.25,
            l_d: None,
            pseudo_labeled: 0,
            negative_lambda: 0,
        };
        assert_eq!(
            r.to_string(),
            "epoch=3 stage=separation l_s=0.5 l_u=0.25 l_d=- pseudo=0 negative=0"
        );
    }

    #[test]
    fn source_with_private_class_rejected() {
        let (_, t, _) = tiny_pair();
        assert!(matches!(
            Trainer::new(&t, &t, tiny_config()),
            Err(Error::InvalidLabel { label: 3, .. })
        ));
    }
}
