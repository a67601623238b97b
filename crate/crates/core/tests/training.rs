use uaga::diff::Matrix;
use uaga::graph::SbmPairConfig;
use uaga::model::GraphContext;
use uaga::trainer::{Checkpoint, TrainConfig, Trainer};

fn column_std(m: &Matrix, col: usize) -> f64 {
    let c = m.column(col);
    let mean = c.mean().unwrap();
    (c.mapv(|v| (v - mean).powi(2)).sum() / c.len() as f64).sqrt()
}

fn pair() -> (uaga::graph::AttributedGraph, uaga::graph::AttributedGraph) {
    let (s, t, _) = SbmPairConfig {
        nodes_per_class: 30,
        seed: 12,
        ..SbmPairConfig::default()
    }
    .generate()
    .unwrap();
    (s, t)
}

fn config() -> TrainConfig {
    TrainConfig {
        r: 50,
        epochs_adapt: 5,
        seed: 3,
        ..TrainConfig::default()
    }
}

#[test]
fn separation_spreads_unknown_scores() {
    let (s, t) = pair();
    let mut trainer = Trainer::new(&s, &t, config()).unwrap();
    let ctx = GraphContext::new(&t);
    let (_, before) = trainer.model().predict(&ctx).unwrap();
    trainer.run_separation(&mut ()).unwrap();
    let (_, after) = trainer.model().predict(&ctx).unwrap();
    assert!(column_std(&after, 5) > column_std(&before, 5));
    assert_eq!(trainer.log().len(), 30);
}

#[test]
fn losses_stay_finite_and_records_are_complete() {
    let (s, t) = pair();
    let mut trainer = Trainer::new(&s, &t, config()).unwrap();
    trainer.run(&mut ()).unwrap();
    let log = trainer.log();
    assert_eq!(log.len(), 35);
    for r in log {
        assert!(r.l_s.is_finite() && r.l_aux.is_finite());
        assert!(r.l_d.is_none_or(f64::is_finite));
    }
    let last = log.last().unwrap();
    assert_eq!(last.negative_lambda, trainer.pseudo_state().unwrap().negative_count());
}

#[test]
fn checkpoint_restores_predictions() {
    let (s, t) = pair();
    let mut trainer = Trainer::new(&s, &t, config()).unwrap();
    trainer.run(&mut ()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ck.bin");
    trainer.checkpoint().save(&path).unwrap();
    let restored = Checkpoint::load(&path).unwrap().restore_model().unwrap();
    assert_eq!(&restored, trainer.model());
    assert_eq!(Checkpoint::load(&path).unwrap().config, config());
}
