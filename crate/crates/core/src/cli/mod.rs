//! Batch command-line front end. Results go to files, diagnostics to stderr.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use crate::eval::{build_report, export_embeddings, EvalReport, HEADLINE_METRICS};
use crate::graph::{
    load_graph, openness, save_graph, folding_check, AttributedGraph, LabelSpace, SbmPairConfig,
};
use crate::trainer::{
    infer_label_space, predict_target, train_with, Ablation, Checkpoint, TrainConfig,
    TrainOutcome,
};

#[derive(Debug, Parser)]
#[command(name = "uaga", version, about = "Open-set cross-network node classification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic source/target dataset pair.
    Gen(GenArgs),
    /// Train on a dataset pair, once per seed.
    Train(TrainCmd),
    /// Train across several known-class counts and tabulate metrics.
    SweepOpenness(SweepArgs),
    /// Report homophily before and after folding private classes.
    Homophily(HomophilyArgs),
    /// Evaluate a checkpoint on a labeled target dataset.
    Eval(EvalArgs),
}

/// Block-model parameters shared by `gen` and `sweep-openness`.
#[derive(Debug, Clone, Args)]
pub struct SbmArgs {
    #[arg(long, default_value_t = 60)]
    pub nodes_per_class: usize,
    #[arg(long, default_value_t = 0.2)]
    pub p_in: f64,
    #[arg(long, default_value_t = 0.01)]
    pub p_out: f64,
    #[arg(long, default_value_t = 1.0)]
    pub shift: f64,
    #[arg(long, default_value_t = 32)]
    pub attr_dim: usize,
    #[arg(long, default_value_t = 1.0)]
    pub attr_std: f64,
    #[arg(long, default_value_t = 1.0)]
    pub mean_scale: f64,
}

impl SbmArgs {
    fn pair_config(&self, known: usize, private: usize, seed: u64) -> SbmPairConfig {
        SbmPairConfig {
            known,
            private,
            nodes_per_class: self.nodes_per_class,
            p_in: self.p_in,
            p_out: self.p_out,
            attr_dim: self.attr_dim,
            mean_scale: self.mean_scale,
            attr_std: self.attr_std,
            shift: self.shift,
            seed,
        }
    }
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Known and private class counts, e.g. `5+2`.
    #[arg(long, default_value = "5+2")]
    pub classes: String,
    #[command(flatten)]
    pub sbm: SbmArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Training hyperparameters. Unset flags fall back to `--config`, then to
/// the built-in defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub known: Option<usize>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub r: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub epochs_sep: Option<usize>,
    #[arg(long)]
    pub epochs_adapt: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Comma-separated seeds, one run each.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Vec<u64>,
    #[arg(long, value_delimiter = ',')]
    pub ablation: Vec<Ablation>,
}

#[derive(Debug, Args)]
pub struct TrainCmd {
    #[arg(long)]
    pub source: PathBuf,
    #[arg(long)]
    pub target: PathBuf,
    #[command(flatten)]
    pub train: TrainArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Total class count `C` of the target network.
    #[arg(long, default_value_t = 9)]
    pub total_classes: usize,
    /// Known class counts to sweep.
    #[arg(long, value_delimiter = ',', required = true)]
    pub known_list: Vec<usize>,
    #[command(flatten)]
    pub sbm: SbmArgs,
    #[arg(long, default_value_t = 0)]
    pub data_seed: u64,
    #[command(flatten)]
    pub train: TrainArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct HomophilyArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub known: usize,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub target: PathBuf,
    /// Report destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(a) => cmd_gen(&a),
        Command::Train(a) => cmd_train(&a),
        Command::SweepOpenness(a) => cmd_sweep_openness(&a),
        Command::Homophily(a) => {
            print!("{}", cmd_homophily(&a)?);
            Ok(())
        }
        Command::Eval(a) => {
            let text = cmd_eval(&a)?;
            match &a.out {
                Some(p) => write_file(p, &text),
                None => {
                    print!("{text}");
                    Ok(())
                }
            }
        }
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))
}

/// Parses `K+P` into known and private class counts.
pub fn parse_classes(spec: &str) -> Result<(usize, usize)> {
    let (k, p) = spec
        .split_once('+')
        .with_context(|| format!("--classes expects K+P, got {spec:?}"))?;
    let known: usize = k.trim().parse().context("known class count")?;
    let private: usize = p.trim().parse().context("private class count")?;
    ensure!(known >= 2, "at least two known classes are required");
    ensure!(private >= 1, "at least one private class is required (openness must exceed 0)");
    Ok((known, private))
}

pub fn cmd_gen(args: &GenArgs) -> Result<()> {
    let (known, private) = parse_classes(&args.classes)?;
    let pair = args.sbm.pair_config(known, private, args.seed);
    let (source, target, ls) = pair.generate()?;
    create_dir(&args.out)?;
    save_graph(&source, args.out.join("source"))?;
    save_graph(&target, args.out.join("target"))?;
    let manifest = format!(
        "known={known}\nprivate={private}\nopenness={}\nnodes_per_class={}\np_in={}\np_out={}\n\
         shift={}\nattr_dim={}\nattr_std={}\nmean_scale={}\nseed={}\n\
         source_nodes={}\nsource_edges={}\ntarget_nodes={}\ntarget_edges={}\n",
        openness(&ls),
        pair.nodes_per_class,
        pair.p_in,
        pair.p_out,
        pair.shift,
        pair.attr_dim,
        pair.attr_std,
        pair.mean_scale,
        pair.seed,
        source.node_count(),
        source.edge_count(),
        target.node_count(),
        target.edge_count(),
    );
    write_file(&args.out.join("manifest.txt"), manifest)?;
    info!("wrote dataset pair to {}", args.out.display());
    Ok(())
}

/// Resolves defaults, config file and flags (in that order of precedence,
/// flags winning), then applies the small-graph overrides: `B` capped at
/// the larger network and `R` defaulting to a quarter of the target.
pub fn resolve_config(
    args: &TrainArgs,
    source_nodes: usize,
    target_nodes: usize,
) -> Result<TrainConfig> {
    let mut cfg = TrainConfig::default();
    let mut r_given = false;
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        cfg.apply_text(&text)?;
        r_given = text
            .lines()
            .any(|l| l.split('#').next().unwrap_or("").trim_start().starts_with("r="));
    }
    if let Some(v) = args.known {
        cfg.known = v;
    }
    if let Some(v) = args.mu {
        cfg.mu = v;
    }
    if let Some(v) = args.beta {
        cfg.beta = v;
    }
    if let Some(v) = args.r {
        cfg.r = v;
        r_given = true;
    }
    if let Some(v) = args.batch {
        cfg.batch = v;
    }
    if let Some(v) = args.epochs_sep {
        cfg.epochs_sep = v;
    }
    if let Some(v) = args.epochs_adapt {
        cfg.epochs_adapt = v;
    }
    if let Some(v) = args.lr {
        cfg.lr = v;
    }
    if !args.ablation.is_empty() {
        cfg.ablations.clear();
        for &a in &args.ablation {
            cfg = cfg.with_ablation(a);
        }
    }
    if !r_given {
        cfg.r = target_nodes.div_ceil(4);
    }
    cfg.r = cfg.r.min(target_nodes).max(1);
    cfg.batch = cfg.batch.min(source_nodes.max(target_nodes)).max(1);
    cfg.validate()?;
    Ok(cfg)
}

fn seed_list(args: &TrainArgs, cfg: &TrainConfig) -> Vec<u64> {
    if args.seeds.is_empty() {
        vec![cfg.seed]
    } else {
        args.seeds.clone()
    }
}

fn predictions_text(outcome: &TrainOutcome) -> String {
    let unknown = outcome.config.known;
    let mut out = String::from("node\tpredicted\tunknown_score\n");
    for (i, p) in outcome.predictions.iter().enumerate() {
        let _ = writeln!(out, "{i}\t{p}\t{}", outcome.target_probs[[i, unknown]]);
    }
    out
}

fn tagged_report(cfg: &TrainConfig, report: &EvalReport) -> String {
    format!(
        "variant={}\nseed={}\n{}",
        cfg.variant_name(),
        cfg.seed,
        report.to_text()
    )
}

/// Sample mean and standard deviation (zero for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn summarize(variant: &str, seeds: &[u64], reports: &[EvalReport]) -> String {
    let seeds: Vec<String> = seeds.iter().map(|s| s.to_string()).collect();
    let mut out = format!("variant={variant}\nseeds={}\n", seeds.join(","));
    for name in HEADLINE_METRICS {
        let values: Vec<f64> = reports.iter().filter_map(|r| r.metric(name)).collect();
        let (mean, std) = mean_std(&values);
        let _ = writeln!(out, "{name}_mean={mean}\n{name}_std={std}");
    }
    out
}

fn train_seeds(
    source: &AttributedGraph,
    target: &AttributedGraph,
    base: &TrainConfig,
    seeds: &[u64],
    label_space: Option<&LabelSpace>,
    out: Option<&Path>,
) -> Result<Vec<EvalReport>> {
    let mut reports = Vec::new();
    for &seed in seeds {
        let cfg = TrainConfig {
            seed,
            ..base.clone()
        };
        info!("training {} with seed {seed}", cfg.variant_name());
        let outcome = train_with(source, target, &cfg, label_space, &mut ())
            .with_context(|| format!("seed {seed}"))?;
        if let Some(dir) = out {
            let dir = dir.join(format!("seed{seed}"));
            create_dir(&dir)?;
            write_file(&dir.join("config.txt"), cfg.to_text())?;
            outcome.checkpoint.save(&dir.join("checkpoint.bin"))?;
            let log: String = outcome.log.iter().map(|r| format!("{r}\n")).collect();
            write_file(&dir.join("train.log"), log)?;
            write_file(&dir.join("predictions.tsv"), predictions_text(&outcome))?;
            let truth = match (target.labels(), label_space) {
                (Some(l), Some(ls)) => Some(ls.map_all(l)?),
                _ => None,
            };
            export_embeddings(
                &dir.join("embeddings.csv"),
                &outcome.source_embeddings,
                source.labels(),
                &outcome.target_embeddings,
                truth.as_deref(),
            )?;
            if let Some(report) = &outcome.report {
                write_file(&dir.join("report.txt"), tagged_report(&cfg, report))?;
            }
        }
        reports.extend(outcome.report);
    }
    Ok(reports)
}

pub fn cmd_train(args: &TrainCmd) -> Result<()> {
    let source = load_graph(&args.source, true)?;
    let target = load_graph(&args.target, false)?;
    let cfg = resolve_config(&args.train, source.node_count(), target.node_count())?;
    let seeds = seed_list(&args.train, &cfg);
    let ls = infer_label_space(&target, cfg.known);
    if target.labels().is_some() && ls.is_none() {
        bail!("target labels contain no class beyond the {} known ones", cfg.known);
    }
    create_dir(&args.out)?;
    let reports = train_seeds(&source, &target, &cfg, &seeds, ls.as_ref(), Some(&args.out))?;
    if !reports.is_empty() {
        write_file(
            &args.out.join("summary.txt"),
            summarize(&cfg.variant_name(), &seeds, &reports),
        )?;
    }
    Ok(())
}

pub fn cmd_sweep_openness(args: &SweepArgs) -> Result<()> {
    let c = args.total_classes;
    for &k in &args.known_list {
        ensure!(k >= 2 && k < c, "known class count {k} outside 2..={}", c - 1);
    }
    create_dir(&args.out)?;
    let mut table = String::new();
    let mut seeds_meta = String::new();
    for &k in &args.known_list {
        let pair = args.sbm.pair_config(k, c - k, args.data_seed);
        let (source, target, ls) = pair.generate()?;
        let train = TrainArgs {
            known: Some(k),
            ..args.train.clone()
        };
        let cfg = resolve_config(&train, source.node_count(), target.node_count())?;
        let seeds = seed_list(&args.train, &cfg);
        if seeds_meta.is_empty() {
            let s: Vec<String> = seeds.iter().map(|s| s.to_string()).collect();
            seeds_meta = s.join(",");
            let _ = writeln!(table, "# variant={} seeds={seeds_meta}", cfg.variant_name());
            table.push_str("known\topenness\tos_star\tauc\tos\ths\n");
        }
        let reports = train_seeds(&source, &target, &cfg, &seeds, Some(&ls), None)?;
        let _ = write!(table, "{k}\t{}", openness(&ls));
        for name in HEADLINE_METRICS {
            let values: Vec<f64> = reports.iter().filter_map(|r| r.metric(name)).collect();
            let _ = write!(table, "\t{}", mean_std(&values).0);
        }
        table.push('\n');
    }
    write_file(&args.out.join("openness.tsv"), table)
}

pub fn cmd_homophily(args: &HomophilyArgs) -> Result<String> {
    let g = load_graph(&args.dataset, true)?;
    let c = g.class_count().context("dataset has no labels")?;
    let ls = LabelSpace::new(args.known, c.max(args.known + 1))?;
    let check = folding_check(&g, &ls)?;
    Ok(format!(
        "h_original={}\nh_remapped={}\nholds={}\n",
        check.original, check.remapped, check.holds
    ))
}

pub fn cmd_eval(args: &EvalArgs) -> Result<String> {
    let ck = Checkpoint::load(&args.checkpoint)?;
    let model = ck.restore_model()?;
    let target = load_graph(&args.target, true)?;
    let known = ck.config.known;
    let ls = infer_label_space(&target, known)
        .with_context(|| format!("target has no class beyond the {known} known ones"))?;
    let (_, probs) = model.predict(&crate::model::GraphContext::new(&target))?;
    let predicted = predict_target(&model, &target)?;
    let truth = ls.map_all(target.require_labels()?)?;
    let scores: Vec<f64> = probs.column(known).to_vec();
    let report = build_report(&truth, &predicted, &scores, &ls)?;
    Ok(tagged_report(&ck.config, &report))
}
