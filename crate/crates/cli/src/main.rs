use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use reflect_core::corpus::{load_clusters, write_clusters};
use reflect_core::eval::{
    evaluate_clusters, evaluate_hypotheses, read_hypotheses, run_ablation, split_tail,
    write_hypotheses, AblationConfig, ExperimentReport, Hypothesis, ReferenceMode,
};
use reflect_core::extractor::Checkpoint;
use reflect_core::learning::{train_casc, train_mle, write_metrics, TrainConfig, TrainOutcome};
use reflect_core::supervision::{
    build_records, read_records, write_records, OracleCriterion, PorConfig,
};
use reflect_core::synthetic::{toy_corpus, ToyCorpusSpec};
use reflect_core::{Config, DocumentCluster, Error, Pipeline};

#[derive(Parser)]
#[command(
    name = "reflect",
    version,
    about = "Extract-then-abstract summarization training and evaluation"
)]
struct Cli {
    /// Flat TOML config; command-line flags take precedence over it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build greedy pseudo oracles and POR weights.
    Oracle(OracleArgs),
    /// Train the scorer by weighted maximum likelihood.
    Train(TrainArgs),
    /// Fine-tune a checkpoint with credit-aware self-critic training.
    Casc(CascArgs),
    /// Select, abstract and write one summary per cluster.
    Generate(GenerateArgs),
    /// Score generated summaries against the gold summaries.
    Evaluate(EvaluateArgs),
    /// Run the POR x SR x regime grid.
    Ablate(AblateArgs),
    /// Write the synthetic toy corpus.
    Synth(SynthArgs),
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    min_select: Option<usize>,
    #[arg(long)]
    max_select: Option<usize>,
    /// avg-r1r2-recall, avg-r1r2-f1 or rl-recall.
    #[arg(long)]
    metric: Option<String>,
    #[arg(long)]
    gamma: Option<f64>,
}

#[derive(Args)]
struct AbstractorArgs {
    /// concat, centrality or external.
    #[arg(long)]
    abstractor: Option<String>,
    /// Command line of the external adapter.
    #[arg(long)]
    abs_cmd: Option<String>,
    /// Summary length budget in tokens.
    #[arg(long)]
    budget: Option<usize>,
}

impl AbstractorArgs {
    /// Flags set the base abstractor and, when the config defines one, the
    /// evaluation abstractor as well.
    fn apply(&self, cfg: &mut Config) {
        let mut prefixes = vec!["abstractor"];
        if cfg.keys().any(|k| k.starts_with("eval_abstractor.")) {
            prefixes.push("eval_abstractor");
        }
        for p in prefixes {
            if let Some(k) = &self.abstractor {
                cfg.set(&format!("{p}.kind"), k.as_str());
            }
            if let Some(c) = &self.abs_cmd {
                cfg.set(&format!("{p}.command"), c.as_str());
                if self.abstractor.is_none() {
                    cfg.set(&format!("{p}.kind"), "external");
                }
            }
            if let Some(b) = self.budget {
                cfg.set(&format!("{p}.budget"), b as i64);
            }
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Supervision records written by `oracle`.
    #[arg(long)]
    sup: PathBuf,
    /// Validation clusters for model selection (default: the training set).
    #[arg(long)]
    val: Option<PathBuf>,
    #[arg(long)]
    sr: bool,
    #[arg(long)]
    por: bool,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    /// Write the per-step metrics log here.
    #[arg(long)]
    metrics: Option<PathBuf>,
    #[command(flatten)]
    abs: AbstractorArgs,
}

#[derive(Args)]
struct CascArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    val: Option<PathBuf>,
    /// distinct, intersection or all.
    #[arg(long)]
    credit_mode: Option<String>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Start from fresh parameters of the checkpoint's shape.
    #[arg(long)]
    cold_start: bool,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    metrics: Option<PathBuf>,
    #[command(flatten)]
    abs: AbstractorArgs,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    ckpt: PathBuf,
    /// generated, bootstrap or ground-truth.
    #[arg(long)]
    reference_mode: Option<String>,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    abs: AbstractorArgs,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    hyp: PathBuf,
    /// CSV report; a Markdown copy is written next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AblateArgs {
    /// CSV report; a Markdown copy is written next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 200)]
    clusters: usize,
    #[arg(long)]
    seed: Option<u64>,
}

enum Failure {
    Usage(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(m) => Failure::Usage(m),
            e => Failure::Core(e),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Core(e.into())
    }
}

type CliResult<T> = Result<T, Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_external() { 3 } else { 2 })
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let (mut cfg, base) = match &cli.config {
        Some(p) => (
            Config::load(p)?,
            p.parent().map(Path::to_path_buf).unwrap_or_default(),
        ),
        None => (Config::default(), PathBuf::new()),
    };
    match cli.command {
        Command::Oracle(a) => oracle(&mut cfg, a),
        Command::Train(a) => train(&mut cfg, a),
        Command::Casc(a) => casc(&mut cfg, a),
        Command::Generate(a) => generate(&mut cfg, a),
        Command::Evaluate(a) => evaluate(&cfg, a),
        Command::Ablate(a) => ablate(&cfg, &base, a),
        Command::Synth(a) => synth(&cfg, a),
    }
}

fn load(pipeline: &Pipeline, path: &Path) -> CliResult<Vec<DocumentCluster>> {
    Ok(load_clusters(path, &pipeline.tokenizer)?)
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn write_report(report: &ExperimentReport, out: &Path) -> CliResult<()> {
    std::fs::write(out, report.to_csv())?;
    let markdown = report.to_markdown();
    std::fs::write(out.with_extension("md"), &markdown)?;
    print!("{markdown}");
    Ok(())
}

fn set_seed(cfg: &mut Config, seed: Option<u64>) -> CliResult<u64> {
    match seed {
        Some(s) => Ok(s),
        None => Ok(cfg.seed("seed", 0)?),
    }
}

fn oracle(cfg: &mut Config, a: OracleArgs) -> CliResult<()> {
    if let Some(k) = a.min_select {
        cfg.set("oracle.min_select", k as i64);
    }
    if let Some(k) = a.max_select {
        cfg.set("oracle.max_select", k as i64);
    }
    if let Some(m) = &a.metric {
        cfg.set("oracle.metric", m.as_str());
    }
    if let Some(g) = a.gamma {
        cfg.set("por.gamma", g);
    }
    let pipeline = Pipeline::from_config(cfg)?;
    let criterion = OracleCriterion::from_config(cfg)?;
    let por = PorConfig::from_config(cfg)?;
    let clusters = load(&pipeline, &a.input)?;
    let records = build_records(
        &clusters,
        &criterion,
        &por,
        &pipeline.tokenizer,
        &pipeline.rouge,
    )?;
    let mut out = create(&a.out)?;
    write_records(&mut out, &records)?;
    out.flush()?;
    Ok(())
}

fn finish_training(
    outcome: &TrainOutcome,
    sr: bool,
    out: &Path,
    metrics: Option<&Path>,
) -> CliResult<()> {
    Checkpoint::new(&outcome.params, sr).save(out)?;
    if let Some(path) = metrics {
        let mut w = create(path)?;
        write_metrics(&mut w, &outcome.log)?;
        w.flush()?;
    }
    match outcome.best_val {
        Some(v) => eprintln!(
            "best epoch {} (validation ROUGE-1 F1 {v:.4})",
            outcome.best_epoch
        ),
        None => eprintln!("no training epochs run"),
    }
    Ok(())
}

fn train(cfg: &mut Config, a: TrainArgs) -> CliResult<()> {
    a.abs.apply(cfg);
    if let Some(e) = a.epochs {
        cfg.set("train.epochs", e as i64);
    }
    if let Some(lr) = a.lr {
        cfg.set("train.lr", lr);
    }
    let por = a.por || cfg.bool("train.por", false)?;
    let sr = a.sr || cfg.bool("train.sr", false)?;
    let pipeline = Pipeline::from_config(cfg)?;
    let tc = TrainConfig {
        seed: set_seed(cfg, a.seed)?,
        por_enabled: por,
        sr_enabled: sr,
        ..TrainConfig::from_config(cfg, "train")?
    };
    let clusters = load(&pipeline, &a.input)?;
    let records = read_records(BufReader::new(File::open(&a.sup)?))?;
    let val = match &a.val {
        Some(p) => load(&pipeline, p)?,
        None => clusters.clone(),
    };
    let init = pipeline.extractor.init_params(tc.seed)?;
    let outcome = train_mle(&pipeline, &clusters, &records, &val, &tc, init)?;
    finish_training(&outcome, sr, &a.out, a.metrics.as_deref())
}

fn casc(cfg: &mut Config, a: CascArgs) -> CliResult<()> {
    a.abs.apply(cfg);
    if let Some(m) = &a.credit_mode {
        cfg.set("casc.credit_mode", m.as_str());
    }
    if let Some(e) = a.epochs {
        cfg.set("casc.epochs", e as i64);
    }
    if let Some(lr) = a.lr {
        cfg.set("casc.lr", lr);
    }
    if a.cold_start {
        cfg.set("casc.cold_start", true);
    }
    let pipeline = Pipeline::from_config(cfg)?;
    let ck = Checkpoint::load(&a.ckpt, None)?;
    let tc = TrainConfig {
        seed: set_seed(cfg, a.seed)?,
        sr_enabled: ck.sr,
        ..TrainConfig::from_config(cfg, "casc")?
    };
    let clusters = load(&pipeline, &a.input)?;
    let val = match &a.val {
        Some(p) => load(&pipeline, p)?,
        None => clusters.clone(),
    };
    let init = if tc.cold_start {
        let mut extractor = pipeline.extractor;
        extractor.window = ck.w;
        extractor.hidden = ck.hidden;
        extractor.init_params(tc.seed)?
    } else {
        ck.scorer()
    };
    let outcome = train_casc(&pipeline, &clusters, &val, &tc, init)?;
    finish_training(&outcome, ck.sr, &a.out, a.metrics.as_deref())
}

fn reference_mode(cfg: &Config, flag: Option<&str>) -> CliResult<ReferenceMode> {
    match flag.or(cfg.str("eval.reference_mode")?) {
        Some(s) => Ok(s.parse()?),
        None => Ok(ReferenceMode::default()),
    }
}

fn generate(cfg: &mut Config, a: GenerateArgs) -> CliResult<()> {
    a.abs.apply(cfg);
    let pipeline = Pipeline::from_config(cfg)?;
    let mode = reference_mode(cfg, a.reference_mode.as_deref())?;
    let ck = Checkpoint::load(&a.ckpt, None)?;
    let clusters = load(&pipeline, &a.input)?;
    if clusters.is_empty() {
        return Err(Error::NoExamples.into());
    }
    let params = ck.scorer();
    let mut hyps = Vec::new();
    let mut first_error = None;
    for (r, c) in evaluate_clusters(&pipeline, &clusters, &params, ck.sr, mode, None)
        .into_iter()
        .zip(&clusters)
    {
        match r {
            Ok(e) => hyps.push(Hypothesis::from_eval(&e)),
            Err(e) => {
                log::warn!("skipping cluster {}: {e}", c.id);
                first_error.get_or_insert(e);
            }
        }
    }
    if hyps.is_empty() {
        return Err(first_error.unwrap_or(Error::NoExamples).into());
    }
    let mut out = create(&a.out)?;
    write_hypotheses(&mut out, &hyps)?;
    out.flush()?;
    Ok(())
}

fn evaluate(cfg: &Config, a: EvaluateArgs) -> CliResult<()> {
    let pipeline = Pipeline::from_config(cfg)?;
    let criterion = OracleCriterion::from_config(cfg)?;
    let clusters = load(&pipeline, &a.input)?;
    let hyps = read_hypotheses(BufReader::new(File::open(&a.hyp)?))?;
    let mut row = evaluate_hypotheses(&pipeline, &clusters, &hyps, &criterion)?;
    row.label = a
        .hyp
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    write_report(&ExperimentReport { rows: vec![row] }, &a.out)
}

/// Corpus paths in the config are relative to the config file.
fn data_path(cfg: &Config, base: &Path, key: &str) -> CliResult<Option<PathBuf>> {
    Ok(cfg.str(key)?.map(|p| base.join(p)))
}

fn ablate(cfg: &Config, base: &Path, a: AblateArgs) -> CliResult<()> {
    let pipeline = Pipeline::from_config(cfg)?;
    let train_path = data_path(cfg, base, "data.train")?
        .ok_or_else(|| Failure::Usage("config must set `data.train`".into()))?;
    let corpus = load(&pipeline, &train_path)?;
    let (train, test) = match data_path(cfg, base, "data.test")? {
        Some(p) => (corpus, load(&pipeline, &p)?),
        None => split_tail(corpus, cfg.f64("data.test_fraction", 0.25)?)?,
    };
    let val = match data_path(cfg, base, "data.val")? {
        Some(p) => load(&pipeline, &p)?,
        None => train.clone(),
    };
    let config = AblationConfig::from_config(cfg)?;
    let report = run_ablation(&pipeline, &train, &val, &test, &config)?;
    write_report(&report, &a.out)
}

fn synth(cfg: &Config, a: SynthArgs) -> CliResult<()> {
    let spec = ToyCorpusSpec {
        clusters: a.clusters,
        seed: match a.seed {
            Some(s) => s,
            None => cfg.seed("seed", ToyCorpusSpec::default().seed)?,
        },
        ..ToyCorpusSpec::default()
    };
    let mut out = create(&a.out)?;
    write_clusters(&mut out, &toy_corpus(&spec))?;
    out.flush()?;
    Ok(())
}
