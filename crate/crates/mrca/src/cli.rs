//! Command-line interface.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::parser::ValueSource;
use clap::{ArgMatches, Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use mrca_core::eval::{evaluate_model, EvalReport, Scorer};
use mrca_core::gradcheck::{self, GradcheckReport};
use mrca_core::loss::{self, DEFAULT_GAMMA};
use mrca_core::train::{fit, multi_run, EpochRecord, Observer, TrainConfig};
use mrca_core::{Dataset, Head, LabeledExample, LossKind, ModelParams, Shape, Span, SplitKind};
use serde_json::json;

use crate::checkpoint::Checkpoint;
use crate::config::parse_config;
use crate::corpus::{self, Format};
use crate::embeddings::load_embeddings;
use crate::error::{CliError, Result};
use crate::metrics::{read_metrics, MetricsRecord};
use crate::plot::render_f1_curve;

/// Name of the best checkpoint inside a training output directory.
pub const CHECKPOINT_FILE: &str = "checkpoint.mrca";
pub const METRICS_FILE: &str = "metrics.jsonl";
pub const REPORT_FILE: &str = "report.json";

/// Printed by `predict` when no relation reaches the threshold.
pub const EMPTY_SET: &str = "(none)";

#[derive(Debug, Parser)]
#[command(name = "mrca", version, about = "Sentence-level multi-label relation classification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert release files into a canonical corpus directory and print statistics.
    Import(ImportArgs),
    /// Train a model, write the best checkpoint, the metrics log and a test report.
    Train(TrainArgs),
    /// Score a checkpoint on one split of a corpus.
    Eval(EvalArgs),
    /// List the relations predicted for one sentence.
    Predict(PredictArgs),
    /// Print Dice and RC Dice losses for reference label/prediction pairs.
    Losstable(LossTableArgs),
    /// Compare analytic and finite-difference gradients on a tiny random model.
    Gradcheck(GradcheckArgs),
    /// Draw the validation F1 curve from a metrics log.
    Plot(PlotArgs),
}

fn parse_loss(s: &str) -> std::result::Result<LossKind, String> {
    LossKind::parse(s).ok_or_else(|| format!("unknown loss `{s}` (expected rc_dice, dice or bce_sigmoid)"))
}

fn parse_format(s: &str) -> std::result::Result<Format, String> {
    Format::parse(s).ok_or_else(|| format!("unknown format `{s}` (expected copyre-json or canonical-jsonl)"))
}

fn parse_split(s: &str) -> std::result::Result<SplitKind, String> {
    SplitKind::ALL
        .into_iter()
        .find(|k| k.name() == s)
        .ok_or_else(|| format!("unknown split `{s}` (expected train, validation or test)"))
}

/// `START:END`, a half-open token range.
pub fn parse_span(s: &str) -> std::result::Result<Span, String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("span `{s}` must look like START:END"))?;
    let start: usize = a.trim().parse().map_err(|_| format!("bad span start in `{s}`"))?;
    let end: usize = b.trim().parse().map_err(|_| format!("bad span end in `{s}`"))?;
    if end <= start {
        return Err(format!("span `{s}` is empty"));
    }
    Ok(Span::new(start, end))
}

#[derive(Debug, Args)]
pub struct ImportArgs {
    /// Input format: copyre-json or canonical-jsonl.
    #[arg(long, default_value = "copyre-json", value_parser = parse_format)]
    pub format: Format,
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub validation: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    /// Output corpus directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Corpus name used in reports.
    #[arg(long)]
    pub name: Option<String>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Word-vector file.
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Canonical corpus directory.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Output directory for checkpoints, metrics log and report.
    #[arg(long)]
    pub out: PathBuf,
    /// Flat `key = value` file; command-line flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Independent runs with seeds seed, seed+1, …
    #[arg(long, default_value_t = 1)]
    pub runs: usize,
    /// rc_dice, dice or bce_sigmoid (sigmoid output head).
    #[arg(long, default_value = "rc_dice", value_parser = parse_loss)]
    pub loss: LossKind,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.0015)]
    pub learning_rate: f64,
    /// Inverse-time decay per optimizer step.
    #[arg(long, default_value_t = 3e-5)]
    pub decay: f64,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    /// Maximum epochs per run.
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    /// Epochs without validation F1 improvement before stopping.
    #[arg(long, default_value_t = 5)]
    pub patience: usize,
    #[arg(long, default_value_t = 0.15)]
    pub dropout: f64,
    /// LSTM units per direction.
    #[arg(long, default_value_t = 500)]
    pub hidden: usize,
    /// Padded sentence length.
    #[arg(long, default_value_t = 100)]
    pub seq_len: usize,
    /// Average-pooling window.
    #[arg(long, default_value_t = 80)]
    pub pool: usize,
    /// Average-pooling stride.
    #[arg(long, default_value_t = 2)]
    pub stride: usize,
    /// Dice smoothing constant.
    #[arg(long, default_value_t = DEFAULT_GAMMA)]
    pub gamma: f64,
    /// Score at or above which a relation counts as predicted.
    #[arg(long, default_value_t = loss::THRESHOLD)]
    pub threshold: f64,
    /// Suppress per-epoch progress on stderr.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    /// train, validation or test.
    #[arg(long, default_value = "test", value_parser = parse_split)]
    pub split: SplitKind,
    #[arg(long, default_value_t = loss::THRESHOLD)]
    pub threshold: f64,
    /// Print a JSON record instead of a table.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Whitespace-tokenized sentence.
    #[arg(long)]
    pub sentence: String,
    /// Subject token range START:END (end exclusive); repeatable.
    #[arg(long = "subject", value_parser = parse_span)]
    pub subjects: Vec<Span>,
    /// Object token range START:END (end exclusive); repeatable.
    #[arg(long = "object", value_parser = parse_span)]
    pub objects: Vec<Span>,
    #[arg(long, default_value_t = loss::THRESHOLD)]
    pub threshold: f64,
    /// Print every relation's score, not just the predicted ones.
    #[arg(long)]
    pub all: bool,
}

#[derive(Debug, Args)]
pub struct LossTableArgs {
    #[arg(long, default_value_t = DEFAULT_GAMMA)]
    pub gamma: f64,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 3)]
    pub embed_dim: usize,
    #[arg(long, default_value_t = 3)]
    pub hidden: usize,
    #[arg(long, default_value_t = 5)]
    pub seq_len: usize,
    #[arg(long, default_value_t = 3)]
    pub relations: usize,
    #[arg(long, default_value_t = 2)]
    pub pool: usize,
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    /// Random points per label for the loss checks.
    #[arg(long, default_value_t = 200)]
    pub points: usize,
    /// Perturb one analytic gradient component (negative control).
    #[arg(long, hide = true)]
    pub corrupt: bool,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Metrics log written by `train`.
    #[arg(long)]
    pub log: PathBuf,
    /// Which run of a multi-run log to draw.
    #[arg(long, default_value_t = 0)]
    pub run: usize,
    #[arg(long, default_value_t = 11)]
    pub height: usize,
    /// Write the chart here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match Cli::command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    let result = Cli::from_arg_matches(&matches)
        .map_err(|e| CliError::Usage(e.to_string()))
        .and_then(|cli| run(cli, &matches, out, err));
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli, matches: &ArgMatches, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Import(a) => cmd_import(&a, out),
        Command::Train(mut a) => {
            let sub = matches.subcommand_matches("train").expect("train matches");
            apply_config(&mut a, sub)?;
            cmd_train(&a, out, err)
        }
        Command::Eval(a) => cmd_eval(&a, out),
        Command::Predict(a) => cmd_predict(&a, out),
        Command::Losstable(a) => cmd_losstable(&a, out),
        Command::Gradcheck(a) => cmd_gradcheck(&a, out),
        Command::Plot(a) => cmd_plot(&a, out),
    }
}

fn io_out(e: std::io::Error) -> CliError {
    CliError::io("<output>")(e)
}

pub fn cmd_import(a: &ImportArgs, out: &mut dyn Write) -> Result<()> {
    let name = a.name.clone().unwrap_or_else(|| {
        a.out.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "corpus".into())
    });
    let imported = corpus::import_files(&name, [&a.train, &a.validation, &a.test], a.format)?;
    corpus::write_corpus_dir(&imported.dataset, &a.out)?;
    write_stats(&imported, out).map_err(io_out)
}

fn write_stats(imported: &corpus::Imported, out: &mut dyn Write) -> std::io::Result<()> {
    let ds = &imported.dataset;
    let stats = ds.stats();
    writeln!(out, "Dataset: {}", ds.name)?;
    writeln!(out, "Relations: {}", ds.num_relations())?;
    writeln!(out, "{:<12} {:>9} {:>8} {:>9} {:>8} {:>8}", "split", "sentences", "skipped", "mean_pos", "stdev", "3+ %")?;
    for (k, kind) in SplitKind::ALL.into_iter().enumerate() {
        let s = &stats.per_split[k];
        writeln!(
            out,
            "{:<12} {:>9} {:>8} {:>9.2} {:>8.2} {:>8.2}",
            kind.name(),
            s.sentences,
            imported.skipped[k],
            s.mean_positives,
            s.stdev_positives,
            100.0 * s.share_three_plus
        )?;
    }
    let s = &stats.overall;
    writeln!(
        out,
        "{:<12} {:>9} {:>8} {:>9.2} {:>8.2} {:>8.2}",
        "total",
        s.sentences,
        imported.skipped.iter().sum::<usize>(),
        s.mean_positives,
        s.stdev_positives,
        100.0 * s.share_three_plus
    )?;
    writeln!(out, "Skipped (entity not found): {}", imported.skipped.iter().sum::<usize>())?;
    writeln!(out, "Dropped (no relation): {}", imported.dropped_unlabeled)
}

/// Keys accepted in a training configuration file.
pub const CONFIG_KEYS: [&str; 15] = [
    "runs",
    "loss",
    "seed",
    "learning-rate",
    "decay",
    "batch-size",
    "epochs",
    "patience",
    "dropout",
    "hidden",
    "seq-len",
    "pool",
    "stride",
    "gamma",
    "threshold",
];

fn apply_config(a: &mut TrainArgs, matches: &ArgMatches) -> Result<()> {
    let Some(path) = a.config.clone() else { return Ok(()) };
    let text = fs::read_to_string(&path).map_err(CliError::io(&path))?;
    let cfg = parse_config(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    for (key, value) in &cfg {
        let id = key.replace('-', "_");
        if !CONFIG_KEYS.contains(&key.as_str()) {
            return Err(CliError::Usage(format!("{}: unknown setting `{key}`", path.display())));
        }
        if matches.value_source(&id) == Some(ValueSource::CommandLine) {
            continue;
        }
        let bad = |e: &dyn std::fmt::Display| CliError::Usage(format!("{}: `{key}`: {e}", path.display()));
        macro_rules! set {
            ($field:ident) => {
                a.$field = value.parse().map_err(|e| bad(&e))?
            };
        }
        match key.as_str() {
            "runs" => set!(runs),
            "loss" => a.loss = parse_loss(value).map_err(|e| bad(&e))?,
            "seed" => set!(seed),
            "learning-rate" => set!(learning_rate),
            "decay" => set!(decay),
            "batch-size" => set!(batch_size),
            "epochs" => set!(epochs),
            "patience" => set!(patience),
            "dropout" => set!(dropout),
            "hidden" => set!(hidden),
            "seq-len" => set!(seq_len),
            "pool" => set!(pool),
            "stride" => set!(stride),
            "gamma" => set!(gamma),
            "threshold" => set!(threshold),
            _ => unreachable!("key checked above"),
        }
    }
    Ok(())
}

impl TrainArgs {
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            decay: self.decay,
            batch_size: self.batch_size,
            max_epochs: self.epochs,
            patience: self.patience,
            dropout: self.dropout,
            seed: self.seed,
            loss: self.loss,
            gamma: self.gamma,
            threshold: self.threshold,
        }
    }

    pub fn shape(&self, embed_dim: usize, relations: usize) -> Shape {
        Shape {
            embed_dim,
            hidden: self.hidden,
            seq_len: self.seq_len,
            relations,
            pool: self.pool,
            stride: self.stride,
            head: self.train_config().head(),
        }
    }
}

/// Streams metrics records to the log and progress to stderr.
struct TrainObserver<'a> {
    clock: Instant,
    log: BufWriter<File>,
    log_error: Option<std::io::Error>,
    progress: Option<&'a mut dyn Write>,
    run: usize,
    seed: u64,
}

impl Observer for TrainObserver<'_> {
    fn now_ms(&self) -> u64 {
        self.clock.elapsed().as_millis() as u64
    }

    fn on_run_start(&mut self, run: usize, seed: u64) {
        self.run = run;
        self.seed = seed;
    }

    fn on_epoch(&mut self, r: &EpochRecord) {
        if self.log_error.is_none() {
            let written = MetricsRecord::new(self.run, self.seed, r).write(&mut self.log).and_then(|_| self.log.flush());
            self.log_error = written.err();
        }
        if let Some(p) = self.progress.as_mut() {
            let v = &r.validation;
            let _ = writeln!(
                p,
                "run {} epoch {:>3}  loss {:.6}  val P {:.4} R {:.4} F1 {:.4}  lr {:.3e}  {} ms",
                self.run, r.epoch, r.train_loss, v.precision, v.recall, v.f1, r.lr, r.elapsed_ms
            );
        }
    }
}

struct RunSummary {
    seed: u64,
    best_epoch: usize,
    val_f1: f64,
    test: Option<EvalReport>,
    params: ModelParams,
}

fn report_json(r: &EvalReport) -> serde_json::Value {
    json!({
        "precision": r.precision, "recall": r.recall, "f1": r.f1,
        "tp": r.tp, "fp": r.fp, "fn": r.fn_, "examples": r.n_examples,
    })
}

pub fn cmd_train(a: &TrainArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let cfg = a.train_config();
    cfg.validate().map_err(CliError::core("training configuration"))?;
    if a.runs == 0 {
        return Err(CliError::Usage("--runs must be at least 1".into()));
    }
    let store = load_embeddings(&a.embeddings)?;
    let dataset = corpus::read_corpus_dir(&a.corpus)?;
    let shape = a.shape(store.dim(), dataset.num_relations());
    shape.validate().map_err(CliError::core("model shape"))?;
    for (what, split) in [("training", &dataset.train), ("validation", &dataset.validation)] {
        if split.is_empty() {
            return Err(CliError::Data(format!("{}: the {what} split is empty", a.corpus.display())));
        }
    }
    if a.runs > 1 && dataset.test.is_empty() {
        return Err(CliError::Data(format!("{}: several runs need a test split", a.corpus.display())));
    }
    fs::create_dir_all(&a.out).map_err(CliError::io(&a.out))?;
    let log_path = a.out.join(METRICS_FILE);
    let log = File::create(&log_path).map_err(CliError::io(&log_path))?;
    let mut observer = TrainObserver {
        clock: Instant::now(),
        log: BufWriter::new(log),
        log_error: None,
        progress: if a.quiet { None } else { Some(err) },
        run: 0,
        seed: cfg.seed,
    };

    let runs: Vec<RunSummary> = if dataset.test.is_empty() {
        let init = ModelParams::init(cfg.seed, shape).map_err(CliError::core("initialization"))?;
        let fit = fit(init, &dataset.train, &dataset.validation, &store, &cfg, &mut observer)
            .map_err(CliError::core("training"))?;
        vec![RunSummary { seed: cfg.seed, best_epoch: fit.best_epoch, val_f1: fit.best_f1(), test: None, params: fit.best }]
    } else {
        let multi = multi_run(&dataset, &store, shape, &cfg, a.runs, &mut observer).map_err(CliError::core("training"))?;
        multi
            .runs
            .into_iter()
            .map(|r| RunSummary {
                seed: r.seed,
                best_epoch: r.fit.best_epoch,
                val_f1: r.fit.best_f1(),
                test: Some(r.test),
                params: r.fit.best,
            })
            .collect()
    };
    if let Some(e) = observer.log_error.take() {
        return Err(CliError::Io { path: log_path, source: e });
    }
    drop(observer);

    let checkpoint = |r: &RunSummary| Checkpoint {
        params: r.params.clone(),
        relations: dataset.relations.clone(),
        embeddings: store.fingerprint(),
        loss: cfg.loss,
        seed: r.seed,
        best_epoch: r.best_epoch,
    };
    if runs.len() > 1 {
        for (i, r) in runs.iter().enumerate() {
            checkpoint(r).save(&a.out.join(format!("run-{i}.mrca")))?;
        }
    }
    // first run with the highest validation F1
    let best = runs.iter().enumerate().fold(0, |b, (i, r)| if r.val_f1 > runs[b].val_f1 { i } else { b });
    checkpoint(&runs[best]).save(&a.out.join(CHECKPOINT_FILE))?;

    let tests: Vec<EvalReport> = runs.iter().filter_map(|r| r.test).collect();
    let aggregate = if tests.is_empty() { None } else { Some(mrca_core::eval::aggregate_runs(&tests).map_err(CliError::core("aggregation"))?) };
    let report = json!({
        "loss": cfg.loss.name(),
        "parameters": shape.param_count(),
        "best_run": best,
        "runs": runs.iter().map(|r| json!({
            "seed": r.seed,
            "best_epoch": r.best_epoch,
            "validation_f1": r.val_f1,
            "test": r.test.as_ref().map(report_json),
        })).collect::<Vec<_>>(),
        "aggregate": aggregate.map(|g| json!({
            "runs": g.runs,
            "precision": g.precision.to_string(),
            "recall": g.recall.to_string(),
            "f1": g.f1.to_string(),
        })),
    });
    let report_path = a.out.join(REPORT_FILE);
    fs::write(&report_path, serde_json::to_string_pretty(&report).expect("report serializes") + "\n")
        .map_err(CliError::io(&report_path))?;

    let w = |out: &mut dyn Write| -> std::io::Result<()> {
        writeln!(out, "loss {}  parameters {}", cfg.loss.name(), shape.param_count())?;
        for (i, r) in runs.iter().enumerate() {
            write!(out, "run {i}  seed {}  best epoch {}  val F1 {:.4}", r.seed, r.best_epoch, r.val_f1)?;
            match &r.test {
                Some(t) => writeln!(out, "  test P {:.4} R {:.4} F1 {:.4}", t.precision, t.recall, t.f1)?,
                None => writeln!(out)?,
            }
        }
        if let Some(g) = aggregate {
            writeln!(out, "{g}")?;
        }
        writeln!(out, "checkpoint {}", a.out.join(CHECKPOINT_FILE).display())
    };
    w(out).map_err(io_out)
}

fn load_model(checkpoint: &Path, embeddings: &Path) -> Result<(Checkpoint, mrca_core::EmbeddingStore)> {
    let ckpt = Checkpoint::load(checkpoint)?;
    let store = load_embeddings(embeddings)?;
    ckpt.check_embeddings(&store)?;
    Ok((ckpt, store))
}

pub fn cmd_eval(a: &EvalArgs, out: &mut dyn Write) -> Result<()> {
    if !a.threshold.is_finite() {
        return Err(CliError::Usage("--threshold must be finite".into()));
    }
    let (ckpt, store) = load_model(&a.checkpoint, &a.embeddings)?;
    let dataset: Dataset = corpus::read_corpus_dir(&a.corpus)?;
    ckpt.check_relations(&dataset.relations)?;
    let split = dataset.split(a.split);
    if split.is_empty() {
        return Err(CliError::Data(format!("the {} split is empty", a.split.name())));
    }
    let report = evaluate_model(&ckpt.params, split, &store, a.threshold).map_err(CliError::core("evaluation"))?;
    let text = if a.json {
        let mut v = report_json(&report);
        v["split"] = json!(a.split.name());
        v["threshold"] = json!(a.threshold);
        v.to_string()
    } else {
        format!("split {}  threshold {}\n{report}", a.split.name(), a.threshold)
    };
    writeln!(out, "{text}").map_err(io_out)
}

pub fn cmd_predict(a: &PredictArgs, out: &mut dyn Write) -> Result<()> {
    let tokens: Vec<String> = a.sentence.split_whitespace().map(str::to_owned).collect();
    if tokens.is_empty() {
        return Err(CliError::Usage("--sentence has no tokens".into()));
    }
    for s in a.subjects.iter().chain(&a.objects) {
        if s.end > tokens.len() {
            return Err(CliError::Usage(format!(
                "span {}:{} lies outside the {}-token sentence",
                s.start,
                s.end,
                tokens.len()
            )));
        }
    }
    let (ckpt, store) = load_model(&a.checkpoint, &a.embeddings)?;
    let example = LabeledExample {
        tokens,
        subjects: a.subjects.clone(),
        objects: a.objects.clone(),
        labels: vec![false; ckpt.relations.len()],
    };
    let scores = ckpt.params.score(&example, &store).map_err(CliError::core("prediction"))?;
    let mut ranked: Vec<(&str, f64)> = ckpt.relations.iter().map(String::as_str).zip(scores).collect();
    ranked.sort_by(|x, y| y.1.total_cmp(&x.1).then_with(|| x.0.cmp(y.0)));
    let w = |out: &mut dyn Write| -> std::io::Result<()> {
        let predicted: Vec<_> = ranked.iter().filter(|(_, s)| *s >= a.threshold).collect();
        if predicted.is_empty() {
            writeln!(out, "{EMPTY_SET}")?;
        }
        for (name, score) in &predicted {
            writeln!(out, "{name}\t{score:.6}")?;
        }
        if a.all {
            writeln!(out, "# all scores")?;
            for (name, score) in &ranked {
                writeln!(out, "# {name}\t{score:.6}")?;
            }
        }
        Ok(())
    };
    w(out).map_err(io_out)
}

/// The seven label/prediction pairs of the reference loss table.
pub const LOSS_TABLE_ROWS: [(bool, f64); 7] =
    [(false, 1.0), (false, 0.1), (false, -0.1), (false, -1.0), (true, 1.0), (true, 0.0), (true, -1.0)];

pub fn cmd_losstable(a: &LossTableArgs, out: &mut dyn Write) -> Result<()> {
    if !(a.gamma > 0.0 && a.gamma.is_finite()) {
        return Err(CliError::Usage(format!("--gamma must be positive, got {}", a.gamma)));
    }
    let w = |out: &mut dyn Write| -> std::io::Result<()> {
        writeln!(out, "gamma {:e}", a.gamma)?;
        writeln!(out, "{:>2} {:>5} {:>12} {:>12}  note", "y", "p", "dice", "rc_dice")?;
        for (y, p) in LOSS_TABLE_ROWS {
            let dice = loss::dice_loss(y, p, a.gamma);
            let rc = loss::rc_dice_loss(y, p, a.gamma);
            let note = if !y && p < loss::THRESHOLD { "suppressed" } else { "" };
            writeln!(out, "{:>2} {:>5} {:>12.4e} {:>12.4e}  {note}", u8::from(y), p, dice, rc)?;
        }
        Ok(())
    };
    w(out).map_err(io_out)
}

fn describe(label: &str, r: &GradcheckReport) -> String {
    let at = r.worst_at.map(|(t, i)| format!(" at {t}[{i}]")).unwrap_or_default();
    format!(
        "{label}: {} components, worst relative error {:.3e}{at}, worst absolute error {:.3e}",
        r.checked, r.worst_rel_error, r.worst_abs_error
    )
}

pub fn cmd_gradcheck(a: &GradcheckArgs, out: &mut dyn Write) -> Result<()> {
    let shape = Shape {
        embed_dim: a.embed_dim,
        hidden: a.hidden,
        seq_len: a.seq_len,
        relations: a.relations,
        pool: a.pool,
        stride: a.stride,
        head: Head::Linear,
    };
    shape.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let network = gradcheck::check_network(a.seed, shape, a.corrupt).map_err(CliError::core("gradient check"))?;
    let losses = gradcheck::check_losses(a.seed, a.points, DEFAULT_GAMMA);
    let mut overall = network;
    overall.merge(&losses);
    let passed = overall.passed();
    let w = |out: &mut dyn Write| -> std::io::Result<()> {
        writeln!(out, "{}", describe("network", &network))?;
        writeln!(out, "{}", describe("losses", &losses))?;
        writeln!(out, "worst relative error {:e}", overall.worst_rel_error)?;
        writeln!(out, "{} (tolerance {:e})", if passed { "PASS" } else { "FAIL" }, gradcheck::REL_TOLERANCE)
    };
    w(out).map_err(io_out)?;
    if passed {
        Ok(())
    } else {
        Err(CliError::Numerical(format!(
            "gradient check failed: worst relative error {:e} exceeds {:e}",
            overall.worst_rel_error,
            gradcheck::REL_TOLERANCE
        )))
    }
}

pub fn cmd_plot(a: &PlotArgs, out: &mut dyn Write) -> Result<()> {
    let file = File::open(&a.log).map_err(CliError::io(&a.log))?;
    let records = read_metrics(BufReader::new(file)).map_err(CliError::core(a.log.display().to_string()))?;
    let points: Vec<(usize, f64)> = records.iter().filter(|r| r.run == a.run).map(|r| (r.epoch, r.val_f1)).collect();
    if points.is_empty() {
        return Err(CliError::Usage(format!("{} has no epochs for run {}", a.log.display(), a.run)));
    }
    let chart = render_f1_curve(&points, a.height);
    match &a.out {
        Some(path) => fs::write(path, chart).map_err(CliError::io(path)),
        None => out.write_all(chart.as_bytes()).map_err(io_out),
    }
}
