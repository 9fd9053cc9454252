//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 when a command fails, 2 on usage errors.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::data::{
    build_label_space, category_distribution, cooccurrence, distribution_csv, load_threads,
    read_distribution_csv, Field, LabelSpace, Split, ThreadSet,
};
use crate::ensemble::{
    average_runs, default_grid, grid_search, majority_baseline, power_weighted_sum, top_k,
    EnsembleConfig, RunManifest,
};
use crate::error::{read_to_string, write_file, Error, Result};
use crate::metrics::{mean_recall_at_6, read_submission, write_submission, K};
use crate::model::{predict_scores, train, Family, FeatureConfig, ModelParams, TrainConfig};
use crate::normalize::{normalize, NormalizationReport, RulePaths, RuleSet};
use crate::scores::PredictionMatrix;
use crate::subword::{
    coverage, coverage_by_step, coverage_csv, oov_csv, oov_report, CoverageRow, SubwordVocab,
};

/// Environment variable naming the pipeline config when `--config` is absent.
pub const CONFIG_ENV: &str = "EMOGIF_CONFIG";

#[derive(Debug, Parser)]
#[command(
    name = "emogif",
    version,
    about = "Reaction-GIF category prediction for tweet threads"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Normalize text and reply of every thread.
    Preprocess(PreprocessArgs),
    /// Subword-vocabulary coverage and out-of-vocabulary words.
    Coverage(CoverageArgs),
    /// Label space, category distribution and co-occurrence of a labeled set.
    Stats(StatsArgs),
    /// Train one classifier run.
    Train(TrainArgs),
    /// Score a thread file with a trained model.
    Predict(PredictArgs),
    /// Average runs, fuse families and pick the top 6 categories.
    Ensemble(EnsembleArgs),
    /// Mean recall at 6 of a submission.
    Evaluate(EvaluateArgs),
    /// Preprocess, train every family run, ensemble and evaluate.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Args)]
struct RuleArgs {
    #[arg(long, value_name = "TSV")]
    punctuation_rules: Option<PathBuf>,
    #[arg(long, value_name = "TSV")]
    contraction_rules: Option<PathBuf>,
    #[arg(long, value_name = "TSV")]
    symbol_rules: Option<PathBuf>,
    #[arg(long, value_name = "TSV")]
    emoji_rules: Option<PathBuf>,
    #[arg(long, value_name = "TSV")]
    slang_rules: Option<PathBuf>,
}

impl RuleArgs {
    fn load(&self) -> Result<RuleSet> {
        RuleSet::load(&RulePaths {
            punctuation: self.punctuation_rules.clone(),
            contractions: self.contraction_rules.clone(),
            symbols: self.symbol_rules.clone(),
            emoji: self.emoji_rules.clone(),
            slang: self.slang_rules.clone(),
        })
    }
}

/// Vocabulary JSON plus merges file; the bundled mini vocabulary otherwise.
#[derive(Debug, Args)]
struct VocabArgs {
    #[arg(long, requires = "merges", value_name = "JSON")]
    vocab: Option<PathBuf>,
    #[arg(long, requires = "vocab", value_name = "TXT")]
    merges: Option<PathBuf>,
}

impl VocabArgs {
    fn load(&self) -> Result<SubwordVocab> {
        load_vocab(self.vocab.as_deref(), self.merges.as_deref())
    }
}

fn load_vocab(vocab: Option<&Path>, merges: Option<&Path>) -> Result<SubwordVocab> {
    match (vocab, merges) {
        (Some(v), Some(m)) => SubwordVocab::load(v, m),
        _ => Ok(SubwordVocab::bundled_mini()),
    }
}

#[derive(Debug, Args)]
struct PreprocessArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "train")]
    split: Split,
    /// Normalized threads, JSON lines.
    #[arg(long)]
    output: PathBuf,
    /// Per-step replacement counts, JSON.
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    rules: RuleArgs,
}

#[derive(Debug, Args)]
struct CoverageArgs {
    /// Thread files; may be repeated.
    #[arg(long = "input", required = true)]
    inputs: Vec<PathBuf>,
    /// Split name per input, in order (default: train for all).
    #[arg(long = "split")]
    splits: Vec<Split>,
    /// Field to count; both when omitted.
    #[arg(long)]
    field: Option<Field>,
    #[command(flatten)]
    vocab: VocabArgs,
    /// Also report coverage after each normalization step prefix.
    #[arg(long)]
    by_step: bool,
    #[command(flatten)]
    rules: RuleArgs,
    /// Coverage CSV (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    oov_out: Option<PathBuf>,
    #[arg(long, default_value_t = 50)]
    top_n: usize,
}

#[derive(Debug, Args)]
struct StatsArgs {
    /// Labeled training threads.
    #[arg(long)]
    train: PathBuf,
    /// Receives labels.txt, distribution.csv and cooccurrence.csv.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long, default_value = "A")]
    family: Family,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Hash space size (power of two).
    #[arg(long)]
    dim: Option<usize>,
    /// Label-space sidecar; derived from the training set when omitted.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[command(flatten)]
    vocab: VocabArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    input: PathBuf,
    /// Label-space sidecar to check against the model.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[command(flatten)]
    vocab: VocabArgs,
    /// Scores CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EnsembleArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    power: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    weights: Option<Vec<f64>>,
    /// Search power and weights on the --labels set.
    #[arg(long, requires = "labels", conflicts_with_all = ["power", "weights"])]
    grid: bool,
    /// Labeled validation threads.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Submission, JSON lines.
    #[arg(long)]
    out: PathBuf,
    /// Fused scores CSV.
    #[arg(long)]
    scores_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gold: PathBuf,
    #[arg(long)]
    per_thread: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PipelineArgs {
    #[arg(long, env = CONFIG_ENV)]
    config: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config's output directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

/// Parses `argv` (program name first) and runs the command.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(argv, &mut std::io::stdout(), &mut std::io::stderr())
}

pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            let code = e.exit_code();
            let _ = if code == 0 {
                write!(out, "{text}")
            } else {
                write!(err, "{text}")
            };
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Preprocess(a) => preprocess(a, out),
        Command::Coverage(a) => coverage_cmd(a, out),
        Command::Stats(a) => stats(a, out),
        Command::Train(a) => train_cmd(a, out),
        Command::Predict(a) => predict(a, out),
        Command::Ensemble(a) => ensemble(a, out),
        Command::Evaluate(a) => evaluate(a, out),
        Command::Pipeline(a) => pipeline(a, out),
    }
}

fn emit(out: &mut dyn Write, text: impl std::fmt::Display) -> Result<()> {
    writeln!(out, "{text}").map_err(|e| Error::io("<stdout>", e))
}

fn normalize_set(ts: &ThreadSet, rules: &RuleSet) -> (ThreadSet, NormalizationReport) {
    let mut report = NormalizationReport::default();
    let normalized = ts.map_fields(|s| {
        let (n, r) = normalize(s, rules);
        report += r;
        n
    });
    (normalized, report)
}

fn preprocess(a: PreprocessArgs, out: &mut dyn Write) -> Result<()> {
    let rules = a.rules.load()?;
    let ts = load_threads(&a.input, a.split, false)?;
    let (normalized, report) = normalize_set(&ts, &rules);
    normalized.write_jsonl(&a.output)?;
    let json = serde_json::to_string_pretty(&report.to_json())?;
    if let Some(p) = &a.report {
        write_file(p, format!("{json}\n"))?;
    }
    emit(
        out,
        format_args!("normalized {} threads -> {}", ts.len(), a.output.display()),
    )
}

fn coverage_cmd(a: CoverageArgs, out: &mut dyn Write) -> Result<()> {
    if !a.splits.is_empty() && a.splits.len() != a.inputs.len() {
        return Err(Error::Config("give one --split per --input or none".into()));
    }
    let vocab = a.vocab.load()?;
    let sets = a
        .inputs
        .iter()
        .enumerate()
        .map(|(i, p)| load_threads(p, a.splits.get(i).copied().unwrap_or(Split::Train), false))
        .collect::<Result<Vec<_>>>()?;
    let fields: Vec<Field> = a.field.map_or(Field::ALL.to_vec(), |f| vec![f]);
    let mut rows: Vec<CoverageRow> = if a.by_step {
        let rules = a.rules.load()?;
        let refs: Vec<&ThreadSet> = sets.iter().collect();
        coverage_by_step(&refs, &vocab, &rules)
            .into_iter()
            .filter(|r| fields.contains(&r.stat.field))
            .collect()
    } else {
        let mut rows = Vec::new();
        for ts in &sets {
            for &f in &fields {
                rows.push(CoverageRow {
                    steps: 0,
                    stat: coverage(ts, f, &vocab),
                });
            }
        }
        rows
    };
    rows.sort_by_key(|r| r.steps);
    let csv = coverage_csv(&rows)?;
    match &a.out {
        Some(p) => write_file(p, &csv)?,
        None => write!(out, "{csv}").map_err(|e| Error::io("<stdout>", e))?,
    }
    if let Some(p) = &a.oov_out {
        let mut oov = Vec::new();
        for ts in &sets {
            for &f in &fields {
                oov.extend(oov_report(ts, f, &vocab, usize::MAX));
            }
        }
        write_file(p, oov_csv(&merge_oov(oov, a.top_n))?)?;
    }
    Ok(())
}

fn merge_oov(
    entries: Vec<crate::subword::OovEntry>,
    top_n: usize,
) -> Vec<crate::subword::OovEntry> {
    let mut counts: std::collections::BTreeMap<String, u64> = std::collections::BTreeMap::new();
    for e in entries {
        *counts.entry(e.word).or_default() += e.count;
    }
    let mut merged: Vec<_> = counts
        .into_iter()
        .map(|(word, count)| crate::subword::OovEntry { word, count })
        .collect();
    merged.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.word.cmp(&b.word)));
    merged.truncate(top_n);
    merged
}

fn stats(a: StatsArgs, out: &mut dyn Write) -> Result<()> {
    let ts = load_threads(&a.train, Split::Train, true)?;
    let labels = build_label_space(&ts)?;
    let dist = category_distribution(&ts, &labels)?;
    labels.write_sidecar(&a.out_dir.join("labels.txt"))?;
    write_file(
        &a.out_dir.join("distribution.csv"),
        distribution_csv(&dist, &labels)?,
    )?;
    write_file(
        &a.out_dir.join("cooccurrence.csv"),
        cooccurrence(&ts, &labels)?.to_csv(&labels)?,
    )?;
    emit(
        out,
        format_args!(
            "{} threads, {} categories, {} labels",
            ts.len(),
            labels.len(),
            dist.iter().sum::<u64>()
        ),
    )
}

fn labels_for(train: &ThreadSet, sidecar: Option<&Path>) -> Result<LabelSpace> {
    let labels = match sidecar {
        Some(p) => LabelSpace::read_sidecar(p)?,
        None => build_label_space(train)?,
    };
    train.validate_against(&labels)?;
    Ok(labels)
}

fn train_cmd(a: TrainArgs, out: &mut dyn Write) -> Result<()> {
    let ts = load_threads(&a.train, Split::Train, true)?;
    let labels = labels_for(&ts, a.labels.as_deref())?;
    let vocab = a.vocab.load()?;
    let mut fc = FeatureConfig::for_family(a.family);
    if let Some(d) = a.dim {
        fc = fc.with_dim(d);
    }
    let mut tc = TrainConfig {
        seed: a.seed,
        ..TrainConfig::default()
    };
    if let Some(e) = a.epochs {
        tc.epochs = e;
    }
    if let Some(lr) = a.lr {
        tc.learning_rate = lr;
    }
    if let Some(b) = a.batch_size {
        tc.batch_size = b;
    }
    let model = train(&ts, &labels, &vocab, &fc, &tc)?;
    model.save(&a.out)?;
    emit(
        out,
        format_args!("family {} seed {} -> {}", a.family, a.seed, a.out.display()),
    )
}

fn predict(a: PredictArgs, out: &mut dyn Write) -> Result<()> {
    let model = ModelParams::load(&a.model)?;
    let labels = match &a.labels {
        Some(p) => LabelSpace::read_sidecar(p)?,
        None => LabelSpace::new(model.categories().to_vec())?,
    };
    let ts = load_threads(&a.input, Split::Test, false)?;
    let vocab = a.vocab.load()?;
    let scores = predict_scores(&model, &ts, &vocab, &labels)?;
    scores.write_csv(&a.out)?;
    emit(
        out,
        format_args!("scored {} threads -> {}", ts.len(), a.out.display()),
    )
}

fn ensemble(a: EnsembleArgs, out: &mut dyn Write) -> Result<()> {
    let manifest = RunManifest::load(&a.manifest)?;
    let means = manifest.family_means()?;
    let labels = LabelSpace::new(means[0].categories().to_vec())?;
    let prior = match &manifest.tie_prior {
        Some(p) => read_distribution_csv(p, &labels)?,
        None => vec![0; labels.len()],
    };
    let cfg = if a.grid {
        let gold = load_threads(
            a.labels.as_deref().expect("clap enforces --labels"),
            Split::Dev,
            true,
        )?;
        let result = grid_search(&means, &gold, &default_grid(means.len()), K, &prior)?;
        emit(
            out,
            format_args!(
                "grid best: power {} weights {:?} MR@6 {:.4}",
                result.best.power, result.best.weights, result.best_score
            ),
        )?;
        result.best
    } else {
        let weights = a
            .weights
            .or_else(|| manifest.weights())
            .unwrap_or_else(|| default_weights(means.len()));
        let power = a
            .power
            .or(manifest.power)
            .unwrap_or(EnsembleConfig::reported().power);
        EnsembleConfig::new(power, weights)?
    };
    let fused = power_weighted_sum(&means, &cfg)?;
    if let Some(p) = &a.scores_out {
        fused.write_csv(p)?;
    }
    let preds = top_k(&fused, K, &prior)?;
    write_submission(&a.out, &preds)?;
    if let Some(p) = a.labels.as_deref().filter(|_| !a.grid) {
        let gold = load_threads(p, Split::Dev, true)?;
        emit(
            out,
            format_args!("MR@6 {:.4}", mean_recall_at_6(&preds, &gold)?.mean),
        )?;
    }
    emit(
        out,
        format_args!("wrote {} predictions -> {}", preds.len(), a.out.display()),
    )
}

fn default_weights(families: usize) -> Vec<f64> {
    if families == 3 {
        EnsembleConfig::reported().weights
    } else {
        vec![1.0; families]
    }
}

fn evaluate(a: EvaluateArgs, out: &mut dyn Write) -> Result<()> {
    let preds = read_submission(&a.pred)?;
    let gold = load_threads(&a.gold, Split::Dev, true)?;
    let result = mean_recall_at_6(&preds, &gold)?;
    if let Some(p) = &a.per_thread {
        write_file(p, result.per_thread_csv()?)?;
    }
    emit(out, format_args!("{:.4}", result.mean))
}

/// Input files of a pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataPaths {
    pub train: PathBuf,
    pub dev: PathBuf,
    #[serde(default)]
    pub test: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VocabPaths {
    pub vocab: PathBuf,
    pub merges: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    pub family: Family,
    pub runs: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleSection {
    pub power: Option<f64>,
    pub weights: Option<Vec<f64>>,
    /// Search on the dev set instead of using power/weights.
    pub grid: bool,
}

/// TOML configuration of `pipeline`. Relative paths resolve against the
/// config file's directory.
///
/// ```toml
/// seed = 7
/// out_dir = "run"
/// dim = 4096
///
/// [data]
/// train = "train.jsonl"
/// dev = "dev.jsonl"
///
/// [train]
/// epochs = 4
///
/// [[families]]
/// family = "A"
/// runs = 5
///
/// [ensemble]
/// power = 1.8
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    pub data: DataPaths,
    #[serde(default)]
    pub rules: RulePaths,
    #[serde(default)]
    pub vocab: Option<VocabPaths>,
    /// Hash space size for every family.
    #[serde(default)]
    pub dim: Option<usize>,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default = "default_families")]
    pub families: Vec<FamilySpec>,
    #[serde(default)]
    pub ensemble: EnsembleSection,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("pipeline_out")
}

fn default_families() -> Vec<FamilySpec> {
    Family::ALL
        .iter()
        .map(|&family| FamilySpec { family, runs: 5 })
        .collect()
}

impl PipelineConfig {
    pub fn parse(content: &str, base: &Path) -> Result<Self> {
        let mut cfg: PipelineConfig =
            toml::from_str(content).map_err(|e| Error::Config(e.to_string()))?;
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut cfg.out_dir);
        resolve(&mut cfg.data.train);
        resolve(&mut cfg.data.dev);
        if let Some(t) = cfg.data.test.as_mut() {
            resolve(t);
        }
        for p in [
            &mut cfg.rules.punctuation,
            &mut cfg.rules.contractions,
            &mut cfg.rules.symbols,
            &mut cfg.rules.emoji,
            &mut cfg.rules.slang,
        ]
        .into_iter()
        .flatten()
        {
            resolve(p);
        }
        if let Some(v) = cfg.vocab.as_mut() {
            resolve(&mut v.vocab);
            resolve(&mut v.merges);
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        PipelineConfig::parse(
            &read_to_string(path)?,
            path.parent().unwrap_or(Path::new("")),
        )
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Checks settings and that every input file exists.
    pub fn validate(&self) -> Result<()> {
        if self.families.is_empty() || self.families.iter().any(|f| f.runs == 0) {
            return Err(Error::Config("every family needs at least one run".into()));
        }
        let mut inputs = vec![&self.data.train, &self.data.dev];
        inputs.extend(self.data.test.as_ref());
        inputs.extend(
            [
                &self.rules.punctuation,
                &self.rules.contractions,
                &self.rules.symbols,
                &self.rules.emoji,
                &self.rules.slang,
            ]
            .into_iter()
            .flatten(),
        );
        if let Some(v) = &self.vocab {
            inputs.push(&v.vocab);
            inputs.push(&v.merges);
        }
        if let Some(missing) = inputs.into_iter().find(|p| !p.is_file()) {
            return Err(Error::Config(format!(
                "input file {} not found",
                missing.display()
            )));
        }
        self.train.validate()?;
        Ok(())
    }
}

/// What `pipeline` reports in `metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineSummary {
    pub seed: u64,
    /// Dev MR@6 of every run, per family.
    pub run_scores: Vec<(Family, Vec<f64>)>,
    /// Dev MR@6 of each family's averaged runs.
    pub family_scores: Vec<(Family, f64)>,
    pub ensemble: EnsembleConfig,
    pub ensemble_score: f64,
    pub majority_baseline: f64,
}

/// Runs the whole flow and writes everything under `cfg.out_dir`:
/// normalized splits, `labels.txt`, models, per-run and averaged score
/// files, `submission_dev.jsonl` (and `submission_test.jsonl`) and
/// `metrics.json`.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineSummary> {
    cfg.validate()?;
    let dir = &cfg.out_dir;
    let rules = RuleSet::load(&cfg.rules)?;
    let vocab = load_vocab(
        cfg.vocab.as_ref().map(|v| v.vocab.as_path()),
        cfg.vocab.as_ref().map(|v| v.merges.as_path()),
    )?;

    let mut report = NormalizationReport::default();
    let mut prep = |path: &Path, split: Split, labeled: bool| -> Result<ThreadSet> {
        let (ts, r) = normalize_set(&load_threads(path, split, labeled)?, &rules);
        report += r;
        ts.write_jsonl(&dir.join("normalized").join(format!("{split}.jsonl")))?;
        Ok(ts)
    };
    let train_set = prep(&cfg.data.train, Split::Train, true)?;
    let dev = prep(&cfg.data.dev, Split::Dev, true)?;
    let test = cfg
        .data
        .test
        .as_deref()
        .map(|p| prep(p, Split::Test, false))
        .transpose()?;
    write_file(
        &dir.join("normalization_report.json"),
        format!("{}\n", serde_json::to_string_pretty(&report.to_json())?),
    )?;

    // Dev categories unseen in training stay in the gold sets; they simply
    // cannot be predicted.
    let labels = build_label_space(&train_set)?;
    labels.write_sidecar(&dir.join("labels.txt"))?;
    let prior = category_distribution(&train_set, &labels)?;
    write_file(
        &dir.join("distribution.csv"),
        distribution_csv(&prior, &labels)?,
    )?;

    let mut run_scores = Vec::new();
    let mut family_scores = Vec::new();
    let mut dev_means = Vec::new();
    let mut test_means = Vec::new();
    for spec in &cfg.families {
        let mut fc = FeatureConfig::for_family(spec.family);
        if let Some(d) = cfg.dim {
            fc = fc.with_dim(d);
        }
        let mut dev_runs = Vec::new();
        let mut test_runs = Vec::new();
        let mut scores = Vec::new();
        for r in 0..spec.runs {
            let tc = TrainConfig {
                seed: cfg.seed + r as u64,
                ..cfg.train.clone()
            };
            let model = train(&train_set, &labels, &vocab, &fc, &tc)?;
            let tag = format!("{}_{r}", spec.family);
            model.save(&dir.join("models").join(format!("{tag}.bin")))?;
            let dev_scores = predict_scores(&model, &dev, &vocab, &labels)?;
            dev_scores.write_csv(&dir.join("scores").join(format!("dev_{tag}.csv")))?;
            scores.push(mean_recall_at_6(&top_k(&dev_scores, K, &prior)?, &dev)?.mean);
            dev_runs.push(dev_scores);
            if let Some(t) = &test {
                let s = predict_scores(&model, t, &vocab, &labels)?;
                s.write_csv(&dir.join("scores").join(format!("test_{tag}.csv")))?;
                test_runs.push(s);
            }
        }
        let mean = average_runs(&dev_runs)?;
        mean.write_csv(
            &dir.join("scores")
                .join(format!("dev_{}_mean.csv", spec.family)),
        )?;
        family_scores.push((
            spec.family,
            mean_recall_at_6(&top_k(&mean, K, &prior)?, &dev)?.mean,
        ));
        run_scores.push((spec.family, scores));
        dev_means.push(mean);
        if test.is_some() {
            test_means.push(average_runs(&test_runs)?);
        }
    }

    let ensemble_cfg = if cfg.ensemble.grid {
        grid_search(&dev_means, &dev, &default_grid(dev_means.len()), K, &prior)?.best
    } else {
        EnsembleConfig::new(
            cfg.ensemble
                .power
                .unwrap_or(EnsembleConfig::reported().power),
            cfg.ensemble
                .weights
                .clone()
                .unwrap_or_else(|| default_weights(dev_means.len())),
        )?
    };
    let finish =
        |means: &[PredictionMatrix], name: &str| -> Result<Vec<crate::metrics::Prediction>> {
            let fused = power_weighted_sum(means, &ensemble_cfg)?;
            fused.write_csv(&dir.join("scores").join(format!("{name}_fused.csv")))?;
            let preds = top_k(&fused, K, &prior)?;
            write_submission(&dir.join(format!("submission_{name}.jsonl")), &preds)?;
            Ok(preds)
        };
    let dev_preds = finish(&dev_means, "dev")?;
    if test.is_some() {
        finish(&test_means, "test")?;
    }
    let baseline = majority_baseline(&dev.idx_list(), labels.names(), &prior, K)?;
    let summary = PipelineSummary {
        seed: cfg.seed,
        run_scores,
        family_scores,
        ensemble: ensemble_cfg,
        ensemble_score: mean_recall_at_6(&dev_preds, &dev)?.mean,
        majority_baseline: mean_recall_at_6(&baseline, &dev)?.mean,
    };
    write_file(
        &dir.join("metrics.json"),
        format!("{}\n", serde_json::to_string_pretty(&summary)?),
    )?;
    Ok(summary)
}

fn pipeline(a: PipelineArgs, out: &mut dyn Write) -> Result<()> {
    let mut cfg = PipelineConfig::load(&a.config)?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(d) = a.out_dir {
        cfg.out_dir = d;
    }
    let s = run_pipeline(&cfg)?;
    for (f, score) in &s.family_scores {
        emit(out, format_args!("family {f}: {score:.4}"))?;
    }
    emit(
        out,
        format_args!(
            "ensemble (power {}, weights {:?}): {:.4}",
            s.ensemble.power, s.ensemble.weights, s.ensemble_score
        ),
    )?;
    emit(
        out,
        format_args!("majority baseline: {:.4}", s.majority_baseline),
    )
}
