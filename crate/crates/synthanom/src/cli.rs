//! Command-line surface. Every command accepts `--config FILE`: a JSON
//! object whose keys are the flag names in snake_case. Flags given on the
//! command line override the file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use synthanom_core::activation::ActivationSpec;
use synthanom_core::data::{ClassTag, ColumnKind, ColumnStats, Dataset, Normalizer, RawDataset, Schema};
use synthanom_core::loss::LossKind;
use synthanom_core::metrics::quadrature::Quadrature;
use synthanom_core::metrics::{
    default_probe_thresholds, noise_exponent_probe, per_subtype_aupr, pr_curve, PrPoint, SubtypeScore,
};
use synthanom_core::plan::architecture_plan;
use synthanom_core::problem::{example1_problem, example2_problem, NoiseCondition};
use synthanom_core::sampler::{sample_for, CountPolicy, SyntheticConfig};
use synthanom_core::theory::{
    fit_pipeline, scenario_figure2, score_rows, summarize_ablation, three_cluster_scenario,
    AblationCell, AblationRow, AblationSpec, BoundModelKind, BoundSuiteConfig, ClusterSizes, DiscontinuityConfig,
    ExperimentGrid, Figure2Case, PipelineConfig, Scenario,
};
use synthanom_core::rng::derive_seed;
use synthanom_core::train::{ModelConfig, TrainConfig, WeightPreset};
use synthanom_core::Error;

use crate::error::{AppError, AppResult};
use crate::io::{
    load_dataset, load_schema, read_json, schema_label, write_history_csv, write_json, write_pr_curves_csv,
    write_raw_csv, write_rows_csv, Checkpoint, EvaluationReport, LoadOptions, TagSource,
};
use crate::manifest::{Manifest, RunConfig};
use crate::runner;

/// Environment variable naming the default output root.
pub const OUTPUT_ROOT_ENV: &str = "SYNTHANOM_OUTPUT_ROOT";
const DEFAULT_OUTPUT_ROOT: &str = "runs";

#[derive(Debug, Parser)]
#[command(name = "synthanom", version, about = "Anomaly detection by classification against synthetic anomalies")]
pub struct Cli {
    /// Worker threads for experiment cells (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a classifier on normal rows, known anomalies and synthetic anomalies.
    Train(WithConfig<TrainArgs>),
    /// Score a labelled test set with a checkpoint; per-subtype AUPR.
    Evaluate(WithConfig<EvaluateArgs>),
    /// Export synthetic anomalies for a schema.
    Sample(WithConfig<SampleArgs>),
    /// Numerical experiments on problems with known ground truth.
    #[command(subcommand)]
    Theory(TheoryCommand),
}

#[derive(Debug, Subcommand)]
pub enum TheoryCommand {
    /// Check the approx-sign excess-risk bound on random and trained networks.
    VerifyBound(WithConfig<VerifyBoundArgs>),
    /// Excess risk and set error against sample size.
    Convergence(WithConfig<ConvergenceArgs>),
    /// Sup error of continuous fits with and without a zero margin.
    Discontinuity(WithConfig<DiscontinuityArgs>),
    /// Width × depth × synthetic-count grid.
    Ablate(WithConfig<AblateArgs>),
    /// Estimate the noise exponent of a scenario.
    ProbeNoise(WithConfig<ProbeNoiseArgs>),
    /// Depth, width and sparsity of the rate-optimal architecture.
    PlanArchitecture(WithConfig<PlanArgs>),
}

#[derive(Debug, Args)]
pub struct WithConfig<T: Args> {
    /// JSON file with default values for any flag (snake_case keys).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub args: T,
}

impl<T: Args + Serialize + DeserializeOwned> WithConfig<T> {
    /// Flags override the config file.
    pub fn resolve(self) -> AppResult<T> {
        let Some(path) = self.config else { return Ok(self.args) };
        let base: serde_json::Value = read_json(&path)?;
        let serde_json::Value::Object(mut base) = base else {
            return Err(AppError::usage(format!("{}: config must be a JSON object", path.display())));
        };
        if let serde_json::Value::Object(flags) = serde_json::to_value(&self.args)? {
            for (k, v) in flags {
                if !v.is_null() {
                    base.insert(k, v);
                }
            }
        }
        serde_json::from_value(serde_json::Value::Object(base))
            .map_err(|e| AppError::usage(format!("{}: {e}", path.display())))
    }
}

fn output_dir(out: Option<PathBuf>, name: &str) -> PathBuf {
    out.unwrap_or_else(|| {
        let root = std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from).unwrap_or_else(|| DEFAULT_OUTPUT_ROOT.into());
        root.join(name)
    })
}

fn print_json<T: Serialize>(value: &T) -> AppResult<()> {
    println!("{}", serde_json::to_string(value)?);
    Ok(())
}

// ---------------------------------------------------------------------------
// Value parsers shared by flags and config files

/// `match-real`, `multiplier=X` or `absolute=N`.
pub fn parse_count_policy(s: &str) -> Result<CountPolicy, String> {
    let s = s.trim();
    if s == "match-real" {
        return Ok(CountPolicy::MatchReal);
    }
    match s.split_once('=') {
        Some(("multiplier", v)) => v.parse().map(CountPolicy::Multiplier).map_err(|_| format!("bad multiplier `{v}`")),
        Some(("absolute", v)) => v.parse().map(CountPolicy::Absolute).map_err(|_| format!("bad count `{v}`")),
        _ => Err(format!("unknown count policy `{s}` (match-real, multiplier=X, absolute=N)")),
    }
}

/// `relu`, `leaky-relu[=SLOPE]` or `relu-k=K`.
pub fn parse_activation(s: &str) -> Result<ActivationSpec, String> {
    let spec = match s.split_once('=') {
        None if s == "relu" => ActivationSpec::Relu,
        None if s == "leaky-relu" => ActivationSpec::default(),
        Some(("leaky-relu", v)) => ActivationSpec::LeakyRelu { slope: v.parse().map_err(|_| format!("bad slope `{v}`"))? },
        Some(("relu-k", v)) => ActivationSpec::ReluK { k: v.parse().map_err(|_| format!("bad k `{v}`"))? },
        _ => return Err(format!("unknown activation `{s}` (relu, leaky-relu[=SLOPE], relu-k=K)")),
    };
    spec.validate().map_err(|e| e.to_string())?;
    Ok(spec)
}

/// `balanced`, `unweighted-union` or `explicit=S,S_TILDE`.
pub fn parse_weighting(s: &str) -> Result<WeightPreset, String> {
    match s.split_once('=') {
        None if s == "balanced" => Ok(WeightPreset::Balanced),
        None if s == "unweighted-union" => Ok(WeightPreset::UnweightedUnion),
        Some(("explicit", v)) => {
            let (a, b) = v.split_once(',').ok_or_else(|| format!("expected explicit=S,S_TILDE, got `{s}`"))?;
            let s: f64 = a.trim().parse().map_err(|_| format!("bad s `{a}`"))?;
            let s_tilde: f64 = b.trim().parse().map_err(|_| format!("bad s_tilde `{b}`"))?;
            Ok(WeightPreset::Explicit { s, s_tilde })
        }
        _ => Err(format!("unknown weighting `{s}` (balanced, unweighted-union, explicit=S,S_TILDE)")),
    }
}

fn usage<T>(r: Result<T, String>) -> AppResult<T> {
    r.map_err(AppError::Usage)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum LossArg {
    Hinge,
    Logistic,
}

impl From<LossArg> for LossKind {
    fn from(l: LossArg) -> Self {
        match l {
            LossArg::Hinge => LossKind::Hinge,
            LossArg::Logistic => LossKind::Logistic,
        }
    }
}

/// Training flags shared by `train` and the ablation.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingFlags {
    #[arg(long, value_enum)]
    pub loss: Option<LossArg>,
    /// balanced | unweighted-union | explicit=S,S_TILDE
    #[arg(long)]
    pub weighting: Option<String>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub momentum: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    /// Hidden layer widths, e.g. `64,64`.
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
    /// relu | leaky-relu[=SLOPE] | relu-k=K
    #[arg(long)]
    pub activation: Option<String>,
}

impl TrainingFlags {
    /// Applies the flags on top of `base`.
    pub fn apply(&self, base: TrainConfig) -> AppResult<TrainConfig> {
        let mut cfg = base;
        if let Some(l) = self.loss {
            cfg.loss = l.into();
        }
        if let Some(w) = &self.weighting {
            cfg.weights = usage(parse_weighting(w))?;
        }
        cfg.learning_rate = self.learning_rate.unwrap_or(cfg.learning_rate);
        cfg.momentum = self.momentum.unwrap_or(cfg.momentum);
        cfg.weight_decay = self.weight_decay.unwrap_or(cfg.weight_decay);
        cfg.batch_size = self.batch_size.unwrap_or(cfg.batch_size);
        cfg.max_epochs = self.max_epochs.unwrap_or(cfg.max_epochs);
        cfg.patience = self.patience.unwrap_or(cfg.patience);
        let activation = self.activation.as_deref().map(parse_activation).transpose().map_err(AppError::Usage)?;
        if self.hidden.is_some() || activation.is_some() {
            let mut model = cfg.model.clone().unwrap_or(ModelConfig {
                hidden: vec![],
                activation: ActivationSpec::default(),
                output: Default::default(),
            });
            if let Some(h) = &self.hidden {
                model.hidden = h.clone();
            }
            if let Some(a) = activation {
                model.activation = a;
            }
            cfg.model = Some(model);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

// ---------------------------------------------------------------------------
// train

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainArgs {
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// CSV with a label column (normal and known-anomaly rows).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// CSV of normal rows only.
    #[arg(long)]
    pub normal: Option<PathBuf>,
    /// CSV of known-anomaly rows only.
    #[arg(long)]
    pub known_anom: Option<PathBuf>,
    /// match-real | multiplier=X | absolute=N
    #[arg(long)]
    pub synthetic: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub val_fraction: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub training: TrainingFlags,
}

#[derive(Debug, Serialize)]
struct TrainSummary {
    output_dir: PathBuf,
    final_val_risk: Option<f64>,
    best_epoch: usize,
    epochs: usize,
    stopped_early: bool,
    normal: usize,
    known_anomalies: usize,
    synthetic: usize,
    warnings: Vec<String>,
}

pub fn cmd_train(args: TrainArgs) -> AppResult<()> {
    let schema_path = args.schema.clone().ok_or_else(|| AppError::usage("--schema is required"))?;
    let schema = load_schema(&schema_path)?;
    let mut datasets = BTreeMap::new();
    let mut parts: Vec<RawDataset> = Vec::new();
    for (key, path, tags) in [
        ("data", &args.data, TagSource::LabelColumn),
        ("normal", &args.normal, TagSource::Fixed(ClassTag::Normal)),
        ("known_anom", &args.known_anom, TagSource::Fixed(ClassTag::KnownAnomaly)),
    ] {
        if let Some(p) = path {
            parts.push(load_dataset(p, &schema, LoadOptions::training(tags))?);
            datasets.insert(key.to_string(), p.clone());
        }
    }
    let mut parts = parts.into_iter();
    let mut raw = parts.next().ok_or_else(|| AppError::usage("give --data, or --normal and/or --known-anom"))?;
    for p in parts {
        raw = raw.concat(p)?;
    }
    if !raw.tags.contains(&ClassTag::Normal) {
        return Err(AppError::Core(Error::Schema("training data has no normal rows".into())));
    }

    let seed = args.seed.unwrap_or(0);
    let policy = usage(parse_count_policy(args.synthetic.as_deref().unwrap_or("match-real")))?;
    let train_cfg = args.training.apply(TrainConfig { seed, ..TrainConfig::default() })?;
    let pipeline = PipelineConfig {
        train: train_cfg.clone(),
        synthetic: SyntheticConfig { count_policy: policy, seed: derive_seed(seed, 0x5A) },
        val_fraction: args.val_fraction.unwrap_or(0.2),
        ..PipelineConfig::default()
    };
    let out = output_dir(args.out.clone(), "train");
    let mut run = RunConfig::new("train", out.clone(), seed);
    run.datasets = datasets;
    run.schema = Some(schema_path);
    run.train = Some(train_cfg);
    run.synthetic = Some(pipeline.synthetic);
    run.params = serde_json::json!({ "val_fraction": pipeline.val_fraction });
    let config_hash = run.hash()?;

    let outcome = match fit_pipeline(&raw, &pipeline) {
        Ok(o) => o,
        Err(Error::TrainingFailure { epoch, history }) => {
            write_history_csv(&out.join("history.csv"), &history)?;
            return Err(AppError::Core(Error::TrainingFailure { epoch, history }));
        }
        Err(e) => return Err(e.into()),
    };
    let checkpoint = Checkpoint::new(schema, outcome.normalizer.clone(), outcome.model, seed, config_hash)?;
    write_json(&out.join("checkpoint.json"), &checkpoint)?;
    write_json(&out.join("normalizer.json"), &outcome.normalizer)?;
    write_history_csv(&out.join("history.csv"), &outcome.history)?;
    Manifest::new(run)?.write(&["checkpoint.json", "normalizer.json", "history.csv"])?;

    let h = &outcome.history;
    print_json(&TrainSummary {
        output_dir: out,
        final_val_risk: h.epochs.get(h.best_epoch).and_then(|e| e.val_risk),
        best_epoch: h.best_epoch,
        epochs: h.epochs.len().saturating_sub(1),
        stopped_early: h.stopped_early,
        normal: raw.tags.iter().filter(|t| **t == ClassTag::Normal).count(),
        known_anomalies: raw.tags.iter().filter(|t| **t == ClassTag::KnownAnomaly).count(),
        synthetic: outcome.n_synthetic,
        warnings: outcome.warnings,
    })
}

// ---------------------------------------------------------------------------
// evaluate

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Labelled test CSV (subtype column optional).
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Scores, per-subtype AUPR and PR curves for `raw` under `checkpoint`.
pub fn evaluate_rows(
    checkpoint: &Checkpoint,
    raw: &RawDataset,
) -> AppResult<(Vec<f64>, Vec<SubtypeScore>, Vec<(String, Vec<PrPoint>)>, usize)> {
    let scores = score_rows(&checkpoint.model, &checkpoint.normalizer, raw)?;
    let encoded = checkpoint.normalizer.apply(raw)?;
    let ood = encoded.features.iter_rows().filter(|r| synthanom_core::data::ood_flag(&encoded.layout, r)).count();
    let anomalous: Vec<bool> = raw.tags.iter().map(|t| t.is_anomaly()).collect();
    let table = per_subtype_aupr(&scores, &anomalous, &raw.subtypes)?;
    let mut curves = Vec::new();
    for row in &table {
        let idx: Vec<usize> = (0..scores.len())
            .filter(|&i| !anomalous[i] || row.subtype == "all" || raw.subtypes[i].as_deref() == Some(row.subtype.as_str()))
            .collect();
        let s: Vec<f64> = idx.iter().map(|&i| scores[i]).collect();
        let l: Vec<bool> = idx.iter().map(|&i| anomalous[i]).collect();
        curves.push((row.subtype.clone(), pr_curve(&s, &l)?));
    }
    Ok((scores, table, curves, ood))
}

pub fn cmd_evaluate(args: EvaluateArgs) -> AppResult<()> {
    let ck_path = args.checkpoint.clone().ok_or_else(|| AppError::usage("--checkpoint is required"))?;
    let data_path = args.data.clone().ok_or_else(|| AppError::usage("--data is required"))?;
    let checkpoint = Checkpoint::load(&ck_path)?;
    let raw = load_dataset(&data_path, &checkpoint.schema, LoadOptions::test(TagSource::LabelColumn))?;
    let (scores, table, curves, ood) = evaluate_rows(&checkpoint, &raw)?;

    let out = output_dir(args.out.clone(), "evaluate");
    let mut run = RunConfig::new("evaluate", out.clone(), checkpoint.seed);
    run.datasets.insert("checkpoint".into(), ck_path.clone());
    run.datasets.insert("data".into(), data_path.clone());
    let report = EvaluationReport {
        checkpoint: ck_path.display().to_string(),
        test_data: data_path.display().to_string(),
        config_hash: run.hash()?,
        rows: raw.len(),
        out_of_domain: ood,
        subtypes: table,
    };
    write_json(&out.join("report.json"), &report)?;
    write_pr_curves_csv(&out.join("pr_curve.csv"), &curves)?;
    #[derive(Serialize)]
    struct ScoreRow {
        row: usize,
        tag: String,
        subtype: String,
        score: f64,
    }
    let rows: Vec<ScoreRow> = scores
        .iter()
        .enumerate()
        .map(|(i, &score)| ScoreRow {
            row: i + 1,
            tag: schema_label(&checkpoint.schema, raw.tags[i]),
            subtype: raw.subtypes[i].clone().unwrap_or_default(),
            score,
        })
        .collect();
    write_rows_csv(&out.join("scores.csv"), &rows)?;
    Manifest::new(run)?.write(&["report.json", "pr_curve.csv", "scores.csv"])?;
    print_json(&report)
}

// ---------------------------------------------------------------------------
// sample

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct SampleArgs {
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// match-real | multiplier=X | absolute=N
    #[arg(long)]
    pub count: Option<String>,
    /// Real normal count the policy refers to.
    #[arg(long)]
    pub n: Option<usize>,
    /// Real known-anomaly count the policy refers to.
    #[arg(long)]
    pub n_minus: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Fitted normalizer; rows are then written in raw units and the
    /// training vocabularies replace the schema's category lists.
    #[arg(long)]
    pub normalizer: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Normalizer that maps the schema's declared domain onto itself: numeric
/// columns on `[0, 1]`, categories as declared.
pub fn identity_normalizer(schema: &Schema) -> Normalizer {
    Normalizer {
        columns: schema
            .feature_columns()
            .map(|c| match c.kind {
                ColumnKind::Numeric => ColumnStats::Numeric { name: c.name.clone(), min: 0.0, max: 1.0, mean: 0.5 },
                ColumnKind::Categorical => ColumnStats::Categorical {
                    name: c.name.clone(),
                    vocabulary: c.categories.clone().unwrap_or_default(),
                },
            })
            .collect(),
    }
}

pub fn cmd_sample(args: SampleArgs) -> AppResult<()> {
    let schema_path = args.schema.clone().ok_or_else(|| AppError::usage("--schema is required"))?;
    let schema = load_schema(&schema_path)?;
    let normalizer = match &args.normalizer {
        Some(p) => read_json::<Normalizer>(p)?,
        None => identity_normalizer(&schema),
    };
    let seed = args.seed.unwrap_or(0);
    let config = SyntheticConfig {
        count_policy: usage(parse_count_policy(args.count.as_deref().unwrap_or("match-real")))?,
        seed,
    };
    let layout = normalizer.layout();
    let rows = sample_for(&layout, &config, args.n.unwrap_or(0), args.n_minus.unwrap_or(0))?;
    let count = rows.rows();
    let data = Dataset {
        features: rows,
        tags: vec![ClassTag::SyntheticAnomaly; count],
        subtypes: vec![None; count],
        layout,
        source: "synthetic".into(),
    };
    let raw = normalizer.invert(&data, &schema);

    let out = output_dir(args.out.clone(), "sample");
    write_raw_csv(&out.join("synthetic.csv"), &raw, |t| schema_label(&schema, t))?;
    let mut run = RunConfig::new("sample", out.clone(), seed);
    run.schema = Some(schema_path);
    run.synthetic = Some(config);
    if let Some(p) = &args.normalizer {
        run.datasets.insert("normalizer".into(), p.clone());
    }
    run.params = serde_json::json!({ "n": args.n.unwrap_or(0), "n_minus": args.n_minus.unwrap_or(0) });
    Manifest::new(run)?.write(&["synthetic.csv"])?;
    print_json(&serde_json::json!({ "rows": count, "file": out.join("synthetic.csv") }))
}

// ---------------------------------------------------------------------------
// theory

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioArg {
    Example1,
    Example2,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifyBoundArgs {
    #[arg(long, value_enum)]
    pub scenario: Option<ScenarioArg>,
    /// Number of random networks.
    #[arg(long)]
    pub runs: Option<usize>,
    /// Number of trained networks.
    #[arg(long)]
    pub trained: Option<usize>,
    #[arg(long)]
    pub s: Option<f64>,
    #[arg(long)]
    pub s_tilde: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub k: Option<u32>,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub c0: Option<f64>,
    /// Grid points for risk and sup norm.
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub slack: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn require_example1(s: Option<ScenarioArg>) -> AppResult<()> {
    match s.unwrap_or(ScenarioArg::Example1) {
        ScenarioArg::Example1 => Ok(()),
        other => Err(AppError::usage(format!("scenario {other:?} is not supported by this command"))),
    }
}

pub fn bound_suite_config(args: &VerifyBoundArgs) -> AppResult<BoundSuiteConfig> {
    require_example1(args.scenario)?;
    let d = BoundSuiteConfig::default();
    Ok(BoundSuiteConfig {
        s: args.s.unwrap_or(d.s),
        s_tilde: args.s_tilde.unwrap_or(d.s_tilde),
        tau: args.tau.unwrap_or(d.tau),
        k: args.k.unwrap_or(d.k),
        noise: NoiseCondition::new(args.q.unwrap_or(d.noise.q), args.c0.unwrap_or(d.noise.c0))?,
        random_models: args.runs.unwrap_or(d.random_models),
        trained_models: args.trained.unwrap_or(d.trained_models),
        grid: args.grid.unwrap_or(d.grid),
        slack: args.slack.unwrap_or(d.slack),
        seed: args.seed.unwrap_or(d.seed),
        ..d
    })
}

#[derive(Debug, Serialize)]
struct BoundRow {
    kind: BoundModelKind,
    index: usize,
    lhs: Option<f64>,
    rhs: Option<f64>,
    sup_error: Option<f64>,
    holds: Option<bool>,
    failure: Option<String>,
}

pub fn cmd_verify_bound(args: VerifyBoundArgs) -> AppResult<()> {
    let cfg = bound_suite_config(&args)?;
    let records = runner::run_bound_suite(&cfg)?;
    let out = output_dir(args.out.clone(), "verify-bound");
    let rows: Vec<BoundRow> = records
        .iter()
        .map(|r| BoundRow {
            kind: r.kind,
            index: r.index,
            lhs: r.check.map(|c| c.lhs),
            rhs: r.check.map(|c| c.rhs),
            sup_error: r.check.map(|c| c.sup_error),
            holds: r.check.map(|c| c.holds),
            failure: r.failure.clone(),
        })
        .collect();
    write_rows_csv(&out.join("bound.csv"), &rows)?;
    let mut run = RunConfig::new("theory verify-bound", out.clone(), cfg.seed);
    run.train = Some(cfg.train.clone());
    run.params = serde_json::to_value(&cfg)?;
    Manifest::new(run)?.write(&["bound.csv"])?;
    let holds = records.iter().filter(|r| r.check.is_some_and(|c| c.holds)).count();
    print_json(&serde_json::json!({ "holds": holds, "total": records.len(), "file": out.join("bound.csv") }))
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct ConvergenceArgs {
    #[arg(long, value_enum)]
    pub scenario: Option<ScenarioArg>,
    /// Dimension for example2.
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub s: Option<f64>,
    #[arg(long)]
    pub s_tilde: Option<f64>,
    /// Strictly increasing sample sizes, e.g. `100,400,1600,6400`.
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    /// Number of seeds (1..=N).
    #[arg(long)]
    pub seeds: Option<u64>,
    /// Level-set threshold for the set error.
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub synthetic_factor: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub training: TrainingFlags,
}

pub fn convergence_grid(args: &ConvergenceArgs) -> AppResult<ExperimentGrid> {
    let sizes = args.sizes.clone().unwrap_or_else(|| vec![100, 400, 1600, 6400]);
    let seeds: Vec<u64> = (1..=args.seeds.unwrap_or(5)).collect();
    let mut grid = ExperimentGrid::example1(sizes, seeds);
    let s = args.s.unwrap_or(0.5);
    let s_tilde = args.s_tilde.unwrap_or(0.5);
    grid.scenario = match args.scenario.unwrap_or(ScenarioArg::Example1) {
        ScenarioArg::Example1 => Scenario::Example1 { s, s_tilde },
        ScenarioArg::Example2 => Scenario::Example2 { d: args.d.unwrap_or(2), s, s_tilde },
    };
    if let Scenario::Example2 { d, .. } = grid.scenario {
        grid.train.model = Some(ModelConfig { hidden: vec![32, 32], ..ModelConfig::for_input(d) });
    }
    grid.rho = args.rho;
    grid.synthetic_factor = args.synthetic_factor.unwrap_or(grid.synthetic_factor);
    grid.train = args.training.apply(grid.train)?;
    grid.scenario.problem()?;
    grid.validate()?;
    Ok(grid)
}

pub fn cmd_convergence(args: ConvergenceArgs) -> AppResult<()> {
    let grid = convergence_grid(&args)?;
    let report = runner::run_convergence(&grid)?;
    let out = output_dir(args.out.clone(), "convergence");
    write_rows_csv(&out.join("medians.csv"), &report.rows)?;
    write_rows_csv(&out.join("runs.csv"), &report.runs)?;
    write_json(&out.join("report.json"), &report)?;
    let mut run = RunConfig::new("theory convergence", out.clone(), 0);
    run.train = Some(grid.train.clone());
    run.params = serde_json::to_value(&grid)?;
    Manifest::new(run)?.write(&["medians.csv", "runs.csv", "report.json"])?;
    let medians = std::fs::read_to_string(out.join("medians.csv")).map_err(|e| AppError::io(out.join("medians.csv"), e))?;
    print!("{medians}");
    Ok(())
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct DiscontinuityArgs {
    #[arg(long)]
    pub s: Option<f64>,
    /// Known-anomaly share of the continuous contrast problem.
    #[arg(long)]
    pub contrast_s_tilde: Option<f64>,
    /// Epoch budget of the contrast models.
    #[arg(long)]
    pub contrast_epochs: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seeds: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    pub resolutions: Option<Vec<usize>>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub training: TrainingFlags,
}

pub fn discontinuity_config(args: &DiscontinuityArgs) -> AppResult<DiscontinuityConfig> {
    let d = DiscontinuityConfig::default();
    let cfg = DiscontinuityConfig {
        s: args.s.unwrap_or(d.s),
        contrast_s_tilde: args.contrast_s_tilde.unwrap_or(d.contrast_s_tilde),
        contrast_epochs: args.contrast_epochs.unwrap_or(d.contrast_epochs),
        n: args.n.unwrap_or(d.n),
        seeds: args.seeds.map(|k| (1..=k).collect()).unwrap_or(d.seeds.clone()),
        resolutions: args.resolutions.clone().unwrap_or(d.resolutions.clone()),
        train: args.training.apply(d.train.clone())?,
        ..d
    };
    if !(cfg.contrast_s_tilde >= 0.0 && cfg.contrast_s_tilde < 1.0) {
        return Err(AppError::usage("--contrast-s-tilde must lie in [0, 1)"));
    }
    if cfg.contrast_epochs == 0 {
        return Err(AppError::usage("--contrast-epochs must be positive"));
    }
    example1_problem(cfg.s, cfg.contrast_s_tilde)?;
    Ok(cfg)
}

#[derive(Debug, Serialize)]
struct DiscontinuityRow {
    zero_margin: bool,
    s_tilde: f64,
    seed: u64,
    resolution: Option<usize>,
    sup_error: Option<f64>,
    jump_bound: Option<f64>,
    failure: Option<String>,
}

pub fn cmd_discontinuity(args: DiscontinuityArgs) -> AppResult<()> {
    let cfg = discontinuity_config(&args)?;
    let records = runner::run_discontinuity(&cfg)?;
    let out = output_dir(args.out.clone(), "discontinuity");
    let mut rows = Vec::new();
    for r in &records {
        if r.errors.is_empty() {
            rows.push(DiscontinuityRow {
                zero_margin: r.zero_margin,
                s_tilde: r.s_tilde,
                seed: r.seed,
                resolution: None,
                sup_error: None,
                jump_bound: None,
                failure: r.failure.clone(),
            });
        }
        for e in &r.errors {
            rows.push(DiscontinuityRow {
                zero_margin: r.zero_margin,
                s_tilde: r.s_tilde,
                seed: r.seed,
                resolution: Some(e.resolution),
                sup_error: Some(e.sup_error),
                jump_bound: Some(e.jump_bound),
                failure: None,
            });
        }
    }
    write_rows_csv(&out.join("discontinuity.csv"), &rows)?;
    let mut run = RunConfig::new("theory discontinuity", out.clone(), 0);
    run.train = Some(cfg.train.clone());
    run.params = serde_json::to_value(&cfg)?;
    Manifest::new(run)?.write(&["discontinuity.csv"])?;
    let finest = |zero: bool| -> Vec<f64> {
        records
            .iter()
            .filter(|r| r.zero_margin == zero)
            .filter_map(|r| r.errors.last().map(|e| e.sup_error))
            .collect()
    };
    print_json(&serde_json::json!({
        "zero_margin_sup_errors": finest(true),
        "continuous_sup_errors": finest(false),
        "file": out.join("discontinuity.csv"),
    }))
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct AblateArgs {
    /// Schema for --train/--test; without them the built-in three-cluster
    /// data set is used.
    #[arg(long)]
    pub schema: Option<PathBuf>,
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Seed of the built-in data set.
    #[arg(long)]
    pub data_seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    pub widths: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub depths: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub multipliers: Option<Vec<f64>>,
    /// Number of seeds (0..N).
    #[arg(long)]
    pub seeds: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub training: TrainingFlags,
}

pub fn ablation_spec(args: &AblateArgs) -> AppResult<AblationSpec> {
    let d = AblationSpec::desk_default();
    let mut base = d.base.clone();
    base.train = args.training.apply(base.train)?;
    let spec = AblationSpec {
        widths: args.widths.clone().unwrap_or(d.widths),
        depths: args.depths.clone().unwrap_or(d.depths),
        multipliers: args.multipliers.clone().unwrap_or(d.multipliers),
        seeds: args.seeds.map(|k| (0..k).collect()).unwrap_or(d.seeds),
        base,
    };
    spec.validate()?;
    Ok(spec)
}

/// Long-format CSV rows: one per (cell, subtype).
#[derive(Debug, Serialize)]
pub struct AblationLongRow {
    pub width: usize,
    pub depth: usize,
    pub multiplier: f64,
    pub seed: u64,
    pub subtype: String,
    pub aupr: Option<f64>,
    pub baseline: Option<f64>,
    pub failure: Option<String>,
}

pub fn ablation_long_rows(cells: &[AblationCell]) -> Vec<AblationLongRow> {
    let mut out = Vec::new();
    for c in cells {
        let id = c.id;
        if c.scores.is_empty() {
            out.push(AblationLongRow {
                width: id.width,
                depth: id.depth,
                multiplier: id.multiplier,
                seed: id.seed,
                subtype: String::new(),
                aupr: None,
                baseline: None,
                failure: c.failure.clone(),
            });
        }
        for s in &c.scores {
            out.push(AblationLongRow {
                width: id.width,
                depth: id.depth,
                multiplier: id.multiplier,
                seed: id.seed,
                subtype: s.subtype.clone(),
                aupr: Some(s.aupr),
                baseline: Some(s.baseline),
                failure: None,
            });
        }
    }
    out
}

/// Wide table: a `random` row of prevalences, then one row per
/// (width, depth, multiplier) with `mean` and `sd` columns per subtype.
pub fn write_ablation_table(path: &Path, cells: &[AblationCell], rows: &[AblationRow]) -> AppResult<()> {
    let mut subtypes: Vec<String> = rows.iter().map(|r| r.subtype.clone()).collect();
    subtypes.sort();
    subtypes.dedup();
    let baseline = |sub: &str| {
        cells.iter().flat_map(|c| &c.scores).find(|s| s.subtype == sub).map(|s| s.baseline.to_string()).unwrap_or_default()
    };
    let mut header = vec!["model".to_string(), "width".into(), "depth".into(), "multiplier".into()];
    for s in &subtypes {
        header.push(format!("{s}_mean"));
        header.push(format!("{s}_sd"));
    }
    let mut w = csv::Writer::from_path(path).map_err(AppError::from)?;
    w.write_record(&header)?;
    let mut random = vec!["random".to_string(), String::new(), String::new(), String::new()];
    for s in &subtypes {
        random.push(baseline(s));
        random.push("0".into());
    }
    w.write_record(&random)?;
    let mut keys: Vec<(usize, usize, f64)> = rows.iter().map(|r| (r.width, r.depth, r.multiplier)).collect();
    keys.dedup();
    for (width, depth, m) in keys {
        let mut rec = vec![format!("w={width},L={depth},n'={m}r"), width.to_string(), depth.to_string(), m.to_string()];
        for s in &subtypes {
            match rows.iter().find(|r| r.width == width && r.depth == depth && r.multiplier == m && &r.subtype == s) {
                Some(r) => {
                    rec.push(r.mean_aupr.to_string());
                    rec.push(r.sd_aupr.to_string());
                }
                None => rec.extend([String::new(), String::new()]),
            }
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| AppError::io(path, e))
}

pub fn cmd_ablate(args: AblateArgs) -> AppResult<()> {
    let spec = ablation_spec(&args)?;
    let mut run = RunConfig::new("theory ablate", output_dir(args.out.clone(), "ablate"), 0);
    let (train, test) = match (&args.schema, &args.train, &args.test) {
        (Some(schema_path), Some(tr), Some(te)) => {
            let schema = load_schema(schema_path)?;
            run.schema = Some(schema_path.clone());
            run.datasets.insert("train".into(), tr.clone());
            run.datasets.insert("test".into(), te.clone());
            (
                load_dataset(tr, &schema, LoadOptions::training(TagSource::LabelColumn))?,
                load_dataset(te, &schema, LoadOptions::test(TagSource::LabelColumn))?,
            )
        }
        (None, None, None) => three_cluster_scenario(args.data_seed.unwrap_or(0), ClusterSizes::default()),
        _ => return Err(AppError::usage("--schema, --train and --test go together")),
    };
    let cells = runner::run_ablation(&spec, &train, &test)?;
    let rows = summarize_ablation(&cells);
    let out = run.output_dir.clone();
    write_rows_csv(&out.join("cells.csv"), &ablation_long_rows(&cells))?;
    write_rows_csv(&out.join("summary.csv"), &rows)?;
    write_ablation_table(&out.join("table.csv"), &cells, &rows)?;
    run.train = Some(spec.base.train.clone());
    run.params = serde_json::json!({ "spec": spec, "data_seed": args.data_seed.unwrap_or(0) });
    Manifest::new(run)?.write(&["cells.csv", "summary.csv", "table.csv"])?;
    let failures = cells.iter().filter(|c| c.failure.is_some()).count();
    print_json(&serde_json::json!({ "cells": cells.len(), "failures": failures, "file": out.join("table.csv") }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ProbeScenario {
    Example1,
    Example2,
    FalseNegative,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbeNoiseArgs {
    #[arg(long, value_enum)]
    pub scenario: Option<ProbeScenario>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub s: Option<f64>,
    #[arg(long)]
    pub s_tilde: Option<f64>,
    /// Number of log-spaced thresholds.
    #[arg(long)]
    pub thresholds: Option<usize>,
    /// Grid points per axis.
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn cmd_probe_noise(args: ProbeNoiseArgs) -> AppResult<()> {
    let s = args.s.unwrap_or(0.5);
    let st = args.s_tilde.unwrap_or(0.5);
    let problem = match args.scenario.unwrap_or(ProbeScenario::Example1) {
        ProbeScenario::Example1 => example1_problem(s, st)?,
        ProbeScenario::Example2 => example2_problem(args.d.unwrap_or(2), s, st)?,
        ProbeScenario::FalseNegative => scenario_figure2(Figure2Case::FalseNegative, s, st)?,
    };
    let rule = match args.grid {
        Some(n) => Quadrature::Grid { points_per_axis: n },
        None => Quadrature::default_for(problem.dim()),
    };
    let probe = noise_exponent_probe(&problem, &default_probe_thresholds(args.thresholds.unwrap_or(20)), &rule)?;
    let out = output_dir(args.out.clone(), "probe-noise");
    #[derive(Serialize)]
    struct Row {
        t: f64,
        mass: f64,
    }
    let rows: Vec<Row> = probe.table.iter().map(|&(t, mass)| Row { t, mass }).collect();
    write_rows_csv(&out.join("noise.csv"), &rows)?;
    let mut run = RunConfig::new("theory probe-noise", out.clone(), 0);
    run.params = serde_json::to_value(&args)?;
    Manifest::new(run)?.write(&["noise.csv"])?;
    print_json(&serde_json::json!({ "q_hat": probe.q_hat, "file": out.join("noise.csv") }))
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct PlanArgs {
    #[arg(long)]
    pub nmin: Option<u64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub d: Option<u32>,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub m: Option<u32>,
    /// Hölder radius (scales the bound only).
    #[arg(long)]
    pub radius: Option<f64>,
}

pub fn cmd_plan(args: PlanArgs) -> AppResult<()> {
    let need = |name: &str| AppError::usage(format!("--{name} is required"));
    let plan = architecture_plan(
        args.nmin.ok_or_else(|| need("nmin"))?,
        args.alpha.ok_or_else(|| need("alpha"))?,
        args.d.ok_or_else(|| need("d"))?,
        args.q.unwrap_or(0.0),
        args.m.unwrap_or(1),
        args.radius.unwrap_or(1.0),
    )?;
    print_json(&plan)
}

pub fn run(cli: Cli) -> AppResult<()> {
    runner::init_threads(cli.threads)?;
    match cli.command {
        Command::Train(a) => cmd_train(a.resolve()?),
        Command::Evaluate(a) => cmd_evaluate(a.resolve()?),
        Command::Sample(a) => cmd_sample(a.resolve()?),
        Command::Theory(t) => match t {
            TheoryCommand::VerifyBound(a) => cmd_verify_bound(a.resolve()?),
            TheoryCommand::Convergence(a) => cmd_convergence(a.resolve()?),
            TheoryCommand::Discontinuity(a) => cmd_discontinuity(a.resolve()?),
            TheoryCommand::Ablate(a) => cmd_ablate(a.resolve()?),
            TheoryCommand::ProbeNoise(a) => cmd_probe_noise(a.resolve()?),
            TheoryCommand::PlanArchitecture(a) => cmd_plan(a.resolve()?),
        },
    }
}
