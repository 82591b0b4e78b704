//! Experiment orchestration: train/test splits, confusion-matrix scoring,
//! the 90-spec comparison grid over presets, variants, budgets and
//! normalization states, the results CSV, and the best-accuracy report.

use std::collections::BTreeMap;
use std::fmt;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::features::{
    build_dataset, DatasetVariant, FeatureDataset, FeatureError, FusionConfig,
};
use crate::neuralnet::{
    init_network, train, NetError, NetworkConfig, NetworkPreset, TrainError,
};
use crate::normalization::{fit, NormalizeError, NormalizerKind, NormalizerStats};
use crate::preprocessing::FilterConfig;
use crate::sensor_model::{AdlLabel, Capture};

/// How an experiment divides rows into train and test sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode")]
pub enum SplitSpec {
    /// Seeded random holdout. With `stratified` (the default) the fraction
    /// is applied per class, so rare classes keep test representation.
    #[serde(rename = "holdout")]
    Holdout {
        train_fraction: f64,
        seed: u64,
        #[serde(default = "default_stratified")]
        stratified: bool,
    },
    /// Train and evaluate on the full dataset. Measures fit, not
    /// generalization; useful as an upper bound.
    #[serde(rename = "resubstitution")]
    Resubstitution,
}

fn default_stratified() -> bool {
    true
}

impl SplitSpec {
    pub fn holdout(train_fraction: f64, seed: u64) -> SplitSpec {
        SplitSpec::Holdout { train_fraction, seed, stratified: true }
    }

    /// Compact one-token form used in CSV columns and CLI flags:
    /// `holdout:0.8:7`, `holdout:0.8:7:unstratified` or `resubstitution`.
    pub fn token(&self) -> String {
        match self {
            SplitSpec::Holdout { train_fraction, seed, stratified } => {
                if *stratified {
                    format!("holdout:{}:{}", train_fraction, seed)
                } else {
                    format!("holdout:{}:{}:unstratified", train_fraction, seed)
                }
            }
            SplitSpec::Resubstitution => "resubstitution".to_string(),
        }
    }

    pub fn parse_token(token: &str) -> Result<SplitSpec, ExperimentError> {
        let bad = || ExperimentError::InvalidSplit(format!("bad split token {:?}", token));
        let parts: Vec<&str> = token.split(':').collect();
        match parts.as_slice() {
            ["resubstitution"] => Ok(SplitSpec::Resubstitution),
            ["holdout", frac, seed] | ["holdout", frac, seed, "unstratified"] => {
                let train_fraction = frac.parse::<f64>().map_err(|_| bad())?;
                let seed = seed.parse::<u64>().map_err(|_| bad())?;
                let spec = SplitSpec::Holdout {
                    train_fraction,
                    seed,
                    stratified: parts.len() == 3,
                };
                spec.validate()?;
                Ok(spec)
            }
            _ => Err(bad()),
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if let SplitSpec::Holdout { train_fraction, .. } = self {
            if !(train_fraction.is_finite() && *train_fraction > 0.0 && *train_fraction < 1.0) {
                return Err(ExperimentError::InvalidSplit(format!(
                    "train fraction {} outside (0, 1)",
                    train_fraction
                )));
            }
        }
        Ok(())
    }
}

/// Whether and how the feature columns are rescaled before training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormalizationMode {
    #[serde(rename = "none")]
    None,
    #[serde(rename = "minmax")]
    MinMax,
    #[serde(rename = "zscore")]
    ZScore,
}

impl NormalizationMode {
    pub fn token(self) -> &'static str {
        match self {
            NormalizationMode::None => "none",
            NormalizationMode::MinMax => "minmax",
            NormalizationMode::ZScore => "zscore",
        }
    }

    pub fn from_token(token: &str) -> Option<NormalizationMode> {
        match token {
            "none" => Some(NormalizationMode::None),
            "minmax" => Some(NormalizationMode::MinMax),
            "zscore" => Some(NormalizationMode::ZScore),
            _ => None,
        }
    }

    pub fn kind(self) -> Option<NormalizerKind> {
        match self {
            NormalizationMode::None => None,
            NormalizationMode::MinMax => Some(NormalizerKind::MinMax),
            NormalizationMode::ZScore => Some(NormalizerKind::ZScore),
        }
    }
}

impl fmt::Display for NormalizationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// The normalizer each preset is paired with in the normalized half of the
/// grid: min-max for the sigmoid networks, z-score for the deep one.
pub fn paired_normalization(preset: NetworkPreset) -> NormalizationMode {
    match preset {
        NetworkPreset::MlpBackprop | NetworkPreset::FeedforwardBackprop => {
            NormalizationMode::MinMax
        }
        NetworkPreset::DeepLearning => NormalizationMode::ZScore,
    }
}

/// One fully specified training-and-evaluation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub fusion: FusionConfig,
    pub variant: DatasetVariant,
    pub normalization: NormalizationMode,
    pub preset: NetworkPreset,
    pub budget: u64,
    pub seed: u64,
    pub split: SplitSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExperimentError {
    Feature(FeatureError),
    Normalize(NormalizeError),
    Net(NetError),
    /// Training aborted on a non-finite gradient.
    Diverged { iteration: u64 },
    TooFewRowsPerClass { label: AdlLabel, rows: usize },
    TooFewRows { rows: usize },
    InvalidSplit(String),
    EmptySplit,
    MalformedCsv { line: usize, reason: String },
    MalformedSpec(String),
}

impl fmt::Display for ExperimentError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExperimentError::Feature(e) => write!(f, "{}", e),
            ExperimentError::Normalize(e) => write!(f, "{}", e),
            ExperimentError::Net(e) => write!(f, "{}", e),
            ExperimentError::Diverged { iteration } => {
                write!(f, "training diverged at iteration {}", iteration)
            }
            ExperimentError::TooFewRowsPerClass { label, rows } => {
                write!(f, "class {} has {} rows; holdout needs at least 2", label, rows)
            }
            ExperimentError::TooFewRows { rows } => {
                write!(f, "dataset has {} rows; holdout needs at least 2", rows)
            }
            ExperimentError::InvalidSplit(reason) => write!(f, "{}", reason),
            ExperimentError::EmptySplit => write!(f, "evaluation split has no rows"),
            ExperimentError::MalformedCsv { line, reason } => {
                write!(f, "results csv line {}: {}", line, reason)
            }
            ExperimentError::MalformedSpec(reason) => write!(f, "malformed grid spec: {}", reason),
        }
    }
}

impl std::error::Error for ExperimentError {}

impl From<FeatureError> for ExperimentError {
    fn from(e: FeatureError) -> ExperimentError {
        ExperimentError::Feature(e)
    }
}

impl From<NormalizeError> for ExperimentError {
    fn from(e: NormalizeError) -> ExperimentError {
        ExperimentError::Normalize(e)
    }
}

impl From<NetError> for ExperimentError {
    fn from(e: NetError) -> ExperimentError {
        ExperimentError::Net(e)
    }
}

impl From<TrainError> for ExperimentError {
    fn from(e: TrainError) -> ExperimentError {
        match e {
            TrainError::Net(e) => ExperimentError::Net(e),
            TrainError::Diverged { iteration, .. } => ExperimentError::Diverged { iteration },
        }
    }
}

fn rounded_clamped(fraction: f64, n: usize) -> usize {
    let raw = (fraction * n as f64).round() as usize;
    raw.clamp(1, n - 1)
}

/// Splits a dataset into train and test parts. Selected row indices are
/// re-sorted, so both parts keep the original row order; the same spec on
/// the same dataset always picks the same rows.
pub fn split(
    ds: &FeatureDataset,
    spec: &SplitSpec,
) -> Result<(FeatureDataset, FeatureDataset), ExperimentError> {
    spec.validate()?;
    match spec {
        SplitSpec::Resubstitution => Ok((ds.clone(), ds.clone())),
        SplitSpec::Holdout { train_fraction, seed, stratified } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut train_idx: Vec<usize> = Vec::new();
            let mut test_idx: Vec<usize> = Vec::new();
            if *stratified {
                for label in AdlLabel::ALL {
                    let mut class_idx: Vec<usize> = ds
                        .rows
                        .iter()
                        .enumerate()
                        .filter(|(_, r)| r.label == label)
                        .map(|(i, _)| i)
                        .collect();
                    if class_idx.is_empty() {
                        continue;
                    }
                    if class_idx.len() < 2 {
                        return Err(ExperimentError::TooFewRowsPerClass {
                            label,
                            rows: class_idx.len(),
                        });
                    }
                    class_idx.shuffle(&mut rng);
                    let n_train = rounded_clamped(*train_fraction, class_idx.len());
                    train_idx.extend_from_slice(&class_idx[..n_train]);
                    test_idx.extend_from_slice(&class_idx[n_train..]);
                }
            } else {
                if ds.rows.len() < 2 {
                    return Err(ExperimentError::TooFewRows { rows: ds.rows.len() });
                }
                let mut idx: Vec<usize> = (0..ds.rows.len()).collect();
                idx.shuffle(&mut rng);
                let n_train = rounded_clamped(*train_fraction, idx.len());
                train_idx.extend_from_slice(&idx[..n_train]);
                test_idx.extend_from_slice(&idx[n_train..]);
            }
            train_idx.sort_unstable();
            test_idx.sort_unstable();
            let pick = |indices: &[usize]| FeatureDataset {
                schema: ds.schema.clone(),
                rows: indices.iter().map(|&i| ds.rows[i].clone()).collect(),
            };
            Ok((pick(&train_idx), pick(&test_idx)))
        }
    }
}

/// Confusion-matrix scores for one model on one split. Rows of the matrix
/// are true classes, columns are predictions, both in class-code order.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    pub confusion: [[u64; AdlLabel::COUNT]; AdlLabel::COUNT],
    pub precision: [f64; AdlLabel::COUNT],
    pub recall: [f64; AdlLabel::COUNT],
}

/// Scores a network on a dataset, applying `stats` first when given (the
/// same transform the training data went through).
pub fn evaluate(
    net: &crate::neuralnet::Network,
    test: &FeatureDataset,
    stats: Option<&NormalizerStats>,
) -> Result<Evaluation, ExperimentError> {
    if test.rows.is_empty() {
        return Err(ExperimentError::EmptySplit);
    }
    let normalized;
    let rows = match stats {
        Some(stats) => {
            normalized = stats.apply_dataset(test)?;
            &normalized.rows
        }
        None => &test.rows,
    };
    let mut confusion = [[0u64; AdlLabel::COUNT]; AdlLabel::COUNT];
    for row in rows {
        let (predicted, _) = net.predict(&row.features)?;
        confusion[row.label.code()][predicted.code()] += 1;
    }
    let total: u64 = confusion.iter().flatten().sum();
    let trace: u64 = (0..AdlLabel::COUNT).map(|i| confusion[i][i]).sum();
    let mut precision = [0.0; AdlLabel::COUNT];
    let mut recall = [0.0; AdlLabel::COUNT];
    for c in 0..AdlLabel::COUNT {
        let col: u64 = (0..AdlLabel::COUNT).map(|r| confusion[r][c]).sum();
        let row: u64 = confusion[c].iter().sum();
        if col > 0 {
            precision[c] = confusion[c][c] as f64 / col as f64;
        }
        if row > 0 {
            recall[c] = confusion[c][c] as f64 / row as f64;
        }
    }
    Ok(Evaluation {
        accuracy: trace as f64 / total as f64,
        confusion,
        precision,
        recall,
    })
}

/// Everything a finished experiment produced.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub spec: ExperimentSpec,
    pub accuracy: f64,
    pub confusion: [[u64; AdlLabel::COUNT]; AdlLabel::COUNT],
    pub precision: [f64; AdlLabel::COUNT],
    pub recall: [f64; AdlLabel::COUNT],
    /// Fingerprint of the training split the normalizer was fitted on;
    /// absent when the spec ran unnormalized.
    pub stats_fingerprint: Option<String>,
    pub final_loss: Option<f64>,
    pub wall_ms: u64,
}

/// Runs one spec against a feature table that already matches the spec's
/// fusion and variant.
pub fn run_experiment_on(
    spec: &ExperimentSpec,
    ds: &FeatureDataset,
) -> Result<ExperimentResult, ExperimentError> {
    let started = Instant::now();
    let (train_ds, test_ds) = split(ds, &spec.split)?;
    let stats = match spec.normalization.kind() {
        Some(kind) => Some(fit(&train_ds, kind)?),
        None => None,
    };
    let train_input = match &stats {
        Some(stats) => stats.apply_dataset(&train_ds)?,
        None => train_ds,
    };
    let cfg = NetworkConfig::for_preset(spec.preset, train_input.n_cols(), spec.seed);
    let net = init_network(cfg)?;
    let (net, history) = train(net, &train_input, spec.budget)?;
    let eval = evaluate(&net, &test_ds, stats.as_ref())?;
    Ok(ExperimentResult {
        spec: spec.clone(),
        accuracy: eval.accuracy,
        confusion: eval.confusion,
        precision: eval.precision,
        recall: eval.recall,
        stats_fingerprint: stats.map(|s| s.fingerprint),
        final_loss: history.final_loss(),
        wall_ms: started.elapsed().as_millis() as u64,
    })
}

/// Builds the feature table for the spec and runs it.
pub fn run_experiment(
    spec: &ExperimentSpec,
    captures: &[Capture],
    filter: FilterConfig,
) -> Result<ExperimentResult, ExperimentError> {
    let ds = build_dataset(captures, spec.fusion, spec.variant, filter)?;
    run_experiment_on(spec, &ds)
}

/// Outcome of one grid entry; failures stay attached to their spec instead
/// of aborting the batch.
#[derive(Debug, Clone, PartialEq)]
pub struct GridOutcome {
    pub spec: ExperimentSpec,
    pub outcome: Result<ExperimentResult, ExperimentError>,
}

/// Runs every spec, fanning out over `jobs` worker threads. Feature tables
/// are built once per (fusion, variant) pair and shared. Output order
/// follows spec order regardless of scheduling, and each run is internally
/// seeded, so results do not depend on `jobs`.
pub fn run_grid(
    specs: &[ExperimentSpec],
    captures: &[Capture],
    filter: FilterConfig,
    jobs: usize,
) -> Vec<GridOutcome> {
    let mut datasets: BTreeMap<(u8, u8), Result<FeatureDataset, ExperimentError>> = BTreeMap::new();
    for spec in specs {
        let key = (fusion_index(spec.fusion), spec.variant.number());
        datasets.entry(key).or_insert_with(|| {
            build_dataset(captures, spec.fusion, spec.variant, filter).map_err(ExperimentError::from)
        });
    }

    let run_one = |spec: &ExperimentSpec| -> GridOutcome {
        let key = (fusion_index(spec.fusion), spec.variant.number());
        let outcome = match &datasets[&key] {
            Ok(ds) => run_experiment_on(spec, ds),
            Err(e) => Err(e.clone()),
        };
        GridOutcome { spec: spec.clone(), outcome }
    };

    if jobs <= 1 {
        specs.iter().map(run_one).collect()
    } else {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .expect("worker pool");
        pool.install(|| specs.par_iter().map(run_one).collect())
    }
}

fn fusion_index(fusion: FusionConfig) -> u8 {
    match fusion {
        FusionConfig::AccOnly => 0,
        FusionConfig::AccMag => 1,
        FusionConfig::AccMagGyro => 2,
    }
}

/// The canonical comparison grid for one fusion config: both normalization
/// states, every preset, every variant, every budget. With three budgets
/// that is 2 x 3 x 5 x 3 = 90 specs. In the normalized half each preset
/// uses its paired normalizer.
pub fn default_grid(
    fusion: FusionConfig,
    budgets: &[u64],
    seed: u64,
    split: SplitSpec,
) -> Vec<ExperimentSpec> {
    let mut specs = Vec::with_capacity(2 * NetworkPreset::ALL.len() * DatasetVariant::ALL.len() * budgets.len());
    for normalized in [false, true] {
        for preset in NetworkPreset::ALL {
            for variant in DatasetVariant::ALL {
                for &budget in budgets {
                    specs.push(ExperimentSpec {
                        fusion,
                        variant,
                        normalization: if normalized {
                            paired_normalization(preset)
                        } else {
                            NormalizationMode::None
                        },
                        preset,
                        budget,
                        seed,
                        split: split.clone(),
                    });
                }
            }
        }
    }
    specs
}

/// Standard iteration budgets: one, two and four million updates.
pub const DEFAULT_BUDGETS: [u64; 3] = [1_000_000, 2_000_000, 4_000_000];

pub fn grid_spec_to_json(specs: &[ExperimentSpec]) -> String {
    serde_json::to_string_pretty(specs).expect("grid spec serialize")
}

pub fn grid_spec_from_json(text: &str) -> Result<Vec<ExperimentSpec>, ExperimentError> {
    let specs: Vec<ExperimentSpec> =
        serde_json::from_str(text).map_err(|e| ExperimentError::MalformedSpec(e.to_string()))?;
    for spec in &specs {
        spec.split.validate()?;
    }
    Ok(specs)
}

/// One line of the results CSV. `accuracy` is `None` for failed runs,
/// written as `div.`; `wall_ms` is zero unless timing capture was
/// requested, keeping default outputs byte-reproducible.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub fusion: FusionConfig,
    pub variant: DatasetVariant,
    pub normalization: NormalizationMode,
    pub preset: NetworkPreset,
    pub budget: u64,
    pub seed: u64,
    pub split: SplitSpec,
    pub accuracy: Option<f64>,
    pub wall_ms: u64,
}

impl ResultRow {
    pub fn from_outcome(outcome: &GridOutcome, include_timing: bool) -> ResultRow {
        let spec = &outcome.spec;
        let (accuracy, wall_ms) = match &outcome.outcome {
            Ok(result) => (Some(result.accuracy), result.wall_ms),
            Err(_) => (None, 0),
        };
        ResultRow {
            fusion: spec.fusion,
            variant: spec.variant,
            normalization: spec.normalization,
            preset: spec.preset,
            budget: spec.budget,
            seed: spec.seed,
            split: spec.split.clone(),
            accuracy,
            wall_ms: if include_timing { wall_ms } else { 0 },
        }
    }
}

const RESULTS_HEADER: &str = "fusion,variant,normalization,preset,budget,seed,split,accuracy,wall_ms";

pub fn results_to_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from(RESULTS_HEADER);
    out.push('\n');
    for row in rows {
        let accuracy = match row.accuracy {
            Some(a) => format!("{:.16e}", a),
            None => "div.".to_string(),
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            row.fusion.token(),
            row.variant.number(),
            row.normalization.token(),
            row.preset.token(),
            row.budget,
            row.seed,
            row.split.token(),
            accuracy,
            row.wall_ms,
        ));
    }
    out
}

pub fn results_from_csv(text: &str) -> Result<Vec<ResultRow>, ExperimentError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == RESULTS_HEADER => {}
        _ => {
            return Err(ExperimentError::MalformedCsv {
                line: 1,
                reason: format!("header must be {:?}", RESULTS_HEADER),
            })
        }
    }
    let mut rows = Vec::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let bad = |reason: String| ExperimentError::MalformedCsv { line, reason };
        let fields: Vec<&str> = raw.split(',').collect();
        if fields.len() != 9 {
            return Err(bad(format!("expected 9 fields, got {}", fields.len())));
        }
        let fusion = FusionConfig::from_token(fields[0])
            .ok_or_else(|| bad(format!("unknown fusion {:?}", fields[0])))?;
        let variant = fields[1]
            .parse::<u8>()
            .ok()
            .and_then(DatasetVariant::from_number)
            .ok_or_else(|| bad(format!("bad variant {:?}", fields[1])))?;
        let normalization = NormalizationMode::from_token(fields[2])
            .ok_or_else(|| bad(format!("unknown normalization {:?}", fields[2])))?;
        let preset = NetworkPreset::from_token(fields[3])
            .ok_or_else(|| bad(format!("unknown preset {:?}", fields[3])))?;
        let budget = fields[4].parse::<u64>().map_err(|_| bad(format!("bad budget {:?}", fields[4])))?;
        let seed = fields[5].parse::<u64>().map_err(|_| bad(format!("bad seed {:?}", fields[5])))?;
        let split = SplitSpec::parse_token(fields[6])
            .map_err(|_| bad(format!("bad split {:?}", fields[6])))?;
        let accuracy = if fields[7] == "div." {
            None
        } else {
            let a = fields[7].parse::<f64>().map_err(|_| bad(format!("bad accuracy {:?}", fields[7])))?;
            if !a.is_finite() {
                return Err(bad(format!("bad accuracy {:?}", fields[7])));
            }
            Some(a)
        };
        let wall_ms = fields[8].parse::<u64>().map_err(|_| bad(format!("bad wall_ms {:?}", fields[8])))?;
        rows.push(ResultRow {
            fusion,
            variant,
            normalization,
            preset,
            budget,
            seed,
            split,
            accuracy,
            wall_ms,
        });
    }
    Ok(rows)
}

/// Formats an iteration budget the way the report table shows it:
/// whole millions get the `M` suffix.
pub fn budget_short(budget: u64) -> String {
    if budget > 0 && budget.is_multiple_of(1_000_000) {
        format!("{}M", budget / 1_000_000)
    } else {
        budget.to_string()
    }
}

#[derive(Clone)]
struct Candidate {
    variant: DatasetVariant,
    budget: u64,
    accuracy: f64,
}

fn better(a: &Candidate, b: &Candidate) -> bool {
    if a.accuracy != b.accuracy {
        return a.accuracy > b.accuracy;
    }
    if a.variant.number() != b.variant.number() {
        return a.variant.number() < b.variant.number();
    }
    a.budget < b.budget
}

/// Renders the best-accuracy table: for each normalization group and each
/// preset, the single row with the highest accuracy. Ties go to the lower
/// variant number, then the lower budget. A preset whose every run failed
/// prints `div.`. With `average_seeds`, rows differing only in seed are
/// averaged first.
pub fn render_report(rows: &[ResultRow], average_seeds: bool) -> String {
    let mut out = String::from("FRAMEWORK | DATASET | ITERATIONS | BEST ACCURACY\n");
    for (title, normalized) in [("NOT NORMALIZED DATA", false), ("NORMALIZED DATA", true)] {
        let group: Vec<&ResultRow> = rows
            .iter()
            .filter(|r| (r.normalization != NormalizationMode::None) == normalized)
            .collect();
        if group.is_empty() {
            continue;
        }
        out.push_str(title);
        out.push('\n');
        for preset in NetworkPreset::ALL {
            let preset_rows: Vec<&&ResultRow> =
                group.iter().filter(|r| r.preset == preset).collect();
            if preset_rows.is_empty() {
                continue;
            }
            let candidates = collect_candidates(&preset_rows, average_seeds);
            let mut best: Option<Candidate> = None;
            for c in candidates {
                if best.as_ref().is_none_or(|b| better(&c, b)) {
                    best = Some(c);
                }
            }
            match best {
                Some(c) => {
                    out.push_str(&format!(
                        "{} | {} | {} | {:.2}\n",
                        preset.display_name(),
                        c.variant.number(),
                        budget_short(c.budget),
                        c.accuracy * 100.0
                    ));
                }
                None => {
                    out.push_str(&format!("{} | - | - | div.\n", preset.display_name()));
                }
            }
        }
    }
    out
}

fn collect_candidates(rows: &[&&ResultRow], average_seeds: bool) -> Vec<Candidate> {
    if !average_seeds {
        return rows
            .iter()
            .filter_map(|r| {
                r.accuracy.map(|accuracy| Candidate {
                    variant: r.variant,
                    budget: r.budget,
                    accuracy,
                })
            })
            .collect();
    }
    // Group rows identical up to seed; average the successful runs.
    let mut groups: BTreeMap<(u8, u8, u64, String), Vec<f64>> = BTreeMap::new();
    for r in rows {
        let key = (r.variant.number(), fusion_index(r.fusion), r.budget, r.split.token());
        let entry = groups.entry(key).or_default();
        if let Some(a) = r.accuracy {
            entry.push(a);
        }
    }
    groups
        .into_iter()
        .filter(|(_, accs)| !accs.is_empty())
        .map(|((variant, _, budget, _), accs)| Candidate {
            variant: DatasetVariant::from_number(variant).unwrap(),
            budget,
            accuracy: accs.iter().sum::<f64>() / accs.len() as f64,
        })
        .collect()
}
