//! `adl`: command-line frontend for the activity-recognition pipeline.
//!
//! Exit codes: 0 on success, 1 for usage problems (bad flags, bad config
//! file), 2 for data problems (unreadable or malformed inputs), 3 when
//! training diverges.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use adl_fusion::experiments::{
    default_grid, evaluate, grid_spec_from_json, grid_spec_to_json, render_report,
    results_from_csv, results_to_csv, run_grid, split, NormalizationMode, ResultRow, SplitSpec,
};
use adl_fusion::features::{
    build_dataset, DatasetVariant, FeatureDataset, FusionConfig,
};
use adl_fusion::neuralnet::{
    init_network, train, Network, NetworkConfig, NetworkPreset, TrainError,
};
use adl_fusion::normalization::{fit, NormalizerStats};
use adl_fusion::preprocessing::FilterConfig;
use adl_fusion::sensor_model::{parse_capture, render_capture, AdlLabel, Capture};
use adl_fusion::synthgen::{default_profiles, generate_captures, ClassProfiles, SynthConfig};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_DIVERGED: u8 = 3;

#[derive(Parser)]
#[command(
    name = "adl",
    version,
    about = "Activity recognition from phone motion sensors",
    after_help = "Exit codes: 0 success, 1 usage error, 2 data error, 3 training divergence."
)]
struct Cli {
    /// JSON config file; keys are long flag names, explicit flags win.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic labeled captures
    Synth(SynthArgs),
    /// Extract a feature dataset from capture files
    Extract(ExtractArgs),
    /// Train a classifier on a feature dataset
    Train(TrainArgs),
    /// Evaluate a saved model on a feature dataset
    Eval(EvalArgs),
    /// Run an experiment grid, or emit the canonical grid spec
    Grid(GridArgs),
    /// Render the best-accuracy table from a results file
    Report(ReportArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory for capture files
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Records generated per activity class
    #[arg(long, default_value_t = 100)]
    per_class: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Samples per sensor window
    #[arg(long, default_value_t = 500)]
    samples: usize,
    /// JSON file overriding the built-in class profiles
    #[arg(long, value_name = "FILE")]
    profiles: Option<PathBuf>,
    /// Write all records into one captures.txt instead of one file each
    #[arg(long)]
    single_file: bool,
}

#[derive(Args)]
struct ExtractArgs {
    /// Directory of capture .txt files
    #[arg(long = "in", value_name = "DIR")]
    input: PathBuf,
    /// Output CSV path
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Sensors to fuse: acc, acc+mag or acc+mag+gyro
    #[arg(long, default_value = "acc+mag+gyro", value_parser = parse_fusion)]
    fusion: FusionConfig,
    /// Feature-column variant, 1 (all) through 5 (narrowest)
    #[arg(long, default_value = "1", value_parser = parse_variant)]
    variant: DatasetVariant,
    /// Low-pass smoothing factor in (0, 1]
    #[arg(long, default_value_t = FilterConfig::DEFAULT_ALPHA)]
    alpha: f64,
}

#[derive(Args)]
struct TrainArgs {
    /// Feature dataset CSV
    #[arg(long, value_name = "FILE")]
    data: PathBuf,
    /// Output model path
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Network preset: mlp, ffnn or dnn
    #[arg(long, default_value = "mlp", value_parser = parse_preset)]
    preset: NetworkPreset,
    /// Column rescaling fitted on the training split: none, minmax or zscore
    #[arg(long, default_value = "none", value_parser = parse_normalization)]
    normalization: NormalizationMode,
    /// Iteration budget; plain count or with an M suffix (1M = 1000000)
    #[arg(long, default_value = "1M", value_parser = parse_budget)]
    budget: u64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// holdout:FRACTION:SEED[:unstratified] or resubstitution
    #[arg(long, default_value = "holdout:0.8:7", value_parser = parse_split)]
    split: SplitSpec,
    /// Override the preset learning rate
    #[arg(long, value_name = "RATE")]
    lr: Option<f64>,
    /// Override the preset weight-decay strength
    #[arg(long, value_name = "LAMBDA")]
    l2: Option<f64>,
    /// Override the preset hidden-layer widths, comma separated
    #[arg(long, value_name = "W1,W2,...")]
    hidden: Option<String>,
    /// Where to write fitted normalizer stats (default: next to the model)
    #[arg(long, value_name = "FILE")]
    stats_out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Feature dataset CSV
    #[arg(long, value_name = "FILE")]
    data: PathBuf,
    /// Saved model JSON
    #[arg(long, value_name = "FILE")]
    model: PathBuf,
    /// Normalizer stats JSON matching the model's training run
    #[arg(long, value_name = "FILE")]
    stats: Option<PathBuf>,
    /// Which part of the data to score
    #[arg(long, default_value = "resubstitution", value_parser = parse_split)]
    split: SplitSpec,
}

#[derive(Args)]
struct GridArgs {
    /// Directory of capture .txt files
    #[arg(long, value_name = "DIR")]
    captures: Option<PathBuf>,
    /// Grid spec JSON (a list of experiment specs)
    #[arg(long, value_name = "FILE")]
    spec: Option<PathBuf>,
    /// Output results CSV
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Worker threads; results are identical for any value
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Low-pass smoothing factor in (0, 1]
    #[arg(long, default_value_t = FilterConfig::DEFAULT_ALPHA)]
    alpha: f64,
    /// Record real wall-clock times instead of zeros (breaks byte
    /// reproducibility between runs)
    #[arg(long)]
    timing: bool,
    /// Write the canonical 90-spec grid for one fusion config and exit
    #[arg(long, value_name = "FILE")]
    emit_default_spec: Option<PathBuf>,
    /// Fusion config for the emitted spec
    #[arg(long, default_value = "acc+mag+gyro", value_parser = parse_fusion)]
    fusion: FusionConfig,
    /// Budgets for the emitted spec, comma separated
    #[arg(long, default_value = "1M,2M,4M")]
    budgets: String,
    /// Training seed for the emitted spec
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Split for the emitted spec
    #[arg(long, default_value = "holdout:0.8:7", value_parser = parse_split)]
    split: SplitSpec,
}

#[derive(Args)]
struct ReportArgs {
    /// Results CSV produced by the grid command
    #[arg(long, value_name = "FILE")]
    results: PathBuf,
    /// Also write the report to a file
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Average accuracies over rows differing only in training seed
    #[arg(long)]
    average_seeds: bool,
}

fn parse_fusion(s: &str) -> Result<FusionConfig, String> {
    FusionConfig::from_token(s)
        .ok_or_else(|| format!("unknown fusion {:?} (expected acc, acc+mag or acc+mag+gyro)", s))
}

fn parse_variant(s: &str) -> Result<DatasetVariant, String> {
    s.parse::<u8>()
        .ok()
        .and_then(DatasetVariant::from_number)
        .ok_or_else(|| format!("variant {:?} outside 1..=5", s))
}

fn parse_preset(s: &str) -> Result<NetworkPreset, String> {
    NetworkPreset::from_token(s)
        .ok_or_else(|| format!("unknown preset {:?} (expected mlp, ffnn or dnn)", s))
}

fn parse_normalization(s: &str) -> Result<NormalizationMode, String> {
    NormalizationMode::from_token(s)
        .ok_or_else(|| format!("unknown normalization {:?} (expected none, minmax or zscore)", s))
}

fn parse_split(s: &str) -> Result<SplitSpec, String> {
    SplitSpec::parse_token(s).map_err(|e| e.to_string())
}

fn parse_budget(s: &str) -> Result<u64, String> {
    let bad = || format!("bad budget {:?} (expected an update count, M suffix allowed)", s);
    if let Some(millions) = s.strip_suffix(['M', 'm']) {
        millions
            .parse::<u64>()
            .ok()
            .and_then(|v| v.checked_mul(1_000_000))
            .ok_or_else(bad)
    } else {
        s.parse::<u64>().map_err(|_| bad())
    }
}

fn parse_budget_list(s: &str) -> Result<Vec<u64>, String> {
    let budgets: Vec<u64> = s
        .split(',')
        .map(|part| parse_budget(part.trim()))
        .collect::<Result<_, _>>()?;
    if budgets.is_empty() {
        return Err("budget list is empty".to_string());
    }
    Ok(budgets)
}

struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> CliError {
        CliError { code: EXIT_USAGE, message: message.into() }
    }

    fn data(message: impl Into<String>) -> CliError {
        CliError { code: EXIT_DATA, message: message.into() }
    }

    fn diverged(message: impl Into<String>) -> CliError {
        CliError { code: EXIT_DIVERGED, message: message.into() }
    }
}

type CliResult = Result<(), CliError>;

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::data(format!("{}: {}", path.display(), e)))
}

fn write_file(path: &Path, contents: &str) -> CliResult {
    fs::write(path, contents).map_err(|e| CliError::data(format!("{}: {}", path.display(), e)))
}

/// Reads every .txt file under `dir` in file-name order.
fn read_captures_dir(dir: &Path) -> Result<Vec<Capture>, CliError> {
    let entries =
        fs::read_dir(dir).map_err(|e| CliError::data(format!("{}: {}", dir.display(), e)))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "txt"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::data(format!("{}: no capture .txt files", dir.display())));
    }
    let mut captures = Vec::with_capacity(paths.len());
    for path in paths {
        let text = read_file(&path)?;
        let capture = parse_capture(&text)
            .map_err(|e| CliError::data(format!("{}: {}", path.display(), e)))?;
        captures.push(capture);
    }
    Ok(captures)
}

fn filter_config(alpha: f64) -> Result<FilterConfig, CliError> {
    FilterConfig::new(alpha).map_err(|e| CliError::usage(e.to_string()))
}

fn cmd_synth(args: &SynthArgs) -> CliResult {
    let profiles = match &args.profiles {
        Some(path) => ClassProfiles::from_json(&read_file(path)?)
            .map_err(|e| CliError::data(format!("{}: {}", path.display(), e)))?,
        None => default_profiles(),
    };
    let cfg = SynthConfig {
        per_class: args.per_class,
        samples_per_window: args.samples,
        period_ms: adl_fusion::sensor_model::NOMINAL_PERIOD_MS,
        seed: args.seed,
        profiles,
    };
    let captures = generate_captures(&cfg).map_err(|e| CliError::usage(e.to_string()))?;
    fs::create_dir_all(&args.out)
        .map_err(|e| CliError::data(format!("{}: {}", args.out.display(), e)))?;

    let files = if args.single_file {
        let merged = Capture {
            records: captures.iter().flat_map(|c| c.records.iter().cloned()).collect(),
        };
        write_file(&args.out.join("captures.txt"), &render_capture(&merged))?;
        1
    } else {
        for capture in &captures {
            let record = &capture.records[0];
            let name = format!("record_{:05}_{}.txt", record.id, record.label);
            write_file(&args.out.join(name), &render_capture(capture))?;
        }
        captures.len()
    };
    println!(
        "wrote {} records ({} per class, seed {}) to {} in {} file{}",
        captures.len(),
        args.per_class,
        args.seed,
        args.out.display(),
        files,
        if files == 1 { "" } else { "s" }
    );
    Ok(())
}

fn cmd_extract(args: &ExtractArgs) -> CliResult {
    let filter = filter_config(args.alpha)?;
    let captures = read_captures_dir(&args.input)?;
    let ds = build_dataset(&captures, args.fusion, args.variant, filter)
        .map_err(|e| CliError::data(e.to_string()))?;
    write_file(&args.out, &ds.to_csv())?;
    println!(
        "wrote {} rows x {} feature columns ({} x variant {}) to {}",
        ds.n_rows(),
        ds.n_cols(),
        args.fusion,
        args.variant,
        args.out.display()
    );
    Ok(())
}

fn stats_path_for(model_path: &Path) -> PathBuf {
    let stem = model_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "model".to_string());
    model_path.with_file_name(format!("{}.stats.json", stem))
}

fn parse_hidden(s: &str) -> Result<Vec<usize>, CliError> {
    s.split(',')
        .map(|part| {
            part.trim()
                .parse::<usize>()
                .map_err(|_| CliError::usage(format!("bad hidden width {:?}", part)))
        })
        .collect()
}

fn cmd_train(args: &TrainArgs) -> CliResult {
    let ds = FeatureDataset::from_csv(&read_file(&args.data)?)
        .map_err(|e| CliError::data(format!("{}: {}", args.data.display(), e)))?;
    let (train_ds, test_ds) =
        split(&ds, &args.split).map_err(|e| CliError::data(e.to_string()))?;

    let stats = match args.normalization.kind() {
        Some(kind) => {
            Some(fit(&train_ds, kind).map_err(|e| CliError::data(e.to_string()))?)
        }
        None => None,
    };
    let train_input = match &stats {
        Some(stats) => stats
            .apply_dataset(&train_ds)
            .map_err(|e| CliError::data(e.to_string()))?,
        None => train_ds,
    };

    let mut cfg = NetworkConfig::for_preset(args.preset, train_input.n_cols(), args.seed);
    if let Some(lr) = args.lr {
        cfg.learning_rate = lr;
    }
    if let Some(l2) = args.l2 {
        cfg.l2_lambda = l2;
    }
    if let Some(hidden) = &args.hidden {
        cfg.hidden_layers = parse_hidden(hidden)?;
    }
    let net = init_network(cfg).map_err(|e| CliError::usage(e.to_string()))?;

    let (net, history) = match train(net, &train_input, args.budget) {
        Ok(done) => done,
        Err(TrainError::Diverged { iteration, history }) => {
            return Err(CliError::diverged(format!(
                "training diverged at iteration {} ({} loss samples recorded); \
                 try a smaller learning rate or normalized features",
                iteration,
                history.samples.len()
            )));
        }
        Err(TrainError::Net(e)) => return Err(CliError::data(e.to_string())),
    };

    write_file(&args.out, &net.to_model_json())?;
    match history.final_loss() {
        Some(loss) => println!(
            "trained {} for {} iterations (final training loss {:.6})",
            args.preset.display_name(),
            args.budget,
            loss
        ),
        None => println!("trained {} for 0 iterations", args.preset.display_name()),
    }
    println!("model written to {}", args.out.display());

    if let Some(stats) = &stats {
        let path = args.stats_out.clone().unwrap_or_else(|| stats_path_for(&args.out));
        write_file(&path, &stats.to_json())?;
        println!("normalizer stats written to {}", path.display());
    }

    let eval = evaluate(&net, &test_ds, stats.as_ref())
        .map_err(|e| CliError::data(e.to_string()))?;
    println!(
        "accuracy {:.4} on {} evaluation rows ({})",
        eval.accuracy,
        test_ds.n_rows(),
        args.split.token()
    );
    Ok(())
}

fn print_evaluation(eval: &adl_fusion::experiments::Evaluation) {
    println!("accuracy {:.4}", eval.accuracy);
    println!("{:<12} {:>10} {:>10}", "class", "precision", "recall");
    for label in AdlLabel::ALL {
        let c = label.code();
        println!(
            "{:<12} {:>10.4} {:>10.4}",
            label.token(),
            eval.precision[c],
            eval.recall[c]
        );
    }
    println!("confusion matrix (rows = true class):");
    print!("{:<12}", "");
    for label in AdlLabel::ALL {
        print!("{:>11}", label.token());
    }
    println!();
    for label in AdlLabel::ALL {
        print!("{:<12}", label.token());
        for pred in AdlLabel::ALL {
            print!("{:>11}", eval.confusion[label.code()][pred.code()]);
        }
        println!();
    }
}

fn cmd_eval(args: &EvalArgs) -> CliResult {
    let net = Network::from_model_json(&read_file(&args.model)?)
        .map_err(|e| CliError::data(format!("{}: {}", args.model.display(), e)))?;
    let ds = FeatureDataset::from_csv(&read_file(&args.data)?)
        .map_err(|e| CliError::data(format!("{}: {}", args.data.display(), e)))?;
    let stats = match &args.stats {
        Some(path) => Some(
            NormalizerStats::from_json(&read_file(path)?)
                .map_err(|e| CliError::data(format!("{}: {}", path.display(), e)))?,
        ),
        None => None,
    };
    let (_, test_ds) = split(&ds, &args.split).map_err(|e| CliError::data(e.to_string()))?;
    let eval = evaluate(&net, &test_ds, stats.as_ref())
        .map_err(|e| CliError::data(e.to_string()))?;
    println!("{} rows ({})", test_ds.n_rows(), args.split.token());
    print_evaluation(&eval);
    Ok(())
}

fn cmd_grid(args: &GridArgs) -> CliResult {
    if let Some(spec_out) = &args.emit_default_spec {
        if args.captures.is_some() || args.spec.is_some() || args.out.is_some() {
            return Err(CliError::usage(
                "--emit-default-spec cannot be combined with --captures/--spec/--out",
            ));
        }
        let budgets = parse_budget_list(&args.budgets).map_err(CliError::usage)?;
        let specs = default_grid(args.fusion, &budgets, args.seed, args.split.clone());
        write_file(spec_out, &grid_spec_to_json(&specs))?;
        println!("wrote {} specs ({}, budgets {}) to {}", specs.len(), args.fusion, args.budgets, spec_out.display());
        return Ok(());
    }

    let (captures_dir, spec_path, out_path) = match (&args.captures, &args.spec, &args.out) {
        (Some(c), Some(s), Some(o)) => (c, s, o),
        _ => {
            return Err(CliError::usage(
                "grid needs --captures, --spec and --out (or --emit-default-spec)",
            ))
        }
    };
    let filter = filter_config(args.alpha)?;
    let specs = grid_spec_from_json(&read_file(spec_path)?)
        .map_err(|e| CliError::data(format!("{}: {}", spec_path.display(), e)))?;
    if specs.is_empty() {
        return Err(CliError::data(format!("{}: no specs", spec_path.display())));
    }
    let captures = read_captures_dir(captures_dir)?;

    let outcomes = run_grid(&specs, &captures, filter, args.jobs.max(1));
    let mut failed = 0usize;
    for (i, outcome) in outcomes.iter().enumerate() {
        if let Err(e) = &outcome.outcome {
            failed += 1;
            eprintln!("spec {}: {}", i, e);
        }
    }
    let rows: Vec<ResultRow> =
        outcomes.iter().map(|o| ResultRow::from_outcome(o, args.timing)).collect();
    write_file(out_path, &results_to_csv(&rows))?;
    println!(
        "{} specs: {} ok, {} failed; results written to {}",
        outcomes.len(),
        outcomes.len() - failed,
        failed,
        out_path.display()
    );
    Ok(())
}

fn cmd_report(args: &ReportArgs) -> CliResult {
    let rows = results_from_csv(&read_file(&args.results)?)
        .map_err(|e| CliError::data(format!("{}: {}", args.results.display(), e)))?;
    let report = render_report(&rows, args.average_seeds);
    print!("{}", report);
    if let Some(out) = &args.out {
        write_file(out, &report)?;
    }
    Ok(())
}

/// Merges `--config FILE` JSON into the argument list: each key becomes a
/// long flag appended at the end, skipped when the flag was given
/// explicitly. Booleans toggle bare flags, everything else must be a
/// scalar. Unknown keys then fail normal flag parsing.
fn apply_config_file(mut argv: Vec<String>) -> Result<Vec<String>, String> {
    let mut path: Option<String> = None;
    for (i, arg) in argv.iter().enumerate() {
        if arg == "--config" {
            match argv.get(i + 1) {
                Some(value) => path = Some(value.clone()),
                None => return Err("--config needs a file path".to_string()),
            }
            break;
        }
        if let Some(rest) = arg.strip_prefix("--config=") {
            path = Some(rest.to_string());
            break;
        }
    }
    let Some(path) = path else { return Ok(argv) };
    let text = fs::read_to_string(&path).map_err(|e| format!("{}: {}", path, e))?;
    let map: serde_json::Map<String, serde_json::Value> =
        serde_json::from_str(&text).map_err(|e| format!("{}: {}", path, e))?;
    for (key, value) in &map {
        let flag = format!("--{}", key);
        let prefix = format!("{}=", flag);
        if argv.iter().any(|a| a == &flag || a.starts_with(&prefix)) {
            continue;
        }
        match value {
            serde_json::Value::Bool(true) => argv.push(flag),
            serde_json::Value::Bool(false) | serde_json::Value::Null => {}
            serde_json::Value::String(s) => {
                argv.push(flag);
                argv.push(s.clone());
            }
            serde_json::Value::Number(n) => {
                argv.push(flag);
                argv.push(n.to_string());
            }
            _ => return Err(format!("{}: key {:?} must be a scalar", path, key)),
        }
    }
    Ok(argv)
}

fn dispatch(cli: &Cli) -> CliResult {
    match &cli.command {
        Command::Synth(args) => cmd_synth(args),
        Command::Extract(args) => cmd_extract(args),
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Grid(args) => cmd_grid(args),
        Command::Report(args) => cmd_report(args),
    }
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let argv = match apply_config_file(argv) {
        Ok(argv) => argv,
        Err(message) => {
            eprintln!("error: {}", message);
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
