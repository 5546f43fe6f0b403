mod config;
mod error;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use chrono::{Duration, NaiveDateTime};
use clap::{Args, Parser, Subcommand};

use sbn_core::evaluator::{self, EvalConfig, EvalReport, NrmseKind, SweepSpec};
use sbn_core::features::{Normalizer, StageKind};
use sbn_core::io::{self, IngestOptions, SynthConfig};
use sbn_core::model::{Forecaster, SbnModel};
use sbn_core::trainer::{self, TrainMode};
use sbn_core::{Execution, HourlySeries};

use crate::config::{model_config, parse_datetime, RunConfig};
use crate::error::{exit_code, usage, EXIT_USAGE};

#[derive(Parser, Debug)]
#[command(name = "sbn", version, about = "Stacked booster network load forecaster")]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic office-building load CSV.
    Synth(SynthArgs),
    /// Train a model and write its archive and loss history.
    Train(TrainArgs),
    /// Rolling-origin evaluation at one or more horizons.
    Evaluate(EvaluateArgs),
    /// Per-hour forecast from a single origin.
    Forecast(ForecastArgs),
    /// Train and score booster setups across training sizes and horizons.
    Sweep(SweepArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Output CSV [io.out].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of hours [synth.n_hours].
    #[arg(long)]
    hours: Option<usize>,
    /// Generator seed [synth.seed].
    #[arg(long)]
    seed: Option<u64>,
    /// First timestamp [synth.start].
    #[arg(long)]
    start: Option<String>,
    /// Oscillation period in hours [synth.oscillation.period_hours].
    #[arg(long)]
    oscillation_period: Option<f64>,
    /// Oscillation amplitude in kW [synth.oscillation.amplitude_kw].
    #[arg(long)]
    oscillation_amplitude: Option<f64>,
    /// Load noise standard deviation in kW [synth.noise_sigma_kw].
    #[arg(long)]
    noise_sigma: Option<f64>,
    /// Permanent change of the weekly event in kW [synth.weekly_event.step_change_kw].
    #[arg(long)]
    step_change: Option<f64>,
    /// Date the weekly event changes [synth.weekly_event.step_date].
    #[arg(long)]
    step_date: Option<String>,
    /// Occupancy drift standard deviation in kW [synth.level_shifts.sigma_kw].
    #[arg(long)]
    level_shift_sigma: Option<f64>,
    /// Boosters the data is meant for, used for the period check [model.boosters].
    #[arg(long, value_delimiter = ',')]
    boosters: Option<Vec<String>>,
}

#[derive(Args, Debug, Clone)]
struct ModelArgs {
    /// Comma-separated boosters (weekly, daily, hourly) or `none` [model.boosters].
    #[arg(long, value_delimiter = ',')]
    boosters: Option<Vec<String>>,
    /// Dropout on hidden layers [model.dropout].
    #[arg(long)]
    dropout: Option<f64>,
}

#[derive(Args, Debug, Clone)]
struct TrainingArgs {
    /// Epochs [train.epochs].
    #[arg(long)]
    epochs: Option<usize>,
    /// Batch size [train.batch_size].
    #[arg(long)]
    batch_size: Option<usize>,
    /// Initial learning rate [train.base_lr].
    #[arg(long)]
    lr: Option<f64>,
    /// Seed for initialization, dropout and shuffling [train.seed].
    #[arg(long)]
    seed: Option<u64>,
    /// joint_weighted, final_only, staged_frozen or staged_unfrozen [train.mode].
    #[arg(long)]
    mode: Option<String>,
    /// Loss weight on the final output [train.loss_weight_final].
    #[arg(long)]
    loss_weight_final: Option<f64>,
    /// Loss weight on each earlier output [train.loss_weight_earlier].
    #[arg(long)]
    loss_weight_earlier: Option<f64>,
    /// Learning-rate factor per reference epoch [train.reference_decay].
    #[arg(long)]
    reference_decay: Option<f64>,
    /// Batches in one reference epoch [train.reference_batches_per_epoch].
    #[arg(long)]
    reference_batches: Option<usize>,
    /// No gradient through historical forecasts [train.stop_history_gradients].
    #[arg(long)]
    stop_history_gradients: bool,
}

#[derive(Args, Debug, Clone)]
struct DataArgs {
    /// Input CSV [io.data].
    #[arg(long)]
    data: Option<PathBuf>,
    /// Longest interpolated gap in hours [data.max_gap_hours].
    #[arg(long)]
    max_gap_hours: Option<usize>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    training: TrainingArgs,
    /// Output archive [io.model].
    #[arg(long)]
    model_out: Option<PathBuf>,
    /// Loss history CSV, default next to the archive [io.loss_out].
    #[arg(long)]
    loss_out: Option<PathBuf>,
    /// First training target [data.train_start].
    #[arg(long)]
    train_start: Option<String>,
    /// End of training targets, exclusive [data.train_end].
    #[arg(long)]
    train_end: Option<String>,
}

#[derive(Args, Debug, Clone)]
struct RangeArgs {
    /// Start of the evaluation range [data.eval_start].
    #[arg(long)]
    eval_start: Option<String>,
    /// End of the evaluation range, exclusive [data.eval_end].
    #[arg(long)]
    eval_end: Option<String>,
    /// Comma-separated horizons in hours [eval.horizons].
    #[arg(long, value_delimiter = ',')]
    horizons: Option<Vec<usize>>,
    /// Score MSE/range instead of RMSE/range [eval.literal_mse].
    #[arg(long)]
    literal_mse: bool,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    range: RangeArgs,
    /// Model archive [io.model].
    #[arg(long)]
    model: Option<PathBuf>,
    /// NRMSE table CSV [io.out].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-hour predictions CSV; with several horizons `_<H>h` is appended [io.predictions].
    #[arg(long)]
    predictions: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ForecastArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Model archive [io.model].
    #[arg(long)]
    model: Option<PathBuf>,
    /// First forecast hour; everything before it counts as observed [forecast.origin].
    #[arg(long)]
    origin: Option<String>,
    /// Hours to forecast [forecast.horizon].
    #[arg(long)]
    horizon: Option<usize>,
    /// Output CSV [io.out].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    range: RangeArgs,
    #[command(flatten)]
    training: TrainingArgs,
    /// Dropout on hidden layers [model.dropout].
    #[arg(long)]
    dropout: Option<f64>,
    /// Output directory [io.out_dir].
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Comma-separated training sizes such as 6mo,1y,2y [sweep.sizes].
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<String>>,
    /// Comma-separated booster sets, each `none` or names joined by `+` [sweep.configs].
    #[arg(long, value_delimiter = ',')]
    configs: Option<Vec<String>>,
    /// End of the training range, exclusive; defaults to the evaluation start [data.train_end].
    #[arg(long)]
    train_end: Option<String>,
    /// Training size shown in the horizon table [sweep.horizon_table_size].
    #[arg(long)]
    horizon_table_size: Option<String>,
    /// Also write every trained model [sweep.save_models].
    #[arg(long)]
    save_models: bool,
}

fn required<T: Clone>(flag: Option<T>, file: Option<T>, name: &str) -> Result<T> {
    flag.or(file).ok_or_else(|| usage(format!("missing --{name}")))
}

/// Hour index of `ts` in `series`; the hour after the last is allowed as an end bound.
fn hour_at(series: &HourlySeries, ts: NaiveDateTime, what: &str) -> Result<usize> {
    let h = (ts - series.start()).num_hours();
    if h < 0 || h as usize > series.len() || ts != series.start() + Duration::hours(h) {
        return Err(usage(format!(
            "{what} {ts} is outside the data ({} .. {}) or not on the hour",
            series.start(),
            series.timestamp(series.len())
        )));
    }
    Ok(h as usize)
}

fn range_bound(series: &HourlySeries, value: Option<&String>, default: usize, what: &str) -> Result<usize> {
    match value {
        Some(s) => hour_at(series, parse_datetime(s)?, what),
        None => Ok(default),
    }
}

fn load_series(data: &DataArgs, cfg: &RunConfig) -> Result<HourlySeries> {
    let path = required(data.data.clone(), cfg.io.data.clone(), "data")?;
    let opts = IngestOptions {
        max_gap_hours: data.max_gap_hours.unwrap_or(cfg.data.max_gap_hours),
    };
    let (series, summary) = io::ingest_csv(&path, opts).with_context(|| format!("reading {}", path.display()))?;
    eprintln!(
        "{}: {} rows, {} hours, {} interpolated, {} invalid",
        path.display(),
        summary.rows_read,
        summary.hours,
        summary.hours_interpolated,
        summary.hours_invalid
    );
    Ok(series)
}

fn apply_training(args: &TrainingArgs, cfg: &mut RunConfig) -> Result<()> {
    let t = &mut cfg.train;
    if let Some(v) = args.epochs {
        t.epochs = v;
    }
    if let Some(v) = args.batch_size {
        t.batch_size = v;
    }
    if let Some(v) = args.lr {
        t.base_lr = v;
    }
    if let Some(v) = args.seed {
        t.seed = v;
    }
    if let Some(m) = &args.mode {
        t.mode = TrainMode::parse(m).ok_or_else(|| usage(format!("unknown training mode `{m}`")))?;
    }
    if let Some(v) = args.loss_weight_final {
        t.loss_weight_final = v;
    }
    if let Some(v) = args.loss_weight_earlier {
        t.loss_weight_earlier = v;
    }
    if let Some(v) = args.reference_decay {
        t.reference_decay = v;
    }
    if let Some(v) = args.reference_batches {
        t.reference_batches_per_epoch = v;
    }
    t.stop_history_gradients |= args.stop_history_gradients;
    t.validate().map_err(|e| usage(e.to_string()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn cmd_synth(args: SynthArgs, mut cfg: RunConfig) -> Result<()> {
    let out = required(args.out.clone(), cfg.io.out.clone(), "out")?;
    let s: &mut SynthConfig = &mut cfg.synth;
    if let Some(v) = args.hours {
        s.n_hours = v;
    }
    if let Some(v) = args.seed {
        s.seed = v;
    }
    if let Some(v) = &args.start {
        s.start = parse_datetime(v)?;
    }
    if let Some(v) = args.oscillation_period {
        s.oscillation.period_hours = v;
    }
    if let Some(v) = args.oscillation_amplitude {
        s.oscillation.amplitude_kw = v;
    }
    if let Some(v) = args.noise_sigma {
        s.noise_sigma_kw = v;
    }
    if let Some(v) = args.step_change {
        s.weekly_event.step_change_kw = v;
    }
    if let Some(v) = &args.step_date {
        s.weekly_event.step_date = Some(parse_datetime(v)?);
    }
    if let Some(v) = args.level_shift_sigma {
        s.level_shifts.sigma_kw = v;
    }
    if s.n_hours == 0 {
        bail!(usage("--hours must be positive"));
    }
    let boosters = config::parse_boosters(args.boosters.as_ref().unwrap_or(&cfg.model.boosters))?;
    if boosters.contains(&StageKind::Hourly) {
        if let Some(w) = cfg.synth.hourly_booster_warning() {
            eprintln!("warning: {w}");
        }
    }
    let series = io::generate_synthetic(&cfg.synth);
    let mut w = create(&out)?;
    io::write_series(&series, &mut w)?;
    w.flush()?;
    println!("wrote {} hours to {}", series.len(), out.display());
    Ok(())
}

fn cmd_train(args: TrainArgs, mut cfg: RunConfig) -> Result<()> {
    apply_training(&args.training, &mut cfg)?;
    let model_out = required(args.model_out.clone(), cfg.io.model.clone(), "model-out")?;
    let boosters = args.model.boosters.clone().unwrap_or_else(|| cfg.model.boosters.clone());
    let model_cfg = model_config(&boosters, args.model.dropout.unwrap_or(cfg.model.dropout))?;
    let series = load_series(&args.data, &cfg)?;
    let start = range_bound(
        &series,
        args.train_start.as_ref().or(cfg.data.train_start.as_ref()),
        0,
        "--train-start",
    )?;
    let end = range_bound(
        &series,
        args.train_end.as_ref().or(cfg.data.train_end.as_ref()),
        series.len(),
        "--train-end",
    )?;
    if start >= end {
        bail!(usage(format!("empty training range {start}..{end}")));
    }
    let norm = Normalizer::fit(&series, start, end)?;
    let samples = trainer::build_samples(&series, &model_cfg, &norm, start, end - 1).map_err(|e| {
        let earliest = model_cfg.required_history();
        anyhow::Error::new(e).context(format!(
            "earliest feasible target hour is {earliest} ({})",
            series.timestamp(earliest)
        ))
    })?;
    println!("model: {}", model_cfg.label());
    println!("parameters: {}", model_cfg.parameter_count());
    println!("layers: {}", model_cfg.layer_count());
    println!("samples: {} ({} skipped)", samples.len(), samples.skipped());
    let model = SbnModel::init(model_cfg, norm, cfg.train.seed)?;
    let outcome = trainer::train(model, &samples, &cfg.train)?;
    if let Some(last) = outcome.history.last() {
        let labels = evaluator::stage_labels(outcome.model.config());
        for (l, m) in labels.iter().zip(&last.stage_mse) {
            println!("train mse {l}: {m:.6}");
        }
    }
    io::save_model(&outcome.model, Some(&cfg.train), &model_out)
        .with_context(|| format!("writing {}", model_out.display()))?;
    let loss_out = args
        .loss_out
        .or(cfg.io.loss_out.clone())
        .unwrap_or_else(|| model_out.with_extension("loss.csv"));
    let mut w = create(&loss_out)?;
    outcome.history.write_csv(&mut w)?;
    w.flush()?;
    println!("wrote {} and {}", model_out.display(), loss_out.display());
    Ok(())
}

struct ResolvedRange {
    start: usize,
    end: usize,
    horizons: Vec<usize>,
    kind: NrmseKind,
}

fn resolve_range(series: &HourlySeries, range: &RangeArgs, cfg: &RunConfig, default_start: usize) -> Result<ResolvedRange> {
    let start = range_bound(
        series,
        range.eval_start.as_ref().or(cfg.data.eval_start.as_ref()),
        default_start,
        "--eval-start",
    )?;
    let end = range_bound(
        series,
        range.eval_end.as_ref().or(cfg.data.eval_end.as_ref()),
        series.len(),
        "--eval-end",
    )?;
    let horizons = range.horizons.clone().unwrap_or_else(|| cfg.eval.horizons.clone());
    if horizons.is_empty() || horizons.contains(&0) {
        bail!(usage("horizons must be positive"));
    }
    let kind = if range.literal_mse || cfg.eval.literal_mse {
        NrmseKind::LiteralMse
    } else {
        NrmseKind::Rmse
    };
    Ok(ResolvedRange {
        start,
        end,
        horizons,
        kind,
    })
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = path.extension().map(|e| format!(".{}", e.to_string_lossy())).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}{ext}"))
}

fn write_eval_table<W: Write>(mut out: W, reports: &[(usize, EvalReport)], sep: &str) -> std::io::Result<()> {
    let labels = &reports[0].1.labels;
    write!(out, "stage")?;
    for (h, _) in reports {
        write!(out, "{sep}{h}h")?;
    }
    writeln!(out)?;
    for (s, l) in labels.iter().enumerate() {
        write!(out, "{l}")?;
        for (_, r) in reports {
            write!(out, "{sep}{:.2}", 100.0 * r.stage_nrmse[s])?;
        }
        writeln!(out)?;
    }
    write!(out, "seasonal-naive")?;
    for (_, r) in reports {
        write!(out, "{sep}{:.2}", 100.0 * r.baseline_nrmse)?;
    }
    writeln!(out)
}

fn cmd_evaluate(args: EvaluateArgs, cfg: RunConfig) -> Result<()> {
    let model_path = required(args.model.clone(), cfg.io.model.clone(), "model")?;
    let (model, _) = io::load_model(&model_path).with_context(|| format!("loading {}", model_path.display()))?;
    let series = load_series(&args.data, &cfg)?;
    let range = resolve_range(&series, &args.range, &cfg, model.config().required_history())?;
    let mut reports = Vec::new();
    for &h in &range.horizons {
        let ec = EvalConfig {
            kind: range.kind,
            ..EvalConfig::new(h, range.start, range.end)
        };
        reports.push((h, evaluator::rolling_evaluate(&model, &series, &ec)?));
    }
    println!("NRMSE (%) of {} over {} predictions per horizon", model.config().label(), reports[0].1.n_predictions);
    write_eval_table(std::io::stdout().lock(), &reports, "\t")?;
    if let Some(out) = args.out.or(cfg.io.out.clone()) {
        let mut w = create(&out)?;
        write_eval_table(&mut w, &reports, ",")?;
        w.flush()?;
    }
    if let Some(pred) = args.predictions.or(cfg.io.predictions.clone()) {
        for (h, r) in &reports {
            let path = if reports.len() > 1 { with_suffix(&pred, &format!("_{h}h")) } else { pred.clone() };
            let mut w = create(&path)?;
            r.write_predictions_csv(&series, &mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn cmd_forecast(args: ForecastArgs, cfg: RunConfig) -> Result<()> {
    let model_path = required(args.model.clone(), cfg.io.model.clone(), "model")?;
    let (model, _) = io::load_model(&model_path).with_context(|| format!("loading {}", model_path.display()))?;
    let out = required(args.out.clone(), cfg.io.out.clone(), "out")?;
    let series = load_series(&args.data, &cfg)?;
    let origin_text = required(args.origin.clone(), cfg.forecast.origin.clone(), "origin")?;
    let first = hour_at(&series, parse_datetime(&origin_text)?, "--origin")?;
    let horizon = args.horizon.unwrap_or(cfg.forecast.horizon);
    if horizon == 0 {
        bail!(usage("--horizon must be positive"));
    }
    let origin = first
        .checked_sub(1)
        .ok_or_else(|| usage("--origin must leave at least one observed hour"))?;
    let fc = Forecaster::new(&model, &series)?;
    let rows = fc.rollout(origin, horizon)?;
    let labels = evaluator::stage_labels(model.config());
    let mut w = create(&out)?;
    write!(w, "timestamp,lead,actual")?;
    for l in &labels {
        write!(w, ",{l}")?;
    }
    for s in &model.config().stages {
        write!(w, ",estimate_{}", s.kind)?;
    }
    writeln!(w)?;
    for (i, row) in rows.iter().enumerate() {
        let hour = origin + 1 + i;
        let actual = if hour < series.len() && series.is_valid(hour) {
            series.energy()[hour].to_string()
        } else {
            String::new()
        };
        write!(w, "{},{},{actual}", io::ingest::format_timestamp(series.start(), hour), i + 1)?;
        match row {
            Some(f) => {
                for v in f.forecasts.iter().chain(&f.residual_estimates) {
                    write!(w, ",{v}")?;
                }
            }
            None => {
                for _ in 0..labels.len() + model.config().stages.len() {
                    write!(w, ",")?;
                }
            }
        }
        writeln!(w)?;
    }
    w.flush()?;
    let missing = rows.iter().filter(|r| r.is_none()).count();
    println!("wrote {} hours to {} ({missing} without a forecast)", rows.len(), out.display());
    Ok(())
}

fn cmd_sweep(args: SweepArgs, mut cfg: RunConfig) -> Result<()> {
    apply_training(&args.training, &mut cfg)?;
    let out_dir = required(args.out_dir.clone(), cfg.io.out_dir.clone(), "out-dir")?;
    let dropout = args.dropout.unwrap_or(cfg.model.dropout);
    let config_names = args.configs.clone().unwrap_or_else(|| cfg.sweep.configs.clone());
    let configs = config_names
        .iter()
        .map(|c| model_config(std::slice::from_ref(c), dropout))
        .collect::<Result<Vec<_>>>()?;
    let size_labels = args.sizes.clone().unwrap_or_else(|| cfg.sweep.sizes.clone());
    let train_sizes = size_labels
        .iter()
        .map(|l| {
            evaluator::parse_size(l)
                .map(|h| (l.clone(), h))
                .ok_or_else(|| usage(format!("cannot parse training size `{l}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    if configs.is_empty() || train_sizes.is_empty() {
        bail!(usage("sweep needs at least one configuration and one size"));
    }
    let series = load_series(&args.data, &cfg)?;
    let default_eval_start = series.len().saturating_sub(8760);
    let range = resolve_range(&series, &args.range, &cfg, default_eval_start)?;
    let train_end = range_bound(
        &series,
        args.train_end.as_ref().or(cfg.data.train_end.as_ref()),
        range.start,
        "--train-end",
    )?;
    let spec = SweepSpec {
        configs,
        train_sizes,
        horizons: range.horizons.clone(),
        train: cfg.train.clone(),
        train_end,
        eval_start: range.start,
        eval_end: range.end,
        kind: range.kind,
        keep_models: args.save_models || cfg.sweep.save_models,
    };
    let result = evaluator::sweep(&series, &spec, Execution::default());
    fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;

    let first_h = spec.horizons[0];
    let table_size = args
        .horizon_table_size
        .clone()
        .or(cfg.sweep.horizon_table_size.clone())
        .filter(|s| size_labels.contains(s))
        .unwrap_or_else(|| size_labels.last().cloned().expect("sizes not empty"));
    let mut w = create(&out_dir.join("cells.csv"))?;
    result.write_csv(&mut w)?;
    w.flush()?;
    let size_path = out_dir.join(format!("sizes_{first_h}h.csv"));
    let mut w = create(&size_path)?;
    result.write_size_table(first_h, &mut w)?;
    w.flush()?;
    let horizon_path = out_dir.join(format!("horizons_{table_size}.csv"));
    let mut w = create(&horizon_path)?;
    result.write_horizon_table(&table_size, &mut w)?;
    w.flush()?;

    println!("NRMSE (%) at {first_h} h by training size");
    result.write_size_table(first_h, std::io::stdout().lock())?;
    println!();
    println!("NRMSE (%) by horizon, trained on {table_size}");
    result.write_horizon_table(&table_size, std::io::stdout().lock())?;
    if !result.models.is_empty() {
        let dir = out_dir.join("models");
        fs::create_dir_all(&dir)?;
        for (label, size, model) in &result.models {
            let path = dir.join(format!("{}_{size}.json", label.replace('+', "-")));
            io::save_model(model, Some(&spec.train), &path)?;
        }
    }
    for c in result.failures() {
        eprintln!(
            "warning: {} / {} / {} h failed: {}",
            c.model,
            c.train_size,
            c.horizon,
            c.error.as_deref().unwrap_or("")
        );
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let cfg = RunConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Synth(a) => cmd_synth(a, cfg),
        Command::Train(a) => cmd_train(a, cfg),
        Command::Evaluate(a) => cmd_evaluate(a, cfg),
        Command::Forecast(a) => cmd_forecast(a, cfg),
        Command::Sweep(a) => cmd_sweep(a, cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
