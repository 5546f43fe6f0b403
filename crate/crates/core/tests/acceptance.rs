//! Acceptance checks, one PASS/FAIL line per criterion. Runs as a plain binary
//! so the lines show up in `cargo test` output.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use chrono::{Datelike, Duration, Timelike};
use common::oracle::Oracle;
use common::{at, bits, demo_config, full_config, gradient_error, jitter, random_model, synthetic};
use sbn_core::evaluator::{nrmse, rolling_evaluate, sweep, EvalConfig, EvalReport, SweepResult, SweepSpec};
use sbn_core::features::FeatureTable;
use sbn_core::io::archive::{from_archive_str, to_archive_string};
use sbn_core::io::{generate_synthetic, LevelShifts, Oscillation, SynthConfig, WeeklyEvent};
use sbn_core::model::{forecast, Forecaster, LossWeights, ModelConfig, SampleGraph, SamplePlan, Tracks};
use sbn_core::nn::{AdamState, Mode, Rng};
use sbn_core::trainer::{build_samples, lr_schedule, train, TrainConfig, REFERENCE_BATCHES_PER_EPOCH};
use sbn_core::{Execution, HourlySeries, SbnModel, StageKind};

const YEAR: usize = 8760;

/// Epochs for models with boosters in the benchmark sweep. Instant-only models
/// always get the full default schedule.
fn booster_epochs() -> usize {
    std::env::var("SBN_ACCEPTANCE_EPOCHS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(20)
}

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn table1_counts() -> Outcome {
    let configs: [&[StageKind]; 5] = [
        &[],
        &[StageKind::Weekly],
        &[StageKind::Daily],
        &[StageKind::Weekly, StageKind::Daily],
        &StageKind::ALL,
    ];
    let norm = sbn_core::features::Normalizer::identity();
    let mut params = Vec::new();
    let mut layers = Vec::new();
    for kinds in configs {
        let m = SbnModel::init(ModelConfig::from_boosters(kinds).unwrap(), norm, 0).unwrap();
        assert_eq!(m.parameter_count(), m.params().len());
        params.push(m.parameter_count());
        layers.push(m.layer_count());
    }
    check(
        params == [238, 399, 527, 624, 1457] && layers == [3, 5, 5, 7, 9],
        format!("parameters {params:?}, layers {layers:?}"),
    )
}

fn gradients() -> Outcome {
    let series = synthetic(1400, 101);
    let mut model = random_model(&series, full_config().with_dropout(0.0), 102);
    jitter(&mut model, 0.05, 103);
    let table = FeatureTable::build(&series, &model.normalizer);
    let weights = LossWeights::joint(4, 0.1, 0.9);
    let first = model.config().required_history();
    let mut rng = Rng::new(104);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let t = first + (rng.uniform() * (series.len() - first) as f64) as usize;
        worst = worst.max(gradient_error(&model, &table, t, &weights));
    }
    check(worst < 1e-4, format!("max relative error {worst:.2e} over 20 samples, 1457 parameters"))
}

fn oracle_equivalence() -> Outcome {
    let series = synthetic(5 * 168, 105);
    let mut worst = 0.0f64;
    let mut compared = 0usize;
    let mut track = |a: Option<f64>, b: Option<f64>| -> Result<(), String> {
        match (a, b) {
            (Some(x), Some(y)) => {
                worst = worst.max((x - y).abs());
                compared += 1;
                Ok(())
            }
            (None, None) => Ok(()),
            _ => Err(format!("availability differs: {a:?} vs {b:?}")),
        }
    };
    for (i, cfg) in [demo_config(), full_config()].into_iter().enumerate() {
        let mut model = random_model(&series, cfg, 106 + i as u64);
        jitter(&mut model, 0.05, 110 + i as u64);
        let n = model.stages.len();
        let table = FeatureTable::build(&series, &model.normalizer);
        let tracks = Tracks::historical(&model, &table).unwrap();
        let oracle = Oracle::run(&model, &series, usize::MAX, series.len());
        for h in 0..series.len() {
            for s in 0..=n {
                track(tracks.forecast(s, h), oracle.yhat[s][h])?;
            }
        }
        let plan = SamplePlan::new(model.config());
        let mut rng = Rng::new(0);
        for t in model.config().required_history()..series.len() {
            let g = SampleGraph::forward(&model, &plan, &table, t, Mode::Infer, &mut rng).unwrap();
            for (s, y) in g.outputs().into_iter().enumerate() {
                track(Some(y), oracle.yhat[s][t])?;
            }
        }
        let fc = Forecaster::new(&model, &series).unwrap();
        let std = model.normalizer.energy_std;
        for origin in (fc.earliest_origin()..series.len() - 24).step_by(23) {
            let oracle = Oracle::run(&model, &series, origin, origin + 25);
            for f in fc.rollout(origin, 24).unwrap().into_iter().flatten() {
                for (s, y) in f.forecasts.iter().enumerate() {
                    let want = oracle.yhat[s][f.hour].map(|v| model.normalizer.energy_inverse(v));
                    track(Some(*y / std), want.map(|w| w / std))?;
                }
            }
        }
    }
    check(
        worst <= 1e-10,
        format!("{compared} stage values on a 5-week series, max |difference| {worst:.1e} (standardized)"),
    )
}

struct Benchmark {
    series: HourlySeries,
    instant: SweepResult,
    full: SweepResult,
}

const SIZES: [(&str, usize); 3] = [("6mo", 6 * 730), ("1y", YEAR), ("2y", 2 * YEAR)];

fn benchmark() -> Benchmark {
    let series = generate_synthetic(&SynthConfig::benchmark(at(2016, 1, 1, 0), 3 * YEAR, 1));
    let spec = |config: ModelConfig, epochs: usize| SweepSpec {
        configs: vec![config],
        train_sizes: SIZES.iter().map(|(l, n)| (l.to_string(), *n)).collect(),
        horizons: vec![24],
        train: TrainConfig {
            epochs,
            ..TrainConfig::default()
        },
        train_end: 2 * YEAR,
        eval_start: 2 * YEAR,
        eval_end: 3 * YEAR,
        kind: Default::default(),
        keep_models: true,
    };
    let instant = sweep(&series, &spec(ModelConfig::instant_only(), TrainConfig::default().epochs), Execution::default());
    let full = sweep(&series, &spec(full_config(), booster_epochs()), Execution::default());
    Benchmark { series, instant, full }
}

fn scores(b: &Benchmark, size: &str) -> Option<(f64, f64, f64)> {
    let i = b.instant.find("instant", size, 24)?.nrmse?;
    let f = b.full.find("weekly+daily+hourly", size, 24)?;
    Some((i, f.nrmse?, f.baseline_nrmse?))
}

fn ordering_holds((instant, full, baseline): (f64, f64, f64)) -> bool {
    full <= 0.8 * instant && full < baseline
}

fn synthetic_benchmark(b: &Benchmark) -> Outcome {
    let Some(s) = scores(b, "2y") else {
        return Err("2y cell failed".into());
    };
    let stages = &b.full.find("weekly+daily+hourly", "2y", 24).unwrap().stage_nrmse;
    let stages: Vec<String> = stages.iter().map(|v| format!("{:.2}", 100.0 * v)).collect();
    check(
        ordering_holds(s),
        format!(
            "24 h NRMSE full {:.2}% vs instant {:.2}% ({:.0}% lower), seasonal naive {:.2}%; stages [{}]; {} epochs",
            100.0 * s.1,
            100.0 * s.0,
            100.0 * (1.0 - s.1 / s.0),
            100.0 * s.2,
            stages.join(", "),
            booster_epochs()
        ),
    )
}

fn data_size_robustness(b: &Benchmark) -> Outcome {
    let mut detail = Vec::new();
    let mut ok = true;
    let mut full = Vec::new();
    for (size, _) in SIZES {
        match scores(b, size) {
            Some(s) => {
                ok &= ordering_holds(s);
                full.push(s.1);
                detail.push(format!("{size}: full {:.2}% instant {:.2}% naive {:.2}%", 100.0 * s.1, 100.0 * s.0, 100.0 * s.2));
            }
            None => {
                ok = false;
                detail.push(format!("{size}: failed"));
            }
        }
    }
    if full.len() == 3 {
        let ratio = full[0] / full[2];
        ok &= ratio <= 3.0;
        detail.push(format!("6mo/2y ratio {ratio:.2}"));
    }
    check(ok, detail.join("; "))
}

fn horizon_invariance(b: &Benchmark) -> Outcome {
    let Some((_, _, model)) = b.instant.models.iter().find(|(_, size, _)| size == "2y") else {
        return Err("no trained instant-only model".into());
    };
    let reports: Vec<EvalReport> = [24, 48, 96]
        .iter()
        .map(|&h| rolling_evaluate(model, &b.series, &EvalConfig::new(h, 2 * YEAR, 3 * YEAR)).unwrap())
        .collect();
    let v: Vec<f64> = reports.iter().map(EvalReport::final_nrmse).collect();
    check(
        v[0] == v[1] && v[1] == v[2],
        format!(
            "instant-only NRMSE {:.4}% / {:.4}% / {:.4}% at 24/48/96 h ({} / {} / {} predictions)",
            100.0 * v[0],
            100.0 * v[1],
            100.0 * v[2],
            reports[0].n_predictions,
            reports[1].n_predictions,
            reports[2].n_predictions
        ),
    )
}

fn distribution_shift() -> Outcome {
    // Occupancy drift during training teaches the weekly booster that residuals
    // persist; the evaluation year holds one permanent step in the event.
    let start = at(2016, 1, 4, 0);
    let train_end = 2 * YEAR;
    let step = at(2018, 3, 3, 0);
    let cfg = SynthConfig {
        start,
        n_hours: 3 * YEAR,
        seed: 7,
        oscillation: Oscillation {
            amplitude_kw: 0.0,
            ..Oscillation::default()
        },
        weekly_event: WeeklyEvent {
            step_date: Some(step),
            ..WeeklyEvent::default()
        },
        level_shifts: LevelShifts {
            sigma_kw: 6.0,
            until: Some(start + Duration::hours(train_end as i64)),
            ..LevelShifts::default()
        },
        ..SynthConfig::default()
    };
    let series = generate_synthetic(&cfg);
    let fit = |config: ModelConfig| {
        let window = series.slice(0, train_end).unwrap();
        let norm = sbn_core::features::Normalizer::fit(&window, 0, window.len()).unwrap();
        let samples = build_samples(&window, &config, &norm, 0, window.len() - 1).unwrap();
        let tc = TrainConfig {
            seed: 5,
            ..TrainConfig::default()
        };
        train(SbnModel::init(config, norm, 5).unwrap(), &samples, &tc).unwrap().model
    };
    let ev = &cfg.weekly_event;
    let settled = step + Duration::weeks(3);
    let eval_start = series.timestamp(train_end);
    // MAE at the event hour before the step and from three weeks after it.
    let mae = |model: &SbnModel| {
        let report = rolling_evaluate(model, &series, &EvalConfig::new(24, train_end, 3 * YEAR)).unwrap();
        let (mut before, mut after) = (Vec::new(), Vec::new());
        for r in &report.rows {
            let ts = series.timestamp(r.hour);
            if ts.weekday() != ev.weekday || ts.hour() != ev.hour {
                continue;
            }
            let err = (r.forecasts.last().unwrap() - r.actual).abs();
            if ts >= eval_start && ts < step {
                before.push(err);
            } else if ts >= settled {
                after.push(err);
            }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        (mean(&before), mean(&after), after.len())
    };
    let (weekly_before, weekly, n) = mae(&fit(ModelConfig::from_boosters(&[StageKind::Weekly]).unwrap()));
    let (instant_before, instant, _) = mae(&fit(ModelConfig::instant_only()));
    let instant_rise = instant - instant_before;
    check(
        weekly < 3.0 && (instant_rise - ev.step_change_kw).abs() <= 3.0,
        format!(
            "MAE at {:?} {:02}:00 over {n} weeks from 3 weeks after the step: weekly {weekly:.2} kW \
             (before the step {weekly_before:.2}), instant-only {instant:.2} kW (before {instant_before:.2}, \
             rise {instant_rise:.2})",
            ev.weekday, ev.hour
        ),
    )
}

fn determinism() -> Outcome {
    let series = synthetic(1600, 120);
    let config = ModelConfig::from_boosters(&[StageKind::Weekly, StageKind::Daily]).unwrap();
    let run = || {
        let model = random_model(&series, config.clone(), 121);
        let samples = build_samples(&series, &config, &model.normalizer, 0, series.len() - 1).unwrap();
        let tc = TrainConfig {
            epochs: 2,
            seed: 122,
            ..TrainConfig::default()
        };
        let m = train(model, &samples, &tc).unwrap().model;
        (to_archive_string(&m, Some(&tc)).unwrap(), m)
    };
    let (a, model) = run();
    let (b, _) = run();
    let (back, _) = from_archive_str(&a).map_err(|e| e.to_string())?;
    let mut same_forecasts = true;
    for origin in [1200, 1400, 1500] {
        let x = forecast(&model, &series, origin, 96).unwrap();
        let y = forecast(&back, &series, origin, 96).unwrap();
        same_forecasts &= x.iter().zip(&y).all(|(p, q)| bits(&p.forecasts) == bits(&q.forecasts));
    }
    check(
        a == b && same_forecasts && bits(&back.params()) == bits(&model.params()),
        format!(
            "archives identical: {}, {} bytes; reloaded forecasts bit-identical: {same_forecasts}",
            a == b,
            a.len()
        ),
    )
}

fn schedule_and_metric() -> Outcome {
    let cfg = TrainConfig::default();
    let d = lr_schedule(&cfg, REFERENCE_BATCHES_PER_EPOCH).unwrap().per_batch_decay;
    let adam = AdamState::new(1, cfg.base_lr, d).unwrap();
    let mut worst = (d.powi(REFERENCE_BATCHES_PER_EPOCH as i32) - 0.98).abs();
    let mut lr = 0.0025;
    for b in 0..5000u64 {
        worst = worst.max((adam.effective_lr(b) - lr).abs());
        lr *= d;
    }
    // Range 2, RMSE 1.
    let half = nrmse(&[1.0, 1.0], &[0.0, 2.0]).unwrap();
    check(
        worst < 1e-12 && (half - 0.5).abs() < 1e-15,
        format!("max |lr − 0.0025·d^b| {worst:.1e} over 5000 batches, d = {d:.12}; nrmse of the 50% case {half}"),
    )
}

fn main() -> ExitCode {
    let t0 = Instant::now();
    let mut failed = 0;
    let mut report = |n: usize, name: &str, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let out = f();
        let secs = start.elapsed().as_secs_f64();
        match out {
            Ok(d) => println!("PASS criterion {n} ({name}, {secs:.1} s): {d}"),
            Err(d) => {
                failed += 1;
                println!("FAIL criterion {n} ({name}, {secs:.1} s): {d}");
            }
        }
    };
    report(1, "parameter counts", &mut table1_counts);
    report(2, "gradient correctness", &mut gradients);
    report(3, "pipeline oracle", &mut oracle_equivalence);
    let bench_start = Instant::now();
    let bench = benchmark();
    println!("benchmark sweep trained in {:.1} s", bench_start.elapsed().as_secs_f64());
    report(4, "synthetic benchmark", &mut || synthetic_benchmark(&bench));
    report(5, "distribution shift", &mut distribution_shift);
    report(6, "data-size robustness", &mut || data_size_robustness(&bench));
    report(7, "instant horizon invariance", &mut || horizon_invariance(&bench));
    report(8, "determinism and serialization", &mut determinism);
    report(9, "schedule and metric units", &mut schedule_and_metric);
    println!("acceptance: {} of 9 passed in {:.1} s", 9 - failed, t0.elapsed().as_secs_f64());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
