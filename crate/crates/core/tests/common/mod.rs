#![allow(dead_code)]

pub mod oracle;

use chrono::{NaiveDate, NaiveDateTime};
use sbn_core::features::Normalizer;
use sbn_core::io::{generate_synthetic, SynthConfig};
use sbn_core::features::FeatureTable;
use sbn_core::model::{GradientOptions, LossWeights, ModelConfig, SampleGraph, SamplePlan, SbnModel, StageSpec};
use sbn_core::nn::{Mode, Rng};
use sbn_core::StageKind;
use sbn_core::HourlySeries;

pub fn at(y: i32, m: u32, d: u32, h: u32) -> NaiveDateTime {
    NaiveDate::from_ymd_opt(y, m, d).unwrap().and_hms_opt(h, 0, 0).unwrap()
}

/// Default synthetic building from 2016-01-04 (a Monday).
pub fn synthetic(hours: usize, seed: u64) -> HourlySeries {
    generate_synthetic(&SynthConfig {
        start: at(2016, 1, 4, 0),
        n_hours: hours,
        seed,
        ..SynthConfig::default()
    })
}

/// Glorot-initialized model with a normalizer fitted on the whole series.
pub fn random_model(series: &HourlySeries, config: ModelConfig, seed: u64) -> SbnModel {
    let norm = Normalizer::fit(series, 0, series.len()).unwrap();
    SbnModel::init(config, norm, seed).unwrap()
}

/// Relative error with a denominator floor, so components that are zero up to
/// rounding are compared absolutely.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

pub fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

/// Adds `scale · N(0, 1)` to every parameter so biases are non-zero too.
pub fn jitter(model: &mut SbnModel, scale: f64, seed: u64) {
    let mut rng = Rng::new(seed);
    let p: Vec<f64> = model.params().iter().map(|v| v + scale * rng.normal()).collect();
    model.set_params(&p).unwrap();
}

/// Weekly booster with two inputs followed by a daily booster with seven.
pub fn demo_config() -> ModelConfig {
    ModelConfig {
        stages: vec![
            StageSpec {
                kind: StageKind::Weekly,
                n_inputs: 2,
            },
            StageSpec {
                kind: StageKind::Daily,
                n_inputs: 7,
            },
        ],
        ..ModelConfig::instant_only()
    }
}

pub fn full_config() -> ModelConfig {
    ModelConfig::from_boosters(&StageKind::ALL).unwrap()
}

/// Largest relative error between the backpropagated gradient of the weighted
/// sample loss at `target` and central finite differences. Dropout must be off.
pub fn gradient_error(model: &SbnModel, table: &FeatureTable, target: usize, weights: &LossWeights) -> f64 {
    const H: f64 = 1e-6;
    const FLOOR: f64 = 1e-4;
    let plan = SamplePlan::new(model.config());
    let mut rng = Rng::new(0);
    let g = SampleGraph::forward(model, &plan, table, target, Mode::Train, &mut rng).unwrap();
    let y = g.target_actual();
    let out_grads: Vec<f64> = g.outputs().iter().zip(&weights.0).map(|(o, w)| 2.0 * w * (o - y)).collect();
    let mut grads = vec![0.0; model.parameter_count()];
    g.backward(model, &plan, &out_grads, GradientOptions::default(), &mut grads).unwrap();

    let p = model.params();
    let mut probe = model.clone();
    let mut loss_at = |params: &[f64]| {
        probe.set_params(params).unwrap();
        let g = SampleGraph::forward(&probe, &plan, table, target, Mode::Infer, &mut rng).unwrap();
        weights.loss(&g.outputs(), g.target_actual())
    };
    let mut worst = 0.0f64;
    let mut q = p.clone();
    for k in 0..p.len() {
        q[k] = p[k] + H;
        let up = loss_at(&q);
        q[k] = p[k] - H;
        let down = loss_at(&q);
        q[k] = p[k];
        worst = worst.max(rel_err(grads[k], (up - down) / (2.0 * H), FLOOR));
    }
    worst
}
