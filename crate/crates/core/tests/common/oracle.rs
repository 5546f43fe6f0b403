//! Straight-line forward pass of the stacked model, written from the model
//! definition without any of the library's inference machinery.

#![allow(clippy::needless_range_loop)]

use chrono::{Datelike, Timelike, Weekday};
use sbn_core::nn::DenseLayer;
use sbn_core::{HourlySeries, SbnModel};

/// `W x + b` with `W` row-major `(out, in)`.
fn affine(layer: &DenseLayer, x: &[f64]) -> Vec<f64> {
    let (n_in, n_out) = (layer.in_dim(), layer.out_dim());
    assert_eq!(x.len(), n_in);
    (0..n_out)
        .map(|o| {
            let row = &layer.weights()[o * n_in..(o + 1) * n_in];
            row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + layer.bias()[o]
        })
        .collect()
}

/// One hidden relu layer and a linear output.
fn mlp(layers: &[DenseLayer], x: &[f64]) -> f64 {
    assert_eq!(layers.len(), 2);
    let hidden: Vec<f64> = affine(&layers[0], x).into_iter().map(|v| v.max(0.0)).collect();
    affine(&layers[1], &hidden)[0]
}

fn instant(model: &SbnModel, series: &HourlySeries, t: usize) -> Option<f64> {
    if t < 12 {
        return None;
    }
    let norm = &model.normalizer;
    let mut temps = Vec::with_capacity(12);
    for h in t - 12..t {
        if !series.valid()[h] {
            return None;
        }
        temps.push((series.temperature()[h] - norm.temp_mean) / norm.temp_std);
    }
    let z = affine(&model.instant.reducer.layers()[0], &temps)[0];
    let ts = series.start() + chrono::Duration::hours(t as i64);
    let (sat, sun) = match ts.weekday() {
        Weekday::Sat => (1.0, 0.0),
        Weekday::Sun => (0.0, 1.0),
        _ => (0.0, 0.0),
    };
    let angle = std::f64::consts::TAU * ts.hour() as f64 / 24.0;
    Some(mlp(model.instant.head.layers(), &[z, sat, sun, angle.cos(), angle.sin()]))
}

/// Standardized stage forecasts, residual estimates and residuals per hour.
pub struct Oracle {
    pub yhat: Vec<Vec<Option<f64>>>,
    pub est: Vec<Vec<Option<f64>>>,
    pub rho: Vec<Vec<Option<f64>>>,
}

impl Oracle {
    /// Hours `0..end`. Actuals are used at valid hours up to `observed_until`;
    /// everywhere else a residual is the next stage's estimate of it.
    pub fn run(model: &SbnModel, series: &HourlySeries, observed_until: usize, end: usize) -> Self {
        let n = model.stages.len();
        let norm = &model.normalizer;
        let mut o = Oracle {
            yhat: vec![Vec::new(); n + 1],
            est: vec![Vec::new(); n],
            rho: vec![Vec::new(); n + 1],
        };
        for h in 0..end {
            let y0 = instant(model, series, h);
            let mut y = vec![y0];
            let mut e = Vec::new();
            for (s, stage) in model.stages.iter().enumerate() {
                let p = stage.kind.period_hours();
                let mut window = Vec::new();
                for j in (1..=stage.n_inputs).rev() {
                    match h.checked_sub(p * j).and_then(|lag| o.rho[s][lag]) {
                        Some(r) => window.push(r),
                        None => break,
                    }
                }
                let es = (window.len() == stage.n_inputs).then(|| mlp(stage.net.layers(), &window));
                let ys = match (y[s], es) {
                    (Some(a), Some(b)) => Some(a - b),
                    _ => None,
                };
                e.push(es);
                y.push(ys);
            }
            let actual = (h <= observed_until && series.valid()[h] && y0.is_some())
                .then(|| (series.energy()[h] - norm.energy_mean) / norm.energy_std);
            for s in 0..=n {
                let r = match actual {
                    Some(a) => y[s].map(|v| v - a),
                    None => e.get(s).copied().flatten(),
                };
                o.rho[s].push(r);
            }
            for s in 0..=n {
                o.yhat[s].push(y[s]);
            }
            for s in 0..n {
                o.est[s].push(e[s]);
            }
        }
        o
    }
}
