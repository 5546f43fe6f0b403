//! One training sample as a differentiable graph.
//!
//! For a target hour `t`, every stage output `ŷ_s` is needed at a set of
//! offsets (hours before `t`): the final stage only at offset 0, and stage
//! `s−1` additionally wherever stage `s` reads a residual. All historical
//! residuals are teacher-forced from actuals, and each hour appears once per
//! stage, so an hour reused by several windows shares one forward pass and
//! one dropout mask.

use std::collections::BTreeSet;

use crate::features::{FeatureTable, CALENDAR_INPUTS, TEMP_WINDOW};
use crate::nn::{ForwardCache, Matrix, Mode, Rng};

use super::{ModelConfig, ModelError, SbnModel};

/// Static offset layout of a sample graph for one model configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePlan {
    /// `need[s]`: ascending offsets where `ŷ_s` is evaluated; always starts with 0.
    need: Vec<Vec<usize>>,
    /// Per stage `s ≥ 1`: position in `need[s−1]` of each row's own offset.
    self_pos: Vec<Vec<usize>>,
    /// Per stage `s ≥ 1`: row-major `(rows, n_inputs)` positions in `need[s−1]`.
    window_pos: Vec<Vec<usize>>,
    /// Per stage: position in `need[0]` of each offset of `need[s]`.
    root_pos: Vec<Vec<usize>>,
    n_inputs: Vec<usize>,
}

fn position(sorted: &[usize], value: usize) -> usize {
    sorted.binary_search(&value).expect("offset present by construction")
}

impl SamplePlan {
    pub fn new(config: &ModelConfig) -> Self {
        let s_count = config.stages.len();
        let mut need: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); s_count + 1];
        need[s_count].insert(0);
        for s in (1..=s_count).rev() {
            let spec = config.stages[s - 1];
            let p = spec.kind.period_hours();
            let mut below: BTreeSet<usize> = need[s].clone();
            for &o in &need[s] {
                for j in 1..=spec.n_inputs {
                    below.insert(o + p * j);
                }
            }
            need[s - 1] = below;
        }
        let need: Vec<Vec<usize>> = need.into_iter().map(|s| s.into_iter().collect()).collect();
        let mut self_pos = Vec::with_capacity(s_count);
        let mut window_pos = Vec::with_capacity(s_count);
        for s in 1..=s_count {
            let spec = config.stages[s - 1];
            let p = spec.kind.period_hours();
            let below = &need[s - 1];
            self_pos.push(need[s].iter().map(|&o| position(below, o)).collect());
            let mut wp = Vec::with_capacity(need[s].len() * spec.n_inputs);
            for &o in &need[s] {
                for j in (1..=spec.n_inputs).rev() {
                    wp.push(position(below, o + p * j));
                }
            }
            window_pos.push(wp);
        }
        let root_pos = need.iter().map(|n| n.iter().map(|&o| position(&need[0], o)).collect()).collect();
        Self {
            need,
            self_pos,
            window_pos,
            root_pos,
            n_inputs: config.stages.iter().map(|s| s.n_inputs).collect(),
        }
    }

    pub fn stage_count(&self) -> usize {
        self.need.len() - 1
    }

    /// Offsets at which the instant forecaster runs: every hour the sample reads.
    pub fn offsets(&self) -> &[usize] {
        &self.need[0]
    }

    /// Offsets at which `ŷ_stage` is evaluated.
    pub fn stage_offsets(&self, stage: usize) -> &[usize] {
        &self.need[stage]
    }

    pub fn lag_depth(&self) -> usize {
        *self.need[0].last().expect("need[0] is never empty")
    }

    /// Hours whose actual energy the sample reads (target and all residual lags).
    pub fn hours(&self, target: usize) -> impl Iterator<Item = usize> + '_ {
        self.need[0].iter().map(move |&o| target - o)
    }

    /// Every hour the sample touches, including temperature history.
    pub fn footprint(&self, target: usize) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        for h in self.hours(target) {
            out.insert(h);
            for k in 1..=TEMP_WINDOW {
                if let Some(v) = h.checked_sub(k) {
                    out.insert(v);
                }
            }
        }
        out
    }

    /// All referenced hours exist and are observed.
    pub fn is_feasible(&self, table: &FeatureTable, target: usize) -> bool {
        target >= self.lag_depth() && target < table.len() && self.hours(target).all(|h| table.observed(h))
    }
}

/// Weight of each stage output in the training loss.
#[derive(Debug, Clone, PartialEq)]
pub struct LossWeights(pub Vec<f64>);

impl LossWeights {
    /// `earlier` on every output but the last, `last` on the last.
    pub fn joint(n_outputs: usize, earlier: f64, last: f64) -> Self {
        let mut w = vec![earlier; n_outputs];
        if let Some(l) = w.last_mut() {
            *l = last;
        }
        Self(w)
    }

    /// Weighted squared error of one sample.
    pub fn loss(&self, outputs: &[f64], actual: f64) -> f64 {
        self.0
            .iter()
            .zip(outputs)
            .map(|(w, y)| w * (y - actual) * (y - actual))
            .sum()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GradientOptions {
    /// Treat residual windows as constants (no gradient into historical forecasts).
    pub stop_history: bool,
}

/// Forward activations of one sample, enough to run the backward pass.
#[derive(Debug, Clone)]
pub struct SampleGraph {
    target: usize,
    actual: Vec<f64>,
    reducer_cache: ForwardCache,
    head_cache: ForwardCache,
    stage_caches: Vec<ForwardCache>,
    yhat: Vec<Vec<f64>>,
    est: Vec<Vec<f64>>,
}

impl SampleGraph {
    pub fn forward(
        model: &SbnModel,
        plan: &SamplePlan,
        table: &FeatureTable,
        target: usize,
        mode: Mode,
        rng: &mut Rng,
    ) -> Result<Self, ModelError> {
        if plan.stage_count() != model.stages.len() {
            return Err(ModelError::Config("sample plan built for a different model".into()));
        }
        if target < plan.lag_depth() {
            return Err(ModelError::Unavailable(target));
        }
        let offsets = plan.offsets();
        let rows = offsets.len();
        let mut temps = Matrix::zeros(rows, TEMP_WINDOW);
        let mut actual = Vec::with_capacity(rows);
        let mut calendar = Vec::with_capacity(rows * CALENDAR_INPUTS);
        for (r, &o) in offsets.iter().enumerate() {
            let h = target - o;
            let f = table.features(h).ok_or(ModelError::Unavailable(h))?;
            let y = table.actual(h).ok_or(ModelError::Unavailable(h))?;
            temps.row_mut(r).copy_from_slice(&f[..TEMP_WINDOW]);
            calendar.extend_from_slice(&f[TEMP_WINDOW..]);
            actual.push(y);
        }
        let (z, reducer_cache) = model.instant.reducer.forward_batch(&temps, mode, rng)?;
        let mut head_in = Matrix::zeros(rows, 1 + CALENDAR_INPUTS);
        for r in 0..rows {
            let row = head_in.row_mut(r);
            row[0] = z.as_slice()[r];
            row[1..].copy_from_slice(&calendar[r * CALENDAR_INPUTS..(r + 1) * CALENDAR_INPUTS]);
        }
        let (y0, head_cache) = model.instant.head.forward_batch(&head_in, mode, rng)?;

        let mut yhat = vec![y0.into_vec()];
        let mut est = Vec::with_capacity(model.stages.len());
        let mut stage_caches = Vec::with_capacity(model.stages.len());
        for (si, stage) in model.stages.iter().enumerate() {
            let s = si + 1;
            let prev = &yhat[s - 1];
            let rho: Vec<f64> = prev
                .iter()
                .zip(&plan.root_pos[s - 1])
                .map(|(y, &rp)| y - actual[rp])
                .collect();
            let n = plan.n_inputs[si];
            let rows_s = plan.need[s].len();
            let window = Matrix::from_vec(rows_s, n, plan.window_pos[si].iter().map(|&p| rho[p]).collect());
            let (e, cache) = stage.net.forward_batch(&window, mode, rng)?;
            let e = e.into_vec();
            let cur: Vec<f64> = plan.self_pos[si].iter().zip(&e).map(|(&p, ei)| prev[p] - ei).collect();
            stage_caches.push(cache);
            est.push(e);
            yhat.push(cur);
        }
        Ok(Self {
            target,
            actual,
            reducer_cache,
            head_cache,
            stage_caches,
            yhat,
            est,
        })
    }

    pub fn target(&self) -> usize {
        self.target
    }

    /// Standardized actual at the target hour.
    pub fn target_actual(&self) -> f64 {
        self.actual[0]
    }

    /// `ŷ₀ … ŷ_S` at the target hour.
    pub fn outputs(&self) -> Vec<f64> {
        self.yhat.iter().map(|y| y[0]).collect()
    }

    /// `ê₁ … ê_S` at the target hour.
    pub fn residual_estimates(&self) -> Vec<f64> {
        self.est.iter().map(|e| e[0]).collect()
    }

    /// Accumulates `Σ_s output_grads[s] · ∂ŷ_s/∂θ` into `grads` (flat model layout).
    pub fn backward(
        &self,
        model: &SbnModel,
        plan: &SamplePlan,
        output_grads: &[f64],
        opts: GradientOptions,
        grads: &mut [f64],
    ) -> Result<(), ModelError> {
        if output_grads.len() != self.yhat.len() || grads.len() != model.parameter_count() {
            return Err(ModelError::Config("gradient buffer does not match model".into()));
        }
        let offsets = model.param_offsets();
        let mut gy: Vec<Vec<f64>> = self.yhat.iter().map(|y| vec![0.0; y.len()]).collect();
        for (g, &og) in gy.iter_mut().zip(output_grads) {
            g[0] += og;
        }
        for (si, stage) in model.stages.iter().enumerate().rev() {
            let s = si + 1;
            let (lower, upper) = gy.split_at_mut(s);
            let below = &mut lower[s - 1];
            let cur = &upper[0];
            let ge = Matrix::from_vec(cur.len(), 1, cur.iter().map(|g| -g).collect());
            for (&p, &g) in plan.self_pos[si].iter().zip(cur) {
                below[p] += g;
            }
            let lo = offsets[2 + si];
            let hi = lo + stage.parameter_count();
            let gwin = stage.net.backward_batch(&self.stage_caches[si], &ge, &mut grads[lo..hi])?;
            if !opts.stop_history {
                for (&p, &g) in plan.window_pos[si].iter().zip(gwin.as_slice()) {
                    below[p] += g;
                }
            }
        }
        let rows = gy[0].len();
        let dy0 = Matrix::from_vec(rows, 1, std::mem::take(&mut gy[0]));
        let (head_lo, head_hi) = (offsets[1], offsets[1] + model.instant.head.parameter_count());
        let du = model
            .instant
            .head
            .backward_batch(&self.head_cache, &dy0, &mut grads[head_lo..head_hi])?;
        let dz = Matrix::from_vec(rows, 1, (0..rows).map(|r| du.row(r)[0]).collect());
        let red_hi = model.instant.reducer.parameter_count();
        model
            .instant
            .reducer
            .backward_batch(&self.reducer_cache, &dz, &mut grads[..red_hi])?;
        Ok(())
    }
}
