use super::error::{NnError, Result};

pub const DEFAULT_BETA1: f64 = 0.9;
pub const DEFAULT_BETA2: f64 = 0.999;
pub const DEFAULT_EPSILON: f64 = 1e-7;

/// Adam moments plus an exponential per-step learning-rate decay.
///
/// The learning rate used for step `t` (zero-based) is
/// `base_lr * per_batch_decay^t`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    base_lr: f64,
    per_batch_decay: f64,
}

impl AdamState {
    pub fn new(n_params: usize, base_lr: f64, per_batch_decay: f64) -> Result<Self> {
        if !(base_lr > 0.0 && base_lr.is_finite()) {
            return Err(NnError::Config(format!("learning rate must be positive, got {base_lr}")));
        }
        if !(per_batch_decay > 0.0 && per_batch_decay <= 1.0) {
            return Err(NnError::Config(format!(
                "per-batch decay must lie in (0, 1], got {per_batch_decay}"
            )));
        }
        Ok(Self {
            t: 0,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            beta1: DEFAULT_BETA1,
            beta2: DEFAULT_BETA2,
            epsilon: DEFAULT_EPSILON,
            base_lr,
            per_batch_decay,
        })
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.m
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.v
    }

    pub fn base_lr(&self) -> f64 {
        self.base_lr
    }

    pub fn per_batch_decay(&self) -> f64 {
        self.per_batch_decay
    }

    /// Learning rate applied at zero-based step `b`.
    pub fn effective_lr(&self, b: u64) -> f64 {
        self.base_lr * self.per_batch_decay.powf(b as f64)
    }

    /// Learning rate the next call to [`adam_step`] will use.
    pub fn current_lr(&self) -> f64 {
        self.effective_lr(self.t)
    }
}

/// One bias-corrected Adam update on every parameter with `trainable[i]` set
/// (all parameters when `trainable` is `None`).
///
/// Non-finite gradients leave parameters and state untouched.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    trainable: Option<&[bool]>,
) -> Result<()> {
    if params.len() != state.m.len() || grads.len() != params.len() {
        return Err(NnError::Config(format!(
            "optimizer tracks {} parameters, got {} params and {} grads",
            state.m.len(),
            params.len(),
            grads.len()
        )));
    }
    if let Some(mask) = trainable {
        if mask.len() != params.len() {
            return Err(NnError::Config("trainable mask length mismatch".into()));
        }
    }
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(NnError::Numeric(format!("non-finite gradient at parameter {i}")));
    }
    let lr = state.current_lr();
    let step = state.t + 1;
    let bc1 = 1.0 - state.beta1.powf(step as f64);
    let bc2 = 1.0 - state.beta2.powf(step as f64);
    let (b1, b2, eps) = (state.beta1, state.beta2, state.epsilon);
    for i in 0..params.len() {
        if trainable.is_some_and(|mask| !mask[i]) {
            continue;
        }
        let g = grads[i];
        let m = b1 * state.m[i] + (1.0 - b1) * g;
        let v = b2 * state.v[i] + (1.0 - b2) * g * g;
        state.m[i] = m;
        state.v[i] = v;
        let m_hat = m / bc1;
        let v_hat = v / bc2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    state.t = step;
    Ok(())
}
