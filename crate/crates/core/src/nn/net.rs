use super::error::{NnError, Result};
use super::layer::{Activation, DenseLayer};
use super::matrix::Matrix;
use super::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// A unit is dropped when its 32-bit draw falls below this threshold, so the
/// drop probability is `rate` to within 2⁻³².
fn drop_threshold(rate: f64) -> u64 {
    (rate * 4_294_967_296.0).ceil() as u64
}

/// Pre-activations for every row. Accumulates in the same order as
/// `DenseLayer::affine_into`, so batched and single-row passes agree bitwise.
fn layer_affine(layer: &DenseLayer, x: &Matrix) -> Matrix {
    let (in_dim, out_dim) = (layer.in_dim(), layer.out_dim());
    let mut pre = Matrix::zeros(x.rows(), out_dim);
    if out_dim == 1 {
        for r in 0..x.rows() {
            layer.affine_into(x.row(r), pre.row_mut(r));
        }
        return pre;
    }
    let w = layer.weights();
    let mut wt = vec![0.0; in_dim * out_dim];
    for o in 0..out_dim {
        for i in 0..in_dim {
            wt[i * out_dim + o] = w[o * in_dim + i];
        }
    }
    let bias = layer.bias();
    for r in 0..x.rows() {
        let xr = x.row(r);
        let z = pre.row_mut(r);
        for (i, &xi) in xr.iter().enumerate() {
            for (zo, &wo) in z.iter_mut().zip(&wt[i * out_dim..(i + 1) * out_dim]) {
                *zo += wo * xi;
            }
        }
        for (zo, b) in z.iter_mut().zip(bias) {
            *zo += b;
        }
    }
    pre
}

/// Stack of dense layers whose dimensions chain.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet {
    layers: Vec<DenseLayer>,
}

#[derive(Debug, Clone)]
struct LayerCache {
    input: Matrix,
    pre: Matrix,
    /// Kept units and their scale 1/(1-rate), applied after the activation.
    mask: Option<(Vec<bool>, f64)>,
}

/// Activations recorded by a batched forward pass, consumed by the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    rows: usize,
    layers: Vec<LayerCache>,
}

impl ForwardCache {
    pub fn rows(&self) -> usize {
        self.rows
    }
}

impl DenseNet {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(NnError::Config("network needs at least one layer".into()));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(NnError::Config(format!(
                    "layer {i} outputs {} values but layer {} expects {}",
                    pair[0].out_dim(),
                    i + 1,
                    pair[1].in_dim()
                )));
            }
        }
        Ok(Self { layers })
    }

    /// Relu hidden layers with dropout, linear output layer, all zero-initialized.
    pub fn mlp(in_dim: usize, hidden: &[usize], out_dim: usize, dropout: f64) -> Result<Self> {
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut prev = in_dim;
        for &h in hidden {
            layers.push(DenseLayer::new(prev, h, Activation::Relu, dropout)?);
            prev = h;
        }
        layers.push(DenseLayer::new(prev, out_dim, Activation::Linear, 0.0)?);
        Self::new(layers)
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(DenseLayer::parameter_count).sum()
    }

    /// Writes all parameters, layer by layer, into `out[..parameter_count]`.
    pub fn write_params(&self, out: &mut [f64]) {
        let mut off = 0;
        for layer in &self.layers {
            let n = layer.parameter_count();
            layer.write_params(&mut out[off..off + n]);
            off += n;
        }
    }

    pub fn read_params(&mut self, src: &[f64]) {
        let mut off = 0;
        for layer in &mut self.layers {
            let n = layer.parameter_count();
            layer.read_params(&src[off..off + n]);
            off += n;
        }
    }

    pub fn params(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.parameter_count()];
        self.write_params(&mut out);
        out
    }

    pub fn forward_batch(&self, x: &Matrix, mode: Mode, rng: &mut Rng) -> Result<(Matrix, ForwardCache)> {
        if x.cols() != self.in_dim() {
            return Err(NnError::Config(format!(
                "input has {} columns, network expects {}",
                x.cols(),
                self.in_dim()
            )));
        }
        if let Some(bad) = x.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(NnError::Numeric(format!(
                "non-finite input at row {} column {}",
                bad / x.cols(),
                bad % x.cols()
            )));
        }
        let rows = x.rows();
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut current = x.clone();
        let mut draws = Vec::new();
        for layer in &self.layers {
            let pre = layer_affine(layer, &current);
            let act = layer.activation();
            let mut out = Matrix::from_vec(
                rows,
                layer.out_dim(),
                pre.as_slice().iter().map(|&z| act.apply(z)).collect(),
            );
            let mask = if mode == Mode::Train && layer.dropout() > 0.0 {
                let keep_scale = 1.0 / (1.0 - layer.dropout());
                let threshold = drop_threshold(layer.dropout());
                draws.resize(out.as_slice().len(), 0u32);
                rng.fill_u32(&mut draws);
                let keep: Vec<bool> = draws.iter().map(|&u| u64::from(u) >= threshold).collect();
                for (o, &k) in out.as_mut_slice().iter_mut().zip(&keep) {
                    *o *= if k { keep_scale } else { 0.0 };
                }
                Some((keep, keep_scale))
            } else {
                None
            };
            caches.push(LayerCache {
                input: current,
                pre,
                mask,
            });
            current = out;
        }
        Ok((current, ForwardCache { rows, layers: caches }))
    }

    /// Accumulates parameter gradients into `grads[..parameter_count]` and
    /// returns the gradient with respect to the input rows.
    pub fn backward_batch(&self, cache: &ForwardCache, dy: &Matrix, grads: &mut [f64]) -> Result<Matrix> {
        if cache.layers.len() != self.layers.len()
            || dy.rows() != cache.rows
            || dy.cols() != self.out_dim()
            || grads.len() < self.parameter_count()
        {
            return Err(NnError::Config("forward cache does not match network".into()));
        }
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut off = 0;
        for layer in &self.layers {
            offsets.push(off);
            off += layer.parameter_count();
        }
        let mut upstream = dy.clone();
        for (li, layer) in self.layers.iter().enumerate().rev() {
            let lc = &cache.layers[li];
            if lc.input.cols() != layer.in_dim() || lc.pre.cols() != layer.out_dim() {
                return Err(NnError::Config(format!("cache layer {li} shape mismatch")));
            }
            let (in_dim, out_dim) = (layer.in_dim(), layer.out_dim());
            let act = layer.activation();
            let mut dz = upstream;
            {
                let dzs = dz.as_mut_slice();
                if let Some((keep, scale)) = &lc.mask {
                    for (g, &k) in dzs.iter_mut().zip(keep) {
                        *g *= if k { *scale } else { 0.0 };
                    }
                }
                for (g, &z) in dzs.iter_mut().zip(lc.pre.as_slice()) {
                    *g *= act.derivative(z);
                }
            }
            let base = offsets[li];
            let (gw, rest) = grads[base..base + layer.parameter_count()].split_at_mut(in_dim * out_dim);
            let gb = &mut rest[..out_dim];
            let weights = layer.weights();
            let mut dx = Matrix::zeros(cache.rows, in_dim);
            if out_dim == 1 {
                for r in 0..cache.rows {
                    let g = dz.row(r)[0];
                    if g == 0.0 {
                        continue;
                    }
                    gb[0] += g;
                    let x = lc.input.row(r);
                    for ((gwi, dxi), (&xi, &wi)) in gw.iter_mut().zip(dx.row_mut(r)).zip(x.iter().zip(weights)) {
                        *gwi += g * xi;
                        *dxi += g * wi;
                    }
                }
            } else {
                let mut wt = vec![0.0; in_dim * out_dim];
                for o in 0..out_dim {
                    for i in 0..in_dim {
                        wt[i * out_dim + o] = weights[o * in_dim + i];
                    }
                }
                let mut gwt = vec![0.0; in_dim * out_dim];
                for r in 0..cache.rows {
                    let dzr = dz.row(r);
                    for (b, g) in gb.iter_mut().zip(dzr) {
                        *b += g;
                    }
                    let x = lc.input.row(r);
                    let dxr = dx.row_mut(r);
                    for i in 0..in_dim {
                        let xi = x[i];
                        let span = i * out_dim..(i + 1) * out_dim;
                        let mut acc = 0.0;
                        for ((gv, &g), &w) in gwt[span.clone()].iter_mut().zip(dzr).zip(&wt[span]) {
                            *gv += g * xi;
                            acc += g * w;
                        }
                        dxr[i] = acc;
                    }
                }
                for o in 0..out_dim {
                    for i in 0..in_dim {
                        gw[o * in_dim + i] += gwt[i * out_dim + o];
                    }
                }
            }
            upstream = dx;
        }
        Ok(upstream)
    }

    /// Inference-mode forward pass for one input vector.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.in_dim() {
            return Err(NnError::Config(format!(
                "input has length {}, network expects {}",
                x.len(),
                self.in_dim()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(NnError::Numeric("non-finite input".into()));
        }
        let mut current = x.to_vec();
        for layer in &self.layers {
            let mut z = vec![0.0; layer.out_dim()];
            layer.affine_into(&current, &mut z);
            let act = layer.activation();
            z.iter_mut().for_each(|v| *v = act.apply(*v));
            current = z;
        }
        Ok(current)
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights().iter().chain(l.bias()).all(|v| v.is_finite()))
    }
}

/// Single-vector forward pass.
pub fn dense_forward(net: &DenseNet, x: &[f64], mode: Mode, rng: &mut Rng) -> Result<(Vec<f64>, ForwardCache)> {
    if x.len() != net.in_dim() {
        return Err(NnError::Config(format!(
            "input has length {}, network expects {}",
            x.len(),
            net.in_dim()
        )));
    }
    let (y, cache) = net.forward_batch(&Matrix::row_vector(x), mode, rng)?;
    Ok((y.into_vec(), cache))
}

/// Single-vector backward pass. Returns `(dx, grads)` with grads in the flat
/// parameter layout of `net`.
pub fn dense_backward(net: &DenseNet, cache: &ForwardCache, dy: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if cache.rows != 1 {
        return Err(NnError::Config("cache holds a batch, not a single vector".into()));
    }
    let mut grads = vec![0.0; net.parameter_count()];
    let dx = net.backward_batch(cache, &Matrix::row_vector(dy), &mut grads)?;
    Ok((dx.into_vec(), grads))
}

/// Glorot-uniform weights and zero biases for every layer.
pub fn init_glorot(net: &mut DenseNet, rng: &mut Rng) {
    for layer in net.layers_mut() {
        let limit = (6.0 / (layer.in_dim() + layer.out_dim()) as f64).sqrt();
        for w in layer.weights_mut() {
            *w = rng.uniform_range(-limit, limit);
        }
        layer.bias_mut().fill(0.0);
    }
}
