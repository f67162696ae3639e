use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
}

/// Shape and initialization recipe of a fully connected network.
///
/// Hidden layers use `activation`; the output layer is linear. Hidden weights
/// are orthogonal with gain sqrt(2); the output layer is orthogonal with gain
/// `final_gain` unless `zero_final_layer` is set, in which case its weights
/// and biases are exactly zero. Biases always start at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub output_dim: usize,
    pub activation: Activation,
    pub zero_final_layer: bool,
    pub final_gain: f64,
}

pub const DEFAULT_HIDDEN: [usize; 2] = [64, 64];
pub const ACTOR_FINAL_GAIN: f64 = 0.01;
pub const CRITIC_FINAL_GAIN: f64 = 1.0;
const HIDDEN_GAIN: f64 = std::f64::consts::SQRT_2;

impl MlpSpec {
    /// Actor-style spec: two hidden layers of 64, small-gain output layer.
    pub fn new(input_dim: usize, output_dim: usize) -> Self {
        MlpSpec {
            input_dim,
            hidden_dims: DEFAULT_HIDDEN.to_vec(),
            output_dim,
            activation: Activation::Tanh,
            zero_final_layer: false,
            final_gain: ACTOR_FINAL_GAIN,
        }
    }

    pub fn critic(input_dim: usize) -> Self {
        MlpSpec {
            final_gain: CRITIC_FINAL_GAIN,
            ..MlpSpec::new(input_dim, 1)
        }
    }

    pub fn with_hidden(mut self, hidden: &[usize]) -> Self {
        self.hidden_dims = hidden.to_vec();
        self
    }

    pub fn with_zero_final_layer(mut self) -> Self {
        self.zero_final_layer = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden_dims.contains(&0) {
            return Err(Error::invalid(format!(
                "all layer widths must be >= 1, got {} -> {:?} -> {}",
                self.input_dim, self.hidden_dims, self.output_dim
            )));
        }
        Ok(())
    }

    pub fn layers(&self) -> Vec<LayerShape> {
        let mut dims = Vec::with_capacity(self.hidden_dims.len() + 2);
        dims.push(self.input_dim);
        dims.extend_from_slice(&self.hidden_dims);
        dims.push(self.output_dim);
        dims.windows(2)
            .map(|w| LayerShape {
                inputs: w[0],
                outputs: w[1],
            })
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers().iter().map(LayerShape::param_count).sum()
    }
}

/// One affine layer. Weights are row-major `(outputs, inputs)`, followed by
/// `outputs` biases.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerShape {
    pub inputs: usize,
    pub outputs: usize,
}

impl LayerShape {
    pub fn param_count(&self) -> usize {
        self.inputs * self.outputs + self.outputs
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Flat parameter store plus the layer layout needed to interpret it.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    values: Vec<f64>,
    layout: Vec<LayerShape>,
}

impl ParamVector {
    pub fn zeros(layout: Vec<LayerShape>) -> Self {
        let n = layout.iter().map(LayerShape::param_count).sum();
        ParamVector {
            values: vec![0.0; n],
            layout,
        }
    }

    pub fn from_values(layout: Vec<LayerShape>, values: Vec<f64>) -> Result<Self> {
        let n: usize = layout.iter().map(LayerShape::param_count).sum();
        if values.len() != n {
            return Err(Error::invalid(format!(
                "layout needs {n} parameters, got {}",
                values.len()
            )));
        }
        Ok(ParamVector { values, layout })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn layout(&self) -> &[LayerShape] {
        &self.layout
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn unflatten(&self) -> Vec<LayerParams> {
        let mut offset = 0;
        self.layout
            .iter()
            .map(|shape| {
                let nw = shape.inputs * shape.outputs;
                let weights = self.values[offset..offset + nw].to_vec();
                let bias = self.values[offset + nw..offset + nw + shape.outputs].to_vec();
                offset += shape.param_count();
                LayerParams { weights, bias }
            })
            .collect()
    }

    pub fn flatten(layout: Vec<LayerShape>, layers: &[LayerParams]) -> Result<Self> {
        if layout.len() != layers.len() {
            return Err(Error::invalid("layer count does not match layout"));
        }
        let mut values = Vec::new();
        for (shape, layer) in layout.iter().zip(layers) {
            if layer.weights.len() != shape.inputs * shape.outputs
                || layer.bias.len() != shape.outputs
            {
                return Err(Error::invalid("layer parameters do not match layout"));
            }
            values.extend_from_slice(&layer.weights);
            values.extend_from_slice(&layer.bias);
        }
        ParamVector::from_values(layout, values)
    }
}

/// Cached layer outputs of a batched forward pass, needed by [`backward`].
///
/// `outputs[0]` is the input batch; `outputs[l + 1]` is the post-activation
/// output of layer `l`. The last entry holds the network outputs.
#[derive(Debug, Clone)]
pub struct Activations {
    pub rows: usize,
    outputs: Vec<Vec<f64>>,
}

impl Activations {
    pub fn output(&self) -> &[f64] {
        self.outputs.last().expect("at least the input is cached")
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let out = self.output();
        let width = out.len() / self.rows.max(1);
        &out[r * width..(r + 1) * width]
    }
}

/// Below this inner or outer size, packing for the blocked kernel costs more
/// than it saves.
const SMALL_DIM: usize = 4;

#[allow(clippy::too_many_arguments)]
fn small_gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_strides: (isize, isize),
    b: &[f64],
    b_strides: (isize, isize),
    beta: f64,
    c: &mut [f64],
) {
    let (as0, as1) = (a_strides.0 as usize, a_strides.1 as usize);
    let (bs0, bs1) = (b_strides.0 as usize, b_strides.1 as usize);
    for i in 0..m {
        let row = &mut c[i * n..(i + 1) * n];
        if beta == 0.0 {
            row.fill(0.0);
        } else if beta != 1.0 {
            row.iter_mut().for_each(|v| *v *= beta);
        }
        for p in 0..k {
            let aip = a[i * as0 + p * as1];
            if bs1 == 1 {
                let brow = &b[p * bs0..p * bs0 + n];
                for (v, bv) in row.iter_mut().zip(brow) {
                    *v += aip * bv;
                }
            } else {
                for (j, v) in row.iter_mut().enumerate() {
                    *v += aip * b[p * bs0 + j * bs1];
                }
            }
        }
    }
}

/// One-hot style inputs are multiplied by skipping zeros.
fn mostly_zero(x: &[f64]) -> bool {
    x.len() >= 16 && x.iter().filter(|v| **v != 0.0).count() * 4 < x.len()
}

/// `c (m x n) = beta * c + a (m x k) * b (k x n)` on strided row-major views.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_strides: (isize, isize),
    b: &[f64],
    b_strides: (isize, isize),
    beta: f64,
    c: &mut [f64],
) {
    assert!(m * n <= c.len());
    if m.min(k).min(n) <= SMALL_DIM {
        small_gemm(m, k, n, a, a_strides, b, b_strides, beta, c);
        return;
    }
    // SAFETY: callers pass slices covering the full strided extents; the
    // asserts above and in the callers pin the shapes.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            a_strides.0,
            a_strides.1,
            b.as_ptr(),
            b_strides.0,
            b_strides.1,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

pub fn forward_batch(
    spec: &MlpSpec,
    params: &[f64],
    inputs: &[f64],
    rows: usize,
) -> Result<Activations> {
    if inputs.len() != rows * spec.input_dim {
        return Err(Error::invalid(format!(
            "expected {rows} x {} inputs, got {} values",
            spec.input_dim,
            inputs.len()
        )));
    }
    if params.len() != spec.param_count() {
        return Err(Error::invalid(format!(
            "expected {} parameters, got {}",
            spec.param_count(),
            params.len()
        )));
    }
    let layers = spec.layers();
    let mut outputs = Vec::with_capacity(layers.len() + 1);
    outputs.push(inputs.to_vec());
    let mut offset = 0;
    for (l, shape) in layers.iter().enumerate() {
        let nw = shape.inputs * shape.outputs;
        let weights = &params[offset..offset + nw];
        let bias = &params[offset + nw..offset + nw + shape.outputs];
        offset += shape.param_count();

        let x = outputs.last().unwrap();
        let mut y = vec![0.0; rows * shape.outputs];
        if l == 0 && mostly_zero(x) {
            for (xr, yr) in x.chunks(shape.inputs).zip(y.chunks_mut(shape.outputs)) {
                for (j, &v) in xr.iter().enumerate().filter(|(_, v)| **v != 0.0) {
                    for (o, yv) in yr.iter_mut().enumerate() {
                        *yv += v * weights[o * shape.inputs + j];
                    }
                }
            }
        } else {
            // y = x * W^T
            gemm(
                rows,
                shape.inputs,
                shape.outputs,
                x,
                (shape.inputs as isize, 1),
                weights,
                (1, shape.inputs as isize),
                0.0,
                &mut y,
            );
        }
        let hidden = l + 1 < layers.len();
        for row in y.chunks_mut(shape.outputs) {
            for (v, b) in row.iter_mut().zip(bias) {
                *v += b;
                if hidden {
                    *v = match spec.activation {
                        Activation::Tanh => v.tanh(),
                    };
                }
            }
        }
        if let Some(bad) = y.iter().find(|v| !v.is_finite()) {
            return Err(Error::Numeric {
                layer: l,
                context: format!("forward produced {bad}"),
            });
        }
        outputs.push(y);
    }
    Ok(Activations { rows, outputs })
}

/// Accumulates `d loss / d params` into `grad` given `d loss / d outputs`.
pub fn backward(
    spec: &MlpSpec,
    params: &[f64],
    acts: &Activations,
    d_out: &[f64],
    grad: &mut [f64],
) -> Result<()> {
    let layers = spec.layers();
    let rows = acts.rows;
    if d_out.len() != rows * spec.output_dim {
        return Err(Error::invalid("output gradient has the wrong shape"));
    }
    if grad.len() != params.len() {
        return Err(Error::invalid("gradient buffer has the wrong length"));
    }
    let mut offsets = Vec::with_capacity(layers.len());
    let mut o = 0;
    for shape in &layers {
        offsets.push(o);
        o += shape.param_count();
    }

    let mut delta = d_out.to_vec();
    for l in (0..layers.len()).rev() {
        let shape = layers[l];
        let off = offsets[l];
        let nw = shape.inputs * shape.outputs;
        if l + 1 < layers.len() {
            // delta currently holds d/d(post-activation); move through tanh
            let y = &acts.outputs[l + 1];
            for (d, yv) in delta.iter_mut().zip(y) {
                *d *= 1.0 - yv * yv;
            }
        }
        if let Some(bad) = delta.iter().find(|v| !v.is_finite()) {
            return Err(Error::Numeric {
                layer: l,
                context: format!("backward produced {bad}"),
            });
        }
        let x = &acts.outputs[l];
        if l == 0 && mostly_zero(x) {
            let gw = &mut grad[off..off + nw];
            for (xr, dr) in x.chunks(shape.inputs).zip(delta.chunks(shape.outputs)) {
                for (j, &v) in xr.iter().enumerate().filter(|(_, v)| **v != 0.0) {
                    for (o, d) in dr.iter().enumerate() {
                        gw[o * shape.inputs + j] += d * v;
                    }
                }
            }
        } else {
            // dW += delta^T * x
            gemm(
                shape.outputs,
                rows,
                shape.inputs,
                &delta,
                (1, shape.outputs as isize),
                x,
                (shape.inputs as isize, 1),
                1.0,
                &mut grad[off..off + nw],
            );
        }
        let gb = &mut grad[off + nw..off + nw + shape.outputs];
        for row in delta.chunks(shape.outputs) {
            for (g, d) in gb.iter_mut().zip(row) {
                *g += d;
            }
        }
        if l > 0 {
            let weights = &params[off..off + nw];
            let mut dx = vec![0.0; rows * shape.inputs];
            gemm(
                rows,
                shape.outputs,
                shape.inputs,
                &delta,
                (shape.outputs as isize, 1),
                weights,
                (shape.inputs as isize, 1),
                0.0,
                &mut dx,
            );
            delta = dx;
        }
    }
    Ok(())
}

pub fn mlp_forward(spec: &MlpSpec, params: &ParamVector, input: &[f64]) -> Result<Vec<f64>> {
    if input.len() != spec.input_dim {
        return Err(Error::invalid(format!(
            "input has length {}, network expects {}",
            input.len(),
            spec.input_dim
        )));
    }
    Ok(forward_batch(spec, params.as_slice(), input, 1)?
        .output()
        .to_vec())
}

/// `count` orthonormal vectors of length `dim` (count <= dim).
fn orthonormal_rows<R: Rng + ?Sized>(count: usize, dim: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(count);
    while basis.len() < count {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        for b in &basis {
            let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            for (x, y) in v.iter_mut().zip(b) {
                *x -= dot * y;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
    }
    basis
}

fn orthogonal_weights<R: Rng + ?Sized>(shape: LayerShape, gain: f64, rng: &mut R) -> Vec<f64> {
    let (out, inp) = (shape.outputs, shape.inputs);
    let mut w = vec![0.0; out * inp];
    if out <= inp {
        for (j, row) in orthonormal_rows(out, inp, rng).into_iter().enumerate() {
            for (k, v) in row.into_iter().enumerate() {
                w[j * inp + k] = gain * v;
            }
        }
    } else {
        for (k, col) in orthonormal_rows(inp, out, rng).into_iter().enumerate() {
            for (j, v) in col.into_iter().enumerate() {
                w[j * inp + k] = gain * v;
            }
        }
    }
    w
}

/// A network spec together with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub spec: MlpSpec,
    pub params: ParamVector,
}

impl Mlp {
    pub fn init<R: Rng + ?Sized>(spec: MlpSpec, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let layout = spec.layers();
        let n_layers = layout.len();
        let mut layers = Vec::with_capacity(n_layers);
        for (l, shape) in layout.iter().enumerate() {
            let last = l + 1 == n_layers;
            let weights = if last && spec.zero_final_layer {
                vec![0.0; shape.inputs * shape.outputs]
            } else {
                let gain = if last { spec.final_gain } else { HIDDEN_GAIN };
                orthogonal_weights(*shape, gain, rng)
            };
            layers.push(LayerParams {
                weights,
                bias: vec![0.0; shape.outputs],
            });
        }
        let params = ParamVector::flatten(layout, &layers)?;
        Ok(Mlp { spec, params })
    }

    pub fn from_params(spec: MlpSpec, params: ParamVector) -> Result<Self> {
        spec.validate()?;
        if params.layout() != spec.layers().as_slice() {
            return Err(Error::invalid("parameter layout does not match spec"));
        }
        Ok(Mlp { spec, params })
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        mlp_forward(&self.spec, &self.params, input)
    }

    pub fn forward_batch(&self, inputs: &[f64], rows: usize) -> Result<Activations> {
        forward_batch(&self.spec, self.params.as_slice(), inputs, rows)
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Plain nested-loop evaluation of the same network.
    fn reference_forward(spec: &MlpSpec, params: &ParamVector, x: &[f64]) -> Vec<f64> {
        let layers = params.unflatten();
        let shapes = spec.layers();
        let mut h = x.to_vec();
        for (l, (p, s)) in layers.iter().zip(&shapes).enumerate() {
            let mut y = vec![0.0; s.outputs];
            for j in 0..s.outputs {
                let mut acc = p.bias[j];
                for k in 0..s.inputs {
                    acc += p.weights[j * s.inputs + k] * h[k];
                }
                y[j] = if l + 1 < shapes.len() {
                    acc.tanh()
                } else {
                    acc
                };
            }
            h = y;
        }
        h
    }

    #[test]
    fn zero_final_layer_gives_zero_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = Mlp::init(MlpSpec::new(5, 7).with_zero_final_layer(), &mut rng).unwrap();
        let last = net.params.unflatten().pop().unwrap();
        assert!(last.weights.iter().chain(&last.bias).all(|&v| v == 0.0));
        let out = net.forward(&[0.3, -1.0, 2.0, 0.0, 5.0]).unwrap();
        assert_eq!(out, vec![0.0; 7]);
    }

    #[test]
    fn identity_linear_layer() {
        let spec = MlpSpec::new(3, 3).with_hidden(&[]);
        let mut w = vec![0.0; 9];
        for i in 0..3 {
            w[i * 3 + i] = 1.0;
        }
        let params = ParamVector::flatten(
            spec.layers(),
            &[LayerParams {
                weights: w,
                bias: vec![0.0; 3],
            }],
        )
        .unwrap();
        let x = [0.5, -2.0, 7.25];
        assert_eq!(mlp_forward(&spec, &params, &x).unwrap(), x.to_vec());
    }

    #[test]
    fn gemm_paths_match_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for &(m, k, n) in &[(1, 7, 9), (9, 1, 6), (6, 8, 2), (12, 10, 11)] {
            let a: Vec<f64> = (0..m * k).map(|_| rng.random_range(-1.0..1.0)).collect();
            let b: Vec<f64> = (0..k * n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let c0: Vec<f64> = (0..m * n).map(|_| rng.random_range(-1.0..1.0)).collect();
            // b read transposed from an n x k buffer
            let bt: Vec<f64> = (0..n * k).map(|i| b[(i % k) * n + i / k]).collect();
            for beta in [0.0, 1.0, 0.5] {
                let mut want = c0.clone();
                for i in 0..m {
                    for j in 0..n {
                        let dot: f64 = (0..k).map(|p| a[i * k + p] * b[p * n + j]).sum();
                        want[i * n + j] = beta * c0[i * n + j] + dot;
                    }
                }
                let mut c = c0.clone();
                gemm(
                    m,
                    k,
                    n,
                    &a,
                    (k as isize, 1),
                    &b,
                    (n as isize, 1),
                    beta,
                    &mut c,
                );
                let mut ct = c0.clone();
                gemm(
                    m,
                    k,
                    n,
                    &a,
                    (k as isize, 1),
                    &bt,
                    (1, k as isize),
                    beta,
                    &mut ct,
                );
                for ((x, y), w) in c.iter().zip(&ct).zip(&want) {
                    assert!((x - w).abs() < 1e-12 && (y - w).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn forward_matches_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let spec = MlpSpec::new(4, 3).with_hidden(&[6, 5]);
        let mut net = Mlp::init(spec, &mut rng).unwrap();
        // perturb so the output layer is not tiny
        for v in net.params.as_mut_slice() {
            *v += rng.random_range(-0.5..0.5);
        }
        let x = [0.1, -0.7, 1.3, 0.25];
        let got = net.forward(&x).unwrap();
        let want = reference_forward(&net.spec, &net.params, &x);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let net = Mlp::init(MlpSpec::new(2, 2), &mut rng).unwrap();
        assert!(matches!(
            net.forward(&[1.0]),
            Err(Error::InvalidArgument(_))
        ));
        assert!(MlpSpec::new(0, 2).validate().is_err());
    }

    #[test]
    fn non_finite_reports_layer() {
        let spec = MlpSpec::new(1, 1).with_hidden(&[2]);
        let params =
            ParamVector::from_values(spec.layers(), vec![1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0])
                .unwrap();
        let err = mlp_forward(&spec, &params, &[f64::NAN]).unwrap_err();
        assert!(matches!(err, Error::Numeric { layer: 0, .. }));
    }

    #[test]
    fn hidden_weights_are_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = Mlp::init(MlpSpec::new(8, 2).with_hidden(&[4]), &mut rng).unwrap();
        let w = &net.params.unflatten()[0].weights;
        for a in 0..4 {
            for b in 0..4 {
                let dot: f64 = (0..8).map(|k| w[a * 8 + k] * w[b * 8 + k]).sum();
                let want = if a == b { 2.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-10);
            }
        }
    }
}
