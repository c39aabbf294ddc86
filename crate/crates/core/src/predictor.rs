//! Feed-forward predictors for zone loads and line reactances.
//!
//! A model is a stack of dense layers with a smooth activation, a feature
//! scaler in front and an output head behind. Load heads are affine in the
//! last layer; the impedance head passes through softplus so every predicted
//! reactance is strictly positive.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::{ptdf_factors, GridError, NetworkTopology, PtdfFactors, PtdfMatrix};
use crate::linalg::{dot, Matrix};
use crate::math::{sigmoid, softplus, softplus_inv, sqrt, tanh};

/// Hidden layer widths used by every preset.
pub const HIDDEN: [usize; 3] = [25, 25, 25];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PredictorError {
    #[error("{what}: expected length {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("non-finite {what}")]
    NonFinite { what: &'static str },
    #[error("feature scale {index} is zero or not finite")]
    BadScale { index: usize },
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum OutputHead {
    /// Zone loads in MW: 1 for an hourly total, 24 for a day-ahead profile,
    /// one per zone for network cases.
    Load(usize),
    /// Per-line reactances, softplus of the last layer.
    Impedance(usize),
}

impl OutputHead {
    pub fn len(&self) -> usize {
        match *self {
            OutputHead::Load(n) | OutputHead::Impedance(n) => n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => tanh(x),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation output.
    fn slope(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }
}

/// Column means and population standard deviations.
fn column_moments<'a>(rows: impl IntoIterator<Item = &'a [f64]>) -> (Vec<f64>, Vec<f64>) {
    let mut count = 0usize;
    let mut sum: Vec<f64> = Vec::new();
    let mut sq: Vec<f64> = Vec::new();
    for row in rows {
        if sum.is_empty() {
            sum = vec![0.0; row.len()];
            sq = vec![0.0; row.len()];
        }
        for (i, v) in row.iter().enumerate() {
            sum[i] += v;
            sq[i] += v * v;
        }
        count += 1;
    }
    let n = count.max(1) as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let sd = sq.iter().zip(&mean).map(|(q, m)| sqrt((q / n - m * m).max(0.0))).collect();
    (mean, sd)
}

/// Per-feature standardization `(x − mean) / scale`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FeatureScaler {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl FeatureScaler {
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    /// Mean and population standard deviation per column; constant columns
    /// keep scale 1.
    pub fn fit<'a>(rows: impl IntoIterator<Item = &'a [f64]>) -> Self {
        let (mean, sd) = column_moments(rows);
        let scale = sd.into_iter().map(|v| if v > 1e-12 { v } else { 1.0 }).collect();
        Self { mean, scale }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn validate(&self) -> Result<(), PredictorError> {
        if self.scale.len() != self.mean.len() {
            return Err(PredictorError::Dimension {
                what: "feature scale",
                expected: self.mean.len(),
                got: self.scale.len(),
            });
        }
        match self.scale.iter().position(|s| *s == 0.0 || !s.is_finite()) {
            Some(index) => Err(PredictorError::BadScale { index }),
            None => Ok(()),
        }
    }

    pub fn scale(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }

    pub fn descale(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| v * s + m)
            .collect()
    }
}

/// Affine map from the last layer to the head's pre-activation,
/// `offset + scale · raw`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OutputScaler {
    pub offset: Vec<f64>,
    pub scale: Vec<f64>,
}

impl OutputScaler {
    pub fn identity(dim: usize) -> Self {
        Self {
            offset: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    /// Centers a load head on the target mean with unit raw output equal to
    /// one target standard deviation.
    pub fn fit_load<'a>(targets: impl IntoIterator<Item = &'a [f64]>) -> Self {
        let s = FeatureScaler::fit(targets);
        Self {
            offset: s.mean,
            scale: s.scale,
        }
    }

    /// Same for the impedance head, through the softplus: zero raw output
    /// maps to the mean reactance and the local slope to its spread.
    pub fn fit_impedance<'a>(targets: impl IntoIterator<Item = &'a [f64]>) -> Self {
        let (mean, sd) = column_moments(targets);
        let offset: Vec<f64> = mean.iter().map(|m| softplus_inv(m.max(1e-6))).collect();
        // Constant targets still get a slope of 5% of the mean.
        let scale = sd
            .iter()
            .zip(&mean)
            .zip(&offset)
            .map(|((sd, m), o)| sd.max(0.05 * m.abs()).max(1e-6) / sigmoid(*o))
            .collect();
        Self { offset, scale }
    }

    /// Maps targets to the units of the raw network output.
    pub fn standardize(&self, values: &[f64]) -> Vec<f64> {
        values
            .iter()
            .zip(&self.offset)
            .zip(&self.scale)
            .map(|((v, o), s)| (v - o) / s)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DenseLayer {
    /// outputs × inputs
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    fn zeros(outputs: usize, inputs: usize) -> Self {
        Self {
            weights: Matrix::zeros(outputs, inputs),
            bias: vec![0.0; outputs],
        }
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.weights.mul_vec(x);
        for (v, b) in y.iter_mut().zip(&self.bias) {
            *v += b;
        }
        y
    }
}

/// One labelled context: features, the realized zone loads and, for network
/// cases, the realized line reactances.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ContextSample {
    /// Seconds since the Unix epoch.
    pub timestamp: i64,
    pub features: Vec<f64>,
    pub true_load: Vec<f64>,
    pub true_reactances: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PredictionModel {
    pub layers: Vec<DenseLayer>,
    pub activation: Activation,
    pub head: OutputHead,
    pub features: FeatureScaler,
    pub output: OutputScaler,
}

/// Parameter gradients with the same shape as the model's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGradients {
    pub layers: Vec<DenseLayer>,
}

impl ModelGradients {
    pub fn zeros_like(model: &PredictionModel) -> Self {
        Self {
            layers: model
                .layers
                .iter()
                .map(|l| DenseLayer::zeros(l.weights.rows(), l.weights.cols()))
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &ModelGradients) {
        self.add_scaled(other, 1.0);
    }

    pub fn add_scaled(&mut self, other: &ModelGradients, k: f64) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.weights.as_mut_slice().iter_mut().zip(b.weights.as_slice()) {
                *x += k * y;
            }
            for (x, y) in a.bias.iter_mut().zip(&b.bias) {
                *x += k * y;
            }
        }
    }

    pub fn scale(&mut self, k: f64) {
        for l in &mut self.layers {
            l.weights.as_mut_slice().iter_mut().for_each(|w| *w *= k);
            l.bias.iter_mut().for_each(|b| *b *= k);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.flatten().iter().all(|v| v.is_finite())
    }

    /// Weights then biases, layer by layer; the order of
    /// [`PredictionModel::parameters`].
    pub fn flatten(&self) -> Vec<f64> {
        flatten_layers(&self.layers)
    }
}

fn flatten_layers(layers: &[DenseLayer]) -> Vec<f64> {
    let mut out = Vec::new();
    for l in layers {
        out.extend_from_slice(l.weights.as_slice());
        out.extend_from_slice(&l.bias);
    }
    out
}

/// Intermediate values of one forward pass.
struct Trace {
    /// Input to each layer; the last entry is the network's raw output.
    activations: Vec<Vec<f64>>,
    pre_head: Vec<f64>,
}

impl PredictionModel {
    /// Glorot-uniform weights, zero biases, identity scalers.
    pub fn new(input: usize, hidden: &[usize], head: OutputHead, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sizes = vec![input];
        sizes.extend_from_slice(hidden);
        sizes.push(head.len());
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = sqrt(6.0 / (fan_in + fan_out) as f64);
                let mut layer = DenseLayer::zeros(fan_out, fan_in);
                for v in layer.weights.as_mut_slice() {
                    *v = rng.random_range(-limit..=limit);
                }
                layer
            })
            .collect();
        Self {
            layers,
            activation: Activation::Tanh,
            head,
            features: FeatureScaler::identity(input),
            output: OutputScaler::identity(head.len()),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.weights.cols())
    }

    pub fn output_dim(&self) -> usize {
        self.head.len()
    }

    fn check_input(&self, features: &[f64]) -> Result<(), PredictorError> {
        if features.len() != self.input_dim() {
            return Err(PredictorError::Dimension {
                what: "features",
                expected: self.input_dim(),
                got: features.len(),
            });
        }
        Ok(())
    }

    fn trace(&self, features: &[f64]) -> Result<Trace, PredictorError> {
        self.check_input(features)?;
        let scaled = self.features.scale(features);
        if scaled.iter().any(|v| !v.is_finite()) {
            return Err(PredictorError::NonFinite { what: "scaled features" });
        }
        let mut activations = vec![scaled];
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut y = layer.forward(activations.last().expect("input present"));
            if i < last {
                y.iter_mut().for_each(|v| *v = self.activation.apply(*v));
            }
            activations.push(y);
        }
        let raw = activations.last().expect("output present");
        let pre_head = raw
            .iter()
            .zip(&self.output.offset)
            .zip(&self.output.scale)
            .map(|((r, o), s)| o + s * r)
            .collect();
        Ok(Trace {
            activations,
            pre_head,
        })
    }

    fn head_value(&self, pre: f64) -> f64 {
        match self.head {
            OutputHead::Load(_) => pre,
            OutputHead::Impedance(_) => softplus(pre),
        }
    }

    fn head_slope(&self, pre: f64) -> f64 {
        match self.head {
            OutputHead::Load(_) => 1.0,
            OutputHead::Impedance(_) => sigmoid(pre),
        }
    }

    pub fn forward(&self, features: &[f64]) -> Result<Vec<f64>, PredictorError> {
        let trace = self.trace(features)?;
        Ok(trace.pre_head.iter().map(|p| self.head_value(*p)).collect())
    }

    /// Gradient of `output_gradient · forward(features)` with respect to
    /// every weight and bias.
    pub fn backward(&self, features: &[f64], output_gradient: &[f64]) -> Result<ModelGradients, PredictorError> {
        if output_gradient.len() != self.output_dim() {
            return Err(PredictorError::Dimension {
                what: "output gradient",
                expected: self.output_dim(),
                got: output_gradient.len(),
            });
        }
        let trace = self.trace(features)?;
        let mut delta: Vec<f64> = output_gradient
            .iter()
            .zip(&trace.pre_head)
            .zip(&self.output.scale)
            .map(|((g, p), s)| g * s * self.head_slope(*p))
            .collect();
        let mut grads = ModelGradients::zeros_like(self);
        for i in (0..self.layers.len()).rev() {
            let input = &trace.activations[i];
            let layer_grad = &mut grads.layers[i];
            for (r, d) in delta.iter().enumerate() {
                if *d == 0.0 {
                    continue;
                }
                for (w, x) in layer_grad.weights.row_mut(r).iter_mut().zip(input) {
                    *w = d * x;
                }
            }
            layer_grad.bias.copy_from_slice(&delta);
            if i > 0 {
                let back = self.layers[i].weights.tr_mul_vec(&delta);
                delta = back
                    .iter()
                    .zip(input)
                    .map(|(b, y)| b * self.activation.slope(*y))
                    .collect();
            }
        }
        Ok(grads)
    }

    /// θ ← θ − lr·∇θ. Rejects non-finite gradients and leaves the model
    /// untouched in that case.
    pub fn sgd_step(&mut self, grads: &ModelGradients, learning_rate: f64) -> Result<(), PredictorError> {
        if !grads.is_finite() {
            return Err(PredictorError::NonFinite { what: "gradient" });
        }
        for (l, g) in self.layers.iter_mut().zip(&grads.layers) {
            for (w, d) in l.weights.as_mut_slice().iter_mut().zip(g.weights.as_slice()) {
                *w -= learning_rate * d;
            }
            for (b, d) in l.bias.iter_mut().zip(&g.bias) {
                *b -= learning_rate * d;
            }
        }
        Ok(())
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.rows() * l.weights.cols() + l.bias.len())
            .sum()
    }

    pub fn parameters(&self) -> Vec<f64> {
        flatten_layers(&self.layers)
    }

    pub fn set_parameters(&mut self, values: &[f64]) -> Result<(), PredictorError> {
        if values.len() != self.parameter_count() {
            return Err(PredictorError::Dimension {
                what: "parameters",
                expected: self.parameter_count(),
                got: values.len(),
            });
        }
        let mut at = 0;
        for l in &mut self.layers {
            let w = l.weights.as_mut_slice();
            w.copy_from_slice(&values[at..at + w.len()]);
            at += w.len();
            let b = l.bias.len();
            l.bias.copy_from_slice(&values[at..at + b]);
            at += b;
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.parameters().iter().all(|v| v.is_finite())
    }
}

/// Raises every load to at least `floor` so the dispatch LP keeps a strict
/// interior. Training treats the clamp as the identity.
pub fn clamp_loads(loads: &mut [f64], floor: f64) {
    for v in loads {
        if *v < floor {
            *v = floor;
        }
    }
}

/// PTDF built from predicted reactances, with the reverse-mode map back to
/// the reactances.
#[derive(Debug, Clone)]
pub struct ImpedancePtdf {
    factors: PtdfFactors,
    reactances: Vec<f64>,
}

pub fn impedance_to_ptdf(reactances: &[f64], topology: &NetworkTopology) -> Result<ImpedancePtdf, GridError> {
    Ok(ImpedancePtdf {
        factors: ptdf_factors(topology, reactances)?,
        reactances: reactances.to_vec(),
    })
}

impl ImpedancePtdf {
    pub fn ptdf(&self) -> &PtdfMatrix {
        &self.factors.ptdf
    }

    pub fn into_ptdf(self) -> PtdfMatrix {
        self.factors.ptdf
    }

    /// `∂L/∂x` from `∂L/∂T` (lines × buses; the slack column is ignored).
    ///
    /// With `b = 1/x`, `U = A_r·B_r⁻¹` and `T_r = diag(b)·U`, a change in
    /// `b_l` moves `T_r` by `e_l·U[l,:] − T_r·a_l·U[l,:]`, where `a_l` is the
    /// reduced incidence row of line `l`.
    pub fn reactance_gradient(&self, grad_ptdf: &Matrix) -> Result<Vec<f64>, GridError> {
        let ptdf = &self.factors.ptdf;
        if grad_ptdf.rows() != ptdf.line_count() || grad_ptdf.cols() != ptdf.bus_count() {
            return Err(GridError::Dimension {
                expected: ptdf.line_count() * ptdf.bus_count(),
                got: grad_ptdf.rows() * grad_ptdf.cols(),
            });
        }
        let lines = ptdf.line_count();
        let buses = &self.factors.reduced_buses;
        let u = &self.factors.flow_basis;
        let reduced = |m: &Matrix, l: usize| -> Vec<f64> { buses.iter().map(|&b| m[(l, b)]).collect() };
        let g_rows: Vec<Vec<f64>> = (0..lines).map(|l| reduced(grad_ptdf, l)).collect();
        let t_rows: Vec<Vec<f64>> = (0..lines).map(|l| reduced(&ptdf.entries, l)).collect();

        let mut grad = Vec::with_capacity(lines);
        for l in 0..lines {
            let a_l = reduced(&self.factors.line_bus, l);
            let u_l = u.row(l);
            let direct = dot(&g_rows[l], u_l);
            // Ḡᵀ·(T_r·a_l), then dotted with U[l,:].
            let mut coupled = 0.0;
            for k in 0..lines {
                let t_a = dot(&t_rows[k], &a_l);
                if t_a != 0.0 {
                    coupled += t_a * dot(&g_rows[k], u_l);
                }
            }
            let d_b = direct - coupled;
            let x = self.reactances[l];
            grad.push(-d_b / (x * x));
        }
        Ok(grad)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_model_outputs_zero_load() {
        let mut m = PredictionModel::new(3, &[4, 4], OutputHead::Load(1), 1);
        let zeros = vec![0.0; m.parameter_count()];
        m.set_parameters(&zeros).unwrap();
        assert_eq!(m.forward(&[1.0, -2.0, 0.5]).unwrap(), vec![0.0]);
    }

    #[test]
    fn zero_impedance_head_gives_ln2() {
        let mut m = PredictionModel::new(2, &[3], OutputHead::Impedance(20), 1);
        let zeros = vec![0.0; m.parameter_count()];
        m.set_parameters(&zeros).unwrap();
        for x in m.forward(&[0.3, 0.1]).unwrap() {
            assert_abs_diff_eq!(x, core::f64::consts::LN_2, epsilon = 1e-15);
        }
    }

    #[test]
    fn zero_output_gradient_gives_zero_parameter_gradient() {
        let m = PredictionModel::new(4, &HIDDEN, OutputHead::Load(24), 7);
        let g = m.backward(&[0.1, 0.2, 0.3, 0.4], &[0.0; 24]).unwrap();
        assert!(g.flatten().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn linear_single_layer_gradient_is_outer_product() {
        let mut m = PredictionModel::new(3, &[], OutputHead::Load(2), 3);
        m.activation = Activation::Identity;
        let x = [1.0, -2.0, 0.5];
        let g = m.backward(&x, &[0.7, -1.1]).unwrap();
        for (r, go) in [0.7, -1.1].iter().enumerate() {
            for (c, xi) in x.iter().enumerate() {
                assert_abs_diff_eq!(g.layers[0].weights[(r, c)], go * xi, epsilon = 1e-15);
            }
            assert_abs_diff_eq!(g.layers[0].bias[r], *go, epsilon = 1e-15);
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let m = PredictionModel::new(3, &[2], OutputHead::Load(1), 3);
        assert!(matches!(m.forward(&[1.0]), Err(PredictorError::Dimension { .. })));
    }

    #[test]
    fn zero_learning_rate_keeps_model() {
        let mut m = PredictionModel::new(3, &[5], OutputHead::Load(1), 9);
        let before = m.clone();
        let g = m.backward(&[1.0, 2.0, 3.0], &[1.0]).unwrap();
        m.sgd_step(&g, 0.0).unwrap();
        assert_eq!(m, before);
    }

    #[test]
    fn non_finite_gradient_is_rejected() {
        let mut m = PredictionModel::new(2, &[2], OutputHead::Load(1), 9);
        let mut g = ModelGradients::zeros_like(&m);
        g.layers[0].bias[0] = f64::NAN;
        let before = m.clone();
        assert!(m.sgd_step(&g, 0.1).is_err());
        assert_eq!(m, before);
    }

    #[test]
    fn scaler_round_trip() {
        let rows = [[1.0, 5.0, 2.0], [3.0, 5.0, -1.0], [2.0, 5.0, 0.0]];
        let s = FeatureScaler::fit(rows.iter().map(|r| r.as_slice()));
        assert_eq!(s.scale[1], 1.0);
        for r in &rows {
            let back = s.descale(&s.scale(r));
            for (a, b) in back.iter().zip(r) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-12);
            }
        }
    }
}
