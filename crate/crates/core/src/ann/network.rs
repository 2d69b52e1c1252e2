use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format;

/// Single-hidden-layer perceptron with `tanh` hidden units and a linear
/// output:
///
/// `out(x) = bias_out + Σ_j weights_out[j] · tanh(slope · (w_j · x + bias_hidden[j]))`
///
/// `tanh` through a single `exp`: within a few ulps of the libm routine in
/// absolute terms and well ahead of it in speed. Every path (single, batch,
/// gradient) uses it so they agree.
#[inline]
fn tanh_fast(x: f64) -> f64 {
    1.0 - 2.0 / ((2.0 * x).exp() + 1.0)
}

/// Parameters flatten (see [`Network::params`]) in the order: hidden weights
/// row by row, hidden biases, output weights, output bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub input_dim: usize,
    pub hidden_units: usize,
    pub slope: f64,
    /// `hidden_units × input_dim`.
    pub weights_hidden: Vec<Vec<f64>>,
    pub bias_hidden: Vec<f64>,
    pub weights_out: Vec<f64>,
    pub bias_out: f64,
}

impl Network {
    pub fn zeros(input_dim: usize, hidden_units: usize, slope: f64) -> Result<Self> {
        if hidden_units == 0 {
            return Err(Error::InvalidConfig("hidden_units must be at least 1".into()));
        }
        if !(slope > 0.0 && slope.is_finite()) {
            return Err(Error::InvalidConfig(format!("slope must be > 0, got {slope}")));
        }
        Ok(Self {
            input_dim,
            hidden_units,
            slope,
            weights_hidden: vec![vec![0.0; input_dim]; hidden_units],
            bias_hidden: vec![0.0; hidden_units],
            weights_out: vec![0.0; hidden_units],
            bias_out: 0.0,
        })
    }

    /// Uniform `[−1/√fan_in, 1/√fan_in]` initialization; output bias 0.
    pub fn random<R: Rng + ?Sized>(input_dim: usize, hidden_units: usize, slope: f64, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(input_dim, hidden_units, slope)?;
        let a_in = 1.0 / (input_dim.max(1) as f64).sqrt();
        let a_out = 1.0 / (hidden_units as f64).sqrt();
        for row in &mut net.weights_hidden {
            for w in row.iter_mut() {
                *w = rng.random_range(-a_in..=a_in);
            }
        }
        for b in &mut net.bias_hidden {
            *b = rng.random_range(-a_in..=a_in);
        }
        for w in &mut net.weights_out {
            *w = rng.random_range(-a_out..=a_out);
        }
        Ok(net)
    }

    pub fn n_params(&self) -> usize {
        self.hidden_units * (self.input_dim + 2) + 1
    }

    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.n_params());
        for row in &self.weights_hidden {
            p.extend_from_slice(row);
        }
        p.extend_from_slice(&self.bias_hidden);
        p.extend_from_slice(&self.weights_out);
        p.push(self.bias_out);
        p
    }

    pub fn set_params(&mut self, p: &[f64]) {
        assert_eq!(p.len(), self.n_params(), "parameter vector length");
        let (d, h) = (self.input_dim, self.hidden_units);
        for (j, row) in self.weights_hidden.iter_mut().enumerate() {
            row.copy_from_slice(&p[j * d..(j + 1) * d]);
        }
        self.bias_hidden.copy_from_slice(&p[h * d..h * d + h]);
        self.weights_out.copy_from_slice(&p[h * d + h..h * d + 2 * h]);
        self.bias_out = p[h * (d + 2)];
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch { expected: self.input_dim, got: x.len() });
        }
        Ok(())
    }

    #[inline]
    fn preactivation(&self, j: usize, x: &[f64]) -> f64 {
        let v: f64 = self.weights_hidden[j].iter().zip(x).map(|(w, xi)| w * xi).sum();
        self.slope * (v + self.bias_hidden[j])
    }

    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        Ok(self.forward_unchecked(x))
    }

    pub(crate) fn forward_unchecked(&self, x: &[f64]) -> f64 {
        let mut out = self.bias_out;
        for j in 0..self.hidden_units {
            out += self.weights_out[j] * tanh_fast(self.preactivation(j, x));
        }
        out
    }

    /// [`forward`](Self::forward) over a batch, computed as one matrix
    /// product `X·Wᵀ` for the hidden layer.
    pub fn forward_batch(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        for x in xs {
            self.check_input(x)?;
        }
        if xs.is_empty() {
            return Ok(Vec::new());
        }
        let (m, d, h) = (xs.len(), self.input_dim, self.hidden_units);
        let x = DMatrix::from_fn(m, d, |i, k| xs[i][k]);
        let w = DMatrix::from_fn(d, h, |k, j| self.weights_hidden[j][k]);
        let mut z = x * w;
        for (j, mut col) in z.column_iter_mut().enumerate() {
            let b = self.bias_hidden[j];
            col.apply(|v| *v = tanh_fast(self.slope * (*v + b)));
        }
        let out = z * DVector::from_column_slice(&self.weights_out);
        Ok(out.iter().map(|v| v + self.bias_out).collect())
    }

    /// Output and its gradient with respect to every parameter, in
    /// [`params`](Self::params) order.
    pub fn gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check_input(x)?;
        let mut g = vec![0.0; self.n_params()];
        let out = self.gradient_into(x, &mut g);
        Ok((out, g))
    }

    pub(crate) fn gradient_into(&self, x: &[f64], g: &mut [f64]) -> f64 {
        let (d, h) = (self.input_dim, self.hidden_units);
        let mut out = self.bias_out;
        for j in 0..h {
            let t = tanh_fast(self.preactivation(j, x));
            out += self.weights_out[j] * t;
            let back = self.weights_out[j] * (1.0 - t * t) * self.slope;
            for (gi, xi) in g[j * d..(j + 1) * d].iter_mut().zip(x) {
                *gi = back * xi;
            }
            g[h * d + j] = back;
            g[h * d + h + j] = t;
        }
        g[h * (d + 2)] = 1.0;
        out
    }

    /// Upper bound on the Lipschitz constant of `out` in the Euclidean norm:
    /// `Σ_j |weights_out[j]| · slope · ‖w_j‖₂` (tanh is 1-Lipschitz).
    pub fn lipschitz_bound(&self) -> f64 {
        self.weights_hidden
            .iter()
            .zip(&self.weights_out)
            .map(|(row, wo)| wo.abs() * self.slope * row.iter().map(|w| w * w).sum::<f64>().sqrt())
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.params().iter().all(|v| v.is_finite()) && self.slope.is_finite()
    }
}

/// Root mean square error `sqrt(Σ (Y_i − Ŷ_i)² / N)`.
pub fn rmse(predicted: &[f64], actual: &[f64]) -> Result<f64> {
    if predicted.len() != actual.len() {
        return Err(Error::LengthMismatch { left: predicted.len(), right: actual.len() });
    }
    if predicted.is_empty() {
        return Err(Error::EmptyVectors);
    }
    let sse: f64 = predicted.iter().zip(actual).map(|(p, a)| (a - p) * (a - p)).sum();
    Ok((sse / predicted.len() as f64).sqrt())
}

/// Metadata stored next to the weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub seed: u64,
    pub epochs: usize,
    pub final_train_rmse: f64,
    pub best_holdout_rmse: Option<f64>,
    pub trainer: String,
}

/// On-disk neural metamodel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuralModelFile {
    pub format_version: String,
    pub network: Network,
    pub training: TrainingMetadata,
}

impl NeuralModelFile {
    pub fn new(network: Network, training: TrainingMetadata) -> Self {
        Self { format_version: format::current(), network, training }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        format::check(&file.format_version)?;
        let net = &file.network;
        if net.weights_hidden.len() != net.hidden_units
            || net.weights_hidden.iter().any(|r| r.len() != net.input_dim)
            || net.bias_hidden.len() != net.hidden_units
            || net.weights_out.len() != net.hidden_units
        {
            return Err(Error::InvalidConfig("network arrays do not match topology".into()));
        }
        if !net.is_finite() {
            return Err(Error::InvalidConfig("network holds non-finite weights".into()));
        }
        Ok(file)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tanh_fast_tracks_tanh() {
        for i in -4000..=4000 {
            let x = i as f64 / 200.0;
            assert!((tanh_fast(x) - x.tanh()).abs() <= 4.0 * f64::EPSILON, "{x}");
        }
        assert_eq!(tanh_fast(800.0), 1.0);
        assert_eq!(tanh_fast(-800.0), -1.0);
        assert!(tanh_fast(f64::NAN).is_nan());
    }
    use crate::rng;

    #[test]
    fn zero_network_is_its_bias() {
        let mut net = Network::zeros(3, 4, 1.0).unwrap();
        net.bias_out = 7.0;
        assert_eq!(net.forward(&[0.1, 0.9, 0.3]).unwrap(), 7.0);
    }

    #[test]
    fn single_unit_at_origin() {
        let mut net = Network::zeros(1, 1, 1.0).unwrap();
        net.weights_out[0] = 1.0;
        net.bias_out = -2.0;
        assert_eq!(net.forward(&[0.7]).unwrap(), -2.0);
    }

    #[test]
    fn hand_computed_two_two_one() {
        let net = Network {
            input_dim: 2,
            hidden_units: 2,
            slope: 1.5,
            weights_hidden: vec![vec![0.5, -1.0], vec![2.0, 0.25]],
            bias_hidden: vec![0.1, -0.3],
            weights_out: vec![1.2, -0.7],
            bias_out: 0.05,
        };
        let x = [0.4, 0.8];
        // v1 = 0.2 - 0.8 + 0.1 = -0.5 ; v2 = 0.8 + 0.2 - 0.3 = 0.7
        let expected = 0.05 + 1.2 * (1.5f64 * -0.5).tanh() - 0.7 * (1.5f64 * 0.7).tanh();
        assert!((net.forward(&x).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn batch_matches_loop() {
        let net = Network::random(5, 7, 1.0, &mut rng::stream(4)).unwrap();
        let mut r = rng::stream(5);
        let xs: Vec<Vec<f64>> = (0..100).map(|_| (0..5).map(|_| r.random::<f64>()).collect()).collect();
        let batch = net.forward_batch(&xs).unwrap();
        for (x, b) in xs.iter().zip(&batch) {
            assert!((net.forward(x).unwrap() - b).abs() <= 1e-12);
        }
        assert_eq!(net.forward_batch(&xs[..1]).unwrap()[0], net.forward(&xs[0]).unwrap());
        assert!(net.forward_batch(&[]).unwrap().is_empty());
        assert!(net.forward(&[0.0; 4]).is_err());
    }

    #[test]
    fn slope_reparameterization() {
        let base = Network::random(3, 5, 1.0, &mut rng::stream(8)).unwrap();
        let mut doubled = base.clone();
        for row in &mut doubled.weights_hidden {
            row.iter_mut().for_each(|w| *w *= 2.0);
        }
        doubled.bias_hidden.iter_mut().for_each(|b| *b *= 2.0);
        let mut steep = base.clone();
        steep.slope = 2.0;
        for x in [[0.1, 0.2, 0.3], [0.9, 0.0, 0.5]] {
            assert!((doubled.forward(&x).unwrap() - steep.forward(&x).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn params_round_trip() {
        let net = Network::random(4, 3, 1.0, &mut rng::stream(1)).unwrap();
        let mut other = Network::zeros(4, 3, 1.0).unwrap();
        other.set_params(&net.params());
        assert_eq!(net, other);
        assert_eq!(net.params().len(), net.n_params());
    }

    #[test]
    fn rmse_cases() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((rmse(&[1.0, 2.0, 3.0], &[1.5, 2.5, 3.5]).unwrap() - 0.5).abs() < 1e-15);
        assert!((rmse(&[1.0, 2.0], &[2.0, 4.0]).unwrap() - 2.5f64.sqrt()).abs() < 1e-15);
        assert!(matches!(rmse(&[1.0], &[1.0, 2.0]), Err(Error::LengthMismatch { .. })));
        assert!(matches!(rmse(&[], &[]), Err(Error::EmptyVectors)));
    }

    #[test]
    fn lipschitz_bound_holds() {
        let net = Network::random(3, 6, 1.3, &mut rng::stream(21)).unwrap();
        let l = net.lipschitz_bound();
        let mut r = rng::stream(22);
        for _ in 0..200 {
            let a: Vec<f64> = (0..3).map(|_| r.random()).collect();
            let b: Vec<f64> = (0..3).map(|_| r.random()).collect();
            let dist = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
            let diff = (net.forward(&a).unwrap() - net.forward(&b).unwrap()).abs();
            assert!(diff <= l * dist + 1e-12);
        }
    }
}
