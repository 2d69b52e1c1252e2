//! Monte Carlo process-variation analysis.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format;
use crate::oracle::Evaluator;
use crate::rng;
use crate::space::ParameterSpace;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MCConfig {
    pub n_runs: usize,
    /// Standard deviation of each parameter as a fraction of its nominal.
    pub sigma_fraction: f64,
    pub seed: u64,
    pub histogram_bins: usize,
    /// Optional `d × d` correlation matrix between parameter perturbations.
    /// Independent perturbations when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub correlation: Option<Vec<Vec<f64>>>,
}

impl Default for MCConfig {
    fn default() -> Self {
        Self { n_runs: 1000, sigma_fraction: 0.10, seed: 0, histogram_bins: 20, correlation: None }
    }
}

impl MCConfig {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.n_runs < 2 {
            return Err(Error::InvalidConfig("n_runs must be at least 2".into()));
        }
        if !(self.sigma_fraction >= 0.0 && self.sigma_fraction.is_finite()) {
            return Err(Error::InvalidConfig("sigma_fraction must be finite and non-negative".into()));
        }
        if self.histogram_bins < 1 {
            return Err(Error::InvalidConfig("histogram_bins must be at least 1".into()));
        }
        if let Some(c) = &self.correlation {
            correlation_factor(c, dim)?;
        }
        Ok(())
    }
}

fn correlation_factor(c: &[Vec<f64>], dim: usize) -> Result<DMatrix<f64>> {
    if c.len() != dim || c.iter().any(|r| r.len() != dim) {
        return Err(Error::InvalidConfig(format!("correlation matrix must be {dim} x {dim}")));
    }
    let m = DMatrix::from_fn(dim, dim, |i, j| c[i][j]);
    for i in 0..dim {
        if (m[(i, i)] - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidConfig("correlation matrix needs a unit diagonal".into()));
        }
        for j in 0..i {
            if m[(i, j)] != m[(j, i)] {
                return Err(Error::InvalidConfig("correlation matrix must be symmetric".into()));
            }
        }
    }
    m.cholesky()
        .map(|ch| ch.l())
        .ok_or_else(|| Error::InvalidConfig("correlation matrix is not positive definite".into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `counts.len() + 1` ascending edges.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

/// Equal-width binning over `[min, max]`. Bin `i` holds values in
/// `[edges[i], edges[i+1])`; the maximum goes in the last bin.
pub fn histogram(values: &[f64], n_bins: usize) -> Result<Histogram> {
    if values.is_empty() {
        return Err(Error::EmptyValues);
    }
    if n_bins < 1 {
        return Err(Error::InvalidConfig("n_bins must be at least 1".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig("histogram values must be finite".into()));
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / n_bins as f64;
    let mut edges: Vec<f64> = (0..=n_bins).map(|i| lo + width * i as f64).collect();
    edges[n_bins] = hi;
    let mut counts = vec![0; n_bins];
    for &v in values {
        let mut idx = if v >= hi || width == 0.0 { n_bins - 1 } else { (((v - lo) / width) as usize).min(n_bins - 1) };
        // floor() can land one bin off near an edge; settle against the edges
        while idx > 0 && v < edges[idx] {
            idx -= 1;
        }
        while idx + 1 < n_bins && v >= edges[idx + 1] {
            idx += 1;
        }
        counts[idx] += 1;
    }
    Ok(Histogram { edges, counts })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FomStats {
    pub mean: f64,
    /// Sample standard deviation (`n − 1` denominator).
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub histogram: Histogram,
}

impl FomStats {
    pub fn from_values(values: &[f64], n_bins: usize) -> Result<Self> {
        let histogram = histogram(values, n_bins)?;
        let n = values.len() as f64;
        // Shifted mean: exact when every value is identical.
        let pivot = values[0];
        let mean = pivot + values.iter().map(|v| v - pivot).sum::<f64>() / n;
        let var = if values.len() > 1 { values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
        Ok(Self {
            mean,
            std: var.sqrt(),
            min: histogram.edges[0],
            max: *histogram.edges.last().expect("edges nonempty"),
            histogram,
        })
    }

    /// `mean + k·std`.
    pub fn robust(&self, k_sigma: f64) -> f64 {
        self.mean + k_sigma * self.std
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MCReport {
    pub format_version: String,
    pub nominal: Vec<f64>,
    pub config: MCConfig,
    pub foms: BTreeMap<String, FomStats>,
}

impl MCReport {
    pub fn fom(&self, name: &str) -> Result<&FomStats> {
        self.foms.get(name).ok_or_else(|| Error::MissingFoM(name.to_string()))
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Raw draws (native units, clamped) and the evaluator outputs per draw.
#[derive(Debug, Clone, PartialEq)]
pub struct MCDraws {
    pub inputs: Vec<Vec<f64>>,
    pub outputs: Vec<Vec<f64>>,
}

/// Draws `n_runs` perturbed designs around `nominal` and evaluates them.
///
/// Each parameter gets a Gaussian offset with standard deviation
/// `sigma_fraction·|nominal_i|`; draws falling outside the box are clamped
/// onto it. Standard normals are consumed row by row from the seeded
/// stream, so the draws depend only on the seed and the dimension.
pub fn monte_carlo_raw<E: Evaluator + ?Sized>(
    evaluator: &E,
    space: &ParameterSpace,
    nominal: &[f64],
    cfg: &MCConfig,
) -> Result<MCDraws> {
    space.check_nominal(nominal)?;
    cfg.validate(space.dim())?;
    let d = space.dim();
    let factor = cfg.correlation.as_ref().map(|c| correlation_factor(c, d)).transpose()?;
    let scale: Vec<f64> = nominal.iter().map(|v| cfg.sigma_fraction * v.abs()).collect();

    let mut rng = rng::stream(cfg.seed);
    let inputs: Vec<Vec<f64>> = (0..cfg.n_runs)
        .map(|_| {
            let mut z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            if let Some(l) = &factor {
                z = (0..d).map(|i| (0..=i).map(|j| l[(i, j)] * z[j]).sum()).collect();
            }
            let mut x: Vec<f64> = nominal.iter().zip(&scale).zip(&z).map(|((m, s), z)| m + s * z).collect();
            space.clamp(&mut x);
            x
        })
        .collect();
    let outputs = evaluator.evaluate_batch(&inputs)?;
    Ok(MCDraws { inputs, outputs })
}

/// Monte Carlo summary per figure of merit; see [`monte_carlo_raw`].
pub fn monte_carlo<E: Evaluator + ?Sized>(
    evaluator: &E,
    space: &ParameterSpace,
    nominal: &[f64],
    cfg: &MCConfig,
) -> Result<MCReport> {
    let draws = monte_carlo_raw(evaluator, space, nominal, cfg)?;
    summarize(evaluator.fom_names(), &draws, nominal, cfg)
}

pub fn summarize(names: &[String], draws: &MCDraws, nominal: &[f64], cfg: &MCConfig) -> Result<MCReport> {
    let foms = names
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let column: Vec<f64> = draws.outputs.iter().map(|row| row[k]).collect();
            Ok((name.clone(), FomStats::from_values(&column, cfg.histogram_bins)?))
        })
        .collect::<Result<_>>()?;
    Ok(MCReport { format_version: format::current(), nominal: nominal.to_vec(), config: cfg.clone(), foms })
}
