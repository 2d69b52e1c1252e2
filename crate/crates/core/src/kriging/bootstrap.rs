//! Leave-one-out kriging relabeling of a sample set.
//!
//! Row `i` of the output keeps its input point but its response becomes the
//! ordinary-kriging prediction at that point from a model trained on the
//! other `n − 1` rows.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::crossval::fit_range_cv;
use super::model::{fit_for, KrigingModel};
use super::variogram::{Variogram, VariogramKind};
use crate::error::{Error, Result};
use crate::sampling::SampleSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariogramSource {
    /// Fit a fresh variogram on every fold to its binned empirical
    /// semivariogram.
    Refit { kind: VariogramKind, n_bins: usize },
    /// Pick a fresh zero-nugget range on every fold by leave-one-out
    /// cross-validation within the fold.
    CrossValidated { kind: VariogramKind },
    /// Use the same variogram for every fold.
    Fixed(Variogram),
}

impl Default for VariogramSource {
    fn default() -> Self {
        VariogramSource::CrossValidated { kind: VariogramKind::Gaussian }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapFold {
    pub index: usize,
    pub prediction: f64,
    pub variogram: Option<Variogram>,
    /// Why the fold fell back to the original response, if it did.
    pub fallback: Option<String>,
}

#[derive(Debug, Clone)]
pub struct BootstrapResult {
    pub samples: SampleSet,
    pub folds: Vec<BootstrapFold>,
}

impl BootstrapResult {
    pub fn fallback_count(&self) -> usize {
        self.folds.iter().filter(|f| f.fallback.is_some()).count()
    }
}

/// Replaces the `fom` responses with leave-one-out kriging predictions.
/// Other response columns and the input matrix are copied unchanged. Folds
/// run in parallel; results land in row order.
pub fn bootstrap_resample(samples: &SampleSet, fom: &str, source: &VariogramSource) -> Result<BootstrapResult> {
    let n = samples.len();
    if n < 4 {
        return Err(Error::TooFewPoints { needed: 4, got: n });
    }
    let y = samples.response(fom)?;
    let folds = (0..n)
        .into_par_iter()
        .map(|i| leave_one_out(&samples.inputs, y, i, source))
        .collect::<Result<Vec<_>>>()?;
    let mut out = samples.clone();
    out.set_response(fom, folds.iter().map(|f| f.prediction).collect())?;
    Ok(BootstrapResult { samples: out, folds })
}

fn leave_one_out(inputs: &[Vec<f64>], y: &[f64], i: usize, source: &VariogramSource) -> Result<BootstrapFold> {
    let rest_x: Vec<Vec<f64>> = inputs.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, r)| r.clone()).collect();
    let rest_y: Vec<f64> = y.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &v)| v).collect();
    let variogram = match *source {
        VariogramSource::Fixed(v) => v,
        VariogramSource::Refit { kind, n_bins } => fit_for(&rest_x, &rest_y, kind, n_bins)?.variogram,
        VariogramSource::CrossValidated { kind } => fit_range_cv(&rest_x, &rest_y, kind)?.variogram,
    };
    let prediction = KrigingModel::new(rest_x, rest_y, variogram).and_then(|m| m.predict(&inputs[i]));
    match prediction {
        Ok(p) => Ok(BootstrapFold { index: i, prediction: p, variogram: Some(variogram), fallback: None }),
        Err(e @ Error::SingularSystem(_)) => {
            log::warn!("bootstrap fold {i}: {e}; keeping the original response");
            Ok(BootstrapFold { index: i, prediction: y[i], variogram: Some(variogram), fallback: Some(e.to_string()) })
        }
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(inputs: Vec<Vec<f64>>, y: Vec<f64>) -> SampleSet {
        let mut s = SampleSet::new(inputs, "test", 0).unwrap();
        s.set_response("y", y).unwrap();
        s
    }

    #[test]
    fn constant_responses_stay_constant() {
        let x: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64 / 7.0, ((i * 5) % 8) as f64 / 7.0]).collect();
        let s = set(x, vec![2.5; 8]);
        let out = bootstrap_resample(&s, "y", &VariogramSource::default()).unwrap();
        for v in out.samples.response("y").unwrap() {
            assert!((v - 2.5).abs() < 1e-10);
        }
        assert_eq!(out.samples.inputs, s.inputs);
    }

    #[test]
    fn needs_four_rows() {
        let s = set(vec![vec![0.0], vec![0.5], vec![1.0]], vec![0.0, 1.0, 2.0]);
        assert!(matches!(
            bootstrap_resample(&s, "y", &VariogramSource::default()),
            Err(Error::TooFewPoints { needed: 4, got: 3 })
        ));
    }

    #[test]
    fn missing_fom() {
        let s = set(vec![vec![0.0], vec![0.3], vec![0.6], vec![1.0]], vec![0.0; 4]);
        assert!(matches!(
            bootstrap_resample(&s, "nope", &VariogramSource::default()),
            Err(Error::MissingResponses(_))
        ));
    }

    #[test]
    fn other_columns_untouched() {
        let mut s = set(vec![vec![0.0], vec![0.3], vec![0.6], vec![1.0]], vec![0.0, 0.3, 0.6, 1.0]);
        s.set_response("z", vec![9.0, 8.0, 7.0, 6.0]).unwrap();
        let out = bootstrap_resample(&s, "y", &VariogramSource::default()).unwrap();
        assert_eq!(out.samples.response("z").unwrap(), s.response("z").unwrap());
        assert_eq!(out.folds.len(), 4);
        assert_eq!(out.fallback_count(), 0);
    }
}
