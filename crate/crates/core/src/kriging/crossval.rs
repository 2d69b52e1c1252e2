//! Variogram range selection by leave-one-out cross-validation.
//!
//! With a zero nugget the ordinary-kriging predictor does not depend on the
//! sill, so the range is the only parameter that matters for prediction.
//! Binned least-squares fits identify it poorly when the design is sparse
//! in many dimensions (every pair distance falls in a narrow band); picking
//! the range that minimizes the leave-one-out error is far more stable.

use serde::{Deserialize, Serialize};

use super::model::{gamma_matrix, JITTER_FACTOR};
use super::variogram::{distance, Variogram, VariogramKind};
use crate::error::{Error, Result};

const CV_GRID: usize = 30;
const CV_GOLDEN_ITERS: usize = 30;
const CV_RANGE_LO: f64 = 0.05;
const CV_RANGE_HI: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossValidatedFit {
    pub variogram: Variogram,
    /// Sum of squared leave-one-out residuals at the chosen range.
    pub loo_sse: f64,
    pub degenerate: bool,
}

/// Residuals `y_i − ŷ_{−i}` of every leave-one-out ordinary-kriging
/// prediction, from one inversion of the augmented matrix `A`:
/// `e_i = (A⁻¹ ỹ)_i / (A⁻¹)_ii` with `ỹ = (y, 0)`.
pub fn loo_residuals(inputs: &[Vec<f64>], responses: &[f64], variogram: &Variogram) -> Result<Vec<f64>> {
    let n = inputs.len();
    if n != responses.len() {
        return Err(Error::LengthMismatch { left: n, right: responses.len() });
    }
    if n < 3 {
        return Err(Error::TooFewPoints { needed: 3, got: n });
    }
    let a = gamma_matrix(inputs, variogram, JITTER_FACTOR * variogram.sill)?;
    let inv = a
        .try_inverse()
        .ok_or_else(|| Error::SingularSystem("augmented variogram matrix is not invertible".into()))?;
    let residuals: Vec<f64> = (0..n)
        .map(|i| {
            let c: f64 = (0..n).map(|j| inv[(i, j)] * responses[j]).sum();
            c / inv[(i, i)]
        })
        .collect();
    if residuals.iter().any(|r| !r.is_finite()) {
        return Err(Error::SingularSystem("non-finite leave-one-out residual".into()));
    }
    Ok(residuals)
}

/// Zero-nugget variogram of `kind` whose range minimizes the leave-one-out
/// squared error. The range is searched on a log grid over
/// `[0.05, 10]·h_max` and refined by golden section; the sill is set to the
/// response variance (it does not affect predictions).
pub fn fit_range_cv(inputs: &[Vec<f64>], responses: &[f64], kind: VariogramKind) -> Result<CrossValidatedFit> {
    let n = inputs.len();
    if n != responses.len() {
        return Err(Error::LengthMismatch { left: n, right: responses.len() });
    }
    if n < 3 {
        return Err(Error::TooFewPoints { needed: 3, got: n });
    }
    let mut h_max = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            h_max = h_max.max(distance(&inputs[i], &inputs[j]));
        }
    }
    let mean = responses.iter().sum::<f64>() / n as f64;
    let var = responses.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / n as f64;
    if var == 0.0 || h_max == 0.0 {
        let variogram = Variogram { kind, nugget: 0.0, sill: f64::EPSILON, range: if h_max > 0.0 { h_max } else { 1.0 } };
        return Ok(CrossValidatedFit { variogram, loo_sse: 0.0, degenerate: true });
    }

    let score = |log_r: f64| -> (f64, Variogram) {
        let v = Variogram { kind, nugget: 0.0, sill: var, range: log_r.exp() };
        let sse = loo_residuals(inputs, responses, &v)
            .map(|e| e.iter().map(|r| r * r).sum::<f64>())
            .unwrap_or(f64::INFINITY);
        (sse, v)
    };

    let lo = (CV_RANGE_LO * h_max).ln();
    let hi = (CV_RANGE_HI * h_max).ln();
    let step = (hi - lo) / (CV_GRID - 1) as f64;
    let grid: Vec<(f64, Variogram)> = (0..CV_GRID).map(|k| score(lo + step * k as f64)).collect();
    let best_k = (0..CV_GRID).fold(0, |b, k| if grid[k].0 < grid[b].0 { k } else { b });
    let (mut best_sse, mut best) = grid[best_k];
    if !best_sse.is_finite() {
        return Err(Error::SingularSystem("no candidate range gave a solvable kriging system".into()));
    }

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = lo + step * best_k.saturating_sub(1) as f64;
    let mut b = lo + step * (best_k + 1).min(CV_GRID - 1) as f64;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut vc) = score(c);
    let (mut fd, mut vd) = score(d);
    for _ in 0..CV_GOLDEN_ITERS {
        for (f, v) in [(fc, vc), (fd, vd)] {
            if f < best_sse {
                best_sse = f;
                best = v;
            }
        }
        if fc < fd {
            b = d;
            d = c;
            (fd, vd) = (fc, vc);
            c = b - inv_phi * (b - a);
            (fc, vc) = score(c);
        } else {
            a = c;
            c = d;
            (fc, vc) = (fd, vd);
            d = a + inv_phi * (b - a);
            (fd, vd) = score(d);
        }
    }
    Ok(CrossValidatedFit { variogram: best, loo_sse: best_sse, degenerate: false })
}
