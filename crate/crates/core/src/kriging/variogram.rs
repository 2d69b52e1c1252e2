//! Semivariogram models, empirical estimation and weighted least-squares
//! fitting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariogramKind {
    #[default]
    Gaussian,
    Exponential,
    Spherical,
}

impl VariogramKind {
    /// Normalized correlation-loss curve `f(h/range)` in `[0,1]`.
    fn shape(self, t: f64) -> f64 {
        match self {
            VariogramKind::Gaussian => 1.0 - (-(t * t)).exp(),
            VariogramKind::Exponential => 1.0 - (-t).exp(),
            VariogramKind::Spherical => {
                if t >= 1.0 {
                    1.0
                } else {
                    1.5 * t - 0.5 * t * t * t
                }
            }
        }
    }
}

impl std::str::FromStr for VariogramKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" => Ok(Self::Gaussian),
            "exponential" => Ok(Self::Exponential),
            "spherical" => Ok(Self::Spherical),
            other => Err(Error::InvalidConfig(format!("unknown variogram kind `{other}`"))),
        }
    }
}

/// Isotropic semivariogram `γ(h) = nugget + sill·f(h/range)` for `h > 0`
/// and `γ(0) = 0`, so training points are interpolated exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Variogram {
    pub kind: VariogramKind,
    pub nugget: f64,
    pub sill: f64,
    pub range: f64,
}

impl Variogram {
    pub fn new(kind: VariogramKind, nugget: f64, sill: f64, range: f64) -> Result<Self> {
        if !(nugget >= 0.0 && nugget.is_finite()) {
            return Err(Error::InvalidConfig(format!("nugget must be >= 0, got {nugget}")));
        }
        if !(sill > 0.0 && sill.is_finite()) {
            return Err(Error::InvalidConfig(format!("sill must be > 0, got {sill}")));
        }
        if !(range > 0.0 && range.is_finite()) {
            return Err(Error::InvalidConfig(format!("range must be > 0, got {range}")));
        }
        Ok(Self { kind, nugget, sill, range })
    }

    pub fn eval(&self, h: f64) -> f64 {
        if h <= 0.0 {
            0.0
        } else {
            self.nugget + self.sill * self.kind.shape(h / self.range)
        }
    }
}

/// One lag class of an empirical semivariogram.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LagBin {
    /// Mean pair distance within the class.
    pub lag: f64,
    pub gamma: f64,
    pub pairs: usize,
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn check_points(inputs: &[Vec<f64>], responses: &[f64]) -> Result<()> {
    if inputs.len() != responses.len() {
        return Err(Error::LengthMismatch { left: inputs.len(), right: responses.len() });
    }
    if inputs.len() < 2 {
        return Err(Error::TooFewPoints { needed: 2, got: inputs.len() });
    }
    Ok(())
}

/// Classical (Matheron) estimator over all point pairs.
///
/// Pairs are binned into `n_bins` equal-width classes spanning `[0, h_max]`,
/// where `h_max` is the largest pair distance; a pair at distance `h` goes
/// to class `min(floor(h / width), n_bins − 1)`. Each nonempty class reports
/// `γ̂ = Σ(y_i − y_j)² / (2·pairs)` and the mean distance of its pairs. Empty
/// classes are dropped.
pub fn empirical_semivariogram(
    inputs: &[Vec<f64>],
    responses: &[f64],
    n_bins: usize,
) -> Result<Vec<LagBin>> {
    check_points(inputs, responses)?;
    if n_bins == 0 {
        return Err(Error::InvalidConfig("n_bins must be at least 1".into()));
    }
    let n = inputs.len();
    let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
    let mut h_max = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            let h = distance(&inputs[i], &inputs[j]);
            let dy = responses[i] - responses[j];
            h_max = h_max.max(h);
            pairs.push((h, dy * dy));
        }
    }
    let width = h_max / n_bins as f64;
    let mut sum_h = vec![0.0; n_bins];
    let mut sum_sq = vec![0.0; n_bins];
    let mut count = vec![0usize; n_bins];
    for (h, sq) in pairs {
        let k = if width > 0.0 { ((h / width).floor() as usize).min(n_bins - 1) } else { 0 };
        sum_h[k] += h;
        sum_sq[k] += sq;
        count[k] += 1;
    }
    Ok((0..n_bins)
        .filter(|&k| count[k] > 0)
        .map(|k| LagBin {
            lag: sum_h[k] / count[k] as f64,
            gamma: sum_sq[k] / (2.0 * count[k] as f64),
            pairs: count[k],
        })
        .collect())
}

/// Unbinned variogram cloud: one entry per pair, in `(i, j)`, `i < j` order.
pub fn variogram_cloud(inputs: &[Vec<f64>], responses: &[f64]) -> Result<Vec<LagBin>> {
    check_points(inputs, responses)?;
    let n = inputs.len();
    let mut out = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let dy = responses[i] - responses[j];
            out.push(LagBin { lag: distance(&inputs[i], &inputs[j]), gamma: 0.5 * dy * dy, pairs: 1 });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariogramFit {
    pub variogram: Variogram,
    /// Pair-count weighted squared error against the empirical points.
    pub weighted_sse: f64,
    /// Set when every empirical γ̂ was zero and a flat variogram was returned.
    pub degenerate: bool,
}

const RANGE_GRID: usize = 200;
const GOLDEN_ITERS: usize = 80;

/// Weighted squared error of a candidate model against `empirical`.
pub fn weighted_sse(variogram: &Variogram, empirical: &[LagBin]) -> f64 {
    empirical
        .iter()
        .map(|b| {
            let r = variogram.eval(b.lag) - b.gamma;
            b.pairs as f64 * r * r
        })
        .sum()
}

/// Fits nugget, sill and range by pair-count weighted least squares.
///
/// For a fixed range the model is linear in `(nugget, sill)`, so the fit
/// profiles out those two exactly (a bound-constrained 2×2 problem with
/// `nugget ≥ 0`, `sill ≥ ε`) and searches the range on a log grid over
/// `[1e-3, 10]·h_max` followed by golden-section refinement around the best
/// grid cell. Requires at least three nonempty lag classes.
pub fn fit_variogram(empirical: &[LagBin], kind: VariogramKind) -> Result<VariogramFit> {
    let bins: Vec<LagBin> = empirical.iter().copied().filter(|b| b.pairs > 0).collect();
    if bins.len() < 3 {
        return Err(Error::TooFewPoints { needed: 3, got: bins.len() });
    }
    let h_max = bins.iter().fold(0.0f64, |m, b| m.max(b.lag));
    let g_max = bins.iter().fold(0.0f64, |m, b| m.max(b.gamma));
    if g_max <= 0.0 || h_max <= 0.0 {
        let range = if h_max > 0.0 { h_max } else { 1.0 };
        let variogram = Variogram { kind, nugget: 0.0, sill: f64::EPSILON, range };
        log::warn!("flat empirical semivariogram; using nugget 0, sill ε, range {range}");
        return Ok(VariogramFit { variogram, weighted_sse: weighted_sse(&variogram, &bins), degenerate: true });
    }
    let sill_floor = g_max * 1e-9;

    let profile = |log_r: f64| -> (f64, Variogram) {
        let range = log_r.exp();
        let (nugget, sill) = linear_part(&bins, kind, range, sill_floor);
        let v = Variogram { kind, nugget, sill, range };
        (weighted_sse(&v, &bins), v)
    };

    let lo = (1e-3 * h_max).ln();
    let hi = (10.0 * h_max).ln();
    let step = (hi - lo) / (RANGE_GRID - 1) as f64;
    let grid: Vec<(f64, Variogram)> = (0..RANGE_GRID).map(|k| profile(lo + step * k as f64)).collect();
    let (best_k, _) = grid
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |(bk, bs), (k, (s, _))| if *s < bs { (k, *s) } else { (bk, bs) });
    let (mut best_sse, mut best) = grid[best_k];

    // golden section on the bracketing cells
    let mut a = lo + step * best_k.saturating_sub(1) as f64;
    let mut b = lo + step * (best_k + 1).min(RANGE_GRID - 1) as f64;
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut vc) = profile(c);
    let (mut fd, mut vd) = profile(d);
    for _ in 0..GOLDEN_ITERS {
        if fc < best_sse {
            best_sse = fc;
            best = vc;
        }
        if fd < best_sse {
            best_sse = fd;
            best = vd;
        }
        if fc < fd {
            b = d;
            d = c;
            (fd, vd) = (fc, vc);
            c = b - inv_phi * (b - a);
            (fc, vc) = profile(c);
        } else {
            a = c;
            c = d;
            (fc, vc) = (fd, vd);
            d = a + inv_phi * (b - a);
            (fd, vd) = profile(d);
        }
    }
    Ok(VariogramFit { variogram: best, weighted_sse: best_sse, degenerate: false })
}

/// Minimizes `Σ w (γ̂ − a − b·f)²` over `a ≥ 0`, `b ≥ floor` by checking each
/// active set of the box constraints.
fn linear_part(bins: &[LagBin], kind: VariogramKind, range: f64, floor: f64) -> (f64, f64) {
    let (mut sw, mut sf, mut sff, mut sg, mut sfg) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for bin in bins {
        let w = bin.pairs as f64;
        let f = kind.shape(bin.lag / range);
        sw += w;
        sf += w * f;
        sff += w * f * f;
        sg += w * bin.gamma;
        sfg += w * f * bin.gamma;
    }
    let sse = |a: f64, b: f64| -> f64 {
        bins.iter()
            .map(|bin| {
                let r = bin.gamma - a - b * kind.shape(bin.lag / range);
                bin.pairs as f64 * r * r
            })
            .sum()
    };
    let mut candidates = Vec::with_capacity(4);
    let det = sw * sff - sf * sf;
    if det.abs() > 1e-14 * sw * sff {
        let a = (sg * sff - sf * sfg) / det;
        let b = (sw * sfg - sf * sg) / det;
        if a >= 0.0 && b >= floor {
            candidates.push((a, b));
        }
    }
    if sff > 0.0 {
        let b = sfg / sff;
        if b >= floor {
            candidates.push((0.0, b));
        }
    }
    let a = ((sg - floor * sf) / sw).max(0.0);
    candidates.push((a, floor));
    candidates.push((0.0, floor));
    let (_, a, b) = candidates
        .into_iter()
        .map(|(a, b)| (sse(a, b), a, b))
        .fold((f64::INFINITY, 0.0, floor), |best, c| if c.0 < best.0 { c } else { best });
    (a, b)
}
