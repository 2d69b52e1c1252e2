//! Levenberg-Marquardt training with holdout early stopping.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::network::{rmse, Network, TrainingMetadata};
use crate::error::{Error, Result};
use crate::rng;

/// Above this many Jacobian entries (parameters × training rows) the trainer
/// switches from Levenberg-Marquardt to gradient descent.
pub const LM_JACOBIAN_LIMIT: usize = 10_000_000;
const MAX_DAMPING: f64 = 1e10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub hidden_units: usize,
    pub slope: f64,
}

impl Topology {
    /// `2·d + 1` hidden units, standard `tanh`.
    pub fn default_for(input_dim: usize) -> Self {
        Self { hidden_units: 2 * input_dim + 1, slope: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub max_epochs: usize,
    pub damping_init: f64,
    pub damping_up: f64,
    pub damping_down: f64,
    /// Stop once the holdout RMSE (native units) drops below this.
    pub target_rmse: f64,
    /// Epochs without holdout improvement before stopping.
    pub patience: usize,
    pub holdout_fraction: f64,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            max_epochs: 200,
            damping_init: 1e-3,
            damping_up: 10.0,
            damping_down: 0.1,
            target_rmse: 0.0,
            patience: 20,
            holdout_fraction: 0.2,
            seed: 0,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.max_epochs < 1 {
            return bad("max_epochs must be at least 1");
        }
        if !(self.damping_init > 0.0) {
            return bad("damping_init must be positive");
        }
        if !(self.damping_up > 1.0) {
            return bad("damping_up must exceed 1");
        }
        if !(self.damping_down > 0.0 && self.damping_down < 1.0) {
            return bad("damping_down must lie in (0, 1)");
        }
        if !(self.holdout_fraction > 0.0 && self.holdout_fraction < 1.0) {
            return bad("holdout_fraction must lie in (0, 1)");
        }
        if !(self.target_rmse >= 0.0) {
            return bad("target_rmse must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Training RMSE after the accepted step, native units.
    pub train_rmse: f64,
    pub holdout_rmse: Option<f64>,
    pub damping: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trainer {
    LevenbergMarquardt,
    GradientDescent,
}

#[derive(Debug, Clone)]
pub struct TrainedNetwork {
    /// Snapshot with the best holdout RMSE.
    pub network: Network,
    /// One record per accepted epoch; epoch 0 is the initialization.
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_holdout_rmse: Option<f64>,
    pub trainer: Trainer,
}

impl TrainedNetwork {
    pub fn metadata(&self, seed: u64) -> TrainingMetadata {
        TrainingMetadata {
            seed,
            epochs: self.history.last().map_or(0, |r| r.epoch),
            final_train_rmse: self.history.get(self.best_epoch_index()).map_or(0.0, |r| r.train_rmse),
            best_holdout_rmse: self.best_holdout_rmse,
            trainer: match self.trainer {
                Trainer::LevenbergMarquardt => "levenberg_marquardt",
                Trainer::GradientDescent => "gradient_descent",
            }
            .to_string(),
        }
    }

    fn best_epoch_index(&self) -> usize {
        self.history.iter().position(|r| r.epoch == self.best_epoch).unwrap_or(0)
    }
}

/// Trains a one-hidden-layer network on `(x, y)`.
///
/// A seeded `holdout_fraction` of the rows is held out for early stopping;
/// the remaining rows drive damped Gauss-Newton steps
/// `(JᵀJ + μI) δ = −Jᵀr` (solved in the equivalent `n × n` form
/// `δ = −Jᵀ(JJᵀ + μI)⁻¹r` when rows are fewer than parameters). Targets are
/// standardized internally and the scale is folded back into the output
/// layer, so the returned network predicts in the units of `y`.
pub fn train(x: &[Vec<f64>], y: &[f64], topology: Topology, cfg: &TrainingConfig) -> Result<TrainedNetwork> {
    cfg.validate()?;
    let n = x.len();
    if n != y.len() {
        return Err(Error::LengthMismatch { left: n, right: y.len() });
    }
    if n == 0 || n < topology.hidden_units {
        return Err(Error::TooFewSamples { needed: topology.hidden_units.max(1), got: n });
    }
    let d = x[0].len();
    if let Some(row) = x.iter().find(|r| r.len() != d) {
        return Err(Error::DimensionMismatch { expected: d, got: row.len() });
    }

    let mut init_rng = rng::substream(cfg.seed, "ann-init");
    let mut net = Network::random(d, topology.hidden_units, topology.slope, &mut init_rng)?;

    let mean = y.iter().sum::<f64>() / n as f64;
    let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    if var == 0.0 {
        // constant target: the output bias carries it
        net.weights_out.iter_mut().for_each(|w| *w = 0.0);
        net.bias_out = mean;
        let hold = if n >= 2 { Some(0.0) } else { None };
        return Ok(TrainedNetwork {
            network: net,
            history: vec![EpochRecord { epoch: 0, train_rmse: 0.0, holdout_rmse: hold, damping: cfg.damping_init }],
            best_epoch: 0,
            best_holdout_rmse: hold,
            trainer: Trainer::LevenbergMarquardt,
        });
    }
    let scale = var.sqrt();
    let ys: Vec<f64> = y.iter().map(|v| (v - mean) / scale).collect();

    let (train_idx, hold_idx) = split(n, cfg.holdout_fraction, cfg.seed);
    let xt: Vec<&[f64]> = train_idx.iter().map(|&i| x[i].as_slice()).collect();
    let yt: Vec<f64> = train_idx.iter().map(|&i| ys[i]).collect();
    let xh: Vec<&[f64]> = hold_idx.iter().map(|&i| x[i].as_slice()).collect();
    let yh: Vec<f64> = hold_idx.iter().map(|&i| ys[i]).collect();

    let trainer = if net.n_params() * xt.len() > LM_JACOBIAN_LIMIT {
        Trainer::GradientDescent
    } else {
        Trainer::LevenbergMarquardt
    };

    let mut state = Progress::new(&net, &xt, &yt, &xh, &yh, scale, cfg.damping_init);
    let mut damping = cfg.damping_init;
    let mut lr = 0.1;
    for epoch in 1..=cfg.max_epochs {
        let stepped = match trainer {
            Trainer::LevenbergMarquardt => lm_epoch(&mut net, &xt, &yt, &mut damping, cfg),
            Trainer::GradientDescent => gd_epoch(&mut net, &xt, &yt, &mut lr),
        };
        let Some(sse) = stepped else { break };
        if !sse.is_finite() || !net.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        state.record(&net, epoch, sse, damping);
        if state.should_stop(epoch, cfg) {
            break;
        }
    }

    let mut best = state.best_net;
    best.weights_out.iter_mut().for_each(|w| *w *= scale);
    best.bias_out = best.bias_out * scale + mean;
    Ok(TrainedNetwork {
        network: best,
        history: state.history,
        best_epoch: state.best_epoch,
        best_holdout_rmse: state.best_holdout.map(|r| r * scale),
        trainer,
    })
}

/// Seeded shuffle; the first `floor(n·fraction)` rows (at least one when
/// `n ≥ 2`) are held out.
fn split(n: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    if n < 2 {
        return (idx, Vec::new());
    }
    idx.shuffle(&mut rng::substream(seed, "ann-holdout"));
    let n_hold = ((n as f64 * fraction).floor() as usize).clamp(1, n - 1);
    let train = idx.split_off(n_hold);
    (train, idx)
}

struct Progress {
    history: Vec<EpochRecord>,
    best_net: Network,
    best_epoch: usize,
    best_holdout: Option<f64>,
    best_train: f64,
    since_improvement: usize,
    hold_x: Vec<Vec<f64>>,
    hold_y: Vec<f64>,
    n_train: usize,
    scale: f64,
}

impl Progress {
    fn new(net: &Network, xt: &[&[f64]], yt: &[f64], xh: &[&[f64]], yh: &[f64], scale: f64, damping: f64) -> Self {
        let sse = sse(net, xt, yt);
        let mut p = Self {
            history: Vec::new(),
            best_net: net.clone(),
            best_epoch: 0,
            best_holdout: None,
            best_train: f64::INFINITY,
            since_improvement: 0,
            hold_x: xh.iter().map(|r| r.to_vec()).collect(),
            hold_y: yh.to_vec(),
            n_train: xt.len(),
            scale,
        };
        p.record(net, 0, sse, damping);
        p
    }

    fn holdout_rmse(&self, net: &Network) -> Option<f64> {
        if self.hold_x.is_empty() {
            return None;
        }
        let pred: Vec<f64> = self.hold_x.iter().map(|x| net.forward_unchecked(x)).collect();
        rmse(&pred, &self.hold_y).ok()
    }

    fn record(&mut self, net: &Network, epoch: usize, sse: f64, damping: f64) {
        let train_rmse = (sse / self.n_train as f64).sqrt();
        let hold = self.holdout_rmse(net);
        self.history.push(EpochRecord {
            epoch,
            train_rmse: train_rmse * self.scale,
            holdout_rmse: hold.map(|h| h * self.scale),
            damping,
        });
        let improved = match (hold, self.best_holdout) {
            (Some(h), Some(b)) => h < b,
            (Some(_), None) => true,
            (None, _) => train_rmse < self.best_train,
        };
        if improved {
            self.best_net = net.clone();
            self.best_epoch = epoch;
            self.best_holdout = hold;
            self.best_train = train_rmse;
            self.since_improvement = 0;
        } else {
            self.since_improvement += 1;
        }
    }

    fn should_stop(&self, epoch: usize, cfg: &TrainingConfig) -> bool {
        if self.since_improvement >= cfg.patience && epoch >= cfg.patience {
            return true;
        }
        matches!(self.best_holdout, Some(h) if h * self.scale < cfg.target_rmse)
    }
}

fn sse(net: &Network, x: &[&[f64]], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(xi, yi)| {
        let r = net.forward_unchecked(xi) - yi;
        r * r
    }).sum()
}

/// One Levenberg-Marquardt epoch: raises the damping until a step lowers
/// the training SSE. Returns the new SSE, or `None` once the damping limit
/// is hit without an accepted step.
fn lm_epoch(net: &mut Network, x: &[&[f64]], y: &[f64], damping: &mut f64, cfg: &TrainingConfig) -> Option<f64> {
    let n = x.len();
    let p = net.n_params();
    let mut jac = DMatrix::zeros(n, p);
    let mut resid = DVector::zeros(n);
    let mut row = vec![0.0; p];
    for (i, (xi, yi)) in x.iter().zip(y).enumerate() {
        let out = net.gradient_into(xi, &mut row);
        resid[i] = out - yi;
        for (k, g) in row.iter().enumerate() {
            jac[(i, k)] = *g;
        }
    }
    let current = resid.norm_squared();
    let params = DVector::from_vec(net.params());
    let dual = n < p;
    let (normal, rhs) = if dual {
        (&jac * jac.transpose(), resid.clone())
    } else {
        (jac.transpose() * &jac, -(jac.transpose() * &resid))
    };
    let mut trial = net.clone();
    while *damping <= MAX_DAMPING {
        let mut damped = normal.clone();
        for k in 0..damped.nrows() {
            damped[(k, k)] += *damping;
        }
        let step = damped.cholesky().map(|c| {
            let s = c.solve(&rhs);
            if dual { -(jac.transpose() * s) } else { s }
        });
        if let Some(step) = step {
            trial.set_params((&params + step).as_slice());
            let new = sse(&trial, x, y);
            if new < current {
                *net = trial;
                *damping = (*damping * cfg.damping_down).max(f64::MIN_POSITIVE);
                return Some(new);
            }
        }
        *damping *= cfg.damping_up;
    }
    None
}

/// Steepest descent with a backtracking step size.
fn gd_epoch(net: &mut Network, x: &[&[f64]], y: &[f64], lr: &mut f64) -> Option<f64> {
    let p = net.n_params();
    let mut grad = vec![0.0; p];
    let mut row = vec![0.0; p];
    let mut current = 0.0;
    for (xi, yi) in x.iter().zip(y) {
        let r = net.gradient_into(xi, &mut row) - yi;
        current += r * r;
        for (g, j) in grad.iter_mut().zip(&row) {
            *g += 2.0 * r * j;
        }
    }
    let n = x.len() as f64;
    let params = net.params();
    let mut trial = net.clone();
    for _ in 0..40 {
        let next: Vec<f64> = params.iter().zip(&grad).map(|(w, g)| w - *lr * g / n).collect();
        trial.set_params(&next);
        let new = sse(&trial, x, y);
        if new < current {
            *net = trial;
            *lr *= 1.1;
            return Some(new);
        }
        *lr *= 0.5;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::lhs_unit;

    #[test]
    fn constant_target() {
        let x = lhs_unit(2, 30, 3).unwrap();
        let y = vec![4.2; 30];
        let t = train(&x, &y, Topology { hidden_units: 3, slope: 1.0 }, &TrainingConfig::default()).unwrap();
        for q in lhs_unit(2, 50, 4).unwrap() {
            assert!((t.network.forward(&q).unwrap() - 4.2).abs() < 1e-6);
        }
    }

    #[test]
    fn identity_target() {
        let x = lhs_unit(1, 50, 10).unwrap();
        let y: Vec<f64> = x.iter().map(|r| r[0]).collect();
        let cfg = TrainingConfig { seed: 5, ..Default::default() };
        let t = train(&x, &y, Topology { hidden_units: 4, slope: 1.0 }, &cfg).unwrap();
        assert!(t.best_holdout_rmse.unwrap() <= 0.01, "{:?}", t.best_holdout_rmse);
    }

    #[test]
    fn accepted_rmse_never_increases() {
        let x = lhs_unit(3, 60, 2).unwrap();
        let y: Vec<f64> = x.iter().map(|r| (3.0 * r[0]).sin() + r[1] * r[2]).collect();
        let t = train(&x, &y, Topology { hidden_units: 6, slope: 1.0 }, &TrainingConfig::default()).unwrap();
        for w in t.history.windows(2) {
            assert!(w[1].train_rmse <= w[0].train_rmse);
        }
    }

    #[test]
    fn deterministic() {
        let x = lhs_unit(2, 40, 7).unwrap();
        let y: Vec<f64> = x.iter().map(|r| r[0] * r[0] - r[1]).collect();
        let cfg = TrainingConfig { seed: 9, max_epochs: 30, ..Default::default() };
        let a = train(&x, &y, Topology { hidden_units: 5, slope: 1.0 }, &cfg).unwrap();
        let b = train(&x, &y, Topology { hidden_units: 5, slope: 1.0 }, &cfg).unwrap();
        assert_eq!(a.network, b.network);
    }

    #[test]
    fn too_few_samples() {
        let x = lhs_unit(2, 3, 1).unwrap();
        let r = train(&x, &[1.0, 2.0, 3.0], Topology { hidden_units: 5, slope: 1.0 }, &TrainingConfig::default());
        assert!(matches!(r, Err(Error::TooFewSamples { .. })));
    }

    #[test]
    fn config_validation() {
        let bad = TrainingConfig { damping_up: 0.5, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = TrainingConfig { holdout_fraction: 1.0, ..Default::default() };
        assert!(bad.validate().is_err());
        assert!(TrainingConfig::default().validate().is_ok());
    }

    #[test]
    fn split_is_disjoint_and_complete() {
        let (t, h) = split(50, 0.2, 3);
        assert_eq!(h.len(), 10);
        let mut all: Vec<usize> = t.iter().chain(&h).copied().collect();
        all.sort();
        assert_eq!(all, (0..50).collect::<Vec<_>>());
    }
}
