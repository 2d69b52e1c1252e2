//! Particle swarm minimization of a robust `μ + k·σ` objective.
//!
//! Each particle position is a candidate nominal design in the unit cube.
//! A particle is scored by running a Monte Carlo analysis around its
//! (denormalized) position and combining the target statistics with a
//! penalty for breaching the constraint.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format;
use crate::oracle::Evaluator;
use crate::rng;
use crate::sampling::lhs_unit;
use crate::space::ParameterSpace;
use crate::statistics::{monte_carlo, MCConfig, MCReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    pub best_position: Vec<f64>,
    pub best_score: f64,
}

impl Particle {
    pub fn at_rest(position: Vec<f64>) -> Self {
        let d = position.len();
        Self { best_position: position.clone(), position, velocity: vec![0.0; d], best_score: f64::INFINITY }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SwarmConfig {
    pub n_particles: usize,
    pub max_iterations: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    /// Inner Monte Carlo run at every particle evaluation. Its seed is
    /// replaced per iteration.
    pub mc: MCConfig,
    /// Runs of the final Monte Carlo at the returned design.
    pub final_runs: usize,
    pub seed: u64,
}

impl Default for SwarmConfig {
    fn default() -> Self {
        Self {
            n_particles: 30,
            max_iterations: 100,
            inertia: 0.729,
            cognitive: 1.494,
            social: 1.494,
            mc: MCConfig { n_runs: 200, ..MCConfig::default() },
            final_runs: 1000,
            seed: 0,
        }
    }
}

impl SwarmConfig {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.n_particles < 1 || self.max_iterations < 1 {
            return Err(Error::InvalidConfig("n_particles and max_iterations must be at least 1".into()));
        }
        for (name, v) in [("inertia", self.inertia), ("cognitive", self.cognitive), ("social", self.social)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} weight must be finite and non-negative")));
            }
        }
        if self.final_runs < 2 {
            return Err(Error::InvalidConfig("final_runs must be at least 2".into()));
        }
        self.mc.validate(dim)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    /// Mean must stay at or below the bound.
    Le,
    /// Mean must stay at or above the bound.
    Ge,
}

impl std::str::FromStr for Sense {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "le" | "<=" => Ok(Sense::Le),
            "ge" | ">=" => Ok(Sense::Ge),
            other => Err(Error::InvalidConfig(format!("unknown constraint sense `{other}` (expected le or ge)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub fom: String,
    /// Native units.
    pub bound: f64,
    pub sense: Sense,
}

impl Constraint {
    /// Relative breach of the bound by `mean`; 0 when satisfied.
    pub fn violation(&self, mean: f64) -> f64 {
        let excess = match self.sense {
            Sense::Le => mean - self.bound,
            Sense::Ge => self.bound - mean,
        };
        let scale = if self.bound != 0.0 { self.bound.abs() } else { 1.0 };
        (excess / scale).max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveSpec {
    pub target: String,
    pub k_sigma: f64,
    pub constraint: Option<Constraint>,
    pub penalty_weight: f64,
}

impl ObjectiveSpec {
    /// `μ + 3σ` of `target`, unconstrained.
    pub fn robust(target: impl Into<String>) -> Self {
        Self { target: target.into(), k_sigma: 3.0, constraint: None, penalty_weight: 100.0 }
    }

    pub fn subject_to(mut self, fom: impl Into<String>, bound: f64, sense: Sense) -> Self {
        self.constraint = Some(Constraint { fom: fom.into(), bound, sense });
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.penalty_weight > 0.0 && self.penalty_weight.is_finite()) {
            return Err(Error::InvalidConfig("penalty_weight must be positive".into()));
        }
        if !self.k_sigma.is_finite() {
            return Err(Error::InvalidConfig("k_sigma must be finite".into()));
        }
        if let Some(c) = &self.constraint {
            if !c.bound.is_finite() {
                return Err(Error::InvalidConfig("constraint bound must be finite".into()));
            }
        }
        Ok(())
    }

    fn check_names(&self, names: &[String]) -> Result<()> {
        let known = |n: &str| names.iter().any(|m| m == n);
        if !known(&self.target) {
            return Err(Error::MissingFoM(self.target.clone()));
        }
        match &self.constraint {
            Some(c) if !known(&c.fom) => Err(Error::MissingFoM(c.fom.clone())),
            _ => Ok(()),
        }
    }

    pub fn is_feasible(&self, report: &MCReport) -> Result<bool> {
        match &self.constraint {
            None => Ok(true),
            Some(c) => Ok(c.violation(report.fom(&c.fom)?.mean) == 0.0),
        }
    }
}

/// `μ_target + k·σ_target + penalty_weight · violation`.
pub fn objective_eval(report: &MCReport, spec: &ObjectiveSpec) -> Result<f64> {
    let target = report.fom(&spec.target)?;
    let penalty = match &spec.constraint {
        Some(c) => spec.penalty_weight * c.violation(report.fom(&c.fom)?.mean),
        None => 0.0,
    };
    Ok(target.robust(spec.k_sigma) + penalty)
}

/// One velocity/position step with the given per-dimension attraction
/// draws. Positions leaving the unit cube are clamped and the velocity on
/// that dimension is zeroed.
pub fn update_particle_with(p: &Particle, global_best: &[f64], cfg: &SwarmConfig, tau_p: &[f64], tau_g: &[f64]) -> Particle {
    let d = p.position.len();
    assert!(
        global_best.len() == d && tau_p.len() == d && tau_g.len() == d && p.velocity.len() == d,
        "particle dimensions disagree"
    );
    let mut next = p.clone();
    for i in 0..d {
        let x = p.position[i];
        let v = cfg.inertia * p.velocity[i]
            + cfg.cognitive * tau_p[i] * (p.best_position[i] - x)
            + cfg.social * tau_g[i] * (global_best[i] - x);
        let moved = x + v;
        if moved < 0.0 || moved > 1.0 {
            next.position[i] = moved.clamp(0.0, 1.0);
            next.velocity[i] = 0.0;
        } else {
            next.position[i] = moved;
            next.velocity[i] = v;
        }
    }
    next
}

/// [`update_particle_with`] with `τ_p`, `τ_g` drawn uniformly from `[0, 1)`,
/// alternating per dimension.
pub fn update_particle<R: Rng + ?Sized>(p: &Particle, global_best: &[f64], cfg: &SwarmConfig, rng: &mut R) -> Particle {
    let d = p.position.len();
    let mut tau_p = Vec::with_capacity(d);
    let mut tau_g = Vec::with_capacity(d);
    for _ in 0..d {
        tau_p.push(rng.random::<f64>());
        tau_g.push(rng.random::<f64>());
    }
    update_particle_with(p, global_best, cfg, &tau_p, &tau_g)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Global best score after this iteration.
    pub best_score: f64,
    /// Best score among this iteration's evaluations.
    pub iteration_best: f64,
    pub feasible_particles: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub format_version: String,
    pub objective: ObjectiveSpec,
    pub config: SwarmConfig,
    /// Returned design, native units: the archived global best with the
    /// lowest final Monte Carlo score.
    pub best_x: Vec<f64>,
    pub best_position: Vec<f64>,
    /// Search score of the returned design (inner Monte Carlo).
    pub best_score: f64,
    /// Seed of the inner Monte Carlo that produced `best_score`.
    pub best_inner_seed: u64,
    pub best_iteration: usize,
    pub trace: Vec<IterationRecord>,
    /// Best design after the initial swarm evaluation, native units.
    pub initial_best_x: Vec<f64>,
    pub initial_best_score: f64,
    /// Seed shared by the two final Monte Carlo runs below.
    pub final_seed: u64,
    pub final_report: MCReport,
    pub final_score: f64,
    /// Same final Monte Carlo, run at the initial best design.
    pub initial_report: MCReport,
    pub initial_final_score: f64,
    pub feasible: bool,
    /// Archived global-best designs re-scored by the final Monte Carlo.
    pub candidates_validated: usize,
    pub evaluations: usize,
}

impl OptimizationResult {
    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("result serializes")
    }
}

/// Inner Monte Carlo seed for every evaluation made in `iteration`.
pub fn iteration_seed(seed: u64, iteration: usize) -> u64 {
    rng::substream_seed(seed, &format!("pso-mc-{iteration}"))
}

/// Minimizes the robust objective over the box of `space`.
///
/// Iteration 0 evaluates an LHS-initialized swarm at rest; each later
/// iteration moves every particle and re-evaluates it. All evaluations in an
/// iteration share one inner Monte Carlo seed so particles are compared on
/// common random numbers. Bests update only on strict improvement, scanning
/// particles in index order. Every design that held the global best is then
/// re-scored with a `final_runs` Monte Carlo on a shared seed and the lowest
/// final score is returned.
pub fn pso_optimize<E: Evaluator + ?Sized>(
    evaluator: &E,
    space: &ParameterSpace,
    spec: &ObjectiveSpec,
    cfg: &SwarmConfig,
) -> Result<OptimizationResult> {
    let d = space.dim();
    cfg.validate(d)?;
    spec.validate()?;
    spec.check_names(evaluator.fom_names())?;

    let score_at = |position: &[f64], seed: u64, runs: usize| -> Result<(f64, MCReport)> {
        let x = space.denormalize(position)?;
        let mc = MCConfig { seed, n_runs: runs, ..cfg.mc.clone() };
        let report = monte_carlo(evaluator, space, &x, &mc)?;
        Ok((objective_eval(&report, spec)?, report))
    };
    let evaluate_swarm = |swarm: &[Particle], iteration: usize| -> Result<Vec<(f64, bool)>> {
        let seed = iteration_seed(cfg.seed, iteration);
        swarm
            .par_iter()
            .map(|p| {
                let (score, report) = score_at(&p.position, seed, cfg.mc.n_runs)?;
                Ok((score, spec.is_feasible(&report)?))
            })
            .collect()
    };

    let mut motion = rng::substream(cfg.seed, "pso-motion");
    let mut swarm: Vec<Particle> = lhs_unit(d, cfg.n_particles, rng::substream_seed(cfg.seed, "pso-init"))?
        .into_iter()
        .map(Particle::at_rest)
        .collect();
    // every position that became the global best, in order
    let mut archive: Vec<Candidate> = Vec::new();
    let mut best_score = f64::INFINITY;
    let mut trace = Vec::with_capacity(cfg.max_iterations);
    let mut evaluations = 0;
    let mut any_feasible = false;

    for iteration in 0..cfg.max_iterations {
        if iteration > 0 {
            let global = &archive.last().expect("iteration 0 sets a best").position;
            swarm = swarm.iter().map(|p| update_particle(p, global, cfg, &mut motion)).collect();
        }
        let scores = evaluate_swarm(&swarm, iteration)?;
        evaluations += swarm.len();
        let mut iteration_best = f64::INFINITY;
        let mut feasible_particles = 0;
        for (p, &(score, feasible)) in swarm.iter_mut().zip(&scores) {
            if !score.is_finite() {
                return Err(Error::InvalidConfig(format!("objective is not finite at iteration {iteration}")));
            }
            feasible_particles += usize::from(feasible);
            iteration_best = iteration_best.min(score);
            if score < p.best_score {
                p.best_score = score;
                p.best_position = p.position.clone();
            }
            if score < best_score {
                best_score = score;
                if archive.last().is_some_and(|c| c.iteration == iteration) {
                    archive.pop();
                }
                archive.push(Candidate { position: p.position.clone(), score, iteration });
            }
        }
        any_feasible |= feasible_particles > 0;
        log::debug!("pso iteration {iteration}: best {best_score:.6e}, {feasible_particles} feasible");
        trace.push(IterationRecord { iteration, best_score, iteration_best, feasible_particles });
    }
    if !any_feasible {
        log::warn!("no particle satisfied the constraint; returning the best penalized design");
    }

    // Search scores come from short, per-iteration Monte Carlo runs. Re-score
    // every archived best on one common long run and keep the winner; the
    // initial best is part of the archive, so the result never scores worse
    // than it under this run.
    let final_seed = rng::substream_seed(cfg.seed, "pso-final");
    let validated = archive
        .par_iter()
        .map(|c| score_at(&c.position, final_seed, cfg.final_runs))
        .collect::<Result<Vec<_>>>()?;
    let pick = (0..archive.len()).fold(0, |b, k| if validated[k].0 < validated[b].0 { k } else { b });
    let chosen = &archive[pick];
    let (final_score, final_report) = validated[pick].clone();
    let (initial_final_score, initial_report) = validated[0].clone();
    Ok(OptimizationResult {
        format_version: format::current(),
        objective: spec.clone(),
        config: cfg.clone(),
        best_x: space.denormalize(&chosen.position)?,
        best_position: chosen.position.clone(),
        best_score: chosen.score,
        best_inner_seed: iteration_seed(cfg.seed, chosen.iteration),
        best_iteration: chosen.iteration,
        trace,
        initial_best_x: space.denormalize(&archive[0].position)?,
        initial_best_score: archive[0].score,
        final_seed,
        feasible: spec.is_feasible(&final_report)?,
        final_report,
        final_score,
        initial_report,
        initial_final_score,
        candidates_validated: archive.len(),
        evaluations,
    })
}

struct Candidate {
    position: Vec<f64>,
    score: f64,
    iteration: usize,
}
