//! Kriging-bootstrapped neural metamodels for variability-aware design.
//!
//! The flow: draw a Latin Hypercube design over a bounded parameter space,
//! evaluate it with a simulator, relabel the responses with leave-one-out
//! ordinary kriging, train one small neural network per figure of merit,
//! then run Monte Carlo variation analysis and particle swarm minimization
//! of `μ + k·σ` on the cheap metamodels.
//!
//! All modeling happens in normalized coordinates (`[0, 1]^d`); files and
//! simulators use native units.

pub mod ann;
pub mod error;
pub mod format;
pub mod kriging;
pub mod oracle;
pub mod pipeline;
pub mod pso;
pub mod rng;
pub mod sampling;
pub mod space;
pub mod speed;
pub mod statistics;

pub use error::{Error, Result};
pub use oracle::{Evaluator, PllOracle};
pub use pipeline::{build_from_samples, build_metamodels, verify, MetamodelBundle, PipelineConfig};
pub use pso::{objective_eval, pso_optimize, ObjectiveSpec, OptimizationResult, Sense, SwarmConfig};
pub use sampling::{lhs_sample, SampleSet};
pub use space::{ParameterDef, ParameterSpace};
pub use statistics::{histogram, monte_carlo, MCConfig, MCReport};
