//! Ordinary kriging and the leave-one-out kriging bootstrap.

mod bootstrap;
mod crossval;
mod model;
mod variogram;

pub use bootstrap::{bootstrap_resample, BootstrapFold, BootstrapResult, VariogramSource};
pub use crossval::{fit_range_cv, loo_residuals, CrossValidatedFit};
pub use model::{
    KrigingModel, KrigingModelFile, KrigingWeights, DEFAULT_LAG_BINS, JITTER_FACTOR, MIN_SEPARATION,
};
pub use variogram::{
    empirical_semivariogram, fit_variogram, variogram_cloud, weighted_sse, LagBin, Variogram,
    VariogramFit, VariogramKind,
};
