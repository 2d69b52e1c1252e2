//! Simulator interface, the synthetic PLL oracle and CSV sample exchange.

mod pll;
mod samples_csv;

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{Error, Result};

pub use pll::{FomSurface, PllOracle, Ripple, RippleTerm, BOX_SPREAD, GENERATOR_SEED, PLL_FOMS, PLL_TARGETS};
pub use samples_csv::{load_samples, load_table, read_samples, read_table, save_samples, write_samples, write_table};

pub type FomValues = BTreeMap<String, f64>;

/// Anything that maps a native-unit design point to figures of merit:
/// a circuit simulator, an analytic oracle, or a trained metamodel bundle.
///
/// `evaluate` returns one value per name in [`fom_names`](Self::fom_names),
/// in that order, and must be deterministic.
pub trait Evaluator: Sync {
    fn fom_names(&self) -> &[String];

    fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>>;

    /// Whether concurrent `evaluate` calls are safe. Serial evaluators are
    /// driven from a single thread.
    fn is_concurrent(&self) -> bool {
        true
    }

    /// Evaluates every row; any failure is reported as
    /// [`Error::SimulatorFailure`] naming the first failing row.
    fn evaluate_batch(&self, xs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let one = |(row, x): (usize, &Vec<f64>)| -> Result<Vec<f64>> {
            let out = self.evaluate(x).map_err(|e| Error::SimulatorFailure {
                row,
                input: x.clone(),
                reason: e.to_string(),
            })?;
            if let Some(bad) = out.iter().position(|v| !v.is_finite()) {
                return Err(Error::SimulatorFailure {
                    row,
                    input: x.clone(),
                    reason: format!("non-finite `{}`", self.fom_names()[bad]),
                });
            }
            Ok(out)
        };
        if self.is_concurrent() {
            xs.par_iter().enumerate().map(one).collect()
        } else {
            xs.iter().enumerate().map(one).collect()
        }
    }

    fn evaluate_map(&self, x: &[f64]) -> Result<FomValues> {
        let values = self.evaluate(x)?;
        Ok(self.fom_names().iter().cloned().zip(values).collect())
    }

    fn fom_index(&self, name: &str) -> Result<usize> {
        self.fom_names()
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::MissingFoM(name.to_string()))
    }
}
