//! Wall-clock comparison of batch prediction: the neural bundle against
//! ordinary kriging fitted to the same samples, on identical queries.

use std::hint::black_box;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format;
use crate::oracle::Evaluator;
use crate::pipeline::{kriging_counterparts, MetamodelBundle};
use crate::rng;
use crate::sampling::lhs_unit;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpeedConfig {
    pub queries: usize,
    /// Timed repetitions per path; the median is reported.
    pub repeats: usize,
    pub seed: u64,
}

impl Default for SpeedConfig {
    fn default() -> Self {
        Self { queries: 1000, repeats: 5, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedComparison {
    pub format_version: String,
    pub queries: usize,
    pub dim: usize,
    pub training_points: usize,
    pub foms: Vec<String>,
    pub query_seed: u64,
    /// Both paths run on one thread so the ratio reflects work, not cores.
    pub threads: usize,
    pub ann_seconds: f64,
    pub kriging_seconds: f64,
    /// `kriging_seconds / ann_seconds`.
    pub ratio: f64,
    pub ann_runs: Vec<f64>,
    pub kriging_runs: Vec<f64>,
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    if s.len() % 2 == 1 {
        s[m]
    } else {
        0.5 * (s[m - 1] + s[m])
    }
}

/// Times `queries` predictions of every FoM through the bundle's networks
/// and through kriging models over the bundle's stored samples. Fitting
/// the kriging variograms is not timed. One untimed warm-up pass precedes
/// the interleaved timed repeats.
pub fn compare_prediction_speed(bundle: &MetamodelBundle, cfg: &SpeedConfig) -> Result<SpeedComparison> {
    if cfg.queries == 0 {
        return Err(Error::ZeroSamples);
    }
    if cfg.repeats == 0 {
        return Err(Error::InvalidConfig("repeats must be at least 1".into()));
    }
    let dim = bundle.space().dim();
    let query_seed = rng::substream_seed(cfg.seed, "bench-queries");
    let queries = lhs_unit(dim, cfg.queries, query_seed)?;
    let kriging = kriging_counterparts(bundle)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    let run_ann = || -> Result<f64> {
        let t = Instant::now();
        black_box(bundle.predict_unit_batch(black_box(&queries))?);
        Ok(t.elapsed().as_secs_f64())
    };
    let run_kriging = || -> Result<f64> {
        let t = Instant::now();
        for m in &kriging {
            black_box(m.predict_batch(black_box(&queries))?);
        }
        Ok(t.elapsed().as_secs_f64())
    };
    let (ann_runs, kriging_runs) = pool.install(|| -> Result<(Vec<f64>, Vec<f64>)> {
        run_ann()?;
        run_kriging()?;
        let mut a = Vec::with_capacity(cfg.repeats);
        let mut k = Vec::with_capacity(cfg.repeats);
        for _ in 0..cfg.repeats {
            a.push(run_ann()?);
            k.push(run_kriging()?);
        }
        Ok((a, k))
    })?;
    let ann_seconds = median(&ann_runs);
    let kriging_seconds = median(&kriging_runs);
    Ok(SpeedComparison {
        format_version: format::current(),
        queries: cfg.queries,
        dim,
        training_points: bundle.samples().len(),
        foms: bundle.fom_names().to_vec(),
        query_seed,
        threads: 1,
        ann_seconds,
        kriging_seconds,
        ratio: kriging_seconds / ann_seconds.max(f64::MIN_POSITIVE),
        ann_runs,
        kriging_runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_of_odd_and_even() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
