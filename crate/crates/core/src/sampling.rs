//! Random Latin Hypercube designs over the unit cube.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::space::ParameterSpace;

/// Design matrix in normalized coordinates plus optional response columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    /// `n` rows of `d` normalized coordinates.
    pub inputs: Vec<Vec<f64>>,
    /// FoM name → one value per row, native units.
    pub responses: BTreeMap<String, Vec<f64>>,
    pub seed: u64,
    /// Fingerprint of the [`ParameterSpace`] the inputs were drawn from.
    pub space_ref: String,
}

impl SampleSet {
    pub fn new(inputs: Vec<Vec<f64>>, space_ref: impl Into<String>, seed: u64) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::ZeroSamples);
        }
        let d = inputs[0].len();
        for row in &inputs {
            if row.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: row.len() });
            }
            for (dim, &v) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::OutOfUnitCube { dim, value: v });
                }
            }
        }
        Ok(Self { inputs, responses: BTreeMap::new(), seed, space_ref: space_ref.into() })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inputs.first().map_or(0, Vec::len)
    }

    pub fn set_response(&mut self, fom: impl Into<String>, values: Vec<f64>) -> Result<()> {
        if values.len() != self.len() {
            return Err(Error::LengthMismatch { left: self.len(), right: values.len() });
        }
        self.responses.insert(fom.into(), values);
        Ok(())
    }

    pub fn response(&self, fom: &str) -> Result<&[f64]> {
        self.responses
            .get(fom)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::MissingResponses(fom.to_string()))
    }

    pub fn fom_names(&self) -> Vec<String> {
        self.responses.keys().cloned().collect()
    }

    /// Rows at `indices`, in that order, with their responses.
    pub fn subset(&self, indices: &[usize]) -> SampleSet {
        SampleSet {
            inputs: indices.iter().map(|&i| self.inputs[i].clone()).collect(),
            responses: self
                .responses
                .iter()
                .map(|(k, v)| (k.clone(), indices.iter().map(|&i| v[i]).collect()))
                .collect(),
            seed: self.seed,
            space_ref: self.space_ref.clone(),
        }
    }

    pub fn native_inputs(&self, space: &ParameterSpace) -> Result<Vec<Vec<f64>>> {
        self.inputs.iter().map(|u| space.denormalize(u)).collect()
    }
}

/// Random LHS: `n` points in `[0,1]^d` with exactly one point in each of the
/// `n` equal strata of every dimension.
///
/// Randomness is consumed in a fixed order so the design is reproducible from
/// the seed: first one Fisher-Yates permutation of `0..n` per dimension (in
/// dimension order), then one uniform jitter per cell in row-major order.
/// Row `i`, column `j` is `(perm_j[i] + jitter_ij) / n`.
pub fn lhs_sample(space: &ParameterSpace, n: usize, seed: u64) -> Result<SampleSet> {
    let inputs = lhs_unit(space.dim(), n, seed)?;
    SampleSet::new(inputs, space.fingerprint(), seed)
}

/// Same design as [`lhs_sample`] without a parameter space attached.
pub fn lhs_unit(d: usize, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return Err(Error::ZeroSamples);
    }
    let mut rng = rng::stream(seed);
    let perms: Vec<Vec<usize>> = (0..d)
        .map(|_| {
            let mut p: Vec<usize> = (0..n).collect();
            p.shuffle(&mut rng);
            p
        })
        .collect();
    let nf = n as f64;
    let inputs = (0..n)
        .map(|i| {
            perms
                .iter()
                .map(|perm| {
                    let jitter: f64 = rng.random();
                    stratum_point(perm[i], jitter, nf)
                })
                .collect()
        })
        .collect();
    Ok(inputs)
}

/// `(k + jitter)/n`, nudged by ulps so that `floor(n·v) == k` holds exactly
/// in floating point.
fn stratum_point(k: usize, jitter: f64, n: f64) -> f64 {
    let kf = k as f64;
    let mut v = (kf + jitter) / n;
    while (v * n).floor() > kf {
        v = v.next_down();
    }
    while (v * n).floor() < kf {
        v = v.next_up();
    }
    v
}
