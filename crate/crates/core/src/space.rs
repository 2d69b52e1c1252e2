//! Bounded, named parameter domains and their mapping onto the unit cube.
//!
//! All modeling works in normalized coordinates `u ∈ [0,1]^d`; native units
//! only appear when reading or writing files and when talking to a
//! simulator.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::format;

const BOUND_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterDef {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub nominal: f64,
    /// Free-form grouping tag (e.g. `length`, `width`, `oxide`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role: Option<String>,
}

impl ParameterDef {
    pub fn new(name: impl Into<String>, lower: f64, upper: f64, nominal: f64) -> Self {
        Self { name: name.into(), lower, upper, nominal, role: None }
    }

    pub fn with_role(mut self, role: impl Into<String>) -> Self {
        self.role = Some(role.into());
        self
    }

    fn width(&self) -> f64 {
        self.upper - self.lower
    }

    fn tolerance(&self) -> f64 {
        BOUND_RTOL * self.lower.abs().max(self.upper.abs()).max(self.width())
    }
}

#[derive(Serialize, Deserialize)]
struct SpaceFile {
    #[serde(default = "format::current")]
    format_version: String,
    parameters: Vec<ParameterDef>,
}

/// Ordered list of parameter definitions. The order is the canonical
/// dimension order everywhere (matrices, CSV columns, JSON arrays).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpaceFile", into = "SpaceFile")]
pub struct ParameterSpace {
    params: Vec<ParameterDef>,
}

impl TryFrom<SpaceFile> for ParameterSpace {
    type Error = Error;

    fn try_from(file: SpaceFile) -> Result<Self> {
        format::check(&file.format_version)?;
        ParameterSpace::new(file.parameters)
    }
}

impl From<ParameterSpace> for SpaceFile {
    fn from(space: ParameterSpace) -> Self {
        SpaceFile { format_version: format::current(), parameters: space.params }
    }
}

impl ParameterSpace {
    pub fn new(params: Vec<ParameterDef>) -> Result<Self> {
        if params.is_empty() {
            return Err(Error::InvalidSpace("no parameters".into()));
        }
        let mut seen = HashSet::new();
        for p in &params {
            if p.name.is_empty() {
                return Err(Error::InvalidSpace("empty parameter name".into()));
            }
            if !seen.insert(p.name.as_str()) {
                return Err(Error::InvalidSpace(format!("duplicate parameter `{}`", p.name)));
            }
            if !(p.lower.is_finite() && p.upper.is_finite() && p.nominal.is_finite()) {
                return Err(Error::InvalidSpace(format!("non-finite bound in `{}`", p.name)));
            }
            if p.lower >= p.upper {
                return Err(Error::InvalidSpace(format!(
                    "`{}`: lower {} must be below upper {}",
                    p.name, p.lower, p.upper
                )));
            }
            if p.nominal < p.lower || p.nominal > p.upper {
                return Err(Error::InvalidSpace(format!(
                    "`{}`: nominal {} outside [{}, {}]",
                    p.name, p.nominal, p.lower, p.upper
                )));
            }
        }
        Ok(Self { params })
    }

    /// Box of `nominal ± spread·|nominal|` around every nominal value.
    pub fn around_nominals<I, S>(nominals: I, spread: f64) -> Result<Self>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        let params = nominals
            .into_iter()
            .map(|(name, nom)| {
                let half = spread * nom.abs();
                ParameterDef::new(name, nom - half, nom + half, nom)
            })
            .collect();
        Self::new(params)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("space serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string() + "\n")?;
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[ParameterDef] {
        &self.params
    }

    pub fn names(&self) -> Vec<String> {
        self.params.iter().map(|p| p.name.clone()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    pub fn nominal(&self) -> Vec<f64> {
        self.params.iter().map(|p| p.nominal).collect()
    }

    pub fn lower(&self) -> Vec<f64> {
        self.params.iter().map(|p| p.lower).collect()
    }

    pub fn upper(&self) -> Vec<f64> {
        self.params.iter().map(|p| p.upper).collect()
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn fingerprint(&self) -> String {
        let canonical = serde_json::to_string(self).expect("space serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: len });
        }
        Ok(())
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && self.params.iter().zip(x).all(|(p, &v)| {
                let tol = p.tolerance();
                v >= p.lower - tol && v <= p.upper + tol
            })
    }

    /// Native units → unit cube. Points within a relative 1e-12 of a bound
    /// are accepted and land exactly on 0 or 1.
    pub fn normalize(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x.len())?;
        self.params
            .iter()
            .zip(x)
            .enumerate()
            .map(|(dim, (p, &v))| {
                let tol = p.tolerance();
                if !(v >= p.lower - tol && v <= p.upper + tol) {
                    return Err(Error::OutOfBounds { dim, value: v });
                }
                Ok(((v - p.lower) / p.width()).clamp(0.0, 1.0))
            })
            .collect()
    }

    /// Unit cube → native units.
    pub fn denormalize(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(u.len())?;
        self.params
            .iter()
            .zip(u)
            .enumerate()
            .map(|(dim, (p, &v))| {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::OutOfUnitCube { dim, value: v });
                }
                Ok(p.lower + v * p.width())
            })
            .collect()
    }

    /// Clamps a native-unit point into the box, dimension by dimension.
    pub fn clamp(&self, x: &mut [f64]) {
        for (p, v) in self.params.iter().zip(x.iter_mut()) {
            *v = v.clamp(p.lower, p.upper);
        }
    }

    pub fn check_nominal(&self, x: &[f64]) -> Result<()> {
        self.check_dim(x.len())?;
        for (dim, (p, &v)) in self.params.iter().zip(x).enumerate() {
            let tol = p.tolerance();
            if !(v >= p.lower - tol && v <= p.upper + tol) {
                return Err(Error::OutOfBoundsNominal { dim, value: v });
            }
        }
        Ok(())
    }
}
