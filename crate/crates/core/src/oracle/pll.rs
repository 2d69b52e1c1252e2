//! Synthetic stand-in for a transistor-level PLL simulation.
//!
//! Every figure of merit is a smooth closed-form surface over the 21
//! normalized design parameters:
//!
//! `FoM_k(u) = c_k + a_k·u + uᵀ B_k u + r_k · Π_m sin(ω_m u_{d_m} + φ_m)`
//!
//! The coefficients are synthetic data generated once from a fixed seed
//! (see `examples/generate_pll_oracle.rs`) and shipped in
//! `data/pll_oracle.json`; `c_k` pins the value at the nominal design to
//! the baseline characterization (2.48 mW, 2.66 GHz, 5.51 µs, 16.80 ns).

use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::Evaluator;
use crate::error::{Error, Result};
use crate::format;
use crate::rng;
use crate::space::{ParameterDef, ParameterSpace};

pub const PLL_FOMS: [&str; 4] = ["power", "frequency", "locking_time", "jitter"];
/// Baseline values at the nominal design: W, Hz, s, s.
pub const PLL_TARGETS: [f64; 4] = [2.48e-3, 2.66e9, 5.51e-6, 16.80e-9];
const UNITS: [&str; 4] = ["W", "Hz", "s", "s"];

/// Seed the shipped coefficient file was generated from.
pub const GENERATOR_SEED: u64 = 180;
/// Half-width of the parameter box as a fraction of nominal.
pub const BOX_SPREAD: f64 = 0.3;

// Shape of the generated surfaces, in units of each FoM's target value.
const LINEAR_NORM: f64 = 0.45;
const QUADRATIC_SHARE: f64 = 0.15;
const RIPPLE_SHARE: f64 = 0.05;
const CROSS_TERM_PROB: f64 = 0.4;
const MIN_CROSS_FRACTION: f64 = 0.3;
const RIPPLE_TERMS: usize = 3;

const BUILTIN: &str = include_str!("../../data/pll_oracle.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RippleTerm {
    pub dim: usize,
    pub frequency: f64,
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ripple {
    pub amplitude: f64,
    pub terms: Vec<RippleTerm>,
}

impl Ripple {
    fn eval(&self, u: &[f64]) -> f64 {
        self.amplitude * self.terms.iter().map(|t| (t.frequency * u[t.dim] + t.phase).sin()).product::<f64>()
    }
}

/// Coefficients of one figure of merit, native units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FomSurface {
    pub name: String,
    pub unit: String,
    pub target: f64,
    pub offset: f64,
    pub linear: Vec<f64>,
    /// Symmetric `d × d`.
    pub quadratic: Vec<Vec<f64>>,
    pub ripple: Ripple,
}

impl FomSurface {
    /// Value at normalized point `u`.
    pub fn eval(&self, u: &[f64]) -> f64 {
        let lin: f64 = self.linear.iter().zip(u).map(|(a, x)| a * x).sum();
        let quad: f64 = self
            .quadratic
            .iter()
            .zip(u)
            .map(|(row, ui)| ui * row.iter().zip(u).map(|(b, uj)| b * uj).sum::<f64>())
            .sum();
        self.offset + lin + quad + self.ripple.eval(u)
    }

    /// Fraction of off-diagonal pairs `(i < j)` with a nonzero cross term.
    pub fn cross_fraction(&self) -> f64 {
        let d = self.linear.len();
        let pairs = d * (d - 1) / 2;
        let coupled = (0..d).flat_map(|i| ((i + 1)..d).map(move |j| (i, j))).filter(|&(i, j)| self.quadratic[i][j] != 0.0).count();
        coupled as f64 / pairs as f64
    }

    fn validate(&self, d: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(format!("oracle FoM `{}`: {m}", self.name)));
        if self.linear.len() != d || self.quadratic.len() != d || self.quadratic.iter().any(|r| r.len() != d) {
            return bad("coefficient arrays do not match the space dimension".into());
        }
        for i in 0..d {
            for j in 0..d {
                if self.quadratic[i][j] != self.quadratic[j][i] {
                    return bad(format!("quadratic form not symmetric at ({i}, {j})"));
                }
            }
        }
        if self.ripple.terms.iter().any(|t| t.dim >= d) {
            return bad("ripple term refers to a missing dimension".into());
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct PllOracleFile {
    format_version: String,
    description: String,
    generator_seed: u64,
    space: ParameterSpace,
    foms: Vec<FomSurface>,
}

/// Analytic PLL-like oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PllOracleFile", into = "PllOracleFile")]
pub struct PllOracle {
    space: ParameterSpace,
    foms: Vec<FomSurface>,
    names: Vec<String>,
    generator_seed: u64,
}

impl TryFrom<PllOracleFile> for PllOracle {
    type Error = Error;

    fn try_from(f: PllOracleFile) -> Result<Self> {
        format::check(&f.format_version)?;
        for fom in &f.foms {
            fom.validate(f.space.dim())?;
        }
        let names = f.foms.iter().map(|s| s.name.clone()).collect();
        Ok(Self { space: f.space, foms: f.foms, names, generator_seed: f.generator_seed })
    }
}

impl From<PllOracle> for PllOracleFile {
    fn from(o: PllOracle) -> Self {
        PllOracleFile {
            format_version: format::current(),
            description: "Synthetic PLL-like analytic oracle. Coefficients and nominal values are \
                          generated data, not extracted from a real circuit."
                .to_string(),
            generator_seed: o.generator_seed,
            space: o.space,
            foms: o.foms,
        }
    }
}

impl PllOracle {
    /// The shipped oracle definition.
    pub fn builtin() -> Self {
        serde_json::from_str(BUILTIN).expect("bundled oracle definition parses")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("oracle serializes")
    }

    pub fn space(&self) -> &ParameterSpace {
        &self.space
    }

    pub fn surfaces(&self) -> &[FomSurface] {
        &self.foms
    }

    pub fn surface(&self, name: &str) -> Option<&FomSurface> {
        self.foms.iter().find(|f| f.name == name)
    }

    /// 21-parameter space: eight channel lengths, eight widths and five
    /// oxide thicknesses, each boxed at `nominal ± 30%`.
    pub fn default_space() -> ParameterSpace {
        const LENGTHS: [f64; 8] = [180e-9, 180e-9, 360e-9, 270e-9, 180e-9, 540e-9, 180e-9, 360e-9];
        const WIDTHS: [f64; 8] = [0.5e-6, 1.0e-6, 2.0e-6, 4.0e-6, 1.5e-6, 8.0e-6, 3.0e-6, 0.9e-6];
        const OXIDES: [f64; 5] = [4.1e-9, 4.0e-9, 4.2e-9, 4.1e-9, 4.0e-9];
        let roles = LENGTHS
            .iter()
            .map(|&v| ("length", v))
            .chain(WIDTHS.iter().map(|&v| ("width", v)))
            .chain(OXIDES.iter().map(|&v| ("oxide", v)));
        let params = roles
            .enumerate()
            .map(|(i, (role, nom))| {
                let half = BOX_SPREAD * nom;
                ParameterDef::new(format!("p{:02}", i + 1), nom - half, nom + half, nom).with_role(role)
            })
            .collect();
        ParameterSpace::new(params).expect("default space is valid")
    }

    /// Draws a fresh coefficient set. Only the offline generator calls this;
    /// runtime code uses [`builtin`](Self::builtin).
    ///
    /// Linear gradients have norm `0.45·target`; the locking-time gradient
    /// points mostly against the power gradient so that lowering power
    /// tends to lengthen locking. Quadratic forms couple about 40% of all
    /// parameter pairs and are scaled to 15% of the linear spread over the
    /// box, the ripple to 5%.
    pub fn generate(seed: u64) -> Self {
        let space = Self::default_space();
        let d = space.dim();
        let mut rng = rng::stream(seed);
        let u0 = space.normalize(&space.nominal()).expect("nominal in box");
        let probe: Vec<Vec<f64>> = (0..4000).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect();

        let mut power_dir: Vec<f64> = Vec::new();
        let mut foms = Vec::with_capacity(PLL_FOMS.len());
        for (k, name) in PLL_FOMS.iter().enumerate() {
            let target = PLL_TARGETS[k];
            let mut dir = gaussian_vec(&mut rng, d);
            if *name == "locking_time" {
                let ortho = orthogonalize(&dir, &power_dir);
                dir = power_dir.iter().zip(&ortho).map(|(p, o)| -0.8 * p + 0.6 * o).collect();
            }
            let dir = unit(&floor_magnitudes(&unit(&dir), 0.2 / (d as f64).sqrt()));
            if *name == "power" {
                power_dir = dir.clone();
            }
            let linear: Vec<f64> = dir.iter().map(|v| v * LINEAR_NORM * target).collect();
            let linear_spread = LINEAR_NORM * target / 12f64.sqrt();

            let quadratic = loop {
                let q = random_symmetric(&mut rng, d);
                let coupled = (0..d).flat_map(|i| ((i + 1)..d).map(move |j| (i, j))).filter(|&(i, j)| q[i][j] != 0.0).count();
                if coupled as f64 >= MIN_CROSS_FRACTION * (d * (d - 1) / 2) as f64 {
                    break q;
                }
            };
            let spread = std_dev(probe.iter().map(|u| quad_form(&quadratic, u)));
            let qscale = QUADRATIC_SHARE * linear_spread / spread;
            let quadratic: Vec<Vec<f64>> = quadratic.iter().map(|r| r.iter().map(|v| v * qscale).collect()).collect();

            let mut dims: Vec<usize> = Vec::with_capacity(RIPPLE_TERMS);
            while dims.len() < RIPPLE_TERMS {
                let c = rng.random_range(0..d);
                if !dims.contains(&c) {
                    dims.push(c);
                }
            }
            let terms = dims
                .into_iter()
                .map(|dim| RippleTerm {
                    dim,
                    frequency: rng.random_range(std::f64::consts::PI..2.0 * std::f64::consts::PI),
                    phase: rng.random_range(0.0..2.0 * std::f64::consts::PI),
                })
                .collect();
            let ripple = Ripple { amplitude: RIPPLE_SHARE * linear_spread, terms };

            let mut surface = FomSurface {
                name: name.to_string(),
                unit: UNITS[k].to_string(),
                target,
                offset: 0.0,
                linear,
                quadratic,
                ripple,
            };
            surface.offset = target - surface.eval(&u0);
            foms.push(surface);
        }
        let names = foms.iter().map(|s| s.name.clone()).collect();
        Self { space, foms, names, generator_seed: seed }
    }
}

impl Evaluator for PllOracle {
    fn fom_names(&self) -> &[String] {
        &self.names
    }

    fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
        let u = self.space.normalize(x)?;
        Ok(self.foms.iter().map(|f| f.eval(&u)).collect())
    }
}

fn gaussian_vec<R: Rng>(rng: &mut R, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

fn unit(v: &[f64]) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / norm).collect()
}

fn orthogonalize(v: &[f64], against: &[f64]) -> Vec<f64> {
    let dot: f64 = v.iter().zip(against).map(|(a, b)| a * b).sum();
    unit(&v.iter().zip(against).map(|(a, b)| a - dot * b).collect::<Vec<_>>())
}

/// Keeps every component at least `floor` in magnitude so each parameter
/// moves the response.
fn floor_magnitudes(v: &[f64], floor: f64) -> Vec<f64> {
    v.iter().map(|&x| if x.abs() < floor { floor.copysign(x) } else { x }).collect()
}

fn random_symmetric<R: Rng>(rng: &mut R, d: usize) -> Vec<Vec<f64>> {
    let mut q = vec![vec![0.0; d]; d];
    for i in 0..d {
        q[i][i] = rng.sample(StandardNormal);
        for j in (i + 1)..d {
            if rng.random::<f64>() < CROSS_TERM_PROB {
                let v = 0.5 * rng.sample::<f64, _>(StandardNormal);
                q[i][j] = v;
                q[j][i] = v;
            }
        }
    }
    q
}

fn quad_form(q: &[Vec<f64>], u: &[f64]) -> f64 {
    q.iter().zip(u).map(|(row, ui)| ui * row.iter().zip(u).map(|(b, uj)| b * uj).sum::<f64>()).sum()
}

fn std_dev(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}
