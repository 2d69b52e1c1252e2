//! Sample → simulate → kriging bootstrap → train → verify, one neural
//! metamodel per figure of merit.

use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ann::{rmse, train, Network, NeuralModelFile, Topology, TrainingConfig, TrainingMetadata};
use crate::error::{Error, Result};
use crate::format;
use crate::kriging::{bootstrap_resample, fit_range_cv, KrigingModel, VariogramKind, VariogramSource};
use crate::oracle::{load_samples, save_samples, Evaluator};
use crate::rng;
use crate::sampling::{lhs_sample, SampleSet};
use crate::space::ParameterSpace;

pub const MIN_SAMPLES: usize = 10;
pub const BUNDLE_FILE: &str = "bundle.json";
pub const SAMPLES_FILE: &str = "training_samples.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub n_samples: usize,
    /// Share of the samples set aside, before bootstrapping, for verification.
    pub holdout_fraction: f64,
    pub bootstrap: bool,
    pub variogram: VariogramSource,
    /// Hidden units; `2·d + 1` when absent.
    pub hidden_units: Option<usize>,
    pub slope: f64,
    pub training: TrainingConfig,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            n_samples: 100,
            holdout_fraction: 0.2,
            bootstrap: true,
            variogram: VariogramSource::default(),
            hidden_units: None,
            slope: 1.0,
            training: TrainingConfig::default(),
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.holdout_fraction > 0.0 && self.holdout_fraction < 1.0) {
            return Err(Error::InvalidConfig("holdout_fraction must lie in (0, 1)".into()));
        }
        if self.hidden_units == Some(0) {
            return Err(Error::InvalidConfig("hidden_units must be at least 1".into()));
        }
        self.training.validate()
    }

    pub fn topology(&self, dim: usize) -> Topology {
        Topology { hidden_units: self.hidden_units.unwrap_or(2 * dim + 1), slope: self.slope }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub space_hash: String,
    pub n_samples: usize,
    pub seed: u64,
    pub bootstrap: bool,
    pub holdout_fraction: f64,
    /// Rows of the training sample file used for verification only.
    pub holdout_indices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FomMetamodel {
    pub name: String,
    pub network: Network,
    pub training: TrainingMetadata,
    pub verification_rmse: f64,
    /// `verification_rmse` over the holdout response range.
    pub rmse_relative: f64,
    pub bootstrap_fallbacks: usize,
}

/// One trained network per figure of merit plus everything needed to
/// reproduce and check it. Evaluates like the simulator it replaces.
#[derive(Debug, Clone, PartialEq)]
pub struct MetamodelBundle {
    space: ParameterSpace,
    provenance: Provenance,
    models: Vec<FomMetamodel>,
    names: Vec<String>,
    samples: SampleSet,
}

#[derive(Serialize, Deserialize)]
struct BundleEntry {
    name: String,
    model_file: String,
    verification_rmse: f64,
    rmse_relative: f64,
    bootstrap_fallbacks: usize,
}

#[derive(Serialize, Deserialize)]
struct BundleFile {
    format_version: String,
    space: ParameterSpace,
    provenance: Provenance,
    samples_file: String,
    foms: Vec<BundleEntry>,
}

impl MetamodelBundle {
    pub fn space(&self) -> &ParameterSpace {
        &self.space
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn models(&self) -> &[FomMetamodel] {
        &self.models
    }

    pub fn model(&self, name: &str) -> Result<&FomMetamodel> {
        self.models.iter().find(|m| m.name == name).ok_or_else(|| Error::MissingFoM(name.to_string()))
    }

    /// All samples with raw simulator responses, holdout rows included.
    pub fn samples(&self) -> &SampleSet {
        &self.samples
    }

    /// Rows that took part in training.
    pub fn training_indices(&self) -> Vec<usize> {
        (0..self.samples.len()).filter(|i| !self.provenance.holdout_indices.contains(i)).collect()
    }

    /// Predictions at normalized points, one vector per figure of merit.
    pub fn predict_unit_batch(&self, us: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        self.models.iter().map(|m| m.network.forward_batch(us)).collect()
    }

    /// Writes `bundle.json`, one `<fom>.json` per model and the sample CSV.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let mut foms = Vec::with_capacity(self.models.len());
        for m in &self.models {
            let model_file = format!("{}.json", m.name);
            NeuralModelFile::new(m.network.clone(), m.training.clone()).save(dir.join(&model_file))?;
            foms.push(BundleEntry {
                name: m.name.clone(),
                model_file,
                verification_rmse: m.verification_rmse,
                rmse_relative: m.rmse_relative,
                bootstrap_fallbacks: m.bootstrap_fallbacks,
            });
        }
        save_samples(&self.samples, &self.space, dir.join(SAMPLES_FILE))?;
        let file = BundleFile {
            format_version: format::current(),
            space: self.space.clone(),
            provenance: self.provenance.clone(),
            samples_file: SAMPLES_FILE.to_string(),
            foms,
        };
        std::fs::write(dir.join(BUNDLE_FILE), serde_json::to_string_pretty(&file)? + "\n")?;
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let file: BundleFile = serde_json::from_str(&std::fs::read_to_string(dir.join(BUNDLE_FILE))?)?;
        format::check(&file.format_version)?;
        let mut models = Vec::with_capacity(file.foms.len());
        for e in file.foms {
            let model = NeuralModelFile::load(dir.join(&e.model_file))?;
            if model.network.input_dim != file.space.dim() {
                return Err(Error::DimensionMismatch { expected: file.space.dim(), got: model.network.input_dim });
            }
            models.push(FomMetamodel {
                name: e.name,
                network: model.network,
                training: model.training,
                verification_rmse: e.verification_rmse,
                rmse_relative: e.rmse_relative,
                bootstrap_fallbacks: e.bootstrap_fallbacks,
            });
        }
        let mut samples = load_samples(dir.join(&file.samples_file), &file.space, None)?;
        samples.seed = file.provenance.seed;
        let names = models.iter().map(|m| m.name.clone()).collect();
        Ok(Self { space: file.space, provenance: file.provenance, models, names, samples })
    }
}

impl Evaluator for MetamodelBundle {
    fn fom_names(&self) -> &[String] {
        &self.names
    }

    fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
        let u = self.space.normalize(x)?;
        self.models.iter().map(|m| m.network.forward(&u)).collect()
    }
}

/// RMSE of `network` on the raw `fom` responses of `holdout`, absolute and
/// relative to the response range (`0/0` counts as 0).
pub fn verify(network: &Network, holdout: &SampleSet, fom: &str) -> Result<(f64, f64)> {
    let actual = holdout.response(fom)?;
    if actual.is_empty() {
        return Err(Error::MissingResponses(fom.to_string()));
    }
    let predicted = network.forward_batch(&holdout.inputs)?;
    let err = rmse(&predicted, actual)?;
    let lo = actual.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = actual.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    let relative = if range > 0.0 {
        err / range
    } else if err == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok((err, relative))
}

/// Seeded split into (training, holdout) row indices, each sorted.
pub fn holdout_split(n: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let n_hold = ((n as f64 * fraction).floor() as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::substream(seed, "pipeline-holdout"));
    let mut hold = order[..n_hold].to_vec();
    let mut fit = order[n_hold..].to_vec();
    hold.sort_unstable();
    fit.sort_unstable();
    (fit, hold)
}

/// Full flow: LHS design of `cfg.n_samples` points, simulation, then
/// [`build_from_samples`].
pub fn build_metamodels<E: Evaluator + ?Sized>(
    simulator: &E,
    space: &ParameterSpace,
    cfg: &PipelineConfig,
) -> Result<MetamodelBundle> {
    cfg.validate()?;
    if cfg.n_samples < MIN_SAMPLES {
        return Err(Error::TooFewSamples { needed: MIN_SAMPLES, got: cfg.n_samples });
    }
    let mut samples = lhs_sample(space, cfg.n_samples, cfg.seed)?;
    let outputs = simulator.evaluate_batch(&samples.native_inputs(space)?)?;
    for (k, name) in simulator.fom_names().iter().enumerate() {
        samples.set_response(name.clone(), outputs.iter().map(|row| row[k]).collect())?;
    }
    build_named(&samples, space, cfg, simulator.fom_names().to_vec())
}

/// Trains one metamodel per response column of `samples`.
///
/// The holdout rows are chosen first and keep their raw responses; the
/// bootstrap (when enabled) and training see only the remaining rows. FoM
/// branches run in parallel with independent seeds. Models follow the
/// alphabetical order of the response names.
pub fn build_from_samples(samples: &SampleSet, space: &ParameterSpace, cfg: &PipelineConfig) -> Result<MetamodelBundle> {
    build_named(samples, space, cfg, samples.fom_names())
}

fn build_named(samples: &SampleSet, space: &ParameterSpace, cfg: &PipelineConfig, names: Vec<String>) -> Result<MetamodelBundle> {
    cfg.validate()?;
    let n = samples.len();
    if n < MIN_SAMPLES {
        return Err(Error::TooFewSamples { needed: MIN_SAMPLES, got: n });
    }
    if samples.dim() != space.dim() {
        return Err(Error::DimensionMismatch { expected: space.dim(), got: samples.dim() });
    }
    if names.is_empty() {
        return Err(Error::MissingResponses("sample set has no response columns".into()));
    }
    let (fit_rows, hold_rows) = holdout_split(n, cfg.holdout_fraction, cfg.seed);
    let fit_set = samples.subset(&fit_rows);
    let hold_set = samples.subset(&hold_rows);
    let topology = cfg.topology(space.dim());

    let models = names
        .par_iter()
        .map(|fom| -> Result<FomMetamodel> {
            let (targets, fallbacks) = if cfg.bootstrap {
                let boot = bootstrap_resample(&fit_set, fom, &cfg.variogram)?;
                (boot.samples.response(fom)?.to_vec(), boot.fallback_count())
            } else {
                (fit_set.response(fom)?.to_vec(), 0)
            };
            let seed = rng::substream_seed(cfg.seed, &format!("ann-{fom}"));
            let training = TrainingConfig { seed, ..cfg.training };
            let trained = train(&fit_set.inputs, &targets, topology, &training)?;
            let (verification_rmse, rmse_relative) = verify(&trained.network, &hold_set, fom)?;
            log::info!("{fom}: holdout rmse {verification_rmse:.4e} ({:.2}% of range)", 100.0 * rmse_relative);
            Ok(FomMetamodel {
                name: fom.clone(),
                training: trained.metadata(seed),
                network: trained.network,
                verification_rmse,
                rmse_relative,
                bootstrap_fallbacks: fallbacks,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut samples = samples.clone();
    samples.seed = cfg.seed;
    Ok(MetamodelBundle {
        space: space.clone(),
        provenance: Provenance {
            space_hash: space.fingerprint(),
            n_samples: n,
            seed: cfg.seed,
            bootstrap: cfg.bootstrap,
            holdout_fraction: cfg.holdout_fraction,
            holdout_indices: hold_rows,
        },
        models,
        names,
        samples,
    })
}

/// Ordinary kriging stand-ins for the bundle's networks, one per FoM in
/// bundle order, interpolating every stored sample with a zero-nugget
/// Gaussian variogram whose range is picked by leave-one-out
/// cross-validation. Used to compare prediction cost on equal terms.
pub fn kriging_counterparts(bundle: &MetamodelBundle) -> Result<Vec<KrigingModel>> {
    let samples = bundle.samples();
    bundle
        .fom_names()
        .iter()
        .map(|fom| {
            let y = samples.response(fom)?;
            let fit = fit_range_cv(&samples.inputs, y, VariogramKind::Gaussian)?;
            KrigingModel::new(samples.inputs.clone(), y.to_vec(), fit.variogram)
        })
        .collect()
}
