use std::fmt;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use kbann::ann::TrainingConfig;
use kbann::oracle::{load_samples, load_table, save_samples, write_table};
use kbann::pipeline::MIN_SAMPLES;
use kbann::speed::{compare_prediction_speed, SpeedConfig};
use kbann::statistics::{monte_carlo_raw, summarize};
use kbann::{
    build_from_samples, lhs_sample, objective_eval, pso_optimize, Error, Evaluator, MCConfig, MCReport,
    MetamodelBundle, ObjectiveSpec, OptimizationResult, ParameterSpace, PipelineConfig, PllOracle, Sense,
    SwarmConfig,
};
use serde_json::Value;

use crate::manifest::RunManifest;
use crate::{BenchArgs, FitArgs, McArgs, OptimizeArgs, SampleArgs, SimulateArgs, SourceArgs, Switch};

/// A post-run sanity check on the numerics failed.
#[derive(Debug)]
pub struct NumericalFailure(pub String);

impl fmt::Display for NumericalFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for NumericalFailure {}

fn load_space(path: Option<&Path>, manifest: &mut RunManifest) -> Result<ParameterSpace> {
    match path {
        Some(p) => {
            manifest.input(p);
            ParameterSpace::load(p).with_context(|| format!("reading space {}", p.display()))
        }
        None => Ok(PllOracle::builtin().space().clone()),
    }
}

fn load_oracle(path: Option<&Path>, manifest: &mut RunManifest) -> Result<PllOracle> {
    match path {
        Some(p) => {
            manifest.input(p);
            PllOracle::load(p).with_context(|| format!("reading oracle {}", p.display()))
        }
        None => Ok(PllOracle::builtin()),
    }
}

/// The model that answers queries: a trained bundle or an analytic oracle.
enum Source {
    Bundle(MetamodelBundle),
    Oracle(PllOracle),
}

impl Source {
    fn open(args: &SourceArgs, manifest: &mut RunManifest) -> Result<Self> {
        match &args.bundle {
            Some(dir) => {
                manifest.input(dir);
                let bundle =
                    MetamodelBundle::load(dir).with_context(|| format!("reading bundle {}", dir.display()))?;
                Ok(Source::Bundle(bundle))
            }
            None => Ok(Source::Oracle(load_oracle(args.oracle.as_deref(), manifest)?)),
        }
    }

    fn evaluator(&self) -> &dyn Evaluator {
        match self {
            Source::Bundle(b) => b,
            Source::Oracle(o) => o,
        }
    }

    fn space(&self) -> &ParameterSpace {
        match self {
            Source::Bundle(b) => b.space(),
            Source::Oracle(o) => o.space(),
        }
    }
}

/// Resolves a `--foms` request against the available names, keeping the
/// request order. `None` selects everything.
fn select_foms(available: &[String], requested: Option<&[String]>) -> Result<Vec<(usize, String)>> {
    let Some(requested) = requested else {
        return Ok(available.iter().cloned().enumerate().collect());
    };
    let wanted: Vec<&String> = requested.iter().filter(|s| !s.trim().is_empty()).collect();
    if wanted.is_empty() {
        return Err(Error::InvalidConfig("no figures of merit requested".into()).into());
    }
    wanted
        .into_iter()
        .map(|name| {
            let name = name.trim();
            available
                .iter()
                .position(|a| a == name)
                .map(|k| (k, name.to_string()))
                .ok_or_else(|| Error::MissingFoM(name.to_string()).into())
        })
        .collect()
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn sample(a: &SampleArgs) -> Result<()> {
    let mut m = RunManifest::new("sample", a)?;
    let space = load_space(a.space.as_deref(), &mut m)?;
    m.seed("lhs", a.seed);
    let set = m.time("sample", || lhs_sample(&space, a.n, a.seed))?;
    m.time("write", || save_samples(&set, &space, &a.out)).with_context(|| format!("writing {}", a.out.display()))?;
    m.output(&a.out).write_beside(&a.out)?;
    println!("wrote {} x {} design to {}", set.len(), space.dim(), a.out.display());
    Ok(())
}

pub fn simulate(a: &SimulateArgs) -> Result<()> {
    let mut m = RunManifest::new("simulate", a)?;
    m.input(&a.samples);
    let (space, mut set, names, columns) = if let Some(resp) = &a.responses {
        let space = load_space(a.space.as_deref(), &mut m)?;
        let set = load_samples(&a.samples, &space, None)
            .with_context(|| format!("reading samples {}", a.samples.display()))?;
        m.input(resp);
        let (header, rows) = load_table(resp).with_context(|| format!("reading responses {}", resp.display()))?;
        if rows.len() != set.len() {
            return Err(Error::LengthMismatch { left: set.len(), right: rows.len() })
                .context("responses must have one row per sample");
        }
        (space, set, header, rows)
    } else {
        let oracle = load_oracle(a.oracle.as_deref(), &mut m)?;
        let space = oracle.space().clone();
        let set = load_samples(&a.samples, &space, None)
            .with_context(|| format!("reading samples {}", a.samples.display()))?;
        let xs = set.native_inputs(&space)?;
        let rows = m.time("simulate", || oracle.evaluate_batch(&xs))?;
        (space, set, oracle.fom_names().to_vec(), rows)
    };
    let chosen = select_foms(&names, a.foms.as_deref())?;
    for (k, name) in &chosen {
        set.set_response(name.clone(), columns.iter().map(|row| row[*k]).collect())?;
    }
    m.time("write", || save_samples(&set, &space, &a.out)).with_context(|| format!("writing {}", a.out.display()))?;
    m.output(&a.out).write_beside(&a.out)?;
    let list: Vec<&str> = chosen.iter().map(|(_, n)| n.as_str()).collect();
    println!("wrote {} rows with [{}] to {}", set.len(), list.join(", "), a.out.display());
    Ok(())
}

pub fn fit(a: &FitArgs) -> Result<()> {
    let mut m = RunManifest::new("fit", a)?;
    let space = load_space(a.space.as_deref(), &mut m)?;
    m.input(&a.samples);
    let mut set =
        load_samples(&a.samples, &space, None).with_context(|| format!("reading samples {}", a.samples.display()))?;
    if let Some(req) = &a.foms {
        let available = set.fom_names();
        let keep = select_foms(&available, Some(req))?;
        set.responses.retain(|name, _| keep.iter().any(|(_, k)| k == name));
    }
    if set.responses.is_empty() {
        return Err(Error::MissingResponses(format!("{} has no response columns", a.samples.display())).into());
    }
    if set.len() < MIN_SAMPLES {
        return Err(Error::TooFewSamples { needed: MIN_SAMPLES, got: set.len() }.into());
    }
    let cfg = PipelineConfig {
        n_samples: set.len(),
        holdout_fraction: a.holdout,
        bootstrap: matches!(a.bootstrap, Switch::On),
        hidden_units: a.hidden,
        training: TrainingConfig { max_epochs: a.max_epochs, ..TrainingConfig::default() },
        seed: a.seed,
        ..PipelineConfig::default()
    };
    m.seed("pipeline", a.seed);
    let bundle = m.time("build", || build_from_samples(&set, &space, &cfg))?;
    m.time("write", || bundle.save(&a.out_bundle))
        .with_context(|| format!("writing bundle {}", a.out_bundle.display()))?;
    m.output(&a.out_bundle).write_beside(&a.out_bundle)?;

    println!("{:<16} {:>14} {:>12} {:>10}", "fom", "holdout_rmse", "rmse/range", "fallbacks");
    for model in bundle.models() {
        println!(
            "{:<16} {:>14.4e} {:>11.2}% {:>10}",
            model.name,
            model.verification_rmse,
            100.0 * model.rmse_relative,
            model.bootstrap_fallbacks
        );
    }
    println!(
        "bundle written to {} ({} samples, bootstrap {})",
        a.out_bundle.display(),
        set.len(),
        if cfg.bootstrap { "on" } else { "off" }
    );
    Ok(())
}

fn load_nominal(path: &Path, space: &ParameterSpace) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading nominal {}", path.display()))?;
    let value: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let array = match value {
        Value::Array(_) => value,
        Value::Object(mut o) => o
            .remove("best_x")
            .ok_or_else(|| anyhow!("{}: object has no `best_x` field", path.display()))?,
        _ => bail!("{}: expected a JSON array of numbers", path.display()),
    };
    let x: Vec<f64> = serde_json::from_value(array).with_context(|| format!("parsing {}", path.display()))?;
    space.check_nominal(&x)?;
    Ok(x)
}

fn print_report(report: &MCReport) {
    println!("{:<16} {:>14} {:>14} {:>8}", "fom", "mean", "std", "cv");
    for (name, s) in &report.foms {
        let cv = if s.mean != 0.0 { 100.0 * s.std / s.mean.abs() } else { 0.0 };
        println!("{name:<16} {:>14.5e} {:>14.5e} {cv:>7.2}%", s.mean, s.std);
    }
}

pub fn mc(a: &McArgs) -> Result<()> {
    let mut m = RunManifest::new("mc", a)?;
    let source = Source::open(&a.source, &mut m)?;
    let space = source.space();
    let nominal = match &a.nominal {
        Some(p) => {
            m.input(p);
            load_nominal(p, space)?
        }
        None => space.nominal(),
    };
    let cfg = MCConfig { n_runs: a.runs, sigma_fraction: a.sigma_frac, seed: a.seed, histogram_bins: a.bins, correlation: None };
    m.seed("mc", a.seed);
    let eval = source.evaluator();
    let draws = m.time("monte_carlo", || monte_carlo_raw(eval, space, &nominal, &cfg))?;
    let report = summarize(eval.fom_names(), &draws, &nominal, &cfg)?;
    write_text(&a.out, &(report.to_json_string() + "\n"))?;
    m.output(&a.out);
    if let Some(raw) = &a.dump_raw {
        let mut header = space.names();
        header.extend(eval.fom_names().iter().cloned());
        let rows: Vec<Vec<f64>> =
            draws.inputs.iter().zip(&draws.outputs).map(|(x, y)| x.iter().chain(y).copied().collect()).collect();
        let file = std::fs::File::create(raw).with_context(|| format!("writing {}", raw.display()))?;
        write_table(std::io::BufWriter::new(file), &header, &rows)?;
        m.output(raw);
    }
    m.write_beside(&a.out)?;
    print_report(&report);
    Ok(())
}

fn check_trace(result: &OptimizationResult) -> Result<()> {
    for w in result.trace.windows(2) {
        if w[1].best_score > w[0].best_score {
            return Err(NumericalFailure(format!(
                "global best increased at iteration {} ({:e} > {:e})",
                w[1].iteration, w[1].best_score, w[0].best_score
            ))
            .into());
        }
    }
    Ok(())
}

fn print_comparison(result: &OptimizationResult) -> Result<()> {
    let spec = &result.objective;
    println!("{:<16} {:>13} {:>13}   {:>13} {:>13}", "", "initial mean", "initial std", "final mean", "final std");
    for (name, before) in &result.initial_report.foms {
        let after = result.final_report.fom(name)?;
        println!("{name:<16} {:>13.5e} {:>13.5e}   {:>13.5e} {:>13.5e}", before.mean, before.std, after.mean, after.std);
    }
    let before = objective_eval(&result.initial_report, spec)?;
    let after = objective_eval(&result.final_report, spec)?;
    println!(
        "objective mean + {}·std of {}: {before:.5e} -> {after:.5e} ({:+.2}%), {} final runs",
        spec.k_sigma,
        spec.target,
        100.0 * (after - before) / before.abs().max(f64::MIN_POSITIVE),
        result.config.final_runs
    );
    if let Some(c) = &spec.constraint {
        let mean = result.final_report.fom(&c.fom)?.mean;
        let op = match c.sense {
            Sense::Le => "<=",
            Sense::Ge => ">=",
        };
        let verdict = if result.feasible { "satisfied" } else { "VIOLATED" };
        println!("constraint mean({}) {op} {:e}: {mean:.5e} {verdict}", c.fom, c.bound);
    }
    Ok(())
}

pub fn optimize(a: &OptimizeArgs) -> Result<()> {
    let mut m = RunManifest::new("optimize", a)?;
    let source = Source::open(&a.source, &mut m)?;
    let mut spec = ObjectiveSpec::robust(a.target.clone());
    spec.k_sigma = a.k_sigma;
    spec.penalty_weight = a.penalty;
    if !a.unconstrained {
        spec = spec.subject_to(a.constraint.clone(), a.bound, a.sense.parse::<Sense>()?);
    }
    let cfg = SwarmConfig {
        n_particles: a.particles,
        max_iterations: a.iters,
        mc: MCConfig { n_runs: a.mc_runs, sigma_fraction: a.sigma_frac, ..MCConfig::default() },
        final_runs: a.final_runs,
        seed: a.seed,
        ..SwarmConfig::default()
    };
    m.seed("pso", a.seed);
    let result = m.time("optimize", || pso_optimize(source.evaluator(), source.space(), &spec, &cfg))?;
    check_trace(&result)?;
    write_text(&a.out, &(result.to_json_string() + "\n"))?;
    m.output(&a.out).write_beside(&a.out)?;
    print_comparison(&result)?;
    if !result.feasible {
        log::warn!("returned design violates the constraint under the final Monte Carlo");
    }
    Ok(())
}

pub fn bench(a: &BenchArgs) -> Result<()> {
    let mut m = RunManifest::new("bench", a)?;
    m.input(&a.bundle);
    let bundle = MetamodelBundle::load(&a.bundle).with_context(|| format!("reading bundle {}", a.bundle.display()))?;
    let cfg = SpeedConfig { queries: a.samples_n, repeats: a.repeats, seed: a.seed };
    let result = m.time("bench", || compare_prediction_speed(&bundle, &cfg))?;
    m.seed("queries", result.query_seed);
    let text = serde_json::to_string_pretty(&result)? + "\n";
    write_text(&a.out, &text)?;
    m.output(&a.out).write_beside(&a.out)?;
    println!(
        "{} queries, {} FoMs, {} training points, d = {}",
        result.queries,
        result.foms.len(),
        result.training_points,
        result.dim
    );
    println!("neural bundle : {:>10.3} ms", 1e3 * result.ann_seconds);
    println!("kriging       : {:>10.3} ms", 1e3 * result.kriging_seconds);
    println!("speedup       : {:>10.2}x", result.ratio);
    Ok(())
}
