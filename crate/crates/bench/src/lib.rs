//! Fixtures shared by the benchmarks.

use kbann::kriging::KrigingModel;
use kbann::pipeline::kriging_counterparts;
use kbann::sampling::lhs_unit;
use kbann::{build_metamodels, MetamodelBundle, PipelineConfig, PllOracle};

/// Default-configuration bundle over the built-in PLL oracle.
pub fn pll_bundle(seed: u64) -> MetamodelBundle {
    let oracle = PllOracle::builtin();
    build_metamodels(&oracle, oracle.space(), &PipelineConfig { seed, ..PipelineConfig::default() })
        .expect("bundle builds on the built-in oracle")
}

/// Kriging models over the bundle's samples, one per FoM.
pub fn kriging_set(bundle: &MetamodelBundle) -> Vec<KrigingModel> {
    kriging_counterparts(bundle).expect("kriging fits on bundle samples")
}

/// `n` normalized query points in the bundle's space.
pub fn queries(bundle: &MetamodelBundle, n: usize, seed: u64) -> Vec<Vec<f64>> {
    lhs_unit(bundle.space().dim(), n, seed).expect("n > 0")
}
