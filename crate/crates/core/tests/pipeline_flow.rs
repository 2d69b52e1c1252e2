use kbann::oracle::Evaluator;
use kbann::pipeline::{build_metamodels, holdout_split, verify, MetamodelBundle, PipelineConfig};
use kbann::sampling::lhs_sample;
use kbann::PllOracle;
use std::fs;
use std::path::Path;

fn quick(seed: u64, bootstrap: bool) -> PipelineConfig {
    PipelineConfig { n_samples: 40, bootstrap, hidden_units: Some(6), seed, ..PipelineConfig::default() }
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn same_seed_same_bytes() {
    let oracle = PllOracle::builtin();
    let tmp = tempfile::tempdir().unwrap();
    for name in ["a", "b"] {
        let bundle = build_metamodels(&oracle, oracle.space(), &quick(3, true)).unwrap();
        bundle.save(tmp.path().join(name)).unwrap();
    }
    assert_eq!(dir_bytes(&tmp.path().join("a")), dir_bytes(&tmp.path().join("b")));
}

#[test]
fn bootstrap_keeps_inputs_and_holdout_is_raw() {
    let oracle = PllOracle::builtin();
    let space = oracle.space();
    for bootstrap in [false, true] {
        let cfg = quick(5, bootstrap);
        let bundle = build_metamodels(&oracle, space, &cfg).unwrap();
        let design = lhs_sample(space, cfg.n_samples, cfg.seed).unwrap();
        assert_eq!(bundle.samples().inputs, design.inputs);

        let hold = &bundle.provenance().holdout_indices;
        let (_, expect_hold) = holdout_split(cfg.n_samples, cfg.holdout_fraction, cfg.seed);
        assert_eq!(hold, &expect_hold);
        let holdout = bundle.samples().subset(hold);
        let raw = oracle.evaluate_batch(&holdout.native_inputs(space).unwrap()).unwrap();
        for (k, model) in bundle.models().iter().enumerate() {
            let truth = holdout.response(&model.name).unwrap();
            for (row, t) in raw.iter().zip(truth) {
                assert_eq!(row[k], *t);
            }
            let (rmse, rel) = verify(&model.network, &holdout, &model.name).unwrap();
            assert_eq!(rmse, model.verification_rmse);
            assert_eq!(rel, model.rmse_relative);
        }
    }
}

#[test]
fn saved_bundle_predicts_identically() {
    let oracle = PllOracle::builtin();
    let bundle = build_metamodels(&oracle, oracle.space(), &quick(8, false)).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    bundle.save(tmp.path()).unwrap();
    let back = MetamodelBundle::load(tmp.path()).unwrap();
    let xs = lhs_sample(oracle.space(), 30, 1).unwrap().native_inputs(oracle.space()).unwrap();
    assert_eq!(bundle.evaluate_batch(&xs).unwrap(), back.evaluate_batch(&xs).unwrap());
    assert_eq!(back.fom_names(), oracle.fom_names());
}
