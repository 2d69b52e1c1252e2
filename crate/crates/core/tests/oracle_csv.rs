mod common;

use common::Mix;
use kbann::oracle::{read_samples, write_samples, Evaluator, PLL_FOMS, PLL_TARGETS};
use kbann::sampling::lhs_sample;
use kbann::{Error, PllOracle};
use serde_json::Value;

/// Re-evaluates the shipped oracle straight from its JSON text.
fn straight_line(doc: &Value, x: &[f64]) -> Vec<f64> {
    let params = doc["space"]["parameters"].as_array().unwrap();
    let u: Vec<f64> = params
        .iter()
        .zip(x)
        .map(|(p, v)| {
            let lo = p["lower"].as_f64().unwrap();
            let hi = p["upper"].as_f64().unwrap();
            (v - lo) / (hi - lo)
        })
        .collect();
    let d = u.len();
    doc["foms"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| {
            let mut y = f["offset"].as_f64().unwrap();
            for i in 0..d {
                y += f["linear"][i].as_f64().unwrap() * u[i];
                for j in 0..d {
                    y += f["quadratic"][i][j].as_f64().unwrap() * u[i] * u[j];
                }
            }
            let mut ripple = f["ripple"]["amplitude"].as_f64().unwrap();
            for t in f["ripple"]["terms"].as_array().unwrap() {
                let k = t["dim"].as_u64().unwrap() as usize;
                ripple *= (t["frequency"].as_f64().unwrap() * u[k] + t["phase"].as_f64().unwrap()).sin();
            }
            y + ripple
        })
        .collect()
}

#[test]
fn matches_independent_reimplementation() {
    let oracle = PllOracle::builtin();
    let doc: Value = serde_json::from_str(&oracle.to_json_string()).unwrap();
    assert_eq!(doc["foms"].as_array().unwrap().len(), 4);
    let mut r = Mix(8);
    let space = oracle.space();
    for _ in 0..100 {
        let x: Vec<f64> = space.params().iter().map(|p| r.range(p.lower, p.upper)).collect();
        let got = oracle.evaluate(&x).unwrap();
        let expect = straight_line(&doc, &x);
        for (a, b) in got.iter().zip(&expect) {
            assert!((a - b).abs() <= 1e-12 * b.abs(), "{a} vs {b}");
        }
    }
}

#[test]
fn nominal_and_names() {
    let oracle = PllOracle::builtin();
    assert_eq!(oracle.fom_names(), PLL_FOMS.map(String::from).as_slice());
    assert_eq!(oracle.space().dim(), 21);
    let at = oracle.evaluate(&oracle.space().nominal()).unwrap();
    for (v, t) in at.iter().zip(PLL_TARGETS) {
        assert!((v - t).abs() <= 1e-9 * t);
    }
    for s in oracle.surfaces() {
        for (i, row) in s.quadratic.iter().enumerate() {
            for (j, b) in row.iter().enumerate() {
                assert_eq!(*b, s.quadratic[j][i]);
            }
        }
    }
}

#[test]
fn batch_agrees_with_loop() {
    let oracle = PllOracle::builtin();
    let xs = lhs_sample(oracle.space(), 100, 1).unwrap().native_inputs(oracle.space()).unwrap();
    let batch = oracle.evaluate_batch(&xs).unwrap();
    for (x, row) in xs.iter().zip(&batch) {
        assert_eq!(&oracle.evaluate(x).unwrap(), row);
    }
    assert_eq!(oracle.evaluate_batch(&xs[..1]).unwrap(), vec![oracle.evaluate(&xs[0]).unwrap()]);
    assert!(oracle.evaluate_batch(&[]).unwrap().is_empty());
    let mut bad = xs[..3].to_vec();
    bad[2][0] *= 10.0;
    match oracle.evaluate_batch(&bad) {
        Err(Error::SimulatorFailure { row, .. }) => assert_eq!(row, 2),
        other => panic!("{other:?}"),
    }
}

fn evaluated(n: usize, seed: u64) -> (PllOracle, kbann::SampleSet) {
    let oracle = PllOracle::builtin();
    let mut set = lhs_sample(oracle.space(), n, seed).unwrap();
    let ys = oracle.evaluate_batch(&set.native_inputs(oracle.space()).unwrap()).unwrap();
    for (k, name) in oracle.fom_names().iter().enumerate() {
        set.set_response(name.clone(), ys.iter().map(|r| r[k]).collect()).unwrap();
    }
    (oracle, set)
}

#[test]
fn csv_round_trip() {
    let (oracle, set) = evaluated(25, 6);
    let mut buf = Vec::new();
    write_samples(&mut buf, &set, oracle.space()).unwrap();
    let back = read_samples(buf.as_slice(), oracle.space(), Some(oracle.fom_names())).unwrap();
    assert_eq!(back.len(), 25);
    for (a, b) in set.inputs.iter().flatten().zip(back.inputs.iter().flatten()) {
        assert!((a - b).abs() <= 1e-14);
    }
    for name in oracle.fom_names() {
        for (a, b) in set.response(name).unwrap().iter().zip(back.response(name).unwrap()) {
            assert!((a - b).abs() <= 1e-14 * a.abs());
        }
    }
}

#[test]
fn csv_columns_bind_by_name() {
    let (oracle, set) = evaluated(5, 2);
    let mut buf = Vec::new();
    write_samples(&mut buf, &set, oracle.space()).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().map(|l| l.split(',').collect()).collect();
    let order: Vec<usize> = (0..rows[0].len()).rev().collect();
    let shuffled: String = rows
        .iter()
        .map(|r| order.iter().map(|&k| r[k]).collect::<Vec<_>>().join(",") + "\n")
        .collect();
    let a = read_samples(text.as_bytes(), oracle.space(), None).unwrap();
    let b = read_samples(shuffled.as_bytes(), oracle.space(), None).unwrap();
    assert_eq!(a, b);
}

#[test]
fn csv_errors() {
    let oracle = PllOracle::builtin();
    let space = oracle.space();
    let header = space.names().join(",");
    let nominal: Vec<String> = space.nominal().iter().map(|v| v.to_string()).collect();
    assert!(matches!(read_samples(header.as_bytes(), space, None), Err(Error::MalformedCsv { .. })));
    let extra = format!("{header},bogus\n{},1\n", nominal.join(","));
    assert!(matches!(
        read_samples(extra.as_bytes(), space, Some(oracle.fom_names())),
        Err(Error::UnknownColumn(c)) if c == "bogus"
    ));
    let mut cells = nominal.clone();
    cells[3] = "abc".into();
    let text = format!("{header}\n{}\n", cells.join(","));
    assert!(matches!(read_samples(text.as_bytes(), space, None), Err(Error::NonNumericCell { line: 2, .. })));
}
