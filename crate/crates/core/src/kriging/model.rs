use std::path::Path;

use nalgebra::{DMatrix, DVector, LU, Dyn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::variogram::{
    distance, empirical_semivariogram, fit_variogram, variogram_cloud, Variogram, VariogramFit,
    VariogramKind,
};
use crate::error::{Error, Result};
use crate::format;

/// Minimum separation between training inputs (normalized units).
pub const MIN_SEPARATION: f64 = 1e-10;
/// Conditioning jitter, as a fraction of the sill.
pub const JITTER_FACTOR: f64 = 1e-10;
pub const DEFAULT_LAG_BINS: usize = 12;

/// Ordinary kriging weights for one query: `Σ λ = 1`, `mu` is the Lagrange
/// multiplier of that constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct KrigingWeights {
    pub lambda: Vec<f64>,
    pub mu: f64,
}

/// Ordinary kriging interpolator for one response.
///
/// The augmented matrix
///
/// ```text
///     | γ(e_1,e_1) … γ(e_1,e_n)  1 |
/// Γ = |     ⋮      ⋱     ⋮       ⋮ |
///     | γ(e_n,e_1) … γ(e_n,e_n)  1 |
///     |     1      …     1       0 |
/// ```
///
/// does not depend on the query and is LU-factorized once; every query
/// solves `Γ (λ, μ)ᵀ = (γ(e_1,e_0), …, γ(e_n,e_0), 1)ᵀ`. The diagonal holds
/// `−jitter` rather than 0, which is the variogram form of adding `jitter`
/// to the covariance diagonal; queries that coincide with a training point
/// bypass the solve.
#[derive(Debug, Clone)]
pub struct KrigingModel {
    inputs: Vec<Vec<f64>>,
    responses: Vec<f64>,
    variogram: Variogram,
    jitter: f64,
    lu: LU<f64, Dyn, Dyn>,
}

impl KrigingModel {
    pub fn new(inputs: Vec<Vec<f64>>, responses: Vec<f64>, variogram: Variogram) -> Result<Self> {
        let n = inputs.len();
        if n == 0 {
            return Err(Error::TooFewPoints { needed: 1, got: 0 });
        }
        if n != responses.len() {
            return Err(Error::LengthMismatch { left: n, right: responses.len() });
        }
        let d = inputs[0].len();
        if let Some(row) = inputs.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch { expected: d, got: row.len() });
        }
        let jitter = JITTER_FACTOR * variogram.sill;
        let gamma = gamma_matrix(&inputs, &variogram, jitter)?;
        let lu = gamma.lu();
        if !lu.is_invertible() {
            return Err(Error::SingularSystem("augmented variogram matrix is not invertible".into()));
        }
        Ok(Self { inputs, responses, variogram, jitter, lu })
    }

    /// Estimates the empirical semivariogram, fits `kind` to it and builds
    /// the model. When binning yields fewer than three nonempty lag classes
    /// the raw variogram cloud is fitted instead.
    pub fn fit(
        inputs: Vec<Vec<f64>>,
        responses: Vec<f64>,
        kind: VariogramKind,
        n_bins: usize,
    ) -> Result<(Self, VariogramFit)> {
        let fit = fit_for(&inputs, &responses, kind, n_bins)?;
        Ok((Self::new(inputs, responses, fit.variogram)?, fit))
    }

    pub fn variogram(&self) -> &Variogram {
        &self.variogram
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn responses(&self) -> &[f64] {
        &self.responses
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inputs[0].len()
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Weights for `query`. At a training point the exact solution
    /// (`λ = e_i`, `μ = 0`, since `γ(0) = 0`) is returned instead of the
    /// jittered solve, so the model interpolates its data exactly.
    pub fn weights(&self, query: &[f64]) -> Result<KrigingWeights> {
        if query.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: query.len() });
        }
        let n = self.len();
        if let Some(i) = self.inputs.iter().position(|e| e.as_slice() == query) {
            let mut lambda = vec![0.0; n];
            lambda[i] = 1.0;
            return Ok(KrigingWeights { lambda, mu: 0.0 });
        }
        let mut rhs = DVector::from_element(n + 1, 1.0);
        for (i, e) in self.inputs.iter().enumerate() {
            rhs[i] = self.variogram.eval(distance(e, query));
        }
        let sol = self
            .lu
            .solve(&rhs)
            .ok_or_else(|| Error::SingularSystem("LU solve failed".into()))?;
        if sol.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularSystem("non-finite kriging weights".into()));
        }
        Ok(KrigingWeights { lambda: sol.as_slice()[..n].to_vec(), mu: sol[n] })
    }

    /// `ŷ(e_0) = Σ λ_j y_j`.
    pub fn predict(&self, query: &[f64]) -> Result<f64> {
        let w = self.weights(query)?;
        Ok(w.lambda.iter().zip(&self.responses).map(|(l, y)| l * y).sum())
    }

    pub fn predict_batch(&self, queries: &[Vec<f64>]) -> Result<Vec<f64>> {
        queries.par_iter().map(|q| self.predict(q)).collect()
    }

    pub fn to_file(&self) -> KrigingModelFile {
        KrigingModelFile {
            format_version: format::current(),
            inputs: self.inputs.clone(),
            responses: self.responses.clone(),
            variogram: self.variogram,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(&self.to_file())? + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file: KrigingModelFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        Self::from_file(file)
    }

    /// Rebuilds the model from its exported data. The factorization is
    /// recomputed, never serialized.
    pub fn from_file(file: KrigingModelFile) -> Result<Self> {
        format::check(&file.format_version)?;
        Self::new(file.inputs, file.responses, file.variogram)
    }
}

/// Serialized kriging model: training data and variogram parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KrigingModelFile {
    pub format_version: String,
    pub inputs: Vec<Vec<f64>>,
    pub responses: Vec<f64>,
    pub variogram: Variogram,
}

pub(crate) fn fit_for(
    inputs: &[Vec<f64>],
    responses: &[f64],
    kind: VariogramKind,
    n_bins: usize,
) -> Result<VariogramFit> {
    let emp = empirical_semivariogram(inputs, responses, n_bins)?;
    if emp.len() >= 3 {
        return fit_variogram(&emp, kind);
    }
    fit_variogram(&variogram_cloud(inputs, responses)?, kind)
}

pub(crate) fn gamma_matrix(inputs: &[Vec<f64>], variogram: &Variogram, jitter: f64) -> Result<DMatrix<f64>> {
    let n = inputs.len();
    let mut g = DMatrix::zeros(n + 1, n + 1);
    for i in 0..n {
        g[(i, i)] = -jitter;
        for j in (i + 1)..n {
            let h = distance(&inputs[i], &inputs[j]);
            if h < MIN_SEPARATION {
                return Err(Error::SingularSystem(format!(
                    "training points {i} and {j} are closer than {MIN_SEPARATION}"
                )));
            }
            let v = variogram.eval(h);
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
        g[(i, n)] = 1.0;
        g[(n, i)] = 1.0;
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gauss(range: f64) -> Variogram {
        Variogram::new(VariogramKind::Gaussian, 0.0, 1.0, range).unwrap()
    }

    #[test]
    fn interpolates_training_points() {
        let x = vec![vec![0.0], vec![0.3], vec![0.7], vec![1.0]];
        let y = vec![1.0, -2.0, 0.5, 4.0];
        let m = KrigingModel::new(x.clone(), y.clone(), gauss(0.5)).unwrap();
        for (k, (xi, yi)) in x.iter().zip(&y).enumerate() {
            let w = m.weights(xi).unwrap();
            for (j, l) in w.lambda.iter().enumerate() {
                let expect = if j == k { 1.0 } else { 0.0 };
                assert!((l - expect).abs() < 1e-8, "λ[{j}]={l}");
            }
            assert_eq!(m.predict(xi).unwrap(), *yi);
        }
    }

    #[test]
    fn snap_to_data_is_continuous() {
        let x = vec![vec![0.1, 0.2], vec![0.5, 0.9], vec![0.8, 0.3]];
        let y = vec![2.0, -1.0, 0.25];
        for v in [gauss(0.6), Variogram::new(VariogramKind::Exponential, 0.0, 2.0, 0.5).unwrap()] {
            let m = KrigingModel::new(x.clone(), y.clone(), v).unwrap();
            let near = [0.5 + 1e-9, 0.9];
            assert!((m.predict(&near).unwrap() + 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn symmetric_pair_splits_evenly() {
        let m = KrigingModel::new(vec![vec![0.2], vec![0.8]], vec![1.0, 3.0], gauss(0.4)).unwrap();
        let w = m.weights(&[0.5]).unwrap();
        assert!((w.lambda[0] - 0.5).abs() < 1e-12);
        assert!((w.lambda[1] - 0.5).abs() < 1e-12);
        assert!((m.predict(&[0.5]).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn constant_field_predicts_constant() {
        let x: Vec<Vec<f64>> = (0..7).map(|i| vec![i as f64 / 6.0, ((i * 3) % 7) as f64 / 6.0]).collect();
        let m = KrigingModel::new(x, vec![4.25; 7], gauss(0.6)).unwrap();
        for q in [[0.1, 0.9], [0.5, 0.5], [0.33, 0.01]] {
            assert!((m.predict(&q).unwrap() - 4.25).abs() < 1e-10);
        }
    }

    #[test]
    fn duplicate_points_are_singular() {
        let r = KrigingModel::new(vec![vec![0.5], vec![0.5]], vec![1.0, 2.0], gauss(0.3));
        assert!(matches!(r, Err(Error::SingularSystem(_))));
    }

    #[test]
    fn query_dimension_checked() {
        let m = KrigingModel::new(vec![vec![0.0, 0.0], vec![1.0, 1.0]], vec![0.0, 1.0], gauss(1.0)).unwrap();
        assert!(matches!(m.predict(&[0.5]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn export_round_trip() {
        let x = vec![vec![0.1, 0.2], vec![0.5, 0.9], vec![0.8, 0.3]];
        let m = KrigingModel::new(x, vec![1.0, 2.0, 0.5], gauss(0.7)).unwrap();
        let json = serde_json::to_string(&m.to_file()).unwrap();
        let back = KrigingModel::from_file(serde_json::from_str(&json).unwrap()).unwrap();
        let q = [0.4, 0.4];
        assert_eq!(m.predict(&q).unwrap(), back.predict(&q).unwrap());
    }

    fn arb_model() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>, Vec<f64>, f64)> {
        (3usize..9, 1usize..4).prop_flat_map(|(n, d)| {
            (
                proptest::collection::vec(proptest::collection::vec(0.0f64..1.0, d), n),
                proptest::collection::vec(-5.0f64..5.0, n),
                proptest::collection::vec(0.0f64..1.0, d),
                0.2f64..1.5,
            )
        })
    }

    fn well_separated(x: &[Vec<f64>]) -> bool {
        x.iter().enumerate().all(|(i, a)| x[i + 1..].iter().all(|b| distance(a, b) > 0.05))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn weights_sum_to_one((x, y, q, range) in arb_model()) {
            prop_assume!(well_separated(&x));
            let m = KrigingModel::new(x, y, gauss(range)).unwrap();
            let w = m.weights(&q).unwrap();
            prop_assert!((w.lambda.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        }

        #[test]
        fn translation_covariance((x, y, q, range) in arb_model(), shift in -100.0f64..100.0) {
            prop_assume!(well_separated(&x));
            let v = Variogram::new(VariogramKind::Exponential, 0.0, 1.0, range).unwrap();
            let a = KrigingModel::new(x.clone(), y.clone(), v).unwrap();
            let b = KrigingModel::new(x, y.iter().map(|v| v + shift).collect(), v).unwrap();
            let diff = b.predict(&q).unwrap() - a.predict(&q).unwrap();
            prop_assert!((diff - shift).abs() < 1e-9);
        }

        #[test]
        fn permutation_invariance((x, y, q, range) in arb_model(), rot in 0usize..8) {
            prop_assume!(well_separated(&x));
            let n = x.len();
            let order: Vec<usize> = (0..n).map(|i| (i + rot) % n).rev().collect();
            let xp = order.iter().map(|&i| x[i].clone()).collect();
            let yp = order.iter().map(|&i| y[i]).collect();
            let v = Variogram::new(VariogramKind::Spherical, 0.0, 1.0, range + 0.5).unwrap();
            let a = KrigingModel::new(x, y, v).unwrap().predict(&q).unwrap();
            let b = KrigingModel::new(xp, yp, v).unwrap().predict(&q).unwrap();
            prop_assert!((a - b).abs() < 1e-10);
        }
    }
}
