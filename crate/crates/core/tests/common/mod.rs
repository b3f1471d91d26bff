#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use robust_kf::model::StateSpaceModel;

pub fn normal_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// `M Mᵀ + floor·I` with standard normal `M`.
pub fn random_spd(rng: &mut impl Rng, n: usize, floor: f64) -> DMatrix<f64> {
    let m = normal_matrix(rng, n, n);
    &m * m.transpose() + DMatrix::identity(n, n) * floor
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eig(m: &DMatrix<f64>) -> f64 {
    let s = (m + m.transpose()) * 0.5;
    s.symmetric_eigenvalues().min()
}

pub fn rel_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax() / b.amax().max(f64::MIN_POSITIVE)
}

/// Random constant model with a stable-ish `A` scaled to spectral radius
/// below `radius` and `m = n + p` noise columns.
pub fn random_model(
    rng: &mut impl Rng,
    n: usize,
    p: usize,
    horizon: usize,
    radius: f64,
) -> StateSpaceModel {
    let a = normal_matrix(rng, n, n);
    let spec = a
        .clone()
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    let a = a * (radius * rng.random_range(0.3..1.0) / spec.max(1e-3));
    let gamma = normal_matrix(rng, n + p, n + p) + DMatrix::identity(n + p, n + p) * 2.0;
    let b = gamma.rows(0, n).into_owned();
    let d = gamma.rows(n, p).into_owned();
    let c = normal_matrix(rng, p, n);
    StateSpaceModel::constant(
        horizon,
        a,
        b,
        c,
        d,
        DVector::zeros(n),
        random_spd(rng, n, 0.5),
    )
    .expect("random model is valid")
}
