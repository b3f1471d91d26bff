//! Gaussian densities, relative entropy, and the small dense-matrix utilities
//! the rest of the crate is built on.
//!
//! Covariances are re-symmetrized on construction and positive definiteness
//! is decided by attempting a Cholesky factorization. Log-determinants are
//! read off the factor's diagonal.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};
use crate::model::StateSpaceModel;

/// Relative symmetry tolerance: `max|K - Kᵀ| <= SYMMETRY_TOL * (1 + max|K|)`.
pub const SYMMETRY_TOL: f64 = 1e-9;

/// Largest stacked dimension [`assemble_joint`] will build.
pub const MAX_JOINT_DIM: usize = 256;

/// A multivariate normal density with a positive definite covariance.
#[derive(Debug, Clone)]
pub struct GaussianDensity {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    factor: DMatrix<f64>,
}

impl GaussianDensity {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if !cov.is_square() || cov.nrows() != mean.len() {
            return Err(Error::dim(format!(
                "mean has length {} but covariance is {}x{}",
                mean.len(),
                cov.nrows(),
                cov.ncols()
            )));
        }
        check_symmetric(&cov, "covariance")?;
        let cov = symmetrize(&cov);
        let factor = cholesky(&cov, "covariance")?.l();
        Ok(GaussianDensity { mean, cov, factor })
    }

    /// Standard normal in `dim` dimensions.
    pub fn standard(dim: usize) -> Self {
        GaussianDensity {
            mean: DVector::zeros(dim),
            cov: DMatrix::identity(dim, dim),
            factor: DMatrix::identity(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Lower-triangular Cholesky factor of the covariance.
    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    pub fn ln_det_cov(&self) -> f64 {
        ln_det_from_factor(&self.factor)
    }
}

/// Relative entropy `D(fa ‖ fb)` in nats, with `fb` as the reference density.
///
/// ```text
/// D = ½ [ ‖Δm‖²_{Kb⁻¹} + tr(Kb⁻¹Ka − I) − ln det(Kb⁻¹Ka) ]
/// ```
pub fn kl_divergence(fa: &GaussianDensity, fb: &GaussianDensity) -> Result<f64> {
    if fa.dim() != fb.dim() {
        return Err(Error::dim(format!(
            "cannot compare densities of dimension {} and {}",
            fa.dim(),
            fb.dim()
        )));
    }
    let d = fa.dim() as f64;
    let lb = &fb.factor;
    let dm = &fa.mean - &fb.mean;
    let whitened_mean = lb
        .solve_lower_triangular(&dm)
        .ok_or_else(|| Error::not_pd("reference covariance"))?;
    // tr(Kb⁻¹ Ka) = ‖Lb⁻¹ La‖²_F
    let whitened_factor = lb
        .solve_lower_triangular(&fa.factor)
        .ok_or_else(|| Error::not_pd("reference covariance"))?;
    let trace = whitened_factor.norm_squared();
    let ln_det_ratio = fa.ln_det_cov() - fb.ln_det_cov();
    let kl = 0.5 * (whitened_mean.norm_squared() + trace - d - ln_det_ratio);
    Ok(kl.max(0.0))
}

/// Largest eigenvalue magnitude of a symmetric matrix.
pub fn spectral_radius(p: &DMatrix<f64>) -> Result<f64> {
    Ok(symmetric_eigenvalues(p, "matrix")?
        .iter()
        .fold(0.0_f64, |acc, v| acc.max(v.abs())))
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(p: &DMatrix<f64>) -> Result<f64> {
    Ok(symmetric_eigenvalues(p, "matrix")?
        .iter()
        .fold(f64::INFINITY, |acc, &v| acc.min(v)))
}

/// Lower-triangular `L` with `L Lᵀ = K`.
pub fn sqrt_factor(k: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_symmetric(k, "matrix")?;
    Ok(cholesky(&symmetrize(k), "matrix")?.l())
}

/// Exact nominal density of the stacked vector `[x_0; …; x_{T+1}; y_0; …; y_T]`.
///
/// Built by pushing the initial law and the unit-variance driving noise
/// through the model equations, so it is only meant for small horizons.
pub fn assemble_joint(model: &StateSpaceModel, horizon: usize) -> Result<GaussianDensity> {
    if horizon > model.horizon() {
        return Err(Error::dim(format!(
            "joint requested up to step {horizon} but the model ends at {}",
            model.horizon()
        )));
    }
    let init_factor = sqrt_factor(model.v0())?;
    let (mean, cov) = propagate_joint(model.m0(), &init_factor, horizon, |t| {
        (model.a(t), model.b(t), model.c(t), model.d(t))
    })?;
    GaussianDensity::new(mean, cov)
}

/// Mean and covariance of the stacked states and outputs of a linear system
/// `s_{t+1} = A s_t + B v_t`, `y_t = C s_t + D v_t` with `s_0 = mean + F z`,
/// `z, v_t` standard normal. States come first, then outputs.
pub(crate) fn propagate_joint<'a, F>(
    init_mean: &DVector<f64>,
    init_factor: &DMatrix<f64>,
    horizon: usize,
    step: F,
) -> Result<(DVector<f64>, DMatrix<f64>)>
where
    F: Fn(
        usize,
    ) -> (
        &'a DMatrix<f64>,
        &'a DMatrix<f64>,
        &'a DMatrix<f64>,
        &'a DMatrix<f64>,
    ),
{
    let s = init_mean.len();
    let k = init_factor.ncols();
    let (_, b0, c0, _) = step(0);
    let m = b0.ncols();
    let p = c0.nrows();
    let dim = s * (horizon + 2) + p * (horizon + 1);
    if dim > MAX_JOINT_DIM {
        return Err(Error::dim(format!(
            "joint dimension {dim} exceeds the guard of {MAX_JOINT_DIM}"
        )));
    }
    let base = k + m * (horizon + 1);
    let mut map = DMatrix::zeros(dim, base);
    let mut mean = DVector::zeros(dim);

    let mut state_map = DMatrix::zeros(s, base);
    state_map.view_mut((0, 0), (s, k)).copy_from(init_factor);
    let mut state_mean = init_mean.clone();
    map.view_mut((0, 0), (s, base)).copy_from(&state_map);
    mean.rows_mut(0, s).copy_from(&state_mean);

    let y_offset = s * (horizon + 2);
    for t in 0..=horizon {
        let (a, b, c, d) = step(t);
        let col = k + m * t;
        let mut next_map = a * &state_map;
        let mut y_map = c * &state_map;
        {
            let mut nv = next_map.view_mut((0, col), (s, m));
            nv += b;
            let mut yv = y_map.view_mut((0, col), (p, m));
            yv += d;
        }
        let y_mean = c * &state_mean;
        state_mean = a * &state_mean;
        map.view_mut((s * (t + 1), 0), (s, base))
            .copy_from(&next_map);
        mean.rows_mut(s * (t + 1), s).copy_from(&state_mean);
        map.view_mut((y_offset + p * t, 0), (p, base))
            .copy_from(&y_map);
        mean.rows_mut(y_offset + p * t, p).copy_from(&y_mean);
        state_map = next_map;
    }
    let cov = &map * map.transpose();
    Ok((mean, symmetrize(&cov)))
}

pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub(crate) fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

pub(crate) fn is_symmetric(m: &DMatrix<f64>) -> bool {
    m.is_square() && max_asymmetry(m) <= SYMMETRY_TOL * (1.0 + m.amax())
}

pub(crate) fn check_symmetric(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if !m.is_square() {
        return Err(Error::dim(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if !is_symmetric(m) {
        return Err(Error::NotSymmetric {
            what: what.to_string(),
            asymmetry: max_asymmetry(m),
        });
    }
    Ok(())
}

pub(crate) fn cholesky(m: &DMatrix<f64>, what: &str) -> Result<Cholesky<f64, Dyn>> {
    if !m.iter().all(|v| v.is_finite()) {
        return Err(Error::not_pd(format!("{what} (non-finite entries)")));
    }
    let chol = Cholesky::new(m.clone()).ok_or_else(|| Error::not_pd(what))?;
    // Pivots at roundoff level relative to the original diagonal mean the
    // matrix is singular to working precision.
    let l = chol.l_dirty();
    for i in 0..m.nrows() {
        if !(l[(i, i)] * l[(i, i)] > PIVOT_FLOOR * m[(i, i)]) {
            return Err(Error::not_pd(what));
        }
    }
    Ok(chol)
}

const PIVOT_FLOOR: f64 = 64.0 * f64::EPSILON;

pub(crate) fn ln_det_from_factor(l: &DMatrix<f64>) -> f64 {
    2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>()
}

/// Inverse of a symmetric positive definite matrix, re-symmetrized.
pub(crate) fn spd_inverse(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    Ok(symmetrize(&cholesky(m, what)?.inverse()))
}

pub(crate) fn symmetric_eigenvalues(p: &DMatrix<f64>, what: &str) -> Result<DVector<f64>> {
    check_symmetric(p, what)?;
    Ok(SymmetricEigen::new(symmetrize(p)).eigenvalues)
}

/// True when every eigenvalue of the symmetric matrix is `>= -tol`.
pub(crate) fn is_psd(m: &DMatrix<f64>, tol: f64) -> bool {
    is_symmetric(m)
        && SymmetricEigen::new(symmetrize(m))
            .eigenvalues
            .iter()
            .all(|&v| v >= -tol)
}
