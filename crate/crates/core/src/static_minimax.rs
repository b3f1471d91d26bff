//! Robust estimation of `x` from `y` when the joint Gaussian law of `(x, y)`
//! may be replaced by any density within a relative-entropy ball.
//!
//! The least-favorable density keeps the nominal mean, cross covariance and
//! observation covariance; only the covariance of `x` is inflated. The
//! estimator is therefore the ordinary conditional mean, and the inflated
//! error covariance satisfies `P̃⁻¹ = P⁻¹ − λ⁻¹ I` where the multiplier `λ`
//! makes the divergence curve `γ(λ)` hit the tolerance exactly.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gauss::{self, GaussianDensity};

/// Default absolute residual target for [`solve_lambda`], scaled by `max(1, c)`.
pub const DEFAULT_REL_TOL: f64 = 1e-12;

/// Bisection iteration cap.
pub const MAX_BISECTIONS: usize = 200;

/// Largest tolerance accepted, in nats. Beyond this the multiplier is pinned
/// so close to the spectral radius that the inflated covariance is meaningless.
pub const MAX_TOLERANCE: f64 = 1e3;

/// Upper end of the bracket for `θ = 1/λ`, as a fraction of `1/r(P)`.
const THETA_BRACKET: f64 = 0.999999;

/// Lagrange multiplier of a divergence constraint.
///
/// A zero tolerance has no finite multiplier; it is represented by
/// [`Multiplier::Infinite`] so the nominal (Kalman) case is exact rather than
/// approximated by a huge float.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Multiplier {
    Finite { theta: f64 },
    Infinite,
}

impl Multiplier {
    pub fn from_lambda(lambda: f64) -> Self {
        if lambda.is_infinite() {
            Multiplier::Infinite
        } else {
            Multiplier::Finite {
                theta: 1.0 / lambda,
            }
        }
    }

    /// `λ`, or `+∞` for the sentinel.
    pub fn lambda(&self) -> f64 {
        match *self {
            Multiplier::Finite { theta } => 1.0 / theta,
            Multiplier::Infinite => f64::INFINITY,
        }
    }

    /// Risk-sensitivity parameter `θ = 1/λ`; zero for the sentinel.
    pub fn theta(&self) -> f64 {
        match *self {
            Multiplier::Finite { theta } => theta,
            Multiplier::Infinite => 0.0,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Multiplier::Infinite)
    }
}

/// `γ(λ)` for a fixed error covariance, evaluated on its eigenvalues.
///
/// With `x_i = μ_i / λ` the curve is `½ Σ [x_i/(1−x_i) + ln(1−x_i)]`, which
/// for small `x_i` is a difference of nearly equal terms; [`gamma_term`] uses a
/// series there.
#[derive(Debug, Clone)]
pub struct GammaCurve {
    eigenvalues: Vec<f64>,
    radius: f64,
}

impl GammaCurve {
    pub fn new(p: &DMatrix<f64>) -> Result<Self> {
        let eig = gauss::symmetric_eigenvalues(p, "error covariance")?;
        let eigenvalues: Vec<f64> = eig.iter().copied().collect();
        if eigenvalues.iter().any(|&v| v <= 0.0) {
            return Err(Error::not_pd("error covariance"));
        }
        let radius = eigenvalues.iter().fold(0.0_f64, |a, &b| a.max(b));
        Ok(GammaCurve {
            eigenvalues,
            radius,
        })
    }

    /// `r(P)`.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// `γ` as a function of `θ = 1/λ`; increasing on `[0, 1/r(P))`.
    pub fn at_theta(&self, theta: f64) -> f64 {
        0.5 * self
            .eigenvalues
            .iter()
            .map(|&mu| gamma_term(theta * mu))
            .sum::<f64>()
    }

    pub fn at_lambda(&self, lambda: f64) -> Result<f64> {
        if lambda.is_infinite() {
            return Ok(0.0);
        }
        if !(lambda > self.radius) {
            return Err(Error::MultiplierTooSmall {
                lambda,
                radius: self.radius,
            });
        }
        Ok(self.at_theta(1.0 / lambda))
    }
}

/// `x/(1−x) + ln(1−x)` for `0 <= x < 1`.
fn gamma_term(x: f64) -> f64 {
    // x/(1−x) = x + x²/(1−x); the remaining x + ln(1−x) = −Σ_{k≥2} x^k/k
    let head = x * x / (1.0 - x);
    let tail = if x < 1e-2 {
        let mut pow = x * x;
        let mut acc = 0.0;
        for k in 2..=16 {
            acc += pow / k as f64;
            pow *= x;
        }
        -acc
    } else {
        x + (-x).ln_1p()
    };
    head + tail
}

/// `γ(λ) = ½[tr((I − P/λ)⁻¹ − I) + ln det(I − P/λ)]`.
pub fn gamma(lambda: f64, p: &DMatrix<f64>) -> Result<f64> {
    GammaCurve::new(p)?.at_lambda(lambda)
}

/// Unique multiplier with `γ(λ) = c`, found by bisection on `θ = 1/λ`.
///
/// `c = 0` yields [`Multiplier::Infinite`].
pub fn solve_lambda(p: &DMatrix<f64>, c: f64, rel_tol: f64) -> Result<Multiplier> {
    let curve = GammaCurve::new(p)?;
    solve_on_curve(&curve, c, rel_tol)
}

pub(crate) fn check_tolerance(c: f64) -> Result<()> {
    if !(0.0..=MAX_TOLERANCE).contains(&c) {
        return Err(Error::ToleranceOutOfRange(c));
    }
    Ok(())
}

pub(crate) fn solve_on_curve(curve: &GammaCurve, c: f64, rel_tol: f64) -> Result<Multiplier> {
    check_tolerance(c)?;
    if c == 0.0 {
        return Ok(Multiplier::Infinite);
    }
    let target = rel_tol * c.max(1.0);
    let mut lo = 0.0;
    let mut hi = THETA_BRACKET / curve.radius;
    let top = curve.at_theta(hi);
    if top < c {
        return Err(Error::SolverFailure {
            tolerance: c,
            residual: c - top,
        });
    }
    let mut best = (hi, top - c);
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let g = curve.at_theta(mid);
        if (g - c).abs() < best.1.abs() {
            best = (mid, g - c);
        }
        if g < c {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (theta, residual) = best;
    if residual.abs() > target {
        return Err(Error::SolverFailure {
            tolerance: c,
            residual: residual.abs(),
        });
    }
    Ok(Multiplier::Finite { theta })
}

/// Least-favorable error covariance `P̃ = (P⁻¹ − λ⁻¹ I)⁻¹`.
///
/// Computed as `(I − θP)⁻¹ P` with a Cholesky solve, so `P⁻¹` is never formed.
pub fn lf_covariance(p: &DMatrix<f64>, multiplier: Multiplier) -> Result<DMatrix<f64>> {
    let theta = match multiplier {
        Multiplier::Infinite => return Ok(gauss::symmetrize(p)),
        Multiplier::Finite { theta } => theta,
    };
    let radius = gauss::spectral_radius(p)?;
    if !(theta * radius < 1.0) {
        return Err(Error::MultiplierTooSmall {
            lambda: 1.0 / theta,
            radius,
        });
    }
    let n = p.nrows();
    let shrink = DMatrix::identity(n, n) - p * theta;
    let chol = gauss::cholesky(&gauss::symmetrize(&shrink), "I - P/lambda")?;
    Ok(gauss::symmetrize(&chol.solve(p)))
}

/// Nominal joint law of `z = [x; y]` together with a divergence tolerance.
#[derive(Debug, Clone)]
pub struct StaticProblem {
    n: usize,
    density: GaussianDensity,
    tolerance: f64,
}

impl StaticProblem {
    pub fn new(n: usize, mean: DVector<f64>, cov: DMatrix<f64>, tolerance: f64) -> Result<Self> {
        check_tolerance(tolerance)?;
        if n == 0 || n >= mean.len() {
            return Err(Error::dim(format!(
                "state dimension {n} must be in 1..{}",
                mean.len()
            )));
        }
        let density = GaussianDensity::new(mean, cov)?;
        Ok(StaticProblem {
            n,
            density,
            tolerance,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.density.dim() - self.n
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn density(&self) -> &GaussianDensity {
        &self.density
    }

    pub fn kx(&self) -> DMatrix<f64> {
        self.density
            .cov()
            .view((0, 0), (self.n, self.n))
            .into_owned()
    }

    pub fn kxy(&self) -> DMatrix<f64> {
        self.density
            .cov()
            .view((0, self.n), (self.n, self.p()))
            .into_owned()
    }

    pub fn ky(&self) -> DMatrix<f64> {
        self.density
            .cov()
            .view((self.n, self.n), (self.p(), self.p()))
            .into_owned()
    }
}

#[derive(Debug, Clone)]
pub struct StaticSolution {
    pub gain: DMatrix<f64>,
    pub nominal_cov: DMatrix<f64>,
    pub lf_cov: DMatrix<f64>,
    pub multiplier: Multiplier,
}

impl StaticSolution {
    /// Least-favorable joint density: the nominal one with the `x` block
    /// replaced by `P̃ + K_xy K_y⁻¹ K_yx`.
    pub fn least_favorable_joint(&self, prob: &StaticProblem) -> Result<GaussianDensity> {
        let n = prob.n();
        let explained = prob.kx() - &self.nominal_cov;
        let mut cov = prob.density().cov().clone();
        cov.view_mut((0, 0), (n, n))
            .copy_from(&(&self.lf_cov + explained));
        GaussianDensity::new(prob.density().mean().clone(), cov)
    }
}

/// Conditional-mean gain `G₀ = K_xy K_y⁻¹` and error covariance `P`.
pub fn nominal_conditional(prob: &StaticProblem) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let kxy = prob.kxy();
    let chol = gauss::cholesky(&prob.ky(), "observation covariance K_y")?;
    let gain = chol.solve(&kxy.transpose()).transpose();
    let p = gauss::symmetrize(&(prob.kx() - &gain * kxy.transpose()));
    gauss::cholesky(&p, "conditional error covariance")?;
    Ok((gain, p))
}

pub fn static_solve(prob: &StaticProblem) -> Result<StaticSolution> {
    let (gain, nominal_cov) = nominal_conditional(prob)?;
    let multiplier = solve_lambda(&nominal_cov, prob.tolerance(), DEFAULT_REL_TOL)?;
    let lf_cov = lf_covariance(&nominal_cov, multiplier)?;
    Ok(StaticSolution {
        gain,
        nominal_cov,
        lf_cov,
        multiplier,
    })
}
