//! Time-varying risk-sensitive filter solving the per-step minimax game.
//!
//! At each step the adversary may move the conditional law of
//! `z_t = [x_{t+1}; y_t]` anywhere within relative entropy `c_t` of the
//! pseudo-nominal density centred on the current least-favorable prior
//! `N(x̂_t, V_t)`. The saddle point is a Kalman-like predictor whose
//! covariance is inflated after every update:
//!
//! ```text
//! G_t     = (A V_t Cᵀ + B Dᵀ)(C V_t Cᵀ + D Dᵀ)⁻¹
//! P_{t+1} = (A − G_t C) V_t (A − G_t C)ᵀ + (B − G_t D)(B − G_t D)ᵀ
//! V_{t+1} = (P_{t+1}⁻¹ − λ_t⁻¹ I)⁻¹,     γ(λ_t; P_{t+1}) = c_t
//! ```
//!
//! Design is measurement-free; [`filter_run`] consumes data afterwards.
//! With `c_t ≡ 0` every multiplier is [`Multiplier::Infinite`] and the
//! recursion is the ordinary Kalman predictor.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gauss;
use crate::model::{StateSpaceModel, ToleranceSchedule};
use crate::static_minimax::{self, GammaCurve, Multiplier, DEFAULT_REL_TOL};

/// Window used to decide that a trajectory has reached steady state.
pub const SETTLING_WINDOW: usize = 20;

/// Largest step-to-step relative change tolerated inside the window.
pub const SETTLING_REL_CHANGE: f64 = 1e-6;

/// Margin by which `λ_t` must exceed `r(P_{t+1})`.
const RADIUS_GUARD: f64 = 1e-12;

/// Output of one design step.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignStep {
    pub gain: DMatrix<f64>,
    /// Nominal one-step prediction error covariance `P_{t+1}`.
    pub p_next: DMatrix<f64>,
    /// Least-favorable one-step prediction error covariance `V_{t+1}`.
    pub v_next: DMatrix<f64>,
    pub multiplier: Multiplier,
}

impl DesignStep {
    pub fn theta(&self) -> f64 {
        self.multiplier.theta()
    }

    pub fn lambda(&self) -> f64 {
        self.multiplier.lambda()
    }
}

/// Gains and covariances for steps `0..=T`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterDesign {
    v0: DMatrix<f64>,
    tolerance: ToleranceSchedule,
    steps: Vec<DesignStep>,
}

impl FilterDesign {
    pub fn horizon(&self) -> usize {
        self.steps.len() - 1
    }

    pub fn steps(&self) -> &[DesignStep] {
        &self.steps
    }

    pub fn step(&self, t: usize) -> &DesignStep {
        &self.steps[t]
    }

    pub fn tolerance(&self) -> &ToleranceSchedule {
        &self.tolerance
    }

    pub fn gain(&self, t: usize) -> &DMatrix<f64> {
        &self.steps[t].gain
    }

    pub fn gains(&self) -> Vec<DMatrix<f64>> {
        self.steps.iter().map(|s| s.gain.clone()).collect()
    }

    /// `V_t` for `t = 0..=T+1`.
    pub fn v(&self, t: usize) -> &DMatrix<f64> {
        if t == 0 {
            &self.v0
        } else {
            &self.steps[t - 1].v_next
        }
    }

    /// `P_t` for `t = 1..=T+1`.
    pub fn p(&self, t: usize) -> &DMatrix<f64> {
        &self.steps[t - 1].p_next
    }

    pub fn thetas(&self) -> Vec<f64> {
        self.steps.iter().map(DesignStep::theta).collect()
    }

    /// Whether `θ_t` has settled by the final step.
    pub fn theta_settled(&self) -> bool {
        is_settled(&self.thetas(), SETTLING_WINDOW, SETTLING_REL_CHANGE)
    }

    /// Re-checks the structural invariants of the design: `V ⪰ P`, with
    /// equality exactly when the multiplier is infinite, and
    /// `V⁻¹ = P⁻¹ − θ I`.
    pub fn check_invariants(&self) -> Result<()> {
        for (t, s) in self.steps.iter().enumerate() {
            let scale = s.p_next.amax().max(s.v_next.amax());
            match s.multiplier {
                Multiplier::Infinite => {
                    if s.v_next != s.p_next {
                        return Err(Error::not_pd(format!(
                            "zero-budget step {t} with V different from P"
                        )));
                    }
                }
                Multiplier::Finite { theta } => {
                    let gap = &s.v_next - &s.p_next;
                    if !gauss::is_psd(&gap, 1e-10 * scale) {
                        return Err(Error::not_pd(format!("V - P at step {t}")));
                    }
                    let vi = gauss::spd_inverse(&s.v_next, "V")?;
                    let pi = gauss::spd_inverse(&s.p_next, "P")?;
                    let n = pi.nrows();
                    let resid = (&vi - (&pi - DMatrix::identity(n, n) * theta)).amax();
                    if resid > 1e-9 * pi.amax() {
                        return Err(Error::not_pd(format!(
                            "information identity violated at step {t} (residual {resid:e})"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// One step of the robust design recursion from `V_t` and tolerance `c_t`.
pub fn design_step(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    d: &DMatrix<f64>,
    v: &DMatrix<f64>,
    tolerance: f64,
) -> Result<DesignStep> {
    let n = a.nrows();
    if a.shape() != (n, n)
        || v.shape() != (n, n)
        || b.nrows() != n
        || c.ncols() != n
        || d.nrows() != c.nrows()
        || d.ncols() != b.ncols()
    {
        return Err(Error::dim(format!(
            "design step with A {:?}, B {:?}, C {:?}, D {:?}, V {:?}",
            a.shape(),
            b.shape(),
            c.shape(),
            d.shape(),
            v.shape()
        )));
    }
    let innovation = gauss::symmetrize(&(c * v * c.transpose() + d * d.transpose()));
    let cross = a * v * c.transpose() + b * d.transpose();
    let chol = gauss::cholesky(&innovation, "innovation covariance")?;
    let gain = chol.solve(&cross.transpose()).transpose();

    let a_cl = a - &gain * c;
    let b_cl = b - &gain * d;
    let p_next = gauss::symmetrize(&(&a_cl * v * a_cl.transpose() + &b_cl * b_cl.transpose()));

    let curve = GammaCurve::new(&p_next)?;
    let multiplier = static_minimax::solve_on_curve(&curve, tolerance, DEFAULT_REL_TOL)?;
    if let Multiplier::Finite { theta } = multiplier {
        if !(1.0 / theta > (1.0 + RADIUS_GUARD) * curve.radius()) {
            return Err(Error::MultiplierTooSmall {
                lambda: 1.0 / theta,
                radius: curve.radius(),
            });
        }
    }
    let v_next = static_minimax::lf_covariance(&p_next, multiplier)?;
    Ok(DesignStep {
        gain,
        p_next,
        v_next,
        multiplier,
    })
}

/// Forward sweep of [`design_step`] from `V_0` over the model's horizon.
pub fn design(model: &StateSpaceModel, tolerance: &ToleranceSchedule) -> Result<FilterDesign> {
    model.validate().into_result()?;
    tolerance.check_horizon(model.horizon())?;
    let mut steps = Vec::with_capacity(model.horizon() + 1);
    let mut v = model.v0().clone();
    for t in 0..=model.horizon() {
        let step = design_step(
            model.a(t),
            model.b(t),
            model.c(t),
            model.d(t),
            &v,
            tolerance.at(t),
        )
        .map_err(|e| at_step(e, t))?;
        v = step.v_next.clone();
        steps.push(step);
    }
    Ok(FilterDesign {
        v0: model.v0().clone(),
        tolerance: tolerance.clone(),
        steps,
    })
}

/// Standard Kalman predictor: the zero-tolerance design.
pub fn kalman_design(model: &StateSpaceModel) -> Result<FilterDesign> {
    design(model, &ToleranceSchedule::zero())
}

fn at_step(e: Error, t: usize) -> Error {
    match e {
        Error::NotPositiveDefinite { what } => Error::not_pd(format!("{what} at step {t}")),
        Error::SolverFailure {
            tolerance,
            residual,
        } => Error::SolverFailure {
            tolerance,
            residual,
        },
        other => other,
    }
}

/// One-step-ahead predictor state `x̂_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub estimate: DVector<f64>,
    pub t: usize,
}

impl FilterState {
    pub fn new(estimate: DVector<f64>) -> Self {
        FilterState { estimate, t: 0 }
    }

    /// `x̂_{t+1} = A_t x̂_t + G_t (y_t − C_t x̂_t)`.
    pub fn advance(
        &mut self,
        a: &DMatrix<f64>,
        c: &DMatrix<f64>,
        gain: &DMatrix<f64>,
        y: &DVector<f64>,
    ) {
        let innovation = y - c * &self.estimate;
        self.estimate = a * &self.estimate + gain * innovation;
        self.t += 1;
    }
}

/// Runs the robust predictor over `y_0..y_T`, returning `x̂_1..x̂_{T+1}`.
pub fn filter_run(
    design: &FilterDesign,
    model: &StateSpaceModel,
    ys: &[DVector<f64>],
) -> Result<Vec<DVector<f64>>> {
    if design.horizon() != model.horizon() {
        return Err(Error::dim(format!(
            "design covers {} steps but the model has {}",
            design.horizon() + 1,
            model.horizon() + 1
        )));
    }
    run_with_gains(&design.gains(), model, ys)
}

/// Predictor with an arbitrary gain sequence on the nominal `A_t`, `C_t`.
pub fn run_with_gains(
    gains: &[DMatrix<f64>],
    model: &StateSpaceModel,
    ys: &[DVector<f64>],
) -> Result<Vec<DVector<f64>>> {
    let steps = model.horizon() + 1;
    if ys.len() != steps || gains.len() != steps {
        return Err(Error::dim(format!(
            "expected {steps} observations and gains, got {} and {}",
            ys.len(),
            gains.len()
        )));
    }
    let (n, p) = (model.n(), model.p());
    let mut state = FilterState::new(model.m0().clone());
    let mut out = Vec::with_capacity(steps);
    for (t, (g, y)) in gains.iter().zip(ys).enumerate() {
        if y.len() != p || g.shape() != (n, p) {
            return Err(Error::dim(format!(
                "step {t}: observation of length {} and gain {:?} for n={n}, p={p}",
                y.len(),
                g.shape()
            )));
        }
        state.advance(model.a(t), model.c(t), g, y);
        out.push(state.estimate.clone());
    }
    Ok(out)
}

/// Relative entropy of a perturbed linear-Gaussian transition
/// `z = (A + ΔA; C + ΔC) x + noise(K̃)` from the nominal one with noise `K`,
/// averaged over `x` with second moment `W`:
///
/// ```text
/// ½ [ ‖K^{−1/2} [ΔA; ΔC] W^{1/2}‖²_F + tr(K⁻¹K̃ − I) − ln det(K⁻¹K̃) ]
/// ```
pub fn transition_divergence(
    delta_a: &DMatrix<f64>,
    delta_c: &DMatrix<f64>,
    k: &DMatrix<f64>,
    k_tilde: &DMatrix<f64>,
    w: &DMatrix<f64>,
) -> Result<f64> {
    let n = delta_a.ncols();
    let dim = delta_a.nrows() + delta_c.nrows();
    if delta_c.ncols() != n
        || k.shape() != (dim, dim)
        || k_tilde.shape() != (dim, dim)
        || w.shape() != (n, n)
    {
        return Err(Error::dim(format!(
            "transition divergence with dA {:?}, dC {:?}, K {:?}, K~ {:?}, W {:?}",
            delta_a.shape(),
            delta_c.shape(),
            k.shape(),
            k_tilde.shape(),
            w.shape()
        )));
    }
    let nominal = gauss::GaussianDensity::new(DVector::zeros(dim), k.clone())?;
    let perturbed = gauss::GaussianDensity::new(DVector::zeros(dim), k_tilde.clone())?;
    let lw = gauss::sqrt_factor(w)?;
    let delta = crate::model::stack_rows(delta_a, delta_c);
    let whitened = nominal
        .factor()
        .solve_lower_triangular(&(delta * lw))
        .ok_or_else(|| Error::not_pd("K"))?;
    Ok(0.5 * whitened.norm_squared() + gauss::kl_divergence(&perturbed, &nominal)?)
}

/// Largest relative step-to-step change over the last `window` steps.
pub fn max_relative_change(series: &[f64], window: usize) -> f64 {
    if series.len() < 2 {
        return f64::INFINITY;
    }
    let start = series.len().saturating_sub(window + 1);
    series[start..]
        .windows(2)
        .map(|w| {
            let scale = w[1].abs().max(f64::MIN_POSITIVE);
            if w[0] == w[1] {
                0.0
            } else {
                (w[1] - w[0]).abs() / scale
            }
        })
        .fold(0.0, f64::max)
}

/// `true` when the last `window` steps of `series` change by less than
/// `rel_tol` (relative) from one step to the next.
pub fn is_settled(series: &[f64], window: usize, rel_tol: f64) -> bool {
    series.len() > window && max_relative_change(series, window) < rel_tol
}
