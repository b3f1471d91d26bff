//! Least-favorable model: the adversary's optimal perturbation, realized as
//! an augmented linear Gaussian system in `ξ_t = [x_t; e_t]`.
//!
//! A backward sweep accounts for the adversary's retroactive reweighting:
//!
//! ```text
//! W_{N+1} = λ_N I
//! Ω_t⁻¹   = (A − G C)ᵀ [W_{t+1} − Γₑ Γₑᵀ]⁻¹ (A − G C),    Γₑ = B − G D
//! W_t     = (Ω_t⁻¹ + λ_{t−1}⁻¹ I)⁻¹
//! ```
//!
//! The sweep is carried in information form (`W⁻¹`, `Ω⁻¹`), which stays
//! finite when a multiplier is infinite. The noise then becomes
//! `v_t = H_t e_t + L_t ε_t`, giving
//!
//! ```text
//! Ã = [A  BH; 0  A − GC + ΓₑH]   B̃ = [B; Γₑ] L   C̃ = [C  DH]   D̃ = D L
//! ```

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gauss::{self, GaussianDensity};
use crate::model::{StateSpaceModel, ToleranceSchedule};
use crate::robust_filter::{self, FilterDesign};
use crate::static_minimax::Multiplier;

/// Tolerance of the forward recomputation of the backward sweep.
pub const DUALITY_TOL: f64 = 1e-10;

/// `A − G C` and `B − G D` at one step.
pub fn closed_loop(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    d: &DMatrix<f64>,
    gain: &DMatrix<f64>,
) -> (DMatrix<f64>, DMatrix<f64>) {
    (a - gain * c, b - gain * d)
}

/// Backward quantities over `0..=N`, `N = T + pad`, stored as inverses.
#[derive(Debug, Clone, PartialEq)]
pub struct BackwardSweep {
    pad: usize,
    terminal: Multiplier,
    /// `W_t⁻¹` for `t = 1..=N+1`.
    w_inv: Vec<DMatrix<f64>>,
    /// `Ω_t⁻¹` for `t = 0..=N+1`.
    omega_inv: Vec<DMatrix<f64>>,
}

impl BackwardSweep {
    pub fn pad(&self) -> usize {
        self.pad
    }

    /// Last index `N + 1` of the sweep.
    pub fn terminal_index(&self) -> usize {
        self.w_inv.len()
    }

    pub fn w_inv(&self, t: usize) -> &DMatrix<f64> {
        &self.w_inv[t - 1]
    }

    pub fn omega_inv(&self, t: usize) -> &DMatrix<f64> {
        &self.omega_inv[t]
    }

    /// `W_t` for `t = 1..=N+1`; the terminal value is exactly `λ_N I`.
    pub fn w(&self, t: usize) -> Result<DMatrix<f64>> {
        let n = self.w_inv[0].nrows();
        if t == self.terminal_index() {
            return match self.terminal {
                Multiplier::Finite { .. } => {
                    Ok(DMatrix::from_diagonal_element(n, n, self.terminal.lambda()))
                }
                Multiplier::Infinite => Err(Error::not_pd("terminal W⁻¹ (infinite multiplier)")),
            };
        }
        gauss::spd_inverse(self.w_inv(t), &format!("W⁻¹ at step {t}"))
    }

    /// Recomputes `W_{t+1} = Acl Ω_t Aclᵀ + Γₑ Γₑᵀ` and
    /// `Ω_{t+1} = (W_{t+1}⁻¹ − θ_t I)⁻¹` from the stored values, returning
    /// the largest relative mismatch with the backward results.
    pub fn forward_check(&self, model: &StateSpaceModel, design: &FilterDesign) -> Result<f64> {
        let mut worst: f64 = 0.0;
        let last = self.terminal_index() - 1;
        for t in 0..=last {
            let (acl, ge) = closed_loop(
                model.a(t),
                model.b(t),
                model.c(t),
                model.d(t),
                design.gain(t),
            );
            let omega = gauss::spd_inverse(self.omega_inv(t), &format!("Ω⁻¹ at step {t}"))?;
            let w_fwd = &acl * omega * acl.transpose() + &ge * ge.transpose();
            let w_bwd = self.w(t + 1)?;
            worst = worst.max(rel_diff(&w_fwd, &w_bwd));
            if t < last {
                let n = w_bwd.nrows();
                let theta = design.step(t).theta();
                let diff = self.w_inv(t + 1) - DMatrix::identity(n, n) * theta;
                let omega_fwd = gauss::spd_inverse(&diff, &format!("Ω⁻¹ at step {}", t + 1))?;
                let omega_bwd =
                    gauss::spd_inverse(self.omega_inv(t + 1), &format!("Ω⁻¹ at step {}", t + 1))?;
                worst = worst.max(rel_diff(&omega_fwd, &omega_bwd));
            }
        }
        Ok(worst)
    }
}

fn rel_diff(x: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
    (x - y).amax() / y.amax().max(f64::MIN_POSITIVE)
}

/// Least-favorable noise statistics from `W_{t+1}⁻¹`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseParams {
    /// `K̃_v = (I − Γₑᵀ W⁻¹ Γₑ)⁻¹`
    pub kv: DMatrix<f64>,
    /// `H = K̃_v Γₑᵀ W⁻¹ (A − G C)`
    pub h: DMatrix<f64>,
    /// Lower-triangular factor of `K̃_v`.
    pub l: DMatrix<f64>,
}

/// Least-favorable noise statistics given `W_{t+1}`.
pub fn lf_noise_params(
    w: &DMatrix<f64>,
    a_cl: &DMatrix<f64>,
    gamma_e: &DMatrix<f64>,
) -> Result<NoiseParams> {
    let w_inv = gauss::spd_inverse(w, "W")?;
    lf_noise_params_info(&w_inv, a_cl, gamma_e).map_err(|e| match e {
        Error::Infeasible { min_eigenvalue, .. } => Error::Infeasible {
            step: 0,
            min_eigenvalue,
        },
        other => other,
    })
}

/// [`lf_noise_params`] taking `W⁻¹` directly; `W⁻¹ = 0` gives the nominal
/// noise `K̃_v = I`, `H = 0`.
pub fn lf_noise_params_info(
    w_inv: &DMatrix<f64>,
    a_cl: &DMatrix<f64>,
    gamma_e: &DMatrix<f64>,
) -> Result<NoiseParams> {
    let n = a_cl.nrows();
    let k = gamma_e.ncols();
    if w_inv.shape() != (n, n) || a_cl.shape() != (n, n) || gamma_e.nrows() != n {
        return Err(Error::dim(format!(
            "noise parameters with W {:?}, A−GC {:?}, B−GD {:?}",
            w_inv.shape(),
            a_cl.shape(),
            gamma_e.shape()
        )));
    }
    let wg = w_inv * gamma_e;
    let m = gauss::symmetrize(&(DMatrix::identity(k, k) - gamma_e.transpose() * &wg));
    let chol = m.clone().cholesky().ok_or_else(|| Error::Infeasible {
        step: 0,
        min_eigenvalue: gauss::min_eigenvalue(&m).unwrap_or(f64::NAN),
    })?;
    let kv = gauss::symmetrize(&chol.inverse());
    let h = &kv * wg.transpose() * a_cl;
    let l = gauss::sqrt_factor(&kv)?;
    Ok(NoiseParams { kv, h, l })
}

/// Backward sweep over the full horizon of `design`, which must already
/// include the pad steps.
pub fn backward_sweep(
    design: &FilterDesign,
    model: &StateSpaceModel,
    pad: usize,
) -> Result<BackwardSweep> {
    let (w_inv, omega_inv, _) = sweep_with_params(design, model)?;
    Ok(BackwardSweep {
        pad,
        terminal: design.step(design.horizon()).multiplier,
        w_inv,
        omega_inv,
    })
}

/// One backward step in information form: from `W_{t+1}⁻¹` to `Ω_t⁻¹`,
/// together with the noise statistics at `t`. `W_t⁻¹ = Ω_t⁻¹ + θ_{t−1} I`
/// is left to the caller.
pub fn backward_step(
    w_inv_next: &DMatrix<f64>,
    a_cl: &DMatrix<f64>,
    gamma_e: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, NoiseParams)> {
    let np = lf_noise_params_info(w_inv_next, a_cl, gamma_e)?;
    // [W − ΓₑΓₑᵀ]⁻¹ = W⁻¹ + W⁻¹Γₑ K̃_v ΓₑᵀW⁻¹
    let wg = w_inv_next * gamma_e;
    let inner = w_inv_next + &wg * &np.kv * wg.transpose();
    let omega_inv = gauss::symmetrize(&(a_cl.transpose() * inner * a_cl));
    Ok((omega_inv, np))
}

type SweepParts = (Vec<DMatrix<f64>>, Vec<DMatrix<f64>>, Vec<NoiseParams>);

fn sweep_with_params(design: &FilterDesign, model: &StateSpaceModel) -> Result<SweepParts> {
    let last = design.horizon();
    if model.horizon() != last {
        return Err(Error::dim(format!(
            "design covers {} steps but the model has {}",
            last + 1,
            model.horizon() + 1
        )));
    }
    let n = model.n();
    let eye = DMatrix::<f64>::identity(n, n);
    let mut w_inv = vec![DMatrix::zeros(n, n); last + 1];
    let mut omega_inv = vec![DMatrix::zeros(n, n); last + 2];
    let mut params = Vec::with_capacity(last + 1);

    let mut current = &eye * design.step(last).theta();
    for t in (0..=last).rev() {
        let (acl, ge) = closed_loop(
            model.a(t),
            model.b(t),
            model.c(t),
            model.d(t),
            design.gain(t),
        );
        let (om, np) = backward_step(&current, &acl, &ge).map_err(|e| match e {
            Error::Infeasible { min_eigenvalue, .. } => Error::Infeasible {
                step: t,
                min_eigenvalue,
            },
            other => other,
        })?;
        w_inv[t] = current;
        if t > 0 {
            current = &om + &eye * design.step(t - 1).theta();
        } else {
            current = DMatrix::zeros(n, n);
        }
        omega_inv[t] = om;
        params.push(np);
    }
    params.reverse();
    Ok((w_inv, omega_inv, params))
}

/// Augmented least-favorable system over the retained window `0..=T`.
#[derive(Debug, Clone, PartialEq)]
pub struct LeastFavorableModel {
    nominal: StateSpaceModel,
    tolerance: ToleranceSchedule,
    pad: usize,
    gains: Vec<DMatrix<f64>>,
    noise: Vec<NoiseParams>,
    a: Vec<DMatrix<f64>>,
    b: Vec<DMatrix<f64>>,
    c: Vec<DMatrix<f64>>,
    d: Vec<DMatrix<f64>>,
    w_trace: Vec<f64>,
    initial_mean: DVector<f64>,
    initial_cov: DMatrix<f64>,
}

impl LeastFavorableModel {
    pub fn horizon(&self) -> usize {
        self.a.len() - 1
    }

    /// Nominal state dimension; the augmented state has twice this size.
    pub fn n(&self) -> usize {
        self.nominal.n()
    }

    pub fn p(&self) -> usize {
        self.nominal.p()
    }

    pub fn nominal(&self) -> &StateSpaceModel {
        &self.nominal
    }

    pub fn tolerance(&self) -> &ToleranceSchedule {
        &self.tolerance
    }

    pub fn pad(&self) -> usize {
        self.pad
    }

    /// Robust gains `G_t` embedded in the error block.
    pub fn gains(&self) -> &[DMatrix<f64>] {
        &self.gains
    }

    pub fn noise(&self, t: usize) -> &NoiseParams {
        &self.noise[t]
    }

    pub fn h(&self, t: usize) -> &DMatrix<f64> {
        &self.noise[t].h
    }

    pub fn kv(&self, t: usize) -> &DMatrix<f64> {
        &self.noise[t].kv
    }

    pub fn l(&self, t: usize) -> &DMatrix<f64> {
        &self.noise[t].l
    }

    pub fn a(&self, t: usize) -> &DMatrix<f64> {
        &self.a[t]
    }

    pub fn b(&self, t: usize) -> &DMatrix<f64> {
        &self.b[t]
    }

    pub fn c(&self, t: usize) -> &DMatrix<f64> {
        &self.c[t]
    }

    pub fn d(&self, t: usize) -> &DMatrix<f64> {
        &self.d[t]
    }

    /// `tr W_{t+1}`, infinite when the adversary has no budget left.
    pub fn w_trace(&self, t: usize) -> f64 {
        self.w_trace[t]
    }

    /// `[m₀; 0]`
    pub fn initial_mean(&self) -> &DVector<f64> {
        &self.initial_mean
    }

    /// `[[V₀, V₀], [V₀, V₀]]`, positive semidefinite.
    pub fn initial_cov(&self) -> &DMatrix<f64> {
        &self.initial_cov
    }

    /// A factor `F` with `F Fᵀ` equal to the initial covariance.
    pub fn initial_factor(&self) -> Result<DMatrix<f64>> {
        let l0 = gauss::sqrt_factor(self.nominal.v0())?;
        Ok(crate::model::stack_rows(&l0, &l0))
    }

    /// Restricts the model to `0..=horizon`.
    pub fn truncated(&self, horizon: usize) -> Self {
        let keep = horizon + 1;
        LeastFavorableModel {
            nominal: self.nominal.truncated(horizon),
            tolerance: self.tolerance.truncated(horizon),
            pad: self.pad,
            gains: self.gains[..keep].to_vec(),
            noise: self.noise[..keep].to_vec(),
            a: self.a[..keep].to_vec(),
            b: self.b[..keep].to_vec(),
            c: self.c[..keep].to_vec(),
            d: self.d[..keep].to_vec(),
            w_trace: self.w_trace[..keep].to_vec(),
            initial_mean: self.initial_mean.clone(),
            initial_cov: self.initial_cov.clone(),
        }
    }

    /// Joint law of `[x_0..x_{T+1}, y_0..y_T]` under the least-favorable
    /// model, for comparison with [`gauss::assemble_joint`].
    pub fn joint(&self) -> Result<GaussianDensity> {
        let n = self.n();
        let horizon = self.horizon();
        let factor = self.initial_factor()?;
        let (mean, cov) = gauss::propagate_joint(&self.initial_mean, &factor, horizon, |t| {
            (&self.a[t], &self.b[t], &self.c[t], &self.d[t])
        })?;
        let p = self.p();
        let mut keep = Vec::with_capacity(n * (horizon + 2) + p * (horizon + 1));
        for t in 0..horizon + 2 {
            keep.extend((0..n).map(|i| 2 * n * t + i));
        }
        let y_offset = 2 * n * (horizon + 2);
        keep.extend(y_offset..y_offset + p * (horizon + 1));
        let mean = DVector::from_iterator(keep.len(), keep.iter().map(|&i| mean[i]));
        let cov = DMatrix::from_fn(keep.len(), keep.len(), |i, j| cov[(keep[i], keep[j])]);
        GaussianDensity::new(mean, cov)
    }

    /// Reassembles the model from exported parts, checking that the
    /// augmented matrices follow from the nominal model, gains and noise
    /// parameters.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        nominal: StateSpaceModel,
        tolerance: ToleranceSchedule,
        pad: usize,
        gains: Vec<DMatrix<f64>>,
        h: Vec<DMatrix<f64>>,
        kv: Vec<DMatrix<f64>>,
        w_trace: Vec<f64>,
    ) -> Result<Self> {
        let steps = nominal.horizon() + 1;
        if gains.len() != steps || h.len() != steps || kv.len() != steps || w_trace.len() != steps {
            return Err(Error::dim(format!(
                "least-favorable parts cover {}/{}/{}/{} steps, expected {steps}",
                gains.len(),
                h.len(),
                kv.len(),
                w_trace.len()
            )));
        }
        let (n, p, m) = (nominal.n(), nominal.p(), nominal.m());
        let mut noise = Vec::with_capacity(steps);
        for (t, (h, kv)) in h.into_iter().zip(kv).enumerate() {
            if h.shape() != (m, n) || kv.shape() != (m, m) || gains[t].shape() != (n, p) {
                return Err(Error::dim(format!(
                    "step {t}: H {:?}, K̃v {:?}, G {:?} for n={n}, p={p}, m={m}",
                    h.shape(),
                    kv.shape(),
                    gains[t].shape()
                )));
            }
            let kv = gauss::symmetrize(&kv);
            let l =
                gauss::sqrt_factor(&kv).map_err(|_| Error::not_pd(format!("K̃v at step {t}")))?;
            noise.push(NoiseParams { kv, h, l });
        }
        Ok(assemble(nominal, tolerance, pad, gains, noise, w_trace))
    }
}

fn assemble(
    nominal: StateSpaceModel,
    tolerance: ToleranceSchedule,
    pad: usize,
    gains: Vec<DMatrix<f64>>,
    noise: Vec<NoiseParams>,
    w_trace: Vec<f64>,
) -> LeastFavorableModel {
    let n = nominal.n();
    let p = nominal.p();
    let m = nominal.m();
    let steps = gains.len();
    let (mut at, mut bt, mut ct, mut dt) = (
        Vec::with_capacity(steps),
        Vec::with_capacity(steps),
        Vec::with_capacity(steps),
        Vec::with_capacity(steps),
    );
    for (t, (g, np)) in gains.iter().zip(&noise).enumerate() {
        let (a, b, c, d) = (nominal.a(t), nominal.b(t), nominal.c(t), nominal.d(t));
        let (acl, ge) = closed_loop(a, b, c, d, g);
        let mut a_aug = DMatrix::zeros(2 * n, 2 * n);
        a_aug.view_mut((0, 0), (n, n)).copy_from(a);
        a_aug.view_mut((0, n), (n, n)).copy_from(&(b * &np.h));
        a_aug
            .view_mut((n, n), (n, n))
            .copy_from(&(&acl + &ge * &np.h));
        let mut b_aug = DMatrix::zeros(2 * n, m);
        b_aug.view_mut((0, 0), (n, m)).copy_from(&(b * &np.l));
        b_aug.view_mut((n, 0), (n, m)).copy_from(&(&ge * &np.l));
        let mut c_aug = DMatrix::zeros(p, 2 * n);
        c_aug.view_mut((0, 0), (p, n)).copy_from(c);
        c_aug.view_mut((0, n), (p, n)).copy_from(&(d * &np.h));
        at.push(a_aug);
        bt.push(b_aug);
        ct.push(c_aug);
        dt.push(d * &np.l);
    }
    let mut initial_mean = DVector::zeros(2 * n);
    initial_mean.rows_mut(0, n).copy_from(nominal.m0());
    let v0 = nominal.v0();
    let mut initial_cov = DMatrix::zeros(2 * n, 2 * n);
    for (r, c) in [(0, 0), (0, n), (n, 0), (n, n)] {
        initial_cov.view_mut((r, c), (n, n)).copy_from(v0);
    }
    LeastFavorableModel {
        nominal,
        tolerance,
        pad,
        gains,
        noise,
        a: at,
        b: bt,
        c: ct,
        d: dt,
        w_trace,
        initial_mean,
        initial_cov,
    }
}

/// Assembles the augmented model over the full horizon of `design` from a
/// completed sweep.
pub fn build_lf_model(
    model: &StateSpaceModel,
    design: &FilterDesign,
    sweep: &BackwardSweep,
) -> Result<LeastFavorableModel> {
    if sweep.terminal_index() != design.horizon() + 1 || model.horizon() != design.horizon() {
        return Err(Error::dim(format!(
            "sweep to {}, design over {} steps, model over {}",
            sweep.terminal_index(),
            design.horizon() + 1,
            model.horizon() + 1
        )));
    }
    let mut noise = Vec::with_capacity(design.horizon() + 1);
    let mut w_trace = Vec::with_capacity(design.horizon() + 1);
    for t in 0..=design.horizon() {
        let (acl, ge) = closed_loop(
            model.a(t),
            model.b(t),
            model.c(t),
            model.d(t),
            design.gain(t),
        );
        let w_inv = sweep.w_inv(t + 1);
        let np = lf_noise_params_info(w_inv, &acl, &ge).map_err(|e| match e {
            Error::Infeasible { min_eigenvalue, .. } => Error::Infeasible {
                step: t,
                min_eigenvalue,
            },
            other => other,
        })?;
        noise.push(np);
        w_trace.push(match sweep.w(t + 1) {
            Ok(w) => w.trace(),
            Err(_) => f64::INFINITY,
        });
    }
    Ok(assemble(
        model.clone(),
        design.tolerance().clone(),
        sweep.pad(),
        design.gains(),
        noise,
        w_trace,
    ))
}

/// Full construction: robust design over `T + pad` steps, backward sweep,
/// augmented model, and truncation to the first `T + 1` steps.
pub fn construct(
    model: &StateSpaceModel,
    tolerance: &ToleranceSchedule,
    pad: usize,
) -> Result<LeastFavorableModel> {
    tolerance.check_horizon(model.horizon())?;
    let extended = model.extended(pad);
    let ext_tol = tolerance.extended(pad);
    let design = robust_filter::design(&extended, &ext_tol)?;
    let sweep = backward_sweep(&design, &extended, pad)?;
    Ok(build_lf_model(&extended, &design, &sweep)?.truncated(model.horizon()))
}
