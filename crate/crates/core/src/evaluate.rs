//! Scoring arbitrary gain sequences against the nominal or least-favorable
//! model.
//!
//! For a predictor `x̂′_{t+1} = A x̂′_t + G′_t (y_t − C x̂′_t)` started at
//! `m₀`, the error covariance obeys a Lyapunov recursion. On the nominal
//! model
//!
//! ```text
//! Σ_{t+1} = (A − G′C) Σ_t (A − G′C)ᵀ + (B − G′D)(B − G′D)ᵀ,   Σ₀ = V₀
//! ```
//!
//! and on the least-favorable model the joint covariance `Π_t` of
//! `(e′_t, e_t)` follows the same form with the augmented matrices. Monte
//! Carlo simulation is provided as an independent cross-check.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::gauss;
use crate::leastfav::LeastFavorableModel;
use crate::model::StateSpaceModel;

/// Power ratio in decibels, `10 log₁₀ x`.
pub fn to_db(x: f64) -> Result<f64> {
    if x > 0.0 && x.is_finite() {
        Ok(10.0 * x.log10())
    } else {
        Err(Error::Config(format!("cannot express {x} in dB")))
    }
}

pub fn from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Error covariance trajectory for `t = 0..=T+1`.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationResult {
    n: usize,
    covariances: Vec<DMatrix<f64>>,
}

impl EvaluationResult {
    /// Last index `T + 1`.
    pub fn final_index(&self) -> usize {
        self.covariances.len() - 1
    }

    /// Full recursion state at `t`: `Σ_t` (n×n) or `Π_t` (2n×2n).
    pub fn covariance(&self, t: usize) -> &DMatrix<f64> {
        &self.covariances[t]
    }

    pub fn covariances(&self) -> &[DMatrix<f64>] {
        &self.covariances
    }

    /// Covariance of the evaluated filter's error `e′_t`.
    pub fn error_cov(&self, t: usize) -> DMatrix<f64> {
        self.covariances[t]
            .view((0, 0), (self.n, self.n))
            .into_owned()
    }

    /// Per-state error variances at `t`.
    pub fn variances(&self, t: usize) -> DVector<f64> {
        self.covariances[t].diagonal().rows(0, self.n).into_owned()
    }

    pub fn variances_db(&self, t: usize) -> Result<DVector<f64>> {
        let v = self.variances(t);
        let db: Result<Vec<f64>> = v.iter().map(|&x| to_db(x)).collect();
        Ok(DVector::from_vec(db?))
    }

    /// Variance of state `i` over `t = 0..=T+1`.
    pub fn series(&self, i: usize) -> Vec<f64> {
        self.covariances.iter().map(|c| c[(i, i)]).collect()
    }

    /// Variances at the final step `T + 1`.
    pub fn steady_variances(&self) -> DVector<f64> {
        self.variances(self.final_index())
    }

    pub fn steady_db(&self) -> Result<DVector<f64>> {
        self.variances_db(self.final_index())
    }
}

fn check_gains(gains: &[DMatrix<f64>], steps: usize, n: usize, p: usize) -> Result<()> {
    if gains.len() != steps {
        return Err(Error::dim(format!(
            "{} gains supplied for {steps} steps",
            gains.len()
        )));
    }
    for (t, g) in gains.iter().enumerate() {
        if g.shape() != (n, p) {
            return Err(Error::dim(format!(
                "gain at step {t} is {:?}, expected ({n}, {p})",
                g.shape()
            )));
        }
    }
    Ok(())
}

/// Lyapunov recursion of the error of `gains` on the nominal model.
pub fn evaluate_on_nominal(
    model: &StateSpaceModel,
    gains: &[DMatrix<f64>],
) -> Result<EvaluationResult> {
    check_gains(gains, model.horizon() + 1, model.n(), model.p())?;
    let mut covariances = Vec::with_capacity(gains.len() + 1);
    let mut sigma = model.v0().clone();
    for (t, g) in gains.iter().enumerate() {
        let f = model.a(t) - g * model.c(t);
        let e = model.b(t) - g * model.d(t);
        let next = gauss::symmetrize(&(&f * &sigma * f.transpose() + &e * e.transpose()));
        covariances.push(std::mem::replace(&mut sigma, next));
    }
    covariances.push(sigma);
    Ok(EvaluationResult {
        n: model.n(),
        covariances,
    })
}

/// Lyapunov recursion of `(e′, e)` on the least-favorable model, starting
/// from its own initial covariance `[[V₀, V₀], [V₀, V₀]]`.
pub fn evaluate_on_lf(
    lf: &LeastFavorableModel,
    gains: &[DMatrix<f64>],
) -> Result<EvaluationResult> {
    evaluate_on_lf_from(lf, gains, lf.initial_cov())
}

/// As [`evaluate_on_lf`] with an explicit `Π₀`, for filters not started at
/// `m₀`.
pub fn evaluate_on_lf_from(
    lf: &LeastFavorableModel,
    gains: &[DMatrix<f64>],
    pi0: &DMatrix<f64>,
) -> Result<EvaluationResult> {
    let n = lf.n();
    check_gains(gains, lf.horizon() + 1, n, lf.p())?;
    if pi0.shape() != (2 * n, 2 * n) {
        return Err(Error::dim(format!(
            "initial covariance is {:?}, expected ({s}, {s})",
            pi0.shape(),
            s = 2 * n
        )));
    }
    let mut covariances = Vec::with_capacity(gains.len() + 1);
    let mut pi = gauss::symmetrize(pi0);
    for (t, g) in gains.iter().enumerate() {
        let mut f = lf.a(t).clone();
        let mut e = lf.b(t).clone();
        {
            let mut top = f.rows_mut(0, n);
            top -= g * lf.c(t);
        }
        {
            let mut top = e.rows_mut(0, n);
            top -= g * lf.d(t);
        }
        let next = gauss::symmetrize(&(&f * &pi * f.transpose() + &e * e.transpose()));
        covariances.push(std::mem::replace(&mut pi, next));
    }
    covariances.push(pi);
    Ok(EvaluationResult { n, covariances })
}

/// Data-generating system for scoring and simulation.
#[derive(Debug, Clone, Copy)]
pub enum Plant<'a> {
    Nominal(&'a StateSpaceModel),
    LeastFavorable(&'a LeastFavorableModel),
}

impl<'a> Plant<'a> {
    pub fn nominal(&self) -> &'a StateSpaceModel {
        match self {
            Plant::Nominal(m) => m,
            Plant::LeastFavorable(lf) => lf.nominal(),
        }
    }

    pub fn horizon(&self) -> usize {
        self.nominal().horizon()
    }

    pub fn evaluate(&self, gains: &[DMatrix<f64>]) -> Result<EvaluationResult> {
        match self {
            Plant::Nominal(m) => evaluate_on_nominal(m, gains),
            Plant::LeastFavorable(lf) => evaluate_on_lf(lf, gains),
        }
    }

    fn system(&self, t: usize) -> [&'a DMatrix<f64>; 4] {
        match self {
            Plant::Nominal(m) => [m.a(t), m.b(t), m.c(t), m.d(t)],
            Plant::LeastFavorable(lf) => [lf.a(t), lf.b(t), lf.c(t), lf.d(t)],
        }
    }

    fn initial(&self) -> Result<(DVector<f64>, DMatrix<f64>)> {
        match self {
            Plant::Nominal(m) => Ok((m.m0().clone(), gauss::sqrt_factor(m.v0())?)),
            Plant::LeastFavorable(lf) => Ok((lf.initial_mean().clone(), lf.initial_factor()?)),
        }
    }
}

/// One simulated path: `x_0..x_{T+1}`, `y_0..y_T`, `e′_0..e′_{T+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<DVector<f64>>,
    pub observations: Vec<DVector<f64>>,
    pub errors: Vec<DVector<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryBatch {
    pub seed: u64,
    pub paths: Vec<Trajectory>,
}

/// Empirical error statistics over many paths, for `t = 0..=T+1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSummary {
    pub seed: u64,
    pub paths: usize,
    /// Sample second moments `E[e′ e′ᵀ]`.
    pub second_moments: Vec<DMatrix<f64>>,
    /// Standard errors of the diagonal of `second_moments`; NaN for a single
    /// path.
    pub std_errors: Vec<DVector<f64>>,
}

impl SimulationSummary {
    pub fn variances(&self, t: usize) -> DVector<f64> {
        self.second_moments[t].diagonal()
    }
}

/// Per-path generator: stream `path` of a ChaCha8 generator seeded with
/// `seed`, so any path can be regenerated on its own.
pub fn path_rng(seed: u64, path: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng
}

struct Simulator<'a> {
    plant: Plant<'a>,
    gains: &'a [DMatrix<f64>],
    mean0: DVector<f64>,
    factor0: DMatrix<f64>,
    xi: DVector<f64>,
    xi_next: DVector<f64>,
    x_hat: DVector<f64>,
    x_hat_next: DVector<f64>,
    y: DVector<f64>,
    innovation: DVector<f64>,
    eps: DVector<f64>,
    z0: DVector<f64>,
    error: DVector<f64>,
}

impl<'a> Simulator<'a> {
    fn new(plant: Plant<'a>, gains: &'a [DMatrix<f64>]) -> Result<Self> {
        let nominal = plant.nominal();
        check_gains(gains, nominal.horizon() + 1, nominal.n(), nominal.p())?;
        let (mean0, factor0) = plant.initial()?;
        let s = mean0.len();
        let (n, p, m) = (nominal.n(), nominal.p(), nominal.m());
        Ok(Simulator {
            plant,
            gains,
            z0: DVector::zeros(factor0.ncols()),
            mean0,
            factor0,
            xi: DVector::zeros(s),
            xi_next: DVector::zeros(s),
            x_hat: DVector::zeros(n),
            x_hat_next: DVector::zeros(n),
            y: DVector::zeros(p),
            innovation: DVector::zeros(p),
            eps: DVector::zeros(m),
            error: DVector::zeros(n),
        })
    }

    /// Runs one path, calling `observe(t, x_t, y_t, e′_t)`; `y` is `None`
    /// at `t = T + 1`.
    fn run<F>(&mut self, rng: &mut ChaCha8Rng, mut observe: F)
    where
        F: FnMut(usize, &DVector<f64>, Option<&DVector<f64>>, &DVector<f64>),
    {
        let nominal = self.plant.nominal();
        let n = nominal.n();
        for z in self.z0.iter_mut() {
            *z = rng.sample(StandardNormal);
        }
        self.xi.copy_from(&self.mean0);
        self.xi.gemv(1.0, &self.factor0, &self.z0, 1.0);
        self.x_hat.copy_from(nominal.m0());
        for (t, g) in self.gains.iter().enumerate() {
            let [a, b, c, d] = self.plant.system(t);
            for e in self.eps.iter_mut() {
                *e = rng.sample(StandardNormal);
            }
            self.y.gemv(1.0, c, &self.xi, 0.0);
            self.y.gemv(1.0, d, &self.eps, 1.0);

            self.error.copy_from(&self.xi.rows(0, n));
            self.error -= &self.x_hat;
            observe(t, &self.xi, Some(&self.y), &self.error);

            self.xi_next.gemv(1.0, a, &self.xi, 0.0);
            self.xi_next.gemv(1.0, b, &self.eps, 1.0);
            std::mem::swap(&mut self.xi, &mut self.xi_next);

            self.innovation.copy_from(&self.y);
            self.innovation.gemv(-1.0, nominal.c(t), &self.x_hat, 1.0);
            self.x_hat_next.gemv(1.0, nominal.a(t), &self.x_hat, 0.0);
            self.x_hat_next.gemv(1.0, g, &self.innovation, 1.0);
            std::mem::swap(&mut self.x_hat, &mut self.x_hat_next);
        }
        self.error.copy_from(&self.xi.rows(0, n));
        self.error -= &self.x_hat;
        observe(self.gains.len(), &self.xi, None, &self.error);
    }
}

/// Simulates `paths` trajectories and keeps them all.
pub fn simulate_paths(
    plant: Plant<'_>,
    gains: &[DMatrix<f64>],
    paths: usize,
    seed: u64,
) -> Result<TrajectoryBatch> {
    check_paths(paths)?;
    let n = plant.nominal().n();
    let mut sim = Simulator::new(plant, gains)?;
    let mut out = Vec::with_capacity(paths);
    for path in 0..paths {
        let mut rng = path_rng(seed, path as u64);
        let mut traj = Trajectory {
            states: Vec::with_capacity(gains.len() + 1),
            observations: Vec::with_capacity(gains.len()),
            errors: Vec::with_capacity(gains.len() + 1),
        };
        sim.run(&mut rng, |_, xi, y, e| {
            traj.states.push(xi.rows(0, n).into_owned());
            if let Some(y) = y {
                traj.observations.push(y.clone());
            }
            traj.errors.push(e.clone());
        });
        out.push(traj);
    }
    Ok(TrajectoryBatch { seed, paths: out })
}

/// Streams `paths` trajectories, accumulating error second moments and the
/// standard errors of their diagonals.
pub fn simulate(
    plant: Plant<'_>,
    gains: &[DMatrix<f64>],
    paths: usize,
    seed: u64,
) -> Result<SimulationSummary> {
    check_paths(paths)?;
    let n = plant.nominal().n();
    let steps = gains.len() + 1;
    let mut sim = Simulator::new(plant, gains)?;
    let mut second = vec![DMatrix::<f64>::zeros(n, n); steps];
    let mut fourth = vec![DVector::<f64>::zeros(n); steps];
    for path in 0..paths {
        let mut rng = path_rng(seed, path as u64);
        sim.run(&mut rng, |t, _, _, e| {
            second[t].ger(1.0, e, e, 1.0);
            for (f, &x) in fourth[t].iter_mut().zip(e.iter()) {
                *f += x.powi(4);
            }
        });
    }
    let count = paths as f64;
    let mut std_errors = Vec::with_capacity(steps);
    for (m2, m4) in second.iter_mut().zip(&fourth) {
        *m2 /= count;
        let se = DVector::from_fn(n, |i, _| {
            if paths < 2 {
                f64::NAN
            } else {
                let mean_sq = m2[(i, i)];
                ((m4[i] / count - mean_sq * mean_sq).max(0.0) / count).sqrt()
            }
        });
        std_errors.push(se);
    }
    Ok(SimulationSummary {
        seed,
        paths,
        second_moments: second,
        std_errors,
    })
}

fn check_paths(paths: usize) -> Result<()> {
    if paths == 0 {
        Err(Error::Config("at least one path is required".into()))
    } else {
        Ok(())
    }
}
