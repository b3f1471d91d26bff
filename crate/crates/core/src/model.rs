//! Nominal Gauss-Markov state-space models.
//!
//! ```text
//! x_{t+1} = A_t x_t + B_t v_t
//!     y_t = C_t x_t + D_t v_t,     v_t ~ N(0, I_m),  x_0 ~ N(m_0, V_0)
//! ```
//!
//! A model is usable when `Γ_t Γ_tᵀ` is positive definite at every step,
//! where `Γ_t = [B_t; D_t]`, so that the transition/observation law of
//! `z_t = [x_{t+1}; y_t]` given `x_t` has a density.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gauss;
use crate::static_minimax::check_tolerance;

/// A per-step sequence that may be stored once and broadcast.
#[derive(Debug, Clone, PartialEq)]
pub enum Schedule<T> {
    Constant(T),
    PerStep(Vec<T>),
}

impl<T: Clone> Schedule<T> {
    pub fn at(&self, t: usize) -> &T {
        match self {
            Schedule::Constant(v) => v,
            Schedule::PerStep(v) => &v[t],
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Schedule::Constant(_))
    }

    fn stored_len(&self) -> Option<usize> {
        match self {
            Schedule::Constant(_) => None,
            Schedule::PerStep(v) => Some(v.len()),
        }
    }

    /// Appends `extra` copies of the final entry.
    pub fn extended(&self, extra: usize) -> Self {
        match self {
            Schedule::Constant(_) => self.clone(),
            Schedule::PerStep(v) => {
                let mut v = v.clone();
                if let Some(last) = v.last().cloned() {
                    v.extend(std::iter::repeat_n(last, extra));
                }
                Schedule::PerStep(v)
            }
        }
    }

    /// Keeps steps `0..=horizon`.
    pub fn truncated(&self, horizon: usize) -> Self {
        match self {
            Schedule::Constant(_) => self.clone(),
            Schedule::PerStep(v) => Schedule::PerStep(v[..=horizon.min(v.len() - 1)].to_vec()),
        }
    }

    fn all(&self) -> Box<dyn Iterator<Item = (usize, &T)> + '_> {
        match self {
            Schedule::Constant(v) => Box::new(std::iter::once((0, v))),
            Schedule::PerStep(v) => Box::new(v.iter().enumerate()),
        }
    }
}

/// One problem found by [`StateSpaceModel::validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    ScheduleLength {
        field: &'static str,
        expected: usize,
        got: usize,
    },
    Shape {
        field: &'static str,
        step: Option<usize>,
        expected: (usize, usize),
        got: (usize, usize),
    },
    NonFinite {
        field: &'static str,
        step: Option<usize>,
    },
    /// `Γ_t Γ_tᵀ` is singular: some combination of state and output is
    /// noise-free at this step.
    NoiseNotPositiveDefinite {
        step: usize,
    },
    InitialCovAsymmetric {
        asymmetry: f64,
    },
    InitialCovNotPositiveDefinite,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let at = |step: &Option<usize>| match step {
            Some(t) => format!(" at step {t}"),
            None => String::new(),
        };
        match self {
            Violation::ScheduleLength {
                field,
                expected,
                got,
            } => write!(
                f,
                "{field}: expected {expected} per-step entries, got {got}"
            ),
            Violation::Shape {
                field,
                step,
                expected,
                got,
            } => write!(
                f,
                "{field}{}: expected {}x{}, got {}x{}",
                at(step),
                expected.0,
                expected.1,
                got.0,
                got.1
            ),
            Violation::NonFinite { field, step } => {
                write!(f, "{field}{}: non-finite entry", at(step))
            }
            Violation::NoiseNotPositiveDefinite { step } => write!(
                f,
                "noise at step {step}: [B; D][B; D]^T is not positive definite"
            ),
            Violation::InitialCovAsymmetric { asymmetry } => {
                write!(f, "V0: not symmetric (max asymmetry {asymmetry:e})")
            }
            Violation::InitialCovNotPositiveDefinite => write!(f, "V0: not positive definite"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidModel(self))
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "  - {v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceModel {
    horizon: usize,
    a: Schedule<DMatrix<f64>>,
    b: Schedule<DMatrix<f64>>,
    c: Schedule<DMatrix<f64>>,
    d: Schedule<DMatrix<f64>>,
    m0: DVector<f64>,
    v0: DMatrix<f64>,
}

impl StateSpaceModel {
    /// Builds and validates a model; any violation is an error.
    pub fn new(
        horizon: usize,
        a: Schedule<DMatrix<f64>>,
        b: Schedule<DMatrix<f64>>,
        c: Schedule<DMatrix<f64>>,
        d: Schedule<DMatrix<f64>>,
        m0: DVector<f64>,
        v0: DMatrix<f64>,
    ) -> Result<Self> {
        let model = Self::unvalidated(horizon, a, b, c, d, m0, v0);
        model.validate().into_result()?;
        Ok(StateSpaceModel {
            v0: gauss::symmetrize(&model.v0),
            ..model
        })
    }

    /// Time-invariant model.
    pub fn constant(
        horizon: usize,
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        d: DMatrix<f64>,
        m0: DVector<f64>,
        v0: DMatrix<f64>,
    ) -> Result<Self> {
        Self::new(
            horizon,
            Schedule::Constant(a),
            Schedule::Constant(b),
            Schedule::Constant(c),
            Schedule::Constant(d),
            m0,
            v0,
        )
    }

    /// Stores the parts as given. Only [`validate`](Self::validate) is safe
    /// to call on the result until the report comes back empty.
    pub fn unvalidated(
        horizon: usize,
        a: Schedule<DMatrix<f64>>,
        b: Schedule<DMatrix<f64>>,
        c: Schedule<DMatrix<f64>>,
        d: Schedule<DMatrix<f64>>,
        m0: DVector<f64>,
        v0: DMatrix<f64>,
    ) -> Self {
        StateSpaceModel {
            horizon,
            a,
            b,
            c,
            d,
            m0,
            v0,
        }
    }

    /// Noise factors with `B Bᵀ = Q`, `D Dᵀ = R`, `B Dᵀ = S` at every step.
    pub fn from_covariances(
        horizon: usize,
        a: Schedule<DMatrix<f64>>,
        c: Schedule<DMatrix<f64>>,
        noise: Schedule<CovarianceSpec>,
        m0: DVector<f64>,
        v0: DMatrix<f64>,
    ) -> Result<Self> {
        let (b, d) = match noise {
            Schedule::Constant(spec) => {
                let (b, d) = spec.factor()?;
                (Schedule::Constant(b), Schedule::Constant(d))
            }
            Schedule::PerStep(specs) => {
                let mut bs = Vec::with_capacity(specs.len());
                let mut ds = Vec::with_capacity(specs.len());
                for (t, spec) in specs.iter().enumerate() {
                    let (b, d) = spec.factor().map_err(|e| match e {
                        Error::NotPositiveDefinite { what } => {
                            Error::not_pd(format!("{what} at step {t}"))
                        }
                        other => other,
                    })?;
                    bs.push(b);
                    ds.push(d);
                }
                (Schedule::PerStep(bs), Schedule::PerStep(ds))
            }
        };
        Self::new(horizon, a, b, c, d, m0, v0)
    }

    pub fn validate(&self) -> ValidationReport {
        let mut out = Vec::new();
        let n = self.v0.nrows();
        let a0 = self.a.at_or_first();
        let b0 = self.b.at_or_first();
        let c0 = self.c.at_or_first();
        let (n_a, m, p) = (a0.nrows(), b0.ncols(), c0.nrows());
        let expected = self.horizon + 1;
        for (field, len) in [
            ("A", self.a.stored_len()),
            ("B", self.b.stored_len()),
            ("C", self.c.stored_len()),
            ("D", self.d.stored_len()),
        ] {
            if let Some(got) = len {
                if got != expected {
                    out.push(Violation::ScheduleLength {
                        field,
                        expected,
                        got,
                    });
                }
            }
        }
        if !out.is_empty() {
            return ValidationReport { violations: out };
        }
        if self.v0.shape() != (n_a, n_a) {
            out.push(Violation::Shape {
                field: "V0",
                step: None,
                expected: (n_a, n_a),
                got: self.v0.shape(),
            });
        }
        if self.m0.len() != n_a {
            out.push(Violation::Shape {
                field: "m0",
                step: None,
                expected: (n_a, 1),
                got: (self.m0.len(), 1),
            });
        }
        let mut shapes_ok = true;
        let checks: [(&'static str, &Schedule<DMatrix<f64>>, (usize, usize)); 4] = [
            ("A", &self.a, (n_a, n_a)),
            ("B", &self.b, (n_a, m)),
            ("C", &self.c, (p, n_a)),
            ("D", &self.d, (p, m)),
        ];
        for (field, sched, shape) in checks {
            for (t, mat) in sched.all() {
                let step = (!sched.is_constant()).then_some(t);
                if mat.shape() != shape {
                    shapes_ok = false;
                    out.push(Violation::Shape {
                        field,
                        step,
                        expected: shape,
                        got: mat.shape(),
                    });
                } else if !mat.iter().all(|v| v.is_finite()) {
                    shapes_ok = false;
                    out.push(Violation::NonFinite { field, step });
                }
            }
        }
        if n == n_a && self.v0.is_square() {
            if !self.v0.iter().all(|v| v.is_finite()) {
                out.push(Violation::NonFinite {
                    field: "V0",
                    step: None,
                });
            } else if !gauss::is_symmetric(&self.v0) {
                out.push(Violation::InitialCovAsymmetric {
                    asymmetry: gauss::max_asymmetry(&self.v0),
                });
            } else if gauss::cholesky(&gauss::symmetrize(&self.v0), "V0").is_err() {
                out.push(Violation::InitialCovNotPositiveDefinite);
            }
        }
        if shapes_ok {
            let steps = if self.b.is_constant() && self.d.is_constant() {
                1
            } else {
                expected
            };
            for t in 0..steps {
                let gamma = stack_rows(self.b.at(t), self.d.at(t));
                let gram = gauss::symmetrize(&(&gamma * gamma.transpose()));
                if gauss::cholesky(&gram, "noise").is_err() {
                    out.push(Violation::NoiseNotPositiveDefinite { step: t });
                }
            }
        }
        ValidationReport { violations: out }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn n(&self) -> usize {
        self.a.at(0).nrows()
    }

    pub fn p(&self) -> usize {
        self.c.at(0).nrows()
    }

    /// Driving-noise dimension.
    pub fn m(&self) -> usize {
        self.b.at(0).ncols()
    }

    pub fn a(&self, t: usize) -> &DMatrix<f64> {
        self.a.at(t)
    }

    pub fn b(&self, t: usize) -> &DMatrix<f64> {
        self.b.at(t)
    }

    pub fn c(&self, t: usize) -> &DMatrix<f64> {
        self.c.at(t)
    }

    pub fn d(&self, t: usize) -> &DMatrix<f64> {
        self.d.at(t)
    }

    pub fn m0(&self) -> &DVector<f64> {
        &self.m0
    }

    pub fn v0(&self) -> &DMatrix<f64> {
        &self.v0
    }

    pub fn schedules(
        &self,
    ) -> (
        &Schedule<DMatrix<f64>>,
        &Schedule<DMatrix<f64>>,
        &Schedule<DMatrix<f64>>,
        &Schedule<DMatrix<f64>>,
    ) {
        (&self.a, &self.b, &self.c, &self.d)
    }

    pub fn is_time_invariant(&self) -> bool {
        self.a.is_constant() && self.b.is_constant() && self.c.is_constant() && self.d.is_constant()
    }

    /// `(Q, R, S) = (BBᵀ, DDᵀ, BDᵀ)` at step `t`.
    pub fn covariance_spec(&self, t: usize) -> CovarianceSpec {
        let (b, d) = (self.b(t), self.d(t));
        CovarianceSpec {
            q: gauss::symmetrize(&(b * b.transpose())),
            r: gauss::symmetrize(&(d * d.transpose())),
            s: b * d.transpose(),
        }
    }

    /// Same model with the final step's matrices repeated `pad` more times.
    pub fn extended(&self, pad: usize) -> Self {
        StateSpaceModel {
            horizon: self.horizon + pad,
            a: self.a.extended(pad),
            b: self.b.extended(pad),
            c: self.c.extended(pad),
            d: self.d.extended(pad),
            m0: self.m0.clone(),
            v0: self.v0.clone(),
        }
    }

    pub fn truncated(&self, horizon: usize) -> Self {
        let horizon = horizon.min(self.horizon);
        StateSpaceModel {
            horizon,
            a: self.a.truncated(horizon),
            b: self.b.truncated(horizon),
            c: self.c.truncated(horizon),
            d: self.d.truncated(horizon),
            m0: self.m0.clone(),
            v0: self.v0.clone(),
        }
    }

    /// Re-targets the horizon of a time-invariant model, or truncates /
    /// pads a time-varying one.
    pub fn with_horizon(&self, horizon: usize) -> Self {
        if horizon <= self.horizon {
            self.truncated(horizon)
        } else {
            self.extended(horizon - self.horizon)
        }
    }

    /// Equivalent model with exactly `n + p` noise channels.
    pub fn normalized(&self) -> Result<Self> {
        let squash = |t: usize| normalize_noise(self.b(t), self.d(t));
        let (b, d) = if self.b.is_constant() && self.d.is_constant() {
            let (b, d) = squash(0)?;
            (Schedule::Constant(b), Schedule::Constant(d))
        } else {
            let (bs, ds): (Vec<_>, Vec<_>) = (0..=self.horizon)
                .map(squash)
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .unzip();
            (Schedule::PerStep(bs), Schedule::PerStep(ds))
        };
        Ok(StateSpaceModel {
            b,
            d,
            ..self.clone()
        })
    }
}

impl<T: Clone> Schedule<T> {
    fn at_or_first(&self) -> &T {
        match self {
            Schedule::Constant(v) => v,
            Schedule::PerStep(v) => &v[0],
        }
    }
}

/// Compresses the columns of `Γ = [B; D]` to a square, invertible
/// `Γ̄ = [B̄; D̄]` with `Γ̄ Γ̄ᵀ = Γ Γᵀ`, via a thin QR factorization of `Γᵀ`.
pub fn normalize_noise(b: &DMatrix<f64>, d: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if b.ncols() != d.ncols() {
        return Err(Error::dim(format!(
            "B has {} noise columns but D has {}",
            b.ncols(),
            d.ncols()
        )));
    }
    let n = b.nrows();
    let k = n + d.nrows();
    if b.ncols() < k {
        return Err(Error::dim(format!(
            "{} noise channels cannot drive {k} states and outputs",
            b.ncols()
        )));
    }
    let gamma = stack_rows(b, d);
    gauss::cholesky(
        &gauss::symmetrize(&(&gamma * gamma.transpose())),
        "[B; D][B; D]^T",
    )?;
    // Γᵀ = Q R  ⇒  Γ = Rᵀ Qᵀ and Γ Γᵀ = Rᵀ R
    let r = gamma.transpose().qr().r();
    let squashed = r.transpose();
    Ok((
        squashed.rows(0, n).into_owned(),
        squashed.rows(n, k - n).into_owned(),
    ))
}

/// Second-order description of the noise at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceSpec {
    /// Process noise covariance `BBᵀ`.
    pub q: DMatrix<f64>,
    /// Measurement noise covariance `DDᵀ`.
    pub r: DMatrix<f64>,
    /// Cross covariance `BDᵀ`.
    pub s: DMatrix<f64>,
}

impl CovarianceSpec {
    pub fn new(q: DMatrix<f64>, r: DMatrix<f64>, s: DMatrix<f64>) -> Result<Self> {
        let spec = CovarianceSpec { q, r, s };
        let (n, p) = (spec.q.nrows(), spec.r.nrows());
        if !spec.q.is_square() || !spec.r.is_square() || spec.s.shape() != (n, p) {
            return Err(Error::dim(format!(
                "Q is {:?}, R is {:?}, S is {:?}",
                spec.q.shape(),
                spec.r.shape(),
                spec.s.shape()
            )));
        }
        gauss::check_symmetric(&spec.q, "Q")?;
        gauss::check_symmetric(&spec.r, "R")?;
        gauss::cholesky(
            &spec.stacked(),
            "stacked noise covariance [[Q, S], [S^T, R]]",
        )?;
        Ok(spec)
    }

    /// Uncorrelated process and measurement noise.
    pub fn uncorrelated(q: DMatrix<f64>, r: DMatrix<f64>) -> Result<Self> {
        let s = DMatrix::zeros(q.nrows(), r.nrows());
        Self::new(q, r, s)
    }

    pub fn stacked(&self) -> DMatrix<f64> {
        let (n, p) = (self.q.nrows(), self.r.nrows());
        let mut k = DMatrix::zeros(n + p, n + p);
        k.view_mut((0, 0), (n, n)).copy_from(&self.q);
        k.view_mut((n, n), (p, p)).copy_from(&self.r);
        k.view_mut((0, n), (n, p)).copy_from(&self.s);
        k.view_mut((n, 0), (p, n)).copy_from(&self.s.transpose());
        gauss::symmetrize(&k)
    }

    /// `(B, D)` with `n + p` columns from the lower Cholesky factor of the
    /// stacked covariance. Uncorrelated noise gets exactly block-diagonal
    /// factors, so `B Dᵀ` is exactly zero.
    pub fn factor(&self) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let (n, p) = (self.q.nrows(), self.r.nrows());
        if self.s.iter().all(|&v| v == 0.0) {
            let lq = gauss::cholesky(&gauss::symmetrize(&self.q), "Q")?.l();
            let lr = gauss::cholesky(&gauss::symmetrize(&self.r), "R")?.l();
            let mut b = DMatrix::zeros(n, n + p);
            b.view_mut((0, 0), (n, n)).copy_from(&lq);
            let mut d = DMatrix::zeros(p, n + p);
            d.view_mut((0, n), (p, p)).copy_from(&lr);
            return Ok((b, d));
        }
        let l = gauss::cholesky(
            &self.stacked(),
            "stacked noise covariance [[Q, S], [S^T, R]]",
        )?
        .l();
        Ok((l.rows(0, n).into_owned(), l.rows(n, p).into_owned()))
    }
}

/// Divergence tolerances `c_t >= 0`, in nats.
#[derive(Debug, Clone, PartialEq)]
pub struct ToleranceSchedule(Schedule<f64>);

impl ToleranceSchedule {
    pub fn constant(c: f64) -> Result<Self> {
        check_tolerance(c)?;
        Ok(ToleranceSchedule(Schedule::Constant(c)))
    }

    pub fn per_step(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Config("empty tolerance schedule".into()));
        }
        for &c in &values {
            check_tolerance(c)?;
        }
        Ok(ToleranceSchedule(Schedule::PerStep(values)))
    }

    /// Zero tolerance everywhere: the nominal (Kalman) design.
    pub fn zero() -> Self {
        ToleranceSchedule(Schedule::Constant(0.0))
    }

    pub fn at(&self, t: usize) -> f64 {
        *self.0.at(t)
    }

    pub fn check_horizon(&self, horizon: usize) -> Result<()> {
        match self.0.stored_len() {
            Some(len) if len != horizon + 1 => Err(Error::dim(format!(
                "tolerance schedule has {len} entries but the horizon needs {}",
                horizon + 1
            ))),
            _ => Ok(()),
        }
    }

    pub fn extended(&self, pad: usize) -> Self {
        ToleranceSchedule(self.0.extended(pad))
    }

    pub fn truncated(&self, horizon: usize) -> Self {
        ToleranceSchedule(self.0.truncated(horizon))
    }

    pub fn schedule(&self) -> &Schedule<f64> {
        &self.0
    }
}

pub(crate) fn stack_rows(top: &DMatrix<f64>, bottom: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(top.nrows() + bottom.nrows(), top.ncols());
    out.rows_mut(0, top.nrows()).copy_from(top);
    out.rows_mut(top.nrows(), bottom.nrows()).copy_from(bottom);
    out
}
