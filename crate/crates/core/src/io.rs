//! Model, tolerance and gain documents in JSON or TOML.
//!
//! A model document has `n`, `p`, `horizon`, the dynamics `A`, `C`, and
//! the noise either as factors `B`, `D` or as covariances `Q`, `R` and
//! optional `S` (zero when absent). `m0` defaults to zeros and `V0` to the
//! identity; `tolerance` is optional. Every matrix may be written as
//!
//! - a scalar, for 1×1 matrices;
//! - a flat row-major array of the expected size;
//! - an array of rows;
//! - an array of `horizon + 1` row arrays, one per step.
//!
//! ```toml
//! n = 1
//! p = 1
//! horizon = 3
//! A = 0.9
//! C = 1.0
//! Q = 1.0
//! R = 0.5
//! tolerance = 1e-3
//! ```
//!
//! Least-favorable models are written in the same schema with dimension
//! `2n`, plus a `least_favorable` table holding the nominal model, the
//! robust gains and the noise statistics they were built from.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::leastfav::LeastFavorableModel;
use crate::model::{CovarianceSpec, Schedule, StateSpaceModel, ToleranceSchedule};

/// Largest relative difference tolerated between exported augmented
/// matrices and those rebuilt from the metadata.
const CONSISTENCY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Toml,
}

impl Format {
    /// TOML for `.toml` files, JSON otherwise.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("toml") => Format::Toml,
            _ => Format::Json,
        }
    }
}

/// A matrix or per-step sequence of matrices as written in a document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixValue {
    Scalar(f64),
    Flat(Vec<f64>),
    Rows(Vec<Vec<f64>>),
    PerStep(Vec<Vec<Vec<f64>>>),
}

impl MatrixValue {
    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        MatrixValue::Rows(rows_of(m))
    }

    pub fn from_schedule(s: &Schedule<DMatrix<f64>>) -> Self {
        match s {
            Schedule::Constant(m) => Self::from_matrix(m),
            Schedule::PerStep(ms) => Self::from_sequence(ms),
        }
    }

    pub fn from_sequence(ms: &[DMatrix<f64>]) -> Self {
        MatrixValue::PerStep(ms.iter().map(rows_of).collect())
    }

    /// Resolves to a schedule of `rows × cols` matrices over `steps` steps.
    /// `cols = None` accepts any column count shared by all steps.
    pub fn resolve(
        &self,
        field: &str,
        rows: usize,
        cols: Option<usize>,
        steps: usize,
    ) -> Result<Schedule<DMatrix<f64>>> {
        match self {
            MatrixValue::PerStep(seq) => {
                if seq.len() != steps {
                    return Err(Error::dim(format!(
                        "{field} has {} steps, expected {steps}",
                        seq.len()
                    )));
                }
                let mut out = Vec::with_capacity(steps);
                let mut width = cols;
                for (t, m) in seq.iter().enumerate() {
                    let m = from_rows(&format!("{field} at step {t}"), m, rows, width)?;
                    width = Some(m.ncols());
                    out.push(m);
                }
                Ok(Schedule::PerStep(out))
            }
            other => Ok(Schedule::Constant(other.matrix(field, rows, cols)?)),
        }
    }

    /// Resolves to a single matrix; per-step values are rejected.
    pub fn matrix(&self, field: &str, rows: usize, cols: Option<usize>) -> Result<DMatrix<f64>> {
        match self {
            MatrixValue::Scalar(x) => {
                if rows == 1 && cols.unwrap_or(1) == 1 {
                    Ok(DMatrix::from_element(1, 1, *x))
                } else {
                    Err(Error::dim(format!(
                        "{field} is a scalar but must be {rows}x{}",
                        show_cols(cols)
                    )))
                }
            }
            MatrixValue::Flat(v) => {
                let cols = match cols {
                    Some(c) => c,
                    None if rows > 0 && v.len() % rows == 0 => v.len() / rows,
                    None => 0,
                };
                if v.len() != rows * cols || v.is_empty() {
                    return Err(Error::dim(format!(
                        "{field} has {} entries, expected {rows}x{}",
                        v.len(),
                        show_cols(Some(cols))
                    )));
                }
                Ok(DMatrix::from_row_slice(rows, cols, v))
            }
            MatrixValue::Rows(r) => from_rows(field, r, rows, cols),
            MatrixValue::PerStep(_) => Err(Error::dim(format!(
                "{field} must be a single matrix, not a per-step sequence"
            ))),
        }
    }

    /// Resolves to a vector of length `len`.
    pub fn vector(&self, field: &str, len: usize) -> Result<DVector<f64>> {
        let m = match self {
            MatrixValue::Rows(r) if r.len() == len && r.iter().all(|row| row.len() == 1) => {
                from_rows(field, r, len, Some(1))?
            }
            other => other
                .matrix(field, 1, Some(len))
                .map_err(|_| Error::dim(format!("{field} must be a vector of length {len}")))?,
        };
        Ok(DVector::from_iterator(len, m.iter().copied()))
    }
}

fn show_cols(cols: Option<usize>) -> String {
    cols.map_or("m".to_string(), |c| c.to_string())
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn from_rows(
    field: &str,
    r: &[Vec<f64>],
    rows: usize,
    cols: Option<usize>,
) -> Result<DMatrix<f64>> {
    let width = r.first().map_or(0, Vec::len);
    let cols = cols.unwrap_or(width);
    if r.len() != rows || r.iter().any(|row| row.len() != cols) || cols == 0 {
        let got_cols = if r.iter().all(|row| row.len() == width) {
            width.to_string()
        } else {
            "ragged".to_string()
        };
        return Err(Error::dim(format!(
            "{field} is {}x{got_cols}, expected {rows}x{cols}",
            r.len()
        )));
    }
    Ok(DMatrix::from_fn(rows, cols, |i, j| r[i][j]))
}

/// Scalar or per-step tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ToleranceValue {
    Constant(f64),
    PerStep(Vec<f64>),
}

impl ToleranceValue {
    pub fn from_schedule(s: &ToleranceSchedule) -> Self {
        match s.schedule() {
            Schedule::Constant(c) => ToleranceValue::Constant(*c),
            Schedule::PerStep(v) => ToleranceValue::PerStep(v.clone()),
        }
    }

    pub fn schedule(&self) -> Result<ToleranceSchedule> {
        match self {
            ToleranceValue::Constant(c) => ToleranceSchedule::constant(*c),
            ToleranceValue::PerStep(v) => ToleranceSchedule::per_step(v.clone()),
        }
    }
}

/// Serialized model document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub n: usize,
    pub p: usize,
    pub horizon: usize,
    #[serde(rename = "A")]
    pub a: MatrixValue,
    #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
    pub b: Option<MatrixValue>,
    #[serde(rename = "C")]
    pub c: MatrixValue,
    #[serde(rename = "D", default, skip_serializing_if = "Option::is_none")]
    pub d: Option<MatrixValue>,
    #[serde(rename = "Q", default, skip_serializing_if = "Option::is_none")]
    pub q: Option<MatrixValue>,
    #[serde(rename = "R", default, skip_serializing_if = "Option::is_none")]
    pub r: Option<MatrixValue>,
    #[serde(rename = "S", default, skip_serializing_if = "Option::is_none")]
    pub s: Option<MatrixValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m0: Option<MatrixValue>,
    #[serde(rename = "V0", default, skip_serializing_if = "Option::is_none")]
    pub v0: Option<MatrixValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<ToleranceValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub least_favorable: Option<Box<LfMetadata>>,
}

/// Provenance of an exported least-favorable model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LfMetadata {
    pub nominal: ModelDocument,
    pub tolerance: ToleranceValue,
    pub pad: usize,
    pub gains: MatrixValue,
    #[serde(rename = "H")]
    pub h: MatrixValue,
    #[serde(rename = "Kv")]
    pub kv: MatrixValue,
    /// `tr W_{t+1}`; `null` where the adversary has no budget (infinite).
    pub w_trace: Vec<Option<f64>>,
}

/// Result of loading a model file.
#[derive(Debug, Clone)]
pub enum LoadedModel {
    Nominal {
        model: StateSpaceModel,
        tolerance: Option<ToleranceSchedule>,
    },
    LeastFavorable(Box<LeastFavorableModel>),
}

impl ModelDocument {
    pub fn parse(text: &str, format: Format) -> Result<Self> {
        match format {
            Format::Json => serde_json::from_str(text)
                .map_err(|e| Error::Config(format!("invalid JSON model: {e}"))),
            Format::Toml => {
                toml::from_str(text).map_err(|e| Error::Config(format!("invalid TOML model: {e}")))
            }
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, Format::from_path(path))
    }

    pub fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Json => serde_json::to_string_pretty(self)
                .map_err(|e| Error::Config(format!("cannot encode model: {e}"))),
            Format::Toml => toml::to_string(self)
                .map_err(|e| Error::Config(format!("cannot encode model: {e}"))),
        }
    }

    /// Builds the nominal model described by the top-level fields.
    pub fn to_model(&self) -> Result<StateSpaceModel> {
        let (n, p, steps) = (self.n, self.p, self.horizon + 1);
        if n == 0 || p == 0 {
            return Err(Error::Config("n and p must be positive".into()));
        }
        let a = self.a.resolve("A", n, Some(n), steps)?;
        let c = self.c.resolve("C", p, Some(n), steps)?;
        let m0 = match &self.m0 {
            Some(v) => v.vector("m0", n)?,
            None => DVector::zeros(n),
        };
        let v0 = match &self.v0 {
            Some(v) => v.matrix("V0", n, Some(n))?,
            None => DMatrix::identity(n, n),
        };
        match (&self.b, &self.d, &self.q, &self.r) {
            (Some(b), Some(d), None, None) if self.s.is_none() => {
                let b = b.resolve("B", n, None, steps)?;
                let m = b.at(0).ncols();
                let d = d.resolve("D", p, Some(m), steps)?;
                StateSpaceModel::new(self.horizon, a, b, c, d, m0, v0)
            }
            (None, None, Some(q), Some(r)) => {
                let q = q.resolve("Q", n, Some(n), steps)?;
                let r = r.resolve("R", p, Some(p), steps)?;
                let s = match &self.s {
                    Some(s) => s.resolve("S", n, Some(p), steps)?,
                    None => Schedule::Constant(DMatrix::zeros(n, p)),
                };
                let spec_at = |t: usize| {
                    CovarianceSpec::new(q.at(t).clone(), r.at(t).clone(), s.at(t).clone())
                };
                let noise = if q.is_constant() && r.is_constant() && s.is_constant() {
                    Schedule::Constant(spec_at(0)?)
                } else {
                    Schedule::PerStep((0..steps).map(spec_at).collect::<Result<Vec<_>>>()?)
                };
                StateSpaceModel::from_covariances(self.horizon, a, c, noise, m0, v0)
            }
            _ => Err(Error::Config(
                "the noise must be given either as B and D or as Q and R (with optional S)".into(),
            )),
        }
    }

    pub fn tolerance_schedule(&self) -> Result<Option<ToleranceSchedule>> {
        self.tolerance
            .as_ref()
            .map(ToleranceValue::schedule)
            .transpose()
    }

    /// Interprets the document, rebuilding least-favorable models from their
    /// metadata and checking them against the exported matrices.
    pub fn load(&self) -> Result<LoadedModel> {
        match &self.least_favorable {
            None => Ok(LoadedModel::Nominal {
                model: self.to_model()?,
                tolerance: self.tolerance_schedule()?,
            }),
            Some(meta) => Ok(LoadedModel::LeastFavorable(Box::new(self.to_lf(meta)?))),
        }
    }

    fn to_lf(&self, meta: &LfMetadata) -> Result<LeastFavorableModel> {
        let nominal = meta.nominal.to_model()?;
        let (n, p, m) = (nominal.n(), nominal.p(), nominal.m());
        let steps = nominal.horizon() + 1;
        if self.n != 2 * n || self.p != p || self.horizon != nominal.horizon() {
            return Err(Error::dim(format!(
                "least-favorable document declares n={}, p={}, horizon={} for a nominal model \
                 with n={n}, p={p}, horizon={}",
                self.n,
                self.p,
                self.horizon,
                nominal.horizon()
            )));
        }
        let per_step = |v: &MatrixValue, field: &str, rows, cols| -> Result<Vec<DMatrix<f64>>> {
            Ok(match v.resolve(field, rows, Some(cols), steps)? {
                Schedule::Constant(x) => vec![x; steps],
                Schedule::PerStep(xs) => xs,
            })
        };
        let gains = per_step(&meta.gains, "gains", n, p)?;
        let h = per_step(&meta.h, "H", m, n)?;
        let kv = per_step(&meta.kv, "Kv", m, m)?;
        let w_trace = meta
            .w_trace
            .iter()
            .map(|w| w.unwrap_or(f64::INFINITY))
            .collect();
        let lf = LeastFavorableModel::from_parts(
            nominal,
            meta.tolerance.schedule()?,
            meta.pad,
            gains,
            h,
            kv,
            w_trace,
        )?;

        let exported = [
            (&self.a, "A", 2 * n, 2 * n),
            (self.b.as_ref().ok_or_else(|| missing("B"))?, "B", 2 * n, m),
            (&self.c, "C", p, 2 * n),
            (self.d.as_ref().ok_or_else(|| missing("D"))?, "D", p, m),
        ];
        for (value, field, rows, cols) in exported {
            let given = per_step(value, field, rows, cols)?;
            for (t, g) in given.iter().enumerate() {
                let rebuilt = match field {
                    "A" => lf.a(t),
                    "B" => lf.b(t),
                    "C" => lf.c(t),
                    _ => lf.d(t),
                };
                let scale = rebuilt.amax().max(1.0);
                if (g - rebuilt).amax() > CONSISTENCY_TOL * scale {
                    return Err(Error::Config(format!(
                        "{field} at step {t} does not match the least-favorable metadata"
                    )));
                }
            }
        }
        Ok(lf)
    }

    /// Document for a nominal model in factor form.
    pub fn from_model(model: &StateSpaceModel, tolerance: Option<&ToleranceSchedule>) -> Self {
        let (a, b, c, d) = model.schedules();
        ModelDocument {
            n: model.n(),
            p: model.p(),
            horizon: model.horizon(),
            a: MatrixValue::from_schedule(a),
            b: Some(MatrixValue::from_schedule(b)),
            c: MatrixValue::from_schedule(c),
            d: Some(MatrixValue::from_schedule(d)),
            q: None,
            r: None,
            s: None,
            m0: Some(MatrixValue::Flat(model.m0().iter().copied().collect())),
            v0: Some(MatrixValue::from_matrix(model.v0())),
            tolerance: tolerance.map(ToleranceValue::from_schedule),
            least_favorable: None,
        }
    }

    /// Document for an augmented least-favorable model.
    pub fn from_lf(lf: &LeastFavorableModel) -> Self {
        let steps = lf.horizon() + 1;
        let collect = |f: &dyn Fn(usize) -> DMatrix<f64>| {
            MatrixValue::from_sequence(&(0..steps).map(f).collect::<Vec<_>>())
        };
        let meta = LfMetadata {
            nominal: Self::from_model(lf.nominal(), None),
            tolerance: ToleranceValue::from_schedule(lf.tolerance()),
            pad: lf.pad(),
            gains: MatrixValue::from_sequence(lf.gains()),
            h: collect(&|t| lf.h(t).clone()),
            kv: collect(&|t| lf.kv(t).clone()),
            w_trace: (0..steps)
                .map(|t| Some(lf.w_trace(t)).filter(|w| w.is_finite()))
                .collect(),
        };
        ModelDocument {
            n: 2 * lf.n(),
            p: lf.p(),
            horizon: lf.horizon(),
            a: collect(&|t| lf.a(t).clone()),
            b: Some(collect(&|t| lf.b(t).clone())),
            c: collect(&|t| lf.c(t).clone()),
            d: Some(collect(&|t| lf.d(t).clone())),
            q: None,
            r: None,
            s: None,
            m0: Some(MatrixValue::Flat(
                lf.initial_mean().iter().copied().collect(),
            )),
            v0: Some(MatrixValue::from_matrix(lf.initial_cov())),
            tolerance: None,
            least_favorable: Some(Box::new(meta)),
        }
    }
}

fn missing(field: &str) -> Error {
    Error::Config(format!("least-favorable document lacks {field}"))
}

/// Gain sequence file: `{ "gains": ... }` with one `n×p` matrix per step or
/// a single matrix for all steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainsDocument {
    pub gains: MatrixValue,
}

impl GainsDocument {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        match Format::from_path(path) {
            Format::Json => serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("invalid JSON gains: {e}"))),
            Format::Toml => {
                toml::from_str(&text).map_err(|e| Error::Config(format!("invalid TOML gains: {e}")))
            }
        }
    }

    pub fn gains(&self, n: usize, p: usize, steps: usize) -> Result<Vec<DMatrix<f64>>> {
        Ok(match self.gains.resolve("gains", n, Some(p), steps)? {
            Schedule::Constant(g) => vec![g; steps],
            Schedule::PerStep(gs) => gs,
        })
    }
}

/// Scalar tolerance or a path to a file holding a number or a JSON array.
pub fn parse_tolerance(arg: &str) -> Result<ToleranceSchedule> {
    if let Ok(c) = arg.trim().parse::<f64>() {
        return ToleranceSchedule::constant(c);
    }
    let text = std::fs::read_to_string(arg).map_err(|e| {
        Error::Config(format!(
            "tolerance {arg:?} is neither a number nor a readable file: {e}"
        ))
    })?;
    let value: ToleranceValue = if let Ok(c) = text.trim().parse::<f64>() {
        ToleranceValue::Constant(c)
    } else if let Ok(v) = serde_json::from_str(&text) {
        v
    } else {
        let values: std::result::Result<Vec<f64>, _> = text
            .split(|ch: char| ch == ',' || ch.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(str::parse)
            .collect();
        ToleranceValue::PerStep(
            values.map_err(|e| Error::Config(format!("invalid tolerance file {arg}: {e}")))?,
        )
    };
    value.schedule()
}
