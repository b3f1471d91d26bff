//! Deterministic rerun of the reference experiments: tolerance sweep,
//! nominal-model comparison and least-favorable-model comparison.
//!
//! Every series is indexed by `t = 0..=T` and carries the quantity after
//! processing `y_t`, i.e. `V_{t+1}` or `Σ_{t+1}`. Steady-state readouts use
//! the last row.

use crate::error::Result;
use crate::evaluate::{evaluate_on_lf, evaluate_on_nominal, to_db, EvaluationResult};
use crate::leastfav::{self, LeastFavorableModel};
use crate::model::{StateSpaceModel, ToleranceSchedule};
use crate::reference;
use crate::robust_filter::{self, FilterDesign};

/// A named, rectangular series ready for CSV output.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub schema: String,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(schema: impl Into<String>, headers: Vec<String>) -> Self {
        Table {
            schema: schema.into(),
            headers,
            rows: Vec::new(),
        }
    }

    pub fn push_numeric(&mut self, t: usize, values: impl IntoIterator<Item = f64>) {
        let mut row = vec![t.to_string()];
        row.extend(values.into_iter().map(format_value));
        self.rows.push(row);
    }

    /// Column `name` parsed back to numbers.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.headers.iter().position(|h| h == name)?;
        Some(
            self.rows
                .iter()
                .map(|r| r[i].parse().unwrap_or(f64::NAN))
                .collect(),
        )
    }
}

/// Shortest round-trip decimal form; `NaN` and `inf` spelled out.
pub fn format_value(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{x}")
    }
}

pub fn tolerance_label(c: f64) -> String {
    format!("{c:e}")
}

/// All designs and evaluations behind the seven figures.
#[derive(Debug, Clone)]
pub struct Reproduction {
    pub horizon: usize,
    pub pad: usize,
    pub tolerances: Vec<f64>,
    pub comparison_tolerance: f64,
    pub model: StateSpaceModel,
    /// One design per entry of `tolerances`.
    pub designs: Vec<FilterDesign>,
    pub kalman: FilterDesign,
    pub robust: FilterDesign,
    pub lf: LeastFavorableModel,
    pub nominal_kalman: EvaluationResult,
    pub nominal_robust: EvaluationResult,
    pub lf_kalman: EvaluationResult,
    pub lf_robust: EvaluationResult,
}

/// Runs the reference experiments with the default horizon and pad.
pub fn run_reference() -> Result<Reproduction> {
    run(
        &reference::model(reference::HORIZON),
        &reference::TOLERANCES,
        reference::COMPARISON_TOLERANCE,
        reference::PAD,
    )
}

pub fn run(
    model: &StateSpaceModel,
    tolerances: &[f64],
    comparison_tolerance: f64,
    pad: usize,
) -> Result<Reproduction> {
    let designs = tolerances
        .iter()
        .map(|&c| robust_filter::design(model, &ToleranceSchedule::constant(c)?))
        .collect::<Result<Vec<_>>>()?;
    let kalman = robust_filter::kalman_design(model)?;
    let comparison = ToleranceSchedule::constant(comparison_tolerance)?;
    let robust = robust_filter::design(model, &comparison)?;
    let lf = leastfav::construct(model, &comparison, pad)?;
    Ok(Reproduction {
        horizon: model.horizon(),
        pad,
        tolerances: tolerances.to_vec(),
        comparison_tolerance,
        model: model.clone(),
        nominal_kalman: evaluate_on_nominal(model, &kalman.gains())?,
        nominal_robust: evaluate_on_nominal(model, &robust.gains())?,
        lf_kalman: evaluate_on_lf(&lf, &kalman.gains())?,
        lf_robust: evaluate_on_lf(&lf, &robust.gains())?,
        designs,
        kalman,
        robust,
        lf,
    })
}

/// Headline numbers, all in dB unless noted. State arrays are `[x1, x2, ...]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    /// Final `diag V` per tolerance, in the order of `tolerances`.
    pub steady_v_db: Vec<Vec<f64>>,
    /// Final `diag V` increase for each tenfold step of the tolerance, for
    /// consecutive pairs sorted by increasing tolerance.
    pub per_decade_db: Vec<Vec<f64>>,
    /// Robust minus Kalman on the nominal model.
    pub nominal_gap_db: Vec<f64>,
    /// Kalman minus robust on the least-favorable model.
    pub lf_gap_db: Vec<f64>,
    /// Kalman on the least-favorable model minus the robust design's `V`.
    pub kalman_lf_vs_v_db: Vec<f64>,
    /// Robust on the least-favorable model minus the robust design's `V`.
    pub robust_lf_vs_v_db: Vec<f64>,
    /// Final `θ` per tolerance (linear).
    pub theta_final: Vec<f64>,
    pub theta_settled: Vec<bool>,
}

fn diff_db(a: &EvaluationResult, b: &EvaluationResult, t: usize) -> Result<Vec<f64>> {
    let (a, b) = (a.variances_db(t)?, b.variances_db(t)?);
    Ok((a - b).iter().copied().collect())
}

impl Reproduction {
    fn last(&self) -> usize {
        self.horizon + 1
    }

    fn v_db(design: &FilterDesign, t: usize) -> Result<Vec<f64>> {
        design.v(t).diagonal().iter().map(|&v| to_db(v)).collect()
    }

    pub fn summary(&self) -> Result<Summary> {
        let last = self.last();
        let steady_v_db = self
            .designs
            .iter()
            .map(|d| Self::v_db(d, last))
            .collect::<Result<Vec<_>>>()?;

        let mut order: Vec<usize> = (0..self.tolerances.len()).collect();
        order.sort_by(|&i, &j| self.tolerances[i].total_cmp(&self.tolerances[j]));
        let per_decade_db = order
            .windows(2)
            .map(|w| {
                let decades = (self.tolerances[w[1]] / self.tolerances[w[0]]).log10();
                steady_v_db[w[1]]
                    .iter()
                    .zip(&steady_v_db[w[0]])
                    .map(|(hi, lo)| (hi - lo) / decades)
                    .collect()
            })
            .collect();

        let v_robust = Self::v_db(&self.robust, last)?;
        let kalman_lf = self.lf_kalman.variances_db(last)?;
        let robust_lf = self.lf_robust.variances_db(last)?;
        Ok(Summary {
            steady_v_db,
            per_decade_db,
            nominal_gap_db: diff_db(&self.nominal_robust, &self.nominal_kalman, last)?,
            lf_gap_db: diff_db(&self.lf_kalman, &self.lf_robust, last)?,
            kalman_lf_vs_v_db: kalman_lf
                .iter()
                .zip(&v_robust)
                .map(|(a, b)| a - b)
                .collect(),
            robust_lf_vs_v_db: robust_lf
                .iter()
                .zip(&v_robust)
                .map(|(a, b)| a - b)
                .collect(),
            theta_final: self
                .designs
                .iter()
                .map(|d| d.step(self.horizon).theta())
                .collect(),
            theta_settled: self
                .designs
                .iter()
                .map(FilterDesign::theta_settled)
                .collect(),
        })
    }

    /// The seven figure series, in figure order.
    pub fn figures(&self) -> Result<Vec<(String, Table)>> {
        let labels: Vec<String> = self
            .tolerances
            .iter()
            .map(|&c| tolerance_label(c))
            .collect();
        let mut out = Vec::with_capacity(7);

        let mut theta = Table::new(
            "theta",
            std::iter::once("t".to_string())
                .chain(labels.iter().map(|l| format!("theta_c{l}")))
                .collect(),
        );
        for t in 0..=self.horizon {
            theta.push_numeric(t, self.designs.iter().map(|d| d.step(t).theta()));
        }
        out.push(("fig1_theta.csv".to_string(), theta));

        for (i, fig) in [(0, 2), (1, 3)] {
            let state = i + 1;
            let mut table = Table::new(
                format!("v{state}{state}_db"),
                std::iter::once("t".to_string())
                    .chain(labels.iter().map(|l| format!("v{state}{state}_db_c{l}")))
                    .collect(),
            );
            for t in 0..=self.horizon {
                let row = self
                    .designs
                    .iter()
                    .map(|d| to_db(d.v(t + 1)[(i, i)]))
                    .collect::<Result<Vec<_>>>()?;
                table.push_numeric(t, row);
            }
            out.push((format!("fig{fig}_v{state}{state}_db.csv"), table));
        }

        let pairs = [
            ("nominal", &self.nominal_kalman, &self.nominal_robust, 4),
            ("lf", &self.lf_kalman, &self.lf_robust, 6),
        ];
        for (plant, kalman, robust, first_fig) in pairs {
            for i in 0..self.model.n().min(2) {
                let state = i + 1;
                let mut table = Table::new(
                    format!("{plant}_x{state}"),
                    vec!["t".into(), "kalman_db".into(), "robust_db".into()],
                );
                for t in 0..=self.horizon {
                    table.push_numeric(
                        t,
                        [
                            to_db(kalman.variances(t + 1)[i])?,
                            to_db(robust.variances(t + 1)[i])?,
                        ],
                    );
                }
                out.push((format!("fig{}_{plant}_x{state}.csv", first_fig + i), table));
            }
        }
        Ok(out)
    }
}

impl Summary {
    /// Long-format table: `metric, tolerance, state, value`.
    pub fn table(&self, tolerances: &[f64], comparison_tolerance: f64) -> Table {
        let mut table = Table::new(
            "summary",
            ["metric", "tolerance", "state", "value"]
                .map(String::from)
                .to_vec(),
        );
        let mut push = |metric: &str, c: Option<f64>, state: Option<usize>, value: String| {
            table.rows.push(vec![
                metric.to_string(),
                c.map(tolerance_label).unwrap_or_default(),
                state.map(|s| format!("x{}", s + 1)).unwrap_or_default(),
                value,
            ]);
        };
        for (c, v) in tolerances.iter().zip(&self.steady_v_db) {
            for (i, x) in v.iter().enumerate() {
                push("steady_v_db", Some(*c), Some(i), format_value(*x));
            }
        }
        let mut sorted = tolerances.to_vec();
        sorted.sort_by(f64::total_cmp);
        for (c, v) in sorted.iter().zip(&self.per_decade_db) {
            for (i, x) in v.iter().enumerate() {
                push(
                    "per_decade_increase_db",
                    Some(*c),
                    Some(i),
                    format_value(*x),
                );
            }
        }
        let comparisons = [
            ("nominal_gap_db", &self.nominal_gap_db),
            ("lf_gap_db", &self.lf_gap_db),
            ("kalman_lf_minus_v_db", &self.kalman_lf_vs_v_db),
            ("robust_lf_minus_v_db", &self.robust_lf_vs_v_db),
        ];
        for (name, values) in comparisons {
            for (i, x) in values.iter().enumerate() {
                push(name, Some(comparison_tolerance), Some(i), format_value(*x));
            }
        }
        for ((c, th), settled) in tolerances
            .iter()
            .zip(&self.theta_final)
            .zip(&self.theta_settled)
        {
            push("theta_final", Some(*c), None, format_value(*th));
            push("theta_settled", Some(*c), None, settled.to_string());
        }
        table
    }
}
