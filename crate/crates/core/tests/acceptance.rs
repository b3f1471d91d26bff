//! Acceptance criteria for the reference experiment and the property suite.
//!
//! Runs without the libtest harness so every criterion prints one line,
//! pass or fail, and the process exits nonzero if any criterion fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use robust_kf::evaluate::{self, evaluate_on_lf, evaluate_on_nominal, to_db, Plant};
use robust_kf::gauss::{self, kl_divergence};
use robust_kf::leastfav;
use robust_kf::model::{Schedule, StateSpaceModel, ToleranceSchedule};
use robust_kf::reference;
use robust_kf::robust_filter::{self, FilterDesign, SETTLING_REL_CHANGE, SETTLING_WINDOW};
use robust_kf::static_minimax::{self, StaticProblem, DEFAULT_REL_TOL};

use common::{min_eig, normal_matrix, random_model, random_spd, rel_diff};

const PER_DECADE_DB: f64 = 7.0;
const PER_DECADE_TOL_DB: f64 = 1.5;
const NOMINAL_GAP_MAX_DB: f64 = 1.0;
const LF_GAP_DB: f64 = 8.0;
const LF_GAP_TOL_DB: f64 = 2.0;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome {
            pass,
            detail: detail.into(),
        }
    }
}

fn within_budget(limit: Option<Duration>, elapsed: Duration) -> bool {
    limit.is_none_or(|l| elapsed < l)
}

fn criterion(
    results: &mut Vec<bool>,
    id: &str,
    title: &str,
    limit: Option<Duration>,
    body: impl FnOnce() -> Outcome,
) {
    let start = Instant::now();
    let outcome = body();
    let elapsed = start.elapsed();
    let fast = within_budget(limit, elapsed);
    let pass = outcome.pass && fast;
    let budget = match limit {
        Some(l) if !fast => format!(" [over runtime budget {l:?}]"),
        _ => String::new(),
    };
    println!(
        "{} {id} {title}: {}{budget} ({:.3} s)",
        if pass { "PASS" } else { "FAIL" },
        outcome.detail,
        elapsed.as_secs_f64()
    );
    results.push(pass);
}

fn designs(model: &StateSpaceModel) -> Vec<FilterDesign> {
    reference::TOLERANCES
        .iter()
        .map(|&c| robust_filter::design(model, &ToleranceSchedule::constant(c).unwrap()).unwrap())
        .collect()
}

fn steady_db(design: &FilterDesign) -> Vec<f64> {
    let v = design.v(design.horizon() + 1);
    (0..v.nrows()).map(|i| to_db(v[(i, i)]).unwrap()).collect()
}

fn fmt(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(|x| format!("{x:.3}")).collect();
    format!("[{}]", parts.join(", "))
}

fn tolerance_sweep() -> Outcome {
    let model = reference::model(reference::HORIZON);
    let first = designs(&model);
    let again = designs(&model);
    let deterministic = first
        .iter()
        .zip(&again)
        .all(|(a, b)| (0..=a.horizon() + 1).all(|t| a.v(t) == b.v(t)));

    // TOLERANCES runs 1e-2, 1e-3, 1e-4.
    let db: Vec<Vec<f64>> = first.iter().map(steady_db).collect();
    let mut increases = Vec::new();
    for pair in [(2, 1), (1, 0)] {
        for state in 0..2 {
            increases.push(db[pair.1][state] - db[pair.0][state]);
        }
    }
    let ok = increases
        .iter()
        .all(|d| (d - PER_DECADE_DB).abs() <= PER_DECADE_TOL_DB);
    Outcome::new(
        ok && deterministic,
        format!(
            "increase per decade (x1, x2 for 1e-4→1e-3, then 1e-3→1e-2) = {} dB, target {PER_DECADE_DB} ± {PER_DECADE_TOL_DB}; deterministic = {deterministic}",
            fmt(&increases)
        ),
    )
}

fn nominal_penalty() -> Outcome {
    let model = reference::model(reference::HORIZON);
    let tol = ToleranceSchedule::constant(reference::COMPARISON_TOLERANCE).unwrap();
    let kalman = robust_filter::kalman_design(&model).unwrap();
    let robust = robust_filter::design(&model, &tol).unwrap();
    let k = evaluate_on_nominal(&model, &kalman.gains())
        .unwrap()
        .steady_db()
        .unwrap();
    let r = evaluate_on_nominal(&model, &robust.gains())
        .unwrap()
        .steady_db()
        .unwrap();
    let gaps: Vec<f64> = (r - k).iter().copied().collect();
    let ok = gaps.iter().all(|&g| (0.0..NOMINAL_GAP_MAX_DB).contains(&g));
    Outcome::new(
        ok,
        format!(
            "robust − Kalman = {} dB, required < {NOMINAL_GAP_MAX_DB}",
            fmt(&gaps)
        ),
    )
}

fn least_favorable_advantage() -> Outcome {
    let model = reference::model(reference::HORIZON);
    let tol = ToleranceSchedule::constant(reference::COMPARISON_TOLERANCE).unwrap();
    let kalman = robust_filter::kalman_design(&model).unwrap();
    let robust = robust_filter::design(&model, &tol).unwrap();
    let lf = leastfav::construct(&model, &tol, reference::PAD).unwrap();
    let k = evaluate_on_lf(&lf, &kalman.gains())
        .unwrap()
        .steady_db()
        .unwrap();
    let r = evaluate_on_lf(&lf, &robust.gains())
        .unwrap()
        .steady_db()
        .unwrap();
    let gaps: Vec<f64> = (&k - &r).iter().copied().collect();
    let v: Vec<f64> = steady_db(&robust);
    let versus_v: Vec<f64> = k.iter().zip(&v).map(|(a, b)| a - b).collect();
    let ok = gaps.iter().all(|g| (g - LF_GAP_DB).abs() <= LF_GAP_TOL_DB);
    Outcome::new(
        ok,
        format!(
            "Kalman − robust on the least-favorable model = {} dB, target {LF_GAP_DB} ± {LF_GAP_TOL_DB} \
             (Kalman on that model − robust design V = {} dB)",
            fmt(&gaps),
            fmt(&versus_v)
        ),
    )
}

fn theta_ordering() -> Outcome {
    let model = reference::model(reference::HORIZON);
    let d = designs(&model);
    let thetas: Vec<Vec<f64>> = d.iter().map(FilterDesign::thetas).collect();
    let settled: Vec<bool> = d.iter().map(FilterDesign::theta_settled).collect();
    let window = thetas[0].len() - SETTLING_WINDOW..thetas[0].len();
    let ordered = window
        .clone()
        .all(|t| thetas[0][t] > thetas[1][t] && thetas[1][t] > thetas[2][t]);
    let last: Vec<f64> = thetas.iter().map(|th| th[th.len() - 1]).collect();
    let change: Vec<f64> = thetas
        .iter()
        .map(|th| robust_filter::max_relative_change(th, SETTLING_WINDOW))
        .collect();
    Outcome::new(
        ordered && settled.iter().all(|&s| s),
        format!(
            "final θ for c = 1e-2, 1e-3, 1e-4: {:?}; ordered over the last {SETTLING_WINDOW} steps = {ordered}; \
             relative change over the window = {:?} (limit {SETTLING_REL_CHANGE:e})",
            last.iter().map(|x| format!("{x:.4e}")).collect::<Vec<_>>(),
            change.iter().map(|x| format!("{x:.1e}")).collect::<Vec<_>>(),
        ),
    )
}

fn gamma_and_solver(rng: &mut ChaCha8Rng) -> Outcome {
    let mut worst_residual: f64 = 0.0;
    let mut monotone = true;
    for _ in 0..200 {
        let n = rng.random_range(1..=4);
        let p = random_spd(rng, n, 0.05);
        let r = gauss::spectral_radius(&p).unwrap();
        let l1 = r * (1.0 + rng.random_range(1e-3..2.0));
        let l2 = l1 * (1.0 + rng.random_range(1e-3..2.0));
        monotone &= static_minimax::gamma(l2, &p).unwrap() < static_minimax::gamma(l1, &p).unwrap();
        let c = 10f64.powf(rng.random_range(-8.0..1.0));
        let m = static_minimax::solve_lambda(&p, c, DEFAULT_REL_TOL).unwrap();
        let residual = (static_minimax::gamma(m.lambda(), &p).unwrap() - c).abs() / c.max(1.0);
        worst_residual = worst_residual.max(residual);
    }
    Outcome::new(
        monotone && worst_residual <= DEFAULT_REL_TOL,
        format!("γ decreasing = {monotone}; worst scaled residual {worst_residual:.2e} (limit 1e-12), 200 cases"),
    )
}

fn kalman_degeneration(rng: &mut ChaCha8Rng) -> Outcome {
    let mut worst: f64 = 0.0;
    let mut models = vec![reference::model(reference::HORIZON)];
    models.extend((0..20).map(|_| {
        let n = rng.random_range(1..=3);
        let p = rng.random_range(1..=2);
        random_model(rng, n, p, 30, 1.2)
    }));
    for model in &models {
        let zero = robust_filter::design(model, &ToleranceSchedule::zero()).unwrap();
        let kalman = robust_filter::kalman_design(model).unwrap();
        for (a, b) in zero.gains().iter().zip(kalman.gains()) {
            worst = worst.max((a - b).amax());
        }
    }
    Outcome::new(
        worst <= 1e-12,
        format!("max gain difference {worst:.1e} (limit 1e-12)"),
    )
}

fn inflation() -> Outcome {
    let model = reference::model(reference::HORIZON);
    let mut worst_margin = f64::INFINITY;
    let mut strict = true;
    for &c in &reference::TOLERANCES {
        let d = robust_filter::design(&model, &ToleranceSchedule::constant(c).unwrap()).unwrap();
        for t in 1..=d.horizon() + 1 {
            let diff = d.v(t) - d.p(t);
            worst_margin = worst_margin.min(min_eig(&diff) / d.p(t).amax());
            strict &= d.v(t).trace() > d.p(t).trace();
        }
    }
    let zero = robust_filter::design(&model, &ToleranceSchedule::zero()).unwrap();
    let equal = (1..=zero.horizon() + 1).all(|t| zero.v(t) == zero.p(t));
    Outcome::new(
        worst_margin >= -1e-12 && strict && equal,
        format!(
            "min eig(V − P)/|P| = {worst_margin:.2e}; tr V > tr P whenever c > 0: {strict}; V = P for c = 0: {equal}"
        ),
    )
}

fn noise_inflation_and_reversion() -> Outcome {
    let model = reference::model(reference::HORIZON);
    let tol = ToleranceSchedule::constant(reference::COMPARISON_TOLERANCE).unwrap();
    let lf = leastfav::construct(&model, &tol, reference::PAD).unwrap();
    let n_noise = lf.kv(0).nrows();
    let kv_margin = (0..=lf.horizon())
        .map(|t| min_eig(&(lf.kv(t) - DMatrix::identity(n_noise, n_noise))))
        .fold(f64::INFINITY, f64::min);
    let tiny = ToleranceSchedule::constant(1e-12).unwrap();
    let lf0 = leastfav::construct(&model, &tiny, reference::PAD).unwrap();
    let mut h_max: f64 = 0.0;
    let mut kv_dev: f64 = 0.0;
    for t in 0..=lf0.horizon() {
        h_max = h_max.max(lf0.h(t).norm());
        kv_dev = kv_dev.max((lf0.kv(t) - DMatrix::identity(n_noise, n_noise)).norm());
    }
    Outcome::new(
        kv_margin >= -1e-10 && h_max <= 1e-5 && kv_dev <= 1e-5,
        format!(
            "min eig(K̃v − I) = {kv_margin:.2e} (≥ −1e-10); at c = 1e-12: max ‖H‖ = {h_max:.1e}, max ‖K̃v − I‖ = {kv_dev:.1e} (≤ 1e-5)"
        ),
    )
}

fn sweep_duality(rng: &mut ChaCha8Rng) -> Outcome {
    let mut worst: f64 = 0.0;
    let mut cases = vec![(
        reference::model(reference::HORIZON),
        reference::COMPARISON_TOLERANCE,
        reference::PAD,
    )];
    cases.extend((0..10).map(|_| {
        let n = rng.random_range(1..=2);
        (
            random_model(rng, n, 1, 20, 0.95),
            10f64.powf(rng.random_range(-5.0..-3.0)),
            10,
        )
    }));
    for (model, c, pad) in &cases {
        let tol = ToleranceSchedule::constant(*c).unwrap().extended(*pad);
        let ext = model.extended(*pad);
        let design = robust_filter::design(&ext, &tol).unwrap();
        let sweep = leastfav::backward_sweep(&design, &ext, *pad).unwrap();
        let terminal = sweep.w(sweep.terminal_index()).unwrap();
        let lambda = design.step(design.horizon()).lambda();
        let exact = terminal == DMatrix::identity(model.n(), model.n()) * lambda;
        if !exact {
            return Outcome::new(false, "terminal W differs from λ·I");
        }
        worst = worst.max(sweep.forward_check(&ext, &design).unwrap());
    }
    Outcome::new(
        worst <= 1e-10,
        format!("max relative mismatch of the forward recomputation {worst:.2e} (limit 1e-10), terminal W = λI exactly"),
    )
}

fn lyapunov_riccati(rng: &mut ChaCha8Rng) -> Outcome {
    let mut worst: f64 = 0.0;
    let mut models = vec![reference::model(reference::HORIZON)];
    models.extend((0..10).map(|_| {
        let n = rng.random_range(1..=3);
        random_model(rng, n, 1, 50, 1.1)
    }));
    for model in &models {
        let k = robust_filter::kalman_design(model).unwrap();
        let ev = evaluate_on_nominal(model, &k.gains()).unwrap();
        for t in 1..=model.horizon() + 1 {
            worst = worst.max(rel_diff(ev.covariance(t), k.p(t)));
        }
    }
    Outcome::new(
        worst <= 1e-10,
        format!("max relative difference {worst:.2e} (limit 1e-10)"),
    )
}

fn saddle_point(rng: &mut ChaCha8Rng) -> Outcome {
    let model = reference::model(reference::HORIZON);
    let tol = ToleranceSchedule::constant(reference::COMPARISON_TOLERANCE).unwrap();
    let robust = robust_filter::design(&model, &tol).unwrap();
    let lf = leastfav::construct(&model, &tol, reference::PAD).unwrap();
    let gains = robust.gains();
    let last = lf.horizon() + 1;
    let base = evaluate_on_lf(&lf, &gains).unwrap().error_cov(last).trace();
    let mut best_other = f64::INFINITY;
    for _ in 0..50 {
        let perturbed: Vec<DMatrix<f64>> = gains
            .iter()
            .map(|g| {
                let dir = normal_matrix(rng, g.nrows(), g.ncols());
                let scale = rng.random_range(0.0..0.2) * g.norm() / dir.norm();
                g + dir * scale
            })
            .collect();
        let tr = evaluate_on_lf(&lf, &perturbed)
            .unwrap()
            .error_cov(last)
            .trace();
        best_other = best_other.min(tr);
    }
    Outcome::new(
        base <= best_other,
        format!("robust tr = {base:.6}, best of 50 perturbed = {best_other:.6}"),
    )
}

/// Root of `s − 1 − ln s = b` above or below 1.
fn divergence_root(b: f64, upper: bool) -> f64 {
    let f = |s: f64| s - 1.0 - s.ln() - b;
    let (mut lo, mut hi) = if upper {
        (1.0, 2.0 + 4.0 * b)
    } else {
        (1e-300, 1.0)
    };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == upper {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Brute-force maximum of `½ tr` of the error covariance over perturbations
/// of total divergence `c`: a share `α` of the budget shifts the mean along
/// the top eigenvector of `P`, the rest moves the covariance to
/// `P^{½} U diag(s) Uᵀ P^{½}` with `Σ (s_i − 1 − ln s_i) = 2(1 − α)c`.
fn grid_maximum(p: &DMatrix<f64>, c: f64) -> (f64, DMatrix<f64>) {
    let n = p.nrows();
    assert!(n <= 2);
    let eig = p.clone().symmetric_eigen();
    let half = &eig.eigenvectors
        * DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt))
        * eig.eigenvectors.transpose();
    let r = eig.eigenvalues.max();
    let mut best = (f64::NEG_INFINITY, p.clone());
    let mut consider = |inner: DMatrix<f64>, mean_gain: f64| {
        let cand = &half * inner * &half;
        let value = 0.5 * (cand.trace() + mean_gain);
        if value > best.0 {
            best = (value, cand);
        }
    };
    for ai in 0..=10 {
        let alpha = ai as f64 / 10.0;
        let mean_gain = 2.0 * alpha * c * r;
        let b = 2.0 * (1.0 - alpha) * c;
        if n == 1 {
            for upper in [true, false] {
                consider(
                    DMatrix::from_element(1, 1, divergence_root(b, upper)),
                    mean_gain,
                );
            }
            continue;
        }
        for si in 0..=200 {
            let share = si as f64 / 200.0;
            for (u1, u2) in [(true, true), (true, false), (false, true), (false, false)] {
                let s = DVector::from_vec(vec![
                    divergence_root(share * b, u1),
                    divergence_root((1.0 - share) * b, u2),
                ]);
                for k in 0..180 {
                    let (sn, cs) = (std::f64::consts::PI * k as f64 / 180.0).sin_cos();
                    let u = DMatrix::from_row_slice(2, 2, &[cs, -sn, sn, cs]);
                    consider(&u * DMatrix::from_diagonal(&s) * u.transpose(), mean_gain);
                }
            }
        }
    }
    best
}

fn static_grid(rng: &mut ChaCha8Rng) -> Outcome {
    let mut worst_gap: f64 = 0.0;
    let mut worst_arg: f64 = 0.0;
    let mut above = false;
    for n in [1, 2, 2, 2] {
        let kz = random_spd(rng, n + 1, 0.3);
        let c = 10f64.powf(rng.random_range(-3.0..-1.0));
        let prob = StaticProblem::new(n, DVector::zeros(n + 1), kz, c).unwrap();
        let sol = static_minimax::static_solve(&prob).unwrap();
        let optimum = 0.5 * sol.lf_cov.trace();
        let (grid, arg) = grid_maximum(&sol.nominal_cov, c);
        above |= grid > optimum * (1.0 + 1e-9);
        worst_gap = worst_gap.max((optimum - grid) / optimum);
        worst_arg = worst_arg.max(rel_diff(&arg, &sol.lf_cov));
    }
    Outcome::new(
        !above && worst_gap < 1e-4 && worst_arg < 2e-2,
        format!(
            "grid never beats the solution: {}; relative shortfall {worst_gap:.1e}; argmax distance {worst_arg:.1e}",
            !above
        ),
    )
}

fn chain_rule() -> Outcome {
    let one = |x: f64| DMatrix::from_element(1, 1, x);
    let nominal_b = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
    let nominal_d = DMatrix::from_row_slice(1, 2, &[0.0, 1.0]);
    let perturbed_b = DMatrix::from_row_slice(1, 2, &[1.3, 0.2]);
    let perturbed_d = DMatrix::from_row_slice(1, 2, &[0.1, 0.8]);
    let build = |b0: &DMatrix<f64>, d0: &DMatrix<f64>| {
        StateSpaceModel::new(
            1,
            Schedule::Constant(one(0.8)),
            Schedule::PerStep(vec![b0.clone(), nominal_b.clone()]),
            Schedule::Constant(one(1.0)),
            Schedule::PerStep(vec![d0.clone(), nominal_d.clone()]),
            DVector::zeros(1),
            one(1.0),
        )
        .unwrap()
    };
    let nominal = build(&nominal_b, &nominal_d);
    let perturbed = build(&perturbed_b, &perturbed_d);
    let joint = kl_divergence(
        &gauss::assemble_joint(&perturbed, 1).unwrap(),
        &gauss::assemble_joint(&nominal, 1).unwrap(),
    )
    .unwrap();
    // Conditional law of [x_1; y_0] given x_0 has covariance Γ₀Γ₀ᵀ.
    let stack = |b: &DMatrix<f64>, d: &DMatrix<f64>| {
        let g = DMatrix::from_row_slice(2, 2, &[b[(0, 0)], b[(0, 1)], d[(0, 0)], d[(0, 1)]]);
        &g * g.transpose()
    };
    let k = stack(&nominal_b, &nominal_d);
    let kt = stack(&perturbed_b, &perturbed_d);
    let ratio = k.clone().try_inverse().unwrap() * &kt;
    let single = 0.5 * ((&ratio - DMatrix::identity(2, 2)).trace() - ratio.determinant().ln());
    let diff = (joint - single).abs();
    Outcome::new(
        diff <= 1e-9,
        format!("joint divergence {joint:.12}, single-step {single:.12}, difference {diff:.1e} (limit 1e-9)"),
    )
}

fn monte_carlo() -> Outcome {
    const PATHS: usize = 100_000;
    let model = reference::model(reference::HORIZON);
    let tol = ToleranceSchedule::constant(reference::COMPARISON_TOLERANCE).unwrap();
    let kalman = robust_filter::kalman_design(&model).unwrap().gains();
    let robust = robust_filter::design(&model, &tol).unwrap().gains();
    let lf = leastfav::construct(&model, &tol, reference::PAD).unwrap();
    let cases = [
        ("nominal/Kalman", Plant::Nominal(&model), &kalman, 1u64),
        (
            "least-favorable/Kalman",
            Plant::LeastFavorable(&lf),
            &kalman,
            2,
        ),
        (
            "least-favorable/robust",
            Plant::LeastFavorable(&lf),
            &robust,
            3,
        ),
    ];
    let mut worst_z: f64 = 0.0;
    let mut parts = Vec::new();
    for (label, plant, gains, seed) in cases {
        let exact = plant.evaluate(gains).unwrap();
        let mc = evaluate::simulate(plant, gains, PATHS, seed).unwrap();
        let t = exact.final_index();
        let z: Vec<f64> = (0..model.n())
            .map(|i| (mc.variances(t)[i] - exact.variances(t)[i]) / mc.std_errors[t][i])
            .collect();
        worst_z = z.iter().fold(worst_z, |w, x| w.max(x.abs()));
        parts.push(format!("{label} z = {}", fmt(&z)));
    }
    Outcome::new(
        worst_z < 3.0,
        format!("{} paths at the final step: {}", PATHS, parts.join("; ")),
    )
}

fn main() -> ExitCode {
    let mut results = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_601);
    let second = Some(Duration::from_secs(1));

    criterion(
        &mut results,
        "1",
        "tolerance sweep",
        second,
        tolerance_sweep,
    );
    criterion(
        &mut results,
        "2",
        "nominal-model penalty",
        second,
        nominal_penalty,
    );
    criterion(
        &mut results,
        "3",
        "least-favorable-model advantage",
        Some(Duration::from_secs(2)),
        least_favorable_advantage,
    );
    criterion(
        &mut results,
        "4",
        "θ ordering and settling",
        None,
        theta_ordering,
    );
    criterion(
        &mut results,
        "5a",
        "γ monotone, multiplier residual",
        None,
        || gamma_and_solver(&mut rng),
    );
    criterion(&mut results, "5b", "zero budget is Kalman", None, || {
        kalman_degeneration(&mut rng)
    });
    criterion(
        &mut results,
        "5c",
        "V ⪰ P, equality iff c = 0",
        None,
        inflation,
    );
    criterion(
        &mut results,
        "5d",
        "K̃v ⪰ I, H → 0 as c → 0",
        None,
        noise_inflation_and_reversion,
    );
    criterion(
        &mut results,
        "5e",
        "backward/forward sweep duality",
        None,
        || sweep_duality(&mut rng),
    );
    criterion(
        &mut results,
        "5f",
        "Lyapunov with Kalman gain is Riccati",
        None,
        || lyapunov_riccati(&mut rng),
    );
    criterion(
        &mut results,
        "5g",
        "saddle point on the least-favorable model",
        None,
        || saddle_point(&mut rng),
    );
    criterion(
        &mut results,
        "6a",
        "static maximizer by grid search",
        None,
        || static_grid(&mut rng),
    );
    criterion(
        &mut results,
        "6b",
        "joint assembly and chain rule",
        None,
        chain_rule,
    );
    criterion(
        &mut results,
        "6c",
        "Monte Carlo against Lyapunov",
        None,
        monte_carlo,
    );

    let failed = results.iter().filter(|&&p| !p).count();
    println!(
        "{} of {} criteria passed",
        results.len() - failed,
        results.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
