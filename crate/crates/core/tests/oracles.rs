//! Independent cross-checks that need more machinery than a unit test:
//! sampling oracles, alternative formulations and measured diagnostics.

mod common;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use robust_kf::evaluate::evaluate_on_lf;
use robust_kf::gauss::{self, kl_divergence};
use robust_kf::leastfav::{self, LeastFavorableModel};
use robust_kf::model::{Schedule, StateSpaceModel, ToleranceSchedule};
use robust_kf::reference;
use robust_kf::robust_filter;
use robust_kf::static_minimax::{self, StaticProblem};

use common::{random_model, random_spd, rel_diff};

#[test]
fn spectral_radius_matches_power_iteration() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let m = common::normal_matrix(&mut rng, 4, 4);
        let s = (&m + m.transpose()) * 0.5;
        // Shift makes the top eigenvalue dominant in magnitude.
        let shift = s.amax() * 4.0 + 1.0;
        let shifted = &s + DMatrix::identity(4, 4) * shift;
        let mut x = DVector::from_element(4, 1.0);
        let mut estimate = 0.0;
        for _ in 0..20_000 {
            let y = &shifted * &x;
            estimate = x.dot(&y) / x.dot(&x);
            x = &y / y.norm();
        }
        let top = estimate - shift;
        let bottom = {
            let neg = -&s + DMatrix::identity(4, 4) * shift;
            let mut x = DVector::from_element(4, 1.0);
            let mut est = 0.0;
            for _ in 0..20_000 {
                let y = &neg * &x;
                est = x.dot(&y) / x.dot(&x);
                x = &y / y.norm();
            }
            shift - est
        };
        let expected = top.abs().max(bottom.abs());
        let psd = &s * s.transpose();
        let r = gauss::spectral_radius(&psd).unwrap();
        assert!(
            (r - expected * expected).abs() <= 1e-10 * r.max(1.0),
            "{r} vs {}",
            expected * expected
        );
    }
}

#[test]
fn joint_matches_sampled_covariance() {
    // x_{t+1} = 0.9 x_t + v₁, y_t = x_t + 0.5 v₂ over two steps.
    let one = |x: f64| DMatrix::from_element(1, 1, x);
    let b = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
    let d = DMatrix::from_row_slice(1, 2, &[0.0, 0.5]);
    let model = StateSpaceModel::constant(
        1,
        one(0.9),
        b,
        one(1.0),
        d,
        DVector::from_element(1, 0.3),
        one(2.0),
    )
    .unwrap();
    let joint = gauss::assemble_joint(&model, 1).unwrap();
    assert_eq!(joint.dim(), 5);

    const PATHS: usize = 1_000_000;
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut sum = DVector::<f64>::zeros(5);
    let mut second = DMatrix::<f64>::zeros(5, 5);
    let mut fourth = DMatrix::<f64>::zeros(5, 5);
    let mut z = DVector::<f64>::zeros(5);
    for _ in 0..PATHS {
        let x0 = 0.3 + 2f64.sqrt() * rng.sample::<f64, _>(StandardNormal);
        let y0 = x0 + 0.5 * rng.sample::<f64, _>(StandardNormal);
        let x1 = 0.9 * x0 + rng.sample::<f64, _>(StandardNormal);
        let y1 = x1 + 0.5 * rng.sample::<f64, _>(StandardNormal);
        let x2 = 0.9 * x1 + rng.sample::<f64, _>(StandardNormal);
        z.copy_from_slice(&[x0, x1, x2, y0, y1]);
        sum += &z;
        for i in 0..5 {
            for j in 0..5 {
                let p = z[i] * z[j];
                second[(i, j)] += p;
                fourth[(i, j)] += p * p;
            }
        }
    }
    let count = PATHS as f64;
    let mean = sum / count;
    for i in 0..5 {
        let se = (2.0 / count).sqrt() * joint.cov()[(i, i)].sqrt();
        assert!(
            (mean[i] - joint.mean()[i]).abs() < 3.0 * se.max(1e-3),
            "mean {i}"
        );
        for j in 0..5 {
            let m2 = second[(i, j)] / count;
            let m4 = fourth[(i, j)] / count;
            let se = ((m4 - m2 * m2) / count).sqrt();
            let exact = joint.cov()[(i, j)] + joint.mean()[i] * joint.mean()[j];
            let z = (m2 - exact) / se;
            assert!(z.abs() < 3.0, "entry ({i}, {j}): z = {z}");
        }
    }
}

/// Covariance of `[x_{t+1}; y_t]` given the past when `x_t` has error
/// covariance `V`.
fn pseudo_nominal(model: &StateSpaceModel, t: usize, v: &DMatrix<f64>) -> DMatrix<f64> {
    let n = model.n();
    let p = model.p();
    let mut stacked = DMatrix::zeros(n + p, n);
    stacked.rows_mut(0, n).copy_from(model.a(t));
    stacked.rows_mut(n, p).copy_from(model.c(t));
    let mut noise = DMatrix::zeros(n + p, model.m());
    noise.rows_mut(0, n).copy_from(model.b(t));
    noise.rows_mut(n, p).copy_from(model.d(t));
    &stacked * v * stacked.transpose() + &noise * noise.transpose()
}

#[test]
fn design_step_is_static_problem_on_pseudo_nominal() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut cases = vec![(reference::model(30), 1e-4)];
    for _ in 0..10 {
        let n = rng.random_range(1..=3);
        let p = rng.random_range(1..=2);
        cases.push((
            random_model(&mut rng, n, p, 10, 1.2),
            10f64.powf(rng.random_range(-4.0..-1.0)),
        ));
    }
    for (model, c) in cases {
        let design =
            robust_filter::design(&model, &ToleranceSchedule::constant(c).unwrap()).unwrap();
        for t in 0..=model.horizon() {
            let kz = pseudo_nominal(&model, t, design.v(t));
            let dim = kz.nrows();
            let prob = StaticProblem::new(model.n(), DVector::zeros(dim), kz, c).unwrap();
            let sol = static_minimax::static_solve(&prob).unwrap();
            let step = design.step(t);
            assert!(rel_diff(&sol.gain, &step.gain) <= 1e-10, "gain at t = {t}");
            assert!(
                rel_diff(&sol.nominal_cov, &step.p_next) <= 1e-10,
                "P at t = {t}"
            );
            assert!(rel_diff(&sol.lf_cov, &step.v_next) <= 1e-9, "V at t = {t}");
        }
    }
}

#[test]
fn theta_varies_during_transient() {
    let model = reference::model(reference::HORIZON);
    for &c in &reference::TOLERANCES {
        let d = robust_filter::design(&model, &ToleranceSchedule::constant(c).unwrap()).unwrap();
        let thetas = d.thetas();
        let last = thetas[thetas.len() - 1];
        let spread = thetas[..10]
            .iter()
            .map(|th| (th - last).abs())
            .fold(0.0, f64::max);
        assert!(spread > 1e-8, "c = {c}: spread {spread:e}");
    }
}

fn diagnostics(lf: &LeastFavorableModel) -> Vec<[f64; 3]> {
    (0..=lf.horizon())
        .map(|t| {
            [
                lf.h(t).norm(),
                lf.kv(t).clone().symmetric_eigenvalues().min(),
                lf.w_trace(t),
            ]
        })
        .collect()
}

fn max_rel(a: &[[f64; 3]], b: &[[f64; 3]]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| ((p - q) / q).abs()))
        .fold(0.0, f64::max)
}

#[test]
fn pad_sensitivity_measured() {
    // Recorded, not asserted: on the reference model the retained window keeps
    // moving as the pad doubles. Only the gains are pad independent.
    let model = reference::model(reference::HORIZON);
    let tol = ToleranceSchedule::constant(reference::COMPARISON_TOLERANCE).unwrap();
    let pads = [0, 150, 300, 600, 1200, 2400];
    let lfs: Vec<_> = pads
        .iter()
        .map(|&pad| leastfav::construct(&model, &tol, pad).unwrap())
        .collect();
    let diags: Vec<_> = lfs.iter().map(diagnostics).collect();
    let steps: Vec<String> = diags
        .windows(2)
        .zip(pads.windows(2))
        .map(|(d, p)| format!("{}→{}: {:.3e}", p[0], p[1], max_rel(&d[0], &d[1])))
        .collect();
    println!(
        "largest relative change of the diagnostics: {}",
        steps.join(", ")
    );
    for lf in &lfs[1..] {
        assert_eq!(lf.gains(), lfs[0].gains());
    }
}

#[test]
fn least_favorable_joint_divergence_measured() {
    // Recorded, not asserted: how the divergence of the constructed model from
    // the nominal one compares with the summed per-step budget.
    for horizon in 0..=3 {
        let model = reference::model(horizon);
        for c in [1e-4, 1e-2] {
            let tol = ToleranceSchedule::constant(c).unwrap();
            let lf = leastfav::construct(&model, &tol, 0).unwrap();
            let kl = kl_divergence(
                &lf.joint().unwrap(),
                &gauss::assemble_joint(&model, horizon).unwrap(),
            )
            .unwrap();
            let budget = c * (horizon + 1) as f64;
            println!("T = {horizon}, c = {c:e}: joint divergence {kl:.4e}, budget {budget:.4e}, ratio {:.3}", kl / budget);
            assert!(kl > 0.0);
        }
    }
}

#[test]
fn robust_error_block_against_v_measured() {
    // Recorded, not asserted: the robust filter's error variance on its own
    // least-favorable model relative to the design's V.
    let model = reference::model(reference::HORIZON);
    let tol = ToleranceSchedule::constant(reference::COMPARISON_TOLERANCE).unwrap();
    let design = robust_filter::design(&model, &tol).unwrap();
    for pad in [0, reference::PAD] {
        let lf = leastfav::construct(&model, &tol, pad).unwrap();
        let ev = evaluate_on_lf(&lf, &design.gains()).unwrap();
        let ratios: Vec<String> = [1, 10, 100, 200, 201]
            .iter()
            .map(|&t| {
                format!(
                    "t={t}: {:.3}",
                    ev.error_cov(t)[(0, 0)] / design.v(t)[(0, 0)]
                )
            })
            .collect();
        println!("pad {pad}, e-block (1,1) / V (1,1): {}", ratios.join(", "));
        assert!(ev.error_cov(201).trace() > 0.0);
    }
}

#[test]
fn from_covariances_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..20 {
        let (n, p) = (rng.random_range(1..=3), rng.random_range(1..=2));
        let stacked = random_spd(&mut rng, n + p, 0.2);
        let q = stacked.view((0, 0), (n, n)).into_owned();
        let s = stacked.view((0, n), (n, p)).into_owned();
        let r = stacked.view((n, n), (p, p)).into_owned();
        let spec = robust_kf::model::CovarianceSpec::new(q.clone(), r.clone(), s.clone()).unwrap();
        let model = StateSpaceModel::from_covariances(
            4,
            Schedule::Constant(DMatrix::identity(n, n) * 0.5),
            Schedule::Constant(DMatrix::from_element(p, n, 1.0)),
            Schedule::Constant(spec),
            DVector::zeros(n),
            DMatrix::identity(n, n),
        )
        .unwrap();
        assert!(model.validate().is_empty());
        let back = model.covariance_spec(2);
        assert!(rel_diff(&back.q, &q) <= 1e-12);
        assert!(rel_diff(&back.r, &r) <= 1e-12);
        assert!((&back.s - &s).amax() <= 1e-12 * stacked.amax());
    }
}
