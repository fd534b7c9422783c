use nalgebra::DMatrix;
use pimaw_core::design::ControllerDesign;
use pimaw_core::exosystem::companion_realization;
use pimaw_core::par::Exec;
use pimaw_core::problem::QuadraticProblem;
use pimaw_core::signal::SignalSource;
use pimaw_core::sim::*;
use pimaw_core::synthesis::{design_controller, SynthesisConfig};

const SIN: [f64; 4] = [1.0, 0.0, 0.0625, 0.0];

fn design(coeffs: &[f64], lmin: f64, lmax: f64) -> ControllerDesign {
    let model = companion_realization(coeffs).unwrap();
    design_controller(&model, lmin, lmax, 10.0, &SynthesisConfig::default()).unwrap()
}

fn sinusoid_scenario(n: usize, seed: u64, t_end: f64) -> Scenario {
    let prob = QuadraticProblem::random(n, 1.0, 10.0, seed).unwrap();
    let src = SignalSource::sinusoid_seeded(n, 0.25, seed + 100).unwrap();
    Scenario::new(prob, src, Some(design(&SIN, 1.0, 10.0)), t_end, 1e-3)
}

#[test]
fn unconstrained_loop_zeroes_the_gradient() {
    let sc = sinusoid_scenario(6, 3, 30.0);
    let tr = simulate_unconstrained_im(&sc).unwrap();
    let g = tr.gradient_norm(&sc.prob);
    // slowest certified pole has real part below -0.5
    let settled: Vec<f64> = tr.t.iter().zip(&g).filter(|(t, _)| **t >= 20.0).map(|(_, g)| *g).collect();
    assert!(settled.iter().all(|&g| g <= 1e-6), "max {}", settled.iter().copied().fold(0.0, f64::max));
}

#[test]
fn equal_curvatures_give_identical_channels() {
    let n = 3;
    let prob = QuadraticProblem::new(DMatrix::identity(n, n) * 2.0, 2.0, 2.0).unwrap();
    let src = SignalSource::sinusoid(vec![-1.0; n], 0.25, vec![0.0; n], vec![-1.0, -1.0, -1.0]).unwrap();
    let sc = Scenario::new(prob, src, Some(design(&SIN, 2.0, 2.0)), 10.0, 1e-3);
    let tr = simulate_unconstrained_im(&sc).unwrap();
    for x in &tr.x {
        assert_eq!(x[0], x[1]);
        assert_eq!(x[1], x[2]);
    }
}

#[test]
fn decoupled_loop_reproduces_coupled_loop() {
    let sc = sinusoid_scenario(5, 8, 45.0);
    let a = simulate_pimaw(&sc, None).unwrap();
    let b = simulate_decoupled(&sc, None).unwrap();
    let dev = a.x.iter().zip(&b.x).map(|(x, y)| (x - y).amax()).fold(0.0, f64::max);
    assert!(dev <= 5e-7, "{dev}");
}

#[test]
fn halving_the_step_barely_moves_the_trajectory() {
    let mut sc = sinusoid_scenario(4, 5, 20.0);
    let coarse = simulate_pimaw(&sc, None).unwrap();
    sc.dt = 5e-4;
    sc.decimation = 20;
    let fine = simulate_pimaw(&sc, None).unwrap();
    assert_eq!(coarse.len(), fine.len());
    let dev = coarse.x.iter().zip(&fine.x).map(|(x, y)| (x - y).amax()).fold(0.0, f64::max);
    // projection kinks cap the order near switches; still far below signal scale
    assert!(dev < 1e-5, "{dev}");
}

#[test]
fn certified_loop_meets_l2_bound_and_wrong_sign_rho_does_not() {
    let sc = sinusoid_scenario(6, 2, 45.0);
    let ok = simulate_pimaw(&sc, None).unwrap();
    assert!(l2_performance_check(&ok, 10.0).unwrap().pass);
    let bad = simulate_pimaw(&sc, Some(-50.0)).unwrap();
    let c = l2_performance_check(&bad, 10.0).unwrap();
    assert!(!c.pass);
}

#[test]
fn projected_methods_stay_feasible_and_complementary() {
    let sc = sinusoid_scenario(6, 4, 20.0);
    for m in [Method::Pimaw, Method::PimawRho0, Method::Opgd] {
        let tr = simulate(&sc, m, None).unwrap();
        for k in 0..tr.len() {
            assert!(tr.x[k].iter().all(|&v| v >= 0.0));
            for i in 0..tr.x[k].len() {
                assert_eq!(tr.x[k][i].min(-tr.w[k][i]), 0.0);
            }
        }
    }
}

#[test]
fn opgd_lags_a_moving_optimum() {
    let sc = sinusoid_scenario(6, 6, 45.0);
    let tr = simulate_opgd(&sc).unwrap();
    let e = tracking_error(&tr);
    assert!(final_window_mean(&tr.t, &e, 0.2) > 1e-3);
}

#[test]
fn execution_mode_does_not_change_results() {
    let mut sc = sinusoid_scenario(4, 9, 5.0);
    sc.exec = Exec::Sequential;
    let a = simulate_all(&sc, &[Method::Pimaw, Method::Opgd], None, Exec::Sequential);
    sc.exec = Exec::Parallel;
    let b = simulate_all(&sc, &[Method::Pimaw, Method::Opgd], None, Exec::Parallel);
    for (a, b) in a.into_iter().zip(b) {
        let (a, b) = (a.unwrap(), b.unwrap());
        assert_eq!(a.x, b.x);
        assert_eq!(a.x_star, b.x_star);
    }
}

#[test]
fn exosystem_signal_is_tracked_exactly_when_unconstrained() {
    let model = companion_realization(&[1.0, 0.0, 0.0]).unwrap();
    let prob = QuadraticProblem::random(3, 1.0, 10.0, 1).unwrap();
    let src = SignalSource::exosystem_seeded(model, 3, 4).unwrap();
    let sc = Scenario::new(prob, src, Some(design(&[1.0, 0.0, 0.0], 1.0, 10.0)), 30.0, 1e-3);
    let tr = simulate_unconstrained_im(&sc).unwrap();
    assert!(*tr.gradient_norm(&sc.prob).last().unwrap() < 1e-6);
}

#[test]
fn constant_signal_recovers_optimum_and_scaled_multiplier() {
    let n = 5;
    let prob = QuadraticProblem::random(n, 1.0, 10.0, 11).unwrap();
    let model = companion_realization(&[1.0, 0.0]).unwrap();
    let src = SignalSource::exosystem_seeded(model, n, 12).unwrap();
    let d = design(&[1.0, 0.0], 1.0, 10.0);
    let rho = d.rho;
    let tr = simulate_pimaw(&Scenario::new(prob, src, Some(d), 40.0, 1e-3), None).unwrap();
    let k = tr.len() - 1;
    assert!((&tr.x[k] - &tr.x_star[k]).amax() <= 1e-8);
    // at rest u = 0 gives ∇f(x*) = -ρ w, so the multiplier is ρ(-w)
    assert!((-&tr.w[k] * rho - &tr.mu_star[k]).amax() <= 1e-8);
}
