//! Cross-module checks: Monte Carlo runs against closed-form moment
//! evolution, the metric contraction along the flow, and the residual of the
//! pure-drift limit equation on a smooth profile.

use std::sync::Arc;

use kinetic_core::equilibria::AnalyticDistribution;
use kinetic_core::fourier::{empirical_cf, fourier_distance, log_decay_slope, XiGrid};
use kinetic_core::graph::{d2_contraction_experiment, ContractionConfig, GraphModel, MuSpec};
use kinetic_core::kinetics::InteractionLaw;
use kinetic_core::moments::{energy_closed_form, mean_closed_form};
use kinetic_core::montecarlo::{ensemble_moment, run, Ensemble};
use kinetic_core::sampling::InitialCondition;

/// Ensemble M2(t) stays within five Monte Carlo standard errors of the
/// closed form along the run; the grand mean over replicas stays put.
#[test]
fn mc_moments_track_closed_forms() {
    let law = InteractionLaw::prototype(0.25, 0.1).unwrap();
    let f0 = InitialCondition::UniformInterval(-1.0, 3.0);
    let n = 50_000;
    let e = Ensemble::from_initial_condition(&f0, n, 0.05, 2024, 0.05).unwrap();
    let mut checked = 0;
    let e = run(e, &law, 5.0, |iter, t, states| {
        if iter % 10 != 0 {
            return;
        }
        let m2 = ensemble_moment(states, 2).unwrap();
        let m4 = ensemble_moment(states, 4).unwrap();
        let se = ((m4 - m2 * m2).max(0.0) / n as f64).sqrt();
        let expected = energy_closed_form(1.0, 7.0 / 3.0, &law, t).unwrap();
        assert!(
            (m2 - expected).abs() <= 5.0 * se + 5e-3,
            "t = {t}: M2 = {m2}, closed form {expected}, se {se}"
        );
        checked += 1;
    });
    assert!(checked >= 10);
    let m1 = ensemble_moment(e.states(), 1).unwrap();
    assert!((m1 - mean_closed_form(1.0, &law, 5.0)).abs() < 0.05);
}

/// Grand mean over independent runs deviates from M1(0) by at most
/// 5 std / sqrt(R * N) for a mean-conserving law.
#[test]
fn mean_is_a_martingale_over_replicas() {
    let law = InteractionLaw::prototype(0.25, 0.1).unwrap();
    let f0 = InitialCondition::UniformInterval(-1.0, 3.0);
    let replicas = 8;
    let n = 20_000;
    let mut means = Vec::new();
    for r in 0..replicas {
        let e = Ensemble::from_initial_condition(&f0, n, 0.1, 7000 + r, 0.1).unwrap();
        let e = run(e, &law, 3.0, |_, _, _| {});
        means.push(ensemble_moment(e.states(), 1).unwrap());
    }
    let grand: f64 = means.iter().sum::<f64>() / replicas as f64;
    // Initial std is 4/sqrt(12); interactions only shrink the spread.
    let band = 5.0 * (4.0 / 12f64.sqrt()) / ((replicas as usize * n) as f64).sqrt();
    assert!((grand - 1.0).abs() < band + 2e-3, "grand mean {grand}");
}

/// Empirical d2 between two flows with equal means decays no slower than
/// the contraction envelope rate <p^2+q^2> - 1 (slope test with a 3-sigma
/// allowance on the fitted slope).
#[test]
fn d2_contraction_along_the_flow() {
    let law = InteractionLaw::prototype(0.25, 0.1).unwrap();
    let rate = law.energy_sum() - 1.0;
    let n = 50_000;
    let dt = 0.05;
    let t_final = 6.0;
    let grid = Arc::new(XiGrid::log_symmetric(0.5, 20.0, 128).unwrap());
    let f = Ensemble::from_initial_condition(
        &InitialCondition::UniformInterval(-3.0, 5.0),
        n,
        dt,
        11,
        dt,
    )
    .unwrap();
    let g = Ensemble::from_initial_condition(
        &InitialCondition::Analytic(AnalyticDistribution::DiracAtom { location: 1.0 }),
        n,
        dt,
        12,
        dt,
    )
    .unwrap();
    let mut f = f;
    let mut g = g;
    let mut times = Vec::new();
    let mut d2 = Vec::new();
    let steps = (t_final / dt) as usize;
    for k in 0..=steps {
        if k % 20 == 0 {
            let cf = empirical_cf(f.states(), &grid).unwrap().with_declared_moments(vec![1.0]);
            let cg = empirical_cf(g.states(), &grid).unwrap().with_declared_moments(vec![1.0]);
            times.push(f.t());
            d2.push(fourier_distance(&cf, &cg, 2.0).unwrap().value);
        }
        if k < steps {
            f.step(&law);
            g.step(&law);
        }
    }
    assert!(d2[0] > 0.5, "initial separation too small: {}", d2[0]);
    let (slope, se) = log_decay_slope(&times, &d2).unwrap();
    assert!(
        slope <= rate + 3.0 * se,
        "slope {slope} exceeds envelope {rate} + 3 x {se}"
    );
}

/// The transported profile solves the drift-only equation: residual of
/// d/dt g + lambda d/dv ((m - v) g) on a smooth Gaussian profile vanishes
/// within the finite-difference discretization error.
#[test]
fn transport_solution_residual() {
    let (lambda, m10) = (1.0, 1.0);
    let f0 = InitialCondition::Analytic(AnalyticDistribution::Gaussian {
        mean: 1.0,
        variance: 0.5,
    });
    let g = |v: f64, t: f64| -> f64 {
        AnalyticDistribution::TransportSelfSimilar {
            f0: Box::new(f0.clone()),
            lambda,
            m10,
            t,
        }
        .pdf(v)
        .unwrap()
    };
    let (h_t, h_v) = (1e-5, 1e-4);
    for &t in &[0.3, 1.0, 2.0] {
        for k in -20..=20 {
            let v = m10 + 0.15 * k as f64;
            let dgdt = (g(v, t + h_t) - g(v, t - h_t)) / (2.0 * h_t);
            let flux = |vv: f64| lambda * (m10 - vv) * g(vv, t);
            let dflux = (flux(v + h_v) - flux(v - h_v)) / (2.0 * h_v);
            let residual = dgdt + dflux;
            assert!(
                residual.abs() < 1e-4,
                "residual {residual} at (v, t) = ({v}, {t})"
            );
        }
    }
}

/// Coupled-migration graph runs: identical initial data give identically
/// zero D2; distinct data contract at least at the envelope rate.
#[test]
fn graph_d2_contraction() {
    let laws = vec![
        InteractionLaw::prototype(0.25, 0.1).unwrap(),
        InteractionLaw::prototype(0.4, 0.05).unwrap(),
    ];
    let g = GraphModel::from_transition(
        vec![0.5, 0.25, 0.5, 0.75],
        1.0,
        MuSpec::Normalized(0.5),
        laws,
    )
    .unwrap();
    let cfg = ContractionConfig {
        n_particles: 20_000,
        dt: 0.05,
        t_final: 6.0,
        sample_every: 20,
        seed: 9,
        trials: 2,
        grid: XiGrid::log_symmetric(0.5, 20.0, 96).unwrap(),
    };
    let rho0 = [0.5, 0.5];
    let uniform = InitialCondition::UniformInterval(-2.0, 4.0);
    let atom = InitialCondition::Analytic(AnalyticDistribution::DiracAtom { location: 1.0 });

    // Identical coupled runs: D2 identically zero (coupling shares vertex
    // trajectories but value streams differ; use the same seeds by running
    // f0 = g0 through the experiment and checking the zero-distance trace
    // via identical specs and identical run seeds is not available, so this
    // checks the weaker statement that distances start at the sampling
    // level and stay far below the separated pair below).
    let same = d2_contraction_experiment(
        &g,
        &rho0,
        &[uniform.clone(), uniform.clone()],
        &[uniform.clone(), uniform.clone()],
        &cfg,
    )
    .unwrap();

    let separated = d2_contraction_experiment(
        &g,
        &rho0,
        &[uniform.clone(), uniform.clone()],
        &[atom.clone(), atom.clone()],
        &cfg,
    )
    .unwrap();
    assert!(separated.coupled_migration);
    assert!(separated.d2[0][0] > 10.0 * same.d2[0][0]);
    for (trial, (slope, se)) in separated.slopes.iter().enumerate() {
        assert!(
            *slope <= separated.envelope_rate + 3.0 * se,
            "trial {trial}: slope {slope} vs envelope {}",
            separated.envelope_rate
        );
    }
}
