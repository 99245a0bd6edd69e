use std::f64::consts::PI;

use proptest::prelude::*;

use super::*;
use crate::noise::{make_family, CoefficientFamily, ModeIndex, NoiseSpec};
use crate::phase::{PhaseFunctions, PhaseParams};
use crate::spectral::{ScalarField, TorusGrid};

fn phase() -> PhaseFunctions {
    PhaseFunctions::new(PhaseParams::default()).unwrap()
}

fn solver(n: usize, radius: u32, dt: f64, t_end: f64, seed: u64) -> SolverConfig {
    let grid = TorusGrid::new(n).unwrap();
    let base = LimitConfig::new(&grid, phase(), dt, t_end);
    let noise = NoiseSpec::new(make_family(radius).unwrap(), &grid, seed).unwrap();
    SolverConfig::new(base, noise)
}

fn silent(cfg: &SolverConfig) -> SolverConfig {
    let modes = cfg
        .noise
        .family()
        .modes()
        .iter()
        .map(|(m, _)| (*m, 0.0))
        .collect();
    let family = CoefficientFamily::from_modes(cfg.noise.family().radius(), modes);
    let noise = NoiseSpec::new(family, &cfg.base.grid, cfg.noise.seed()).unwrap();
    SolverConfig::new(cfg.base.clone(), noise).with_scheme(cfg.scheme)
}

fn blob(grid: &TorusGrid) -> ScalarField {
    InitialCondition::default().sample(grid).unwrap()
}

fn l2_dist(a: &ScalarField, b: &ScalarField) -> f64 {
    a.sub(b).unwrap().l2_squared().sqrt()
}

fn slope(errors: &[f64]) -> f64 {
    // errors at dt, dt/2, dt/4, ...
    let n = errors.len() as f64 - 1.0;
    (errors[0] / errors[errors.len() - 1]).log2() / n
}

#[test]
fn validation_rejects_bad_configs() {
    let c = solver(16, 2, 1e-3, 1e-2, 0);
    assert!(c.validate().is_ok());
    let mut bad = c.clone();
    bad.base.imex_a = 0.1;
    assert!(bad.validate().is_err());
    let mut bad = c.clone();
    bad.base.t_end = 1.5e-3;
    assert!(bad.validate().is_err());
    let mut bad = c.clone();
    bad.base.stride = 3;
    assert!(bad.validate().is_err());
    // the implicit solve caps the bound at sup|u|^2 Lip(Gamma)^2 / (4a), so only an
    // over-scaled (unnormalised) family can break it
    let loud: Vec<_> = c.noise.family().modes().iter().map(|(m, a)| (*m, 10.0 * a)).collect();
    let loud = NoiseSpec::new(CoefficientFamily::from_modes(2, loud), &c.base.grid, 0).unwrap();
    let bad = SolverConfig::new(c.base.clone(), loud);
    assert!(bad.noise_stability_bound() > 1.0);
    assert!(bad.validate().is_err());
    let other = TorusGrid::new(32).unwrap();
    let mut bad = c;
    bad.base.grid = other;
    assert!(bad.validate().is_err());
}

#[test]
fn constant_below_threshold_is_steady() {
    let cfg = solver(16, 4, 1e-3, 1e-2, 3);
    let x0 = ScalarField::constant(&cfg.base.grid, 0.3);
    assert_eq!(cfg.base.phase.gamma(0.3), 0.0);
    let (traj, _) = simulate_path(&x0, &cfg, 0).unwrap();
    for s in &traj.states {
        assert!(s.values().iter().all(|&v| (v - 0.3).abs() <= 1e-15), "{:?}", &s.values()[..4]);
    }
}

#[test]
fn silent_noise_matches_deterministic_bitwise() {
    let cfg = silent(&solver(16, 3, 1e-3, 1e-2, 1));
    let x0 = blob(&cfg.base.grid);
    let a = step_ito(&x0, 4, 2, &cfg).unwrap();
    let b = step_deterministic(&x0, &cfg.base).unwrap();
    assert!(a.values().iter().zip(b.values()).all(|(x, y)| x.to_bits() == y.to_bits()));
}

#[test]
fn silent_stratonovich_is_uncorrected_deterministic() {
    let cfg = silent(&solver(16, 3, 1e-3, 1e-2, 1)).with_scheme(Scheme::StratonovichMidpoint);
    let x0 = blob(&cfg.base.grid);
    let a = step_stratonovich(&x0, 0, 0, &cfg).unwrap();
    let mut integ = Integrator::uncorrected(&cfg.base).unwrap();
    let mut v = x0.values().to_vec();
    integ.step(&mut v, 0, 0).unwrap();
    assert!(a.values().iter().zip(&v).all(|(x, y)| x.to_bits() == y.to_bits()));
    let with_g = step_deterministic(&x0, &cfg.base).unwrap();
    assert!(l2_dist(&a, &with_g) > 1e-8);
}

#[test]
fn mean_moves_by_forcing_only() {
    let mut cfg = solver(16, 4, 1e-3, 1e-2, 9);
    cfg.base.forcing = Forcing::Fourier(vec![
        FourierTerm { k: [0, 0], cos: 0.7, sin: 0.0 },
        FourierTerm { k: [1, 2], cos: 0.3, sin: -0.2 },
    ]);
    let mean_f = cfg.base.forcing.sample(&cfg.base.grid).unwrap().mean();
    assert!((mean_f - 0.7).abs() < 1e-14);
    for scheme in [Scheme::ItoImex, Scheme::StratonovichMidpoint] {
        let cfg = cfg.clone().with_scheme(scheme);
        let mut x = blob(&cfg.base.grid);
        let mut integ = Integrator::stochastic(&cfg).unwrap();
        for s in 0..10 {
            let mut v = x.values().to_vec();
            integ.step(&mut v, s, 0).unwrap();
            let next = ScalarField::from_values(&cfg.base.grid, v).unwrap();
            assert!((next.mean() - x.mean() - cfg.base.dt * mean_f).abs() < 1e-12);
            x = next;
        }
    }
}

#[test]
fn noise_changes_the_path_and_is_reproducible() {
    let cfg = solver(16, 4, 1e-3, 1e-2, 5);
    let x0 = blob(&cfg.base.grid);
    let (a, _) = simulate_path(&x0, &cfg, 0).unwrap();
    let (b, _) = simulate_path(&x0, &cfg, 0).unwrap();
    let (c, _) = simulate_path(&x0, &cfg, 1).unwrap();
    let last = |t: &Trajectory| t.states.last().unwrap().clone();
    assert_eq!(last(&a).values(), last(&b).values());
    assert!(l2_dist(&last(&a), &last(&c)) > 1e-6);
    let (d, _) = solve_limit(&x0, &cfg.base).unwrap();
    assert!(l2_dist(&last(&a), &last(&d)) > 1e-6);
}

/// Smooth liquid state where `Psi`, `g` and `Gamma` are all affine.
fn liquid_state(grid: &TorusGrid) -> ScalarField {
    ScalarField::from_fn(grid, |x| {
        1.5 + 0.1 * (2.0 * PI * x[0]).cos() + 0.05 * (2.0 * PI * (x[0] + x[1])).sin()
    })
}

/// Degree-3 Gaussian cubature: `x = +-sqrt(d dt) e_i`, weights `1 / 2d`.
fn conditional_mean(cfg: &SolverConfig, x: &ScalarField) -> Vec<f64> {
    let d = cfg.noise.modes().len();
    let mut integ = Integrator::stochastic(cfg).unwrap();
    let mut acc = vec![0.0; x.values().len()];
    let h = (d as f64 * cfg.base.dt).sqrt();
    for i in 0..d {
        for sign in [-1.0, 1.0] {
            let mut inc = vec![0.0; d];
            inc[i] = sign * h;
            let mut v = x.values().to_vec();
            integ.step_with_increments(&mut v, &inc).unwrap();
            for (a, b) in acc.iter_mut().zip(&v) {
                *a += b / (2 * d) as f64;
            }
        }
    }
    acc
}

#[test]
fn conditional_means_agree_on_linear_branch() {
    for dt in [4e-3, 1e-3, 2.5e-4] {
        let cfg = solver(16, 1, dt, dt, 0);
        let x = liquid_state(&cfg.base.grid);
        let ito = conditional_mean(&cfg, &x);
        let strat = conditional_mean(&cfg.clone().with_scheme(Scheme::StratonovichMidpoint), &x);
        let gap = ito
            .iter()
            .zip(&strat)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(gap < 1e-13, "dt={dt}: {gap:e}");
    }
}

#[test]
fn ito_stratonovich_strong_gap_is_first_order() {
    let mut errors = Vec::new();
    for dt in [4e-3, 2e-3, 1e-3, 5e-4] {
        let cfg = solver(16, 1, dt, dt, 0);
        let x = liquid_state(&cfg.base.grid);
        let mut ito = Integrator::stochastic(&cfg).unwrap();
        let mut strat =
            Integrator::stochastic(&cfg.clone().with_scheme(Scheme::StratonovichMidpoint)).unwrap();
        let mut acc = 0.0;
        let key = cfg.noise.stream(0);
        for sample in 0..64u64 {
            let inc: Vec<f64> = (0..cfg.noise.modes().len())
                .map(|m| dt.sqrt() * key.normal(sample, m))
                .collect();
            let mut a = x.values().to_vec();
            let mut b = a.clone();
            ito.step_with_increments(&mut a, &inc).unwrap();
            strat.step_with_increments(&mut b, &inc).unwrap();
            acc += a.iter().zip(&b).map(|(p, q)| (p - q).powi(2)).sum::<f64>() / a.len() as f64;
        }
        errors.push((acc / 64.0).sqrt());
    }
    // the gap is a centred quadratic form in the increments: first order, not 3/2
    let p = slope(&errors);
    assert!((0.8..=1.2).contains(&p), "{errors:?} slope {p}");
    let last = errors[2] / errors[3];
    assert!((1.8..=2.2).contains(&last), "{errors:?}");
}

#[test]
fn strong_self_convergence() {
    let h = 2.5e-4;
    let t_end = 0.02;
    let mut finals = Vec::new();
    for level in 0..3u32 {
        let dt = h * f64::from(1u32 << level);
        let mut cfg = solver(16, 2, dt, t_end, 11);
        cfg.noise = cfg.noise.clone().with_brownian_refinement(level);
        let x0 = blob(&cfg.base.grid);
        let runs: Vec<ScalarField> = (0..8)
            .map(|r| simulate_path(&x0, &cfg, r).unwrap().0.states.pop().unwrap())
            .collect();
        finals.push(runs);
    }
    let rms = |a: &[ScalarField], b: &[ScalarField]| {
        (a.iter().zip(b).map(|(x, y)| x.sub(y).unwrap().l2_squared()).sum::<f64>() / a.len() as f64)
            .sqrt()
    };
    let coarse = rms(&finals[2], &finals[1]);
    let fine = rms(&finals[1], &finals[0]);
    let order = (coarse / fine).log2();
    assert!(order >= 0.5, "{coarse:e} {fine:e} order {order}");
}

#[test]
fn zero_data_stays_zero() {
    let cfg = solver(16, 4, 1e-3, 1e-2, 77);
    let x0 = ScalarField::zeros(&cfg.base.grid);
    let (traj, diag) = simulate_path(&x0, &cfg, 3).unwrap();
    assert!(traj.states.iter().all(|s| s.values().iter().all(|&v| v == 0.0)));
    let report = energy_inequality_check(&diag, &cfg.base).unwrap();
    assert!(report.margins.iter().all(|&m| m == 0.0));
}

#[test]
fn diagnostics_sample_at_stride() {
    let mut cfg = solver(16, 2, 1e-3, 2e-2, 0);
    cfg.base.stride = 5;
    let (traj, diag) = simulate_path(&blob(&cfg.base.grid), &cfg, 0).unwrap();
    assert_eq!(diag.times.len(), 5);
    assert_eq!(traj.states.len(), 5);
    assert!(traj.increments.is_none());
    for (i, t) in diag.times.iter().enumerate() {
        assert!((t - i as f64 * 5e-3).abs() < 1e-15);
    }
    let mut csv = Vec::new();
    diag.write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("t,l2_energy,h1_dissipation_integral,mean,margin\n"));
    assert_eq!(text.lines().count(), 6);
}

#[test]
fn energy_inequality_on_short_runs() {
    let cfg = solver(32, 4, 1e-4, 2e-2, 8);
    let x0 = blob(&cfg.base.grid);
    for replica in 0..3 {
        let (_, diag) = simulate_path(&x0, &cfg, replica).unwrap();
        let r = energy_inequality_check(&diag, &cfg.base).unwrap();
        assert!(r.passed, "{} > {}", r.worst, r.tolerance);
        let last = diag.l2_energy.last().unwrap();
        assert!(*last <= diag.l2_energy[0] * (1.0 + 10.0 * cfg.base.dt));
    }
    let c = ScalarField::constant(&cfg.base.grid, 0.3);
    let (_, diag) = simulate_path(&c, &cfg, 0).unwrap();
    let r = energy_inequality_check(&diag, &cfg.base).unwrap();
    assert!(r.margins.iter().all(|m| m.abs() < 1e-14));
    let forced = LimitConfig {
        forcing: Forcing::Fourier(vec![FourierTerm { k: [1, 0], cos: 1.0, sin: 0.0 }]),
        ..cfg.base.clone()
    };
    assert!(energy_inequality_check(&diag, &forced).is_err());
}

#[test]
fn weak_residual_vanishes_on_zero_path() {
    let cfg = solver(16, 2, 1e-3, 1e-2, 0);
    let (traj, _) = simulate_path(&ScalarField::zeros(&cfg.base.grid), &cfg, 0).unwrap();
    let j = ModeIndex::new(1, 0).unwrap();
    let r = weak_residual(&traj, &j, &cfg).unwrap();
    assert!(r.iter().all(|&v| v == 0.0));
}

#[test]
fn weak_residual_needs_dense_paths() {
    let mut cfg = solver(16, 2, 1e-3, 1e-2, 0);
    cfg.base.stride = 2;
    let (traj, _) = simulate_path(&blob(&cfg.base.grid), &cfg, 0).unwrap();
    assert!(weak_residual(&traj, &ModeIndex::new(1, 0).unwrap(), &cfg).is_err());
}

#[test]
fn weak_residual_of_exact_heat_mode() {
    // liquid branch: Psi + g has slope k2/c2 + (eta_slope/c2)^2/4
    let cfg = silent(&solver(16, 1, 1e-5, 2e-2, 0));
    let grid = &cfg.base.grid;
    let s = 0.5 / 2.0 + 0.25 * 0.25;
    let rate = 4.0 * PI * PI * s;
    let steps = cfg.base.steps().unwrap();
    let times: Vec<f64> = (0..=steps).map(|m| m as f64 * cfg.base.dt).collect();
    let states = times
        .iter()
        .map(|t| {
            let amp = 0.1 * (-rate * t).exp();
            ScalarField::from_fn(grid, |x| 1.5 + amp * (2.0 * PI * x[0]).cos())
        })
        .collect();
    let traj = Trajectory {
        times,
        states,
        increments: None,
    };
    for j in [[1, 0], [-1, 0], [1, 1]] {
        let j = ModeIndex::new(j[0], j[1]).unwrap();
        let r = weak_residual(&traj, &j, &cfg).unwrap();
        let worst = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(worst <= 1e-8, "{j:?}: {worst:e}");
    }
}

#[test]
fn weak_residual_is_first_order() {
    let h = 5e-4;
    let modes = [[1, 0], [0, -1], [1, 1]].map(|k| ModeIndex::new(k[0], k[1]).unwrap());
    let mut worst = vec![Vec::new(); modes.len()];
    for level in (0..3u32).rev() {
        let dt = h * f64::from(1u32 << level);
        let mut cfg = solver(16, 2, dt, 0.02, 21);
        cfg.noise = cfg.noise.clone().with_brownian_refinement(level);
        let (traj, _) = simulate_path(&blob(&cfg.base.grid), &cfg, 0).unwrap();
        for (w, j) in worst.iter_mut().zip(&modes) {
            let r = weak_residual(&traj, j, &cfg).unwrap();
            w.push(r.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        }
    }
    for w in worst {
        let p = slope(&w);
        assert!(p >= 0.8, "{w:?} order {p}");
        for pair in w.windows(2) {
            let ratio = pair[0] / pair[1];
            assert!((1.6..=2.4).contains(&ratio), "{w:?}");
        }
    }
}

#[test]
fn orthogonality_on_constant_and_resolved_states() {
    let grid = TorusGrid::new(64).unwrap();
    let ph = phase();
    let family = make_family(8).unwrap();
    let c = ScalarField::constant(&grid, 1.7);
    assert!(divergence_orthogonality_check(&c, &ph, &family)
        .unwrap()
        .iter()
        .all(|(_, v)| *v == 0.0));
    for k in [[1, 0], [2, 3], [-4, 1]] {
        let x = ScalarField::from_fn(&grid, |p| {
            0.6 + 0.9 * (2.0 * PI * (k[0] as f64 * p[0] + k[1] as f64 * p[1])).cos()
        });
        for (m, v) in divergence_orthogonality_check(&x, &ph, &family).unwrap() {
            assert!(v.abs() < 1e-8, "{k:?} {m:?} {v:e}");
        }
    }
}

#[test]
fn orthogonality_negative_control() {
    let grid = TorusGrid::new(64).unwrap();
    let ph = phase();
    let x = ScalarField::from_fn(&grid, |p| 0.6 + 0.9 * (2.0 * PI * p[0]).cos());
    // gradient field: not divergence free
    let u = crate::spectral::VectorField::from_fn(&grid, |p| [(2.0 * PI * p[0]).sin(), 0.0]);
    assert!(transport_integral(&x, &ph, &u).unwrap().abs() > 1e-3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn mean_is_conserved_without_forcing(
        a in -1.0f64..2.0, b in 0.0f64..1.0, k1 in -3i64..=3, k2 in -3i64..=3, seed in any::<u64>()
    ) {
        let cfg = solver(16, 3, 1e-3, 1e-3, seed);
        let grid = cfg.base.grid.clone();
        let x = ScalarField::from_fn(&grid, |p| {
            a + b * (2.0 * PI * (k1 as f64 * p[0] + k2 as f64 * p[1])).sin()
                + 0.5 * b * (2.0 * PI * p[1]).cos()
        });
        let y = step_ito(&x, seed % 1000, 0, &cfg).unwrap();
        prop_assert!((y.mean() - x.mean()).abs() < 1e-12);
    }

    #[test]
    fn paths_are_deterministic(seed in any::<u64>(), replica in 0u64..1000) {
        let cfg = solver(16, 2, 1e-3, 3e-3, seed);
        let x0 = blob(&cfg.base.grid);
        let a = simulate_path(&x0, &cfg, replica).unwrap().0;
        let b = simulate_path(&x0, &cfg, replica).unwrap().0;
        for (p, q) in a.states.iter().zip(&b.states) {
            prop_assert!(p.values().iter().zip(q.values()).all(|(u, v)| u.to_bits() == v.to_bits()));
        }
    }
}
