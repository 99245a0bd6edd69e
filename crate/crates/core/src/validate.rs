//! Fast property suite: structure identity, coefficient constraints, divergence
//! orthogonality, the pathwise energy inequality and Ito/Stratonovich agreement.

use std::f64::consts::PI;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::experiment::map_jobs;
use crate::noise::{make_family, structure_identity_check, CoefficientFamily, NoiseSpec};
use crate::phase::{PhaseFunctions, PhaseParams};
use crate::solver::{
    divergence_orthogonality_check, energy_inequality_check, simulate_path, InitialCondition,
    Integrator, LimitConfig, Scheme, SolverConfig,
};
use crate::spectral::{ScalarField, TorusGrid};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertyResult {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub threshold: f64,
    pub detail: String,
}

impl PropertyResult {
    fn below(name: &str, measured: f64, threshold: f64, detail: String) -> Self {
        Self {
            name: name.to_string(),
            passed: measured < threshold,
            measured,
            threshold,
            detail,
        }
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct SuiteOptions {
    /// Use families with radial symmetry broken (negative control).
    pub break_symmetry: bool,
    pub threads: Option<usize>,
}

/// Flat family with the `k2 = 0` modes scaled by `factor`.
pub fn asymmetric_family(radius: u32, factor: f64) -> Result<CoefficientFamily> {
    let modes = make_family(radius)?
        .modes()
        .iter()
        .map(|&(m, a)| if m.k()[1] == 0 { (m, a * factor) } else { (m, a) })
        .collect();
    Ok(CoefficientFamily::from_modes(radius, modes))
}

/// `max |sum alpha_k^2 sigma_k (x) sigma_k - I/2|` over `points` uniform random points.
pub fn structure_identity_error(family: &CoefficientFamily, points: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut unit = || (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
    let mut worst = 0.0f64;
    for _ in 0..points {
        let m = structure_identity_check(family, [unit(), unit()]);
        worst = worst
            .max((m[0][0] - 0.5).abs())
            .max((m[1][1] - 0.5).abs())
            .max(m[0][1].abs())
            .max(m[1][0].abs());
    }
    worst
}

/// `(max |sum alpha^2/|k|^2 - 1|, c_N strictly decreasing, c_1 and c_2 exact)` for `N <= max`.
pub fn coefficient_constraints(max: u32) -> Result<(f64, bool, bool)> {
    let mut worst = 0.0f64;
    let mut decreasing = true;
    let mut prev = f64::INFINITY;
    for n in 1..=max {
        let f = make_family(n)?;
        worst = worst.max((f.normalization() - 1.0).abs());
        decreasing &= f.sup_norm() < prev;
        prev = f.sup_norm();
    }
    let exact = (make_family(1)?.sup_norm() - 0.5).abs() < 1e-15
        && (make_family(2)?.sup_norm() - 7f64.powf(-0.5)).abs() < 1e-15;
    Ok((worst, decreasing, exact))
}

/// Largest `|int sigma_k . grad Gamma~(X)|` over resolved single-mode states and all
/// modes of the family, on an `n`-grid.
pub fn orthogonality_defect(n: usize, family: &CoefficientFamily, phase: &PhaseFunctions) -> Result<f64> {
    let grid = TorusGrid::new(n)?;
    let mut worst = 0.0f64;
    for k in [[1i64, 0i64], [1, 1], [2, -3], [0, 4], [5, 2]] {
        let x = ScalarField::from_fn(&grid, |p| {
            0.6 + 0.9 * (2.0 * PI * (k[0] as f64 * p[0] + k[1] as f64 * p[1])).cos()
        });
        for (_, v) in divergence_orthogonality_check(&x, phase, family)? {
            worst = worst.max(v.abs());
        }
    }
    Ok(worst)
}

/// Ensemble statistics of `|X(T)|^2` under both schemes, driven by the same increments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgreementStats {
    pub replicas: usize,
    pub ito_mean: f64,
    pub ito_std_error: f64,
    pub stratonovich_mean: f64,
    pub stratonovich_std_error: f64,
    /// Standard error of the replica-wise differences.
    pub paired_std_error: f64,
}

impl AgreementStats {
    pub fn gap(&self) -> f64 {
        (self.ito_mean - self.stratonovich_mean).abs()
    }

    pub fn combined_std_error(&self) -> f64 {
        self.ito_std_error.hypot(self.stratonovich_std_error)
    }
}

fn final_energy(cfg: &SolverConfig, x0: &ScalarField, replica: u64) -> Result<f64> {
    let mut integ = Integrator::stochastic(cfg)?;
    let mut x = x0.values().to_vec();
    for s in 0..cfg.base.steps()? {
        integ.step(&mut x, s as u64, replica)?;
    }
    Ok(x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64)
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

pub fn ito_stratonovich_agreement(
    cfg: &SolverConfig,
    x0: &ScalarField,
    replicas: usize,
    threads: Option<usize>,
) -> Result<AgreementStats> {
    let ito = cfg.clone().with_scheme(Scheme::ItoImex);
    let strat = cfg.clone().with_scheme(Scheme::StratonovichMidpoint);
    let pairs = map_jobs((0..replicas as u64).collect(), threads, |r| -> Result<(f64, f64)> {
        Ok((final_energy(&ito, x0, r)?, final_energy(&strat, x0, r)?))
    })?
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let a: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let b: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let d: Vec<f64> = pairs.iter().map(|p| p.0 - p.1).collect();
    let (ito_mean, ito_std_error) = mean_se(&a);
    let (stratonovich_mean, stratonovich_std_error) = mean_se(&b);
    Ok(AgreementStats {
        replicas,
        ito_mean,
        ito_std_error,
        stratonovich_mean,
        stratonovich_std_error,
        paired_std_error: mean_se(&d).1,
    })
}

/// Worst `max_t margin / |x0|^2` over `seeds` paths (to be compared with `10 dt`).
pub fn energy_margin(cfg: &SolverConfig, x0: &ScalarField, seeds: u64, threads: Option<usize>) -> Result<f64> {
    let e0 = x0.l2_squared();
    let worst = map_jobs((0..seeds).collect(), threads, |seed| -> Result<f64> {
        let noise = NoiseSpec::new(cfg.noise.family().clone(), &cfg.base.grid, seed)?;
        let run = SolverConfig::new(cfg.base.clone(), noise).with_scheme(cfg.scheme);
        let (_, diag) = simulate_path(x0, &run, 0)?;
        Ok(energy_inequality_check(&diag, &run.base)?.worst)
    })?
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(worst.into_iter().fold(f64::NEG_INFINITY, f64::max) / e0)
}

pub fn run_suite(opts: SuiteOptions) -> Result<Vec<PropertyResult>> {
    let phase = PhaseFunctions::new(PhaseParams::default())?;
    let family = |n: u32| {
        if opts.break_symmetry {
            asymmetric_family(n, 1.5)
        } else {
            make_family(n)
        }
    };
    let mut out = Vec::new();

    let mut worst = 0.0f64;
    for n in 1..=16 {
        worst = worst.max(structure_identity_error(&family(n)?, 100, u64::from(n)));
    }
    out.push(PropertyResult::below(
        "structure_identity",
        worst,
        1e-10,
        "N = 1..16, 100 random points each".into(),
    ));

    let (norm, decreasing, exact) = coefficient_constraints(64)?;
    out.push(PropertyResult {
        name: "coefficient_constraints".into(),
        passed: norm < 1e-12 && decreasing && exact,
        measured: norm,
        threshold: 1e-12,
        detail: format!("N <= 64; c_N decreasing: {decreasing}; c_1, c_2 exact: {exact}"),
    });

    let defect = orthogonality_defect(64, &family(8)?, &phase)?;
    out.push(PropertyResult::below(
        "divergence_orthogonality",
        defect,
        1e-8,
        "n = 64, |k| <= 8, five resolved states".into(),
    ));

    let grid = TorusGrid::new(32)?;
    let x0 = InitialCondition::default().sample(&grid)?;
    let base = LimitConfig::new(&grid, phase.clone(), 1e-4, 0.02).with_stride(10);
    let noise = NoiseSpec::new(family(4)?, &grid, 0)?;
    let cfg = SolverConfig::new(base, noise);
    let margin = energy_margin(&cfg, &x0, 4, opts.threads)?;
    let tol = 10.0 * cfg.base.dt;
    out.push(PropertyResult {
        name: "energy_inequality".into(),
        passed: margin <= tol,
        measured: margin,
        threshold: tol,
        detail: "n = 32, N = 4, dt = 1e-4, T = 0.02, 4 seeds; margin / |x0|^2".into(),
    });

    let base = LimitConfig::new(&grid, phase, 2e-4, 0.05).with_stride(250);
    let cfg = SolverConfig::new(base, NoiseSpec::new(family(4)?, &grid, 1)?);
    let stats = ito_stratonovich_agreement(&cfg, &x0, 64, opts.threads)?;
    let tol = (3.0 * stats.combined_std_error()).max(10.0 * x0.l2_squared() * cfg.base.dt);
    out.push(PropertyResult {
        name: "ito_stratonovich_agreement".into(),
        passed: stats.gap() <= tol,
        measured: stats.gap(),
        threshold: tol,
        detail: format!(
            "n = 32, N = 4, dt = 2e-4, T = 0.05, 64 replicas; means {:.6e} vs {:.6e}",
            stats.ito_mean, stats.stratonovich_mean
        ),
    });
    Ok(out)
}
