use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use super::config::{LimitConfig, SolverConfig};
use super::path::{PathDiagnostics, Trajectory};
use crate::error::{Error, Result};
use crate::noise::{basis_e, sigma, CoefficientFamily, ModeIndex, Parity};
use crate::phase::PhaseFunctions;
use crate::spectral::{gradient, ScalarField, VectorField};

/// `grad e_j(x)`.
pub fn basis_gradient(j: &ModeIndex, x: [f64; 2]) -> [f64; 2] {
    let k = j.k();
    let ph = 2.0 * PI * (k[0] as f64 * x[0] + k[1] as f64 * x[1]);
    let d = match j.parity() {
        Parity::Plus => -SQRT_2 * ph.sin(),
        Parity::Minus => SQRT_2 * ph.cos(),
    } * 2.0
        * PI;
    [k[0] as f64 * d, k[1] as f64 * d]
}

/// Residual of the weak formulation tested against `e_j`, at every stored instant:
///
/// `(X(t), e_j) - (x, e_j) - int (F, e_j) - int (Psi(X) + g(X), Delta e_j)
///  - sum_k int alpha_k (sigma_k Gamma(X), grad e_j) dbeta_k`,
///
/// time integrals by the trapezoid rule, stochastic integrals with left-point sums.
pub fn weak_residual(traj: &Trajectory, j: &ModeIndex, cfg: &SolverConfig) -> Result<Vec<f64>> {
    let base = &cfg.base;
    let grid = &base.grid;
    let phase = &base.phase;
    let dt = base.dt;
    if traj.states.len() != traj.times.len() || traj.states.is_empty() {
        return Err(Error::Precondition("trajectory has no aligned states".into()));
    }
    for (m, w) in traj.times.windows(2).enumerate() {
        if ((w[1] - w[0]) - dt).abs() > 1e-9 * dt {
            return Err(Error::Precondition(format!(
                "weak residual needs every step stored (gap {} at sample {m})",
                w[1] - w[0]
            )));
        }
    }
    let noisy = !cfg.noise.family().is_silent();
    let increments = match (&traj.increments, noisy) {
        (Some(inc), _) if inc.len() + 1 == traj.states.len() => Some(inc),
        (_, false) => None,
        _ => {
            return Err(Error::Precondition(
                "weak residual needs the realised increments of every step".into(),
            ))
        }
    };

    let e = ScalarField::from_fn(grid, |x| basis_e(j, x));
    let lambda = 4.0 * PI * PI * j.norm_sq() as f64;
    let test_fields: Vec<(f64, ScalarField)> = if noisy {
        cfg.noise
            .modes()
            .iter()
            .map(|m| {
                let h = ScalarField::from_fn(grid, |x| {
                    let s = sigma(&m.index, x);
                    let g = basis_gradient(j, x);
                    s[0] * g[0] + s[1] * g[1]
                });
                (m.alpha, h)
            })
            .collect()
    } else {
        Vec::new()
    };
    let forcing = base.forcing.sample(grid)?.inner(&e)?;
    let x0 = traj.states[0].inner(&e)?;

    let drift = |s: &ScalarField| -> Result<f64> {
        let p = s.map(|v| phase.psi(v) + phase.g(v));
        Ok(-lambda * p.inner(&e)?)
    };
    let mut out = Vec::with_capacity(traj.states.len());
    out.push(0.0);
    let (mut time_int, mut ito_int) = (0.0, 0.0);
    let mut d_prev = drift(&traj.states[0])?;
    for m in 0..traj.states.len() - 1 {
        let d_next = drift(&traj.states[m + 1])?;
        time_int += dt * forcing + 0.5 * dt * (d_prev + d_next);
        d_prev = d_next;
        if let Some(inc) = increments {
            let gamma = traj.states[m].map(|v| phase.gamma(v));
            for ((alpha, h), db) in test_fields.iter().zip(&inc[m]) {
                ito_int += alpha * gamma.inner(h)? * db;
            }
        }
        out.push(traj.states[m + 1].inner(&e)? - x0 - time_int - ito_int);
    }
    Ok(out)
}

/// `int u . grad Gamma~(X)` by grid quadrature with a spectral gradient.
pub fn transport_integral(x: &ScalarField, phase: &PhaseFunctions, u: &VectorField) -> Result<f64> {
    x.grid().check_same(u.grid())?;
    let grad = gradient(&x.map(|v| phase.gamma_primitive(v)));
    Ok(u.dot(&grad)?.mean())
}

/// `int sigma_k . grad Gamma~(X)` for every mode of the family.
pub fn divergence_orthogonality_check(
    x: &ScalarField,
    phase: &PhaseFunctions,
    family: &CoefficientFamily,
) -> Result<Vec<(ModeIndex, f64)>> {
    if !x.is_finite() {
        return Err(Error::NonFinite("state"));
    }
    let grid = x.grid();
    let grad = gradient(&x.map(|v| phase.gamma_primitive(v)));
    family
        .modes()
        .iter()
        .map(|(m, _)| {
            let s = VectorField::from_fn(grid, |p| sigma(m, p));
            Ok((*m, s.dot(&grad)?.mean()))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub margins: Vec<f64>,
    pub worst: f64,
    /// `10 dt |x0|^2`.
    pub tolerance: f64,
    pub passed: bool,
}

/// Checks `|X(t)|^2 + 2 psi0 int |grad X|^2 <= |x0|^2 (1 + 10 dt)` along a path.
pub fn energy_inequality_check(diag: &PathDiagnostics, cfg: &LimitConfig) -> Result<EnergyReport> {
    if !cfg.forcing.is_zero() {
        return Err(Error::Precondition(
            "the energy inequality is stated for F = 0".into(),
        ));
    }
    let margins = diag.margins();
    let worst = margins.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tolerance = 10.0 * cfg.dt * diag.l2_energy.first().copied().unwrap_or(0.0);
    Ok(EnergyReport {
        passed: worst <= tolerance,
        margins,
        worst,
        tolerance,
    })
}
