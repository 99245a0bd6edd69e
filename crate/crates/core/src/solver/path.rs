use std::io::Write;

use serde::{Deserialize, Serialize};

use super::config::{LimitConfig, SolverConfig};
use super::integrator::Integrator;
use crate::error::{Error, Result};
use crate::spectral::ScalarField;

/// States at the recorded instants, plus every increment when recorded at stride 1.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<ScalarField>,
    /// `increments[m]` drove the step from `states[m]` to `states[m + 1]`.
    pub increments: Option<Vec<Vec<f64>>>,
}

/// Running diagnostics sampled at the recorded instants.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PathDiagnostics {
    pub times: Vec<f64>,
    pub l2_energy: Vec<f64>,
    /// Trapezoidal `int_0^t |grad X|_2^2`.
    pub h1_dissipation: Vec<f64>,
    pub mean_series: Vec<f64>,
    /// `psi0` used in the energy margin.
    pub psi0: f64,
}

impl PathDiagnostics {
    /// `|X(t)|^2 + 2 psi0 int |grad X|^2 - |x0|^2`.
    pub fn margins(&self) -> Vec<f64> {
        let e0 = self.l2_energy.first().copied().unwrap_or(0.0);
        self.l2_energy
            .iter()
            .zip(&self.h1_dissipation)
            .map(|(e, d)| e + 2.0 * self.psi0 * d - e0)
            .collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,l2_energy,h1_dissipation_integral,mean,margin")?;
        for (i, m) in self.margins().iter().enumerate() {
            writeln!(
                w,
                "{:e},{:e},{:e},{:e},{:e}",
                self.times[i], self.l2_energy[i], self.h1_dissipation[i], self.mean_series[i], m
            )?;
        }
        Ok(())
    }
}

fn h1_squared(field: &ScalarField) -> f64 {
    let lap = field.grid().laplace_symbol();
    field
        .bins()
        .iter()
        .zip(lap)
        .map(|(c, l)| l * c.norm_sqr())
        .sum()
}

pub(crate) fn run(
    mut integ: Integrator,
    x0: &ScalarField,
    steps: usize,
    stride: usize,
    replica: u64,
) -> Result<(Trajectory, PathDiagnostics)> {
    integ.grid().check_same(x0.grid())?;
    if !x0.is_finite() {
        return Err(Error::NonFinite("initial condition"));
    }
    let grid = integ.grid().clone();
    let dt = integ.dt();
    let mut x = x0.values().to_vec();
    let keep_increments = stride == 1 && integ.noise().is_some();
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![x0.clone()],
        increments: keep_increments.then(Vec::new),
    };
    let mut diag = PathDiagnostics {
        times: vec![0.0],
        l2_energy: vec![x0.l2_squared()],
        h1_dissipation: vec![0.0],
        mean_series: vec![x0.mean()],
        psi0: integ.phase().psi0(),
    };
    let mut dissipation = 0.0;
    let mut prev_h1 = None;
    for s in 0..steps {
        let time = (s + 1) as f64 * dt;
        integ
            .step(&mut x, s as u64, replica)
            .map_err(|_| Error::BlowUp { step: s + 1, time })?;
        if let Some(inc) = traj.increments.as_mut() {
            inc.push(integ.increments().to_vec());
        }
        let h_left = integ.pre_step_h1_squared();
        if let Some(p) = prev_h1 {
            dissipation += 0.5 * dt * (p + h_left);
        }
        prev_h1 = Some(h_left);
        if (s + 1) % stride == 0 {
            let state = ScalarField::from_values(&grid, x.clone())?;
            let h_now = h1_squared(&state);
            diag.times.push(time);
            diag.l2_energy.push(state.l2_squared());
            diag.h1_dissipation.push(dissipation + 0.5 * dt * (h_left + h_now));
            diag.mean_series.push(state.mean());
            traj.times.push(time);
            traj.states.push(state);
        }
    }
    Ok((traj, diag))
}

/// Runs the stochastic equation to `T`, recording every `stride` steps.
pub fn simulate_path(
    x0: &ScalarField,
    cfg: &SolverConfig,
    replica: u64,
) -> Result<(Trajectory, PathDiagnostics)> {
    let integ = Integrator::stochastic(cfg)?;
    run(integ, x0, cfg.base.steps()?, cfg.base.stride, replica)
}

/// Runs the limit equation to `T`, recording every `stride` steps.
pub fn solve_limit(x0: &ScalarField, cfg: &LimitConfig) -> Result<(Trajectory, PathDiagnostics)> {
    let integ = Integrator::deterministic(cfg)?;
    run(integ, x0, cfg.steps()?, cfg.stride, 0)
}

fn one_step(mut integ: Integrator, x: &ScalarField, step: u64, replica: u64) -> Result<ScalarField> {
    integ.grid().check_same(x.grid())?;
    let mut v = x.values().to_vec();
    integ.step(&mut v, step, replica).map_err(|_| Error::BlowUp {
        step: step as usize + 1,
        time: (step + 1) as f64 * integ.dt(),
    })?;
    ScalarField::from_values(x.grid(), v)
}

/// One Euler-Maruyama IMEX step of the Ito form.
pub fn step_ito(x: &ScalarField, step: u64, replica: u64, cfg: &SolverConfig) -> Result<ScalarField> {
    let cfg = cfg.clone().with_scheme(super::Scheme::ItoImex);
    one_step(Integrator::stochastic(&cfg)?, x, step, replica)
}

/// One midpoint step of the Stratonovich form.
pub fn step_stratonovich(
    x: &ScalarField,
    step: u64,
    replica: u64,
    cfg: &SolverConfig,
) -> Result<ScalarField> {
    let cfg = cfg.clone().with_scheme(super::Scheme::StratonovichMidpoint);
    one_step(Integrator::stochastic(&cfg)?, x, step, replica)
}

/// One IMEX step of the limit equation.
pub fn step_deterministic(x: &ScalarField, cfg: &LimitConfig) -> Result<ScalarField> {
    one_step(Integrator::deterministic(cfg)?, x, 0, 0)
}
