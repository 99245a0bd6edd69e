//! The noiseless limit equation `dX = Delta(Psi(X) + g(X)) dt + F dt` and the comparison
//! with the same equation without `g`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::phase::PhaseFunctions;
use crate::solver::Integrator;
use crate::spectral::ScalarField;

pub use crate::solver::{solve_limit, step_deterministic, LimitConfig};

/// Liquid fraction (positive temperature) with and without the corrector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnhancementReport {
    pub times: Vec<f64>,
    pub liquid_fraction_with_g: Vec<f64>,
    pub liquid_fraction_without_g: Vec<f64>,
    /// Largest pointwise difference of the two final states.
    pub final_state_gap: f64,
}

impl EnhancementReport {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,liquid_fraction_with_g,liquid_fraction_without_g")?;
        for i in 0..self.times.len() {
            writeln!(
                w,
                "{:e},{:e},{:e}",
                self.times[i], self.liquid_fraction_with_g[i], self.liquid_fraction_without_g[i]
            )?;
        }
        Ok(())
    }
}

/// Solves the limit equation twice, with `g` and with `g = 0`.
pub fn melting_enhancement_report(x0: &ScalarField, cfg: &LimitConfig) -> Result<EnhancementReport> {
    let steps = cfg.steps()?;
    let (with, _) = crate::solver::path::run(Integrator::deterministic(cfg)?, x0, steps, cfg.stride, 0)?;
    let (without, _) =
        crate::solver::path::run(Integrator::uncorrected(cfg)?, x0, steps, cfg.stride, 0)?;
    let fraction = |t: &crate::solver::Trajectory| -> Vec<f64> {
        t.states
            .iter()
            .map(|s| cfg.phase.liquid_fraction(s.values()))
            .collect()
    };
    let gap = with
        .states
        .last()
        .zip(without.states.last())
        .map(|(a, b)| {
            a.values()
                .iter()
                .zip(b.values())
                .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
        })
        .unwrap_or(0.0);
    Ok(EnhancementReport {
        times: with.times.clone(),
        liquid_fraction_with_g: fraction(&with),
        liquid_fraction_without_g: fraction(&without),
        final_state_gap: gap,
    })
}

/// Smallest `g'(x)` over the samples; the effective diffusivity `Psi' + g'` dominates `Psi'`
/// exactly when this is nonnegative.
pub fn diffusion_dominance_margin(phase: &PhaseFunctions, samples: &[f64]) -> f64 {
    samples
        .iter()
        .map(|&x| (phase.psi_prime(x) + phase.g_prime(x)) - phase.psi_prime(x))
        .fold(f64::INFINITY, f64::min)
}
