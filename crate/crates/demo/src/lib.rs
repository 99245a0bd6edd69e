//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Errors cross the boundary as strings.

use stefan_spde::noise::{make_family, NoiseSpec};
use stefan_spde::phase::{PhaseFunctions, PhaseParams};
use stefan_spde::solver::{InitialCondition, Integrator, LimitConfig, SolverConfig};
use stefan_spde::spectral::{h_norm, ScalarField, TorusGrid};
use stefan_spde::validate::{asymmetric_family, structure_identity_error};
use wasm_bindgen::prelude::*;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn phase_with(latent: f64, eta_slope: f64) -> Result<PhaseFunctions, String> {
    PhaseFunctions::new(PhaseParams {
        latent,
        eta_slope,
        ..PhaseParams::default()
    })
    .map_err(err)
}

/// Samples the constitutive curves on `[lo, hi]`.
///
/// Returns five consecutive blocks of `samples` values: enthalpy, temperature, `Psi`,
/// `Gamma` and `g`.
#[wasm_bindgen]
pub fn phase_curves(latent: f64, eta_slope: f64, lo: f64, hi: f64, samples: usize) -> Result<Vec<f64>, String> {
    if samples < 2 || hi.is_nan() || lo.is_nan() || hi <= lo {
        return Err("need samples >= 2 and hi > lo".into());
    }
    let p = phase_with(latent, eta_slope)?;
    let xs: Vec<f64> = (0..samples)
        .map(|i| lo + (hi - lo) * i as f64 / (samples - 1) as f64)
        .collect();
    let mut out = xs.clone();
    out.extend(xs.iter().map(|&x| p.gamma_tilde_inv(x)));
    out.extend(xs.iter().map(|&x| p.psi(x)));
    out.extend(xs.iter().map(|&x| p.gamma(x)));
    out.extend(xs.iter().map(|&x| p.g(x)));
    Ok(out)
}

/// `max |sum alpha_k^2 sigma_k (x) sigma_k - I/2|` for the flat family of radius `radius`,
/// with the axis modes scaled by `axis_factor` (1 keeps the family radial).
#[wasm_bindgen]
pub fn structure_identity(radius: u32, axis_factor: f64) -> Result<f64, String> {
    let family = asymmetric_family(radius, axis_factor).map_err(err)?;
    Ok(structure_identity_error(&family, 200, 0))
}

/// A stochastic path and the limit solution from the same initial blob, stepped together.
#[wasm_bindgen]
pub struct Simulation {
    phase: PhaseFunctions,
    stochastic: Integrator,
    limit: Integrator,
    x: Vec<f64>,
    y: Vec<f64>,
    grid: TorusGrid,
    step: u64,
    dt: f64,
}

#[wasm_bindgen]
impl Simulation {
    #[wasm_bindgen(constructor)]
    pub fn new(n: usize, radius: u32, seed: u64, dt: f64, latent: f64, eta_slope: f64) -> Result<Simulation, String> {
        let grid = TorusGrid::new(n).map_err(err)?;
        let phase = phase_with(latent, eta_slope)?;
        let base = LimitConfig::new(&grid, phase.clone(), dt, dt);
        base.validate().map_err(err)?;
        let noise = NoiseSpec::new(make_family(radius).map_err(err)?, &grid, seed).map_err(err)?;
        let cfg = SolverConfig::new(base.clone(), noise);
        cfg.validate().map_err(err)?;
        let x0 = InitialCondition::default().sample(&grid).map_err(err)?;
        Ok(Simulation {
            stochastic: Integrator::stochastic(&cfg).map_err(err)?,
            limit: Integrator::deterministic(&base).map_err(err)?,
            x: x0.values().to_vec(),
            y: x0.into_values(),
            phase,
            grid,
            step: 0,
            dt,
        })
    }

    pub fn advance(&mut self, steps: u32) -> Result<(), String> {
        for _ in 0..steps {
            self.stochastic.step(&mut self.x, self.step, 0).map_err(err)?;
            self.limit.step(&mut self.y, self.step, 0).map_err(err)?;
            self.step += 1;
        }
        Ok(())
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.dt
    }

    pub fn n(&self) -> usize {
        self.grid.n()
    }

    pub fn liquid_fraction_stochastic(&self) -> f64 {
        self.phase.liquid_fraction(&self.x)
    }

    pub fn liquid_fraction_limit(&self) -> f64 {
        self.phase.liquid_fraction(&self.y)
    }

    /// `|X - Xbar|` in `H^{-1}`.
    pub fn distance(&self) -> Result<f64, String> {
        let d: Vec<f64> = self.x.iter().zip(&self.y).map(|(a, b)| a - b).collect();
        let f = ScalarField::from_values(&self.grid, d).map_err(err)?;
        h_norm(&f, -1.0).map_err(err)
    }

    pub fn rgba_stochastic(&self) -> Vec<u8> {
        self.rgba(&self.x)
    }

    pub fn rgba_limit(&self) -> Vec<u8> {
        self.rgba(&self.y)
    }

    fn rgba(&self, values: &[f64]) -> Vec<u8> {
        let mut out = Vec::with_capacity(values.len() * 4);
        for &v in values {
            out.extend_from_slice(&colour(self.phase.gamma_tilde_inv(v), self.phase.params().delta));
        }
        out
    }
}

/// Solid blue, mushy white, liquid red; saturates at temperature `-1` and `1`.
fn colour(theta: f64, delta: f64) -> [u8; 4] {
    let c = |t: f64| (255.0 * t.clamp(0.0, 1.0)).round() as u8;
    if theta < 0.0 {
        let t = (-theta).min(1.0);
        [c(1.0 - t), c(1.0 - 0.6 * t), 255, 255]
    } else if theta < delta {
        [255, c(1.0 - 0.3 * theta / delta), c(1.0 - 0.6 * theta / delta), 255]
    } else {
        let t = theta.min(1.0);
        [255, c(0.7 - 0.6 * t), c(0.4 - 0.4 * t), 255]
    }
}
