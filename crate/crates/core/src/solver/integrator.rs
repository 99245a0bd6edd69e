use rustfft::num_complex::Complex64;

use super::config::{LimitConfig, Scheme, SolverConfig};
use crate::error::{Error, Result};
use crate::noise::NoiseSpec;
use crate::phase::PhaseFunctions;
use crate::spectral::TorusGrid;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Reusable stepping workspace for one path.
///
/// Real fields are packed in pairs into one complex FFT and separated with the Hermitian
/// symmetry of real spectra, so an Ito step costs five transforms and a noiseless step two.
/// The transport increment is added inside the implicit solve.
#[derive(Clone)]
pub struct Integrator {
    grid: TorusGrid,
    phase: PhaseFunctions,
    dt: f64,
    a: f64,
    scheme: Scheme,
    noise: Option<NoiseSpec>,
    forcing: Option<Vec<Complex64>>,
    inv_denom: Vec<f64>,
    mirror: Vec<usize>,
    packed: Vec<Complex64>,
    p_hat: Vec<Complex64>,
    g_hat: Vec<Complex64>,
    x_hat: Vec<Complex64>,
    grad: Vec<Complex64>,
    vel: Vec<Complex64>,
    scratch: Vec<Complex64>,
    incr: Vec<f64>,
    h1_sq: f64,
    transport_ready: bool,
}

/// `packed = A + iB` with `A`, `B` real: writes the spectra of `A` and `B`.
fn split(packed: &[Complex64], mirror: &[usize], a: &mut [Complex64], b: &mut [Complex64]) {
    for q in 0..packed.len() {
        let s = packed[q];
        let t = packed[mirror[q]].conj();
        a[q] = (s + t) * 0.5;
        b[q] = (s - t) * Complex64::new(0.0, -0.5);
    }
}

impl Integrator {
    /// Noiseless integrator for the limit equation.
    pub fn deterministic(cfg: &LimitConfig) -> Result<Self> {
        cfg.validate()?;
        Self::build(cfg, None, Scheme::ItoImex)
    }

    /// Noiseless integrator with the corrector `g` dropped.
    pub fn uncorrected(cfg: &LimitConfig) -> Result<Self> {
        cfg.validate()?;
        Self::build(cfg, None, Scheme::StratonovichMidpoint)
    }

    pub fn stochastic(cfg: &SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let noise = (!cfg.noise.family().is_silent()).then(|| cfg.noise.clone());
        Self::build(&cfg.base, noise, cfg.scheme)
    }

    fn build(cfg: &LimitConfig, noise: Option<NoiseSpec>, scheme: Scheme) -> Result<Self> {
        let grid = cfg.grid.clone();
        let len = grid.len();
        Ok(Self {
            phase: cfg.phase.clone(),
            dt: cfg.dt,
            a: cfg.imex_a,
            scheme,
            forcing: cfg.forcing.bins(&grid)?,
            inv_denom: cfg.inverse_denominators(),
            mirror: (0..len).map(|q| grid.mirror(q)).collect(),
            packed: vec![ZERO; len],
            p_hat: vec![ZERO; len],
            g_hat: vec![ZERO; len],
            x_hat: vec![ZERO; len],
            grad: vec![ZERO; len],
            vel: vec![ZERO; len],
            scratch: grid.scratch(),
            incr: Vec::new(),
            h1_sq: 0.0,
            transport_ready: false,
            noise,
            grid,
        })
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn phase(&self) -> &PhaseFunctions {
        &self.phase
    }

    /// `None` when the noise is switched off (all `alpha_k = 0`).
    pub fn noise(&self) -> Option<&NoiseSpec> {
        self.noise.as_ref()
    }

    /// Increments used by the last [`Integrator::step`], in noise-mode order.
    pub fn increments(&self) -> &[f64] {
        &self.incr
    }

    /// `|grad X|_2^2` of the state the last step started from.
    pub fn pre_step_h1_squared(&self) -> f64 {
        self.h1_sq
    }

    /// Spectrum of `Gamma(X)` at the start of the last noisy Ito step.
    pub fn pre_step_transport_bins(&self) -> Option<&[Complex64]> {
        self.transport_ready.then_some(&self.g_hat[..])
    }

    /// Advances `x` by one step, drawing the increments of `(step, replica)`.
    pub fn step(&mut self, x: &mut [f64], step: u64, replica: u64) -> Result<()> {
        let mut incr = std::mem::take(&mut self.incr);
        match &self.noise {
            Some(spec) => spec.increments_into(step, self.dt, replica, &mut incr),
            None => incr.clear(),
        }
        let out = self.step_with_increments(x, &incr);
        self.incr = incr;
        out
    }

    /// Advances `x` by one step with the given increments (ignored without noise).
    pub fn step_with_increments(&mut self, x: &mut [f64], incr: &[f64]) -> Result<()> {
        if x.len() != self.grid.len() {
            return Err(Error::SizeMismatch {
                expected: self.grid.len(),
                found: x.len(),
            });
        }
        if let Some(spec) = &self.noise {
            if incr.len() != spec.modes().len() {
                return Err(Error::SizeMismatch {
                    expected: spec.modes().len(),
                    found: incr.len(),
                });
            }
        }
        self.transport_ready = false;
        match (self.noise.is_some(), self.scheme) {
            (false, Scheme::ItoImex) => self.step_smooth(x, true),
            (false, Scheme::StratonovichMidpoint) => self.step_smooth(x, false),
            (true, Scheme::ItoImex) => self.step_ito(x, incr),
            (true, Scheme::StratonovichMidpoint) => self.step_stratonovich(x, incr),
        }
        if x.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite("state"))
        }
    }

    fn record_h1(&mut self) {
        let lap = self.grid.laplace_symbol();
        self.h1_sq = self
            .x_hat
            .iter()
            .zip(lap)
            .map(|(c, l)| l * c.norm_sqr())
            .sum();
    }

    /// `x <- IFFT[(x_hat + dt(-lambda (p_hat - a x_hat) + f_hat) - mask w_hat) / (1 + dt a lambda)]`
    /// with `w_hat` read from `self.grad` when `transport` is set.
    fn implicit_update(&mut self, x: &mut [f64], transport: bool) {
        let lap = self.grid.laplace_symbol();
        let keep = self.grid.dealias_mask();
        let (dt, a) = (self.dt, self.a);
        for q in 0..x.len() {
            let mut rhs = self.x_hat[q] + (self.x_hat[q] * a - self.p_hat[q]) * (dt * lap[q]);
            if let Some(f) = &self.forcing {
                rhs += f[q] * dt;
            }
            if transport && q != 0 && keep[q] {
                rhs -= self.grad[q];
            }
            self.packed[q] = rhs * self.inv_denom[q];
        }
        self.grid.inverse(&mut self.packed, &mut self.scratch);
        for (v, c) in x.iter_mut().zip(&self.packed) {
            *v = c.re;
        }
    }

    fn step_smooth(&mut self, x: &mut [f64], corrected: bool) {
        for (c, &v) in self.packed.iter_mut().zip(x.iter()) {
            let p = if corrected {
                self.phase.drift_and_transport(v).0
            } else {
                self.phase.psi(v)
            };
            *c = Complex64::new(p, v);
        }
        self.grid.forward(&mut self.packed, &mut self.scratch);
        split(&self.packed, &self.mirror, &mut self.p_hat, &mut self.x_hat);
        self.record_h1();
        self.implicit_update(x, false);
    }

    /// `vel <- sum_k alpha_k dbeta_k sigma_k`, packed as `u1 + i u2` in physical space.
    fn build_velocity(&mut self, incr: &[f64]) {
        let spec = self.noise.as_ref().expect("noisy step");
        self.vel.fill(ZERO);
        for (m, &db) in spec.modes().iter().zip(incr) {
            let s = m.alpha * db;
            self.vel[m.bins[0]] += m.weights[0] * s;
            self.vel[m.bins[1]] += m.weights[1] * s;
        }
        self.grid.inverse(&mut self.vel, &mut self.scratch);
    }

    /// `grad <- grad G` packed as `d1 G + i d2 G` in physical space, from `g_hat`.
    fn gradient_of_transport(&mut self) {
        let d1 = self.grid.derivative_symbol(0);
        let d2 = self.grid.derivative_symbol(1);
        for q in 0..self.grad.len() {
            let g = self.g_hat[q];
            // i d1 g + i (i d2 g)
            self.grad[q] = Complex64::new(-d1[q] * g.im - d2[q] * g.re, d1[q] * g.re - d2[q] * g.im);
        }
        self.grid.inverse(&mut self.grad, &mut self.scratch);
    }

    /// `packed <- (vel . grad) + i x` and transform; leaves `w_hat` in `grad`, `x_hat` set.
    fn transport_and_state_spectra(&mut self, x: &[f64]) {
        for ((c, v), (g, &xv)) in self
            .packed
            .iter_mut()
            .zip(&self.vel)
            .zip(self.grad.iter().zip(x))
        {
            *c = Complex64::new(v.re * g.re + v.im * g.im, xv);
        }
        self.grid.forward(&mut self.packed, &mut self.scratch);
        split(&self.packed, &self.mirror, &mut self.grad, &mut self.x_hat);
    }

    fn step_ito(&mut self, x: &mut [f64], incr: &[f64]) {
        let mut active = false;
        for (c, &v) in self.packed.iter_mut().zip(x.iter()) {
            let (p, g) = self.phase.drift_and_transport(v);
            active |= g != 0.0;
            *c = Complex64::new(p, g);
        }
        self.grid.forward(&mut self.packed, &mut self.scratch);
        split(&self.packed, &self.mirror, &mut self.p_hat, &mut self.g_hat);
        self.transport_ready = true;
        if active {
            self.gradient_of_transport();
            self.build_velocity(incr);
        } else {
            // Gamma(X) = 0: no transport
            self.g_hat.fill(ZERO);
            self.grad.fill(ZERO);
            self.vel.fill(ZERO);
        }
        self.transport_and_state_spectra(x);
        self.record_h1();
        self.implicit_update(x, true);
    }

    fn step_stratonovich(&mut self, x: &mut [f64], incr: &[f64]) {
        for (c, &v) in self.packed.iter_mut().zip(x.iter()) {
            let (p, g) = self.phase.psi_and_transport(v);
            *c = Complex64::new(p, g);
        }
        self.grid.forward(&mut self.packed, &mut self.scratch);
        split(&self.packed, &self.mirror, &mut self.p_hat, &mut self.g_hat);
        self.gradient_of_transport();
        self.build_velocity(incr);
        self.transport_and_state_spectra(x);
        self.record_h1();

        // midpoint state, mean untouched
        let keep = self.grid.dealias_mask();
        for q in 0..self.packed.len() {
            let w = if q != 0 && keep[q] { self.grad[q] } else { ZERO };
            self.packed[q] = self.x_hat[q] - w * 0.5;
        }
        self.grid.inverse(&mut self.packed, &mut self.scratch);
        for c in self.packed.iter_mut() {
            *c = Complex64::new(self.phase.gamma(c.re), 0.0);
        }
        self.grid.forward(&mut self.packed, &mut self.scratch);
        std::mem::swap(&mut self.g_hat, &mut self.packed);
        self.gradient_of_transport();
        for (c, (v, g)) in self.packed.iter_mut().zip(self.vel.iter().zip(&self.grad)) {
            *c = Complex64::new(v.re * g.re + v.im * g.im, 0.0);
        }
        self.grid.forward(&mut self.packed, &mut self.scratch);
        std::mem::swap(&mut self.grad, &mut self.packed);
        self.implicit_update(x, true);
    }
}
