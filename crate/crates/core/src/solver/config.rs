use std::f64::consts::{PI, TAU};

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::NoiseSpec;
use crate::phase::PhaseFunctions;
use crate::spectral::{ScalarField, TorusGrid};

/// Time discretisation of the transport noise.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Euler-Maruyama on the Ito form, corrector `Delta g` included.
    #[default]
    ItoImex,
    /// One midpoint pass on the Stratonovich form, no corrector.
    StratonovichMidpoint,
}

/// `a cos(2 pi k.x) + b sin(2 pi k.x)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierTerm {
    pub k: [i64; 2],
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

/// The source term `F`, constant in time.
#[derive(Clone, Debug, Default, PartialEq)]
pub enum Forcing {
    #[default]
    Zero,
    Fourier(Vec<FourierTerm>),
    Field(ScalarField),
}

impl Forcing {
    pub fn is_zero(&self) -> bool {
        match self {
            Forcing::Zero => true,
            Forcing::Fourier(terms) => terms.iter().all(|t| t.cos == 0.0 && t.sin == 0.0),
            Forcing::Field(f) => f.values().iter().all(|&v| v == 0.0),
        }
    }

    pub fn sample(&self, grid: &TorusGrid) -> Result<ScalarField> {
        match self {
            Forcing::Zero => Ok(ScalarField::zeros(grid)),
            Forcing::Fourier(terms) => {
                for t in terms {
                    if !(t.cos.is_finite() && t.sin.is_finite()) {
                        return Err(Error::invalid("forcing", "coefficients must be finite"));
                    }
                    if 2 * t.k[0].abs() >= grid.n() as i64 || 2 * t.k[1].abs() >= grid.n() as i64 {
                        return Err(Error::invalid(
                            "forcing",
                            format!("mode {:?} is not resolved on an {}-grid", t.k, grid.n()),
                        ));
                    }
                }
                Ok(ScalarField::from_fn(grid, |x| {
                    terms
                        .iter()
                        .map(|t| {
                            let ph = TAU * (t.k[0] as f64 * x[0] + t.k[1] as f64 * x[1]);
                            t.cos * ph.cos() + t.sin * ph.sin()
                        })
                        .sum()
                }))
            }
            Forcing::Field(f) => {
                grid.check_same(f.grid())?;
                if !f.is_finite() {
                    return Err(Error::NonFinite("forcing"));
                }
                Ok(f.clone())
            }
        }
    }

    pub(crate) fn bins(&self, grid: &TorusGrid) -> Result<Option<Vec<Complex64>>> {
        if self.is_zero() {
            return Ok(None);
        }
        Ok(Some(self.sample(grid)?.bins().to_vec()))
    }
}

/// Initial enthalpy profiles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialCondition {
    Zero,
    Constant {
        value: f64,
    },
    /// `lo + (hi - lo) exp(kappa (cos 2 pi x1 + cos 2 pi x2 - 2))`, a smooth periodic bump.
    Blob {
        lo: f64,
        hi: f64,
        kappa: f64,
    },
    /// `mean + sum of Fourier terms`.
    Fourier {
        mean: f64,
        terms: Vec<FourierTerm>,
    },
}

impl Default for InitialCondition {
    fn default() -> Self {
        InitialCondition::Blob {
            lo: -1.0,
            hi: 2.0,
            kappa: 2.0,
        }
    }
}

impl InitialCondition {
    pub fn sample(&self, grid: &TorusGrid) -> Result<ScalarField> {
        let field = match self {
            InitialCondition::Zero => ScalarField::zeros(grid),
            InitialCondition::Constant { value } => ScalarField::constant(grid, *value),
            InitialCondition::Blob { lo, hi, kappa } => {
                if *kappa < 0.0 {
                    return Err(Error::invalid("initial.kappa", "must be nonnegative"));
                }
                ScalarField::from_fn(grid, |x| {
                    let c = (2.0 * PI * x[0]).cos() + (2.0 * PI * x[1]).cos() - 2.0;
                    lo + (hi - lo) * (kappa * c).exp()
                })
            }
            InitialCondition::Fourier { mean, terms } => {
                let f = Forcing::Fourier(terms.clone()).sample(grid)?;
                f.map(|v| v + mean)
            }
        };
        if field.is_finite() {
            Ok(field)
        } else {
            Err(Error::NonFinite("initial condition"))
        }
    }
}

/// Deterministic run parameters, shared with the stochastic solver.
#[derive(Clone, Debug)]
pub struct LimitConfig {
    pub grid: TorusGrid,
    pub dt: f64,
    pub t_end: f64,
    /// Coefficient of the implicit shift `a Delta`.
    pub imex_a: f64,
    pub forcing: Forcing,
    pub phase: PhaseFunctions,
    /// Record every `stride` steps.
    pub stride: usize,
}

impl LimitConfig {
    /// Stride 1, no forcing, `imex_a = Lip(Psi) + Lip(g)`.
    pub fn new(grid: &TorusGrid, phase: PhaseFunctions, dt: f64, t_end: f64) -> Self {
        Self {
            grid: grid.clone(),
            dt,
            t_end,
            imex_a: phase.lip_psi() + phase.lip_g(),
            forcing: Forcing::Zero,
            phase,
            stride: 1,
        }
    }

    pub fn with_forcing(mut self, forcing: Forcing) -> Self {
        self.forcing = forcing;
        self
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.stride = stride;
        self
    }

    pub fn with_imex_a(mut self, a: f64) -> Self {
        self.imex_a = a;
        self
    }

    /// Number of steps `T / dt`; the ratio must be an integer to within `1e-9`.
    pub fn steps(&self) -> Result<usize> {
        let r = self.t_end / self.dt;
        let steps = r.round();
        if !(r.is_finite() && steps >= 1.0 && (r - steps).abs() <= 1e-9 * r.max(1.0)) {
            return Err(Error::invalid(
                "time",
                format!("t_end / dt = {r} is not a positive integer"),
            ));
        }
        Ok(steps as usize)
    }

    /// Largest Laplace symbol touched by the explicit remainder.
    fn max_symbol(&self) -> f64 {
        let half = self.grid.n() as f64 / 2.0;
        4.0 * PI * PI * half * half
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::invalid("time.dt", "must be positive"));
        }
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(Error::invalid("time.t_end", "must be positive"));
        }
        let steps = self.steps()?;
        if self.stride == 0 || steps % self.stride != 0 {
            return Err(Error::invalid(
                "time.stride",
                format!("must divide the step count {steps}"),
            ));
        }
        let need = self.phase.lip_psi() + self.phase.lip_g();
        if !self.imex_a.is_finite() || self.imex_a < need * (1.0 - 1e-12) {
            return Err(Error::invalid(
                "time.imex_a",
                format!("must be at least Lip(Psi) + Lip(g) = {need}"),
            ));
        }
        let explicit = self.dt * self.max_symbol() * (need - self.imex_a).max(0.0);
        if explicit > 0.5 {
            return Err(Error::invalid(
                "time.dt",
                format!("explicit remainder bound {explicit} exceeds 0.5"),
            ));
        }
        self.forcing.sample(&self.grid)?;
        Ok(())
    }

    pub(crate) fn inverse_denominators(&self) -> Vec<f64> {
        self.grid
            .laplace_symbol()
            .iter()
            .map(|l| 1.0 / (1.0 + self.dt * self.imex_a * l))
            .collect()
    }
}

/// Stochastic run parameters.
#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub base: LimitConfig,
    pub noise: NoiseSpec,
    pub scheme: Scheme,
}

impl SolverConfig {
    pub fn new(base: LimitConfig, noise: NoiseSpec) -> Self {
        Self {
            base,
            noise,
            scheme: Scheme::ItoImex,
        }
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    /// `dt * sup|u|^2 * Lip(Gamma)^2 * max_k lambda_k / (1 + dt a lambda_k)^2` over the
    /// dealiased band: the mean-square growth one noise increment can cause through the
    /// implicit solve.
    pub fn noise_stability_bound(&self) -> f64 {
        let b = &self.base;
        let keep = b.grid.dealias_mask();
        let worst = b
            .grid
            .laplace_symbol()
            .iter()
            .zip(keep)
            .filter(|(_, &k)| k)
            .map(|(l, _)| l / (1.0 + b.dt * b.imex_a * l).powi(2))
            .fold(0.0, f64::max);
        let lip = b.phase.lip_gamma();
        b.dt * self.noise.family().velocity_bound() * lip * lip * worst
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        self.base.grid.check_same(self.noise.grid())?;
        let bound = self.noise_stability_bound();
        if bound > 1.0 {
            return Err(Error::invalid(
                "time.dt",
                format!("noise stability bound {bound} exceeds 1"),
            ));
        }
        Ok(())
    }
}
