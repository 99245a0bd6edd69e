//! Constitutive nonlinearities in the enthalpy variable.
//!
//! The enthalpy map `gamma~(r) = C(r) + l * clamp(r / delta, 0, 1)` is piecewise linear, so
//! its inverse is exact. The turbulence profile `eta` vanishes below `eps`, rises with a
//! quadratic blend on `[eps, 2 eps]`, is linear with slope `eta_slope` beyond, and may
//! saturate smoothly at `eta_sat`. `Gamma = eta o gamma~^{-1}` is therefore a piecewise
//! quadratic C^1 function of the enthalpy, and both the Ito corrector
//! `g = 1/4 int_0 (Gamma')^2` and the primitive of `Gamma` are integrated exactly piece by
//! piece.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Raw material parameters. `eta_sat = None` means no saturation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseParams {
    pub c1: f64,
    pub c2: f64,
    pub k1: f64,
    pub k2: f64,
    pub latent: f64,
    pub delta: f64,
    pub eps: f64,
    pub eta_slope: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_sat: Option<f64>,
}

impl Default for PhaseParams {
    fn default() -> Self {
        Self {
            c1: 2.0,
            c2: 2.0,
            k1: 1.0,
            k2: 0.5,
            latent: 1.0,
            delta: 0.1,
            eps: 0.05,
            eta_slope: 1.0,
            eta_sat: None,
        }
    }
}

const DEGREE: usize = 5;

/// Dense polynomial `sum c_m u^m` of degree < 5.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
struct Poly([f64; DEGREE]);

impl Poly {
    fn eval(&self, u: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, &c| acc * u + c)
    }

    fn derivative(&self) -> Poly {
        let mut out = [0.0; DEGREE];
        for m in 1..DEGREE {
            out[m - 1] = self.0[m] * m as f64;
        }
        Poly(out)
    }

    fn antiderivative(&self) -> Poly {
        let mut out = [0.0; DEGREE];
        for m in 0..DEGREE - 1 {
            out[m + 1] = self.0[m] / (m + 1) as f64;
        }
        debug_assert!(self.0[DEGREE - 1] == 0.0, "degree overflow");
        Poly(out)
    }

    fn mul(&self, other: &Poly) -> Poly {
        let mut out = [0.0; DEGREE];
        for (i, &a) in self.0.iter().enumerate() {
            for (j, &b) in other.0.iter().enumerate() {
                if a != 0.0 && b != 0.0 {
                    debug_assert!(i + j < DEGREE, "degree overflow");
                    out[i + j] += a * b;
                }
            }
        }
        Poly(out)
    }

    fn scale(&self, s: f64) -> Poly {
        Poly(self.0.map(|c| c * s))
    }

    /// `p(c + b u)` as a polynomial in `u`.
    fn compose_affine(&self, c: f64, b: f64) -> Poly {
        let lin = Poly([c, b, 0.0, 0.0, 0.0]);
        let mut out = Poly::default();
        for &coef in self.0.iter().rev() {
            out = out.mul(&lin);
            out.0[0] += coef;
        }
        out
    }
}

/// Piecewise polynomial on the real line. Piece `i` covers `(knots[i-1], knots[i]]` and is
/// written in the local variable `x - anchor[i]`.
#[derive(Clone, Debug)]
struct Piecewise {
    knots: Vec<f64>,
    anchors: Vec<f64>,
    polys: Vec<Poly>,
}

impl Piecewise {
    fn new(knots: Vec<f64>, polys: Vec<Poly>) -> Self {
        assert_eq!(polys.len(), knots.len() + 1);
        let anchors = (0..polys.len())
            .map(|i| knots[i.saturating_sub(1)])
            .collect();
        Self {
            knots,
            anchors,
            polys,
        }
    }

    #[inline]
    fn piece(&self, x: f64) -> usize {
        self.knots.partition_point(|&k| k < x)
    }

    #[inline]
    fn eval_in(&self, i: usize, x: f64) -> f64 {
        self.polys[i].eval(x - self.anchors[i])
    }

    #[inline]
    fn eval(&self, x: f64) -> f64 {
        self.eval_in(self.piece(x), x)
    }

    fn map(&self, f: impl Fn(&Poly) -> Poly) -> Piecewise {
        Piecewise::new(self.knots.clone(), self.polys.iter().map(f).collect())
    }

    fn derivative(&self) -> Piecewise {
        self.map(Poly::derivative)
    }

    /// Continuous antiderivative vanishing at `origin`.
    fn antiderivative(&self, origin: f64) -> Piecewise {
        let mut polys: Vec<Poly> = self.polys.iter().map(Poly::antiderivative).collect();
        for i in 1..polys.len() {
            let left = polys[i - 1].eval(self.knots[i - 1] - self.anchors[i - 1]);
            polys[i].0[0] += left;
        }
        let mut out = Piecewise::new(self.knots.clone(), polys);
        let shift = out.eval(origin);
        for p in &mut out.polys {
            p.0[0] -= shift;
        }
        out
    }
}

/// The constitutive maps of the smoothed problem, fixed at construction.
#[derive(Clone, Debug)]
pub struct PhaseFunctions {
    params: PhaseParams,
    mushy_slope: f64,
    x_delta: f64,
    psi0: f64,
    lip_psi: f64,
    lip_gamma: f64,
    eta: Piecewise,
    gamma: Piecewise,
    gamma_prime: Piecewise,
    gamma_primitive: Piecewise,
    corrector: Piecewise,
    corrector_prime: Piecewise,
}

fn check_positive(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be a positive finite number, got {v}")))
    }
}

impl PhaseFunctions {
    pub fn new(params: PhaseParams) -> Result<Self> {
        let p = params;
        for (name, v) in [
            ("phase.c1", p.c1),
            ("phase.c2", p.c2),
            ("phase.k1", p.k1),
            ("phase.k2", p.k2),
            ("phase.latent", p.latent),
            ("phase.delta", p.delta),
            ("phase.eps", p.eps),
            ("phase.eta_slope", p.eta_slope),
        ] {
            check_positive(name, v)?;
        }
        if p.c1.min(p.c2) <= 1.0 {
            return Err(Error::invalid(
                "phase.c1/c2",
                "min(c1, c2) must exceed 1 so that the inverse enthalpy map has slope < 1",
            ));
        }
        if let Some(sat) = p.eta_sat {
            check_positive("phase.eta_sat", sat)?;
            if sat < p.eta_slope * p.eps {
                return Err(Error::invalid(
                    "phase.eta_sat",
                    format!("must be at least eta_slope * eps = {}", p.eta_slope * p.eps),
                ));
            }
        }

        let mushy_slope = p.c2 + p.latent / p.delta;
        let x_delta = p.c2 * p.delta + p.latent;
        let psi0 = p.k1.min(p.k2) / p.c1.max(mushy_slope);
        let lip_psi = p.k1.max(p.k2) / p.c1.min(p.c2);
        let lip_gamma = p.eta_slope / p.c1.min(p.c2);

        let eta = eta_profile(&p);
        let mut this = Self {
            params,
            mushy_slope,
            x_delta,
            psi0,
            lip_psi,
            lip_gamma,
            eta,
            gamma: Piecewise::new(vec![0.0], vec![Poly::default(); 2]),
            gamma_prime: Piecewise::new(vec![0.0], vec![Poly::default(); 2]),
            gamma_primitive: Piecewise::new(vec![0.0], vec![Poly::default(); 2]),
            corrector: Piecewise::new(vec![0.0], vec![Poly::default(); 2]),
            corrector_prime: Piecewise::new(vec![0.0], vec![Poly::default(); 2]),
        };
        this.gamma = this.compose_eta();
        this.gamma_prime = this.gamma.derivative();
        this.gamma_primitive = this.gamma.antiderivative(0.0);
        this.corrector_prime = this
            .gamma_prime
            .map(|q| q.mul(q).scale(0.25));
        this.corrector = this.corrector_prime.antiderivative(0.0);
        Ok(this)
    }

    // Gamma as a piecewise polynomial in the enthalpy variable.
    fn compose_eta(&self) -> Piecewise {
        let mut knots = vec![0.0, self.x_delta];
        knots.extend(self.eta.knots.iter().map(|&t| self.gamma_tilde(t)));
        knots.sort_by(f64::total_cmp);
        knots.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * (1.0 + b.abs()));

        let pieces = knots.len() + 1;
        let mut polys = Vec::with_capacity(pieces);
        for i in 0..pieces {
            let anchor = knots[i.saturating_sub(1)];
            let probe = if i == 0 {
                knots[0] - 1.0
            } else if i == knots.len() {
                knots[i - 1] + 1.0
            } else {
                0.5 * (knots[i - 1] + knots[i])
            };
            let b = self.gamma_tilde_inv_prime(probe);
            let theta_anchor = self.gamma_tilde_inv(anchor);
            let e = self.eta.piece(self.gamma_tilde_inv(probe));
            let c = theta_anchor - self.eta.anchors[e];
            polys.push(self.eta.polys[e].compose_affine(c, b));
        }
        Piecewise::new(knots, polys)
    }

    pub fn params(&self) -> &PhaseParams {
        &self.params
    }

    /// Lower bound on `Psi'`, `min(k1, k2) / max(c1, c2 + l / delta)`.
    pub fn psi0(&self) -> f64 {
        self.psi0
    }

    pub fn lip_psi(&self) -> f64 {
        self.lip_psi
    }

    pub fn lip_gamma(&self) -> f64 {
        self.lip_gamma
    }

    pub fn lip_g(&self) -> f64 {
        0.25 * self.lip_gamma * self.lip_gamma
    }

    /// Enthalpy at the liquid edge of the mushy region, `gamma~(delta)`.
    pub fn liquidus_enthalpy(&self) -> f64 {
        self.x_delta
    }

    /// Enthalpy below which `Gamma` vanishes, `gamma~(eps)`.
    pub fn turbulence_onset(&self) -> f64 {
        self.gamma_tilde(self.params.eps)
    }

    /// Enthalpy values where some nonlinearity changes polynomial piece.
    pub fn knots(&self) -> &[f64] {
        &self.gamma.knots
    }

    pub fn gamma_tilde(&self, r: f64) -> f64 {
        let p = &self.params;
        if r <= 0.0 {
            p.c1 * r
        } else if r < p.delta {
            self.mushy_slope * r
        } else {
            p.c2 * r + p.latent
        }
    }

    pub fn gamma_tilde_inv(&self, x: f64) -> f64 {
        let p = &self.params;
        if x <= 0.0 {
            x / p.c1
        } else if x < self.x_delta {
            x / self.mushy_slope
        } else {
            (x - p.latent) / p.c2
        }
    }

    pub fn gamma_tilde_inv_prime(&self, x: f64) -> f64 {
        let p = &self.params;
        if x <= 0.0 {
            1.0 / p.c1
        } else if x < self.x_delta {
            1.0 / self.mushy_slope
        } else {
            1.0 / p.c2
        }
    }

    /// Kirchhoff transform of the conductivity, `K(r) = k1 r` (solid) or `k2 r` (liquid).
    pub fn kirchhoff(&self, r: f64) -> f64 {
        if r <= 0.0 {
            self.params.k1 * r
        } else {
            self.params.k2 * r
        }
    }

    /// `Psi = K o gamma~^{-1}`.
    #[inline]
    pub fn psi(&self, x: f64) -> f64 {
        self.kirchhoff(self.gamma_tilde_inv(x))
    }

    pub fn psi_prime(&self, x: f64) -> f64 {
        let k = if x <= 0.0 { self.params.k1 } else { self.params.k2 };
        k * self.gamma_tilde_inv_prime(x)
    }

    pub fn eta(&self, theta: f64) -> f64 {
        self.eta.eval(theta)
    }

    /// `Gamma = eta o gamma~^{-1}`.
    pub fn gamma(&self, x: f64) -> f64 {
        self.gamma.eval(x)
    }

    pub fn gamma_prime(&self, x: f64) -> f64 {
        self.gamma_prime.eval(x)
    }

    /// Primitive of `Gamma` vanishing at 0.
    pub fn gamma_primitive(&self, x: f64) -> f64 {
        self.gamma_primitive.eval(x)
    }

    /// Ito corrector `g(x) = 1/4 int_0^x Gamma'(y)^2 dy`.
    pub fn g(&self, x: f64) -> f64 {
        self.corrector.eval(x)
    }

    pub fn g_prime(&self, x: f64) -> f64 {
        self.corrector_prime.eval(x)
    }

    /// `(Psi(x) + g(x), Gamma(x))` with a single piece lookup for the polynomial parts.
    #[inline]
    pub(crate) fn drift_and_transport(&self, x: f64) -> (f64, f64) {
        let i = self.gamma.piece(x);
        (
            self.psi(x) + self.corrector.eval_in(i, x),
            self.gamma.eval_in(i, x),
        )
    }

    /// `(Psi(x), Gamma(x))`, the uncorrected pair used by the Stratonovich stepper.
    #[inline]
    pub(crate) fn psi_and_transport(&self, x: f64) -> (f64, f64) {
        (self.psi(x), self.gamma.eval(x))
    }

    /// Fraction of samples whose temperature is positive.
    pub fn liquid_fraction(&self, enthalpy: &[f64]) -> f64 {
        let liquid = enthalpy
            .iter()
            .filter(|&&x| self.gamma_tilde_inv(x) > 0.0)
            .count();
        liquid as f64 / enthalpy.len() as f64
    }
}

fn eta_profile(p: &PhaseParams) -> Piecewise {
    let (eps, s) = (p.eps, p.eta_slope);
    let zero = Poly::default();
    let blend = Poly([0.0, 0.0, 0.5 * s / eps, 0.0, 0.0]);
    let linear = Poly([0.5 * s * eps, s, 0.0, 0.0, 0.0]);
    match p.eta_sat {
        None => Piecewise::new(vec![eps, 2.0 * eps], vec![zero, blend, linear]),
        Some(sat) => {
            let width = sat / s;
            let start = 0.5 * sat / s + 1.5 * eps;
            let roll = Poly([0.5 * sat, s, -0.5 * s / width, 0.0, 0.0]);
            let flat = Poly([sat, 0.0, 0.0, 0.0, 0.0]);
            let mut knots = vec![eps, 2.0 * eps, start, start + width];
            let mut polys = vec![zero, blend, linear, roll, flat];
            if start - 2.0 * eps <= 1e-15 * start {
                // saturation begins right at the end of the onset blend
                knots.remove(1);
                polys.remove(2);
            }
            Piecewise::new(knots, polys)
        }
    }
}
