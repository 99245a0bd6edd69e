//! Divergence-free transport noise: the trigonometric basis `e_k`, the fields
//! `sigma_k = k^perp / |k|^2 e_k`, radially symmetric coefficient families and
//! reproducible Brownian increments.

mod rng;

use std::f64::consts::{PI, SQRT_2};

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::TorusGrid;

pub use rng::StreamKey;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Plus,
    Minus,
}

/// A nonzero lattice wavevector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "[i64; 2]", into = "[i64; 2]")]
pub struct ModeIndex {
    k: [i64; 2],
}

impl ModeIndex {
    pub fn new(k1: i64, k2: i64) -> Result<Self> {
        if k1 == 0 && k2 == 0 {
            Err(Error::ZeroMode)
        } else {
            Ok(Self { k: [k1, k2] })
        }
    }

    pub fn k(&self) -> [i64; 2] {
        self.k
    }

    /// `Plus` iff `k1 > 0`, or `k1 == 0` and `k2 > 0`.
    pub fn parity(&self) -> Parity {
        let [k1, k2] = self.k;
        if k1 > 0 || (k1 == 0 && k2 > 0) {
            Parity::Plus
        } else {
            Parity::Minus
        }
    }

    pub fn norm_sq(&self) -> i64 {
        self.k[0] * self.k[0] + self.k[1] * self.k[1]
    }

    pub fn perp(&self) -> [i64; 2] {
        [self.k[1], -self.k[0]]
    }
}

impl TryFrom<[i64; 2]> for ModeIndex {
    type Error = Error;

    fn try_from(k: [i64; 2]) -> Result<Self> {
        ModeIndex::new(k[0], k[1])
    }
}

impl From<ModeIndex> for [i64; 2] {
    fn from(m: ModeIndex) -> Self {
        m.k
    }
}

/// All `k` with `0 < |k| <= radius`, ordered by `(|k|^2, k1, k2)`.
pub fn enumerate_modes(radius: u32) -> Vec<ModeIndex> {
    let r = radius as i64;
    let mut out = Vec::new();
    for k1 in -r..=r {
        for k2 in -r..=r {
            let m = k1 * k1 + k2 * k2;
            if m > 0 && m <= r * r {
                out.push(ModeIndex { k: [k1, k2] });
            }
        }
    }
    out.sort_by_key(|m| (m.norm_sq(), m.k[0], m.k[1]));
    out
}

#[inline]
fn phase(k: &ModeIndex, x: [f64; 2]) -> f64 {
    2.0 * PI * (k.k[0] as f64 * x[0] + k.k[1] as f64 * x[1])
}

/// `sqrt2 cos(2 pi k.x)` for `Plus` modes, `sqrt2 sin(2 pi k.x)` for `Minus` modes.
pub fn basis_e(k: &ModeIndex, x: [f64; 2]) -> f64 {
    match k.parity() {
        Parity::Plus => SQRT_2 * phase(k, x).cos(),
        Parity::Minus => SQRT_2 * phase(k, x).sin(),
    }
}

pub fn sigma(k: &ModeIndex, x: [f64; 2]) -> [f64; 2] {
    let e = basis_e(k, x) / k.norm_sq() as f64;
    let p = k.perp();
    [p[0] as f64 * e, p[1] as f64 * e]
}

/// Noise coefficients `alpha_k`, supported on `0 < |k| <= radius`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientFamily {
    radius: u32,
    modes: Vec<(ModeIndex, f64)>,
    sup_norm: f64,
}

impl CoefficientFamily {
    /// Radial family `alpha_k = c * profile(|k|)`, with `c` fixed by `sum alpha_k^2/|k|^2 = 1`.
    pub fn radial(radius: u32, profile: impl Fn(f64) -> f64) -> Result<Self> {
        if radius < 1 {
            return Err(Error::invalid("noise.radius", "must be at least 1"));
        }
        let modes = enumerate_modes(radius);
        let raw: Vec<f64> = modes
            .iter()
            .map(|m| profile((m.norm_sq() as f64).sqrt()))
            .collect();
        if raw.iter().any(|a| !a.is_finite() || *a < 0.0) {
            return Err(Error::invalid("noise.profile", "must be finite and nonnegative"));
        }
        let weight: f64 = modes
            .iter()
            .zip(&raw)
            .map(|(m, a)| a * a / m.norm_sq() as f64)
            .sum();
        if weight <= 0.0 {
            return Err(Error::invalid("noise.profile", "must not vanish identically"));
        }
        let c = weight.sqrt().recip();
        Ok(Self::from_modes(
            radius,
            modes.into_iter().zip(raw.into_iter().map(|a| a * c)).collect(),
        ))
    }

    /// Unchecked family; [`CoefficientFamily::normalization`] and
    /// [`CoefficientFamily::radial_asymmetry`] report how far it is from admissible.
    pub fn from_modes(radius: u32, modes: Vec<(ModeIndex, f64)>) -> Self {
        let sup_norm = modes.iter().fold(0.0f64, |m, (_, a)| m.max(a.abs()));
        Self {
            radius,
            modes,
            sup_norm,
        }
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn modes(&self) -> &[(ModeIndex, f64)] {
        &self.modes
    }

    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }

    /// `sum alpha_k^2 / |k|^2`.
    pub fn normalization(&self) -> f64 {
        self.modes
            .iter()
            .map(|(m, a)| a * a / m.norm_sq() as f64)
            .sum()
    }

    /// Largest spread of `alpha` within one shell `|k| = const`.
    pub fn radial_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        let mut i = 0;
        while i < self.modes.len() {
            let shell = self.modes[i].0.norm_sq();
            let mut j = i;
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            while j < self.modes.len() && self.modes[j].0.norm_sq() == shell {
                lo = lo.min(self.modes[j].1);
                hi = hi.max(self.modes[j].1);
                j += 1;
            }
            worst = worst.max(hi - lo);
            i = j;
        }
        worst
    }

    /// `sum_k alpha_k^2 sup_x |sigma_k(x)|^2`.
    pub(crate) fn velocity_bound(&self) -> f64 {
        self.modes
            .iter()
            .map(|(m, a)| 2.0 * a * a / m.norm_sq() as f64)
            .sum()
    }

    pub fn is_silent(&self) -> bool {
        self.modes.iter().all(|(_, a)| *a == 0.0)
    }
}

/// Flat truncation `alpha_k = c_N` on `0 < |k| <= N`, `c_N = (sum |k|^{-2})^{-1/2}`.
pub fn make_family(radius: u32) -> Result<CoefficientFamily> {
    CoefficientFamily::radial(radius, |_| 1.0)
}

/// `sum_k alpha_k^2 sigma_k(x) (x) sigma_k(x)`.
pub fn structure_identity_check(family: &CoefficientFamily, x: [f64; 2]) -> [[f64; 2]; 2] {
    let mut out = [[0.0; 2]; 2];
    for (m, a) in family.modes() {
        let s = sigma(m, x);
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] += a * a * s[i] * s[j];
            }
        }
    }
    out
}

/// Precomputed spectral footprint of `alpha_k sigma_k`, packed as `sigma_1 + i sigma_2`.
#[derive(Clone, Debug)]
pub struct NoiseMode {
    pub index: ModeIndex,
    pub alpha: f64,
    pub(crate) bins: [usize; 2],
    pub(crate) weights: [Complex64; 2],
}

/// Everything needed to realise the transport noise on a grid.
#[derive(Clone, Debug)]
pub struct NoiseSpec {
    family: CoefficientFamily,
    grid: TorusGrid,
    modes: Vec<NoiseMode>,
    seed: u64,
    stream_tag: u64,
    refine: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseManifest {
    #[serde(rename = "N")]
    pub radius: u32,
    pub c_n: f64,
    pub seed: u64,
    pub mode_count: usize,
}

impl NoiseSpec {
    pub fn new(family: CoefficientFamily, grid: &TorusGrid, seed: u64) -> Result<Self> {
        let n = grid.n() as i64;
        if 2 * family.radius() as i64 > n {
            return Err(Error::invalid(
                "noise.radius",
                format!("radius {} exceeds n/2 = {}", family.radius(), n / 2),
            ));
        }
        let modes = family
            .modes()
            .iter()
            .map(|&(index, alpha)| Self::footprint(grid, index, alpha))
            .collect();
        let spec = Self {
            stream_tag: family.radius() as u64,
            family,
            grid: grid.clone(),
            modes,
            seed,
            refine: 0,
        };
        let worst = spec.max_sigma_divergence();
        if worst > 1e-12 {
            return Err(Error::invalid(
                "noise",
                format!("sigma_k not divergence free on this grid ({worst:e})"),
            ));
        }
        Ok(spec)
    }

    fn footprint(grid: &TorusGrid, index: ModeIndex, alpha: f64) -> NoiseMode {
        let k = index.k();
        let rho = TorusGrid::node_phase(k);
        let p = index.perp();
        let inv = 1.0 / index.norm_sq() as f64;
        let packed = Complex64::new(p[0] as f64 * inv, p[1] as f64 * inv);
        let half = SQRT_2 / 2.0;
        let (at_k, at_minus_k) = match index.parity() {
            Parity::Plus => (Complex64::new(half, 0.0), Complex64::new(half, 0.0)),
            Parity::Minus => (Complex64::new(0.0, -half), Complex64::new(0.0, half)),
        };
        NoiseMode {
            index,
            alpha,
            bins: [grid.bin(k), grid.bin([-k[0], -k[1]])],
            weights: [packed * at_k * rho, packed * at_minus_k * rho],
        }
    }

    /// Key the streams by something other than the radius (the default).
    pub fn with_stream_tag(mut self, tag: u64) -> Self {
        self.stream_tag = tag;
        self
    }

    /// Each increment becomes the sum of `2^levels` finer increments, so that runs with
    /// `dt`, `dt/2`, ... driven by the same key share one Brownian path.
    pub fn with_brownian_refinement(mut self, levels: u32) -> Self {
        self.refine = levels;
        self
    }

    pub fn family(&self) -> &CoefficientFamily {
        &self.family
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn modes(&self) -> &[NoiseMode] {
        &self.modes
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_tag(&self) -> u64 {
        self.stream_tag
    }

    pub fn refinement(&self) -> u32 {
        self.refine
    }

    pub fn stream(&self, replica: u64) -> StreamKey {
        StreamKey {
            seed: self.seed,
            replica,
            tag: self.stream_tag,
        }
    }

    pub fn manifest(&self) -> NoiseManifest {
        NoiseManifest {
            radius: self.family.radius(),
            c_n: self.family.sup_norm(),
            seed: self.seed,
            mode_count: self.modes.len(),
        }
    }

    /// Largest spectral divergence of any stored `sigma_k`.
    pub fn max_sigma_divergence(&self) -> f64 {
        let d1 = self.grid.derivative_symbol(0);
        let d2 = self.grid.derivative_symbol(1);
        let mut worst = 0.0f64;
        for m in &self.modes {
            for (&b, &w) in m.bins.iter().zip(&m.weights) {
                // w packs sigma1 + i sigma2 with real coefficient vectors (k^perp real), so
                // component spectra are w * perp_j / (perp1 + i perp2).
                let p = m.index.perp();
                let inv = 1.0 / m.index.norm_sq() as f64;
                let scalar = w / Complex64::new(p[0] as f64 * inv, p[1] as f64 * inv);
                let div = scalar * (d1[b] * p[0] as f64 + d2[b] * p[1] as f64) * inv;
                worst = worst.max(div.norm());
            }
        }
        worst
    }

    /// Fills `out` with `Delta beta_k ~ N(0, dt)`, one per mode in [`NoiseSpec::modes`] order.
    pub fn increments_into(&self, step: u64, dt: f64, replica: u64, out: &mut Vec<f64>) {
        let key = self.stream(replica);
        let count = self.modes.len();
        let fine = 1u64 << self.refine;
        let scale = (dt / fine as f64).sqrt();
        if fine == 1 {
            key.normals(step, count, out);
            out.iter_mut().for_each(|z| *z *= scale);
            return;
        }
        out.clear();
        out.resize(count, 0.0);
        let mut buf = Vec::with_capacity(count);
        for sub in 0..fine {
            key.normals(step * fine + sub, count, &mut buf);
            for (o, z) in out.iter_mut().zip(&buf) {
                *o += scale * z;
            }
        }
    }
}

/// Brownian increments for every mode of `spec` at `step`, aligned with `spec.modes()`.
pub fn sample_increments(spec: &NoiseSpec, step: u64, dt: f64, replica: u64) -> Vec<f64> {
    let mut out = Vec::with_capacity(spec.modes.len());
    spec.increments_into(step, dt, replica, &mut out);
    out
}
