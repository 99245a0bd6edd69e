use std::sync::OnceLock;

use rustfft::num_complex::Complex64;

use super::grid::TorusGrid;
use crate::error::{Error, Result};

/// Real samples of a periodic function on the torus.
///
/// The spatial mean is cached at construction and the spectrum on first use.
#[derive(Clone)]
pub struct ScalarField {
    grid: TorusGrid,
    values: Vec<f64>,
    mean: f64,
    spectrum: OnceLock<Vec<Complex64>>,
}

impl ScalarField {
    pub fn from_values(grid: &TorusGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::SizeMismatch {
                expected: grid.len(),
                found: values.len(),
            });
        }
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        Ok(Self {
            grid: grid.clone(),
            values,
            mean,
            spectrum: OnceLock::new(),
        })
    }

    pub fn zeros(grid: &TorusGrid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: &TorusGrid, c: f64) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![c; grid.len()],
            mean: c,
            spectrum: OnceLock::new(),
        }
    }

    /// Samples `f` at every node.
    pub fn from_fn(grid: &TorusGrid, f: impl Fn([f64; 2]) -> f64) -> Self {
        let n = grid.n();
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..n {
            for j in 0..n {
                values.push(f(grid.node(i, j)));
            }
        }
        Self::from_values(grid, values).expect("sized by construction")
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Grid average of `f * g`, the discrete `L^2` inner product on the unit torus.
    pub fn inner(&self, other: &ScalarField) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        let s: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum();
        Ok(s / self.values.len() as f64)
    }

    /// Full `L^2` norm squared, mean included.
    pub fn l2_squared(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>() / self.values.len() as f64
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        let values = self.values.iter().map(|&v| f(v)).collect();
        ScalarField::from_values(&self.grid, values).expect("same size")
    }

    pub fn zip_with(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<ScalarField> {
        self.grid.check_same(&other.grid)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        ScalarField::from_values(&self.grid, values)
    }

    pub fn sub(&self, other: &ScalarField) -> Result<ScalarField> {
        self.zip_with(other, |a, b| a - b)
    }

    /// FFT bins of the field (normalised by `1/n^2`), computed once.
    pub(crate) fn bins(&self) -> &[Complex64] {
        self.spectrum.get_or_init(|| {
            let mut buf: Vec<Complex64> =
                self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            let mut scratch = self.grid.scratch();
            self.grid.forward(&mut buf, &mut scratch);
            buf
        })
    }

    pub fn spectrum(&self) -> Spectrum {
        Spectrum {
            grid: self.grid.clone(),
            bins: self.bins().to_vec(),
        }
    }
}

impl std::fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScalarField")
            .field("n", &self.grid.n())
            .field("mean", &self.mean)
            .finish_non_exhaustive()
    }
}

impl PartialEq for ScalarField {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid && self.values == other.values
    }
}

/// A pair of scalar fields on a shared grid.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    u1: ScalarField,
    u2: ScalarField,
}

impl VectorField {
    pub fn new(u1: ScalarField, u2: ScalarField) -> Result<Self> {
        u1.grid().check_same(u2.grid())?;
        Ok(Self { u1, u2 })
    }

    pub fn from_fn(grid: &TorusGrid, f: impl Fn([f64; 2]) -> [f64; 2]) -> Self {
        Self {
            u1: ScalarField::from_fn(grid, |x| f(x)[0]),
            u2: ScalarField::from_fn(grid, |x| f(x)[1]),
        }
    }

    pub fn u1(&self) -> &ScalarField {
        &self.u1
    }

    pub fn u2(&self) -> &ScalarField {
        &self.u2
    }

    pub fn grid(&self) -> &TorusGrid {
        self.u1.grid()
    }

    /// Pointwise dot product with another vector field.
    pub fn dot(&self, other: &VectorField) -> Result<ScalarField> {
        let a = self.u1.zip_with(&other.u1, |a, b| a * b)?;
        let b = self.u2.zip_with(&other.u2, |a, b| a * b)?;
        a.zip_with(&b, |x, y| x + y)
    }
}

/// Fourier coefficients of a real field.
///
/// Bins follow the FFT layout of [`TorusGrid`]; [`Spectrum::coefficient`] returns the
/// coefficient relative to the physical coordinates, `(1/n^2) sum f(x) exp(-2 pi i k.x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    grid: TorusGrid,
    bins: Vec<Complex64>,
}

impl Spectrum {
    pub fn from_bins(grid: &TorusGrid, bins: Vec<Complex64>) -> Result<Self> {
        if bins.len() != grid.len() {
            return Err(Error::SizeMismatch {
                expected: grid.len(),
                found: bins.len(),
            });
        }
        Ok(Self {
            grid: grid.clone(),
            bins,
        })
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn bins(&self) -> &[Complex64] {
        &self.bins
    }

    /// Coefficient of `exp(2 pi i k.x)`; `k` is reduced modulo `n`.
    pub fn coefficient(&self, k: [i64; 2]) -> Complex64 {
        self.bins[self.grid.bin(k)] * TorusGrid::node_phase(k)
    }
}

pub fn transform(field: &ScalarField) -> Spectrum {
    field.spectrum()
}

/// Inverse of [`transform`]; the imaginary residue of a non-Hermitian input is dropped.
pub fn inverse_transform(spectrum: &Spectrum) -> ScalarField {
    let grid = &spectrum.grid;
    let mut buf = spectrum.bins.clone();
    let mut scratch = grid.scratch();
    grid.inverse(&mut buf, &mut scratch);
    let values = buf.into_iter().map(|c| c.re).collect();
    ScalarField::from_values(grid, values).expect("sized by construction")
}

/// Zero-mean Sobolev norm `( sum_{k != 0} (2 pi |k|)^{2s} |f_k|^2 )^{1/2}`.
pub fn h_norm(field: &ScalarField, s: f64) -> Result<f64> {
    if !field.is_finite() {
        return Err(Error::NonFinite("h_norm input"));
    }
    Ok(h_norm_bins(field.grid(), field.bins(), s))
}

pub(crate) fn h_norm_bins(grid: &TorusGrid, bins: &[Complex64], s: f64) -> f64 {
    let lap = grid.laplace_symbol();
    let mut acc = 0.0;
    for (c, &l) in bins.iter().zip(lap).skip(1) {
        // (2 pi |k|)^{2s} = (4 pi^2 |k|^2)^s
        acc += l.powf(s) * c.norm_sqr();
    }
    acc.sqrt()
}

fn apply_symbol(field: &ScalarField, symbol: impl Fn(usize) -> Complex64) -> ScalarField {
    let bins: Vec<Complex64> = field
        .bins()
        .iter()
        .enumerate()
        .map(|(i, &c)| c * symbol(i))
        .collect();
    inverse_transform(&Spectrum {
        grid: field.grid().clone(),
        bins,
    })
}

pub fn laplacian(field: &ScalarField) -> ScalarField {
    let lap = field.grid().laplace_symbol();
    apply_symbol(field, |i| Complex64::new(-lap[i], 0.0))
}

pub fn partial(field: &ScalarField, axis: usize) -> ScalarField {
    let d = field.grid().derivative_symbol(axis);
    apply_symbol(field, |i| Complex64::new(0.0, d[i]))
}

pub fn gradient(field: &ScalarField) -> VectorField {
    VectorField {
        u1: partial(field, 0),
        u2: partial(field, 1),
    }
}

pub fn divergence(v: &VectorField) -> ScalarField {
    let a = partial(&v.u1, 0);
    let b = partial(&v.u2, 1);
    a.zip_with(&b, |x, y| x + y).expect("shared grid")
}

/// Two-thirds rule: drop every mode with `max(|k1|, |k2|) > n/3`.
pub fn dealias(field: &ScalarField) -> ScalarField {
    let keep = field.grid().dealias_mask();
    apply_symbol(field, |i| {
        if keep[i] {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}
