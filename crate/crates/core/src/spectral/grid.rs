use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Uniform sampling of the unit torus `[-1/2, 1/2)^2`.
///
/// Node `(i, j)` sits at `(-1/2 + i/n, -1/2 + j/n)`; values are stored row-major with the
/// row index running along the first coordinate. Spectral arrays use the usual FFT bin
/// layout, bin `b` along an axis carrying the signed wavenumber `b` for `b <= n/2` and
/// `b - n` above. The Nyquist bin is reported as `+n/2`.
#[derive(Clone)]
pub struct TorusGrid {
    inner: Arc<GridInner>,
}

struct GridInner {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch_len: usize,
    wavenumbers: Vec<i64>,
    // Per-bin tables, length n*n.
    laplace: Vec<f64>,
    deriv: [Vec<f64>; 2],
    keep: Vec<bool>,
    mirror: Vec<usize>,
}

impl TorusGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 4 || !n.is_multiple_of(2) {
            return Err(Error::InvalidGrid(n));
        }
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());

        let half = (n / 2) as i64;
        let wavenumbers: Vec<i64> = (0..n as i64)
            .map(|b| if b <= half { b } else { b - n as i64 })
            .collect();
        let cutoff = n as f64 / 3.0;

        let mut laplace = Vec::with_capacity(n * n);
        let mut d1 = Vec::with_capacity(n * n);
        let mut d2 = Vec::with_capacity(n * n);
        let mut keep = Vec::with_capacity(n * n);
        let mut mirror = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let (k1, k2) = (wavenumbers[i], wavenumbers[j]);
                laplace.push(4.0 * PI * PI * (k1 * k1 + k2 * k2) as f64);
                // odd derivatives drop the Nyquist row/column
                d1.push(if k1 == half { 0.0 } else { 2.0 * PI * k1 as f64 });
                d2.push(if k2 == half { 0.0 } else { 2.0 * PI * k2 as f64 });
                keep.push(k1.unsigned_abs().max(k2.unsigned_abs()) as f64 <= cutoff);
                mirror.push(((n - i) % n) * n + (n - j) % n);
            }
        }

        Ok(Self {
            inner: Arc::new(GridInner {
                n,
                forward,
                inverse,
                scratch_len,
                wavenumbers,
                laplace,
                deriv: [d1, d2],
                keep,
                mirror,
            }),
        })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.inner.n
    }

    /// Number of nodes, `n * n`.
    #[inline]
    pub fn len(&self) -> usize {
        self.inner.n * self.inner.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.inner.n as f64
    }

    pub fn node(&self, i: usize, j: usize) -> [f64; 2] {
        let h = self.spacing();
        [-0.5 + i as f64 * h, -0.5 + j as f64 * h]
    }

    /// Signed wavenumber carried by bin `b` along one axis.
    #[inline]
    pub fn wavenumber(&self, b: usize) -> i64 {
        self.inner.wavenumbers[b]
    }

    /// Wavevector of the flat bin index `idx`.
    #[inline]
    pub fn wavevector(&self, idx: usize) -> [i64; 2] {
        let n = self.inner.n;
        [self.inner.wavenumbers[idx / n], self.inner.wavenumbers[idx % n]]
    }

    /// Flat bin index holding wavevector `k` (taken modulo `n`).
    #[inline]
    pub fn bin(&self, k: [i64; 2]) -> usize {
        let n = self.inner.n as i64;
        (k[0].rem_euclid(n) * n + k[1].rem_euclid(n)) as usize
    }

    /// Bin holding `-k` for the bin holding `k`.
    #[inline]
    pub fn mirror(&self, idx: usize) -> usize {
        self.inner.mirror[idx]
    }

    /// `4 pi^2 |k|^2` per bin, the symbol of `-Laplacian`.
    #[inline]
    pub fn laplace_symbol(&self) -> &[f64] {
        &self.inner.laplace
    }

    /// `2 pi k_axis` per bin with the Nyquist plane zeroed; multiply by `i` to differentiate.
    #[inline]
    pub fn derivative_symbol(&self, axis: usize) -> &[f64] {
        &self.inner.deriv[axis]
    }

    /// Bins retained by the two-thirds rule.
    #[inline]
    pub fn dealias_mask(&self) -> &[bool] {
        &self.inner.keep
    }

    /// Phase `(-1)^{k1+k2}` converting FFT bins to coefficients relative to the
    /// physical node coordinates.
    #[inline]
    pub fn node_phase(k: [i64; 2]) -> f64 {
        if (k[0] + k[1]).rem_euclid(2) == 0 {
            1.0
        } else {
            -1.0
        }
    }

    pub fn scratch(&self) -> Vec<Complex64> {
        vec![Complex64::new(0.0, 0.0); self.inner.scratch_len]
    }

    /// Forward transform in place, normalised by `1/n^2`.
    pub fn forward(&self, buf: &mut [Complex64], scratch: &mut [Complex64]) {
        self.fft2(buf, scratch, &*self.inner.forward);
        let scale = 1.0 / self.len() as f64;
        for c in buf.iter_mut() {
            *c *= scale;
        }
    }

    /// Unnormalised inverse transform in place (plain sum over bins).
    pub fn inverse(&self, buf: &mut [Complex64], scratch: &mut [Complex64]) {
        self.fft2(buf, scratch, &*self.inner.inverse);
    }

    fn fft2(&self, buf: &mut [Complex64], scratch: &mut [Complex64], plan: &dyn Fft<f64>) {
        let n = self.inner.n;
        debug_assert_eq!(buf.len(), n * n);
        plan.process_with_scratch(buf, scratch);
        transpose(buf, n);
        plan.process_with_scratch(buf, scratch);
        transpose(buf, n);
    }

    pub fn same_as(&self, other: &TorusGrid) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner) || self.n() == other.n()
    }

    pub(crate) fn check_same(&self, other: &TorusGrid) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                left: self.n(),
                right: other.n(),
            })
        }
    }
}

fn transpose(buf: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in i + 1..n {
            buf.swap(i * n + j, j * n + i);
        }
    }
}

impl PartialEq for TorusGrid {
    fn eq(&self, other: &Self) -> bool {
        self.same_as(other)
    }
}

impl fmt::Debug for TorusGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TorusGrid").field("n", &self.n()).finish()
    }
}
