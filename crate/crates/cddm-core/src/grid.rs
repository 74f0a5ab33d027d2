//! Delay-Doppler grid dimensions and frames.

use crate::{CddmError, Result};
use num_complex::Complex64;

/// Dimensions of the delay-Doppler grid: `m_d` delay bins by `n_d` Doppler
/// bins, `n = m_d * n_d` symbols per frame.
///
/// `m_d` must be even and an integer multiple of `n_d`; both constraints come
/// from the closed-form nonzero positions of the DD chirps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridDims {
    m_d: usize,
    n_d: usize,
}

impl GridDims {
    pub fn new(m_d: usize, n_d: usize) -> Result<Self> {
        if m_d == 0 || n_d == 0 {
            return Err(CddmError::BadDims("m_d and n_d must be positive".into()));
        }
        if m_d % 2 != 0 {
            return Err(CddmError::BadDims(format!("m_d = {m_d} must be even")));
        }
        if m_d % n_d != 0 {
            return Err(CddmError::BadDims(format!(
                "m_d = {m_d} must be a multiple of n_d = {n_d}"
            )));
        }
        Ok(GridDims { m_d, n_d })
    }

    /// Number of delay bins.
    #[inline]
    pub fn m_d(&self) -> usize {
        self.m_d
    }

    /// Number of Doppler bins.
    #[inline]
    pub fn n_d(&self) -> usize {
        self.n_d
    }

    /// Total number of grid cells / data symbols per frame.
    #[inline]
    pub fn n(&self) -> usize {
        self.m_d * self.n_d
    }
}

/// An `m_d x n_d` complex grid of DD-domain samples, stored row-major in
/// delay-major order so that `vec()` matches the stacked-row vectorization
/// used by the block channel matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DDFrame {
    dims: GridDims,
    data: Vec<Complex64>,
}

impl DDFrame {
    /// All-zero frame.
    pub fn zero(dims: GridDims) -> Self {
        DDFrame {
            dims,
            data: vec![Complex64::new(0.0, 0.0); dims.n()],
        }
    }

    /// Wrap an existing delay-major buffer, checking its length.
    pub fn from_vec(dims: GridDims, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != dims.n() {
            return Err(CddmError::DimensionMismatch {
                expected: dims.n(),
                got: data.len(),
            });
        }
        Ok(DDFrame { dims, data })
    }

    #[inline]
    pub fn dims(&self) -> GridDims {
        self.dims
    }

    #[inline]
    pub fn get(&self, m: usize, n: usize) -> Complex64 {
        debug_assert!(m < self.dims.m_d && n < self.dims.n_d);
        self.data[m * self.dims.n_d + n]
    }

    #[inline]
    pub fn set(&mut self, m: usize, n: usize, v: Complex64) {
        debug_assert!(m < self.dims.m_d && n < self.dims.n_d);
        self.data[m * self.dims.n_d + n] = v;
    }

    #[inline]
    pub fn add_at(&mut self, m: usize, n: usize, v: Complex64) {
        debug_assert!(m < self.dims.m_d && n < self.dims.n_d);
        self.data[m * self.dims.n_d + n] += v;
    }

    /// Delay-major backing slice (`[m * n_d + n]`).
    #[inline]
    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    /// Vectorize: stacked delay rows, i.e. element `m * n_d + n`.
    pub fn vec(&self) -> Vec<Complex64> {
        self.data.clone()
    }

    /// Total energy of the frame.
    pub fn energy(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Elementwise sum with another frame of the same dims.
    pub fn add(&self, other: &DDFrame) -> DDFrame {
        assert_eq!(self.dims, other.dims);
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        DDFrame {
            dims: self.dims,
            data,
        }
    }

    /// Frame scaled by a real factor.
    pub fn scaled(&self, s: f64) -> DDFrame {
        DDFrame {
            dims: self.dims,
            data: self.data.iter().map(|c| c * s).collect(),
        }
    }
}

/// Length-`n` vector of constellation symbols feeding the chirp transform.
pub type SymbolVector = Vec<Complex64>;

/// Maximum absolute elementwise deviation between two complex slices.
pub fn max_abs_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}
