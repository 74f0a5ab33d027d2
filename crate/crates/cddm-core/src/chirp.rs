//! Discrete orthogonal chirp families and the chirp-Zak transform.
//!
//! A length-`N` chirp maps to the `m_d x n_d` delay-Doppler grid with exactly
//! one nonzero per delay row; the column of that nonzero follows a closed-form
//! modular rule, so the whole forward transform reduces to scatter-accumulate
//! over precomputed positions and the inverse to a gather-correlate over the
//! same positions. Chirps whose indices agree modulo `n_d` share the same
//! position set but are mutually orthogonal over the `m_d` stored values.
//!
//! All phases are evaluated from exact integer exponents reduced modulo `2N`
//! before any floating-point work, so values stay bit-stable up to `N = 2^20`.

use crate::grid::{DDFrame, GridDims, SymbolVector};
use crate::{CddmError, Result};
use num_complex::Complex64;
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::io::Write;

/// Which chirp family generates the basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChirpKind {
    /// Fresnel-transform chirps, fixed quadratic rate.
    Dfnt,
    /// Affine-Fourier chirps with quadratic rate tied to the maximum integer
    /// Doppler tap `alpha`. The superimposed-pilot guard structure is only
    /// meaningful for `alpha < n_d / 2`; that bound is enforced where pilots
    /// are configured, not here, since the transform itself is exact for any
    /// `alpha`.
    Daft { alpha: u32 },
}

/// The `i`-th Fresnel chirp evaluated at sample `w`, length `n`.
pub fn dfnt_chirp(i: usize, w: usize, n: usize) -> Complex64 {
    assert!(i < n && w < n, "chirp index out of range");
    let d = w as i64 - i as i64;
    let t = (d * d).rem_euclid(2 * n as i64) as f64;
    Complex64::from_polar(1.0, PI / 4.0 - PI * t / n as f64)
}

/// The `i`-th affine-Fourier chirp evaluated at sample `u`.
pub fn daft_chirp(i: usize, u: usize, dims: GridDims, alpha: u32) -> Complex64 {
    let n = dims.n();
    assert!(i < n && u < n, "chirp index out of range");
    // exponent numerator of pi/N: (2a+1) u^2 + 2 u i + i^2, reduced mod 2N
    let two_n = 2 * n as u128;
    let a = ((2 * alpha as u128 + 1) * (u as u128) * (u as u128)
        + 2 * (u as u128) * (i as u128)
        + (i as u128) * (i as u128))
        % two_n;
    Complex64::from_polar(1.0, PI * a as f64 / n as f64)
}

/// Chirp synthesis: `s(q) = sum_w x(w) * chirp_w(q)` (unnormalized, so the
/// output energy scales by `N` relative to the input).
///
/// This is the dense route; the sparse DD-domain path in [`czt`] must match
/// `dzt(idfnt(x))` elementwise and the two are kept independent so each can
/// serve as the other's oracle.
pub fn idfnt(x: &SymbolVector) -> Vec<Complex64> {
    let n = x.len();
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for (w, &xv) in x.iter().enumerate() {
        if xv == Complex64::new(0.0, 0.0) {
            continue;
        }
        for (q, o) in out.iter_mut().enumerate() {
            *o += xv * dfnt_chirp(w, q, n);
        }
    }
    out
}

/// Discrete Zak transform: per-delay-row DFT across the `n_d` time blocks,
/// scaled by `1/sqrt(n_d)` so the map is unitary.
pub fn dzt(s: &[Complex64], dims: GridDims) -> Result<DDFrame> {
    if s.len() != dims.n() {
        return Err(CddmError::DimensionMismatch {
            expected: dims.n(),
            got: s.len(),
        });
    }
    let (m_d, n_d) = (dims.m_d(), dims.n_d());
    let scale = 1.0 / (n_d as f64).sqrt();
    let pair = crate::fft::FftPair::new(n_d);
    let mut frame = DDFrame::zero(dims);
    let mut row = vec![Complex64::new(0.0, 0.0); n_d];
    for m in 0..m_d {
        for (k, r) in row.iter_mut().enumerate() {
            *r = s[m + k * m_d];
        }
        pair.forward.process(&mut row);
        for (n, &v) in row.iter().enumerate() {
            frame.set(m, n, v * scale);
        }
    }
    Ok(frame)
}

/// Precomputed sparse DD representation of one chirp family.
///
/// Stores the nonzero column of every `(chirp residue, delay row)` pair plus a
/// `2N`-entry unit-root table; values are produced on demand as
/// `sqrt(n_d) * chirp_i(m)` from exact integer exponents.
pub struct ChirpBasis {
    dims: GridDims,
    kind: ChirpKind,
    /// `cols[(i % n_d) * m_d + m]` = Doppler column of the nonzero in row `m`.
    cols: Vec<u32>,
    /// `tw[t] = exp(j*pi*t/n)`, `t` in `[0, 2n)`.
    tw: Vec<Complex64>,
}

impl ChirpBasis {
    /// Precompute the position sets and phase table for `dims` and `kind`.
    pub fn new(dims: GridDims, kind: ChirpKind) -> Self {
        let (m_d, n_d, n) = (dims.m_d(), dims.n_d(), dims.n());
        let mut cols = vec![0u32; n_d * m_d];
        let half = (m_d / 2) as i64;
        for r in 0..n_d {
            for m in 0..m_d {
                let col = match kind {
                    // nonzero where (m_d/2 + m + n - i) = 0 mod n_d
                    ChirpKind::Dfnt => (r as i64 - m as i64 - half).rem_euclid(n_d as i64),
                    // nonzero where n = (2a+1) m + (2a+1) m_d/2 + i mod n_d
                    ChirpKind::Daft { alpha } => {
                        let s = 2 * alpha as i64 + 1;
                        (s * (m as i64 + half) + r as i64).rem_euclid(n_d as i64)
                    }
                };
                cols[r * m_d + m] = col as u32;
            }
        }
        let tw = (0..2 * n)
            .map(|t| Complex64::from_polar(1.0, PI * t as f64 / n as f64))
            .collect();
        ChirpBasis { dims, kind, cols, tw }
    }

    #[inline]
    pub fn dims(&self) -> GridDims {
        self.dims
    }

    #[inline]
    pub fn kind(&self) -> ChirpKind {
        self.kind
    }

    /// Doppler column of chirp `i`'s nonzero in delay row `m`.
    #[inline]
    pub fn col_of(&self, i: usize, m: usize) -> usize {
        self.cols[(i % self.dims.n_d()) * self.dims.m_d() + m] as usize
    }

    /// Full-length chirp sample `chirp_i(w)`, `w` in `[0, n)`.
    #[inline]
    pub fn chirp_value(&self, i: usize, w: usize) -> Complex64 {
        let n = self.dims.n() as i64;
        match self.kind {
            ChirpKind::Dfnt => {
                let d = w as i64 - i as i64;
                let t = (d * d).rem_euclid(2 * n) as usize;
                // e^{j pi/4} * e^{-j pi t / n}
                let e8 = Complex64::new(FRAC_1_SQRT_2, FRAC_1_SQRT_2);
                e8 * self.tw[(2 * n as usize - t) % (2 * n as usize)]
            }
            ChirpKind::Daft { alpha } => {
                let a = ((2 * alpha as u128 + 1) * (w as u128) * (w as u128)
                    + 2 * (w as u128) * (i as u128)
                    + (i as u128) * (i as u128))
                    % (2 * n as u128);
                self.tw[a as usize]
            }
        }
    }

    /// Stored DD value of chirp `i` in delay row `m`: `sqrt(n_d) * chirp_i(m)`.
    #[inline]
    pub fn value(&self, i: usize, m: usize) -> Complex64 {
        (self.dims.n_d() as f64).sqrt() * self.chirp_value(i, m)
    }

    /// Iterator over chirp `i`'s nonzero positions `(m, n)` in row order.
    pub fn positions(&self, i: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        let base = (i % self.dims.n_d()) * self.dims.m_d();
        self.cols[base..base + self.dims.m_d()]
            .iter()
            .enumerate()
            .map(|(m, &c)| (m, c as usize))
    }

    /// Line-oriented dump of all position sets (`i m n` triples), for golden
    /// files and offline inspection.
    pub fn dump_positions(&self, out: &mut dyn Write) -> std::io::Result<()> {
        for i in 0..self.dims.n() {
            for (m, n) in self.positions(i) {
                writeln!(out, "{i} {m} {n}")?;
            }
        }
        Ok(())
    }
}

/// Fast forward chirp-Zak transform: scatter each symbol onto its `m_d`
/// precomputed grid cells.
pub fn czt(x: &SymbolVector, basis: &ChirpBasis) -> Result<DDFrame> {
    let dims = basis.dims();
    if x.len() != dims.n() {
        return Err(CddmError::DimensionMismatch {
            expected: dims.n(),
            got: x.len(),
        });
    }
    let mut frame = DDFrame::zero(dims);
    for (i, &xv) in x.iter().enumerate() {
        if xv == Complex64::new(0.0, 0.0) {
            continue;
        }
        for (m, n) in basis.positions(i) {
            frame.add_at(m, n, xv * basis.value(i, m));
        }
    }
    Ok(frame)
}

/// Fast inverse chirp-Zak transform: per symbol, gather the `m_d` cells on its
/// position set and correlate against the stored chirp values.
pub fn iczt(frame: &DDFrame, basis: &ChirpBasis) -> Result<SymbolVector> {
    let dims = basis.dims();
    if frame.dims() != dims {
        return Err(CddmError::DimensionMismatch {
            expected: dims.n(),
            got: frame.dims().n(),
        });
    }
    let norm = 1.0 / (dims.m_d() as f64 * dims.n_d() as f64);
    let mut x = Vec::with_capacity(dims.n());
    for i in 0..dims.n() {
        let mut acc = Complex64::new(0.0, 0.0);
        for (m, n) in basis.positions(i) {
            acc += frame.get(m, n) * basis.value(i, m).conj();
        }
        x.push(acc * norm);
    }
    Ok(x)
}

/// The synthetic tail completing chirp `i` beyond its `m_d` stored values:
/// `sqrt(n_d) * chirp_i(w)` for `w` in `[m_d, n)`.
pub fn extend_chirp(basis: &ChirpBasis, i: usize) -> Result<Vec<Complex64>> {
    let dims = basis.dims();
    if i >= dims.n() {
        return Err(CddmError::IndexOutOfRange {
            index: i,
            bound: dims.n(),
        });
    }
    Ok((dims.m_d()..dims.n())
        .map(|w| (dims.n_d() as f64).sqrt() * basis.chirp_value(i, w))
        .collect())
}
