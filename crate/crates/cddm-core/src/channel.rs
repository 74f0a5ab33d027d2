//! Doubly-selective channel models over the DD grid.
//!
//! The same `P`-path channel is exposed three equivalent ways: the direct
//! DD-domain twisted convolution ([`apply_dd`]), the block channel matrix
//! built from cyclic-shift sub-blocks with the wrap-phase diagonal
//! ([`build_h`]), and the discrete time-domain path sum over the CP-extended
//! sequence ([`apply_time`]). The equivalence of the three is part of the
//! test contract.
//!
//! A frame-level cyclic prefix of at least the maximum delay tap makes the
//! time-domain model exactly circular, which is what the wrapped blocks of
//! the matrix form encode.

use crate::grid::{DDFrame, GridDims};
use crate::{CddmError, Result};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;

/// Speed of light, m/s.
const C_LIGHT: f64 = 299_792_458.0;

/// One propagation path on the integer DD grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathTap {
    /// Delay tap in units of `T / m_d`.
    pub delay: usize,
    /// Doppler tap in units of `1 / (n_d T)`, may be negative.
    pub doppler: i32,
    /// Complex path gain.
    pub gain: Complex64,
}

/// A set of distinct `(delay, doppler)` taps on a fixed grid.
#[derive(Debug, Clone)]
pub struct DDChannel {
    dims: GridDims,
    paths: Vec<PathTap>,
}

impl DDChannel {
    pub fn new(dims: GridDims, paths: Vec<PathTap>) -> Result<Self> {
        if paths.is_empty() {
            return Err(CddmError::BadChannel("no paths".into()));
        }
        let half = dims.n_d() as i32 / 2;
        for (idx, p) in paths.iter().enumerate() {
            if p.delay >= dims.m_d() {
                return Err(CddmError::BadChannel(format!(
                    "path {idx}: delay {} >= m_d {}",
                    p.delay,
                    dims.m_d()
                )));
            }
            if p.doppler.abs() > half {
                return Err(CddmError::BadChannel(format!(
                    "path {idx}: doppler {} outside (-n_d/2, n_d/2]",
                    p.doppler
                )));
            }
        }
        for a in 0..paths.len() {
            for b in a + 1..paths.len() {
                if paths[a].delay == paths[b].delay && paths[a].doppler == paths[b].doppler {
                    return Err(CddmError::BadChannel(format!(
                        "duplicate (l, k) = ({}, {})",
                        paths[a].delay, paths[a].doppler
                    )));
                }
            }
        }
        Ok(DDChannel { dims, paths })
    }

    #[inline]
    pub fn dims(&self) -> GridDims {
        self.dims
    }

    #[inline]
    pub fn paths(&self) -> &[PathTap] {
        &self.paths
    }

    /// Largest delay tap; the CP must be at least this long.
    pub fn max_delay(&self) -> usize {
        self.paths.iter().map(|p| p.delay).max().unwrap_or(0)
    }

    /// Total path power.
    pub fn power(&self) -> f64 {
        self.paths.iter().map(|p| p.gain.norm_sqr()).sum()
    }

    /// CSV rows `trial,p,l,k,re(h),im(h)` for audit tooling.
    pub fn write_csv_rows(&self, trial: u64, out: &mut String) {
        for (p, tap) in self.paths.iter().enumerate() {
            out.push_str(&format!(
                "{trial},{p},{},{},{:.9e},{:.9e}\n",
                tap.delay, tap.doppler, tap.gain.re, tap.gain.im
            ));
        }
    }
}

/// Phase picked up by source cell in row `ms` travelling over `path` and
/// arriving at Doppler column `nr`; `wrapped` marks a delay shift that
/// crossed the frame boundary, where the CP adds a per-subcarrier rotation.
#[inline]
fn tap_phase(path: &PathTap, ms: usize, nr: usize, dims: GridDims, wrapped: bool) -> Complex64 {
    let n = dims.n() as f64;
    let mut phi = 2.0 * PI * path.doppler as f64 * ms as f64 / n;
    if wrapped {
        phi -= 2.0 * PI * nr as f64 / dims.n_d() as f64;
    }
    Complex64::from_polar(1.0, phi)
}

/// DD-domain twisted convolution: each source cell is shifted by `(l, k)`,
/// rotated by the path phase, and the wrap phase applied when the delay shift
/// crosses the frame edge.
pub fn apply_dd(frame: &DDFrame, ch: &DDChannel) -> Result<DDFrame> {
    let dims = frame.dims();
    if dims != ch.dims() {
        return Err(CddmError::DimensionMismatch {
            expected: ch.dims().n(),
            got: dims.n(),
        });
    }
    let (m_d, n_d) = (dims.m_d(), dims.n_d());
    let mut out = DDFrame::zero(dims);
    for path in ch.paths() {
        for ms in 0..m_d {
            let m = (ms + path.delay) % m_d;
            let wrapped = ms + path.delay >= m_d;
            for ns in 0..n_d {
                let v = frame.get(ms, ns);
                if v == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let nr = (ns as i64 + path.doppler as i64).rem_euclid(n_d as i64) as usize;
                out.add_at(m, nr, path.gain * tap_phase(path, ms, nr, dims, wrapped) * v);
            }
        }
    }
    Ok(out)
}

/// Time-domain path sum over a CP-prefixed critically-sampled sequence.
///
/// The Doppler phase is referenced to the first post-CP sample, so samples
/// inside the CP carry negative time indices. Entries that would reach before
/// the transmitted block are treated as zero; they fall inside the CP and are
/// discarded by the receiver as long as `cp_len >= max_delay`.
pub fn apply_time(x_cp: &[Complex64], cp_len: usize, ch: &DDChannel) -> Result<Vec<Complex64>> {
    if ch.max_delay() > cp_len {
        return Err(CddmError::BadChannel(format!(
            "max delay {} exceeds cp_len {cp_len}",
            ch.max_delay()
        )));
    }
    let n = ch.dims().n() as f64;
    let mut y = vec![Complex64::new(0.0, 0.0); x_cp.len()];
    for path in ch.paths() {
        for (u, out) in y.iter_mut().enumerate() {
            if u < path.delay {
                continue;
            }
            let q = u as i64 - cp_len as i64 - path.delay as i64;
            let phase = Complex64::from_polar(1.0, 2.0 * PI * path.doppler as f64 * q as f64 / n);
            *out += path.gain * phase * x_cp[u - path.delay];
        }
    }
    Ok(y)
}

/// The effective DD channel matrix, materialized dense only for small grids.
pub struct ChannelMatrix {
    ch: DDChannel,
    dense: Option<Vec<Complex64>>,
}

/// Grids up to this size get a dense matrix; larger ones stay block-implicit.
const DENSE_LIMIT: usize = 4096;

/// Assemble the block channel matrix: block row `m` holds `U[m][l]` at block
/// column `(m - l) mod m_d`, right-multiplied by the wrap-phase diagonal when
/// `m < l`.
pub fn build_h(ch: &DDChannel) -> ChannelMatrix {
    let dims = ch.dims();
    let n = dims.n();
    let dense = if n <= DENSE_LIMIT {
        let (m_d, n_d) = (dims.m_d(), dims.n_d());
        let mut h = vec![Complex64::new(0.0, 0.0); n * n];
        for m in 0..m_d {
            for path in ch.paths() {
                let l = path.delay;
                let col_block = (m as i64 - l as i64).rem_euclid(m_d as i64) as usize;
                let wrapped = (m as i64 - l as i64) < 0;
                // U^m_l = sum_k h[l,k] e^{j2 pi k (m-l)/n} C^k, times D if wrapped
                let phase = Complex64::from_polar(
                    1.0,
                    2.0 * PI * path.doppler as f64 * (m as f64 - l as f64) / n as f64,
                );
                for nr in 0..n_d {
                    let nc = (nr as i64 - path.doppler as i64).rem_euclid(n_d as i64) as usize;
                    let d = if wrapped {
                        Complex64::from_polar(1.0, -2.0 * PI * nc as f64 / n_d as f64)
                    } else {
                        Complex64::new(1.0, 0.0)
                    };
                    h[(m * n_d + nr) * n + col_block * n_d + nc] += path.gain * phase * d;
                }
            }
        }
        Some(h)
    } else {
        None
    };
    ChannelMatrix { ch: ch.clone(), dense }
}

impl ChannelMatrix {
    #[inline]
    pub fn n(&self) -> usize {
        self.ch.dims().n()
    }

    pub fn is_dense(&self) -> bool {
        self.dense.is_some()
    }

    /// Dense entry accessor (panics on implicit matrices); for structure tests.
    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        let n = self.n();
        self.dense.as_ref().expect("matrix not materialized")[row * n + col]
    }

    /// `H x`, computed from the path structure in `O(P n)`.
    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.n());
        let dims = self.ch.dims();
        let (m_d, n_d) = (dims.m_d(), dims.n_d());
        let mut y = vec![Complex64::new(0.0, 0.0); x.len()];
        for path in self.ch.paths() {
            for ms in 0..m_d {
                let m = (ms + path.delay) % m_d;
                let wrapped = ms + path.delay >= m_d;
                for ns in 0..n_d {
                    let nr = (ns as i64 + path.doppler as i64).rem_euclid(n_d as i64) as usize;
                    y[m * n_d + nr] += path.gain
                        * tap_phase(path, ms, nr, dims, wrapped)
                        * x[ms * n_d + ns];
                }
            }
        }
        y
    }

    /// `H^H y`.
    pub fn matvec_adj(&self, y: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(y.len(), self.n());
        let dims = self.ch.dims();
        let (m_d, n_d) = (dims.m_d(), dims.n_d());
        let mut x = vec![Complex64::new(0.0, 0.0); y.len()];
        for path in self.ch.paths() {
            for ms in 0..m_d {
                let m = (ms + path.delay) % m_d;
                let wrapped = ms + path.delay >= m_d;
                for ns in 0..n_d {
                    let nr = (ns as i64 + path.doppler as i64).rem_euclid(n_d as i64) as usize;
                    x[ms * n_d + ns] += (path.gain * tap_phase(path, ms, nr, dims, wrapped))
                        .conj()
                        * y[m * n_d + nr];
                }
            }
        }
        x
    }
}

/// Ridge-regularized least squares `x = (H^H H + reg I)^{-1} H^H y`.
///
/// `reg = 0` is the plain LS solution (dense grids only; singular normal
/// matrices are reported); `reg = noise_var / symbol_energy` gives the MMSE
/// variant used for BER curves. Large implicit systems are solved by
/// conjugate gradients on the normal equations, which is deterministic.
pub fn ls_equalize(yv: &[Complex64], h: &ChannelMatrix, reg: f64) -> Result<Vec<Complex64>> {
    let n = h.n();
    if yv.len() != n {
        return Err(CddmError::DimensionMismatch { expected: n, got: yv.len() });
    }
    if reg < 0.0 {
        return Err(CddmError::BadConfig("reg must be nonnegative".into()));
    }
    let b = h.matvec_adj(yv);
    // direct elimination where it is cheap or where reg = 0 demands an exact
    // solve; conjugate gradients everywhere else
    if h.is_dense() && (n <= 512 || reg == 0.0) {
        // direct route: assemble the normal matrix from the sparse rows
        let triplets = sparse_rows(&h.ch);
        let mut a = vec![Complex64::new(0.0, 0.0); n * n];
        for row in &triplets {
            for &(c1, v1) in row {
                for &(c2, v2) in row {
                    a[c1 * n + c2] += v1.conj() * v2;
                }
            }
        }
        for d in 0..n {
            a[d * n + d] += reg;
        }
        let mut x = b;
        solve_dense(&mut a, n, &mut x)?;
        Ok(x)
    } else {
        let apply = |v: &[Complex64]| {
            let hv = h.matvec(v);
            let mut out = h.matvec_adj(&hv);
            if reg > 0.0 {
                for (o, vi) in out.iter_mut().zip(v) {
                    *o += reg * vi;
                }
            }
            out
        };
        conjugate_gradient(apply, &b, 1e-13, 10 * n)
    }
}

/// Nonzeros of each matrix row as `(col, value)` lists.
fn sparse_rows(ch: &DDChannel) -> Vec<Vec<(usize, Complex64)>> {
    let dims = ch.dims();
    let (m_d, n_d) = (dims.m_d(), dims.n_d());
    let mut rows = vec![Vec::with_capacity(ch.paths().len()); dims.n()];
    for path in ch.paths() {
        for ms in 0..m_d {
            let m = (ms + path.delay) % m_d;
            let wrapped = ms + path.delay >= m_d;
            for ns in 0..n_d {
                let nr = (ns as i64 + path.doppler as i64).rem_euclid(n_d as i64) as usize;
                rows[m * n_d + nr].push((
                    ms * n_d + ns,
                    path.gain * tap_phase(path, ms, nr, dims, wrapped),
                ));
            }
        }
    }
    rows
}

/// In-place Gaussian elimination with partial pivoting on an `n x n` system.
fn solve_dense(a: &mut [Complex64], n: usize, b: &mut [Complex64]) -> Result<()> {
    let scale: f64 = a.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1.0);
    for col in 0..n {
        let (pivot_row, pivot_mag) = (col..n)
            .map(|r| (r, a[r * n + col].norm()))
            .max_by(|x, y| x.1.partial_cmp(&y.1).unwrap())
            .unwrap();
        if pivot_mag < 1e-12 * scale {
            return Err(CddmError::SingularSystem);
        }
        if pivot_row != col {
            for j in 0..n {
                a.swap(col * n + j, pivot_row * n + j);
            }
            b.swap(col, pivot_row);
        }
        let inv = Complex64::new(1.0, 0.0) / a[col * n + col];
        for r in col + 1..n {
            let f = a[r * n + col] * inv;
            if f == Complex64::new(0.0, 0.0) {
                continue;
            }
            for j in col..n {
                let v = a[col * n + j];
                a[r * n + j] -= f * v;
            }
            b[r] -= f * b[col];
        }
    }
    for col in (0..n).rev() {
        let mut acc = b[col];
        for j in col + 1..n {
            acc -= a[col * n + j] * b[j];
        }
        b[col] = acc / a[col * n + col];
    }
    Ok(())
}

/// Conjugate gradients for a Hermitian positive (semi)definite operator.
fn conjugate_gradient<F>(apply: F, b: &[Complex64], rel_tol: f64, max_iter: usize) -> Result<Vec<Complex64>>
where
    F: Fn(&[Complex64]) -> Vec<Complex64>,
{
    let n = b.len();
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let b_norm: f64 = b.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    if b_norm == 0.0 {
        return Ok(x);
    }
    let mut rs_old: f64 = r.iter().map(|v| v.norm_sqr()).sum();
    for _ in 0..max_iter {
        if rs_old.sqrt() <= rel_tol * b_norm {
            break;
        }
        let ap = apply(&p);
        let p_ap: Complex64 = p.iter().zip(&ap).map(|(pi, api)| pi.conj() * api).sum();
        if p_ap.norm() == 0.0 {
            return Err(CddmError::SingularSystem);
        }
        let alpha = rs_old / p_ap.re;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rs_new: f64 = r.iter().map(|v| v.norm_sqr()).sum();
        let beta = rs_new / rs_old;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rs_old = rs_new;
    }
    Ok(x)
}

/// Complex AWGN calibrated to an Eb/N0 target.
///
/// `e_s` (energy per constituent symbol) is measured from the actual sequence:
/// total energy divided by `n_symbols`. `rate_scale` is the ratio of
/// information bits to `n_symbols * bits_per_symbol`, charging CP and pilot
/// overhead to Eb. Returns the noisy sequence and the per-sample complex
/// noise variance used.
pub fn add_awgn<R: Rng>(
    y: &[Complex64],
    ebn0_db: f64,
    bits_per_symbol: u32,
    rate_scale: f64,
    n_symbols: usize,
    rng: &mut R,
) -> (Vec<Complex64>, f64) {
    let sigma2 = awgn_noise_var(y, ebn0_db, bits_per_symbol, rate_scale, n_symbols);
    let s = (sigma2 / 2.0).sqrt();
    let out = y
        .iter()
        .map(|&v| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            v + Complex64::new(re * s, im * s)
        })
        .collect();
    (out, sigma2)
}

/// Per-sample complex noise variance for [`add_awgn`].
pub fn awgn_noise_var(
    y: &[Complex64],
    ebn0_db: f64,
    bits_per_symbol: u32,
    rate_scale: f64,
    n_symbols: usize,
) -> f64 {
    let energy: f64 = y.iter().map(|v| v.norm_sqr()).sum();
    let e_s = energy / n_symbols as f64;
    e_s / (bits_per_symbol as f64 * 10f64.powf(ebn0_db / 10.0) * rate_scale)
}

/// Maximum integer Doppler tap for a carrier/speed/grid combination.
pub fn max_doppler_tap(fc_hz: f64, speed_kmh: f64, n_d: usize, t_symbol_s: f64) -> i32 {
    let v = speed_kmh * 1000.0 / 3600.0;
    let f_d = fc_hz * v / C_LIGHT;
    (f_d * n_d as f64 * t_symbol_s).round() as i32
}

/// EVA-derived 4-path random channel: fixed delay profile, Rayleigh gains
/// drawn from the normalized PDP, Doppler taps `round(k_max cos theta)` with
/// `theta` uniform. Colliding `(l, k)` pairs are redrawn a bounded number of
/// times so the path count stays fixed.
pub fn eva_channel<R: Rng>(
    speed_kmh: f64,
    fc_hz: f64,
    dims: GridDims,
    t_symbol_s: f64,
    rng: &mut R,
) -> Result<DDChannel> {
    const DELAYS_NS: [f64; 4] = [0.0, 310.0, 710.0, 1090.0];
    const PDP_DB: [f64; 4] = [0.0, -3.6, -9.1, -7.0];
    if speed_kmh < 0.0 {
        return Err(CddmError::BadChannel("negative speed".into()));
    }
    let bin_s = t_symbol_s / dims.m_d() as f64;
    let delays: Vec<usize> = DELAYS_NS
        .iter()
        .map(|ns| (ns * 1e-9 / bin_s).round() as usize)
        .collect();
    let k_max = max_doppler_tap(fc_hz, speed_kmh, dims.n_d(), t_symbol_s);
    let total: f64 = PDP_DB.iter().map(|db| 10f64.powf(db / 10.0)).sum();
    let sigmas: Vec<f64> = PDP_DB
        .iter()
        .map(|db| (10f64.powf(db / 10.0) / total).sqrt())
        .collect();

    for _attempt in 0..1000 {
        let mut paths = Vec::with_capacity(4);
        for p in 0..4 {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            let gain = Complex64::new(re, im) * sigmas[p] / 2.0_f64.sqrt();
            let theta: f64 = rng.gen_range(0.0..2.0 * PI);
            let k = (k_max as f64 * theta.cos()).round() as i32;
            paths.push(PathTap { delay: delays[p], doppler: k, gain });
        }
        if let Ok(ch) = DDChannel::new(dims, paths) {
            return Ok(ch);
        }
    }
    Err(CddmError::BadChannel(
        "could not draw distinct (l, k) taps after bounded retries".into(),
    ))
}
