//! Seeded Monte Carlo experiment runner.
//!
//! Experiments are described by [`ExperimentConfig`] (parsed from a config
//! file or built in code) and produce one [`MetricRecord`] per sweep point.
//! Trials are independent work units executed in parallel; the per-trial RNG
//! stream is derived from `(seed, point, trial)` and results are reduced in
//! trial order, so the output is byte-identical however many workers run.
//!
//! Data experiments run critically sampled: the DD channel relation is exact
//! there and noise is injected directly on the grid, which the time-domain
//! equivalence tests justify. Pulse shaping enters only for PSD runs.

mod config;

pub use config::{load_config, parse_config};

use crate::channel::{
    apply_dd, build_h, eva_channel, max_doppler_tap, DDChannel, PathTap,
};
use crate::chirp::{czt, ChirpBasis, ChirpKind};
use crate::detect::{
    detect_equalized, detect_maxpath, detect_maxpath_extended, qpsk_demap, qpsk_map,
};
use crate::grid::{DDFrame, GridDims};
use crate::modem::{add_cp, dd_to_time, hold_upsample, psd, pulse_shape, PulseSpec};
use crate::pilot::{
    detect_paths, detection_threshold, estimate_gain_basic, estimate_gain_extended, insert_ep,
    insert_sp, nmse, sp_interference_var, EpConfig, PathEstimate, SpConfig,
};
use crate::{CddmError, Result};
use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use std::path::PathBuf;
use std::time::Instant;

pub const CSV_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Ber,
    Nmse,
    Psd,
}

#[derive(Debug, Clone)]
pub enum ChannelModel {
    /// Single unit-gain static path.
    Awgn,
    /// EVA-derived 4-path random channel, fresh per trial.
    Eva,
    /// Fixed tap list, identical across trials.
    Fixed(Vec<PathTap>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Csi {
    Perfect,
    Estimated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectorKind {
    MaxPath,
    MaxPathExtended,
    MmseIczt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GainEstimator {
    Basic,
    Extended,
}

#[derive(Debug, Clone)]
pub enum PilotModel {
    None,
    Sp(SpConfig),
    Ep(EpConfig),
}

/// Full description of one experiment run.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub dims: GridDims,
    pub chirp: ChirpKind,
    pub t_symbol_s: f64,
    pub fc_hz: f64,
    pub speed_kmh: f64,
    pub channel: ChannelModel,
    pub cp_len: usize,
    pub csi: Csi,
    pub detector: DetectorKind,
    pub estimator: GainEstimator,
    pub pilot: PilotModel,
    pub sigma_p_list: Option<Vec<f64>>,
    pub ebn0_db: Vec<f64>,
    pub trials: u64,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub pulse: Option<PulseSpec>,
    pub nfft: usize,
    pub overlap: f64,
    /// Record wall time in the CSV. Off by default so outputs stay
    /// byte-reproducible.
    pub timing: bool,
    pub dump_channels: Option<PathBuf>,
    /// Original config text when loaded from a file (hashed into the
    /// manifest).
    pub source_text: Option<String>,
}

impl ExperimentConfig {
    /// Maximum Doppler tap implied by carrier and speed.
    pub fn k_max(&self) -> i32 {
        max_doppler_tap(self.fc_hz, self.speed_kmh, self.dims.n_d(), self.t_symbol_s)
    }

    pub fn basis(&self) -> ChirpBasis {
        ChirpBasis::new(self.dims, self.chirp)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(CddmError::BadConfig("trials must be >= 1".into()));
        }
        if self.ebn0_db.is_empty() {
            return Err(CddmError::BadConfig("ebn0_db list is empty".into()));
        }
        match &self.pilot {
            PilotModel::Sp(sp) => sp.validate(self.dims)?,
            PilotModel::Ep(ep) => ep.validate(self.dims)?,
            PilotModel::None => {}
        }
        if self.csi == Csi::Estimated && matches!(self.pilot, PilotModel::None) {
            return Err(CddmError::BadConfig(
                "csi = estimated requires a pilot scheme".into(),
            ));
        }
        if let Some(list) = &self.sigma_p_list {
            if list.is_empty() || !matches!(self.pilot, PilotModel::Sp(_)) {
                return Err(CddmError::BadConfig(
                    "sigma_p_list requires pilot = sp and at least one value".into(),
                ));
            }
            if list.iter().any(|s| !(*s > 0.0 && *s < 1.0)) {
                return Err(CddmError::BadConfig("sigma_p values must be in (0,1)".into()));
            }
        }
        if let ChannelModel::Fixed(taps) = &self.channel {
            let ch = DDChannel::new(self.dims, taps.clone())?;
            if ch.max_delay() > self.cp_len {
                return Err(CddmError::BadConfig(format!(
                    "cp_len {} shorter than max path delay {}",
                    self.cp_len,
                    ch.max_delay()
                )));
            }
        }
        // a DAFT pilot's built-in guard only exists below n_d/2
        if let (ChirpKind::Daft { alpha }, PilotModel::Sp(_), Csi::Estimated) =
            (self.chirp, &self.pilot, self.csi)
        {
            if alpha as usize >= self.dims.n_d() / 2 {
                return Err(CddmError::BadConfig(format!(
                    "daft alpha {alpha} too large for SP guard on n_d = {}",
                    self.dims.n_d()
                )));
            }
        }
        if self.experiment == ExperimentKind::Psd && self.pulse.is_none() {
            return Err(CddmError::BadConfig("psd experiment requires pulse = srrc".into()));
        }
        if self.experiment == ExperimentKind::Nmse && matches!(self.pilot, PilotModel::None) {
            return Err(CddmError::BadConfig("nmse experiment requires a pilot".into()));
        }
        if let Some(p) = &self.pulse {
            p.validate()?;
        }
        Ok(())
    }
}

/// One CSV row of results.
#[derive(Debug, Clone)]
pub struct MetricRecord {
    pub experiment: String,
    pub ebn0_db: f64,
    pub trials: u64,
    pub ber: f64,
    pub ber_se: f64,
    pub nmse: Option<f64>,
    pub nmse_se: Option<f64>,
    pub fail_rate: f64,
    pub seconds: f64,
}

fn fmt9(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v:.8e}")
    }
}

fn fmt9_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => fmt9(x),
        None => "nan".to_string(),
    }
}

/// Render records in the fixed CSV schema.
pub fn write_metrics_csv(records: &[MetricRecord]) -> String {
    let mut out = String::from(
        "schema_version,experiment,ebn0_db,trials,ber,ber_se,nmse,nmse_se,fail_rate,seconds\n",
    );
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            CSV_SCHEMA_VERSION,
            r.experiment,
            fmt9(r.ebn0_db),
            r.trials,
            fmt9(r.ber),
            fmt9(r.ber_se),
            fmt9_opt(r.nmse),
            fmt9_opt(r.nmse_se),
            fmt9(r.fail_rate),
            fmt9(r.seconds),
        ));
    }
    out
}

/// FNV-1a 64-bit hash, used to fingerprint configs in run manifests.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Reproducibility manifest written next to each CSV output.
pub fn manifest_text(cfg: &ExperimentConfig) -> String {
    let hash = fnv1a64(cfg.source_text.as_deref().unwrap_or("(programmatic)").as_bytes());
    let mut s = String::new();
    s.push_str(&format!("config_fnv1a64 = {hash:016x}\n"));
    s.push_str(&format!("seed = {}\n", cfg.seed));
    s.push_str(&format!(
        "build = {} {}\n",
        env!("CARGO_PKG_NAME"),
        env!("CARGO_PKG_VERSION")
    ));
    s.push_str(&format!("trials = {}\n", cfg.trials));
    s
}

struct Point {
    index: usize,
    ebn0_db: f64,
    sigma_p: Option<f64>,
    label: String,
}

struct TrialOut {
    errors: u64,
    bits: u64,
    nmse: Option<f64>,
    failed: bool,
    channel_rows: Option<String>,
}

fn sweep_points(cfg: &ExperimentConfig, label_base: &str) -> Vec<Point> {
    let mut points = Vec::new();
    match &cfg.sigma_p_list {
        None => {
            for &e in &cfg.ebn0_db {
                points.push(Point {
                    index: points.len(),
                    ebn0_db: e,
                    sigma_p: None,
                    label: label_base.to_string(),
                });
            }
        }
        Some(list) => {
            for &s in list {
                for &e in &cfg.ebn0_db {
                    points.push(Point {
                        index: points.len(),
                        ebn0_db: e,
                        sigma_p: Some(s),
                        label: format!("{label_base}:sigma_p={s:.2}"),
                    });
                }
            }
        }
    }
    points
}

fn trial_rng(seed: u64, point: usize, trial: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(((point as u64) << 32) | trial);
    rng
}

fn draw_channel<R: Rng>(cfg: &ExperimentConfig, rng: &mut R) -> Result<DDChannel> {
    match &cfg.channel {
        ChannelModel::Awgn => DDChannel::new(
            cfg.dims,
            vec![PathTap { delay: 0, doppler: 0, gain: Complex64::new(1.0, 0.0) }],
        ),
        ChannelModel::Eva => {
            eva_channel(cfg.speed_kmh, cfg.fc_hz, cfg.dims, cfg.t_symbol_s, rng)
        }
        ChannelModel::Fixed(taps) => DDChannel::new(cfg.dims, taps.clone()),
    }
}

fn add_cell_noise<R: Rng>(frame: &mut DDFrame, sigma2: f64, rng: &mut R) {
    let s = (sigma2 / 2.0).sqrt();
    for v in frame.as_mut_slice() {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *v += Complex64::new(re * s, im * s);
    }
}

fn run_trial(
    cfg: &ExperimentConfig,
    basis: &ChirpBasis,
    point: &Point,
    trial: u64,
) -> Result<TrialOut> {
    let dims = cfg.dims;
    let n = dims.n();
    let mut rng = trial_rng(cfg.seed, point.index, trial);

    let ch = draw_channel(cfg, &mut rng)?;
    let bits: Vec<bool> = (0..2 * n).map(|_| rng.gen()).collect();
    let x = qpsk_map(&bits)?;

    // transmit frame, the energy that counts toward Eb, and the info bits
    let mut sp_frame = None;
    let mut ep_frame = None;
    let (frame, energy_for_eb, info_bits): (DDFrame, f64, u64) = match &cfg.pilot {
        PilotModel::None => {
            let f = czt(&x, basis)?;
            let e = f.energy();
            (f, e, 2 * n as u64)
        }
        PilotModel::Sp(sp_cfg) => {
            let mut sp_cfg = *sp_cfg;
            if let Some(s) = point.sigma_p {
                sp_cfg.sigma_p = s;
            }
            let sp = insert_sp(&x, basis, &sp_cfg)?;
            let total = sp.data_energy + sp.pilot_energy;
            let frame = sp.frame.clone();
            sp_frame = Some((sp, sp_cfg));
            (frame, total, 2 * (n as u64 - 1))
        }
        PilotModel::Ep(ep_cfg) => {
            let ep = insert_ep(&x, basis, ep_cfg, 1.0)?;
            // clipped chirps are guard overhead and do not carry payload bits
            let payload = ep.omega.iter().filter(|&&o| o == 0).count() as u64;
            let e = ep.data_energy;
            ep_frame = Some(ep);
            (DDFrame::zero(dims), e, 2 * payload)
        }
    };

    // noise level: Eb charges the CP overhead and (for SP) the pilot power
    let bps = 2.0;
    let rate_scale = info_bits as f64 / (bps * (n + cfg.cp_len) as f64);
    let e_s = energy_for_eb / n as f64;
    let sigma2 = e_s / (bps * 10f64.powf(point.ebn0_db / 10.0) * rate_scale);

    // EP pilots are placed relative to the receiver noise level
    let frame = if let Some(ep) = &mut ep_frame {
        let amp = match &cfg.pilot {
            PilotModel::Ep(ep_cfg) => (10f64.powf(ep_cfg.snr_p_db / 10.0) * sigma2).sqrt(),
            _ => unreachable!(),
        };
        ep.set_pilot_amplitude(amp);
        ep.frame.clone()
    } else {
        frame
    };

    // MMSE prior: mean cell energy of the bulk (the EP pilot cell would
    // dominate an unconditioned mean)
    let tx_cell_energy = match &ep_frame {
        Some(ep) => ep.data_energy / n as f64,
        None => frame.energy() / n as f64,
    };
    let mut y = apply_dd(&frame, &ch)?;
    add_cell_noise(&mut y, sigma2, &mut rng);

    // channel knowledge
    let (estimates, nmse_val) = match cfg.csi {
        Csi::Perfect => {
            let est: Vec<PathEstimate> = ch
                .paths()
                .iter()
                .map(|p| PathEstimate { delay: p.delay, doppler: p.doppler, gain: p.gain })
                .collect();
            (est, None)
        }
        Csi::Estimated => {
            let (layout, interference) = match (&sp_frame, &ep_frame) {
                (Some((sp, _)), None) => {
                    (&sp.layout, sp_interference_var(sp.data_energy, dims))
                }
                (None, Some(ep)) => (&ep.layout, 0.0),
                _ => unreachable!("validated: estimated csi has a pilot"),
            };
            let window = (cfg.cp_len, cfg.k_max().unsigned_abs() as usize);
            let eps = detection_threshold(sigma2, interference, layout.cells.len());
            let hits = detect_paths(&y, layout, window, eps)?;
            if hits.is_empty() {
                return Ok(TrialOut {
                    errors: 0,
                    bits: 0,
                    nmse: None,
                    failed: true,
                    channel_rows: None,
                });
            }
            let mut est = Vec::with_capacity(hits.len());
            for &(l, k) in &hits {
                let g = match cfg.estimator {
                    GainEstimator::Basic => estimate_gain_basic(&y, (l, k), layout)?,
                    GainEstimator::Extended => {
                        estimate_gain_extended(&y, (l, k), layout, basis)?
                    }
                };
                est.push(PathEstimate { delay: l, doppler: k, gain: g });
            }
            let nm = nmse(&est, &ch)?;
            (est, Some(nm))
        }
    };

    // data detection
    let x_hat = match cfg.detector {
        DetectorKind::MaxPath => detect_maxpath(&y, &estimates, basis)?,
        DetectorKind::MaxPathExtended => detect_maxpath_extended(&y, &estimates, basis)?,
        DetectorKind::MmseIczt => {
            let taps: Vec<PathTap> = estimates.iter().map(|e| e.as_tap()).collect();
            let est_ch = DDChannel::new(dims, taps)?;
            let h = build_h(&est_ch);
            let ep_info = ep_frame
                .as_ref()
                .map(|ep| (&ep.guard, ep.omega.as_slice()));
            detect_equalized(&y, &h, sigma2, tx_cell_energy, basis, ep_info)?
        }
    };
    let rx_bits = qpsk_demap(&x_hat);

    // BER accounting skips pilot and unrecoverable slots
    let mut errors = 0u64;
    let mut counted = 0u64;
    for i in 0..n {
        let skip = match (&sp_frame, &ep_frame) {
            (Some((_, sp_cfg)), None) => i == sp_cfg.i_rho,
            (None, Some(ep)) => ep.omega[i] > 0,
            _ => false,
        };
        if skip {
            continue;
        }
        for b in 0..2 {
            counted += 1;
            if bits[2 * i + b] != rx_bits[2 * i + b] {
                errors += 1;
            }
        }
    }
    debug_assert_eq!(counted, info_bits);

    let channel_rows = cfg.dump_channels.as_ref().map(|_| {
        let mut s = String::new();
        ch.write_csv_rows(trial, &mut s);
        s
    });

    Ok(TrialOut { errors, bits: counted, nmse: nmse_val, failed: false, channel_rows })
}

fn reduce_point(cfg: &ExperimentConfig, point: &Point, outs: &[TrialOut], secs: f64) -> MetricRecord {
    let trials = outs.len() as u64;
    let failed = outs.iter().filter(|o| o.failed).count() as u64;
    let bers: Vec<f64> = outs
        .iter()
        .filter(|o| !o.failed && o.bits > 0)
        .map(|o| o.errors as f64 / o.bits as f64)
        .collect();
    let nmses: Vec<f64> = outs.iter().filter_map(|o| o.nmse).collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let se = |v: &[f64]| {
        if v.len() < 2 {
            return 0.0;
        }
        let m = mean(v);
        let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64;
        (var / v.len() as f64).sqrt()
    };
    let (ber, ber_se) = if bers.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        (mean(&bers), se(&bers))
    };
    let (nm, nm_se) = if nmses.is_empty() {
        (None, None)
    } else {
        (Some(mean(&nmses)), Some(se(&nmses)))
    };
    MetricRecord {
        experiment: point.label.clone(),
        ebn0_db: point.ebn0_db,
        trials,
        ber,
        ber_se,
        nmse: nm,
        nmse_se: nm_se,
        fail_rate: failed as f64 / trials as f64,
        seconds: if cfg.timing { secs } else { 0.0 },
    }
}

fn run_points(cfg: &ExperimentConfig, label: &str) -> Result<Vec<MetricRecord>> {
    cfg.validate()?;
    let basis = cfg.basis();
    let points = sweep_points(cfg, label);
    let mut records = Vec::with_capacity(points.len());
    let mut channel_dump = String::new();
    for point in &points {
        let start = Instant::now();
        let outs: Vec<Result<TrialOut>> = (0..cfg.trials)
            .into_par_iter()
            .map(|t| run_trial(cfg, &basis, point, t))
            .collect();
        let mut oks = Vec::with_capacity(outs.len());
        for o in outs {
            oks.push(o?);
        }
        if cfg.dump_channels.is_some() {
            for o in &oks {
                if let Some(rows) = &o.channel_rows {
                    channel_dump.push_str(rows);
                }
            }
        }
        records.push(reduce_point(cfg, point, &oks, start.elapsed().as_secs_f64()));
    }
    if let (Some(path), false) = (&cfg.dump_channels, channel_dump.is_empty()) {
        let full = format!("trial,p,l,k,re_h,im_h\n{channel_dump}");
        std::fs::write(path, full)?;
    }
    if let Some(out) = &cfg.out {
        std::fs::write(out, write_metrics_csv(&records))?;
        std::fs::write(out.with_extension("manifest.txt"), manifest_text(cfg))?;
    }
    Ok(records)
}

/// BER vs Eb/N0 (optionally per sigma_p): fresh channel and noise per trial.
pub fn run_ber(cfg: &ExperimentConfig) -> Result<Vec<MetricRecord>> {
    run_points(cfg, "ber")
}

/// NMSE (and the BER reached with the estimated channel) vs Eb/N0.
pub fn run_nmse(cfg: &ExperimentConfig) -> Result<Vec<MetricRecord>> {
    if matches!(cfg.pilot, PilotModel::None) {
        return Err(CddmError::BadConfig("nmse experiment requires a pilot".into()));
    }
    let mut cfg = cfg.clone();
    cfg.csi = Csi::Estimated;
    run_points(&cfg, "nmse")
}

/// PSD curves for the shaped waveform and the rectangular-hold reference.
/// Returns `(shaped, reference)`; when `out` is set, writes the shaped curve
/// there and the reference next to it with a `_ref` suffix.
pub fn run_psd(cfg: &ExperimentConfig) -> Result<(Vec<(f64, f64)>, Vec<(f64, f64)>)> {
    cfg.validate()?;
    let pulse = cfg.pulse.as_ref().ok_or_else(|| {
        CddmError::BadConfig("psd experiment requires pulse = srrc".into())
    })?;
    let basis = cfg.basis();
    let n = cfg.dims.n();
    let mut rng = trial_rng(cfg.seed, 0, 0);
    let bits: Vec<bool> = (0..2 * n).map(|_| rng.gen()).collect();
    let x = qpsk_map(&bits)?;
    let t = dd_to_time(&czt(&x, &basis)?);
    let with_cp = add_cp(&t, cfg.cp_len)?;
    let shaped_sig = pulse_shape(&with_cp, cfg.cp_len, pulse, cfg.dims, cfg.t_symbol_s)?;
    let held_sig = hold_upsample(&with_cp, pulse.oversample, cfg.dims, cfg.t_symbol_s);
    let shaped = psd(&shaped_sig, cfg.nfft, cfg.overlap)?;
    let reference = psd(&held_sig, cfg.nfft, cfg.overlap)?;
    if let Some(out) = &cfg.out {
        std::fs::write(out, psd_csv(&shaped))?;
        let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("psd");
        let ext = out.extension().and_then(|s| s.to_str()).unwrap_or("csv");
        let ref_path = out.with_file_name(format!("{stem}_ref.{ext}"));
        std::fs::write(ref_path, psd_csv(&reference))?;
        std::fs::write(out.with_extension("manifest.txt"), manifest_text(cfg))?;
    }
    Ok((shaped, reference))
}

/// PSD CSV body (`freq_hz,power_db`).
pub fn psd_csv(curve: &[(f64, f64)]) -> String {
    let mut s = String::from("freq_hz,power_db\n");
    for &(f, p) in curve {
        s.push_str(&format!("{},{}\n", fmt9(f), fmt9(p)));
    }
    s
}
