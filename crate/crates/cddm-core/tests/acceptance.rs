//! Acceptance suite: one test per shipped guarantee, each printing a
//! PASS/FAIL line (run with `--nocapture` to see them).
//!
//! Run: `cargo test -p cddm-core --test acceptance -- --nocapture`

use cddm_core::channel::{
    apply_dd, build_h, apply_time, DDChannel, PathTap,
};
use cddm_core::chirp::{czt, iczt, ChirpBasis, ChirpKind};
use cddm_core::detect::qpsk_awgn_ber_theory;
use cddm_core::grid::{max_abs_diff, DDFrame, GridDims};
use cddm_core::harness::{
    run_ber, run_nmse, run_psd, write_metrics_csv, ChannelModel, Csi, DetectorKind,
    ExperimentConfig, ExperimentKind, GainEstimator, PilotModel,
};
use cddm_core::modem::{add_cp, dd_to_time, strip_cp, time_to_dd, PulseSpec};
use cddm_core::pilot::{
    detect_paths, estimate_gain_basic, estimate_gain_extended, insert_ep, insert_sp, EpConfig,
    GuardDoppler, SpConfig,
};
use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use std::f64::consts::FRAC_1_SQRT_2;
use std::time::Instant;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn random_qpsk(n: usize, rng: &mut ChaCha12Rng) -> Vec<Complex64> {
    (0..n)
        .map(|_| {
            c(
                if rng.gen::<bool>() { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 },
                if rng.gen::<bool>() { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 },
            )
        })
        .collect()
}

fn report(criterion: u32, name: &str, pass: bool, detail: &str, started: Instant) {
    let status = if pass { "PASS" } else { "FAIL" };
    println!(
        "criterion {criterion:2} ({name}): {status} [{detail}] in {:.1} s",
        started.elapsed().as_secs_f64()
    );
    assert!(pass, "criterion {criterion} ({name}) failed: {detail}");
}

#[test]
fn criterion_01_transform_exactness() {
    let started = Instant::now();
    let kinds = [
        ChirpKind::Dfnt,
        ChirpKind::Daft { alpha: 0 },
        ChirpKind::Daft { alpha: 1 },
        ChirpKind::Daft { alpha: 3 },
    ];
    let mut worst: f64 = 0.0;
    for (m_d, n_d) in [(16usize, 4usize), (32, 8), (128, 16)] {
        let dims = GridDims::new(m_d, n_d).unwrap();
        for kind in kinds {
            let basis = ChirpBasis::new(dims, kind);
            let mut rng = ChaCha12Rng::seed_from_u64(100 + m_d as u64);
            for _ in 0..100 {
                let x = random_qpsk(dims.n(), &mut rng);
                let back = iczt(&czt(&x, &basis).unwrap(), &basis).unwrap();
                worst = worst.max(max_abs_diff(&x, &back));
            }
        }
    }
    let pass = worst < 1e-10 && started.elapsed().as_secs_f64() < 10.0;
    report(1, "transform exactness", pass, &format!("worst dev {worst:.2e}"), started);
}

#[test]
fn criterion_02_closed_form_positions() {
    let started = Instant::now();
    let dims6 = GridDims::new(6, 6).unwrap();
    let basis6 = ChirpBasis::new(dims6, ChirpKind::Dfnt);
    let delta0: Vec<(usize, usize)> = basis6.positions(0).collect();
    let mut pass = delta0 == vec![(0, 3), (1, 2), (2, 1), (3, 0), (4, 5), (5, 4)];

    // modular conditions, exhaustively over every (i, m, n)
    for (m_d, n_d) in [(6usize, 6usize), (8, 4), (32, 32)] {
        let dims = GridDims::new(m_d, n_d).unwrap();
        let half = m_d as i64 / 2;
        let basis = ChirpBasis::new(dims, ChirpKind::Dfnt);
        for i in 0..dims.n() {
            for m in 0..m_d {
                let col = basis.col_of(i, m);
                for n in 0..n_d {
                    let f = (half + m as i64 + n as i64 - i as i64).rem_euclid(n_d as i64);
                    pass &= (n == col) == (f == 0);
                }
            }
        }
        let alphas: &[u32] = if m_d == 32 { &[0, 3, 5] } else { &[0, 1] };
        for &alpha in alphas {
            let basis = ChirpBasis::new(dims, ChirpKind::Daft { alpha });
            let s = 2 * alpha as i64 + 1;
            for i in 0..dims.n() {
                for m in 0..m_d {
                    let col = basis.col_of(i, m);
                    for n in 0..n_d {
                        let f = (s * m as i64 + s * half + i as i64 - n as i64)
                            .rem_euclid(n_d as i64);
                        pass &= (n == col) == (f == 0);
                    }
                }
            }
        }
    }
    report(2, "closed-form positions", pass, "delta_0 and modular conditions", started);
}

#[test]
fn criterion_03_channel_model_equivalence() {
    let started = Instant::now();
    let dims = GridDims::new(16, 8).unwrap();
    let cp = 4;
    let window: Vec<(usize, i32)> =
        (0..=3usize).flat_map(|l| (-2..=2i32).map(move |k| (l, k))).collect();

    let mut rng = ChaCha12Rng::seed_from_u64(3000);
    let mut path_sets: Vec<Vec<(usize, i32)>> = Vec::new();
    for &p in &window {
        path_sets.push(vec![p]);
    }
    for a in 0..window.len() {
        for b in a + 1..window.len() {
            path_sets.push(vec![window[a], window[b]]);
        }
    }
    for _ in 0..50 {
        let mut set = Vec::new();
        while set.len() < 4 {
            let cand = window[rng.gen_range(0..window.len())];
            if !set.contains(&cand) {
                set.push(cand);
            }
        }
        path_sets.push(set);
    }

    let mut worst: f64 = 0.0;
    for set in &path_sets {
        let paths: Vec<PathTap> = set
            .iter()
            .map(|&(l, k)| PathTap {
                delay: l,
                doppler: k,
                gain: c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5),
            })
            .collect();
        let ch = DDChannel::new(dims, paths).unwrap();
        let h = build_h(&ch);
        for _ in 0..100 {
            let frame =
                DDFrame::from_vec(dims, random_qpsk(dims.n(), &mut rng)).unwrap();
            let via_dd = apply_dd(&frame, &ch).unwrap();
            let via_mat = h.matvec(&frame.vec());
            worst = worst.max(max_abs_diff(via_dd.as_slice(), &via_mat));
            let t = dd_to_time(&frame);
            let y_t = apply_time(&add_cp(&t, cp).unwrap(), cp, &ch).unwrap();
            let via_time = time_to_dd(strip_cp(&y_t, cp), dims).unwrap();
            worst = worst.max(max_abs_diff(via_dd.as_slice(), via_time.as_slice()));
        }
    }
    let secs = started.elapsed().as_secs_f64();
    let pass = worst < 1e-9 && secs < 60.0;
    report(
        3,
        "channel three-way equivalence",
        pass,
        &format!("{} path sets, worst dev {worst:.2e}", path_sets.len()),
        started,
    );
}

#[test]
fn criterion_04_estimation_exactness() {
    let started = Instant::now();
    let dims = GridDims::new(32, 32).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(4000);
    let window = (3usize, 2usize);
    let mut worst_gain: f64 = 0.0;
    let mut sets_ok = true;

    // pilot-only SP over the guarded affine-chirp basis
    let sp_basis = ChirpBasis::new(dims, ChirpKind::Daft { alpha: 2 });
    let sp_cfg = SpConfig {
        i_rho: dims.n() / 2,
        lambda: dims.m_d(),
        sigma_p: 0.3,
        pilot_value: c(1.0, 0.0),
    };
    let sp = insert_sp(&vec![c(0.0, 0.0); dims.n()], &sp_basis, &sp_cfg).unwrap();

    // EP with a guard that covers the scan window
    let ep_basis = ChirpBasis::new(dims, ChirpKind::Dfnt);
    let ep_cfg = EpConfig {
        pilot_pos: (16, 16),
        guard_delay: 3,
        guard_doppler: GuardDoppler::Half(4),
        snr_p_db: 60.0,
    };

    for trial in 0..50 {
        // random integer channel inside the window, distinct taps
        let mut taps: Vec<PathTap> = Vec::new();
        while taps.len() < 3 {
            let l = rng.gen_range(0..=window.0);
            let k = rng.gen_range(-(window.1 as i32)..=window.1 as i32);
            if taps.iter().any(|t| t.delay == l && t.doppler == k) {
                continue;
            }
            let g = c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
            taps.push(PathTap { delay: l, doppler: k, gain: g });
        }
        let ch = DDChannel::new(dims, taps.clone()).unwrap();
        let mut truth: Vec<(usize, i32)> = taps.iter().map(|t| (t.delay, t.doppler)).collect();
        truth.sort_unstable();

        // SP route
        let y = apply_dd(&sp.frame, &ch).unwrap();
        let eps = 1e-6 * sp.layout.mean_cell_power().sqrt();
        let mut hits = detect_paths(&y, &sp.layout, window, eps).unwrap();
        hits.sort_unstable();
        sets_ok &= hits == truth;
        for tap in &taps {
            let basic = estimate_gain_basic(&y, (tap.delay, tap.doppler), &sp.layout).unwrap();
            let ext =
                estimate_gain_extended(&y, (tap.delay, tap.doppler), &sp.layout, &sp_basis)
                    .unwrap();
            worst_gain = worst_gain.max((basic - tap.gain).norm());
            worst_gain = worst_gain.max((ext - tap.gain).norm());
        }

        // EP route, data superimposed outside the guard
        let x = random_qpsk(dims.n(), &mut rng);
        let mut ep = insert_ep(&x, &ep_basis, &ep_cfg, 1.0).unwrap();
        ep.set_pilot_amplitude(1000.0);
        let y = apply_dd(&ep.frame, &ch).unwrap();
        let eps = 1e-6 * ep.layout.mean_cell_power().sqrt();
        let mut hits = detect_paths(&y, &ep.layout, window, eps).unwrap();
        hits.sort_unstable();
        sets_ok &= hits == truth;
        if trial == 0 && hits != truth {
            eprintln!("EP mismatch: {hits:?} vs {truth:?}");
        }
        for tap in &taps {
            let g = estimate_gain_basic(&y, (tap.delay, tap.doppler), &ep.layout).unwrap();
            worst_gain = worst_gain.max((g - tap.gain).norm());
        }
    }
    let pass = sets_ok && worst_gain < 1e-9;
    report(
        4,
        "estimation exactness",
        pass,
        &format!("sets ok: {sets_ok}, worst gain dev {worst_gain:.2e}"),
        started,
    );
}

fn sigma_sweep_config() -> ExperimentConfig {
    ExperimentConfig {
        experiment: ExperimentKind::Nmse,
        dims: GridDims::new(128, 128).unwrap(),
        chirp: ChirpKind::Daft { alpha: 20 },
        t_symbol_s: 66.67e-6,
        fc_hz: 5e9,
        speed_kmh: 500.0,
        channel: ChannelModel::Eva,
        cp_len: 2,
        csi: Csi::Estimated,
        detector: DetectorKind::MmseIczt,
        estimator: GainEstimator::Extended,
        pilot: PilotModel::Sp(SpConfig {
            i_rho: 128 * 128 / 2,
            lambda: 128,
            sigma_p: 0.3,
            pilot_value: c(1.0, 0.0),
        }),
        sigma_p_list: Some(vec![0.1, 0.2, 0.3, 0.4, 0.5]),
        ebn0_db: vec![12.0],
        trials: 500,
        seed: 5,
        out: None,
        pulse: None,
        nfft: 4096,
        overlap: 0.5,
        timing: false,
        dump_channels: None,
        source_text: None,
    }
}

#[test]
fn criterion_05_sigma_p_sweep() {
    let started = Instant::now();
    let cfg = sigma_sweep_config();
    let recs = run_nmse(&cfg).unwrap();
    assert_eq!(recs.len(), 5);
    let nmse: Vec<(f64, f64)> = recs
        .iter()
        .map(|r| (r.nmse.unwrap(), r.nmse_se.unwrap()))
        .collect();
    let ber: Vec<(f64, f64)> = recs.iter().map(|r| (r.ber, r.ber_se)).collect();
    for r in &recs {
        eprintln!(
            "  {}: nmse {:.3e} (se {:.1e})  ber {:.3e} (se {:.1e})  fail {:.3}",
            r.experiment,
            r.nmse.unwrap(),
            r.nmse_se.unwrap(),
            r.ber,
            r.ber_se,
            r.fail_rate
        );
    }
    // NMSE strictly decreasing in sigma_p, with 3-sigma separation
    let mut nmse_monotone = true;
    for w in nmse.windows(2) {
        nmse_monotone &= w[1].0 + 3.0 * w[1].1 < w[0].0 - 3.0 * w[0].1;
    }
    // BER minimum attained strictly inside [0.2, 0.4].
    //
    // Known red: with unbiased correlation estimation the channel estimate
    // is already interference-limited at sigma_p = 0.1 (NMSE ~ 2e-3), so
    // pilot power only ever costs data energy here and the measured minimum
    // sits at the low edge of the sweep; see the project notes for the
    // full analysis. The assertion is kept as stated rather than tuned to
    // the observed behavior.
    let argmin = ber
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .0.partial_cmp(&b.1 .0).unwrap())
        .unwrap()
        .0;
    let interior = (1..=3).contains(&argmin);
    let best = ber[argmin];
    let edge_ok = best.0 + 3.0 * best.1 < ber[0].0 - 3.0 * ber[0].1
        && best.0 + 3.0 * best.1 < ber[4].0 - 3.0 * ber[4].1;
    let secs = started.elapsed().as_secs_f64();
    let pass = nmse_monotone && interior && edge_ok && secs < 1800.0;
    report(
        5,
        "sigma_p sweep trends",
        pass,
        &format!(
            "nmse strictly decreasing: {nmse_monotone}; ber argmin index {argmin} (want 1..=3), edge margins {edge_ok}"
        ),
        started,
    );
}

#[test]
fn criterion_06_extended_correlation_suppression() {
    let started = Instant::now();
    let dims = GridDims::new(512, 32).unwrap();
    let basis = ChirpBasis::new(dims, ChirpKind::Dfnt);
    let i = dims.n() / 2;
    // peak cross-correlation against every non-orthogonal chirp, for the
    // stored-segment correlator and the extension-completed one
    let mut peak_num: f64 = 0.0;
    for j in 0..dims.n() {
        if j % dims.n_d() == i % dims.n_d() {
            continue;
        }
        let mut acc = c(0.0, 0.0);
        for m in 0..dims.m_d() {
            acc += basis.chirp_value(j, m) * basis.chirp_value(i, m).conj();
        }
        peak_num = peak_num.max(acc.norm());
    }
    let seg = peak_num / dims.m_d() as f64;
    let ext = peak_num / dims.n() as f64;
    let ratio_db = 10.0 * (seg / ext).log10();
    let secs = started.elapsed().as_secs_f64();
    let pass = ratio_db >= 10.0 && secs < 300.0;
    report(
        6,
        "extended-correlation suppression",
        pass,
        &format!("suppression {ratio_db:.2} dB (seg {seg:.3e}, ext {ext:.3e})"),
        started,
    );
}

#[test]
fn criterion_07_awgn_ber_calibration() {
    let started = Instant::now();
    let base = ExperimentConfig {
        experiment: ExperimentKind::Ber,
        dims: GridDims::new(64, 16).unwrap(),
        chirp: ChirpKind::Dfnt,
        t_symbol_s: 66.67e-6,
        fc_hz: 5e9,
        speed_kmh: 0.0,
        channel: ChannelModel::Awgn,
        cp_len: 0,
        csi: Csi::Perfect,
        detector: DetectorKind::MaxPath,
        estimator: GainEstimator::Extended,
        pilot: PilotModel::None,
        sigma_p_list: None,
        ebn0_db: vec![],
        trials: 0,
        seed: 7,
        out: None,
        pulse: None,
        nfft: 4096,
        overlap: 0.5,
        timing: false,
        dump_channels: None,
        source_text: None,
    };
    // trial counts sized so each point collects >= 1e6 bits and enough
    // errors for a sub-10% estimate
    let plan = [(4.0, 1000u64), (6.0, 2000u64), (8.0, 6000u64), (10.0, 150_000u64)];
    let mut pass = true;
    let mut detail = String::new();
    for (ebn0, trials) in plan {
        let mut cfg = base.clone();
        cfg.ebn0_db = vec![ebn0];
        cfg.trials = trials;
        let rec = &run_ber(&cfg).unwrap()[0];
        let bits = trials as f64 * 2.0 * 1024.0;
        let theory = qpsk_awgn_ber_theory(ebn0);
        let rel = (rec.ber - theory).abs() / theory;
        pass &= rel < 0.10 && bits >= 1e6;
        detail.push_str(&format!(
            "{ebn0} dB: {:.3e} vs {theory:.3e} (dev {:.1}%); ",
            rec.ber,
            100.0 * rel
        ));
    }
    report(7, "AWGN BER calibration", pass, detail.trim_end_matches("; "), started);
}

#[test]
fn criterion_08_diversity_trend() {
    let started = Instant::now();
    let base = ExperimentConfig {
        experiment: ExperimentKind::Ber,
        dims: GridDims::new(64, 16).unwrap(),
        chirp: ChirpKind::Dfnt,
        t_symbol_s: 66.67e-6,
        fc_hz: 5e9,
        speed_kmh: 500.0,
        channel: ChannelModel::Eva,
        cp_len: 2,
        csi: Csi::Perfect,
        detector: DetectorKind::MmseIczt,
        estimator: GainEstimator::Extended,
        pilot: PilotModel::None,
        sigma_p_list: None,
        ebn0_db: vec![],
        trials: 0,
        seed: 8,
        out: None,
        pulse: None,
        nfft: 4096,
        overlap: 0.5,
        timing: false,
        dump_channels: None,
        source_text: None,
    };
    let plan = [
        (0.0, 300u64),
        (2.0, 300u64),
        (4.0, 300u64),
        (6.0, 500u64),
        (8.0, 1000u64),
        (10.0, 2000u64),
        (12.0, 4000u64),
        (14.0, 8000u64),
    ];
    let mut curve = Vec::new();
    for (ebn0, trials) in plan {
        let mut cfg = base.clone();
        cfg.ebn0_db = vec![ebn0];
        cfg.trials = trials;
        let rec = &run_ber(&cfg).unwrap()[0];
        eprintln!("  {ebn0:>5.1} dB: ber {:.3e} (se {:.1e})", rec.ber, rec.ber_se);
        curve.push((ebn0, rec.ber, rec.ber_se));
    }
    let mut decreasing = true;
    for w in curve.windows(2) {
        decreasing &= w[1].1 < w[0].1;
    }
    // flat-fading reference line anchored on the AWGN theory curve at the
    // first sweep point, sloped one decade per 10 dB
    let anchor = qpsk_awgn_ber_theory(curve[0].0);
    let reference = anchor * 10f64.powf(-(14.0 - curve[0].0) / 10.0);
    let final_ber = curve.last().unwrap().1;
    let beats_flat_fading = final_ber < reference;
    let pass = decreasing && beats_flat_fading;
    report(
        8,
        "diversity trend",
        pass,
        &format!(
            "monotone {decreasing}, ber(14) {final_ber:.3e} vs flat-fading line {reference:.3e}"
        ),
        started,
    );
}

#[test]
fn criterion_09_oobe_margin() {
    let started = Instant::now();
    let cfg = ExperimentConfig {
        experiment: ExperimentKind::Psd,
        dims: GridDims::new(512, 32).unwrap(),
        chirp: ChirpKind::Dfnt,
        t_symbol_s: 66.67e-6,
        fc_hz: 5e9,
        speed_kmh: 0.0,
        channel: ChannelModel::Awgn,
        cp_len: 8,
        csi: Csi::Perfect,
        detector: DetectorKind::MaxPath,
        estimator: GainEstimator::Extended,
        pilot: PilotModel::None,
        sigma_p_list: None,
        ebn0_db: vec![12.0],
        trials: 1,
        seed: 9,
        out: None,
        pulse: Some(PulseSpec { rolloff: 0.1, span_symbols: 16, oversample: 4 }),
        nfft: 4096,
        overlap: 0.5,
        timing: false,
        dump_channels: None,
        source_text: None,
    };
    let (shaped, reference) = run_psd(&cfg).unwrap();
    assert_eq!(shaped.len(), cfg.nfft / 2 + 1);
    let crit_rate = cfg.dims.m_d() as f64 / cfg.t_symbol_s;
    let f_star = 1.5 * (1.0 + 0.1) / 2.0 * crit_rate;
    let at = |curve: &[(f64, f64)], f: f64| {
        curve
            .iter()
            .min_by(|a, b| (a.0 - f).abs().partial_cmp(&(b.0 - f).abs()).unwrap())
            .unwrap()
            .1
    };
    let margin = at(&reference, f_star) - at(&shaped, f_star);
    let pass = margin >= 20.0;
    report(9, "OOBE margin", pass, &format!("{margin:.1} dB at 1.5x band edge"), started);
}

#[test]
fn criterion_10_determinism() {
    let started = Instant::now();
    // library route: identical seeds give identical CSV text
    let mut cfg = sigma_sweep_config();
    cfg.dims = GridDims::new(64, 16).unwrap();
    cfg.chirp = ChirpKind::Daft { alpha: 2 };
    cfg.speed_kmh = 200.0;
    cfg.cp_len = 1;
    cfg.pilot = PilotModel::Sp(SpConfig {
        i_rho: 512,
        lambda: 64,
        sigma_p: 0.3,
        pilot_value: c(1.0, 0.0),
    });
    cfg.sigma_p_list = None;
    cfg.trials = 50;
    let a = write_metrics_csv(&run_nmse(&cfg).unwrap());
    let b = write_metrics_csv(&run_nmse(&cfg).unwrap());
    let lib_ok = a == b;

    // file route over every shipped config (validation + reduced smoke run
    // of one desk config, twice, byte-compared)
    let config_dir = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs");
    let mut shipped_ok = true;
    for entry in std::fs::read_dir(config_dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("cfg") {
            continue;
        }
        shipped_ok &= cddm_core::harness::load_config(&path).is_ok();
    }
    let desk = cddm_core::harness::load_config(
        &std::path::Path::new(config_dir).join("ber_awgn_desk.cfg"),
    )
    .unwrap();
    let mut desk = desk;
    desk.trials = 25;
    desk.out = None;
    let r1 = write_metrics_csv(&run_ber(&desk).unwrap());
    let r2 = write_metrics_csv(&run_ber(&desk).unwrap());
    let pass = lib_ok && shipped_ok && r1 == r2;
    report(
        10,
        "determinism",
        pass,
        &format!("library {lib_ok}, shipped configs valid {shipped_ok}"),
        started,
    );
}
