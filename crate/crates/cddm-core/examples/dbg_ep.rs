// scratch debug
use cddm_core::channel::*;
use cddm_core::chirp::*;
use cddm_core::grid::*;
use cddm_core::pilot::*;
use cddm_core::detect::*;
use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;

fn main() {
    let dims = GridDims::new(64, 16).unwrap();
    let basis = ChirpBasis::new(dims, ChirpKind::Dfnt);
    let cfg = EpConfig {
        pilot_pos: (32, 8),
        guard_delay: 2,
        guard_doppler: GuardDoppler::Half(4),
        snr_p_db: 60.0,
    };
    let mut rng = ChaCha12Rng::seed_from_u64(1);
    let ch = eva_channel(500.0, 5e9, dims, 66.67e-6, &mut rng).unwrap();
    for p in ch.paths() { println!("true path l={} k={} h={}", p.delay, p.doppler, p.gain); }
    let bits: Vec<bool> = (0..2*dims.n()).map(|_| rng.gen()).collect();
    let x = qpsk_map(&bits).unwrap();
    let mut ep = insert_ep(&x, &basis, &cfg, 1.0).unwrap();
    ep.set_pilot_amplitude(1e-4);
    let y = apply_dd(&ep.frame, &ch).unwrap();
    let eps = 1e-10;
    let hits = detect_paths(&y, &ep.layout, (1, 2), eps).unwrap();
    println!("hits: {hits:?}");
    for &(l, k) in &hits {
        let g = estimate_gain_basic(&y, (l, k), &ep.layout).unwrap();
        let truth = ch.paths().iter().find(|p| p.delay == l && p.doppler == k);
        println!("  ({l},{k}): ghat={g}  true={:?} err={:?}", truth.map(|t| t.gain),
                 truth.map(|t| (g - t.gain).norm()));
    }
}
