use cddm_core::channel::{apply_dd, build_h, ls_equalize, DDChannel, PathTap};
use cddm_core::chirp::{czt, dzt, iczt, idfnt, ChirpBasis, ChirpKind};
use cddm_core::grid::{DDFrame, GridDims};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;

fn random_symbols(n: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    (0..n)
        .map(|_| {
            Complex64::new(
                if rng.gen::<bool>() { s } else { -s },
                if rng.gen::<bool>() { s } else { -s },
            )
        })
        .collect()
}

fn four_path_channel(dims: GridDims) -> DDChannel {
    DDChannel::new(
        dims,
        vec![
            PathTap { delay: 0, doppler: 1, gain: Complex64::new(0.7, 0.1) },
            PathTap { delay: 2, doppler: -2, gain: Complex64::new(0.3, -0.4) },
            PathTap { delay: 5, doppler: 3, gain: Complex64::new(-0.2, 0.2) },
            PathTap { delay: 8, doppler: 0, gain: Complex64::new(0.1, 0.3) },
        ],
    )
    .unwrap()
}

fn bench_transforms(c: &mut Criterion) {
    let mut group = c.benchmark_group("transforms");
    for (m_d, n_d) in [(512usize, 32usize), (128, 128)] {
        let dims = GridDims::new(m_d, n_d).unwrap();
        let basis = ChirpBasis::new(dims, ChirpKind::Dfnt);
        let x = random_symbols(dims.n(), 1);
        let frame = czt(&x, &basis).unwrap();
        group.bench_with_input(
            BenchmarkId::new("czt_sparse", format!("{m_d}x{n_d}")),
            &x,
            |b, x| b.iter(|| czt(x, &basis).unwrap()),
        );
        group.bench_with_input(
            BenchmarkId::new("iczt_sparse", format!("{m_d}x{n_d}")),
            &frame,
            |b, f| b.iter(|| iczt(f, &basis).unwrap()),
        );
    }
    // dense reference route at a size where it is still tolerable
    let dims = GridDims::new(128, 16).unwrap();
    let x = random_symbols(dims.n(), 2);
    group.bench_function("dense_dzt_idfnt_128x16", |b| {
        b.iter(|| dzt(&idfnt(&x), dims).unwrap())
    });
    group.finish();
}

fn bench_channel(c: &mut Criterion) {
    let mut group = c.benchmark_group("channel");
    let dims = GridDims::new(512, 32).unwrap();
    let ch = four_path_channel(dims);
    let frame = DDFrame::from_vec(dims, random_symbols(dims.n(), 3)).unwrap();
    group.bench_function("apply_dd_512x32_4path", |b| {
        b.iter(|| apply_dd(&frame, &ch).unwrap())
    });
    let h = build_h(&ch);
    let v = frame.vec();
    group.bench_function("matvec_implicit_512x32", |b| b.iter(|| h.matvec(&v)));

    let small = GridDims::new(64, 16).unwrap();
    let ch_small = DDChannel::new(
        small,
        vec![
            PathTap { delay: 0, doppler: 1, gain: Complex64::new(0.7, 0.1) },
            PathTap { delay: 1, doppler: -2, gain: Complex64::new(0.3, -0.4) },
            PathTap { delay: 2, doppler: 2, gain: Complex64::new(-0.2, 0.2) },
            PathTap { delay: 3, doppler: 0, gain: Complex64::new(0.1, 0.3) },
        ],
    )
    .unwrap();
    let h_small = build_h(&ch_small);
    let y = h_small.matvec(&random_symbols(small.n(), 4));
    group.bench_function("ls_equalize_mmse_64x16", |b| {
        b.iter(|| ls_equalize(&y, &h_small, 0.02).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_transforms, bench_channel);
criterion_main!(benches);
