mod common;

use lowlight::imagecore::Frame;
use lowlight::temporalsmooth::*;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, Normal};

fn random_plane(w: usize, h: usize, seed: u64) -> Plane {
    let mut rng = common::rng(seed);
    Plane {
        width: w,
        height: h,
        data: (0..w * h).map(|_| rng.random_range(-1.0..1.0f32)).collect(),
    }
}

fn noisy(clean: &Frame, sigma: f32, seed: u64) -> Frame {
    let mut rng = common::rng(seed);
    let noise = Normal::new(0.0f32, sigma).unwrap();
    Frame::from_clamped(
        clean.width(),
        clean.height(),
        clean
            .data()
            .iter()
            .map(|v| v + noise.sample(&mut rng))
            .collect(),
    )
    .unwrap()
}

#[test]
fn haar_examples() {
    let p = Plane {
        width: 2,
        height: 2,
        data: vec![1.0, 0.0, 0.0, 0.0],
    };
    let b = dwt2(&p).unwrap();
    for band in [&b.ll, &b.lh, &b.hl, &b.hh] {
        assert_eq!(band.data, vec![0.5]);
    }
    let c = Plane {
        width: 6,
        height: 4,
        data: vec![0.3; 24],
    };
    let b = dwt2(&c).unwrap();
    assert!(b.ll.data.iter().all(|&v| (v - 0.6).abs() < 1e-6));
    assert!([&b.lh, &b.hl, &b.hh]
        .iter()
        .all(|band| band.data.iter().all(|&v| v == 0.0)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn haar_round_trip_any_size(w in 1usize..40, h in 1usize..40, seed in any::<u64>()) {
        let p = random_plane(w, h, seed);
        let back = idwt2(&dwt2(&p).unwrap());
        prop_assert_eq!((back.width, back.height), (w, h));
        prop_assert!(back.data.iter().zip(&p.data).all(|(a, b)| (a - b).abs() < 1e-6));
    }

    #[test]
    fn warp_of_zero_field_is_identity(w in 1usize..30, h in 1usize..30, seed in any::<u64>()) {
        let f = common::uniform_frame(w, h, &mut common::rng(seed));
        let (out, mask) = warp(&f, &MotionField::zero(w, h)).unwrap();
        prop_assert_eq!(out, f);
        prop_assert!(mask.iter().all(|&m| m));
    }

    #[test]
    fn blend_is_a_convex_combination(seed in any::<u64>(), n in 0usize..6, mag in 0.0f32..400.0) {
        let mut rng = common::rng(seed);
        let center = common::uniform_frame(8, 6, &mut rng);
        let nbs: Vec<Compensated> = (0..n)
            .map(|j| {
                let frame = common::uniform_frame(8, 6, &mut rng);
                Compensated {
                    offset: if j % 2 == 0 { (j / 2 + 1) as isize } else { -((j / 2 + 1) as isize) },
                    valid: (0..48).map(|_| rng.random_bool(0.7)).collect(),
                    magnitude: (0..48).map(|_| rng.random_range(0.0..mag.max(1e-3))).collect(),
                    frame,
                }
            })
            .collect();
        let out = blend(&center, &nbs, &SmoothingConfig::default()).unwrap();
        for i in 0..48 {
            for c in 0..3 {
                let k = c * 48 + i;
                let samples = std::iter::once(center.data()[k]).chain(nbs.iter().filter(|nb| nb.valid[i]).map(|nb| nb.frame.data()[k]));
                let (lo, hi) = samples.fold((f32::MAX, f32::MIN), |(lo, hi), v| (lo.min(v), hi.max(v)));
                prop_assert!(out.data()[k] >= lo - 1e-6 && out.data()[k] <= hi + 1e-6);
            }
        }
    }
}

#[test]
fn pyramid_levels_halve_with_ceiling() {
    let p = random_plane(37, 20, 1);
    let pyr = WaveletPyramid::build(&p, 3).unwrap();
    let dims: Vec<_> = pyr
        .levels
        .iter()
        .map(|s| (s.ll.width, s.ll.height))
        .collect();
    assert_eq!(dims, vec![(19, 10), (10, 5), (5, 3)]);
}

#[test]
fn prealign_handles_large_shifts() {
    let r = common::textured_frame(256, 192, 4);
    for (dx, dy) in [(30.0, -20.0), (-12.0, 7.0), (3.5, 0.25)] {
        let t = common::translated(&r, dx, dy);
        let s = prealign(&r, &t, 5).unwrap();
        assert!(s.confident);
        assert!(
            (s.dx as f64 - dx).abs() <= 0.5 && (s.dy as f64 - dy).abs() <= 0.5,
            "{s:?} vs ({dx}, {dy})"
        );
    }
}

#[test]
fn compensation_registers_a_shifted_neighbor() {
    let r = common::textured_frame(160, 128, 8);
    let t = common::translated(&r, 9.0, -5.0);
    let comp = compensate(&r, &t, 1, default_levels(160, 128)).unwrap();
    let mut err = Vec::new();
    for i in 0..160 * 128 {
        if comp.valid[i] {
            err.push((comp.frame.data()[i] - r.data()[i]).abs());
        }
    }
    err.sort_by(f32::total_cmp);
    assert!(err.len() > 160 * 128 / 2);
    assert!(err[err.len() / 2] < 1e-3);
    let expected = 9.0f32.hypot(5.0);
    let bad: Vec<_> = (0..160 * 128)
        .filter(|&i| comp.valid[i] && (comp.magnitude[i] - expected).abs() >= 1.5)
        .map(|i| (i % 160, i / 160, comp.magnitude[i]))
        .collect();
    assert!(bad.is_empty(), "{:?}", &bad[..bad.len().min(20)]);
}

#[test]
fn static_noise_is_reduced_pixelwise() {
    let clean = common::textured_frame(96, 96, 2);
    let frames: Vec<Frame> = (0..7).map(|t| noisy(&clean, 0.05, 100 + t)).collect();
    let out = smooth_window(&frames, 3, &SmoothingConfig::default()).unwrap();
    let before: f64 = frames[3]
        .data()
        .iter()
        .zip(clean.data())
        .map(|(a, b)| ((a - b) as f64).powi(2))
        .sum();
    let after: f64 = out
        .data()
        .iter()
        .zip(clean.data())
        .map(|(a, b)| ((a - b) as f64).powi(2))
        .sum();
    assert!(after < before / 4.0, "{after} vs {before}");
}

#[test]
fn truncated_windows_at_sequence_ends() {
    let clean = common::textured_frame(64, 64, 6);
    let frames: Vec<Frame> = (0..4).map(|t| noisy(&clean, 0.03, t)).collect();
    let cfg = SmoothingConfig {
        n_max: 2,
        motion_cutoff: 256.0,
    };
    let seq = smooth_sequence(&frames, &cfg).unwrap();
    assert_eq!(seq.len(), 4);
    // Frame 0 sees frames 0..=2 only.
    let direct = smooth_window(&frames[0..3], 0, &cfg).unwrap();
    assert_eq!(seq[0], direct);
}

#[test]
fn unrelated_frames_degrade_gracefully() {
    let mut rng = common::rng(77);
    let frames: Vec<Frame> = (0..5)
        .map(|_| common::uniform_frame(64, 64, &mut rng))
        .collect();
    let out = smooth_window(&frames, 2, &SmoothingConfig::default()).unwrap();
    assert!(out
        .data()
        .iter()
        .all(|v| v.is_finite() && (0.0..=1.0).contains(v)));
}
