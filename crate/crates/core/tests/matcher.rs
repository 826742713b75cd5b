mod common;

use markerforge::benchmark::epe;
use markerforge::geometry::{homography_from_four_points, Homography, Point2};
use markerforge::imaging::procedural_texture;
use markerforge::matcher::{
    dense_match, dense_match_scored, detect_corners, flow_from_homography, match_descriptors, ransac_fit,
    ransac_homography, DenseConfig, FailureReason, MatchOutcome, MatchSet, RansacConfig,
};
use markerforge::Image;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, Normal};

fn crop(img: &Image, x0: usize, y0: usize, w: usize, h: usize) -> Image {
    Image::from_fn(w, h, img.channels(), |x, y, c| img.get(x0 + x, y0 + y, c)).unwrap()
}

fn known_homography(seed: u64) -> Homography {
    let mut r = common::rng(seed);
    let src = [
        Point2::new(0.0, 0.0),
        Point2::new(159.0, 0.0),
        Point2::new(159.0, 119.0),
        Point2::new(0.0, 119.0),
    ];
    let dst: [Point2; 4] =
        std::array::from_fn(|i| Point2::new(src[i].x * 1.3 + 60.0 + r.random_range(-20.0..20.0), src[i].y * 1.3 + 50.0 + r.random_range(-20.0..20.0)));
    homography_from_four_points(&src, &dst).unwrap()
}

/// `inliers` noisy correspondences of `h` mixed with uniform outliers.
fn contaminated(h: &Homography, inliers: usize, outliers: usize, sigma: f64, seed: u64) -> MatchSet {
    let mut r = common::rng(seed);
    let noise = Normal::new(0.0, sigma).unwrap();
    let mut pairs = Vec::new();
    for _ in 0..inliers {
        let a = Point2::new(r.random_range(0.0..159.0), r.random_range(0.0..119.0));
        let b = h.apply(a).unwrap();
        pairs.push((a, Point2::new(b.x + noise.sample(&mut r), b.y + noise.sample(&mut r))));
    }
    for _ in 0..outliers {
        let a = Point2::new(r.random_range(0.0..159.0), r.random_range(0.0..119.0));
        pairs.push((a, Point2::new(r.random_range(0.0..320.0), r.random_range(0.0..240.0))));
    }
    // interleave deterministically so inliers are not a prefix
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    for i in (1..order.len()).rev() {
        order.swap(i, r.random_range(0..=i));
    }
    MatchSet::from_pairs(order.into_iter().map(|i| pairs[i]))
}

#[test]
fn translated_copy_matches_recover_the_shift() {
    let big = procedural_texture(260, 200, 11);
    let a = crop(&big, 20, 30, 200, 150);
    let b = crop(&big, 33, 22, 200, 150);
    let ka = detect_corners(&a, 500);
    let kb = detect_corners(&b, 500);
    let m = match_descriptors(&a, &ka, &b, &kb);
    assert!(m.len() >= 20, "only {} matches", m.len());
    let good = m
        .matches
        .iter()
        .filter(|mm| (mm.reference.location.x - (mm.marker.location.x - 13.0)).hypot(mm.reference.location.y - (mm.marker.location.y + 8.0)) <= 1.0)
        .count();
    assert!(good as f64 >= 0.9 * m.len() as f64, "{good} / {}", m.len());
}

#[test]
fn noise_images_rarely_match() {
    for seed in 0..5u64 {
        let mut r = common::rng(seed);
        let mut noise = || Image::from_fn(160, 120, 1, |_, _, _| r.random::<f64>()).unwrap();
        let (a, b) = (noise(), noise());
        let ka = detect_corners(&a, 400);
        let kb = detect_corners(&b, 400);
        let m = match_descriptors(&a, &ka, &b, &kb);
        let bound = 0.1 * ka.len().min(kb.len()) as f64;
        assert!((m.len() as f64) < bound, "seed {seed}: {} matches of {} / {} keypoints", m.len(), ka.len(), kb.len());
    }
}

#[test]
fn exact_correspondences_recover_the_homography() {
    let h = known_homography(3);
    let m = contaminated(&h, 12, 0, 0.0, 3);
    let out = ransac_homography(&m, &RansacConfig::default(), (160, 120));
    let gt = flow_from_homography(&h, 160, 120);
    let e = epe(out.flow().unwrap(), &gt).unwrap();
    assert!(e.mean < 1e-6, "{}", e.mean);
}

#[test]
fn three_matches_always_fail() {
    for seed in 0..20 {
        let m = contaminated(&known_homography(seed), 3, 0, 0.0, seed);
        let cfg = RansacConfig { seed, ..RansacConfig::default() };
        assert_eq!(
            ransac_homography(&m, &cfg, (160, 120)),
            MatchOutcome::Failed(FailureReason::InsufficientMatches { found: 3 })
        );
    }
}

#[test]
fn pure_outliers_fail_or_stay_small() {
    let m = contaminated(&known_homography(1), 0, 6, 0.0, 1);
    match ransac_fit(&m, &RansacConfig::default()) {
        Ok(fit) => assert!(fit.inliers.len() >= 4),
        Err(e) => assert!(matches!(e, FailureReason::InsufficientInliers { .. } | FailureReason::DegenerateModel { .. })),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn ransac_is_deterministic_given_a_seed(seed in any::<u64>(), data in 0u64..100) {
        let m = contaminated(&known_homography(data), 60, 90, 0.5, data);
        let cfg = RansacConfig { iterations: 300, seed, ..RansacConfig::default() };
        prop_assert_eq!(ransac_fit(&m, &cfg).unwrap(), ransac_fit(&m, &cfg).unwrap());
    }

    #[test]
    fn more_iterations_never_lower_the_best_hypothesis(seed in any::<u64>(), data in 0u64..100) {
        let m = contaminated(&known_homography(data), 40, 120, 0.5, data);
        let mut last = 0;
        for iterations in [1, 5, 25, 125, 625] {
            let cfg = RansacConfig { iterations, seed, ..RansacConfig::default() };
            let n = ransac_fit(&m, &cfg).map(|f| f.hypothesis_inliers).unwrap_or(0);
            prop_assert!(n >= last, "{iterations} iterations: {n} < {last}");
            last = n;
        }
    }

    #[test]
    fn rasterized_flow_equals_the_homography(seed in 0u64..1000) {
        let h = known_homography(seed);
        let flow = flow_from_homography(&h, 160, 120);
        prop_assert_eq!(flow.valid_count(), 160 * 120);
        for (x, y, t) in flow.iter_valid() {
            let q = h.apply(Point2::new(x as f64, y as f64)).unwrap();
            prop_assert!(t.distance(&q) < 1e-6);
        }
    }
}

#[test]
fn contaminated_matches_recover_the_flow() {
    for seed in 0..5 {
        let h = known_homography(seed);
        let m = contaminated(&h, 200, 300, 0.5, seed + 100);
        let out = ransac_homography(&m, &RansacConfig { seed, ..RansacConfig::default() }, (160, 120));
        let e = epe(out.flow().unwrap(), &flow_from_homography(&h, 160, 120)).unwrap();
        let good = e.map.iter().filter(|v| **v < 0.5).count();
        assert!(good as f64 >= 0.95 * e.count as f64, "seed {seed}: {good} / {}", e.count);
    }
}

#[test]
fn dense_recovers_a_paste_offset() {
    let marker = procedural_texture(120, 90, 21);
    let mut canvas = procedural_texture(240, 180, 22);
    let (ox, oy) = (57usize, 41usize);
    for y in 0..90 {
        for x in 0..120 {
            for c in 0..3 {
                canvas.set(ox + x, oy + y, c, marker.get(x, y, c));
            }
        }
    }
    let flow = dense_match(&marker, &canvas, &DenseConfig::default());
    let border = 8;
    let (mut good, mut total) = (0, 0);
    for y in border..90 - border {
        for x in border..120 - border {
            total += 1;
            if let Some(t) = flow.get(x, y) {
                if (t.x - (x + ox) as f64).hypot(t.y - (y + oy) as f64) <= 0.5 {
                    good += 1;
                }
            }
        }
    }
    assert!(good as f64 >= 0.95 * total as f64, "{good} / {total}");
}

#[test]
fn dense_self_match_is_identity_where_there_is_gradient() {
    let img = procedural_texture(128, 96, 31);
    let flow = dense_match(&img, &img, &DenseConfig::default());
    let g = img.to_gray();
    let (mut good, mut total) = (0, 0);
    for y in 1..95 {
        for x in 1..127 {
            let gx = g.get(x + 1, y, 0) - g.get(x - 1, y, 0);
            let gy = g.get(x, y + 1, 0) - g.get(x, y - 1, 0);
            if gx.hypot(gy) < 0.02 {
                continue;
            }
            total += 1;
            if let Some(t) = flow.get(x, y) {
                if (t.x - x as f64).hypot(t.y - y as f64) <= 0.5 {
                    good += 1;
                }
            }
        }
    }
    assert!(total > 1000);
    assert!(good as f64 >= 0.99 * total as f64, "{good} / {total}");
}

#[test]
fn dense_masks_most_of_an_unrelated_pair() {
    // default dataset marker and canvas sizes
    for seed in 0..2u64 {
        let a = procedural_texture(320, 240, 1000 + seed);
        let b = procedural_texture(640, 480, 2000 + seed);
        let flow = dense_match(&a, &b, &DenseConfig::default());
        let invalid = 320 * 240 - flow.valid_count();
        assert!(invalid * 2 >= 320 * 240, "seed {seed}: {invalid} invalid");
    }
}

#[test]
fn dense_valid_pixels_pass_the_correlation_threshold() {
    let cfg = DenseConfig::default();
    for (a, b) in [
        (procedural_texture(120, 90, 5), procedural_texture(240, 180, 6)),
        (crop(&procedural_texture(240, 180, 7), 30, 40, 120, 90), procedural_texture(240, 180, 7)),
    ] {
        let m = dense_match_scored(&a, &b, &cfg);
        for (i, &v) in m.flow.valid_mask().iter().enumerate() {
            if v {
                assert!(m.correlation[i] >= cfg.min_correlation, "pixel {i}: {}", m.correlation[i]);
            }
        }
    }
}

#[test]
fn dense_output_is_deterministic() {
    let a = crop(&procedural_texture(200, 150, 8), 10, 20, 100, 75);
    let b = procedural_texture(200, 150, 8);
    let cfg = DenseConfig::default();
    assert_eq!(dense_match(&a, &b, &cfg), dense_match(&a, &b, &cfg));
}
