mod common;

use markerforge::geometry::{AffineTransform, GeometricTransform, Point2, Warp};
use markerforge::imaging::{
    bilinear_sample, procedural_texture, psnr_value, ssim_value, warp_by_flow, warp_by_transform, PSNR_CAP_DB,
};
use markerforge::{FlowField, Image, ValidRegion};
use proptest::prelude::*;

fn flow_strategy() -> impl Strategy<Value = FlowField> {
    (1usize..12, 1usize..12).prop_flat_map(|(w, h)| {
        proptest::collection::vec(proptest::option::weighted(0.8, (-500.0..500.0f64, -500.0..500.0f64)), w * h)
            .prop_map(move |cells| {
                FlowField::from_fn(w, h, |x, y| {
                    cells[y * w + x].map(|(dx, dy)| Point2::new(x as f64 + dx, y as f64 + dy))
                })
            })
    })
}

proptest! {
    #[test]
    fn flo_round_trip_keeps_mask_and_f32_displacements(flow in flow_strategy()) {
        let back = FlowField::from_flo_bytes(&flow.to_flo_bytes()).unwrap();
        prop_assert_eq!(back.size(), flow.size());
        prop_assert_eq!(back.valid_mask(), flow.valid_mask());
        for (x, y, t) in flow.iter_valid() {
            let u = back.get(x, y).unwrap();
            prop_assert_eq!(u.x - x as f64, ((t.x - x as f64) as f32) as f64);
            prop_assert_eq!(u.y - y as f64, ((t.y - y as f64) as f32) as f64);
        }
        prop_assert_eq!(back.to_flo_bytes(), flow.to_flo_bytes());
    }

    #[test]
    fn truncated_flo_is_rejected(flow in flow_strategy(), cut in 1usize..8) {
        let bytes = flow.to_flo_bytes();
        prop_assert!(FlowField::from_flo_bytes(&bytes[..bytes.len() - cut]).is_err());
    }

    #[test]
    fn bilinear_sample_hits_pixel_centers(seed in 0u64..50, x in 0usize..24, y in 0usize..18) {
        let img = procedural_texture(24, 18, seed);
        let v = bilinear_sample(&img, Point2::new(x as f64, y as f64)).unwrap();
        for c in 0..3 {
            prop_assert!((v[c] - img.get(x, y, c)).abs() < 1e-12);
        }
    }

    #[test]
    fn bilinear_sample_is_none_off_image(x in 23.0001..40.0f64) {
        let img = procedural_texture(24, 18, 1);
        prop_assert!(bilinear_sample(&img, Point2::new(x, 3.0)).is_none());
        prop_assert!(bilinear_sample(&img, Point2::new(-x, 3.0)).is_none());
    }

    #[test]
    fn ssim_and_psnr_of_identical_images_are_maximal(seed in 0u64..50, keep in 0.05..1.0f64) {
        let img = procedural_texture(32, 24, seed);
        let mut r = common::rng(seed);
        let mask: Vec<bool> = (0..32 * 24).map(|i| i == 0 || rand::Rng::random_bool(&mut r, keep)).collect();
        let region = ValidRegion::new(32, 24, mask).unwrap();
        prop_assert!((ssim_value(&img, &img, &region).unwrap() - 1.0).abs() < 1e-12);
        prop_assert_eq!(psnr_value(&img, &img, &region).unwrap(), PSNR_CAP_DB);
    }

    #[test]
    fn psnr_never_exceeds_the_cap(seed in 0u64..50, eps in 0.0..1e-3f64) {
        let a = procedural_texture(16, 16, seed);
        let b = a.map(|v| v + eps);
        let p = psnr_value(&a, &b, &ValidRegion::full(16, 16)).unwrap();
        prop_assert!(p <= PSNR_CAP_DB);
        if eps > 0.0 {
            prop_assert!((p - (-20.0 * eps.log10()).min(PSNR_CAP_DB)).abs() < 1e-6);
        }
    }

    #[test]
    fn ssim_is_symmetric(seed in 0u64..50) {
        let a = procedural_texture(20, 20, seed);
        let b = procedural_texture(20, 20, seed + 1);
        let region = ValidRegion::full(20, 20);
        let ab = ssim_value(&a, &b, &region).unwrap();
        let ba = ssim_value(&b, &a, &region).unwrap();
        prop_assert!((ab - ba).abs() < 1e-12);
        prop_assert!(ab < 1.0);
    }
}

#[test]
fn warp_by_identity_flow_reproduces_the_marker() {
    let marker = procedural_texture(40, 30, 3);
    let (warped, region) = warp_by_flow(&marker, &FlowField::identity(40, 30), (40, 30)).unwrap();
    assert_eq!(region.count(), 40 * 30);
    for (a, b) in warped.data().iter().zip(marker.data()) {
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn warp_by_flow_agrees_with_warp_by_transform() {
    let marker = procedural_texture(60, 40, 5);
    let a = AffineTransform::new(0.2, 0.1, 1.1, Point2::new(20.0, 15.0)).unwrap();
    let t = GeometricTransform::new(Warp::Affine(a), (60, 40), (120, 90)).unwrap();
    let flow = FlowField::from_fn(60, 40, |x, y| t.apply(Point2::new(x as f64, y as f64)).ok());
    let (by_flow, r1) = warp_by_flow(&marker, &flow, (120, 90)).unwrap();
    let (by_t, r2) = warp_by_transform(&marker, &t, (120, 90)).unwrap();
    let both = r1.intersect(&r2).unwrap();
    assert!(both.count() as f64 > 0.95 * r1.count().max(r2.count()) as f64);
    let mut max = 0.0f64;
    for (i, _) in both.mask().iter().enumerate().filter(|(_, &m)| m) {
        let (x, y) = (i % 120, i / 120);
        for c in 0..3 {
            max = max.max((by_flow.get(x, y, c) - by_t.get(x, y, c)).abs());
        }
    }
    assert!(max < 1e-9, "max channel difference {max}");
}

#[test]
fn fully_invalid_flow_covers_nothing() {
    let marker = Image::filled(8, 8, 3, 0.5);
    let (_, region) = warp_by_flow(&marker, &FlowField::invalid(8, 8), (8, 8)).unwrap();
    assert!(region.is_empty());
}

#[test]
fn png_round_trip_is_quantized() {
    let dir = tempfile::tempdir().unwrap();
    let img = procedural_texture(17, 9, 8);
    let path = dir.path().join("t.png");
    img.save_png(&path).unwrap();
    let back = Image::load(&path).unwrap();
    assert_eq!(back.data(), img.quantized().data());
}
