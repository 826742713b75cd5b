#![allow(dead_code)]

use std::path::{Path, PathBuf};

use markerforge::geometry::{fundamental_from_pose, CameraIntrinsics, FundamentalMatrix, Point2, RelativePose};
use markerforge::imaging::procedural_texture;
use markerforge::FlowField;
use nalgebra::{Matrix3, Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Writes `n` procedural textures of the given size into `dir`.
pub fn texture_dir(dir: &Path, n: usize, size: (usize, usize), seed: u64) -> PathBuf {
    std::fs::create_dir_all(dir).unwrap();
    for i in 0..n {
        procedural_texture(size.0, size.1, seed + i as u64)
            .save_png(dir.join(format!("t{i:02}.png")))
            .unwrap();
    }
    dir.to_path_buf()
}

/// Two posed pinhole cameras looking at points in front of both.
pub struct Rig {
    pub k_a: CameraIntrinsics,
    pub k_b: CameraIntrinsics,
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
    pub f: FundamentalMatrix,
}

impl Rig {
    pub fn random(seed: u64) -> Self {
        let mut r = rng(seed);
        let intr = |r: &mut ChaCha8Rng| {
            let f = r.random_range(300.0..600.0);
            CameraIntrinsics::new(f, f * r.random_range(0.95..1.05), r.random_range(60.0..100.0), r.random_range(45.0..75.0))
                .unwrap()
        };
        let k_a = intr(&mut r);
        let k_b = intr(&mut r);
        let axis = Vector3::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), r.random_range(-1.0..1.0));
        let rotation = Rotation3::new(axis.normalize() * r.random_range(0.02..0.3)).into_inner();
        let t = Vector3::new(r.random_range(-1.0..1.0), r.random_range(-0.3..0.3), r.random_range(-0.2..0.2));
        let translation = t.normalize();
        let pose = RelativePose::new(rotation, translation).unwrap();
        let f = fundamental_from_pose(&k_a, &k_b, &pose);
        Self {
            k_a,
            k_b,
            rotation,
            translation,
            f,
        }
    }

    /// Projects marker pixel `p` seen at depth `z` in camera A into camera B.
    pub fn transfer(&self, p: Point2, z: f64) -> Option<Point2> {
        let x = self.k_a.unproject(p, z);
        self.k_b.project(&(self.rotation * x + self.translation))
    }

    /// Flow over a `w x h` grid from exact projections at random depths.
    pub fn exact_flow(&self, w: usize, h: usize, seed: u64) -> FlowField {
        let mut r = rng(seed);
        FlowField::from_fn(w, h, |x, y| {
            let z = r.random_range(4.0..20.0);
            self.transfer(Point2::new(x as f64, y as f64), z)
        })
    }
}
