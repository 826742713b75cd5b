use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Image;

/// Deterministic colored test pattern: multi-octave value noise under a
/// scatter of flat rectangles and discs, so it has texture at every scale
/// and plenty of corners.
pub fn procedural_texture(width: usize, height: usize, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut img = Image::filled(width, height, 3, 0.0);
    let octaves = [(48.0, 0.5), (16.0, 0.3), (5.0, 0.2)];
    for &(cell, weight) in &octaves {
        let gw = (width as f64 / cell).ceil() as usize + 2;
        let gh = (height as f64 / cell).ceil() as usize + 2;
        let lattice: Vec<[f64; 3]> = (0..gw * gh)
            .map(|_| [rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()])
            .collect();
        for y in 0..height {
            let gy = y as f64 / cell;
            let iy = gy.floor() as usize;
            let ty = smoothstep(gy - iy as f64);
            for x in 0..width {
                let gx = x as f64 / cell;
                let ix = gx.floor() as usize;
                let tx = smoothstep(gx - ix as f64);
                let px = img.pixel_mut(x, y);
                for c in 0..3 {
                    let v00 = lattice[iy * gw + ix][c];
                    let v10 = lattice[iy * gw + ix + 1][c];
                    let v01 = lattice[(iy + 1) * gw + ix][c];
                    let v11 = lattice[(iy + 1) * gw + ix + 1][c];
                    let top = v00 + tx * (v10 - v00);
                    let bottom = v01 + tx * (v11 - v01);
                    px[c] += weight * (top + ty * (bottom - top));
                }
            }
        }
    }
    let shapes = (width * height / 900).max(8);
    for _ in 0..shapes {
        let color = [rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()];
        let cx = rng.random_range(0.0..width as f64);
        let cy = rng.random_range(0.0..height as f64);
        let sx = rng.random_range(3.0..(width as f64 / 8.0).max(4.0));
        let sy = rng.random_range(3.0..(height as f64 / 8.0).max(4.0));
        let disc = rng.random_bool(0.35);
        let x0 = (cx - sx).floor().max(0.0) as usize;
        let x1 = ((cx + sx).ceil() as usize).min(width.saturating_sub(1));
        let y0 = (cy - sy).floor().max(0.0) as usize;
        let y1 = ((cy + sy).ceil() as usize).min(height.saturating_sub(1));
        for y in y0..=y1 {
            for x in x0..=x1 {
                let (dx, dy) = ((x as f64 - cx) / sx, (y as f64 - cy) / sy);
                let inside = if disc { dx * dx + dy * dy <= 1.0 } else { dx.abs() <= 1.0 && dy.abs() <= 1.0 };
                if inside {
                    img.pixel_mut(x, y).copy_from_slice(&color);
                }
            }
        }
    }
    img
}

fn smoothstep(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_in_range() {
        let a = procedural_texture(64, 48, 9);
        assert_eq!(a, procedural_texture(64, 48, 9));
        assert_ne!(a, procedural_texture(64, 48, 10));
        assert!(a.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
