//! Synthetic stand-in for a physical deformation / viewpoint / lighting
//! benchmark: graded thin-plate splines, graded out-of-plane rotations and
//! graded exposure curves applied to procedural markers.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flyingmarkers::{derive_seed, min_jacobian_det, synthesize_sample};
use crate::geometry::{homography_from_four_points, GeometricTransform, Point2, ThinPlateSpline, Warp, TPS_PARAM_COUNT};
use crate::imaging::{procedural_texture, Image};

use super::{ManifestEntry, Subset};

#[derive(Debug, Clone, PartialEq)]
pub struct DvlConfig {
    pub markers: usize,
    pub images_per_marker: usize,
    pub marker_size: (usize, usize),
    pub canvas_size: (usize, usize),
    pub seed: u64,
    /// Also write the known ground-truth flow for every record.
    pub write_ground_truth: bool,
}

impl Default for DvlConfig {
    fn default() -> Self {
        Self {
            markers: 10,
            images_per_marker: 10,
            marker_size: (160, 120),
            canvas_size: (320, 240),
            seed: 0,
            write_ground_truth: true,
        }
    }
}

/// Tilt of the marker plane per viewpoint level, in degrees.
pub fn viewpoint_angle_deg(level: u32) -> f64 {
    match level {
        1 => 10.0,
        2 => 25.0,
        3 => 50.0,
        _ => 75.0,
    }
}

/// `(gain, gamma)` of the exposure curve for a lighting level. Level 1 is
/// well lit, level 2 overexposed, levels 3..=10 progressively darker.
pub fn exposure_curve(level: u32) -> (f64, f64) {
    match level {
        1 => (1.0, 1.0),
        2 => (1.8, 0.8),
        l => {
            let k = (l - 2) as f64;
            (0.72f64.powf(k), 1.0 + 0.1 * k)
        }
    }
}

/// Applies the level's exposure curve and requantizes to 8 bits.
pub fn lighting_exposure(img: &Image, level: u32) -> Image {
    let (gain, gamma) = exposure_curve(level);
    img.map(|v| (gain * v.max(0.0).powf(gamma)).clamp(0.0, 1.0)).quantized()
}

fn level_for(subset: Subset, column: usize, columns: usize) -> u32 {
    let n = *subset.level_range().expect("physical subset").end() as usize;
    match subset {
        // the second column holds the well-lit shot, the first the overexposed one
        Subset::Lighting if columns == 10 => match column {
            0 => 2,
            1 => 1,
            c => c as u32 + 1,
        },
        _ => (column * n / columns.max(1)) as u32 + 1,
    }
}

fn tps_for_level<R: Rng>(rng: &mut R, level: u32) -> Result<ThinPlateSpline> {
    let amp = 0.05 * level as f64;
    for _ in 0..100 {
        let rot = rng.random_range(-5f64..5.0).to_radians();
        let s = 0.55;
        let mut p = [0.0; TPS_PARAM_COUNT];
        p[..6].copy_from_slice(&[
            s * rot.cos(),
            -s * rot.sin(),
            rng.random_range(-0.1..0.1),
            s * rot.sin(),
            s * rot.cos(),
            rng.random_range(-0.1..0.1),
        ]);
        for v in &mut p[6..] {
            *v = rng.random_range(-amp..=amp);
        }
        let tps = ThinPlateSpline::from_params(&p)?;
        if min_jacobian_det(&tps) > 0.0 {
            return Ok(tps);
        }
    }
    Err(Error::Sampling(format!("no unfolded spline at deformation level {level}")))
}

/// Marker plane rotated by `angle_deg` about a random in-plane axis and seen
/// by a pinhole camera; returns the marker-to-canvas homography.
fn tilted_homography<R: Rng>(rng: &mut R, angle_deg: f64, marker: (usize, usize), canvas: (usize, usize)) -> Result<Warp> {
    let (mw, mh) = (marker.0 as f64, marker.1 as f64);
    let (cw, ch) = (canvas.0 as f64, canvas.1 as f64);
    let f = cw;
    let dist = f * mw / (0.55 * cw);
    let axis = rng.random_range(0.0..std::f64::consts::PI);
    let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let rot = nalgebra::Rotation3::from_axis_angle(
        &nalgebra::Unit::new_normalize(nalgebra::Vector3::new(axis.cos(), axis.sin(), 0.0)),
        sign * angle_deg.to_radians(),
    );
    let (jx, jy) = (rng.random_range(-0.05..0.05) * cw, rng.random_range(-0.05..0.05) * ch);
    let src = [
        Point2::new(0.0, 0.0),
        Point2::new(mw - 1.0, 0.0),
        Point2::new(mw - 1.0, mh - 1.0),
        Point2::new(0.0, mh - 1.0),
    ];
    let dst = src.map(|p| {
        let v = rot * nalgebra::Vector3::new(p.x - (mw - 1.0) / 2.0, p.y - (mh - 1.0) / 2.0, 0.0);
        let z = v.z + dist;
        Point2::new(f * v.x / z + (cw - 1.0) / 2.0 + jx, f * v.y / z + (ch - 1.0) / 2.0 + jy)
    });
    Ok(Warp::Homography(homography_from_four_points(&src, &dst)?))
}

struct Record {
    entry: ManifestEntry,
    reference: Image,
    twin: Option<Image>,
    gt: crate::imaging::FlowField,
}

fn build_record(cfg: &DvlConfig, subset: Subset, m: usize, column: usize, marker: &Image) -> Result<Record> {
    let index = (subset as u64) << 32 | (m * cfg.images_per_marker + column) as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, index, 0));
    let level = level_for(subset, column, cfg.images_per_marker);
    let (ms, cs) = (cfg.marker_size, cfg.canvas_size);
    let warp = match subset {
        Subset::Deformation => Warp::Tps(tps_for_level(&mut rng, level)?),
        Subset::Viewpoint => tilted_homography(&mut rng, viewpoint_angle_deg(level), ms, cs)?,
        _ => tilted_homography(&mut rng, 10.0, ms, cs)?,
    };
    let t = GeometricTransform::new(warp, (ms.0 as u32, ms.1 as u32), (cs.0 as u32, cs.1 as u32))?;
    let background = procedural_texture(cs.0, cs.1, derive_seed(cfg.seed, index, 1)).quantized();
    let syn = synthesize_sample(marker, &background, &t)?;
    let clean = syn.reference.quantized();
    let id = format!("{}_{m:02}_{column:02}", subset.as_str());
    let dir = format!("{}/{m:02}_{column:02}", subset.as_str());
    let (reference, twin) = if subset == Subset::Lighting {
        (lighting_exposure(&clean, level), Some(clean))
    } else {
        (clean, None)
    };
    Ok(Record {
        entry: ManifestEntry {
            id,
            subset,
            level,
            marker: format!("markers/marker_{m:02}.png"),
            reference: format!("{dir}/reference.png"),
            twin: twin.as_ref().map(|_| format!("{dir}/twin.png")),
            gt_flow: cfg.write_ground_truth.then(|| format!("{dir}/flow.flo")),
        },
        reference,
        twin,
        gt: syn.flow,
    })
}

/// Writes the stand-in under `root` with a `benchmark.json` manifest
/// (`markers x images_per_marker` records per subset) and returns its entries.
pub fn generate_dvl(cfg: &DvlConfig, root: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let root = root.as_ref();
    if cfg.markers == 0 || cfg.images_per_marker == 0 {
        return Err(Error::InvalidInput("stand-in needs at least one marker and image".into()));
    }
    fs::create_dir_all(root.join("markers"))?;
    let markers: Vec<Image> = (0..cfg.markers)
        .map(|m| procedural_texture(cfg.marker_size.0, cfg.marker_size.1, derive_seed(cfg.seed, m as u64, 2)).quantized())
        .collect();
    for (m, img) in markers.iter().enumerate() {
        img.save_png(root.join(format!("markers/marker_{m:02}.png")))?;
    }
    let jobs: Vec<(Subset, usize, usize)> = [Subset::Deformation, Subset::Viewpoint, Subset::Lighting]
        .into_iter()
        .flat_map(|s| (0..cfg.markers).flat_map(move |m| (0..cfg.images_per_marker).map(move |c| (s, m, c))))
        .collect();
    let entries: Result<Vec<ManifestEntry>> = jobs
        .par_iter()
        .map(|&(s, m, c)| {
            let rec = build_record(cfg, s, m, c, &markers[m])?;
            let dir = root.join(format!("{}/{m:02}_{c:02}", s.as_str()));
            fs::create_dir_all(&dir)?;
            rec.reference.save_png(dir.join("reference.png"))?;
            if let Some(t) = &rec.twin {
                t.save_png(dir.join("twin.png"))?;
            }
            if cfg.write_ground_truth {
                rec.gt.write_flo(dir.join("flow.flo"))?;
            }
            Ok(rec.entry)
        })
        .collect();
    let entries = entries?;
    fs::write(root.join("benchmark.json"), serde_json::to_string_pretty(&entries)? + "\n")?;
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lighting_levels_follow_capture_order() {
        let levels: Vec<u32> = (0..10).map(|c| level_for(Subset::Lighting, c, 10)).collect();
        assert_eq!(levels, vec![2, 1, 3, 4, 5, 6, 7, 8, 9, 10]);
    }

    #[test]
    fn levels_cover_documented_ranges() {
        for s in [Subset::Deformation, Subset::Viewpoint, Subset::Lighting] {
            let mut l: Vec<u32> = (0..10).map(|c| level_for(s, c, 10)).collect();
            l.sort_unstable();
            l.dedup();
            assert_eq!(l, s.level_range().unwrap().collect::<Vec<_>>());
        }
    }

    #[test]
    fn darker_levels_are_darker() {
        let img = Image::filled(4, 4, 1, 0.5);
        let mean = |l| lighting_exposure(&img, l).data().iter().sum::<f64>();
        assert_eq!(mean(1), img.quantized().data().iter().sum::<f64>());
        assert!(mean(2) > mean(1));
        for l in 3..10 {
            assert!(mean(l + 1) <= mean(l));
        }
    }
}
