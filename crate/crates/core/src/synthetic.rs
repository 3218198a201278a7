//! Synthetic scenes with known ground truth, for benches and desk tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::io::{Image, Trimap};
use crate::metrics::SegmentationMask;

/// Position of pixel `(x, y)` in the unit square, as on the pixel grid graph.
fn unit(x: usize, y: usize, w: usize, h: usize) -> [f64; 2] {
    let s = 1.0 / (w.max(h) - 1) as f64;
    [x as f64 * s, y as f64 * s]
}

fn raster(w: usize, h: usize, mut f: impl FnMut([f64; 2]) -> bool) -> Vec<bool> {
    (0..h).flat_map(|y| (0..w).map(move |x| (x, y))).map(|(x, y)| f(unit(x, y, w, h))).collect()
}

/// Pixels within `radius` of the image centre.
pub fn disk_truth(n: usize, radius: f64) -> Vec<bool> {
    raster(n, n, |p| (p[0] - 0.5).hypot(p[1] - 0.5) <= radius)
}

/// Grey `n x n` image of a bright disk on a dark background.
pub fn disk_image(n: usize, radius: f64) -> Result<Image> {
    let data = disk_truth(n, radius).iter().map(|&i| if i { 230 } else { 25 }).collect();
    Image::gray(n, n, data)
}

/// Grey two-level image: a bright ellipse and a bright square on a dark
/// background; the truth mask marks the bright pixels.
pub fn two_level_image(n: usize) -> Result<(Image, Vec<bool>)> {
    let truth = raster(n, n, |p| {
        let ellipse = ((p[0] - 0.35) / 0.2).powi(2) + ((p[1] - 0.4) / 0.14).powi(2) <= 1.0;
        let square = (0.58..=0.82).contains(&p[0]) && (0.55..=0.8).contains(&p[1]);
        ellipse || square
    });
    let data = truth.iter().map(|&i| if i { 200 } else { 60 }).collect();
    Ok((Image::gray(n, n, data)?, truth))
}

/// Colour scene with disjoint foreground and background palettes, a trimap
/// built by eroding the truth by `margin` pixels on both sides, and the
/// truth mask.
pub fn color_scene(n: usize, margin: usize, seed: u64) -> Result<(Image, Trimap, SegmentationMask)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth = raster(n, n, |p| {
        let body = ((p[0] - 0.48) / 0.3).powi(2) + ((p[1] - 0.52) / 0.22).powi(2) <= 1.0;
        let head = (p[0] - 0.72).hypot(p[1] - 0.3) <= 0.12;
        body || head
    });
    let mut data = Vec::with_capacity(3 * n * n);
    for &inside in &truth {
        let base: [f64; 3] = if inside { [200.0, 70.0, 50.0] } else { [40.0, 110.0, 190.0] };
        for b in base {
            let noise: f64 = rng.random_range(-25.0..25.0);
            data.push((b + noise).round().clamp(0.0, 255.0) as u8);
        }
    }
    let image = Image::rgb(n, n, data)?;
    let codes = trimap_codes(&truth, n, n, margin);
    Ok((image, Trimap::new(n, n, codes)?, SegmentationMask::new(truth)))
}

/// 255 where the truth survives erosion by `margin`, 0 where the complement
/// does, 128 elsewhere (chessboard distance).
pub fn trimap_codes(truth: &[bool], w: usize, h: usize, margin: usize) -> Vec<u8> {
    let m = margin as isize;
    (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .map(|(x, y)| {
            let own = truth[y * w + x];
            let mut uniform = true;
            'scan: for dy in -m..=m {
                for dx in -m..=m {
                    let (xx, yy) = (x as isize + dx, y as isize + dy);
                    if xx < 0 || yy < 0 || xx >= w as isize || yy >= h as isize {
                        continue;
                    }
                    if truth[yy as usize * w + xx as usize] != own {
                        uniform = false;
                        break 'scan;
                    }
                }
            }
            match (uniform, own) {
                (true, true) => 255,
                (true, false) => 0,
                _ => 128,
            }
        })
        .collect()
}
