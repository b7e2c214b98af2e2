//! Image-space objectives: feature-correlation statistics that forgive yarn
//! phase shifts, a coarse pixel anchor, and structural priors on the yarn
//! cross-section parameters.

use crate::fabric::FabricParams;
use crate::image::RadianceImage;
use crate::weave::Pattern;

pub const PIXEL_WEIGHT: f64 = 0.1;
pub const PRIOR_WEIGHT: f64 = 0.001;
pub const PIXEL_RES: usize = 16;
const N_FEATURES: usize = 16;

/// A reflection/transmission capture pair.
#[derive(Debug, Clone)]
pub struct ImagePair {
    pub reflect: RadianceImage,
    pub transmit: RadianceImage,
}

fn luminance(px: [f32; 3]) -> f64 {
    0.2126 * px[0] as f64 + 0.7152 * px[1] as f64 + 0.0722 * px[2] as f64
}

/// 16 per-pixel feature maps: R, G, B, luminance, then horizontal/vertical
/// derivative, 4-neighbour Laplacian and 3×3 binomial blur of luminance at
/// dilations 1, 2, 4. All filters wrap around the image edges, so the
/// statistics are exactly invariant to cyclic shifts.
fn feature_maps(img: &RadianceImage) -> Vec<Vec<f64>> {
    let (w, h) = (img.width, img.height);
    let n = w * h;
    let mut maps = vec![vec![0.0f64; n]; N_FEATURES];
    let mut lum = vec![0.0f64; n];
    for i in 0..n {
        let px = img.pixels[i];
        maps[0][i] = px[0] as f64;
        maps[1][i] = px[1] as f64;
        maps[2][i] = px[2] as f64;
        lum[i] = luminance(px);
    }
    maps[3].copy_from_slice(&lum);

    let at = |x: isize, y: isize| -> f64 {
        let xi = x.rem_euclid(w as isize) as usize;
        let yi = y.rem_euclid(h as isize) as usize;
        lum[yi * w + xi]
    };
    for (di, s) in [1isize, 2, 4].into_iter().enumerate() {
        let base = 4 + di * 4;
        for y in 0..h as isize {
            for x in 0..w as isize {
                let i = y as usize * w + x as usize;
                maps[base][i] = (at(x + s, y) - at(x - s, y)) / 2.0;
                maps[base + 1][i] = (at(x, y + s) - at(x, y - s)) / 2.0;
                maps[base + 2][i] = at(x + s, y) + at(x - s, y) + at(x, y + s) + at(x, y - s) - 4.0 * at(x, y);
                let mut blur = 0.0;
                for (dy, wy) in [(-s, 1.0), (0, 2.0), (s, 1.0)] {
                    for (dx, wx) in [(-s, 1.0), (0, 2.0), (s, 1.0)] {
                        blur += wy * wx * at(x + dx, y + dy);
                    }
                }
                maps[base + 3][i] = blur / 16.0;
            }
        }
    }
    maps
}

fn gram(maps: &[Vec<f64>]) -> [[f64; N_FEATURES]; N_FEATURES] {
    let n = maps[0].len() as f64;
    let mut g = [[0.0; N_FEATURES]; N_FEATURES];
    for i in 0..N_FEATURES {
        for j in i..N_FEATURES {
            let dot: f64 = maps[i].iter().zip(&maps[j]).map(|(a, b)| a * b).sum();
            g[i][j] = dot / n;
            g[j][i] = g[i][j];
        }
    }
    g
}

/// Mean absolute difference of the 16×16 feature co-occurrence matrices.
pub fn texture_stats_loss(a: &RadianceImage, b: &RadianceImage) -> f64 {
    let ga = gram(&feature_maps(a));
    let gb = gram(&feature_maps(b));
    let mut acc = 0.0;
    for i in 0..N_FEATURES {
        for j in 0..N_FEATURES {
            acc += (ga[i][j] - gb[i][j]).abs();
        }
    }
    acc / (N_FEATURES * N_FEATURES) as f64
}

/// Mean absolute pixel difference after box-downsampling both images to
/// `PIXEL_RES` square.
pub fn pixel_loss(a: &RadianceImage, b: &RadianceImage) -> f64 {
    let da = a.downsample(PIXEL_RES).expect("image not divisible into the pixel-loss grid");
    let db = b.downsample(PIXEL_RES).expect("image not divisible into the pixel-loss grid");
    let mut acc = 0.0;
    for (pa, pb) in da.pixels.iter().zip(&db.pixels) {
        for c in 0..3 {
            acc += (pa[c] as f64 - pb[c] as f64).abs();
        }
    }
    acc / (PIXEL_RES * PIXEL_RES * 3) as f64
}

/// Gaussian prior centres and widths for (beta, xi) by weave family.
pub fn structure_prior(pattern: Pattern) -> ((f64, f64), (f64, f64)) {
    match pattern.family() {
        Pattern::Plain => ((1.0, 1.0), (0.75, 0.1)),
        Pattern::Satin => ((0.1, 0.5), (0.9, 0.05)),
        _ => ((1.0, 0.5), (0.9, 0.05)),
    }
}

/// Squared-deviation prior on each yarn's bending and coverage.
pub fn prior_loss(params: &FabricParams) -> f64 {
    let ((mu_b, sig_b), (mu_x, sig_x)) = structure_prior(params.pattern);
    [&params.weft, &params.warp]
        .into_iter()
        .map(|y| {
            (y.beta - mu_b).powi(2) / (2.0 * sig_b * sig_b)
                + (y.xi - mu_x).powi(2) / (2.0 * sig_x * sig_x)
        })
        .sum()
}

/// Full objective over a capture pair.
pub fn total_loss(rendered: &ImagePair, target: &ImagePair, params: &FabricParams) -> f64 {
    let mut loss = PRIOR_WEIGHT * prior_loss(params);
    for (r, t) in [(&rendered.reflect, &target.reflect), (&rendered.transmit, &target.transmit)] {
        loss += texture_stats_loss(r, t) + PIXEL_WEIGHT * pixel_loss(r, t);
    }
    loss
}
