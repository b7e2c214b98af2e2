//! Two-shot capture renderer: a pinhole camera facing a flat fabric patch,
//! one point light on the camera side (reflection shot) and one behind the
//! patch (transmission shot). Gap texels in the transmission shot get a
//! defocused Gaussian splat of the light seen directly through the holes.

use crate::fabric::FabricEval;
use crate::image::RadianceImage;
use crate::math::{rgb, v3, Rgb, Vec3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub const INCH_M: f64 = 0.0254;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Light {
    /// Meters; the patch is centered at the origin in the z = 0 plane.
    pub position: [f64; 3],
    /// Radiant intensity per channel.
    pub intensity: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Defocus {
    /// Peak factor of the gap splat.
    pub scale: f64,
    /// Gaussian radius of the splat, pixels.
    pub sigma_px: f64,
}

/// Capture geometry; defaults model the reference rig (2×2-inch patch,
/// camera 20 cm in front, lights 30 cm on the axis on each side).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CaptureScene {
    pub resolution: usize,
    pub patch_w_inches: f64,
    pub patch_h_inches: f64,
    /// Camera z, meters (looks down −z at the patch center).
    pub camera_distance_m: f64,
    pub light_front: Light,
    pub light_back: Light,
    pub defocus: Defocus,
    /// 2×2 sub-pixel supersampling.
    pub supersample: bool,
}

impl Default for CaptureScene {
    fn default() -> CaptureScene {
        CaptureScene {
            resolution: 512,
            patch_w_inches: 2.0,
            patch_h_inches: 2.0,
            camera_distance_m: 0.20,
            light_front: Light { position: [0.0, 0.0, 0.30], intensity: [0.05; 3] },
            light_back: Light { position: [0.0, 0.0, -0.30], intensity: [0.05; 3] },
            defocus: Defocus { scale: 8.0, sigma_px: 20.0 },
            supersample: false,
        }
    }
}

impl CaptureScene {
    pub fn patch_half_extent_m(&self) -> (f64, f64) {
        (self.patch_w_inches * INCH_M / 2.0, self.patch_h_inches * INCH_M / 2.0)
    }

    /// Patch point under pixel-space coordinates (continuous, pixel centers
    /// at integer + 0.5). Image axes and world axes coincide: columns run
    /// along +x, rows along +y, so the uv frame of the weave map is also the
    /// world frame of its shading normals.
    pub fn pixel_to_patch(&self, px: f64, py: f64) -> Vec3 {
        let (hw, hh) = self.patch_half_extent_m();
        let res = self.resolution as f64;
        v3((px / res) * 2.0 * hw - hw, (py / res) * 2.0 * hh - hh, 0.0)
    }

    /// Inverse of `pixel_to_patch` (z ignored).
    pub fn patch_to_pixel(&self, p: Vec3) -> (f64, f64) {
        let (hw, hh) = self.patch_half_extent_m();
        let res = self.resolution as f64;
        (((p.x + hw) / (2.0 * hw)) * res, ((p.y + hh) / (2.0 * hh)) * res)
    }

    /// uv ∈ [0,1)² of a patch point; v grows with image row.
    pub fn patch_to_uv(&self, p: Vec3) -> (f64, f64) {
        let (hw, hh) = self.patch_half_extent_m();
        ((p.x + hw) / (2.0 * hw), (p.y + hh) / (2.0 * hh))
    }

    /// Where the straight ray from the camera to the back light crosses the
    /// patch plane, in pixel coordinates.
    pub fn back_light_pixel(&self) -> (f64, f64) {
        let cam = v3(0.0, 0.0, self.camera_distance_m);
        let light = Vec3 {
            x: self.light_back.position[0],
            y: self.light_back.position[1],
            z: self.light_back.position[2],
        };
        let t = cam.z / (cam.z - light.z);
        self.patch_to_pixel(cam + (light - cam) * t)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.resolution == 0 || self.resolution > 8192 {
            return Err(format!("resolution {} outside 1..=8192", self.resolution));
        }
        if self.patch_w_inches <= 0.0 || self.patch_h_inches <= 0.0 {
            return Err("patch dimensions must be positive".into());
        }
        if self.camera_distance_m <= 0.0 {
            return Err("camera distance must be positive".into());
        }
        if self.light_front.position[2] <= 0.0 {
            return Err("front light must sit in front of the patch (z > 0)".into());
        }
        if self.light_back.position[2] >= 0.0 {
            return Err("back light must sit behind the patch (z < 0)".into());
        }
        if self.defocus.sigma_px <= 0.0 {
            return Err("defocus sigma must be positive".into());
        }
        Ok(())
    }
}

/// Which capture of the pair to render.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shot {
    Reflection,
    Transmission,
}

fn light_vec(l: &Light) -> (Vec3, Rgb) {
    (v3(l.position[0], l.position[1], l.position[2]), rgb(l.intensity[0], l.intensity[1], l.intensity[2]))
}

fn shade(eval: &FabricEval, scene: &CaptureScene, shot: Shot, px: f64, py: f64) -> Rgb {
    let cam = v3(0.0, 0.0, scene.camera_distance_m);
    let p = scene.pixel_to_patch(px, py);
    let (u, v) = scene.patch_to_uv(p);
    let wo = (cam - p).normalized();
    let (lpos, intensity) = match shot {
        Shot::Reflection => light_vec(&scene.light_front),
        Shot::Transmission => light_vec(&scene.light_back),
    };
    let to_light = lpos - p;
    let r2 = to_light.length_squared();
    let wi = to_light / r2.sqrt();

    let sp = eval.map.eval(u, v);
    if sp.gap {
        return match shot {
            Shot::Reflection => Rgb::BLACK,
            Shot::Transmission => {
                let (cx, cy) = scene.back_light_pixel();
                let d2 = (px - cx).powi(2) + (py - cy).powi(2);
                let g = scene.defocus.scale
                    * (-d2 / (2.0 * scene.defocus.sigma_px * scene.defocus.sigma_px)).exp();
                intensity * (g / r2)
            }
        };
    }
    let f = eval.bsdf(&sp, wi, wo).value;
    f * intensity * (wi.z.abs() / r2)
}

/// Render one capture; rows are distributed across the thread pool but the
/// result is identical for any pool size.
pub fn render_shot(eval: &FabricEval, scene: &CaptureScene, shot: Shot) -> RadianceImage {
    let res = scene.resolution;
    let mut img = RadianceImage::new(res, res);
    let offsets: &[(f64, f64)] = if scene.supersample {
        &[(0.25, 0.25), (0.75, 0.25), (0.25, 0.75), (0.75, 0.75)]
    } else {
        &[(0.5, 0.5)]
    };
    let norm = 1.0 / offsets.len() as f64;
    img.pixels
        .par_chunks_mut(res)
        .enumerate()
        .for_each(|(y, row)| {
            for (x, out) in row.iter_mut().enumerate() {
                let mut acc = Rgb::BLACK;
                for (ox, oy) in offsets {
                    acc += shade(eval, scene, shot, x as f64 + ox, y as f64 + oy);
                }
                acc = acc * norm;
                *out = [acc.r as f32, acc.g as f32, acc.b as f32];
            }
        });
    img
}

/// Render the reflection and transmission shots of one fabric.
pub fn render_pair(eval: &FabricEval, scene: &CaptureScene) -> (RadianceImage, RadianceImage) {
    (render_shot(eval, scene, Shot::Reflection), render_shot(eval, scene, Shot::Transmission))
}
