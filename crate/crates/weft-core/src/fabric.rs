//! Fabric parameter model and the full surface BSDF: two stacked microflake
//! slabs per yarn crossing plus a two-term diffuse, with straight-through
//! delta transmission in the inter-yarn gaps.

use crate::layer::{two_layer_eval, MultiShadowing, Slab, SlabLobe, COS_CLAMP};
use crate::math::{Rgb, Vec3};
use crate::microflake::Fiber;
use crate::weave::{tension_thickness, Pattern, SurfacePoint, WeaveMap, YarnGeometry, YarnKind};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Closed parameter ranges used for sampling and for the squashed
/// optimization space.
pub mod ranges {
    pub const ALPHA: (f64, f64) = (0.01, 1.0);
    pub const THICKNESS: (f64, f64) = (0.1, 5.0);
    pub const ALBEDO: (f64, f64) = (0.0, 1.0);
    pub const MIX_W: (f64, f64) = (0.0, 1.0);
    pub const MULTI_W: (f64, f64) = (0.1, 2.0);
    pub const BETA: (f64, f64) = (0.1, 2.0);
    pub const XI: (f64, f64) = (0.1, 1.0);
    pub const DENSITY: (f64, f64) = (45.0, 335.0);
}

/// Per-yarn appearance parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YarnParams {
    /// Yarns per inch.
    pub density: f64,
    /// Single-scattering fiber roughness.
    pub alpha_s: f64,
    /// Multiple-scattering fiber roughness.
    pub alpha_m: f64,
    /// Single-scattering optical thickness.
    pub t_s: f64,
    /// Multiple-scattering optical thickness.
    pub t_m: f64,
    /// Specular (flake) albedo; the multiple-scattering albedo is derived
    /// from it and never stored.
    pub k_s: Rgb,
    /// Bent-cylinder height scaling.
    pub beta: f64,
    /// Yarn width as a fraction of the cell.
    pub xi: f64,
    /// Fiber twist, degrees.
    pub twist_deg: f64,
}

/// Full fabric description.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FabricParams {
    pub pattern: Pattern,
    pub weft: YarnParams,
    pub warp: YarnParams,
    /// Diffuse reflection albedo.
    pub k_d_r: Rgb,
    /// Diffuse transmission albedo.
    pub k_d_t: Rgb,
    /// Blend between normal-mapped (1) and uniform (0) diffuse.
    pub w: f64,
    /// Exponent divisor deriving the multiple-scattering albedo.
    pub w_m: f64,
    /// Relative amplitude of per-crossing jitter on beta and k_s.
    pub noise: f64,
}

impl FabricParams {
    /// Multiple-scattering flake albedo: k_s^{1/w_m}, per channel.
    pub fn multi_albedo(&self, kind: YarnKind) -> Rgb {
        self.yarn(kind).k_s.powf(1.0 / self.w_m)
    }

    pub fn yarn(&self, kind: YarnKind) -> &YarnParams {
        match kind {
            YarnKind::Weft => &self.weft,
            YarnKind::Warp => &self.warp,
        }
    }

    /// Reject out-of-range values with a message naming the offending field.
    pub fn validate(&self) -> Result<(), String> {
        fn check(name: &str, v: f64, lo: f64, hi: f64) -> Result<(), String> {
            if !v.is_finite() || v < lo || v > hi {
                return Err(format!("{name} = {v} outside [{lo}, {hi}]"));
            }
            Ok(())
        }
        fn check_rgb(name: &str, v: Rgb) -> Result<(), String> {
            for (c, x) in [("r", v.r), ("g", v.g), ("b", v.b)] {
                if !x.is_finite() || x < 0.0 || x > 1.0 {
                    return Err(format!("{name}.{c} = {x} outside [0, 1]"));
                }
            }
            Ok(())
        }
        for (suffix, y) in [("weft", &self.weft), ("warp", &self.warp)] {
            check(&format!("density_{suffix}"), y.density, 1.0, 1000.0)?;
            check(&format!("alpha_s_{suffix}"), y.alpha_s, 1e-3, 1.0)?;
            check(&format!("alpha_m_{suffix}"), y.alpha_m, 1e-3, 1.0)?;
            check(&format!("t_s_{suffix}"), y.t_s, 0.0, 100.0)?;
            check(&format!("t_m_{suffix}"), y.t_m, 0.0, 100.0)?;
            check_rgb(&format!("k_s_s_{suffix}"), y.k_s)?;
            check(&format!("beta_{suffix}"), y.beta, 0.0, 10.0)?;
            check(&format!("xi_{suffix}"), y.xi, 0.01, 1.0)?;
            check(&format!("twist_{suffix}"), y.twist_deg, -180.0, 180.0)?;
        }
        check_rgb("k_d_r", self.k_d_r)?;
        check_rgb("k_d_t", self.k_d_t)?;
        check("w", self.w, 0.0, 1.0)?;
        check("w_m", self.w_m, 1e-3, 10.0)?;
        check("noise", self.noise, 0.0, 1.0)?;
        Ok(())
    }

    pub fn weave_geometry(&self, kind: YarnKind) -> YarnGeometry {
        let y = self.yarn(kind);
        YarnGeometry {
            density: y.density,
            xi: y.xi,
            beta: y.beta,
            twist: y.twist_deg.to_radians(),
        }
    }
}

/// Twist preset: twill families are spun, the others are not.
pub fn default_twist_deg(pattern: Pattern) -> f64 {
    match pattern.family() {
        Pattern::Twill => -30.0,
        _ => 0.0,
    }
}

fn sample_yarn(rng: &mut impl Rng, pattern: Pattern) -> YarnParams {
    let (d_lo, d_hi) = ranges::DENSITY;
    let (t_lo, t_hi) = ranges::THICKNESS;
    let (b_lo, b_hi) = ranges::BETA;
    let (x_lo, x_hi) = ranges::XI;
    let sq = |x: f64| x * x;
    YarnParams {
        density: rng.gen_range(d_lo..d_hi),
        alpha_s: sq(rng.gen_range(0.1..1.0)),
        alpha_m: sq(rng.gen_range(0.1..1.0)),
        t_s: rng.gen_range(t_lo..t_hi),
        t_m: rng.gen_range(t_lo..t_hi),
        k_s: Rgb { r: rng.gen_range(0.0..1.0), g: rng.gen_range(0.0..1.0), b: rng.gen_range(0.0..1.0) },
        beta: rng.gen_range(b_lo..b_hi),
        xi: rng.gen_range(x_lo..x_hi),
        twist_deg: default_twist_deg(pattern),
    }
}

/// Draw a fabric with the given binding from the capture-prior distributions.
/// Weft and warp are drawn independently; the noise level is 0.
pub fn sample_params_for_pattern(rng: &mut impl Rng, pattern: Pattern) -> FabricParams {
    let weft = sample_yarn(rng, pattern);
    let warp = sample_yarn(rng, pattern);
    FabricParams {
        pattern,
        weft,
        warp,
        k_d_r: Rgb { r: rng.gen_range(0.0..1.0), g: rng.gen_range(0.0..1.0), b: rng.gen_range(0.0..1.0) },
        k_d_t: Rgb { r: rng.gen_range(0.0..1.0), g: rng.gen_range(0.0..1.0), b: rng.gen_range(0.0..1.0) },
        w: rng.gen_range(0.0..1.0),
        w_m: rng.gen_range(ranges::MULTI_W.0..ranges::MULTI_W.1),
        noise: 0.0,
    }
}

/// Draw a fabric with a uniformly random binding.
pub fn sample_params(rng: &mut impl Rng) -> FabricParams {
    let pattern = Pattern::from_id(rng.gen_range(0..5u8)).unwrap();
    sample_params_for_pattern(rng, pattern)
}

/// Smooth BSDF value plus the gap delta marker.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BsdfValue {
    pub value: Rgb,
    /// True in a gap: all surface lobes vanish and transmission is the
    /// unscattered delta handled by the renderer.
    pub delta_transmit: bool,
}

/// Bound evaluator: parameters plus the woven map over a physical patch.
#[derive(Debug, Clone)]
pub struct FabricEval {
    pub params: FabricParams,
    pub map: WeaveMap,
    pub shadowing: MultiShadowing,
    multi_albedo: [Rgb; 2],
}

impl FabricEval {
    pub fn new(
        params: FabricParams,
        patch_w_inches: f64,
        patch_h_inches: f64,
        shadowing: MultiShadowing,
    ) -> FabricEval {
        let map = WeaveMap::new(
            params.pattern,
            params.weave_geometry(YarnKind::Weft),
            params.weave_geometry(YarnKind::Warp),
            params.noise,
            patch_w_inches,
            patch_h_inches,
        );
        FabricEval {
            map,
            shadowing,
            multi_albedo: [params.multi_albedo(YarnKind::Weft), params.multi_albedo(YarnKind::Warp)],
            params,
        }
    }

    fn slab(&self, layer: &crate::weave::SurfaceLayer) -> Slab {
        let y = self.params.yarn(layer.kind);
        let floor = self.params.pattern.thickness_floor();
        let jitter = layer.albedo_jitter;
        let k_s = y.k_s * jitter;
        let k_m = if self.params.noise > 0.0 {
            k_s.map(|c| c.clamp(0.0, 1.0)).powf(1.0 / self.params.w_m)
        } else {
            self.multi_albedo[layer.kind as usize]
        };
        Slab {
            single: SlabLobe {
                fiber: Fiber::new(layer.tangent, y.alpha_s),
                thickness: tension_thickness(y.t_s, layer.mu, floor),
                albedo: k_s,
            },
            multi: SlabLobe {
                fiber: Fiber::new(layer.tangent, y.alpha_m),
                thickness: tension_thickness(y.t_m, layer.mu, floor),
                albedo: k_m,
            },
        }
    }

    /// Full BSDF at a surface point. `wi` points toward the light, `wo`
    /// toward the viewer; the macro normal is +z.
    pub fn bsdf(&self, sp: &SurfacePoint, wi: Vec3, wo: Vec3) -> BsdfValue {
        if sp.gap {
            return BsdfValue { value: Rgb::BLACK, delta_transmit: true };
        }
        let normal = Vec3::Z;
        let top = self.slab(&sp.layers[0]);
        let bottom = self.slab(&sp.layers[1]);
        let specular = two_layer_eval(&top, &bottom, wi, wo, normal, self.shadowing);
        BsdfValue { value: specular + self.diffuse(sp, wi, wo), delta_transmit: false }
    }

    /// Two-term diffuse: a normal-mapped part shaded by the yarn normals and
    /// a uniform part, blended by `w`. The transmitted part is shaded by both
    /// layer normals. Dot products are taken against the light referred to
    /// the front side, so back lighting shades symmetrically.
    fn diffuse(&self, sp: &SurfacePoint, wi: Vec3, wo: Vec3) -> Rgb {
        let p = &self.params;
        let same_side = wi.z * wo.z >= 0.0;
        let wi_front = if wi.z >= 0.0 { wi } else { -wi };
        let cos_macro = wi.z.abs().max(COS_CLAMP);
        if same_side {
            let shaped = wi_front.dot(sp.layers[0].normal).max(0.0) / cos_macro;
            p.k_d_r * ((p.w * shaped + (1.0 - p.w)) / PI)
        } else {
            let shaped = wi_front.dot(sp.layers[0].normal).max(0.0)
                * wi_front.dot(sp.layers[1].normal).max(0.0)
                / cos_macro;
            p.k_d_t * ((p.w * shaped + (1.0 - p.w)) / PI)
        }
    }

    /// Gap test only (used by the renderer for the transmission splat).
    pub fn is_gap(&self, u: f64, v: f64) -> bool {
        self.map.eval(u, v).gap
    }
}

// --- flat serialization -----------------------------------------------------

/// Wire format: one flat object, weft/warp-suffixed scalar fields, RGB as
/// 3-arrays, pattern as its stable id.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FlatParams {
    pattern: u8,
    density_weft: f64,
    density_warp: f64,
    alpha_s_weft: f64,
    alpha_s_warp: f64,
    alpha_m_weft: f64,
    alpha_m_warp: f64,
    t_s_weft: f64,
    t_s_warp: f64,
    t_m_weft: f64,
    t_m_warp: f64,
    k_s_s_weft: [f64; 3],
    k_s_s_warp: [f64; 3],
    k_d_r: [f64; 3],
    k_d_t: [f64; 3],
    w: f64,
    w_m: f64,
    beta_weft: f64,
    beta_warp: f64,
    xi_weft: f64,
    xi_warp: f64,
    twist_weft: f64,
    twist_warp: f64,
    #[serde(default)]
    noise: f64,
}

impl From<&FabricParams> for FlatParams {
    fn from(p: &FabricParams) -> FlatParams {
        FlatParams {
            pattern: p.pattern.id(),
            density_weft: p.weft.density,
            density_warp: p.warp.density,
            alpha_s_weft: p.weft.alpha_s,
            alpha_s_warp: p.warp.alpha_s,
            alpha_m_weft: p.weft.alpha_m,
            alpha_m_warp: p.warp.alpha_m,
            t_s_weft: p.weft.t_s,
            t_s_warp: p.warp.t_s,
            t_m_weft: p.weft.t_m,
            t_m_warp: p.warp.t_m,
            k_s_s_weft: p.weft.k_s.to_array(),
            k_s_s_warp: p.warp.k_s.to_array(),
            k_d_r: p.k_d_r.to_array(),
            k_d_t: p.k_d_t.to_array(),
            w: p.w,
            w_m: p.w_m,
            beta_weft: p.weft.beta,
            beta_warp: p.warp.beta,
            xi_weft: p.weft.xi,
            xi_warp: p.warp.xi,
            twist_weft: p.weft.twist_deg,
            twist_warp: p.warp.twist_deg,
            noise: p.noise,
        }
    }
}

impl TryFrom<FlatParams> for FabricParams {
    type Error = String;

    fn try_from(f: FlatParams) -> Result<FabricParams, String> {
        let pattern =
            Pattern::from_id(f.pattern).ok_or_else(|| format!("pattern id {} out of 0..=4", f.pattern))?;
        Ok(FabricParams {
            pattern,
            weft: YarnParams {
                density: f.density_weft,
                alpha_s: f.alpha_s_weft,
                alpha_m: f.alpha_m_weft,
                t_s: f.t_s_weft,
                t_m: f.t_m_weft,
                k_s: Rgb::from_array(f.k_s_s_weft),
                beta: f.beta_weft,
                xi: f.xi_weft,
                twist_deg: f.twist_weft,
            },
            warp: YarnParams {
                density: f.density_warp,
                alpha_s: f.alpha_s_warp,
                alpha_m: f.alpha_m_warp,
                t_s: f.t_s_warp,
                t_m: f.t_m_warp,
                k_s: Rgb::from_array(f.k_s_s_warp),
                beta: f.beta_warp,
                xi: f.xi_warp,
                twist_deg: f.twist_warp,
            },
            k_d_r: Rgb::from_array(f.k_d_r),
            k_d_t: Rgb::from_array(f.k_d_t),
            w: f.w,
            w_m: f.w_m,
            noise: f.noise,
        })
    }
}

impl Serialize for FabricParams {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        FlatParams::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for FabricParams {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<FabricParams, D::Error> {
        let flat = FlatParams::deserialize(d)?;
        FabricParams::try_from(flat).map_err(serde::de::Error::custom)
    }
}
