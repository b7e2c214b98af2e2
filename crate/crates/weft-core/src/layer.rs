//! Single- and multiple-scattering lobes of a thin microflake slab, the
//! directional attenuation through it, and the two-layer composition used for
//! a yarn crossing.
//!
//! All lobes are smooth BSDF values (no cosine factored in); the forward
//! delta of an empty slab is handled by the caller.

use crate::math::{Rgb, Vec3};
use crate::microflake::{rotate_to_plane, Fiber};

/// |cos| clamp keeping Λ finite for directions in the slab plane.
pub const COS_CLAMP: f64 = 1e-7;

/// Shadowing form used by the multiple-scattering lobe in the transmission
/// configuration. `TransmitProfile` integrates in/out attenuation through
/// opposite faces (same shape as the single-scattering transmit factor);
/// `ReflectProfile` reuses the reflection-configuration factor unchanged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MultiShadowing {
    #[default]
    TransmitProfile,
    ReflectProfile,
}

/// One scattering family of a slab: fiber distribution, optical thickness,
/// and per-channel flake albedo.
#[derive(Debug, Clone, Copy)]
pub struct SlabLobe {
    pub fiber: Fiber,
    pub thickness: f64,
    pub albedo: Rgb,
}

/// A yarn's slab: a single-scattering lobe and a multiple-scattering lobe
/// sharing the fiber tangent. Attenuation through the slab always uses the
/// single-scattering thickness and roughness.
#[derive(Debug, Clone, Copy)]
pub struct Slab {
    pub single: SlabLobe,
    pub multi: SlabLobe,
}

/// Λ(w) = σ(w) / |w·n|: optical depth per unit slab thickness along `w`.
pub fn lambda_slope(fiber: &Fiber, w: Vec3, normal: Vec3) -> f64 {
    fiber.projected_area(w) / w.dot(normal).abs().max(COS_CLAMP)
}

/// Reflection-configuration shadowing: ∫₀ᵀ e^{−z(Λi+Λo)} dz.
pub fn g_reflect(lambda_i: f64, lambda_o: f64, thickness: f64) -> f64 {
    let s = lambda_i + lambda_o;
    (1.0 - (-thickness * s).exp()) / s
}

/// Transmission-configuration shadowing: ∫₀ᵀ e^{−zΛi} e^{−(T−z)Λo} dz,
/// which is (e^{−TΛo} − e^{−TΛi})/(Λi − Λo) with limit T·e^{−TΛ} at Λi = Λo.
pub fn g_transmit(lambda_i: f64, lambda_o: f64, thickness: f64) -> f64 {
    let d = lambda_i - lambda_o;
    if d.abs() < 1e-9 * lambda_i.max(lambda_o) {
        thickness * (-thickness * lambda_i).exp()
    } else {
        ((-thickness * lambda_o).exp() - (-thickness * lambda_i).exp()) / d
    }
}

/// Fraction of radiance crossing the slab unscattered along `w`.
pub fn attenuation(lobe: &SlabLobe, w: Vec3, normal: Vec3) -> f64 {
    (-lobe.thickness * lambda_slope(&lobe.fiber, w, normal)).exp()
}

fn cos_pair(wi: Vec3, wo: Vec3, normal: Vec3) -> (f64, f64, bool) {
    let ci = wi.dot(normal);
    let co = wo.dot(normal);
    (ci.abs().max(COS_CLAMP), co.abs().max(COS_CLAMP), ci * co >= 0.0)
}

/// Single-scattering slab lobe k·D(ω_h)·G / (4|cosθi||cosθo|); the
/// configuration (reflect/transmit) follows from the hemispheres of wi, wo.
pub fn single_scatter(lobe: &SlabLobe, wi: Vec3, wo: Vec3, normal: Vec3) -> Rgb {
    let (ci, co, same_side) = cos_pair(wi, wo, normal);
    let h = match (wi + wo).try_normalized() {
        Some(h) => h,
        None => return Rgb::BLACK,
    };
    let li = lambda_slope(&lobe.fiber, wi, normal);
    let lo = lambda_slope(&lobe.fiber, wo, normal);
    let g = if same_side {
        g_reflect(li, lo, lobe.thickness)
    } else {
        g_transmit(li, lo, lobe.thickness)
    };
    lobe.albedo * (lobe.fiber.ndf(h) * g / (4.0 * ci * co))
}

/// Multiple-scattering slab lobe k·D(ω_h′)·G / (2|cosθi||cosθo|), where ω_h′
/// is the azimuth-aligned half vector of the fiber phase lobe.
pub fn multiple_scatter(
    lobe: &SlabLobe,
    wi: Vec3,
    wo: Vec3,
    normal: Vec3,
    shadowing: MultiShadowing,
) -> Rgb {
    let (ci, co, same_side) = cos_pair(wi, wo, normal);
    let wo_aligned = rotate_to_plane(wo, lobe.fiber.tangent, wi);
    let h = match (wi + wo_aligned).try_normalized() {
        Some(h) => h,
        None => return Rgb::BLACK,
    };
    let li = lambda_slope(&lobe.fiber, wi, normal);
    let lo = lambda_slope(&lobe.fiber, wo, normal);
    let g = if same_side {
        g_reflect(li, lo, lobe.thickness)
    } else {
        match shadowing {
            MultiShadowing::TransmitProfile => g_transmit(li, lo, lobe.thickness),
            MultiShadowing::ReflectProfile => g_reflect(li, lo, lobe.thickness),
        }
    };
    lobe.albedo * (lobe.fiber.ndf(h) * g / (2.0 * ci * co))
}

/// Both scattering families of one slab for the given direction pair.
pub fn slab_eval(slab: &Slab, wi: Vec3, wo: Vec3, normal: Vec3, shadowing: MultiShadowing) -> Rgb {
    single_scatter(&slab.single, wi, wo, normal)
        + multiple_scatter(&slab.multi, wi, wo, normal, shadowing)
}

/// Unscattered crossing fraction of a slab (single-scattering Λ and T).
pub fn slab_attenuation(slab: &Slab, w: Vec3, normal: Vec3) -> f64 {
    attenuation(&slab.single, w, normal)
}

/// Two stacked slabs at a yarn crossing.
///
/// Reflection side: `f_top + A_top(wi)·A_top(wo)·f_bot`.
/// Transmission side: `f_top·A_bot(wo) + A_top(wi)·f_bot`.
/// The crossing attenuations always use the single-scattering profile.
pub fn two_layer_eval(
    top: &Slab,
    bottom: &Slab,
    wi: Vec3,
    wo: Vec3,
    normal: Vec3,
    shadowing: MultiShadowing,
) -> Rgb {
    let same_side = wi.dot(normal) * wo.dot(normal) >= 0.0;
    let f_top = slab_eval(top, wi, wo, normal, shadowing);
    let f_bot = slab_eval(bottom, wi, wo, normal, shadowing);
    if same_side {
        f_top + f_bot * (slab_attenuation(top, wi, normal) * slab_attenuation(top, wo, normal))
    } else {
        f_top * slab_attenuation(bottom, wo, normal)
            + f_bot * slab_attenuation(top, wi, normal)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{rgb, v3};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_lobe(tangent: Vec3, alpha: f64, thickness: f64) -> SlabLobe {
        SlabLobe { fiber: Fiber::new(tangent, alpha), thickness, albedo: Rgb::WHITE }
    }

    #[test]
    fn shadowing_closed_forms() {
        assert_relative_eq!(g_reflect(1.0, 1.0, 1.0), (1.0 - (-2.0f64).exp()) / 2.0, epsilon = 1e-15);
        assert_relative_eq!(g_reflect(1.0, 1.0, 1.0), 0.432332, epsilon = 1e-6);
        assert_relative_eq!(g_transmit(2.0, 1.0, 1.0), (-1.0f64).exp() - (-2.0f64).exp(), epsilon = 1e-15);
        assert_relative_eq!(g_transmit(2.0, 1.0, 1.0), 0.232544, epsilon = 1e-6);
        // equal-slope limit and continuity around it
        assert_relative_eq!(g_transmit(1.5, 1.5, 2.0), 2.0 * (-3.0f64).exp(), epsilon = 1e-12);
        assert_relative_eq!(
            g_transmit(1.5 + 1e-7, 1.5, 2.0),
            g_transmit(1.5, 1.5, 2.0),
            epsilon = 1e-6
        );
        // symmetry in (i, o)
        assert_relative_eq!(g_transmit(0.7, 2.2, 1.3), g_transmit(2.2, 0.7, 1.3), epsilon = 1e-15);
    }

    #[test]
    fn attenuation_closed_form() {
        let lobe = unit_lobe(Vec3::X, 0.5, 2.0);
        // w ⟂ fiber at 60° off the normal: σ = 1, Λ = 2 → e^{-4}
        let w = v3(0.0, 0.75f64.sqrt(), 0.5);
        assert_relative_eq!(attenuation(&lobe, w, Vec3::Z), (-4.0f64).exp(), epsilon = 1e-12);
        assert_relative_eq!(attenuation(&lobe, w, Vec3::Z), 0.0183156, epsilon = 1e-6);
    }

    #[test]
    fn single_scatter_is_reciprocal() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let lobe = unit_lobe(v3(0.8, 0.1, 0.59).normalized(), 0.4, 1.7);
        for _ in 0..200 {
            let wi = v3(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            )
            .normalized();
            let wo = v3(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            )
            .normalized();
            let a = single_scatter(&lobe, wi, wo, Vec3::Z).r;
            let b = single_scatter(&lobe, wo, wi, Vec3::Z).r;
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }

    #[test]
    fn multiple_scatter_normal_incidence_value() {
        // wi = wo = normal, fiber in-plane, alpha 0.5, T 1, unit albedo:
        // D(ω_h′) = 2/π, Λ = 1 both ways, G = (1 − e^{-2})/2.
        let lobe = unit_lobe(Vec3::X, 0.5, 1.0);
        let f = multiple_scatter(&lobe, Vec3::Z, Vec3::Z, Vec3::Z, MultiShadowing::default());
        let expect = (2.0 / std::f64::consts::PI) * g_reflect(1.0, 1.0, 1.0) / 2.0;
        assert_relative_eq!(f.r, expect, epsilon = 1e-12);
        assert_relative_eq!(f.r, 0.1376, epsilon = 1e-4);
    }

    #[test]
    fn multi_shadowing_switch_changes_only_transmission() {
        let lobe = unit_lobe(Vec3::X, 0.6, 0.9);
        let wi = v3(0.2, 0.3, 0.93).normalized();
        let wo_r = v3(-0.4, 0.1, 0.91).normalized();
        let wo_t = v3(-0.4, 0.1, -0.91).normalized();
        let r_a = multiple_scatter(&lobe, wi, wo_r, Vec3::Z, MultiShadowing::TransmitProfile);
        let r_b = multiple_scatter(&lobe, wi, wo_r, Vec3::Z, MultiShadowing::ReflectProfile);
        assert_eq!(r_a.r, r_b.r);
        let t_a = multiple_scatter(&lobe, wi, wo_t, Vec3::Z, MultiShadowing::TransmitProfile);
        let t_b = multiple_scatter(&lobe, wi, wo_t, Vec3::Z, MultiShadowing::ReflectProfile);
        assert!(t_a.r != t_b.r);
    }

    #[test]
    fn empty_layer_reduces_to_the_other() {
        let top = Slab {
            single: SlabLobe { thickness: 0.0, ..unit_lobe(Vec3::X, 0.5, 0.0) },
            multi: SlabLobe { thickness: 0.0, ..unit_lobe(Vec3::X, 0.5, 0.0) },
        };
        let bottom = Slab {
            single: SlabLobe { albedo: rgb(0.9, 0.5, 0.2), ..unit_lobe(Vec3::Y, 0.3, 1.2) },
            multi: SlabLobe { albedo: rgb(0.8, 0.4, 0.1), ..unit_lobe(Vec3::Y, 0.45, 0.8) },
        };
        let wi = v3(0.1, -0.2, 0.97).normalized();
        for wo in [v3(0.5, 0.2, 0.84).normalized(), v3(0.5, 0.2, -0.84).normalized()] {
            let composed = two_layer_eval(&top, &bottom, wi, wo, Vec3::Z, MultiShadowing::default());
            let alone = slab_eval(&bottom, wi, wo, Vec3::Z, MultiShadowing::default());
            assert_relative_eq!(composed.r, alone.r, epsilon = 1e-12);
            assert_relative_eq!(composed.g, alone.g, epsilon = 1e-12);
            assert_relative_eq!(composed.b, alone.b, epsilon = 1e-12);
            let swapped = two_layer_eval(&bottom, &top, wi, wo, Vec3::Z, MultiShadowing::default());
            assert_relative_eq!(swapped.r, alone.r, epsilon = 1e-12);
        }
    }

    #[test]
    fn thick_top_blocks_bottom_reflection() {
        let top = Slab {
            single: unit_lobe(Vec3::X, 0.5, 50.0),
            multi: unit_lobe(Vec3::X, 0.5, 50.0),
        };
        let bottom = Slab {
            single: unit_lobe(Vec3::Y, 0.5, 1.0),
            multi: unit_lobe(Vec3::Y, 0.5, 1.0),
        };
        let wi = v3(0.0, 0.3, 0.954).normalized();
        let wo = v3(0.2, -0.1, 0.974).normalized();
        let composed = two_layer_eval(&top, &bottom, wi, wo, Vec3::Z, MultiShadowing::default());
        let top_only = slab_eval(&top, wi, wo, Vec3::Z, MultiShadowing::default());
        assert_relative_eq!(composed.r, top_only.r, epsilon = 1e-12);
    }
}
