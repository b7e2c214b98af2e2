//! Fiber-aligned SGGX microflake distribution and the azimuth-aligned phase
//! function used for multiple scattering.
//!
//! The flake normal distribution for a fiber with unit tangent `t` and cross
//! roughness `alpha` has moment matrix `S = I + (alpha² − 1)·t·tᵀ`, i.e.
//! eigenvalues {1, 1, alpha²} with the `alpha²` axis along `t`. `alpha = 1`
//! degenerates to the isotropic (spherical) distribution.

use crate::math::{dot_clamped, Vec3, EPS_DIR};
use std::f64::consts::PI;

/// Threshold on sin(angle(wi, t)) below which the azimuth of `wi` about the
/// fiber is undefined and the alignment rotation becomes the identity.
pub const SIN_AXIS_EPS: f64 = 1e-6;

/// SGGX fiber distribution: unit tangent + cross-section roughness in (0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fiber {
    pub tangent: Vec3,
    pub alpha: f64,
}

impl Fiber {
    pub fn new(tangent: Vec3, alpha: f64) -> Self {
        debug_assert!(alpha > 0.0 && alpha <= 1.0, "alpha out of (0,1]: {alpha}");
        Self { tangent: tangent.normalized(), alpha }
    }

    /// Projected area σ(w) = √(wᵀ S w) = √(c²·alpha² + (1 − c²)), c = w·t.
    /// Even in `w`; equals `alpha` along the fiber and 1 across it.
    pub fn projected_area(&self, w: Vec3) -> f64 {
        let c = self.tangent.dot(w);
        let s2 = (1.0 - c * c).max(0.0);
        (c * c * self.alpha * self.alpha + s2).sqrt()
    }

    /// Flake normal distribution D(m) = 1 / (π·α·(mᵀ S⁻¹ m)²) with
    /// mᵀ S⁻¹ m = 1 + (1/α² − 1)·(m·t)². Integrates to 1 over the sphere and
    /// satisfies ∫ ⟨w·m⟩₊ D(m) dm = σ(w).
    pub fn ndf(&self, m: Vec3) -> f64 {
        let c = self.tangent.dot(m);
        let q = 1.0 + (1.0 / (self.alpha * self.alpha) - 1.0) * c * c;
        1.0 / (PI * self.alpha * q * q)
    }

    /// Phase lobe for one multiple-scattering event: `wo` is first rotated
    /// about the fiber so its azimuth matches `wi` (polar angle preserved),
    /// then the value is D(ω_h′) / (2 σ(wi)) for the aligned half vector.
    /// Azimuthally invariant in `wo` by construction; satisfies
    /// f(i→o)·σ(i) = f(o→i)·σ(o) exactly.
    pub fn phase(&self, wi: Vec3, wo: Vec3) -> f64 {
        let wo_aligned = rotate_to_plane(wo, self.tangent, wi);
        let h = wi + wo_aligned;
        match h.try_normalized() {
            Some(h) => self.ndf(h) / (2.0 * self.projected_area(wi)),
            None => 0.0,
        }
    }
}

/// Rotate `w` about `axis` so that its azimuth matches `reference`'s while its
/// polar angle to the axis is unchanged. When `reference` is (numerically)
/// parallel to the axis its azimuth is undefined and `w` is returned as-is.
pub fn rotate_to_plane(w: Vec3, axis: Vec3, reference: Vec3) -> Vec3 {
    let ref_perp = reference - axis * axis.dot(reference);
    let sin_ref = ref_perp.length();
    if sin_ref < SIN_AXIS_EPS {
        return w;
    }
    let u = ref_perp / sin_ref;
    let c = axis.dot(w);
    let sin_w = (1.0 - c * c).max(0.0).sqrt();
    axis * c + u * sin_w
}

/// ∫⟨w·m⟩₊ D(m) dm estimated by midpoint quadrature over the sphere.
/// Used by tests to pin the projected-area convention.
pub fn cosine_weighted_ndf_integral(fiber: &Fiber, w: Vec3, n_theta: usize, n_phi: usize) -> f64 {
    sphere_quadrature(n_theta, n_phi, |m| dot_clamped(w, m) * fiber.ndf(m))
}

/// Midpoint quadrature of `f` over the unit sphere with an `n_theta × n_phi`
/// grid uniform in (cosθ, φ).
pub fn sphere_quadrature(n_theta: usize, n_phi: usize, f: impl Fn(Vec3) -> f64) -> f64 {
    let dct = 2.0 / n_theta as f64;
    let dphi = 2.0 * PI / n_phi as f64;
    let mut sum = 0.0;
    for i in 0..n_theta {
        let cos_t = -1.0 + (i as f64 + 0.5) * dct;
        let sin_t = (1.0 - cos_t * cos_t).max(0.0).sqrt();
        for j in 0..n_phi {
            let phi = (j as f64 + 0.5) * dphi;
            let m = Vec3 { x: sin_t * phi.cos(), y: sin_t * phi.sin(), z: cos_t };
            sum += f(m);
        }
    }
    sum * dct * dphi
}

const _: () = {
    assert!(EPS_DIR < SIN_AXIS_EPS);
};
