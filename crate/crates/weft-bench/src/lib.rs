//! Shared fixtures for the criterion benches.

use weft_core::math::rgb;
use weft_core::{FabricParams, Pattern, YarnParams};

/// A mid-range twill with distinct weft/warp yarns.
pub fn bench_params() -> FabricParams {
    let weft = YarnParams {
        density: 60.0,
        alpha_s: 0.4,
        alpha_m: 0.5,
        t_s: 1.5,
        t_m: 1.8,
        k_s: rgb(0.7, 0.4, 0.2),
        beta: 1.0,
        xi: 0.9,
        twist_deg: -30.0,
    };
    FabricParams {
        pattern: Pattern::Twill,
        weft,
        warp: YarnParams { density: 70.0, alpha_s: 0.6, t_s: 2.2, ..weft },
        k_d_r: rgb(0.25, 0.15, 0.1),
        k_d_t: rgb(0.2, 0.12, 0.08),
        w: 0.6,
        w_m: 1.2,
        noise: 0.0,
    }
}
