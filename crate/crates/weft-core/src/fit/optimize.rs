//! Inverse-fitting engine: a squashed continuous parameterization driven by
//! finite-difference Adam, interleaved with greedy joint moves on the
//! discrete structure parameters, plus the multi-start pattern search.

use super::loss::total_loss;
use super::ImagePair;
use crate::fabric::{ranges, sample_params_for_pattern, FabricEval, FabricParams};
use crate::math::Rgb;
use crate::weave::YarnKind;
use crate::render::{render_pair, CaptureScene};
use crate::weave::Pattern;
use crate::{MultiShadowing, Result, WeftError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Render a capture pair for loose parameters.
pub fn render_params(scene: &CaptureScene, p: &FabricParams, shadowing: MultiShadowing) -> ImagePair {
    let eval = FabricEval::new(*p, scene.patch_w_inches, scene.patch_h_inches, shadowing);
    let (reflect, transmit) = render_pair(&eval, scene);
    ImagePair { reflect, transmit }
}

pub const N_CONTINUOUS: usize = 24;

const SQUASH_CLAMP: f64 = 1e-7;
const FD_REL_STEP: f64 = 1e-3;
const FD_ABS_FLOOR: f64 = 1e-4;
const DISCRETE_PERIOD: u64 = 5;
const TWIST_LIMIT: f64 = 90.0;

/// (lo, hi) for each continuous slot, in pack order.
fn bounds() -> [(f64, f64); N_CONTINUOUS] {
    let mut b = [(0.0, 0.0); N_CONTINUOUS];
    let mut i = 0;
    let mut push = |r: (f64, f64), n: usize| {
        for _ in 0..n {
            b[i] = r;
            i += 1;
        }
    };
    push(ranges::ALPHA, 4); // alpha_s/alpha_m × weft/warp
    push(ranges::THICKNESS, 4); // t_s/t_m × weft/warp
    push(ranges::ALBEDO, 6); // k_s weft rgb, warp rgb
    push(ranges::ALBEDO, 3); // k_d_r
    push(ranges::ALBEDO, 3); // k_d_t
    push(ranges::BETA, 2);
    push(ranges::MIX_W, 1);
    push(ranges::MULTI_W, 1);
    assert_eq!(i, N_CONTINUOUS);
    b
}

pub fn slot_names() -> [&'static str; N_CONTINUOUS] {
    [
        "alpha_s_weft", "alpha_s_warp", "alpha_m_weft", "alpha_m_warp",
        "t_s_weft", "t_s_warp", "t_m_weft", "t_m_warp",
        "k_s_weft_r", "k_s_weft_g", "k_s_weft_b", "k_s_warp_r", "k_s_warp_g", "k_s_warp_b",
        "k_d_r_r", "k_d_r_g", "k_d_r_b", "k_d_t_r", "k_d_t_g", "k_d_t_b",
        "beta_weft", "beta_warp", "w", "w_m",
    ]
}

fn continuous_of(p: &FabricParams) -> [f64; N_CONTINUOUS] {
    [
        p.weft.alpha_s, p.warp.alpha_s, p.weft.alpha_m, p.warp.alpha_m,
        p.weft.t_s, p.warp.t_s, p.weft.t_m, p.warp.t_m,
        p.weft.k_s.r, p.weft.k_s.g, p.weft.k_s.b, p.warp.k_s.r, p.warp.k_s.g, p.warp.k_s.b,
        p.k_d_r.r, p.k_d_r.g, p.k_d_r.b, p.k_d_t.r, p.k_d_t.g, p.k_d_t.b,
        p.weft.beta, p.warp.beta, p.w, p.w_m,
    ]
}

fn apply_continuous(p: &mut FabricParams, x: &[f64; N_CONTINUOUS]) {
    [p.weft.alpha_s, p.warp.alpha_s, p.weft.alpha_m, p.warp.alpha_m] = [x[0], x[1], x[2], x[3]];
    [p.weft.t_s, p.warp.t_s, p.weft.t_m, p.warp.t_m] = [x[4], x[5], x[6], x[7]];
    p.weft.k_s = Rgb { r: x[8], g: x[9], b: x[10] };
    p.warp.k_s = Rgb { r: x[11], g: x[12], b: x[13] };
    p.k_d_r = Rgb { r: x[14], g: x[15], b: x[16] };
    p.k_d_t = Rgb { r: x[17], g: x[18], b: x[19] };
    [p.weft.beta, p.warp.beta] = [x[20], x[21]];
    p.w = x[22];
    p.w_m = x[23];
}

/// Map bounded values to unconstrained coordinates through a logistic squash.
pub fn unconstrain(values: &[f64; N_CONTINUOUS]) -> [f64; N_CONTINUOUS] {
    let b = bounds();
    let mut u = [0.0; N_CONTINUOUS];
    for i in 0..N_CONTINUOUS {
        let (lo, hi) = b[i];
        let p = ((values[i] - lo) / (hi - lo)).clamp(SQUASH_CLAMP, 1.0 - SQUASH_CLAMP);
        u[i] = (p / (1.0 - p)).ln();
    }
    u
}

pub fn constrain(u: &[f64; N_CONTINUOUS]) -> [f64; N_CONTINUOUS] {
    let b = bounds();
    let mut values = [0.0; N_CONTINUOUS];
    for i in 0..N_CONTINUOUS {
        let (lo, hi) = b[i];
        values[i] = lo + (hi - lo) / (1.0 + (-u[i]).exp());
    }
    values
}

/// Central finite differences in the unconstrained space; step is relative
/// with an absolute floor.
pub fn fd_gradient(
    mut f: impl FnMut(&[f64; N_CONTINUOUS]) -> f64,
    u: &[f64; N_CONTINUOUS],
) -> [f64; N_CONTINUOUS] {
    let mut g = [0.0; N_CONTINUOUS];
    let mut probe = *u;
    for i in 0..N_CONTINUOUS {
        let step = (FD_REL_STEP * u[i].abs()).max(FD_ABS_FLOOR);
        probe[i] = u[i] + step;
        let hi = f(&probe);
        probe[i] = u[i] - step;
        let lo = f(&probe);
        probe[i] = u[i];
        g[i] = (hi - lo) / (2.0 * step);
    }
    g
}

struct Adam {
    m: [f64; N_CONTINUOUS],
    v: [f64; N_CONTINUOUS],
    t: u64,
    lr: f64,
}

impl Adam {
    fn new(lr: f64) -> Adam {
        Adam { m: [0.0; N_CONTINUOUS], v: [0.0; N_CONTINUOUS], t: 0, lr }
    }

    fn step(&mut self, u: &mut [f64; N_CONTINUOUS], g: &[f64; N_CONTINUOUS]) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        const EPS: f64 = 1e-8;
        self.t += 1;
        let bc1 = 1.0 - B1.powi(self.t as i32);
        let bc2 = 1.0 - B2.powi(self.t as i32);
        for i in 0..N_CONTINUOUS {
            self.m[i] = B1 * self.m[i] + (1.0 - B1) * g[i];
            self.v[i] = B2 * self.v[i] + (1.0 - B2) * g[i] * g[i];
            let mhat = self.m[i] / bc1;
            let vhat = self.v[i] / bc2;
            u[i] -= self.lr * mhat / (vhat.sqrt() + EPS);
        }
    }
}

/// Perturbation magnitudes for (density, xi, twist_deg) by iteration.
pub fn discrete_step_sizes(iter: u64) -> (f64, f64, f64) {
    if iter < 100 {
        (10.0, 0.05, 0.5)
    } else if iter < 150 {
        (5.0, 0.025, 0.25)
    } else {
        (2.0, 0.01, 0.1)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DiscreteMove {
    pub iter: u64,
    pub step_sizes: (f64, f64, f64),
    pub accepted: bool,
    pub loss_before: f64,
    pub loss_after: f64,
}

#[derive(Debug, Clone)]
pub struct FitConfig {
    pub iters: u64,
    pub lr: f64,
    pub seed: u64,
    pub shadowing: MultiShadowing,
}

impl Default for FitConfig {
    fn default() -> FitConfig {
        FitConfig { iters: 300, lr: 0.01, seed: 0, shadowing: MultiShadowing::default() }
    }
}

#[derive(Debug, Clone)]
pub struct FitReport {
    pub best_params: FabricParams,
    pub best_loss: f64,
    pub initial_loss: f64,
    /// Loss after each iteration (index 0 = after iteration 1).
    pub trace: Vec<f64>,
    pub discrete_moves: Vec<DiscreteMove>,
}

fn propose_discrete(p: &FabricParams, sizes: (f64, f64, f64), rng: &mut impl Rng) -> FabricParams {
    let mut cand = *p;
    let (d_step, x_step, t_step) = sizes;
    let mut sign = |v: f64| if rng.gen::<bool>() { v } else { -v };
    for kind in [YarnKind::Weft, YarnKind::Warp] {
        let y = match kind {
            YarnKind::Weft => &mut cand.weft,
            YarnKind::Warp => &mut cand.warp,
        };
        y.density = (y.density + sign(d_step)).clamp(ranges::DENSITY.0, ranges::DENSITY.1);
        y.xi = (y.xi + sign(x_step)).clamp(ranges::XI.0, ranges::XI.1);
        y.twist_deg = (y.twist_deg + sign(t_step)).clamp(-TWIST_LIMIT, TWIST_LIMIT);
    }
    cand
}

/// Gradient-descend the continuous parameters of `init` against the target
/// pair, occasionally probing joint discrete moves. All randomness comes
/// from `cfg.seed`; the returned report is reproducible bit for bit.
pub fn optimize(
    target: &ImagePair,
    scene: &CaptureScene,
    init: FabricParams,
    cfg: &FitConfig,
) -> Result<FitReport> {
    let mut params = init;
    let eval = |p: &FabricParams| -> Result<f64> {
        let rendered = render_params(scene, p, cfg.shadowing);
        let loss = total_loss(&rendered, target, p);
        if !loss.is_finite() {
            return Err(WeftError::FitDiverged(format!(
                "loss became {loss} at pattern {} density ({:.1}, {:.1})",
                p.pattern.name(),
                p.weft.density,
                p.warp.density
            )));
        }
        Ok(loss)
    };

    let initial_loss = eval(&params)?;
    let mut current_loss = initial_loss;
    let mut best_params = params;
    let mut best_loss = initial_loss;
    let mut u = unconstrain(&continuous_of(&params));
    let mut adam = Adam::new(cfg.lr);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut trace = Vec::with_capacity(cfg.iters as usize);
    let mut discrete_moves = Vec::new();

    for iter in 1..=cfg.iters {
        if iter % DISCRETE_PERIOD == 0 {
            let sizes = discrete_step_sizes(iter);
            let cand = propose_discrete(&params, sizes, &mut rng);
            let cand_loss = eval(&cand)?;
            let accepted = cand_loss < current_loss;
            discrete_moves.push(DiscreteMove {
                iter,
                step_sizes: sizes,
                accepted,
                loss_before: current_loss,
                loss_after: cand_loss,
            });
            if accepted {
                // current_loss is refreshed after the gradient step below
                params = cand;
                if cand_loss < best_loss {
                    best_loss = cand_loss;
                    best_params = cand;
                }
            }
        }

        let mut grad_eval_failed = None;
        let g = fd_gradient(
            |probe_u| {
                let mut probe = params;
                apply_continuous(&mut probe, &constrain(probe_u));
                match eval(&probe) {
                    Ok(l) => l,
                    Err(e) => {
                        grad_eval_failed = Some(e);
                        f64::NAN
                    }
                }
            },
            &u,
        );
        if let Some(e) = grad_eval_failed {
            return Err(e);
        }
        adam.step(&mut u, &g);
        apply_continuous(&mut params, &constrain(&u));
        current_loss = eval(&params)?;
        trace.push(current_loss);
        if current_loss < best_loss {
            best_loss = current_loss;
            best_params = params;
        }
    }

    Ok(FitReport { best_params, best_loss, initial_loss, trace, discrete_moves })
}

#[derive(Debug, Clone)]
pub struct StartDraw {
    pub pattern: Pattern,
    pub loss: f64,
}

/// Draw `k` parameter sets cycling through the five patterns, score each
/// without optimization, and return the best (ties keep the earliest draw).
pub fn multi_start(
    target: &ImagePair,
    scene: &CaptureScene,
    k: usize,
    seed: u64,
    shadowing: MultiShadowing,
) -> Result<(FabricParams, Vec<StartDraw>)> {
    assert!(k > 0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(FabricParams, f64)> = None;
    let mut draws = Vec::with_capacity(k);
    for i in 0..k {
        let pattern = Pattern::from_id((i % 5) as u8).unwrap();
        let params = sample_params_for_pattern(&mut rng, pattern);
        let rendered = render_params(scene, &params, shadowing);
        let loss = total_loss(&rendered, target, &params);
        if !loss.is_finite() {
            return Err(WeftError::FitDiverged(format!("start {i} scored {loss}")));
        }
        draws.push(StartDraw { pattern, loss });
        if best.as_ref().is_none_or(|(_, b)| loss < *b) {
            best = Some((params, loss));
        }
    }
    let (params, _) = best.unwrap();
    Ok((params, draws))
}

/// Multi-start selection followed by a full optimization run.
pub fn fit_pipeline(
    target: &ImagePair,
    scene: &CaptureScene,
    k_starts: usize,
    cfg: &FitConfig,
) -> Result<FitReport> {
    let (init, _) = multi_start(target, scene, k_starts, cfg.seed, cfg.shadowing)?;
    optimize(target, scene, init, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fabric::tests::baseline_params;
    use approx::assert_relative_eq;

    #[test]
    fn squash_round_trips_interior_points() {
        let p = baseline_params();
        let mut x = continuous_of(&p);
        x[4] = 2.5;
        x[23] = 1.5; // keep every slot strictly inside its range
        let u = unconstrain(&x);
        let back = constrain(&u);
        for i in 0..N_CONTINUOUS {
            assert_relative_eq!(back[i], x[i], epsilon = 1e-9, max_relative = 1e-9);
        }
    }

    #[test]
    fn squash_saturates_cleanly_at_the_bounds() {
        let b = bounds();
        let mut x = [0.0; N_CONTINUOUS];
        for i in 0..N_CONTINUOUS {
            x[i] = b[i].0; // exactly at the lower bound
        }
        let u = unconstrain(&x);
        let back = constrain(&u);
        for i in 0..N_CONTINUOUS {
            assert!(back[i] >= b[i].0 && back[i] <= b[i].1);
            assert!((back[i] - b[i].0).abs() < 1e-5 * (b[i].1 - b[i].0));
        }
    }

    #[test]
    fn apply_and_extract_are_inverse() {
        let mut p = baseline_params();
        let mut x = continuous_of(&p);
        x[0] = 0.123;
        x[23] = 1.7;
        apply_continuous(&mut p, &x);
        assert_eq!(continuous_of(&p), x);
        assert_eq!(p.weft.alpha_s, 0.123);
        assert_eq!(p.w_m, 1.7);
    }

    #[test]
    fn gradient_is_exact_on_quadratics() {
        let center: Vec<f64> = (0..N_CONTINUOUS).map(|i| 0.1 * i as f64 - 1.0).collect();
        let f = |u: &[f64; N_CONTINUOUS]| -> f64 {
            u.iter().zip(&center).map(|(a, c)| (a - c) * (a - c)).sum()
        };
        let at = [0.5; N_CONTINUOUS];
        let g = fd_gradient(f, &at);
        for i in 0..N_CONTINUOUS {
            assert_relative_eq!(g[i], 2.0 * (0.5 - center[i]), epsilon = 1e-6);
        }
    }

    #[test]
    fn discrete_schedule_has_three_bands() {
        assert_eq!(discrete_step_sizes(5), (10.0, 0.05, 0.5));
        assert_eq!(discrete_step_sizes(99), (10.0, 0.05, 0.5));
        assert_eq!(discrete_step_sizes(100), (5.0, 0.025, 0.25));
        assert_eq!(discrete_step_sizes(149), (5.0, 0.025, 0.25));
        assert_eq!(discrete_step_sizes(150), (2.0, 0.01, 0.1));
        assert_eq!(discrete_step_sizes(300), (2.0, 0.01, 0.1));
    }

    fn tiny_scene() -> CaptureScene {
        let mut scene = CaptureScene::default();
        scene.resolution = 32;
        scene.patch_w_inches = 0.5;
        scene.patch_h_inches = 0.5;
        scene
    }

    fn quick_params() -> FabricParams {
        let mut p = baseline_params();
        p.weft.density = 50.0;
        p.warp.density = 50.0;
        // prior-centred structure so a self-target scores exactly zero
        p.weft.xi = 0.75;
        p.warp.xi = 0.75;
        p.weft.beta = 1.0;
        p.warp.beta = 1.0;
        p
    }

    #[test]
    fn self_target_stays_at_zero_loss() {
        let scene = tiny_scene();
        let p = quick_params();
        let target = render_params(&scene, &p, MultiShadowing::default());
        let cfg = FitConfig { iters: 6, ..Default::default() };
        let report = optimize(&target, &scene, p, &cfg).unwrap();
        assert!(report.initial_loss.abs() < 1e-12);
        assert!(report.best_loss <= report.initial_loss + 1e-12);
        assert_eq!(report.trace.len(), 6);
        assert_eq!(report.discrete_moves.len(), 1); // iteration 5
        assert_eq!(report.discrete_moves[0].iter, 5);
    }

    #[test]
    fn fit_is_reproducible_bit_for_bit() {
        let scene = tiny_scene();
        let truth = quick_params();
        let target = render_params(&scene, &truth, MultiShadowing::default());
        let mut init = truth;
        init.weft.alpha_s = 0.3;
        init.k_d_r = Rgb::splat(0.1);
        let cfg = FitConfig { iters: 7, seed: 42, ..Default::default() };
        let a = optimize(&target, &scene, init, &cfg).unwrap();
        let b = optimize(&target, &scene, init, &cfg).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.best_loss, b.best_loss);
        assert_eq!(continuous_of(&a.best_params), continuous_of(&b.best_params));
    }

    #[test]
    fn optimization_reduces_a_perturbed_loss() {
        let scene = tiny_scene();
        let truth = quick_params();
        let target = render_params(&scene, &truth, MultiShadowing::default());
        let mut init = truth;
        init.k_d_r = Rgb::splat(0.05);
        init.weft.k_s = Rgb::splat(0.2);
        let cfg = FitConfig { iters: 12, seed: 1, ..Default::default() };
        let report = optimize(&target, &scene, init, &cfg).unwrap();
        assert!(report.best_loss < report.initial_loss, "no improvement: {} -> {}", report.initial_loss, report.best_loss);
    }

    #[test]
    fn nan_targets_abort_with_a_diagnostic() {
        let scene = tiny_scene();
        let p = quick_params();
        let mut target = render_params(&scene, &p, MultiShadowing::default());
        target.reflect.set(0, 0, [f32::NAN, 0.0, 0.0]);
        let err = optimize(&target, &scene, p, &FitConfig::default()).unwrap_err();
        assert!(matches!(err, WeftError::FitDiverged(_)), "unexpected error: {err:?}");
    }

    #[test]
    fn multi_start_cycles_patterns_and_keeps_the_best() {
        let scene = tiny_scene();
        let p = quick_params();
        let target = render_params(&scene, &p, MultiShadowing::default());
        let (best, draws) = multi_start(&target, &scene, 10, 7, MultiShadowing::default()).unwrap();
        assert_eq!(draws.len(), 10);
        for (i, d) in draws.iter().enumerate() {
            assert_eq!(d.pattern.id() as usize, i % 5);
        }
        let min = draws.iter().map(|d| d.loss).fold(f64::INFINITY, f64::min);
        let best_render = render_params(&scene, &best, MultiShadowing::default());
        let best_loss = total_loss(&best_render, &target, &best);
        assert_eq!(best_loss, min);
    }
}
