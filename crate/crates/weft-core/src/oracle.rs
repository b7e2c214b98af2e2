//! Brute-force reference for a single microflake slab: a position-free random
//! walk with directional extinction and mirror flakes, binned exit lobes
//! split by bounce count, and least-squares analytic-lobe fits against them.
//!
//! Results are bit-deterministic for a given seed regardless of worker
//! count: paths are partitioned into fixed-size chunks with counter-derived
//! seeds and partial tables are merged in chunk order.

use crate::layer::{g_reflect, g_transmit, lambda_slope, COS_CLAMP};
use crate::math::{dir_from_polar, hash_words, Rgb, Vec3};
use crate::microflake::{rotate_to_plane, Fiber};
use crate::{Result, WeftError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::f64::consts::PI;
use std::io::{BufRead, Write};

/// Slab under test: fiber distribution, optical thickness, flake albedo.
#[derive(Debug, Clone, Copy)]
pub struct SlabConfig {
    pub fiber: Fiber,
    pub thickness: f64,
    pub albedo: Rgb,
}

#[derive(Debug, Clone, Copy)]
pub struct WalkConfig {
    pub n_paths: u64,
    pub seed: u64,
    /// Bounce count from which a path is tallied in the `multi` table.
    pub min_multi_bounces: u32,
    pub n_cos_bins: usize,
    pub n_phi_bins: usize,
}

impl Default for WalkConfig {
    fn default() -> WalkConfig {
        WalkConfig { n_paths: 1_000_000, seed: 0, min_multi_bounces: 2, n_cos_bins: 32, n_phi_bins: 36 }
    }
}

const RR_THRESHOLD: f64 = 1e-4;
const RR_SURVIVAL: f64 = 0.5;
const CHUNK: u64 = 8192;

/// Exit directions binned uniformly in (cos polar, azimuth) about the fiber
/// axis. Values are Monte Carlo estimates of slab BSDF × |cos θ_slab| per
/// steradian, integrated over each bin.
#[derive(Debug, Clone)]
pub struct LobeTable {
    /// Binning pole (the fiber axis).
    pub axis: Vec3,
    /// Unit vector ⟂ axis marking azimuth 0 (toward the slab normal when the
    /// axis lies in the slab plane).
    pub ref_dir: Vec3,
    pub n_cos: usize,
    pub n_phi: usize,
    pub n_paths: u64,
    sum: Vec<[f64; 3]>,
    sum_sq: Vec<[f64; 3]>,
    count: Vec<u64>,
}

impl LobeTable {
    pub fn new(axis: Vec3, ref_dir: Vec3, n_cos: usize, n_phi: usize) -> LobeTable {
        let bins = n_cos * n_phi;
        LobeTable {
            axis,
            ref_dir,
            n_cos,
            n_phi,
            n_paths: 0,
            sum: vec![[0.0; 3]; bins],
            sum_sq: vec![[0.0; 3]; bins],
            count: vec![0; bins],
        }
    }

    /// Deterministic azimuth-0 direction: toward +z if the axis allows it.
    pub fn frame_for(axis: Vec3) -> (Vec3, Vec3) {
        let zperp = Vec3::Z - axis * axis.z;
        match zperp.try_normalized() {
            Some(r) => (axis, r),
            None => (axis, axis.any_orthonormal()),
        }
    }

    pub fn n_bins(&self) -> usize {
        self.n_cos * self.n_phi
    }

    pub fn bin_index(&self, w: Vec3) -> usize {
        let third = self.axis.cross(self.ref_dir);
        let c = w.dot(self.axis).clamp(-1.0, 1.0);
        let phi = w.dot(third).atan2(w.dot(self.ref_dir)).rem_euclid(2.0 * PI);
        let ci = (((c + 1.0) / 2.0 * self.n_cos as f64) as usize).min(self.n_cos - 1);
        let pi_ = ((phi / (2.0 * PI) * self.n_phi as f64) as usize).min(self.n_phi - 1);
        ci * self.n_phi + pi_
    }

    pub fn add(&mut self, w: Vec3, weight: Rgb) {
        let b = self.bin_index(w);
        for (c, v) in weight.to_array().into_iter().enumerate() {
            self.sum[b][c] += v;
            self.sum_sq[b][c] += v * v;
        }
        self.count[b] += 1;
    }

    pub fn merge(&mut self, other: &LobeTable) {
        debug_assert_eq!(self.n_bins(), other.n_bins());
        for b in 0..self.sum.len() {
            for c in 0..3 {
                self.sum[b][c] += other.sum[b][c];
                self.sum_sq[b][c] += other.sum_sq[b][c];
            }
            self.count[b] += other.count[b];
        }
        self.n_paths += other.n_paths;
    }

    /// Every bin covers the same solid angle.
    pub fn bin_solid_angle(&self) -> f64 {
        (2.0 / self.n_cos as f64) * (2.0 * PI / self.n_phi as f64)
    }

    pub fn bin_center(&self, b: usize) -> Vec3 {
        let (ci, pi_) = (b / self.n_phi, b % self.n_phi);
        let c = -1.0 + (ci as f64 + 0.5) * 2.0 / self.n_cos as f64;
        let phi = (pi_ as f64 + 0.5) * 2.0 * PI / self.n_phi as f64;
        dir_from_polar(self.axis, self.ref_dir, c.acos(), phi)
    }

    /// A direction inside bin `b` at fractional offsets (fc, fp) ∈ (0,1)².
    pub fn bin_dir(&self, b: usize, fc: f64, fp: f64) -> Vec3 {
        let (ci, pi_) = (b / self.n_phi, b % self.n_phi);
        let c = -1.0 + (ci as f64 + fc) * 2.0 / self.n_cos as f64;
        let phi = (pi_ as f64 + fp) * 2.0 * PI / self.n_phi as f64;
        dir_from_polar(self.axis, self.ref_dir, c.clamp(-1.0, 1.0).acos(), phi)
    }

    /// Estimate of ∫_bin f·|cosθ| dω per channel.
    pub fn mean(&self, b: usize) -> [f64; 3] {
        let n = self.n_paths.max(1) as f64;
        [self.sum[b][0] / n, self.sum[b][1] / n, self.sum[b][2] / n]
    }

    /// Standard error of `mean(b)` per channel.
    pub fn std_err(&self, b: usize) -> [f64; 3] {
        let n = self.n_paths.max(1) as f64;
        let mut se = [0.0; 3];
        for c in 0..3 {
            let mean = self.sum[b][c] / n;
            let var = (self.sum_sq[b][c] / n - mean * mean).max(0.0);
            se[c] = (var / n).sqrt();
        }
        se
    }

    pub fn bin_count(&self, b: usize) -> u64 {
        self.count[b]
    }

    pub fn total(&self) -> Rgb {
        let n = self.n_paths.max(1) as f64;
        let mut t = [0.0; 3];
        for b in 0..self.sum.len() {
            for c in 0..3 {
                t[c] += self.sum[b][c];
            }
        }
        Rgb { r: t[0] / n, g: t[1] / n, b: t[2] / n }
    }

    /// Relative population std of the azimuth marginal over `n_phi` groups
    /// (table azimuth bins are merged; `n_phi` must divide them evenly).
    pub fn azimuthal_relative_std(&self, n_phi: usize) -> f64 {
        assert!(self.n_phi % n_phi == 0, "{} azimuth bins not divisible into {n_phi}", self.n_phi);
        let group = self.n_phi / n_phi;
        let mut marginal = vec![0.0f64; n_phi];
        for b in 0..self.n_bins() {
            let m = self.mean(b);
            marginal[(b % self.n_phi) / group] += (m[0] + m[1] + m[2]) / 3.0;
        }
        let mean = marginal.iter().sum::<f64>() / n_phi as f64;
        if mean <= 0.0 {
            return 0.0;
        }
        let var = marginal.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n_phi as f64;
        var.sqrt() / mean
    }

    /// Write bins as CSV: cos edges, azimuth edges, per-channel estimate,
    /// landing count. Numbers use the shortest round-trippable form.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["cos_theta_lo", "cos_theta_hi", "phi_lo", "phi_hi", "r", "g", "b", "count"])
            .map_err(csv_err)?;
        for b in 0..self.n_bins() {
            let (ci, pi_) = (b / self.n_phi, b % self.n_phi);
            let c_lo = -1.0 + ci as f64 * 2.0 / self.n_cos as f64;
            let c_hi = -1.0 + (ci + 1) as f64 * 2.0 / self.n_cos as f64;
            let p_lo = pi_ as f64 * 2.0 * PI / self.n_phi as f64;
            let p_hi = (pi_ + 1) as f64 * 2.0 * PI / self.n_phi as f64;
            let m = self.mean(b);
            w.write_record([
                c_lo.to_string(),
                c_hi.to_string(),
                p_lo.to_string(),
                p_hi.to_string(),
                m[0].to_string(),
                m[1].to_string(),
                m[2].to_string(),
                self.count[b].to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Parse bin means back (edges validated against this table's layout).
    pub fn read_csv_means<R: BufRead>(&self, input: R) -> Result<Vec<[f64; 3]>> {
        let mut rdr = csv::Reader::from_reader(input);
        let mut means = Vec::with_capacity(self.n_bins());
        for rec in rdr.records() {
            let rec = rec.map_err(csv_err)?;
            let f = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| WeftError::ImageFormat(format!("bad CSV field {i}")))
            };
            means.push([f(4)?, f(5)?, f(6)?]);
        }
        if means.len() != self.n_bins() {
            return Err(WeftError::ImageFormat(format!(
                "CSV has {} bins, expected {}",
                means.len(),
                self.n_bins()
            )));
        }
        Ok(means)
    }
}

fn csv_err(e: csv::Error) -> WeftError {
    WeftError::ImageFormat(e.to_string())
}

/// Sample a flake normal from the visible distribution ⟨w·m⟩₊D(m)/σ(w)
/// (ellipsoid-projection construction; `w` points toward the viewer).
pub fn sample_visible_normal(fiber: &Fiber, w: Vec3, u1: f64, u2: f64) -> Vec3 {
    let wk = w.any_orthonormal();
    let wj = w.cross(wk);
    // quadratic form of S = I + (alpha²−1)·t·tᵀ
    let a2m1 = fiber.alpha * fiber.alpha - 1.0;
    let q = |a: Vec3, b: Vec3| a.dot(b) + a2m1 * fiber.tangent.dot(a) * fiber.tangent.dot(b);
    let (s_kj, s_ki) = (q(wk, wj), q(wk, w));
    let (s_jj, s_ji, s_ii) = (q(wj, wj), q(wj, w), q(w, w));
    // det S is basis-independent: alpha² for a fiber
    let sqrt_det = fiber.alpha;
    let inv_sqrt_ii = 1.0 / s_ii.sqrt();
    let tmp = (s_jj * s_ii - s_ji * s_ji).sqrt();
    let m_k = Vec3 { x: sqrt_det / tmp, y: 0.0, z: 0.0 };
    let m_j = Vec3 {
        x: -inv_sqrt_ii * (s_ki * s_ji - s_kj * s_ii) / tmp,
        y: inv_sqrt_ii * tmp,
        z: 0.0,
    };
    let m_i = Vec3 { x: inv_sqrt_ii * s_ki, y: inv_sqrt_ii * s_ji, z: inv_sqrt_ii * s_ii };
    let r = u1.sqrt();
    let (pu, pv) = (r * (2.0 * PI * u2).cos(), r * (2.0 * PI * u2).sin());
    let pw = (1.0 - pu * pu - pv * pv).max(0.0).sqrt();
    let m_local = (m_k * pu + m_j * pv + m_i * pw).normalized();
    (wk * m_local.x + wj * m_local.y + w * m_local.z).normalized()
}

/// Outcome of a slab walk.
#[derive(Debug, Clone)]
pub struct WalkResult {
    pub single: LobeTable,
    pub multi: LobeTable,
    /// Fraction of paths leaving with no collision (the forward delta).
    pub delta_fraction: f64,
    /// Mean total scattered exit weight per path (per channel).
    pub scattered_exit: Rgb,
}

struct ChunkTally {
    single: LobeTable,
    multi: LobeTable,
    delta: u64,
    exit: [f64; 3],
}

fn walk_chunk(slab: &SlabConfig, wi: Vec3, cfg: &WalkConfig, chunk: u64, n: u64) -> ChunkTally {
    let (axis, ref_dir) = LobeTable::frame_for(slab.fiber.tangent);
    let mut tally = ChunkTally {
        single: LobeTable::new(axis, ref_dir, cfg.n_cos_bins, cfg.n_phi_bins),
        multi: LobeTable::new(axis, ref_dir, cfg.n_cos_bins, cfg.n_phi_bins),
        delta: 0,
        exit: [0.0; 3],
    };
    tally.single.n_paths = n;
    tally.multi.n_paths = n;
    let mut rng = ChaCha8Rng::seed_from_u64(hash_words(&[cfg.seed, chunk]));
    let t_slab = slab.thickness;
    for _ in 0..n {
        let mut h = t_slab;
        let mut u = -wi;
        let mut weight = Rgb::WHITE;
        let mut bounces = 0u32;
        loop {
            let sigma = slab.fiber.projected_area(u).max(1e-12);
            let step: f64 = -(1.0 - rng.gen::<f64>()).ln() / sigma;
            h += step * u.z;
            if h <= 0.0 || h >= t_slab {
                break;
            }
            bounces += 1;
            let m = sample_visible_normal(&slab.fiber, -u, rng.gen(), rng.gen());
            u = u - m * (2.0 * u.dot(m));
            weight = weight * slab.albedo;
            if weight.max_channel() < RR_THRESHOLD {
                if rng.gen::<f64>() < RR_SURVIVAL {
                    weight = weight / RR_SURVIVAL;
                } else {
                    bounces = u32::MAX; // absorbed; tally nothing
                    break;
                }
            }
        }
        match bounces {
            0 => tally.delta += 1,
            u32::MAX => {}
            b => {
                for (c, v) in weight.to_array().into_iter().enumerate() {
                    tally.exit[c] += v;
                }
                if b == 1 {
                    tally.single.add(u, weight);
                }
                if b >= cfg.min_multi_bounces {
                    tally.multi.add(u, weight);
                }
            }
        }
    }
    tally
}

/// Run the slab walk for incidence `wi` (unit, pointing away from the slab on
/// the entry side, wi·z > 0).
pub fn walk_slab(slab: &SlabConfig, wi: Vec3, cfg: &WalkConfig) -> WalkResult {
    assert!(wi.z > 0.0, "incidence must come from the +z side");
    let n_chunks = cfg.n_paths.div_ceil(CHUNK);
    let tallies: Vec<ChunkTally> = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let n = CHUNK.min(cfg.n_paths - chunk * CHUNK);
            walk_chunk(slab, wi, cfg, chunk, n)
        })
        .collect();
    let (axis, ref_dir) = LobeTable::frame_for(slab.fiber.tangent);
    let mut single = LobeTable::new(axis, ref_dir, cfg.n_cos_bins, cfg.n_phi_bins);
    let mut multi = LobeTable::new(axis, ref_dir, cfg.n_cos_bins, cfg.n_phi_bins);
    let mut delta = 0u64;
    let mut exit = [0.0f64; 3];
    for t in &tallies {
        single.merge(&t.single);
        multi.merge(&t.multi);
        delta += t.delta;
        for c in 0..3 {
            exit[c] += t.exit[c];
        }
    }
    let n = cfg.n_paths.max(1) as f64;
    WalkResult {
        single,
        multi,
        delta_fraction: delta as f64 / n,
        scattered_exit: Rgb { r: exit[0] / n, g: exit[1] / n, b: exit[2] / n },
    }
}

// --- analytic-lobe fitting --------------------------------------------------

/// Which analytic family to fit against a binned lobe.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LobeModel {
    /// k·D(ω_h)·G / (4|ci||co|): the single-scattering functional form.
    SingleForm,
    /// k·D(ω_h′)·G / (2|ci||co|): the azimuth-aligned multiple-scattering form.
    AlignedForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hemisphere {
    Reflection,
    Transmission,
}

#[derive(Debug, Clone)]
pub struct LobeFit {
    pub model: LobeModel,
    pub k: f64,
    pub alpha: f64,
    pub thickness: f64,
    /// ‖model − target‖₂ / ‖target‖₂ over the fitted bins.
    pub rel_l2: f64,
}

fn model_bsdf(model: LobeModel, fiber: &Fiber, thickness: f64, k: f64, wi: Vec3, wo: Vec3) -> f64 {
    let ci = wi.z.abs().max(COS_CLAMP);
    let co = wo.z.abs().max(COS_CLAMP);
    let li = lambda_slope(fiber, wi, Vec3::Z);
    let lo = lambda_slope(fiber, wo, Vec3::Z);
    let same_side = wi.z * wo.z >= 0.0;
    let g = if same_side { g_reflect(li, lo, thickness) } else { g_transmit(li, lo, thickness) };
    match model {
        LobeModel::SingleForm => match (wi + wo).try_normalized() {
            Some(h) => k * fiber.ndf(h) * g / (4.0 * ci * co),
            None => 0.0,
        },
        LobeModel::AlignedForm => {
            let wo_al = rotate_to_plane(wo, fiber.tangent, wi);
            match (wi + wo_al).try_normalized() {
                Some(h) => k * fiber.ndf(h) * g / (2.0 * ci * co),
                None => 0.0,
            }
        }
    }
}

/// Predicted bin mass: model × |cos θ_slab| integrated over the bin by 2×2
/// midpoint quadrature.
fn model_bin_mass(model: LobeModel, fiber: &Fiber, thickness: f64, k: f64, wi: Vec3, table: &LobeTable, b: usize) -> f64 {
    let quarter = table.bin_solid_angle() / 4.0;
    let mut acc = 0.0;
    for fc in [0.25, 0.75] {
        for fp in [0.25, 0.75] {
            let wo = table.bin_dir(b, fc, fp);
            acc += model_bsdf(model, fiber, thickness, k, wi, wo) * wo.z.abs();
        }
    }
    acc * quarter
}

fn hemisphere_bins(table: &LobeTable, hemisphere: Hemisphere) -> Vec<usize> {
    (0..table.n_bins())
        .filter(|&b| {
            let z = table.bin_center(b).z;
            match hemisphere {
                Hemisphere::Reflection => z > 0.0,
                Hemisphere::Transmission => z < 0.0,
            }
        })
        .collect()
}

/// Least-squares fit of (k, alpha, thickness) of the chosen analytic family
/// to the table's luminance bins on one hemisphere. Deterministic
/// (Nelder–Mead from a fixed start set).
pub fn fit_lobe(table: &LobeTable, wi: Vec3, tangent: Vec3, model: LobeModel, hemisphere: Hemisphere) -> LobeFit {
    let bins = hemisphere_bins(table, hemisphere);
    let target: Vec<f64> = bins
        .iter()
        .map(|&b| {
            let m = table.mean(b);
            (m[0] + m[1] + m[2]) / 3.0
        })
        .collect();
    let target_norm = target.iter().map(|t| t * t).sum::<f64>().sqrt();

    let objective = |p: &[f64; 3]| -> f64 {
        let (k, alpha, thickness) = (p[0].exp(), sigmoid_range(p[1], 0.01, 1.0), p[2].exp());
        let fiber = Fiber::new(tangent, alpha);
        bins.iter()
            .zip(&target)
            .map(|(&b, &t)| {
                let m = model_bin_mass(model, &fiber, thickness, k, wi, table, b);
                (m - t) * (m - t)
            })
            .sum()
    };

    let starts: [[f64; 3]; 4] = [
        [0.5f64.ln(), logit_range(0.3, 0.01, 1.0), 0.0],
        [0.0, logit_range(0.6, 0.01, 1.0), 2.0f64.ln()],
        [0.2f64.ln(), logit_range(0.85, 0.01, 1.0), 0.5f64.ln()],
        [2.0f64.ln(), logit_range(0.15, 0.01, 1.0), 3.0f64.ln()],
    ];
    let mut best = starts[0];
    let mut best_val = f64::INFINITY;
    for s in starts {
        let (p, val) = nelder_mead(&objective, s, 400);
        if val < best_val {
            best_val = val;
            best = p;
        }
    }
    LobeFit {
        model,
        k: best[0].exp(),
        alpha: sigmoid_range(best[1], 0.01, 1.0),
        thickness: best[2].exp(),
        rel_l2: if target_norm > 0.0 { best_val.sqrt() / target_norm } else { 0.0 },
    }
}

fn sigmoid_range(u: f64, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) / (1.0 + (-u).exp())
}

fn logit_range(x: f64, lo: f64, hi: f64) -> f64 {
    let p = ((x - lo) / (hi - lo)).clamp(1e-9, 1.0 - 1e-9);
    (p / (1.0 - p)).ln()
}

/// Plain Nelder–Mead on an N-dim objective; returns the best vertex.
fn nelder_mead<const N: usize>(f: &impl Fn(&[f64; N]) -> f64, start: [f64; N], iters: usize) -> ([f64; N], f64) {
    let mut simplex: Vec<[f64; N]> = vec![start];
    for d in 0..N {
        let mut v = start;
        v[d] += 0.5;
        simplex.push(v);
    }
    let mut vals: Vec<f64> = simplex.iter().map(|v| f(v)).collect();
    for _ in 0..iters {
        let mut order: Vec<usize> = (0..=N).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        let (lo, hi, hi2) = (order[0], order[N], order[N - 1]);
        let mut centroid = [0.0; N];
        for (idx, v) in simplex.iter().enumerate() {
            if idx != hi {
                for d in 0..N {
                    centroid[d] += v[d] / N as f64;
                }
            }
        }
        let combine = |a: f64| {
            let mut v = [0.0; N];
            for d in 0..N {
                v[d] = centroid[d] + a * (simplex[hi][d] - centroid[d]);
            }
            v
        };
        let reflected = combine(-1.0);
        let fr = f(&reflected);
        if fr < vals[lo] {
            let expanded = combine(-2.0);
            let fe = f(&expanded);
            if fe < fr {
                simplex[hi] = expanded;
                vals[hi] = fe;
            } else {
                simplex[hi] = reflected;
                vals[hi] = fr;
            }
        } else if fr < vals[hi2] {
            simplex[hi] = reflected;
            vals[hi] = fr;
        } else {
            let contracted = combine(0.5);
            let fc = f(&contracted);
            if fc < vals[hi] {
                simplex[hi] = contracted;
                vals[hi] = fc;
            } else {
                for idx in 0..=N {
                    if idx != lo {
                        for d in 0..N {
                            simplex[idx][d] = (simplex[idx][d] + simplex[lo][d]) / 2.0;
                        }
                        vals[idx] = f(&simplex[idx]);
                    }
                }
            }
        }
        if (vals[hi] - vals[lo]).abs() < 1e-14 * (1.0 + vals[lo].abs()) {
            break;
        }
    }
    let mut best = 0;
    for i in 1..=N {
        if vals[i] < vals[best] {
            best = i;
        }
    }
    (simplex[best], vals[best])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layer::{single_scatter, SlabLobe};
    use crate::math::v3;
    use approx::assert_relative_eq;

    fn gray(v: f64) -> Rgb {
        Rgb::splat(v)
    }

    #[test]
    fn empty_slab_is_pure_delta() {
        let slab = SlabConfig { fiber: Fiber::new(Vec3::X, 0.5), thickness: 0.0, albedo: gray(1.0) };
        let res = walk_slab(&slab, Vec3::Z, &WalkConfig { n_paths: 10_000, ..Default::default() });
        assert_eq!(res.delta_fraction, 1.0);
        assert_eq!(res.single.total().r, 0.0);
        assert_eq!(res.multi.total().r, 0.0);
    }

    #[test]
    fn thick_white_slab_conserves_energy() {
        let slab = SlabConfig { fiber: Fiber::new(Vec3::X, 0.5), thickness: 50.0, albedo: gray(1.0) };
        let cfg = WalkConfig { n_paths: 100_000, seed: 3, ..Default::default() };
        let res = walk_slab(&slab, Vec3::Z, &cfg);
        assert!(res.delta_fraction < 1e-6);
        assert_relative_eq!(res.scattered_exit.r, 1.0, epsilon = 0.02);
    }

    #[test]
    fn walk_is_deterministic_across_thread_counts() {
        let slab = SlabConfig { fiber: Fiber::new(Vec3::X, 0.4), thickness: 1.0, albedo: gray(0.8) };
        let cfg = WalkConfig { n_paths: 30_000, seed: 11, ..Default::default() };
        let base = walk_slab(&slab, Vec3::Z, &cfg);
        for threads in [1, 3] {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            let res = pool.install(|| walk_slab(&slab, Vec3::Z, &cfg));
            assert_eq!(res.scattered_exit, base.scattered_exit);
            assert_eq!(res.single.mean(100), base.single.mean(100));
            assert_eq!(res.multi.mean(321), base.multi.mean(321));
        }
    }

    #[test]
    fn visible_normals_face_the_viewer_and_follow_the_ndf() {
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        let fiber = Fiber::new(Vec3::X, 0.5);
        let w = v3(0.3, -0.2, 0.93).normalized();
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        let n = 400_000usize;
        let (axis, ref_dir) = LobeTable::frame_for(fiber.tangent);
        let probe = LobeTable::new(axis, ref_dir, 25, 40); // 1000 bins
        let mut counts = vec![0u64; probe.n_bins()];
        for _ in 0..n {
            let m = sample_visible_normal(&fiber, w, rng.gen(), rng.gen());
            assert!(m.dot(w) > -1e-9, "sampled normal facing away");
            counts[probe.bin_index(m)] += 1;
        }
        // expected multinomial mass per bin: ∫_bin ⟨w·m⟩D/σ via 4×4 midpoints
        let sigma = fiber.projected_area(w);
        let sub = table_quadrature(&probe, |m| m.dot(w).max(0.0) * fiber.ndf(m) / sigma);
        let mut stat = 0.0;
        let mut dof: i64 = -1; // total is constrained
        for (b, &c) in counts.iter().enumerate() {
            let expected = sub[b] * n as f64;
            if expected < 5.0 {
                continue;
            }
            stat += (c as f64 - expected).powi(2) / expected;
            dof += 1;
        }
        let chi = ChiSquared::new(dof as f64).unwrap();
        let p = 1.0 - chi.cdf(stat);
        assert!(p > 0.01, "chi-square p = {p:.4} (stat {stat:.1}, dof {dof})");
    }

    fn table_quadrature(table: &LobeTable, f: impl Fn(Vec3) -> f64) -> Vec<f64> {
        let quarter = table.bin_solid_angle() / 16.0;
        (0..table.n_bins())
            .map(|b| {
                let mut acc = 0.0;
                for i in 0..4 {
                    for j in 0..4 {
                        let w = table.bin_dir(b, (i as f64 + 0.5) / 4.0, (j as f64 + 0.5) / 4.0);
                        acc += f(w);
                    }
                }
                acc * quarter
            })
            .collect()
    }

    #[test]
    fn single_bounce_walk_matches_the_analytic_lobe() {
        let fiber = Fiber::new(Vec3::X, 0.5);
        let slab = SlabConfig { fiber, thickness: 1.0, albedo: gray(1.0) };
        let cfg = WalkConfig { n_paths: 2_000_000, seed: 5, n_cos_bins: 16, n_phi_bins: 24, ..Default::default() };
        let wi = Vec3::Z;
        let res = walk_slab(&slab, wi, &cfg);
        let lobe = SlabLobe { fiber, thickness: 1.0, albedo: gray(1.0) };
        let expected = table_quadrature(&res.single, |wo| {
            single_scatter(&lobe, wi, wo, Vec3::Z).r * wo.z.abs()
        });
        let mut occupied = 0;
        let mut within = 0;
        for b in 0..res.single.n_bins() {
            if res.single.bin_count(b) < 20 {
                continue;
            }
            occupied += 1;
            let se = res.single.std_err(b)[0].max(1e-12);
            if (res.single.mean(b)[0] - expected[b]).abs() <= 3.5 * se {
                within += 1;
            }
        }
        assert!(occupied > 100, "too few occupied bins: {occupied}");
        let frac = within as f64 / occupied as f64;
        assert!(frac >= 0.85, "only {within}/{occupied} bins within 3.5 SE");
    }

    #[test]
    fn lobe_fit_recovers_its_own_model() {
        // Synthetic target filled from the aligned analytic lobe itself.
        let tangent = Vec3::X;
        let wi = v3(0.2, 0.0, 0.98).normalized();
        let (axis, ref_dir) = LobeTable::frame_for(tangent);
        let mut table = LobeTable::new(axis, ref_dir, 32, 36);
        table.n_paths = 1;
        let truth = Fiber::new(tangent, 0.5);
        for b in 0..table.n_bins() {
            let mass = model_bin_mass(LobeModel::AlignedForm, &truth, 2.0, 0.7, wi, &table, b);
            table.sum[b] = [mass, mass, mass];
            table.count[b] = 1;
        }
        let fit = fit_lobe(&table, wi, tangent, LobeModel::AlignedForm, Hemisphere::Transmission);
        assert!(fit.rel_l2 < 0.02, "self fit rel_l2 = {}", fit.rel_l2);
        assert_relative_eq!(fit.alpha, 0.5, epsilon = 0.05);
        assert_relative_eq!(fit.thickness, 2.0, max_relative = 0.15);
    }

    #[test]
    fn csv_round_trips_every_bin() {
        let slab = SlabConfig { fiber: Fiber::new(Vec3::X, 0.5), thickness: 1.5, albedo: gray(0.9) };
        let cfg = WalkConfig { n_paths: 20_000, seed: 2, ..Default::default() };
        let res = walk_slab(&slab, Vec3::Z, &cfg);
        let mut buf = Vec::new();
        res.multi.write_csv(&mut buf).unwrap();
        let means = res.multi.read_csv_means(std::io::Cursor::new(&buf)).unwrap();
        for b in 0..res.multi.n_bins() {
            assert_eq!(means[b], res.multi.mean(b), "bin {b}");
        }
    }
}
