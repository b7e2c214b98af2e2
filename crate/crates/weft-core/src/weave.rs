//! Woven-surface geometry: binding patterns, per-yarn tension, bent-cylinder
//! shading normals, twist, and the inter-yarn gap mask.
//!
//! The patch is parameterized by uv ∈ [0,1)². Wefts run horizontally (along
//! u), warps vertically (along v). A grid cell is one yarn crossing; the
//! binding grid stores 1 where the weft passes over the warp.

use crate::math::{hash_words, splitmix64, Vec3};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum YarnKind {
    Weft,
    Warp,
}

impl YarnKind {
    pub fn other(self) -> YarnKind {
        match self {
            YarnKind::Weft => YarnKind::Warp,
            YarnKind::Warp => YarnKind::Weft,
        }
    }
}

/// The five supported bindings. Ids are stable and used on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pattern {
    Plain,
    Twill,
    Twill90,
    Satin,
    Satin90,
}

pub const ALL_PATTERNS: [Pattern; 5] =
    [Pattern::Plain, Pattern::Twill, Pattern::Twill90, Pattern::Satin, Pattern::Satin90];

impl Pattern {
    pub fn id(self) -> u8 {
        match self {
            Pattern::Plain => 0,
            Pattern::Twill => 1,
            Pattern::Twill90 => 2,
            Pattern::Satin => 3,
            Pattern::Satin90 => 4,
        }
    }

    pub fn from_id(id: u8) -> Option<Pattern> {
        ALL_PATTERNS.get(id as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Pattern::Plain => "plain",
            Pattern::Twill => "twill",
            Pattern::Twill90 => "twill90",
            Pattern::Satin => "satin",
            Pattern::Satin90 => "satin90",
        }
    }

    /// Thickness floor of the tension compression: long-float bindings
    /// compress to half thickness, plain weave not at all.
    pub fn thickness_floor(self) -> f64 {
        match self {
            Pattern::Plain => 1.0,
            _ => 0.5,
        }
    }

    /// Base pattern for prior statistics (90° variants share their parent's).
    pub fn family(self) -> Pattern {
        match self {
            Pattern::Twill90 => Pattern::Twill,
            Pattern::Satin90 => Pattern::Satin,
            p => p,
        }
    }
}

/// Binding grid; `cells[i*cols + j] = 1` means the weft of row i rides over
/// the warp of column j.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternGrid {
    pub rows: usize,
    pub cols: usize,
    cells: Vec<u8>,
}

impl PatternGrid {
    pub fn get(&self, i: usize, j: usize) -> u8 {
        self.cells[(i % self.rows) * self.cols + j % self.cols]
    }

    pub fn weft_on_top(&self, i: usize, j: usize) -> bool {
        self.get(i, j) == 1
    }

    pub fn transposed(&self) -> PatternGrid {
        let mut cells = vec![0; self.cells.len()];
        for i in 0..self.cols {
            for j in 0..self.rows {
                cells[i * self.rows + j] = self.get(j, i);
            }
        }
        PatternGrid { rows: self.cols, cols: self.rows, cells }
    }
}

/// Build the binding grid for a pattern. Every row and column contains both
/// an over and an under crossing for all five bindings.
pub fn pattern_grid(pattern: Pattern) -> PatternGrid {
    match pattern {
        Pattern::Plain => PatternGrid { rows: 2, cols: 2, cells: vec![1, 0, 0, 1] },
        Pattern::Twill => {
            // 2/2 diagonal: row i is row 0 ([1,1,0,0]) displaced by i columns.
            let mut cells = vec![0; 16];
            for i in 0..4 {
                for j in 0..4 {
                    cells[i * 4 + j] = u8::from((j + 4 - i) % 4 <= 1);
                }
            }
            PatternGrid { rows: 4, cols: 4, cells }
        }
        Pattern::Twill90 => pattern_grid(Pattern::Twill).transposed(),
        Pattern::Satin => {
            // 5-end satin: a single warp riser per row, stride-2 columns.
            let mut cells = vec![1; 25];
            for i in 0..5 {
                cells[i * 5 + (2 * i) % 5] = 0;
            }
            PatternGrid { rows: 5, cols: 5, cells }
        }
        Pattern::Satin90 => pattern_grid(Pattern::Satin).transposed(),
    }
}

/// Piecewise-linear tension profile of one yarn line: 0 at the centers of its
/// floats (on-top runs), 1 at the centers of its under runs, linear between
/// adjacent run centers, cyclic with the pattern repeat.
#[derive(Debug, Clone)]
pub struct TensionProfile {
    /// (position in cells, tension value at that run center), sorted.
    centers: Vec<(f64, f64)>,
    period: f64,
}

impl TensionProfile {
    /// `on_top[k]` says whether the yarn rides over the crossing in cell k.
    pub fn new(on_top: &[bool]) -> TensionProfile {
        let n = on_top.len();
        assert!(n >= 2, "tension profile needs at least two cells");
        assert!(
            on_top.iter().any(|&b| b) && on_top.iter().any(|&b| !b),
            "yarn line must both rise and sink within one repeat"
        );
        let mut centers = Vec::new();
        let mut k = 0;
        // index of the first cell that starts a run
        let first = (0..n).find(|&i| on_top[(i + n - 1) % n] != on_top[i]).unwrap();
        while k < n {
            let start = first + k;
            let val = on_top[start % n];
            let mut len = 1;
            while len < n && on_top[(start + len) % n] == val {
                len += 1;
            }
            let center = (start as f64 + len as f64 / 2.0) % n as f64;
            centers.push((center, if val { 0.0 } else { 1.0 }));
            k += len;
        }
        centers.sort_by(|a, b| a.0.total_cmp(&b.0));
        TensionProfile { centers, period: n as f64 }
    }

    /// Tension μ ∈ [0,1] and its per-cell slope dμ/dx at along-position `x`
    /// (cells; any real value, wrapped into the repeat).
    pub fn eval(&self, x: f64) -> (f64, f64) {
        let x = x.rem_euclid(self.period);
        let n = self.centers.len();
        let idx = self.centers.partition_point(|c| c.0 <= x);
        let (x0, v0) = self.centers[(idx + n - 1) % n];
        let (x1, v1) = self.centers[idx % n];
        let span = (x1 - x0).rem_euclid(self.period);
        let span = if span == 0.0 { self.period } else { span };
        let t = (x - x0).rem_euclid(self.period) / span;
        (v0 + (v1 - v0) * t, (v1 - v0) / span)
    }
}

/// Tension profile of one yarn line of a binding.
/// `line` is the weft row or warp column index (wrapped into the repeat).
pub fn tension_profile(grid: &PatternGrid, kind: YarnKind, line: usize) -> TensionProfile {
    let on_top: Vec<bool> = match kind {
        YarnKind::Weft => (0..grid.cols).map(|j| grid.weft_on_top(line, j)).collect(),
        YarnKind::Warp => (0..grid.rows).map(|i| !grid.weft_on_top(i, line)).collect(),
    };
    TensionProfile::new(&on_top)
}

/// Tension level μ at an along-yarn position (cells).
pub fn tension_level(grid: &PatternGrid, kind: YarnKind, line: usize, x: f64) -> f64 {
    tension_profile(grid, kind, line).eval(x).0
}

/// Yarn thickness under tension: full at μ = 0, compressed to the pattern's
/// floor at μ = 1, linear between.
pub fn tension_thickness(thickness: f64, mu: f64, floor: f64) -> f64 {
    thickness * (floor + (1.0 - mu) * (1.0 - floor))
}

/// One shading layer of the woven surface at a point.
#[derive(Debug, Clone, Copy)]
pub struct SurfaceLayer {
    pub kind: YarnKind,
    /// Bent-cylinder shading normal.
    pub normal: Vec3,
    /// Fiber tangent: along the yarn, twisted about the normal.
    pub tangent: Vec3,
    /// Tension level of the yarn at this crossing.
    pub mu: f64,
    /// Multiplicative specular-albedo jitter (1 when the noise level is 0).
    pub albedo_jitter: f64,
}

/// Geometry of the woven surface at one uv sample.
#[derive(Debug, Clone, Copy)]
pub struct SurfacePoint {
    /// Between yarns: light passes straight through, no surface lobes.
    pub gap: bool,
    /// Visible yarn first, the crossing yarn of the other kind below it.
    pub layers: [SurfaceLayer; 2],
}

/// Per-yarn geometric controls of the woven map.
#[derive(Debug, Clone, Copy)]
pub struct YarnGeometry {
    /// Yarns per inch across this yarn's stacking direction.
    pub density: f64,
    /// Yarn width as a fraction of the cell (1 = no gap).
    pub xi: f64,
    /// Height scaling of the bent cylinder.
    pub beta: f64,
    /// Fiber twist about the shading normal, radians.
    pub twist: f64,
}

/// Evaluator for the woven surface over a physical patch.
#[derive(Debug, Clone)]
pub struct WeaveMap {
    pub pattern: Pattern,
    grid: PatternGrid,
    weft: YarnGeometry,
    warp: YarnGeometry,
    noise: f64,
    /// Yarn counts across the patch: wefts stacked along v, warps along u.
    n_rows: f64,
    n_cols: f64,
    weft_profiles: Vec<TensionProfile>,
    warp_profiles: Vec<TensionProfile>,
}

/// Guard against the infinite-slope horizon of the cylinder section.
const MAX_SECTION_OFFSET: f64 = 0.995;

impl WeaveMap {
    pub fn new(
        pattern: Pattern,
        weft: YarnGeometry,
        warp: YarnGeometry,
        noise: f64,
        patch_w_inches: f64,
        patch_h_inches: f64,
    ) -> WeaveMap {
        let grid = pattern_grid(pattern);
        let weft_profiles =
            (0..grid.rows).map(|i| tension_profile(&grid, YarnKind::Weft, i)).collect();
        let warp_profiles =
            (0..grid.cols).map(|j| tension_profile(&grid, YarnKind::Warp, j)).collect();
        WeaveMap {
            pattern,
            n_rows: weft.density * patch_h_inches,
            n_cols: warp.density * patch_w_inches,
            grid,
            weft,
            warp,
            noise,
            weft_profiles,
            warp_profiles,
        }
    }

    fn yarn(&self, kind: YarnKind) -> &YarnGeometry {
        match kind {
            YarnKind::Weft => &self.weft,
            YarnKind::Warp => &self.warp,
        }
    }

    /// Evaluate one yarn layer. `line`/`cell` index the crossing, `frac_cross`
    /// is the in-cell coordinate across the yarn, `along` the position along
    /// it in cells.
    fn layer(&self, kind: YarnKind, line: usize, cell: usize, frac_cross: f64, along: f64) -> SurfaceLayer {
        let geo = self.yarn(kind);
        let (along_dir, cross_dir) = match kind {
            YarnKind::Weft => (Vec3::X, Vec3::Y),
            YarnKind::Warp => (Vec3::Y, Vec3::X),
        };
        let profile = match kind {
            YarnKind::Weft => &self.weft_profiles[line % self.grid.rows],
            YarnKind::Warp => &self.warp_profiles[line % self.grid.cols],
        };
        let (mu, mu_slope) = profile.eval(along);

        let (beta, albedo_jitter) = if self.noise > 0.0 {
            let h = hash_words(&[kind as u64, line as u64, cell as u64]);
            let u0 = (h >> 11) as f64 / (1u64 << 53) as f64;
            let u1 = (splitmix64(h) >> 11) as f64 / (1u64 << 53) as f64;
            (geo.beta * (1.0 + self.noise * (2.0 * u0 - 1.0)), 1.0 + self.noise * (2.0 * u1 - 1.0))
        } else {
            (geo.beta, 1.0)
        };

        // Cylinder section: offset across the yarn in half-width units.
        let s = ((frac_cross - 0.5) / (geo.xi / 2.0)).clamp(-MAX_SECTION_OFFSET, MAX_SECTION_OFFSET);
        let tan_cross = s / (1.0 - s * s).sqrt();

        // Longitudinal bending: height ∝ cos(π·μ) with amplitude set by the
        // yarn's physical half-width; slopes are per along-cell, converted by
        // the density ratio. Continuous because dμ/dx jumps only where
        // sin(π·μ) vanishes.
        let other_density = self.yarn(kind.other()).density;
        let amplitude = (geo.xi / 2.0) * (other_density / geo.density);
        let slope_along = (PI * amplitude / 2.0) * (PI * mu).sin() * mu_slope;

        let normal = (Vec3::Z + (cross_dir * tan_cross + along_dir * slope_along) * beta).normalized();
        let tangent = (along_dir - normal * normal.dot(along_dir)).normalized();
        let tangent = tangent.rotate_about(normal, geo.twist);
        SurfaceLayer { kind, normal, tangent, mu, albedo_jitter }
    }

    /// Surface geometry at uv ∈ [0,1)² (wrapped outside).
    pub fn eval(&self, u: f64, v: f64) -> SurfacePoint {
        let xu = u.rem_euclid(1.0) * self.n_cols;
        let yv = v.rem_euclid(1.0) * self.n_rows;
        let j = xu.floor();
        let i = yv.floor();
        let fu = xu - j;
        let fv = yv - i;
        let (i, j) = (i as usize, j as usize);

        let in_weft = (fv - 0.5).abs() <= self.weft.xi / 2.0;
        let in_warp = (fu - 0.5).abs() <= self.warp.xi / 2.0;
        if !in_weft && !in_warp {
            let hole = SurfaceLayer {
                kind: YarnKind::Weft,
                normal: Vec3::Z,
                tangent: Vec3::X,
                mu: 0.0,
                albedo_jitter: 1.0,
            };
            return SurfacePoint { gap: true, layers: [hole, hole] };
        }

        let top = match (in_weft, in_warp) {
            (true, false) => YarnKind::Weft,
            (false, true) => YarnKind::Warp,
            _ => {
                if self.grid.weft_on_top(i, j) {
                    YarnKind::Weft
                } else {
                    YarnKind::Warp
                }
            }
        };

        let weft_layer = self.layer(YarnKind::Weft, i, j, fv, xu);
        let warp_layer = self.layer(YarnKind::Warp, j, i, fu, yv);
        let layers = match top {
            YarnKind::Weft => [weft_layer, warp_layer],
            YarnKind::Warp => [warp_layer, weft_layer],
        };
        SurfacePoint { gap: false, layers }
    }

    pub fn grid(&self) -> &PatternGrid {
        &self.grid
    }

    /// Crossings across the patch (u, v).
    pub fn cell_counts(&self) -> (f64, f64) {
        (self.n_cols, self.n_rows)
    }
}

/// Smallest uv offsets advancing the map by one full pattern repeat.
pub fn repeat_uv(map: &WeaveMap) -> (f64, f64) {
    let (n_cols, n_rows) = map.cell_counts();
    (map.grid().cols as f64 / n_cols, map.grid().rows as f64 / n_rows)
}

/// Angle between two unit vectors.
pub fn tilt_angle(a: Vec3, b: Vec3) -> f64 {
    a.dot(b).clamp(-1.0, 1.0).acos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn grids_match_the_pinned_bindings() {
        let plain = pattern_grid(Pattern::Plain);
        assert_eq!((plain.rows, plain.cols), (2, 2));
        assert_eq!([plain.get(0, 0), plain.get(0, 1), plain.get(1, 0), plain.get(1, 1)], [1, 0, 0, 1]);

        let twill = pattern_grid(Pattern::Twill);
        let rows: Vec<Vec<u8>> =
            (0..4).map(|i| (0..4).map(|j| twill.get(i, j)).collect()).collect();
        assert_eq!(rows[0], vec![1, 1, 0, 0]);
        assert_eq!(rows[1], vec![0, 1, 1, 0]);
        assert_eq!(rows[2], vec![0, 0, 1, 1]);
        assert_eq!(rows[3], vec![1, 0, 0, 1]);

        let satin = pattern_grid(Pattern::Satin);
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(satin.get(i, j), u8::from(j != (2 * i) % 5), "satin {i},{j}");
            }
        }

        let t90 = pattern_grid(Pattern::Twill90);
        let s90 = pattern_grid(Pattern::Satin90);
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(t90.get(i, j), twill.get(j, i));
            }
        }
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(s90.get(i, j), satin.get(j, i));
            }
        }
    }

    #[test]
    fn every_line_rises_and_sinks() {
        for p in ALL_PATTERNS {
            let g = pattern_grid(p);
            for i in 0..g.rows {
                let row: Vec<u8> = (0..g.cols).map(|j| g.get(i, j)).collect();
                assert!(row.contains(&0) && row.contains(&1), "{p:?} row {i}");
            }
            for j in 0..g.cols {
                let col: Vec<u8> = (0..g.rows).map(|i| g.get(i, j)).collect();
                assert!(col.contains(&0) && col.contains(&1), "{p:?} col {j}");
            }
        }
    }

    #[test]
    fn tension_endpoints_are_exact() {
        let g = pattern_grid(Pattern::Plain);
        // Row 0 = [1, 0]: float center at cell 0 (x = 0.5), under at x = 1.5.
        assert_eq!(tension_level(&g, YarnKind::Weft, 0, 0.5), 0.0);
        assert_eq!(tension_level(&g, YarnKind::Weft, 0, 1.5), 1.0);
        assert_eq!(tension_level(&g, YarnKind::Weft, 0, 1.0), 0.5);
        // and the thickness mapping at those endpoints
        assert_eq!(tension_thickness(2.0, 0.0, 0.5), 2.0);
        assert_eq!(tension_thickness(2.0, 1.0, 0.5), 1.0);
        assert_relative_eq!(tension_thickness(2.0, 0.5, 0.5), 1.5, epsilon = 1e-15);
        assert_eq!(tension_thickness(3.0, 1.0, 1.0), 3.0); // plain floor = 1
    }

    #[test]
    fn twill_tension_profile() {
        let g = pattern_grid(Pattern::Twill);
        // Row 0 floats over cells {0,1}, under {2,3}: centers at 1.0 and 3.0.
        assert_eq!(tension_level(&g, YarnKind::Weft, 0, 1.0), 0.0);
        assert_eq!(tension_level(&g, YarnKind::Weft, 0, 3.0), 1.0);
        assert_relative_eq!(tension_level(&g, YarnKind::Weft, 0, 2.0), 0.5, epsilon = 1e-12);
        assert_relative_eq!(tension_level(&g, YarnKind::Weft, 0, 0.0), 0.5, epsilon = 1e-12);
        // periodic
        assert_relative_eq!(
            tension_level(&g, YarnKind::Weft, 0, 1.7),
            tension_level(&g, YarnKind::Weft, 0, 5.7),
            epsilon = 1e-12
        );
    }

    fn test_map(pattern: Pattern, xi: f64) -> WeaveMap {
        let weft = YarnGeometry { density: 10.0, xi, beta: 1.0, twist: 0.0 };
        let warp = YarnGeometry { density: 10.0, xi, beta: 1.0, twist: 0.0 };
        WeaveMap::new(pattern, weft, warp, 0.0, 1.0, 1.0)
    }

    #[test]
    fn cell_center_of_a_weft_float_is_flat() {
        let map = test_map(Pattern::Plain, 1.0);
        // cell (0,0): weft on top; center uv of that cell
        let sp = map.eval(0.05, 0.05);
        assert!(!sp.gap);
        assert_eq!(sp.layers[0].kind, YarnKind::Weft);
        assert_relative_eq!(sp.layers[0].normal.z, 1.0, epsilon = 1e-12);
        assert_eq!(sp.layers[0].mu, 0.0);
        assert_eq!(sp.layers[1].kind, YarnKind::Warp);
    }

    #[test]
    fn top_yarn_follows_the_binding() {
        let map = test_map(Pattern::Plain, 1.0);
        assert_eq!(map.eval(0.05, 0.05).layers[0].kind, YarnKind::Weft);
        assert_eq!(map.eval(0.15, 0.05).layers[0].kind, YarnKind::Warp);
        assert_eq!(map.eval(0.05, 0.15).layers[0].kind, YarnKind::Warp);
        assert_eq!(map.eval(0.15, 0.15).layers[0].kind, YarnKind::Weft);
    }

    #[test]
    fn gap_mask_matches_the_band_predicate() {
        let map = test_map(Pattern::Plain, 0.5);
        // cell corner: outside both bands
        assert!(map.eval(0.0, 0.0).gap);
        assert!(!map.eval(0.05, 0.05).gap);
        // half-width band edges are inside (closed bands)
        assert!(!map.eval(0.05, 0.025).gap);
        // full-width yarns leave no gap anywhere
        let closed = test_map(Pattern::Plain, 1.0);
        for k in 0..50 {
            let t = k as f64 / 50.0;
            assert!(!closed.eval(t, t * 0.7).gap);
        }
    }

    #[test]
    fn exposed_single_yarn_is_the_top_layer() {
        // Cell (0,1) binds warp over weft, but off the warp band only the
        // weft is present, so the weft is the visible layer there.
        let map = test_map(Pattern::Plain, 0.5);
        let sp = map.eval(0.11, 0.05);
        assert!(!sp.gap);
        assert_eq!(sp.layers[0].kind, YarnKind::Weft);
        let under = map.eval(0.15, 0.05);
        assert_eq!(under.layers[0].kind, YarnKind::Warp);
    }

    #[test]
    fn normals_and_tangents_are_orthonormal() {
        let map = test_map(Pattern::Satin, 0.9);
        for k in 0..200 {
            let u = (k as f64 * 0.7131).rem_euclid(1.0);
            let v = (k as f64 * 0.3517).rem_euclid(1.0);
            let sp = map.eval(u, v);
            if sp.gap {
                continue;
            }
            for layer in sp.layers {
                assert_relative_eq!(layer.normal.length(), 1.0, epsilon = 1e-9);
                assert_relative_eq!(layer.tangent.length(), 1.0, epsilon = 1e-9);
                assert!(layer.normal.dot(layer.tangent).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn twist_rotates_the_fiber_in_the_tangent_plane() {
        let twist = 30f64.to_radians();
        let weft = YarnGeometry { density: 10.0, xi: 1.0, beta: 1.0, twist };
        let warp = YarnGeometry { density: 10.0, xi: 1.0, beta: 1.0, twist: 0.0 };
        let map = WeaveMap::new(Pattern::Plain, weft, warp, 0.0, 1.0, 1.0);
        let plainmap = test_map(Pattern::Plain, 1.0);
        let (a, b) = (map.eval(0.037, 0.053), plainmap.eval(0.037, 0.053));
        let (la, lb) = (a.layers[0], b.layers[0]);
        assert!(la.normal.dot(la.tangent).abs() < 1e-9);
        assert_relative_eq!(la.tangent.dot(lb.tangent), twist.cos(), epsilon = 1e-9);
    }

    fn weft_of(sp: &SurfacePoint) -> SurfaceLayer {
        *sp.layers.iter().find(|l| l.kind == YarnKind::Weft).unwrap()
    }

    #[test]
    fn normals_are_continuous_along_a_yarn() {
        let map = test_map(Pattern::Twill, 1.0);
        let v = 0.05; // centerline of weft row 0
        let step = 1e-4;
        let mut prev = weft_of(&map.eval(0.0, v)).normal;
        for k in 1..2000 {
            let n = weft_of(&map.eval(k as f64 * step, v)).normal;
            let dtheta = tilt_angle(prev, n);
            assert!(dtheta < 0.02, "normal jump {dtheta} at step {k}");
            prev = n;
        }
    }

    #[test]
    fn full_repeat_translation_is_invisible() {
        let map = test_map(Pattern::Satin, 0.8);
        let (du, dv) = repeat_uv(&map);
        for (u, v) in [(0.123, 0.271), (0.02, 0.03), (0.333, 0.47)] {
            let a = map.eval(u, v);
            let b = map.eval(u + du, v + dv);
            assert_eq!(a.gap, b.gap);
            if !a.gap {
                assert_eq!(a.layers[0].kind, b.layers[0].kind);
                assert!(tilt_angle(a.layers[0].normal, b.layers[0].normal) < 1e-9);
                assert_relative_eq!(a.layers[0].mu, b.layers[0].mu, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn noise_jitters_per_crossing_deterministically() {
        let weft = YarnGeometry { density: 10.0, xi: 1.0, beta: 1.0, twist: 0.0 };
        let warp = weft;
        let a = WeaveMap::new(Pattern::Plain, weft, warp, 0.2, 1.0, 1.0);
        let b = WeaveMap::new(Pattern::Plain, weft, warp, 0.2, 1.0, 1.0);
        let pa = a.eval(0.041, 0.052);
        let pb = b.eval(0.041, 0.052);
        assert_eq!(pa.layers[0].albedo_jitter, pb.layers[0].albedo_jitter);
        assert!((pa.layers[0].albedo_jitter - 1.0).abs() <= 0.2 + 1e-12);
        // different crossings get different draws
        let pc = a.eval(0.141, 0.052);
        assert!(pa.layers[0].albedo_jitter != pc.layers[0].albedo_jitter);
    }
}
