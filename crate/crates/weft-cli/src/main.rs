//! Command-line frontend: forward capture rendering, inverse fitting, the
//! slab reference walker, dataset generation, and quick self-checks.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 configuration error.

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use weft_core::fit::{fit_pipeline, render_params, FitConfig, ImagePair};
use weft_core::image::RadianceImage;
use weft_core::math::v3;
use weft_core::microflake::Fiber;
use weft_core::oracle::{fit_lobe, walk_slab, Hemisphere, LobeModel, SlabConfig, WalkConfig};
use weft_core::render::CaptureScene;
use weft_core::{FabricParams, MultiShadowing, Pattern, Rgb, WeftError};

#[derive(Parser)]
#[command(name = "weft", version, about = "Woven-fabric BSDF toolkit")]
struct Cli {
    /// Worker threads (default: all cores). Outputs are identical for any value.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render the reflection/transmission capture pair for a parameter file.
    Render(RenderArgs),
    /// Recover fabric parameters from a capture pair.
    Fit(FitArgs),
    /// Run the brute-force slab reference and export binned exit lobes.
    Oracle(OracleArgs),
    /// Sample parameter sets per weave pattern and render a labelled dataset.
    GenDataset(GenDatasetArgs),
    /// Run fast internal consistency checks.
    Validate(ValidateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ShadowingArg {
    Transmit,
    Reflect,
}

impl From<ShadowingArg> for MultiShadowing {
    fn from(s: ShadowingArg) -> MultiShadowing {
        match s {
            ShadowingArg::Transmit => MultiShadowing::TransmitProfile,
            ShadowingArg::Reflect => MultiShadowing::ReflectProfile,
        }
    }
}

#[derive(Args)]
struct RenderArgs {
    /// Fabric parameter JSON.
    #[arg(long)]
    params: PathBuf,
    /// Capture scene JSON (defaults are used when omitted).
    #[arg(long)]
    scene: Option<PathBuf>,
    /// Output path prefix; writes <prefix>_reflect.pfm and <prefix>_transmit.pfm.
    #[arg(long, default_value = "capture")]
    out_prefix: PathBuf,
    /// Also write tonemapped PNG previews.
    #[arg(long)]
    png: bool,
    /// Force 2×2 supersampling regardless of the scene file.
    #[arg(long)]
    supersample: bool,
    /// Shadowing profile of the multiple-scattering lobe.
    #[arg(long, value_enum, default_value = "transmit")]
    multi_shadowing: ShadowingArg,
}

#[derive(Args)]
struct FitArgs {
    /// Target reflection image (PFM).
    #[arg(long)]
    reflect: PathBuf,
    /// Target transmission image (PFM).
    #[arg(long)]
    transmit: PathBuf,
    #[arg(long)]
    scene: Option<PathBuf>,
    /// Recovered parameter JSON destination.
    #[arg(long)]
    out: PathBuf,
    /// Optional JSON report (loss trace, discrete moves).
    #[arg(long)]
    report: Option<PathBuf>,
    /// Multi-start draws before descent.
    #[arg(long, default_value_t = 200)]
    starts: usize,
    #[arg(long, default_value_t = 300)]
    iters: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "transmit")]
    multi_shadowing: ShadowingArg,
}

#[derive(Args)]
struct OracleArgs {
    /// Fiber roughness in (0, 1].
    #[arg(long)]
    alpha: f64,
    /// Slab optical thickness.
    #[arg(long)]
    thickness: f64,
    /// Flake albedo, scalar or r,g,b.
    #[arg(long, default_value = "1.0")]
    albedo: String,
    /// Fiber axis, x,y,z (normalized internally).
    #[arg(long, default_value = "1,0,0")]
    tangent: String,
    /// Incidence polar angle from the slab normal, degrees.
    #[arg(long, default_value_t = 0.0)]
    incidence_deg: f64,
    #[arg(long, default_value_t = 1_000_000)]
    paths: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Bounce count from which paths land in the multiple-scattering table.
    #[arg(long, default_value_t = 2)]
    min_multi: u32,
    /// Writes <prefix>_single.csv and <prefix>_multi.csv.
    #[arg(long, default_value = "lobe")]
    out_prefix: PathBuf,
    /// Also fit analytic lobes against the tables and report errors.
    #[arg(long)]
    fit: bool,
}

#[derive(Args)]
struct GenDatasetArgs {
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
    /// Parameter draws per weave pattern.
    #[arg(long, default_value_t = 2)]
    per_pattern: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    scene: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "transmit")]
    multi_shadowing: ShadowingArg,
}

#[derive(Args)]
struct ValidateArgs {
    /// Skip the slower Monte Carlo check.
    #[arg(long)]
    fast: bool,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Runtime(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Runtime(m) => m,
        }
    }
}

type CliResult = Result<(), Failure>;

fn config_err(msg: impl Into<String>) -> Failure {
    Failure::Config(msg.into())
}

fn runtime_err(msg: impl Into<String>) -> Failure {
    Failure::Runtime(msg.into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        // ignore the error if a pool already exists (tests call main twice)
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let result = match cli.command {
        Command::Render(args) => run_render(args),
        Command::Fit(args) => run_fit(args),
        Command::Oracle(args) => run_oracle(args),
        Command::GenDataset(args) => run_gen_dataset(args),
        Command::Validate(args) => run_validate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn load_params(path: &Path) -> Result<FabricParams, Failure> {
    let file = File::open(path)
        .map_err(|e| config_err(format!("cannot open parameter file {}: {e}", path.display())))?;
    let params: FabricParams = serde_json::from_reader(BufReader::new(file))
        .map_err(|e| config_err(format!("bad parameter file {}: {e}", path.display())))?;
    params
        .validate()
        .map_err(|e| config_err(format!("invalid parameters in {}: {e}", path.display())))?;
    Ok(params)
}

fn load_scene(path: Option<&Path>) -> Result<CaptureScene, Failure> {
    let scene = match path {
        None => CaptureScene::default(),
        Some(p) => {
            let file = File::open(p)
                .map_err(|e| config_err(format!("cannot open scene file {}: {e}", p.display())))?;
            serde_json::from_reader(BufReader::new(file))
                .map_err(|e| config_err(format!("bad scene file {}: {e}", p.display())))?
        }
    };
    scene.validate().map_err(|e| config_err(format!("invalid scene: {e}")))?;
    Ok(scene)
}

fn load_pfm(path: &Path) -> Result<RadianceImage, Failure> {
    weft_core::image::read_pfm(path)
        .map_err(|e| config_err(format!("cannot read PFM {}: {e}", path.display())))
}

fn write_io(e: std::io::Error, path: &Path) -> Failure {
    runtime_err(format!("cannot write {}: {e}", path.display()))
}

fn save_pfm(img: &RadianceImage, path: &Path) -> CliResult {
    weft_core::image::write_pfm(img, path)
        .map_err(|e| runtime_err(format!("{}: {e}", path.display())))
}

fn save_json<T: serde::Serialize>(value: &T, path: &Path) -> CliResult {
    let file = File::create(path).map_err(|e| write_io(e, path))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)
        .map_err(|e| runtime_err(format!("{}: {e}", path.display())))?;
    w.write_all(b"\n").map_err(|e| write_io(e, path))?;
    Ok(())
}

fn echo_config(command: &str, seed: Option<u64>, details: serde_json::Value) {
    let mut obj = serde_json::json!({ "command": command, "seed": seed });
    if let (Some(o), Some(d)) = (obj.as_object_mut(), details.as_object()) {
        for (k, v) in d {
            o.insert(k.clone(), v.clone());
        }
    }
    println!("{}", serde_json::to_string_pretty(&obj).expect("config echo"));
}

fn scene_json(scene: &CaptureScene) -> serde_json::Value {
    serde_json::to_value(scene).expect("scene echo")
}

fn run_render(args: RenderArgs) -> CliResult {
    let params = load_params(&args.params)?;
    let mut scene = load_scene(args.scene.as_deref())?;
    if args.supersample {
        scene.supersample = true;
    }
    let shadowing: MultiShadowing = args.multi_shadowing.into();
    echo_config(
        "render",
        None,
        serde_json::json!({
            "params_file": args.params.display().to_string(),
            "scene": scene_json(&scene),
            "params": serde_json::to_value(&params).expect("params echo"),
        }),
    );
    let pair = render_params(&scene, &params, shadowing);
    for (img, label) in [(&pair.reflect, "reflect"), (&pair.transmit, "transmit")] {
        let pfm = suffixed(&args.out_prefix, label, "pfm");
        save_pfm(img, &pfm)?;
        println!("wrote {}", pfm.display());
        if args.png {
            let png = suffixed(&args.out_prefix, label, "png");
            weft_core::image::write_png(img, &png)
                .map_err(|e| runtime_err(format!("{}: {e}", png.display())))?;
            println!("wrote {}", png.display());
        }
    }
    Ok(())
}

fn suffixed(prefix: &Path, label: &str, ext: &str) -> PathBuf {
    let stem = prefix.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    prefix.with_file_name(format!("{stem}_{label}.{ext}"))
}

fn run_fit(args: FitArgs) -> CliResult {
    let target = ImagePair { reflect: load_pfm(&args.reflect)?, transmit: load_pfm(&args.transmit)? };
    if target.reflect.width != target.transmit.width || target.reflect.height != target.transmit.height {
        return Err(config_err("target images must share dimensions"));
    }
    let mut scene = load_scene(args.scene.as_deref())?;
    if scene.resolution != target.reflect.width {
        scene.resolution = target.reflect.width;
    }
    if args.starts == 0 {
        return Err(config_err("--starts must be at least 1"));
    }
    let cfg = FitConfig {
        iters: args.iters,
        seed: args.seed,
        shadowing: args.multi_shadowing.into(),
        ..Default::default()
    };
    echo_config(
        "fit",
        Some(args.seed),
        serde_json::json!({
            "reflect": args.reflect.display().to_string(),
            "transmit": args.transmit.display().to_string(),
            "starts": args.starts,
            "iters": args.iters,
            "scene": scene_json(&scene),
        }),
    );
    let report = fit_pipeline(&target, &scene, args.starts, &cfg).map_err(|e| match e {
        WeftError::FitDiverged(m) => runtime_err(format!("fit diverged: {m}")),
        other => runtime_err(other.to_string()),
    })?;
    save_json(&report.best_params, &args.out)?;
    println!("wrote {}", args.out.display());
    if let Some(report_path) = &args.report {
        let accepted = report.discrete_moves.iter().filter(|m| m.accepted).count();
        let summary = serde_json::json!({
            "initial_loss": report.initial_loss,
            "best_loss": report.best_loss,
            "iterations": report.trace.len(),
            "loss_trace": report.trace,
            "discrete_moves_tried": report.discrete_moves.len(),
            "discrete_moves_accepted": accepted,
            "pattern": report.best_params.pattern.name(),
        });
        save_json(&summary, report_path)?;
        println!("wrote {}", report_path.display());
    }
    println!(
        "loss {:.6e} -> {:.6e} over {} iterations",
        report.initial_loss,
        report.best_loss,
        report.trace.len()
    );
    Ok(())
}

fn parse_vec3(s: &str, what: &str) -> Result<weft_core::Vec3, Failure> {
    let parts: Vec<f64> = s.split(',').map(str::trim).filter_map(|p| p.parse().ok()).collect();
    if parts.len() != 3 {
        return Err(config_err(format!("{what} must be three comma-separated numbers, got '{s}'")));
    }
    Ok(v3(parts[0], parts[1], parts[2]))
}

fn parse_albedo(s: &str) -> Result<Rgb, Failure> {
    let parts: Vec<f64> = s.split(',').map(str::trim).filter_map(|p| p.parse().ok()).collect();
    match parts.as_slice() {
        [v] => Ok(Rgb::splat(*v)),
        [r, g, b] => Ok(Rgb { r: *r, g: *g, b: *b }),
        _ => Err(config_err(format!("albedo must be one or three numbers, got '{s}'"))),
    }
}

fn run_oracle(args: OracleArgs) -> CliResult {
    if !(args.alpha > 0.0 && args.alpha <= 1.0) {
        return Err(config_err(format!("alpha {} outside (0, 1]", args.alpha)));
    }
    if args.thickness < 0.0 || !args.thickness.is_finite() {
        return Err(config_err(format!("thickness {} must be non-negative", args.thickness)));
    }
    if !(0.0..90.0).contains(&args.incidence_deg) {
        return Err(config_err(format!("incidence {}° outside [0, 90)", args.incidence_deg)));
    }
    let albedo = parse_albedo(&args.albedo)?;
    let tangent = parse_vec3(&args.tangent, "tangent")?
        .try_normalized()
        .ok_or_else(|| config_err("tangent must be a nonzero vector"))?;
    let slab = SlabConfig { fiber: Fiber::new(tangent, args.alpha), thickness: args.thickness, albedo };
    let theta = args.incidence_deg.to_radians();
    // incidence tilts toward +x in the slab frame
    let wi = v3(theta.sin(), 0.0, theta.cos());
    let cfg = WalkConfig {
        n_paths: args.paths,
        seed: args.seed,
        min_multi_bounces: args.min_multi,
        ..Default::default()
    };
    echo_config(
        "oracle",
        Some(args.seed),
        serde_json::json!({
            "alpha": args.alpha,
            "thickness": args.thickness,
            "albedo": albedo.to_array(),
            "tangent": [tangent.x, tangent.y, tangent.z],
            "incidence_deg": args.incidence_deg,
            "paths": args.paths,
            "min_multi_bounces": args.min_multi,
        }),
    );
    let result = walk_slab(&slab, wi, &cfg);
    for (table, label) in [(&result.single, "single"), (&result.multi, "multi")] {
        let path = suffixed(&args.out_prefix, label, "csv");
        let file = File::create(&path).map_err(|e| write_io(e, &path))?;
        table
            .write_csv(BufWriter::new(file))
            .map_err(|e| runtime_err(format!("{}: {e}", path.display())))?;
        println!("wrote {}", path.display());
    }
    println!("uncollided fraction {:.6}", result.delta_fraction);
    let exit = result.scattered_exit;
    println!("scattered exit energy ({:.6}, {:.6}, {:.6})", exit.r, exit.g, exit.b);
    println!("multi-bounce azimuthal spread {:.4}", result.multi.azimuthal_relative_std(36));
    if args.fit {
        for hemisphere in [Hemisphere::Reflection, Hemisphere::Transmission] {
            for model in [LobeModel::SingleForm, LobeModel::AlignedForm] {
                let fit = fit_lobe(&result.multi, wi, tangent, model, hemisphere);
                println!(
                    "multi fit {:?} {:?}: rel_l2 {:.4} (k {:.3}, alpha {:.3}, thickness {:.3})",
                    hemisphere, model, fit.rel_l2, fit.k, fit.alpha, fit.thickness
                );
            }
        }
    }
    Ok(())
}

fn run_gen_dataset(args: GenDatasetArgs) -> CliResult {
    use rand::SeedableRng;
    if args.per_pattern == 0 {
        return Err(config_err("--per-pattern must be at least 1"));
    }
    let scene = load_scene(args.scene.as_deref())?;
    std::fs::create_dir_all(&args.out).map_err(|e| write_io(e, &args.out))?;
    let shadowing: MultiShadowing = args.multi_shadowing.into();
    echo_config(
        "gen-dataset",
        Some(args.seed),
        serde_json::json!({
            "out": args.out.display().to_string(),
            "per_pattern": args.per_pattern,
            "scene": scene_json(&scene),
        }),
    );
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(args.seed);
    let manifest_path = args.out.join("manifest.csv");
    let manifest_file = File::create(&manifest_path).map_err(|e| write_io(e, &manifest_path))?;
    let mut manifest = csv::Writer::from_writer(BufWriter::new(manifest_file));
    manifest
        .write_record(["stem", "pattern", "index", "density_weft", "density_warp"])
        .map_err(|e| runtime_err(format!("manifest: {e}")))?;
    for pattern in weft_core::weave::ALL_PATTERNS {
        for k in 0..args.per_pattern {
            let params = weft_core::fabric::sample_params_for_pattern(&mut rng, pattern);
            let stem = format!("{}_{k}", pattern.name());
            let params_path = args.out.join(format!("{stem}_params.json"));
            save_json(&params, &params_path)?;
            let pair = render_params(&scene, &params, shadowing);
            save_pfm(&pair.reflect, &args.out.join(format!("{stem}_reflect.pfm")))?;
            save_pfm(&pair.transmit, &args.out.join(format!("{stem}_transmit.pfm")))?;
            manifest
                .write_record([
                    stem.as_str(),
                    pattern.name(),
                    &k.to_string(),
                    &format!("{:.3}", params.weft.density),
                    &format!("{:.3}", params.warp.density),
                ])
                .map_err(|e| runtime_err(format!("manifest: {e}")))?;
            println!("wrote {}", args.out.join(&stem).display());
        }
    }
    manifest.flush().map_err(|e| write_io(e, &manifest_path))?;
    println!("wrote {}", manifest_path.display());
    Ok(())
}

fn run_validate(args: ValidateArgs) -> CliResult {
    echo_config("validate", None, serde_json::json!({ "fast": args.fast }));
    let mut all_ok = true;
    let mut check = |name: &str, ok: bool, detail: String| {
        println!("{}  {name}  {detail}", if ok { "PASS" } else { "FAIL" });
        all_ok &= ok;
    };

    {
        let fiber = Fiber::new(v3(1.0, 1.0, 0.0).normalized(), 0.5);
        let w = v3(0.2, -0.4, 0.89).normalized();
        let lhs = weft_core::microflake::cosine_weighted_ndf_integral(&fiber, w, 256, 512);
        let sigma = fiber.projected_area(w);
        check(
            "flake-projected-area-normalization",
            (lhs - sigma).abs() < 1e-3,
            format!("∫⟨w·m⟩D = {lhs:.5} vs σ = {sigma:.5}"),
        );
    }
    {
        // reciprocity holds in the flow form f(i→o)·σ(i) = f(o→i)·σ(o)
        let fiber = Fiber::new(v3(0.3, -0.5, 0.8).normalized(), 0.3);
        let a = v3(0.6, 0.2, 0.77).normalized();
        let b = v3(-0.4, 0.5, -0.74).normalized();
        let fwd = fiber.phase(a, b) * fiber.projected_area(a);
        let rev = fiber.phase(b, a) * fiber.projected_area(b);
        check("phase-reciprocity", (fwd - rev).abs() < 1e-12, format!("|Δ| {:.2e}", (fwd - rev).abs()));
    }
    {
        use weft_core::weave::{pattern_grid, tension_profile};
        let grid = pattern_grid(Pattern::Plain);
        let profile = tension_profile(&grid, weft_core::YarnKind::Weft, 0);
        let (at_float, _) = profile.eval(0.5); // centre of the over cell
        let (at_under, _) = profile.eval(1.5);
        let ok = at_float.abs() < 1e-12 && (at_under - 1.0).abs() < 1e-12;
        check("tension-endpoints", ok, format!("float {at_float:.2e}, under {at_under:.5}"));
    }
    {
        let mut scene = CaptureScene::default();
        scene.resolution = 32;
        scene.patch_w_inches = 0.5;
        scene.patch_h_inches = 0.5;
        let mut params = weft_core::fabric::sample_params_for_pattern(
            &mut <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(5),
            Pattern::Twill,
        );
        params.weft.density = 60.0;
        params.warp.density = 60.0;
        let a = render_params(&scene, &params, MultiShadowing::default());
        let b = render_params(&scene, &params, MultiShadowing::default());
        let identical = a.reflect.pixels == b.reflect.pixels && a.transmit.pixels == b.transmit.pixels;
        check("render-determinism", identical, String::new());
        let self_loss = weft_core::fit::texture_stats_loss(&a.reflect, &b.reflect);
        check("loss-self-zero", self_loss == 0.0, format!("loss {self_loss:.2e}"));
    }
    if !args.fast {
        let slab = SlabConfig { fiber: Fiber::new(weft_core::Vec3::X, 0.5), thickness: 50.0, albedo: Rgb::splat(1.0) };
        let res = walk_slab(&slab, weft_core::Vec3::Z, &WalkConfig { n_paths: 50_000, seed: 9, ..Default::default() });
        let total = res.scattered_exit.r;
        check("walk-energy-conservation", (total - 1.0).abs() < 0.03, format!("exit {total:.4}"));
    }

    if all_ok {
        Ok(())
    } else {
        Err(runtime_err("one or more checks failed"))
    }
}
