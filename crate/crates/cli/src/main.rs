use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;
use specnorm::extraction::RegionOfInterest;
use specnorm::geometry::Intrinsics;
use specnorm::harness::{
    emit_sweep_csv, reconstruct_image, run_sweep, run_trial_detailed, PipelineOptions, RegionReport, SweepParam,
    SweepSpec, DEFAULT_TRIALS, FAST_TRIALS,
};
use specnorm::image::{BitDepth, ScalarImage};
use specnorm::overlay::render_overlay;
use specnorm::reconstruction::ScoreMode;
use specnorm::simulator::{simulate, substream, SimParams};

mod config;

use config::Config;

/// Plane normals from specular isophotes: synthetic rendering, Monte-Carlo
/// sweeps and reconstruction of calibrated images.
#[derive(Parser)]
#[command(name = "specnorm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Simulation parameter override, e.g. `--set noise=0 --set slant_deg=30`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Pipeline {
    /// Gaussian smoothing std in pixels; chosen from the image noise when absent.
    #[arg(long)]
    blur: Option<f64>,
    #[arg(long, value_name = "min|oracle-sign")]
    score_mode: Option<ScoreMode>,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic image with its parameter and ground-truth sidecars.
    Render {
        #[command(flatten)]
        common: Common,
        /// Sample depth of the exported image.
        #[arg(long, default_value = "8", value_parser = ["8", "16"])]
        depth: String,
        /// Image file format.
        #[arg(long, default_value = "pgm", value_parser = ["pgm", "png"])]
        format: String,
    },
    /// One simulated acquisition and reconstruction, JSON on stdout.
    Trial {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        pipeline: Pipeline,
        /// Also write the annotated image to `<out>/overlay.png`.
        #[arg(long)]
        overlay: bool,
    },
    /// Monte-Carlo sweep of one parameter, written as CSV.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        pipeline: Pipeline,
        /// sigma, theta (degrees), roughness, isovalue or epsilon (mm).
        #[arg(long)]
        param: Option<SweepParam>,
        /// Comma-separated values; the parameter's default grid when absent.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
        #[arg(long)]
        trials: Option<usize>,
        /// Use 100 trials per value.
        #[arg(long)]
        fast: bool,
        /// Worker threads; 0 uses all cores.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Reconstruct plane normals from specularities in a calibrated image.
    Reconstruct {
        image: PathBuf,
        /// JSON with fx, fy, cx, cy, or a `truth.json` sidecar.
        #[arg(long)]
        intrinsics: PathBuf,
        /// Region `x,y,width,height`; repeat for several. Whole image when absent.
        #[arg(long = "roi")]
        rois: Vec<String>,
        #[arg(long, default_value_t = 0.1)]
        isovalue: f64,
        #[arg(long)]
        blur: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the annotated image to `<out>/overlay.png`.
        #[arg(long)]
        overlay: bool,
    },
    /// Run the analytic invariant checks.
    Selftest {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Render { common, depth, format } => render(common, &depth, &format),
        Command::Trial { common, pipeline, overlay } => trial(common, pipeline, overlay),
        Command::Sweep { common, pipeline, param, values, trials, fast, threads } => {
            sweep(common, pipeline, param, values, trials, fast, threads)
        }
        Command::Reconstruct { image, intrinsics, rois, isovalue, blur, out, overlay } => {
            reconstruct(&image, &intrinsics, &rois, isovalue, blur, out, overlay)
        }
        Command::Selftest { seed } => Ok(selftest(seed)),
    }
}

fn out_dir(out: Option<PathBuf>) -> Result<PathBuf> {
    let dir = out.unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

/// Prints to stdout; a closed pipe (`| head`) is not an error.
fn emit(text: &str) -> Result<()> {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{text}").and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn sim_params(common: &Common, cfg: &Config, base: SimParams) -> Result<SimParams> {
    let mut params = cfg.sim_params(base, &common.sets)?;
    if let Some(seed) = common.seed.or(cfg.seed) {
        params.seed = seed;
    }
    Ok(params)
}

fn options(pipeline: &Pipeline, cfg: &Config) -> PipelineOptions {
    PipelineOptions {
        blur: pipeline.blur.or(cfg.blur),
        score_mode: pipeline.score_mode.or(cfg.score_mode).unwrap_or_default(),
    }
}

fn render(common: Common, depth: &str, format: &str) -> Result<ExitCode> {
    let cfg = Config::load(common.config.as_deref())?;
    let params = sim_params(&common, &cfg, SimParams::default())?;
    let sim = simulate(&params, &mut substream(params.seed, 0, 0))?;
    let dir = out_dir(common.out)?;
    let depth = if depth == "16" { BitDepth::Sixteen } else { BitDepth::Eight };
    let image = dir.join(format!("image.{format}"));
    sim.image.save(&image, depth)?;
    write_json(&dir.join("params.json"), &params)?;
    write_json(&dir.join("truth.json"), &json!({ "light": sim.light.as_slice(), "truth": sim.truth }))?;
    emit(&image.display().to_string())?;
    Ok(ExitCode::SUCCESS)
}

fn trial(common: Common, pipeline: Pipeline, overlay: bool) -> Result<ExitCode> {
    let cfg = Config::load(common.config.as_deref())?;
    let params = sim_params(&common, &cfg, SimParams::default())?;
    let opts = options(&pipeline, &cfg);
    let mut rng = substream(params.seed, 0, 0);
    let outcome = run_trial_detailed(&params, &mut rng, &opts)?;
    let report = outcome
        .reconstruction
        .as_ref()
        .map(|r| RegionReport::new(RegionOfInterest::new(0, 0, params.size, params.size), &Ok(r.clone()), &outcome.truth.intrinsics));
    let doc = json!({
        "params": params,
        "options": opts,
        "light": outcome.light.as_slice(),
        "truth": outcome.truth,
        "record": outcome.record,
        "reconstruction": report,
    });
    emit(&serde_json::to_string_pretty(&doc)?)?;
    if overlay {
        let dir = out_dir(common.out)?;
        // same substream, so the same image
        let sim = simulate(&params, &mut substream(params.seed, 0, 0))?;
        let roi = RegionOfInterest::full(&sim.image);
        render_overlay(&sim.image, [(&roi, outcome.reconstruction.as_ref())])
            .save(dir.join("overlay.png"))
            .context("writing overlay")?;
    }
    Ok(ExitCode::SUCCESS)
}

fn sweep(
    common: Common,
    pipeline: Pipeline,
    param: Option<SweepParam>,
    values: Option<Vec<f64>>,
    trials: Option<usize>,
    fast: bool,
    threads: Option<usize>,
) -> Result<ExitCode> {
    let cfg = Config::load(common.config.as_deref())?;
    let Some(param) = param.or(cfg.sweep.param) else {
        bail!("choose the swept parameter with --param or [sweep] param in the config")
    };
    let trials = match (trials, fast) {
        (Some(n), _) => n,
        (None, true) => FAST_TRIALS,
        (None, false) => cfg.trials.unwrap_or(DEFAULT_TRIALS),
    };
    let mut spec = SweepSpec::new(param, trials, common.seed.or(cfg.seed).unwrap_or(0));
    spec.base = cfg.sim_params(param.base_params(), &common.sets)?;
    if let Some(v) = values.or_else(|| cfg.sweep.values.clone()) {
        spec.values = v;
    }
    spec.options = options(&pipeline, &cfg);
    spec.threads = threads.or(cfg.threads).unwrap_or(0);
    let result = run_sweep(&spec)?;
    let dir = out_dir(common.out)?;
    let path = dir.join(format!("{param}.csv"));
    let summary = emit_sweep_csv(&result, &path)?;
    let mut table = format!("{:>10} {:>10} {:>10} {:>10} {:>10} {:>6}", param.name(), "mean", "std", "min", "max", "fail");
    for s in &result.summary {
        table += &format!("\n{:>10} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>6}", s.value, s.mean, s.std, s.min, s.max, s.n_fail);
    }
    emit(&table)?;
    eprintln!("wrote {} and {}", path.display(), summary.display());
    Ok(ExitCode::SUCCESS)
}

fn parse_roi(s: &str) -> Result<RegionOfInterest> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .with_context(|| format!("ROI {s:?} must be x,y,width,height"))?;
    let [x, y, w, h] = parts[..] else { bail!("ROI {s:?} must be x,y,width,height") };
    Ok(RegionOfInterest::new(x, y, w, h))
}

fn load_intrinsics(path: &Path) -> Result<Intrinsics> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: serde_json::Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let k = value
        .get("truth")
        .and_then(|t| t.get("intrinsics"))
        .or_else(|| value.get("intrinsics"))
        .unwrap_or(&value);
    let k: Intrinsics = serde_json::from_value(k.clone()).context("intrinsics need fx, fy, cx, cy")?;
    k.validate()?;
    Ok(k)
}

fn reconstruct(
    image: &Path,
    intrinsics: &Path,
    rois: &[String],
    isovalue: f64,
    blur: Option<f64>,
    out: Option<PathBuf>,
    overlay: bool,
) -> Result<ExitCode> {
    let img = ScalarImage::load(image).with_context(|| format!("reading {}", image.display()))?;
    let k = load_intrinsics(intrinsics)?;
    let rois = if rois.is_empty() {
        vec![RegionOfInterest::full(&img)]
    } else {
        rois.iter().map(|s| parse_roi(s)).collect::<Result<_>>()?
    };
    let results = reconstruct_image(&img, &k, &rois, isovalue, blur)?;
    let reports: Vec<RegionReport> = results.iter().map(|(roi, r)| RegionReport::new(*roi, r, &k)).collect();
    emit(&serde_json::to_string_pretty(&reports)?)?;
    if out.is_some() || overlay {
        let dir = out_dir(out)?;
        write_json(&dir.join("reconstruction.json"), &reports)?;
        if overlay {
            render_overlay(&img, results.iter().map(|(roi, r)| (roi, r.as_ref().ok())))
                .save(dir.join("overlay.png"))
                .context("writing overlay")?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn selftest(seed: u64) -> ExitCode {
    let checks = specnorm::selftest::run_all(seed);
    for c in &checks {
        println!("{} {:<16} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    if checks.iter().all(|c| c.passed) {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
