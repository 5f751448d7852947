//! End-to-end trials, Monte-Carlo sweeps, CSV output and reconstruction
//! of calibrated images.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extraction::{
    auto_blur, extract_isophote, gaussian_smooth, normalize_bp, select_primary_isophote, IsophotePolyline,
    RegionOfInterest,
};
use crate::geometry::{Conic, Intrinsics, Point, Vec3};
use crate::image::ScalarImage;
use crate::reconstruction::{backproject_circle, fit_ellipse, normalize_to_camera, score, FitDiagnostics, NormalPair, ScoreMode};
use crate::simulator::{simulate, substream, GroundTruth, SimParams, SimRng};

/// Trials per swept value when nothing else is requested.
pub const DEFAULT_TRIALS: usize = 1000;
/// Trials per swept value in fast mode.
pub const FAST_TRIALS: usize = 100;
/// Roughness used by the light-offset sweep.
pub const EPSILON_SWEEP_ROUGHNESS: f64 = 100.0;

/// Parameter varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    /// Noise std as a fraction of the intensity range.
    Sigma,
    /// Slant, degrees.
    Theta,
    Roughness,
    Isovalue,
    /// Light offset, mm.
    Epsilon,
}

impl SweepParam {
    pub const ALL: [SweepParam; 5] =
        [SweepParam::Sigma, SweepParam::Theta, SweepParam::Roughness, SweepParam::Isovalue, SweepParam::Epsilon];

    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Sigma => "sigma",
            SweepParam::Theta => "theta",
            SweepParam::Roughness => "roughness",
            SweepParam::Isovalue => "isovalue",
            SweepParam::Epsilon => "epsilon",
        }
    }

    pub fn default_values(self) -> Vec<f64> {
        match self {
            SweepParam::Sigma => vec![0.0, 0.025, 0.05, 0.075, 0.10],
            SweepParam::Theta => vec![0.0, 15.0, 30.0, 45.0, 58.0, 70.0, 80.0],
            SweepParam::Roughness => vec![30.0, 60.0, 90.0, 120.0],
            SweepParam::Isovalue => vec![0.02, 0.1, 0.2, 0.4, 0.6, 0.8],
            SweepParam::Epsilon => vec![0.0, 100.0, 200.0, 400.0, 800.0],
        }
    }

    /// Defaults with the adjustments this sweep needs.
    pub fn base_params(self) -> SimParams {
        let mut p = SimParams::default();
        if self == SweepParam::Epsilon {
            p.roughness = EPSILON_SWEEP_ROUGHNESS;
        }
        p
    }

    pub fn apply(self, params: &mut SimParams, value: f64) {
        match self {
            SweepParam::Sigma => params.noise = value,
            SweepParam::Theta => params.slant = value.to_radians(),
            SweepParam::Roughness => params.roughness = value,
            SweepParam::Isovalue => params.isovalue = value,
            SweepParam::Epsilon => params.light_offset = value,
        }
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SweepParam::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown sweep parameter {s:?}")))
    }
}

/// Processing choices shared by trials and image reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineOptions {
    /// Gaussian pre-smoothing std, pixels; `None` picks it from the
    /// estimated image noise.
    pub blur: Option<f64>,
    pub score_mode: ScoreMode,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self { blur: None, score_mode: ScoreMode::Min }
    }
}

/// One Monte-Carlo experiment: a parameter, its values and the trial count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub values: Vec<f64>,
    pub trials: usize,
    pub base: SimParams,
    pub seed: u64,
    pub options: PipelineOptions,
    /// Worker threads; 0 lets the pool decide.
    pub threads: usize,
}

impl SweepSpec {
    /// Default grid and base parameters for `param`.
    pub fn new(param: SweepParam, trials: usize, seed: u64) -> Self {
        Self {
            param,
            values: param.default_values(),
            trials,
            base: param.base_params(),
            seed,
            options: PipelineOptions::default(),
            threads: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidParameter("trials must be at least 1".into()));
        }
        if self.values.is_empty() {
            return Err(Error::InvalidParameter("value list is empty".into()));
        }
        for &v in &self.values {
            self.params_for(v)?;
        }
        Ok(())
    }

    /// Base parameters with the swept value substituted.
    pub fn params_for(&self, value: f64) -> Result<SimParams> {
        if !value.is_finite() {
            return Err(Error::InvalidParameter(format!("{} value {value} is not finite", self.param)));
        }
        let mut p = self.base;
        self.param.apply(&mut p, value);
        p.validate()
            .map_err(|e| Error::InvalidParameter(format!("{} = {value}: {e}", self.param)))?;
        Ok(p)
    }
}

/// Outcome of one trial. Exactly one of `error_deg` and `reason` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub value: f64,
    pub trial: usize,
    pub error_deg: Option<f64>,
    pub diagnostics: Option<FitDiagnostics>,
    pub normals: Option<NormalPair>,
    pub reason: Option<String>,
}

impl TrialRecord {
    pub fn success(&self) -> bool {
        self.error_deg.is_some()
    }

    fn failed(value: f64, trial: usize, e: &Error) -> Self {
        Self { value, trial, error_deg: None, diagnostics: None, normals: None, reason: Some(e.reason().to_string()) }
    }
}

/// Statistics of the successful trials at one swept value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub value: f64,
    pub mean: f64,
    /// Sample standard deviation.
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub n_success: usize,
    pub n_fail: usize,
}

impl SummaryRow {
    pub fn from_records(value: f64, records: &[TrialRecord]) -> Self {
        let errs: Vec<f64> = records.iter().filter_map(|r| r.error_deg).collect();
        let n = errs.len();
        let n_fail = records.len() - n;
        if n == 0 {
            return Self { value, mean: f64::NAN, std: f64::NAN, min: f64::NAN, max: f64::NAN, n_success: 0, n_fail };
        }
        let mean = errs.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self {
            value,
            mean,
            std,
            min: errs.iter().copied().fold(f64::INFINITY, f64::min),
            max: errs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            n_success: n,
            n_fail,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub param: SweepParam,
    pub records: Vec<TrialRecord>,
    pub summary: Vec<SummaryRow>,
}

/// Everything recovered from one specularity.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub isovalue: f64,
    pub bp: Point,
    pub polyline: IsophotePolyline,
    /// Fitted ellipse in pixel coordinates.
    pub conic: Conic,
    pub diagnostics: FitDiagnostics,
    pub normals: NormalPair,
    pub warnings: Vec<String>,
}

/// Isophote extraction, ellipse fit and backprojection inside `roi` of an
/// already smoothed image.
pub fn reconstruct_region(
    smoothed: &ScalarImage,
    roi: &RegionOfInterest,
    t: f64,
    k: &Intrinsics,
) -> Result<Reconstruction> {
    k.validate()?;
    roi.validate(smoothed)?;
    if !(t > 0.0) {
        return Err(Error::IsovalueOutOfDomain(t));
    }
    if t >= 1.0 {
        return Err(Error::EmptyIsophote);
    }
    let norm = normalize_bp(smoothed, roi)?;
    let extraction = extract_isophote(&norm.image, roi, t)?;
    if extraction.polylines.is_empty() {
        return Err(if extraction.discarded_short > 0 { Error::SelectionFailed } else { Error::EmptyIsophote });
    }
    let selection = select_primary_isophote(&extraction.polylines, Some(&norm.bp))?;
    let (conic, diagnostics) = fit_ellipse(&selection.polyline.points)?;
    let normals = backproject_circle(&normalize_to_camera(&conic, k))?;
    let mut warnings = Vec::new();
    if norm.bp_on_boundary {
        warnings.push("bp-on-boundary".to_string());
    }
    if selection.clipped {
        warnings.push("clipped-isophote".to_string());
    }
    if norm.saturated {
        warnings.push("saturated".to_string());
    }
    Ok(Reconstruction { isovalue: t, bp: norm.bp, polyline: selection.polyline, conic, diagnostics, normals, warnings })
}

/// Detailed result of a single simulated trial.
#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub record: TrialRecord,
    pub truth: GroundTruth,
    pub light: Vec3,
    pub reconstruction: Option<Reconstruction>,
}

/// Simulate, reconstruct and score one acquisition. Pipeline failures end
/// up in the record; only invalid parameters are returned as errors.
pub fn run_trial_detailed(params: &SimParams, rng: &mut SimRng, options: &PipelineOptions) -> Result<TrialOutcome> {
    let sim = simulate(params, rng)?;
    let truth_normal = sim.truth.normal_vec();
    let blur = options.blur.unwrap_or_else(|| auto_blur(&sim.image));
    let result = gaussian_smooth(&sim.image, blur)
        .and_then(|smoothed| reconstruct_region(&smoothed, &RegionOfInterest::full(&smoothed), params.isovalue, &sim.truth.intrinsics));
    let record = match &result {
        Ok(rec) => TrialRecord {
            value: 0.0,
            trial: 0,
            error_deg: Some(score(&rec.normals, &truth_normal, options.score_mode)),
            diagnostics: Some(rec.diagnostics),
            normals: Some(rec.normals),
            reason: None,
        },
        Err(e) => TrialRecord::failed(0.0, 0, e),
    };
    Ok(TrialOutcome { record, truth: sim.truth, light: sim.light, reconstruction: result.ok() })
}

/// One end-to-end trial; never fails.
pub fn run_trial(params: &SimParams, rng: &mut SimRng, options: &PipelineOptions) -> TrialRecord {
    match run_trial_detailed(params, rng, options) {
        Ok(outcome) => outcome.record,
        Err(e) => TrialRecord::failed(0.0, 0, &e),
    }
}

/// Runs every trial of the sweep. Trial `i` at value `v` draws from
/// `substream(seed, v.to_bits(), i)`, so records do not depend on the
/// order of the value list or on scheduling.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let jobs: Vec<(usize, usize)> =
        (0..spec.values.len()).flat_map(|j| (0..spec.trials).map(move |i| (j, i))).collect();
    let job = |&(j, i): &(usize, usize)| {
        let value = spec.values[j];
        let params = spec.params_for(value).expect("validated above");
        let mut rng = substream(spec.seed, value.to_bits(), i as u64);
        TrialRecord { value, trial: i, ..run_trial(&params, &mut rng, &spec.options) }
    };
    let records = run_jobs(&jobs, spec.threads, job)?;
    let summary = spec
        .values
        .iter()
        .enumerate()
        .map(|(j, &v)| SummaryRow::from_records(v, &records[j * spec.trials..(j + 1) * spec.trials]))
        .collect();
    Ok(SweepResult { param: spec.param, records, summary })
}

#[cfg(feature = "parallel")]
fn run_jobs<F>(jobs: &[(usize, usize)], threads: usize, job: F) -> Result<Vec<TrialRecord>>
where
    F: Fn(&(usize, usize)) -> TrialRecord + Sync,
{
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    Ok(pool.install(|| jobs.par_iter().map(&job).collect()))
}

#[cfg(not(feature = "parallel"))]
fn run_jobs<F>(jobs: &[(usize, usize)], _threads: usize, job: F) -> Result<Vec<TrialRecord>>
where
    F: Fn(&(usize, usize)) -> TrialRecord,
{
    Ok(jobs.iter().map(job).collect())
}

/// `x` rounded to 9 significant digits, shortest form; empty for NaN.
pub fn format_sig9(x: f64) -> String {
    if x.is_nan() {
        return String::new();
    }
    let rounded: f64 = format!("{x:.8e}").parse().expect("formatted float parses");
    format!("{rounded}")
}

/// Companion summary path: `runs.csv` → `runs_summary.csv`.
pub fn summary_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}_summary.csv"))
}

fn csv_writer<W: std::io::Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

/// Per-trial rows.
pub fn write_records_csv<W: std::io::Write>(result: &SweepResult, w: W) -> Result<()> {
    let mut wr = csv_writer(w);
    wr.write_record(["swept_param", "value", "trial", "error_deg", "success", "reason"])?;
    for r in &result.records {
        wr.write_record([
            result.param.name().to_string(),
            format_sig9(r.value),
            r.trial.to_string(),
            r.error_deg.map(format_sig9).unwrap_or_default(),
            r.success().to_string(),
            r.reason.clone().unwrap_or_default(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

/// Per-value statistics rows.
pub fn write_summary_csv<W: std::io::Write>(result: &SweepResult, w: W) -> Result<()> {
    let mut wr = csv_writer(w);
    wr.write_record(["value", "mean", "std", "min", "max", "n_fail"])?;
    for s in &result.summary {
        wr.write_record([
            format_sig9(s.value),
            format_sig9(s.mean),
            format_sig9(s.std),
            format_sig9(s.min),
            format_sig9(s.max),
            s.n_fail.to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

/// Writes `path` and its companion summary; returns the summary path.
pub fn emit_sweep_csv(result: &SweepResult, path: &Path) -> Result<PathBuf> {
    if result.records.is_empty() {
        return Err(Error::InvalidParameter("no records to write".into()));
    }
    write_records_csv(result, std::io::BufWriter::new(std::fs::File::create(path)?))?;
    let summary = summary_path(path);
    write_summary_csv(result, std::io::BufWriter::new(std::fs::File::create(&summary)?))?;
    Ok(summary)
}

/// JSON record of one reconstructed specularity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionReport {
    pub roi: RegionOfInterest,
    #[serde(flatten)]
    pub outcome: RegionOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum RegionOutcome {
    Ok {
        isovalue: f64,
        /// `[a, b, c, d, e, f]` of `ax² + bxy + cy² + dx + ey + f = 0`, pixels.
        conic: [f64; 6],
        diagnostics: FitDiagnostics,
        n_plus: [f64; 3],
        n_minus: [f64; 3],
        intrinsics: Intrinsics,
        bp: [f64; 2],
        warnings: Vec<String>,
    },
    Failed {
        reason: String,
        message: String,
    },
}

impl RegionReport {
    pub fn new(roi: RegionOfInterest, result: &Result<Reconstruction>, k: &Intrinsics) -> Self {
        let outcome = match result {
            Ok(r) => RegionOutcome::Ok {
                isovalue: r.isovalue,
                conic: r.conic.coeffs(),
                diagnostics: r.diagnostics,
                n_plus: r.normals.n_plus.into_inner().into(),
                n_minus: r.normals.n_minus.into_inner().into(),
                intrinsics: *k,
                bp: [r.bp.x, r.bp.y],
                warnings: r.warnings.clone(),
            },
            Err(e) => RegionOutcome::Failed { reason: e.reason().to_string(), message: e.to_string() },
        };
        Self { roi, outcome }
    }
}

/// Reconstructs each region of a calibrated image independently.
pub fn reconstruct_image(
    img: &ScalarImage,
    k: &Intrinsics,
    rois: &[RegionOfInterest],
    t: f64,
    blur: Option<f64>,
) -> Result<Vec<(RegionOfInterest, Result<Reconstruction>)>> {
    k.validate()?;
    let smoothed = gaussian_smooth(img, blur.unwrap_or_else(|| auto_blur(img)))?;
    Ok(rois.iter().map(|roi| (*roi, reconstruct_region(&smoothed, roi, t, k))).collect())
}
