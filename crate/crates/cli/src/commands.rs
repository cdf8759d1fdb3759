// SPDX-License-Identifier: MIT OR Apache-2.0

//! Subcommand definitions and their implementations.

use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use var_cpd::bench::{run_setting, BenchResult, Setting};
use var_cpd::dp::DetectionConfig;
use var_cpd::lasso::interval_gram;
use var_cpd::pgl::{refine_with_options, RefineOptions, WindowReport};
use var_cpd::{
    abs_k_error, detect, fit_lasso_var, hausdorff_scaled, model_summary, simulate, ChangePointSet,
    ModelSummary, SimulationConfig,
};

use crate::config::{resolve_config, Overrides};
use crate::error::{CliError, Result};
use crate::input::{load_csv, write_csv};
use crate::SCHEMA_VERSION;

#[derive(Debug, Parser)]
#[command(name = "var-cpd", version, about = "Change point localization for piecewise-stable VAR processes")]
pub struct Cli {
    /// Worker threads; 0 uses every core. Results do not depend on it.
    #[arg(long, global = true, env = "VAR_CPD_THREADS", default_value_t = 0)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one of the standard scenarios to CSV plus a ground-truth JSON file.
    Simulate(SimulateArgs),
    /// Detect change points with the penalized dynamic program.
    Detect(DetectArgs),
    /// Refine preliminary change points with the group Lasso window search.
    Refine(RefineArgs),
    /// Score estimated change points against the truth.
    Evaluate(EvaluateArgs),
    /// Run repeated simulate-detect-refine replications of a scenario.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SettingName {
    I,
    Ii,
    Iii,
}

#[derive(Debug, Args)]
pub struct SettingArgs {
    #[arg(long, value_enum)]
    pub setting: SettingName,
    #[arg(long)]
    pub n: usize,
    /// Dimension; setting i is fixed at 10, the others default to 20.
    #[arg(long)]
    pub p: Option<usize>,
    /// Signal strength, setting ii only.
    #[arg(long)]
    pub rho: Option<f64>,
}

impl SettingArgs {
    pub fn setting(&self) -> Result<Setting> {
        let p = self.p.unwrap_or(match self.setting {
            SettingName::I => 10,
            _ => 20,
        });
        if self.rho.is_some() && self.setting != SettingName::Ii {
            return Err(CliError::Usage("--rho applies to setting ii only".into()));
        }
        Ok(match self.setting {
            SettingName::I if p != 10 => {
                return Err(CliError::Usage("setting i has p = 10".into()));
            }
            SettingName::I => Setting::I { n: self.n },
            SettingName::Ii => Setting::Ii {
                n: self.n,
                p,
                rho: self
                    .rho
                    .ok_or_else(|| CliError::Usage("setting ii needs --rho".into()))?,
            },
            SettingName::Iii => Setting::Iii { n: self.n, p },
        })
    }
}

#[derive(Debug, Args)]
pub struct TuningArgs {
    /// VAR order.
    #[arg(long)]
    pub lag: Option<usize>,
    /// Lasso penalty; default 0.1 sqrt(ln p).
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Per-interval penalty; default 15 ln(n) p.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Group Lasso penalty for refinement; default 0.3 sqrt(ln p).
    #[arg(long)]
    pub zeta: Option<f64>,
    /// Intervals with fewer summands than this have zero loss; default 2(lag+1).
    #[arg(long)]
    pub min_len: Option<usize>,
    /// Candidate boundaries restricted to multiples of this.
    #[arg(long)]
    pub step: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// JSON file with any of the keys lag, lambda, gamma, zeta, min_len,
    /// step, tol, max_iter. Flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl TuningArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            lag: self.lag,
            lambda: self.lambda,
            gamma: self.gamma,
            zeta: self.zeta,
            min_len: self.min_len,
            step: self.step,
            tol: self.tol,
            max_iter: self.max_iter,
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub setting: SettingArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 200)]
    pub burn_in: usize,
    /// Series CSV; stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Ground-truth JSON; defaults to the output path with a .truth.json
    /// extension.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// Series CSV, or - for stdin.
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub tuning: TuningArgs,
    /// Report path; stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RefineArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Preliminary points, e.g. 80,160.
    #[arg(long, value_parser = parse_points, conflicts_with = "from")]
    pub points: Option<Points>,
    /// Detect report to take the preliminary points from.
    #[arg(long)]
    pub from: Option<PathBuf>,
    #[command(flatten)]
    pub tuning: TuningArgs,
    /// Ground-truth JSON; adds per-window errors to the report.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Scan every STRIDE-th split first, then refine around the best.
    #[arg(long, value_name = "STRIDE")]
    pub coarse_then_fine: Option<usize>,
    /// Fit every split from zero instead of warm starting.
    #[arg(long)]
    pub cold: bool,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Detect or refine report; its `points` (or `change_points`) are scored.
    #[arg(long, required_unless_present = "points", conflicts_with = "points")]
    pub estimate: Option<PathBuf>,
    /// Comma-separated points; may be empty.
    #[arg(long, value_parser = parse_points)]
    pub points: Option<Points>,
    /// Ground-truth JSON written by simulate.
    #[arg(long, required_unless_present = "truth_points", conflicts_with = "truth_points")]
    pub truth: Option<PathBuf>,
    #[arg(long, value_parser = parse_points, requires = "n")]
    pub truth_points: Option<Points>,
    /// Series length; required with --truth-points.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub setting: SettingArgs,
    #[arg(long, default_value_t = 20)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub tuning: TuningArgs,
    /// Append the summary row here (header written for a new file); stdout
    /// when omitted.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Full result with every replication.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

/// A comma-separated list of time points; the empty string is the empty list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Points(pub Vec<usize>);

fn parse_points(s: &str) -> std::result::Result<Points, String> {
    if s.trim().is_empty() {
        return Ok(Points(Vec::new()));
    }
    s.split(',')
        .map(|x| x.trim().parse::<usize>().map_err(|e| format!("{x:?}: {e}")))
        .collect::<std::result::Result<_, _>>()
        .map(Points)
}

pub fn run(cli: Cli) -> Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot start thread pool: {e}")))?;
    match cli.command {
        Command::Simulate(a) => simulate_cmd(a),
        Command::Detect(a) => detect_cmd(a),
        Command::Refine(a) => refine_cmd(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::Bench(a) => bench_cmd(a),
    }
}

fn write_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("reports serialize");
    match path {
        Some(p) => fs::write(p, text + "\n").map_err(|e| CliError::io(p, e)),
        None => {
            let mut out = io::stdout().lock();
            writeln!(out, "{text}").map_err(|e| CliError::io("stdout", e))
        }
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Parse {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}

fn point_set(points: Vec<usize>) -> Result<ChangePointSet> {
    Ok(ChangePointSet::new(points)?)
}

/// Ground truth written next to a simulated series.
#[derive(Debug, Serialize)]
pub struct TruthFile {
    pub schema_version: u32,
    pub scenario: Setting,
    pub n: usize,
    pub p: usize,
    pub lag: usize,
    pub seed: u64,
    pub burn_in: usize,
    pub noise_sd: f64,
    pub change_points: Vec<usize>,
    /// Per segment, per lag, row-major `p x p` coefficients.
    pub segments: Vec<Vec<Vec<Vec<f64>>>>,
    pub summary: ModelSummary,
}

/// The part of a truth file that evaluation needs.
#[derive(Debug, Deserialize)]
struct TruthRef {
    n: usize,
    change_points: Vec<usize>,
}

fn simulate_cmd(a: SimulateArgs) -> Result<()> {
    let setting = a.setting.setting()?;
    let model = setting.model()?;
    let config = SimulationConfig {
        seed: a.seed,
        burn_in: a.burn_in,
        ..SimulationConfig::default()
    };
    let series = simulate(&model, &config)?;
    let truth = TruthFile {
        schema_version: SCHEMA_VERSION,
        scenario: setting,
        n: model.n(),
        p: model.p(),
        lag: model.lag(),
        seed: a.seed,
        burn_in: a.burn_in,
        noise_sd: model.noise_sd(),
        change_points: model.change_points().to_vec(),
        segments: model.segments().iter().map(|s| s.to_nested()).collect(),
        summary: model_summary(&model),
    };
    let truth_path = a
        .truth
        .clone()
        .or_else(|| a.output.as_ref().map(|p| p.with_extension("truth.json")));
    match &a.output {
        Some(path) => {
            let f = File::create(path).map_err(|e| CliError::io(path, e))?;
            write_csv(&series, io::BufWriter::new(f))?;
        }
        None => write_csv(&series, io::stdout().lock())?,
    }
    if let Some(path) = truth_path {
        write_json(&truth, Some(&path))?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct SegmentFit {
    /// Closed 1-based range.
    pub start: usize,
    pub end: usize,
    /// Absent when the segment is too short to fit.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<Vec<Vec<f64>>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rss: Option<f64>,
    pub converged: bool,
}

#[derive(Debug, Serialize)]
pub struct Timing {
    pub seconds: f64,
}

#[derive(Debug, Serialize)]
pub struct DetectReport {
    pub schema_version: u32,
    pub command: &'static str,
    pub n: usize,
    pub p: usize,
    pub config: DetectionConfig,
    pub change_points: Vec<usize>,
    pub objective: f64,
    pub segments: Vec<SegmentFit>,
    pub nonconverged_fits: usize,
    pub timing: Timing,
}

fn detect_cmd(a: DetectArgs) -> Result<()> {
    let series = load_csv(&a.input)?;
    let (n, p) = (series.n(), series.p());
    let config = resolve_config(n, p, a.tuning.overrides(), a.tuning.config.as_deref())?.detection;
    let start = Instant::now();
    let det = detect(&series, &config)?;
    let seconds = start.elapsed().as_secs_f64();
    let segments = det
        .partition
        .intervals(n)
        .into_iter()
        .map(|(s, e)| match interval_gram(&series, s - 1, e, config.lag) {
            Ok(g) => {
                let fit = fit_lasso_var(&g, config.lambda, &config.solver)?;
                Ok(SegmentFit {
                    start: s,
                    end: e,
                    coefficients: Some(fit.coeffs.to_nested()),
                    rss: Some(fit.rss),
                    converged: fit.converged,
                })
            }
            Err(_) => Ok(SegmentFit {
                start: s,
                end: e,
                coefficients: None,
                rss: None,
                converged: true,
            }),
        })
        .collect::<Result<Vec<_>>>()?;
    write_json(
        &DetectReport {
            schema_version: SCHEMA_VERSION,
            command: "detect",
            n,
            p,
            config,
            change_points: det.change_points.into_vec(),
            objective: det.partition.objective,
            segments,
            nonconverged_fits: det.nonconverged_fits,
            timing: Timing { seconds },
        },
        a.output.as_deref(),
    )
}

/// Points carried by a detect or refine report.
#[derive(Debug, Deserialize)]
struct PointsRef {
    points: Option<Vec<usize>>,
    change_points: Option<Vec<usize>>,
}

fn points_from_report(path: &Path) -> Result<Vec<usize>> {
    let r: PointsRef = read_json(path)?;
    r.points.or(r.change_points).ok_or_else(|| CliError::Parse {
        path: path.display().to_string(),
        reason: "no `points` or `change_points` field".into(),
    })
}

#[derive(Debug, Serialize)]
pub struct RefineOutput {
    pub schema_version: u32,
    pub command: &'static str,
    pub n: usize,
    pub p: usize,
    pub lag: usize,
    pub zeta: f64,
    pub initial: Vec<usize>,
    pub points: Vec<usize>,
    pub windows: Vec<WindowReport>,
    pub timing: Timing,
}

fn refine_cmd(a: RefineArgs) -> Result<()> {
    let initial = match (&a.points, &a.from) {
        (Some(p), _) => p.0.clone(),
        (None, Some(path)) => points_from_report(path)?,
        (None, None) => return Err(CliError::Usage("refine needs --points or --from".into())),
    };
    let initial = point_set(initial)?;
    let series = load_csv(&a.input)?;
    let resolved = resolve_config(series.n(), series.p(), a.tuning.overrides(), a.tuning.config.as_deref())?;
    let truth = match &a.truth {
        Some(path) => Some(point_set(read_json::<TruthRef>(path)?.change_points)?),
        None => None,
    };
    let options = RefineOptions {
        warm_start: !a.cold,
        coarse_stride: a.coarse_then_fine,
    };
    let lag = resolved.detection.lag;
    let start = Instant::now();
    let report = refine_with_options(
        &series,
        &initial,
        truth.as_ref(),
        lag,
        resolved.zeta,
        &resolved.detection.solver,
        &options,
    )?;
    let seconds = start.elapsed().as_secs_f64();
    write_json(
        &RefineOutput {
            schema_version: SCHEMA_VERSION,
            command: "refine",
            n: series.n(),
            p: series.p(),
            lag,
            zeta: resolved.zeta,
            initial: initial.into_vec(),
            points: report.points.into_vec(),
            windows: report.windows,
            timing: Timing { seconds },
        },
        a.output.as_deref(),
    )
}

#[derive(Debug, Serialize)]
pub struct Evaluation {
    pub schema_version: u32,
    pub command: &'static str,
    pub n: usize,
    pub estimate: Vec<usize>,
    pub truth: Vec<usize>,
    pub hausdorff: f64,
    pub k_error: usize,
}

fn evaluate_cmd(a: EvaluateArgs) -> Result<()> {
    let estimate = match (&a.points, &a.estimate) {
        (Some(p), _) => p.0.clone(),
        (None, Some(path)) => points_from_report(path)?,
        (None, None) => unreachable!("clap requires one of them"),
    };
    let (n, truth) = match (&a.truth, &a.truth_points) {
        (Some(path), _) => {
            let t: TruthRef = read_json(path)?;
            (a.n.unwrap_or(t.n), t.change_points)
        }
        (None, Some(t)) => (a.n.expect("clap requires --n"), t.0.clone()),
        (None, None) => unreachable!("clap requires one of them"),
    };
    let (est, tru) = (point_set(estimate)?, point_set(truth)?);
    write_json(
        &Evaluation {
            schema_version: SCHEMA_VERSION,
            command: "evaluate",
            n,
            hausdorff: hausdorff_scaled(&est, &tru, n)?,
            k_error: abs_k_error(&est, &tru),
            estimate: est.into_vec(),
            truth: tru.into_vec(),
        },
        a.output.as_deref(),
    )
}

#[derive(Debug, Serialize)]
pub struct BenchOutput {
    pub schema_version: u32,
    pub command: &'static str,
    #[serde(flatten)]
    pub result: BenchResult,
}

const BENCH_COLUMNS: [&str; 16] = [
    "setting",
    "n",
    "p",
    "rho",
    "reps",
    "seed",
    "dp_hausdorff_mean",
    "dp_hausdorff_se",
    "pgl_hausdorff_mean",
    "pgl_hausdorff_se",
    "dp_k_error_mean",
    "dp_k_error_se",
    "pgl_k_error_mean",
    "pgl_k_error_se",
    "failures",
    "wall_seconds",
];

fn bench_row(r: &BenchResult) -> Vec<String> {
    let (name, rho) = match r.setting {
        Setting::I { .. } => ("i", String::new()),
        Setting::Ii { rho, .. } => ("ii", rho.to_string()),
        Setting::Iii { .. } => ("iii", String::new()),
    };
    vec![
        name.to_string(),
        r.setting.n().to_string(),
        r.setting.p().to_string(),
        rho,
        r.reps.to_string(),
        r.seed.to_string(),
        r.dp.hausdorff.mean.to_string(),
        r.dp.hausdorff.se.to_string(),
        r.pgl.hausdorff.mean.to_string(),
        r.pgl.hausdorff.se.to_string(),
        r.dp.k_error.mean.to_string(),
        r.dp.k_error.se.to_string(),
        r.pgl.k_error.mean.to_string(),
        r.pgl.k_error.se.to_string(),
        r.failures.len().to_string(),
        r.wall_seconds.to_string(),
    ]
}

fn bench_cmd(a: BenchArgs) -> Result<()> {
    let setting = a.setting.setting()?;
    let resolved = resolve_config(
        setting.n(),
        setting.p(),
        a.tuning.overrides(),
        a.tuning.config.as_deref(),
    )?;
    let result = run_setting(setting, a.reps, a.seed, &resolved.detection, resolved.zeta)?;

    let csv_err = |e: csv::Error| CliError::Parse {
        path: "csv output".into(),
        reason: e.to_string(),
    };
    let row = bench_row(&result);
    match &a.csv {
        Some(path) => {
            let fresh = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
            let f = OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(|e| CliError::io(path, e))?;
            let mut w = csv::Writer::from_writer(f);
            if fresh {
                w.write_record(BENCH_COLUMNS).map_err(csv_err)?;
            }
            w.write_record(&row).map_err(csv_err)?;
            w.flush().map_err(|e| CliError::io(path, e))?;
        }
        None => {
            let mut w = csv::Writer::from_writer(io::stdout().lock());
            w.write_record(BENCH_COLUMNS).map_err(csv_err)?;
            w.write_record(&row).map_err(csv_err)?;
            w.flush().map_err(|e| CliError::io("stdout", e))?;
        }
    }
    if let Some(path) = &a.json {
        write_json(
            &BenchOutput {
                schema_version: SCHEMA_VERSION,
                command: "bench",
                result,
            },
            Some(path),
        )?;
    }
    Ok(())
}
