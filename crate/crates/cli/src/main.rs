//! `srlrtr` command-line front end: simulate noise, denoise, evaluate, and
//! export bands as images.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod error;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use srlrtr::metrics::evaluate;
use srlrtr::noise::NoiseSpec;
use srlrtr::npy::{read_cube, Dtype};
use srlrtr::{solve, Cube};

use crate::config::{load_run_config, read_json, DenoiseReport, Preset, RunConfig};
use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "srlrtr", version, about = "Hyperspectral mixed-noise removal")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Corrupt a clean cube with one of the four noise cases or a custom spec.
    Simulate(SimulateArgs),
    /// Separate a noisy cube into clean, sparse and Gaussian parts.
    Denoise(DenoiseArgs),
    /// Compare a test cube against a reference: PSNR, SSIM, ERGAS.
    Evaluate(EvaluateArgs),
    /// Write one band as an 8-bit PGM image.
    ExportBand(ExportArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DtypeArg {
    F32,
    F64,
}

impl From<DtypeArg> for Dtype {
    fn from(d: DtypeArg) -> Self {
        match d {
            DtypeArg::F32 => Dtype::Float32,
            DtypeArg::F64 => Dtype::Float64,
        }
    }
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Clean cube (.npy).
    #[arg(long)]
    input: PathBuf,
    /// Noisy cube to write (.npy).
    #[arg(long)]
    output: PathBuf,
    /// Noise case 1-4.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4), required_unless_present = "spec")]
    case: Option<u8>,
    /// JSON noise spec; takes precedence over --case.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Overrides the seed of the case or spec.
    #[arg(long)]
    seed: Option<u64>,
    /// Where to write the resolved spec; defaults to <output>.noise.json.
    #[arg(long)]
    spec_out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "f64")]
    dtype: DtypeArg,
}

#[derive(Debug, Args)]
struct DenoiseArgs {
    /// Noisy cube (.npy); may come from --config.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Denoised cube to write (.npy); may come from --config.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, conflicts_with = "config")]
    preset: Option<Preset>,
    /// Run config or a previous report to start from.
    #[arg(long)]
    config: Option<PathBuf>,
    /// JSON report with the resolved config and solver trace.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Also write <output stem>.sparse.npy and <output stem>.gaussian.npy.
    #[arg(long)]
    emit_components: bool,
    #[arg(long)]
    lambda_tv: Option<f64>,
    #[arg(long)]
    lambda_s: Option<f64>,
    #[arg(long)]
    lambda_n: Option<f64>,
    #[arg(long)]
    lambda_g: Option<f64>,
    #[arg(long)]
    rank: Option<usize>,
    /// Sets all four penalties.
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    beta1: Option<f64>,
    #[arg(long)]
    beta2: Option<f64>,
    #[arg(long)]
    beta3: Option<f64>,
    #[arg(long)]
    beta4: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long, value_enum, default_value = "f64")]
    dtype: DtypeArg,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    reference: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
    /// PSNR peak value.
    #[arg(long, default_value_t = 1.0)]
    peak: f64,
}

#[derive(Debug, Args)]
struct ExportArgs {
    #[arg(long)]
    input: PathBuf,
    /// 1-based band index.
    #[arg(long)]
    band: usize,
    #[arg(long)]
    output: PathBuf,
    /// Values mapped to black and white, e.g. `--range 0,1`.
    #[arg(long, value_parser = parse_range, default_value = "0,1", allow_hyphen_values = true)]
    range: (f64, f64),
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(',').ok_or_else(|| format!("expected lo,hi, got {s:?}"))?;
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
    Ok((num(lo)?, num(hi)?))
}

fn load(path: &Path) -> CliResult<Cube<f64>> {
    read_cube::<f64>(path)
        .map(|(c, _)| c)
        .map_err(|source| match source {
            srlrtr::Error::Io(e) => CliError::io(path, e),
            source => CliError::Cube {
                path: path.to_path_buf(),
                source,
            },
        })
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

fn simulate(args: SimulateArgs) -> CliResult<()> {
    let clean = load(&args.input)?;
    let mut spec = match (&args.spec, args.case) {
        (Some(path), _) => read_json::<NoiseSpec>(path)?,
        (None, Some(case)) => NoiseSpec::case(case, clean.dims(), 0)?,
        (None, None) => return Err(CliError::Usage("either --case or --spec is required".into())),
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let noisy = spec.apply(&clean)?;
    output::write_cube(&args.output, &noisy, args.dtype.into())?;
    let spec_path = args.spec_out.unwrap_or_else(|| sibling(&args.output, "noise.json"));
    output::write_json(&spec_path, &spec)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&spec).expect("noise spec serializes")
    );
    Ok(())
}

fn resolve_config(args: &DenoiseArgs) -> CliResult<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => load_run_config(path)?,
        None => RunConfig::from_preset(args.preset.unwrap_or(Preset::Simulated)),
    };
    let p = &mut cfg.params;
    let overrides = [
        (&mut p.lambda_tv, args.lambda_tv),
        (&mut p.lambda_s, args.lambda_s),
        (&mut p.lambda_n, args.lambda_n),
        (&mut p.lambda_g, args.lambda_g),
        (&mut p.tol, args.tol),
        (&mut p.rho, args.rho),
    ];
    for (slot, v) in overrides {
        if let Some(v) = v {
            *slot = v;
        }
    }
    if let Some(b) = args.beta {
        p.beta = [b; 4];
    }
    for (i, b) in [args.beta1, args.beta2, args.beta3, args.beta4].into_iter().enumerate() {
        if let Some(b) = b {
            p.beta[i] = b;
        }
    }
    if let Some(r) = args.rank {
        p.rank = r;
    }
    if let Some(m) = args.max_iter {
        p.max_iter = m;
    }
    if args.input.is_some() {
        cfg.input = args.input.clone();
    }
    if args.output.is_some() {
        cfg.output = args.output.clone();
    }
    cfg.settle_preset();
    Ok(cfg)
}

fn denoise(args: DenoiseArgs) -> CliResult<()> {
    let cfg = resolve_config(&args)?;
    let input = cfg
        .input
        .clone()
        .ok_or_else(|| CliError::Usage("--input is required (directly or via --config)".into()))?;
    let out = cfg
        .output
        .clone()
        .ok_or_else(|| CliError::Usage("--output is required (directly or via --config)".into()))?;
    let y = load(&input)?;
    cfg.params.validate(y.dims())?;
    let sol = solve(&y, &cfg.params)?;
    let dtype: Dtype = args.dtype.into();
    output::write_cube(&out, &sol.x, dtype)?;
    if args.emit_components {
        output::write_cube(&sibling(&out, "sparse.npy"), &sol.s, dtype)?;
        output::write_cube(&sibling(&out, "gaussian.npy"), &sol.n, dtype)?;
    }
    let r = &sol.report;
    println!(
        "iterations {} converged {} final relative change {:.3e} max residual {:.3e} time {:.2} s",
        r.iterations,
        r.converged,
        r.relative_change.last().copied().unwrap_or(0.0),
        r.final_max_residual(),
        r.wall_time_secs
    );
    if let Some(path) = &args.report {
        let report = DenoiseReport {
            dims: y.dims(),
            config: cfg,
            solve: sol.report,
        };
        output::write_json(path, &report)?;
    }
    Ok(())
}

fn evaluate_cmd(args: EvaluateArgs) -> CliResult<()> {
    let reference = load(&args.reference)?;
    let test = load(&args.test)?;
    let report = evaluate(&reference, &test, args.peak)?;
    if let Some(path) = &args.csv {
        output::write_metrics_csv(path, &report)?;
    }
    if let Some(path) = &args.json {
        output::write_json(path, &report)?;
    }
    println!(
        "MPSNR {:.4} dB  MSSIM {:.6}  ERGAS(paper) {:.6}  ERGAS(standard) {:.6}",
        report.mpsnr, report.mssim, report.ergas_paper, report.ergas_standard
    );
    Ok(())
}

fn export_band(args: ExportArgs) -> CliResult<()> {
    let (lo, hi) = args.range;
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(CliError::Usage(format!("--range needs finite lo < hi, got {lo},{hi}")));
    }
    let cube = load(&args.input)?;
    let bands = cube.dims().bands;
    if args.band == 0 || args.band > bands {
        return Err(CliError::Usage(format!("--band must lie in 1..={bands}, got {}", args.band)));
    }
    let bytes = output::pgm_bytes(&cube.band_mat(args.band - 1), lo, hi);
    output::write_atomic(&args.output, &bytes)
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Denoise(a) => denoise(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::ExportBand(a) => export_band(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
