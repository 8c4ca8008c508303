mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use stftsr::bench::{self, Mode};
use stftsr::certificate::{build_certificate, verify_certificate, BuildOptions, VerifyOptions};
use stftsr::io::write_atomic;
use stftsr::solver::{recover, recover_fourier, RecoveryResult};
use stftsr::stft::complete_inversion_approx;
use stftsr::{DiscreteMeasure, Domain, Error, MomentVector, StftMeasurements, WindowParams};

use config::FileConfig;

const EXIT_BAD_INPUT: u8 = 1;
const EXIT_SOLVER: u8 = 2;
const EXIT_UNRELIABLE: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "stftsr",
    version,
    about = "Spike-train super-resolution from STFT measurements"
)]
struct Cli {
    /// Seed for every random choice made by the command.
    #[arg(long, global = true, env = "STFTSR_SEED")]
    seed: Option<u64>,
    /// TOML configuration file.
    #[arg(long, global = true, env = "STFTSR_CONFIG")]
    config: Option<PathBuf>,
    /// Directory for default output paths.
    #[arg(long, global = true, env = "STFTSR_OUTPUT_DIR")]
    output_dir: Option<PathBuf>,
    /// Worker threads for the benchmark.
    #[arg(long, global = true, env = "STFTSR_THREADS")]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum, env = "STFTSR_LOG_LEVEL")]
    log_level: Option<LogLevel>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum LogLevel {
    Error,
    Warn,
    Info,
    Debug,
}

impl LogLevel {
    fn filter(self) -> log::LevelFilter {
        match self {
            LogLevel::Error => log::LevelFilter::Error,
            LogLevel::Warn => log::LevelFilter::Warn,
            LogLevel::Info => log::LevelFilter::Info,
            LogLevel::Debug => log::LevelFilter::Debug,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build and verify an interpolating dual certificate.
    Certify(CertifyArgs),
    /// Recover a measure from STFT measurements or Fourier moments.
    Recover(RecoverArgs),
    /// Run a success-rate sweep and write CSVs and an SVG plot.
    Bench(BenchArgs),
    /// Evaluate the finite complete-measurement inversion at one point.
    Invert(InvertArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DomainArg {
    Real,
    Torus,
}

impl From<DomainArg> for Domain {
    fn from(d: DomainArg) -> Self {
        match d {
            DomainArg::Real => Domain::Real,
            DomainArg::Torus => Domain::Torus,
        }
    }
}

#[derive(Debug, Args)]
struct CertifyArgs {
    /// Support points: a JSON array, inline or in a file.
    #[arg(long, conflicts_with = "random")]
    support: Option<String>,
    /// Random support of S points with minimum separation DELTA.
    #[arg(long, num_args = 2, value_names = ["S", "DELTA"])]
    random: Option<Vec<String>>,
    /// Unit-modulus signs as a JSON array of [re, im] pairs, inline or in a file.
    /// Random phases when omitted.
    #[arg(long)]
    signs: Option<String>,
    #[arg(long, default_value_t = 50)]
    fc: usize,
    /// Window width; defaults to 1/(4 f_c).
    #[arg(long)]
    sigma: Option<f64>,
    /// Verification grid spacing; defaults to 1/(64 f_c).
    #[arg(long)]
    grid: Option<f64>,
    #[arg(long, value_enum, default_value = "real")]
    domain: DomainArg,
    /// Verification report path.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Also write the certificate itself.
    #[arg(long)]
    certificate: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Stft,
    Fourier,
}

#[derive(Debug, Args)]
struct RecoverArgs {
    /// CSV with header k,n,re,im (stft) or m,re,im (fourier).
    #[arg(long)]
    measurements: PathBuf,
    #[arg(long, value_enum, default_value = "stft")]
    mode: ModeArg,
    #[arg(long, default_value_t = 50)]
    fc: usize,
    /// Fourier truncation of the window.
    #[arg(long = "N", alias = "n")]
    n_trunc: Option<usize>,
    /// Window width; defaults to 1/(4 f_c).
    #[arg(long)]
    sigma: Option<f64>,
    /// Result JSON path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Preset {
    /// sigma = 1/(4 f_c), N with g_N/g_0 <= 1e-6.
    Strict,
    /// f_c = 50, N = 50, sigma = 1/200.
    PaperFigure,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// Comma-separated values of delta * f_c.
    #[arg(long, value_delimiter = ',')]
    delta_fc: Option<Vec<f64>>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    fc: Option<usize>,
    #[arg(long = "N", alias = "n")]
    n_trunc: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Comma-separated subset of stft,fourier.
    #[arg(long, value_delimiter = ',', value_enum)]
    modes: Option<Vec<ModeArg>>,
    /// Record per-trial wall time (makes the trial CSV non-reproducible).
    #[arg(long)]
    timing: bool,
    #[arg(long)]
    plot: Option<PathBuf>,
    #[arg(long)]
    trials_csv: Option<PathBuf>,
    #[arg(long)]
    aggregate_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct InvertArgs {
    /// Measure JSON file.
    #[arg(long)]
    measure: PathBuf,
    #[arg(long)]
    t: f64,
    /// Number of frequencies on each side of zero.
    #[arg(long = "F")]
    f: usize,
    #[arg(long, default_value_t = 1.0 / 200.0)]
    sigma: f64,
    #[arg(long, default_value_t = 50)]
    fc: usize,
}

/// An error together with the exit code it maps to.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_BAD_INPUT,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::IllConditioned { .. } | Error::DegenerateSupport(_) | Error::SolverFailure { .. } => EXIT_SOLVER,
            _ => EXIT_BAD_INPUT,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type CmdResult = Result<u8, Failure>;

struct Context {
    seed: Option<u64>,
    output_dir: PathBuf,
    threads: Option<usize>,
    file: FileConfig,
}

impl Context {
    fn output(&self, explicit: Option<&PathBuf>, default_name: &str) -> PathBuf {
        explicit.cloned().unwrap_or_else(|| self.output_dir.join(default_name))
    }
}

fn main() -> ExitCode {
    // Usage errors are bad input; clap's own exit code would read as a solver failure.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_BAD_INPUT } else { 0 });
        }
    };
    let file = match &cli.config {
        Some(path) => match FileConfig::load(path) {
            Ok(f) => f,
            Err(f) => {
                eprintln!("error: {}", f.message);
                return ExitCode::from(f.code);
            }
        },
        None => FileConfig::default(),
    };
    let level = cli.log_level.or(file.log_level).unwrap_or(LogLevel::Warn);
    env_logger::Builder::new()
        .filter_level(level.filter())
        .format_timestamp(None)
        .init();

    let ctx = Context {
        seed: cli.seed.or(file.seed),
        output_dir: cli
            .output_dir
            .clone()
            .or_else(|| file.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from(".")),
        threads: cli.threads.or(file.threads),
        file,
    };
    let result = fs::create_dir_all(&ctx.output_dir)
        .map_err(|e| Failure::input(format!("cannot create output directory: {e}")))
        .and_then(|_| match &cli.command {
            Command::Certify(args) => cmd_certify(args, &ctx),
            Command::Recover(args) => cmd_recover(args, &ctx),
            Command::Bench(args) => cmd_bench(args, &ctx),
            Command::Invert(args) => cmd_invert(args),
        });
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

/// Reads `arg` as a file when such a file exists, otherwise as inline text.
fn inline_or_file(arg: &str) -> Result<String, Failure> {
    let path = Path::new(arg);
    if !arg.trim_start().starts_with(['[', '{']) && path.is_file() {
        fs::read_to_string(path).map_err(|e| Failure::input(format!("cannot read {arg}: {e}")))
    } else {
        Ok(arg.to_string())
    }
}

fn write_json(path: &Path, text: &str) -> Result<(), Failure> {
    write_atomic(path, format!("{text}\n").as_bytes()).map_err(Failure::from)
}

fn cmd_certify(args: &CertifyArgs, ctx: &Context) -> CmdResult {
    let fc = args.fc;
    let sigma = args.sigma.unwrap_or(1.0 / (4.0 * fc as f64));
    let params = WindowParams::new(sigma, fc, 0)?;
    let domain: Domain = args.domain.into();
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed.unwrap_or(0));

    let support: Vec<f64> = match (&args.support, &args.random) {
        (Some(text), _) => serde_json::from_str(&inline_or_file(text)?)
            .map_err(|e| Failure::input(format!("support is not a JSON array of numbers: {e}")))?,
        (None, Some(random)) => {
            let count: usize = random[0]
                .parse()
                .map_err(|_| Failure::input(format!("invalid atom count '{}'", random[0])))?;
            let delta: f64 = random[1]
                .parse()
                .map_err(|_| Failure::input(format!("invalid separation '{}'", random[1])))?;
            random_support(count, delta, domain, &mut rng)?
        }
        (None, None) => return Err(Failure::input("either --support or --random is required")),
    };
    let signs: Vec<Complex64> = match &args.signs {
        Some(text) => {
            let pairs: Vec<[f64; 2]> = serde_json::from_str(&inline_or_file(text)?)
                .map_err(|e| Failure::input(format!("signs are not a JSON array of [re, im] pairs: {e}")))?;
            pairs.into_iter().map(|[re, im]| Complex64::new(re, im)).collect()
        }
        None => (0..support.len())
            .map(|_| Complex64::from_polar(1.0, rng.random::<f64>() * std::f64::consts::TAU))
            .collect(),
    };

    let cert = build_certificate(
        &support,
        &signs,
        &params,
        &BuildOptions {
            domain,
            interaction_radius: None,
        },
    )?;
    let report = verify_certificate(
        &cert,
        &VerifyOptions {
            grid_spacing: args.grid,
            ..VerifyOptions::default()
        },
    );
    let report_path = ctx.output(args.report.as_ref(), "certificate_report.json");
    write_json(
        &report_path,
        &serde_json::to_string_pretty(&report).map_err(Error::from)?,
    )?;
    if let Some(path) = &args.certificate {
        write_json(path, &cert.to_json()?)?;
    }
    log::info!(
        "certificate with {} atoms: sup off support {:.6}, condition {:.3e}",
        support.len(),
        report.sup_off_support,
        cert.condition_number
    );
    println!(
        "{} (sup off support {:.6}, interpolation residual {:.3e})",
        if report.passed { "passed" } else { "failed" },
        report.sup_off_support,
        report.max_interpolation_residual
    );
    Ok(if report.passed { 0 } else { EXIT_UNRELIABLE })
}

/// `count` points whose consecutive gaps are drawn from `[Δ, 2Δ)`.
fn random_support(count: usize, delta: f64, domain: Domain, rng: &mut ChaCha8Rng) -> Result<Vec<f64>, Failure> {
    if count == 0 || !(delta.is_finite() && delta > 0.0) {
        return Err(Failure::input("random support needs S >= 1 and a positive separation"));
    }
    let mut points = Vec::with_capacity(count);
    let mut t = rng.random::<f64>() * delta;
    for _ in 0..count {
        points.push(t);
        t += delta * (1.0 + rng.random::<f64>());
    }
    if domain == Domain::Torus {
        let last = points[count - 1];
        if last + delta > 1.0 + points[0] || last >= 1.0 {
            return Err(Failure::input(format!(
                "{count} points with separation {delta} do not fit on the torus"
            )));
        }
    }
    Ok(points)
}

fn cmd_recover(args: &RecoverArgs, ctx: &Context) -> CmdResult {
    let text = fs::read_to_string(&args.measurements)
        .map_err(|e| Failure::input(format!("cannot read {}: {e}", args.measurements.display())))?;
    let options = ctx.file.solver.clone().unwrap_or_default();
    let sigma = args.sigma.unwrap_or(1.0 / (4.0 * args.fc as f64));
    let result: RecoveryResult = match args.mode {
        ModeArg::Stft => {
            let params = match args.n_trunc {
                Some(n) => WindowParams::new(sigma, args.fc, n)?,
                None => WindowParams::with_strict_truncation(sigma, args.fc)?,
            };
            let y = StftMeasurements::from_csv(&text, params)?;
            recover(&y, &options)?
        }
        ModeArg::Fourier => {
            let u = MomentVector::from_csv(&text)?;
            if u.cutoff() != args.fc {
                return Err(Failure::input(format!(
                    "moment file has cutoff {} but --fc is {}",
                    u.cutoff(),
                    args.fc
                )));
            }
            recover_fourier(&u, &options)?
        }
    };
    let out = ctx.output(args.out.as_ref(), "recovery.json");
    write_json(&out, &result.to_json()?)?;
    println!(
        "{} atoms, primal TV {:.9e}, duality gap {:.3e}{}",
        result.measure.len(),
        result.primal_tv,
        result.duality_gap,
        if result.unreliable { " (unreliable)" } else { "" }
    );
    Ok(if result.unreliable { EXIT_UNRELIABLE } else { 0 })
}

fn cmd_bench(args: &BenchArgs, ctx: &Context) -> CmdResult {
    let mut config = ctx.file.sweep(args.preset.map(|p| p == Preset::PaperFigure))?;
    if let Some(fc) = args.fc {
        let products: Vec<f64> = config.delta_grid.iter().map(|d| d * config.fc as f64).collect();
        config.fc = fc;
        config.delta_grid = bench::delta_grid_from_fc(&products, fc);
    }
    if let Some(products) = &args.delta_fc {
        config.delta_grid = bench::delta_grid_from_fc(products, config.fc);
    }
    if let Some(t) = args.trials {
        config.trials_per_point = t;
    }
    if let Some(n) = args.n_trunc {
        config.n_trunc = n;
    }
    if let Some(s) = args.sigma {
        config.sigma = s;
    }
    if let Some(modes) = &args.modes {
        config.modes = modes
            .iter()
            .map(|m| match m {
                ModeArg::Stft => Mode::Stft,
                ModeArg::Fourier => Mode::Fourier,
            })
            .collect();
    }
    if let Some(seed) = ctx.seed {
        config.master_seed = seed;
    }
    config.record_timing |= args.timing;
    config.validate()?;

    let trials_path = ctx.output(args.trials_csv.as_ref(), "trials.csv");
    let aggregate_path = ctx.output(args.aggregate_csv.as_ref(), "aggregate.csv");
    let plot_path = ctx.output(args.plot.as_ref(), "success_rate.svg");

    // Completed points are appended to a side file so an interrupted run
    // keeps its progress; the final CSV replaces it atomically.
    let partial_path = trials_path.with_extension("csv.partial");
    fs::write(&partial_path, format!("{}\n", bench::TRIALS_HEADER)).map_err(Error::from)?;
    let run = || {
        bench::run_sweep_with(&config, |point| {
            use std::io::Write;
            let mut f = fs::OpenOptions::new().append(true).open(&partial_path)?;
            f.write_all(bench::trial_rows(point).as_bytes())?;
            Ok(())
        })
    };
    let result = match ctx.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Failure::input(format!("cannot start {n} worker threads: {e}")))?
            .install(run)?,
        None => run()?,
    };
    write_atomic(&trials_path, bench::trials_csv(&result.records).as_bytes())?;
    let _ = fs::remove_file(&partial_path);
    write_atomic(&aggregate_path, bench::aggregates_csv(&result.aggregates).as_bytes())?;
    bench::emit_plot(&result.aggregates, config.fc, &plot_path)?;
    for a in &result.aggregates {
        println!(
            "{:.3} {:<7} {}/{}",
            a.delta * config.fc as f64,
            a.mode.name(),
            a.successes,
            a.trials
        );
    }
    Ok(0)
}

fn cmd_invert(args: &InvertArgs) -> CmdResult {
    if args.f == 0 {
        return Err(Failure::input("--F must be at least 1"));
    }
    let text = fs::read_to_string(&args.measure)
        .map_err(|e| Failure::input(format!("cannot read {}: {e}", args.measure.display())))?;
    let measure = DiscreteMeasure::from_json(&text)?;
    let params = WindowParams::new(args.sigma, args.fc, 0)?;
    let value = complete_inversion_approx(&measure, &params, args.t, args.f)?;
    println!("{:.12e} {:.12e}", value.re, value.im);
    Ok(0)
}
