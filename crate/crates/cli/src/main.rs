use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use lwa_core::capacity::{BandLink, LicensedLink, UnlicensedLink};
use lwa_core::dcf::{DcfModel, DcfParams};
use lwa_core::experiment::{run_scheme, run_sweep, write_sweep, ExperimentSpec, Scheme, TrendSummary};
use lwa_core::scenario::{Scenario, ScenarioModel};
use lwa_core::scheduler::SolveOptions;
use lwa_core::sim::{simulate_dcf, write_samples, SimConfig};
use lwa_core::validation::{validate_model, ValidationOptions};

/// Exit status when some points were infeasible or some checks failed.
const PARTIAL: u8 = 2;

#[derive(Parser)]
#[command(name = "lwa", version, about = "Effective capacity, licensed-bandwidth scheduling and DCF simulation for LTE/WiFi aggregation")]
struct Cli {
    /// Print nothing on stdout; results still go to --out.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Effective capacity of one band at given (beta, theta) points.
    Ec(EcArgs),
    /// Solve one scenario with one scheme.
    Solve(SolveArgs),
    /// Slot-level DCF simulation of the tagged node.
    Simulate(SimulateArgs),
    /// Licensed bandwidth against the number of contending WiFi nodes.
    SweepFig2(SweepArgs),
    /// Licensed bandwidth against the delay bound.
    SweepFig3(SweepArgs),
    /// Analytic model against simulation, plus the delay-violation audit.
    Validate(ValidateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum BandArg {
    Unlicensed,
    Licensed,
}

#[derive(Args)]
struct EcArgs {
    #[arg(long, value_enum)]
    band: BandArg,
    /// Average SNR (linear).
    #[arg(long)]
    snr: f64,
    /// Bandwidth (Hz).
    #[arg(long)]
    beta: f64,
    /// QoS exponents (1/bit); one output line per value.
    #[arg(long, num_args = 1.., required = true)]
    theta: Vec<f64>,
    /// DCF parameters as JSON (defaults otherwise).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    contenders: Option<u32>,
    /// LTE frame length (s).
    #[arg(long, default_value_t = 1e-3)]
    frame: f64,
}

#[derive(Args)]
struct SolveArgs {
    /// Scenario JSON.
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "optimal")]
    scheme: String,
    #[arg(long, default_value_t = 0.6)]
    gamma_split: f64,
    /// Relative outer tolerance of the optimiser.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Record wall-clock time (outputs then differ between runs).
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct SimulateArgs {
    /// SimConfig JSON; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    contenders: Option<u32>,
    #[arg(long)]
    slots: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the raw off-time samples (little-endian f64 seconds).
    #[arg(long)]
    raw: bool,
}

#[derive(Args)]
struct SweepArgs {
    /// ExperimentSpec JSON; the built-in sweep otherwise.
    #[arg(long)]
    config: Option<PathBuf>,
    /// First scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    seeds: Option<u32>,
    /// Comma-separated subset of optimal,sas,sms.
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    gamma_split: Option<f64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct ValidateArgs {
    /// ValidationOptions JSON.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    slots: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")
        .with_context(|| format!("writing {}", path.display()))
}

fn emit<T: Serialize>(quiet: bool, value: &T) -> Result<()> {
    if !quiet {
        println!("{}", serde_json::to_string_pretty(value)?);
    }
    Ok(())
}

#[derive(Serialize)]
struct EcLine {
    band: &'static str,
    beta: f64,
    theta: f64,
    ec: f64,
    /// `theta EC` (1/s).
    decay: f64,
}

fn cmd_ec(args: EcArgs, quiet: bool) -> Result<u8> {
    let (name, link) = match args.band {
        BandArg::Unlicensed => {
            let mut dcf: DcfParams = match &args.config {
                Some(p) => read_json(p)?,
                None => DcfParams::default(),
            };
            if let Some(l) = args.contenders {
                dcf.contenders = l;
            }
            let model = Arc::new(DcfModel::new(dcf)?);
            ("unlicensed", BandLink::Unlicensed(UnlicensedLink::new(model, args.snr)?))
        }
        BandArg::Licensed => ("licensed", BandLink::Licensed(LicensedLink::new(args.snr, args.frame)?)),
    };
    let lines = args
        .theta
        .iter()
        .map(|&theta| {
            let ec = link.ec(args.beta, theta)?;
            Ok(EcLine {
                band: name,
                beta: args.beta,
                theta,
                ec,
                decay: theta * ec,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    emit(quiet, &lines)?;
    Ok(0)
}

fn cmd_solve(args: SolveArgs, quiet: bool) -> Result<u8> {
    let scheme: Scheme = args.scheme.parse()?;
    let text = fs::read_to_string(&args.config).with_context(|| format!("reading {}", args.config.display()))?;
    let scenario = Scenario::from_json(&text)?;
    let id = scenario.id.clone();
    let model = ScenarioModel::new(scenario)?;
    let mut opts = SolveOptions {
        timing: args.timing,
        ..SolveOptions::default()
    };
    if let Some(t) = args.tol {
        opts.rel_tol = t;
    }
    let started = std::time::Instant::now();
    let (licensed, status, iterations, error, detail) = run_scheme(&model, scheme, args.gamma_split, &opts);
    let wall = args.timing.then(|| started.elapsed().as_secs_f64());
    if let Some(e) = &error {
        bail!("{e}");
    }
    let summary = format!(
        "scenario_id,scheme,objective_hz,iterations,status,wall_time_s\n{},{},{},{},{},{}\n",
        id,
        scheme.as_str(),
        licensed.map(|l| l.to_string()).unwrap_or_default(),
        iterations,
        status,
        wall.map(|w| w.to_string()).unwrap_or_default()
    );
    if let Some(dir) = &args.out {
        write_json(&dir.join(format!("{id}-{}.json", scheme.as_str())), &detail)?;
        fs::write(dir.join(format!("{id}-{}.csv", scheme.as_str())), &summary)?;
    }
    if !quiet {
        print!("{summary}");
    }
    Ok(if licensed.is_some() { 0 } else { PARTIAL })
}

fn cmd_simulate(args: SimulateArgs, quiet: bool) -> Result<u8> {
    let mut cfg: SimConfig = match &args.config {
        Some(p) => read_json(p)?,
        None => SimConfig {
            dcf: DcfParams::default(),
            horizon_slots: 1_000_000,
            seed: 1,
            warmup_slots: 10_000,
        },
    };
    if let Some(l) = args.contenders {
        cfg.dcf.contenders = l;
    }
    if let Some(n) = args.slots {
        cfg.horizon_slots = n;
        cfg.warmup_slots = cfg.warmup_slots.min(n / 2);
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    let (stats, samples) = simulate_dcf(&cfg)?;
    if let Some(dir) = &args.out {
        write_json(&dir.join("simulation.json"), &stats)?;
        if args.raw {
            write_samples(&dir.join("off_times.bin"), &samples)?;
        }
    } else if args.raw {
        bail!("--raw needs --out");
    }
    emit(quiet, &stats)?;
    Ok(0)
}

fn cmd_sweep(args: SweepArgs, quiet: bool, default: ExperimentSpec) -> Result<u8> {
    let mut spec = match &args.config {
        Some(p) => ExperimentSpec::load(p)?,
        None => default,
    };
    if let Some(s) = args.seed {
        spec.seed = s;
    }
    if let Some(n) = args.seeds {
        spec.seeds = n;
    }
    if let Some(list) = &args.scheme {
        spec.schemes = list
            .split(',')
            .map(|s| s.trim().parse::<Scheme>())
            .collect::<lwa_core::Result<Vec<_>>>()?;
    }
    if let Some(t) = args.tol {
        spec.tol = t;
    }
    if let Some(g) = args.gamma_split {
        spec.gamma_split = g;
    }
    spec.timing |= args.timing;
    let output = run_sweep(&spec)?;
    write_sweep(&args.out, &output)?;
    let trend = TrendSummary::new(&output.rows);
    emit(quiet, &serde_json::json!({ "rows": output.rows, "trend": trend }))?;
    Ok(if output.failures() > 0 { PARTIAL } else { 0 })
}

fn cmd_validate(args: ValidateArgs, quiet: bool) -> Result<u8> {
    let mut opts: ValidationOptions = match &args.config {
        Some(p) => read_json(p)?,
        None => ValidationOptions::default(),
    };
    if let Some(s) = args.seed {
        opts.seed = s;
    }
    if let Some(n) = args.slots {
        opts.slots = n;
    }
    let report = validate_model(&opts)?;
    if let Some(dir) = &args.out {
        write_json(&dir.join("validation.json"), &report)?;
    }
    emit(quiet, &report)?;
    Ok(if report.passed { 0 } else { PARTIAL })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let quiet = cli.quiet;
    let result = match cli.command {
        Command::Ec(a) => cmd_ec(a, quiet),
        Command::Solve(a) => cmd_solve(a, quiet),
        Command::Simulate(a) => cmd_simulate(a, quiet),
        Command::SweepFig2(a) => cmd_sweep(a, quiet, ExperimentSpec::contention_sweep()),
        Command::SweepFig3(a) => cmd_sweep(a, quiet, ExperimentSpec::delay_sweep()),
        Command::Validate(a) => cmd_validate(a, quiet),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
