//! Command-line harness for the over-the-air aggregation experiments.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ota_mac::harness::{
    format_rows, format_trace, parse_format, parse_mode, parse_scheme, run_mean_estimation,
    run_psgd_experiment, write_results, write_trace, ExperimentConfig, Mode, RawConfig,
};
use ota_mac::schemes::{select_params_uq, select_params_wz, SchemeKind};
use ota_mac::Error;

#[derive(Parser)]
#[command(
    name = "ota-mac",
    about = "Over-the-air gradient aggregation simulator",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a config file and/or flags.
    Run(RunArgs),
    /// Print the derived scheme parameters for a configuration.
    Params(ParamsArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// mean-estimation | psgd
    #[arg(long)]
    mode: Option<String>,
    /// uq | wz | analog
    #[arg(long)]
    scheme: Option<String>,
    /// Number of clients K.
    #[arg(long)]
    k: Option<usize>,
    /// Dimension d.
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    snr_db: Option<f64>,
    /// Gradient-norm bound(s), comma separated.
    #[arg(long, value_delimiter = ',')]
    b: Option<Vec<f64>>,
    #[arg(long)]
    sigma_prime: Option<f64>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    c2: Option<f64>,
    /// Channel-use budget N.
    #[arg(long)]
    n_budget: Option<u64>,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv | dat
    #[arg(long)]
    format: Option<String>,
}

#[derive(Args)]
struct ParamsArgs {
    /// uq | wz | analog
    #[arg(long)]
    scheme: String,
    #[arg(long, default_value_t = 500)]
    k: usize,
    #[arg(long, default_value_t = 32)]
    d: usize,
    #[arg(long, default_value_t = 50.0)]
    snr_db: f64,
    /// Budget N used by the selection formulas; defaults to d.
    #[arg(long)]
    n: Option<u64>,
    #[arg(long, default_value_t = 64.0)]
    b: f64,
    #[arg(long, default_value_t = 1.0)]
    c2: f64,
}

fn exit_code_for(err: &Error) -> ExitCode {
    match err {
        Error::Overflow { .. } => ExitCode::from(3),
        Error::InvalidConfig(_) | Error::DimensionMismatch { .. } => ExitCode::from(2),
        Error::Io { .. } => ExitCode::from(2),
        _ => ExitCode::from(1),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Params(args) => params(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code_for(&err)
        }
    }
}

fn run(args: RunArgs) -> ota_mac::Result<()> {
    let mut cfg: ExperimentConfig = match &args.config {
        Some(path) => RawConfig::load(path)?.into_config()?,
        None => ExperimentConfig::default(),
    };
    if let Some(mode) = &args.mode {
        cfg.mode = parse_mode(mode)?;
    }
    if let Some(scheme) = &args.scheme {
        cfg.scheme = parse_scheme(scheme)?;
    }
    if let Some(k) = args.k {
        cfg.num_clients = k;
    }
    if let Some(d) = args.d {
        cfg.dim = d;
    }
    if let Some(snr) = args.snr_db {
        cfg.snr_db = snr;
    }
    if let Some(b) = args.b {
        cfg.bounds = b;
    }
    if let Some(sp) = args.sigma_prime {
        cfg.sigma_prime = sp;
    }
    if let Some(runs) = args.runs {
        cfg.runs = runs;
    }
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    if let Some(c2) = args.c2 {
        cfg.c2 = c2;
    }
    if let Some(n) = args.n_budget {
        cfg.n_budget = Some(n);
    }
    if let Some(out) = args.out {
        cfg.output = Some(out);
    }
    if let Some(format) = &args.format {
        cfg.format = parse_format(format)?;
    }
    cfg.validate()?;

    match cfg.mode {
        Mode::MeanEstimation => {
            let rows = run_mean_estimation(&cfg)?;
            match &cfg.output {
                Some(path) => write_results(&rows, path, cfg.format)?,
                None => print!("{}", format_rows(&rows, cfg.format)),
            }
        }
        Mode::Psgd => {
            let rows = run_psgd_experiment(&cfg)?;
            match &cfg.output {
                Some(path) => write_trace(&rows, path, cfg.format)?,
                None => print!("{}", format_trace(&rows, cfg.format)),
            }
        }
    }
    Ok(())
}

fn params(args: ParamsArgs) -> ota_mac::Result<()> {
    let scheme = parse_scheme(&args.scheme)?;
    let snr = 10f64.powf(args.snr_db / 10.0);
    let n = args.n.unwrap_or(args.d as u64);
    match scheme {
        SchemeKind::Uq => {
            let p = select_params_uq(args.k, args.d, snr, n, args.b)?;
            println!("scheme = uq");
            println!("v = {}", p.levels);
            println!("p = {}", p.block_size);
            println!("w = {}", p.base);
            println!("r = {}", p.ask_size);
            println!("ell = {}", p.uses_per_round);
        }
        SchemeKind::Wz => {
            let p = select_params_wz(args.k, args.d, snr, n, args.b, args.c2)?;
            println!("scheme = wz");
            println!("v = {}", p.levels);
            println!("p = {}", p.block_size);
            println!("p_prime = {}", p.wz_block_size);
            println!("w = {}", p.base);
            println!("w_prime = {}", p.wz_base);
            println!("r = {}", p.ask_size);
            println!("r_prime = {}", p.wz_ask_size);
            println!("M = {}", p.daq_range);
            println!("I = {}", p.daq_samples);
            println!("ell = {}", p.uses_per_round);
        }
        SchemeKind::Analog => {
            println!("scheme = analog");
            println!("ell = {}", args.d);
        }
    }
    Ok(())
}
