use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use eta_forge_cli::{run_config, CliError, RunConfig, Scenario};

#[derive(Parser)]
#[command(name = "eta-forge", version, about = "Run eta-forge scenarios and the verification suite")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario.
    Run {
        scenario: Option<Scenario>,
        #[command(flatten)]
        common: Common,
    },
    /// Run the full acceptance suite in order.
    VerifyAll {
        #[command(flatten)]
        common: Common,
    },
    /// Run a single identity check.
    Verify {
        #[command(subcommand)]
        what: VerifyWhat,
    },
}

#[derive(Subcommand)]
enum VerifyWhat {
    /// The cocycle integrand identity, numerically or symbolically.
    Eqfe {
        #[arg(long)]
        symbolic: bool,
        /// Print canonical forms of every intermediate expression.
        #[arg(long)]
        trace_ir: bool,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args, Default)]
struct Common {
    /// JSON run configuration; flags given here override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// JSON model file (group action, operator `d`, optional perturbation `c`).
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    /// Halve grid resolutions and instance counts.
    #[arg(long)]
    quick: bool,
    /// Also write the raw results as JSON.
    #[arg(long)]
    dump: bool,
    /// Directory for the CSV and markdown reports.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn build(scenario: Option<Scenario>, c: Common, trace_ir: bool) -> Result<RunConfig, CliError> {
    let mut cfg = match (&c.config, scenario) {
        (Some(path), _) => RunConfig::load(path)?,
        (None, Some(s)) => RunConfig::new(s),
        (None, None) => return Err(CliError::Config("no scenario given (positional or via --config)".into())),
    };
    if let Some(s) = scenario {
        cfg.scenario = s;
    }
    if c.model.is_some() {
        cfg.model_path = c.model;
    }
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    if c.threads.is_some() {
        cfg.threads = c.threads;
    }
    if c.out.is_some() {
        cfg.out_dir = c.out;
    }
    cfg.quick |= c.quick;
    cfg.dump |= c.dump;
    cfg.trace_ir |= trace_ir;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // help and version are not errors
            return ExitCode::from(if e.use_stderr() { 3 } else { 0 });
        }
    };
    let cfg = match cli.command {
        Command::Run { scenario, common } => build(scenario, common, false),
        Command::VerifyAll { common } => build(Some(Scenario::VerifyAll), common, false),
        Command::Verify { what: VerifyWhat::Eqfe { symbolic, trace_ir, common } } => {
            let s = if symbolic { Scenario::EqfeSymbolic } else { Scenario::EqfeNumeric };
            build(Some(s), common, trace_ir)
        }
    };
    let result = cfg.and_then(|cfg| run_config(&cfg));
    match result {
        Ok(report) => {
            for line in &report.trace {
                println!("{line}");
            }
            print!("{}", report.markdown);
            if let Some((sec, c)) = report.first_failure() {
                eprintln!(
                    "first failure: {}/{} [{}]: error {:.3e} > tolerance {:.3e}",
                    sec.id, c.name, c.instance, c.error, c.tolerance
                );
            }
            ExitCode::from(report.code as u8)
        }
        Err(e) => {
            eprintln!("eta-forge: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
