use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use chbl_core::harness::{
    self, ExperimentSpec, Format, HashKind, Mix, Mode, OracleProcess, RunOutput, SpecError,
    SweepGrid, VerifyOptions,
};
use chbl_core::levels::DEFAULT_UNIFORM_K_CONST;
use chbl_core::{Fault, SchemeKind};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "chbl",
    version,
    about = "Consistent hashing with bounded loads: simulations, oracles and invariant checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a system to steady state and run an operation trace over it.
    Simulate(Common),
    /// Run the random non-full bin reference process.
    Oracle {
        #[command(flatten)]
        common: Common,
        /// rejection, indexed or t-view.
        #[arg(long, default_value = "rejection")]
        process: OracleProcess,
    },
    /// Simulate every (epsilon, capacity) point of a grid.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', required = true)]
        epsilons: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        capacities: Vec<u64>,
    },
    /// Run the invariant suite; exits with 1 on any failure.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, hide = true)]
        inject_fault: Option<FaultArg>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FaultArg {
    PassOffByOne,
}

#[derive(Args)]
struct Common {
    /// single, uniform or geometric. Verify runs all three unless given.
    #[arg(long)]
    scheme: Option<SchemeKind>,
    /// Number of levels; derived from epsilon when omitted.
    #[arg(long)]
    k: Option<u32>,
    /// Constant c0 in the uniform level count ceil(c0/eps^2).
    #[arg(long, default_value_t = DEFAULT_UNIFORM_K_CONST)]
    k_const: f64,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Fixed capacity per bin.
    #[arg(long, conflicts_with = "balance_c")]
    capacity: Option<u64>,
    /// Dynamic capacities with balancing parameter c > 1.
    #[arg(long)]
    balance_c: Option<f64>,
    #[arg(long)]
    n: Option<u64>,
    #[arg(long)]
    m: Option<u64>,
    #[arg(long)]
    trials: Option<u32>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Operations after the initial build [default: n/10].
    #[arg(long)]
    trace_len: Option<u64>,
    /// Operations per window record [default: whole trace].
    #[arg(long)]
    window: Option<u64>,
    /// Weights i:d:I:D of ball insert, ball delete, bin insert, bin delete.
    #[arg(long, default_value = "45:45:5:5")]
    mix: Mix,
    /// random or mixedtab. Verify runs both unless given.
    #[arg(long)]
    hash: Option<HashKind>,
    /// Output file [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "jsonl")]
    format: Format,
    /// Also dump per-operation data to this file.
    #[arg(long)]
    raw: Option<PathBuf>,
    /// Add wall-clock milliseconds to records.
    #[arg(long)]
    timing: bool,
}

impl Common {
    fn spec(&self, mode: Mode) -> ExperimentSpec {
        let (m, trials) = match mode {
            Mode::Verify => (60, 10),
            Mode::Oracle => (1000, 20),
            Mode::Simulate | Mode::Sweep => (1000, 1),
        };
        ExperimentSpec {
            mode,
            scheme: self.scheme.unwrap_or(SchemeKind::Geometric),
            k: self.k,
            k_const: self.k_const,
            epsilon: self.epsilon,
            capacity: self.capacity,
            balance_c: self.balance_c,
            n: self.n,
            m: self.m.unwrap_or(m),
            trials: self.trials.unwrap_or(trials),
            seed: self.seed,
            trace_len: self.trace_len,
            window: self.window,
            mix: self.mix,
            hash: self.hash.unwrap_or(HashKind::Random),
            process: OracleProcess::Rejection,
            timing: self.timing,
        }
    }

    fn write(&self, run: &RunOutput) -> anyhow::Result<()> {
        match &self.out {
            Some(path) => harness::emit(&run.records, self.format, path)
                .with_context(|| format!("cannot write {}", path.display()))?,
            None => harness::write_records(&run.records, self.format, io::stdout().lock())?,
        }
        if let Some(path) = &self.raw {
            let file = std::fs::File::create(path)
                .with_context(|| format!("cannot write {}", path.display()))?;
            harness::write_raw(&run.raw, file)?;
        }
        Ok(())
    }
}

enum Failure {
    Usage(String),
    Property,
}

impl From<SpecError> for Failure {
    fn from(e: SpecError) -> Self {
        Failure::Usage(e.0)
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Usage(format!("{e:#}"))
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Simulate(common) => {
            let out = harness::run_simulate(&common.spec(Mode::Simulate))?;
            common.write(&out)?;
        }
        Command::Oracle { common, process } => {
            let mut spec = common.spec(Mode::Oracle);
            spec.process = process;
            let out = harness::run_oracle(&spec)?;
            common.write(&out)?;
        }
        Command::Sweep {
            common,
            epsilons,
            capacities,
        } => {
            let spec = common.spec(Mode::Sweep);
            if common.balance_c.is_some() {
                return Err(Failure::Usage("sweeps use fixed capacities".into()));
            }
            let grid = SweepGrid {
                epsilons,
                capacities,
            };
            common.write(&harness::run_sweep(&spec, &grid))?;
        }
        Command::Verify {
            common,
            inject_fault,
        } => {
            let spec = common.spec(Mode::Verify);
            let mut options = VerifyOptions::full();
            options.matrix.retain(|&(s, h)| {
                common.scheme.is_none_or(|x| x == s) && common.hash.is_none_or(|x| x == h)
            });
            options.fault = inject_fault.map(|FaultArg::PassOffByOne| Fault::PassIncrementOffByOne);
            let report = harness::run_verify(&spec, &options);
            let mut err = io::stderr().lock();
            for c in &report.checks {
                let verdict = if c.failures == 0 { "PASS" } else { "FAIL" };
                let _ = writeln!(
                    err,
                    "{verdict} {:<22} {:<9} {:<8} {:<7} checked={} failures={}{}",
                    c.property,
                    c.scheme.name(),
                    c.hash.name(),
                    c.capacity_mode,
                    c.checked,
                    c.failures,
                    c.first_failure
                        .as_deref()
                        .map(|f| format!(" ({f})"))
                        .unwrap_or_default()
                );
            }
            let verdict = if report.passed() { "PASS" } else { "FAIL" };
            let _ = writeln!(
                err,
                "{verdict}: {} properties checked",
                report.total_checked()
            );
            let records = RunOutput {
                records: report.to_records(),
                raw: Vec::new(),
            };
            common.write(&records)?;
            if !report.passed() {
                return Err(Failure::Property);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Property) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
