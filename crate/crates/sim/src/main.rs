use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dlambda_sim::report::{write_outputs, SUMMARY_FILE};
use dlambda_sim::{run, Experiment, RayonExecutor, Scenario};

#[derive(Parser)]
#[command(
    name = "sim",
    version,
    about = "Driven-lambda ensemble simulations from scenario files"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ramsey fringe envelope and its decay fit.
    Ramsey(RunArgs),
    /// Hahn-echo envelope and its decay fit.
    Echo(RunArgs),
    /// Optical pumping trace and readout population.
    Pump(RunArgs),
    /// Pumping followed by the Raman transfer pair.
    Stirap(RunArgs),
    /// Four-wave-mixing gain against signal phase.
    Fwm(RunArgs),
    /// Multi-line Gaussian fit of a measured spectrum.
    SpectrumFit(RunArgs),
    /// Repeats one experiment over values of a scenario key.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Dotted key to sweep, e.g. `raman.two_photon_detuning_ghz`.
        #[arg(long)]
        param: Option<String>,
        /// Comma-separated values replacing the scenario's list.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        values: Option<Vec<f64>>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file (TOML).
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = "sim-out")]
    out: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core. Does not change the output.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Overrides the integrator relative tolerance.
    #[arg(long)]
    tol: Option<f64>,
}

const EXIT_FLAGGED: u8 = 1;
const EXIT_INPUT: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (expected, args, sweep) = match cli.command {
        Command::Ramsey(a) => (Experiment::Ramsey, a, None),
        Command::Echo(a) => (Experiment::Echo, a, None),
        Command::Pump(a) => (Experiment::Pump, a, None),
        Command::Stirap(a) => (Experiment::Stirap, a, None),
        Command::Fwm(a) => (Experiment::Fwm, a, None),
        Command::SpectrumFit(a) => (Experiment::SpectrumFit, a, None),
        Command::Sweep { run, param, values } => (Experiment::Sweep, run, Some((param, values))),
    };
    match execute(expected, &args, sweep) {
        Ok(code) => ExitCode::from(code),
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}

type SweepOverride = Option<(Option<String>, Option<Vec<f64>>)>;

fn execute(expected: Experiment, args: &RunArgs, sweep: SweepOverride) -> Result<u8, String> {
    let path = &args.scenario;
    let mut scenario = Scenario::from_path(path)
        .and_then(|s| s.with_overrides(args.seed, args.tol))
        .map_err(|e| format!("{}: {e}", path.display()))?;
    if scenario.experiment != expected {
        return Err(format!(
            "{}: scenario is for `{}`, not `{}`",
            path.display(),
            scenario.experiment,
            expected
        ));
    }
    if let Some((param, values)) = sweep {
        if param.is_some() || values.is_some() {
            scenario = scenario
                .with_sweep(param, values)
                .map_err(|e| format!("{}: {e}", path.display()))?;
        }
    }
    let exec =
        RayonExecutor::with_threads(args.threads).map_err(|e| format!("thread pool: {e}"))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let outcome = run(&exec, &scenario, base);
    let written = match &outcome {
        Ok(o) => write_outputs(&args.out, &scenario, Ok(o)),
        Err(e) => write_outputs(&args.out, &scenario, Err(&e.to_string())),
    }
    .map_err(|e| format!("{}: {e}", args.out.display()))?;
    for p in &written {
        println!("wrote {}", p.display());
    }
    match outcome {
        Ok(o) => {
            for (k, v) in &o.results {
                println!("{k} = {v}");
            }
            for f in &o.flags {
                eprintln!("flagged: {f}");
            }
            Ok(if o.is_flagged() { EXIT_FLAGGED } else { 0 })
        }
        Err(e) => {
            eprintln!(
                "failed: {e} (see {})",
                args.out.join(SUMMARY_FILE).display()
            );
            Ok(EXIT_FLAGGED)
        }
    }
}
