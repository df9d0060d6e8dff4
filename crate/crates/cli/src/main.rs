use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use crowdff::harness::{self, ExperimentPlan, HarnessError, Mode};
use crowdff::presets;

#[derive(Parser)]
#[command(name = "crowdff", version, about = "Crowd simulation with fast-forward jumps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file (or a built-in preset by name) and write CSV reports.
    Simulate {
        /// Scenario JSON file, or the name of a built-in preset.
        scenario: String,
        #[arg(long, value_enum, default_value_t = ModeArg::Compare)]
        mode: ModeArg,
        #[arg(long, default_value_t = harness::DEFAULT_REPEATS as u64, value_parser = clap::value_parser!(u64).range(1..))]
        repeats: u64,
        /// Base seed; repeat r uses seed + r. Defaults to the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Fail with exit code 3 if the jump error bound or frame accounting is violated.
        #[arg(long)]
        check: bool,
    },
    /// Write every built-in scenario as JSON.
    Presets {
        #[arg(long, default_value = "presets")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Continuous,
    Ffa,
    Compare,
    Fog,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Continuous => Mode::Continuous,
            ModeArg::Ffa => Mode::Ffa,
            ModeArg::Compare => Mode::Compare,
            ModeArg::Fog => Mode::Fog,
        }
    }
}

fn load_plan(scenario: &str, mode: Mode, out: PathBuf) -> Result<ExperimentPlan, HarnessError> {
    let path = Path::new(scenario);
    if !path.exists() {
        if let Some((name, s)) = presets::presets().into_iter().find(|(n, _)| n == scenario) {
            return Ok(ExperimentPlan {
                scenario: s,
                sim_id: name,
                mode,
                repeats: harness::DEFAULT_REPEATS,
                seed: None,
                out_dir: out,
                check: false,
            });
        }
    }
    ExperimentPlan::from_file(path, mode, out)
}

fn simulate(
    scenario: &str,
    mode: Mode,
    repeats: usize,
    seed: Option<u64>,
    out: PathBuf,
    check: bool,
) -> Result<(), HarnessError> {
    let mut plan = load_plan(scenario, mode, out)?;
    harness::apply_overrides(&mut plan.scenario, |k| std::env::var(k).ok())?;
    plan.repeats = repeats;
    plan.seed = seed;
    plan.check = check;
    let report = harness::run(&plan)?;
    print!("{}", harness::format_table(&report.rows));
    println!("wrote {} files to {}", report.files.len(), plan.out_dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate {
            scenario,
            mode,
            repeats,
            seed,
            out,
            check,
        } => simulate(&scenario, mode.into(), repeats as usize, seed, out, check),
        Command::Presets { out } => harness::write_presets(&out).map(|files| {
            for f in files {
                println!("{}", f.display());
            }
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
