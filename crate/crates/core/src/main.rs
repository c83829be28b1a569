use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use jamsched::experiment::{self, ExperimentFile, OUTPUT_DIR_ENV};

#[derive(Parser)]
#[command(name = "jamsched", version, about = "Jamming-aware MEC offloading and scheduling simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment file and write its CSV and summary outputs.
    Run {
        config: PathBuf,
        /// Overrides `output_dir` from the file (also settable through JAMSCHED_OUTPUT_DIR).
        #[arg(long)]
        output_dir: Option<PathBuf>,
        #[arg(long, short)]
        quiet: bool,
    },
    /// Print the metric breakdown of one schedule on one instance.
    Eval {
        schedule: PathBuf,
        instance: PathBuf,
        /// Emit JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Parse and check an experiment file without running it.
    Validate { config: PathBuf },
}

fn code(c: i32) -> ExitCode {
    ExitCode::from(c as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            output_dir,
            quiet,
        } => {
            let env_dir = std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from);
            let dir = output_dir.or(env_dir);
            match experiment::run_experiment(&config, dir.as_deref()) {
                Ok(out) => {
                    if !quiet {
                        print!("{}", out.summary);
                    }
                    for p in &out.written {
                        eprintln!("wrote {}", p.display());
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    code(e.exit_code())
                }
            }
        }
        Command::Eval {
            schedule,
            instance,
            json,
        } => match experiment::evaluate_files(&schedule, &instance) {
            Ok(report) => {
                if json {
                    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
                } else {
                    print!("{}", experiment::render_eval(&report));
                }
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                code(e.exit_code())
            }
        },
        Command::Validate { config } => match ExperimentFile::load(Path::new(&config)) {
            Ok(f) => {
                println!(
                    "ok: {} sweep points x {} solvers x {} frames",
                    f.scenario.sweep.len(),
                    f.scenario.solvers.len(),
                    f.scenario.n_sim
                );
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                code(e.exit_code())
            }
        },
    }
}
