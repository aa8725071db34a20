//! Command-line front end: `solve`, `validate` and `converge` over
//! problem-spec files.

pub mod commands;
pub mod manifest;
pub mod spec;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

pub use commands::{EXIT_CONFIG, EXIT_OK, EXIT_VALIDATION_FAILED};

#[derive(Parser, Debug)]
#[command(name = "obstop", version, about = "Dual-engine optimal stopping solver")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Cap the worker-thread count. Results never depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Engine {
    Pide,
    Mc,
    Both,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum SuiteCheck {
    Crossval,
    Apriori,
    Strict,
    Growth,
    Monotone,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Axis {
    Dt,
    Dx,
    Paths,
    Quad,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Solve the problem with one or both engines and emit CSV surfaces.
    Solve {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, value_enum, default_value_t = Engine::Both)]
        engine: Engine,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed from the spec file.
        #[arg(long)]
        seed: Option<u64>,
        /// Also dump the simulated paths (debugging).
        #[arg(long)]
        dump_paths: bool,
    },
    /// Run validation checks; exit 0 iff all selected checks pass.
    Validate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Subset of checks, comma separated; defaults to the full suite.
        #[arg(long, value_enum, value_delimiter = ',')]
        suite: Vec<SuiteCheck>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Refinement study along one discretization axis.
    Converge {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        axis: Axis,
        #[arg(long, default_value_t = 4)]
        levels: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
}

/// Entry point shared by the binary and the test suites. Returns the
/// process exit code.
pub fn run(cli: Cli) -> i32 {
    let threads = cli.threads.unwrap_or(0);
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: cannot build thread pool: {e}");
            return EXIT_CONFIG;
        }
    };
    pool.install(|| dispatch(cli.command))
}

/// Convenience wrapper parsing argv-style arguments.
pub fn run_args<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(cli),
        Err(e) => {
            // clap help/version are not errors.
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                EXIT_OK
            } else {
                let _ = e.print();
                EXIT_CONFIG
            }
        }
    }
}

fn dispatch(command: Command) -> i32 {
    let result = match command {
        Command::Solve { spec, engine, out, seed, dump_paths } => {
            let command_line = format!("solve --spec {} --engine {engine:?}", spec.display());
            match spec::load_spec(&spec, seed) {
                Err(e) => {
                    eprintln!("error: {}: {e}", spec.display());
                    return EXIT_CONFIG;
                }
                Ok(loaded) => {
                    commands::cmd_solve(&loaded, engine, &out, dump_paths, command_line)
                }
            }
        }
        Command::Validate { spec, out, suite, seed } => {
            let suite = if suite.is_empty() {
                vec![
                    SuiteCheck::Crossval,
                    SuiteCheck::Apriori,
                    SuiteCheck::Strict,
                    SuiteCheck::Growth,
                    SuiteCheck::Monotone,
                ]
            } else {
                suite
            };
            let command_line =
                format!("validate --spec {} --suite {suite:?}", spec.display());
            match spec::load_spec(&spec, seed) {
                Err(e) => {
                    eprintln!("error: {}: {e}", spec.display());
                    return EXIT_CONFIG;
                }
                Ok(loaded) => commands::cmd_validate(&loaded, &suite, &out, command_line),
            }
        }
        Command::Converge { spec, out, axis, levels, seed } => {
            let command_line =
                format!("converge --spec {} --axis {axis:?} --levels {levels}", spec.display());
            match spec::load_spec(&spec, seed) {
                Err(e) => {
                    eprintln!("error: {}: {e}", spec.display());
                    return EXIT_CONFIG;
                }
                Ok(loaded) => commands::cmd_converge(&loaded, axis, levels, &out, command_line),
            }
        }
    };
    match result {
        Ok(outcome) => outcome.exit_code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
    }
}
