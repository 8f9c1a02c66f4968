use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use qrel::error::Error;
use qrel::qdsl::{execute, parse, plan, render_error, Engine, ExecOptions, PlanConfig, Query, QueryError};
use qrel::qops::{Iterations, SimilarityLevel};
use qrel::qstate::{DEFAULT_MAX_QUBITS, HARD_MAX_QUBITS};

#[derive(Parser)]
#[command(name = "qrel", version, about = "Run relational queries on a simulated quantum register")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a query file and print the result document.
    Run(RunArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Quantum,
    Classical,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(clap::Args)]
struct RunArgs {
    query_file: PathBuf,
    #[arg(long, value_enum, default_value = "quantum")]
    mode: Mode,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// `auto` or a fixed iteration count.
    #[arg(long, default_value = "auto", value_parser = parse_iterations)]
    iterations: Iterations,
    #[arg(long = "similarity-level", default_value = "1", value_parser = parse_level)]
    similarity_level: SimilarityLevel,
    #[arg(long, value_enum, default_value = "on")]
    postselect: Switch,
    #[arg(long = "max-qubits", default_value_t = DEFAULT_MAX_QUBITS,
          value_parser = clap::builder::RangedU64ValueParser::<usize>::new().range(1..=HARD_MAX_QUBITS as u64))]
    max_qubits: usize,
    /// Write the document here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_iterations(s: &str) -> Result<Iterations, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(Iterations::Auto);
    }
    s.parse::<usize>().map(Iterations::Fixed).map_err(|_| format!("expected `auto` or a count, got `{s}`"))
}

fn parse_level(s: &str) -> Result<SimilarityLevel, String> {
    match s {
        "1" => Ok(SimilarityLevel::Real),
        "2" => Ok(SimilarityLevel::Complex),
        _ => Err(format!("expected 1 or 2, got `{s}`")),
    }
}

fn run(args: &RunArgs, engine: Engine, options: &ExecOptions) -> (String, u8) {
    let mut query: Option<Query> = None;
    let result = (|| -> Result<String, QueryError> {
        let path = args.query_file.display().to_string();
        let source = std::fs::read_to_string(&args.query_file)
            .map_err(|e| Error::File { path, message: e.to_string() })?;
        let q = parse(&source)?;
        query = Some(q.clone());
        let base_dir = args.query_file.parent().map(Path::to_path_buf).unwrap_or_default();
        let config = PlanConfig { max_qubits: args.max_qubits, engine, base_dir };
        let p = plan(&q, &config)?;
        Ok(execute(&p, options)?.render())
    })();
    match result {
        Ok(doc) => (doc, 0),
        Err(e) => {
            eprintln!("qrel: {e}");
            (render_error(engine, options, query.as_ref(), &e), e.exit_code() as u8)
        }
    }
}

fn main() -> ExitCode {
    let Cli { command: Command::Run(args) } = Cli::parse();
    let engine = match args.mode {
        Mode::Quantum => Engine::Quantum,
        Mode::Classical => Engine::Classical,
        Mode::Both => Engine::Both,
    };
    let options = ExecOptions {
        seed: args.seed,
        iterations: args.iterations,
        level: args.similarity_level,
        postselect: matches!(args.postselect, Switch::On),
        ..ExecOptions::default()
    };
    let (doc, code) = run(&args, engine, &options);
    match &args.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, &doc) {
                eprintln!("qrel: cannot write {}: {e}", path.display());
                return ExitCode::from(2);
            }
        }
        None => print!("{doc}"),
    }
    ExitCode::from(code)
}
