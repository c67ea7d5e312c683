use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use qdiff::cli::{error_json, parse_complex, parse_points, run_command, Command, Flags, OperatorSource};
use qdiff::{Error, Mode};

/// Linear q-difference operators: Newton polygons, factorization, formal
/// solutions, indices and evaluation. Prints JSON on stdout.
#[derive(Parser, Debug)]
#[command(name = "qdiff", version)]
struct Args {
    /// newton | factor | solve | index | eval
    command: String,
    /// Operator text, e.g. "q*z*S^2 - (1+z)*S + 1".
    expr: Option<String>,
    /// Read the operator from a file instead.
    #[arg(long)]
    file: Option<PathBuf>,
    #[arg(long, default_value = "2")]
    q: String,
    #[arg(long, default_value_t = 40)]
    order: i64,
    /// formal | convergent
    #[arg(long, default_value = "formal")]
    mode: String,
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    /// Write the Newton polygon as SVG (newton only).
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Evaluation points, comma separated (eval only).
    #[arg(long)]
    points: Option<String>,
}

fn run(args: Args) -> Result<serde_json::Value, Error> {
    let cmd = Command::parse(&args.command)?;
    let mode = match args.mode.as_str() {
        "formal" => Mode::Formal,
        "convergent" => Mode::Convergent,
        m => return Err(Error::InvalidArgument(format!("unknown mode `{m}`"))),
    };
    let flags = Flags {
        q: parse_complex(&args.q)?,
        order: args.order,
        mode,
        tol: args.tol,
        svg: args.svg,
        points: args
            .points
            .as_deref()
            .map(parse_points)
            .transpose()?
            .unwrap_or_default(),
    };
    let text = match (args.expr, args.file) {
        (Some(e), None) => e,
        (None, Some(path)) => {
            std::fs::read_to_string(&path).map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?
        }
        _ => return Err(Error::InvalidArgument("give exactly one of EXPR or --file".into())),
    };
    let ctx = flags.context()?;
    let source = OperatorSource::new(&text, &ctx)?;
    run_command(cmd, &source, &flags)
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(v) => {
            let text = serde_json::to_string_pretty(&v).expect("serializable");
            // A closed pipe is not an error of the computation.
            let _ = writeln!(std::io::stdout().lock(), "{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", error_json(&e));
            ExitCode::FAILURE
        }
    }
}
