use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use secto_core::scenario::{exit_code, load_scenario, run, Kind, Report};
use secto_core::Error;

#[derive(Parser)]
#[command(name = "secto", version, about = "Run sectional-operator scenarios and write JSON reports")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sectional identity, symmetry and Bianchi checks for an operator.
    Verify(RunArgs),
    /// Predicted versus dense spectrum of the built operator.
    Spectrum(RunArgs),
    /// Euler-flow integration with conserved-quantity diagnostics.
    Flow(RunArgs),
    /// Formal curvature, Berger certificate and metric realization.
    Holonomy(RunArgs),
    /// Projectively equivalent metric pairs.
    Projective(RunArgs),
    /// Joint sectional system for two pairs.
    Uniqueness(RunArgs),
    /// List tolerance names and defaults for a scenario kind.
    Tolerances { kind: String },
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file; repeat to run several.
    #[arg(long, required = true, num_args = 1..)]
    input: Vec<PathBuf>,
    /// Report file. With several inputs the file holds a JSON array in input order.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the seed in every scenario.
    #[arg(long)]
    seed: Option<u64>,
    /// Run the scenarios concurrently.
    #[arg(long)]
    parallel: bool,
    /// Record wall-clock runtime in the report (the JSON is then no longer reproducible).
    #[arg(long)]
    timings: bool,
}

struct Outcome {
    path: PathBuf,
    result: Result<Report, Error>,
    seconds: f64,
}

fn run_one(kind: Kind, path: &Path, seed: Option<u64>, timings: bool) -> Outcome {
    let start = Instant::now();
    let result = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", path.display())))
        .and_then(|text| load_scenario(&text))
        .and_then(|mut sc| {
            if sc.kind != kind {
                return Err(Error::Schema {
                    path: "$.kind".into(),
                    message: format!("scenario is `{}` but the command is `{}`", sc.kind, kind.command()),
                });
            }
            if let Some(s) = seed {
                sc.seed = s;
            }
            run(&sc)
        })
        .map(|mut r| {
            if timings {
                r.runtime = Some(start.elapsed().as_secs_f64());
            }
            r
        });
    Outcome { path: path.to_path_buf(), result, seconds: start.elapsed().as_secs_f64() }
}

fn execute(kind: Kind, args: RunArgs) -> u8 {
    let outcomes: Vec<Outcome> = if args.parallel {
        std::thread::scope(|s| {
            let handles: Vec<_> =
                args.input.iter().map(|p| s.spawn(move || run_one(kind, p, args.seed, args.timings))).collect();
            handles.into_iter().map(|h| h.join().expect("scenario thread panicked")).collect()
        })
    } else {
        args.input.iter().map(|p| run_one(kind, p, args.seed, args.timings)).collect()
    };

    // The summary goes to stdout unless stdout carries the JSON.
    let say = |line: String| {
        if args.out.is_some() {
            println!("{line}");
        } else {
            eprintln!("{line}");
        }
    };
    let mut code = 0;
    let mut reports = Vec::new();
    for o in &outcomes {
        let c = exit_code(&o.result);
        code = code.max(c);
        match &o.result {
            Ok(r) => {
                let status = if r.pass { "PASS".to_string() } else { format!("FAIL [{}]", r.failed().join(", ")) };
                say(format!("{} {}: {status} ({:.3} s)", kind.command(), o.path.display(), o.seconds));
                reports.push(r);
            }
            Err(e) => say(format!("{} {}: error: {e}", kind.command(), o.path.display())),
        }
    }

    let json = if args.input.len() == 1 {
        reports.first().map(|r| r.to_json())
    } else {
        Some(serde_json::to_string_pretty(&reports).expect("reports serialize") + "\n")
    };
    if let Some(json) = json {
        match &args.out {
            Some(path) => {
                if let Err(e) = std::fs::write(path, json) {
                    eprintln!("cannot write {}: {e}", path.display());
                    return 1.max(code as u8);
                }
            }
            None => print!("{json}"),
        }
    }
    code as u8
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let kind = match cli.command {
        Command::Verify(a) => return ExitCode::from(execute(Kind::SectionalVerify, a)),
        Command::Spectrum(a) => return ExitCode::from(execute(Kind::Spectrum, a)),
        Command::Flow(a) => return ExitCode::from(execute(Kind::Flow, a)),
        Command::Holonomy(a) => return ExitCode::from(execute(Kind::Holonomy, a)),
        Command::Projective(a) => return ExitCode::from(execute(Kind::Projective, a)),
        Command::Uniqueness(a) => return ExitCode::from(execute(Kind::Uniqueness, a)),
        Command::Tolerances { kind } => kind,
    };
    let Some(k) = Kind::ALL.into_iter().find(|k| k.as_str() == kind || k.command() == kind) else {
        eprintln!("unknown kind `{kind}`");
        return ExitCode::from(2);
    };
    for (name, value, meaning) in k.tolerance_defaults() {
        println!("{name:<20} {value:<8e} {meaning}");
    }
    ExitCode::SUCCESS
}
