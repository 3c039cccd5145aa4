use clap::{Parser, Subcommand};
use hmod_cli::trace::{self, TraceRequest};
use hmod_cli::{builtin, list_scenarios, run, RunOptions, Scenario};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "hmod", version, about = "Moduli of legendrian curve families in the Heisenberg group")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file or a built-in scenario by name.
    Run {
        scenario: String,
        /// Quadrature tolerance (overrides the scenario).
        #[arg(long)]
        tol: Option<f64>,
        /// Tracer tolerance (overrides the scenario).
        #[arg(long)]
        rk_tol: Option<f64>,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Write the convergence table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Downgrade a failed B2 precondition to a warning.
        #[arg(long)]
        override_b2_check: bool,
        /// Skip the convergence table.
        #[arg(long)]
        no_convergence: bool,
    },
    /// List built-in scenarios.
    List,
    /// Print a built-in scenario.
    Show { name: String },
    /// Trace a horizontal trajectory and write it as CSV.
    Trace {
        /// Coefficient q(z, zb, t).
        #[arg(long)]
        q: String,
        /// Starting point x,y,t.
        #[arg(long, allow_hyphen_values = true)]
        start: String,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        orientation: f64,
        #[arg(long, default_value_t = 1e-9)]
        rk_tol: f64,
        #[arg(long, default_value_t = 10.0)]
        max_length: f64,
        /// Stop where this expression is not positive.
        #[arg(long)]
        exclusions: Option<String>,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn input_error(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(2)
}

fn write(path: &Path, text: &str) -> Result<(), ExitCode> {
    std::fs::write(path, text).map_err(|e| input_error(format!("{}: {e}", path.display())))
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { scenario, tol, rk_tol, report, csv, override_b2_check, no_convergence } => {
            let s = match Scenario::resolve(&scenario) {
                Ok(s) => s,
                Err(e) => return input_error(e),
            };
            let opts = RunOptions { tol, rk_tol, override_b2_check, skip_convergence: no_convergence };
            let r = match run(&s, &opts) {
                Ok(r) => r,
                Err(e) => return input_error(e),
            };
            let json = r.to_json();
            match &report {
                Some(path) => {
                    if let Err(code) = write(path, &json) {
                        return code;
                    }
                    for c in &r.checks {
                        let value = c.value.map_or("-".to_string(), |v| format!("{v:e}"));
                        println!("{} {} value={} threshold={:e}", if c.pass { "PASS" } else { "FAIL" }, c.name, value, c.threshold);
                    }
                    if let Some(m) = r.modulus {
                        println!("modulus {m:.15e} ± {:e}", r.error_estimate.unwrap_or(f64::NAN));
                    }
                }
                None => println!("{json}"),
            }
            if let Some(path) = &csv {
                if let Err(code) = write(path, &r.convergence_csv()) {
                    return code;
                }
            }
            for c in r.checks.iter().filter(|c| !c.pass) {
                eprintln!("check failed: {}{}", c.name, c.detail.as_ref().map_or(String::new(), |d| format!(" ({d})")));
            }
            if r.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Command::List => {
            for name in list_scenarios() {
                println!("{name}");
            }
            ExitCode::SUCCESS
        }
        Command::Show { name } => match builtin(&name) {
            Some(text) => {
                print!("{text}");
                ExitCode::SUCCESS
            }
            None => input_error(format!("no built-in scenario `{name}`")),
        },
        Command::Trace { q, start, orientation, rk_tol, max_length, exclusions, out } => {
            let req = TraceRequest { q, start, orientation, rk_tol, max_length, exclusions };
            let path = match trace::trace(&req) {
                Ok(Ok(p)) => p,
                Ok(Err(e)) => {
                    eprintln!("error: {}: {e}", e.name());
                    return ExitCode::from(1);
                }
                Err(e) => return input_error(e),
            };
            let csv = trace::to_csv(&path);
            match &out {
                Some(p) => {
                    if let Err(code) = write(p, &csv) {
                        return code;
                    }
                    eprintln!("{} samples, length {:.6}, stop {:?}", path.samples.len(), path.length(), path.stop);
                }
                None => print!("{csv}"),
            }
            ExitCode::SUCCESS
        }
    }
}
