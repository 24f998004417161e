use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use krausim::config::{Method, Prepared, RunConfig};
use krausim::pipeline;
use krausim::{Error, Result};

#[derive(Parser)]
#[command(name = "krausim", version, about = "Kraus-series simulation of Lindblad dynamics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Report which commutator case the system falls into.
    Classify(Common),
    /// Run one method and write the trajectory CSV.
    Simulate(Common),
    /// Build the Kraus circuits for every time and write the dump JSON.
    Circuits(Common),
    /// Print truncation orders and error bounds.
    Bound(Common),
    /// Run all four methods and compare them.
    Validate(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Directory for output files; stdout is used when omitted.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    method: Option<Method>,
    #[arg(long)]
    epsilon: Option<f64>,
}

impl Common {
    fn load(&self) -> Result<Prepared> {
        let mut cfg = RunConfig::read(&self.config).map_err(|e| match e {
            Error::Io(io) => Error::Config(format!("cannot read {}: {io}", self.config.display())),
            other => other,
        })?;
        if let Some(j) = self.jobs {
            cfg.jobs = j;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(m) = self.method {
            cfg.method = m;
        }
        if let Some(e) = self.epsilon {
            cfg.epsilon = e;
        }
        cfg.prepare()
    }
}

/// Collected outputs, written only after every computation succeeded.
struct Outputs {
    files: Vec<(String, String)>,
    stdout: String,
}

impl Outputs {
    fn new() -> Self {
        Self { files: vec![], stdout: String::new() }
    }

    fn file(&mut self, name: &str, body: String) {
        self.files.push((name.to_string(), body));
    }

    fn emit(self, out_dir: Option<&Path>) -> Result<()> {
        match out_dir {
            Some(dir) => {
                std::fs::create_dir_all(dir)?;
                for (name, body) in &self.files {
                    std::fs::write(dir.join(name), body)?;
                }
                print!("{}", self.stdout);
            }
            None => {
                print!("{}", self.stdout);
                for (name, body) in &self.files {
                    if self.files.len() > 1 {
                        println!("# {name}");
                    }
                    print!("{body}");
                }
            }
        }
        Ok(())
    }
}

fn execute(cli: Cli) -> Result<bool> {
    let mut out = Outputs::new();
    let (common, pass) = match &cli.command {
        Command::Classify(c) => {
            let prep = c.load()?;
            let cls = pipeline::classify_model(&prep.model)?;
            out.file("classification.json", serde_json::to_string_pretty(&cls)? + "\n");
            if let Some((cond, residual)) = cls.failure {
                out.stdout.push_str(&format!("unsupported: condition {cond} fails with residual {residual:e}\n"));
            }
            (c, true)
        }
        Command::Simulate(c) => {
            let prep = c.load()?;
            let run = pipeline::run(&prep, prep.config.method)?;
            out.file("trajectory.csv", run.trajectory.to_csv()?);
            if let Some(dump) = &run.dump {
                if c.out_dir.is_some() {
                    out.file("circuits.json", dump.to_json()? + "\n");
                }
            }
            (c, true)
        }
        Command::Circuits(c) => {
            let prep = c.load()?;
            out.file("circuits.json", pipeline::build_dump(&prep)?.to_json()? + "\n");
            (c, true)
        }
        Command::Bound(c) => {
            let prep = c.load()?;
            out.file("bound.csv", pipeline::bound_csv(&pipeline::bound_table(&prep)?)?);
            (c, true)
        }
        Command::Validate(c) => {
            let prep = c.load()?;
            let (report, runs) = pipeline::validate_cross(&prep)?;
            out.stdout.push_str(&report.summary());
            if c.out_dir.is_some() {
                out.file("validation.json", serde_json::to_string_pretty(&report)? + "\n");
                for (m, r) in Method::ALL.iter().zip(&runs) {
                    out.file(&format!("trajectory_{}.csv", m.as_str()), r.trajectory.to_csv()?);
                    if let Some(dump) = &r.dump {
                        out.file("circuits.json", dump.to_json()? + "\n");
                    }
                }
            }
            (c, report.pass)
        }
    };
    out.emit(common.out_dir.as_deref())?;
    Ok(pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(4),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
