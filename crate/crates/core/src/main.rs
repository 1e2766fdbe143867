use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use strobe::config::ExperimentConfig;
use strobe::error::{Result, StrobeError};
use strobe::hf::solve_one;
use strobe::io::Array;
use strobe::models::ModelKind;
use strobe::offline::{load_model, run_compress, run_snapshots, run_train, trained_sizes, Setup, Summary};
use strobe::rom::OnlineRom;
use strobe::study::{run_study, Study, ALL_STUDIES};

#[derive(Parser)]
#[command(name = "strobe", version, about = "Registration-based space-time model reduction for 1D conservation laws")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Preset name or path to a JSON config.
    #[arg(long)]
    config: String,
    /// Container directory (defaults to the config's output).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the high-fidelity problem at one parameter.
    HfSolve {
        #[command(flatten)]
        exp: ExperimentArgs,
        #[arg(long, value_delimiter = ',')]
        mu: Vec<f64>,
        /// Write the solution coefficients as an array file.
        #[arg(long)]
        emit_solution: Option<PathBuf>,
    },
    /// Stage 1: training and test snapshots.
    Snapshots(ExperimentArgs),
    /// Stage 2: registration, RePOD and plain POD.
    Compress(ExperimentArgs),
    /// Stage 3: regressors, test spaces and empirical quadrature.
    TrainRom(ExperimentArgs),
    /// All three offline stages.
    Offline(ExperimentArgs),
    /// Online solve with a trained model.
    Online {
        #[arg(long)]
        model: ModelKind,
        #[arg(long, value_delimiter = ',')]
        mu: Vec<f64>,
        #[arg(long)]
        rom: PathBuf,
        /// Trial-space size (the largest trained one by default).
        #[arg(long)]
        n: Option<usize>,
        /// Write the reference-domain state as an array file.
        #[arg(long)]
        emit_solution: Option<PathBuf>,
    },
    /// Run one study (or `all`) on a trained container and write its CSV.
    Study {
        #[arg(long)]
        rom: PathBuf,
        #[arg(long, default_value = "all")]
        name: String,
    },
    /// Print the summary of a container, or the config schema.
    Report {
        #[arg(long, required_unless_present = "schema")]
        rom: Option<PathBuf>,
        #[arg(long)]
        schema: bool,
    },
}

fn setup(exp: &ExperimentArgs) -> Result<(Setup, PathBuf)> {
    let mut config = ExperimentConfig::load(&exp.config)?;
    if let Some(out) = &exp.out {
        config.output = out.clone();
    }
    let dir = config.output.clone();
    Ok((Setup::new(config)?, dir))
}

fn print_json(v: &impl serde::Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn write_vector(path: &PathBuf, v: Vec<f64>) -> Result<()> {
    let bytes = Array::vector(v).to_bytes()?;
    std::fs::write(path, bytes)?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::HfSolve { exp, mu, emit_solution } => {
            let (s, _) = setup(&exp)?;
            s.family.check_mu(&mu)?;
            let t0 = Instant::now();
            let sol = solve_one(&s.family, &s.disc, &mu, &s.config.hf)?;
            let wall_time = t0.elapsed().as_secs_f64();
            if let Some(path) = emit_solution {
                write_vector(&path, sol.w)?;
            }
            print_json(&json!({ "mu": mu, "report": sol.report, "wall_time": wall_time }))
        }
        Command::Snapshots(exp) => {
            let (s, dir) = setup(&exp)?;
            let mut c = s.container(&dir)?;
            run_snapshots(&s, &mut c)
        }
        Command::Compress(exp) => {
            let (s, dir) = setup(&exp)?;
            let mut c = s.container(&dir)?;
            run_compress(&s, &mut c)
        }
        Command::TrainRom(exp) => {
            let (s, dir) = setup(&exp)?;
            let mut c = s.container(&dir)?;
            print_json(&run_train(&s, &mut c)?)
        }
        Command::Offline(exp) => {
            let (s, dir) = setup(&exp)?;
            let mut c = s.container(&dir)?;
            run_snapshots(&s, &mut c)?;
            run_compress(&s, &mut c)?;
            print_json(&run_train(&s, &mut c)?)
        }
        Command::Online { model, mu, rom, n, emit_solution } => {
            let (s, c) = Setup::from_container(&rom)?;
            if s.config.model != model {
                return Err(StrobeError::InvalidArgument(format!(
                    "container holds a {} model, not {}",
                    s.config.model.name(),
                    model.name()
                )));
            }
            let n = match n {
                Some(n) => n,
                None => *trained_sizes(&c).last().ok_or_else(|| StrobeError::InvalidArgument("no trained model".into()))?,
            };
            let m = load_model(&s, &c, n)?;
            let online = OnlineRom::hyper_reduced(&m, &s.disc, &s.family)?;
            let r = online.solve(&mu)?;
            if let Some(path) = emit_solution {
                let mut w = vec![0.0; s.space().n_dofs()];
                for (z, a) in m.trial.iter().zip(&r.solution.alpha) {
                    w.iter_mut().zip(z).for_each(|(wi, zi)| *wi += a * zi);
                }
                write_vector(&path, w)?;
            }
            print_json(&json!({
                "alpha": r.solution.alpha,
                "a": r.map.a,
                "residual_norm": r.solution.residual_norm,
                "iterations": r.solution.iterations,
                "wall_time": r.wall_time,
            }))
        }
        Command::Study { rom, name } => {
            let (s, c) = Setup::from_container(&rom)?;
            let studies: Vec<Study> = if name == "all" { ALL_STUDIES.to_vec() } else { vec![name.parse()?] };
            for study in studies {
                let (path, _) = run_study(&s, &c, study)?;
                println!("{}", path.display());
            }
            Ok(())
        }
        Command::Report { rom, schema } => {
            if schema {
                return print_json(&ExperimentConfig::schema());
            }
            let rom = rom.ok_or_else(|| StrobeError::InvalidArgument("--rom is required".into()))?;
            let (_, c) = Setup::from_container(&rom)?;
            let summary: Summary = c.read_document("summary")?;
            print_json(&summary)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Some(n) = std::env::var("STROBE_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("STROBE_THREADS ignored: {e}");
        }
    }
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
