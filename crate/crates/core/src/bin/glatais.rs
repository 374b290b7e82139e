use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use glatais::ggm::{generate_er_graph, make_precision, sample_observations};
use glatais::harness::{
    derive_seed, figure_svg, results_csv, run_sweep, summary_csv, ExperimentConfig, SweepMode,
};
use glatais::mean::{BenchmarkMean, PriorSpec};
use glatais::runner::{run, GlAtaisConfig};
use glatais::Error;

#[derive(Parser)]
#[command(name = "glatais", version, about = "Sparse Gaussian graphical model \
estimation with a time-varying mean, plus the accompanying experiment sweeps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    /// sweep the number of observations R at fixed particle count
    ObsSweep,
    /// sweep the number of particles P at fixed observation count
    ParticleSweep,
}

#[derive(Subcommand)]
enum Command {
    /// Run a full experiment sweep and write results.csv, summary.csv and
    /// figure.svg into the output directory.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        mode: Mode,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one small synthetic problem end to end and print the per-iteration
    /// trace.
    Demo {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Parse and validate a config file without running anything.
    ValidateConfig {
        #[arg(long)]
        config: PathBuf,
    },
}

fn load_config(path: &PathBuf) -> Result<ExperimentConfig, Error> {
    let text = std::fs::read_to_string(path)?;
    let cfg: ExperimentConfig =
        serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

fn is_config_error(e: &Error) -> bool {
    matches!(e, Error::Config(_) | Error::Io(_))
}

fn run_command(cmd: Command) -> Result<(), Error> {
    match cmd {
        Command::Run { config, mode, out } => {
            let cfg = load_config(&config)?;
            let mode = match mode {
                Mode::ObsSweep => SweepMode::ObsSweep,
                Mode::ParticleSweep => SweepMode::ParticleSweep,
            };
            let result = run_sweep(&cfg, mode)?;
            std::fs::create_dir_all(&out)?;
            std::fs::write(out.join("results.csv"), results_csv(&result.rows)?)?;
            std::fs::write(out.join("summary.csv"), summary_csv(&result.aggregates)?)?;
            std::fs::write(out.join("figure.svg"), figure_svg(&result)?)?;
            println!(
                "wrote {} result rows for {} grid points to {}",
                result.rows.len(),
                result.aggregates.len() / cfg.methods.len().max(1),
                out.display()
            );
            Ok(())
        }
        Command::Demo { seed } => demo(seed),
        Command::ValidateConfig { config } => {
            let cfg = load_config(&config)?;
            println!(
                "config ok: n={} reps={} K={} K0={} lambda={} methods={}",
                cfg.n,
                cfg.reps,
                cfg.k,
                cfg.k0,
                cfg.lambda,
                cfg.methods
                    .iter()
                    .map(|m| m.name())
                    .collect::<Vec<_>>()
                    .join(" ")
            );
            Ok(())
        }
    }
}

fn demo(seed: u64) -> Result<(), Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0));
    let graph = generate_er_graph(10, 0.1, &mut rng)?;
    let theta_true = make_precision(&graph, 0.1)?;
    let model = BenchmarkMean::new(PriorSpec::ImproperUniform);
    let phi_true = nalgebra::dvector![0.5, -0.3, 0.8, 1.2];
    let timestamps: Vec<f64> = (0..60).map(|i| 4.0 * i as f64 / 59.0).collect();
    let obs = sample_observations(&theta_true, &model, &phi_true, &timestamps, &mut rng)?;

    println!("demo: n=10 R=60 true edges={:?}", graph.edges());
    println!("true phi = {:?}", phi_true.as_slice());

    let cfg = GlAtaisConfig::new(15, 500, 0.1, BenchmarkMean::PARAMS);
    let (theta, phi_map, trace) = run(&obs, &model, &cfg, &mut rng)?;
    println!("initial log-posterior = {:.4}", trace.initial_value);
    for (k, rec) in trace.iterations.iter().enumerate() {
        println!(
            "iter {k:2}  accepted={}  best={:.4}  candidate={:.4}  ess={:.1}",
            rec.accepted, rec.best_log_posterior, rec.candidate_log_posterior, rec.ess
        );
    }
    println!("estimated phi = {:?}", phi_map.as_slice());
    let est = glatais::eval::support_from_precision(
        &theta.into_matrix(),
        &glatais::eval::ThresholdSpec::default(),
    );
    let truth = glatais::eval::EdgeSet::from_graph(&graph);
    println!("estimated edges = {:?}", est.edges());
    println!("F-score = {:.3}", glatais::eval::f_score(&est, &truth)?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run_command(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if is_config_error(&e) {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
