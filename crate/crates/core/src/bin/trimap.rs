use std::path::PathBuf;
use std::process::ExitCode;

use clap::{error::ErrorKind, Parser, ValueEnum};
use trimap::data::{self, MatrixFormat};
use trimap::pipeline::{self, InputSource};
use trimap::{plot, RunConfig, TrimapError};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Csv,
    #[value(name = "raw-f32")]
    RawF32,
    /// Synthetic S-curve; `--input` is the number of points.
    Scurve,
}

/// Embed a dataset with triplet-constrained gradient descent.
#[derive(Debug, Parser)]
#[command(name = "trimap", version)]
struct Cli {
    /// Data file, or the point count with `--format scurve`.
    #[arg(long)]
    input: String,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// One integer label per line.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Embedding CSV (label appended as last column when known).
    #[arg(long)]
    out: Option<PathBuf>,
    /// SVG scatter plot (2-D only).
    #[arg(long)]
    plot: Option<PathBuf>,
    /// key=value metrics file.
    #[arg(long)]
    metrics: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    dims: usize,
    #[arg(long = "n-neighbors", default_value_t = 10)]
    n_neighbors: usize,
    #[arg(long = "nn-triplets", default_value_t = 5)]
    nn_triplets: usize,
    #[arg(long = "random-triplets", default_value_t = 5)]
    random_triplets: usize,
    #[arg(long, default_value_t = 500.0)]
    gamma: f64,
    #[arg(long, default_value_t = 1e-4)]
    delta: f64,
    #[arg(long, default_value_t = 400)]
    iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Brute-force neighbors instead of the forest (up to 20 000 points).
    #[arg(long = "exact-knn")]
    exact_knn: bool,
    #[arg(long = "pre-reduce", default_value_t = 100)]
    pre_reduce: usize,
    #[arg(long = "init-scale", default_value_t = 0.01)]
    init_scale: f64,
    #[arg(long = "learning-rate", default_value_t = 10.0)]
    learning_rate: f64,
    /// Worker threads (default: all cores). Output does not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long = "plot-width", default_value_t = 800)]
    plot_width: u32,
    #[arg(long = "plot-height", default_value_t = 800)]
    plot_height: u32,
}

impl Cli {
    fn config(&self) -> RunConfig {
        let mut c = RunConfig {
            m_neighbors: self.n_neighbors,
            m_prime: self.nn_triplets,
            r_random: self.random_triplets,
            gamma: self.gamma,
            delta: self.delta,
            out_dims: self.dims,
            iters: self.iters,
            seed: self.seed,
            exact_knn: self.exact_knn,
            pre_reduce_dims: self.pre_reduce,
            init_scale: self.init_scale,
            ..RunConfig::default()
        };
        c.optimizer.learning_rate = self.learning_rate;
        c
    }

    fn source(&self) -> Result<InputSource, TrimapError> {
        let file = |format| InputSource::File {
            path: PathBuf::from(&self.input),
            format,
            labels: self.labels.clone(),
        };
        Ok(match self.format {
            Format::Csv => file(MatrixFormat::Csv),
            Format::RawF32 => file(MatrixFormat::RawF32),
            Format::Scurve => InputSource::SCurve {
                n: self.input.parse().map_err(|_| {
                    TrimapError::InvalidConfig(format!(
                        "--input must be a point count for scurve, got {:?}",
                        self.input
                    ))
                })?,
            },
        })
    }
}

fn run(cli: &Cli) -> Result<(), TrimapError> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| TrimapError::InvalidConfig(format!("thread pool: {e}")))?;
    }
    let config = cli.config();
    let (x, labels) = cli.source()?.load(config.seed)?;
    let result = pipeline::run_pipeline(&config, x, labels)?;
    let m = &result.metrics;
    match m.nn_accuracy {
        Some(nn) => log::info!("(NN, GS) = ({nn:.3}, {:.3})", m.global_score),
        None => log::info!("GS = {:.3}", m.global_score),
    }
    if let Some(path) = &cli.out {
        data::write_embedding(&result.embedding, result.labels.as_ref(), path)?;
    }
    if let Some(path) = &cli.plot {
        plot::render_scatter(
            &result.embedding,
            result.labels.as_ref(),
            path,
            cli.plot_width,
            cli.plot_height,
        )?;
    }
    if let Some(path) = &cli.metrics {
        pipeline::write_metrics(&result, path)?;
    }
    if cli.out.is_none() && cli.metrics.is_none() && cli.plot.is_none() {
        print!("{}", pipeline::format_metrics(&result));
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            eprintln!("error: usage: {}", first.trim_start_matches("error: "));
            return ExitCode::from(2);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
