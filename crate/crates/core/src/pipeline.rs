//! End-to-end embedding run.
//!
//! Stages run in this order: PCA pre-reduction, k-NN (forest or exact),
//! per-point scales, triplet sampling and weighting, PCA initialization,
//! optimization and metrics. Errors are tagged with the stage that raised
//! them.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use crate::config::{RunConfig, EXACT_KNN_MAX_POINTS};
use crate::data::{self, DataMatrix, Labels, MatrixFormat};
use crate::error::{Result, TrimapError};
use crate::knn::{build_forest, exact_knn, query_all_knn};
use crate::linalg::{fit_pca, pre_reduce, Embedding};
use crate::metrics::{self, MetricsReport};
use crate::optimizer::{optimize, LossReport};
use crate::triplets::{compute_sigmas, sample_triplets, weight_triplets, SamplingPlan};

/// Where the input points come from.
#[derive(Clone, Debug, PartialEq)]
pub enum InputSource {
    File {
        path: PathBuf,
        format: MatrixFormat,
        labels: Option<PathBuf>,
    },
    /// Synthetic S-curve with `n` points (labels are position bins).
    SCurve { n: usize },
}

impl InputSource {
    pub fn load(&self, seed: u64) -> Result<(DataMatrix, Option<Labels>)> {
        match self {
            InputSource::File { path, format, labels } => {
                let x = data::load_matrix(path, *format)?;
                let labels = labels.as_ref().map(data::load_labels).transpose()?;
                Ok((x, labels))
            }
            InputSource::SCurve { n } => {
                if *n == 0 {
                    return Err(TrimapError::Empty("s-curve needs at least one point"));
                }
                let (x, labels) = data::make_s_curve(*n, seed);
                Ok((x, Some(labels)))
            }
        }
    }
}

/// Wall-clock time spent in each stage.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StageTimings {
    pub pre_reduce: Duration,
    pub knn: Duration,
    pub triplets: Duration,
    pub init: Duration,
    pub optimize: Duration,
    pub metrics: Duration,
    pub total: Duration,
}

impl StageTimings {
    pub fn stage_sum(&self) -> Duration {
        self.pre_reduce + self.knn + self.triplets + self.init + self.optimize + self.metrics
    }
}

#[derive(Clone, Debug)]
pub struct PipelineResult {
    pub embedding: Embedding,
    pub labels: Option<Labels>,
    pub metrics: MetricsReport,
    pub loss: LossReport,
    pub n_triplets: usize,
    /// Width of the data the embedding was computed from (after pre-reduction).
    pub working_dims: usize,
    pub timings: StageTimings,
    pub config: RunConfig,
}

/// Stream tags that keep the stage generators independent.
const FOREST_STREAM: u64 = 1;
const TRIPLET_STREAM: u64 = 2;
const METRICS_STREAM: u64 = 3;

fn stage_seed(seed: u64, stream: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn timed<T>(slot: &mut Duration, f: impl FnOnce() -> T) -> T {
    let start = Instant::now();
    let out = f();
    *slot = start.elapsed();
    out
}

pub fn run_pipeline(config: &RunConfig, x: DataMatrix, labels: Option<Labels>) -> Result<PipelineResult> {
    let start = Instant::now();
    config.validate().map_err(|e| e.in_stage("config"))?;
    let n = x.n();
    if n <= config.m_neighbors + 1 {
        return Err(TrimapError::TooFewPoints {
            n,
            required: config.m_neighbors + 1,
        }
        .in_stage("input"));
    }
    if let Some(labels) = &labels {
        labels.check_len(n).map_err(|e| e.in_stage("input"))?;
    }
    let mut timings = StageTimings::default();

    let x = timed(&mut timings.pre_reduce, || pre_reduce(&x, config.pre_reduce_dims))
        .map_err(|e| e.in_stage("pre-reduce"))?;
    if config.out_dims >= x.m() {
        return Err(TrimapError::InvalidConfig(format!(
            "out_dims = {} must be below the input dimension {}",
            config.out_dims,
            x.m()
        ))
        .in_stage("config"));
    }
    log::info!("embedding {} points of dimension {}", n, x.m());

    let k = config.knn_k().min(n - 1);
    let neighbors = timed(&mut timings.knn, || {
        if config.exact_knn && n <= EXACT_KNN_MAX_POINTS {
            exact_knn(&x, k)
        } else {
            let forest = build_forest(
                &x,
                config.knn_trees,
                config.knn_leaf_size,
                stage_seed(config.seed, FOREST_STREAM),
            )?;
            query_all_knn(&forest, &x, k, config.knn_search_factor)
        }
    })
    .map_err(|e| e.in_stage("knn"))?;
    log::info!("knn: {k} neighbors per point in {:?}", timings.knn);

    let triplets = timed(&mut timings.triplets, || {
        let sigmas = compute_sigmas(&neighbors)?;
        let set = sample_triplets(
            &x,
            &neighbors,
            &sigmas,
            SamplingPlan::from(config),
            stage_seed(config.seed, TRIPLET_STREAM),
        )?;
        weight_triplets(set, config.gamma, config.delta)
    })
    .map_err(|e| e.in_stage("triplets"))?;
    drop(neighbors);
    log::info!("triplets: {} sampled in {:?}", triplets.len(), timings.triplets);

    let y0 = timed(&mut timings.init, || {
        let (_, mut y) = fit_pca(&x, config.out_dims)?;
        y.scale(config.init_scale);
        Ok::<_, TrimapError>(y)
    })
    .map_err(|e| e.in_stage("init"))?;

    let (embedding, loss) =
        timed(&mut timings.optimize, || optimize(&triplets, y0, config)).map_err(|e| e.in_stage("optimize"))?;
    log::info!(
        "optimize: loss {:.6} -> {:.6} in {:?}",
        loss.history.first().copied().unwrap_or(loss.total),
        loss.total,
        timings.optimize
    );

    let metrics = timed(&mut timings.metrics, || {
        metrics::evaluate(&x, &embedding, labels.as_ref(), stage_seed(config.seed, METRICS_STREAM))
    })
    .map_err(|e| e.in_stage("metrics"))?;
    timings.total = start.elapsed();

    Ok(PipelineResult {
        embedding,
        labels,
        metrics,
        loss,
        n_triplets: triplets.len(),
        working_dims: x.m(),
        timings,
        config: config.clone(),
    })
}

fn ms(d: Duration) -> f64 {
    (d.as_secs_f64() * 1e3 * 1e3).round() / 1e3
}

/// Renders the metrics as `key=value` lines.
///
/// Keys, in order: `mre`, `mre_pca`, `global_score`, `nn_accuracy` (only with
/// labels), `nn_sample` (only when subsampled), `n`, `d`, `seed`, then the
/// `time_*_ms` entries.
pub fn format_metrics(result: &PipelineResult) -> String {
    let m = &result.metrics;
    let t = &result.timings;
    let mut out = String::new();
    writeln!(out, "mre={}", m.mre).unwrap();
    writeln!(out, "mre_pca={}", m.mre_pca).unwrap();
    writeln!(out, "global_score={}", m.global_score).unwrap();
    if let Some(acc) = m.nn_accuracy {
        writeln!(out, "nn_accuracy={acc}").unwrap();
    }
    if let Some(sample) = m.nn_sample {
        writeln!(out, "nn_sample={sample}").unwrap();
    }
    writeln!(out, "n={}", result.embedding.n()).unwrap();
    writeln!(out, "d={}", result.embedding.d()).unwrap();
    writeln!(out, "seed={}", result.config.seed).unwrap();
    writeln!(out, "time_total_ms={}", ms(t.total)).unwrap();
    writeln!(out, "time_knn_ms={}", ms(t.knn)).unwrap();
    writeln!(out, "time_triplets_ms={}", ms(t.triplets)).unwrap();
    writeln!(out, "time_opt_ms={}", ms(t.optimize)).unwrap();
    writeln!(out, "time_pca_ms={}", ms(t.pre_reduce + t.init)).unwrap();
    writeln!(out, "time_metrics_ms={}", ms(t.metrics)).unwrap();
    out
}

pub fn write_metrics(result: &PipelineResult, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_metrics(result)).map_err(|source| TrimapError::Write {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses a `key=value` metrics document back into pairs.
pub fn parse_metrics(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}
