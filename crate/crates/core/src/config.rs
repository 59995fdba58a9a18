use crate::error::{Result, TrimapError};

/// Hyperparameters for one embedding run.
///
/// `Default` gives 10 neighbors, 5 triplets per neighbor, 5 random triplets,
/// `gamma = 500`, `delta = 1e-4` and 400 iterations.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    /// Nearest neighbors used as the closer point of a triplet.
    pub m_neighbors: usize,
    /// Triplets sampled per nearest neighbor.
    pub m_prime: usize,
    /// Fully random triplets per point.
    pub r_random: usize,
    /// Scale of the log transform applied to triplet weights.
    pub gamma: f64,
    /// Additive floor inside the weight transform.
    pub delta: f64,
    pub out_dims: usize,
    pub iters: usize,
    /// First iteration that uses the final momentum.
    pub momentum_switch_iter: usize,
    pub seed: u64,
    /// Inputs wider than this are PCA-reduced before anything else.
    pub pre_reduce_dims: usize,
    pub knn_trees: usize,
    pub knn_leaf_size: usize,
    /// Neighbor-of-neighbor expansion kicks in when a point's candidate pool is
    /// smaller than `knn_search_factor * k`.
    pub knn_search_factor: usize,
    /// Use the brute-force scan instead of the forest (only honored up to
    /// [`EXACT_KNN_MAX_POINTS`] points).
    pub exact_knn: bool,
    /// Multiplier applied to the PCA initialization.
    pub init_scale: f64,
    pub optimizer: OptimizerParams,
}

pub const EXACT_KNN_MAX_POINTS: usize = 20_000;

/// Step-size and momentum constants for delta-bar-delta descent.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerParams {
    /// Base step is `learning_rate * n / |T|`.
    pub learning_rate: f64,
    pub initial_momentum: f64,
    pub final_momentum: f64,
    pub gain_increment: f64,
    pub gain_decay: f64,
    pub gain_min: f64,
    pub gain_max: f64,
    /// Weight of the previous value in the exponentially smoothed gradient.
    pub grad_smoothing: f64,
}

impl Default for OptimizerParams {
    fn default() -> Self {
        OptimizerParams {
            learning_rate: 10.0,
            initial_momentum: 0.5,
            final_momentum: 0.8,
            gain_increment: 0.2,
            gain_decay: 0.8,
            gain_min: 0.01,
            gain_max: 100.0,
            grad_smoothing: 0.9,
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            m_neighbors: 10,
            m_prime: 5,
            r_random: 5,
            gamma: 500.0,
            delta: 1e-4,
            out_dims: 2,
            iters: 400,
            momentum_switch_iter: 250,
            seed: 0,
            pre_reduce_dims: 100,
            knn_trees: 20,
            knn_leaf_size: 64,
            knn_search_factor: 3,
            exact_knn: false,
            init_scale: 0.01,
            optimizer: OptimizerParams::default(),
        }
    }
}

impl RunConfig {
    /// Triplets generated per point.
    pub fn triplets_per_point(&self) -> usize {
        self.m_neighbors * self.m_prime + self.r_random
    }

    /// Neighbors fetched once and shared by the scale estimate (needs 6) and
    /// triplet sampling (needs `m_neighbors`).
    pub fn knn_k(&self) -> usize {
        self.m_neighbors.max(6) + 1
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("m_neighbors", self.m_neighbors),
            ("m_prime", self.m_prime),
            ("out_dims", self.out_dims),
            ("iters", self.iters),
            ("pre_reduce_dims", self.pre_reduce_dims),
            ("knn_trees", self.knn_trees),
            ("knn_leaf_size", self.knn_leaf_size),
            ("knn_search_factor", self.knn_search_factor),
        ];
        for (name, value) in counts {
            if value == 0 {
                return Err(TrimapError::InvalidConfig(format!("{name} must be at least 1")));
            }
        }
        let positive = [
            ("gamma", self.gamma),
            ("delta", self.delta),
            ("init_scale", self.init_scale),
            ("learning_rate", self.optimizer.learning_rate),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(TrimapError::InvalidConfig(format!(
                    "{name} must be positive and finite, got {value}"
                )));
            }
        }
        let o = &self.optimizer;
        if !(o.gain_min > 0.0 && o.gain_min <= o.gain_max) {
            return Err(TrimapError::InvalidConfig(format!(
                "gain bounds [{}, {}] are not a valid interval",
                o.gain_min, o.gain_max
            )));
        }
        if self.out_dims >= self.pre_reduce_dims {
            return Err(TrimapError::InvalidConfig(format!(
                "out_dims = {} must be below pre_reduce_dims = {}",
                self.out_dims, self.pre_reduce_dims
            )));
        }
        Ok(())
    }
}
