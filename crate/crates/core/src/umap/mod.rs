//! Nonlinear dimensionality reduction: fuzzy neighbourhood graph plus
//! cross-entropy layout optimization.

mod curve;
mod fuzzy;
mod layout;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::neighbors::{exact_knn, NeighborError};

pub use curve::{fit_curve, target_curve, CurveParams};
pub use fuzzy::{
    calibrate_smooth_knn, directed_memberships, fuzzy_simplicial_set, fuzzy_union, membership_sum,
    DirectedMemberships, FuzzyGraph, SmoothKnn, SIGMA_MAX, SIGMA_MIN,
};
pub use layout::{optimize_layout, LayoutResult, CLIP};

#[derive(Debug, thiserror::Error)]
pub enum UmapError {
    #[error("invalid layout config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Neighbor(#[from] NeighborError),
    #[error("kernel fit for min_dist {min_dist} did not converge (rms {rms:.5})")]
    CurveFit { min_dist: f64, rms: f64 },
    #[error("layout diverged to non-finite coordinates")]
    NonFinite,
}

/// Corpus size from which the longer epoch budget applies.
pub const LARGE_CORPUS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Init {
    Gaussian { sigma: f64 },
    Uniform { half_width: f64 },
}

impl Default for Init {
    fn default() -> Self {
        Init::Gaussian { sigma: 1e-4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LayoutConfig {
    pub n_neighbors: usize,
    pub min_dist: f64,
    pub n_components: usize,
    /// `None` picks 200, or 500 from [`LARGE_CORPUS`] points up.
    pub n_epochs: Option<usize>,
    pub learning_rate: f64,
    pub negative_sample_rate: usize,
    pub seed: u64,
    pub init: Init,
    /// Unsynchronized multi-threaded SGD; results then vary run to run.
    pub parallel: bool,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        LayoutConfig {
            n_neighbors: 15,
            min_dist: 0.1,
            n_components: 2,
            n_epochs: None,
            learning_rate: 1.0,
            negative_sample_rate: 5,
            seed: 0,
            init: Init::default(),
            parallel: false,
        }
    }
}

impl LayoutConfig {
    pub fn epochs_for(&self, n_points: usize) -> usize {
        self.n_epochs.unwrap_or(if n_points >= LARGE_CORPUS { 500 } else { 200 })
    }

    /// Checks the config against input dimensionality `dim`.
    pub fn validate(&self, dim: usize) -> Result<(), UmapError> {
        let bad = |m: String| Err(UmapError::InvalidConfig(m));
        if self.n_neighbors < 2 {
            return bad(format!("n_neighbors must be >= 2, got {}", self.n_neighbors));
        }
        if !(self.min_dist > 0.0 && self.min_dist <= 1.0) {
            return bad(format!("min_dist {} outside (0, 1]", self.min_dist));
        }
        if self.n_components < 2 || self.n_components >= dim {
            return bad(format!("n_components {} outside [2, {}]", self.n_components, dim.saturating_sub(1)));
        }
        if self.n_epochs == Some(0) {
            return bad("n_epochs must be >= 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate {} must be positive", self.learning_rate));
        }
        if self.negative_sample_rate == 0 {
            return bad("negative_sample_rate must be >= 1".into());
        }
        match self.init {
            Init::Gaussian { sigma } if !(sigma > 0.0 && sigma.is_finite()) => bad(format!("init sigma {sigma} must be positive")),
            Init::Uniform { half_width } if !(half_width > 0.0 && half_width.is_finite()) => {
                bad(format!("init half_width {half_width} must be positive"))
            }
            _ => Ok(()),
        }
    }
}

/// Full pipeline from raw points to layout coordinates.
///
/// `n_neighbors` is reduced to `n - 1` for inputs with fewer points.
pub fn embed(points: ArrayView2<f64>, cfg: &LayoutConfig) -> Result<LayoutResult, UmapError> {
    cfg.validate(points.ncols())?;
    let n = points.nrows();
    if n < 3 {
        return Err(UmapError::InvalidConfig(format!("need at least 3 points, got {n}")));
    }
    let k = cfg.n_neighbors.min(n - 1);
    let knn = exact_knn(points, k)?;
    let graph = fuzzy_simplicial_set(&knn);
    optimize_layout(&graph, cfg)
}
