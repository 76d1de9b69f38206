//! Synthetic item-response worlds with known ground truth.

use nalgebra::DMatrix;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{instance_ids, llm_ids, FeatureStore, SuccessMatrix};
use crate::numerics::auc;
use crate::util::{derive_seed, seeded_rng, sigmoid, std_normal};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    pub n_llms: usize,
    pub n_instances: usize,
    pub k: usize,
    #[serde(default = "default_noise")]
    pub noise: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_noise() -> f64 {
    0.1
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_llms: 28,
            n_instances: 2800,
            k: 5,
            noise: default_noise(),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// n × k
    #[serde(with = "crate::util::matrix_rows")]
    pub capabilities: DMatrix<f64>,
    /// N × k
    #[serde(with = "crate::util::matrix_rows")]
    pub demands: DMatrix<f64>,
    pub intercepts: Vec<f64>,
    /// n × N success probabilities σ(θ_j·a_i + b_i).
    #[serde(with = "crate::util::matrix_rows")]
    pub probabilities: DMatrix<f64>,
}

#[derive(Clone, Debug)]
pub struct SyntheticWorld {
    pub matrix: SuccessMatrix,
    /// Features `[a_i ‖ b_i]` plus N(0, noise²) per entry.
    pub store: FeatureStore,
    pub truth: GroundTruth,
}

impl SyntheticWorld {
    /// AUC of the true probabilities of LLM `llm` against its sampled
    /// outcomes, over the instance positions `instances`.
    pub fn bayes_auc(&self, llm: usize, instances: &[usize]) -> Result<f64> {
        let scores: Vec<f64> = instances.iter().map(|&i| self.truth.probabilities[(llm, i)]).collect();
        let labels: Vec<u8> = instances.iter().map(|&i| self.matrix.get(llm, i)).collect();
        auc(&scores, &labels)
    }
}

/// Draw θ_j, a_i ~ N(0, I_k), b_i ~ N(0, 1) and sample the world.
pub fn generate_synthetic_world(n_llms: usize, n_instances: usize, k: usize, noise: f64, seed: u64) -> Result<SyntheticWorld> {
    if n_llms == 0 || n_instances == 0 || k == 0 {
        return Err(Error::Invalid("synthetic world sizes must be positive".into()));
    }
    let mut rng = seeded_rng(derive_seed(seed, "synthetic/parameters"));
    let capabilities = DMatrix::from_fn(n_llms, k, |_, _| std_normal(&mut rng));
    let demands = DMatrix::from_fn(n_instances, k, |_, _| std_normal(&mut rng));
    let intercepts = (0..n_instances).map(|_| std_normal(&mut rng)).collect();
    world_from_parameters(capabilities, demands, intercepts, noise, seed)
}

/// Sample outcomes and features from fixed parameters.
pub fn world_from_parameters(
    capabilities: DMatrix<f64>,
    demands: DMatrix<f64>,
    intercepts: Vec<f64>,
    noise: f64,
    seed: u64,
) -> Result<SyntheticWorld> {
    let (n, k) = capabilities.shape();
    let m = demands.nrows();
    if demands.ncols() != k || intercepts.len() != m || n == 0 || m == 0 || k == 0 {
        return Err(Error::Invalid("inconsistent synthetic parameter shapes".into()));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::Invalid(format!("noise must be >= 0, got {noise}")));
    }
    let logits = &capabilities * demands.transpose();
    let probabilities = DMatrix::from_fn(n, m, |j, i| sigmoid(logits[(j, i)] + intercepts[i]));
    let mut rng = seeded_rng(derive_seed(seed, "synthetic/outcomes"));
    let values = (0..n)
        .flat_map(|j| (0..m).map(move |i| (j, i)))
        .map(|(j, i)| (rng.random::<f64>() < probabilities[(j, i)]) as u8)
        .collect();
    let llms = llm_ids(&(0..n).map(|j| format!("m{j:03}")).collect::<Vec<_>>());
    let ids = instance_ids(&(0..m).map(|i| format!("i{i:06}")).collect::<Vec<_>>());
    let matrix = SuccessMatrix::new(llms, ids.clone(), values)?;

    let mut rng = seeded_rng(derive_seed(seed, "synthetic/features"));
    let rows: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            demands
                .row(i)
                .iter()
                .copied()
                .chain(std::iter::once(intercepts[i]))
                .map(|v| v + noise * std_normal(&mut rng))
                .collect()
        })
        .collect();
    let labels = (0..m).map(|i| format!("ds{}", demands.row(i).transpose().iamax())).collect();
    let store = FeatureStore::from_rows(ids, rows, labels)?;
    Ok(SyntheticWorld {
        matrix,
        store,
        truth: GroundTruth {
            capabilities,
            demands,
            intercepts,
            probabilities,
        },
    })
}
