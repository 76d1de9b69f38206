//! Pair features, specific and generic assessors, and the baseline fits.
//!
//! A generic assessor's training pool holds one row per (train LLM, train
//! instance) pair, LLM-major. Intrinsic features are standardized with
//! train-split statistics; the success block `g` and the similarity block are
//! left raw.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::classifiers::{train_grid, ClassifierSpec, TrainedClassifier};
use crate::error::{Error, Result};
use crate::model::{FeatureStore, InstanceId, ReferenceSet, SuccessMatrix};
use crate::numerics::{auc, cosine_similarity};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMode {
    /// `[f ‖ g]`
    Embeddings,
    /// `[sims ‖ g]`
    Similarity,
    /// `[sims ‖ g ‖ sims ⊙ g]`
    SimilarityWithInteraction,
}

impl FeatureMode {
    pub const ALL: [FeatureMode; 3] = [
        FeatureMode::Embeddings,
        FeatureMode::Similarity,
        FeatureMode::SimilarityWithInteraction,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureMode::Embeddings => "embeddings",
            FeatureMode::Similarity => "similarity",
            FeatureMode::SimilarityWithInteraction => "similarity_with_interaction",
        }
    }

    /// Pair-feature length for intrinsic width `d` and `n_ref` references.
    pub fn width(self, d: usize, n_ref: usize) -> usize {
        match self {
            FeatureMode::Embeddings => d + n_ref,
            FeatureMode::Similarity => 2 * n_ref,
            FeatureMode::SimilarityWithInteraction => 3 * n_ref,
        }
    }

    pub fn uses_similarity(self) -> bool {
        self != FeatureMode::Embeddings
    }
}

/// Cosine similarity of `f_p` to each reference embedding.
pub fn similarities(f_p: &[f64], reference_embeddings: &[Vec<f64>]) -> Result<Vec<f64>> {
    reference_embeddings.iter().map(|e| cosine_similarity(f_p, e)).collect()
}

/// Feature vector of one (LLM, instance) pair. `sims` is ignored by the
/// embeddings mode and `f_p` by the similarity modes.
pub fn build_pair_features(mode: FeatureMode, g: &[u8], f_p: &[f64], sims: &[f64]) -> Result<Vec<f64>> {
    let gf = g.iter().map(|&v| v as f64);
    Ok(match mode {
        FeatureMode::Embeddings => f_p.iter().copied().chain(gf).collect(),
        FeatureMode::Similarity | FeatureMode::SimilarityWithInteraction => {
            if sims.len() != g.len() {
                return Err(Error::Dimension {
                    expected: g.len(),
                    got: sims.len(),
                });
            }
            let mut out: Vec<f64> = sims.iter().copied().chain(gf).collect();
            if mode == FeatureMode::SimilarityWithInteraction {
                out.extend(sims.iter().zip(g).map(|(s, &b)| s * b as f64));
            }
            out
        }
    })
}

/// Per-coordinate affine map to zero mean and unit variance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    /// Standard deviations; zero-variance coordinates get 1.
    pub scale: Vec<f64>,
}

impl Standardizer {
    /// Fit on the rows of `store` listed in `ids` (the train split).
    pub fn fit(store: &FeatureStore, ids: &[InstanceId]) -> Result<Self> {
        if ids.is_empty() {
            return Err(Error::EmptySplit("standardizer fitted on no instances".into()));
        }
        let d = store.dim();
        let rows = ids
            .iter()
            .map(|id| store.vector(id).ok_or_else(|| Error::MissingIds(vec![id.to_string()])))
            .collect::<Result<Vec<_>>>()?;
        let n = rows.len() as f64;
        let mean: Vec<f64> = (0..d).map(|c| rows.iter().map(|r| r[c]).sum::<f64>() / n).collect();
        let scale = (0..d)
            .map(|c| {
                let var = rows.iter().map(|r| (r[c] - mean[c]).powi(2)).sum::<f64>() / n;
                if var > 0.0 {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { mean, scale })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: v.len(),
            });
        }
        Ok(v.iter().zip(&self.mean).zip(&self.scale).map(|((x, m), s)| (x - m) / s).collect())
    }
}

/// Standardized intrinsic features of `ids`, one row each.
pub fn intrinsic_matrix(store: &FeatureStore, standardizer: &Standardizer, ids: &[InstanceId]) -> Result<DMatrix<f64>> {
    let mut data = Vec::with_capacity(ids.len() * store.dim());
    for id in ids {
        let v = store.vector(id).ok_or_else(|| Error::MissingIds(vec![id.to_string()]))?;
        data.extend(standardizer.apply(v)?);
    }
    Ok(DMatrix::from_row_slice(ids.len(), store.dim(), &data))
}

/// Instance-side blocks for a fixed reference set and mode.
struct InstanceBlocks {
    /// n × d standardized features (embeddings mode) or n × n_ref similarities.
    block: DMatrix<f64>,
}

fn instance_blocks(
    mode: FeatureMode,
    store: &FeatureStore,
    standardizer: &Standardizer,
    ids: &[InstanceId],
    reference_embeddings: &[Vec<f64>],
) -> Result<InstanceBlocks> {
    let block = if mode.uses_similarity() {
        let mut data = Vec::with_capacity(ids.len() * reference_embeddings.len());
        for id in ids {
            let v = store.vector(id).ok_or_else(|| Error::MissingIds(vec![id.to_string()]))?;
            data.extend(similarities(v, reference_embeddings)?);
        }
        DMatrix::from_row_slice(ids.len(), reference_embeddings.len(), &data)
    } else {
        intrinsic_matrix(store, standardizer, ids)?
    };
    Ok(InstanceBlocks { block })
}

/// Rows `(j, i)` LLM-major for the given success vectors and instance blocks.
fn pair_matrix(mode: FeatureMode, blocks: &InstanceBlocks, gs: &[Vec<u8>]) -> DMatrix<f64> {
    let n = blocks.block.nrows();
    let b = blocks.block.ncols();
    let r = gs.first().map_or(0, Vec::len);
    let width = match mode {
        FeatureMode::Embeddings => b + r,
        FeatureMode::Similarity => b + r,
        FeatureMode::SimilarityWithInteraction => b + 2 * r,
    };
    let mut m = DMatrix::zeros(gs.len() * n, width);
    for c in 0..width {
        let mut col = m.column_mut(c);
        for (j, g) in gs.iter().enumerate() {
            for i in 0..n {
                col[j * n + i] = if c < b {
                    blocks.block[(i, c)]
                } else if c < b + r {
                    g[c - b] as f64
                } else {
                    let k = c - b - r;
                    blocks.block[(i, k)] * g[k] as f64
                };
            }
        }
    }
    m
}

fn reference_embeddings(store: &FeatureStore, reference: &ReferenceSet) -> Result<Vec<Vec<f64>>> {
    reference
        .instance_ids
        .iter()
        .map(|id| {
            store
                .vector(id)
                .map(<[f64]>::to_vec)
                .ok_or_else(|| Error::MissingIds(vec![id.to_string()]))
        })
        .collect()
}

/// Success vectors of every LLM of `matrix` on the reference instances.
pub fn reference_outcomes(matrix: &SuccessMatrix, reference: &ReferenceSet) -> Result<Vec<Vec<u8>>> {
    matrix
        .llm_ids()
        .iter()
        .map(|llm| matrix.outcomes(llm, &reference.instance_ids))
        .collect()
}

/// A classifier over pair features plus everything needed to rebuild them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenericAssessor {
    pub classifier: TrainedClassifier,
    pub mode: FeatureMode,
    pub reference: ReferenceSet,
    /// Raw intrinsic features of the reference instances.
    pub reference_embeddings: Vec<Vec<f64>>,
    pub standardizer: Standardizer,
}

impl GenericAssessor {
    pub fn n_ref(&self) -> usize {
        self.reference.len()
    }

    fn check_g(&self, g: &[u8]) -> Result<()> {
        if g.len() != self.n_ref() {
            return Err(Error::Dimension {
                expected: self.n_ref(),
                got: g.len(),
            });
        }
        Ok(())
    }

    pub fn pair_features(&self, g: &[u8], f_raw: &[f64]) -> Result<Vec<f64>> {
        self.check_g(g)?;
        let f = self.standardizer.apply(f_raw)?;
        let sims = if self.mode.uses_similarity() {
            similarities(f_raw, &self.reference_embeddings)?
        } else {
            Vec::new()
        };
        build_pair_features(self.mode, g, &f, &sims)
    }

    /// Success probability of a new LLM with reference results `g_new` on an
    /// instance with raw intrinsic features `f_new`.
    pub fn predict_new_llm(&self, g_new: &[u8], f_new: &[f64]) -> Result<f64> {
        self.classifier.predict_row(&self.pair_features(g_new, f_new)?)
    }

    /// Log-odds scores for one LLM over many instances.
    pub fn scores(&self, g: &[u8], store: &FeatureStore, ids: &[InstanceId]) -> Result<Vec<f64>> {
        self.check_g(g)?;
        let blocks = instance_blocks(self.mode, store, &self.standardizer, ids, &self.reference_embeddings)?;
        self.classifier.margins(&pair_matrix(self.mode, &blocks, &[g.to_vec()]))
    }
}

/// The pooled pair-feature training set of a generic assessor.
pub struct GenericPool {
    pub x: DMatrix<f64>,
    pub y: Vec<u8>,
    pub reference_embeddings: Vec<Vec<f64>>,
}

/// Build the pool from `train` (train LLMs × train instances).
pub fn generic_pool(
    train: &SuccessMatrix,
    store: &FeatureStore,
    standardizer: &Standardizer,
    reference: &ReferenceSet,
    mode: FeatureMode,
) -> Result<GenericPool> {
    reference.check_within(train.instance_ids())?;
    if reference.is_empty() {
        return Err(Error::Invalid("empty reference set".into()));
    }
    let reference_embeddings = reference_embeddings(store, reference)?;
    let blocks = instance_blocks(mode, store, standardizer, train.instance_ids(), &reference_embeddings)?;
    let gs = reference_outcomes(train, reference)?;
    let x = pair_matrix(mode, &blocks, &gs);
    let y = (0..train.n_llms()).flat_map(|j| train.row(j).iter().copied()).collect();
    Ok(GenericPool {
        x,
        y,
        reference_embeddings,
    })
}

/// Train one generic assessor per classifier spec on a shared pool.
pub fn train_generic_grid(
    train: &SuccessMatrix,
    store: &FeatureStore,
    standardizer: &Standardizer,
    reference: &ReferenceSet,
    mode: FeatureMode,
    specs: &[ClassifierSpec],
) -> Result<Vec<Result<GenericAssessor>>> {
    let pool = generic_pool(train, store, standardizer, reference, mode)?;
    if !(pool.y.contains(&0) && pool.y.contains(&1)) {
        return Err(Error::Degenerate("generic training pool has a single class".into()));
    }
    Ok(train_grid(specs, &pool.x, &pool.y)
        .into_iter()
        .map(|c| {
            c.map(|classifier| GenericAssessor {
                classifier,
                mode,
                reference: reference.clone(),
                reference_embeddings: pool.reference_embeddings.clone(),
                standardizer: standardizer.clone(),
            })
        })
        .collect())
}

pub fn train_generic_assessor(
    train: &SuccessMatrix,
    store: &FeatureStore,
    standardizer: &Standardizer,
    reference: &ReferenceSet,
    mode: FeatureMode,
    spec: &ClassifierSpec,
) -> Result<GenericAssessor> {
    train_generic_grid(train, store, standardizer, reference, mode, std::slice::from_ref(spec))?
        .pop()
        .expect("one spec, one result")
}

/// AUC that maps the undefined case to `None`.
pub fn auc_or_none(scores: &[f64], labels: &[u8]) -> Result<Option<f64>> {
    match auc(scores, labels) {
        Ok(v) => Ok(Some(v)),
        Err(Error::UndefinedAuc) => Ok(None),
        Err(e) => Err(e),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpecificFit {
    pub classifier: TrainedClassifier,
    /// Validation AUC of the chosen member; `None` when undefined.
    pub val_auc: Option<f64>,
}

/// Fit every grid member on one LLM's train-split results and keep the one
/// with the highest validation AUC (first member on ties or when undefined).
pub fn train_specific_assessor(
    x_train: &DMatrix<f64>,
    y_train: &[u8],
    x_val: &DMatrix<f64>,
    y_val: &[u8],
    grid: &[ClassifierSpec],
) -> Result<SpecificFit> {
    if grid.is_empty() {
        return Err(Error::Invalid("empty classifier grid".into()));
    }
    let single_class = y_train.iter().all(|&v| v == y_train[0]);
    let fitted: Vec<TrainedClassifier> = if single_class {
        vec![TrainedClassifier::train_or_constant(&grid[0], x_train, y_train)?]
    } else {
        train_grid(grid, x_train, y_train).into_iter().collect::<Result<_>>()?
    };
    let mut best: Option<SpecificFit> = None;
    for classifier in fitted {
        let val_auc = auc_or_none(&classifier.margins(x_val)?, y_val)?;
        let better = match (&best, val_auc) {
            (None, _) => true,
            (Some(b), Some(v)) => b.val_auc.is_none_or(|bv| v > bv),
            (Some(_), None) => false,
        };
        if better {
            best = Some(SpecificFit { classifier, val_auc });
        }
    }
    Ok(best.expect("non-empty grid"))
}

/// Intrinsic-only classifier on the reference instances of one LLM.
pub fn train_reference_only(
    store: &FeatureStore,
    standardizer: &Standardizer,
    reference: &ReferenceSet,
    g: &[u8],
    spec: &ClassifierSpec,
) -> Result<TrainedClassifier> {
    if g.len() != reference.len() {
        return Err(Error::Dimension {
            expected: reference.len(),
            got: g.len(),
        });
    }
    let x = intrinsic_matrix(store, standardizer, &reference.instance_ids)?;
    TrainedClassifier::train_or_constant(spec, &x, g)
}

/// Pooled intrinsic-only training set: one row per (train LLM, train instance).
pub fn all_train_pool(train: &SuccessMatrix, store: &FeatureStore, standardizer: &Standardizer) -> Result<(DMatrix<f64>, Vec<u8>)> {
    let base = intrinsic_matrix(store, standardizer, train.instance_ids())?;
    let (n, d) = base.shape();
    let nl = train.n_llms();
    let x = DMatrix::from_fn(n * nl, d, |r, c| base[(r % n, c)]);
    let y = (0..nl).flat_map(|j| train.row(j).iter().copied()).collect();
    Ok((x, y))
}

pub fn train_all_train_data(
    train: &SuccessMatrix,
    store: &FeatureStore,
    standardizer: &Standardizer,
    specs: &[ClassifierSpec],
) -> Result<Vec<Result<TrainedClassifier>>> {
    let (x, y) = all_train_pool(train, store, standardizer)?;
    Ok(train_grid(specs, &x, &y))
}
