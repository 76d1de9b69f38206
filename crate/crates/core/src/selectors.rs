//! Reference-set selection from train-split data.

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::irt::IrtModel;
use crate::model::{FeatureStore, InstanceId, ReferenceSet, SuccessMatrix};
use crate::numerics::{factor_analysis, kaiser_factor_count, kmeans, varimax, FactorConfig, KMeansConfig};
use crate::util::{derive_seed, digest, seeded_rng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSource {
    IntrinsicFeatures,
    SuccessColumns,
    IrtDemands,
}

impl FeatureSource {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureSource::IntrinsicFeatures => "intrinsic_features",
            FeatureSource::SuccessColumns => "success_columns",
            FeatureSource::IrtDemands => "irt_demands",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMethod {
    Clustering,
    FactorAnalysis,
    Random,
    #[serde(rename = "random_best_of_20")]
    RandomBestOf20,
}

impl SelectionMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            SelectionMethod::Clustering => "clustering",
            SelectionMethod::FactorAnalysis => "factor_analysis",
            SelectionMethod::Random => "random",
            SelectionMethod::RandomBestOf20 => "random_best_of_20",
        }
    }

    pub fn uses_features(self) -> bool {
        matches!(self, SelectionMethod::Clustering | SelectionMethod::FactorAnalysis)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectorSpec {
    /// Ignored by the random methods.
    pub feature_source: FeatureSource,
    pub method: SelectionMethod,
    pub n_ref: usize,
    pub seed: u64,
}

impl SelectorSpec {
    pub fn new(feature_source: FeatureSource, method: SelectionMethod, n_ref: usize, seed: u64) -> Self {
        Self {
            feature_source,
            method,
            n_ref,
            seed,
        }
    }

    pub fn random(n_ref: usize, seed: u64) -> Self {
        Self::new(FeatureSource::IntrinsicFeatures, SelectionMethod::Random, n_ref, seed)
    }

    /// `method/source` for feature-based methods, the method name otherwise.
    pub fn name(&self) -> String {
        if self.method.uses_features() {
            format!("{}/{}", self.method.as_str(), self.feature_source.as_str())
        } else {
            self.method.as_str().to_string()
        }
    }

    pub fn digest(&self) -> String {
        digest(serde_json::to_string(self).expect("serializable spec").as_bytes())
    }

    fn reference(&self, ids: Vec<InstanceId>) -> Result<ReferenceSet> {
        ReferenceSet::new(self.name(), ids, self.seed, self.digest())
    }
}

/// Selector features with one column per instance of `train_matrix`, in its order.
pub fn build_feature_matrix(
    source: FeatureSource,
    train_matrix: &SuccessMatrix,
    store: &FeatureStore,
    irt: Option<&IrtModel>,
) -> Result<DMatrix<f64>> {
    let ids = train_matrix.instance_ids();
    match source {
        FeatureSource::IntrinsicFeatures => {
            let mut cols = Vec::with_capacity(ids.len() * store.dim());
            let mut missing = Vec::new();
            for id in ids {
                match store.vector(id) {
                    Some(v) => cols.extend_from_slice(v),
                    None => missing.push(id.to_string()),
                }
            }
            if !missing.is_empty() {
                return Err(Error::MissingIds(missing));
            }
            Ok(DMatrix::from_column_slice(store.dim(), ids.len(), &cols))
        }
        FeatureSource::SuccessColumns => Ok(DMatrix::from_fn(train_matrix.n_llms(), ids.len(), |j, i| {
            train_matrix.get(j, i) as f64
        })),
        FeatureSource::IrtDemands => {
            let model = irt.ok_or_else(|| Error::Invalid("irt_demands selector needs a fitted IRT model".into()))?;
            let mut m = DMatrix::zeros(model.k, ids.len());
            for (c, id) in ids.iter().enumerate() {
                let pos = model
                    .instance_ids
                    .iter()
                    .position(|x| x == id)
                    .ok_or_else(|| Error::MissingIds(vec![id.to_string()]))?;
                m.set_column(c, &model.demands.row(pos).transpose());
            }
            Ok(m)
        }
    }
}

fn check_n_ref(n_ref: usize, n: usize) -> Result<()> {
    if n_ref == 0 || n_ref > n {
        Err(Error::Invalid(format!("n_ref = {n_ref} outside 1..={n}")))
    } else {
        Ok(())
    }
}

fn check_columns(x: &DMatrix<f64>, ids: &[InstanceId]) -> Result<()> {
    if x.ncols() != ids.len() {
        return Err(Error::Dimension {
            expected: ids.len(),
            got: x.ncols(),
        });
    }
    Ok(())
}

/// k-means with k = n_ref over the instance columns of `x`; one medoid per cluster.
pub fn select_by_clustering(spec: &SelectorSpec, x: &DMatrix<f64>, ids: &[InstanceId]) -> Result<ReferenceSet> {
    check_columns(x, ids)?;
    check_n_ref(spec.n_ref, ids.len())?;
    let points = x.transpose();
    for attempt in 0..2 {
        let seed = if attempt == 0 { spec.seed } else { derive_seed(spec.seed, "kmeans-reseed") };
        let result = kmeans(&points, spec.n_ref, &KMeansConfig::new(seed))?;
        if let Some(medoids) = result.medoids.iter().copied().collect::<Option<Vec<usize>>>() {
            return spec.reference(medoids.into_iter().map(|i| ids[i].clone()).collect());
        }
        log::warn!("k-means left an empty cluster (attempt {})", attempt + 1);
    }
    Err(Error::Degenerate(format!(
        "k-means with k = {} left an empty cluster after re-seeding",
        spec.n_ref
    )))
}

/// Per-factor counts: the first `n_ref mod l` factors get one extra.
pub fn factor_allocation(n_ref: usize, l: usize) -> Vec<usize> {
    assert!(l > 0, "at least one factor");
    (0..l).map(|k| n_ref / l + usize::from(k < n_ref % l)).collect()
}

/// Output of [`select_by_factor_analysis`] beyond the reference set.
#[derive(Clone, Debug)]
pub struct FactorSelection {
    pub reference: ReferenceSet,
    pub n_factors: usize,
    pub allocation: Vec<usize>,
    /// l × N factor scores after varimax rotation.
    pub rotated_scores: DMatrix<f64>,
}

/// Pick per-factor top-|score| instances, skipping ids already taken.
pub fn pick_by_scores(scores: &DMatrix<f64>, allocation: &[usize]) -> Vec<usize> {
    let n = scores.ncols();
    let mut taken = vec![false; n];
    let mut out = Vec::new();
    for (k, &count) in allocation.iter().enumerate() {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| scores[(k, b)].abs().total_cmp(&scores[(k, a)].abs()).then(a.cmp(&b)));
        let mut need = count;
        for i in order {
            if need == 0 {
                break;
            }
            if !taken[i] {
                taken[i] = true;
                out.push(i);
                need -= 1;
            }
        }
    }
    out
}

pub fn select_by_factor_analysis(spec: &SelectorSpec, x: &DMatrix<f64>, ids: &[InstanceId]) -> Result<FactorSelection> {
    check_columns(x, ids)?;
    check_n_ref(spec.n_ref, ids.len())?;
    let kaiser = kaiser_factor_count(x)?;
    let fa = factor_analysis(x, kaiser, &FactorConfig::default())?;
    let rotation = varimax(&fa.loadings, 100, 1e-6)?;
    let rotated_scores = rotation.rotation.transpose() * &fa.factors;
    let allocation = factor_allocation(spec.n_ref, kaiser);
    let picked = pick_by_scores(&rotated_scores, &allocation);
    Ok(FactorSelection {
        reference: spec.reference(picked.into_iter().map(|i| ids[i].clone()).collect())?,
        n_factors: kaiser,
        allocation,
        rotated_scores,
    })
}

pub fn select_random(spec: &SelectorSpec, ids: &[InstanceId]) -> Result<ReferenceSet> {
    check_n_ref(spec.n_ref, ids.len())?;
    let mut rng = seeded_rng(spec.seed);
    let picked = sample(&mut rng, ids.len(), spec.n_ref);
    spec.reference(picked.into_iter().map(|i| ids[i].clone()).collect())
}

pub const BEST_OF_DRAWS: usize = 20;

/// Winner of [`select_random_best_of_20`] with every candidate's score.
#[derive(Clone, Debug)]
pub struct BestOfDraws {
    pub reference: ReferenceSet,
    pub winner: usize,
    pub scores: Vec<f64>,
}

/// Draw 20 seeded random subsets, score each with `score`, keep the best.
/// Ties go to the lowest draw index; NaN scores never win.
pub fn select_random_best_of_20<F>(spec: &SelectorSpec, ids: &[InstanceId], score: F) -> Result<BestOfDraws>
where
    F: Fn(&ReferenceSet) -> Result<f64> + Sync,
{
    check_n_ref(spec.n_ref, ids.len())?;
    let candidates = (0..BEST_OF_DRAWS)
        .map(|i| {
            let draw = SelectorSpec {
                seed: derive_seed(spec.seed, &format!("draw/{i}")),
                ..spec.clone()
            };
            select_random(&draw, ids)
        })
        .collect::<Result<Vec<_>>>()?;
    let scores = candidates
        .par_iter()
        .enumerate()
        .map(|(index, c)| {
            score(c).map_err(|e| Error::Candidate {
                index,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut winner = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[winner] || scores[winner].is_nan() && !s.is_nan() {
            winner = i;
        }
    }
    let reference = spec.reference(candidates[winner].instance_ids.clone())?;
    Ok(BestOfDraws {
        reference,
        winner,
        scores,
    })
}

/// Inputs shared by the feature-based selectors.
#[derive(Clone, Copy)]
pub struct SelectionInputs<'a> {
    pub train_matrix: &'a SuccessMatrix,
    pub store: &'a FeatureStore,
    pub irt: Option<&'a IrtModel>,
}

/// Scores a candidate reference set; higher is better.
pub type CandidateScore<'a> = &'a (dyn Fn(&ReferenceSet) -> Result<f64> + Sync);

/// Dispatch on the spec. `score` is required for `random_best_of_20`.
pub fn select(
    spec: &SelectorSpec,
    inputs: SelectionInputs<'_>,
    score: Option<CandidateScore<'_>>,
) -> Result<ReferenceSet> {
    let ids = inputs.train_matrix.instance_ids();
    match spec.method {
        SelectionMethod::Random => select_random(spec, ids),
        SelectionMethod::RandomBestOf20 => {
            let score = score.ok_or_else(|| Error::Invalid("random_best_of_20 needs a scoring callback".into()))?;
            Ok(select_random_best_of_20(spec, ids, score)?.reference)
        }
        SelectionMethod::Clustering => {
            let x = build_feature_matrix(spec.feature_source, inputs.train_matrix, inputs.store, inputs.irt)?;
            select_by_clustering(spec, &x, ids)
        }
        SelectionMethod::FactorAnalysis => {
            let x = build_feature_matrix(spec.feature_source, inputs.train_matrix, inputs.store, inputs.irt)?;
            Ok(select_by_factor_analysis(spec, &x, ids)?.reference)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{instance_ids, llm_ids};
    use crate::util::std_normal;
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn ids(n: usize) -> Vec<InstanceId> {
        instance_ids(&(0..n).map(|i| format!("i{i:03}")).collect::<Vec<_>>())
    }

    #[test]
    fn method_names_match_serde() {
        for m in [SelectionMethod::Clustering, SelectionMethod::FactorAnalysis, SelectionMethod::Random, SelectionMethod::RandomBestOf20] {
            assert_eq!(serde_json::to_value(m).unwrap(), m.as_str());
        }
    }

    #[test]
    fn allocation_for_35_over_10() {
        assert_eq!(factor_allocation(35, 10), vec![4, 4, 4, 4, 4, 3, 3, 3, 3, 3]);
        assert_eq!(factor_allocation(7, 1), vec![7]);
    }

    #[test]
    fn duplicate_top_candidate_descends() {
        // instance 0 tops both factors; factor 1 must take its runner-up, instance 2
        let scores = DMatrix::from_row_slice(2, 4, &[5.0, 4.0, 0.1, 0.2, -9.0, 0.0, 3.0, 1.0]);
        assert_eq!(pick_by_scores(&scores, &[1, 1]), vec![0, 2]);
        assert_eq!(pick_by_scores(&scores, &[2, 0]), vec![0, 1]);
    }

    #[test]
    fn clustering_picks_one_per_blob() {
        let x = DMatrix::from_row_slice(1, 4, &[0.0, 0.1, 10.0, 10.1]);
        let ids = ids(4);
        let r = select_by_clustering(&SelectorSpec::new(FeatureSource::IntrinsicFeatures, SelectionMethod::Clustering, 2, 1), &x, &ids).unwrap();
        let mut got: Vec<&str> = r.instance_ids.iter().map(|i| i.as_str()).collect();
        got.sort();
        assert!(got[0] == "i000" || got[0] == "i001");
        assert!(got[1] == "i002" || got[1] == "i003");
        let all = select_by_clustering(&SelectorSpec::new(FeatureSource::IntrinsicFeatures, SelectionMethod::Clustering, 4, 1), &x, &ids).unwrap();
        assert_eq!(all.instance_ids.iter().collect::<HashSet<_>>().len(), 4);
    }

    #[test]
    fn clustering_fails_on_too_few_distinct_points() {
        let x = DMatrix::from_row_slice(1, 4, &[1.0, 1.0, 1.0, 2.0]);
        let spec = SelectorSpec::new(FeatureSource::SuccessColumns, SelectionMethod::Clustering, 3, 0);
        assert!(matches!(select_by_clustering(&spec, &x, &ids(4)), Err(Error::Degenerate(_))));
    }

    #[test]
    fn random_edge_cases() {
        let ids = ids(5);
        let all = select_random(&SelectorSpec::random(5, 3), &ids).unwrap();
        assert_eq!(all.instance_ids.iter().collect::<HashSet<_>>().len(), 5);
        assert_eq!(all, select_random(&SelectorSpec::random(5, 3), &ids).unwrap());
        assert!(select_random(&SelectorSpec::random(0, 3), &ids).is_err());
        assert!(select_random(&SelectorSpec::random(6, 3), &ids).is_err());
    }

    #[test]
    fn best_of_20_tie_and_argmax() {
        let ids = ids(30);
        let spec = SelectorSpec::new(FeatureSource::IntrinsicFeatures, SelectionMethod::RandomBestOf20, 3, 11);
        let constant = select_random_best_of_20(&spec, &ids, |_| Ok(0.5)).unwrap();
        assert_eq!(constant.winner, 0);

        // find an id present in exactly one draw
        let draws: Vec<ReferenceSet> = (0..BEST_OF_DRAWS)
            .map(|i| {
                select_random(&SelectorSpec { seed: derive_seed(11, &format!("draw/{i}")), ..spec.clone() }, &ids).unwrap()
            })
            .collect();
        let q = ids
            .iter()
            .find(|id| draws.iter().filter(|d| d.instance_ids.contains(id)).count() == 1)
            .expect("some id appears once")
            .clone();
        let expected = draws.iter().position(|d| d.instance_ids.contains(&q)).unwrap();
        let best = select_random_best_of_20(&spec, &ids, |r| Ok(r.instance_ids.contains(&q) as u8 as f64)).unwrap();
        assert_eq!(best.winner, expected);
        assert_eq!(best.reference.instance_ids, draws[expected].instance_ids);

        let failing = select_random_best_of_20(&spec, &ids, |r| {
            if r.instance_ids.contains(&q) {
                Err(Error::Invalid("boom".into()))
            } else {
                Ok(0.0)
            }
        });
        assert!(matches!(failing, Err(Error::Candidate { index, .. }) if index == expected));
    }

    #[test]
    fn factor_analysis_selects_extremes_of_two_factors() {
        let mut rng = seeded_rng(2);
        let n = 300;
        let f1: Vec<f64> = (0..n).map(|_| std_normal(&mut rng)).collect();
        let f2: Vec<f64> = (0..n).map(|_| std_normal(&mut rng)).collect();
        let x = DMatrix::from_fn(6, n, |r, c| {
            let e = 0.3 * std_normal(&mut rng);
            if r < 3 { f1[c] + e } else { f2[c] + e }
        });
        let spec = SelectorSpec::new(FeatureSource::IntrinsicFeatures, SelectionMethod::FactorAnalysis, 10, 0);
        let sel = select_by_factor_analysis(&spec, &x, &ids(n)).unwrap();
        assert_eq!(sel.n_factors, 2);
        assert_eq!(sel.allocation, vec![5, 5]);
        assert_eq!(sel.reference.len(), 10);
        // selected instances are extreme on one of the latent factors
        for id in &sel.reference.instance_ids {
            let c: usize = id.as_str()[1..].parse().unwrap();
            assert!(f1[c].abs().max(f2[c].abs()) > 1.0);
        }
    }

    #[test]
    fn feature_matrix_shapes() {
        let llms = llm_ids(&["a", "b", "c", "d"]);
        let inst = ids(3);
        let z = SuccessMatrix::new(llms, inst.clone(), vec![1, 0, 1, 0, 1, 1, 0, 0, 0, 1, 1, 1]).unwrap();
        let store = FeatureStore::from_rows(inst, vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]], vec!["x".into(); 3]).unwrap();
        assert_eq!(build_feature_matrix(FeatureSource::SuccessColumns, &z, &store, None).unwrap().shape(), (4, 3));
        let intrinsic = build_feature_matrix(FeatureSource::IntrinsicFeatures, &z, &store, None).unwrap();
        assert_eq!(intrinsic.shape(), (2, 3));
        assert_eq!(intrinsic[(1, 2)], 6.0);
        assert!(build_feature_matrix(FeatureSource::IrtDemands, &z, &store, None).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn every_selector_returns_n_ref_distinct_train_ids(seed in 0u64..1000, n in 12usize..40, frac in 0.1f64..1.0, d in 2usize..5) {
            let n_ref = ((n as f64 * frac) as usize).clamp(1, n);
            let mut rng = seeded_rng(seed);
            let x = DMatrix::from_fn(d, n, |_, _| std_normal(&mut rng));
            let ids = ids(n);
            let check = |r: &ReferenceSet| {
                let set: HashSet<_> = r.instance_ids.iter().collect();
                set.len() == n_ref && r.instance_ids.len() == n_ref && r.check_within(&ids).is_ok()
            };
            let spec = |m| SelectorSpec::new(FeatureSource::IntrinsicFeatures, m, n_ref, seed);
            prop_assert!(check(&select_by_clustering(&spec(SelectionMethod::Clustering), &x, &ids).unwrap()));
            prop_assert!(check(&select_by_factor_analysis(&spec(SelectionMethod::FactorAnalysis), &x, &ids).unwrap().reference));
            prop_assert!(check(&select_random(&spec(SelectionMethod::Random), &ids).unwrap()));
            prop_assert!(check(&select_random_best_of_20(&spec(SelectionMethod::RandomBestOf20), &ids, |r| Ok(r.instance_ids[0].as_str().len() as f64)).unwrap().reference));
        }

        #[test]
        fn allocation_sums_and_is_balanced(n_ref in 1usize..500, l in 1usize..40) {
            let a = factor_allocation(n_ref, l);
            prop_assert_eq!(a.iter().sum::<usize>(), n_ref);
            prop_assert!(a.iter().max().unwrap() - a.iter().min().unwrap() <= 1);
            prop_assert!(a.windows(2).all(|w| w[0] >= w[1]));
        }
    }
}
