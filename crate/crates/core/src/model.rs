//! Shared data types: identifiers, the success matrix, the feature store,
//! data splits and reference sets.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::seeded_rng;

macro_rules! string_id {
    ($name:ident, $what:literal) => {
        #[doc = concat!("Opaque, non-empty ", $what, " identifier.")]
        #[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(try_from = "String", into = "String")]
        pub struct $name(String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Result<Self> {
                let id = id.into();
                if id.is_empty() {
                    return Err(Error::Invalid(concat!("empty ", $what, " id").into()));
                }
                Ok(Self(id))
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl TryFrom<String> for $name {
            type Error = Error;
            fn try_from(s: String) -> Result<Self> {
                Self::new(s)
            }
        }

        impl From<$name> for String {
            fn from(id: $name) -> String {
                id.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }
    };
}

string_id!(InstanceId, "instance");
string_id!(LlmId, "LLM");

/// Build ids from string slices, panicking on empty strings. Handy in tests and examples.
pub fn instance_ids<S: AsRef<str>>(ids: &[S]) -> Vec<InstanceId> {
    ids.iter()
        .map(|s| InstanceId::new(s.as_ref()).expect("non-empty id"))
        .collect()
}

pub fn llm_ids<S: AsRef<str>>(ids: &[S]) -> Vec<LlmId> {
    ids.iter()
        .map(|s| LlmId::new(s.as_ref()).expect("non-empty id"))
        .collect()
}

fn index_unique<T: Clone + Eq + std::hash::Hash + fmt::Display>(
    ids: &[T],
) -> Result<HashMap<T, usize>> {
    let mut map = HashMap::with_capacity(ids.len());
    for (i, id) in ids.iter().enumerate() {
        if map.insert(id.clone(), i).is_some() {
            return Err(Error::DuplicateId(id.to_string()));
        }
    }
    Ok(map)
}

/// Binary success outcomes, rows = LLMs, columns = instances.
#[derive(Clone, Debug, PartialEq)]
pub struct SuccessMatrix {
    llm_ids: Vec<LlmId>,
    instance_ids: Vec<InstanceId>,
    values: Vec<u8>,
    llm_index: HashMap<LlmId, usize>,
    instance_index: HashMap<InstanceId, usize>,
}

impl SuccessMatrix {
    /// `values` is row-major with one row per LLM.
    pub fn new(llm_ids: Vec<LlmId>, instance_ids: Vec<InstanceId>, values: Vec<u8>) -> Result<Self> {
        let llm_index = index_unique(&llm_ids)?;
        let instance_index = index_unique(&instance_ids)?;
        if values.len() != llm_ids.len() * instance_ids.len() {
            return Err(Error::Dimension {
                expected: llm_ids.len() * instance_ids.len(),
                got: values.len(),
            });
        }
        if let Some(pos) = values.iter().position(|&v| v > 1) {
            let n = instance_ids.len().max(1);
            return Err(Error::Invalid(format!(
                "non-binary value {} at row {}, col {}",
                values[pos],
                pos / n,
                pos % n
            )));
        }
        Ok(Self {
            llm_ids,
            instance_ids,
            values,
            llm_index,
            instance_index,
        })
    }

    pub fn from_rows(llm_ids: Vec<LlmId>, instance_ids: Vec<InstanceId>, rows: Vec<Vec<u8>>) -> Result<Self> {
        let width = instance_ids.len();
        if let Some(bad) = rows.iter().position(|r| r.len() != width) {
            return Err(Error::Invalid(format!(
                "row {bad} has {} cells, expected {width}",
                rows[bad].len()
            )));
        }
        Self::new(llm_ids, instance_ids, rows.concat())
    }

    pub fn llm_ids(&self) -> &[LlmId] {
        &self.llm_ids
    }

    pub fn instance_ids(&self) -> &[InstanceId] {
        &self.instance_ids
    }

    pub fn n_llms(&self) -> usize {
        self.llm_ids.len()
    }

    pub fn n_instances(&self) -> usize {
        self.instance_ids.len()
    }

    pub fn get(&self, llm: usize, instance: usize) -> u8 {
        self.values[llm * self.instance_ids.len() + instance]
    }

    pub fn row(&self, llm: usize) -> &[u8] {
        let n = self.instance_ids.len();
        &self.values[llm * n..(llm + 1) * n]
    }

    pub fn llm_position(&self, id: &LlmId) -> Option<usize> {
        self.llm_index.get(id).copied()
    }

    pub fn instance_position(&self, id: &InstanceId) -> Option<usize> {
        self.instance_index.get(id).copied()
    }

    /// Outcome of `llm` on `instance`, by id.
    pub fn outcome(&self, llm: &LlmId, instance: &InstanceId) -> Option<u8> {
        Some(self.get(self.llm_position(llm)?, self.instance_position(instance)?))
    }

    /// Outcomes of one LLM over an ordered list of instances.
    pub fn outcomes(&self, llm: &LlmId, instances: &[InstanceId]) -> Result<Vec<u8>> {
        let j = self
            .llm_position(llm)
            .ok_or_else(|| Error::Invalid(format!("unknown LLM `{llm}`")))?;
        instances
            .iter()
            .map(|id| {
                self.instance_position(id)
                    .map(|i| self.get(j, i))
                    .ok_or_else(|| Error::MissingIds(vec![id.to_string()]))
            })
            .collect()
    }

    /// Sub-matrix over the given LLMs and instances, in the given orders.
    pub fn select(&self, llms: &[LlmId], instances: &[InstanceId]) -> Result<Self> {
        let rows: Vec<usize> = llms
            .iter()
            .map(|id| {
                self.llm_position(id)
                    .ok_or_else(|| Error::Invalid(format!("unknown LLM `{id}`")))
            })
            .collect::<Result<_>>()?;
        let cols: Vec<usize> = instances
            .iter()
            .map(|id| {
                self.instance_position(id)
                    .ok_or_else(|| Error::MissingIds(vec![id.to_string()]))
            })
            .collect::<Result<_>>()?;
        let mut values = Vec::with_capacity(rows.len() * cols.len());
        for &j in &rows {
            values.extend(cols.iter().map(|&i| self.get(j, i)));
        }
        Self::new(llms.to_vec(), instances.to_vec(), values)
    }

    pub fn has_both_classes(&self) -> bool {
        self.values.contains(&0) && self.values.contains(&1)
    }
}

/// Dense per-instance feature vectors with dataset labels.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureStore {
    instance_ids: Vec<InstanceId>,
    dim: usize,
    vectors: Vec<f64>,
    dataset_labels: Vec<String>,
    prompts: Vec<Option<String>>,
    index: HashMap<InstanceId, usize>,
}

impl FeatureStore {
    /// `vectors` is row-major, one row of width `dim` per instance.
    pub fn new(
        instance_ids: Vec<InstanceId>,
        dim: usize,
        vectors: Vec<f64>,
        dataset_labels: Vec<String>,
    ) -> Result<Self> {
        let n = instance_ids.len();
        Self::with_prompts(instance_ids, dim, vectors, dataset_labels, vec![None; n])
    }

    pub fn with_prompts(
        instance_ids: Vec<InstanceId>,
        dim: usize,
        vectors: Vec<f64>,
        dataset_labels: Vec<String>,
        prompts: Vec<Option<String>>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Invalid("feature dimension must be at least 1".into()));
        }
        let index = index_unique(&instance_ids)?;
        let n = instance_ids.len();
        if vectors.len() != n * dim {
            return Err(Error::Dimension {
                expected: n * dim,
                got: vectors.len(),
            });
        }
        if dataset_labels.len() != n || prompts.len() != n {
            return Err(Error::Invalid(
                "dataset labels and prompts must have one entry per instance".into(),
            ));
        }
        if let Some(pos) = vectors.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite feature at instance `{}`",
                instance_ids[pos / dim]
            )));
        }
        Ok(Self {
            instance_ids,
            dim,
            vectors,
            dataset_labels,
            prompts,
            index,
        })
    }

    pub fn from_rows(
        instance_ids: Vec<InstanceId>,
        rows: Vec<Vec<f64>>,
        dataset_labels: Vec<String>,
    ) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != dim) {
            return Err(Error::Dimension {
                expected: dim,
                got: rows[bad].len(),
            });
        }
        Self::new(instance_ids, dim, rows.concat(), dataset_labels)
    }

    pub fn instance_ids(&self) -> &[InstanceId] {
        &self.instance_ids
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.instance_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instance_ids.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    pub fn vectors(&self) -> &[f64] {
        &self.vectors
    }

    pub fn dataset_labels(&self) -> &[String] {
        &self.dataset_labels
    }

    pub fn prompts(&self) -> &[Option<String>] {
        &self.prompts
    }

    pub fn position(&self, id: &InstanceId) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn vector(&self, id: &InstanceId) -> Option<&[f64]> {
        self.position(id).map(|i| self.row(i))
    }

    /// Restrict and reorder to `ids`.
    pub fn select(&self, ids: &[InstanceId]) -> Result<Self> {
        let mut missing = Vec::new();
        let mut rows = Vec::with_capacity(ids.len());
        for id in ids {
            match self.position(id) {
                Some(i) => rows.push(i),
                None => missing.push(id.to_string()),
            }
        }
        if !missing.is_empty() {
            return Err(Error::MissingIds(missing));
        }
        let mut vectors = Vec::with_capacity(ids.len() * self.dim);
        for &i in &rows {
            vectors.extend_from_slice(self.row(i));
        }
        Self::with_prompts(
            ids.to_vec(),
            self.dim,
            vectors,
            rows.iter().map(|&i| self.dataset_labels[i].clone()).collect(),
            rows.iter().map(|&i| self.prompts[i].clone()).collect(),
        )
    }

    /// Same instances with a new set of vectors.
    pub fn with_vectors(&self, dim: usize, vectors: Vec<f64>) -> Result<Self> {
        Self::with_prompts(
            self.instance_ids.clone(),
            dim,
            vectors,
            self.dataset_labels.clone(),
            self.prompts.clone(),
        )
    }
}

/// How instances are partitioned.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SplitMode {
    RandomFraction { train_frac: f64, val_frac: f64 },
    /// Every instance of a named dataset goes to test; the rest is shuffled
    /// and cut into train (`train_frac` of it) and val (the remainder).
    OodByDataset {
        test_datasets: Vec<String>,
        #[serde(default = "default_ood_train_frac")]
        train_frac: f64,
    },
}

fn default_ood_train_frac() -> f64 {
    0.9
}

impl Default for SplitMode {
    fn default() -> Self {
        SplitMode::RandomFraction {
            train_frac: 0.8,
            val_frac: 0.1,
        }
    }
}

/// How LLMs are partitioned.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LlmSplit {
    RandomFraction { train_frac: f64, val_frac: f64 },
    /// First `train` shuffled LLMs go to train, the next `val` to val, the rest to test.
    Counts { train: usize, val: usize },
    Explicit {
        train: Vec<LlmId>,
        val: Vec<LlmId>,
        test: Vec<LlmId>,
    },
}

impl Default for LlmSplit {
    fn default() -> Self {
        LlmSplit::RandomFraction {
            train_frac: 0.8,
            val_frac: 0.1,
        }
    }
}

/// Disjoint train/val/test partitions of instances and of LLMs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub train_instances: Vec<InstanceId>,
    pub val_instances: Vec<InstanceId>,
    pub test_instances: Vec<InstanceId>,
    pub train_llms: Vec<LlmId>,
    pub val_llms: Vec<LlmId>,
    pub test_llms: Vec<LlmId>,
    pub seed: u64,
    pub mode: SplitMode,
}

fn floor_count(frac: f64, n: usize) -> usize {
    // tolerate representation error such as 0.29 * 100 = 28.999999999999996
    ((frac * n as f64) + 1e-9).floor() as usize
}

fn check_fractions(train: f64, val: f64, what: &str) -> Result<()> {
    let ok = train > 0.0 && train < 1.0 && val > 0.0 && val < 1.0 && train + val < 1.0;
    if ok {
        Ok(())
    } else {
        Err(Error::Invalid(format!(
            "{what}: fractions must lie in (0,1) with train + val < 1, got {train}/{val}"
        )))
    }
}

fn cut<T: Clone>(items: &[T], n_train: usize, n_val: usize) -> (Vec<T>, Vec<T>, Vec<T>) {
    (
        items[..n_train].to_vec(),
        items[n_train..n_train + n_val].to_vec(),
        items[n_train + n_val..].to_vec(),
    )
}

fn non_empty<T>(set: &[T], name: &str) -> Result<()> {
    if set.is_empty() {
        Err(Error::EmptySplit(name.into()))
    } else {
        Ok(())
    }
}

/// Partition instances and LLMs. Inputs are sorted before shuffling, so the
/// result depends only on the id sets, labels, modes and seed.
pub fn make_split(
    instance_ids: &[InstanceId],
    dataset_labels: &[String],
    llm_ids: &[LlmId],
    mode: &SplitMode,
    llm_split: &LlmSplit,
    seed: u64,
) -> Result<SplitPlan> {
    if instance_ids.len() != dataset_labels.len() {
        return Err(Error::Invalid("one dataset label per instance required".into()));
    }
    index_unique(instance_ids)?;
    index_unique(llm_ids)?;

    let mut labelled: Vec<(InstanceId, &str)> = instance_ids
        .iter()
        .cloned()
        .zip(dataset_labels.iter().map(String::as_str))
        .collect();
    labelled.sort();

    let mut rng = seeded_rng(seed);
    let (train_instances, val_instances, test_instances) = match mode {
        SplitMode::RandomFraction {
            train_frac,
            val_frac,
        } => {
            check_fractions(*train_frac, *val_frac, "instance split")?;
            let mut ids: Vec<InstanceId> = labelled.into_iter().map(|(id, _)| id).collect();
            ids.shuffle(&mut rng);
            let n = ids.len();
            cut(&ids, floor_count(*train_frac, n), floor_count(*val_frac, n))
        }
        SplitMode::OodByDataset {
            test_datasets,
            train_frac,
        } => {
            if !(*train_frac > 0.0 && *train_frac < 1.0) {
                return Err(Error::Invalid(format!(
                    "ood train fraction must lie in (0,1), got {train_frac}"
                )));
            }
            let known: BTreeSet<&str> = labelled.iter().map(|(_, l)| *l).collect();
            if test_datasets.is_empty() {
                return Err(Error::Invalid("ood split needs at least one test dataset".into()));
            }
            for name in test_datasets {
                if !known.contains(name.as_str()) {
                    return Err(Error::UnknownDataset(name.clone()));
                }
            }
            let named: HashSet<&str> = test_datasets.iter().map(String::as_str).collect();
            if named.len() == known.len() {
                return Err(Error::Invalid(
                    "ood test datasets must be a proper subset of the dataset labels".into(),
                ));
            }
            let (test, mut rest): (Vec<_>, Vec<_>) =
                labelled.into_iter().partition(|(_, l)| named.contains(l));
            rest.shuffle(&mut rng);
            let rest: Vec<InstanceId> = rest.into_iter().map(|(id, _)| id).collect();
            let n_train = floor_count(*train_frac, rest.len());
            let (train, val, _) = cut(&rest, n_train, rest.len() - n_train);
            (train, val, test.into_iter().map(|(id, _)| id).collect())
        }
    };

    let (train_llms, val_llms, test_llms) = match llm_split {
        LlmSplit::RandomFraction {
            train_frac,
            val_frac,
        } => {
            check_fractions(*train_frac, *val_frac, "LLM split")?;
            let mut ids = llm_ids.to_vec();
            ids.sort();
            ids.shuffle(&mut rng);
            let n = ids.len();
            cut(&ids, floor_count(*train_frac, n), floor_count(*val_frac, n))
        }
        LlmSplit::Counts { train, val } => {
            if train + val > llm_ids.len() {
                return Err(Error::Invalid(format!(
                    "LLM split asks for {} LLMs, only {} available",
                    train + val,
                    llm_ids.len()
                )));
            }
            let mut ids = llm_ids.to_vec();
            ids.sort();
            ids.shuffle(&mut rng);
            cut(&ids, *train, *val)
        }
        LlmSplit::Explicit { train, val, test } => {
            let all: Vec<LlmId> = train.iter().chain(val).chain(test).cloned().collect();
            index_unique(&all)?;
            let given: HashSet<&LlmId> = all.iter().collect();
            let expected: HashSet<&LlmId> = llm_ids.iter().collect();
            if given != expected {
                return Err(Error::Invalid(
                    "explicit LLM split must cover exactly the matrix LLMs".into(),
                ));
            }
            (train.clone(), val.clone(), test.clone())
        }
    };

    non_empty(&train_instances, "train instances")?;
    non_empty(&val_instances, "val instances")?;
    non_empty(&test_instances, "test instances")?;
    non_empty(&train_llms, "train LLMs")?;
    non_empty(&val_llms, "val LLMs")?;
    non_empty(&test_llms, "test LLMs")?;

    Ok(SplitPlan {
        train_instances,
        val_instances,
        test_instances,
        train_llms,
        val_llms,
        test_llms,
        seed,
        mode: mode.clone(),
    })
}

/// Reorder a matrix and a store to the same lexicographic instance order.
/// The store is restricted to the matrix's instances.
pub fn align(matrix: &SuccessMatrix, store: &FeatureStore) -> Result<(SuccessMatrix, FeatureStore)> {
    if store.dim() == 0 {
        return Err(Error::Invalid("feature store has dimension zero".into()));
    }
    let missing: Vec<String> = matrix
        .instance_ids()
        .iter()
        .filter(|id| store.position(id).is_none())
        .map(ToString::to_string)
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingIds(missing));
    }
    let mut order = matrix.instance_ids().to_vec();
    order.sort();
    Ok((
        matrix.select(matrix.llm_ids(), &order)?,
        store.select(&order)?,
    ))
}

/// Ordered reference instances plus provenance.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceSet {
    pub selector: String,
    pub n_ref: usize,
    pub instance_ids: Vec<InstanceId>,
    pub seed: u64,
    #[serde(default)]
    pub config_digest: String,
}

impl ReferenceSet {
    pub fn new(
        selector: impl Into<String>,
        instance_ids: Vec<InstanceId>,
        seed: u64,
        config_digest: impl Into<String>,
    ) -> Result<Self> {
        index_unique(&instance_ids)?;
        Ok(Self {
            selector: selector.into(),
            n_ref: instance_ids.len(),
            instance_ids,
            seed,
            config_digest: config_digest.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.instance_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instance_ids.is_empty()
    }

    /// Check the set against a train split.
    pub fn check_within(&self, train: &[InstanceId]) -> Result<()> {
        let train: HashSet<&InstanceId> = train.iter().collect();
        let outside: Vec<String> = self
            .instance_ids
            .iter()
            .filter(|id| !train.contains(id))
            .map(ToString::to_string)
            .collect();
        if outside.is_empty() {
            Ok(())
        } else {
            Err(Error::Invalid(format!(
                "reference ids outside the train split: {}",
                outside.join(", ")
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(n: usize, label: &str) -> Vec<String> {
        vec![label.to_string(); n]
    }

    fn ids(prefix: &str, n: usize) -> Vec<String> {
        (0..n).map(|i| format!("{prefix}{i:02}")).collect()
    }

    #[test]
    fn random_split_sizes() {
        let inst = instance_ids(&ids("i", 10));
        let llms = llm_ids(&ids("m", 10));
        let plan = make_split(
            &inst,
            &labels(10, "d"),
            &llms,
            &SplitMode::default(),
            &LlmSplit::default(),
            7,
        )
        .unwrap();
        assert_eq!(plan.train_instances.len(), 8);
        assert_eq!(plan.val_instances.len(), 1);
        assert_eq!(plan.test_instances.len(), 1);
        let all: BTreeSet<_> = plan
            .train_instances
            .iter()
            .chain(&plan.val_instances)
            .chain(&plan.test_instances)
            .collect();
        assert_eq!(all.len(), 10);
    }

    #[test]
    fn ood_split_puts_named_dataset_in_test() {
        let inst = instance_ids(&ids("i", 10));
        let mut lab = labels(5, "A");
        lab.extend(labels(5, "B"));
        let llms = llm_ids(&ids("m", 3));
        let mode = SplitMode::OodByDataset {
            test_datasets: vec!["B".into()],
            train_frac: 0.8,
        };
        let plan = make_split(&inst, &lab, &llms, &mode, &LlmSplit::Counts { train: 1, val: 1 }, 3).unwrap();
        let test: BTreeSet<_> = plan.test_instances.iter().map(|i| i.as_str()).collect();
        assert_eq!(test, ids("i", 10)[5..].iter().map(String::as_str).collect());
        let mut rest: Vec<_> = plan.train_instances.iter().chain(&plan.val_instances).cloned().collect();
        rest.sort();
        assert_eq!(rest, inst[..5].to_vec());
    }

    #[test]
    fn split_errors() {
        let inst = instance_ids(&ids("i", 10));
        let llms = llm_ids(&ids("m", 10));
        let lab = labels(10, "A");
        let unknown = SplitMode::OodByDataset {
            test_datasets: vec!["Z".into()],
            train_frac: 0.9,
        };
        assert!(matches!(
            make_split(&inst, &lab, &llms, &unknown, &LlmSplit::default(), 0),
            Err(Error::UnknownDataset(_))
        ));
        let whole = SplitMode::OodByDataset {
            test_datasets: vec!["A".into()],
            train_frac: 0.9,
        };
        assert!(make_split(&inst, &lab, &llms, &whole, &LlmSplit::default(), 0).is_err());

        let tiny = instance_ids(&ids("i", 3));
        assert!(matches!(
            make_split(&tiny, &labels(3, "A"), &llms, &SplitMode::default(), &LlmSplit::default(), 0),
            Err(Error::EmptySplit(_))
        ));

        let dup = instance_ids(&["a", "a", "b"]);
        assert!(matches!(
            make_split(&dup, &labels(3, "A"), &llms, &SplitMode::default(), &LlmSplit::default(), 0),
            Err(Error::DuplicateId(_))
        ));
    }

    #[test]
    fn split_json_keys() {
        let inst = instance_ids(&ids("i", 10));
        let llms = llm_ids(&ids("m", 10));
        let plan = make_split(&inst, &labels(10, "d"), &llms, &SplitMode::default(), &LlmSplit::default(), 1).unwrap();
        let v = serde_json::to_value(&plan).unwrap();
        for key in [
            "train_instances",
            "val_instances",
            "test_instances",
            "train_llms",
            "val_llms",
            "test_llms",
            "seed",
            "mode",
        ] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        let back: SplitPlan = serde_json::from_value(v).unwrap();
        assert_eq!(back, plan);
    }

    fn small_pair() -> (SuccessMatrix, FeatureStore) {
        let m = SuccessMatrix::from_rows(
            llm_ids(&["m1", "m2"]),
            instance_ids(&["b", "a"]),
            vec![vec![1, 0], vec![0, 0]],
        )
        .unwrap();
        let s = FeatureStore::from_rows(
            instance_ids(&["a", "b"]),
            vec![vec![1.0], vec![2.0]],
            labels(2, "d"),
        )
        .unwrap();
        (m, s)
    }

    #[test]
    fn align_reorders_columns() {
        let (m, s) = small_pair();
        let (m2, s2) = align(&m, &s).unwrap();
        assert_eq!(m2.instance_ids(), &instance_ids(&["a", "b"])[..]);
        assert_eq!(m2.row(0), &[0, 1]);
        assert_eq!(s2.row(0), &[1.0]);
        let (m3, s3) = align(&m2, &s2).unwrap();
        assert_eq!((m3, s3), (m2, s2));
    }

    #[test]
    fn align_reports_missing() {
        let (_, s) = small_pair();
        let m = SuccessMatrix::from_rows(llm_ids(&["m"]), instance_ids(&["a", "c"]), vec![vec![1, 1]]).unwrap();
        match align(&m, &s) {
            Err(Error::MissingIds(ids)) => assert_eq!(ids, vec!["c".to_string()]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn matrix_rejects_bad_input() {
        assert!(SuccessMatrix::new(llm_ids(&["m"]), instance_ids(&["a"]), vec![2]).is_err());
        assert!(SuccessMatrix::new(llm_ids(&["m", "m"]), instance_ids(&["a"]), vec![0, 1]).is_err());
        assert!(InstanceId::new("").is_err());
    }

    #[test]
    fn store_rejects_non_finite() {
        let r = FeatureStore::from_rows(instance_ids(&["a"]), vec![vec![f64::NAN]], labels(1, "d"));
        assert!(r.is_err());
    }
}
