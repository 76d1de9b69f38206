//! Run configuration: one JSON document naming inputs, split, grid and seeds.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::synthetic::SyntheticConfig;
use crate::assessors::FeatureMode;
use crate::classifiers::ClassifierSpec;
use crate::error::{Error, Result};
use crate::irt::IrtConfig;
use crate::model::{LlmSplit, SplitMode};
use crate::selectors::{FeatureSource, SelectionMethod};
use crate::util::digest;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub instances: SplitMode,
    pub llms: LlmSplit,
}

/// A selector in the grid; `n_ref` and the seed come from the run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectorChoice {
    pub method: SelectionMethod,
    /// Required by clustering and factor analysis, ignored otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_source: Option<FeatureSource>,
}

impl SelectorChoice {
    pub fn new(method: SelectionMethod, feature_source: Option<FeatureSource>) -> Self {
        Self {
            method,
            feature_source,
        }
    }

    pub fn random() -> Self {
        Self::new(SelectionMethod::Random, None)
    }

    /// Six feature-based selectors, random, and random best-of-20.
    pub fn all() -> Vec<SelectorChoice> {
        let mut out = Vec::new();
        for method in [SelectionMethod::Clustering, SelectionMethod::FactorAnalysis] {
            for source in [FeatureSource::IntrinsicFeatures, FeatureSource::SuccessColumns, FeatureSource::IrtDemands] {
                out.push(Self::new(method, Some(source)));
            }
        }
        out.push(Self::random());
        out.push(Self::new(SelectionMethod::RandomBestOf20, None));
        out
    }
}

/// Classifier and feature mode used to score random best-of-20 candidates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BestOf20Config {
    pub classifier: ClassifierSpec,
    pub mode: FeatureMode,
}

impl Default for BestOf20Config {
    fn default() -> Self {
        Self {
            classifier: ClassifierSpec::logreg_l2(1e-3),
            mode: FeatureMode::Embeddings,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub success_csv: Option<PathBuf>,
    pub embeddings_jsonl: Option<PathBuf>,
    /// Keep only the first `truncate` embedding coordinates.
    pub truncate: Option<usize>,
    /// Replace embeddings with 1-gram features over the prompts, capped to this vocabulary size.
    pub one_gram_vocab: Option<usize>,
    pub split: SplitConfig,
    pub seed: u64,
    pub selectors: Vec<SelectorChoice>,
    pub feature_modes: Vec<FeatureMode>,
    pub classifiers: Vec<ClassifierSpec>,
    pub n_ref: usize,
    pub irt: IrtConfig,
    pub best_of_20: BestOf20Config,
    pub output_dir: PathBuf,
    /// Worker count; defaults to the available parallelism.
    pub jobs: Option<usize>,
    pub sweep_n_ref: Vec<usize>,
    pub synthetic: Option<SyntheticConfig>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            success_csv: None,
            embeddings_jsonl: None,
            truncate: None,
            one_gram_vocab: None,
            split: SplitConfig::default(),
            seed: 0,
            selectors: SelectorChoice::all(),
            feature_modes: FeatureMode::ALL.to_vec(),
            classifiers: ClassifierSpec::default_grid(),
            n_ref: 100,
            irt: IrtConfig::default(),
            best_of_20: BestOf20Config::default(),
            output_dir: PathBuf::from("out"),
            jobs: None,
            sweep_n_ref: vec![25, 50, 100, 200, 400],
            synthetic: None,
        }
    }
}

fn config_error(pointer: impl Into<String>, msg: impl Into<String>) -> Error {
    Error::Config {
        pointer: pointer.into(),
        msg: msg.into(),
    }
}

/// `a.b[2].c` style serde paths as JSON pointers (`/a/b/2/c`).
fn pointer_from_path(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        match seg {
            Segment::Seq { index } => out.push_str(&index.to_string()),
            Segment::Map { key } => out.push_str(&key.replace('~', "~0").replace('/', "~1")),
            Segment::Enum { variant } => out.push_str(variant),
            Segment::Unknown => out.push('?'),
        }
    }
    if out.is_empty() {
        out.push('/');
    }
    out
}

impl RunConfig {
    /// Parse JSON text; schema errors carry the JSON pointer of the offending value.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let pointer = pointer_from_path(e.path());
            config_error(pointer, e.into_inner().to_string())
        })?;
        config.validate()?;
        Ok(config)
    }

    /// Read a config file; relative input paths resolve against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut config.success_csv, &mut config.embeddings_jsonl].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_ref == 0 {
            return Err(config_error("/n_ref", "must be at least 1"));
        }
        if self.truncate == Some(0) {
            return Err(config_error("/truncate", "must be at least 1"));
        }
        if self.one_gram_vocab == Some(0) {
            return Err(config_error("/one_gram_vocab", "must be at least 1"));
        }
        if self.jobs == Some(0) {
            return Err(config_error("/jobs", "must be at least 1"));
        }
        if self.selectors.is_empty() {
            return Err(config_error("/selectors", "at least one selector required"));
        }
        for (i, s) in self.selectors.iter().enumerate() {
            if s.method.uses_features() && s.feature_source.is_none() {
                return Err(config_error(
                    format!("/selectors/{i}/feature_source"),
                    format!("{} needs a feature_source", s.method.as_str()),
                ));
            }
        }
        if self.feature_modes.is_empty() {
            return Err(config_error("/feature_modes", "at least one feature mode required"));
        }
        if self.classifiers.is_empty() {
            return Err(config_error("/classifiers", "at least one classifier required"));
        }
        for (i, c) in self.classifiers.iter().enumerate() {
            c.validate().map_err(|e| config_error(format!("/classifiers/{i}"), e.to_string()))?;
        }
        self.best_of_20
            .classifier
            .validate()
            .map_err(|e| config_error("/best_of_20/classifier", e.to_string()))?;
        if self.irt.k == 0 {
            return Err(config_error("/irt/k", "must be at least 1"));
        }
        if let Some(i) = self.sweep_n_ref.iter().position(|&n| n == 0) {
            return Err(config_error(format!("/sweep_n_ref/{i}"), "must be at least 1"));
        }
        let frac_ok = |t: f64, v: f64| t > 0.0 && v > 0.0 && t + v < 1.0;
        if let SplitMode::RandomFraction { train_frac, val_frac } = self.split.instances {
            if !frac_ok(train_frac, val_frac) {
                return Err(config_error("/split/instances", "fractions must lie in (0,1) with train + val < 1"));
            }
        }
        if let LlmSplit::RandomFraction { train_frac, val_frac } = self.split.llms {
            if !frac_ok(train_frac, val_frac) {
                return Err(config_error("/split/llms", "fractions must lie in (0,1) with train + val < 1"));
            }
        }
        if let Some(s) = &self.synthetic {
            if s.n_llms == 0 || s.n_instances == 0 || s.k == 0 {
                return Err(config_error("/synthetic", "sizes must be positive"));
            }
        }
        Ok(())
    }

    /// Check that the input files named by the config exist.
    pub fn check_inputs(&self) -> Result<(PathBuf, PathBuf)> {
        let need = |p: &Option<PathBuf>, field: &str| -> Result<PathBuf> {
            let p = p.as_ref().ok_or_else(|| config_error(format!("/{field}"), "required"))?;
            if p.is_file() {
                Ok(p.clone())
            } else {
                Err(config_error(format!("/{field}"), format!("file not found: {}", p.display())))
            }
        };
        Ok((need(&self.success_csv, "success_csv")?, need(&self.embeddings_jsonl, "embeddings_jsonl")?))
    }

    /// Digest of everything that can change results. Output location and
    /// worker count are excluded.
    pub fn digest(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = PathBuf::new();
        canonical.jobs = None;
        digest(&serde_json::to_vec(&canonical).expect("serializable config"))
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable config")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_defaults() {
        let c = RunConfig::from_json("{}").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.selectors.len(), 8);
        assert_eq!(c.classifiers.len(), 12);
    }

    #[test]
    fn schema_errors_report_pointers() {
        let err = RunConfig::from_json(r#"{"classifiers": [{"family": "logreg_l2", "lambda": 0.1}, {"family": "nope"}]}"#).unwrap_err();
        assert!(matches!(&err, Error::Config { pointer, .. } if pointer == "/classifiers/1/family"), "{err}");
        let err = RunConfig::from_json(r#"{"split": {"instances": {"kind": "random_fraction", "train_frac": "x", "val_frac": 0.1}}}"#).unwrap_err();
        assert!(matches!(&err, Error::Config { pointer, .. } if pointer.starts_with("/split/instances")), "{err}");
        let err = RunConfig::from_json(r#"{"selectors": [{"method": "clustering"}]}"#).unwrap_err();
        assert!(matches!(&err, Error::Config { pointer, .. } if pointer == "/selectors/0/feature_source"));
        let err = RunConfig::from_json(r#"{"n_reff": 3}"#).unwrap_err();
        assert!(matches!(err, Error::Config { .. }));
        let err = RunConfig::from_json(r#"{"n_ref": 0}"#).unwrap_err();
        assert!(matches!(&err, Error::Config { pointer, .. } if pointer == "/n_ref"));
    }

    #[test]
    fn missing_input_names_the_field() {
        let c = RunConfig {
            success_csv: Some("/nonexistent/z.csv".into()),
            ..RunConfig::default()
        };
        let err = c.check_inputs().unwrap_err();
        assert!(matches!(&err, Error::Config { pointer, .. } if pointer == "/success_csv"));
    }

    #[test]
    fn digest_ignores_output_and_jobs() {
        let a = RunConfig::default();
        let b = RunConfig {
            output_dir: "elsewhere".into(),
            jobs: Some(3),
            ..RunConfig::default()
        };
        assert_eq!(a.digest(), b.digest());
        assert_ne!(a.digest(), RunConfig { seed: 1, ..RunConfig::default() }.digest());
        let round = RunConfig::from_json(&a.to_json_pretty()).unwrap();
        assert_eq!(round, a);
    }
}
