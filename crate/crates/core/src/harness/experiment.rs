//! Train every combination, pick one on validation LLMs, report on test LLMs.
//!
//! The run has two phases. The validation phase sees only the train view
//! (train LLMs × train instances) and the validation view (validation LLMs ×
//! train ∪ validation instances); it trains all combinations and the
//! baselines and makes every selection. The test phase then scores the
//! chosen models on test LLMs and test instances.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{RunConfig, SelectorChoice, TOOL_VERSION};
use super::winrate::{win_rate_select, WinRateSelection};
use crate::assessors::{
    auc_or_none, intrinsic_matrix, train_all_train_data, train_generic_assessor,
    train_generic_grid, train_reference_only, train_specific_assessor, FeatureMode, GenericAssessor, Standardizer,
};
use crate::classifiers::{ClassifierSpec, TrainedClassifier};
use crate::error::{Error, Result};
use crate::ingest::{load_embeddings_jsonl, load_success_csv, one_gram_from_store, truncate_embeddings};
use crate::irt::{fit_irt, IrtConfig, IrtModel};
use crate::model::{align, make_split, FeatureStore, InstanceId, LlmId, ReferenceSet, SplitPlan, SuccessMatrix};
use crate::selectors::{select, FeatureSource, SelectionInputs, SelectionMethod, SelectorSpec};
use crate::util::{derive_seed, mean};

/// One point of the grid: a selector, a feature mode and a classifier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Combination {
    pub combo_id: String,
    pub selector: SelectorSpec,
    pub mode: FeatureMode,
    pub classifier: ClassifierSpec,
}

impl Combination {
    pub fn new(selector: SelectorSpec, mode: FeatureMode, classifier: ClassifierSpec) -> Self {
        let combo_id = format!("{}|{}|{}", selector.name(), mode.as_str(), classifier.id());
        Self {
            combo_id,
            selector,
            mode,
            classifier,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LlmAuc {
    pub llm: LlmId,
    /// `null` when the LLM's labels on the split hold a single class.
    pub auc: Option<f64>,
}

fn mean_defined(values: &[LlmAuc]) -> Option<f64> {
    let defined: Vec<f64> = values.iter().filter_map(|v| v.auc).collect();
    (!defined.is_empty()).then(|| mean(&defined))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CombinationResult {
    pub combo_id: String,
    pub selector: String,
    pub mode: FeatureMode,
    pub classifier: ClassifierSpec,
    pub val_auc: Vec<LlmAuc>,
    pub val_mean_win_rate: f64,
    pub test_auc: Vec<LlmAuc>,
    pub mean_test_auc: Option<f64>,
}

/// The chosen generic assessor or one baseline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssessorResult {
    pub name: String,
    /// What validation picked: a combination id, a `selector|classifier` pair, or `per_llm`.
    pub choice: String,
    pub val_mean_win_rate: Option<f64>,
    pub val_auc: Vec<LlmAuc>,
    pub test_auc: Vec<LlmAuc>,
    pub mean_val_auc: Option<f64>,
    pub mean_test_auc: Option<f64>,
}

impl AssessorResult {
    fn new(name: &str, choice: String, val_mean_win_rate: Option<f64>, val_auc: Vec<LlmAuc>, test_auc: Vec<LlmAuc>) -> Self {
        Self {
            name: name.to_string(),
            choice,
            val_mean_win_rate,
            mean_val_auc: mean_defined(&val_auc),
            mean_test_auc: mean_defined(&test_auc),
            val_auc,
            test_auc,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub n_train_instances: usize,
    pub n_val_instances: usize,
    pub n_test_instances: usize,
    pub train_llms: Vec<LlmId>,
    pub val_llms: Vec<LlmId>,
    pub test_llms: Vec<LlmId>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tool_version: String,
    pub config_digest: String,
    pub seed: u64,
    pub n_ref: usize,
    pub split: SplitSummary,
    pub references: Vec<ReferenceSet>,
    pub combinations: Vec<CombinationResult>,
    pub dropped_validation_llms: Vec<LlmId>,
    pub winner: String,
    pub generic: AssessorResult,
    pub specific: AssessorResult,
    pub random_selector: AssessorResult,
    pub reference_only: AssessorResult,
    pub all_train_data: AssessorResult,
    pub warnings: Vec<String>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable report")
    }

    pub fn assessors(&self) -> [&AssessorResult; 5] {
        [&self.generic, &self.specific, &self.random_selector, &self.reference_only, &self.all_train_data]
    }

    pub fn combination(&self, combo_id: &str) -> Option<&CombinationResult> {
        self.combinations.iter().find(|c| c.combo_id == combo_id)
    }
}

/// Read, optionally truncate or replace with 1-gram features, and align the inputs.
pub fn load_inputs(config: &RunConfig) -> Result<(SuccessMatrix, FeatureStore)> {
    let (csv, jsonl) = config.check_inputs()?;
    let matrix = load_success_csv(csv)?;
    let mut store = load_embeddings_jsonl(jsonl)?;
    if let Some(k) = config.truncate {
        store = truncate_embeddings(&store, k)?;
    }
    align(&matrix, &store)
}

/// Matrices restricted to what each phase may read.
struct Views {
    plan: SplitPlan,
    /// train LLMs × train instances
    train: SuccessMatrix,
    /// validation LLMs × (train ∪ validation instances)
    val: SuccessMatrix,
    /// test LLMs × all instances
    test: SuccessMatrix,
}

fn sorted<T: Ord + Clone>(v: &[T]) -> Vec<T> {
    let mut v = v.to_vec();
    v.sort();
    v
}

fn views(matrix: &SuccessMatrix, store: &FeatureStore, config: &RunConfig) -> Result<Views> {
    let labels = store.dataset_labels().to_vec();
    let raw = make_split(
        store.instance_ids(),
        &labels,
        matrix.llm_ids(),
        &config.split.instances,
        &config.split.llms,
        config.seed,
    )?;
    let plan = SplitPlan {
        train_instances: sorted(&raw.train_instances),
        val_instances: sorted(&raw.val_instances),
        test_instances: sorted(&raw.test_instances),
        train_llms: sorted(&raw.train_llms),
        val_llms: sorted(&raw.val_llms),
        test_llms: sorted(&raw.test_llms),
        ..raw
    };
    let train_val: Vec<InstanceId> = sorted(&[plan.train_instances.clone(), plan.val_instances.clone()].concat());
    Ok(Views {
        train: matrix.select(&plan.train_llms, &plan.train_instances)?,
        val: matrix.select(&plan.val_llms, &train_val)?,
        test: matrix.select(&plan.test_llms, matrix.instance_ids())?,
        plan,
    })
}

/// The split a run with this config uses, with every list sorted.
pub fn split_plan(matrix: &SuccessMatrix, store: &FeatureStore, config: &RunConfig) -> Result<SplitPlan> {
    config.validate()?;
    let (matrix, store) = align(matrix, store)?;
    Ok(views(&matrix, &store, config)?.plan)
}

/// Per-validation-LLM AUC of a generic assessor on the validation instances.
pub fn evaluate_combination(
    assessor: &GenericAssessor,
    view: &SuccessMatrix,
    store: &FeatureStore,
    instances: &[InstanceId],
) -> Result<Vec<LlmAuc>> {
    view.llm_ids()
        .iter()
        .map(|llm| {
            let g = view.outcomes(llm, &assessor.reference.instance_ids)?;
            let scores = assessor.scores(&g, store, instances)?;
            let labels = view.outcomes(llm, instances)?;
            Ok(LlmAuc {
                llm: llm.clone(),
                auc: auc_or_none(&scores, &labels)?,
            })
        })
        .collect()
}

fn table(rows: &[Vec<LlmAuc>]) -> Vec<Vec<Option<f64>>> {
    rows.iter().map(|r| r.iter().map(|v| v.auc).collect()).collect()
}

/// Everything the validation phase decided.
struct Validated {
    references: Vec<ReferenceSet>,
    combos: Vec<(Combination, GenericAssessor, Vec<LlmAuc>)>,
    selection: WinRateSelection,
    /// Index of the best random-selector combination.
    random_best: Option<usize>,
    reference_only: (usize, usize, WinRateSelection, Vec<Vec<LlmAuc>>),
    all_train: (TrainedClassifier, WinRateSelection, Vec<LlmAuc>),
    warnings: Vec<String>,
}

fn selector_specs(config: &RunConfig) -> Vec<SelectorSpec> {
    let mut choices = config.selectors.clone();
    if !choices.iter().any(|c| c.method == SelectionMethod::Random) {
        choices.push(SelectorChoice::random());
    }
    let mut seen = BTreeSet::new();
    choices
        .iter()
        .map(|c| {
            let source = c.feature_source.unwrap_or(FeatureSource::IntrinsicFeatures);
            let mut spec = SelectorSpec::new(source, c.method, config.n_ref, 0);
            spec.seed = derive_seed(config.seed, &format!("selector/{}", spec.name()));
            spec
        })
        .filter(|s| seen.insert(s.name()))
        .collect()
}

fn choose_references(
    views: &Views,
    store: &FeatureStore,
    standardizer: &Standardizer,
    specs: &[SelectorSpec],
    config: &RunConfig,
) -> Result<Vec<ReferenceSet>> {
    let train = &views.train;
    let irt: Option<IrtModel> = if specs
        .iter()
        .any(|s| s.method.uses_features() && s.feature_source == FeatureSource::IrtDemands)
    {
        let irt_config = IrtConfig {
            seed: derive_seed(config.seed, "irt"),
            ..config.irt.clone()
        };
        Some(fit_irt(train, &irt_config)?)
    } else {
        None
    };
    let bo20 = &config.best_of_20;
    let score = |candidate: &ReferenceSet| -> Result<f64> {
        let assessor = train_generic_assessor(train, store, standardizer, candidate, bo20.mode, &bo20.classifier)?;
        let aucs = evaluate_combination(&assessor, &views.val, store, &views.plan.val_instances)?;
        mean_defined(&aucs).ok_or_else(|| Error::Degenerate("no validation LLM has a defined AUC".into()))
    };
    let inputs = SelectionInputs {
        train_matrix: train,
        store,
        irt: irt.as_ref(),
    };
    specs
        .par_iter()
        .map(|spec| select(spec, inputs, Some(&score)).map_err(|e| e.in_combination(&spec.name())))
        .collect()
}

fn with_jobs<T: Send>(config: &RunConfig, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match config.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Invalid(format!("worker pool: {e}")))?
            .install(f),
        None => f(),
    }
}

/// Aligned inputs, with 1-gram features substituted when configured.
fn prepare(matrix: &SuccessMatrix, store: &FeatureStore, config: &RunConfig) -> Result<(SuccessMatrix, FeatureStore, Views)> {
    config.validate()?;
    let (matrix, store) = align(matrix, store)?;
    let store = match config.one_gram_vocab {
        Some(cap) => one_gram_from_store(&store, &views(&matrix, &store, config)?.plan.train_instances, cap)?,
        None => store,
    };
    let views = views(&matrix, &store, config)?;
    Ok((matrix, store, views))
}

/// Reference sets of every configured selector (plus random), chosen from train data only.
pub fn select_references(matrix: &SuccessMatrix, store: &FeatureStore, config: &RunConfig) -> Result<Vec<ReferenceSet>> {
    let (_, store, views) = prepare(matrix, store, config)?;
    let standardizer = Standardizer::fit(&store, &views.plan.train_instances)?;
    with_jobs(config, || choose_references(&views, &store, &standardizer, &selector_specs(config), config))
}

fn validation_phase(views: &Views, store: &FeatureStore, config: &RunConfig) -> Result<Validated> {
    let train = &views.train;
    let val = &views.val;
    let val_ids = &views.plan.val_instances;
    let standardizer = Standardizer::fit(store, train.instance_ids())?;
    let mut warnings = Vec::new();
    let specs = selector_specs(config);
    let references = choose_references(views, store, &standardizer, &specs, config)?;

    // one pool per (selector, mode); the classifier grid shares it
    let jobs: Vec<(usize, FeatureMode)> = (0..specs.len())
        .flat_map(|s| config.feature_modes.iter().map(move |&m| (s, m)))
        .collect();
    let trained = jobs
        .par_iter()
        .map(|&(s, mode)| {
            let reference = &references[s];
            let fail = |e: Error, classifier: Option<&ClassifierSpec>| {
                let id = match classifier {
                    Some(c) => Combination::new(specs[s].clone(), mode, c.clone()).combo_id,
                    None => format!("{}|{}", specs[s].name(), mode.as_str()),
                };
                e.in_combination(&id)
            };
            let grid = train_generic_grid(train, store, &standardizer, reference, mode, &config.classifiers)
                .map_err(|e| fail(e, None))?;
            grid.into_iter()
                .zip(&config.classifiers)
                .map(|(assessor, spec)| {
                    let combo = Combination::new(specs[s].clone(), mode, spec.clone());
                    let assessor = assessor.map_err(|e| fail(e, Some(spec)))?;
                    let aucs = evaluate_combination(&assessor, val, store, val_ids).map_err(|e| fail(e, Some(spec)))?;
                    Ok((combo, assessor, aucs))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let combos: Vec<_> = trained.into_iter().flatten().collect();

    let ids: Vec<String> = combos.iter().map(|c| c.0.combo_id.clone()).collect();
    let rows: Vec<Vec<LlmAuc>> = combos.iter().map(|c| c.2.clone()).collect();
    let selection = win_rate_select(&ids, &table(&rows))?;
    for &m in &selection.dropped_llms {
        warnings.push(format!("validation LLM {} has an undefined AUC and was dropped", val.llm_ids()[m]));
    }
    let random_best = (0..combos.len())
        .filter(|&c| combos[c].0.selector.method == SelectionMethod::Random)
        .max_by(|&a, &b| {
            selection.mean_win_rates[a]
                .total_cmp(&selection.mean_win_rates[b])
                .then_with(|| ids[b].cmp(&ids[a]))
        });

    // reference only: every (reference, classifier) pair, fitted per validation LLM
    let val_features = intrinsic_matrix(store, &standardizer, val_ids)?;
    let pairs: Vec<(usize, usize)> = (0..references.len())
        .flat_map(|r| (0..config.classifiers.len()).map(move |c| (r, c)))
        .collect();
    let ro_rows = pairs
        .par_iter()
        .map(|&(r, c)| {
            let reference = &references[r];
            val.llm_ids()
                .iter()
                .map(|llm| {
                    let g = val.outcomes(llm, &reference.instance_ids)?;
                    let fit = train_reference_only(store, &standardizer, reference, &g, &config.classifiers[c])?;
                    Ok(LlmAuc {
                        llm: llm.clone(),
                        auc: auc_or_none(&fit.margins(&val_features)?, &val.outcomes(llm, val_ids)?)?,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let ro_ids: Vec<String> = pairs
        .iter()
        .map(|&(r, c)| format!("{}|{}", specs[r].name(), config.classifiers[c].id()))
        .collect();
    let ro_sel = win_rate_select(&ro_ids, &table(&ro_rows))?;
    let (ro_ref, ro_clf) = pairs[ro_sel.winner];

    // all train data: intrinsic features only, pooled over train LLMs
    let fitted = train_all_train_data(train, store, &standardizer, &config.classifiers)?
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let at_rows = fitted
        .iter()
        .map(|clf| {
            let scores = clf.margins(&val_features)?;
            val.llm_ids()
                .iter()
                .map(|llm| {
                    Ok(LlmAuc {
                        llm: llm.clone(),
                        auc: auc_or_none(&scores, &val.outcomes(llm, val_ids)?)?,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let at_ids: Vec<String> = config.classifiers.iter().map(ClassifierSpec::id).collect();
    let at_sel = win_rate_select(&at_ids, &table(&at_rows))?;
    let at_best = fitted[at_sel.winner].clone();
    let at_val = at_rows[at_sel.winner].clone();

    Ok(Validated {
        references,
        combos,
        selection,
        random_best,
        reference_only: (ro_ref, ro_clf, ro_sel, ro_rows),
        all_train: (at_best, at_sel, at_val),
        warnings,
    })
}

/// Train, select on validation LLMs, and evaluate on test LLMs.
pub fn run_experiment_on(matrix: &SuccessMatrix, store: &FeatureStore, config: &RunConfig) -> Result<EvalReport> {
    let (_, store, views) = prepare(matrix, store, config)?;
    with_jobs(config, || {
        let validated = validation_phase(&views, &store, config)?;
        test_phase(&views, &store, config, validated)
    })
}

/// [`run_experiment_on`] over the files named in the config.
pub fn run_experiment(config: &RunConfig) -> Result<EvalReport> {
    let (matrix, store) = load_inputs(config)?;
    run_experiment_on(&matrix, &store, config)
}

fn test_aucs(view: &SuccessMatrix, instances: &[InstanceId], scores: impl Fn(&LlmId) -> Result<Vec<f64>>) -> Result<Vec<LlmAuc>> {
    view.llm_ids()
        .iter()
        .map(|llm| {
            Ok(LlmAuc {
                llm: llm.clone(),
                auc: auc_or_none(&scores(llm)?, &view.outcomes(llm, instances)?)?,
            })
        })
        .collect()
}

fn test_phase(views: &Views, store: &FeatureStore, config: &RunConfig, v: Validated) -> Result<EvalReport> {
    let test = &views.test;
    let test_ids = &views.plan.test_instances;
    let standardizer = Standardizer::fit(store, &views.plan.train_instances)?;
    let mut warnings = v.warnings;

    let combinations = v
        .combos
        .par_iter()
        .enumerate()
        .map(|(c, (combo, assessor, val_auc))| {
            let test_auc = evaluate_combination(assessor, test, store, test_ids).map_err(|e| e.in_combination(&combo.combo_id))?;
            Ok(CombinationResult {
                combo_id: combo.combo_id.clone(),
                selector: combo.selector.name(),
                mode: combo.mode,
                classifier: combo.classifier.clone(),
                val_auc: val_auc.clone(),
                val_mean_win_rate: v.selection.mean_win_rates[c],
                mean_test_auc: mean_defined(&test_auc),
                test_auc,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let as_result = |name: &str, c: usize| {
        let r = &combinations[c];
        AssessorResult::new(name, r.combo_id.clone(), Some(r.val_mean_win_rate), r.val_auc.clone(), r.test_auc.clone())
    };
    let generic = as_result("generic", v.selection.winner);
    let random_selector = match v.random_best {
        Some(c) => as_result("random_selector", c),
        None => AssessorResult::new("random_selector", String::new(), None, vec![], vec![]),
    };

    // specific assessors: one per test LLM, on its own train and validation results
    let x_train = intrinsic_matrix(store, &standardizer, &views.plan.train_instances)?;
    let x_val = intrinsic_matrix(store, &standardizer, &views.plan.val_instances)?;
    let x_test = intrinsic_matrix(store, &standardizer, test_ids)?;
    let specific_fits = test
        .llm_ids()
        .par_iter()
        .map(|llm| {
            let y_train = test.outcomes(llm, &views.plan.train_instances)?;
            let y_val = test.outcomes(llm, &views.plan.val_instances)?;
            train_specific_assessor(&x_train, &y_train, &x_val, &y_val, &config.classifiers)
        })
        .collect::<Result<Vec<_>>>()?;
    for (llm, fit) in test.llm_ids().iter().zip(&specific_fits) {
        if fit.classifier.is_fallback() {
            warnings.push(format!("specific assessor for {llm}: single-class training labels, constant-prior fallback"));
        }
    }
    let specific_test = test_aucs(test, test_ids, |llm| {
        let pos = test.llm_position(llm).expect("own llm");
        specific_fits[pos].classifier.margins(&x_test)
    })?;
    let specific_val = test
        .llm_ids()
        .iter()
        .zip(&specific_fits)
        .map(|(llm, f)| LlmAuc {
            llm: llm.clone(),
            auc: f.val_auc,
        })
        .collect();
    let specific = AssessorResult::new("specific", "per_llm".into(), None, specific_val, specific_test);

    // reference only: refit on each test LLM's reference results
    let (ro_ref, ro_clf, ro_sel, ro_rows) = &v.reference_only;
    let reference = &v.references[*ro_ref];
    let spec = &config.classifiers[*ro_clf];
    let ro_test = test_aucs(test, test_ids, |llm| {
        let g = test.outcomes(llm, &reference.instance_ids)?;
        let fit = train_reference_only(store, &standardizer, reference, &g, spec)?;
        if fit.is_fallback() {
            log::warn!("reference-only fit for {llm}: single-class reference labels");
        }
        fit.margins(&x_test)
    })?;
    let reference_only = AssessorResult::new(
        "reference_only",
        format!("{}|{}", reference.selector, spec.id()),
        Some(ro_sel.mean_win_rates[ro_sel.winner]),
        ro_rows[ro_sel.winner].clone(),
        ro_test,
    );

    let (at_clf, at_sel, at_val) = &v.all_train;
    let at_scores = at_clf.margins(&x_test)?;
    let at_test = test_aucs(test, test_ids, |_| Ok(at_scores.clone()))?;
    let all_train_data = AssessorResult::new(
        "all_train_data",
        at_clf.spec.id(),
        Some(at_sel.mean_win_rates[at_sel.winner]),
        at_val.clone(),
        at_test,
    );

    let val_llms = &views.plan.val_llms;
    Ok(EvalReport {
        tool_version: TOOL_VERSION.to_string(),
        config_digest: config.digest(),
        seed: config.seed,
        n_ref: config.n_ref,
        split: SplitSummary {
            n_train_instances: views.plan.train_instances.len(),
            n_val_instances: views.plan.val_instances.len(),
            n_test_instances: test_ids.len(),
            train_llms: views.plan.train_llms.clone(),
            val_llms: val_llms.clone(),
            test_llms: views.plan.test_llms.clone(),
        },
        references: v.references,
        winner: combinations[v.selection.winner].combo_id.clone(),
        dropped_validation_llms: v.selection.dropped_llms.iter().map(|&m| val_llms[m].clone()).collect(),
        combinations,
        generic,
        specific,
        random_selector,
        reference_only,
        all_train_data,
        warnings,
    })
}

