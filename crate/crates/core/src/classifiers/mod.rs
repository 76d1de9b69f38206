//! Probabilistic binary classifiers over dense features.

pub mod gbdt;
pub mod logreg;

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::sigmoid;

pub use gbdt::{train_gbdt, GbdtConfig, GbdtModel, Node, Tree};
pub use logreg::{train_logreg, LogRegConfig, LogRegFit, Penalty};

/// A classifier family with its hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ClassifierSpec {
    LogregL2 { lambda: f64 },
    LogregL1 { lambda: f64 },
    Gbdt(GbdtConfig),
}

impl ClassifierSpec {
    pub fn family(&self) -> &'static str {
        match self {
            ClassifierSpec::LogregL2 { .. } => "logreg_l2",
            ClassifierSpec::LogregL1 { .. } => "logreg_l1",
            ClassifierSpec::Gbdt(_) => "gbdt",
        }
    }

    /// Stable textual id, used inside combination ids.
    pub fn id(&self) -> String {
        match self {
            ClassifierSpec::LogregL2 { lambda } | ClassifierSpec::LogregL1 { lambda } => {
                format!("{}(lambda={lambda:e})", self.family())
            }
            ClassifierSpec::Gbdt(c) => format!(
                "gbdt(depth={},rounds={},lr={},reg={},mcw={})",
                c.max_depth, c.rounds, c.learning_rate, c.reg_lambda, c.min_child_weight
            ),
        }
    }

    pub fn logreg_l2(lambda: f64) -> Self {
        ClassifierSpec::LogregL2 { lambda }
    }

    pub fn logreg_l1(lambda: f64) -> Self {
        ClassifierSpec::LogregL1 { lambda }
    }

    pub fn gbdt(max_depth: usize, rounds: usize) -> Self {
        ClassifierSpec::Gbdt(GbdtConfig {
            max_depth,
            rounds,
            ..GbdtConfig::default()
        })
    }

    /// Logistic regression with both penalties at λ ∈ {1e-4, 1e-3, 1e-2, 1e-1}
    /// and boosting with depth ∈ {2, 3}, rounds ∈ {100, 200}.
    pub fn default_grid() -> Vec<ClassifierSpec> {
        let lambdas = [1e-4, 1e-3, 1e-2, 1e-1];
        let mut grid: Vec<ClassifierSpec> = lambdas.iter().map(|&l| Self::logreg_l2(l)).collect();
        grid.extend(lambdas.iter().map(|&l| Self::logreg_l1(l)));
        for depth in [2, 3] {
            for rounds in [100, 200] {
                grid.push(Self::gbdt(depth, rounds));
            }
        }
        grid
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ClassifierSpec::LogregL2 { lambda } | ClassifierSpec::LogregL1 { lambda } => {
                if !(*lambda >= 0.0 && lambda.is_finite()) {
                    return Err(Error::Invalid(format!("lambda must be a finite value >= 0, got {lambda}")));
                }
            }
            ClassifierSpec::Gbdt(c) => {
                if !(c.learning_rate > 0.0 && c.reg_lambda >= 0.0 && c.min_child_weight >= 0.0) {
                    return Err(Error::Invalid(
                        "gbdt: learning_rate must be > 0, reg_lambda and min_child_weight >= 0".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Parameters {
    Linear { weights: Vec<f64>, bias: f64 },
    Trees(GbdtModel),
    /// Fallback for single-class training data: predicts the training base rate.
    Constant { prior: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedClassifier {
    pub spec: ClassifierSpec,
    /// Feature width seen at training time.
    pub width: usize,
    pub parameters: Parameters,
    pub loss_trace: Vec<f64>,
}

const P_MIN: f64 = 1e-15;

impl TrainedClassifier {
    pub fn train(spec: &ClassifierSpec, x: &DMatrix<f64>, y: &[u8]) -> Result<Self> {
        spec.validate()?;
        let (parameters, loss_trace) = match spec {
            ClassifierSpec::LogregL2 { lambda } | ClassifierSpec::LogregL1 { lambda } => {
                let penalty = if matches!(spec, ClassifierSpec::LogregL2 { .. }) { Penalty::L2 } else { Penalty::L1 };
                let fit = train_logreg(x, y, &LogRegConfig::new(penalty, *lambda))?;
                (
                    Parameters::Linear {
                        weights: fit.weights,
                        bias: fit.bias,
                    },
                    fit.objective_trace,
                )
            }
            ClassifierSpec::Gbdt(c) => {
                let model = train_gbdt(x, y, c)?;
                let trace = model.loss_trace.clone();
                (Parameters::Trees(model), trace)
            }
        };
        Ok(Self {
            spec: spec.clone(),
            width: x.ncols(),
            parameters,
            loss_trace,
        })
    }

    /// Like [`train`](Self::train), but single-class labels give a constant model.
    pub fn train_or_constant(spec: &ClassifierSpec, x: &DMatrix<f64>, y: &[u8]) -> Result<Self> {
        if !y.is_empty() && (y.iter().all(|&v| v == 0) || y.iter().all(|&v| v == 1)) {
            if x.nrows() != y.len() {
                return Err(Error::Dimension {
                    expected: x.nrows(),
                    got: y.len(),
                });
            }
            log::warn!("single-class training labels; using a constant-prior model");
            return Ok(Self::constant(spec, x.ncols(), y[0] as f64));
        }
        Self::train(spec, x, y)
    }

    pub fn constant(spec: &ClassifierSpec, width: usize, prior: f64) -> Self {
        Self {
            spec: spec.clone(),
            width,
            parameters: Parameters::Constant { prior },
            loss_trace: Vec::new(),
        }
    }

    pub fn is_fallback(&self) -> bool {
        matches!(self.parameters, Parameters::Constant { .. })
    }

    fn check_width(&self, got: usize) -> Result<()> {
        if got == self.width {
            Ok(())
        } else {
            Err(Error::Dimension {
                expected: self.width,
                got,
            })
        }
    }

    /// Raw scores (log-odds). Same ordering as [`predict`](Self::predict), without saturation.
    pub fn margins(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        self.check_width(x.ncols())?;
        Ok(match &self.parameters {
            Parameters::Linear { weights, bias } => {
                let w = DVector::from_column_slice(weights);
                (x * w).iter().map(|v| v + bias).collect()
            }
            Parameters::Trees(model) => (0..x.nrows()).map(|i| model.margin(|f| x[(i, f)])).collect(),
            Parameters::Constant { prior } => {
                let p = prior.clamp(P_MIN, 1.0 - P_MIN);
                vec![(p / (1.0 - p)).ln(); x.nrows()]
            }
        })
    }

    /// Success probabilities in (0, 1).
    pub fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        Ok(self
            .margins(x)?
            .into_iter()
            .map(|m| sigmoid(m).clamp(P_MIN, 1.0 - P_MIN))
            .collect())
    }

    pub fn predict_row(&self, row: &[f64]) -> Result<f64> {
        let x = DMatrix::from_row_slice(1, row.len(), row);
        Ok(self.predict(&x)?[0])
    }
}

/// Train every spec on the same data. Boosting specs that differ only in
/// round count share one fit, truncated to each count. Results keep the
/// order of `specs`.
pub fn train_grid(specs: &[ClassifierSpec], x: &DMatrix<f64>, y: &[u8]) -> Vec<Result<TrainedClassifier>> {
    let mut longest: BTreeMap<String, usize> = BTreeMap::new();
    for spec in specs {
        if let ClassifierSpec::Gbdt(c) = spec {
            let key = ClassifierSpec::Gbdt(GbdtConfig { rounds: 0, ..c.clone() }).id();
            let e = longest.entry(key).or_insert(0);
            *e = (*e).max(c.rounds);
        }
    }
    let mut fitted: BTreeMap<String, std::result::Result<GbdtModel, String>> = BTreeMap::new();
    specs
        .iter()
        .map(|spec| match spec {
            ClassifierSpec::Gbdt(c) => {
                spec.validate()?;
                let key = ClassifierSpec::Gbdt(GbdtConfig { rounds: 0, ..c.clone() }).id();
                let model = fitted
                    .entry(key.clone())
                    .or_insert_with(|| {
                        let full = GbdtConfig {
                            rounds: longest[&key],
                            ..c.clone()
                        };
                        train_gbdt(x, y, &full).map_err(|e| e.to_string())
                    })
                    .clone()
                    .map_err(Error::Invalid)?
                    .truncated(c.rounds);
                let loss_trace = model.loss_trace.clone();
                Ok(TrainedClassifier {
                    spec: spec.clone(),
                    width: x.ncols(),
                    parameters: Parameters::Trees(model),
                    loss_trace,
                })
            }
            _ => TrainedClassifier::train(spec, x, y),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::{seeded_rng, std_normal};

    fn data(m: usize, d: usize, seed: u64) -> (DMatrix<f64>, Vec<u8>) {
        let mut rng = seeded_rng(seed);
        let x = DMatrix::from_fn(m, d, |_, _| std_normal(&mut rng));
        let y = (0..m).map(|i| (x[(i, 0)] - x[(i, 1)] + std_normal(&mut rng) > 0.0) as u8).collect();
        (x, y)
    }

    #[test]
    fn default_grid_has_twelve_members_with_unique_ids() {
        let grid = ClassifierSpec::default_grid();
        assert_eq!(grid.len(), 12);
        let ids: std::collections::BTreeSet<String> = grid.iter().map(ClassifierSpec::id).collect();
        assert_eq!(ids.len(), 12);
    }

    #[test]
    fn zero_weights_predict_one_half() {
        let c = TrainedClassifier {
            spec: ClassifierSpec::logreg_l2(0.1),
            width: 3,
            parameters: Parameters::Linear {
                weights: vec![0.0; 3],
                bias: 0.0,
            },
            loss_trace: vec![],
        };
        let x = DMatrix::from_element(4, 3, 2.5);
        assert!(c.predict(&x).unwrap().iter().all(|&p| p == 0.5));
        assert!(matches!(c.predict(&DMatrix::zeros(1, 2)), Err(Error::Dimension { expected: 3, got: 2 })));
    }

    #[test]
    fn duplicated_zero_weight_column_changes_nothing() {
        let (x, y) = data(50, 3, 1);
        let c = TrainedClassifier::train(&ClassifierSpec::logreg_l2(1e-2), &x, &y).unwrap();
        let Parameters::Linear { weights, bias } = &c.parameters else { panic!() };
        let mut wide = c.clone();
        wide.width = 4;
        wide.parameters = Parameters::Linear {
            weights: [weights.as_slice(), &[0.0]].concat(),
            bias: *bias,
        };
        let xw = DMatrix::from_fn(50, 4, |i, j| x[(i, j.min(2))]);
        assert_eq!(c.predict(&x).unwrap(), wide.predict(&xw).unwrap());
    }

    #[test]
    fn shared_boosting_fit_matches_separate_fits() {
        let (x, y) = data(80, 3, 2);
        let specs = [ClassifierSpec::gbdt(2, 5), ClassifierSpec::gbdt(2, 12), ClassifierSpec::logreg_l1(1e-3)];
        let grid = train_grid(&specs, &x, &y);
        for (spec, got) in specs.iter().zip(grid) {
            assert_eq!(got.unwrap(), TrainedClassifier::train(spec, &x, &y).unwrap());
        }
    }

    #[test]
    fn constant_fallback_on_single_class() {
        let x = DMatrix::from_element(3, 2, 1.0);
        assert!(TrainedClassifier::train(&ClassifierSpec::gbdt(2, 3), &x, &[1, 1, 1]).is_err());
        let c = TrainedClassifier::train_or_constant(&ClassifierSpec::gbdt(2, 3), &x, &[1, 1, 1]).unwrap();
        assert!(c.is_fallback());
        let p = c.predict(&x).unwrap();
        assert!(p.iter().all(|&v| v > 0.99 && v < 1.0));
    }

    #[test]
    fn json_round_trip_uses_tree_fields() {
        let (x, y) = data(30, 2, 3);
        let c = TrainedClassifier::train(&ClassifierSpec::gbdt(2, 2), &x, &y).unwrap();
        let text = serde_json::to_string(&c).unwrap();
        for key in ["\"feature\"", "\"threshold\"", "\"left\"", "\"right\"", "\"leaf_weight\""] {
            assert!(text.contains(key));
        }
        let back: TrainedClassifier = serde_json::from_str(&text).unwrap();
        assert_eq!(back.predict(&x).unwrap(), c.predict(&x).unwrap());
    }
}
