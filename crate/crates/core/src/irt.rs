//! Multidimensional logistic item-response model.
//!
//! P(z_ji = 1) = σ(θ_j · a_i + b_i), fitted by alternating full-batch gradient
//! ascent on the L2-penalized log-likelihood. Each block step backtracks by
//! halving until the objective does not decrease.

use nalgebra::DMatrix;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FeatureStore, InstanceId, LlmId, SuccessMatrix};
use crate::util::{seeded_rng, sigmoid, softplus};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IrtConfig {
    pub k: usize,
    pub l2: f64,
    pub max_iter: usize,
    /// Relative objective improvement below which fitting stops.
    pub tol: f64,
    pub seed: u64,
}

impl Default for IrtConfig {
    fn default() -> Self {
        Self {
            k: 10,
            l2: 1e-2,
            max_iter: 500,
            tol: 1e-5,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IrtModel {
    pub llm_ids: Vec<LlmId>,
    pub instance_ids: Vec<InstanceId>,
    /// n × k, one row per LLM.
    #[serde(with = "crate::util::matrix_rows")]
    pub capabilities: DMatrix<f64>,
    /// N × k, one row per instance.
    #[serde(with = "crate::util::matrix_rows")]
    pub demands: DMatrix<f64>,
    pub intercepts: Vec<f64>,
    pub k: usize,
    pub seed: u64,
    pub log_likelihood_trace: Vec<f64>,
}

/// Penalized log-likelihood.
pub fn objective(
    z: &SuccessMatrix,
    theta: &DMatrix<f64>,
    a: &DMatrix<f64>,
    b: &[f64],
    l2: f64,
) -> f64 {
    let logits = theta * a.transpose();
    let mut ll = 0.0;
    for j in 0..z.n_llms() {
        for i in 0..z.n_instances() {
            let eta = logits[(j, i)] + b[i];
            // log σ(η) = -softplus(-η), log(1 - σ(η)) = -softplus(η)
            ll -= if z.get(j, i) == 1 { softplus(-eta) } else { softplus(eta) };
        }
    }
    ll - 0.5 * l2 * (theta.norm_squared() + a.norm_squared())
}

/// Residuals z - σ(η), n × N.
fn residuals(z: &SuccessMatrix, theta: &DMatrix<f64>, a: &DMatrix<f64>, b: &[f64]) -> DMatrix<f64> {
    let logits = theta * a.transpose();
    DMatrix::from_fn(z.n_llms(), z.n_instances(), |j, i| {
        z.get(j, i) as f64 - sigmoid(logits[(j, i)] + b[i])
    })
}

/// Analytic gradients (θ, a, b) of the penalized log-likelihood.
pub fn gradient(
    z: &SuccessMatrix,
    theta: &DMatrix<f64>,
    a: &DMatrix<f64>,
    b: &[f64],
    l2: f64,
) -> (DMatrix<f64>, DMatrix<f64>, Vec<f64>) {
    let r = residuals(z, theta, a, b);
    let g_theta = &r * a - theta * l2;
    let g_a = r.transpose() * theta - a * l2;
    let g_b = r.column_iter().map(|c| c.sum()).collect();
    (g_theta, g_a, g_b)
}

fn check_finite(m: &DMatrix<f64>) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numerical("non-finite IRT gradient".into()))
    }
}

/// Fit the model to an LLM × instance success matrix.
pub fn fit_irt(z: &SuccessMatrix, config: &IrtConfig) -> Result<IrtModel> {
    if config.k == 0 {
        return Err(Error::Invalid("IRT dimension must be at least 1".into()));
    }
    if !z.has_both_classes() {
        return Err(Error::Degenerate("success matrix needs both successes and failures".into()));
    }
    let (n, m, k) = (z.n_llms(), z.n_instances(), config.k);
    let mut rng = seeded_rng(config.seed);
    let init = Normal::new(0.0, 0.1).expect("valid normal");
    let mut theta = DMatrix::from_fn(n, k, |_, _| init.sample(&mut rng));
    let mut a = DMatrix::from_fn(m, k, |_, _| init.sample(&mut rng));
    let mut b: Vec<f64> = (0..m).map(|_| init.sample(&mut rng)).collect();

    let mut value = objective(z, &theta, &a, &b, config.l2);
    let mut trace = vec![value];
    let mut step_theta = 1.0 / m as f64;
    let mut step_items = 1.0 / n as f64;

    for _ in 0..config.max_iter {
        let start = value;

        let (g_theta, _, _) = gradient(z, &theta, &a, &b, config.l2);
        check_finite(&g_theta)?;
        let mut accepted = false;
        for _ in 0..60 {
            let cand = &theta + &g_theta * step_theta;
            let v = objective(z, &cand, &a, &b, config.l2);
            if v >= value {
                theta = cand;
                value = v;
                accepted = true;
                break;
            }
            step_theta *= 0.5;
        }
        if accepted {
            step_theta *= 2.0;
        }

        let (_, g_a, g_b) = gradient(z, &theta, &a, &b, config.l2);
        check_finite(&g_a)?;
        let mut accepted = false;
        for _ in 0..60 {
            let cand_a = &a + &g_a * step_items;
            let cand_b: Vec<f64> = b.iter().zip(&g_b).map(|(x, g)| x + step_items * g).collect();
            let v = objective(z, &theta, &cand_a, &cand_b, config.l2);
            if v >= value {
                a = cand_a;
                b = cand_b;
                value = v;
                accepted = true;
                break;
            }
            step_items *= 0.5;
        }
        if accepted {
            step_items *= 2.0;
        }

        trace.push(value);
        if (value - start) < config.tol * start.abs().max(1.0) {
            break;
        }
    }

    Ok(IrtModel {
        llm_ids: z.llm_ids().to_vec(),
        instance_ids: z.instance_ids().to_vec(),
        capabilities: theta,
        demands: a,
        intercepts: b,
        k,
        seed: config.seed,
        log_likelihood_trace: trace,
    })
}

impl IrtModel {
    pub fn probability(&self, llm: usize, instance: usize) -> f64 {
        sigmoid(self.capabilities.row(llm).dot(&self.demands.row(instance)) + self.intercepts[instance])
    }

    /// Item demands as an N × k feature store keyed by instance id.
    pub fn item_demands(&self) -> Result<FeatureStore> {
        let rows = (0..self.instance_ids.len())
            .map(|i| self.demands.row(i).iter().copied().collect())
            .collect();
        FeatureStore::from_rows(
            self.instance_ids.clone(),
            rows,
            vec!["irt".to_string(); self.instance_ids.len()],
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{instance_ids, llm_ids};
    use crate::util::std_normal;

    fn random_matrix(n: usize, m: usize, seed: u64) -> SuccessMatrix {
        let mut rng = seeded_rng(seed);
        let values = (0..n * m)
            .map(|_| (rand::Rng::random::<f64>(&mut rng) < 0.5) as u8)
            .collect();
        let l: Vec<String> = (0..n).map(|j| format!("m{j}")).collect();
        let i: Vec<String> = (0..m).map(|j| format!("i{j}")).collect();
        SuccessMatrix::new(llm_ids(&l), instance_ids(&i), values).unwrap()
    }

    #[test]
    fn rejects_degenerate_matrix() {
        let z = SuccessMatrix::new(llm_ids(&["a", "b"]), instance_ids(&["x", "y"]), vec![1; 4]).unwrap();
        assert!(matches!(fit_irt(&z, &IrtConfig::default()), Err(Error::Degenerate(_))));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let z = random_matrix(5, 8, 11);
        let mut rng = seeded_rng(12);
        let theta = DMatrix::from_fn(5, 2, |_, _| std_normal(&mut rng));
        let a = DMatrix::from_fn(8, 2, |_, _| std_normal(&mut rng));
        let b: Vec<f64> = (0..8).map(|_| std_normal(&mut rng)).collect();
        let (gt, ga, gb) = gradient(&z, &theta, &a, &b, 0.01);
        let h = 1e-5;
        for j in 0..5 {
            for c in 0..2 {
                let (mut p, mut q) = (theta.clone(), theta.clone());
                p[(j, c)] += h;
                q[(j, c)] -= h;
                let fd = (objective(&z, &p, &a, &b, 0.01) - objective(&z, &q, &a, &b, 0.01)) / (2.0 * h);
                assert!((fd - gt[(j, c)]).abs() <= 1e-4 * fd.abs().max(1e-3));
            }
        }
        for i in 0..8 {
            let (mut p, mut q) = (a.clone(), a.clone());
            p[(i, 1)] += h;
            q[(i, 1)] -= h;
            let fd = (objective(&z, &theta, &p, &b, 0.01) - objective(&z, &theta, &q, &b, 0.01)) / (2.0 * h);
            assert!((fd - ga[(i, 1)]).abs() <= 1e-4 * fd.abs().max(1e-3));
            let (mut bp, mut bq) = (b.clone(), b.clone());
            bp[i] += h;
            bq[i] -= h;
            let fd = (objective(&z, &theta, &a, &bp, 0.01) - objective(&z, &theta, &a, &bq, 0.01)) / (2.0 * h);
            assert!((fd - gb[i]).abs() <= 1e-4 * fd.abs().max(1e-3));
        }
    }

    #[test]
    fn likelihood_invariant_under_rotation() {
        let z = random_matrix(5, 8, 3);
        let mut rng = seeded_rng(4);
        let theta = DMatrix::from_fn(5, 3, |_, _| std_normal(&mut rng));
        let a = DMatrix::from_fn(8, 3, |_, _| std_normal(&mut rng));
        let b: Vec<f64> = (0..8).map(|_| std_normal(&mut rng)).collect();
        let q = DMatrix::from_fn(3, 3, |_, _| std_normal(&mut rng)).qr().q();
        let before = objective(&z, &theta, &a, &b, 0.0);
        let after = objective(&z, &(&theta * &q), &(&a * &q), &b, 0.0);
        assert!((before - after).abs() < 1e-10);
    }

    #[test]
    fn fit_is_monotone_and_deterministic() {
        let z = random_matrix(6, 40, 8);
        let cfg = IrtConfig { k: 2, max_iter: 50, ..IrtConfig::default() };
        let m1 = fit_irt(&z, &cfg).unwrap();
        let m2 = fit_irt(&z, &cfg).unwrap();
        assert_eq!(m1, m2);
        for w in m1.log_likelihood_trace.windows(2) {
            assert!(w[1] >= w[0]);
        }
        let store = m1.item_demands().unwrap();
        assert_eq!(store.dim(), 2);
        assert_eq!(store.instance_ids(), z.instance_ids());
        for j in 0..6 {
            for i in 0..40 {
                let p = m1.probability(j, i);
                assert!(p > 0.0 && p < 1.0);
            }
        }
    }
}
