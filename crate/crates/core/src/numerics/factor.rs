//! Maximum-likelihood factor analysis with diagonal noise, fitted by EM.

use nalgebra::DMatrix;

use super::eigen::{standardize_rows, symmetric_eigen_sorted};
use crate::error::{Error, Result};

const PSI_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct FactorConfig {
    pub max_iter: usize,
    /// Stop when the per-sample log-likelihood improves by less than this.
    pub tol: f64,
}

impl Default for FactorConfig {
    fn default() -> Self {
        Self {
            max_iter: 1000,
            tol: 1e-4,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FactorModel {
    /// d' × l loadings over the kept (non-constant) rows.
    pub loadings: DMatrix<f64>,
    /// l × N posterior-mean factor scores.
    pub factors: DMatrix<f64>,
    pub noise_variances: Vec<f64>,
    /// Per-sample log-likelihood of each iterate.
    pub log_likelihood_trace: Vec<f64>,
    /// Row indices of the input that survived standardization.
    pub kept_rows: Vec<usize>,
    pub converged: bool,
}

impl FactorModel {
    pub fn n_factors(&self) -> usize {
        self.loadings.ncols()
    }
}

fn invert(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    m.clone()
        .cholesky()
        .map(|c| c.inverse())
        .or_else(|| m.clone().try_inverse())
        .ok_or_else(|| Error::Numerical("singular matrix in factor analysis".into()))
}

struct Posterior {
    /// (I + Wᵀ Ψ⁻¹ W)⁻¹
    g: DMatrix<f64>,
    /// G Wᵀ Ψ⁻¹, maps data to posterior factor means.
    beta: DMatrix<f64>,
    log_likelihood: f64,
}

fn posterior(w: &DMatrix<f64>, psi: &[f64], s: &DMatrix<f64>) -> Result<Posterior> {
    let (d, l) = w.shape();
    let mut a = w.clone();
    for (i, mut row) in a.row_iter_mut().enumerate() {
        row /= psi[i];
    }
    let m = DMatrix::identity(l, l) + w.transpose() * &a;
    let log_det_m = m
        .clone()
        .cholesky()
        .map(|c| 2.0 * c.l().diagonal().iter().map(|v| v.ln()).sum::<f64>())
        .ok_or_else(|| Error::Numerical("factor posterior not positive definite".into()))?;
    let g = invert(&m)?;
    let beta = &g * a.transpose();
    let log_det_sigma = psi.iter().map(|p| p.ln()).sum::<f64>() + log_det_m;
    let sa = s * &a;
    let trace_diag: f64 = (0..d).map(|i| s[(i, i)] / psi[i]).sum();
    let correction = (&g * (a.transpose() * sa)).trace();
    let log_likelihood = -0.5
        * (d as f64 * (2.0 * std::f64::consts::PI).ln() + log_det_sigma + trace_diag - correction);
    Ok(Posterior {
        g,
        beta,
        log_likelihood,
    })
}

/// Fit `l` factors to the row-standardized d × N matrix `x`.
pub fn factor_analysis(x: &DMatrix<f64>, l: usize, config: &FactorConfig) -> Result<FactorModel> {
    let (z, kept_rows) = standardize_rows(x)?;
    let (d, n) = z.shape();
    if l == 0 || l >= d.min(n) {
        return Err(Error::Invalid(format!(
            "number of factors {l} must lie in 1..{} (usable rows {d}, samples {n})",
            d.min(n)
        )));
    }
    let s = (&z * z.transpose()) / n as f64;

    // principal-component start
    let (values, vectors) = symmetric_eigen_sorted(&s);
    let sigma2 = values[l..].iter().sum::<f64>() / (d - l) as f64;
    let mut w = DMatrix::zeros(d, l);
    for k in 0..l {
        let mut col = vectors.column(k).clone_owned();
        let pivot = col.iamax();
        if col[pivot] < 0.0 {
            col.neg_mut();
        }
        w.set_column(k, &(col * (values[k] - sigma2).max(1e-6).sqrt()));
    }
    let mut psi: Vec<f64> = (0..d)
        .map(|i| (s[(i, i)] - w.row(i).norm_squared()).max(PSI_FLOOR))
        .collect();

    let mut trace = Vec::new();
    let mut converged = false;
    let mut post = posterior(&w, &psi, &s)?;
    trace.push(post.log_likelihood);
    for _ in 0..config.max_iter {
        let sb = &s * post.beta.transpose();
        let ehh = &post.g + &post.beta * &sb;
        let w_new = &sb * invert(&ehh)?;
        let psi_new: Vec<f64> = (0..d)
            .map(|i| (s[(i, i)] - w_new.row(i).dot(&sb.row(i))).max(PSI_FLOOR))
            .collect();
        let next = posterior(&w_new, &psi_new, &s)?;
        if !next.log_likelihood.is_finite() {
            return Err(Error::Numerical("non-finite factor log-likelihood".into()));
        }
        let gain = next.log_likelihood - post.log_likelihood;
        w = w_new;
        psi = psi_new;
        post = next;
        trace.push(post.log_likelihood);
        if gain < config.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("factor analysis stopped after {} iterations without converging", config.max_iter);
    }
    let factors = &post.beta * &z;
    Ok(FactorModel {
        loadings: w,
        factors,
        noise_variances: psi,
        log_likelihood_trace: trace,
        kept_rows,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::{seeded_rng, std_normal};

    fn rank_one(d: usize, n: usize, noise: f64, seed: u64) -> DMatrix<f64> {
        let mut rng = seeded_rng(seed);
        let u: Vec<f64> = (0..d).map(|_| 1.0 + std_normal(&mut rng) * 0.5).collect();
        let v: Vec<f64> = (0..n).map(|_| std_normal(&mut rng)).collect();
        DMatrix::from_fn(d, n, |i, j| {
            let e = std_normal(&mut rng);
            u[i] * v[j] + noise * e
        })
    }

    #[test]
    fn recovers_rank_one_structure() {
        let x = rank_one(6, 300, 0.01, 2);
        let fa = factor_analysis(&x, 1, &FactorConfig::default()).unwrap();
        let (z, _) = standardize_rows(&x).unwrap();
        let err = (&z - &fa.loadings * &fa.factors).norm() / z.norm();
        assert!(err < 0.05, "relative reconstruction error {err}");
        assert!(fa.noise_variances.iter().all(|&p| p > 0.0));
    }

    #[test]
    fn log_likelihood_is_monotone() {
        let mut rng = seeded_rng(4);
        let x = DMatrix::from_fn(8, 200, |i, j| {
            let e = std_normal(&mut rng);
            ((i % 3) as f64 + 1.0) * ((j as f64) * 0.1).sin() + ((i % 2) as f64) * ((j as f64) * 0.37).cos() + 0.5 * e
        });
        let fa = factor_analysis(&x, 2, &FactorConfig::default()).unwrap();
        for w in fa.log_likelihood_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-10, "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn column_permutation_permutes_scores() {
        let x = rank_one(5, 80, 0.3, 7);
        let perm: Vec<usize> = (0..80).rev().collect();
        let xp = DMatrix::from_fn(5, 80, |i, j| x[(i, perm[j])]);
        let a = factor_analysis(&x, 2, &FactorConfig::default()).unwrap();
        let b = factor_analysis(&xp, 2, &FactorConfig::default()).unwrap();
        assert!((&a.loadings - &b.loadings).amax() < 1e-8);
        for j in 0..80 {
            for k in 0..2 {
                assert!((a.factors[(k, perm[j])] - b.factors[(k, j)]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn rejects_degenerate_factor_count() {
        let x = rank_one(4, 50, 0.1, 0);
        assert!(factor_analysis(&x, 0, &FactorConfig::default()).is_err());
        assert!(factor_analysis(&x, 4, &FactorConfig::default()).is_err());
    }
}
