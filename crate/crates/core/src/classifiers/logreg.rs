//! Penalized logistic regression.
//!
//! Minimizes `mean logistic loss + λ·penalty(w)` with an unpenalized bias,
//! where the penalty is `½‖w‖²` (L2) or `‖w‖₁` (L1). L2 uses gradient descent,
//! L1 proximal gradient with soft-thresholding; both start each line search
//! from a Barzilai-Borwein step and halve until sufficient decrease.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::{sigmoid, softplus};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Penalty {
    L1,
    L2,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogRegConfig {
    pub penalty: Penalty,
    pub lambda: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl LogRegConfig {
    pub fn new(penalty: Penalty, lambda: f64) -> Self {
        Self {
            penalty,
            lambda,
            max_iter: 1000,
            tol: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogRegFit {
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Objective value after every accepted step, starting at the initial point.
    pub objective_trace: Vec<f64>,
    pub converged: bool,
}

/// Mean logistic loss and its gradient with respect to (w, b).
pub fn loss_and_gradient(x: &DMatrix<f64>, y: &[u8], w: &DVector<f64>, b: f64) -> (f64, DVector<f64>, f64) {
    let m = x.nrows() as f64;
    let eta = x * w;
    let mut loss = 0.0;
    let mut resid = DVector::zeros(x.nrows());
    for (i, &e) in eta.iter().enumerate() {
        let e = e + b;
        let yi = y[i] as f64;
        loss += softplus(e) - yi * e;
        resid[i] = sigmoid(e) - yi;
    }
    let grad_w = x.tr_mul(&resid) / m;
    let grad_b = resid.sum() / m;
    (loss / m, grad_w, grad_b)
}

fn mean_loss(x: &DMatrix<f64>, y: &[u8], w: &DVector<f64>, b: f64) -> f64 {
    let eta = x * w;
    eta.iter()
        .zip(y)
        .map(|(&e, &yi)| softplus(e + b) - yi as f64 * (e + b))
        .sum::<f64>()
        / x.nrows() as f64
}

fn penalty_value(penalty: Penalty, lambda: f64, w: &DVector<f64>) -> f64 {
    match penalty {
        Penalty::L2 => 0.5 * lambda * w.norm_squared(),
        Penalty::L1 => lambda * w.lp_norm(1),
    }
}

/// Full objective: mean loss plus penalty.
pub fn objective(x: &DMatrix<f64>, y: &[u8], w: &DVector<f64>, b: f64, penalty: Penalty, lambda: f64) -> f64 {
    mean_loss(x, y, w, b) + penalty_value(penalty, lambda, w)
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

pub(crate) fn check_inputs(x: &DMatrix<f64>, y: &[u8]) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::Dimension {
            expected: x.nrows(),
            got: y.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite feature value".into()));
    }
    if y.iter().any(|&v| v > 1) {
        return Err(Error::Invalid("labels must be 0 or 1".into()));
    }
    if !(y.contains(&0) && y.contains(&1)) {
        return Err(Error::Degenerate("training labels contain a single class".into()));
    }
    Ok(())
}

pub fn train_logreg(x: &DMatrix<f64>, y: &[u8], config: &LogRegConfig) -> Result<LogRegFit> {
    check_inputs(x, y)?;
    if x.nrows() < 2 {
        return Err(Error::Invalid("need at least two training rows".into()));
    }
    if !(config.lambda >= 0.0 && config.lambda.is_finite()) {
        return Err(Error::Invalid(format!("penalty strength {} must be >= 0", config.lambda)));
    }
    let (m, d) = x.shape();
    let lambda = config.lambda;
    let l2 = if config.penalty == Penalty::L2 { lambda } else { 0.0 };

    let prior = y.iter().map(|&v| v as f64).sum::<f64>() / m as f64;
    let mut w = DVector::zeros(d);
    let mut b = (prior / (1.0 - prior)).ln();

    // gradient of the smooth part (loss, plus the L2 term when present)
    let smooth_grad = |w: &DVector<f64>, b: f64| {
        let (loss, mut gw, gb) = loss_and_gradient(x, y, w, b);
        if l2 > 0.0 {
            gw += w * l2;
        }
        (loss + 0.5 * l2 * w.norm_squared(), gw, gb)
    };

    let (mut smooth, mut gw, mut gb) = smooth_grad(&w, b);
    let mut value = smooth + if config.penalty == Penalty::L1 { lambda * w.lp_norm(1) } else { 0.0 };
    let mut trace = vec![value];

    let frob = x.norm_squared() / m as f64;
    let mut step = 1.0 / (0.25 * (frob + 1.0) + l2);
    let mut small_steps = 0;
    let mut converged = false;

    for _ in 0..config.max_iter {
        let mut accepted = None;
        for _ in 0..60 {
            let (cw, cb) = match config.penalty {
                Penalty::L2 => (&w - &gw * step, b - step * gb),
                Penalty::L1 => (
                    (&w - &gw * step).map(|v| soft_threshold(v, step * lambda)),
                    b - step * gb,
                ),
            };
            let c_smooth = mean_loss(x, y, &cw, cb) + 0.5 * l2 * cw.norm_squared();
            let dw = &cw - &w;
            let db = cb - b;
            let ok = match config.penalty {
                Penalty::L2 => {
                    let g2 = gw.norm_squared() + gb * gb;
                    c_smooth <= smooth - 1e-4 * step * g2
                }
                Penalty::L1 => {
                    let linear = gw.dot(&dw) + gb * db;
                    let quad = (dw.norm_squared() + db * db) / (2.0 * step);
                    c_smooth <= smooth + linear + quad + 1e-12 * smooth.abs()
                }
            };
            if ok {
                accepted = Some((cw, cb, c_smooth));
                break;
            }
            step *= 0.5;
        }
        let Some((cw, cb, c_smooth)) = accepted else {
            // no decrease possible at machine precision
            converged = true;
            break;
        };
        let c_value = c_smooth + if config.penalty == Penalty::L1 { lambda * cw.lp_norm(1) } else { 0.0 };
        if c_value > value {
            converged = true;
            break;
        }
        let (_, ngw, ngb) = smooth_grad(&cw, cb);
        let s_w = &cw - &w;
        let s_b = cb - b;
        let y_w = &ngw - &gw;
        let y_b = ngb - gb;
        let sy = s_w.dot(&y_w) + s_b * y_b;
        let ss = s_w.norm_squared() + s_b * s_b;
        step = if sy > 0.0 { (ss / sy).clamp(1e-10, 1e10) } else { (step * 2.0).min(1e10) };

        let improvement = value - c_value;
        w = cw;
        b = cb;
        gw = ngw;
        gb = ngb;
        smooth = c_smooth;
        value = c_value;
        trace.push(value);
        if improvement < config.tol {
            small_steps += 1;
            if small_steps >= 2 {
                converged = true;
                break;
            }
        } else {
            small_steps = 0;
        }
    }

    Ok(LogRegFit {
        weights: w.iter().copied().collect(),
        bias: b,
        objective_trace: trace,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::{seeded_rng, std_normal};
    use rand::Rng as _;

    fn fixture(m: usize, d: usize, seed: u64) -> (DMatrix<f64>, Vec<u8>) {
        let mut rng = seeded_rng(seed);
        let x = DMatrix::from_fn(m, d, |_, _| std_normal(&mut rng));
        let truth: Vec<f64> = (0..d).map(|_| std_normal(&mut rng)).collect();
        let y = (0..m)
            .map(|i| {
                let eta: f64 = (0..d).map(|j| x[(i, j)] * truth[j]).sum();
                (rng.random::<f64>() < sigmoid(eta)) as u8
            })
            .collect();
        (x, y)
    }

    #[test]
    fn separable_line_is_fit_exactly() {
        let x = DMatrix::from_column_slice(6, 1, &[-3.0, -2.0, -1.0, 1.0, 2.0, 3.0]);
        let y = [0, 0, 0, 1, 1, 1];
        let fit = train_logreg(&x, &y, &LogRegConfig::new(Penalty::L2, 1e-4)).unwrap();
        for (i, &yi) in y.iter().enumerate() {
            let p = sigmoid(fit.weights[0] * x[(i, 0)] + fit.bias);
            assert_eq!((p > 0.5) as u8, yi);
        }
    }

    #[test]
    fn huge_l2_shrinks_to_prior() {
        let (x, y) = fixture(50, 4, 1);
        let fit = train_logreg(&x, &y, &LogRegConfig::new(Penalty::L2, 1e6)).unwrap();
        let norm: f64 = fit.weights.iter().map(|w| w * w).sum::<f64>().sqrt();
        assert!(norm < 1e-3);
        let prior = y.iter().map(|&v| v as f64).sum::<f64>() / 50.0;
        assert!((sigmoid(fit.bias) - prior).abs() < 1e-3);
    }

    #[test]
    fn l1_above_threshold_is_exactly_sparse() {
        let (x, y) = fixture(40, 5, 2);
        let ybar = y.iter().map(|&v| v as f64).sum::<f64>() / 40.0;
        let centered = DVector::from_iterator(40, y.iter().map(|&v| v as f64 - ybar));
        let threshold = x.tr_mul(&centered).amax() / 40.0;
        let fit = train_logreg(&x, &y, &LogRegConfig::new(Penalty::L1, threshold * 1.01)).unwrap();
        assert!(fit.weights.iter().all(|&w| w == 0.0), "{:?}", fit.weights);
        let below = train_logreg(&x, &y, &LogRegConfig::new(Penalty::L1, threshold * 0.5)).unwrap();
        assert!(below.weights.iter().any(|&w| w != 0.0));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (x, y) = fixture(20, 7, 3);
        let mut rng = seeded_rng(30);
        let w = DVector::from_fn(7, |_, _| std_normal(&mut rng));
        let b = 0.3;
        let (_, gw, gb) = loss_and_gradient(&x, &y, &w, b);
        let h = 1e-6;
        for j in 0..7 {
            let mut p = w.clone();
            let mut q = w.clone();
            p[j] += h;
            q[j] -= h;
            let fd = (mean_loss(&x, &y, &p, b) - mean_loss(&x, &y, &q, b)) / (2.0 * h);
            assert!((fd - gw[j]).abs() <= 1e-5 * fd.abs().max(1e-2));
        }
        let fd = (mean_loss(&x, &y, &w, b + h) - mean_loss(&x, &y, &w, b - h)) / (2.0 * h);
        assert!((fd - gb).abs() <= 1e-5 * fd.abs().max(1e-2));
    }

    #[test]
    fn objective_trace_never_increases() {
        let (x, y) = fixture(80, 6, 4);
        for penalty in [Penalty::L1, Penalty::L2] {
            let fit = train_logreg(&x, &y, &LogRegConfig::new(penalty, 1e-2)).unwrap();
            for t in fit.objective_trace.windows(2) {
                assert!(t[1] <= t[0], "{penalty:?}: {} -> {}", t[0], t[1]);
            }
        }
    }

    #[test]
    fn row_permutation_leaves_weights() {
        let (x, y) = fixture(60, 5, 5);
        let perm: Vec<usize> = (0..60).map(|i| (i * 7) % 60).collect();
        let xp = DMatrix::from_fn(60, 5, |i, j| x[(perm[i], j)]);
        let yp: Vec<u8> = perm.iter().map(|&i| y[i]).collect();
        let cfg = LogRegConfig { tol: 1e-14, ..LogRegConfig::new(Penalty::L2, 1e-2) };
        let a = train_logreg(&x, &y, &cfg).unwrap();
        let b = train_logreg(&xp, &yp, &cfg).unwrap();
        for (u, v) in a.weights.iter().zip(&b.weights) {
            assert!((u - v).abs() < 1e-8);
        }
    }

    #[test]
    fn rejects_single_class_and_non_finite() {
        let x = DMatrix::from_element(3, 1, 1.0);
        assert!(matches!(
            train_logreg(&x, &[1, 1, 1], &LogRegConfig::new(Penalty::L2, 0.1)),
            Err(Error::Degenerate(_))
        ));
        let bad = DMatrix::from_column_slice(2, 1, &[f64::INFINITY, 0.0]);
        assert!(train_logreg(&bad, &[0, 1], &LogRegConfig::new(Penalty::L2, 0.1)).is_err());
    }
}
