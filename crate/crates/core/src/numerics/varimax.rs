use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Sum over factors of the variance of squared loadings.
pub fn varimax_criterion(loadings: &DMatrix<f64>) -> f64 {
    let p = loadings.nrows() as f64;
    loadings
        .column_iter()
        .map(|col| {
            let m2 = col.iter().map(|v| v * v).sum::<f64>() / p;
            let m4 = col.iter().map(|v| v.powi(4)).sum::<f64>() / p;
            m4 - m2 * m2
        })
        .sum()
}

#[derive(Clone, Debug)]
pub struct Varimax {
    pub rotated: DMatrix<f64>,
    /// Orthogonal l × l matrix with `rotated = loadings * rotation`.
    pub rotation: DMatrix<f64>,
    /// Criterion of each iterate, starting from the unrotated loadings.
    pub criterion_trace: Vec<f64>,
}

/// Orthogonal varimax rotation of a d × l loading matrix by sweeps of
/// pairwise rotations; stops once every angle in a sweep is below `tol`.
pub fn varimax(loadings: &DMatrix<f64>, max_iter: usize, tol: f64) -> Result<Varimax> {
    if loadings.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite loadings".into()));
    }
    let (p, l) = loadings.shape();
    let mut rotation = DMatrix::identity(l, l);
    let mut trace = vec![varimax_criterion(loadings)];
    if l < 2 {
        return Ok(Varimax {
            rotated: loadings.clone(),
            rotation,
            criterion_trace: trace,
        });
    }
    let mut lam = loadings.clone();
    let pf = p as f64;
    for _ in 0..max_iter {
        // one sweep of planar rotations, each at its closed-form optimal angle
        let mut largest = 0.0f64;
        for j in 0..l {
            for k in j + 1..l {
                let (mut a, mut b, mut c, mut d) = (0.0, 0.0, 0.0, 0.0);
                for i in 0..p {
                    let (x, y) = (lam[(i, j)], lam[(i, k)]);
                    let u = x * x - y * y;
                    let v = 2.0 * x * y;
                    a += u;
                    b += v;
                    c += u * u - v * v;
                    d += 2.0 * u * v;
                }
                let phi = 0.25 * (d - 2.0 * a * b / pf).atan2(c - (a * a - b * b) / pf);
                largest = largest.max(phi.abs());
                let (sin, cos) = phi.sin_cos();
                for m in [&mut lam, &mut rotation] {
                    for i in 0..m.nrows() {
                        let (x, y) = (m[(i, j)], m[(i, k)]);
                        m[(i, j)] = x * cos + y * sin;
                        m[(i, k)] = -x * sin + y * cos;
                    }
                }
            }
        }
        trace.push(varimax_criterion(&lam));
        if largest < tol {
            break;
        }
    }
    Ok(Varimax {
        rotated: loadings * &rotation,
        rotation,
        criterion_trace: trace,
    })
}
