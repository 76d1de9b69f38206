use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Row-standardized copy of a d × N matrix. Rows with zero variance are
/// dropped; the second value lists the indices of the kept rows.
pub fn standardize_rows(x: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<usize>)> {
    let (d, n) = x.shape();
    if n < 2 {
        return Err(Error::Invalid("need at least two columns to standardize".into()));
    }
    let mut kept = Vec::new();
    let mut rows = Vec::new();
    for r in 0..d {
        let row = x.row(r);
        let mean = row.sum() / n as f64;
        let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        if var > 1e-12 * (1.0 + mean * mean) {
            let sd = var.sqrt();
            rows.push(row.map(|v| (v - mean) / sd));
            kept.push(r);
        }
    }
    if kept.is_empty() {
        return Err(Error::Degenerate("every feature row is constant".into()));
    }
    Ok((DMatrix::from_rows(&rows), kept))
}

/// Eigenvalues of a symmetric matrix, descending.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut values: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    values.sort_by(|a, b| b.total_cmp(a));
    values
}

/// Eigen-decomposition of a symmetric matrix with eigenpairs sorted by descending eigenvalue.
pub fn symmetric_eigen_sorted(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_columns(&order.iter().map(|&i| eig.eigenvectors.column(i)).collect::<Vec<_>>());
    (values, vectors)
}

/// Sample correlation matrix of the rows of a d × N matrix (constant rows dropped).
pub fn correlation_matrix(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (z, _) = standardize_rows(x)?;
    let n = z.ncols() as f64;
    Ok((&z * z.transpose()) / (n - 1.0))
}

/// Number of correlation eigenvalues strictly above 1, at least 1.
pub fn kaiser_factor_count(x: &DMatrix<f64>) -> Result<usize> {
    let corr = correlation_matrix(x)?;
    let count = symmetric_eigenvalues(&corr).iter().filter(|&&v| v > 1.0 + 1e-10).count();
    Ok(count.max(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::std_normal;

    #[test]
    fn perfectly_correlated_pair() {
        let x = DMatrix::from_row_slice(2, 4, &[1.0, 2.0, 3.0, 5.0, 2.0, 4.0, 6.0, 10.0]);
        let ev = symmetric_eigenvalues(&correlation_matrix(&x).unwrap());
        assert!((ev[0] - 2.0).abs() < 1e-12 && ev[1].abs() < 1e-12);
        assert_eq!(kaiser_factor_count(&x).unwrap(), 1);
    }

    #[test]
    fn white_noise_floors_at_one() {
        // uncorrelated rows: sample eigenvalues scatter around 1, the floor guarantees >= 1
        let mut rng = crate::util::seeded_rng(5);
        let x = DMatrix::from_fn(4, 20000, |_, _| std_normal(&mut rng));
        let ev = symmetric_eigenvalues(&correlation_matrix(&x).unwrap());
        assert!(ev.iter().all(|v| (v - 1.0).abs() < 0.05));
        assert!(kaiser_factor_count(&x).unwrap() >= 1);
        let ones = DMatrix::from_element(1, 10, 1.0);
        let single = DMatrix::from_fn(1, 10, |_, j| j as f64);
        assert!(kaiser_factor_count(&ones).is_err());
        assert_eq!(kaiser_factor_count(&single).unwrap(), 1);
    }

    #[test]
    fn equicorrelated_single_factor() {
        // rows = common factor + small independent noise: eigenvalues ~ (3 - 2e, e, e)
        let mut rng = crate::util::seeded_rng(1);
        let common: Vec<f64> = (0..5000).map(|_| std_normal(&mut rng)).collect();
        let x = DMatrix::from_fn(3, 5000, |_, j| {
            let e = std_normal(&mut rng);
            common[j] + 0.3 * e
        });
        assert_eq!(kaiser_factor_count(&x).unwrap(), 1);
    }

    #[test]
    fn constant_rows_dropped() {
        let x = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 1.0, 1.0, 2.0, 3.0, 3.0, 1.0, 2.0]);
        let (z, kept) = standardize_rows(&x).unwrap();
        assert_eq!(kept, vec![1, 2]);
        assert_eq!(z.nrows(), 2);
    }
}
