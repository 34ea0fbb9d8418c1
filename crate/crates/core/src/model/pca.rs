use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Truncated principal components of a set of row vectors.
pub(crate) struct Components {
    pub mean: Vec<f64>,
    /// `k` unit columns of length `dim`, stored one after another.
    pub basis: Vec<f64>,
    /// Per-sample variance along each column.
    pub variances: Vec<f64>,
    pub total_variance: f64,
}

/// Eigenvalues below this fraction of the largest one count as zero.
const RANK_TOL: f64 = 1e-10;

/// Leading `k` principal directions via the sample Gram matrix, which is
/// small when there are fewer samples than pixels.
///
/// Each direction is scaled to unit length and its sign chosen so the entry
/// of largest magnitude is positive. When the centered data has rank below
/// `k`, fewer directions are returned.
pub(crate) fn principal_components(rows: &[Vec<f64>], k: usize) -> Result<Components> {
    let n = rows.len();
    if n < 2 {
        return Err(Error::DegenerateCorpus("need at least two samples".into()));
    }
    let dim = rows[0].len();
    if rows.iter().any(|r| r.len() != dim) {
        return Err(Error::InvalidInput("rows differ in length".into()));
    }
    let mut mean = vec![0.0; dim];
    for r in rows {
        mean.iter_mut().zip(r).for_each(|(m, v)| *m += v);
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    // Rows of x are the centered samples.
    let x = DMatrix::from_fn(n, dim, |i, j| rows[i][j] - mean[j]);
    let gram = &x * x.transpose();
    let total_variance = gram.trace() / n as f64;
    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let top = eig.eigenvalues[order[0]];
    if !(top > 0.0) {
        return Err(Error::DegenerateCorpus("all samples are identical".into()));
    }
    let kept: Vec<usize> = order.into_iter().take(k).filter(|&i| eig.eigenvalues[i] > RANK_TOL * top).collect();

    let u = DMatrix::from_fn(n, kept.len(), |i, j| eig.eigenvectors[(i, kept[j])]);
    let w = x.transpose() * u;
    let mut basis = Vec::with_capacity(dim * kept.len());
    let mut variances = Vec::with_capacity(kept.len());
    for (j, &idx) in kept.iter().enumerate() {
        let mut col: Vec<f64> = w.column(j).iter().copied().collect();
        let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        let peak = col.iter().copied().fold(0.0f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
        let s = if peak < 0.0 { -1.0 / norm } else { 1.0 / norm };
        col.iter_mut().for_each(|v| *v *= s);
        basis.extend(col);
        variances.push(eig.eigenvalues[idx] / n as f64);
    }
    Ok(Components { mean, basis, variances, total_variance })
}
