use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::inv_spd;

/// Maps arbitrary cluster labels to dense ids in first-seen order.
pub fn dense_ids<T: Ord + Clone>(labels: &[T]) -> (Vec<u32>, usize) {
    let mut map: BTreeMap<T, u32> = BTreeMap::new();
    let ids = labels
        .iter()
        .map(|l| {
            let next = map.len() as u32;
            *map.entry(l.clone()).or_insert(next)
        })
        .collect();
    (ids, map.len())
}

/// Cluster-summed scores `Σ_g (X_g' e_g)(X_g' e_g)'`.
pub fn cluster_meat(x: &DMatrix<f64>, resid: &DVector<f64>, clusters: &[u32], n_clusters: usize) -> DMatrix<f64> {
    let k = x.ncols();
    let mut scores = DMatrix::<f64>::zeros(n_clusters, k);
    for r in 0..x.nrows() {
        let g = clusters[r] as usize;
        let e = resid[r];
        for j in 0..k {
            scores[(g, j)] += x[(r, j)] * e;
        }
    }
    scores.transpose() * scores
}

/// Sandwich covariance with cluster-summed scores and the finite-sample
/// factor `G/(G-1) * (N-1)/(N-K)`.
pub fn clustered_covariance(x: &DMatrix<f64>, resid: &DVector<f64>, clusters: &[u32]) -> Result<DMatrix<f64>> {
    let (n, k) = x.shape();
    let (ids, g) = dense_ids(clusters);
    if g < 2 {
        return Err(Error::TooFewClusters(g));
    }
    if n <= k {
        return Err(Error::RankDeficient(format!("{n} observations for {k} regressors")));
    }
    let bread = inv_spd(&(x.transpose() * x), "X'X in clustered covariance")?;
    let meat = cluster_meat(x, resid, &ids, g);
    let factor = (g as f64 / (g as f64 - 1.0)) * ((n as f64 - 1.0) / (n as f64 - k as f64));
    let v = &bread * meat * &bread * factor;
    Ok(0.5 * (&v + v.transpose()))
}
