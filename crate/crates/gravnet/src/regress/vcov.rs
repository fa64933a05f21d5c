//! One-way and two-way clustered sandwich variance.
//!
//! Two-way follows Cameron-Gelbach-Miller: V = V_i + V_j - V_{i∩j}, where
//! the intersection dimension clusters on the (i, j) id pair. Each one-way
//! piece carries the small-sample correction G/(G-1) · (n-1)/(n-k).

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

use super::linalg::CholFactor;

/// How far below zero an eigenvalue may sit (relative to the largest)
/// before the matrix counts as indefinite and gets repaired.
pub const PSD_TOL: f64 = 1e-8;

/// One-way clustered meat: sum of outer products of within-cluster score
/// sums, with the small-sample correction.
fn one_way_meat(scores: &DMatrix<f64>, ids: &[usize], n: usize, k_params: usize) -> Result<DMatrix<f64>> {
    let p = scores.ncols();
    let g = ids.iter().copied().max().map_or(0, |m| m + 1);
    if g < 2 {
        return Err(Error::validation(
            "clustered variance needs at least 2 clusters per dimension",
        ));
    }
    let mut sums = DMatrix::<f64>::zeros(g, p);
    for (r, &id) in ids.iter().enumerate() {
        for c in 0..p {
            sums[(id, c)] += scores[(r, c)];
        }
    }
    let mut meat = DMatrix::zeros(p, p);
    for cl in 0..g {
        for a in 0..p {
            for b in 0..p {
                meat[(a, b)] += sums[(cl, a)] * sums[(cl, b)];
            }
        }
    }
    let denom = (n as f64 - k_params as f64).max(1.0);
    let correction = (g as f64 / (g as f64 - 1.0)) * ((n as f64 - 1.0) / denom);
    Ok(meat * correction)
}

fn sandwich(bread_inv: &DMatrix<f64>, meat: &DMatrix<f64>) -> DMatrix<f64> {
    let mut v = bread_inv * meat * bread_inv;
    for i in 0..v.nrows() {
        for j in (i + 1)..v.ncols() {
            let s = 0.5 * (v[(i, j)] + v[(j, i)]);
            v[(i, j)] = s;
            v[(j, i)] = s;
        }
    }
    v
}

/// Clustered sandwich covariance of the slope coefficients.
///
/// `scores` holds per-row score contributions (rows n, cols p), `bread`
/// the Hessian-style matrix B with V = B⁻¹ meat B⁻¹. Zero dimensions give
/// the plain inverse-bread covariance scaled by `sigma2`. Returns the
/// covariance and whether an eigenvalue truncation was applied.
pub fn cluster_vcov(
    scores: &DMatrix<f64>,
    bread: &DMatrix<f64>,
    dims: &[&[usize]],
    k_params: usize,
    col_names: &[String],
    sigma2: f64,
) -> Result<(DMatrix<f64>, bool)> {
    let n = scores.nrows();
    let bread_inv = CholFactor::new(bread, col_names)?.inverse();
    let v = match dims {
        [] => &bread_inv * sigma2,
        [d1] => {
            check_dim(d1, n)?;
            sandwich(&bread_inv, &one_way_meat(scores, d1, n, k_params)?)
        }
        [d1, d2] => {
            check_dim(d1, n)?;
            check_dim(d2, n)?;
            let v1 = one_way_meat(scores, d1, n, k_params)?;
            let v2 = one_way_meat(scores, d2, n, k_params)?;
            // intersection dimension: dense ids of the (d1, d2) pair
            let mut map: BTreeMap<(usize, usize), usize> = BTreeMap::new();
            let inter: Vec<usize> = d1
                .iter()
                .zip(d2.iter())
                .map(|(&a, &b)| {
                    let next = map.len();
                    *map.entry((a, b)).or_insert(next)
                })
                .collect();
            let v12 = one_way_meat(scores, &inter, n, k_params)?;
            sandwich(&bread_inv, &(v1 + v2 - v12))
        }
        _ => {
            return Err(Error::validation(format!(
                "at most 2 cluster dimensions supported, got {}",
                dims.len()
            )))
        }
    };
    repair_psd(v)
}

fn check_dim(ids: &[usize], n: usize) -> Result<()> {
    if ids.len() != n {
        return Err(Error::validation("cluster id length mismatch"));
    }
    Ok(())
}

/// Truncates negative eigenvalues to zero when the matrix is indefinite
/// beyond `PSD_TOL`, flagging the repair.
fn repair_psd(v: DMatrix<f64>) -> Result<(DMatrix<f64>, bool)> {
    let eig = v.clone().symmetric_eigen();
    let max_eig = eig.eigenvalues.iter().fold(0.0f64, |a, &e| a.max(e.abs()));
    let needs_repair = eig.eigenvalues.iter().any(|&e| e < -PSD_TOL * max_eig);
    if !needs_repair {
        return Ok((v, false));
    }
    let p = v.nrows();
    let mut d = DMatrix::zeros(p, p);
    for i in 0..p {
        d[(i, i)] = eig.eigenvalues[i].max(0.0);
    }
    let repaired = &eig.eigenvectors * d * eig.eigenvectors.transpose();
    Ok((repaired, true))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(p: usize) -> Vec<String> {
        (0..p).map(|i| format!("x{i}")).collect()
    }

    #[test]
    fn singleton_clusters_reduce_to_hc_sandwich() {
        // scores s_r, singleton clusters: meat = c * sum s_r s_r'
        let n = 20;
        let scores = DMatrix::from_fn(n, 2, |r, c| ((r * 7 + c * 3) % 11) as f64 - 5.0);
        let bread = scores.transpose() * &scores;
        let ids: Vec<usize> = (0..n).collect();
        let k = 2;
        let (v, repaired) =
            cluster_vcov(&scores, &bread, &[&ids], k, &names(2), 1.0).unwrap();
        assert!(!repaired);
        let bread_inv = CholFactor::new(&bread, &names(2)).unwrap().inverse();
        let mut meat = DMatrix::zeros(2, 2);
        for r in 0..n {
            for a in 0..2 {
                for b in 0..2 {
                    meat[(a, b)] += scores[(r, a)] * scores[(r, b)];
                }
            }
        }
        let g = n as f64;
        let corr = g / (g - 1.0) * (n as f64 - 1.0) / (n as f64 - k as f64);
        let expect = &bread_inv * (meat * corr) * &bread_inv;
        for a in 0..2 {
            for b in 0..2 {
                assert!((v[(a, b)] - expect[(a, b)]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn identical_dims_collapse_to_one_way() {
        let n = 24;
        let scores = DMatrix::from_fn(n, 2, |r, c| ((r * 13 + c * 5) % 17) as f64 - 8.0);
        let bread = scores.transpose() * &scores;
        let ids: Vec<usize> = (0..n).map(|r| r % 4).collect();
        let (two_way, _) =
            cluster_vcov(&scores, &bread, &[&ids, &ids], 2, &names(2), 1.0).unwrap();
        let (one_way, _) = cluster_vcov(&scores, &bread, &[&ids], 2, &names(2), 1.0).unwrap();
        for a in 0..2 {
            for b in 0..2 {
                assert!((two_way[(a, b)] - one_way[(a, b)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_cluster_dimension_rejected() {
        let scores = DMatrix::from_element(4, 1, 1.0);
        let bread = DMatrix::from_element(1, 1, 4.0);
        let ids = vec![0usize; 4];
        assert!(cluster_vcov(&scores, &bread, &[&ids], 1, &names(1), 1.0).is_err());
    }

    #[test]
    fn repair_flags_indefinite() {
        let v = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]); // eigenvalues 3, -1
        let (r, repaired) = repair_psd(v).unwrap();
        assert!(repaired);
        let eig = r.symmetric_eigen();
        assert!(eig.eigenvalues.iter().all(|&e| e >= -1e-12));
    }
}
