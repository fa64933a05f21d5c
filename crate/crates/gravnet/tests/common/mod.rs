//! Shared fixtures and independent reference implementations used by the
//! integration suites. Everything here recomputes results from first
//! principles (explicit dummies, full re-scans, brute-force sums) so the
//! library's incremental algorithms have something honest to answer to.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use gravnet::RegionId;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rid(s: &str) -> RegionId {
    RegionId::new(s).unwrap()
}

/// Distinct region codes AA00, AA01, ..., AB00, ... in sorted order.
pub fn region_codes(n: usize) -> Vec<RegionId> {
    (0..n)
        .map(|k| {
            let hi = (b'A' + (k / 100) as u8) as char;
            rid(&format!("A{hi}{:02}", k % 100))
        })
        .collect()
}

/// Random symmetric positive distance matrix. With probability 1/2 the
/// distances are quantized to eighths (exactly representable dyadic
/// rationals) to manufacture exact ties.
pub fn random_distance(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let quantize = rng.gen_bool(0.5);
    let mut d = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let mut v: f64 = rng.gen_range(0.2..10.0);
            if quantize {
                v = (v * 8.0).round() / 8.0;
            }
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    d
}

/// One merge recorded by the re-scan oracle: the member leaf sets of the
/// two clusters joined (sorted) and the merge height.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleMerge {
    pub left_members: Vec<usize>,
    pub right_members: Vec<usize>,
    pub height: f64,
}

/// Naive average-linkage oracle: at every step recomputes each cluster
/// pair's distance as the plain average over all cross leaf pairs, then
/// merges the minimum, breaking ties by the lexicographically smallest
/// (min canonical region, max canonical region) pair. No incremental
/// updates anywhere.
pub fn naive_average_linkage(regions: &[RegionId], d: &DMatrix<f64>) -> Vec<OracleMerge> {
    let n = regions.len();
    let mut clusters: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut merges = Vec::new();
    while clusters.len() > 1 {
        let mut best: Option<(usize, usize, f64)> = None;
        for a in 0..clusters.len() {
            for b in (a + 1)..clusters.len() {
                let mut sum = 0.0;
                for &i in &clusters[a] {
                    for &j in &clusters[b] {
                        sum += d[(i, j)];
                    }
                }
                let avg = sum / (clusters[a].len() * clusters[b].len()) as f64;
                let better = match best {
                    None => true,
                    Some((ba, bb, bd)) => {
                        // same tie window as the implementation under test:
                        // averages equal up to 1e-12 relative are tied
                        let tie =
                            (avg - bd).abs() <= 1e-12 * (1.0 + avg.abs().max(bd.abs()));
                        if tie {
                            canon_pair(regions, &clusters, a, b)
                                < canon_pair(regions, &clusters, ba, bb)
                        } else {
                            avg < bd
                        }
                    }
                };
                if better {
                    best = Some((a, b, avg));
                }
            }
        }
        let (a, b, height) = best.unwrap();
        let (first, second) = order_by_canon(regions, &clusters, a, b);
        let mut left_members = clusters[first].clone();
        left_members.sort();
        let mut right_members = clusters[second].clone();
        right_members.sort();
        merges.push(OracleMerge {
            left_members,
            right_members,
            height,
        });
        let mut merged = clusters[a].clone();
        merged.extend_from_slice(&clusters[b]);
        merged.sort();
        // remove the higher index first
        clusters.remove(b);
        clusters.remove(a);
        clusters.push(merged);
    }
    merges
}

fn canon(regions: &[RegionId], members: &[usize]) -> RegionId {
    members.iter().map(|&i| regions[i].clone()).min().unwrap()
}

fn canon_pair(
    regions: &[RegionId],
    clusters: &[Vec<usize>],
    a: usize,
    b: usize,
) -> (RegionId, RegionId) {
    let ca = canon(regions, &clusters[a]);
    let cb = canon(regions, &clusters[b]);
    if ca <= cb {
        (ca, cb)
    } else {
        (cb, ca)
    }
}

fn order_by_canon(
    regions: &[RegionId],
    clusters: &[Vec<usize>],
    a: usize,
    b: usize,
) -> (usize, usize) {
    if canon(regions, &clusters[a]) <= canon(regions, &clusters[b]) {
        (a, b)
    } else {
        (b, a)
    }
}

/// Explicit-dummy OLS oracle: solves the normal equations of
/// [X | dummies | intercept] directly and returns the slope block.
/// Dummies drop the first level of every factor.
pub fn dummy_ols(y: &[f64], x_cols: &[Vec<f64>], factors: &[Vec<usize>]) -> Option<Vec<f64>> {
    let full = dummy_design(x_cols, factors, y.len());
    let yv = DVector::from_column_slice(y);
    let beta = lstsq(&full, &yv)?;
    Some(beta.iter().take(x_cols.len()).copied().collect())
}

/// Explicit-dummy Poisson ML oracle: full Newton iterations on
/// [X | dummies | intercept]. Returns the slope estimates and their
/// classical inverse-Hessian standard errors.
pub fn dummy_newton_ppml(
    y: &[f64],
    x_cols: &[Vec<f64>],
    factors: &[Vec<usize>],
) -> Option<(Vec<f64>, Vec<f64>)> {
    let n = y.len();
    let full = dummy_design(x_cols, factors, n);
    let k = full.ncols();
    let mut beta = DVector::<f64>::zeros(k);
    let mut converged = false;
    for _ in 0..200 {
        let eta = &full * &beta;
        let mu = eta.map(|e: f64| e.min(700.0).exp());
        let grad = full.transpose() * (DVector::from_column_slice(y) - &mu);
        let mut hess = DMatrix::<f64>::zeros(k, k);
        for r in 0..n {
            for a in 0..k {
                for b in a..k {
                    let v = mu[r] * full[(r, a)] * full[(r, b)];
                    hess[(a, b)] += v;
                    if a != b {
                        hess[(b, a)] += v;
                    }
                }
            }
        }
        let step = hess.clone().lu().solve(&grad)?;
        beta += &step;
        let scale = 1.0 + beta.amax();
        if step.amax() <= 1e-12 * scale {
            // one more gradient check for good measure
            converged = grad.amax() <= 1e-8 * (1.0 + y.iter().sum::<f64>());
            break;
        }
    }
    if !converged {
        return None;
    }
    let eta = &full * &beta;
    let mu = eta.map(|e: f64| e.min(700.0).exp());
    let mut hess = DMatrix::<f64>::zeros(k, k);
    for r in 0..n {
        for a in 0..k {
            for b in a..k {
                let v = mu[r] * full[(r, a)] * full[(r, b)];
                hess[(a, b)] += v;
                if a != b {
                    hess[(b, a)] += v;
                }
            }
        }
    }
    let hinv = hess.try_inverse()?;
    let p = x_cols.len();
    let slopes = (0..p).map(|c| beta[c]).collect();
    let ses = (0..p).map(|c| hinv[(c, c)].max(0.0).sqrt()).collect();
    Some((slopes, ses))
}

/// [X | first-level-dropped dummies per factor | intercept].
pub fn dummy_design(x_cols: &[Vec<f64>], factors: &[Vec<usize>], n: usize) -> DMatrix<f64> {
    let mut cols: Vec<Vec<f64>> = x_cols.to_vec();
    for levels in factors {
        let count = levels.iter().copied().max().unwrap_or(0) + 1;
        for l in 1..count {
            cols.push(
                (0..n)
                    .map(|r| if levels[r] == l { 1.0 } else { 0.0 })
                    .collect(),
            );
        }
    }
    cols.push(vec![1.0; n]);
    DMatrix::from_fn(n, cols.len(), |r, c| cols[c][r])
}

/// Least squares via the normal equations with an LU solve; `None` when
/// the cross-product matrix is singular to working precision.
pub fn lstsq(x: &DMatrix<f64>, y: &DVector<f64>) -> Option<DVector<f64>> {
    let xtx = x.transpose() * x;
    let xty = x.transpose() * y;
    let max_diag = (0..xtx.nrows())
        .map(|i| xtx[(i, i)].abs())
        .fold(0.0f64, f64::max);
    let lu = xtx.clone().lu();
    let beta = lu.solve(&xty)?;
    // reject nearly singular systems the LU happened to push through
    let resid = &xtx * &beta - &xty;
    if resid.amax() > 1e-6 * (1.0 + max_diag) * (1.0 + beta.amax()) {
        return None;
    }
    Some(beta)
}

/// Brute-force Cameron-Gelbach-Miller covariance: all three one-way pieces
/// assembled from scratch with hash-free explicit sums, each with the
/// G/(G-1) * (n-1)/(n-k) correction, sandwiched by the plain matrix
/// inverse of the bread.
pub fn brute_force_cgm(
    scores: &DMatrix<f64>,
    bread: &DMatrix<f64>,
    dim1: &[usize],
    dim2: &[usize],
    k_params: usize,
) -> DMatrix<f64> {
    let bread_inv = bread.clone().try_inverse().unwrap();
    let meat = brute_force_meat(scores, dim1, k_params)
        + brute_force_meat(scores, dim2, k_params)
        - {
            // intersection clusters: rows sharing both ids
            let pairs: Vec<(usize, usize)> =
                dim1.iter().zip(dim2).map(|(&a, &b)| (a, b)).collect();
            let mut uniq = pairs.clone();
            uniq.sort();
            uniq.dedup();
            let inter: Vec<usize> = pairs
                .iter()
                .map(|p| uniq.iter().position(|q| q == p).unwrap())
                .collect();
            brute_force_meat(scores, &inter, k_params)
        };
    &bread_inv * meat * &bread_inv
}

pub fn brute_force_meat(scores: &DMatrix<f64>, ids: &[usize], k_params: usize) -> DMatrix<f64> {
    let n = scores.nrows();
    let p = scores.ncols();
    let g = ids.iter().copied().max().unwrap() + 1;
    let mut meat = DMatrix::<f64>::zeros(p, p);
    for cl in 0..g {
        let mut s = DVector::<f64>::zeros(p);
        for r in 0..n {
            if ids[r] == cl {
                for c in 0..p {
                    s[c] += scores[(r, c)];
                }
            }
        }
        meat += &s * s.transpose();
    }
    let (gf, nf, kf) = (g as f64, n as f64, k_params as f64);
    meat * (gf / (gf - 1.0)) * ((nf - 1.0) / (nf - kf))
}

/// Full re-scan separation oracle: repeatedly scans every factor for
/// all-zero-outcome levels over the surviving rows, dropping them until a
/// complete scan removes nothing. Returns the surviving row indices.
pub fn rescan_separation(y: &[f64], factors: &[Vec<usize>]) -> Vec<usize> {
    let mut alive: Vec<usize> = (0..y.len()).collect();
    loop {
        let mut removed = false;
        for levels in factors {
            let count = levels.iter().copied().max().unwrap_or(0) + 1;
            let mut any_positive = vec![false; count];
            for &r in &alive {
                if y[r] > 0.0 {
                    any_positive[levels[r]] = true;
                }
            }
            let before = alive.len();
            alive.retain(|&r| any_positive[levels[r]]);
            removed = removed || alive.len() != before;
        }
        if !removed {
            return alive;
        }
    }
}
