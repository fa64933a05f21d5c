//! Rank-based decile bucketing and pairwise measure correlation.

use crate::error::{Error, Result};
use crate::table::DyadTable;

/// Assigns each value an empirical decile bucket in 1..=10.
///
/// Bucket boundaries are the empirical quantiles of the input itself, with
/// ties at a boundary resolved to the lower bucket; a degenerate all-equal
/// vector collapses to bucket 1. The assignment depends only on ranks, so
/// it is invariant under strictly increasing transforms.
pub fn decile_indicators(values: &[f64]) -> Result<Vec<u8>> {
    if values.is_empty() {
        return Err(Error::validation("decile_indicators: empty input"));
    }
    if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::validation(format!(
            "decile_indicators: non-finite value at index {pos}"
        )));
    }
    let n = values.len();
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // Threshold for the p/10 quantile: the ceil(n*p/10)-th order statistic.
    let thresholds: Vec<f64> = (1..10)
        .map(|p| sorted[(n * p).div_ceil(10) - 1])
        .collect();
    Ok(values
        .iter()
        .map(|&v| 1 + thresholds.iter().filter(|&&q| v > q).count() as u8)
        .collect())
}

/// Pearson correlation of two measures over their shared unordered pairs,
/// each pair counted once.
pub fn correlate_measures(table: &DyadTable, a: &str, b: &str) -> Result<f64> {
    let mut seen = std::collections::BTreeSet::new();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, j) in table.pairs() {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        if !seen.insert((lo.clone(), hi.clone())) {
            continue;
        }
        let (va, vb) = match (
            table.get_unordered(lo, hi, a),
            table.get_unordered(lo, hi, b),
        ) {
            (Some(va), Some(vb)) => (va, vb),
            _ => continue,
        };
        xs.push(va);
        ys.push(vb);
    }
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return Err(Error::validation(format!(
            "correlate_measures: need at least 2 shared pairs for {a} vs {b}, found {}",
            xs.len()
        )));
    }
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|v| v * v).sum();
    let syy: f64 = ys.iter().map(|v| v * v).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
    let vx = sxx - sx * sx / n;
    let vy = syy - sy * sy / n;
    if vx <= 0.0 || vy <= 0.0 {
        return Err(Error::UndefinedCorrelation(format!(
            "zero variance in {} over the shared pairs",
            if vx <= 0.0 { a } else { b }
        )));
    }
    let r = (sxy - sx * sy / n) / (vx * vy).sqrt();
    Ok(r.clamp(-1.0, 1.0))
}
