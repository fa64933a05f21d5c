//! Separation handling for Poisson fixed-effect models: observations whose
//! outcomes are fitted exactly by a fixed effect (an all-zero factor level)
//! are dropped before estimation.

use crate::error::{Error, Result};

use super::design::DesignMatrix;

/// Iteratively removes every row in a factor level whose outcomes are all
/// zero, until no such level remains. Returns the filtered problem and the
/// number of rows dropped.
pub fn drop_separated(dm: &DesignMatrix) -> Result<(DesignMatrix, usize)> {
    if let Some(r) = (0..dm.n_rows()).find(|&r| dm.y[r] < 0.0) {
        return Err(Error::validation(format!(
            "negative outcome {} at row {}",
            dm.y[r], dm.row_keys[r]
        )));
    }
    let mut current = dm.clone();
    let mut dropped = 0usize;
    loop {
        let n = current.n_rows();
        let mut keep = vec![true; n];
        let mut changed = false;
        for (levels, names) in current.factor_levels.iter().zip(&current.factor_level_names) {
            let mut any_positive = vec![false; names.len()];
            for r in 0..n {
                if current.y[r] > 0.0 {
                    any_positive[levels[r]] = true;
                }
            }
            for r in 0..n {
                if keep[r] && !any_positive[levels[r]] {
                    keep[r] = false;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
        dropped += keep.iter().filter(|&&k| !k).count();
        if keep.iter().all(|&k| !k) {
            return Err(Error::Degenerate(
                "all observations are fully explained by fixed effects".to_string(),
            ));
        }
        current = current.filter_rows(&keep);
    }
    Ok((current, dropped))
}
