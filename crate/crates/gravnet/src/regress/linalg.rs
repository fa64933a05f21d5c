//! Dense symmetric solves with explicit collinearity detection.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Pivot threshold for declaring a column collinear during decomposition.
pub const PIVOT_TOL: f64 = 1e-10;

/// Cholesky factor of a symmetric PSD matrix with per-pivot rank checks.
/// A pivot below `PIVOT_TOL` relative to the largest diagonal entry means
/// the corresponding column is collinear; the offending column names are
/// reported.
#[derive(Debug)]
pub struct CholFactor {
    l: DMatrix<f64>,
}

impl CholFactor {
    pub fn new(g: &DMatrix<f64>, col_names: &[String]) -> Result<Self> {
        let k = g.nrows();
        assert_eq!(g.ncols(), k);
        let scale = (0..k).map(|i| g[(i, i)].abs()).fold(0.0f64, f64::max).max(1.0);
        let mut l = DMatrix::zeros(k, k);
        let mut bad = Vec::new();
        for j in 0..k {
            let mut d = g[(j, j)];
            for m in 0..j {
                d -= l[(j, m)] * l[(j, m)];
            }
            if d <= PIVOT_TOL * scale {
                bad.push(
                    col_names
                        .get(j)
                        .cloned()
                        .unwrap_or_else(|| format!("col{j}")),
                );
                // keep factoring with a unit pivot so every bad column is named
                l[(j, j)] = 1.0;
                continue;
            }
            l[(j, j)] = d.sqrt();
            for i in (j + 1)..k {
                let mut s = g[(i, j)];
                for m in 0..j {
                    s -= l[(i, m)] * l[(j, m)];
                }
                l[(i, j)] = s / l[(j, j)];
            }
        }
        if !bad.is_empty() {
            return Err(Error::Collinear { columns: bad });
        }
        Ok(CholFactor { l })
    }

    /// Solves G x = b.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let k = self.l.nrows();
        let mut y = b.to_vec();
        for i in 0..k {
            for m in 0..i {
                y[i] -= self.l[(i, m)] * y[m];
            }
            y[i] /= self.l[(i, i)];
        }
        for i in (0..k).rev() {
            for m in (i + 1)..k {
                y[i] -= self.l[(m, i)] * y[m];
            }
            y[i] /= self.l[(i, i)];
        }
        y
    }

    /// G^{-1}, column by column.
    pub fn inverse(&self) -> DMatrix<f64> {
        let k = self.l.nrows();
        let mut inv = DMatrix::zeros(k, k);
        let mut e = vec![0.0; k];
        for j in 0..k {
            e[j] = 1.0;
            let col = self.solve(&e);
            for i in 0..k {
                inv[(i, j)] = col[i];
            }
            e[j] = 0.0;
        }
        // symmetrize against round-off
        for i in 0..k {
            for j in (i + 1)..k {
                let v = 0.5 * (inv[(i, j)] + inv[(j, i)]);
                inv[(i, j)] = v;
                inv[(j, i)] = v;
            }
        }
        inv
    }
}
