//! Gravity-style estimation: design construction, OLS and PPML with
//! absorbed fixed effects, separation dropping, and clustered variance.

pub mod absorb;
pub mod config;
pub mod design;
pub mod linalg;
pub mod ols;
pub mod ppml;
pub mod report;
pub mod separation;
pub mod vcov;

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::Serialize;

pub use design::{build_design, ContinuousTerm, DesignMatrix, Family, InputTable, ModelSpec, Transform};
pub use ols::ols_fit;
pub use ppml::ppml_fit;
pub use separation::drop_separated;
pub use vcov::cluster_vcov;

/// Estimation output for one regression column.
#[derive(Debug, Clone, Serialize)]
pub struct FitResult {
    pub coefficients: BTreeMap<String, f64>,
    pub se: BTreeMap<String, f64>,
    /// Column order of `vcov` rows/cols.
    pub terms: Vec<String>,
    pub vcov: Vec<Vec<f64>>,
    /// R² for OLS, McFadden pseudo-R² against a factors-only null for PPML.
    pub fit_stat: f64,
    pub n_total: usize,
    pub n_dropped_by_fe: usize,
    pub n_used: usize,
    pub converged: bool,
    pub iterations: usize,
    /// True when the clustered covariance needed eigenvalue truncation.
    pub psd_repaired: bool,
    pub diagnostics: FitDiagnostics,
    #[serde(skip)]
    pub residuals: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitDiagnostics {
    pub fit_stat_definition: String,
    pub cluster_correction: String,
    /// Largest relative violation of the per-column moment condition
    /// sum x (y - mu) = 0 at convergence (PPML only).
    pub max_moment_violation: Option<f64>,
    /// Largest relative deviation of sum y from sum mu within an absorbed
    /// factor level (PPML only).
    pub max_fe_identity_violation: Option<f64>,
}

impl FitResult {
    pub fn coefficient(&self, term: &str) -> Option<f64> {
        self.coefficients.get(term).copied()
    }

    pub fn se_of(&self, term: &str) -> Option<f64> {
        self.se.get(term).copied()
    }
}

pub(crate) fn vcov_to_vecs(v: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..v.nrows())
        .map(|i| (0..v.ncols()).map(|j| v[(i, j)]).collect())
        .collect()
}
