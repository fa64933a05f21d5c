//! Dyadic (region-pair) network econometrics.
//!
//! The crate cleans and harmonizes region-pair flow data, clusters regions
//! into communities by social connectedness, and estimates gravity-style
//! PPML and OLS models with high-dimensional fixed effects and one- or
//! two-way clustered standard errors.
//!
//! The main pieces:
//!
//! * [`table`] — [`table::DyadTable`], [`table::SciMatrix`], and
//!   [`table::AttributeTable`] with their CSV formats.
//! * [`ingest`] — rail-flow cleaning, region crosswalks, panel collapse,
//!   and foreign-connection shares.
//! * [`cluster`] — average-linkage agglomeration under 1/connectedness
//!   distance, with k-cuts and merge-tree export.
//! * [`regress`] — design matrices, OLS/PPML with absorbed fixed effects,
//!   separation dropping, and clustered sandwich variance.
//! * [`manifest`] — reproducibility manifests for CLI runs.

pub mod cluster;
pub mod error;
pub mod factor;
pub mod ingest;
pub mod manifest;
pub mod measures;
pub mod region;
pub mod regress;
pub mod table;

pub use error::{Error, Result};
pub use region::{country_of, CountryId, RegionId};
