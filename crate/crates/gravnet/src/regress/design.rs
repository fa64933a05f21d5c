//! Design-matrix construction: continuous terms, decile-indicator
//! expansion, factor level assignment, and list-wise missing deletion.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factor::{FactorSpec, RowKey};
use crate::measures::decile_indicators;
use crate::region::RegionId;
use crate::table::{AttributeTable, DyadTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transform {
    Identity,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Ols,
    Ppml,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousTerm {
    pub measure: String,
    pub transform: Transform,
}

impl ContinuousTerm {
    pub fn name(&self) -> String {
        match self.transform {
            Transform::Identity => self.measure.clone(),
            Transform::Log => format!("log({})", self.measure),
        }
    }
}

/// One regression specification.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub outcome: String,
    pub continuous: Vec<ContinuousTerm>,
    pub decile_terms: Vec<String>,
    pub factors: Vec<FactorSpec>,
    pub cluster_dims: Vec<FactorSpec>,
    pub family: Family,
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        if self.cluster_dims.len() > 2 {
            return Err(Error::validation(format!(
                "at most 2 cluster dimensions supported, got {}",
                self.cluster_dims.len()
            )));
        }
        Ok(())
    }
}

/// A flat observation table feeding `build_design`: row keys plus named
/// numeric columns (NaN = missing).
#[derive(Debug, Clone, Default)]
pub struct InputTable {
    pub keys: Vec<RowKey>,
    pub columns: BTreeMap<String, Vec<f64>>,
}

impl InputTable {
    /// Dyadic input: every row of the dyad table, with each region
    /// attribute broadcast to `<attr>_i` / `<attr>_j` endpoint columns.
    pub fn from_dyads(table: &DyadTable, attrs: Option<&AttributeTable>) -> Self {
        let measures = table.measure_names();
        let mut keys = Vec::new();
        let mut columns: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        let attr_names = attrs.map(|a| a.attr_names()).unwrap_or_default();
        for (i, j, vals) in table.iter() {
            keys.push(RowKey::Dyad(i.clone(), j.clone()));
            for m in &measures {
                columns
                    .entry(m.clone())
                    .or_default()
                    .push(vals.get(m).copied().unwrap_or(f64::NAN));
            }
            if let Some(a) = attrs {
                for name in &attr_names {
                    columns
                        .entry(format!("{name}_i"))
                        .or_default()
                        .push(a.get(i, name).unwrap_or(f64::NAN));
                    columns
                        .entry(format!("{name}_j"))
                        .or_default()
                        .push(a.get(j, name).unwrap_or(f64::NAN));
                }
            }
        }
        InputTable { keys, columns }
    }

    /// Regional input: one row per region of the attribute table.
    pub fn from_regions(attrs: &AttributeTable) -> Self {
        let names = attrs.attr_names();
        let regions: Vec<RegionId> = attrs.regions().cloned().collect();
        let mut keys = Vec::new();
        let mut columns: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for r in &regions {
            keys.push(RowKey::Region(r.clone()));
            for name in &names {
                columns
                    .entry(name.clone())
                    .or_default()
                    .push(attrs.get(r, name).unwrap_or(f64::NAN));
            }
        }
        InputTable { keys, columns }
    }

    pub fn n_rows(&self) -> usize {
        self.keys.len()
    }
}

/// The assembled estimation problem. Factor level ids and cluster ids are
/// dense 0..L-1 per dimension.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    pub y: DVector<f64>,
    pub x: DMatrix<f64>,
    pub col_names: Vec<String>,
    pub factor_names: Vec<String>,
    pub factor_levels: Vec<Vec<usize>>,
    pub factor_level_names: Vec<Vec<String>>,
    pub cluster_names: Vec<String>,
    pub cluster_ids: Vec<Vec<usize>>,
    pub cluster_counts: Vec<usize>,
    pub row_keys: Vec<RowKey>,
    /// Rows deleted list-wise for missing referenced values.
    pub n_missing_dropped: usize,
    pub family: Family,
}

impl DesignMatrix {
    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    pub fn level_counts(&self) -> Vec<usize> {
        self.factor_level_names.iter().map(|v| v.len()).collect()
    }

    /// Parameters implicitly absorbed by the factors (shared constant
    /// counted once across factors).
    pub fn n_absorbed_params(&self) -> usize {
        let f = self.factor_level_names.len();
        if f == 0 {
            0
        } else {
            self.level_counts().iter().sum::<usize>() - (f - 1)
        }
    }

    /// Retains only the rows where `keep` is true, re-densifying factor
    /// and cluster ids.
    pub fn filter_rows(&self, keep: &[bool]) -> DesignMatrix {
        let idx: Vec<usize> = (0..self.n_rows()).filter(|&r| keep[r]).collect();
        let y = DVector::from_iterator(idx.len(), idx.iter().map(|&r| self.y[r]));
        let mut x = DMatrix::zeros(idx.len(), self.x.ncols());
        for (ri, &r) in idx.iter().enumerate() {
            for c in 0..self.x.ncols() {
                x[(ri, c)] = self.x[(r, c)];
            }
        }
        let redense = |ids: &Vec<usize>, names: &Vec<String>| -> (Vec<usize>, Vec<String>) {
            let mut map: BTreeMap<usize, usize> = BTreeMap::new();
            let mut new_names = Vec::new();
            let mut new_ids = Vec::with_capacity(idx.len());
            for &r in &idx {
                let old = ids[r];
                let next = map.len();
                let dense = *map.entry(old).or_insert_with(|| {
                    new_names.push(names.get(old).cloned().unwrap_or_else(|| old.to_string()));
                    next
                });
                new_ids.push(dense);
            }
            (new_ids, new_names)
        };
        let mut factor_levels = Vec::new();
        let mut factor_level_names = Vec::new();
        for (ids, names) in self.factor_levels.iter().zip(&self.factor_level_names) {
            let (i, n) = redense(ids, names);
            factor_levels.push(i);
            factor_level_names.push(n);
        }
        let mut cluster_ids = Vec::new();
        let mut cluster_counts = Vec::new();
        for (ids, name) in self.cluster_ids.iter().zip(&self.cluster_names) {
            let names: Vec<String> = (0..=ids.iter().copied().max().unwrap_or(0))
                .map(|k| format!("{name}:{k}"))
                .collect();
            let (i, n) = redense(ids, &names);
            cluster_counts.push(n.len());
            cluster_ids.push(i);
        }
        DesignMatrix {
            y,
            x,
            col_names: self.col_names.clone(),
            factor_names: self.factor_names.clone(),
            factor_levels,
            factor_level_names,
            cluster_names: self.cluster_names.clone(),
            cluster_ids,
            cluster_counts,
            row_keys: idx.iter().map(|&r| self.row_keys[r].clone()).collect(),
            n_missing_dropped: self.n_missing_dropped,
            family: self.family,
        }
    }
}

/// Builds the estimation problem from an observation table and a model
/// spec. Column order is deterministic: continuous terms in spec order,
/// then decile indicators per term with bucket 1 as the omitted reference.
pub fn build_design(table: &InputTable, spec: &ModelSpec) -> Result<DesignMatrix> {
    spec.validate()?;
    let n_input = table.n_rows();
    if n_input == 0 {
        return Err(Error::validation("build_design: empty input table"));
    }
    let get_col = |name: &str| -> Result<&Vec<f64>> {
        table.columns.get(name).ok_or_else(|| {
            Error::validation(format!("referenced measure {name:?} not present in the data"))
        })
    };

    // referenced numeric columns drive list-wise deletion
    let mut referenced: Vec<&str> = vec![spec.outcome.as_str()];
    referenced.extend(spec.continuous.iter().map(|t| t.measure.as_str()));
    referenced.extend(spec.decile_terms.iter().map(|s| s.as_str()));
    for name in &referenced {
        get_col(name)?;
    }
    let mut keep = vec![true; n_input];
    for name in &referenced {
        for (r, v) in get_col(name)?.iter().enumerate() {
            if v.is_nan() {
                keep[r] = false;
            }
        }
    }
    let rows: Vec<usize> = (0..n_input).filter(|&r| keep[r]).collect();
    let n = rows.len();
    let n_missing_dropped = n_input - n;
    if n == 0 {
        return Err(Error::validation(
            "build_design: all rows dropped by missing-data deletion",
        ));
    }

    let y = DVector::from_iterator(n, rows.iter().map(|&r| get_col(&spec.outcome).unwrap()[r]));

    let mut cols: Vec<Vec<f64>> = Vec::new();
    let mut col_names: Vec<String> = Vec::new();
    for term in &spec.continuous {
        let src = get_col(&term.measure)?;
        let mut col = Vec::with_capacity(n);
        match term.transform {
            Transform::Identity => {
                for &r in &rows {
                    col.push(src[r]);
                }
            }
            Transform::Log => {
                let mut bad = Vec::new();
                for &r in &rows {
                    let v = src[r];
                    if v <= 0.0 {
                        bad.push(table.keys[r].to_string());
                    } else {
                        col.push(v.ln());
                    }
                }
                if !bad.is_empty() {
                    return Err(Error::validation(format!(
                        "log({}) of non-positive value at rows: {}",
                        term.measure,
                        bad.join(", ")
                    )));
                }
            }
        }
        cols.push(col);
        col_names.push(term.name());
    }
    for term in &spec.decile_terms {
        let src = get_col(term)?;
        let values: Vec<f64> = rows.iter().map(|&r| src[r]).collect();
        let buckets = decile_indicators(&values)?;
        for b in 2..=10u8 {
            if buckets.iter().any(|&x| x == b) {
                cols.push(buckets.iter().map(|&x| if x == b { 1.0 } else { 0.0 }).collect());
                col_names.push(format!("{term}::d{b}"));
            }
        }
    }

    let x = DMatrix::from_fn(n, cols.len(), |r, c| cols[c][r]);

    let custom_lookup = |row: usize| {
        move |col: &str| -> Option<String> {
            table
                .columns
                .get(col)
                .map(|v| v[row])
                .filter(|v| !v.is_nan())
                .map(|v| format!("{v}"))
        }
    };
    let assign_levels = |f: &FactorSpec| -> Result<(Vec<usize>, Vec<String>)> {
        let mut raw = Vec::with_capacity(n);
        for &r in &rows {
            let lookup = custom_lookup(r);
            raw.push(f.level_of(&table.keys[r], Some(&lookup))?);
        }
        // dense ids in sorted level-name order, for run-to-run determinism
        let mut names: Vec<String> = raw.clone();
        names.sort();
        names.dedup();
        let index: BTreeMap<&String, usize> =
            names.iter().enumerate().map(|(k, v)| (v, k)).collect();
        let ids = raw.iter().map(|l| index[l]).collect();
        Ok((ids, names))
    };

    let mut factor_levels = Vec::new();
    let mut factor_level_names = Vec::new();
    let mut factor_names = Vec::new();
    for f in &spec.factors {
        let (ids, names) = assign_levels(f)?;
        factor_levels.push(ids);
        factor_level_names.push(names);
        factor_names.push(f.name.clone());
    }
    let mut cluster_ids = Vec::new();
    let mut cluster_counts = Vec::new();
    let mut cluster_names = Vec::new();
    for f in &spec.cluster_dims {
        let (ids, names) = assign_levels(f)?;
        cluster_counts.push(names.len());
        cluster_ids.push(ids);
        cluster_names.push(f.name.clone());
    }

    Ok(DesignMatrix {
        y,
        x,
        col_names,
        factor_names,
        factor_levels,
        factor_level_names,
        cluster_names,
        cluster_ids,
        cluster_counts,
        row_keys: rows.iter().map(|&r| table.keys[r].clone()).collect(),
        n_missing_dropped,
        family: spec.family,
    })
}
