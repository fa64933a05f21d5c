//! Dyadic and regional data tables with their CSV external formats.
//!
//! A missing value is represented by `f64::NAN` internally and by an empty
//! cell in CSV. Missing is distinct from zero: only the ETL rules are
//! allowed to turn missing into zero.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::region::RegionId;

/// A keyed table of ordered (origin, destination) rows carrying one or more
/// named numeric measures. At most one row per ordered pair.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DyadTable {
    rows: BTreeMap<(RegionId, RegionId), BTreeMap<String, f64>>,
    universe: BTreeSet<RegionId>,
}

impl DyadTable {
    pub fn new() -> Self {
        DyadTable::default()
    }

    pub fn with_universe(universe: impl IntoIterator<Item = RegionId>) -> Self {
        DyadTable {
            rows: BTreeMap::new(),
            universe: universe.into_iter().collect(),
        }
    }

    /// Sets a measure value on the (i, j) row, creating the row if absent.
    /// `NAN` records an explicit missing value; infinities are rejected.
    pub fn set(&mut self, i: RegionId, j: RegionId, measure: &str, value: f64) -> Result<()> {
        if value.is_infinite() {
            return Err(Error::validation(format!(
                "non-finite value for {measure} at ({i},{j})"
            )));
        }
        self.universe.insert(i.clone());
        self.universe.insert(j.clone());
        self.rows
            .entry((i, j))
            .or_default()
            .insert(measure.to_string(), value);
        Ok(())
    }

    /// Non-missing value of `measure` at the ordered pair, if any.
    pub fn get(&self, i: &RegionId, j: &RegionId, measure: &str) -> Option<f64> {
        self.rows
            .get(&(i.clone(), j.clone()))
            .and_then(|m| m.get(measure))
            .copied()
            .filter(|v| !v.is_nan())
    }

    /// Raw stored value, where `NAN` means explicitly missing.
    pub fn get_raw(&self, i: &RegionId, j: &RegionId, measure: &str) -> Option<f64> {
        self.rows
            .get(&(i.clone(), j.clone()))
            .and_then(|m| m.get(measure))
            .copied()
    }

    pub fn has_row(&self, i: &RegionId, j: &RegionId) -> bool {
        self.rows.contains_key(&(i.clone(), j.clone()))
    }

    pub fn universe(&self) -> &BTreeSet<RegionId> {
        &self.universe
    }

    pub fn add_to_universe(&mut self, r: RegionId) {
        self.universe.insert(r);
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    /// Sorted measure names present anywhere in the table.
    pub fn measure_names(&self) -> Vec<String> {
        let mut names = BTreeSet::new();
        for m in self.rows.values() {
            names.extend(m.keys().cloned());
        }
        names.into_iter().collect()
    }

    /// Rows in deterministic (i, j) order.
    pub fn pairs(&self) -> impl Iterator<Item = (&RegionId, &RegionId)> {
        self.rows.keys().map(|(i, j)| (i, j))
    }

    pub fn iter(
        &self,
    ) -> impl Iterator<Item = (&RegionId, &RegionId, &BTreeMap<String, f64>)> {
        self.rows.iter().map(|((i, j), m)| (i, j, m))
    }

    /// Resolves a measure at an unordered pair: the (min, max) orientation
    /// wins when both directions carry a value.
    pub fn get_unordered(&self, a: &RegionId, b: &RegionId, measure: &str) -> Option<f64> {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        self.get(lo, hi, measure).or_else(|| self.get(hi, lo, measure))
    }

    /// Writes the table in the dyad CSV format: header `i,j,<m1>,<m2>,...`,
    /// empty cell = missing, rows sorted by (i, j). Finite values use
    /// shortest round-trip formatting, so read-back is bit-exact.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let measures = self.measure_names();
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["i".to_string(), "j".to_string()];
        header.extend(measures.iter().cloned());
        wtr.write_record(&header)?;
        for ((i, j), vals) in &self.rows {
            let mut rec = vec![i.code().to_string(), j.code().to_string()];
            for m in &measures {
                match vals.get(m) {
                    Some(v) if !v.is_nan() => rec.push(format!("{v}")),
                    _ => rec.push(String::new()),
                }
            }
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn write_csv_path(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(f)
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let headers = rdr.headers()?.clone();
        if headers.len() < 2 || &headers[0] != "i" || &headers[1] != "j" {
            return Err(Error::Parse(
                "dyad CSV must start with columns i,j".to_string(),
            ));
        }
        let measures: Vec<String> = headers.iter().skip(2).map(|s| s.to_string()).collect();
        let mut table = DyadTable::new();
        for (lineno, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let i = RegionId::new(&rec[0])
                .map_err(|e| Error::Parse(format!("row {}: {e}", lineno + 2)))?;
            let j = RegionId::new(&rec[1])
                .map_err(|e| Error::Parse(format!("row {}: {e}", lineno + 2)))?;
            if table.has_row(&i, &j) {
                return Err(Error::validation(format!(
                    "duplicate row for pair ({i},{j})"
                )));
            }
            for (m, cell) in measures.iter().zip(rec.iter().skip(2)) {
                let v = if cell.is_empty() {
                    f64::NAN
                } else {
                    cell.parse::<f64>().map_err(|_| {
                        Error::Parse(format!("row {}: bad number {cell:?}", lineno + 2))
                    })?
                };
                table.set(i.clone(), j.clone(), m, v)?;
            }
            if measures.is_empty() {
                table.rows.entry((i, j)).or_default();
            }
        }
        Ok(table)
    }

    pub fn read_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_csv(f)
    }
}

/// A symmetric, strictly positive dyadic connectedness matrix over an
/// ordered (lexicographically sorted) region set.
#[derive(Debug, Clone)]
pub struct SciMatrix {
    regions: Vec<RegionId>,
    index: BTreeMap<RegionId, usize>,
    values: DMatrix<f64>,
}

impl SciMatrix {
    /// Builds the matrix from (i, j, value) entries. Every unordered
    /// off-diagonal pair of the implied region set must be covered; when
    /// both orientations are given they must agree. Diagonal entries are
    /// optional and default to 0.
    pub fn from_entries(entries: impl IntoIterator<Item = (RegionId, RegionId, f64)>) -> Result<Self> {
        let entries: Vec<_> = entries.into_iter().collect();
        let mut set = BTreeSet::new();
        for (i, j, _) in &entries {
            set.insert(i.clone());
            set.insert(j.clone());
        }
        let regions: Vec<RegionId> = set.into_iter().collect();
        let index: BTreeMap<RegionId, usize> = regions
            .iter()
            .cloned()
            .enumerate()
            .map(|(k, r)| (r, k))
            .collect();
        let n = regions.len();
        let mut values = DMatrix::from_element(n, n, f64::NAN);
        for k in 0..n {
            values[(k, k)] = 0.0;
        }
        for (i, j, v) in &entries {
            if !v.is_finite() {
                return Err(Error::validation(format!(
                    "non-finite connectedness at ({i},{j})"
                )));
            }
            let (a, b) = (index[i], index[j]);
            let existing = values[(a, b)];
            if a != b && !existing.is_nan() && existing != *v {
                return Err(Error::validation(format!(
                    "asymmetric connectedness at ({i},{j}): {existing} vs {v}"
                )));
            }
            values[(a, b)] = *v;
            values[(b, a)] = *v;
        }
        for a in 0..n {
            for b in (a + 1)..n {
                if values[(a, b)].is_nan() {
                    return Err(Error::validation(format!(
                        "missing connectedness for pair ({},{})",
                        regions[a], regions[b]
                    )));
                }
            }
        }
        Ok(SciMatrix {
            regions,
            index,
            values,
        })
    }

    /// Reads a dyad CSV with a single measure column as an SCI matrix.
    pub fn read_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let table = DyadTable::read_csv_path(path)?;
        let measures = table.measure_names();
        let measure = match measures.as_slice() {
            [m] => m.clone(),
            _ => {
                return Err(Error::validation(format!(
                    "SCI CSV must carry exactly one measure column, found {}",
                    measures.len()
                )))
            }
        };
        let entries: Vec<_> = table
            .iter()
            .filter_map(|(i, j, vals)| {
                vals.get(&measure)
                    .filter(|v| !v.is_nan())
                    .map(|v| (i.clone(), j.clone(), *v))
            })
            .collect();
        Self::from_entries(entries)
    }

    pub fn regions(&self) -> &[RegionId] {
        &self.regions
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    pub fn value_of(&self, i: &RegionId, j: &RegionId) -> Option<f64> {
        let a = *self.index.get(i)?;
        let b = *self.index.get(j)?;
        Some(self.values[(a, b)])
    }

    pub fn index_of(&self, r: &RegionId) -> Option<usize> {
        self.index.get(r).copied()
    }

    /// Multiplies every entry by a positive constant.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0) {
            return Err(Error::validation("scale factor must be positive"));
        }
        Ok(SciMatrix {
            regions: self.regions.clone(),
            index: self.index.clone(),
            values: &self.values * c,
        })
    }
}

/// Per-region named attributes (`region,<attr1>,...` in CSV).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AttributeTable {
    rows: BTreeMap<RegionId, BTreeMap<String, f64>>,
}

impl AttributeTable {
    pub fn new() -> Self {
        AttributeTable::default()
    }

    pub fn set(&mut self, region: RegionId, attr: &str, value: f64) -> Result<()> {
        if value.is_infinite() {
            return Err(Error::validation(format!(
                "non-finite value for {attr} at {region}"
            )));
        }
        if !value.is_nan() {
            let lower = attr.to_ascii_lowercase();
            if (lower == "population" || lower == "weight" || lower == "users") && value <= 0.0 {
                return Err(Error::validation(format!(
                    "{attr} must be strictly positive at {region}, got {value}"
                )));
            }
            if lower.contains("share") && !(0.0..=100.0).contains(&value) {
                return Err(Error::validation(format!(
                    "{attr} must lie in [0,100] percent at {region}, got {value}"
                )));
            }
        }
        self.rows
            .entry(region)
            .or_default()
            .insert(attr.to_string(), value);
        Ok(())
    }

    pub fn get(&self, region: &RegionId, attr: &str) -> Option<f64> {
        self.rows
            .get(region)
            .and_then(|m| m.get(attr))
            .copied()
            .filter(|v| !v.is_nan())
    }

    pub fn regions(&self) -> impl Iterator<Item = &RegionId> {
        self.rows.keys()
    }

    pub fn attr_names(&self) -> Vec<String> {
        let mut names = BTreeSet::new();
        for m in self.rows.values() {
            names.extend(m.keys().cloned());
        }
        names.into_iter().collect()
    }

    pub fn read_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_csv(f)
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let headers = rdr.headers()?.clone();
        if headers.is_empty() || &headers[0] != "region" {
            return Err(Error::Parse(
                "attribute CSV must start with a region column".to_string(),
            ));
        }
        let attrs: Vec<String> = headers.iter().skip(1).map(|s| s.to_string()).collect();
        let mut table = AttributeTable::new();
        for (lineno, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let region = RegionId::new(&rec[0])
                .map_err(|e| Error::Parse(format!("row {}: {e}", lineno + 2)))?;
            for (a, cell) in attrs.iter().zip(rec.iter().skip(1)) {
                let v = if cell.is_empty() {
                    f64::NAN
                } else {
                    cell.parse::<f64>().map_err(|_| {
                        Error::Parse(format!("row {}: bad number {cell:?}", lineno + 2))
                    })?
                };
                table.set(region.clone(), a, v)?;
            }
        }
        Ok(table)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let attrs = self.attr_names();
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["region".to_string()];
        header.extend(attrs.iter().cloned());
        wtr.write_record(&header)?;
        for (region, vals) in &self.rows {
            let mut rec = vec![region.code().to_string()];
            for a in &attrs {
                match vals.get(a) {
                    Some(v) if !v.is_nan() => rec.push(format!("{v}")),
                    _ => rec.push(String::new()),
                }
            }
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }
}
