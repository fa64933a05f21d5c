//! Declarative multi-column regression specs, read from TOML.
//!
//! One config describes a whole comparison table: shared data and family,
//! plus per-column term lists.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::factor::FactorSpec;
use crate::table::{AttributeTable, DyadTable};

use super::design::{ContinuousTerm, Family, InputTable, ModelSpec, Transform};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableConfig {
    pub family: Family,
    pub outcome: String,
    pub data: DataConfig,
    #[serde(rename = "column")]
    pub columns: Vec<ColumnConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub kind: DataKind,
    pub dyads: Option<PathBuf>,
    pub attributes: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataKind {
    Dyad,
    Region,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnConfig {
    pub name: String,
    #[serde(default)]
    pub log: Vec<String>,
    #[serde(default)]
    pub linear: Vec<String>,
    #[serde(default)]
    pub deciles: Vec<String>,
    #[serde(default)]
    pub factors: Vec<String>,
    #[serde(default)]
    pub cluster: Vec<String>,
}

impl TableConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: TableConfig =
            toml::from_str(text).map_err(|e| Error::Parse(format!("model config: {e}")))?;
        if cfg.columns.is_empty() {
            return Err(Error::Parse("model config: no [[column]] blocks".to_string()));
        }
        if cfg.data.kind == DataKind::Dyad && cfg.data.dyads.is_none() {
            return Err(Error::Parse(
                "model config: dyad data needs a data.dyads path".to_string(),
            ));
        }
        if cfg.data.kind == DataKind::Region && cfg.data.attributes.is_none() {
            return Err(Error::Parse(
                "model config: region data needs a data.attributes path".to_string(),
            ));
        }
        for col in &cfg.columns {
            col.model_spec(cfg.family, &cfg.outcome)?;
        }
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Loads the observation table, resolving relative data paths against
    /// `base_dir`.
    pub fn load_input(&self, base_dir: &Path) -> Result<InputTable> {
        let resolve = |p: &PathBuf| {
            if p.is_absolute() {
                p.clone()
            } else {
                base_dir.join(p)
            }
        };
        match self.data.kind {
            DataKind::Dyad => {
                let dyads = DyadTable::read_csv_path(resolve(self.data.dyads.as_ref().unwrap()))?;
                let attrs = self
                    .data
                    .attributes
                    .as_ref()
                    .map(|p| AttributeTable::read_csv_path(resolve(p)))
                    .transpose()?;
                Ok(InputTable::from_dyads(&dyads, attrs.as_ref()))
            }
            DataKind::Region => {
                let attrs =
                    AttributeTable::read_csv_path(resolve(self.data.attributes.as_ref().unwrap()))?;
                Ok(InputTable::from_regions(&attrs))
            }
        }
    }

    pub fn model_specs(&self) -> Result<Vec<(String, ModelSpec)>> {
        self.columns
            .iter()
            .map(|c| Ok((c.name.clone(), c.model_spec(self.family, &self.outcome)?)))
            .collect()
    }
}

impl ColumnConfig {
    fn model_spec(&self, family: Family, outcome: &str) -> Result<ModelSpec> {
        let mut continuous = Vec::new();
        for m in &self.log {
            continuous.push(ContinuousTerm {
                measure: m.clone(),
                transform: Transform::Log,
            });
        }
        for m in &self.linear {
            continuous.push(ContinuousTerm {
                measure: m.clone(),
                transform: Transform::Identity,
            });
        }
        let factors = self
            .factors
            .iter()
            .map(|s| FactorSpec::parse(s))
            .collect::<Result<Vec<_>>>()?;
        let cluster_dims = self
            .cluster
            .iter()
            .map(|s| FactorSpec::parse(s))
            .collect::<Result<Vec<_>>>()?;
        let spec = ModelSpec {
            outcome: outcome.to_string(),
            continuous,
            decile_terms: self.deciles.clone(),
            factors,
            cluster_dims,
            family,
        };
        spec.validate()?;
        Ok(spec)
    }
}
