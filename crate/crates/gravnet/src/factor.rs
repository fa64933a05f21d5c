//! Categorical factor specifications for fixed effects and clustering.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::region::RegionId;

/// Identifies one observation row: a region pair (dyadic tables) or a
/// single region (regional tables).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum RowKey {
    Dyad(RegionId, RegionId),
    Region(RegionId),
}

impl fmt::Display for RowKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RowKey::Dyad(i, j) => write!(f, "({i},{j})"),
            RowKey::Region(r) => write!(f, "{r}"),
        }
    }
}

/// Rule assigning each row a categorical level.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum LevelRule {
    /// Origin region of a dyad.
    OriginRegion,
    /// Destination region of a dyad.
    DestinationRegion,
    /// Ordered (origin-country, destination-country) pair of a dyad.
    CountryPair,
    /// Country of the origin region of a dyad.
    OriginCountry,
    /// Country of the region (regional tables).
    Country,
    /// A single shared level; absorbs an intercept.
    Intercept,
    /// Levels taken from a named data column (distinct values).
    Custom(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactorSpec {
    pub name: String,
    pub rule: LevelRule,
}

impl FactorSpec {
    pub fn new(name: impl Into<String>, rule: LevelRule) -> Self {
        FactorSpec {
            name: name.into(),
            rule,
        }
    }

    /// Parses the CLI/config shorthand for a factor.
    pub fn parse(s: &str) -> Result<Self> {
        let rule = match s {
            "origin" => LevelRule::OriginRegion,
            "destination" => LevelRule::DestinationRegion,
            "country_pair" => LevelRule::CountryPair,
            "origin_country" => LevelRule::OriginCountry,
            "country" => LevelRule::Country,
            "intercept" => LevelRule::Intercept,
            other => match other.strip_prefix("col:") {
                Some(col) if !col.is_empty() => LevelRule::Custom(col.to_string()),
                _ => {
                    return Err(Error::Parse(format!(
                        "unknown factor {s:?}; expected origin, destination, country_pair, \
                         origin_country, country, intercept, or col:<name>"
                    )))
                }
            },
        };
        Ok(FactorSpec::new(s, rule))
    }

    /// The level of `key` under this rule. `custom` resolves a named column
    /// value for rules that need one.
    pub fn level_of(&self, key: &RowKey, custom: Option<&dyn Fn(&str) -> Option<String>>) -> Result<String> {
        match (&self.rule, key) {
            (LevelRule::OriginRegion, RowKey::Dyad(i, _)) => Ok(i.code().to_string()),
            (LevelRule::DestinationRegion, RowKey::Dyad(_, j)) => Ok(j.code().to_string()),
            (LevelRule::CountryPair, RowKey::Dyad(i, j)) => {
                Ok(format!("{}>{}", i.country(), j.country()))
            }
            (LevelRule::OriginCountry, RowKey::Dyad(i, _)) => Ok(i.country().code().to_string()),
            (LevelRule::Country, RowKey::Region(r)) => Ok(r.country().code().to_string()),
            (LevelRule::Intercept, _) => Ok("_".to_string()),
            (LevelRule::Custom(col), _) => custom
                .and_then(|f| f(col))
                .ok_or_else(|| {
                    Error::validation(format!(
                        "factor {}: no value of column {col:?} for row {key}",
                        self.name
                    ))
                }),
            (rule, key) => Err(Error::validation(format!(
                "factor {}: rule {rule:?} does not apply to row {key}",
                self.name
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rid(s: &str) -> RegionId {
        RegionId::new(s).unwrap()
    }

    #[test]
    fn dyad_levels() {
        let key = RowKey::Dyad(rid("FR10"), rid("DE21"));
        let origin = FactorSpec::parse("origin").unwrap();
        let pair = FactorSpec::parse("country_pair").unwrap();
        assert_eq!(origin.level_of(&key, None).unwrap(), "FR10");
        assert_eq!(pair.level_of(&key, None).unwrap(), "FR>DE");
    }

    #[test]
    fn rule_table_mismatch_is_an_error() {
        let key = RowKey::Region(rid("FR10"));
        let origin = FactorSpec::parse("origin").unwrap();
        assert!(origin.level_of(&key, None).is_err());
        let country = FactorSpec::parse("country").unwrap();
        assert_eq!(country.level_of(&key, None).unwrap(), "FR");
    }

    #[test]
    fn parse_rejects_unknown() {
        assert!(FactorSpec::parse("nope").is_err());
        assert!(FactorSpec::parse("col:").is_err());
        assert!(FactorSpec::parse("col:language").is_ok());
    }
}
