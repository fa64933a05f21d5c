//! Region and country identifiers.
//!
//! Region codes follow the NUTS convention: a 2-letter country prefix
//! followed by up to three alphanumeric characters ("FR10", "HR04").
//! A bare 2-letter code is a country-level identifier.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A validated region code. Ordering is lexicographic on the code, which
/// gives the deterministic total order used for tie-breaking everywhere.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct RegionId(String);

/// A 2-letter country code (the prefix of a region code).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CountryId(String);

impl RegionId {
    pub fn new(code: impl AsRef<str>) -> Result<Self> {
        let code = code.as_ref();
        if code.len() < 2 || code.len() > 5 {
            return Err(Error::validation(format!(
                "region code {code:?} must be 2-5 characters"
            )));
        }
        if !code.chars().all(|c| c.is_ascii_uppercase() || c.is_ascii_digit()) {
            return Err(Error::validation(format!(
                "region code {code:?} must be uppercase alphanumeric"
            )));
        }
        if !code.chars().take(2).all(|c| c.is_ascii_uppercase()) {
            return Err(Error::validation(format!(
                "region code {code:?} must start with a 2-letter country prefix"
            )));
        }
        Ok(RegionId(code.to_string()))
    }

    pub fn code(&self) -> &str {
        &self.0
    }

    /// The country prefix of this region.
    pub fn country(&self) -> CountryId {
        CountryId(self.0[..2].to_string())
    }

    /// True for bare 2-letter country-level codes.
    pub fn is_country_level(&self) -> bool {
        self.0.len() == 2
    }
}

/// Extracts the 2-letter country prefix of a region code.
pub fn country_of(r: &RegionId) -> CountryId {
    r.country()
}

impl CountryId {
    pub fn new(code: impl AsRef<str>) -> Result<Self> {
        let code = code.as_ref();
        if code.len() != 2 || !code.chars().all(|c| c.is_ascii_uppercase()) {
            return Err(Error::validation(format!(
                "country code {code:?} must be 2 uppercase letters"
            )));
        }
        Ok(CountryId(code.to_string()))
    }

    pub fn code(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for RegionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for CountryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl TryFrom<String> for RegionId {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        RegionId::new(s)
    }
}

impl From<RegionId> for String {
    fn from(r: RegionId) -> String {
        r.0
    }
}

impl std::str::FromStr for RegionId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        RegionId::new(s)
    }
}
