//! Loading, cleaning, and harmonizing external dyadic data.
//!
//! The rail cleaning rules compose in a fixed order: reporter availability
//! is determined per (reporter, year, scope) group first; within available
//! groups missing and absent pairs become zeros; dual international reports
//! are reconciled by arithmetic mean afterwards.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::region::{CountryId, RegionId};
use crate::table::{AttributeTable, DyadTable, SciMatrix};

pub const RAIL_YEARS: [i32; 3] = [2005, 2010, 2015];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Scope {
    Domestic,
    International,
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scope::Domestic => f.write_str("domestic"),
            Scope::International => f.write_str("international"),
        }
    }
}

/// One raw passenger-rail report row. `passengers = None` is the
/// "non-available" marker whose meaning depends on group availability.
#[derive(Debug, Clone, PartialEq)]
pub struct RailReport {
    pub reporter: CountryId,
    pub year: i32,
    pub i: RegionId,
    pub j: RegionId,
    pub passengers: Option<f64>,
}

impl RailReport {
    pub fn new(
        reporter: CountryId,
        year: i32,
        i: RegionId,
        j: RegionId,
        passengers: Option<f64>,
    ) -> Result<Self> {
        if !RAIL_YEARS.contains(&year) {
            return Err(Error::validation(format!(
                "rail report year must be one of {RAIL_YEARS:?}, got {year}"
            )));
        }
        if let Some(p) = passengers {
            if !(p >= 0.0) || !p.is_finite() {
                return Err(Error::validation(format!(
                    "negative or non-finite passenger count {p} for ({i},{j}) {year}"
                )));
            }
        }
        Ok(RailReport {
            reporter,
            year,
            i,
            j,
            passengers,
        })
    }

    pub fn scope(&self) -> Scope {
        if self.i.country() == self.j.country() {
            Scope::Domestic
        } else {
            Scope::International
        }
    }

    fn validate_reporter(&self) -> Result<()> {
        if self.reporter != self.i.country() && self.reporter != self.j.country() {
            return Err(Error::validation(format!(
                "reporter {} is not an endpoint country of pair ({},{})",
                self.reporter, self.i, self.j
            )));
        }
        Ok(())
    }
}

/// Reads the raw rail CSV `reporter,year,i,j,passengers` (empty = missing).
pub fn read_rail_csv<R: Read>(r: R) -> Result<Vec<RailReport>> {
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr.headers()?.clone();
    let expect = ["reporter", "year", "i", "j", "passengers"];
    if headers.iter().collect::<Vec<_>>() != expect {
        return Err(Error::Parse(format!(
            "rail CSV header must be {}, got {:?}",
            expect.join(","),
            headers
        )));
    }
    let mut reports = Vec::new();
    for (lineno, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = lineno + 2;
        let reporter =
            CountryId::new(&rec[0]).map_err(|e| Error::Parse(format!("row {row}: {e}")))?;
        let year: i32 = rec[1]
            .parse()
            .map_err(|_| Error::Parse(format!("row {row}: bad year {:?}", &rec[1])))?;
        let i = RegionId::new(&rec[2]).map_err(|e| Error::Parse(format!("row {row}: {e}")))?;
        let j = RegionId::new(&rec[3]).map_err(|e| Error::Parse(format!("row {row}: {e}")))?;
        let passengers = if rec[4].is_empty() {
            None
        } else {
            Some(rec[4].parse::<f64>().map_err(|_| {
                Error::Parse(format!("row {row}: bad passenger count {:?}", &rec[4]))
            })?)
        };
        reports
            .push(RailReport::new(reporter, year, i, j, passengers).map_err(|e| match e {
                Error::Validation(msg) => Error::Validation(format!("row {row}: {msg}")),
                other => other,
            })?);
    }
    Ok(reports)
}

pub fn read_rail_csv_path(path: impl AsRef<Path>) -> Result<Vec<RailReport>> {
    read_rail_csv(std::fs::File::open(path)?)
}

/// Per (reporter, year, scope) data availability, derived from the raw
/// reports: available iff the group has at least one non-missing entry.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AvailabilityTable {
    entries: BTreeMap<(CountryId, i32, Scope), bool>,
}

impl AvailabilityTable {
    pub fn is_available(&self, reporter: &CountryId, year: i32, scope: Scope) -> bool {
        *self
            .entries
            .get(&(reporter.clone(), year, scope))
            .unwrap_or(&false)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(CountryId, i32, Scope), &bool)> {
        self.entries.iter()
    }

    /// CSV export: `reporter,year,scope,available`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["reporter", "year", "scope", "available"])?;
        for ((reporter, year, scope), avail) in &self.entries {
            wtr.write_record([
                reporter.code().to_string(),
                year.to_string(),
                scope.to_string(),
                if *avail { "1" } else { "0" }.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Groups reports by (reporter, year, scope); a group is available iff it
/// has at least one non-missing entry.
pub fn build_availability(reports: &[RailReport]) -> AvailabilityTable {
    let mut entries: BTreeMap<(CountryId, i32, Scope), bool> = BTreeMap::new();
    for r in reports {
        let key = (r.reporter.clone(), r.year, r.scope());
        let avail = entries.entry(key).or_insert(false);
        *avail = *avail || r.passengers.is_some();
    }
    AvailabilityTable { entries }
}

/// True for the unknown ("XX") and extraregio ("ZZ") indicators, either as
/// a bare code or a NUTS suffix.
fn is_unknown_or_extraregio(r: &RegionId) -> bool {
    let code = r.code();
    code == "XX" || code == "ZZ" || (code.len() >= 4 && (code.ends_with("XX") || code.ends_with("ZZ")))
}

/// Cleans the raw reports into one dyad measure per year (`y<year>`).
///
/// Rules, in order: drop XX/ZZ pairs; drop country-level rows except for
/// single-region countries (remapped to their region); within available
/// groups turn missing values and absent universe pairs into zeros; within
/// unavailable groups exclude the pairs; reconcile dual international
/// reports by arithmetic mean.
pub fn clean_rail(
    reports: &[RailReport],
    availability: &AvailabilityTable,
    universe: &BTreeSet<RegionId>,
) -> Result<DyadTable> {
    for r in reports {
        if let Some(p) = r.passengers {
            if !(p >= 0.0) {
                return Err(Error::validation(format!(
                    "negative passenger count {p} for ({},{}) {}",
                    r.i, r.j, r.year
                )));
            }
        }
        r.validate_reporter()?;
    }
    // single-NUTS2 countries: country-level rows remap to the unique region
    let mut per_country: BTreeMap<CountryId, Vec<RegionId>> = BTreeMap::new();
    for r in universe {
        per_country.entry(r.country()).or_default().push(r.clone());
    }
    let single_region: BTreeMap<CountryId, RegionId> = per_country
        .iter()
        .filter(|(_, v)| v.len() == 1)
        .map(|(c, v)| (c.clone(), v[0].clone()))
        .collect();
    let remap = |r: &RegionId| -> Option<RegionId> {
        if is_unknown_or_extraregio(r) {
            None
        } else if r.is_country_level() {
            single_region.get(&r.country()).cloned()
        } else {
            Some(r.clone())
        }
    };

    // per (reporter, year, scope) group: reported values with missing -> 0
    // inside available groups
    let mut groups: BTreeMap<(CountryId, i32, Scope), BTreeMap<(RegionId, RegionId), f64>> =
        BTreeMap::new();
    let mut years: BTreeSet<i32> = BTreeSet::new();
    for r in reports {
        years.insert(r.year);
        let (i, j) = match (remap(&r.i), remap(&r.j)) {
            (Some(i), Some(j)) => (i, j),
            _ => continue,
        };
        let key = (r.reporter.clone(), r.year, r.scope());
        if !availability.is_available(&r.reporter, r.year, r.scope()) {
            continue; // unavailable group: values stay missing, pairs excluded
        }
        let value = r.passengers.unwrap_or(0.0);
        let group = groups.entry(key).or_default();
        if group.insert((i.clone(), j.clone()), value).is_some() {
            return Err(Error::validation(format!(
                "duplicate report for pair ({i},{j}) from {} in {}",
                r.reporter, r.year
            )));
        }
    }

    // fill absent pairs of each available group's universe with zeros
    let countries: BTreeSet<CountryId> = universe.iter().map(|r| r.country()).collect();
    for year in &years {
        for c in &countries {
            if availability.is_available(c, *year, Scope::Domestic) {
                let group = groups
                    .entry((c.clone(), *year, Scope::Domestic))
                    .or_default();
                let own: Vec<&RegionId> =
                    universe.iter().filter(|r| &r.country() == c).collect();
                for &a in &own {
                    for &b in &own {
                        if a != b {
                            group.entry((a.clone(), b.clone())).or_insert(0.0);
                        }
                    }
                }
            }
            if availability.is_available(c, *year, Scope::International) {
                let group = groups
                    .entry((c.clone(), *year, Scope::International))
                    .or_default();
                for a in universe {
                    for b in universe {
                        let (ca, cb) = (a.country(), b.country());
                        if ca == cb {
                            continue;
                        }
                        if &ca == c || &cb == c {
                            group.entry((a.clone(), b.clone())).or_insert(0.0);
                        }
                    }
                }
            }
        }
    }

    // assemble: domestic from the home reporter, international reconciled
    // across the two endpoint reporters
    let mut out = DyadTable::with_universe(universe.iter().cloned());
    for year in &years {
        let measure = format!("y{year}");
        let mut values: BTreeMap<(RegionId, RegionId), (f64, u32)> = BTreeMap::new();
        for ((_, y, _), group) in groups.iter().filter(|((_, y, _), _)| y == year) {
            debug_assert_eq!(y, year);
            for ((i, j), v) in group {
                let e = values.entry((i.clone(), j.clone())).or_insert((0.0, 0));
                e.0 += v;
                e.1 += 1;
            }
        }
        for ((i, j), (sum, count)) in values {
            out.set(i, j, &measure, sum / count as f64)?;
        }
    }
    Ok(out)
}

/// Region-harmonization crosswalk: each old region maps to one or more new
/// regions with population shares summing to 1.
#[derive(Debug, Clone, Default)]
pub struct Crosswalk {
    mappings: BTreeMap<RegionId, Vec<(RegionId, f64)>>,
}

impl Crosswalk {
    pub fn new(entries: impl IntoIterator<Item = (RegionId, RegionId, f64)>) -> Result<Self> {
        let mut mappings: BTreeMap<RegionId, Vec<(RegionId, f64)>> = BTreeMap::new();
        for (old, new, share) in entries {
            if !(share > 0.0 && share <= 1.0) {
                return Err(Error::validation(format!(
                    "crosswalk share for {old}->{new} must lie in (0,1], got {share}"
                )));
            }
            mappings.entry(old).or_default().push((new, share));
        }
        for (old, targets) in &mappings {
            let total: f64 = targets.iter().map(|(_, s)| s).sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::validation(format!(
                    "crosswalk shares for {old} sum to {total}, expected 1"
                )));
            }
        }
        Ok(Crosswalk { mappings })
    }

    /// Identity crosswalk over a region set.
    pub fn identity(regions: impl IntoIterator<Item = RegionId>) -> Self {
        Crosswalk {
            mappings: regions
                .into_iter()
                .map(|r| (r.clone(), vec![(r, 1.0)]))
                .collect(),
        }
    }

    pub fn targets(&self, old: &RegionId) -> Option<&[(RegionId, f64)]> {
        self.mappings.get(old).map(|v| v.as_slice())
    }

    /// Reads the crosswalk CSV `old,new,population_share`.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let headers = rdr.headers()?.clone();
        let expect = ["old", "new", "population_share"];
        if headers.iter().collect::<Vec<_>>() != expect {
            return Err(Error::Parse(format!(
                "crosswalk CSV header must be {}, got {:?}",
                expect.join(","),
                headers
            )));
        }
        let mut entries = Vec::new();
        for (lineno, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row = lineno + 2;
            let old = RegionId::new(&rec[0]).map_err(|e| Error::Parse(format!("row {row}: {e}")))?;
            let new = RegionId::new(&rec[1]).map_err(|e| Error::Parse(format!("row {row}: {e}")))?;
            let share: f64 = rec[2]
                .parse()
                .map_err(|_| Error::Parse(format!("row {row}: bad share {:?}", &rec[2])))?;
            entries.push((old, new, share));
        }
        Crosswalk::new(entries)
    }

    pub fn read_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

/// Re-expresses a dyad table on the crosswalk's new regions: each old row
/// (a,b,v) contributes v·share(a→a')·share(b→b') to (a',b'). Total flow is
/// conserved per measure.
pub fn apply_crosswalk(flows: &DyadTable, cw: &Crosswalk) -> Result<DyadTable> {
    let mut unmapped: BTreeSet<&RegionId> = BTreeSet::new();
    for (i, j) in flows.pairs() {
        if cw.targets(i).is_none() {
            unmapped.insert(i);
        }
        if cw.targets(j).is_none() {
            unmapped.insert(j);
        }
    }
    if !unmapped.is_empty() {
        let codes: Vec<&str> = unmapped.iter().map(|r| r.code()).collect();
        return Err(Error::validation(format!(
            "regions not covered by the crosswalk: {}",
            codes.join(", ")
        )));
    }
    let mut sums: BTreeMap<(RegionId, RegionId, String), f64> = BTreeMap::new();
    let mut missing_only: BTreeSet<(RegionId, RegionId, String)> = BTreeSet::new();
    for (i, j, vals) in flows.iter() {
        for (ti, si) in cw.targets(i).unwrap() {
            for (tj, sj) in cw.targets(j).unwrap() {
                for (m, v) in vals {
                    let key = (ti.clone(), tj.clone(), m.clone());
                    if v.is_nan() {
                        missing_only.insert(key);
                    } else {
                        *sums.entry(key).or_insert(0.0) += v * si * sj;
                    }
                }
            }
        }
    }
    let mut out = DyadTable::new();
    for r in flows.universe() {
        if let Some(targets) = cw.targets(r) {
            for (t, _) in targets {
                out.add_to_universe(t.clone());
            }
        }
    }
    for ((i, j, m), v) in &sums {
        out.set(i.clone(), j.clone(), m, *v)?;
    }
    for (i, j, m) in &missing_only {
        if !sums.contains_key(&(i.clone(), j.clone(), m.clone())) {
            out.set(i.clone(), j.clone(), m, f64::NAN)?;
        }
    }
    Ok(out)
}

/// Collapses a per-year panel (measures `y<year>`) to the value from the
/// latest non-missing year per pair, as measure `most_recent`.
pub fn most_recent_year(panel: &DyadTable) -> Result<DyadTable> {
    let mut years: Vec<(i32, String)> = Vec::new();
    for m in panel.measure_names() {
        let year: i32 = m
            .strip_prefix('y')
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| {
                Error::validation(format!("panel measure {m:?} is not of the form y<year>"))
            })?;
        years.push((year, m));
    }
    years.sort();
    let mut out = DyadTable::with_universe(panel.universe().iter().cloned());
    for (i, j, _) in panel.iter() {
        // latest year wins
        let latest = years
            .iter()
            .rev()
            .find_map(|(_, m)| panel.get(i, j, m));
        if let Some(v) = latest {
            out.set(i.clone(), j.clone(), "most_recent", v)?;
        }
    }
    Ok(out)
}

/// Share (in percent) of each region's connection mass that crosses a
/// country border. Connection mass between i and j is sci[i][j]·w_j after
/// cancelling the common w_i factor; the own-region term sci[i][i]·w_i
/// enters the denominator.
pub fn foreign_share(
    sci: &SciMatrix,
    weights: &AttributeTable,
    weight_attr: &str,
) -> Result<BTreeMap<RegionId, f64>> {
    let regions = sci.regions();
    let mut w = Vec::with_capacity(regions.len());
    for r in regions {
        let v = weights.get(r, weight_attr).ok_or_else(|| {
            Error::validation(format!("missing weight {weight_attr:?} for region {r}"))
        })?;
        if !(v > 0.0) {
            return Err(Error::validation(format!(
                "weight {weight_attr:?} must be positive for region {r}, got {v}"
            )));
        }
        w.push(v);
    }
    let mut out = BTreeMap::new();
    for (a, r) in regions.iter().enumerate() {
        let country = r.country();
        let mut foreign = 0.0;
        let mut total = sci.value(a, a) * w[a];
        for (b, s) in regions.iter().enumerate() {
            if b == a {
                continue;
            }
            let mass = sci.value(a, b) * w[b];
            total += mass;
            if s.country() != country {
                foreign += mass;
            }
        }
        if !(total > 0.0) {
            return Err(Error::validation(format!(
                "region {r} has zero total connection mass"
            )));
        }
        out.insert(r.clone(), 100.0 * foreign / total);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rid(s: &str) -> RegionId {
        RegionId::new(s).unwrap()
    }

    fn cid(s: &str) -> CountryId {
        CountryId::new(s).unwrap()
    }

    fn report(rep: &str, year: i32, i: &str, j: &str, p: Option<f64>) -> RailReport {
        RailReport::new(cid(rep), year, rid(i), rid(j), p).unwrap()
    }

    fn universe(codes: &[&str]) -> BTreeSet<RegionId> {
        codes.iter().map(|c| rid(c)).collect()
    }

    #[test]
    fn availability_follows_non_missing_entries() {
        let reports = vec![
            report("DE", 2005, "DE11", "PL21", Some(10.0)),
            report("FR", 2005, "FR10", "FR21", None),
            report("FR", 2010, "FR10", "DE11", None),
        ];
        let a = build_availability(&reports);
        assert!(a.is_available(&cid("DE"), 2005, Scope::International));
        assert!(!a.is_available(&cid("FR"), 2005, Scope::Domestic));
        assert!(!a.is_available(&cid("FR"), 2010, Scope::International));
        assert!(!a.is_available(&cid("XX"), 2010, Scope::Domestic));
    }

    #[test]
    fn dual_reports_average() {
        let reports = vec![
            report("DE", 2015, "DE11", "PL21", Some(100.0)),
            report("PL", 2015, "DE11", "PL21", Some(200.0)),
        ];
        let a = build_availability(&reports);
        let t = clean_rail(&reports, &a, &universe(&["DE11", "PL21"])).unwrap();
        assert_eq!(t.get(&rid("DE11"), &rid("PL21"), "y2015"), Some(150.0));
    }

    #[test]
    fn available_group_zero_fills() {
        // DE domestic available in 2010: the absent (DE12,DE11) pair becomes 0,
        // and the missing (DE11,DE12) value becomes 0 too.
        let reports = vec![
            report("DE", 2010, "DE11", "DE12", None),
            report("DE", 2010, "DE12", "DE13", Some(5.0)),
        ];
        let a = build_availability(&reports);
        let t = clean_rail(&reports, &a, &universe(&["DE11", "DE12", "DE13"])).unwrap();
        assert_eq!(t.get(&rid("DE11"), &rid("DE12"), "y2010"), Some(0.0));
        assert_eq!(t.get(&rid("DE12"), &rid("DE11"), "y2010"), Some(0.0));
        assert_eq!(t.get(&rid("DE12"), &rid("DE13"), "y2010"), Some(5.0));
    }

    #[test]
    fn unavailable_group_excluded() {
        // FR reports only missing values: FR pairs are absent from the output.
        let reports = vec![
            report("FR", 2005, "FR10", "FR21", None),
            report("DE", 2005, "DE11", "DE12", Some(3.0)),
        ];
        let a = build_availability(&reports);
        let t = clean_rail(&reports, &a, &universe(&["FR10", "FR21", "DE11", "DE12"])).unwrap();
        assert!(!t.has_row(&rid("FR10"), &rid("FR21")));
        assert_eq!(t.get(&rid("DE11"), &rid("DE12"), "y2005"), Some(3.0));
    }

    #[test]
    fn one_sided_international_report_kept() {
        // DE intl unavailable in 2015, PL intl available: PL's value stands alone.
        let reports = vec![
            report("DE", 2015, "DE11", "DE12", Some(1.0)),
            report("PL", 2015, "DE11", "PL21", Some(40.0)),
        ];
        let a = build_availability(&reports);
        let t = clean_rail(&reports, &a, &universe(&["DE11", "DE12", "PL21"])).unwrap();
        assert_eq!(t.get(&rid("DE11"), &rid("PL21"), "y2015"), Some(40.0));
        // zero-fill covers PL's whole international group
        assert_eq!(t.get(&rid("PL21"), &rid("DE12"), "y2015"), Some(0.0));
    }

    #[test]
    fn xx_zz_and_country_rows_excluded() {
        let reports = vec![
            report("DE", 2015, "DE11", "DEXX", Some(9.0)),
            report("DE", 2015, "DE11", "DEZZ", Some(9.0)),
            report("DE", 2015, "DE", "DE11", Some(9.0)),
            report("DE", 2015, "DE11", "DE12", Some(2.0)),
            // LU is a single-region country: the country-level row is kept
            report("LU", 2015, "LU", "LU", Some(7.0)),
        ];
        let a = build_availability(&reports);
        let t = clean_rail(&reports, &a, &universe(&["DE11", "DE12", "LU00"])).unwrap();
        for (i, j) in t.pairs() {
            assert!(!i.code().contains("XX") && !j.code().contains("ZZ"));
            assert!(i.code() != "DE" && j.code() != "DE");
        }
        assert_eq!(t.get(&rid("DE11"), &rid("DE12"), "y2015"), Some(2.0));
        assert_eq!(t.get(&rid("LU00"), &rid("LU00"), "y2015"), Some(7.0));
    }

    #[test]
    fn reporter_must_be_endpoint() {
        let reports = vec![report("FR", 2015, "DE11", "PL21", Some(1.0))];
        let a = build_availability(&reports);
        assert!(clean_rail(&reports, &a, &universe(&["DE11", "PL21"])).is_err());
    }

    #[test]
    fn negative_passengers_rejected() {
        assert!(RailReport::new(cid("DE"), 2015, rid("DE11"), rid("DE12"), Some(-1.0)).is_err());
    }

    #[test]
    fn crosswalk_split_conserves_flow() {
        let mut flows = DyadTable::new();
        flows.set(rid("AA01"), rid("BB01"), "y2015", 1000.0).unwrap();
        let cw = Crosswalk::new(vec![
            (rid("AA01"), rid("AA11"), 0.6),
            (rid("AA01"), rid("AA12"), 0.4),
            (rid("BB01"), rid("BB01"), 1.0),
        ])
        .unwrap();
        let out = apply_crosswalk(&flows, &cw).unwrap();
        assert_eq!(out.get(&rid("AA11"), &rid("BB01"), "y2015"), Some(600.0));
        assert_eq!(out.get(&rid("AA12"), &rid("BB01"), "y2015"), Some(400.0));
    }

    #[test]
    fn crosswalk_double_split_sums_to_input() {
        let mut flows = DyadTable::new();
        flows.set(rid("AA01"), rid("BB01"), "y2015", 1000.0).unwrap();
        let cw = Crosswalk::new(vec![
            (rid("AA01"), rid("AA11"), 0.7),
            (rid("AA01"), rid("AA12"), 0.3),
            (rid("BB01"), rid("BB11"), 0.55),
            (rid("BB01"), rid("BB12"), 0.45),
        ])
        .unwrap();
        let out = apply_crosswalk(&flows, &cw).unwrap();
        let total: f64 = out
            .iter()
            .map(|(_, _, vals)| vals.get("y2015").copied().unwrap_or(0.0))
            .sum();
        assert_eq!(out.n_rows(), 4);
        assert!((total - 1000.0).abs() / 1000.0 <= 1e-9);
    }

    #[test]
    fn identity_crosswalk_is_noop() {
        let mut flows = DyadTable::new();
        flows.set(rid("AA01"), rid("BB01"), "y2015", 12.5).unwrap();
        flows.set(rid("BB01"), rid("AA01"), "y2015", 3.25).unwrap();
        let cw = Crosswalk::identity(flows.universe().iter().cloned());
        let out = apply_crosswalk(&flows, &cw).unwrap();
        assert_eq!(out, flows);
    }

    #[test]
    fn crosswalk_unmapped_region_named() {
        let mut flows = DyadTable::new();
        flows.set(rid("AA01"), rid("BB01"), "y2015", 1.0).unwrap();
        let cw = Crosswalk::new(vec![(rid("AA01"), rid("AA01"), 1.0)]).unwrap();
        let err = apply_crosswalk(&flows, &cw).unwrap_err();
        assert!(err.to_string().contains("BB01"));
    }

    #[test]
    fn crosswalk_share_validation() {
        assert!(Crosswalk::new(vec![(rid("AA01"), rid("AA11"), 0.5)]).is_err());
        assert!(Crosswalk::new(vec![(rid("AA01"), rid("AA11"), 0.0)]).is_err());
        assert!(Crosswalk::new(vec![
            (rid("AA01"), rid("AA11"), 0.5),
            (rid("AA01"), rid("AA12"), 0.5),
        ])
        .is_ok());
    }

    #[test]
    fn most_recent_year_picks_latest() {
        let mut panel = DyadTable::new();
        panel.set(rid("AA01"), rid("BB01"), "y2005", 10.0).unwrap();
        panel.set(rid("AA01"), rid("BB01"), "y2015", 30.0).unwrap();
        panel.set(rid("AA01"), rid("CC01"), "y2010", 20.0).unwrap();
        panel.set(rid("BB01"), rid("CC01"), "y2005", f64::NAN).unwrap();
        let out = most_recent_year(&panel).unwrap();
        assert_eq!(out.get(&rid("AA01"), &rid("BB01"), "most_recent"), Some(30.0));
        assert_eq!(out.get(&rid("AA01"), &rid("CC01"), "most_recent"), Some(20.0));
        assert!(!out.has_row(&rid("BB01"), &rid("CC01")));
    }

    #[test]
    fn most_recent_restricted_to_one_year_is_identity() {
        let mut panel = DyadTable::new();
        panel.set(rid("AA01"), rid("BB01"), "y2010", 4.0).unwrap();
        panel.set(rid("CC01"), rid("BB01"), "y2010", 6.0).unwrap();
        let out = most_recent_year(&panel).unwrap();
        assert_eq!(out.get(&rid("AA01"), &rid("BB01"), "most_recent"), Some(4.0));
        assert_eq!(out.get(&rid("CC01"), &rid("BB01"), "most_recent"), Some(6.0));
        assert_eq!(out.n_rows(), panel.n_rows());
    }

    fn sci_fixture() -> SciMatrix {
        SciMatrix::from_entries(vec![
            (rid("AA01"), rid("AA02"), 5.0),
            (rid("AA01"), rid("BB01"), 2.0),
            (rid("AA01"), rid("BB02"), 1.0),
            (rid("AA02"), rid("BB01"), 0.5),
            (rid("AA02"), rid("BB02"), 1.5),
            (rid("BB01"), rid("BB02"), 4.0),
        ])
        .unwrap()
    }

    fn weights_fixture(w: &[(&str, f64)]) -> AttributeTable {
        let mut t = AttributeTable::new();
        for (r, v) in w {
            t.set(rid(r), "users", *v).unwrap();
        }
        t
    }

    #[test]
    fn foreign_share_matches_direct_summation() {
        let sci = sci_fixture();
        let w = weights_fixture(&[("AA01", 10.0), ("AA02", 20.0), ("BB01", 5.0), ("BB02", 40.0)]);
        let shares = foreign_share(&sci, &w, "users").unwrap();
        // direct summation oracle for AA01
        let foreign = 2.0 * 5.0 + 1.0 * 40.0;
        let total = 5.0 * 20.0 + 2.0 * 5.0 + 1.0 * 40.0;
        let expected = 100.0 * foreign / total;
        assert!((shares[&rid("AA01")] - expected).abs() < 1e-12);
    }

    #[test]
    fn foreign_share_single_country_is_zero() {
        let sci = SciMatrix::from_entries(vec![
            (rid("AA01"), rid("AA02"), 3.0),
            (rid("AA01"), rid("AA03"), 1.0),
            (rid("AA02"), rid("AA03"), 2.0),
        ])
        .unwrap();
        let w = weights_fixture(&[("AA01", 1.0), ("AA02", 2.0), ("AA03", 3.0)]);
        let shares = foreign_share(&sci, &w, "users").unwrap();
        assert!(shares.values().all(|&s| s == 0.0));
    }

    #[test]
    fn foreign_share_symmetric_two_regions() {
        let sci = SciMatrix::from_entries(vec![(rid("AA01"), rid("BB01"), 2.0)]).unwrap();
        let w = weights_fixture(&[("AA01", 7.0), ("BB01", 7.0)]);
        let shares = foreign_share(&sci, &w, "users").unwrap();
        assert_eq!(shares[&rid("AA01")], shares[&rid("BB01")]);
    }

    #[test]
    fn foreign_share_scale_invariant() {
        let sci = sci_fixture();
        let w = weights_fixture(&[("AA01", 10.0), ("AA02", 20.0), ("BB01", 5.0), ("BB02", 40.0)]);
        let base = foreign_share(&sci, &w, "users").unwrap();
        let scaled_sci = sci.scaled(17.0).unwrap();
        let mut scaled_w = AttributeTable::new();
        for r in ["AA01", "AA02", "BB01", "BB02"] {
            scaled_w
                .set(rid(r), "users", w.get(&rid(r), "users").unwrap() * 3.5)
                .unwrap();
        }
        let scaled = foreign_share(&scaled_sci, &scaled_w, "users").unwrap();
        for (r, v) in &base {
            assert!((v - scaled[r]).abs() < 1e-9);
        }
    }
}
