//! Hierarchical agglomerative average-linkage clustering of regions under
//! the reciprocal-connectedness distance.
//!
//! Cluster distances are size-weighted averages of all cross pairs (UPGMA),
//! maintained incrementally with the Lance-Williams update. Merge order is
//! fully deterministic: ties on the minimum distance are broken by the
//! lexicographically smallest (canonical-region) pair.

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::region::RegionId;
use crate::table::SciMatrix;

/// Symmetric pairwise dissimilarities over an ordered region list.
#[derive(Debug, Clone)]
pub struct DistanceMatrix {
    pub regions: Vec<RegionId>,
    pub d: DMatrix<f64>,
}

impl DistanceMatrix {
    pub fn new(regions: Vec<RegionId>, d: DMatrix<f64>) -> Result<Self> {
        let n = regions.len();
        if d.nrows() != n || d.ncols() != n {
            return Err(Error::validation("distance matrix shape mismatch"));
        }
        for i in 0..n {
            if d[(i, i)] != 0.0 {
                return Err(Error::validation(format!(
                    "nonzero self-distance for {}",
                    regions[i]
                )));
            }
            for j in (i + 1)..n {
                if d[(i, j)] != d[(j, i)] {
                    return Err(Error::validation(format!(
                        "asymmetric distance for ({},{})",
                        regions[i], regions[j]
                    )));
                }
                if !(d[(i, j)] > 0.0) || !d[(i, j)].is_finite() {
                    return Err(Error::validation(format!(
                        "non-positive distance for ({},{})",
                        regions[i], regions[j]
                    )));
                }
            }
        }
        Ok(DistanceMatrix { regions, d })
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }
}

/// d[i][j] = 1 / sci[i][j] off the diagonal, 0 on it.
pub fn build_distance(sci: &SciMatrix) -> Result<DistanceMatrix> {
    let n = sci.len();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = sci.value(i, j);
            if !(v > 0.0) {
                return Err(Error::validation(format!(
                    "connectedness must be strictly positive for ({},{}), got {v}",
                    sci.regions()[i],
                    sci.regions()[j]
                )));
            }
            d[(i, j)] = 1.0 / v;
            d[(j, i)] = 1.0 / v;
        }
    }
    DistanceMatrix::new(sci.regions().to_vec(), d)
}

/// Relative tolerance for treating two candidate merge distances as tied.
/// Incremental averaging leaves ulp-level noise on mathematically equal
/// values; exact comparison would make the tie-break order depend on it.
pub const MERGE_TIE_TOL: f64 = 1e-12;

/// One agglomerative merge. Leaf ids are 0..N-1 in region order; merge k
/// creates id N+k. `left` always holds the cluster with the smaller
/// canonical region.
#[derive(Debug, Clone, PartialEq)]
pub struct MergeStep {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub new_id: usize,
}

/// The ordered record of all N-1 merges.
#[derive(Debug, Clone)]
pub struct MergeTree {
    pub regions: Vec<RegionId>,
    pub steps: Vec<MergeStep>,
    /// Steps whose height is below the preceding step's height. Average
    /// linkage on arbitrary dissimilarities can invert; recorded, not
    /// rejected.
    pub inversions: Vec<usize>,
}

impl MergeTree {
    pub fn n_regions(&self) -> usize {
        self.regions.len()
    }

    /// CSV export: `step,left,right,height,new_id`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["step", "left", "right", "height", "new_id"])?;
        for (k, s) in self.steps.iter().enumerate() {
            wtr.write_record([
                k.to_string(),
                s.left.to_string(),
                s.right.to_string(),
                format!("{}", s.height),
                s.new_id.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// CSV export of the leaf id <-> region mapping: `leaf_id,region`.
    pub fn write_leaves_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["leaf_id", "region"])?;
        for (k, r) in self.regions.iter().enumerate() {
            wtr.write_record([k.to_string(), r.code().to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// A k-community cut of a merge tree. Labels 1..=k are canonical: the
/// community containing the lexicographically smallest region gets 1, and
/// so on by smallest member.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    pub k: usize,
    pub labels: BTreeMap<RegionId, usize>,
}

impl ClusterAssignment {
    /// Community memberships as sorted sets of regions, label order.
    pub fn communities(&self) -> Vec<Vec<RegionId>> {
        let mut out = vec![Vec::new(); self.k];
        for (r, &label) in &self.labels {
            out[label - 1].push(r.clone());
        }
        out
    }

    /// CSV export: `region,community`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["region", "community"])?;
        for (r, label) in &self.labels {
            wtr.write_record([r.code().to_string(), label.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

struct Active {
    size: usize,
    /// Lexicographically smallest member region; the tie-break handle.
    canon: usize,
}

/// Runs size-weighted average-linkage agglomeration via the Lance-Williams
/// update D(A∪B, C) = (|A|·D(A,C) + |B|·D(B,C)) / (|A|+|B|).
pub fn agglomerate(dm: &DistanceMatrix) -> Result<MergeTree> {
    let n = dm.len();
    if n < 2 {
        return Err(Error::validation(format!(
            "agglomerate: need at least 2 regions, got {n}"
        )));
    }
    let total = 2 * n - 1;
    // dist[(a,b)] for active cluster ids a < b
    let mut dist = DMatrix::zeros(total, total);
    for i in 0..n {
        for j in 0..n {
            dist[(i, j)] = dm.d[(i, j)];
        }
    }
    let mut clusters: Vec<Option<Active>> = (0..n)
        .map(|i| Some(Active { size: 1, canon: i }))
        .collect();
    clusters.resize_with(total, || None);
    let mut active: Vec<usize> = (0..n).collect();
    let mut steps = Vec::with_capacity(n - 1);
    let mut inversions = Vec::new();

    for step in 0..(n - 1) {
        // scan for the minimum distance; ties go to the smallest
        // (min canon, max canon) region pair
        let mut best: Option<(usize, usize, f64)> = None;
        for (p, &a) in active.iter().enumerate() {
            for &b in &active[p + 1..] {
                let d = dist[(a, b)];
                let better = match best {
                    None => true,
                    Some((ba, bb, bd)) => {
                        let tie = (d - bd).abs() <= MERGE_TIE_TOL * (1.0 + d.abs().max(bd.abs()));
                        if tie {
                            pair_key(dm, &clusters, a, b) < pair_key(dm, &clusters, ba, bb)
                        } else {
                            d < bd
                        }
                    }
                };
                if better {
                    best = Some((a, b, d));
                }
            }
        }
        let (a, b, height) = best.expect("at least two active clusters");
        let (ca, cb) = (
            clusters[a].as_ref().unwrap().canon,
            clusters[b].as_ref().unwrap().canon,
        );
        let (left, right) = if dm.regions[ca] <= dm.regions[cb] {
            (a, b)
        } else {
            (b, a)
        };
        let new_id = n + step;
        let (sa, sb) = (
            clusters[a].as_ref().unwrap().size,
            clusters[b].as_ref().unwrap().size,
        );
        for &c in &active {
            if c == a || c == b {
                continue;
            }
            let d = (sa as f64 * dist[(a, c)] + sb as f64 * dist[(b, c)]) / (sa + sb) as f64;
            dist[(new_id, c)] = d;
            dist[(c, new_id)] = d;
        }
        clusters[new_id] = Some(Active {
            size: sa + sb,
            canon: if dm.regions[ca] <= dm.regions[cb] { ca } else { cb },
        });
        clusters[a] = None;
        clusters[b] = None;
        active.retain(|&c| c != a && c != b);
        active.push(new_id);
        if let Some(prev) = steps.last() {
            let prev: &MergeStep = prev;
            if height < prev.height {
                inversions.push(step);
            }
        }
        steps.push(MergeStep {
            left,
            right,
            height,
            new_id,
        });
    }
    Ok(MergeTree {
        regions: dm.regions.clone(),
        steps,
        inversions,
    })
}

fn pair_key<'a>(
    dm: &'a DistanceMatrix,
    clusters: &[Option<Active>],
    a: usize,
    b: usize,
) -> (&'a RegionId, &'a RegionId) {
    let ca = &dm.regions[clusters[a].as_ref().unwrap().canon];
    let cb = &dm.regions[clusters[b].as_ref().unwrap().canon];
    if ca <= cb {
        (ca, cb)
    } else {
        (cb, ca)
    }
}

/// Cuts the tree into exactly k communities by undoing the last k-1 merges.
pub fn cut(tree: &MergeTree, k: usize) -> Result<ClusterAssignment> {
    let n = tree.n_regions();
    if k < 1 || k > n {
        return Err(Error::validation(format!(
            "cut: k must lie in 1..={n}, got {k}"
        )));
    }
    // union-find over leaf ids, applying the first n-k merges
    let mut parent: Vec<usize> = (0..(2 * n - 1)).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for step in &tree.steps[..(n - k)] {
        let l = find(&mut parent, step.left);
        let r = find(&mut parent, step.right);
        parent[l] = step.new_id;
        parent[r] = step.new_id;
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for leaf in 0..n {
        groups.entry(find(&mut parent, leaf)).or_default().push(leaf);
    }
    debug_assert_eq!(groups.len(), k);
    // canonical labels: sort communities by their smallest member region
    let mut communities: Vec<Vec<usize>> = groups.into_values().collect();
    communities.sort_by(|a, b| {
        let ma = a.iter().map(|&i| &tree.regions[i]).min().unwrap();
        let mb = b.iter().map(|&i| &tree.regions[i]).min().unwrap();
        ma.cmp(mb)
    });
    let mut labels = BTreeMap::new();
    for (label, members) in communities.iter().enumerate() {
        for &m in members {
            labels.insert(tree.regions[m].clone(), label + 1);
        }
    }
    Ok(ClusterAssignment { k, labels })
}
