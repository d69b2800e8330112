//! Exhaustive census of finite clusters containing the origin, their
//! external borders, and way counts through the connection matrix.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::clusters::{external_border, vacant_closure, Cluster, ClusterError, ClusterShape, ProbabilityMode};
use crate::connmat::{ConnMatrix, DIM};
use crate::field::Window;
use crate::lattice::{phi_neighbors, Direction, Site};

pub const CENSUS_SCHEMA: &str = "hexperc-census/1";

/// Clusters are processed in batches of this size so memory stays bounded.
const BATCH: usize = 1 << 15;

#[derive(Debug, Error)]
pub enum CensusError {
    #[error("maximum size must be at least 1")]
    InvalidSize,
    #[error("enumeration budget of {limit} clusters exceeded")]
    BudgetExceeded { limit: u64 },
    #[error(transparent)]
    Border(#[from] ClusterError),
    #[error("cache: {0}")]
    Cache(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Calls `visit` once for every bond-connected site set containing the
/// origin with at most `k` sites. Returns the number of sets visited.
///
/// Rooted Redelmeier growth: a site leaves the untried set for good once it
/// has been tried, so no set is produced twice and no global dedup is needed.
pub fn for_each_cluster(k: usize, budget: Option<u64>, mut visit: impl FnMut(&[Site])) -> Result<u64, CensusError> {
    if k == 0 {
        return Err(CensusError::InvalidSize);
    }
    struct State<'a> {
        k: usize,
        budget: Option<u64>,
        count: u64,
        current: Vec<Site>,
        seen: HashSet<Site>,
        visit: &'a mut dyn FnMut(&[Site]),
    }
    fn grow(st: &mut State<'_>, mut untried: Vec<Site>) -> Result<(), CensusError> {
        while let Some(x) = untried.pop() {
            st.current.push(x);
            st.count += 1;
            if let Some(limit) = st.budget {
                if st.count > limit {
                    return Err(CensusError::BudgetExceeded { limit });
                }
            }
            (st.visit)(&st.current);
            if st.current.len() < st.k {
                let mut next = untried.clone();
                let mut added = Vec::new();
                for n in phi_neighbors(x) {
                    if st.seen.insert(n) {
                        next.push(n);
                        added.push(n);
                    }
                }
                grow(st, next)?;
                for n in added {
                    st.seen.remove(&n);
                }
            }
            st.current.pop();
        }
        Ok(())
    }
    let mut st = State {
        k,
        budget,
        count: 0,
        current: Vec::with_capacity(k),
        seen: HashSet::from([Site::ORIGIN]),
        visit: &mut visit,
    };
    grow(&mut st, vec![Site::ORIGIN])?;
    Ok(st.count)
}

/// All clusters of size at most `k` containing the origin, sorted by site list.
pub fn enumerate_clusters(k: usize, budget: Option<u64>) -> Result<Vec<Cluster>, CensusError> {
    let mut out = Vec::new();
    for_each_cluster(k, budget, |sites| {
        let mut s = sites.to_vec();
        s.sort_unstable();
        out.push(Cluster::from_sorted_unchecked(s));
    })?;
    out.sort_unstable_by(|a, b| a.sites().cmp(b.sites()));
    Ok(out)
}

/// Largest cluster that can have an external border with `n` vertices.
///
/// Every cluster site is the centre of an open disk of radius 1/2 inside the
/// border polygon, the disks are disjoint, and the polygon has perimeter at
/// most `2n`, so `|W| pi / 4 < (2n)^2 / (4 pi)`.
pub fn max_cluster_size_for_border(n: usize) -> usize {
    let bound = 4.0 * (n * n) as f64 / (std::f64::consts::PI * std::f64::consts::PI);
    bound.ceil() as usize - 1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ShapeCount {
    pub size: usize,
    pub border: usize,
    pub closure: usize,
    pub count: u64,
}

impl ShapeCount {
    pub fn shape(&self) -> ClusterShape {
        ClusterShape { size: self.size, border: self.border, closure: self.closure }
    }
}

/// Distinct borders of a given length, grouped by the smallest cluster that
/// produces them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BorderTally {
    pub length: usize,
    pub min_size: usize,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CensusTable {
    pub max_size: usize,
    pub clusters_by_size: BTreeMap<usize, u64>,
    pub borders_by_length: BTreeMap<usize, u64>,
    /// Direction pairs `(i, j)` such that some border vertex has one cycle
    /// neighbour in direction `i` and the next in direction `j`, read in
    /// either orientation.
    pub witnessed_pairs: BTreeSet<(Direction, Direction)>,
    pub shapes: Vec<ShapeCount>,
    pub border_tallies: Vec<BorderTally>,
    /// Clusters whose vacant closure is larger than their border.
    pub clusters_with_holes: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RnRow {
    pub n: usize,
    pub r_n: u64,
    /// `k >= n` and `r_n` unchanged over the last three sizes.
    pub exact: bool,
    /// `k` reaches [`max_cluster_size_for_border`], so `r_n` is complete.
    pub certified: bool,
}

impl CensusTable {
    pub fn total_clusters(&self) -> u64 {
        self.clusters_by_size.values().sum()
    }

    pub fn total_borders(&self) -> u64 {
        self.borders_by_length.values().sum()
    }

    /// `r_n^{(k')}` for any `k' <= max_size`.
    pub fn r_n_at(&self, n: usize, k: usize) -> u64 {
        self.border_tallies.iter().filter(|t| t.length == n && t.min_size <= k).map(|t| t.count).sum()
    }

    pub fn rn_row(&self, n: usize) -> RnRow {
        let k = self.max_size;
        let r_n = self.r_n_at(n, k);
        let stable = k >= 3 && self.r_n_at(n, k - 1) == r_n && self.r_n_at(n, k - 2) == r_n;
        RnRow { n, r_n, exact: k >= n && stable, certified: k >= max_cluster_size_for_border(n) }
    }

    pub fn rn_rows(&self) -> Vec<RnRow> {
        self.borders_by_length.keys().map(|&n| self.rn_row(n)).collect()
    }

    /// Columns `n,r_n,exact_flag`.
    pub fn rn_csv(&self) -> String {
        let mut out = String::from("n,r_n,exact_flag\n");
        for r in self.rn_rows() {
            out.push_str(&format!("{},{},{}\n", r.n, r.r_n, r.exact));
        }
        out
    }

    /// Sum of cluster-event probabilities over clusters of size at most `k`.
    pub fn event_mass(&self, c: f64, k: usize, mode: ProbabilityMode) -> f64 {
        self.shapes.iter().filter(|s| s.size <= k).map(|s| s.count as f64 * s.shape().probability(c, mode)).sum()
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn checksum(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("census table serialises");
        hex::encode(Sha256::digest(bytes))
    }
}

#[derive(Default)]
struct Tally {
    clusters_by_size: BTreeMap<usize, u64>,
    shapes: BTreeMap<ClusterShape, u64>,
    borders: HashMap<Vec<Site>, usize>,
    witnessed: BTreeSet<(Direction, Direction)>,
    holes: u64,
}

impl Tally {
    fn add(&mut self, w: &Cluster) -> Result<(), ClusterError> {
        let window = Window::new(w.required_half_width()).expect("positive half-width");
        let border = external_border(w, window)?;
        let closure = vacant_closure(w).len();
        let shape = ClusterShape { size: w.len(), border: border.len(), closure };
        *self.clusters_by_size.entry(w.len()).or_default() += 1;
        *self.shapes.entry(shape).or_default() += 1;
        if closure != border.len() {
            self.holes += 1;
        }
        for (a, b) in border.joinings() {
            self.witnessed.insert((a, b));
            self.witnessed.insert((b, a));
        }
        let size = self.borders.entry(border.vertices().to_vec()).or_insert(w.len());
        *size = (*size).min(w.len());
        Ok(())
    }

    fn merge(mut self, other: Tally) -> Tally {
        for (k, v) in other.clusters_by_size {
            *self.clusters_by_size.entry(k).or_default() += v;
        }
        for (k, v) in other.shapes {
            *self.shapes.entry(k).or_default() += v;
        }
        for (b, s) in other.borders {
            let e = self.borders.entry(b).or_insert(s);
            *e = (*e).min(s);
        }
        self.witnessed.extend(other.witnessed);
        self.holes += other.holes;
        self
    }

    fn finish(self, k: usize) -> CensusTable {
        let mut by_len_size: BTreeMap<(usize, usize), u64> = BTreeMap::new();
        for (b, s) in &self.borders {
            *by_len_size.entry((b.len(), *s)).or_default() += 1;
        }
        let mut borders_by_length = BTreeMap::new();
        for (&(n, _), &c) in &by_len_size {
            *borders_by_length.entry(n).or_default() += c;
        }
        CensusTable {
            max_size: k,
            clusters_by_size: self.clusters_by_size,
            borders_by_length,
            witnessed_pairs: self.witnessed,
            shapes: self
                .shapes
                .into_iter()
                .map(|(s, count)| ShapeCount { size: s.size, border: s.border, closure: s.closure, count })
                .collect(),
            border_tallies: by_len_size
                .into_iter()
                .map(|((length, min_size), count)| BorderTally { length, min_size, count })
                .collect(),
            clusters_with_holes: self.holes,
        }
    }
}

fn tally_batch(batch: &[Cluster]) -> Result<Tally, ClusterError> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        batch
            .par_iter()
            .try_fold(Tally::default, |mut t, w| t.add(w).map(|_| t))
            .try_reduce(Tally::default, |a, b| Ok(a.merge(b)))
    }
    #[cfg(not(feature = "parallel"))]
    {
        let mut t = Tally::default();
        for w in batch {
            t.add(w)?;
        }
        Ok(t)
    }
}

/// Borders of every cluster of size at most `k`, deduplicated.
pub fn border_census(k: usize) -> Result<CensusTable, CensusError> {
    border_census_with_budget(k, None)
}

pub fn border_census_with_budget(k: usize, budget: Option<u64>) -> Result<CensusTable, CensusError> {
    let mut total = Tally::default();
    let mut batch: Vec<Cluster> = Vec::with_capacity(BATCH);
    let mut failure: Option<ClusterError> = None;
    for_each_cluster(k, budget, |sites| {
        if failure.is_some() {
            return;
        }
        let mut s = sites.to_vec();
        s.sort_unstable();
        batch.push(Cluster::from_sorted_unchecked(s));
        if batch.len() == BATCH {
            match tally_batch(&batch) {
                Ok(t) => total = std::mem::take(&mut total).merge(t),
                Err(e) => failure = Some(e),
            }
            batch.clear();
        }
    })?;
    if let Some(e) = failure {
        return Err(e.into());
    }
    total = total.merge(tally_batch(&batch)?);
    Ok(total.finish(k))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CensusDocument {
    pub schema: String,
    pub k: usize,
    pub clusters_by_size: BTreeMap<usize, u64>,
    pub borders_by_length: BTreeMap<usize, u64>,
    pub witnessed_pairs: BTreeSet<(Direction, Direction)>,
    pub shapes: Vec<ShapeCount>,
    pub border_tallies: Vec<BorderTally>,
    pub clusters_with_holes: u64,
    pub checksum: String,
}

impl CensusDocument {
    pub fn from_table(t: &CensusTable) -> Self {
        CensusDocument {
            schema: CENSUS_SCHEMA.into(),
            k: t.max_size,
            clusters_by_size: t.clusters_by_size.clone(),
            borders_by_length: t.borders_by_length.clone(),
            witnessed_pairs: t.witnessed_pairs.clone(),
            shapes: t.shapes.clone(),
            border_tallies: t.border_tallies.clone(),
            clusters_with_holes: t.clusters_with_holes,
            checksum: t.checksum(),
        }
    }

    /// Rebuilds the table, rejecting schema or checksum mismatches.
    pub fn into_table(self) -> Result<CensusTable, CensusError> {
        if self.schema != CENSUS_SCHEMA {
            return Err(CensusError::Cache(format!("schema {:?}, expected {CENSUS_SCHEMA:?}", self.schema)));
        }
        let t = CensusTable {
            max_size: self.k,
            clusters_by_size: self.clusters_by_size,
            borders_by_length: self.borders_by_length,
            witnessed_pairs: self.witnessed_pairs,
            shapes: self.shapes,
            border_tallies: self.border_tallies,
            clusters_with_holes: self.clusters_with_holes,
        };
        let sum = t.checksum();
        if sum != self.checksum {
            return Err(CensusError::Cache(format!("checksum mismatch: stored {}, computed {sum}", self.checksum)));
        }
        Ok(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CacheStatus {
    Hit,
    Miss,
    /// A cache file existed but failed validation and was rewritten.
    Invalid,
    Disabled,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheOutcome {
    pub status: CacheStatus,
    pub path: Option<PathBuf>,
    pub checksum: String,
}

pub fn cache_path(dir: &Path, k: usize) -> PathBuf {
    dir.join(format!("census-k{k}.json"))
}

/// Loads the census for `k` from `dir`, computing and storing it on a miss.
pub fn load_or_compute(k: usize, dir: Option<&Path>) -> Result<(CensusTable, CacheOutcome), CensusError> {
    let Some(dir) = dir else {
        let t = border_census(k)?;
        let checksum = t.checksum();
        return Ok((t, CacheOutcome { status: CacheStatus::Disabled, path: None, checksum }));
    };
    let path = cache_path(dir, k);
    let mut status = CacheStatus::Miss;
    if path.exists() {
        let loaded = fs::read(&path)
            .map_err(CensusError::from)
            .and_then(|b| serde_json::from_slice::<CensusDocument>(&b).map_err(|e| CensusError::Cache(e.to_string())))
            .and_then(CensusDocument::into_table);
        match loaded {
            Ok(t) if t.max_size == k => {
                let checksum = t.checksum();
                return Ok((t, CacheOutcome { status: CacheStatus::Hit, path: Some(path), checksum }));
            }
            _ => status = CacheStatus::Invalid,
        }
    }
    let t = border_census(k)?;
    fs::create_dir_all(dir)?;
    let doc = CensusDocument::from_table(&t);
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, serde_json::to_vec_pretty(&doc).map_err(|e| CensusError::Cache(e.to_string()))?)?;
    fs::rename(&tmp, &path)?;
    Ok((t, CacheOutcome { status, path: Some(path), checksum: doc.checksum }))
}

/// Big integers as decimal strings.
mod decimal {
    use num_bigint::BigUint;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &BigUint, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&x.to_str_radix(10))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigUint, D::Error> {
        let text = String::deserialize(d)?;
        BigUint::parse_bytes(text.as_bytes(), 10).ok_or_else(|| D::Error::custom(format!("bad integer {text:?}")))
    }

    pub mod vec {
        use super::*;
        use serde::ser::SerializeSeq;

        pub fn serialize<S: Serializer>(xs: &[BigUint], s: S) -> Result<S::Ok, S::Error> {
            let mut seq = s.serialize_seq(Some(xs.len()))?;
            for x in xs {
                seq.serialize_element(&x.to_str_radix(10))?;
            }
            seq.end()
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<BigUint>, D::Error> {
            Vec::<String>::deserialize(d)?
                .into_iter()
                .map(|t| BigUint::parse_bytes(t.as_bytes(), 10).ok_or_else(|| D::Error::custom(format!("bad integer {t:?}"))))
                .collect()
        }
    }
}

/// `g_i(a1; n)`: the number of admissible direction sequences starting with
/// `a1` whose `n`-th joining ends in direction `i`; row `a1` of `S^n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WayCount {
    pub a1: Direction,
    pub n: usize,
    #[serde(with = "decimal::vec")]
    pub g: Vec<BigUint>,
}

impl WayCount {
    pub fn total(&self) -> BigUint {
        self.g.iter().sum()
    }

    pub fn total_f64(&self) -> f64 {
        self.total().to_f64().unwrap_or(f64::INFINITY)
    }
}

fn step_u128(g: &[u128], s: &ConnMatrix) -> Option<Vec<u128>> {
    (0..DIM)
        .map(|i| (0..DIM).try_fold(0u128, |acc, k| acc.checked_add(g[k].checked_mul(s.entries()[k][i] as u128)?)))
        .collect()
}

fn step_big(g: &[BigUint], s: &ConnMatrix) -> Vec<BigUint> {
    (0..DIM)
        .map(|i| (0..DIM).filter(|&k| s.entries()[k][i] == 1).map(|k| &g[k]).sum())
        .collect()
}

/// Iterates `g(n) = g(n-1) S` from `g(1) = S_{a1, .}` with overflow-checked
/// integers, switching to big integers when needed.
pub fn g_vector(a1: Direction, n: usize, s: &ConnMatrix) -> WayCount {
    assert!(n >= 1, "way counts start at n = 1");
    let mut small: Option<Vec<u128>> = Some(s.entries()[a1.slot()].iter().map(|&x| x as u128).collect());
    let mut big: Vec<BigUint> = Vec::new();
    for _ in 1..n {
        match small.as_ref().and_then(|g| step_u128(g, s)) {
            Some(next) => small = Some(next),
            None => {
                if let Some(g) = small.take() {
                    big = g.into_iter().map(BigUint::from).collect();
                }
                big = step_big(&big, s);
            }
        }
    }
    let g = match small {
        Some(g) => g.into_iter().map(BigUint::from).collect(),
        None => big,
    };
    WayCount { a1, n, g }
}

/// `max over a1 of the total way count g(a1; n)`.
pub fn max_total_ways(n: usize, s: &ConnMatrix) -> BigUint {
    Direction::all().map(|a| g_vector(a, n, s).total()).max().unwrap_or_else(BigUint::zero)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma2Row {
    pub n: usize,
    pub r_n: u64,
    /// `n* (n - 2) max_a g(a; n - 1)`.
    #[serde(with = "decimal")]
    pub rhs: BigUint,
    pub holds: bool,
    /// `rhs / r_n`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma2Report {
    pub k: usize,
    pub n_star: u32,
    pub rows: Vec<Lemma2Row>,
    /// Lengths skipped because `r_n` is not yet exact at this `k`.
    pub skipped: Vec<usize>,
}

impl Lemma2Report {
    pub fn all_hold(&self) -> bool {
        self.rows.iter().all(|r| r.holds)
    }
}

/// Checks `r_n < n* (n - 2) max_a g(a; n - 1)` for every exact `r_n`.
pub fn verify_lemma2(census: &CensusTable, s: &ConnMatrix) -> Lemma2Report {
    let n_star = s.n_star();
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for row in census.rn_rows() {
        if !(row.exact || row.certified) {
            skipped.push(row.n);
            continue;
        }
        let n = row.n;
        let rhs = BigUint::from(n_star) * BigUint::from(n - 2) * max_total_ways(n - 1, s);
        let holds = BigUint::from(row.r_n) < rhs;
        let ratio = rhs.to_f64().unwrap_or(f64::INFINITY) / row.r_n as f64;
        rows.push(Lemma2Row { n, r_n: row.r_n, rhs, holds, ratio });
    }
    Lemma2Report { k: census.max_size, n_star, rows, skipped }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clusters::{border_oracle, enclosed_vacancies, surrounds};
    use crate::connmat::theorem4_matrix;

    /// Level-wise growth with a global set of seen site sets.
    fn oracle_counts(k: usize) -> Vec<u64> {
        let mut level: HashSet<Vec<Site>> = HashSet::from([vec![Site::ORIGIN]]);
        let mut counts = vec![1u64];
        for _ in 1..k {
            let mut next = HashSet::new();
            for set in &level {
                for &y in set {
                    for n in phi_neighbors(y) {
                        if set.binary_search(&n).is_err() {
                            let mut s = set.clone();
                            s.push(n);
                            s.sort_unstable();
                            next.insert(s);
                        }
                    }
                }
            }
            counts.push(next.len() as u64);
            level = next;
        }
        counts
    }

    // frozen from `oracle_counts(8)`
    const CLUSTERS_BY_SIZE: [u64; 8] = [1, 3, 9, 28, 90, 282, 875, 2700];

    #[test]
    fn enumeration_matches_oracle() {
        assert_eq!(oracle_counts(8), CLUSTERS_BY_SIZE.to_vec());
        let mut by_size = vec![0u64; 8];
        let mut seen = HashSet::new();
        let total = for_each_cluster(8, None, |s| {
            by_size[s.len() - 1] += 1;
            let mut v = s.to_vec();
            v.sort_unstable();
            assert!(seen.insert(v), "duplicate set");
        })
        .unwrap();
        assert_eq!(by_size, CLUSTERS_BY_SIZE.to_vec());
        assert_eq!(total, CLUSTERS_BY_SIZE.iter().sum::<u64>());
    }

    #[test]
    fn enumeration_small_cases() {
        let one = enumerate_clusters(1, None).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].sites(), &[Site::ORIGIN]);
        let two = enumerate_clusters(2, None).unwrap();
        assert_eq!(two.len(), 4);
        assert!(two.windows(2).all(|p| p[0].sites() < p[1].sites()));
        assert!(matches!(for_each_cluster(0, None, |_| {}), Err(CensusError::InvalidSize)));
        assert!(matches!(for_each_cluster(6, Some(100), |_| {}), Err(CensusError::BudgetExceeded { limit: 100 })));
    }

    #[test]
    fn census_k1_and_k2() {
        let t1 = border_census(1).unwrap();
        assert_eq!(t1.borders_by_length, BTreeMap::from([(3, 1)]));
        let t2 = border_census(2).unwrap();
        assert_eq!(t2.borders_by_length, BTreeMap::from([(3, 1), (4, 3)]));
        assert_eq!(t2.clusters_by_size, BTreeMap::from([(1, 1), (2, 3)]));
    }

    #[test]
    fn k1_witnessed_pairs_are_the_triangle_joinings() {
        let w = Cluster::from_sites([Site::ORIGIN]).unwrap();
        let b = external_border(&w, Window::new(3).unwrap()).unwrap();
        let mut want = BTreeSet::new();
        for (a, c) in b.joinings() {
            want.insert((a, c));
            want.insert((c, a));
        }
        assert_eq!(border_census(1).unwrap().witnessed_pairs, want);
    }

    #[test]
    fn census_invariants_up_to_8() {
        let t = border_census(8).unwrap();
        assert_eq!(t.clusters_by_size.values().copied().collect::<Vec<_>>(), CLUSTERS_BY_SIZE.to_vec());
        let s = theorem4_matrix();
        for &(i, j) in &t.witnessed_pairs {
            assert_eq!(s.get(i, j), 1, "witnessed ({i},{j}) hits a zero");
        }
        // clusters grouped by shape account for every cluster
        assert_eq!(t.shapes.iter().map(|s| s.count).sum::<u64>(), t.total_clusters());
        assert_eq!(t.border_tallies.iter().map(|b| b.count).sum::<u64>(), t.total_borders());
        assert!(t.borders_by_length.keys().all(|&n| n >= 3));
        for k in 1..8 {
            for &n in t.borders_by_length.keys() {
                assert!(t.r_n_at(n, k) <= t.r_n_at(n, k + 1));
            }
        }
        // paper mode never below exact mode
        assert!(t.shapes.iter().all(|s| s.border <= s.closure));
    }

    #[test]
    fn r_n_at_smaller_k_matches_smaller_census() {
        let t8 = border_census(8).unwrap();
        for k in [3, 5, 6] {
            let tk = border_census(k).unwrap();
            for (&n, &r) in &tk.borders_by_length {
                assert_eq!(t8.r_n_at(n, k), r, "n={n} k={k}");
            }
        }
    }

    #[test]
    fn every_border_is_grouped_once_and_missing_neighbours_are_pocketed() {
        // per-border grouping covers all clusters, and hole-free clusters
        // have border equal to the vacant closure
        let clusters = enumerate_clusters(7, None).unwrap();
        let mut groups: HashMap<Vec<Site>, u64> = HashMap::new();
        let mut pocketed = 0;
        for w in &clusters {
            let window = Window::new(w.required_half_width()).unwrap();
            let b = external_border(w, window).unwrap();
            for &x in w.sites() {
                assert!(surrounds(&b, x).unwrap());
            }
            let mut got = b.vertices().to_vec();
            got.sort_unstable();
            assert_eq!(got, border_oracle(w, window), "cluster {:?}", w.sites());
            if enclosed_vacancies(w, window).unwrap().is_empty() {
                // without enclosed sites, a missing neighbour can only sit in a
                // pocket walled in by W and other neighbours
                let closure = vacant_closure(w);
                let pockets: Vec<Site> = closure.iter().copied().filter(|z| got.binary_search(z).is_err()).collect();
                for z in &pockets {
                    assert!(phi_neighbors(*z).iter().all(|n| w.contains(*n) || closure.contains(n)));
                }
                pocketed += !pockets.is_empty() as usize;
            }
            *groups.entry(b.vertices().to_vec()).or_default() += 1;
        }
        assert_eq!(groups.values().sum::<u64>(), clusters.len() as u64);
        assert!(pocketed > 0, "a size-7 cluster has a pocketed neighbour");
        let t = border_census(7).unwrap();
        assert_eq!(groups.len() as u64, t.total_borders());
    }

    #[test]
    fn size_bound_for_borders() {
        assert_eq!(max_cluster_size_for_border(3), 3);
        assert_eq!(max_cluster_size_for_border(4), 6);
        let t = border_census(10).unwrap();
        for b in &t.border_tallies {
            assert!(b.min_size <= max_cluster_size_for_border(b.length));
        }
        for s in &t.shapes {
            assert!(s.size <= max_cluster_size_for_border(s.border), "{s:?}");
        }
    }

    #[test]
    fn rn_rows_and_csv() {
        let t = border_census(8).unwrap();
        let r3 = t.rn_row(3);
        assert_eq!(r3.r_n, 1);
        assert!(r3.exact && r3.certified);
        assert!(!t.rn_row(8).exact);
        let csv = t.rn_csv();
        assert!(csv.starts_with("n,r_n,exact_flag\n3,1,true\n"));
    }

    #[test]
    fn cache_round_trip_and_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let (t, o) = load_or_compute(3, Some(dir.path())).unwrap();
        assert_eq!(o.status, CacheStatus::Miss);
        let (t2, o2) = load_or_compute(3, Some(dir.path())).unwrap();
        assert_eq!(o2.status, CacheStatus::Hit);
        assert_eq!((t2, o2.checksum.clone()), (t.clone(), o.checksum));

        let path = cache_path(dir.path(), 3);
        let text = fs::read_to_string(&path).unwrap();
        let mut doc: CensusDocument = serde_json::from_str(&text).unwrap();
        assert_eq!(doc.schema, CENSUS_SCHEMA);
        doc.clusters_by_size.insert(1, 99);
        fs::write(&path, serde_json::to_vec(&doc).unwrap()).unwrap();
        let (t3, o3) = load_or_compute(3, Some(dir.path())).unwrap();
        assert_eq!(o3.status, CacheStatus::Invalid);
        assert_eq!(t3, t);
        assert_eq!(load_or_compute(3, Some(dir.path())).unwrap().1.status, CacheStatus::Hit);
        assert_eq!(load_or_compute(2, None).unwrap().1.status, CacheStatus::Disabled);
    }

    fn matrix_power_row(s: &ConnMatrix, j: usize, n: usize) -> Vec<u128> {
        let m: Vec<Vec<u128>> = s.entries().iter().map(|r| r.iter().map(|&x| x as u128).collect()).collect();
        let mut p = m.clone();
        for _ in 1..n {
            p = (0..DIM).map(|i| (0..DIM).map(|c| (0..DIM).map(|l| p[i][l] * m[l][c]).sum()).collect()).collect();
        }
        p[j].clone()
    }

    #[test]
    fn g_vector_small_n() {
        let s = theorem4_matrix();
        for a in Direction::all() {
            let g1 = g_vector(a, 1, &s);
            let want: Vec<BigUint> = s.entries()[a.slot()].iter().map(|&x| BigUint::from(x)).collect();
            assert_eq!(g1.g, want);
        }
        let a2 = Direction::new(2).unwrap();
        let g2 = g_vector(a2, 2, &s);
        let row = matrix_power_row(&s, 1, 2);
        assert_eq!(g2.g, row.iter().map(|&x| BigUint::from(x)).collect::<Vec<_>>());
        assert_eq!(g2.total(), BigUint::from(row.iter().sum::<u128>()));
        for n in [5, 11] {
            let row = matrix_power_row(&s, 6, n);
            assert_eq!(g_vector(Direction::new(7).unwrap(), n, &s).total(), BigUint::from(row.iter().sum::<u128>()));
        }
    }

    #[test]
    fn g_vector_growth_and_bounds() {
        let s = theorem4_matrix();
        let lambda0 = 3.0 + 2.0 * 3f64.sqrt();
        for a in Direction::all() {
            let mut prev = g_vector(a, 1, &s).total();
            for n in 2..=40 {
                let cur = g_vector(a, n, &s).total();
                assert!(cur >= prev);
                assert!(cur <= BigUint::from(12u32) * BigUint::from(7u32).pow(n as u32 - 1));
                prev = cur;
            }
            let r = g_vector(a, 31, &s).total_f64() / g_vector(a, 30, &s).total_f64();
            assert!((r - lambda0).abs() / lambda0 <= 0.01);
        }
    }

    #[test]
    fn g_vector_switches_to_big_integers() {
        let s = theorem4_matrix();
        let a = Direction::new(2).unwrap();
        let g = g_vector(a, 60, &s);
        assert!(g.total() > BigUint::from(u128::MAX));
        // consistent with one more big step from n = 59
        let prev = g_vector(a, 59, &s);
        assert_eq!(step_big(&prev.g, &s), g.g);
    }

    #[test]
    fn way_count_json_uses_decimal_strings() {
        let g = g_vector(Direction::new(2).unwrap(), 3, &theorem4_matrix());
        let json = serde_json::to_string(&g).unwrap();
        assert!(json.contains("\"g\":[\""));
        assert_eq!(serde_json::from_str::<WayCount>(&json).unwrap(), g);
    }

    #[test]
    fn lemma2_small_lengths() {
        let s = theorem4_matrix();
        let t = border_census(8).unwrap();
        let rep = verify_lemma2(&t, &s);
        assert!(rep.all_hold(), "{:?}", rep.rows);
        let r3 = rep.rows.iter().find(|r| r.n == 3).unwrap();
        assert_eq!(r3.rhs, BigUint::from(7u32) * max_total_ways(2, &s));
        assert!(rep.rows.iter().any(|r| r.n == 4));
        assert!(!rep.skipped.is_empty());
    }
}
