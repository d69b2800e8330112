//! Bond-connected clusters, their external borders on the matching lattice,
//! and the probabilities of the events "the origin cluster is exactly W".
//!
//! A vacant site `z` next to a finite cluster `W` belongs to the external
//! border when it has an escape route to infinity that avoids `W` and meets
//! the outer neighbourhood `N(W)` only at `z` itself. Equivalently, `z` has a
//! bond neighbour in the unbounded component `U` of the complement of
//! `W ∪ N(W)`. The border is ordered by walking around the outside of the
//! finite set `V \ U` and listing the sites whose bonds lead into `U`.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{Occupancy, Window};
use crate::lattice::{are_phi_star_adjacent, direction_between, phi_neighbors, Direction, Site};

pub const BORDER_SCHEMA: &str = "hexperc-border/1";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClusterError {
    #[error("window half-width {have} too small, cluster needs at least {need}")]
    WindowTooSmall { have: u32, need: u32 },
    #[error("border assertion failed: {0}")]
    BorderAssertionFailure(String),
    #[error("site {0} lies on the cycle")]
    OnCycle(Site),
    #[error("site set is empty or not bond-connected")]
    NotConnected,
    #[error("unsupported border schema {0:?}")]
    Schema(String),
}

/// A finite bond-connected set of occupied sites.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cluster {
    sites: Vec<Site>,
    pub touches_boundary: bool,
}

impl Cluster {
    /// Validates connectivity; the result is marked as not touching any boundary.
    pub fn from_sites(sites: impl IntoIterator<Item = Site>) -> Result<Self, ClusterError> {
        let mut sites: Vec<Site> = sites.into_iter().collect();
        sites.sort_unstable();
        sites.dedup();
        if sites.is_empty() {
            return Err(ClusterError::NotConnected);
        }
        let mut seen = vec![false; sites.len()];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut reached = 1;
        while let Some(i) = stack.pop() {
            for n in phi_neighbors(sites[i]) {
                if let Ok(j) = sites.binary_search(&n) {
                    if !seen[j] {
                        seen[j] = true;
                        reached += 1;
                        stack.push(j);
                    }
                }
            }
        }
        if reached != sites.len() {
            return Err(ClusterError::NotConnected);
        }
        Ok(Cluster { sites, touches_boundary: false })
    }

    /// Trusted constructor for already sorted, connected site lists.
    pub(crate) fn from_sorted_unchecked(sites: Vec<Site>) -> Self {
        debug_assert!(sites.windows(2).all(|w| w[0] < w[1]));
        Cluster { sites, touches_boundary: false }
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn contains(&self, site: Site) -> bool {
        self.sites.binary_search(&site).is_ok()
    }

    /// Smallest half-width whose window keeps two spare cells around the cluster.
    pub fn required_half_width(&self) -> u32 {
        self.sites.iter().map(|s| s.u.unsigned_abs().max(s.v.unsigned_abs())).max().unwrap_or(0) + 2
    }
}

/// Bond-connected component of `x` among the occupied sites, or `None` when
/// `x` is vacant.
pub fn cluster_at(field: &impl Occupancy, x: Site) -> Option<Cluster> {
    let window = field.window();
    if !window.contains(x) || !field.is_occupied(x) {
        return None;
    }
    let mut seen = vec![false; window.len()];
    let mut queue = VecDeque::from([x]);
    seen[window.index(x).expect("inside window")] = true;
    let mut sites = Vec::new();
    let mut touches = false;
    while let Some(y) = queue.pop_front() {
        touches |= window.is_boundary(y);
        sites.push(y);
        for n in phi_neighbors(y) {
            if let Some(i) = window.index(n) {
                if !seen[i] && field.is_occupied(n) {
                    seen[i] = true;
                    queue.push_back(n);
                }
            }
        }
    }
    sites.sort_unstable();
    Some(Cluster { sites, touches_boundary: touches })
}

/// All bond neighbours of `W` outside `W`, sorted.
pub fn vacant_closure(w: &Cluster) -> Vec<Site> {
    let mut out: Vec<Site> =
        w.sites.iter().flat_map(|&y| phi_neighbors(y)).filter(|n| !w.contains(*n)).collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// A simple cycle on the matching lattice, stored clockwise from its
/// lexicographically smallest vertex.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BorderCycle {
    vertices: Vec<Site>,
    directions: Vec<Direction>,
}

impl BorderCycle {
    /// Builds a cycle from an ordered vertex list, checking adjacency and
    /// simplicity and normalising orientation and starting point.
    pub fn from_vertices(mut vertices: Vec<Site>) -> Result<Self, ClusterError> {
        let n = vertices.len();
        if n < 3 {
            return Err(ClusterError::BorderAssertionFailure(format!("cycle of length {n}")));
        }
        let mut sorted = vertices.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|p| p[0] == p[1]) {
            return Err(ClusterError::BorderAssertionFailure("repeated vertex".into()));
        }
        if signed_area2(&vertices) > 0 {
            vertices.reverse();
        }
        let start = (0..n).min_by_key(|&i| vertices[i]).expect("nonempty");
        vertices.rotate_left(start);
        let directions = (0..n)
            .map(|k| {
                direction_between(vertices[k], vertices[(k + 1) % n]).map_err(|e| {
                    ClusterError::BorderAssertionFailure(format!("consecutive vertices not adjacent: {e}"))
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(BorderCycle { vertices, directions })
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertices(&self) -> &[Site] {
        &self.vertices
    }

    /// Direction of each edge `z_k -> z_{k+1}`.
    pub fn directions(&self) -> &[Direction] {
        &self.directions
    }

    /// For each vertex, the directions (seen from that vertex) of its
    /// predecessor and its successor on the cycle.
    pub fn joinings(&self) -> impl Iterator<Item = (Direction, Direction)> + '_ {
        let n = self.len();
        (0..n).map(move |k| {
            let prev = self.directions[(k + n - 1) % n].reverse();
            (prev, self.directions[k])
        })
    }

    pub fn to_document(&self) -> BorderDocument {
        BorderDocument {
            schema: BORDER_SCHEMA.to_string(),
            vertices: self.vertices.clone(),
            directions: self.directions.clone(),
        }
    }

    pub fn from_document(doc: &BorderDocument) -> Result<Self, ClusterError> {
        if doc.schema != BORDER_SCHEMA {
            return Err(ClusterError::Schema(doc.schema.clone()));
        }
        let cycle = BorderCycle::from_vertices(doc.vertices.clone())?;
        if cycle.vertices != doc.vertices || cycle.directions != doc.directions {
            return Err(ClusterError::BorderAssertionFailure("document is not in canonical form".into()));
        }
        Ok(cycle)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BorderDocument {
    pub schema: String,
    pub vertices: Vec<Site>,
    pub directions: Vec<Direction>,
}

/// Twice the signed area in the scaled integer chart (positive when
/// counter-clockwise).
fn signed_area2(vertices: &[Site]) -> i64 {
    let n = vertices.len();
    (0..n)
        .map(|k| {
            let (x0, y0) = vertices[k].scaled_coords();
            let (x1, y1) = vertices[(k + 1) % n].scaled_coords();
            x0 * y1 - x1 * y0
        })
        .sum()
}

/// Winding number of the immersed closed polygon about `x`, computed with
/// exact integer orientation tests.
pub fn winding_number(cycle: &BorderCycle, x: Site) -> Result<i32, ClusterError> {
    if cycle.vertices.contains(&x) {
        return Err(ClusterError::OnCycle(x));
    }
    let (px, py) = x.scaled_coords();
    let n = cycle.len();
    let mut wn = 0;
    for k in 0..n {
        let (x0, y0) = cycle.vertices[k].scaled_coords();
        let (x1, y1) = cycle.vertices[(k + 1) % n].scaled_coords();
        let is_left = (x1 - x0) * (py - y0) - (px - x0) * (y1 - y0);
        if y0 <= py {
            if y1 > py && is_left > 0 {
                wn += 1;
            }
        } else if y1 <= py && is_left < 0 {
            wn -= 1;
        }
    }
    Ok(wn)
}

pub fn surrounds(cycle: &BorderCycle, x: Site) -> Result<bool, ClusterError> {
    Ok(winding_number(cycle, x)? != 0)
}

const FREE: u8 = 0;
const IN_W: u8 = 1;
const IN_CLOSURE: u8 = 2;

/// Region labels used by the border computation.
struct Regions {
    window: Window,
    outside: Vec<bool>,
}

impl Regions {
    fn build(w: &Cluster, window: Window) -> Result<Self, ClusterError> {
        let need = w.required_half_width();
        if w.touches_boundary || window.half_width() < need {
            return Err(ClusterError::WindowTooSmall { have: window.half_width(), need });
        }
        let mut label = vec![FREE; window.len()];
        for &y in &w.sites {
            label[window.index(y).expect("margin checked")] = IN_W;
        }
        for &y in &w.sites {
            for n in phi_neighbors(y) {
                let i = window.index(n).expect("margin checked");
                if label[i] == FREE {
                    label[i] = IN_CLOSURE;
                }
            }
        }
        // unbounded component of the complement of W ∪ N(W)
        let mut outside = vec![false; window.len()];
        let mut stack: Vec<Site> = window.boundary_sites().collect();
        for s in &stack {
            outside[window.index(*s).expect("boundary")] = true;
        }
        while let Some(y) = stack.pop() {
            for n in phi_neighbors(y) {
                if let Some(i) = window.index(n) {
                    if !outside[i] && label[i] == FREE {
                        outside[i] = true;
                        stack.push(n);
                    }
                }
            }
        }
        Ok(Regions { window, outside })
    }

    fn is_outside(&self, s: Site) -> bool {
        self.window.index(s).is_some_and(|i| self.outside[i])
    }

    fn border_set(&self, w: &Cluster) -> Vec<Site> {
        vacant_closure(w)
            .into_iter()
            .filter(|&z| phi_neighbors(z).iter().any(|&n| self.is_outside(n)))
            .collect()
    }
}

/// The external border of a finite cluster, ordered as a clockwise simple
/// cycle on the matching lattice. The window must leave two spare cells
/// around the cluster.
pub fn external_border(w: &Cluster, window: Window) -> Result<BorderCycle, ClusterError> {
    let regions = Regions::build(w, window)?;
    let border = regions.border_set(w);
    let fail = |msg: String| Err(ClusterError::BorderAssertionFailure(msg));
    let Some(&start) = border.first() else {
        return fail("empty border".into());
    };
    let start_slot = phi_neighbors(start)
        .iter()
        .position(|&n| regions.is_outside(n))
        .expect("border site has an outside neighbour");

    // Walk around the outside of V \ U, turning the same way at every site.
    let mut walk: Vec<Site> = Vec::new();
    let (mut site, mut slot) = (start, start_slot);
    let limit = 6 * window.len();
    for _ in 0..limit {
        let n = phi_neighbors(site)[slot];
        if regions.is_outside(n) {
            if walk.last() != Some(&site) {
                walk.push(site);
            }
            slot = (slot + 1) % 3;
        } else {
            let back = phi_neighbors(n).iter().position(|&b| b == site).expect("bonds are symmetric");
            site = n;
            slot = (back + 1) % 3;
        }
        if site == start && slot == start_slot {
            break;
        }
    }
    if site != start || slot != start_slot {
        return fail("outer walk did not close".into());
    }
    if walk.len() > 1 && walk.first() == walk.last() {
        walk.pop();
    }

    let mut listed = walk.clone();
    listed.sort_unstable();
    if listed.len() != border.len() || listed != border {
        return fail(format!("walk visits {} sites, border has {}", walk.len(), border.len()));
    }
    for k in 0..walk.len() {
        let (a, b) = (walk[k], walk[(k + 1) % walk.len()]);
        if !are_phi_star_adjacent(a, b) {
            return fail(format!("{a} and {b} are consecutive but not adjacent"));
        }
    }
    let cycle = BorderCycle::from_vertices(walk)?;
    for &x in &w.sites {
        match winding_number(&cycle, x) {
            Ok(1) | Ok(-1) => {}
            Ok(k) => return fail(format!("winding number {k} about cluster site {x}")),
            Err(_) => return fail(format!("cluster site {x} lies on its border")),
        }
    }
    Ok(cycle)
}

/// Sites off `W` that cannot reach the window boundary without crossing `W`.
pub fn enclosed_vacancies(w: &Cluster, window: Window) -> Result<Vec<Site>, ClusterError> {
    let need = w.required_half_width();
    if window.half_width() < need {
        return Err(ClusterError::WindowTooSmall { have: window.half_width(), need });
    }
    let mut reach = vec![false; window.len()];
    let mut stack: Vec<Site> = window.boundary_sites().collect();
    for s in &stack {
        reach[window.index(*s).expect("boundary")] = true;
    }
    while let Some(y) = stack.pop() {
        for n in phi_neighbors(y) {
            if let Some(i) = window.index(n) {
                if !reach[i] && !w.contains(n) {
                    reach[i] = true;
                    stack.push(n);
                }
            }
        }
    }
    Ok(window.sites().filter(|&s| !w.contains(s) && !reach[window.index(s).expect("in window")]).collect())
}

/// Which vacancy set the cluster-event probability charges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbabilityMode {
    /// `c^|W| (1-c)^|∂W|`, border sites only.
    Paper,
    /// `c^|W| (1-c)^|N(W)|`, the probability that the origin cluster is exactly `W`.
    Exact,
}

impl std::str::FromStr for ProbabilityMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "paper" => Ok(ProbabilityMode::Paper),
            "exact" => Ok(ProbabilityMode::Exact),
            other => Err(format!("unknown mode {other:?}, expected paper or exact")),
        }
    }
}

/// Sizes that determine a cluster's event probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ClusterShape {
    pub size: usize,
    pub border: usize,
    pub closure: usize,
}

impl ClusterShape {
    pub fn probability(self, c: f64, mode: ProbabilityMode) -> f64 {
        let vacant = match mode {
            ProbabilityMode::Paper => self.border,
            ProbabilityMode::Exact => self.closure,
        };
        c.powi(self.size as i32) * (1.0 - c).powi(vacant as i32)
    }
}

pub fn cluster_event_probability(w: &Cluster, border: &BorderCycle, c: f64, mode: ProbabilityMode) -> f64 {
    ClusterShape { size: w.len(), border: border.len(), closure: vacant_closure(w).len() }.probability(c, mode)
}

/// Brute-force border: vacant neighbours with an escape path that avoids
/// `W` and every other vacant neighbour.
#[cfg(test)]
pub(crate) fn border_oracle(w: &Cluster, window: Window) -> Vec<Site> {
    let closure = vacant_closure(w);
    let mut out = Vec::new();
    for &z in &closure {
        let mut seen = std::collections::HashSet::from([z]);
        let mut stack = vec![z];
        let mut escapes = false;
        while let Some(y) = stack.pop() {
            if window.is_boundary(y) {
                escapes = true;
                break;
            }
            for n in phi_neighbors(y) {
                if !w.contains(n) && !closure.contains(&n) && seen.insert(n) {
                    stack.push(n);
                }
            }
        }
        if escapes {
            out.push(z);
        }
    }
    out
}
