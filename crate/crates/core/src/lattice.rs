//! The honeycomb lattice, its 12-neighbour matching lattice, and the planar
//! immersion used for winding tests.
//!
//! Sites live in the chart `(u, v, s)`: `(u, v)` is the integer cell and `s`
//! the sublattice. Bonds are fixed as
//! `(u, v, 0) ~ (u, v, 1), (u - 1, v, 1), (u, v - 1, 1)`.
//!
//! Directions around a site are numbered `1..=12` clockwise, starting at the
//! bond that points straight up from a sublattice-0 site. Directions 1, 5, 9
//! are the three bonds, 3, 7, 11 the sites opposite across a hexagon, and the
//! even directions are the six same-sublattice second neighbours. A
//! sublattice-1 site sees the point-inverted picture, so the same numbering
//! rules (bonds at 1, 5, 9, rotation by `+4`) hold on both sublattices.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LatticeError {
    #[error("{y} is not a matching-lattice neighbour of {x}")]
    NotAdjacent { x: Site, y: Site },
    #[error("direction index {0} outside 1..=12")]
    BadDirection(i64),
    #[error("sublattice tag {0} is not 0 or 1")]
    BadSublattice(i32),
}

/// A vertex of the honeycomb lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "[i32; 3]", try_from = "[i32; 3]")]
pub struct Site {
    pub u: i32,
    pub v: i32,
    pub s: u8,
}

impl Site {
    pub const ORIGIN: Site = Site { u: 0, v: 0, s: 0 };

    pub const fn new(u: i32, v: i32, s: u8) -> Self {
        Site { u, v, s: s & 1 }
    }

    /// Translate by a whole number of cells.
    pub const fn translate(self, du: i32, dv: i32) -> Self {
        Site { u: self.u + du, v: self.v + dv, s: self.s }
    }

    /// Exact planar coordinates scaled to integers: `x = X * sqrt(3)/2`,
    /// `y = Y / 2`. Orientation tests on these are exact.
    pub const fn scaled_coords(self) -> (i64, i64) {
        let x = self.u as i64 - self.v as i64;
        let y = 3 * (self.u as i64 + self.v as i64) + 2 * self.s as i64;
        (x, y)
    }
}

impl From<Site> for [i32; 3] {
    fn from(s: Site) -> Self {
        [s.u, s.v, s.s as i32]
    }
}

impl TryFrom<[i32; 3]> for Site {
    type Error = LatticeError;

    fn try_from(t: [i32; 3]) -> Result<Self, Self::Error> {
        match t[2] {
            0 | 1 => Ok(Site::new(t[0], t[1], t[2] as u8)),
            s => Err(LatticeError::BadSublattice(s)),
        }
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.u, self.v, self.s)
    }
}

/// One of the twelve matching-lattice directions, stored 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub struct Direction(u8);

impl Direction {
    pub const BONDS: [Direction; 3] = [Direction(1), Direction(5), Direction(9)];

    pub fn new(idx: i64) -> Result<Self, LatticeError> {
        if (1..=12).contains(&idx) {
            Ok(Direction(idx as u8))
        } else {
            Err(LatticeError::BadDirection(idx))
        }
    }

    /// Wraps any integer onto `1..=12`.
    pub fn wrapping(idx: i64) -> Self {
        Direction(((idx - 1).rem_euclid(12) + 1) as u8)
    }

    pub fn all() -> impl Iterator<Item = Direction> + Clone {
        (1..=12).map(Direction)
    }

    /// 1-based index.
    pub const fn index(self) -> usize {
        self.0 as usize
    }

    /// 0-based index, for table lookups.
    pub const fn slot(self) -> usize {
        self.0 as usize - 1
    }

    pub const fn is_bond(self) -> bool {
        self.0 % 4 == 1
    }

    /// Image under `k` clockwise rotations by 2π/3.
    pub fn rotated(self, k: i64) -> Self {
        Direction::wrapping(self.0 as i64 + 4 * k)
    }

    /// Direction of `x` as seen from `x`'s neighbour in direction `self`.
    /// Odd directions cross to the other sublattice and keep their index;
    /// even ones stay on the sublattice and flip by half a turn.
    pub fn reverse(self) -> Self {
        if self.0 % 2 == 1 {
            self
        } else {
            self.plus(6)
        }
    }

    fn plus(self, k: i64) -> Self {
        Direction::wrapping(self.0 as i64 + k)
    }

    /// Clockwise angle from "up" in the picture of a sublattice-0 site.
    pub fn angle(self) -> f64 {
        (self.0 as f64 - 1.0) * std::f64::consts::PI / 6.0
    }
}

impl From<Direction> for u8 {
    fn from(d: Direction) -> u8 {
        d.0
    }
}

impl TryFrom<u8> for Direction {
    type Error = LatticeError;

    fn try_from(x: u8) -> Result<Self, Self::Error> {
        Direction::new(x as i64)
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// `(du, dv, crosses_sublattice)` for each direction, seen from sublattice 0.
const OFFSETS: [(i32, i32, bool); 12] = [
    (0, 0, true),
    (1, 0, false),
    (1, -1, true),
    (1, -1, false),
    (0, -1, true),
    (0, -1, false),
    (-1, -1, true),
    (-1, 0, false),
    (-1, 0, true),
    (-1, 1, false),
    (-1, 1, true),
    (0, 1, false),
];

/// The neighbour of `site` in direction `dir` on the matching lattice.
pub fn neighbor(site: Site, dir: Direction) -> Site {
    let (du, dv, cross) = OFFSETS[dir.slot()];
    let sign = if site.s == 0 { 1 } else { -1 };
    Site {
        u: site.u + sign * du,
        v: site.v + sign * dv,
        s: site.s ^ cross as u8,
    }
}

/// The three bond neighbours, in direction order 1, 5, 9.
pub fn phi_neighbors(site: Site) -> [Site; 3] {
    Direction::BONDS.map(|d| neighbor(site, d))
}

/// The twelve matching-lattice neighbours; entry `d - 1` is direction `d`.
pub fn phi_star_neighbors(site: Site) -> [Site; 12] {
    std::array::from_fn(|i| neighbor(site, Direction(i as u8 + 1)))
}

pub fn direction_between(x: Site, y: Site) -> Result<Direction, LatticeError> {
    let sign = if x.s == 0 { 1 } else { -1 };
    let du = sign * (y.u - x.u);
    let dv = sign * (y.v - x.v);
    let cross = x.s != y.s;
    OFFSETS
        .iter()
        .position(|&o| o == (du, dv, cross))
        .map(|i| Direction(i as u8 + 1))
        .ok_or(LatticeError::NotAdjacent { x, y })
}

pub fn are_phi_adjacent(x: Site, y: Site) -> bool {
    matches!(direction_between(x, y), Ok(d) if d.is_bond())
}

pub fn are_phi_star_adjacent(x: Site, y: Site) -> bool {
    direction_between(x, y).is_ok()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanarPoint {
    pub x: f64,
    pub y: f64,
}

impl PlanarPoint {
    pub fn distance(self, other: PlanarPoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

const HALF_SQRT3: f64 = 0.866_025_403_784_438_6;

/// Cell periods of the immersion, unit bond length, bonds of direction 1 vertical.
pub const E1: PlanarPoint = PlanarPoint { x: HALF_SQRT3, y: 1.5 };
pub const E2: PlanarPoint = PlanarPoint { x: -HALF_SQRT3, y: 1.5 };

pub fn immerse(site: Site) -> PlanarPoint {
    let (x, y) = site.scaled_coords();
    PlanarPoint { x: x as f64 * HALF_SQRT3, y: y as f64 * 0.5 }
}

/// Inverse of [`immerse`]: the site at `p`, if any lies within 1e-6.
pub fn locate(p: PlanarPoint) -> Option<Site> {
    let diff = p.x / HALF_SQRT3;
    for s in 0..2u8 {
        let sum = (p.y - s as f64) / 1.5;
        let u = ((sum + diff) / 2.0).round() as i32;
        let v = ((sum - diff) / 2.0).round() as i32;
        let site = Site::new(u, v, s);
        if immerse(site).distance(p) < 1e-6 {
            return Some(site);
        }
    }
    None
}

/// Rotate `site` clockwise by 2π/3 about `center`.
pub fn rotate_third(site: Site, center: Site) -> Site {
    let c = immerse(center);
    let p = immerse(site);
    let (dx, dy) = (p.x - c.x, p.y - c.y);
    // clockwise by 120 degrees
    let (sin, cos) = (-(2.0 * std::f64::consts::PI / 3.0)).sin_cos();
    let q = PlanarPoint { x: c.x + dx * cos - dy * sin, y: c.y + dx * sin + dy * cos };
    locate(q).expect("honeycomb is symmetric under 2π/3 rotation about a vertex")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn window(l: i32) -> impl Iterator<Item = Site> {
        (-l..=l).flat_map(move |u| (-l..=l).flat_map(move |v| [Site::new(u, v, 0), Site::new(u, v, 1)]))
    }

    #[test]
    fn bonds_match_chart() {
        let a = Site::new(3, -2, 0);
        assert_eq!(
            phi_neighbors(a),
            [Site::new(3, -2, 1), Site::new(3, -3, 1), Site::new(2, -2, 1)]
        );
    }

    #[test]
    fn regularity_and_symmetry_on_window() {
        for x in window(50) {
            let nb = phi_neighbors(x);
            let star = phi_star_neighbors(x);
            let mut uniq = star.to_vec();
            uniq.sort();
            uniq.dedup();
            assert_eq!(uniq.len(), 12);
            assert!(!star.contains(&x));
            for (k, d) in Direction::BONDS.iter().enumerate() {
                assert_eq!(star[d.slot()], nb[k]);
                assert!(phi_neighbors(nb[k]).contains(&x));
            }
            for y in star {
                assert!(phi_star_neighbors(y).contains(&x));
            }
        }
    }

    #[test]
    fn translation_invariance() {
        let x = Site::new(1, 4, 1);
        let t = x.translate(-7, 3);
        for (a, b) in phi_star_neighbors(x).iter().zip(phi_star_neighbors(t)) {
            assert_eq!(a.translate(-7, 3), b);
        }
    }

    #[test]
    fn reverse_direction_involution() {
        // frozen from the offset table: odd directions are fixed, even ones shift by 6
        let golden = [1, 8, 3, 10, 5, 12, 7, 2, 9, 4, 11, 6];
        for x in [Site::ORIGIN, Site::new(2, -1, 1)] {
            for d in Direction::all() {
                let y = neighbor(x, d);
                let back = direction_between(y, x).unwrap();
                assert_eq!(back.index(), golden[d.slot()]);
                assert_eq!(back, d.reverse());
            }
        }
    }

    #[test]
    fn direction_round_trip_and_errors() {
        let x = Site::new(-2, 5, 1);
        let y = phi_star_neighbors(x)[6];
        assert_eq!(direction_between(x, y).unwrap().index(), 7);
        assert!(matches!(direction_between(x, x), Err(LatticeError::NotAdjacent { .. })));
        assert!(direction_between(x, x.translate(2, 0)).is_err());
        assert!(direction_between(x, x.translate(0, -3)).is_err());
    }

    #[test]
    fn immersion_geometry() {
        let x = Site::new(2, -3, 0);
        let p = immerse(x);
        for d in Direction::all() {
            let dist = immerse(neighbor(x, d)).distance(p);
            let expect = match d.index() % 4 {
                1 => 1.0,
                3 => 2.0,
                _ => 3f64.sqrt(),
            };
            assert!((dist - expect).abs() < 1e-12, "direction {d}: {dist}");
        }
        let q = immerse(x.translate(3, -2));
        assert!((q.x - (p.x + 3.0 * E1.x - 2.0 * E2.x)).abs() < 1e-12);
        assert!((q.y - (p.y + 3.0 * E1.y - 2.0 * E2.y)).abs() < 1e-12);
    }

    #[test]
    fn directions_are_clockwise_angles() {
        for x in [Site::ORIGIN, Site::new(0, 0, 1)] {
            let p = immerse(x);
            for d in Direction::all() {
                let q = immerse(neighbor(x, d));
                let mut ang = (q.x - p.x).atan2(q.y - p.y);
                if x.s == 1 {
                    ang += std::f64::consts::PI;
                }
                let diff = (ang - d.angle()).rem_euclid(2.0 * std::f64::consts::PI);
                assert!(diff < 1e-9 || (2.0 * std::f64::consts::PI - diff) < 1e-9);
            }
        }
    }

    #[test]
    fn immersion_injective_and_invertible() {
        let mut seen = std::collections::HashSet::new();
        for x in window(20) {
            let p = immerse(x);
            assert!(seen.insert(((p.x * 1e6).round() as i64, (p.y * 1e6).round() as i64)));
            assert_eq!(locate(p), Some(x));
        }
    }

    #[test]
    fn rotation_shifts_directions_by_four() {
        for x in window(6) {
            for d in Direction::all() {
                let y = neighbor(x, d);
                assert_eq!(rotate_third(y, x), neighbor(x, d.rotated(1)));
            }
        }
    }

    fn reflect(p: PlanarPoint, a: PlanarPoint, b: PlanarPoint) -> PlanarPoint {
        let (dx, dy) = (b.x - a.x, b.y - a.y);
        let n = dx.hypot(dy);
        let (ux, uy) = (dx / n, dy / n);
        let (px, py) = (p.x - a.x, p.y - a.y);
        let t = px * ux + py * uy;
        PlanarPoint { x: a.x + 2.0 * t * ux - px, y: a.y + 2.0 * t * uy - py }
    }

    #[test]
    fn reflections_permute_directions() {
        // mirror through directions (1,7), (5,11), (3,9): j -> 14-j, 10-j, 18-j
        for x in [Site::ORIGIN, Site::new(1, 2, 1)] {
            for (axis, total) in [(1, 14), (5, 10), (3, 18)] {
                let a = immerse(x);
                let b = immerse(neighbor(x, Direction::new(axis).unwrap()));
                for d in Direction::all() {
                    let img = locate(reflect(immerse(neighbor(x, d)), a, b)).unwrap();
                    let want = Direction::wrapping(total - d.index() as i64);
                    assert_eq!(img, neighbor(x, want));
                }
            }
        }
    }

    #[test]
    fn site_serializes_as_triple() {
        let s = Site::new(-1, 2, 1);
        assert_eq!(serde_json::to_string(&s).unwrap(), "[-1,2,1]");
        assert_eq!(serde_json::from_str::<Site>("[-1,2,1]").unwrap(), s);
        assert!(serde_json::from_str::<Site>("[0,0,2]").is_err());
    }
}
