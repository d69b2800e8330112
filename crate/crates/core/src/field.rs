//! Finite windows of the Bernoulli site field.

use bitvec::vec::BitVec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::Site;
use crate::rng::site_uniform;

pub const CONFIG_SCHEMA: &str = "hexperc-config/1";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FieldError {
    #[error("concentration {0} outside [0, 1]")]
    InvalidConcentration(f64),
    #[error("window half-width must be positive")]
    EmptyWindow,
    #[error("site {0} lies outside the window")]
    OutsideWindow(Site),
    #[error("unsupported configuration schema {0:?}")]
    Schema(String),
}

pub fn check_concentration(c: f64) -> Result<f64, FieldError> {
    if (0.0..=1.0).contains(&c) {
        Ok(c)
    } else {
        Err(FieldError::InvalidConcentration(c))
    }
}

/// All sites with `|u| <= L` and `|v| <= L`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Window {
    half_width: u32,
}

impl Window {
    pub fn new(half_width: u32) -> Result<Self, FieldError> {
        if half_width == 0 {
            return Err(FieldError::EmptyWindow);
        }
        Ok(Window { half_width })
    }

    pub fn half_width(self) -> u32 {
        self.half_width
    }

    fn side(self) -> usize {
        2 * self.half_width as usize + 1
    }

    pub fn len(self) -> usize {
        2 * self.side() * self.side()
    }

    pub fn is_empty(self) -> bool {
        false
    }

    pub fn contains(self, site: Site) -> bool {
        let l = self.half_width as i32;
        site.u.abs() <= l && site.v.abs() <= l
    }

    pub fn is_boundary(self, site: Site) -> bool {
        let l = self.half_width as i32;
        self.contains(site) && (site.u.abs() == l || site.v.abs() == l)
    }

    /// Dense index in `0..len()`, row-major in `(u, v, s)`.
    pub fn index(self, site: Site) -> Option<usize> {
        if !self.contains(site) {
            return None;
        }
        let l = self.half_width as i32;
        let (u, v) = ((site.u + l) as usize, (site.v + l) as usize);
        Some((u * self.side() + v) * 2 + site.s as usize)
    }

    pub fn site_at(self, index: usize) -> Site {
        let l = self.half_width as i32;
        let s = (index % 2) as u8;
        let cell = index / 2;
        let u = (cell / self.side()) as i32 - l;
        let v = (cell % self.side()) as i32 - l;
        Site::new(u, v, s)
    }

    pub fn sites(self) -> impl Iterator<Item = Site> {
        (0..self.len()).map(move |i| self.site_at(i))
    }

    pub fn boundary_sites(self) -> impl Iterator<Item = Site> {
        self.sites().filter(move |&s| self.is_boundary(s))
    }
}

/// Read access to an occupation pattern restricted to a window.
pub trait Occupancy {
    fn window(&self) -> Window;
    /// Occupation of a site inside the window.
    fn is_occupied(&self, site: Site) -> bool;
}

/// A materialised sample of the field on a window.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    window: Window,
    c: f64,
    seed: u64,
    replicate: u64,
    occupied: BitVec,
}

impl Configuration {
    /// Builds a configuration with exactly the listed sites occupied.
    pub fn from_sites(window: Window, sites: impl IntoIterator<Item = Site>) -> Result<Self, FieldError> {
        let mut occupied = BitVec::repeat(false, window.len());
        for s in sites {
            let i = window.index(s).ok_or(FieldError::OutsideWindow(s))?;
            occupied.set(i, true);
        }
        let c = occupied.count_ones() as f64 / window.len() as f64;
        Ok(Configuration { window, c, seed: 0, replicate: 0, occupied })
    }

    pub fn concentration(&self) -> f64 {
        self.c
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn replicate(&self) -> u64 {
        self.replicate
    }

    pub fn count_occupied(&self) -> usize {
        self.occupied.count_ones()
    }

    pub fn occupied_sites(&self) -> impl Iterator<Item = Site> + '_ {
        self.occupied.iter_ones().map(|i| self.window.site_at(i))
    }

    pub fn to_document(&self) -> ConfigDocument {
        ConfigDocument {
            schema: CONFIG_SCHEMA.to_string(),
            l: self.window.half_width,
            c: self.c,
            seed: self.seed,
            replicate: self.replicate,
            occupied: self.occupied_sites().collect(),
        }
    }

    pub fn from_document(doc: &ConfigDocument) -> Result<Self, FieldError> {
        if doc.schema != CONFIG_SCHEMA {
            return Err(FieldError::Schema(doc.schema.clone()));
        }
        let window = Window::new(doc.l)?;
        let mut cfg = Configuration::from_sites(window, doc.occupied.iter().copied())?;
        cfg.c = check_concentration(doc.c)?;
        cfg.seed = doc.seed;
        cfg.replicate = doc.replicate;
        Ok(cfg)
    }
}

impl Occupancy for Configuration {
    fn window(&self) -> Window {
        self.window
    }

    fn is_occupied(&self, site: Site) -> bool {
        self.window.index(site).is_some_and(|i| self.occupied[i])
    }
}

/// The same field as [`sample_replicate`], evaluated site by site on demand.
#[derive(Debug, Clone, Copy)]
pub struct KeyedField {
    pub window: Window,
    pub c: f64,
    pub seed: u64,
    pub replicate: u64,
}

impl KeyedField {
    pub fn new(window: Window, c: f64, seed: u64, replicate: u64) -> Result<Self, FieldError> {
        Ok(KeyedField { window, c: check_concentration(c)?, seed, replicate })
    }
}

impl Occupancy for KeyedField {
    fn window(&self) -> Window {
        self.window
    }

    #[inline]
    fn is_occupied(&self, site: Site) -> bool {
        self.window.contains(site) && site_uniform(self.seed, self.replicate, site) < self.c
    }
}

pub fn sample(window: Window, c: f64, seed: u64) -> Result<Configuration, FieldError> {
    sample_replicate(window, c, seed, 0)
}

pub fn sample_replicate(window: Window, c: f64, seed: u64, replicate: u64) -> Result<Configuration, FieldError> {
    let field = KeyedField::new(window, c, seed, replicate)?;
    let occupied = window.sites().map(|s| field.is_occupied(s)).collect();
    Ok(Configuration { window, c, seed, replicate, occupied })
}

/// `Pr{M ⊂ W̃} = c^|M|` for a set of `size` distinct sites.
pub fn subset_probability(size: usize, c: f64) -> Result<f64, FieldError> {
    Ok(check_concentration(c)?.powi(size as i32))
}

/// Versioned JSON form of a configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigDocument {
    pub schema: String,
    #[serde(rename = "L")]
    pub l: u32,
    pub c: f64,
    pub seed: u64,
    #[serde(default)]
    pub replicate: u64,
    pub occupied: Vec<Site>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::phi_neighbors;

    #[test]
    fn window_indexing() {
        let w = Window::new(3).unwrap();
        assert_eq!(w.len(), 98);
        for i in 0..w.len() {
            assert_eq!(w.index(w.site_at(i)), Some(i));
        }
        assert!(w.contains(Site::ORIGIN));
        assert!(w.boundary_sites().count() > 0);
        assert!(w.is_boundary(Site::new(3, 0, 1)));
        assert!(!w.is_boundary(Site::new(2, -2, 0)));
        assert_eq!(w.index(Site::new(4, 0, 0)), None);
        assert!(Window::new(0).is_err());
    }

    #[test]
    fn extreme_concentrations() {
        let w = Window::new(5).unwrap();
        assert_eq!(sample(w, 0.0, 1).unwrap().count_occupied(), 0);
        assert_eq!(sample(w, 1.0, 1).unwrap().count_occupied(), w.len());
        assert_eq!(sample(w, 1.5, 1), Err(FieldError::InvalidConcentration(1.5)));
        assert!(sample(w, -0.1, 1).is_err());
    }

    #[test]
    fn reproducible_and_window_consistent() {
        let small = Window::new(4).unwrap();
        let big = Window::new(9).unwrap();
        let a = sample(small, 0.4, 99).unwrap();
        assert_eq!(a, sample(small, 0.4, 99).unwrap());
        assert_ne!(a, sample(small, 0.4, 100).unwrap());
        let b = sample(big, 0.4, 99).unwrap();
        for s in small.sites() {
            assert_eq!(a.is_occupied(s), b.is_occupied(s));
        }
    }

    #[test]
    fn mean_occupancy_matches_concentration() {
        let w = Window::new(32).unwrap();
        let samples = 100_000u64;
        let hits: u64 = (0..samples)
            .map(|r| {
                let f = KeyedField::new(w, 0.5, 7, r).unwrap();
                w.sites().filter(|&s| f.is_occupied(s)).count() as u64
            })
            .sum();
        let n = (w.len() as u64 * samples) as f64;
        let sigma = 0.5 / n.sqrt();
        assert!((hits as f64 / n - 0.5).abs() < 3.0 * sigma);
    }

    #[test]
    fn subset_probability_values() {
        assert_eq!(subset_probability(0, 0.37).unwrap(), 1.0);
        assert_eq!(subset_probability(3, 0.5).unwrap(), 0.125);
        assert!(subset_probability(2, 2.0).is_err());

        let w = Window::new(2).unwrap();
        let x = Site::ORIGIN;
        let y = phi_neighbors(x)[1];
        let n = 1_000_000u64;
        let (mut both, mut fx, mut fy) = (0u64, 0u64, 0u64);
        for r in 0..n {
            let f = KeyedField::new(w, 0.3, 5, r).unwrap();
            let (ox, oy) = (f.is_occupied(x), f.is_occupied(y));
            both += (ox && oy) as u64;
            fx += ox as u64;
            fy += oy as u64;
        }
        let p = subset_probability(2, 0.3).unwrap();
        assert!((p - 0.09).abs() < 1e-15);
        let freq = both as f64 / n as f64;
        assert!((freq - p).abs() < 3.0 * (p * (1.0 - p) / n as f64).sqrt());
        // pair correlation vanishes
        let prod = (fx as f64 / n as f64) * (fy as f64 / n as f64);
        assert!((freq - prod).abs() < 4.0 * (p * (1.0 - p) / n as f64).sqrt());
    }

    #[test]
    fn document_round_trip() {
        let w = Window::new(3).unwrap();
        let cfg = sample(w, 0.35, 11).unwrap();
        let doc = cfg.to_document();
        let text = serde_json::to_string(&doc).unwrap();
        assert!(text.starts_with("{\"schema\":\"hexperc-config/1\",\"L\":3"));
        let back: ConfigDocument = serde_json::from_str(&text).unwrap();
        assert_eq!(Configuration::from_document(&back).unwrap(), cfg);
    }
}
