//! Monte Carlo estimates of the one-arm probability and of origin-cluster
//! sizes. Trial `t` uses replicate `t` of the keyed field, so the tally does
//! not depend on how trials are scheduled.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{check_concentration, FieldError, KeyedField, Occupancy, Window};
use crate::lattice::{phi_neighbors, Site};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum McError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("need at least one trial")]
    NoTrials,
    #[error("half-width {have} too small, need at least {need}")]
    WindowTooSmall { have: u32, need: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QEstimate {
    pub c: f64,
    #[serde(rename = "L")]
    pub l: u32,
    pub trials: u64,
    pub hits: u64,
    pub q_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub seed: u64,
}

impl QEstimate {
    pub const CSV_HEADER: &'static str = "c,L,trials,q_hat,ci_low,ci_high,seed";

    pub fn csv_row(&self) -> String {
        format!("{},{},{},{},{},{},{}", self.c, self.l, self.trials, self.q_hat, self.ci_low, self.ci_high, self.seed)
    }
}

/// Wilson score interval for `hits` successes in `trials`.
pub fn wilson(hits: u64, trials: u64, z: f64) -> (f64, f64) {
    let n = trials as f64;
    let p = hits as f64 / n;
    let z2 = z * z;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / (1.0 + z2 / n);
    let lo = if hits == 0 { 0.0 } else { (centre - half).clamp(0.0, p) };
    let hi = if hits == trials { 1.0 } else { (centre + half).clamp(p, 1.0) };
    (lo, hi)
}

/// Reusable visited marks; bumping the stamp clears them in O(1).
struct Marks {
    stamp: u32,
    seen: Vec<u32>,
    queue: VecDeque<Site>,
}

impl Marks {
    fn new(window: Window) -> Self {
        Marks { stamp: 0, seen: vec![0; window.len()], queue: VecDeque::new() }
    }

    fn reset(&mut self) {
        self.stamp += 1;
        if self.stamp == u32::MAX {
            self.seen.fill(0);
            self.stamp = 1;
        }
        self.queue.clear();
    }
}

/// Breadth-first search from the origin that stops once the cluster touches
/// the window boundary or grows past `cap` sites. Returns the number of sites
/// found and whether the boundary was reached.
fn explore(field: &KeyedField, marks: &mut Marks, cap: usize) -> (usize, bool) {
    marks.reset();
    let window = field.window;
    if !field.is_occupied(Site::ORIGIN) {
        return (0, false);
    }
    let stamp = marks.stamp;
    marks.seen[window.index(Site::ORIGIN).expect("origin")] = stamp;
    marks.queue.push_back(Site::ORIGIN);
    let mut size = 0;
    while let Some(y) = marks.queue.pop_front() {
        size += 1;
        if window.is_boundary(y) {
            return (size, true);
        }
        if size > cap {
            return (size, false);
        }
        for n in phi_neighbors(y) {
            let i = window.index(n).expect("interior site neighbours stay inside");
            if marks.seen[i] != stamp && field.is_occupied(n) {
                marks.seen[i] = stamp;
                marks.queue.push_back(n);
            }
        }
    }
    (size, false)
}

fn count_trials<T: Send, R: Send>(
    trials: u64,
    init: impl Fn() -> T + Sync + Send,
    run: impl Fn(&mut T, u64) -> R + Sync + Send,
    mut fold: impl FnMut(R),
) {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let results: Vec<R> = (0..trials).into_par_iter().map_init(&init, |st, t| run(st, t)).collect();
        results.into_iter().for_each(&mut fold);
    }
    #[cfg(not(feature = "parallel"))]
    {
        let mut st = init();
        for t in 0..trials {
            fold(run(&mut st, t));
        }
    }
}

/// Fraction of trials in which the origin's cluster reaches the boundary of
/// the window of half-width `l`.
pub fn estimate_q(c: f64, l: u32, trials: u64, seed: u64) -> Result<QEstimate, McError> {
    let c = check_concentration(c)?;
    if trials == 0 {
        return Err(McError::NoTrials);
    }
    if l < 2 {
        return Err(McError::WindowTooSmall { have: l, need: 2 });
    }
    let window = Window::new(l)?;
    let mut hits = 0u64;
    count_trials(
        trials,
        || Marks::new(window),
        |marks, t| {
            let field = KeyedField { window, c, seed, replicate: t };
            explore(&field, marks, usize::MAX).1
        },
        |hit| hits += hit as u64,
    );
    let (ci_low, ci_high) = wilson(hits, trials, Z95);
    Ok(QEstimate { c, l, trials, hits, q_hat: hits as f64 / trials as f64, ci_low, ci_high, seed })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub c: f64,
    #[serde(rename = "L")]
    pub l: u32,
    pub trials: u64,
    pub seed: u64,
    pub k: usize,
    /// `counts[s]` trials had an origin cluster of exactly `s` sites; `s = 0`
    /// means the origin was vacant.
    pub counts: Vec<u64>,
    /// Trials with an origin cluster larger than `k`.
    pub overflow: u64,
}

impl Histogram {
    pub fn frequency(&self, size: usize) -> f64 {
        self.counts[size] as f64 / self.trials as f64
    }

    pub fn overflow_frequency(&self) -> f64 {
        self.overflow as f64 / self.trials as f64
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.overflow
    }
}

/// Half-width needed so no cluster of `k` sites around the origin reaches the
/// boundary: each bond moves a cell coordinate by at most one.
pub fn histogram_half_width(k: usize) -> u32 {
    k.max(1) as u32
}

/// Origin-cluster size distribution, exact for sizes up to `k`.
pub fn origin_cluster_histogram(c: f64, l: u32, trials: u64, seed: u64, k: usize) -> Result<Histogram, McError> {
    let c = check_concentration(c)?;
    if trials == 0 {
        return Err(McError::NoTrials);
    }
    let need = histogram_half_width(k);
    if l < need {
        return Err(McError::WindowTooSmall { have: l, need });
    }
    let window = Window::new(l)?;
    let mut counts = vec![0u64; k + 1];
    let mut overflow = 0u64;
    count_trials(
        trials,
        || Marks::new(window),
        |marks, t| {
            let field = KeyedField { window, c, seed, replicate: t };
            let (size, touched) = explore(&field, marks, k);
            if touched || size > k {
                None
            } else {
                Some(size)
            }
        },
        |r| match r {
            Some(s) => counts[s] += 1,
            None => overflow += 1,
        },
    );
    Ok(Histogram { c, l, trials, seed, k, counts, overflow })
}
