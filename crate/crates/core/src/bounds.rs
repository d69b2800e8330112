//! Probability bounds built on the Perron root of the connection matrix: the
//! threshold bound `c* <= 1 - 1/lambda0`, the lower bound on the percolation
//! probability, the inequality `c - Q(c) <= sum (1 - c)^n r_n`, and partial
//! sums of the cluster decomposition.

use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::census::{CensusTable, RnRow};
use crate::clusters::ProbabilityMode;
use crate::connmat::ConnMatrix;
use crate::field::{check_concentration, FieldError};
use crate::mc::QEstimate;
use crate::spectral::{max_eig, SpectralError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundsError {
    #[error("eigenvalue {0} must exceed 1")]
    InvalidEigenvalue(f64),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("constant C = {0} must be at least 1")]
    InvalidConstant(f64),
    #[error("tail majorant {tail} exceeds {threshold}; the check would be vacuous")]
    TailDominates { tail: f64, threshold: f64 },
    #[error("census covers sizes up to {have}, need {need}")]
    CensusTooSmall { have: usize, need: usize },
    #[error("bad grid {0:?}, expected start:stop:step")]
    BadGrid(String),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("Perron vector has a zero component")]
    Reducible,
}

/// `1 - 1/lambda0`.
pub fn threshold_upper_bound(lambda0: f64) -> Result<f64, BoundsError> {
    if !(lambda0 > 1.0) || !lambda0.is_finite() {
        return Err(BoundsError::InvalidEigenvalue(lambda0));
    }
    Ok(1.0 - 1.0 / lambda0)
}

/// Where the series was cut off.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Truncation {
    ClosedForm,
    /// Summed over `n = 3..=N`.
    Terms(usize),
}

impl std::fmt::Display for Truncation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Truncation::ClosedForm => f.write_str("closed-form"),
            Truncation::Terms(n) => write!(f, "{n}"),
        }
    }
}

impl Serialize for Truncation {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Truncation::ClosedForm => s.serialize_str("closed-form"),
            Truncation::Terms(n) => s.serialize_u64(*n as u64),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub c: f64,
    /// Present only when the series converges.
    pub q_lower: Option<f64>,
    /// `sum_{n>=3} (n - 2) x^{n-2}` with `x = (1 - c) lambda0`.
    pub series_value: f64,
    pub truncation_n: Truncation,
    /// `x < 1`.
    pub valid: bool,
    /// `q_lower > 0`.
    pub informative: bool,
    pub lambda0: f64,
    pub n_star: u32,
    #[serde(rename = "C")]
    pub c_constant: f64,
}

impl BoundReport {
    pub const CSV_HEADER: &'static str = "c,q_lower,valid,truncation_n";

    pub fn csv_row(&self) -> String {
        let q = self.q_lower.map(|q| q.to_string()).unwrap_or_default();
        format!("{},{},{},{}", self.c, q, self.valid, self.truncation_n)
    }
}

/// `sum_{k=1}^{m} k x^k`, or the full series `x / (1 - x)^2` when `m` is `None`.
pub fn weighted_geometric(x: f64, m: Option<usize>) -> f64 {
    match m {
        None => x / ((1.0 - x) * (1.0 - x)),
        Some(m) => {
            let (mut sum, mut pow) = (0.0, 1.0);
            for k in 1..=m {
                pow *= x;
                sum += k as f64 * pow;
            }
            sum
        }
    }
}

/// `Q(c) >= c - n* C (1 - c)^2 sum_{n>=3} (n - 2) [(1 - c) lambda0]^{n-2}`.
/// `truncation = Some(N)` sums `n = 3..=N`; `None` uses the closed form.
pub fn q_lower_bound(
    c: f64,
    lambda0: f64,
    n_star: u32,
    c_constant: f64,
    truncation: Option<usize>,
) -> Result<BoundReport, BoundsError> {
    let c = check_concentration(c)?;
    if !(c_constant >= 1.0) {
        return Err(BoundsError::InvalidConstant(c_constant));
    }
    let x = (1.0 - c) * lambda0;
    let valid = x < 1.0;
    let series_value = match truncation {
        None if !valid => f64::INFINITY,
        None => weighted_geometric(x, None),
        Some(n) => weighted_geometric(x, Some(n.saturating_sub(2))),
    };
    let q = c - n_star as f64 * c_constant * (1.0 - c) * (1.0 - c) * series_value;
    let q_lower = valid.then_some(q);
    Ok(BoundReport {
        c,
        q_lower,
        series_value,
        truncation_n: truncation.map_or(Truncation::ClosedForm, Truncation::Terms),
        valid,
        informative: valid && q > 0.0,
        lambda0,
        n_star,
        c_constant,
    })
}

/// Parses `start:stop:step` into an inclusive grid.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, BoundsError> {
    let bad = || BoundsError::BadGrid(spec.to_string());
    let parts: Vec<f64> = spec.split(':').map(|p| p.trim().parse::<f64>().map_err(|_| bad())).collect::<Result<_, _>>()?;
    let [start, stop, step] = parts[..] else { return Err(bad()) };
    if !(step > 0.0) || !(stop >= start) || !start.is_finite() || !stop.is_finite() {
        return Err(bad());
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    if count > 1_000_000 {
        return Err(bad());
    }
    // round away float noise such as 0.8600000000000001
    Ok((0..count).map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12).collect())
}

/// Growth envelope `g(a; m) <= c_env lambda0^m` for every direction `a`,
/// from the Perron vector `v` of the matrix: `S^m 1 <= S^m v / min v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub lambda0: f64,
    pub c_env: f64,
}

pub fn way_count_envelope(s: &ConnMatrix) -> Result<Envelope, BoundsError> {
    let e = max_eig(&s.to_nonneg(), 1e-14)?;
    let (lo, hi) = e.vector.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    if !(lo > 0.0) {
        return Err(BoundsError::Reducible);
    }
    // small relative padding covers the iteration residual
    Ok(Envelope { lambda0: e.value * (1.0 + 1e-9), c_env: hi / lo * (1.0 + 1e-9) })
}

/// `sum_{m>=start} (m - 1) x^m` for `0 <= x < 1`.
fn shifted_tail(x: f64, start: usize) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let s = start as f64;
    let xs = x.powi(start as i32);
    // sum m x^m = x^s (s / (1 - x) + x / (1 - x)^2); sum x^m = x^s / (1 - x)
    xs * (s / (1.0 - x) + x / ((1.0 - x) * (1.0 - x))) - xs / (1.0 - x)
}

/// Default cut-off above which the tail makes [`lemma1_check`] vacuous.
pub const DEFAULT_TAIL_THRESHOLD: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lemma1Report {
    pub c: f64,
    /// `c - ci_high` of the Monte Carlo estimate.
    pub lhs: f64,
    /// `sum_{n <= N} (1 - c)^n r_n` over complete border counts.
    pub truncated: f64,
    pub last_exact_n: usize,
    /// Bound on the remaining terms.
    pub tail: f64,
    pub holds: bool,
    pub margin: f64,
}

/// Checks `c - Q(c) <= sum (1 - c)^n r_n` with the Monte Carlo upper
/// confidence bound standing in for `Q`. Border counts are used up to the
/// longest run of certified lengths; beyond it each `r_n` is replaced by
/// `n* (n - 2) c_env lambda0^{n-1}`.
pub fn lemma1_check(
    c: f64,
    census: &CensusTable,
    q_est: &QEstimate,
    s: &ConnMatrix,
    tail_threshold: f64,
) -> Result<Lemma1Report, BoundsError> {
    let c = check_concentration(c)?;
    let env = way_count_envelope(s)?;
    let rows: Vec<RnRow> = census.rn_rows();
    let mut last_exact_n = 2;
    let mut truncated = 0.0;
    for n in 3.. {
        match rows.iter().find(|r| r.n == n) {
            Some(r) if r.certified => {
                truncated += (1.0 - c).powi(n as i32) * r.r_n as f64;
                last_exact_n = n;
            }
            _ => break,
        }
    }
    let x = (1.0 - c) * env.lambda0;
    let tail = if c == 1.0 {
        0.0
    } else if x >= 1.0 {
        f64::INFINITY
    } else {
        // sum_{n > N} (n - 2) (1 - c)^n lambda0^{n-1} = (1 - c) sum_{m >= N} (m - 1) x^m
        s.n_star() as f64 * env.c_env * (1.0 - c) * shifted_tail(x, last_exact_n)
    };
    if !(tail <= tail_threshold) {
        return Err(BoundsError::TailDominates { tail, threshold: tail_threshold });
    }
    let lhs = c - q_est.ci_high;
    let rhs = truncated + tail;
    Ok(Lemma1Report { c, lhs, truncated, last_exact_n, tail, holds: lhs <= rhs, margin: rhs - lhs })
}

/// `(1 - c) + sum over clusters with |W| <= k of the cluster-event probability`.
pub fn decomposition_partial_sum(c: f64, k: usize, mode: ProbabilityMode, census: &CensusTable) -> Result<f64, BoundsError> {
    let c = check_concentration(c)?;
    if c >= 1.0 {
        return Err(FieldError::InvalidConcentration(c).into());
    }
    if k > census.max_size {
        return Err(BoundsError::CensusTooSmall { have: census.max_size, need: k });
    }
    Ok((1.0 - c) + census.event_mass(c, k, mode))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecompositionRow {
    pub k: usize,
    pub partial_sum: f64,
    /// `1 - partial_sum`.
    pub gap: f64,
}

/// Partial sums for every `k' = 1..=census.max_size`.
pub fn decomposition_table(c: f64, mode: ProbabilityMode, census: &CensusTable) -> Result<Vec<DecompositionRow>, BoundsError> {
    (1..=census.max_size)
        .map(|k| decomposition_partial_sum(c, k, mode, census).map(|s| DecompositionRow { k, partial_sum: s, gap: 1.0 - s }))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::census::{border_census, g_vector};
    use crate::connmat::theorem4_matrix;
    use crate::lattice::Direction;
    use crate::mc::{estimate_q, origin_cluster_histogram};

    fn lambda0() -> f64 {
        3.0 + 2.0 * 3f64.sqrt()
    }

    #[test]
    fn threshold_bound_values() {
        let b = threshold_upper_bound(lambda0()).unwrap();
        let closed = 2.0 * (3.0 - 3f64.sqrt()) / 3.0;
        assert!((b - closed).abs() <= 1e-15);
        assert!((b - 0.845_299_461_6).abs() < 1e-10);
        assert!(threshold_upper_bound(1.0 + 1e-12).unwrap() < 1e-11);
        assert!(matches!(threshold_upper_bound(1.0), Err(BoundsError::InvalidEigenvalue(_))));
        assert!(threshold_upper_bound(f64::NAN).is_err());
    }

    #[test]
    fn q_lower_edge_cases() {
        let r = q_lower_bound(1.0, lambda0(), 7, 1.0, None).unwrap();
        assert_eq!(r.q_lower, Some(1.0));
        let r = q_lower_bound(0.8, lambda0(), 7, 1.0, None).unwrap();
        assert!(!r.valid && r.q_lower.is_none());
        assert!(q_lower_bound(0.9, lambda0(), 7, 0.5, None).is_err());
        assert!(q_lower_bound(1.2, lambda0(), 7, 1.0, None).is_err());
    }

    // frozen from the closed form below and cross-checked against the sum
    const Q_LOWER_099: f64 = 0.989_948_281_065_251_5;

    #[test]
    fn q_lower_at_099() {
        let l = lambda0();
        let x = 0.01 * l;
        let by_hand = 0.99 - 7.0 * 0.01 * 0.01 * x / ((1.0 - x) * (1.0 - x));
        let closed = q_lower_bound(0.99, l, 7, 1.0, None).unwrap();
        let summed = q_lower_bound(0.99, l, 7, 1.0, Some(200)).unwrap();
        assert!((closed.q_lower.unwrap() - by_hand).abs() < 1e-15);
        assert!((closed.q_lower.unwrap() - summed.q_lower.unwrap()).abs() < 1e-12);
        assert!((closed.q_lower.unwrap() - Q_LOWER_099).abs() < 1e-14, "{}", closed.q_lower.unwrap());
        assert_eq!(summed.truncation_n, Truncation::Terms(200));
    }

    #[test]
    fn closed_form_matches_series_on_valid_grid() {
        for c in parse_grid("0.86:0.99:0.01").unwrap() {
            let a = q_lower_bound(c, lambda0(), 7, 2.0, None).unwrap();
            let b = q_lower_bound(c, lambda0(), 7, 2.0, Some(4000)).unwrap();
            assert!(a.valid);
            assert!((a.q_lower.unwrap() - b.q_lower.unwrap()).abs() < 1e-12 * a.series_value.max(1.0), "c={c}");
        }
    }

    #[test]
    fn grid_parsing() {
        let g = parse_grid("0.86:0.99:0.01").unwrap();
        assert_eq!(g.len(), 14);
        assert_eq!(g[0], 0.86);
        assert_eq!(g[13], 0.99);
        assert_eq!(parse_grid("0.5:0.8:0.1").unwrap(), vec![0.5, 0.6, 0.7, 0.8]);
        for bad in ["0.5:0.8", "a:b:c", "0.8:0.5:0.1", "0:1:0", "0:1:-0.1"] {
            assert!(parse_grid(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn csv_row_format() {
        let r = q_lower_bound(0.6, lambda0(), 7, 1.0, None).unwrap();
        assert_eq!(r.csv_row(), "0.6,,false,closed-form");
        let j = serde_json::to_value(q_lower_bound(0.9, lambda0(), 7, 1.0, Some(50)).unwrap()).unwrap();
        assert_eq!(j["truncation_n"], 50);
        assert_eq!(j["C"], 1.0);
    }

    #[test]
    fn envelope_dominates_way_counts() {
        let s = theorem4_matrix();
        let env = way_count_envelope(&s).unwrap();
        assert!((env.lambda0 - lambda0()).abs() < 1e-8);
        for a in Direction::all() {
            for m in 1..=60 {
                let g = g_vector(a, m, &s).total_f64();
                assert!(g <= env.c_env * env.lambda0.powi(m as i32), "a={a} m={m}");
            }
        }
    }

    #[test]
    fn shifted_tail_matches_sum() {
        for x in [0.1f64, 0.5, 0.9] {
            for start in [3, 4, 9] {
                let direct: f64 = (start..4000).map(|m| (m as f64 - 1.0) * x.powi(m as i32)).sum();
                assert!((shifted_tail(x, start) - direct).abs() < 1e-10 * direct.max(1.0));
            }
        }
    }

    #[test]
    fn lemma1_cases() {
        let s = theorem4_matrix();
        let t = border_census(8).unwrap();
        let q = estimate_q(0.95, 64, 2000, 1).unwrap();
        let r = lemma1_check(0.95, &t, &q, &s, DEFAULT_TAIL_THRESHOLD).unwrap();
        assert!(r.holds && r.margin > 0.0);
        assert_eq!(r.last_exact_n, 4);

        let q1 = estimate_q(1.0, 16, 100, 1).unwrap();
        let r1 = lemma1_check(1.0, &t, &q1, &s, DEFAULT_TAIL_THRESHOLD).unwrap();
        assert!(r1.lhs <= 0.0 && r1.tail == 0.0 && r1.holds);

        let q5 = estimate_q(0.5, 16, 100, 1).unwrap();
        assert!(matches!(lemma1_check(0.5, &t, &q5, &s, DEFAULT_TAIL_THRESHOLD), Err(BoundsError::TailDominates { .. })));
    }

    #[test]
    fn decomposition_at_zero_and_monotone() {
        let t = border_census(8).unwrap();
        assert_eq!(decomposition_partial_sum(0.0, 3, ProbabilityMode::Exact, &t).unwrap(), 1.0);
        assert!(decomposition_partial_sum(1.0, 3, ProbabilityMode::Exact, &t).is_err());
        assert!(matches!(decomposition_partial_sum(0.3, 9, ProbabilityMode::Exact, &t), Err(BoundsError::CensusTooSmall { .. })));
        let rows = decomposition_table(0.3, ProbabilityMode::Exact, &t).unwrap();
        for p in rows.windows(2) {
            assert!(p[1].partial_sum >= p[0].partial_sum && p[1].gap < p[0].gap);
        }
        assert!(rows.last().unwrap().partial_sum <= 1.0 + 1e-12);
        let paper = decomposition_table(0.3, ProbabilityMode::Paper, &t).unwrap();
        for (p, e) in paper.iter().zip(&rows) {
            assert!(p.partial_sum >= e.partial_sum);
        }
    }

    // frozen from `decomposition_table(0.3, Exact, border_census(8))`
    const GAP_K8_C03: f64 = 0.015_637_476_740_107_29;

    #[test]
    fn decomposition_terminal_gap() {
        let t = border_census(8).unwrap();
        let rows = decomposition_table(0.3, ProbabilityMode::Exact, &t).unwrap();
        let gap = rows.last().unwrap().gap;
        assert!((gap - GAP_K8_C03).abs() < 1e-14, "{gap:.17}");
    }

    #[test]
    fn exact_mass_matches_histogram_per_size() {
        // sizes up to 5 at c = 0.2
        let t = border_census(5).unwrap();
        let c = 0.2;
        let trials = 200_000;
        let h = origin_cluster_histogram(c, 6, trials, 8, 5).unwrap();
        for s in 1..=5 {
            let p: f64 = t.shapes.iter().filter(|x| x.size == s).map(|x| x.count as f64 * x.shape().probability(c, ProbabilityMode::Exact)).sum();
            let sigma = (p * (1.0 - p) / trials as f64).sqrt();
            assert!((h.frequency(s) - p).abs() <= 3.0 * sigma, "size {s}: {} vs {p}", h.frequency(s));
        }
    }
}
