//! The 12×12 way-connection matrix: entry `(i, j)` is 1 when some external
//! border has a vertex whose predecessor lies in direction `i` and whose
//! successor lies in direction `j`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::Direction;
use crate::spectral::{self, NonnegMatrix, SpectralError};

pub const DIM: usize = 12;
pub const BLOCK: usize = 4;

/// Relative tolerance for agreement between the two eigenvalue routes.
pub const ROUTE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConnError {
    #[error("matrix fails structure checks: {0}")]
    Structure(String),
    #[error("eigenvalue routes disagree: power iteration {power}, reduction {reduced}")]
    SpectralMismatch { power: f64, reduced: f64 },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("entries must be 0 or 1, found {0}")]
    NotBinary(u8),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<u8>>", into = "Vec<Vec<u8>>")]
pub struct ConnMatrix {
    entries: [[u8; DIM]; DIM],
}

impl TryFrom<Vec<Vec<u8>>> for ConnMatrix {
    type Error = ConnError;

    fn try_from(rows: Vec<Vec<u8>>) -> Result<Self, ConnError> {
        if rows.len() != DIM || rows.iter().any(|r| r.len() != DIM) {
            return Err(ConnError::Structure("expected 12 rows of 12 entries".into()));
        }
        let mut entries = [[0u8; DIM]; DIM];
        for (i, row) in rows.iter().enumerate() {
            for (j, &x) in row.iter().enumerate() {
                if x > 1 {
                    return Err(ConnError::NotBinary(x));
                }
                entries[i][j] = x;
            }
        }
        Ok(ConnMatrix { entries })
    }
}

impl From<ConnMatrix> for Vec<Vec<u8>> {
    fn from(m: ConnMatrix) -> Self {
        m.entries.iter().map(|r| r.to_vec()).collect()
    }
}

fn idx(k: usize) -> usize {
    (k + DIM - 1) % DIM
}

impl ConnMatrix {
    pub fn from_entries(entries: [[u8; DIM]; DIM]) -> Result<Self, ConnError> {
        match entries.iter().flatten().find(|&&x| x > 1) {
            Some(&x) => Err(ConnError::NotBinary(x)),
            None => Ok(ConnMatrix { entries }),
        }
    }

    pub fn entries(&self) -> &[[u8; DIM]; DIM] {
        &self.entries
    }

    pub fn get(&self, i: Direction, j: Direction) -> u8 {
        self.entries[i.slot()][j.slot()]
    }

    /// Flips one entry, for fault injection.
    pub fn with_flipped(mut self, i: Direction, j: Direction) -> Self {
        self.entries[i.slot()][j.slot()] ^= 1;
        self
    }

    /// 4×4 block at block position `(p, q)`.
    pub fn block(&self, p: usize, q: usize) -> [[u8; BLOCK]; BLOCK] {
        let mut b = [[0u8; BLOCK]; BLOCK];
        for (i, row) in b.iter_mut().enumerate() {
            for (j, x) in row.iter_mut().enumerate() {
                *x = self.entries[p * BLOCK + i][q * BLOCK + j];
            }
        }
        b
    }

    pub fn f(&self) -> [[u8; BLOCK]; BLOCK] {
        self.block(0, 0)
    }

    pub fn g(&self) -> [[u8; BLOCK]; BLOCK] {
        self.block(0, 1)
    }

    pub fn h(&self) -> [[u8; BLOCK]; BLOCK] {
        self.block(0, 2)
    }

    pub fn row_sums(&self) -> [u32; DIM] {
        self.entries.map(|r| r.iter().map(|&x| x as u32).sum())
    }

    /// Maximal number of admissible continuations.
    pub fn n_star(&self) -> u32 {
        self.row_sums().into_iter().max().unwrap_or(0)
    }

    pub fn to_nonneg(&self) -> NonnegMatrix {
        let data = self.entries.iter().flatten().map(|&x| x as f64).collect();
        NonnegMatrix::new(DIM, data).expect("0/1 entries")
    }

    pub fn to_i64_rows(&self) -> Vec<Vec<i64>> {
        self.entries.iter().map(|r| r.iter().map(|&x| x as i64).collect()).collect()
    }

    /// Twelve comma-separated rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in &self.entries {
            let cells: Vec<String> = row.iter().map(u8::to_string).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// F = 0 and G with a zero first column and ones elsewhere, laid out as
/// `[[F, G, G^T], [G^T, F, G], [G, G^T, F]]`.
pub fn theorem4_matrix() -> ConnMatrix {
    let g = [[0u8, 1, 1, 1]; BLOCK];
    let mut entries = [[0u8; DIM]; DIM];
    for p in 0..3 {
        for (q, transposed) in [((p + 1) % 3, false), ((p + 2) % 3, true)] {
            for i in 0..BLOCK {
                for j in 0..BLOCK {
                    entries[p * BLOCK + i][q * BLOCK + j] = if transposed { g[j][i] } else { g[i][j] };
                }
            }
        }
    }
    ConnMatrix { entries }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// 1-based `(i, j)` pairs where the check fails.
    pub offending: Vec<(u8, u8)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructureReport {
    pub checks: Vec<CheckResult>,
}

impl StructureReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect()
    }
}

fn run_check(name: &str, mut bad: impl FnMut(usize, usize) -> bool) -> CheckResult {
    let mut offending = Vec::new();
    for i in 1..=DIM {
        for j in 1..=DIM {
            if bad(i, j) {
                offending.push((i as u8, j as u8));
            }
        }
    }
    CheckResult { name: name.into(), passed: offending.is_empty(), offending }
}

/// Symmetry, zero diagonal, the three reflections, the 2π/3 rotation and the
/// block layout that follows from them.
pub fn check_structure(m: &ConnMatrix) -> StructureReport {
    let s = |i: usize, j: usize| m.entries[idx(i)][idx(j)];
    let checks = vec![
        run_check("lemma4_symmetric", |i, j| s(i, j) != s(j, i)),
        run_check("lemma4_zero_diagonal", |i, j| i == j && s(i, i) != 0),
        run_check("lemma5_reflections", |i, j| {
            (i == 1 && s(1, j) != s(1, 14 + DIM - j))
                || (i == 5 && s(5, j) != s(5, 10 + DIM - j))
                || (i == 9 && s(9, j) != s(9, 18 + DIM - j))
        }),
        run_check("lemma6_rotation", |i, j| s(i + 4, j + 4) != s(i, j)),
        run_check("block_layout", |i, j| {
            let (p, q) = ((i - 1) / BLOCK, (j - 1) / BLOCK);
            let (a, b) = ((i - 1) % BLOCK, (j - 1) % BLOCK);
            let want = match (q + 3 - p) % 3 {
                0 => m.f()[a][b],
                1 => m.g()[a][b],
                _ => m.g()[b][a],
            };
            s(i, j) != want
        }),
    ];
    StructureReport { checks }
}

/// Coefficients of `det(lambda I - A)`, constant term first, by the
/// Faddeev–LeVerrier recursion in exact integer arithmetic.
pub fn characteristic_polynomial(a: &[Vec<i64>]) -> Vec<i128> {
    let n = a.len();
    let a: Vec<Vec<i128>> = a.iter().map(|r| r.iter().map(|&x| x as i128).collect()).collect();
    let mut coeffs = vec![0i128; n + 1];
    coeffs[n] = 1;
    let mut m = vec![vec![0i128; n]; n];
    for k in 1..=n {
        // M_k = A M_{k-1} + c_{n-k+1} I
        let mut next = vec![vec![0i128; n]; n];
        for i in 0..n {
            for j in 0..n {
                next[i][j] = (0..n).map(|l| a[i][l] * m[l][j]).sum::<i128>();
            }
            next[i][i] += coeffs[n - k + 1];
        }
        m = next;
        let trace: i128 = (0..n).map(|i| (0..n).map(|l| a[i][l] * m[l][i]).sum::<i128>()).sum();
        assert_eq!(trace % k as i128, 0, "Faddeev-LeVerrier trace not divisible");
        coeffs[n - k] = -trace / k as i128;
    }
    coeffs
}

/// Real roots of an integer polynomial (constant term first), largest first.
/// Zero roots are split off exactly; the remainder must have degree at most
/// two.
pub fn real_roots(coeffs: &[i128]) -> Option<Vec<f64>> {
    let zeros = coeffs.iter().take_while(|&&c| c == 0).count();
    let rest: Vec<f64> = coeffs[zeros..].iter().map(|&c| c as f64).collect();
    let mut roots = match rest.len() {
        0 => return None,
        1 => vec![],
        2 => vec![-rest[0] / rest[1]],
        3 => {
            let (c, b, a) = (rest[0], rest[1], rest[2]);
            let disc = b * b - 4.0 * a * c;
            if disc < 0.0 {
                vec![]
            } else {
                let q = -0.5 * (b + b.signum() * disc.sqrt());
                let (r1, r2) = (q / a, c / q);
                vec![r1, r2]
            }
        }
        _ => return None,
    };
    roots.extend(std::iter::repeat_n(0.0, zeros));
    roots.sort_by(|x, y| y.total_cmp(x));
    Some(roots)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralSummary {
    pub lambda0: f64,
    pub lambda0_power: f64,
    pub lambda0_reduced: f64,
    pub n_star: u32,
    pub reduced_b: Vec<Vec<i64>>,
    /// `det(lambda I - B)`, constant term first.
    pub char_poly: Vec<i128>,
    pub roots: Vec<f64>,
}

pub fn spectral_summary(m: &ConnMatrix) -> Result<SpectralSummary, ConnError> {
    let report = check_structure(m);
    if !report.all_passed() {
        return Err(ConnError::Structure(report.failures().join(", ")));
    }
    let a = m.to_nonneg();
    let power = spectral::max_eig(&a, 1e-13)?.value;

    let (blocks, perms) = spectral::split_block_permutation(&a, BLOCK)
        .ok_or_else(|| ConnError::Structure("block rows are not permutations of one block list".into()))?;
    let b = spectral::reduce_theorem_ii(&blocks, &perms)?;
    let reduced_b: Vec<Vec<i64>> = b.rows().map(|r| r.iter().map(|&x| x as i64).collect()).collect();
    let char_poly = characteristic_polynomial(&reduced_b);
    let roots = real_roots(&char_poly)
        .ok_or_else(|| ConnError::Structure("characteristic polynomial beyond a quadratic".into()))?;
    let reduced = roots.first().copied().unwrap_or(0.0);

    if (power - reduced).abs() > ROUTE_TOLERANCE * reduced.abs().max(1e-3) {
        return Err(ConnError::SpectralMismatch { power, reduced });
    }
    Ok(SpectralSummary {
        lambda0: reduced,
        lambda0_power: power,
        lambda0_reduced: reduced,
        n_star: m.n_star(),
        reduced_b,
        char_poly,
        roots,
    })
}

/// Witnessed joinings; an absent pair is unknown rather than zero.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmpiricalMatrix {
    witnessed: BTreeSet<(Direction, Direction)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comparison {
    /// Witnessed pairs where the reference matrix has 0.
    pub contradictions: Vec<(Direction, Direction)>,
    /// Reference one-entries not yet witnessed.
    pub unwitnessed: Vec<(Direction, Direction)>,
}

impl Comparison {
    pub fn consistent(&self) -> bool {
        self.contradictions.is_empty()
    }

    pub fn complete(&self) -> bool {
        self.unwitnessed.is_empty()
    }
}

impl EmpiricalMatrix {
    pub fn witnessed(&self, i: Direction, j: Direction) -> bool {
        self.witnessed.contains(&(i, j))
    }

    pub fn pairs(&self) -> impl Iterator<Item = (Direction, Direction)> + '_ {
        self.witnessed.iter().copied()
    }

    pub fn compare(&self, reference: &ConnMatrix) -> Comparison {
        let contradictions = self.pairs().filter(|&(i, j)| reference.get(i, j) == 0).collect();
        let unwitnessed = Direction::all()
            .flat_map(|i| Direction::all().map(move |j| (i, j)))
            .filter(|&(i, j)| reference.get(i, j) == 1 && !self.witnessed(i, j))
            .collect();
        Comparison { contradictions, unwitnessed }
    }
}

pub fn empirical_matrix(witnessed: impl IntoIterator<Item = (Direction, Direction)>) -> EmpiricalMatrix {
    EmpiricalMatrix { witnessed: witnessed.into_iter().collect() }
}
