//! Perron roots of nonnegative matrices and the block reductions that bound
//! or preserve them.
//!
//! * [`max_eig`]: shifted power iteration.
//! * [`lemma_i_certificate`]: a vector `b >= 0` with `mu * b <= B b`
//!   componentwise certifies `lambda(B) >= mu`.
//! * [`reduce_theorem_i`]: block matrix of per-block maximal row sums, whose
//!   Perron root dominates that of the original.
//! * [`reduce_theorem_ii`]: when every block row is a permutation of the same
//!   block list, the Perron root equals that of the sum of the blocks.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectralError {
    #[error("entry ({row}, {col}) = {value} is negative or not finite")]
    Negative { row: usize, col: usize, value: f64 },
    #[error("bad shape: {0}")]
    Shape(String),
    #[error("power iteration did not converge in {iterations} steps (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("bad partition: {0}")]
    BadPartition(String),
    #[error("bad permutation: {0}")]
    BadPermutation(String),
    #[error("certificate vector must be nonnegative and nonzero")]
    InvalidVector,
}

/// Dense square matrix with nonnegative entries, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonnegMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl NonnegMatrix {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self, SpectralError> {
        if dim == 0 || data.len() != dim * dim {
            return Err(SpectralError::Shape(format!("{} entries for dimension {dim}", data.len())));
        }
        if let Some(k) = data.iter().position(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(SpectralError::Negative { row: k / dim, col: k % dim, value: data[k] });
        }
        Ok(NonnegMatrix { dim, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, SpectralError> {
        let dim = rows.len();
        if rows.iter().any(|r| r.as_ref().len() != dim) {
            return Err(SpectralError::Shape("rows of unequal length".into()));
        }
        NonnegMatrix::new(dim, rows.iter().flat_map(|r| r.as_ref().iter().copied()).collect())
    }

    pub fn identity(dim: usize) -> Self {
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            data[i * dim + i] = 1.0;
        }
        NonnegMatrix { dim, data }
    }

    pub fn zeros(dim: usize) -> Self {
        NonnegMatrix { dim, data: vec![0.0; dim * dim] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.dim)
    }

    pub fn max_entry(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        self.rows().map(|r| r.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
    }

    /// `P A P^T` for the permutation `perm` (new index `i` is old `perm[i]`).
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.dim;
        let data = (0..n * n).map(|k| self.get(perm[k / n], perm[k % n])).collect();
        NonnegMatrix { dim: n, data }
    }

    pub fn add(&self, other: &NonnegMatrix) -> Result<Self, SpectralError> {
        if self.dim != other.dim {
            return Err(SpectralError::Shape(format!("{} + {}", self.dim, other.dim)));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(NonnegMatrix { dim: self.dim, data })
    }

    /// Square sub-block of size `m` at block position `(p, s)`.
    pub fn block(&self, m: usize, p: usize, s: usize) -> Self {
        let data = (0..m * m).map(|k| self.get(p * m + k / m, s * m + k % m)).collect();
        NonnegMatrix { dim: m, data }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Eigenpair {
    pub value: f64,
    /// Nonnegative, normalised to unit 1-norm.
    pub vector: Vec<f64>,
    pub iterations: usize,
}

pub const DEFAULT_MAX_ITER: usize = 1_000_000;

pub fn max_eig(a: &NonnegMatrix, tol: f64) -> Result<Eigenpair, SpectralError> {
    max_eig_with(a, tol, DEFAULT_MAX_ITER)
}

/// Power iteration on `A + sI` with `s` the largest entry of `A`. The shift
/// moves the Perron root by exactly `s` and makes it strictly dominant in
/// modulus, which periodic matrices otherwise defeat. Stops once
/// `|A v - lambda v|_inf <= tol * max(1, lambda)`.
pub fn max_eig_with(a: &NonnegMatrix, tol: f64, max_iter: usize) -> Result<Eigenpair, SpectralError> {
    let n = a.dim;
    if !(tol > 0.0) {
        return Err(SpectralError::Shape(format!("tolerance {tol} must be positive")));
    }
    let shift = a.max_entry();
    let mut v = vec![1.0 / n as f64; n];
    if shift == 0.0 {
        return Ok(Eigenpair { value: 0.0, vector: v, iterations: 0 });
    }
    let mut residual = f64::INFINITY;
    for it in 0..max_iter {
        let w = a.mul_vec(&v);
        let lambda: f64 = w.iter().sum();
        residual = w.iter().zip(&v).map(|(wi, vi)| (wi - lambda * vi).abs()).fold(0.0, f64::max);
        if residual <= tol * lambda.max(1.0) {
            return Ok(Eigenpair { value: lambda, vector: v, iterations: it });
        }
        let norm = lambda + shift;
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = (wi + shift * *vi) / norm;
        }
    }
    Err(SpectralError::NoConvergence { iterations: max_iter, residual })
}

/// Relative slack for rounding in the componentwise comparison.
pub const CERTIFICATE_SLACK: f64 = 1e-12;

/// Whether `mu * b_k <= sum_l B_kl b_l` for every `k`; when it holds,
/// `lambda(B) >= mu`.
pub fn lemma_i_certificate(b_mat: &NonnegMatrix, b: &[f64], mu: f64) -> Result<bool, SpectralError> {
    if b.len() != b_mat.dim {
        return Err(SpectralError::Shape(format!("vector of length {} for dimension {}", b.len(), b_mat.dim)));
    }
    if b.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || b.iter().all(|x| *x == 0.0) {
        return Err(SpectralError::InvalidVector);
    }
    let bb = b_mat.mul_vec(b);
    Ok(b.iter().zip(&bb).all(|(bk, sk)| {
        let lhs = mu * bk;
        lhs <= sk + CERTIFICATE_SLACK * lhs.abs().max(sk.abs())
    }))
}

/// Row and column block sizes of a partitioned square matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockPartition {
    pub row_sizes: Vec<usize>,
    pub col_sizes: Vec<usize>,
}

impl BlockPartition {
    pub fn uniform(block: usize, count: usize) -> Self {
        BlockPartition { row_sizes: vec![block; count], col_sizes: vec![block; count] }
    }

    fn validate(&self, dim: usize) -> Result<(), SpectralError> {
        let m = self.row_sizes.len();
        if m == 0 || self.col_sizes.len() != m {
            return Err(SpectralError::BadPartition(format!(
                "{} row blocks vs {} column blocks",
                m,
                self.col_sizes.len()
            )));
        }
        if self.row_sizes != self.col_sizes {
            // the bound fails when rows and columns are grouped differently
            return Err(SpectralError::BadPartition("row and column block sizes differ".into()));
        }
        if self.row_sizes.contains(&0) {
            return Err(SpectralError::BadPartition("empty block".into()));
        }
        let (r, c): (usize, usize) = (self.row_sizes.iter().sum(), self.col_sizes.iter().sum());
        if r != dim || c != dim {
            return Err(SpectralError::BadPartition(format!("sizes sum to {r} and {c}, matrix has {dim}")));
        }
        Ok(())
    }
}

fn offsets(sizes: &[usize]) -> Vec<usize> {
    sizes
        .iter()
        .scan(0, |acc, &s| {
            let start = *acc;
            *acc += s;
            Some(start)
        })
        .collect()
}

/// `B_kl = max_i sum_j A^(k,l)_ij`; guarantees `lambda(B) >= lambda(A)`.
pub fn reduce_theorem_i(a: &NonnegMatrix, part: &BlockPartition) -> Result<NonnegMatrix, SpectralError> {
    part.validate(a.dim)?;
    let m = part.row_sizes.len();
    let (ro, co) = (offsets(&part.row_sizes), offsets(&part.col_sizes));
    let mut data = Vec::with_capacity(m * m);
    for k in 0..m {
        for l in 0..m {
            let best = (ro[k]..ro[k] + part.row_sizes[k])
                .map(|i| (co[l]..co[l] + part.col_sizes[l]).map(|j| a.get(i, j)).sum::<f64>())
                .fold(0.0, f64::max);
            data.push(best);
        }
    }
    NonnegMatrix::new(m, data)
}

fn check_permutations(count: usize, perms: &[Vec<usize>]) -> Result<(), SpectralError> {
    if perms.len() != count {
        return Err(SpectralError::BadPermutation(format!("{} block rows for {count} blocks", perms.len())));
    }
    for (p, row) in perms.iter().enumerate() {
        let mut seen = vec![false; count];
        if row.len() != count || !row.iter().all(|&s| s < count && !std::mem::replace(&mut seen[s], true)) {
            return Err(SpectralError::BadPermutation(format!("block row {p} is {row:?}")));
        }
    }
    Ok(())
}

fn check_blocks(blocks: &[NonnegMatrix]) -> Result<usize, SpectralError> {
    let m = blocks.first().ok_or_else(|| SpectralError::Shape("no blocks".into()))?.dim;
    if blocks.iter().any(|b| b.dim != m) {
        return Err(SpectralError::Shape("blocks of unequal size".into()));
    }
    Ok(m)
}

/// The `nm × nm` matrix whose block `(p, s)` is `blocks[perms[p][s]]`.
pub fn assemble_block_matrix(blocks: &[NonnegMatrix], perms: &[Vec<usize>]) -> Result<NonnegMatrix, SpectralError> {
    let m = check_blocks(blocks)?;
    let n = blocks.len();
    check_permutations(n, perms)?;
    let dim = n * m;
    let mut data = vec![0.0; dim * dim];
    for (p, row) in perms.iter().enumerate() {
        for (s, &idx) in row.iter().enumerate() {
            for i in 0..m {
                for j in 0..m {
                    data[(p * m + i) * dim + s * m + j] = blocks[idx].get(i, j);
                }
            }
        }
    }
    NonnegMatrix::new(dim, data)
}

/// `B = A^(1) + ... + A^(n)`; its Perron root equals that of the assembled
/// matrix whenever each block row is a permutation of the block list.
pub fn reduce_theorem_ii(blocks: &[NonnegMatrix], perms: &[Vec<usize>]) -> Result<NonnegMatrix, SpectralError> {
    check_blocks(blocks)?;
    check_permutations(blocks.len(), perms)?;
    blocks[1..].iter().try_fold(blocks[0].clone(), |acc, b| acc.add(b))
}

/// Splits `a` into `m × m` blocks and recovers the block list (from the first
/// block row) with the permutation used by every block row, if one exists.
pub fn split_block_permutation(a: &NonnegMatrix, m: usize) -> Option<(Vec<NonnegMatrix>, Vec<Vec<usize>>)> {
    if m == 0 || !a.dim.is_multiple_of(m) {
        return None;
    }
    let n = a.dim / m;
    let blocks: Vec<NonnegMatrix> = (0..n).map(|s| a.block(m, 0, s)).collect();
    let mut perms = Vec::with_capacity(n);
    for p in 0..n {
        let mut used = vec![false; n];
        let mut row = Vec::with_capacity(n);
        for s in 0..n {
            let here = a.block(m, p, s);
            let idx = (0..n).find(|&t| !used[t] && blocks[t] == here)?;
            used[idx] = true;
            row.push(idx);
        }
        perms.push(row);
    }
    Some((blocks, perms))
}
