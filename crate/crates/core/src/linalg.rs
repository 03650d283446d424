//! Banded direct solvers: scalar tridiagonal (Thomas) and 2x2 block
//! tridiagonal LU, both without pivoting.

use crate::error::{check_len, Error, Result};

/// Solve a tridiagonal system in O(n).
///
/// `sub[i]` multiplies `x[i]` in row `i + 1`, `sup[i]` multiplies `x[i + 1]`
/// in row `i`; both have length `n - 1`.
pub fn thomas(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    if n == 0 {
        return Err(Error::InvalidArgument("empty tridiagonal system".into()));
    }
    check_len("tridiagonal rhs", n, rhs.len())?;
    check_len("tridiagonal sub-diagonal", n - 1, sub.len())?;
    check_len("tridiagonal super-diagonal", n - 1, sup.len())?;
    if !rhs.iter().all(|x| x.is_finite()) {
        return Err(Error::NonFinite("tridiagonal rhs"));
    }

    let mut c = vec![0.0; n];
    let mut x = vec![0.0; n];
    let mut pivot = diag[0];
    check_pivot(pivot, 0)?;
    if n > 1 {
        c[0] = sup[0] / pivot;
    }
    x[0] = rhs[0] / pivot;
    for i in 1..n {
        pivot = diag[i] - sub[i - 1] * c[i - 1];
        check_pivot(pivot, i)?;
        if i < n - 1 {
            c[i] = sup[i] / pivot;
        }
        x[i] = (rhs[i] - sub[i - 1] * x[i - 1]) / pivot;
    }
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Ok(x)
}

fn check_pivot(p: f64, row: usize) -> Result<()> {
    if p == 0.0 || !p.is_finite() {
        return Err(Error::Solve(format!("zero or non-finite pivot {p} in row {row}")));
    }
    Ok(())
}

/// `y = A x` for a tridiagonal `A` in the layout of [`thomas`].
pub fn tridiag_mul(sub: &[f64], diag: &[f64], sup: &[f64], x: &[f64]) -> Vec<f64> {
    let n = diag.len();
    (0..n)
        .map(|i| {
            let mut s = diag[i] * x[i];
            if i > 0 {
                s += sub[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                s += sup[i] * x[i + 1];
            }
            s
        })
        .collect()
}

pub type Block = [[f64; 2]; 2];

pub const ZERO_BLOCK: Block = [[0.0; 2]; 2];
pub const IDENTITY_BLOCK: Block = [[1.0, 0.0], [0.0, 1.0]];

#[inline]
pub fn block_add(a: Block, b: Block) -> Block {
    [
        [a[0][0] + b[0][0], a[0][1] + b[0][1]],
        [a[1][0] + b[1][0], a[1][1] + b[1][1]],
    ]
}

#[inline]
pub fn block_scale(s: f64, a: Block) -> Block {
    [[s * a[0][0], s * a[0][1]], [s * a[1][0], s * a[1][1]]]
}

#[inline]
fn block_sub(a: Block, b: Block) -> Block {
    block_add(a, block_scale(-1.0, b))
}

#[inline]
fn block_mul(a: Block, b: Block) -> Block {
    [
        [
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
        ],
        [
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        ],
    ]
}

#[inline]
fn block_vec(a: Block, x: [f64; 2]) -> [f64; 2] {
    [
        a[0][0] * x[0] + a[0][1] * x[1],
        a[1][0] * x[0] + a[1][1] * x[1],
    ]
}

#[inline]
fn block_transpose(a: Block) -> Block {
    [[a[0][0], a[1][0]], [a[0][1], a[1][1]]]
}

fn block_inverse(a: Block, row: usize) -> Result<Block> {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    if det == 0.0 || !det.is_finite() {
        return Err(Error::Solve(format!(
            "singular diagonal block (det = {det}) in block row {row}"
        )));
    }
    let inv = 1.0 / det;
    Ok([
        [a[1][1] * inv, -a[0][1] * inv],
        [-a[1][0] * inv, a[0][0] * inv],
    ])
}

fn block_max_abs(a: &Block) -> f64 {
    a.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// A block tridiagonal matrix with 2x2 blocks. `lower[i]` couples block row
/// `i + 1` to unknown `i`; `upper[i]` couples row `i` to unknown `i + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockTridiagonal {
    pub lower: Vec<Block>,
    pub diag: Vec<Block>,
    pub upper: Vec<Block>,
}

impl BlockTridiagonal {
    pub fn n_blocks(&self) -> usize {
        self.diag.len()
    }

    fn validate(&self) -> Result<()> {
        let n = self.diag.len();
        if n == 0 {
            return Err(Error::InvalidArgument("empty block system".into()));
        }
        check_len("block lower", n - 1, self.lower.len())?;
        check_len("block upper", n - 1, self.upper.len())
    }

    pub fn transpose(&self) -> BlockTridiagonal {
        BlockTridiagonal {
            lower: self.upper.iter().copied().map(block_transpose).collect(),
            diag: self.diag.iter().copied().map(block_transpose).collect(),
            upper: self.lower.iter().copied().map(block_transpose).collect(),
        }
    }

    pub fn mul(&self, x: &[[f64; 2]]) -> Vec<[f64; 2]> {
        let n = self.n_blocks();
        (0..n)
            .map(|i| {
                let mut y = block_vec(self.diag[i], x[i]);
                if i > 0 {
                    let l = block_vec(self.lower[i - 1], x[i - 1]);
                    y = [y[0] + l[0], y[1] + l[1]];
                }
                if i + 1 < n {
                    let r = block_vec(self.upper[i], x[i + 1]);
                    y = [y[0] + r[0], y[1] + r[1]];
                }
                y
            })
            .collect()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.lower
            .iter()
            .chain(&self.diag)
            .chain(&self.upper)
            .map(block_max_abs)
            .fold(0.0, f64::max)
    }

    /// Induced 1-norm (maximum absolute column sum).
    pub fn norm1(&self) -> f64 {
        let n = self.n_blocks();
        let mut best = 0.0f64;
        for j in 0..n {
            for c in 0..2 {
                let mut s = self.diag[j][0][c].abs() + self.diag[j][1][c].abs();
                if j > 0 {
                    // row j - 1 references unknown j through upper[j - 1]
                    s += self.upper[j - 1][0][c].abs() + self.upper[j - 1][1][c].abs();
                }
                if j + 1 < n {
                    s += self.lower[j][0][c].abs() + self.lower[j][1][c].abs();
                }
                best = best.max(s);
            }
        }
        best
    }

    /// Block LU factorization without pivoting.
    pub fn factor(&self) -> Result<BlockLu> {
        self.validate()?;
        let n = self.n_blocks();
        let mut multipliers = Vec::with_capacity(n.saturating_sub(1));
        let mut pivots_inv = Vec::with_capacity(n);
        let mut growth = self.max_abs();
        let scale = growth;

        let mut pivot = self.diag[0];
        pivots_inv.push(block_inverse(pivot, 0)?);
        for i in 1..n {
            let m = block_mul(self.lower[i - 1], pivots_inv[i - 1]);
            pivot = block_sub(self.diag[i], block_mul(m, self.upper[i - 1]));
            growth = growth.max(block_max_abs(&pivot));
            multipliers.push(m);
            pivots_inv.push(block_inverse(pivot, i)?);
        }
        if !growth.is_finite() {
            return Err(Error::NonFinite("block LU factors"));
        }
        Ok(BlockLu {
            multipliers,
            pivots_inv,
            upper: self.upper.clone(),
            growth_factor: if scale > 0.0 { growth / scale } else { 1.0 },
        })
    }
}

/// Factors of a [`BlockTridiagonal`] matrix.
#[derive(Debug, Clone)]
pub struct BlockLu {
    multipliers: Vec<Block>,
    pivots_inv: Vec<Block>,
    upper: Vec<Block>,
    /// `max |U_ij| / max |A_ij|` over the eliminated matrix.
    pub growth_factor: f64,
}

impl BlockLu {
    pub fn solve(&self, rhs: &[[f64; 2]]) -> Result<Vec<[f64; 2]>> {
        let n = self.pivots_inv.len();
        check_len("block rhs", n, rhs.len())?;
        let mut y = rhs.to_vec();
        for i in 1..n {
            let m = block_vec(self.multipliers[i - 1], y[i - 1]);
            y[i] = [y[i][0] - m[0], y[i][1] - m[1]];
        }
        y[n - 1] = block_vec(self.pivots_inv[n - 1], y[n - 1]);
        for i in (0..n - 1).rev() {
            let r = block_vec(self.upper[i], y[i + 1]);
            y[i] = block_vec(self.pivots_inv[i], [y[i][0] - r[0], y[i][1] - r[1]]);
        }
        Ok(y)
    }
}

/// Outcome of a monitored block solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveDiagnostics {
    pub growth_factor: f64,
    /// 1-norm condition number estimate `|A|_1 * est(|A^-1|_1)`.
    pub condition_estimate: f64,
}

/// Hager's estimate of `|A^-1|_1` from solves with `A` and `A^T`.
fn inverse_norm1_estimate(lu: &BlockLu, lu_t: &BlockLu, n: usize) -> Result<f64> {
    let dim = 2 * n;
    let mut x = vec![[1.0 / dim as f64; 2]; n];
    let mut estimate = 0.0;
    let mut last_j = usize::MAX;
    for _ in 0..5 {
        let y = lu.solve(&x)?;
        estimate = y.iter().flatten().map(|v| v.abs()).sum::<f64>();
        let xi: Vec<[f64; 2]> = y
            .iter()
            .map(|p| p.map(|v| if v >= 0.0 { 1.0 } else { -1.0 }))
            .collect();
        let z = lu_t.solve(&xi)?;
        let zx: f64 = z
            .iter()
            .zip(&x)
            .map(|(a, b)| a[0] * b[0] + a[1] * b[1])
            .sum();
        let (j, zmax) = z
            .iter()
            .flatten()
            .enumerate()
            .fold((0, 0.0f64), |(bj, bm), (k, v)| {
                if v.abs() > bm {
                    (k, v.abs())
                } else {
                    (bj, bm)
                }
            });
        if zmax <= zx || j == last_j {
            break;
        }
        last_j = j;
        x = vec![[0.0; 2]; n];
        x[j / 2][j % 2] = 1.0;
    }
    Ok(estimate)
}

/// Factor, estimate the condition number and solve.
pub fn solve_monitored(
    a: &BlockTridiagonal,
    rhs: &[[f64; 2]],
) -> Result<(Vec<[f64; 2]>, SolveDiagnostics)> {
    if !rhs.iter().flatten().all(|x| x.is_finite()) {
        return Err(Error::NonFinite("block rhs"));
    }
    let lu = a.factor()?;
    let x = lu.solve(rhs)?;
    let lu_t = a.transpose().factor()?;
    let inv_norm = inverse_norm1_estimate(&lu, &lu_t, a.n_blocks())?;
    Ok((
        x,
        SolveDiagnostics {
            growth_factor: lu.growth_factor,
            condition_estimate: a.norm1() * inv_norm,
        },
    ))
}
