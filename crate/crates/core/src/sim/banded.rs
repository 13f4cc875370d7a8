//! Small direct solvers for the banded systems that appear in a planar chain.

/// Widest half bandwidth supported by [`SymBand`].
pub(crate) const MAX_BW: usize = 5;

/// Symmetric band matrix stored as its lower band: `rows[i][k] = A[i][i - k]`.
#[derive(Debug, Clone)]
pub(crate) struct SymBand {
    n: usize,
    bw: usize,
    rows: Vec<[f64; MAX_BW + 1]>,
}

impl SymBand {
    pub fn new(n: usize, bw: usize) -> Self {
        assert!(bw <= MAX_BW, "half bandwidth {bw} exceeds {MAX_BW}");
        Self {
            n,
            bw,
            rows: vec![[0.0; MAX_BW + 1]; n],
        }
    }

    pub fn clear(&mut self) {
        self.rows.iter_mut().for_each(|r| *r = [0.0; MAX_BW + 1]);
    }

    pub fn copy_from(&mut self, other: &SymBand) {
        self.rows.copy_from_slice(&other.rows);
    }

    /// Row `c` of the matrix times `x`.
    pub fn row_dot(&self, c: usize, x: &[f64]) -> f64 {
        let mut sum = self.rows[c][0] * x[c];
        for r in c.saturating_sub(self.bw)..c {
            sum += self.rows[c][c - r] * x[r];
        }
        for r in c + 1..(c + self.bw + 1).min(self.n) {
            sum += self.rows[r][r - c] * x[r];
        }
        sum
    }

    /// Adds `v` to `A[i][j]` (and implicitly `A[j][i]`); call once per unordered pair.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        debug_assert!(hi - lo <= self.bw);
        self.rows[hi][hi - lo] += v;
    }

    /// Replaces row/column `c` by the identity row, moving the coupling with the
    /// known value `x_c` to the right-hand side.
    pub fn fix(&mut self, c: usize, x_c: f64, rhs: &mut [f64]) {
        let lo = c.saturating_sub(self.bw);
        let hi = (c + self.bw).min(self.n - 1);
        for r in lo..=hi {
            if r < c {
                rhs[r] -= self.rows[c][c - r] * x_c;
                self.rows[c][c - r] = 0.0;
            } else if r > c {
                rhs[r] -= self.rows[r][r - c] * x_c;
                self.rows[r][r - c] = 0.0;
            }
        }
        self.rows[c][0] = 1.0;
        rhs[c] = x_c;
    }

    /// In-place band Cholesky factorization followed by the two triangular
    /// solves. Returns false when a pivot is not positive.
    pub fn solve_in_place(&mut self, rhs: &mut [f64]) -> bool {
        let (n, bw) = (self.n, self.bw);
        let rows = &mut self.rows;
        for i in 0..n {
            let ok = if bw == MAX_BW && i >= MAX_BW {
                factor_full_row(rows, i)
            } else {
                factor_row(rows, i, bw)
            };
            if !ok {
                return false;
            }
        }
        for i in 0..n {
            let row = &rows[i];
            let mut s = rhs[i];
            for k in i.saturating_sub(bw)..i {
                s -= row[i - k] * rhs[k];
            }
            rhs[i] = s / row[0];
        }
        for i in (0..n).rev() {
            let mut s = rhs[i];
            for k in (i + 1)..(i + bw + 1).min(n) {
                s -= rows[k][k - i] * rhs[k];
            }
            rhs[i] = s / rows[i][0];
        }
        true
    }
}

type Row = [f64; MAX_BW + 1];

fn factor_row(rows: &mut [Row], i: usize, bw: usize) -> bool {
    let j0 = i.saturating_sub(bw);
    let mut row = rows[i];
    for j in j0..i {
        let rj = &rows[j];
        let mut s = row[i - j];
        for k in j0..j {
            s -= row[i - k] * rj[j - k];
        }
        row[i - j] = s / rj[0];
    }
    let mut d = row[0];
    for k in j0..i {
        d -= row[i - k] * row[i - k];
    }
    if !(d > 0.0) {
        return false;
    }
    row[0] = d.sqrt();
    rows[i] = row;
    true
}

/// `factor_row` for a row with a complete band; fixed trip counts let the
/// loops unroll.
#[inline]
fn factor_full_row(rows: &mut [Row], i: usize) -> bool {
    const B: usize = MAX_BW;
    let prev: &[Row; B] = rows[i - B..i].try_into().unwrap();
    let mut row = rows[i];
    // column j = i - B + t
    for t in 0..B {
        let rj = &prev[t];
        let mut s = row[B - t];
        for u in 0..t {
            // k = i - B + u
            s -= row[B - u] * rj[t - u];
        }
        row[B - t] = s / rj[0];
    }
    let mut d = row[0];
    for u in 1..=B {
        d -= row[u] * row[u];
    }
    if !(d > 0.0) {
        return false;
    }
    row[0] = d.sqrt();
    rows[i] = row;
    true
}

/// Solves a symmetric tridiagonal system with the Thomas algorithm.
///
/// `diag` has length n, `off[i]` couples rows i and i + 1. The scratch slices
/// are overwritten. Returns false on a zero pivot.
pub(crate) fn solve_tridiagonal(diag: &[f64], off: &[f64], rhs: &mut [f64], scratch: &mut [f64]) -> bool {
    let n = diag.len();
    if n == 0 {
        return true;
    }
    let mut pivot = diag[0];
    if pivot == 0.0 {
        return false;
    }
    rhs[0] /= pivot;
    for i in 1..n {
        scratch[i - 1] = off[i - 1] / pivot;
        pivot = diag[i] - off[i - 1] * scratch[i - 1];
        if pivot == 0.0 || !pivot.is_finite() {
            return false;
        }
        rhs[i] = (rhs[i] - off[i - 1] * rhs[i - 1]) / pivot;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= scratch[i] * rhs[i + 1];
    }
    true
}
