//! Dense real linear algebra shared by the rest of the crate.
//!
//! Matrices are plain `nalgebra::DMatrix<f64>` values. The routines here add
//! the contracts the control pipeline relies on: an LU solve with a relative
//! singularity threshold, a general real eigenvalue solver returning a
//! [`Spectrum`], and the controllability constructions used by pole placement.

pub mod csv;

use nalgebra::{Complex, DMatrix};
use thiserror::Error;

pub use nalgebra::DVector;

/// Dense real matrix.
pub type Matrix = DMatrix<f64>;

/// Complex scalar used for eigenvalues and poles.
pub type C64 = Complex<f64>;

/// Relative pivot threshold below which a matrix is treated as singular.
pub const SINGULAR_PIVOT_RTOL: f64 = 1e-13;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is singular: pivot {pivot:e} below threshold {threshold:e}")]
    SingularMatrix { pivot: f64, threshold: f64 },
    #[error("eigenvalue iteration did not converge within {iterations} sweeps")]
    NoConvergence { iterations: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("malformed matrix text at line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

pub type Result<T, E = LinalgError> = std::result::Result<T, E>;

pub(crate) fn ensure_finite(m: &Matrix) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(LinalgError::NonFinite)
    }
}

fn ensure_square(m: &Matrix, what: &str) -> Result<()> {
    if m.is_square() && m.nrows() > 0 {
        Ok(())
    } else {
        Err(LinalgError::DimensionMismatch(format!(
            "{what} must be square and non-empty, got {}x{}",
            m.nrows(),
            m.ncols()
        )))
    }
}

/// Maximum absolute row sum.
pub fn inf_norm(m: &Matrix) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Maximum absolute column sum.
pub fn one_norm(m: &Matrix) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Largest absolute entry.
pub fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

/// LU factorization with partial (row) pivoting, `P·A = L·U`.
#[derive(Debug, Clone)]
pub struct LuFactor {
    lu: Matrix,
    perm: Vec<usize>,
}

impl LuFactor {
    /// Factor `a`. Fails with [`LinalgError::SingularMatrix`] when a pivot
    /// falls below `1e-13 · ‖a‖∞`.
    pub fn new(a: &Matrix) -> Result<Self> {
        ensure_square(a, "LU operand")?;
        ensure_finite(a)?;
        let n = a.nrows();
        let threshold = SINGULAR_PIVOT_RTOL * inf_norm(a);
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();

        for k in 0..n {
            let (p, pivot) = (k..n)
                .map(|i| (i, lu[(i, k)].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot <= threshold || pivot == 0.0 {
                return Err(LinalgError::SingularMatrix { pivot, threshold });
            }
            if p != k {
                lu.swap_rows(p, k);
                perm.swap(p, k);
            }
            let d = lu[(k, k)];
            for i in (k + 1)..n {
                let f = lu[(i, k)] / d;
                lu[(i, k)] = f;
                if f != 0.0 {
                    for j in (k + 1)..n {
                        lu[(i, j)] -= f * lu[(k, j)];
                    }
                }
            }
        }
        Ok(Self { lu, perm })
    }

    pub fn dim(&self) -> usize {
        self.lu.nrows()
    }

    /// Solve `A·X = B` for every column of `b`.
    pub fn solve(&self, b: &Matrix) -> Result<Matrix> {
        let n = self.dim();
        if b.nrows() != n {
            return Err(LinalgError::DimensionMismatch(format!(
                "right-hand side has {} rows, expected {n}",
                b.nrows()
            )));
        }
        ensure_finite(b)?;
        let mut x = Matrix::zeros(n, b.ncols());
        for c in 0..b.ncols() {
            let mut col: Vec<f64> = self.perm.iter().map(|&p| b[(p, c)]).collect();
            self.substitute(&mut col);
            for (i, v) in col.into_iter().enumerate() {
                x[(i, c)] = v;
            }
        }
        Ok(x)
    }

    /// Solve for a single right-hand side given as a slice.
    pub fn solve_vec(&self, b: &[f64]) -> Vec<f64> {
        debug_assert_eq!(b.len(), self.dim());
        let mut col: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        self.substitute(&mut col);
        col
    }

    fn substitute(&self, col: &mut [f64]) {
        let n = self.dim();
        for i in 0..n {
            let mut s = col[i];
            for j in 0..i {
                s -= self.lu[(i, j)] * col[j];
            }
            col[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = col[i];
            for j in (i + 1)..n {
                s -= self.lu[(i, j)] * col[j];
            }
            col[i] = s / self.lu[(i, i)];
        }
    }

    pub fn inverse(&self) -> Matrix {
        let n = self.dim();
        self.solve(&Matrix::identity(n, n))
            .expect("identity is conformant and finite")
    }

    pub fn determinant(&self) -> f64 {
        let n = self.dim();
        let mut det: f64 = (0..n).map(|i| self.lu[(i, i)]).product();
        // parity of the permutation
        let mut seen = vec![false; n];
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut len = 0;
            let mut j = start;
            while !seen[j] {
                seen[j] = true;
                j = self.perm[j];
                len += 1;
            }
            if len % 2 == 0 {
                det = -det;
            }
        }
        det
    }
}

/// Solve `A·X = B` by partial-pivoting LU.
pub fn lu_solve(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    LuFactor::new(a)?.solve(b)
}

/// Eigenvalues of a general real square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    values: Vec<C64>,
}

impl Spectrum {
    pub fn new(values: Vec<C64>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sum(&self) -> C64 {
        self.values.iter().sum()
    }

    pub fn product(&self) -> C64 {
        self.values.iter().product()
    }

    /// Largest real part (spectral abscissa).
    pub fn max_real(&self) -> f64 {
        self.values.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
    }

    /// All eigenvalues strictly in the open left half plane.
    pub fn is_hurwitz(&self) -> bool {
        self.values.iter().all(|z| z.re < 0.0)
    }

    /// Whether every non-real eigenvalue has a conjugate partner within `tol`.
    pub fn is_conjugate_closed(&self, tol: f64) -> bool {
        is_conjugate_closed(&self.values, tol)
    }

    /// Sorted by real part, then imaginary part.
    pub fn sorted(&self) -> Vec<C64> {
        let mut v = self.values.clone();
        v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        v
    }

    /// Worst relative distance `|λ − μ| / max(1, |μ|)` after greedily pairing
    /// each eigenvalue with a target. `None` if the lengths differ.
    pub fn match_error(&self, targets: &[C64]) -> Option<f64> {
        greedy_match_error(&self.values, targets)
    }
}

pub(crate) fn is_conjugate_closed(values: &[C64], tol: f64) -> bool {
    let mut used = vec![false; values.len()];
    for i in 0..values.len() {
        if used[i] {
            continue;
        }
        let z = values[i];
        let scale = tol * z.norm().max(1.0);
        if z.im.abs() <= scale {
            used[i] = true;
            continue;
        }
        let partner = (0..values.len())
            .filter(|&j| j != i && !used[j])
            .find(|&j| (values[j] - z.conj()).norm() <= scale);
        match partner {
            Some(j) => {
                used[i] = true;
                used[j] = true;
            }
            None => return false,
        }
    }
    true
}

/// Global greedy matching: repeatedly pair the closest remaining
/// (value, target) couple.
pub fn greedy_match_error(values: &[C64], targets: &[C64]) -> Option<f64> {
    if values.len() != targets.len() {
        return None;
    }
    let n = values.len();
    let mut vu = vec![false; n];
    let mut tu = vec![false; n];
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let mut best = (usize::MAX, usize::MAX, f64::INFINITY);
        for i in (0..n).filter(|&i| !vu[i]) {
            for j in (0..n).filter(|&j| !tu[j]) {
                let d = (values[i] - targets[j]).norm();
                if d < best.2 {
                    best = (i, j, d);
                }
            }
        }
        vu[best.0] = true;
        tu[best.1] = true;
        worst = worst.max(best.2 / targets[best.1].norm().max(1.0));
    }
    Some(worst)
}

/// All eigenvalues of a real square matrix.
///
/// Backed by a Hessenberg reduction followed by shifted (Francis) QR
/// iterations; fails with [`LinalgError::NoConvergence`] after `100·n`
/// iterations.
pub fn eigenvalues(a: &Matrix) -> Result<Spectrum> {
    ensure_square(a, "eigenvalue operand")?;
    ensure_finite(a)?;
    let n = a.nrows();
    let iterations = 100 * n.max(1);
    let schur = nalgebra::linalg::Schur::try_new(a.clone(), f64::EPSILON, iterations)
        .ok_or(LinalgError::NoConvergence { iterations })?;
    let values: Vec<C64> = schur.complex_eigenvalues().iter().copied().collect();
    if values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(LinalgError::NoConvergence { iterations });
    }
    Ok(Spectrum::new(values))
}

/// Controllability matrix `[B, AB, A²B, …, Aⁿ⁻¹B]` for a single input.
pub fn controllability_matrix(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    ensure_square(a, "state matrix")?;
    let n = a.nrows();
    if b.nrows() != n || b.ncols() != 1 {
        return Err(LinalgError::DimensionMismatch(format!(
            "input matrix must be {n}x1, got {}x{}",
            b.nrows(),
            b.ncols()
        )));
    }
    let mut out = Matrix::zeros(n, n);
    let mut col = b.clone();
    for k in 0..n {
        out.set_column(k, &col.column(0));
        if k + 1 < n {
            col = a * &col;
        }
    }
    Ok(out)
}

/// Result of a numerical rank estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankEstimate {
    pub rank: usize,
    /// Smallest over largest diagonal magnitude of the pivoted `R` factor.
    pub pivot_ratio: f64,
}

/// Numerical rank by column-pivoted QR on the column-equilibrated matrix.
///
/// Columns are scaled to unit 2-norm first so that the rank reflects linear
/// independence and not the geometric growth of Krylov columns. A diagonal
/// entry of `R` counts toward the rank when it exceeds `rel_tol` times the
/// largest one.
pub fn numerical_rank(m: &Matrix, rel_tol: f64) -> Result<RankEstimate> {
    ensure_finite(m)?;
    let mut scaled = m.clone();
    for mut c in scaled.column_iter_mut() {
        let norm = c.norm();
        if norm > 0.0 {
            c /= norm;
        }
    }
    let qr = scaled.col_piv_qr();
    let r = qr.r();
    let k = r.nrows().min(r.ncols());
    let diag: Vec<f64> = (0..k).map(|i| r[(i, i)].abs()).collect();
    let largest = diag.iter().copied().fold(0.0, f64::max);
    if largest == 0.0 {
        return Ok(RankEstimate { rank: 0, pivot_ratio: 0.0 });
    }
    let rank = diag.iter().filter(|&&d| d > rel_tol * largest).count();
    let smallest = diag.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(RankEstimate { rank, pivot_ratio: smallest / largest })
}

/// 1-norm condition number of the column-equilibrated matrix, or `None` when
/// it is numerically singular.
pub fn equilibrated_condition(m: &Matrix) -> Option<f64> {
    let mut scaled = m.clone();
    for mut c in scaled.column_iter_mut() {
        let norm = c.norm();
        if norm > 0.0 {
            c /= norm;
        }
    }
    let lu = LuFactor::new(&scaled).ok()?;
    Some(one_norm(&scaled) * one_norm(&lu.inverse()))
}

/// Symmetric part `(M + Mᵀ)/2`.
pub fn symmetric_part(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

/// Eigenvalues of the symmetric part of `m`, ascending.
pub fn symmetric_eigenvalues(m: &Matrix) -> Vec<f64> {
    let mut v: Vec<f64> = symmetric_part(m).symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}
