//! State-feedback synthesis for single-input plants.
//!
//! Two routes produce a gain row `K` for `u = N·r − K·x`:
//!
//! * LQR, with `K = R⁻¹BᵀP` and `P` the stabilizing solution of the
//!   continuous algebraic Riccati equation `PA + AᵀP − PBR⁻¹BᵀP + Q = 0`;
//! * pole placement, where a percent-overshoot / settling-time pair fixes a
//!   dominant second-order pole pair, the remaining poles sit `spread` times
//!   further left, and Ackermann's formula places the whole set.
//!
//! Either way the reference gain `N = [−C(A − BK)⁻¹B]⁻¹` makes the linear
//! closed-loop DC gain from `r` to `y` exactly one.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, LinalgError, LuFactor, Matrix, C64};
use crate::linearization::{pairs, StateSpace};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthesisError {
    #[error("invalid LQR weights: {0}")]
    InvalidWeights(String),
    #[error("invalid pole design: {0}")]
    InvalidDesign(String),
    #[error("invalid pole set: {0}")]
    InvalidPoles(String),
    #[error("no stabilizing Riccati solution: {0}")]
    NotStabilizable(String),
    #[error("Riccati residual {residual:e} exceeds bound {bound:e}")]
    InaccurateRiccati { residual: f64, bound: f64 },
    #[error("pair (A, B) is not controllable (controllability breaks at step {step})")]
    Uncontrollable { step: usize },
    #[error("closed loop is not asymptotically stable (max real part {max_real:e})")]
    UnstableClosedLoop { max_real: f64 },
    #[error("closed-loop DC gain {dc:e} is too small to invert")]
    ZeroDcGain { dc: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T, E = SynthesisError> = std::result::Result<T, E>;

/// Relative CARE residual bound, `‖Res(P)‖∞ ≤ CARE_RTOL·‖Q‖∞`.
pub const CARE_RTOL: f64 = 1e-7;

/// Condition number of the equilibrated controllability matrix above which a
/// placement is flagged as ill-conditioned (about six lost digits).
pub const ILL_CONDITIONED_THRESHOLD: f64 = 1e6;

// ---------------------------------------------------------------------------
// LQR

#[derive(Debug, Clone, PartialEq)]
pub struct LqrWeights {
    q: Matrix,
    r: f64,
}

impl LqrWeights {
    pub fn new(q: Matrix, r: f64) -> Result<Self> {
        if !q.is_square() || q.nrows() == 0 {
            return Err(SynthesisError::InvalidWeights(format!(
                "Q must be square, got {}x{}",
                q.nrows(),
                q.ncols()
            )));
        }
        linalg::ensure_finite(&q)?;
        let scale = linalg::max_abs(&q).max(1.0);
        if (&q - q.transpose()).abs().max() > 1e-12 * scale {
            return Err(SynthesisError::InvalidWeights("Q must be symmetric".into()));
        }
        let lowest = linalg::symmetric_eigenvalues(&q)[0];
        if lowest < -1e-12 * scale {
            return Err(SynthesisError::InvalidWeights(format!(
                "Q must be positive semidefinite (eigenvalue {lowest:e})"
            )));
        }
        if !(r.is_finite() && r > 0.0) {
            return Err(SynthesisError::InvalidWeights(format!("R must be positive, got {r}")));
        }
        Ok(Self { q, r })
    }

    pub fn diagonal(q_diag: &[f64], r: f64) -> Result<Self> {
        Self::new(Matrix::from_diagonal(&linalg::DVector::from_column_slice(q_diag)), r)
    }

    /// Weight 10 on every position and angle, 1 on every velocity, `R = 1`
    /// (interleaved ordering).
    pub fn position_heavy(states: usize) -> Self {
        let diag: Vec<f64> = (0..states).map(|i| if i % 2 == 0 { 10.0 } else { 1.0 }).collect();
        Self::diagonal(&diag, 1.0).expect("diagonal weights are valid")
    }

    pub fn q(&self) -> &Matrix {
        &self.q
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn scaled(&self, alpha: f64) -> Result<Self> {
        Self::new(&self.q * alpha, self.r * alpha)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CareSolution {
    pub p: Matrix,
    /// `‖PA + AᵀP − PBR⁻¹BᵀP + Q‖∞`.
    pub residual: f64,
}

/// `‖PA + AᵀP − PBR⁻¹BᵀP + Q‖∞`.
pub fn care_residual(a: &Matrix, b: &Matrix, q: &Matrix, r: &Matrix, p: &Matrix) -> Result<f64> {
    let s = b * lu_solve_right(r, &b.transpose())?;
    Ok(linalg::inf_norm(&riccati_map(a, &s, q, p)))
}

fn riccati_map(a: &Matrix, s: &Matrix, q: &Matrix, p: &Matrix) -> Matrix {
    p * a + a.transpose() * p - p * s * p + q
}

fn lu_solve_right(r: &Matrix, rhs: &Matrix) -> Result<Matrix> {
    Ok(linalg::lu_solve(r, rhs)?)
}

/// Stabilizing solution of `PA + AᵀP − PBR⁻¹BᵀP + Q = 0`.
///
/// The stable invariant subspace of the Hamiltonian
/// `[[A, −BR⁻¹Bᵀ], [−Q, −Aᵀ]]` is extracted with the determinant-scaled
/// Newton iteration for the matrix sign function, then polished by
/// Newton–Kleinman steps (one Lyapunov solve each).
pub fn solve_care(a: &Matrix, b: &Matrix, q: &Matrix, r: &Matrix) -> Result<CareSolution> {
    let n = a.nrows();
    if !a.is_square()
        || b.nrows() != n
        || q.shape() != (n, n)
        || !r.is_square()
        || r.nrows() != b.ncols()
    {
        return Err(SynthesisError::DimensionMismatch(format!(
            "A {:?}, B {:?}, Q {:?}, R {:?}",
            a.shape(),
            b.shape(),
            q.shape(),
            r.shape()
        )));
    }
    for m in [a, b, q, r] {
        linalg::ensure_finite(m)?;
    }
    let s = b * lu_solve_right(r, &b.transpose())?;

    let mut h = Matrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(a);
    h.view_mut((0, n), (n, n)).copy_from(&(-&s));
    h.view_mut((n, 0), (n, n)).copy_from(&(-q));
    h.view_mut((n, n), (n, n)).copy_from(&(-a.transpose()));

    let w = matrix_sign(&h)?;
    let i = Matrix::identity(n, n);
    let mut lhs = Matrix::zeros(2 * n, n);
    lhs.view_mut((0, 0), (n, n)).copy_from(&w.view((0, n), (n, n)));
    lhs.view_mut((n, 0), (n, n)).copy_from(&(w.view((n, n), (n, n)) + &i));
    let mut rhs = Matrix::zeros(2 * n, n);
    rhs.view_mut((0, 0), (n, n)).copy_from(&(-(w.view((0, 0), (n, n)) + &i)));
    rhs.view_mut((n, 0), (n, n)).copy_from(&(-w.view((n, 0), (n, n))));

    let qr = lhs.qr();
    let qty = qr.q().transpose() * rhs;
    let p = qr
        .r()
        .solve_upper_triangular(&qty)
        .ok_or_else(|| SynthesisError::NotStabilizable("stable subspace is not a graph".into()))?;
    let mut p = linalg::symmetric_part(&p);
    let mut residual = linalg::inf_norm(&riccati_map(a, &s, q, &p));

    // Kleinman iterates are monotone in P but not in the residual, so keep the
    // best one seen and stop once progress stalls.
    let mut current = p.clone();
    let mut stalled = 0;
    for _ in 0..30 {
        let ac = a - &s * &current;
        let rhs = -(q + &current * &s * &current);
        current = match solve_lyapunov(&ac, &rhs) {
            Ok(x) => linalg::symmetric_part(&x),
            Err(_) => break,
        };
        let next_res = linalg::inf_norm(&riccati_map(a, &s, q, &current));
        if !next_res.is_finite() {
            break;
        }
        if next_res < 0.5 * residual {
            stalled = 0;
        } else {
            stalled += 1;
        }
        if next_res < residual {
            p = current.clone();
            residual = next_res;
        }
        if stalled >= 3 {
            break;
        }
    }

    let closed = linalg::eigenvalues(&(a - &s * &p))?;
    if !closed.is_hurwitz() {
        return Err(SynthesisError::NotStabilizable(format!(
            "closed loop A − BR⁻¹BᵀP has an eigenvalue with real part {:e}",
            closed.max_real()
        )));
    }
    let p_scale = linalg::max_abs(&p).max(1.0);
    let lowest = linalg::symmetric_eigenvalues(&p)[0];
    if lowest < -1e-9 * p_scale {
        return Err(SynthesisError::NotStabilizable(format!(
            "Riccati solution is indefinite (eigenvalue {lowest:e})"
        )));
    }
    let bound = CARE_RTOL * linalg::inf_norm(q).max(f64::EPSILON);
    if residual > bound {
        return Err(SynthesisError::InaccurateRiccati { residual, bound });
    }
    Ok(CareSolution { p, residual })
}

fn matrix_sign(h: &Matrix) -> Result<Matrix> {
    let dim = h.nrows();
    let mut z = h.clone();
    let mut scaling = true;
    for _ in 0..100 {
        let lu = LuFactor::new(&z).map_err(|_| {
            SynthesisError::NotStabilizable("Hamiltonian has eigenvalues on the imaginary axis".into())
        })?;
        let inv = lu.inverse();
        let c = if scaling {
            // |det Z|^(1/dim), computed in log space
            let log_det = lu.determinant().abs().ln();
            let c = if log_det.is_finite() {
                (log_det / dim as f64).exp()
            } else {
                1.0
            };
            if c.is_finite() && c > 0.0 {
                c
            } else {
                1.0
            }
        } else {
            1.0
        };
        let next = (&z / c + &inv * c) * 0.5;
        let change = linalg::one_norm(&(&next - &z));
        let size = linalg::one_norm(&next);
        z = next;
        if !size.is_finite() {
            break;
        }
        if change <= 1e-2 * size {
            scaling = false;
        }
        if change <= 1e-13 * size {
            return Ok(z);
        }
    }
    Err(SynthesisError::NotStabilizable(
        "matrix sign iteration did not converge".into(),
    ))
}

/// Solve `AᵀX + XA = C` through its Kronecker form.
pub fn solve_lyapunov(a: &Matrix, c: &Matrix) -> Result<Matrix> {
    let n = a.nrows();
    let at = a.transpose();
    let mut k = Matrix::zeros(n * n, n * n);
    // column-major vec: vec(AᵀX) = (I⊗Aᵀ)vec X, vec(XA) = (Aᵀ⊗I)vec X
    for j in 0..n {
        for i in 0..n {
            let row = j * n + i;
            for l in 0..n {
                k[(row, j * n + l)] += at[(i, l)];
                k[(row, l * n + i)] += a[(l, j)];
            }
        }
    }
    let rhs = Matrix::from_column_slice(n * n, 1, c.as_slice());
    let x = linalg::lu_solve(&k, &rhs)?;
    Ok(Matrix::from_column_slice(n, n, x.as_slice()))
}

// ---------------------------------------------------------------------------
// Gains

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Lqr,
    PolePlacement,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Lqr => "lqr",
            Method::PolePlacement => "pole-placement",
        })
    }
}

/// Diagnostics attached to a pole-placement result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementDiagnostics {
    pub requested_poles: Vec<[f64; 2]>,
    /// Worst relative distance between requested and achieved poles.
    pub placement_error: f64,
    /// 1-norm condition number of the column-equilibrated controllability
    /// matrix; absent when it is numerically singular.
    pub controllability_condition: Option<f64>,
    pub ill_conditioned: bool,
}

/// Feedback row `K` (interleaved ordering) and reference gain `N` for
/// `u = N·r − K·x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gains {
    pub method: Method,
    #[serde(rename = "K")]
    pub k: Vec<f64>,
    #[serde(rename = "N")]
    pub n: f64,
    pub closed_loop_poles: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub placement: Option<PlacementDiagnostics>,
}

impl Gains {
    /// Assemble and check stability of `A − BK`.
    fn build(
        ss: &StateSpace,
        method: Method,
        k: Vec<f64>,
        residual: Option<f64>,
        placement: Option<PlacementDiagnostics>,
    ) -> Result<Self> {
        let closed = linalg::eigenvalues(&closed_loop(&ss.a, &ss.b, &k)?)?;
        if !closed.is_hurwitz() {
            return Err(SynthesisError::UnstableClosedLoop { max_real: closed.max_real() });
        }
        let n = precompensation_gain(&ss.a, &ss.b, &ss.c, &k)?;
        Ok(Self {
            method,
            k,
            n,
            closed_loop_poles: pairs(&closed.sorted()),
            residual,
            placement,
        })
    }

    pub fn poles(&self) -> Vec<C64> {
        self.closed_loop_poles.iter().map(|&[re, im]| C64::new(re, im)).collect()
    }

    pub fn k_row(&self) -> Matrix {
        Matrix::from_row_slice(1, self.k.len(), &self.k)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("gains serialize") + "\n"
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}

/// `A − B·K` for a gain row.
pub fn closed_loop(a: &Matrix, b: &Matrix, k: &[f64]) -> Result<Matrix> {
    if k.len() != a.ncols() || b.ncols() != 1 || b.nrows() != a.nrows() {
        return Err(SynthesisError::DimensionMismatch(format!(
            "gain of length {} for a {}-state single-input plant",
            k.len(),
            a.nrows()
        )));
    }
    Ok(a - b * Matrix::from_row_slice(1, k.len(), k))
}

/// LQR gain `K = R⁻¹BᵀP` with its reference gain.
pub fn lqr_gain(ss: &StateSpace, weights: &LqrWeights) -> Result<Gains> {
    if weights.q.nrows() != ss.states() {
        return Err(SynthesisError::DimensionMismatch(format!(
            "Q is {}x{} for a {}-state plant",
            weights.q.nrows(),
            weights.q.ncols(),
            ss.states()
        )));
    }
    let r = Matrix::from_element(1, 1, weights.r);
    let sol = solve_care(&ss.a, &ss.b, &weights.q, &r)?;
    let k_row = ss.b.transpose() * &sol.p / weights.r;
    Gains::build(ss, Method::Lqr, k_row.iter().copied().collect(), Some(sol.residual), None)
}

// ---------------------------------------------------------------------------
// Pole design

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoleDesign {
    /// Percent overshoot, `0 < PO < 100`.
    pub overshoot_pct: f64,
    /// Settling time in seconds.
    pub settling_time: f64,
    /// Ratio between the far poles' and the dominant pair's real parts.
    pub spread: f64,
    /// Relative spacing `δ` of the far poles: `spread·Re(s₁)·(1 + δ·k)`.
    pub far_pole_spacing: f64,
}

/// Default far-pole spacing; see [`PoleDesign::far_pole_spacing`].
pub const DEFAULT_FAR_POLE_SPACING: f64 = 0.25;

impl PoleDesign {
    pub fn new(overshoot_pct: f64, settling_time: f64) -> Result<Self> {
        Self {
            overshoot_pct,
            settling_time,
            spread: 10.0,
            far_pole_spacing: DEFAULT_FAR_POLE_SPACING,
        }
        .validated()
    }

    pub fn validated(self) -> Result<Self> {
        let bad = |m: String| Err(SynthesisError::InvalidDesign(m));
        if !(self.overshoot_pct > 0.0 && self.overshoot_pct < 100.0) {
            return bad(format!("overshoot must lie in (0, 100) %, got {}", self.overshoot_pct));
        }
        if !(self.settling_time.is_finite() && self.settling_time > 0.0) {
            return bad(format!("settling time must be positive, got {}", self.settling_time));
        }
        if !(self.spread.is_finite() && self.spread > 1.0) {
            return bad(format!("spread must exceed 1, got {}", self.spread));
        }
        if !(self.far_pole_spacing.is_finite() && self.far_pole_spacing >= 0.0) {
            return bad(format!("far-pole spacing must be ≥ 0, got {}", self.far_pole_spacing));
        }
        Ok(self)
    }

    pub fn with_settling_time(mut self, ts: f64) -> Result<Self> {
        self.settling_time = ts;
        self.validated()
    }

    /// Damping ratio `ε = |ln(PO/100)| / √(π² + ln²(PO/100))`.
    pub fn damping_ratio(&self) -> f64 {
        let l = (self.overshoot_pct / 100.0).ln();
        l.abs() / (std::f64::consts::PI.powi(2) + l * l).sqrt()
    }

    /// Natural frequency `ωₙ = 4 / (ε·ts)`.
    pub fn natural_frequency(&self) -> f64 {
        4.0 / (self.damping_ratio() * self.settling_time)
    }

    /// Dominant pair `s₁,₂ = −εωₙ ± ωₙ√(ε² − 1)`, upper pole first.
    pub fn dominant_pair(&self) -> [C64; 2] {
        let eps = self.damping_ratio();
        let wn = self.natural_frequency();
        let root = C64::new(eps * eps - 1.0, 0.0).sqrt() * wn;
        let base = C64::new(-eps * wn, 0.0);
        [base + root, base - root]
    }
}

/// Overshoot implied by a damping ratio, `100·exp(−επ/√(1 − ε²))`.
pub fn overshoot_from_damping(eps: f64) -> f64 {
    100.0 * (-eps * std::f64::consts::PI / (1.0 - eps * eps).sqrt()).exp()
}

/// Full closed-loop pole set for a `total`-state plant: the dominant pair and
/// `total − 2` real poles at `spread·Re(s₁)·(1 + spacing·k)`.
pub fn second_order_poles(design: &PoleDesign, total: usize) -> Result<Vec<C64>> {
    let design = design.validated()?;
    if total < 2 {
        return Err(SynthesisError::InvalidDesign(format!(
            "need at least 2 states for a dominant pair, got {total}"
        )));
    }
    let pair = design.dominant_pair();
    let far = design.spread * pair[0].re;
    let mut poles = pair.to_vec();
    poles.extend((0..total - 2).map(|k| C64::new(far * (1.0 + design.far_pole_spacing * k as f64), 0.0)));
    Ok(poles)
}

// ---------------------------------------------------------------------------
// Pole placement

enum Factor {
    Linear(f64),
    /// `s² − trace·s + det`
    Quadratic { trace: f64, det: f64 },
}

fn factorize(desired: &[C64]) -> Result<Vec<Factor>> {
    if desired.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(SynthesisError::InvalidPoles("poles must be finite".into()));
    }
    let mut used = vec![false; desired.len()];
    let mut out = Vec::new();
    for i in 0..desired.len() {
        if used[i] {
            continue;
        }
        used[i] = true;
        let z = desired[i];
        let tol = 1e-9 * z.norm().max(1.0);
        if z.im.abs() <= tol {
            out.push(Factor::Linear(z.re));
            continue;
        }
        let j = (0..desired.len())
            .filter(|&j| !used[j])
            .find(|&j| (desired[j] - z.conj()).norm() <= tol)
            .ok_or_else(|| {
                SynthesisError::InvalidPoles(format!("{z} has no complex-conjugate partner"))
            })?;
        used[j] = true;
        let w = (z + desired[j].conj()) * 0.5;
        out.push(Factor::Quadratic { trace: 2.0 * w.re, det: w.norm_sqr() });
    }
    Ok(out)
}

/// Raw result of Ackermann placement.
#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    pub k: Vec<f64>,
    pub achieved: linalg::Spectrum,
    pub diagnostics: PlacementDiagnostics,
}

/// Ackermann's formula `K = eₙᵀ𝒞⁻¹φ(A)` evaluated on the controller-Hessenberg
/// form of `(A, b)`.
///
/// An orthogonal `U` brings the pair to `H = UᵀAU` upper Hessenberg with
/// `Uᵀb = β·e₁`. There the controllability matrix is upper triangular with
/// last diagonal entry `β·Π h_{i+1,i}`, so `eₙᵀ𝒞⁻¹` is a scaled unit row and
/// `K_H = eₙᵀφ(H) / (β·Π h_{i+1,i})`, with `φ(H)` applied factor by factor to
/// the row vector. `K = K_H·Uᵀ`. Neither `𝒞` nor the coefficients of `φ`
/// are ever formed.
pub fn ackermann(a: &Matrix, b: &Matrix, desired: &[C64]) -> Result<Placement> {
    let n = a.nrows();
    if !a.is_square() || b.shape() != (n, 1) {
        return Err(SynthesisError::DimensionMismatch(format!(
            "A {:?} and B {:?} do not form a single-input pair",
            a.shape(),
            b.shape()
        )));
    }
    if desired.len() != n {
        return Err(SynthesisError::InvalidPoles(format!(
            "{} poles requested for a {n}-state plant",
            desired.len()
        )));
    }
    linalg::ensure_finite(a)?;
    linalg::ensure_finite(b)?;
    let factors = factorize(desired)?;

    // Householder reflector P0 with P0·b = β·e₁
    let bcol = b.column(0).clone_owned();
    let bnorm = bcol.norm();
    if bnorm == 0.0 {
        return Err(SynthesisError::Uncontrollable { step: 0 });
    }
    let beta = if bcol[0] >= 0.0 { -bnorm } else { bnorm };
    let mut v = bcol.clone();
    v[0] -= beta;
    let vnorm2 = v.norm_squared();
    let p0 = if vnorm2 == 0.0 {
        Matrix::identity(n, n)
    } else {
        Matrix::identity(n, n) - (&v * v.transpose()) * (2.0 / vnorm2)
    };
    let a1 = &p0 * a * &p0;
    let (q1, h) = nalgebra::linalg::Hessenberg::new(a1).unpack();
    let u = &p0 * q1;

    let a_scale = linalg::one_norm(a).max(f64::MIN_POSITIVE);
    let mut log_scale = -bnorm.ln();
    let mut sign = beta.signum();
    for i in 0..n.saturating_sub(1) {
        let sub = h[(i + 1, i)];
        if sub.abs() <= 1e-12 * a_scale {
            return Err(SynthesisError::Uncontrollable { step: i + 1 });
        }
        log_scale -= sub.abs().ln();
        sign *= sub.signum();
    }

    // row ← eₙᵀ·φ(H), renormalized after every factor
    let mut row = Matrix::zeros(1, n);
    row[(0, n - 1)] = 1.0;
    for f in &factors {
        row = match *f {
            Factor::Linear(root) => &row * &h - &row * root,
            Factor::Quadratic { trace, det } => {
                let rh = &row * &h;
                &rh * &h - &rh * trace + &row * det
            }
        };
        let m = linalg::max_abs(&row);
        if m > 0.0 {
            row /= m;
            log_scale += m.ln();
        }
    }
    let k_row = row * u.transpose() * (sign * log_scale.exp());
    let k: Vec<f64> = k_row.iter().copied().collect();

    let achieved = linalg::eigenvalues(&closed_loop(a, b, &k)?)?;
    let placement_error = achieved.match_error(desired).unwrap_or(f64::INFINITY);
    let ctrb = linalg::controllability_matrix(a, b)?;
    let controllability_condition = linalg::equilibrated_condition(&ctrb);
    let ill_conditioned = controllability_condition.is_none_or(|c| c > ILL_CONDITIONED_THRESHOLD);
    Ok(Placement {
        k,
        achieved,
        diagnostics: PlacementDiagnostics {
            requested_poles: pairs(desired),
            placement_error,
            controllability_condition,
            ill_conditioned,
        },
    })
}

/// Place the closed-loop poles of `ss` at `desired` and attach the reference
/// gain.
pub fn place_poles(ss: &StateSpace, desired: &[C64]) -> Result<Gains> {
    let placement = ackermann(&ss.a, &ss.b, desired)?;
    Gains::build(ss, Method::PolePlacement, placement.k, None, Some(placement.diagnostics))
}

/// Pole placement from an overshoot / settling-time design.
pub fn design_pole_placement(ss: &StateSpace, design: &PoleDesign) -> Result<Gains> {
    place_poles(ss, &second_order_poles(design, ss.states())?)
}

// ---------------------------------------------------------------------------
// Precompensation

/// `N = [−C(A − BK)⁻¹B]⁻¹`.
pub fn precompensation_gain(a: &Matrix, b: &Matrix, c: &Matrix, k: &[f64]) -> Result<f64> {
    let acl = closed_loop(a, b, k)?;
    if c.shape() != (1, a.nrows()) {
        return Err(SynthesisError::DimensionMismatch(format!(
            "C is {:?}, expected (1, {})",
            c.shape(),
            a.nrows()
        )));
    }
    let z = linalg::lu_solve(&acl, b)?;
    let dc = (c * z)[(0, 0)];
    if dc.abs() < 1e-12 {
        return Err(SynthesisError::ZeroDcGain { dc });
    }
    Ok(-1.0 / dc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn mat(r: usize, c: usize, v: &[f64]) -> Matrix {
        Matrix::from_row_slice(r, c, v)
    }

    fn scalar_ss(a: f64, b: f64) -> StateSpace {
        StateSpace::new(mat(1, 1, &[a]), mat(1, 1, &[b]), mat(1, 1, &[1.0]), mat(1, 1, &[0.0]))
            .unwrap()
    }

    #[test]
    fn scalar_care_cases() {
        let sol = solve_care(&mat(1, 1, &[0.0]), &mat(1, 1, &[1.0]), &mat(1, 1, &[10.0]), &mat(1, 1, &[1.0]))
            .unwrap();
        assert_relative_eq!(sol.p[(0, 0)], 10f64.sqrt(), max_relative = 1e-12);

        let sol = solve_care(&mat(1, 1, &[-1.0]), &mat(1, 1, &[0.0]), &mat(1, 1, &[1.0]), &mat(1, 1, &[1.0]))
            .unwrap();
        assert_relative_eq!(sol.p[(0, 0)], 0.5, max_relative = 1e-12);
    }

    #[test]
    fn unstabilizable_is_reported() {
        let err = solve_care(&mat(1, 1, &[1.0]), &mat(1, 1, &[0.0]), &mat(1, 1, &[1.0]), &mat(1, 1, &[1.0]))
            .unwrap_err();
        assert!(matches!(err, SynthesisError::NotStabilizable(_)), "{err}");
    }

    #[test]
    fn double_integrator_lqr() {
        let a = mat(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let b = mat(2, 1, &[0.0, 1.0]);
        let ss = StateSpace::new(a.clone(), b.clone(), StateSpace::cart_output(2), mat(1, 1, &[0.0]))
            .unwrap();
        let w = LqrWeights::new(Matrix::identity(2, 2), 1.0).unwrap();
        let g = lqr_gain(&ss, &w).unwrap();
        assert!(g.residual.unwrap() <= CARE_RTOL);
        // P = [[√3, 1], [1, √3]], K = [1, √3]
        assert_relative_eq!(g.k[0], 1.0, max_relative = 1e-10);
        assert_relative_eq!(g.k[1], 3f64.sqrt(), max_relative = 1e-10);
        assert!(g.poles().iter().all(|z| z.re < 0.0));
    }

    #[test]
    fn scalar_lqr_and_precompensation() {
        let g = lqr_gain(&scalar_ss(0.0, 1.0), &LqrWeights::diagonal(&[10.0], 1.0).unwrap()).unwrap();
        assert_relative_eq!(g.k[0], 3.16228, max_relative = 1e-5);
        assert_relative_eq!(g.n, g.k[0], max_relative = 1e-12);

        let n = precompensation_gain(&mat(1, 1, &[0.0]), &mat(1, 1, &[1.0]), &mat(1, 1, &[1.0]), &[2.5])
            .unwrap();
        assert_relative_eq!(n, 2.5, max_relative = 1e-14);
    }

    #[test]
    fn zero_dc_gain_is_rejected() {
        // output does not see the input at all
        let err = precompensation_gain(
            &mat(2, 2, &[-1.0, 0.0, 0.0, -1.0]),
            &mat(2, 1, &[1.0, 0.0]),
            &mat(1, 2, &[0.0, 1.0]),
            &[0.0, 0.0],
        )
        .unwrap_err();
        assert!(matches!(err, SynthesisError::ZeroDcGain { .. }));
    }

    #[test]
    fn weight_validation() {
        assert!(LqrWeights::new(mat(2, 2, &[1.0, 2.0, 0.0, 1.0]), 1.0).is_err());
        assert!(LqrWeights::new(mat(1, 1, &[-1.0]), 1.0).is_err());
        assert!(LqrWeights::new(mat(1, 1, &[1.0]), 0.0).is_err());
        let w = LqrWeights::position_heavy(4);
        assert_eq!(w.q().diagonal().as_slice(), &[10.0, 1.0, 10.0, 1.0]);
    }

    #[test]
    fn dominant_pair_for_one_percent_six_seconds() {
        let d = PoleDesign::new(1.0, 6.0).unwrap();
        assert_abs_diff_eq!(d.damping_ratio(), 0.82609, epsilon = 5e-6);
        assert_abs_diff_eq!(d.natural_frequency(), 0.807019, epsilon = 1e-6);
        let [s1, s2] = d.dominant_pair();
        assert_abs_diff_eq!(s1.re, -4.0 / 6.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s1.im, 0.454792, epsilon = 1e-6);
        assert_eq!(s2, s1.conj());

        let poles = second_order_poles(&d, 10).unwrap();
        assert_eq!(poles.len(), 10);
        for z in &poles[2..] {
            assert_eq!(z.im, 0.0);
            assert!(z.re <= 10.0 * s1.re + 1e-12);
        }
        assert!(linalg::Spectrum::new(poles.clone()).is_conjugate_closed(1e-12));
    }

    #[test]
    fn design_validation() {
        assert!(PoleDesign::new(150.0, 6.0).is_err());
        assert!(PoleDesign::new(0.0, 6.0).is_err());
        assert!(PoleDesign::new(1.0, -1.0).is_err());
        let d = PoleDesign { spread: 1.0, ..PoleDesign::new(1.0, 6.0).unwrap() };
        assert!(d.validated().is_err());
        assert!(second_order_poles(&PoleDesign::new(5.0, 2.0).unwrap(), 1).is_err());
    }

    #[test]
    fn ackermann_double_integrator() {
        let a = mat(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let b = mat(2, 1, &[0.0, 1.0]);
        let p = ackermann(&a, &b, &[C64::new(-1.0, 0.0), C64::new(-1.0, 0.0)]).unwrap();
        assert_abs_diff_eq!(p.k[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.k[1], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn placement_rejects_bad_requests() {
        let a = mat(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let b = mat(2, 1, &[0.0, 1.0]);
        let orphan = [C64::new(-1.0, 1.0), C64::new(-2.0, 0.0)];
        assert!(matches!(ackermann(&a, &b, &orphan), Err(SynthesisError::InvalidPoles(_))));
        assert!(matches!(
            ackermann(&a, &b, &[C64::new(-1.0, 0.0)]),
            Err(SynthesisError::InvalidPoles(_))
        ));
        // second state unreachable
        let a2 = mat(2, 2, &[-1.0, 0.0, 0.0, -2.0]);
        let b2 = mat(2, 1, &[1.0, 0.0]);
        let req = [C64::new(-1.0, 0.0), C64::new(-3.0, 0.0)];
        assert!(matches!(ackermann(&a2, &b2, &req), Err(SynthesisError::Uncontrollable { .. })));
        // unstable request fails the Gains invariant
        let ss = StateSpace::new(a, b, StateSpace::cart_output(2), mat(1, 1, &[0.0])).unwrap();
        let err = place_poles(&ss, &[C64::new(1.0, 0.0), C64::new(-1.0, 0.0)]).unwrap_err();
        assert!(matches!(err, SynthesisError::UnstableClosedLoop { .. }));
    }

    #[test]
    fn overshoot_formula_round_trip() {
        for po in [0.1, 1.0, 5.0, 20.0, 50.0, 90.0] {
            let d = PoleDesign::new(po, 3.0).unwrap();
            assert_relative_eq!(overshoot_from_damping(d.damping_ratio()), po, max_relative = 1e-9);
        }
    }

    /// Gaussian pair `(G/√n − I, b)`, redrawn until the equilibrated
    /// controllability matrix is reasonably conditioned. Weakly controllable
    /// unstable modes make the Riccati solution itself huge and
    /// ill-conditioned, which is a property of the data rather than of the
    /// solver.
    fn random_system(rng: &mut ChaCha8Rng, n: usize) -> (Matrix, Matrix) {
        let scale = 1.0 / (n as f64).sqrt();
        loop {
            let a = Matrix::from_fn(n, n, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
                - Matrix::identity(n, n);
            let b = Matrix::from_fn(n, 1, |_, _| rng.sample::<f64, _>(StandardNormal));
            let ctrb = linalg::controllability_matrix(&a, &b).unwrap();
            if linalg::equilibrated_condition(&ctrb).is_some_and(|c| c < 1e4) {
                return (a, b);
            }
        }
    }

    #[test]
    fn care_residual_on_random_systems() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..50 {
            let n = 2 + trial % 6;
            let (a, b) = random_system(&mut rng, n);
            let c = Matrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
            let q = c.transpose() * c + Matrix::identity(n, n) * 0.1;
            let r = mat(1, 1, &[rng.random_range(0.1..10.0)]);
            let sol = solve_care(&a, &b, &q, &r).unwrap();
            assert!(sol.residual <= CARE_RTOL * linalg::inf_norm(&q), "trial {trial}: {:e}", sol.residual);
            assert_relative_eq!(care_residual(&a, &b, &q, &r, &sol.p).unwrap(), sol.residual, max_relative = 1e-6, epsilon = 1e-15);
        }
    }

    #[test]
    fn placement_matches_random_targets() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..30 {
            let n = 2 + trial % 6;
            let (a, b) = random_system(&mut rng, n);
            let mut desired = Vec::new();
            while desired.len() + 2 <= n && rng.random_bool(0.5) {
                let z = C64::new(rng.random_range(-4.0..-0.5), rng.random_range(0.1..2.0));
                desired.push(z);
                desired.push(z.conj());
            }
            while desired.len() < n {
                desired.push(C64::new(rng.random_range(-4.0..-0.5), 0.0));
            }
            let p = ackermann(&a, &b, &desired).unwrap();
            assert!(p.diagnostics.placement_error < 1e-4, "trial {trial}: {:e}", p.diagnostics.placement_error);
        }
    }

    #[test]
    fn placement_recovers_spectrum_of_known_gain() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 2..=6 {
            let (a, b) = random_system(&mut rng, n);
            let k0: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let target = linalg::eigenvalues(&closed_loop(&a, &b, &k0).unwrap()).unwrap();
            let p = ackermann(&a, &b, target.values()).unwrap();
            for (x, y) in p.k.iter().zip(&k0) {
                assert_abs_diff_eq!(x, y, epsilon = 1e-6 * (1.0 + y.abs()));
            }
            assert!(p.diagnostics.placement_error < 1e-6);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn lqr_gain_is_scale_invariant(alpha in 0.01f64..100.0) {
            let a = mat(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 2.0, -1.0, 0.5]);
            let b = mat(3, 1, &[0.0, 0.0, 1.0]);
            let ss = StateSpace::new(a, b, StateSpace::cart_output(3), mat(1, 1, &[0.0])).unwrap();
            let w = LqrWeights::diagonal(&[10.0, 1.0, 3.0], 1.0).unwrap();
            let g1 = lqr_gain(&ss, &w).unwrap();
            let g2 = lqr_gain(&ss, &w.scaled(alpha).unwrap()).unwrap();
            for (x, y) in g1.k.iter().zip(&g2.k) {
                prop_assert!((x - y).abs() <= 1e-8 * (1.0 + x.abs()));
            }
        }

        #[test]
        fn precompensation_yields_unit_dc_gain(k0 in 1.0f64..20.0, k1 in 1.0f64..20.0, rho in -5.0f64..5.0) {
            let a = mat(2, 2, &[0.0, 1.0, 0.0, 0.0]);
            let b = mat(2, 1, &[0.0, 1.0]);
            let c = StateSpace::cart_output(2);
            let k = [k0, k1];
            let n = precompensation_gain(&a, &b, &c, &k).unwrap();
            let acl = closed_loop(&a, &b, &k).unwrap();
            let xss = linalg::lu_solve(&acl, &(&b * (-n * rho))).unwrap();
            prop_assert!(((&c * xss)[(0, 0)] - rho).abs() <= 1e-9);
        }
    }
}
