//! Linearization of the nonlinear plant about an equilibrium.
//!
//! Jacobians are taken by central differences on the block-layout state and
//! then permuted into the interleaved `[x, ẋ, θ₁, θ̇₁, …]` ordering used by
//! every state-space artifact.

use serde::Serialize;
use thiserror::Error;

use crate::dynamics::{self, block_to_interleaved_index, Dynamics, DynamicsError, PlantParams, State};
use crate::linalg::{self, LinalgError, Matrix, C64};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinearizationError {
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("non-finite difference quotient in column {column}")]
    NonFiniteDerivative { column: usize },
    #[error("equilibrium residual {residual:e} exceeds tolerance")]
    NotAnEquilibrium { residual: f64 },
    #[error("cart mass calibration failed: {0}")]
    Calibration(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

pub type Result<T, E = LinearizationError> = std::result::Result<T, E>;

/// Tolerance on `‖f(x_eq, F_eq)‖∞`.
pub const EQUILIBRIUM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EquilibriumKind {
    Upright,
    Hanging,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Equilibrium {
    pub kind: EquilibriumKind,
    pub state: State,
    pub force: f64,
}

/// Upright: every coordinate zero. Hanging: `θ₁ = π`, the rest of the chain
/// straight.
pub fn find_equilibrium(p: &PlantParams, kind: EquilibriumKind) -> Result<Equilibrium> {
    let mut state = State::zeros(p.dof());
    if kind == EquilibriumKind::Hanging {
        state.q[1] = std::f64::consts::PI;
    }
    let d = dynamics::forward_dynamics(&state, 0.0, p)?;
    let residual = d.to_block().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if residual > EQUILIBRIUM_TOL {
        return Err(LinearizationError::NotAnEquilibrium { residual });
    }
    Ok(Equilibrium { kind, state, force: 0.0 })
}

/// Central-difference step for a coordinate of magnitude `v`.
pub fn fd_step(v: f64) -> f64 {
    1e-6f64.max(1e-6 * v.abs())
}

/// `(∂f/∂x, ∂f/∂F)` at `(x0, force0)` in the system's own state layout.
pub fn jacobians<D: Dynamics + ?Sized>(
    sys: &D,
    x0: &[f64],
    force0: f64,
    step_scale: f64,
) -> Result<(Matrix, Matrix)> {
    let n = sys.state_dim();
    if x0.len() != n {
        return Err(LinearizationError::DimensionMismatch(format!(
            "operating point has {} entries, system has {n}",
            x0.len()
        )));
    }
    let mut a = Matrix::zeros(n, n);
    let mut xp = x0.to_vec();
    for j in 0..n {
        let h = step_scale * fd_step(x0[j]);
        let (hi, lo) = (x0[j] + h, x0[j] - h);
        xp[j] = hi;
        let fp = sys.derivative(&xp, force0)?;
        xp[j] = lo;
        let fm = sys.derivative(&xp, force0)?;
        xp[j] = x0[j];
        // divide by the step actually taken after rounding
        for i in 0..n {
            let v = (fp[i] - fm[i]) / (hi - lo);
            if !v.is_finite() {
                return Err(LinearizationError::NonFiniteDerivative { column: j });
            }
            a[(i, j)] = v;
        }
    }
    let h = step_scale * fd_step(force0);
    let (hi, lo) = (force0 + h, force0 - h);
    let fp = sys.derivative(x0, hi)?;
    let fm = sys.derivative(x0, lo)?;
    let mut b = Matrix::zeros(n, 1);
    for i in 0..n {
        let v = (fp[i] - fm[i]) / (hi - lo);
        if !v.is_finite() {
            return Err(LinearizationError::NonFiniteDerivative { column: n });
        }
        b[(i, 0)] = v;
    }
    Ok((a, b))
}

/// Linear model `ẋ = A x + B u`, `y = C x + D u` in interleaved ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    pub a: Matrix,
    pub b: Matrix,
    pub c: Matrix,
    pub d: Matrix,
    /// Operating state (interleaved) and force.
    pub operating_state: Vec<f64>,
    pub operating_force: f64,
}

impl StateSpace {
    /// Validates shapes: `A` n×n, `B` n×1, `C` 1×n, `D` 1×1.
    pub fn new(a: Matrix, b: Matrix, c: Matrix, d: Matrix) -> Result<Self> {
        let n = a.nrows();
        let ok = a.is_square()
            && n > 0
            && (b.nrows(), b.ncols()) == (n, 1)
            && (c.nrows(), c.ncols()) == (1, n)
            && (d.nrows(), d.ncols()) == (1, 1);
        if !ok {
            return Err(LinearizationError::DimensionMismatch(format!(
                "A {}x{}, B {}x{}, C {}x{}, D {}x{} do not form a single-input single-output model",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols(),
                c.nrows(),
                c.ncols(),
                d.nrows(),
                d.ncols()
            )));
        }
        for m in [&a, &b, &c, &d] {
            linalg::ensure_finite(m)?;
        }
        Ok(Self { a, b, c, d, operating_state: vec![0.0; n], operating_force: 0.0 })
    }

    pub fn states(&self) -> usize {
        self.a.nrows()
    }

    /// Output matrix selecting the cart position.
    pub fn cart_output(states: usize) -> Matrix {
        let mut c = Matrix::zeros(1, states);
        c[(0, 0)] = 1.0;
        c
    }

    pub fn open_loop_eigenvalues(&self) -> Result<linalg::Spectrum> {
        Ok(linalg::eigenvalues(&self.a)?)
    }

    pub fn controllability(&self) -> Result<linalg::RankEstimate> {
        let ctrb = linalg::controllability_matrix(&self.a, &self.b)?;
        Ok(linalg::numerical_rank(&ctrb, CONTROLLABILITY_RANK_RTOL)?)
    }

    pub fn summary(&self) -> Result<LinearizationSummary> {
        let eig = self.open_loop_eigenvalues()?;
        let rank = self.controllability()?;
        Ok(LinearizationSummary {
            states: self.states(),
            inputs: 1,
            outputs: 1,
            operating_state: self.operating_state.clone(),
            operating_force: self.operating_force,
            open_loop_eigenvalues: pairs(&eig.sorted()),
            controllability_rank: rank.rank,
            controllability_pivot_ratio: rank.pivot_ratio,
        })
    }
}

/// Relative pivot tolerance for the controllability rank test.
pub const CONTROLLABILITY_RANK_RTOL: f64 = 1e-10;

/// JSON-friendly `[re, im]` pairs.
pub fn pairs(values: &[C64]) -> Vec<[f64; 2]> {
    values.iter().map(|z| [z.re, z.im]).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearizationSummary {
    pub states: usize,
    pub inputs: usize,
    pub outputs: usize,
    pub operating_state: Vec<f64>,
    pub operating_force: f64,
    pub open_loop_eigenvalues: Vec<[f64; 2]>,
    pub controllability_rank: usize,
    pub controllability_pivot_ratio: f64,
}

/// Linearize the plant about `eq` and return the interleaved state space with
/// the cart position as output.
pub fn linearize(p: &PlantParams, eq: &Equilibrium) -> Result<StateSpace> {
    linearize_with_step(p, eq, 1.0)
}

/// As [`linearize`], with every difference step multiplied by `step_scale`.
pub fn linearize_with_step(p: &PlantParams, eq: &Equilibrium, step_scale: f64) -> Result<StateSpace> {
    let x0 = eq.state.to_block();
    let (a_blk, b_blk) = jacobians(p, &x0, eq.force, step_scale)?;
    let n = x0.len();
    let dof = p.dof();
    let mut a = Matrix::zeros(n, n);
    let mut b = Matrix::zeros(n, 1);
    for i in 0..n {
        let pi = block_to_interleaved_index(i, dof);
        b[(pi, 0)] = b_blk[(i, 0)];
        for j in 0..n {
            a[(pi, block_to_interleaved_index(j, dof))] = a_blk[(i, j)];
        }
    }
    Ok(StateSpace {
        a,
        b,
        c: StateSpace::cart_output(n),
        d: Matrix::zeros(1, 1),
        operating_state: eq.state.to_interleaved(),
        operating_force: eq.force,
    })
}

/// Outcome of fitting the cart mass to a target cart-acceleration gain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CartMassFit {
    pub cart_mass: f64,
    pub b_cart: f64,
    pub iterations: usize,
}

/// Find the cart mass for which the upright linearization's cart-acceleration
/// input gain `B[1]` equals `target`, by secant iteration on the cart mass.
pub fn calibrate_cart_mass(p: &PlantParams, target: f64) -> Result<CartMassFit> {
    if !(target.is_finite() && target > 0.0) {
        return Err(LinearizationError::Calibration(format!(
            "target gain must be positive, got {target}"
        )));
    }
    let upright = find_equilibrium(p, EquilibriumKind::Upright)?;
    let gain = |mass: f64| -> Result<f64> {
        let plant = p.with_cart_mass(mass)?;
        Ok(linearize(&plant, &upright)?.b[(1, 0)])
    };
    // the gain falls monotonically with the cart mass, roughly like 1/M
    let mut m0 = p.cart_mass();
    let mut m1 = m0 * 1.1;
    let mut f0 = gain(m0)? - target;
    let mut f1 = gain(m1)? - target;
    for it in 1..=60 {
        if f1 == f0 {
            break;
        }
        let mut m2 = m1 - f1 * (m1 - m0) / (f1 - f0);
        if !(m2.is_finite()) {
            break;
        }
        if m2 <= 0.0 {
            m2 = 0.5 * m1;
        }
        let f2 = gain(m2)? - target;
        if (m2 - m1).abs() <= 1e-13 * m2.abs() || f2.abs() <= 1e-12 * target {
            return Ok(CartMassFit { cart_mass: m2, b_cart: f2 + target, iterations: it });
        }
        (m0, f0, m1, f1) = (m1, f1, m2, f2);
    }
    Err(LinearizationError::Calibration(format!(
        "secant iteration did not converge (last mass {m1}, gain error {f1:e})"
    )))
}
