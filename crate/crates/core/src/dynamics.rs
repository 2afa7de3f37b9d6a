//! Nonlinear equations of motion of a cart carrying a serial chain of `n`
//! uniform rods.
//!
//! Coordinates are `q = [x, θ₁, …, θₙ]`, where `x` is the cart position and
//! `θᵢ` the angle of link `i` relative to link `i−1` (link 1 relative to the
//! vertical), positive counterclockwise. The absolute angle of link `j` is
//! `φⱼ = θ₁ + … + θⱼ`. The center of mass of link `i` sits at
//!
//! ```text
//! x_i = x − Σ_{j<i} l_j sin φ_j − (l_i/2) sin φ_i
//! y_i =     Σ_{j<i} l_j cos φ_j + (l_i/2) cos φ_i
//! ```
//!
//! and every quantity of the compact form `M(q)q̈ + C(q,q̇)q̇ + Dq̇ + G(q) = F`
//! is assembled from the Jacobians of these points:
//!
//! * `M = M_cart·e₀e₀ᵀ + Σ mᵢ JᵢᵀJᵢ + Iᵢ wᵢwᵢᵀ` is the Hessian of the kinetic
//!   energy in `q̇` (`wᵢ` selects `θ₁..θᵢ`, `Iᵢ = mᵢlᵢ²/12`),
//! * `C·q̇ = Σ mᵢ Jᵢᵀ aᵢ` with `aᵢ` the centripetal acceleration of the
//!   center of mass at `q̈ = 0`,
//! * `G = ∂V/∂q = Σ mᵢ g ∂yᵢ/∂q`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, LuFactor, Matrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("invalid plant parameter `{field}`: {reason}")]
    InvalidParams { field: String, reason: String },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("mass matrix is singular ({0}); this indicates a modeling bug")]
    SingularMassMatrix(linalg::LinalgError),
}

pub type Result<T, E = DynamicsError> = std::result::Result<T, E>;

fn invalid(field: impl Into<String>, reason: impl Into<String>) -> DynamicsError {
    DynamicsError::InvalidParams { field: field.into(), reason: reason.into() }
}

/// Physical description of the cart and its chain of links.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantParams {
    cart_mass: f64,
    masses: Vec<f64>,
    lengths: Vec<f64>,
    gravity: f64,
    /// Viscous damping on `q̇`, `(n+1)×(n+1)`.
    #[serde(with = "matrix_rows")]
    damping: Matrix,
}

impl PlantParams {
    /// Undamped plant. Masses and lengths are listed from the link attached to
    /// the cart outward.
    pub fn new(cart_mass: f64, masses: Vec<f64>, lengths: Vec<f64>, gravity: f64) -> Result<Self> {
        let n = masses.len();
        Self::with_damping(cart_mass, masses, lengths, gravity, Matrix::zeros(n + 1, n + 1))
    }

    pub fn with_damping(
        cart_mass: f64,
        masses: Vec<f64>,
        lengths: Vec<f64>,
        gravity: f64,
        damping: Matrix,
    ) -> Result<Self> {
        let n = masses.len();
        if n == 0 {
            return Err(invalid("masses", "at least one link is required"));
        }
        if lengths.len() != n {
            return Err(invalid(
                "lengths",
                format!("expected {n} entries to match `masses`, found {}", lengths.len()),
            ));
        }
        if !(cart_mass.is_finite() && cart_mass > 0.0) {
            return Err(invalid("cart_mass", format!("must be positive, got {cart_mass}")));
        }
        for (i, &m) in masses.iter().enumerate() {
            if !(m.is_finite() && m > 0.0) {
                return Err(invalid(format!("masses[{i}]"), format!("must be positive, got {m}")));
            }
        }
        for (i, &l) in lengths.iter().enumerate() {
            if !(l.is_finite() && l > 0.0) {
                return Err(invalid(format!("lengths[{i}]"), format!("must be positive, got {l}")));
            }
        }
        if !(gravity.is_finite() && gravity > 0.0) {
            return Err(invalid("gravity", format!("must be positive, got {gravity}")));
        }
        if damping.nrows() != n + 1 || damping.ncols() != n + 1 {
            return Err(invalid(
                "damping",
                format!(
                    "expected a {0}x{0} matrix, got {1}x{2}",
                    n + 1,
                    damping.nrows(),
                    damping.ncols()
                ),
            ));
        }
        if damping.iter().any(|v| !v.is_finite()) {
            return Err(invalid("damping", "entries must be finite"));
        }
        let lowest = linalg::symmetric_eigenvalues(&damping)[0];
        if lowest < -1e-12 {
            return Err(invalid(
                "damping",
                format!("must be positive semidefinite (symmetric part has eigenvalue {lowest:e})"),
            ));
        }
        Ok(Self { cart_mass, masses, lengths, gravity, damping })
    }

    /// Four 0.1 kg links of 0.03, 0.04, 0.07 and 0.10 m under g = 9.81, with
    /// the given cart mass.
    pub fn quadruple(cart_mass: f64) -> Result<Self> {
        Self::new(cart_mass, vec![0.1; 4], vec![0.03, 0.04, 0.07, 0.10], 9.81)
    }

    /// The quadruple pendulum with its 0.1 kg cart, the mass that reproduces
    /// the reference linearization.
    pub fn quadruple_reference() -> Self {
        Self::quadruple(QUADRUPLE_CART_MASS).expect("reference parameters are valid")
    }

    pub fn links(&self) -> usize {
        self.masses.len()
    }

    /// Number of generalized coordinates, `n + 1`.
    pub fn dof(&self) -> usize {
        self.masses.len() + 1
    }

    /// Length of the full state `[q; q̇]`.
    pub fn state_dim(&self) -> usize {
        2 * self.dof()
    }

    pub fn cart_mass(&self) -> f64 {
        self.cart_mass
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn gravity(&self) -> f64 {
        self.gravity
    }

    pub fn damping(&self) -> &Matrix {
        &self.damping
    }

    /// Rod inertia about the center of mass.
    pub fn link_inertia(&self, i: usize) -> f64 {
        self.masses[i] * self.lengths[i] * self.lengths[i] / 12.0
    }

    /// Copy with a different cart mass.
    pub fn with_cart_mass(&self, cart_mass: f64) -> Result<Self> {
        Self::with_damping(
            cart_mass,
            self.masses.clone(),
            self.lengths.clone(),
            self.gravity,
            self.damping.clone(),
        )
    }

    /// Copy with a different damping matrix.
    pub fn with_damping_matrix(&self, damping: Matrix) -> Result<Self> {
        Self::with_damping(
            self.cart_mass,
            self.masses.clone(),
            self.lengths.clone(),
            self.gravity,
            damping,
        )
    }

    fn check_len(&self, what: &str, len: usize) -> Result<()> {
        if len == self.dof() {
            Ok(())
        } else {
            Err(DynamicsError::DimensionMismatch(format!(
                "{what} has length {len}, plant has {} coordinates",
                self.dof()
            )))
        }
    }
}

/// Calibrated cart mass (kg) of the quadruple reference plant.
pub const QUADRUPLE_CART_MASS: f64 = 0.1;

mod matrix_rows {
    use super::Matrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &Matrix, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Matrix, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(serde::de::Error::custom("ragged matrix rows"));
        }
        Ok(Matrix::from_row_iterator(r, c, rows.into_iter().flatten()))
    }
}

/// Generalized coordinates and velocities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub q: Vec<f64>,
    pub qdot: Vec<f64>,
}

impl State {
    pub fn zeros(dof: usize) -> Self {
        Self { q: vec![0.0; dof], qdot: vec![0.0; dof] }
    }

    pub fn new(q: Vec<f64>, qdot: Vec<f64>) -> Result<Self> {
        if q.len() != qdot.len() || q.is_empty() {
            return Err(DynamicsError::DimensionMismatch(format!(
                "q has {} entries and qdot has {}",
                q.len(),
                qdot.len()
            )));
        }
        Ok(Self { q, qdot })
    }

    pub fn dof(&self) -> usize {
        self.q.len()
    }

    /// Interleaved `[x, ẋ, θ₁, θ̇₁, …, θₙ, θ̇ₙ]`.
    pub fn to_interleaved(&self) -> Vec<f64> {
        self.q.iter().zip(&self.qdot).flat_map(|(&p, &v)| [p, v]).collect()
    }

    pub fn from_interleaved(x: &[f64]) -> Result<Self> {
        if x.is_empty() || !x.len().is_multiple_of(2) {
            return Err(DynamicsError::DimensionMismatch(format!(
                "interleaved state must have even, non-zero length, got {}",
                x.len()
            )));
        }
        Ok(Self {
            q: x.iter().step_by(2).copied().collect(),
            qdot: x.iter().skip(1).step_by(2).copied().collect(),
        })
    }

    /// Block layout `[q; q̇]`.
    pub fn to_block(&self) -> Vec<f64> {
        self.q.iter().chain(&self.qdot).copied().collect()
    }

    pub fn from_block(x: &[f64]) -> Result<Self> {
        if x.is_empty() || !x.len().is_multiple_of(2) {
            return Err(DynamicsError::DimensionMismatch(format!(
                "block state must have even, non-zero length, got {}",
                x.len()
            )));
        }
        let half = x.len() / 2;
        Ok(Self { q: x[..half].to_vec(), qdot: x[half..].to_vec() })
    }
}

/// Index of block-layout entry `i` in the interleaved layout.
pub fn block_to_interleaved_index(i: usize, dof: usize) -> usize {
    if i < dof {
        2 * i
    } else {
        2 * (i - dof) + 1
    }
}

/// Time derivative `[q̇; q̈]` of a [`State`].
#[derive(Debug, Clone, PartialEq)]
pub struct StateDerivative {
    pub qdot: Vec<f64>,
    pub qddot: Vec<f64>,
}

impl StateDerivative {
    pub fn to_block(&self) -> Vec<f64> {
        self.qdot.iter().chain(&self.qddot).copied().collect()
    }

    pub fn to_interleaved(&self) -> Vec<f64> {
        self.qdot.iter().zip(&self.qddot).flat_map(|(&p, &v)| [p, v]).collect()
    }
}

/// Per-configuration geometry of the chain.
struct Chain<'a> {
    p: &'a PlantParams,
    sin: Vec<f64>,
    cos: Vec<f64>,
}

impl<'a> Chain<'a> {
    fn new(p: &'a PlantParams, q: &[f64]) -> Self {
        let n = p.links();
        let mut sin = Vec::with_capacity(n);
        let mut cos = Vec::with_capacity(n);
        let mut phi = 0.0;
        for theta in &q[1..] {
            phi += theta;
            sin.push(phi.sin());
            cos.push(phi.cos());
        }
        Self { p, sin, cos }
    }

    /// Lever arm of link `j` in the position of link `i`'s center of mass.
    fn arm(&self, i: usize, j: usize) -> f64 {
        if j < i {
            self.p.lengths[j]
        } else {
            0.5 * self.p.lengths[i]
        }
    }

    /// Jacobians `(∂x_i/∂q, ∂y_i/∂q)` of link `i`'s center of mass.
    fn com_jacobian(&self, i: usize) -> (Vec<f64>, Vec<f64>) {
        let dof = self.p.dof();
        let mut jx = vec![0.0; dof];
        let mut jy = vec![0.0; dof];
        jx[0] = 1.0;
        // θ_{k+1} moves every link j ≥ k, so accumulate from the tip inward
        let (mut sx, mut sy) = (0.0, 0.0);
        for j in (0..=i).rev() {
            let d = self.arm(i, j);
            sx -= d * self.cos[j];
            sy -= d * self.sin[j];
            jx[j + 1] = sx;
            jy[j + 1] = sy;
        }
        (jx, jy)
    }
}

fn absolute_rates(qdot: &[f64]) -> Vec<f64> {
    qdot[1..]
        .iter()
        .scan(0.0, |acc, w| {
            *acc += w;
            Some(*acc)
        })
        .collect()
}

/// Mass matrix `M(q)`, symmetric positive definite.
pub fn mass_matrix(q: &[f64], p: &PlantParams) -> Result<Matrix> {
    p.check_len("q", q.len())?;
    let chain = Chain::new(p, q);
    Ok(assemble_mass(&chain))
}

fn assemble_mass(chain: &Chain<'_>) -> Matrix {
    let p = chain.p;
    let dof = p.dof();
    let mut m = Matrix::zeros(dof, dof);
    m[(0, 0)] = p.cart_mass;
    for i in 0..p.links() {
        let (jx, jy) = chain.com_jacobian(i);
        let mi = p.masses[i];
        let inertia = p.link_inertia(i);
        for r in 0..dof {
            for c in 0..dof {
                let mut v = mi * (jx[r] * jx[c] + jy[r] * jy[c]);
                if (1..=i + 1).contains(&r) && (1..=i + 1).contains(&c) {
                    v += inertia;
                }
                m[(r, c)] += v;
            }
        }
    }
    m
}

/// Velocity-product (Coriolis and centrifugal) term `C(q, q̇)·q̇`.
pub fn velocity_product(x: &State, p: &PlantParams) -> Result<Vec<f64>> {
    p.check_len("q", x.q.len())?;
    p.check_len("qdot", x.qdot.len())?;
    let chain = Chain::new(p, &x.q);
    Ok(assemble_velocity_product(&chain, &x.qdot))
}

fn assemble_velocity_product(chain: &Chain<'_>, qdot: &[f64]) -> Vec<f64> {
    let p = chain.p;
    let omega = absolute_rates(qdot);
    let mut h = vec![0.0; p.dof()];
    for i in 0..p.links() {
        let (mut ax, mut ay) = (0.0, 0.0);
        for j in 0..=i {
            let d = chain.arm(i, j) * omega[j] * omega[j];
            ax += d * chain.sin[j];
            ay -= d * chain.cos[j];
        }
        let (jx, jy) = chain.com_jacobian(i);
        for k in 0..p.dof() {
            h[k] += p.masses[i] * (jx[k] * ax + jy[k] * ay);
        }
    }
    h
}

/// Gravity term `G(q) = ∂V/∂q`.
pub fn gravity_vector(q: &[f64], p: &PlantParams) -> Result<Vec<f64>> {
    p.check_len("q", q.len())?;
    let chain = Chain::new(p, q);
    Ok(assemble_gravity(&chain))
}

fn assemble_gravity(chain: &Chain<'_>) -> Vec<f64> {
    let p = chain.p;
    let mut g = vec![0.0; p.dof()];
    for i in 0..p.links() {
        let (_, jy) = chain.com_jacobian(i);
        for k in 0..p.dof() {
            g[k] += p.masses[i] * p.gravity * jy[k];
        }
    }
    g
}

/// `[q̇; q̈]` under a horizontal cart force `force`.
pub fn forward_dynamics(x: &State, force: f64, p: &PlantParams) -> Result<StateDerivative> {
    let mut gen = vec![0.0; p.dof()];
    gen[0] = force;
    forward_dynamics_generalized(x, &gen, p)
}

/// `[q̇; q̈]` under an arbitrary generalized force `[F, τ₁, …, τₙ]`, where
/// `τᵢ` is a torque acting at joint `i`.
pub fn forward_dynamics_generalized(
    x: &State,
    generalized_force: &[f64],
    p: &PlantParams,
) -> Result<StateDerivative> {
    p.check_len("q", x.q.len())?;
    p.check_len("qdot", x.qdot.len())?;
    p.check_len("generalized force", generalized_force.len())?;
    let chain = Chain::new(p, &x.q);
    let mass = assemble_mass(&chain);
    let h = assemble_velocity_product(&chain, &x.qdot);
    let g = assemble_gravity(&chain);
    let dq = &p.damping * nalgebra::DVector::from_column_slice(&x.qdot);
    let rhs: Vec<f64> = (0..p.dof())
        .map(|k| generalized_force[k] - h[k] - dq[k] - g[k])
        .collect();
    let lu = LuFactor::new(&mass).map_err(DynamicsError::SingularMassMatrix)?;
    Ok(StateDerivative { qdot: x.qdot.clone(), qddot: lu.solve_vec(&rhs) })
}

/// Kinetic and potential energy `(T, V)`. Height is measured from the rail.
pub fn total_energy(x: &State, p: &PlantParams) -> Result<(f64, f64)> {
    p.check_len("q", x.q.len())?;
    p.check_len("qdot", x.qdot.len())?;
    let omega = absolute_rates(&x.qdot);
    let xdot = x.qdot[0];
    let mut kinetic = 0.5 * p.cart_mass * xdot * xdot;
    let mut potential = 0.0;

    // walk outward from the cart pivot
    let (mut base_y, mut base_vx, mut base_vy) = (0.0, xdot, 0.0);
    let mut phi = 0.0;
    for i in 0..p.links() {
        phi += x.q[i + 1];
        let (s, c) = phi.sin_cos();
        let half = 0.5 * p.lengths[i];
        let y = base_y + half * c;
        let vx = base_vx - half * c * omega[i];
        let vy = base_vy - half * s * omega[i];
        kinetic += 0.5 * p.masses[i] * (vx * vx + vy * vy)
            + 0.5 * p.link_inertia(i) * omega[i] * omega[i];
        potential += p.masses[i] * p.gravity * y;

        base_y += p.lengths[i] * c;
        base_vx -= p.lengths[i] * c * omega[i];
        base_vy -= p.lengths[i] * s * omega[i];
    }
    Ok((kinetic, potential))
}

/// Anything that yields `ẋ = f(x, F)` on a block-layout state. Lets the
/// linearizer run on synthetic systems as well as the pendulum.
pub trait Dynamics {
    fn state_dim(&self) -> usize;
    fn derivative(&self, x: &[f64], force: f64) -> Result<Vec<f64>>;
}

impl Dynamics for PlantParams {
    fn state_dim(&self) -> usize {
        PlantParams::state_dim(self)
    }

    fn derivative(&self, x: &[f64], force: f64) -> Result<Vec<f64>> {
        let state = State::from_block(x)?;
        Ok(forward_dynamics(&state, force, self)?.to_block())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn cart_pole() -> PlantParams {
        PlantParams::new(1.0, vec![0.1], vec![0.1], 9.81).unwrap()
    }

    #[test]
    fn single_rod_mass_matrix() {
        let m = mass_matrix(&[0.0, 0.0], &cart_pole()).unwrap();
        assert_abs_diff_eq!(m[(0, 0)], 1.1, epsilon = 1e-15);
        assert_abs_diff_eq!(m[(0, 1)], -0.005, epsilon = 1e-15);
        assert_abs_diff_eq!(m[(1, 0)], -0.005, epsilon = 1e-15);
        assert_abs_diff_eq!(m[(1, 1)], 0.1 * 0.01 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn quadruple_translational_mass() {
        let p = PlantParams::quadruple(0.37).unwrap();
        let m = mass_matrix(&[0.0; 5], &p).unwrap();
        assert_abs_diff_eq!(m[(0, 0)], 0.77, epsilon = 1e-14);
        let m = mass_matrix(&[3.0, 0.4, -1.2, 2.0, 0.1], &p).unwrap();
        assert_abs_diff_eq!(m[(0, 0)], 0.77, epsilon = 1e-14);
    }

    #[test]
    fn equilibria_have_zero_derivative() {
        let p = PlantParams::quadruple_reference();
        let d = forward_dynamics(&State::zeros(5), 0.0, &p).unwrap();
        assert!(d.to_block().iter().all(|&v| v == 0.0));

        let hanging = State::new(vec![0.0, PI, 0.0, 0.0, 0.0], vec![0.0; 5]).unwrap();
        let d = forward_dynamics(&hanging, 0.0, &p).unwrap();
        assert!(d.to_block().iter().all(|v| v.abs() < 1e-12), "{:?}", d);
    }

    #[test]
    fn cart_pole_matches_two_equation_model() {
        // (M+m) ẍ − (m l/2) cosθ θ̈ + (m l/2) sinθ θ̇² = F
        // −(m l/2) cosθ ẍ + (m l²/3) θ̈ − m g (l/2) sinθ = 0
        let (mc, m, l, g) = (1.0, 0.1, 0.1, 9.81);
        let (theta, omega, force) = (0.1f64, 0.7f64, 0.3);
        let a11 = mc + m;
        let a12 = -(m * l / 2.0) * theta.cos();
        let a22 = m * l * l / 3.0;
        let r1 = force - (m * l / 2.0) * theta.sin() * omega * omega;
        let r2 = m * g * (l / 2.0) * theta.sin();
        let det = a11 * a22 - a12 * a12;
        let xdd = (r1 * a22 - a12 * r2) / det;
        let tdd = (a11 * r2 - a12 * r1) / det;

        let x = State::new(vec![0.0, theta], vec![0.0, omega]).unwrap();
        let d = forward_dynamics(&x, force, &cart_pole()).unwrap();
        assert_abs_diff_eq!(d.qddot[0], xdd, epsilon = 1e-12);
        assert_abs_diff_eq!(d.qddot[1], tdd, epsilon = 1e-12);
    }

    #[test]
    fn upright_potential_energy() {
        let p = PlantParams::quadruple_reference();
        let (t, v) = total_energy(&State::zeros(5), &p).unwrap();
        assert_eq!(t, 0.0);
        assert_abs_diff_eq!(v, 0.35316, epsilon = 1e-12);
    }

    #[test]
    fn rigid_translation_energy() {
        let p = PlantParams::quadruple(0.25).unwrap();
        let x = State::new(vec![0.0, 0.3, -0.2, 0.1, 0.5], vec![2.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let (t, _) = total_energy(&x, &p).unwrap();
        assert_abs_diff_eq!(t, 0.5 * (0.25 + 0.4) * 4.0, epsilon = 1e-12);
    }

    #[test]
    fn interleaved_order_permutation() {
        let x = State::new(vec![1.0, 2.0, 3.0, 4.0, 5.0], vec![6.0, 7.0, 8.0, 9.0, 10.0]).unwrap();
        assert_eq!(x.to_interleaved(), vec![1.0, 6.0, 2.0, 7.0, 3.0, 8.0, 4.0, 9.0, 5.0, 10.0]);
        assert_eq!(State::zeros(5).to_interleaved(), vec![0.0; 10]);
        for i in 0..10 {
            assert_eq!(x.to_interleaved()[block_to_interleaved_index(i, 5)], x.to_block()[i]);
        }
    }

    #[test]
    fn parameter_validation_names_field() {
        let err = PlantParams::new(1.0, vec![0.1, -0.2], vec![0.1, 0.1], 9.81).unwrap_err();
        assert!(err.to_string().contains("masses[1]"), "{err}");
        let err = PlantParams::new(1.0, vec![0.1], vec![0.1, 0.2], 9.81).unwrap_err();
        assert!(err.to_string().contains("lengths"));
        let err = PlantParams::new(0.0, vec![0.1], vec![0.1], 9.81).unwrap_err();
        assert!(err.to_string().contains("cart_mass"));
        let err = PlantParams::new(1.0, vec![0.1], vec![0.1], -1.0).unwrap_err();
        assert!(err.to_string().contains("gravity"));
        let bad_d = Matrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 1.0]);
        let err = PlantParams::with_damping(1.0, vec![0.1], vec![0.1], 9.81, bad_d).unwrap_err();
        assert!(err.to_string().contains("damping"));
        assert!(PlantParams::new(1.0, vec![], vec![], 9.81).is_err());
    }

    #[test]
    fn dimension_errors() {
        let p = cart_pole();
        assert!(mass_matrix(&[0.0; 3], &p).is_err());
        assert!(forward_dynamics(&State::zeros(3), 0.0, &p).is_err());
        assert!(State::from_interleaved(&[1.0, 2.0, 3.0]).is_err());
    }

    // Christoffel-symbol route, built only from finite differences of
    // `mass_matrix` and of the potential energy.
    fn christoffel_velocity_product(x: &State, p: &PlantParams) -> Vec<f64> {
        let dof = p.dof();
        let h = 1e-6;
        let dm: Vec<Matrix> = (0..dof)
            .map(|k| {
                let mut qp = x.q.clone();
                let mut qm = x.q.clone();
                qp[k] += h;
                qm[k] -= h;
                (mass_matrix(&qp, p).unwrap() - mass_matrix(&qm, p).unwrap()) / (2.0 * h)
            })
            .collect();
        let v = &x.qdot;
        (0..dof)
            .map(|i| {
                let mut s = 0.0;
                for j in 0..dof {
                    for k in 0..dof {
                        let c = 0.5 * (dm[k][(i, j)] + dm[j][(i, k)] - dm[i][(j, k)]);
                        s += c * v[j] * v[k];
                    }
                }
                s
            })
            .collect()
    }

    fn potential_gradient(q: &[f64], p: &PlantParams) -> Vec<f64> {
        let h = 1e-6;
        (0..q.len())
            .map(|k| {
                let mut qp = q.to_vec();
                let mut qm = q.to_vec();
                qp[k] += h;
                qm[k] -= h;
                let vp = total_energy(&State::new(qp, vec![0.0; q.len()]).unwrap(), p).unwrap().1;
                let vm = total_energy(&State::new(qm, vec![0.0; q.len()]).unwrap(), p).unwrap().1;
                (vp - vm) / (2.0 * h)
            })
            .collect()
    }

    fn coords(dof: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-PI..PI, dof)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn mass_matrix_is_symmetric_positive_definite(q in coords(5)) {
            let p = PlantParams::quadruple_reference();
            let m = mass_matrix(&q, &p).unwrap();
            for i in 0..5 {
                for j in 0..5 {
                    prop_assert!((m[(i, j)] - m[(j, i)]).abs() <= 1e-12);
                }
            }
            let lowest = linalg::symmetric_eigenvalues(&m)[0];
            prop_assert!(lowest > 0.0);
            prop_assert!((m[(0, 0)] - 0.5).abs() < 1e-14);
        }

        #[test]
        fn kinetic_energy_is_the_mass_matrix_quadratic_form(
            q in coords(5),
            v in proptest::collection::vec(-3.0f64..3.0, 5),
        ) {
            let p = PlantParams::quadruple_reference();
            let m = mass_matrix(&q, &p).unwrap();
            let vv = nalgebra::DVector::from_column_slice(&v);
            let quad = 0.5 * (vv.transpose() * &m * &vv)[(0, 0)];
            let (t, _) = total_energy(&State::new(q, v).unwrap(), &p).unwrap();
            prop_assert!(t >= 0.0);
            prop_assert!((t - quad).abs() <= 1e-12 * (1.0 + t));
        }

        #[test]
        fn forward_dynamics_satisfies_euler_lagrange(
            q in coords(5),
            v in proptest::collection::vec(-2.0f64..2.0, 5),
            force in -1.0f64..1.0,
            tau in proptest::collection::vec(-0.01f64..0.01, 4),
            dmp in 0.0f64..0.05,
        ) {
            let p = PlantParams::quadruple_reference()
                .with_damping_matrix(Matrix::identity(5, 5) * dmp)
                .unwrap();
            let x = State::new(q, v).unwrap();
            let mut gen = vec![force];
            gen.extend(&tau);
            let d = forward_dynamics_generalized(&x, &gen, &p).unwrap();

            let m = mass_matrix(&x.q, &p).unwrap();
            let cv = christoffel_velocity_product(&x, &p);
            let g = potential_gradient(&x.q, &p);
            let mq = &m * nalgebra::DVector::from_column_slice(&d.qddot);
            for k in 0..5 {
                let residual = mq[k] + cv[k] + dmp * x.qdot[k] + g[k] - gen[k];
                prop_assert!(residual.abs() <= 1e-9, "k={} residual={:e}", k, residual);
            }
        }

        #[test]
        fn interleaved_order_round_trip(v in proptest::collection::vec(-10.0f64..10.0, 8)) {
            let s = State::from_interleaved(&v).unwrap();
            prop_assert_eq!(s.to_interleaved(), v.clone());
            prop_assert_eq!(State::from_block(&s.to_block()).unwrap(), s);
        }
    }
}
