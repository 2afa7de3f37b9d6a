//! Bundled reference results for the quadruple pendulum and the regression
//! report that compares a fresh pipeline run against them.

use serde::{Deserialize, Serialize};

use crate::dynamics::PlantParams;
use crate::linalg::{self, Matrix};
use crate::linearization::{self, EquilibriumKind, StateSpace};
use crate::simulation::{self, SimConfig};
use crate::synthesis::{self, Gains, LqrWeights, PoleDesign};

const A_CSV: &str = include_str!("../fixtures/reference/A.csv");
const B_CSV: &str = include_str!("../fixtures/reference/B.csv");
const K_LQR_CSV: &str = include_str!("../fixtures/reference/K_lqr.csv");
const K_PP_CSV: &str = include_str!("../fixtures/reference/K_pp.csv");
const VALUES_JSON: &str = include_str!("../fixtures/reference/values.json");

/// Relative tolerance for matrix entries, and the absolute tolerance used
/// instead for entries smaller than one.
pub const ENTRY_RTOL: f64 = 5e-3;
pub const ENTRY_ATOL: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepExpectation {
    pub settling_time: f64,
    pub stabilized: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceValues {
    #[serde(rename = "N_lqr")]
    pub n_lqr: f64,
    #[serde(rename = "N_pp")]
    pub n_pp: f64,
    pub overshoot_pct: f64,
    pub settling_time: f64,
    pub table2: Vec<SweepExpectation>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceData {
    pub a: Matrix,
    pub b: Matrix,
    pub k_lqr: Vec<f64>,
    pub k_pp: Vec<f64>,
    pub values: ReferenceValues,
}

impl ReferenceData {
    pub fn bundled() -> Self {
        let m = |s: &str| linalg::csv::from_csv(s).expect("bundled matrix parses");
        Self {
            a: m(A_CSV),
            b: m(B_CSV),
            k_lqr: m(K_LQR_CSV).iter().copied().collect(),
            k_pp: m(K_PP_CSV).iter().copied().collect(),
            values: serde_json::from_str(VALUES_JSON).expect("bundled values parse"),
        }
    }

    /// Reference target for the second entry of `B`, used to calibrate the
    /// cart mass.
    pub fn b_cart(&self) -> f64 {
        self.b[(1, 0)]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryDeviation {
    pub row: usize,
    pub col: usize,
    pub ours: f64,
    pub reference: f64,
    /// Relative error for `|reference| ≥ 1`, absolute error otherwise.
    pub error: f64,
    pub within: bool,
}

pub fn entry_deviations(ours: &Matrix, reference: &Matrix) -> Vec<EntryDeviation> {
    assert_eq!(ours.shape(), reference.shape(), "compared matrices differ in shape");
    let mut out = Vec::with_capacity(ours.len());
    for row in 0..ours.nrows() {
        for col in 0..ours.ncols() {
            let (x, r) = (ours[(row, col)], reference[(row, col)]);
            let (error, within) = if r.abs() < 1.0 {
                ((x - r).abs(), (x - r).abs() <= ENTRY_ATOL)
            } else {
                let e = (x - r).abs() / r.abs();
                (e, e <= ENTRY_RTOL)
            };
            out.push(EntryDeviation { row, col, ours: x, reference: r, error, within });
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Match,
    Deviates,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckItem {
    pub name: String,
    pub verdict: Verdict,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub cart_mass: f64,
    pub items: Vec<CheckItem>,
    pub matrix_deviations: Vec<EntryDeviation>,
}

impl CheckReport {
    pub fn render(&self) -> String {
        let mut out = format!("calibrated cart mass: {:.6} kg\n", self.cart_mass);
        for item in &self.items {
            let tag = match item.verdict {
                Verdict::Match => "MATCH   ",
                Verdict::Deviates => "DEVIATES",
            };
            out += &format!("{tag} {:<28} {}\n", item.name, item.detail);
        }
        let off: Vec<_> = self.matrix_deviations.iter().filter(|d| !d.within).collect();
        if !off.is_empty() {
            out += "entries outside tolerance:\n";
            for d in off {
                out += &format!(
                    "  [{},{}] ours {:.6} reference {:.6} error {:.3e}\n",
                    d.row, d.col, d.ours, d.reference, d.error
                );
            }
        }
        out
    }
}

fn item(name: &str, ok: bool, detail: String) -> CheckItem {
    CheckItem {
        name: name.into(),
        verdict: if ok { Verdict::Match } else { Verdict::Deviates },
        detail,
    }
}

/// Calibrate the cart mass, linearize, synthesize both controllers, run the
/// settling-time sweep and compare everything with the bundled results.
pub fn check(sim: &SimConfig) -> Result<CheckReport, Box<dyn std::error::Error + Send + Sync>> {
    let reference = ReferenceData::bundled();
    let guess = PlantParams::quadruple(1.0)?;
    let fit = linearization::calibrate_cart_mass(&guess, reference.b_cart())?;
    let plant = guess.with_cart_mass(fit.cart_mass)?;
    let eq = linearization::find_equilibrium(&plant, EquilibriumKind::Upright)?;
    let ss = linearization::linearize(&plant, &eq)?;

    let mut items = Vec::new();
    let mut deviations = entry_deviations(&ss.a, &reference.a);
    deviations.extend(entry_deviations(&ss.b, &reference.b).into_iter().map(|mut d| {
        d.col += ss.a.ncols();
        d
    }));
    let bad = deviations.iter().filter(|d| !d.within).count();
    items.push(item(
        "A, B entries",
        bad == 0,
        format!("{} of {} entries within tolerance", deviations.len() - bad, deviations.len()),
    ));

    let lqr = synthesis::lqr_gain(&ss, &LqrWeights::position_heavy(ss.states()))?;
    items.extend(compare_gain("K (LQR)", &lqr, &reference.k_lqr));
    items.push(item(
        "N (LQR)",
        (lqr.n - reference.values.n_lqr).abs() <= 1e-3,
        format!("{:.6} vs {}", lqr.n, reference.values.n_lqr),
    ));

    let design = PoleDesign::new(reference.values.overshoot_pct, reference.values.settling_time)?;
    let pp = synthesis::design_pole_placement(&ss, &design)?;
    items.extend(compare_gain("K (pole placement)", &pp, &reference.k_pp));
    items.push(item(
        "N (pole placement)",
        (pp.n - reference.values.n_pp).abs() <= 0.01 * reference.values.n_pp.abs(),
        format!("{:.6e} vs {}", pp.n, reference.values.n_pp),
    ));
    items.push(dc_gain_item(&ss, &pp)?);

    let ts: Vec<f64> = reference.values.table2.iter().map(|r| r.settling_time).collect();
    let rows = simulation::sweep_settling_times(&plant, &ss, &design, &ts, sim);
    let matches = rows
        .iter()
        .zip(&reference.values.table2)
        .filter(|(r, e)| r.stabilized == e.stabilized)
        .count();
    let pattern: Vec<&str> = rows.iter().map(|r| if r.stabilized { "Yes" } else { "No" }).collect();
    items.push(item(
        "settling-time sweep",
        matches == rows.len(),
        format!("{matches}/{} rows agree; ours {}", rows.len(), pattern.join(",")),
    ));

    Ok(CheckReport { cart_mass: fit.cart_mass, items, matrix_deviations: deviations })
}

fn compare_gain(name: &str, ours: &Gains, reference: &[f64]) -> Vec<CheckItem> {
    let signs = ours
        .k
        .iter()
        .zip(reference)
        .filter(|(a, b)| a.signum() == b.signum())
        .count();
    let worst = ours
        .k
        .iter()
        .zip(reference)
        .map(|(a, b)| (a - b).abs() / b.abs().max(1.0))
        .fold(0.0f64, f64::max);
    vec![
        item(
            &format!("{name} signs"),
            signs == reference.len(),
            format!("{signs}/{} entries share the sign", reference.len()),
        ),
        item(
            &format!("{name} values"),
            worst <= 0.01,
            format!("worst relative deviation {worst:.3e}"),
        ),
    ]
}

/// Linear closed-loop DC gain from reference to cart position.
pub fn closed_loop_dc_gain(ss: &StateSpace, g: &Gains) -> Result<f64, synthesis::SynthesisError> {
    let acl = synthesis::closed_loop(&ss.a, &ss.b, &g.k)?;
    let z = linalg::lu_solve(&acl, &(&ss.b * g.n))?;
    Ok(-(&ss.c * z)[(0, 0)])
}

fn dc_gain_item(ss: &StateSpace, g: &Gains) -> Result<CheckItem, synthesis::SynthesisError> {
    let dc = closed_loop_dc_gain(ss, g)?;
    Ok(item(
        "DC gain (pole placement)",
        (dc - 1.0).abs() <= 1e-9,
        format!("|y_ss/r − 1| = {:.3e}", (dc - 1.0).abs()),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_data_shapes() {
        let r = ReferenceData::bundled();
        assert_eq!(r.a.shape(), (10, 10));
        assert_eq!(r.b.shape(), (10, 1));
        assert_eq!(r.k_lqr.len(), 10);
        assert_eq!(r.k_pp.len(), 10);
        assert_eq!(r.values.table2.len(), 7);
        assert_eq!(r.b_cart(), 7.76);
    }

    #[test]
    fn deviation_tolerances() {
        let a = Matrix::from_row_slice(1, 3, &[100.0, 0.5, -2.0]);
        let b = Matrix::from_row_slice(1, 3, &[100.4, 0.54, -2.02]);
        let d = entry_deviations(&b, &a);
        assert!(d[0].within);
        assert!(d[1].within);
        assert!(!d[2].within);
    }
}
