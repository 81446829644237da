//! The commands behind the `relspin` binary, as library functions returning
//! structured results. Printing and exit codes stay in the binary.

use std::fmt::Write as _;
use std::io::Write;

use serde::Serialize;

use crate::dynamics::{
    classify, refinement_study, sample_states, total_j_identity, verify, Classification, Equation, EquationStudy, ResidualReport,
};
use crate::error::{Error, Result};
use crate::fields::FieldModel;
use crate::grid::{gaussian_packet, SpinorField};
use crate::operators::{OperatorSuite, SpinKind};
use crate::propagate::{run, Trajectory};
use crate::scenario::Resolved;
use crate::vec3;

pub const VERIFY_SCHEMA: &str = "relspin.verify-dynamics/1";
pub const OPERATORS_SCHEMA: &str = "relspin.check-operators/1";

/// Bound on the total-angular-momentum identity residual.
pub const TOTAL_J_TOL: f64 = 1e-6;

/// Result of one printed equation: a single-grid report or a refinement
/// study.
#[derive(Clone, Debug, Serialize)]
#[serde(untagged)]
pub enum EquationResult {
    Report(Box<ResidualReport>),
    Study(Box<EquationStudy>),
}

#[derive(Clone, Debug, Serialize)]
pub struct EquationOutcome {
    pub equation: Equation,
    pub spin_kind: SpinKind,
    pub classification: Classification,
    /// Printed terms of the groups that are not acceptable.
    pub offending_terms: Vec<String>,
    /// max over states and components of the total-J residual, per grid.
    pub total_j: Vec<f64>,
    pub total_j_passed: bool,
    pub result: EquationResult,
}

impl EquationOutcome {
    pub fn passed(&self) -> bool {
        self.classification.is_acceptable() && self.total_j_passed
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyOutcome {
    pub schema: &'static str,
    pub refine: bool,
    pub equations: Vec<EquationOutcome>,
    pub passed: bool,
}

fn max_j(rows: &[[f64; 3]]) -> f64 {
    rows.iter().flatten().fold(0.0, |a, &b| a.max(b))
}

/// Verifies every selected spin equation of the scenario's Hamiltonian.
///
/// Without `refine` a single grid is used, so only "holds" is acceptable:
/// a residual above the hold tolerance cannot be shown to converge.
pub fn verify_dynamics(r: &Resolved, refine: bool) -> Result<VerifyOutcome> {
    let v = &r.verification;
    if v.battery.is_empty() {
        return Err(Error::config("verification.battery", "no states to verify on: use a 3D grid or give an initial_state"));
    }
    let mut equations = Vec::new();
    for &kind in &v.kinds {
        let equation = Equation::of(kind, r.hamiltonian.id)?;
        let outcome = if refine {
            let study = refinement_study(kind, &r.hamiltonian, &v.battery, &v.ladder, v.t)?;
            let mut total_j = Vec::new();
            for g in &v.ladder {
                let states = sample_states(g, &v.battery, &r.params)?;
                total_j.push(max_j(&total_j_identity(kind, &r.params, &states)?));
            }
            let j_ok = total_j.iter().all(|&j| j <= TOTAL_J_TOL) && total_j.windows(2).all(|w| w[1] <= w[0] * 1.01 || w[1] <= 1e-12);
            EquationOutcome {
                equation,
                spin_kind: kind,
                classification: study.classification,
                offending_terms: study.offending_terms().into_iter().map(String::from).collect(),
                total_j,
                total_j_passed: j_ok,
                result: EquationResult::Study(Box::new(study)),
            }
        } else {
            let states = sample_states(&r.grid, &v.battery, &r.params)?;
            let report = verify(kind, &r.hamiltonian, &v.battery, &states, v.t)?;
            let j = max_j(&total_j_identity(kind, &r.params, &states)?);
            let bad_groups: Vec<&str> =
                report.groups.iter().filter(|g| !classify(&[g.max_residual]).is_acceptable()).map(|g| g.name.as_str()).collect();
            let offending_terms = report.terms.iter().filter(|t| bad_groups.contains(&t.group.as_str())).map(|t| t.name.clone()).collect();
            EquationOutcome {
                equation,
                spin_kind: kind,
                classification: classify(&[report.max_residual]),
                offending_terms,
                total_j: vec![j],
                total_j_passed: j <= TOTAL_J_TOL,
                result: EquationResult::Report(Box::new(report)),
            }
        };
        equations.push(outcome);
    }
    let passed = equations.iter().all(EquationOutcome::passed);
    Ok(VerifyOutcome { schema: VERIFY_SCHEMA, refine, equations, passed })
}

pub fn verify_table(o: &VerifyOutcome) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<14} {:<16} {:>12} {:>12}  offending terms", "equation", "classification", "residual", "total-J");
    for e in &o.equations {
        let residual = match &e.result {
            EquationResult::Report(r) => r.max_residual,
            EquationResult::Study(st) => st.finest.max_residual,
        };
        let j = e.total_j.last().copied().unwrap_or(0.0);
        let _ = writeln!(
            s,
            "{:<14} {:<16} {:>12.3e} {:>12.3e}  {}",
            e.equation.name(),
            e.classification.name(),
            residual,
            j,
            if e.offending_terms.is_empty() { "-".to_string() } else { e.offending_terms.join(", ") }
        );
        if let EquationResult::Report(r) = &e.result {
            for g in &r.groups {
                let _ = writeln!(s, "    {:<22} {:<16} {:.3e}", g.name, classify(&[g.max_residual]).name(), g.max_residual);
            }
        }
        if let EquationResult::Study(st) = &e.result {
            for (g, c) in &st.groups {
                let series: Vec<String> = st.rows.iter().map(|row| format!("{:.3e}", row.groups[g])).collect();
                let _ = writeln!(s, "    {:<22} {:<16} {}", g, c.name(), series.join(" → "));
            }
        }
    }
    let _ = writeln!(s, "{}", if o.passed { "PASS" } else { "FAIL" });
    s
}

#[derive(Clone, Debug, Serialize)]
pub struct OperatorsOutcome {
    pub schema: &'static str,
    #[serde(flatten)]
    pub suite: OperatorSuite,
}

pub fn operators_table(o: &OperatorSuite) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{} momenta, |p| ≤ {}, seed {:#x}", o.samples, o.pmax, o.seed);
    let _ = writeln!(s, "{:<6} {:>12} {:>12} {:>12} {:>12}  result", "kind", "su2", "spectrum", "[S,H_free]", "prediction");
    for k in &o.kinds {
        let pred = k.prediction_error.map(|p| format!("{p:.3e}")).unwrap_or_else(|| "-".into());
        let verdict = match (k.kind, k.passed) {
            (SpinKind::Dirac, true) => "improper as predicted",
            (_, true) => "proper",
            (_, false) => "FAIL",
        };
        let _ = writeln!(
            s,
            "{:<6} {:>12.3e} {:>12.3e} {:>12.3e} {:>12}  {}",
            k.kind.name(),
            k.su2,
            k.spectrum,
            k.free_commutation,
            pred,
            verdict
        );
    }
    let _ = writeln!(s, "{}", if o.passed { "PASS" } else { "FAIL" });
    s
}

/// The scenario's initial state sampled on its grid.
pub fn initial_field(r: &Resolved) -> Result<SpinorField> {
    gaussian_packet(&r.grid, &r.require_initial()?.spec(), &r.params)
}

/// Propagates the initial state and samples the observables.
pub fn simulate(r: &Resolved) -> Result<(Trajectory, SpinorField)> {
    let spec = r.run_spec(r.hamiltonian.clone())?;
    run(&spec, initial_field(r)?)
}

/// One row of the field-strength sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub b0: f64,
    pub t: f64,
    /// |Δ⟨S_Py⟩ − Δ⟨Σ/2⟩|, Δ relative to t0.
    pub d_py: f64,
    /// |Δ⟨S_FW⟩ − Δ⟨S_Py⟩|.
    pub d_fw: f64,
}

pub const SWEEP_COLUMNS: [&str; 4] = ["b0", "t", "d_py", "d_fw"];

/// Divergence of the three spin expectation values over a ladder of field
/// strengths |B0| (internal units), each along the scenario's B direction.
///
/// The metrics compare displacements from the initial values, so at zero
/// field they vanish for any state on which all three spins are conserved
/// (positive-energy packets).
pub fn sweep(r: &Resolved, strengths: &[f64]) -> Result<Vec<SweepRow>> {
    let (b0, envelope) = match r.model {
        FieldModel::UniformB { b0, envelope } => (b0, envelope),
        _ => return Err(Error::config("field", "sweep needs a uniform_b field to set the direction")),
    };
    let norm = vec3::norm(b0);
    if norm == 0.0 {
        return Err(Error::config("field.b0", "sweep needs a nonzero direction"));
    }
    if strengths.is_empty() {
        return Err(Error::config("--field-grid", "needs at least one strength"));
    }
    if let Some(bad) = strengths.iter().find(|b| !b.is_finite()) {
        return Err(Error::config("--field-grid", format!("strength {bad} is not finite")));
    }
    let psi0 = initial_field(r)?;
    let mut rows = Vec::new();
    for &b in strengths {
        let model = FieldModel::UniformB { b0: vec3::scale(b0, b / norm), envelope };
        let h = r.hamiltonian_with(&model)?;
        let (traj, _) = run(&r.run_spec(h)?, psi0.clone())?;
        let s0 = traj.samples[0].spin;
        for s in &traj.samples {
            let d = |a: usize, c: usize| vec3::norm(vec3::sub(vec3::sub(s.spin[a], s0[a]), vec3::sub(s.spin[c], s0[c])));
            rows.push(SweepRow { b0: b, t: s.t, d_py: d(2, 0), d_fw: d(1, 2) });
        }
    }
    Ok(rows)
}

pub fn write_sweep_csv(rows: &[SweepRow], mut w: impl Write) -> Result<()> {
    writeln!(w, "{}", SWEEP_COLUMNS.join(","))?;
    for r in rows {
        writeln!(w, "{:.17e},{:.17e},{:.17e},{:.17e}", r.b0, r.t, r.d_py, r.d_fw)?;
    }
    Ok(())
}
