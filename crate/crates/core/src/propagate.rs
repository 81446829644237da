//! Time evolution and trajectory observables.
//!
//! Two propagators: an exact-factor Strang split for the Dirac Hamiltonians
//! (both halves have closed-form pointwise exponentials), and a Krylov
//! (Lanczos for Hermitian, Arnoldi otherwise) exponential for anything built
//! as an [`Expr`], in particular the direct Hamiltonian which mixes r and p.
//! Time-dependent Hamiltonians are frozen at the step midpoint.

use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::algebra::{dirac, dot3, Matrix4, I};
use crate::dynamics::spin_expr;
use crate::error::{Error, Result};
use crate::fields::FieldModel;
use crate::grid::{apply, apply_with_guard, boundary_flux, zero_mode_weight, Expr, Space, SpinorField, BOUNDARY_SHELL_FRACTION};
use crate::hamiltonian::{HamiltonianId, NamedHamiltonian};
use crate::operators::{free_dirac_matrix, Momentum3, PhysParams, SpinKind};
use crate::symbols::{self as sym, VecExpr};
use crate::vec3;

/// Boundary-shell weight above which a run aborts.
pub const FLUX_ABORT: f64 = 1e-6;

/// Zero-mode guard for sampled observables. Singular factors vanish at
/// k = 0, so a weight w biases ⟨S_Py⟩ by at most about w; the weight is
/// recorded with every sample.
pub const OBSERVABLE_ZERO_MODE_GUARD: f64 = 1e-6;

/// exp(−iτ(cα·k + βm₀c²)) in closed form: h² = E_p².
pub fn kinetic_exponential(k: vec3::Vec3, params: &PhysParams, tau: f64) -> Matrix4 {
    let h = free_dirac_matrix(Momentum3(k), params);
    let e = (vec3::norm(k) * params.c).hypot(params.rest_energy());
    let (s, c) = (e * tau).sin_cos();
    Matrix4::identity() * c - h * (I * (s / e))
}

/// exp(−iτ(−ecα·A + eφ)) in closed form: (α·A)² = |A|².
pub fn potential_exponential(a: vec3::Vec3, phi: f64, params: &PhysParams, tau: f64) -> Matrix4 {
    let phase = C64::from_polar(1.0, -params.e * phi * tau);
    let amag = vec3::norm(a);
    if amag == 0.0 {
        return Matrix4::identity() * phase;
    }
    let theta = params.e * params.c * amag * tau;
    let (s, c) = theta.sin_cos();
    let alpha_a = dot3(&dirac().alpha, vec3::scale(a, 1.0 / amag));
    (Matrix4::identity() * c + alpha_a * (I * s)) * phase
}

fn check_finite(field: &SpinorField, what: &str) -> Result<()> {
    if field.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(format!("{what} produced a non-finite amplitude")))
    }
}

/// One Strang step of cα·(p − eA) + βm₀c² + eφ: half potential, full
/// kinetic, half potential, the fields taken at t + dt/2.
pub fn strang_step_dirac(field: SpinorField, model: &FieldModel, params: &PhysParams, t: f64, dt: f64) -> Result<SpinorField> {
    if !dt.is_finite() {
        return Err(Error::InvalidArgument(format!("Strang step needs a finite dt, got {dt}")));
    }
    if dt == 0.0 {
        return Ok(field);
    }
    let tm = t + 0.5 * dt;
    let p = *params;
    let m = *model;
    let has_potential = !matches!(m, FieldModel::Zero);
    let half_potential = |mut f: SpinorField| {
        if has_potential {
            f = f.into_space(Space::Position);
            f.map_position(|r, v| {
                let (a, phi) = m.potentials(r, tm);
                potential_exponential(a, phi, &p, 0.5 * dt).apply_array(v)
            });
        }
        f
    };
    let mut f = half_potential(field);
    f = f.into_space(Space::Momentum);
    f.map_momentum(|k, v| kinetic_exponential(k, &p, dt).apply_array(v));
    let f = half_potential(f);
    check_finite(&f, "Strang step")?;
    Ok(f)
}

/// Krylov subspace settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KrylovOptions {
    /// Maximum subspace dimension (≥ 8).
    pub subspace: usize,
    /// Bound on the a-posteriori error estimate, relative to ‖ψ‖.
    pub tol: f64,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        KrylovOptions { subspace: 24, tol: 1e-12 }
    }
}

/// exp(−iH(t + dt/2)·dt)ψ by a Krylov projection.
///
/// Uses the Lanczos recurrence when `h` is Hermitian and full Arnoldi
/// otherwise (the printed direct Hamiltonian); for the latter the norm is
/// left to drift.
pub fn krylov_step(h: &NamedHamiltonian, field: &SpinorField, t: f64, dt: f64, opts: &KrylovOptions) -> Result<SpinorField> {
    if opts.subspace < 8 {
        return Err(Error::InvalidArgument(format!("Krylov subspace must be at least 8, got {}", opts.subspace)));
    }
    if !dt.is_finite() {
        return Err(Error::InvalidArgument(format!("Krylov step needs a finite dt, got {dt}")));
    }
    let beta0 = field.norm();
    if dt == 0.0 || beta0 == 0.0 {
        return Ok(field.clone());
    }
    let tm = t + 0.5 * dt;
    let hermitian = h.is_hermitian();
    let m = opts.subspace;
    let mut basis: Vec<SpinorField> = vec![field.clone().scale(C64::new(1.0 / beta0, 0.0))];
    let mut hess = DMatrix::<C64>::zeros(m + 1, m);
    let mut dim = m;
    let mut breakdown = false;
    for j in 0..m {
        let mut w = apply_with_guard(&h.total, &basis[j], tm, f64::INFINITY)?;
        let lo = if hermitian { j.saturating_sub(1) } else { 0 };
        // Two Gram–Schmidt passes keep the basis orthonormal to roundoff.
        for _ in 0..2 {
            for (i, v) in basis.iter().enumerate().take(j + 1).skip(lo) {
                let c = v.inner(&w);
                hess[(i, j)] += c;
                w.axpy(-c, v);
            }
        }
        let hn = w.norm();
        hess[(j + 1, j)] = C64::new(hn, 0.0);
        if hn <= 1e-13 * (1.0 + hess.column(j).iter().map(|z| z.norm()).fold(0.0, f64::max)) {
            dim = j + 1;
            breakdown = true;
            break;
        }
        if j + 1 < m {
            basis.push(w.scale(C64::new(1.0 / hn, 0.0)));
        }
    }
    let small = hess.view((0, 0), (dim, dim)).map(|z| z * (-I * dt));
    let expm = small.exp();
    if !breakdown {
        let estimate = hess[(dim, dim - 1)].norm() * expm[(dim - 1, 0)].norm();
        if !(estimate <= opts.tol) {
            let ratio = (opts.tol / estimate).powf(1.0 / dim as f64);
            return Err(Error::KrylovNotConverged { estimate, suggested_dt: 0.9 * dt.abs() * ratio.min(0.5) });
        }
    }
    let mut out = SpinorField::zeros(*field.grid(), basis[0].space());
    for (j, v) in basis.iter().enumerate().take(dim) {
        out.axpy(expm[(j, 0)] * beta0, v);
    }
    check_finite(&out, "Krylov step")?;
    Ok(out)
}

/// Time-stepping scheme.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Method {
    /// Exact-factor split; Dirac Hamiltonians only.
    Strang,
    Krylov(KrylovOptions),
}

impl Method {
    /// Strang where it applies, Krylov otherwise.
    pub fn default_for(id: HamiltonianId) -> Method {
        match id {
            HamiltonianId::Free | HamiltonianId::DiracEm => Method::Strang,
            _ => Method::Krylov(KrylovOptions::default()),
        }
    }
}

/// Advances `field` by one step of length `dt` starting at `t`.
pub fn step(h: &NamedHamiltonian, method: &Method, field: SpinorField, t: f64, dt: f64) -> Result<SpinorField> {
    match method {
        Method::Strang => {
            if !matches!(h.id, HamiltonianId::Free | HamiltonianId::DiracEm) || h.terms.len() < h_full_len(h.id) {
                return Err(Error::Unsupported(format!(
                    "the Strang split applies to the full Dirac Hamiltonians only, not {}; use the Krylov method",
                    h.id
                )));
            }
            strang_step_dirac(field, &h.model, &h.params, t, dt)
        }
        Method::Krylov(opts) => krylov_step(h, &field, t, dt, opts),
    }
}

fn h_full_len(id: HamiltonianId) -> usize {
    match id {
        HamiltonianId::Free => 1,
        HamiltonianId::DiracEm => 4,
        _ => 0,
    }
}

/// Observables sampled along a run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Sample {
    pub t: f64,
    pub norm: f64,
    /// Re⟨H⟩ (Hermitian part), per unit norm.
    pub energy: f64,
    /// ⟨S⟩ per unit norm for Dirac, FW, Pryce (in that order).
    pub spin: [[f64; 3]; 3],
    pub r: [f64; 3],
    pub p: [f64; 3],
    pub flux: f64,
    /// Norm fraction in the k = 0 mode.
    pub zero_mode: f64,
}

/// CSV column contract of [`Trajectory::write_csv`].
pub const CSV_COLUMNS: [&str; 20] = [
    "t",
    "norm",
    "energy",
    "S_D_x",
    "S_D_y",
    "S_D_z",
    "S_FW_x",
    "S_FW_y",
    "S_FW_z",
    "S_Py_x",
    "S_Py_y",
    "S_Py_z",
    "rx",
    "ry",
    "rz",
    "px",
    "py",
    "pz",
    "flux",
    "zero_mode",
];

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
}

impl Trajectory {
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "{}", CSV_COLUMNS.join(","))?;
        for s in &self.samples {
            let mut row = vec![s.t, s.norm, s.energy];
            row.extend(s.spin.iter().flatten());
            row.extend(s.r);
            row.extend(s.p);
            row.push(s.flux);
            row.push(s.zero_mode);
            let cells: Vec<String> = row.iter().map(|x| format!("{x:.17e}")).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }

    /// Column `name` of the CSV contract as a series.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = CSV_COLUMNS.iter().position(|c| *c == name)?;
        Some(
            self.samples
                .iter()
                .map(|s| match idx {
                    0 => s.t,
                    1 => s.norm,
                    2 => s.energy,
                    3..=11 => s.spin[(idx - 3) / 3][(idx - 3) % 3],
                    12..=14 => s.r[idx - 12],
                    15..=17 => s.p[idx - 15],
                    18 => s.flux,
                    _ => s.zero_mode,
                })
                .collect(),
        )
    }
}

/// Observable operators, built once per run.
pub struct Observables {
    spin: [VecExpr; 3],
    r: VecExpr,
    p: VecExpr,
    energy: Expr,
}

impl Observables {
    pub fn new(h: &NamedHamiltonian) -> Self {
        let params = h.params;
        Observables {
            spin: SpinKind::ALL.map(|k| spin_expr(k, &params)),
            r: sym::position(),
            p: sym::momentum(),
            energy: h.hermitian_part(),
        }
    }

    fn mean(e: &Expr, psi: &SpinorField, t: f64, n2: f64) -> Result<f64> {
        Ok(psi.inner(&apply_with_guard(e, psi, t, OBSERVABLE_ZERO_MODE_GUARD)?).re / n2)
    }

    pub fn sample(&self, psi: &SpinorField, t: f64) -> Result<Sample> {
        let n2 = psi.norm_sqr();
        let vec = |v: &VecExpr| -> Result<[f64; 3]> {
            Ok([Self::mean(&v[0], psi, t, n2)?, Self::mean(&v[1], psi, t, n2)?, Self::mean(&v[2], psi, t, n2)?])
        };
        Ok(Sample {
            t,
            norm: n2.sqrt(),
            energy: Self::mean(&self.energy, psi, t, n2)?,
            spin: [vec(&self.spin[0])?, vec(&self.spin[1])?, vec(&self.spin[2])?],
            r: vec(&self.r)?,
            p: vec(&self.p)?,
            flux: boundary_flux(psi, BOUNDARY_SHELL_FRACTION),
            zero_mode: zero_mode_weight(psi),
        })
    }
}

/// A propagation job.
#[derive(Clone, Debug)]
pub struct RunSpec {
    pub hamiltonian: NamedHamiltonian,
    pub method: Method,
    pub dt: f64,
    pub steps: usize,
    /// Sample every `stride` steps (and always at t = 0).
    pub stride: usize,
    pub t0: f64,
}

/// Propagates `initial` and samples observables. Aborts with
/// [`Error::BoundaryFlux`] once the boundary-shell weight exceeds
/// [`FLUX_ABORT`].
pub fn run(spec: &RunSpec, initial: SpinorField) -> Result<(Trajectory, SpinorField)> {
    if !(spec.dt.is_finite() && spec.dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {}", spec.dt)));
    }
    if spec.stride == 0 {
        return Err(Error::InvalidArgument("stride must be at least 1".into()));
    }
    let obs = Observables::new(&spec.hamiltonian);
    let mut psi = initial;
    let mut traj = Trajectory::default();
    let mut record = |psi: &SpinorField, t: f64| -> Result<()> {
        let s = obs.sample(psi, t)?;
        if s.flux > FLUX_ABORT {
            return Err(Error::BoundaryFlux { flux: s.flux, t });
        }
        traj.samples.push(s);
        Ok(())
    };
    record(&psi, spec.t0)?;
    for n in 0..spec.steps {
        let t = spec.t0 + n as f64 * spec.dt;
        psi = step(&spec.hamiltonian, &spec.method, psi, t, spec.dt)?;
        if (n + 1) % spec.stride == 0 || n + 1 == spec.steps {
            record(&psi, t + spec.dt)?;
        }
    }
    Ok((traj, psi))
}

/// One point of an Ehrenfest closure series.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EhrenfestSample {
    pub t: f64,
    /// Centered difference of ⟨S⟩ (unnormalised).
    pub derivative: [f64; 3],
    /// ⟨(1/i)[S, H_h]⟩ − i⟨{S, H_a}⟩ at t.
    pub predicted: [f64; 3],
    pub residual: [f64; 3],
}

/// Compares the centered difference of ⟨ψ|S_kind|ψ⟩ along a run with the
/// Heisenberg prediction; H = H_h + H_a splits into Hermitian and
/// anti-Hermitian parts so the identity also closes for the printed direct
/// Hamiltonian.
pub fn ehrenfest_residual(
    h: &NamedHamiltonian,
    kind: SpinKind,
    method: &Method,
    initial: SpinorField,
    dt: f64,
    steps: usize,
) -> Result<Vec<EhrenfestSample>> {
    if steps < 2 {
        return Err(Error::InvalidArgument("an Ehrenfest series needs at least two steps".into()));
    }
    let s = spin_expr(kind, &h.params);
    let hh = h.hermitian_part();
    let ha = h.anti_hermitian_part();
    let commutators: Vec<Expr> = s.iter().map(|si| Expr::heisenberg(si.clone(), hh.clone())).collect();
    let anticommutators: Vec<Expr> =
        s.iter().map(|si| if ha.is_zero() { Expr::Zero } else { Expr::anticommutator(si.clone(), ha.clone()).scale(-I) }).collect();
    let mean = |e: &Expr, psi: &SpinorField, t: f64| -> Result<f64> { Ok(psi.inner(&apply(e, psi, t)?).re) };
    let spin_means =
        |psi: &SpinorField| -> Result<[f64; 3]> { Ok([mean(&s[0], psi, 0.0)?, mean(&s[1], psi, 0.0)?, mean(&s[2], psi, 0.0)?]) };

    let mut states = vec![initial];
    for n in 0..steps {
        let next = step(h, method, states[n].clone(), n as f64 * dt, dt)?;
        states.push(next);
    }
    let means: Vec<[f64; 3]> = states.iter().map(spin_means).collect::<Result<_>>()?;
    (1..steps)
        .map(|n| {
            let t = n as f64 * dt;
            let psi = &states[n];
            let derivative = [0, 1, 2].map(|i| (means[n + 1][i] - means[n - 1][i]) / (2.0 * dt));
            let mut predicted = [0.0; 3];
            for i in 0..3 {
                predicted[i] = mean(&commutators[i], psi, t)? + mean(&anticommutators[i], psi, t)?;
            }
            let residual = [0, 1, 2].map(|i| (derivative[i] - predicted[i]).abs());
            Ok(EhrenfestSample { t, derivative, predicted, residual })
        })
        .collect()
}
