//! Spin equations of motion as operator identities on the grid.
//!
//! The left-hand side is always the commutator (1/i)[S, H] built from the
//! spin operator itself; the right-hand side is the printed closed form,
//! assembled term by term with operator products kept in written order and
//! every fraction's denominator placed as a left prefactor.
//!
//! Printed terms are grouped by the part of the spin operator they descend
//! from (e.g. Σ/2, iβc(p×α)/(2E_p) and the transverse correction for FW).
//! Each group is checked against the commutator of that part alone, so a
//! mismatch is attributed to the group's terms rather than to the whole
//! equation.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{dirac, Matrix4, Spinor4, I};
use crate::error::{Error, Result};
use crate::fields::FieldModel;
use crate::grid::{apply, apply_with_guard, gaussian_packet, Expr, GridSpec, LeafParity, PacketSpec, Projection, SpinorField};
use crate::hamiltonian::{HamiltonianId, NamedHamiltonian};
use crate::operators::{energy_ep, position_correction, spin_operator, Momentum3, PhysParams, SpinKind};
use crate::symbols::{self as sym, FieldSymbols, VecExpr};
use crate::vec3;

/// Schema tag of serialized reports.
pub const REPORT_SCHEMA: &str = "relspin.residual-report/1";

/// Group residuals at or below this on every ladder level: identity holds.
pub const HOLD_TOL: f64 = 1e-8;
/// Finest-level ceiling for a decreasing residual to count as converging.
pub const CONVERGE_TOL: f64 = 1e-4;
/// Required overall reduction across a ladder for "converging".
pub const CONVERGE_FACTOR: f64 = 10.0;
/// Relative-residual floor, in units of m0c²·‖ψ‖ (see [`relative_residual`]).
pub const SCALE_FLOOR: f64 = 1e-6;

fn component(kind: SpinKind, params: PhysParams, i: usize) -> Expr {
    let label = format!("S_{}{}", kind.name(), ["x", "y", "z"][i]);
    match kind {
        SpinKind::Dirac => Expr::Const(dirac().sigma[i] * 0.5),
        SpinKind::Fw => {
            Expr::momentum(label, move |k| spin_operator(SpinKind::Fw, Momentum3(k), &params).expect("FW spin operator is total").0[i])
        }
        SpinKind::Pryce => Expr::momentum_singular(label, move |k| {
            spin_operator(SpinKind::Pryce, Momentum3(k), &params).map(|s| s.0[i]).unwrap_or_else(|_| Matrix4::zero())
        }),
    }
}

/// S_kind as momentum-diagonal factors, componentwise equal to
/// [`spin_operator`] at every lattice momentum (Pryce maps k = 0 to zero).
pub fn spin_expr(kind: SpinKind, params: &PhysParams) -> VecExpr {
    let p = *params;
    [0, 1, 2].map(|i| component(kind, p, i))
}

/// The spin operator split into the parts the printed derivations
/// commute separately with H. The parts sum to [`spin_expr`].
pub fn spin_parts(kind: SpinKind, params: &PhysParams) -> Vec<(&'static str, VecExpr)> {
    let d = dirac();
    let p = *params;
    let half_sigma = d.sigma.map(|s| Expr::Const(s * 0.5));
    match kind {
        SpinKind::Dirac => vec![("sigma", half_sigma)],
        SpinKind::Fw => {
            let coupling = [0, 1, 2].map(|i| {
                Expr::momentum(format!("iβc(p×α)/2E_{i}"), move |k| {
                    let (j, l) = vec3::cyclic(i);
                    let pxa = d.alpha[l] * k[j] - d.alpha[j] * k[l];
                    (d.beta * pxa).scale(I * (p.c / (2.0 * energy_ep(Momentum3(k), &p))))
                })
            });
            let transverse = [0, 1, 2].map(|i| {
                Expr::momentum(format!("−c²p×(Σ×p)/2W_{i}"), move |k| {
                    let e = energy_ep(Momentum3(k), &p);
                    let w = 2.0 * e * (e + p.rest_energy());
                    let sp = crate::algebra::dot3(&d.sigma, k);
                    (d.sigma[i] * vec3::dot(k, k) - sp * k[i]) * (-p.c * p.c / w)
                })
            });
            vec![("sigma", half_sigma), ("beta-p-cross-alpha", coupling), ("relativistic", transverse)]
        }
        SpinKind::Pryce => {
            let beta_sigma = d.sigma.map(|s| Expr::Const(d.beta * s * 0.5));
            let projector = [0, 1, 2].map(|i| {
                Expr::momentum_singular(format!("(1−β)(Σ·p)p/2p²_{i}"), move |k| {
                    let sp = crate::algebra::dot3(&d.sigma, k);
                    (Matrix4::identity() - d.beta) * sp * (k[i] / (2.0 * vec3::dot(k, k)))
                })
            });
            vec![("beta-sigma", beta_sigma), ("projector", projector)]
        }
    }
}

/// r_kind = r + (momentum-dependent correction).
pub fn position_expr(kind: SpinKind, params: &PhysParams) -> VecExpr {
    let r = sym::position();
    if kind == SpinKind::Dirac {
        return r;
    }
    let p = *params;
    let corr = [0, 1, 2].map(|i| {
        Expr::momentum_singular(format!("δr_{}{}", kind.name(), i), move |k| {
            position_correction(kind, Momentum3(k), &p).map(|t| t.0[i]).unwrap_or_else(|_| Matrix4::zero())
        })
    });
    sym::add(&r, &corr)
}

/// r_kind × p + S_kind.
pub fn total_angular_momentum(kind: SpinKind, params: &PhysParams) -> VecExpr {
    sym::add(&sym::cross(&position_expr(kind, params), &sym::momentum()), &spin_expr(kind, params))
}

/// r×p + Σ/2.
pub fn standard_angular_momentum() -> VecExpr {
    sym::add(&sym::orbital(), &sym::scale(&sym::sigma(), 0.5))
}

/// The printed equations of motion known to the verifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Equation {
    DiracFree,
    FwFree,
    PryceFree,
    FwEm,
    PryceEm,
    FwDirect,
    PryceDirect,
}

impl Equation {
    pub const ALL: [Equation; 7] = [
        Equation::DiracFree,
        Equation::FwFree,
        Equation::PryceFree,
        Equation::FwEm,
        Equation::PryceEm,
        Equation::FwDirect,
        Equation::PryceDirect,
    ];

    pub fn of(kind: SpinKind, id: HamiltonianId) -> Result<Equation> {
        use HamiltonianId as H;
        use SpinKind as K;
        Ok(match (kind, id) {
            (K::Dirac, H::Free) => Equation::DiracFree,
            (K::Fw, H::Free) => Equation::FwFree,
            (K::Pryce, H::Free) => Equation::PryceFree,
            (K::Fw, H::DiracEm) => Equation::FwEm,
            (K::Pryce, H::DiracEm) => Equation::PryceEm,
            (K::Fw, H::Direct) => Equation::FwDirect,
            (K::Pryce, H::Direct) => Equation::PryceDirect,
            _ => {
                return Err(Error::Unsupported(format!("no printed equation of motion for spin kind {kind} with Hamiltonian {id}")));
            }
        })
    }

    pub fn kind(&self) -> SpinKind {
        match self {
            Equation::DiracFree => SpinKind::Dirac,
            Equation::FwFree | Equation::FwEm | Equation::FwDirect => SpinKind::Fw,
            Equation::PryceFree | Equation::PryceEm | Equation::PryceDirect => SpinKind::Pryce,
        }
    }

    pub fn hamiltonian(&self) -> HamiltonianId {
        match self {
            Equation::DiracFree | Equation::FwFree | Equation::PryceFree => HamiltonianId::Free,
            Equation::FwEm | Equation::PryceEm => HamiltonianId::DiracEm,
            Equation::FwDirect | Equation::PryceDirect => HamiltonianId::Direct,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Equation::DiracFree => "dirac_free",
            Equation::FwFree => "fw_free",
            Equation::PryceFree => "pryce_free",
            Equation::FwEm => "fw_em",
            Equation::PryceEm => "pryce_em",
            Equation::FwDirect => "fw_direct",
            Equation::PryceDirect => "pryce_direct",
        }
    }
}

impl fmt::Display for Equation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Equation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Equation::ALL.into_iter().find(|e| e.name() == s).ok_or_else(|| Error::InvalidArgument(format!("unknown equation `{s}`")))
    }
}

/// One printed right-hand-side term.
#[derive(Clone, Debug)]
pub struct RhsTerm {
    pub name: String,
    /// Spin-operator part this term descends from.
    pub group: &'static str,
    /// Hamiltonian term it descends from, when that attribution is unambiguous.
    pub source: Option<&'static str>,
    pub expr: VecExpr,
}

/// A printed right-hand side, with the spin-operator parts that define its
/// groups.
#[derive(Clone, Debug)]
pub struct Rhs {
    pub equation: Equation,
    pub terms: Vec<RhsTerm>,
    pub groups: Vec<(&'static str, VecExpr)>,
}

impl Rhs {
    pub fn total(&self) -> VecExpr {
        self.terms.iter().fold(sym::zero(), |acc, t| sym::add(&acc, &t.expr))
    }

    pub fn group_total(&self, group: &str) -> VecExpr {
        self.terms.iter().filter(|t| t.group == group).fold(sym::zero(), |acc, t| sym::add(&acc, &t.expr))
    }

    pub fn term(&self, name: &str) -> Option<&RhsTerm> {
        self.terms.iter().find(|t| t.name == name)
    }

    pub fn term_names(&self) -> Vec<&str> {
        self.terms.iter().map(|t| t.name.as_str()).collect()
    }

    /// Keeps the terms descending from the given Hamiltonian terms. Fails if
    /// any printed term has no unambiguous source.
    pub fn restricted(&self, sources: &[&str]) -> Result<Rhs> {
        if let Some(t) = self.terms.iter().find(|t| t.source.is_none()) {
            return Err(Error::Unsupported(format!(
                "{}: printed term '{}' cannot be attributed to a single Hamiltonian term, so a term-restricted Hamiltonian cannot be verified",
                self.equation, t.name
            )));
        }
        let terms = self.terms.iter().filter(|t| t.source.is_some_and(|s| sources.contains(&s))).cloned().collect();
        Ok(Rhs { equation: self.equation, terms, groups: self.groups.clone() })
    }
}

fn term(name: &str, group: &'static str, expr: VecExpr) -> RhsTerm {
    RhsTerm { name: name.to_string(), group, source: None, expr }
}

/// Direct-Hamiltonian term names by printed prefix.
fn direct_source(name: &str) -> &'static str {
    if name.starts_with("kinetic") {
        "kinetic"
    } else if name.starts_with("soc") || name.contains("field-derivative") {
        "field-derivative-soc"
    } else if name.contains("nutation") {
        "nutation"
    } else {
        "zeeman"
    }
}

/// s·v_i with a complex scalar prefactor on the left.
fn pre(prefactor: Expr, v: VecExpr) -> VecExpr {
    sym::left(&prefactor, &v)
}

/// The printed right-hand side of d S_kind/dt for Hamiltonian `id`.
///
/// Only the field-free case and the uniform-B gauge are supported; other
/// models return [`Error::Unsupported`].
pub fn rhs(kind: SpinKind, id: HamiltonianId, model: &FieldModel, params: &PhysParams) -> Result<Rhs> {
    let equation = Equation::of(kind, id)?;
    if id != HamiltonianId::Free && !model.is_uniform_b_gauge() {
        return Err(Error::Unsupported(format!(
            "the printed equations of motion assume a uniform magnetic field in the symmetric gauge; got {model:?}"
        )));
    }
    let (m, cc, e) = (params.m0, params.c, params.e);
    let f = FieldSymbols::new(*model);
    let (alpha, sigma, beta) = (sym::alpha(), sym::sigma(), sym::beta());
    let one_minus_beta = sym::one_minus_beta();
    let p = sym::momentum();
    let r = sym::position();
    let inv_e = sym::inv_energy(params);
    let inv_w = sym::inv_w(params);
    let inv_p2 = sym::inv_p_squared();
    let p2 = sym::p_squared();
    let b = f.b();
    // The printed Pryce–EM result is not attributed to spin parts.
    let groups = if equation == Equation::PryceEm { vec![("spin", spin_expr(kind, params))] } else { spin_parts(kind, params) };

    let terms = match equation {
        Equation::DiracFree => vec![term("velocity", "sigma", sym::scale(&sym::cross(&alpha, &p), -cc))],
        Equation::FwFree | Equation::PryceFree => {
            // Printed as "= 0": one group holding the whole operator.
            return Ok(Rhs { equation, terms: Vec::new(), groups: vec![("spin", spin_expr(kind, params))] });
        }
        Equation::FwEm => {
            let pi = f.kinetic_momentum(params);
            let a_cross_pi = sym::cross(&alpha, &pi);
            let orbital = inv_w.clone().scale_re(cc * e / 2.0);
            let spin = inv_w.clone().scale_re(cc * e / 4.0);
            let b_cross_p = sym::cross(&b, &p);
            let p_cross_a = sym::cross(&p, &alpha);
            vec![
                term("dirac-coupling", "sigma", sym::scale(&a_cross_pi, -cc)),
                term("beta-p-cross-pi", "beta-p-cross-alpha", pre(beta.clone() * inv_e.clone().scale_re(cc), sym::cross(&p, &pi))),
                term("relativistic-coupling", "relativistic", pre((p2.clone() * inv_w.clone()).scale_re(cc), a_cross_pi.clone())),
                term("orbital-field-a", "relativistic", pre(orbital.clone(), sym::left(&(sym::dot(&alpha, &r) * sym::dot(&b, &p)), &p))),
                term(
                    "orbital-field-b",
                    "relativistic",
                    pre(orbital.scale_re(-1.0), sym::left(&(sym::dot(&alpha, &b) * sym::dot(&r, &p)), &p)),
                ),
                term("spin-field-a", "relativistic", pre(spin.clone(), sym::right(&sigma, &sym::dot(&alpha, &b_cross_p)))),
                term("spin-field-b", "relativistic", pre(spin.clone(), sym::left(&sym::dot(&sigma, &alpha), &b_cross_p))),
                term("spin-field-c", "relativistic", pre(spin.clone().scale_re(-1.0), sym::left(&sym::dot(&sigma, &p_cross_a), &b))),
                term("spin-field-d", "relativistic", pre(spin.scale_re(-1.0), sym::left(&sym::dot(&sigma, &b), &p_cross_a))),
            ]
        }
        Equation::PryceEm => {
            let k = inv_p2.clone();
            vec![
                term(
                    "spin-field",
                    "spin",
                    pre(k.clone().scale_re(e * cc / 4.0), sym::right(&sym::cross(&sigma, &b), &sym::dot(&alpha, &p))),
                ),
                term(
                    "orbital-field-a",
                    "spin",
                    pre(k.clone().scale_re(e * cc / 2.0), sym::left(&(sym::dot(&alpha, &r) * sym::dot(&b, &p)), &p)),
                ),
                term("orbital-field-b", "spin", pre(k.scale_re(-e * cc / 2.0), sym::left(&(sym::dot(&r, &p) * sym::dot(&alpha, &b)), &p))),
            ]
        }
        Equation::FwDirect => {
            let (db, d2b, ef) = (f.db_dt(), f.d2b_dt2(), f.e());
            let soc = e / (4.0 * m * m * cc * cc);
            let fd = e / (8.0 * m * m * cc * cc);
            let nut = e / (16.0 * m * m * m * cc.powi(4));
            let p_cross_a = sym::cross(&p, &alpha);
            let e_cross_p = sym::cross(&ef, &p);
            let sigma_alpha = sym::dot(&sigma, &alpha);
            let b_dot_l = sym::dot(&b, &sym::orbital());
            let transverse = |v: &VecExpr| sym::cross(&p, &sym::cross(&sym::cross(&sigma, v), &p));
            vec![
                term("precession", "sigma", pre(beta.clone().scale_re(e / (2.0 * m)), sym::cross(&sigma, &b))),
                term(
                    "kinetic-orbital",
                    "beta-p-cross-alpha",
                    pre(inv_e.clone().scale_re(1.0 / (2.0 * m)), sym::right(&p_cross_a, &(p2.clone() - b_dot_l.scale_re(e)))),
                ),
                term(
                    "spin-alpha",
                    "beta-p-cross-alpha",
                    pre(inv_e.clone().scale_re(e / (6.0 * m)) * sigma_alpha.clone(), sym::cross(&b, &p)),
                ),
                term(
                    "relativistic-precession",
                    "relativistic",
                    pre((beta.clone() * inv_w.clone()).scale_re(-e / (4.0 * m)), transverse(&b)),
                ),
                term("soc-precession", "sigma", sym::scale(&sym::cross(&sigma, &e_cross_p), soc)),
                term(
                    "soc-coupling",
                    "beta-p-cross-alpha",
                    pre(inv_e.clone().scale(C64::new(0.0, soc)), sym::cross(&p_cross_a, &e_cross_p)),
                ),
                term("soc-relativistic", "relativistic", pre(inv_w.clone().scale_re(-soc), transverse(&e_cross_p))),
                term("field-derivative-precession", "sigma", sym::scale_c(&sym::cross(&sigma, &db), C64::new(0.0, -fd))),
                // −(ie/8m²c²)·i(p×α)×Ḃ/E_p
                term("field-derivative-coupling", "beta-p-cross-alpha", pre(inv_e.clone().scale_re(fd), sym::cross(&p_cross_a, &db))),
                // −(ie/8m²c²)·(−α×[Ḃ×(Σ×p)]/(2E_p))
                term(
                    "field-derivative-alpha",
                    "beta-p-cross-alpha",
                    pre(inv_e.clone().scale(C64::new(0.0, fd / 2.0)), sym::cross(&alpha, &sym::cross(&db, &sym::cross(&sigma, &p)))),
                ),
                term("field-derivative-relativistic", "relativistic", pre(inv_w.clone().scale(C64::new(0.0, -fd)), transverse(&db))),
                term("nutation", "sigma", pre(beta.clone().scale_re(-nut), sym::cross(&sigma, &d2b))),
                term("nutation-alpha", "beta-p-cross-alpha", pre(inv_e.clone().scale_re(-nut / 3.0) * sigma_alpha, sym::cross(&d2b, &p))),
                term("nutation-relativistic", "relativistic", pre((beta.clone() * inv_w).scale_re(-nut), transverse(&d2b))),
            ]
        }
        Equation::PryceDirect => {
            let (db, d2b, ef) = (f.db_dt(), f.d2b_dt2(), f.e());
            let fd = e / (8.0 * m * m * cc * cc);
            let nut = e / (16.0 * m * m * m * cc.powi(4));
            let bb = beta.clone() * one_minus_beta.clone();
            let proj = one_minus_beta.clone() * inv_p2.clone();
            let sigma_p = sym::dot(&sigma, &p);
            // [(Σ×V)·p] p_i
            let longitudinal = |v: &VecExpr| sym::left(&sym::dot(&sym::cross(&sigma, v), &p), &p);
            let sigma_sq = sym::dot(&sigma, &sigma);
            let q6 = sym::scale(&sym::add(&sym::left(&sigma_sq, &p), &sym::left(&sigma_p, &sigma)), 0.5);
            vec![
                term("precession", "beta-sigma", sym::scale(&sym::cross(&sigma, &b), e / (2.0 * m))),
                term(
                    "projector-precession",
                    "projector",
                    pre((bb.clone() * inv_p2.clone()).scale_re(e / (4.0 * m)), sym::cross(&sigma, &sym::cross(&p, &sym::cross(&b, &p)))),
                ),
                term(
                    "soc-precession",
                    "beta-sigma",
                    pre(beta.clone().scale_re(e / (4.0 * m * m * cc * cc)), sym::cross(&sigma, &sym::cross(&ef, &p))),
                ),
                term(
                    "projector-field-derivative-a",
                    "projector",
                    pre(proj.clone().scale_re(fd), sym::left(&(sigma_p.clone() * sym::dot(&sigma, &db)), &p)),
                ),
                term(
                    "projector-field-derivative-b",
                    "projector",
                    pre(proj.clone().scale_re(-fd), sym::left(&(sigma_p.clone() * sym::dot(&sym::orbital(), &db)), &p)),
                ),
                term("projector-field-derivative-c", "projector", pre(proj.scale_re(-fd), sym::right(&q6, &sym::dot(&db, &p)))),
                term("field-derivative-precession", "beta-sigma", pre(beta.clone().scale(C64::new(0.0, -fd)), sym::cross(&sigma, &db))),
                term(
                    "projector-field-derivative-d",
                    "projector",
                    pre((beta.clone() * bb.clone() * inv_p2.clone()).scale(C64::new(0.0, -fd)), longitudinal(&db)),
                ),
                term("nutation", "beta-sigma", sym::scale(&sym::cross(&sigma, &d2b), -nut)),
                term("projector-nutation", "projector", pre((bb * inv_p2).scale_re(-nut), longitudinal(&d2b))),
            ]
        }
    };
    let mut terms = terms;
    if id == HamiltonianId::Direct {
        for t in &mut terms {
            t.source = Some(direct_source(&t.name));
        }
    }
    Ok(Rhs { equation, terms, groups })
}

/// Block structure of every printed term (componentwise combined).
pub fn term_parities(rhs: &Rhs, tol: f64) -> Vec<(String, LeafParity)> {
    rhs.terms
        .iter()
        .map(|t| {
            let p = t.expr.iter().map(|e| e.parity(tol)).fold(LeafParity::Zero, combine_parity);
            (t.name.clone(), p)
        })
        .collect()
}

fn combine_parity(a: LeafParity, b: LeafParity) -> LeafParity {
    use LeafParity::*;
    match (a, b) {
        (Zero, x) | (x, Zero) => x,
        (x, y) if x == y => x,
        _ => Mixed,
    }
}

/// ‖d‖ / max(‖reference‖, SCALE_FLOOR·m0c²·‖ψ‖).
///
/// The floor keeps identities whose both sides vanish meaningful: the
/// roundoff of a cancelling commutator is ~1e−16·E_p, which an ε of order
/// 1e−14 would blow up into an O(1e−2) "relative" error.
pub fn relative_residual(diff: f64, reference: f64, psi_norm: f64, params: &PhysParams) -> f64 {
    diff / reference.max(SCALE_FLOOR * params.rest_energy() * psi_norm)
}

/// A test state together with its description.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StateDescriptor {
    pub label: String,
    pub center: [f64; 3],
    pub width: [f64; 3],
    pub k0: [f64; 3],
    /// Interleaved (re, im) pairs.
    pub polarization: [[f64; 2]; 4],
    pub projection: Projection,
}

impl StateDescriptor {
    pub fn from_spec(label: impl Into<String>, spec: &PacketSpec) -> Self {
        StateDescriptor {
            label: label.into(),
            center: spec.center,
            width: spec.width,
            k0: spec.k0,
            polarization: spec.polarization.0.map(|z| [z.re, z.im]),
            projection: spec.projection,
        }
    }

    pub fn spec(&self) -> PacketSpec {
        PacketSpec {
            center: self.center,
            width: self.width,
            k0: self.k0,
            polarization: Spinor4(self.polarization.map(|[re, im]| C64::new(re, im))),
            projection: self.projection,
        }
    }
}

/// Seed of the battery's random polarization.
pub const BATTERY_SEED: u64 = 0x5EED_0001;
/// Position-space width σ of every battery packet.
pub const BATTERY_WIDTH: f64 = 4.0;

/// Mean momenta of the battery: |k0| ≈ 1.00, 1.62, 1.97 (units m0c).
pub const BATTERY_MOMENTA: [[f64; 3]; 3] = [[0.48, -0.36, 0.8], [-0.9, 0.6, 1.2], [1.1, 1.0, -1.3]];

/// Two polarizations × three mean momenta, centred at the origin, σ = 4,
/// unprojected. The second polarization is drawn from a ChaCha8 stream with
/// [`BATTERY_SEED`].
pub fn standard_battery() -> Vec<StateDescriptor> {
    let mut rng = ChaCha8Rng::seed_from_u64(BATTERY_SEED);
    let random = Spinor4([0; 4].map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))));
    let pols = [("up", Spinor4::from_re([1.0, 0.0, 0.0, 0.0])), ("random", random.normalized().expect("nonzero spinor"))];
    let mut out = Vec::new();
    for (pname, pol) in pols {
        for (j, k0) in BATTERY_MOMENTA.iter().enumerate() {
            let spec = PacketSpec { center: [0.0; 3], width: [BATTERY_WIDTH; 3], k0: *k0, polarization: pol, projection: Projection::None };
            out.push(StateDescriptor::from_spec(format!("{pname}-k{j}"), &spec));
        }
    }
    out
}

/// Default refinement ladder: Δx = σ/4 with a 4σ boundary margin, then
/// Δx = 3σ/16 with a 6σ margin, for the battery packets.
pub fn default_ladder() -> Vec<GridSpec> {
    [(32, 32.0), (64, 48.0)].iter().map(|&(n, l)| GridSpec::cube(n, l).expect("valid ladder grid")).collect()
}

pub fn sample_states(grid: &GridSpec, states: &[StateDescriptor], params: &PhysParams) -> Result<Vec<SpinorField>> {
    states.iter().map(|s| gaussian_packet(grid, &s.spec(), params)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GridSummary {
    pub dim: usize,
    pub n: [usize; 3],
    pub l: [f64; 3],
}

impl From<&GridSpec> for GridSummary {
    fn from(g: &GridSpec) -> Self {
        GridSummary { dim: g.dim, n: g.n, l: g.l }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GroupResidual {
    pub name: String,
    pub terms: Vec<String>,
    /// Per state, per component.
    pub lhs_norm: Vec<[f64; 3]>,
    pub residual: Vec<[f64; 3]>,
    pub max_residual: f64,
    /// Same comparison after subtracting the zero-field equation from both
    /// sides: isolates the field-dependent terms from field-free omissions.
    pub field_residual: Vec<[f64; 3]>,
    pub max_field_residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct TermNorm {
    pub name: String,
    pub group: String,
    /// ‖term_i ψ‖ per state, per component.
    pub norm: Vec<[f64; 3]>,
}

/// Verification of one printed equation on one grid.
#[derive(Clone, Debug, Serialize)]
pub struct ResidualReport {
    pub schema: &'static str,
    pub equation: Equation,
    pub spin_kind: SpinKind,
    pub hamiltonian: HamiltonianId,
    pub hermitized: bool,
    pub model: FieldModel,
    pub params: PhysParams,
    pub t: f64,
    pub grid: GridSummary,
    pub states: Vec<StateDescriptor>,
    pub lhs_norm: Vec<[f64; 3]>,
    pub total_residual: Vec<[f64; 3]>,
    pub max_residual: f64,
    pub groups: Vec<GroupResidual>,
    pub terms: Vec<TermNorm>,
}

impl ResidualReport {
    pub fn group(&self, name: &str) -> Option<&GroupResidual> {
        self.groups.iter().find(|g| g.name == name)
    }
}

fn max3(v: &[[f64; 3]]) -> f64 {
    v.iter().flatten().fold(0.0, |a: f64, &b| a.max(b))
}

type Triple = [SpinorField; 3];

fn eval_vec(v: &VecExpr, psi: &SpinorField, t: f64) -> Result<Triple> {
    let a = apply(&v[0], psi, t)?;
    let b = apply(&v[1], psi, t)?;
    let c = apply(&v[2], psi, t)?;
    Ok([a, b, c])
}

fn sum_triples<'a>(grid: &GridSpec, items: impl IntoIterator<Item = &'a Triple>) -> Triple {
    let mut acc = [0, 1, 2].map(|_| SpinorField::zeros(*grid, crate::grid::Space::Position));
    for item in items {
        for i in 0..3 {
            acc[i].axpy(c1(), &item[i]);
        }
    }
    acc
}

fn c1() -> C64 {
    C64::new(1.0, 0.0)
}

/// (1/i)[S_i, H]ψ for each component, reusing a precomputed Hψ.
fn heisenberg_on(s: &VecExpr, h: &Expr, psi: &SpinorField, h_psi: &SpinorField, t: f64) -> Result<Triple> {
    // ψ itself passes the zero-mode guard; intermediates may carry a
    // tiny k = 0 weight from position factors and are not re-checked.
    let mut out = Vec::with_capacity(3);
    for si in s {
        let s_h = apply_with_guard(si, h_psi, t, f64::INFINITY)?;
        let h_s = apply_with_guard(h, &apply(si, psi, t)?, t, f64::INFINITY)?;
        out.push(s_h.sub(&h_s).scale(-I));
    }
    Ok(out.try_into().unwrap_or_else(|_| unreachable!()))
}

fn residuals(lhs: &Triple, rhs: &Triple, psi_norm: f64, params: &PhysParams) -> ([f64; 3], [f64; 3]) {
    let norm = [0, 1, 2].map(|i| lhs[i].norm());
    let res = [0, 1, 2].map(|i| relative_residual(lhs[i].clone().sub(&rhs[i]).norm(), norm[i], psi_norm, params));
    (norm, res)
}

fn difference(a: &Triple, b: &Triple) -> Triple {
    [0, 1, 2].map(|i| a[i].clone().sub(&b[i]))
}

/// Compares (1/i)[S_i, H]ψ with the printed right-hand side on each state.
///
/// `states` must be sampled on one grid from `descriptors` (same order).
/// Each group's left side is the commutator of its spin part alone; the
/// total is their sum.
pub fn verify(
    kind: SpinKind,
    hamiltonian: &NamedHamiltonian,
    descriptors: &[StateDescriptor],
    states: &[SpinorField],
    t: f64,
) -> Result<ResidualReport> {
    if descriptors.len() != states.len() || states.is_empty() {
        return Err(Error::InvalidArgument("verify needs one descriptor per state and at least one state".into()));
    }
    let grid = *states[0].grid();
    if states.iter().any(|s| *s.grid() != grid) {
        return Err(Error::InvalidArgument("all verification states must share one grid".into()));
    }
    let params = hamiltonian.params;
    let zero = FieldModel::Zero;
    let (mut rhs, mut rhs0) =
        (self::rhs(kind, hamiltonian.id, &hamiltonian.model, &params)?, self::rhs(kind, hamiltonian.id, &zero, &params)?);
    let mut h0 = crate::hamiltonian::build(hamiltonian.id, &zero, &params, None, hamiltonian.hermitized)?;
    let names = hamiltonian.term_names();
    if names != h0.term_names() {
        rhs = rhs.restricted(&names)?;
        rhs0 = rhs0.restricted(&names)?;
        h0 = h0.restricted(&names)?;
    }
    let h = &hamiltonian.total;

    struct PerState {
        total: ([f64; 3], [f64; 3]),
        groups: Vec<([f64; 3], [f64; 3], [f64; 3])>,
        terms: Vec<[f64; 3]>,
    }
    let per_state: Vec<PerState> = states
        .par_iter()
        .map(|psi| -> Result<PerState> {
            let n = psi.norm();
            let h_psi = apply(h, psi, t)?;
            let h0_psi = apply(&h0.total, psi, t)?;
            let term_out: Vec<Triple> = rhs.terms.iter().map(|term| eval_vec(&term.expr, psi, t)).collect::<Result<_>>()?;
            let term0_out: Vec<(&'static str, Triple)> = rhs0
                .terms
                .iter()
                .filter(|term| !term.expr.iter().all(Expr::is_zero))
                .map(|term| Ok((term.group, eval_vec(&term.expr, psi, t)?)))
                .collect::<Result<_>>()?;
            let mut lhs_groups = Vec::with_capacity(rhs.groups.len());
            let mut groups = Vec::with_capacity(rhs.groups.len());
            for (name, part) in &rhs.groups {
                let lhs = heisenberg_on(part, h, psi, &h_psi, t)?;
                let lhs0 = heisenberg_on(part, &h0.total, psi, &h0_psi, t)?;
                let r = sum_triples(&grid, rhs.terms.iter().zip(&term_out).filter(|(tm, _)| tm.group == *name).map(|(_, o)| o));
                let r0 = sum_triples(&grid, term0_out.iter().filter(|(g, _)| g == name).map(|(_, o)| o));
                let (norm, res) = residuals(&lhs, &r, n, &params);
                let (_, field_res) = residuals(&difference(&lhs, &lhs0), &difference(&r, &r0), n, &params);
                groups.push((norm, res, field_res));
                lhs_groups.push(lhs);
            }
            let total = residuals(&sum_triples(&grid, &lhs_groups), &sum_triples(&grid, &term_out), n, &params);
            let terms = term_out.iter().map(|o| o.clone().map(|f| f.norm())).collect();
            Ok(PerState { total, groups, terms })
        })
        .collect::<Result<_>>()?;

    let lhs_norm: Vec<[f64; 3]> = per_state.iter().map(|s| s.total.0).collect();
    let total_residual: Vec<[f64; 3]> = per_state.iter().map(|s| s.total.1).collect();
    let groups = rhs
        .groups
        .iter()
        .enumerate()
        .map(|(g, (name, _))| {
            let residual: Vec<[f64; 3]> = per_state.iter().map(|s| s.groups[g].1).collect();
            let field_residual: Vec<[f64; 3]> = per_state.iter().map(|s| s.groups[g].2).collect();
            GroupResidual {
                name: name.to_string(),
                terms: rhs.terms.iter().filter(|t| t.group == *name).map(|t| t.name.clone()).collect(),
                lhs_norm: per_state.iter().map(|s| s.groups[g].0).collect(),
                max_residual: max3(&residual),
                residual,
                max_field_residual: max3(&field_residual),
                field_residual,
            }
        })
        .collect();
    let terms = rhs
        .terms
        .iter()
        .enumerate()
        .map(|(j, term)| TermNorm {
            name: term.name.clone(),
            group: term.group.to_string(),
            norm: per_state.iter().map(|s| s.terms[j]).collect(),
        })
        .collect();
    Ok(ResidualReport {
        schema: REPORT_SCHEMA,
        equation: rhs.equation,
        spin_kind: kind,
        hamiltonian: hamiltonian.id,
        hermitized: hamiltonian.hermitized,
        model: hamiltonian.model,
        params,
        t,
        grid: GridSummary::from(&grid),
        states: descriptors.to_vec(),
        max_residual: max3(&total_residual),
        lhs_norm,
        total_residual,
        groups,
        terms,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    /// Within [`HOLD_TOL`] on every level.
    Holds,
    /// Decreasing to at most [`CONVERGE_TOL`] by a factor ≥ [`CONVERGE_FACTOR`].
    Converging,
    NonConverging,
}

impl Classification {
    pub fn is_acceptable(&self) -> bool {
        !matches!(self, Classification::NonConverging)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Classification::Holds => "holds",
            Classification::Converging => "converging",
            Classification::NonConverging => "non-converging",
        }
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Classifies a residual sequence ordered from coarsest to finest.
pub fn classify(residuals: &[f64]) -> Classification {
    if residuals.is_empty() || residuals.iter().any(|r| !r.is_finite()) {
        return Classification::NonConverging;
    }
    if residuals.iter().all(|&r| r <= HOLD_TOL) {
        return Classification::Holds;
    }
    let last = *residuals.last().unwrap();
    let first = residuals[0];
    let monotone = residuals.windows(2).all(|w| w[1] <= w[0] * 1.01 || w[1] <= HOLD_TOL);
    if monotone && last <= CONVERGE_TOL && (last <= HOLD_TOL || first >= CONVERGE_FACTOR * last) {
        Classification::Converging
    } else {
        Classification::NonConverging
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RefinementRow {
    pub n: [usize; 3],
    pub l: [f64; 3],
    pub total: f64,
    pub groups: BTreeMap<String, f64>,
    pub field_groups: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TermClassification {
    pub name: String,
    pub group: String,
    pub classification: Classification,
    /// Classification of the group's field-induced residual.
    pub field_classification: Classification,
    /// max over states and components of ‖term_i ψ‖ on the finest grid.
    pub norm: f64,
}

/// Refinement study of one printed equation.
#[derive(Clone, Debug, Serialize)]
pub struct EquationStudy {
    pub schema: &'static str,
    pub equation: Equation,
    pub spin_kind: SpinKind,
    pub hamiltonian: HamiltonianId,
    pub model: FieldModel,
    pub rows: Vec<RefinementRow>,
    pub classification: Classification,
    pub groups: BTreeMap<String, Classification>,
    pub field_groups: BTreeMap<String, Classification>,
    pub terms: Vec<TermClassification>,
    /// Report on the finest grid.
    pub finest: ResidualReport,
}

impl EquationStudy {
    /// Names of terms in non-converging groups.
    pub fn offending_terms(&self) -> Vec<&str> {
        self.terms.iter().filter(|t| !t.classification.is_acceptable()).map(|t| t.name.as_str()).collect()
    }
}

/// Runs [`verify`] across a grid ladder (coarse to fine) and classifies the
/// equation, each group and each term.
pub fn refinement_study(
    kind: SpinKind,
    hamiltonian: &NamedHamiltonian,
    descriptors: &[StateDescriptor],
    ladder: &[GridSpec],
    t: f64,
) -> Result<EquationStudy> {
    if ladder.is_empty() {
        return Err(Error::InvalidArgument("refinement ladder is empty".into()));
    }
    let mut reports = Vec::with_capacity(ladder.len());
    for grid in ladder {
        let states = sample_states(grid, descriptors, &hamiltonian.params)?;
        reports.push(verify(kind, hamiltonian, descriptors, &states, t)?);
    }
    let rows: Vec<RefinementRow> = reports
        .iter()
        .map(|r| RefinementRow {
            n: r.grid.n,
            l: r.grid.l,
            total: r.max_residual,
            groups: r.groups.iter().map(|g| (g.name.clone(), g.max_residual)).collect(),
            field_groups: r.groups.iter().map(|g| (g.name.clone(), g.max_field_residual)).collect(),
        })
        .collect();
    let classification = classify(&rows.iter().map(|r| r.total).collect::<Vec<_>>());
    let finest = reports.pop().unwrap();
    let groups: BTreeMap<String, Classification> =
        finest.groups.iter().map(|g| (g.name.clone(), classify(&rows.iter().map(|r| r.groups[&g.name]).collect::<Vec<_>>()))).collect();
    let field_groups: BTreeMap<String, Classification> = finest
        .groups
        .iter()
        .map(|g| (g.name.clone(), classify(&rows.iter().map(|r| r.field_groups[&g.name]).collect::<Vec<_>>())))
        .collect();
    let terms = finest
        .terms
        .iter()
        .map(|t| TermClassification {
            name: t.name.clone(),
            group: t.group.clone(),
            classification: groups[&t.group],
            field_classification: field_groups[&t.group],
            norm: max3(&t.norm),
        })
        .collect();
    Ok(EquationStudy {
        schema: REPORT_SCHEMA,
        equation: finest.equation,
        spin_kind: kind,
        hamiltonian: hamiltonian.id,
        model: hamiltonian.model,
        rows,
        classification,
        groups,
        field_groups,
        terms,
        finest,
    })
}

/// Per-state, per-component ‖(J_kind − J_std)ψ‖/‖ψ‖.
pub fn total_j_identity(kind: SpinKind, params: &PhysParams, states: &[SpinorField]) -> Result<Vec<[f64; 3]>> {
    let j_kind = total_angular_momentum(kind, params);
    let j_std = standard_angular_momentum();
    states
        .par_iter()
        .map(|psi| {
            let a = eval_vec(&j_kind, psi, 0.0)?;
            let b = eval_vec(&j_std, psi, 0.0)?;
            let n = psi.norm();
            Ok([0, 1, 2].map(|i| a[i].clone().sub(&b[i]).norm() / n))
        })
        .collect()
}

/// Zeeman sub-identity as 4×4 matrices:
/// max_i ‖(1/i)[Σ_i/2, −(eβ/2m0)Σ·B] − (eβ/2m0)(Σ×B)_i‖_F.
pub fn zeeman_identity_residual(b: [f64; 3], params: &PhysParams) -> f64 {
    let d = dirac();
    let h = crate::algebra::dot3(&d.sigma, b) * d.beta * (-params.e / (2.0 * params.m0));
    (0..3)
        .map(|i| {
            let (j, k) = vec3::cyclic(i);
            let lhs = crate::operators::heisenberg(&(d.sigma[i] * 0.5), &h);
            let rhs = d.beta * (d.sigma[j] * b[k] - d.sigma[k] * b[j]) * (params.e / (2.0 * params.m0));
            (lhs - rhs).norm_fro()
        })
        .fold(0.0, f64::max)
}

/// The Pryce leading term through its two-commutator assembly:
/// max_i ‖(1/2i)[βΣ_i, −(eβ/2m0)Σ·B] − (e/2m0)(Σ×B)_i‖_F.
pub fn pryce_zeeman_identity_residual(b: [f64; 3], params: &PhysParams) -> f64 {
    let d = dirac();
    let h = crate::algebra::dot3(&d.sigma, b) * d.beta * (-params.e / (2.0 * params.m0));
    (0..3)
        .map(|i| {
            let (j, k) = vec3::cyclic(i);
            let lhs = crate::operators::heisenberg(&(d.beta * d.sigma[i] * 0.5), &h);
            let rhs = (d.sigma[j] * b[k] - d.sigma[k] * b[j]) * (params.e / (2.0 * params.m0));
            (lhs - rhs).norm_fro()
        })
        .fold(0.0, f64::max)
}

/// Outcome of the field-off reduction of one equation.
#[derive(Clone, Debug, Serialize)]
pub struct ZeroFieldReduction {
    pub equation: Equation,
    /// Zero-field report: max relative ‖(1/i)[S, H|₀]ψ − RHS|₀ψ‖.
    pub consistency: f64,
    /// max relative ‖(1/i)[S, H|₀]ψ − (1/i)[S, H_D⁰]ψ‖: whether the
    /// field-off Hamiltonian reproduces the free-particle spin dynamics.
    pub free_deviation: f64,
    /// Printed terms that vanish identically without fields.
    pub vanishing_terms: Vec<String>,
    /// Printed terms that survive without fields.
    pub surviving_terms: Vec<String>,
}

impl ZeroFieldReduction {
    pub fn reduces(&self, tol: f64) -> bool {
        self.consistency <= tol && self.free_deviation <= tol
    }
}

/// Builds `kind`'s equation for `id` with the zero field and compares it
/// with itself and with the free-particle commutator on the given states.
pub fn zero_field_reduction(kind: SpinKind, id: HamiltonianId, params: &PhysParams, states: &[SpinorField]) -> Result<ZeroFieldReduction> {
    let zero = FieldModel::Zero;
    let h_zero = crate::hamiltonian::build(id, &zero, params, None, false)?;
    let h_free = crate::hamiltonian::build_free_dirac(params);
    let printed = rhs(kind, id, &zero, params)?;
    let s = spin_expr(kind, params);
    let r = printed.total();
    let floor = |n: f64| SCALE_FLOOR * params.rest_energy() * n;
    let (mut consistency, mut free_deviation): (f64, f64) = (0.0, 0.0);
    for psi in states {
        let n = psi.norm();
        let l0 = heisenberg_on(&s, &h_zero.total, psi, &apply(&h_zero.total, psi, 0.0)?, 0.0)?;
        let lf = heisenberg_on(&s, &h_free.total, psi, &apply(&h_free.total, psi, 0.0)?, 0.0)?;
        let r0 = eval_vec(&r, psi, 0.0)?;
        for i in 0..3 {
            let (a, b, c) = (l0[i].norm(), lf[i].norm(), r0[i].norm());
            consistency = consistency.max(l0[i].clone().sub(&r0[i]).norm() / a.max(c).max(floor(n)));
            free_deviation = free_deviation.max(l0[i].clone().sub(&lf[i]).norm() / a.max(b).max(floor(n)));
        }
    }
    let (vanishing, surviving): (Vec<_>, Vec<_>) = printed.terms.iter().partition(|t| t.expr.iter().all(Expr::is_zero));
    Ok(ZeroFieldReduction {
        equation: printed.equation,
        consistency,
        free_deviation,
        vanishing_terms: vanishing.into_iter().map(|t| t.name.clone()).collect(),
        surviving_terms: surviving.into_iter().map(|t| t.name.clone()).collect(),
    })
}

/// Residual of one (Hamiltonian term, spin part) cell.
#[derive(Clone, Debug, Serialize)]
pub struct SourceResidual {
    pub source: String,
    pub group: String,
    pub terms: Vec<String>,
    pub lhs_norm: f64,
    pub residual: f64,
}

/// Verifies the equation separately for each Hamiltonian term, against the
/// printed terms descending from it. Only meaningful where every printed
/// term has a single source (the direct Hamiltonian).
pub fn source_breakdown(
    kind: SpinKind,
    hamiltonian: &NamedHamiltonian,
    descriptors: &[StateDescriptor],
    states: &[SpinorField],
    t: f64,
) -> Result<Vec<SourceResidual>> {
    let mut out = Vec::new();
    for name in hamiltonian.term_names() {
        let h = hamiltonian.restricted(&[name])?;
        let report = verify(kind, &h, descriptors, states, t)?;
        for g in report.groups {
            out.push(SourceResidual {
                source: name.to_string(),
                lhs_norm: max3(&g.lhs_norm),
                residual: g.max_residual,
                group: g.name,
                terms: g.terms,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::dot3;
    use crate::fields::Envelope;
    use crate::grid::tests_support::random_field;
    use crate::hamiltonian::build;

    fn params() -> PhysParams {
        PhysParams::electron_scaled()
    }

    fn b_model() -> FieldModel {
        FieldModel::UniformB { b0: [0.1, -0.2, 0.3], envelope: Envelope::Sinusoid { offset: 1.0, amplitude: 0.3, omega: 0.7, phase: 0.1 } }
    }

    /// A field with a random spinor at every k except k = 0.
    fn momentum_noise(n: usize) -> SpinorField {
        let grid = GridSpec::cube(n, 10.0).unwrap();
        let mut f = random_field(grid, 3).into_space(crate::grid::Space::Momentum);
        let z = grid.zero_mode_index();
        f.data_mut()[z] = [C64::new(0.0, 0.0); 4];
        f
    }

    fn pointwise(op: &Expr, f: &SpinorField, m: impl Fn(vec3::Vec3) -> Matrix4) -> f64 {
        let out = apply(op, f, 0.0).unwrap().into_space(crate::grid::Space::Momentum);
        let g = *f.grid();
        f.data()
            .iter()
            .zip(out.data())
            .enumerate()
            .map(|(i, (v, w))| {
                let e = m(g.momentum(i)).apply_array(*v);
                (0..4).map(|c| (e[c] - w[c]).norm()).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn spin_expressions_match_matrix_operators_on_every_mode() {
        let f = momentum_noise(8);
        let p = params();
        for kind in SpinKind::ALL {
            let s = spin_expr(kind, &p);
            let parts = spin_parts(kind, &p);
            for i in 0..3 {
                let exact = |k: vec3::Vec3| spin_operator(kind, Momentum3(k), &p).map(|t| t.0[i]).unwrap_or_else(|_| Matrix4::zero());
                assert!(pointwise(&s[i], &f, exact) < 1e-13, "{kind} {i}");
                let sum = Expr::sum(parts.iter().map(|(_, v)| v[i].clone()));
                assert!(pointwise(&sum, &f, exact) < 1e-13, "{kind} parts {i}");
            }
        }
    }

    #[test]
    fn fw_spin_of_positive_packet_has_expected_direction() {
        // A positive-energy packet built from spin-up: ⟨S_FW,z⟩ = 1/2 exactly
        // for each mode (FW spin is the rest-frame spin).
        let grid = GridSpec::cube(32, 32.0).unwrap();
        let p = params();
        let spec = PacketSpec {
            center: [0.0; 3],
            width: [4.0; 3],
            k0: [0.3, -0.2, 0.5],
            polarization: Spinor4::from_re([1.0, 0.0, 0.0, 0.0]),
            projection: Projection::Positive,
        };
        let psi = gaussian_packet(&grid, &spec, &p).unwrap();
        let sz = crate::grid::expectation(&spin_expr(SpinKind::Fw, &p)[2], &psi, 0.0).unwrap().re / psi.norm_sqr();
        let sigma = crate::grid::expectation(&Expr::Const(dirac().sigma[2] * 0.5), &psi, 0.0).unwrap().re / psi.norm_sqr();
        assert!(sz > 0.45 && sz <= 0.5 + 1e-12, "⟨S_FW,z⟩ = {sz}");
        assert!((sz - sigma).abs() > 1e-4, "FW and Dirac spin should differ at finite p");
    }

    #[test]
    fn dirac_and_fw_spin_agree_near_rest() {
        let grid = GridSpec::cube(32, 32.0).unwrap();
        let p = params();
        let spec = PacketSpec {
            center: [0.0; 3],
            width: [4.0; 3],
            k0: [0.0, 0.0, 0.05],
            polarization: Spinor4::from_re([0.6, 0.8, 0.0, 0.0]),
            projection: Projection::Positive,
        };
        let psi = gaussian_packet(&grid, &spec, &p).unwrap();
        for i in 0..3 {
            let a = crate::grid::expectation(&spin_expr(SpinKind::Fw, &p)[i], &psi, 0.0).unwrap().re;
            let b = crate::grid::expectation(&spin_expr(SpinKind::Dirac, &p)[i], &psi, 0.0).unwrap().re;
            assert!((a - b).abs() < 2e-2, "component {i}: {a} vs {b}");
        }
    }

    #[test]
    fn free_equations_hold_on_battery() {
        let p = params();
        let battery = standard_battery();
        let grid = GridSpec::cube(32, 32.0).unwrap();
        let states = sample_states(&grid, &battery, &p).unwrap();
        let h = build_free(&p);
        for kind in SpinKind::ALL {
            let r = verify(kind, &h, &battery, &states, 0.0).unwrap();
            assert!(r.max_residual <= 1e-8, "{kind}: {}", r.max_residual);
            assert_eq!(r.states.len(), 6);
        }
    }

    fn build_free(p: &PhysParams) -> NamedHamiltonian {
        crate::hamiltonian::build_free_dirac(p)
    }

    #[test]
    fn zeeman_identities_are_exact() {
        let p = PhysParams::new(1.3, 2.0, -0.7).unwrap();
        for b in [[0.0, 0.0, 1.0], [0.3, -1.2, 2.5], [-4.0, 0.1, 0.7]] {
            assert!(zeeman_identity_residual(b, &p) <= 1e-13);
            assert!(pryce_zeeman_identity_residual(b, &p) <= 1e-13);
        }
    }

    #[test]
    fn zeeman_only_direct_sigma_group_matches_precession() {
        let p = params();
        let model = FieldModel::UniformB { b0: [0.0, 0.0, 0.5], envelope: Envelope::Constant };
        let battery = standard_battery();
        let grid = GridSpec::cube(32, 32.0).unwrap();
        let states = sample_states(&grid, &battery[..2], &p).unwrap();
        let h = build(HamiltonianId::Direct, &model, &p, None, false).unwrap().restricted(&["zeeman"]).unwrap();
        let r = verify(SpinKind::Fw, &h, &battery[..2], &states, 0.0).unwrap();
        let sigma = r.group("sigma").unwrap();
        assert_eq!(sigma.terms, vec!["precession".to_string()]);
        assert!(sigma.max_residual <= 1e-10, "{}", sigma.max_residual);
        // The EM equation cannot be split by Hamiltonian term.
        let em = build(HamiltonianId::DiracEm, &model, &p, None, false).unwrap().restricted(&["mass"]).unwrap();
        assert!(matches!(verify(SpinKind::Fw, &em, &battery[..2], &states, 0.0), Err(Error::Unsupported(_))));
    }

    #[test]
    fn commutator_is_antisymmetric_on_states() {
        let p = params();
        let h = build(HamiltonianId::Direct, &b_model(), &p, None, false).unwrap();
        let grid = GridSpec::cube(32, 32.0).unwrap();
        let psi = sample_states(&grid, &standard_battery()[..1], &p).unwrap().remove(0);
        for s in spin_expr(SpinKind::Pryce, &p) {
            let a = apply(&Expr::commutator(s.clone(), h.total.clone()), &psi, 0.3).unwrap();
            let b = apply(&Expr::commutator(h.total.clone(), s), &psi, 0.3).unwrap();
            assert!(a.add(&b).norm() <= 1e-13 * (1.0 + psi.norm()));
        }
    }

    #[test]
    fn printed_pryce_terms_have_the_claimed_block_structure() {
        let p = params();
        let em = rhs(SpinKind::Pryce, HamiltonianId::DiracEm, &b_model(), &p).unwrap();
        for (name, parity) in term_parities(&em, 1e-12) {
            assert_eq!(parity, LeafParity::Odd, "{name}");
        }
        let direct = rhs(SpinKind::Pryce, HamiltonianId::Direct, &b_model(), &p).unwrap();
        for (name, parity) in term_parities(&direct, 1e-12) {
            assert_eq!(parity, LeafParity::Even, "{name}");
        }
        let fw = rhs(SpinKind::Fw, HamiltonianId::Direct, &b_model(), &p).unwrap();
        let parities: Vec<_> = term_parities(&fw, 1e-12).into_iter().map(|(_, q)| q).collect();
        assert!(parities.contains(&LeafParity::Odd) && parities.contains(&LeafParity::Even));
    }

    #[test]
    fn total_angular_momentum_identity() {
        let p = params();
        let battery = standard_battery();
        let grid = GridSpec::cube(32, 32.0).unwrap();
        let states = sample_states(&grid, &battery, &p).unwrap();
        for kind in SpinKind::ALL {
            let r = total_j_identity(kind, &p, &states).unwrap();
            let worst = r.iter().flatten().fold(0.0, |a: f64, &b| a.max(b));
            assert!(worst <= 1e-6, "{kind}: {worst}");
            if kind == SpinKind::Dirac {
                assert_eq!(worst, 0.0);
            }
        }
    }

    #[test]
    fn classification_rules() {
        assert_eq!(classify(&[1e-15, 3e-12]), Classification::Holds);
        assert_eq!(classify(&[1e-3, 1e-5]), Classification::Converging);
        assert_eq!(classify(&[1e-3, 5e-4]), Classification::NonConverging);
        assert_eq!(classify(&[1e-2, 1e-9]), Classification::Converging);
        assert_eq!(classify(&[0.9, 0.95]), Classification::NonConverging);
        assert_eq!(classify(&[f64::NAN]), Classification::NonConverging);
        assert_eq!(classify(&[]), Classification::NonConverging);
    }

    #[test]
    fn battery_is_reproducible_and_valid() {
        let a = standard_battery();
        assert_eq!(a, standard_battery());
        assert_eq!(a.len(), 6);
        assert!(a.iter().any(|d| (vec3::norm(d.k0) - 1.0).abs() < 1e-3), "one state near |k0| = m0c");
        let p = params();
        for g in default_ladder() {
            let states = sample_states(&g, &a, &p).unwrap();
            for s in &states {
                assert!(crate::grid::zero_mode_weight(s) < crate::grid::DEFAULT_ZERO_MODE_GUARD);
            }
        }
    }

    #[test]
    fn zero_field_reduction_of_the_pryce_equations() {
        let p = params();
        let battery = standard_battery();
        let grid = GridSpec::cube(32, 32.0).unwrap();
        let states = sample_states(&grid, &battery[..2], &p).unwrap();
        for id in [HamiltonianId::DiracEm, HamiltonianId::Direct] {
            let z = zero_field_reduction(SpinKind::Pryce, id, &p, &states).unwrap();
            assert!(z.reduces(1e-8), "{z:?}");
            assert!(z.surviving_terms.is_empty());
        }
        // Printed FW results keep field-free terms that do not cancel.
        let em = zero_field_reduction(SpinKind::Fw, HamiltonianId::DiracEm, &p, &states).unwrap();
        assert!(em.free_deviation <= 1e-8 && em.consistency > 0.5, "{em:?}");
        let direct = zero_field_reduction(SpinKind::Fw, HamiltonianId::Direct, &p, &states).unwrap();
        assert_eq!(direct.surviving_terms, vec!["kinetic-orbital".to_string()]);
        assert!((direct.consistency - 2.0).abs() < 1e-6, "sign-flipped kinetic term: {direct:?}");
    }

    #[test]
    fn unsupported_combinations_are_rejected() {
        let p = params();
        assert!(matches!(Equation::of(SpinKind::Dirac, HamiltonianId::Direct), Err(Error::Unsupported(_))));
        let e_model = FieldModel::UniformE { e0: [0.0, 0.0, 1.0], envelope: Envelope::Constant };
        assert!(matches!(rhs(SpinKind::Fw, HamiltonianId::DiracEm, &e_model, &p), Err(Error::Unsupported(_))));
        for e in Equation::ALL {
            assert_eq!(e.name().parse::<Equation>().unwrap(), e);
            assert_eq!(Equation::of(e.kind(), e.hamiltonian()).unwrap(), e);
        }
    }

    #[test]
    fn pryce_verification_refuses_states_at_rest() {
        let p = params();
        let grid = GridSpec::cube(32, 32.0).unwrap();
        let mut d = standard_battery().remove(0);
        d.k0 = [0.0; 3];
        let states = sample_states(&grid, std::slice::from_ref(&d), &p).unwrap();
        let h = build_free(&p);
        assert!(matches!(verify(SpinKind::Pryce, &h, &[d], &states, 0.0), Err(Error::ZeroModeGuard { .. })));
    }

    #[test]
    fn report_serializes_with_schema() {
        let p = params();
        let battery = standard_battery();
        let grid = GridSpec::cube(32, 32.0).unwrap();
        let states = sample_states(&grid, &battery[..1], &p).unwrap();
        let r = verify(SpinKind::Dirac, &build_free(&p), &battery[..1], &states, 0.0).unwrap();
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        assert_eq!(v["schema"], REPORT_SCHEMA);
        assert_eq!(v["equation"], "dirac_free");
        assert_eq!(v["groups"][0]["terms"][0], "velocity");
        let _ = dot3;
    }
}
