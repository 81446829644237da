//! The Dirac, expanded Foldy–Wouthuysen and direct-coupling Hamiltonians as
//! operator expressions, each split into named terms.
//!
//! Term names are part of the report vocabulary:
//!
//! | Hamiltonian | terms |
//! |---|---|
//! | `free` | `free-dirac` |
//! | `dirac_em` | `kinetic-free`, `gauge-coupling`, `mass`, `scalar` |
//! | `fw_full` | `rest-mass`, `kinetic`, `zeeman`, `mass-correction`, `kinetic-zeeman-cross`, `B²-const`, `darwin`, `spin-orbit`, `dE/dt-term` |
//! | `direct` | `kinetic`, `zeeman`, `field-derivative-soc`, `nutation` |

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::FieldModel;
use crate::grid::Expr;
use crate::operators::{free_dirac_matrix, Momentum3, PhysParams};
use crate::symbols::{self as sym, FieldSymbols};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HamiltonianId {
    Free,
    DiracEm,
    FwFull,
    Direct,
}

impl HamiltonianId {
    pub const ALL: [HamiltonianId; 4] = [HamiltonianId::Free, HamiltonianId::DiracEm, HamiltonianId::FwFull, HamiltonianId::Direct];

    pub fn name(&self) -> &'static str {
        match self {
            HamiltonianId::Free => "free",
            HamiltonianId::DiracEm => "dirac_em",
            HamiltonianId::FwFull => "fw_full",
            HamiltonianId::Direct => "direct",
        }
    }
}

impl fmt::Display for HamiltonianId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for HamiltonianId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        HamiltonianId::ALL.into_iter().find(|h| h.name() == s).ok_or_else(|| Error::InvalidArgument(format!("unknown Hamiltonian '{s}'")))
    }
}

/// A Hamiltonian as a sum of named terms.
#[derive(Clone, Debug)]
pub struct NamedHamiltonian {
    pub id: HamiltonianId,
    pub total: Expr,
    pub terms: Vec<(String, Expr)>,
    pub hermitized: bool,
    pub model: FieldModel,
    pub params: PhysParams,
}

impl NamedHamiltonian {
    fn from_terms(id: HamiltonianId, terms: Vec<(String, Expr)>, hermitized: bool, model: FieldModel, params: PhysParams) -> Self {
        let total = Expr::sum(terms.iter().map(|(_, e)| e.clone()));
        NamedHamiltonian { id, total, terms, hermitized, model, params }
    }

    pub fn term(&self, name: &str) -> Option<&Expr> {
        self.terms.iter().find(|(n, _)| n == name).map(|(_, e)| e)
    }

    pub fn term_names(&self) -> Vec<&str> {
        self.terms.iter().map(|(n, _)| n.as_str()).collect()
    }

    /// The same Hamiltonian keeping only the named terms (in build order).
    pub fn restricted(&self, names: &[&str]) -> Result<NamedHamiltonian> {
        if let Some(bad) = names.iter().find(|n| self.term(n).is_none()) {
            return Err(Error::InvalidArgument(format!(
                "Hamiltonian {} has no term '{bad}' (terms: {})",
                self.id,
                self.term_names().join(", ")
            )));
        }
        let terms = self.terms.iter().filter(|(n, _)| names.contains(&n.as_str())).cloned().collect();
        Ok(NamedHamiltonian::from_terms(self.id, terms, self.hermitized, self.model, self.params))
    }

    /// Whether the total is manifestly Hermitian. The printed direct
    /// Hamiltonian with a time-dependent field is not manifestly so (its
    /// anti-Hermitian pieces cancel only through Faraday's law), so its
    /// anti-Hermitian part is then evaluated rather than assumed zero.
    pub fn is_hermitian(&self) -> bool {
        match self.id {
            HamiltonianId::Direct => self.hermitized || self.model.is_static(),
            _ => true,
        }
    }

    /// (H + H†)/2.
    pub fn hermitian_part(&self) -> Expr {
        if self.is_hermitian() {
            self.total.clone()
        } else {
            self.total.hermitian_part()
        }
    }

    /// (H − H†)/2; zero for Hermitian Hamiltonians.
    pub fn anti_hermitian_part(&self) -> Expr {
        if self.is_hermitian() {
            Expr::Zero
        } else {
            self.total.anti_hermitian_part()
        }
    }
}

pub fn build_free_dirac(params: &PhysParams) -> NamedHamiltonian {
    let p = *params;
    let h = Expr::momentum("cα·p + βm₀c²", move |k| free_dirac_matrix(Momentum3(k), &p));
    NamedHamiltonian::from_terms(HamiltonianId::Free, vec![("free-dirac".into(), h)], false, FieldModel::Zero, *params)
}

/// cα·(p − eA) + βm₀c² + eφ.
pub fn build_dirac_em(model: &FieldModel, params: &PhysParams) -> Result<NamedHamiltonian> {
    model.validate().map_err(Error::InvalidArgument)?;
    let f = FieldSymbols::new(*model);
    let (c, e) = (params.c, params.e);
    let alpha = sym::alpha();
    let terms = vec![
        ("kinetic-free".to_string(), sym::dot(&alpha, &sym::momentum()).scale_re(c)),
        ("gauge-coupling".to_string(), sym::dot(&alpha, &f.a()).scale_re(-e * c)),
        ("mass".to_string(), sym::beta().scale_re(params.rest_energy())),
        ("scalar".to_string(), f.phi().scale_re(e)),
    ];
    Ok(NamedHamiltonian::from_terms(HamiltonianId::DiracEm, terms, false, *model, *params))
}

/// Terms of the expanded FW Hamiltonian.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FwTerm {
    #[serde(rename = "rest-mass")]
    RestMass,
    #[serde(rename = "kinetic")]
    Kinetic,
    #[serde(rename = "zeeman")]
    Zeeman,
    #[serde(rename = "mass-correction")]
    MassCorrection,
    #[serde(rename = "kinetic-zeeman-cross")]
    KineticZeemanCross,
    #[serde(rename = "B²-const")]
    BSquaredConst,
    #[serde(rename = "darwin")]
    Darwin,
    #[serde(rename = "spin-orbit")]
    SpinOrbit,
    #[serde(rename = "dE/dt-term")]
    DeDt,
}

impl FwTerm {
    pub const ALL: [FwTerm; 9] = [
        FwTerm::RestMass,
        FwTerm::Kinetic,
        FwTerm::Zeeman,
        FwTerm::MassCorrection,
        FwTerm::KineticZeemanCross,
        FwTerm::BSquaredConst,
        FwTerm::Darwin,
        FwTerm::SpinOrbit,
        FwTerm::DeDt,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            FwTerm::RestMass => "rest-mass",
            FwTerm::Kinetic => "kinetic",
            FwTerm::Zeeman => "zeeman",
            FwTerm::MassCorrection => "mass-correction",
            FwTerm::KineticZeemanCross => "kinetic-zeeman-cross",
            FwTerm::BSquaredConst => "B²-const",
            FwTerm::Darwin => "darwin",
            FwTerm::SpinOrbit => "spin-orbit",
            FwTerm::DeDt => "dE/dt-term",
        }
    }

    /// Everything except the rest mass.
    pub fn default_mask() -> Vec<FwTerm> {
        FwTerm::ALL.into_iter().filter(|t| *t != FwTerm::RestMass).collect()
    }
}

impl FromStr for FwTerm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        FwTerm::ALL.into_iter().find(|t| t.name() == s).ok_or_else(|| Error::InvalidArgument(format!("unknown FW term '{s}'")))
    }
}

/// Expanded FW Hamiltonian restricted to the terms in `mask` (in canonical order).
pub fn build_fw_full(model: &FieldModel, params: &PhysParams, mask: &[FwTerm]) -> Result<NamedHamiltonian> {
    model.validate().map_err(Error::InvalidArgument)?;
    let f = FieldSymbols::new(*model);
    let (m, c, e) = (params.m0, params.c, params.e);
    let beta = sym::beta();
    let sigma = sym::sigma();
    let pi = f.kinetic_momentum(params);
    let pi2 = sym::dot(&pi, &pi);
    let sigma_b = sym::dot(&sigma, &f.b());
    let efield = f.e();
    let de_dt = f.de_dt();

    let mut terms = Vec::new();
    for t in FwTerm::ALL {
        if !mask.contains(&t) {
            continue;
        }
        let expr = match t {
            FwTerm::RestMass => beta.clone().scale_re(params.rest_energy()),
            FwTerm::Kinetic => (beta.clone() * pi2.clone()).scale_re(1.0 / (2.0 * m)),
            FwTerm::Zeeman => (beta.clone() * sigma_b.clone()).scale_re(-e / (2.0 * m)),
            FwTerm::MassCorrection => (beta.clone() * pi2.clone() * pi2.clone()).scale_re(-1.0 / (8.0 * m.powi(3) * c * c)),
            FwTerm::KineticZeemanCross => {
                (beta.clone() * Expr::anticommutator(pi2.clone(), sigma_b.clone())).scale_re(e / (8.0 * m.powi(3) * c * c))
            }
            FwTerm::BSquaredConst => {
                let b = f.b();
                (beta.clone() * sym::dot(&b, &b)).scale_re(-e * e / (8.0 * m.powi(3) * c * c))
            }
            // Every supported model is source-free, so ∇·E ≡ 0.
            FwTerm::Darwin => Expr::Zero,
            FwTerm::SpinOrbit => {
                let inner = sym::sub(&sym::cross(&pi, &efield), &sym::cross(&efield, &pi));
                sym::dot(&sigma, &inner).scale_re(e / (8.0 * m * m * c * c))
            }
            FwTerm::DeDt => {
                let inner = sym::add(&sym::cross(&pi, &de_dt), &sym::cross(&de_dt, &pi));
                (beta.clone() * sym::dot(&sigma, &inner)).scale(C64::new(0.0, -e / (16.0 * m.powi(3) * c.powi(4))))
            }
        };
        terms.push((t.name().to_string(), expr));
    }
    Ok(NamedHamiltonian::from_terms(HamiltonianId::FwFull, terms, false, *model, *params))
}

/// Direct spin–field coupling Hamiltonian
/// β(p−eA)²/2m₀ − (eβ/2m₀)Σ·B − (e/8m₀²c²)Σ·[2E×(p−eA) − i∂B/∂t] + (eβ/16m₀³c⁴)Σ·∂²B/∂t².
///
/// The −i∂B/∂t piece is not Hermitian; with `hermitize` each term is
/// replaced by (T + T†)/2.
pub fn build_fw_direct(model: &FieldModel, params: &PhysParams, hermitize: bool) -> Result<NamedHamiltonian> {
    model.validate().map_err(Error::InvalidArgument)?;
    let f = FieldSymbols::new(*model);
    let (m, c, e) = (params.m0, params.c, params.e);
    let beta = sym::beta();
    let sigma = sym::sigma();
    let pi = f.kinetic_momentum(params);

    let kinetic = (beta.clone() * sym::dot(&pi, &pi)).scale_re(1.0 / (2.0 * m));
    let zeeman = (beta.clone() * sym::dot(&sigma, &f.b())).scale_re(-e / (2.0 * m));
    let soc_inner = sym::sub(&sym::scale(&sym::cross(&f.e(), &pi), 2.0), &sym::scale_c(&f.db_dt(), C64::new(0.0, 1.0)));
    let soc = sym::dot(&sigma, &soc_inner).scale_re(-e / (8.0 * m * m * c * c));
    let nutation = (beta * sym::dot(&sigma, &f.d2b_dt2())).scale_re(e / (16.0 * m.powi(3) * c.powi(4)));

    let mut terms = vec![
        ("kinetic".to_string(), kinetic),
        ("zeeman".to_string(), zeeman),
        ("field-derivative-soc".to_string(), soc),
        ("nutation".to_string(), nutation),
    ];
    if hermitize {
        for (_, t) in terms.iter_mut() {
            *t = t.hermitian_part();
        }
    }
    Ok(NamedHamiltonian::from_terms(HamiltonianId::Direct, terms, hermitize, *model, *params))
}

/// Builds the Hamiltonian selected by `id`.
pub fn build(
    id: HamiltonianId,
    model: &FieldModel,
    params: &PhysParams,
    mask: Option<&[FwTerm]>,
    hermitize: bool,
) -> Result<NamedHamiltonian> {
    match id {
        HamiltonianId::Free => {
            if !matches!(model, FieldModel::Zero) {
                return Err(Error::InvalidArgument("the free Hamiltonian takes no field; use dirac_em".into()));
            }
            Ok(build_free_dirac(params))
        }
        HamiltonianId::DiracEm => build_dirac_em(model, params),
        HamiltonianId::FwFull => {
            let default = FwTerm::default_mask();
            build_fw_full(model, params, mask.unwrap_or(&default))
        }
        HamiltonianId::Direct => build_fw_direct(model, params, hermitize),
    }
}
