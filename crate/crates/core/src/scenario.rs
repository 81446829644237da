//! Scenario files: versioned JSON describing physical parameters, grid,
//! field, Hamiltonian, initial state, propagation and verification.
//!
//! Everything is converted to internal units (ħ = 1, and with
//! `"units": "natural"` the numbers are taken as given) at load time, and
//! every invariant is checked there; errors name the offending field path.
//!
//! With `"units": "si"` the reference scales are the electron's:
//! length ħ/(m_e c) ≈ 3.86e−13 m, time ħ/(m_e c²) ≈ 1.29e−21 s, magnetic
//! field m_e²c²/(|e|ħ) ≈ 4.41e9 T, electric field m_e²c³/(|e|ħ) ≈ 1.32e18 V/m;
//! m0, c and e are given in kg, m/s and C and divided by m_e, c and |e|.
//! Wavevectors are in 1/m, times in s, angular frequencies in 1/s.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::algebra::Spinor4;
use crate::dynamics::{default_ladder, standard_battery, Equation, StateDescriptor};
use crate::error::{Error, Result};
use crate::fields::{Envelope, FieldModel};
use crate::grid::{Domain, GridSpec, PacketSpec, Projection};
use crate::hamiltonian::{build, FwTerm, HamiltonianId, NamedHamiltonian};
use crate::operators::{PhysParams, SpinKind};
use crate::propagate::{Method, RunSpec};
use crate::vec3::{self, Vec3};

pub const SCENARIO_SCHEMA: &str = "relspin.scenario/1";

/// CODATA 2018 values used by the SI conversion.
pub mod si {
    pub const HBAR: f64 = 1.054_571_817e-34;
    pub const ELECTRON_MASS: f64 = 9.109_383_701_5e-31;
    pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
    pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    Natural,
    Si,
}

/// Multiply an input quantity by the matching factor to get internal units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Scales {
    pub length: f64,
    pub time: f64,
    pub magnetic: f64,
    pub electric: f64,
}

impl Scales {
    pub fn of(units: Units) -> Scales {
        match units {
            Units::Natural => Scales { length: 1.0, time: 1.0, magnetic: 1.0, electric: 1.0 },
            Units::Si => {
                use si::*;
                let (m, c, e) = (ELECTRON_MASS, SPEED_OF_LIGHT, ELEMENTARY_CHARGE);
                Scales {
                    length: m * c / HBAR,
                    time: m * c * c / HBAR,
                    magnetic: e * HBAR / (m * m * c * c),
                    electric: e * HBAR / (m * m * c * c * c),
                }
            }
        }
    }

    pub fn wavevector(&self) -> f64 {
        1.0 / self.length
    }

    pub fn frequency(&self) -> f64 {
        1.0 / self.time
    }

    fn envelope(&self, e: Envelope) -> Envelope {
        let t = self.time;
        match e {
            Envelope::Constant => Envelope::Constant,
            Envelope::Polynomial { c0, c1, c2 } => Envelope::Polynomial { c0, c1: c1 / t, c2: c2 / (t * t) },
            Envelope::Gaussian { center, width } => Envelope::Gaussian { center: center * t, width: width * t },
            Envelope::Sinusoid { offset, amplitude, omega, phase } => Envelope::Sinusoid { offset, amplitude, omega: omega / t, phase },
        }
    }

    /// Converts a field model from input to internal units.
    pub fn field(&self, m: FieldModel) -> FieldModel {
        match m {
            FieldModel::Zero => FieldModel::Zero,
            FieldModel::UniformB { b0, envelope } => {
                FieldModel::UniformB { b0: vec3::scale(b0, self.magnetic), envelope: self.envelope(envelope) }
            }
            FieldModel::UniformE { e0, envelope } => {
                FieldModel::UniformE { e0: vec3::scale(e0, self.electric), envelope: self.envelope(envelope) }
            }
            FieldModel::PlaneWavePulse { e_amplitude, wavevector, omega, center, width } => FieldModel::PlaneWavePulse {
                e_amplitude: vec3::scale(e_amplitude, self.electric),
                wavevector: vec3::scale(wavevector, self.wavevector()),
                omega: omega * self.frequency(),
                center: center * self.time,
                width: width * self.time,
            },
        }
    }
}

/// A scalar applied to every axis, or one value per axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerAxis<T> {
    All(T),
    Each([T; 3]),
}

impl<T: Copy> PerAxis<T> {
    pub fn axes(&self) -> [T; 3] {
        match *self {
            PerAxis::All(v) => [v; 3],
            PerAxis::Each(v) => v,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridInput {
    /// 1 or 3.
    pub dim: usize,
    pub n: PerAxis<usize>,
    pub l: PerAxis<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianInput {
    pub id: HamiltonianId,
    /// FW-expansion terms (fw_full only).
    #[serde(default)]
    pub mask: Option<Vec<FwTerm>>,
    /// Keep only these named terms.
    #[serde(default)]
    pub terms: Option<Vec<String>>,
    /// Replace every direct-Hamiltonian term by its Hermitian part.
    #[serde(default)]
    pub hermitize: bool,
}

/// `"up"`, `"down"`, `"random"` (drawn from the scenario seed), four real
/// amplitudes, or four `[re, im]` pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PolarizationInput {
    Named(String),
    Real([f64; 4]),
    Complex([[f64; 2]; 4]),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateInput {
    #[serde(default)]
    pub center: Vec3,
    pub width: PerAxis<f64>,
    #[serde(default)]
    pub k0: Vec3,
    pub polarization: PolarizationInput,
    #[serde(default)]
    pub projection: Projection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagationInput {
    /// Defaults to Strang for the Dirac Hamiltonians, Krylov otherwise.
    #[serde(default)]
    pub method: Option<Method>,
    pub dt: f64,
    pub steps: usize,
    #[serde(default = "one")]
    pub stride: usize,
    #[serde(default)]
    pub t0: f64,
}

fn one() -> usize {
    1
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BatteryInput {
    /// Six packets: two polarizations × three mean momenta (3D grids).
    Standard,
    /// The scenario's initial state.
    Initial,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerificationInput {
    /// Defaults to every kind with a printed equation for the Hamiltonian.
    #[serde(default)]
    pub kinds: Option<Vec<SpinKind>>,
    /// Defaults to the standard battery on 3D grids, else the initial state.
    #[serde(default)]
    pub battery: Option<BatteryInput>,
    /// Time at which the (possibly time-dependent) field is evaluated.
    #[serde(default)]
    pub t: f64,
    /// Grids for `--refine`, coarse to fine.
    #[serde(default)]
    pub ladder: Option<Vec<GridInput>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputInput {
    /// Trajectory CSV (simulate) or divergence CSV (sweep).
    #[serde(default)]
    pub trajectory: Option<PathBuf>,
    /// JSON report.
    #[serde(default)]
    pub report: Option<PathBuf>,
    /// Binary dump of the final state (simulate).
    #[serde(default)]
    pub final_state: Option<PathBuf>,
}

/// The scenario file as written.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema: String,
    pub units: Units,
    /// Defaults to the electron.
    #[serde(default)]
    pub params: Option<PhysParams>,
    pub grid: GridInput,
    #[serde(default)]
    pub field: FieldModel,
    pub hamiltonian: HamiltonianInput,
    #[serde(default)]
    pub initial_state: Option<StateInput>,
    #[serde(default)]
    pub propagation: Option<PropagationInput>,
    #[serde(default)]
    pub verification: VerificationInput,
    #[serde(default)]
    pub output: OutputInput,
    #[serde(default)]
    pub seed: u64,
}

/// Propagation settings in internal units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Propagation {
    pub method: Method,
    pub dt: f64,
    pub steps: usize,
    pub stride: usize,
    pub t0: f64,
}

#[derive(Clone, Debug)]
pub struct Verification {
    pub kinds: Vec<SpinKind>,
    pub battery: Vec<StateDescriptor>,
    pub t: f64,
    pub ladder: Vec<GridSpec>,
}

/// A validated scenario in internal units.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub units: Units,
    pub scales: Scales,
    pub params: PhysParams,
    pub grid: GridSpec,
    pub model: FieldModel,
    pub hamiltonian: NamedHamiltonian,
    /// FW-expansion mask the Hamiltonian was built with.
    pub mask: Option<Vec<FwTerm>>,
    pub initial: Option<StateDescriptor>,
    pub propagation: Option<Propagation>,
    pub verification: Verification,
    pub output: OutputInput,
    pub seed: u64,
}

impl Resolved {
    /// The initial state, or a config error naming `initial_state`.
    pub fn require_initial(&self) -> Result<&StateDescriptor> {
        self.initial.as_ref().ok_or_else(|| Error::config("initial_state", "required by this command"))
    }

    pub fn require_propagation(&self) -> Result<&Propagation> {
        self.propagation.as_ref().ok_or_else(|| Error::config("propagation", "required by this command"))
    }

    /// The propagation job for `hamiltonian` (the scenario's, or a variant).
    pub fn run_spec(&self, hamiltonian: NamedHamiltonian) -> Result<RunSpec> {
        let p = self.require_propagation()?;
        Ok(RunSpec { hamiltonian, method: p.method, dt: p.dt, steps: p.steps, stride: p.stride, t0: p.t0 })
    }

    /// The scenario's Hamiltonian rebuilt with another field model.
    pub fn hamiltonian_with(&self, model: &FieldModel) -> Result<NamedHamiltonian> {
        let h = &self.hamiltonian;
        let full = build(h.id, model, &self.params, self.mask.as_deref(), h.hermitized)?;
        let names = h.term_names();
        if names.len() == full.terms.len() {
            Ok(full)
        } else {
            full.restricted(&names)
        }
    }
}

/// Parses a scenario from JSON text. Syntax and type errors carry the path
/// of the offending field.
pub fn parse(text: &str) -> Result<Scenario> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::config(if path == "." { "<root>".to_string() } else { path }, e.into_inner().to_string())
    })?;
    if scenario.schema != SCENARIO_SCHEMA {
        return Err(Error::config("schema", format!("expected \"{SCENARIO_SCHEMA}\", got \"{}\"", scenario.schema)));
    }
    Ok(scenario)
}

/// Reads, parses and resolves a scenario file.
pub fn load(path: &Path) -> Result<Resolved> {
    let text = fs::read_to_string(path).map_err(|e| Error::config("<file>", format!("cannot read {}: {e}", path.display())))?;
    parse(&text)?.resolve()
}

fn at(path: impl Into<String>) -> impl FnOnce(Error) -> Error {
    let path = path.into();
    move |e| match e {
        Error::Config { .. } => e,
        other => Error::config(path, other.to_string()),
    }
}

fn finite(path: &str, v: &[f64]) -> Result<()> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(i) if v.len() > 1 => Err(Error::config(format!("{path}[{i}]"), "must be finite")),
        Some(_) => Err(Error::config(path, "must be finite")),
        None => Ok(()),
    }
}

impl Scenario {
    fn grid(&self, input: &GridInput, path: &str, scales: &Scales) -> Result<GridSpec> {
        let n = input.n.axes();
        let l = input.l.axes();
        finite(&format!("{path}.l"), &l)?;
        let active = if input.dim == 1 { 1 } else { 3 };
        if input.dim != 1 && input.dim != 3 {
            return Err(Error::config(format!("{path}.dim"), format!("must be 1 or 3, got {}", input.dim)));
        }
        for a in 0..active {
            if n[a] < 8 || !n[a].is_power_of_two() {
                return Err(Error::config(format!("{path}.n"), format!("axis {a}: must be a power of two ≥ 8, got {}", n[a])));
            }
            if l[a] <= 0.0 {
                return Err(Error::config(format!("{path}.l"), format!("axis {a}: must be > 0, got {}", l[a])));
            }
        }
        let l = l.map(|x| x * scales.length);
        let g = if input.dim == 1 { GridSpec::line(n[0], l[0]) } else { GridSpec::boxed(n, l) };
        g.map_err(at(path))
    }

    fn state(&self, input: &StateInput, grid: &GridSpec, scales: &Scales) -> Result<StateDescriptor> {
        finite("initial_state.center", &input.center)?;
        finite("initial_state.width", &input.width.axes())?;
        finite("initial_state.k0", &input.k0)?;
        let polarization = match &input.polarization {
            PolarizationInput::Named(name) => match name.as_str() {
                "up" => Spinor4::from_re([1.0, 0.0, 0.0, 0.0]),
                "down" => Spinor4::from_re([0.0, 1.0, 0.0, 0.0]),
                "random" => random_polarization(self.seed),
                other => {
                    return Err(Error::config("initial_state.polarization", format!("unknown name \"{other}\" (up, down, random)")));
                }
            },
            PolarizationInput::Real(v) => Spinor4::from_re(*v),
            PolarizationInput::Complex(v) => Spinor4(v.map(|[re, im]| num_complex::Complex64::new(re, im))),
        };
        if !polarization.is_finite() || polarization.norm() == 0.0 {
            return Err(Error::config("initial_state.polarization", "must be a finite nonzero spinor"));
        }
        if let Projection::Mixed { positive_weight } = input.projection {
            if !(0.0..=1.0).contains(&positive_weight) {
                return Err(Error::config(
                    "initial_state.projection.positive_weight",
                    format!("must lie in [0, 1], got {positive_weight}"),
                ));
            }
        }
        let spec = PacketSpec {
            center: vec3::scale(input.center, scales.length),
            width: vec3::scale(input.width.axes(), scales.length),
            k0: vec3::scale(input.k0, scales.wavevector()),
            polarization,
            projection: input.projection,
        };
        spec.validate(grid).map_err(at("initial_state"))?;
        Ok(StateDescriptor::from_spec("initial", &spec))
    }

    /// Checks every invariant and converts to internal units.
    pub fn resolve(&self) -> Result<Resolved> {
        let scales = Scales::of(self.units);
        let params = match (self.params, self.units) {
            (None, _) => PhysParams::electron_scaled(),
            (Some(p), Units::Natural) => p,
            (Some(p), Units::Si) => {
                PhysParams { m0: p.m0 / si::ELECTRON_MASS, c: p.c / si::SPEED_OF_LIGHT, e: p.e / si::ELEMENTARY_CHARGE }
            }
        };
        params.validate().map_err(at("params"))?;

        let grid = self.grid(&self.grid, "grid", &scales)?;

        self.field.validate().map_err(|m| Error::config("field", m))?;
        let model = scales.field(self.field);

        let h = &self.hamiltonian;
        if h.mask.is_some() && h.id != HamiltonianId::FwFull {
            return Err(Error::config("hamiltonian.mask", "only applies to fw_full"));
        }
        if h.hermitize && h.id != HamiltonianId::Direct {
            return Err(Error::config("hamiltonian.hermitize", "only applies to direct"));
        }
        if h.id == HamiltonianId::Free && !matches!(model, FieldModel::Zero) {
            return Err(Error::config("field", "the free Hamiltonian takes no field; use dirac_em"));
        }
        let mut hamiltonian = build(h.id, &model, &params, h.mask.as_deref(), h.hermitize).map_err(at("hamiltonian"))?;
        if let Some(terms) = &h.terms {
            if terms.is_empty() {
                return Err(Error::config("hamiltonian.terms", "must name at least one term"));
            }
            let names: Vec<&str> = terms.iter().map(String::as_str).collect();
            hamiltonian = hamiltonian.restricted(&names).map_err(at("hamiltonian.terms"))?;
        }

        if grid.dim == 1 && !model.is_line_faithful() && hamiltonian.total.has_domain(Domain::Position) {
            return Err(Error::config(
                "field",
                "on a 1D grid the potentials must depend on x alone (uniform E along x, plane waves along x); \
                 a uniform B needs a 3D grid unless only position-independent terms (e.g. zeeman) are kept",
            ));
        }

        let initial = match &self.initial_state {
            Some(s) => Some(self.state(s, &grid, &scales)?),
            None => None,
        };

        let propagation = match &self.propagation {
            None => None,
            Some(p) => {
                if !(p.dt.is_finite() && p.dt > 0.0) {
                    return Err(Error::config("propagation.dt", format!("must be finite and > 0, got {}", p.dt)));
                }
                if p.steps == 0 {
                    return Err(Error::config("propagation.steps", "must be at least 1"));
                }
                if p.stride == 0 {
                    return Err(Error::config("propagation.stride", "must be at least 1"));
                }
                finite("propagation.t0", &[p.t0])?;
                let method = p.method.unwrap_or(Method::default_for(h.id));
                match method {
                    Method::Strang if !matches!(h.id, HamiltonianId::Free | HamiltonianId::DiracEm) || h.terms.is_some() => {
                        return Err(Error::config("propagation.method", "the Strang split needs the full free or dirac_em Hamiltonian"));
                    }
                    Method::Krylov(o) if o.subspace < 8 => {
                        return Err(Error::config("propagation.method.subspace", format!("must be at least 8, got {}", o.subspace)));
                    }
                    Method::Krylov(o) if !(o.tol.is_finite() && o.tol > 0.0) => {
                        return Err(Error::config("propagation.method.tol", format!("must be finite and > 0, got {}", o.tol)));
                    }
                    _ => {}
                }
                Some(Propagation { method, dt: p.dt * scales.time, steps: p.steps, stride: p.stride, t0: p.t0 * scales.time })
            }
        };

        let v = &self.verification;
        finite("verification.t", &[v.t])?;
        let kinds = match &v.kinds {
            Some(k) if k.is_empty() => return Err(Error::config("verification.kinds", "must name at least one spin kind")),
            Some(k) => {
                for (i, kind) in k.iter().enumerate() {
                    if Equation::of(*kind, h.id).is_err() {
                        return Err(Error::config(
                            format!("verification.kinds[{i}]"),
                            format!("no printed {kind} equation for the {} Hamiltonian", h.id),
                        ));
                    }
                }
                k.clone()
            }
            None => SpinKind::ALL.into_iter().filter(|k| Equation::of(*k, h.id).is_ok()).collect(),
        };
        let choice = v.battery.unwrap_or(if grid.dim == 3 { BatteryInput::Standard } else { BatteryInput::Initial });
        let battery = match choice {
            BatteryInput::Standard => {
                if grid.dim != 3 {
                    return Err(Error::config("verification.battery", "the standard battery needs a 3D grid; use \"initial\""));
                }
                standard_battery()
            }
            BatteryInput::Initial => match (&initial, v.battery) {
                (Some(s), _) => vec![s.clone()],
                (None, Some(_)) => return Err(Error::config("verification.battery", "\"initial\" needs an initial_state")),
                // Nothing to verify on; reported if verification is requested.
                (None, None) => Vec::new(),
            },
        };
        let ladder = match &v.ladder {
            Some(l) if l.is_empty() => return Err(Error::config("verification.ladder", "must list at least one grid")),
            Some(l) => {
                let grids = l
                    .iter()
                    .enumerate()
                    .map(|(i, g)| self.grid(g, &format!("verification.ladder[{i}]"), &scales))
                    .collect::<Result<Vec<_>>>()?;
                for (i, g) in grids.iter().enumerate() {
                    for (j, s) in battery.iter().enumerate() {
                        s.spec()
                            .validate(g)
                            .map_err(|e| Error::config(format!("verification.ladder[{i}]"), format!("battery state {j}: {e}")))?;
                    }
                }
                grids
            }
            None if choice == BatteryInput::Standard => default_ladder(),
            None => {
                let mut fine = grid;
                for a in 0..grid.dim {
                    fine.n[a] *= 2;
                }
                vec![grid, fine]
            }
        };

        Ok(Resolved {
            units: self.units,
            scales,
            params,
            grid,
            model,
            mask: h.mask.clone(),
            hamiltonian,
            initial,
            propagation,
            verification: Verification { kinds, battery, t: v.t * scales.time, ladder },
            output: self.output.clone(),
            seed: self.seed,
        })
    }
}

/// Normalized polarization drawn from a ChaCha8 stream.
pub fn random_polarization(seed: u64) -> Spinor4 {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let v = Spinor4([0; 4].map(|_| num_complex::Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))));
    v.normalized().expect("a random spinor is nonzero")
}
