//! Closed-form electromagnetic field configurations.
//!
//! Every model returns potentials, fields and the analytic time derivatives
//! of B needed by the Foldy-Wouthuysen Hamiltonians. Uniform magnetic fields
//! use the symmetric gauge A = B(t)×r/2 with φ = 0, so a time-dependent
//! envelope induces E = −(B0×r)/2·g′(t). That is the usual idealisation for a
//! slowly varying uniform field; it is not an exact Maxwell solution.

use serde::{Deserialize, Serialize};

use crate::vec3::{self, Vec3, ZERO3};

/// Time envelope g(t) with closed-form derivatives.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Envelope {
    #[default]
    Constant,
    /// g(t) = c0 + c1 t + c2 t²
    Polynomial { c0: f64, c1: f64, c2: f64 },
    /// g(t) = exp(−(t − center)²/(2 width²))
    Gaussian { center: f64, width: f64 },
    /// g(t) = offset + amplitude·sin(ω t + phase)
    Sinusoid { offset: f64, amplitude: f64, omega: f64, phase: f64 },
}

impl Envelope {
    /// (g, g′, g″) at t.
    pub fn eval(&self, t: f64) -> [f64; 3] {
        match *self {
            Envelope::Constant => [1.0, 0.0, 0.0],
            Envelope::Polynomial { c0, c1, c2 } => [c0 + c1 * t + c2 * t * t, c1 + 2.0 * c2 * t, 2.0 * c2],
            Envelope::Gaussian { center, width } => {
                let u = (t - center) / width;
                let g = (-0.5 * u * u).exp();
                let w2 = width * width;
                [g, -(t - center) / w2 * g, (u * u - 1.0) / w2 * g]
            }
            Envelope::Sinusoid { offset, amplitude, omega, phase } => {
                let (s, c) = (omega * t + phase).sin_cos();
                [offset + amplitude * s, amplitude * omega * c, -amplitude * omega * omega * s]
            }
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let ok = match *self {
            Envelope::Constant => true,
            Envelope::Polynomial { c0, c1, c2 } => [c0, c1, c2].iter().all(|x| x.is_finite()),
            Envelope::Gaussian { center, width } => center.is_finite() && width.is_finite() && width > 0.0,
            Envelope::Sinusoid { offset, amplitude, omega, phase } => [offset, amplitude, omega, phase].iter().all(|x| x.is_finite()),
        };
        if ok {
            Ok(())
        } else {
            Err(format!("invalid envelope parameters {self:?}"))
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FieldModel {
    #[default]
    Zero,
    /// B(t) = b0·g(t), A = B(t)×r/2, φ = 0.
    UniformB {
        b0: Vec3,
        #[serde(default)]
        envelope: Envelope,
    },
    /// E(t) = e0·g(t), φ = −E(t)·r, A = 0.
    UniformE {
        e0: Vec3,
        #[serde(default)]
        envelope: Envelope,
    },
    /// A = a·G(ξ), ξ = k·r − ωt, a = E_amp/ω,
    /// G(ξ) = exp(−(ξ − ξc)²/(2s²))·sin ξ with ξc = −ω·center, s = ω·width.
    /// The polarization must be transverse to the wavevector.
    PlaneWavePulse { e_amplitude: Vec3, wavevector: Vec3, omega: f64, center: f64, width: f64 },
}

/// Potentials, fields and derivatives at one (r, t).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct FieldSample {
    pub a: Vec3,
    pub phi: f64,
    pub e: Vec3,
    pub b: Vec3,
    pub db_dt: Vec3,
    pub d2b_dt2: Vec3,
    pub de_dt: Vec3,
}

impl FieldModel {
    pub fn validate(&self) -> Result<(), String> {
        match self {
            FieldModel::Zero => Ok(()),
            FieldModel::UniformB { b0, envelope } => {
                if !vec3::is_finite(*b0) {
                    return Err("b0 must be finite".into());
                }
                envelope.validate()
            }
            FieldModel::UniformE { e0, envelope } => {
                if !vec3::is_finite(*e0) {
                    return Err("e0 must be finite".into());
                }
                envelope.validate()
            }
            FieldModel::PlaneWavePulse { e_amplitude, wavevector, omega, center, width } => {
                if !(vec3::is_finite(*e_amplitude) && vec3::is_finite(*wavevector)) {
                    return Err("plane-wave vectors must be finite".into());
                }
                if !(omega.is_finite() && *omega > 0.0 && center.is_finite() && width.is_finite() && *width > 0.0) {
                    return Err("plane-wave omega and width must be > 0".into());
                }
                let k = vec3::norm(*wavevector);
                let a = vec3::norm(*e_amplitude);
                if k > 0.0 && a > 0.0 && vec3::dot(*e_amplitude, *wavevector).abs() > 1e-12 * k * a {
                    return Err("plane-wave polarization must be transverse to the wavevector".into());
                }
                Ok(())
            }
        }
    }

    /// True when B is spatially uniform and A is the symmetric gauge, which is
    /// what the spin equations of motion assume.
    pub fn is_uniform_b_gauge(&self) -> bool {
        matches!(self, FieldModel::Zero | FieldModel::UniformB { .. })
    }

    /// True when A and φ depend on x alone, so that a 1D grid (y = z = 0)
    /// carries the full field. The symmetric gauge of a nonzero uniform B
    /// never does: on the x axis it keeps only half of ∇×A.
    pub fn is_line_faithful(&self) -> bool {
        match self {
            FieldModel::Zero => true,
            FieldModel::UniformB { b0, .. } => *b0 == ZERO3,
            FieldModel::UniformE { e0, .. } => e0[1] == 0.0 && e0[2] == 0.0,
            FieldModel::PlaneWavePulse { wavevector, .. } => wavevector[1] == 0.0 && wavevector[2] == 0.0,
        }
    }

    pub fn is_static(&self) -> bool {
        match self {
            FieldModel::Zero => true,
            FieldModel::UniformB { envelope, .. } | FieldModel::UniformE { envelope, .. } => {
                matches!(envelope, Envelope::Constant)
                    || matches!(envelope, Envelope::Polynomial { c1, c2, .. } if *c1 == 0.0 && *c2 == 0.0)
            }
            FieldModel::PlaneWavePulse { .. } => false,
        }
    }

    /// Returns a copy with every field amplitude multiplied by `s`.
    pub fn scaled(&self, s: f64) -> FieldModel {
        match *self {
            FieldModel::Zero => FieldModel::Zero,
            FieldModel::UniformB { b0, envelope } => FieldModel::UniformB { b0: vec3::scale(b0, s), envelope },
            FieldModel::UniformE { e0, envelope } => FieldModel::UniformE { e0: vec3::scale(e0, s), envelope },
            FieldModel::PlaneWavePulse { e_amplitude, wavevector, omega, center, width } => {
                FieldModel::PlaneWavePulse { e_amplitude: vec3::scale(e_amplitude, s), wavevector, omega, center, width }
            }
        }
    }

    /// Closed-form evaluation at (r, t).
    pub fn sample(&self, r: Vec3, t: f64) -> FieldSample {
        match *self {
            FieldModel::Zero => FieldSample::default(),
            FieldModel::UniformB { b0, envelope } => {
                let [g, g1, g2] = envelope.eval(t);
                let b0xr_half = vec3::scale(vec3::cross(b0, r), 0.5);
                FieldSample {
                    a: vec3::scale(b0xr_half, g),
                    phi: 0.0,
                    e: vec3::scale(b0xr_half, -g1),
                    b: vec3::scale(b0, g),
                    db_dt: vec3::scale(b0, g1),
                    d2b_dt2: vec3::scale(b0, g2),
                    de_dt: vec3::scale(b0xr_half, -g2),
                }
            }
            FieldModel::UniformE { e0, envelope } => {
                let [g, g1, _] = envelope.eval(t);
                FieldSample {
                    a: ZERO3,
                    phi: -vec3::dot(e0, r) * g,
                    e: vec3::scale(e0, g),
                    b: ZERO3,
                    db_dt: ZERO3,
                    d2b_dt2: ZERO3,
                    de_dt: vec3::scale(e0, g1),
                }
            }
            FieldModel::PlaneWavePulse { e_amplitude, wavevector, omega, center, width } => {
                let a_vec = vec3::scale(e_amplitude, 1.0 / omega);
                let xi = vec3::dot(wavevector, r) - omega * t;
                let [g0, g1, g2, g3] = pulse_profile(xi, -omega * center, omega * width);
                let kxa = vec3::cross(wavevector, a_vec);
                FieldSample {
                    a: vec3::scale(a_vec, g0),
                    phi: 0.0,
                    // E = −∂A/∂t = ω a G′
                    e: vec3::scale(a_vec, omega * g1),
                    // B = ∇×A = (k×a) G′
                    b: vec3::scale(kxa, g1),
                    db_dt: vec3::scale(kxa, -omega * g2),
                    d2b_dt2: vec3::scale(kxa, omega * omega * g3),
                    de_dt: vec3::scale(a_vec, -omega * omega * g2),
                }
            }
        }
    }

    /// A and φ only.
    pub fn potentials(&self, r: Vec3, t: f64) -> (Vec3, f64) {
        let s = self.sample(r, t);
        (s.a, s.phi)
    }
}

/// G and its first three derivatives for G(ξ) = exp(−(ξ−ξc)²/(2s²))·sin ξ.
fn pulse_profile(xi: f64, xc: f64, s: f64) -> [f64; 4] {
    let u = xi - xc;
    let s2 = s * s;
    let env = (-0.5 * u * u / s2).exp();
    // derivatives of the envelope
    let e1 = -u / s2 * env;
    let e2 = (u * u / (s2 * s2) - 1.0 / s2) * env;
    let e3 = (3.0 * u / (s2 * s2) - u * u * u / (s2 * s2 * s2)) * env;
    let (sn, cs) = xi.sin_cos();
    [env * sn, e1 * sn + env * cs, e2 * sn + 2.0 * e1 * cs - env * sn, e3 * sn + 3.0 * e2 * cs - 3.0 * e1 * sn - env * cs]
}

/// Finite-difference consistency residuals of a field model.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct MaxwellResidual {
    /// |∇×A − B| with central differences.
    pub curl: f64,
    /// |−∂A/∂t − ∇φ − E|.
    pub induction: f64,
    /// |∇·A|.
    pub divergence: f64,
}

impl MaxwellResidual {
    pub fn max(&self) -> f64 {
        self.curl.max(self.induction).max(self.divergence)
    }
}

/// Central-difference probe of B = ∇×A, E = −∂A/∂t − ∇φ and ∇·A at (r, t).
pub fn maxwell_probe(model: &FieldModel, r: Vec3, t: f64, h: f64) -> MaxwellResidual {
    assert!(h > 0.0, "probe step must be positive");
    let pot = |r: Vec3, t: f64| model.potentials(r, t);
    // dA_j/dx_i and dφ/dx_i
    let mut grad_a = [[0.0; 3]; 3];
    let mut grad_phi = [0.0; 3];
    for i in 0..3 {
        let mut rp = r;
        let mut rm = r;
        rp[i] += h;
        rm[i] -= h;
        let (ap, pp) = pot(rp, t);
        let (am, pm) = pot(rm, t);
        for j in 0..3 {
            grad_a[i][j] = (ap[j] - am[j]) / (2.0 * h);
        }
        grad_phi[i] = (pp - pm) / (2.0 * h);
    }
    let curl = [grad_a[1][2] - grad_a[2][1], grad_a[2][0] - grad_a[0][2], grad_a[0][1] - grad_a[1][0]];
    let (atp, _) = pot(r, t + h);
    let (atm, _) = pot(r, t - h);
    let s = model.sample(r, t);
    let e_fd = [0, 1, 2].map(|i| -(atp[i] - atm[i]) / (2.0 * h) - grad_phi[i]);
    MaxwellResidual {
        curl: vec3::norm(vec3::sub(curl, s.b)),
        induction: vec3::norm(vec3::sub(e_fd, s.e)),
        divergence: (grad_a[0][0] + grad_a[1][1] + grad_a[2][2]).abs(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pulse() -> FieldModel {
        FieldModel::PlaneWavePulse { e_amplitude: [0.0, 0.3, 0.0], wavevector: [0.0, 0.0, 0.7], omega: 0.7, center: 2.0, width: 3.0 }
    }

    #[test]
    fn zero_model() {
        let s = FieldModel::Zero.sample([1.0, 2.0, 3.0], 0.4);
        assert_eq!(s, FieldSample::default());
        assert_eq!(maxwell_probe(&FieldModel::Zero, [1.0, 2.0, 3.0], 0.4, 1e-3).max(), 0.0);
    }

    #[test]
    fn uniform_b_constant() {
        let m = FieldModel::UniformB { b0: [0.0, 0.0, 1.0], envelope: Envelope::Constant };
        let s = m.sample([1.0, 0.0, 0.0], 0.0);
        assert_eq!(s.a, [0.0, 0.5, 0.0]);
        assert_eq!(s.b, [0.0, 0.0, 1.0]);
        assert_eq!(s.e, [0.0; 3]);
        assert_eq!(s.db_dt, [0.0; 3]);
    }

    #[test]
    fn uniform_b_quadratic_envelope() {
        let m = FieldModel::UniformB { b0: [0.0, 0.0, 1.0], envelope: Envelope::Polynomial { c0: 0.0, c1: 0.0, c2: 0.5 } };
        let s = m.sample([1.0, 0.0, 0.0], 0.0);
        assert_eq!(s.b, [0.0; 3]);
        assert_eq!(s.db_dt, [0.0; 3]);
        assert_eq!(s.d2b_dt2, [0.0, 0.0, 1.0]);
        assert_eq!(s.e, [0.0; 3]);
        // Induced field of the gauge: E = −(B0×r)/2·g′(t).
        let s = m.sample([0.3, -1.1, 0.4], 1.7);
        let expect = vec3::scale(vec3::cross([0.0, 0.0, 1.0], [0.3, -1.1, 0.4]), -0.5 * 1.7);
        assert!(vec3::norm(vec3::sub(s.e, expect)) < 1e-15);
    }

    #[test]
    fn uniform_b_probe_is_exact_for_linear_potential() {
        let m = FieldModel::UniformB { b0: [0.3, -0.2, 1.0], envelope: Envelope::Constant };
        let r = maxwell_probe(&m, [0.7, -1.3, 2.1], 0.5, 1e-3);
        assert!(r.curl <= 1e-8, "{r:?}");
        assert!(r.divergence <= 1e-10, "{r:?}");
        assert!(r.induction <= 1e-10);
    }

    #[test]
    fn uniform_b_time_dependent_probe() {
        let m = FieldModel::UniformB {
            b0: [0.0, 0.5, 1.0],
            envelope: Envelope::Sinusoid { offset: 0.2, amplitude: 1.0, omega: 0.9, phase: 0.1 },
        };
        let r = maxwell_probe(&m, [0.7, -1.3, 2.1], 0.5, 1e-4);
        assert!(r.max() < 1e-7, "{r:?}");
    }

    #[test]
    fn uniform_e_probe() {
        let m = FieldModel::UniformE { e0: [0.1, 0.0, -0.4], envelope: Envelope::Gaussian { center: 1.0, width: 2.0 } };
        let r = maxwell_probe(&m, [1.0, 1.0, -2.0], 0.3, 1e-4);
        assert!(r.max() < 1e-8, "{r:?}");
    }

    #[test]
    fn plane_wave_probe_second_order() {
        let m = pulse();
        let r0 = [0.2, -0.5, 1.3];
        let coarse = maxwell_probe(&m, r0, 1.5, 1e-2).max();
        let fine = maxwell_probe(&m, r0, 1.5, 5e-3).max();
        let ratio = coarse / fine;
        assert!((ratio - 4.0).abs() < 0.2, "ratio {ratio}");
    }

    #[test]
    fn envelope_derivatives_match_differences() {
        let envs = [
            Envelope::Polynomial { c0: 1.0, c1: -0.3, c2: 0.7 },
            Envelope::Gaussian { center: 0.4, width: 1.3 },
            Envelope::Sinusoid { offset: 0.1, amplitude: 2.0, omega: 1.7, phase: 0.3 },
        ];
        let h = 1e-4;
        for env in envs {
            let t = 0.37;
            let [g, g1, g2] = env.eval(t);
            let [gp, g1p, _] = env.eval(t + h);
            let [gm, g1m, _] = env.eval(t - h);
            assert!(((gp - gm) / (2.0 * h) - g1).abs() < 1e-7);
            assert!(((g1p - g1m) / (2.0 * h) - g2).abs() < 1e-7);
            assert!(((gp - 2.0 * g + gm) / (h * h) - g2).abs() < 1e-5);
        }
    }

    #[test]
    fn plane_wave_time_derivatives_match_differences() {
        let m = pulse();
        let r = [0.1, 0.2, 0.9];
        let h = 1e-4;
        let s = m.sample(r, 1.1);
        let sp = m.sample(r, 1.1 + h);
        let sm = m.sample(r, 1.1 - h);
        for i in 0..3 {
            assert!(((sp.b[i] - sm.b[i]) / (2.0 * h) - s.db_dt[i]).abs() < 1e-7);
            assert!(((sp.db_dt[i] - sm.db_dt[i]) / (2.0 * h) - s.d2b_dt2[i]).abs() < 1e-7);
            assert!(((sp.e[i] - sm.e[i]) / (2.0 * h) - s.de_dt[i]).abs() < 1e-7);
        }
    }

    #[test]
    fn transverse_polarization_required() {
        let bad =
            FieldModel::PlaneWavePulse { e_amplitude: [0.0, 0.0, 1.0], wavevector: [0.0, 0.0, 1.0], omega: 1.0, center: 0.0, width: 1.0 };
        assert!(bad.validate().is_err());
        assert!(pulse().validate().is_ok());
    }
}
