use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::{GridSpec, Space, SpinorField};
use crate::algebra::{Matrix4, Spinor4};
use crate::error::{Error, Result};
use crate::operators::{energy_ep, free_dirac_matrix, Momentum3, PhysParams};
use crate::vec3::Vec3;

/// Energy-sign projection applied mode by mode after sampling.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Projection {
    #[default]
    None,
    Positive,
    Negative,
    /// √w·P₊ψ/‖P₊ψ‖ + √(1−w)·P₋ψ/‖P₋ψ‖.
    Mixed {
        positive_weight: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PacketSpec {
    pub center: Vec3,
    /// Position-space standard deviation of |ψ|, per axis.
    pub width: Vec3,
    pub k0: Vec3,
    pub polarization: Spinor4,
    pub projection: Projection,
}

impl PacketSpec {
    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        for a in 0..grid.dim {
            let (s, c, half) = (self.width[a], self.center[a], 0.5 * grid.l[a]);
            if !(s.is_finite() && s >= 4.0 * grid.dx(a)) {
                return Err(Error::InvalidArgument(format!("axis {a}: width {s} is below 4Δx = {}", 4.0 * grid.dx(a))));
            }
            if !(c - 4.0 * s >= -half && c + 4.0 * s <= half) {
                return Err(Error::InvalidArgument(format!("axis {a}: center {c} is closer than 4σ = {} to the boundary", 4.0 * s)));
            }
            if !self.k0[a].is_finite() || self.k0[a].abs() >= grid.k_nyquist(a) {
                return Err(Error::InvalidArgument(format!("axis {a}: mean momentum {} is not resolved", self.k0[a])));
            }
        }
        if !self.polarization.is_finite() || self.polarization.norm() == 0.0 {
            return Err(Error::InvalidArgument("polarization must be a finite nonzero spinor".into()));
        }
        if let Projection::Mixed { positive_weight } = self.projection {
            if !(0.0..=1.0).contains(&positive_weight) {
                return Err(Error::InvalidArgument(format!("positive_weight {positive_weight} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// P± = (1 ± H(k)/E_k)/2.
fn energy_projector(k: Vec3, params: &PhysParams, sign: f64) -> Matrix4 {
    let h = free_dirac_matrix(Momentum3(k), params);
    let e = energy_ep(Momentum3(k), params);
    (Matrix4::identity() + h * (sign / e)) * 0.5
}

fn project(field: &SpinorField, params: &PhysParams, sign: f64) -> SpinorField {
    let mut out = field.to_space(Space::Momentum);
    out.map_momentum(|k, v| energy_projector(k, params, sign).apply_array(v));
    out
}

/// Normalized Gaussian packet
/// ψ(r) ∝ u·Π_a exp(−(r_a − c_a)²/(4σ_a²) + i k0_a r_a),
/// optionally projected onto an energy sign of the free Dirac Hamiltonian.
/// Returned in momentum space when projected, position space otherwise.
pub fn gaussian_packet(grid: &GridSpec, spec: &PacketSpec, params: &PhysParams) -> Result<SpinorField> {
    spec.validate(grid)?;
    let u = spec.polarization.normalized()?.0;
    let dim = grid.dim;
    let raw = SpinorField::from_position_fn(*grid, |r| {
        let mut exponent = 0.0;
        let mut phase = 0.0;
        for a in 0..dim {
            let d = r[a] - spec.center[a];
            exponent -= d * d / (4.0 * spec.width[a] * spec.width[a]);
            phase += spec.k0[a] * r[a];
        }
        let g = C64::from_polar(exponent.exp(), phase);
        u.map(|z| z * g)
    });
    match spec.projection {
        Projection::None => raw.normalized(),
        Projection::Positive => project(&raw, params, 1.0).normalized(),
        Projection::Negative => project(&raw, params, -1.0).normalized(),
        Projection::Mixed { positive_weight } => {
            let w = positive_weight;
            let pos = if w > 0.0 { Some(project(&raw, params, 1.0).normalized()?) } else { None };
            let neg = if w < 1.0 { Some(project(&raw, params, -1.0).normalized()?) } else { None };
            let mut out = SpinorField::zeros(*grid, Space::Momentum);
            if let Some(p) = pos {
                out.axpy(C64::new(w.sqrt(), 0.0), &p);
            }
            if let Some(n) = neg {
                out.axpy(C64::new((1.0 - w).sqrt(), 0.0), &n);
            }
            out.normalized()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{apply, expectation, zero_mode_weight, Expr};

    fn up() -> Spinor4 {
        Spinor4::from_re([1.0, 0.0, 0.0, 0.0])
    }

    #[test]
    fn normalized_and_guarded() {
        let grid = GridSpec::line(256, 60.0).unwrap();
        let params = PhysParams::electron_scaled();
        let sigma = 2.0;
        let spec = PacketSpec {
            center: [0.0; 3],
            width: [sigma, 0.0, 0.0],
            k0: [6.0 / sigma, 0.0, 0.0],
            polarization: up(),
            projection: Projection::None,
        };
        let f = gaussian_packet(&grid, &spec, &params).unwrap();
        assert!((f.norm() - 1.0).abs() <= 1e-12);
        assert!(zero_mode_weight(&f) <= 1e-10);
    }

    #[test]
    fn rejects_bad_specs() {
        let grid = GridSpec::line(64, 20.0).unwrap();
        let params = PhysParams::electron_scaled();
        let base = PacketSpec { center: [0.0; 3], width: [1.5, 0.0, 0.0], k0: [0.0; 3], polarization: up(), projection: Projection::None };
        assert!(gaussian_packet(&grid, &base, &params).is_ok());
        let narrow = PacketSpec { width: [0.5, 0.0, 0.0], ..base };
        assert!(gaussian_packet(&grid, &narrow, &params).is_err());
        let off = PacketSpec { center: [6.0, 0.0, 0.0], ..base };
        assert!(gaussian_packet(&grid, &off, &params).is_err());
    }

    #[test]
    fn positive_projection_has_unit_energy_sign() {
        let grid = GridSpec::line(256, 60.0).unwrap();
        let params = PhysParams::electron_scaled();
        let spec = PacketSpec {
            center: [0.0; 3],
            width: [3.0, 0.0, 0.0],
            k0: [0.8, 0.0, 0.0],
            polarization: up(),
            projection: Projection::Positive,
        };
        let f = gaussian_packet(&grid, &spec, &params).unwrap();
        let sign = Expr::momentum("sign(H)", move |k| free_dirac_matrix(Momentum3(k), &params) * (1.0 / energy_ep(Momentum3(k), &params)));
        let s = expectation(&sign, &f, 0.0).unwrap();
        assert!((s.re - 1.0).abs() <= 1e-10 && s.im.abs() <= 1e-10, "{s}");
        // Eigenstate of the sign operator, not just on average.
        let image = apply(&sign, &f, 0.0).unwrap();
        assert!(image.sub(&f).norm() <= 1e-10);
    }

    #[test]
    fn mixed_projection_weights() {
        let grid = GridSpec::line(256, 60.0).unwrap();
        let params = PhysParams::electron_scaled();
        let spec = PacketSpec {
            center: [0.0; 3],
            width: [3.0, 0.0, 0.0],
            k0: [0.8, 0.0, 0.0],
            polarization: up(),
            projection: Projection::Mixed { positive_weight: 0.5 },
        };
        let f = gaussian_packet(&grid, &spec, &params).unwrap();
        let sign = Expr::momentum("sign(H)", move |k| free_dirac_matrix(Momentum3(k), &params) * (1.0 / energy_ep(Momentum3(k), &params)));
        let s = expectation(&sign, &f, 0.0).unwrap();
        assert!(s.re.abs() <= 1e-10, "{s}");
    }

    #[test]
    fn mean_momentum() {
        let grid = GridSpec::boxed([32, 32, 64], [24.0, 24.0, 48.0]).unwrap();
        let params = PhysParams::electron_scaled();
        let spec =
            PacketSpec { center: [0.0; 3], width: [3.0, 3.0, 4.0], k0: [0.0, 0.0, 1.1], polarization: up(), projection: Projection::None };
        let f = gaussian_packet(&grid, &spec, &params).unwrap();
        let kz = expectation(&Expr::momentum_scalar("k_z", |k| k[2]), &f, 0.0).unwrap();
        assert!((kz.re - 1.1).abs() <= 1e-6, "{kz}");
    }
}
