//! Periodic grids, spinor fields on them, and matrix-free operator
//! application.
//!
//! Conventions (golden files depend on these):
//!
//! * Position lattice per active axis: x_j = −L/2 + jΔx, j = 0..N−1, Δx = L/N.
//! * Momentum lattice per active axis: k_m = (2π/L)(m − N/2), m = 0..N−1,
//!   so the zero mode sits at index N/2.
//! * Transform: ψ̂_m = N^{-1/2} Σ_j ψ_j e^{−i k_m x_j}, applied axis by axis;
//!   it is unitary, and both spaces use the same (Δx)^d-weighted inner product.
//! * Storage is row-major over (x, y, z) with z fastest, four spinor
//!   components per point. In 1D only x is active; y = z = 0 and p_y = p_z = 0.

mod dump;
mod expr;
mod fft;
mod packet;

pub use dump::{read_field, write_field, DUMP_MAGIC};
pub use expr::{apply, apply_with_guard, expectation, hermiticity_residual, Domain, Expr, Leaf, LeafParity, DEFAULT_ZERO_MODE_GUARD};
pub use packet::{gaussian_packet, PacketSpec, Projection};

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{Matrix4, ZERO};
use crate::error::{Error, Result};
use crate::vec3::Vec3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// 1 or 3.
    pub dim: usize,
    /// Points per axis; inactive axes have 1.
    pub n: [usize; 3],
    /// Box length per axis; ignored on inactive axes.
    pub l: [f64; 3],
}

impl GridSpec {
    pub fn line(n: usize, l: f64) -> Result<Self> {
        let g = GridSpec { dim: 1, n: [n, 1, 1], l: [l, 1.0, 1.0] };
        g.validate()?;
        Ok(g)
    }

    pub fn cube(n: usize, l: f64) -> Result<Self> {
        Self::boxed([n; 3], [l; 3])
    }

    pub fn boxed(n: [usize; 3], l: [f64; 3]) -> Result<Self> {
        let g = GridSpec { dim: 3, n, l };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim != 1 && self.dim != 3 {
            return Err(Error::InvalidArgument(format!("grid dimension must be 1 or 3, got {}", self.dim)));
        }
        for a in 0..3 {
            if self.active(a) {
                let n = self.n[a];
                if n < 8 || !n.is_power_of_two() {
                    return Err(Error::InvalidArgument(format!("axis {a}: N = {n} must be a power of two ≥ 8")));
                }
                if !(self.l[a].is_finite() && self.l[a] > 0.0) {
                    return Err(Error::InvalidArgument(format!("axis {a}: L = {} must be > 0", self.l[a])));
                }
            } else if self.n[a] != 1 {
                return Err(Error::InvalidArgument(format!("inactive axis {a} must have N = 1")));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn active(&self, axis: usize) -> bool {
        axis < self.dim
    }

    pub fn len(&self) -> usize {
        self.n.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dx(&self, axis: usize) -> f64 {
        self.l[axis] / self.n[axis] as f64
    }

    pub fn dk(&self, axis: usize) -> f64 {
        2.0 * std::f64::consts::PI / self.l[axis]
    }

    /// Volume element (Δx)^d.
    pub fn dv(&self) -> f64 {
        (0..self.dim).map(|a| self.dx(a)).product()
    }

    /// Largest representable |k| component on an axis.
    pub fn k_nyquist(&self, axis: usize) -> f64 {
        std::f64::consts::PI / self.dx(axis)
    }

    #[inline]
    pub fn unravel(&self, idx: usize) -> [usize; 3] {
        let iz = idx % self.n[2];
        let rest = idx / self.n[2];
        [rest / self.n[1], rest % self.n[1], iz]
    }

    #[inline]
    pub fn ravel(&self, ix: [usize; 3]) -> usize {
        (ix[0] * self.n[1] + ix[1]) * self.n[2] + ix[2]
    }

    #[inline]
    pub fn position(&self, idx: usize) -> Vec3 {
        let ix = self.unravel(idx);
        let mut r = [0.0; 3];
        for a in 0..self.dim {
            r[a] = -0.5 * self.l[a] + ix[a] as f64 * self.dx(a);
        }
        r
    }

    #[inline]
    pub fn momentum(&self, idx: usize) -> Vec3 {
        let ix = self.unravel(idx);
        let mut k = [0.0; 3];
        for a in 0..self.dim {
            k[a] = self.dk(a) * (ix[a] as f64 - (self.n[a] / 2) as f64);
        }
        k
    }

    /// Flat index of the k = 0 mode in momentum storage.
    pub fn zero_mode_index(&self) -> usize {
        let mut ix = [0; 3];
        for a in 0..self.dim {
            ix[a] = self.n[a] / 2;
        }
        self.ravel(ix)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Space {
    Position,
    Momentum,
}

/// Four-component complex field on a periodic grid.
#[derive(Clone, Debug)]
pub struct SpinorField {
    grid: GridSpec,
    space: Space,
    data: Vec<[C64; 4]>,
}

impl SpinorField {
    pub fn zeros(grid: GridSpec, space: Space) -> Self {
        SpinorField { grid, space, data: vec![[ZERO; 4]; grid.len()] }
    }

    pub fn from_data(grid: GridSpec, space: Space, data: Vec<[C64; 4]>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::InvalidArgument(format!("field has {} points, grid expects {}", data.len(), grid.len())));
        }
        Ok(SpinorField { grid, space, data })
    }

    /// Samples `f(r)` on the position lattice.
    pub fn from_position_fn(grid: GridSpec, f: impl Fn(Vec3) -> [C64; 4] + Sync) -> Self {
        let data = (0..grid.len()).into_par_iter().map(|i| f(grid.position(i))).collect();
        SpinorField { grid, space: Space::Position, data }
    }

    /// Samples `f(k)` on the momentum lattice.
    pub fn from_momentum_fn(grid: GridSpec, f: impl Fn(Vec3) -> [C64; 4] + Sync) -> Self {
        let data = (0..grid.len()).into_par_iter().map(|i| f(grid.momentum(i))).collect();
        SpinorField { grid, space: Space::Momentum, data }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn data(&self) -> &[[C64; 4]] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [[C64; 4]] {
        &mut self.data
    }

    pub fn into_space(self, space: Space) -> Self {
        if self.space == space {
            self
        } else {
            self.transform()
        }
    }

    pub fn to_space(&self, space: Space) -> Self {
        self.clone().into_space(space)
    }

    /// Forward transform if in position space, inverse otherwise.
    pub fn transform(mut self) -> Self {
        let forward = self.space == Space::Position;
        fft::transform_in_place(&self.grid, &mut self.data, forward);
        self.space = if forward { Space::Momentum } else { Space::Position };
        self
    }

    pub fn norm_sqr(&self) -> f64 {
        chunked_sum(&self.data, 0.0, |_, v| v.iter().map(|z| z.norm_sqr()).sum::<f64>()) * self.grid.dv()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// ⟨self|other⟩ with the (Δx)^d weight; converts `other` if needed.
    pub fn inner(&self, other: &SpinorField) -> C64 {
        assert_eq!(self.grid, other.grid, "inner product across different grids");
        let converted;
        let other = if other.space == self.space {
            other
        } else {
            converted = other.to_space(self.space);
            &converted
        };
        let s = chunked_sum(&self.data, C64::new(0.0, 0.0), |i, a| {
            let b = &other.data[i];
            a[0].conj() * b[0] + a[1].conj() * b[1] + a[2].conj() * b[2] + a[3].conj() * b[3]
        });
        s * self.grid.dv()
    }

    pub fn scale(mut self, s: C64) -> Self {
        self.data.par_iter_mut().for_each(|v| v.iter_mut().for_each(|z| *z *= s));
        self
    }

    pub fn normalized(self) -> Result<Self> {
        let n = self.norm();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::InvalidArgument(format!("cannot normalize field with norm {n}")));
        }
        Ok(self.scale(C64::new(1.0 / n, 0.0)))
    }

    /// self += s·other (other converted to self's space if needed).
    pub fn axpy(&mut self, s: C64, other: &SpinorField) {
        assert_eq!(self.grid, other.grid, "axpy across different grids");
        let converted;
        let other = if other.space == self.space {
            other
        } else {
            converted = other.to_space(self.space);
            &converted
        };
        self.data.par_iter_mut().zip(other.data.par_iter()).for_each(|(a, b)| {
            for c in 0..4 {
                a[c] += s * b[c];
            }
        });
    }

    pub fn add(mut self, other: &SpinorField) -> Self {
        self.axpy(C64::new(1.0, 0.0), other);
        self
    }

    pub fn sub(mut self, other: &SpinorField) -> Self {
        self.axpy(C64::new(-1.0, 0.0), other);
        self
    }

    pub fn is_finite(&self) -> bool {
        self.data.par_iter().all(|v| v.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
    }

    /// Applies a position-dependent matrix pointwise (field must be in position space).
    pub(crate) fn map_position(&mut self, f: impl Fn(Vec3, [C64; 4]) -> [C64; 4] + Sync) {
        debug_assert_eq!(self.space, Space::Position);
        let grid = self.grid;
        self.data.par_iter_mut().enumerate().for_each(|(i, v)| *v = f(grid.position(i), *v));
    }

    /// Applies a momentum-dependent matrix pointwise (field must be in momentum space).
    pub(crate) fn map_momentum(&mut self, f: impl Fn(Vec3, [C64; 4]) -> [C64; 4] + Sync) {
        debug_assert_eq!(self.space, Space::Momentum);
        let grid = self.grid;
        self.data.par_iter_mut().enumerate().for_each(|(i, v)| *v = f(grid.momentum(i), *v));
    }

    /// Applies the same matrix at every point, in whatever space the field is.
    pub(crate) fn map_constant(&mut self, m: &Matrix4) {
        self.data.par_iter_mut().for_each(|v| *v = m.apply_array(*v));
    }
}

/// Fraction of the norm carried by the k = 0 mode.
pub fn zero_mode_weight(field: &SpinorField) -> f64 {
    let total = field.norm_sqr();
    if total == 0.0 {
        return 0.0;
    }
    let k = field.to_space(Space::Momentum);
    let v = k.data[k.grid.zero_mode_index()];
    v.iter().map(|z| z.norm_sqr()).sum::<f64>() * k.grid.dv() / total
}

const SUM_CHUNK: usize = 4096;

/// Σ_i f(i, data[i]) over fixed-size chunks, so the rounding (and hence
/// every reported number) does not depend on the thread count.
fn chunked_sum<T: std::ops::Add<Output = T> + Copy + Send + Sync>(
    data: &[[C64; 4]],
    zero: T,
    f: impl Fn(usize, &[C64; 4]) -> T + Sync,
) -> T {
    let partial: Vec<T> = data
        .par_chunks(SUM_CHUNK)
        .enumerate()
        .map(|(c, chunk)| chunk.iter().enumerate().fold(zero, |acc, (j, v)| acc + f(c * SUM_CHUNK + j, v)))
        .collect();
    partial.into_iter().fold(zero, |a, b| a + b)
}

/// Default width of the boundary shell, as a fraction of the box length.
pub const BOUNDARY_SHELL_FRACTION: f64 = 0.05;

/// Fraction of the norm within `shell_fraction·L` of any active boundary.
pub fn boundary_flux(field: &SpinorField, shell_fraction: f64) -> f64 {
    let total = field.norm_sqr();
    if total == 0.0 {
        return 0.0;
    }
    let pos = field.to_space(Space::Position);
    let g = pos.grid;
    let shell = chunked_sum(&pos.data, 0.0, |i, v| {
        let r = g.position(i);
        if (0..g.dim).any(|a| r[a].abs() >= 0.5 * g.l[a] * (1.0 - 2.0 * shell_fraction)) {
            v.iter().map(|z| z.norm_sqr()).sum::<f64>()
        } else {
            0.0
        }
    });
    shell * g.dv() / total
}
