//! Dense 4×4 complex matrices, four-component spinors and the Dirac matrices
//! in the standard (Dirac) representation.
//!
//! β = diag(1, 1, −1, −1), α_i carries the Pauli blocks off the diagonal and
//! Σ_i = block-diag(σ_i, σ_i). "Even" and "odd" below refer to the
//! particle/antiparticle block structure induced by β.

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Default Hermiticity tolerance for [`herm_eigs`] and [`exp_minus_iht`].
pub const HERMITIAN_TOL: f64 = 1e-10;

/// A dense complex 4×4 matrix, row-major.
#[derive(Clone, Copy, PartialEq)]
pub struct Matrix4(pub [[C64; 4]; 4]);

impl Matrix4 {
    pub const fn zero() -> Self {
        Matrix4([[ZERO; 4]; 4])
    }

    pub fn identity() -> Self {
        Self::diag([ONE; 4])
    }

    pub fn diag(d: [C64; 4]) -> Self {
        let mut m = Self::zero();
        for (i, v) in d.into_iter().enumerate() {
            m.0[i][i] = v;
        }
        m
    }

    pub fn real_diag(d: [f64; 4]) -> Self {
        Self::diag(d.map(|x| C64::new(x, 0.0)))
    }

    /// Builds the block matrix [[a, b], [c, d]] from 2×2 blocks.
    pub fn from_blocks(a: [[C64; 2]; 2], b: [[C64; 2]; 2], c: [[C64; 2]; 2], d: [[C64; 2]; 2]) -> Self {
        let mut m = Self::zero();
        for i in 0..2 {
            for j in 0..2 {
                m.0[i][j] = a[i][j];
                m.0[i][j + 2] = b[i][j];
                m.0[i + 2][j] = c[i][j];
                m.0[i + 2][j + 2] = d[i][j];
            }
        }
        m
    }

    pub fn adjoint(&self) -> Self {
        let mut m = Self::zero();
        for i in 0..4 {
            for j in 0..4 {
                m.0[i][j] = self.0[j][i].conj();
            }
        }
        m
    }

    pub fn trace(&self) -> C64 {
        (0..4).map(|i| self.0[i][i]).sum()
    }

    pub fn norm_fro(&self) -> f64 {
        self.0.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut m = *self;
        m.0.iter_mut().flatten().for_each(|z| *z *= s);
        m
    }

    pub fn scale_re(&self, s: f64) -> Self {
        let mut m = *self;
        m.0.iter_mut().flatten().for_each(|z| *z *= s);
        m
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// ‖A − A†‖_F.
    pub fn hermiticity_residual(&self) -> f64 {
        (*self - self.adjoint()).norm_fro()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_residual() <= tol
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        (self.adjoint() * *self - Self::identity()).norm_fro() <= tol
    }

    /// Particle/antiparticle diagonal blocks only (β-even part).
    pub fn even_part(&self) -> Self {
        let mut m = *self;
        for i in 0..4 {
            for j in 0..4 {
                if (i < 2) != (j < 2) {
                    m.0[i][j] = ZERO;
                }
            }
        }
        m
    }

    /// Off-diagonal blocks only (β-odd part).
    pub fn odd_part(&self) -> Self {
        *self - self.even_part()
    }

    pub fn apply(&self, v: &Spinor4) -> Spinor4 {
        let mut out = [ZERO; 4];
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.0[i][0] * v.0[0] + self.0[i][1] * v.0[1] + self.0[i][2] * v.0[2] + self.0[i][3] * v.0[3];
        }
        Spinor4(out)
    }

    /// Applies the matrix in place to four component values.
    #[inline]
    pub fn apply_array(&self, v: [C64; 4]) -> [C64; 4] {
        let m = &self.0;
        [
            m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2] + m[0][3] * v[3],
            m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2] + m[1][3] * v[3],
            m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2] + m[2][3] * v[3],
            m[3][0] * v[0] + m[3][1] * v[1] + m[3][2] * v[2] + m[3][3] * v[3],
        ]
    }
}

impl Default for Matrix4 {
    fn default() -> Self {
        Self::zero()
    }
}

impl fmt::Debug for Matrix4 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix4[")?;
        for row in &self.0 {
            write!(f, "  ")?;
            for z in row {
                write!(f, "{:+.6}{:+.6}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl Index<(usize, usize)> for Matrix4 {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.0[i][j]
    }
}

impl IndexMut<(usize, usize)> for Matrix4 {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.0[i][j]
    }
}

impl Add for Matrix4 {
    type Output = Matrix4;
    fn add(mut self, rhs: Matrix4) -> Matrix4 {
        self += rhs;
        self
    }
}

impl AddAssign for Matrix4 {
    fn add_assign(&mut self, rhs: Matrix4) {
        for i in 0..4 {
            for j in 0..4 {
                self.0[i][j] += rhs.0[i][j];
            }
        }
    }
}

impl Sub for Matrix4 {
    type Output = Matrix4;
    fn sub(mut self, rhs: Matrix4) -> Matrix4 {
        self -= rhs;
        self
    }
}

impl SubAssign for Matrix4 {
    fn sub_assign(&mut self, rhs: Matrix4) {
        for i in 0..4 {
            for j in 0..4 {
                self.0[i][j] -= rhs.0[i][j];
            }
        }
    }
}

impl Neg for Matrix4 {
    type Output = Matrix4;
    fn neg(self) -> Matrix4 {
        self.scale_re(-1.0)
    }
}

impl Mul for Matrix4 {
    type Output = Matrix4;
    fn mul(self, rhs: Matrix4) -> Matrix4 {
        let mut m = Matrix4::zero();
        for i in 0..4 {
            for k in 0..4 {
                let a = self.0[i][k];
                if a == ZERO {
                    continue;
                }
                for j in 0..4 {
                    m.0[i][j] += a * rhs.0[k][j];
                }
            }
        }
        m
    }
}

impl Mul<C64> for Matrix4 {
    type Output = Matrix4;
    fn mul(self, rhs: C64) -> Matrix4 {
        self.scale(rhs)
    }
}

impl Mul<f64> for Matrix4 {
    type Output = Matrix4;
    fn mul(self, rhs: f64) -> Matrix4 {
        self.scale_re(rhs)
    }
}

impl Mul<Matrix4> for f64 {
    type Output = Matrix4;
    fn mul(self, rhs: Matrix4) -> Matrix4 {
        rhs.scale_re(self)
    }
}

impl Mul<Matrix4> for C64 {
    type Output = Matrix4;
    fn mul(self, rhs: Matrix4) -> Matrix4 {
        rhs.scale(self)
    }
}

impl std::iter::Sum for Matrix4 {
    fn sum<It: Iterator<Item = Matrix4>>(iter: It) -> Matrix4 {
        iter.fold(Matrix4::zero(), |a, b| a + b)
    }
}

/// Four complex spinor amplitudes: (particle ↑, particle ↓, antiparticle ↑, antiparticle ↓).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Spinor4(pub [C64; 4]);

impl Spinor4 {
    pub fn new(a: C64, b: C64, c: C64, d: C64) -> Self {
        Spinor4([a, b, c, d])
    }

    pub fn from_re(v: [f64; 4]) -> Self {
        Spinor4(v.map(|x| C64::new(x, 0.0)))
    }

    pub fn dot(&self, other: &Spinor4) -> C64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn normalized(&self) -> Result<Spinor4> {
        let n = self.norm();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::InvalidArgument(format!("cannot normalize spinor with norm {n}")));
        }
        Ok(Spinor4(self.0.map(|z| z / n)))
    }
}

/// The Dirac matrices α, β and Σ in the standard representation.
#[derive(Clone, Copy, Debug)]
pub struct DiracMatrices {
    pub alpha: [Matrix4; 3],
    pub beta: Matrix4,
    pub sigma: [Matrix4; 3],
}

fn pauli() -> [[[C64; 2]; 2]; 3] {
    let o = ZERO;
    let l = ONE;
    [[[o, l], [l, o]], [[o, -I], [I, o]], [[l, o], [o, -l]]]
}

/// Standard-representation α, β, Σ.
pub fn dirac_matrices() -> DiracMatrices {
    let z = [[ZERO; 2]; 2];
    let s = pauli();
    DiracMatrices {
        alpha: s.map(|p| Matrix4::from_blocks(z, p, p, z)),
        beta: Matrix4::real_diag([1.0, 1.0, -1.0, -1.0]),
        sigma: s.map(|p| Matrix4::from_blocks(p, z, z, p)),
    }
}

/// Shared copy of the Dirac matrices.
pub fn dirac() -> &'static DiracMatrices {
    static D: std::sync::OnceLock<DiracMatrices> = std::sync::OnceLock::new();
    D.get_or_init(dirac_matrices)
}

/// AB − BA.
pub fn commutator(a: &Matrix4, b: &Matrix4) -> Matrix4 {
    *a * *b - *b * *a
}

/// AB + BA.
pub fn anticommutator(a: &Matrix4, b: &Matrix4) -> Matrix4 {
    *a * *b + *b * *a
}

/// Σ_i v_i M_i for a real 3-vector v.
pub fn dot3(m: &[Matrix4; 3], v: [f64; 3]) -> Matrix4 {
    m[0] * v[0] + m[1] * v[1] + m[2] * v[2]
}

/// Eigen-decomposition of a Hermitian matrix.
#[derive(Clone, Copy, Debug)]
pub struct HermEigen {
    /// Ascending.
    pub values: [f64; 4],
    /// Column k is the eigenvector for `values[k]`.
    pub vectors: Matrix4,
}

impl HermEigen {
    pub fn vector(&self, k: usize) -> Spinor4 {
        Spinor4([0, 1, 2, 3].map(|i| self.vectors.0[i][k]))
    }

    /// V·diag(f(λ))·V†.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> C64) -> Matrix4 {
        let d = Matrix4::diag(self.values.map(f));
        self.vectors * d * self.vectors.adjoint()
    }
}

/// Eigenvalues (ascending) and orthonormal eigenvectors of a Hermitian 4×4
/// matrix by cyclic complex Jacobi rotations.
///
/// Eigenvector phases are fixed so that the first component with modulus
/// above 1e−12 is real and positive.
pub fn herm_eigs(a: &Matrix4) -> Result<HermEigen> {
    herm_eigs_tol(a, HERMITIAN_TOL)
}

pub fn herm_eigs_tol(a: &Matrix4, tol: f64) -> Result<HermEigen> {
    let residual = a.hermiticity_residual();
    if !(residual <= tol) {
        return Err(Error::NotHermitian { residual });
    }
    // Work on the exactly Hermitian part.
    let mut m = (*a + a.adjoint()).scale_re(0.5);
    let mut v = Matrix4::identity();
    let scale = m.norm_fro();
    if scale == 0.0 {
        return Ok(HermEigen { values: [0.0; 4], vectors: v });
    }

    for _sweep in 0..64 {
        let off: f64 = (0..4)
            .flat_map(|i| (0..4).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m.0[i][j].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= 1e-18 * scale {
            break;
        }
        for p in 0..3 {
            for q in (p + 1)..4 {
                let apq = m.0[p][q];
                let g = apq.norm();
                if g <= 1e-300 {
                    continue;
                }
                // Phase so the (p,q) element becomes real and positive, then a
                // real symmetric Jacobi rotation.
                let phase = apq / g;
                let app = m.0[p][p].re;
                let aqq = m.0[q][q].re;
                let theta = (aqq - app) / (2.0 * g);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // U = D·R with D = diag(.., 1 @p, conj(phase) @q, ..),
                // R = [[c, s], [−s, c]] on (p, q).
                let mut u = Matrix4::identity();
                u.0[p][p] = C64::new(c, 0.0);
                u.0[p][q] = C64::new(s, 0.0);
                u.0[q][p] = phase.conj() * (-s);
                u.0[q][q] = phase.conj() * c;
                m = u.adjoint() * m * u;
                m.0[p][q] = ZERO;
                m.0[q][p] = ZERO;
                v = v * u;
            }
        }
    }

    let mut order = [0usize, 1, 2, 3];
    order.sort_by(|&i, &j| m.0[i][i].re.total_cmp(&m.0[j][j].re));
    let mut values = [0.0; 4];
    let mut vectors = Matrix4::zero();
    for (k, &src) in order.iter().enumerate() {
        values[k] = m.0[src][src].re;
        let col: [C64; 4] = [0, 1, 2, 3].map(|i| v.0[i][src]);
        let lead = col.iter().find(|z| z.norm() > 1e-12).copied().unwrap_or(ONE);
        let fix = lead.conj() / lead.norm();
        for i in 0..4 {
            vectors.0[i][k] = col[i] * fix;
        }
    }
    Ok(HermEigen { values, vectors })
}

/// exp(−iHt) for Hermitian H via its eigen-decomposition.
pub fn exp_minus_iht(h: &Matrix4, t: f64) -> Result<Matrix4> {
    let eig = herm_eigs(h)?;
    Ok(eig.map_spectrum(|l| C64::from_polar(1.0, -l * t)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(rng: &mut ChaCha8Rng) -> Matrix4 {
        let mut m = Matrix4::zero();
        for i in 0..4 {
            for j in 0..4 {
                m.0[i][j] = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
        }
        (m + m.adjoint()).scale_re(0.5)
    }

    #[test]
    fn clifford_examples() {
        let d = dirac_matrices();
        assert_eq!(d.alpha[0] * d.alpha[0], Matrix4::identity());
        assert_eq!(anticommutator(&d.alpha[0], &d.beta), Matrix4::zero());
        assert_eq!((d.alpha[0] * d.alpha[1]).scale(-I), d.sigma[2]);
    }

    #[test]
    fn all_returned_matrices_hermitian_and_unitary() {
        let d = dirac_matrices();
        for m in d.alpha.iter().chain(d.sigma.iter()).chain(std::iter::once(&d.beta)) {
            assert!(m.is_hermitian(0.0));
            assert!(m.is_unitary(0.0));
        }
    }

    #[test]
    fn commutator_examples() {
        let d = dirac_matrices();
        assert_eq!(commutator(&d.sigma[0], &d.sigma[1]), d.sigma[2].scale(C64::new(0.0, 2.0)));
        assert_eq!(anticommutator(&d.sigma[0], &d.sigma[0]), Matrix4::identity() * 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_hermitian(&mut rng) * C64::new(0.3, 1.7);
        assert_eq!(commutator(&Matrix4::identity(), &m), Matrix4::zero());
    }

    #[test]
    fn eigs_of_dirac_matrices() {
        let d = dirac_matrices();
        assert_eq!(herm_eigs(&d.beta).unwrap().values, [-1.0, -1.0, 1.0, 1.0]);
        let half = herm_eigs(&(d.sigma[2] * 0.5)).unwrap().values;
        assert_eq!(half, [-0.5, -0.5, 0.5, 0.5]);
        let ax = herm_eigs(&d.alpha[0]).unwrap().values;
        for (a, b) in ax.iter().zip([-1.0, -1.0, 1.0, 1.0]) {
            assert!((a - b).abs() < 1e-14, "{ax:?}");
        }
    }

    #[test]
    fn eigs_reject_non_hermitian() {
        let mut m = Matrix4::identity();
        m.0[0][1] = ONE;
        assert!(matches!(herm_eigs(&m), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn eigs_reconstruct_random_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let a = random_hermitian(&mut rng).scale_re(rng.gen_range(0.1..10.0));
            let e = herm_eigs(&a).unwrap();
            let norm = a.norm_fro();
            assert!(e.vectors.is_unitary(1e-12));
            let rebuilt = e.map_spectrum(|l| C64::new(l, 0.0));
            assert!((rebuilt - a).norm_fro() <= 1e-12 * norm);
            for k in 0..4 {
                let v = e.vector(k);
                let av = a.apply(&v);
                let res: f64 = (0..4).map(|i| (av.0[i] - v.0[i] * e.values[k]).norm_sqr()).sum::<f64>().sqrt();
                assert!(res <= 1e-12 * norm);
                let lead = v.0.iter().find(|z| z.norm() > 1e-12).unwrap();
                assert!(lead.im.abs() < 1e-14 && lead.re > 0.0);
            }
            assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn exponential_examples() {
        let d = dirac_matrices();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = random_hermitian(&mut rng);
        assert!((exp_minus_iht(&h, 0.0).unwrap() - Matrix4::identity()).norm_fro() < 1e-14);

        let (m0, c, t) = (1.0, 1.0, 0.7);
        let u = exp_minus_iht(&(d.beta * (m0 * c * c)), t).unwrap();
        let ph = C64::from_polar(1.0, -m0 * c * c * t);
        let expect = Matrix4::diag([ph, ph, ph.conj(), ph.conj()]);
        assert!((u - expect).norm_fro() < 1e-15);

        for _ in 0..100 {
            let h = random_hermitian(&mut rng);
            let t = rng.gen_range(-3.0..3.0);
            let fwd = exp_minus_iht(&h, t).unwrap();
            let back = exp_minus_iht(&h, -t).unwrap();
            assert!((fwd * back - Matrix4::identity()).norm_fro() < 1e-12);
            assert!(fwd.is_unitary(1e-12));
        }
    }

    #[test]
    fn exponential_preserves_spinor_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let h = random_hermitian(&mut rng).scale_re(5.0);
            let u = exp_minus_iht(&h, rng.gen_range(-10.0..10.0)).unwrap();
            let v = Spinor4([0; 4].map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))));
            assert!((u.apply(&v).norm() - v.norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn block_parts() {
        let d = dirac_matrices();
        assert_eq!(d.alpha[1].even_part(), Matrix4::zero());
        assert_eq!(d.sigma[1].odd_part(), Matrix4::zero());
    }
}
