//! Operator expressions built from position-diagonal and momentum-diagonal
//! 4×4-matrix-valued factors, applied matrix-free.
//!
//! Adjacent factors that are diagonal in the same space are fused at
//! construction time, so a product like α_j r_j B_l p_l p_i costs one
//! transform pair rather than one per factor.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use num_complex::Complex64 as C64;

use super::{zero_mode_weight, Space, SpinorField};
use crate::algebra::Matrix4;
use crate::error::{Error, Result};
use crate::vec3::{self, Vec3};

/// Zero-mode weight above which singular momentum factors are refused.
pub const DEFAULT_ZERO_MODE_GUARD: f64 = 1e-10;

type MatrixFn = dyn Fn(Vec3, f64) -> Matrix4 + Send + Sync;
type ScalarFn = dyn Fn(Vec3, f64) -> C64 + Send + Sync;

/// Where a leaf is diagonal.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Domain {
    /// Function of (r, t).
    Position,
    /// Function of (k, t).
    Momentum,
    /// Function of t only; acts in either space.
    Uniform,
}

impl Domain {
    fn space(self) -> Option<Space> {
        match self {
            Domain::Position => Some(Space::Position),
            Domain::Momentum => Some(Space::Momentum),
            Domain::Uniform => None,
        }
    }

    fn join(self, other: Domain) -> Option<Domain> {
        match (self, other) {
            (Domain::Uniform, d) | (d, Domain::Uniform) => Some(d),
            (a, b) if a == b => Some(a),
            _ => None,
        }
    }
}

enum LeafFn {
    Matrix(Box<MatrixFn>),
    /// s(x, t)·M, with M = 𝟙 when absent.
    Scalar(Box<ScalarFn>, Option<Matrix4>),
}

pub struct Leaf {
    label: String,
    domain: Domain,
    /// Undefined at k = 0: the zero mode is mapped to zero and inputs are
    /// checked against the zero-mode guard.
    singular: bool,
    f: LeafFn,
}

impl Leaf {
    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn is_singular(&self) -> bool {
        self.singular
    }

    pub fn matrix(&self, x: Vec3, t: f64) -> Matrix4 {
        match &self.f {
            LeafFn::Matrix(f) => f(x, t),
            LeafFn::Scalar(f, m) => m.unwrap_or_else(Matrix4::identity) * f(x, t),
        }
    }

    #[inline]
    fn act(&self, x: Vec3, t: f64, v: [C64; 4]) -> [C64; 4] {
        if self.singular && self.domain == Domain::Momentum && vec3::dot(x, x) == 0.0 {
            return [C64::new(0.0, 0.0); 4];
        }
        match &self.f {
            LeafFn::Matrix(f) => f(x, t).apply_array(v),
            LeafFn::Scalar(f, m) => {
                let s = f(x, t);
                let w = match m {
                    Some(m) => m.apply_array(v),
                    None => v,
                };
                w.map(|z| z * s)
            }
        }
    }

    /// Pointwise product a(x)·b(x) when the domains are compatible.
    fn fuse(a: &Arc<Leaf>, b: &Arc<Leaf>) -> Option<Leaf> {
        let domain = a.domain.join(b.domain)?;
        let label = format!("{}·{}", a.label, b.label);
        let singular = a.singular || b.singular;
        let f = match (&a.f, &b.f) {
            (LeafFn::Scalar(..), LeafFn::Scalar(..)) => {
                let m = match (scalar_matrix(a), scalar_matrix(b)) {
                    (None, None) => None,
                    (ma, mb) => Some(ma.unwrap_or_else(Matrix4::identity) * mb.unwrap_or_else(Matrix4::identity)),
                };
                let (a2, b2) = (a.clone(), b.clone());
                LeafFn::Scalar(Box::new(move |x, t| a2.scalar(x, t) * b2.scalar(x, t)), m)
            }
            _ => {
                let (a2, b2) = (a.clone(), b.clone());
                LeafFn::Matrix(Box::new(move |x, t| a2.matrix(x, t) * b2.matrix(x, t)))
            }
        };
        Some(Leaf { label, domain, singular, f })
    }

    /// Pointwise sum a(x) + b(x) when the domains are compatible.
    fn sum(a: &Arc<Leaf>, b: &Arc<Leaf>) -> Option<Leaf> {
        let domain = a.domain.join(b.domain)?;
        let (a2, b2) = (a.clone(), b.clone());
        Some(Leaf {
            label: format!("({} + {})", a.label, b.label),
            domain,
            singular: a.singular || b.singular,
            f: LeafFn::Matrix(Box::new(move |x, t| a2.matrix(x, t) + b2.matrix(x, t))),
        })
    }

    fn scaled(self: &Arc<Leaf>, z: C64) -> Leaf {
        let l = self.clone();
        let f = match &self.f {
            LeafFn::Scalar(_, m) => LeafFn::Scalar(Box::new(move |x, t| l.scalar(x, t) * z), *m),
            LeafFn::Matrix(_) => LeafFn::Matrix(Box::new(move |x, t| l.matrix(x, t) * z)),
        };
        Leaf { label: self.label.clone(), domain: self.domain, singular: self.singular, f }
    }

    fn scalar(&self, x: Vec3, t: f64) -> C64 {
        match &self.f {
            LeafFn::Scalar(f, _) => f(x, t),
            LeafFn::Matrix(_) => unreachable!("scalar() on a matrix leaf"),
        }
    }

    fn with_constant(self: &Arc<Leaf>, m: Matrix4, left: bool) -> Leaf {
        let l = self.clone();
        let f = match &self.f {
            LeafFn::Scalar(_, own) => {
                let own = own.unwrap_or_else(Matrix4::identity);
                let combined = if left { m * own } else { own * m };
                LeafFn::Scalar(Box::new(move |x, t| l.scalar(x, t)), Some(combined))
            }
            LeafFn::Matrix(_) => {
                if left {
                    LeafFn::Matrix(Box::new(move |x, t| m * l.matrix(x, t)))
                } else {
                    LeafFn::Matrix(Box::new(move |x, t| l.matrix(x, t) * m))
                }
            }
        };
        Leaf { label: self.label.clone(), domain: self.domain, singular: self.singular, f }
    }

    fn adjoint(self: &Arc<Leaf>) -> Leaf {
        let l = self.clone();
        let f = match &self.f {
            LeafFn::Scalar(_, m) => LeafFn::Scalar(Box::new(move |x, t| l.scalar(x, t).conj()), m.map(|m| m.adjoint())),
            LeafFn::Matrix(_) => LeafFn::Matrix(Box::new(move |x, t| l.matrix(x, t).adjoint())),
        };
        Leaf { label: format!("{}†", self.label), domain: self.domain, singular: self.singular, f }
    }
}

fn scalar_matrix(l: &Leaf) -> Option<Matrix4> {
    match &l.f {
        LeafFn::Scalar(_, m) => *m,
        LeafFn::Matrix(_) => None,
    }
}

/// Composition tree of diagonal factors. `Mul(a, b)` applies `b` first.
#[derive(Clone)]
pub enum Expr {
    Zero,
    Const(Matrix4),
    Leaf(Arc<Leaf>),
    Add(Vec<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Scale(C64, Box<Expr>),
    Commutator(Box<Expr>, Box<Expr>),
    Adjoint(Box<Expr>),
}

/// Particle/antiparticle block structure of an expression.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LeafParity {
    Zero,
    /// Block-diagonal.
    Even,
    /// Block-off-diagonal.
    Odd,
    Mixed,
}

impl LeafParity {
    fn of_matrix(m: &Matrix4, tol: f64) -> LeafParity {
        let even = m.even_part().norm_fro();
        let odd = m.odd_part().norm_fro();
        let scale = tol * (even + odd).max(1.0);
        match (even > scale, odd > scale) {
            (false, false) => LeafParity::Zero,
            (true, false) => LeafParity::Even,
            (false, true) => LeafParity::Odd,
            (true, true) => LeafParity::Mixed,
        }
    }

    fn sum(self, other: LeafParity) -> LeafParity {
        use LeafParity::*;
        match (self, other) {
            (Zero, x) | (x, Zero) => x,
            (a, b) if a == b => a,
            _ => Mixed,
        }
    }

    fn product(self, other: LeafParity) -> LeafParity {
        use LeafParity::*;
        match (self, other) {
            (Zero, _) | (_, Zero) => Zero,
            (Mixed, _) | (_, Mixed) => Mixed,
            (a, b) if a == b => Even,
            _ => Odd,
        }
    }
}

const PARITY_SAMPLE_POINTS: [Vec3; 4] = [[0.31, -0.72, 1.13], [-1.24, 0.43, 0.57], [2.05, 1.01, -0.33], [0.5, 0.0, 0.0]];
const PARITY_SAMPLE_TIMES: [f64; 2] = [0.0, 0.71];

fn leaf(label: impl Into<String>, domain: Domain, singular: bool, f: LeafFn) -> Expr {
    Expr::Leaf(Arc::new(Leaf { label: label.into(), domain, singular, f }))
}

fn real_scalar(f: impl Fn(Vec3, f64) -> f64 + Send + Sync + 'static) -> LeafFn {
    LeafFn::Scalar(Box::new(move |x, t| C64::new(f(x, t), 0.0)), None)
}

impl Expr {
    pub fn identity() -> Expr {
        Expr::Const(Matrix4::identity())
    }

    pub fn constant(m: Matrix4) -> Expr {
        Expr::Const(m)
    }

    pub fn position(label: impl Into<String>, f: impl Fn(Vec3, f64) -> Matrix4 + Send + Sync + 'static) -> Expr {
        leaf(label, Domain::Position, false, LeafFn::Matrix(Box::new(f)))
    }

    /// s(r, t)·𝟙.
    pub fn position_scalar(label: impl Into<String>, f: impl Fn(Vec3, f64) -> f64 + Send + Sync + 'static) -> Expr {
        leaf(label, Domain::Position, false, real_scalar(f))
    }

    pub fn momentum(label: impl Into<String>, f: impl Fn(Vec3) -> Matrix4 + Send + Sync + 'static) -> Expr {
        leaf(label, Domain::Momentum, false, LeafFn::Matrix(Box::new(move |k, _| f(k))))
    }

    /// A momentum factor that is undefined at k = 0.
    pub fn momentum_singular(label: impl Into<String>, f: impl Fn(Vec3) -> Matrix4 + Send + Sync + 'static) -> Expr {
        leaf(label, Domain::Momentum, true, LeafFn::Matrix(Box::new(move |k, _| f(k))))
    }

    /// s(k)·𝟙.
    pub fn momentum_scalar(label: impl Into<String>, f: impl Fn(Vec3) -> f64 + Send + Sync + 'static) -> Expr {
        leaf(label, Domain::Momentum, false, real_scalar(move |k, _| f(k)))
    }

    pub fn momentum_scalar_singular(label: impl Into<String>, f: impl Fn(Vec3) -> f64 + Send + Sync + 'static) -> Expr {
        leaf(label, Domain::Momentum, true, real_scalar(move |k, _| f(k)))
    }

    /// s(t)·𝟙, acting in whichever space the state is in.
    pub fn uniform_scalar(label: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Expr {
        leaf(label, Domain::Uniform, false, real_scalar(move |_, t| f(t)))
    }

    pub fn uniform(label: impl Into<String>, f: impl Fn(f64) -> Matrix4 + Send + Sync + 'static) -> Expr {
        leaf(label, Domain::Uniform, false, LeafFn::Matrix(Box::new(move |_, t| f(t))))
    }

    pub fn scale(self, s: C64) -> Expr {
        if s == C64::new(0.0, 0.0) {
            return Expr::Zero;
        }
        match self {
            Expr::Zero => Expr::Zero,
            Expr::Const(m) => Expr::Const(m * s),
            e if s == C64::new(1.0, 0.0) => e,
            Expr::Leaf(l) => Expr::Leaf(Arc::new(l.scaled(s))),
            Expr::Scale(z, e) => (*e).scale(z * s),
            e => Expr::Scale(s, Box::new(e)),
        }
    }

    pub fn scale_re(self, s: f64) -> Expr {
        self.scale(C64::new(s, 0.0))
    }

    pub fn commutator(a: Expr, b: Expr) -> Expr {
        match (&a, &b) {
            (Expr::Zero, _) | (_, Expr::Zero) => Expr::Zero,
            _ => Expr::Commutator(Box::new(a), Box::new(b)),
        }
    }

    /// (1/i)[a, b].
    pub fn heisenberg(a: Expr, b: Expr) -> Expr {
        Expr::commutator(a, b).scale(C64::new(0.0, -1.0))
    }

    pub fn anticommutator(a: Expr, b: Expr) -> Expr {
        a.clone() * b.clone() + b * a
    }

    pub fn adjoint(self) -> Expr {
        Expr::Adjoint(Box::new(self))
    }

    pub fn sum(terms: impl IntoIterator<Item = Expr>) -> Expr {
        terms.into_iter().fold(Expr::Zero, |a, b| a + b)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Zero)
    }

    /// True if any factor is undefined at k = 0.
    pub fn has_singular(&self) -> bool {
        match self {
            Expr::Zero | Expr::Const(_) => false,
            Expr::Leaf(l) => l.singular,
            Expr::Add(v) => v.iter().any(Expr::has_singular),
            Expr::Mul(a, b) | Expr::Commutator(a, b) => a.has_singular() || b.has_singular(),
            Expr::Scale(_, e) | Expr::Adjoint(e) => e.has_singular(),
        }
    }

    /// True if any factor lives in `domain`.
    pub fn has_domain(&self, domain: Domain) -> bool {
        match self {
            Expr::Zero | Expr::Const(_) => false,
            Expr::Leaf(l) => l.domain == domain,
            Expr::Add(v) => v.iter().any(|e| e.has_domain(domain)),
            Expr::Mul(a, b) | Expr::Commutator(a, b) => a.has_domain(domain) || b.has_domain(domain),
            Expr::Scale(_, e) | Expr::Adjoint(e) => e.has_domain(domain),
        }
    }

    /// Symbolic adjoint with the `Adjoint` node pushed down to the leaves.
    pub fn adjoint_expr(&self) -> Expr {
        match self {
            Expr::Zero => Expr::Zero,
            Expr::Const(m) => Expr::Const(m.adjoint()),
            Expr::Leaf(l) => Expr::Leaf(Arc::new(l.adjoint())),
            Expr::Add(v) => Expr::Add(v.iter().map(Expr::adjoint_expr).collect()),
            Expr::Mul(a, b) => b.adjoint_expr() * a.adjoint_expr(),
            Expr::Scale(z, e) => e.adjoint_expr().scale(z.conj()),
            Expr::Commutator(a, b) => Expr::commutator(b.adjoint_expr(), a.adjoint_expr()),
            Expr::Adjoint(e) => (**e).clone(),
        }
    }

    /// Hermitian part (T + T†)/2.
    pub fn hermitian_part(&self) -> Expr {
        (self.clone() + self.adjoint_expr()).scale_re(0.5)
    }

    /// Anti-Hermitian part (T − T†)/2.
    pub fn anti_hermitian_part(&self) -> Expr {
        (self.clone() - self.adjoint_expr()).scale_re(0.5)
    }

    /// Block structure, judged by evaluating every leaf at fixed sample
    /// points and combining through sums and products.
    pub fn parity(&self, tol: f64) -> LeafParity {
        match self {
            Expr::Zero => LeafParity::Zero,
            Expr::Const(m) => LeafParity::of_matrix(m, tol),
            Expr::Leaf(l) => PARITY_SAMPLE_POINTS
                .iter()
                .flat_map(|x| PARITY_SAMPLE_TIMES.iter().map(move |t| (x, t)))
                .map(|(x, t)| LeafParity::of_matrix(&l.matrix(*x, *t), tol))
                .fold(LeafParity::Zero, LeafParity::sum),
            Expr::Add(v) => v.iter().map(|e| e.parity(tol)).fold(LeafParity::Zero, LeafParity::sum),
            Expr::Mul(a, b) | Expr::Commutator(a, b) => a.parity(tol).product(b.parity(tol)),
            Expr::Scale(_, e) | Expr::Adjoint(e) => e.parity(tol),
        }
    }

    /// Number of leaves, for diagnostics.
    pub fn leaf_count(&self) -> usize {
        match self {
            Expr::Zero => 0,
            Expr::Const(_) | Expr::Leaf(_) => 1,
            Expr::Add(v) => v.iter().map(Expr::leaf_count).sum(),
            Expr::Mul(a, b) | Expr::Commutator(a, b) => a.leaf_count() + b.leaf_count(),
            Expr::Scale(_, e) | Expr::Adjoint(e) => e.leaf_count(),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Zero => write!(f, "0"),
            Expr::Const(_) => write!(f, "M"),
            Expr::Leaf(l) => write!(f, "{}", l.label),
            Expr::Add(v) => {
                write!(f, "(")?;
                for (i, e) in v.iter().enumerate() {
                    if i > 0 {
                        write!(f, " + ")?;
                    }
                    write!(f, "{e}")?;
                }
                write!(f, ")")
            }
            Expr::Mul(a, b) => write!(f, "{a}·{b}"),
            Expr::Scale(z, e) => write!(f, "({z})·{e}"),
            Expr::Commutator(a, b) => write!(f, "[{a}, {b}]"),
            Expr::Adjoint(e) => write!(f, "({e})†"),
        }
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        match (self, rhs) {
            (Expr::Zero, e) | (e, Expr::Zero) => e,
            (Expr::Const(a), Expr::Const(b)) => Expr::Const(a + b),
            (Expr::Leaf(a), Expr::Leaf(b)) => match Leaf::sum(&a, &b) {
                Some(l) => Expr::Leaf(Arc::new(l)),
                None => Expr::Add(vec![Expr::Leaf(a), Expr::Leaf(b)]),
            },
            (Expr::Add(mut v), Expr::Add(w)) => {
                for e in w {
                    v = push_term(v, e);
                }
                Expr::Add(v)
            }
            (Expr::Add(v), e) => Expr::Add(push_term(v, e)),
            (e, Expr::Add(mut v)) => {
                v.insert(0, e);
                Expr::Add(v)
            }
            (a, b) => Expr::Add(vec![a, b]),
        }
    }
}

/// Appends a term, merging it into a compatible trailing leaf.
fn push_term(mut v: Vec<Expr>, e: Expr) -> Vec<Expr> {
    if let (Some(Expr::Leaf(last)), Expr::Leaf(new)) = (v.last(), &e) {
        if let Some(l) = Leaf::sum(last, new) {
            *v.last_mut().unwrap() = Expr::Leaf(Arc::new(l));
            return v;
        }
    }
    if e.is_zero() {
        return v;
    }
    v.push(e);
    v
}

impl Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        self + (-rhs)
    }
}

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        self.scale_re(-1.0)
    }
}

/// Pointwise fusion of two adjacent factors, if they live in compatible spaces.
fn fuse(a: &Expr, b: &Expr) -> Option<Expr> {
    match (a, b) {
        (Expr::Const(x), Expr::Const(y)) => Some(Expr::Const(*x * *y)),
        (Expr::Const(m), Expr::Leaf(l)) => Some(Expr::Leaf(Arc::new(l.with_constant(*m, true)))),
        (Expr::Leaf(l), Expr::Const(m)) => Some(Expr::Leaf(Arc::new(l.with_constant(*m, false)))),
        (Expr::Leaf(x), Expr::Leaf(y)) => Leaf::fuse(x, y).map(|l| Expr::Leaf(Arc::new(l))),
        _ => None,
    }
}

impl Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        match (self, rhs) {
            (Expr::Zero, _) | (_, Expr::Zero) => Expr::Zero,
            (Expr::Scale(z, a), b) => (*a * b).scale(z),
            (a, Expr::Scale(z, b)) => (a * *b).scale(z),
            (a, b) => {
                if let Some(f) = fuse(&a, &b) {
                    return f;
                }
                if let Expr::Mul(a1, a2) = &a {
                    if let Some(f) = fuse(a2, &b) {
                        return (**a1).clone() * f;
                    }
                }
                if let Expr::Mul(b1, b2) = &b {
                    if let Some(f) = fuse(&a, b1) {
                        return f * (**b2).clone();
                    }
                }
                Expr::Mul(Box::new(a), Box::new(b))
            }
        }
    }
}

impl Mul<f64> for Expr {
    type Output = Expr;
    fn mul(self, rhs: f64) -> Expr {
        self.scale_re(rhs)
    }
}

impl Mul<C64> for Expr {
    type Output = Expr;
    fn mul(self, rhs: C64) -> Expr {
        self.scale(rhs)
    }
}

impl Mul<Expr> for f64 {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        rhs.scale_re(self)
    }
}

impl Mul<Expr> for C64 {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        rhs.scale(self)
    }
}

/// A state held lazily in both spaces.
struct Both {
    field: SpinorField,
    other: Option<SpinorField>,
}

impl Both {
    fn new(field: SpinorField) -> Self {
        Both { field, other: None }
    }

    fn get(&mut self, space: Option<Space>) -> SpinorField {
        match space {
            Some(s) if s != self.field.space() => {
                if self.other.is_none() {
                    self.other = Some(self.field.to_space(s));
                }
                self.other.clone().unwrap()
            }
            _ => self.field.clone(),
        }
    }
}

/// Evaluates `expr` on an input held lazily in both spaces, so sibling
/// terms share the input's transform.
fn eval(expr: &Expr, input: &mut Both, t: f64) -> SpinorField {
    match expr {
        Expr::Zero => SpinorField::zeros(*input.field.grid(), input.field.space()),
        Expr::Const(m) => {
            let mut f = input.get(None);
            f.map_constant(m);
            f
        }
        Expr::Leaf(leaf) => {
            let mut f = input.get(leaf.domain.space());
            match f.space() {
                Space::Position => f.map_position(|r, v| leaf.act(r, t, v)),
                Space::Momentum => f.map_momentum(|k, v| leaf.act(k, t, v)),
            }
            f
        }
        Expr::Add(terms) => {
            // One accumulator per space; a single transform merges them.
            let mut acc: [Option<SpinorField>; 2] = [None, None];
            for term in terms {
                let part = eval(term, input, t);
                match &mut acc[part.space() as usize] {
                    slot @ None => *slot = Some(part),
                    Some(a) => a.axpy(C64::new(1.0, 0.0), &part),
                }
            }
            match acc {
                [Some(a), Some(b)] => a.add(&b),
                [Some(a), None] | [None, Some(a)] => a,
                [None, None] => SpinorField::zeros(*input.field.grid(), input.field.space()),
            }
        }
        Expr::Mul(a, b) => {
            let mid = eval(b, input, t);
            eval(a, &mut Both::new(mid), t)
        }
        Expr::Scale(z, e) => eval(e, input, t).scale(*z),
        Expr::Commutator(a, b) => {
            let bpsi = eval(b, input, t);
            let ab = eval(a, &mut Both::new(bpsi), t);
            let apsi = eval(a, input, t);
            let ba = eval(b, &mut Both::new(apsi), t);
            ab.sub(&ba)
        }
        Expr::Adjoint(e) => eval(&e.adjoint_expr(), input, t),
    }
}

/// Applies `expr` at time `t` with the default zero-mode guard.
pub fn apply(expr: &Expr, field: &SpinorField, t: f64) -> Result<SpinorField> {
    apply_with_guard(expr, field, t, DEFAULT_ZERO_MODE_GUARD)
}

pub fn apply_with_guard(expr: &Expr, field: &SpinorField, t: f64, guard: f64) -> Result<SpinorField> {
    if expr.has_singular() {
        let weight = zero_mode_weight(field);
        if weight > guard {
            return Err(Error::ZeroModeGuard { weight, guard });
        }
    }
    let out = eval(expr, &mut Both::new(field.clone()), t);
    if !out.is_finite() {
        return Err(Error::NonFinite(format!("applying {expr}")));
    }
    Ok(out)
}

/// ⟨ψ|E|ψ⟩.
pub fn expectation(expr: &Expr, field: &SpinorField, t: f64) -> Result<C64> {
    let out = apply(expr, field, t)?;
    Ok(field.inner(&out))
}

/// max over pairs of |⟨φ, Eψ⟩ − conj⟨ψ, Eφ⟩|; zero for Hermitian E.
pub fn hermiticity_residual(expr: &Expr, states: &[SpinorField], t: f64) -> Result<f64> {
    let images: Vec<SpinorField> = states.iter().map(|s| apply(expr, s, t)).collect::<Result<_>>()?;
    let mut worst: f64 = 0.0;
    for (i, a) in states.iter().enumerate() {
        for (j, b) in states.iter().enumerate().skip(i) {
            let lhs = a.inner(&images[j]);
            let rhs = b.inner(&images[i]).conj();
            worst = worst.max((lhs - rhs).norm());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::super::tests_support::random_field;
    use super::super::GridSpec;
    use super::*;
    use crate::algebra::dirac;

    fn x_op() -> Expr {
        Expr::position_scalar("x", |r, _| r[0])
    }

    fn kx_op() -> Expr {
        Expr::momentum_scalar("k_x", |k| k[0])
    }

    fn gaussian(grid: GridSpec, sigma: f64, k0: f64) -> SpinorField {
        SpinorField::from_position_fn(grid, |r| {
            let g = (-r[0] * r[0] / (2.0 * sigma * sigma)).exp();
            let ph = C64::from_polar(g, k0 * r[0]);
            [ph, ph * 0.5, C64::new(0.0, 0.2) * ph, C64::new(0.0, 0.0)]
        })
        .normalized()
        .unwrap()
    }

    #[test]
    fn identity_momentum_leaf() {
        let grid = GridSpec::line(64, 20.0).unwrap();
        let f = random_field(grid, 2);
        let e = Expr::momentum("1", |_| Matrix4::identity());
        let out = apply(&e, &f, 0.0).unwrap();
        assert!(out.sub(&f).norm() <= 1e-12 * f.norm());
    }

    #[test]
    fn canonical_commutator() {
        // σ resolved by ≥ 8 points, ≥ 7σ to each boundary.
        let grid = GridSpec::line(256, 64.0).unwrap();
        let psi = gaussian(grid, 3.0, 0.4);
        let e = Expr::commutator(x_op(), kx_op());
        let out = apply(&e, &psi, 0.0).unwrap();
        let resid = out.sub(&psi.clone().scale(C64::new(0.0, 1.0))).norm();
        assert!(resid <= 1e-8, "{resid}");
    }

    #[test]
    fn adjoint_defining_property() {
        let grid = GridSpec::line(32, 10.0).unwrap();
        let d = dirac();
        let alpha_x = d.alpha[0];
        let beta = d.beta;
        let e = Expr::position("xα", move |r, _| alpha_x * C64::new(r[0], 0.3 * r[0] * r[0]))
            * Expr::momentum("kβ", move |k| beta * C64::new(k[0], 1.0))
            + Expr::Const(d.sigma[1] * C64::new(0.0, 1.0));
        for s in 0..4 {
            let phi = random_field(grid, 10 + s);
            let psi = random_field(grid, 20 + s);
            let lhs = apply(&e.clone().adjoint(), &phi, 0.0).unwrap().inner(&psi);
            let rhs = phi.inner(&apply(&e, &psi, 0.0).unwrap());
            assert!((lhs - rhs).norm() <= 1e-10 * rhs.norm().max(1.0));
        }
    }

    #[test]
    fn linearity_and_composition() {
        let grid = GridSpec::line(64, 10.0).unwrap();
        let d = dirac();
        let ay = d.alpha[1];
        let e = Expr::commutator(Expr::position("xα_y", move |r, _| ay * r[0]), kx_op() * kx_op()) + x_op();
        let a = C64::new(0.3, -1.2);
        let b = C64::new(-0.7, 0.1);
        let psi = random_field(grid, 3);
        let phi = random_field(grid, 4);
        let combo = psi.clone().scale(a).add(&phi.clone().scale(b));
        let lhs = apply(&e, &combo, 0.0).unwrap();
        let rhs = apply(&e, &psi, 0.0).unwrap().scale(a).add(&apply(&e, &phi, 0.0).unwrap().scale(b));
        assert!(lhs.sub(&rhs).norm() <= 1e-12 * rhs.norm());

        let e2 = kx_op() * x_op();
        let composed = apply(&(e.clone() * e2.clone()), &psi, 0.0).unwrap();
        let nested = apply(&e, &apply(&e2, &psi, 0.0).unwrap(), 0.0).unwrap();
        assert_eq!(composed.sub(&nested).norm(), 0.0);
    }

    #[test]
    fn expectation_examples() {
        let grid = GridSpec::line(256, 80.0).unwrap();
        let psi = gaussian(grid, 4.0, 1.3);
        let one = expectation(&Expr::identity(), &psi, 0.0).unwrap();
        assert!((one - 1.0).norm() < 1e-12);
        assert!(psi.inner(&psi).im == 0.0 && psi.inner(&psi).re > 0.0);
        let k = expectation(&kx_op(), &psi, 0.0).unwrap();
        assert!((k.re - 1.3).abs() < 1e-6 && k.im.abs() < 1e-10, "{k}");
    }

    #[test]
    fn singular_leaf_guard() {
        let grid = GridSpec::line(64, 20.0).unwrap();
        let psi = gaussian(grid, 2.0, 0.0);
        let e = Expr::momentum_scalar_singular("1/k", |k| 1.0 / k[0]);
        assert!(matches!(apply(&e, &psi, 0.0), Err(Error::ZeroModeGuard { .. })));
        let moving = gaussian(grid, 2.0, 6.0);
        assert!(apply(&e, &moving, 0.0).is_ok());
    }

    #[test]
    fn nan_detection() {
        let grid = GridSpec::line(16, 4.0).unwrap();
        let psi = random_field(grid, 1);
        let e = Expr::position_scalar("nan", |_, _| f64::NAN);
        assert!(matches!(apply(&e, &psi, 0.0), Err(Error::NonFinite(_))));
    }

    #[test]
    fn hermitian_builtins_have_zero_residual() {
        let grid = GridSpec::line(32, 10.0).unwrap();
        let d = dirac();
        let ax = d.alpha[0];
        let h = Expr::momentum("α·k", move |k| ax * k[0]) + Expr::position("xβ", move |r, _| d.beta * r[0]);
        let states: Vec<_> = (0..3).map(|s| random_field(grid, s)).collect();
        assert!(hermiticity_residual(&h, &states, 0.0).unwrap() <= 1e-10);
        let skew = Expr::position("ix", |r, _| Matrix4::identity() * C64::new(0.0, r[0]));
        assert!(hermiticity_residual(&skew, &states, 0.0).unwrap() > 1e-3);
    }

    #[test]
    fn parity_propagation() {
        let d = dirac();
        let (a, b, s) = (d.alpha[0], d.beta, d.sigma[2]);
        let odd = Expr::momentum("α_x k", move |k| a * k[0]);
        let even = Expr::position("βx", move |r, _| b * r[0]) + Expr::Const(s);
        assert_eq!(odd.parity(1e-12), LeafParity::Odd);
        assert_eq!(even.parity(1e-12), LeafParity::Even);
        assert_eq!((odd.clone() * odd.clone()).parity(1e-12), LeafParity::Even);
        assert_eq!(Expr::commutator(even.clone(), odd.clone()).parity(1e-12), LeafParity::Odd);
        assert_eq!((even + odd).parity(1e-12), LeafParity::Mixed);
    }
}
