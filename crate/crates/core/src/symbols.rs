//! Vector-valued operator expressions and the physical building blocks
//! (p, r, α, β, Σ, fields, energy factors) shared by the Hamiltonian and
//! equation-of-motion builders.
//!
//! Products are kept in the order written: in `cross(a, b)` and `dot(a, b)`
//! every a-factor stands to the left of the b-factor.

use num_complex::Complex64 as C64;

use crate::algebra::{dirac, Matrix4};
use crate::fields::FieldModel;
use crate::grid::Expr;
use crate::operators::PhysParams;
use crate::vec3;

pub type VecExpr = [Expr; 3];

pub fn dot(a: &VecExpr, b: &VecExpr) -> Expr {
    Expr::sum((0..3).map(|i| a[i].clone() * b[i].clone()))
}

/// (a × b)_i = a_j b_k − a_k b_j, (i, j, k) cyclic.
pub fn cross(a: &VecExpr, b: &VecExpr) -> VecExpr {
    [0, 1, 2].map(|i| {
        let (j, k) = vec3::cyclic(i);
        a[j].clone() * b[k].clone() - a[k].clone() * b[j].clone()
    })
}

/// s·v_i with s on the left.
pub fn left(s: &Expr, v: &VecExpr) -> VecExpr {
    [0, 1, 2].map(|i| s.clone() * v[i].clone())
}

/// v_i·s with s on the right.
pub fn right(v: &VecExpr, s: &Expr) -> VecExpr {
    [0, 1, 2].map(|i| v[i].clone() * s.clone())
}

pub fn add(a: &VecExpr, b: &VecExpr) -> VecExpr {
    [0, 1, 2].map(|i| a[i].clone() + b[i].clone())
}

pub fn sub(a: &VecExpr, b: &VecExpr) -> VecExpr {
    [0, 1, 2].map(|i| a[i].clone() - b[i].clone())
}

pub fn scale(v: &VecExpr, s: f64) -> VecExpr {
    v.clone().map(|e| e.scale_re(s))
}

pub fn scale_c(v: &VecExpr, s: C64) -> VecExpr {
    v.clone().map(|e| e.scale(s))
}

pub fn zero() -> VecExpr {
    [Expr::Zero, Expr::Zero, Expr::Zero]
}

pub fn alpha() -> VecExpr {
    dirac().alpha.map(Expr::Const)
}

pub fn sigma() -> VecExpr {
    dirac().sigma.map(Expr::Const)
}

pub fn beta() -> Expr {
    Expr::Const(dirac().beta)
}

pub fn one() -> Expr {
    Expr::identity()
}

/// 𝟙 − β.
pub fn one_minus_beta() -> Expr {
    Expr::Const(Matrix4::identity() - dirac().beta)
}

const AXES: [&str; 3] = ["x", "y", "z"];

pub fn momentum() -> VecExpr {
    [0, 1, 2].map(|i| Expr::momentum_scalar(format!("p{}", AXES[i]), move |k| k[i]))
}

pub fn position() -> VecExpr {
    [0, 1, 2].map(|i| Expr::position_scalar(AXES[i], move |r, _| r[i]))
}

/// L = r × p.
pub fn orbital() -> VecExpr {
    cross(&position(), &momentum())
}

/// E_p as a momentum-diagonal factor.
pub fn energy(params: &PhysParams) -> Expr {
    let (c, mc2) = (params.c, params.rest_energy());
    Expr::momentum_scalar("E_p", move |k| (vec3::norm(k) * c).hypot(mc2))
}

pub fn inv_energy(params: &PhysParams) -> Expr {
    let (c, mc2) = (params.c, params.rest_energy());
    Expr::momentum_scalar("1/E_p", move |k| 1.0 / (vec3::norm(k) * c).hypot(mc2))
}

/// 1/(E_p(E_p + m0c²)).
pub fn inv_w(params: &PhysParams) -> Expr {
    let (c, mc2) = (params.c, params.rest_energy());
    Expr::momentum_scalar("1/W", move |k| {
        let e = (vec3::norm(k) * c).hypot(mc2);
        1.0 / (e * (e + mc2))
    })
}

/// p² as a scalar factor.
pub fn p_squared() -> Expr {
    Expr::momentum_scalar("p²", |k| vec3::dot(k, k))
}

/// 1/p², zero at the (guarded) zero mode.
pub fn inv_p_squared() -> Expr {
    Expr::momentum_scalar_singular("1/p²", |k| 1.0 / vec3::dot(k, k))
}

/// Field quantities of a model as operator factors. Spatially uniform
/// quantities become space-agnostic factors so they never force a transform.
#[derive(Clone, Copy, Debug)]
pub struct FieldSymbols {
    pub model: FieldModel,
}

impl FieldSymbols {
    pub fn new(model: FieldModel) -> Self {
        FieldSymbols { model }
    }

    fn spatial(&self, name: &str, pick: fn(&crate::fields::FieldSample) -> [f64; 3]) -> VecExpr {
        let model = self.model;
        if matches!(model, FieldModel::Zero) {
            return zero();
        }
        [0, 1, 2].map(|i| Expr::position_scalar(format!("{name}{}", AXES[i]), move |r, t| pick(&model.sample(r, t))[i]))
    }

    fn uniform(&self, name: &str, pick: fn(&crate::fields::FieldSample) -> [f64; 3]) -> VecExpr {
        let model = self.model;
        if matches!(model, FieldModel::Zero) {
            return zero();
        }
        [0, 1, 2].map(|i| Expr::uniform_scalar(format!("{name}{}", AXES[i]), move |t| pick(&model.sample([0.0; 3], t))[i]))
    }

    fn b_is_uniform(&self) -> bool {
        matches!(self.model, FieldModel::Zero | FieldModel::UniformB { .. } | FieldModel::UniformE { .. })
    }

    pub fn a(&self) -> VecExpr {
        if matches!(self.model, FieldModel::UniformE { .. }) {
            return zero();
        }
        self.spatial("A", |s| s.a)
    }

    pub fn phi(&self) -> Expr {
        let model = self.model;
        match model {
            FieldModel::UniformE { .. } => Expr::position_scalar("φ", move |r, t| model.sample(r, t).phi),
            _ => Expr::Zero,
        }
    }

    pub fn e(&self) -> VecExpr {
        match self.model {
            FieldModel::UniformE { .. } => self.uniform("E", |s| s.e),
            FieldModel::UniformB { .. } if self.model.is_static() => zero(),
            _ => self.spatial("E", |s| s.e),
        }
    }

    pub fn b(&self) -> VecExpr {
        if matches!(self.model, FieldModel::UniformE { .. }) {
            return zero();
        }
        if self.b_is_uniform() {
            self.uniform("B", |s| s.b)
        } else {
            self.spatial("B", |s| s.b)
        }
    }

    pub fn db_dt(&self) -> VecExpr {
        if matches!(self.model, FieldModel::UniformE { .. }) || self.model.is_static() {
            return zero();
        }
        if self.b_is_uniform() {
            self.uniform("Ḃ", |s| s.db_dt)
        } else {
            self.spatial("Ḃ", |s| s.db_dt)
        }
    }

    pub fn d2b_dt2(&self) -> VecExpr {
        if matches!(self.model, FieldModel::UniformE { .. }) || self.model.is_static() {
            return zero();
        }
        if self.b_is_uniform() {
            self.uniform("B̈", |s| s.d2b_dt2)
        } else {
            self.spatial("B̈", |s| s.d2b_dt2)
        }
    }

    pub fn de_dt(&self) -> VecExpr {
        match self.model {
            FieldModel::UniformE { .. } if self.model.is_static() => zero(),
            FieldModel::UniformE { .. } => self.uniform("Ė", |s| s.de_dt),
            FieldModel::UniformB { .. } if self.model.is_static() => zero(),
            _ => self.spatial("Ė", |s| s.de_dt),
        }
    }

    /// p − eA.
    pub fn kinetic_momentum(&self, params: &PhysParams) -> VecExpr {
        sub(&momentum(), &scale(&self.a(), params.e))
    }
}
