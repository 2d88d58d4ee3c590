//! Sampling-based verification of symmetries and constants of motion.
//!
//! Bundle maps are fibre-linear: a finite candidate is `(φ, Φ)` acting as
//! `(x, w) ↦ (φ(x), Φ(x)w)`, an infinitesimal one is `(V, Λ)` generating
//! `(x, w) ↦ (V(x), Λ(x)w)`. When no fibre action is given, the Jacobian of
//! the base map (or field) is used, which requires `k = n`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::expr::{ExpressionField, Shape};
use crate::linalg::{rank, span_residual, Tolerances};
use crate::linsing::LinearlySingularSystem;
use crate::nonholo::GeneralizedNonholonomicSystem;

/// Residuals at or below this count as zero.
pub const SYMMETRY_TOL: f64 = 1e-8;
/// Threshold for the finite-difference bracket with the constrained field.
pub const BRACKET_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CandidateKind {
    Finite,
    Infinitesimal,
}

#[derive(Debug, Clone)]
pub struct SymmetryCandidate {
    kind: CandidateKind,
    base: ExpressionField,
    fibre: Option<ExpressionField>,
}

impl SymmetryCandidate {
    /// Base diffeomorphism `φ` with optional fibre matrix `Φ`.
    pub fn finite(map: ExpressionField, fibre: Option<ExpressionField>) -> Result<Self> {
        Self::new(CandidateKind::Finite, map, fibre)
    }

    /// Base vector field `V` with optional fibre matrix `Λ`.
    pub fn infinitesimal(field: ExpressionField, fibre: Option<ExpressionField>) -> Result<Self> {
        Self::new(CandidateKind::Infinitesimal, field, fibre)
    }

    fn new(kind: CandidateKind, base: ExpressionField, fibre: Option<ExpressionField>) -> Result<Self> {
        if base.shape() != Shape::Vector(base.nvars()) {
            return Err(Error::Shape(format!("base part must be a vector of length {}", base.nvars())));
        }
        if let Some(f) = &fibre {
            if f.vars() != base.vars() {
                return Err(Error::VariableMismatch("fibre action and base part use different variables".into()));
            }
            if !matches!(f.shape(), Shape::Matrix(r, c) if r == c) {
                return Err(Error::Shape("fibre action must be a square matrix".into()));
            }
        }
        Ok(SymmetryCandidate { kind, base, fibre })
    }

    pub fn kind(&self) -> CandidateKind {
        self.kind
    }

    pub fn base(&self) -> &ExpressionField {
        &self.base
    }

    pub fn fibre(&self) -> Option<&ExpressionField> {
        self.fibre.as_ref()
    }

    /// Fibre matrix at `x` for fibre rank `k`.
    pub fn fibre_at(&self, x: &[f64], k: usize) -> Result<DMatrix<f64>> {
        let m = match &self.fibre {
            Some(f) => f.eval_matrix(x)?,
            None => self.base.jacobian(x)?,
        };
        if m.nrows() != k {
            return Err(Error::Shape(format!("fibre action is {}×{}, fibre rank is {k}", m.nrows(), m.ncols())));
        }
        Ok(m)
    }

    fn require(&self, kind: CandidateKind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::Invalid(format!("expected a {kind:?} candidate, got {:?}", self.kind)));
        }
        Ok(())
    }

    fn check_vars(&self, sys: &LinearlySingularSystem) -> Result<()> {
        if self.base.vars() != sys.vars() {
            return Err(Error::VariableMismatch("candidate and system use different variables".into()));
        }
        Ok(())
    }
}

/// Largest residuals of the `f`- and `A`-conditions over the sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetryResiduals {
    pub r_f: f64,
    pub r_a: f64,
}

impl SymmetryResiduals {
    pub fn passes(&self, tol: f64) -> bool {
        self.r_f <= tol && self.r_a <= tol
    }
}

/// `f∘φ = Φ·f` and `A(φ(x))·Dφ(x) = Φ(x)·A(x)` at each point.
pub fn check_symmetry(
    sys: &LinearlySingularSystem,
    cand: &SymmetryCandidate,
    points: &[Vec<f64>],
    tol: &Tolerances,
) -> Result<SymmetryResiduals> {
    cand.require(CandidateKind::Finite)?;
    cand.check_vars(sys)?;
    let k = sys.k();
    let mut res = SymmetryResiduals { r_f: 0.0, r_a: 0.0 };
    for x in points {
        let y = cand.base.eval(x)?;
        let dmap = cand.base.jacobian(x)?;
        let fibre = cand.fibre_at(x, k)?;
        if rank(&dmap, tol) < dmap.ncols() || rank(&fibre, tol) < k {
            return Err(Error::NotInvertible { point: x.clone() });
        }
        let f = sys.rhs_at(x)?;
        res.r_f = res.r_f.max((sys.rhs_at(&y)? - &fibre * f).norm());
        res.r_a = res.r_a.max((sys.matrix_at(&y)? * dmap - fibre * sys.matrix_at(x)?).norm());
    }
    Ok(res)
}

/// `Df·V = Λ·f` and `D_V A + A·DV = Λ·A` at each point.
pub fn check_inf_symmetry(
    sys: &LinearlySingularSystem,
    cand: &SymmetryCandidate,
    points: &[Vec<f64>],
) -> Result<SymmetryResiduals> {
    cand.require(CandidateKind::Infinitesimal)?;
    cand.check_vars(sys)?;
    let k = sys.k();
    let mut res = SymmetryResiduals { r_f: 0.0, r_a: 0.0 };
    for x in points {
        let v = cand.base.eval(x)?;
        let dv = cand.base.jacobian(x)?;
        let lambda = cand.fibre_at(x, k)?;
        let a = sys.matrix_at(x)?;
        let df_v = sys.f().directional(x, &v)?.column(0).into_owned();
        res.r_f = res.r_f.max((df_v - &lambda * sys.rhs_at(x)?).norm());
        let dva = sys.a().directional(x, &v)?;
        res.r_a = res.r_a.max((dva + &a * dv - lambda * a).norm());
    }
    Ok(res)
}

/// Outcome of the descent test for an infinitesimal candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Descent {
    pub tangent_to_m: bool,
    pub preserves_forces: bool,
    pub descends: bool,
    /// `max |V·φᵅ|` on the sample.
    pub tangency_residual: f64,
    /// Largest distance of `D_V Δ_μ − Λ·Δ_μ` from `span Δ`.
    pub force_residual: f64,
    /// Largest `‖[V, X]‖` with the constrained field `X`, when it descends
    /// and the base system is regular.
    pub bracket_residual: Option<f64>,
}

/// Tangency of `V` to `M` and invariance of the force subbundle under the
/// flow of `(V, Λ)`; when both hold, the bracket of `V` with the constrained
/// field is measured as a coherence check.
pub fn check_descent(
    gnh: &GeneralizedNonholonomicSystem,
    cand: &SymmetryCandidate,
    points_on_m: &[Vec<f64>],
) -> Result<Descent> {
    cand.require(CandidateKind::Infinitesimal)?;
    cand.check_vars(gnh.base())?;
    let k = gnh.base().k();
    let tol = *gnh.tolerances();
    let mut tangency_residual: f64 = 0.0;
    let mut force_residual: f64 = 0.0;
    for x in points_on_m {
        gnh.manifold().require_on(x)?;
        let v = cand.base.eval(x)?;
        let vdv = DVector::from_column_slice(&v);
        if gnh.manifold().count() > 0 {
            tangency_residual = tangency_residual.max((gnh.manifold().jacobian(x)? * &vdv).amax());
        }
        let lambda = cand.fibre_at(x, k)?;
        let delta = gnh.forces_at(x)?;
        for (j, col) in gnh.forces().columns().iter().enumerate() {
            let lie = col.directional(x, &v)?.column(0).into_owned() - &lambda * delta.column(j);
            force_residual = force_residual.max(span_residual(&delta, &lie, &tol));
        }
    }
    let tangent_to_m = tangency_residual <= SYMMETRY_TOL;
    let preserves_forces = force_residual <= SYMMETRY_TOL;
    let descends = tangent_to_m && preserves_forces;
    let bracket_residual = if descends {
        match constrained_bracket(gnh, cand, points_on_m) {
            Ok(r) => Some(r),
            Err(Error::BaseNotRegular { .. }) => None,
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    Ok(Descent { tangent_to_m, preserves_forces, descends, tangency_residual, force_residual, bracket_residual })
}

/// `max ‖DX·V − DV·X‖` over the points, with `DX·V` by central differences
/// of the constrained field along `V`.
pub fn constrained_bracket(
    gnh: &GeneralizedNonholonomicSystem,
    cand: &SymmetryCandidate,
    points_on_m: &[Vec<f64>],
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for x in points_on_m {
        let v = DVector::from_vec(cand.base.eval(x)?);
        let (field, _) = gnh.field_at(x)?;
        let scale = x.iter().fold(1.0f64, |m, c| m.max(c.abs()));
        let h = 1e-5 * scale / v.amax().max(1e-300);
        let xp: Vec<f64> = x.iter().zip(v.iter()).map(|(a, b)| a + h * b).collect();
        let xm: Vec<f64> = x.iter().zip(v.iter()).map(|(a, b)| a - h * b).collect();
        let dx_v = if v.amax() == 0.0 {
            DVector::zeros(x.len())
        } else {
            (gnh.field_extension(&xp)?.0 - gnh.field_extension(&xm)?.0) / (2.0 * h)
        };
        let dv_x = cand.base.jacobian(x)? * field;
        worst = worst.max((dx_v - dv_x).norm());
    }
    Ok(worst)
}

/// Outcome of the constant-of-motion test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantDescent {
    /// `Y·h = 0` at every sampled point.
    pub base_conserved: bool,
    /// `max |(Y − X)·h|` on the sample.
    pub gamma_h: f64,
    /// `X·h = 0` at every sampled point.
    pub constrained_conserved: bool,
    /// At every point where `Y·h = 0`, `X·h = 0` exactly when `(Y − X)·h = 0`.
    pub coherent: bool,
    pub max_base: f64,
    pub max_constrained: f64,
}

pub fn check_constant_descent(
    gnh: &GeneralizedNonholonomicSystem,
    h: &ExpressionField,
    points_on_m: &[Vec<f64>],
    tol: f64,
) -> Result<ConstantDescent> {
    if h.vars() != gnh.base().vars() {
        return Err(Error::VariableMismatch("function and system use different variables".into()));
    }
    let grad = |x: &[f64]| -> Result<DVector<f64>> { Ok(h.jacobian(x)?.row(0).transpose()) };
    let mut out = ConstantDescent {
        base_conserved: true,
        gamma_h: 0.0,
        constrained_conserved: true,
        coherent: true,
        max_base: 0.0,
        max_constrained: 0.0,
    };
    for x in points_on_m {
        let dh = grad(x)?;
        let y = gnh.unconstrained_field_at(x)?;
        let (field, _) = gnh.field_at(x)?;
        let yh = dh.dot(&y).abs();
        let xh = dh.dot(&field).abs();
        let gh = dh.dot(&(&y - &field)).abs();
        out.max_base = out.max_base.max(yh);
        out.max_constrained = out.max_constrained.max(xh);
        out.gamma_h = out.gamma_h.max(gh);
        if yh <= tol && (xh <= tol) != (gh <= tol) {
            out.coherent = false;
        }
    }
    out.base_conserved = out.max_base <= tol;
    out.constrained_conserved = out.max_constrained <= tol;
    Ok(out)
}
