//! Generalized nonholonomic systems: a regular base system `B(x)·ẋ = g(x)`
//! restricted to `M = {φ = 0}` with reaction forces in the span of a frame
//! `Δ`.
//!
//! The quotient bundle is never formed. With `Γ = B⁻¹Δ` the equations of
//! motion reduce to the multiplier system `D·u = −dφ·Y`, `D = dφ·Γ`, and the
//! constrained field is `X = Y + Γ·u`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::expr::ExpressionField;
use crate::linalg::{
    classify_pairing, complement_projectors, kernel_basis, rank, solve_affine_scaled, span_residual, SubspaceBasis,
    Tolerances,
};
use crate::linsing::LinearlySingularSystem;

/// Points with `‖φ‖∞` at or below this are accepted as lying on `M`.
pub const ON_MANIFOLD_TOL: f64 = 1e-8;
/// Target of the Gauss–Newton projection.
pub const PROJECTION_TOL: f64 = 1e-10;
pub const PROJECTION_MAX_ITER: usize = 20;

/// The submanifold `{φ = 0}` given by `a∘` constraint functions.
#[derive(Debug, Clone)]
pub struct SubmanifoldSpec {
    phi: ExpressionField,
}

impl SubmanifoldSpec {
    pub fn new(phi: ExpressionField) -> Result<Self> {
        if matches!(phi.shape(), crate::expr::Shape::Matrix(..)) {
            return Err(Error::Shape("constraints must be a vector of scalars".into()));
        }
        Ok(SubmanifoldSpec { phi })
    }

    /// No constraints: `M` is the whole chart.
    pub fn whole(vars: std::sync::Arc<[String]>) -> Self {
        SubmanifoldSpec { phi: ExpressionField::vector(vars, Vec::new()).expect("empty vector") }
    }

    pub fn phi(&self) -> &ExpressionField {
        &self.phi
    }

    /// Number of constraints `a∘`.
    pub fn count(&self) -> usize {
        self.phi.len()
    }

    pub fn values(&self, x: &[f64]) -> Result<DVector<f64>> {
        self.phi.eval_vector(x)
    }

    /// `a∘ × n` Jacobian `dφ`.
    pub fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        if self.count() == 0 {
            return Ok(DMatrix::zeros(0, x.len()));
        }
        self.phi.jacobian(x)
    }

    pub fn violation(&self, x: &[f64]) -> Result<f64> {
        Ok(self.values(x)?.amax())
    }

    pub fn require_on(&self, x: &[f64]) -> Result<()> {
        let violation = self.violation(x)?;
        if violation > ON_MANIFOLD_TOL {
            return Err(Error::NotOnManifold { violation });
        }
        Ok(())
    }

    /// Whether `dφ(x)` has full row rank.
    pub fn is_independent_at(&self, x: &[f64], tol: &Tolerances) -> Result<bool> {
        Ok(rank(&self.jacobian(x)?, tol) == self.count())
    }

    /// Gauss–Newton projection onto `M`, moving only coordinates flagged in
    /// `free` (all of them when `None`).
    pub fn project(&self, x: &[f64], free: Option<&[bool]>, tol: &Tolerances) -> Result<Vec<f64>> {
        let n = x.len();
        let cols: Vec<usize> = match free {
            Some(mask) if mask.len() != n => return Err(Error::Shape("free-coordinate mask has wrong length".into())),
            Some(mask) => (0..n).filter(|&i| mask[i]).collect(),
            None => (0..n).collect(),
        };
        let mut y = x.to_vec();
        for _ in 0..=PROJECTION_MAX_ITER {
            let phi = self.values(&y)?;
            if phi.amax() <= PROJECTION_TOL {
                return Ok(y);
            }
            let jac = self.jacobian(&y)?.select_columns(&cols);
            let step = crate::linalg::pseudo_inverse(&jac, tol) * phi;
            if step.amax() == 0.0 {
                break;
            }
            for (k, &i) in cols.iter().enumerate() {
                y[i] -= step[k];
            }
        }
        let violation = self.violation(&y)?;
        if violation <= ON_MANIFOLD_TOL {
            Ok(y)
        } else {
            Err(Error::NotOnManifold { violation })
        }
    }
}

/// Frame `Δ₁..Δ_{m∘}` of the constraint-force subbundle, as fibre vectors.
#[derive(Debug, Clone)]
pub struct ForceFrame {
    columns: Vec<ExpressionField>,
}

impl ForceFrame {
    pub fn new(columns: Vec<ExpressionField>) -> Result<Self> {
        if let Some(first) = columns.first() {
            if columns.iter().any(|c| c.vars() != first.vars()) {
                return Err(Error::VariableMismatch("force frame sections over different variables".into()));
            }
            if columns.iter().any(|c| c.len() != first.len() || matches!(c.shape(), crate::expr::Shape::Matrix(..)))
            {
                return Err(Error::Shape("force frame sections must be vectors of equal length".into()));
            }
        }
        Ok(ForceFrame { columns })
    }

    pub fn columns(&self) -> &[ExpressionField] {
        &self.columns
    }

    /// Number of sections `m∘`.
    pub fn count(&self) -> usize {
        self.columns.len()
    }

    /// `k × m∘` matrix of the frame at `x`.
    pub fn at(&self, x: &[f64], k: usize) -> Result<DMatrix<f64>> {
        let mut m = DMatrix::zeros(k, self.columns.len());
        for (j, c) in self.columns.iter().enumerate() {
            m.set_column(j, &c.eval_vector(x)?);
        }
        Ok(m)
    }
}

/// Regularity flags of a generalized nonholonomic system at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub surjective: bool,
    pub injective: bool,
    pub regular: bool,
    pub d: DMatrix<f64>,
    pub rank_d: usize,
}

/// Solution of `D·u = −dφ·Y`.
#[derive(Debug, Clone, PartialEq)]
pub struct Multipliers {
    pub u: DVector<f64>,
    /// Set when `D` has a kernel and `u` is the minimum-norm choice.
    pub gauge: bool,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct GeneralizedNonholonomicSystem {
    base: LinearlySingularSystem,
    manifold: SubmanifoldSpec,
    forces: ForceFrame,
    tol: Tolerances,
}

impl GeneralizedNonholonomicSystem {
    pub fn new(base: LinearlySingularSystem, manifold: SubmanifoldSpec, forces: ForceFrame) -> Result<Self> {
        if manifold.phi().vars() != base.vars() {
            return Err(Error::VariableMismatch("constraints and base system use different variables".into()));
        }
        if let Some(c) = forces.columns().first() {
            if c.vars() != base.vars() {
                return Err(Error::VariableMismatch("force frame and base system use different variables".into()));
            }
            if c.len() != base.k() {
                return Err(Error::Shape(format!("force sections have {} entries, fibre rank is {}", c.len(), base.k())));
            }
        }
        Ok(GeneralizedNonholonomicSystem { base, manifold, forces, tol: Tolerances::default() })
    }

    pub fn with_tolerances(mut self, tol: Tolerances) -> Self {
        self.tol = tol;
        self
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tol
    }

    pub fn base(&self) -> &LinearlySingularSystem {
        &self.base
    }

    pub fn manifold(&self) -> &SubmanifoldSpec {
        &self.manifold
    }

    pub fn forces(&self) -> &ForceFrame {
        &self.forces
    }

    pub fn n(&self) -> usize {
        self.base.n()
    }

    pub fn forces_at(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.forces.at(x, self.base.k())
    }

    fn regular_base(&self, x: &[f64]) -> Result<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>> {
        let b = self.base.matrix_at(x)?;
        let n = self.n();
        let r = rank(&b, &self.tol);
        if b.nrows() != n || r < n {
            return Err(Error::BaseNotRegular { rank: r, dim: n });
        }
        Ok(b.lu())
    }

    /// Free field `Y = B⁻¹g` of the base system.
    pub fn unconstrained_field_at(&self, x: &[f64]) -> Result<DVector<f64>> {
        let lu = self.regular_base(x)?;
        let g = self.base.rhs_at(x)?;
        lu.solve(&g).ok_or(Error::BaseNotRegular { rank: 0, dim: self.n() })
    }

    /// `Γ = B⁻¹Δ`, a frame of `H = B⁻¹(G′)`.
    pub fn h_frame_at(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.manifold.require_on(x)?;
        self.h_frame_unchecked(x)
    }

    fn h_frame_unchecked(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let lu = self.regular_base(x)?;
        let delta = self.forces_at(x)?;
        let gamma = lu.solve(&delta).ok_or(Error::BaseNotRegular { rank: 0, dim: self.n() })?;
        let r = rank(&gamma, &self.tol);
        if r < self.forces.count() {
            return Err(Error::FrameDegenerate { rank: r, count: self.forces.count() });
        }
        Ok(gamma)
    }

    /// `Dᵅ_μ = dφᵅ·Γ_μ`.
    pub fn d_matrix_at(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let gamma = self.h_frame_at(x)?;
        Ok(self.manifold.jacobian(x)? * gamma)
    }

    pub fn classify_at(&self, x: &[f64]) -> Result<Classification> {
        let gamma = self.h_frame_at(x)?;
        let dphi = self.manifold.jacobian(x)?;
        let scale = dphi.norm() * gamma.norm();
        let c = classify_pairing(dphi * gamma, scale, &self.tol);
        let square = c.d.nrows() == c.d.ncols();
        Ok(Classification {
            surjective: c.sum_full,
            injective: c.intersection_zero,
            regular: c.direct_sum && square,
            d: c.d,
            rank_d: c.rank_d,
        })
    }

    /// Solves `D·u = −dφ·Y` at a point of `M`.
    pub fn multipliers_at(&self, x: &[f64], y: &DVector<f64>) -> Result<Multipliers> {
        self.manifold.require_on(x)?;
        self.multipliers_unchecked(x, y).map(|(m, _)| m)
    }

    fn multipliers_unchecked(&self, x: &[f64], y: &DVector<f64>) -> Result<(Multipliers, DMatrix<f64>)> {
        if y.len() != self.n() {
            return Err(Error::Shape(format!("vector has {} components, expected {}", y.len(), self.n())));
        }
        let gamma = self.h_frame_unchecked(x)?;
        let dphi = self.manifold.jacobian(x)?;
        let d = &dphi * &gamma;
        let rhs = -(&dphi * y);
        let set = solve_affine_scaled(&d, &rhs, dphi.norm() * gamma.norm(), &self.tol)?;
        if !set.is_consistent() {
            return Err(Error::Inconsistent { residual: set.residual });
        }
        let gauge = !set.is_unique();
        Ok((Multipliers { u: set.particular, gauge, residual: set.residual }, gamma))
    }

    /// `X = Y + Γ·u`.
    pub fn constrained_field_at(&self, x: &[f64], y: &DVector<f64>) -> Result<DVector<f64>> {
        self.manifold.require_on(x)?;
        let (m, gamma) = self.multipliers_unchecked(x, y)?;
        Ok(y + gamma * m.u)
    }

    /// Constrained field and multipliers for `Y = B⁻¹g` at a point of `M`.
    pub fn field_at(&self, x: &[f64]) -> Result<(DVector<f64>, DVector<f64>)> {
        self.manifold.require_on(x)?;
        self.field_extension(x)
    }

    /// The same formula as [`field_at`](Self::field_at) without the on-`M`
    /// check; it extends the constrained field to a neighbourhood of `M`.
    pub fn field_extension(&self, x: &[f64]) -> Result<(DVector<f64>, DVector<f64>)> {
        let y = self.unconstrained_field_at(x)?;
        let (m, gamma) = self.multipliers_unchecked(x, &y)?;
        Ok((&y + gamma * &m.u, m.u))
    }

    /// Projectors onto `T_xM = ker dφ` along `H_x = span Γ` and back.
    pub fn projectors_at(&self, x: &[f64]) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let gamma = self.h_frame_at(x)?;
        let tangent = kernel_basis(&self.manifold.jacobian(x)?, &self.tol);
        let h = SubspaceBasis::new(gamma, &self.tol)?;
        complement_projectors(&tangent, &h, &self.tol)
    }

    /// Distance of `B·X − g` from the span of the force frame.
    pub fn force_residual_at(&self, x: &[f64], field: &DVector<f64>) -> Result<f64> {
        let b = self.base.matrix_at(x)?;
        let g = self.base.rhs_at(x)?;
        Ok(span_residual(&self.forces_at(x)?, &(b * field - g), &self.tol))
    }
}
