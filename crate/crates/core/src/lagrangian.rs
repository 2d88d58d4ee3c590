//! Lagrangian systems on `TQ` in natural coordinates `(q, v)`.
//!
//! The Cartan form is `θ_L = (∂L/∂vⁱ) dqⁱ` and `ω_L = −dθ_L`. The system
//! matrix is that of `X ↦ i_X ω_L`, so in `(q; v)` ordering
//! `A_rc = ∂_r θ_c − ∂_c θ_r`, and the right-hand side is `dE_L` with
//! `E_L = vⁱ ∂L/∂vⁱ − L`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::expr::{self, Expr, ExpressionField};
use crate::linalg::{rank, solve_affine, Tolerances};
use crate::linsing::LinearlySingularSystem;
use crate::nonholo::{ForceFrame, GeneralizedNonholonomicSystem, SubmanifoldSpec};

#[derive(Debug, Clone)]
pub struct LagrangianModel {
    nq: usize,
    lagrangian: ExpressionField,
    theta: ExpressionField,
    energy: ExpressionField,
    system: LinearlySingularSystem,
}

impl LagrangianModel {
    /// `vars` lists `q¹..qⁿ` followed by `v¹..vⁿ`.
    pub fn new(vars: Arc<[String]>, lagrangian: Expr) -> Result<Self> {
        if vars.len() % 2 != 0 || vars.is_empty() {
            return Err(Error::Shape(format!("need q and v variables in equal number, got {}", vars.len())));
        }
        let nq = vars.len() / 2;
        let lagrangian = ExpressionField::scalar(vars.clone(), lagrangian)?;
        let l = lagrangian.entries()[0].clone();

        let momenta: Vec<Expr> = (0..nq).map(|i| l.derivative(nq + i)).collect();
        let mut theta = momenta.clone();
        theta.extend(std::iter::repeat(Expr::Const(0.0)).take(nq));

        let mut energy = Expr::Const(0.0);
        for (i, p) in momenta.iter().enumerate() {
            energy = expr::add(energy, expr::mul(Expr::Var(nq + i), p.clone()));
        }
        let energy = expr::sub(energy, l);

        let dim = 2 * nq;
        let mut entries = Vec::with_capacity(dim * dim);
        for r in 0..dim {
            for c in 0..dim {
                entries.push(if r == c {
                    Expr::Const(0.0)
                } else {
                    expr::sub(theta[c].derivative(r), theta[r].derivative(c))
                });
            }
        }
        let a = ExpressionField::matrix(vars.clone(), dim, dim, entries)?;
        let energy = ExpressionField::scalar(vars.clone(), energy)?;
        let f = energy.gradient_field()?;
        let theta = ExpressionField::vector(vars, theta)?;
        let system = LinearlySingularSystem::new(a, f)?;
        Ok(LagrangianModel { nq, lagrangian, theta, energy, system })
    }

    pub fn parse(q: &[&str], v: &[&str], text: &str) -> Result<Self> {
        if q.len() != v.len() {
            return Err(Error::Shape("q and v lists differ in length".into()));
        }
        let vars: Arc<[String]> = q.iter().chain(v).map(|s| s.to_string()).collect();
        let l = expr::parse(text, &vars)?;
        Self::new(vars, l)
    }

    pub fn nq(&self) -> usize {
        self.nq
    }

    pub fn vars(&self) -> &Arc<[String]> {
        self.lagrangian.vars()
    }

    pub fn lagrangian(&self) -> &ExpressionField {
        &self.lagrangian
    }

    /// Components of `θ_L` in `(dq; dv)` ordering.
    pub fn theta(&self) -> &ExpressionField {
        &self.theta
    }

    pub fn energy(&self) -> &ExpressionField {
        &self.energy
    }

    /// The system `(ω̂_L, dE_L)`.
    pub fn system(&self) -> &LinearlySingularSystem {
        &self.system
    }

    /// `∂²L/∂vⁱ∂vʲ` at `x`.
    pub fn velocity_hessian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let n = self.nq;
        let mut h = DMatrix::zeros(n, n);
        for i in 0..n {
            let di = self.lagrangian.partial(n + i);
            for j in 0..n {
                h[(i, j)] = di.partial(n + j).eval_scalar(x)?;
            }
        }
        Ok(h)
    }

    /// Velocity part of the constraint Jacobian, `∂φ/∂v`.
    fn velocity_jacobian(&self, phi: &SubmanifoldSpec, x: &[f64]) -> Result<DMatrix<f64>> {
        let jac = phi.jacobian(x)?;
        Ok(jac.columns(self.nq, self.nq).into_owned())
    }
}

/// Builds the model and returns its linearly singular system.
pub fn build_lagrangian_system(model: &LagrangianModel) -> &LinearlySingularSystem {
    model.system()
}

/// Ranks of the velocity Hessian and of `ω̂_L` at one point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Regularity {
    pub hessian_rank: usize,
    pub omega_rank: usize,
    pub regular: bool,
    /// Whether the two criteria agree (`rank ω̂_L = 2n` iff the Hessian is invertible).
    pub consistent: bool,
}

pub fn regularity_of_l(model: &LagrangianModel, points: &[Vec<f64>], tol: &Tolerances) -> Result<Vec<Regularity>> {
    let n = model.nq();
    points
        .iter()
        .map(|x| {
            let hessian_rank = rank(&model.velocity_hessian(x)?, tol);
            let omega_rank = rank(&model.system().matrix_at(x)?, tol);
            let regular = hessian_rank == n;
            Ok(Regularity { hessian_rank, omega_rank, regular, consistent: regular == (omega_rank == 2 * n) })
        })
        .collect()
}

/// Chetaev frame `Δⁱ = ᵗJ dφⁱ = (∂φⁱ/∂vʲ) dqʲ`, checking at each point that
/// `∂φ/∂v` has maximal rank.
pub fn chetaev_frame(model: &LagrangianModel, phi: &SubmanifoldSpec, points: &[Vec<f64>]) -> Result<ForceFrame> {
    let n = model.nq();
    if phi.phi().vars() != model.vars() {
        return Err(Error::VariableMismatch("constraints and lagrangian use different variables".into()));
    }
    for x in points {
        let jv = model.velocity_jacobian(phi, x)?;
        if rank(&jv, &Tolerances::default()) < phi.count() {
            return Err(Error::MaxRankViolated { point: x.clone() });
        }
    }
    let columns = phi
        .phi()
        .entries()
        .iter()
        .map(|e| {
            let mut comps: Vec<Expr> = (0..n).map(|j| e.derivative(n + j)).collect();
            comps.extend(std::iter::repeat(Expr::Const(0.0)).take(n));
            if points.is_empty() && comps.iter().all(Expr::is_zero) {
                return Err(Error::MaxRankViolated { point: Vec::new() });
            }
            ExpressionField::vector(model.vars().clone(), comps)
        })
        .collect::<Result<Vec<_>>>()?;
    ForceFrame::new(columns)
}

/// The nonholonomic system of `L` on `{φ = 0}` with Chetaev forces.
pub fn nonholonomic_lagrangian(
    model: &LagrangianModel,
    phi: SubmanifoldSpec,
    points: &[Vec<f64>],
) -> Result<GeneralizedNonholonomicSystem> {
    let frame = chetaev_frame(model, &phi, points)?;
    GeneralizedNonholonomicSystem::new(model.system().clone(), phi, frame)
}

/// Field obtained from `i_X ω_L = dE_L + uᵢΔⁱ`, `dφ·X = 0` and the second
/// order condition `Xq = v`, solved jointly for `(X, u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SodeSolution {
    pub field: DVector<f64>,
    pub multipliers: DVector<f64>,
    /// `X` is determined uniquely (the multipliers may still have a kernel).
    pub unique: bool,
    pub residual: f64,
}

/// Kernel directions whose field part is below this are pure multiplier gauge.
const KERNEL_TOL: f64 = 1e-8;

pub fn sode_solve_at(
    model: &LagrangianModel,
    phi: &SubmanifoldSpec,
    forces: &ForceFrame,
    x: &[f64],
    tol: &Tolerances,
) -> Result<SodeSolution> {
    phi.require_on(x)?;
    sode_solve_near(model, phi, forces, x, tol)
}

/// [`sode_solve_at`] without the on-`M` check, for points near `M` such as
/// intermediate integrator stages.
pub fn sode_solve_near(
    model: &LagrangianModel,
    phi: &SubmanifoldSpec,
    forces: &ForceFrame,
    x: &[f64],
    tol: &Tolerances,
) -> Result<SodeSolution> {
    let n = model.nq();
    let dim = 2 * n;
    let a = model.system().matrix_at(x)?;
    let f = model.system().rhs_at(x)?;
    let delta = forces.at(x, dim)?;
    let dphi = phi.jacobian(x)?;
    let m = delta.ncols();
    let a0 = dphi.nrows();

    let rows = dim + a0 + n;
    let mut big = DMatrix::zeros(rows, dim + m);
    let mut rhs = DVector::zeros(rows);
    big.view_mut((0, 0), (dim, dim)).copy_from(&a);
    big.view_mut((0, dim), (dim, m)).copy_from(&(-&delta));
    rhs.rows_mut(0, dim).copy_from(&f);
    big.view_mut((dim, 0), (a0, dim)).copy_from(&dphi);
    for i in 0..n {
        big[(dim + a0 + i, i)] = 1.0;
        rhs[dim + a0 + i] = x[n + i];
    }

    let set = solve_affine(&big, &rhs, tol)?;
    if !set.is_consistent() {
        return Err(Error::Inconsistent { residual: set.residual });
    }
    let kernel_x = set.kernel.matrix().rows(0, dim).into_owned();
    let unique = kernel_x.ncols() == 0 || kernel_x.amax() <= KERNEL_TOL;
    Ok(SodeSolution {
        field: set.particular.rows(0, dim).into_owned(),
        multipliers: set.particular.rows(dim, m).into_owned(),
        unique,
        residual: set.residual,
    })
}
