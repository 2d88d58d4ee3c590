//! Linearly singular systems `A(x)·ẋ = f(x)` and their pointwise
//! consistency analysis.

use std::sync::Arc;

use log::warn;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::expr::{ExpressionField, Shape};
use crate::linalg::{cokernel_basis, pseudo_inverse, rank, rank_scaled, solve_affine, AffineSolutionSet, Tolerances};

/// Relative rank tolerance for rows obtained by finite differences.
pub const FD_RANK_REL: f64 = 1e-6;

/// `A: k×n` matrix field and `f: k` vector field over a common chart.
#[derive(Debug, Clone)]
pub struct LinearlySingularSystem {
    a: ExpressionField,
    f: ExpressionField,
}

/// Result of testing `f(x) ∈ Im A(x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Consistency {
    pub consistent: bool,
    pub residual: f64,
    pub threshold: f64,
}

impl LinearlySingularSystem {
    pub fn new(a: ExpressionField, f: ExpressionField) -> Result<Self> {
        if a.vars() != f.vars() {
            return Err(Error::VariableMismatch("A and f must be defined over the same variables".into()));
        }
        let Shape::Matrix(k, _) = a.shape() else {
            return Err(Error::Shape("A must be a matrix field".into()));
        };
        let fk = match f.shape() {
            Shape::Vector(r) => r,
            Shape::Scalar => 1,
            Shape::Matrix(..) => return Err(Error::Shape("f must be a vector field".into())),
        };
        if fk != k {
            return Err(Error::Shape(format!("A has {k} rows but f has {fk} entries")));
        }
        Ok(LinearlySingularSystem { a, f })
    }

    /// The explicit system `ẋ = f(x)`.
    pub fn explicit(f: ExpressionField) -> Result<Self> {
        let a = ExpressionField::identity(f.vars().clone(), f.len());
        Self::new(a, f)
    }

    pub fn vars(&self) -> &Arc<[String]> {
        self.a.vars()
    }

    /// Base dimension.
    pub fn n(&self) -> usize {
        self.a.dims().1
    }

    /// Fibre rank.
    pub fn k(&self) -> usize {
        self.a.dims().0
    }

    pub fn a(&self) -> &ExpressionField {
        &self.a
    }

    pub fn f(&self) -> &ExpressionField {
        &self.f
    }

    pub fn matrix_at(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.a.eval_matrix(x)
    }

    pub fn rhs_at(&self, x: &[f64]) -> Result<DVector<f64>> {
        self.f.eval_vector(x)
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n() {
            return Err(Error::Shape(format!("point has {} coordinates, expected {}", x.len(), self.n())));
        }
        Ok(())
    }

    pub fn consistency_at(&self, x: &[f64], tol: &Tolerances) -> Result<Consistency> {
        let set = self.solve_at(x, None, tol)?;
        Ok(Consistency { consistent: set.is_consistent(), residual: set.residual, threshold: set.threshold })
    }

    /// Pairings `⟨w, f(x)⟩` for an orthonormal cokernel basis `w` of `A(x)`;
    /// they all vanish exactly where the equation is consistent.
    pub fn primary_constraint_values(&self, x: &[f64], tol: &Tolerances) -> Result<DVector<f64>> {
        self.check_point(x)?;
        let a = self.matrix_at(x)?;
        let f = self.rhs_at(x)?;
        Ok(cokernel_basis(&a, tol).matrix().transpose() * f)
    }

    /// Solution set of `[A(x); C]·v = [f(x); d]`.
    pub fn solve_at(
        &self,
        x: &[f64],
        extra_rows: Option<(&DMatrix<f64>, &DVector<f64>)>,
        tol: &Tolerances,
    ) -> Result<AffineSolutionSet> {
        self.check_point(x)?;
        let a = self.matrix_at(x)?;
        let f = self.rhs_at(x)?;
        match extra_rows {
            None => solve_affine(&a, &f, tol),
            Some((c, d)) => {
                if c.ncols() != self.n() || c.nrows() != d.len() {
                    return Err(Error::Shape("extra rows do not match the system".into()));
                }
                let (stacked, rhs) = stack(&a, &f, c, d);
                solve_affine(&stacked, &rhs, tol)
            }
        }
    }

    /// Runs the constraint algorithm pointwise at each seed.
    pub fn constraint_algorithm_sample(
        &self,
        seeds: &[Vec<f64>],
        max_levels: usize,
        tol: &Tolerances,
    ) -> Result<ConstraintStack> {
        ConstraintAlgorithm::new(self, *tol).run(seeds, max_levels)
    }
}

pub(crate) fn stack(
    a: &DMatrix<f64>,
    f: &DVector<f64>,
    c: &DMatrix<f64>,
    d: &DVector<f64>,
) -> (DMatrix<f64>, DVector<f64>) {
    let (k, n) = a.shape();
    let mut m = DMatrix::zeros(k + c.nrows(), n);
    m.rows_mut(0, k).copy_from(a);
    m.rows_mut(k, c.nrows()).copy_from(c);
    let mut r = DVector::zeros(k + d.len());
    r.rows_mut(0, k).copy_from(f);
    r.rows_mut(k, d.len()).copy_from(d);
    (m, r)
}

/// How a seed fared in the constraint algorithm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SeedOutcome {
    /// Violates a constraint generated at `level`.
    Fails { level: usize, residual: f64 },
    /// Satisfies every constraint and no new ones appear past `level`.
    Survives { level: usize },
    /// `max_levels` reached while new constraints were still appearing.
    Unresolved,
}

/// Summary of one level of the recursion.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintLevel {
    pub level: usize,
    /// Independent constraints first appearing at this level (max over seeds).
    pub new_constraints: usize,
    /// Where the level's constraints come from.
    pub provenance: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintStack {
    pub levels: Vec<ConstraintLevel>,
    pub outcomes: Vec<SeedOutcome>,
    pub warnings: Vec<String>,
    pub converged: bool,
}

impl ConstraintStack {
    /// Total number of independent constraints found.
    pub fn constraint_count(&self) -> usize {
        self.levels.iter().map(|l| l.new_constraints).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.constraint_count() == 0
    }
}

/// Pointwise realization of the recursion `M₁ ⊃ M₂ ⊃ …`.
///
/// Level `j` works with the stacked system `[A; Π₀; …; Π_{j−1}]·v = [f; 0; …]`
/// where `Πₗ` projects onto the span of the level-`l` constraint gradients,
/// so `Πₗ·v = 0` is the tangency condition. The level-`j` constraints are
/// the least-squares residual of that system; its gradient at a consistent
/// point is `(I − M M⁺)(∂r − ∂M·x₀)`. Level 0 uses exact derivatives of `A`
/// and `f`; the projector blocks are differentiated by central differences.
pub struct ConstraintAlgorithm<'a> {
    sys: &'a LinearlySingularSystem,
    tol: Tolerances,
    fd_tol: Tolerances,
}

impl<'a> ConstraintAlgorithm<'a> {
    pub fn new(sys: &'a LinearlySingularSystem, tol: Tolerances) -> Self {
        let fd_tol = Tolerances { rank_rel: tol.rank_rel.max(FD_RANK_REL), img_rel: tol.img_rel.max(FD_RANK_REL) };
        ConstraintAlgorithm { sys, tol, fd_tol }
    }

    fn tol_for(&self, level: usize) -> &Tolerances {
        if level == 0 {
            &self.tol
        } else {
            &self.fd_tol
        }
    }

    /// Stacked matrix and right-hand side of level `level` at `x`.
    fn stacked(&self, x: &[f64], level: usize) -> Result<(DMatrix<f64>, DVector<f64>)> {
        let mut m = self.sys.matrix_at(x)?;
        let mut r = self.sys.rhs_at(x)?;
        for l in 0..level {
            let pi = self.gradient_projector(x, l)?;
            let zeros = DVector::zeros(pi.nrows());
            let (m2, r2) = stack(&m, &r, &pi, &zeros);
            m = m2;
            r = r2;
        }
        Ok((m, r))
    }

    fn gradient_projector(&self, x: &[f64], level: usize) -> Result<DMatrix<f64>> {
        let j = self.gradient(x, level)?;
        Ok(pseudo_inverse(&j, self.tol_for(level)) * j)
    }

    /// Residual vector of the level-`level` system: the constraint values.
    pub fn constraint_values(&self, x: &[f64], level: usize) -> Result<DVector<f64>> {
        let (m, r) = self.stacked(x, level)?;
        let x0 = pseudo_inverse(&m, self.tol_for(level)) * &r;
        Ok(r - m * x0)
    }

    /// Jacobian of the level-`level` constraint values (valid on their zero set).
    pub fn gradient(&self, x: &[f64], level: usize) -> Result<DMatrix<f64>> {
        self.gradient_scaled(x, level).map(|(jac, _)| jac)
    }

    /// The gradient together with the scale against which its rank is
    /// judged: the norms of the stacked matrix and of the unprojected factor.
    fn gradient_scaled(&self, x: &[f64], level: usize) -> Result<(DMatrix<f64>, f64)> {
        let n = self.sys.n();
        let k = self.sys.k();
        let (m, r) = self.stacked(x, level)?;
        let tol = self.tol_for(level);
        let pinv = pseudo_inverse(&m, tol);
        let x0 = &pinv * &r;
        let coker = DMatrix::identity(m.nrows(), m.nrows()) - &m * &pinv;
        let mut jac = DMatrix::zeros(m.nrows(), n);
        let mut scale = m.norm();
        for i in 0..n {
            let mut dm = DMatrix::zeros(m.nrows(), n);
            let mut dr = DVector::zeros(m.nrows());
            dm.rows_mut(0, k).copy_from(&self.sys.a.partial(i).eval_matrix(x)?);
            dr.rows_mut(0, k).copy_from(&self.sys.f.partial(i).eval_vector(x)?);
            if level > 0 {
                let h = 1e-5 * x[i].abs().max(1.0);
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[i] += h;
                xm[i] -= h;
                for l in 0..level {
                    let d = (self.gradient_projector(&xp, l)? - self.gradient_projector(&xm, l)?) / (2.0 * h);
                    dm.rows_mut(k + l * n, n).copy_from(&d);
                }
            }
            let raw = dr - dm * &x0;
            scale = scale.hypot(raw.norm());
            jac.set_column(i, &(&coker * raw));
        }
        Ok((jac, scale))
    }

    pub fn run(&self, seeds: &[Vec<f64>], max_levels: usize) -> Result<ConstraintStack> {
        let n = self.sys.n();
        let mut levels: Vec<ConstraintLevel> = Vec::new();
        let mut outcomes = Vec::with_capacity(seeds.len());
        let mut warnings = Vec::new();
        // ranks[level] collects the stacked-matrix rank seen at each seed.
        let mut ranks: Vec<Vec<usize>> = Vec::new();
        let mut converged = true;

        for seed in seeds {
            if seed.len() != n {
                return Err(Error::Shape(format!("seed has {} coordinates, expected {n}", seed.len())));
            }
            let mut gradients = DMatrix::<f64>::zeros(0, n);
            let mut prev_rank = 0;
            let mut scale: f64 = 0.0;
            let mut outcome = SeedOutcome::Unresolved;
            for level in 0..=max_levels {
                let tol = *self.tol_for(level);
                let (m, r) = self.stacked(seed, level)?;
                let set = solve_affine(&m, &r, &tol)?;
                if ranks.len() <= level {
                    ranks.push(Vec::new());
                }
                ranks[level].push(rank(&m, &tol));
                if !set.is_consistent() {
                    outcome = SeedOutcome::Fails { level, residual: set.residual };
                    break;
                }
                if level == max_levels {
                    break;
                }
                let (jac, jac_scale) = self.gradient_scaled(seed, level)?;
                scale = scale.max(jac_scale);
                gradients = gradients.clone().resize_vertically(gradients.nrows() + jac.nrows(), 0.0);
                let rows = gradients.nrows();
                gradients.rows_mut(rows - jac.nrows(), jac.nrows()).copy_from(&jac);
                let total = rank_scaled(&gradients, scale, &tol);
                let new = total.saturating_sub(prev_rank);
                if levels.len() <= level {
                    levels.push(ConstraintLevel {
                        level,
                        new_constraints: 0,
                        provenance: if level == 0 {
                            "cokernel of A paired with f".to_string()
                        } else {
                            format!("tangency to the level-{} constraints", level - 1)
                        },
                    });
                }
                levels[level].new_constraints = levels[level].new_constraints.max(new);
                if new == 0 {
                    outcome = SeedOutcome::Survives { level };
                    break;
                }
                prev_rank = total;
            }
            if outcome == SeedOutcome::Unresolved {
                converged = false;
            }
            outcomes.push(outcome);
        }

        for (level, seen) in ranks.iter().enumerate() {
            if seen.iter().any(|&r| r != seen[0]) {
                let msg = format!("rank of the level-{level} system varies across seeds: {seen:?}");
                warn!("{msg}");
                warnings.push(msg);
            }
        }
        while levels.last().is_some_and(|l| l.new_constraints == 0) {
            levels.pop();
        }
        Ok(ConstraintStack { levels, outcomes, warnings, converged })
    }
}
