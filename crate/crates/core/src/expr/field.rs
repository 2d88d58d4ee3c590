use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector};

use super::{parse, Expr};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Scalar,
    Vector(usize),
    Matrix(usize, usize),
}

impl Shape {
    pub fn len(self) -> usize {
        match self {
            Shape::Scalar => 1,
            Shape::Vector(r) => r,
            Shape::Matrix(r, c) => r * c,
        }
    }

    pub fn is_empty(self) -> bool {
        self.len() == 0
    }
}

/// A scalar, vector or matrix of expressions over a shared variable list.
///
/// Matrix entries are stored row-major. Partial-derivative fields are built
/// lazily and cached, so repeated Jacobian evaluation does not re-differentiate.
#[derive(Debug, Clone)]
pub struct ExpressionField {
    vars: Arc<[String]>,
    shape: Shape,
    entries: Vec<Expr>,
    partials: OnceLock<Vec<ExpressionField>>,
}

impl PartialEq for ExpressionField {
    fn eq(&self, other: &Self) -> bool {
        self.vars == other.vars && self.shape == other.shape && self.entries == other.entries
    }
}

impl ExpressionField {
    pub fn new(vars: Arc<[String]>, shape: Shape, entries: Vec<Expr>) -> Result<Self> {
        if entries.len() != shape.len() {
            return Err(Error::Shape(format!("{:?} needs {} entries, got {}", shape, shape.len(), entries.len())));
        }
        if let Some(max) = entries.iter().filter_map(Expr::max_var).max() {
            if max >= vars.len() {
                return Err(Error::VariableMismatch(format!(
                    "entry references variable #{max} but only {} are declared",
                    vars.len()
                )));
            }
        }
        Ok(ExpressionField { vars, shape, entries, partials: OnceLock::new() })
    }

    pub fn scalar(vars: Arc<[String]>, e: Expr) -> Result<Self> {
        Self::new(vars, Shape::Scalar, vec![e])
    }

    pub fn vector(vars: Arc<[String]>, entries: Vec<Expr>) -> Result<Self> {
        let n = entries.len();
        Self::new(vars, Shape::Vector(n), entries)
    }

    pub fn matrix(vars: Arc<[String]>, rows: usize, cols: usize, entries: Vec<Expr>) -> Result<Self> {
        Self::new(vars, Shape::Matrix(rows, cols), entries)
    }

    /// Constant identity matrix.
    pub fn identity(vars: Arc<[String]>, n: usize) -> Self {
        let entries = (0..n * n).map(|k| Expr::Const(if k / n == k % n { 1.0 } else { 0.0 })).collect();
        Self::new(vars, Shape::Matrix(n, n), entries).expect("identity is well-formed")
    }

    pub fn zeros(vars: Arc<[String]>, shape: Shape) -> Self {
        Self::new(vars, shape, vec![Expr::Const(0.0); shape.len()]).expect("zeros are well-formed")
    }

    pub fn parse_scalar(text: &str, vars: Arc<[String]>) -> Result<Self> {
        let e = parse(text, &vars)?;
        Self::scalar(vars, e)
    }

    pub fn parse_vector(texts: &[&str], vars: Arc<[String]>) -> Result<Self> {
        let entries = texts.iter().map(|t| parse(t, &vars)).collect::<Result<Vec<_>, _>>()?;
        Self::vector(vars, entries)
    }

    pub fn parse_matrix(rows: &[Vec<&str>], vars: Arc<[String]>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Shape("matrix rows have different lengths".into()));
        }
        let entries = rows.iter().flatten().map(|t| parse(t, &vars)).collect::<Result<Vec<_>, _>>()?;
        Self::matrix(vars, r, c, entries)
    }

    pub fn vars(&self) -> &Arc<[String]> {
        &self.vars
    }

    pub fn nvars(&self) -> usize {
        self.vars.len()
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn entries(&self) -> &[Expr] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Rows and columns; a vector is a column, a scalar is 1×1.
    pub fn dims(&self) -> (usize, usize) {
        match self.shape {
            Shape::Scalar => (1, 1),
            Shape::Vector(r) => (r, 1),
            Shape::Matrix(r, c) => (r, c),
        }
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.vars.len() {
            return Err(Error::Shape(format!("point has {} coordinates, expected {}", x.len(), self.vars.len())));
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        self.entries
            .iter()
            .map(|e| e.eval(x).map_err(|err| Error::Eval(err.describe(&self.vars))))
            .collect()
    }

    pub fn eval_scalar(&self, x: &[f64]) -> Result<f64> {
        Ok(self.eval(x)?[0])
    }

    pub fn eval_vector(&self, x: &[f64]) -> Result<DVector<f64>> {
        Ok(DVector::from_vec(self.eval(x)?))
    }

    pub fn eval_matrix(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let (r, c) = self.dims();
        Ok(DMatrix::from_row_slice(r, c, &self.eval(x)?))
    }

    /// Entry-wise partial derivative fields, one per variable.
    pub fn partials(&self) -> &[ExpressionField] {
        self.partials.get_or_init(|| {
            (0..self.vars.len())
                .map(|i| ExpressionField {
                    vars: self.vars.clone(),
                    shape: self.shape,
                    entries: self.entries.iter().map(|e| e.derivative(i)).collect(),
                    partials: OnceLock::new(),
                })
                .collect()
        })
    }

    pub fn partial(&self, i: usize) -> &ExpressionField {
        &self.partials()[i]
    }

    /// Gradient of a scalar field as a vector field.
    pub fn gradient_field(&self) -> Result<ExpressionField> {
        if self.len() != 1 {
            return Err(Error::Shape("gradient needs a scalar field".into()));
        }
        let entries = self.partials().iter().map(|p| p.entries[0].clone()).collect();
        Self::vector(self.vars.clone(), entries)
    }

    /// Exact Jacobian (entries × variables) of a scalar or vector field at `x`.
    pub fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        if matches!(self.shape, Shape::Matrix(..)) {
            return Err(Error::Shape("jacobian needs a scalar or vector field".into()));
        }
        self.check_point(x)?;
        let n = self.vars.len();
        let mut jac = DMatrix::zeros(self.len(), n);
        for (j, p) in self.partials().iter().enumerate() {
            for (i, v) in p.eval(x)?.into_iter().enumerate() {
                jac[(i, j)] = v;
            }
        }
        Ok(jac)
    }

    /// Jacobian by forward-mode dual numbers, independent of the symbolic path.
    pub fn jacobian_dual(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_point(x)?;
        let n = self.vars.len();
        let mut jac = DMatrix::zeros(self.len(), n);
        let mut dir = vec![0.0; n];
        for j in 0..n {
            dir[j] = 1.0;
            for (i, e) in self.entries.iter().enumerate() {
                jac[(i, j)] = e.eval_dual(x, &dir).map_err(|err| Error::Eval(err.describe(&self.vars)))?.eps;
            }
            dir[j] = 0.0;
        }
        Ok(jac)
    }

    /// Derivative of the field along `dir` at `x`, shaped like the field
    /// (`D_V F = Σ Vⁱ ∂ᵢF`).
    pub fn directional(&self, x: &[f64], dir: &[f64]) -> Result<DMatrix<f64>> {
        self.check_point(x)?;
        let (r, c) = self.dims();
        let mut out = DMatrix::zeros(r, c);
        for (p, &w) in self.partials().iter().zip(dir) {
            if w != 0.0 {
                out += p.eval_matrix(x)? * w;
            }
        }
        Ok(out)
    }

    /// Applies `f` entry-wise, keeping the variable list and shape.
    pub fn map_entries(&self, f: impl Fn(&Expr) -> Expr) -> ExpressionField {
        ExpressionField {
            vars: self.vars.clone(),
            shape: self.shape,
            entries: self.entries.iter().map(f).collect(),
            partials: OnceLock::new(),
        }
    }

    /// Entry `(r, c)` of a matrix field, or entry `r` of a vector when `c == 0`.
    pub fn entry(&self, r: usize, c: usize) -> &Expr {
        let (_, cols) = self.dims();
        &self.entries[r * cols + c]
    }

    /// Column `c` of a matrix field as a vector field.
    pub fn column(&self, c: usize) -> ExpressionField {
        let (rows, _) = self.dims();
        let entries = (0..rows).map(|r| self.entry(r, c).clone()).collect();
        Self::vector(self.vars.clone(), entries).expect("column of a valid matrix")
    }
}

/// Builds a shared variable list from string slices.
pub fn var_list(list: &[&str]) -> Arc<[String]> {
    list.iter().map(|s| s.to_string()).collect()
}
