//! Scalar expressions over named real variables.
//!
//! Expressions are parsed once into an immutable [`Expr`] tree whose
//! variables are indices into an ordered variable list. Differentiation is
//! symbolic and closed over the tree type, so derivatives of any order are
//! again expressions. A dual-number evaluator ([`Expr::eval_dual`]) gives an
//! independent forward-mode derivative used for cross-checking.

mod dual;
mod field;
mod parse;

use std::fmt;

pub use dual::Dual;
pub use field::{var_list, ExpressionField, Shape};
pub use parse::{parse, ParseError};

/// Elementary functions accepted by the parser.
///
/// `Sign` is not part of the documented input language but is produced by
/// differentiating `abs`; it parses so that printed derivatives round-trip.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sqrt,
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Asinh,
    Abs,
    Sign,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sqrt => "sqrt",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Asinh => "asinh",
            Func::Abs => "abs",
            Func::Sign => "sign",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sqrt" => Func::Sqrt,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "asinh" => Func::Asinh,
            "abs" => Func::Abs,
            "sign" => Func::Sign,
            _ => return None,
        })
    }
}

/// Expression tree. `Var(i)` refers to position `i` of the variable list the
/// expression was parsed against.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

/// Why an evaluation was rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainKind {
    SqrtOfNegative,
    LogOfNonPositive,
    DivisionByZero,
    NegativeBaseFractionalPower,
    NonFinite,
}

impl fmt::Display for DomainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DomainKind::SqrtOfNegative => "square root of a negative number",
            DomainKind::LogOfNonPositive => "logarithm of a non-positive number",
            DomainKind::DivisionByZero => "division by zero",
            DomainKind::NegativeBaseFractionalPower => "negative base raised to a fractional power",
            DomainKind::NonFinite => "non-finite result",
        })
    }
}

/// Evaluation failure, carrying the offending subexpression.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalError {
    pub kind: DomainKind,
    pub node: Box<Expr>,
}

impl EvalError {
    /// Renders the error with the real variable names.
    pub fn describe(&self, vars: &[String]) -> String {
        format!("{} in `{}`", self.kind, self.node.display(vars))
    }
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} in `{}`", self.kind, self.node.display_indexed())
    }
}

impl std::error::Error for EvalError {}

fn check(value: f64, node: &Expr) -> Result<f64, EvalError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(EvalError { kind: DomainKind::NonFinite, node: Box::new(node.clone()) })
    }
}

fn domain(kind: DomainKind, node: &Expr) -> EvalError {
    EvalError { kind, node: Box::new(node.clone()) }
}

pub(crate) fn powf_checked(base: f64, exp: f64, node: &Expr) -> Result<f64, EvalError> {
    if base < 0.0 && exp.fract() != 0.0 {
        return Err(domain(DomainKind::NegativeBaseFractionalPower, node));
    }
    if base == 0.0 && exp < 0.0 {
        return Err(domain(DomainKind::DivisionByZero, node));
    }
    Ok(base.powf(exp))
}

impl Expr {
    pub fn constant(c: f64) -> Expr {
        Expr::Const(c)
    }

    pub fn var(i: usize) -> Expr {
        Expr::Var(i)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(c) if *c == 0.0)
    }

    pub fn is_one(&self) -> bool {
        matches!(self, Expr::Const(c) if *c == 1.0)
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }

    /// Evaluates at `x`, indexed like the variable list.
    pub fn eval(&self, x: &[f64]) -> Result<f64, EvalError> {
        let v = match self {
            Expr::Const(c) => *c,
            Expr::Var(i) => x[*i],
            Expr::Neg(a) => -a.eval(x)?,
            Expr::Add(a, b) => a.eval(x)? + b.eval(x)?,
            Expr::Sub(a, b) => a.eval(x)? - b.eval(x)?,
            Expr::Mul(a, b) => a.eval(x)? * b.eval(x)?,
            Expr::Div(a, b) => {
                let num = a.eval(x)?;
                let den = b.eval(x)?;
                if den == 0.0 {
                    return Err(domain(DomainKind::DivisionByZero, self));
                }
                num / den
            }
            Expr::Pow(a, b) => powf_checked(a.eval(x)?, b.eval(x)?, self)?,
            Expr::Call(func, a) => {
                let u = a.eval(x)?;
                match func {
                    Func::Sqrt if u < 0.0 => return Err(domain(DomainKind::SqrtOfNegative, self)),
                    Func::Sqrt => u.sqrt(),
                    Func::Sin => u.sin(),
                    Func::Cos => u.cos(),
                    Func::Tan => u.tan(),
                    Func::Exp => u.exp(),
                    Func::Log if u <= 0.0 => return Err(domain(DomainKind::LogOfNonPositive, self)),
                    Func::Log => u.ln(),
                    Func::Asinh => u.asinh(),
                    Func::Abs => u.abs(),
                    Func::Sign => sign(u),
                }
            }
        };
        check(v, self)
    }

    /// Forward-mode evaluation: value and directional derivative along `dir`.
    pub fn eval_dual(&self, x: &[f64], dir: &[f64]) -> Result<Dual, EvalError> {
        dual::eval(self, x, dir)
    }

    /// Whether variable `i` occurs in the tree.
    pub fn depends_on(&self, i: usize) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Var(j) => *j == i,
            Expr::Neg(a) | Expr::Call(_, a) => a.depends_on(i),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.depends_on(i) || b.depends_on(i)
            }
        }
    }

    /// Largest variable index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Const(_) => None,
            Expr::Var(j) => Some(*j),
            Expr::Neg(a) | Expr::Call(_, a) => a.max_var(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.max_var().max(b.max_var())
            }
        }
    }

    /// Exact partial derivative with respect to variable `i`.
    ///
    /// Only constant folding is applied to the result. `abs` differentiates
    /// to `sign`, which is 0 at 0.
    pub fn derivative(&self, i: usize) -> Expr {
        if !self.depends_on(i) {
            return Expr::Const(0.0);
        }
        match self {
            Expr::Const(_) => Expr::Const(0.0),
            Expr::Var(j) => Expr::Const(if *j == i { 1.0 } else { 0.0 }),
            Expr::Neg(a) => neg(a.derivative(i)),
            Expr::Add(a, b) => add(a.derivative(i), b.derivative(i)),
            Expr::Sub(a, b) => sub(a.derivative(i), b.derivative(i)),
            Expr::Mul(a, b) => add(
                mul(a.derivative(i), (**b).clone()),
                mul((**a).clone(), b.derivative(i)),
            ),
            Expr::Div(a, b) => {
                // a'/b - a b'/b^2
                let (a, b) = (&**a, &**b);
                sub(
                    div(a.derivative(i), b.clone()),
                    div(mul(a.clone(), b.derivative(i)), mul(b.clone(), b.clone())),
                )
            }
            Expr::Pow(a, e) => {
                let (a, e) = (&**a, &**e);
                if !e.depends_on(i) {
                    let reduced = pow(a.clone(), sub(e.clone(), Expr::Const(1.0)));
                    mul(mul(e.clone(), reduced), a.derivative(i))
                } else {
                    // a^e * (e' ln a + e a'/a)
                    let log_term = mul(e.derivative(i), call(Func::Log, a.clone()));
                    let base_term = div(mul(e.clone(), a.derivative(i)), a.clone());
                    mul(self.clone(), add(log_term, base_term))
                }
            }
            Expr::Call(func, a) => {
                let da = a.derivative(i);
                let a = (**a).clone();
                let outer = match func {
                    Func::Sqrt => div(Expr::Const(1.0), mul(Expr::Const(2.0), call(Func::Sqrt, a))),
                    Func::Sin => call(Func::Cos, a),
                    Func::Cos => neg(call(Func::Sin, a)),
                    Func::Tan => {
                        let c = call(Func::Cos, a);
                        div(Expr::Const(1.0), mul(c.clone(), c))
                    }
                    Func::Exp => call(Func::Exp, a),
                    Func::Log => div(Expr::Const(1.0), a),
                    Func::Asinh => div(
                        Expr::Const(1.0),
                        call(Func::Sqrt, add(mul(a.clone(), a), Expr::Const(1.0))),
                    ),
                    Func::Abs => call(Func::Sign, a),
                    Func::Sign => Expr::Const(0.0),
                };
                mul(outer, da)
            }
        }
    }

    /// Replaces every variable `i` with `f(i)`.
    pub fn substitute(&self, f: &dyn Fn(usize) -> Expr) -> Expr {
        match self {
            Expr::Const(c) => Expr::Const(*c),
            Expr::Var(i) => f(*i),
            Expr::Neg(a) => Expr::Neg(Box::new(a.substitute(f))),
            Expr::Add(a, b) => Expr::Add(Box::new(a.substitute(f)), Box::new(b.substitute(f))),
            Expr::Sub(a, b) => Expr::Sub(Box::new(a.substitute(f)), Box::new(b.substitute(f))),
            Expr::Mul(a, b) => Expr::Mul(Box::new(a.substitute(f)), Box::new(b.substitute(f))),
            Expr::Div(a, b) => Expr::Div(Box::new(a.substitute(f)), Box::new(b.substitute(f))),
            Expr::Pow(a, b) => Expr::Pow(Box::new(a.substitute(f)), Box::new(b.substitute(f))),
            Expr::Call(func, a) => Expr::Call(*func, Box::new(a.substitute(f))),
        }
    }

    /// Printable view using the given variable names.
    pub fn display<'a>(&'a self, vars: &'a [String]) -> Display<'a> {
        Display { expr: self, vars: Some(vars) }
    }

    /// Printable view with placeholder names `_0`, `_1`, ...
    pub fn display_indexed(&self) -> Display<'_> {
        Display { expr: self, vars: None }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(_) => 3,
            Expr::Const(c) if c.is_sign_negative() => 3,
            Expr::Pow(..) => 4,
            Expr::Const(_) | Expr::Var(_) | Expr::Call(..) => 5,
        }
    }
}

pub(crate) fn sign(u: f64) -> f64 {
    if u > 0.0 {
        1.0
    } else if u < 0.0 {
        -1.0
    } else {
        0.0
    }
}

// Folding constructors used by differentiation.

pub fn neg(a: Expr) -> Expr {
    match a {
        Expr::Const(c) => Expr::Const(-c),
        Expr::Neg(inner) => *inner,
        a => Expr::Neg(Box::new(a)),
    }
}

pub fn add(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => Expr::Const(x + y),
        (Some(x), _) if x == 0.0 => b,
        (_, Some(y)) if y == 0.0 => a,
        _ => Expr::Add(Box::new(a), Box::new(b)),
    }
}

pub fn sub(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => Expr::Const(x - y),
        (Some(x), _) if x == 0.0 => neg(b),
        (_, Some(y)) if y == 0.0 => a,
        _ => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

pub fn mul(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => Expr::Const(x * y),
        (Some(x), _) if x == 0.0 => Expr::Const(0.0),
        (_, Some(y)) if y == 0.0 => Expr::Const(0.0),
        (Some(x), _) if x == 1.0 => b,
        (_, Some(y)) if y == 1.0 => a,
        (Some(x), _) if x == -1.0 => neg(b),
        (_, Some(y)) if y == -1.0 => neg(a),
        _ => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

pub fn div(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) if y != 0.0 => Expr::Const(x / y),
        (Some(x), _) if x == 0.0 => Expr::Const(0.0),
        (_, Some(y)) if y == 1.0 => a,
        _ => Expr::Div(Box::new(a), Box::new(b)),
    }
}

pub fn pow(a: Expr, e: Expr) -> Expr {
    match e.as_const() {
        Some(y) if y == 0.0 => Expr::Const(1.0),
        Some(y) if y == 1.0 => a,
        _ => Expr::Pow(Box::new(a), Box::new(e)),
    }
}

pub fn call(func: Func, a: Expr) -> Expr {
    Expr::Call(func, Box::new(a))
}

pub struct Display<'a> {
    expr: &'a Expr,
    vars: Option<&'a [String]>,
}

impl Display<'_> {
    fn child<'b>(&'b self, expr: &'b Expr) -> Display<'b> {
        Display { expr, vars: self.vars }
    }

    fn write_child(&self, f: &mut fmt::Formatter<'_>, child: &Expr, paren: bool) -> fmt::Result {
        if paren {
            write!(f, "({})", self.child(child))
        } else {
            write!(f, "{}", self.child(child))
        }
    }
}

impl fmt::Display for Display<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let e = self.expr;
        let p = e.precedence();
        match e {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Var(i) => match self.vars {
                Some(names) => f.write_str(&names[*i]),
                None => write!(f, "_{i}"),
            },
            Expr::Neg(a) => {
                f.write_str("-")?;
                self.write_child(f, a, a.precedence() < 3)
            }
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                let op = match e {
                    Expr::Add(..) => " + ",
                    Expr::Sub(..) => " - ",
                    Expr::Mul(..) => "*",
                    _ => "/",
                };
                self.write_child(f, a, a.precedence() < p)?;
                f.write_str(op)?;
                self.write_child(f, b, b.precedence() <= p)
            }
            Expr::Pow(a, b) => {
                self.write_child(f, a, a.precedence() <= 4)?;
                f.write_str("^")?;
                self.write_child(f, b, b.precedence() < 3)
            }
            Expr::Call(func, a) => write!(f, "{}({})", func.name(), self.child(a)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn derivative_of_square_plus_one() {
        let vars = names(&["x", "y"]);
        let e = parse("y^2 + 1", &vars).unwrap();
        let d = e.derivative(1);
        for y in [-2.0, 0.0, 0.5, 3.0] {
            assert_eq!(d.eval(&[0.0, y]).unwrap(), 2.0 * y);
        }
    }

    #[test]
    fn derivative_of_rosenberg_constraint_in_xdot() {
        let vars = names(&["x", "y", "z", "x'", "y'", "z'"]);
        let phi = parse("z' - y*x'", &vars).unwrap();
        let d = phi.derivative(3);
        assert_eq!(d.eval(&[0.0, 1.7, 0.0, 2.0, 3.0, 2.0]).unwrap(), -1.7);
    }

    #[test]
    fn second_derivative_of_quadratic_kinetic_term() {
        let vars = names(&["m", "v"]);
        let e = parse("-(1/2)*m*v^2", &vars).unwrap();
        let dv = e.derivative(1);
        let dvv = dv.derivative(1);
        assert_eq!(dv.eval(&[3.0, 2.0]).unwrap(), -6.0);
        assert_eq!(dvv.eval(&[3.0, 2.0]).unwrap(), -3.0);
    }

    #[test]
    fn abs_derivative_is_zero_at_origin() {
        let vars = names(&["x"]);
        let d = parse("abs(x)", &vars).unwrap().derivative(0);
        assert_eq!(d.eval(&[0.0]).unwrap(), 0.0);
        assert_eq!(d.eval(&[-2.0]).unwrap(), -1.0);
        assert_eq!(d.eval(&[2.0]).unwrap(), 1.0);
    }

    #[test]
    fn domain_errors_name_the_subexpression() {
        let vars = names(&["x"]);
        let err = parse("1 + log(x)", &vars).unwrap().eval(&[-1.0]).unwrap_err();
        assert_eq!(err.kind, DomainKind::LogOfNonPositive);
        assert_eq!(err.describe(&vars), "logarithm of a non-positive number in `log(x)`");
        let err = parse("sqrt(x - 1)", &vars).unwrap().eval(&[0.0]).unwrap_err();
        assert_eq!(err.kind, DomainKind::SqrtOfNegative);
        let err = parse("1/(x - 1)", &vars).unwrap().eval(&[1.0]).unwrap_err();
        assert_eq!(err.kind, DomainKind::DivisionByZero);
    }

    #[test]
    fn variable_exponent_derivative() {
        let vars = names(&["x"]);
        let d = parse("x^x", &vars).unwrap().derivative(0);
        let x: f64 = 1.7;
        let expected = x.powf(x) * (x.ln() + 1.0);
        assert!((d.eval(&[x]).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn printing_uses_minimal_parentheses() {
        let vars = names(&["a", "b", "c"]);
        for (src, out) in [
            ("a - (b - c)", "a - (b - c)"),
            ("(a - b) - c", "a - b - c"),
            ("a/(b*c)", "a/(b*c)"),
            ("(a^b)^c", "(a^b)^c"),
            ("a^b^c", "a^b^c"),
            ("-a^2", "-a^2"),
            ("(-a)^2", "(-a)^2"),
            ("a*-b", "a*-b"),
            ("2^-1", "2^-1"),
        ] {
            let e = parse(src, &vars).unwrap();
            assert_eq!(e.display(&vars).to_string(), out, "{src}");
        }
    }
}
