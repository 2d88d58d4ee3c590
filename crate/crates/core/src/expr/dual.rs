use std::ops::{Add, Div, Mul, Neg, Sub};

use super::{check, domain, powf_checked, sign, DomainKind, EvalError, Expr, Func};

/// First-order dual number `re + eps·ε` with `ε² = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual {
    pub re: f64,
    pub eps: f64,
}

impl Dual {
    pub fn new(re: f64, eps: f64) -> Self {
        Dual { re, eps }
    }

    pub fn constant(re: f64) -> Self {
        Dual { re, eps: 0.0 }
    }

    fn chain(self, value: f64, slope: f64) -> Dual {
        Dual { re: value, eps: slope * self.eps }
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, o: Dual) -> Dual {
        Dual::new(self.re + o.re, self.eps + o.eps)
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(self, o: Dual) -> Dual {
        Dual::new(self.re - o.re, self.eps - o.eps)
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, o: Dual) -> Dual {
        Dual::new(self.re * o.re, self.eps * o.re + self.re * o.eps)
    }
}

impl Div for Dual {
    type Output = Dual;
    fn div(self, o: Dual) -> Dual {
        Dual::new(self.re / o.re, (self.eps * o.re - self.re * o.eps) / (o.re * o.re))
    }
}

impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Dual::new(-self.re, -self.eps)
    }
}

pub(super) fn eval(e: &Expr, x: &[f64], dir: &[f64]) -> Result<Dual, EvalError> {
    let d = match e {
        Expr::Const(c) => Dual::constant(*c),
        Expr::Var(i) => Dual::new(x[*i], dir[*i]),
        Expr::Neg(a) => -eval(a, x, dir)?,
        Expr::Add(a, b) => eval(a, x, dir)? + eval(b, x, dir)?,
        Expr::Sub(a, b) => eval(a, x, dir)? - eval(b, x, dir)?,
        Expr::Mul(a, b) => eval(a, x, dir)? * eval(b, x, dir)?,
        Expr::Div(a, b) => {
            let num = eval(a, x, dir)?;
            let den = eval(b, x, dir)?;
            if den.re == 0.0 {
                return Err(domain(DomainKind::DivisionByZero, e));
            }
            num / den
        }
        Expr::Pow(a, b) => {
            let base = eval(a, x, dir)?;
            let exponent = eval(b, x, dir)?;
            let value = powf_checked(base.re, exponent.re, e)?;
            let mut slope = 0.0;
            if base.eps != 0.0 {
                slope += exponent.re * powf_checked(base.re, exponent.re - 1.0, e)? * base.eps;
            }
            if exponent.eps != 0.0 {
                if base.re <= 0.0 {
                    return Err(domain(DomainKind::LogOfNonPositive, e));
                }
                slope += value * base.re.ln() * exponent.eps;
            }
            Dual::new(value, slope)
        }
        Expr::Call(func, a) => {
            let u = eval(a, x, dir)?;
            match func {
                Func::Sqrt => {
                    if u.re < 0.0 {
                        return Err(domain(DomainKind::SqrtOfNegative, e));
                    }
                    let s = u.re.sqrt();
                    u.chain(s, 0.5 / s)
                }
                Func::Sin => u.chain(u.re.sin(), u.re.cos()),
                Func::Cos => u.chain(u.re.cos(), -u.re.sin()),
                Func::Tan => {
                    let c = u.re.cos();
                    u.chain(u.re.tan(), 1.0 / (c * c))
                }
                Func::Exp => {
                    let v = u.re.exp();
                    u.chain(v, v)
                }
                Func::Log => {
                    if u.re <= 0.0 {
                        return Err(domain(DomainKind::LogOfNonPositive, e));
                    }
                    u.chain(u.re.ln(), 1.0 / u.re)
                }
                Func::Asinh => u.chain(u.re.asinh(), 1.0 / (u.re * u.re + 1.0).sqrt()),
                Func::Abs => u.chain(u.re.abs(), sign(u.re)),
                Func::Sign => Dual::constant(sign(u.re)),
            }
        }
    };
    check(d.re, e)?;
    if !d.eps.is_finite() {
        return Err(domain(DomainKind::NonFinite, e));
    }
    Ok(d)
}
