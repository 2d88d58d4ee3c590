//! Fixed-step RK4 integration with projection back onto the constraint
//! submanifold, conservation monitors and CSV output.

use std::io::{self, Write};

use log::debug;
use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::expr::ExpressionField;
use crate::linalg::Tolerances;
use crate::linsing::LinearlySingularSystem;
use crate::nonholo::{GeneralizedNonholonomicSystem, SubmanifoldSpec};

/// A field returning `(ẋ, multipliers)` at a state.
pub type FieldFn<'a> = dyn Fn(&[f64]) -> Result<(DVector<f64>, DVector<f64>)> + 'a;

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Multipliers at each grid point (empty vectors when unconstrained).
    pub multipliers: Vec<Vec<f64>>,
    /// `‖φ‖∞` at each grid point; zero without a submanifold.
    pub drift: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_state(&self) -> &[f64] {
        self.states.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn max_drift(&self) -> f64 {
        self.drift.iter().copied().fold(0.0, f64::max)
    }

    /// Writes `t,x1..xn,u1..um,drift` rows with `%.17g` numbers and LF endings.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let n = self.states.first().map_or(0, Vec::len);
        let m = self.multipliers.first().map_or(0, Vec::len);
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("x{i}")));
        header.extend((1..=m).map(|i| format!("u{i}")));
        header.push("drift".into());
        writeln!(out, "{}", header.join(","))?;
        for i in 0..self.len() {
            let mut row = vec![format_g17(self.times[i])];
            row.extend(self.states[i].iter().map(|&v| format_g17(v)));
            row.extend(self.multipliers[i].iter().map(|&v| format_g17(v)));
            row.push(format_g17(self.drift[i]));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Formats like C's `%.17g`.
pub fn format_g17(x: f64) -> String {
    const P: i32 = 17;
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.*e}", (P - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= P {
        let mantissa = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        strip_zeros(&format!("{:.*}", (P - 1 - exp) as usize, x)).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Constrained field of a nonholonomic system, usable slightly off `M`.
pub fn constrained_field(gnh: &GeneralizedNonholonomicSystem) -> impl Fn(&[f64]) -> Result<(DVector<f64>, DVector<f64>)> + '_ {
    move |x| gnh.field_extension(x)
}

/// Unique solution field of `A(x)·ẋ = f(x)`.
pub fn system_field<'a>(
    sys: &'a LinearlySingularSystem,
    tol: &'a Tolerances,
) -> impl Fn(&[f64]) -> Result<(DVector<f64>, DVector<f64>)> + 'a {
    move |x| {
        let set = sys.solve_at(x, None, tol)?;
        if !set.is_consistent() {
            return Err(Error::Inconsistent { residual: set.residual });
        }
        if !set.is_unique() {
            return Err(Error::Invalid(format!("solution has a {}-dimensional kernel", set.kernel.dim())));
        }
        Ok((set.particular, DVector::zeros(0)))
    }
}

fn rk4_step(field: &FieldFn, x: &[f64], dt: f64) -> Result<Vec<f64>> {
    let x0 = DVector::from_column_slice(x);
    let k1 = field(x)?.0;
    let k2 = field((&x0 + &k1 * (dt / 2.0)).as_slice())?.0;
    let k3 = field((&x0 + &k2 * (dt / 2.0)).as_slice())?.0;
    let k4 = field((&x0 + &k3 * dt).as_slice())?.0;
    let next = x0 + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    Ok(next.as_slice().to_vec())
}

fn step_projected(
    field: &FieldFn,
    x: &[f64],
    dt: f64,
    project: Option<&SubmanifoldSpec>,
    tol: &Tolerances,
) -> Result<Vec<f64>> {
    let next = rk4_step(field, x, dt)?;
    match project {
        Some(m) => m.project(&next, None, tol),
        None => Ok(next),
    }
}

/// Integrates on the grid `tᵢ = i·dt` up to `t1` with classical RK4.
///
/// With a submanifold, `x0` is projected first and every step is followed by
/// Gauss–Newton projection. A step whose projection fails is retried once as
/// four steps of `dt/4`.
pub fn integrate(
    field: &FieldFn,
    x0: &[f64],
    t1: f64,
    dt: f64,
    project: Option<&SubmanifoldSpec>,
    tol: &Tolerances,
) -> Result<Trajectory> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Invalid(format!("time step must be positive, got {dt}")));
    }
    if !(t1 >= 0.0 && t1.is_finite()) {
        return Err(Error::Invalid(format!("final time must be non-negative, got {t1}")));
    }
    let steps = (t1 / dt).round() as usize;
    let mut x = match project {
        Some(m) => m.project(x0, None, tol)?,
        None => x0.to_vec(),
    };
    let drift_of = |x: &[f64]| -> Result<f64> { project.map_or(Ok(0.0), |m| m.violation(x)) };

    let mut traj = Trajectory {
        dt,
        times: Vec::with_capacity(steps + 1),
        states: Vec::with_capacity(steps + 1),
        multipliers: Vec::with_capacity(steps + 1),
        drift: Vec::with_capacity(steps + 1),
    };
    for i in 0..=steps {
        traj.times.push(i as f64 * dt);
        traj.multipliers.push(field(&x)?.1.as_slice().to_vec());
        traj.drift.push(drift_of(&x)?);
        traj.states.push(x.clone());
        if i == steps {
            break;
        }
        x = match step_projected(field, &x, dt, project, tol) {
            Ok(next) => next,
            Err(Error::NotOnManifold { .. }) => {
                debug!("projection failed at step {i}, retrying with dt/4");
                let mut y = x.clone();
                for _ in 0..4 {
                    y = step_projected(field, &y, dt / 4.0, project, tol)
                        .map_err(|_| Error::ProjectionDiverged { step: i })?;
                }
                y
            }
            Err(e) => return Err(e),
        };
    }
    Ok(traj)
}

/// Deviation of a scalar function along a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Monitor {
    pub max_abs_deviation: f64,
    pub series: Vec<f64>,
}

pub fn monitor(traj: &Trajectory, h: &ExpressionField) -> Result<Monitor> {
    let series = traj.states.iter().map(|x| h.eval_scalar(x)).collect::<Result<Vec<_>>>()?;
    let h0 = series.first().copied().unwrap_or(0.0);
    let max_abs_deviation = series.iter().map(|v| (v - h0).abs()).fold(0.0, f64::max);
    Ok(Monitor { max_abs_deviation, series })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::var_list;

    #[test]
    fn g17_matches_c_formatting() {
        assert_eq!(format_g17(0.0), "0");
        assert_eq!(format_g17(1.0), "1");
        assert_eq!(format_g17(-3.0), "-3");
        assert_eq!(format_g17(0.1), "0.10000000000000001");
        assert_eq!(format_g17(1e-3), "0.001");
        assert_eq!(format_g17(1e-5), "1.0000000000000001e-05");
        assert_eq!(format_g17(1e20), "1e+20");
        assert_eq!(format_g17(123456.5), "123456.5");
        assert_eq!(format_g17(2.0f64.sqrt()), "1.4142135623730951");
        assert_eq!(format_g17(1e16), "10000000000000000");
        assert_eq!(format_g17(1e17), "1e+17");
    }

    #[test]
    fn linear_motion_is_exact() {
        let vars = var_list(&["x", "v"]);
        let sys = LinearlySingularSystem::explicit(ExpressionField::parse_vector(&["v", "0"], vars).unwrap()).unwrap();
        let tol = Tolerances::default();
        let f = system_field(&sys, &tol);
        let traj = integrate(&f, &[1.0, 0.5], 2.0, 0.1, None, &tol).unwrap();
        assert_eq!(traj.len(), 21);
        let last = traj.last_state();
        assert!((last[0] - 2.0).abs() < 1e-13 && last[1] == 0.5);
        assert!(traj.multipliers.iter().all(Vec::is_empty));
        assert_eq!(traj.max_drift(), 0.0);
    }

    fn pendulum_end(dt: f64) -> Vec<f64> {
        let vars = var_list(&["q", "p"]);
        let sys =
            LinearlySingularSystem::explicit(ExpressionField::parse_vector(&["p", "-sin(q)"], vars).unwrap()).unwrap();
        let tol = Tolerances::default();
        let f = system_field(&sys, &tol);
        integrate(&f, &[1.0, 0.0], 2.0, dt, None, &tol).unwrap().last_state().to_vec()
    }

    #[test]
    fn rk4_has_fourth_order() {
        let exact = pendulum_end(1e-4);
        let err = |dt| {
            let e = pendulum_end(dt);
            ((e[0] - exact[0]).powi(2) + (e[1] - exact[1]).powi(2)).sqrt()
        };
        let ratio = err(0.1) / err(0.05);
        assert!((12.0..=20.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn monitor_of_constant_is_zero() {
        let vars = var_list(&["x", "v"]);
        let sys = LinearlySingularSystem::explicit(ExpressionField::parse_vector(&["v", "-x"], vars.clone()).unwrap())
            .unwrap();
        let tol = Tolerances::default();
        let f = system_field(&sys, &tol);
        let traj = integrate(&f, &[1.0, 0.0], 1.0, 0.01, None, &tol).unwrap();
        let one = ExpressionField::parse_scalar("1", vars.clone()).unwrap();
        assert_eq!(monitor(&traj, &one).unwrap().max_abs_deviation, 0.0);
        let energy = ExpressionField::parse_scalar("x^2 + v^2", vars).unwrap();
        assert!(monitor(&traj, &energy).unwrap().max_abs_deviation < 1e-9);
    }

    #[test]
    fn bad_step_is_rejected() {
        let vars = var_list(&["x"]);
        let sys = LinearlySingularSystem::explicit(ExpressionField::parse_vector(&["1"], vars).unwrap()).unwrap();
        let tol = Tolerances::default();
        let f = system_field(&sys, &tol);
        assert!(matches!(integrate(&f, &[0.0], 1.0, 0.0, None, &tol), Err(Error::Invalid(_))));
        assert!(matches!(integrate(&f, &[0.0], 1.0, -1.0, None, &tol), Err(Error::Invalid(_))));
    }

    #[test]
    fn csv_layout() {
        let traj = Trajectory {
            dt: 0.5,
            times: vec![0.0, 0.5],
            states: vec![vec![1.0, 2.0], vec![1.5, 2.0]],
            multipliers: vec![vec![-3.0], vec![-2.5]],
            drift: vec![0.0, 1e-12],
        };
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "t,x1,x2,u1,drift\n0,1,2,-3,0\n0.5,1.5,2,-2.5,9.9999999999999998e-13\n");
    }
}
