//! The subcommands, each producing a JSON report.

use std::io;

use lsys_core::dynamics::{constrained_field, integrate, monitor, system_field, Trajectory};
use lsys_core::lagrangian::{regularity_of_l, sode_solve_near};
use lsys_core::linalg::{rank, Tolerances};
use lsys_core::linsing::SeedOutcome;
use lsys_core::nonholo::GeneralizedNonholonomicSystem;
use lsys_core::sampling::halton_box;
use lsys_core::symmetry::{check_constant_descent, check_descent, check_inf_symmetry, check_symmetry, CandidateKind, SYMMETRY_TOL};
use lsys_core::Error;
use nalgebra::DVector;
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::report::{matrix, num, slice, vector};
use crate::spec::{Dynamics, Spec, SpecError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Eval(#[from] Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Spec(_) | CliError::Usage(_) => 2,
            CliError::Eval(_) | CliError::Io(_) => 3,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Clone, Copy)]
pub struct Options {
    pub tol: Tolerances,
    /// Depth limit of the constraint algorithm.
    pub levels: usize,
}

impl Default for Options {
    fn default() -> Self {
        Options { tol: Tolerances::default(), levels: 3 }
    }
}

/// Report plus the verdict of any checks it contains.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Value,
    pub passed: bool,
}

fn nonholonomic(spec: &Spec, opts: &Options) -> Option<GeneralizedNonholonomicSystem> {
    spec.nonholonomic.clone().map(|g| g.with_tolerances(opts.tol))
}

/// Quasi-random points of the sampling box, projected onto `M` when there is one.
pub fn sample_points(spec: &Spec, count: usize, opts: &Options) -> CliResult<Vec<Vec<f64>>> {
    if spec.n() > 24 {
        return Err(CliError::Usage(format!("sampling supports at most 24 variables, got {}", spec.n())));
    }
    let (lo, hi): (Vec<f64>, Vec<f64>) = spec.sample.iter().copied().unzip();
    let raw = halton_box(count, &lo, &hi);
    match spec.manifold() {
        None => Ok(raw),
        Some(m) => Ok(raw.iter().map(|x| m.project(x, None, &opts.tol)).collect::<Result<_, _>>()?),
    }
}

/// Points from `name=value,...` assignments. On a constrained system the
/// unassigned coordinates are moved onto `M`; when every coordinate is
/// assigned, all of them may move.
pub fn points_from_assignments(spec: &Spec, items: &[String], opts: &Options) -> CliResult<Vec<Vec<f64>>> {
    items
        .iter()
        .map(|item| {
            let (x, given) = spec.point_from_assignments(item)?;
            match spec.manifold() {
                None => Ok(x),
                Some(m) => {
                    let free: Vec<bool> = given.iter().map(|g| !g).collect();
                    let mask = if free.iter().any(|&f| f) { Some(free.as_slice()) } else { None };
                    Ok(m.project(&x, mask, &opts.tol)?)
                }
            }
        })
        .collect()
}

/// Structural failures are reported in place; evaluation failures abort.
fn soft<T>(r: lsys_core::Result<T>, f: impl FnOnce(T) -> Value) -> CliResult<Value> {
    match r {
        Ok(v) => Ok(f(v)),
        Err(e @ Error::Eval(_)) => Err(e.into()),
        Err(e) => Ok(json!({ "error": e.to_string() })),
    }
}

pub fn analyze(spec: &Spec, points: &[Vec<f64>], opts: &Options) -> CliResult<Value> {
    let tol = &opts.tol;
    let base = spec.base();
    let gnh = nonholonomic(spec, opts);
    let mut out = Vec::with_capacity(points.len());
    for x in points {
        let mut entry = Map::new();
        entry.insert("x".into(), slice(x));
        let a = base.matrix_at(x)?;
        let r = rank(&a, tol);
        let c = base.consistency_at(x, tol)?;
        let regular_base = r == base.n() && base.k() == base.n();
        entry.insert(
            "base".into(),
            json!({
                "rank": r,
                "kernel_dim": base.n() - r,
                "consistent": c.consistent,
                "residual": num(c.residual),
                "threshold": num(c.threshold),
                "primary_constraints": vector(&base.primary_constraint_values(x, tol)?),
                "regular": regular_base,
            }),
        );
        if let Dynamics::Lagrangian(model) = &spec.dynamics {
            let reg = regularity_of_l(model, std::slice::from_ref(x), tol)?[0];
            entry.insert("hessian_rank".into(), json!(reg.hessian_rank));
        }
        match &gnh {
            None if regular_base => {
                let field = soft(base.solve_at(x, None, tol), |s| vector(&s.particular))?;
                entry.insert("field".into(), field);
            }
            None => {}
            Some(g) => {
                entry.insert("violation".into(), num(g.manifold().violation(x)?));
                let constrained = if regular_base {
                    constrained_report(spec, g, x)?
                } else if let Dynamics::Lagrangian(model) = &spec.dynamics {
                    soft(sode_solve_near(model, g.manifold(), g.forces(), x, tol), |s| {
                        let mut m = Map::new();
                        m.insert("field".into(), vector(&s.field));
                        m.insert("unique".into(), json!(s.unique));
                        m.insert("residual".into(), num(s.residual));
                        m.insert("u".into(), vector(&s.multipliers));
                        if let Some(k) = spec.multiplier_scale {
                            m.insert("lambda".into(), vector(&(&s.multipliers * k)));
                        }
                        json!({ "sode": m })
                    })?
                } else {
                    json!({ "error": Error::BaseNotRegular { rank: r, dim: base.n() }.to_string() })
                };
                entry.insert("constrained".into(), constrained);
            }
        }
        out.push(Value::Object(entry));
    }

    let mut report = Map::new();
    report.insert("scenario".into(), json!(spec.name));
    report.insert("vars".into(), json!(spec.vars.to_vec()));
    report.insert("tolerances".into(), json!({ "rank_rel": num(tol.rank_rel), "img_rel": num(tol.img_rel) }));
    report.insert("points".into(), Value::Array(out));
    if !points.is_empty() {
        let alg = lsys_core::linsing::ConstraintAlgorithm::new(base, *tol);
        report.insert("constraint_algorithm".into(), soft(alg.run(points, opts.levels), |stack| {
            let outcomes: Vec<Value> = stack
                .outcomes
                .iter()
                .map(|o| match o {
                    SeedOutcome::Fails { level, residual } => json!({ "fails_at": level, "residual": num(*residual) }),
                    SeedOutcome::Survives { level } => json!({ "survives_from": level }),
                    SeedOutcome::Unresolved => json!("unresolved"),
                })
                .collect();
            let levels: Vec<Value> = stack
                .levels
                .iter()
                .map(|l| json!({ "level": l.level, "new_constraints": l.new_constraints, "provenance": l.provenance }))
                .collect();
            json!({ "levels": levels, "outcomes": outcomes, "converged": stack.converged, "warnings": stack.warnings })
        })?);
    }
    Ok(Value::Object(report))
}

fn constrained_report(spec: &Spec, g: &GeneralizedNonholonomicSystem, x: &[f64]) -> CliResult<Value> {
    let class = match g.classify_at(x) {
        Ok(c) => c,
        Err(e @ Error::Eval(_)) => return Err(e.into()),
        Err(e) => return Ok(json!({ "error": e.to_string() })),
    };
    let mut m = Map::new();
    m.insert("D".into(), matrix(&class.d));
    m.insert("rank_D".into(), json!(class.rank_d));
    m.insert("surjective".into(), json!(class.surjective));
    m.insert("injective".into(), json!(class.injective));
    m.insert("regular".into(), json!(class.regular));
    let y = g.unconstrained_field_at(x)?;
    m.insert("unconstrained_field".into(), vector(&y));
    match g.multipliers_at(x, &y) {
        Ok(mult) => {
            let field = g.constrained_field_at(x, &y)?;
            m.insert("u".into(), vector(&mult.u));
            if let Some(k) = spec.multiplier_scale {
                m.insert("lambda".into(), vector(&(&mult.u * k)));
            }
            m.insert("gauge".into(), json!(mult.gauge));
            m.insert("tangency".into(), num((g.manifold().jacobian(x)? * &field).amax()));
            m.insert("force_residual".into(), num(g.force_residual_at(x, &field)?));
            let projector = soft(g.projectors_at(x), |(p, _)| num((p * &y - &field).amax()))?;
            m.insert("projector_residual".into(), projector);
            m.insert("field".into(), vector(&field));
        }
        Err(e @ Error::Eval(_)) => return Err(e.into()),
        Err(e) => {
            m.insert("error".into(), json!(e.to_string()));
        }
    }
    Ok(Value::Object(m))
}

/// Integrates from `x0` and summarizes drift and monitored functions.
pub fn simulate(spec: &Spec, x0: &[f64], t1: f64, dt: f64, opts: &Options) -> CliResult<(Trajectory, Value)> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(CliError::Usage(format!("--dt must be positive, got {dt}")));
    }
    if !(t1 >= 0.0 && t1.is_finite()) {
        return Err(CliError::Usage(format!("--t1 must be non-negative, got {t1}")));
    }
    let tol = &opts.tol;
    let base = spec.base();
    let gnh = nonholonomic(spec, opts);
    let regular = rank(&base.matrix_at(x0)?, tol) == base.n() && base.k() == base.n();
    let traj = match (&gnh, regular, &spec.dynamics) {
        (None, _, _) => integrate(&system_field(base, tol), x0, t1, dt, None, tol)?,
        (Some(g), true, _) => integrate(&constrained_field(g), x0, t1, dt, Some(g.manifold()), tol)?,
        (Some(g), false, Dynamics::Lagrangian(model)) => {
            let field = |x: &[f64]| -> lsys_core::Result<(DVector<f64>, DVector<f64>)> {
                let s = sode_solve_near(model, g.manifold(), g.forces(), x, tol)?;
                Ok((s.field, s.multipliers))
            };
            integrate(&field, x0, t1, dt, Some(g.manifold()), tol)?
        }
        (Some(_), false, Dynamics::System(_)) => {
            return Err(Error::BaseNotRegular { rank: rank(&base.matrix_at(x0)?, tol), dim: base.n() }.into())
        }
    };
    let mut monitors = Map::new();
    for c in &spec.constants {
        monitors.insert(c.name.clone(), num(monitor(&traj, &c.h)?.max_abs_deviation));
    }
    let summary = json!({
        "scenario": spec.name,
        "steps": traj.len() - 1,
        "dt": num(dt),
        "t1": num(t1),
        "initial": slice(&traj.states[0]),
        "final": slice(traj.last_state()),
        "max_drift": num(traj.max_drift()),
        "monitors": monitors,
    });
    Ok((traj, summary))
}

fn verdict(expected: Option<bool>, actual: bool) -> bool {
    expected.map_or(true, |e| e == actual)
}

/// Base symmetry on the box; for symmetries, descent on points of `M`.
pub fn check_symmetries(spec: &Spec, only: Option<&str>, count: usize, opts: &Options) -> CliResult<Outcome> {
    let selected: Vec<_> = spec.symmetries.iter().filter(|s| only.map_or(true, |n| s.name == n)).collect();
    if let (Some(n), true) = (only, selected.is_empty()) {
        return Err(CliError::Usage(format!("no symmetry named `{n}` in {}", spec.name)));
    }
    let (lo, hi): (Vec<f64>, Vec<f64>) = spec.sample.iter().copied().unzip();
    let box_points = halton_box(count, &lo, &hi);
    let gnh = nonholonomic(spec, opts);
    let on_m = if gnh.is_some() { sample_points(spec, count, opts)? } else { Vec::new() };

    let mut passed = true;
    let mut results = Map::new();
    for s in selected {
        let res = match s.candidate.kind() {
            CandidateKind::Finite => check_symmetry(spec.base(), &s.candidate, &box_points, &opts.tol)?,
            CandidateKind::Infinitesimal => check_inf_symmetry(spec.base(), &s.candidate, &box_points)?,
        };
        let symmetric = res.passes(SYMMETRY_TOL);
        let mut ok = verdict(s.expect_symmetry.or(Some(true)), symmetric);
        let mut m = Map::new();
        m.insert("kind".into(), json!(format!("{:?}", s.candidate.kind()).to_lowercase()));
        m.insert("r_f".into(), num(res.r_f));
        m.insert("r_a".into(), num(res.r_a));
        m.insert("symmetric".into(), json!(symmetric));
        if let (Some(g), CandidateKind::Infinitesimal, true) = (&gnh, s.candidate.kind(), symmetric) {
            let d = check_descent(g, &s.candidate, &on_m)?;
            ok &= verdict(s.expect_descends, d.descends);
            m.insert("tangent_to_m".into(), json!(d.tangent_to_m));
            m.insert("preserves_forces".into(), json!(d.preserves_forces));
            m.insert("descends".into(), json!(d.descends));
            m.insert("tangency_residual".into(), num(d.tangency_residual));
            m.insert("force_residual".into(), num(d.force_residual));
            m.insert("bracket_residual".into(), d.bracket_residual.map_or(Value::Null, num));
            if let Some(r) = &s.restriction {
                let mut worst: f64 = 0.0;
                for x in &on_m {
                    worst = worst.max((s.candidate.base().eval_vector(x)? - r.eval_vector(x)?).amax());
                }
                ok &= worst <= SYMMETRY_TOL;
                m.insert("restriction_residual".into(), num(worst));
            }
        } else if gnh.is_none() && (s.expect_descends.is_some() || s.restriction.is_some()) {
            return Err(CliError::Usage(format!("symmetry `{}`: descent needs [constraints] or [forces]", s.name)));
        }
        m.insert("passed".into(), json!(ok));
        passed &= ok;
        results.insert(s.name.clone(), Value::Object(m));
    }
    let report = json!({ "scenario": spec.name, "points": count, "symmetries": results, "passed": passed });
    Ok(Outcome { report, passed })
}

pub fn check_constants(spec: &Spec, only: Option<&str>, count: usize, opts: &Options) -> CliResult<Outcome> {
    let selected: Vec<_> = spec.constants.iter().filter(|c| only.map_or(true, |n| c.name == n)).collect();
    if let (Some(n), true) = (only, selected.is_empty()) {
        return Err(CliError::Usage(format!("no constant named `{n}` in {}", spec.name)));
    }
    let points = sample_points(spec, count, opts)?;
    let gnh = match nonholonomic(spec, opts) {
        Some(g) => g,
        None => {
            let base = spec.base().clone();
            let whole = lsys_core::nonholo::SubmanifoldSpec::whole(spec.vars.clone());
            let none = lsys_core::nonholo::ForceFrame::new(Vec::new())?;
            GeneralizedNonholonomicSystem::new(base, whole, none)?.with_tolerances(opts.tol)
        }
    };
    let mut passed = true;
    let mut results = Map::new();
    for c in selected {
        let d = check_constant_descent(&gnh, &c.h, &points, SYMMETRY_TOL)?;
        let ok = verdict(c.expect_conserved.or(Some(true)), d.constrained_conserved) && d.coherent;
        passed &= ok;
        results.insert(
            c.name.clone(),
            json!({
                "base_conserved": d.base_conserved,
                "constrained_conserved": d.constrained_conserved,
                "coherent": d.coherent,
                "max_base": num(d.max_base),
                "max_constrained": num(d.max_constrained),
                "gamma_h": num(d.gamma_h),
                "passed": ok,
            }),
        );
    }
    let report = json!({ "scenario": spec.name, "points": count, "constants": results, "passed": passed });
    Ok(Outcome { report, passed })
}

/// Loads every built-in scenario and runs its declared checks.
pub fn self_test(opts: &Options) -> CliResult<Outcome> {
    let mut passed = true;
    let mut results = Map::new();
    for sc in crate::scenarios::SCENARIOS {
        let mut m = Map::new();
        let spec = crate::scenarios::load(sc.name, &[])?;
        let points = sample_points(&spec, 20, opts)?;
        let analysis = analyze(&spec, &points, opts)?;
        let clean = analysis["points"].as_array().is_some_and(|p| p.iter().all(|e| e["constrained"].get("error").is_none()));
        m.insert("analyze".into(), json!(clean));
        let mut ok = clean;
        if !spec.symmetries.is_empty() {
            let s = check_symmetries(&spec, None, 200, opts)?;
            m.insert("symmetries".into(), json!(s.passed));
            ok &= s.passed;
        }
        if !spec.constants.is_empty() {
            let c = check_constants(&spec, None, 200, opts)?;
            m.insert("constants".into(), json!(c.passed));
            ok &= c.passed;
        }
        m.insert("passed".into(), json!(ok));
        passed &= ok;
        results.insert(sc.name.to_string(), Value::Object(m));
    }
    Ok(Outcome { report: json!({ "scenarios": results, "passed": passed }), passed })
}
