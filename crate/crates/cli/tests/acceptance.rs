//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero when any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::{Duration, Instant};

use lsys::commands::{self, Options};
use lsys::scenarios;
use lsys::spec::Spec;
use lsys_core::dynamics::monitor;
use lsys_core::expr::{var_list, ExpressionField};
use lsys_core::lagrangian::{sode_solve_at, LagrangianModel};
use lsys_core::linalg::{cokernel_basis, rank, subspace_classify, QuotientMap, SubspaceBasis};
use lsys_core::nonholo::GeneralizedNonholonomicSystem;
use lsys_core::Tolerances;
use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::Value;

type Verdict = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn scenario(name: &str, params: &[(&str, &str)]) -> Spec {
    let overrides: Vec<(String, String)> = params.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    scenarios::load(name, &overrides).expect("built-in scenario loads")
}

fn gnh(spec: &Spec) -> &GeneralizedNonholonomicSystem {
    spec.nonholonomic.as_ref().expect("constrained scenario")
}

fn within(elapsed: Duration, limit: f64, what: &str) -> Result<(), String> {
    ensure(elapsed.as_secs_f64() < limit, || format!("{what} took {:.2} s, limit {limit} s", elapsed.as_secs_f64()))
}

// 1. Constrained field of the Rosenberg system against its closed form.
fn rosenberg_field_oracle() -> Verdict {
    const TOL: f64 = 1e-9;
    let spec = scenario("rosenberg", &[]);
    let opts = Options::default();
    let start = Instant::now();
    let points = commands::sample_points(&spec, 100, &opts).map_err(|e| e.to_string())?;
    let g = gnh(&spec);
    let mut worst_field: f64 = 0.0;
    let mut worst_u: f64 = 0.0;
    for p in &points {
        let (field, u) = g.field_at(p).map_err(|e| e.to_string())?;
        let (y, xd, yd) = (p[1], p[3], p[4]);
        let s = y * y + 1.0;
        let exact = [xd, yd, y * xd, -y * yd * xd / s, 0.0, yd * xd / s];
        for (a, b) in field.iter().zip(exact) {
            worst_field = worst_field.max((a - b).abs());
        }
        worst_u = worst_u.max((u[0] + xd * yd / s).abs());
    }
    let elapsed = start.elapsed();
    ensure(points.len() == 100, || "expected 100 points".into())?;
    ensure(worst_field <= TOL, || format!("field error {worst_field:e}"))?;
    ensure(worst_u <= TOL, || format!("multiplier error {worst_u:e}"))?;
    within(elapsed, 1.0, "100-point oracle")?;
    Ok(format!("max field error {worst_field:.2e}, max multiplier error {worst_u:.2e}, {:.3} s", elapsed.as_secs_f64()))
}

// 2. Conservation along a Rosenberg trajectory.
fn rosenberg_conservation() -> Verdict {
    const MONITOR_TOL: f64 = 1e-6;
    const DRIFT_TOL: f64 = 1e-8;
    let spec = scenario("rosenberg", &[]);
    let opts = Options::default();
    let x0 = [0.0, 1.0, 0.0, 2.0, 3.0, 2.0];
    let start = Instant::now();
    let (traj, _) = commands::simulate(&spec, &x0, 10.0, 1e-3, &opts).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let mut worst: f64 = 0.0;
    for h in ["y'", "x'*sqrt(y^2 + 1)", "y'*x - asinh(y)*x'*sqrt(y^2 + 1)", "y'*z - x'*(y^2 + 1)"] {
        let f = ExpressionField::parse_scalar(h, spec.vars.clone()).map_err(|e| e.to_string())?;
        let m = monitor(&traj, &f).map_err(|e| e.to_string())?;
        ensure(m.max_abs_deviation <= MONITOR_TOL, || format!("{h} drifts by {:e}", m.max_abs_deviation))?;
        worst = worst.max(m.max_abs_deviation);
    }
    ensure(traj.len() == 10_001, || format!("{} samples", traj.len()))?;
    ensure(traj.max_drift() <= DRIFT_TOL, || format!("constraint drift {:e}", traj.max_drift()))?;
    within(elapsed, 5.0, "integration")?;
    Ok(format!(
        "max monitor drift {worst:.2e}, constraint drift {:.2e}, {:.2} s",
        traj.max_drift(),
        elapsed.as_secs_f64()
    ))
}

// 3. Example 1: regularity, field, projector and the descending symmetry.
fn example1_checks() -> Verdict {
    const FIELD_TOL: f64 = 1e-12;
    const SYM_TOL: f64 = 1e-8;
    let spec = scenario("example1", &[]);
    let a = spec.constant("a").map_err(|e| e.to_string())?;
    let opts = Options::default();
    let points = commands::sample_points(&spec, 20, &opts).map_err(|e| e.to_string())?;
    let report = commands::analyze(&spec, &points, &opts).map_err(|e| e.to_string())?;
    let entries = report["points"].as_array().ok_or("no points in report")?;
    ensure(entries.len() == 20, || "expected 20 analyzed points".into())?;
    let mut worst: f64 = 0.0;
    for (e, x) in entries.iter().zip(&points) {
        let c = &e["constrained"];
        ensure(c["regular"] == Value::Bool(true), || format!("not regular at {x:?}"))?;
        ensure(c["D"] == serde_json::json!([[1.0]]), || format!("D = {} at {x:?}", c["D"]))?;
        let field: Vec<f64> = c["field"].as_array().ok_or("no field")?.iter().map(|v| v.as_f64().unwrap()).collect();
        worst = worst.max((field[0] - (1.0 - a * x[0])).abs()).max(field[1].abs());
        let (p, _) = gnh(&spec).projectors_at(x).map_err(|e| e.to_string())?;
        let img = p * DVector::from_vec(vec![0.0, 1.0]);
        worst = worst.max((img[0] + x[0]).abs()).max(img[1].abs());
    }
    ensure(worst <= FIELD_TOL, || format!("field/projector error {worst:e}"))?;

    let sym = commands::check_symmetries(&spec, Some("descending"), 200, &opts).map_err(|e| e.to_string())?;
    let d = &sym.report["symmetries"]["descending"];
    ensure(d["symmetric"] == Value::Bool(true), || format!("not a base symmetry: {d}"))?;
    ensure(d["descends"] == Value::Bool(true), || format!("does not descend: {d}"))?;
    let restriction = d["restriction_residual"].as_f64().ok_or("no restriction residual")?;
    ensure(restriction <= SYM_TOL, || format!("restriction residual {restriction:e}"))?;
    Ok(format!("field/projector error {worst:.2e}, restriction residual {restriction:.2e}"))
}

/// Minkowski-timelike points; on the unit shell when `on_shell`.
fn timelike(rng: &mut StdRng, count: usize, on_shell: bool) -> Vec<Vec<f64>> {
    (0..count)
        .map(|_| {
            let q: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let s: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let speed2: f64 = s.iter().map(|v| v * v).sum();
            let stretch = if on_shell { 1.0 } else { rng.gen_range(0.5..2.0) };
            let v1 = (1.0 + speed2).sqrt();
            let mut x = q;
            x.push(v1 * stretch);
            x.extend(s.iter().map(|v| v * stretch));
            x
        })
        .collect()
}

// 4. Relativistic quadratic Lagrangian: multiplier and geodesics.
fn relativistic_l2() -> Verdict {
    const MULT_TOL: f64 = 1e-9;
    const LINE_TOL: f64 = 1e-8;
    let mut rng = StdRng::seed_from_u64(4);
    let opts = Options::default();
    let spec = scenario("relparticle-L2", &[("U", "k*q1"), ("k", "1")]);
    let points = timelike(&mut rng, 50, true);
    let report = commands::analyze(&spec, &points, &opts).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for (e, x) in report["points"].as_array().ok_or("no points")?.iter().zip(&points) {
        let lambda = e["constrained"]["lambda"][0].as_f64().ok_or_else(|| format!("no multiplier at {x:?}: {e}"))?;
        worst = worst.max((lambda + x[4]).abs());
    }
    ensure(worst <= MULT_TOL, || format!("multiplier error {worst:e}"))?;

    let free = scenario("relparticle-L2", &[]);
    let mut line: f64 = 0.0;
    let mut drift: f64 = 0.0;
    for x0 in timelike(&mut rng, 3, true) {
        let (traj, summary) = commands::simulate(&free, &x0, 5.0, 1e-3, &opts).map_err(|e| e.to_string())?;
        let end = traj.last_state();
        for i in 0..4 {
            line = line.max((end[i] - (x0[i] + 5.0 * x0[4 + i])).abs());
        }
        drift = drift.max(traj.max_drift()).max(summary["monitors"]["shell"].as_f64().unwrap_or(f64::INFINITY));
    }
    ensure(line <= LINE_TOL, || format!("endpoint deviation {line:e}"))?;
    ensure(drift <= LINE_TOL, || format!("shell drift {drift:e}"))?;
    Ok(format!("multiplier error {worst:.2e}, endpoint deviation {line:.2e}, shell drift {drift:.2e}"))
}

// 5. Relativistic square-root Lagrangian: kernel, inconsistency, SODE field.
fn relativistic_l1() -> Verdict {
    const FIELD_TOL: f64 = 1e-8;
    let mut rng = StdRng::seed_from_u64(5);
    let tol = Tolerances::default();
    let free = scenario("relparticle-L1", &[]);
    for x in timelike(&mut rng, 50, false) {
        let r = rank(&free.base().matrix_at(&x).map_err(|e| e.to_string())?, &tol);
        ensure(r == 6, || format!("rank {r} at {x:?}"))?;
    }
    let charged = scenario("relparticle-L1", &[("U", "k*q1"), ("k", "1")]);
    for x in timelike(&mut rng, 50, false) {
        let c = charged.base().consistency_at(&x, &tol).map_err(|e| e.to_string())?;
        ensure(!c.consistent, || format!("consistent at {x:?}"))?;
    }
    let l2 = scenario("relparticle-L2", &[]);
    let lagrangian = |s: &Spec| -> LagrangianModel {
        match &s.dynamics {
            lsys::spec::Dynamics::Lagrangian(m) => m.clone(),
            _ => unreachable!("Lagrangian scenario"),
        }
    };
    let model = lagrangian(&free);
    let g1 = gnh(&free);
    let mut worst: f64 = 0.0;
    for x in timelike(&mut rng, 50, true) {
        let s = sode_solve_at(&model, g1.manifold(), g1.forces(), &x, &tol).map_err(|e| e.to_string())?;
        ensure(s.unique, || format!("field not unique at {x:?}"))?;
        let (reference, _) = gnh(&l2).field_at(&x).map_err(|e| e.to_string())?;
        worst = worst.max((s.field - reference).amax());
    }
    ensure(worst <= FIELD_TOL, || format!("field mismatch {worst:e}"))?;
    Ok(format!("rank 6 of 8 at 50 points, inconsistent at 50 points, SODE vs quadratic field {worst:.2e}"))
}

/// Rank by Gaussian elimination with complete pivoting.
fn gauss_rank(m: &DMatrix<f64>) -> usize {
    let mut a = m.clone();
    let (rows, cols) = a.shape();
    let scale = a.amax().max(1e-300);
    let mut r = 0;
    while r < rows.min(cols) {
        let mut best = (0.0, 0, 0);
        for i in r..rows {
            for j in r..cols {
                if a[(i, j)].abs() > best.0 {
                    best = (a[(i, j)].abs(), i, j);
                }
            }
        }
        if best.0 <= 1e-9 * scale {
            break;
        }
        a.swap_rows(r, best.1);
        a.swap_columns(r, best.2);
        for i in r + 1..rows {
            let factor = a[(i, r)] / a[(r, r)];
            for j in r..cols {
                a[(i, j)] -= factor * a[(r, j)];
            }
        }
        r += 1;
    }
    r
}

fn hcat(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}

fn random(rng: &mut StdRng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0))
}

/// Columns spanning a subspace that shares `shared` directions with `other`.
fn overlapping(rng: &mut StdRng, n: usize, dim: usize, other: &DMatrix<f64>, shared: usize) -> DMatrix<f64> {
    let shared = shared.min(dim).min(other.ncols());
    let mut cols = random(rng, n, dim);
    if shared > 0 {
        let mix = random(rng, other.ncols(), shared);
        cols.columns_mut(0, shared).copy_from(&(other * mix));
    }
    cols
}

// 6. Linear-algebra predicates against a concatenated-rank oracle.
fn appendix_properties() -> Verdict {
    const CASES: usize = 500;
    let mut rng = StdRng::seed_from_u64(6);
    let tol = Tolerances::default();
    let start = Instant::now();
    let mut disagreements = Vec::new();

    for case in 0..CASES {
        let n = rng.gen_range(2..=6);
        let e_dim = rng.gen_range(0..=n);
        let q = rng.gen_range(1..=n);
        let e = random(&mut rng, n, e_dim);
        let shared = rng.gen_range(0..=q);
        let f = overlapping(&mut rng, n, q, &e, shared);
        let alpha = cokernel_basis(SubspaceBasis::new(e.clone(), &tol).map_err(|x| x.to_string())?.matrix(), &tol);
        let c = subspace_classify(&alpha, &SubspaceBasis::new(f.clone(), &tol).map_err(|x| x.to_string())?, &tol)
            .map_err(|x| x.to_string())?;
        let joint = gauss_rank(&hcat(&e, &f));
        if c.sum_full != (joint == n) || c.intersection_zero != (joint == e_dim + q) {
            disagreements.push(format!("classify case {case}"));
        }
    }

    for case in 0..2 * CASES {
        let n = rng.gen_range(1..=5);
        let m = rng.gen_range(1..=5);
        let rank_f = rng.gen_range(0..=n.min(m));
        let f = random(&mut rng, m, rank_f) * random(&mut rng, rank_f, n);
        let e0_dim = rng.gen_range(0..=n);
        let e0 = random(&mut rng, n, e0_dim);
        let f0_dim = rng.gen_range(0..=m);
        let f0 = random(&mut rng, m, f0_dim);
        let qm = QuotientMap::new(
            &f,
            &SubspaceBasis::new(e0.clone(), &tol).map_err(|x| x.to_string())?,
            &SubspaceBasis::new(f0.clone(), &tol).map_err(|x| x.to_string())?,
            &tol,
        )
        .map_err(|x| x.to_string())?;
        let reachable = hcat(&(&f * &e0), &f0);
        let joint = gauss_rank(&reachable);
        let injective = joint == e0_dim + f0_dim;
        if case < CASES {
            if qm.is_injective() != injective || qm.is_surjective() != (joint == m) {
                disagreements.push(format!("quotient map case {case}"));
            }
        } else {
            let b = if rng.gen_bool(0.5) && reachable.ncols() > 0 {
                &reachable * DVector::from_fn(reachable.ncols(), |_, _| rng.gen_range(-1.0..1.0))
            } else {
                DVector::from_fn(m, |_, _| rng.gen_range(-1.0..1.0))
            };
            let set = qm.solve(&b).map_err(|x| x.to_string())?;
            let with_b = gauss_rank(&hcat(&reachable, &DMatrix::from_column_slice(m, 1, b.as_slice())));
            if set.is_consistent() != (with_b == joint) || set.is_unique() != injective {
                disagreements.push(format!("quotient solve case {}", case - CASES));
            }
        }
    }
    let elapsed = start.elapsed();
    ensure(disagreements.is_empty(), || format!("{} disagreements: {:?}", disagreements.len(), disagreements))?;
    within(elapsed, 10.0, "property suite")?;
    Ok(format!("3 × {CASES} cases agree, {:.2} s", elapsed.as_secs_f64()))
}

// 7. Projector path against multiplier path, and the two classifications.
fn cross_module_coherence() -> Verdict {
    const TOL: f64 = 1e-10;
    let opts = Options::default();
    let tol = opts.tol;
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    for (name, params) in [
        ("example1", vec![]),
        ("rosenberg", vec![]),
        ("relparticle-L2", vec![]),
        ("relparticle-L2", vec![("U", "k*q1"), ("k", "1")]),
    ] {
        let spec = scenario(name, &params);
        let g = gnh(&spec);
        for x in commands::sample_points(&spec, 50, &opts).map_err(|e| e.to_string())? {
            let class = g.classify_at(&x).map_err(|e| e.to_string())?;
            if !class.regular {
                continue;
            }
            let y = g.unconstrained_field_at(&x).map_err(|e| e.to_string())?;
            let (p, _) = g.projectors_at(&x).map_err(|e| e.to_string())?;
            let via_multipliers = g.constrained_field_at(&x, &y).map_err(|e| e.to_string())?;
            worst = worst.max((p * &y - via_multipliers).amax());

            let dphi = g.manifold().jacobian(&x).map_err(|e| e.to_string())?;
            let gamma = g.h_frame_at(&x).map_err(|e| e.to_string())?;
            let alpha = SubspaceBasis::new(dphi.transpose(), &tol).map_err(|e| e.to_string())?;
            let frame = SubspaceBasis::new(gamma, &tol).map_err(|e| e.to_string())?;
            let lemma = subspace_classify(&alpha, &frame, &tol).map_err(|e| e.to_string())?;
            ensure(
                lemma.sum_full == class.surjective
                    && lemma.intersection_zero == class.injective
                    && lemma.direct_sum == class.regular
                    && lemma.rank_d == class.rank_d,
                || format!("{name}: classifications differ at {x:?}"),
            )?;
            checked += 1;
        }
    }
    ensure(checked == 200, || format!("only {checked} of 200 points regular"))?;
    ensure(worst <= TOL, || format!("projector path differs by {worst:e}"))?;
    Ok(format!("{checked} regular points, max |P·Y − X| {worst:.2e}"))
}

/// Random expression text over `x, y, z`.
fn random_expr(rng: &mut StdRng, depth: usize) -> String {
    if depth == 0 || rng.gen_bool(0.25) {
        return if rng.gen_bool(0.6) {
            ["x", "y", "z"][rng.gen_range(0..3)].to_string()
        } else {
            format!("{}", (rng.gen_range(-12..=12) as f64) / 4.0)
        };
    }
    let a = random_expr(rng, depth - 1);
    match rng.gen_range(0..9) {
        0 => format!("-({a})"),
        1 => format!("({a}) + ({})", random_expr(rng, depth - 1)),
        2 => format!("({a}) - ({})", random_expr(rng, depth - 1)),
        3 | 4 => format!("({a}) * ({})", random_expr(rng, depth - 1)),
        5 => format!("({a}) / ({})", random_expr(rng, depth - 1)),
        6 => format!("({a})^{}", rng.gen_range(2..=3)),
        _ => {
            let f = ["sin", "cos", "tan", "exp", "log", "sqrt", "asinh", "abs"][rng.gen_range(0..8)];
            format!("{f}({a})")
        }
    }
}

/// Richardson-extrapolated central difference of `f` along coordinate `i`.
fn richardson(f: &ExpressionField, x: &[f64], i: usize, h: f64) -> Option<f64> {
    let central = |h: f64| -> Option<f64> {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[i] += h;
        xm[i] -= h;
        let d = (f.eval_scalar(&xp).ok()? - f.eval_scalar(&xm).ok()?) / (2.0 * h);
        d.is_finite().then_some(d)
    };
    Some((4.0 * central(h / 2.0)? - central(h)?) / 3.0)
}

fn rk4_endpoint_error(dt: f64) -> f64 {
    // Constrained Rosenberg motion has a closed form: y' is constant,
    // x'·sqrt(y² + 1) is constant and z' = y·x'.
    let spec = scenario("rosenberg", &[]);
    let x0 = [0.0, 0.5, 0.0, 1.0, 1.0, 0.5];
    let t1 = 1.0;
    let (traj, _) = commands::simulate(&spec, &x0, t1, dt, &Options::default()).expect("integration");
    let (y0, yd) = (x0[1], x0[4]);
    let c = x0[3] * (y0 * y0 + 1.0).sqrt();
    let y = y0 + yd * t1;
    let exact = [
        x0[0] + c / yd * (y.asinh() - y0.asinh()),
        y,
        x0[2] + c / yd * ((y * y + 1.0).sqrt() - (y0 * y0 + 1.0).sqrt()),
        c / (y * y + 1.0).sqrt(),
        yd,
        y * c / (y * y + 1.0).sqrt(),
    ];
    traj.last_state().iter().zip(exact).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
}

fn run_cli(args: &[&str]) -> Vec<u8> {
    let out = Command::new(env!("CARGO_BIN_EXE_lsys")).args(args).output().expect("binary runs");
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out.stdout
}

// 8. Derivatives, integrator order and report determinism.
fn numerics_hygiene() -> Verdict {
    const REL: f64 = 1e-6;
    const EXPRESSIONS: usize = 1000;
    let mut rng = StdRng::seed_from_u64(8);
    let vars = var_list(&["x", "y", "z"]);
    let mut tested = 0;
    let mut generated = 0;
    let mut worst: f64 = 0.0;
    while tested < EXPRESSIONS {
        generated += 1;
        ensure(generated < 20 * EXPRESSIONS, || "too few expressions admit a finite-difference oracle".into())?;
        let text = random_expr(&mut rng, 4);
        let f = ExpressionField::parse_scalar(&text, vars.clone()).map_err(|e| format!("{text}: {e}"))?;
        // A point where f is smooth enough for the difference oracle to be
        // accurate: two step sizes agree to well below the tolerance.
        let mut found = None;
        for _ in 0..50 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let Ok(v) = f.eval_scalar(&x) else { continue };
            if !v.is_finite() || v.abs() > 1e6 {
                continue;
            }
            let mut fd = Vec::with_capacity(3);
            for i in 0..3 {
                let h = 1e-3 * x[i].abs().max(1.0);
                match (richardson(&f, &x, i, h), richardson(&f, &x, i, 2.0 * h)) {
                    (Some(a), Some(b)) if (a - b).abs() <= 1e-3 * REL * a.abs().max(1.0) => fd.push(a),
                    _ => break,
                }
            }
            if fd.len() == 3 {
                found = Some((x, fd));
                break;
            }
        }
        let Some((x, fd)) = found else { continue };
        let ad = f.jacobian_dual(&x).map_err(|e| format!("{text}: {e}"))?;
        for i in 0..3 {
            let err = (ad[(0, i)] - fd[i]).abs() / ad[(0, i)].abs().max(1.0);
            ensure(err <= REL, || format!("{text} at {x:?}: d/d{} AD {} vs FD {}", i, ad[(0, i)], fd[i]))?;
            worst = worst.max(err);
        }
        tested += 1;
    }

    let ratio = rk4_endpoint_error(0.1) / rk4_endpoint_error(0.05);
    ensure((12.0..=20.0).contains(&ratio), || format!("RK4 error ratio {ratio}"))?;

    for args in [
        &["analyze", "--scenario", "rosenberg"][..],
        &["analyze", "--scenario", "relparticle-L1", "--param", "U=k*q1,k=1"][..],
        &["check-symmetry", "--scenario", "example1"][..],
        &["check-constant", "--scenario", "relparticle-L2"][..],
    ] {
        let (a, b) = (run_cli(args), run_cli(args));
        ensure(!a.is_empty() && a == b, || format!("{args:?}: reports differ between runs"))?;
    }
    Ok(format!(
        "{tested} expressions (of {generated} drawn), max relative AD-FD gap {worst:.2e}; RK4 ratio {ratio:.2}; 4 reports byte-identical"
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 8] = [
        ("rosenberg field oracle", rosenberg_field_oracle),
        ("rosenberg conservation", rosenberg_conservation),
        ("example 1 analysis and symmetry", example1_checks),
        ("relativistic quadratic lagrangian", relativistic_l2),
        ("relativistic square-root lagrangian", relativistic_l1),
        ("subspace and quotient predicates", appendix_properties),
        ("cross-module coherence", cross_module_coherence),
        ("numerics hygiene", numerics_hygiene),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let verdict = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        match verdict {
            Ok(detail) => println!("PASS {}: {name} ({detail})", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {}: {name} ({why})", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
