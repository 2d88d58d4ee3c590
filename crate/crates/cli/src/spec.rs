//! Loader for `.lss` system descriptions.
//!
//! The format is line-oriented: `[section]` or `[section NAME]` headers,
//! `key = value` entries and `#` comments. List values separate their items
//! with top-level commas. Entries of `[params]` may refer to each other and to
//! the state variables; they are substituted into every expression after
//! parsing, so the resulting fields only mention state variables.
//!
//! ```text
//! [vars]
//! state = x, y
//! [params]
//! a = 2
//! [system]
//! f = 1, y
//! [constraints]
//! phi = y - a
//! [forces]
//! delta = x, 1
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Arc;

use lsys_core::expr::{self, Expr, ExpressionField, Func};
use lsys_core::lagrangian::{chetaev_frame, LagrangianModel};
use lsys_core::linsing::LinearlySingularSystem;
use lsys_core::nonholo::{ForceFrame, GeneralizedNonholonomicSystem, SubmanifoldSpec};
use lsys_core::symmetry::SymmetryCandidate;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line} [{section}]: {message}")]
    At { line: usize, section: String, message: String },
    #[error("{0}")]
    Invalid(String),
}

pub type SpecResult<T> = Result<T, SpecError>;

#[derive(Debug, Clone)]
pub enum Dynamics {
    System(LinearlySingularSystem),
    Lagrangian(LagrangianModel),
}

#[derive(Debug, Clone)]
pub struct SymmetrySpec {
    pub name: String,
    pub candidate: SymmetryCandidate,
    pub expect_symmetry: Option<bool>,
    pub expect_descends: Option<bool>,
    /// Expected value of the candidate on `M`.
    pub restriction: Option<ExpressionField>,
}

#[derive(Debug, Clone)]
pub struct ConstantSpec {
    pub name: String,
    pub h: ExpressionField,
    pub expect_conserved: Option<bool>,
}

/// A validated system description.
#[derive(Debug, Clone)]
pub struct Spec {
    pub name: String,
    pub vars: Arc<[String]>,
    pub dynamics: Dynamics,
    /// Present when the file has `[constraints]` or `[forces]`.
    pub nonholonomic: Option<GeneralizedNonholonomicSystem>,
    /// Sampling box, one `(lo, hi)` per variable.
    pub sample: Vec<(f64, f64)>,
    pub symmetries: Vec<SymmetrySpec>,
    pub constants: Vec<ConstantSpec>,
    pub multiplier_scale: Option<f64>,
    scope: Scope,
}

impl Spec {
    pub fn load(path: &Path, overrides: &[(String, String)]) -> SpecResult<Spec> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| SpecError::Io { path: path.display().to_string(), source })?;
        let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        Spec::parse(&name, &text, overrides)
    }

    pub fn parse(name: &str, text: &str, overrides: &[(String, String)]) -> SpecResult<Spec> {
        let sections = split_sections(text)?;
        build(name, &sections, overrides)
    }

    pub fn n(&self) -> usize {
        self.vars.len()
    }

    /// The unconstrained system.
    pub fn base(&self) -> &LinearlySingularSystem {
        match &self.dynamics {
            Dynamics::System(s) => s,
            Dynamics::Lagrangian(m) => m.system(),
        }
    }

    pub fn manifold(&self) -> Option<&SubmanifoldSpec> {
        self.nonholonomic.as_ref().map(|g| g.manifold())
    }

    /// Evaluates an expression of the parameters alone.
    pub fn constant(&self, text: &str) -> SpecResult<f64> {
        self.scope.constant(text).map_err(SpecError::Invalid)
    }

    /// Parses `name=value,...`. Unassigned coordinates take the centre of the
    /// sampling box; the mask marks the assigned ones.
    pub fn point_from_assignments(&self, text: &str) -> SpecResult<(Vec<f64>, Vec<bool>)> {
        let mut x: Vec<f64> = self.sample.iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect();
        let mut given = vec![false; self.n()];
        for item in split_list(text) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| SpecError::Invalid(format!("expected name=value, got `{item}`")))?;
            let k = k.trim();
            let i = self
                .vars
                .iter()
                .position(|n| n == k)
                .ok_or_else(|| SpecError::Invalid(format!("unknown variable `{k}`")))?;
            if given[i] {
                return Err(SpecError::Invalid(format!("variable `{k}` assigned twice")));
            }
            x[i] = self.constant(v.trim())?;
            given[i] = true;
        }
        Ok((x, given))
    }
}

/// Splits `--param` style `k=v,k=v` text into pairs.
pub fn parse_assignments(text: &str) -> SpecResult<Vec<(String, String)>> {
    split_list(text)
        .into_iter()
        .map(|item| match item.split_once('=') {
            Some((k, v)) if !k.trim().is_empty() && !v.trim().is_empty() => Ok((k.trim().to_string(), v.trim().to_string())),
            _ => Err(SpecError::Invalid(format!("expected name=value, got `{item}`"))),
        })
        .collect()
}

/// Splits on commas outside parentheses.
pub fn split_list(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    for ch in text.chars() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(cur.trim().to_string());
                cur.clear();
                continue;
            }
            _ => {}
        }
        cur.push(ch);
    }
    if !cur.trim().is_empty() || !out.is_empty() {
        out.push(cur.trim().to_string());
    }
    out
}

#[derive(Debug, Clone)]
struct Entry {
    key: String,
    value: String,
    line: usize,
}

#[derive(Debug, Clone)]
struct Section {
    kind: String,
    name: Option<String>,
    line: usize,
    entries: Vec<Entry>,
}

impl Section {
    fn label(&self) -> String {
        match &self.name {
            Some(n) => format!("{} {n}", self.kind),
            None => self.kind.clone(),
        }
    }

    fn err(&self, line: usize, message: impl Into<String>) -> SpecError {
        SpecError::At { line, section: self.label(), message: message.into() }
    }

    fn all(&self, key: &str) -> impl Iterator<Item = &Entry> {
        let key = key.to_string();
        self.entries.iter().filter(move |e| e.key == key)
    }

    fn one(&self, key: &str) -> SpecResult<Option<&Entry>> {
        let mut it = self.all(key);
        let first = it.next();
        if let Some(dup) = it.next() {
            return Err(self.err(dup.line, format!("`{key}` given more than once")));
        }
        Ok(first)
    }

    fn require(&self, key: &str) -> SpecResult<&Entry> {
        self.one(key)?.ok_or_else(|| self.err(self.line, format!("missing `{key}`")))
    }

    fn check_keys(&self, allowed: &[&str]) -> SpecResult<()> {
        match self.entries.iter().find(|e| !allowed.contains(&e.key.as_str())) {
            Some(e) => Err(self.err(e.line, format!("unknown key `{}`", e.key))),
            None => Ok(()),
        }
    }

    fn flag(&self, key: &str) -> SpecResult<Option<bool>> {
        match self.one(key)? {
            None => Ok(None),
            Some(e) => match e.value.as_str() {
                "true" => Ok(Some(true)),
                "false" => Ok(Some(false)),
                other => Err(self.err(e.line, format!("`{key}` must be true or false, got `{other}`"))),
            },
        }
    }
}

const KINDS: &[&str] = &["vars", "params", "system", "lagrangian", "constraints", "forces", "symmetry", "constant", "sample", "report"];
const NAMED: &[&str] = &["symmetry", "constant"];

fn split_sections(text: &str) -> SpecResult<Vec<Section>> {
    let mut sections: Vec<Section> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(inner) = content.strip_prefix('[') {
            let inner = inner
                .strip_suffix(']')
                .ok_or_else(|| SpecError::At { line, section: String::new(), message: "unterminated section header".into() })?;
            let mut words = inner.split_whitespace();
            let kind = words.next().unwrap_or("").to_string();
            let name = words.next().map(str::to_string);
            let header_err = |message: String| SpecError::At { line, section: inner.trim().to_string(), message };
            if words.next().is_some() {
                return Err(header_err("too many words in section header".into()));
            }
            if !KINDS.contains(&kind.as_str()) {
                return Err(header_err(format!("unknown section `{kind}`")));
            }
            let named = NAMED.contains(&kind.as_str());
            if named && name.is_none() {
                return Err(header_err(format!("section `{kind}` needs a name")));
            }
            if !named && name.is_some() {
                return Err(header_err(format!("section `{kind}` takes no name")));
            }
            if let Some(prev) = sections.iter().find(|s| s.kind == kind && s.name == name) {
                return Err(header_err(format!("duplicate section (first at line {})", prev.line)));
            }
            sections.push(Section { kind, name, line, entries: Vec::new() });
            continue;
        }
        let section = sections
            .last_mut()
            .ok_or_else(|| SpecError::At { line, section: String::new(), message: "entry outside any section".into() })?;
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| SpecError::At { line, section: section.label(), message: "expected `key = value`".into() })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(section.err(line, "expected `key = value`"));
        }
        section.entries.push(Entry { key: key.to_string(), value: value.to_string(), line });
    }
    Ok(sections)
}

/// Variables and resolved parameters.
#[derive(Debug, Clone)]
struct Scope {
    vars: Arc<[String]>,
    /// Variables followed by parameter names, the parsing namespace.
    names: Vec<String>,
    /// Resolved parameter expressions, in `names` order after the variables.
    params: Vec<Expr>,
}

impl Scope {
    fn parse(&self, text: &str) -> Result<Expr, String> {
        let e = expr::parse(text, &self.names).map_err(|e| e.to_string())?;
        let n = self.vars.len();
        Ok(e.substitute(&|i| if i < n { Expr::Var(i) } else { self.params[i - n].clone() }))
    }

    fn constant(&self, text: &str) -> Result<f64, String> {
        let e = self.parse(text)?;
        if e.max_var().is_some() {
            return Err(format!("`{text}` must not depend on the state variables"));
        }
        e.eval(&vec![0.0; self.vars.len()]).map_err(|e| e.describe(&self.vars))
    }
}

struct ParamSource {
    text: String,
    line: Option<usize>,
}

fn resolve_params(
    vars: Arc<[String]>,
    section: Option<&Section>,
    overrides: &[(String, String)],
) -> SpecResult<Scope> {
    let mut sources: BTreeMap<String, ParamSource> = BTreeMap::new();
    if let Some(s) = section {
        for e in &s.entries {
            if sources.insert(e.key.clone(), ParamSource { text: e.value.clone(), line: Some(e.line) }).is_some() {
                return Err(s.err(e.line, format!("parameter `{}` defined twice", e.key)));
            }
        }
    }
    for (k, v) in overrides {
        sources.insert(k.clone(), ParamSource { text: v.clone(), line: None });
    }
    let locate = |name: &str, message: String| -> SpecError {
        match (section, sources.get(name).and_then(|p| p.line)) {
            (Some(s), Some(line)) => s.err(line, message),
            _ => SpecError::Invalid(format!("--param {name}: {message}")),
        }
    };
    for name in sources.keys() {
        if vars.contains(name) {
            return Err(locate(name, format!("parameter `{name}` shadows a variable")));
        }
        check_identifier(name).map_err(|m| locate(name, m))?;
    }

    let mut names: Vec<String> = vars.to_vec();
    names.extend(sources.keys().cloned());
    let n = vars.len();
    let raw: Vec<Expr> = sources
        .iter()
        .map(|(name, p)| expr::parse(&p.text, &names).map_err(|e| locate(name, e.to_string())))
        .collect::<SpecResult<_>>()?;

    #[derive(Clone, Copy, PartialEq)]
    enum State {
        Todo,
        Active,
        Done,
    }
    fn visit(
        j: usize,
        n: usize,
        raw: &[Expr],
        state: &mut [State],
        done: &mut [Option<Expr>],
        stack: &mut Vec<usize>,
    ) -> Result<(), Vec<usize>> {
        match state[j] {
            State::Done => return Ok(()),
            State::Active => {
                let from = stack.iter().position(|&s| s == j).unwrap_or(0);
                let mut cycle = stack[from..].to_vec();
                cycle.push(j);
                return Err(cycle);
            }
            State::Todo => {}
        }
        state[j] = State::Active;
        stack.push(j);
        for i in n..n + raw.len() {
            if raw[j].depends_on(i) {
                visit(i - n, n, raw, state, done, stack)?;
            }
        }
        stack.pop();
        let resolved = raw[j].substitute(&|i| if i < n { Expr::Var(i) } else { done[i - n].clone().expect("resolved") });
        done[j] = Some(resolved);
        state[j] = State::Done;
        Ok(())
    }

    let mut state = vec![State::Todo; raw.len()];
    let mut done: Vec<Option<Expr>> = vec![None; raw.len()];
    for j in 0..raw.len() {
        if let Err(cycle) = visit(j, n, &raw, &mut state, &mut done, &mut Vec::new()) {
            let path: Vec<&str> = cycle.iter().map(|&c| names[n + c].as_str()).collect();
            return Err(locate(path[0], format!("parameters depend on each other: {}", path.join(" -> "))));
        }
    }
    Ok(Scope { vars, names, params: done.into_iter().map(|e| e.expect("resolved")).collect() })
}

fn check_identifier(name: &str) -> Result<(), String> {
    if Func::from_name(name).is_some() {
        return Err(format!("`{name}` is a function name"));
    }
    let single = [name.to_string()];
    match expr::parse(name, &single) {
        Ok(Expr::Var(0)) => Ok(()),
        _ => Err(format!("`{name}` is not a valid name")),
    }
}

fn parse_vars(s: &Section, lagrangian: bool) -> SpecResult<Arc<[String]>> {
    let names: Vec<(String, usize)> = if lagrangian {
        s.check_keys(&["q", "v"])?;
        let q = s.require("q")?;
        let v = s.require("v")?;
        let (qs, vs) = (split_list(&q.value), split_list(&v.value));
        if qs.len() != vs.len() {
            return Err(s.err(v.line, format!("{} positions but {} velocities", qs.len(), vs.len())));
        }
        qs.into_iter().map(|n| (n, q.line)).chain(vs.into_iter().map(|n| (n, v.line))).collect()
    } else {
        s.check_keys(&["state"])?;
        let st = s.require("state")?;
        split_list(&st.value).into_iter().map(|n| (n, st.line)).collect()
    };
    let mut seen = BTreeSet::new();
    for (n, line) in &names {
        check_identifier(n).map_err(|m| s.err(*line, m))?;
        if !seen.insert(n.clone()) {
            return Err(s.err(*line, format!("variable `{n}` declared twice")));
        }
    }
    if names.is_empty() {
        return Err(s.err(s.line, "no variables declared"));
    }
    Ok(names.into_iter().map(|(n, _)| n).collect())
}

fn parse_list(scope: &Scope, s: &Section, e: &Entry, len: Option<usize>) -> SpecResult<Vec<Expr>> {
    let items = split_list(&e.value);
    if let Some(len) = len {
        if items.len() != len {
            return Err(s.err(e.line, format!("`{}` needs {len} entries, got {}", e.key, items.len())));
        }
    }
    items.iter().map(|t| scope.parse(t).map_err(|m| s.err(e.line, m))).collect()
}

fn parse_rows(scope: &Scope, s: &Section, key: &str, rows: usize, cols: usize) -> SpecResult<Option<ExpressionField>> {
    let entries: Vec<&Entry> = s.all(key).collect();
    if entries.is_empty() {
        return Ok(None);
    }
    if entries.len() != rows {
        return Err(s.err(entries[0].line, format!("`{key}` needs {rows} rows, got {}", entries.len())));
    }
    let mut all = Vec::with_capacity(rows * cols);
    for e in entries {
        all.extend(parse_list(scope, s, e, Some(cols))?);
    }
    ExpressionField::matrix(scope.vars.clone(), rows, cols, all).map(Some).map_err(|err| s.err(s.line, err.to_string()))
}

fn build(name: &str, sections: &[Section], overrides: &[(String, String)]) -> SpecResult<Spec> {
    let find = |kind: &str| sections.iter().find(|s| s.kind == kind);
    let missing = |what: &str| SpecError::Invalid(format!("missing [{what}] section"));

    let (system, lagrangian) = (find("system"), find("lagrangian"));
    if let (Some(_), Some(l)) = (system, lagrangian) {
        return Err(l.err(l.line, "a file may have [system] or [lagrangian], not both"));
    }
    if system.is_none() && lagrangian.is_none() {
        return Err(SpecError::Invalid("missing [system] or [lagrangian] section".into()));
    }
    let vars_section = find("vars").ok_or_else(|| missing("vars"))?;
    let vars = parse_vars(vars_section, lagrangian.is_some())?;
    let n = vars.len();
    let scope = resolve_params(vars.clone(), find("params"), overrides)?;

    let dynamics = if let Some(s) = lagrangian {
        s.check_keys(&["L"])?;
        let e = s.require("L")?;
        let l = scope.parse(&e.value).map_err(|m| s.err(e.line, m))?;
        Dynamics::Lagrangian(LagrangianModel::new(vars.clone(), l).map_err(|err| s.err(e.line, err.to_string()))?)
    } else {
        let s = system.expect("checked above");
        s.check_keys(&["A", "f"])?;
        let fe = s.require("f")?;
        let f = parse_list(&scope, s, fe, None)?;
        let k = f.len();
        let f = ExpressionField::vector(vars.clone(), f).map_err(|err| s.err(fe.line, err.to_string()))?;
        let a = match parse_rows(&scope, s, "A", k, n)? {
            Some(a) => a,
            None if k == n => ExpressionField::identity(vars.clone(), n),
            None => return Err(s.err(fe.line, format!("without `A`, `f` needs {n} entries, got {k}"))),
        };
        Dynamics::System(LinearlySingularSystem::new(a, f).map_err(|err| s.err(s.line, err.to_string()))?)
    };
    let base = match &dynamics {
        Dynamics::System(s) => s.clone(),
        Dynamics::Lagrangian(m) => m.system().clone(),
    };
    let k = base.k();

    let constraints = match find("constraints") {
        None => None,
        Some(s) => {
            s.check_keys(&["phi"])?;
            let mut phi = Vec::new();
            for e in s.all("phi") {
                phi.extend(parse_list(&scope, s, e, None)?);
            }
            if phi.is_empty() {
                return Err(s.err(s.line, "no constraints given"));
            }
            let field = ExpressionField::vector(vars.clone(), phi).map_err(|err| s.err(s.line, err.to_string()))?;
            Some((s, SubmanifoldSpec::new(field).map_err(|err| s.err(s.line, err.to_string()))?))
        }
    };

    let forces = match find("forces") {
        None => None,
        Some(s) => {
            s.check_keys(&["delta"])?;
            let columns = s
                .all("delta")
                .map(|e| {
                    let comps = parse_list(&scope, s, e, Some(k))?;
                    ExpressionField::vector(vars.clone(), comps).map_err(|err| s.err(e.line, err.to_string()))
                })
                .collect::<SpecResult<Vec<_>>>()?;
            Some(ForceFrame::new(columns).map_err(|err| s.err(s.line, err.to_string()))?)
        }
    };

    let nonholonomic = match (constraints, forces) {
        (None, None) => None,
        (constraints, forces) => {
            let forces = match (forces, &constraints, &dynamics) {
                (Some(f), _, _) => f,
                (None, Some((s, phi)), Dynamics::Lagrangian(model)) => {
                    chetaev_frame(model, phi, &[]).map_err(|err| s.err(s.line, err.to_string()))?
                }
                (None, Some((s, _)), Dynamics::System(_)) => {
                    return Err(s.err(s.line, "a [forces] section is required with [system]"));
                }
                (None, None, _) => unreachable!("handled by the outer match"),
            };
            let manifold = match constraints {
                Some((_, phi)) => phi,
                None => SubmanifoldSpec::whole(vars.clone()),
            };
            Some(GeneralizedNonholonomicSystem::new(base, manifold, forces).map_err(|err| SpecError::Invalid(err.to_string()))?)
        }
    };

    let mut sample = vec![(-1.0, 1.0); n];
    if let Some(s) = find("sample") {
        for e in &s.entries {
            let i = vars.iter().position(|v| *v == e.key).ok_or_else(|| s.err(e.line, format!("unknown variable `{}`", e.key)))?;
            let bounds = split_list(&e.value);
            if bounds.len() != 2 {
                return Err(s.err(e.line, "expected `lo, hi`"));
            }
            let lo = scope.constant(&bounds[0]).map_err(|m| s.err(e.line, m))?;
            let hi = scope.constant(&bounds[1]).map_err(|m| s.err(e.line, m))?;
            if !(lo < hi) {
                return Err(s.err(e.line, format!("empty range [{lo}, {hi}]")));
            }
            sample[i] = (lo, hi);
        }
    }

    let multiplier_scale = match find("report") {
        None => None,
        Some(s) => {
            s.check_keys(&["multiplier_scale"])?;
            match s.one("multiplier_scale")? {
                None => None,
                Some(e) => Some(scope.constant(&e.value).map_err(|m| s.err(e.line, m))?),
            }
        }
    };

    let mut symmetries = Vec::new();
    let mut constants = Vec::new();
    for s in sections {
        match s.kind.as_str() {
            "symmetry" => symmetries.push(parse_symmetry(&scope, s, k)?),
            "constant" => {
                s.check_keys(&["h", "expect_conserved"])?;
                let e = s.require("h")?;
                let h = scope.parse(&e.value).map_err(|m| s.err(e.line, m))?;
                constants.push(ConstantSpec {
                    name: s.name.clone().expect("named section"),
                    h: ExpressionField::scalar(vars.clone(), h).map_err(|err| s.err(e.line, err.to_string()))?,
                    expect_conserved: s.flag("expect_conserved")?,
                });
            }
            _ => {}
        }
    }

    Ok(Spec { name: name.to_string(), vars, dynamics, nonholonomic, sample, symmetries, constants, multiplier_scale, scope })
}

fn parse_symmetry(scope: &Scope, s: &Section, k: usize) -> SpecResult<SymmetrySpec> {
    s.check_keys(&["kind", "V", "map", "fibre", "expect_symmetry", "expect_descends", "restriction"])?;
    let n = scope.vars.len();
    let kind = s.require("kind")?;
    let key = match kind.value.as_str() {
        "infinitesimal" => "V",
        "finite" => "map",
        other => return Err(s.err(kind.line, format!("kind must be `finite` or `infinitesimal`, got `{other}`"))),
    };
    let wrong = if key == "V" { "map" } else { "V" };
    if let Some(e) = s.one(wrong)? {
        return Err(s.err(e.line, format!("`{wrong}` does not apply to a {} candidate", kind.value)));
    }
    let e = s.require(key)?;
    let base = ExpressionField::vector(scope.vars.clone(), parse_list(scope, s, e, Some(n))?)
        .map_err(|err| s.err(e.line, err.to_string()))?;
    let fibre = parse_rows(scope, s, "fibre", k, k)?;
    let candidate = if key == "V" {
        SymmetryCandidate::infinitesimal(base, fibre)
    } else {
        SymmetryCandidate::finite(base, fibre)
    }
    .map_err(|err| s.err(e.line, err.to_string()))?;
    let restriction = match s.one("restriction")? {
        None => None,
        Some(e) => Some(
            ExpressionField::vector(scope.vars.clone(), parse_list(scope, s, e, Some(n))?)
                .map_err(|err| s.err(e.line, err.to_string()))?,
        ),
    };
    let expect_descends = s.flag("expect_descends")?;
    if key == "map" && (expect_descends.is_some() || restriction.is_some()) {
        return Err(s.err(s.line, "descent applies to infinitesimal candidates only"));
    }
    Ok(SymmetrySpec {
        name: s.name.clone().expect("named section"),
        candidate,
        expect_symmetry: s.flag("expect_symmetry")?,
        expect_descends,
        restriction,
    })
}
