//! TOML run configuration.
//!
//! Parsing is total: every problem found is collected and reported together
//! as [`Error::Config`]. Unknown keys are warnings, not errors.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use log::warn;
use toml::de::{DeTable, DeValue};
use toml::{Table, Value};

use crate::benchmarks::{
    cavity_case, tgv_case, tgv_curved_case, CavityParams, StudyMode, TaylorGreenParams,
    WallTreatment,
};
use crate::error::{Error, Result};
use crate::nurbs::{elements_for_points, GeometryKind, GeometryParams, CURVED_QUAD_MAX_AMPLITUDE};
use crate::solver::{
    CaseSpec, ConvectionForm, InitMode, OperatorMode, SolverConfig, TauModel, TimeStep,
};

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "IGA_LBM_OUTPUT_DIR";

/// Registered benchmark cases.
pub const CASES: [&str; 2] = ["taylor_green", "lid_cavity"];

#[derive(Debug, Clone, PartialEq)]
pub enum CaseConfig {
    TaylorGreen(TaylorGreenParams),
    LidCavity(CavityParams),
}

impl CaseConfig {
    pub fn name(&self) -> &'static str {
        match self {
            CaseConfig::TaylorGreen(_) => "taylor_green",
            CaseConfig::LidCavity(_) => "lid_cavity",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeometryConfig {
    pub kind: GeometryKind,
    pub params: GeometryParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub vtk: bool,
    /// Write a snapshot every this many steps; 0 writes the final state only.
    pub vtk_every: usize,
    pub diagnostics: bool,
    /// Centerline CSVs and the reference comparison (lid_cavity only).
    pub centerlines: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub resolutions: Vec<usize>,
    pub final_time: f64,
    pub mode: StudyMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub case: CaseConfig,
    pub geometry: GeometryConfig,
    pub solver: SolverConfig,
    pub output: OutputConfig,
    pub study: StudyConfig,
    /// Unknown keys and similar non-fatal findings.
    pub warnings: Vec<String>,
}

impl RunConfig {
    /// Case definition on the configured geometry.
    pub fn case_spec(&self) -> Result<CaseSpec> {
        let g = &self.geometry;
        let degree = g.params.degree;
        let mut case = match (&self.case, g.kind) {
            (CaseConfig::TaylorGreen(p), GeometryKind::PeriodicBox) => tgv_case(p, 4 * degree, degree)?,
            (CaseConfig::TaylorGreen(p), GeometryKind::CurvedQuad) => {
                tgv_curved_case(p, 4 * degree, degree, g.params.amplitude)?
            }
            (CaseConfig::LidCavity(p), kind) if !kind.is_periodic() => {
                let mut c = cavity_case(p, 4 * degree, degree)?;
                c.geometry = kind;
                c
            }
            (case, kind) => {
                return Err(Error::Config(vec![format!(
                    "case {} cannot run on geometry {kind}",
                    case.name()
                )]))
            }
        };
        case.geometry_params = g.params.clone();
        Ok(case)
    }

    /// Points per direction of the configured geometry (first direction).
    pub fn points(&self) -> usize {
        let p = &self.geometry.params;
        if self.geometry.kind.is_periodic() {
            p.elements[0]
        } else {
            p.elements[0] + p.degree
        }
    }
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(vec![format!("cannot read {}: {e}", path.display())]))?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let root: Table = toml::from_str(text).map_err(|e| Error::Config(vec![format!("TOML syntax: {e}")]))?;
    let spans = DeTable::parse(text).ok();
    let mut r = Reader {
        text,
        spans: spans.as_ref().map(|s| s.get_ref()),
        errors: Vec::new(),
        warnings: Vec::new(),
    };
    let cfg = r.run_config(&root);
    for w in &r.warnings {
        warn!("config: {w}");
    }
    match cfg {
        Some(mut c) if r.errors.is_empty() => {
            c.warnings = r.warnings;
            Ok(c)
        }
        _ => Err(Error::Config(r.errors)),
    }
}

/// One `[section]` (or the root) being consumed.
struct Section<'a> {
    name: &'a str,
    table: Option<&'a Table>,
    seen: BTreeSet<&'a str>,
}

struct Reader<'t> {
    text: &'t str,
    spans: Option<&'t DeTable<'t>>,
    errors: Vec<String>,
    warnings: Vec<String>,
}

impl<'t> Reader<'t> {
    fn line_of(&self, section: &str, key: &str) -> Option<usize> {
        let mut table = self.spans?;
        if !section.is_empty() {
            let (_, v) = table.iter().find(|(k, _)| k.get_ref().as_ref() == section)?;
            match v.get_ref() {
                DeValue::Table(t) => table = t,
                _ => return None,
            }
        }
        let (k, _) = table.iter().find(|(k, _)| k.get_ref().as_ref() == key)?;
        let start = k.span().start.min(self.text.len());
        Some(self.text[..start].matches('\n').count() + 1)
    }

    fn field(&self, s: &Section, key: &str) -> String {
        let path = if s.name.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", s.name)
        };
        match self.line_of(s.name, key) {
            Some(l) => format!("line {l}: {path}"),
            None => path,
        }
    }

    fn error(&mut self, s: &Section, key: &str, msg: impl AsRef<str>) {
        let f = self.field(s, key);
        self.errors.push(format!("{f}: {}", msg.as_ref()));
    }

    fn section<'a>(&mut self, root: &'a Table, name: &'a str) -> Section<'a> {
        let table = match root.get(name) {
            None => None,
            Some(Value::Table(t)) => Some(t),
            Some(_) => {
                self.errors.push(format!("{name} must be a table"));
                None
            }
        };
        Section {
            name,
            table,
            seen: BTreeSet::new(),
        }
    }

    fn raw<'a>(&mut self, s: &mut Section<'a>, key: &'a str) -> Option<&'a Value> {
        s.seen.insert(key);
        s.table.and_then(|t| t.get(key))
    }

    fn f64_opt<'a>(&mut self, s: &mut Section<'a>, key: &'a str) -> Option<f64> {
        match self.raw(s, key)? {
            Value::Float(v) => Some(*v),
            Value::Integer(v) => Some(*v as f64),
            other => {
                self.error(s, key, format!("expected a number, found {}", other.type_str()));
                None
            }
        }
    }

    /// Number checked against `ok`; `what` describes the accepted range.
    fn f64_in<'a>(
        &mut self,
        s: &mut Section<'a>,
        key: &'a str,
        default: f64,
        ok: impl Fn(f64) -> bool,
        what: &str,
    ) -> f64 {
        match self.f64_opt(s, key) {
            Some(v) if ok(v) => v,
            Some(v) => {
                self.error(s, key, format!("{what} (got {v})"));
                default
            }
            None => default,
        }
    }

    fn usize_opt<'a>(&mut self, s: &mut Section<'a>, key: &'a str) -> Option<usize> {
        match self.raw(s, key)? {
            Value::Integer(v) if *v >= 0 => Some(*v as usize),
            Value::Integer(v) => {
                self.error(s, key, format!("must be nonnegative (got {v})"));
                None
            }
            other => {
                self.error(s, key, format!("expected an integer, found {}", other.type_str()));
                None
            }
        }
    }

    fn bool_or<'a>(&mut self, s: &mut Section<'a>, key: &'a str, default: bool) -> bool {
        match self.raw(s, key) {
            None => default,
            Some(Value::Boolean(b)) => *b,
            Some(other) => {
                let t = other.type_str();
                self.error(s, key, format!("expected true or false, found {t}"));
                default
            }
        }
    }

    fn str_opt<'a>(&mut self, s: &mut Section<'a>, key: &'a str) -> Option<&'a str> {
        match self.raw(s, key)? {
            Value::String(v) => Some(v.as_str()),
            other => {
                self.error(s, key, format!("expected a string, found {}", other.type_str()));
                None
            }
        }
    }

    /// String chosen from `options`, mapped through `pick`.
    fn choice<'a, T: Copy>(
        &mut self,
        s: &mut Section<'a>,
        key: &'a str,
        options: &[(&str, T)],
        default: T,
    ) -> T {
        let Some(v) = self.str_opt(s, key) else {
            return default;
        };
        match options.iter().find(|(n, _)| *n == v) {
            Some((_, t)) => *t,
            None => {
                let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
                self.error(s, key, format!("unknown value '{v}'; expected one of {}", names.join(", ")));
                default
            }
        }
    }

    /// Scalar or two-element array.
    fn pair<'a>(&mut self, s: &mut Section<'a>, key: &'a str) -> Option<[f64; 2]> {
        let num = |v: &Value| match v {
            Value::Float(x) => Some(*x),
            Value::Integer(x) => Some(*x as f64),
            _ => None,
        };
        let v = self.raw(s, key)?;
        let out = match v {
            Value::Array(a) if a.len() == 2 => num(&a[0]).zip(num(&a[1])).map(|(x, y)| [x, y]),
            other => num(other).map(|x| [x, x]),
        };
        if out.is_none() {
            self.error(s, key, "expected a number or a two-element array of numbers");
        }
        out
    }

    fn finish(&mut self, s: Section) {
        let Some(t) = s.table else { return };
        for key in t.keys() {
            if !s.seen.contains(key.as_str()) {
                let f = self.field(&s, key);
                self.warnings.push(format!("{f}: unknown key ignored"));
            }
        }
    }

    fn run_config(&mut self, root: &Table) -> Option<RunConfig> {
        let mut top = Section {
            name: "",
            table: Some(root),
            seen: ["geometry", "physics", "solver", "output", "study"].into_iter().collect(),
        };
        let case_name = self.str_opt(&mut top, "case");
        self.finish(top);
        let case_name = match case_name {
            Some(c) if CASES.contains(&c) => c,
            Some(c) => {
                self.errors.push(format!(
                    "case: unknown case '{c}'; registered cases: {}",
                    CASES.join(", ")
                ));
                return None;
            }
            None => {
                self.errors.push(format!("case: required key missing (one of {})", CASES.join(", ")));
                return None;
            }
        };
        let tgv = case_name == "taylor_green";
        let geometry = self.geometry(root, tgv);
        let case = self.physics(root, tgv, &geometry);
        let solver = self.solver(root);
        let output = self.output(root, tgv);
        let study = self.study(root, tgv);
        Some(RunConfig {
            case,
            geometry,
            solver,
            output,
            study,
            warnings: Vec::new(),
        })
    }

    fn geometry(&mut self, root: &Table, tgv: bool) -> GeometryConfig {
        let mut s = self.section(root, "geometry");
        let default_kind = if tgv { GeometryKind::PeriodicBox } else { GeometryKind::UnitSquare };
        let kind = match self.str_opt(&mut s, "builder") {
            None => default_kind,
            Some(name) => match name.parse::<GeometryKind>() {
                Ok(k) => k,
                Err(e) => {
                    self.error(&s, "builder", e.to_string());
                    default_kind
                }
            },
        };
        let mut params = GeometryParams {
            degree: if tgv { 3 } else { 2 },
            ..GeometryParams::default()
        };
        if let Some(d) = self.usize_opt(&mut s, "degree") {
            if (1..=8).contains(&d) {
                params.degree = d;
            } else {
                self.error(&s, "degree", format!("must be in 1..=8 (got {d})"));
            }
        }
        let points = self.usize_opt(&mut s, "points");
        let elements = self.pair(&mut s, "elements");
        match (points, elements) {
            (Some(_), Some(_)) => self.error(&s, "elements", "give either points or elements, not both"),
            (Some(n), None) => match elements_for_points(kind, params.degree, n) {
                Ok(e) => params.elements = [e, e],
                Err(e) => self.error(&s, "points", e.to_string()),
            },
            (None, Some([a, b])) => {
                if a.fract() != 0.0 || b.fract() != 0.0 || a < 1.0 || b < 1.0 {
                    self.error(&s, "elements", "must be positive integers");
                } else {
                    params.elements = [a as usize, b as usize];
                }
            }
            (None, None) => {
                let n = elements_for_points(kind, params.degree, 32).unwrap_or(32);
                params.elements = [n, n];
            }
        }
        if kind.is_periodic() && params.elements.iter().any(|&e| e <= params.degree) {
            self.error(&s, "points", format!("a periodic degree-{} basis needs more than {} points", params.degree, params.degree));
        }
        if let Some(l) = self.pair(&mut s, "length") {
            if l.iter().all(|v| *v > 0.0 && v.is_finite()) {
                params.length = l;
            } else {
                self.error(&s, "length", format!("must be positive (got {l:?})"));
            }
        }
        params.amplitude = self.f64_in(
            &mut s,
            "amplitude",
            params.amplitude,
            |a| (0.0..=CURVED_QUAD_MAX_AMPLITUDE).contains(&a),
            &format!("must be in [0, {CURVED_QUAD_MAX_AMPLITUDE}]"),
        );
        params.r_inner = self.f64_in(&mut s, "r_inner", params.r_inner, |r| r > 0.0, "must be positive");
        params.r_outer = self.f64_in(&mut s, "r_outer", params.r_outer, |r| r > 0.0, "must be positive");
        if params.r_outer <= params.r_inner {
            self.error(&s, "r_outer", format!("must exceed r_inner = {}", params.r_inner));
        }
        self.finish(s);
        GeometryConfig { kind, params }
    }

    fn physics(&mut self, root: &Table, tgv: bool, g: &GeometryConfig) -> CaseConfig {
        let mut s = self.section(root, "physics");
        let case = if tgv {
            let d = TaylorGreenParams::default();
            let p = TaylorGreenParams {
                u0: self.f64_in(&mut s, "u0", d.u0, |v| v.is_finite() && v.abs() < 0.3 / 3f64.sqrt(), "must be finite with Mach number below 0.3"),
                nu: self.f64_in(&mut s, "nu", d.nu, |v| v > 0.0 && v.is_finite(), "must be positive"),
                rho0: self.f64_in(&mut s, "rho0", d.rho0, |v| v > 0.0 && v.is_finite(), "must be positive"),
                lx: g.params.length[0],
                ly: g.params.length[1],
                ..d
            };
            CaseConfig::TaylorGreen(p)
        } else {
            let d = CavityParams::default();
            let walls = self.choice(
                &mut s,
                "walls",
                &[("bounce_back", WallTreatment::BounceBack), ("equilibrium", WallTreatment::Equilibrium)],
                d.walls,
            );
            let p = CavityParams {
                re: self.f64_in(&mut s, "re", d.re, |v| v > 0.0 && v.is_finite(), "must be positive"),
                u_lid: self.f64_in(&mut s, "u_lid", d.u_lid, |v| v != 0.0 && v.abs() < 0.3 / 3f64.sqrt(), "must be nonzero with Mach number below 0.3"),
                length: g.params.length[0],
                walls,
            };
            if g.params.length[0] != g.params.length[1] {
                self.errors.push("geometry.length: the cavity must be square".into());
            }
            CaseConfig::LidCavity(p)
        };
        self.finish(s);
        case
    }

    fn solver(&mut self, root: &Table) -> SolverConfig {
        let mut s = self.section(root, "solver");
        let mut c = SolverConfig::default();
        let cfl = self.f64_opt(&mut s, "cfl");
        let dt = self.f64_opt(&mut s, "dt");
        c.time_step = match (cfl, dt) {
            (Some(_), Some(_)) => {
                self.error(&s, "dt", "give either cfl or dt, not both");
                c.time_step
            }
            (Some(v), None) if !(v > 0.0 && v <= 1.0) => {
                self.error(&s, "cfl", format!("CFL must be in (0, 1] (got {v})"));
                c.time_step
            }
            (Some(v), None) => TimeStep::Cfl(v),
            (None, Some(v)) if !(v > 0.0 && v.is_finite()) => {
                self.error(&s, "dt", format!("must be positive (got {v})"));
                c.time_step
            }
            (None, Some(v)) => TimeStep::Fixed(v),
            (None, None) => c.time_step,
        };
        c.adaptive_dt = self.bool_or(&mut s, "adaptive_dt", c.adaptive_dt);
        if c.adaptive_dt && matches!(c.time_step, TimeStep::Fixed(_)) {
            self.error(&s, "adaptive_dt", "requires cfl, not a fixed dt");
        }
        if let Some(t) = self.f64_opt(&mut s, "tau") {
            if t > 0.0 && t.is_finite() {
                c.tau = Some(t);
            } else {
                self.error(&s, "tau", format!("must be positive (got {t})"));
            }
        }
        c.tau_model = self.choice(
            &mut s,
            "tau_model",
            &[("continuous", TauModel::Continuous), ("lattice", TauModel::Lattice)],
            c.tau_model,
        );
        if let Some(n) = self.usize_opt(&mut s, "n_max") {
            c.n_max = n;
        }
        c.epsilon = self.f64_in(&mut s, "epsilon", c.epsilon, |v| v > 0.0 && v < 1.0, "must be in (0, 1)");
        if let Some(t) = self.f64_opt(&mut s, "final_time") {
            if t > 0.0 && t.is_finite() {
                c.final_time = Some(t);
            } else {
                self.error(&s, "final_time", format!("must be positive (got {t})"));
            }
        }
        match self.usize_opt(&mut s, "output_every") {
            Some(0) => self.error(&s, "output_every", "must be at least 1"),
            Some(n) => c.output_every = n,
            None => {}
        }
        c.bc_per_stage = self.bool_or(&mut s, "bc_per_stage", c.bc_per_stage);
        match self.raw(&mut s, "max_dt_over_tau") {
            None => {}
            Some(Value::Boolean(false)) => c.max_dt_over_tau = None,
            Some(_) => {
                c.max_dt_over_tau = Some(self.f64_in(
                    &mut s,
                    "max_dt_over_tau",
                    2.0,
                    |v| v > 0.0 && v.is_finite(),
                    "must be positive, or false to disable",
                ))
            }
        }
        c.operators = self.choice(
            &mut s,
            "operators",
            &[("tensor", OperatorMode::Tensor), ("dense", OperatorMode::Dense)],
            c.operators,
        );
        c.convection = self.choice(
            &mut s,
            "convection",
            &[("advective", ConvectionForm::Advective), ("flux", ConvectionForm::Flux)],
            c.convection,
        );
        c.init = self.choice(
            &mut s,
            "init",
            &[("equilibrium", InitMode::Equilibrium), ("non_equilibrium", InitMode::NonEquilibrium)],
            c.init,
        );
        self.finish(s);
        c
    }

    fn output(&mut self, root: &Table, tgv: bool) -> OutputConfig {
        let mut s = self.section(root, "output");
        let dir = match self.str_opt(&mut s, "dir") {
            Some(d) if !d.is_empty() => PathBuf::from(d),
            Some(_) => {
                self.error(&s, "dir", "must not be empty");
                default_output_dir()
            }
            None => default_output_dir(),
        };
        let o = OutputConfig {
            dir,
            vtk: self.bool_or(&mut s, "vtk", true),
            vtk_every: self.usize_opt(&mut s, "vtk_every").unwrap_or(0),
            diagnostics: self.bool_or(&mut s, "diagnostics", true),
            centerlines: self.bool_or(&mut s, "centerlines", !tgv),
        };
        if o.centerlines && tgv {
            self.error(&s, "centerlines", "only available for lid_cavity");
        }
        self.finish(s);
        o
    }

    fn study(&mut self, root: &Table, tgv: bool) -> StudyConfig {
        let mut s = self.section(root, "study");
        let mut resolutions = vec![16, 32, 64];
        match self.raw(&mut s, "resolutions") {
            None => {}
            Some(Value::Array(a)) => {
                let r: Option<Vec<usize>> = a
                    .iter()
                    .map(|v| v.as_integer().filter(|n| *n >= 4).map(|n| n as usize))
                    .collect();
                match r {
                    Some(r) if r.len() >= 3 => resolutions = r,
                    Some(_) => self.error(&s, "resolutions", "needs at least 3 entries"),
                    None => self.error(&s, "resolutions", "entries must be integers >= 4"),
                }
            }
            Some(_) => self.error(&s, "resolutions", "expected an array of integers"),
        }
        let final_time = self.f64_in(&mut s, "final_time", 1.0, |t| t > 0.0 && t.is_finite(), "must be positive");
        let mode = self.choice(
            &mut s,
            "mode",
            &[("solve", StudyMode::Solve), ("exact_injection", StudyMode::ExactInjection)],
            StudyMode::Solve,
        );
        if s.table.is_some() && !tgv {
            self.warnings.push("study: only used by taylor_green".into());
        }
        self.finish(s);
        StudyConfig {
            resolutions,
            final_time,
            mode,
        }
    }
}

/// `$IGA_LBM_OUTPUT_DIR`, else `output`.
pub fn default_output_dir() -> PathBuf {
    std::env::var_os(OUTPUT_DIR_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("output"))
}
