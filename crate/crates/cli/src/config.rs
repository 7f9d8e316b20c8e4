//! Run configuration: TOML text in, validated [`RunConfig`] out.
//!
//! Validation walks the whole document and reports every problem it finds,
//! each with the dotted field name and, where the document has one, the line
//! and column. The grammar is documented in the guide's CLI chapter.

use std::fmt;
use std::ops::Range;

use toml_edit::{value, Array, DocumentMut, ImDocument, Item, Table};
use volctl::conjugation::RunningCost;
use volctl::expr::{Expr, ExprError};
use volctl::mc::InitialState;
use volctl::{Coefficient, Grid1D, ProblemSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Solve,
    Value,
    Policy,
    Simulate,
    SweepEps,
    SweepDegenerate,
    Solve2d,
    ConjugateTable,
}

impl Mode {
    pub const ALL: [Mode; 8] = [
        Mode::Solve,
        Mode::Value,
        Mode::Policy,
        Mode::Simulate,
        Mode::SweepEps,
        Mode::SweepDegenerate,
        Mode::Solve2d,
        Mode::ConjugateTable,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Solve => "solve",
            Mode::Value => "value",
            Mode::Policy => "policy",
            Mode::Simulate => "simulate",
            Mode::SweepEps => "sweep-eps",
            Mode::SweepDegenerate => "sweep-degenerate",
            Mode::Solve2d => "solve-2d",
            Mode::ConjugateTable => "conjugate-table",
        }
    }

    pub fn from_name(s: &str) -> Option<Mode> {
        Mode::ALL.into_iter().find(|m| m.name() == s)
    }

    /// Modes that run the 1-D solver.
    pub fn solves_1d(self) -> bool {
        !matches!(self, Mode::Solve2d | Mode::ConjugateTable)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One validation problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub field: String,
    /// 1-based `(line, column)` in the config text.
    pub position: Option<(usize, usize)>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.position {
            Some((l, c)) => write!(f, "line {l}, column {c}: {}: {}", self.field, self.message),
            None => write!(f, "{}: {}", self.field, self.message),
        }
    }
}

/// An expression together with the text it came from.
#[derive(Debug, Clone)]
pub struct ExprSource {
    pub text: String,
    pub expr: Expr,
}

#[derive(Debug, Clone)]
pub enum CostConfig {
    Quadratic { alpha1: f64, alpha2: f64 },
    /// `h(u)` as an expression in `u`; `alpha1`, `alpha2` are its coercivity
    /// constants.
    Custom { h: ExprSource, alpha1: f64, alpha2: f64 },
}

impl CostConfig {
    pub fn build(&self) -> volctl::Result<RunningCost> {
        match self {
            CostConfig::Quadratic { alpha1, alpha2 } => RunningCost::quadratic(*alpha1, *alpha2),
            CostConfig::Custom { h, alpha1, alpha2 } => {
                let e = h.expr.clone();
                RunningCost::custom(move |u| e.eval(&[u]), *alpha1, *alpha2)
            }
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ProblemConfig {
    pub drift: Option<ExprSource>,
    pub volatility: Option<ExprSource>,
    pub running: Option<ExprSource>,
    pub terminal: Option<ExprSource>,
    pub horizon: Option<f64>,
    pub cost: Option<CostConfig>,
}

impl ProblemConfig {
    /// The 1-D problem. Only valid after validation for a 1-D mode.
    pub fn spec(&self) -> volctl::Result<ProblemSpec> {
        let coef = |e: &Option<ExprSource>| Coefficient::from_expr(&e.as_ref().expect("validated").expr, true);
        let spec = ProblemSpec {
            drift: coef(&self.drift)?,
            volatility: coef(&self.volatility)?,
            running: coef(&self.running)?,
            terminal: coef(&self.terminal)?,
            cost: self.cost.as_ref().expect("validated").build()?,
            horizon: self.horizon.expect("validated"),
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    pub half_width: f64,
    pub nodes: usize,
}

impl GridConfig {
    pub fn grid(&self) -> volctl::Result<Grid1D> {
        Grid1D::new(self.half_width, self.nodes)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub eps: f64,
    pub refine_tol: Option<f64>,
    pub max_halvings: usize,
    /// Number of halvings in `sweep-eps`.
    pub levels: usize,
    pub tol_res: Option<f64>,
    pub max_newton: usize,
    pub max_picard: usize,
    pub snapshot_budget: usize,
    pub perturbation: bool,
    pub regularization: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub paths: usize,
    pub dt: Option<f64>,
    pub initial: InitialState,
    pub baselines: Vec<f64>,
    pub keep_samples: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DegenerateConfig {
    pub ladder: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TwoDConfig {
    pub half_width: f64,
    pub nodes: usize,
    pub a: [[f64; 2]; 2],
    pub sigma0: ExprSource,
    pub running: ExprSource,
    pub terminal: ExprSource,
    pub horizon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableConfig {
    pub p_min: f64,
    pub p_max: f64,
    pub nodes: usize,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mode: Mode,
    pub seed: u64,
    pub problem: ProblemConfig,
    pub grid: Option<GridConfig>,
    pub solver: Option<SolverConfig>,
    pub simulation: Option<SimulationConfig>,
    pub degenerate: Option<DegenerateConfig>,
    pub two_d: Option<TwoDConfig>,
    pub table: Option<TableConfig>,
}

const PRESET_DESK: [(&str, &str); 4] = [
    ("drift", "tanh(x)"),
    ("volatility", "sqrt(2) + 0.1*sin(x)"),
    ("running", "exp(-x^2)"),
    ("terminal", "exp(-x^2)"),
];

/// Parses and validates `text` for `mode`. Every problem is reported.
pub fn validate_config(text: &str, mode: Mode) -> Result<RunConfig, Vec<ConfigError>> {
    let doc = match ImDocument::parse(text) {
        Ok(d) => d,
        Err(e) => {
            return Err(vec![ConfigError {
                field: "config".into(),
                position: e.span().map(|s| line_col(text, s.start)),
                message: e.message().trim().to_string(),
            }])
        }
    };
    let mut v = Validator { text, errors: Vec::new() };
    let root = doc.as_table();
    v.known_keys(
        root,
        "",
        &["mode", "seed", "problem", "grid", "solver", "simulation", "degenerate", "two_d", "conjugate_table"],
    );
    if let Some(item) = root.get("mode") {
        match item.as_str() {
            Some(s) if s == mode.name() => {}
            Some(s) => v.error_at("mode", item.span(), format!("config says `{s}` but the command is `{mode}`")),
            None => v.error_at("mode", item.span(), "expected a string"),
        }
    }
    let seed = match root.get("seed") {
        None => 0,
        Some(item) => match item.as_integer() {
            Some(s) if s >= 0 => s as u64,
            _ => {
                v.error_at("seed", item.span(), "expected a non-negative integer");
                0
            }
        },
    };

    let t = v.table(root, "problem");
    let problem = v.problem(t, mode);
    let t = v.table(root, "grid");
    let grid = v.grid(t, &problem, mode);
    let t = v.table(root, "solver");
    let solver = v.solver(t, mode);
    let t = v.table(root, "simulation");
    let simulation = v.simulation(t, mode);
    let t = v.table(root, "degenerate");
    let degenerate = v.degenerate(t, mode);
    let t = v.table(root, "two_d");
    let two_d = v.two_d(t, &problem, mode);
    let t = v.table(root, "conjugate_table");
    let table = v.conjugate_table(t);

    if v.errors.is_empty() {
        Ok(RunConfig {
            mode,
            seed,
            problem,
            grid,
            solver,
            simulation,
            degenerate,
            two_d,
            table,
        })
    } else {
        Err(v.errors)
    }
}

/// 1-based line and column of a byte offset.
fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

struct Validator<'a> {
    text: &'a str,
    errors: Vec<ConfigError>,
}

impl<'a> Validator<'a> {
    fn error_at(&mut self, field: impl Into<String>, span: Option<Range<usize>>, message: impl Into<String>) {
        self.errors.push(ConfigError {
            field: field.into(),
            position: span.map(|s| line_col(self.text, s.start)),
            message: message.into(),
        });
    }

    fn error(&mut self, field: impl Into<String>, message: impl Into<String>) {
        self.error_at(field, None, message);
    }

    fn table<'t>(&mut self, parent: &'t Table, key: &str) -> Option<&'t Table> {
        let item = parent.get(key)?;
        match item.as_table() {
            Some(t) => Some(t),
            None => {
                self.error_at(key, item.span(), "expected a table");
                None
            }
        }
    }

    fn known_keys(&mut self, t: &Table, prefix: &str, allowed: &[&str]) {
        for (k, item) in t.iter() {
            if !allowed.contains(&k) {
                let span = t.key(k).and_then(|key| key.span()).or_else(|| item.span());
                self.error_at(join(prefix, k), span, format!("unknown key (expected one of {})", allowed.join(", ")));
            }
        }
    }

    fn f64_opt(&mut self, t: &Table, prefix: &str, key: &str) -> Option<f64> {
        let item = t.get(key)?;
        let v = item.as_float().or_else(|| item.as_integer().map(|i| i as f64));
        if v.is_none() {
            self.error_at(join(prefix, key), item.span(), "expected a number");
        }
        v
    }

    /// A number that must satisfy `ok`, described by `range` in the error.
    fn f64_in(
        &mut self,
        t: &Table,
        prefix: &str,
        key: &str,
        ok: impl Fn(f64) -> bool,
        range: &str,
    ) -> Option<f64> {
        let v = self.f64_opt(t, prefix, key)?;
        if v.is_finite() && ok(v) {
            Some(v)
        } else {
            let span = t.get(key).and_then(Item::span);
            self.error_at(join(prefix, key), span, format!("got {v}, expected {range}"));
            None
        }
    }

    fn usize_in(&mut self, t: &Table, prefix: &str, key: &str, min: usize) -> Option<usize> {
        let item = t.get(key)?;
        match item.as_integer() {
            Some(i) if i >= min as i64 => Some(i as usize),
            Some(i) => {
                self.error_at(join(prefix, key), item.span(), format!("got {i}, expected an integer >= {min}"));
                None
            }
            None => {
                self.error_at(join(prefix, key), item.span(), "expected an integer");
                None
            }
        }
    }

    fn bool_opt(&mut self, t: &Table, prefix: &str, key: &str) -> Option<bool> {
        let item = t.get(key)?;
        let b = item.as_bool();
        if b.is_none() {
            self.error_at(join(prefix, key), item.span(), "expected true or false");
        }
        b
    }

    fn f64_array(&mut self, t: &Table, prefix: &str, key: &str) -> Option<Vec<f64>> {
        let item = t.get(key)?;
        let Some(arr) = item.as_array() else {
            self.error_at(join(prefix, key), item.span(), "expected an array of numbers");
            return None;
        };
        let mut out = Vec::with_capacity(arr.len());
        for (i, v) in arr.iter().enumerate() {
            match v.as_float().or_else(|| v.as_integer().map(|i| i as f64)) {
                Some(x) if x.is_finite() => out.push(x),
                _ => {
                    self.error_at(format!("{}[{i}]", join(prefix, key)), v.span(), "expected a finite number");
                    return None;
                }
            }
        }
        Some(out)
    }

    /// Parses an expression string. Errors inside the expression are placed
    /// at their column within the file.
    fn expr(&mut self, t: &Table, prefix: &str, key: &str, vars: &[&str], need_derivatives: bool) -> Option<ExprSource> {
        let item = t.get(key)?;
        let field = join(prefix, key);
        let Some(text) = item.as_str() else {
            self.error_at(field, item.span(), "expected an expression string");
            return None;
        };
        let span = item.span();
        let at_column = |column: usize| span.clone().map(|s| s.start + column..s.end);
        let parsed = Expr::parse(text, vars).and_then(|e| {
            if need_derivatives {
                e.derivative(0)?.derivative(0)?;
            }
            Ok(e)
        });
        match parsed {
            Ok(expr) => Some(ExprSource {
                text: text.to_string(),
                expr,
            }),
            Err(e) => {
                // the span starts at the opening quote
                let span = match &e {
                    ExprError::Parse { column, .. } | ExprError::UnknownIdentifier { column, .. } => at_column(*column),
                    ExprError::NonDifferentiable(_) => span,
                };
                let message = match e {
                    ExprError::Parse { message, .. } => message,
                    ExprError::UnknownIdentifier { name, .. } => {
                        format!("unknown identifier `{name}` (variables: {})", vars.join(", "))
                    }
                    other => other.to_string(),
                };
                self.error_at(field, span, message);
                None
            }
        }
    }

    fn problem(&mut self, t: Option<&Table>, mode: Mode) -> ProblemConfig {
        let mut p = ProblemConfig::default();
        let Some(t) = t else {
            if mode == Mode::ConjugateTable {
                self.error("problem.cost", format!("required for mode {mode}"));
            } else {
                self.error("problem", format!("required for mode {mode}"));
            }
            return p;
        };
        self.known_keys(
            t,
            "problem",
            &["preset", "drift", "volatility", "running", "terminal", "horizon", "cost"],
        );
        let preset = match t.get("preset") {
            None => false,
            Some(item) => match item.as_str() {
                Some("desk") => true,
                _ => {
                    self.error_at("problem.preset", item.span(), "expected \"desk\"");
                    false
                }
            },
        };
        let slots: [(&str, &mut Option<ExprSource>); 4] = [
            ("drift", &mut p.drift),
            ("volatility", &mut p.volatility),
            ("running", &mut p.running),
            ("terminal", &mut p.terminal),
        ];
        for (key, slot) in slots {
            *slot = self.expr(t, "problem", key, &["x"], true);
            if slot.is_none() && t.get(key).is_none() {
                if preset {
                    let text = PRESET_DESK.iter().find(|(k, _)| *k == key).expect("preset key").1;
                    *slot = Some(ExprSource {
                        text: text.into(),
                        expr: Expr::parse(text, &["x"]).expect("preset parses"),
                    });
                } else if mode.solves_1d() {
                    self.error(format!("problem.{key}"), format!("required for mode {mode}"));
                }
            }
        }
        p.horizon = self.f64_in(t, "problem", "horizon", |v| v > 0.0, "a positive horizon");
        if p.horizon.is_none() && t.get("horizon").is_none() {
            if preset {
                p.horizon = Some(0.5);
            } else if mode.solves_1d() {
                self.error("problem.horizon", format!("required for mode {mode}"));
            }
        }
        p.cost = match self.table(t, "cost") {
            Some(c) => self.cost(c),
            None if preset && t.get("cost").is_none() => Some(CostConfig::Quadratic {
                alpha1: 1.0,
                alpha2: 0.0,
            }),
            None => {
                if t.get("cost").is_none() {
                    self.error("problem.cost", format!("required for mode {mode}"));
                }
                None
            }
        };
        p
    }

    fn cost(&mut self, t: &Table) -> Option<CostConfig> {
        let pre = "problem.cost";
        self.known_keys(t, pre, &["kind", "alpha1", "alpha2", "h"]);
        let kind = match t.get("kind") {
            None => {
                self.error(format!("{pre}.kind"), "required (\"quadratic\" or \"custom\")");
                None
            }
            Some(item) => match item.as_str() {
                Some(k @ ("quadratic" | "custom")) => Some(k),
                _ => {
                    self.error_at(format!("{pre}.kind"), item.span(), "expected \"quadratic\" or \"custom\"");
                    None
                }
            },
        };
        let alpha1 = self.f64_in(t, pre, "alpha1", |v| v > 0.0, "alpha1 > 0");
        let alpha2 = self.f64_in(t, pre, "alpha2", |_| true, "a finite number").or(Some(0.0));
        if alpha1.is_none() && t.get("alpha1").is_none() {
            self.error(format!("{pre}.alpha1"), "required");
        }
        let h = self.expr(t, pre, "h", &["u"], false);
        match kind {
            Some("quadratic") => {
                if let Some(item) = t.get("h") {
                    self.error_at(format!("{pre}.h"), item.span(), "only used with kind = \"custom\"");
                }
                Some(CostConfig::Quadratic {
                    alpha1: alpha1?,
                    alpha2: alpha2?,
                })
            }
            Some(_) => {
                if t.get("h").is_none() {
                    self.error(format!("{pre}.h"), "required for kind = \"custom\"");
                }
                Some(CostConfig::Custom {
                    h: h?,
                    alpha1: alpha1?,
                    alpha2: alpha2?,
                })
            }
            None => None,
        }
    }

    fn grid(&mut self, t: Option<&Table>, problem: &ProblemConfig, mode: Mode) -> Option<GridConfig> {
        if !mode.solves_1d() {
            if let Some(t) = t {
                self.known_keys(t, "grid", &["half_width", "nodes"]);
            }
            return None;
        }
        let (half_width, nodes) = match t {
            Some(t) => {
                self.known_keys(t, "grid", &["half_width", "nodes"]);
                let hw = self.f64_in(t, "grid", "half_width", |v| v > 0.0, "a positive half width");
                let n = self.usize_in(t, "grid", "nodes", 5);
                if let Some(n) = n {
                    if n % 2 == 0 {
                        self.error_at("grid.nodes", t.get("nodes").and_then(Item::span), format!("got {n}, must be odd"));
                    }
                }
                let hw_bad = t.get("half_width").is_some() && hw.is_none();
                let n_bad = t.get("nodes").is_some() && (n.is_none() || n.is_some_and(|n| n % 2 == 0));
                if hw_bad || n_bad {
                    return None;
                }
                (hw, n)
            }
            None => (None, None),
        };
        let half_width = match half_width {
            Some(v) => v,
            None => default_half_width(problem)?,
        };
        // about 20 nodes per unit length unless set
        let nodes = nodes.unwrap_or_else(|| 2 * (20.0 * half_width).round() as usize + 1);
        Some(GridConfig { half_width, nodes })
    }

    fn solver(&mut self, t: Option<&Table>, mode: Mode) -> Option<SolverConfig> {
        let needed = mode.solves_1d() || mode == Mode::Solve2d;
        let Some(t) = t else {
            if needed {
                self.error("solver", format!("required for mode {mode}"));
            }
            return None;
        };
        let pre = "solver";
        self.known_keys(
            t,
            pre,
            &[
                "eps",
                "refine_tol",
                "max_halvings",
                "levels",
                "tol_res",
                "max_newton",
                "max_picard",
                "snapshot_budget",
                "perturbation",
                "regularization",
            ],
        );
        let eps = self.f64_in(t, pre, "eps", |v| v > 0.0, "a positive step");
        if eps.is_none() && t.get("eps").is_none() {
            self.error("solver.eps", "required");
        }
        let refine_tol = self.f64_in(t, pre, "refine_tol", |v| v > 0.0, "a positive tolerance");
        let max_halvings = self.usize_in(t, pre, "max_halvings", 1).unwrap_or(6);
        let levels = self.usize_in(t, pre, "levels", 1).unwrap_or(3);
        let tol_res = self.f64_in(t, pre, "tol_res", |v| v > 0.0, "a positive tolerance");
        let max_newton = self.usize_in(t, pre, "max_newton", 1).unwrap_or(100);
        let max_picard = self.usize_in(t, pre, "max_picard", 1).unwrap_or(500);
        let snapshot_budget = self.usize_in(t, pre, "snapshot_budget", 2).unwrap_or(20_000);
        let perturbation = self.bool_opt(t, pre, "perturbation").unwrap_or(true);
        let regularization = self
            .f64_in(t, pre, "regularization", |v| v >= 0.0, "a non-negative number")
            .unwrap_or(0.0);
        Some(SolverConfig {
            eps: eps?,
            refine_tol,
            max_halvings,
            levels,
            tol_res,
            max_newton,
            max_picard,
            snapshot_budget,
            perturbation,
            regularization,
        })
    }

    fn simulation(&mut self, t: Option<&Table>, mode: Mode) -> Option<SimulationConfig> {
        let Some(t) = t else {
            if mode == Mode::Simulate {
                self.error("simulation", format!("required for mode {mode}"));
            }
            return None;
        };
        let pre = "simulation";
        self.known_keys(
            t,
            pre,
            &["paths", "dt", "x0", "x0_uniform", "x0_normal", "baselines", "keep_samples"],
        );
        let paths = self.usize_in(t, pre, "paths", 2).unwrap_or(10_000);
        let dt = self.f64_in(t, pre, "dt", |v| v > 0.0, "a positive step");
        let given: Vec<&str> = ["x0", "x0_uniform", "x0_normal"]
            .into_iter()
            .filter(|k| t.contains_key(k))
            .collect();
        if given.len() > 1 {
            self.error(pre, format!("at most one of x0, x0_uniform, x0_normal (got {})", given.join(", ")));
        }
        let pair = |v: &mut Self, key: &str| -> Option<(f64, f64)> {
            let a = v.f64_array(t, pre, key)?;
            if a.len() == 2 {
                Some((a[0], a[1]))
            } else {
                v.error_at(join(pre, key), t.get(key).and_then(Item::span), "expected two numbers");
                None
            }
        };
        let initial = if t.contains_key("x0_uniform") {
            match pair(self, "x0_uniform") {
                Some((low, high)) if low <= high => InitialState::Uniform { low, high },
                Some(_) => {
                    self.error_at("simulation.x0_uniform", t.get("x0_uniform").and_then(Item::span), "low > high");
                    InitialState::Point(0.0)
                }
                None => InitialState::Point(0.0),
            }
        } else if t.contains_key("x0_normal") {
            match pair(self, "x0_normal") {
                Some((mean, std_dev)) if std_dev >= 0.0 => InitialState::Normal { mean, std_dev },
                Some(_) => {
                    self.error_at(
                        "simulation.x0_normal",
                        t.get("x0_normal").and_then(Item::span),
                        "standard deviation must be non-negative",
                    );
                    InitialState::Point(0.0)
                }
                None => InitialState::Point(0.0),
            }
        } else {
            InitialState::Point(self.f64_in(t, pre, "x0", |_| true, "a finite number").unwrap_or(0.0))
        };
        let baselines = match self.f64_array(t, pre, "baselines") {
            Some(b) if b.iter().any(|&c| c < 0.0) => {
                self.error_at(
                    "simulation.baselines",
                    t.get("baselines").and_then(Item::span),
                    "controls must be non-negative",
                );
                Vec::new()
            }
            Some(b) => b,
            None => (0..=8).map(|k| 0.25 * k as f64).collect(),
        };
        let keep_samples = self.bool_opt(t, pre, "keep_samples").unwrap_or(false);
        Some(SimulationConfig {
            paths,
            dt,
            initial,
            baselines,
            keep_samples,
        })
    }

    fn degenerate(&mut self, t: Option<&Table>, mode: Mode) -> Option<DegenerateConfig> {
        let default = || DegenerateConfig {
            ladder: volctl::degenerate::DEFAULT_LADDER.to_vec(),
        };
        let Some(t) = t else {
            return (mode == Mode::SweepDegenerate).then(default);
        };
        self.known_keys(t, "degenerate", &["ladder"]);
        match self.f64_array(t, "degenerate", "ladder") {
            None => Some(default()),
            Some(l) => {
                let span = t.get("ladder").and_then(Item::span);
                if l.is_empty() || l.iter().any(|&v| v <= 0.0) || l.windows(2).any(|w| w[1] >= w[0]) {
                    self.error_at(
                        "degenerate.ladder",
                        span,
                        "expected a non-empty, strictly decreasing list of positive levels",
                    );
                    None
                } else {
                    Some(DegenerateConfig { ladder: l })
                }
            }
        }
    }

    fn two_d(&mut self, t: Option<&Table>, problem: &ProblemConfig, mode: Mode) -> Option<TwoDConfig> {
        let Some(t) = t else {
            if mode == Mode::Solve2d {
                self.error("two_d", format!("required for mode {mode}"));
            }
            return None;
        };
        let pre = "two_d";
        self.known_keys(
            t,
            pre,
            &["half_width", "nodes", "a", "sigma0", "running", "terminal", "horizon"],
        );
        let missing = |v: &mut Self, key: &str| {
            if !t.contains_key(key) {
                v.error(join(pre, key), "required");
            }
        };
        for key in ["half_width", "nodes", "a", "sigma0", "running", "terminal"] {
            missing(self, key);
        }
        let half_width = self.f64_in(t, pre, "half_width", |v| v > 0.0, "a positive half width");
        let nodes = self.usize_in(t, pre, "nodes", 5);
        if let Some(n) = nodes {
            if n % 2 == 0 {
                self.error_at("two_d.nodes", t.get("nodes").and_then(Item::span), format!("got {n}, must be odd"));
            }
        }
        let a = t.get("a").and_then(|item| {
            let rows = item.as_array().filter(|r| r.len() == 2).and_then(|r| {
                let row = |i: usize| -> Option<[f64; 2]> {
                    let inner = r.get(i)?.as_array().filter(|a| a.len() == 2)?;
                    let num = |v: &toml_edit::Value| v.as_float().or_else(|| v.as_integer().map(|i| i as f64));
                    Some([num(inner.get(0)?)?, num(inner.get(1)?)?])
                };
                Some([row(0)?, row(1)?])
            });
            if rows.is_none() {
                self.error_at("two_d.a", item.span(), "expected a 2x2 array of numbers, e.g. [[1.0, 0.0], [0.3, 1.0]]");
            }
            rows
        });
        let vars = ["x", "y"];
        let sigma0 = self.expr(t, pre, "sigma0", &vars, false);
        let running = self.expr(t, pre, "running", &vars, false);
        let terminal = self.expr(t, pre, "terminal", &vars, false);
        let horizon = match self.f64_in(t, pre, "horizon", |v| v > 0.0, "a positive horizon") {
            Some(h) => Some(h),
            None if !t.contains_key("horizon") => {
                if problem.horizon.is_none() {
                    self.error("two_d.horizon", "required (or set problem.horizon)");
                }
                problem.horizon
            }
            None => None,
        };
        Some(TwoDConfig {
            half_width: half_width?,
            nodes: nodes.filter(|n| n % 2 == 1)?,
            a: a?,
            sigma0: sigma0?,
            running: running?,
            terminal: terminal?,
            horizon: horizon?,
        })
    }

    fn conjugate_table(&mut self, t: Option<&Table>) -> Option<TableConfig> {
        let default = TableConfig {
            p_min: -4.0,
            p_max: 4.0,
            nodes: 81,
        };
        let Some(t) = t else {
            return Some(default);
        };
        let pre = "conjugate_table";
        self.known_keys(t, pre, &["p_min", "p_max", "nodes"]);
        let p_min = self.f64_in(t, pre, "p_min", |v| v < 0.0, "a negative number").unwrap_or(default.p_min);
        let p_max = self.f64_in(t, pre, "p_max", |v| v > 0.0, "a positive number").unwrap_or(default.p_max);
        let nodes = self.usize_in(t, pre, "nodes", 3).unwrap_or(default.nodes);
        Some(TableConfig { p_min, p_max, nodes })
    }
}

fn join(prefix: &str, key: &str) -> String {
    if prefix.is_empty() {
        key.to_string()
    } else {
        format!("{prefix}.{key}")
    }
}

/// `10 * max(1, R)` where `R` is the radius outside which both `|g''|` and
/// `|g0''|` stay below 1% of their peak.
fn default_half_width(problem: &ProblemConfig) -> Option<f64> {
    let g = problem.running.as_ref()?;
    let g0 = problem.terminal.as_ref()?;
    let second = |e: &Expr| e.derivative(0).and_then(|d| d.derivative(0)).ok();
    let (d_g, d_g0) = (second(&g.expr)?, second(&g0.expr)?);
    let xs: Vec<f64> = (0..=4000).map(|k| -100.0 + 0.05 * k as f64).collect();
    let vals: Vec<f64> = xs
        .iter()
        .map(|&x| d_g.eval(&[x]).abs().max(d_g0.eval(&[x]).abs()))
        .map(|v| if v.is_finite() { v } else { 0.0 })
        .collect();
    let peak = vals.iter().copied().fold(0.0, f64::max);
    let radius = xs
        .iter()
        .zip(&vals)
        .filter(|(_, &v)| v >= 0.01 * peak)
        .map(|(x, _)| x.abs())
        .fold(0.0, f64::max);
    Some(10.0 * radius.max(1.0))
}

impl RunConfig {
    /// The effective configuration as TOML, defaults filled in. Parsing it
    /// back for the same mode gives the same run.
    pub fn to_toml(&self) -> String {
        let mut doc = DocumentMut::new();
        doc["mode"] = value(self.mode.name());
        doc["seed"] = value(self.seed as i64);

        let p = &self.problem;
        let mut problem = Table::new();
        for (key, e) in [
            ("drift", &p.drift),
            ("volatility", &p.volatility),
            ("running", &p.running),
            ("terminal", &p.terminal),
        ] {
            if let Some(e) = e {
                problem[key] = value(e.text.as_str());
            }
        }
        if let Some(h) = p.horizon {
            problem["horizon"] = value(h);
        }
        if let Some(c) = &p.cost {
            let mut cost = Table::new();
            match c {
                CostConfig::Quadratic { alpha1, alpha2 } => {
                    cost["kind"] = value("quadratic");
                    cost["alpha1"] = value(*alpha1);
                    cost["alpha2"] = value(*alpha2);
                }
                CostConfig::Custom { h, alpha1, alpha2 } => {
                    cost["kind"] = value("custom");
                    cost["h"] = value(h.text.as_str());
                    cost["alpha1"] = value(*alpha1);
                    cost["alpha2"] = value(*alpha2);
                }
            }
            problem["cost"] = Item::Table(cost);
        }
        doc["problem"] = Item::Table(problem);

        if let Some(g) = &self.grid {
            let mut t = Table::new();
            t["half_width"] = value(g.half_width);
            t["nodes"] = value(g.nodes as i64);
            doc["grid"] = Item::Table(t);
        }
        if let Some(s) = &self.solver {
            let mut t = Table::new();
            t["eps"] = value(s.eps);
            if let Some(r) = s.refine_tol {
                t["refine_tol"] = value(r);
            }
            t["max_halvings"] = value(s.max_halvings as i64);
            t["levels"] = value(s.levels as i64);
            if let Some(r) = s.tol_res {
                t["tol_res"] = value(r);
            }
            t["max_newton"] = value(s.max_newton as i64);
            t["max_picard"] = value(s.max_picard as i64);
            t["snapshot_budget"] = value(s.snapshot_budget as i64);
            t["perturbation"] = value(s.perturbation);
            t["regularization"] = value(s.regularization);
            doc["solver"] = Item::Table(t);
        }
        if let Some(s) = &self.simulation {
            let mut t = Table::new();
            t["paths"] = value(s.paths as i64);
            if let Some(dt) = s.dt {
                t["dt"] = value(dt);
            }
            match s.initial {
                InitialState::Point(x) => t["x0"] = value(x),
                InitialState::Uniform { low, high } => t["x0_uniform"] = value(numbers(&[low, high])),
                InitialState::Normal { mean, std_dev } => t["x0_normal"] = value(numbers(&[mean, std_dev])),
            }
            t["baselines"] = value(numbers(&s.baselines));
            t["keep_samples"] = value(s.keep_samples);
            doc["simulation"] = Item::Table(t);
        }
        if let Some(d) = &self.degenerate {
            let mut t = Table::new();
            t["ladder"] = value(numbers(&d.ladder));
            doc["degenerate"] = Item::Table(t);
        }
        if let Some(d) = &self.two_d {
            let mut t = Table::new();
            t["half_width"] = value(d.half_width);
            t["nodes"] = value(d.nodes as i64);
            let mut a = Array::new();
            for row in d.a {
                a.push(numbers(&row));
            }
            t["a"] = value(a);
            t["sigma0"] = value(d.sigma0.text.as_str());
            t["running"] = value(d.running.text.as_str());
            t["terminal"] = value(d.terminal.text.as_str());
            t["horizon"] = value(d.horizon);
            doc["two_d"] = Item::Table(t);
        }
        if let Some(c) = &self.table {
            if self.mode == Mode::ConjugateTable {
                let mut t = Table::new();
                t["p_min"] = value(c.p_min);
                t["p_max"] = value(c.p_max);
                t["nodes"] = value(c.nodes as i64);
                doc["conjugate_table"] = Item::Table(t);
            }
        }
        doc.to_string()
    }
}

fn numbers(v: &[f64]) -> Array {
    v.iter().copied().collect()
}
