//! Sectioned key-value configuration files.
//!
//! ```text
//! # rigid body
//! [algebroid]
//! kind = "lie_algebra"
//! algebra = "so3"
//!
//! [control]
//! f = ["u1", "u2", "u3"]
//! L = "0.5*(1*u1^2 + 2*u2^2 + 3*u3^2)"
//!
//! [integrate]
//! t1 = 1
//! steps = 1000
//! eta0 = [1, 0.1, 0]
//! ```
//!
//! Values are numbers, quoted strings, or bracketed lists of either
//! (lists may nest one level for `anchor`). In `[algebroid]`, keys of the
//! form `gamma,alpha,beta` (1-based) give structure functions.

use std::fmt;
use std::path::Path;

use algctl_core::algebra::{NamedAlgebra, StructureConstants};
use algctl_core::algebroid::{catalog, AlgebroidModel, CatalogParams};
use algctl_core::exprlang::{evaluate, parse, Binding, ExpressionTree};
use algctl_core::optctl::{ControlProblem, Method};
use algctl_core::ScalarField;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        ConfigError {
            line: Some(line),
            message: message.into(),
        }
    }

    fn global(message: impl Into<String>) -> Self {
        ConfigError {
            line: None,
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

#[derive(Debug)]
pub enum LoadError {
    Io(std::io::Error),
    Invalid(Vec<ConfigError>),
}

impl fmt::Display for LoadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LoadError::Io(e) => write!(f, "cannot read config: {e}"),
            LoadError::Invalid(errors) => {
                writeln!(f, "{} configuration error(s):", errors.len())?;
                for e in errors {
                    writeln!(f, "  {e}")?;
                }
                Ok(())
            }
        }
    }
}

impl std::error::Error for LoadError {}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    /// Parsed value and the literal as written.
    Number(f64, String),
    Str(String),
    List(Vec<Value>),
}

impl Value {
    fn describe(&self) -> &'static str {
        match self {
            Value::Number(..) => "a number",
            Value::Str(_) => "a string",
            Value::List(_) => "a list",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: Value,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub name: String,
    pub line: usize,
    pub entries: Vec<Entry>,
}

fn strip_comment(line: &str) -> &str {
    let mut in_string = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => in_string = !in_string,
            '#' if !in_string => return &line[..i],
            _ => {}
        }
    }
    line
}

struct ValueParser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> ValueParser<'a> {
    fn skip_ws(&mut self) {
        while self.src[self.pos..].starts_with([' ', '\t']) {
            self.pos += 1;
        }
    }

    fn value(&mut self, depth: usize) -> Result<Value, String> {
        self.skip_ws();
        let rest = &self.src[self.pos..];
        if let Some(body) = rest.strip_prefix('"') {
            let end = body.find('"').ok_or("unterminated string")?;
            self.pos += end + 2;
            return Ok(Value::Str(body[..end].to_string()));
        }
        if rest.starts_with('[') {
            if depth >= 2 {
                return Err("lists nest at most two levels".into());
            }
            self.pos += 1;
            let mut items = Vec::new();
            self.skip_ws();
            if self.src[self.pos..].starts_with(']') {
                self.pos += 1;
                return Ok(Value::List(items));
            }
            loop {
                items.push(self.value(depth + 1)?);
                self.skip_ws();
                let rest = &self.src[self.pos..];
                if rest.starts_with(',') {
                    self.pos += 1;
                } else if rest.starts_with(']') {
                    self.pos += 1;
                    return Ok(Value::List(items));
                } else {
                    return Err(format!("expected `,` or `]` at column {}", self.pos + 1));
                }
            }
        }
        let end = rest.find([',', ']', ' ', '\t']).unwrap_or(rest.len());
        let literal = &rest[..end];
        if literal.is_empty() {
            return Err(format!("expected a value at column {}", self.pos + 1));
        }
        match literal.parse::<f64>() {
            Ok(v) if v.is_finite() => {
                self.pos += end;
                Ok(Value::Number(v, literal.to_string()))
            }
            _ => Err(format!(
                "`{literal}` is not a number, quoted string or list"
            )),
        }
    }
}

fn parse_value(src: &str) -> Result<Value, String> {
    let mut p = ValueParser { src, pos: 0 };
    let v = p.value(0)?;
    p.skip_ws();
    if p.pos != src.len() {
        return Err(format!("unexpected trailing text `{}`", &src[p.pos..]));
    }
    Ok(v)
}

/// Splits the file into sections; reports every malformed line.
pub fn parse_sections(text: &str) -> Result<Vec<Section>, Vec<ConfigError>> {
    let mut sections: Vec<Section> = Vec::new();
    let mut errors = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            let name = name.trim();
            if sections.iter().any(|s| s.name == name) {
                errors.push(ConfigError::at(line_no, format!("duplicate section [{name}]")));
            }
            sections.push(Section {
                name: name.to_string(),
                line: line_no,
                entries: Vec::new(),
            });
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            errors.push(ConfigError::at(line_no, "expected `key = value` or `[section]`"));
            continue;
        };
        let key = key.trim().to_string();
        let Some(section) = sections.last_mut() else {
            errors.push(ConfigError::at(line_no, format!("`{key}` appears before any section")));
            continue;
        };
        if section.entries.iter().any(|e| e.key == key) {
            errors.push(ConfigError::at(line_no, format!("duplicate key `{key}` in [{}]", section.name)));
            continue;
        }
        match parse_value(value.trim()) {
            Ok(value) => section.entries.push(Entry {
                key,
                value,
                line: line_no,
            }),
            Err(msg) => errors.push(ConfigError::at(line_no, format!("[{}] {key}: {msg}", section.name))),
        }
    }
    if errors.is_empty() {
        Ok(sections)
    } else {
        Err(errors)
    }
}

#[derive(Debug, Clone)]
pub struct AlgebroidSection {
    pub kind: String,
    pub algebra: Option<NamedAlgebra>,
    pub xi: Option<Vec<f64>>,
    pub model: AlgebroidModel,
}

#[derive(Debug, Clone)]
pub enum Dynamics {
    Control {
        control_dim: usize,
        f: Vec<ExpressionTree>,
        cost: ExpressionTree,
    },
    Hamiltonian(ExpressionTree),
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegrateSection {
    pub t0: f64,
    pub t1: f64,
    pub steps: usize,
    pub method: Method,
    pub x0: Vec<f64>,
    pub eta0: Vec<f64>,
    pub u0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShootSection {
    pub target: Vec<f64>,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrbitSection {
    pub xi: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
    pub spread: f64,
}

#[derive(Debug, Clone)]
pub struct ProblemConfig {
    pub algebroid: AlgebroidSection,
    pub dynamics: Dynamics,
    pub integrate: Option<IntegrateSection>,
    pub shoot: Option<ShootSection>,
    pub orbit: Option<OrbitSection>,
    /// SHA-256 of the configuration bytes, hex encoded.
    pub digest: String,
}

pub const DEFAULT_SHOOT_TOL: f64 = 1e-10;

struct Reader<'a> {
    section: &'a Section,
    errors: &'a mut Vec<ConfigError>,
}

impl<'a> Reader<'a> {
    fn entry(&self, key: &str) -> Option<&'a Entry> {
        self.section.entries.iter().find(|e| e.key == key)
    }

    fn error(&mut self, line: usize, msg: String) {
        self.errors.push(ConfigError::at(line, format!("[{}] {msg}", self.section.name)));
    }

    fn missing(&mut self, key: &str) {
        let line = self.section.line;
        self.error(line, format!("missing key `{key}`"));
    }

    fn mismatch(&mut self, e: &Entry, expected: &str) {
        self.error(e.line, format!("{}: expected {expected}, found {}", e.key, e.value.describe()));
    }

    fn number(&mut self, key: &str) -> Option<f64> {
        let e = self.entry(key)?;
        match &e.value {
            Value::Number(v, _) => Some(*v),
            _ => {
                self.mismatch(e, "a number");
                None
            }
        }
    }

    fn unsigned(&mut self, key: &str) -> Option<u64> {
        let e = self.entry(key)?;
        match &e.value {
            Value::Number(_, lit) => match lit.parse::<u64>() {
                Ok(v) => Some(v),
                Err(_) => {
                    self.error(e.line, format!("{key}: expected a non-negative integer, found `{lit}`"));
                    None
                }
            },
            _ => {
                self.mismatch(e, "a non-negative integer");
                None
            }
        }
    }

    fn string(&mut self, key: &str) -> Option<String> {
        let e = self.entry(key)?;
        match &e.value {
            Value::Str(s) => Some(s.clone()),
            _ => {
                self.mismatch(e, "a quoted string");
                None
            }
        }
    }

    fn numbers(&mut self, key: &str) -> Option<Vec<f64>> {
        let e = self.entry(key)?;
        if let Value::List(items) = &e.value {
            let nums: Option<Vec<f64>> = items
                .iter()
                .map(|v| match v {
                    Value::Number(x, _) => Some(*x),
                    _ => None,
                })
                .collect();
            if nums.is_some() {
                return nums;
            }
        }
        self.mismatch(e, "a list of numbers");
        None
    }

    fn strings_of(items: &[Value]) -> Option<Vec<String>> {
        items
            .iter()
            .map(|v| match v {
                Value::Str(s) => Some(s.clone()),
                _ => None,
            })
            .collect()
    }

    fn strings(&mut self, key: &str) -> Option<Vec<String>> {
        let e = self.entry(key)?;
        if let Value::List(items) = &e.value {
            if let Some(v) = Self::strings_of(items) {
                return Some(v);
            }
        }
        self.mismatch(e, "a list of quoted strings");
        None
    }

    fn string_lists(&mut self, key: &str) -> Option<Vec<Vec<String>>> {
        let e = self.entry(key)?;
        if let Value::List(rows) = &e.value {
            let parsed: Option<Vec<Vec<String>>> = rows
                .iter()
                .map(|row| match row {
                    Value::List(items) => Self::strings_of(items),
                    _ => None,
                })
                .collect();
            if parsed.is_some() {
                return parsed;
            }
        }
        self.mismatch(e, "a list of lists of quoted strings");
        None
    }

    fn expression(&mut self, line: usize, what: &str, src: &str) -> Option<ExpressionTree> {
        match parse(src) {
            Ok(t) => Some(t),
            Err(err) => {
                self.error(line, format!("{what}: {err} (in \"{src}\" at offset {})", err.offset()));
                None
            }
        }
    }

    fn line_of(&self, key: &str) -> usize {
        self.entry(key).map_or(self.section.line, |e| e.line)
    }

    fn reject_unknown(&mut self, allowed: &[&str], extra: impl Fn(&str) -> bool) {
        for e in &self.section.entries {
            if !allowed.contains(&e.key.as_str()) && !extra(&e.key) {
                self.errors.push(ConfigError::at(
                    e.line,
                    format!("[{}] unknown key `{}`", self.section.name, e.key),
                ));
            }
        }
    }
}

fn structure_key(key: &str) -> Option<(usize, usize, usize)> {
    let parts: Vec<&str> = key.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [g, a, b] => Some((g.parse().ok()?, a.parse().ok()?, b.parse().ok()?)),
        _ => None,
    }
}

fn parse_algebroid(section: &Section, errors: &mut Vec<ConfigError>) -> Option<AlgebroidSection> {
    let mut r = Reader { section, errors };
    r.reject_unknown(&["kind", "base_dim", "rank", "algebra", "anchor", "xi"], |k| structure_key(k).is_some());
    let kind = r.string("kind");
    if kind.is_none() && r.entry("kind").is_none() {
        r.missing("kind");
    }
    let base_dim = r.unsigned("base_dim").map(|v| v as usize);
    let rank = r.unsigned("rank").map(|v| v as usize);
    let algebra = match r.string("algebra") {
        Some(name) => match name.parse::<NamedAlgebra>() {
            Ok(a) => Some(a),
            Err(e) => {
                let line = r.line_of("algebra");
                r.error(line, format!("algebra: {e}"));
                None
            }
        },
        None => None,
    };
    let xi = r.numbers("xi");
    let anchor = r.string_lists("anchor");
    let mut structure = Vec::new();
    for e in &section.entries {
        let Some((g, a, b)) = structure_key(&e.key) else { continue };
        if g == 0 || a == 0 || b == 0 {
            r.error(e.line, format!("{}: structure indices are 1-based", e.key));
            continue;
        }
        let Value::Str(src) = &e.value else {
            r.mismatch(e, "a quoted expression");
            continue;
        };
        if let Some(t) = r.expression(e.line, &e.key, src) {
            structure.push(((g - 1, a - 1, b - 1), t, e.line));
        }
    }
    let kind = kind?;
    let kind_line = r.line_of("kind");
    let params = CatalogParams {
        base_dim,
        algebra,
        constants: None,
        xi: xi.clone(),
    };
    let built = match kind.as_str() {
        "lie_algebra" if algebra.is_none() && !structure.is_empty() => {
            let Some(dim) = rank else {
                r.missing("rank");
                return None;
            };
            let mut c = StructureConstants::zero(dim);
            let mut ok = true;
            for ((g, a, b), t, line) in &structure {
                let v = match evaluate(t, &Binding::new()) {
                    Ok(v) => v,
                    Err(e) => {
                        r.error(*line, format!("lie_algebra structure constants must be numeric: {e}"));
                        ok = false;
                        continue;
                    }
                };
                if let Err(e) = c.set(*g, *a, *b, v) {
                    r.error(*line, format!("{}: {e}", format_args!("{},{},{}", g + 1, a + 1, b + 1)));
                    ok = false;
                }
            }
            if !ok {
                return None;
            }
            Ok(AlgebroidModel::lie_algebra(c))
        }
        "custom" => {
            let (Some(n), Some(rk)) = (base_dim, rank) else {
                if base_dim.is_none() {
                    r.missing("base_dim");
                }
                if rank.is_none() {
                    r.missing("rank");
                }
                return None;
            };
            let Some(anchor) = anchor else {
                r.missing("anchor");
                return None;
            };
            let mut rows = Vec::with_capacity(anchor.len());
            let anchor_line = r.line_of("anchor");
            for (i, row) in anchor.iter().enumerate() {
                let mut out = Vec::with_capacity(row.len());
                for (a, src) in row.iter().enumerate() {
                    out.push(r.expression(anchor_line, &format!("anchor[{}][{}]", i + 1, a + 1), src)?);
                }
                rows.push(out);
            }
            let entries = structure.into_iter().map(|(k, t, _)| (k, t)).collect();
            AlgebroidModel::custom(n, rk, rows, entries)
        }
        other => {
            if !structure.is_empty() {
                r.error(kind_line, format!("structure entries are only allowed for custom or explicit lie_algebra models, not `{other}`"));
                return None;
            }
            catalog(other, &params)
        }
    };
    let model = match built {
        Ok(m) => m,
        Err(e) => {
            r.error(kind_line, format!("kind = \"{kind}\": {e}"));
            return None;
        }
    };
    if let Some(rk) = rank {
        if rk != model.rank() {
            let line = r.line_of("rank");
            r.error(line, format!("rank is {rk}, but the {kind} model has rank {}", model.rank()));
        }
    }
    if let Some(n) = base_dim {
        if n != model.base_dim() {
            let line = r.line_of("base_dim");
            r.error(line, format!("base_dim is {n}, but the {kind} model has base dimension {}", model.base_dim()));
        }
    }
    Some(AlgebroidSection {
        kind,
        algebra,
        xi,
        model,
    })
}

fn highest_control(trees: &[&ExpressionTree]) -> usize {
    trees
        .iter()
        .flat_map(|t| t.free_variables())
        .filter_map(|v| v.strip_prefix('u').and_then(|k| k.parse::<usize>().ok()))
        .max()
        .unwrap_or(0)
}

fn parse_control(section: &Section, errors: &mut Vec<ConfigError>, rank: Option<usize>) -> Option<Dynamics> {
    let mut r = Reader { section, errors };
    r.reject_unknown(&["f", "L", "control_dim"], |_| false);
    let f_src = r.strings("f");
    if r.entry("f").is_none() {
        r.missing("f");
    }
    let cost_src = r.string("L");
    if r.entry("L").is_none() {
        r.missing("L");
    }
    let explicit_m = r.unsigned("control_dim").map(|v| v as usize);
    let f_line = r.line_of("f");
    let f: Option<Vec<ExpressionTree>> = f_src.map(|list| {
        list.iter()
            .enumerate()
            .filter_map(|(i, s)| r.expression(f_line, &format!("f[{}]", i + 1), s))
            .collect::<Vec<_>>()
    });
    let cost_line = r.line_of("L");
    let cost = cost_src.and_then(|s| r.expression(cost_line, "L", &s));
    let (f, cost) = (f?, cost?);
    if let Some(rk) = rank {
        if f.len() != rk {
            r.error(f_line, format!("f has {} components, but the algebroid rank is {rk}", f.len()));
        }
    }
    let mut refs: Vec<&ExpressionTree> = f.iter().collect();
    refs.push(&cost);
    let inferred = highest_control(&refs);
    let control_dim = match explicit_m {
        Some(m) if m < inferred => {
            let line = r.line_of("control_dim");
            r.error(line, format!("control_dim is {m}, but the expressions use u{inferred}"));
            m
        }
        Some(m) => m,
        None => inferred,
    };
    Some(Dynamics::Control { control_dim, f, cost })
}

fn parse_hamiltonian(section: &Section, errors: &mut Vec<ConfigError>) -> Option<Dynamics> {
    let mut r = Reader { section, errors };
    r.reject_unknown(&["h"], |_| false);
    if r.entry("h").is_none() {
        r.missing("h");
    }
    let src = r.string("h")?;
    let line = r.line_of("h");
    r.expression(line, "h", &src).map(Dynamics::Hamiltonian)
}

fn check_len(r: &mut Reader<'_>, key: &str, v: &[f64], expected: usize, what: &str) {
    if v.len() != expected {
        let line = r.line_of(key);
        r.error(line, format!("{key} has length {}, but {what} is {expected}", v.len()));
    }
}

fn parse_integrate(section: &Section, errors: &mut Vec<ConfigError>, dims: Option<(usize, usize, usize)>) -> Option<IntegrateSection> {
    let mut r = Reader { section, errors };
    r.reject_unknown(&["t0", "t1", "steps", "method", "x0", "eta0", "u0"], |_| false);
    let t0 = r.number("t0").unwrap_or(0.0);
    let t1 = r.number("t1");
    if r.entry("t1").is_none() {
        r.missing("t1");
    }
    let steps = r.unsigned("steps");
    if r.entry("steps").is_none() {
        r.missing("steps");
    }
    if steps == Some(0) {
        let line = r.line_of("steps");
        r.error(line, "steps must be at least 1".into());
    }
    if let Some(t1) = t1 {
        if !(t1 > t0) {
            let line = r.line_of("t1");
            r.error(line, format!("t1 = {t1} must exceed t0 = {t0}"));
        }
    }
    let method = match r.string("method") {
        Some(m) => match m.parse::<Method>() {
            Ok(m) => Some(m),
            Err(e) => {
                let line = r.line_of("method");
                r.error(line, format!("method: {e}"));
                None
            }
        },
        None => Some(Method::Rk4),
    };
    let x0 = r.numbers("x0");
    let eta0 = r.numbers("eta0");
    if r.entry("eta0").is_none() {
        r.missing("eta0");
    }
    let u0 = r.numbers("u0");
    let x0 = match (x0, dims) {
        (Some(x0), _) => Some(x0),
        (None, Some((0, _, _))) => Some(vec![]),
        (None, _) => {
            r.missing("x0");
            None
        }
    };
    if let Some((n, rk, m)) = dims {
        if let Some(x0) = &x0 {
            check_len(&mut r, "x0", x0, n, "the base dimension");
        }
        if let Some(eta0) = &eta0 {
            check_len(&mut r, "eta0", eta0, rk, "the algebroid rank");
        }
        if let Some(u0) = &u0 {
            check_len(&mut r, "u0", u0, m, "the control dimension");
        }
    }
    let steps = steps.filter(|&s| s >= 1)? as usize;
    Some(IntegrateSection {
        t0,
        t1: t1?,
        steps,
        method: method?,
        x0: x0?,
        eta0: eta0?,
        u0,
    })
}

fn parse_shoot(section: &Section, errors: &mut Vec<ConfigError>, base_dim: Option<usize>) -> Option<ShootSection> {
    let mut r = Reader { section, errors };
    r.reject_unknown(&["target", "tol"], |_| false);
    let target = r.numbers("target");
    if r.entry("target").is_none() {
        r.missing("target");
    }
    let tol = r.number("tol").unwrap_or(DEFAULT_SHOOT_TOL);
    if !(tol > 0.0) {
        let line = r.line_of("tol");
        r.error(line, format!("tol must be positive, got {tol}"));
    }
    if let (Some(t), Some(n)) = (&target, base_dim) {
        check_len(&mut r, "target", t, n, "the base dimension");
    }
    Some(ShootSection { target: target?, tol })
}

fn parse_orbit(section: &Section, errors: &mut Vec<ConfigError>, algebra_dim: Option<usize>) -> Option<OrbitSection> {
    let mut r = Reader { section, errors };
    r.reject_unknown(&["xi", "samples", "seed", "spread"], |_| false);
    let xi = r.numbers("xi");
    if r.entry("xi").is_none() {
        r.missing("xi");
    }
    let samples = r.unsigned("samples");
    if r.entry("samples").is_none() {
        r.missing("samples");
    }
    if samples == Some(0) {
        let line = r.line_of("samples");
        r.error(line, "samples must be at least 1".into());
    }
    let seed = r.unsigned("seed").unwrap_or(0);
    let spread = r.number("spread").unwrap_or(1.0);
    if !(spread > 0.0) {
        let line = r.line_of("spread");
        r.error(line, format!("spread must be positive, got {spread}"));
    }
    if let (Some(xi), Some(k)) = (&xi, algebra_dim) {
        check_len(&mut r, "xi", xi, k, "the algebra dimension");
    }
    Some(OrbitSection {
        xi: xi?,
        samples: samples.filter(|&s| s >= 1)? as usize,
        seed,
        spread,
    })
}

/// Parses and validates configuration text, collecting every error.
pub fn parse_config(text: &str) -> Result<ProblemConfig, Vec<ConfigError>> {
    let sections = parse_sections(text)?;
    let mut errors = Vec::new();
    let find = |name: &str| sections.iter().find(|s| s.name == name);
    for s in &sections {
        if !["algebroid", "control", "hamiltonian", "integrate", "shoot", "orbit"].contains(&s.name.as_str()) {
            errors.push(ConfigError::at(s.line, format!("unknown section [{}]", s.name)));
        }
    }

    let algebroid = match find("algebroid") {
        Some(s) => parse_algebroid(s, &mut errors),
        None => {
            errors.push(ConfigError::global("missing section [algebroid]"));
            None
        }
    };
    let rank = algebroid.as_ref().map(|a| a.model.rank());
    let dynamics = match (find("control"), find("hamiltonian")) {
        (Some(c), None) => parse_control(c, &mut errors, rank),
        (None, Some(h)) => parse_hamiltonian(h, &mut errors),
        (Some(_), Some(h)) => {
            errors.push(ConfigError::at(h.line, "give either [control] or [hamiltonian], not both"));
            None
        }
        (None, None) => {
            errors.push(ConfigError::global("missing section: one of [control] or [hamiltonian] is required"));
            None
        }
    };

    if let (Some(a), Some(d)) = (&algebroid, &dynamics) {
        check_dynamics(a, d, &mut errors, find("control").or(find("hamiltonian")).map_or(0, |s| s.line));
    }

    let m = match &dynamics {
        Some(Dynamics::Control { control_dim, .. }) => Some(*control_dim),
        Some(Dynamics::Hamiltonian(_)) => Some(0),
        None => None,
    };
    let dims = match (&algebroid, m) {
        (Some(a), Some(m)) => Some((a.model.base_dim(), a.model.rank(), m)),
        _ => None,
    };
    let integrate = find("integrate").and_then(|s| parse_integrate(s, &mut errors, dims));
    let shoot = find("shoot").and_then(|s| parse_shoot(s, &mut errors, algebroid.as_ref().map(|a| a.model.base_dim())));
    let algebra_dim = algebroid.as_ref().and_then(|a| a.algebra).map(|a| a.dim());
    let orbit = find("orbit").and_then(|s| parse_orbit(s, &mut errors, algebra_dim));

    if !errors.is_empty() {
        errors.sort_by_key(|e| e.line.unwrap_or(0));
        return Err(errors);
    }
    Ok(ProblemConfig {
        algebroid: algebroid.expect("no errors implies a model"),
        dynamics: dynamics.expect("no errors implies dynamics"),
        integrate,
        shoot,
        orbit,
        digest: digest(text.as_bytes()),
    })
}

fn check_dynamics(a: &AlgebroidSection, d: &Dynamics, errors: &mut Vec<ConfigError>, line: usize) {
    let layout = a.model.layout();
    match d {
        Dynamics::Hamiltonian(h) => {
            if let Err(e) = ScalarField::new(h.clone(), layout) {
                errors.push(ConfigError::at(line, format!("[hamiltonian] h: {e}")));
            }
        }
        Dynamics::Control { control_dim, f, cost } => {
            if f.len() == a.model.rank() {
                if let Err(e) = ControlProblem::new(a.model.clone(), *control_dim, f.clone(), cost.clone()) {
                    errors.push(ConfigError::at(line, format!("[control] {e}")));
                }
            }
        }
    }
}

pub fn digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Reads and validates the configuration at `path`.
pub fn load_config(path: &Path) -> Result<ProblemConfig, LoadError> {
    let text = std::fs::read_to_string(path).map_err(LoadError::Io)?;
    parse_config(&text).map_err(LoadError::Invalid)
}

impl ProblemConfig {
    /// The control problem with the integrate and shoot sections applied.
    pub fn control_problem(&self) -> Option<ControlProblem> {
        let Dynamics::Control { control_dim, f, cost } = &self.dynamics else {
            return None;
        };
        let mut pb = ControlProblem::new(self.algebroid.model.clone(), *control_dim, f.clone(), cost.clone()).ok()?;
        if let Some(i) = &self.integrate {
            pb = pb.with_horizon(i.t0, i.t1).with_initial(i.x0.clone(), i.eta0.clone());
            pb.u0 = i.u0.clone();
        }
        if let Some(s) = &self.shoot {
            pb = pb.with_target(s.target.clone());
        }
        Some(pb)
    }

    pub fn hamiltonian(&self) -> Option<ScalarField> {
        match &self.dynamics {
            Dynamics::Hamiltonian(h) => ScalarField::new(h.clone(), self.algebroid.model.layout()).ok(),
            Dynamics::Control { .. } => None,
        }
    }

    pub fn control_dim(&self) -> usize {
        match &self.dynamics {
            Dynamics::Control { control_dim, .. } => *control_dim,
            Dynamics::Hamiltonian(_) => 0,
        }
    }
}
