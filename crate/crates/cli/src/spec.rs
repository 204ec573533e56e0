//! Problem-spec documents: a JSON tree of named literals and a task list.
//!
//! ```json
//! {
//!   "functions": { "f": "poly{ [0,1]: t }", "one": "poly{ [0,1]: 1 }" },
//!   "sets": { "E": "[0,1/2) {3/4}", "C": "cantor{hull:[0,1], ratio:1/3}" },
//!   "gauges": { "d": "gauge{ base: [0,1]:1/8 }" },
//!   "sequences": { "s": "seq{ n in 1..: step{ [0,1/n):n, [1/n,1]:0 } }" },
//!   "tasks": [
//!     { "name": "area", "kind": "integrate", "f": "f", "g": "one", "over": "E" },
//!     { "name": "cantor", "kind": "harnack", "f": "f", "g": "one", "t": "C", "terms": 20 }
//!   ]
//! }
//! ```

use std::collections::BTreeMap;

use gaugeks_core::error::line_col;
use gaugeks_core::harnack::ClosedSetDescription;
use gaugeks_core::integrator::IntervalKind;
use gaugeks_core::literal::{self, literal_kind};
use gaugeks_core::{ElementarySet, FunctionSequence, Gauge, PiecewiseFunction, Rational};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::suites::Suite;

#[derive(Debug, thiserror::Error)]
pub enum SpecError {
    #[error("{line}:{column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("task {task}: unknown name {name:?}")]
    UnknownName { task: String, name: String },
    #[error("task {task}: domain mismatch: {message}")]
    DomainMismatch { task: String, message: String },
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

/// A parsed literal with its source text.
#[derive(Clone)]
pub struct Named<T> {
    pub source: String,
    pub value: T,
}

#[derive(Clone)]
pub enum SetDef {
    Elementary(ElementarySet),
    Closed(ClosedSetDescription),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodChoice {
    #[default]
    Auto,
    Closed,
    Oracle,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    #[default]
    Equi,
    Cauchy,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expect {
    Violation,
    None,
}

/// Rationals may be written as strings (`"1/3"`, `"2^-4"`) or integers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Number {
    Int(i64),
    Text(String),
}

impl Number {
    pub fn rational(&self) -> Option<Rational> {
        match self {
            Number::Int(k) => Some(Rational::from_integer((*k).into())),
            Number::Text(s) => literal::number(s),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TaskSpec {
    /// `∫` over a named elementary set, or over `[from, to]` (default: the domain).
    Integrate {
        f: String,
        g: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        over: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        from: Option<Number>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        to: Option<Number>,
        #[serde(default)]
        method: MethodChoice,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tol: Option<f64>,
    },
    /// One endpoint attachment of `c < d`: `open_open`, `closed_open`, ...
    Convert { f: String, g: String, c: Number, d: Number, interval: String },
    Harnack {
        f: String,
        g: String,
        t: String,
        terms: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tol: Option<f64>,
    },
    Verify {
        suite: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        trials: Option<u64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    SequenceCheck {
        f: String,
        g: String,
        gauge: String,
        eta: f64,
        n_max: u64,
        trials: u64,
        seed: u64,
        #[serde(default)]
        criterion: Criterion,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expect: Option<Expect>,
    },
}

impl TaskSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            TaskSpec::Integrate { .. } => "integrate",
            TaskSpec::Convert { .. } => "convert",
            TaskSpec::Harnack { .. } => "harnack",
            TaskSpec::Verify { .. } => "verify",
            TaskSpec::SequenceCheck { .. } => "sequence-check",
        }
    }

    /// Whether a failure of this task makes the run fail.
    pub fn is_check(&self) -> bool {
        matches!(self, TaskSpec::Verify { .. } | TaskSpec::SequenceCheck { expect: Some(_), .. })
    }
}

#[derive(Clone)]
pub struct Task {
    pub name: String,
    pub spec: TaskSpec,
}

#[derive(Clone, Default)]
pub struct ProblemSpec {
    pub functions: BTreeMap<String, Named<PiecewiseFunction>>,
    pub sets: BTreeMap<String, Named<SetDef>>,
    pub gauges: BTreeMap<String, Named<Gauge>>,
    pub sequences: BTreeMap<String, Named<FunctionSequence>>,
    pub tasks: Vec<Task>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    #[serde(default)]
    functions: BTreeMap<String, String>,
    #[serde(default)]
    sets: BTreeMap<String, String>,
    #[serde(default)]
    gauges: BTreeMap<String, String>,
    #[serde(default)]
    sequences: BTreeMap<String, String>,
    #[serde(default)]
    tasks: Vec<Value>,
}

/// Position of `offset` inside the literal `lit` as a document position,
/// when the literal occurs verbatim in the document.
fn doc_position(text: &str, lit: &str, offset: usize) -> Option<(usize, usize)> {
    let quoted = serde_json::to_string(lit).ok()?;
    if quoted.len() != lit.len() + 2 {
        return None;
    }
    let start = text.find(&quoted)? + 1;
    Some(line_col(text, start + offset.min(lit.len())))
}

fn literal_error(text: &str, section: &str, name: &str, lit: &str, err: gaugeks_core::Error) -> SpecError {
    if let gaugeks_core::Error::Parse(p) = &err {
        let offset = offset_of(lit, p.line, p.column);
        if let Some((line, column)) = doc_position(text, lit, offset) {
            return SpecError::Parse { line, column, message: format!("{section}.{name}: {}", p.message) };
        }
    }
    let (line, column) = doc_position(text, lit, 0).unwrap_or((0, 0));
    SpecError::Parse { line, column, message: format!("{section}.{name}: {err}") }
}

fn offset_of(src: &str, line: usize, column: usize) -> usize {
    let mut off = 0;
    for (i, l) in src.split('\n').enumerate() {
        if i + 1 == line {
            return off + l.char_indices().nth(column.saturating_sub(1)).map_or(l.len(), |(k, _)| k);
        }
        off += l.len() + 1;
    }
    0
}

fn parse_section<T>(
    text: &str,
    section: &str,
    entries: BTreeMap<String, String>,
    parse: impl Fn(&str) -> gaugeks_core::Result<T>,
) -> Result<BTreeMap<String, Named<T>>, SpecError> {
    entries
        .into_iter()
        .map(|(name, src)| match parse(&src) {
            Ok(value) => Ok((name, Named { source: src, value })),
            Err(e) => Err(literal_error(text, section, &name, &src, e)),
        })
        .collect()
}

fn parse_set_def(src: &str) -> gaugeks_core::Result<SetDef> {
    match literal_kind(src) {
        Some("closed_set") => literal::parse_closed_set(src).map(SetDef::Closed),
        _ => literal::parse_set(src).map(SetDef::Elementary),
    }
}

pub fn parse_spec(text: &str) -> Result<ProblemSpec, SpecError> {
    let doc: Document = serde_json::from_str(text)
        .map_err(|e| SpecError::Parse { line: e.line(), column: e.column(), message: e.to_string() })?;
    let mut spec = ProblemSpec {
        functions: parse_section(text, "functions", doc.functions, literal::parse_function)?,
        sets: parse_section(text, "sets", doc.sets, parse_set_def)?,
        gauges: parse_section(text, "gauges", doc.gauges, literal::parse_gauge)?,
        sequences: parse_section(text, "sequences", doc.sequences, literal::parse_sequence)?,
        tasks: Vec::new(),
    };
    for (i, raw) in doc.tasks.into_iter().enumerate() {
        let task = task_from_value(text, i, raw)?;
        spec.validate(&task)?;
        spec.tasks.push(task);
    }
    Ok(spec)
}

fn task_from_value(text: &str, index: usize, mut raw: Value) -> Result<Task, SpecError> {
    let fail = |message: String| {
        let (line, column) = locate_task(text, index).unwrap_or((0, 0));
        SpecError::Parse { line, column, message: format!("tasks[{index}]: {message}") }
    };
    let name = match raw.as_object_mut().map(|o| o.remove("name")) {
        None => return Err(fail("expected an object".into())),
        Some(None) => format!("task{index}"),
        Some(Some(Value::String(s))) => s,
        Some(Some(other)) => return Err(fail(format!("name must be a string, got {other}"))),
    };
    let spec: TaskSpec = serde_json::from_value(raw).map_err(|e| fail(e.to_string()))?;
    Ok(Task { name, spec })
}

/// Start of the `index`-th element of the top-level `tasks` array.
fn locate_task(text: &str, index: usize) -> Option<(usize, usize)> {
    let key = text.find("\"tasks\"")?;
    let open = key + text[key..].find('[')?;
    let bytes = text.as_bytes();
    let (mut depth, mut seen, mut in_str, mut esc) = (0usize, 0usize, false, false);
    for (k, &c) in bytes.iter().enumerate().skip(open + 1) {
        if in_str {
            match c {
                _ if esc => esc = false,
                b'\\' => esc = true,
                b'"' => in_str = false,
                _ => {}
            }
            continue;
        }
        match c {
            b'"' => in_str = true,
            b'{' | b'[' => {
                if depth == 0 {
                    if seen == index {
                        return Some(line_col(text, k));
                    }
                    seen += 1;
                }
                depth += 1;
            }
            b'}' | b']' => {
                if depth == 0 {
                    return None;
                }
                depth -= 1;
            }
            _ => {}
        }
    }
    None
}

impl ProblemSpec {
    fn function(&self, task: &str, name: &str) -> Result<&PiecewiseFunction, SpecError> {
        self.functions.get(name).map(|n| &n.value).ok_or_else(|| unknown(task, name))
    }

    fn validate(&self, task: &Task) -> Result<(), SpecError> {
        let t = task.name.as_str();
        let mismatch = |message: String| SpecError::DomainMismatch { task: t.to_string(), message };
        let pair = |f: &str, g: &str| -> Result<(), SpecError> {
            let (fv, gv) = (self.function(t, f)?, self.function(t, g)?);
            if !fv.same_domain(gv) {
                return Err(mismatch(format!("{f} and {g} live on different intervals")));
            }
            Ok(())
        };
        let number = |n: &Number| {
            n.rational().ok_or_else(|| SpecError::Parse { line: 0, column: 0, message: format!("task {t}: bad number {n:?}") })
        };
        match &task.spec {
            TaskSpec::Integrate { f, g, over, from, to, .. } => {
                pair(f, g)?;
                if let Some(s) = over {
                    match self.sets.get(s).map(|n| &n.value) {
                        None => return Err(unknown(t, s)),
                        Some(SetDef::Closed(_)) => return Err(mismatch(format!("{s} is not an elementary set"))),
                        Some(SetDef::Elementary(_)) => {}
                    }
                }
                for n in from.iter().chain(to) {
                    number(n)?;
                }
            }
            TaskSpec::Convert { f, g, c, d, interval } => {
                pair(f, g)?;
                let (c, d) = (number(c)?, number(d)?);
                if c >= d {
                    return Err(mismatch("need c < d".into()));
                }
                if IntervalKind::parse(interval).is_none() {
                    return Err(mismatch(format!("unknown interval kind {interval:?}")));
                }
            }
            TaskSpec::Harnack { f, g, t: set, .. } => {
                pair(f, g)?;
                match self.sets.get(set).map(|n| &n.value) {
                    None => return Err(unknown(t, set)),
                    Some(SetDef::Closed(c)) => {
                        let fv = self.function(t, f)?;
                        if c.hull().lo() != fv.domain_lo() || c.hull().hi() != fv.domain_hi() {
                            return Err(mismatch(format!("hull of {set} differs from the domain of {f}")));
                        }
                    }
                    Some(SetDef::Elementary(_)) => return Err(mismatch(format!("{set} is not a closed-set description"))),
                }
            }
            TaskSpec::Verify { suite, .. } => {
                if suite != "all" && Suite::parse(suite).is_none() {
                    return Err(unknown(t, suite));
                }
            }
            TaskSpec::SequenceCheck { f, g, gauge, .. } => {
                let fs = self.sequences.get(f).ok_or_else(|| unknown(t, f))?;
                let gs = self.sequences.get(g).ok_or_else(|| unknown(t, g))?;
                let gauge = self.gauges.get(gauge).ok_or_else(|| unknown(t, gauge))?;
                let (f1, g1) = (fs.value.get(1).map_err(|e| mismatch(e.to_string()))?, gs.value.get(1).map_err(|e| mismatch(e.to_string()))?);
                if !f1.same_domain(&g1) || gauge.value.hull() != (f1.domain_lo(), f1.domain_hi()) {
                    return Err(mismatch("sequences and gauge live on different intervals".into()));
                }
            }
        }
        Ok(())
    }

    /// Source texts of the literals a task refers to, sorted by name.
    pub fn referenced_sources(&self, task: &Task) -> Vec<(String, String)> {
        let mut names: Vec<&String> = match &task.spec {
            TaskSpec::Integrate { f, g, over, .. } => [f, g].into_iter().chain(over).collect(),
            TaskSpec::Convert { f, g, .. } => vec![f, g],
            TaskSpec::Harnack { f, g, t, .. } => vec![f, g, t],
            TaskSpec::Verify { .. } => vec![],
            TaskSpec::SequenceCheck { f, g, gauge, .. } => vec![f, g, gauge],
        };
        names.sort();
        names.dedup();
        names
            .into_iter()
            .filter_map(|n| {
                let src = self
                    .functions
                    .get(n)
                    .map(|x| &x.source)
                    .or_else(|| self.sets.get(n).map(|x| &x.source))
                    .or_else(|| self.gauges.get(n).map(|x| &x.source))
                    .or_else(|| self.sequences.get(n).map(|x| &x.source))?;
                Some((n.clone(), src.clone()))
            })
            .collect()
    }
}

fn unknown(task: &str, name: &str) -> SpecError {
    SpecError::UnknownName { task: task.to_string(), name: name.to_string() }
}
