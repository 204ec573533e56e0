//! Run ledgers: one JSON object per line. Exact values are `"p/q"` strings,
//! floats use the shortest representation that reads back to the same bits.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use gaugeks_core::{IntegralResult, Rational, Scalar};
use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Pass,
    Fail,
    Error,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Record {
    pub task: String,
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trial: Option<u64>,
    pub inputs_digest: String,
    pub method: Option<String>,
    pub value: Value,
    pub error_bound: Value,
    pub residual: Value,
    pub status: Status,
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_ms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    #[serde(skip_serializing_if = "Map::is_empty")]
    pub details: Map<String, Value>,
}

impl Record {
    pub fn new(task: impl Into<String>, kind: impl Into<String>, inputs_digest: String) -> Self {
        Record {
            task: task.into(),
            kind: kind.into(),
            trial: None,
            inputs_digest,
            method: None,
            value: Value::Null,
            error_bound: Value::Null,
            residual: Value::Null,
            status: Status::Ok,
            seed: None,
            wall_ms: None,
            message: None,
            details: Map::new(),
        }
    }

    pub fn with_result(mut self, r: &IntegralResult) -> Self {
        self.method = Some(r.method.name().to_string());
        self.value = scalar(&r.value);
        self.error_bound = float(r.error_bound);
        self.details.insert("exact".into(), Value::Bool(r.exact));
        if r.iterations > 0 {
            self.details.insert("iterations".into(), r.iterations.into());
        }
        self
    }

    pub fn failed(mut self, status: Status, message: impl Into<String>) -> Self {
        self.status = status;
        self.message = Some(message.into());
        self
    }

    pub fn detail(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.details.insert(key.to_string(), value.into());
        self
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("records serialize")
    }
}

pub fn rational(r: &Rational) -> Value {
    Value::String(format!("{}/{}", r.numer(), r.denom()))
}

pub fn scalar(s: &Scalar) -> Value {
    match s {
        Scalar::Exact(r) => rational(r),
        Scalar::Approx(x) => float(*x),
    }
}

/// Non-finite floats have no JSON number form and become strings.
pub fn float(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or_else(|| Value::String(x.to_string()), Value::Number)
}

/// SHA-256 over length-prefixed parts.
pub fn digest<I, S>(parts: I) -> String
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut h = Sha256::new();
    for p in parts {
        let p = p.as_ref();
        h.update((p.len() as u64).to_le_bytes());
        h.update(p.as_bytes());
    }
    hex::encode(h.finalize())
}

pub fn write_lines(out: &mut impl Write, records: &[Record]) -> io::Result<()> {
    for r in records {
        writeln!(out, "{}", r.to_line())?;
    }
    out.flush()
}

pub fn write_file(path: &Path, records: &[Record]) -> io::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    write_lines(&mut BufWriter::new(File::create(path)?), records)
}

/// `explicit`, else `$GAUGEKS_LEDGER_DIR/<stem>.jsonl`, else nothing.
pub fn destination(explicit: Option<&Path>, stem: &str) -> Option<PathBuf> {
    if let Some(p) = explicit {
        return Some(p.to_path_buf());
    }
    let dir = std::env::var_os("GAUGEKS_LEDGER_DIR").filter(|d| !d.is_empty())?;
    Some(PathBuf::from(dir).join(format!("{stem}.jsonl")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use gaugeks_core::scalar::{int, rat};

    #[test]
    fn values_are_exact_strings_or_round_trip_floats() {
        assert_eq!(scalar(&Scalar::from(rat(-3, 4))), Value::String("-3/4".into()));
        assert_eq!(scalar(&Scalar::from(int(2))), Value::String("2/1".into()));
        let x = 0.1 + 0.2;
        let text = serde_json::to_string(&scalar(&Scalar::Approx(x))).unwrap();
        assert_eq!(text.parse::<f64>().unwrap().to_bits(), x.to_bits());
        assert_eq!(float(f64::INFINITY), Value::String("inf".into()));
    }

    #[test]
    fn field_order_is_fixed() {
        let r = Record::new("t", "integrate", digest(["a"])).detail("z", 1).detail("a", 2);
        let line = r.to_line();
        assert!(line.starts_with(r#"{"task":"t","kind":"integrate","inputs_digest":""#), "{line}");
        assert!(line.ends_with(r#""details":{"a":2,"z":1}}"#), "{line}");
    }

    #[test]
    fn digest_separates_parts() {
        assert_ne!(digest(["ab", "c"]), digest(["a", "bc"]));
        assert_eq!(digest(["x"]).len(), 64);
    }
}
