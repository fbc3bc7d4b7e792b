//! Exit codes, report assembly and deterministic number formatting.

use std::fmt;
use std::fs;
use std::path::Path;

use serde_json::{Map, Value};

use sdwave_core::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_MODEL: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;
pub const EXIT_NONCONVERGENCE: i32 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        Self { code: EXIT_CONFIG, message: msg.into() }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Self::config(format!("{}: {e}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Domain(_) | Error::ModelInvalid(_) | Error::HypothesisViolation { .. } => EXIT_MODEL,
            Error::InvalidContext(_) | Error::NoRoots { .. } | Error::Precondition(_) => EXIT_CONFIG,
            Error::NonConvergence { .. } | Error::SchemeFailure(_) | Error::Internal(_) => EXIT_NONCONVERGENCE,
        };
        Self { code, message: e.to_string() }
    }
}

/// `x` rounded to 15 significant digits.
pub fn round15(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.14e}").parse().unwrap_or(x)
}

/// Shortest round-trip text of `round15(x)`.
pub fn fmt15(x: f64) -> String {
    format!("{:?}", round15(x))
}

fn round_value(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = round15(n.as_f64().unwrap());
            serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(round_value).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round_value(v))).collect()),
        other => other,
    }
}

/// JSON number or `null` for non-finite values.
pub fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

#[derive(Debug, Clone)]
pub struct Report {
    pub command: String,
    pub digest: Option<String>,
    pub results: Map<String, Value>,
    pub checks: Map<String, Value>,
    pub timings: Option<f64>,
}

impl Report {
    pub fn new(command: &str, digest: Option<String>) -> Self {
        Self { command: command.into(), digest, results: Map::new(), checks: Map::new(), timings: None }
    }

    pub fn set(&mut self, key: &str, v: impl Into<Value>) {
        self.results.insert(key.into(), v.into());
    }

    pub fn setf(&mut self, key: &str, x: f64) {
        self.results.insert(key.into(), num(x));
    }

    pub fn check(&mut self, key: &str, ok: bool) {
        self.checks.insert(key.into(), Value::Bool(ok));
    }

    pub fn all_checks_pass(&self) -> bool {
        self.checks.values().all(|v| v.as_bool().unwrap_or(false))
    }

    pub fn to_value(&self) -> Value {
        let mut o = Map::new();
        o.insert("command".into(), Value::String(self.command.clone()));
        o.insert("config_digest".into(), self.digest.clone().map_or(Value::Null, Value::String));
        o.insert("results".into(), Value::Object(self.results.clone()));
        o.insert("checks".into(), Value::Object(self.checks.clone()));
        o.insert("version".into(), Value::String(env!("CARGO_PKG_VERSION").into()));
        if let Some(t) = self.timings {
            let mut tm = Map::new();
            tm.insert("wall_seconds".into(), num(t));
            o.insert("timings".into(), Value::Object(tm));
        }
        round_value(Value::Object(o))
    }

    pub fn to_json(&self) -> String {
        // maps are key-sorted, so the text is deterministic
        serde_json::to_string_pretty(&self.to_value()).unwrap() + "\n"
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{}\n", self.command);
        let v = self.to_value();
        for section in ["results", "checks"] {
            if let Some(Value::Object(o)) = v.get(section) {
                for (k, x) in o {
                    out.push_str(&format!("  {k}: {}\n", compact(x)));
                }
            }
        }
        if let Some(t) = self.timings {
            out.push_str(&format!("  wall time: {t:.3} s\n"));
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        fs::write(path, self.to_json()).map_err(|e| CliError::io(path, e))
    }
}

fn compact(v: &Value) -> String {
    match v {
        Value::Array(a) if a.len() > 6 => format!("[{} entries]", a.len()),
        Value::String(s) => s.clone(),
        _ => v.to_string(),
    }
}

/// Writes rows of numbers as CSV with the given header.
pub fn write_csv(path: &Path, header: &str, rows: impl IntoIterator<Item = Vec<f64>>) -> Result<(), CliError> {
    let mut text = String::from(header);
    text.push('\n');
    for row in rows {
        let cells: Vec<String> = row.into_iter().map(fmt15).collect();
        text.push_str(&cells.join(","));
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_keeps_fifteen_digits() {
        assert_eq!(fmt15(0.1 + 0.2), "0.3");
        assert_eq!(fmt15(2.0), "2.0");
        assert_eq!(round15(1.234567890123456789), 1.23456789012346);
        assert_eq!(fmt15(1e-20), "1e-20");
    }

    #[test]
    fn report_json_is_sorted_and_stable() {
        let mut r = Report::new("speed", None);
        r.setf("zeta", 1.0 / 3.0);
        r.setf("alpha", f64::NAN);
        r.check("ok", true);
        let a = r.to_json();
        assert_eq!(a, r.to_json());
        assert!(a.find("alpha").unwrap() < a.find("zeta").unwrap());
        assert!(a.contains("0.333333333333333"));
        assert!(a.contains("\"alpha\": null"));
    }

    #[test]
    fn error_codes_follow_contract() {
        assert_eq!(CliError::from(Error::ModelInvalid("x".into())).code, EXIT_MODEL);
        let nc = Error::NonConvergence { iterations: 1, last_diff: 1.0, trace: vec![] };
        assert_eq!(CliError::from(nc).code, EXIT_NONCONVERGENCE);
        assert_eq!(CliError::from(Error::Precondition("x".into())).code, EXIT_CONFIG);
    }
}
