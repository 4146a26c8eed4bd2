//! Report documents. Floats are written with 17 significant digits so that
//! reading a report back reproduces every number bit for bit; infinities and
//! NaN, which JSON cannot represent, are written as the strings `"+inf"`,
//! `"-inf"` and `"nan"`.

use std::io;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};
use serde_json::{json, Map, Value};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Field excluded from determinism comparisons.
pub const TIMESTAMP_FIELD: &str = "timestamp";

pub fn num(v: f64) -> Value {
    if v.is_finite() {
        Value::from(v)
    } else if v.is_nan() {
        Value::from("nan")
    } else if v > 0.0 {
        Value::from("+inf")
    } else {
        Value::from("-inf")
    }
}

pub fn nums(v: &[f64]) -> Value {
    Value::Array(v.iter().copied().map(num).collect())
}

pub fn blocks(v: &[Vec<f64>]) -> Value {
    Value::Array(v.iter().map(|b| nums(b)).collect())
}

/// Reads back a number written by [`num`].
pub fn read_num(v: &Value) -> Option<f64> {
    match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => match s.as_str() {
            "+inf" => Some(f64::INFINITY),
            "-inf" => Some(f64::NEG_INFINITY),
            "nan" => Some(f64::NAN),
            _ => None,
        },
        _ => None,
    }
}

#[derive(Debug, Clone)]
pub struct InputInfo {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone)]
pub struct Report {
    pub command: String,
    pub status: String,
    pub input: Option<InputInfo>,
    pub tolerances: Map<String, Value>,
    pub results: Value,
}

impl Report {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            status: "ok".to_string(),
            input: None,
            tolerances: Map::new(),
            results: Value::Null,
        }
    }

    pub fn to_value(&self, timestamp: Option<u64>) -> Value {
        let mut doc = Map::new();
        doc.insert("command".into(), json!(self.command));
        doc.insert("version".into(), json!(VERSION));
        doc.insert("status".into(), json!(self.status));
        doc.insert(
            "input".into(),
            match &self.input {
                Some(i) => json!({"path": i.path, "sha256": i.sha256}),
                None => Value::Null,
            },
        );
        doc.insert("tolerances".into(), Value::Object(self.tolerances.clone()));
        doc.insert("results".into(), self.results.clone());
        if let Some(t) = timestamp {
            doc.insert(TIMESTAMP_FIELD.into(), json!(t));
        }
        Value::Object(doc)
    }

    /// Pretty-printed JSON with the current time as the timestamp.
    pub fn render(&self) -> String {
        let now = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        to_string(&self.to_value(Some(now)))
    }
}

/// Pretty-printing formatter that writes floats in `{:.16e}` form.
struct Float17(PrettyFormatter<'static>);

impl Formatter for Float17 {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_array(writer)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_array(writer)
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(writer, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_array_value(writer)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_object(writer)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_object(writer)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(writer, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_object_value(writer)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_object_value(writer)
    }
}

pub fn to_string(value: &Value) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, Float17(PrettyFormatter::new()));
    value.serialize(&mut ser).expect("writing to memory cannot fail");
    out.push(b'\n');
    String::from_utf8(out).expect("serde_json writes UTF-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        let vals = [0.1, 1.0 / 3.0, -2.5e-300, 1e300, 0.75, -0.0, f64::MIN_POSITIVE];
        let text = to_string(&nums(&vals));
        let back: Value = serde_json::from_str(&text).unwrap();
        for (a, b) in vals.iter().zip(back.as_array().unwrap()) {
            assert_eq!(a.to_bits(), read_num(b).unwrap().to_bits());
        }
    }

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(to_string(&num(0.75)).trim(), "7.5000000000000000e-1");
        assert_eq!(to_string(&num(f64::INFINITY)).trim(), "\"+inf\"");
        assert_eq!(to_string(&json!(3)).trim(), "3");
    }
}
