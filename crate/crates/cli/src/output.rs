use std::io::Write;

use serde::ser::{Serialize, Serializer};

use crate::config::Format;

pub const NEG_INF: &str = "NEG_INF";

/// Rounds to 12 significant digits.
pub fn round12(v: f64) -> f64 {
    if !v.is_finite() || v == 0.0 {
        return v;
    }
    format!("{v:.11e}").parse().expect("formatted float parses")
}

/// Text form of a table cell: 12 significant digits, shortest representation.
pub fn fmt_num(v: f64) -> String {
    if v == f64::NEG_INFINITY {
        NEG_INF.to_string()
    } else if v.is_nan() {
        "NAN".to_string()
    } else if v == f64::INFINITY {
        "INF".to_string()
    } else {
        let r = round12(v);
        // `-0` and `0` must not differ between runs that reach zero differently.
        format!("{:?}", if r == 0.0 { 0.0 } else { r })
    }
}

/// A number serialized with [`fmt_num`] rules: JSON numbers when finite,
/// the `NEG_INF` token otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Num(pub f64);

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            let r = round12(self.0);
            s.serialize_f64(if r == 0.0 { 0.0 } else { r })
        } else {
            s.serialize_str(&fmt_num(self.0))
        }
    }
}

/// One table row. Column order is fixed: check, state, time, margin, lhs, rhs.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub check: String,
    pub state: Option<usize>,
    pub time: Option<f64>,
    pub margin: f64,
    pub lhs: f64,
    pub rhs: f64,
}

impl Row {
    pub fn new(check: impl Into<String>, state: Option<usize>, time: Option<f64>, lhs: f64, rhs: f64) -> Self {
        Self { check: check.into(), state, time, margin: lhs - rhs, lhs, rhs }
    }
}

#[derive(serde::Serialize)]
struct JsonRow<'a> {
    check: &'a str,
    state: Option<usize>,
    time: Option<Num>,
    margin: Num,
    lhs: Num,
    rhs: Num,
}

pub const COLUMNS: [&str; 6] = ["check", "state", "time", "margin", "lhs", "rhs"];

pub fn write_table<W: Write>(out: W, rows: &[Row], format: Format) -> std::io::Result<()> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(COLUMNS)?;
            for r in rows {
                w.write_record([
                    r.check.clone(),
                    r.state.map(|s| s.to_string()).unwrap_or_default(),
                    r.time.map(fmt_num).unwrap_or_default(),
                    fmt_num(r.margin),
                    fmt_num(r.lhs),
                    fmt_num(r.rhs),
                ])?;
            }
            w.flush()
        }
        Format::JsonLines => {
            let mut out = std::io::BufWriter::new(out);
            for r in rows {
                let j = JsonRow {
                    check: &r.check,
                    state: r.state,
                    time: r.time.map(Num),
                    margin: Num(r.margin),
                    lhs: Num(r.lhs),
                    rhs: Num(r.rhs),
                };
                serde_json::to_writer(&mut out, &j)?;
                out.write_all(b"\n")?;
            }
            out.flush()
        }
    }
}
