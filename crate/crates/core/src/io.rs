//! Triple files.
//!
//! A triple file is a TOML document with a format version, an optional
//! `[metadata]` table and two arrays of tables, `[[states]]` and `[[edges]]`:
//!
//! ```toml
//! format_version = "1"
//!
//! [metadata]
//! model = "two_point"
//!
//! [metadata.parameters]
//! rho = 1.0000000000000000e0
//!
//! [[states]]
//! id = 0
//! measure = 5.0000000000000000e-1
//!
//! [[edges]]
//! i = 0
//! j = 1
//! rate_ij = 1.0000000000000000e0
//! rate_ji = 1.0000000000000000e0
//! length = 1.0000000000000000e0
//! ```
//!
//! [`to_canonical_string`] writes states ascending and edges in `(i, j)`
//! order with 17 significant digits, so loading and saving again reproduces
//! a canonical file byte for byte.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::triple::{Edge, MarkovTriple, SpaceMeta, TripleOptions};

pub const FORMAT_VERSION: &str = "1";

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileDoc {
    format_version: String,
    #[serde(default)]
    metadata: Option<MetaDoc>,
    states: Vec<StateDoc>,
    #[serde(default)]
    edges: Vec<EdgeDoc>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MetaDoc {
    model: String,
    #[serde(default)]
    parameters: BTreeMap<String, f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct StateDoc {
    id: usize,
    measure: f64,
    label: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeDoc {
    i: usize,
    j: usize,
    rate_ij: f64,
    rate_ji: f64,
    length: Option<f64>,
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(before.len(), |p| before.len() - p - 1) + 1;
    (line, column)
}

/// Parses and validates a triple document.
pub fn parse_triple(text: &str, options: TripleOptions) -> Result<MarkovTriple> {
    let doc: FileDoc = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |s| line_col(text, s.start));
        Error::Parse { line, column, message: e.message().to_string() }
    })?;
    if doc.format_version != FORMAT_VERSION {
        return Err(Error::Parse {
            line: 1,
            column: 1,
            message: format!("unsupported format_version {:?}, expected {FORMAT_VERSION:?}", doc.format_version),
        });
    }
    for (k, s) in doc.states.iter().enumerate() {
        if s.id != k {
            return Err(Error::Space(format!("states[{k}] has id {}; ids must be 0, 1, … in order", s.id)));
        }
    }
    if doc.states.is_empty() {
        return Err(Error::Space("no states".into()));
    }
    let measure = doc.states.iter().map(|s| s.measure).collect();
    let edges: Vec<Edge> = doc
        .edges
        .iter()
        .map(|e| Edge { i: e.i, j: e.j, rate_ij: e.rate_ij, rate_ji: e.rate_ji, length: e.length })
        .collect();
    let mut triple = MarkovTriple::from_edges(measure, &edges, options)?;
    if doc.states.iter().any(|s| s.label.is_some()) {
        let labels = doc.states.iter().map(|s| s.label.clone().unwrap_or_else(|| s.id.to_string())).collect();
        triple = triple.with_labels(labels)?;
    }
    if let Some(m) = doc.metadata {
        triple = triple.with_meta(SpaceMeta { model: m.model, parameters: m.parameters });
    }
    Ok(triple)
}

pub fn load_triple(path: impl AsRef<Path>, options: TripleOptions) -> Result<MarkovTriple> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    parse_triple(&text, options)
}

pub fn save_triple(triple: &MarkovTriple, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_canonical_string(triple)).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

/// 17 significant digits: enough to recover every `f64` exactly.
fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn quoted(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

fn key(s: &str) -> String {
    if !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
        s.to_string()
    } else {
        quoted(s)
    }
}

pub fn to_canonical_string(triple: &MarkovTriple) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "format_version = {}", quoted(FORMAT_VERSION));
    if let Some(meta) = triple.meta() {
        let _ = writeln!(out, "\n[metadata]\nmodel = {}", quoted(&meta.model));
        if !meta.parameters.is_empty() {
            let _ = writeln!(out, "\n[metadata.parameters]");
            for (k, v) in &meta.parameters {
                let _ = writeln!(out, "{} = {}", key(k), num(*v));
            }
        }
    }
    for (id, m) in triple.measure().iter().enumerate() {
        let _ = writeln!(out, "\n[[states]]\nid = {id}\nmeasure = {}", num(*m));
        if let Some(labels) = triple.labels() {
            let _ = writeln!(out, "label = {}", quoted(&labels[id]));
        }
    }
    for e in triple.edges() {
        let _ = writeln!(
            out,
            "\n[[edges]]\ni = {}\nj = {}\nrate_ij = {}\nrate_ji = {}",
            e.i,
            e.j,
            num(e.rate_ij),
            num(e.rate_ji)
        );
        if let Some(len) = e.length {
            let _ = writeln!(out, "length = {}", num(len));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Invariant;
    use crate::spaces;

    #[test]
    fn canonical_roundtrip() {
        for t in [
            spaces::two_point(1.0).unwrap(),
            spaces::ou_chain(50, 6.0).unwrap(),
            spaces::hypercube(3, 0.7).unwrap(),
            spaces::cycle(5).unwrap(),
        ] {
            let text = to_canonical_string(&t);
            let back = parse_triple(&text, TripleOptions::default()).unwrap();
            assert_eq!(back.measure(), t.measure());
            assert_eq!(back.edges(), t.edges());
            assert_eq!(to_canonical_string(&back), text);
        }
    }

    #[test]
    fn save_and_load() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("tp.space");
        let t = spaces::two_point(1.0).unwrap();
        save_triple(&t, &p).unwrap();
        let back = load_triple(&p, TripleOptions::default()).unwrap();
        assert_eq!(back.meta(), t.meta());
        assert!(matches!(load_triple(dir.path().join("missing"), TripleOptions::default()), Err(Error::Io { .. })));
    }

    const BASE: &str = "format_version = \"1\"\n\n[[states]]\nid = 0\nmeasure = 0.5\n\n[[states]]\nid = 1\nmeasure = MASS\n\n[[edges]]\ni = 0\nj = 1\nrate_ij = RATE\nrate_ji = RATE\n";

    fn doc(mass: &str, rate: &str) -> String {
        BASE.replace("MASS", mass).replace("RATE", rate)
    }

    #[test]
    fn named_validation_errors() {
        match parse_triple(&doc("0.5", "-1.0"), TripleOptions::default()) {
            Err(Error::InvalidTriple { invariant, .. }) => assert_eq!(invariant.name(), "generator positivity"),
            other => panic!("{other:?}"),
        }
        match parse_triple(&doc("0.48", "1.0"), TripleOptions::default()) {
            Err(Error::InvalidTriple { invariant, .. }) => assert_eq!(invariant, Invariant::MeasureNormalization),
            other => panic!("{other:?}"),
        }
        // Normalizing 0.5/0.48 breaks the symmetric rates' detailed balance, so fix rates too.
        let skewed = doc("0.48", "1.0").replace("rate_ji = 1.0", &format!("rate_ji = {}", 0.5 / 0.48));
        assert!(parse_triple(&skewed, TripleOptions { normalize_measure: true }).is_ok());
    }

    #[test]
    fn parse_errors_carry_position() {
        let text = doc("0.5", "1.0").replace("rate_ij = 1.0", "rate_ij = ");
        match parse_triple(&text, TripleOptions::default()) {
            Err(Error::Parse { line, column, .. }) => {
                assert_eq!(line, 14);
                assert!(column >= 1);
            }
            other => panic!("{other:?}"),
        }
        let text = doc("0.5", "1.0").replace("format_version = \"1\"", "format_version = \"1\"\nextra = 3");
        assert!(matches!(parse_triple(&text, TripleOptions::default()), Err(Error::Parse { .. })));
    }
}
