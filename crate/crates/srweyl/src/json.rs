//! JSON file formats and a deterministic writer.
//!
//! Frames use `{"n": int, "fields": [[[{"c": "p/q", "e": [..]}, ..], ..], ..]}`:
//! one list per field, holding `n` term lists (component `i` multiplies `d/dx_i`).

use serde::Deserialize;
use serde_json::{json, Map, Value};
use srweyl_core::nilpotent::{Scale, ScaledFrame, Stage};
use srweyl_core::polyfield::parse_rational;
use srweyl_core::strata::{Stratification, Stratum};
use srweyl_core::{Frame, MultiPoly, PolyVectorField, Rational};

use crate::error::{CliError, Result};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameDoc {
    n: usize,
    fields: Vec<Vec<Vec<TermDoc>>>,
}

#[derive(Deserialize)]
struct TermDoc {
    c: RationalDoc,
    e: Vec<u32>,
}

/// A rational given as `"p/q"` text or as a JSON integer.
#[derive(Deserialize)]
#[serde(untagged)]
enum RationalDoc {
    Text(String),
    Int(i64),
}

impl RationalDoc {
    fn value(&self) -> Result<Rational> {
        match self {
            RationalDoc::Text(s) => Ok(parse_rational(s)?),
            RationalDoc::Int(v) => Ok(srweyl_core::polyfield::int(*v)),
        }
    }
}

/// Parses a frame document.
pub fn parse_frame(text: &str) -> Result<Frame> {
    let doc: FrameDoc = serde_json::from_str(text)?;
    if doc.n == 0 {
        return Err(CliError::Input("frame dimension must be positive".into()));
    }
    let mut fields = Vec::with_capacity(doc.fields.len());
    for (k, field) in doc.fields.iter().enumerate() {
        if field.len() != doc.n {
            return Err(CliError::Input(format!("field {} has {} components, expected {}", k + 1, field.len(), doc.n)));
        }
        let mut comps = Vec::with_capacity(doc.n);
        for terms in field {
            let mut pairs = Vec::with_capacity(terms.len());
            for t in terms {
                pairs.push((t.e.clone(), t.c.value()?));
            }
            comps.push(MultiPoly::from_terms(doc.n, pairs)?);
        }
        fields.push(PolyVectorField::new(comps)?);
    }
    Ok(Frame::new(fields)?)
}

fn terms_value(p: &MultiPoly, spatial: usize, annotate: Option<usize>) -> Value {
    let terms: Vec<Value> = p
        .terms()
        .map(|(e, c)| {
            let mut m = Map::new();
            m.insert("c".into(), Value::String(c.to_string()));
            m.insert("e".into(), json!(e[..spatial]));
            match annotate {
                Some(1) => {
                    m.insert("eps_exp".into(), json!(e[spatial]));
                }
                Some(_) => {
                    m.insert("eps_exp".into(), json!(e[spatial..]));
                }
                None => {}
            }
            Value::Object(m)
        })
        .collect();
    Value::Array(terms)
}

/// A frame in the file format.
pub fn frame_value(frame: &Frame) -> Value {
    let n = frame.dim();
    let fields: Vec<Value> = frame
        .fields()
        .iter()
        .map(|f| Value::Array(f.components().iter().map(|c| terms_value(c, n, None)).collect()))
        .collect();
    json!({ "n": n, "fields": fields })
}

/// A frame with symbolic scale parameters: every term carries `eps_exp`, the
/// exponent of the parameter (a list when there are several).
pub fn scaled_frame_value(frame: &ScaledFrame) -> Value {
    let n = frame.dim();
    let params = frame.params();
    let annotate = if params.is_empty() { None } else { Some(params.len()) };
    let fields: Vec<Value> = frame
        .fields()
        .iter()
        .map(|f| Value::Array(f.iter().map(|c| terms_value(c, n, annotate)).collect()))
        .collect();
    json!({ "n": n, "params": params, "fields": fields })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StratumDoc {
    name: String,
    k: usize,
    #[serde(rename = "QS")]
    q_stratum: u32,
    #[serde(rename = "QM")]
    q_ambient: u32,
    #[serde(default)]
    regular: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StratificationDoc {
    strata: Vec<StratumDoc>,
    #[serde(default)]
    adjacency: Vec<[usize; 2]>,
    #[serde(default = "default_true")]
    nilpotentizable: bool,
}

fn default_true() -> bool {
    true
}

/// Parses `{strata: [{name, k, QS, QM, regular}], adjacency: [[i, j]]}`; also
/// returns the optional `nilpotentizable` flag (default true).
pub fn parse_stratification(text: &str) -> Result<(Stratification, bool)> {
    let doc: StratificationDoc = serde_json::from_str(text)?;
    let strata = doc
        .strata
        .into_iter()
        .map(|s| Stratum { name: s.name, dim: s.k, hausdorff: s.q_stratum, ambient: s.q_ambient, regular: s.regular })
        .collect();
    let adjacency = doc.adjacency.into_iter().map(|[i, j]| (i, j)).collect();
    Ok((Stratification::new(strata, adjacency)?, doc.nilpotentizable))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StageDoc {
    point: Vec<RationalDoc>,
    #[serde(default)]
    weights: Option<Vec<u32>>,
    #[serde(default)]
    tau: Option<RationalDoc>,
}

/// Parses a dilation chain `[{point, weights?, tau?}]`; a missing `tau` stays symbolic.
pub fn parse_chain(text: &str) -> Result<Vec<Stage>> {
    let docs: Vec<StageDoc> = serde_json::from_str(text)?;
    docs.into_iter()
        .map(|d| {
            let point = d.point.iter().map(RationalDoc::value).collect::<Result<Vec<_>>>()?;
            let scale = match d.tau {
                Some(t) => Scale::Value(t.value()?),
                None => Scale::Symbolic,
            };
            Ok(Stage { point, weights: d.weights, scale })
        })
        .collect()
}

/// Formats a float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Serializes with sorted keys, two-space indentation and 17 significant
/// digits for every float, so equal values give equal bytes.
pub fn to_string(v: &Value) -> String {
    let mut out = String::new();
    write_value(v, 0, &mut out);
    out.push('\n');
    out
}

fn write_value(v: &Value, depth: usize, out: &mut String) {
    let pad = |d: usize, out: &mut String| out.extend(std::iter::repeat("  ").take(d));
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_i64() || n.is_u64() {
                out.push_str(&n.to_string());
            } else {
                match n.as_f64() {
                    Some(x) if x.is_finite() => out.push_str(&fmt_f64(x)),
                    _ => out.push_str("null"),
                }
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) => {
            // short arrays of scalars stay on one line
            if items.iter().all(|x| !x.is_array() && !x.is_object()) {
                out.push('[');
                for (i, x) in items.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    write_value(x, depth, out);
                }
                out.push(']');
                return;
            }
            out.push_str("[\n");
            for (i, x) in items.iter().enumerate() {
                pad(depth + 1, out);
                write_value(x, depth + 1, out);
                out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
            }
            pad(depth, out);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push_str("{\n");
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            for (i, k) in keys.iter().enumerate() {
                pad(depth + 1, out);
                out.push_str(&Value::String((*k).clone()).to_string());
                out.push_str(": ");
                write_value(&map[k.as_str()], depth + 1, out);
                out.push_str(if i + 1 < keys.len() { ",\n" } else { "\n" });
            }
            pad(depth, out);
            out.push('}');
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEIS: &str = r#"{"n": 3, "fields": [
        [[{"c": "1", "e": [0,0,0]}], [], []],
        [[], [{"c": 1, "e": [0,0,0]}], [{"c": "1/1", "e": [1,0,0]}]]
    ]}"#;

    #[test]
    fn frame_round_trip() {
        let f = parse_frame(HEIS).unwrap();
        assert_eq!(f, Frame::parse(&[&["1", "0", "0"], &["0", "1", "x1"]]).unwrap());
        let again = parse_frame(&to_string(&frame_value(&f))).unwrap();
        assert_eq!(again, f);
    }

    #[test]
    fn malformed_frames_are_rejected() {
        assert!(parse_frame(r#"{"n": 2, "fields": [[[]]]}"#).is_err());
        assert!(parse_frame(r#"{"n": 1, "fields": [[[{"c": "1/0", "e": [0]}]]]}"#).is_err());
        assert!(parse_frame(r#"{"n": 1, "fields": [[[{"c": "1", "e": [0, 1]}]]]}"#).is_err());
    }

    #[test]
    fn floats_have_seventeen_digits() {
        assert_eq!(to_string(&json!(0.1)), "1.0000000000000001e-1\n");
        assert_eq!(to_string(&json!({"b": 1, "a": [2.0]})), "{\n  \"a\": [2.0000000000000000e0],\n  \"b\": 1\n}\n");
    }

    #[test]
    fn stratification_document() {
        let text = r#"{"strata": [{"name": "S", "k": 1, "QS": 2, "QM": 3},
                                  {"name": "M", "k": 2, "QS": 2, "QM": 2, "regular": true}]}"#;
        let (s, nil) = parse_stratification(text).unwrap();
        assert!(nil);
        assert_eq!(s.chains(), [vec![0, 1]]);
    }

    #[test]
    fn chain_document() {
        let c = parse_chain(r#"[{"point": ["0", "0"], "weights": [1, 3]}, {"point": [0, 1], "tau": "1/3"}]"#).unwrap();
        assert_eq!(c[0].scale, Scale::Symbolic);
        assert_eq!(c[1].scale, Scale::Value(srweyl_core::polyfield::rat(1, 3)));
    }
}
