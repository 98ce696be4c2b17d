//! File formats: problem JSON, trace CSV, and canonical JSON for reports.
//!
//! Canonical JSON has sorted keys, two-space indentation and every float
//! written with 17 significant digits, so equal values give equal bytes.

use std::io;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};
use serde_json::{json, Map, Value};

use crate::descent::DescentTrace;
use crate::error::{Error, Result};
use crate::linalg::SymMatrix;
use crate::problem::{Problem, SpherePoint};

pub const TOOL: &str = "lojax";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

struct CanonicalFormatter<'a>(PrettyFormatter<'a>);

macro_rules! delegate {
    ($($name:ident $(($arg:ident: $ty:ty))?),* $(,)?) => {
        $(fn $name<W: ?Sized + io::Write>(&mut self, w: &mut W $(, $arg: $ty)?) -> io::Result<()> {
            self.0.$name(w $(, $arg)?)
        })*
    };
}

impl Formatter for CanonicalFormatter<'_> {
    delegate!(
        begin_array,
        end_array,
        begin_array_value(first: bool),
        end_array_value,
        begin_object,
        end_object,
        begin_object_key(first: bool),
        begin_object_value,
        end_object_value,
    );

    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        write!(w, "{}", fmt_f64(v))
    }
}

/// 17 significant digits in scientific notation; round-trips every `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn sort_keys(v: Value) -> Value {
    match v {
        Value::Object(m) => {
            let mut entries: Vec<(String, Value)> = m.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            Value::Object(entries.into_iter().map(|(k, v)| (k, sort_keys(v))).collect())
        }
        Value::Array(a) => Value::Array(a.into_iter().map(sort_keys).collect()),
        other => other,
    }
}

/// Canonical pretty JSON with a trailing newline. Non-finite floats become
/// `null`.
pub fn to_canonical_json<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, CanonicalFormatter(PrettyFormatter::new()));
    sort_keys(v)
        .serialize(&mut ser)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

/// Tool, version, command and full option echo carried by every artifact.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: Value,
}

impl Provenance {
    pub fn new(command: &str, config: Value) -> Self {
        Self {
            tool: TOOL.into(),
            version: VERSION.into(),
            command: command.into(),
            config,
        }
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("provenance serializes")
    }
}

/// A problem as stored on disk, with whatever provenance it carried.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemFile {
    pub problem: Problem,
    /// Point of interest recorded by a generator (the constructed `x*`).
    pub designated_point: Option<Vec<f64>>,
    pub provenance: Option<Value>,
}

impl ProblemFile {
    pub fn new(problem: Problem) -> Self {
        Self {
            problem,
            designated_point: None,
            provenance: None,
        }
    }

    pub fn to_value(&self) -> Value {
        let p = &self.problem;
        let mut meta = Map::new();
        meta.insert("kind".into(), json!(p.meta.kind));
        meta.insert("seed".into(), json!(p.meta.seed));
        if let Some(x) = &self.designated_point {
            meta.insert("designated_point".into(), json!(x));
        }
        let mut root = Map::new();
        root.insert("n".into(), json!(p.n()));
        root.insert("A".into(), json!(p.a().to_rows()));
        root.insert("g".into(), json!(p.g()));
        root.insert("offset".into(), json!(p.offset()));
        root.insert("meta".into(), Value::Object(meta));
        if let Some(pr) = &self.provenance {
            root.insert("provenance".into(), pr.clone());
        }
        Value::Object(root)
    }

    pub fn to_json(&self) -> Result<String> {
        to_canonical_json(&self.to_value())
    }
}

fn schema(field: &str, msg: impl Into<String>) -> Error {
    Error::Schema {
        field: field.into(),
        msg: msg.into(),
    }
}

fn req<'a>(obj: &'a Map<String, Value>, field: &str) -> Result<&'a Value> {
    obj.get(field).ok_or_else(|| schema(field, "missing"))
}

fn as_f64(v: &Value, field: &str) -> Result<f64> {
    v.as_f64().ok_or_else(|| schema(field, "expected a number"))
}

fn as_vec(v: &Value, field: &str) -> Result<Vec<f64>> {
    v.as_array()
        .ok_or_else(|| schema(field, "expected an array of numbers"))?
        .iter()
        .enumerate()
        .map(|(i, e)| as_f64(e, &format!("{field}[{i}]")))
        .collect()
}

/// Parses problem JSON; errors name the offending field.
pub fn parse_problem(text: &str) -> Result<ProblemFile> {
    let root: Value = serde_json::from_str(text).map_err(|e| schema("<root>", e.to_string()))?;
    let obj = root.as_object().ok_or_else(|| schema("<root>", "expected an object"))?;
    let n = req(obj, "n")?
        .as_u64()
        .ok_or_else(|| schema("n", "expected a non-negative integer"))? as usize;
    let rows = req(obj, "A")?
        .as_array()
        .ok_or_else(|| schema("A", "expected an array of rows"))?;
    if rows.len() != n {
        return Err(schema("A", format!("expected {n} rows, found {}", rows.len())));
    }
    let rows: Vec<Vec<f64>> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let r = as_vec(r, &format!("A[{i}]"))?;
            if r.len() != n {
                return Err(schema(&format!("A[{i}]"), format!("expected {n} entries, found {}", r.len())));
            }
            Ok(r)
        })
        .collect::<Result<_>>()?;
    for i in 0..n {
        for j in 0..i {
            let (a, b) = (rows[i][j], rows[j][i]);
            if (a - b).abs() > 1e-12 * (1.0 + a.abs().max(b.abs())) {
                return Err(schema(&format!("A[{i}][{j}]"), "matrix is not symmetric"));
            }
        }
    }
    let g = as_vec(req(obj, "g")?, "g")?;
    if g.len() != n {
        return Err(schema("g", format!("expected {n} entries, found {}", g.len())));
    }
    let offset = match obj.get("offset") {
        None | Some(Value::Null) => 0.0,
        Some(v) => as_f64(v, "offset")?,
    };
    let a = SymMatrix::from_rows(&rows).map_err(|e| schema("A", e.to_string()))?;
    let mut problem = Problem::new(a, g)
        .map_err(|e| schema("<root>", e.to_string()))?
        .with_offset(offset);
    let mut designated_point = None;
    if let Some(meta) = obj.get("meta") {
        let meta = meta.as_object().ok_or_else(|| schema("meta", "expected an object"))?;
        let kind = req(meta, "kind")
            .map_err(|_| schema("meta.kind", "missing"))?
            .as_str()
            .ok_or_else(|| schema("meta.kind", "expected a string"))?;
        let seed = req(meta, "seed")
            .map_err(|_| schema("meta.seed", "missing"))?
            .as_u64()
            .ok_or_else(|| schema("meta.seed", "expected a non-negative integer"))?;
        problem = problem.with_meta(kind, seed);
        if let Some(x) = meta.get("designated_point") {
            let x = as_vec(x, "meta.designated_point")?;
            if x.len() != n {
                return Err(schema("meta.designated_point", format!("expected {n} entries")));
            }
            designated_point = Some(x);
        }
    }
    Ok(ProblemFile {
        problem,
        designated_point,
        provenance: obj.get("provenance").cloned(),
    })
}

pub fn read_problem(path: &std::path::Path) -> std::result::Result<ProblemFile, ReadError> {
    let text = std::fs::read_to_string(path).map_err(|e| ReadError::Io(format!("{}: {e}", path.display())))?;
    Ok(parse_problem(&text)?)
}

#[derive(Debug, thiserror::Error)]
pub enum ReadError {
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Format(#[from] Error),
}

pub const TRACE_HEADER: &str = "k,f,grad_norm,step_norm";

/// One CSV row per stored iterate. `step_norm` is `‖xᵏ − xᵏ⁺¹‖`, empty on
/// the final row; `dist_to_xstar` is present when `x_star` is given. A
/// leading `#` line carries the provenance as compact JSON.
pub fn trace_to_csv(trace: &DescentTrace, x_star: Option<&SpherePoint>, prov: Option<&Provenance>) -> String {
    let mut out = String::new();
    if let Some(pr) = prov {
        out.push_str("# ");
        out.push_str(&serde_json::to_string(&sort_keys(pr.to_value())).expect("provenance serializes"));
        out.push('\n');
    }
    out.push_str(TRACE_HEADER);
    if x_star.is_some() {
        out.push_str(",dist_to_xstar");
    }
    out.push('\n');
    for (k, x) in trace.iterate_indices.iter().zip(&trace.iterates) {
        let step = trace.step_norms.get(*k).map(|s| fmt_f64(*s)).unwrap_or_default();
        out.push_str(&format!(
            "{k},{},{},{step}",
            fmt_f64(trace.f_values[*k]),
            fmt_f64(trace.grad_norms[*k])
        ));
        if let Some(xs) = x_star {
            out.push(',');
            out.push_str(&fmt_f64(x.distance(xs)));
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub k: usize,
    pub f: f64,
    pub grad_norm: f64,
    pub step_norm: Option<f64>,
    pub dist_to_xstar: Option<f64>,
}

/// Reads a trace CSV, skipping `#` lines.
pub fn parse_trace_csv(text: &str) -> Result<Vec<TraceRow>> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| schema("header", "empty trace"))?;
    let cols: Vec<&str> = header.split(',').collect();
    let with_dist = match cols.as_slice() {
        ["k", "f", "grad_norm", "step_norm"] => false,
        ["k", "f", "grad_norm", "step_norm", "dist_to_xstar"] => true,
        _ => return Err(schema("header", format!("unexpected columns `{header}`"))),
    };
    lines
        .enumerate()
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != cols.len() {
                return Err(schema(&format!("row {}", i + 1), "wrong number of fields"));
            }
            let num = |s: &str, c: &str| -> Result<f64> {
                s.parse().map_err(|_| schema(&format!("row {}.{c}", i + 1), "expected a number"))
            };
            let opt = |s: &str, c: &str| -> Result<Option<f64>> {
                if s.is_empty() {
                    Ok(None)
                } else {
                    num(s, c).map(Some)
                }
            };
            Ok(TraceRow {
                k: f[0].parse().map_err(|_| schema(&format!("row {}.k", i + 1), "expected an integer"))?,
                f: num(f[1], "f")?,
                grad_norm: num(f[2], "grad_norm")?,
                step_norm: opt(f[3], "step_norm")?,
                dist_to_xstar: if with_dist { opt(f[4], "dist_to_xstar")? } else { None },
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::descent::{solve_rgd, RgdOptions};
    use crate::problem::{make_example1, make_random};

    #[test]
    fn example1_file() {
        let text = ProblemFile::new(make_example1()).to_json().unwrap();
        let v: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["A"], json!([[0.0, 0.0], [0.0, 1.0]]));
        assert_eq!(v["g"], json!([0.0, -1.0]));
        assert_eq!(v["offset"], json!(0.5));
        assert_eq!(v["meta"]["kind"], json!("example1"));
        assert!(text.contains("5.0000000000000000e-1"));
    }

    #[test]
    fn roundtrip_is_byte_identical() {
        for seed in 0..5 {
            let mut f = ProblemFile::new(make_random(4, seed, (-1.0, 1.0), 1.0).unwrap());
            f.designated_point = Some(vec![0.5, 0.5, 0.5, 0.5]);
            f.provenance = Some(Provenance::new("gen", json!({"seed": seed, "n": 4})).to_value());
            let a = f.to_json().unwrap();
            let back = parse_problem(&a).unwrap();
            assert_eq!(back, f);
            assert_eq!(back.to_json().unwrap(), a);
        }
    }

    #[test]
    fn keys_are_sorted() {
        let text = to_canonical_json(&json!({"b": 1, "a": {"z": 1.5, "c": [2.0]}})).unwrap();
        let a = text.find("\"a\"").unwrap();
        let b = text.find("\"b\"").unwrap();
        assert!(a < b && text.find("\"c\"").unwrap() < text.find("\"z\"").unwrap());
        assert!(to_canonical_json(&f64::INFINITY).unwrap().starts_with("null"));
    }

    #[test]
    fn schema_errors_name_fields() {
        let field = |t: &str| match parse_problem(t) {
            Err(Error::Schema { field, .. }) => field,
            other => panic!("{other:?}"),
        };
        assert_eq!(field("{"), "<root>");
        assert_eq!(field(r#"{"A": [[1]], "g": [0]}"#), "n");
        assert_eq!(field(r#"{"n": 2, "A": [[1, 0]], "g": [0, 0]}"#), "A");
        assert_eq!(field(r#"{"n": 2, "A": [[1, 0], [0, "x"]], "g": [0, 0]}"#), "A[1][1]");
        assert_eq!(field(r#"{"n": 2, "A": [[1, 0], [2, 1]], "g": [0, 0]}"#), "A[1][0]");
        assert_eq!(field(r#"{"n": 2, "A": [[1, 0], [0, 1]], "g": [0]}"#), "g");
        assert_eq!(field(r#"{"n": 2, "A": [[1, 0], [0, 1]], "g": [0, 0], "meta": {"seed": 1}}"#), "meta.kind");
        let ok = parse_problem(r#"{"n": 2, "A": [[1, 0], [0, 1]], "g": [0, 0]}"#).unwrap();
        assert_eq!(ok.problem.offset(), 0.0);
    }

    #[test]
    fn trace_csv_roundtrip() {
        let p = make_example1();
        let x0 = SpherePoint::normalize(vec![0.6, 0.8]).unwrap();
        let t = solve_rgd(&p, &x0, RgdOptions { max_iters: 50, ..Default::default() }).unwrap();
        let xs = SpherePoint::basis(2, 1);
        let prov = Provenance::new("run", json!({}));
        let csv = trace_to_csv(&t, Some(&xs), Some(&prov));
        let mut lines = csv.lines();
        assert!(lines.next().unwrap().starts_with("# {"));
        assert_eq!(lines.next().unwrap(), "k,f,grad_norm,step_norm,dist_to_xstar");
        let rows = parse_trace_csv(&csv).unwrap();
        assert_eq!(rows.len(), 51);
        assert_eq!(rows[3].f, t.f_values[3]);
        assert_eq!(rows[3].step_norm, Some(t.step_norms[3]));
        assert_eq!(rows[50].step_norm, None);
        assert!(rows[50].dist_to_xstar.unwrap() < rows[0].dist_to_xstar.unwrap());
        assert!(parse_trace_csv("a,b\n").is_err());
    }
}
