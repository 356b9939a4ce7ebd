//! Family description files.
//!
//! A file is either a whole family
//!
//! ```json
//! {"n": 2, "region": {"type": "hurwitz"}, "mode": "polytope",
//!  "entries": [[{"vertices": [[1, 1], [2, 1]]}, [0.5]], [[0], {"vertices": [[3, 1]]}]],
//!  "tolerances": {"boundary_grid": 256}}
//! ```
//!
//! or a single cell, read as a 1x1 Hurwitz family. Coefficients are
//! ascending. A bare coefficient array is a fixed entry.

use std::fmt;
use std::path::Path;

use edgestab::family::{Entry, FamilyMode, MatrixFamily, Severity};
use edgestab::stab::Tolerances;
use edgestab::{ComplexValue, Polynomial, Region};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq)]
pub struct SchemaError {
    /// JSON path of the offending value, e.g. `entries[1][0].vertices[2]`.
    pub path: String,
    /// One-based line, for syntax errors.
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for SchemaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, self.path.is_empty()) {
            (Some(line), _) => write!(f, "line {line}: {}", self.message),
            (None, true) => f.write_str(&self.message),
            (None, false) => write!(f, "{}: {}", self.path, self.message),
        }
    }
}

impl std::error::Error for SchemaError {}

/// A parsed, well-formed family file.
#[derive(Debug, Clone)]
pub struct FamilyFile {
    pub family: MatrixFamily,
    pub tolerances: Option<Tolerances>,
    /// Hex SHA-256 of the raw file bytes.
    pub digest: String,
}

pub fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn read_family(path: &Path) -> Result<FamilyFile, crate::CliError> {
    let bytes = std::fs::read(path).map_err(|e| crate::CliError::Io { path: path.display().to_string(), source: e })?;
    parse_family(&bytes)
}

/// Parses and validates. Warnings (duplicate vertices) pass; errors fail.
pub fn parse_family(bytes: &[u8]) -> Result<FamilyFile, crate::CliError> {
    let (family, tolerances) = parse_document(bytes)?;
    let errors: Vec<_> = family
        .validate()
        .into_iter()
        .filter(|d| d.severity() == Severity::Error)
        .collect();
    if !errors.is_empty() {
        return Err(edgestab::Error::ValidationFailure(errors).into());
    }
    Ok(FamilyFile { family, tolerances, digest: digest(bytes) })
}

/// Structural parse only; no validation beyond shape.
pub fn parse_document(bytes: &[u8]) -> Result<(MatrixFamily, Option<Tolerances>), SchemaError> {
    let v: Value = serde_json::from_slice(bytes).map_err(|e| SchemaError {
        path: String::new(),
        line: Some(e.line()),
        message: e.to_string(),
    })?;
    let Value::Object(obj) = &v else {
        return Err(err("", "top level must be an object"));
    };
    if !obj.contains_key("entries") {
        let entry = match cell(&v, "")? {
            Cell::Given(e) => e,
            Cell::Fixed(c) => Entry::fixed(Polynomial::new(c)),
        };
        let fam = MatrixFamily::new(1, vec![entry], Region::HurwitzHalfPlane).map_err(|e| err("", &e.to_string()))?;
        return Ok((fam, None));
    }
    allow_keys(obj, "", &["n", "region", "mode", "entries", "tolerances"])?;

    let rows = array(&obj["entries"], "entries")?;
    let n = rows.len();
    if n == 0 {
        return Err(err("entries", "must have at least one row"));
    }
    if let Some(nv) = obj.get("n") {
        let declared = nv.as_u64().ok_or_else(|| err("n", "must be a positive integer"))?;
        if declared != n as u64 {
            return Err(err("n", &format!("declares {declared} but entries has {n} rows")));
        }
    }
    let declared = match obj.get("mode") {
        None => None,
        Some(m) => match m.as_str() {
            Some("polytope") => Some(FamilyMode::Polytope),
            Some("interval") => Some(FamilyMode::Interval),
            _ => return Err(err("mode", "must be \"polytope\" or \"interval\"")),
        },
    };
    let mut raw = Vec::with_capacity(n * n);
    for (i, row) in rows.iter().enumerate() {
        let path = format!("entries[{i}]");
        let cols = array(row, &path)?;
        if cols.len() != n {
            return Err(err(&path, &format!("has {} cells, expected {n} (matrix must be square)", cols.len())));
        }
        for (j, c) in cols.iter().enumerate() {
            raw.push(cell(c, &format!("{path}[{j}]"))?);
        }
    }
    // Bare coefficient arrays take the family's kind.
    let interval = declared == Some(FamilyMode::Interval)
        || (declared.is_none() && raw.iter().any(|c| matches!(c, Cell::Given(Entry::Interval(_)))));
    let entries = raw
        .into_iter()
        .map(|c| match c {
            Cell::Given(e) => e,
            Cell::Fixed(c) if interval => Entry::interval(c.clone(), c),
            Cell::Fixed(c) => Entry::fixed(Polynomial::new(c)),
        })
        .collect();

    let region = match obj.get("region") {
        Some(r) => region(r, "region")?,
        None => Region::HurwitzHalfPlane,
    };
    let fam = MatrixFamily::new(n, entries, region).map_err(|e| err("entries", &e.to_string()))?;

    if let Some(declared) = declared {
        let actual = fam.mode();
        if actual != declared {
            return Err(err("mode", &format!("declares {declared} but the cells are {actual}")));
        }
    }

    let tolerances = match obj.get("tolerances") {
        Some(t) => Some(serde_json::from_value::<Tolerances>(t.clone()).map_err(|e| err("tolerances", &e.to_string()))?),
        None => None,
    };
    Ok((fam, tolerances))
}

fn err(path: &str, message: &str) -> SchemaError {
    SchemaError { path: path.to_string(), line: None, message: message.to_string() }
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

fn allow_keys(obj: &Map<String, Value>, path: &str, allowed: &[&str]) -> Result<(), SchemaError> {
    match obj.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(err(&join(path, k), "unknown field")),
        None => Ok(()),
    }
}

fn array<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>, SchemaError> {
    v.as_array().ok_or_else(|| err(path, "expected an array"))
}

fn number(v: &Value, path: &str) -> Result<f64, SchemaError> {
    v.as_f64().ok_or_else(|| err(path, "expected a number"))
}

fn coeffs(v: &Value, path: &str) -> Result<Vec<f64>, SchemaError> {
    let a = array(v, path)?;
    if a.is_empty() {
        return Err(err(path, "needs at least one coefficient"));
    }
    a.iter().enumerate().map(|(l, c)| number(c, &format!("{path}[{l}]"))).collect()
}

enum Cell {
    Given(Entry),
    Fixed(Vec<f64>),
}

fn cell(v: &Value, path: &str) -> Result<Cell, SchemaError> {
    if v.is_array() {
        return Ok(Cell::Fixed(coeffs(v, path)?));
    }
    let Some(obj) = v.as_object() else {
        return Err(err(path, "cell must be an object or a coefficient array"));
    };
    let kind = match obj.get("type") {
        Some(t) => match t.as_str() {
            Some(s @ ("polytope" | "interval")) => Some(s),
            _ => return Err(err(&join(path, "type"), "must be \"polytope\" or \"interval\"")),
        },
        None => None,
    };
    let kind = match (kind, obj.contains_key("vertices"), obj.contains_key("lower") || obj.contains_key("upper")) {
        (Some(k), _, _) => k,
        (None, true, false) => "polytope",
        (None, false, true) => "interval",
        (None, true, true) => return Err(err(path, "cell has both vertices and bounds")),
        (None, false, false) => return Err(err(path, "cell needs \"vertices\" or \"lower\"/\"upper\"")),
    };
    if kind == "polytope" {
        allow_keys(obj, path, &["type", "vertices"])?;
        let vp = join(path, "vertices");
        let vs = array(obj.get("vertices").ok_or_else(|| err(&vp, "missing"))?, &vp)?;
        if vs.is_empty() {
            return Err(err(&vp, "needs at least one vertex"));
        }
        let vertices = vs
            .iter()
            .enumerate()
            .map(|(i, c)| coeffs(c, &format!("{vp}[{i}]")).map(Polynomial::new))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Cell::Given(Entry::polytope(vertices)))
    } else {
        allow_keys(obj, path, &["type", "lower", "upper"])?;
        let bound = |key: &str| {
            let p = join(path, key);
            coeffs(obj.get(key).ok_or_else(|| err(&p, "missing"))?, &p)
        };
        let lower = bound("lower")?;
        let upper = bound("upper")?;
        if lower.len() != upper.len() {
            return Err(err(path, &format!("lower has {} coefficients but upper has {}", lower.len(), upper.len())));
        }
        Ok(Cell::Given(Entry::interval(lower, upper)))
    }
}

fn region(v: &Value, path: &str) -> Result<Region, SchemaError> {
    if let Some(s) = v.as_str() {
        return parse_region_flag(s).map_err(|m| err(path, &m));
    }
    let obj = v.as_object().ok_or_else(|| err(path, "expected an object"))?;
    let field = |key: &str| obj.get(key).ok_or_else(|| err(&join(path, key), "missing"));
    let r = match obj.get("type").and_then(Value::as_str) {
        Some("hurwitz") => {
            allow_keys(obj, path, &["type"])?;
            Region::HurwitzHalfPlane
        }
        Some("shifted") => {
            allow_keys(obj, path, &["type", "sigma"])?;
            Region::ShiftedHalfPlane { sigma: number(field("sigma")?, &join(path, "sigma"))? }
        }
        Some("disk") => {
            allow_keys(obj, path, &["type", "center", "radius"])?;
            let cp = join(path, "center");
            let center = match obj.get("center") {
                None => ComplexValue::new(0.0, 0.0),
                Some(Value::Array(a)) if a.len() == 2 => {
                    ComplexValue::new(number(&a[0], &format!("{cp}[0]"))?, number(&a[1], &format!("{cp}[1]"))?)
                }
                Some(c) => ComplexValue::new(number(c, &cp).map_err(|_| err(&cp, "expected a number or [re, im]"))?, 0.0),
            };
            let radius = match obj.get("radius") {
                None => 1.0,
                Some(r) => number(r, &join(path, "radius"))?,
            };
            Region::Disk { center, radius }
        }
        _ => return Err(err(&join(path, "type"), "must be \"hurwitz\", \"shifted\" or \"disk\"")),
    };
    r.check().map_err(|e| err(path, &e.to_string()))?;
    Ok(r)
}

/// `hurwitz`, `shifted:SIGMA` or `disk:RE,IM,R`.
pub fn parse_region_flag(s: &str) -> Result<Region, String> {
    let (name, params) = s.split_once(':').unwrap_or((s, ""));
    let nums = || -> Result<Vec<f64>, String> {
        params
            .split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|_| format!("bad number {t:?} in region {s:?}")))
            .collect()
    };
    let r = match name {
        "hurwitz" if params.is_empty() => Region::HurwitzHalfPlane,
        "shifted" => match nums()?.as_slice() {
            [sigma] => Region::ShiftedHalfPlane { sigma: *sigma },
            _ => return Err("shifted region takes one parameter: shifted:SIGMA".into()),
        },
        "disk" => match nums()?.as_slice() {
            [re, im, r] => Region::Disk { center: ComplexValue::new(*re, *im), radius: *r },
            _ => return Err("disk region takes three parameters: disk:RE,IM,R".into()),
        },
        _ => return Err(format!("unknown region {s:?}; expected hurwitz, shifted:SIGMA or disk:RE,IM,R")),
    };
    r.check().map_err(|e| e.to_string())?;
    Ok(r)
}
