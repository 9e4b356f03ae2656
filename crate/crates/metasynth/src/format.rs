//! Instance files.
//!
//! Partition: `{"type":"partition","weights":[...]}`. Non-integer weights are
//! scaled by the smallest power of ten that makes all of them integral.
//!
//! TSP: `{"type":"tsp","n":N,"matrix":[[...]],"forbidden":[[i,j],...]}` or the
//! Euclidean form `{"type":"tsp","points":[[x,y],...]}`, whose distances are
//! rounded to 6 decimal places at load.

use std::path::Path;

use metasynth_core::partition::{PartitionError, PartitionInstance};
use metasynth_core::tsp::{TspError, TspInstance};
use serde_json::Value;

const MAX_DECIMALS: usize = 9;

#[derive(Debug, thiserror::Error)]
pub enum InstanceError {
    #[error("cannot read {path}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("not valid JSON")]
    Json(#[from] serde_json::Error),
    #[error("{field}: {message}")]
    Field { field: String, message: String },
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Tsp(#[from] TspError),
}

fn field(field: impl Into<String>, message: impl Into<String>) -> InstanceError {
    InstanceError::Field {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Instance {
    Partition {
        inst: PartitionInstance,
        /// Every weight was multiplied by this factor at load.
        scale: u64,
    },
    Tsp(TspInstance),
}

pub fn load(path: &Path) -> Result<Instance, InstanceError> {
    let text = std::fs::read_to_string(path).map_err(|source| InstanceError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse(&text)
}

pub fn parse(text: &str) -> Result<Instance, InstanceError> {
    let doc: Value = serde_json::from_str(text)?;
    let obj = doc
        .as_object()
        .ok_or_else(|| field("type", "instance must be a JSON object"))?;
    match obj.get("type").and_then(Value::as_str) {
        Some("partition") => parse_partition(&doc),
        Some("tsp") => parse_tsp(&doc).map(Instance::Tsp),
        Some(other) => Err(field("type", format!("unknown instance type `{other}`"))),
        None => Err(field("type", "missing or not a string")),
    }
}

/// Splits a JSON number into (integer digits, fractional digits).
fn decimal_parts(name: &str, v: &Value) -> Result<(String, String), InstanceError> {
    let num = v
        .as_number()
        .ok_or_else(|| field(name, "must be a number"))?;
    let text = num.to_string();
    if text.starts_with('-') {
        return Err(field(name, "must be positive"));
    }
    if text.contains(['e', 'E']) {
        return Err(field(
            name,
            format!("cannot represent {text} exactly; write it in plain decimal form"),
        ));
    }
    let (int, frac) = text.split_once('.').unwrap_or((&text, ""));
    Ok((int.to_string(), frac.trim_end_matches('0').to_string()))
}

fn parse_partition(doc: &Value) -> Result<Instance, InstanceError> {
    let weights = doc
        .get("weights")
        .ok_or_else(|| field("weights", "missing"))?
        .as_array()
        .ok_or_else(|| field("weights", "must be an array"))?;
    let parts = weights
        .iter()
        .enumerate()
        .map(|(i, w)| decimal_parts(&format!("weights[{i}]"), w))
        .collect::<Result<Vec<_>, _>>()?;
    let decimals = parts.iter().map(|(_, f)| f.len()).max().unwrap_or(0);
    if decimals > MAX_DECIMALS {
        return Err(field(
            "weights",
            format!("at most {MAX_DECIMALS} decimal places are supported"),
        ));
    }
    let scale = 10u64.pow(decimals as u32);
    let mut scaled = Vec::with_capacity(parts.len());
    for (i, (int, frac)) in parts.iter().enumerate() {
        let digits = format!("{int}{frac:0<decimals$}");
        let w: u64 = digits
            .parse()
            .map_err(|_| field(format!("weights[{i}]"), "out of range"))?;
        scaled.push(w);
    }
    Ok(Instance::Partition {
        inst: PartitionInstance::new(scaled)?,
        scale,
    })
}

fn parse_pairs(doc: &Value) -> Result<Vec<(usize, usize)>, InstanceError> {
    let Some(list) = doc.get("forbidden") else {
        return Ok(Vec::new());
    };
    let list = list
        .as_array()
        .ok_or_else(|| field("forbidden", "must be an array of [i, j] pairs"))?;
    list.iter()
        .enumerate()
        .map(|(k, pair)| {
            let name = format!("forbidden[{k}]");
            match pair.as_array().map(Vec::as_slice) {
                Some([a, b]) => match (a.as_u64(), b.as_u64()) {
                    (Some(a), Some(b)) => Ok((a as usize, b as usize)),
                    _ => Err(field(name, "node indices must be non-negative integers")),
                },
                _ => Err(field(name, "must be a pair [i, j]")),
            }
        })
        .collect()
}

/// Euclidean distance matrix, each entry rounded to 6 decimal places.
pub fn euclidean_matrix(points: &[(f64, f64)]) -> Vec<Vec<f64>> {
    points
        .iter()
        .map(|a| {
            points
                .iter()
                .map(|b| {
                    let d = (a.0 - b.0).hypot(a.1 - b.1);
                    (d * 1e6).round() / 1e6
                })
                .collect()
        })
        .collect()
}

fn parse_tsp(doc: &Value) -> Result<TspInstance, InstanceError> {
    let forbidden = parse_pairs(doc)?;
    if let Some(points) = doc.get("points") {
        let points = points
            .as_array()
            .ok_or_else(|| field("points", "must be an array of [x, y] pairs"))?;
        let coords = points
            .iter()
            .enumerate()
            .map(|(k, p)| match p.as_array().map(Vec::as_slice) {
                Some([x, y]) => match (x.as_f64(), y.as_f64()) {
                    (Some(x), Some(y)) => Ok((x, y)),
                    _ => Err(field(format!("points[{k}]"), "coordinates must be numbers")),
                },
                _ => Err(field(format!("points[{k}]"), "must be a pair [x, y]")),
            })
            .collect::<Result<Vec<_>, _>>()?;
        return Ok(TspInstance::new(&euclidean_matrix(&coords), &forbidden)?);
    }
    let matrix = doc
        .get("matrix")
        .ok_or_else(|| field("matrix", "missing (or give `points`)"))?
        .as_array()
        .ok_or_else(|| field("matrix", "must be an array of rows"))?;
    let rows = matrix
        .iter()
        .enumerate()
        .map(|(i, row)| {
            row.as_array()
                .ok_or_else(|| field(format!("matrix[{i}]"), "must be an array"))?
                .iter()
                .enumerate()
                .map(|(j, d)| {
                    d.as_f64()
                        .ok_or_else(|| field(format!("matrix[{i}][{j}]"), "must be a number"))
                })
                .collect::<Result<Vec<f64>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(n) = doc.get("n") {
        let n = n
            .as_u64()
            .ok_or_else(|| field("n", "must be a non-negative integer"))? as usize;
        if n != rows.len() {
            return Err(TspError::RowCount {
                expected: n,
                found: rows.len(),
            }
            .into());
        }
    }
    Ok(TspInstance::new(&rows, &forbidden)?)
}

/// Serializes a TSP instance in matrix form.
pub fn tsp_to_json(inst: &TspInstance) -> Value {
    let forbidden: Vec<[usize; 2]> = inst.forbidden().map(|(a, b)| [a, b]).collect();
    serde_json::json!({
        "type": "tsp",
        "n": inst.n(),
        "matrix": inst.matrix(),
        "forbidden": forbidden,
    })
}

pub fn partition_to_json(inst: &PartitionInstance) -> Value {
    serde_json::json!({ "type": "partition", "weights": inst.weights() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn err_text(s: &str) -> String {
        parse(s).unwrap_err().to_string()
    }

    #[test]
    fn partition_integers() {
        let Instance::Partition { inst, scale } =
            parse(r#"{"type":"partition","weights":[4,5,6]}"#).unwrap()
        else {
            panic!()
        };
        assert_eq!(inst.weights(), &[4, 5, 6]);
        assert_eq!(scale, 1);
    }

    #[test]
    fn partition_rationals_are_scaled() {
        let Instance::Partition { inst, scale } =
            parse(r#"{"type":"partition","weights":[1.5,2,0.25]}"#).unwrap()
        else {
            panic!()
        };
        assert_eq!(scale, 100);
        assert_eq!(inst.weights(), &[150, 200, 25]);
    }

    #[test]
    fn partition_errors_name_the_field() {
        assert!(err_text(r#"{"type":"partition"}"#).starts_with("weights"));
        assert!(err_text(r#"{"type":"partition","weights":[1,"a"]}"#).starts_with("weights[1]"));
        assert!(err_text(r#"{"type":"partition","weights":[1,0]}"#).starts_with("weights[1]"));
        assert!(err_text(r#"{"type":"partition","weights":[1,-3]}"#).starts_with("weights[1]"));
        assert!(err_text(r#"{"type":"partition","weights":[]}"#).starts_with("weights"));
        assert!(err_text(r#"{"type":"heap"}"#).starts_with("type"));
        assert!(err_text(r#"[1,2]"#).starts_with("type"));
    }

    #[test]
    fn tsp_matrix() {
        let Instance::Tsp(t) =
            parse(r#"{"type":"tsp","n":3,"matrix":[[0,1,2],[1,0,3],[2,3,0]],"forbidden":[[2,0]]}"#)
                .unwrap()
        else {
            panic!()
        };
        assert_eq!(t.n(), 3);
        assert_eq!(t.dist(1, 2), 3.0);
        assert!(t.is_forbidden(0, 2));
        let again = parse(&tsp_to_json(&t).to_string()).unwrap();
        assert_eq!(again, Instance::Tsp(t));
    }

    #[test]
    fn tsp_points_are_rounded() {
        let Instance::Tsp(t) = parse(r#"{"type":"tsp","points":[[0,0],[1,2],[0,1]]}"#).unwrap()
        else {
            panic!()
        };
        assert_eq!(t.dist(0, 1), 2.236068);
        assert_eq!(t.dist(0, 2), 1.0);
    }

    #[test]
    fn tsp_errors_name_the_field() {
        assert!(
            err_text(r#"{"type":"tsp","n":3,"matrix":[[0,1,2],[1,0,3],[2,4,0]]}"#)
                .starts_with("matrix[1][2]")
        );
        assert!(
            err_text(r#"{"type":"tsp","n":4,"matrix":[[0,1,2],[1,0,3],[2,3,0]]}"#)
                .starts_with("matrix")
        );
        assert!(err_text(
            r#"{"type":"tsp","n":3,"matrix":[[0,1,2],[1,0,3],[2,3,0]],"forbidden":[[1,1]]}"#
        )
        .starts_with("forbidden"));
        assert!(err_text(
            r#"{"type":"tsp","n":3,"matrix":[[0,1,2],[1,0,3],[2,3,0]],"forbidden":[[1]]}"#
        )
        .starts_with("forbidden[0]"));
        assert!(err_text(r#"{"type":"tsp","points":[[0,0],[1]]}"#).starts_with("points[1]"));
        assert!(err_text(r#"{"type":"tsp"}"#).starts_with("matrix"));
        assert!(err_text(r#"{"type":"tsp","points":[[0,0],[1,1]]}"#).starts_with("n:"));
    }
}
