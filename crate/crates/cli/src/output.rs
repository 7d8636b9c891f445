//! CSV and JSON serialization. Floats in CSV use 17 significant digits so
//! every value round-trips.

use std::fmt::Write;

use nalgebra::DVector;
use serde::Serialize;
use serde_json::Value;

use nlbvp_core::{Branch, BranchPoint, EigenPair};

pub const BRANCH_HEADER: &str = "step,lambda,sup_norm,min_value,residual_norm,arclength";
pub const SOLUTION_HEADER: &str = "x,u";
pub const EIGEN_HEADER: &str = "k,lambda_k,nodal_count,residual";

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn json<T: Serialize + ?Sized>(value: &T) -> anyhow::Result<String> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

/// `field,value` rows from a JSON object in sorted key order, nested keys
/// joined with `.`.
pub fn flat_csv<T: Serialize>(value: &T) -> anyhow::Result<String> {
    fn walk(prefix: &str, v: &Value, out: &mut String) {
        match v {
            Value::Object(map) => {
                for (k, child) in map {
                    let key = if prefix.is_empty() {
                        k.clone()
                    } else {
                        format!("{prefix}.{k}")
                    };
                    walk(&key, child, out);
                }
            }
            Value::Number(x) => match x.as_f64() {
                Some(f) if !x.is_i64() && !x.is_u64() => {
                    let _ = writeln!(out, "{prefix},{}", num(f));
                }
                _ => {
                    let _ = writeln!(out, "{prefix},{x}");
                }
            },
            other => {
                let _ = writeln!(out, "{prefix},{other}");
            }
        }
    }
    let mut out = String::from("field,value\n");
    walk("", &serde_json::to_value(value)?, &mut out);
    Ok(out)
}

pub fn eigen_csv(pairs: &[EigenPair]) -> String {
    let mut out = format!("{EIGEN_HEADER}\n");
    for pair in pairs {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            pair.index,
            num(pair.lambda),
            pair.nodal_count,
            num(pair.residual)
        );
    }
    out
}

/// Branch rows followed by a `# status=...` summary line.
pub fn branch_csv(branch: &Branch) -> String {
    let mut out = format!("{BRANCH_HEADER}\n");
    for (step, p) in branch.points.iter().enumerate() {
        let _ = writeln!(
            out,
            "{step},{},{},{},{},{}",
            num(p.lambda),
            num(p.sup_norm),
            num(p.min_value),
            num(p.residual_norm),
            num(p.arclength)
        );
    }
    let _ = write!(
        out,
        "# status={} ended_by={} points={}",
        branch.status,
        branch.ended_by,
        branch.points.len()
    );
    if let (Some(i), Some(p)) = (branch.crossing_index, branch.crossing()) {
        let _ = write!(
            out,
            " crossing_step={i} crossing_sup_norm={}",
            num(p.sup_norm)
        );
    }
    out.push('\n');
    out
}

/// Solution with the hinged boundary zeros at `x = 0` and `x = 1`.
pub fn solution_csv(nodes: &DVector<f64>, u: &DVector<f64>) -> String {
    let mut out = format!("{SOLUTION_HEADER}\n");
    let _ = writeln!(out, "{},{}", num(0.0), num(0.0));
    for (x, v) in nodes.iter().zip(u.iter()) {
        let _ = writeln!(out, "{},{}", num(*x), num(*v));
    }
    let _ = writeln!(out, "{},{}", num(1.0), num(0.0));
    out
}

#[derive(Debug, Serialize)]
pub struct SolutionSummary {
    pub lambda: f64,
    pub sup_norm: f64,
    pub min_value: f64,
    pub residual_norm: f64,
}

impl From<&BranchPoint> for SolutionSummary {
    fn from(p: &BranchPoint) -> Self {
        Self {
            lambda: p.lambda,
            sup_norm: p.sup_norm,
            min_value: p.min_value,
            residual_norm: p.residual_norm,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct SolutionJson {
    #[serde(flatten)]
    pub summary: SolutionSummary,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
}

impl SolutionJson {
    pub fn new(summary: SolutionSummary, nodes: &DVector<f64>, u: &DVector<f64>) -> Self {
        let mut x = vec![0.0];
        x.extend(nodes.iter());
        x.push(1.0);
        let mut values = vec![0.0];
        values.extend(u.iter());
        values.push(0.0);
        Self {
            summary,
            x,
            u: values,
        }
    }
}
