//! Machine-readable experiment reports.
//!
//! One row per `(experiment, n, statistic)`. Exact statistics are rationals
//! rendered exactly as `p/q`; Monte Carlo statistics are floats with Wilson
//! or normal 99% intervals. Reports with identical config and seed are
//! byte-identical.

use num_bigint::BigInt;
use num_rational::Ratio;

use crate::graph::ratio_to_f64;

#[derive(Clone, Debug)]
pub enum Value {
    Exact(Ratio<BigInt>),
    Float(f64),
    Int(i64),
    Text(String),
}

impl Value {
    pub fn as_f64(&self) -> f64 {
        match self {
            Value::Exact(r) => ratio_to_f64(r),
            Value::Float(x) => *x,
            Value::Int(i) => *i as f64,
            Value::Text(_) => f64::NAN,
        }
    }

    fn render(&self) -> String {
        match self {
            Value::Exact(r) => format!("{}/{}", r.numer(), r.denom()),
            Value::Float(x) => format_float(*x),
            Value::Int(i) => i.to_string(),
            Value::Text(s) => s.clone(),
        }
    }

    fn render_json(&self) -> serde_json::Value {
        match self {
            Value::Exact(r) => serde_json::Value::String(format!("{}/{}", r.numer(), r.denom())),
            Value::Float(x) => serde_json::json!(x),
            Value::Int(i) => serde_json::json!(i),
            Value::Text(s) => serde_json::Value::String(s.clone()),
        }
    }
}

/// 17 significant digits: enough to round-trip any f64.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowMode {
    Exact,
    Mc,
    Meta,
}

impl RowMode {
    fn as_str(&self) -> &'static str {
        match self {
            RowMode::Exact => "exact",
            RowMode::Mc => "mc",
            RowMode::Meta => "meta",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Row {
    pub n: Option<u64>,
    pub statistic: String,
    pub value: Value,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub mode: RowMode,
}

#[derive(Clone, Debug)]
pub struct Report {
    pub experiment: String,
    pub seed: u64,
    pub config_hash: String,
    pub rows: Vec<Row>,
}

impl Report {
    pub fn new(experiment: &str, seed: u64, config_hash: &str) -> Self {
        Report {
            experiment: experiment.to_string(),
            seed,
            config_hash: config_hash.to_string(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Row) {
        self.rows.push(row);
    }

    pub fn meta(&mut self, statistic: &str, value: Value) {
        self.rows.push(Row {
            n: None,
            statistic: statistic.into(),
            value,
            ci_low: None,
            ci_high: None,
            mode: RowMode::Meta,
        });
    }

    pub fn exact(&mut self, n: u64, statistic: &str, value: Ratio<BigInt>) {
        self.rows.push(Row {
            n: Some(n),
            statistic: statistic.into(),
            value: Value::Exact(value),
            ci_low: None,
            ci_high: None,
            mode: RowMode::Exact,
        });
    }

    pub fn mc(&mut self, n: u64, statistic: &str, value: f64, ci: (f64, f64)) {
        self.rows.push(Row {
            n: Some(n),
            statistic: statistic.into(),
            value: Value::Float(value),
            ci_low: Some(ci.0),
            ci_high: Some(ci.1),
            mode: RowMode::Mc,
        });
    }

    /// Value of a statistic at a given `n`, if present.
    pub fn value_at(&self, statistic: &str, n: u64) -> Option<&Value> {
        self.rows
            .iter()
            .find(|r| r.statistic == statistic && r.n == Some(n))
            .map(|r| &r.value)
    }

    pub fn meta_value(&self, statistic: &str) -> Option<&Value> {
        self.rows.iter().find(|r| r.statistic == statistic && r.n.is_none()).map(|r| &r.value)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("experiment,n,statistic,value,ci_low,ci_high,mode,seed,config_hash\n");
        for row in &self.rows {
            let n = row.n.map_or(String::new(), |n| n.to_string());
            let lo = row.ci_low.map_or(String::new(), format_float);
            let hi = row.ci_high.map_or(String::new(), format_float);
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                self.experiment,
                n,
                row.statistic,
                row.value.render(),
                lo,
                hi,
                row.mode.as_str(),
                self.seed,
                self.config_hash
            ));
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "experiment": self.experiment,
            "seed": self.seed,
            "config_hash": self.config_hash,
            "rows": self.rows.iter().map(|row| {
                serde_json::json!({
                    "experiment": self.experiment,
                    "n": row.n,
                    "statistic": row.statistic,
                    "value": row.value.render_json(),
                    "ci_low": row.ci_low,
                    "ci_high": row.ci_high,
                    "mode": row.mode.as_str(),
                    "seed": self.seed,
                    "config_hash": self.config_hash,
                })
            }).collect::<Vec<_>>(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_renders_exact_and_float_rows() {
        let mut r = Report::new("demo", 7, "abcd");
        r.exact(3, "density", Ratio::new(BigInt::from(7), BigInt::from(53)));
        r.mc(4, "fraction", 0.25, (0.2, 0.3));
        let csv = r.to_csv();
        assert!(csv.starts_with("experiment,n,statistic,value,ci_low,ci_high,mode,seed,config_hash"));
        assert!(csv.contains("demo,3,density,7/53,,,exact,7,abcd"));
        assert!(csv.contains("2.5000000000000000e-1"));
        let js = r.to_json();
        assert_eq!(js["rows"][0]["value"], "7/53");
    }
}
