//! Deterministic text output: JSON with 17 significant digits per float and
//! CSV with 9.

use std::fmt::Write as _;
use std::path::Path;

use serde_json::Value;

use crate::error::Result;

/// Float in scientific notation with 17 significant digits (round-trip exact).
pub fn fmt_json_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "null".to_owned()
    }
}

/// Float with 9 significant digits for tables.
pub fn fmt_csv_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.8e}")
    } else if x.is_nan() {
        "nan".to_owned()
    } else if x > 0.0 {
        "inf".to_owned()
    } else {
        "-inf".to_owned()
    }
}

/// Pretty-printed JSON with sorted keys and fixed float formatting.
pub fn to_json_string(v: &Value) -> String {
    let mut s = String::new();
    write_value(&mut s, v, 0);
    s.push('\n');
    s
}

fn indent(s: &mut String, level: usize) {
    for _ in 0..level {
        s.push_str("  ");
    }
}

fn write_value(s: &mut String, v: &Value, level: usize) {
    match v {
        Value::Null => s.push_str("null"),
        Value::Bool(b) => s.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                let _ = write!(s, "{i}");
            } else if let Some(u) = n.as_u64() {
                let _ = write!(s, "{u}");
            } else {
                s.push_str(&fmt_json_float(n.as_f64().unwrap_or(f64::NAN)));
            }
        }
        Value::String(t) => s.push_str(&Value::String(t.clone()).to_string()),
        Value::Array(items) => {
            // short rows of scalars stay on one line
            if items.iter().all(|x| !x.is_array() && !x.is_object()) && items.len() <= 8 {
                s.push('[');
                for (i, x) in items.iter().enumerate() {
                    if i > 0 {
                        s.push_str(", ");
                    }
                    write_value(s, x, level);
                }
                s.push(']');
                return;
            }
            s.push_str("[\n");
            for (i, x) in items.iter().enumerate() {
                indent(s, level + 1);
                write_value(s, x, level + 1);
                if i + 1 < items.len() {
                    s.push(',');
                }
                s.push('\n');
            }
            indent(s, level);
            s.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                s.push_str("{}");
                return;
            }
            s.push_str("{\n");
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            for (i, k) in keys.iter().enumerate() {
                indent(s, level + 1);
                s.push_str(&Value::String((*k).clone()).to_string());
                s.push_str(": ");
                write_value(s, &map[*k], level + 1);
                if i + 1 < keys.len() {
                    s.push(',');
                }
                s.push('\n');
            }
            indent(s, level);
            s.push('}');
        }
    }
}

pub fn write_json(path: &Path, v: &Value) -> Result<()> {
    std::fs::write(path, to_json_string(v))?;
    Ok(())
}

/// Numeric table with a header row.
#[derive(Clone, Debug, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r.iter().map(|&x| fmt_csv_float(x)))?;
        }
        let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is ascii"))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string()?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_formats() {
        assert_eq!(fmt_json_float(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_csv_float(-2.5), "-2.50000000e0");
        assert_eq!(fmt_json_float(f64::NAN), "null");
        let x = 1.0 / 3.0;
        assert_eq!(fmt_json_float(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn json_is_sorted_and_parseable() {
        let v = serde_json::json!({"b": 1, "a": [1.5, 2], "c": {"z": null, "y": "s"}});
        let s = to_json_string(&v);
        assert!(s.find("\"a\"").unwrap() < s.find("\"b\"").unwrap());
        let back: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["a"][0].as_f64(), Some(1.5));
        assert_eq!(back["c"]["y"], "s");
    }

    #[test]
    fn csv_table() {
        let mut t = Table::new(&["x", "y"]);
        t.push(vec![1.0, 2.0]);
        assert_eq!(t.to_csv_string().unwrap(), "x,y\n1.00000000e0,2.00000000e0\n");
        assert_eq!(t.column("y"), Some(vec![2.0]));
    }
}
