use serde_json::{Map, Value};

use crate::cgmt::Extended;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Bool(bool),
    Text(String),
    Ext(Extended),
    /// No value exists (e.g. no interpolator below `d = n`).
    Infeasible,
}

impl Cell {
    pub fn csv(&self) -> String {
        match self {
            Self::Int(v) => v.to_string(),
            Self::Float(v) => float_csv(*v),
            Self::Bool(v) => v.to_string(),
            Self::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Self::Text(s) => s.clone(),
            Self::Ext(e) => e.to_csv(),
            Self::Infeasible => "infeasible".into(),
        }
    }

    pub fn json(&self) -> Value {
        match self {
            Self::Int(v) => Value::from(*v),
            Self::Float(v) if v.is_finite() => Value::from(*v),
            Self::Float(v) => Value::from(float_csv(*v)),
            Self::Bool(v) => Value::from(*v),
            Self::Text(s) => Value::from(s.clone()),
            Self::Ext(Extended::Finite(v)) => Value::from(*v),
            Self::Ext(e) => Value::from(e.to_csv()),
            Self::Infeasible => Value::from("infeasible"),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Self::Int(v) => Some(*v as f64),
            Self::Float(v) => Some(*v),
            Self::Ext(Extended::Finite(v)) => Some(*v),
            _ => None,
        }
    }
}

/// Shortest round-trip decimal; non-finite values become sentinels.
pub fn float_csv(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v == f64::INFINITY {
        "pos_inf".into()
    } else if v == f64::NEG_INFINITY {
        "neg_inf".into()
    } else {
        format!("{v:?}")
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Self::Float(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Self::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Self::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Self::Text(v.to_string())
    }
}

impl From<Extended> for Cell {
    fn from(v: Extended) -> Self {
        Self::Ext(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Self::Infeasible, Self::Float)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    /// Bumped whenever the columns change.
    pub schema_version: u32,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, schema_version: u32, columns: &[&'static str]) -> Self {
        Self {
            name: name.to_string(),
            schema_version,
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width for {}", self.name);
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<&Cell>> {
        let i = self.columns.iter().position(|c| *c == name)?;
        Some(self.rows.iter().map(|r| &r[i]).collect())
    }

    pub fn header(&self) -> String {
        self.columns.join(",")
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header();
        out.push('\n');
        for r in &self.rows {
            let line: Vec<String> = r.iter().map(Cell::csv).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| {
                let mut m = Map::new();
                for (c, v) in self.columns.iter().zip(r) {
                    m.insert(c.to_string(), v.json());
                }
                Value::Object(m)
            })
            .collect();
        let doc = serde_json::json!({
            "table": self.name,
            "schema_version": self.schema_version,
            "columns": self.columns,
            "rows": rows,
        });
        let mut s = serde_json::to_string_pretty(&doc).expect("json");
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_cells() {
        assert_eq!(Cell::Float(0.1).csv(), "0.1");
        assert_eq!(Cell::Float(1e-20).csv(), "1e-20");
        assert_eq!(Cell::Float(1.0).csv(), "1.0");
        assert_eq!(Cell::Float(f64::INFINITY).csv(), "pos_inf");
        assert_eq!(Cell::Ext(Extended::NegInf).csv(), "neg_inf");
        assert_eq!(Cell::Infeasible.csv(), "infeasible");
        assert_eq!(Cell::Text("a,b".into()).csv(), "\"a,b\"");
        let x = 0.1 + 0.2;
        assert_eq!(Cell::Float(x).csv().parse::<f64>().unwrap(), x);
    }

    #[test]
    fn json_sentinels_are_strings() {
        let mut t = Table::new("t", 1, &["a", "b"]);
        t.push(vec![Cell::Ext(Extended::PosInf), Cell::Float(2.5)]);
        let v: Value = serde_json::from_str(&t.to_json()).unwrap();
        assert_eq!(v["rows"][0]["a"], "pos_inf");
        assert_eq!(v["rows"][0]["b"], 2.5);
    }
}
