use std::fmt;

use serde::{Deserialize, Serialize};

/// A concrete parameter assignment inside a slot plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Bool(bool),
    Int(i64),
    Real(f64),
    Text(String),
}

impl ParamValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            ParamValue::Int(v) => Some(*v as f64),
            ParamValue::Real(v) => Some(*v),
            _ => None,
        }
    }

    /// Canonical text rendering, used for categorical matching and embeddings.
    pub fn render(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Bool(v) => write!(f, "{v}"),
            ParamValue::Int(v) => write!(f, "{v}"),
            ParamValue::Real(v) => write!(f, "{v:?}"),
            ParamValue::Text(v) => f.write_str(v),
        }
    }
}

impl From<&str> for ParamValue {
    fn from(v: &str) -> Self {
        ParamValue::Text(v.to_string())
    }
}

impl From<i64> for ParamValue {
    fn from(v: i64) -> Self {
        ParamValue::Int(v)
    }
}

impl From<f64> for ParamValue {
    fn from(v: f64) -> Self {
        ParamValue::Real(v)
    }
}

impl From<bool> for ParamValue {
    fn from(v: bool) -> Self {
        ParamValue::Bool(v)
    }
}

/// The set of values a template parameter may take.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ValueDomain {
    RealRange {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        min: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max: Option<f64>,
        #[serde(default = "yes")]
        min_inclusive: bool,
        #[serde(default = "yes")]
        max_inclusive: bool,
    },
    IntegerRange {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        min: Option<i64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max: Option<i64>,
    },
    Categorical {
        values: Vec<String>,
    },
    #[default]
    FreeText,
}

fn yes() -> bool {
    true
}

impl ValueDomain {
    /// Returns `None` when `value` lies in the domain, otherwise a short reason.
    pub fn check(&self, value: &ParamValue) -> Option<String> {
        match self {
            ValueDomain::FreeText => None,
            ValueDomain::Categorical { values } => {
                let rendered = value.render();
                if values.iter().any(|v| *v == rendered) {
                    None
                } else {
                    Some(format!("`{rendered}` not in {{{}}}", values.join(", ")))
                }
            }
            ValueDomain::IntegerRange { min, max } => match value {
                ParamValue::Int(v) => {
                    if min.is_some_and(|m| *v < m) || max.is_some_and(|m| *v > m) {
                        Some(format!("{v} outside {}", self.describe()))
                    } else {
                        None
                    }
                }
                other => Some(format!("`{other}` is not an integer")),
            },
            ValueDomain::RealRange {
                min,
                max,
                min_inclusive,
                max_inclusive,
            } => {
                let Some(v) = value.as_f64() else {
                    return Some(format!("`{value}` is not a number"));
                };
                if !v.is_finite() {
                    return Some(format!("{v} is not finite"));
                }
                let below = min.is_some_and(|m| if *min_inclusive { v < m } else { v <= m });
                let above = max.is_some_and(|m| if *max_inclusive { v > m } else { v >= m });
                if below || above {
                    Some(format!("{v} outside {}", self.describe()))
                } else {
                    None
                }
            }
        }
    }

    pub fn describe(&self) -> String {
        match self {
            ValueDomain::FreeText => "free text".to_string(),
            ValueDomain::Categorical { values } => format!("{{{}}}", values.join(", ")),
            ValueDomain::IntegerRange { min, max } => format!(
                "[{}, {}]",
                min.map_or("-inf".to_string(), |m| m.to_string()),
                max.map_or("+inf".to_string(), |m| m.to_string())
            ),
            ValueDomain::RealRange {
                min,
                max,
                min_inclusive,
                max_inclusive,
            } => format!(
                "{}{}, {}{}",
                if *min_inclusive { '[' } else { '(' },
                min.map_or("-inf".to_string(), |m| m.to_string()),
                max.map_or("+inf".to_string(), |m| m.to_string()),
                if *max_inclusive { ']' } else { ')' },
            ),
        }
    }

    /// Values the grid enumerator may iterate over, if the domain is finite.
    pub fn enumerable_values(&self) -> Option<Vec<ParamValue>> {
        match self {
            ValueDomain::Categorical { values } => Some(
                values
                    .iter()
                    .map(|v| match v.as_str() {
                        "true" => ParamValue::Bool(true),
                        "false" => ParamValue::Bool(false),
                        _ => ParamValue::Text(v.clone()),
                    })
                    .collect(),
            ),
            ValueDomain::IntegerRange {
                min: Some(lo),
                max: Some(hi),
            } if hi >= lo && hi - lo < 64 => Some((*lo..=*hi).map(ParamValue::Int).collect()),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_interval_open_left() -> ValueDomain {
        ValueDomain::RealRange {
            min: Some(0.0),
            max: Some(1.0),
            min_inclusive: false,
            max_inclusive: true,
        }
    }

    #[test]
    fn real_range_respects_open_bound() {
        let d = unit_interval_open_left();
        assert!(d.check(&ParamValue::Real(0.05)).is_none());
        assert!(d.check(&ParamValue::Real(1.0)).is_none());
        assert!(d.check(&ParamValue::Real(0.0)).is_some());
        assert!(d.check(&ParamValue::Real(-1.0)).is_some());
        assert!(d.check(&ParamValue::Int(1)).is_none());
        assert!(d.check(&ParamValue::Text("fast".into())).is_some());
    }

    #[test]
    fn categorical_matches_rendered_bool() {
        let d = ValueDomain::Categorical {
            values: vec!["true".into(), "false".into()],
        };
        assert!(d.check(&ParamValue::Bool(false)).is_none());
        assert!(d.check(&ParamValue::Text("maybe".into())).is_some());
    }

    #[test]
    fn integer_range_rejects_reals() {
        let d = ValueDomain::IntegerRange {
            min: Some(-1),
            max: None,
        };
        assert!(d.check(&ParamValue::Int(-1)).is_none());
        assert!(d.check(&ParamValue::Int(-2)).is_some());
        assert!(d.check(&ParamValue::Real(3.0)).is_some());
    }

    #[test]
    fn untagged_values_parse_from_json() {
        let v: Vec<ParamValue> = serde_json::from_str(r#"[8, 1.3, 1e-15, "sparsemax", true]"#).unwrap();
        assert_eq!(
            v,
            vec![
                ParamValue::Int(8),
                ParamValue::Real(1.3),
                ParamValue::Real(1e-15),
                ParamValue::Text("sparsemax".into()),
                ParamValue::Bool(true)
            ]
        );
    }
}
