use serde_json::Value;
use std::fmt::Write as _;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Text,
}

/// Render a report. JSON uses the shortest representation that reads back
/// to the same double; text lists `path = value` lines with 17 significant
/// digits.
pub fn render(value: &Value, format: Format) -> String {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(value).expect("serializable");
            s.push('\n');
            s
        }
        Format::Text => {
            let mut out = String::new();
            flatten(value, "", &mut out);
            out
        }
    }
}

fn flatten(value: &Value, path: &str, out: &mut String) {
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                let p = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
                flatten(v, &p, out);
            }
        }
        Value::Array(items) if items.iter().all(|v| v.is_number()) && !items.is_empty() => {
            let parts: Vec<String> = items.iter().map(scalar).collect();
            let _ = writeln!(out, "{path} = [{}]", parts.join(", "));
        }
        Value::Array(items) => {
            if items.is_empty() {
                let _ = writeln!(out, "{path} = []");
            }
            for (i, v) in items.iter().enumerate() {
                flatten(v, &format!("{path}[{i}]"), out);
            }
        }
        v => {
            let _ = writeln!(out, "{path} = {}", scalar(v));
        }
    }
}

fn scalar(v: &Value) -> String {
    match v {
        Value::Number(n) if n.is_f64() => format!("{:.16e}", n.as_f64().expect("f64")),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}
