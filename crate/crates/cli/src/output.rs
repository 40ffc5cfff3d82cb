//! Deterministic JSON rendering with fixed float precision.

use serde::Serialize;
use serde_json::Value;
use slag_core::numfmt::format_significant;

/// Significant digits of floats in JSON output.
pub const JSON_DIGITS: usize = 17;

pub fn to_json<T: Serialize>(value: &T, pretty: bool) -> anyhow::Result<String> {
    let v = serde_json::to_value(value)?;
    let mut out = String::new();
    render(&v, pretty, 0, &mut out);
    Ok(out)
}

fn render(v: &Value, pretty: bool, depth: usize, out: &mut String) {
    let (nl, pad, inner, colon) = if pretty {
        ("\n", "  ".repeat(depth), "  ".repeat(depth + 1), ": ")
    } else {
        ("", String::new(), String::new(), ":")
    };
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                let f = n.as_f64().unwrap_or(f64::NAN);
                if f.is_finite() {
                    out.push_str(&format_significant(f, JSON_DIGITS));
                } else {
                    out.push_str("null");
                }
            } else {
                out.push_str(&n.to_string());
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            // arrays of scalars stay on one line
            let flat = !pretty || items.iter().all(|i| !i.is_array() && !i.is_object());
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                    if flat && pretty {
                        out.push(' ');
                    }
                }
                if !flat {
                    out.push_str(nl);
                    out.push_str(&inner);
                }
                render(item, pretty, depth + 1, out);
            }
            if !flat {
                out.push_str(nl);
                out.push_str(&pad);
            }
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push('{');
            for (i, (k, item)) in map.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(nl);
                out.push_str(&inner);
                out.push_str(&Value::String(k.clone()).to_string());
                out.push_str(colon);
                render(item, pretty, depth + 1, out);
            }
            out.push_str(nl);
            out.push_str(&pad);
            out.push('}');
        }
    }
}
