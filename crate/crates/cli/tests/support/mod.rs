//! A small JSON Schema checker covering the subset used by the shipped
//! schemas: type (including union lists and null), enum, required,
//! properties, additionalProperties: false, items, minimum, minItems and
//! maxItems.
#![allow(dead_code)]

use serde_json::Value;

pub fn validate(schema: &Value, value: &Value) -> Result<(), String> {
    validate_at(schema, value, "$")
}

fn type_matches(name: &str, value: &Value) -> bool {
    match name {
        "object" => value.is_object(),
        "array" => value.is_array(),
        "string" => value.is_string(),
        "boolean" => value.is_boolean(),
        "null" => value.is_null(),
        "number" => value.is_number(),
        "integer" => value.is_i64() || value.is_u64(),
        _ => false,
    }
}

fn validate_at(schema: &Value, value: &Value, path: &str) -> Result<(), String> {
    if let Some(ty) = schema.get("type") {
        let names: Vec<&str> = match ty {
            Value::String(s) => vec![s.as_str()],
            Value::Array(list) => list.iter().filter_map(|v| v.as_str()).collect(),
            _ => return Err(format!("{path}: malformed type keyword")),
        };
        if !names.iter().any(|n| type_matches(n, value)) {
            return Err(format!("{path}: expected type {names:?}, got {value}"));
        }
    }
    if let Some(allowed) = schema.get("enum").and_then(|e| e.as_array()) {
        if !allowed.contains(value) {
            return Err(format!("{path}: {value} not in enum {allowed:?}"));
        }
    }
    if let Some(min) = schema.get("minimum").and_then(|m| m.as_f64()) {
        if let Some(x) = value.as_f64() {
            if x < min {
                return Err(format!("{path}: {x} below minimum {min}"));
            }
        }
    }
    if let Some(obj) = value.as_object() {
        if let Some(required) = schema.get("required").and_then(|r| r.as_array()) {
            for key in required.iter().filter_map(|k| k.as_str()) {
                if !obj.contains_key(key) {
                    return Err(format!("{path}: missing required key {key:?}"));
                }
            }
        }
        let props = schema.get("properties").and_then(|p| p.as_object());
        if schema.get("additionalProperties") == Some(&Value::Bool(false)) {
            for key in obj.keys() {
                if props.is_none_or(|p| !p.contains_key(key)) {
                    return Err(format!("{path}: unexpected key {key:?}"));
                }
            }
        }
        if let Some(props) = props {
            for (key, sub) in props {
                if let Some(v) = obj.get(key) {
                    validate_at(sub, v, &format!("{path}.{key}"))?;
                }
            }
        }
    }
    if let Some(list) = value.as_array() {
        if let Some(min_items) = schema.get("minItems").and_then(|m| m.as_u64()) {
            if (list.len() as u64) < min_items {
                return Err(format!("{path}: fewer than {min_items} items"));
            }
        }
        if let Some(max_items) = schema.get("maxItems").and_then(|m| m.as_u64()) {
            if (list.len() as u64) > max_items {
                return Err(format!("{path}: more than {max_items} items"));
            }
        }
        if let Some(items) = schema.get("items") {
            for (i, v) in list.iter().enumerate() {
                validate_at(items, v, &format!("{path}[{i}]"))?;
            }
        }
    }
    Ok(())
}

pub fn load_schema(name: &str) -> Value {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../schemas")
        .join(name);
    let text = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("cannot read schema {path:?}: {e}"));
    serde_json::from_str(&text).expect("schema must be valid JSON")
}

/// Runs the CLI in-process, capturing stdout/stderr as strings.
pub fn run_cli(args: &[&str]) -> (i32, String, String) {
    let mut argv = vec!["nhb".to_string()];
    argv.extend(args.iter().map(|s| s.to_string()));
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = nhb_cli::run(&argv, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).expect("stdout must be UTF-8"),
        String::from_utf8(err).expect("stderr must be UTF-8"),
    )
}
