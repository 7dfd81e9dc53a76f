//! Extraction of JSON objects from free-form model output.
//!
//! Models wrap payloads in code fences, lead with prose, leave trailing
//! commas, or echo the `# comment` from the decision template. The parser
//! tries fenced blocks first, then the raw text, and at each `{` attempts a
//! strict parse followed by a repaired parse of the balanced object.

use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    String,
    /// Integer, float (rounded), or numeric string such as `"85"` / `"85%"`.
    Integer,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PayloadError {
    #[error("no JSON object found in model output")]
    NoJsonFound,
    #[error("required field `{0}` is missing")]
    MissingField(String),
    #[error("field `{field}` should be {expected}")]
    WrongType { field: String, expected: &'static str },
    #[error("field `{0}` is empty")]
    EmptyField(String),
    #[error("field `{field}` has unrecognized value {value:?}")]
    UnknownValue { field: String, value: String },
}

/// Returns the first JSON object in `raw` that carries every field in
/// `schema` with the right type. Integer fields are normalized to JSON
/// integers in the returned map.
pub fn parse_json_payload(raw: &str, schema: &[(&str, FieldKind)]) -> Result<Map<String, Value>, PayloadError> {
    let mut first_error = None;
    for candidate in candidates(raw) {
        for object in objects_in(&candidate) {
            match validate(object, schema) {
                Ok(obj) => return Ok(obj),
                Err(e) => {
                    first_error.get_or_insert(e);
                }
            }
        }
    }
    Err(first_error.unwrap_or(PayloadError::NoJsonFound))
}

fn validate(mut object: Map<String, Value>, schema: &[(&str, FieldKind)]) -> Result<Map<String, Value>, PayloadError> {
    for (field, kind) in schema {
        let value = object
            .get(*field)
            .ok_or_else(|| PayloadError::MissingField(field.to_string()))?;
        let normalized = match kind {
            FieldKind::String => match value {
                Value::String(_) => None,
                _ => {
                    return Err(PayloadError::WrongType {
                        field: field.to_string(),
                        expected: "a string",
                    })
                }
            },
            FieldKind::Integer => Some(Value::from(as_integer(value).ok_or_else(|| PayloadError::WrongType {
                field: field.to_string(),
                expected: "a number",
            })?)),
        };
        if let Some(v) = normalized {
            object.insert(field.to_string(), v);
        }
    }
    Ok(object)
}

fn as_integer(value: &Value) -> Option<i64> {
    match value {
        Value::Number(n) => n.as_i64().or_else(|| n.as_f64().filter(|f| f.is_finite()).map(|f| f.round() as i64)),
        Value::String(s) => {
            let s = s.trim().trim_end_matches('%').trim();
            s.parse::<i64>()
                .ok()
                .or_else(|| s.parse::<f64>().ok().filter(|f| f.is_finite()).map(|f| f.round() as i64))
        }
        _ => None,
    }
}

/// Fenced block bodies in order of appearance, then the whole text.
fn candidates(raw: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut rest = raw;
    while let Some(start) = rest.find("```") {
        let after = &rest[start + 3..];
        let Some(end) = after.find("```") else { break };
        let block = &after[..end];
        // drop an info string such as `json` on the opening fence line
        let body = match block.find('\n') {
            Some(nl) if !block[..nl].contains('{') => &block[nl + 1..],
            _ => block,
        };
        out.push(body.to_string());
        rest = &after[end + 3..];
    }
    out.push(raw.to_string());
    out
}

fn objects_in(text: &str) -> impl Iterator<Item = Map<String, Value>> + '_ {
    text.char_indices().filter(|(_, c)| *c == '{').filter_map(move |(i, _)| {
        let tail = &text[i..];
        let mut stream = serde_json::Deserializer::from_str(tail).into_iter::<Value>();
        if let Some(Ok(Value::Object(obj))) = stream.next() {
            return Some(obj);
        }
        let balanced = balanced_object(tail)?;
        match serde_json::from_str::<Value>(&repair(balanced)) {
            Ok(Value::Object(obj)) => Some(obj),
            _ => None,
        }
    })
}

/// The prefix of `s` (which starts at `{`) up to its matching `}`.
fn balanced_object(s: &str) -> Option<&str> {
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, c) in s.char_indices() {
        if in_string {
            match c {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                '"' => in_string = false,
                _ => {}
            }
            continue;
        }
        match c {
            '"' => in_string = true,
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(&s[..=i]);
                }
            }
            _ => {}
        }
    }
    None
}

/// Drops `#` line comments and trailing commas outside strings.
fn repair(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut in_string = false;
    let mut escaped = false;
    let mut chars = s.chars().peekable();
    while let Some(c) = chars.next() {
        if in_string {
            out.push(c);
            match c {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                '"' => in_string = false,
                _ => {}
            }
            continue;
        }
        match c {
            '"' => {
                in_string = true;
                out.push(c);
            }
            '#' => {
                while chars.peek().is_some_and(|&n| n != '\n') {
                    chars.next();
                }
            }
            ',' => {
                let next = chars.clone().find(|n| !n.is_whitespace() && *n != '#');
                if !matches!(next, Some('}') | Some(']')) {
                    out.push(c);
                }
            }
            _ => out.push(c),
        }
    }
    out
}
