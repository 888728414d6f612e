//! Finds JSON embedded in free text. Hosted models often wrap the payload in
//! prose or code fences, so the first balanced bracket span that parses wins.

use serde_json::Value;

/// End index (inclusive) of the bracket span opening at `start`, skipping
/// brackets inside string literals.
fn matching_close(bytes: &[u8], start: usize) -> Option<usize> {
    let mut stack: Vec<u8> = Vec::new();
    let mut in_string = false;
    let mut escaped = false;
    for (i, &c) in bytes.iter().enumerate().skip(start) {
        if in_string {
            if escaped {
                escaped = false;
            } else if c == b'\\' {
                escaped = true;
            } else if c == b'"' {
                in_string = false;
            }
            continue;
        }
        match c {
            b'"' => in_string = true,
            b'[' => stack.push(b']'),
            b'{' => stack.push(b'}'),
            b']' | b'}' => {
                if stack.pop() != Some(c) {
                    return None;
                }
                if stack.is_empty() {
                    return Some(i);
                }
            }
            _ => {}
        }
    }
    None
}

fn first_span(text: &str, open: u8, accept: impl Fn(&Value) -> bool) -> Option<Value> {
    let bytes = text.as_bytes();
    let mut from = 0;
    while let Some(off) = bytes[from..].iter().position(|&c| c == open) {
        let start = from + off;
        if let Some(end) = matching_close(bytes, start) {
            // both ends are ASCII brackets, so the slice is on char boundaries
            if let Ok(v) = serde_json::from_str::<Value>(&text[start..=end]) {
                if accept(&v) {
                    return Some(v);
                }
            }
        }
        from = start + 1;
    }
    None
}

/// First well-formed JSON array in `text`.
///
/// ```
/// use leadopt::generation::extract_json_array;
/// let v = extract_json_array("Here you go: [{\"smiles\": \"CCO\"}] Enjoy.").unwrap();
/// assert_eq!(v[0]["smiles"], "CCO");
/// ```
pub fn extract_json_array(text: &str) -> Option<Vec<Value>> {
    match first_span(text, b'[', Value::is_array)? {
        Value::Array(a) => Some(a),
        _ => None,
    }
}

/// First well-formed JSON object in `text` that has `key`.
pub fn extract_json_object(text: &str, key: &str) -> Option<serde_json::Map<String, Value>> {
    match first_span(text, b'{', |v| v.get(key).is_some())? {
        Value::Object(o) => Some(o),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn skips_broken_spans() {
        let t = "first [not json] then ```json\n[{\"smiles\": \"C]C\"}, {\"smiles\": \"N\"}]\n```";
        let a = extract_json_array(t).unwrap();
        assert_eq!(a.len(), 2);
        assert_eq!(a[0]["smiles"], "C]C");
    }

    #[test]
    fn object_with_key() {
        let t = "{\"note\": 1} The answer is {\"activity\": 6.95}.";
        assert_eq!(extract_json_object(t, "activity").unwrap()["activity"], 6.95);
        assert!(extract_json_object("no braces", "activity").is_none());
    }

    #[test]
    fn unbalanced_input() {
        assert!(extract_json_array("[[[[").is_none());
        assert!(extract_json_array("]]][").is_none());
        assert!(extract_json_array("[\"unterminated").is_none());
    }
}
