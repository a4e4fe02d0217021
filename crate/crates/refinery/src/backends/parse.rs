//! Tolerant extraction of the checker's JSON verdict from free-form model
//! output: find the first balanced `{...}` block that parses as JSON
//! (skipping chatter and code fences around it), then validate the schema.

use crate::core::CheckResult;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseCheckError {
    /// No balanced `{...}` block parsed as JSON anywhere in the input.
    #[error("no JSON object found in response")]
    NoJsonFound,
    /// A JSON object was found but does not carry the expected fields.
    #[error("check response schema mismatch: {0}")]
    SchemaMismatch(String),
}

/// Parse a checker response of the form `{"passed": bool, "reason": string}`
/// out of arbitrary surrounding text. Never panics, whatever the input.
pub fn parse_check_json(raw: &str) -> Result<CheckResult, ParseCheckError> {
    let value = first_json_object(raw).ok_or(ParseCheckError::NoJsonFound)?;
    let obj = value
        .as_object()
        .ok_or_else(|| ParseCheckError::SchemaMismatch("not a JSON object".to_string()))?;

    let passed = match obj.get("passed") {
        Some(serde_json::Value::Bool(b)) => *b,
        Some(other) => {
            return Err(ParseCheckError::SchemaMismatch(format!(
                "`passed` must be a boolean, got {other}"
            )))
        }
        None => {
            return Err(ParseCheckError::SchemaMismatch(
                "`passed` field missing".to_string(),
            ))
        }
    };
    let reason = match obj.get("reason") {
        Some(serde_json::Value::String(s)) => s.clone(),
        Some(serde_json::Value::Null) | None => String::new(),
        Some(other) => {
            return Err(ParseCheckError::SchemaMismatch(format!(
                "`reason` must be a string, got {other}"
            )))
        }
    };

    let result = CheckResult { passed, reason };
    result
        .validate()
        .map_err(|e| ParseCheckError::SchemaMismatch(e.to_string()))?;
    Ok(result)
}

/// The first balanced top-level `{...}` span that parses as JSON.
fn first_json_object(raw: &str) -> Option<serde_json::Value> {
    let bytes = raw.as_bytes();
    let mut start = 0;
    while let Some(open_rel) = raw[start..].find('{') {
        let open = start + open_rel;
        if let Some(end) = balanced_end(bytes, open) {
            if let Ok(value) = serde_json::from_str::<serde_json::Value>(&raw[open..=end]) {
                return Some(value);
            }
        }
        start = open + 1;
    }
    None
}

/// Index of the `}` closing the brace at `open`, honoring JSON string
/// syntax so braces inside string literals do not count.
fn balanced_end(bytes: &[u8], open: usize) -> Option<usize> {
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate().skip(open) {
        if in_string {
            if escaped {
                escaped = false;
            } else if b == b'\\' {
                escaped = true;
            } else if b == b'"' {
                in_string = false;
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'{' => depth += 1,
            b'}' => {
                depth = depth.saturating_sub(1);
                if depth == 0 {
                    return Some(i);
                }
            }
            _ => {}
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_fixture_parses_exactly() {
        let raw = r#"{"passed": false, "reason": "Change the number of notes to 4, add an orange note"}"#;
        let got = parse_check_json(raw).unwrap();
        assert!(!got.passed);
        assert_eq!(
            got.reason,
            "Change the number of notes to 4, add an orange note"
        );
    }

    #[test]
    fn code_fenced_and_chatty_wrappers_strip() {
        let r = parse_check_json("Sure! ```json {\"passed\": true, \"reason\": \"\"} ```").unwrap();
        assert!(r.passed);

        let r = parse_check_json("thinking... {\"passed\": false, \"reason\": \"add a dog\"} done")
            .unwrap();
        assert_eq!(r.reason, "add a dog");
    }

    #[test]
    fn wrong_schema_is_a_typed_error() {
        assert!(matches!(
            parse_check_json(r#"{"pass": "yes"}"#),
            Err(ParseCheckError::SchemaMismatch(_))
        ));
        assert!(matches!(
            parse_check_json(r#"{"passed": "yes"}"#),
            Err(ParseCheckError::SchemaMismatch(_))
        ));
        // A failed check without a reason violates the reason invariant.
        assert!(matches!(
            parse_check_json(r#"{"passed": false}"#),
            Err(ParseCheckError::SchemaMismatch(_))
        ));
        assert!(matches!(
            parse_check_json(r#"{"passed": false, "reason": 3}"#),
            Err(ParseCheckError::SchemaMismatch(_))
        ));
    }

    #[test]
    fn missing_reason_on_pass_defaults_empty() {
        let r = parse_check_json(r#"{"passed": true}"#).unwrap();
        assert!(r.passed);
        assert_eq!(r.reason, "");
    }

    #[test]
    fn no_json_anywhere() {
        for raw in ["", "nope", "passed: true", "{", "{{{", "}{"] {
            assert_eq!(parse_check_json(raw), Err(ParseCheckError::NoJsonFound), "{raw:?}");
        }
    }

    #[test]
    fn braces_inside_strings_do_not_confuse_the_scanner() {
        let raw = r#"{"passed": false, "reason": "use {braces} and \"quotes\" freely"}"#;
        let r = parse_check_json(raw).unwrap();
        assert_eq!(r.reason, "use {braces} and \"quotes\" freely");
    }

    #[test]
    fn earlier_non_json_braces_are_skipped() {
        let raw = r#"state {unparseable} then {"passed": true, "reason": ""}"#;
        let r = parse_check_json(raw).unwrap();
        assert!(r.passed);
    }
}
