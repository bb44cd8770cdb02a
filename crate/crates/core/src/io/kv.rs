//! Flat `key = value` config documents.
//!
//! One binding per line, `#` starts a comment, blank lines are ignored.
//! Keys may repeat (used for list-like entries such as phantom shells);
//! consumers that require unique keys enforce that themselves.

use std::str::FromStr;

use crate::error::{Error, Result};

/// Parses a document into ordered (key, value) pairs.
pub fn parse(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::invalid(format!(
                "line {}: expected 'key = value', got '{}'",
                lineno + 1,
                raw.trim()
            )));
        };
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() {
            return Err(Error::invalid(format!("line {}: empty key", lineno + 1)));
        }
        out.push((key.to_string(), value.to_string()));
    }
    Ok(out)
}

/// Parses one value, reporting the key on failure.
pub fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::invalid(format!("config key '{key}': cannot parse value '{value}'")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_pairs_comments_and_blanks() {
        let doc = "\n# header\na = 1\nb = two words  # trailing\n\nc=3\n";
        let pairs = parse(doc).unwrap();
        assert_eq!(
            pairs,
            vec![
                ("a".into(), "1".into()),
                ("b".into(), "two words".into()),
                ("c".into(), "3".into()),
            ]
        );
    }

    #[test]
    fn repeated_keys_preserved_in_order() {
        let pairs = parse("shell = 1\nshell = 2\n").unwrap();
        assert_eq!(pairs.len(), 2);
        assert_eq!(pairs[1].1, "2");
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(parse("not a binding\n").is_err());
        assert!(parse("= value\n").is_err());
    }

    #[test]
    fn parse_value_names_the_key() {
        let err = parse_value::<f64>("sigma", "abc").unwrap_err();
        assert!(err.to_string().contains("sigma"));
    }
}
