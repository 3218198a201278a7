//! Flat `key = value` configuration files.

use std::path::Path;

use crate::error::{Error, Result};

/// Ordered `(key, value, byte offset)` entries; `#` starts a comment.
pub fn parse_config(text: &str, path: &Path) -> Result<Vec<(String, String, usize)>> {
    let mut out = Vec::new();
    let mut offset = 0;
    for raw in text.split_inclusive('\n') {
        let at = offset;
        offset += raw.len();
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::format(path, at, "expected 'key = value'"))?;
        let key = key.trim();
        if key.is_empty() || key.contains(char::is_whitespace) {
            return Err(Error::format(path, at, format!("invalid key '{key}'")));
        }
        out.push((key.to_string(), value.trim().to_string(), at));
    }
    Ok(out)
}

pub fn read_config(path: &Path) -> Result<Vec<(String, String, usize)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entries_in_order() {
        let text = "# run\nmodel = gar\n\nbeta=2.5  # balloon\n dt = 1e-3\n";
        let e = parse_config(text, Path::new("c")).unwrap();
        let kv: Vec<(&str, &str)> = e.iter().map(|(k, v, _)| (k.as_str(), v.as_str())).collect();
        assert_eq!(kv, vec![("model", "gar"), ("beta", "2.5"), ("dt", "1e-3")]);
        assert_eq!(e[2].2, 39);
    }

    #[test]
    fn malformed_lines() {
        assert!(matches!(parse_config("a = 1\nnonsense\n", Path::new("c")), Err(Error::Format { offset: 6, .. })));
        assert!(parse_config("two words = 1\n", Path::new("c")).is_err());
        assert!(parse_config(" = 1\n", Path::new("c")).is_err());
    }
}
