//! Text vector files: one input vector per line, whitespace-separated hex
//! words with or without a `0x` prefix, `#` starting a comment.

use std::path::Path;

use crate::error::{Error, Result};

/// One parsed input vector and the 1-based line it came from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VectorLine {
    pub line: usize,
    pub words: Vec<u64>,
}

pub fn parse_word(token: &str) -> Option<u64> {
    let digits = token
        .strip_prefix("0x")
        .or_else(|| token.strip_prefix("0X"))
        .unwrap_or(token);
    if digits.is_empty() {
        return None;
    }
    u64::from_str_radix(digits, 16).ok()
}

/// Parses vector file text. When `n_terms` is given every vector must have
/// exactly that many words. Lines with no words are skipped.
pub fn parse_vectors(text: &str, n_terms: Option<usize>, path: Option<&Path>) -> Result<Vec<VectorLine>> {
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: path.map(Path::to_path_buf),
        line,
        msg,
    };
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or_default();
        let words = content
            .split_whitespace()
            .map(|t| parse_word(t).ok_or_else(|| parse_err(line, format!("`{t}` is not a hex word"))))
            .collect::<Result<Vec<_>>>()?;
        if words.is_empty() {
            continue;
        }
        if let Some(n) = n_terms {
            if words.len() != n {
                return Err(parse_err(line, format!("expected {n} words, found {}", words.len())));
            }
        }
        out.push(VectorLine { line, words });
    }
    Ok(out)
}

pub fn read_vector_file(path: &Path, n_terms: Option<usize>) -> Result<Vec<VectorLine>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_vectors(&text, n_terms, Some(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn words() {
        assert_eq!(parse_word("3F80"), Some(0x3F80));
        assert_eq!(parse_word("0x3f80"), Some(0x3F80));
        assert_eq!(parse_word("0x"), None);
        assert_eq!(parse_word("zz"), None);
    }

    #[test]
    fn file_grammar() {
        let text = "# header\n3F80 0x3F80\n\n  4000 4000 # trailing\n";
        let v = parse_vectors(text, Some(2), None).unwrap();
        assert_eq!(v.len(), 2);
        assert_eq!(v[0], VectorLine { line: 2, words: vec![0x3F80, 0x3F80] });
        assert_eq!(v[1].line, 4);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = parse_vectors("1 2\n1 2 3\n", Some(2), Some(Path::new("v.txt"))).unwrap_err();
        assert_eq!(err.to_string(), "v.txt: line 2: expected 2 words, found 3");
        let err = parse_vectors("1 g\n", None, None).unwrap_err();
        assert_eq!(err.to_string(), "line 1: `g` is not a hex word");
        assert!(read_vector_file(Path::new("/nonexistent/vectors.txt"), None).is_err());
    }
}
