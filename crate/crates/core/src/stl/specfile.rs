//! Specification files: one formula per file, `#` comment lines and
//! `param NAME = value` definitions substituted before parsing.
//!
//! A line whose first non-blank character is `#` followed by a digit, `.` or
//! `(` is formula text (a `#k` scale prefix), not a comment.

use std::collections::HashMap;
use std::path::Path;

use thiserror::Error;

use super::{parse_with_params, Formula, ParseError};

#[derive(Debug, Error)]
pub enum SpecFileError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: bad parameter definition: {message}")]
    Param { line: usize, message: String },
    #[error("no formula text")]
    Empty,
    #[error(transparent)]
    Parse(#[from] ParseError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpecFile {
    /// Parameters in order of definition.
    pub params: Vec<(String, f64)>,
    /// Formula text with comment and parameter lines blanked out, so parse
    /// errors keep the file's line numbers.
    pub body: String,
}

fn is_comment(line: &str) -> bool {
    let t = line.trim_start();
    match t.strip_prefix('#') {
        Some(rest) => !rest
            .chars()
            .next()
            .is_some_and(|c| c.is_ascii_digit() || c == '.' || c == '('),
        None => false,
    }
}

impl SpecFile {
    pub fn parse_text(text: &str) -> Result<Self, SpecFileError> {
        let mut params = Vec::new();
        let mut body = String::new();
        for (i, line) in text.lines().enumerate() {
            let trimmed = line.trim_start();
            if is_comment(line) {
                body.push('\n');
                continue;
            }
            if let Some(rest) = trimmed.strip_prefix("param ") {
                let (name, value) = rest.split_once('=').ok_or(SpecFileError::Param {
                    line: i + 1,
                    message: "expected `param NAME = value`".into(),
                })?;
                let name = name.trim();
                if name.is_empty() || !name.chars().all(|c| c.is_alphanumeric() || c == '_') {
                    return Err(SpecFileError::Param {
                        line: i + 1,
                        message: format!("invalid parameter name `{name}`"),
                    });
                }
                let value: f64 = value.trim().parse().map_err(|_| SpecFileError::Param {
                    line: i + 1,
                    message: format!("`{}` is not a number", value.trim()),
                })?;
                params.retain(|(n, _): &(String, f64)| n != name);
                params.push((name.to_string(), value));
                body.push('\n');
                continue;
            }
            body.push_str(line);
            body.push('\n');
        }
        if body.trim().is_empty() {
            return Err(SpecFileError::Empty);
        }
        Ok(SpecFile { params, body })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SpecFileError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| SpecFileError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse_text(&text)
    }

    /// Parses the formula with the file's parameters, letting `overrides`
    /// replace or add values.
    pub fn formula(&self, overrides: &HashMap<String, f64>) -> Result<Formula, SpecFileError> {
        let mut params: HashMap<String, f64> = self.params.iter().cloned().collect();
        params.extend(overrides.iter().map(|(k, v)| (k.clone(), *v)));
        Ok(parse_with_params(&self.body, &params)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stl::{Formula, Interval, Relation};

    #[test]
    fn comments_and_params() {
        let text = "# phi_1 with horizon T\nparam T = 30\n\nev_[0,T] (w >= 2000)\n";
        let spec = SpecFile::parse_text(text).unwrap();
        assert_eq!(spec.params, vec![("T".to_string(), 30.0)]);
        let f = spec.formula(&HashMap::new()).unwrap();
        assert_eq!(
            f,
            Formula::eventually(
                Interval::bounded(0.0, 30.0),
                Formula::cmp("w", Relation::Ge, 2000.0)
            )
        );
        let g = spec
            .formula(&HashMap::from([("T".to_string(), 20.0)]))
            .unwrap();
        assert_eq!(
            g,
            Formula::eventually(
                Interval::bounded(0.0, 20.0),
                Formula::cmp("w", Relation::Ge, 2000.0)
            )
        );
    }

    #[test]
    fn scale_prefix_is_not_a_comment() {
        let spec = SpecFile::parse_text("#2 (x > 0)").unwrap();
        let f = spec.formula(&HashMap::new()).unwrap();
        assert!(matches!(f, Formula::Scaled { factor, .. } if factor == 2.0));
    }

    #[test]
    fn parse_errors_keep_line_numbers() {
        let spec = SpecFile::parse_text("# c\nparam a = 1\nx >\n").unwrap();
        let err = spec.formula(&HashMap::new()).unwrap_err();
        let SpecFileError::Parse(p) = err else {
            panic!()
        };
        assert_eq!(p.position().0, 4);
    }

    #[test]
    fn bad_params() {
        assert!(matches!(
            SpecFile::parse_text("param x 1\nx > 0"),
            Err(SpecFileError::Param { .. })
        ));
        assert!(matches!(
            SpecFile::parse_text("param x = abc\nx > 0"),
            Err(SpecFileError::Param { .. })
        ));
        assert!(matches!(
            SpecFile::parse_text("# only a comment\n"),
            Err(SpecFileError::Empty)
        ));
    }
}
