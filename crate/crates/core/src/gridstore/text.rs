//! Token-level helpers shared by the plain-text file formats.

use std::path::Path;

use crate::error::{Error, Result};

pub const NA: &str = "NA";

/// Shortest round-trip decimal form of a finite float (`0.0`, `-22.47`, `1e-7`).
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

pub fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => fmt_f64(x),
        None => NA.to_string(),
    }
}

pub fn parse_f64(tok: &str) -> std::result::Result<f64, String> {
    let v: f64 = tok
        .parse()
        .map_err(|_| format!("not a number: {tok:?}"))?;
    if !v.is_finite() {
        return Err(format!("non-finite value: {tok:?}"));
    }
    Ok(v)
}

pub fn parse_opt(tok: &str) -> std::result::Result<Option<f64>, String> {
    if tok == NA {
        Ok(None)
    } else {
        parse_f64(tok).map(Some)
    }
}

pub fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_string(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Line-oriented cursor used by the header parsers; line numbers are 1-based.
pub struct Lines<'a> {
    path: String,
    iter: std::iter::Enumerate<std::str::Lines<'a>>,
    pub line_no: usize,
}

impl<'a> Lines<'a> {
    pub fn new(path: &Path, text: &'a str) -> Self {
        Lines {
            path: path.display().to_string(),
            iter: text.lines().enumerate(),
            line_no: 0,
        }
    }

    pub fn path(&self) -> &str {
        &self.path
    }

    pub fn next_line(&mut self, what: &str) -> Result<&'a str> {
        match self.iter.next() {
            Some((i, l)) => {
                self.line_no = i + 1;
                Ok(l)
            }
            None => Err(Error::parse(&self.path, self.line_no + 1, format!("missing {what}"))),
        }
    }

    pub fn err(&self, msg: impl Into<String>) -> Error {
        Error::parse(&self.path, self.line_no, msg)
    }

    pub fn expect_magic(&mut self, magic: &str) -> Result<()> {
        let l = self.next_line("magic line")?;
        if l.trim_end() != magic {
            return Err(self.err(format!("expected magic {magic:?}, found {l:?}")));
        }
        Ok(())
    }

    /// Remaining text as whitespace-separated tokens.
    pub fn rest_tokens(self) -> impl Iterator<Item = &'a str> {
        self.iter.flat_map(|(_, l)| l.split_whitespace())
    }
}

pub fn parse_usize(lines: &Lines<'_>, tok: &str, what: &str) -> Result<usize> {
    tok.parse()
        .map_err(|_| lines.err(format!("{what}: not a count: {tok:?}")))
}

pub fn parse_header_f64(lines: &Lines<'_>, tok: &str, what: &str) -> Result<f64> {
    parse_f64(tok).map_err(|m| lines.err(format!("{what}: {m}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formats_are_shortest_roundtrip() {
        assert_eq!(fmt_f64(0.0), "0.0");
        assert_eq!(fmt_f64(-22.47), "-22.47");
        assert_eq!(parse_f64("-22.47").unwrap(), -22.47);
        assert_eq!(fmt_opt(None), "NA");
        assert!(parse_f64("inf").is_err());
        assert!(parse_f64("NaN").is_err());
        let tiny = 1.0e-300_f64;
        assert_eq!(parse_f64(&fmt_f64(tiny)).unwrap(), tiny);
    }
}
