//! CSV documents with a `#` metadata header and a `# summary` footer.
//!
//! ```text
//! # skgs-csv 1
//! # command: charge-law
//! # ...
//! # config-begin
//! # [grid]
//! # a = 0.0
//! # config-end
//! t,mean,stderr,reference
//! 0.0000000000000000e0,...
//! # summary
//! # max_abs_z: 1.2
//! ```

use std::fmt::Write as _;

use thiserror::Error;

pub const FORMAT_TAG: &str = "# skgs-csv 1";

/// Full double precision: 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CsvDoc {
    pub header: Vec<(String, String)>,
    /// Resolved run configuration (TOML).
    pub config: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub summary: Vec<(String, String)>,
}

#[derive(Debug, Error, PartialEq)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl CsvDoc {
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(FORMAT_TAG);
        out.push('\n');
        for (k, v) in &self.header {
            let _ = writeln!(out, "# {k}: {v}");
        }
        out.push_str("# config-begin\n");
        for line in self.config.lines() {
            if line.is_empty() {
                out.push_str("#\n");
            } else {
                let _ = writeln!(out, "# {line}");
            }
        }
        out.push_str("# config-end\n");
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out.push_str("# summary\n");
        for (k, v) in &self.summary {
            let _ = writeln!(out, "# {k}: {v}");
        }
        out
    }

    pub fn parse(text: &str) -> Result<CsvDoc, ParseError> {
        let err = |line: usize, message: String| ParseError { line, message };
        let mut lines = text.split('\n').enumerate().map(|(i, l)| (i + 1, l)).peekable();
        if text.contains('\r') {
            return Err(err(1, "carriage return found; expected LF line endings".into()));
        }
        match lines.next() {
            Some((_, l)) if l == FORMAT_TAG => {}
            Some((n, l)) => return Err(err(n, format!("expected `{FORMAT_TAG}`, found `{l}`"))),
            None => return Err(err(1, "empty document".into())),
        }
        let mut doc = CsvDoc::default();
        let key_value = |n: usize, body: &str| -> Result<(String, String), ParseError> {
            body.split_once(": ")
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| err(n, format!("malformed metadata line `# {body}`")))
        };
        // Header key-value lines until the config block.
        loop {
            let (n, l) = lines.next().ok_or_else(|| err(0, "missing `# config-begin`".into()))?;
            let body = l
                .strip_prefix("# ")
                .ok_or_else(|| err(n, format!("expected a metadata line, found `{l}`")))?;
            if body == "config-begin" {
                break;
            }
            doc.header.push(key_value(n, body)?);
        }
        loop {
            let (n, l) = lines.next().ok_or_else(|| err(0, "missing `# config-end`".into()))?;
            if l == "# config-end" {
                break;
            }
            if l == "#" {
                doc.config.push('\n');
            } else if let Some(body) = l.strip_prefix("# ") {
                doc.config.push_str(body);
                doc.config.push('\n');
            } else {
                return Err(err(n, format!("expected a config line, found `{l}`")));
            }
        }
        let (n, cols) = lines.next().ok_or_else(|| err(0, "missing column line".into()))?;
        if cols.is_empty() || cols.starts_with('#') {
            return Err(err(n, "expected the column line".into()));
        }
        doc.columns = cols.split(',').map(str::to_string).collect();
        loop {
            let (n, l) = lines.next().ok_or_else(|| err(0, "missing `# summary` footer".into()))?;
            if l == "# summary" {
                break;
            }
            let row: Vec<String> = l.split(',').map(str::to_string).collect();
            if row.len() != doc.columns.len() {
                return Err(err(n, format!("{} fields, expected {}", row.len(), doc.columns.len())));
            }
            doc.rows.push(row);
        }
        for (n, l) in lines {
            if l.is_empty() {
                continue;
            }
            let body = l
                .strip_prefix("# ")
                .ok_or_else(|| err(n, format!("expected a summary line, found `{l}`")))?;
            doc.summary.push(key_value(n, body)?);
        }
        Ok(doc)
    }

    pub fn header_value(&self, key: &str) -> Option<&str> {
        self.header.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn summary_value(&self, key: &str) -> Option<&str> {
        self.summary.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Values of a numeric column.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        self.rows.iter().map(|r| r[j].parse().ok()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CsvDoc {
        CsvDoc {
            header: vec![("command".into(), "converge".into()), ("scheme".into(), "CFD-I".into())],
            config: "[grid]\na = 0.0\n\n[scheme]\nname = \"CFD-I\"\n".into(),
            columns: vec!["dt".into(), "rms_error".into()],
            rows: vec![vec![num(0.125), num(0.3)], vec![num(0.0625), num(1.0 / 3.0)]],
            summary: vec![("slope".into(), num(1.0))],
        }
    }

    #[test]
    fn round_trip() {
        let d = sample();
        let text = d.render();
        assert!(text.ends_with('\n') && !text.contains('\r'));
        assert_eq!(CsvDoc::parse(&text).unwrap(), d);
        assert_eq!(CsvDoc::parse(&text).unwrap().render(), text);
        assert_eq!(d.column("rms_error").unwrap()[1], 1.0 / 3.0);
        assert_eq!(d.summary_value("slope"), Some("1.0000000000000000e0"));
    }

    #[test]
    fn seventeen_digits() {
        assert_eq!(num(0.1), "1.0000000000000001e-1");
        assert_eq!(num(0.1).parse::<f64>().unwrap(), 0.1);
    }

    #[test]
    fn errors_name_the_line() {
        let text = sample().render().replace("# scheme: CFD-I", "# scheme CFD-I");
        assert_eq!(CsvDoc::parse(&text).unwrap_err().line, 3);
        let text = sample().render().replace("1.2500000000000000e-1,", "");
        assert!(CsvDoc::parse(&text).unwrap_err().message.contains("fields"));
        assert!(CsvDoc::parse("t,x\n").is_err());
        assert!(CsvDoc::parse(&sample().render().replace('\n', "\r\n")).is_err());
    }
}
