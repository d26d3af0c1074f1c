//! Line-oriented text container shared by model and basis files.
//!
//! Every line is `key value…` or a bare row of numbers. Floats are written
//! with 17 significant digits so 64-bit values survive a round trip exactly.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

pub(crate) struct TextWriter {
    buf: String,
}

impl TextWriter {
    pub fn new(magic: &str, version: u32) -> Self {
        let mut buf = String::new();
        writeln!(buf, "{magic}").unwrap();
        writeln!(buf, "format_version {version}").unwrap();
        Self { buf }
    }

    pub fn field(&mut self, key: &str, value: impl std::fmt::Display) {
        writeln!(self.buf, "{key} {value}").unwrap();
    }

    pub fn list<T: std::fmt::Display>(&mut self, key: &str, values: &[T]) {
        self.buf.push_str(key);
        for v in values {
            write!(self.buf, " {v}").unwrap();
        }
        self.buf.push('\n');
    }

    pub fn row(&mut self, values: impl IntoIterator<Item = f64>) {
        let mut first = true;
        for v in values {
            if !first {
                self.buf.push(' ');
            }
            first = false;
            write!(self.buf, "{}", fmt_f64(v)).unwrap();
        }
        self.buf.push('\n');
    }

    pub fn finish(self) -> String {
        self.buf
    }

    pub fn write_to(self, path: &Path) -> Result<()> {
        std::fs::write(path, self.finish())
            .map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }
}

pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub(crate) struct TextReader<'a> {
    lines: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> TextReader<'a> {
    /// Check the magic line and the format version.
    pub fn open(text: &'a str, magic: &str, version: u32) -> Result<Self> {
        let lines: Vec<_> = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
            .collect();
        let mut reader = Self { lines, pos: 0 };
        let (line, first) = reader.next_line("magic")?;
        if first != magic {
            return Err(Error::format(
                format!("line {line}: magic"),
                format!("expected `{magic}`, found `{first}`"),
            ));
        }
        let found: u32 = reader.parse_field("format_version")?;
        if found != version {
            return Err(Error::format(
                "format_version",
                format!("expected {version}, found {found}"),
            ));
        }
        Ok(reader)
    }

    fn next_line(&mut self, field: &str) -> Result<(usize, &'a str)> {
        let out = self.lines.get(self.pos).copied().ok_or_else(|| {
            Error::format(field, "unexpected end of file (truncated?)")
        })?;
        self.pos += 1;
        Ok(out)
    }

    /// Read `key …` and return the tokens after the key.
    pub fn field(&mut self, key: &str) -> Result<(usize, Vec<&'a str>)> {
        let (line, text) = self.next_line(key)?;
        let mut tokens = text.split_whitespace();
        match tokens.next() {
            Some(k) if k == key => Ok((line, tokens.collect())),
            other => Err(Error::format(
                format!("line {line}: {key}"),
                format!("expected key `{key}`, found `{}`", other.unwrap_or("")),
            )),
        }
    }

    pub fn parse_field<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let (line, tokens) = self.field(key)?;
        match tokens.as_slice() {
            [v] => v.parse().map_err(|_| {
                Error::format(format!("line {line}: {key}"), format!("cannot parse `{v}`"))
            }),
            _ => Err(Error::format(
                format!("line {line}: {key}"),
                format!("expected one value, found {}", tokens.len()),
            )),
        }
    }

    pub fn parse_list<T: std::str::FromStr>(&mut self, key: &str) -> Result<Vec<T>> {
        let (line, tokens) = self.field(key)?;
        parse_tokens(&tokens, line, key)
    }

    pub fn row(&mut self, field: &str, expected: usize) -> Result<Vec<f64>> {
        let (line, text) = self.next_line(field)?;
        let tokens: Vec<&str> = text.split_whitespace().collect();
        if tokens.len() != expected {
            return Err(Error::format(
                format!("line {line}: {field}"),
                format!("expected {expected} values, found {}", tokens.len()),
            ));
        }
        let values: Vec<f64> = parse_tokens(&tokens, line, field)?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::format(format!("line {line}: {field}"), "non-finite value"));
        }
        Ok(values)
    }

    pub fn finish(&self) -> Result<()> {
        match self.lines.get(self.pos) {
            None => Ok(()),
            Some((line, _)) => Err(Error::format(format!("line {line}"), "trailing content")),
        }
    }
}

fn parse_tokens<T: std::str::FromStr>(tokens: &[&str], line: usize, field: &str) -> Result<Vec<T>> {
    tokens
        .iter()
        .map(|t| {
            t.parse().map_err(|_| {
                Error::format(format!("line {line}: {field}"), format!("cannot parse `{t}`"))
            })
        })
        .collect()
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))
}
