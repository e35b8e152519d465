//! Line-oriented `key value` text format shared by the antenna, channel and
//! head model files.
//!
//! Every real number is written with 17 significant digits (`{:.16e}`), which
//! is enough for an exact `f64` round trip. Numeric blocks are introduced by
//! `key <count>` and followed by whitespace-separated values on as many lines
//! as needed.

use std::fmt::Write as _;

use num_complex::Complex64;

use crate::error::{Error, Result};

const VALUES_PER_LINE: usize = 8;

pub(crate) fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Default)]
pub(crate) struct TextWriter {
    buf: String,
}

impl TextWriter {
    pub fn new(tag: &str, version: u32) -> Self {
        let mut w = TextWriter::default();
        writeln!(w.buf, "{tag} v{version}").unwrap();
        w
    }

    pub fn field(&mut self, key: &str, value: impl std::fmt::Display) {
        writeln!(self.buf, "{key} {value}").unwrap();
    }

    pub fn real(&mut self, key: &str, value: f64) {
        writeln!(self.buf, "{key} {}", fmt_f64(value)).unwrap();
    }

    pub fn complex(&mut self, key: &str, value: Complex64) {
        writeln!(self.buf, "{key} {} {}", fmt_f64(value.re), fmt_f64(value.im)).unwrap();
    }

    pub fn reals<'a>(&mut self, key: &str, values: impl ExactSizeIterator<Item = &'a f64>) {
        writeln!(self.buf, "{key} {}", values.len()).unwrap();
        self.rows(values.map(|v| fmt_f64(*v)), VALUES_PER_LINE);
    }

    /// Writes complex values as `re im` pairs, four pairs per line.
    pub fn complexes(&mut self, key: &str, values: impl ExactSizeIterator<Item = Complex64>) {
        writeln!(self.buf, "{key} {}", values.len()).unwrap();
        self.rows(
            values.map(|c| format!("{} {}", fmt_f64(c.re), fmt_f64(c.im))),
            VALUES_PER_LINE / 2,
        );
    }

    fn rows(&mut self, items: impl Iterator<Item = String>, per_line: usize) {
        let mut n = 0;
        for item in items {
            if n > 0 {
                self.buf.push(if n % per_line == 0 { '\n' } else { ' ' });
            }
            self.buf.push_str(&item);
            n += 1;
        }
        if n > 0 {
            self.buf.push('\n');
        }
    }

    pub fn finish(self) -> String {
        self.buf
    }
}

pub(crate) struct TextReader<'a> {
    lines: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> TextReader<'a> {
    pub fn new(text: &'a str) -> Self {
        let lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
            .collect();
        TextReader { lines, pos: 0 }
    }

    fn last_line(&self) -> usize {
        self.lines.last().map_or(0, |(n, _)| *n)
    }

    fn next_line(&mut self, field: &str) -> Result<(usize, &'a str)> {
        let line = self
            .lines
            .get(self.pos)
            .copied()
            .ok_or_else(|| Error::parse(self.last_line() + 1, field, "unexpected end of file"))?;
        self.pos += 1;
        Ok(line)
    }

    /// Consumes the header line and returns its version number.
    pub fn header(&mut self, tag: &str) -> Result<u32> {
        let (line, text) = self.next_line("header")?;
        let mut parts = text.split_whitespace();
        if parts.next() != Some(tag) {
            return Err(Error::parse(line, "header", format!("expected `{tag} v<N>`")));
        }
        parts
            .next()
            .and_then(|v| v.strip_prefix('v'))
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::parse(line, "header", "missing version"))
    }

    /// Returns the line number and the value tokens following `key`.
    pub fn field(&mut self, key: &str) -> Result<(usize, Vec<&'a str>)> {
        let (line, text) = self.next_line(key)?;
        let mut parts = text.split_whitespace();
        match parts.next() {
            Some(k) if k == key => Ok((line, parts.collect())),
            Some(k) => Err(Error::parse(line, key, format!("expected field `{key}`, found `{k}`"))),
            None => Err(Error::parse(line, key, "empty line")),
        }
    }

    pub fn parse_field<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let (line, tokens) = self.field(key)?;
        match tokens.as_slice() {
            [v] => v
                .parse()
                .map_err(|_| Error::parse(line, key, format!("cannot parse `{v}`"))),
            _ => Err(Error::parse(line, key, "expected exactly one value")),
        }
    }

    pub fn complex(&mut self, key: &str) -> Result<Complex64> {
        let (line, tokens) = self.field(key)?;
        match tokens.as_slice() {
            [re, im] => Ok(Complex64::new(
                parse_f64(re, line, key)?,
                parse_f64(im, line, key)?,
            )),
            _ => Err(Error::parse(line, key, "expected `re im`")),
        }
    }

    fn block_values(&mut self, key: &str, per_item: usize) -> Result<Vec<f64>> {
        let count: usize = self.parse_field(key)?;
        let want = count * per_item;
        let mut out = Vec::with_capacity(want);
        while out.len() < want {
            let (line, text) = self.next_line(key)?;
            for tok in text.split_whitespace() {
                if out.len() == want {
                    return Err(Error::parse(line, key, "too many values in block"));
                }
                out.push(parse_f64(tok, line, key)?);
            }
        }
        Ok(out)
    }

    pub fn reals(&mut self, key: &str) -> Result<Vec<f64>> {
        self.block_values(key, 1)
    }

    pub fn complexes(&mut self, key: &str) -> Result<Vec<Complex64>> {
        Ok(self
            .block_values(key, 2)?
            .chunks_exact(2)
            .map(|p| Complex64::new(p[0], p[1]))
            .collect())
    }

    pub fn finish(&self) -> Result<()> {
        match self.lines.get(self.pos) {
            None => Ok(()),
            Some((line, _)) => Err(Error::parse(*line, "end", "trailing content")),
        }
    }
}

fn parse_f64(tok: &str, line: usize, key: &str) -> Result<f64> {
    let v: f64 = tok
        .parse()
        .map_err(|_| Error::parse(line, key, format!("cannot parse number `{tok}`")))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::parse(line, key, format!("non-finite value `{tok}`")))
    }
}
