//! Text container for trained models.
//!
//! ```text
//! format = cotm-model/1
//! literals = 4
//! clauses = 2
//! classes = 2
//! state_bound = 256
//! actions
//! 01
//! 00
//! 10
//! 00
//! weights
//! 3 -1
//! -2 4
//! end
//! ```
//!
//! `actions` has one line per literal, one `0`/`1` character per clause.
//! `weights` has one line per class.

use std::fmt::Write as _;
use std::path::Path;

use crate::cotm::{ActionMatrix, CotmModel, SignedWeightMatrix};
use crate::error::{Error, Result};

pub const MODEL_FORMAT: &str = "cotm-model/1";

pub fn to_string(model: &CotmModel) -> String {
    let (k, n, m) = (model.literals(), model.clauses(), model.classes());
    let mut s = String::with_capacity(k * (n + 1) + m * n * 5 + 128);
    let _ = writeln!(s, "format = {MODEL_FORMAT}");
    let _ = writeln!(s, "literals = {k}");
    let _ = writeln!(s, "clauses = {n}");
    let _ = writeln!(s, "classes = {m}");
    let _ = writeln!(s, "state_bound = {}", model.state_bound);
    s.push_str("actions\n");
    for i in 0..k {
        for j in 0..n {
            s.push(if model.actions.get(i, j) { '1' } else { '0' });
        }
        s.push('\n');
    }
    s.push_str("weights\n");
    for c in 0..m {
        let row: Vec<String> = model.weights.row(c).iter().map(i32::to_string).collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s.push_str("end\n");
    s
}

fn header<'a>(lines: &mut impl Iterator<Item = (usize, &'a str)>, key: &str) -> Result<&'a str> {
    let (no, line) = lines
        .next()
        .ok_or_else(|| Error::Parse(format!("missing header field `{key}`")))?;
    let (k, v) = line
        .split_once('=')
        .ok_or_else(|| Error::Parse(format!("line {}: expected `{key} = ...`", no + 1)))?;
    if k.trim() != key {
        return Err(Error::Parse(format!("line {}: expected `{key}`, found `{}`", no + 1, k.trim())));
    }
    Ok(v.trim())
}

fn header_usize<'a>(lines: &mut impl Iterator<Item = (usize, &'a str)>, key: &str) -> Result<usize> {
    let v = header(lines, key)?;
    v.parse()
        .map_err(|_| Error::Parse(format!("`{key}` is not a non-negative integer: `{v}`")))
}

fn expect<'a>(lines: &mut impl Iterator<Item = (usize, &'a str)>, word: &str) -> Result<()> {
    match lines.next() {
        Some((_, l)) if l.trim() == word => Ok(()),
        Some((no, l)) => Err(Error::Parse(format!("line {}: expected `{word}`, found `{l}`", no + 1))),
        None => Err(Error::Parse(format!("unexpected end of file, expected `{word}`"))),
    }
}

pub fn from_str(text: &str) -> Result<CotmModel> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
    let format = header(&mut lines, "format")?;
    if format != MODEL_FORMAT {
        return Err(Error::Parse(format!("unsupported model format `{format}`")));
    }
    let k = header_usize(&mut lines, "literals")?;
    let n = header_usize(&mut lines, "clauses")?;
    let m = header_usize(&mut lines, "classes")?;
    let bound = header_usize(&mut lines, "state_bound")?;
    if k == 0 || n == 0 {
        return Err(Error::Parse("literal and clause counts must be positive".into()));
    }
    let state_bound = u32::try_from(bound).map_err(|_| Error::Parse("state_bound too large".into()))?;

    expect(&mut lines, "actions")?;
    let mut actions = ActionMatrix::new(k, n);
    for i in 0..k {
        let (no, row) = lines
            .next()
            .ok_or_else(|| Error::Parse(format!("action matrix truncated at row {i}")))?;
        let row = row.trim();
        if row.len() != n {
            return Err(Error::Parse(format!("line {}: action row has {} columns, expected {n}", no + 1, row.len())));
        }
        for (j, ch) in row.bytes().enumerate() {
            match ch {
                b'1' => actions.set(i, j, true),
                b'0' => {}
                _ => return Err(Error::Parse(format!("line {}: invalid action character", no + 1))),
            }
        }
    }

    expect(&mut lines, "weights")?;
    let mut rows = Vec::with_capacity(m);
    for c in 0..m {
        let (no, row) = lines
            .next()
            .ok_or_else(|| Error::Parse(format!("weight matrix truncated at class {c}")))?;
        let vals = row
            .split_whitespace()
            .map(|t| t.parse::<i32>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse(format!("line {}: {e}", no + 1)))?;
        if vals.len() != n {
            return Err(Error::Parse(format!("line {}: weight row has {} entries, expected {n}", no + 1, vals.len())));
        }
        rows.push(vals);
    }
    expect(&mut lines, "end")?;
    let weights = SignedWeightMatrix::from_rows(&rows)?;
    CotmModel::new(actions, weights, state_bound)
}

pub fn save(model: &CotmModel, path: &Path) -> Result<()> {
    std::fs::write(path, to_string(model)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<CotmModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_str(&text)
}
