//! Text coordinate format.
//!
//! ```text
//! n nnz [sym]
//! i j k value        (1-indexed, nnz lines)
//! ```
//!
//! With the `sym` flag only one representative per symmetry class is stored
//! and every entry is expanded to all of its permutations on load.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use super::dense::{DenseTensor3, DEFAULT_MEMORY_CAP};
use super::synth::permutations;
use crate::error::{Error, Result};

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

pub fn read_coo(reader: impl Read) -> Result<DenseTensor3> {
    let mut lines = BufReader::new(reader).lines().enumerate();
    let (header_no, header) = loop {
        match lines.next() {
            Some((no, line)) => {
                let line = line?;
                if !line.trim().is_empty() {
                    break (no + 1, line);
                }
            }
            None => return Err(parse_err(1, "missing header line")),
        }
    };
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() < 2 || fields.len() > 3 {
        return Err(parse_err(header_no, "expected 'n nnz [sym]'"));
    }
    let n: usize = fields[0]
        .parse()
        .map_err(|_| parse_err(header_no, "bad dimension"))?;
    let nnz: usize = fields[1]
        .parse()
        .map_err(|_| parse_err(header_no, "bad nnz"))?;
    let sym = match fields.get(2) {
        None => false,
        Some(&"sym") => true,
        Some(other) => return Err(parse_err(header_no, format!("unknown flag '{other}'"))),
    };
    if n == 0 {
        return Err(parse_err(header_no, "dimension must be positive"));
    }
    DenseTensor3::check_cap(n, DEFAULT_MEMORY_CAP)?;

    let mut t = DenseTensor3::zeros(n);
    let mut seen = 0usize;
    for (no, line) in lines {
        let line = line?;
        let line_no = no + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 4 {
            return Err(parse_err(line_no, "expected 'i j k value'"));
        }
        let mut idx = [0usize; 3];
        for (slot, p) in idx.iter_mut().zip(&parts[..3]) {
            let v: usize = p.parse().map_err(|_| parse_err(line_no, "bad index"))?;
            if v == 0 || v > n {
                return Err(parse_err(line_no, format!("index {v} outside 1..={n}")));
            }
            *slot = v - 1;
        }
        let value: f64 = parts[3]
            .parse()
            .map_err(|_| parse_err(line_no, "bad value"))?;
        let [i, j, k] = idx;
        if sym {
            for (a, b, c) in permutations(i, j, k) {
                t.set(a, b, c, value);
            }
        } else {
            t.set(i, j, k, value);
        }
        seen += 1;
    }
    if seen != nnz {
        return Err(parse_err(
            header_no,
            format!("header declares {nnz} entries, found {seen}"),
        ));
    }
    Ok(t)
}

pub fn read_coo_file(path: impl AsRef<Path>) -> Result<DenseTensor3> {
    read_coo(std::fs::File::open(path)?)
}

/// Writes the nonzero entries of `t`. With `sym` only sorted triples are
/// written and the header carries the `sym` flag; the caller is responsible
/// for `t` actually being symmetric.
pub fn write_coo(t: &DenseTensor3, sym: bool, mut out: impl Write) -> Result<()> {
    let n = t.dim();
    let mut entries = Vec::new();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                if sym && !(i <= j && j <= k) {
                    continue;
                }
                let v = t.get(i, j, k);
                if v != 0.0 {
                    entries.push((i, j, k, v));
                }
            }
        }
    }
    if sym {
        writeln!(out, "{} {} sym", n, entries.len())?;
    } else {
        writeln!(out, "{} {}", n, entries.len())?;
    }
    for (i, j, k, v) in entries {
        writeln!(out, "{} {} {} {:?}", i + 1, j + 1, k + 1, v)?;
    }
    Ok(())
}
