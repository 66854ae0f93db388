//! Shared number formatting for the line-oriented file formats.
//!
//! Floats are written with Rust's shortest round-trip `Display`, so a
//! written file parses back to bit-identical values.

use std::fmt::Write as _;

use crate::error::{Error, Result};

pub(crate) fn join_floats(v: &[f64]) -> String {
    let mut s = String::new();
    for (i, x) in v.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        write!(s, "{x}").unwrap();
    }
    s
}

pub(crate) fn parse_floats(field: &str, source: &str, line: usize) -> Result<Vec<f64>> {
    field
        .split(',')
        .map(|t| {
            let bad = |what: &str| Error::Parse {
                source_name: source.to_string(),
                location: format!("line {line}"),
                message: format!("{what} `{t}`"),
            };
            let v: f64 = t.trim().parse().map_err(|_| bad("bad number"))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(bad("non-finite number"))
            }
        })
        .collect()
}
