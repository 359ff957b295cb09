//! Group stream files: one group per line as comma-separated elementary
//! divisors (`4,2,3`), `1` for the trivial group. Blank lines and lines
//! starting with `#` are skipped.

use std::io::{BufRead, Write};

use crate::abelian::FinAbGroup;
use crate::error::{Error, Result};

/// Lazily parses groups, reporting failures with 1-based line numbers.
pub fn read_groups<R: BufRead>(reader: R) -> impl Iterator<Item = Result<FinAbGroup>> {
    reader.lines().enumerate().filter_map(|(i, line)| {
        let line = match line {
            Ok(l) => l,
            Err(e) => return Some(Err(Error::Io(e))),
        };
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            return None;
        }
        Some(t.parse::<FinAbGroup>().map_err(|e| Error::GroupParse {
            line: i + 1,
            msg: match e {
                Error::Parse { msg, .. } => msg,
                other => other.to_string(),
            },
        }))
    })
}

pub fn write_group<W: Write>(out: &mut W, group: &FinAbGroup) -> std::io::Result<()> {
    writeln!(out, "{group}")
}
