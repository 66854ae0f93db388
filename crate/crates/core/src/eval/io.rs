use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::EmbeddingSet;
use crate::textio::{join_floats, parse_floats};
use crate::error::{Error, Result};
use crate::numerics::Matrix;

pub const EMBEDDINGS_HEADER: &str = "# oefd-embeddings v1";

/// Rows of an embedding file; `None` marks an unlabelled distractor.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub identities: Vec<Option<usize>>,
    pub embeddings: Matrix,
}

impl EmbeddingTable {
    /// The labelled rows, in file order.
    pub fn labeled(&self) -> EmbeddingSet {
        let idx: Vec<usize> = (0..self.identities.len()).filter(|&i| self.identities[i].is_some()).collect();
        EmbeddingSet {
            embeddings: self.embeddings.select_rows(&idx),
            identities: idx.iter().map(|&i| self.identities[i].unwrap()).collect(),
            ages: None,
        }
    }

    pub fn distractors(&self) -> Matrix {
        let idx: Vec<usize> = (0..self.identities.len()).filter(|&i| self.identities[i].is_none()).collect();
        self.embeddings.select_rows(&idx)
    }

    pub fn num_distractors(&self) -> usize {
        self.identities.iter().filter(|i| i.is_none()).count()
    }
}

/// `identity<TAB>x1,x2,...` per row, `-1` for distractors.
pub fn write_embeddings(table: &EmbeddingTable) -> String {
    let mut out = String::from(EMBEDDINGS_HEADER);
    out.push('\n');
    for (id, row) in table.identities.iter().zip(table.embeddings.iter_rows()) {
        match id {
            Some(id) => write!(out, "{id}").unwrap(),
            None => out.push_str("-1"),
        }
        writeln!(out, "\t{}", join_floats(row)).unwrap();
    }
    out
}

pub fn parse_embeddings(text: &str, source: &str) -> Result<EmbeddingTable> {
    let err = |line: usize, message: String| Error::Parse {
        source_name: source.to_string(),
        location: format!("line {line}"),
        message,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end() == EMBEDDINGS_HEADER => {}
        _ => return Err(err(1, format!("expected header `{EMBEDDINGS_HEADER}`"))),
    }
    let mut identities = Vec::new();
    let mut data = Vec::new();
    let mut dim = None;
    for (idx, line) in lines {
        let ln = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let (id, comps) = line
            .split_once('\t')
            .ok_or_else(|| err(ln, "missing tab separator".into()))?;
        let id: i64 = id.trim().parse().map_err(|_| err(ln, format!("bad identity `{id}`")))?;
        let identity = match id {
            -1 => None,
            i if i >= 0 => Some(i as usize),
            other => return Err(err(ln, format!("identity must be >= 0 or -1, got {other}"))),
        };
        let row = parse_floats(comps, source, ln)?;
        if *dim.get_or_insert(row.len()) != row.len() {
            return Err(err(ln, "inconsistent embedding width".into()));
        }
        identities.push(identity);
        data.extend(row);
    }
    let rows = identities.len();
    Ok(EmbeddingTable {
        identities,
        embeddings: Matrix::new(rows, dim.unwrap_or(0), data)?,
    })
}

pub fn read_embeddings(path: &Path) -> Result<EmbeddingTable> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_embeddings(&text, &path.display().to_string())
}
