use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{CrossAgeSplit, Pair, SyntheticSample};
use crate::error::{Error, Result};
use crate::textio::{join_floats, parse_floats};

pub const DATASET_HEADER: &str = "# oefd-dataset v1";
pub const SPLIT_HEADER: &str = "# oefd-split v1";

fn parse_err(source: &str, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        source_name: source.to_string(),
        location: format!("line {line}"),
        message: message.into(),
    }
}

/// `identity,age<TAB>x1,x2,...` per line after the header.
pub fn write_dataset(samples: &[SyntheticSample]) -> String {
    let mut out = String::from(DATASET_HEADER);
    out.push('\n');
    for s in samples {
        writeln!(out, "{},{}\t{}", s.identity, s.age, join_floats(&s.input)).unwrap();
    }
    out
}

pub fn parse_dataset(text: &str, source: &str) -> Result<Vec<SyntheticSample>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end() == DATASET_HEADER => {}
        _ => return Err(parse_err(source, 1, format!("expected header `{DATASET_HEADER}`"))),
    }
    let mut out = Vec::new();
    let mut dim = None;
    for (idx, line) in lines {
        let ln = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let (labels, comps) = line
            .split_once('\t')
            .ok_or_else(|| parse_err(source, ln, "missing tab separator"))?;
        let (id, age) = labels
            .split_once(',')
            .ok_or_else(|| parse_err(source, ln, "expected `identity,age`"))?;
        let identity: usize = id
            .trim()
            .parse()
            .map_err(|_| parse_err(source, ln, format!("bad identity `{id}`")))?;
        let age = parse_floats(age, source, ln)?[0];
        let input = parse_floats(comps, source, ln)?;
        if *dim.get_or_insert(input.len()) != input.len() {
            return Err(parse_err(source, ln, "inconsistent input width"));
        }
        out.push(SyntheticSample { input, identity, age });
    }
    Ok(out)
}

pub fn read_dataset(path: &Path) -> Result<Vec<SyntheticSample>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&text, &path.display().to_string())
}

/// `index_a,index_b,label` per line.
pub fn write_pairs(pairs: &[Pair]) -> String {
    let mut out = String::new();
    for p in pairs {
        writeln!(out, "{},{},{}", p.a, p.b, u8::from(p.same)).unwrap();
    }
    out
}

pub fn parse_pairs(text: &str, source: &str) -> Result<Vec<Pair>> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let ln = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let [a, b, l] = fields[..] else {
            return Err(parse_err(source, ln, "expected `index_a,index_b,label`"));
        };
        let a: usize = a.parse().map_err(|_| parse_err(source, ln, format!("bad index `{a}`")))?;
        let b: usize = b.parse().map_err(|_| parse_err(source, ln, format!("bad index `{b}`")))?;
        let same = match l {
            "0" => false,
            "1" => true,
            other => return Err(parse_err(source, ln, format!("label must be 0 or 1, got `{other}`"))),
        };
        out.push(Pair { a, b, same });
    }
    Ok(out)
}

pub fn read_pairs(path: &Path) -> Result<Vec<Pair>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_pairs(&text, &path.display().to_string())
}

fn join_indices(v: &[usize]) -> String {
    v.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(",")
}

/// Header, then `train`, `gallery` and `probe` lines of comma-separated
/// sample indices.
pub fn write_split(split: &CrossAgeSplit) -> String {
    format!(
        "{SPLIT_HEADER}\ntrain\t{}\ngallery\t{}\nprobe\t{}\n",
        join_indices(&split.train),
        join_indices(&split.gallery),
        join_indices(&split.probe)
    )
}

pub fn parse_split(text: &str, source: &str) -> Result<CrossAgeSplit> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end() == SPLIT_HEADER => {}
        _ => return Err(parse_err(source, 1, format!("expected header `{SPLIT_HEADER}`"))),
    }
    let mut split = CrossAgeSplit::default();
    let mut seen = [false; 3];
    for (idx, line) in lines {
        let ln = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let (role, rest) = line.split_once('\t').unwrap_or((line, ""));
        let indices: Vec<usize> = if rest.trim().is_empty() {
            Vec::new()
        } else {
            rest.split(',')
                .map(|t| t.trim().parse().map_err(|_| parse_err(source, ln, format!("bad index `{t}`"))))
                .collect::<Result<_>>()?
        };
        let slot = match role {
            "train" => 0,
            "gallery" => 1,
            "probe" => 2,
            other => return Err(parse_err(source, ln, format!("unknown role `{other}`"))),
        };
        seen[slot] = true;
        match slot {
            0 => split.train = indices,
            1 => split.gallery = indices,
            _ => split.probe = indices,
        }
    }
    if seen.iter().any(|s| !s) {
        return Err(parse_err(source, text.lines().count(), "split needs train, gallery and probe lines"));
    }
    Ok(split)
}

pub fn read_split(path: &Path) -> Result<CrossAgeSplit> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_split(&text, &path.display().to_string())
}
