//! Line-delimited JSON and CSV files, with all writes going through a
//! temporary file in the destination directory and a rename.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use bankrun_core::corpus::{build_collection, validate_article, ArticleRecord, CorpusError};
use bankrun_core::digest::sha256_hex;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A line that could not be turned into a record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Malformed {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Jsonl,
    Csv,
}

impl Format {
    pub fn from_path(p: &Path) -> Format {
        match p.extension().and_then(|e| e.to_str()) {
            Some("csv") => Format::Csv,
            _ => Format::Jsonl,
        }
    }
}

/// Writes `bytes` to `path` so that readers see either the old file or the
/// complete new one.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    write_atomic_with(path, |w| w.write_all(bytes))
}

/// Like [`write_atomic`], streaming through `fill`. If `fill` fails the
/// temporary file is removed and `path` is left untouched.
pub fn write_atomic_with(path: &Path, fill: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut tmp = tempfile::Builder::new()
        .prefix(".partial-")
        .tempfile_in(&dir)
        .map_err(|e| Error::io(&dir, e))?;
    {
        let mut w = std::io::BufWriter::new(tmp.as_file_mut());
        fill(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn to_jsonl<T: Serialize>(items: &[T]) -> String {
    let mut s = String::new();
    for it in items {
        s.push_str(&serde_json::to_string(it).expect("records serialize"));
        s.push('\n');
    }
    s
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    write_atomic(path, to_jsonl(items).as_bytes())
}

pub fn to_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Data(format!("csv: {e}")))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Data(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    write_atomic(path, to_csv(rows)?.as_bytes())
}

fn open(path: &Path) -> Result<fs::File> {
    fs::File::open(path).map_err(|e| Error::io(path, e))
}

/// Every parseable record plus one entry per bad line. Blank lines are skipped.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<(Vec<T>, Vec<Malformed>)> {
    let reader = BufReader::new(open(path)?);
    let mut ok = Vec::new();
    let mut bad = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = match line {
            Ok(l) => l,
            Err(e) => {
                bad.push(Malformed { line: i + 1, reason: e.to_string() });
                continue;
            }
        };
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(&line) {
            Ok(v) => ok.push(v),
            Err(e) => bad.push(Malformed { line: i + 1, reason: e.to_string() }),
        }
    }
    Ok((ok, bad))
}

/// Reads a stage artifact, which must be free of bad lines.
pub fn read_jsonl_strict<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let (ok, bad) = read_jsonl(path)?;
    strict(path, ok, bad)
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<(Vec<T>, Vec<Malformed>)> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::Headers).from_reader(open(path)?);
    let mut ok = Vec::new();
    let mut bad = Vec::new();
    for (i, rec) in r.deserialize().enumerate() {
        match rec {
            Ok(v) => ok.push(v),
            Err(e) => {
                let line = e.position().map(|p| p.line() as usize).unwrap_or(i + 2);
                bad.push(Malformed { line, reason: e.to_string() });
            }
        }
    }
    Ok((ok, bad))
}

pub fn read_csv_strict<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let (ok, bad) = read_csv(path)?;
    strict(path, ok, bad)
}

/// Reads CSV or JSONL by extension.
pub fn read_table<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    match Format::from_path(path) {
        Format::Csv => read_csv_strict(path),
        Format::Jsonl => read_jsonl_strict(path),
    }
}

fn strict<T>(path: &Path, ok: Vec<T>, bad: Vec<Malformed>) -> Result<Vec<T>> {
    match bad.first() {
        None => Ok(ok),
        Some(m) => Err(Error::MalformedRecords {
            path: path.to_path_buf(),
            count: bad.len(),
            line: m.line,
            reason: m.reason.clone(),
        }),
    }
}

pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

/// Validated articles in collection order, with every rejected line
/// reported. Repeated ids abort the load.
#[derive(Debug, Clone, PartialEq)]
pub struct ArticleLoad {
    pub articles: Vec<ArticleRecord>,
    pub errors: Vec<Malformed>,
}

pub fn load_articles(path: &Path, format: Format) -> Result<ArticleLoad> {
    let (raw, mut errors): (Vec<(usize, ArticleRecord)>, Vec<Malformed>) = match format {
        Format::Jsonl => {
            let reader = BufReader::new(open(path)?);
            let mut ok = Vec::new();
            let mut bad = Vec::new();
            for (i, line) in reader.lines().enumerate() {
                match line {
                    Ok(l) if l.trim().is_empty() => {}
                    Ok(l) => match serde_json::from_str(&l) {
                        Ok(r) => ok.push((i + 1, r)),
                        Err(e) => bad.push(Malformed { line: i + 1, reason: e.to_string() }),
                    },
                    Err(e) => bad.push(Malformed { line: i + 1, reason: e.to_string() }),
                }
            }
            (ok, bad)
        }
        Format::Csv => {
            let mut r = csv::ReaderBuilder::new().trim(csv::Trim::Headers).from_reader(open(path)?);
            let mut ok = Vec::new();
            let mut bad = Vec::new();
            let mut iter = r.deserialize::<ArticleRecord>();
            loop {
                let line = iter.reader().position().line() as usize;
                let Some(rec) = iter.next() else { break };
                match rec {
                    Ok(v) => ok.push((line, v)),
                    Err(e) => bad.push(Malformed { line, reason: e.to_string() }),
                }
            }
            (ok, bad)
        }
    };
    let mut valid = Vec::with_capacity(raw.len());
    for (line, r) in raw {
        match validate_article(r) {
            Ok(v) => valid.push(v.into_inner()),
            Err(e) => errors.push(Malformed { line, reason: e.to_string() }),
        }
    }
    errors.sort_by_key(|m| m.line);
    let articles = build_collection(valid).map_err(|e| match e {
        CorpusError::DuplicateId(id) => Error::DuplicateId(id),
        other => Error::Corpus(other),
    })?;
    Ok(ArticleLoad { articles, errors })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn failed_fill_leaves_no_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.jsonl");
        let r = write_atomic_with(&p, |w| {
            w.write_all(b"half a reco")?;
            Err(std::io::Error::other("interrupted"))
        });
        assert!(r.is_err());
        assert!(!p.exists());
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
    }

    #[test]
    fn failed_fill_keeps_previous_version() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.txt");
        write_atomic(&p, b"old\n").unwrap();
        let _ = write_atomic_with(&p, |w| {
            w.write_all(b"new")?;
            Err(std::io::Error::other("interrupted"))
        });
        assert_eq!(fs::read(&p).unwrap(), b"old\n");
    }

    #[test]
    fn malformed_lines_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.jsonl");
        fs::write(&p, "{\"x\":1}\nnot json\n\n{\"x\":2}\n").unwrap();
        let (ok, bad): (Vec<serde_json::Value>, _) = read_jsonl(&p).unwrap();
        assert_eq!(ok.len(), 2);
        assert_eq!(bad.len(), 1);
        assert_eq!(bad[0].line, 2);
    }
}
