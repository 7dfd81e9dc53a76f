//! Line-delimited JSON transcripts shared by the LLM and search replay providers.
//!
//! One record per line: `{request_key, kind, rendered_prompt, raw_response}`.
//! Search records use kind `WebSearch`, the query text as `rendered_prompt`,
//! and a JSON array of results as `raw_response`.

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub request_key: String,
    pub kind: String,
    pub rendered_prompt: String,
    pub raw_response: String,
}

#[derive(Debug, thiserror::Error)]
pub enum FixtureError {
    #[error("cannot read fixtures at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: malformed transcript record: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

/// Content hash of a request kind and its canonical inputs.
///
/// Inputs are length-prefixed so that no two distinct input maps can produce
/// the same byte stream.
pub fn request_key(kind: &str, inputs: &BTreeMap<String, String>) -> String {
    let mut hasher = Sha256::new();
    let mut feed = |s: &str| {
        hasher.update((s.len() as u64).to_le_bytes());
        hasher.update(s.as_bytes());
    };
    feed(kind);
    for (name, value) in inputs {
        feed(name);
        feed(value);
    }
    hex::encode(hasher.finalize())
}

/// Immutable index of recorded transcripts.
#[derive(Debug, Default, Clone)]
pub struct FixtureStore {
    by_key: HashMap<String, Transcript>,
}

impl FixtureStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_records(records: impl IntoIterator<Item = Transcript>) -> Self {
        let mut store = Self::new();
        for r in records {
            store.insert(r);
        }
        store
    }

    /// Later records win over earlier ones with the same key.
    pub fn insert(&mut self, record: Transcript) {
        self.by_key.insert(record.request_key.clone(), record);
    }

    /// Loads a single `.jsonl` file, or every `.jsonl` file in a directory
    /// (sorted by file name).
    pub fn load(path: impl AsRef<Path>) -> Result<Self, FixtureError> {
        let path = path.as_ref();
        let mut store = Self::new();
        if path.is_dir() {
            let mut files: Vec<PathBuf> = std::fs::read_dir(path)
                .map_err(|source| FixtureError::Io {
                    path: path.to_path_buf(),
                    source,
                })?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|ext| ext == "jsonl"))
                .collect();
            files.sort();
            for f in files {
                store.load_file(&f)?;
            }
        } else {
            store.load_file(path)?;
        }
        Ok(store)
    }

    fn load_file(&mut self, path: &Path) -> Result<(), FixtureError> {
        let file = File::open(path).map_err(|source| FixtureError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        for (idx, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|source| FixtureError::Io {
                path: path.to_path_buf(),
                source,
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let record: Transcript = serde_json::from_str(&line).map_err(|e| FixtureError::Malformed {
                path: path.to_path_buf(),
                line: idx + 1,
                message: e.to_string(),
            })?;
            self.insert(record);
        }
        Ok(())
    }

    pub fn get(&self, request_key: &str) -> Option<&Transcript> {
        self.by_key.get(request_key)
    }

    pub fn records(&self) -> impl Iterator<Item = &Transcript> {
        self.by_key.values()
    }

    pub fn len(&self) -> usize {
        self.by_key.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_key.is_empty()
    }
}

/// Append-only transcript sink. Writes are serialized through a mutex and
/// flushed per record so a crashed run still leaves a usable fixture file.
pub struct TranscriptWriter {
    out: Mutex<BufWriter<File>>,
}

impl TranscriptWriter {
    pub fn create(path: impl AsRef<Path>) -> std::io::Result<Self> {
        let path = path.as_ref();
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            out: Mutex::new(BufWriter::new(file)),
        })
    }

    pub fn append(&self, record: &Transcript) -> std::io::Result<()> {
        let line = serde_json::to_string(record)?;
        let mut out = self.out.lock();
        out.write_all(line.as_bytes())?;
        out.write_all(b"\n")?;
        out.flush()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inputs(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn key_is_stable_and_input_sensitive() {
        let a = request_key("Decision", &inputs(&[("claim", "x"), ("analyses_text", "y")]));
        let b = request_key("Decision", &inputs(&[("analyses_text", "y"), ("claim", "x")]));
        assert_eq!(a, b);
        assert_ne!(a, request_key("Explanation", &inputs(&[("claim", "x"), ("analyses_text", "y")])));
        assert_ne!(a, request_key("Decision", &inputs(&[("claim", "x "), ("analyses_text", "y")])));
        // slot boundaries cannot be shifted
        assert_ne!(
            request_key("K", &inputs(&[("a", "bc")])),
            request_key("K", &inputs(&[("ab", "c")]))
        );
    }

    #[test]
    fn writer_output_loads_back() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("llm.jsonl");
        let writer = TranscriptWriter::create(&path).unwrap();
        let rec = Transcript {
            request_key: "k1".into(),
            kind: "QueryGeneration".into(),
            rendered_prompt: "p\nwith newline".into(),
            raw_response: "{\"query\":\"q\"}".into(),
        };
        writer.append(&rec).unwrap();
        drop(writer);
        let store = FixtureStore::load(dir.path()).unwrap();
        assert_eq!(store.get("k1"), Some(&rec));
    }

    #[test]
    fn malformed_line_reports_position() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(&path, "\n{not json}\n").unwrap();
        match FixtureStore::load(&path) {
            Err(FixtureError::Malformed { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }
}
