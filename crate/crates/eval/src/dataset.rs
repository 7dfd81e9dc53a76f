//! Labeled claim datasets.
//!
//! Three layouts are understood: the LIAR TSV (no header; id, label,
//! statement, then metadata columns), PolitiFact-style JSON (an array of
//! objects or one object per line), and a generic CSV with a header naming
//! `text` and `label` columns and optionally `id`. Source labels are mapped
//! to `Real`/`Fake` through an explicit [`LabelMap`].

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Gold {
    Real,
    Fake,
}

impl Gold {
    pub fn flipped(self) -> Self {
        match self {
            Self::Real => Self::Fake,
            Self::Fake => Self::Real,
        }
    }
}

impl fmt::Display for Gold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Real => "Real",
            Self::Fake => "Fake",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledClaim {
    pub id: String,
    pub text: String,
    pub gold: Gold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetFormat {
    LiarTsv,
    PolitifactJson,
    GenericCsv,
}

/// Case-insensitive source label → gold label table.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabelMap(BTreeMap<String, Gold>);

impl LabelMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, source: &str, gold: Gold) -> Self {
        self.0.insert(source.trim().to_lowercase(), gold);
        self
    }

    /// `true`/`real` → Real, `false`/`fake` → Fake.
    pub fn binary() -> Self {
        Self::new()
            .with("true", Gold::Real)
            .with("real", Gold::Real)
            .with("false", Gold::Fake)
            .with("fake", Gold::Fake)
    }

    pub fn get(&self, source: &str) -> Option<Gold> {
        self.0.get(&source.trim().to_lowercase()).copied()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Parses `true=real,mostly-true=real,false=fake`.
impl FromStr for LabelMap {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut map = Self::new();
        for pair in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (source, gold) = pair
                .split_once('=')
                .ok_or_else(|| format!("expected source=real|fake, got {pair:?}"))?;
            let gold = match gold.trim().to_lowercase().as_str() {
                "real" => Gold::Real,
                "fake" => Gold::Fake,
                other => return Err(format!("gold label must be real or fake, got {other:?}")),
            };
            map = map.with(source, gold);
        }
        Ok(map)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpectedCounts {
    pub real: usize,
    pub fake: usize,
}

#[derive(Debug, Clone)]
pub struct LoadOptions {
    pub label_map: LabelMap,
    /// Unmappable labels are an error rather than a skipped row.
    pub strict: bool,
    pub expected: Option<ExpectedCounts>,
}

impl LoadOptions {
    pub fn new(label_map: LabelMap) -> Self {
        Self {
            label_map,
            strict: false,
            expected: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LoadReport {
    pub rows: usize,
    pub real: usize,
    pub fake: usize,
    pub skipped_malformed: usize,
    pub skipped_unmapped: usize,
    /// Unmapped source labels and how often each occurred.
    pub unmapped_labels: BTreeMap<String, usize>,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub claims: Vec<LabeledClaim>,
    pub report: LoadReport,
}

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("{path}: not a claim list: {message}")]
    Format { path: PathBuf, message: String },
    #[error("a label map is required for {0:?}")]
    NoLabelMap(DatasetFormat),
    #[error("row {row}: label {label:?} is not in the label map")]
    UnmappedLabel { row: usize, label: String },
    #[error("expected {expected_real} real / {expected_fake} fake claims, loaded {real} / {fake}")]
    CountMismatch {
        expected_real: usize,
        expected_fake: usize,
        real: usize,
        fake: usize,
    },
}

/// Raw row before label mapping; `None` fields mark a malformed row.
struct RawRow {
    id: Option<String>,
    text: Option<String>,
    label: Option<String>,
}

pub fn load_dataset(path: &Path, format: DatasetFormat, options: &LoadOptions) -> Result<Dataset, DatasetError> {
    if options.label_map.is_empty() {
        return Err(DatasetError::NoLabelMap(format));
    }
    let text = std::fs::read_to_string(path).map_err(|e| DatasetError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let rows = match format {
        DatasetFormat::LiarTsv => liar_rows(&text),
        DatasetFormat::GenericCsv => csv_rows(&text).map_err(|message| DatasetError::Format {
            path: path.to_path_buf(),
            message,
        })?,
        DatasetFormat::PolitifactJson => json_rows(&text).map_err(|message| DatasetError::Format {
            path: path.to_path_buf(),
            message,
        })?,
    };
    map_rows(rows, options)
}

fn map_rows(rows: Vec<RawRow>, options: &LoadOptions) -> Result<Dataset, DatasetError> {
    let mut report = LoadReport::default();
    let mut claims = Vec::new();
    for (idx, row) in rows.into_iter().enumerate() {
        report.rows += 1;
        let row_no = idx + 1;
        let (Some(text), Some(label)) = (row.text.filter(|t| !t.trim().is_empty()), row.label) else {
            report.skipped_malformed += 1;
            continue;
        };
        let Some(gold) = options.label_map.get(&label) else {
            if options.strict {
                return Err(DatasetError::UnmappedLabel { row: row_no, label });
            }
            report.skipped_unmapped += 1;
            *report.unmapped_labels.entry(label.trim().to_lowercase()).or_default() += 1;
            continue;
        };
        match gold {
            Gold::Real => report.real += 1,
            Gold::Fake => report.fake += 1,
        }
        claims.push(LabeledClaim {
            id: row.id.filter(|i| !i.trim().is_empty()).unwrap_or_else(|| format!("row-{row_no}")),
            text: text.trim().to_string(),
            gold,
        });
    }
    if let Some(expected) = options.expected {
        if expected.real != report.real || expected.fake != report.fake {
            return Err(DatasetError::CountMismatch {
                expected_real: expected.real,
                expected_fake: expected.fake,
                real: report.real,
                fake: report.fake,
            });
        }
    }
    Ok(Dataset { claims, report })
}

/// LIAR statements contain unbalanced quotes, so rows are split on tabs
/// without any quoting rules.
fn liar_rows(text: &str) -> Vec<RawRow> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() < 3 {
                return RawRow {
                    id: None,
                    text: None,
                    label: None,
                };
            }
            RawRow {
                id: Some(cols[0].trim().to_string()),
                label: Some(cols[1].trim().to_string()),
                text: Some(cols[2].to_string()),
            }
        })
        .collect()
}

fn csv_rows(text: &str) -> Result<Vec<RawRow>, String> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| e.to_string())?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim().eq_ignore_ascii_case(name));
    let text_col = col("text").ok_or("missing `text` column")?;
    let label_col = col("label").ok_or("missing `label` column")?;
    let id_col = col("id");
    let mut rows = Vec::new();
    for record in reader.records() {
        let Ok(record) = record else {
            rows.push(RawRow {
                id: None,
                text: None,
                label: None,
            });
            continue;
        };
        rows.push(RawRow {
            id: id_col.and_then(|i| record.get(i)).map(str::to_string),
            text: record.get(text_col).map(str::to_string),
            label: record.get(label_col).map(str::to_string),
        });
    }
    Ok(rows)
}

const TEXT_FIELDS: [&str; 4] = ["text", "claim", "statement", "title"];
const LABEL_FIELDS: [&str; 3] = ["label", "verdict", "truth"];

fn json_rows(text: &str) -> Result<Vec<RawRow>, String> {
    let values: Vec<Value> = match serde_json::from_str::<Value>(text) {
        Ok(Value::Array(items)) => items,
        Ok(Value::Object(obj)) => match obj.get("claims").or_else(|| obj.get("items")) {
            Some(Value::Array(items)) => items.clone(),
            _ => vec![Value::Object(obj)],
        },
        Ok(_) => return Err("expected an array of objects".into()),
        Err(_) => text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).unwrap_or(Value::Null))
            .collect(),
    };
    let scalar = |v: &Value| match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        _ => None,
    };
    Ok(values
        .iter()
        .map(|v| {
            let field = |names: &[&str]| names.iter().find_map(|n| v.get(*n).and_then(scalar));
            RawRow {
                id: field(&["id"]),
                text: field(&TEXT_FIELDS),
                label: field(&LABEL_FIELDS),
            }
        })
        .collect())
}

/// Writes claims in the generic CSV layout.
pub fn write_generic_csv(path: &Path, claims: &[LabeledClaim]) -> Result<(), DatasetError> {
    let io = |e: csv::Error| DatasetError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(["id", "text", "label"]).map_err(io)?;
    for c in claims {
        let label = match c.gold {
            Gold::Real => "real",
            Gold::Fake => "fake",
        };
        w.write_record([c.id.as_str(), c.text.as_str(), label]).map_err(io)?;
    }
    w.flush().map_err(|e| DatasetError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(text: &str, format: DatasetFormat, options: &LoadOptions) -> Result<Dataset, DatasetError> {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data");
        std::fs::write(&path, text).unwrap();
        load_dataset(&path, format, options)
    }

    #[test]
    fn generic_csv_direct_map() {
        let text = "id,text,label\n1,Sky is blue,true\n2,\"Moon is cheese, says man\",false\n3,Pigs fly,false\n";
        let ds = load(text, DatasetFormat::GenericCsv, &LoadOptions::new(LabelMap::binary())).unwrap();
        let golds: Vec<Gold> = ds.claims.iter().map(|c| c.gold).collect();
        assert_eq!(golds, vec![Gold::Real, Gold::Fake, Gold::Fake]);
        assert_eq!(ds.claims[1].text, "Moon is cheese, says man");
        assert_eq!((ds.report.real, ds.report.fake), (1, 2));
    }

    #[test]
    fn liar_requires_a_map_and_counts_skips() {
        let text = "1.json\ttrue\tSays the budget doubled.\tbudget\tx\n\
                    2.json\tpants-fire\tSays \"aliens\" voted.\tx\n\
                    3.json\thalf-true\tSays things.\n\
                    broken line without tabs\n";
        assert!(matches!(
            load(text, DatasetFormat::LiarTsv, &LoadOptions::new(LabelMap::new())),
            Err(DatasetError::NoLabelMap(_))
        ));
        let map: LabelMap = "true=real,pants-fire=fake".parse().unwrap();
        let ds = load(text, DatasetFormat::LiarTsv, &LoadOptions::new(map.clone())).unwrap();
        assert_eq!(ds.claims.len(), 2);
        assert_eq!(ds.claims[1].text, "Says \"aliens\" voted.");
        assert_eq!(ds.report.skipped_unmapped, 1);
        assert_eq!(ds.report.skipped_malformed, 1);
        assert_eq!(ds.report.unmapped_labels["half-true"], 1);

        let strict = LoadOptions {
            strict: true,
            ..LoadOptions::new(map)
        };
        assert!(matches!(
            load(text, DatasetFormat::LiarTsv, &strict),
            Err(DatasetError::UnmappedLabel { row: 3, .. })
        ));
    }

    #[test]
    fn expected_counts_are_enforced() {
        let text = "id,text,label\n1,a,true\n2,b,false\n";
        let mut opts = LoadOptions::new(LabelMap::binary());
        opts.expected = Some(ExpectedCounts { real: 1, fake: 1 });
        assert!(load(text, DatasetFormat::GenericCsv, &opts).is_ok());
        opts.expected = Some(ExpectedCounts { real: 399, fake: 345 });
        assert!(matches!(
            load(text, DatasetFormat::GenericCsv, &opts),
            Err(DatasetError::CountMismatch { real: 1, fake: 1, .. })
        ));
    }

    #[test]
    fn politifact_json_array_and_lines() {
        let map = LabelMap::binary();
        let arr = r#"[{"id": "p1", "claim": "A", "label": "real"}, {"statement": "B", "verdict": "fake"}, {"label": "real"}]"#;
        let ds = load(arr, DatasetFormat::PolitifactJson, &LoadOptions::new(map.clone())).unwrap();
        assert_eq!(ds.claims.len(), 2);
        assert_eq!(ds.claims[0].id, "p1");
        assert_eq!(ds.claims[1].id, "row-2");
        assert_eq!(ds.report.skipped_malformed, 1);
        let lines = "{\"text\": \"A\", \"label\": \"fake\"}\nnot json\n";
        let ds = load(lines, DatasetFormat::PolitifactJson, &LoadOptions::new(map)).unwrap();
        assert_eq!((ds.claims.len(), ds.report.skipped_malformed), (1, 1));
    }

    #[test]
    fn label_map_parsing() {
        assert!("true=maybe".parse::<LabelMap>().is_err());
        assert!("nonsense".parse::<LabelMap>().is_err());
        let m: LabelMap = " TRUE = Real , barely-true=fake".parse().unwrap();
        assert_eq!(m.get("true"), Some(Gold::Real));
        assert_eq!(m.get("Barely-True"), Some(Gold::Fake));
    }
}
