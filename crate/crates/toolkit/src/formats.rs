//! Versioned on-disk formats.
//!
//! Every JSON file is an object carrying `"schema": 1` and a `"kind"` tag
//! next to its payload fields. Keys are written in sorted order, so equal
//! values always serialize to equal bytes.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use code_rationales_core::model::{
    ContextCounts, Distribution, LookupModel, NgramConfig, NgramModel, VocabId, Vocabulary,
};
use code_rationales_core::tensor::{Aggregation, ConceptCell, ConceptPair, InterpretabilityTensor, TensorMeta};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub const SCHEMA: u64 = 1;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: malformed JSON: {source}")]
    Json { path: String, source: serde_json::Error },
    #[error("{path}: unsupported schema version {found} (this build reads schema {SCHEMA})")]
    Schema { path: String, found: String },
    #[error("{path}: expected a `{expected}` file, found `{found}`")]
    Kind { path: String, expected: String, found: String },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

impl FormatError {
    pub fn invalid(path: &Path, message: impl Into<String>) -> Self {
        FormatError::Invalid { path: path.display().to_string(), message: message.into() }
    }
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> FormatError + '_ {
    move |source| FormatError::Io { path: path.display().to_string(), source }
}

/// Serializes `value` as a tagged JSON document.
pub fn to_json<T: Serialize>(kind: &str, value: &T) -> Result<String, serde_json::Error> {
    let mut v = serde_json::to_value(value)?;
    if let Value::Object(map) = &mut v {
        map.insert("schema".into(), Value::from(SCHEMA));
        map.insert("kind".into(), Value::from(kind));
    }
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, kind: &str, value: &T) -> Result<(), FormatError> {
    let s = to_json(kind, value).map_err(|source| FormatError::Json { path: path.display().to_string(), source })?;
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(io(parent))?;
        }
    }
    fs::write(path, s).map_err(io(path))
}

/// Checks the envelope of a parsed document and strips it.
pub fn from_value<T: DeserializeOwned>(path: &Path, kind: &str, mut v: Value) -> Result<T, FormatError> {
    let p = path.display().to_string();
    let Value::Object(map) = &mut v else {
        return Err(FormatError::invalid(path, "top level is not a JSON object"));
    };
    match map.remove("schema") {
        Some(Value::Number(n)) if n.as_u64() == Some(SCHEMA) => {}
        Some(other) => return Err(FormatError::Schema { path: p, found: other.to_string() }),
        None => return Err(FormatError::Schema { path: p, found: "none".into() }),
    }
    match map.remove("kind") {
        Some(Value::String(k)) if k == kind => {}
        other => {
            let found = other.and_then(|v| v.as_str().map(str::to_string)).unwrap_or_else(|| "none".into());
            return Err(FormatError::Kind { path: p, expected: kind.into(), found });
        }
    }
    serde_json::from_value(v).map_err(|source| FormatError::Json { path: p, source })
}

pub fn read_value(path: &Path) -> Result<Value, FormatError> {
    let text = fs::read_to_string(path).map_err(io(path))?;
    serde_json::from_str(&text).map_err(|source| FormatError::Json { path: path.display().to_string(), source })
}

pub fn read_json<T: DeserializeOwned>(path: &Path, kind: &str) -> Result<T, FormatError> {
    from_value(path, kind, read_value(path)?)
}

/// Kind tag of a document without decoding its payload.
pub fn kind_of(path: &Path) -> Result<String, FormatError> {
    let v = read_value(path)?;
    Ok(v.get("kind").and_then(Value::as_str).unwrap_or_default().to_string())
}

pub const NGRAM_KIND: &str = "ngram-model";
pub const LOOKUP_KIND: &str = "lookup-model";
pub const TENSOR_KIND: &str = "tensor";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextRecord {
    pub context: Vec<u32>,
    pub total: u64,
    pub next: Vec<(u32, u64)>,
}

/// Count table of a masked n-gram model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NgramFile {
    pub order: usize,
    pub alpha: f64,
    pub dropout_rate: f64,
    pub seed: u64,
    pub samples: usize,
    pub append_eos: bool,
    pub vocab: Vec<String>,
    pub contexts: Vec<ContextRecord>,
}

impl NgramFile {
    pub fn from_model(model: &NgramModel) -> Self {
        let c = model.config();
        NgramFile {
            order: c.order,
            alpha: c.alpha,
            dropout_rate: c.dropout_rate,
            seed: c.seed,
            samples: c.samples,
            append_eos: c.append_eos,
            vocab: model.vocabulary().tokens().to_vec(),
            contexts: model
                .table()
                .iter()
                .map(|(ctx, counts)| ContextRecord {
                    context: ctx.iter().map(|v| v.0).collect(),
                    total: counts.total,
                    next: counts.next.iter().map(|(k, n)| (k.0, *n)).collect(),
                })
                .collect(),
        }
    }

    pub fn into_model(self, path: &Path) -> Result<NgramModel, FormatError> {
        let vocab = Vocabulary::from_tokens(self.vocab).ok_or_else(|| {
            FormatError::invalid(path, "vocabulary must start with the reserved tokens and be unique")
        })?;
        if self.order == 0 {
            return Err(FormatError::invalid(path, "order must be at least 1"));
        }
        let size = vocab.len() as u32;
        let mut table = BTreeMap::new();
        for rec in self.contexts {
            if rec.context.len() != self.order - 1 {
                return Err(FormatError::invalid(path, "context width does not match the order"));
            }
            if rec.context.iter().chain(rec.next.iter().map(|(k, _)| k)).any(|&id| id >= size) {
                return Err(FormatError::invalid(path, "token id outside the vocabulary"));
            }
            let next: BTreeMap<VocabId, u64> = rec.next.into_iter().map(|(k, n)| (VocabId(k), n)).collect();
            table.insert(rec.context.into_iter().map(VocabId).collect(), ContextCounts { total: rec.total, next });
        }
        let config = NgramConfig {
            order: self.order,
            dropout_rate: self.dropout_rate,
            alpha: self.alpha,
            seed: self.seed,
            samples: self.samples,
            append_eos: self.append_eos,
        };
        Ok(NgramModel::from_parts(config, vocab, table))
    }
}

pub fn write_ngram(path: &Path, model: &NgramModel) -> Result<(), FormatError> {
    write_json(path, NGRAM_KIND, &NgramFile::from_model(model))
}

pub fn read_ngram(path: &Path) -> Result<NgramModel, FormatError> {
    read_json::<NgramFile>(path, NGRAM_KIND)?.into_model(path)
}

/// Explicit distribution table keyed by canonical subset keys
/// (`"<target>|<pos>:<tok>,..."`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LookupFile {
    pub vocab_size: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tokens: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eos: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<Vec<f64>>,
    pub table: BTreeMap<String, Vec<f64>>,
}

impl LookupFile {
    pub fn from_model(model: &LookupModel) -> Self {
        use code_rationales_core::LanguageModel;
        LookupFile {
            vocab_size: model.vocab_size(),
            tokens: model.tokens().to_vec(),
            eos: model.eos_token().map(|v| v.0),
            default: model.default_distribution().map(|d| d.probabilities().to_vec()),
            table: model.entries().map(|(k, d)| (k.clone(), d.probabilities().to_vec())).collect(),
        }
    }

    pub fn into_model(self, path: &Path) -> Result<LookupModel, FormatError> {
        let bad = |e: code_rationales_core::ModelError| FormatError::invalid(path, e.to_string());
        let mut model = LookupModel::new(self.vocab_size);
        if !self.tokens.is_empty() {
            model = model.with_tokens(self.tokens).map_err(bad)?;
        }
        if let Some(e) = self.eos {
            model = model.with_eos(VocabId(e));
        }
        if let Some(d) = self.default {
            model.set_default(Distribution::new(d).map_err(bad)?).map_err(bad)?;
        }
        for (k, probs) in self.table {
            model.insert_key(k, Distribution::new(probs).map_err(bad)?).map_err(bad)?;
        }
        Ok(model)
    }
}

pub fn write_lookup(path: &Path, model: &LookupModel) -> Result<(), FormatError> {
    write_json(path, LOOKUP_KIND, &LookupFile::from_model(model))
}

pub fn read_lookup(path: &Path) -> Result<LookupModel, FormatError> {
    read_json::<LookupFile>(path, LOOKUP_KIND)?.into_model(path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axes {
    pub src: Vec<String>,
    pub tgt: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub src: String,
    pub tgt: String,
    pub value: f64,
    pub count: usize,
    pub raw: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorFileMeta {
    pub testbed: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trial: Option<u32>,
    pub g: Aggregation,
    pub snippet_count: usize,
}

/// Tensor and concept-matrix layout: axes plus sparse cells in `[tgt, src]`
/// order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorFile {
    pub taxonomy_id: String,
    pub axes: Axes,
    pub cells: Vec<CellRecord>,
    pub meta: TensorFileMeta,
}

pub fn cells_to_records(cells: &BTreeMap<ConceptPair, ConceptCell>) -> (Axes, Vec<CellRecord>) {
    let mut src: Vec<String> = cells.keys().map(|k| k.source.clone()).collect();
    src.sort();
    src.dedup();
    let mut tgt: Vec<String> = cells.keys().map(|k| k.target.clone()).collect();
    tgt.dedup();
    let records = cells
        .iter()
        .map(|(k, c)| CellRecord {
            src: k.source.clone(),
            tgt: k.target.clone(),
            value: c.value,
            count: c.count,
            raw: c.raw.clone(),
        })
        .collect();
    (Axes { src, tgt }, records)
}

pub fn records_to_cells(
    path: &Path,
    records: Vec<CellRecord>,
) -> Result<BTreeMap<ConceptPair, ConceptCell>, FormatError> {
    let mut cells = BTreeMap::new();
    for r in records {
        if r.count != r.raw.len() {
            return Err(FormatError::invalid(
                path,
                format!("cell {}/{} count disagrees with its raw list", r.tgt, r.src),
            ));
        }
        let pair = ConceptPair::new(r.tgt, r.src);
        if cells.insert(pair.clone(), ConceptCell { value: r.value, count: r.count, raw: r.raw }).is_some() {
            return Err(FormatError::invalid(path, format!("duplicate cell {}/{}", pair.target, pair.source)));
        }
    }
    Ok(cells)
}

impl TensorFile {
    pub fn from_tensor(t: &InterpretabilityTensor) -> Self {
        let (axes, cells) = cells_to_records(&t.cells);
        TensorFile {
            taxonomy_id: t.taxonomy_id.clone(),
            axes,
            cells,
            meta: TensorFileMeta {
                testbed: t.meta.testbed.clone(),
                trial: t.meta.trial,
                g: t.aggregation,
                snippet_count: t.meta.snippet_count,
            },
        }
    }

    pub fn into_tensor(self, path: &Path) -> Result<InterpretabilityTensor, FormatError> {
        Ok(InterpretabilityTensor {
            taxonomy_id: self.taxonomy_id,
            aggregation: self.meta.g,
            cells: records_to_cells(path, self.cells)?,
            meta: TensorMeta {
                testbed: self.meta.testbed,
                trial: self.meta.trial,
                snippet_count: self.meta.snippet_count,
            },
        })
    }
}

pub fn write_tensor(path: &Path, t: &InterpretabilityTensor) -> Result<(), FormatError> {
    write_json(path, TENSOR_KIND, &TensorFile::from_tensor(t))
}

pub fn read_tensor(path: &Path) -> Result<InterpretabilityTensor, FormatError> {
    read_json::<TensorFile>(path, TENSOR_KIND)?.into_tensor(path)
}

/// Formats a probability for CSV output.
pub fn number(v: f64) -> String {
    format!("{v}")
}

/// Dense `[tgt x src]` grid as CSV; empty cells stay empty.
pub fn grid_csv(targets: &[String], sources: &[String], grid: &[Vec<Option<f64>>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["tgt\\src".to_string()];
    header.extend(sources.iter().cloned());
    w.write_record(&header).expect("in-memory write");
    for (t, row) in targets.iter().zip(grid) {
        let mut rec = vec![t.clone()];
        rec.extend(row.iter().map(|v| v.map(number).unwrap_or_default()));
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
}

/// Rows of string fields as CSV.
pub fn table_csv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
}

pub fn write_text(path: &Path, text: &str) -> Result<(), FormatError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(io(parent))?;
        }
    }
    fs::write(path, text).map_err(io(path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use code_rationales_core::model::ContextSubset;
    use code_rationales_core::LanguageModel;

    #[test]
    fn envelope_round_trip_and_rejections() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.json");
        write_json(&p, "thing", &serde_json::json!({"a": 1})).unwrap();
        let v: serde_json::Value = read_json(&p, "thing").unwrap();
        assert_eq!(v, serde_json::json!({"a": 1}));
        assert!(matches!(read_json::<Value>(&p, "other"), Err(FormatError::Kind { .. })));

        fs::write(&p, r#"{"schema": 2, "kind": "thing"}"#).unwrap();
        let err = read_json::<Value>(&p, "thing").unwrap_err();
        assert!(err.to_string().contains("unsupported schema version 2"), "{err}");
    }

    #[test]
    fn ngram_file_round_trip() {
        let corpus = vec![vec!["a", "b", "a", "b"]];
        let model = NgramModel::train(&corpus, NgramConfig { order: 2, ..Default::default() }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        write_ngram(&p, &model).unwrap();
        let back = read_ngram(&p).unwrap();
        assert_eq!(back, model);
        let s = ContextSubset::empty(1);
        assert_eq!(back.evaluate(&s).unwrap(), model.evaluate(&s).unwrap());
    }

    #[test]
    fn lookup_file_round_trip() {
        let mut m = LookupModel::uniform(3).unwrap();
        m.insert_key("1|0:2".into(), Distribution::new(vec![0.1, 0.2, 0.7]).unwrap()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("l.json");
        write_lookup(&p, &m).unwrap();
        assert_eq!(LookupFile::from_model(&read_lookup(&p).unwrap()), LookupFile::from_model(&m));
    }

    #[test]
    fn grid_csv_layout() {
        let csv = grid_csv(&["a".into()], &["x".into(), "y".into()], &[vec![Some(0.5), None]]);
        assert_eq!(csv, "tgt\\src,x,y\na,0.5,\n");
    }
}
