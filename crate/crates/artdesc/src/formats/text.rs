//! Line-oriented text formats: JSON lines, gazetteers, word lists,
//! knowledge articles, raw corpora and vocabularies.

use std::fs;
use std::path::Path;

use artdesc_core::corpus::{Attributes, EntityType, Gazetteer, Vocab};
use artdesc_core::retriever::KnowledgeArticle;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{AppError, AppResult};
use crate::formats::binary::write_file;
use crate::formats::Stamp;

pub fn read_text(path: &Path) -> AppResult<String> {
    fs::read_to_string(path).map_err(|e| AppError::io(path, e))
}

/// One JSON value per non-blank line.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> AppResult<Vec<T>> {
    parse_jsonl(&read_text(path)?, path)
}

pub fn parse_jsonl<T: DeserializeOwned>(text: &str, path: &Path) -> AppResult<Vec<T>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map_err(|e| AppError::format(path, format!("line {}: {e}", i + 1)))
        })
        .collect()
}

pub fn to_jsonl<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for it in items {
        out.push_str(&serde_json::to_string(it).expect("serializable"));
        out.push('\n');
    }
    out
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> AppResult<()> {
    write_file(path, to_jsonl(items).as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> AppResult<T> {
    serde_json::from_str(&read_text(path)?).map_err(|e| AppError::format(path, e.to_string()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> AppResult<()> {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    write_file(path, s.as_bytes())
}

/// `surface<TAB>type` per line; blank lines and `#` comments are skipped.
pub fn parse_gazetteer(text: &str, path: &Path) -> AppResult<Gazetteer> {
    let mut g = Gazetteer::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let (surface, kind) = line.split_once('\t').ok_or_else(|| {
            AppError::format(path, format!("line {}: expected surface<TAB>type", i + 1))
        })?;
        let kind = EntityType::parse(kind.trim()).ok_or_else(|| {
            AppError::format(
                path,
                format!("line {}: unknown entity type {:?}", i + 1, kind.trim()),
            )
        })?;
        g.insert(surface.trim(), kind);
    }
    Ok(g)
}

pub fn load_gazetteer(path: &Path) -> AppResult<Gazetteer> {
    parse_gazetteer(&read_text(path)?, path)
}

/// One entry per line; blank lines and `#` comments are skipped.
pub fn parse_word_list(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect()
}

pub fn load_word_list(path: &Path) -> AppResult<Vec<String>> {
    Ok(parse_word_list(&read_text(path)?))
}

/// Articles from a `.jsonl` file of `{id, title, body}` records, a `.txt`
/// file (one article named by the file stem), or a directory holding such
/// files, read in file-name order.
pub fn load_articles(path: &Path) -> AppResult<Vec<KnowledgeArticle>> {
    if path.is_dir() {
        let mut entries: Vec<_> = fs::read_dir(path)
            .map_err(|e| AppError::io(path, e))?
            .map(|e| e.map(|e| e.path()).map_err(|err| AppError::io(path, err)))
            .collect::<AppResult<_>>()?;
        entries.sort();
        let mut out = Vec::new();
        for p in entries.iter().filter(|p| p.is_file()) {
            match p.extension().and_then(|e| e.to_str()) {
                Some("jsonl") | Some("txt") => out.extend(load_articles(p)?),
                _ => log::debug!("skipping {}", p.display()),
            }
        }
        return Ok(out);
    }
    match path.extension().and_then(|e| e.to_str()) {
        Some("jsonl") => read_jsonl(path),
        _ => {
            let id = path
                .file_stem()
                .and_then(|s| s.to_str())
                .ok_or_else(|| AppError::format(path, "article file name is not UTF-8"))?;
            Ok(vec![KnowledgeArticle::new(id, "", &read_text(path)?)])
        }
    }
}

/// A vocabulary with the stamp of the run that built it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabFile {
    #[serde(flatten)]
    pub stamp: Stamp,
    pub tokens: Vocab,
}

/// A pre-annotated entity mention of a raw corpus sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawEntity {
    pub value: String,
    #[serde(rename = "type")]
    pub kind: EntityType,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawSentence {
    pub text: String,
    /// Absent for unlabeled sentences.
    #[serde(default)]
    pub topic: Option<String>,
    /// Absent when the entities should be found by the tagger.
    #[serde(default)]
    pub entities: Option<Vec<RawEntity>>,
}

/// One line of a raw corpus file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawRecord {
    pub id: String,
    #[serde(default)]
    pub sentences: Vec<RawSentence>,
    #[serde(default)]
    pub attributes: Attributes,
    #[serde(default)]
    pub objects: Vec<String>,
    #[serde(default)]
    pub reference: String,
}

/// Attribute and object metadata of a painting outside the corpus.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaintingMeta {
    #[serde(default)]
    pub id: String,
    #[serde(default)]
    pub attributes: Attributes,
    #[serde(default)]
    pub objects: Vec<String>,
    /// Only used as the knowledge source in oracle mode.
    #[serde(default)]
    pub reference: String,
}
