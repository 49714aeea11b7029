//! Aligned offensive lexicon, word embeddings, and the offensive-lexicon
//! similarity between two languages.
//!
//! The similarity is the mean cosine between the embeddings of aligned
//! lemmas. It keeps the "distance" name used in the literature even though
//! higher values mean closer vocabularies.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;

/// `concept id -> (language -> lemma)`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignedLexicon {
    concepts: BTreeMap<String, BTreeMap<String, String>>,
}

impl AlignedLexicon {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a lemma. A second, different lemma for the same concept and
    /// language is rejected.
    pub fn insert(
        &mut self,
        concept: &str,
        language: &str,
        lemma: &str,
    ) -> std::result::Result<(), String> {
        let langs = self.concepts.entry(concept.to_string()).or_default();
        match langs.get(language) {
            Some(existing) if existing != lemma => Err(format!(
                "concept `{concept}` already has lemma `{existing}` for `{language}`"
            )),
            Some(_) => Ok(()),
            None => {
                langs.insert(language.to_string(), lemma.to_string());
                Ok(())
            }
        }
    }

    pub fn lemma(&self, concept: &str, language: &str) -> Option<&str> {
        self.concepts
            .get(concept)?
            .get(language)
            .map(String::as_str)
    }

    pub fn concepts(&self) -> impl Iterator<Item = (&String, &BTreeMap<String, String>)> {
        self.concepts.iter()
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    pub fn languages(&self) -> BTreeSet<&str> {
        self.concepts
            .values()
            .flat_map(|m| m.keys().map(String::as_str))
            .collect()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let table = io::read_delimited(path)?;
        let c_concept = table.column("concept_id")?;
        let c_lang = table.column("language")?;
        let c_lemma = table.column("lemma")?;
        let mut lex = AlignedLexicon::new();
        for (line, row) in &table.rows {
            let get = |c: usize| row.get(c).map(String::as_str).unwrap_or("");
            let (concept, lang, lemma) = (get(c_concept), get(c_lang), get(c_lemma));
            if concept.is_empty() || lang.is_empty() || lemma.is_empty() {
                return Err(Error::record(
                    path,
                    *line,
                    "concept_id, language and lemma are required",
                ));
            }
            lex.insert(concept, lang, lemma)
                .map_err(|m| Error::record(path, *line, m))?;
        }
        Ok(lex)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingTable {
    pub language: String,
    pub dim: usize,
    vectors: BTreeMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(language: impl Into<String>, dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        EmbeddingTable {
            language: language.into(),
            dim,
            vectors: BTreeMap::new(),
        }
    }

    pub fn insert(
        &mut self,
        word: impl Into<String>,
        vector: Vec<f64>,
    ) -> std::result::Result<(), String> {
        if vector.len() != self.dim {
            return Err(format!(
                "vector has {} components, expected {}",
                vector.len(),
                self.dim
            ));
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err("vector has a non-finite component".into());
        }
        self.vectors.entry(word.into()).or_insert(vector);
        Ok(())
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.vectors.get(word).map(Vec::as_slice)
    }

    /// Exact lookup, then lowercase.
    pub fn lookup(&self, word: &str) -> Option<&[f64]> {
        self.get(word).or_else(|| self.get(&word.to_lowercase()))
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Vec<f64>)> {
        self.vectors.iter()
    }

    /// Reads the plain word-vector text format: an optional `count dim`
    /// header, then `word v1 ... vd` per line.
    pub fn load(path: &Path, language: &str) -> Result<Self> {
        let text = io::read_to_string(path)?;
        parse_word_vectors(path, &text)?.into_table(language, path)
    }
}

pub(crate) struct RawVectors {
    pub dim: Option<usize>,
    pub rows: Vec<(usize, String, Vec<f64>)>,
}

impl RawVectors {
    fn into_table(self, language: &str, path: &Path) -> Result<EmbeddingTable> {
        let dim = self
            .dim
            .or_else(|| self.rows.first().map(|r| r.2.len()))
            .ok_or_else(|| Error::format(path, "no vectors"))?;
        if dim == 0 {
            return Err(Error::format(path, "zero-dimensional vectors"));
        }
        let mut table = EmbeddingTable::new(language, dim);
        for (line, word, v) in self.rows {
            table
                .insert(word, v)
                .map_err(|m| Error::record(path, line, m))?;
        }
        Ok(table)
    }
}

pub(crate) fn parse_word_vectors(path: &Path, text: &str) -> Result<RawVectors> {
    let mut dim = None;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let mut parts = line.split_whitespace();
        let Some(word) = parts.next() else { continue };
        let rest: Vec<&str> = parts.collect();
        if rows.is_empty() && dim.is_none() && rest.len() == 1 {
            if let (Ok(_count), Ok(d)) = (word.parse::<usize>(), rest[0].parse::<usize>()) {
                dim = Some(d);
                continue;
            }
        }
        let v = rest
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::record(path, line_no, format!("bad component: {e}")))?;
        rows.push((line_no, word.to_string(), v));
    }
    Ok(RawVectors { dim, rows })
}

/// Cosine similarity; `None` if either vector has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    debug_assert_eq!(a.len(), b.len());
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some((dot / (na * nb).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OffDist {
    /// Mean cosine over covered concepts; `None` when nothing is covered.
    pub value: Option<f64>,
    /// Number of aligned concepts with vectors on both sides.
    pub coverage: usize,
    /// Concepts dropped because one of the vectors had zero norm.
    pub zero_vectors: usize,
}

/// Mean cosine between aligned lemma embeddings of the two tables'
/// languages, over concepts present in both tables. Concepts are visited in
/// sorted id order.
pub fn offensive_distance(
    lexicon: &AlignedLexicon,
    emb_tsf: &EmbeddingTable,
    emb_tgt: &EmbeddingTable,
) -> Result<OffDist> {
    if emb_tsf.dim != emb_tgt.dim {
        return Err(Error::Config(format!(
            "embedding dimensions differ: {} has {}, {} has {}",
            emb_tsf.language, emb_tsf.dim, emb_tgt.language, emb_tgt.dim
        )));
    }
    let mut sum = 0.0;
    let mut coverage = 0;
    let mut zero_vectors = 0;
    for (_, langs) in lexicon.concepts() {
        let (Some(w_tsf), Some(w_tgt)) =
            (langs.get(&emb_tsf.language), langs.get(&emb_tgt.language))
        else {
            continue;
        };
        let (Some(v_tsf), Some(v_tgt)) = (emb_tsf.lookup(w_tsf), emb_tgt.lookup(w_tgt)) else {
            continue;
        };
        match cosine(v_tsf, v_tgt) {
            Some(c) => {
                sum += c;
                coverage += 1;
            }
            None => zero_vectors += 1,
        }
    }
    Ok(OffDist {
        value: (coverage > 0).then(|| sum / coverage as f64),
        coverage,
        zero_vectors,
    })
}
