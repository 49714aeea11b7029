//! Precomputed language-pair tables (typological and pragmatic distances)
//! and learned language-vector tables.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::lexicon::{cosine, parse_word_vectors};
use crate::io;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceKind {
    Genetic,
    Syntactic,
    Featural,
    Phonological,
    Inventory,
    Geographic,
    LcrNoun,
    LcrVerb,
    Esd,
    Ltq,
}

impl DistanceKind {
    pub const ALL: [DistanceKind; 10] = [
        DistanceKind::Genetic,
        DistanceKind::Syntactic,
        DistanceKind::Featural,
        DistanceKind::Phonological,
        DistanceKind::Inventory,
        DistanceKind::Geographic,
        DistanceKind::LcrNoun,
        DistanceKind::LcrVerb,
        DistanceKind::Esd,
        DistanceKind::Ltq,
    ];

    /// Feature name; identical to the `kind` column value.
    pub fn name(self) -> &'static str {
        match self {
            DistanceKind::Genetic => "genetic",
            DistanceKind::Syntactic => "syntactic",
            DistanceKind::Featural => "featural",
            DistanceKind::Phonological => "phonological",
            DistanceKind::Inventory => "inventory",
            DistanceKind::Geographic => "geographic",
            DistanceKind::LcrNoun => "lcr_noun",
            DistanceKind::LcrVerb => "lcr_verb",
            DistanceKind::Esd => "esd",
            DistanceKind::Ltq => "ltq",
        }
    }
}

impl fmt::Display for DistanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DistanceKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        DistanceKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown distance kind `{s}`"))
    }
}

/// One table of pairwise values keyed `(transfer language, target language)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExternalDistanceTable {
    pub kind: DistanceKind,
    pub symmetric: bool,
    entries: BTreeMap<(String, String), f64>,
}

impl ExternalDistanceTable {
    pub fn new(kind: DistanceKind, symmetric: bool) -> Self {
        ExternalDistanceTable {
            kind,
            symmetric,
            entries: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, a: &str, b: &str, value: f64) -> std::result::Result<(), String> {
        if !value.is_finite() {
            return Err(format!("non-finite value for ({a}, {b})"));
        }
        let key = (a.to_string(), b.to_string());
        if let Some(&old) = self.entries.get(&key) {
            if old != value {
                return Err(format!(
                    "conflicting values for ({a}, {b}): {old} vs {value}"
                ));
            }
        }
        if self.symmetric {
            if let Some(&old) = self.entries.get(&(b.to_string(), a.to_string())) {
                if old != value {
                    return Err(format!(
                        "symmetric table has ({b}, {a}) = {old} but ({a}, {b}) = {value}"
                    ));
                }
            }
        }
        self.entries.insert(key, value);
        Ok(())
    }

    /// Direction-sensitive lookup. Symmetric tables also try the reverse
    /// key, and treat an absent self-pair as distance 0.
    pub fn lookup(&self, transfer: &str, target: &str) -> Option<f64> {
        if let Some(&v) = self
            .entries
            .get(&(transfer.to_string(), target.to_string()))
        {
            return Some(v);
        }
        if self.symmetric {
            if let Some(&v) = self
                .entries
                .get(&(target.to_string(), transfer.to_string()))
            {
                return Some(v);
            }
            if transfer == target {
                return Some(0.0);
            }
        }
        None
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Reads a `lang_a,lang_b,kind,value` file. `lang_a` is the transfer
/// language, `lang_b` the target. A `# symmetric=true|false` directive
/// (default `true`) applies to every kind in the file.
pub fn load_distance_tables(path: &Path) -> Result<Vec<ExternalDistanceTable>> {
    let table = io::read_delimited(path)?;
    let symmetric = match table
        .directives
        .get("symmetric")
        .map(|s| s.to_ascii_lowercase())
    {
        None => true,
        Some(s) if s == "true" || s == "yes" || s == "1" => true,
        Some(s) if s == "false" || s == "no" || s == "0" => false,
        Some(s) => return Err(Error::format(path, format!("bad symmetric flag `{s}`"))),
    };
    let c_a = table.column("lang_a")?;
    let c_b = table.column("lang_b")?;
    let c_kind = table.column("kind")?;
    let c_value = table.column("value")?;
    let mut by_kind: BTreeMap<DistanceKind, ExternalDistanceTable> = BTreeMap::new();
    for (line, row) in &table.rows {
        if row.len() < table.header.len() {
            return Err(Error::record(
                path,
                *line,
                format!(
                    "expected {} fields, found {}",
                    table.header.len(),
                    row.len()
                ),
            ));
        }
        let kind: DistanceKind = row[c_kind]
            .parse()
            .map_err(|e: String| Error::record(path, *line, e))?;
        let (a, b) = (&row[c_a], &row[c_b]);
        if a.is_empty() || b.is_empty() {
            return Err(Error::record(path, *line, "empty language code"));
        }
        if row[c_value].is_empty() || row[c_value] == io::MISSING {
            continue;
        }
        let value = io::parse_f64(&table, *line, &row[c_value])?;
        by_kind
            .entry(kind)
            .or_insert_with(|| ExternalDistanceTable::new(kind, symmetric))
            .insert(a, b, value)
            .map_err(|m| Error::record(path, *line, m))?;
    }
    Ok(by_kind.into_values().collect())
}

/// One feature per known kind; a kind without a table, or a pair without an
/// entry, is missing.
pub fn external_pair_features(
    tables: &BTreeMap<DistanceKind, ExternalDistanceTable>,
    target_language: &str,
    transfer_language: &str,
) -> Vec<(String, Option<f64>)> {
    DistanceKind::ALL
        .iter()
        .map(|k| {
            let v = tables
                .get(k)
                .and_then(|t| t.lookup(transfer_language, target_language));
            (k.name().to_string(), v)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VectorSource {
    Mtvec,
    Colex2lang,
}

impl VectorSource {
    pub const ALL: [VectorSource; 2] = [VectorSource::Mtvec, VectorSource::Colex2lang];

    pub fn name(self) -> &'static str {
        match self {
            VectorSource::Mtvec => "mtvec",
            VectorSource::Colex2lang => "colex2lang",
        }
    }

    pub fn rep_diff_feature(self) -> &'static str {
        match self {
            VectorSource::Mtvec => "rep_diff_mtvec",
            VectorSource::Colex2lang => "rep_diff_colex2lang",
        }
    }

    /// Per-component feature name in full-vector mode.
    pub fn component_feature(self, i: usize) -> String {
        format!("{}_diff_{i}", self.name())
    }
}

impl FromStr for VectorSource {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mtvec" => Ok(VectorSource::Mtvec),
            "colex2lang" => Ok(VectorSource::Colex2lang),
            other => Err(format!("unknown language-vector source `{other}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LanguageVectorTable {
    pub source: VectorSource,
    pub dim: usize,
    vectors: BTreeMap<String, Vec<f64>>,
}

impl LanguageVectorTable {
    pub fn new(source: VectorSource, dim: usize) -> Self {
        LanguageVectorTable {
            source,
            dim,
            vectors: BTreeMap::new(),
        }
    }

    pub fn insert(
        &mut self,
        language: impl Into<String>,
        v: Vec<f64>,
    ) -> std::result::Result<(), String> {
        if v.len() != self.dim {
            return Err(format!(
                "vector has {} components, expected {}",
                v.len(),
                self.dim
            ));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err("vector has a non-finite component".into());
        }
        self.vectors.insert(language.into(), v);
        Ok(())
    }

    pub fn get(&self, language: &str) -> Option<&[f64]> {
        self.vectors.get(language).map(Vec::as_slice)
    }

    /// Word-vector text format keyed by language code.
    pub fn load(path: &Path, source: VectorSource) -> Result<Self> {
        let text = io::read_to_string(path)?;
        let raw = parse_word_vectors(path, &text)?;
        let dim = raw
            .dim
            .or_else(|| raw.rows.first().map(|r| r.2.len()))
            .ok_or_else(|| Error::format(path, "no vectors"))?;
        let mut t = LanguageVectorTable::new(source, dim);
        for (line, lang, v) in raw.rows {
            t.insert(lang, v)
                .map_err(|m| Error::record(path, line, m))?;
        }
        Ok(t)
    }
}

/// Cosine distance `1 - cos` between the two language vectors.
pub fn rep_diff(
    vectors: &LanguageVectorTable,
    target_language: &str,
    transfer_language: &str,
) -> Option<f64> {
    let a = vectors.get(transfer_language)?;
    let b = vectors.get(target_language)?;
    cosine(a, b).map(|c| 1.0 - c)
}

/// Raw component-wise difference `transfer - target`, one feature per
/// dimension.
pub fn rep_diff_components(
    vectors: &LanguageVectorTable,
    target_language: &str,
    transfer_language: &str,
) -> Vec<(String, Option<f64>)> {
    let pair = vectors
        .get(transfer_language)
        .zip(vectors.get(target_language));
    (0..vectors.dim)
        .map(|i| {
            let v = pair.map(|(a, b)| a[i] - b[i]);
            (vectors.source.component_feature(i), v)
        })
        .collect()
}
