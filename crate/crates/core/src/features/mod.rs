//! Per-pair feature extraction.
//!
//! Every directed `(target, transfer)` dataset pair gets one
//! [`PairFeatureVector`] over the full feature catalog; feature groups and
//! baselines are projections of that vector (see [`FeatureSelection`]).

pub mod culture;
pub mod lexicon;
pub mod tables;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::corpus::{DatasetDescriptor, VocabStats};
use crate::diag::Diagnostics;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::io;

pub use culture::{
    cultural_ratio_features, language_culture_from_countries, CulturalProfile, Dimension,
};
pub use lexicon::{offensive_distance, AlignedLexicon, EmbeddingTable, OffDist};
pub use tables::{
    external_pair_features, rep_diff, DistanceKind, ExternalDistanceTable, LanguageVectorTable,
    VectorSource,
};

pub const TRANSFER_SIZE: &str = "transfer_size";
pub const TARGET_SIZE: &str = "target_size";
pub const RATIO_SIZE: &str = "ratio_size";
pub const TRANSFER_TTR: &str = "transfer_ttr";
pub const TARGET_TTR: &str = "target_ttr";
pub const DISTANCE_TTR: &str = "distance_ttr";
pub const WORD_OVERLAP: &str = "word_overlap";
pub const OFF_DIST: &str = "off_dist";

/// Feature catalog in its canonical order, with scalar rep-diff features.
pub fn base_catalog() -> Vec<String> {
    let mut names: Vec<String> = [
        TRANSFER_SIZE,
        TARGET_SIZE,
        RATIO_SIZE,
        TRANSFER_TTR,
        TARGET_TTR,
        DISTANCE_TTR,
        WORD_OVERLAP,
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    names.extend(DistanceKind::ALL.iter().map(|k| k.name().to_string()));
    names.push(OFF_DIST.to_string());
    names.extend(Dimension::ALL.iter().map(|d| d.feature_name().to_string()));
    names.extend(
        VectorSource::ALL
            .iter()
            .map(|s| s.rep_diff_feature().to_string()),
    );
    names
}

/// Named feature groups and baselines.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FeatureSet {
    DataSpecific,
    Typology,
    Geography,
    Orthography,
    Pragmatic,
    Prag,
    Off,
    Cultural,
    LangRank,
    Mtvec,
    Colex2Lang,
}

impl FeatureSet {
    /// The eight groups of the feature-group comparison, in table order.
    pub const GROUPS: [FeatureSet; 8] = [
        FeatureSet::DataSpecific,
        FeatureSet::Typology,
        FeatureSet::Geography,
        FeatureSet::Orthography,
        FeatureSet::Pragmatic,
        FeatureSet::Prag,
        FeatureSet::Off,
        FeatureSet::Cultural,
    ];

    pub fn label(self) -> &'static str {
        match self {
            FeatureSet::DataSpecific => "Data-specific",
            FeatureSet::Typology => "Typology",
            FeatureSet::Geography => "Geography",
            FeatureSet::Orthography => "Orthography",
            FeatureSet::Pragmatic => "Pragmatic",
            FeatureSet::Prag => "PRAG",
            FeatureSet::Off => "OFF",
            FeatureSet::Cultural => "Cultural",
            FeatureSet::LangRank => "LangRank",
            FeatureSet::Mtvec => "MTVEC",
            FeatureSet::Colex2Lang => "Colex2Lang",
        }
    }

    pub fn contains(self, name: &str) -> bool {
        const DATA: [&str; 3] = [TRANSFER_SIZE, TARGET_SIZE, RATIO_SIZE];
        const TTR: [&str; 3] = [TRANSFER_TTR, TARGET_TTR, DISTANCE_TTR];
        const TYPOLOGY: [&str; 4] = ["genetic", "syntactic", "featural", "phonological"];
        const GEOGRAPHY: [&str; 2] = ["inventory", "geographic"];
        const PRAG: [&str; 4] = ["lcr_noun", "lcr_verb", "esd", "ltq"];
        match self {
            FeatureSet::DataSpecific => DATA.contains(&name),
            FeatureSet::Typology => TYPOLOGY.contains(&name),
            FeatureSet::Geography => GEOGRAPHY.contains(&name),
            FeatureSet::Orthography => name == WORD_OVERLAP,
            FeatureSet::Pragmatic => TTR.contains(&name) || PRAG.contains(&name),
            FeatureSet::Prag => PRAG.contains(&name),
            FeatureSet::Off => name == OFF_DIST,
            FeatureSet::Cultural => Dimension::ALL.iter().any(|d| d.feature_name() == name),
            FeatureSet::LangRank => {
                DATA.contains(&name)
                    || TTR.contains(&name)
                    || name == WORD_OVERLAP
                    || TYPOLOGY.contains(&name)
                    || GEOGRAPHY.contains(&name)
            }
            FeatureSet::Mtvec => name == "rep_diff_mtvec" || name.starts_with("mtvec_diff_"),
            FeatureSet::Colex2Lang => {
                name == "rep_diff_colex2lang" || name.starts_with("colex2lang_diff_")
            }
        }
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for FeatureSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .trim()
            .to_ascii_lowercase()
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect();
        Ok(match key.as_str() {
            "dataspecific" | "data" => FeatureSet::DataSpecific,
            "typology" | "topology" => FeatureSet::Typology,
            "geography" => FeatureSet::Geography,
            "orthography" => FeatureSet::Orthography,
            "pragmatic" => FeatureSet::Pragmatic,
            "prag" | "p" => FeatureSet::Prag,
            "off" | "offdist" | "o" => FeatureSet::Off,
            "cultural" | "culturalvalue" | "culdim" | "c" => FeatureSet::Cultural,
            "langrank" => FeatureSet::LangRank,
            "mtvec" => FeatureSet::Mtvec,
            "colex2lang" => FeatureSet::Colex2Lang,
            _ => {
                return Err(Error::Config(format!(
                    "unknown feature group `{}`",
                    s.trim()
                )))
            }
        })
    }
}

/// A union of feature sets minus explicitly excluded feature names.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSelection {
    pub sets: Vec<FeatureSet>,
    #[serde(default)]
    pub exclude: BTreeSet<String>,
}

impl FeatureSelection {
    pub fn of(sets: impl IntoIterator<Item = FeatureSet>) -> Self {
        FeatureSelection {
            sets: sets.into_iter().collect(),
            exclude: BTreeSet::new(),
        }
    }

    /// Parses `"LangRank+P+C"`-style specs.
    pub fn parse(spec: &str) -> Result<Self> {
        let sets = spec
            .split(['+', ','])
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(FeatureSet::from_str)
            .collect::<Result<Vec<_>>>()?;
        if sets.is_empty() {
            return Err(Error::Config(format!("empty feature selection `{spec}`")));
        }
        Ok(Self::of(sets))
    }

    pub fn label(&self) -> String {
        let mut s = self
            .sets
            .iter()
            .map(|f| f.label())
            .collect::<Vec<_>>()
            .join("+");
        for x in &self.exclude {
            s.push_str(&format!("-{x}"));
        }
        s
    }

    /// Removes one feature; it must currently be selected.
    pub fn without(&self, feature: &str, catalog: &[String]) -> Result<Self> {
        let current = self.resolve(catalog)?;
        if !current.iter().any(|n| n == feature) {
            return Err(Error::Config(format!(
                "feature `{feature}` is not part of selection `{}`",
                self.label()
            )));
        }
        let mut next = self.clone();
        next.exclude.insert(feature.to_string());
        Ok(next)
    }

    /// Selected names in catalog order.
    pub fn resolve(&self, catalog: &[String]) -> Result<Vec<String>> {
        if self.sets.is_empty() {
            return Err(Error::Config("feature selection names no groups".into()));
        }
        Ok(catalog
            .iter()
            .filter(|n| self.sets.iter().any(|s| s.contains(n)) && !self.exclude.contains(*n))
            .cloned()
            .collect())
    }
}

/// Named feature values for one directed pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairFeatureVector {
    pub target_id: String,
    pub transfer_id: String,
    pub values: IndexMap<String, Option<f64>>,
}

impl PairFeatureVector {
    pub fn new(target_id: impl Into<String>, transfer_id: impl Into<String>) -> Self {
        PairFeatureVector {
            target_id: target_id.into(),
            transfer_id: transfer_id.into(),
            values: IndexMap::new(),
        }
    }

    pub fn with(mut self, name: impl Into<String>, value: Option<f64>) -> Self {
        self.values.insert(name.into(), value);
        self
    }

    pub fn extend(&mut self, partial: impl IntoIterator<Item = (String, Option<f64>)>) {
        self.values.extend(partial);
    }

    /// `None` if the name is absent, `Some(None)` if present but missing.
    pub fn get(&self, name: &str) -> Option<Option<f64>> {
        self.values.get(name).copied()
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.values.keys()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn project(&self, names: &[String]) -> Result<PairFeatureVector> {
        let mut out = PairFeatureVector::new(&self.target_id, &self.transfer_id);
        for n in names {
            let v = self.get(n).ok_or_else(|| {
                Error::Config(format!(
                    "feature `{n}` unavailable for pair ({}, {})",
                    self.target_id, self.transfer_id
                ))
            })?;
            out.values.insert(n.clone(), v);
        }
        Ok(out)
    }
}

/// Projects a full-catalog vector onto a selection.
pub fn assemble(
    pair: &PairFeatureVector,
    selection: &FeatureSelection,
) -> Result<PairFeatureVector> {
    let catalog: Vec<String> = pair.names().cloned().collect();
    pair.project(&selection.resolve(&catalog)?)
}

/// Data-dependent features: sizes, TTRs, TTR distance and word overlap.
pub fn data_features(
    target: (&DatasetDescriptor, &VocabStats),
    transfer: (&DatasetDescriptor, &VocabStats),
) -> Vec<(String, Option<f64>)> {
    let s1 = transfer.0.split_sizes.train as f64;
    let s2 = target.0.split_sizes.train as f64;
    let ratio = (s2 > 0.0).then(|| s1 / s2);
    let (ttr1, ttr2) = (transfer.1.ttr, target.1.ttr);
    let distance_ttr = match (ttr1, ttr2) {
        (Some(a), Some(b)) if b != 0.0 => Some((1.0 - a / b).powi(2)),
        _ => None,
    };
    vec![
        (TRANSFER_SIZE.into(), Some(s1)),
        (TARGET_SIZE.into(), Some(s2)),
        (RATIO_SIZE.into(), ratio),
        (TRANSFER_TTR.into(), ttr1),
        (TARGET_TTR.into(), ttr2),
        (DISTANCE_TTR.into(), distance_ttr),
        (
            WORD_OVERLAP.into(),
            word_overlap(&transfer.1.vocabulary, &target.1.vocabulary),
        ),
    ]
}

/// `|V1 ∩ V2| / (|V1| + |V2|)`; missing when both vocabularies are empty.
pub fn word_overlap(v1: &BTreeSet<String>, v2: &BTreeSet<String>) -> Option<f64> {
    let denom = v1.len() + v2.len();
    if denom == 0 {
        return None;
    }
    let (small, large) = if v1.len() <= v2.len() {
        (v1, v2)
    } else {
        (v2, v1)
    };
    let shared = small.iter().filter(|w| large.contains(*w)).count();
    Some(shared as f64 / denom as f64)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepDiffMode {
    /// One cosine-distance scalar per vector source.
    #[default]
    Scalar,
    /// Raw per-component differences.
    Components,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureOptions {
    /// Minimum aligned-concept coverage before `off_dist` is emitted.
    pub min_offdist_coverage: usize,
    pub rep_diff_mode: RepDiffMode,
}

impl Default for FeatureOptions {
    fn default() -> Self {
        FeatureOptions {
            min_offdist_coverage: 10,
            rep_diff_mode: RepDiffMode::Scalar,
        }
    }
}

/// Read-only lookup tables feeding the language- and country-level
/// features. Any of them may be absent; dependent features are then missing.
#[derive(Clone, Debug, Default)]
pub struct Resources {
    pub country_profiles: BTreeMap<String, CulturalProfile>,
    pub official_languages: BTreeMap<String, BTreeSet<String>>,
    pub lexicon: Option<AlignedLexicon>,
    /// Keyed by language code.
    pub embeddings: BTreeMap<String, EmbeddingTable>,
    pub distances: BTreeMap<DistanceKind, ExternalDistanceTable>,
    pub language_vectors: BTreeMap<VectorSource, LanguageVectorTable>,
}

impl Resources {
    pub fn add_distance_tables(&mut self, tables: Vec<ExternalDistanceTable>) -> Result<()> {
        for t in tables {
            if self.distances.contains_key(&t.kind) {
                return Err(Error::Config(format!(
                    "distance kind `{}` supplied twice",
                    t.kind
                )));
            }
            self.distances.insert(t.kind, t);
        }
        Ok(())
    }

    /// Loads every `*.vec` / `*.txt` file in `dir`, keyed by file stem.
    pub fn load_embeddings_dir(&mut self, dir: &Path) -> Result<()> {
        let mut paths: Vec<_> = std::fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                matches!(
                    p.extension().and_then(|e| e.to_str()),
                    Some("vec") | Some("txt")
                )
            })
            .collect();
        paths.sort();
        for p in paths {
            let lang = p
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or_default()
                .to_string();
            let table = EmbeddingTable::load(&p, &lang)?;
            self.embeddings.insert(lang, table);
        }
        Ok(())
    }

    /// Country profile when the dataset has a country in the table,
    /// otherwise the language-level average.
    pub fn profile_for(
        &self,
        d: &DatasetDescriptor,
        diagnostics: &mut Diagnostics,
    ) -> CulturalProfile {
        if let Some(c) = &d.country {
            if let Some(p) = self.country_profiles.get(c) {
                return *p;
            }
            diagnostics.warn(format!(
                "dataset `{}`: country `{c}` has no cultural values; using language `{}`",
                d.id, d.language
            ));
        }
        language_culture_from_countries(
            &d.language,
            &self.country_profiles,
            &self.official_languages,
            diagnostics,
        )
    }

    /// Raw offensive-lexicon similarity, `None` when the lexicon or either
    /// embedding table is absent.
    pub fn offdist(
        &self,
        transfer_language: &str,
        target_language: &str,
    ) -> Result<Option<OffDist>> {
        let (Some(lex), Some(a), Some(b)) = (
            self.lexicon.as_ref(),
            self.embeddings.get(transfer_language),
            self.embeddings.get(target_language),
        ) else {
            return Ok(None);
        };
        offensive_distance(lex, a, b).map(Some)
    }

    pub fn catalog(&self, options: &FeatureOptions) -> Vec<String> {
        match options.rep_diff_mode {
            RepDiffMode::Scalar => base_catalog(),
            RepDiffMode::Components => {
                let mut names: Vec<String> = base_catalog()
                    .into_iter()
                    .filter(|n| !n.starts_with("rep_diff_"))
                    .collect();
                for src in VectorSource::ALL {
                    if let Some(t) = self.language_vectors.get(&src) {
                        names.extend((0..t.dim).map(|i| src.component_feature(i)));
                    }
                }
                names
            }
        }
    }
}

/// A dataset reduced to what the features need.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub descriptor: DatasetDescriptor,
    pub vocab: VocabStats,
}

/// Rows of full-catalog vectors ordered by `(target id, transfer id)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureTable {
    pub catalog: Vec<String>,
    pub rows: Vec<PairFeatureVector>,
}

impl FeatureTable {
    pub fn new(catalog: Vec<String>, mut rows: Vec<PairFeatureVector>) -> Result<Self> {
        for r in &rows {
            if !r.names().eq(catalog.iter()) {
                return Err(Error::Config(format!(
                    "pair ({}, {}) does not follow the table catalog",
                    r.target_id, r.transfer_id
                )));
            }
        }
        rows.sort_by(|a, b| (&a.target_id, &a.transfer_id).cmp(&(&b.target_id, &b.transfer_id)));
        Ok(FeatureTable { catalog, rows })
    }

    pub fn get(&self, target: &str, transfer: &str) -> Option<&PairFeatureVector> {
        self.rows
            .binary_search_by(|r| {
                (r.target_id.as_str(), r.transfer_id.as_str()).cmp(&(target, transfer))
            })
            .ok()
            .map(|i| &self.rows[i])
    }

    pub fn dataset_ids(&self) -> BTreeSet<String> {
        self.rows
            .iter()
            .flat_map(|r| [r.target_id.clone(), r.transfer_id.clone()])
            .collect()
    }

    /// Projects every row onto the selection.
    pub fn select(&self, selection: &FeatureSelection) -> Result<FeatureTable> {
        let names = selection.resolve(&self.catalog)?;
        let rows = self
            .rows
            .iter()
            .map(|r| r.project(&names))
            .collect::<Result<Vec<_>>>()?;
        Ok(FeatureTable {
            catalog: names,
            rows,
        })
    }

    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["target_id".to_string(), "transfer_id".to_string()];
        h.extend(self.catalog.iter().cloned());
        h
    }

    pub fn string_rows(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| {
                let mut row = vec![r.target_id.clone(), r.transfer_id.clone()];
                row.extend(r.values.values().map(|v| io::format_value(*v)));
                row
            })
            .collect()
    }

    pub fn to_delimited(&self, directives: &[(&str, &str)], delimiter: u8) -> String {
        io::to_delimited(directives, &self.header(), &self.string_rows(), delimiter)
    }

    pub fn load(path: &Path) -> Result<FeatureTable> {
        let t = io::read_delimited(path)?;
        if t.header.len() < 2 || t.header[0] != "target_id" || t.header[1] != "transfer_id" {
            return Err(Error::format(
                path,
                "expected `target_id,transfer_id,...` header",
            ));
        }
        let catalog: Vec<String> = t.header[2..].to_vec();
        let mut rows = Vec::with_capacity(t.rows.len());
        for (line, fields) in &t.rows {
            if fields.len() != t.header.len() {
                return Err(Error::record(path, *line, "wrong number of fields"));
            }
            let mut v = PairFeatureVector::new(&fields[0], &fields[1]);
            for (name, cell) in catalog.iter().zip(&fields[2..]) {
                let value = if cell.is_empty() || cell == io::MISSING {
                    None
                } else {
                    Some(io::parse_f64(&t, *line, cell)?)
                };
                v.values.insert(name.clone(), value);
            }
            rows.push(v);
        }
        FeatureTable::new(catalog, rows)
    }
}

/// Extracts the full-catalog vector for every directed pair of distinct
/// datasets.
pub fn extract_features(
    datasets: &[DatasetSummary],
    resources: &Resources,
    options: &FeatureOptions,
    exec: Exec,
) -> Result<(FeatureTable, Diagnostics)> {
    let mut diagnostics = Diagnostics::new();
    let mut ids = BTreeSet::new();
    for d in datasets {
        if !ids.insert(d.descriptor.id.as_str()) {
            return Err(Error::Config(format!(
                "duplicate dataset id `{}`",
                d.descriptor.id
            )));
        }
    }
    let mut ordered: Vec<&DatasetSummary> = datasets.iter().collect();
    ordered.sort_by(|a, b| a.descriptor.id.cmp(&b.descriptor.id));

    let profiles: BTreeMap<&str, CulturalProfile> = ordered
        .iter()
        .map(|d| {
            (
                d.descriptor.id.as_str(),
                resources.profile_for(&d.descriptor, &mut diagnostics),
            )
        })
        .collect();

    // Offensive-lexicon similarity depends only on the language pair.
    let languages: BTreeSet<&str> = ordered
        .iter()
        .map(|d| d.descriptor.language.as_str())
        .collect();
    if resources.lexicon.is_some() {
        for lang in &languages {
            if !resources.embeddings.contains_key(*lang) {
                diagnostics.warn(format!(
                    "no embeddings for language `{lang}`; off_dist missing for its pairs"
                ));
            }
        }
    } else {
        diagnostics.warn("no offensive lexicon configured; off_dist missing");
    }
    let lang_pairs: Vec<(&str, &str)> = languages
        .iter()
        .flat_map(|a| languages.iter().map(move |b| (*a, *b)))
        .collect();
    let offdists = exec.map(&lang_pairs, |(tsf, tgt)| resources.offdist(tsf, tgt));
    let mut offdist_by_pair: BTreeMap<(&str, &str), Option<f64>> = BTreeMap::new();
    for ((tsf, tgt), r) in lang_pairs.iter().zip(offdists) {
        let value = match r? {
            None => None,
            Some(od) if od.coverage < options.min_offdist_coverage.max(1) => {
                diagnostics.warn(format!(
                    "off_dist({tsf} -> {tgt}): {} aligned concepts below minimum {}; marked missing",
                    od.coverage, options.min_offdist_coverage
                ));
                None
            }
            Some(od) => {
                if od.zero_vectors > 0 {
                    diagnostics.warn(format!(
                        "off_dist({tsf} -> {tgt}): {} concepts skipped for zero-norm vectors",
                        od.zero_vectors
                    ));
                }
                od.value
            }
        };
        offdist_by_pair.insert((tsf, tgt), value);
    }

    let pairs: Vec<(&DatasetSummary, &DatasetSummary)> = ordered
        .iter()
        .flat_map(|t| {
            ordered
                .iter()
                .filter(move |s| s.descriptor.id != t.descriptor.id)
                .map(move |s| (*t, *s))
        })
        .collect();
    let catalog = resources.catalog(options);

    let rows = exec.map(&pairs, |(target, transfer)| {
        let mut diag = Diagnostics::new();
        let (tl, sl) = (
            target.descriptor.language.as_str(),
            transfer.descriptor.language.as_str(),
        );
        let mut v = PairFeatureVector::new(&target.descriptor.id, &transfer.descriptor.id);
        v.extend(data_features(
            (&target.descriptor, &target.vocab),
            (&transfer.descriptor, &transfer.vocab),
        ));
        v.extend(external_pair_features(&resources.distances, tl, sl));
        v.values
            .insert(OFF_DIST.to_string(), offdist_by_pair[&(sl, tl)]);
        v.extend(cultural_ratio_features(
            &profiles[target.descriptor.id.as_str()],
            &profiles[transfer.descriptor.id.as_str()],
            &mut diag,
        ));
        for src in VectorSource::ALL {
            match (options.rep_diff_mode, resources.language_vectors.get(&src)) {
                (RepDiffMode::Scalar, Some(t)) => {
                    v.values
                        .insert(src.rep_diff_feature().to_string(), rep_diff(t, tl, sl));
                }
                (RepDiffMode::Scalar, None) => {
                    v.values.insert(src.rep_diff_feature().to_string(), None);
                }
                (RepDiffMode::Components, Some(t)) => {
                    v.extend(tables::rep_diff_components(t, tl, sl))
                }
                (RepDiffMode::Components, None) => {}
            }
        }
        let v = v.project(&catalog).expect("extraction covers the catalog");
        (v, diag)
    });

    let mut out = Vec::with_capacity(rows.len());
    for (v, d) in rows {
        diagnostics.extend(d);
        out.push(v);
    }
    Ok((FeatureTable::new(catalog, out)?, diagnostics))
}
