//! Dataset ingestion and corpus statistics.
//!
//! A manifest lists every dataset with its language, country, the set of raw
//! labels that count as offensive, and the file holding its records. Records
//! are binarised on load: a text is offensive iff any of its labels is in
//! the configured offensive set.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use unicode_segmentation::UnicodeSegmentation;

use crate::diag::Diagnostics;
use crate::error::{Error, Result};
use crate::io;

/// Separator for multi-valued fields (label sets) in delimited files.
pub const LABEL_SEPARATOR: char = ';';

#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    #[default]
    Train,
    Dev,
    Test,
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "" | "train" => Ok(Split::Train),
            "dev" | "valid" | "validation" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split `{other}`")),
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub train: usize,
    pub dev: usize,
    pub test: usize,
}

impl SplitSizes {
    pub fn total(&self) -> usize {
        self.train + self.dev + self.test
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetDescriptor {
    pub id: String,
    /// ISO 639-3 language code.
    pub language: String,
    /// ISO 3166-1 alpha-2 country code, when the dataset has one.
    pub country: Option<String>,
    pub split_sizes: SplitSizes,
    pub source_path: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledRecord {
    pub text: String,
    pub raw_labels: BTreeSet<String>,
    pub offensive: bool,
    pub split: Split,
}

impl LabeledRecord {
    pub fn new(
        text: impl Into<String>,
        raw_labels: impl IntoIterator<Item = impl Into<String>>,
        offensive_set: &BTreeSet<String>,
        split: Split,
    ) -> Self {
        let raw_labels: BTreeSet<String> = raw_labels.into_iter().map(Into::into).collect();
        let offensive = is_offensive(&raw_labels, offensive_set);
        LabeledRecord {
            text: text.into(),
            raw_labels,
            offensive,
            split,
        }
    }
}

pub fn is_offensive<'a>(
    labels: impl IntoIterator<Item = &'a String>,
    offensive_set: &BTreeSet<String>,
) -> bool {
    labels.into_iter().any(|l| offensive_set.contains(l))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataFormat {
    /// Delimited rows with `text` and `labels` columns (optional `split`).
    Delimited,
    /// One JSON object per line with `text`, `labels` (or `label`), optional `split`.
    Jsonl,
}

impl FromStr for DataFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "tsv" | "csv" | "delimited" => Ok(DataFormat::Delimited),
            "jsonl" | "ndjson" => Ok(DataFormat::Jsonl),
            other => Err(format!("unknown dataset format `{other}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub language: String,
    pub country: Option<String>,
    pub offensive_labels: BTreeSet<String>,
    pub format: DataFormat,
    pub path: PathBuf,
}

/// Reads the dataset manifest. Relative dataset paths resolve against the
/// manifest's directory.
pub fn load_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let table = io::read_delimited(path)?;
    let c_id = table.column("id")?;
    let c_lang = table.column("language")?;
    let c_country = table.optional_column("country");
    let c_off = table.column("offensive_labels")?;
    let c_fmt = table.optional_column("format");
    let c_path = table.column("path")?;
    let base = path.parent().unwrap_or(Path::new(""));

    let mut seen = BTreeSet::new();
    let mut entries = Vec::with_capacity(table.rows.len());
    for (line, row) in &table.rows {
        let field = |c: usize| row.get(c).map(String::as_str).unwrap_or("");
        let id = field(c_id).to_string();
        if id.is_empty() {
            return Err(Error::record(path, *line, "empty dataset id"));
        }
        if !seen.insert(id.clone()) {
            return Err(Error::record(
                path,
                *line,
                format!("duplicate dataset id `{id}`"),
            ));
        }
        let format = match c_fmt.map(field).filter(|s| !s.is_empty()) {
            Some(s) => s
                .parse()
                .map_err(|e: String| Error::record(path, *line, e))?,
            None => infer_format(Path::new(field(c_path))),
        };
        let country = c_country
            .map(field)
            .filter(|s| !s.is_empty())
            .map(str::to_string);
        entries.push(ManifestEntry {
            id,
            language: field(c_lang).to_string(),
            country,
            offensive_labels: split_labels(field(c_off)),
            format,
            path: base.join(field(c_path)),
        });
    }
    Ok(entries)
}

fn infer_format(path: &Path) -> DataFormat {
    match path.extension().and_then(|e| e.to_str()) {
        Some("jsonl") | Some("ndjson") => DataFormat::Jsonl,
        _ => DataFormat::Delimited,
    }
}

pub fn split_labels(field: &str) -> BTreeSet<String> {
    field
        .split(LABEL_SEPARATOR)
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

fn is_iso639_3(code: &str) -> bool {
    code.len() == 3 && code.bytes().all(|b| b.is_ascii_lowercase())
}

fn is_iso3166_alpha2(code: &str) -> bool {
    code.len() == 2 && code.bytes().all(|b| b.is_ascii_uppercase())
}

#[derive(Clone, Debug)]
pub struct LoadedDataset {
    pub descriptor: DatasetDescriptor,
    pub records: Vec<LabeledRecord>,
    pub diagnostics: Diagnostics,
}

impl LoadedDataset {
    pub fn train_records(&self) -> impl Iterator<Item = &LabeledRecord> {
        self.records.iter().filter(|r| r.split == Split::Train)
    }
}

/// Loads one manifest entry.
///
/// An empty file is not an `Err`: it yields a zero-size descriptor with a
/// "dataset empty" error diagnostic so the caller can report every problem
/// in one pass.
pub fn load_dataset(entry: &ManifestEntry) -> Result<LoadedDataset> {
    let mut diagnostics = Diagnostics::new();
    if !is_iso639_3(&entry.language) {
        diagnostics.warn(format!(
            "dataset `{}`: unrecognised language code `{}` kept verbatim",
            entry.id, entry.language
        ));
    }
    if let Some(c) = &entry.country {
        if !is_iso3166_alpha2(c) {
            diagnostics.warn(format!(
                "dataset `{}`: unrecognised country code `{c}` kept verbatim",
                entry.id
            ));
        }
    }

    let text = io::read_to_string(&entry.path)?;
    let records = if text.trim().is_empty() {
        Vec::new()
    } else {
        match entry.format {
            DataFormat::Delimited => {
                parse_delimited_records(&entry.path, &text, &entry.offensive_labels)?
            }
            DataFormat::Jsonl => parse_jsonl_records(&entry.path, &text, &entry.offensive_labels)?,
        }
    };
    if records.is_empty() {
        diagnostics.error(format!("dataset `{}`: dataset empty", entry.id));
    }

    let mut split_sizes = SplitSizes::default();
    for r in &records {
        match r.split {
            Split::Train => split_sizes.train += 1,
            Split::Dev => split_sizes.dev += 1,
            Split::Test => split_sizes.test += 1,
        }
    }
    Ok(LoadedDataset {
        descriptor: DatasetDescriptor {
            id: entry.id.clone(),
            language: entry.language.clone(),
            country: entry.country.clone(),
            split_sizes,
            source_path: entry.path.clone(),
        },
        records,
        diagnostics,
    })
}

fn parse_delimited_records(
    path: &Path,
    text: &str,
    offensive_set: &BTreeSet<String>,
) -> Result<Vec<LabeledRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(io::delimiter_for(path))
        .flexible(true)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::format(path, e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let col = |name: &str| header.iter().position(|h| h == name);
    let c_text = col("text").ok_or_else(|| Error::format(path, "missing column `text`"))?;
    let c_labels = col("labels")
        .or_else(|| col("label"))
        .ok_or_else(|| Error::format(path, "missing column `labels`"))?;
    let c_split = col("split");

    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e
                .position()
                .map(|p| io::line_at(text, p.byte()))
                .unwrap_or(0);
            Error::record(path, line, e.to_string())
        })?;
        let line = rec
            .position()
            .map(|p| io::line_at(text, p.byte()))
            .unwrap_or(0);
        let text = rec
            .get(c_text)
            .ok_or_else(|| Error::record(path, line, "record has no text field"))?;
        let labels = rec
            .get(c_labels)
            .ok_or_else(|| Error::record(path, line, "record has no label field"))?;
        let split = match c_split.and_then(|c| rec.get(c)) {
            Some(s) => s
                .parse()
                .map_err(|e: String| Error::record(path, line, e))?,
            None => Split::Train,
        };
        out.push(LabeledRecord::new(
            text,
            split_labels(labels),
            offensive_set,
            split,
        ));
    }
    Ok(out)
}

#[derive(Deserialize, Serialize)]
struct JsonRecord {
    text: Option<String>,
    #[serde(default)]
    labels: Option<JsonLabels>,
    #[serde(default)]
    label: Option<JsonLabels>,
    #[serde(default)]
    split: Option<String>,
}

#[derive(Deserialize, Serialize)]
#[serde(untagged)]
enum JsonLabels {
    One(String),
    Many(Vec<String>),
}

fn parse_jsonl_records(
    path: &Path,
    text: &str,
    offensive_set: &BTreeSet<String>,
) -> Result<Vec<LabeledRecord>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: JsonRecord = serde_json::from_str(line)
            .map_err(|e| Error::record(path, line_no, format!("malformed record: {e}")))?;
        let text = rec
            .text
            .ok_or_else(|| Error::record(path, line_no, "record has no text field"))?;
        let labels = match rec.labels.or(rec.label) {
            Some(JsonLabels::One(s)) => vec![s],
            Some(JsonLabels::Many(v)) => v,
            None => return Err(Error::record(path, line_no, "record has no label field")),
        };
        let split = match rec.split {
            Some(s) => s
                .parse()
                .map_err(|e: String| Error::record(path, line_no, e))?,
            None => Split::Train,
        };
        out.push(LabeledRecord::new(text, labels, offensive_set, split));
    }
    Ok(out)
}

/// Serialises records in the given format; `load_dataset` reads the output
/// back to the same records.
pub fn write_records(path: &Path, records: &[LabeledRecord], format: DataFormat) -> Result<()> {
    let body = match format {
        DataFormat::Delimited => {
            let header = vec![
                "text".to_string(),
                "labels".to_string(),
                "split".to_string(),
            ];
            let rows: Vec<Vec<String>> = records
                .iter()
                .map(|r| {
                    let labels: Vec<&str> = r.raw_labels.iter().map(String::as_str).collect();
                    vec![r.text.clone(), labels.join(";"), r.split.to_string()]
                })
                .collect();
            io::to_delimited(&[], &header, &rows, io::delimiter_for(path))
        }
        DataFormat::Jsonl => {
            let mut s = String::new();
            for r in records {
                let rec = JsonRecord {
                    text: Some(r.text.clone()),
                    labels: Some(JsonLabels::Many(r.raw_labels.iter().cloned().collect())),
                    label: None,
                    split: Some(r.split.to_string()),
                };
                s.push_str(&serde_json::to_string(&rec).expect("plain struct"));
                s.push('\n');
            }
            s
        }
    };
    io::write_file(path, &body)
}

/// Scripts written without spaces between words; tokenised per codepoint.
fn is_unsegmented_script(c: char) -> bool {
    matches!(c as u32,
        0x3040..=0x309F     // Hiragana
        | 0x30A0..=0x30FF   // Katakana
        | 0x31F0..=0x31FF   // Katakana phonetic extensions
        | 0x3400..=0x4DBF   // CJK extension A
        | 0x4E00..=0x9FFF   // CJK unified ideographs
        | 0xF900..=0xFAFF   // CJK compatibility ideographs
        | 0x20000..=0x2FA1F // CJK extensions B..
    )
}

/// Lowercased Unicode word segmentation (UAX #29). Tokens containing
/// Han or Kana characters are further split into single codepoints.
pub fn tokenize(text: &str) -> Vec<String> {
    let lowered = text.to_lowercase();
    let mut out = Vec::new();
    for word in lowered.unicode_words() {
        if word.chars().any(is_unsegmented_script) {
            let mut run = String::new();
            for c in word.chars() {
                if is_unsegmented_script(c) {
                    if !run.is_empty() {
                        out.push(std::mem::take(&mut run));
                    }
                    out.push(c.to_string());
                } else {
                    run.push(c);
                }
            }
            if !run.is_empty() {
                out.push(run);
            }
        } else {
            out.push(word.to_string());
        }
    }
    out
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VocabStats {
    pub token_count: usize,
    pub type_count: usize,
    /// `None` when there are no tokens.
    pub ttr: Option<f64>,
    pub vocabulary: BTreeSet<String>,
}

impl VocabStats {
    pub fn from_tokens<S: AsRef<str>>(tokens: impl IntoIterator<Item = S>) -> Self {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        let mut token_count = 0usize;
        for t in tokens {
            token_count += 1;
            *counts.entry(t.as_ref().to_string()).or_default() += 1;
        }
        let type_count = counts.len();
        let ttr = (token_count > 0).then(|| type_count as f64 / token_count as f64);
        VocabStats {
            token_count,
            type_count,
            ttr,
            vocabulary: counts.into_keys().collect(),
        }
    }
}

/// Type-token statistics over the given records.
pub fn vocab_stats<'a>(records: impl IntoIterator<Item = &'a LabeledRecord>) -> VocabStats {
    VocabStats::from_tokens(records.into_iter().flat_map(|r| tokenize(&r.text)))
}

/// Statistics over the train split only.
pub fn train_vocab_stats(dataset: &LoadedDataset) -> VocabStats {
    vocab_stats(dataset.train_records())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn off(labels: &[&str]) -> BTreeSet<String> {
        labels.iter().map(|s| s.to_string()).collect()
    }

    fn entry(dir: &Path, name: &str, body: &str) -> ManifestEntry {
        let path = dir.join(name);
        std::fs::write(&path, body).unwrap();
        ManifestEntry {
            id: "fixture".into(),
            language: "eng".into(),
            country: Some("US".into()),
            offensive_labels: off(&["hate", "insult"]),
            format: infer_format(&path),
            path,
        }
    }

    #[test]
    fn three_line_fixture_binarises() {
        let dir = tempfile::tempdir().unwrap();
        let e = entry(
            dir.path(),
            "d.tsv",
            "text\tlabels\nyou are bad\thate\nnice day\tnone\nidiot\tinsult\n",
        );
        let d = load_dataset(&e).unwrap();
        assert_eq!(d.records.iter().filter(|r| r.offensive).count(), 2);
        assert_eq!(d.records.iter().filter(|r| !r.offensive).count(), 1);
        assert_eq!(d.descriptor.split_sizes.train, 3);
        assert!(d.diagnostics.is_empty());
    }

    #[test]
    fn jsonl_fixture_with_splits() {
        let dir = tempfile::tempdir().unwrap();
        let body = r#"{"text":"a b","labels":["hate","other"],"split":"train"}
{"text":"c","label":"none","split":"test"}
{"text":"d","labels":[],"split":"dev"}
"#;
        let e = entry(dir.path(), "d.jsonl", body);
        let d = load_dataset(&e).unwrap();
        assert_eq!(
            d.descriptor.split_sizes,
            SplitSizes {
                train: 1,
                dev: 1,
                test: 1
            }
        );
        assert!(d.records[0].offensive);
        assert!(!d.records[1].offensive);
    }

    #[test]
    fn missing_label_field_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let e = entry(
            dir.path(),
            "d.jsonl",
            "{\"text\":\"a\",\"labels\":[\"x\"]}\n{\"text\":\"b\"}\n",
        );
        let err = load_dataset(&e).unwrap_err();
        assert!(matches!(err, Error::Record { line: 2, .. }), "{err}");

        let e = entry(dir.path(), "d.tsv", "text\tlabels\nfine\tnone\nbroken\n");
        let err = load_dataset(&e).unwrap_err();
        assert!(matches!(err, Error::Record { line: 3, .. }), "{err}");
    }

    #[test]
    fn empty_file_is_zero_size_with_error() {
        let dir = tempfile::tempdir().unwrap();
        let e = entry(dir.path(), "d.tsv", "");
        let d = load_dataset(&e).unwrap();
        assert_eq!(d.descriptor.split_sizes.total(), 0);
        assert!(d.diagnostics.has_errors());
        assert!(d.diagnostics.mentions("dataset empty"));
    }

    #[test]
    fn missing_file_is_load_error() {
        let e = ManifestEntry {
            id: "x".into(),
            language: "eng".into(),
            country: None,
            offensive_labels: BTreeSet::new(),
            format: DataFormat::Delimited,
            path: "/nonexistent/nowhere.tsv".into(),
        };
        assert!(matches!(load_dataset(&e), Err(Error::Io { .. })));
    }

    #[test]
    fn unknown_codes_warn_and_are_kept() {
        let dir = tempfile::tempdir().unwrap();
        let mut e = entry(dir.path(), "d.tsv", "text\tlabels\nhi\tnone\n");
        e.language = "English".into();
        e.country = Some("UK-GB".into());
        let d = load_dataset(&e).unwrap();
        assert_eq!(d.descriptor.language, "English");
        assert_eq!(d.descriptor.country.as_deref(), Some("UK-GB"));
        assert_eq!(d.diagnostics.warnings().count(), 2);
        assert!(!d.diagnostics.has_errors());
    }

    #[test]
    fn tokenize_examples() {
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("Hello, world"), ["hello", "world"]);
        assert_eq!(tokenize("小丑"), ["小", "丑"]);
        assert_eq!(
            tokenize("Ein Clown! 小丑ok"),
            ["ein", "clown", "小", "丑", "ok"]
        );
        assert_eq!(tokenize("  \t\n "), Vec::<String>::new());
    }

    #[test]
    fn vocab_stats_hand_count() {
        let s = VocabStats::from_tokens(["a", "b", "a", "c"]);
        assert_eq!((s.token_count, s.type_count), (4, 3));
        assert_eq!(s.ttr, Some(0.75));
        assert_eq!(VocabStats::from_tokens(["x", "y", "z"]).ttr, Some(1.0));
        let empty = vocab_stats(std::iter::empty());
        assert_eq!(empty.ttr, None);
        assert_eq!(empty.token_count, 0);
    }

    #[test]
    fn only_train_split_feeds_vocabulary() {
        let set = off(&[]);
        let d = LoadedDataset {
            descriptor: DatasetDescriptor {
                id: "d".into(),
                language: "eng".into(),
                country: None,
                split_sizes: SplitSizes::default(),
                source_path: PathBuf::new(),
            },
            records: vec![
                LabeledRecord::new("alpha beta", ["x"], &set, Split::Train),
                LabeledRecord::new("gamma", ["x"], &set, Split::Test),
            ],
            diagnostics: Diagnostics::new(),
        };
        let s = train_vocab_stats(&d);
        assert_eq!(s.token_count, 2);
        assert!(!s.vocabulary.contains("gamma"));
    }

    proptest! {
        #[test]
        fn duplicate_token_strictly_lowers_ttr(words in prop::collection::vec("[a-z]{1,4}", 1..30), pick in any::<prop::sample::Index>()) {
            let before = VocabStats::from_tokens(&words);
            let mut more = words.clone();
            more.push(words[pick.index(words.len())].clone());
            let after = VocabStats::from_tokens(&more);
            prop_assert!(after.ttr.unwrap() < before.ttr.unwrap());
            prop_assert!(before.type_count <= before.token_count);
        }

        #[test]
        fn novel_token_never_lowers_type_count(words in prop::collection::vec("[a-z]{1,4}", 0..30)) {
            let before = VocabStats::from_tokens(&words);
            let mut more = words.clone();
            more.push("NOVEL".to_string());
            prop_assert!(VocabStats::from_tokens(&more).type_count > before.type_count);
        }

        #[test]
        fn tokenize_idempotent_on_ascii(text in "[ -~]{0,60}") {
            let once = tokenize(&text);
            prop_assert_eq!(tokenize(&once.join(" ")), once);
        }

        #[test]
        fn offensive_flag_ignores_label_order(mut labels in prop::collection::vec("(hate|insult|none|other)", 0..6), seed in any::<u64>()) {
            let set = off(&["hate", "insult"]);
            let a = LabeledRecord::new("t", labels.clone(), &set, Split::Train).offensive;
            let n = labels.len().max(1);
            labels.rotate_left((seed as usize) % n);
            labels.reverse();
            let b = LabeledRecord::new("t", labels, &set, Split::Train).offensive;
            prop_assert_eq!(a, b);
        }

        #[test]
        fn records_round_trip_utf8(texts in prop::collection::vec("\\PC{0,20}", 1..8), jsonl in any::<bool>()) {
            let dir = tempfile::tempdir().unwrap();
            let set = off(&["hate"]);
            let records: Vec<_> = texts.iter().enumerate()
                .map(|(i, t)| LabeledRecord::new(t.clone(), [if i % 2 == 0 { "hate" } else { "none" }], &set, Split::Train))
                .collect();
            let (name, format) = if jsonl { ("r.jsonl", DataFormat::Jsonl) } else { ("r.tsv", DataFormat::Delimited) };
            let path = dir.path().join(name);
            write_records(&path, &records, format).unwrap();
            let e = ManifestEntry { id: "r".into(), language: "eng".into(), country: None, offensive_labels: set, format, path };
            let back = load_dataset(&e).unwrap();
            prop_assert_eq!(back.records, records);
        }
    }
}
