//! Hofstede cultural-dimension profiles and the per-dimension ratio features.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::diag::Diagnostics;
use crate::error::{Error, Result};
use crate::io;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dimension {
    Pdi,
    Idv,
    Mas,
    Uai,
    Lto,
    Ivr,
}

impl Dimension {
    pub const ALL: [Dimension; 6] = [
        Dimension::Pdi,
        Dimension::Idv,
        Dimension::Mas,
        Dimension::Uai,
        Dimension::Lto,
        Dimension::Ivr,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Dimension::Pdi => "pdi",
            Dimension::Idv => "idv",
            Dimension::Mas => "mas",
            Dimension::Uai => "uai",
            Dimension::Lto => "lto",
            Dimension::Ivr => "ivr",
        }
    }

    /// Name of the ratio feature for this dimension, e.g. `Rc_pdi`.
    pub fn feature_name(self) -> &'static str {
        match self {
            Dimension::Pdi => "Rc_pdi",
            Dimension::Idv => "Rc_idv",
            Dimension::Mas => "Rc_mas",
            Dimension::Uai => "Rc_uai",
            Dimension::Lto => "Rc_lto",
            Dimension::Ivr => "Rc_ivr",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Dimension {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let s = s.strip_prefix("rc_").unwrap_or(&s);
        Dimension::ALL
            .into_iter()
            .find(|d| d.code() == s)
            .ok_or_else(|| Error::Config(format!("unknown cultural dimension `{s}`")))
    }
}

/// Six dimension scores in `[0, 100]`; `None` marks a dimension without a
/// score.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CulturalProfile {
    values: [Option<f64>; 6],
}

impl CulturalProfile {
    pub fn missing() -> Self {
        Self::default()
    }

    /// Builds a profile from raw table values, where a negative value (the
    /// `-1` convention) means "no score".
    pub fn from_raw(raw: [f64; 6]) -> Self {
        let mut values = [None; 6];
        for (slot, v) in values.iter_mut().zip(raw) {
            *slot = (v >= 0.0).then_some(v);
        }
        CulturalProfile { values }
    }

    pub fn from_options(values: [Option<f64>; 6]) -> Result<Self> {
        for (d, v) in Dimension::ALL.iter().zip(values) {
            if let Some(v) = v {
                if !(0.0..=100.0).contains(&v) {
                    return Err(Error::Config(format!("{d} value {v} outside [0, 100]")));
                }
            }
        }
        Ok(CulturalProfile { values })
    }

    pub fn get(&self, dim: Dimension) -> Option<f64> {
        self.values[dim.index()]
    }

    pub fn values(&self) -> [Option<f64>; 6] {
        self.values
    }

    pub fn is_complete(&self) -> bool {
        self.values.iter().all(Option::is_some)
    }

    pub fn is_fully_missing(&self) -> bool {
        self.values.iter().all(Option::is_none)
    }
}

/// Reads a `country,pdi,idv,mas,uai,lto,ivr` table. `-1`, empty and `NA`
/// cells are missing.
pub fn load_cultural_table(path: &Path) -> Result<BTreeMap<String, CulturalProfile>> {
    let table = io::read_delimited(path)?;
    let c_country = table.column("country")?;
    let cols = Dimension::ALL
        .iter()
        .map(|d| table.column(d.code()))
        .collect::<Result<Vec<_>>>()?;
    let mut out = BTreeMap::new();
    for (line, row) in &table.rows {
        let country = row.get(c_country).cloned().unwrap_or_default();
        if country.is_empty() {
            return Err(Error::record(path, *line, "empty country"));
        }
        let mut values = [None; 6];
        for (slot, &c) in values.iter_mut().zip(&cols) {
            let cell = row.get(c).map(String::as_str).unwrap_or("");
            if cell.is_empty() || cell == io::MISSING {
                continue;
            }
            let v = io::parse_f64(&table, *line, cell)?;
            if v == -1.0 {
                continue;
            }
            if !(0.0..=100.0).contains(&v) {
                return Err(Error::record(
                    path,
                    *line,
                    format!("value {v} outside [0, 100]"),
                ));
            }
            *slot = Some(v);
        }
        if out
            .insert(country.clone(), CulturalProfile { values })
            .is_some()
        {
            return Err(Error::record(
                path,
                *line,
                format!("duplicate country `{country}`"),
            ));
        }
    }
    Ok(out)
}

/// Reads a `language,country` table listing, per language, the countries
/// where it is the sole official language.
pub fn load_official_languages(path: &Path) -> Result<BTreeMap<String, BTreeSet<String>>> {
    let table = io::read_delimited(path)?;
    let c_lang = table.column("language")?;
    let c_country = table.column("country")?;
    let mut out: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for (line, row) in &table.rows {
        let lang = row.get(c_lang).cloned().unwrap_or_default();
        let country = row.get(c_country).cloned().unwrap_or_default();
        if lang.is_empty() || country.is_empty() {
            return Err(Error::record(
                path,
                *line,
                "language and country are required",
            ));
        }
        out.entry(lang).or_default().insert(country);
    }
    Ok(out)
}

/// Language-level profile: per-dimension mean over the language's
/// sole-official countries, skipping countries without a score for that
/// dimension.
pub fn language_culture_from_countries(
    language: &str,
    country_profiles: &BTreeMap<String, CulturalProfile>,
    official_language_map: &BTreeMap<String, BTreeSet<String>>,
    diagnostics: &mut Diagnostics,
) -> CulturalProfile {
    let Some(countries) = official_language_map.get(language) else {
        diagnostics.warn(format!(
            "language `{language}` has no official-language countries; cultural profile missing"
        ));
        return CulturalProfile::missing();
    };
    let mut sums = [0.0f64; 6];
    let mut counts = [0usize; 6];
    for country in countries {
        let Some(profile) = country_profiles.get(country) else {
            diagnostics.warn(format!(
                "country `{country}` (official for `{language}`) has no cultural values"
            ));
            continue;
        };
        for d in Dimension::ALL {
            if let Some(v) = profile.get(d) {
                sums[d.index()] += v;
                counts[d.index()] += 1;
            }
        }
    }
    let mut values = [None; 6];
    for i in 0..6 {
        if counts[i] > 0 {
            values[i] = Some(sums[i] / counts[i] as f64);
        }
    }
    CulturalProfile { values }
}

/// `Rc_i = c_i(transfer) / c_i(target)` for each dimension. Missing on
/// either side, or a zero target value, yields a missing feature.
pub fn cultural_ratio_features(
    target: &CulturalProfile,
    transfer: &CulturalProfile,
    diagnostics: &mut Diagnostics,
) -> Vec<(String, Option<f64>)> {
    Dimension::ALL
        .iter()
        .map(|&d| {
            let value = match (transfer.get(d), target.get(d)) {
                (Some(_), Some(0.0)) => {
                    diagnostics.warn(format!(
                        "{}: target value is 0, ratio undefined (divide by zero)",
                        d.feature_name()
                    ));
                    None
                }
                (Some(s), Some(t)) => Some(s / t),
                _ => None,
            };
            (d.feature_name().to_string(), value)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn china() -> CulturalProfile {
        CulturalProfile::from_raw([80.0, 20.0, 66.0, 30.0, 87.0, 24.0])
    }
    fn germany() -> CulturalProfile {
        CulturalProfile::from_raw([35.0, 67.0, 66.0, 65.0, 83.0, 40.0])
    }
    fn turkey() -> CulturalProfile {
        CulturalProfile::from_raw([66.0, 37.0, 45.0, 85.0, 46.0, 49.0])
    }

    fn ratio(target: &CulturalProfile, transfer: &CulturalProfile, d: Dimension) -> Option<f64> {
        let mut diag = Diagnostics::new();
        cultural_ratio_features(target, transfer, &mut diag)
            .into_iter()
            .find(|(n, _)| n == d.feature_name())
            .unwrap()
            .1
    }

    #[test]
    fn table_ratios() {
        assert_eq!(ratio(&china(), &germany(), Dimension::Pdi), Some(0.4375));
        let uai = ratio(&china(), &turkey(), Dimension::Uai).unwrap();
        assert!((uai - 85.0 / 30.0).abs() < 1e-12);
        assert!((uai - 2.8333).abs() < 1e-4);
    }

    #[test]
    fn identical_profiles_give_unit_ratios() {
        let mut diag = Diagnostics::new();
        for (_, v) in cultural_ratio_features(&turkey(), &turkey(), &mut diag) {
            assert_eq!(v, Some(1.0));
        }
    }

    #[test]
    fn zero_target_is_missing_with_note() {
        let mut zero = china();
        zero.values[Dimension::Ivr.index()] = Some(0.0);
        let mut diag = Diagnostics::new();
        let feats = cultural_ratio_features(&zero, &germany(), &mut diag);
        assert_eq!(feats[5], ("Rc_ivr".to_string(), None));
        assert!(diag.mentions("divide by zero"));
    }

    #[test]
    fn missing_dimension_propagates() {
        let partial = CulturalProfile::from_raw([90.0, 25.0, 40.0, 80.0, -1.0, -1.0]);
        assert_eq!(ratio(&china(), &partial, Dimension::Lto), None);
        assert_eq!(ratio(&partial, &china(), Dimension::Ivr), None);
        assert!(ratio(&partial, &china(), Dimension::Pdi).is_some());
    }

    fn table10_subset() -> (
        BTreeMap<String, CulturalProfile>,
        BTreeMap<String, BTreeSet<String>>,
    ) {
        let rows: &[(&str, [f64; 6])] = &[
            ("CN", [80.0, 20.0, 66.0, 30.0, 87.0, 24.0]),
            ("AT", [11.0, 55.0, 79.0, 70.0, 60.0, 63.0]),
            ("DE", [35.0, 67.0, 66.0, 65.0, 83.0, 40.0]),
            ("EG", [80.0, 37.0, 55.0, 55.0, 42.0, 0.0]),
            ("JO", [70.0, 30.0, 45.0, 65.0, 16.0, 43.0]),
            ("KW", [90.0, 25.0, 40.0, 80.0, -1.0, -1.0]),
            ("LB", [62.0, 43.0, 48.0, 57.0, 22.0, 10.0]),
            ("LY", [100.0, 35.0, 66.0, 67.0, 15.0, 74.0]),
            ("QA", [93.0, 25.0, 55.0, 80.0, -1.0, -1.0]),
            ("SA", [72.0, 48.0, 43.0, 64.0, 27.0, 14.0]),
            ("SY", [80.0, 35.0, 52.0, 60.0, 30.0, -1.0]),
            ("TN", [70.0, 40.0, 40.0, 75.0, -1.0, -1.0]),
            ("AE", [74.0, 36.0, 52.0, 66.0, 22.0, 22.0]),
        ];
        let profiles = rows
            .iter()
            .map(|(c, v)| (c.to_string(), CulturalProfile::from_raw(*v)))
            .collect();
        let mut map: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        map.entry("zho".into()).or_default().insert("CN".into());
        for c in ["AT", "DE"] {
            map.entry("deu".into()).or_default().insert(c.into());
        }
        for c in ["EG", "JO", "KW", "LB", "LY", "QA", "SA", "SY", "TN", "AE"] {
            map.entry("ara".into()).or_default().insert(c.into());
        }
        (profiles, map)
    }

    #[test]
    fn language_profiles_average_countries() {
        let (profiles, map) = table10_subset();
        let mut diag = Diagnostics::new();
        let zho = language_culture_from_countries("zho", &profiles, &map, &mut diag);
        assert_eq!(zho, china());
        let deu = language_culture_from_countries("deu", &profiles, &map, &mut diag);
        assert_eq!(deu.get(Dimension::Pdi), Some(23.0));
        let ara = language_culture_from_countries("ara", &profiles, &map, &mut diag);
        assert!((ara.get(Dimension::Lto).unwrap() - 174.0 / 7.0).abs() < 1e-9);
        assert!(diag.is_empty());
    }

    #[test]
    fn unknown_language_is_fully_missing() {
        let (profiles, map) = table10_subset();
        let mut diag = Diagnostics::new();
        let p = language_culture_from_countries("tam", &profiles, &map, &mut diag);
        assert!(p.is_fully_missing());
        assert_eq!(diag.len(), 1);
    }

    #[test]
    fn table_loader_maps_sentinels_to_missing() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        std::fs::write(
            &path,
            "country,pdi,idv,mas,uai,lto,ivr\nKW,90,25,40,80,-1,\nEG,80,37,55,55,42,0\n",
        )
        .unwrap();
        let t = load_cultural_table(&path).unwrap();
        assert_eq!(t["KW"].get(Dimension::Lto), None);
        assert_eq!(t["KW"].get(Dimension::Ivr), None);
        assert_eq!(t["EG"].get(Dimension::Ivr), Some(0.0));

        std::fs::write(&path, "country,pdi,idv,mas,uai,lto,ivr\nXX,101,1,1,1,1,1\n").unwrap();
        assert!(matches!(
            load_cultural_table(&path),
            Err(Error::Record { line: 2, .. })
        ));
    }

    proptest! {
        #[test]
        fn ratios_are_reciprocal(a in prop::array::uniform6(1.0f64..100.0), b in prop::array::uniform6(1.0f64..100.0)) {
            let (pa, pb) = (CulturalProfile::from_raw(a), CulturalProfile::from_raw(b));
            for d in Dimension::ALL {
                let prod = ratio(&pa, &pb, d).unwrap() * ratio(&pb, &pa, d).unwrap();
                prop_assert!((prod - 1.0).abs() < 1e-12);
            }
        }
    }
}
