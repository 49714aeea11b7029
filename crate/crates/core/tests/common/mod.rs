#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use transfer_rank::eval::TransferMatrix;
use transfer_rank::features::{base_catalog, FeatureSet, FeatureTable, PairFeatureVector};

pub const OLD_IDS: [&str; 9] = [
    "COLD",
    "ChileOLD",
    "DeTox",
    "Hindi",
    "KOLD",
    "NJH_UK",
    "NJH_US",
    "PolEval",
    "TurkishOLD",
];

pub fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

pub fn published(name: &str) -> PathBuf {
    crate_dir().join("data/published").join(name)
}

pub fn toy_dir() -> PathBuf {
    crate_dir().join("data/toy")
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Nine targets whose gold rank is one fixed strictly decreasing function
/// of the `signal` feature (`signal = 1 / rank`). F1 values are random per
/// target; two noise features ride along.
pub fn monotone_fixture(seed: u64) -> (FeatureTable, TransferMatrix) {
    let mut r = rng(seed);
    let mut m = TransferMatrix::new();
    let mut rows = Vec::new();
    for t in OLD_IDS {
        m.insert(t, t, 0.95).unwrap();
        let mut transfers: Vec<&str> = OLD_IDS.iter().copied().filter(|s| *s != t).collect();
        transfers.shuffle(&mut r);
        let mut f1: Vec<f64> = (0..transfers.len())
            .map(|_| r.random_range(0.05..0.9))
            .collect();
        f1.sort_by(|a, b| b.total_cmp(a));
        f1.dedup();
        assert_eq!(f1.len(), transfers.len(), "tied F1 draw");
        for (rank, (s, f)) in transfers.iter().zip(&f1).enumerate() {
            m.insert(t, s, *f).unwrap();
            rows.push(
                PairFeatureVector::new(t, *s)
                    .with("noise_a", Some(r.random_range(0.0..1.0)))
                    .with("signal", Some(1.0 / (rank + 1) as f64))
                    .with("noise_b", Some(r.random_range(-5.0..5.0))),
            );
        }
    }
    let catalog = ["noise_a", "signal", "noise_b"].map(String::from).to_vec();
    (FeatureTable::new(catalog, rows).unwrap(), m)
}

/// Full-catalog table over the nine OLD ids. Every feature is noise except
/// those in `driver`, whose mean decides the gold F1.
pub fn group_driven_fixture(seed: u64, driver: FeatureSet) -> (FeatureTable, TransferMatrix) {
    let catalog = base_catalog();
    let mut r = rng(seed);
    let mut m = TransferMatrix::new();
    let mut rows = Vec::new();
    for t in OLD_IDS {
        m.insert(t, t, 0.9).unwrap();
        for s in OLD_IDS.iter().filter(|s| **s != t) {
            let mut v = PairFeatureVector::new(t, *s);
            let mut signal = Vec::new();
            for name in &catalog {
                let x: f64 = r.random_range(0.0..1.0);
                if driver.contains(name) {
                    signal.push(x);
                }
                v.values.insert(name.clone(), Some(x));
            }
            let mean = signal.iter().sum::<f64>() / signal.len() as f64;
            m.insert(t, s, 0.1 + 0.7 * mean).unwrap();
            rows.push(v);
        }
    }
    (FeatureTable::new(catalog, rows).unwrap(), m)
}

// Definitional metric oracles, written from the textbook formulas.

pub fn brute_dcg(order: &[String], rel: &BTreeMap<String, u32>, k: usize) -> f64 {
    let mut dcg = 0.0;
    for p in 1..=k.min(order.len()) {
        let r = rel.get(&order[p - 1]).copied().unwrap_or(0) as f64;
        dcg += (2f64.powf(r) - 1.0) * std::f64::consts::LN_2 / ((p + 1) as f64).ln();
    }
    dcg
}

pub fn brute_ndcg(order: &[String], rel: &BTreeMap<String, u32>, k: usize) -> f64 {
    let ids: Vec<String> = rel.keys().cloned().collect();
    let best = permutations(&ids)
        .iter()
        .map(|p| brute_dcg(p, rel, k))
        .fold(0.0, f64::max);
    if best == 0.0 {
        0.0
    } else {
        brute_dcg(order, rel, k) / best
    }
}

pub fn brute_map(order: &[String], relevant: &BTreeSet<String>, k: usize) -> f64 {
    if relevant.is_empty() {
        return 0.0;
    }
    let mut total = 0.0;
    for p in 1..=k.min(order.len()) {
        if relevant.contains(&order[p - 1]) {
            let prefix_hits = order[..p].iter().filter(|x| relevant.contains(*x)).count();
            total += prefix_hits as f64 / p as f64;
        }
    }
    total / k.min(relevant.len()) as f64
}

pub fn permutations(items: &[String]) -> Vec<Vec<String>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head.clone());
            out.push(tail);
        }
    }
    out
}

pub fn strings(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

/// Writes a copy of the toy config that sends output to `out`.
pub fn toy_config(dir: &Path, out: &Path) -> PathBuf {
    let text = std::fs::read_to_string(toy_dir().join("config.toml")).unwrap();
    let text = text.replace(
        "output_dir = \"out\"",
        &format!("output_dir = {:?}", out.display().to_string()),
    );
    let path = dir.join("config.toml");
    std::fs::write(&path, text).unwrap();
    path
}

pub fn cli(args: &[&str], config: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_transfer-rank"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--root")
        .arg(toy_dir())
        .env_remove("TRANSFER_RANK_ROOT")
        .output()
        .expect("binary runs")
}

/// Every file under `dir` with its bytes, keyed by relative path.
pub fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(
                    p.strip_prefix(dir).unwrap().to_path_buf(),
                    std::fs::read(&p).unwrap(),
                );
            }
        }
    }
    out
}
