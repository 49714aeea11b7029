//! Gold rankings, ranking metrics and the evaluation protocols.
//!
//! The transfer matrix holds one macro-F1 per directed `(target, transfer)`
//! pair. Sorting a target's row gives its gold ranking; the ranker is then
//! scored against it with MAP@k and NDCG@k under query-level leave-one-out.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diag::Diagnostics;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::features::{Dimension, FeatureSelection, FeatureTable};
use crate::io;
use crate::ranker::{self, Candidate, QueryGroup, TrainConfig};

/// Macro-F1 per directed pair, including intra cells (`target == transfer`).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TransferMatrix {
    scores: BTreeMap<(String, String), f64>,
}

impl TransferMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, target: &str, transfer: &str, f1: f64) -> Result<()> {
        if !(f1.is_finite() && (0.0..=1.0).contains(&f1)) {
            return Err(Error::Protocol(format!(
                "macro-F1 for ({target}, {transfer}) is {f1}, outside [0, 1]"
            )));
        }
        let key = (target.to_string(), transfer.to_string());
        if self.scores.insert(key, f1).is_some() {
            return Err(Error::Protocol(format!(
                "duplicate cell ({target}, {transfer})"
            )));
        }
        Ok(())
    }

    pub fn get(&self, target: &str, transfer: &str) -> Option<f64> {
        self.scores
            .get(&(target.to_string(), transfer.to_string()))
            .copied()
    }

    pub fn intra(&self, target: &str) -> Option<f64> {
        self.get(target, target)
    }

    /// Every id that appears on either side.
    pub fn dataset_ids(&self) -> BTreeSet<String> {
        self.scores
            .keys()
            .flat_map(|(a, b)| [a.clone(), b.clone()])
            .collect()
    }

    /// Ids that have at least one cross cell as target.
    pub fn targets(&self) -> BTreeSet<String> {
        self.scores
            .keys()
            .filter(|(a, b)| a != b)
            .map(|(a, _)| a.clone())
            .collect()
    }

    pub fn cells(&self) -> impl Iterator<Item = (&str, &str, f64)> {
        self.scores
            .iter()
            .map(|((a, b), v)| (a.as_str(), b.as_str(), *v))
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Reads `target_id, transfer_id, macro_f1`.
    pub fn load(path: &Path) -> Result<Self> {
        let t = io::read_delimited(path)?;
        let (a, b, f) = (
            t.column("target_id")?,
            t.column("transfer_id")?,
            t.column("macro_f1")?,
        );
        let mut m = TransferMatrix::new();
        for (line, row) in &t.rows {
            let field = |i: usize| row.get(i).map(String::as_str).unwrap_or("");
            if field(a).is_empty() || field(b).is_empty() {
                return Err(Error::record(path, *line, "empty dataset id"));
            }
            let v = io::parse_f64(&t, *line, field(f))?;
            m.insert(field(a), field(b), v)
                .map_err(|e| Error::record(path, *line, e.to_string()))?;
        }
        Ok(m)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoldRanking {
    pub target_id: String,
    /// Best first.
    pub order: Vec<String>,
    pub relevance: BTreeMap<String, u32>,
}

impl GoldRanking {
    pub fn top(&self, k: usize) -> &[String] {
        &self.order[..k.min(self.order.len())]
    }

    pub fn relevant_set(&self, k: usize) -> BTreeSet<String> {
        self.top(k).iter().cloned().collect()
    }
}

/// `max(0, k + 1 - rank)` for 1-based `rank`.
pub fn graded_relevance(rank: usize, k: usize) -> u32 {
    (k + 1).saturating_sub(rank) as u32
}

/// One ranking per target: candidates by descending macro-F1, ties by
/// ascending id. Every dataset in the matrix is a candidate for every other.
pub fn gold_rankings(matrix: &TransferMatrix, k: usize) -> Result<Vec<GoldRanking>> {
    if k == 0 {
        return Err(Error::Config("k must be positive".into()));
    }
    let ids = matrix.dataset_ids();
    let mut out = Vec::new();
    for target in matrix.targets() {
        let mut row = Vec::with_capacity(ids.len());
        for transfer in ids.iter().filter(|t| **t != target) {
            let f1 = matrix.get(&target, transfer).ok_or_else(|| {
                Error::Protocol(format!(
                    "transfer matrix has no cell ({target}, {transfer})"
                ))
            })?;
            row.push((f1, transfer.clone()));
        }
        if row.len() < 2 {
            return Err(Error::Protocol(format!(
                "target `{target}` has {} transfer candidates, need at least 2",
                row.len()
            )));
        }
        let order = ranker::order_by_score(&mut row);
        let relevance = order
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), graded_relevance(i + 1, k)))
            .collect();
        out.push(GoldRanking {
            target_id: target,
            order,
            relevance,
        });
    }
    Ok(out)
}

fn gain(rel: u32) -> f64 {
    2f64.powi(rel as i32) - 1.0
}

/// NDCG@k with exponential gains; ids absent from `relevance` count as 0.
/// Defined as 0 when the ideal DCG is 0.
pub fn ndcg_at_k(predicted: &[String], relevance: &BTreeMap<String, u32>, k: usize) -> f64 {
    let dcg: f64 = predicted
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, id)| gain(relevance.get(id).copied().unwrap_or(0)) / ((i + 2) as f64).log2())
        .sum();
    let mut ideal: Vec<u32> = relevance.values().copied().collect();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg: f64 = ideal
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, r)| gain(*r) / ((i + 2) as f64).log2())
        .sum();
    if idcg > 0.0 {
        dcg / idcg
    } else {
        0.0
    }
}

/// AP@k normalised by `min(k, |relevant|)`. An empty relevant set gives 0.
pub fn map_at_k(predicted: &[String], relevant: &BTreeSet<String>, k: usize) -> f64 {
    if relevant.is_empty() {
        log::warn!("average precision over an empty relevant set");
        return 0.0;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, id) in predicted.iter().take(k).enumerate() {
        if relevant.contains(id) {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    sum / k.min(relevant.len()) as f64
}

/// Query groups over the table rows, candidates in id order.
pub fn query_groups(table: &FeatureTable, golds: &[GoldRanking]) -> Result<Vec<QueryGroup>> {
    golds
        .iter()
        .map(|g| {
            let mut ids: Vec<&String> = g.order.iter().collect();
            ids.sort();
            let candidates = ids
                .into_iter()
                .map(|id| {
                    let features = table.get(&g.target_id, id).ok_or_else(|| {
                        Error::Protocol(format!("feature table has no row ({}, {id})", g.target_id))
                    })?;
                    Ok(Candidate {
                        features: features.clone(),
                        relevance: g.relevance[id],
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(QueryGroup {
                target_id: g.target_id.clone(),
                candidates,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetMetrics {
    pub target_id: String,
    pub map: f64,
    pub ndcg: f64,
    pub predicted: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkippedFold {
    pub target_id: String,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub k: usize,
    pub folds: usize,
    pub config_hash: String,
    pub seed: u64,
    pub features: Vec<String>,
}

/// Per-target metrics in `[0, 1]`; `*_percent` accessors give the reported
/// scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub label: String,
    pub per_target: Vec<TargetMetrics>,
    pub skipped: Vec<SkippedFold>,
    pub meta: ReportMeta,
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

impl MetricReport {
    pub fn mean_map(&self) -> Option<f64> {
        mean(self.per_target.iter().map(|t| t.map))
    }

    pub fn mean_ndcg(&self) -> Option<f64> {
        mean(self.per_target.iter().map(|t| t.ndcg))
    }

    pub fn map_percent(&self) -> Option<f64> {
        self.mean_map().map(|v| v * 100.0)
    }

    pub fn ndcg_percent(&self) -> Option<f64> {
        self.mean_ndcg().map(|v| v * 100.0)
    }

    pub fn target(&self, id: &str) -> Option<&TargetMetrics> {
        self.per_target.iter().find(|t| t.target_id == id)
    }

    /// One row per target plus `AVG`, metrics ×100.
    pub fn rows(&self) -> (Vec<String>, Vec<Vec<String>>) {
        let header = ["target", "MAP", "NDCG", "predicted"]
            .map(String::from)
            .to_vec();
        let mut rows: Vec<Vec<String>> = self
            .per_target
            .iter()
            .map(|t| {
                vec![
                    t.target_id.clone(),
                    pct(Some(t.map)),
                    pct(Some(t.ndcg)),
                    t.predicted.join(" "),
                ]
            })
            .collect();
        for s in &self.skipped {
            rows.push(vec![
                s.target_id.clone(),
                pct(None),
                pct(None),
                format!("skipped: {}", s.reason),
            ]);
        }
        rows.push(vec![
            "AVG".into(),
            pct(self.mean_map()),
            pct(self.mean_ndcg()),
            String::new(),
        ]);
        (header, rows)
    }
}

/// A `[0, 1]` metric as a two-decimal percentage.
pub fn pct(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{:.2}", x * 100.0),
        None => io::MISSING.to_string(),
    }
}

/// Settings shared by every protocol run.
#[derive(Clone, Debug)]
pub struct Protocol {
    pub k: usize,
    pub train: TrainConfig,
    pub exec: Exec,
    pub config_hash: String,
}

impl Default for Protocol {
    fn default() -> Self {
        Protocol {
            k: 3,
            train: TrainConfig::default(),
            exec: Exec::default(),
            config_hash: String::new(),
        }
    }
}

enum Fold {
    Done(TargetMetrics),
    Skipped(SkippedFold),
}

/// Query-level leave-one-out with a caller-supplied ranker.
///
/// `rank(train, held_out)` returns the held-out candidates best first, or a
/// training error that marks the fold as skipped.
pub fn leave_one_out_with<F>(
    groups: &[QueryGroup],
    golds: &[GoldRanking],
    k: usize,
    exec: Exec,
    rank: F,
) -> Result<(Vec<TargetMetrics>, Vec<SkippedFold>)>
where
    F: Fn(&[QueryGroup], &QueryGroup) -> Result<Vec<String>> + Sync + Send,
{
    if groups.len() < 3 {
        return Err(Error::Protocol(format!(
            "leave-one-out needs at least 3 targets, got {}",
            groups.len()
        )));
    }
    let folds = exec.map_range(groups.len(), |i| -> Result<Fold> {
        let held = &groups[i];
        let train: Vec<QueryGroup> = groups
            .iter()
            .filter(|g| g.target_id != held.target_id)
            .cloned()
            .collect();
        let gold = golds
            .iter()
            .find(|g| g.target_id == held.target_id)
            .ok_or_else(|| Error::Protocol(format!("no gold ranking for `{}`", held.target_id)))?;
        match rank(&train, held) {
            Ok(predicted) => Ok(Fold::Done(TargetMetrics {
                target_id: held.target_id.clone(),
                map: map_at_k(&predicted, &gold.relevant_set(k), k),
                ndcg: ndcg_at_k(&predicted, &gold.relevance, k),
                predicted,
            })),
            Err(Error::Training(reason)) => Ok(Fold::Skipped(SkippedFold {
                target_id: held.target_id.clone(),
                reason,
            })),
            Err(e) => Err(e),
        }
    });
    let mut done = Vec::new();
    let mut skipped = Vec::new();
    for f in folds {
        match f? {
            Fold::Done(m) => done.push(m),
            Fold::Skipped(s) => skipped.push(s),
        }
    }
    Ok((done, skipped))
}

/// Leave-one-out with the gradient-boosted ranker on an already projected
/// feature table.
pub fn leave_one_out(
    label: &str,
    table: &FeatureTable,
    matrix: &TransferMatrix,
    protocol: &Protocol,
    diagnostics: &mut Diagnostics,
) -> Result<MetricReport> {
    let golds = gold_rankings(matrix, protocol.k)?;
    let groups = query_groups(table, &golds)?;
    let train_config = TrainConfig {
        ndcg_truncation: protocol.k,
        ..protocol.train.clone()
    };
    let (per_target, skipped) =
        leave_one_out_with(&groups, &golds, protocol.k, protocol.exec, |train, held| {
            let (model, _) = ranker::train_with(train, &train_config, protocol.exec)?;
            model.rank_group(held)
        })?;
    for s in &skipped {
        diagnostics.warn(format!(
            "{label}: fold `{}` skipped: {}",
            s.target_id, s.reason
        ));
    }
    Ok(MetricReport {
        label: label.to_string(),
        meta: ReportMeta {
            k: protocol.k,
            folds: per_target.len(),
            config_hash: protocol.config_hash.clone(),
            seed: protocol.train.seed,
            features: table.catalog.clone(),
        },
        per_target,
        skipped,
    })
}

/// Runs leave-one-out on `selection` projected out of the full table.
pub fn evaluate_selection(
    full: &FeatureTable,
    selection: &FeatureSelection,
    matrix: &TransferMatrix,
    protocol: &Protocol,
    diagnostics: &mut Diagnostics,
) -> Result<MetricReport> {
    let table = full.select(selection)?;
    if table.catalog.is_empty() {
        return Err(Error::Config(format!(
            "selection `{}` resolves to no features",
            selection.label()
        )));
    }
    flag_empty_vectors(&table, &selection.label(), diagnostics);
    leave_one_out(&selection.label(), &table, matrix, protocol, diagnostics)
}

fn flag_empty_vectors(table: &FeatureTable, label: &str, diagnostics: &mut Diagnostics) {
    for r in &table.rows {
        if r.values.values().all(Option::is_none) {
            diagnostics.warn(format!(
                "{label}: every feature is missing for pair ({}, {})",
                r.target_id, r.transfer_id
            ));
        }
    }
}

/// The base selection with one cultural ratio removed.
pub fn ablate_dimension(
    full: &FeatureTable,
    base: &FeatureSelection,
    dim: Dimension,
    matrix: &TransferMatrix,
    protocol: &Protocol,
    diagnostics: &mut Diagnostics,
) -> Result<MetricReport> {
    let selection = base.without(dim.feature_name(), &full.catalog)?;
    let mut report = evaluate_selection(full, &selection, matrix, protocol, diagnostics)?;
    report.label = format!("-{}", dim.code());
    Ok(report)
}

/// `BEST` plus one row per dropped dimension, for each base selection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub bases: Vec<String>,
    pub rows: Vec<String>,
    /// `reports[base][row]`.
    pub reports: Vec<Vec<MetricReport>>,
}

pub fn ablation_study(
    full: &FeatureTable,
    bases: &[FeatureSelection],
    matrix: &TransferMatrix,
    protocol: &Protocol,
    diagnostics: &mut Diagnostics,
) -> Result<AblationTable> {
    let mut rows = vec!["BEST".to_string()];
    rows.extend(Dimension::ALL.iter().map(|d| format!("-{}", d.code())));
    let mut reports = Vec::with_capacity(bases.len());
    for base in bases {
        let mut col = Vec::with_capacity(rows.len());
        let mut best = evaluate_selection(full, base, matrix, protocol, diagnostics)?;
        best.label = "BEST".into();
        col.push(best);
        for dim in Dimension::ALL {
            col.push(ablate_dimension(
                full,
                base,
                dim,
                matrix,
                protocol,
                diagnostics,
            )?);
        }
        reports.push(col);
    }
    Ok(AblationTable {
        bases: bases.iter().map(FeatureSelection::label).collect(),
        rows,
        reports,
    })
}

impl AblationTable {
    pub fn table(&self) -> (Vec<String>, Vec<Vec<String>>) {
        let mut header = vec!["row".to_string()];
        for b in &self.bases {
            header.push(format!("{b} MAP"));
            header.push(format!("{b} NDCG"));
        }
        let rows = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, name)| {
                let mut row = vec![name.clone()];
                for col in &self.reports {
                    row.push(pct(col[i].mean_map()));
                    row.push(pct(col[i].mean_ndcg()));
                }
                row
            })
            .collect();
        (header, rows)
    }
}

/// Leave-one-out per feature group, laid out target × group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupSweep {
    pub groups: Vec<String>,
    pub reports: Vec<MetricReport>,
}

pub fn feature_group_sweep(
    full: &FeatureTable,
    groups: &[FeatureSelection],
    matrix: &TransferMatrix,
    protocol: &Protocol,
    diagnostics: &mut Diagnostics,
) -> Result<GroupSweep> {
    let reports = groups
        .iter()
        .map(|g| evaluate_selection(full, g, matrix, protocol, diagnostics))
        .collect::<Result<Vec<_>>>()?;
    Ok(GroupSweep {
        groups: groups.iter().map(FeatureSelection::label).collect(),
        reports,
    })
}

impl GroupSweep {
    pub fn targets(&self) -> BTreeSet<String> {
        self.reports
            .iter()
            .flat_map(|r| {
                r.per_target
                    .iter()
                    .map(|t| t.target_id.clone())
                    .chain(r.skipped.iter().map(|s| s.target_id.clone()))
            })
            .collect()
    }

    /// One row per target plus `AVG`; a MAP and an NDCG column per group.
    pub fn table(&self) -> (Vec<String>, Vec<Vec<String>>) {
        let mut header = vec!["target".to_string()];
        for g in &self.groups {
            header.push(format!("{g} MAP"));
            header.push(format!("{g} NDCG"));
        }
        let mut rows: Vec<Vec<String>> = self
            .targets()
            .into_iter()
            .map(|t| {
                let mut row = vec![t.clone()];
                for r in &self.reports {
                    let m = r.target(&t);
                    row.push(pct(m.map(|m| m.map)));
                    row.push(pct(m.map(|m| m.ndcg)));
                }
                row
            })
            .collect();
        let mut avg = vec!["AVG".to_string()];
        for r in &self.reports {
            avg.push(pct(r.mean_map()));
            avg.push(pct(r.mean_ndcg()));
        }
        rows.push(avg);
        (header, rows)
    }
}

/// `(intra - transfer) / intra * 100` per directed pair, the diagonal
/// included. `None` when the intra score is 0.
pub fn relative_loss(matrix: &TransferMatrix) -> Result<BTreeMap<(String, String), Option<f64>>> {
    let mut out = BTreeMap::new();
    for (target, transfer, f1) in matrix.cells() {
        let intra = matrix.intra(target).ok_or_else(|| {
            Error::Protocol(format!("transfer matrix has no intra cell for `{target}`"))
        })?;
        // Scaling to percent before subtracting keeps decimal inputs exact.
        let loss = (intra != 0.0).then(|| (intra * 100.0 - f1 * 100.0) / intra);
        out.insert((target.to_string(), transfer.to_string()), loss);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Top3Comparison {
    pub target_id: String,
    pub gold: Vec<String>,
    pub predicted: Vec<String>,
    /// Per predicted position: same id as gold at that position.
    pub exact: Vec<bool>,
    /// Per predicted position: id is somewhere in the gold top list.
    pub in_gold: Vec<bool>,
}

impl Top3Comparison {
    pub fn exact_matches(&self) -> usize {
        self.exact.iter().filter(|b| **b).count()
    }

    pub fn set_matches(&self) -> usize {
        self.in_gold.iter().filter(|b| **b).count()
    }
}

/// Compares the first `k` positions of two rankings.
pub fn top_k_comparison(
    target_id: &str,
    gold: &[String],
    predicted: &[String],
    k: usize,
) -> Top3Comparison {
    let gold: Vec<String> = gold.iter().take(k).cloned().collect();
    let predicted: Vec<String> = predicted.iter().take(k).cloned().collect();
    let exact = predicted
        .iter()
        .enumerate()
        .map(|(i, p)| gold.get(i) == Some(p))
        .collect();
    let in_gold = predicted.iter().map(|p| gold.contains(p)).collect();
    Top3Comparison {
        target_id: target_id.to_string(),
        gold,
        predicted,
        exact,
        in_gold,
    }
}

pub fn top3_comparison(target_id: &str, gold: &[String], predicted: &[String]) -> Top3Comparison {
    top_k_comparison(target_id, gold, predicted, 3)
}

/// Reads `target_id, rank, transfer_id` lists, returned best first.
pub fn load_ranking_lists(path: &Path) -> Result<BTreeMap<String, Vec<String>>> {
    let t = io::read_delimited(path)?;
    let (a, r, b) = (
        t.column("target_id")?,
        t.column("rank")?,
        t.column("transfer_id")?,
    );
    let mut raw: BTreeMap<String, BTreeMap<usize, String>> = BTreeMap::new();
    for (line, row) in &t.rows {
        let field = |i: usize| row.get(i).map(String::as_str).unwrap_or("");
        let rank: usize = field(r)
            .parse()
            .map_err(|_| Error::record(path, *line, format!("bad rank `{}`", field(r))))?;
        if raw
            .entry(field(a).to_string())
            .or_default()
            .insert(rank, field(b).to_string())
            .is_some()
        {
            return Err(Error::record(
                path,
                *line,
                format!("rank {rank} repeated for `{}`", field(a)),
            ));
        }
    }
    Ok(raw
        .into_iter()
        .map(|(t, ranks)| (t, ranks.into_values().collect()))
        .collect())
}
