//! Gradient-boosted regression trees trained with LambdaRank gradients.
//!
//! Each boosting round computes per-document lambdas from pairwise logistic
//! losses weighted by the NDCG@k change of swapping the pair, fits one
//! regression tree to them, and adds `learning_rate * tree` to the scores.
//! Boosting is first-order (leaf value = mean lambda) and split search is
//! exact over raw feature values, so training is fully deterministic.

mod lambda;
mod tree;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::features::PairFeatureVector;

pub use tree::{Node, RegressionTree};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub num_trees: usize,
    pub max_leaves: usize,
    pub min_samples_per_leaf: usize,
    pub max_depth: Option<usize>,
    pub learning_rate: f64,
    /// NDCG truncation used by the lambda weights.
    pub ndcg_truncation: usize,
    pub sigmoid_scale: f64,
    /// Recorded with the model. Training itself draws no random numbers.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            num_trees: 100,
            max_leaves: 8,
            min_samples_per_leaf: 1,
            max_depth: None,
            learning_rate: 0.1,
            ndcg_truncation: 3,
            sigmoid_scale: 1.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("train config: {m}")));
        if self.max_leaves == 0 {
            return bad("max_leaves must be positive");
        }
        if self.min_samples_per_leaf == 0 {
            return bad("min_samples_per_leaf must be positive");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate must be a positive real");
        }
        if self.ndcg_truncation == 0 {
            return bad("ndcg_truncation must be positive");
        }
        if !(self.sigmoid_scale.is_finite() && self.sigmoid_scale > 0.0) {
            return bad("sigmoid_scale must be a positive real");
        }
        if self.max_depth == Some(0) {
            return bad("max_depth must be positive when set");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub features: PairFeatureVector,
    pub relevance: u32,
}

impl Candidate {
    pub fn id(&self) -> &str {
        &self.features.transfer_id
    }
}

/// All candidates for one target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryGroup {
    pub target_id: String,
    pub candidates: Vec<Candidate>,
}

impl QueryGroup {
    fn has_distinct_labels(&self) -> bool {
        self.candidates
            .windows(2)
            .any(|w| w[0].relevance != w[1].relevance)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankerModel {
    pub trees: Vec<RegressionTree>,
    pub learning_rate: f64,
    pub feature_catalog: Vec<String>,
    pub training_config: TrainConfig,
    /// Free-form provenance written by callers, such as a config hash.
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

const FORMAT_TAG: &str = "transfer-rank-model";
const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDocument {
    format: String,
    version: u32,
    #[serde(flatten)]
    model: RankerModel,
}

impl RankerModel {
    pub fn empty(feature_catalog: Vec<String>, training_config: TrainConfig) -> Self {
        RankerModel {
            trees: Vec::new(),
            learning_rate: training_config.learning_rate,
            feature_catalog,
            training_config,
            metadata: BTreeMap::new(),
        }
    }

    /// `sum_t learning_rate * tree_t(row)` for a row in catalog order.
    pub fn score_row(&self, row: &[Option<f64>]) -> f64 {
        self.trees
            .iter()
            .map(|t| self.learning_rate * t.predict(row))
            .sum()
    }

    fn row_of(&self, x: &PairFeatureVector) -> Result<Vec<Option<f64>>> {
        self.feature_catalog
            .iter()
            .map(|name| {
                x.get(name).ok_or_else(|| {
                    Error::Scoring(format!(
                        "feature `{name}` missing from vector ({}, {})",
                        x.target_id, x.transfer_id
                    ))
                })
            })
            .collect()
    }

    pub fn score(&self, x: &PairFeatureVector) -> Result<f64> {
        Ok(self.score_row(&self.row_of(x)?))
    }

    /// Candidate ids by descending score, ties by ascending id.
    pub fn rank(&self, candidates: &[PairFeatureVector]) -> Result<Vec<String>> {
        let mut scored = candidates
            .iter()
            .map(|c| Ok((self.score(c)?, c.transfer_id.clone())))
            .collect::<Result<Vec<_>>>()?;
        Ok(order_by_score(&mut scored))
    }

    pub fn rank_group(&self, group: &QueryGroup) -> Result<Vec<String>> {
        let xs: Vec<PairFeatureVector> = group
            .candidates
            .iter()
            .map(|c| c.features.clone())
            .collect();
        self.rank(&xs)
    }

    /// Self-describing JSON document; identical models give identical bytes.
    pub fn save(&self) -> String {
        let doc = ModelDocument {
            format: FORMAT_TAG.to_string(),
            version: FORMAT_VERSION,
            model: self.clone(),
        };
        let mut s = serde_json::to_string_pretty(&doc).expect("model serialises");
        s.push('\n');
        s
    }

    pub fn load(document: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(document)
            .map_err(|e| Error::Model(format!("unreadable document: {e}")))?;
        match value.get("format").and_then(|v| v.as_str()) {
            Some(FORMAT_TAG) => {}
            other => return Err(Error::Model(format!("unexpected format tag {other:?}"))),
        }
        match value.get("version").and_then(|v| v.as_u64()) {
            Some(v) if v == FORMAT_VERSION as u64 => {}
            other => {
                return Err(Error::Model(format!(
                    "unsupported version {other:?}, expected {FORMAT_VERSION}"
                )))
            }
        }
        let doc: ModelDocument = serde_json::from_value(value)
            .map_err(|e| Error::Model(format!("malformed document: {e}")))?;
        let model = doc.model;
        if !(model.learning_rate.is_finite() && model.learning_rate > 0.0) {
            return Err(Error::Model("learning_rate must be a positive real".into()));
        }
        for (i, t) in model.trees.iter().enumerate() {
            t.validate(model.feature_catalog.len())
                .map_err(|m| Error::Model(format!("tree {i}: {m}")))?;
        }
        Ok(model)
    }
}

/// Sorts `(score, id)` by descending score, ties by ascending id.
pub fn order_by_score(scored: &mut [(f64, String)]) -> Vec<String> {
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
    scored.iter().map(|(_, id)| id.clone()).collect()
}

/// Per-round training diagnostics.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    /// Mean training NDCG@k over groups with a nonzero ideal DCG, before
    /// round 0 and after each round.
    pub mean_ndcg: Vec<f64>,
}

pub fn train(groups: &[QueryGroup], config: &TrainConfig) -> Result<RankerModel> {
    train_with(groups, config, Exec::default()).map(|(m, _)| m)
}

/// Trains with an explicit execution strategy; the result is identical for
/// every strategy.
pub fn train_with(
    groups: &[QueryGroup],
    config: &TrainConfig,
    exec: Exec,
) -> Result<(RankerModel, TrainTrace)> {
    config.validate()?;
    if groups.is_empty() {
        return Err(Error::Training("no query groups".into()));
    }
    let catalog: Vec<String> = groups[0]
        .candidates
        .first()
        .map(|c| c.features.names().cloned().collect())
        .unwrap_or_default();
    for g in groups {
        if g.candidates.len() < 2 {
            return Err(Error::Training(format!(
                "group `{}` has {} candidates, need at least 2",
                g.target_id,
                g.candidates.len()
            )));
        }
        for c in &g.candidates {
            if !c.features.names().eq(catalog.iter()) {
                return Err(Error::Training(format!(
                    "candidate ({}, {}) does not share the feature catalog",
                    c.features.target_id, c.features.transfer_id
                )));
            }
            if let Some((name, _)) = c
                .features
                .values
                .iter()
                .find(|(_, v)| v.is_some_and(|x| !x.is_finite()))
            {
                return Err(Error::Training(format!(
                    "non-finite value for `{name}` in ({}, {})",
                    c.features.target_id, c.features.transfer_id
                )));
            }
        }
    }
    if !groups.iter().any(QueryGroup::has_distinct_labels) {
        return Err(Error::Training(
            "degenerate labels: every group has equal relevance".into(),
        ));
    }

    // Flatten into a column-major matrix with group offsets.
    let n_docs: usize = groups.iter().map(|g| g.candidates.len()).sum();
    let mut columns: Vec<Vec<Option<f64>>> = vec![Vec::with_capacity(n_docs); catalog.len()];
    let mut labels = Vec::with_capacity(n_docs);
    let mut bounds = Vec::with_capacity(groups.len());
    for g in groups {
        let start = labels.len();
        for c in &g.candidates {
            for (col, v) in columns.iter_mut().zip(c.features.values.values()) {
                col.push(*v);
            }
            labels.push(c.relevance);
        }
        bounds.push(start..labels.len());
    }

    let k = config.ndcg_truncation;
    let mean_ndcg = |scores: &[f64]| {
        let vals: Vec<f64> = bounds
            .iter()
            .filter_map(|r| lambda::ndcg(&scores[r.clone()], &labels[r.clone()], k))
            .collect();
        if vals.is_empty() {
            0.0
        } else {
            vals.iter().sum::<f64>() / vals.len() as f64
        }
    };

    let params = tree::TreeParams {
        max_leaves: config.max_leaves,
        min_samples_per_leaf: config.min_samples_per_leaf,
        max_depth: config.max_depth,
    };
    let data = tree::Columns { columns: &columns };
    let mut scores = vec![0.0; n_docs];
    let mut trace = TrainTrace {
        mean_ndcg: vec![mean_ndcg(&scores)],
    };
    let mut model = RankerModel::empty(catalog, config.clone());

    for _ in 0..config.num_trees {
        let mut targets = vec![0.0; n_docs];
        for r in &bounds {
            let l = lambda::lambdas(
                &scores[r.clone()],
                &labels[r.clone()],
                k,
                config.sigmoid_scale,
            );
            targets[r.clone()].copy_from_slice(&l);
        }
        let (tree, assignment) = tree::fit(&data, &targets, (0..n_docs).collect(), params, exec);
        let stalled = tree.nodes.len() == 1;
        for (doc, leaf) in assignment {
            if let Node::Leaf { value } = tree.nodes[leaf] {
                scores[doc] += config.learning_rate * value;
            }
        }
        model.trees.push(tree);
        trace.mean_ndcg.push(mean_ndcg(&scores));
        // A tree without a split leaves the scores, and hence every later
        // round, unchanged.
        if stalled {
            break;
        }
    }
    Ok((model, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn vector(target: &str, id: &str, x: f64) -> PairFeatureVector {
        PairFeatureVector::new(target, id).with("f", Some(x))
    }

    fn stump(threshold: f64, missing_left: bool) -> RankerModel {
        let mut m = RankerModel::empty(
            vec!["f".into()],
            TrainConfig {
                learning_rate: 1.0,
                ..Default::default()
            },
        );
        m.trees.push(RegressionTree {
            nodes: vec![
                Node::Split {
                    feature: 0,
                    threshold,
                    missing_left,
                    left: 1,
                    right: 2,
                },
                Node::Leaf { value: -1.0 },
                Node::Leaf { value: 1.0 },
            ],
        });
        m
    }

    #[test]
    fn empty_ensemble_scores_zero() {
        let m = RankerModel::empty(vec!["f".into()], TrainConfig::default());
        assert_eq!(m.score(&vector("t", "a", 3.0)).unwrap(), 0.0);
    }

    #[test]
    fn tie_at_threshold_goes_left() {
        let m = stump(0.5, false);
        assert_eq!(m.score(&vector("t", "a", 0.5)).unwrap(), -1.0);
        assert_eq!(m.score(&vector("t", "a", 0.6)).unwrap(), 1.0);
    }

    #[test]
    fn missing_follows_learned_direction() {
        let m = stump(0.5, false);
        let x = PairFeatureVector::new("t", "a").with("f", None);
        assert_eq!(m.score(&x).unwrap(), 1.0);
        assert_eq!(stump(0.5, true).score(&x).unwrap(), -1.0);
    }

    #[test]
    fn absent_feature_is_a_scoring_error() {
        let m = stump(0.5, false);
        let x = PairFeatureVector::new("t", "a").with("g", Some(1.0));
        assert!(matches!(m.score(&x), Err(Error::Scoring(_))));
    }

    #[test]
    fn rank_orders_and_breaks_ties_by_id() {
        let mut scored = vec![
            (0.9, "a".to_string()),
            (0.1, "b".to_string()),
            (0.5, "c".to_string()),
        ];
        assert_eq!(order_by_score(&mut scored), ["a", "c", "b"]);
        let mut tied = vec![
            (0.0, "c".to_string()),
            (0.0, "a".to_string()),
            (0.0, "b".to_string()),
        ];
        assert_eq!(order_by_score(&mut tied), ["a", "b", "c"]);
        let m = RankerModel::empty(vec!["f".into()], TrainConfig::default());
        assert_eq!(m.rank(&[vector("t", "only", 1.0)]).unwrap(), ["only"]);
    }

    fn monotone_groups(n_groups: usize, per_group: usize) -> Vec<QueryGroup> {
        (0..n_groups)
            .map(|g| QueryGroup {
                target_id: format!("t{g}"),
                candidates: (0..per_group)
                    .map(|c| {
                        let x = (c * 10 + g) as f64;
                        Candidate {
                            features: PairFeatureVector::new(format!("t{g}"), format!("c{c}"))
                                .with("signal", Some(x))
                                .with("noise", Some(((g * 31 + c * 17) % 7) as f64)),
                            relevance: (c as u32 + 4).saturating_sub(per_group as u32),
                        }
                    })
                    .collect(),
            })
            .collect()
    }

    #[test]
    fn single_round_stump_follows_lambda_signs() {
        let groups = vec![QueryGroup {
            target_id: "t".into(),
            candidates: vec![
                Candidate {
                    features: vector("t", "a", 0.0),
                    relevance: 0,
                },
                Candidate {
                    features: vector("t", "b", 1.0),
                    relevance: 3,
                },
            ],
        }];
        let cfg = TrainConfig {
            num_trees: 1,
            max_leaves: 2,
            ..Default::default()
        };
        let m = train(&groups, &cfg).unwrap();
        let t = &m.trees[0];
        assert_eq!(t.leaf_count(), 2);
        assert!(t.predict(&[Some(0.0)]) < 0.0);
        assert!(t.predict(&[Some(1.0)]) > 0.0);
    }

    #[test]
    fn zero_trees_rank_in_id_order() {
        let groups = monotone_groups(3, 5);
        let cfg = TrainConfig {
            num_trees: 0,
            ..Default::default()
        };
        let m = train(&groups, &cfg).unwrap();
        assert!(m.trees.is_empty());
        assert_eq!(
            m.rank_group(&groups[0]).unwrap(),
            ["c0", "c1", "c2", "c3", "c4"]
        );
    }

    #[test]
    fn degenerate_labels_rejected() {
        let mut groups = monotone_groups(2, 3);
        for g in &mut groups {
            for c in &mut g.candidates {
                c.relevance = 1;
            }
        }
        assert!(
            matches!(train(&groups, &TrainConfig::default()), Err(Error::Training(m)) if m.contains("degenerate"))
        );
    }

    #[test]
    fn non_finite_feature_rejected() {
        let mut groups = monotone_groups(2, 3);
        groups[0].candidates[0]
            .features
            .values
            .insert("signal".into(), Some(f64::NAN));
        assert!(matches!(
            train(&groups, &TrainConfig::default()),
            Err(Error::Training(_))
        ));
    }

    #[test]
    fn learns_monotone_signal() {
        let groups = monotone_groups(8, 5);
        let m = train(&groups, &TrainConfig::default()).unwrap();
        let held_out = &monotone_groups(9, 5)[8];
        assert_eq!(
            m.rank_group(held_out).unwrap(),
            ["c4", "c3", "c2", "c1", "c0"]
        );
    }

    #[test]
    fn training_ndcg_never_decreases_on_monotone_fixture() {
        let groups = monotone_groups(8, 5);
        let (_, trace) = train_with(&groups, &TrainConfig::default(), Exec::Sequential).unwrap();
        for w in trace.mean_ndcg.windows(2) {
            assert!(w[1] >= w[0] - 1e-12, "{:?}", trace.mean_ndcg);
        }
    }

    #[test]
    fn sequential_and_parallel_agree_bitwise() {
        let groups = monotone_groups(8, 6);
        let (a, _) = train_with(&groups, &TrainConfig::default(), Exec::Sequential).unwrap();
        let (b, _) = train_with(&groups, &TrainConfig::default(), Exec::Parallel).unwrap();
        assert_eq!(a.save(), b.save());
    }

    #[test]
    fn save_load_round_trip_and_corruption() {
        let groups = monotone_groups(4, 5);
        let m = train(
            &groups,
            &TrainConfig {
                num_trees: 10,
                ..Default::default()
            },
        )
        .unwrap();
        let doc = m.save();
        assert_eq!(RankerModel::load(&doc).unwrap(), m);
        assert_eq!(
            m.save(),
            train(
                &groups,
                &TrainConfig {
                    num_trees: 10,
                    ..Default::default()
                }
            )
            .unwrap()
            .save()
        );

        let empty = RankerModel::empty(vec!["f".into()], TrainConfig::default());
        let back = RankerModel::load(&empty.save()).unwrap();
        assert_eq!(back.score(&vector("t", "a", 1.0)).unwrap(), 0.0);

        assert!(RankerModel::load(&doc[..doc.len() / 2]).is_err());
        assert!(RankerModel::load(&doc.replace("\"version\": 1", "\"version\": 2")).is_err());
        assert!(RankerModel::load(&doc.replace("transfer-rank-model", "other")).is_err());
        let bad_child = doc.replacen("\"left\": 1", "\"left\": 0", 1);
        assert!(matches!(
            RankerModel::load(&bad_child),
            Err(Error::Model(_))
        ));
    }

    fn sse(v: &[f64]) -> f64 {
        if v.is_empty() {
            return 0.0;
        }
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|x| (x - m) * (x - m)).sum()
    }

    proptest! {
        #[test]
        fn every_split_strictly_reduces_squared_error(
            xs in prop::collection::vec(prop::option::weighted(0.8, -5.0f64..5.0), 2..40),
            seed in any::<u64>(),
        ) {
            let targets: Vec<f64> = xs.iter().enumerate()
                .map(|(i, _)| (((i as u64).wrapping_mul(seed | 1) >> 7) % 11) as f64 - 5.0)
                .collect();
            let columns = vec![xs.clone()];
            let params = tree::TreeParams { max_leaves: 6, min_samples_per_leaf: 1, max_depth: None };
            let (t, _) = tree::fit(&tree::Columns { columns: &columns }, &targets, (0..xs.len()).collect(), params, Exec::Sequential);
            // Recompute each internal node's partition and compare errors.
            fn check(t: &RegressionTree, node: usize, rows: Vec<usize>, xs: &[Option<f64>], y: &[f64]) -> bool {
                match &t.nodes[node] {
                    Node::Leaf { .. } => true,
                    Node::Split { threshold, missing_left, left, right, .. } => {
                        let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| match xs[i] {
                            Some(v) => v <= *threshold,
                            None => *missing_left,
                        });
                        let parent: Vec<f64> = rows.iter().map(|&i| y[i]).collect();
                        let lv: Vec<f64> = l.iter().map(|&i| y[i]).collect();
                        let rv: Vec<f64> = r.iter().map(|&i| y[i]).collect();
                        sse(&lv) + sse(&rv) < sse(&parent)
                            && check(t, *left, l, xs, y)
                            && check(t, *right, r, xs, y)
                    }
                }
            }
            prop_assert!(check(&t, 0, (0..xs.len()).collect(), &xs, &targets));
        }

        #[test]
        fn every_row_reaches_one_leaf(row in prop::collection::vec(prop::option::of(-10.0f64..10.0), 2)) {
            let groups = monotone_groups(4, 5);
            let m = train(&groups, &TrainConfig { num_trees: 20, ..Default::default() }).unwrap();
            for t in &m.trees {
                let leaf = t.leaf_index(&row);
                let is_leaf = matches!(t.nodes[leaf], Node::Leaf { .. });
                prop_assert!(is_leaf);
            }
            prop_assert!(m.score_row(&row).is_finite());
        }

        #[test]
        fn rank_depends_only_on_score_order(scale in 0.01f64..100.0, raw in prop::collection::vec(-10.0f64..10.0, 1..8)) {
            let mut a: Vec<(f64, String)> = raw.iter().enumerate().map(|(i, s)| (*s, format!("c{i}"))).collect();
            let mut b: Vec<(f64, String)> = raw.iter().enumerate().map(|(i, s)| (*s * scale, format!("c{i}"))).collect();
            prop_assert_eq!(order_by_score(&mut a), order_by_score(&mut b));
        }
    }
}
