//! Regression trees with exact greedy variance-reduction splits and a learned
//! direction for missing values.

use serde::{Deserialize, Serialize};

use crate::exec::Exec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    /// `value <= threshold` goes left, larger values right, missing values
    /// follow `missing_left`.
    Split {
        feature: usize,
        threshold: f64,
        missing_left: bool,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// Nodes stored with the root at index 0; children always have larger
/// indices than their parent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn leaf(value: f64) -> Self {
        RegressionTree {
            nodes: vec![Node::Leaf { value }],
        }
    }

    /// Index of the leaf a row lands in.
    pub fn leaf_index(&self, row: &[Option<f64>]) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Split {
                    feature,
                    threshold,
                    missing_left,
                    left,
                    right,
                } => {
                    let go_left = match row[*feature] {
                        Some(v) => v <= *threshold,
                        None => *missing_left,
                    };
                    i = if go_left { *left } else { *right };
                }
            }
        }
    }

    pub fn predict(&self, row: &[Option<f64>]) -> f64 {
        match self.nodes[self.leaf_index(row)] {
            Node::Leaf { value } => value,
            Node::Split { .. } => unreachable!("leaf_index returns leaves"),
        }
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }

    /// Structural validity for a catalog of `n_features`.
    pub fn validate(&self, n_features: usize) -> Result<(), String> {
        if self.nodes.is_empty() {
            return Err("tree has no nodes".into());
        }
        let mut parents = vec![0usize; self.nodes.len()];
        for (i, node) in self.nodes.iter().enumerate() {
            match node {
                Node::Leaf { value } if !value.is_finite() => {
                    return Err(format!("node {i}: non-finite leaf value"));
                }
                Node::Leaf { .. } => {}
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    if *feature >= n_features {
                        return Err(format!("node {i}: feature index {feature} outside catalog"));
                    }
                    if !threshold.is_finite() {
                        return Err(format!("node {i}: non-finite threshold"));
                    }
                    for &c in [left, right] {
                        if c <= i || c >= self.nodes.len() {
                            return Err(format!("node {i}: bad child index {c}"));
                        }
                        parents[c] += 1;
                    }
                }
            }
        }
        if parents[0] != 0 || parents[1..].iter().any(|&p| p != 1) {
            return Err("nodes do not form a tree".into());
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct TreeParams {
    pub max_leaves: usize,
    pub min_samples_per_leaf: usize,
    pub max_depth: Option<usize>,
}

#[derive(Clone, Debug)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
    missing_left: bool,
    left: Vec<usize>,
    right: Vec<usize>,
}

struct OpenLeaf {
    node: usize,
    depth: usize,
    samples: Vec<usize>,
    best: Option<Candidate>,
}

/// Minimum gain for a split to count as a strict reduction, relative to the
/// node's sum of squared targets.
const GAIN_EPS: f64 = 1e-12;

/// Column-major feature matrix: `columns[f][sample]`.
pub(crate) struct Columns<'a> {
    pub columns: &'a [Vec<Option<f64>>],
}

/// Leaf-wise (best-first) growth. Returns the tree and, per sample, the node
/// index of its leaf.
pub(crate) fn fit(
    data: &Columns<'_>,
    targets: &[f64],
    samples: Vec<usize>,
    params: TreeParams,
    exec: Exec,
) -> (RegressionTree, Vec<(usize, usize)>) {
    let mut nodes = vec![Node::Leaf { value: 0.0 }];
    let mut open = vec![OpenLeaf {
        node: 0,
        depth: 0,
        best: None,
        samples,
    }];
    open[0].best = best_split(data, targets, &open[0].samples, params, exec);

    let mut leaves = 1;
    while leaves < params.max_leaves {
        let mut pick: Option<usize> = None;
        for (i, leaf) in open.iter().enumerate() {
            let Some(c) = &leaf.best else { continue };
            if params.max_depth.is_some_and(|d| leaf.depth >= d) {
                continue;
            }
            if pick.is_none_or(|p| c.gain > open[p].best.as_ref().unwrap().gain) {
                pick = Some(i);
            }
        }
        let Some(p) = pick else { break };
        let leaf = open.remove(p);
        let split = leaf.best.expect("picked leaves have a split");
        let (l, r) = (nodes.len(), nodes.len() + 1);
        nodes.push(Node::Leaf { value: 0.0 });
        nodes.push(Node::Leaf { value: 0.0 });
        nodes[leaf.node] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            missing_left: split.missing_left,
            left: l,
            right: r,
        };
        for (node, s) in [(l, split.left), (r, split.right)] {
            let best = best_split(data, targets, &s, params, exec);
            open.push(OpenLeaf {
                node,
                depth: leaf.depth + 1,
                samples: s,
                best,
            });
        }
        leaves += 1;
    }

    let mut assignment = Vec::new();
    for leaf in &open {
        let sum: f64 = leaf.samples.iter().map(|&i| targets[i]).sum();
        let value = if leaf.samples.is_empty() {
            0.0
        } else {
            sum / leaf.samples.len() as f64
        };
        nodes[leaf.node] = Node::Leaf { value };
        assignment.extend(leaf.samples.iter().map(|&s| (s, leaf.node)));
    }
    assignment.sort_unstable();
    (RegressionTree { nodes }, assignment)
}

fn best_split(
    data: &Columns<'_>,
    targets: &[f64],
    samples: &[usize],
    params: TreeParams,
    exec: Exec,
) -> Option<Candidate> {
    let n = samples.len();
    if n < 2 * params.min_samples_per_leaf.max(1) {
        return None;
    }
    let total: f64 = samples.iter().map(|&i| targets[i]).sum();
    let sum_sq: f64 = samples.iter().map(|&i| targets[i] * targets[i]).sum();
    let parent_score = total * total / n as f64;
    let min_gain = GAIN_EPS * sum_sq.max(1.0);

    let per_feature = exec.map_range(data.columns.len(), |f| {
        best_split_on(
            &data.columns[f],
            f,
            targets,
            samples,
            total,
            parent_score,
            params,
        )
    });
    // Reduce in feature order so the winner does not depend on scheduling.
    let mut best: Option<(f64, usize, usize, bool, f64)> = None;
    for found in per_feature.into_iter().flatten() {
        if best.is_none_or(|b| found.0 > b.0) {
            best = Some(found);
        }
    }
    let (gain, feature, _, missing_left, threshold) = best?;
    if gain <= min_gain {
        return None;
    }
    let column = &data.columns[feature];
    let (left, right): (Vec<usize>, Vec<usize>) = samples.iter().partition(|&&s| match column[s] {
        Some(v) => v <= threshold,
        None => missing_left,
    });
    Some(Candidate {
        gain,
        feature,
        threshold,
        missing_left,
        left,
        right,
    })
}

/// Best `(gain, feature, position, missing_left, threshold)` on one feature.
fn best_split_on(
    column: &[Option<f64>],
    feature: usize,
    targets: &[f64],
    samples: &[usize],
    total: f64,
    parent_score: f64,
    params: TreeParams,
) -> Option<(f64, usize, usize, bool, f64)> {
    let min_leaf = params.min_samples_per_leaf.max(1);
    let mut present: Vec<(f64, usize)> = Vec::with_capacity(samples.len());
    let mut missing_sum = 0.0;
    let mut missing_n = 0usize;
    for &s in samples {
        match column[s] {
            Some(v) => present.push((v, s)),
            None => {
                missing_sum += targets[s];
                missing_n += 1;
            }
        }
    }
    if present.is_empty() {
        return None;
    }
    present.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let n = samples.len();
    let mut best: Option<(f64, usize, usize, bool, f64)> = None;
    let mut prefix = 0.0;
    for p in 1..=present.len() {
        prefix += targets[present[p - 1].1];
        let last = p == present.len();
        if !last && present[p].0 == present[p - 1].0 {
            continue;
        }
        if last && missing_n == 0 {
            break;
        }
        let a = present[p - 1].0;
        let threshold = if last {
            a
        } else {
            let b = present[p].0;
            let mid = a + (b - a) / 2.0;
            if mid >= a && mid < b {
                mid
            } else {
                a
            }
        };
        for missing_left in [true, false] {
            if last && missing_left {
                continue;
            }
            let (ls, ln) = if missing_left {
                (prefix + missing_sum, p + missing_n)
            } else {
                (prefix, p)
            };
            let (rs, rn) = (total - ls, n - ln);
            if ln < min_leaf || rn < min_leaf {
                continue;
            }
            let gain = ls * ls / ln as f64 + rs * rs / rn as f64 - parent_score;
            if best.is_none_or(|b| gain > b.0) {
                best = Some((gain, feature, p, missing_left, threshold));
            }
        }
    }
    best
}
