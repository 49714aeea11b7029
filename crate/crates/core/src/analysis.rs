//! Exploratory analyses exported as data: nearest-neighbour language
//! networks, feature correlations and a 2D projection of cultural profiles.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::diag::Diagnostics;
use crate::error::{Error, Result};
use crate::features::{PairFeatureVector, Resources};
use crate::io;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeKind {
    Mutual,
    Exclusive,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    /// `a < b`.
    pub a: String,
    pub b: String,
    pub kind: EdgeKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkGraph {
    pub nodes: Vec<String>,
    pub areas: BTreeMap<String, String>,
    pub edges: Vec<Edge>,
}

/// Similarities keyed by ordered `(from, to)` pair; `None` is missing.
pub type Similarities = BTreeMap<(String, String), Option<f64>>;

/// Per node, the `m` most similar other nodes (ties by code). An edge joins
/// `a` and `b` when either picks the other; it is mutual when both do.
pub fn knn_network(
    similarities: &Similarities,
    m: usize,
    areas: &BTreeMap<String, String>,
    diagnostics: &mut Diagnostics,
) -> Result<NetworkGraph> {
    if m == 0 {
        return Err(Error::Config("network degree m must be positive".into()));
    }
    let all: BTreeSet<&String> = similarities.keys().flat_map(|(a, b)| [a, b]).collect();
    let mut nodes = Vec::new();
    for n in all {
        let has_value = similarities
            .iter()
            .any(|((a, b), v)| a != b && (a == n || b == n) && v.is_some());
        if has_value {
            nodes.push(n.clone());
        } else {
            diagnostics.warn(format!(
                "language `{n}` has no similarity values; left out of the network"
            ));
        }
    }
    if m >= nodes.len() {
        return Err(Error::Config(format!(
            "network degree m = {m} needs more than {} languages",
            nodes.len()
        )));
    }

    let mut chosen: BTreeSet<(String, String)> = BTreeSet::new();
    for a in &nodes {
        let mut others: Vec<(f64, &String)> = Vec::new();
        for b in nodes.iter().filter(|b| *b != a) {
            match similarities.get(&(a.clone(), b.clone())).copied().flatten() {
                Some(v) => others.push((v, b)),
                None => diagnostics.warn(format!("no similarity for ({a}, {b})")),
            }
        }
        others.sort_by(|x, y| y.0.total_cmp(&x.0).then_with(|| x.1.cmp(y.1)));
        for (_, b) in others.into_iter().take(m) {
            chosen.insert((a.clone(), b.clone()));
        }
    }

    let mut edges = Vec::new();
    for (a, b) in &chosen {
        let back = chosen.contains(&(b.clone(), a.clone()));
        if back && a > b {
            continue;
        }
        let (a, b) = if a < b { (a, b) } else { (b, a) };
        let kind = if back {
            EdgeKind::Mutual
        } else {
            EdgeKind::Exclusive
        };
        edges.push(Edge {
            a: a.clone(),
            b: b.clone(),
            kind,
        });
    }
    edges.sort();
    let areas = nodes
        .iter()
        .filter_map(|n| areas.get(n).map(|a| (n.clone(), a.clone())))
        .collect();
    Ok(NetworkGraph {
        nodes,
        areas,
        edges,
    })
}

/// Language-level offensive-lexicon similarities for every ordered pair;
/// pairs below `min_coverage` aligned concepts are missing.
pub fn offdist_similarities(
    resources: &Resources,
    languages: &BTreeSet<String>,
    min_coverage: usize,
    diagnostics: &mut Diagnostics,
) -> Result<Similarities> {
    let mut out = BTreeMap::new();
    for a in languages {
        for b in languages.iter().filter(|b| *b != a) {
            let v = match resources.offdist(b, a)? {
                Some(od) if od.coverage >= min_coverage.max(1) => od.value,
                Some(od) => {
                    diagnostics.warn(format!(
                        "off_dist({b} -> {a}): {} aligned concepts below minimum {min_coverage}",
                        od.coverage
                    ));
                    None
                }
                None => None,
            };
            out.insert((a.clone(), b.clone()), v);
        }
    }
    Ok(out)
}

impl NetworkGraph {
    pub fn count(&self, kind: EdgeKind) -> usize {
        self.edges.iter().filter(|e| e.kind == kind).count()
    }

    /// Undirected DOT graph: one cluster per area, solid mutual edges,
    /// dashed exclusive edges.
    pub fn to_dot(&self, comment: &str) -> String {
        let mut out = String::new();
        if !comment.is_empty() {
            let _ = writeln!(out, "// {comment}");
        }
        out.push_str("graph network {\n");
        let mut by_area: BTreeMap<Option<&String>, Vec<&String>> = BTreeMap::new();
        for n in &self.nodes {
            by_area.entry(self.areas.get(n)).or_default().push(n);
        }
        for (i, (area, members)) in by_area.iter().enumerate() {
            match area {
                Some(a) => {
                    let _ = writeln!(out, "  subgraph cluster_{i} {{\n    label={};", quote(a));
                    for n in members {
                        let _ = writeln!(out, "    {} [area={}];", quote(n), quote(a));
                    }
                    out.push_str("  }\n");
                }
                None => {
                    for n in members {
                        let _ = writeln!(out, "  {};", quote(n));
                    }
                }
            }
        }
        for e in &self.edges {
            let style = match e.kind {
                EdgeKind::Mutual => "solid",
                EdgeKind::Exclusive => "dashed",
            };
            let _ = writeln!(out, "  {} -- {} [style={style}];", quote(&e.a), quote(&e.b));
        }
        out.push_str("}\n");
        out
    }

    pub fn edge_rows(&self) -> (Vec<String>, Vec<Vec<String>>) {
        let header = ["a", "b", "kind", "area_a", "area_b"]
            .map(String::from)
            .to_vec();
        let area = |n: &String| {
            self.areas
                .get(n)
                .cloned()
                .unwrap_or_else(|| io::MISSING.into())
        };
        let rows = self
            .edges
            .iter()
            .map(|e| {
                let kind = match e.kind {
                    EdgeKind::Mutual => "mutual",
                    EdgeKind::Exclusive => "exclusive",
                };
                vec![
                    e.a.clone(),
                    e.b.clone(),
                    kind.into(),
                    area(&e.a),
                    area(&e.b),
                ]
            })
            .collect();
        (header, rows)
    }
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Share of edges whose endpoints carry the same area tag.
pub fn edge_area_agreement(graph: &NetworkGraph, diagnostics: &mut Diagnostics) -> Result<f64> {
    if let Some(n) = graph.nodes.iter().find(|n| !graph.areas.contains_key(*n)) {
        return Err(Error::Config(format!(
            "language `{n}` has no cultural area"
        )));
    }
    if graph.edges.is_empty() {
        diagnostics.warn("network has no edges; area agreement reported as 0");
        return Ok(0.0);
    }
    let same = graph
        .edges
        .iter()
        .filter(|e| graph.areas[&e.a] == graph.areas[&e.b])
        .count();
    Ok(same as f64 / graph.edges.len() as f64)
}

/// Pearson product-moment coefficient, `None` under zero variance.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<Option<f64>> {
    if xs.len() != ys.len() {
        return Err(Error::Config(format!(
            "pearson needs equal lengths, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 2 {
        return Ok(None);
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(None);
    }
    Ok(Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)))
}

/// Pearson over the positions where both values are present, with the
/// number of such positions.
pub fn pearson_pairwise(xs: &[Option<f64>], ys: &[Option<f64>]) -> Result<(Option<f64>, usize)> {
    if xs.len() != ys.len() {
        return Err(Error::Config(format!(
            "pearson needs equal lengths, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    let (a, b): (Vec<f64>, Vec<f64>) = xs
        .iter()
        .zip(ys)
        .filter_map(|(x, y)| Some(((*x)?, (*y)?)))
        .unzip();
    let n = a.len();
    Ok((pearson(&a, &b)?, n))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub features: Vec<String>,
    pub r: Vec<Vec<Option<f64>>>,
    pub n: Vec<Vec<usize>>,
}

/// Pairwise-complete correlations between the named features.
pub fn correlation_matrix(
    samples: &[PairFeatureVector],
    features: &[String],
) -> Result<CorrelationMatrix> {
    let columns: Vec<Vec<Option<f64>>> = features
        .iter()
        .map(|f| samples.iter().map(|s| s.get(f).flatten()).collect())
        .collect();
    let k = features.len();
    let mut r = vec![vec![None; k]; k];
    let mut n = vec![vec![0; k]; k];
    for i in 0..k {
        for j in i..k {
            let (v, c) = pearson_pairwise(&columns[i], &columns[j])?;
            r[i][j] = v;
            r[j][i] = v;
            n[i][j] = c;
            n[j][i] = c;
        }
    }
    Ok(CorrelationMatrix {
        features: features.to_vec(),
        r,
        n,
    })
}

impl CorrelationMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<(Option<f64>, usize)> {
        let i = self.features.iter().position(|f| f == a)?;
        let j = self.features.iter().position(|f| f == b)?;
        Some((self.r[i][j], self.n[i][j]))
    }

    pub fn matrix_rows(&self) -> (Vec<String>, Vec<Vec<String>>) {
        let mut header = vec!["feature".to_string()];
        header.extend(self.features.iter().cloned());
        let rows = self
            .features
            .iter()
            .zip(&self.r)
            .map(|(f, row)| {
                let mut out = vec![f.clone()];
                out.extend(row.iter().map(|v| io::format_value(*v)));
                out
            })
            .collect();
        (header, rows)
    }

    /// `(feature_a, feature_b, r, n)` for each unordered pair, diagonal
    /// included.
    pub fn long_rows(&self) -> (Vec<String>, Vec<Vec<String>>) {
        let header = ["feature_a", "feature_b", "r", "n"]
            .map(String::from)
            .to_vec();
        let mut rows = Vec::new();
        for i in 0..self.features.len() {
            for j in i..self.features.len() {
                rows.push(vec![
                    self.features[i].clone(),
                    self.features[j].clone(),
                    io::format_value(self.r[i][j]),
                    self.n[i][j].to_string(),
                ]);
            }
        }
        (header, rows)
    }
}

/// Projection onto the two leading principal components of the complete
/// profiles. Each component is signed so its largest-magnitude loading is
/// positive.
pub fn pca_2d(
    profiles: &BTreeMap<String, Vec<Option<f64>>>,
    diagnostics: &mut Diagnostics,
) -> Result<BTreeMap<String, (f64, f64)>> {
    let mut ids = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (id, v) in profiles {
        match v.iter().copied().collect::<Option<Vec<f64>>>() {
            Some(full) => {
                ids.push(id.clone());
                rows.push(full);
            }
            None => diagnostics.warn(format!(
                "profile `{id}` has missing dimensions; left out of the projection"
            )),
        }
    }
    if rows.len() < 3 {
        return Err(Error::Config(format!(
            "projection needs at least 3 complete profiles, got {}",
            rows.len()
        )));
    }
    let dim = rows[0].len();
    if let Some(i) = rows.iter().position(|r| r.len() != dim) {
        return Err(Error::Config(format!(
            "profile `{}` has {} dimensions, expected {dim}",
            ids[i],
            rows[i].len()
        )));
    }
    if dim == 0 {
        return Err(Error::Config("profiles have no dimensions".into()));
    }

    let n = rows.len();
    let mut x = DMatrix::from_fn(n, dim, |i, j| rows[i][j]);
    for j in 0..dim {
        let mean = x.column(j).sum() / n as f64;
        x.column_mut(j).add_scalar_mut(-mean);
    }
    let cov = x.transpose() * &x / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|a, b| {
        eig.eigenvalues[*b]
            .total_cmp(&eig.eigenvalues[*a])
            .then(a.cmp(b))
    });

    let top = eig.eigenvalues[order[0]].max(0.0);
    let tol = 1e-12 * top.max(f64::MIN_POSITIVE);
    let mut axes = Vec::with_capacity(2);
    for (rank, &c) in order.iter().take(2).enumerate() {
        if eig.eigenvalues[c] <= tol {
            diagnostics.warn(format!(
                "profiles have rank below {}; component {} set to 0",
                rank + 1,
                rank + 1
            ));
            axes.push(None);
            continue;
        }
        let mut v = eig.eigenvectors.column(c).into_owned();
        let lead = (0..dim)
            .max_by(|a, b| v[*a].abs().total_cmp(&v[*b].abs()).then(b.cmp(a)))
            .expect("dim > 0");
        if v[lead] < 0.0 {
            v.neg_mut();
        }
        axes.push(Some(v));
    }
    while axes.len() < 2 {
        diagnostics.warn("profiles have a single dimension; second component set to 0");
        axes.push(None);
    }

    let project = |i: usize, axis: &Option<nalgebra::DVector<f64>>| {
        axis.as_ref().map_or(0.0, |v| x.row(i).transpose().dot(v))
    };
    Ok(ids
        .into_iter()
        .enumerate()
        .map(|(i, id)| (id, (project(i, &axes[0]), project(i, &axes[1]))))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sims(pairs: &[(&str, &str, f64)]) -> Similarities {
        pairs
            .iter()
            .map(|(a, b, v)| ((a.to_string(), b.to_string()), Some(*v)))
            .collect()
    }

    fn symmetric(pairs: &[(&str, &str, f64)]) -> Similarities {
        let mut out = sims(pairs);
        for (a, b, v) in pairs {
            out.insert((b.to_string(), a.to_string()), Some(*v));
        }
        out
    }

    fn areas(xs: &[(&str, &str)]) -> BTreeMap<String, String> {
        xs.iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect()
    }

    #[test]
    fn three_nodes_top_two_all_mutual() {
        let s = symmetric(&[("a", "b", 0.9), ("a", "c", 0.5), ("b", "c", 0.1)]);
        let g = knn_network(&s, 2, &BTreeMap::new(), &mut Diagnostics::new()).unwrap();
        assert_eq!(
            (g.count(EdgeKind::Mutual), g.count(EdgeKind::Exclusive)),
            (3, 0)
        );
        assert!(knn_network(&s, 3, &BTreeMap::new(), &mut Diagnostics::new()).is_err());
    }

    /// `c` puts `d` second; `d` puts `c` third.
    fn four_node_fixture() -> Similarities {
        sims(&[
            ("a", "b", 0.9),
            ("a", "c", 0.8),
            ("a", "d", 0.1),
            ("b", "a", 0.9),
            ("b", "c", 0.7),
            ("b", "d", 0.2),
            ("c", "a", 0.8),
            ("c", "d", 0.6),
            ("c", "b", 0.3),
            ("d", "a", 0.9),
            ("d", "b", 0.8),
            ("d", "c", 0.4),
        ])
    }

    #[test]
    fn exclusive_edge_by_hand() {
        let g = knn_network(
            &four_node_fixture(),
            2,
            &BTreeMap::new(),
            &mut Diagnostics::new(),
        )
        .unwrap();
        // a: b,c  b: a,c  c: a,d  d: a,b
        let expect = vec![
            Edge {
                a: "a".into(),
                b: "b".into(),
                kind: EdgeKind::Mutual,
            },
            Edge {
                a: "a".into(),
                b: "c".into(),
                kind: EdgeKind::Mutual,
            },
            Edge {
                a: "a".into(),
                b: "d".into(),
                kind: EdgeKind::Exclusive,
            },
            Edge {
                a: "b".into(),
                b: "c".into(),
                kind: EdgeKind::Exclusive,
            },
            Edge {
                a: "b".into(),
                b: "d".into(),
                kind: EdgeKind::Exclusive,
            },
            Edge {
                a: "c".into(),
                b: "d".into(),
                kind: EdgeKind::Exclusive,
            },
        ];
        assert_eq!(g.edges, expect);
    }

    #[test]
    fn unconnected_language_is_dropped() {
        let mut s = symmetric(&[("a", "b", 0.9), ("a", "c", 0.5), ("b", "c", 0.1)]);
        for o in ["a", "b", "c"] {
            s.insert(("z".into(), o.into()), None);
            s.insert((o.into(), "z".into()), None);
        }
        let mut d = Diagnostics::new();
        let g = knn_network(&s, 1, &BTreeMap::new(), &mut d).unwrap();
        assert_eq!(g.nodes, ["a", "b", "c"]);
        assert!(d.mentions("`z`"));
    }

    #[test]
    fn dot_export_styles() {
        let g = knn_network(
            &four_node_fixture(),
            2,
            &areas(&[("a", "EU"), ("b", "EU"), ("c", "EA"), ("d", "EA")]),
            &mut Diagnostics::new(),
        )
        .unwrap();
        let dot = g.to_dot("cfg abc");
        assert!(dot.starts_with("// cfg abc\ngraph network {"));
        assert!(dot.contains("\"a\" -- \"b\" [style=solid];"));
        assert!(dot.contains("\"c\" -- \"d\" [style=dashed];"));
        assert!(dot.contains("\"c\" [area=\"EA\"];"));
    }

    #[test]
    fn area_agreement() {
        let g = knn_network(
            &four_node_fixture(),
            2,
            &areas(&[("a", "EU"), ("b", "EU"), ("c", "EA"), ("d", "EA")]),
            &mut Diagnostics::new(),
        )
        .unwrap();
        // Same-area edges: a-b, c-d.
        assert_eq!(
            edge_area_agreement(&g, &mut Diagnostics::new()).unwrap(),
            2.0 / 6.0
        );
        let one = knn_network(
            &four_node_fixture(),
            2,
            &areas(&[("a", "X"), ("b", "X"), ("c", "X"), ("d", "X")]),
            &mut Diagnostics::new(),
        )
        .unwrap();
        assert_eq!(
            edge_area_agreement(&one, &mut Diagnostics::new()).unwrap(),
            1.0
        );
        let partial = knn_network(
            &four_node_fixture(),
            2,
            &areas(&[("a", "X")]),
            &mut Diagnostics::new(),
        )
        .unwrap();
        assert!(edge_area_agreement(&partial, &mut Diagnostics::new()).is_err());
        let empty = NetworkGraph {
            nodes: vec![],
            areas: BTreeMap::new(),
            edges: vec![],
        };
        let mut d = Diagnostics::new();
        assert_eq!(edge_area_agreement(&empty, &mut d).unwrap(), 0.0);
        assert_eq!(d.len(), 1);
    }

    #[test]
    fn pearson_fixtures() {
        let xs = [1.0, 2.0, 3.0];
        assert_eq!(pearson(&xs, &xs).unwrap(), Some(1.0));
        assert_eq!(pearson(&xs, &[-1.0, -2.0, -3.0]).unwrap(), Some(-1.0));
        let r = pearson(&xs, &[1.0, 2.0, 4.0]).unwrap().unwrap();
        assert!((r - 3.0 / (2.0f64 * (14.0 / 3.0)).sqrt()).abs() < 1e-15);
        assert!((r - 0.9820).abs() < 1e-4);
        assert_eq!(pearson(&xs, &[2.0, 2.0, 2.0]).unwrap(), None);
        assert!(pearson(&xs, &[1.0]).is_err());
        let (r, n) = pearson_pairwise(
            &[Some(1.0), None, Some(2.0), Some(3.0)],
            &[Some(1.0), Some(9.0), Some(2.0), Some(4.0)],
        )
        .unwrap();
        assert_eq!(n, 3);
        assert!((r.unwrap() - 0.9820).abs() < 1e-4);
    }

    #[test]
    fn correlation_matrix_cases() {
        let samples: Vec<PairFeatureVector> = (0..5)
            .map(|i| {
                let x = i as f64;
                PairFeatureVector::new("t", format!("s{i}"))
                    .with("x", Some(x))
                    .with("x_copy", Some(x))
                    .with("c1", Some(1.0))
                    .with("c2", Some(2.0))
                    .with("y", if i == 2 { None } else { Some(x * x) })
            })
            .collect();
        let names: Vec<String> = ["x", "x_copy", "c1", "c2", "y", "absent"]
            .map(String::from)
            .to_vec();
        let m = correlation_matrix(&samples, &names).unwrap();
        assert_eq!(m.get("x", "x"), Some((Some(1.0), 5)));
        assert_eq!(m.get("x", "x_copy"), Some((Some(1.0), 5)));
        assert_eq!(m.get("c1", "c2"), Some((None, 5)));
        assert_eq!(m.get("x", "y").unwrap().1, 4);
        assert_eq!(m.get("absent", "x"), Some((None, 0)));
        for i in 0..names.len() {
            for j in 0..names.len() {
                assert_eq!(m.r[i][j], m.r[j][i]);
            }
        }
        assert_eq!(m.long_rows().1.len(), 21);
    }

    fn dist(a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }

    #[test]
    fn pca_right_triangle_in_3d() {
        // A 3-4-5 triangle planted in a tilted plane.
        let p: BTreeMap<String, Vec<Option<f64>>> = [
            ("a", [1.0, 2.0, 3.0]),
            ("b", [4.0, 2.0, 3.0]),
            ("c", [1.0, 2.0 + 4.0 * 0.6, 3.0 + 4.0 * 0.8]),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v.iter().map(|x| Some(*x)).collect()))
        .collect();
        let proj = pca_2d(&p, &mut Diagnostics::new()).unwrap();
        for a in ["a", "b", "c"] {
            for b in ["a", "b", "c"] {
                let orig: Vec<f64> = p[a].iter().map(|x| x.unwrap()).collect();
                let other: Vec<f64> = p[b].iter().map(|x| x.unwrap()).collect();
                let (pa, pb) = (proj[a], proj[b]);
                assert!((dist(&orig, &other) - dist(&[pa.0, pa.1], &[pb.0, pb.1])).abs() < 1e-9);
            }
        }
        let (mx, my) = proj
            .values()
            .fold((0.0, 0.0), |(x, y), p| (x + p.0, y + p.1));
        assert!(mx.abs() < 1e-12 && my.abs() < 1e-12);
    }

    #[test]
    fn pca_collinear_has_zero_second_axis() {
        let p: BTreeMap<String, Vec<Option<f64>>> = (0..4)
            .map(|i| {
                (
                    format!("p{i}"),
                    vec![Some(i as f64), Some(2.0 * i as f64), Some(-(i as f64))],
                )
            })
            .chain([("gap".to_string(), vec![Some(1.0), None, Some(0.0)])])
            .collect();
        let mut d = Diagnostics::new();
        let proj = pca_2d(&p, &mut d).unwrap();
        assert_eq!(proj.len(), 4);
        assert!(proj.values().all(|(_, y)| *y == 0.0));
        assert!(d.mentions("gap") && d.mentions("rank"));
    }

    proptest! {
        #[test]
        fn network_ignores_monotone_rescaling(values in prop::collection::vec(0.0f64..1.0, 20), m in 1usize..4) {
            let langs = ["a", "b", "c", "d", "e"];
            let mut s = Similarities::new();
            let mut it = values.iter();
            for a in langs {
                for b in langs.iter().filter(|b| **b != a) {
                    s.insert((a.to_string(), b.to_string()), Some(*it.next().unwrap()));
                }
            }
            let squared: Similarities = s.iter().map(|(k, v)| (k.clone(), v.map(|x| x * x))).collect();
            let g1 = knn_network(&s, m, &BTreeMap::new(), &mut Diagnostics::new()).unwrap();
            let g2 = knn_network(&squared, m, &BTreeMap::new(), &mut Diagnostics::new()).unwrap();
            prop_assert_eq!(g1.edges, g2.edges);
        }

        #[test]
        fn pearson_affine_invariance(
            xs in prop::collection::vec(-100.0f64..100.0, 3..20),
            seed in prop::collection::vec(-100.0f64..100.0, 20),
            a in 0.1f64..10.0, b in -10.0f64..10.0,
        ) {
            let ys = &seed[..xs.len()];
            if let Some(r) = pearson(&xs, ys).unwrap() {
                let scaled: Vec<f64> = xs.iter().map(|x| a * x + b).collect();
                let r2 = pearson(&scaled, ys).unwrap().unwrap();
                prop_assert!((r - r2).abs() < 1e-9);
                let neg: Vec<f64> = ys.iter().map(|y| -y).collect();
                prop_assert!((pearson(&xs, &neg).unwrap().unwrap() + r).abs() < 1e-12);
                prop_assert!((-1.0..=1.0).contains(&r));
            }
        }

        #[test]
        fn pca_preserves_planar_distances(pts in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 3..8), angle in 0.0f64..std::f64::consts::TAU) {
            let (s, c) = angle.sin_cos();
            let p: BTreeMap<String, Vec<Option<f64>>> = pts.iter().enumerate()
                .map(|(i, (x, y))| (format!("p{i}"), vec![Some(c * x), Some(s * x), Some(*y), Some(3.0)]))
                .collect();
            let mut d = Diagnostics::new();
            let proj = pca_2d(&p, &mut d).unwrap();
            prop_assume!(d.is_empty());
            for (i, a) in pts.iter().enumerate() {
                for (j, b) in pts.iter().enumerate() {
                    let pa = proj[&format!("p{i}")];
                    let pb = proj[&format!("p{j}")];
                    let want = dist(&[a.0, a.1], &[b.0, b.1]);
                    prop_assert!((want - dist(&[pa.0, pa.1], &[pb.0, pb.1])).abs() < 1e-8 * (1.0 + want));
                }
            }
        }
    }
}
