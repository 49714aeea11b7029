//! Command-line driver.
//!
//! Every command reads one TOML experiment config. Relative paths in it
//! resolve against `--root`, then `TRANSFER_RANK_ROOT`, then the config's
//! own directory. Each output file carries the SHA-256 of the config text so
//! a stale artefact can be told apart from a fresh one.

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context as _, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis;
use crate::corpus::{self, DatasetDescriptor};
use crate::diag::{Diagnostics, Severity};
use crate::eval::{self, Protocol, TransferMatrix};
use crate::exec::Exec;
use crate::features::{
    self, culture, tables, AlignedLexicon, Dimension, FeatureOptions, FeatureSelection, FeatureSet,
    FeatureTable, LanguageVectorTable, RepDiffMode, Resources, VectorSource,
};
use crate::io;
use crate::ranker::{self, RankerModel, TrainConfig};

/// Environment variable naming the default resource root.
pub const ROOT_ENV: &str = "TRANSFER_RANK_ROOT";

const FEATURES_FILE: &str = "features.csv";

#[derive(Parser, Debug)]
#[command(
    name = "transfer-rank",
    version,
    about = "Rank transfer datasets for a low-resource target"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Experiment config (TOML).
    #[arg(long, short)]
    pub config: PathBuf,
    /// Base directory for relative resource paths.
    #[arg(long, env = ROOT_ENV)]
    pub root: Option<PathBuf>,
    /// Run every data-parallel step on one thread.
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write the pair-feature table.
    Extract(Common),
    /// Run an evaluation protocol.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        mode: Mode,
    },
    /// Run one or more analyses.
    Analyze {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, value_delimiter = ',', required = true)]
        which: Vec<Analysis>,
    },
    /// Train a ranker on every target and save it.
    Train {
        #[command(flatten)]
        common: Common,
        /// Feature selection such as `LangRank+P+C`; defaults to the first
        /// configured selection.
        #[arg(long)]
        selection: Option<String>,
        /// Model path; defaults to `model.json` in the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rank candidates for one target with a saved model.
    Rank {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        target: String,
        /// Candidate ids; defaults to every other dataset.
        #[arg(long, value_delimiter = ',')]
        candidates: Vec<String>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Loo,
    Ablate,
    Groups,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, ValueEnum)]
pub enum Analysis {
    Network,
    Correlate,
    Project,
    Loss,
    Top3,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResourcePaths {
    pub cultural_table: Option<PathBuf>,
    pub official_languages: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub embeddings_dir: Option<PathBuf>,
    pub distance_tables: Vec<PathBuf>,
    pub mtvec: Option<PathBuf>,
    pub colex2lang: Option<PathBuf>,
    pub transfer_matrix: Option<PathBuf>,
    /// `id, area` rows for languages and countries.
    pub areas: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureConfig {
    pub min_offdist_coverage: usize,
    pub rep_diff_mode: RepDiffMode,
    /// Evaluated by `evaluate --mode loo`.
    pub selections: Vec<String>,
    /// Evaluated by `evaluate --mode groups`.
    pub groups: Vec<String>,
    /// Evaluated by `evaluate --mode ablate`.
    pub ablation_bases: Vec<String>,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        let defaults = FeatureOptions::default();
        FeatureConfig {
            min_offdist_coverage: defaults.min_offdist_coverage,
            rep_diff_mode: defaults.rep_diff_mode,
            selections: [
                "LangRank",
                "LangRank+P",
                "LangRank+O",
                "LangRank+C",
                "LangRank+P+O",
                "LangRank+P+C",
                "LangRank+C+O",
                "LangRank+P+C+O",
            ]
            .map(String::from)
            .to_vec(),
            groups: FeatureSet::GROUPS
                .iter()
                .map(|g| g.label().to_string())
                .collect(),
            ablation_bases: vec!["LangRank+P+C".into()],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    /// Neighbours per language in the network.
    pub network_degree: usize,
    /// Features to correlate; empty means the whole catalog.
    pub correlate_features: Vec<String>,
    /// `target_id, rank, transfer_id`; defaults to gold from the matrix.
    pub top3_gold: Option<PathBuf>,
    /// `target_id, rank, transfer_id`; defaults to leave-one-out predictions.
    pub top3_predictions: Option<PathBuf>,
    /// Selection used for leave-one-out predictions; defaults to the first
    /// configured selection.
    pub top3_selection: Option<String>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            network_degree: 2,
            correlate_features: Vec::new(),
            top3_gold: None,
            top3_predictions: None,
            top3_selection: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub manifest: PathBuf,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_k")]
    pub k: usize,
    /// Overrides `train.seed` when set.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub resources: ResourcePaths,
    #[serde(default)]
    pub features: FeatureConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_k() -> usize {
    3
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg: ExperimentConfig =
            toml::from_str(text).context("invalid experiment config")?;
        if let Some(seed) = cfg.seed {
            cfg.train.seed = seed;
        }
        cfg.train.validate()?;
        if cfg.k == 0 {
            bail!("k must be positive");
        }
        for s in cfg
            .features
            .selections
            .iter()
            .chain(&cfg.features.groups)
            .chain(&cfg.features.ablation_bases)
        {
            FeatureSelection::parse(s)?;
        }
        if let Some(s) = &cfg.analysis.top3_selection {
            FeatureSelection::parse(s)?;
        }
        Ok(cfg)
    }

    /// Makes every path absolute against `root` and checks that each exists.
    pub fn resolve(&mut self, root: &Path) -> Result<()> {
        let mut missing = Vec::new();
        let mut fix = |p: &mut PathBuf, must_exist: bool| {
            if p.is_relative() {
                *p = root.join(&*p);
            }
            if must_exist && !p.exists() {
                missing.push(p.display().to_string());
            }
        };
        fix(&mut self.manifest, true);
        fix(&mut self.output_dir, false);
        let r = &mut self.resources;
        for p in [
            &mut r.cultural_table,
            &mut r.official_languages,
            &mut r.lexicon,
            &mut r.embeddings_dir,
            &mut r.mtvec,
            &mut r.colex2lang,
            &mut r.transfer_matrix,
            &mut r.areas,
        ]
        .into_iter()
        .flatten()
        {
            fix(p, true);
        }
        for p in &mut r.distance_tables {
            fix(p, true);
        }
        let a = &mut self.analysis;
        for p in [&mut a.top3_gold, &mut a.top3_predictions]
            .into_iter()
            .flatten()
        {
            fix(p, true);
        }
        if !missing.is_empty() {
            bail!("referenced files not found:\n  {}", missing.join("\n  "));
        }
        Ok(())
    }

    pub fn feature_options(&self) -> FeatureOptions {
        FeatureOptions {
            min_offdist_coverage: self.features.min_offdist_coverage,
            rep_diff_mode: self.features.rep_diff_mode,
        }
    }
}

/// Lowercase hex SHA-256.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// A loaded config plus everything derived from the command line.
pub struct Context {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub exec: Exec,
    pub diagnostics: Diagnostics,
}

impl Context {
    pub fn load(common: &Common) -> Result<Self> {
        let text = std::fs::read_to_string(&common.config)
            .with_context(|| format!("reading config {}", common.config.display()))?;
        let mut config = ExperimentConfig::parse(&text)
            .with_context(|| format!("in {}", common.config.display()))?;
        let root = match &common.root {
            Some(r) => r.clone(),
            None => common
                .config
                .parent()
                .map(Path::to_path_buf)
                .unwrap_or_default(),
        };
        config.resolve(&root)?;
        Ok(Context {
            config,
            config_hash: sha256_hex(text.as_bytes()),
            exec: if common.sequential {
                Exec::Sequential
            } else {
                Exec::default()
            },
            diagnostics: Diagnostics::new(),
        })
    }

    fn out(&self, name: &str) -> PathBuf {
        self.config.output_dir.join(name)
    }

    fn protocol(&self) -> Protocol {
        Protocol {
            k: self.config.k,
            train: self.config.train.clone(),
            exec: self.exec,
            config_hash: self.config_hash.clone(),
        }
    }

    /// Writes `<stem>.csv` and a fixed-width `<stem>.txt`.
    fn emit_table(&self, stem: &str, header: &[String], rows: &[Vec<String>]) -> Result<()> {
        let seed = self.config.train.seed.to_string();
        let directives = [
            ("config_hash", self.config_hash.as_str()),
            ("seed", seed.as_str()),
        ];
        io::write_file(
            &self.out(&format!("{stem}.csv")),
            &io::to_delimited(&directives, header, rows, b','),
        )?;
        let mut txt = format!("# config_hash={}\n# seed={seed}\n", self.config_hash);
        txt.push_str(&io::render_table(header, rows));
        io::write_file(&self.out(&format!("{stem}.txt")), &txt)?;
        Ok(())
    }

    fn emit_json<T: Serialize>(&self, stem: &str, value: &T) -> Result<()> {
        #[derive(Serialize)]
        struct Stamped<'a, T> {
            config_hash: &'a str,
            seed: u64,
            data: &'a T,
        }
        let doc = Stamped {
            config_hash: &self.config_hash,
            seed: self.config.train.seed,
            data: value,
        };
        let mut s = serde_json::to_string_pretty(&doc)?;
        s.push('\n');
        io::write_file(&self.out(&format!("{stem}.json")), &s)?;
        Ok(())
    }

    fn matrix(&self) -> Result<TransferMatrix> {
        let p = self
            .config
            .resources
            .transfer_matrix
            .as_ref()
            .ok_or_else(|| anyhow!("no transfer matrix configured (resources.transfer_matrix)"))?;
        Ok(TransferMatrix::load(p)?)
    }

    fn areas(&self) -> Result<Option<BTreeMap<String, String>>> {
        let Some(p) = &self.config.resources.areas else {
            return Ok(None);
        };
        let t = io::read_delimited(p)?;
        let (a, b) = (t.column("id")?, t.column("area")?);
        let mut out = BTreeMap::new();
        for (line, row) in &t.rows {
            let id = row.get(a).cloned().unwrap_or_default();
            if out
                .insert(id.clone(), row.get(b).cloned().unwrap_or_default())
                .is_some()
            {
                return Err(crate::Error::record(p, *line, format!("duplicate id `{id}`")).into());
            }
        }
        Ok(Some(out))
    }
}

/// Loads every configured resource, reporting all failures together.
pub fn load_resources(cfg: &ExperimentConfig) -> Result<Resources> {
    let mut res = Resources::default();
    let mut errors = Vec::new();
    let r = &cfg.resources;
    let mut record = |e: crate::Error| errors.push(e.to_string());
    if let Some(p) = &r.cultural_table {
        match culture::load_cultural_table(p) {
            Ok(t) => res.country_profiles = t,
            Err(e) => record(e),
        }
    }
    if let Some(p) = &r.official_languages {
        match culture::load_official_languages(p) {
            Ok(t) => res.official_languages = t,
            Err(e) => record(e),
        }
    }
    if let Some(p) = &r.lexicon {
        match AlignedLexicon::load(p) {
            Ok(l) => res.lexicon = Some(l),
            Err(e) => record(e),
        }
    }
    if let Some(p) = &r.embeddings_dir {
        if let Err(e) = res.load_embeddings_dir(p) {
            record(e);
        }
    }
    for p in &r.distance_tables {
        match tables::load_distance_tables(p).and_then(|t| res.add_distance_tables(t)) {
            Ok(()) => {}
            Err(e) => record(e),
        }
    }
    for (src, path) in [
        (VectorSource::Mtvec, &r.mtvec),
        (VectorSource::Colex2lang, &r.colex2lang),
    ] {
        if let Some(p) = path {
            match LanguageVectorTable::load(p, src) {
                Ok(t) => {
                    res.language_vectors.insert(src, t);
                }
                Err(e) => record(e),
            }
        }
    }
    if !errors.is_empty() {
        bail!(
            "{} resource(s) failed to load:\n  {}",
            errors.len(),
            errors.join("\n  ")
        );
    }
    Ok(res)
}

/// Loads the manifest and every dataset, reporting all failures together.
pub fn load_datasets(
    cfg: &ExperimentConfig,
    diagnostics: &mut Diagnostics,
) -> Result<Vec<features::DatasetSummary>> {
    let entries = corpus::load_manifest(&cfg.manifest)?;
    let mut errors = Vec::new();
    let mut out = Vec::new();
    for e in &entries {
        match corpus::load_dataset(e) {
            Ok(d) => {
                let vocab = corpus::train_vocab_stats(&d);
                for diag in d.diagnostics.iter() {
                    match diag.severity {
                        Severity::Error => errors.push(diag.message.clone()),
                        Severity::Warning => diagnostics.warn(diag.message.clone()),
                    }
                }
                out.push(features::DatasetSummary {
                    descriptor: d.descriptor,
                    vocab,
                });
            }
            Err(err) => errors.push(err.to_string()),
        }
    }
    if !errors.is_empty() {
        bail!(
            "{} dataset problem(s):\n  {}",
            errors.len(),
            errors.join("\n  ")
        );
    }
    Ok(out)
}

fn extract(ctx: &mut Context) -> Result<(FeatureTable, Vec<DatasetDescriptor>)> {
    let resources = load_resources(&ctx.config)?;
    let datasets = load_datasets(&ctx.config, &mut ctx.diagnostics)?;
    let (table, diag) = features::extract_features(
        &datasets,
        &resources,
        &ctx.config.feature_options(),
        ctx.exec,
    )?;
    ctx.diagnostics.extend(diag);
    Ok((table, datasets.into_iter().map(|d| d.descriptor).collect()))
}

/// The extracted table from the output directory when it matches this
/// config, otherwise a fresh extraction.
fn feature_table(ctx: &mut Context) -> Result<FeatureTable> {
    let path = ctx.out(FEATURES_FILE);
    if path.exists() {
        let t = io::read_delimited(&path)?;
        match t.directives.get("config_hash") {
            Some(h) if *h == ctx.config_hash => return Ok(FeatureTable::load(&path)?),
            other => bail!(
                "{} was written under config hash {}; rerun `extract` for this config",
                path.display(),
                other.map(String::as_str).unwrap_or("(none)")
            ),
        }
    }
    Ok(extract(ctx)?.0)
}

fn cmd_extract(ctx: &mut Context) -> Result<()> {
    let (table, _) = extract(ctx)?;
    let seed = ctx.config.train.seed.to_string();
    let directives = [
        ("config_hash", ctx.config_hash.as_str()),
        ("seed", seed.as_str()),
    ];
    io::write_file(
        &ctx.out(FEATURES_FILE),
        &table.to_delimited(&directives, b','),
    )?;
    let mut txt = format!("# config_hash={}\n", ctx.config_hash);
    txt.push_str(&io::render_table(&table.header(), &table.string_rows()));
    io::write_file(&ctx.out("features.txt"), &txt)?;
    println!(
        "{} pairs x {} features -> {}",
        table.rows.len(),
        table.catalog.len(),
        ctx.out(FEATURES_FILE).display()
    );
    Ok(())
}

fn parse_selections(specs: &[String]) -> Result<Vec<FeatureSelection>> {
    Ok(specs
        .iter()
        .map(|s| FeatureSelection::parse(s))
        .collect::<crate::Result<_>>()?)
}

fn cmd_evaluate(ctx: &mut Context, mode: Mode) -> Result<()> {
    let matrix = ctx.matrix()?;
    let table = feature_table(ctx)?;
    let protocol = ctx.protocol();
    match mode {
        Mode::Loo => {
            let mut reports = Vec::new();
            for sel in parse_selections(&ctx.config.features.selections)? {
                reports.push(eval::evaluate_selection(
                    &table,
                    &sel,
                    &matrix,
                    &protocol,
                    &mut ctx.diagnostics,
                )?);
            }
            let header = ["selection", "MAP", "NDCG", "folds", "skipped"]
                .map(String::from)
                .to_vec();
            let rows: Vec<Vec<String>> = reports
                .iter()
                .map(|r| {
                    vec![
                        r.label.clone(),
                        eval::pct(r.mean_map()),
                        eval::pct(r.mean_ndcg()),
                        r.meta.folds.to_string(),
                        r.skipped.len().to_string(),
                    ]
                })
                .collect();
            ctx.emit_table("loo", &header, &rows)?;
            let mut detail = Vec::new();
            for r in &reports {
                let (_, rows) = r.rows();
                detail.extend(rows.into_iter().map(|mut row| {
                    row.insert(0, r.label.clone());
                    row
                }));
            }
            let header = ["selection", "target", "MAP", "NDCG", "predicted"]
                .map(String::from)
                .to_vec();
            ctx.emit_table("loo_targets", &header, &detail)?;
            ctx.emit_json("loo", &reports)?;
            print!(
                "{}",
                io::render_table(
                    &["selection", "MAP", "NDCG", "folds", "skipped"].map(String::from),
                    &rows
                )
            );
        }
        Mode::Ablate => {
            let bases = parse_selections(&ctx.config.features.ablation_bases)?;
            let study =
                eval::ablation_study(&table, &bases, &matrix, &protocol, &mut ctx.diagnostics)?;
            let (header, rows) = study.table();
            ctx.emit_table("ablation", &header, &rows)?;
            ctx.emit_json("ablation", &study)?;
            print!("{}", io::render_table(&header, &rows));
        }
        Mode::Groups => {
            let groups = parse_selections(&ctx.config.features.groups)?;
            let sweep = eval::feature_group_sweep(
                &table,
                &groups,
                &matrix,
                &protocol,
                &mut ctx.diagnostics,
            )?;
            let (header, rows) = sweep.table();
            ctx.emit_table("groups", &header, &rows)?;
            ctx.emit_json("groups", &sweep)?;
            print!("{}", io::render_table(&header, &rows));
        }
    }
    Ok(())
}

fn cmd_analyze(ctx: &mut Context, which: &[Analysis]) -> Result<()> {
    let which: BTreeSet<Analysis> = which.iter().copied().collect();
    for a in which {
        match a {
            Analysis::Network => analyze_network(ctx)?,
            Analysis::Correlate => analyze_correlate(ctx)?,
            Analysis::Project => analyze_project(ctx)?,
            Analysis::Loss => analyze_loss(ctx)?,
            Analysis::Top3 => analyze_top3(ctx)?,
        }
    }
    Ok(())
}

fn analyze_network(ctx: &mut Context) -> Result<()> {
    let r = &ctx.config.resources;
    if r.lexicon.is_none() || r.embeddings_dir.is_none() {
        bail!("network analysis needs resources.lexicon and resources.embeddings_dir");
    }
    let resources = load_resources(&ctx.config)?;
    let languages: BTreeSet<String> = resources.embeddings.keys().cloned().collect();
    let sims = analysis::offdist_similarities(
        &resources,
        &languages,
        ctx.config.features.min_offdist_coverage,
        &mut ctx.diagnostics,
    )?;
    let areas = ctx.areas()?.unwrap_or_default();
    let graph = analysis::knn_network(
        &sims,
        ctx.config.analysis.network_degree,
        &areas,
        &mut ctx.diagnostics,
    )?;
    io::write_file(
        &ctx.out("network.dot"),
        &graph.to_dot(&format!("config_hash={}", ctx.config_hash)),
    )?;
    let (header, rows) = graph.edge_rows();
    ctx.emit_table("network_edges", &header, &rows)?;

    let agreement = if ctx.config.resources.areas.is_some() {
        Some(analysis::edge_area_agreement(&graph, &mut ctx.diagnostics)?)
    } else {
        ctx.diagnostics
            .warn("no areas configured; edge-area agreement not computed");
        None
    };
    let summary = vec![
        vec!["nodes".to_string(), graph.nodes.len().to_string()],
        vec![
            "mutual_edges".to_string(),
            graph.count(analysis::EdgeKind::Mutual).to_string(),
        ],
        vec![
            "exclusive_edges".to_string(),
            graph.count(analysis::EdgeKind::Exclusive).to_string(),
        ],
        vec!["area_agreement".to_string(), io::format_value(agreement)],
    ];
    ctx.emit_table(
        "network_summary",
        &["metric".to_string(), "value".to_string()],
        &summary,
    )?;
    println!(
        "network: {} nodes, {} mutual, {} exclusive edges",
        graph.nodes.len(),
        graph.count(analysis::EdgeKind::Mutual),
        graph.count(analysis::EdgeKind::Exclusive)
    );
    Ok(())
}

fn analyze_correlate(ctx: &mut Context) -> Result<()> {
    let table = feature_table(ctx)?;
    let names = if ctx.config.analysis.correlate_features.is_empty() {
        table.catalog.clone()
    } else {
        ctx.config.analysis.correlate_features.clone()
    };
    for n in &names {
        if !table.catalog.contains(n) {
            bail!("correlate: `{n}` is not in the feature catalog");
        }
    }
    let m = analysis::correlation_matrix(&table.rows, &names)?;
    let (header, rows) = m.matrix_rows();
    ctx.emit_table("correlation_matrix", &header, &rows)?;
    let (header, rows) = m.long_rows();
    ctx.emit_table("correlation_long", &header, &rows)?;
    println!(
        "correlations over {} features and {} pairs",
        names.len(),
        table.rows.len()
    );
    Ok(())
}

fn analyze_project(ctx: &mut Context) -> Result<()> {
    let Some(p) = &ctx.config.resources.cultural_table else {
        bail!("projection needs resources.cultural_table");
    };
    let profiles: BTreeMap<String, Vec<Option<f64>>> = culture::load_cultural_table(p)?
        .into_iter()
        .map(|(c, prof)| (c, prof.values().to_vec()))
        .collect();
    let coords = analysis::pca_2d(&profiles, &mut ctx.diagnostics)?;
    let areas = ctx.areas()?.unwrap_or_default();
    let area = |id: &String| areas.get(id).cloned().unwrap_or_else(|| io::MISSING.into());
    let rows: Vec<Vec<String>> = coords
        .iter()
        .map(|(id, (x, y))| vec![id.clone(), x.to_string(), y.to_string(), area(id)])
        .collect();
    ctx.emit_table(
        "projection",
        &["id", "x", "y", "area"].map(String::from),
        &rows,
    )?;

    let mut header = vec!["id".to_string()];
    header.extend(Dimension::ALL.iter().map(|d| d.code().to_string()));
    header.push("area".into());
    let raw: Vec<Vec<String>> = profiles
        .iter()
        .map(|(id, v)| {
            let mut row = vec![id.clone()];
            row.extend(v.iter().map(|x| io::format_value(*x)));
            row.push(area(id));
            row
        })
        .collect();
    ctx.emit_table("profiles", &header, &raw)?;
    println!("projected {} of {} profiles", coords.len(), profiles.len());
    Ok(())
}

fn analyze_loss(ctx: &mut Context) -> Result<()> {
    let matrix = ctx.matrix()?;
    let loss = eval::relative_loss(&matrix)?;
    let rows: Vec<Vec<String>> = loss
        .iter()
        .map(|((t, s), v)| vec![t.clone(), s.clone(), io::format_value(*v)])
        .collect();
    ctx.emit_table(
        "relative_loss",
        &["target_id", "transfer_id", "loss_percent"].map(String::from),
        &rows,
    )?;
    println!("relative loss for {} cells", rows.len());
    Ok(())
}

fn analyze_top3(ctx: &mut Context) -> Result<()> {
    let gold: BTreeMap<String, Vec<String>> = match &ctx.config.analysis.top3_gold {
        Some(p) => eval::load_ranking_lists(p)?,
        None => eval::gold_rankings(&ctx.matrix()?, ctx.config.k)?
            .into_iter()
            .map(|g| (g.target_id, g.order))
            .collect(),
    };
    let predicted: BTreeMap<String, Vec<String>> = match &ctx.config.analysis.top3_predictions {
        Some(p) => eval::load_ranking_lists(p)?,
        None => {
            let spec = ctx
                .config
                .analysis
                .top3_selection
                .clone()
                .or_else(|| ctx.config.features.selections.first().cloned())
                .ok_or_else(|| anyhow!("top3 needs predictions or a feature selection"))?;
            let matrix = ctx.matrix()?;
            let table = feature_table(ctx)?;
            let protocol = ctx.protocol();
            let report = eval::evaluate_selection(
                &table,
                &FeatureSelection::parse(&spec)?,
                &matrix,
                &protocol,
                &mut ctx.diagnostics,
            )?;
            report
                .per_target
                .into_iter()
                .map(|t| (t.target_id, t.predicted))
                .collect()
        }
    };
    let mut header = vec!["target_id".to_string()];
    header.extend((1..=3).map(|i| format!("gold_{i}")));
    header.extend((1..=3).map(|i| format!("predicted_{i}")));
    header.extend(["exact", "in_gold", "exact_matches", "set_matches"].map(String::from));
    let mut rows = Vec::new();
    for (target, g) in &gold {
        let Some(p) = predicted.get(target) else {
            ctx.diagnostics
                .warn(format!("top3: no prediction for `{target}`"));
            continue;
        };
        let c = eval::top3_comparison(target, g, p);
        let flags = |v: &[bool]| {
            v.iter()
                .map(|b| if *b { "1" } else { "0" })
                .collect::<String>()
        };
        let mut row = vec![target.clone()];
        for list in [&c.gold, &c.predicted] {
            row.extend((0..3).map(|i| list.get(i).cloned().unwrap_or_default()));
        }
        row.extend([
            flags(&c.exact),
            flags(&c.in_gold),
            c.exact_matches().to_string(),
            c.set_matches().to_string(),
        ]);
        rows.push(row);
    }
    ctx.emit_table("top3", &header, &rows)?;
    print!("{}", io::render_table(&header, &rows));
    Ok(())
}

fn cmd_train(ctx: &mut Context, selection: Option<&str>, out: Option<&Path>) -> Result<()> {
    let spec = selection
        .map(str::to_string)
        .or_else(|| ctx.config.features.selections.first().cloned())
        .ok_or_else(|| anyhow!("no feature selection given or configured"))?;
    let sel = FeatureSelection::parse(&spec)?;
    let matrix = ctx.matrix()?;
    let table = feature_table(ctx)?.select(&sel)?;
    let golds = eval::gold_rankings(&matrix, ctx.config.k)?;
    let groups = eval::query_groups(&table, &golds)?;
    let train = TrainConfig {
        ndcg_truncation: ctx.config.k,
        ..ctx.config.train.clone()
    };
    let (mut model, trace) = ranker::train_with(&groups, &train, ctx.exec)?;
    model
        .metadata
        .insert("config_hash".into(), ctx.config_hash.clone());
    model.metadata.insert("selection".into(), sel.label());
    let path = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| ctx.out("model.json"));
    io::write_file(&path, &model.save())?;
    println!(
        "{} trees on {} groups, training NDCG@{} {:.4} -> {}",
        model.trees.len(),
        groups.len(),
        ctx.config.k,
        trace.mean_ndcg.last().copied().unwrap_or(0.0),
        path.display()
    );
    Ok(())
}

fn cmd_rank(
    ctx: &mut Context,
    model_path: &Path,
    target: &str,
    candidates: &[String],
) -> Result<()> {
    let model = RankerModel::load(&io::read_to_string(model_path)?)?;
    if let Some(h) = model.metadata.get("config_hash") {
        if *h != ctx.config_hash {
            ctx.diagnostics
                .warn(format!("model was trained under config hash {h}"));
        }
    }
    let table = feature_table(ctx)?;
    let rows: Vec<_> = if candidates.is_empty() {
        table
            .rows
            .iter()
            .filter(|r| r.target_id == target)
            .cloned()
            .collect()
    } else {
        candidates
            .iter()
            .map(|c| {
                table
                    .get(target, c)
                    .cloned()
                    .ok_or_else(|| anyhow!("no feature row for ({target}, {c})"))
            })
            .collect::<Result<_>>()?
    };
    if rows.is_empty() {
        bail!("no candidates for target `{target}`");
    }
    let mut scored = rows
        .iter()
        .map(|r| Ok((model.score(r)?, r.transfer_id.clone())))
        .collect::<crate::Result<Vec<_>>>()?;
    let scores: BTreeMap<String, f64> = scored.iter().map(|(s, id)| (id.clone(), *s)).collect();
    let order = ranker::order_by_score(&mut scored);
    let out: Vec<Vec<String>> = order
        .iter()
        .enumerate()
        .map(|(i, id)| vec![(i + 1).to_string(), id.clone(), scores[id].to_string()])
        .collect();
    let header = ["rank", "transfer_id", "score"].map(String::from);
    ctx.emit_table(&format!("rank_{target}"), &header, &out)?;
    print!("{}", io::render_table(&header, &out));
    Ok(())
}

pub fn run(cli: Cli) -> Result<Diagnostics> {
    let common = match &cli.command {
        Command::Extract(c) => c,
        Command::Evaluate { common, .. }
        | Command::Analyze { common, .. }
        | Command::Train { common, .. }
        | Command::Rank { common, .. } => common,
    };
    let mut ctx = Context::load(common)?;
    match &cli.command {
        Command::Extract(_) => cmd_extract(&mut ctx)?,
        Command::Evaluate { mode, .. } => cmd_evaluate(&mut ctx, *mode)?,
        Command::Analyze { which, .. } => cmd_analyze(&mut ctx, which)?,
        Command::Train { selection, out, .. } => {
            cmd_train(&mut ctx, selection.as_deref(), out.as_deref())?
        }
        Command::Rank {
            model,
            target,
            candidates,
            ..
        } => cmd_rank(&mut ctx, model, target, candidates)?,
    }
    Ok(ctx.diagnostics)
}

/// Parses arguments, runs, prints diagnostics to stderr. The exit code is
/// nonzero exactly when an error occurred.
pub fn main_with(args: impl IntoIterator<Item = OsString>) -> ExitCode {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(diag) => {
            for d in diag.iter() {
                eprintln!("{d}");
            }
            if diag.has_errors() {
                ExitCode::FAILURE
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
