//! Subcommand definitions and their handlers.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use xrank_core::adversarial::{
    applicability_stats, changed_representations, mentioned_colors, perturb_all, rerank_delta, Applicability,
    PerturbationKind, PerturbationSpec, PerturbedQuery, RerankDelta, DEFAULT_COLOR_THRESHOLD,
};
use xrank_core::ingest;
use xrank_core::ranker::{default_cutoffs, rank_positions, summarize, write_rank_csv, RankPosition, RankSummary};
use xrank_core::rules::{label_distribution, mine_rules, read_labels, LabelDistribution, Rule};
use xrank_core::validate::validate_dataset;
use xrank_core::xmetrics::{aggregate, explain_all, FailureExplanation, GlobalReport};
use xrank_core::{AnnotationIndex, Defect, EmbeddingMatrix, FailureRecord, QueryRecord, ValidationReport};

use crate::toy::{ToyEmbedder, DEFAULT_DIM};

const LONG_VERSION: &str = concat!(
    env!("CARGO_PKG_VERSION"),
    "\nfile formats:",
    "\n  annotations    jsonl v1",
    "\n  queries        jsonl v1",
    "\n  corpora        jsonl v1",
    "\n  embeddings     XRANKEMB binary v1",
    "\n  synset graph   tsv v1",
    "\n  colors         csv v1",
    "\n  labels         csv v1",
);

#[derive(Debug, Parser)]
#[command(name = "xrank", version, long_version = LONG_VERSION, about = "Explainable text-to-image retrieval evaluation")]
pub struct Cli {
    /// Worker threads for ranking and explanation sweeps (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
    /// Seed for every random choice (perturbation picks, toy token hashing).
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse the given files and cross-check them when all five dataset inputs are present.
    IngestCheck(IngestCheckArgs),
    /// Embed queries, corpora or perturbed queries with the built-in toy embedder.
    EmbedToy(EmbedToyArgs),
    /// Rank corpora for every query and write retrieval metrics.
    Rank(RankArgs),
    /// Compute CA, NCS, CE and SD for every failure.
    Explain(ExplainArgs),
    /// Rewrite queries by swapping antonyms, colors or sizes.
    Perturb(PerturbArgs),
    /// Compare ground-truth ranks before and after perturbation.
    Rerank(RerankArgs),
    /// Label distribution and co-occurrence rules from human labels.
    Rules(RulesArgs),
    /// Aggregate failure explanations into one report.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct IngestCheckArgs {
    #[arg(long)]
    pub annotations: Option<PathBuf>,
    #[arg(long)]
    pub queries: Option<PathBuf>,
    #[arg(long)]
    pub corpora: Option<PathBuf>,
    #[arg(long)]
    pub query_emb: Option<PathBuf>,
    #[arg(long)]
    pub corpus_emb: Option<PathBuf>,
    #[arg(long)]
    pub wordnet: Option<PathBuf>,
    #[arg(long)]
    pub colors: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("input").required(true).args(["queries", "corpora", "perturbed"])))]
pub struct EmbedToyArgs {
    #[arg(long)]
    pub queries: Option<PathBuf>,
    #[arg(long)]
    pub corpora: Option<PathBuf>,
    /// Perturbed query JSONL as written by `perturb`.
    #[arg(long)]
    pub perturbed: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_DIM)]
    pub dim: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    /// Query JSONL; supplies each query's ground-truth image.
    #[arg(long)]
    pub queries: PathBuf,
    #[arg(long)]
    pub query_emb: PathBuf,
    #[arg(long)]
    pub corpus_emb: PathBuf,
    /// Cutoffs for Recall@k and MRR@k; defaults to 1,5,10 and the corpus size.
    #[arg(long, value_delimiter = ',')]
    pub k: Vec<usize>,
    /// RankSummary JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-query CSV `query_id,gt_rank,top1_id`.
    #[arg(long)]
    pub ranks: Option<PathBuf>,
    /// Failure JSONL for `explain`.
    #[arg(long)]
    pub failures: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    #[arg(long)]
    pub failures: PathBuf,
    #[arg(long)]
    pub annotations: PathBuf,
    #[arg(long, env = "XRANK_WORDNET")]
    pub wordnet: PathBuf,
    /// Relative area difference at which a box pair counts as a size disagreement.
    #[arg(long, default_value_t = 1.0)]
    pub td: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KindArg {
    Antonym,
    ColorAll,
    ColorIn,
    Size,
}

impl From<KindArg> for PerturbationKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Antonym => PerturbationKind::Antonym,
            KindArg::ColorAll => PerturbationKind::ColorAll,
            KindArg::ColorIn => PerturbationKind::ColorIn,
            KindArg::Size => PerturbationKind::Size,
        }
    }
}

#[derive(Debug, Args)]
pub struct PerturbArgs {
    #[arg(long)]
    pub queries: PathBuf,
    #[arg(long, value_enum)]
    pub kind: KindArg,
    #[arg(long, env = "XRANK_WORDNET")]
    pub wordnet: PathBuf,
    #[arg(long)]
    pub colors: PathBuf,
    /// Minimum RGB distance for color replacements.
    #[arg(long, default_value_t = DEFAULT_COLOR_THRESHOLD)]
    pub threshold: f64,
    /// Extra texts whose colors join the `color-in` pool.
    #[arg(long)]
    pub corpora: Option<PathBuf>,
    /// Perturbed query JSONL.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Applicability JSON.
    #[arg(long)]
    pub stats: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RerankArgs {
    #[arg(long)]
    pub queries: PathBuf,
    #[arg(long)]
    pub query_emb: PathBuf,
    /// Embeddings of the perturbed queries, keyed by the original query ids.
    #[arg(long)]
    pub adv_query_emb: PathBuf,
    #[arg(long)]
    pub corpus_emb: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RulesArgs {
    #[arg(long)]
    pub labels: PathBuf,
    /// Keep rules whose confidence reaches this percentage.
    #[arg(long, default_value_t = 50.0)]
    pub min_support: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub explanations: PathBuf,
    #[arg(long)]
    pub annotations: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// How a command finished without an error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Ok,
    /// Inputs parsed but failed validation.
    Defects,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    let mut w = sink(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn write_jsonl<T: Serialize>(path: Option<&Path>, values: &[T]) -> Result<()> {
    let mut w = sink(path)?;
    for v in values {
        serde_json::to_writer(&mut w, v)?;
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).with_context(|| format!("{}: line {}", path.display(), i + 1))
        })
        .collect()
}

fn with_path<T, E>(r: std::result::Result<T, E>, path: &Path) -> Result<T>
where
    E: std::error::Error + Send + Sync + 'static,
{
    r.with_context(|| path.display().to_string())
}

fn ground_truth(queries: &[QueryRecord]) -> HashMap<String, String> {
    queries
        .iter()
        .map(|q| (q.query_id.clone(), q.image_id.clone()))
        .collect()
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::IngestCheck(a) => ingest_check(a),
        Command::EmbedToy(a) => embed_toy(a, cli.seed),
        Command::Rank(a) => rank(a),
        Command::Explain(a) => explain(a),
        Command::Perturb(a) => perturb(a, cli.seed),
        Command::Rerank(a) => rerank(a),
        Command::Rules(a) => rules(a),
        Command::Report(a) => report(a),
    }
}

#[derive(Debug, Serialize)]
struct IngestCheckReport {
    ok: bool,
    /// Rows read per file kind.
    records: BTreeMap<&'static str, usize>,
    /// Whether the cross-file checks ran (they need all five dataset inputs).
    cross_checked: bool,
    defects: Vec<Defect>,
}

fn ingest_check(a: &IngestCheckArgs) -> Result<Outcome> {
    let mut records = BTreeMap::new();
    let annotations = match &a.annotations {
        Some(p) => Some(with_path(ingest::read_annotations(p), p)?),
        None => None,
    };
    let queries = match &a.queries {
        Some(p) => Some(with_path(ingest::read_queries(p), p)?),
        None => None,
    };
    let corpora = match &a.corpora {
        Some(p) => Some(with_path(ingest::read_corpora(p), p)?),
        None => None,
    };
    let q_emb = match &a.query_emb {
        Some(p) => Some(with_path(ingest::read_embeddings(p), p)?),
        None => None,
    };
    let c_emb = match &a.corpus_emb {
        Some(p) => Some(with_path(ingest::read_embeddings(p), p)?),
        None => None,
    };
    if let Some(p) = &a.wordnet {
        let g = with_path(ingest::read_synset_graph(p), p)?;
        records.insert("synsets", g.len());
    }
    if let Some(p) = &a.colors {
        let c = with_path(ingest::read_colors(p), p)?;
        records.insert("colors", c.len());
    }
    for (name, n) in [
        ("annotations", annotations.as_ref().map(Vec::len)),
        ("queries", queries.as_ref().map(Vec::len)),
        ("corpora", corpora.as_ref().map(Vec::len)),
        ("query_embeddings", q_emb.as_ref().map(EmbeddingMatrix::len)),
        ("corpus_embeddings", c_emb.as_ref().map(EmbeddingMatrix::len)),
    ] {
        if let Some(n) = n {
            records.insert(name, n);
        }
    }
    let (validation, cross_checked) = match (&annotations, &queries, &corpora, &q_emb, &c_emb) {
        (Some(an), Some(q), Some(c), Some(qe), Some(ce)) => (validate_dataset(an, q, c, qe, ce), true),
        _ => (
            ValidationReport {
                ok: true,
                defects: Vec::new(),
            },
            false,
        ),
    };
    let ok = validation.ok;
    write_json(
        a.out.as_deref(),
        &IngestCheckReport {
            ok,
            records,
            cross_checked,
            defects: validation.defects,
        },
    )?;
    Ok(if ok { Outcome::Ok } else { Outcome::Defects })
}

fn embed_toy(a: &EmbedToyArgs, seed: u64) -> Result<Outcome> {
    if a.dim == 0 {
        bail!("--dim must be positive");
    }
    let toy = ToyEmbedder::new(a.dim, seed);
    let items: Vec<(String, Vec<String>)> = if let Some(p) = &a.queries {
        with_path(ingest::read_queries(p), p)?
            .into_iter()
            .map(|q| (q.query_id, vec![q.text]))
            .collect()
    } else if let Some(p) = &a.corpora {
        with_path(ingest::read_corpora(p), p)?
            .into_iter()
            .map(|c| (c.image_id, c.sentences))
            .collect()
    } else {
        let p = a.perturbed.as_ref().expect("clap enforces one input");
        read_jsonl::<PerturbedQuery>(p)?
            .into_iter()
            .map(|q| (q.query_id, vec![q.perturbed_text]))
            .collect()
    };
    let rows = items
        .into_par_iter()
        .map(|(id, sentences)| {
            let v = toy.embed(&sentences).with_context(|| format!("embedding {id:?}"))?;
            Ok((id, v))
        })
        .collect::<Result<Vec<_>>>()?;
    if rows.is_empty() {
        bail!("no records to embed");
    }
    let m = EmbeddingMatrix::from_rows(rows)?;
    with_path(ingest::write_embeddings(&m, &a.out), &a.out)?;
    Ok(Outcome::Ok)
}

fn load_positions(queries: &Path, query_emb: &Path, corpus: &EmbeddingMatrix) -> Result<Vec<RankPosition>> {
    let q = with_path(ingest::read_queries(queries), queries)?;
    let qe = with_path(ingest::read_embeddings(query_emb), query_emb)?;
    Ok(rank_positions(&qe, corpus, &ground_truth(&q))?)
}

fn rank(a: &RankArgs) -> Result<Outcome> {
    let corpus = with_path(ingest::read_embeddings(&a.corpus_emb), &a.corpus_emb)?;
    let positions = load_positions(&a.queries, &a.query_emb, &corpus)?;
    let ks = if a.k.is_empty() {
        default_cutoffs(corpus.len())
    } else {
        a.k.clone()
    };
    let summary: RankSummary = summarize(&positions, &ks)?;
    if let Some(p) = &a.ranks {
        let mut w = create(p)?;
        write_rank_csv(&mut w, &positions)?;
        w.flush()?;
    }
    if let Some(p) = &a.failures {
        write_jsonl(Some(p), &summary.failures)?;
    }
    write_json(a.out.as_deref(), &summary)?;
    Ok(Outcome::Ok)
}

fn explain(a: &ExplainArgs) -> Result<Outcome> {
    let failures: Vec<FailureRecord> = read_jsonl(&a.failures)?;
    for f in &failures {
        if f.gt_rank < 2 {
            bail!("query {:?} has gt_rank {}; failures need rank >= 2", f.query_id, f.gt_rank);
        }
    }
    let annotations = AnnotationIndex::new(with_path(ingest::read_annotations(&a.annotations), &a.annotations)?);
    let graph = with_path(ingest::read_synset_graph(&a.wordnet), &a.wordnet)?;
    let explanations = explain_all(&failures, &annotations, &graph, a.td)?;
    write_jsonl(a.out.as_deref(), &explanations)?;
    Ok(Outcome::Ok)
}

fn perturb(a: &PerturbArgs, seed: u64) -> Result<Outcome> {
    let queries = with_path(ingest::read_queries(&a.queries), &a.queries)?;
    let graph = with_path(ingest::read_synset_graph(&a.wordnet), &a.wordnet)?;
    let colors = with_path(ingest::read_colors(&a.colors), &a.colors)?;
    let mut spec = PerturbationSpec::new(a.kind.into(), seed);
    spec.color_distance_threshold = a.threshold;
    if matches!(a.kind, KindArg::ColorIn) {
        let corpora = match &a.corpora {
            Some(p) => with_path(ingest::read_corpora(p), p)?,
            None => Vec::new(),
        };
        let texts = queries
            .iter()
            .map(|q| q.text.as_str())
            .chain(corpora.iter().flat_map(|c| c.sentences.iter().map(String::as_str)));
        spec.dataset_colors = mentioned_colors(texts, &colors);
    }
    let perturbed = perturb_all(&queries, &spec, &graph, &colors)?;
    if let Some(p) = &a.stats {
        let stats: Applicability = applicability_stats(queries.len(), &perturbed);
        write_json(Some(p), &stats)?;
    }
    write_jsonl(a.out.as_deref(), &perturbed)?;
    Ok(Outcome::Ok)
}

fn rerank(a: &RerankArgs) -> Result<Outcome> {
    let corpus = with_path(ingest::read_embeddings(&a.corpus_emb), &a.corpus_emb)?;
    let original = load_positions(&a.queries, &a.query_emb, &corpus)?;
    let adversarial = load_positions(&a.queries, &a.adv_query_emb, &corpus)?;
    let qe = with_path(ingest::read_embeddings(&a.query_emb), &a.query_emb)?;
    let ae = with_path(ingest::read_embeddings(&a.adv_query_emb), &a.adv_query_emb)?;
    let changed = changed_representations(&qe, &ae)?;
    let delta: RerankDelta = rerank_delta(&original, &adversarial, &changed)?;
    write_json(a.out.as_deref(), &delta)?;
    Ok(Outcome::Ok)
}

#[derive(Debug, Serialize)]
struct RulesReport {
    distribution: LabelDistribution,
    min_support_pct: f64,
    rules: Vec<Rule>,
}

fn rules(a: &RulesArgs) -> Result<Outcome> {
    let records = read_labels(&a.labels).with_context(|| a.labels.display().to_string())?;
    let report = RulesReport {
        distribution: label_distribution(&records)?,
        min_support_pct: a.min_support,
        rules: mine_rules(&records, a.min_support)?,
    };
    write_json(a.out.as_deref(), &report)?;
    Ok(Outcome::Ok)
}

#[derive(Debug, Serialize)]
struct ReportFile {
    #[serde(flatten)]
    report: GlobalReport,
    meta: ReportMeta,
}

#[derive(Debug, Serialize)]
struct ReportMeta {
    sd: &'static str,
    ce: &'static str,
}

fn report(a: &ReportArgs) -> Result<Outcome> {
    let explanations: Vec<FailureExplanation> = read_jsonl(&a.explanations)?;
    let annotations = AnnotationIndex::new(with_path(ingest::read_annotations(&a.annotations), &a.annotations)?);
    let report = aggregate(&explanations, &annotations)?;
    let file = ReportFile {
        report,
        meta: ReportMeta {
            sd: "mean over failures of sd_avg (binary hits / matched pairs); sd_optimistic is the mean per-failure sum of per-category matching averages",
            ce: "mean CE over failures; ce_mode is the most frequent value",
        },
    };
    write_json(a.out.as_deref(), &file)?;
    Ok(Outcome::Ok)
}
