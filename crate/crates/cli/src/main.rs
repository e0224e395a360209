mod data;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anaphora::bridging::{self, BridgingConfig, BridgingModel};
use anaphora::combiner::{self, check_same_document, is_pronoun_span};
use anaphora::corpus::{write_corpus, Document, Link, Partition, Span};
use anaphora::dd::{self, undersample, AnaphorClass, DdConfig, DdModel, DdStats, ErrorCase, ErrorReport};
use anaphora::embeddings::StoreSet;
use anaphora::metrics::{self, CorefAccumulator, Counts, ScoreReport};
use anaphora::wcs::{self, WcsConfig, WcsModel};
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use data::{configure, header, pair, read_corpus, read_stores, write_file, write_out};

#[derive(Parser)]
#[command(name = "anaphora", version, about = "Coreference, bridging and discourse-deixis resolution")]
struct Cli {
    /// More logging (-v info, -vv debug); RUST_LOG takes precedence.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    /// Worker threads for per-document work (0: one per core).
    #[arg(long, default_value_t = 0, global = true)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON object with flat keys overriding the defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Inputs {
    #[arg(long)]
    corpus: PathBuf,
    /// Embedding manifests, or directories of them.
    #[arg(long, num_args = 1.., required = true)]
    manifests: Vec<PathBuf>,
}

#[derive(Args)]
struct Train {
    #[command(flatten)]
    inputs: Inputs,
    /// Where to write the checkpoint.
    #[arg(long)]
    model: PathBuf,
    /// Per-epoch loss CSV.
    #[arg(long)]
    loss_log: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Predict {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    /// Keep the base clusters and add the other system's new singletons.
    MergeSingletons,
    /// Pronoun-free base clusters plus the other system's singletons and
    /// pronoun clusters.
    PronounPartition,
}

#[derive(Subcommand)]
enum Command {
    /// Check corpus files (and optionally their manifests).
    Validate {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long, num_args = 1..)]
        manifests: Vec<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Train the incremental clustering model.
    TrainWcs(Train),
    /// Cluster the mentions of a corpus.
    PredictWcs(Predict),
    /// Train the discourse-deixis resolver.
    TrainDd(Train),
    /// Resolve discourse deixis; writes the corpus with predicted links.
    PredictDd {
        #[command(flatten)]
        predict: Predict,
        /// CSV of border and split errors over gold DD anaphors.
        #[arg(long)]
        error_report: Option<PathBuf>,
    },
    /// Train the bridging resolver on gold anaphors.
    TrainBridging(Train),
    /// Resolve the annotated bridging anaphors.
    PredictBridging(Predict),
    /// Combine the identity clusters of two systems.
    Combine {
        #[arg(long)]
        base: PathBuf,
        #[arg(long, alias = "other")]
        singletons: PathBuf,
        #[arg(long, value_enum, default_value = "merge-singletons")]
        mode: Mode,
        /// Drop incompatible first mentions (needs --manifests).
        #[arg(long)]
        filter: bool,
        #[arg(long, num_args = 1..)]
        manifests: Vec<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Score a response corpus against a key corpus.
    Score {
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        response: PathBuf,
        #[arg(long)]
        no_singletons: bool,
        /// Also report bridging Entity-F1.
        #[arg(long)]
        bridging: bool,
        /// Write the full report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Anaphor class proportions and context distributions.
    DdStats {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, num_args = 1..)]
        manifests: Vec<PathBuf>,
        #[arg(long, default_value_t = 10)]
        top: usize,
        #[arg(long)]
        json: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
struct Plain {
    seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
struct CombineConfig {
    /// Space used by the compatibility filter.
    space: String,
    seed: u64,
}

impl Default for CombineConfig {
    fn default() -> Self {
        CombineConfig { space: "bert".into(), seed: 0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
struct StatsConfig {
    segment_limit: usize,
    seed: u64,
}

impl Default for StatsConfig {
    fn default() -> Self {
        StatsConfig { segment_limit: dd::DEFAULT_SEGMENT_LIMIT, seed: 0 }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if cli.jobs > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global() {
            log::warn!("could not size the worker pool: {e}");
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Validate { files, manifests, common } => validate(&files, &manifests, &common),
        Command::TrainWcs(t) => train_wcs(&t),
        Command::PredictWcs(p) => predict_wcs(&p),
        Command::TrainDd(t) => train_dd(&t),
        Command::PredictDd { predict, error_report } => predict_dd(&predict, error_report.as_deref()),
        Command::TrainBridging(t) => train_bridging(&t),
        Command::PredictBridging(p) => predict_bridging(&p),
        Command::Combine { base, singletons, mode, filter, manifests, common } => {
            combine(&base, &singletons, mode, filter, &manifests, &common)
        }
        Command::Score { key, response, no_singletons, bridging, json, common } => {
            score(&key, &response, !no_singletons, bridging, json.as_deref(), &common)
        }
        Command::DdStats { corpus, manifests, top, json, common } => {
            dd_stats(&corpus, &manifests, top, json.as_deref(), &common)
        }
    }
}

fn load(inputs: &Inputs) -> Result<(Vec<Document>, StoreSet)> {
    let docs = read_corpus(&inputs.corpus)?;
    let stores = read_stores(&inputs.manifests)?;
    Ok((docs, stores))
}

fn write_loss_log(path: Option<&Path>, log: &anaphora::checkpoint::LossLog) -> Result<()> {
    match path {
        Some(p) => write_file(p, &log.to_csv()),
        None => Ok(()),
    }
}

fn validate(files: &[PathBuf], manifests: &[PathBuf], common: &Common) -> Result<()> {
    let config: Plain = configure(&Plain::default(), common.config.as_deref())?;
    header("validate", config.seed, &config);
    let stores = if manifests.is_empty() { None } else { Some(read_stores(manifests)?) };
    let mut report = String::new();
    for f in files {
        let docs = read_corpus(f)?;
        if let Some(stores) = &stores {
            for d in &docs {
                stores
                    .get(&d.id)?
                    .check_document(d)
                    .with_context(|| format!("{}: document `{}`", f.display(), d.id))?;
            }
        }
        let mentions: usize = docs.iter().map(|d| d.mentions.len()).sum();
        report.push_str(&format!("{}: {} documents, {} mentions, ok\n", f.display(), docs.len(), mentions));
    }
    write_out(common.out.as_deref(), &report)
}

fn train_wcs(t: &Train) -> Result<()> {
    let config: WcsConfig = configure(&WcsConfig::default(), t.common.config.as_deref())?;
    header("train-wcs", config.seed, &config);
    let (docs, stores) = load(&t.inputs)?;
    let pairs = pair(&docs, &stores)?;
    let (model, log) = wcs::train_wcs(&pairs, config)?;
    model.save(&t.model)?;
    write_loss_log(t.loss_log.as_deref(), &log)
}

fn predict_wcs(p: &Predict) -> Result<()> {
    let mut model = WcsModel::load(&p.model)?;
    let overrides: WcsConfig = configure(&model.config, p.common.config.as_deref())?;
    model.config.eviction = overrides.eviction;
    header("predict-wcs", model.config.seed, &model.config);
    let (docs, stores) = load(&p.inputs)?;
    let pairs = pair(&docs, &stores)?;
    let out = pairs
        .par_iter()
        .map(|(doc, store)| {
            let pred = model.predict_document(doc, store)?;
            let mut doc = (*doc).clone();
            doc.set_entities(&pred.partition);
            for m in &mut doc.mentions {
                m.referring = pred.referring.get(&m.id).map(|p| *p >= 0.5);
            }
            Ok(doc)
        })
        .collect::<Result<Vec<_>>>()?;
    write_out(p.common.out.as_deref(), &write_corpus(&out))
}

fn train_dd(t: &Train) -> Result<()> {
    let config: DdConfig = configure(&DdConfig::default(), t.common.config.as_deref())?;
    header("train-dd", config.seed, &config);
    let (docs, stores) = load(&t.inputs)?;
    let pairs = pair(&docs, &stores)?;
    let per_doc = pairs
        .par_iter()
        .map(|(d, s)| dd::prepare_document(d, s, &config))
        .collect::<Result<Vec<_>, _>>()?;
    let mut inputs: Vec<_> = per_doc.into_iter().flatten().collect();
    if config.undersample {
        let before = inputs.len();
        inputs = undersample(&inputs, |x| x.class, config.seed);
        log::info!("undersampled {before} segments to {}", inputs.len());
    }
    let (model, log) = dd::train_dd(&inputs, config)?;
    model.save(&t.model)?;
    write_loss_log(t.loss_log.as_deref(), &log)
}

fn predict_dd(p: &Predict, error_report: Option<&Path>) -> Result<()> {
    let mut model = DdModel::load(&p.model)?;
    let overrides: DdConfig = configure(&model.config, p.common.config.as_deref())?;
    model.config.anaphors = overrides.anaphors;
    model.config.segment_limit = overrides.segment_limit;
    model.config.max_width = overrides.max_width;
    header("predict-dd", model.config.seed, &model.config);
    let (docs, stores) = load(&p.inputs)?;
    let pairs = pair(&docs, &stores)?;
    let results = pairs
        .par_iter()
        .map(|(doc, store)| {
            let mut counted = (*doc).clone();
            store.apply_subtoken_counts(&mut counted)?;
            let segments = dd::document_segments(doc, store, &model.config)?;
            let mut preds = Vec::new();
            let mut cases = Vec::new();
            for seg in &segments {
                let x = dd::prepare_segment(&counted, store, seg, &model.config)?;
                let pred = model.predict(&x);
                if seg.class == AnaphorClass::DiscourseDeixis {
                    cases.push(ErrorCase::new(&counted, &seg.gold, pred.antecedent, pred.class));
                }
                preds.push(pred);
            }
            Ok((dd::apply_predictions(doc, &preds), cases))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = ErrorReport::new();
    let mut out = Vec::new();
    for (doc, cases) in results {
        cases.iter().for_each(|c| report.add(c));
        out.push(doc);
    }
    if let Some(path) = error_report {
        write_file(path, &report.to_csv())?;
    }
    write_out(p.common.out.as_deref(), &write_corpus(&out))
}

fn train_bridging(t: &Train) -> Result<()> {
    let config: BridgingConfig = configure(&BridgingConfig::default(), t.common.config.as_deref())?;
    header("train-bridging", config.seed, &config);
    let (docs, stores) = load(&t.inputs)?;
    let pairs = pair(&docs, &stores)?;
    let per_doc = pairs
        .par_iter()
        .map(|(d, s)| bridging::prepare_document(d, s, &config))
        .collect::<Result<Vec<_>, _>>()?;
    let mut inputs = Vec::new();
    let mut skipped = bridging::Skipped::default();
    for (x, s) in per_doc {
        inputs.extend(x);
        skipped += s;
    }
    if skipped != bridging::Skipped::default() {
        log::warn!(
            "skipped {} anaphors without preceding mentions and {} with a following antecedent",
            skipped.no_candidates,
            skipped.gold_not_in_candidates
        );
    }
    let (model, log) = bridging::train_bridging(&inputs, config)?;
    model.save(&t.model)?;
    write_loss_log(t.loss_log.as_deref(), &log)
}

fn predict_bridging(p: &Predict) -> Result<()> {
    let model = BridgingModel::load(&p.model)?;
    let _: BridgingConfig = configure(&model.config, p.common.config.as_deref())?;
    header("predict-bridging", model.config.seed, &model.config);
    let (docs, stores) = load(&p.inputs)?;
    let pairs = pair(&docs, &stores)?;
    let results = pairs
        .par_iter()
        .map(|(doc, store)| {
            let anaphors: Vec<(String, Option<String>)> =
                doc.bridging.iter().map(|l| (l.anaphor.clone(), Some(l.antecedent.clone()))).collect();
            let inputs = bridging::prepare(doc, store, &anaphors, &model.config)?;
            let links = bridging::predict(&model, &inputs);
            // Scored over the anaphors whose antecedent precedes them.
            let (instances, _) = bridging::build_instances(doc);
            let gold: Vec<Link> =
                instances.into_iter().map(|i| Link { anaphor: i.anaphor, antecedent: i.gold }).collect();
            let scored: Vec<Link> =
                links.iter().filter(|l| gold.iter().any(|g| g.anaphor == l.anaphor)).cloned().collect();
            let counts = metrics::entity_counts(&gold, &scored, &doc.entity_set())?;
            Ok((bridging::apply_predictions(doc, &links), counts))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut total = Counts::default();
    let mut out = Vec::new();
    for (doc, counts) in results {
        total += counts;
        out.push(doc);
    }
    log::info!("Entity-F1 {:.2}", 100.0 * total.prf().f1);
    write_out(p.common.out.as_deref(), &write_corpus(&out))
}

/// Documents of `other` keyed by id, checked against `base`.
fn match_documents<'a>(base: &[Document], other: &'a [Document], what: &str) -> Result<Vec<&'a Document>> {
    let by_id: BTreeMap<&str, &Document> = other.iter().map(|d| (d.id.as_str(), d)).collect();
    base.iter()
        .map(|d| {
            let o = by_id.get(d.id.as_str()).with_context(|| format!("document `{}` missing from the {what}", d.id))?;
            check_same_document(d, o)?;
            Ok(*o)
        })
        .collect()
}

fn combine(base: &Path, other: &Path, mode: Mode, filter: bool, manifests: &[PathBuf], common: &Common) -> Result<()> {
    let config: CombineConfig = configure(&CombineConfig::default(), common.config.as_deref())?;
    header("combine", config.seed, &config);
    let base_docs = read_corpus(base)?;
    let other_docs = read_corpus(other)?;
    let others = match_documents(&base_docs, &other_docs, "second system")?;
    let stores = match (filter, manifests.is_empty()) {
        (true, true) => bail!("--filter needs --manifests"),
        (true, false) => Some(read_stores(manifests)?),
        (false, _) => None,
    };
    let out = base_docs
        .par_iter()
        .zip(others.par_iter())
        .map(|(a, b)| {
            let pa = a.span_partition()?;
            let pb = b.span_partition()?;
            let mut combined = match mode {
                Mode::MergeSingletons => combiner::merge_singletons(&pa, &pb),
                Mode::PronounPartition => combiner::combine_pronoun_partition(&pa, &pb, |s| is_pronoun_span(a, *s)),
            };
            if let Some(stores) = &stores {
                combined = combiner::filter_partition(&combined, a, stores.get(&a.id)?, &config.space)?;
            }
            Ok(a.with_span_partition(&combined))
        })
        .collect::<Result<Vec<_>>>()?;
    write_out(common.out.as_deref(), &write_corpus(&out))
}

/// `links` of `response` rewritten to the ids of the key mentions with the
/// same primary span; unmatched ids can never be correct.
fn map_links(key: &Document, response: &Document) -> Vec<Link> {
    let by_span: BTreeMap<Span, &str> = key.mentions.iter().map(|m| (m.span, m.id.as_str())).collect();
    let id_of = |id: &str| match response.mention(id).and_then(|m| by_span.get(&m.span)) {
        Some(k) => k.to_string(),
        None => format!("response:{id}"),
    };
    response
        .bridging
        .iter()
        .map(|l| Link { anaphor: id_of(&l.anaphor), antecedent: id_of(&l.antecedent) })
        .collect()
}

fn score(
    key: &Path,
    response: &Path,
    include_singletons: bool,
    with_bridging: bool,
    json: Option<&Path>,
    common: &Common,
) -> Result<()> {
    let config: Plain = configure(&Plain::default(), common.config.as_deref())?;
    header("score", config.seed, &config);
    let keys = read_corpus(key)?;
    let response_docs = read_corpus(response)?;
    let responses = match_documents(&keys, &response_docs, "response")?;
    let mut with = CorefAccumulator::default();
    let mut without = CorefAccumulator::default();
    let mut mentions = Counts::default();
    let mut entity = Counts::default();
    for (k, r) in keys.iter().zip(&responses) {
        let (pk, pr): (Partition<Span>, Partition<Span>) = (k.span_partition()?, r.span_partition()?);
        with.add(&pk, &pr, true);
        without.add(&pk, &pr, false);
        mentions += metrics::mention_counts(&pk.mentions(), &pr.mentions());
        if with_bridging {
            entity += metrics::entity_counts(&k.bridging, &map_links(k, r), &k.entity_set())
                .with_context(|| format!("bridging links of `{}`", k.id))?;
        }
    }
    let report = ScoreReport {
        documents: keys.len(),
        with_singletons: with.scores(),
        without_singletons: without.scores(),
        mentions: mentions.prf(),
        entity_f1: with_bridging.then(|| 100.0 * entity.prf().f1),
    };
    if let Some(p) = json {
        write_file(p, &(serde_json::to_string_pretty(&report)? + "\n"))?;
    }
    write_out(common.out.as_deref(), &report.table(include_singletons))
}

fn dd_stats(corpus: &Path, manifests: &[PathBuf], top: usize, json: Option<&Path>, common: &Common) -> Result<()> {
    let config: StatsConfig = configure(&StatsConfig::default(), common.config.as_deref())?;
    header("dd-stats", config.seed, &config);
    let docs = read_corpus(corpus)?;
    let stores = if manifests.is_empty() { None } else { Some(read_stores(manifests)?) };
    let mut stats = DdStats::new();
    for d in &docs {
        let store = stores.as_ref().map(|s| s.get(&d.id)).transpose()?;
        stats.add_document(d, store, config.segment_limit);
    }
    if let Some(p) = json {
        write_file(p, &(serde_json::to_string_pretty(&stats)? + "\n"))?;
    }
    write_out(common.out.as_deref(), &stats.report(top))
}
