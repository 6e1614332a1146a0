//! The `embert` command line: one subcommand per pipeline step.
//!
//! `--config FILE` reads `key=value` lines; each key names a long flag of
//! the chosen subcommand and is used only when that flag is absent from the
//! command line.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

use crate::alignment::{self, AlignedEntities, AlignmentMatrix, TokenTable};
use crate::corpus::{self, Collection, CollectionPaths};
use crate::embeddings::{self, EmbeddingConfig, JointEmbeddingTable};
use crate::encoder::{EncoderConfig, EncoderWeights, TrainOptions};
use crate::error::{Error, Result};
use crate::eval;
use crate::pipeline::{self, Featurizer, Run};
use crate::retrieval::{self, InvertedIndex};
use crate::synth::{self, SynthConfig};
use crate::tokenizer::{self, Vocabulary};

#[derive(Debug, Parser)]
#[command(
    name = "embert",
    version,
    about = "Entity-enriched transformer re-ranking at desk scale"
)]
pub struct Cli {
    /// `key=value` defaults for flags of the subcommand.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Seed for every stochastic step.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct CollectionArgs {
    /// Documents, `doc_id<TAB>text`.
    #[arg(long)]
    pub docs: PathBuf,
    /// Queries, `query_id<TAB>text[<TAB>type]`.
    #[arg(long)]
    pub queries: PathBuf,
    #[arg(long)]
    pub qrels: Option<PathBuf>,
    #[arg(long)]
    pub annotations: Option<PathBuf>,
    #[arg(long)]
    pub folds: Option<PathBuf>,
}

impl CollectionArgs {
    fn load(&self) -> Result<Collection> {
        corpus::load_collection(&CollectionPaths {
            docs: self.docs.clone(),
            queries: self.queries.clone(),
            qrels: self.qrels.clone(),
            annotations: self.annotations.clone(),
            folds: self.folds.clone(),
        })
    }
}

#[derive(Debug, Args, Clone)]
pub struct EntityArgs {
    /// Insert entity tokens after annotated mentions.
    #[arg(long, value_enum, default_value_t = Switch::On)]
    pub entities: Switch,
    /// Joint word/entity embeddings (required with `--entities on`).
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Alignment matrix (required with `--entities on`).
    #[arg(long)]
    pub alignment: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Stage {
    Stage1,
    Stage2,
}

#[derive(Debug, Args, Clone)]
pub struct TrainArgs {
    #[arg(long, default_value_t = 0.05)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 1)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0)]
    pub warmup_steps: usize,
    #[arg(long, default_value_t = 8)]
    pub batch_size: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Learn a word-piece vocabulary from document texts.
    BuildVocab {
        #[arg(long, required = true, num_args = 1..)]
        docs: Vec<PathBuf>,
        #[arg(long)]
        target_size: usize,
        /// Add one entity token per graph entity.
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train joint word/entity embeddings.
    TrainEmbeddings {
        #[arg(long, required = true, num_args = 1..)]
        docs: Vec<PathBuf>,
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value_t = 16)]
        dim: usize,
        #[arg(long, default_value_t = 2)]
        window: usize,
        #[arg(long, default_value_t = 5)]
        negatives: usize,
        #[arg(long, default_value_t = 5)]
        epochs: usize,
        #[arg(long, default_value_t = 0.025)]
        learning_rate: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the linear map from the embedding space to encoder token space.
    FitAlignment {
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        vocab: PathBuf,
        /// Encoder weights providing the token table.
        #[arg(long)]
        model: PathBuf,
        /// Create freshly initialized weights at `--model` first.
        #[arg(long)]
        init: bool,
        /// With `--init`, seed the token rows of words in the embedding
        /// table from their embeddings.
        #[arg(long, requires = "init")]
        warm_start: bool,
        #[arg(long, default_value_t = 64)]
        d_model: usize,
        #[arg(long, default_value_t = 2)]
        layers: usize,
        #[arg(long, default_value_t = 4)]
        heads: usize,
        #[arg(long, default_value_t = 256)]
        d_ff: usize,
        #[arg(long, default_value_t = 512)]
        max_positions: usize,
        #[arg(long)]
        ridge: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a BM25 index over documents.
    Index {
        #[arg(long)]
        docs: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// BM25 first-stage run for every query.
    Search {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        #[arg(long, default_value_t = 100)]
        k: usize,
        #[arg(long, default_value = "bm25")]
        tag: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fine-tune the encoder (stage 1: general triples; stage 2: per fold).
    Train {
        #[arg(long, value_enum)]
        stage: Stage,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        vocab: PathBuf,
        #[command(flatten)]
        entity: EntityArgs,
        #[command(flatten)]
        collection: CollectionArgs,
        /// Stage-1 triples, `query_text<TAB>positive<TAB>negative`.
        #[arg(long)]
        triples: Option<PathBuf>,
        #[command(flatten)]
        train: TrainArgs,
        /// Model file (stage 1) or directory of `fold<i>.model` (stage 2).
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-rank a run with the encoder.
    Rerank {
        #[arg(long)]
        run: PathBuf,
        /// One model file, or a directory of fold models used on each
        /// fold's test queries.
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        vocab: PathBuf,
        #[command(flatten)]
        entity: EntityArgs,
        #[command(flatten)]
        collection: CollectionArgs,
        #[arg(long, default_value_t = 100)]
        depth: usize,
        #[arg(long)]
        tag: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// NDCG report of a run, optionally with a paired t-test against another.
    Evaluate {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        qrels: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "10,100")]
        cutoffs: Vec<usize>,
        #[arg(long)]
        compare: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Category breakdowns and plot-ready exports.
    Analyze {
        #[command(subcommand)]
        what: Analysis,
    },
    /// Check a collection against a knowledge graph.
    Validate {
        #[command(flatten)]
        collection: CollectionArgs,
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic desk collection.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 200)]
        num_docs: usize,
        #[arg(long, default_value_t = 40)]
        num_queries: usize,
    },
}

#[derive(Debug, Subcommand)]
pub enum Analysis {
    /// Mean NDCG@10 per mention category for two runs.
    Category {
        #[arg(long)]
        run_a: PathBuf,
        #[arg(long)]
        run_b: PathBuf,
        #[arg(long)]
        vocab: PathBuf,
        #[command(flatten)]
        collection: CollectionArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Query counts per mention category and query type.
    Crosstab {
        #[arg(long)]
        vocab: PathBuf,
        #[command(flatten)]
        collection: CollectionArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Final-layer vectors of entity tokens and their mentions.
    ExportEmbeddings {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        vocab: PathBuf,
        #[command(flatten)]
        entity: EntityArgs,
        #[command(flatten)]
        collection: CollectionArgs,
        /// `query_id<TAB>doc_id` pairs.
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// First layer, first head `[CLS]` attention over the input tokens.
    ExportAttention {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        vocab: PathBuf,
        #[command(flatten)]
        entity: EntityArgs,
        #[command(flatten)]
        collection: CollectionArgs,
        #[arg(long)]
        query: String,
        #[arg(long)]
        doc: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parse, run and map the outcome to an exit code (2 usage, 1 data error).
pub fn dispatch<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match parse_with_config(&argv) {
        Ok(cli) => cli,
        Err(ParseFailure::Clap(e)) => {
            let _ = e.print();
            return e.exit_code();
        }
        Err(ParseFailure::Data(e)) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) => 2,
                _ => 1,
            }
        }
    }
}

enum ParseFailure {
    Clap(clap::Error),
    Data(Error),
}

fn parse_with_config(argv: &[OsString]) -> std::result::Result<Cli, ParseFailure> {
    // required flags may come from the file, so find it before clap runs
    let Some(path) = config_path(argv) else {
        return Cli::try_parse_from(argv).map_err(ParseFailure::Clap);
    };
    let (name, content) = corpus::read_file(&path).map_err(ParseFailure::Data)?;
    let mut pairs = Vec::new();
    for (ln, line) in corpus::lines(&content) {
        let line = line.trim();
        if line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| ParseFailure::Data(Error::parse(&name, ln, "expected `key=value`")))?;
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    let augmented = inject_config(argv, &pairs).map_err(ParseFailure::Data)?;
    Cli::try_parse_from(augmented).map_err(ParseFailure::Clap)
}

fn config_path(argv: &[OsString]) -> Option<PathBuf> {
    let mut words = argv.iter().skip(1).map(|a| a.to_string_lossy());
    while let Some(w) = words.next() {
        if w == "--" {
            break;
        }
        if w == "--config" {
            return words.next().map(|p| PathBuf::from(p.as_ref()));
        }
        if let Some(p) = w.strip_prefix("--config=") {
            return Some(PathBuf::from(p));
        }
    }
    None
}

/// Append `--key value` for config keys the subcommand accepts and the
/// command line does not set.
fn inject_config(argv: &[OsString], pairs: &[(String, String)]) -> Result<Vec<OsString>> {
    let words: Vec<String> = argv
        .iter()
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    let mut cmd = Cli::command();
    let mut depth = 0;
    let mut path = Vec::new();
    for w in &words[1..] {
        if w.starts_with('-') {
            continue;
        }
        let Some(sub) = cmd.find_subcommand(w).cloned() else {
            continue;
        };
        path.push(w.clone());
        cmd = sub;
        depth += 1;
    }
    if depth == 0 {
        return Ok(argv.to_vec());
    }
    let accepted: BTreeSet<String> = cmd
        .get_arguments()
        .filter_map(|a| a.get_long().map(str::to_string))
        .collect();
    let given: BTreeSet<&str> = words
        .iter()
        .filter_map(|w| w.strip_prefix("--"))
        .map(|w| w.split('=').next().unwrap_or(w))
        .collect();
    let mut out = argv.to_vec();
    for (k, v) in pairs {
        if k == "seed" {
            if !given.contains("seed") {
                out.push("--seed".into());
                out.push(v.into());
            }
            continue;
        }
        if !accepted.contains(k) {
            log::debug!("config key `{k}` does not apply to `{}`", path.join(" "));
            continue;
        }
        if given.contains(k.as_str()) {
            continue;
        }
        out.push(format!("--{k}").into());
        if v != "true" {
            out.push(v.into());
        }
    }
    Ok(out)
}

fn write_or_print(out: Option<&Path>, content: &str) -> Result<()> {
    match out {
        Some(p) => corpus::write_file(p, content),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn read_doc_texts(paths: &[PathBuf]) -> Result<Vec<String>> {
    let mut texts = Vec::new();
    for p in paths {
        let (name, content) = corpus::read_file(p)?;
        for (ln, line) in corpus::lines(&content) {
            let (_, t) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(&name, ln, "expected `id<TAB>text`"))?;
            texts.push(t.to_string());
        }
    }
    Ok(texts)
}

/// Entity inputs for the requested mode; `None` when entities are off.
fn load_aligned(args: &EntityArgs, vocab: &Vocabulary) -> Result<Option<AlignedEntities>> {
    if args.entities == Switch::Off {
        return Ok(None);
    }
    let (Some(e), Some(a)) = (&args.embeddings, &args.alignment) else {
        return Err(Error::Config(
            "--entities on needs --embeddings and --alignment".into(),
        ));
    };
    let table = JointEmbeddingTable::load(e)?;
    let w = AlignmentMatrix::load(a)?;
    if w.cols() != table.dim() {
        return Err(Error::Config(format!(
            "alignment expects {}-dimensional embeddings, table has {}",
            w.cols(),
            table.dim()
        )));
    }
    Ok(Some(AlignedEntities::new(vocab, &table, &w)))
}

/// Featurizer whose inputs fit a model with `max_positions` positions.
fn featurizer<'a>(
    vocab: &'a Vocabulary,
    aligned: &'a Option<AlignedEntities>,
    max_positions: usize,
) -> Featurizer<'a> {
    let mut f = match aligned {
        Some(a) => Featurizer::with_entities(vocab, a),
        None => Featurizer::plain(vocab),
    };
    f.limits.max_total = f.limits.max_total.min(max_positions);
    f
}

fn train_options(t: &TrainArgs, seed: u64) -> TrainOptions {
    TrainOptions {
        learning_rate: t.learning_rate,
        epochs: t.epochs,
        warmup_steps: t.warmup_steps,
        seed,
    }
}

fn fold_model_path(dir: &Path, fold_id: usize) -> PathBuf {
    dir.join(format!("fold{fold_id}.model"))
}

pub fn run(cli: Cli) -> Result<()> {
    let seed = cli.seed;
    match cli.command {
        Command::BuildVocab {
            docs,
            target_size,
            graph,
            out,
        } => {
            let texts = read_doc_texts(&docs)?;
            let mut vocab = tokenizer::build_vocab(texts.iter().map(String::as_str), target_size)?;
            if let Some(g) = graph {
                vocab = vocab.with_entities(corpus::load_graph(&g)?.entities().iter().cloned())?;
            }
            log::info!(
                "{} pieces, {} entity tokens",
                vocab.num_pieces(),
                vocab.num_entities()
            );
            vocab.save(&out)
        }
        Command::TrainEmbeddings {
            docs,
            graph,
            dim,
            window,
            negatives,
            epochs,
            learning_rate,
            out,
        } => {
            let texts = read_doc_texts(&docs)?;
            let graph = corpus::load_graph(&graph)?;
            let cfg = EmbeddingConfig {
                dim,
                window,
                negatives,
                epochs,
                learning_rate,
                seed,
                min_count: 0,
            };
            let (table, trace) =
                embeddings::train_joint_embeddings(texts.iter().map(String::as_str), &graph, &cfg)?;
            log::info!("loss trace {trace:?}");
            table.save(&out)
        }
        Command::FitAlignment {
            embeddings,
            vocab,
            model,
            init,
            warm_start,
            d_model,
            layers,
            heads,
            d_ff,
            max_positions,
            ridge,
            out,
        } => {
            let vocab = Vocabulary::load(&vocab)?;
            let table = JointEmbeddingTable::load(&embeddings)?;
            let weights = if init {
                let mut w = EncoderWeights::init(&EncoderConfig {
                    d_model,
                    n_layers: layers,
                    n_heads: heads,
                    d_ff,
                    max_positions,
                    vocab_size: vocab.num_pieces(),
                    dropout: 0.0,
                    seed,
                })?;
                if warm_start {
                    let n = alignment::warm_start_tokens(
                        &mut w.token_embeddings,
                        d_model,
                        &vocab,
                        &table,
                        seed,
                    );
                    log::info!("warm-started {n} token rows");
                }
                w.save(&model)?;
                w
            } else {
                EncoderWeights::load(&model)?
            };
            if weights.config.vocab_size != vocab.num_pieces() {
                return Err(Error::Config(format!(
                    "model has {} token rows, vocabulary has {} pieces",
                    weights.config.vocab_size,
                    vocab.num_pieces()
                )));
            }
            let tokens = TokenTable {
                vocab: &vocab,
                rows: &weights.token_embeddings,
                dim: weights.config.d_model,
            };
            let w = alignment::fit_alignment(&table, &tokens, ridge)?;
            log::info!("alignment fitted on {} shared words", w.fitted_on);
            w.save(&out)
        }
        Command::Index { docs, out } => {
            let (name, content) = corpus::read_file(&docs)?;
            let mut rows = Vec::new();
            for (ln, line) in corpus::lines(&content) {
                let (id, t) = line
                    .split_once('\t')
                    .ok_or_else(|| Error::parse(&name, ln, "expected `id<TAB>text`"))?;
                rows.push((id.to_string(), crate::text::normalize(t)));
            }
            InvertedIndex::build(rows.iter().map(|(a, b)| (a.as_str(), b.as_str())))?.save(&out)
        }
        Command::Search {
            index,
            queries,
            k,
            tag,
            out,
        } => {
            if k == 0 {
                return Err(Error::Config("--k must be at least 1".into()));
            }
            let index = InvertedIndex::load(&index)?;
            let (name, content) = corpus::read_file(&queries)?;
            let mut run = Run::new(tag);
            for (ln, line) in corpus::lines(&content) {
                let mut f = line.split('\t');
                let (Some(id), Some(t)) = (f.next(), f.next()) else {
                    return Err(Error::parse(&name, ln, "expected `id<TAB>text`"));
                };
                let r = retrieval::search_query(&index, id, &crate::text::normalize(t), k);
                run.insert(r.query_id, r.ranked)?;
            }
            pipeline::write_run(&run, &out)
        }
        Command::Train {
            stage,
            model,
            vocab,
            entity,
            collection,
            triples,
            train,
            out,
        } => {
            let vocab = Vocabulary::load(&vocab)?;
            let aligned = load_aligned(&entity, &vocab)?;
            let weights = EncoderWeights::load(&model)?;
            let feat = featurizer(&vocab, &aligned, weights.config.max_positions);
            let coll = collection.load()?;
            let opts = train_options(&train, seed);
            match stage {
                Stage::Stage1 => {
                    let triples =
                        triples.ok_or_else(|| Error::Config("stage1 needs --triples".into()))?;
                    let triples = pipeline::load_triples(&triples)?;
                    let (w, _) = pipeline::train_stage1(
                        &weights,
                        &triples,
                        &coll,
                        &feat,
                        &opts,
                        train.batch_size,
                        seed,
                    )?;
                    w.save(&out)
                }
                Stage::Stage2 => {
                    if coll.folds().is_empty() {
                        return Err(Error::Config("stage2 needs --folds".into()));
                    }
                    let mut summary = String::from("fold\tpairs_loss_before\tpairs_loss_after\n");
                    for fold in coll.folds() {
                        let m = pipeline::train_fold(
                            &weights,
                            fold,
                            &coll,
                            &feat,
                            &opts,
                            train.batch_size,
                            seed,
                        )?;
                        m.weights.save(&fold_model_path(&out, m.fold_id))?;
                        let _ = writeln!(
                            summary,
                            "{}\t{:.6}\t{:.6}",
                            m.fold_id, m.initial_loss, m.final_loss
                        );
                    }
                    corpus::write_file(&out.join("training.tsv"), &summary)
                }
            }
        }
        Command::Rerank {
            run,
            model,
            vocab,
            entity,
            collection,
            depth,
            tag,
            out,
        } => {
            let vocab = Vocabulary::load(&vocab)?;
            let aligned = load_aligned(&entity, &vocab)?;
            let coll = collection.load()?;
            let first = pipeline::read_run(&run)?;
            let tag = tag.unwrap_or_else(|| {
                if aligned.is_some() {
                    "em-bert".into()
                } else {
                    "mono-bert".into()
                }
            });
            let reranked = if model.is_dir() {
                if coll.folds().is_empty() {
                    return Err(Error::Config("a model directory needs --folds".into()));
                }
                let models = coll
                    .folds()
                    .iter()
                    .map(|f| {
                        Ok(pipeline::FoldModel {
                            fold_id: f.fold_id,
                            weights: EncoderWeights::load(&fold_model_path(&model, f.fold_id))?,
                            trained_queries: f.train_query_ids.clone(),
                            initial_loss: f64::NAN,
                            final_loss: f64::NAN,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                let max_positions = models
                    .iter()
                    .map(|m| m.weights.config.max_positions)
                    .min()
                    .unwrap_or(0);
                let feat = featurizer(&vocab, &aligned, max_positions);
                let (r, log) = pipeline::rerank_folds(
                    &first,
                    coll.folds(),
                    &models,
                    &feat,
                    &coll,
                    depth,
                    &tag,
                )?;
                pipeline::check_fold_isolation(&log)?;
                r
            } else {
                let weights = EncoderWeights::load(&model)?;
                let scorer = pipeline::EncoderScorer {
                    weights: &weights,
                    featurizer: featurizer(&vocab, &aligned, weights.config.max_positions),
                    collection: &coll,
                };
                pipeline::rerank(&first, &scorer, depth, &tag)?
            };
            pipeline::write_run(&reranked, &out)
        }
        Command::Evaluate {
            run,
            qrels,
            cutoffs,
            compare,
            out,
        } => {
            if cutoffs.contains(&0) {
                return Err(Error::Config("cutoffs must be at least 1".into()));
            }
            let qrels = corpus::load_qrels(&qrels)?;
            let run = pipeline::read_run(&run)?;
            let report = eval::evaluate_run(&run, &qrels, &cutoffs);
            let mut text = report.to_tsv();
            if let Some(other) = compare {
                let other = pipeline::read_run(&other)?;
                let ids: Vec<String> = report.per_query.keys().cloned().collect();
                let b = eval::evaluate_queries(&other, &qrels, &cutoffs, &ids);
                text.push_str("#ttest\tcutoff\tmean_a\tmean_b\tt\tp\n");
                for &k in &cutoffs {
                    let t = eval::paired_ttest(&report.values(k), &b.values(k))?;
                    let _ = writeln!(
                        text,
                        "#ttest\t{k}\t{:.6}\t{:.6}\t{:.6}\t{:.6}{}",
                        report.mean(k),
                        b.mean(k),
                        t.t,
                        t.p,
                        if t.significant(0.05) { "\t*" } else { "" }
                    );
                }
            }
            write_or_print(out.as_deref(), &text)
        }
        Command::Analyze { what } => analyze(what),
        Command::Validate {
            collection,
            graph,
            out,
        } => {
            let coll = collection.load()?;
            let graph = corpus::load_graph(&graph)?;
            let report = corpus::validate(&coll, &graph);
            write_or_print(out.as_deref(), &report.to_tsv())?;
            if report.unknown_entities.is_empty() && report.unknown_qrel_ids.is_empty() {
                Ok(())
            } else {
                Err(Error::Invalid(
                    "collection references unknown entities or ids".into(),
                ))
            }
        }
        Command::Synth {
            out,
            num_docs,
            num_queries,
        } => {
            let data = synth::generate(&SynthConfig {
                docs: num_docs,
                queries: num_queries,
                seed,
                ..Default::default()
            })?;
            data.collection.save(&CollectionPaths {
                docs: out.join("docs.tsv"),
                queries: out.join("queries.tsv"),
                qrels: Some(out.join("qrels.txt")),
                annotations: Some(out.join("annotations.tsv")),
                folds: Some(out.join("folds.tsv")),
            })?;
            data.general.save(&CollectionPaths {
                docs: out.join("general_docs.tsv"),
                queries: out.join("general_queries.tsv"),
                qrels: None,
                annotations: Some(out.join("general_annotations.tsv")),
                folds: None,
            })?;
            corpus::write_file(
                &out.join("triples.tsv"),
                &pipeline::triples_tsv(&data.triples),
            )?;
            data.graph.save(&out.join("graph.tsv"))?;
            data.vocab.save(&out.join("vocab.txt"))
        }
    }
}

fn analyze(what: Analysis) -> Result<()> {
    match what {
        Analysis::Category {
            run_a,
            run_b,
            vocab,
            collection,
            out,
        } => {
            let vocab = Vocabulary::load(&vocab)?;
            let coll = collection.load()?;
            let qrels = coll.qrel_map();
            let a = pipeline::read_run(&run_a)?;
            let b = pipeline::read_run(&run_b)?;
            let rep = eval::category_report(&a, &b, &coll, &vocab, &qrels, 10);
            write_or_print(out.as_deref(), &rep.to_tsv())
        }
        Analysis::Crosstab {
            vocab,
            collection,
            out,
        } => {
            let vocab = Vocabulary::load(&vocab)?;
            let coll = collection.load()?;
            write_or_print(out.as_deref(), &eval::crosstab(&coll, &vocab).to_tsv())
        }
        Analysis::ExportEmbeddings {
            model,
            vocab,
            entity,
            collection,
            pairs,
            out,
        } => {
            let vocab = Vocabulary::load(&vocab)?;
            let aligned = load_aligned(&entity, &vocab)?;
            let coll = collection.load()?;
            let weights = EncoderWeights::load(&model)?;
            let feat = featurizer(&vocab, &aligned, weights.config.max_positions);
            let (name, content) = corpus::read_file(&pairs)?;
            let pairs = corpus::lines(&content)
                .map(|(ln, l)| {
                    l.split_once('\t')
                        .map(|(q, d)| (q.to_string(), d.to_string()))
                        .ok_or_else(|| Error::parse(&name, ln, "expected `query_id<TAB>doc_id`"))
                })
                .collect::<Result<Vec<_>>>()?;
            let rows = eval::export_final_embeddings(&weights, &feat, &coll, &pairs)?;
            write_or_print(out.as_deref(), &eval::embeddings_tsv(&rows))
        }
        Analysis::ExportAttention {
            model,
            vocab,
            entity,
            collection,
            query,
            doc,
            out,
        } => {
            let vocab = Vocabulary::load(&vocab)?;
            let aligned = load_aligned(&entity, &vocab)?;
            let coll = collection.load()?;
            let weights = EncoderWeights::load(&model)?;
            let feat = featurizer(&vocab, &aligned, weights.config.max_positions);
            let w = eval::export_attention(&weights, &feat, &coll, &query, &doc)?;
            write_or_print(out.as_deref(), &eval::attention_tsv(&w))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(args: &[&str]) -> Vec<OsString> {
        args.iter().map(OsString::from).collect()
    }

    #[test]
    fn config_fills_missing_flags_only() {
        let argv = os(&["embert", "evaluate", "--run", "r.trec", "--qrels", "q.txt"]);
        let pairs = vec![
            ("cutoffs".to_string(), "5,20".to_string()),
            ("run".to_string(), "other.trec".to_string()),
            ("depth".to_string(), "10".to_string()),
            ("seed".to_string(), "9".to_string()),
        ];
        let out = inject_config(&argv, &pairs).unwrap();
        let cli = Cli::try_parse_from(out).unwrap();
        assert_eq!(cli.seed, 9);
        match cli.command {
            Command::Evaluate { run, cutoffs, .. } => {
                assert_eq!(run, PathBuf::from("r.trec"));
                assert_eq!(cutoffs, [5, 20]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn nested_subcommand_keys() {
        let argv = os(&[
            "embert", "analyze", "crosstab", "--vocab", "v", "--docs", "d",
        ]);
        let pairs = vec![("queries".to_string(), "q.tsv".to_string())];
        let cli = Cli::try_parse_from(inject_config(&argv, &pairs).unwrap()).unwrap();
        assert!(matches!(
            cli.command,
            Command::Analyze {
                what: Analysis::Crosstab { .. }
            }
        ));
    }

    #[test]
    fn unknown_subcommand_is_usage_error() {
        assert_eq!(dispatch(["embert", "frobnicate"]), 2);
        assert_eq!(dispatch(["embert", "evaluate", "--run"]), 2);
    }

    #[test]
    fn missing_input_is_data_error() {
        assert_eq!(
            dispatch([
                "embert",
                "evaluate",
                "--run",
                "/nonexistent/r",
                "--qrels",
                "/nonexistent/q"
            ]),
            1
        );
    }

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }
}
