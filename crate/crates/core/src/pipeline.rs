//! Multi-stage ranking: BM25 first stage, point-wise encoder re-ranking and
//! two-stage fine-tuning over query folds.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::alignment::AlignedEntities;
use crate::corpus::{self, Collection, FoldSpec};
use crate::encoder::{self, EncoderWeights, EntityInputs, NoEntities, TrainOptions, TrainingBatch};
use crate::error::{Error, Result};
use crate::retrieval::{self, InvertedIndex};
use crate::text;
use crate::tokenizer::{self, InputLimits, ModelInput, Token, Vocabulary};

#[derive(Debug, Clone, PartialEq)]
pub struct RankedDoc {
    pub doc_id: String,
    pub score: f64,
    pub rank: usize,
}

/// A ranking per query. Ranks are `1..=n` and scores never increase.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Run {
    pub tag: String,
    queries: BTreeMap<String, Vec<RankedDoc>>,
}

impl Run {
    pub fn new(tag: impl Into<String>) -> Self {
        Run {
            tag: tag.into(),
            queries: BTreeMap::new(),
        }
    }

    /// Add a query ranking given in rank order.
    pub fn insert(
        &mut self,
        query_id: impl Into<String>,
        ranked: Vec<(String, f64)>,
    ) -> Result<()> {
        let query_id = query_id.into();
        if ranked.windows(2).any(|w| !(w[0].1 >= w[1].1)) {
            return Err(Error::Invalid(format!(
                "scores for query {query_id} must be non-increasing"
            )));
        }
        let mut seen = BTreeSet::new();
        if let Some((d, _)) = ranked.iter().find(|(d, _)| !seen.insert(d.as_str())) {
            return Err(Error::DuplicateId {
                kind: "ranked document",
                id: d.clone(),
            });
        }
        let docs = ranked
            .into_iter()
            .enumerate()
            .map(|(i, (doc_id, score))| RankedDoc {
                doc_id,
                score,
                rank: i + 1,
            })
            .collect();
        self.queries.insert(query_id, docs);
        Ok(())
    }

    pub fn query_ids(&self) -> impl Iterator<Item = &str> {
        self.queries.keys().map(String::as_str)
    }

    pub fn ranking(&self, query_id: &str) -> Option<&[RankedDoc]> {
        self.queries.get(query_id).map(Vec::as_slice)
    }

    pub fn doc_ids(&self, query_id: &str) -> Vec<&str> {
        self.ranking(query_id)
            .map(|r| r.iter().map(|d| d.doc_id.as_str()).collect())
            .unwrap_or_default()
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    /// Candidate sets per query, ignoring order and scores.
    pub fn candidates(&self) -> BTreeMap<&str, BTreeSet<&str>> {
        self.queries
            .iter()
            .map(|(q, docs)| (q.as_str(), docs.iter().map(|d| d.doc_id.as_str()).collect()))
            .collect()
    }

    pub fn to_trec(&self) -> String {
        let mut s = String::new();
        for (q, docs) in &self.queries {
            for d in docs {
                let _ = writeln!(s, "{q} Q0 {} {} {} {}", d.doc_id, d.rank, d.score, self.tag);
            }
        }
        s
    }

    pub fn parse(name: &str, content: &str) -> Result<Self> {
        let mut run = Run::new("");
        let mut tag: Option<String> = None;
        let mut current: Option<(String, Vec<(String, f64)>)> = None;
        let mut finished = BTreeSet::new();
        for (ln, line) in corpus::lines(content) {
            let f: Vec<&str> = line.split_whitespace().collect();
            let [q, q0, doc, rank, score, t] = f.as_slice() else {
                return Err(Error::parse(
                    name,
                    ln,
                    format!("expected 6 fields, got {}", f.len()),
                ));
            };
            if *q0 != "Q0" {
                return Err(Error::parse(name, ln, "second field must be Q0"));
            }
            let rank: usize = rank
                .parse()
                .map_err(|_| Error::parse(name, ln, format!("bad rank `{rank}`")))?;
            let score: f64 = score
                .parse()
                .map_err(|_| Error::parse(name, ln, format!("bad score `{score}`")))?;
            match &tag {
                Some(prev) if prev != t => {
                    return Err(Error::parse(name, ln, "run tag changes within file"))
                }
                _ => tag = Some(t.to_string()),
            }
            if current.as_ref().is_none_or(|(cq, _)| cq != q) {
                if let Some((cq, docs)) = current.take() {
                    finished.insert(cq.clone());
                    run.insert(cq, docs)
                        .map_err(|e| Error::parse(name, ln, e.to_string()))?;
                }
                if finished.contains(*q) {
                    return Err(Error::parse(
                        name,
                        ln,
                        format!("query {q} is not contiguous"),
                    ));
                }
                current = Some((q.to_string(), Vec::new()));
            }
            let (_, docs) = current.as_mut().expect("set above");
            if rank != docs.len() + 1 {
                return Err(Error::parse(
                    name,
                    ln,
                    format!("rank {rank} for query {q}, expected {}", docs.len() + 1),
                ));
            }
            docs.push((doc.to_string(), score));
        }
        if let Some((cq, docs)) = current {
            run.insert(cq, docs)
                .map_err(|e| Error::parse(name, 0, e.to_string()))?;
        }
        run.tag = tag.unwrap_or_default();
        Ok(run)
    }
}

pub fn write_run(run: &Run, path: &Path) -> Result<()> {
    corpus::write_file(path, &run.to_trec())
}

pub fn read_run(path: &Path) -> Result<Run> {
    let (name, content) = corpus::read_file(path)?;
    Run::parse(&name, &content)
}

/// BM25 run over every query of the collection.
pub fn first_stage_run(
    index: &InvertedIndex,
    collection: &Collection,
    k_top: usize,
    tag: &str,
) -> Result<Run> {
    let mut run = Run::new(tag);
    for q in collection.queries() {
        let r = retrieval::search_query(index, &q.query_id, q.text(), k_top);
        run.insert(r.query_id, r.ranked)?;
    }
    Ok(run)
}

/// Builds model inputs for (query, document) pairs. With `entities` set,
/// annotated mentions are followed by entity tokens (for entities that have
/// an aligned vector); without it the same texts are tokenized plainly.
#[derive(Clone, Copy)]
pub struct Featurizer<'a> {
    pub vocab: &'a Vocabulary,
    pub entities: Option<&'a AlignedEntities>,
    pub limits: InputLimits,
}

impl<'a> Featurizer<'a> {
    pub fn plain(vocab: &'a Vocabulary) -> Self {
        Featurizer {
            vocab,
            entities: None,
            limits: InputLimits::default(),
        }
    }

    pub fn with_entities(vocab: &'a Vocabulary, entities: &'a AlignedEntities) -> Self {
        Featurizer {
            vocab,
            entities: Some(entities),
            limits: InputLimits::default(),
        }
    }

    pub fn entity_mode(&self) -> bool {
        self.entities.is_some()
    }

    pub fn entity_inputs(&self) -> &'a dyn EntityInputs {
        match self.entities {
            Some(e) => e,
            None => &NoEntities,
        }
    }

    /// Tokens of `text` owned by `owner` in `collection` (its annotations
    /// apply in entity mode only).
    pub fn tokens(&self, collection: &Collection, owner: &str, text: &str) -> Result<Vec<Token>> {
        match self.entities {
            Some(aligned) => {
                let anns = collection.annotations_for(owner);
                tokenizer::annotate_tokens_with(text, &anns, self.vocab, |e| {
                    aligned.has_entity(self.vocab, e)
                })
            }
            None => Ok(tokenizer::wordpiece_tokenize(text, self.vocab)),
        }
    }

    pub fn input(
        &self,
        collection: &Collection,
        query_owner: &str,
        query_text: &str,
        doc_id: &str,
    ) -> Result<ModelInput> {
        let doc = collection
            .doc(doc_id)
            .ok_or_else(|| Error::MissingDocText(doc_id.to_string()))?;
        let q = self.tokens(collection, query_owner, query_text)?;
        let d = self.tokens(collection, doc_id, doc.text())?;
        Ok(tokenizer::build_input(&q, &d, self.vocab, self.limits))
    }

    pub fn query_input(
        &self,
        collection: &Collection,
        query_id: &str,
        doc_id: &str,
    ) -> Result<ModelInput> {
        let q = collection
            .query(query_id)
            .ok_or_else(|| Error::UnknownKey(query_id.to_string()))?;
        self.input(collection, query_id, q.text(), doc_id)
    }
}

/// Maps a (query, document) pair to a relevance score.
pub trait Scorer {
    fn score(&self, query_id: &str, doc_id: &str) -> Result<f64>;
}

pub struct EncoderScorer<'a> {
    pub weights: &'a EncoderWeights,
    pub featurizer: Featurizer<'a>,
    pub collection: &'a Collection,
}

impl Scorer for EncoderScorer<'_> {
    fn score(&self, query_id: &str, doc_id: &str) -> Result<f64> {
        let input = self
            .featurizer
            .query_input(self.collection, query_id, doc_id)?;
        Ok(self
            .weights
            .forward(&input, self.featurizer.entity_inputs())?
            .probability)
    }
}

impl<F> Scorer for F
where
    F: Fn(&str, &str) -> Result<f64>,
{
    fn score(&self, query_id: &str, doc_id: &str) -> Result<f64> {
        self(query_id, doc_id)
    }
}

/// Rescore the top `depth` candidates of `query_id` and sort them by score
/// (ties by doc id). Lower candidates follow in their original order with
/// scores shifted below the rescored block.
fn rerank_query(
    ranking: &[RankedDoc],
    query_id: &str,
    scorer: &dyn Scorer,
    depth: usize,
) -> Result<Vec<(String, f64)>> {
    let cut = depth.min(ranking.len());
    let mut head = Vec::with_capacity(ranking.len());
    for d in &ranking[..cut] {
        let s = scorer.score(query_id, &d.doc_id)?;
        if !s.is_finite() {
            return Err(Error::Invalid(format!(
                "non-finite score for {query_id}/{}",
                d.doc_id
            )));
        }
        head.push((d.doc_id.clone(), s));
    }
    head.sort_by(retrieval::rank_order);
    let floor = head.last().map_or(0.0, |(_, s)| *s);
    head.extend(
        ranking[cut..]
            .iter()
            .enumerate()
            .map(|(j, d)| (d.doc_id.clone(), floor - (j + 1) as f64)),
    );
    Ok(head)
}

pub fn rerank(run: &Run, scorer: &dyn Scorer, depth: usize, tag: &str) -> Result<Run> {
    if depth == 0 {
        return Err(Error::Config("re-ranking depth must be at least 1".into()));
    }
    let mut out = Run::new(tag);
    for (q, ranking) in &run.queries {
        out.insert(q.clone(), rerank_query(ranking, q, scorer, depth)?)?;
    }
    Ok(out)
}

/// Stage-1 training triple from a general ranking collection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Triple {
    pub query_text: String,
    pub positive: String,
    pub negative: String,
}

pub fn parse_triples(name: &str, content: &str) -> Result<Vec<Triple>> {
    corpus::lines(content)
        .map(|(ln, line)| {
            let f: Vec<&str> = line.split('\t').collect();
            match f.as_slice() {
                [q, p, n] => Ok(Triple {
                    query_text: q.to_string(),
                    positive: p.to_string(),
                    negative: n.to_string(),
                }),
                _ => Err(Error::parse(
                    name,
                    ln,
                    "expected `query_text<TAB>positive<TAB>negative`",
                )),
            }
        })
        .collect()
}

pub fn triples_tsv(triples: &[Triple]) -> String {
    let mut s = String::new();
    for t in triples {
        let _ = writeln!(s, "{}\t{}\t{}", t.query_text, t.positive, t.negative);
    }
    s
}

pub fn load_triples(path: &Path) -> Result<Vec<Triple>> {
    let (name, content) = corpus::read_file(path)?;
    parse_triples(&name, &content)
}

#[derive(Debug, Clone)]
pub struct StagePlan {
    pub triples: Vec<Triple>,
    pub folds: Vec<FoldSpec>,
    pub stage1: TrainOptions,
    pub stage2: TrainOptions,
    pub batch_size: usize,
    /// Seed for example shuffling.
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldModel {
    pub fold_id: usize,
    pub weights: EncoderWeights,
    pub trained_queries: BTreeSet<String>,
    /// Mean example loss over the fold's training pairs before and after
    /// stage 2.
    pub initial_loss: f64,
    pub final_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FineTuned {
    pub stage1: EncoderWeights,
    pub stage1_trace: Vec<f64>,
    pub folds: Vec<FoldModel>,
}

/// Which queries a fold model trained on and which it ranked.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldLogEntry {
    pub fold_id: usize,
    pub trained: BTreeSet<String>,
    pub evaluated: BTreeSet<String>,
}

fn make_batches(
    mut examples: Vec<(ModelInput, u8)>,
    batch_size: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<TrainingBatch>> {
    examples.shuffle(rng);
    examples
        .chunks(batch_size.max(1))
        .map(|c| {
            TrainingBatch::new(
                c.iter().map(|(i, _)| i.clone()).collect(),
                c.iter().map(|(_, l)| *l).collect(),
            )
        })
        .collect()
}

pub fn stage1_examples(
    triples: &[Triple],
    general: &Collection,
    featurizer: &Featurizer<'_>,
) -> Result<Vec<(ModelInput, u8)>> {
    let mut out = Vec::with_capacity(2 * triples.len());
    for t in triples {
        let norm = text::normalize(&t.query_text);
        // annotations come from a matching query of the general collection
        let owner = general
            .query_by_text(&norm)
            .map_or("", |q| q.query_id.as_str());
        out.push((featurizer.input(general, owner, &norm, &t.positive)?, 1));
        out.push((featurizer.input(general, owner, &norm, &t.negative)?, 0));
    }
    Ok(out)
}

/// Every judged pair of the given queries; grade > 0 is positive.
pub fn qrel_examples(
    collection: &Collection,
    query_ids: &BTreeSet<String>,
    featurizer: &Featurizer<'_>,
) -> Result<Vec<(ModelInput, u8)>> {
    collection
        .qrels()
        .iter()
        .filter(|r| query_ids.contains(&r.query_id))
        .map(|r| {
            Ok((
                featurizer.query_input(collection, &r.query_id, &r.doc_id)?,
                u8::from(r.grade > 0),
            ))
        })
        .collect()
}

pub fn mean_loss(
    weights: &EncoderWeights,
    examples: &[(ModelInput, u8)],
    entities: &dyn EntityInputs,
) -> Result<f64> {
    if examples.is_empty() {
        return Ok(f64::NAN);
    }
    let mut total = 0.0;
    for (input, label) in examples {
        total += encoder::example_loss(weights.forward(input, entities)?.logit, *label);
    }
    Ok(total / examples.len() as f64)
}

/// Train a copy of `init` on the stage-1 triples. Returns the trained
/// weights and the per-epoch loss trace.
pub fn train_stage1(
    init: &EncoderWeights,
    triples: &[Triple],
    general: &Collection,
    featurizer: &Featurizer<'_>,
    opts: &TrainOptions,
    batch_size: usize,
    seed: u64,
) -> Result<(EncoderWeights, Vec<f64>)> {
    let mut weights = init.clone();
    if opts.epochs == 0 || triples.is_empty() {
        return Ok((weights, Vec::new()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let batches = make_batches(
        stage1_examples(triples, general, featurizer)?,
        batch_size,
        &mut rng,
    )?;
    let trace = encoder::train_pointwise(&mut weights, &batches, featurizer.entity_inputs(), opts)?;
    log::info!("stage 1: {} triples, loss trace {trace:?}", triples.len());
    Ok((weights, trace))
}

/// Train a copy of the stage-1 model on one fold's judged training pairs.
pub fn train_fold(
    stage1: &EncoderWeights,
    fold: &FoldSpec,
    target: &Collection,
    featurizer: &Featurizer<'_>,
    opts: &TrainOptions,
    batch_size: usize,
    seed: u64,
) -> Result<FoldModel> {
    let entities = featurizer.entity_inputs();
    let examples = qrel_examples(target, &fold.train_query_ids, featurizer)?;
    let mut weights = stage1.clone();
    let initial_loss = mean_loss(&weights, &examples, entities)?;
    if opts.epochs > 0 && !examples.is_empty() {
        let fold_seed = seed.wrapping_add(fold.fold_id as u64 + 1);
        let mut rng = ChaCha8Rng::seed_from_u64(fold_seed);
        let batches = make_batches(examples.clone(), batch_size, &mut rng)?;
        let opts = TrainOptions {
            seed: opts.seed.wrapping_add(fold.fold_id as u64),
            ..*opts
        };
        encoder::train_pointwise(&mut weights, &batches, entities, &opts)?;
    }
    let final_loss = mean_loss(&weights, &examples, entities)?;
    log::info!(
        "fold {}: {} pairs, loss {initial_loss:.4} -> {final_loss:.4}",
        fold.fold_id,
        examples.len()
    );
    Ok(FoldModel {
        fold_id: fold.fold_id,
        weights,
        trained_queries: fold.train_query_ids.clone(),
        initial_loss,
        final_loss,
    })
}

/// Stage 1 trains `init` once on the general triples; stage 2 clones the
/// result per fold and trains on that fold's judged training pairs.
pub fn two_stage_finetune(
    init: &EncoderWeights,
    plan: &StagePlan,
    general: &Collection,
    target: &Collection,
    featurizer: &Featurizer<'_>,
) -> Result<FineTuned> {
    let (stage1, stage1_trace) = train_stage1(
        init,
        &plan.triples,
        general,
        featurizer,
        &plan.stage1,
        plan.batch_size,
        plan.seed,
    )?;
    let folds = plan
        .folds
        .iter()
        .map(|f| {
            train_fold(
                &stage1,
                f,
                target,
                featurizer,
                &plan.stage2,
                plan.batch_size,
                plan.seed,
            )
        })
        .collect::<Result<_>>()?;
    Ok(FineTuned {
        stage1,
        stage1_trace,
        folds,
    })
}

/// Re-rank each fold's test queries with that fold's model. Queries outside
/// every test split are left out of the returned run.
pub fn rerank_folds(
    run: &Run,
    folds: &[FoldSpec],
    models: &[FoldModel],
    featurizer: &Featurizer<'_>,
    collection: &Collection,
    depth: usize,
    tag: &str,
) -> Result<(Run, Vec<FoldLogEntry>)> {
    let mut out = Run::new(tag);
    let mut log = Vec::with_capacity(folds.len());
    for fold in folds {
        let model = models
            .iter()
            .find(|m| m.fold_id == fold.fold_id)
            .ok_or_else(|| Error::UnknownKey(format!("fold {}", fold.fold_id)))?;
        let scorer = EncoderScorer {
            weights: &model.weights,
            featurizer: *featurizer,
            collection,
        };
        let mut evaluated = BTreeSet::new();
        for q in &fold.test_query_ids {
            let Some(ranking) = run.ranking(q) else {
                continue;
            };
            out.insert(q.clone(), rerank_query(ranking, q, &scorer, depth)?)?;
            evaluated.insert(q.clone());
        }
        log.push(FoldLogEntry {
            fold_id: fold.fold_id,
            trained: model.trained_queries.clone(),
            evaluated,
        });
    }
    for q in run.query_ids() {
        if out.ranking(q).is_none() {
            log::warn!("query {q} is in no test fold and was not re-ranked");
        }
    }
    Ok((out, log))
}

pub fn check_fold_isolation(log: &[FoldLogEntry]) -> Result<()> {
    for e in log {
        if let Some(q) = e.trained.intersection(&e.evaluated).next() {
            return Err(Error::Invalid(format!(
                "fold {} evaluates its training query {q}",
                e.fold_id
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Document, Qrel, Query, QueryType, Split};
    use crate::encoder::EncoderConfig;
    use crate::eval;

    fn run_of(rows: &[(&str, &[(&str, f64)])]) -> Run {
        let mut r = Run::new("t");
        for (q, docs) in rows {
            r.insert(*q, docs.iter().map(|(d, s)| (d.to_string(), *s)).collect())
                .unwrap();
        }
        r
    }

    #[test]
    fn single_line_format() {
        let r = run_of(&[("q1", &[("d1", 1.5)])]);
        assert_eq!(r.to_trec(), "q1 Q0 d1 1 1.5 t\n");
    }

    #[test]
    fn trec_round_trip_large() {
        let mut r = Run::new("bm25");
        for q in 0..10 {
            let docs = (0..100)
                .map(|i| (format!("d{q}_{i}"), 1.0 / (i as f64 + 1.0) + q as f64))
                .collect();
            r.insert(format!("q{q:02}"), docs).unwrap();
        }
        let text = r.to_trec();
        assert_eq!(text.lines().count(), 1000);
        assert_eq!(Run::parse("r", &text).unwrap(), r);
    }

    #[test]
    fn non_contiguous_ranks_rejected() {
        let bad = "q1 Q0 a 1 2.0 t\nq1 Q0 b 3 1.0 t\n";
        assert!(matches!(
            Run::parse("r", bad),
            Err(Error::Parse { line: 2, .. })
        ));
        let split = "q1 Q0 a 1 2.0 t\nq2 Q0 b 1 1.0 t\nq1 Q0 c 2 1.0 t\n";
        assert!(matches!(Run::parse("r", split), Err(Error::Parse { .. })));
        assert!(Run::parse("r", "q1 Q0 a 1 x t\n").is_err());
        assert!(run_of(&[])
            .insert("q", vec![("a".into(), 1.0), ("b".into(), 2.0)])
            .is_err());
    }

    #[test]
    fn depth_one_keeps_order() {
        let r = run_of(&[("q", &[("c", 3.0), ("a", 2.0), ("b", 1.0)])]);
        let scorer = |_: &str, d: &str| Ok(if d == "b" { 100.0 } else { 0.0 });
        let out = rerank(&r, &scorer, 1, "x").unwrap();
        assert_eq!(out.doc_ids("q"), ["c", "a", "b"]);
        let full = rerank(&r, &scorer, 3, "x").unwrap();
        assert_eq!(full.doc_ids("q"), ["b", "a", "c"]);
        assert!(matches!(rerank(&r, &scorer, 0, "x"), Err(Error::Config(_))));
    }

    #[test]
    fn constant_scorer_orders_by_doc_id_then_tail() {
        let r = run_of(&[("q", &[("d", 4.0), ("b", 3.0), ("c", 2.0), ("a", 1.0)])]);
        let out = rerank(&r, &|_: &str, _: &str| Ok(0.5), 3, "x").unwrap();
        assert_eq!(out.doc_ids("q"), ["b", "c", "d", "a"]);
        let again = rerank(&out, &|_: &str, _: &str| Ok(0.5), 3, "x").unwrap();
        assert_eq!(again.doc_ids("q"), out.doc_ids("q"));
        assert_eq!(out.candidates(), r.candidates());
    }

    fn toy_collection() -> Collection {
        let docs = vec![
            Document::new("d1", "dakar is the capital of senegal"),
            Document::new("d2", "the river flows to the coast"),
            Document::new("d3", "movies directed by francis ford"),
            Document::new("d4", "france is a country in western europe"),
            Document::new("d5", "yoko ono was in the city"),
        ];
        let queries = vec![
            Query::new("q1", "capital of senegal", QueryType::Other),
            Query::new("q2", "movies directed", QueryType::Other),
            Query::new("q3", "country in europe", QueryType::Other),
            Query::new("q4", "yoko ono", QueryType::Other),
            Query::new("q5", "the river coast", QueryType::Other),
        ];
        let qrels = [
            ("q1", "d1", 2),
            ("q1", "d2", 0),
            ("q2", "d3", 1),
            ("q2", "d4", 0),
            ("q3", "d4", 2),
            ("q3", "d1", 0),
            ("q4", "d5", 1),
            ("q4", "d3", 0),
            ("q5", "d2", 2),
            ("q5", "d5", 0),
        ]
        .iter()
        .map(|(q, d, g)| Qrel {
            query_id: q.to_string(),
            doc_id: d.to_string(),
            grade: *g,
        })
        .collect();
        let folds = (0..5)
            .flat_map(|f| {
                let q = format!("q{}", f + 1);
                (0..5).map(move |k| {
                    (
                        k,
                        q.clone(),
                        if k == f { Split::Test } else { Split::Train },
                    )
                })
            })
            .collect();
        Collection::from_parts(docs, queries, qrels, vec![], folds).unwrap()
    }

    #[test]
    fn oracle_scorer_never_hurts() {
        let c = toy_collection();
        let idx = InvertedIndex::from_documents(c.docs()).unwrap();
        let first = first_stage_run(&idx, &c, 100, "bm25").unwrap();
        let qrels = c.qrel_map();
        let oracle = |q: &str, d: &str| Ok(qrels.grade(q, d) as f64);
        let re = rerank(&first, &oracle, 100, "oracle").unwrap();
        let a = eval::evaluate_run(&first, &qrels, &[10]);
        let b = eval::evaluate_run(&re, &qrels, &[10]);
        assert!(b.mean(10) >= a.mean(10));
        assert_eq!(b.mean(10), 1.0);
    }

    fn tiny_model(vocab: &Vocabulary) -> EncoderWeights {
        EncoderWeights::init(&EncoderConfig {
            d_model: 8,
            n_layers: 1,
            n_heads: 2,
            d_ff: 16,
            max_positions: 64,
            vocab_size: vocab.num_pieces(),
            dropout: 0.0,
            seed: 3,
        })
        .unwrap()
    }

    fn plan(c: &Collection, stage2_epochs: usize) -> StagePlan {
        StagePlan {
            triples: vec![Triple {
                query_text: "capital of senegal".into(),
                positive: "d1".into(),
                negative: "d2".into(),
            }],
            folds: c.folds().to_vec(),
            stage1: TrainOptions::default(),
            stage2: TrainOptions {
                epochs: stage2_epochs,
                learning_rate: 0.1,
                ..Default::default()
            },
            batch_size: 2,
            seed: 1,
        }
    }

    #[test]
    fn zero_stage2_epochs_leave_stage1_model() {
        let c = toy_collection();
        let v = Vocabulary::fixture();
        let f = Featurizer::plain(&v);
        let out = two_stage_finetune(&tiny_model(&v), &plan(&c, 0), &c, &c, &f).unwrap();
        assert_eq!(out.folds.len(), 5);
        assert!(out.folds.iter().all(|m| m.weights == out.stage1));
        assert_ne!(out.stage1, tiny_model(&v));
    }

    #[test]
    fn folds_train_distinct_models_and_stay_isolated() {
        let c = toy_collection();
        let v = Vocabulary::fixture();
        let f = Featurizer::plain(&v);
        let out = two_stage_finetune(&tiny_model(&v), &plan(&c, 10), &c, &c, &f).unwrap();
        for (i, a) in out.folds.iter().enumerate() {
            assert!(
                a.final_loss < a.initial_loss,
                "{} {}",
                a.initial_loss,
                a.final_loss
            );
            for b in &out.folds[i + 1..] {
                assert_ne!(a.weights, b.weights);
            }
        }
        let idx = InvertedIndex::from_documents(c.docs()).unwrap();
        let first = first_stage_run(&idx, &c, 10, "bm25").unwrap();
        let (re, log) = rerank_folds(&first, c.folds(), &out.folds, &f, &c, 10, "mono").unwrap();
        check_fold_isolation(&log).unwrap();
        assert_eq!(re.candidates(), first.candidates());
        let mut leaky = log.clone();
        let q = leaky[0].evaluated.iter().next().unwrap().clone();
        leaky[0].trained.insert(q);
        assert!(check_fold_isolation(&leaky).is_err());
    }

    #[test]
    fn missing_doc_text_is_reported() {
        let c = toy_collection();
        let v = Vocabulary::fixture();
        let w = tiny_model(&v);
        let scorer = EncoderScorer {
            weights: &w,
            featurizer: Featurizer::plain(&v),
            collection: &c,
        };
        let r = run_of(&[("q1", &[("nope", 1.0)])]);
        assert!(
            matches!(rerank(&r, &scorer, 5, "x"), Err(Error::MissingDocText(d)) if d == "nope")
        );
    }

    #[test]
    fn triples_round_trip() {
        let t = vec![Triple {
            query_text: "a b".into(),
            positive: "p".into(),
            negative: "n".into(),
        }];
        assert_eq!(parse_triples("t", &triples_tsv(&t)).unwrap(), t);
        assert!(parse_triples("t", "only\ttwo\n").is_err());
    }
}
