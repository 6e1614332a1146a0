//! Seeded synthetic collections for desk-scale experiments.
//!
//! Entities live in topical clusters. Each cluster has popular entities
//! whose names are whole vocabulary words and rare entities whose names are
//! cut into continuation pieces. Rare names are shared by one entity in each
//! of two clusters, so a query naming a rare entity is ambiguous from its
//! words alone; the annotation resolves it.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{
    Annotation, Collection, Document, KnowledgeGraph, Qrel, Query, QueryType, Split, NUM_FOLDS,
};
use crate::error::Result;
use crate::pipeline::Triple;
use crate::retrieval::{self, InvertedIndex};
use crate::text;
use crate::tokenizer::{Vocabulary, CONTINUATION, SPECIALS};

const TOPICS: [(&str, [&str; 8]); 8] = [
    (
        "river",
        [
            "river", "water", "flows", "coast", "delta", "basin", "bridge", "valley",
        ],
    ),
    (
        "film",
        [
            "film", "directed", "starring", "cinema", "actor", "scene", "premiere", "studio",
        ],
    ),
    (
        "city",
        [
            "city",
            "capital",
            "population",
            "district",
            "mayor",
            "urban",
            "harbor",
            "square",
        ],
    ),
    (
        "band",
        [
            "album", "band", "singer", "song", "guitar", "record", "concert", "tour",
        ],
    ),
    (
        "team",
        [
            "team", "league", "football", "season", "coach", "stadium", "goal", "match",
        ],
    ),
    (
        "science",
        [
            "physics",
            "theory",
            "scientist",
            "laboratory",
            "experiment",
            "research",
            "atom",
            "quantum",
        ],
    ),
    (
        "party",
        [
            "party",
            "election",
            "minister",
            "parliament",
            "vote",
            "government",
            "policy",
            "senate",
        ],
    ),
    (
        "food",
        [
            "dish", "cuisine", "recipe", "flavor", "cooking", "spice", "sauce", "bread",
        ],
    ),
];

const FILLER: [&str; 16] = [
    "the", "of", "is", "a", "and", "in", "was", "by", "with", "for", "known", "as", "has", "many",
    "from", "also",
];

const QUERY_WORDS: [&str; 6] = ["who", "what", "about", "information", "find", "show"];

const POOL_DEPTH: usize = 20;

const ONSETS: [&str; 14] = [
    "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z",
];
const VOWELS: [&str; 5] = ["a", "e", "i", "o", "u"];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub clusters: usize,
    pub popular_per_cluster: usize,
    pub rare_per_cluster: usize,
    pub docs: usize,
    pub queries: usize,
    pub general_docs: usize,
    pub general_queries: usize,
    pub triples_per_query: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            clusters: 8,
            popular_per_cluster: 3,
            rare_per_cluster: 3,
            docs: 200,
            queries: 40,
            general_docs: 160,
            general_queries: 120,
            triples_per_query: 2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthEntity {
    pub id: String,
    pub name: String,
    pub cluster: usize,
    pub rare: bool,
}

#[derive(Debug, Clone)]
pub struct SynthData {
    pub collection: Collection,
    pub general: Collection,
    pub triples: Vec<Triple>,
    pub graph: KnowledgeGraph,
    /// Word pieces plus one entity token per graph entity.
    pub vocab: Vocabulary,
    pub entities: Vec<SynthEntity>,
}

impl SynthData {
    pub fn cluster_of(&self, entity_id: &str) -> Option<usize> {
        self.entities
            .iter()
            .find(|e| e.id == entity_id)
            .map(|e| e.cluster)
    }

    /// Texts for embedding training: every document of both collections.
    pub fn embedding_corpus(&self) -> Vec<&str> {
        self.collection
            .docs()
            .iter()
            .chain(self.general.docs())
            .map(|d| d.text())
            .collect()
    }
}

fn syllable(rng: &mut ChaCha8Rng) -> String {
    format!(
        "{}{}",
        ONSETS.choose(rng).unwrap(),
        VOWELS.choose(rng).unwrap()
    )
}

struct Names {
    used: BTreeSet<String>,
}

impl Names {
    fn fresh(&mut self, rng: &mut ChaCha8Rng, syllables: usize) -> Vec<String> {
        loop {
            let parts: Vec<String> = (0..syllables).map(|_| syllable(rng)).collect();
            let word = parts.concat();
            if !self.used.contains(&word)
                && !TOPICS.iter().any(|(_, ws)| ws.contains(&word.as_str()))
            {
                self.used.insert(word);
                return parts;
            }
        }
    }
}

fn entities_and_vocab(
    cfg: &SynthConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<SynthEntity>, Vocabulary)> {
    let mut names = Names {
        used: BTreeSet::new(),
    };
    let mut pieces: BTreeSet<String> = BTreeSet::new();
    for c in 'a'..='z' {
        pieces.insert(c.to_string());
        pieces.insert(format!("{CONTINUATION}{c}"));
    }
    for w in FILLER
        .iter()
        .chain(&QUERY_WORDS)
        .chain(TOPICS.iter().flat_map(|(_, ws)| ws))
    {
        pieces.insert(w.to_string());
    }
    let mut entities = Vec::new();
    for c in 0..cfg.clusters {
        let topic = TOPICS[c % TOPICS.len()].0;
        for p in 0..cfg.popular_per_cluster {
            // every third popular name has two words
            let words = if p % 3 == 2 { 2 } else { 1 };
            let parts: Vec<String> = (0..words).map(|_| names.fresh(rng, 2).concat()).collect();
            for w in &parts {
                pieces.insert(w.clone());
            }
            let name = parts.join(" ");
            entities.push(SynthEntity {
                id: format!("{}_({topic})", capitalize(&parts.join("_"))),
                name,
                cluster: c,
                rare: false,
            });
        }
    }
    // rare names: shared by clusters 2i and 2i+1
    let mut rare_names = Vec::new();
    for _ in 0..cfg.clusters.div_ceil(2) * cfg.rare_per_cluster {
        let n = rng.gen_range(2..=3);
        let parts = names.fresh(rng, n);
        pieces.insert(parts[0].clone());
        for p in &parts[1..] {
            pieces.insert(format!("{CONTINUATION}{p}"));
        }
        rare_names.push(parts.concat());
    }
    for c in 0..cfg.clusters {
        let topic = TOPICS[c % TOPICS.len()].0;
        for r in 0..cfg.rare_per_cluster {
            let name = rare_names[(c / 2) * cfg.rare_per_cluster + r].clone();
            entities.push(SynthEntity {
                id: format!("{}_({topic})", capitalize(&name)),
                name,
                cluster: c,
                rare: true,
            });
        }
    }
    let mut list: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
    list.extend(
        pieces
            .into_iter()
            .filter(|p| !SPECIALS.contains(&p.as_str())),
    );
    let vocab = Vocabulary::new(list, entities.iter().map(|e| e.id.clone()).collect())?;
    Ok((entities, vocab))
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

fn graph(
    cfg: &SynthConfig,
    entities: &[SynthEntity],
    rng: &mut ChaCha8Rng,
) -> Result<KnowledgeGraph> {
    let mut links = BTreeSet::new();
    for c in 0..cfg.clusters {
        let members: Vec<&SynthEntity> = entities.iter().filter(|e| e.cluster == c).collect();
        for (i, e) in members.iter().enumerate() {
            // a ring through the cluster plus one random chord
            let next = members[(i + 1) % members.len()];
            if next.id != e.id {
                links.insert((e.id.clone(), next.id.clone()));
            }
            let other = members.choose(rng).unwrap();
            if other.id != e.id {
                links.insert((e.id.clone(), other.id.clone()));
            }
        }
    }
    let anchors = entities
        .iter()
        .map(|e| {
            let topic = &TOPICS[e.cluster % TOPICS.len()].1;
            let mut words: Vec<String> = e.name.split(' ').map(str::to_string).collect();
            words.extend(topic.choose_multiple(rng, 3).map(|w| w.to_string()));
            (e.id.clone(), words)
        })
        .collect();
    KnowledgeGraph::new(
        entities.iter().map(|e| e.id.clone()).collect(),
        links.into_iter().collect(),
        anchors,
    )
}

/// Builds a text piece by piece, recording entity mention spans in chars.
struct Writer {
    text: String,
    chars: usize,
    mentions: Vec<(usize, usize, usize)>,
}

impl Writer {
    fn new() -> Self {
        Writer {
            text: String::new(),
            chars: 0,
            mentions: Vec::new(),
        }
    }

    fn word(&mut self, w: &str) {
        if !self.text.is_empty() {
            self.text.push(' ');
            self.chars += 1;
        }
        self.text.push_str(w);
        self.chars += w.chars().count();
    }

    fn mention(&mut self, entity: usize, name: &str) {
        self.word("");
        let start = self.chars;
        self.text.push_str(name);
        self.chars += name.chars().count();
        self.mentions.push((start, self.chars, entity));
    }

    fn finish(self, owner: &str, entities: &[SynthEntity]) -> (String, Vec<Annotation>) {
        let anns = self
            .mentions
            .iter()
            .map(|&(s, e, ent)| Annotation {
                owner_id: owner.to_string(),
                mention: entities[ent].name.clone(),
                char_start: s,
                char_end: e,
                entity_id: entities[ent].id.clone(),
            })
            .collect();
        (self.text, anns)
    }
}

struct DocSet {
    docs: Vec<Document>,
    anns: Vec<Annotation>,
    abstract_of: BTreeMap<usize, String>,
    /// entity index -> docs mentioning it
    mentioned_in: BTreeMap<usize, Vec<String>>,
    cluster_docs: BTreeMap<usize, Vec<String>>,
}

fn documents(
    prefix: &str,
    n: usize,
    entities: &[SynthEntity],
    clusters: usize,
    rng: &mut ChaCha8Rng,
) -> DocSet {
    let mut set = DocSet {
        docs: Vec::new(),
        anns: Vec::new(),
        abstract_of: BTreeMap::new(),
        mentioned_in: BTreeMap::new(),
        cluster_docs: BTreeMap::new(),
    };
    let by_cluster: Vec<Vec<usize>> = (0..clusters)
        .map(|c| {
            (0..entities.len())
                .filter(|&i| entities[i].cluster == c)
                .collect()
        })
        .collect();
    for i in 0..n {
        let id = format!("{prefix}{i:04}");
        // the first |entities| documents are abstracts
        let (cluster, subject) = if i < entities.len() {
            (entities[i].cluster, Some(i))
        } else {
            (rng.gen_range(0..clusters), None)
        };
        let topic = &TOPICS[cluster % TOPICS.len()].1;
        let mut w = Writer::new();
        let mut mentioned = Vec::new();
        if let Some(s) = subject {
            set.abstract_of.insert(s, id.clone());
            w.mention(s, &entities[s].name);
            mentioned.push(s);
            w.word("is");
            w.word("a");
        }
        let others: Vec<usize> = by_cluster[cluster]
            .choose_multiple(rng, 2)
            .copied()
            .filter(|e| Some(*e) != subject)
            .collect();
        let len = rng.gen_range(10..16);
        let mention_at: Vec<usize> = (0..others.len()).map(|_| rng.gen_range(1..len)).collect();
        for k in 0..len {
            if rng.gen_bool(0.6) {
                w.word(topic.choose(rng).unwrap());
            } else {
                w.word(FILLER.choose(rng).unwrap());
            }
            for (j, &at) in mention_at.iter().enumerate() {
                if at == k {
                    w.mention(others[j], &entities[others[j]].name);
                    mentioned.push(others[j]);
                }
            }
        }
        let (text, anns) = w.finish(&id, entities);
        for e in mentioned {
            let list = set.mentioned_in.entry(e).or_default();
            if !list.contains(&id) {
                list.push(id.clone());
            }
        }
        set.cluster_docs
            .entry(cluster)
            .or_default()
            .push(id.clone());
        set.docs.push(Document::new(&id, text));
        set.anns.extend(anns);
    }
    set
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum QueryKind {
    Rare,
    Popular,
    Topic,
}

struct QuerySet {
    queries: Vec<Query>,
    anns: Vec<Annotation>,
    qrels: Vec<Qrel>,
}

fn kind_plan(n: usize) -> Vec<QueryKind> {
    // 40% rare, 30% popular, 30% topical
    (0..n)
        .map(|i| match (i * 10 / n.max(1)) % 10 {
            0..=3 => QueryKind::Rare,
            4..=6 => QueryKind::Popular,
            _ => QueryKind::Topic,
        })
        .collect()
}

fn queries(
    prefix: &str,
    n: usize,
    entities: &[SynthEntity],
    docs: &DocSet,
    index: &InvertedIndex,
    clusters: usize,
    rng: &mut ChaCha8Rng,
) -> QuerySet {
    let mut out = QuerySet {
        queries: Vec::new(),
        anns: Vec::new(),
        qrels: Vec::new(),
    };
    let mut texts = BTreeSet::new();
    let mut rare: Vec<usize> = (0..entities.len()).filter(|&i| entities[i].rare).collect();
    let mut popular: Vec<usize> = (0..entities.len()).filter(|&i| !entities[i].rare).collect();
    rare.shuffle(rng);
    popular.shuffle(rng);
    let (mut ri, mut pi) = (0, 0);
    let plan = kind_plan(n);
    let mut i = 0;
    let mut attempts = 0;
    while out.queries.len() < n && attempts < 50 * n {
        attempts += 1;
        let kind = plan[out.queries.len()];
        let id = format!("{prefix}{i:03}");
        let mut w = Writer::new();
        let mut judged: BTreeMap<String, u8> = BTreeMap::new();
        let qtype;
        match kind {
            QueryKind::Rare | QueryKind::Popular => {
                let e = if kind == QueryKind::Rare {
                    ri += 1;
                    rare[(ri - 1) % rare.len()]
                } else {
                    pi += 1;
                    popular[(pi - 1) % popular.len()]
                };
                let lead = rng.gen_range(0..QUERY_WORDS.len() + 2);
                if lead < QUERY_WORDS.len() {
                    w.word(QUERY_WORDS[lead]);
                }
                w.mention(e, &entities[e].name);
                if lead == QUERY_WORDS.len() + 1 {
                    w.word(QUERY_WORDS.choose(rng).unwrap());
                }
                let mentioning = docs.mentioned_in.get(&e).cloned().unwrap_or_default();
                for d in &mentioning {
                    judged.insert(
                        d.clone(),
                        if docs.abstract_of.get(&e) == Some(d) {
                            2
                        } else {
                            1
                        },
                    );
                }
                // documents about namesakes and the rest of the cluster
                for (j, other) in entities.iter().enumerate() {
                    if j != e && other.name == entities[e].name {
                        for d in docs.mentioned_in.get(&j).into_iter().flatten() {
                            judged.entry(d.clone()).or_insert(0);
                        }
                    }
                }
                let cl = &docs.cluster_docs[&entities[e].cluster];
                for d in cl.choose_multiple(rng, 3) {
                    judged.entry(d.clone()).or_insert(0);
                }
                qtype = match (kind, lead % 3) {
                    (QueryKind::Rare, 0) => QueryType::SemSearch,
                    (QueryKind::Rare, 1) => QueryType::InexLd,
                    (QueryKind::Rare, _) => QueryType::Qald2,
                    (_, 0) => QueryType::SemSearch,
                    (_, 1) => QueryType::ListSearch,
                    _ => QueryType::InexLd,
                };
            }
            QueryKind::Topic => {
                let c = rng.gen_range(0..clusters);
                let topic = &TOPICS[c % TOPICS.len()].1;
                let words: Vec<&str> = topic.choose_multiple(rng, 2).copied().collect();
                for x in &words {
                    w.word(x);
                }
                for d in &docs.docs {
                    let terms = text::terms(d.text());
                    let hits = words
                        .iter()
                        .filter(|x| terms.iter().any(|t| t == *x))
                        .count();
                    if hits > 0 {
                        judged.insert(d.doc_id.clone(), hits as u8);
                    }
                }
                qtype = if rng.gen_bool(0.5) {
                    QueryType::InexLd
                } else {
                    QueryType::ListSearch
                };
            }
        }
        let (text, anns) = w.finish(&id, entities);
        if judged.values().all(|&g| g == 0) || !texts.insert(text.clone()) {
            continue;
        }
        // pooled judgments: the BM25 top of every query is judged
        for (d, _) in retrieval::search(
            index,
            &text::terms(&text),
            POOL_DEPTH,
            retrieval::DEFAULT_K,
            retrieval::DEFAULT_B,
        ) {
            judged.entry(d).or_insert(0);
        }
        i += 1;
        out.queries.push(Query::new(&id, &text, qtype));
        out.anns.extend(anns);
        out.qrels
            .extend(judged.into_iter().map(|(doc_id, grade)| Qrel {
                query_id: id.clone(),
                doc_id,
                grade,
            }));
    }
    out
}

/// Generate the target collection (with five folds), a general collection
/// with stage-1 triples, the knowledge graph and the vocabulary.
pub fn generate(cfg: &SynthConfig) -> Result<SynthData> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (entities, vocab) = entities_and_vocab(cfg, &mut rng)?;
    let graph = graph(cfg, &entities, &mut rng)?;

    let docs = documents(
        "D",
        cfg.docs.max(entities.len()),
        &entities,
        cfg.clusters,
        &mut rng,
    );
    let index = InvertedIndex::from_documents(&docs.docs)?;
    let qs = queries(
        "Q",
        cfg.queries,
        &entities,
        &docs,
        &index,
        cfg.clusters,
        &mut rng,
    );
    let mut order: Vec<String> = qs.queries.iter().map(|q| q.query_id.clone()).collect();
    order.shuffle(&mut rng);
    let mut fold_rows = Vec::new();
    for (i, q) in order.iter().enumerate() {
        let test = i % NUM_FOLDS;
        for f in 0..NUM_FOLDS {
            fold_rows.push((
                f,
                q.clone(),
                if f == test { Split::Test } else { Split::Train },
            ));
        }
    }
    let collection = Collection::from_parts(
        docs.docs,
        qs.queries,
        qs.qrels,
        [docs.anns, qs.anns].concat(),
        fold_rows,
    )?;

    let gdocs = documents(
        "G",
        cfg.general_docs.max(entities.len()),
        &entities,
        cfg.clusters,
        &mut rng,
    );
    let gindex = InvertedIndex::from_documents(&gdocs.docs)?;
    let gqs = queries(
        "GQ",
        cfg.general_queries,
        &entities,
        &gdocs,
        &gindex,
        cfg.clusters,
        &mut rng,
    );
    let general = Collection::from_parts(
        gdocs.docs,
        gqs.queries,
        gqs.qrels,
        [gdocs.anns, gqs.anns].concat(),
        vec![],
    )?;
    let triples = general_triples(&general, cfg.triples_per_query, &mut rng)?;

    Ok(SynthData {
        collection,
        general,
        triples,
        graph,
        vocab,
        entities,
    })
}

/// Positive: a relevant document; negative: the best-ranked BM25 candidate
/// that is not relevant.
fn general_triples(
    general: &Collection,
    per_query: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Triple>> {
    let index = InvertedIndex::from_documents(general.docs())?;
    let qrels = general.qrel_map();
    let mut out = Vec::new();
    for q in general.queries() {
        let ranked = retrieval::search_query(&index, &q.query_id, q.text(), 30).ranked;
        let positives: Vec<&String> = qrels
            .get(&q.query_id)
            .map(|m| m.iter().filter(|(_, &g)| g > 0).map(|(d, _)| d).collect())
            .unwrap_or_default();
        let negatives: Vec<&String> = ranked
            .iter()
            .map(|(d, _)| d)
            .filter(|d| qrels.grade(&q.query_id, d) == 0)
            .take(per_query * 2)
            .collect();
        if positives.is_empty() || negatives.is_empty() {
            continue;
        }
        for k in 0..per_query {
            out.push(Triple {
                query_text: q.text().to_string(),
                positive: positives.choose(rng).unwrap().to_string(),
                negative: negatives[k % negatives.len()].to_string(),
            });
        }
    }
    Ok(out)
}
