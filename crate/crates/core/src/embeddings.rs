//! Joint word/entity embeddings trained with skip-gram negative sampling.
//!
//! Three pair pools feed one SGD loop: word -> context word within a window
//! over the corpus, entity -> linked entity (both directions) over the graph,
//! and entity -> anchor-context word. Negatives are drawn uniformly from the
//! namespace of the positive target.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{self, KnowledgeGraph};
use crate::error::{Error, Result};
use crate::text;
use crate::tokenizer::ENTITY_PREFIX;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub min_count: usize,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig {
            dim: 16,
            window: 2,
            negatives: 5,
            epochs: 5,
            learning_rate: 0.025,
            seed: 0,
            min_count: 0,
        }
    }
}

impl EmbeddingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.window == 0 || self.negatives == 0 || !(self.learning_rate > 0.0) {
            return Err(Error::Config(
                "embedding dim, window, negatives and learning rate must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Input ("weight layer") vectors for words and entities, plus the output
/// context vectors used during training.
#[derive(Debug, Clone, PartialEq)]
pub struct JointEmbeddingTable {
    dim: usize,
    words: Vec<String>,
    entities: Vec<String>,
    index: HashMap<String, usize>,
    vectors: Vec<f64>,
    context: Vec<f64>,
}

pub fn entity_key(entity_id: &str) -> String {
    format!("{ENTITY_PREFIX}{entity_id}")
}

impl JointEmbeddingTable {
    fn with_keys(dim: usize, words: Vec<String>, entities: Vec<String>) -> Self {
        let mut index = HashMap::with_capacity(words.len() + entities.len());
        for (i, w) in words.iter().enumerate() {
            index.insert(w.clone(), i);
        }
        for (i, e) in entities.iter().enumerate() {
            index.insert(entity_key(e), words.len() + i);
        }
        let n = words.len() + entities.len();
        JointEmbeddingTable {
            dim,
            words,
            entities,
            index,
            vectors: vec![0.0; n * dim],
            context: vec![0.0; n * dim],
        }
    }

    /// Table from explicit vectors (no context layer).
    pub fn from_vectors(
        dim: usize,
        words: Vec<(String, Vec<f64>)>,
        entities: Vec<(String, Vec<f64>)>,
    ) -> Result<Self> {
        let mut t = Self::with_keys(
            dim,
            words.iter().map(|(k, _)| k.clone()).collect(),
            entities.iter().map(|(k, _)| k.clone()).collect(),
        );
        if t.index.len() != t.len() {
            return Err(Error::Invalid("duplicate key in embedding table".into()));
        }
        for (row, (k, v)) in words.iter().chain(entities.iter()).enumerate() {
            if v.len() != dim || v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Invalid(format!(
                    "vector for `{k}` must have {dim} finite values"
                )));
            }
            t.vectors[row * dim..(row + 1) * dim].copy_from_slice(v);
        }
        Ok(t)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len() + self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn entities(&self) -> &[String] {
        &self.entities
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    /// Vector for a key; entity keys carry the `ENTITY/` prefix.
    pub fn vector(&self, key: &str) -> Option<&[f64]> {
        self.index.get(key).map(|&i| self.row(i))
    }

    pub fn word(&self, word: &str) -> Option<&[f64]> {
        self.index
            .get(word)
            .filter(|&&i| i < self.words.len())
            .map(|&i| self.row(i))
    }

    pub fn entity(&self, entity_id: &str) -> Option<&[f64]> {
        self.vector(&entity_key(entity_id))
    }

    fn key(&self, i: usize) -> String {
        if i < self.words.len() {
            self.words[i].clone()
        } else {
            entity_key(&self.entities[i - self.words.len()])
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "{}\t{}\t{}\n",
            self.dim,
            self.words.len(),
            self.entities.len()
        );
        for i in 0..self.len() {
            s.push_str(&self.key(i));
            s.push('\t');
            for (j, x) in self.row(i).iter().enumerate() {
                if j > 0 {
                    s.push(' ');
                }
                let _ = write!(s, "{x}");
            }
            s.push('\n');
        }
        s
    }

    pub fn parse(name: &str, content: &str) -> Result<Self> {
        let mut lines = content.lines().enumerate().filter(|(_, l)| !l.is_empty());
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(name, 1, "missing header"))?;
        let nums: Vec<usize> = header
            .split('\t')
            .map(|x| x.parse().map_err(|_| Error::parse(name, 1, "bad header")))
            .collect::<Result<_>>()?;
        let [dim, n_words, n_entities] = nums.as_slice() else {
            return Err(Error::parse(
                name,
                1,
                "expected `dim<TAB>n_words<TAB>n_entities`",
            ));
        };
        let mut words = Vec::with_capacity(*n_words);
        let mut entities = Vec::with_capacity(*n_entities);
        for (i, line) in lines {
            let ln = i + 1;
            let (key, vals) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(name, ln, "expected `key<TAB>values`"))?;
            let v: Vec<f64> = vals
                .split(' ')
                .map(|x| {
                    x.parse()
                        .map_err(|_| Error::parse(name, ln, format!("bad value `{x}`")))
                })
                .collect::<Result<_>>()?;
            if v.len() != *dim {
                return Err(Error::parse(
                    name,
                    ln,
                    format!("expected {dim} values, got {}", v.len()),
                ));
            }
            match key.strip_prefix(ENTITY_PREFIX) {
                Some(e) => entities.push((e.to_string(), v)),
                None if entities.is_empty() => words.push((key.to_string(), v)),
                None => return Err(Error::parse(name, ln, "word rows must precede entity rows")),
            }
        }
        if words.len() != *n_words || entities.len() != *n_entities {
            return Err(Error::parse(name, 1, "row counts disagree with header"));
        }
        Self::from_vectors(*dim, words, entities)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (name, content) = corpus::read_file(path)?;
        Self::parse(&name, &content)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        corpus::write_file(path, &self.to_text())
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb)).clamp(-1.0, 1.0)
    }
}

pub fn similarity(table: &JointEmbeddingTable, key_a: &str, key_b: &str) -> Result<f64> {
    let a = table
        .vector(key_a)
        .ok_or_else(|| Error::UnknownKey(key_a.into()))?;
    let b = table
        .vector(key_b)
        .ok_or_else(|| Error::UnknownKey(key_b.into()))?;
    Ok(cosine(a, b))
}

/// The `k` nearest keys by cosine, descending; ties broken by key.
pub fn neighbors(table: &JointEmbeddingTable, key: &str, k: usize) -> Result<Vec<(String, f64)>> {
    let q = table
        .vector(key)
        .ok_or_else(|| Error::UnknownKey(key.into()))?;
    let mut out: Vec<(String, f64)> = (0..table.len())
        .map(|i| (table.key(i), cosine(q, table.row(i))))
        .filter(|(k, _)| k != key)
        .collect();
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    out.truncate(k);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    Word,
    Entity,
    Anchor,
}

/// Mean logistic loss per positive pair, per epoch and objective. An entry
/// is NaN for an objective with an empty pair pool.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossTrace {
    pub word: Vec<f64>,
    pub entity: Vec<f64>,
    pub anchor: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
struct Pair {
    input: usize,
    target: usize,
    objective: Objective,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `-ln(sigmoid(x))` without overflow.
fn neg_log_sigmoid(x: f64) -> f64 {
    if x > 0.0 {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}

pub fn train_joint_embeddings<'a, I>(
    corpus: I,
    graph: &KnowledgeGraph,
    config: &EmbeddingConfig,
) -> Result<(JointEmbeddingTable, LossTrace)>
where
    I: IntoIterator<Item = &'a str>,
{
    config.validate()?;
    let sentences: Vec<Vec<String>> = corpus
        .into_iter()
        .map(text::terms)
        .filter(|t| !t.is_empty())
        .collect();
    if sentences.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let anchors: Vec<(&str, Vec<String>)> = graph
        .anchors
        .iter()
        .map(|(e, ws)| (e.as_str(), ws.iter().flat_map(|w| text::terms(w)).collect()))
        .collect();

    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for w in sentences
        .iter()
        .flatten()
        .chain(anchors.iter().flat_map(|(_, ws)| ws))
    {
        *counts.entry(w).or_default() += 1;
    }
    let words: Vec<String> = counts
        .iter()
        .filter(|(_, &c)| c >= config.min_count)
        .map(|(w, _)| w.to_string())
        .collect();
    let entities: Vec<String> = graph.entities().to_vec();
    let mut table = JointEmbeddingTable::with_keys(config.dim, words, entities);
    let n_words = table.words.len();
    let n_entities = table.entities.len();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let scale = 0.5 / config.dim as f64;
    for x in table.vectors.iter_mut().chain(table.context.iter_mut()) {
        *x = rng.gen_range(-scale..scale);
    }

    let word_id = |w: &str| table.index.get(w).copied().filter(|&i| i < n_words);
    let entity_id = |e: &str| table.index.get(&entity_key(e)).copied();
    let mut pairs = Vec::new();
    for s in &sentences {
        let ids: Vec<Option<usize>> = s.iter().map(|w| word_id(w)).collect();
        for (i, &wi) in ids.iter().enumerate() {
            let Some(wi) = wi else { continue };
            let lo = i.saturating_sub(config.window);
            let hi = (i + config.window + 1).min(ids.len());
            for (j, &wj) in ids.iter().enumerate().take(hi).skip(lo) {
                if let (true, Some(wj)) = (j != i, wj) {
                    pairs.push(Pair {
                        input: wi,
                        target: wj,
                        objective: Objective::Word,
                    });
                }
            }
        }
    }
    for (s, d) in &graph.links {
        let (s, d) = (entity_id(s).unwrap(), entity_id(d).unwrap());
        for (a, b) in [(s, d), (d, s)] {
            pairs.push(Pair {
                input: a,
                target: b,
                objective: Objective::Entity,
            });
        }
    }
    for (e, ws) in &anchors {
        let e = entity_id(e).unwrap();
        for w in ws {
            if let Some(w) = word_id(w) {
                pairs.push(Pair {
                    input: e,
                    target: w,
                    objective: Objective::Anchor,
                });
            }
        }
    }

    let dim = config.dim;
    let mut trace = LossTrace::default();
    let mut grad = vec![0.0; dim];
    for _epoch in 0..config.epochs {
        pairs.shuffle(&mut rng);
        let mut sums = [0.0f64; 3];
        let mut ns = [0usize; 3];
        for p in &pairs {
            let (lo, span) = match p.objective {
                Objective::Entity => (n_words, n_entities),
                _ => (0, n_words),
            };
            grad.iter_mut().for_each(|g| *g = 0.0);
            let mut loss = 0.0;
            let step = |target: usize,
                        label: f64,
                        grad: &mut [f64],
                        vectors: &[f64],
                        context: &mut [f64]| {
                let v = &vectors[p.input * dim..(p.input + 1) * dim];
                let u = &mut context[target * dim..(target + 1) * dim];
                let score: f64 = v.iter().zip(u.iter()).map(|(a, b)| a * b).sum();
                let g = sigmoid(score) - label;
                for k in 0..dim {
                    grad[k] += g * u[k];
                    u[k] -= config.learning_rate * g * v[k];
                }
                if label > 0.5 {
                    neg_log_sigmoid(score)
                } else {
                    neg_log_sigmoid(-score)
                }
            };
            loss += step(p.target, 1.0, &mut grad, &table.vectors, &mut table.context);
            for _ in 0..config.negatives {
                let neg = lo + rng.gen_range(0..span);
                if neg == p.target {
                    continue;
                }
                loss += step(neg, 0.0, &mut grad, &table.vectors, &mut table.context);
            }
            let v = &mut table.vectors[p.input * dim..(p.input + 1) * dim];
            for k in 0..dim {
                v[k] -= config.learning_rate * grad[k];
            }
            let slot = p.objective as usize;
            sums[slot] += loss;
            ns[slot] += 1;
        }
        let mean = |i: usize| {
            if ns[i] == 0 {
                f64::NAN
            } else {
                sums[i] / ns[i] as f64
            }
        };
        trace.word.push(mean(0));
        trace.entity.push(mean(1));
        trace.anchor.push(mean(2));
    }

    if let Some(i) = (0..table.len()).find(|&i| {
        let r = table.row(i);
        r.iter().any(|x| !x.is_finite()) || r.iter().all(|&x| x == 0.0)
    }) {
        return Err(Error::Invalid(format!(
            "degenerate vector for `{}` after training",
            table.key(i)
        )));
    }
    Ok((table, trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(
        entities: &[&str],
        links: &[(&str, &str)],
        anchors: &[(&str, &str)],
    ) -> KnowledgeGraph {
        KnowledgeGraph::new(
            entities.iter().map(|s| s.to_string()).collect(),
            links
                .iter()
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect(),
            anchors
                .iter()
                .map(|(e, ws)| (e.to_string(), ws.split(' ').map(str::to_string).collect()))
                .collect(),
        )
        .unwrap()
    }

    fn hand_table() -> JointEmbeddingTable {
        JointEmbeddingTable::from_vectors(
            2,
            vec![
                ("a".into(), vec![1.0, 0.0]),
                ("b".into(), vec![0.0, 1.0]),
                ("c".into(), vec![1.0, 1.0]),
                ("d".into(), vec![2.0, 0.0]),
            ],
            vec![("E".into(), vec![-1.0, 0.0])],
        )
        .unwrap()
    }

    #[test]
    fn similarity_cases() {
        let t = hand_table();
        assert!((similarity(&t, "c", "c").unwrap() - 1.0).abs() < 1e-9);
        assert_eq!(similarity(&t, "a", "b").unwrap(), 0.0);
        assert!((similarity(&t, "a", "ENTITY/E").unwrap() + 1.0).abs() < 1e-12);
        assert!(matches!(
            similarity(&t, "a", "zz"),
            Err(Error::UnknownKey(_))
        ));
    }

    #[test]
    fn neighbors_order_and_ties() {
        let t = hand_table();
        // cos(a, .): d = 1, c = 1/sqrt(2), b = 0, E = -1
        let n = neighbors(&t, "a", 10).unwrap();
        let keys: Vec<&str> = n.iter().map(|(k, _)| k.as_str()).collect();
        assert_eq!(keys, vec!["d", "c", "b", "ENTITY/E"]);
        assert!((n[1].1 - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        // a and d tie for c at 1/sqrt(2): lexicographic
        let n = neighbors(&t, "c", 3).unwrap();
        assert_eq!(n[0].0, "a");
        assert_eq!(n[1].0, "b");
        assert_eq!(n[2].0, "d");
        assert!(matches!(
            neighbors(&t, "nope", 1),
            Err(Error::UnknownKey(_))
        ));
    }

    #[test]
    fn zero_epochs_is_seeded_init() {
        let g = graph(&["A"], &[], &[]);
        let cfg = EmbeddingConfig {
            epochs: 0,
            dim: 4,
            seed: 9,
            ..Default::default()
        };
        let (t1, trace) = train_joint_embeddings(["p q r"], &g, &cfg).unwrap();
        assert!(trace.word.is_empty());
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let scale = 0.5 / 4.0;
        let expect: Vec<f64> = (0..t1.len() * 4)
            .map(|_| rng.gen_range(-scale..scale))
            .collect();
        assert_eq!(t1.vectors, expect);
    }

    #[test]
    fn empty_corpus_rejected() {
        let g = graph(&["A"], &[], &[]);
        let empty: [&str; 0] = [];
        assert!(matches!(
            train_joint_embeddings(empty, &g, &EmbeddingConfig::default()),
            Err(Error::EmptyCorpus)
        ));
    }

    #[test]
    fn deterministic_and_file_round_trip() {
        let g = graph(&["A", "B"], &[("A", "B")], &[("A", "red apple")]);
        let corpus = ["red apple pie", "green apple tart", "blue sky"];
        let cfg = EmbeddingConfig {
            epochs: 3,
            ..Default::default()
        };
        let (a, ta) = train_joint_embeddings(corpus, &g, &cfg).unwrap();
        let (b, tb) = train_joint_embeddings(corpus, &g, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta, tb);
        let text = a.to_text();
        assert!(text.starts_with("16\t"));
        let back = JointEmbeddingTable::parse("t", &text).unwrap();
        assert_eq!(back.to_text(), text);
        assert_eq!(back.entity("A"), a.entity("A"));
    }

    #[test]
    fn each_objective_loss_decreases() {
        let mut corpus = Vec::new();
        for i in 0..20 {
            corpus.push(format!("alpha beta gamma delta w{i}"));
            corpus.push(format!("kappa lambda mu nu v{i}"));
        }
        let g = graph(
            &["A", "B", "C", "D", "E"],
            &[("A", "B"), ("B", "C"), ("C", "A"), ("D", "E")],
            &[("A", "alpha beta"), ("D", "kappa lambda"), ("E", "mu nu")],
        );
        let cfg = EmbeddingConfig {
            epochs: 30,
            ..Default::default()
        };
        let (_, trace) =
            train_joint_embeddings(corpus.iter().map(String::as_str), &g, &cfg).unwrap();
        for series in [&trace.word, &trace.entity, &trace.anchor] {
            assert!(series.last().unwrap() < &series[0], "{series:?}");
        }
    }
}
