//! First-stage BM25 retrieval over document abstracts.
//!
//! Documents are indexed on word-level terms (the same whitespace and
//! punctuation split the tokenizer uses, without word pieces).

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::corpus::{self, Document};
use crate::error::{Error, Result};
use crate::text;

pub const DEFAULT_K: f64 = 0.9;
pub const DEFAULT_B: f64 = 0.4;

#[derive(Debug, Clone, PartialEq)]
pub struct InvertedIndex {
    postings: BTreeMap<String, Vec<(usize, u32)>>,
    doc_ids: Vec<String>,
    doc_lengths: Vec<usize>,
    avgdl: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalResult {
    pub query_id: String,
    pub ranked: Vec<(String, f64)>,
}

impl InvertedIndex {
    /// Index `(doc_id, text)` pairs. Doc ids are kept in ascending order
    /// so postings are sorted by doc id.
    pub fn build<'a, I>(docs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let mut sorted: Vec<(&str, &str)> = docs.into_iter().collect();
        if sorted.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        sorted.sort_by(|a, b| a.0.cmp(b.0));
        for w in sorted.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::DuplicateId {
                    kind: "document",
                    id: w[0].0.to_string(),
                });
            }
        }
        let mut postings: BTreeMap<String, Vec<(usize, u32)>> = BTreeMap::new();
        let mut doc_lengths = Vec::with_capacity(sorted.len());
        for (d, (_, body)) in sorted.iter().enumerate() {
            let terms = text::terms(body);
            doc_lengths.push(terms.len());
            let mut tf: BTreeMap<String, u32> = BTreeMap::new();
            for t in terms {
                *tf.entry(t).or_default() += 1;
            }
            for (t, c) in tf {
                postings.entry(t).or_default().push((d, c));
            }
        }
        let avgdl = doc_lengths.iter().sum::<usize>() as f64 / doc_lengths.len() as f64;
        Ok(InvertedIndex {
            postings,
            doc_ids: sorted.iter().map(|(id, _)| id.to_string()).collect(),
            doc_lengths,
            avgdl,
        })
    }

    pub fn from_documents(docs: &[Document]) -> Result<Self> {
        Self::build(docs.iter().map(|d| (d.doc_id.as_str(), d.text())))
    }

    pub fn num_docs(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn avgdl(&self) -> f64 {
        self.avgdl
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn doc_length(&self, doc_id: &str) -> Option<usize> {
        self.doc_index(doc_id).map(|i| self.doc_lengths[i])
    }

    /// Postings as `(doc_id, tf)` in ascending doc id order.
    pub fn postings(&self, term: &str) -> Vec<(&str, u32)> {
        self.postings
            .get(term)
            .map(|p| {
                p.iter()
                    .map(|&(d, tf)| (self.doc_ids[d].as_str(), tf))
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn doc_freq(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    pub fn num_terms(&self) -> usize {
        self.postings.len()
    }

    fn doc_index(&self, doc_id: &str) -> Option<usize> {
        self.doc_ids
            .binary_search_by(|d| d.as_str().cmp(doc_id))
            .ok()
    }

    pub fn idf(&self, term: &str) -> f64 {
        let n = self.num_docs() as f64;
        let df = self.doc_freq(term) as f64;
        ((n - df + 0.5) / (df + 0.5) + 1.0).ln()
    }

    fn term_weight(&self, tf: u32, dl: usize, k: f64, b: f64) -> f64 {
        let tf = tf as f64;
        let norm = 1.0 - b + b * dl as f64 / self.avgdl;
        tf * (k + 1.0) / (tf + k * norm)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "embert-index v1\t{}\t{}\n",
            self.doc_ids.len(),
            self.postings.len()
        );
        for (id, len) in self.doc_ids.iter().zip(&self.doc_lengths) {
            let _ = writeln!(s, "{id}\t{len}");
        }
        for (term, list) in &self.postings {
            s.push_str(term);
            for (d, tf) in list {
                let _ = write!(s, "\t{d}:{tf}");
            }
            s.push('\n');
        }
        s
    }

    pub fn parse(name: &str, content: &str) -> Result<Self> {
        let mut lines = content.lines().enumerate();
        let bad = |ln: usize, msg: &str| Error::parse(name, ln + 1, msg.to_string());
        let (_, header) = lines.next().ok_or_else(|| bad(0, "missing header"))?;
        let h: Vec<&str> = header.split('\t').collect();
        let (n_docs, n_terms) = match h.as_slice() {
            ["embert-index v1", d, t] => (
                d.parse::<usize>().map_err(|_| bad(0, "bad doc count"))?,
                t.parse::<usize>().map_err(|_| bad(0, "bad term count"))?,
            ),
            _ => return Err(bad(0, "expected `embert-index v1<TAB>docs<TAB>terms`")),
        };
        let mut doc_ids = Vec::with_capacity(n_docs);
        let mut doc_lengths = Vec::with_capacity(n_docs);
        for _ in 0..n_docs {
            let (ln, line) = lines
                .next()
                .ok_or_else(|| bad(0, "truncated document table"))?;
            let (id, len) = line
                .split_once('\t')
                .ok_or_else(|| bad(ln, "expected `doc_id<TAB>length`"))?;
            doc_ids.push(id.to_string());
            doc_lengths.push(len.parse().map_err(|_| bad(ln, "bad length"))?);
        }
        if doc_ids.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        if doc_ids.windows(2).any(|w| w[0] >= w[1]) {
            return Err(bad(1, "document ids must be strictly ascending"));
        }
        let mut postings = BTreeMap::new();
        for (ln, line) in lines {
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split('\t');
            let term = fields.next().unwrap_or_default().to_string();
            let mut list = Vec::new();
            for f in fields {
                let (d, tf) = f
                    .split_once(':')
                    .ok_or_else(|| bad(ln, "expected `doc:tf`"))?;
                let d: usize = d.parse().map_err(|_| bad(ln, "bad doc index"))?;
                let tf: u32 = tf.parse().map_err(|_| bad(ln, "bad term frequency"))?;
                if d >= n_docs || list.last().is_some_and(|&(p, _)| p >= d) {
                    return Err(bad(ln, "posting out of range or out of order"));
                }
                list.push((d, tf));
            }
            postings.insert(term, list);
        }
        if postings.len() != n_terms {
            return Err(bad(0, "term count disagrees with header"));
        }
        let avgdl = doc_lengths.iter().sum::<usize>() as f64 / n_docs as f64;
        Ok(InvertedIndex {
            postings,
            doc_ids,
            doc_lengths,
            avgdl,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (name, content) = corpus::read_file(path)?;
        Self::parse(&name, &content)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        corpus::write_file(path, &self.to_text())
    }
}

/// BM25 with the `+1`-smoothed idf. Repeated query terms count repeatedly.
pub fn bm25_score(
    index: &InvertedIndex,
    query_terms: &[String],
    doc_id: &str,
    k: f64,
    b: f64,
) -> Result<f64> {
    let d = index
        .doc_index(doc_id)
        .ok_or_else(|| Error::UnknownDoc(doc_id.to_string()))?;
    let dl = index.doc_lengths[d];
    let mut score = 0.0;
    for t in query_terms {
        let Some(list) = index.postings.get(t) else {
            continue;
        };
        if let Ok(p) = list.binary_search_by_key(&d, |&(doc, _)| doc) {
            score += index.idf(t) * index.term_weight(list[p].1, dl, k, b);
        }
    }
    Ok(score)
}

/// Descending score, ties by ascending doc id.
pub fn rank_order(a: &(String, f64), b: &(String, f64)) -> Ordering {
    b.1.partial_cmp(&a.1)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.0.cmp(&b.0))
}

/// Score every document (term-at-a-time accumulation) and keep the top
/// `k_top`. Documents sharing no term with the query rank with score 0.
pub fn search(
    index: &InvertedIndex,
    query_terms: &[String],
    k_top: usize,
    k: f64,
    b: f64,
) -> Vec<(String, f64)> {
    let mut parts: Vec<Vec<f64>> = vec![Vec::new(); index.num_docs()];
    for t in query_terms {
        let Some(list) = index.postings.get(t) else {
            continue;
        };
        let idf = index.idf(t);
        for &(d, tf) in list {
            parts[d].push(idf * index.term_weight(tf, index.doc_lengths[d], k, b));
        }
    }
    let mut ranked: Vec<(String, f64)> = index
        .doc_ids
        .iter()
        .cloned()
        .zip(parts.into_iter().map(canonical_sum))
        .collect();
    ranked.sort_by(rank_order);
    ranked.truncate(k_top);
    ranked
}

/// Sum in ascending order, so documents whose term contributions are equal
/// as multisets get bit-identical scores and fall to the doc-id tie rule.
pub fn canonical_sum(mut parts: Vec<f64>) -> f64 {
    parts.sort_by(f64::total_cmp);
    parts.iter().sum()
}

pub fn search_query(
    index: &InvertedIndex,
    query_id: &str,
    query_text: &str,
    k_top: usize,
) -> RetrievalResult {
    RetrievalResult {
        query_id: query_id.to_string(),
        ranked: search(index, &text::terms(query_text), k_top, DEFAULT_K, DEFAULT_B),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn terms(s: &str) -> Vec<String> {
        text::terms(s)
    }

    #[test]
    fn single_doc_postings() {
        let idx = InvertedIndex::build([("d", "a b a")]).unwrap();
        assert_eq!(idx.postings("a"), vec![("d", 2)]);
        assert_eq!(idx.postings("b"), vec![("d", 1)]);
        assert_eq!(idx.avgdl(), 3.0);
    }

    #[test]
    fn avgdl_is_mean_length() {
        let idx = InvertedIndex::build([("x", "a b"), ("y", "a b c d")]).unwrap();
        assert_eq!(idx.avgdl(), 3.0);
        let again = InvertedIndex::build([("y", "a b c d"), ("x", "a b")]).unwrap();
        assert_eq!(idx, again);
    }

    #[test]
    fn empty_and_duplicate_rejected() {
        assert!(matches!(
            InvertedIndex::build(Vec::<(&str, &str)>::new()),
            Err(Error::EmptyCorpus)
        ));
        assert!(matches!(
            InvertedIndex::build([("a", "x"), ("a", "y")]),
            Err(Error::DuplicateId { .. })
        ));
    }

    #[test]
    fn two_doc_score_is_ln2() {
        let idx = InvertedIndex::build([("d1", "x y"), ("d2", "z w")]).unwrap();
        let s = bm25_score(&idx, &terms("x"), "d1", 0.9, 0.4).unwrap();
        assert!((s - 2f64.ln()).abs() < 1e-12);
        assert_eq!(bm25_score(&idx, &terms("x"), "d2", 0.9, 0.4).unwrap(), 0.0);
        let twice = bm25_score(&idx, &terms("x x"), "d1", 0.9, 0.4).unwrap();
        assert!((twice - 2.0 * s).abs() < 1e-12);
        assert!(matches!(
            bm25_score(&idx, &terms("x"), "zz", 0.9, 0.4),
            Err(Error::UnknownDoc(_))
        ));
    }

    #[test]
    fn ties_break_on_doc_id() {
        let idx =
            InvertedIndex::build([("b", "same text"), ("a", "same text"), ("c", "other")]).unwrap();
        let r = search(&idx, &terms("same"), 10, DEFAULT_K, DEFAULT_B);
        let ids: Vec<&str> = r.iter().map(|(d, _)| d.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
        assert_eq!(r[2].1, 0.0);
    }

    fn random_corpus(seed: u64, n: usize) -> Vec<(String, String)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let len = rng.gen_range(1..30);
                let body: Vec<String> = (0..len)
                    .map(|_| format!("t{}", rng.gen_range(0..40)))
                    .collect();
                (format!("doc{i:04}"), body.join(" "))
            })
            .collect()
    }

    // Straight evaluation of the formula, independent of postings.
    fn brute_force(docs: &[(String, String)], q: &[String], k: f64, b: f64) -> Vec<(String, f64)> {
        let toks: Vec<Vec<String>> = docs.iter().map(|(_, t)| terms(t)).collect();
        let n = docs.len() as f64;
        let avgdl = toks.iter().map(Vec::len).sum::<usize>() as f64 / n;
        let mut out: Vec<(String, f64)> = docs
            .iter()
            .zip(&toks)
            .map(|((id, _), dt)| {
                let mut s = Vec::new();
                for t in q {
                    let tf = dt.iter().filter(|x| *x == t).count() as f64;
                    if tf == 0.0 {
                        continue;
                    }
                    let df = toks.iter().filter(|d| d.contains(t)).count() as f64;
                    let idf = ((n - df + 0.5) / (df + 0.5) + 1.0).ln();
                    s.push(
                        idf * tf * (k + 1.0) / (tf + k * (1.0 - b + b * dt.len() as f64 / avgdl)),
                    );
                }
                (id.clone(), canonical_sum(s))
            })
            .collect();
        out.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        out
    }

    #[test]
    fn matches_exhaustive_oracle() {
        let docs = random_corpus(7, 200);
        let idx = InvertedIndex::build(docs.iter().map(|(a, b)| (a.as_str(), b.as_str()))).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let q: Vec<String> = (0..rng.gen_range(1..5))
                .map(|_| format!("t{}", rng.gen_range(0..45)))
                .collect();
            let got = search(&idx, &q, 1000, DEFAULT_K, DEFAULT_B);
            let want = brute_force(&docs, &q, DEFAULT_K, DEFAULT_B);
            assert_eq!(got.len(), want.len());
            for (g, w) in got.iter().zip(&want) {
                assert_eq!(g.0, w.0);
                assert!((g.1 - w.1).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn file_round_trip() {
        let docs = random_corpus(3, 30);
        let idx = InvertedIndex::build(docs.iter().map(|(a, b)| (a.as_str(), b.as_str()))).unwrap();
        let back = InvertedIndex::parse("idx", &idx.to_text()).unwrap();
        assert_eq!(idx, back);
    }

    #[test]
    fn adding_a_document_keeps_relative_order_when_rescored() {
        let mut docs = random_corpus(11, 50);
        let q = terms("t1 t2 t3");
        let idx = InvertedIndex::build(docs.iter().map(|(a, b)| (a.as_str(), b.as_str()))).unwrap();
        let before = search(&idx, &q, 100, DEFAULT_K, DEFAULT_B);
        docs.push(("zzz".into(), "t9 t9 t9".into()));
        let idx2 =
            InvertedIndex::build(docs.iter().map(|(a, b)| (a.as_str(), b.as_str()))).unwrap();
        let after: Vec<(String, f64)> = search(&idx2, &q, 100, DEFAULT_K, DEFAULT_B)
            .into_iter()
            .filter(|(d, _)| d != "zzz")
            .collect();
        let a: Vec<&String> = before.iter().map(|(d, _)| d).collect();
        let b: Vec<&String> = after.iter().map(|(d, _)| d).collect();
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn search_equals_oracle(seed in 0u64..1000, n in 1usize..60, k_top in 1usize..80) {
            let docs = random_corpus(seed, n);
            let idx = InvertedIndex::build(docs.iter().map(|(a, b)| (a.as_str(), b.as_str()))).unwrap();
            let q = terms("t0 t1 t5 t5 t17");
            let got = search(&idx, &q, k_top, DEFAULT_K, DEFAULT_B);
            let want = brute_force(&docs, &q, DEFAULT_K, DEFAULT_B);
            prop_assert_eq!(got.len(), k_top.min(n));
            for (g, w) in got.iter().zip(&want) {
                prop_assert_eq!(&g.0, &w.0);
            }
            prop_assert!(got.windows(2).all(|w| w[0].1 >= w[1].1));
            let total: usize = idx.doc_ids().iter().map(|d| idx.doc_length(d).unwrap()).sum();
            prop_assert!((total as f64 / n as f64 - idx.avgdl()).abs() < 1e-9);
        }
    }
}
