//! Ranking metrics, significance testing and the per-category analyses.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::corpus::{Collection, QrelMap, QueryType};
use crate::embeddings::cosine;
use crate::encoder::EncoderWeights;
use crate::error::{Error, Result};
use crate::pipeline::{Featurizer, Run};
use crate::tokenizer::{self, MentionCategory, TokenKind};

/// NDCG@k with linear gain. The ideal DCG is taken over every judged
/// document of the query; queries without a relevant document score 0.
pub fn ndcg_at_k(ranking: &[&str], judged: Option<&BTreeMap<String, u8>>, k: usize) -> f64 {
    let Some(judged) = judged else {
        return 0.0;
    };
    let grade = |d: &str| judged.get(d).copied().unwrap_or(0) as f64;
    let dcg: f64 = ranking
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, d)| grade(d) / (i as f64 + 2.0).log2())
        .sum();
    let mut ideal: Vec<u8> = judged.values().copied().filter(|&g| g > 0).collect();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg: f64 = ideal
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &g)| g as f64 / (i as f64 + 2.0).log2())
        .sum();
    if idcg == 0.0 {
        0.0
    } else {
        dcg / idcg
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub tag: String,
    pub cutoffs: Vec<usize>,
    /// NDCG per query, one value per cutoff.
    pub per_query: BTreeMap<String, Vec<f64>>,
    /// Queries without judgments or without retrieved documents.
    pub flagged: BTreeSet<String>,
}

impl EvalReport {
    fn column(&self, k: usize) -> usize {
        self.cutoffs
            .iter()
            .position(|&c| c == k)
            .unwrap_or_else(|| panic!("cutoff {k} was not evaluated"))
    }

    /// Per-query NDCG@k in query id order.
    pub fn values(&self, k: usize) -> Vec<f64> {
        let c = self.column(k);
        self.per_query.values().map(|v| v[c]).collect()
    }

    pub fn value(&self, query_id: &str, k: usize) -> Option<f64> {
        let c = self.column(k);
        self.per_query.get(query_id).map(|v| v[c])
    }

    pub fn mean(&self, k: usize) -> f64 {
        let v = self.values(k);
        if v.is_empty() {
            0.0
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::from("query_id");
        for k in &self.cutoffs {
            let _ = write!(s, "\tndcg@{k}");
        }
        s.push('\n');
        for (q, v) in &self.per_query {
            s.push_str(q);
            for x in v {
                let _ = write!(s, "\t{x:.6}");
            }
            if self.flagged.contains(q) {
                s.push_str("\t#flagged");
            }
            s.push('\n');
        }
        s.push_str("all");
        for k in &self.cutoffs {
            let _ = write!(s, "\t{:.6}", self.mean(*k));
        }
        s.push('\n');
        s
    }
}

/// Evaluate every query of `run`.
pub fn evaluate_run(run: &Run, qrels: &QrelMap, cutoffs: &[usize]) -> EvalReport {
    let ids: Vec<String> = run.query_ids().map(str::to_string).collect();
    evaluate_queries(run, qrels, cutoffs, &ids)
}

/// Evaluate the given queries; those missing from the run, with an empty
/// ranking, or without judgments score 0 and are flagged.
pub fn evaluate_queries(
    run: &Run,
    qrels: &QrelMap,
    cutoffs: &[usize],
    query_ids: &[String],
) -> EvalReport {
    let mut per_query = BTreeMap::new();
    let mut flagged = BTreeSet::new();
    for q in query_ids {
        let ranking = run.doc_ids(q);
        let judged = qrels.get(q);
        if ranking.is_empty() || judged.is_none() {
            log::warn!(
                "query {q}: {}",
                if judged.is_none() {
                    "no judgments"
                } else {
                    "empty ranking"
                }
            );
            flagged.insert(q.clone());
        }
        per_query.insert(
            q.clone(),
            cutoffs
                .iter()
                .map(|&k| ndcg_at_k(&ranking, judged, k))
                .collect(),
        );
    }
    EvalReport {
        tag: run.tag.clone(),
        cutoffs: cutoffs.to_vec(),
        per_query,
        flagged,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTest {
    pub t: f64,
    pub df: usize,
    pub p: f64,
}

impl TTest {
    pub fn significant(&self, alpha: f64) -> bool {
        self.p < alpha
    }
}

/// Two-tailed paired t-test on `a - b`. All-zero differences give
/// `t = 0, p = 1`.
pub fn paired_ttest(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::LengthMismatch {
            a: a.len(),
            b: b.len(),
        });
    }
    let n = a.len() as f64;
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let df = a.len() - 1;
    if var == 0.0 {
        let (t, p) = if mean == 0.0 {
            (0.0, 1.0)
        } else {
            (mean.signum() * f64::INFINITY, 0.0)
        };
        return Ok(TTest { t, df, p });
    }
    let t = mean / (var.sqrt() / n.sqrt());
    Ok(TTest {
        t,
        df,
        p: student_t_two_tailed(t, df as f64),
    })
}

/// `P(|T| >= |t|)` for Student's t with `df` degrees of freedom.
pub fn student_t_two_tailed(t: f64, df: f64) -> f64 {
    if !t.is_finite() {
        return 0.0;
    }
    regularized_incomplete_beta(df / (df + t * t), df / 2.0, 0.5).clamp(0.0, 1.0)
}

fn ln_gamma(x: f64) -> f64 {
    // Lanczos, g = 7, n = 9
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + 7.5;
    for (i, c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// `I_x(a, b)` by Lentz's continued fraction.
pub fn regularized_incomplete_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_front.exp() * beta_cf(x, a, b) / a
    } else {
        1.0 - ln_front.exp() * beta_cf(1.0 - x, b, a) / b
    }
}

fn beta_cf(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-15;
    let mut c = 1.0;
    let mut d = 1.0 - (a + b) * x / (a + 1.0);
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=500 {
        let m = m as f64;
        let m2 = 2.0 * m;
        for num in [
            m * (b - m) * x / ((a + m2 - 1.0) * (a + m2)),
            -(a + m) * (a + b + m) * x / ((a + m2) * (a + m2 + 1.0)),
        ] {
            d = 1.0 + num * d;
            if d.abs() < TINY {
                d = TINY;
            }
            c = 1.0 + num / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            h *= d * c;
        }
        if (d * c - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Category of every query of the collection, from its annotated mentions.
pub fn query_categories(
    collection: &Collection,
    vocab: &tokenizer::Vocabulary,
) -> BTreeMap<String, MentionCategory> {
    collection
        .queries()
        .iter()
        .map(|q| {
            let anns = collection.annotations_for(&q.query_id);
            let cat = tokenizer::categorize_query(anns.iter().map(|a| a.mention.as_str()), vocab);
            (q.query_id.clone(), cat)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CategoryRow {
    pub category: MentionCategory,
    pub count: usize,
    pub mean_a: f64,
    pub mean_b: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CategoryReport {
    pub tag_a: String,
    pub tag_b: String,
    pub k: usize,
    pub rows: Vec<CategoryRow>,
}

impl CategoryReport {
    pub fn row(&self, category: MentionCategory) -> Option<&CategoryRow> {
        self.rows.iter().find(|r| r.category == category)
    }

    pub fn to_tsv(&self) -> String {
        let mut s = format!("category\tqueries\t{}\t{}\n", self.tag_a, self.tag_b);
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{}\t{}\t{:.6}\t{:.6}",
                r.category.as_str(),
                r.count,
                r.mean_a,
                r.mean_b
            );
        }
        s
    }
}

/// Mean NDCG@k of two runs per mention category, over the collection's
/// queries. Only categories with at least one query are listed.
pub fn category_report(
    run_a: &Run,
    run_b: &Run,
    collection: &Collection,
    vocab: &tokenizer::Vocabulary,
    qrels: &QrelMap,
    k: usize,
) -> CategoryReport {
    let ids: Vec<String> = collection
        .queries()
        .iter()
        .map(|q| q.query_id.clone())
        .collect();
    let ea = evaluate_queries(run_a, qrels, &[k], &ids);
    let eb = evaluate_queries(run_b, qrels, &[k], &ids);
    let cats = query_categories(collection, vocab);
    let mut buckets: BTreeMap<MentionCategory, (usize, f64, f64)> = BTreeMap::new();
    for (q, cat) in &cats {
        let e = buckets.entry(*cat).or_default();
        e.0 += 1;
        e.1 += ea.value(q, k).unwrap_or(0.0);
        e.2 += eb.value(q, k).unwrap_or(0.0);
    }
    CategoryReport {
        tag_a: run_a.tag.clone(),
        tag_b: run_b.tag.clone(),
        k,
        rows: buckets
            .into_iter()
            .map(|(category, (n, a, b))| CategoryRow {
                category,
                count: n,
                mean_a: a / n as f64,
                mean_b: b / n as f64,
            })
            .collect(),
    }
}

pub const QUERY_TYPES: [QueryType; 5] = [
    QueryType::SemSearch,
    QueryType::InexLd,
    QueryType::ListSearch,
    QueryType::Qald2,
    QueryType::Other,
];

/// Query counts per (mention category, query type).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Crosstab {
    pub counts: BTreeMap<(MentionCategory, QueryType), usize>,
}

impl Crosstab {
    pub fn get(&self, category: MentionCategory, query_type: QueryType) -> usize {
        self.counts
            .get(&(category, query_type))
            .copied()
            .unwrap_or(0)
    }

    pub fn row_total(&self, category: MentionCategory) -> usize {
        QUERY_TYPES.iter().map(|&t| self.get(category, t)).sum()
    }

    pub fn column_total(&self, query_type: QueryType) -> usize {
        MentionCategory::ALL
            .iter()
            .map(|&c| self.get(c, query_type))
            .sum()
    }

    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::from("category");
        for t in QUERY_TYPES {
            let _ = write!(s, "\t{}", t.as_str());
        }
        s.push_str("\ttotal\n");
        for c in MentionCategory::ALL {
            s.push_str(c.as_str());
            for t in QUERY_TYPES {
                let _ = write!(s, "\t{}", self.get(c, t));
            }
            let _ = writeln!(s, "\t{}", self.row_total(c));
        }
        s.push_str("total");
        for t in QUERY_TYPES {
            let _ = write!(s, "\t{}", self.column_total(t));
        }
        let _ = writeln!(s, "\t{}", self.total());
        s
    }
}

pub fn crosstab(collection: &Collection, vocab: &tokenizer::Vocabulary) -> Crosstab {
    let cats = query_categories(collection, vocab);
    let mut counts = BTreeMap::new();
    for q in collection.queries() {
        *counts.entry((cats[&q.query_id], q.query_type)).or_insert(0) += 1;
    }
    Crosstab { counts }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ExportKind {
    Entity,
    Mention,
}

impl ExportKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExportKind::Entity => "entity",
            ExportKind::Mention => "mention",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRow {
    pub kind: ExportKind,
    pub surface: String,
    pub query_id: String,
    pub doc_id: String,
    pub position: usize,
    pub vector: Vec<f64>,
}

/// Final-layer vectors of every entity token in the given (query, doc)
/// inputs, each followed by the nearest preceding word-starting piece.
pub fn export_final_embeddings(
    weights: &EncoderWeights,
    featurizer: &Featurizer<'_>,
    collection: &Collection,
    pairs: &[(String, String)],
) -> Result<Vec<EmbeddingRow>> {
    let vocab = featurizer.vocab;
    let mut rows = Vec::new();
    for (q, d) in pairs {
        let input = featurizer.query_input(collection, q, d)?;
        let out = weights.forward(&input, featurizer.entity_inputs())?;
        let toks: Vec<_> = input.token_ids.iter().map(|&id| vocab.token(id)).collect();
        for (pos, tok) in toks
            .iter()
            .enumerate()
            .filter(|(_, t)| t.kind == TokenKind::Entity)
        {
            let row = |kind, p: usize| EmbeddingRow {
                kind,
                surface: toks[p].surface.clone(),
                query_id: q.clone(),
                doc_id: d.clone(),
                position: p,
                vector: out.hidden(p).to_vec(),
            };
            rows.push(row(ExportKind::Entity, pos));
            let start = (0..pos)
                .rev()
                .find(|&p| toks[p].kind == TokenKind::WordPiece && !toks[p].is_continuation());
            match start {
                Some(p) => rows.push(row(ExportKind::Mention, p)),
                None => log::warn!(
                    "entity {} at {pos} has no preceding word piece",
                    tok.surface
                ),
            }
        }
    }
    Ok(rows)
}

pub fn embeddings_tsv(rows: &[EmbeddingRow]) -> String {
    let mut s = String::from("kind\tsurface\tquery_id\tdoc_id\tposition\tvector\n");
    for r in rows {
        let v: Vec<String> = r.vector.iter().map(|x| format!("{x:.6}")).collect();
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}\t{}",
            r.kind.as_str(),
            r.surface,
            r.query_id,
            r.doc_id,
            r.position,
            v.join(" ")
        );
    }
    s
}

/// `[CLS]` attention row of the first layer's first head, with surfaces.
pub fn export_attention(
    weights: &EncoderWeights,
    featurizer: &Featurizer<'_>,
    collection: &Collection,
    query_id: &str,
    doc_id: &str,
) -> Result<Vec<(String, f64)>> {
    let input = featurizer.query_input(collection, query_id, doc_id)?;
    let out = weights.forward(&input, featurizer.entity_inputs())?;
    Ok(input
        .token_ids
        .iter()
        .zip(out.attention_row(0, 0, 0))
        .map(|(&id, &w)| (featurizer.vocab.surface(id), w))
        .collect())
}

pub fn attention_tsv(weights: &[(String, f64)]) -> String {
    let mut s = String::from("position\ttoken\tweight\n");
    for (i, (t, w)) in weights.iter().enumerate() {
        let _ = writeln!(s, "{i}\t{t}\t{w:.8}");
    }
    s
}

/// Mean cosine within groups and across groups over all vector pairs.
/// Returns NaN for a side without pairs.
pub fn cluster_cosines<G: Ord>(items: &[(G, &[f64])]) -> (f64, f64) {
    let (mut intra, mut ni, mut inter, mut nx) = (0.0, 0usize, 0.0, 0usize);
    for (i, (ga, a)) in items.iter().enumerate() {
        for (gb, b) in &items[i + 1..] {
            let c = cosine(a, b);
            if ga == gb {
                intra += c;
                ni += 1;
            } else {
                inter += c;
                nx += 1;
            }
        }
    }
    let mean = |s: f64, n: usize| if n == 0 { f64::NAN } else { s / n as f64 };
    (mean(intra, ni), mean(inter, nx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Annotation, Document, Qrel, Query, Split};
    use crate::tokenizer::Vocabulary;
    use proptest::prelude::*;
    use statrs::distribution::{ContinuousCDF, StudentsT};

    fn judged(grades: &[(&str, u8)]) -> BTreeMap<String, u8> {
        grades.iter().map(|(d, g)| (d.to_string(), *g)).collect()
    }

    #[test]
    fn ideal_order_scores_one() {
        let j = judged(&[("a", 2), ("b", 1), ("c", 0)]);
        assert!((ndcg_at_k(&["a", "b", "c"], Some(&j), 10) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn hand_evaluated_value() {
        let j = judged(&[("a", 2), ("b", 0), ("c", 1)]);
        let want = 2.5 / (2.0 + 1.0 / 3f64.log2());
        let got = ndcg_at_k(&["a", "b", "c"], Some(&j), 10);
        assert!((got - want).abs() < 1e-12);
        assert!((got - 0.9502).abs() < 1e-4);
    }

    #[test]
    fn top_irrelevant_at_one_is_zero() {
        let j = judged(&[("a", 0), ("b", 1)]);
        assert_eq!(ndcg_at_k(&["a", "b"], Some(&j), 1), 0.0);
        assert_eq!(ndcg_at_k(&["a"], Some(&judged(&[("a", 0)])), 10), 0.0);
        assert_eq!(ndcg_at_k(&["a"], None, 10), 0.0);
    }

    #[test]
    fn ideal_uses_unretrieved_judgments() {
        let j = judged(&[("a", 1), ("z", 2)]);
        let got = ndcg_at_k(&["a"], Some(&j), 10);
        assert!((got - 1.0 / (2.0 + 1.0 / 3f64.log2())).abs() < 1e-12);
    }

    fn qrels(rows: &[(&str, &str, u8)]) -> QrelMap {
        QrelMap::from_qrels(
            &rows
                .iter()
                .map(|(q, d, g)| Qrel {
                    query_id: q.to_string(),
                    doc_id: d.to_string(),
                    grade: *g,
                })
                .collect::<Vec<_>>(),
        )
    }

    #[test]
    fn evaluate_flags_missing_and_empty() {
        let qr = qrels(&[("q1", "a", 1), ("q2", "b", 2)]);
        let mut run = Run::new("r");
        run.insert("q1", vec![("a".into(), 1.0)]).unwrap();
        run.insert("q2", vec![]).unwrap();
        run.insert("q3", vec![("a".into(), 1.0)]).unwrap();
        let rep = evaluate_run(&run, &qr, &[10, 100]);
        assert_eq!(rep.value("q1", 10), Some(1.0));
        assert_eq!(rep.value("q2", 10), Some(0.0));
        assert_eq!(
            rep.flagged,
            ["q2", "q3"].iter().map(|s| s.to_string()).collect()
        );
        assert!((rep.mean(10) - 1.0 / 3.0).abs() < 1e-12);
        let tsv = rep.to_tsv();
        assert!(tsv.starts_with("query_id\tndcg@10\tndcg@100\n"));
        assert!(tsv.ends_with("all\t0.333333\t0.333333\n"));
    }

    #[test]
    fn ttest_known_values() {
        let r = paired_ttest(&[1.0, 2.0, 3.0, 4.0, 5.0], &[0.0; 5]).unwrap();
        assert!((r.t - 4.242640687).abs() < 1e-6);
        assert_eq!(r.df, 4);
        assert!((r.p - 0.01324).abs() < 5e-5, "{}", r.p);
        let same = paired_ttest(&[0.3, 0.4], &[0.3, 0.4]).unwrap();
        assert_eq!(same.p, 1.0);
        assert!(matches!(
            paired_ttest(&[1.0], &[0.0]),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(
            paired_ttest(&[1.0, 2.0], &[0.0]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn student_t_matches_reference_cdf() {
        for df in [1.0, 2.0, 4.0, 9.0, 30.0, 120.0] {
            let dist = StudentsT::new(0.0, 1.0, df).unwrap();
            for t in [0.0, 0.1, 0.5, 1.0, 2.0, 3.5, 8.0] {
                let want = 2.0 * (1.0 - dist.cdf(t));
                let got = student_t_two_tailed(t, df);
                assert!((got - want).abs() < 1e-10, "df {df} t {t}: {got} vs {want}");
            }
        }
    }

    proptest! {
        #[test]
        fn ttest_is_antisymmetric(a in prop::collection::vec(-1.0f64..1.0, 2..20), shift in -0.5f64..0.5) {
            let b: Vec<f64> = a.iter().enumerate().map(|(i, x)| x * 0.7 + shift + (i as f64) * 0.01).collect();
            let ab = paired_ttest(&a, &b).unwrap();
            let ba = paired_ttest(&b, &a).unwrap();
            prop_assert!((ab.t + ba.t).abs() < 1e-9 * ab.t.abs().max(1.0));
            prop_assert!((ab.p - ba.p).abs() < 1e-12);
        }

        #[test]
        fn swapping_better_doc_up_never_hurts(grades in prop::collection::vec(0u8..3, 2..15), i in 0usize..14, k in 1usize..15) {
            let n = grades.len();
            let i = i % (n - 1);
            let ids: Vec<String> = (0..n).map(|x| format!("d{x:02}")).collect();
            let j: BTreeMap<String, u8> = ids.iter().cloned().zip(grades.iter().copied()).collect();
            let mut order: Vec<&str> = ids.iter().map(String::as_str).collect();
            let before = ndcg_at_k(&order, Some(&j), k);
            if j[order[i + 1]] > j[order[i]] {
                order.swap(i, i + 1);
                prop_assert!(ndcg_at_k(&order, Some(&j), k) >= before - 1e-15);
            }
            prop_assert!((0.0..=1.0 + 1e-12).contains(&before));
        }
    }

    fn category_fixture(mentions: &[Option<&str>]) -> Collection {
        let mut docs = vec![Document::new("d0", "the city")];
        docs.push(Document::new("d1", "a river"));
        let mut queries = Vec::new();
        let mut anns = Vec::new();
        let mut folds = Vec::new();
        for (i, m) in mentions.iter().enumerate() {
            let id = format!("q{i}");
            let text = match m {
                Some(m) => format!("who is {m}"),
                None => "who is it".to_string(),
            };
            let ty = if i % 2 == 0 {
                QueryType::InexLd
            } else {
                QueryType::SemSearch
            };
            queries.push(Query::new(&id, &text, ty));
            if let Some(m) = m {
                anns.push(Annotation {
                    owner_id: id.clone(),
                    mention: m.to_string(),
                    char_start: 7,
                    char_end: 7 + m.chars().count(),
                    entity_id: format!("E{i}"),
                });
            }
            folds.push((i % 5, id, Split::Test));
        }
        Collection::from_parts(docs, queries, vec![], anns, folds).unwrap()
    }

    #[test]
    fn unannotated_queries_form_one_row() {
        let c = category_fixture(&[None, None, None]);
        let v = Vocabulary::fixture();
        let run = Run::new("a");
        let rep = category_report(&run, &run, &c, &v, &QrelMap::default(), 10);
        assert_eq!(rep.rows.len(), 1);
        assert_eq!(rep.rows[0].category, MentionCategory::NoEntity);
        assert_eq!(rep.rows[0].count, 3);
    }

    #[test]
    fn one_query_per_category() {
        let c = category_fixture(&[
            None,
            Some("france"),
            Some("yoko ono"),
            Some("weser"),
            Some("frisian"),
        ]);
        let v = Vocabulary::fixture();
        let qr = qrels(&[
            ("q0", "d0", 1),
            ("q1", "d1", 1),
            ("q2", "d0", 2),
            ("q3", "d1", 1),
            ("q4", "d0", 1),
        ]);
        let mut a = Run::new("a");
        let mut b = Run::new("b");
        for q in 0..5 {
            a.insert(
                format!("q{q}"),
                vec![("d0".into(), 2.0), ("d1".into(), 1.0)],
            )
            .unwrap();
            b.insert(
                format!("q{q}"),
                vec![("d1".into(), 2.0), ("d0".into(), 1.0)],
            )
            .unwrap();
        }
        let rep = category_report(&a, &b, &c, &v, &qr, 10);
        assert_eq!(rep.rows.len(), 5);
        assert!(rep.rows.iter().all(|r| r.count == 1));
        // brute-force bucket means
        let ea = evaluate_run(&a, &qr, &[10]);
        let cats = query_categories(&c, &v);
        for row in &rep.rows {
            let vals: Vec<f64> = cats
                .iter()
                .filter(|(_, c)| **c == row.category)
                .map(|(q, _)| ea.value(q, 10).unwrap())
                .collect();
            let m = vals.iter().sum::<f64>() / vals.len() as f64;
            assert!((m - row.mean_a).abs() < 1e-12);
        }
        assert_eq!(rep.row(MentionCategory::MultiCont).unwrap().count, 1);
    }

    #[test]
    fn crosstab_marginals() {
        let c = category_fixture(&[
            None,
            Some("france"),
            None,
            Some("frisian"),
            Some("weser"),
            None,
        ]);
        let v = Vocabulary::fixture();
        let x = crosstab(&c, &v);
        assert_eq!(x.total(), 6);
        assert_eq!(x.get(MentionCategory::NoEntity, QueryType::InexLd), 2);
        let rows: usize = MentionCategory::ALL.iter().map(|&c| x.row_total(c)).sum();
        let cols: usize = QUERY_TYPES.iter().map(|&t| x.column_total(t)).sum();
        assert_eq!(rows, 6);
        assert_eq!(cols, 6);
        let tsv = x.to_tsv();
        assert_eq!(tsv.lines().count(), 7);
    }

    #[test]
    fn cluster_cosine_split() {
        let a = [1.0, 0.0];
        let b = [0.9, 0.1];
        let c = [0.0, 1.0];
        let items: Vec<(u8, &[f64])> = vec![(0, &a), (0, &b), (1, &c)];
        let (intra, inter) = cluster_cosines(&items);
        assert!(intra > 0.99);
        assert!(inter < 0.2);
    }
}
