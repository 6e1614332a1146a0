//! Collection loading, validation and persistence.
//!
//! File formats (all UTF-8, one record per line):
//!
//! * documents / queries: `id<TAB>text` (queries may carry a third
//!   `<TAB>query_type` column)
//! * qrels: `query_id 0 doc_id grade`
//! * annotations: `owner_id<TAB>char_start<TAB>char_end<TAB>mention<TAB>entity_id`,
//!   offsets in chars over the normalized owner text
//! * graph: `#entities` / `#links` / `#anchors` sections
//! * folds: `fold_id<TAB>query_id<TAB>train|test`
//!
//! Raw text is retained next to its normalized form so that writing a loaded
//! collection reproduces the input files byte for byte.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::text;

#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub doc_id: String,
    raw: String,
    text: String,
}

impl Document {
    pub fn new(doc_id: impl Into<String>, raw: impl Into<String>) -> Self {
        let raw = raw.into();
        let text = text::normalize(&raw);
        Document {
            doc_id: doc_id.into(),
            raw,
            text,
        }
    }

    /// Normalized (NFC, lower-cased) text.
    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn raw_text(&self) -> &str {
        &self.raw
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum QueryType {
    SemSearch,
    InexLd,
    ListSearch,
    Qald2,
    Other,
}

impl QueryType {
    pub const ALL: [QueryType; 5] = [
        QueryType::SemSearch,
        QueryType::InexLd,
        QueryType::ListSearch,
        QueryType::Qald2,
        QueryType::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            QueryType::SemSearch => "SemSearch",
            QueryType::InexLd => "INEX-LD",
            QueryType::ListSearch => "ListSearch",
            QueryType::Qald2 => "QALD-2",
            QueryType::Other => "Other",
        }
    }

    /// Query type implied by DBpedia-Entity v2 style id prefixes.
    pub fn from_id_prefix(id: &str) -> QueryType {
        let upper = id.to_ascii_uppercase();
        if upper.starts_with("SEMSEARCH_ES") {
            QueryType::SemSearch
        } else if upper.starts_with("INEX_LD") {
            QueryType::InexLd
        } else if upper.starts_with("INEX_XER")
            || upper.starts_with("SEMSEARCH_LS")
            || upper.starts_with("TREC_ENTITY")
        {
            QueryType::ListSearch
        } else if upper.starts_with("QALD2") {
            QueryType::Qald2
        } else {
            QueryType::Other
        }
    }
}

impl FromStr for QueryType {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        QueryType::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown query type `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub query_id: String,
    pub query_type: QueryType,
    raw: String,
    text: String,
    explicit_type: bool,
}

impl Query {
    pub fn new(query_id: impl Into<String>, raw: impl Into<String>, query_type: QueryType) -> Self {
        let raw = raw.into();
        let text = text::normalize(&raw);
        Query {
            query_id: query_id.into(),
            query_type,
            raw,
            text,
            explicit_type: true,
        }
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn raw_text(&self) -> &str {
        &self.raw
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Qrel {
    pub query_id: String,
    pub doc_id: String,
    pub grade: u8,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Annotation {
    pub owner_id: String,
    pub mention: String,
    pub char_start: usize,
    pub char_end: usize,
    pub entity_id: String,
}

impl Annotation {
    pub fn overlaps(&self, other: &Annotation) -> bool {
        self.char_start < other.char_end && other.char_start < self.char_end
    }

    pub fn contains(&self, other: &Annotation) -> bool {
        self.char_start <= other.char_start && other.char_end <= self.char_end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldSpec {
    pub fold_id: usize,
    pub train_query_ids: BTreeSet<String>,
    pub test_query_ids: BTreeSet<String>,
}

pub const NUM_FOLDS: usize = 5;

#[derive(Debug, Clone, Default)]
pub struct CollectionPaths {
    pub docs: PathBuf,
    pub queries: PathBuf,
    pub qrels: Option<PathBuf>,
    pub annotations: Option<PathBuf>,
    pub folds: Option<PathBuf>,
}

#[derive(Debug, Clone, Default)]
pub struct Collection {
    docs: Vec<Document>,
    doc_index: HashMap<String, usize>,
    queries: Vec<Query>,
    query_index: HashMap<String, usize>,
    qrels: Vec<Qrel>,
    annotations: Vec<Annotation>,
    by_owner: HashMap<String, Vec<usize>>,
    fold_rows: Vec<(usize, String, Split)>,
    folds: Vec<FoldSpec>,
}

impl Collection {
    /// Assemble a collection from in-memory parts, enforcing the same
    /// invariants as [`load_collection`].
    pub fn from_parts(
        docs: Vec<Document>,
        queries: Vec<Query>,
        qrels: Vec<Qrel>,
        annotations: Vec<Annotation>,
        fold_rows: Vec<(usize, String, Split)>,
    ) -> Result<Self> {
        let mut c = Collection::default();
        for d in docs {
            c.push_doc(d)?;
        }
        for q in queries {
            c.push_query(q)?;
        }
        let mut seen = HashSet::new();
        for r in qrels {
            if !seen.insert((r.query_id.clone(), r.doc_id.clone())) {
                return Err(Error::DuplicateId {
                    kind: "qrel",
                    id: format!("{} {}", r.query_id, r.doc_id),
                });
            }
            c.qrels.push(r);
        }
        for a in annotations {
            c.check_annotation(&a).map_err(Error::Invalid)?;
            c.push_annotation(a);
        }
        c.fold_rows = fold_rows;
        c.folds = build_folds(&c.fold_rows, &c.queries).map_err(Error::Invalid)?;
        Ok(c)
    }

    fn push_doc(&mut self, d: Document) -> Result<()> {
        if self.doc_index.contains_key(&d.doc_id) {
            return Err(Error::DuplicateId {
                kind: "document",
                id: d.doc_id,
            });
        }
        self.doc_index.insert(d.doc_id.clone(), self.docs.len());
        self.docs.push(d);
        Ok(())
    }

    fn push_query(&mut self, q: Query) -> Result<()> {
        if self.query_index.contains_key(&q.query_id) {
            return Err(Error::DuplicateId {
                kind: "query",
                id: q.query_id,
            });
        }
        self.query_index
            .insert(q.query_id.clone(), self.queries.len());
        self.queries.push(q);
        Ok(())
    }

    fn push_annotation(&mut self, a: Annotation) {
        self.by_owner
            .entry(a.owner_id.clone())
            .or_default()
            .push(self.annotations.len());
        self.annotations.push(a);
    }

    fn owner_text(&self, owner: &str) -> Option<&str> {
        if let Some(&i) = self.query_index.get(owner) {
            Some(self.queries[i].text())
        } else {
            self.doc_index.get(owner).map(|&i| self.docs[i].text())
        }
    }

    fn check_annotation(&self, a: &Annotation) -> std::result::Result<(), String> {
        let text = self.owner_text(&a.owner_id).ok_or_else(|| {
            format!(
                "annotation owner `{}` is neither a query nor a document",
                a.owner_id
            )
        })?;
        if a.char_start >= a.char_end {
            return Err(format!("empty span [{}, {})", a.char_start, a.char_end));
        }
        let len = text.chars().count();
        if a.char_end > len {
            return Err(format!(
                "span end {} exceeds text length {} of `{}`",
                a.char_end, len, a.owner_id
            ));
        }
        let span: String = text
            .chars()
            .skip(a.char_start)
            .take(a.char_end - a.char_start)
            .collect();
        if span != text::normalize(&a.mention) {
            return Err(format!(
                "span text `{span}` does not match mention `{}`",
                a.mention
            ));
        }
        Ok(())
    }

    pub fn docs(&self) -> &[Document] {
        &self.docs
    }

    pub fn queries(&self) -> &[Query] {
        &self.queries
    }

    pub fn qrels(&self) -> &[Qrel] {
        &self.qrels
    }

    pub fn annotations(&self) -> &[Annotation] {
        &self.annotations
    }

    pub fn folds(&self) -> &[FoldSpec] {
        &self.folds
    }

    pub fn doc(&self, id: &str) -> Option<&Document> {
        self.doc_index.get(id).map(|&i| &self.docs[i])
    }

    pub fn query(&self, id: &str) -> Option<&Query> {
        self.query_index.get(id).map(|&i| &self.queries[i])
    }

    /// Query whose normalized text equals `text`, if any.
    pub fn query_by_text(&self, text: &str) -> Option<&Query> {
        let norm = text::normalize(text);
        self.queries.iter().find(|q| q.text == norm)
    }

    /// Annotations of one owner, in file order.
    pub fn annotations_for(&self, owner: &str) -> Vec<&Annotation> {
        self.by_owner
            .get(owner)
            .map(|ix| ix.iter().map(|&i| &self.annotations[i]).collect())
            .unwrap_or_default()
    }

    /// `query_id -> doc_id -> grade`.
    pub fn qrel_map(&self) -> QrelMap {
        QrelMap::from_qrels(&self.qrels)
    }

    pub fn save(&self, paths: &CollectionPaths) -> Result<()> {
        write_file(&paths.docs, &self.docs_tsv())?;
        write_file(&paths.queries, &self.queries_tsv())?;
        if let Some(p) = &paths.qrels {
            write_file(p, &format_qrels(&self.qrels))?;
        }
        if let Some(p) = &paths.annotations {
            write_file(p, &self.annotations_tsv())?;
        }
        if let Some(p) = &paths.folds {
            write_file(p, &self.folds_tsv())?;
        }
        Ok(())
    }

    pub fn docs_tsv(&self) -> String {
        let mut s = String::new();
        for d in &self.docs {
            let _ = writeln!(s, "{}\t{}", d.doc_id, d.raw);
        }
        s
    }

    pub fn queries_tsv(&self) -> String {
        let mut s = String::new();
        for q in &self.queries {
            if q.explicit_type {
                let _ = writeln!(s, "{}\t{}\t{}", q.query_id, q.raw, q.query_type.as_str());
            } else {
                let _ = writeln!(s, "{}\t{}", q.query_id, q.raw);
            }
        }
        s
    }

    pub fn annotations_tsv(&self) -> String {
        let mut s = String::new();
        for a in &self.annotations {
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{}\t{}",
                a.owner_id, a.char_start, a.char_end, a.mention, a.entity_id
            );
        }
        s
    }

    pub fn folds_tsv(&self) -> String {
        let mut s = String::new();
        for (f, q, split) in &self.fold_rows {
            let split = match split {
                Split::Train => "train",
                Split::Test => "test",
            };
            let _ = writeln!(s, "{f}\t{q}\t{split}");
        }
        s
    }
}

/// Graded judgments grouped by query.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QrelMap(pub BTreeMap<String, BTreeMap<String, u8>>);

impl QrelMap {
    pub fn from_qrels(qrels: &[Qrel]) -> Self {
        let mut m: BTreeMap<String, BTreeMap<String, u8>> = BTreeMap::new();
        for r in qrels {
            m.entry(r.query_id.clone())
                .or_default()
                .insert(r.doc_id.clone(), r.grade);
        }
        QrelMap(m)
    }

    pub fn get(&self, query_id: &str) -> Option<&BTreeMap<String, u8>> {
        self.0.get(query_id)
    }

    pub fn grade(&self, query_id: &str, doc_id: &str) -> u8 {
        self.0
            .get(query_id)
            .and_then(|m| m.get(doc_id))
            .copied()
            .unwrap_or(0)
    }
}

pub fn load_collection(paths: &CollectionPaths) -> Result<Collection> {
    let mut c = Collection::default();

    let (name, content) = read_file(&paths.docs)?;
    for (ln, line) in lines(&content) {
        let (id, raw) =
            split2(line).ok_or_else(|| Error::parse(&name, ln, "expected `id<TAB>text`"))?;
        if id.is_empty() || raw.trim().is_empty() {
            return Err(Error::parse(&name, ln, "empty document id or text"));
        }
        c.push_doc(Document::new(id, raw))?;
    }

    let (name, content) = read_file(&paths.queries)?;
    for (ln, line) in lines(&content) {
        let cols: Vec<&str> = line.split('\t').collect();
        let q = match cols.as_slice() {
            [id, raw] => {
                let mut q = Query::new(*id, *raw, QueryType::from_id_prefix(id));
                q.explicit_type = false;
                q
            }
            [id, raw, ty] => {
                let ty = ty.parse().map_err(|e: String| Error::parse(&name, ln, e))?;
                Query::new(*id, *raw, ty)
            }
            _ => return Err(Error::parse(&name, ln, "expected `id<TAB>text[<TAB>type]`")),
        };
        if q.query_id.is_empty() || q.raw.trim().is_empty() {
            return Err(Error::parse(&name, ln, "empty query id or text"));
        }
        c.push_query(q)?;
    }

    if let Some(p) = &paths.qrels {
        let (name, content) = read_file(p)?;
        let mut seen = HashSet::new();
        for (ln, line) in lines(&content) {
            let r = parse_qrel_line(line).map_err(|m| Error::parse(&name, ln, m))?;
            if !seen.insert((r.query_id.clone(), r.doc_id.clone())) {
                return Err(Error::DuplicateId {
                    kind: "qrel",
                    id: format!("{} {}", r.query_id, r.doc_id),
                });
            }
            c.qrels.push(r);
        }
    }

    if let Some(p) = &paths.annotations {
        let (name, content) = read_file(p)?;
        for (ln, line) in lines(&content) {
            let cols: Vec<&str> = line.split('\t').collect();
            let [owner, start, end, mention, entity] = cols.as_slice() else {
                return Err(Error::parse(&name, ln, "expected 5 tab-separated columns"));
            };
            let parse_off = |s: &str| {
                s.parse::<usize>()
                    .map_err(|_| Error::parse(&name, ln, format!("bad offset `{s}`")))
            };
            let a = Annotation {
                owner_id: owner.to_string(),
                char_start: parse_off(start)?,
                char_end: parse_off(end)?,
                mention: mention.to_string(),
                entity_id: entity.to_string(),
            };
            c.check_annotation(&a)
                .map_err(|m| Error::parse(&name, ln, m))?;
            c.push_annotation(a);
        }
    }

    if let Some(p) = &paths.folds {
        let (name, content) = read_file(p)?;
        for (ln, line) in lines(&content) {
            let cols: Vec<&str> = line.split('\t').collect();
            let [fold, qid, split] = cols.as_slice() else {
                return Err(Error::parse(
                    &name,
                    ln,
                    "expected `fold_id<TAB>query_id<TAB>train|test`",
                ));
            };
            let fold: usize = fold
                .parse()
                .ok()
                .filter(|f| *f < NUM_FOLDS)
                .ok_or_else(|| {
                    Error::parse(&name, ln, format!("fold id `{fold}` not in 0..{NUM_FOLDS}"))
                })?;
            let split = match *split {
                "train" => Split::Train,
                "test" => Split::Test,
                other => return Err(Error::parse(&name, ln, format!("bad split `{other}`"))),
            };
            if !c.query_index.contains_key(*qid) {
                return Err(Error::parse(&name, ln, format!("unknown query `{qid}`")));
            }
            c.fold_rows.push((fold, qid.to_string(), split));
        }
        c.folds = build_folds(&c.fold_rows, &c.queries).map_err(|m| Error::parse(&name, 0, m))?;
    }

    Ok(c)
}

fn build_folds(
    rows: &[(usize, String, Split)],
    queries: &[Query],
) -> std::result::Result<Vec<FoldSpec>, String> {
    if rows.is_empty() {
        return Ok(Vec::new());
    }
    let mut folds: Vec<FoldSpec> = (0..NUM_FOLDS)
        .map(|fold_id| FoldSpec {
            fold_id,
            train_query_ids: BTreeSet::new(),
            test_query_ids: BTreeSet::new(),
        })
        .collect();
    for (f, q, split) in rows {
        let fold = folds
            .get_mut(*f)
            .ok_or_else(|| format!("fold {f} out of range 0..{NUM_FOLDS}"))?;
        let (mine, other) = match split {
            Split::Train => (&mut fold.train_query_ids, &fold.test_query_ids),
            Split::Test => (&mut fold.test_query_ids, &fold.train_query_ids),
        };
        if other.contains(q) {
            return Err(format!("query `{q}` is both train and test in fold {f}"));
        }
        if !mine.insert(q.clone()) {
            return Err(format!("query `{q}` listed twice in fold {f}"));
        }
    }
    let mut covered: BTreeMap<&str, usize> = BTreeMap::new();
    for fold in &folds {
        for q in &fold.test_query_ids {
            if let Some(prev) = covered.insert(q, fold.fold_id) {
                return Err(format!(
                    "query `{q}` is a test query in folds {prev} and {}",
                    fold.fold_id
                ));
            }
        }
    }
    if let Some(q) = queries
        .iter()
        .find(|q| !covered.contains_key(q.query_id.as_str()))
    {
        return Err(format!(
            "query `{}` is not in any fold's test set",
            q.query_id
        ));
    }
    Ok(folds)
}

pub fn parse_qrel_line(line: &str) -> std::result::Result<Qrel, String> {
    let cols: Vec<&str> = line.split_whitespace().collect();
    let [qid, _iter, did, grade] = cols.as_slice() else {
        return Err("expected `query_id 0 doc_id grade`".into());
    };
    let grade: u8 = grade
        .parse()
        .ok()
        .filter(|g| *g <= 2)
        .ok_or_else(|| format!("grade `{grade}` not in {{0,1,2}}"))?;
    Ok(Qrel {
        query_id: qid.to_string(),
        doc_id: did.to_string(),
        grade,
    })
}

pub fn format_qrels(qrels: &[Qrel]) -> String {
    let mut s = String::new();
    for r in qrels {
        let _ = writeln!(s, "{} 0 {} {}", r.query_id, r.doc_id, r.grade);
    }
    s
}

pub fn load_qrels(path: &Path) -> Result<QrelMap> {
    let (name, content) = read_file(path)?;
    let mut qrels = Vec::new();
    let mut seen = HashSet::new();
    for (ln, line) in lines(&content) {
        let r = parse_qrel_line(line).map_err(|m| Error::parse(&name, ln, m))?;
        if !seen.insert((r.query_id.clone(), r.doc_id.clone())) {
            return Err(Error::DuplicateId {
                kind: "qrel",
                id: format!("{} {}", r.query_id, r.doc_id),
            });
        }
        qrels.push(r);
    }
    Ok(QrelMap::from_qrels(&qrels))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KnowledgeGraph {
    entities: Vec<String>,
    entity_set: HashSet<String>,
    pub links: Vec<(String, String)>,
    pub anchors: Vec<(String, Vec<String>)>,
}

impl KnowledgeGraph {
    pub fn new(
        entities: Vec<String>,
        links: Vec<(String, String)>,
        anchors: Vec<(String, Vec<String>)>,
    ) -> Result<Self> {
        let mut entity_set = HashSet::new();
        for e in &entities {
            if !entity_set.insert(e.clone()) {
                return Err(Error::DuplicateId {
                    kind: "entity",
                    id: e.clone(),
                });
            }
        }
        let mut seen = HashSet::new();
        for (s, d) in &links {
            for end in [s, d] {
                if !entity_set.contains(end) {
                    return Err(Error::DanglingLink(end.clone()));
                }
            }
            if !seen.insert((s, d)) {
                return Err(Error::DuplicateId {
                    kind: "link",
                    id: format!("{s}->{d}"),
                });
            }
        }
        for (e, _) in &anchors {
            if !entity_set.contains(e) {
                return Err(Error::DanglingLink(e.clone()));
            }
        }
        Ok(KnowledgeGraph {
            entities,
            entity_set,
            links,
            anchors,
        })
    }

    pub fn entities(&self) -> &[String] {
        &self.entities
    }

    pub fn contains(&self, entity: &str) -> bool {
        self.entity_set.contains(entity)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("#entities\n");
        for e in &self.entities {
            let _ = writeln!(s, "{e}");
        }
        s.push_str("#links\n");
        for (a, b) in &self.links {
            let _ = writeln!(s, "{a}\t{b}");
        }
        s.push_str("#anchors\n");
        for (e, words) in &self.anchors {
            let _ = writeln!(s, "{e}\t{}", words.join(" "));
        }
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_text())
    }
}

pub fn load_graph(path: &Path) -> Result<KnowledgeGraph> {
    let (name, content) = read_file(path)?;
    parse_graph(&name, &content)
}

pub fn parse_graph(name: &str, content: &str) -> Result<KnowledgeGraph> {
    #[derive(PartialEq)]
    enum Section {
        None,
        Entities,
        Links,
        Anchors,
    }
    let mut section = Section::None;
    let mut entities = Vec::new();
    let mut links = Vec::new();
    let mut anchors = Vec::new();
    for (ln, line) in lines(content) {
        match line {
            "#entities" => section = Section::Entities,
            "#links" => section = Section::Links,
            "#anchors" => section = Section::Anchors,
            _ => match section {
                Section::None => {
                    return Err(Error::parse(name, ln, "content before a section marker"))
                }
                Section::Entities => {
                    if line.contains('\t') || line.is_empty() {
                        return Err(Error::parse(name, ln, "bad entity id"));
                    }
                    entities.push(line.to_string());
                }
                Section::Links => {
                    let (s, d) = split2(line)
                        .ok_or_else(|| Error::parse(name, ln, "expected `src<TAB>dst`"))?;
                    links.push((s.to_string(), d.to_string()));
                }
                Section::Anchors => {
                    let (e, ctx) = split2(line).ok_or_else(|| {
                        Error::parse(name, ln, "expected `entity<TAB>context words`")
                    })?;
                    let words = ctx
                        .split(' ')
                        .filter(|w| !w.is_empty())
                        .map(str::to_string)
                        .collect();
                    anchors.push((e.to_string(), words));
                }
            },
        }
    }
    KnowledgeGraph::new(entities, links, anchors)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    /// (a) annotations whose entity is not in the graph: `(owner, entity)`.
    pub unknown_entities: Vec<(String, String)>,
    /// (b) qrels naming an unknown query or document: `(query, doc)`.
    pub unknown_qrel_ids: Vec<(String, String)>,
    /// (c) queries without any annotation.
    pub unannotated_queries: Vec<String>,
    /// Annotation pairs of one owner whose spans intersect: `(owner, i, j)`
    /// with `i < j` indexing that owner's annotations in file order.
    pub overlapping: Vec<(String, usize, usize)>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.unknown_entities.is_empty()
            && self.unknown_qrel_ids.is_empty()
            && self.unannotated_queries.is_empty()
            && self.overlapping.is_empty()
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::from("kind\tsubject\tdetail\n");
        for (o, e) in &self.unknown_entities {
            let _ = writeln!(s, "unknown_entity\t{o}\t{e}");
        }
        for (q, d) in &self.unknown_qrel_ids {
            let _ = writeln!(s, "unknown_qrel_id\t{q}\t{d}");
        }
        for q in &self.unannotated_queries {
            let _ = writeln!(s, "no_linked_entity\t{q}\t");
        }
        for (o, i, j) in &self.overlapping {
            let _ = writeln!(s, "overlap\t{o}\t{i},{j}");
        }
        s
    }
}

pub fn validate(collection: &Collection, graph: &KnowledgeGraph) -> ValidationReport {
    let mut r = ValidationReport::default();
    for a in collection.annotations() {
        if !graph.contains(&a.entity_id) {
            r.unknown_entities
                .push((a.owner_id.clone(), a.entity_id.clone()));
        }
    }
    for q in collection.qrels() {
        if collection.query(&q.query_id).is_none() || collection.doc(&q.doc_id).is_none() {
            r.unknown_qrel_ids
                .push((q.query_id.clone(), q.doc_id.clone()));
        }
    }
    for q in collection.queries() {
        if collection.annotations_for(&q.query_id).is_empty() {
            r.unannotated_queries.push(q.query_id.clone());
        }
    }
    let owners: BTreeSet<&String> = collection.by_owner.keys().collect();
    for owner in owners {
        let anns = collection.annotations_for(owner);
        for i in 0..anns.len() {
            for j in i + 1..anns.len() {
                if anns[i].overlaps(anns[j]) {
                    r.overlapping.push((owner.clone(), i, j));
                }
            }
        }
    }
    r
}

pub(crate) fn read_file(path: &Path) -> Result<(String, String)> {
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok((path.display().to_string(), content))
}

pub(crate) fn write_file(path: &Path, content: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, content).map_err(|e| Error::io(path, e))
}

/// Non-empty lines with 1-based line numbers.
pub(crate) fn lines(content: &str) -> impl Iterator<Item = (usize, &str)> {
    content
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.is_empty())
}

fn split2(line: &str) -> Option<(&str, &str)> {
    let (a, b) = line.split_once('\t')?;
    if b.contains('\t') {
        return None;
    }
    Some((a, b))
}
