//! Word-piece tokenization with entity tokens.
//!
//! Text is split into words (whitespace, and every punctuation mark on its
//! own), then each word is cut greedily into the longest vocabulary pieces;
//! pieces after the first carry the `##` continuation prefix. An annotated
//! mention is followed by the `/` separator and a single `ENTITY/<id>` token.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use crate::corpus::{self, Annotation};
use crate::error::{Error, Result};
use crate::text;

pub const PAD: &str = "[PAD]";
pub const UNK: &str = "[UNK]";
pub const CLS: &str = "[CLS]";
pub const SEP: &str = "[SEP]";
pub const SLASH: &str = "/";
pub const SPECIALS: [&str; 5] = [PAD, UNK, CLS, SEP, SLASH];

pub const CONTINUATION: &str = "##";
pub const ENTITY_PREFIX: &str = "ENTITY/";
const ENTITY_MARKER: &str = "#entities";

/// Vocabulary covering the word-piece examples discussed for mention
/// categories (`france`, `yoko ono`, `wes ##er`, `fr ##isi ##an`, ...).
pub const FIXTURE_VOCAB: &str = include_str!("../fixtures/bert_fixture.vocab");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    WordPiece,
    Entity,
    Special,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub id: usize,
    pub surface: String,
}

impl Token {
    pub fn is_continuation(&self) -> bool {
        self.kind == TokenKind::WordPiece && self.surface.starts_with(CONTINUATION)
    }

    /// Entity id for entity tokens (`ENTITY/<id>` -> `<id>`).
    pub fn entity_id(&self) -> Option<&str> {
        match self.kind {
            TokenKind::Entity => self.surface.strip_prefix(ENTITY_PREFIX),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    pieces: Vec<String>,
    piece_ids: HashMap<String, usize>,
    entities: Vec<String>,
    entity_ids: HashMap<String, usize>,
    max_piece_chars: usize,
    special_ids: [usize; 5],
}

impl Vocabulary {
    /// `pieces` must contain every special token; `entities` are bare entity
    /// ids (without the `ENTITY/` prefix).
    pub fn new(pieces: Vec<String>, entities: Vec<String>) -> Result<Self> {
        let mut piece_ids = HashMap::with_capacity(pieces.len());
        for (i, p) in pieces.iter().enumerate() {
            if p.is_empty() || p == CONTINUATION {
                return Err(Error::Invalid(format!("invalid piece `{p}` at id {i}")));
            }
            if piece_ids.insert(p.clone(), i).is_some() {
                return Err(Error::DuplicateId {
                    kind: "piece",
                    id: p.clone(),
                });
            }
        }
        let mut special_ids = [0; 5];
        for (slot, s) in special_ids.iter_mut().zip(SPECIALS) {
            *slot = *piece_ids
                .get(s)
                .ok_or_else(|| Error::Invalid(format!("vocabulary lacks special token {s}")))?;
        }
        let mut entity_ids = HashMap::with_capacity(entities.len());
        for (i, e) in entities.iter().enumerate() {
            if entity_ids.insert(e.clone(), pieces.len() + i).is_some() {
                return Err(Error::DuplicateId {
                    kind: "entity token",
                    id: e.clone(),
                });
            }
            if piece_ids.contains_key(&entity_surface(e)) {
                return Err(Error::Invalid(format!(
                    "entity token {e} collides with a piece"
                )));
            }
        }
        let max_piece_chars = pieces
            .iter()
            .map(|p| p.strip_prefix(CONTINUATION).unwrap_or(p).chars().count())
            .max()
            .unwrap_or(1);
        Ok(Vocabulary {
            pieces,
            piece_ids,
            entities,
            entity_ids,
            max_piece_chars,
            special_ids,
        })
    }

    pub fn fixture() -> Self {
        Self::parse("fixture", FIXTURE_VOCAB).expect("shipped fixture vocabulary parses")
    }

    /// Replace the entity-token list.
    pub fn with_entities<I, S>(&self, entities: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Vocabulary::new(
            self.pieces.clone(),
            entities.into_iter().map(Into::into).collect(),
        )
    }

    pub fn num_pieces(&self) -> usize {
        self.pieces.len()
    }

    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn len(&self) -> usize {
        self.pieces.len() + self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn pieces(&self) -> &[String] {
        &self.pieces
    }

    pub fn entities(&self) -> &[String] {
        &self.entities
    }

    pub fn piece_id(&self, piece: &str) -> Option<usize> {
        self.piece_ids.get(piece).copied()
    }

    pub fn entity_token_id(&self, entity: &str) -> Option<usize> {
        self.entity_ids.get(entity).copied()
    }

    pub fn pad_id(&self) -> usize {
        self.special_ids[0]
    }
    pub fn unk_id(&self) -> usize {
        self.special_ids[1]
    }
    pub fn cls_id(&self) -> usize {
        self.special_ids[2]
    }
    pub fn sep_id(&self) -> usize {
        self.special_ids[3]
    }
    pub fn slash_id(&self) -> usize {
        self.special_ids[4]
    }

    pub fn is_special(&self, id: usize) -> bool {
        self.special_ids.contains(&id)
    }

    pub fn is_entity(&self, id: usize) -> bool {
        id >= self.pieces.len() && id < self.len()
    }

    /// Entity id behind an entity token id.
    pub fn entity_of(&self, id: usize) -> Option<&str> {
        id.checked_sub(self.pieces.len())
            .and_then(|i| self.entities.get(i))
            .map(String::as_str)
    }

    pub fn surface(&self, id: usize) -> String {
        if let Some(p) = self.pieces.get(id) {
            p.clone()
        } else if let Some(e) = self.entity_of(id) {
            entity_surface(e)
        } else {
            UNK.to_string()
        }
    }

    pub fn token(&self, id: usize) -> Token {
        let kind = if self.is_entity(id) {
            TokenKind::Entity
        } else if self.is_special(id) {
            TokenKind::Special
        } else {
            TokenKind::WordPiece
        };
        Token {
            kind,
            id,
            surface: self.surface(id),
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for p in &self.pieces {
            let _ = writeln!(s, "{p}");
        }
        s.push_str(ENTITY_MARKER);
        s.push('\n');
        for e in &self.entities {
            let _ = writeln!(s, "{}", entity_surface(e));
        }
        s
    }

    pub fn parse(name: &str, content: &str) -> Result<Self> {
        let mut pieces = Vec::new();
        let mut entities = Vec::new();
        let mut in_entities = false;
        for (ln, line) in content.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            if line == ENTITY_MARKER {
                in_entities = true;
            } else if in_entities {
                let e = line.strip_prefix(ENTITY_PREFIX).ok_or_else(|| {
                    Error::parse(name, ln + 1, "entity token lacks the ENTITY/ prefix")
                })?;
                entities.push(e.to_string());
            } else {
                pieces.push(line.to_string());
            }
        }
        Vocabulary::new(pieces, entities)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (name, content) = corpus::read_file(path)?;
        Self::parse(&name, &content)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        corpus::write_file(path, &self.to_text())
    }
}

pub fn entity_surface(entity_id: &str) -> String {
    format!("{ENTITY_PREFIX}{entity_id}")
}

/// Learn a vocabulary from raw texts: every character (in its word-initial
/// and word-internal form) seeds the vocabulary, then the most frequent
/// adjacent pair is merged until `target_size` pieces exist or nothing is
/// left to merge. Frequency ties go to the lexicographically smallest pair.
pub fn build_vocab<'a, I>(corpus: I, target_size: usize) -> Result<Vocabulary>
where
    I: IntoIterator<Item = &'a str>,
{
    let mut word_counts: BTreeMap<String, u64> = BTreeMap::new();
    for t in corpus {
        let norm = text::normalize(t);
        for (_, w) in text::split_words(&norm) {
            *word_counts.entry(w.to_string()).or_default() += 1;
        }
    }

    let mut words: Vec<(Vec<String>, u64)> = word_counts
        .into_iter()
        .map(|(w, c)| {
            let syms = w
                .chars()
                .enumerate()
                .map(|(i, ch)| {
                    if i == 0 {
                        ch.to_string()
                    } else {
                        format!("{CONTINUATION}{ch}")
                    }
                })
                .collect();
            (syms, c)
        })
        .collect();

    let alphabet: BTreeSet<String> = words.iter().flat_map(|(s, _)| s.iter().cloned()).collect();
    let mut pieces: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
    let mut known: BTreeSet<String> = pieces.iter().cloned().collect();
    for a in alphabet {
        if known.insert(a.clone()) {
            pieces.push(a);
        }
    }
    if target_size < pieces.len() {
        return Err(Error::TargetTooSmall {
            target: target_size,
            required: pieces.len(),
        });
    }

    while pieces.len() < target_size {
        let mut pair_counts: BTreeMap<(&str, &str), u64> = BTreeMap::new();
        for (syms, c) in &words {
            for w in syms.windows(2) {
                *pair_counts.entry((&w[0], &w[1])).or_default() += c;
            }
        }
        // max count; BTreeMap order makes the first maximum the smallest pair
        let Some(((l, r), _)) =
            pair_counts
                .iter()
                .fold(None::<(&(&str, &str), u64)>, |best, (k, &v)| match best {
                    Some((_, bv)) if bv >= v => best,
                    _ => Some((k, v)),
                })
        else {
            break;
        };
        let (l, r) = (l.to_string(), r.to_string());
        let merged = format!("{l}{}", r.strip_prefix(CONTINUATION).unwrap_or(&r));
        for (syms, _) in words.iter_mut() {
            let mut i = 0;
            while i + 1 < syms.len() {
                if syms[i] == l && syms[i + 1] == r {
                    syms[i] = merged.clone();
                    syms.remove(i + 1);
                }
                i += 1;
            }
        }
        if known.insert(merged.clone()) {
            pieces.push(merged);
        }
    }
    Vocabulary::new(pieces, Vec::new())
}

/// Greedy longest-match-first word-piece tokenization of one normalized word.
fn tokenize_word(word: &str, vocab: &Vocabulary, out: &mut Vec<Token>) {
    let chars: Vec<(usize, char)> = word.char_indices().collect();
    let byte_at = |ci: usize| chars.get(ci).map(|c| c.0).unwrap_or(word.len());
    let mut start = 0;
    let mut candidate = String::new();
    while start < chars.len() {
        let max_end = (start + vocab.max_piece_chars).min(chars.len());
        let mut found = None;
        for end in (start + 1..=max_end).rev() {
            candidate.clear();
            if start > 0 {
                candidate.push_str(CONTINUATION);
            }
            candidate.push_str(&word[byte_at(start)..byte_at(end)]);
            if let Some(id) = vocab.piece_id(&candidate) {
                found = Some((id, end));
                break;
            }
        }
        match found {
            Some((id, end)) => {
                out.push(Token {
                    kind: if vocab.is_special(id) {
                        TokenKind::Special
                    } else {
                        TokenKind::WordPiece
                    },
                    id,
                    surface: candidate.clone(),
                });
                start = end;
            }
            None => {
                out.push(Token {
                    kind: TokenKind::Special,
                    id: vocab.unk_id(),
                    surface: chars[start].1.to_string(),
                });
                start += 1;
            }
        }
    }
}

/// Tokenize already-normalized text.
fn tokenize_normalized(text: &str, vocab: &Vocabulary, out: &mut Vec<Token>) {
    for (_, w) in text::split_words(text) {
        tokenize_word(w, vocab, out);
    }
}

pub fn wordpiece_tokenize(text: &str, vocab: &Vocabulary) -> Vec<Token> {
    let mut out = Vec::new();
    tokenize_normalized(&text::normalize(text), vocab, &mut out);
    out
}

/// Tokenize `text`, inserting `/ ENTITY/<id>` after every annotated mention
/// whose entity has a token in `vocab`.
pub fn annotate_tokens(
    text: &str,
    annotations: &[&Annotation],
    vocab: &Vocabulary,
) -> Result<Vec<Token>> {
    annotate_tokens_with(text, annotations, vocab, |_| true)
}

/// As [`annotate_tokens`], additionally skipping entities rejected by `keep`
/// (e.g. entities without an aligned embedding).
pub fn annotate_tokens_with<F>(
    text: &str,
    annotations: &[&Annotation],
    vocab: &Vocabulary,
    keep: F,
) -> Result<Vec<Token>>
where
    F: Fn(&str) -> bool,
{
    for (i, a) in annotations.iter().enumerate() {
        for b in &annotations[i + 1..] {
            if a.overlaps(b) && !a.contains(b) && !b.contains(a) {
                return Err(Error::OverlapUnresolved {
                    a_start: a.char_start,
                    a_end: a.char_end,
                    b_start: b.char_start,
                    b_end: b.char_end,
                });
            }
        }
    }

    let norm = text::normalize(text);
    // (char_end, entity token id), stable in file order for equal ends
    let mut inserts: Vec<(usize, usize)> = annotations
        .iter()
        .filter(|a| keep(&a.entity_id))
        .filter_map(|a| {
            vocab
                .entity_token_id(&a.entity_id)
                .map(|id| (a.char_end, id))
        })
        .collect();
    inserts.sort_by_key(|&(end, _)| end);

    let mut out = Vec::new();
    let mut prev_char = 0;
    let mut prev_byte = 0;
    let mut i = 0;
    while i < inserts.len() {
        let end = inserts[i].0;
        let end_byte = text::char_to_byte(&norm, end)
            .ok_or_else(|| Error::Invalid(format!("annotation end {end} beyond text")))?;
        if end > prev_char {
            tokenize_normalized(&norm[prev_byte..end_byte], vocab, &mut out);
            prev_char = end;
            prev_byte = end_byte;
        }
        while i < inserts.len() && inserts[i].0 == end {
            out.push(vocab.token(vocab.slash_id()));
            out.push(vocab.token(inserts[i].1));
            i += 1;
        }
    }
    tokenize_normalized(&norm[prev_byte..], vocab, &mut out);
    Ok(out)
}

/// How the tokenizer fragments an entity mention. Variants are ordered by
/// severity; a query with several mentions takes the most severe one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MentionCategory {
    NoEntity,
    OneToken,
    MultiNoCont,
    OneCont,
    MultiCont,
}

impl MentionCategory {
    pub const ALL: [MentionCategory; 5] = [
        MentionCategory::NoEntity,
        MentionCategory::OneToken,
        MentionCategory::MultiNoCont,
        MentionCategory::OneCont,
        MentionCategory::MultiCont,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MentionCategory::NoEntity => "no-entity",
            MentionCategory::OneToken => "one-token",
            MentionCategory::MultiNoCont => "multi-no-##",
            MentionCategory::OneCont => "one-##",
            MentionCategory::MultiCont => "multi-##",
        }
    }

    pub fn is_split(self) -> bool {
        matches!(self, MentionCategory::OneCont | MentionCategory::MultiCont)
    }
}

pub fn categorize_mention(mention: &str, vocab: &Vocabulary) -> MentionCategory {
    let toks = wordpiece_tokenize(mention, vocab);
    let cont = toks.iter().filter(|t| t.is_continuation()).count();
    match (toks.len(), cont) {
        (0, _) => MentionCategory::NoEntity,
        (1, _) => MentionCategory::OneToken,
        (_, 0) => MentionCategory::MultiNoCont,
        (_, 1) => MentionCategory::OneCont,
        _ => MentionCategory::MultiCont,
    }
}

/// Category of a query from its mentions: the most severe one, or
/// `NoEntity` when it has none.
pub fn categorize_query<'a, I>(mentions: I, vocab: &Vocabulary) -> MentionCategory
where
    I: IntoIterator<Item = &'a str>,
{
    mentions
        .into_iter()
        .map(|m| categorize_mention(m, vocab))
        .max()
        .unwrap_or(MentionCategory::NoEntity)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InputLimits {
    pub max_query: usize,
    pub max_total: usize,
}

impl Default for InputLimits {
    fn default() -> Self {
        InputLimits {
            max_query: 64,
            max_total: 512,
        }
    }
}

/// `[CLS] query [SEP] document [SEP]` with segment ids 0 up to and including
/// the first `[SEP]`, 1 afterwards.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelInput {
    pub token_ids: Vec<usize>,
    pub segment_ids: Vec<u8>,
    pub query_len: usize,
    pub doc_len: usize,
}

impl ModelInput {
    pub fn len(&self) -> usize {
        self.token_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_ids.is_empty()
    }

    /// Positions of document tokens.
    pub fn doc_range(&self) -> std::ops::Range<usize> {
        let start = self.query_len + 2;
        start..start + self.doc_len
    }
}

/// Truncates the query to `max_query`, then drops document tail tokens so
/// that the whole sequence fits `max_total`. Separators count against the
/// budget like any other token.
pub fn build_input(
    query_tokens: &[Token],
    doc_tokens: &[Token],
    vocab: &Vocabulary,
    limits: InputLimits,
) -> ModelInput {
    let budget = limits.max_total.saturating_sub(3);
    let q = query_tokens.len().min(limits.max_query).min(budget);
    let d = doc_tokens.len().min(budget - q);
    let mut token_ids = Vec::with_capacity(q + d + 3);
    token_ids.push(vocab.cls_id());
    token_ids.extend(query_tokens[..q].iter().map(|t| t.id));
    token_ids.push(vocab.sep_id());
    let mut segment_ids = vec![0u8; token_ids.len()];
    token_ids.extend(doc_tokens[..d].iter().map(|t| t.id));
    token_ids.push(vocab.sep_id());
    segment_ids.resize(token_ids.len(), 1);
    ModelInput {
        token_ids,
        segment_ids,
        query_len: q,
        doc_len: d,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn surfaces(toks: &[Token]) -> Vec<&str> {
        toks.iter().map(|t| t.surface.as_str()).collect()
    }

    fn ann(text: &str, mention: &str, entity: &str) -> Annotation {
        let norm = text::normalize(text);
        let byte = norm.find(&text::normalize(mention)).unwrap();
        let start = norm[..byte].chars().count();
        Annotation {
            owner_id: "q".into(),
            mention: mention.into(),
            char_start: start,
            char_end: start + mention.chars().count(),
            entity_id: entity.into(),
        }
    }

    #[test]
    fn natalie_portman_splits() {
        let v = Vocabulary::fixture();
        let t = wordpiece_tokenize("Natalie Portman", &v);
        assert_eq!(surfaces(&t), vec!["natalie", "port", "##man"]);
        assert!(wordpiece_tokenize("", &v).is_empty());
    }

    #[test]
    fn unknown_char_maps_to_unk() {
        let v = Vocabulary::fixture();
        let t = wordpiece_tokenize("a☃b", &v);
        assert!(t.iter().any(|t| t.id == v.unk_id() && t.surface == "☃"));
    }

    #[test]
    fn annotated_query_inserts_entity_token() {
        let v = Vocabulary::fixture()
            .with_entities(["Natalie_Portman", "Africa"])
            .unwrap();
        let q = "Who produced films starring Natalie Portman";
        let a = ann(q, "natalie portman", "Natalie_Portman");
        let t = annotate_tokens(q, &[&a], &v).unwrap();
        assert_eq!(
            surfaces(&t),
            vec![
                "who",
                "produced",
                "films",
                "starring",
                "natalie",
                "port",
                "##man",
                "/",
                "ENTITY/Natalie_Portman"
            ]
        );
        assert_eq!(t.last().unwrap().kind, TokenKind::Entity);
        assert_eq!(t.last().unwrap().entity_id(), Some("Natalie_Portman"));

        let q = "give me the capitals of all countries in africa";
        let a = ann(q, "africa", "Africa");
        let t = annotate_tokens(q, &[&a], &v).unwrap();
        let s = surfaces(&t);
        assert_eq!(&s[s.len() - 3..], &["africa", "/", "ENTITY/Africa"]);
    }

    #[test]
    fn no_annotations_equals_plain_tokenization() {
        let v = Vocabulary::fixture();
        let q = "give me the capitals of all countries in africa";
        assert_eq!(
            annotate_tokens(q, &[], &v).unwrap(),
            wordpiece_tokenize(q, &v)
        );
    }

    #[test]
    fn entities_without_token_or_rejected_are_skipped() {
        let v = Vocabulary::fixture().with_entities(["Africa"]).unwrap();
        let q = "natalie portman in africa";
        let a1 = ann(q, "natalie portman", "Natalie_Portman");
        let a2 = ann(q, "africa", "Africa");
        let t = annotate_tokens(q, &[&a1, &a2], &v).unwrap();
        assert_eq!(t.iter().filter(|t| t.kind == TokenKind::Entity).count(), 1);
        let t = annotate_tokens_with(q, &[&a1, &a2], &v, |e| e != "Africa").unwrap();
        assert_eq!(t.iter().filter(|t| t.kind == TokenKind::Entity).count(), 0);
    }

    #[test]
    fn crossing_overlap_is_rejected_nested_is_not() {
        let v = Vocabulary::fixture().with_entities(["A", "B"]).unwrap();
        let q = "natalie portman films";
        let a = ann(q, "natalie portman", "A");
        let b = ann(q, "portman films", "B");
        assert!(matches!(
            annotate_tokens(q, &[&a, &b], &v),
            Err(Error::OverlapUnresolved { .. })
        ));
        let inner = ann(q, "portman", "B");
        let t = annotate_tokens(q, &[&a, &inner], &v).unwrap();
        assert_eq!(
            surfaces(&t),
            vec!["natalie", "port", "##man", "/", "ENTITY/A", "/", "ENTITY/B", "films"]
        );
    }

    #[test]
    fn mention_categories() {
        let v = Vocabulary::fixture();
        assert_eq!(categorize_mention("France", &v), MentionCategory::OneToken);
        assert_eq!(
            categorize_mention("Yoko Ono", &v),
            MentionCategory::MultiNoCont
        );
        assert_eq!(categorize_mention("Weser", &v), MentionCategory::OneCont);
        assert_eq!(
            categorize_mention("Frisian", &v),
            MentionCategory::MultiCont
        );
        assert_eq!(
            surfaces(&wordpiece_tokenize("Frisian", &v)),
            vec!["fr", "##isi", "##an"]
        );
        assert_eq!(
            categorize_query(["France", "Frisian", "Weser"], &v),
            MentionCategory::MultiCont
        );
        assert_eq!(categorize_query([], &v), MentionCategory::NoEntity);
    }

    #[test]
    fn build_vocab_merges_dominant_pair() {
        let v = build_vocab(["aa aa"], 8).unwrap();
        assert!(v.piece_id("aa").is_some());
        assert!(matches!(
            build_vocab(["abc def"], 6),
            Err(Error::TargetTooSmall { .. })
        ));
        let corpus = ["the quick brown fox", "jumps over the lazy dog", "the end"];
        assert_eq!(
            build_vocab(corpus, 60).unwrap(),
            build_vocab(corpus, 60).unwrap()
        );
    }

    #[test]
    fn build_vocab_marks_internal_merges() {
        let v = build_vocab(["xaa xaa xaa"], 8).unwrap();
        assert!(v.piece_id("##aa").is_some());
        assert_eq!(surfaces(&wordpiece_tokenize("xaa", &v)).len(), 2);
    }

    #[test]
    fn vocab_file_round_trip() {
        let v = Vocabulary::fixture()
            .with_entities(["Africa", "Cap-Vert"])
            .unwrap();
        let back = Vocabulary::parse("v", &v.to_text()).unwrap();
        assert_eq!(back, v);
        assert_eq!(back.entity_token_id("Cap-Vert"), Some(v.num_pieces() + 1));
    }

    fn toks(v: &Vocabulary, n: usize) -> Vec<Token> {
        (0..n)
            .map(|_| v.token(v.piece_id("the").unwrap()))
            .collect()
    }

    #[test]
    fn input_layout_and_truncation() {
        let v = Vocabulary::fixture();
        let inp = build_input(&toks(&v, 3), &toks(&v, 4), &v, InputLimits::default());
        assert_eq!(inp.len(), 10);
        assert_eq!(inp.token_ids[0], v.cls_id());
        assert_eq!(inp.token_ids[4], v.sep_id());
        assert_eq!(inp.token_ids[9], v.sep_id());
        assert_eq!(inp.segment_ids, vec![0, 0, 0, 0, 0, 1, 1, 1, 1, 1]);

        let inp = build_input(&toks(&v, 100), &toks(&v, 4), &v, InputLimits::default());
        assert_eq!(inp.query_len, 64);

        let inp = build_input(&toks(&v, 10), &toks(&v, 587), &v, InputLimits::default());
        assert_eq!(inp.len(), 512);
        assert_eq!(inp.doc_len, 499);
        assert_eq!(inp.doc_range(), 12..511);

        let inp = build_input(&toks(&v, 2), &[], &v, InputLimits::default());
        assert_eq!(inp.len(), 5);
    }

    proptest! {
        #[test]
        fn tokenization_is_total_and_reversible(s in "[a-z .,!'-]{0,40}") {
            let v = Vocabulary::fixture();
            let t = wordpiece_tokenize(&s, &v);
            let joined: String = t.iter().map(|t| t.surface.strip_prefix(CONTINUATION).unwrap_or(&t.surface)).collect();
            let expected: String = text::normalize(&s).chars().filter(|c| !c.is_whitespace()).collect();
            prop_assert_eq!(joined, expected);
            prop_assert!(t.iter().all(|t| t.id != v.unk_id()));
        }

        #[test]
        fn learned_vocab_is_total(words in proptest::collection::vec("[a-f]{1,6}", 1..20), extra in 0usize..30) {
            let corpus = words.join(" ");
            let base = build_vocab([corpus.as_str()], 0).err();
            let required = match base { Some(Error::TargetTooSmall { required, .. }) => required, _ => unreachable!() };
            let v = build_vocab([corpus.as_str()], required + extra).unwrap();
            for w in &words {
                let t = wordpiece_tokenize(w, &v);
                prop_assert!(t.iter().all(|t| t.id != v.unk_id()));
            }
        }

        #[test]
        fn annotate_inserts_one_entity_per_annotation(n in 0usize..4) {
            let v = Vocabulary::fixture().with_entities(["E0", "E1", "E2", "E3"]).unwrap();
            let text = "france weser yoko frisian";
            let words = ["france", "weser", "yoko", "frisian"];
            let anns: Vec<Annotation> = (0..n).map(|i| ann(text, words[i], &format!("E{i}"))).collect();
            let refs: Vec<&Annotation> = anns.iter().collect();
            let t = annotate_tokens(text, &refs, &v).unwrap();
            prop_assert_eq!(t.iter().filter(|t| t.kind == TokenKind::Entity).count(), n);
        }
    }
}
