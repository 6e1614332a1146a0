//! C ABI over the embert toolkit.
//!
//! Every fallible call returns an [`EmbertStatus`]; on failure the message
//! is available from [`embert_last_error`] on the same thread. Objects are
//! opaque handles released with their `_free` function. Strings passed in
//! must be NUL-terminated UTF-8.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use embert::encoder::{EncoderWeights, NoEntities};
use embert::retrieval::{self, InvertedIndex};
use embert::tokenizer::{self, InputLimits, MentionCategory, Vocabulary};
use embert::{eval, text, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbertStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Parse = 4,
    InvalidArgument = 5,
    NotFound = 6,
    Numeric = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbertCategory {
    NoEntity = 0,
    OneToken = 1,
    MultiNoCont = 2,
    OneCont = 3,
    MultiCont = 4,
}

impl From<MentionCategory> for EmbertCategory {
    fn from(c: MentionCategory) -> Self {
        match c {
            MentionCategory::NoEntity => EmbertCategory::NoEntity,
            MentionCategory::OneToken => EmbertCategory::OneToken,
            MentionCategory::MultiNoCont => EmbertCategory::MultiNoCont,
            MentionCategory::OneCont => EmbertCategory::OneCont,
            MentionCategory::MultiCont => EmbertCategory::MultiCont,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EmbertTTest {
    pub t: f64,
    pub df: f64,
    pub p: f64,
}

/// Word-piece vocabulary.
pub struct EmbertVocab(Vocabulary);

/// BM25 index.
pub struct EmbertIndex(InvertedIndex);

/// Ranked `(doc_id, score)` list.
pub struct EmbertHits(Vec<(CString, f64)>);

/// List of strings.
pub struct EmbertStrings(Vec<CString>);

/// Encoder weights used without entity tokens.
pub struct EmbertModel(EncoderWeights);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior NUL");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> EmbertStatus {
    match e {
        Error::Io { .. } => EmbertStatus::Io,
        Error::Parse { .. } => EmbertStatus::Parse,
        Error::UnknownKey(_)
        | Error::UnknownDoc(_)
        | Error::MissingEmbedding(_)
        | Error::MissingDocText(_) => EmbertStatus::NotFound,
        Error::NonFiniteLoss { .. } | Error::SingularDesign { .. } => EmbertStatus::Numeric,
        _ => EmbertStatus::InvalidArgument,
    }
}

struct Fail(EmbertStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

/// Run `f`, recording any failure or panic as the thread's last error.
fn guard<F>(f: F) -> EmbertStatus
where
    F: FnOnce() -> Result<(), Fail>,
{
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EmbertStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            EmbertStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail(
            EmbertStatus::NullArgument,
            format!("`{name}` is null"),
        ));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(EmbertStatus::InvalidUtf8, format!("`{name}` is not UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Fail> {
    p.as_ref()
        .ok_or_else(|| Fail(EmbertStatus::NullArgument, format!("`{name}` is null")))
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Fail> {
    p.as_mut()
        .ok_or_else(|| Fail(EmbertStatus::NullArgument, format!("`{name}` is null")))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail(
            EmbertStatus::NullArgument,
            format!("`{name}` is null"),
        ));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn cstring(s: &str) -> CString {
    CString::new(s).unwrap_or_else(|_| CString::new(s.replace('\0', " ")).expect("NUL removed"))
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn embert_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn embert_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `path` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn embert_vocab_load(
    path: *const c_char,
    out: *mut *mut EmbertVocab,
) -> EmbertStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let out = out_arg(out, "out")?;
        let v = Vocabulary::load(Path::new(path))?;
        *out = Box::into_raw(Box::new(EmbertVocab(v)));
        Ok(())
    })
}

/// # Safety
/// `vocab` must come from [`embert_vocab_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn embert_vocab_free(vocab: *mut EmbertVocab) {
    if !vocab.is_null() {
        drop(Box::from_raw(vocab));
    }
}

/// Word pieces of `text`, continuation pieces prefixed with `##`.
///
/// # Safety
/// Pointers must be valid; `out` receives a handle freed with
/// [`embert_strings_free`].
#[no_mangle]
pub unsafe extern "C" fn embert_vocab_tokenize(
    vocab: *const EmbertVocab,
    text: *const c_char,
    out: *mut *mut EmbertStrings,
) -> EmbertStatus {
    guard(|| {
        let vocab = ref_arg(vocab, "vocab")?;
        let text = str_arg(text, "text")?;
        let out = out_arg(out, "out")?;
        let toks = tokenizer::wordpiece_tokenize(text, &vocab.0);
        *out = Box::into_raw(Box::new(EmbertStrings(
            toks.iter().map(|t| cstring(&t.surface)).collect(),
        )));
        Ok(())
    })
}

/// Tokenization category of one entity mention.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn embert_vocab_categorize(
    vocab: *const EmbertVocab,
    mention: *const c_char,
    out: *mut EmbertCategory,
) -> EmbertStatus {
    guard(|| {
        let vocab = ref_arg(vocab, "vocab")?;
        let mention = str_arg(mention, "mention")?;
        let out = out_arg(out, "out")?;
        *out = tokenizer::categorize_mention(mention, &vocab.0).into();
        Ok(())
    })
}

/// # Safety
/// `strings` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn embert_strings_len(strings: *const EmbertStrings) -> usize {
    strings.as_ref().map_or(0, |s| s.0.len())
}

/// Entry `i`, or null when out of range. Owned by the handle.
///
/// # Safety
/// `strings` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn embert_strings_get(
    strings: *const EmbertStrings,
    i: usize,
) -> *const c_char {
    strings
        .as_ref()
        .and_then(|s| s.0.get(i))
        .map_or(ptr::null(), |c| c.as_ptr())
}

/// # Safety
/// `strings` must be a handle from this library, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn embert_strings_free(strings: *mut EmbertStrings) {
    if !strings.is_null() {
        drop(Box::from_raw(strings));
    }
}

/// Build an index over `n` documents.
///
/// # Safety
/// `doc_ids` and `texts` must each point to `n` valid C strings.
#[no_mangle]
pub unsafe extern "C" fn embert_index_build(
    doc_ids: *const *const c_char,
    texts: *const *const c_char,
    n: usize,
    out: *mut *mut EmbertIndex,
) -> EmbertStatus {
    guard(|| {
        let ids = slice_arg(doc_ids, n, "doc_ids")?;
        let texts = slice_arg(texts, n, "texts")?;
        let out = out_arg(out, "out")?;
        let mut rows = Vec::with_capacity(n);
        for (i, (&id, &t)) in ids.iter().zip(texts).enumerate() {
            rows.push((
                str_arg(id, &format!("doc_ids[{i}]"))?.to_string(),
                text::normalize(str_arg(t, &format!("texts[{i}]"))?),
            ));
        }
        let index = InvertedIndex::build(rows.iter().map(|(a, b)| (a.as_str(), b.as_str())))?;
        *out = Box::into_raw(Box::new(EmbertIndex(index)));
        Ok(())
    })
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn embert_index_load(
    path: *const c_char,
    out: *mut *mut EmbertIndex,
) -> EmbertStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let out = out_arg(out, "out")?;
        *out = Box::into_raw(Box::new(EmbertIndex(InvertedIndex::load(Path::new(path))?)));
        Ok(())
    })
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn embert_index_save(
    index: *const EmbertIndex,
    path: *const c_char,
) -> EmbertStatus {
    guard(|| {
        let index = ref_arg(index, "index")?;
        let path = str_arg(path, "path")?;
        index.0.save(Path::new(path))?;
        Ok(())
    })
}

/// # Safety
/// `index` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn embert_index_num_docs(index: *const EmbertIndex) -> usize {
    index.as_ref().map_or(0, |i| i.0.num_docs())
}

/// # Safety
/// `index` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn embert_index_free(index: *mut EmbertIndex) {
    if !index.is_null() {
        drop(Box::from_raw(index));
    }
}

/// Top `k` documents for `query` under BM25 (k1 = 0.9, b = 0.4).
///
/// # Safety
/// Pointers must be valid; `out` receives a handle freed with
/// [`embert_hits_free`].
#[no_mangle]
pub unsafe extern "C" fn embert_index_search(
    index: *const EmbertIndex,
    query: *const c_char,
    k: usize,
    out: *mut *mut EmbertHits,
) -> EmbertStatus {
    guard(|| {
        let index = ref_arg(index, "index")?;
        let query = str_arg(query, "query")?;
        let out = out_arg(out, "out")?;
        let hits = retrieval::search(
            &index.0,
            &text::terms(&text::normalize(query)),
            k,
            retrieval::DEFAULT_K,
            retrieval::DEFAULT_B,
        );
        *out = Box::into_raw(Box::new(EmbertHits(
            hits.into_iter().map(|(d, s)| (cstring(&d), s)).collect(),
        )));
        Ok(())
    })
}

/// # Safety
/// `hits` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn embert_hits_len(hits: *const EmbertHits) -> usize {
    hits.as_ref().map_or(0, |h| h.0.len())
}

/// Document id at rank `i` (0-based), or null when out of range.
///
/// # Safety
/// `hits` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn embert_hits_doc_id(hits: *const EmbertHits, i: usize) -> *const c_char {
    hits.as_ref()
        .and_then(|h| h.0.get(i))
        .map_or(ptr::null(), |(d, _)| d.as_ptr())
}

/// Score at rank `i`, NaN when out of range.
///
/// # Safety
/// `hits` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn embert_hits_score(hits: *const EmbertHits, i: usize) -> f64 {
    hits.as_ref()
        .and_then(|h| h.0.get(i))
        .map_or(f64::NAN, |(_, s)| *s)
}

/// # Safety
/// `hits` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn embert_hits_free(hits: *mut EmbertHits) {
    if !hits.is_null() {
        drop(Box::from_raw(hits));
    }
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn embert_model_load(
    path: *const c_char,
    out: *mut *mut EmbertModel,
) -> EmbertStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let out = out_arg(out, "out")?;
        *out = Box::into_raw(Box::new(EmbertModel(EncoderWeights::load(Path::new(
            path,
        ))?)));
        Ok(())
    })
}

/// # Safety
/// `model` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn embert_model_free(model: *mut EmbertModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Relevance probability of `doc` for `query`, without entity tokens.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn embert_model_score(
    model: *const EmbertModel,
    vocab: *const EmbertVocab,
    query: *const c_char,
    doc: *const c_char,
    out: *mut f64,
) -> EmbertStatus {
    guard(|| {
        let model = ref_arg(model, "model")?;
        let vocab = ref_arg(vocab, "vocab")?;
        let query = str_arg(query, "query")?;
        let doc = str_arg(doc, "doc")?;
        let out = out_arg(out, "out")?;
        if model.0.config.vocab_size != vocab.0.num_pieces() {
            return Err(Fail(
                EmbertStatus::InvalidArgument,
                format!(
                    "model has {} token rows, vocabulary has {} pieces",
                    model.0.config.vocab_size,
                    vocab.0.num_pieces()
                ),
            ));
        }
        let limits = InputLimits {
            max_total: InputLimits::default()
                .max_total
                .min(model.0.config.max_positions),
            ..InputLimits::default()
        };
        let input = tokenizer::build_input(
            &tokenizer::wordpiece_tokenize(query, &vocab.0),
            &tokenizer::wordpiece_tokenize(doc, &vocab.0),
            &vocab.0,
            limits,
        );
        *out = model.0.forward(&input, &NoEntities)?.probability;
        Ok(())
    })
}

/// NDCG@k of a ranking against graded judgments. Unjudged documents count
/// as grade 0.
///
/// # Safety
/// `ranking` must hold `n` C strings; `judged` and `grades` `m` entries.
#[no_mangle]
pub unsafe extern "C" fn embert_ndcg(
    ranking: *const *const c_char,
    n: usize,
    judged: *const *const c_char,
    grades: *const u8,
    m: usize,
    k: usize,
    out: *mut f64,
) -> EmbertStatus {
    guard(|| {
        let ranking = slice_arg(ranking, n, "ranking")?
            .iter()
            .enumerate()
            .map(|(i, &p)| str_arg(p, &format!("ranking[{i}]")))
            .collect::<Result<Vec<_>, _>>()?;
        let ids = slice_arg(judged, m, "judged")?;
        let grades = slice_arg(grades, m, "grades")?;
        let out = out_arg(out, "out")?;
        let mut map = std::collections::BTreeMap::new();
        for (i, (&id, &g)) in ids.iter().zip(grades).enumerate() {
            map.insert(str_arg(id, &format!("judged[{i}]"))?.to_string(), g);
        }
        *out = eval::ndcg_at_k(&ranking, Some(&map), k);
        Ok(())
    })
}

/// Two-tailed paired t-test over `n` paired observations.
///
/// # Safety
/// `a` and `b` must hold `n` values each.
#[no_mangle]
pub unsafe extern "C" fn embert_paired_ttest(
    a: *const f64,
    b: *const f64,
    n: usize,
    out: *mut EmbertTTest,
) -> EmbertStatus {
    guard(|| {
        let a = slice_arg(a, n, "a")?;
        let b = slice_arg(b, n, "b")?;
        let out = out_arg(out, "out")?;
        let t = eval::paired_ttest(a, b)?;
        *out = EmbertTTest {
            t: t.t,
            df: t.df as f64,
            p: t.p,
        };
        Ok(())
    })
}
