use std::ffi::{c_char, CStr, CString};
use std::ptr;

use embert::encoder::{EncoderConfig, EncoderWeights};
use embert::tokenizer::Vocabulary;
use embert_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = embert_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn fixture_vocab(dir: &std::path::Path) -> *mut EmbertVocab {
    let path = dir.join("vocab.txt");
    Vocabulary::fixture().save(&path).unwrap();
    let mut v = ptr::null_mut();
    let p = c(path.to_str().unwrap());
    assert_eq!(
        unsafe { embert_vocab_load(p.as_ptr(), &mut v) },
        EmbertStatus::Ok
    );
    v
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(embert_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn categories_of_fixture_mentions() {
    let dir = tempfile::tempdir().unwrap();
    let v = fixture_vocab(dir.path());
    let cases = [
        ("France", EmbertCategory::OneToken),
        ("Yoko Ono", EmbertCategory::MultiNoCont),
        ("Weser", EmbertCategory::OneCont),
        ("Frisian", EmbertCategory::MultiCont),
    ];
    for (m, want) in cases {
        let mut got = EmbertCategory::NoEntity;
        let m = c(m);
        assert_eq!(
            unsafe { embert_vocab_categorize(v, m.as_ptr(), &mut got) },
            EmbertStatus::Ok
        );
        assert_eq!(got, want);
    }
    unsafe { embert_vocab_free(v) };
}

#[test]
fn tokenize_returns_pieces() {
    let dir = tempfile::tempdir().unwrap();
    let v = fixture_vocab(dir.path());
    let mut s = ptr::null_mut();
    let text = c("Weser");
    assert_eq!(
        unsafe { embert_vocab_tokenize(v, text.as_ptr(), &mut s) },
        EmbertStatus::Ok
    );
    let n = unsafe { embert_strings_len(s) };
    let pieces: Vec<String> = (0..n)
        .map(|i| {
            unsafe { CStr::from_ptr(embert_strings_get(s, i)) }
                .to_string_lossy()
                .into_owned()
        })
        .collect();
    assert_eq!(pieces.len(), 2);
    assert!(pieces[1].starts_with("##"));
    assert!(unsafe { embert_strings_get(s, n) }.is_null());
    unsafe {
        embert_strings_free(s);
        embert_vocab_free(v);
    }
}

#[test]
fn index_search_and_round_trip() {
    let ids = [c("d1"), c("d2"), c("d3")];
    let texts = [
        c("river weser in germany"),
        c("france is a country"),
        c("the weser river flows north"),
    ];
    let id_ptrs: Vec<*const c_char> = ids.iter().map(|s| s.as_ptr()).collect();
    let text_ptrs: Vec<*const c_char> = texts.iter().map(|s| s.as_ptr()).collect();
    let mut index = ptr::null_mut();
    let st = unsafe { embert_index_build(id_ptrs.as_ptr(), text_ptrs.as_ptr(), 3, &mut index) };
    assert_eq!(st, EmbertStatus::Ok);
    assert_eq!(unsafe { embert_index_num_docs(index) }, 3);

    let dir = tempfile::tempdir().unwrap();
    let path = c(dir.path().join("idx").to_str().unwrap());
    assert_eq!(
        unsafe { embert_index_save(index, path.as_ptr()) },
        EmbertStatus::Ok
    );
    let mut loaded = ptr::null_mut();
    assert_eq!(
        unsafe { embert_index_load(path.as_ptr(), &mut loaded) },
        EmbertStatus::Ok
    );

    for idx in [index, loaded] {
        let mut hits = ptr::null_mut();
        let q = c("Weser river");
        assert_eq!(
            unsafe { embert_index_search(idx, q.as_ptr(), 10, &mut hits) },
            EmbertStatus::Ok
        );
        // documents without a query term are ranked last with score 0
        assert_eq!(unsafe { embert_hits_len(hits) }, 3);
        let s: Vec<f64> = (0..3)
            .map(|i| unsafe { embert_hits_score(hits, i) })
            .collect();
        assert!(s[0] >= s[1] && s[1] > 0.0 && s[2] == 0.0);
        let last = unsafe { CStr::from_ptr(embert_hits_doc_id(hits, 2)) };
        assert_eq!(last.to_str().unwrap(), "d2");
        assert!(unsafe { embert_hits_score(hits, 3) }.is_nan());
        assert!(unsafe { embert_hits_doc_id(hits, 3) }.is_null());
        unsafe { embert_hits_free(hits) };
    }
    unsafe {
        embert_index_free(index);
        embert_index_free(loaded);
    }
}

#[test]
fn duplicate_ids_report_an_error() {
    let ids = [c("d1"), c("d1")];
    let texts = [c("a"), c("b")];
    let id_ptrs: Vec<*const c_char> = ids.iter().map(|s| s.as_ptr()).collect();
    let text_ptrs: Vec<*const c_char> = texts.iter().map(|s| s.as_ptr()).collect();
    let mut index = ptr::null_mut();
    let st = unsafe { embert_index_build(id_ptrs.as_ptr(), text_ptrs.as_ptr(), 2, &mut index) };
    assert_eq!(st, EmbertStatus::InvalidArgument);
    assert!(index.is_null());
    assert!(last_error().contains("d1"));
}

#[test]
fn null_and_missing_inputs() {
    let mut v = ptr::null_mut();
    assert_eq!(
        unsafe { embert_vocab_load(ptr::null(), &mut v) },
        EmbertStatus::NullArgument
    );
    assert!(last_error().contains("path"));
    let p = c("/nonexistent/vocab.txt");
    assert_eq!(
        unsafe { embert_vocab_load(p.as_ptr(), &mut v) },
        EmbertStatus::Io
    );
    assert_eq!(
        unsafe { embert_vocab_load(p.as_ptr(), ptr::null_mut()) },
        EmbertStatus::NullArgument
    );
    // a later success clears the message
    let mut out = 0.0;
    assert_eq!(
        unsafe { embert_ndcg(ptr::null(), 0, ptr::null(), ptr::null(), 0, 10, &mut out) },
        EmbertStatus::Ok
    );
    assert!(embert_last_error().is_null());
    unsafe {
        embert_vocab_free(ptr::null_mut());
        embert_hits_free(ptr::null_mut());
    }
}

#[test]
fn invalid_utf8_is_rejected() {
    let bad = [0xffu8, 0xfe, 0];
    let mut v = ptr::null_mut();
    let st = unsafe { embert_vocab_load(bad.as_ptr().cast(), &mut v) };
    assert_eq!(st, EmbertStatus::InvalidUtf8);
}

#[test]
fn ndcg_matches_hand_computation() {
    let ranking = [c("a"), c("b"), c("c")];
    let judged = [c("b"), c("c")];
    let grades = [2u8, 1];
    let r: Vec<*const c_char> = ranking.iter().map(|s| s.as_ptr()).collect();
    let j: Vec<*const c_char> = judged.iter().map(|s| s.as_ptr()).collect();
    let mut out = 0.0;
    let st = unsafe { embert_ndcg(r.as_ptr(), 3, j.as_ptr(), grades.as_ptr(), 2, 3, &mut out) };
    assert_eq!(st, EmbertStatus::Ok);
    let dcg = 2.0 / 3f64.log2() + 1.0 / 4f64.log2();
    let ideal = 2.0 + 1.0 / 3f64.log2();
    assert!((out - dcg / ideal).abs() < 1e-12);
}

#[test]
fn ttest_and_length_errors() {
    let a = [1.0, 2.0, 3.0, 4.0];
    let b = [0.5, 1.0, 2.5, 3.0];
    let mut t = EmbertTTest::default();
    assert_eq!(
        unsafe { embert_paired_ttest(a.as_ptr(), b.as_ptr(), 4, &mut t) },
        EmbertStatus::Ok
    );
    assert_eq!(t.df, 3.0);
    assert!(t.t > 0.0 && t.p > 0.0 && t.p < 1.0);
    assert_eq!(
        unsafe { embert_paired_ttest(a.as_ptr(), b.as_ptr(), 1, &mut t) },
        EmbertStatus::InvalidArgument
    );
}

#[test]
fn model_scores_a_pair() {
    let dir = tempfile::tempdir().unwrap();
    let vocab = Vocabulary::fixture();
    let v = fixture_vocab(dir.path());
    let w = EncoderWeights::init(&EncoderConfig {
        d_model: 8,
        n_layers: 1,
        n_heads: 2,
        d_ff: 16,
        max_positions: 32,
        vocab_size: vocab.num_pieces(),
        dropout: 0.0,
        seed: 3,
    })
    .unwrap();
    let path = dir.path().join("m.model");
    w.save(&path).unwrap();
    let mut m = ptr::null_mut();
    let p = c(path.to_str().unwrap());
    assert_eq!(
        unsafe { embert_model_load(p.as_ptr(), &mut m) },
        EmbertStatus::Ok
    );
    let (q, d) = (c("weser"), c("the weser river"));
    let mut s = 0.0;
    assert_eq!(
        unsafe { embert_model_score(m, v, q.as_ptr(), d.as_ptr(), &mut s) },
        EmbertStatus::Ok
    );
    assert!(s > 0.0 && s < 1.0);
    let mut again = 0.0;
    unsafe { embert_model_score(m, v, q.as_ptr(), d.as_ptr(), &mut again) };
    assert_eq!(s.to_bits(), again.to_bits());
    unsafe {
        embert_model_free(m);
        embert_vocab_free(v);
    }
}

#[test]
fn header_declares_every_export() {
    let header = include_str!("../include/embert.h");
    let src = include_str!("../src/lib.rs");
    let mut n = 0;
    for line in src.lines() {
        let Some(rest) = line.split("extern \"C\" fn ").nth(1) else {
            continue;
        };
        let name = rest.split('(').next().unwrap();
        assert!(
            header.contains(&format!("{name}(")),
            "{name} missing from header"
        );
        n += 1;
    }
    assert!(n >= 20, "found {n} exports");
}
