//! Text normalization and word splitting shared by the tokenizer, the
//! embedding trainer and the BM25 index.

use unicode_normalization::UnicodeNormalization;

/// NFC-normalize and lower-case.
pub fn normalize(text: &str) -> String {
    text.nfc().collect::<String>().to_lowercase()
}

pub fn is_punctuation(c: char) -> bool {
    c.is_ascii_punctuation() || (!c.is_alphanumeric() && !c.is_whitespace() && !c.is_control())
}

/// Split into words on whitespace; every punctuation character is a word of
/// its own. Returns `(char_start, word)` pairs, offsets counted in chars.
pub fn split_words(text: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start: Option<(usize, usize)> = None; // (char offset, byte offset)
    for (ci, (bi, c)) in text.char_indices().enumerate() {
        if c.is_whitespace() || c.is_control() || is_punctuation(c) {
            if let Some((cs, bs)) = start.take() {
                out.push((cs, &text[bs..bi]));
            }
            if is_punctuation(c) {
                out.push((ci, &text[bi..bi + c.len_utf8()]));
            }
        } else if start.is_none() {
            start = Some((ci, bi));
        }
    }
    if let Some((cs, bs)) = start {
        out.push((cs, &text[bs..]));
    }
    out
}

/// Word-level terms as used by the BM25 index and the embedding trainer.
pub fn terms(text: &str) -> Vec<String> {
    split_words(&normalize(text))
        .into_iter()
        .map(|(_, w)| w.to_string())
        .collect()
}

/// Byte offset of the `char_idx`-th char (or `text.len()` past the end).
pub fn char_to_byte(text: &str, char_idx: usize) -> Option<usize> {
    if char_idx == 0 {
        return Some(0);
    }
    let mut it = text.char_indices();
    match it.nth(char_idx) {
        Some((b, _)) => Some(b),
        None if text.chars().count() == char_idx => Some(text.len()),
        None => None,
    }
}
