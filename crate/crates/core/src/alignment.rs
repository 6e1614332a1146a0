//! Linear alignment of the joint embedding space into the encoder's token
//! space, and the token-to-input-vector map built on it.
//!
//! `W` minimizes `sum_x ||W a_x - b_x||^2 + ridge * ||W||_F^2` over the words
//! `x` present both in the embedding table (`a_x`) and as word pieces of the
//! encoder (`b_x`). Entity tokens are embedded as `W a_e`; every other token
//! keeps its native encoder row.

use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::corpus;
use crate::embeddings::JointEmbeddingTable;
use crate::error::{Error, Result};
use crate::tokenizer::{TokenKind, Vocabulary, CONTINUATION};

/// Row-major view of an encoder token table indexed by piece id.
#[derive(Debug, Clone, Copy)]
pub struct TokenTable<'a> {
    pub vocab: &'a Vocabulary,
    pub rows: &'a [f64],
    pub dim: usize,
}

impl<'a> TokenTable<'a> {
    pub fn row(&self, id: usize) -> &'a [f64] {
        &self.rows[id * self.dim..(id + 1) * self.dim]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    pub ridge: f64,
    pub fitted_on: usize,
}

impl AlignmentMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols || data.iter().any(|x| !x.is_finite()) {
            return Err(Error::Invalid(format!(
                "alignment matrix needs {rows}x{cols} finite entries"
            )));
        }
        Ok(AlignmentMatrix {
            rows,
            cols,
            data,
            ridge: 0.0,
            fitted_on: 0,
        })
    }

    /// Encoder dimension.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Embedding-table dimension.
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols, "vector dimension");
        self.data
            .chunks_exact(self.cols)
            .map(|row| row.iter().zip(v).map(|(w, x)| w * x).sum())
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{}\t{}\n", self.rows, self.cols);
        for row in self.data.chunks_exact(self.cols.max(1)) {
            let line: Vec<String> = row.iter().map(|x| x.to_string()).collect();
            let _ = writeln!(s, "{}", line.join(" "));
        }
        s
    }

    pub fn parse(name: &str, content: &str) -> Result<Self> {
        let mut it = content
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = it
            .next()
            .ok_or_else(|| Error::parse(name, 1, "missing header"))?;
        let (r, c) = header
            .split_once('\t')
            .and_then(|(r, c)| Some((r.parse::<usize>().ok()?, c.parse::<usize>().ok()?)))
            .ok_or_else(|| Error::parse(name, 1, "expected `rows<TAB>cols`"))?;
        let mut data = Vec::with_capacity(r * c);
        for (i, line) in it {
            for tok in line.split_whitespace() {
                data.push(
                    tok.parse::<f64>()
                        .map_err(|_| Error::parse(name, i + 1, format!("bad number `{tok}`")))?,
                );
            }
        }
        if data.len() != r * c {
            return Err(Error::parse(
                name,
                1,
                format!("expected {} values, found {}", r * c, data.len()),
            ));
        }
        AlignmentMatrix::new(r, c, data)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (name, content) = corpus::read_file(path)?;
        Self::parse(&name, &content)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        corpus::write_file(path, &self.to_text())
    }
}

/// Paired vectors `(a_x, b_x)` over the shared vocabulary, ordered by word.
pub fn shared_pairs(
    table: &JointEmbeddingTable,
    tokens: &TokenTable<'_>,
) -> Vec<(String, Vec<f64>, Vec<f64>)> {
    let mut out = Vec::new();
    for w in table.words() {
        let folded = w.to_lowercase();
        if folded.starts_with(CONTINUATION) {
            continue;
        }
        let Some(id) = tokens.vocab.piece_id(&folded) else {
            continue;
        };
        if tokens.vocab.is_special(id) {
            continue;
        }
        let a = table.word(w).expect("listed word has a vector").to_vec();
        out.push((folded, a, tokens.row(id).to_vec()));
    }
    out.sort_by(|x, y| x.0.cmp(&y.0));
    out.dedup_by(|x, y| x.0 == y.0);
    out
}

/// Overwrite the token rows of words in `table` with `s * P a_x`, where `P`
/// is a seeded Gaussian lift into the token space and `s` keeps the mean
/// norm of the replaced rows. Gives a from-scratch encoder a lexical token
/// space to align against. Returns the number of rows replaced.
pub fn warm_start_tokens(
    rows: &mut [f64],
    dim: usize,
    vocab: &Vocabulary,
    table: &JointEmbeddingTable,
    seed: u64,
) -> usize {
    let view = TokenTable { vocab, rows, dim };
    let ids: Vec<(usize, Vec<f64>)> = shared_pairs(table, &view)
        .into_iter()
        .map(|(w, a, _)| (vocab.piece_id(&w).expect("shared word is a piece"), a))
        .collect();
    if ids.is_empty() {
        return 0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0 / (table.dim() as f64).sqrt()).expect("positive std");
    let p: Vec<f64> = (0..dim * table.dim())
        .map(|_| normal.sample(&mut rng))
        .collect();
    let lifted: Vec<Vec<f64>> = ids
        .iter()
        .map(|(_, a)| {
            (0..dim)
                .map(|r| dot(&p[r * table.dim()..(r + 1) * table.dim()], a))
                .collect()
        })
        .collect();
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let old: f64 = ids
        .iter()
        .map(|(id, _)| norm(&rows[id * dim..(id + 1) * dim]))
        .sum();
    let new: f64 = lifted.iter().map(|v| norm(v)).sum();
    let s = if new > 0.0 { old / new } else { 0.0 };
    for ((id, _), v) in ids.iter().zip(&lifted) {
        for (dst, x) in rows[id * dim..(id + 1) * dim].iter_mut().zip(v) {
            *dst = s * x;
        }
    }
    ids.len()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Default ridge for a fit over `fitted_on` shared words.
pub fn default_ridge(fitted_on: usize) -> f64 {
    1e-6 * fitted_on as f64
}

/// Fit `W` over the shared vocabulary. `ridge = None` applies
/// [`default_ridge`].
pub fn fit_alignment(
    table: &JointEmbeddingTable,
    tokens: &TokenTable<'_>,
    ridge: Option<f64>,
) -> Result<AlignmentMatrix> {
    let pairs = shared_pairs(table, tokens);
    if pairs.is_empty() {
        return Err(Error::EmptyIntersection);
    }
    let ridge = ridge.unwrap_or_else(|| default_ridge(pairs.len()));
    let refs: Vec<(&[f64], &[f64])> = pairs
        .iter()
        .map(|(_, a, b)| (a.as_slice(), b.as_slice()))
        .collect();
    fit_pairs(&refs, table.dim(), tokens.dim, ridge)
}

/// Closed-form ridge least squares over explicit pairs: solves
/// `(A A^T + ridge I) W^T = A B^T` by Cholesky.
pub fn fit_pairs(
    pairs: &[(&[f64], &[f64])],
    dim_in: usize,
    dim_out: usize,
    ridge: f64,
) -> Result<AlignmentMatrix> {
    if pairs.is_empty() {
        return Err(Error::EmptyIntersection);
    }
    if !(ridge >= 0.0) {
        return Err(Error::Config("ridge must be non-negative".into()));
    }
    let mut gram = vec![0.0; dim_in * dim_in];
    let mut rhs = vec![0.0; dim_in * dim_out];
    for (a, b) in pairs {
        debug_assert_eq!(a.len(), dim_in);
        debug_assert_eq!(b.len(), dim_out);
        for i in 0..dim_in {
            for j in 0..dim_in {
                gram[i * dim_in + j] += a[i] * a[j];
            }
            for j in 0..dim_out {
                rhs[i * dim_out + j] += a[i] * b[j];
            }
        }
    }
    for i in 0..dim_in {
        gram[i * dim_in + i] += ridge;
    }
    let chol = cholesky(&gram, dim_in).ok_or(Error::SingularDesign {
        fitted_on: pairs.len(),
        dim: dim_in,
    })?;
    // rhs holds W^T (dim_in x dim_out) after the solve
    for col in 0..dim_out {
        let mut y = vec![0.0; dim_in];
        for i in 0..dim_in {
            let mut s = rhs[i * dim_out + col];
            for k in 0..i {
                s -= chol[i * dim_in + k] * y[k];
            }
            y[i] = s / chol[i * dim_in + i];
        }
        for i in (0..dim_in).rev() {
            let mut s = y[i];
            for k in i + 1..dim_in {
                s -= chol[k * dim_in + i] * rhs[k * dim_out + col];
            }
            rhs[i * dim_out + col] = s / chol[i * dim_in + i];
        }
    }
    let mut data = vec![0.0; dim_out * dim_in];
    for r in 0..dim_out {
        for c in 0..dim_in {
            data[r * dim_in + c] = rhs[c * dim_out + r];
        }
    }
    let mut m = AlignmentMatrix::new(dim_out, dim_in, data)?;
    m.ridge = ridge;
    m.fitted_on = pairs.len();
    Ok(m)
}

/// Lower-triangular Cholesky factor, or `None` when a pivot is not safely
/// positive relative to the matrix scale.
fn cholesky(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let scale = (0..n)
        .map(|i| a[i * n + i].abs())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let tol = scale * 1e-12 * n as f64;
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(s > tol) {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// `sum ||W a - b||^2`.
pub fn residual(w: &AlignmentMatrix, pairs: &[(&[f64], &[f64])]) -> f64 {
    pairs
        .iter()
        .map(|(a, b)| {
            w.apply(a)
                .iter()
                .zip(b.iter())
                .map(|(x, y)| (x - y).powi(2))
                .sum::<f64>()
        })
        .sum()
}

/// Input vector of one token id: aligned entity vector for entity tokens,
/// the native encoder row otherwise.
pub fn map_token(
    token_id: usize,
    table: &JointEmbeddingTable,
    w: &AlignmentMatrix,
    tokens: &TokenTable<'_>,
) -> Result<Vec<f64>> {
    let tok = tokens.vocab.token(token_id);
    match tok.kind {
        TokenKind::Entity => {
            let e = tok.entity_id().expect("entity token");
            let v = table
                .entity(e)
                .ok_or_else(|| Error::MissingEmbedding(e.to_string()))?;
            Ok(w.apply(v))
        }
        _ if token_id < tokens.vocab.num_pieces() => Ok(tokens.row(token_id).to_vec()),
        _ => Err(Error::Invalid(format!("token id {token_id} out of range"))),
    }
}

/// Aligned vectors for every entity token of a vocabulary, computed once.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedEntities {
    first_id: usize,
    dim: usize,
    vectors: Vec<Option<Vec<f64>>>,
}

impl AlignedEntities {
    pub fn new(vocab: &Vocabulary, table: &JointEmbeddingTable, w: &AlignmentMatrix) -> Self {
        let vectors = vocab
            .entities()
            .iter()
            .map(|e| table.entity(e).map(|v| w.apply(v)))
            .collect();
        AlignedEntities {
            first_id: vocab.num_pieces(),
            dim: w.rows(),
            vectors,
        }
    }

    /// Provider with no entity vectors (every entity token is dropped).
    pub fn empty(vocab: &Vocabulary, dim: usize) -> Self {
        AlignedEntities {
            first_id: vocab.num_pieces(),
            dim,
            vectors: vec![None; vocab.num_entities()],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, token_id: usize) -> Option<&[f64]> {
        token_id
            .checked_sub(self.first_id)
            .and_then(|i| self.vectors.get(i))
            .and_then(|v| v.as_deref())
    }

    pub fn has_entity(&self, vocab: &Vocabulary, entity_id: &str) -> bool {
        vocab
            .entity_token_id(entity_id)
            .and_then(|id| self.get(id))
            .is_some()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn as_refs(p: &[(Vec<f64>, Vec<f64>)]) -> Vec<(&[f64], &[f64])> {
        p.iter()
            .map(|(a, b)| (a.as_slice(), b.as_slice()))
            .collect()
    }

    #[test]
    fn identity_recovered() {
        let pairs: Vec<(Vec<f64>, Vec<f64>)> = vec![
            (vec![1.0, 0.0, 0.0], vec![1.0, 0.0, 0.0]),
            (vec![0.0, 1.0, 0.0], vec![0.0, 1.0, 0.0]),
            (vec![0.0, 0.0, 1.0], vec![0.0, 0.0, 1.0]),
            (vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]),
        ];
        let w = fit_pairs(&as_refs(&pairs), 3, 3, 0.0).unwrap();
        for r in 0..3 {
            for c in 0..3 {
                let e = if r == c { 1.0 } else { 0.0 };
                assert!((w.get(r, c) - e).abs() < 1e-6);
            }
        }
        assert!(residual(&w, &as_refs(&pairs)) < 1e-9);
    }

    #[test]
    fn scalar_closed_form() {
        // W = sum(ab) / sum(a^2) = (2 + 8) / (1 + 4) = 2
        let pairs = vec![(vec![1.0], vec![2.0]), (vec![2.0], vec![4.0])];
        let w = fit_pairs(&as_refs(&pairs), 1, 1, 0.0).unwrap();
        assert!((w.get(0, 0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn underdetermined_is_singular() {
        let pairs = vec![(vec![1.0, 2.0], vec![3.0, 4.0])];
        assert!(matches!(
            fit_pairs(&as_refs(&pairs), 2, 2, 0.0),
            Err(Error::SingularDesign {
                fitted_on: 1,
                dim: 2
            })
        ));
        assert!(fit_pairs(&as_refs(&pairs), 2, 2, 1e-3).is_ok());
    }

    #[test]
    fn residual_of_zero_matrix_is_target_energy() {
        let pairs = vec![
            (vec![1.0, 2.0], vec![3.0, 4.0]),
            (vec![0.5, 0.0], vec![1.0, 1.0]),
        ];
        let w = AlignmentMatrix::new(2, 2, vec![0.0; 4]).unwrap();
        assert!((residual(&w, &as_refs(&pairs)) - (9.0 + 16.0 + 1.0 + 1.0)).abs() < 1e-12);
    }

    fn random_pairs(seed: u64, n: usize, din: usize, dout: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                (
                    (0..din).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                    (0..dout).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                )
            })
            .collect()
    }

    #[test]
    fn gradient_vanishes_at_fit() {
        let pairs = random_pairs(3, 30, 4, 5);
        let w = fit_pairs(&as_refs(&pairs), 4, 5, 0.0).unwrap();
        // grad = 2 (W A - B) A^T
        let mut grad = [0.0; 20];
        for (a, b) in &pairs {
            let wa = w.apply(a);
            for r in 0..5 {
                for c in 0..4 {
                    grad[r * 4 + c] += 2.0 * (wa[r] - b[r]) * a[c];
                }
            }
        }
        assert!(grad.iter().all(|g| g.abs() < 1e-6), "{grad:?}");
    }

    #[test]
    fn matches_independent_least_squares() {
        let pairs = random_pairs(11, 25, 3, 4);
        let w = fit_pairs(&as_refs(&pairs), 3, 4, 0.0).unwrap();
        let a = nalgebra::DMatrix::from_fn(25, 3, |i, j| pairs[i].0[j]);
        let b = nalgebra::DMatrix::from_fn(25, 4, |i, j| pairs[i].1[j]);
        let wt = a.svd(true, true).solve(&b, 1e-14).unwrap();
        for r in 0..4 {
            for c in 0..3 {
                assert!((w.get(r, c) - wt[(c, r)]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn pair_order_does_not_matter() {
        let mut pairs = random_pairs(5, 30, 4, 4);
        let w1 = fit_pairs(&as_refs(&pairs), 4, 4, 0.0).unwrap();
        pairs.reverse();
        pairs.swap(0, 7);
        let w2 = fit_pairs(&as_refs(&pairs), 4, 4, 0.0).unwrap();
        for (x, y) in w1.data().iter().zip(w2.data()) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn map_token_branches() {
        let vocab = Vocabulary::fixture()
            .with_entities(["France", "Nowhere"])
            .unwrap();
        let dim = 2;
        let rows: Vec<f64> = (0..vocab.num_pieces() * dim)
            .map(|i| i as f64 * 0.01)
            .collect();
        let tokens = TokenTable {
            vocab: &vocab,
            rows: &rows,
            dim,
        };
        let table = JointEmbeddingTable::from_vectors(
            2,
            vec![("france".into(), vec![0.3, 0.4])],
            vec![("France".into(), vec![1.0, 2.0])],
        )
        .unwrap();
        let w = AlignmentMatrix::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();

        let fr = vocab.piece_id("france").unwrap();
        assert_eq!(map_token(fr, &table, &w, &tokens).unwrap(), tokens.row(fr));
        // [[1,2],[3,4]] . [1,2] = [5, 11]
        let e = vocab.entity_token_id("France").unwrap();
        assert_eq!(map_token(e, &table, &w, &tokens).unwrap(), vec![5.0, 11.0]);
        let missing = vocab.entity_token_id("Nowhere").unwrap();
        assert!(matches!(
            map_token(missing, &table, &w, &tokens),
            Err(Error::MissingEmbedding(e)) if e == "Nowhere"
        ));

        let aligned = AlignedEntities::new(&vocab, &table, &w);
        assert_eq!(aligned.get(e), Some(&[5.0, 11.0][..]));
        assert!(aligned.get(missing).is_none());
        assert!(aligned.get(fr).is_none());
    }

    #[test]
    fn native_rows_untouched_for_every_piece() {
        let vocab = Vocabulary::fixture().with_entities(["France"]).unwrap();
        let rows: Vec<f64> = (0..vocab.num_pieces() * 3)
            .map(|i| (i as f64).sin())
            .collect();
        let tokens = TokenTable {
            vocab: &vocab,
            rows: &rows,
            dim: 3,
        };
        let table = JointEmbeddingTable::from_vectors(
            2,
            vec![("france".into(), vec![0.3, 0.4])],
            vec![("France".into(), vec![1.0, 2.0])],
        )
        .unwrap();
        let w = AlignmentMatrix::new(3, 2, vec![7.0; 6]).unwrap();
        for id in 0..vocab.num_pieces() {
            assert_eq!(map_token(id, &table, &w, &tokens).unwrap(), tokens.row(id));
        }
    }

    #[test]
    fn fit_over_shared_vocabulary() {
        let vocab = Vocabulary::fixture();
        let dim = 2;
        let mut rows = vec![0.0; vocab.num_pieces() * dim];
        let words = [
            ("france", [1.0, 0.0]),
            ("africa", [0.0, 1.0]),
            ("river", [1.0, 1.0]),
        ];
        for (w, v) in &words {
            let id = vocab.piece_id(w).unwrap();
            rows[id * dim] = 2.0 * v[0];
            rows[id * dim + 1] = 2.0 * v[1];
        }
        let mut table_words: Vec<(String, Vec<f64>)> = words
            .iter()
            .map(|(w, v)| (w.to_string(), v.to_vec()))
            .collect();
        table_words.push(("zzznotapiece".into(), vec![5.0, 5.0]));
        let table = JointEmbeddingTable::from_vectors(2, table_words, vec![]).unwrap();
        let tokens = TokenTable {
            vocab: &vocab,
            rows: &rows,
            dim,
        };
        let w = fit_alignment(&table, &tokens, Some(0.0)).unwrap();
        assert_eq!(w.fitted_on, 3);
        assert!((w.get(0, 0) - 2.0).abs() < 1e-9 && (w.get(1, 1) - 2.0).abs() < 1e-9);
        assert!(w.get(0, 1).abs() < 1e-9);

        let w = fit_alignment(&table, &tokens, None).unwrap();
        assert_eq!(w.ridge, 3e-6);

        let lonely =
            JointEmbeddingTable::from_vectors(2, vec![("qqq".into(), vec![1.0, 0.0])], vec![])
                .unwrap();
        assert!(matches!(
            fit_alignment(&lonely, &tokens, None),
            Err(Error::EmptyIntersection)
        ));
    }

    #[test]
    fn matrix_file_round_trip() {
        let w = AlignmentMatrix::new(2, 3, vec![0.1, -2.5, 3.0, 1e-17, 4.0, 5.5]).unwrap();
        let back = AlignmentMatrix::parse("w", &w.to_text()).unwrap();
        assert_eq!(back.data(), w.data());
        assert!(w.to_text().starts_with("2\t3\n"));
    }
}
