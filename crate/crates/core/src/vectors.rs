//! Word embeddings, TF-IDF and the weighted question vector built from both.

use std::collections::{BTreeMap, HashMap};
use std::io::BufRead;

use thiserror::Error;

use crate::text::normalize;

pub const DEFAULT_DIM: usize = 50;

#[derive(Debug, Error)]
pub enum VectorError {
    #[error("line {line}: expected {expected} components, found {found}")]
    DimensionMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: {reason}")]
    ParseFailure { line: usize, reason: String },
    #[error("vector lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("cannot fit TF-IDF on an empty corpus")]
    EmptyCorpus,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Dense vectors keyed by normalized token.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    /// An empty table; every lookup misses.
    pub fn empty(dim: usize) -> Self {
        EmbeddingTable {
            dim,
            vectors: HashMap::new(),
        }
    }

    /// Reads the `<count> <dim>` header followed by `<token> <c1> ... <c_dim>`
    /// rows. The count is advisory; later rows for a token overwrite earlier
    /// ones.
    pub fn load<R: BufRead>(source: R) -> Result<Self, VectorError> {
        let mut lines = source.lines().enumerate();
        let dim = loop {
            let Some((i, line)) = lines.next() else {
                return Err(VectorError::ParseFailure {
                    line: 1,
                    reason: "missing header".into(),
                });
            };
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            break parse_header(&line).ok_or_else(|| VectorError::ParseFailure {
                line: i + 1,
                reason: format!("bad header {line:?}, expected `<count> <dim>`"),
            })?;
        };
        let mut table = EmbeddingTable::empty(dim);
        for (i, line) in lines {
            let line = line?;
            let mut fields = line.split_whitespace();
            let Some(token) = fields.next() else {
                continue;
            };
            let components = fields
                .map(|f| match f.parse::<f64>() {
                    Ok(x) if x.is_finite() => Ok(x),
                    _ => Err(VectorError::ParseFailure {
                        line: i + 1,
                        reason: format!("bad component {f:?}"),
                    }),
                })
                .collect::<Result<Vec<_>, _>>()?;
            if components.len() != dim {
                return Err(VectorError::DimensionMismatch {
                    line: i + 1,
                    expected: dim,
                    found: components.len(),
                });
            }
            table.vectors.insert(normalize(token), components);
        }
        Ok(table)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Looks up a token after normalization.
    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vectors.get(&normalize(token)).map(Vec::as_slice)
    }
}

fn parse_header(line: &str) -> Option<usize> {
    let (count, dim) = line.trim().split_once(' ')?;
    count.parse::<usize>().ok()?;
    let dim = dim.parse::<usize>().ok()?;
    (dim > 0).then_some(dim)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Cosine similarity; 0 when either vector has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64, VectorError> {
    if a.len() != b.len() {
        return Err(VectorError::LengthMismatch(a.len(), b.len()));
    }
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

/// Sparse weights keyed by normalized term. Terms outside the fitted
/// vocabulary can still carry weight, so the key is the term itself.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseVector {
    entries: BTreeMap<String, f64>,
}

impl SparseVector {
    pub fn get(&self, term: &str) -> Option<f64> {
        self.entries.get(term).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.entries.values().map(|w| w * w).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (small, large) = if self.len() <= other.len() {
            (self, other)
        } else {
            (other, self)
        };
        small
            .entries
            .iter()
            .filter_map(|(k, w)| large.entries.get(k).map(|v| w * v))
            .sum()
    }

    /// Cosine under the same zero-norm convention as [`cosine`].
    pub fn cosine(&self, other: &SparseVector) -> f64 {
        let (na, nb) = (self.norm(), other.norm());
        if na == 0.0 || nb == 0.0 {
            return 0.0;
        }
        (self.dot(other) / (na * nb)).clamp(-1.0, 1.0)
    }
}

/// Document frequencies over a fitted corpus. Terms are normalized.
#[derive(Debug, Clone)]
pub struct TfIdfModel {
    doc_count: usize,
    df: BTreeMap<String, usize>,
    vocab: BTreeMap<String, usize>,
}

impl TfIdfModel {
    pub fn fit<D, T>(corpus: &[D]) -> Result<Self, VectorError>
    where
        D: AsRef<[T]>,
        T: AsRef<str>,
    {
        if corpus.is_empty() {
            return Err(VectorError::EmptyCorpus);
        }
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        for doc in corpus {
            let mut terms: Vec<String> =
                doc.as_ref().iter().map(|t| normalize(t.as_ref())).collect();
            terms.sort();
            terms.dedup();
            for t in terms {
                *df.entry(t).or_default() += 1;
            }
        }
        let vocab = df.keys().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Ok(TfIdfModel {
            doc_count: corpus.len(),
            df,
            vocab,
        })
    }

    pub fn doc_count(&self) -> usize {
        self.doc_count
    }

    /// Document frequency of a normalized term; 0 if unseen.
    pub fn df(&self, term: &str) -> usize {
        self.df.get(term).copied().unwrap_or(0)
    }

    pub fn vocab_index(&self, term: &str) -> Option<usize> {
        self.vocab.get(term).copied()
    }

    pub fn vocab_len(&self) -> usize {
        self.vocab.len()
    }

    /// Smoothed idf: ln((1 + N) / (1 + df)) + 1.
    pub fn idf(&self, term: &str) -> f64 {
        let n = self.doc_count as f64;
        ((1.0 + n) / (1.0 + self.df(term) as f64)).ln() + 1.0
    }

    /// Raw tf times smoothed idf, before normalization.
    pub fn raw_weights<T: AsRef<str>>(&self, tokens: &[T]) -> BTreeMap<String, f64> {
        let mut tf: BTreeMap<String, usize> = BTreeMap::new();
        for t in tokens {
            *tf.entry(normalize(t.as_ref())).or_default() += 1;
        }
        tf.into_iter()
            .map(|(term, count)| {
                let w = count as f64 * self.idf(&term);
                (term, w)
            })
            .collect()
    }

    /// L2-normalized TF-IDF vector of `tokens`.
    pub fn vector<T: AsRef<str>>(&self, tokens: &[T]) -> SparseVector {
        let raw = self.raw_weights(tokens);
        let norm = raw.values().map(|w| w * w).sum::<f64>().sqrt();
        if norm == 0.0 {
            return SparseVector::default();
        }
        SparseVector {
            entries: raw
                .into_iter()
                .map(|(t, w)| (t, w / norm))
                .filter(|(_, w)| *w != 0.0)
                .collect(),
        }
    }
}

/// TF-IDF weighted mean of the embeddings of in-vocabulary tokens. Returns
/// the zero vector when no token has an embedding.
pub fn question_embedding<T: AsRef<str>>(
    model: &TfIdfModel,
    table: &EmbeddingTable,
    tokens: &[T],
) -> Vec<f64> {
    let mut acc = vec![0.0; table.dim()];
    let mut total = 0.0;
    for (term, w) in model.raw_weights(tokens) {
        if let Some(v) = table.vectors.get(&term) {
            for (a, x) in acc.iter_mut().zip(v) {
                *a += w * x;
            }
            total += w;
        }
    }
    if total > 0.0 {
        acc.iter_mut().for_each(|a| *a /= total);
    }
    acc
}
