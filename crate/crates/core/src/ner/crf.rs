//! Linear-chain CRF layer: transition scores with START/STOP pseudo-states,
//! BIO constraints and Viterbi decoding.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{LabelSet, NerError, Tag, TagSequence};

/// Marks a forbidden transition. Adding it to any finite score stays
/// forbidden, and it never wins a max against a feasible path.
pub const FORBIDDEN: f64 = f64::NEG_INFINITY;

/// `(k + 2) x (k + 2)` transition scores; row/column `k` is START and `k + 1`
/// is STOP. Entries are finite or [`FORBIDDEN`].
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    k: usize,
    scores: Vec<f64>,
}

impl TransitionMatrix {
    pub fn zeros(k: usize) -> Self {
        TransitionMatrix {
            k,
            scores: vec![0.0; (k + 2) * (k + 2)],
        }
    }

    /// Builds from full `(k + 2)`-square rows.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, NerError> {
        let size = rows.len();
        if size < 3 {
            return Err(NerError::LabelCountMismatch {
                expected: 3,
                found: size,
            });
        }
        let mut m = TransitionMatrix::zeros(size - 2);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != size {
                return Err(NerError::LabelCountMismatch {
                    expected: size,
                    found: row.len(),
                });
            }
            for (j, v) in row.into_iter().enumerate() {
                m.set(i, j, v)?;
            }
        }
        Ok(m)
    }

    /// Number of real labels `k`.
    pub fn label_count(&self) -> usize {
        self.k
    }

    pub fn size(&self) -> usize {
        self.k + 2
    }

    pub fn start(&self) -> usize {
        self.k
    }

    pub fn stop(&self) -> usize {
        self.k + 1
    }

    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.scores[from * self.size() + to]
    }

    pub fn set(&mut self, from: usize, to: usize, score: f64) -> Result<(), NerError> {
        if !(score.is_finite() || score == FORBIDDEN) {
            return Err(NerError::NonFinite("transition matrix"));
        }
        let n = self.size();
        self.scores[from * n + to] = score;
        Ok(())
    }

    pub(crate) fn add(&mut self, from: usize, to: usize, delta: f64) {
        let n = self.size();
        self.scores[from * n + to] += delta;
    }
}

// Forbidden entries serialize as null since JSON has no infinity.
impl Serialize for TransitionMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let n = self.size();
        let rows: Vec<Vec<Option<f64>>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| Some(self.get(i, j)).filter(|v| v.is_finite()))
                    .collect()
            })
            .collect();
        rows.serialize(s)
    }
}

impl<'de> Deserialize<'de> for TransitionMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rows: Vec<Vec<Option<f64>>> = Vec::deserialize(d)?;
        let rows = rows
            .into_iter()
            .map(|r| r.into_iter().map(|v| v.unwrap_or(FORBIDDEN)).collect())
            .collect();
        TransitionMatrix::from_rows(rows).map_err(serde::de::Error::custom)
    }
}

/// Per-token label scores, `n x k`, all finite.
#[derive(Debug, Clone, PartialEq)]
pub struct EmissionScores {
    n: usize,
    k: usize,
    scores: Vec<f64>,
}

impl EmissionScores {
    pub fn zeros(n: usize, k: usize) -> Self {
        EmissionScores {
            n,
            k,
            scores: vec![0.0; n * k],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, NerError> {
        let k = rows.first().map_or(0, Vec::len);
        let mut e = EmissionScores::zeros(rows.len(), k);
        for (t, row) in rows.into_iter().enumerate() {
            if row.len() != k {
                return Err(NerError::LabelCountMismatch {
                    expected: k,
                    found: row.len(),
                });
            }
            for (j, v) in row.into_iter().enumerate() {
                if !v.is_finite() {
                    return Err(NerError::NonFinite("emission scores"));
                }
                e.scores[t * k + j] = v;
            }
        }
        Ok(e)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn label_count(&self) -> usize {
        self.k
    }

    pub fn get(&self, t: usize, j: usize) -> f64 {
        self.scores[t * self.k + j]
    }

    pub(crate) fn add(&mut self, t: usize, j: usize, delta: f64) {
        self.scores[t * self.k + j] += delta;
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.scores[t * self.k..(t + 1) * self.k]
    }
}

/// Total score of one complete path, START and STOP transitions included.
pub fn path_score(e: &EmissionScores, a: &TransitionMatrix, tags: &[usize]) -> f64 {
    let mut prev = a.start();
    let mut total = 0.0;
    for (t, &y) in tags.iter().enumerate() {
        total += a.get(prev, y) + e.get(t, y);
        prev = y;
    }
    total + a.get(prev, a.stop())
}

/// Highest-scoring label path. Among equal-scoring paths the
/// lexicographically smallest index sequence wins.
///
/// Runs the recursion backwards (best suffix score per position and label)
/// and then walks forward choosing the smallest label that attains the
/// optimum, which yields the lexicographic minimum directly.
pub fn viterbi(e: &EmissionScores, a: &TransitionMatrix) -> Result<TagSequence, NerError> {
    let (n, k) = (e.len(), a.label_count());
    if n == 0 {
        return Err(NerError::EmptySentence);
    }
    if e.label_count() != k {
        return Err(NerError::LabelCountMismatch {
            expected: k,
            found: e.label_count(),
        });
    }
    // suffix[t * k + j]: best score of positions t..n given label j at t,
    // counting e[t][j] and everything after it, STOP included.
    let mut suffix = vec![FORBIDDEN; n * k];
    for j in 0..k {
        suffix[(n - 1) * k + j] = e.get(n - 1, j) + a.get(j, a.stop());
    }
    for t in (0..n - 1).rev() {
        for j in 0..k {
            let best = (0..k)
                .map(|i| a.get(j, i) + suffix[(t + 1) * k + i])
                .fold(FORBIDDEN, f64::max);
            suffix[t * k + j] = e.get(t, j) + best;
        }
    }

    let mut tags = Vec::with_capacity(n);
    let mut prev = a.start();
    let mut score = FORBIDDEN;
    for t in 0..n {
        let (best_j, best) = (0..k)
            .map(|j| (j, a.get(prev, j) + suffix[t * k + j]))
            .fold(
                (0, FORBIDDEN),
                |acc, cur| if cur.1 > acc.1 { cur } else { acc },
            );
        if t == 0 {
            if best == FORBIDDEN {
                return Err(NerError::NoFeasiblePath);
            }
            score = best;
        }
        tags.push(best_j);
        prev = best_j;
    }
    Ok(TagSequence { tags, score })
}

/// Copy of `a` with every illegal BIO transition set to [`FORBIDDEN`]:
/// START, `O`, and any tag of another type may not precede `I-X`.
pub fn constrain_bio(a: &TransitionMatrix, ls: &LabelSet) -> TransitionMatrix {
    let mut out = a.clone();
    let n = out.size();
    for to in 0..ls.len() {
        let Tag::Inside(x) = ls.tag(to) else {
            continue;
        };
        out.scores[ls.start_index() * n + to] = FORBIDDEN;
        for from in 0..ls.len() {
            let legal = matches!(ls.tag(from), Tag::Begin(y) | Tag::Inside(y) if y == x);
            if !legal {
                out.scores[from * n + to] = FORBIDDEN;
            }
        }
    }
    out
}
