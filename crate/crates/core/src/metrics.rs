//! Evaluation metrics: exact match, precision/recall/F1, MRR, BLEU,
//! ROUGE-N, ROUGE-L, and a dataset scorer that runs the engine.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::io::BufRead;

use serde::Deserialize;
use thiserror::Error;

use crate::engine::{AnswerStatus, Engine};
use crate::text::{normalize, normalized_terms};

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("metric undefined: {0}")]
    UndefinedMetric(&'static str),
    #[error("candidate is empty")]
    EmptyCandidate,
    #[error("no references given")]
    NoReferences,
    #[error("reference shorter than n = {0}")]
    ReferenceTooShort(usize),
    #[error("reference is empty")]
    EmptyReference,
    #[error("rank must be at least 1")]
    InvalidRank,
    #[error("dataset line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl std::ops::AddAssign for ConfusionCounts {
    fn add_assign(&mut self, o: Self) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
    }
}

pub fn precision(c: ConfusionCounts) -> Result<f64, MetricError> {
    match c.tp + c.fp {
        0 => Err(MetricError::UndefinedMetric("precision with tp + fp = 0")),
        d => Ok(c.tp as f64 / d as f64),
    }
}

pub fn recall(c: ConfusionCounts) -> Result<f64, MetricError> {
    match c.tp + c.fn_ {
        0 => Err(MetricError::UndefinedMetric("recall with tp + fn = 0")),
        d => Ok(c.tp as f64 / d as f64),
    }
}

/// Harmonic mean, 0 when both inputs are 0.
pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Trimmed, NFC-composed, lowercased string used for answer comparison.
pub fn normalize_answer(s: &str) -> String {
    normalize(s.trim())
}

/// One scored question: gold answers, ranked predictions and optional
/// texts for the generation metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub question: String,
    pub gold_answers: Vec<String>,
    pub predicted: Vec<String>,
    pub predicted_text: Option<String>,
    pub reference_text: Option<String>,
}

impl EvalRecord {
    fn gold_set(&self) -> BTreeSet<String> {
        self.gold_answers
            .iter()
            .map(|g| normalize_answer(g))
            .collect()
    }

    pub fn top1_correct(&self) -> bool {
        self.predicted
            .first()
            .is_some_and(|p| self.gold_set().contains(&normalize_answer(p)))
    }

    /// 1-based rank of the first correct prediction.
    pub fn first_correct_rank(&self) -> Option<usize> {
        let gold = self.gold_set();
        self.predicted
            .iter()
            .position(|p| gold.contains(&normalize_answer(p)))
            .map(|i| i + 1)
    }

    /// Answer-set confusion counts (duplicates collapse).
    pub fn confusion(&self) -> ConfusionCounts {
        let gold = self.gold_set();
        let pred: BTreeSet<String> = self.predicted.iter().map(|p| normalize_answer(p)).collect();
        let tp = gold.intersection(&pred).count();
        ConfusionCounts {
            tp,
            fp: pred.len() - tp,
            fn_: gold.len() - tp,
        }
    }
}

/// Fraction of records whose top-1 prediction matches a gold answer.
pub fn exact_match(records: &[EvalRecord]) -> Result<f64, MetricError> {
    if records.is_empty() {
        return Err(MetricError::EmptyDataset);
    }
    let right = records.iter().filter(|r| r.top1_correct()).count();
    Ok(right as f64 / records.len() as f64)
}

/// Mean reciprocal rank; a missing rank contributes 0.
pub fn mrr(ranks: &[Option<usize>]) -> Result<f64, MetricError> {
    if ranks.is_empty() {
        return Err(MetricError::EmptyDataset);
    }
    let mut total = 0.0;
    for r in ranks {
        match r {
            Some(0) => return Err(MetricError::InvalidRank),
            Some(r) => total += 1.0 / *r as f64,
            None => {}
        }
    }
    Ok(total / ranks.len() as f64)
}

fn ngram_counts<T: AsRef<str>>(tokens: &[T], n: usize) -> HashMap<Vec<&str>, usize> {
    let mut counts = HashMap::new();
    if n == 0 || tokens.len() < n {
        return counts;
    }
    for w in tokens.windows(n) {
        *counts
            .entry(w.iter().map(AsRef::as_ref).collect())
            .or_insert(0) += 1;
    }
    counts
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BleuOptions {
    pub max_n: usize,
    /// Add-one smoothing of the precisions for n >= 2.
    pub smoothing: bool,
}

impl Default for BleuOptions {
    fn default() -> Self {
        BleuOptions {
            max_n: 4,
            smoothing: false,
        }
    }
}

/// Sentence BLEU: geometric mean of clipped n-gram precisions times the
/// brevity penalty against the closest reference length.
pub fn bleu<C: AsRef<str>, R: AsRef<str>>(
    candidate: &[C],
    references: &[Vec<R>],
    opts: BleuOptions,
) -> Result<f64, MetricError> {
    if candidate.is_empty() {
        return Err(MetricError::EmptyCandidate);
    }
    if references.is_empty() {
        return Err(MetricError::NoReferences);
    }
    let mut log_sum = 0.0;
    for n in 1..=opts.max_n {
        let cand = ngram_counts(candidate, n);
        let mut max_ref: HashMap<&Vec<&str>, usize> = HashMap::new();
        for r in references {
            let counts = ngram_counts(r, n);
            for g in cand.keys() {
                let c = counts.get(g).copied().unwrap_or(0);
                let slot = max_ref.entry(g).or_insert(0);
                *slot = (*slot).max(c);
            }
        }
        let clipped: usize = cand.iter().map(|(g, c)| (*c).min(max_ref[g])).sum();
        let total: usize = cand.values().sum();
        let (num, den) = if opts.smoothing && n >= 2 {
            (clipped as f64 + 1.0, total as f64 + 1.0)
        } else {
            (clipped as f64, total as f64)
        };
        if num == 0.0 || den == 0.0 {
            return Ok(0.0);
        }
        log_sum += (num / den).ln();
    }
    let c = candidate.len() as f64;
    // closest reference length, shorter wins ties
    let r = references
        .iter()
        .map(|r| r.len())
        .min_by_key(|&len| ((len as i64 - candidate.len() as i64).abs(), len))
        .unwrap() as f64;
    let bp = if c > r { 1.0 } else { (1.0 - r / c).exp() };
    Ok((bp * (log_sum / opts.max_n as f64).exp()).clamp(0.0, 1.0))
}

/// Recall-oriented ROUGE-N: clipped overlapping n-grams over reference
/// n-grams.
pub fn rouge_n<C: AsRef<str>, R: AsRef<str>>(
    candidate: &[C],
    reference: &[R],
    n: usize,
) -> Result<f64, MetricError> {
    if n == 0 || reference.len() < n {
        return Err(MetricError::ReferenceTooShort(n));
    }
    let cand = ngram_counts(candidate, n);
    let refc = ngram_counts(reference, n);
    let overlap: usize = refc
        .iter()
        .map(|(g, c)| (*c).min(cand.get(g).copied().unwrap_or(0)))
        .sum();
    let total: usize = refc.values().sum();
    Ok(overlap as f64 / total as f64)
}

fn lcs_len<C: AsRef<str>, R: AsRef<str>>(a: &[C], b: &[R]) -> usize {
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        let mut diag = 0;
        for (j, y) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x.as_ref() == y.as_ref() {
                diag + 1
            } else {
                up.max(row[j])
            };
            diag = up;
        }
    }
    row[b.len()]
}

/// Recall-oriented ROUGE-L: LCS length over reference length.
pub fn rouge_l<C: AsRef<str>, R: AsRef<str>>(
    candidate: &[C],
    reference: &[R],
) -> Result<f64, MetricError> {
    if reference.is_empty() {
        return Err(MetricError::EmptyReference);
    }
    Ok(lcs_len(candidate, reference) as f64 / reference.len() as f64)
}

/// One line of the evaluation dataset file.
#[derive(Debug, Clone, Deserialize)]
pub struct DatasetItem {
    pub question: String,
    pub gold: Vec<String>,
    #[serde(default)]
    pub reference_text: Option<String>,
}

/// Reads JSON-lines records; blank lines are skipped.
pub fn read_dataset<R: BufRead>(source: R) -> Result<Vec<DatasetItem>, MetricError> {
    let mut items = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let item: DatasetItem =
            serde_json::from_str(&line).map_err(|e| MetricError::MalformedRecord {
                line: i + 1,
                reason: e.to_string(),
            })?;
        if item.gold.is_empty() {
            return Err(MetricError::MalformedRecord {
                line: i + 1,
                reason: "gold must list at least one answer".into(),
            });
        }
        items.push(item);
    }
    Ok(items)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScoreOptions {
    pub bleu: BleuOptions,
    pub rouge_n: usize,
}

impl Default for ScoreOptions {
    fn default() -> Self {
        ScoreOptions {
            bleu: BleuOptions::default(),
            rouge_n: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecordScore {
    pub record: EvalRecord,
    pub status: AnswerStatus,
    pub exact: bool,
    pub rank: Option<usize>,
    pub bleu: Option<f64>,
    pub rouge_n: Option<f64>,
    pub rouge_l: Option<f64>,
}

/// Aggregate scores. A metric whose inputs are absent or undefined is
/// `None` and is left out of the rendered report.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub em: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub mrr: Option<f64>,
    pub bleu: Option<f64>,
    pub rouge_n: Option<f64>,
    pub rouge_l: Option<f64>,
    pub counts: ConfusionCounts,
    pub rouge_order: usize,
    pub records: Vec<RecordScore>,
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Answers every item with `engine` and scores the output. Precision,
/// recall and F1 are micro-averaged over answer sets.
pub fn score_dataset(
    items: &[DatasetItem],
    engine: &Engine,
    opts: ScoreOptions,
) -> Result<MetricReport, MetricError> {
    if items.is_empty() {
        return Err(MetricError::EmptyDataset);
    }
    let mut records = Vec::with_capacity(items.len());
    for item in items {
        let answer = engine.answer(&item.question);
        let record = EvalRecord {
            question: item.question.clone(),
            gold_answers: item.gold.clone(),
            predicted: answer.entity_names.clone(),
            predicted_text: Some(answer.text.clone()),
            reference_text: item.reference_text.clone(),
        };
        let (mut b, mut rn, mut rl) = (None, None, None);
        if let (Some(pred), Some(reference)) = (&record.predicted_text, &record.reference_text) {
            let cand = normalized_terms(pred);
            let refs = normalized_terms(reference);
            b = bleu(&cand, std::slice::from_ref(&refs), opts.bleu).ok();
            rn = rouge_n(&cand, &refs, opts.rouge_n).ok();
            rl = rouge_l(&cand, &refs).ok();
        }
        records.push(RecordScore {
            exact: record.top1_correct(),
            rank: record.first_correct_rank(),
            status: answer.status,
            bleu: b,
            rouge_n: rn,
            rouge_l: rl,
            record,
        });
    }
    let evals: Vec<EvalRecord> = records.iter().map(|r| r.record.clone()).collect();
    let ranks: Vec<Option<usize>> = records.iter().map(|r| r.rank).collect();
    let mut counts = ConfusionCounts::default();
    for r in &evals {
        counts += r.confusion();
    }
    let p = precision(counts).ok();
    let r = recall(counts).ok();
    let collect =
        |f: fn(&RecordScore) -> Option<f64>| records.iter().filter_map(f).collect::<Vec<_>>();
    Ok(MetricReport {
        em: Some(exact_match(&evals)?),
        precision: p,
        recall: r,
        f1: p.zip(r).map(|(p, r)| f1(p, r)),
        mrr: Some(mrr(&ranks)?),
        bleu: mean(&collect(|r| r.bleu)),
        rouge_n: mean(&collect(|r| r.rouge_n)),
        rouge_l: mean(&collect(|r| r.rouge_l)),
        counts,
        rouge_order: opts.rouge_n,
        records,
    })
}

impl MetricReport {
    /// Named values in report order, absent metrics skipped.
    pub fn values(&self) -> Vec<(String, f64)> {
        [
            ("em".to_string(), self.em),
            ("precision".to_string(), self.precision),
            ("recall".to_string(), self.recall),
            ("f1".to_string(), self.f1),
            ("mrr".to_string(), self.mrr),
            ("bleu".to_string(), self.bleu),
            (format!("rouge_{}", self.rouge_order), self.rouge_n),
            ("rouge_l".to_string(), self.rouge_l),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.map(|v| (k, v)))
        .collect()
    }

    /// Per-record table followed by one `metric=<name> value=<decimal>`
    /// line per metric.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:>3}  {:<18} {:>5} {:>4}  question",
            "#", "status", "exact", "rank"
        );
        for (i, r) in self.records.iter().enumerate() {
            let rank = r.rank.map_or("-".to_string(), |x| x.to_string());
            let _ = writeln!(
                out,
                "{:>3}  {:<18} {:>5} {:>4}  {}",
                i + 1,
                r.status.as_str(),
                if r.exact { "yes" } else { "no" },
                rank,
                r.record.question
            );
        }
        let _ = writeln!(
            out,
            "counts tp={} fp={} fn={}",
            self.counts.tp, self.counts.fp, self.counts.fn_
        );
        for (name, value) in self.values() {
            let _ = writeln!(out, "metric={name} value={value:.6}");
        }
        out
    }
}
