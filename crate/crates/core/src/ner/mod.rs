//! Entity-mention recognition.
//!
//! Two recognizers share the [`EntityMention`] output type: a longest-match
//! [`gazetteer`] over knowledge-graph names, and a linear-chain CRF layer
//! ([`crf`]) whose emission scores come from a feature-based linear model
//! ([`features`]) trained with a structured perceptron ([`perceptron`]).

pub mod corpus;
pub mod crf;
pub mod features;
pub mod gazetteer;
pub mod perceptron;

use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crf::{constrain_bio, path_score, viterbi, EmissionScores, TransitionMatrix, FORBIDDEN};
pub use features::{EmissionModel, Lexicon};
pub use gazetteer::{gazetteer_tag, Gazetteer};
pub use perceptron::{train_perceptron, TrainedTagger};

use crate::metrics::ConfusionCounts;

#[derive(Debug, Error)]
pub enum NerError {
    #[error("invalid label set: {0}")]
    InvalidLabelSet(String),
    #[error("unknown label {0:?}")]
    UnknownLabel(String),
    #[error("expected {expected} labels, found {found}")]
    LabelCountMismatch { expected: usize, found: usize },
    #[error("sentence has {tokens} tokens but {tags} tags")]
    LengthMismatch { tokens: usize, tags: usize },
    #[error("empty sentence")]
    EmptySentence,
    #[error("non-finite score in {0}")]
    NonFinite(&'static str),
    #[error("every label path is forbidden by the transition scores")]
    NoFeasiblePath,
    #[error("{tag} at position {position} has no compatible predecessor")]
    InvalidBioSequence { position: usize, tag: String },
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("corpus line {line}: {reason}")]
    MalformedCorpus { line: usize, reason: String },
    #[error("model file: {0}")]
    Model(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tag<'a> {
    Outside,
    Begin(&'a str),
    Inside(&'a str),
}

impl<'a> Tag<'a> {
    pub fn parse(label: &'a str) -> Option<Tag<'a>> {
        if label == "O" {
            return Some(Tag::Outside);
        }
        let (prefix, etype) = label.split_once('-')?;
        if etype.is_empty() {
            return None;
        }
        match prefix {
            "B" => Some(Tag::Begin(etype)),
            "I" => Some(Tag::Inside(etype)),
            _ => None,
        }
    }
}

/// Ordered BIO labels. Index `k` is the START pseudo-state and `k + 1` STOP.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct LabelSet {
    labels: Vec<String>,
}

impl TryFrom<Vec<String>> for LabelSet {
    type Error = NerError;
    fn try_from(labels: Vec<String>) -> Result<Self, NerError> {
        LabelSet::new(labels)
    }
}

impl From<LabelSet> for Vec<String> {
    fn from(ls: LabelSet) -> Self {
        ls.labels
    }
}

impl LabelSet {
    pub fn new(labels: Vec<String>) -> Result<Self, NerError> {
        if labels.is_empty() {
            return Err(NerError::InvalidLabelSet("no labels".into()));
        }
        let distinct: BTreeSet<&String> = labels.iter().collect();
        if distinct.len() != labels.len() {
            return Err(NerError::InvalidLabelSet("duplicate labels".into()));
        }
        if let Some(bad) = labels.iter().find(|l| Tag::parse(l).is_none()) {
            return Err(NerError::InvalidLabelSet(format!("{bad:?} is not BIO")));
        }
        Ok(LabelSet { labels })
    }

    /// `O` followed by `B-X`, `I-X` for each type in sorted order.
    pub fn from_types<I, S>(types: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let types: BTreeSet<String> = types.into_iter().map(|s| s.as_ref().to_string()).collect();
        let mut labels = vec!["O".to_string()];
        for t in types {
            labels.push(format!("B-{t}"));
            labels.push(format!("I-{t}"));
        }
        LabelSet { labels }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn start_index(&self) -> usize {
        self.labels.len()
    }

    pub fn stop_index(&self) -> usize {
        self.labels.len() + 1
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn tag(&self, i: usize) -> Tag<'_> {
        Tag::parse(&self.labels[i]).expect("validated at construction")
    }

    pub fn index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn indices<S: AsRef<str>>(&self, labels: &[S]) -> Result<Vec<usize>, NerError> {
        labels
            .iter()
            .map(|l| {
                self.index(l.as_ref())
                    .ok_or_else(|| NerError::UnknownLabel(l.as_ref().to_string()))
            })
            .collect()
    }
}

/// A decoded label path and its total score.
#[derive(Debug, Clone, PartialEq)]
pub struct TagSequence {
    pub tags: Vec<usize>,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EntityMention {
    pub text: String,
    pub label: String,
    /// First and last token index, inclusive.
    pub span: (usize, usize),
    /// Set when the mention was linked to a knowledge-graph entity.
    pub entity_id: Option<String>,
}

impl EntityMention {
    /// `[surface, label]`, the form printed by the CLI.
    pub fn bracketed(&self) -> String {
        format!("[{}, {}]", self.text, self.label)
    }
}

/// Checks BIO legality: every `I-X` follows `B-X` or `I-X`.
pub fn check_bio(tags: &[usize], ls: &LabelSet) -> Result<(), NerError> {
    let mut prev = Tag::Outside;
    for (position, &t) in tags.iter().enumerate() {
        if t >= ls.len() {
            return Err(NerError::UnknownLabel(format!("index {t}")));
        }
        let tag = ls.tag(t);
        if let Tag::Inside(x) = tag {
            let ok = matches!(prev, Tag::Begin(y) | Tag::Inside(y) if y == x);
            if !ok {
                return Err(NerError::InvalidBioSequence {
                    position,
                    tag: ls.label(t).to_string(),
                });
            }
        }
        prev = tag;
    }
    Ok(())
}

/// Turns each maximal `B-X (I-X)*` run into a mention labeled `X`.
pub fn decode_mentions<T: AsRef<str>>(
    tokens: &[T],
    ts: &TagSequence,
    ls: &LabelSet,
) -> Result<Vec<EntityMention>, NerError> {
    if tokens.len() != ts.tags.len() {
        return Err(NerError::LengthMismatch {
            tokens: tokens.len(),
            tags: ts.tags.len(),
        });
    }
    check_bio(&ts.tags, ls)?;
    let mut mentions = Vec::new();
    let mut open: Option<(usize, &str)> = None;
    let close = |open: Option<(usize, &str)>, end: usize, out: &mut Vec<EntityMention>| {
        if let Some((start, label)) = open {
            let text = tokens[start..end]
                .iter()
                .map(AsRef::as_ref)
                .collect::<Vec<_>>()
                .join(" ");
            out.push(EntityMention {
                text,
                label: label.to_string(),
                span: (start, end - 1),
                entity_id: None,
            });
        }
    };
    for (i, &t) in ts.tags.iter().enumerate() {
        match ls.tag(t) {
            Tag::Inside(_) => {}
            Tag::Begin(x) => {
                close(open.take(), i, &mut mentions);
                open = Some((i, x));
            }
            Tag::Outside => close(open.take(), i, &mut mentions),
        }
    }
    close(open, tokens.len(), &mut mentions);
    Ok(mentions)
}

/// Inverse of [`decode_mentions`] for non-overlapping mentions.
pub fn encode_mentions(
    len: usize,
    mentions: &[EntityMention],
    ls: &LabelSet,
) -> Result<Vec<usize>, NerError> {
    let outside = ls
        .index("O")
        .ok_or_else(|| NerError::UnknownLabel("O".into()))?;
    let mut tags = vec![outside; len];
    for m in mentions {
        let b = format!("B-{}", m.label);
        let i = format!("I-{}", m.label);
        tags[m.span.0] = ls.index(&b).ok_or(NerError::UnknownLabel(b))?;
        for slot in &mut tags[m.span.0 + 1..=m.span.1] {
            *slot = ls
                .index(&i)
                .ok_or_else(|| NerError::UnknownLabel(i.clone()))?;
        }
    }
    Ok(tags)
}

/// Span-and-label agreement between gold and predicted mentions.
pub fn mention_confusion(gold: &[EntityMention], predicted: &[EntityMention]) -> ConfusionCounts {
    let key = |m: &EntityMention| (m.span, m.label.clone());
    let g: BTreeSet<_> = gold.iter().map(key).collect();
    let p: BTreeSet<_> = predicted.iter().map(key).collect();
    let tp = g.intersection(&p).count();
    ConfusionCounts {
        tp,
        fp: p.len() - tp,
        fn_: g.len() - tp,
    }
}

/// A trained CRF tagger: label set, emission model and transition scores.
/// Decoding always applies the BIO constraints.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NerModel {
    pub labels: LabelSet,
    pub emission: EmissionModel,
    pub transitions: TransitionMatrix,
}

impl NerModel {
    pub fn from_trained(labels: LabelSet, trained: TrainedTagger) -> Self {
        NerModel {
            labels,
            emission: trained.emission,
            transitions: trained.transitions,
        }
    }

    /// Mention-level agreement with the gold tags of `sentences`, summed.
    pub fn evaluate(
        &self,
        sentences: &[corpus::LabeledSentence],
    ) -> Result<ConfusionCounts, NerError> {
        let mut total = ConfusionCounts::default();
        for s in sentences {
            let gold_tags = self.labels.indices(&s.tags)?;
            let gold = decode_mentions(
                &s.tokens,
                &TagSequence {
                    tags: gold_tags,
                    score: 0.0,
                },
                &self.labels,
            )?;
            total += mention_confusion(&gold, &self.tag(&s.tokens)?);
        }
        Ok(total)
    }

    pub fn tag<T: AsRef<str>>(&self, tokens: &[T]) -> Result<Vec<EntityMention>, NerError> {
        if tokens.is_empty() {
            return Ok(Vec::new());
        }
        let scores = self.emission.score(tokens, &self.labels)?;
        let constrained = constrain_bio(&self.transitions, &self.labels);
        let path = viterbi(&scores, &constrained)?;
        decode_mentions(tokens, &path, &self.labels)
    }

    pub fn save<W: Write>(&self, out: W) -> Result<(), NerError> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }

    pub fn load<R: BufRead>(source: R) -> Result<Self, NerError> {
        let model: NerModel = serde_json::from_reader(source)?;
        let k = model.labels.len();
        if model.transitions.label_count() != k {
            return Err(NerError::LabelCountMismatch {
                expected: k,
                found: model.transitions.label_count(),
            });
        }
        if let Some(bad) = model.emission.weights().values().find(|w| w.len() != k) {
            return Err(NerError::LabelCountMismatch {
                expected: k,
                found: bad.len(),
            });
        }
        Ok(model)
    }
}

/// Entity types appearing in a set of BIO tags.
pub fn types_in_tags<S: AsRef<str>>(tags: &[S]) -> BTreeSet<String> {
    tags.iter()
        .filter_map(|t| match Tag::parse(t.as_ref())? {
            Tag::Begin(x) | Tag::Inside(x) => Some(x.to_string()),
            Tag::Outside => None,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ls() -> LabelSet {
        LabelSet::from_types(["disease", "drug"])
    }

    fn seq(ls: &LabelSet, labels: &[&str]) -> TagSequence {
        TagSequence {
            tags: ls.indices(labels).unwrap(),
            score: 0.0,
        }
    }

    #[test]
    fn label_set_layout() {
        let ls = ls();
        assert_eq!(
            ls.labels(),
            ["O", "B-disease", "I-disease", "B-drug", "I-drug"]
        );
        assert_eq!((ls.start_index(), ls.stop_index()), (5, 6));
        assert!(LabelSet::new(vec![]).is_err());
        assert!(LabelSet::new(vec!["O".into(), "O".into()]).is_err());
        assert!(LabelSet::new(vec!["X-drug".into()]).is_err());
        assert!(LabelSet::new(vec!["B-".into()]).is_err());
    }

    #[test]
    fn decode_single_mention() {
        let ls = ls();
        let m = decode_mentions(&["AIDS"], &seq(&ls, &["B-disease"]), &ls).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].bracketed(), "[AIDS, disease]");
        assert_eq!(m[0].span, (0, 0));
    }

    #[test]
    fn decode_all_outside() {
        let ls = ls();
        let m = decode_mentions(&["a", "b"], &seq(&ls, &["O", "O"]), &ls).unwrap();
        assert!(m.is_empty());
    }

    #[test]
    fn decode_merges_runs() {
        let ls = ls();
        let toks = ["liposomal", "doxorubicin", "?"];
        let m = decode_mentions(&toks, &seq(&ls, &["B-drug", "I-drug", "O"]), &ls).unwrap();
        assert_eq!(m[0].text, "liposomal doxorubicin");
        assert_eq!(m[0].label, "drug");
        assert_eq!(m[0].span, (0, 1));
    }

    #[test]
    fn decode_adjacent_begins() {
        let ls = ls();
        let m = decode_mentions(&["a", "b"], &seq(&ls, &["B-drug", "B-drug"]), &ls).unwrap();
        assert_eq!(m.len(), 2);
    }

    #[test]
    fn decode_rejects_orphan_inside() {
        let ls = ls();
        for tags in [&["I-drug"][..], &["O", "I-drug"], &["B-disease", "I-drug"]] {
            let err = decode_mentions(&vec!["x"; tags.len()], &seq(&ls, tags), &ls).unwrap_err();
            assert!(matches!(err, NerError::InvalidBioSequence { .. }));
        }
    }

    fn mention_lists() -> impl Strategy<Value = (usize, Vec<EntityMention>)> {
        prop::collection::vec((0usize..3, 1usize..4, any::<bool>()), 0..5).prop_map(|parts| {
            let mut cursor = 0;
            let mut mentions = Vec::new();
            for (gap, len, drug) in parts {
                let start = cursor + gap;
                let end = start + len - 1;
                mentions.push(EntityMention {
                    text: (start..=end)
                        .map(|i| format!("w{i}"))
                        .collect::<Vec<_>>()
                        .join(" "),
                    label: if drug { "drug" } else { "disease" }.into(),
                    span: (start, end),
                    entity_id: None,
                });
                cursor = end + 1;
            }
            (cursor + 1, mentions)
        })
    }

    proptest! {
        #[test]
        fn encode_decode_roundtrip((len, mentions) in mention_lists()) {
            let ls = ls();
            let tokens: Vec<String> = (0..len).map(|i| format!("w{i}")).collect();
            let tags = encode_mentions(len, &mentions, &ls).unwrap();
            let decoded = decode_mentions(&tokens, &TagSequence { tags, score: 0.0 }, &ls).unwrap();
            prop_assert_eq!(decoded, mentions);
        }
    }

    #[test]
    fn confusion_of_mentions() {
        let m = |s, e, l: &str| EntityMention {
            text: String::new(),
            label: l.into(),
            span: (s, e),
            entity_id: None,
        };
        let c = mention_confusion(
            &[m(0, 0, "drug"), m(2, 3, "disease")],
            &[m(0, 0, "drug"), m(2, 2, "disease")],
        );
        assert_eq!((c.tp, c.fp, c.fn_), (1, 1, 1));
    }
}
