//! Feature-based emission scorer feeding the CRF layer.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{EmissionScores, LabelSet, NerError};
use crate::graph::KnowledgeGraph;
use crate::text::{normalize, normalized_terms};

/// Normalized word -> entity types whose names contain that word.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Lexicon {
    words: BTreeMap<String, BTreeSet<String>>,
}

impl Lexicon {
    pub fn from_graph(g: &KnowledgeGraph) -> Self {
        let mut words: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for e in g.entities() {
            for w in normalized_terms(&e.name) {
                words.entry(w).or_default().insert(e.etype.clone());
            }
        }
        Lexicon { words }
    }

    pub fn types_of(&self, word: &str) -> impl Iterator<Item = &str> {
        self.words
            .get(word)
            .into_iter()
            .flatten()
            .map(String::as_str)
    }
}

/// Collapses characters to X/x/d classes and squeezes repeats,
/// e.g. "TP53" -> "Xd", "anti-PD-1" -> "x-X-d".
pub fn word_shape(token: &str) -> String {
    let mut shape = String::new();
    for c in token.chars() {
        let class = if c.is_uppercase() {
            'X'
        } else if c.is_lowercase() {
            'x'
        } else if c.is_ascii_digit() {
            'd'
        } else {
            c
        };
        if !shape.ends_with(class) {
            shape.push(class);
        }
    }
    shape
}

/// Feature strings for token `t`: identity, shape, neighbours and lexicon
/// membership.
pub fn extract_features<T: AsRef<str>>(
    tokens: &[T],
    t: usize,
    lexicon: Option<&Lexicon>,
) -> Vec<String> {
    let word = normalize(tokens[t].as_ref());
    let prev = match t {
        0 => "<s>".to_string(),
        _ => normalize(tokens[t - 1].as_ref()),
    };
    let next = tokens
        .get(t + 1)
        .map_or_else(|| "</s>".to_string(), |n| normalize(n.as_ref()));
    let mut feats = vec![
        format!("tok={word}"),
        format!("shape={}", word_shape(tokens[t].as_ref())),
        format!("prev={prev}"),
        format!("next={next}"),
    ];
    if let Some(lex) = lexicon {
        feats.extend(lex.types_of(&word).map(|ty| format!("gaz={ty}")));
    }
    feats
}

/// Linear model: each feature holds one weight per label.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EmissionModel {
    weights: BTreeMap<String, Vec<f64>>,
    lexicon: Option<Lexicon>,
}

impl EmissionModel {
    pub fn new(lexicon: Option<Lexicon>) -> Self {
        EmissionModel {
            weights: BTreeMap::new(),
            lexicon,
        }
    }

    pub fn weights(&self) -> &BTreeMap<String, Vec<f64>> {
        &self.weights
    }

    pub fn lexicon(&self) -> Option<&Lexicon> {
        self.lexicon.as_ref()
    }

    pub fn weight(&self, feature: &str, label: usize) -> f64 {
        self.weights.get(feature).map_or(0.0, |w| w[label])
    }

    pub fn set_weight(&mut self, feature: &str, label: usize, k: usize, value: f64) {
        self.weights
            .entry(feature.to_string())
            .or_insert_with(|| vec![0.0; k])[label] = value;
    }

    pub(crate) fn add_weight(&mut self, feature: &str, label: usize, k: usize, delta: f64) {
        self.weights
            .entry(feature.to_string())
            .or_insert_with(|| vec![0.0; k])[label] += delta;
    }

    pub fn features<T: AsRef<str>>(&self, tokens: &[T], t: usize) -> Vec<String> {
        extract_features(tokens, t, self.lexicon.as_ref())
    }

    /// `scores[t][j]` is the sum of label-`j` weights over token `t`'s
    /// features.
    pub fn score<T: AsRef<str>>(
        &self,
        tokens: &[T],
        ls: &LabelSet,
    ) -> Result<EmissionScores, NerError> {
        let k = ls.len();
        let mut scores = EmissionScores::zeros(tokens.len(), k);
        for t in 0..tokens.len() {
            for f in self.features(tokens, t) {
                let Some(w) = self.weights.get(&f) else {
                    continue;
                };
                if w.len() != k {
                    return Err(NerError::LabelCountMismatch {
                        expected: k,
                        found: w.len(),
                    });
                }
                for (j, v) in w.iter().enumerate() {
                    scores.add(t, j, *v);
                }
            }
        }
        Ok(scores)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Entity;

    #[test]
    fn zero_model_scores_zero() {
        let ls = LabelSet::from_types(["disease"]);
        let s = EmissionModel::default().score(&["aids", "?"], &ls).unwrap();
        assert_eq!(s, EmissionScores::zeros(2, 3));
    }

    #[test]
    fn single_weight() {
        let ls = LabelSet::from_types(["disease"]);
        let b = ls.index("B-disease").unwrap();
        let mut m = EmissionModel::default();
        m.set_weight("tok=aids", b, ls.len(), 2.0);
        let s = m.score(&["aids"], &ls).unwrap();
        assert_eq!(s.row(0), [0.0, 2.0, 0.0]);
        // identical input, identical output
        assert_eq!(s, m.score(&["AIDS"], &ls).unwrap());
    }

    #[test]
    fn feature_set() {
        let mut g = KnowledgeGraph::new();
        g.add_entity(Entity::new("D1", "hepatitis B", "disease").unwrap())
            .unwrap();
        let lex = Lexicon::from_graph(&g);
        let f = extract_features(&["Treat", "hepatitis", "B"], 1, Some(&lex));
        assert_eq!(
            f,
            [
                "tok=hepatitis",
                "shape=x",
                "prev=treat",
                "next=b",
                "gaz=disease"
            ]
        );
        assert_eq!(word_shape("TP53"), "Xd");
        assert_eq!(word_shape("anti-PD-1"), "x-X-d");
        let first = extract_features(&["AIDS"], 0, None);
        assert_eq!(first[2..], ["prev=<s>", "next=</s>"]);
    }

    #[test]
    fn label_count_mismatch() {
        let mut m = EmissionModel::default();
        m.set_weight("tok=a", 0, 2, 1.0);
        let ls = LabelSet::from_types(["x"]);
        assert!(m.score(&["a"], &ls).is_err());
    }
}
