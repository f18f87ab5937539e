//! Structured-perceptron training of emission weights and transition
//! scores.

use super::{
    check_bio, constrain_bio, viterbi, EmissionModel, LabelSet, Lexicon, NerError, TransitionMatrix,
};

/// Parameters after the final epoch plus the number of mis-decoded
/// sentences seen in each epoch.
#[derive(Debug, Clone)]
pub struct TrainedTagger {
    pub emission: EmissionModel,
    pub transitions: TransitionMatrix,
    pub mistakes_per_epoch: Vec<usize>,
}

/// Trains over `corpus` in the given order for `epochs` passes.
///
/// Each sentence is decoded under the BIO constraints. When the prediction
/// differs from gold, gold features and transitions gain +1 and predicted
/// ones lose 1. No shuffling, no averaging.
pub fn train_perceptron<T: AsRef<str>>(
    corpus: &[(Vec<T>, Vec<usize>)],
    ls: &LabelSet,
    epochs: usize,
    lexicon: Option<Lexicon>,
) -> Result<TrainedTagger, NerError> {
    if corpus.is_empty() {
        return Err(NerError::EmptyCorpus);
    }
    let k = ls.len();
    for (tokens, gold) in corpus {
        if tokens.len() != gold.len() {
            return Err(NerError::LengthMismatch {
                tokens: tokens.len(),
                tags: gold.len(),
            });
        }
        if tokens.is_empty() {
            return Err(NerError::EmptySentence);
        }
        check_bio(gold, ls)?;
    }

    let mut emission = EmissionModel::new(lexicon);
    let mut transitions = TransitionMatrix::zeros(k);
    let mut mistakes_per_epoch = Vec::with_capacity(epochs);
    for _ in 0..epochs {
        let mut mistakes = 0;
        for (tokens, gold) in corpus {
            let scores = emission.score(tokens, ls)?;
            let predicted = viterbi(&scores, &constrain_bio(&transitions, ls))?.tags;
            if predicted == *gold {
                continue;
            }
            mistakes += 1;
            for (path, delta) in [(gold, 1.0), (&predicted, -1.0)] {
                let mut prev = transitions.start();
                for (t, &y) in path.iter().enumerate() {
                    for f in emission.features(tokens, t) {
                        emission.add_weight(&f, y, k, delta);
                    }
                    transitions.add(prev, y, delta);
                    prev = y;
                }
                transitions.add(prev, transitions.stop(), delta);
            }
        }
        mistakes_per_epoch.push(mistakes);
    }
    Ok(TrainedTagger {
        emission,
        transitions,
        mistakes_per_epoch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ner::{decode_mentions, TagSequence};

    #[test]
    fn empty_corpus() {
        let ls = LabelSet::from_types(["drug"]);
        let corpus: Vec<(Vec<&str>, Vec<usize>)> = vec![];
        assert!(matches!(
            train_perceptron(&corpus, &ls, 3, None),
            Err(NerError::EmptyCorpus)
        ));
    }

    #[test]
    fn invalid_gold_rejected() {
        let ls = LabelSet::from_types(["drug"]);
        let corpus = vec![(vec!["a"], vec![2])];
        assert!(matches!(
            train_perceptron(&corpus, &ls, 1, None),
            Err(NerError::InvalidBioSequence { .. })
        ));
    }

    #[test]
    fn already_decoded_corpus_is_a_fixed_point() {
        // all-O gold equals the zero-weight decode (smallest index path)
        let ls = LabelSet::from_types(["drug"]);
        let corpus = vec![(vec!["a", "b"], vec![0, 0]), (vec!["c"], vec![0])];
        let trained = train_perceptron(&corpus, &ls, 10, None).unwrap();
        assert!(trained.emission.weights().is_empty());
        assert_eq!(trained.transitions, TransitionMatrix::zeros(ls.len()));
        assert!(trained.mistakes_per_epoch.iter().all(|&m| m == 0));
    }

    #[test]
    fn single_sentence_converges_fast() {
        let ls = LabelSet::from_types(["drug"]);
        let tokens = vec!["patients", "took", "liposomal", "doxorubicin", "daily"];
        let gold = ls.indices(&["O", "O", "B-drug", "I-drug", "O"]).unwrap();
        let corpus = vec![(tokens.clone(), gold.clone())];
        let trained = train_perceptron(&corpus, &ls, 5, None).unwrap();
        let scores = trained.emission.score(&tokens, &ls).unwrap();
        let path = viterbi(&scores, &constrain_bio(&trained.transitions, &ls)).unwrap();
        assert_eq!(path.tags, gold);
        assert_eq!(*trained.mistakes_per_epoch.last().unwrap(), 0);
        let m = decode_mentions(
            &tokens,
            &TagSequence {
                tags: path.tags,
                score: 0.0,
            },
            &ls,
        )
        .unwrap();
        assert_eq!(m[0].text, "liposomal doxorubicin");
    }

    #[test]
    fn training_is_deterministic() {
        let ls = LabelSet::from_types(["drug", "disease"]);
        let corpus = vec![
            (
                vec!["sorafenib", "treats", "HCC"],
                ls.indices(&["B-drug", "O", "B-disease"]).unwrap(),
            ),
            (
                vec!["HCC", "needs", "lenvatinib"],
                ls.indices(&["B-disease", "O", "B-drug"]).unwrap(),
            ),
        ];
        let a = train_perceptron(&corpus, &ls, 7, None).unwrap();
        let b = train_perceptron(&corpus, &ls, 7, None).unwrap();
        assert_eq!(a.emission, b.emission);
        assert_eq!(a.transitions, b.transitions);
    }
}
