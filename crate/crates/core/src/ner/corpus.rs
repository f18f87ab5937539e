//! Reader for the labeled NER corpus: `<token> TAB <tag>` per line, blank
//! line between sentences.

use std::io::BufRead;

use super::{check_bio, types_in_tags, LabelSet, NerError, Tag};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledSentence {
    pub tokens: Vec<String>,
    pub tags: Vec<String>,
}

pub fn read_corpus<R: BufRead>(source: R) -> Result<Vec<LabeledSentence>, NerError> {
    let mut sentences = Vec::new();
    let mut current = LabeledSentence {
        tokens: Vec::new(),
        tags: Vec::new(),
    };
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() {
            if !current.tokens.is_empty() {
                sentences.push(std::mem::replace(
                    &mut current,
                    LabeledSentence {
                        tokens: Vec::new(),
                        tags: Vec::new(),
                    },
                ));
            }
            continue;
        }
        let malformed = |reason: &str| NerError::MalformedCorpus {
            line: i + 1,
            reason: reason.to_string(),
        };
        let (token, tag) = line
            .split_once('\t')
            .ok_or_else(|| malformed("expected `<token>\\t<tag>`"))?;
        if token.is_empty() || Tag::parse(tag).is_none() {
            return Err(malformed("empty token or non-BIO tag"));
        }
        current.tokens.push(token.to_string());
        current.tags.push(tag.to_string());
    }
    if !current.tokens.is_empty() {
        sentences.push(current);
    }
    Ok(sentences)
}

/// Label set covering every entity type in the corpus, with gold tags
/// converted to indices and checked for BIO validity.
pub fn index_corpus(
    sentences: &[LabeledSentence],
) -> Result<(LabelSet, Vec<Vec<usize>>), NerError> {
    let types = sentences
        .iter()
        .flat_map(|s| types_in_tags(&s.tags))
        .collect::<std::collections::BTreeSet<_>>();
    let ls = LabelSet::from_types(types);
    let gold = sentences
        .iter()
        .map(|s| {
            let tags = ls.indices(&s.tags)?;
            check_bio(&tags, &ls)?;
            Ok(tags)
        })
        .collect::<Result<Vec<_>, NerError>>()?;
    Ok((ls, gold))
}
