//! Tokenization and normalization.
//!
//! Tokens keep their original casing; matching code lowercases through
//! [`normalize`] at comparison time so surface forms like "AIDS" can be
//! reported verbatim.

use unicode_normalization::UnicodeNormalization;

/// A token with character offsets into its source string.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Token {
    pub text: String,
    /// Character (not byte) offset of the first char.
    pub start: usize,
    /// Exclusive character offset.
    pub end: usize,
}

impl AsRef<str> for Token {
    fn as_ref(&self) -> &str {
        &self.text
    }
}

fn is_edge_punct(c: char) -> bool {
    matches!(
        c,
        '.' | ',' | '?' | '!' | ';' | ':' | '(' | ')' | '[' | ']' | '"' | '\''
    )
}

/// Splits on whitespace, then peels ASCII punctuation off both edges of each
/// chunk, one token per punctuation character. Hyphens, digits and inner
/// punctuation stay inside the token.
pub fn tokenize(source: &str) -> Vec<Token> {
    let chars: Vec<char> = source.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        while i < chars.len() && !chars[i].is_whitespace() {
            i += 1;
        }
        split_chunk(&chars, start, i, &mut tokens);
    }
    tokens
}

fn split_chunk(chars: &[char], start: usize, end: usize, out: &mut Vec<Token>) {
    let mut lo = start;
    let mut hi = end;
    while lo < hi && is_edge_punct(chars[lo]) {
        lo += 1;
    }
    while hi > lo && is_edge_punct(chars[hi - 1]) {
        hi -= 1;
    }
    let make = |s: usize, e: usize| Token {
        text: chars[s..e].iter().collect(),
        start: s,
        end: e,
    };
    out.extend((start..lo).map(|p| make(p, p + 1)));
    if lo < hi {
        out.push(make(lo, hi));
    }
    out.extend((hi..end).map(|p| make(p, p + 1)));
}

/// Unicode NFC composition followed by lowercasing.
///
/// Punctuation is left alone; only [`tokenize`] detaches it.
pub fn normalize(text: &str) -> String {
    // Lowercasing can emit decomposed sequences, so recompose afterwards to
    // keep the function idempotent.
    text.nfc()
        .collect::<String>()
        .to_lowercase()
        .nfc()
        .collect()
}

/// Tokenizes and normalizes in one step, dropping offsets.
pub fn normalized_terms(source: &str) -> Vec<String> {
    tokenize(source)
        .iter()
        .map(|t| normalize(&t.text))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn texts(s: &str) -> Vec<String> {
        tokenize(s).into_iter().map(|t| t.text).collect()
    }

    #[test]
    fn detaches_trailing_question_mark() {
        assert_eq!(texts("aids?"), ["aids", "?"]);
    }

    #[test]
    fn empty_input() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("   \t ").is_empty());
    }

    #[test]
    fn example_question() {
        assert_eq!(
            texts("Which medicine can treat AIDS?"),
            ["Which", "medicine", "can", "treat", "AIDS", "?"]
        );
    }

    #[test]
    fn hyphens_and_inner_punctuation_stay() {
        assert_eq!(texts("anti-PD-1 therapy."), ["anti-PD-1", "therapy", "."]);
        assert_eq!(texts("patient's"), ["patient's"]);
        assert_eq!(texts("(B-cell,"), ["(", "B-cell", ","]);
        assert_eq!(texts("?!"), ["?", "!"]);
    }

    #[test]
    fn offsets_are_char_based() {
        let toks = tokenize("é aids?");
        assert_eq!(toks[1].start, 2);
        assert_eq!(toks[1].end, 6);
        assert_eq!(toks[2].start, 6);
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize("AIDS"), "aids");
        assert_eq!(normalize("aids"), "aids");
        assert_eq!(normalize("HCC?"), "hcc?");
        // e + combining acute composes to a single code point
        assert_eq!(normalize("E\u{301}"), "\u{e9}");
    }

    proptest! {
        #[test]
        fn segmentation_is_lossless(s in "[a-zA-Z0-9 ?.,!()'\"\\-é\t]{0,40}") {
            let chars: Vec<char> = s.chars().collect();
            let toks = tokenize(&s);
            let mut rebuilt = String::new();
            let mut cursor = 0;
            for t in &toks {
                prop_assert!(t.start < t.end);
                prop_assert!(t.start >= cursor);
                let gap: String = chars[cursor..t.start].iter().collect();
                prop_assert!(gap.chars().all(char::is_whitespace));
                rebuilt.push_str(&gap);
                let covered: String = chars[t.start..t.end].iter().collect();
                prop_assert_eq!(&covered, &t.text);
                rebuilt.push_str(&t.text);
                cursor = t.end;
            }
            rebuilt.extend(chars[cursor..].iter());
            prop_assert_eq!(rebuilt, s);
        }

        #[test]
        fn retokenizing_a_token_is_identity(s in "[a-zA-Z0-9 ?.,!()\\-]{0,40}") {
            for t in tokenize(&s) {
                let again = tokenize(&t.text);
                prop_assert_eq!(again.len(), 1);
                prop_assert_eq!(&again[0].text, &t.text);
            }
        }

        #[test]
        fn normalize_is_idempotent(s in "\\PC{0,20}") {
            let once = normalize(&s);
            prop_assert_eq!(normalize(&once), once);
        }
    }
}
