//! Question templates and similarity ranking.
//!
//! A question is first abstracted (each entity mention replaced by its
//! `<etype>` slot token) and then scored against every template as a blend
//! of TF-IDF cosine and embedding cosine:
//!
//! `alpha * cos(tfidf(q), tfidf(t)) + (1 - alpha) * cos(emb(q), emb(t))`
//!
//! The TF-IDF model is fitted on the template texts themselves.

use std::collections::HashSet;
use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use thiserror::Error;

use crate::ner::EntityMention;
use crate::text::{normalized_terms, tokenize};
use crate::vectors::{self, question_embedding, EmbeddingTable, SparseVector, TfIdfModel};

pub const DEFAULT_ALPHA: f64 = 0.5;
pub const DEFAULT_THRESHOLD: f64 = 0.35;

#[derive(Debug, Error)]
pub enum MatchError {
    #[error("duplicate template id {0:?}")]
    DuplicateTemplateId(String),
    #[error("line {line}: {reason}")]
    MalformedTemplate { line: usize, reason: String },
    #[error("no templates loaded")]
    NoTemplates,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Whether the slot entity is the subject or the object of the answering
/// triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Forward,
    Reverse,
}

impl FromStr for Direction {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "forward" => Ok(Direction::Forward),
            "reverse" => Ok(Direction::Reverse),
            other => Err(format!(
                "direction must be forward or reverse, got {other:?}"
            )),
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Forward => "forward",
            Direction::Reverse => "reverse",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    pub id: String,
    pub text: String,
    pub relation: String,
    pub subject_type: String,
    pub direction: Direction,
    pub answer_surface: String,
}

impl Template {
    /// Validates the single `<TYPE>` slot against `subject_type`.
    pub fn new(
        id: &str,
        relation: &str,
        subject_type: &str,
        direction: Direction,
        text: &str,
        answer_surface: &str,
    ) -> Result<Self, String> {
        if id.is_empty() || relation.is_empty() || subject_type.is_empty() {
            return Err("id, relation and subject_type must be non-empty".into());
        }
        let slots: Vec<String> = tokenize(text)
            .into_iter()
            .filter_map(|t| slot_type(&t.text).map(str::to_string))
            .collect();
        match slots.as_slice() {
            [only] if only == subject_type => {}
            [only] => {
                return Err(format!(
                    "slot <{only}> does not match subject type {subject_type:?}"
                ))
            }
            [] => return Err("template text has no <TYPE> slot".into()),
            _ => {
                return Err(format!(
                    "template text has {} slots, expected one",
                    slots.len()
                ))
            }
        }
        Ok(Template {
            id: id.to_string(),
            text: text.to_string(),
            relation: relation.to_string(),
            subject_type: subject_type.to_string(),
            direction,
            answer_surface: answer_surface.to_string(),
        })
    }

    pub fn terms(&self) -> Vec<String> {
        normalized_terms(&self.text)
    }
}

fn slot_type(token: &str) -> Option<&str> {
    let inner = token.strip_prefix('<')?.strip_suffix('>')?;
    (!inner.is_empty()).then_some(inner)
}

pub fn slot_token(etype: &str) -> String {
    format!("<{etype}>")
}

/// Parses the 6-column templates file; `#` lines and blank lines are
/// skipped.
pub fn load_templates<R: BufRead>(source: R) -> Result<Vec<Template>, MatchError> {
    let mut templates = Vec::new();
    let mut ids = HashSet::new();
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let malformed = |reason: String| MatchError::MalformedTemplate {
            line: i + 1,
            reason,
        };
        let cols: Vec<&str> = line.split('\t').collect();
        let [id, relation, subject_type, direction, text, answer] = cols[..] else {
            return Err(malformed(format!(
                "expected 6 columns, found {}",
                cols.len()
            )));
        };
        let direction = direction.parse().map_err(malformed)?;
        let t = Template::new(id, relation, subject_type, direction, text, answer)
            .map_err(malformed)?;
        if !ids.insert(t.id.clone()) {
            return Err(MatchError::DuplicateTemplateId(t.id));
        }
        templates.push(t);
    }
    Ok(templates)
}

/// Replaces each mention's token span with its slot token.
pub fn abstract_question<T: AsRef<str>>(tokens: &[T], mentions: &[EntityMention]) -> Vec<String> {
    let mut sorted: Vec<&EntityMention> = mentions.iter().collect();
    sorted.sort_by_key(|m| m.span);
    let mut out = Vec::with_capacity(tokens.len());
    let mut i = 0;
    for m in sorted {
        out.extend(tokens[i..m.span.0].iter().map(|t| t.as_ref().to_string()));
        out.push(slot_token(&m.label));
        i = m.span.1 + 1;
    }
    out.extend(tokens[i..].iter().map(|t| t.as_ref().to_string()));
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub template_id: String,
    pub score: f64,
    pub passed: bool,
}

fn blend(alpha: f64, tfidf: f64, embedding: f64) -> f64 {
    alpha * tfidf + (1.0 - alpha) * embedding
}

/// Similarity between an abstracted question and one template.
pub fn score_template<T: AsRef<str>>(
    question: &[T],
    template: &Template,
    tfidf: &TfIdfModel,
    emb: &EmbeddingTable,
    alpha: f64,
) -> f64 {
    score_texts(question, &template.terms(), tfidf, emb, alpha)
}

/// [`score_template`] over two raw token lists; symmetric in its inputs.
pub fn score_texts<A: AsRef<str>, B: AsRef<str>>(
    a: &[A],
    b: &[B],
    tfidf: &TfIdfModel,
    emb: &EmbeddingTable,
    alpha: f64,
) -> f64 {
    let sparse = tfidf.vector(a).cosine(&tfidf.vector(b));
    let dense = vectors::cosine(
        &question_embedding(tfidf, emb, a),
        &question_embedding(tfidf, emb, b),
    )
    .expect("embeddings share the table dimension");
    blend(alpha, sparse, dense)
}

/// Highest-scoring template; ties go to the smallest id.
pub fn best_template<T: AsRef<str>>(
    question: &[T],
    templates: &[Template],
    tfidf: &TfIdfModel,
    emb: &EmbeddingTable,
    alpha: f64,
    threshold: f64,
) -> Result<MatchResult, MatchError> {
    let scored = templates.iter().map(|t| {
        (
            t.id.as_str(),
            score_template(question, t, tfidf, emb, alpha),
        )
    });
    pick_best(scored, threshold)
}

fn pick_best<'a>(
    scored: impl Iterator<Item = (&'a str, f64)>,
    threshold: f64,
) -> Result<MatchResult, MatchError> {
    let (id, score) = scored
        .reduce(|best, cur| {
            if cur.1 > best.1 || (cur.1 == best.1 && cur.0 < best.0) {
                cur
            } else {
                best
            }
        })
        .ok_or(MatchError::NoTemplates)?;
    Ok(MatchResult {
        template_id: id.to_string(),
        score,
        passed: score >= threshold,
    })
}

struct Prepared {
    template: Template,
    sparse: SparseVector,
    dense: Vec<f64>,
}

/// Template store with the TF-IDF model fitted on it and per-template
/// vectors cached. Results are identical to the free functions.
pub struct TemplateMatcher {
    prepared: Vec<Prepared>,
    tfidf: TfIdfModel,
    emb: EmbeddingTable,
    alpha: f64,
    threshold: f64,
}

impl TemplateMatcher {
    pub fn new(
        templates: Vec<Template>,
        emb: EmbeddingTable,
        alpha: f64,
        threshold: f64,
    ) -> Result<Self, MatchError> {
        if templates.is_empty() {
            return Err(MatchError::NoTemplates);
        }
        let docs: Vec<Vec<String>> = templates.iter().map(Template::terms).collect();
        let tfidf = TfIdfModel::fit(&docs).expect("corpus is non-empty");
        let prepared = templates
            .into_iter()
            .zip(&docs)
            .map(|(template, doc)| Prepared {
                sparse: tfidf.vector(doc),
                dense: question_embedding(&tfidf, &emb, doc),
                template,
            })
            .collect();
        Ok(TemplateMatcher {
            prepared,
            tfidf,
            emb,
            alpha,
            threshold,
        })
    }

    pub fn tfidf(&self) -> &TfIdfModel {
        &self.tfidf
    }

    pub fn embeddings(&self) -> &EmbeddingTable {
        &self.emb
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn templates(&self) -> impl Iterator<Item = &Template> {
        self.prepared.iter().map(|p| &p.template)
    }

    pub fn template(&self, id: &str) -> Option<&Template> {
        self.templates().find(|t| t.id == id)
    }

    /// Every template's score, best first (ties by id).
    pub fn rank<T: AsRef<str>>(&self, question: &[T]) -> Vec<MatchResult> {
        let q_sparse = self.tfidf.vector(question);
        let q_dense = question_embedding(&self.tfidf, &self.emb, question);
        let mut out: Vec<MatchResult> = self
            .prepared
            .iter()
            .map(|p| {
                let dense = vectors::cosine(&q_dense, &p.dense).expect("same dimension");
                let score = blend(self.alpha, q_sparse.cosine(&p.sparse), dense);
                MatchResult {
                    template_id: p.template.id.clone(),
                    score,
                    passed: score >= self.threshold,
                }
            })
            .collect();
        out.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then_with(|| a.template_id.cmp(&b.template_id))
        });
        out
    }

    pub fn best<T: AsRef<str>>(&self, question: &[T]) -> MatchResult {
        self.rank(question)
            .into_iter()
            .next()
            .expect("matcher holds at least one template")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIXTURE: &str = "\
# id\trelation\tsubject_type\tdirection\ttext\tanswer
T1\ttreated_by\tdisease\tforward\tWhich medicine can treat <disease> ?\tThe drugs that treat {entity} are: {list}.
T2\thas_symptom\tdisease\tforward\tWhat are the manifestations of <disease> ?\tThe manifestations of {entity} are: {list}.
T3\ttreated_by\tdrug\treverse\tWhat diseases can <drug> treat ?\tThe diseases treated by {entity} are: {list}.
";

    fn templates() -> Vec<Template> {
        load_templates(FIXTURE.as_bytes()).unwrap()
    }

    #[test]
    fn loads_rows() {
        let t = templates();
        assert_eq!(t.len(), 3);
        assert_eq!(t[0].relation, "treated_by");
        assert_eq!(t[2].direction, Direction::Reverse);
        assert_eq!(t[0].subject_type, "disease");
    }

    #[test]
    fn rejects_duplicates_and_bad_slots() {
        let dup = "A\tr\tx\tforward\t<x> ?\t{list}\nA\tr\tx\tforward\t<x> !\t{list}\n";
        assert!(
            matches!(load_templates(dup.as_bytes()), Err(MatchError::DuplicateTemplateId(id)) if id == "A")
        );
        for bad in [
            "A\tr\tx\tforward\tno slot here\t{list}\n",
            "A\tr\tx\tforward\t<x> and <x>\t{list}\n",
            "A\tr\tx\tforward\t<y> ?\t{list}\n",
            "A\tr\tx\tsideways\t<x> ?\t{list}\n",
            "A\tr\tx\tforward\t<x> ?\n",
        ] {
            assert!(
                matches!(
                    load_templates(bad.as_bytes()),
                    Err(MatchError::MalformedTemplate { line: 1, .. })
                ),
                "{bad:?}"
            );
        }
    }

    fn mention(label: &str, span: (usize, usize)) -> EntityMention {
        EntityMention {
            text: String::new(),
            label: label.into(),
            span,
            entity_id: None,
        }
    }

    #[test]
    fn abstraction() {
        let toks = ["Which", "medicine", "can", "treat", "AIDS", "?"];
        assert_eq!(
            abstract_question(&toks, &[mention("disease", (4, 4))]),
            ["Which", "medicine", "can", "treat", "<disease>", "?"]
        );
        assert_eq!(abstract_question(&toks, &[]), toks);
        let toks = ["treat", "hepatitis", "B", "now"];
        assert_eq!(
            abstract_question(&toks, &[mention("disease", (1, 2))]),
            ["treat", "<disease>", "now"]
        );
    }

    fn models(ts: &[Template], emb: &str) -> (TfIdfModel, EmbeddingTable) {
        let docs: Vec<Vec<String>> = ts.iter().map(Template::terms).collect();
        (
            TfIdfModel::fit(&docs).unwrap(),
            EmbeddingTable::load(emb.as_bytes()).unwrap(),
        )
    }

    #[test]
    fn self_similarity_is_one() {
        let ts = templates();
        let (tfidf, emb) = models(&ts, "2 2\ntreat 1 0\nmedicine 0.5 0.5\n");
        let s = score_template(&ts[0].terms(), &ts[0], &tfidf, &emb, 0.5);
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn disjoint_and_oov_scores_zero() {
        let ts = templates();
        let (tfidf, emb) = models(&ts, "1 2\nzzz 1 0\n");
        assert_eq!(
            score_template(&["purple", "banana"], &ts[0], &tfidf, &emb, 0.5),
            0.0
        );
    }

    #[test]
    fn alpha_one_is_pure_tfidf_hand_computed() {
        // N = 3 documents. For q = [what, <disease>, ?]:
        //   idf(what) = ln(4/3) + 1, idf(<disease>) = ln(4/3) + 1, idf(?) = ln(4/4) + 1 = 1.
        // Template vectors are unit-normalized tf-idf over their own terms;
        // cosines below were computed by hand from those weights.
        let ts = templates();
        let (tfidf, emb) = models(&ts, "1 2\nwhat 1 0\n");
        let q = ["what", "<disease>", "?"];
        let l = (4.0f64 / 3.0).ln() + 1.0;
        let h = (4.0f64 / 2.0).ln() + 1.0;
        let q_norm = (2.0 * l * l + 1.0).sqrt();
        // T1 terms: which medicine can treat <disease> ?
        //   which, medicine: idf = h; can, treat: df=2 -> l; <disease>: l; ?: 1
        let t1_norm = (2.0 * h * h + 3.0 * l * l + 1.0).sqrt();
        let cos_t1 = (l * l + 1.0) / (q_norm * t1_norm);
        // T2 terms: what are the manifestations of <disease> ?
        //   what: l; are, the, manifestations, of: h; <disease>: l; ?: 1
        let t2_norm = (4.0 * h * h + 2.0 * l * l + 1.0).sqrt();
        let cos_t2 = (2.0 * l * l + 1.0) / (q_norm * t2_norm);
        // T3 terms: what diseases can <drug> treat ?
        //   what, can, treat: l; diseases, <drug>: h; ?: 1
        let t3_norm = (3.0 * l * l + 2.0 * h * h + 1.0).sqrt();
        let cos_t3 = (l * l + 1.0) / (q_norm * t3_norm);
        for (t, expected) in ts.iter().zip([cos_t1, cos_t2, cos_t3]) {
            let s = score_template(&q, t, &tfidf, &emb, 1.0);
            assert!((s - expected).abs() < 1e-12, "{}: {s} vs {expected}", t.id);
        }
    }

    #[test]
    fn best_template_choices() {
        let ts = templates();
        let (tfidf, emb) = models(&ts, "1 2\nwhat 1 0\n");
        let q = ts[1].terms();
        let r = best_template(&q, &ts, &tfidf, &emb, 0.5, 0.35).unwrap();
        assert_eq!(r.template_id, "T2");
        assert!((r.score - 1.0).abs() < 1e-12);

        let single = &ts[..1];
        let r = best_template(&["zzz"], single, &tfidf, &emb, 0.5, 0.35).unwrap();
        assert_eq!(r.template_id, "T1");
        assert!(!r.passed);

        assert!(matches!(
            best_template(&["x"], &[], &tfidf, &emb, 0.5, 0.35),
            Err(MatchError::NoTemplates)
        ));
    }

    #[test]
    fn ties_go_to_smallest_id() {
        let r = pick_best([("B", 0.5), ("A", 0.5), ("C", 0.1)].into_iter(), 0.35).unwrap();
        assert_eq!(r.template_id, "A");
        assert!(r.passed);
    }

    #[test]
    fn cached_matcher_agrees_with_free_functions() {
        let ts = templates();
        let emb_src = "3 2\ntreat 1 0\nmedicine 0.5 0.5\nwhat 0 1\n";
        let (tfidf, emb) = models(&ts, emb_src);
        let m = TemplateMatcher::new(ts.clone(), emb.clone(), 0.3, 0.35).unwrap();
        let q = ["what", "medicine", "treats", "<disease>", "?"];
        for r in m.rank(&q) {
            let t = m.template(&r.template_id).unwrap();
            let free = score_template(&q, t, &tfidf, &emb, 0.3);
            assert!((r.score - free).abs() < 1e-12);
        }
        assert_eq!(
            m.best(&q).template_id,
            best_template(&q, &ts, &tfidf, &emb, 0.3, 0.35)
                .unwrap()
                .template_id
        );
    }
}
