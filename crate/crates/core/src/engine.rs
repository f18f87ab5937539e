//! Question answering pipeline: tokenize, recognize entities, match a
//! template, look up the graph, render a sentence.

use std::cmp::Ordering;

use thiserror::Error;

use crate::graph::{Entity, KnowledgeGraph};
use crate::matcher::{abstract_question, Direction, MatchResult, Template, TemplateMatcher};
use crate::ner::{EntityMention, Gazetteer, NerModel};
use crate::text::{normalize, tokenize, Token};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineConfig {
    pub alpha: f64,
    pub threshold: f64,
    pub use_crf: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            alpha: crate::matcher::DEFAULT_ALPHA,
            threshold: crate::matcher::DEFAULT_THRESHOLD,
            use_crf: false,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ParseError {
    #[error("no known entity in the question")]
    NoEntityFound,
    #[error("no template matched (best {} scored {:.4})", .0.template_id, .0.score)]
    NoTemplateMatch(MatchResult),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedQuestion {
    pub source: String,
    pub tokens: Vec<Token>,
    pub mentions: Vec<EntityMention>,
    pub abstracted: Vec<String>,
    pub matched: MatchResult,
    pub template: Template,
    /// Id of the entity bound to the template slot.
    pub resolved_entity: String,
    /// Surface text of the bound mention, as typed by the user.
    pub entity_surface: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AnswerStatus {
    Answered,
    NoResults,
    NoEntity,
    NoTemplateMatch,
}

impl AnswerStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            AnswerStatus::Answered => "answered",
            AnswerStatus::NoResults => "no_results",
            AnswerStatus::NoEntity => "no_entity",
            AnswerStatus::NoTemplateMatch => "no_template_match",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Answer {
    pub entity_names: Vec<String>,
    pub text: String,
    pub status: AnswerStatus,
}

pub const NO_ENTITY_TEXT: &str = "I could not find a known entity in your question.";
pub const NO_TEMPLATE_TEXT: &str = "I could not match your question to a known question pattern.";

/// Loaded state. Immutable once built; `answer` takes `&self`.
pub struct Engine {
    graph: KnowledgeGraph,
    gazetteer: Gazetteer,
    matcher: TemplateMatcher,
    tagger: Option<NerModel>,
    config: EngineConfig,
}

impl Engine {
    pub fn new(
        graph: KnowledgeGraph,
        matcher: TemplateMatcher,
        tagger: Option<NerModel>,
        config: EngineConfig,
    ) -> Self {
        Engine {
            gazetteer: Gazetteer::from_graph(&graph),
            graph,
            matcher,
            tagger,
            config,
        }
    }

    pub fn graph(&self) -> &KnowledgeGraph {
        &self.graph
    }

    pub fn matcher(&self) -> &TemplateMatcher {
        &self.matcher
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    /// Gazetteer mentions, plus CRF mentions when `use_crf` is set and a
    /// tagger is loaded. See [`recognize_mentions`].
    pub fn recognize(&self, tokens: &[Token]) -> Vec<EntityMention> {
        let tagger = self.tagger.as_ref().filter(|_| self.config.use_crf);
        recognize_mentions(&self.graph, &self.gazetteer, tagger, tokens)
    }

    pub fn parse(&self, question: &str) -> Result<ParsedQuestion, ParseError> {
        let tokens = tokenize(question);
        let mentions = self.recognize(&tokens);
        if mentions.is_empty() {
            return Err(ParseError::NoEntityFound);
        }
        let abstracted = abstract_question(&tokens, &mentions);
        let matched = self.matcher.best(&abstracted);
        if !matched.passed {
            return Err(ParseError::NoTemplateMatch(matched));
        }
        let template = self
            .matcher
            .template(&matched.template_id)
            .expect("match refers to a loaded template")
            .clone();
        let compatible: Vec<&EntityMention> = mentions
            .iter()
            .filter(|m| m.label == template.subject_type)
            .collect();
        if compatible.is_empty() {
            return Err(ParseError::NoTemplateMatch(matched));
        }
        let (bound, resolved_entity) = compatible
            .iter()
            .find_map(|m| m.entity_id.clone().map(|id| (*m, id)))
            .ok_or(ParseError::NoEntityFound)?;
        Ok(ParsedQuestion {
            source: question.to_string(),
            entity_surface: bound.text.clone(),
            tokens,
            mentions,
            abstracted,
            matched,
            template,
            resolved_entity,
        })
    }

    /// One-hop lookup for the parsed question, sorted by name.
    pub fn execute(&self, p: &ParsedQuestion) -> Vec<Entity> {
        let id = p.resolved_entity.as_str();
        let rel = p.template.relation.as_str();
        let ids: Vec<&str> = match p.template.direction {
            Direction::Forward => self.graph.objects_of(id, rel).collect(),
            Direction::Reverse => self.graph.subjects_of(id, rel).collect(),
        };
        let mut out: Vec<Entity> = ids
            .into_iter()
            .filter_map(|id| self.graph.entity(id).cloned())
            .collect();
        out.sort_by(compare_by_name);
        out.dedup();
        out
    }

    pub fn answer(&self, question: &str) -> Answer {
        match self.parse(question) {
            Ok(p) => {
                let results = self.execute(&p);
                generate_answer(&p, &results)
            }
            Err(ParseError::NoEntityFound) => Answer {
                entity_names: Vec::new(),
                text: NO_ENTITY_TEXT.to_string(),
                status: AnswerStatus::NoEntity,
            },
            Err(ParseError::NoTemplateMatch(_)) => Answer {
                entity_names: Vec::new(),
                text: NO_TEMPLATE_TEXT.to_string(),
                status: AnswerStatus::NoTemplateMatch,
            },
        }
    }
}

/// Gazetteer mentions plus those CRF mentions that overlap none of them.
/// CRF mentions are linked to the first graph entity with the same
/// normalized name and type. A tagger failure leaves the gazetteer result
/// standing.
pub fn recognize_mentions<T: AsRef<str>>(
    graph: &KnowledgeGraph,
    gazetteer: &Gazetteer,
    tagger: Option<&NerModel>,
    tokens: &[T],
) -> Vec<EntityMention> {
    let mut mentions = gazetteer.tag(tokens);
    let Some(tagger) = tagger else {
        return mentions;
    };
    for mut m in tagger.tag(tokens).unwrap_or_default() {
        let overlaps = mentions
            .iter()
            .any(|g| m.span.0 <= g.span.1 && g.span.0 <= m.span.1);
        if !overlaps {
            m.entity_id = graph
                .ids_for_name(&m.text)
                .iter()
                .find(|id| graph.entity(id).is_some_and(|e| e.etype == m.label))
                .cloned();
            mentions.push(m);
        }
    }
    mentions.sort_by_key(|m| m.span);
    mentions
}

fn compare_by_name(a: &Entity, b: &Entity) -> Ordering {
    normalize(&a.name)
        .cmp(&normalize(&b.name))
        .then_with(|| a.name.cmp(&b.name))
        .then_with(|| a.id.cmp(&b.id))
}

/// "A", "A and B", "A, B and C".
pub fn join_names<S: AsRef<str>>(names: &[S]) -> String {
    match names {
        [] => String::new(),
        [only] => only.as_ref().to_string(),
        [init @ .., last] => {
            let head: Vec<&str> = init.iter().map(AsRef::as_ref).collect();
            format!("{} and {}", head.join(", "), last.as_ref())
        }
    }
}

pub fn generate_answer(p: &ParsedQuestion, results: &[Entity]) -> Answer {
    if results.is_empty() {
        return Answer {
            entity_names: Vec::new(),
            text: format!(
                "I found no {} information for {} in the knowledge graph.",
                p.template.relation, p.entity_surface
            ),
            status: AnswerStatus::NoResults,
        };
    }
    let names: Vec<String> = results.iter().map(|e| e.name.clone()).collect();
    let text = p
        .template
        .answer_surface
        .replace("{entity}", &p.entity_surface)
        .replace("{list}", &join_names(&names));
    Answer {
        entity_names: names,
        text,
        status: AnswerStatus::Answered,
    }
}
