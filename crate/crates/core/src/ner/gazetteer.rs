use std::collections::HashMap;

use super::EntityMention;
use crate::graph::KnowledgeGraph;
use crate::text::{normalize, normalized_terms};

/// Dictionary of knowledge-graph entity names, tokenized and normalized.
#[derive(Debug, Clone, Default)]
pub struct Gazetteer {
    // name token sequence -> (id, etype), smallest id kept
    entries: HashMap<Vec<String>, (String, String)>,
    max_len: usize,
}

impl Gazetteer {
    pub fn from_graph(g: &KnowledgeGraph) -> Self {
        let mut gz = Gazetteer::default();
        for e in g.entities() {
            let key = normalized_terms(&e.name);
            if key.is_empty() {
                continue;
            }
            gz.max_len = gz.max_len.max(key.len());
            match gz.entries.get(&key) {
                Some((id, _)) if *id <= e.id => {}
                _ => {
                    gz.entries.insert(key, (e.id.clone(), e.etype.clone()));
                }
            }
        }
        gz
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Leftmost-longest, non-overlapping, case-insensitive matches. Each
    /// mention carries the matched entity's id and type.
    pub fn tag<T: AsRef<str>>(&self, tokens: &[T]) -> Vec<EntityMention> {
        let norm: Vec<String> = tokens.iter().map(|t| normalize(t.as_ref())).collect();
        let mut mentions = Vec::new();
        let mut i = 0;
        while i < norm.len() {
            let longest = (1..=self.max_len.min(norm.len() - i))
                .rev()
                .find_map(|len| self.entries.get(&norm[i..i + len]).map(|hit| (len, hit)));
            match longest {
                Some((len, (id, etype))) => {
                    let text = tokens[i..i + len]
                        .iter()
                        .map(AsRef::as_ref)
                        .collect::<Vec<_>>()
                        .join(" ");
                    mentions.push(EntityMention {
                        text,
                        label: etype.clone(),
                        span: (i, i + len - 1),
                        entity_id: Some(id.clone()),
                    });
                    i += len;
                }
                None => i += 1,
            }
        }
        mentions
    }
}

/// One-shot tagging against a graph; build a [`Gazetteer`] once when
/// tagging many sentences.
pub fn gazetteer_tag<T: AsRef<str>>(tokens: &[T], g: &KnowledgeGraph) -> Vec<EntityMention> {
    Gazetteer::from_graph(g).tag(tokens)
}
