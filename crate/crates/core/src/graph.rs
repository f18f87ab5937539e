//! Embedded triple store.
//!
//! Entities are deduplicated on `(normalized name, etype)`; the first id
//! inserted for a key survives and later ids for the same key become aliases
//! of it. Triples have set semantics and are indexed in both directions so
//! one-hop lookups never scan.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::io::{self, BufRead, Write};

use thiserror::Error;

use crate::text::normalize;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("invalid entity: {0}")]
    InvalidEntity(String),
    #[error("invalid triple: {0}")]
    InvalidTriple(String),
    #[error("entity id {id:?} is already bound to a different entity")]
    ConflictingId { id: String },
    #[error("unknown entity id {0:?}")]
    UnknownEntity(String),
    #[error("no entity named {0:?}")]
    UnknownName(String),
    #[error("query needs at least one bound field")]
    UnboundQuery,
    #[error("i/o failure during import after {} well-formed rows: {source}", .partial.rows_applied)]
    IoFailure {
        #[source]
        source: io::Error,
        partial: ImportReport,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Entity {
    pub id: String,
    pub name: String,
    pub etype: String,
}

impl Entity {
    pub fn new(
        id: impl Into<String>,
        name: impl Into<String>,
        etype: impl Into<String>,
    ) -> Result<Self, GraphError> {
        let e = Entity {
            id: id.into(),
            name: name.into(),
            etype: etype.into(),
        };
        if e.id.is_empty() || e.name.is_empty() || e.etype.is_empty() {
            return Err(GraphError::InvalidEntity(format!(
                "id, name and etype must be non-empty: {e:?}"
            )));
        }
        Ok(e)
    }

    fn dedup_key(&self) -> (String, String) {
        (normalize(&self.name), self.etype.clone())
    }
}

/// Ordering is lexicographic on (subject, relation, object).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub subject: String,
    pub relation: String,
    pub object: String,
}

impl Triple {
    pub fn new(
        subject: impl Into<String>,
        relation: impl Into<String>,
        object: impl Into<String>,
    ) -> Self {
        Triple {
            subject: subject.into(),
            relation: relation.into(),
            object: object.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ImportReport {
    pub entities_added: usize,
    pub triples_added: usize,
    /// Distinct incoming entity ids that were already present, either under
    /// the same id or under another id with the same dedup key.
    pub duplicate_entities_skipped: usize,
    pub duplicate_triples_skipped: usize,
    pub malformed_lines: usize,
    pub rows_applied: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GraphStats {
    pub entity_count: usize,
    pub triple_count: usize,
    pub entity_type_count: usize,
    pub relation_type_count: usize,
}

impl std::fmt::Display for GraphStats {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "entities={} triples={} entity_types={} relation_types={}",
            self.entity_count, self.triple_count, self.entity_type_count, self.relation_type_count
        )
    }
}

type PairIndex = HashMap<(String, String), BTreeSet<String>>;

#[derive(Debug, Clone, Default)]
pub struct KnowledgeGraph {
    entities: BTreeMap<String, Entity>,
    triples: BTreeSet<Triple>,
    index_sr: PairIndex,
    index_or: PairIndex,
    name_index: HashMap<String, Vec<String>>,
    by_key: HashMap<(String, String), String>,
    aliases: HashMap<String, String>,
}

impl KnowledgeGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entity(&self, id: &str) -> Option<&Entity> {
        self.entities.get(self.canonical_id(id))
    }

    pub fn entities(&self) -> impl Iterator<Item = &Entity> {
        self.entities.values()
    }

    /// Triples in (subject, relation, object) order.
    pub fn triples(&self) -> impl Iterator<Item = &Triple> {
        self.triples.iter()
    }

    pub fn entity_count(&self) -> usize {
        self.entities.len()
    }

    pub fn triple_count(&self) -> usize {
        self.triples.len()
    }

    /// Follows a dedup alias to the surviving id; unknown ids pass through.
    pub fn canonical_id<'a>(&'a self, id: &'a str) -> &'a str {
        self.aliases.get(id).map(String::as_str).unwrap_or(id)
    }

    /// Ids whose entity name normalizes to `normalize(name)`, sorted.
    pub fn ids_for_name(&self, name: &str) -> &[String] {
        self.name_index
            .get(&normalize(name))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    fn conflicts(&self, e: &Entity) -> bool {
        match self.entity(&e.id) {
            Some(existing) => existing.dedup_key() != e.dedup_key(),
            None => false,
        }
    }

    /// Inserts `e` unless an entity with the same dedup key exists.
    pub fn add_entity(&mut self, e: Entity) -> Result<bool, GraphError> {
        let e = Entity::new(e.id, e.name, e.etype)?;
        if let Some(existing) = self.entity(&e.id) {
            if existing.dedup_key() == e.dedup_key() {
                return Ok(false);
            }
            return Err(GraphError::ConflictingId { id: e.id });
        }
        let key = e.dedup_key();
        if let Some(survivor) = self.by_key.get(&key) {
            self.aliases.insert(e.id, survivor.clone());
            return Ok(false);
        }
        let ids = self.name_index.entry(key.0.clone()).or_default();
        let pos = ids.binary_search(&e.id).unwrap_or_else(|p| p);
        ids.insert(pos, e.id.clone());
        self.by_key.insert(key, e.id.clone());
        self.entities.insert(e.id.clone(), e);
        Ok(true)
    }

    /// Inserts `t` (endpoints are resolved through dedup aliases first).
    pub fn add_triple(&mut self, t: Triple) -> Result<bool, GraphError> {
        if t.relation.is_empty() {
            return Err(GraphError::InvalidTriple("empty relation".into()));
        }
        let mut resolved = Vec::with_capacity(2);
        for id in [&t.subject, &t.object] {
            if id.is_empty() {
                return Err(GraphError::InvalidTriple("empty endpoint id".into()));
            }
            let canon = self.canonical_id(id);
            if !self.entities.contains_key(canon) {
                return Err(GraphError::UnknownEntity(id.clone()));
            }
            resolved.push(canon.to_string());
        }
        let object = resolved.pop().unwrap();
        let subject = resolved.pop().unwrap();
        let t = Triple::new(subject, t.relation, object);
        if self.triples.contains(&t) {
            return Ok(false);
        }
        self.index_sr
            .entry((t.subject.clone(), t.relation.clone()))
            .or_default()
            .insert(t.object.clone());
        self.index_or
            .entry((t.object.clone(), t.relation.clone()))
            .or_default()
            .insert(t.subject.clone());
        self.triples.insert(t);
        Ok(true)
    }

    /// Loads the 7-column TAB-separated triples format. Malformed rows are
    /// counted and skipped; only a read failure aborts the import.
    pub fn import_tsv<R: BufRead>(&mut self, source: R) -> Result<ImportReport, GraphError> {
        let mut report = ImportReport::default();
        let mut seen_ids = HashSet::new();
        for line in source.lines() {
            let line = line.map_err(|source| GraphError::IoFailure {
                source,
                partial: report,
            })?;
            let line = line.strip_suffix('\r').unwrap_or(&line);
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((subject, relation, object)) = parse_row(line) else {
                report.malformed_lines += 1;
                continue;
            };
            if self.conflicts(&subject) || self.conflicts(&object) {
                report.malformed_lines += 1;
                continue;
            }
            let triple = Triple::new(&subject.id, relation, &object.id);
            for e in [subject, object] {
                let first_sighting = seen_ids.insert(e.id.clone());
                // conflicts were ruled out above
                if self.add_entity(e)? {
                    report.entities_added += 1;
                } else if first_sighting {
                    report.duplicate_entities_skipped += 1;
                }
            }
            if self.add_triple(triple)? {
                report.triples_added += 1;
            } else {
                report.duplicate_triples_skipped += 1;
            }
            report.rows_applied += 1;
        }
        Ok(report)
    }

    /// Writes every triple in the import format, sorted by
    /// (subject_id, relation, object_id).
    pub fn export_tsv<W: Write>(&self, mut out: W) -> io::Result<()> {
        for t in &self.triples {
            let s = &self.entities[&t.subject];
            let o = &self.entities[&t.object];
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                s.id, s.name, s.etype, t.relation, o.id, o.name, o.etype
            )?;
        }
        Ok(())
    }

    /// Union of two graphs under entity dedup. Entities of `other` whose id
    /// is taken by a different entity are renamed `<id>~<n>`.
    pub fn merge(&self, other: &KnowledgeGraph) -> (KnowledgeGraph, ImportReport) {
        let mut merged = self.clone();
        let mut report = ImportReport::default();
        let mut rename: HashMap<&str, String> = HashMap::new();
        for e in other.entities.values() {
            let mut incoming = e.clone();
            if merged.conflicts(&incoming) {
                let mut n = 1;
                loop {
                    let candidate = format!("{}~{n}", e.id);
                    if merged.entity(&candidate).is_none() {
                        incoming.id = candidate;
                        break;
                    }
                    n += 1;
                }
            }
            let final_id = incoming.id.clone();
            match merged.add_entity(incoming) {
                Ok(true) => report.entities_added += 1,
                Ok(false) => report.duplicate_entities_skipped += 1,
                Err(_) => unreachable!("conflicting ids are renamed before insertion"),
            }
            rename.insert(&e.id, merged.canonical_id(&final_id).to_string());
        }
        for (alias, target) in &other.aliases {
            if merged.entity(alias).is_none() {
                if let Some(t) = rename.get(target.as_str()) {
                    merged.aliases.insert(alias.clone(), t.clone());
                }
            }
        }
        for t in &other.triples {
            let mapped = Triple::new(
                &rename[t.subject.as_str()],
                &t.relation,
                &rename[t.object.as_str()],
            );
            match merged.add_triple(mapped) {
                Ok(true) => report.triples_added += 1,
                Ok(false) => report.duplicate_triples_skipped += 1,
                Err(_) => unreachable!("endpoints were inserted above"),
            }
            report.rows_applied += 1;
        }
        (merged, report)
    }

    fn resolve_name(&self, name: &str) -> Result<&[String], GraphError> {
        let ids = self.ids_for_name(name);
        if ids.is_empty() {
            Err(GraphError::UnknownName(name.to_string()))
        } else {
            Ok(ids)
        }
    }

    /// One-hop pattern query by entity names (case-insensitive). Unbound
    /// fields are wildcards; the result is sorted by (subject, relation,
    /// object) id.
    pub fn query(
        &self,
        subject_name: Option<&str>,
        relation: Option<&str>,
        object_name: Option<&str>,
    ) -> Result<Vec<Triple>, GraphError> {
        if subject_name.is_none() && relation.is_none() && object_name.is_none() {
            return Err(GraphError::UnboundQuery);
        }
        let subjects = subject_name.map(|n| self.resolve_name(n)).transpose()?;
        let objects = object_name.map(|n| self.resolve_name(n)).transpose()?;
        let mut out = Vec::new();
        match (subjects, relation, objects) {
            (Some(subjects), Some(rel), objects) => {
                for s in subjects {
                    for o in self.objects_of(s, rel) {
                        if objects.is_none_or(|os| os.iter().any(|x| x == o)) {
                            out.push(Triple::new(s, rel, o));
                        }
                    }
                }
            }
            (None, Some(rel), Some(objects)) => {
                for o in objects {
                    for s in self.subjects_of(o, rel) {
                        out.push(Triple::new(s, rel, o));
                    }
                }
            }
            (subjects, relation, objects) => {
                out.extend(
                    self.triples
                        .iter()
                        .filter(|t| subjects.is_none_or(|ss| ss.contains(&t.subject)))
                        .filter(|t| relation.is_none_or(|r| r == t.relation))
                        .filter(|t| objects.is_none_or(|os| os.contains(&t.object)))
                        .cloned(),
                );
            }
        }
        out.sort();
        out.dedup();
        Ok(out)
    }

    /// Object ids reachable from `subject_id` over `relation`, sorted.
    pub fn objects_of<'a>(
        &'a self,
        subject_id: &str,
        relation: &str,
    ) -> impl Iterator<Item = &'a str> {
        let key = (
            self.canonical_id(subject_id).to_string(),
            relation.to_string(),
        );
        self.index_sr
            .get(&key)
            .into_iter()
            .flat_map(|s| s.iter().map(String::as_str))
    }

    /// Subject ids pointing at `object_id` over `relation`, sorted.
    pub fn subjects_of<'a>(
        &'a self,
        object_id: &str,
        relation: &str,
    ) -> impl Iterator<Item = &'a str> {
        let key = (
            self.canonical_id(object_id).to_string(),
            relation.to_string(),
        );
        self.index_or
            .get(&key)
            .into_iter()
            .flat_map(|s| s.iter().map(String::as_str))
    }

    pub fn stats(&self) -> GraphStats {
        let etypes: HashSet<&str> = self.entities.values().map(|e| e.etype.as_str()).collect();
        let relations: HashSet<&str> = self.triples.iter().map(|t| t.relation.as_str()).collect();
        GraphStats {
            entity_count: self.entities.len(),
            triple_count: self.triples.len(),
            entity_type_count: etypes.len(),
            relation_type_count: relations.len(),
        }
    }
}

fn parse_row(line: &str) -> Option<(Entity, String, Entity)> {
    let cols: Vec<&str> = line.split('\t').collect();
    if cols.len() != 7 || cols.iter().any(|c| c.trim().is_empty()) {
        return None;
    }
    let subject = Entity::new(cols[0], cols[1], cols[2]).ok()?;
    let object = Entity::new(cols[4], cols[5], cols[6]).ok()?;
    Some((subject, cols[3].to_string(), object))
}
