#![allow(dead_code)]

use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use kgqa_core::matcher::load_templates;
use kgqa_core::{EmbeddingTable, Engine, EngineConfig, KnowledgeGraph, TemplateMatcher};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

pub fn open(name: &str) -> BufReader<File> {
    BufReader::new(File::open(fixture(name)).expect("fixture present"))
}

pub fn toy_graph() -> KnowledgeGraph {
    let mut g = KnowledgeGraph::new();
    g.import_tsv(open("toy.tsv")).unwrap();
    g
}

pub fn toy_engine() -> Engine {
    let cfg = EngineConfig::default();
    let templates = load_templates(open("templates.tsv")).unwrap();
    let emb = EmbeddingTable::load(open("embeddings.txt")).unwrap();
    let matcher = TemplateMatcher::new(templates, emb, cfg.alpha, cfg.threshold).unwrap();
    Engine::new(toy_graph(), matcher, None, cfg)
}
