use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use kgqa_core::matcher::{abstract_question, load_templates};
use kgqa_core::metrics::{bleu, rouge_l, BleuOptions};
use kgqa_core::ner::{constrain_bio, viterbi, EmissionScores, TransitionMatrix};
use kgqa_core::{
    tokenize, EmbeddingTable, Engine, EngineConfig, KnowledgeGraph, LabelSet, TemplateMatcher,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn open(name: &str) -> BufReader<File> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name);
    BufReader::new(File::open(path).unwrap())
}

fn engine() -> Engine {
    let mut g = KnowledgeGraph::new();
    g.import_tsv(open("toy.tsv")).unwrap();
    let cfg = EngineConfig::default();
    let matcher = TemplateMatcher::new(
        load_templates(open("templates.tsv")).unwrap(),
        EmbeddingTable::load(open("embeddings.txt")).unwrap(),
        cfg.alpha,
        cfg.threshold,
    )
    .unwrap();
    Engine::new(g, matcher, None, cfg)
}

fn bench_viterbi(c: &mut Criterion) {
    let ls = LabelSet::from_types(["disease", "drug", "gene", "symptom"]);
    let k = ls.len();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut group = c.benchmark_group("viterbi");
    for n in [8, 32, 128] {
        let e = EmissionScores::from_rows(
            (0..n)
                .map(|_| (0..k).map(|_| rng.gen_range(-2.0..2.0)).collect())
                .collect(),
        )
        .unwrap();
        let a = constrain_bio(
            &TransitionMatrix::from_rows(
                (0..k + 2)
                    .map(|_| (0..k + 2).map(|_| rng.gen_range(-1.0..1.0)).collect())
                    .collect(),
            )
            .unwrap(),
            &ls,
        );
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| viterbi(black_box(&e), black_box(&a)).unwrap())
        });
    }
    group.finish();
}

fn bench_matching(c: &mut Criterion) {
    let engine = engine();
    let tokens = tokenize("Which drugs can treat hepatitis B?");
    let mentions = engine.recognize(&tokens);
    let abstracted = abstract_question(&tokens, &mentions);
    c.bench_function("template_rank", |b| {
        b.iter(|| engine.matcher().rank(black_box(&abstracted)))
    });
}

fn bench_answer(c: &mut Criterion) {
    let engine = engine();
    c.bench_function("answer", |b| {
        b.iter(|| engine.answer(black_box("What are the manifestations of HCC?")))
    });
}

fn bench_generation_metrics(c: &mut Criterion) {
    let cand: Vec<String> = "the drugs that treat aids are lamivudine tenofovir and zidovudine"
        .split(' ')
        .map(String::from)
        .collect();
    let reference: Vec<String> =
        "the drugs that treat aids are lamivudine , tenofovir and zidovudine ."
            .split(' ')
            .map(String::from)
            .collect();
    let refs = [reference.clone()];
    c.bench_function("bleu", |b| {
        b.iter(|| bleu(black_box(&cand), black_box(&refs), BleuOptions::default()).unwrap())
    });
    c.bench_function("rouge_l", |b| {
        b.iter(|| rouge_l(black_box(&cand), black_box(&reference)).unwrap())
    });
}

criterion_group!(
    benches,
    bench_viterbi,
    bench_matching,
    bench_answer,
    bench_generation_metrics
);
criterion_main!(benches);
