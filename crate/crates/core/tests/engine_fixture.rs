mod common;

use kgqa_core::matcher::Direction;
use kgqa_core::metrics::{read_dataset, score_dataset, ScoreOptions};
use kgqa_core::{AnswerStatus, MetricError};

use common::{open, toy_engine, toy_graph};

#[test]
fn example_questions_are_answered() {
    let engine = toy_engine();
    let a = engine.answer("Which medicine can treat AIDS?");
    assert_eq!(a.status, AnswerStatus::Answered);
    assert_eq!(a.entity_names, ["lamivudine", "tenofovir", "zidovudine"]);
    assert_eq!(
        a.text,
        "The drugs that treat AIDS are: lamivudine, tenofovir and zidovudine."
    );

    let b = engine.answer("What are the manifestations of HCC?");
    assert_eq!(b.status, AnswerStatus::Answered);
    assert_eq!(
        b.entity_names,
        ["abdominal pain", "ascites", "jaundice", "weight loss"]
    );
}

#[test]
fn every_gold_question_picks_a_passing_template() {
    let engine = toy_engine();
    for item in read_dataset(open("gold.jsonl")).unwrap() {
        let parsed = engine.parse(&item.question);
        assert!(parsed.is_ok(), "{}: {:?}", item.question, parsed.err());
    }
}

#[test]
fn failure_statuses() {
    let engine = toy_engine();
    assert_eq!(engine.answer("hello world").status, AnswerStatus::NoEntity);
    assert_eq!(engine.answer("").status, AnswerStatus::NoEntity);
    assert_eq!(
        engine.answer("purple elephant fever banana").status,
        AnswerStatus::NoTemplateMatch
    );
    let none = engine.answer("Which medicine can treat liver cirrhosis?");
    assert_eq!(none.status, AnswerStatus::NoResults);
    assert!(none.entity_names.is_empty());
    assert!(none.text.contains("liver cirrhosis"));
}

#[test]
fn execute_equals_linear_scan() {
    let engine = toy_engine();
    let g = toy_graph();
    for item in read_dataset(open("gold.jsonl")).unwrap() {
        let p = engine.parse(&item.question).unwrap();
        let mut expected: Vec<String> = g
            .triples()
            .filter(|t| t.relation == p.template.relation)
            .filter_map(|t| match p.template.direction {
                Direction::Forward if t.subject == p.resolved_entity => Some(t.object.clone()),
                Direction::Reverse if t.object == p.resolved_entity => Some(t.subject.clone()),
                _ => None,
            })
            .collect();
        expected.sort();
        let mut got: Vec<String> = engine.execute(&p).into_iter().map(|e| e.id).collect();
        got.sort();
        assert_eq!(got, expected, "{}", item.question);
    }
}

#[test]
fn gold_set_scores_perfectly() {
    let engine = toy_engine();
    let items = read_dataset(open("gold.jsonl")).unwrap();
    let report = score_dataset(&items, &engine, ScoreOptions::default()).unwrap();
    assert_eq!(report.em, Some(1.0));
    assert_eq!(report.mrr, Some(1.0));
    assert_eq!(report.precision, Some(1.0));
    assert_eq!(report.recall, Some(1.0));
    assert_eq!(report.f1, Some(1.0));
    // three records carry reference text
    assert!(report.bleu.is_some() && report.rouge_l.is_some());
    assert_eq!(
        report
            .records
            .iter()
            .filter(|r| r.rouge_l.is_some())
            .count(),
        3
    );
    for (_, v) in report.values() {
        assert!((0.0..=1.0).contains(&v));
    }
}

#[test]
fn planted_miss_costs_one_record() {
    let engine = toy_engine();
    let items = read_dataset(open("gold_miss.jsonl")).unwrap();
    let report = score_dataset(&items, &engine, ScoreOptions::default()).unwrap();
    assert_eq!(report.em, Some(11.0 / 12.0));
    assert_eq!(report.mrr, Some(11.0 / 12.0));
    let miss = &report.records[9];
    assert_eq!(miss.status, AnswerStatus::NoResults);
    assert!(!miss.exact);
}

#[test]
fn empty_dataset_is_an_error() {
    let engine = toy_engine();
    assert!(matches!(
        score_dataset(&[], &engine, ScoreOptions::default()),
        Err(MetricError::EmptyDataset)
    ));
}

#[test]
fn report_lines_are_machine_readable() {
    let engine = toy_engine();
    let items = read_dataset(open("gold.jsonl")).unwrap();
    let text = score_dataset(&items, &engine, ScoreOptions::default())
        .unwrap()
        .render();
    assert!(text.contains("metric=em value=1.000000\n"));
    assert!(text.contains("metric=mrr value=1.000000\n"));
    assert!(text.lines().any(|l| l.starts_with("metric=rouge_2 value=")));
}
