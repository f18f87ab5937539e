//! `kgqa`: command-line front end for the question answering engine.

mod config;

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use kgqa_core::engine::recognize_mentions;
use kgqa_core::matcher::{abstract_question, load_templates};
use kgqa_core::metrics::{read_dataset, score_dataset, ScoreOptions};
use kgqa_core::ner::corpus::{index_corpus, read_corpus};
use kgqa_core::ner::{train_perceptron, Gazetteer, Lexicon};
use kgqa_core::vectors::DEFAULT_DIM;
use kgqa_core::{
    tokenize, EmbeddingTable, Engine, EngineConfig, KnowledgeGraph, NerModel, TemplateMatcher,
};

use config::{check_ranges, Config};

#[derive(Parser)]
#[command(
    name = "kgqa",
    version,
    about = "Question answering over a knowledge graph"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate triples files and report what was loaded
    Import {
        #[arg(long, required = true)]
        triples: Vec<PathBuf>,
        /// Write the combined graph in triples format
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print entity, triple, entity type and relation type counts
    Stats {
        #[arg(long, required = true)]
        triples: Vec<PathBuf>,
    },
    /// Answer one question
    Ask {
        #[command(flatten)]
        opts: EngineArgs,
        question: String,
    },
    /// Answer questions read line by line from standard input
    Repl {
        #[command(flatten)]
        opts: EngineArgs,
    },
    /// Print the entity mentions found in a question
    Ner {
        #[command(flatten)]
        opts: EngineArgs,
        question: String,
    },
    /// Print every template score for a question, best first
    MatchDebug {
        #[command(flatten)]
        opts: EngineArgs,
        question: String,
    },
    /// Train a CRF tagger on a labeled corpus
    TrainNer {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 50)]
        epochs: usize,
        #[arg(long)]
        out: PathBuf,
        /// Add knowledge-graph name features from these triples
        #[arg(long)]
        triples: Vec<PathBuf>,
    },
    /// Score the engine on a JSON-lines dataset
    Eval {
        #[command(flatten)]
        opts: EngineArgs,
        #[arg(long)]
        dataset: PathBuf,
    },
}

#[derive(Args)]
struct EngineArgs {
    /// `key = value` file; flags given alongside it win
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    triples: Vec<PathBuf>,
    #[arg(long)]
    templates: Option<PathBuf>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    ner_model: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long, overrides_with = "no_crf")]
    use_crf: bool,
    #[arg(long)]
    no_crf: bool,
}

/// Bad invocation: exit status 1. Every other failure exits 2.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    let result = run(cli.command, &mut out).and_then(|()| out.flush().map_err(Into::into));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("kgqa: {e:#}");
            if e.downcast_ref::<Usage>().is_some() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Ok(BufReader::new(f))
}

fn load_graph(paths: &[PathBuf]) -> Result<KnowledgeGraph> {
    let mut g = KnowledgeGraph::new();
    for p in paths {
        g.import_tsv(open(p)?)
            .with_context(|| format!("while importing {}", p.display()))?;
    }
    Ok(g)
}

struct Resolved {
    triples: Vec<PathBuf>,
    templates: Option<PathBuf>,
    embeddings: Option<PathBuf>,
    ner_model: Option<PathBuf>,
    config: EngineConfig,
}

fn resolve(args: EngineArgs) -> Result<Resolved> {
    check_ranges(args.alpha, args.threshold).map_err(|e| usage(e.to_string()))?;
    let file = match &args.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    let defaults = EngineConfig::default();
    let use_crf = if args.use_crf {
        true
    } else if args.no_crf {
        false
    } else {
        file.use_crf.unwrap_or(defaults.use_crf)
    };
    let r = Resolved {
        triples: if args.triples.is_empty() {
            file.triples
        } else {
            args.triples
        },
        templates: args.templates.or(file.templates),
        embeddings: args.embeddings.or(file.embeddings),
        ner_model: args.ner_model.or(file.ner_model),
        config: EngineConfig {
            alpha: args.alpha.or(file.alpha).unwrap_or(defaults.alpha),
            threshold: args
                .threshold
                .or(file.threshold)
                .unwrap_or(defaults.threshold),
            use_crf,
        },
    };
    if r.triples.is_empty() {
        return Err(usage(
            "no triples file given (use --triples or a config file)",
        ));
    }
    if r.config.use_crf && r.ner_model.is_none() {
        return Err(usage(
            "use_crf is set but no NER model was given (--ner-model)",
        ));
    }
    Ok(r)
}

fn load_tagger(r: &Resolved) -> Result<Option<NerModel>> {
    match &r.ner_model {
        Some(p) if r.config.use_crf => {
            let model =
                NerModel::load(open(p)?).with_context(|| format!("in model {}", p.display()))?;
            Ok(Some(model))
        }
        _ => Ok(None),
    }
}

fn build_engine(args: EngineArgs) -> Result<Engine> {
    let r = resolve(args)?;
    let Some(templates_path) = &r.templates else {
        return Err(usage(
            "no templates file given (use --templates or a config file)",
        ));
    };
    let graph = load_graph(&r.triples)?;
    let templates = load_templates(open(templates_path)?)
        .with_context(|| format!("in templates {}", templates_path.display()))?;
    let emb = match &r.embeddings {
        Some(p) => EmbeddingTable::load(open(p)?)
            .with_context(|| format!("in embeddings {}", p.display()))?,
        None => EmbeddingTable::empty(DEFAULT_DIM),
    };
    let tagger = load_tagger(&r)?;
    let matcher = TemplateMatcher::new(templates, emb, r.config.alpha, r.config.threshold)?;
    Ok(Engine::new(graph, matcher, tagger, r.config))
}

fn run(command: Command, out: &mut impl Write) -> Result<()> {
    match command {
        Command::Import { triples, out: dest } => {
            let mut g = KnowledgeGraph::new();
            for p in &triples {
                let rep = g
                    .import_tsv(open(p)?)
                    .with_context(|| format!("while importing {}", p.display()))?;
                writeln!(
                    out,
                    "file={} rows={} entities_added={} triples_added={} duplicate_entities_skipped={} \
                     duplicate_triples_skipped={} malformed_lines={}",
                    p.display(),
                    rep.rows_applied,
                    rep.entities_added,
                    rep.triples_added,
                    rep.duplicate_entities_skipped,
                    rep.duplicate_triples_skipped,
                    rep.malformed_lines
                )?;
            }
            writeln!(out, "{}", g.stats())?;
            if let Some(dest) = dest {
                let f = File::create(&dest)
                    .with_context(|| format!("cannot create {}", dest.display()))?;
                let mut w = BufWriter::new(f);
                g.export_tsv(&mut w)?;
                w.flush()?;
            }
        }
        Command::Stats { triples } => {
            writeln!(out, "{}", load_graph(&triples)?.stats())?;
        }
        Command::Ask { opts, question } => {
            let engine = build_engine(opts)?;
            writeln!(out, "{}", engine.answer(&question).text)?;
        }
        Command::Repl { opts } => {
            let engine = build_engine(opts)?;
            let stdin = io::stdin();
            let mut lines = stdin.lock().lines();
            loop {
                write!(out, "? ")?;
                out.flush()?;
                let Some(line) = lines.next().transpose()? else {
                    writeln!(out)?;
                    break;
                };
                if line.trim() == ":quit" {
                    break;
                }
                writeln!(out, "{}", engine.answer(&line).text)?;
            }
        }
        Command::Ner { opts, question } => {
            let r = resolve(opts)?;
            let graph = load_graph(&r.triples)?;
            let tokens = tokenize(&question);
            let tagger = load_tagger(&r)?;
            let mentions = recognize_mentions(
                &graph,
                &Gazetteer::from_graph(&graph),
                tagger.as_ref(),
                &tokens,
            );
            for m in mentions {
                writeln!(out, "{}", m.bracketed())?;
            }
        }
        Command::MatchDebug { opts, question } => {
            let engine = build_engine(opts)?;
            let tokens = tokenize(&question);
            let mentions = engine.recognize(&tokens);
            let abstracted = abstract_question(&tokens, &mentions);
            writeln!(out, "abstracted: {}", abstracted.join(" "))?;
            for r in engine.matcher().rank(&abstracted) {
                let t = engine
                    .matcher()
                    .template(&r.template_id)
                    .expect("ranked template exists");
                writeln!(
                    out,
                    "{}\t{:.6}\t{}\t{}",
                    r.template_id,
                    r.score,
                    if r.passed { "pass" } else { "below_threshold" },
                    t.text
                )?;
            }
        }
        Command::TrainNer {
            corpus,
            epochs,
            out: dest,
            triples,
        } => {
            if epochs == 0 {
                return Err(usage("--epochs must be at least 1"));
            }
            let sentences = read_corpus(open(&corpus)?)
                .with_context(|| format!("in corpus {}", corpus.display()))?;
            let (ls, gold) = index_corpus(&sentences)?;
            let lexicon = if triples.is_empty() {
                None
            } else {
                Some(Lexicon::from_graph(&load_graph(&triples)?))
            };
            let data: Vec<_> = sentences
                .iter()
                .map(|s| s.tokens.clone())
                .zip(gold)
                .collect();
            let trained = train_perceptron(&data, &ls, epochs, lexicon)?;
            for (i, m) in trained.mistakes_per_epoch.iter().enumerate() {
                writeln!(out, "epoch={} mistakes={m}", i + 1)?;
            }
            let model = NerModel::from_trained(ls, trained);
            let c = model.evaluate(&sentences)?;
            let p = kgqa_core::metrics::precision(c).unwrap_or(0.0);
            let r = kgqa_core::metrics::recall(c).unwrap_or(0.0);
            writeln!(out, "train_f1={:.6}", kgqa_core::metrics::f1(p, r))?;
            let f =
                File::create(&dest).with_context(|| format!("cannot create {}", dest.display()))?;
            let mut w = BufWriter::new(f);
            model.save(&mut w)?;
            w.flush()?;
        }
        Command::Eval { opts, dataset } => {
            let engine = build_engine(opts)?;
            let items = read_dataset(open(&dataset)?)
                .with_context(|| format!("in dataset {}", dataset.display()))?;
            let report = score_dataset(&items, &engine, ScoreOptions::default())?;
            write!(out, "{}", report.render())?;
        }
    }
    Ok(())
}
