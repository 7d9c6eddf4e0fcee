//! Command-line interface.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::LevelFilter;
use serde::Serialize;

use crate::config::PipelineConfig;
use crate::error::{require, AppError, AppResult};
use crate::formats::binary::write_file;
use crate::formats::features::load_features;
use crate::formats::text::{load_word_list, read_json, read_jsonl, read_text, PaintingMeta};
use crate::pipeline::{
    build_knowledge_index, corpus_input, eval_recall_cmd, evaluate, fill_text, find_record,
    load_corpus, load_filler, load_knowledge_index, load_tagger, load_vocab, preprocess,
    render_evaluation, retrieve, stamp, train_decoder, train_filler_cmd, Describer, PaintingInput,
    Prediction,
};

#[derive(Debug, Parser)]
#[command(
    name = "artdesc",
    version,
    about = "Knowledge-grounded, multi-topic painting descriptions"
)]
pub struct Cli {
    /// Pipeline configuration file (TOML).
    #[arg(long, short, global = true)]
    pub config: Option<PathBuf>,
    /// Override a setting, e.g. `--set decoder.epochs=5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
    /// More log output (repeat for more).
    #[arg(long, short, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    /// Only log errors.
    #[arg(long, short, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Annotate the raw corpus and build the vocabulary.
    Preprocess,
    /// Train the configured topic decoder.
    TrainDecoder,
    /// Train the slot filler.
    TrainFiller,
    /// Build or inspect the knowledge index.
    Index {
        #[command(subcommand)]
        action: IndexAction,
    },
    /// Rank knowledge articles for a painting.
    Retrieve {
        #[command(flatten)]
        painting: PaintingArgs,
        /// Retrieval depth; defaults to the configured k.
        #[arg(long)]
        k: Option<usize>,
    },
    /// Generate descriptions with provenance reports.
    Describe {
        #[command(flatten)]
        painting: PaintingArgs,
        /// Describe every painting listed (one id per line) as JSON lines.
        #[arg(long, conflicts_with_all = ["painting", "meta"])]
        split: Option<PathBuf>,
        /// Describe every corpus painting as JSON lines.
        #[arg(long, conflicts_with_all = ["painting", "meta", "split"])]
        all: bool,
        /// Write the output here instead of stdout.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Score predictions against the corpus references.
    Evaluate {
        /// Describe output (JSON lines).
        #[arg(long)]
        predictions: PathBuf,
        /// Painting ids of the split, one per line.
        #[arg(long)]
        split: Option<PathBuf>,
        /// Also write the report as JSON here.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Fill masked sentences from given article files.
    Fill {
        /// Masked sentence such as "painted by [person] in [date] ."; repeatable.
        #[arg(long, required = true)]
        masked: Vec<String>,
        /// Plain-text article files.
        #[arg(long)]
        articles: Vec<PathBuf>,
        /// JSON object with artist, type, timeframe and school.
        #[arg(long)]
        attrs: Option<PathBuf>,
    },
    /// R@k of the knowledge index against relevance annotations.
    EvalRecall {
        #[arg(long, value_delimiter = ',', default_values_t = [1usize, 5, 10])]
        k: Vec<usize>,
    },
    /// Print the resolved configuration.
    Config,
}

#[derive(Debug, Subcommand)]
pub enum IndexAction {
    /// Index the knowledge articles.
    Build,
    /// Print index statistics.
    Info,
}

#[derive(Debug, Args)]
pub struct PaintingArgs {
    /// Corpus painting id.
    #[arg(long, conflicts_with = "meta")]
    pub painting: Option<String>,
    /// Metadata JSON of a painting outside the corpus.
    #[arg(long, requires = "features")]
    pub meta: Option<PathBuf>,
    /// Feature grid of the painting given by --meta.
    #[arg(long, requires = "meta")]
    pub features: Option<PathBuf>,
}

fn print_json<T: Serialize>(out: &mut dyn Write, value: &T) -> AppResult<()> {
    let s = serde_json::to_string_pretty(value).expect("serializable");
    writeln!(out, "{s}").map_err(|e| AppError::io(Path::new("<stdout>"), e))
}

fn emit(out: &mut dyn Write, path: Option<&Path>, text: &str) -> AppResult<()> {
    match path {
        Some(p) => write_file(p, text.as_bytes()),
        None => out
            .write_all(text.as_bytes())
            .map_err(|e| AppError::io(Path::new("<stdout>"), e)),
    }
}

fn load_meta(path: &Path) -> AppResult<PaintingMeta> {
    require(
        path,
        "painting metadata",
        "pass a JSON file with attributes and objects",
    )?;
    let mut meta: PaintingMeta = read_json(path)?;
    if meta.id.is_empty() {
        meta.id = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("painting")
            .to_string();
    }
    Ok(meta)
}

fn painting_input(cfg: &PipelineConfig, args: &PaintingArgs) -> AppResult<PaintingInput> {
    match (&args.painting, &args.meta, &args.features) {
        (Some(id), None, None) => corpus_input(cfg, id),
        (None, Some(meta), Some(features)) => {
            let meta = load_meta(meta)?;
            require(
                features,
                "features",
                "pass the painting's feature grid file",
            )?;
            Ok(PaintingInput {
                id: meta.id,
                grid: load_features(features)?,
                attributes: meta.attributes,
                objects: meta.objects,
                reference: meta.reference,
            })
        }
        _ => Err(AppError::usage(
            "name a corpus painting with --painting, or pass --meta and --features",
        )),
    }
}

fn split_ids(path: &Path) -> AppResult<Vec<String>> {
    require(path, "split", "pass a file with one painting id per line")?;
    load_word_list(path)
}

/// Runs one parsed command.
pub fn run(cli: &Cli, out: &mut dyn Write) -> AppResult<()> {
    let cfg = PipelineConfig::load(cli.config.as_deref(), &cli.overrides)?;
    match &cli.command {
        Command::Preprocess => print_json(out, &preprocess(&cfg)?),
        Command::TrainDecoder => print_json(out, &train_decoder(&cfg)?),
        Command::TrainFiller => print_json(out, &train_filler_cmd(&cfg)?),
        Command::Index { action } => match action {
            IndexAction::Build => print_json(out, &build_knowledge_index(&cfg)?),
            IndexAction::Info => {
                let index = load_knowledge_index(&cfg)?;
                print_json(
                    out,
                    &serde_json::json!({
                        "documents": index.as_ref().map_or(0, |i| i.num_docs()),
                        "terms": index.as_ref().map_or(0, |i| i.num_terms()),
                    }),
                )
            }
        },
        Command::Retrieve { painting, k } => {
            let k = k.unwrap_or(cfg.k);
            let (id, attributes, objects) = match (&painting.painting, &painting.meta) {
                (Some(id), None) => {
                    let records = load_corpus(&cfg)?;
                    let rec = find_record(&records, id)?;
                    (rec.id.clone(), rec.attributes.clone(), rec.objects.clone())
                }
                (None, Some(meta)) => {
                    let m = load_meta(meta)?;
                    (m.id, m.attributes, m.objects)
                }
                _ => return Err(AppError::usage("pass --painting or --meta")),
            };
            print_json(out, &retrieve(&cfg, &id, &attributes, &objects, k)?)
        }
        Command::Describe {
            painting,
            split,
            all,
            out: out_path,
        } => {
            let describer = Describer::load(&cfg)?;
            let ids = match (split, all) {
                (Some(p), _) => Some(split_ids(p)?),
                (None, true) => Some(load_corpus(&cfg)?.into_iter().map(|r| r.id).collect()),
                (None, false) => None,
            };
            match ids {
                None => {
                    let report = describer.describe(&painting_input(&cfg, painting)?)?;
                    let mut text = serde_json::to_string_pretty(&report).expect("serializable");
                    text.push('\n');
                    emit(out, out_path.as_deref(), &text)
                }
                Some(ids) => {
                    let mut text = String::new();
                    for id in &ids {
                        let report = describer.describe(&corpus_input(&cfg, id)?)?;
                        text.push_str(&serde_json::to_string(&report).expect("serializable"));
                        text.push('\n');
                    }
                    emit(out, out_path.as_deref(), &text)
                }
            }
        }
        Command::Evaluate {
            predictions,
            split,
            json,
        } => {
            require(
                predictions,
                "describe",
                "run `artdesc describe --all --out FILE` first",
            )?;
            let preds: Vec<Prediction> = read_jsonl(predictions)?;
            let records = load_corpus(&cfg)?;
            let split = split.as_deref().map(split_ids).transpose()?;
            let report = evaluate(&preds, &records, split.as_deref(), stamp(&cfg))?;
            if let Some(p) = json {
                let mut s = serde_json::to_string_pretty(&report).expect("serializable");
                s.push('\n');
                write_file(p, s.as_bytes())?;
            }
            emit(out, None, &render_evaluation(&report))
        }
        Command::Fill {
            masked,
            articles,
            attrs,
        } => {
            let vocab = load_vocab(&cfg)?;
            let (filler, _) = load_filler(&cfg, &vocab)?;
            let tagger = load_tagger(&cfg)?;
            let texts = articles
                .iter()
                .map(|p| read_text(p))
                .collect::<AppResult<Vec<_>>>()?;
            let attributes = match attrs {
                Some(p) => read_json(p)?,
                None => Default::default(),
            };
            let (candidates, filled) = fill_text(&filler, &tagger, masked, &texts, &attributes)?;
            let sentences: Vec<_> = filled
                .iter()
                .map(|f| serde_json::json!({ "filled": f.render(), "slots": f.slots }))
                .collect();
            print_json(
                out,
                &serde_json::json!({
                    "candidates": candidates.entries(),
                    "sentences": sentences,
                }),
            )
        }
        Command::EvalRecall { k } => print_json(out, &eval_recall_cmd(&cfg, k)?),
        Command::Config => emit(out, None, &cfg.to_toml()),
    }
}

fn level(cli: &Cli) -> LevelFilter {
    if cli.quiet {
        return LevelFilter::Error;
    }
    match cli.verbose {
        0 => LevelFilter::Warn,
        1 => LevelFilter::Info,
        2 => LevelFilter::Debug,
        _ => LevelFilter::Trace,
    }
}

/// Parses arguments, runs the command and returns the process exit code:
/// 0 success, 1 usage, 2 data error, 3 missing artifact.
pub fn main_with<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    crate::logging::init(level(&cli));
    match run(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            log::error!("{e}");
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
