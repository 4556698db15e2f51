//! Command-line pipeline: parse conversations, build fragment quotation
//! graphs, segment, label, train the supervised segmenter, and evaluate
//! against gold annotations.

mod reports;

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use convtopic_core::corpus::{parse_conversation, parse_gold, Annotator, LanguageResources};
use convtopic_core::fqg::build_fqg;
use convtopic_core::labeler::label_topics;
use convtopic_core::metrics::SimilarityProvider;
use convtopic_core::pipeline::{
    load_corpus_dir, segment_conversation, topic_count_policy, PipelineConfig,
};
use convtopic_core::supervised::{
    feature_names, pair_expansion, train_with_cv, ClassifierModel, FeatureContext,
};
use convtopic_core::Segmentation;

#[derive(Parser)]
#[command(name = "convtopic", version, about = "Topic segmentation and labeling for asynchronous conversations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a conversation document and dump the normalized model.
    Parse {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Pretty-print the JSON output.
        #[arg(long)]
        pretty: bool,
    },
    /// Fragment quotation graph tools.
    Fqg {
        #[command(subcommand)]
        action: FqgAction,
    },
    /// Segment one conversation into topical clusters.
    Segment {
        #[arg(long)]
        input: PathBuf,
        /// Gold file used to pick the topic count when --topics is absent.
        #[arg(long)]
        gold: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Persist the fitted LDA model (lda / lda+fqg segmenters only).
        #[arg(long)]
        save_lda_model: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Label the topics of a segmented conversation.
    Label {
        #[arg(long)]
        input: PathBuf,
        /// Segmentation JSON produced by `segment`.
        #[arg(long)]
        segmentation: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Train the pairwise same/different-topic classifier on a gold corpus.
    Train {
        /// Directory of <stem>.conv.json / <stem>.gold.json files.
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Use only the first N conversations (learning-curve runs).
        #[arg(long)]
        train_subset: Option<usize>,
        /// Report leave-one-out pairwise accuracy before the final fit.
        #[arg(long)]
        loo: bool,
        /// Write a feature -> |weight| TSV report.
        #[arg(long)]
        importance: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Segment a gold corpus with one model and report agreement metrics.
    Evaluate {
        #[arg(long)]
        corpus: PathBuf,
        /// TSV report path (stdout when omitted).
        #[arg(long)]
        report: Option<PathBuf>,
        /// JSON report path.
        #[arg(long)]
        json: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Full run: segment and label every conversation, write artifacts and
    /// an evaluation report.
    Pipeline {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// TOML-style config file; flags override its values.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Agreement metrics between two segmentation files.
    Report {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
    },
}

#[derive(Subcommand)]
enum FqgAction {
    /// Dump the graph as JSON, or Graphviz DOT with --dot.
    Dump {
        #[arg(long)]
        input: PathBuf,
        /// Emit Graphviz DOT (node label: fragment id + leading text).
        #[arg(long)]
        dot: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Flag-level overrides of the pipeline configuration. Every tunable
/// defaults to the reported settings; flags beat the config file, which
/// beats the CONVTOPIC_SEED environment override.
#[derive(Args)]
struct Overrides {
    /// Segmenter: all-different, all-same, speaker, blocks-k, mb, lda,
    /// lda+fqg, lcseg, lcseg+fqg, supervised.
    #[arg(long)]
    segmenter: Option<String>,
    /// Ranker: freq, lead, mt, bias, bias+, corgen, corgen+, corbias,
    /// corbias+.
    #[arg(long)]
    ranker: Option<String>,
    /// Fixed topic count per conversation (otherwise derived from gold).
    #[arg(long)]
    topics: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    lcseg_window: Option<usize>,
    #[arg(long)]
    lcseg_hiatus: Option<usize>,
    #[arg(long)]
    lda_iters: Option<usize>,
    /// Alias of --seed (a single seed drives all sampling).
    #[arg(long)]
    lda_seed: Option<u64>,
    #[arg(long)]
    lda_lambda: Option<f64>,
    #[arg(long)]
    labels_k: Option<usize>,
    #[arg(long)]
    block_size: Option<usize>,
    /// Trained classifier model (required by the supervised segmenter).
    #[arg(long)]
    model: Option<PathBuf>,
    /// Noun-pair similarity TSV for the semantic label metric.
    #[arg(long)]
    sim_table: Option<PathBuf>,
    /// Stopword list override (one word per line).
    #[arg(long)]
    stopwords: Option<PathBuf>,
    /// Abbreviation list override for sentence splitting.
    #[arg(long)]
    abbreviations: Option<PathBuf>,
    /// Cue-word list override for the classifier feature.
    #[arg(long)]
    cue_words: Option<PathBuf>,
    /// POS lexicon override (word<TAB>TAG lines).
    #[arg(long)]
    pos_lexicon: Option<PathBuf>,
    /// Worker pool width for corpus runs (0 = one per CPU core).
    #[arg(long)]
    jobs: Option<usize>,
}

impl Overrides {
    fn apply(&self, config: &mut PipelineConfig) {
        if let Some(v) = &self.segmenter {
            config.segmenter = v.clone();
        }
        if let Some(v) = &self.ranker {
            config.ranker = v.clone();
        }
        if let Some(v) = self.topics {
            config.topics = v;
        }
        if let Some(v) = self.seed {
            config.seed = v;
        }
        if let Some(v) = self.lcseg_window {
            config.lcseg_window = v;
        }
        if let Some(v) = self.lcseg_hiatus {
            config.lcseg_hiatus = v;
        }
        if let Some(v) = self.lda_iters {
            config.lda_iters = v;
        }
        if let Some(v) = self.lda_seed {
            config.seed = v;
        }
        if let Some(v) = self.lda_lambda {
            config.lda_lambda = v;
        }
        if let Some(v) = self.labels_k {
            config.labels_k = v;
        }
        if let Some(v) = self.block_size {
            config.block_size = v;
        }
        if let Some(v) = &self.model {
            config.model_path = Some(v.display().to_string());
        }
        if let Some(v) = &self.sim_table {
            config.similarity_table = Some(v.display().to_string());
        }
        if let Some(v) = &self.stopwords {
            config.stopwords_path = Some(v.display().to_string());
        }
        if let Some(v) = &self.abbreviations {
            config.abbreviations_path = Some(v.display().to_string());
        }
        if let Some(v) = &self.cue_words {
            config.cue_words_path = Some(v.display().to_string());
        }
        if let Some(v) = &self.pos_lexicon {
            config.pos_lexicon_path = Some(v.display().to_string());
        }
        if let Some(v) = self.jobs {
            config.jobs = v;
        }
    }

    /// Resolution order: defaults < config file < CONVTOPIC_SEED < flags.
    fn resolve(&self, config_path: Option<&PathBuf>) -> Result<PipelineConfig> {
        let mut config = match config_path {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                PipelineConfig::from_toml(&text)?
            }
            None => PipelineConfig::default(),
        };
        config.apply_env()?;
        self.apply(&mut config);
        Ok(config)
    }
}

fn main() {
    if let Err(err) = run() {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn read(path: &PathBuf) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn emit(out: Option<&PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent).ok();
            }
            std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn load_model(config: &PipelineConfig) -> Result<Option<ClassifierModel>> {
    match &config.model_path {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading model {path}"))?;
            Ok(Some(ClassifierModel::load_json(&text)?))
        }
        None => Ok(None),
    }
}

fn similarity_provider(config: &PipelineConfig) -> Result<SimilarityProvider> {
    match &config.similarity_table {
        Some(path) => Ok(SimilarityProvider::from_tsv_file(std::path::Path::new(path))?),
        None => Ok(SimilarityProvider::identity()),
    }
}

fn run() -> Result<()> {
    match Cli::parse().command {
        Command::Parse { input, out, pretty } => {
            let lang = LanguageResources::default();
            let conversation = parse_conversation(&read(&input)?, &lang)?;
            let text = if pretty {
                serde_json::to_string_pretty(&conversation)?
            } else {
                serde_json::to_string(&conversation)?
            };
            emit(out.as_ref(), &text)
        }
        Command::Fqg { action: FqgAction::Dump { input, dot, out } } => {
            let lang = LanguageResources::default();
            let conversation = parse_conversation(&read(&input)?, &lang)?;
            let fqg = build_fqg(&conversation);
            let text = if dot {
                fqg.to_dot(&conversation)
            } else {
                serde_json::to_string_pretty(&fqg)?
            };
            emit(out.as_ref(), &text)
        }
        Command::Segment { input, gold, out, save_lda_model, overrides } => {
            let config = overrides.resolve(None)?;
            let lang = config.language_resources()?;
            let conversation = parse_conversation(&read(&input)?, &lang)?;
            let gold = gold.map(|p| read(&p)).transpose()?.map(|t| parse_gold(&t)).transpose()?;
            let counts: Vec<usize> = gold
                .as_ref()
                .map(|g| g.annotators.iter().map(Annotator::topic_count).collect())
                .unwrap_or_default();
            let k = topic_count_policy(&counts, (config.topics > 0).then_some(config.topics))?
                .clamp(1, conversation.n_sentences().max(1));
            let segmentation = if let Some(model_path) = &save_lda_model {
                let with_fqg = match config.segmenter.as_str() {
                    "lda" => None,
                    "lda+fqg" => Some(build_fqg(&conversation)),
                    other => bail!("--save-lda-model applies to lda segmenters, not {other}"),
                };
                let (model, seg) = convtopic_core::topicmodel::lda_fit_and_segment(
                    &conversation,
                    k,
                    with_fqg.as_ref(),
                    config.lda_alpha_times_k / k as f64,
                    config.lda_beta,
                    if with_fqg.is_some() { config.lda_lambda } else { 1.0 },
                    config.lda_iters,
                    config.seed,
                )?;
                emit(Some(model_path), &model.save_json())?;
                seg
            } else {
                let model = load_model(&config)?;
                segment_conversation(&conversation, &config, &lang, k, model.as_ref())?
            };
            emit(out.as_ref(), &reports::segmentation_json(&conversation.id, &segmentation)?)
        }
        Command::Label { input, segmentation, out, overrides } => {
            let config = overrides.resolve(None)?;
            let lang = config.language_resources()?;
            let conversation = parse_conversation(&read(&input)?, &lang)?;
            let seg = reports::segmentation_from_json(&read(&segmentation)?)?;
            if seg.len() != conversation.n_sentences() {
                bail!(
                    "segmentation covers {} sentences but the conversation has {}",
                    seg.len(),
                    conversation.n_sentences()
                );
            }
            let fqg = build_fqg(&conversation);
            let labels = label_topics(&conversation, &fqg, &seg, &config.labeler_params()?)?;
            emit(out.as_ref(), &reports::labels_json(&labels)?)
        }
        Command::Train { corpus, out, train_subset, loo, importance, overrides } => {
            let config = overrides.resolve(None)?;
            let lang = config.language_resources()?;
            let mut entries = load_corpus_dir(&corpus, &lang)?;
            entries.retain(|e| e.gold.is_some());
            if let Some(n) = train_subset {
                entries.truncate(n);
            }
            if entries.is_empty() {
                bail!("no gold-annotated conversations found in {}", corpus.display());
            }

            let expand = |skip: Option<usize>| -> Result<Vec<(Vec<f64>, bool)>> {
                let mut pairs = Vec::new();
                for (i, entry) in entries.iter().enumerate() {
                    if Some(i) == skip {
                        continue;
                    }
                    pairs.extend(conversation_pairs(entry, &config, &lang)?);
                }
                Ok(pairs)
            };

            if loo {
                println!("conversation\ttest_pairs\taccuracy");
                for (held_out, entry) in entries.iter().enumerate() {
                    let train_pairs = expand(Some(held_out))?;
                    if train_pairs.is_empty() {
                        continue;
                    }
                    let Ok(model) = train_with_cv(&train_pairs, &feature_names()) else {
                        continue;
                    };
                    let test_pairs = conversation_pairs(entry, &config, &lang)?;
                    let correct = test_pairs
                        .iter()
                        .filter(|(x, y)| (model.predict(x) >= 0.5) == *y)
                        .count();
                    println!(
                        "{}\t{}\t{:.4}",
                        entry.stem,
                        test_pairs.len(),
                        correct as f64 / test_pairs.len().max(1) as f64
                    );
                }
            }

            let pairs = expand(None)?;
            let model = train_with_cv(&pairs, &feature_names())?;
            emit(Some(&out), &model.save_json())?;
            if let Some(path) = importance {
                let mut tsv = String::from("feature\tabs_weight\n");
                for (name, weight) in model.importance() {
                    tsv.push_str(&format!("{name}\t{weight:.6}\n"));
                }
                emit(Some(&path), &tsv)?;
            }
            eprintln!(
                "trained on {} pairs from {} conversations (l2 = {})",
                pairs.len(),
                entries.len(),
                model.l2_strength
            );
            Ok(())
        }
        Command::Evaluate { corpus, report, json, overrides } => {
            let config = overrides.resolve(None)?;
            let lang = config.language_resources()?;
            let entries = load_corpus_dir(&corpus, &lang)?;
            let model = load_model(&config)?;
            let outcome = reports::evaluate_corpus(&entries, &config, &lang, model.as_ref())?;
            emit(report.as_ref(), &outcome.to_tsv())?;
            if let Some(path) = json {
                emit(Some(&path), &serde_json::to_string_pretty(&outcome)?)?;
            }
            Ok(())
        }
        Command::Pipeline { corpus, out_dir, config, overrides } => {
            let config = overrides.resolve(config.as_ref())?;
            let lang = config.language_resources()?;
            let entries = load_corpus_dir(&corpus, &lang)?;
            if entries.is_empty() {
                bail!("no conversations found in {}", corpus.display());
            }
            let model = load_model(&config)?;
            if config.segmenter == "supervised" && model.is_none() {
                bail!("segmenter `supervised` needs --model <file>");
            }
            let sim = similarity_provider(&config)?;
            reports::run_pipeline_dir(&entries, &config, &lang, model.as_ref(), &sim, &out_dir)
        }
        Command::Report { a, b } => {
            let seg_a = reports::segmentation_from_json(&read(&a)?)?;
            let seg_b = reports::segmentation_from_json(&read(&b)?)?;
            let one = convtopic_core::metrics::one_to_one(&seg_a, &seg_b)?;
            let loc = convtopic_core::metrics::loc_k(&seg_a, &seg_b, 3)?;
            let m2o = convtopic_core::metrics::many_to_one(&seg_a, &seg_b)?;
            println!("metric\tvalue");
            println!("one_to_one\t{one:.6}");
            println!("loc_3\t{loc:.6}");
            println!("many_to_one\t{m2o:.6}");
            println!("entropy_a\t{:.6}", convtopic_core::metrics::entropy(&seg_a));
            println!("entropy_b\t{:.6}", convtopic_core::metrics::entropy(&seg_b));
            Ok(())
        }
    }
}

/// Pairs of one gold conversation under the configured feature settings.
fn conversation_pairs(
    entry: &convtopic_core::pipeline::CorpusEntry,
    config: &PipelineConfig,
    lang: &LanguageResources,
) -> Result<Vec<(Vec<f64>, bool)>> {
    let gold = entry.gold.as_ref().expect("gold-annotated entry");
    let counts: Vec<usize> = gold.annotators.iter().map(Annotator::topic_count).collect();
    let k = topic_count_policy(&counts, (config.topics > 0).then_some(config.topics))?
        .clamp(1, entry.conversation.n_sentences().max(1));
    let ctx = FeatureContext::build(
        &entry.conversation,
        lang,
        k,
        &config.lcseg_params(),
        config.lda_iters,
        config.seed,
        config.lda_lambda,
    )?;
    let segmentations: Vec<Segmentation> =
        gold.annotators.iter().map(Annotator::segmentation).collect();
    Ok(pair_expansion(&ctx, &segmentations)?)
}
