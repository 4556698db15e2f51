//! Pipeline orchestration: configuration, the per-conversation topic-count
//! policy, naive baselines, segmenter/labeler dispatch and evaluation
//! reports.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{
    parse_conversation, parse_gold, Annotator, Conversation, GoldAnnotation, LanguageResources,
};
use crate::error::{Error, Result};
use crate::fqg::build_fqg;
use crate::labeler::{label_topics, LabeledTopics, LabelerParams, RankerKind, SyntacticFilter};
use crate::lexchain::LcsegParams;
use crate::metrics::{self, LabeledAnnotation, MetricPhrase, SimilarityProvider};
use crate::segmentation::Segmentation;
use crate::supervised::{supervised_segment, ClassifierModel, FeatureContext};

/// All tunables, with the defaults used throughout. Unknown keys in a
/// config file are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    /// Segmentation model: all-different, all-same, speaker, blocks-k,
    /// mb, lda, lda+fqg, lcseg, lcseg+fqg, supervised.
    pub segmenter: String,
    /// Word-ranking model for labeling: freq, lead, mt, bias, bias+,
    /// corgen, corgen+, corbias, corbias+.
    pub ranker: String,
    /// Topic-count override; 0 derives K from gold annotations.
    pub topics: usize,
    pub lcseg_window: usize,
    pub lcseg_hiatus: usize,
    pub lda_alpha_times_k: f64,
    pub lda_beta: f64,
    pub lda_lambda: f64,
    pub lda_iters: usize,
    pub lambda_bias: f64,
    pub delta: f64,
    pub cooccurrence_window: usize,
    pub m_fraction: f64,
    pub mmr_rho: f64,
    pub labels_k: usize,
    pub leading_sentences: usize,
    pub seed: u64,
    /// Block size for the blocks-k baseline.
    pub block_size: usize,
    /// Use TF.IDF instead of TF cosine in the sentence-similarity model.
    pub mb_tfidf: bool,
    /// Path to a trained classifier model (required by `supervised`).
    pub model_path: Option<String>,
    /// Optional noun-pair similarity table (TSV) for semantic label
    /// metrics.
    pub similarity_table: Option<String>,
    /// Overrides for the bundled word lists (one entry per line).
    pub stopwords_path: Option<String>,
    pub abbreviations_path: Option<String>,
    pub cue_words_path: Option<String>,
    pub pos_lexicon_path: Option<String>,
    /// Worker pool width for multi-conversation runs; 0 = one per CPU.
    pub jobs: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            segmenter: "lcseg+fqg".into(),
            ranker: "corbias+".into(),
            topics: 0,
            lcseg_window: 2,
            lcseg_hiatus: 11,
            lda_alpha_times_k: 50.0,
            lda_beta: 0.01,
            lda_lambda: 20.0,
            lda_iters: 2000,
            lambda_bias: 0.85,
            delta: 0.4,
            cooccurrence_window: 2,
            m_fraction: 0.25,
            mmr_rho: 0.35,
            labels_k: 5,
            leading_sentences: 2,
            seed: 42,
            block_size: 5,
            mb_tfidf: false,
            model_path: None,
            similarity_table: None,
            stopwords_path: None,
            abbreviations_path: None,
            cue_words_path: None,
            pos_lexicon_path: None,
            jobs: 1,
        }
    }
}

impl PipelineConfig {
    pub fn lcseg_params(&self) -> LcsegParams {
        LcsegParams {
            window: self.lcseg_window,
            hiatus: self.lcseg_hiatus,
            ..LcsegParams::default()
        }
    }

    pub fn labeler_params(&self) -> Result<LabelerParams> {
        Ok(LabelerParams {
            ranker: RankerKind::parse(&self.ranker)?,
            lambda_bias: self.lambda_bias,
            delta: self.delta,
            window: self.cooccurrence_window,
            m_fraction: self.m_fraction,
            mmr_rho: self.mmr_rho,
            labels_k: self.labels_k,
            damping: 0.85,
            leading: self.leading_sentences,
            filter: SyntacticFilter::NounsAdjectives,
        })
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml_from_str(text)
    }

    pub fn to_toml(&self) -> String {
        toml_to_string(self)
    }

    /// Apply the CONVTOPIC_SEED environment override.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(seed) = std::env::var("CONVTOPIC_SEED") {
            self.seed = seed
                .parse()
                .map_err(|_| Error::Config(format!("CONVTOPIC_SEED is not an integer: {seed}")))?;
        }
        Ok(())
    }

    /// Bundled word lists, with any configured file overrides applied.
    pub fn language_resources(&self) -> Result<LanguageResources> {
        let mut lang = LanguageResources::default();
        if let Some(path) = &self.stopwords_path {
            lang = lang.with_stopwords_file(std::path::Path::new(path))?;
        }
        if let Some(path) = &self.abbreviations_path {
            lang = lang.with_abbreviations_file(std::path::Path::new(path))?;
        }
        if let Some(path) = &self.cue_words_path {
            lang = lang.with_cue_words_file(std::path::Path::new(path))?;
        }
        if let Some(path) = &self.pos_lexicon_path {
            lang = lang.with_pos_lexicon_file(std::path::Path::new(path))?;
        }
        Ok(lang)
    }
}

// The config file is flat `key = value` pairs; a full TOML parser is not
// needed, so the bridge below rewrites it into JSON and lets serde enforce
// types and unknown-key rejection.
fn toml_from_str(text: &str) -> Result<PipelineConfig> {
    let mut config = PipelineConfig::default();
    let json = crate::pipeline::toml_like_to_json(text)?;
    if !json.is_empty() {
        config = serde_json::from_str(&json)?;
    }
    Ok(config)
}

fn toml_to_string(config: &PipelineConfig) -> String {
    let value = serde_json::to_value(config).expect("config serializes");
    let mut out = String::new();
    if let serde_json::Value::Object(map) = value {
        for (key, val) in map {
            match val {
                serde_json::Value::Null => {}
                serde_json::Value::String(s) => out.push_str(&format!("{key} = {s:?}\n")),
                other => out.push_str(&format!("{key} = {other}\n")),
            }
        }
    }
    out
}

/// Parse a flat `key = value` TOML-style document into JSON for serde.
/// Rejects unknown syntax; full TOML is not needed for a flat config.
pub fn toml_like_to_json(text: &str) -> Result<String> {
    let mut entries: Vec<String> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Config(format!(
                "config line {}: expected `key = value`",
                lineno + 1
            )));
        };
        let key = key.trim();
        let value = value.trim();
        let json_value = if value.starts_with('"') && value.ends_with('"') && value.len() >= 2 {
            serde_json::to_string(&value[1..value.len() - 1]).expect("string")
        } else if value == "true" || value == "false" || value.parse::<f64>().is_ok() {
            value.to_string()
        } else {
            return Err(Error::Config(format!(
                "config line {}: cannot parse value {value:?}",
                lineno + 1
            )));
        };
        entries.push(format!("{:?}:{}", key, json_value));
    }
    if entries.is_empty() {
        return Ok(String::new());
    }
    Ok(format!("{{{}}}", entries.join(",")))
}

// ---------------------------------------------------------------------------
// Topic-count policy and baselines
// ---------------------------------------------------------------------------

/// Topics per conversation: an explicit override wins; otherwise the
/// majority topic count across annotators, falling back to the floor of
/// the mean when no strict majority exists.
pub fn topic_count_policy(annotator_counts: &[usize], override_k: Option<usize>) -> Result<usize> {
    if let Some(k) = override_k {
        if k == 0 {
            return Err(Error::BadTopicCount { k, msg: "override must be positive".into() });
        }
        return Ok(k);
    }
    if annotator_counts.is_empty() {
        return Err(Error::Config(
            "no gold annotations and no --topics override: cannot choose K".into(),
        ));
    }
    let mut tally: BTreeMap<usize, usize> = BTreeMap::new();
    for &c in annotator_counts {
        *tally.entry(c).or_default() += 1;
    }
    if let Some((&k, _)) = tally.iter().find(|(_, &votes)| 2 * votes > annotator_counts.len()) {
        return Ok(k.max(1));
    }
    let mean = annotator_counts.iter().sum::<usize>() as f64 / annotator_counts.len() as f64;
    Ok((mean.floor() as usize).max(1))
}

/// Naive baseline segmenters.
pub fn run_baseline(name: &str, conversation: &Conversation, k: Option<usize>) -> Result<Segmentation> {
    let n = conversation.n_sentences();
    match name {
        "all-different" => {
            Ok(Segmentation::from_assignment(&(0..n).collect::<Vec<_>>()))
        }
        "all-same" => Ok(Segmentation::from_assignment(&vec![0; n])),
        "speaker" => {
            let authors: Vec<&str> = {
                let mut set: Vec<&str> =
                    conversation.comments.iter().map(|c| c.author.as_str()).collect();
                set.sort_unstable();
                set.dedup();
                set
            };
            let assignment: Vec<usize> = (0..n)
                .map(|sid| {
                    let author = conversation.author_of_sentence(sid);
                    authors.iter().position(|&a| a == author).unwrap_or(0)
                })
                .collect();
            Ok(Segmentation::from_assignment(&assignment))
        }
        "blocks-k" => {
            let size = k.unwrap_or(5).max(1);
            Ok(Segmentation::from_assignment(
                &(0..n).map(|i| i / size).collect::<Vec<_>>(),
            ))
        }
        other => Err(Error::UnknownName { kind: "baseline", name: other.to_string() }),
    }
}

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

/// Run the configured segmenter on one conversation.
pub fn segment_conversation(
    conversation: &Conversation,
    config: &PipelineConfig,
    lang: &LanguageResources,
    k: usize,
    model: Option<&ClassifierModel>,
) -> Result<Segmentation> {
    let lcseg = config.lcseg_params();
    match config.segmenter.as_str() {
        "all-different" | "all-same" | "speaker" => {
            run_baseline(&config.segmenter, conversation, None)
        }
        "blocks-k" => run_baseline("blocks-k", conversation, Some(config.block_size)),
        "mb" => crate::graphcut::mb_segment(conversation, k, config.mb_tfidf),
        "lcseg" => {
            let refs: Vec<&crate::corpus::Sentence> = conversation.sentences.iter().collect();
            crate::lexchain::lcseg_segment(&refs, k, &lcseg)
        }
        "lcseg+fqg" => {
            let fqg = build_fqg(conversation);
            crate::lexchain::lcseg_fqg_segment(conversation, &fqg, k, &lcseg)
        }
        "lda" => crate::topicmodel::lda_segment(
            conversation,
            k,
            None,
            config.lda_alpha_times_k / k as f64,
            config.lda_beta,
            1.0,
            config.lda_iters,
            config.seed,
        ),
        "lda+fqg" => {
            let fqg = build_fqg(conversation);
            crate::topicmodel::lda_segment(
                conversation,
                k,
                Some(&fqg),
                config.lda_alpha_times_k / k as f64,
                config.lda_beta,
                config.lda_lambda,
                config.lda_iters,
                config.seed,
            )
        }
        "supervised" => {
            let model = model.ok_or_else(|| {
                Error::Config("segmenter `supervised` needs --model <file>".into())
            })?;
            let ctx = FeatureContext::build(
                conversation,
                lang,
                k,
                &lcseg,
                config.lda_iters,
                config.seed,
                config.lda_lambda,
            )?;
            supervised_segment(&ctx, model, k)
        }
        other => Err(Error::UnknownName { kind: "segmenter", name: other.to_string() }),
    }
}

/// Segment and label one conversation with the configured models.
pub fn run_conversation(
    conversation: &Conversation,
    gold: Option<&GoldAnnotation>,
    config: &PipelineConfig,
    lang: &LanguageResources,
    model: Option<&ClassifierModel>,
) -> Result<(Segmentation, LabeledTopics)> {
    let counts: Vec<usize> = gold
        .map(|g| g.annotators.iter().map(Annotator::topic_count).collect())
        .unwrap_or_default();
    let override_k = (config.topics > 0).then_some(config.topics);
    let k = topic_count_policy(&counts, override_k)?
        .clamp(1, conversation.n_sentences().max(1));
    let segmentation = segment_conversation(conversation, config, lang, k, model)?;
    let fqg = build_fqg(conversation);
    let labels = label_topics(conversation, &fqg, &segmentation, &config.labeler_params()?)?;
    Ok((segmentation, labels))
}

// ---------------------------------------------------------------------------
// Evaluation report
// ---------------------------------------------------------------------------

/// Agreement of one model annotation against every gold annotator,
/// excluding INTRO/END sentences per annotator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SegmentationReport {
    pub conversation_id: String,
    pub per_annotator: Vec<AnnotatorAgreement>,
    pub mean_one_to_one: f64,
    pub mean_loc3: f64,
    pub mean_many_to_one: f64,
    pub model_entropy: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnnotatorAgreement {
    pub annotator_id: String,
    pub one_to_one: f64,
    pub loc3: f64,
    pub many_to_one: f64,
    pub gold_entropy: f64,
}

pub fn evaluate_segmentation(
    conversation_id: &str,
    model: &Segmentation,
    gold: &GoldAnnotation,
) -> Result<SegmentationReport> {
    let mut per_annotator = Vec::new();
    for annotator in &gold.annotators {
        let gold_seg = annotator.segmentation();
        model.check_universe(&gold_seg)?;
        let excluded = annotator.intro_end_sentences();
        let keep: Vec<bool> = excluded.iter().map(|e| !e).collect();
        let model_kept = model.restrict(&keep);
        let gold_kept = gold_seg.restrict(&keep);
        per_annotator.push(AnnotatorAgreement {
            annotator_id: annotator.id.clone(),
            one_to_one: metrics::one_to_one(&model_kept, &gold_kept)?,
            loc3: metrics::loc_k(&model_kept, &gold_kept, 3)?,
            many_to_one: metrics::many_to_one(&model_kept, &gold_kept)?,
            gold_entropy: metrics::entropy(&gold_kept),
        });
    }
    let n = per_annotator.len().max(1) as f64;
    Ok(SegmentationReport {
        conversation_id: conversation_id.to_string(),
        mean_one_to_one: per_annotator.iter().map(|a| a.one_to_one).sum::<f64>() / n,
        mean_loc3: per_annotator.iter().map(|a| a.loc3).sum::<f64>() / n,
        mean_many_to_one: per_annotator.iter().map(|a| a.many_to_one).sum::<f64>() / n,
        model_entropy: metrics::entropy(model),
        per_annotator,
    })
}

/// Label agreement against each annotator via the one-to-one cluster
/// mapping, reported for every output-list size k up to the configured
/// label count (the k-label output is the k-prefix of the greedy MMR
/// selection, renormalized).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabelReport {
    pub conversation_id: String,
    pub per_k: Vec<LabelKScores>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabelKScores {
    pub k: usize,
    pub mean_wmo: f64,
    pub max_wmo: f64,
    pub mean_wsmo: f64,
    pub max_wsmo: f64,
}

pub fn evaluate_labels(
    conversation_id: &str,
    model: &Segmentation,
    labels: &LabeledTopics,
    gold: &GoldAnnotation,
    lang: &LanguageResources,
    sim: &SimilarityProvider,
) -> Result<LabelReport> {
    let max_k = labels.values().map(|ls| ls.len()).max().unwrap_or(0).max(1);
    let mut per_k = Vec::new();
    for k in 1..=max_k {
        let model_side = LabeledAnnotation {
            segmentation: model.clone(),
            labels: labels
                .iter()
                .map(|(&topic, phrases)| {
                    let prefix = &phrases[..k.min(phrases.len())];
                    let total: f64 = prefix.iter().map(|p| p.score).sum();
                    let scored: Vec<(MetricPhrase, f64)> = prefix
                        .iter()
                        .map(|p| {
                            let score = if total > 0.0 {
                                p.score / total
                            } else if prefix.is_empty() {
                                0.0
                            } else {
                                1.0 / prefix.len() as f64
                            };
                            (MetricPhrase::from_text(&p.text, lang), score)
                        })
                        .collect();
                    (topic, scored)
                })
                .collect(),
        };
        let mut mean_wmo = 0.0;
        let mut mean_wsmo = 0.0;
        let mut max_wmo = 0.0f64;
        let mut max_wsmo = 0.0f64;
        for annotator in &gold.annotators {
            let gold_side = LabeledAnnotation {
                segmentation: annotator.segmentation(),
                labels: annotator
                    .labels
                    .iter()
                    .filter_map(|(topic, label)| {
                        topic.parse::<usize>().ok().map(|t| {
                            (t, vec![(MetricPhrase::from_text(label, lang), 1.0)])
                        })
                    })
                    .collect(),
            };
            let scores = metrics::end_to_end_label_agreement(&gold_side, &model_side, sim)?;
            mean_wmo += scores.mean_wmo;
            mean_wsmo += scores.mean_wsmo;
            max_wmo = max_wmo.max(scores.max_wmo);
            max_wsmo = max_wsmo.max(scores.max_wsmo);
        }
        let n = gold.annotators.len().max(1) as f64;
        per_k.push(LabelKScores {
            k,
            mean_wmo: mean_wmo / n,
            max_wmo,
            mean_wsmo: mean_wsmo / n,
            max_wsmo,
        });
    }
    Ok(LabelReport { conversation_id: conversation_id.to_string(), per_k })
}

// ---------------------------------------------------------------------------
// Corpus directory loading
// ---------------------------------------------------------------------------

/// A conversation file (`<stem>.conv.json`) with its optional gold file
/// (`<stem>.gold.json`).
pub struct CorpusEntry {
    pub stem: String,
    pub conversation: Conversation,
    pub gold: Option<GoldAnnotation>,
}

/// Load every `*.conv.json` in a directory (sorted by file stem), pairing
/// gold files by name.
pub fn load_corpus_dir(dir: &Path, lang: &LanguageResources) -> Result<Vec<CorpusEntry>> {
    let mut stems: Vec<String> = Vec::new();
    let entries =
        std::fs::read_dir(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir.display().to_string(), e))?;
        let name = entry.file_name().to_string_lossy().to_string();
        if let Some(stem) = name.strip_suffix(".conv.json") {
            stems.push(stem.to_string());
        }
    }
    stems.sort();
    let mut corpus = Vec::new();
    for stem in stems {
        let conv_path = dir.join(format!("{stem}.conv.json"));
        let text = std::fs::read_to_string(&conv_path)
            .map_err(|e| Error::io(conv_path.display().to_string(), e))?;
        let conversation = parse_conversation(&text, lang)?;
        let gold_path = dir.join(format!("{stem}.gold.json"));
        let gold = if gold_path.exists() {
            let text = std::fs::read_to_string(&gold_path)
                .map_err(|e| Error::io(gold_path.display().to_string(), e))?;
            Some(parse_gold(&text)?)
        } else {
            None
        };
        corpus.push(CorpusEntry { stem, conversation, gold });
    }
    Ok(corpus)
}
