//! Output artifacts and evaluation reports: segmentation/label JSON files,
//! TSV/JSON metric tables without per-run nondeterminism, and the pipeline
//! directory layout.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use convtopic_core::corpus::LanguageResources;
use convtopic_core::labeler::LabeledTopics;
use convtopic_core::metrics::SimilarityProvider;
use convtopic_core::pipeline::{
    evaluate_labels, evaluate_segmentation, run_conversation, CorpusEntry, LabelReport,
    PipelineConfig, SegmentationReport,
};
use convtopic_core::supervised::ClassifierModel;
use convtopic_core::Segmentation;

#[derive(Debug, Serialize, Deserialize)]
struct SegmentationFile {
    conversation_id: String,
    k: usize,
    k_effective: usize,
    topic_of: Vec<usize>,
}

pub fn segmentation_json(conversation_id: &str, seg: &Segmentation) -> Result<String> {
    let file = SegmentationFile {
        conversation_id: conversation_id.to_string(),
        k: seg.k,
        k_effective: seg.k_effective(),
        topic_of: seg.topic_of.clone(),
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

pub fn segmentation_from_json(text: &str) -> Result<Segmentation> {
    let file: SegmentationFile = serde_json::from_str(text)?;
    Ok(Segmentation { topic_of: file.topic_of, k: file.k })
}

#[derive(Debug, Serialize)]
struct LabelEntry {
    label: String,
    score: f64,
}

/// `{topic_id: [{label, score}]}` keyed by decimal topic id.
pub fn labels_json(labels: &LabeledTopics) -> Result<String> {
    let out: BTreeMap<String, Vec<LabelEntry>> = labels
        .iter()
        .map(|(topic, phrases)| {
            let entries = phrases
                .iter()
                .map(|p| LabelEntry { label: p.text.clone(), score: p.score })
                .collect();
            (topic.to_string(), entries)
        })
        .collect();
    Ok(serde_json::to_string_pretty(&out)?)
}

// ---------------------------------------------------------------------------
// Corpus evaluation
// ---------------------------------------------------------------------------

/// Corpus-level mean/max/min of each agreement metric over per-conversation
/// means, mirroring the usual agreement-table layout.
#[derive(Debug, Serialize)]
pub struct CorpusEvaluation {
    pub segmenter: String,
    pub conversations: Vec<SegmentationReport>,
    pub one_to_one: MetricSummary,
    pub loc3: MetricSummary,
    pub many_to_one: MetricSummary,
}

#[derive(Debug, Serialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub max: f64,
    pub min: f64,
}

impl MetricSummary {
    fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return MetricSummary { mean: 0.0, max: 0.0, min: 0.0 };
        }
        MetricSummary {
            mean: values.iter().sum::<f64>() / values.len() as f64,
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }
}

impl CorpusEvaluation {
    fn aggregate(segmenter: &str, conversations: Vec<SegmentationReport>) -> Self {
        let collect = |f: fn(&SegmentationReport) -> f64| -> Vec<f64> {
            conversations.iter().map(f).collect()
        };
        CorpusEvaluation {
            segmenter: segmenter.to_string(),
            one_to_one: MetricSummary::of(&collect(|r| r.mean_one_to_one)),
            loc3: MetricSummary::of(&collect(|r| r.mean_loc3)),
            many_to_one: MetricSummary::of(&collect(|r| r.mean_many_to_one)),
            conversations,
        }
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from(
            "conversation\tannotator\tone_to_one\tloc_3\tmany_to_one\tgold_entropy\tmodel_entropy\n",
        );
        for report in &self.conversations {
            for a in &report.per_annotator {
                out.push_str(&format!(
                    "{}\t{}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\n",
                    report.conversation_id,
                    a.annotator_id,
                    a.one_to_one,
                    a.loc3,
                    a.many_to_one,
                    a.gold_entropy,
                    report.model_entropy,
                ));
            }
        }
        for (label, one, loc, m2o) in [
            ("mean", self.one_to_one.mean, self.loc3.mean, self.many_to_one.mean),
            ("max", self.one_to_one.max, self.loc3.max, self.many_to_one.max),
            ("min", self.one_to_one.min, self.loc3.min, self.many_to_one.min),
        ] {
            out.push_str(&format!("ALL\t{label}\t{one:.4}\t{loc:.4}\t{m2o:.4}\t-\t-\n"));
        }
        out
    }
}

pub fn evaluate_corpus(
    entries: &[CorpusEntry],
    config: &PipelineConfig,
    lang: &LanguageResources,
    model: Option<&ClassifierModel>,
) -> Result<CorpusEvaluation> {
    let mut reports = Vec::new();
    for entry in entries {
        let Some(gold) = &entry.gold else { continue };
        let counts: Vec<usize> =
            gold.annotators.iter().map(|a| a.topic_count()).collect();
        let k = convtopic_core::pipeline::topic_count_policy(
            &counts,
            (config.topics > 0).then_some(config.topics),
        )?
        .clamp(1, entry.conversation.n_sentences().max(1));
        let seg = convtopic_core::pipeline::segment_conversation(
            &entry.conversation,
            config,
            lang,
            k,
            model,
        )?;
        reports.push(evaluate_segmentation(&entry.conversation.id, &seg, gold)?);
    }
    if reports.is_empty() {
        bail!("no gold-annotated conversations to evaluate");
    }
    Ok(CorpusEvaluation::aggregate(&config.segmenter, reports))
}

// ---------------------------------------------------------------------------
// Pipeline directory run
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
struct PipelineReport {
    config: PipelineConfig,
    status: Vec<ConversationStatus>,
    segmentation: Option<CorpusEvaluation>,
    labels: Vec<LabelReport>,
}

#[derive(Debug, Clone, Serialize)]
struct ConversationStatus {
    conversation: String,
    status: String,
}

/// Run the full pipeline over a corpus directory. Per-conversation errors
/// are recorded in the status table and do not abort the rest; the run
/// fails only if every conversation fails.
pub fn run_pipeline_dir(
    entries: &[CorpusEntry],
    config: &PipelineConfig,
    lang: &LanguageResources,
    model: Option<&ClassifierModel>,
    sim: &SimilarityProvider,
    out_dir: &Path,
) -> Result<()> {
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .context("building worker pool")?;
    type ConvOutcome = Result<(Segmentation, LabeledTopics), convtopic_core::Error>;
    let outcomes: Vec<ConvOutcome> = pool.install(|| {
        use rayon::prelude::*;
        entries
            .par_iter()
            .map(|entry| {
                run_conversation(&entry.conversation, entry.gold.as_ref(), config, lang, model)
            })
            .collect()
    });

    let mut status = Vec::new();
    let mut seg_reports = Vec::new();
    let mut label_reports = Vec::new();
    let mut failures = 0usize;
    for (entry, outcome) in entries.iter().zip(outcomes) {
        match outcome {
            Ok((segmentation, labels)) => {
                let seg_path = out_dir.join(format!("{}.segmentation.json", entry.stem));
                std::fs::write(
                    &seg_path,
                    segmentation_json(&entry.conversation.id, &segmentation)?,
                )
                .with_context(|| format!("writing {}", seg_path.display()))?;
                let labels_path = out_dir.join(format!("{}.labels.json", entry.stem));
                std::fs::write(&labels_path, labels_json(&labels)?)
                    .with_context(|| format!("writing {}", labels_path.display()))?;
                if let Some(gold) = &entry.gold {
                    seg_reports.push(evaluate_segmentation(
                        &entry.conversation.id,
                        &segmentation,
                        gold,
                    )?);
                    label_reports.push(evaluate_labels(
                        &entry.conversation.id,
                        &segmentation,
                        &labels,
                        gold,
                        lang,
                        sim,
                    )?);
                }
                status.push(ConversationStatus {
                    conversation: entry.stem.clone(),
                    status: "ok".into(),
                });
            }
            Err(err) => {
                failures += 1;
                status.push(ConversationStatus {
                    conversation: entry.stem.clone(),
                    status: format!("error: {err}"),
                });
            }
        }
    }

    let evaluation = (!seg_reports.is_empty())
        .then(|| CorpusEvaluation::aggregate(&config.segmenter, seg_reports));

    // Effective config: re-running with this file reproduces the outputs.
    std::fs::write(out_dir.join("effective_config.toml"), config.to_toml())?;

    let mut status_tsv = String::from("conversation\tstatus\n");
    for row in &status {
        status_tsv.push_str(&format!("{}\t{}\n", row.conversation, row.status));
    }
    std::fs::write(out_dir.join("status.tsv"), &status_tsv)?;

    let mut report_tsv = String::new();
    if let Some(eval) = &evaluation {
        report_tsv.push_str(&eval.to_tsv());
    }
    if !label_reports.is_empty() {
        report_tsv.push_str(
            "\nconversation\tk\tmean_w_m_o\tmax_w_m_o\tmean_w_s_m_o\tmax_w_s_m_o\n",
        );
        let mut max_k = 0;
        for report in &label_reports {
            for row in &report.per_k {
                max_k = max_k.max(row.k);
                report_tsv.push_str(&format!(
                    "{}\t{}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\n",
                    report.conversation_id,
                    row.k,
                    row.mean_wmo,
                    row.max_wmo,
                    row.mean_wsmo,
                    row.max_wsmo,
                ));
            }
        }
        for k in 1..=max_k {
            let rows: Vec<_> = label_reports
                .iter()
                .filter_map(|r| r.per_k.iter().find(|row| row.k == k))
                .collect();
            let n = rows.len().max(1) as f64;
            report_tsv.push_str(&format!(
                "ALL\t{k}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\n",
                rows.iter().map(|r| r.mean_wmo).sum::<f64>() / n,
                rows.iter().map(|r| r.max_wmo).fold(0.0, f64::max),
                rows.iter().map(|r| r.mean_wsmo).sum::<f64>() / n,
                rows.iter().map(|r| r.max_wsmo).fold(0.0, f64::max),
            ));
        }
    }
    std::fs::write(out_dir.join("report.tsv"), &report_tsv)?;

    let report = PipelineReport {
        config: config.clone(),
        status: status.clone(),
        segmentation: evaluation,
        labels: label_reports,
    };
    std::fs::write(out_dir.join("report.json"), serde_json::to_string_pretty(&report)?)?;

    if failures == entries.len() {
        bail!("every conversation failed; see {}", out_dir.join("status.tsv").display());
    }
    Ok(())
}
