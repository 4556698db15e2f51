//! Keyphrase labeling of topic segments: syntactic filtering, word
//! co-occurrence graphs, random-walk ranking (optionally co-ranked with the
//! fragment quotation graph), phrase generation, conversation-level
//! re-ranking and MMR selection.

pub mod rank;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::{Conversation, PosTag, Sentence};
use crate::error::{Error, Result};
use crate::fqg::{project_fqg, FragmentQuotationGraph};
use crate::segmentation::Segmentation;

pub use rank::{
    biased_rank, biased_rank_residual, corank, general_rank, CorankOutcome, CorankWordWalk,
    RankKind, RankVector,
};

/// Which parts of speech survive preprocessing; stopwords are always
/// excluded. Nouns-and-adjectives is the working default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SyntacticFilter {
    Nouns,
    NounsAdjectives,
    NounsAdjectivesVerbs,
    NounsAdjectivesVerbsAdverbs,
    AllWords,
}

impl SyntacticFilter {
    fn keeps(&self, pos: PosTag) -> bool {
        use SyntacticFilter::*;
        match self {
            Nouns => pos == PosTag::Noun,
            NounsAdjectives => matches!(pos, PosTag::Noun | PosTag::Adj),
            NounsAdjectivesVerbs => matches!(pos, PosTag::Noun | PosTag::Adj | PosTag::Verb),
            NounsAdjectivesVerbsAdverbs => {
                matches!(pos, PosTag::Noun | PosTag::Adj | PosTag::Verb | PosTag::Adv)
            }
            AllWords => true,
        }
    }
}

/// Candidate stems of a sentence set under a syntactic filter, in first
/// occurrence order.
pub fn syntactic_filter(sentences: &[&Sentence], filter: SyntacticFilter) -> Vec<String> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for sentence in sentences {
        for token in &sentence.tokens {
            if token.is_stopword || !filter.keeps(token.pos) {
                continue;
            }
            if seen.insert(token.stem.clone()) {
                out.push(token.stem.clone());
            }
        }
    }
    out
}

/// Word co-occurrence graph over the candidate words of one segment:
/// symmetric edge weights and the relevance-to-leading-sentences vector.
#[derive(Debug, Clone, PartialEq)]
pub struct WordGraph {
    pub words: Vec<String>,
    edges: Vec<f64>,
    pub rho: Vec<f64>,
}

impl WordGraph {
    pub fn new(words: Vec<String>) -> Self {
        let n = words.len();
        WordGraph { words, edges: vec![0.0; n * n], rho: vec![0.0; n] }
    }

    pub fn set_edge(&mut self, i: usize, j: usize, w: f64) {
        if i == j {
            return;
        }
        let n = self.words.len();
        let w = w.max(0.0);
        self.edges[i * n + j] = w;
        self.edges[j * n + i] = w;
    }

    pub fn edge(&self, i: usize, j: usize) -> f64 {
        self.edges[i * self.words.len() + j]
    }

    pub fn edge_row(&self, i: usize) -> &[f64] {
        let n = self.words.len();
        &self.edges[i * n..(i + 1) * n]
    }

    pub fn index(&self) -> HashMap<&str, usize> {
        self.words.iter().enumerate().map(|(i, w)| (w.as_str(), i)).collect()
    }
}

/// Count co-occurrences of candidate-stem pairs within a window of `s`
/// positions over the stopword-free token sequence of each sentence;
/// windows never cross sentence boundaries.
fn cooccurrence_counts(
    sentences: &[&Sentence],
    index: &HashMap<&str, usize>,
    window: usize,
) -> HashMap<(usize, usize), f64> {
    let mut counts: HashMap<(usize, usize), f64> = HashMap::new();
    let reach = window.max(2) - 1;
    for sentence in sentences {
        let content: Vec<Option<usize>> = sentence
            .tokens
            .iter()
            .filter(|t| !t.is_stopword)
            .map(|t| index.get(t.stem.as_str()).copied())
            .collect();
        for i in 0..content.len() {
            let Some(a) = content[i] else { continue };
            for j in (i + 1)..content.len().min(i + 1 + reach) {
                let Some(b) = content[j] else { continue };
                if a == b {
                    continue;
                }
                let key = (a.min(b), a.max(b));
                *counts.entry(key).or_default() += 1.0;
            }
        }
    }
    counts
}

/// Build the discriminative word graph of a topic segment. Edge weights are
/// tf_k x ln(K / (0.5 + tf_k')) where tf_k counts pair co-occurrences in
/// the segment and tf_k' in the rest of the conversation; negative weights
/// clamp to 0. The relevance of a word is
/// ln(tf_leading + 1) x ln(tf_segment + 1) over its first `leading`
/// sentences.
pub fn build_wcg(
    segment: &[&Sentence],
    rest: &[&Sentence],
    k_topics: usize,
    window: usize,
    leading: usize,
    filter: SyntacticFilter,
) -> WordGraph {
    let words = syntactic_filter(segment, filter);
    let mut graph = WordGraph::new(words);
    let index_owned: Vec<(String, usize)> =
        graph.words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
    let index: HashMap<&str, usize> = index_owned.iter().map(|(w, i)| (w.as_str(), *i)).collect();

    let inside = cooccurrence_counts(segment, &index, window);
    let outside = cooccurrence_counts(rest, &index, window);
    let k = k_topics.max(1) as f64;
    let pairs: BTreeSet<(usize, usize)> = inside.keys().copied().collect();
    for (a, b) in pairs {
        let tf_in = inside[&(a, b)];
        let tf_out = outside.get(&(a, b)).copied().unwrap_or(0.0);
        let weight = tf_in * (k / (0.5 + tf_out)).ln();
        graph.set_edge(a, b, weight.max(0.0));
    }

    // Leading sentences: the first `leading` by global temporal id.
    let mut ordered: Vec<&&Sentence> = segment.iter().collect();
    ordered.sort_by_key(|s| s.id);
    let lead_ids: BTreeSet<usize> =
        ordered.iter().take(leading).map(|s| s.id).collect();
    let mut tf_lead = vec![0.0f64; graph.words.len()];
    let mut tf_seg = vec![0.0f64; graph.words.len()];
    for sentence in segment {
        for token in &sentence.tokens {
            if token.is_stopword {
                continue;
            }
            if let Some(&wi) = index.get(token.stem.as_str()) {
                tf_seg[wi] += 1.0;
                if lead_ids.contains(&sentence.id) {
                    tf_lead[wi] += 1.0;
                }
            }
        }
    }
    graph.rho = (0..graph.words.len())
        .map(|wi| (tf_lead[wi] + 1.0).ln() * (tf_seg[wi] + 1.0).ln())
        .collect();
    graph
}

/// Plain co-occurrence word graph (raw counts, no discriminative factor):
/// the whole-conversation form of the walk and the generic baseline.
pub fn build_plain_wcg(
    sentences: &[&Sentence],
    window: usize,
    filter: SyntacticFilter,
) -> WordGraph {
    let words = syntactic_filter(sentences, filter);
    let mut graph = WordGraph::new(words);
    let index_owned: Vec<(String, usize)> =
        graph.words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
    let index: HashMap<&str, usize> = index_owned.iter().map(|(w, i)| (w.as_str(), *i)).collect();
    for ((a, b), count) in cooccurrence_counts(sentences, &index, window) {
        graph.set_edge(a, b, count);
    }
    graph
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PhraseOrigin {
    Segment,
    Conversation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Keyphrase {
    pub text: String,
    pub stems: Vec<String>,
    pub score: f64,
    pub origin: PhraseOrigin,
}

/// Collapse adjacent top-ranked words into keyphrases. The top
/// ceil(m_fraction x candidates) words are marked; maximal runs of adjacent
/// marked tokens (no intervening tokens of any kind) in each sentence
/// become phrases scored by their best constituent. Duplicate stem
/// sequences merge keeping the higher score.
pub fn generate_phrases(
    sentences: &[&Sentence],
    words: &[String],
    rank: &RankVector,
    m_fraction: f64,
    origin: PhraseOrigin,
) -> Vec<Keyphrase> {
    assert_eq!(words.len(), rank.scores.len());
    if words.is_empty() {
        return Vec::new();
    }
    let m = ((m_fraction * words.len() as f64).ceil() as usize).clamp(1, words.len());
    let mut order: Vec<usize> = (0..words.len()).collect();
    order.sort_by(|&a, &b| {
        rank.scores[b].partial_cmp(&rank.scores[a]).unwrap().then(words[a].cmp(&words[b]))
    });
    let marked: HashMap<&str, f64> = order[..m]
        .iter()
        .map(|&i| (words[i].as_str(), rank.scores[i]))
        .collect();

    let mut phrases: Vec<Keyphrase> = Vec::new();
    let mut best: HashMap<Vec<String>, usize> = HashMap::new();
    for sentence in sentences {
        let mut run: Vec<(String, String, f64)> = Vec::new();
        for token in sentence.tokens.iter() {
            match marked.get(token.stem.as_str()) {
                Some(&score) => {
                    run.push((token.surface.clone(), token.stem.clone(), score))
                }
                None => flush_run(&mut run, &mut phrases, &mut best, origin),
            }
        }
        flush_run(&mut run, &mut phrases, &mut best, origin);
    }
    phrases
}

fn flush_run(
    run: &mut Vec<(String, String, f64)>,
    phrases: &mut Vec<Keyphrase>,
    best: &mut HashMap<Vec<String>, usize>,
    origin: PhraseOrigin,
) {
    if run.is_empty() {
        return;
    }
    let words = std::mem::take(run);
    let stems: Vec<String> = words.iter().map(|(_, s, _)| s.clone()).collect();
    let score = words.iter().map(|&(_, _, s)| s).fold(f64::NEG_INFINITY, f64::max);
    let text = words.iter().map(|(w, _, _)| w.as_str()).collect::<Vec<_>>().join(" ");
    match best.get(&stems) {
        Some(&i) => {
            if score > phrases[i].score {
                phrases[i].score = score;
            }
        }
        None => {
            best.insert(stems.clone(), phrases.len());
            phrases.push(Keyphrase { text, stems, score, origin });
        }
    }
}

/// Re-score conversation-level phrases against one segment: each phrase
/// takes the maximum segment-level score of its constituent words, with
/// words absent from the segment scoring 0.
pub fn rerank_conversation_phrases(
    conv_phrases: &[Keyphrase],
    segment_words: &[String],
    segment_rank: &RankVector,
) -> Vec<Keyphrase> {
    let score_of: HashMap<&str, f64> = segment_words
        .iter()
        .zip(&segment_rank.scores)
        .map(|(w, &s)| (w.as_str(), s))
        .collect();
    conv_phrases
        .iter()
        .map(|phrase| {
            let score = phrase
                .stems
                .iter()
                .map(|stem| score_of.get(stem.as_str()).copied().unwrap_or(0.0))
                .fold(0.0, f64::max);
            Keyphrase { score, ..phrase.clone() }
        })
        .collect()
}

/// Merge two phrase lists, dropping duplicate stem sequences in favor of
/// the higher score.
pub fn merge_phrases(a: Vec<Keyphrase>, b: Vec<Keyphrase>) -> Vec<Keyphrase> {
    let mut merged: Vec<Keyphrase> = Vec::new();
    let mut index: HashMap<Vec<String>, usize> = HashMap::new();
    for phrase in a.into_iter().chain(b) {
        match index.get(&phrase.stems) {
            Some(&i) => {
                if phrase.score > merged[i].score {
                    merged[i].score = phrase.score;
                }
            }
            None => {
                index.insert(phrase.stems.clone(), merged.len());
                merged.push(phrase);
            }
        }
    }
    merged
}

/// Overlap similarity between a candidate and an already-selected label:
/// overlapping words (modulo stemming) over the selected label's length.
fn phrase_sim(candidate: &Keyphrase, selected: &Keyphrase) -> f64 {
    if selected.stems.is_empty() {
        return 0.0;
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for stem in &candidate.stems {
        *counts.entry(stem.as_str()).or_default() += 1;
    }
    let mut overlap = 0usize;
    for stem in &selected.stems {
        if let Some(c) = counts.get_mut(stem.as_str()) {
            if *c > 0 {
                *c -= 1;
                overlap += 1;
            }
        }
    }
    overlap as f64 / selected.stems.len() as f64
}

/// Greedy maximum-marginal-relevance selection of up to `k` labels:
/// each step takes the candidate maximizing
/// rho x score - (1 - rho) x max similarity to the already selected,
/// with ties broken by lexicographic text. For rho < 1, candidates fully
/// covering an already-selected label (similarity exactly 1) are never
/// re-emitted. Output scores are normalized to sum 1.
pub fn select_labels_mmr(phrases: &[Keyphrase], k: usize, rho: f64) -> Vec<Keyphrase> {
    let mut remaining: Vec<Keyphrase> = phrases.to_vec();
    // Deterministic base order: by score, then text.
    remaining.sort_by(|a, b| {
        b.score.partial_cmp(&a.score).unwrap().then(a.text.cmp(&b.text))
    });
    let mut selected: Vec<Keyphrase> = Vec::new();
    while selected.len() < k && !remaining.is_empty() {
        let mut best: Option<(f64, usize)> = None;
        for (i, candidate) in remaining.iter().enumerate() {
            let penalty = selected
                .iter()
                .map(|s| phrase_sim(candidate, s))
                .fold(0.0, f64::max);
            if rho < 1.0 && penalty >= 1.0 {
                continue;
            }
            let value = rho * candidate.score - (1.0 - rho) * penalty;
            if best.is_none_or(|(bv, _)| value > bv) {
                best = Some((value, i));
            }
        }
        let Some((_, i)) = best else { break };
        selected.push(remaining.remove(i));
    }
    let total: f64 = selected.iter().map(|p| p.score).sum();
    for phrase in selected.iter_mut() {
        phrase.score = if total > 0.0 { phrase.score / total } else { 1.0 / k as f64 };
    }
    selected
}

// ---------------------------------------------------------------------------
// Orchestration
// ---------------------------------------------------------------------------

/// Ranking model selection, mirroring the CLI names. The `Plus` variants
/// add conversation-level phrases re-ranked per segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RankerKind {
    Freq,
    Lead,
    Mt,
    Bias,
    BiasPlus,
    CorGen,
    CorGenPlus,
    CorBias,
    CorBiasPlus,
}

impl RankerKind {
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "freq" => RankerKind::Freq,
            "lead" => RankerKind::Lead,
            "mt" => RankerKind::Mt,
            "bias" => RankerKind::Bias,
            "bias+" => RankerKind::BiasPlus,
            "corgen" => RankerKind::CorGen,
            "corgen+" => RankerKind::CorGenPlus,
            "corbias" => RankerKind::CorBias,
            "corbias+" => RankerKind::CorBiasPlus,
            other => {
                return Err(Error::UnknownName { kind: "ranker", name: other.to_string() })
            }
        })
    }

    pub fn includes_conversation_phrases(&self) -> bool {
        matches!(self, RankerKind::BiasPlus | RankerKind::CorGenPlus | RankerKind::CorBiasPlus)
    }

    fn uses_corank(&self) -> bool {
        matches!(
            self,
            RankerKind::CorGen
                | RankerKind::CorGenPlus
                | RankerKind::CorBias
                | RankerKind::CorBiasPlus
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelerParams {
    pub ranker: RankerKind,
    /// Bias toward leading-sentence relevance in the biased walk.
    pub lambda_bias: f64,
    /// Coupling strength of the co-ranking walks.
    pub delta: f64,
    /// Co-occurrence window size in content-token positions.
    pub window: usize,
    /// Fraction of candidate words marked as keywords.
    pub m_fraction: f64,
    /// Redundancy/relevance trade-off of MMR selection.
    pub mmr_rho: f64,
    /// Number of output labels per topic.
    pub labels_k: usize,
    /// Teleport damping shared by all walks.
    pub damping: f64,
    /// Number of leading sentences defining the bias.
    pub leading: usize,
    pub filter: SyntacticFilter,
}

impl Default for LabelerParams {
    fn default() -> Self {
        LabelerParams {
            ranker: RankerKind::CorBiasPlus,
            lambda_bias: 0.85,
            delta: 0.4,
            window: 2,
            m_fraction: 0.25,
            mmr_rho: 0.35,
            labels_k: 5,
            damping: 0.85,
            leading: 2,
            filter: SyntacticFilter::NounsAdjectives,
        }
    }
}

/// Ranked keyphrase labels per topic with scores normalized per topic.
pub type LabeledTopics = BTreeMap<usize, Vec<Keyphrase>>;

/// Label every topic of a segmented conversation.
pub fn label_topics(
    conversation: &Conversation,
    fqg: &FragmentQuotationGraph,
    segmentation: &Segmentation,
    params: &LabelerParams,
) -> Result<LabeledTopics> {
    let window = params.window;
    let all: Vec<&Sentence> = conversation.sentences.iter().collect();

    // Conversation-level phrases for the "+" rankers, ranked once.
    let conv_phrases = if params.ranker.includes_conversation_phrases() {
        let graph = build_plain_wcg(&all, window, params.filter);
        if graph.words.is_empty() {
            Vec::new()
        } else {
            let rank = if params.ranker.uses_corank() {
                let walk = corank_walk(params.ranker, params.lambda_bias);
                corank(fqg, &graph, &all, params.delta, walk, params.damping)?.word_rank
            } else {
                general_rank(&graph, params.damping)?
            };
            generate_phrases(
                &all,
                &graph.words,
                &rank,
                params.m_fraction,
                PhraseOrigin::Conversation,
            )
        }
    } else {
        Vec::new()
    };

    let mut labels = LabeledTopics::new();
    for topic in 0..segmentation.k {
        let ids = segmentation.sentences_of(topic);
        if ids.is_empty() {
            continue;
        }
        let segment: Vec<&Sentence> = ids.iter().map(|&i| &conversation.sentences[i]).collect();
        let rest: Vec<&Sentence> = conversation
            .sentences
            .iter()
            .filter(|s| segmentation.topic_of[s.id] != topic)
            .collect();
        let phrases = label_segment(
            fqg,
            &segment,
            &rest,
            segmentation.k_effective(),
            &conv_phrases,
            params,
        )?;
        labels.insert(topic, select_labels_mmr(&phrases, params.labels_k, params.mmr_rho));
    }
    Ok(labels)
}

fn corank_walk(ranker: RankerKind, lambda: f64) -> CorankWordWalk {
    match ranker {
        RankerKind::CorGen | RankerKind::CorGenPlus => CorankWordWalk::General,
        _ => CorankWordWalk::Biased(lambda),
    }
}

fn label_segment(
    fqg: &FragmentQuotationGraph,
    segment: &[&Sentence],
    rest: &[&Sentence],
    k_topics: usize,
    conv_phrases: &[Keyphrase],
    params: &LabelerParams,
) -> Result<Vec<Keyphrase>> {
    let window = params.window;
    let graph = build_wcg(segment, rest, k_topics, window, params.leading, params.filter);
    if graph.words.is_empty() {
        return Ok(Vec::new());
    }

    let rank = match params.ranker {
        RankerKind::Freq => {
            let index = graph.index();
            let mut counts = vec![0.0f64; graph.words.len()];
            for sentence in segment {
                for token in &sentence.tokens {
                    if let Some(&wi) = index.get(token.stem.as_str()) {
                        counts[wi] += 1.0;
                    }
                }
            }
            RankVector::normalized(RankKind::Word, counts)
        }
        RankerKind::Lead => RankVector::normalized(RankKind::Word, graph.rho.clone()),
        RankerKind::Mt => {
            let plain = build_plain_wcg(segment, window, params.filter);
            let rank = general_rank(&plain, params.damping)?;
            // Align scores onto the discriminative graph's word order
            // (identical candidate sets, possibly different order).
            align_scores(&plain.words, &rank.scores, &graph.words)
        }
        RankerKind::Bias | RankerKind::BiasPlus => {
            biased_rank(&graph, params.lambda_bias, params.damping)?
        }
        RankerKind::CorGen
        | RankerKind::CorGenPlus
        | RankerKind::CorBias
        | RankerKind::CorBiasPlus => {
            let ids: BTreeSet<usize> = segment.iter().map(|s| s.id).collect();
            let projected = project_fqg(fqg, &ids);
            let walk = corank_walk(params.ranker, params.lambda_bias);
            corank(&projected, &graph, segment, params.delta, walk, params.damping)?.word_rank
        }
    };

    let mut phrases = generate_phrases(
        segment,
        &graph.words,
        &rank,
        params.m_fraction,
        PhraseOrigin::Segment,
    );
    if params.ranker.includes_conversation_phrases() && !conv_phrases.is_empty() {
        let rescored = rerank_conversation_phrases(conv_phrases, &graph.words, &rank);
        let kept: Vec<Keyphrase> =
            rescored.into_iter().filter(|p| p.score > 0.0).collect();
        phrases = merge_phrases(phrases, kept);
    }
    Ok(phrases)
}

fn align_scores(from_words: &[String], scores: &[f64], to_words: &[String]) -> RankVector {
    let index: HashMap<&str, f64> = from_words
        .iter()
        .zip(scores)
        .map(|(w, &s)| (w.as_str(), s))
        .collect();
    RankVector {
        kind: RankKind::Word,
        scores: to_words
            .iter()
            .map(|w| index.get(w.as_str()).copied().unwrap_or(0.0))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_conversation, tokenize, LanguageResources};

    fn sentence(id: usize, text: &str) -> Sentence {
        Sentence {
            id,
            comment_id: "C1".into(),
            text: text.into(),
            tokens: tokenize(text, &LanguageResources::default()),
            quote_depth: 0,
        }
    }

    #[test]
    fn filter_examples() {
        let s = sentence(0, "Bethesda Releases Daggerfall");
        let got = syntactic_filter(&[&s], SyntacticFilter::NounsAdjectives);
        assert_eq!(got, vec!["bethesda".to_string(), "daggerfal".to_string()]);

        let empty = sentence(1, "the of and");
        assert!(syntactic_filter(&[&empty], SyntacticFilter::NounsAdjectives).is_empty());

        let all = syntactic_filter(&[&s], SyntacticFilter::AllWords);
        assert_eq!(all.len(), 3, "all-words keeps the verb too");
    }

    #[test]
    fn wcg_weight_formula() {
        // K = 3, pair co-occurs twice in-segment, never elsewhere:
        // weight = 2 ln(6).
        let seg = [
            sentence(0, "kernel scheduler"),
            sentence(1, "kernel scheduler"),
        ];
        let seg_refs: Vec<&Sentence> = seg.iter().collect();
        let graph = build_wcg(&seg_refs, &[], 3, 2, 2, SyntacticFilter::AllWords);
        let idx = graph.index();
        let (a, b) = (idx["kernel"], idx["schedul"]);
        let expect = 2.0 * 6.0f64.ln();
        assert!((graph.edge(a, b) - expect).abs() < 1e-12, "{}", graph.edge(a, b));
    }

    #[test]
    fn wcg_pair_only_outside_segment_weighs_zero() {
        let seg = [sentence(0, "kernel alone here")];
        let rest = [sentence(1, "kernel scheduler"), sentence(2, "kernel scheduler")];
        let seg_refs: Vec<&Sentence> = seg.iter().collect();
        let rest_refs: Vec<&Sentence> = rest.iter().collect();
        let graph = build_wcg(&seg_refs, &rest_refs, 3, 2, 2, SyntacticFilter::AllWords);
        let idx = graph.index();
        if let (Some(&a), Some(&b)) = (idx.get("kernel"), idx.get("schedul")) {
            assert_eq!(graph.edge(a, b), 0.0);
        }
    }

    #[test]
    fn wcg_single_topic_weight_is_tf_ln2() {
        let seg = [sentence(0, "kernel scheduler")];
        let seg_refs: Vec<&Sentence> = seg.iter().collect();
        let graph = build_wcg(&seg_refs, &[], 1, 2, 2, SyntacticFilter::AllWords);
        let idx = graph.index();
        let (a, b) = (idx["kernel"], idx["schedul"]);
        assert!((graph.edge(a, b) - 2.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn wcg_discriminativeness_monotone_in_outside_count() {
        // Raising the out-of-segment co-occurrence count never increases
        // the edge weight.
        let seg = [sentence(0, "kernel scheduler"), sentence(1, "kernel scheduler")];
        let seg_refs: Vec<&Sentence> = seg.iter().collect();
        let mut last = f64::INFINITY;
        for outside_count in 0..5 {
            let rest: Vec<Sentence> =
                (0..outside_count).map(|i| sentence(10 + i, "kernel scheduler")).collect();
            let rest_refs: Vec<&Sentence> = rest.iter().collect();
            let graph = build_wcg(&seg_refs, &rest_refs, 4, 2, 2, SyntacticFilter::AllWords);
            let idx = graph.index();
            let w = graph.edge(idx["kernel"], idx["schedul"]);
            assert!(w <= last + 1e-12);
            last = w;
        }
    }

    #[test]
    fn rho_counts_leading_sentences() {
        let seg = [
            sentence(0, "kernel kernel"),
            sentence(1, "scheduler"),
            sentence(2, "kernel compost"),
        ];
        let seg_refs: Vec<&Sentence> = seg.iter().collect();
        let graph = build_wcg(&seg_refs, &[], 2, 2, 2, SyntacticFilter::AllWords);
        let idx = graph.index();
        // kernel: lead tf 2 (first two sentences), segment tf 3.
        let expect = 3.0f64.ln() * 4.0f64.ln();
        assert!((graph.rho[idx["kernel"]] - expect).abs() < 1e-12);
        // compost appears only in sentence 2: lead tf 0 -> rho 0.
        assert_eq!(graph.rho[idx["compost"]], 0.0);
    }

    #[test]
    fn phrase_generation_collapses_adjacent_keywords() {
        let s = sentence(0, "the 15th anniversary of the Elder Scrolls series arrived");
        let words: Vec<String> =
            ["elder", "scroll", "seri", "anniversari"].iter().map(|s| s.to_string()).collect();
        let rank = RankVector {
            kind: RankKind::Word,
            scores: vec![0.4, 0.3, 0.2, 0.1],
        };
        let phrases = generate_phrases(&[&s], &words, &rank, 0.8, PhraseOrigin::Segment);
        let texts: Vec<&str> = phrases.iter().map(|p| p.text.as_str()).collect();
        assert!(texts.contains(&"Elder Scrolls series"), "got {texts:?}");
        let phrase = phrases.iter().find(|p| p.text == "Elder Scrolls series").unwrap();
        assert!((phrase.score - 0.4).abs() < 1e-12, "max constituent score");
    }

    #[test]
    fn phrase_generation_singletons_when_not_adjacent() {
        let s = sentence(0, "kernel of the compost");
        let words: Vec<String> = ["kernel", "compost"].iter().map(|s| s.to_string()).collect();
        let rank = RankVector { kind: RankKind::Word, scores: vec![0.6, 0.4] };
        let phrases = generate_phrases(&[&s], &words, &rank, 1.0, PhraseOrigin::Segment);
        assert_eq!(phrases.len(), 2);
        assert!(phrases.iter().all(|p| p.stems.len() == 1));
    }

    #[test]
    fn phrase_scores_bounded_by_max_word_score() {
        let s = sentence(0, "alpha beta gamma delta");
        let words: Vec<String> =
            ["alpha", "beta", "gamma", "delta"].iter().map(|s| s.to_string()).collect();
        let rank =
            RankVector { kind: RankKind::Word, scores: vec![0.1, 0.5, 0.3, 0.1] };
        let phrases = generate_phrases(&[&s], &words, &rank, 1.0, PhraseOrigin::Segment);
        let max_word = 0.5;
        assert!(phrases.iter().all(|p| p.score <= max_word + 1e-12));
    }

    #[test]
    fn rerank_zeroes_absent_words_and_merges() {
        let conv_phrase = Keyphrase {
            text: "server security".into(),
            stems: vec!["server".into(), "secur".into()],
            score: 0.9,
            origin: PhraseOrigin::Conversation,
        };
        let outside = Keyphrase {
            text: "garden compost".into(),
            stems: vec!["garden".into(), "compost".into()],
            score: 0.8,
            origin: PhraseOrigin::Conversation,
        };
        let segment_words: Vec<String> = vec!["server".into(), "firewal".into()];
        let rank = RankVector { kind: RankKind::Word, scores: vec![0.7, 0.3] };
        let rescored =
            rerank_conversation_phrases(&[conv_phrase, outside], &segment_words, &rank);
        assert!((rescored[0].score - 0.7).abs() < 1e-12, "one constituent in-segment");
        assert_eq!(rescored[1].score, 0.0, "no constituent in segment");

        let seg_phrase = Keyphrase {
            text: "server security".into(),
            stems: vec!["server".into(), "secur".into()],
            score: 0.2,
            origin: PhraseOrigin::Segment,
        };
        let merged = merge_phrases(vec![seg_phrase], rescored);
        let server = merged.iter().find(|p| p.text == "server security").unwrap();
        assert!((server.score - 0.7).abs() < 1e-12, "merge keeps max score");
    }

    fn kp(text: &str, score: f64) -> Keyphrase {
        let stems: Vec<String> =
            text.split_whitespace().map(|w| w.to_lowercase()).collect();
        Keyphrase { text: text.into(), stems, score, origin: PhraseOrigin::Segment }
    }

    #[test]
    fn mmr_rho_one_is_score_order() {
        let phrases =
            vec![kp("beta", 0.2), kp("alpha", 0.5), kp("gamma", 0.3), kp("delta", 0.3)];
        let got = select_labels_mmr(&phrases, 4, 1.0);
        let texts: Vec<&str> = got.iter().map(|p| p.text.as_str()).collect();
        // Descending score; ties (gamma/delta at 0.3) lexicographic.
        assert_eq!(texts, vec!["alpha", "delta", "gamma", "beta"]);
        let sum: f64 = got.iter().map(|p| p.score).sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mmr_duplicate_top_never_second() {
        let phrases = vec![kp("alpha", 0.5), kp("alpha", 0.5), kp("beta", 0.1)];
        for rho in [0.0, 0.2, 0.35, 0.5, 0.8, 0.95, 0.99] {
            let got = select_labels_mmr(&phrases, 2, rho);
            assert_eq!(got[0].text, "alpha");
            assert_eq!(got[1].text, "beta", "rho {rho}: duplicate must not be second");
        }
    }

    #[test]
    fn mmr_fewer_than_k_returns_all_renormalized() {
        let phrases = vec![kp("alpha", 0.5), kp("beta", 0.3)];
        let got = select_labels_mmr(&phrases, 5, 0.35);
        assert_eq!(got.len(), 2);
        let sum: f64 = got.iter().map(|p| p.score).sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn label_topics_end_to_end_smoke() {
        let doc = r#"{"id":"c","comments":[
            {"id":"C1","author":"a","title":"t","body":"Bethesda released the Daggerfall game for free. The Daggerfall game download is huge."},
            {"id":"C2","parent_id":"C1","author":"b","title":"t","body":"> Bethesda released the Daggerfall game for free.\nThe compost pile needs turning. Garden compost smells great."}]}"#;
        let conversation =
            parse_conversation(doc, &LanguageResources::default()).unwrap();
        let fqg = crate::fqg::build_fqg(&conversation);
        let n = conversation.n_sentences();
        let assignment: Vec<usize> = conversation
            .sentences
            .iter()
            .map(|s| usize::from(s.text.contains("compost")))
            .collect();
        let seg = Segmentation::from_labeled_assignment(assignment);
        let _ = n;
        for ranker in [
            RankerKind::Freq,
            RankerKind::Lead,
            RankerKind::Mt,
            RankerKind::Bias,
            RankerKind::BiasPlus,
            RankerKind::CorGen,
            RankerKind::CorBias,
            RankerKind::CorBiasPlus,
        ] {
            let params = LabelerParams { ranker, labels_k: 3, ..LabelerParams::default() };
            let labels = label_topics(&conversation, &fqg, &seg, &params).unwrap();
            assert!(labels.contains_key(&0) && labels.contains_key(&1), "{ranker:?}");
            let compost_labels = &labels[&1];
            assert!(
                compost_labels.iter().any(|p| p.text.to_lowercase().contains("compost")),
                "{ranker:?}: {compost_labels:?}"
            );
            let sum: f64 = compost_labels.iter().map(|p| p.score).sum();
            assert!((sum - 1.0).abs() < 1e-9);
        }
    }
}
