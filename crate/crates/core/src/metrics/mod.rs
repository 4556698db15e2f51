//! Annotation-agreement and model-evaluation metrics: one-to-one, local
//! agreement, many-to-one, entropy, and the phrase-overlap family for topic
//! labels (mutual overlap and its weighted / semantic generalizations).

pub mod hungarian;

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{porter_stem, PosTag};
use crate::error::{Error, Result};
use crate::segmentation::Segmentation;

// ---------------------------------------------------------------------------
// Segmentation metrics
// ---------------------------------------------------------------------------

fn overlap_matrix(a: &Segmentation, b: &Segmentation) -> Vec<Vec<f64>> {
    let mut counts = vec![vec![0.0; b.k.max(1)]; a.k.max(1)];
    for (&ta, &tb) in a.topic_of.iter().zip(&b.topic_of) {
        counts[ta][tb] += 1.0;
    }
    counts
}

/// Global agreement: optimally pair up the two annotations' clusters
/// (max-weight bipartite matching on overlap counts) and report the matched
/// fraction of sentences.
pub fn one_to_one(a: &Segmentation, b: &Segmentation) -> Result<f64> {
    a.check_universe(b)?;
    if a.is_empty() {
        return Ok(1.0);
    }
    let (matched, _) = hungarian::max_weight_matching(&overlap_matrix(a, b));
    Ok(matched / a.len() as f64)
}

/// The optimal cluster pairing itself: for each cluster of `a`, the matched
/// cluster of `b` (when any overlap was matched).
pub fn one_to_one_mapping(a: &Segmentation, b: &Segmentation) -> Result<Vec<Option<usize>>> {
    a.check_universe(b)?;
    let (_, assignment) = hungarian::max_weight_matching(&overlap_matrix(a, b));
    Ok(assignment)
}

/// Local agreement: for each sentence, compare the same/different judgments
/// against each of its up-to-`k` predecessors; the score is the mean
/// agreement over all defined judgments. Windows truncate at the start.
pub fn loc_k(a: &Segmentation, b: &Segmentation, k: usize) -> Result<f64> {
    a.check_universe(b)?;
    let n = a.len();
    let mut agree = 0usize;
    let mut total = 0usize;
    for m in 1..n {
        for j in 1..=k.min(m) {
            let same_a = a.topic_of[m] == a.topic_of[m - j];
            let same_b = b.topic_of[m] == b.topic_of[m - j];
            total += 1;
            if same_a == same_b {
                agree += 1;
            }
        }
    }
    if total == 0 {
        return Ok(1.0);
    }
    Ok(agree as f64 / total as f64)
}

/// Diagnostic-only asymmetric agreement: map each source cluster to its
/// best-overlap target cluster (many sources may share a target) and report
/// the mapped fraction. Not a performance metric: assigning every sentence
/// its own cluster scores 1 against anything.
pub fn many_to_one(source: &Segmentation, target: &Segmentation) -> Result<f64> {
    source.check_universe(target)?;
    if source.is_empty() {
        return Ok(1.0);
    }
    let counts = overlap_matrix(source, target);
    let matched: f64 = counts
        .iter()
        .map(|row| row.iter().copied().fold(0.0, f64::max))
        .sum();
    Ok(matched / source.len() as f64)
}

/// Annotation granularity: entropy (base 2) of the topic of a randomly
/// picked sentence.
pub fn entropy(seg: &Segmentation) -> f64 {
    let n = seg.len() as f64;
    if seg.is_empty() {
        return 0.0;
    }
    let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
    for &t in &seg.topic_of {
        *counts.entry(t).or_default() += 1.0;
    }
    let h = -counts
        .values()
        .map(|&c| {
            let p = c / n;
            p * p.log2()
        })
        .sum::<f64>();
    h.max(0.0) // avoid the -0.0 of a single-topic annotation
}

// ---------------------------------------------------------------------------
// Label metrics
// ---------------------------------------------------------------------------

/// A phrase prepared for overlap metrics: per-word stems and coarse tags.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetricPhrase {
    pub words: Vec<String>,
    pub stems: Vec<String>,
    pub pos: Vec<PosTag>,
}

impl MetricPhrase {
    /// Build from raw text with the default resources (nouns resolved by
    /// the bundled tagger).
    pub fn from_text(text: &str, lang: &crate::corpus::LanguageResources) -> Self {
        let tokens = crate::corpus::tokenize(text, lang);
        MetricPhrase {
            words: tokens.iter().map(|t| t.surface.clone()).collect(),
            stems: tokens.iter().map(|t| t.stem.clone()).collect(),
            pos: tokens.iter().map(|t| t.pos).collect(),
        }
    }

    pub fn from_words<S: AsRef<str>>(words: &[S], pos: &[PosTag]) -> Self {
        MetricPhrase {
            words: words.iter().map(|w| w.as_ref().to_string()).collect(),
            stems: words.iter().map(|w| porter_stem(&w.as_ref().to_lowercase())).collect(),
            pos: pos.to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    fn noun_stems(&self) -> impl Iterator<Item = &str> {
        self.stems
            .iter()
            .zip(&self.pos)
            .filter(|(_, &p)| p == PosTag::Noun)
            .map(|(s, _)| s.as_str())
    }
}

/// Multiset overlap (modulo stemming) between two phrases.
fn stem_overlap(a: &MetricPhrase, b: &MetricPhrase) -> usize {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for s in &a.stems {
        *counts.entry(s.as_str()).or_default() += 1;
    }
    let mut overlap = 0;
    for s in &b.stems {
        if let Some(c) = counts.get_mut(s.as_str()) {
            if *c > 0 {
                *c -= 1;
                overlap += 1;
            }
        }
    }
    overlap
}

/// Mutual overlap: n_o / max(n_r, n_c); full credit to exact matches and
/// morphological variants, partial credit to containment either way.
pub fn mutual_overlap(reference: &MetricPhrase, candidate: &MetricPhrase) -> f64 {
    let denom = reference.len().max(candidate.len());
    if denom == 0 {
        return 0.0;
    }
    stem_overlap(reference, candidate) as f64 / denom as f64
}

/// Weighted mutual overlap over k scored candidates; candidate scores must
/// be normalized to sum 1.
pub fn weighted_mutual_overlap(
    reference: &MetricPhrase,
    candidates: &[(MetricPhrase, f64)],
) -> Result<f64> {
    check_normalized(candidates)?;
    Ok(candidates
        .iter()
        .map(|(cand, score)| mutual_overlap(reference, cand) * score)
        .sum())
}

fn check_normalized(candidates: &[(MetricPhrase, f64)]) -> Result<()> {
    let sum: f64 = candidates.iter().map(|(_, s)| s).sum();
    if candidates.is_empty() || (sum - 1.0).abs() <= 1e-6 {
        Ok(())
    } else {
        Err(Error::UnnormalizedScores(sum))
    }
}

/// Pairwise noun similarity lookup. Identical stems always score 1; the
/// table is symmetric.
#[derive(Debug, Clone, Default)]
pub struct SimilarityProvider {
    table: HashMap<(String, String), f64>,
}

impl SimilarityProvider {
    /// The identity provider: 1 for identical stems, 0 otherwise.
    pub fn identity() -> Self {
        SimilarityProvider::default()
    }

    /// Load a TSV of `noun1<TAB>noun2<TAB>sigma` lines; the symmetric
    /// closure is applied and entries are keyed by stem.
    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut table = HashMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parts: Vec<&str> = line.split('\t').collect();
            if parts.len() != 3 {
                return Err(Error::Config(format!(
                    "similarity table line {}: expected `noun1<TAB>noun2<TAB>sigma`",
                    lineno + 1
                )));
            }
            let sigma: f64 = parts[2].parse().map_err(|_| {
                Error::Config(format!("similarity table line {}: bad sigma", lineno + 1))
            })?;
            let a = porter_stem(&parts[0].to_lowercase());
            let b = porter_stem(&parts[1].to_lowercase());
            table.insert((a.clone(), b.clone()), sigma);
            table.insert((b, a), sigma);
        }
        Ok(SimilarityProvider { table })
    }

    pub fn from_tsv_file(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_tsv(&text)
    }

    pub fn sigma(&self, a: &str, b: &str) -> f64 {
        if a == b {
            return 1.0;
        }
        *self.table.get(&(a.to_string(), b.to_string())).unwrap_or(&0.0)
    }
}

/// Weighted semantic mutual overlap: only NOUN tokens enter the pairwise
/// similarity sum, the denominator stays max(n_r, n_c) over full phrase
/// lengths, and candidates are weighted by their normalized scores. Can
/// exceed 1 because all noun pairs contribute.
pub fn weighted_semantic_mutual_overlap(
    reference: &MetricPhrase,
    candidates: &[(MetricPhrase, f64)],
    sim: &SimilarityProvider,
) -> Result<f64> {
    check_normalized(candidates)?;
    let mut total = 0.0;
    for (cand, score) in candidates {
        let denom = reference.len().max(cand.len());
        if denom == 0 {
            continue;
        }
        let mut pair_sum = 0.0;
        for tr in reference.noun_stems() {
            for tc in cand.noun_stems() {
                pair_sum += sim.sigma(tr, tc);
            }
        }
        total += pair_sum / denom as f64 * score;
    }
    Ok(total)
}

// ---------------------------------------------------------------------------
// End-to-end label agreement
// ---------------------------------------------------------------------------

/// One annotation side for end-to-end comparison: a segmentation plus
/// scored labels per topic (reference sides carry a single label with
/// score 1).
pub struct LabeledAnnotation {
    pub segmentation: Segmentation,
    pub labels: BTreeMap<usize, Vec<(MetricPhrase, f64)>>,
}

/// Pair up the clusters of `a` and `b` with the optimal one-to-one mapping,
/// then score each mapped pair's labels with w-m-o and w-s-m-o (the first
/// label of `a` acts as the reference). Unmapped or unlabeled clusters
/// contribute 0. Returns per-pair `(w_m_o, w_s_m_o)` plus the mean of each.
pub fn end_to_end_label_agreement(
    a: &LabeledAnnotation,
    b: &LabeledAnnotation,
    sim: &SimilarityProvider,
) -> Result<EndToEndScores> {
    let mapping = one_to_one_mapping(&a.segmentation, &b.segmentation)?;
    let mut per_pair = Vec::new();
    let mut used_topics = vec![false; a.segmentation.k.max(1)];
    for &t in &a.segmentation.topic_of {
        used_topics[t] = true;
    }
    for (ta, mapped) in mapping.iter().enumerate() {
        if ta >= used_topics.len() || !used_topics[ta] {
            continue;
        }
        let reference = a.labels.get(&ta).and_then(|ls| ls.first());
        let candidates = mapped.and_then(|tb| b.labels.get(&tb));
        let (wmo, wsmo) = match (reference, candidates) {
            (Some((ref_phrase, _)), Some(cands)) if !cands.is_empty() => (
                weighted_mutual_overlap(ref_phrase, cands)?,
                weighted_semantic_mutual_overlap(ref_phrase, cands, sim)?,
            ),
            _ => (0.0, 0.0),
        };
        per_pair.push((wmo, wsmo));
    }
    Ok(EndToEndScores::from_pairs(per_pair))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EndToEndScores {
    pub per_pair: Vec<(f64, f64)>,
    pub mean_wmo: f64,
    pub max_wmo: f64,
    pub mean_wsmo: f64,
    pub max_wsmo: f64,
}

impl EndToEndScores {
    fn from_pairs(per_pair: Vec<(f64, f64)>) -> Self {
        let n = per_pair.len().max(1) as f64;
        let mean_wmo = per_pair.iter().map(|p| p.0).sum::<f64>() / n;
        let mean_wsmo = per_pair.iter().map(|p| p.1).sum::<f64>() / n;
        let max_wmo = per_pair.iter().map(|p| p.0).fold(0.0, f64::max);
        let max_wsmo = per_pair.iter().map(|p| p.1).fold(0.0, f64::max);
        EndToEndScores { per_pair, mean_wmo, max_wmo, mean_wsmo, max_wsmo }
    }
}
