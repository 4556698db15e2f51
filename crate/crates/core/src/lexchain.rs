//! Lexical chains and the cohesion-based segmenters: plain sequential
//! segmentation over temporal order, and the variant that first segments
//! each fragment-quotation-graph path separately and then consolidates the
//! per-path segments with a normalized cut.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::{Conversation, Sentence};
use crate::error::{Error, Result};
use crate::fqg::{extract_paths, FragmentQuotationGraph};
use crate::graphcut::{partition_ncut, WeightedGraph};
use crate::segmentation::Segmentation;

/// A maximal repetition run of one stem: sentence positions where it
/// occurs, broken wherever the gap between consecutive occurrences exceeds
/// the hiatus. Scored by frequency and compactness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexicalChain {
    pub stem: String,
    /// Positions within the sentence sequence the chains were built from
    /// (equal to sentence ids when built over a whole conversation).
    pub occurrences: Vec<usize>,
    pub score: f64,
    pub span: (usize, usize),
}

impl LexicalChain {
    fn overlaps(&self, range: (usize, usize)) -> bool {
        self.span.0 <= range.1 && range.0 <= self.span.1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LcsegParams {
    /// Analysis window size in sentences.
    pub window: usize,
    /// Maximum gap between consecutive occurrences within one chain.
    pub hiatus: usize,
    /// Width of the centered moving average applied to the cohesion curve.
    pub smoothing_width: usize,
    pub smoothing_passes: usize,
}

impl Default for LcsegParams {
    fn default() -> Self {
        LcsegParams { window: 2, hiatus: 11, smoothing_width: 3, smoothing_passes: 1 }
    }
}

/// Build lexical chains over an ordered sentence sequence. One chain per
/// maximal repetition run of each non-stop stem; the score is
/// freq x ln(n / span_length), never negative.
pub fn build_chains(sentences: &[&Sentence], hiatus: usize) -> Vec<LexicalChain> {
    let n = sentences.len();
    // Occurrence positions and token counts per stem, in first-seen order.
    let mut order: Vec<String> = Vec::new();
    let mut occurrences: HashMap<String, Vec<(usize, usize)>> = HashMap::new();
    for (pos, sentence) in sentences.iter().enumerate() {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for stem in sentence.content_stems() {
            *counts.entry(stem).or_default() += 1;
        }
        for (stem, count) in counts {
            let entry = occurrences.entry(stem.to_string()).or_insert_with(|| {
                order.push(stem.to_string());
                Vec::new()
            });
            entry.push((pos, count));
        }
    }

    let mut chains = Vec::new();
    for stem in order {
        let occ = &occurrences[&stem];
        let mut start = 0;
        for i in 1..=occ.len() {
            let broken = i == occ.len() || occ[i].0 - occ[i - 1].0 > hiatus;
            if !broken {
                continue;
            }
            let run = &occ[start..i];
            let span = (run[0].0, run[run.len() - 1].0);
            let freq: usize = run.iter().map(|&(_, c)| c).sum();
            let span_len = span.1 - span.0 + 1;
            let score = (freq as f64 * (n as f64 / span_len as f64).ln()).max(0.0);
            chains.push(LexicalChain {
                stem: stem.clone(),
                occurrences: run.iter().map(|&(p, _)| p).collect(),
                score,
                span,
            });
            start = i;
        }
    }
    chains
}

/// Lexical cohesion between two sentence windows: cosine of their
/// chain-score vectors, where a chain contributes its score to a window it
/// overlaps and 0 otherwise. Ranges are inclusive positions.
pub fn lexcoh(window_x: (usize, usize), window_y: (usize, usize), chains: &[LexicalChain]) -> f64 {
    let mut dot = 0.0;
    let mut nx = 0.0;
    let mut ny = 0.0;
    for chain in chains {
        let wx = if chain.overlaps(window_x) { chain.score } else { 0.0 };
        let wy = if chain.overlaps(window_y) { chain.score } else { 0.0 };
        dot += wx * wy;
        nx += wx * wx;
        ny += wy * wy;
    }
    if nx == 0.0 || ny == 0.0 {
        0.0
    } else {
        dot / (nx.sqrt() * ny.sqrt())
    }
}

/// Term-frequency cosine between two sentences over non-stop stems.
/// BTreeMaps keep the float accumulation order reproducible.
pub fn cosine_tf(x: &Sentence, y: &Sentence) -> f64 {
    let mut tx: BTreeMap<&str, f64> = BTreeMap::new();
    for stem in x.content_stems() {
        *tx.entry(stem).or_default() += 1.0;
    }
    let mut ty: BTreeMap<&str, f64> = BTreeMap::new();
    for stem in y.content_stems() {
        *ty.entry(stem).or_default() += 1.0;
    }
    let dot: f64 = tx.iter().filter_map(|(s, a)| ty.get(s).map(|b| a * b)).sum();
    let nx: f64 = tx.values().map(|a| a * a).sum();
    let ny: f64 = ty.values().map(|a| a * a).sum();
    if nx == 0.0 || ny == 0.0 {
        0.0
    } else {
        dot / (nx.sqrt() * ny.sqrt())
    }
}

/// Cohesion at every boundary between consecutive sentences: entry `p`
/// compares windows ending at sentence `p` and starting at `p + 1`.
fn cohesion_curve(sentences: &[&Sentence], params: &LcsegParams) -> Vec<f64> {
    let n = sentences.len();
    let chains = build_chains(sentences, params.hiatus);
    let w = params.window.max(1);
    (1..n)
        .map(|p| {
            let x = (p.saturating_sub(w), p - 1);
            let y = (p, (p + w - 1).min(n - 1));
            lexcoh(x, y, &chains)
        })
        .collect()
}

fn smooth(curve: &[f64], width: usize, passes: usize) -> Vec<f64> {
    let half = width / 2;
    let mut current = curve.to_vec();
    for _ in 0..passes {
        let next: Vec<f64> = (0..current.len())
            .map(|i| {
                let lo = i.saturating_sub(half);
                let hi = (i + half).min(current.len() - 1);
                current[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
            })
            .collect();
        current = next;
    }
    current
}

/// Depth of a local minimum below its nearest enclosing peaks.
fn depth_score(curve: &[f64], i: usize) -> f64 {
    let mut l = i;
    while l > 0 && curve[l - 1] >= curve[l] {
        l -= 1;
    }
    let mut r = i;
    while r + 1 < curve.len() && curve[r + 1] >= curve[r] {
        r += 1;
    }
    (curve[l] - curve[i]) + (curve[r] - curve[i])
}

/// Choose the K-1 boundary positions: the deepest local minima of the
/// smoothed cohesion curve, topped up (when minima run out) at the lowest
/// raw-cohesion positions, earlier positions first on ties.
fn choose_boundaries(raw: &[f64], smoothed: &[f64], wanted: usize) -> Vec<usize> {
    let m = smoothed.len();
    let mut minima: Vec<(f64, usize)> = (1..m.saturating_sub(1))
        .filter(|&i| smoothed[i] < smoothed[i - 1] && smoothed[i] < smoothed[i + 1])
        .map(|i| (depth_score(smoothed, i), i))
        .collect();
    minima.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));

    let mut chosen: Vec<usize> = minima.iter().take(wanted).map(|&(_, i)| i).collect();
    if chosen.len() < wanted {
        let mut rest: Vec<usize> = (0..m).filter(|i| !chosen.contains(i)).collect();
        rest.sort_by(|&a, &b| raw[a].partial_cmp(&raw[b]).unwrap().then(a.cmp(&b)));
        chosen.extend(rest.into_iter().take(wanted - chosen.len()));
    }
    chosen.sort_unstable();
    chosen
}

/// Sequential lexical-cohesion segmentation into exactly `k` contiguous
/// segments in temporal order.
pub fn lcseg_segment(
    sentences: &[&Sentence],
    k: usize,
    params: &LcsegParams,
) -> Result<Segmentation> {
    let n = sentences.len();
    if k == 0 || k > n {
        return Err(Error::BadTopicCount { k, msg: format!("sequence has {n} sentences") });
    }
    let mut assignment = vec![0usize; n];
    if k > 1 {
        let raw = cohesion_curve(sentences, params);
        let smoothed = smooth(&raw, params.smoothing_width, params.smoothing_passes);
        // Boundary index `i` in the curve separates sentences i and i+1.
        let boundaries = choose_boundaries(&raw, &smoothed, k - 1);
        let mut topic = 0;
        let mut next_boundary = boundaries.iter().peekable();
        for (pos, slot) in assignment.iter_mut().enumerate() {
            if next_boundary.peek().is_some_and(|&&b| b + 1 == pos) {
                topic += 1;
                next_boundary.next();
            }
            *slot = topic;
        }
    }
    Ok(Segmentation::from_assignment(&assignment))
}

/// Segment a conversation by running the sequential segmenter on every FQG
/// path separately (per-path topic budget proportional to path length) and
/// consolidating: sentences co-segmented `n > 0` times get edge weight `n`,
/// remaining pairs their term-frequency cosine, and the resulting graph is
/// cut into `k` clusters.
pub fn lcseg_fqg_segment(
    conversation: &Conversation,
    fqg: &FragmentQuotationGraph,
    k: usize,
    params: &LcsegParams,
) -> Result<Segmentation> {
    let n = conversation.n_sentences();
    if k == 0 || k > n {
        return Err(Error::BadTopicCount { k, msg: format!("conversation has {n} sentences") });
    }
    let paths = extract_paths(fqg)?;
    let path_sentences: Vec<Vec<usize>> = paths
        .iter()
        .map(|path| {
            let mut ids: Vec<usize> = path
                .iter()
                .flat_map(|&fid| fqg.fragment(fid).expect("path fragment").sentence_ids.clone())
                .collect();
            ids.sort_unstable();
            ids
        })
        .collect();
    let total: usize = path_sentences.iter().map(|p| p.len()).sum();

    let mut cosegment: HashMap<(usize, usize), f64> = HashMap::new();
    for ids in &path_sentences {
        let len = ids.len();
        if len == 0 {
            continue;
        }
        let k_path = ((k as f64 * len as f64 / total as f64).round() as usize).clamp(1, len);
        let refs: Vec<&Sentence> = ids.iter().map(|&i| &conversation.sentences[i]).collect();
        let seg = lcseg_segment(&refs, k_path, params)?;
        for a in 0..len {
            for b in (a + 1)..len {
                if seg.topic_of[a] == seg.topic_of[b] {
                    let key = (ids[a].min(ids[b]), ids[a].max(ids[b]));
                    *cosegment.entry(key).or_default() += 1.0;
                }
            }
        }
    }

    let graph = WeightedGraph::from_fn(n, |i, j| match cosegment.get(&(i, j)) {
        Some(&count) => count,
        None => cosine_tf(&conversation.sentences[i], &conversation.sentences[j]),
    });
    let partition = partition_ncut(&graph, k)?;
    Ok(Segmentation::from_assignment(&partition.cluster_of))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_conversation, LanguageResources};
    use crate::fqg::build_fqg;

    fn sentence(id: usize, text: &str) -> Sentence {
        let lang = LanguageResources::default();
        Sentence {
            id,
            comment_id: "C1".into(),
            text: text.into(),
            tokens: crate::corpus::tokenize(text, &lang),
            quote_depth: 0,
        }
    }

    fn refs(sentences: &[Sentence]) -> Vec<&Sentence> {
        sentences.iter().collect()
    }

    #[test]
    fn contiguous_run_is_one_chain() {
        let ss: Vec<Sentence> = ["filler words here", "kernel boots", "kernel panics", "kernel fixed"]
            .iter()
            .enumerate()
            .map(|(i, t)| sentence(i, t))
            .collect();
        let chains = build_chains(&refs(&ss), 11);
        let kernel: Vec<&LexicalChain> = chains.iter().filter(|c| c.stem == "kernel").collect();
        assert_eq!(kernel.len(), 1);
        assert_eq!(kernel[0].span, (1, 3));
        assert_eq!(kernel[0].occurrences, vec![1, 2, 3]);
    }

    #[test]
    fn hiatus_breaks_chain() {
        let mut ss: Vec<Sentence> = Vec::new();
        for i in 0..21 {
            let text = if i == 1 || i == 20 { "kernel stuff" } else { "other filler" };
            ss.push(sentence(i, text));
        }
        let chains = build_chains(&refs(&ss), 11);
        let kernel: Vec<&LexicalChain> = chains.iter().filter(|c| c.stem == "kernel").collect();
        assert_eq!(kernel.len(), 2, "gap of 19 > hiatus 11 must break the chain");
    }

    #[test]
    fn stopwords_form_no_chain() {
        let ss: Vec<Sentence> =
            (0..3).map(|i| sentence(i, "the the the")).collect();
        let chains = build_chains(&refs(&ss), 11);
        assert!(chains.iter().all(|c| c.stem != "the"));
    }

    #[test]
    fn lexcoh_identical_windows_is_one() {
        // Chains must not span the whole sequence or their compactness
        // score is ln(1) = 0 and the vectors degenerate.
        let ss = vec![
            sentence(0, "kernel scheduler"),
            sentence(1, "kernel scheduler"),
            sentence(2, "garden filler"),
            sentence(3, "garden filler"),
        ];
        let chains = build_chains(&refs(&ss), 11);
        assert!((lexcoh((0, 1), (0, 1), &chains) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lexcoh_disjoint_chains_is_zero() {
        let ss = vec![
            sentence(0, "alpha alpha"),
            sentence(1, "alpha alpha"),
            sentence(2, "omega omega"),
            sentence(3, "omega omega"),
        ];
        let chains = build_chains(&refs(&ss), 0); // hiatus 0: only adjacent repeats chain
        assert_eq!(lexcoh((0, 1), (2, 3), &chains), 0.0);
    }

    #[test]
    fn lexcoh_hand_cosine() {
        // Chain vectors X = (2, 1, 0), Y = (2, 0, 1): cosine 4/5.
        let chains = vec![
            LexicalChain { stem: "a".into(), occurrences: vec![0, 3], score: 2.0, span: (0, 3) },
            LexicalChain { stem: "b".into(), occurrences: vec![0], score: 1.0, span: (0, 0) },
            LexicalChain { stem: "c".into(), occurrences: vec![3], score: 1.0, span: (3, 3) },
        ];
        let got = lexcoh((0, 0), (3, 3), &chains);
        assert!((got - 0.8).abs() < 1e-12, "got {got}");
    }

    #[test]
    fn lexcoh_symmetric_and_bounded() {
        let ss: Vec<Sentence> = [
            "alpha beta gamma",
            "beta gamma delta",
            "delta epsilon",
            "alpha epsilon",
        ]
        .iter()
        .enumerate()
        .map(|(i, t)| sentence(i, t))
        .collect();
        let chains = build_chains(&refs(&ss), 11);
        for (x, y) in [((0, 1), (2, 3)), ((0, 0), (1, 3)), ((0, 2), (1, 3))] {
            let a = lexcoh(x, y, &chains);
            let b = lexcoh(y, x, &chains);
            assert!((a - b).abs() < 1e-12);
            assert!((0.0..=1.0 + 1e-12).contains(&a));
        }
    }

    #[test]
    fn cosine_tf_examples() {
        let x = sentence(0, "kernel kernel scheduler");
        let y = sentence(1, "kernel scheduler scheduler");
        // tf vectors (2, 1) and (1, 2): cosine 4/5.
        assert!((cosine_tf(&x, &y) - 0.8).abs() < 1e-12);
        assert!((cosine_tf(&x, &x) - 1.0).abs() < 1e-12);
        let z = sentence(2, "entirely disjoint vocabulary");
        assert_eq!(cosine_tf(&x, &z), 0.0);
    }

    fn two_block_sentences() -> Vec<Sentence> {
        let block_a = [
            "kernel scheduler tuning begins",
            "kernel scheduler latency measured",
            "scheduler tuning improves kernel",
            "latency numbers for the kernel",
            "tuning the scheduler again",
            "kernel latency finally acceptable",
        ];
        let block_b = [
            "garden tomatoes ripen slowly",
            "watering tomatoes every evening",
            "the garden soil needs compost",
            "compost helps tomatoes ripen",
            "evening watering for the garden",
            "soil and compost mixed well",
        ];
        block_a
            .iter()
            .chain(block_b.iter())
            .enumerate()
            .map(|(i, t)| sentence(i, t))
            .collect()
    }

    #[test]
    fn k1_is_single_segment() {
        let ss = two_block_sentences();
        let seg = lcseg_segment(&refs(&ss), 1, &LcsegParams::default()).unwrap();
        assert_eq!(seg.k, 1);
        assert!(seg.topic_of.iter().all(|&t| t == 0));
    }

    #[test]
    fn vocabulary_disjoint_blocks_split_at_join() {
        let ss = two_block_sentences();
        let seg = lcseg_segment(&refs(&ss), 2, &LcsegParams::default()).unwrap();
        assert_eq!(seg.k, 2);
        assert_eq!(&seg.topic_of[..6], &[0; 6]);
        assert_eq!(&seg.topic_of[6..], &[1; 6]);
    }

    #[test]
    fn segments_are_contiguous_and_exactly_k() {
        let ss = two_block_sentences();
        for k in 1..=6 {
            let seg = lcseg_segment(&refs(&ss), k, &LcsegParams::default()).unwrap();
            assert_eq!(seg.k, k);
            assert_eq!(seg.k_effective(), k);
            for w in seg.topic_of.windows(2) {
                assert!(w[1] == w[0] || w[1] == w[0] + 1, "non-contiguous: {:?}", seg.topic_of);
            }
        }
    }

    #[test]
    fn k_larger_than_n_errors() {
        let ss = two_block_sentences();
        assert!(lcseg_segment(&refs(&ss), 13, &LcsegParams::default()).is_err());
    }

    #[test]
    fn boundary_deficit_fills_from_raw_curve() {
        // All-identical sentences: no local minima at all, so every boundary
        // comes from the deficit rule; earliest positions win ties.
        let ss: Vec<Sentence> = (0..5).map(|i| sentence(i, "same words repeated")).collect();
        let seg = lcseg_segment(&refs(&ss), 3, &LcsegParams::default()).unwrap();
        assert_eq!(seg.k_effective(), 3);
        assert_eq!(seg.topic_of, vec![0, 1, 2, 2, 2]);
    }

    #[test]
    fn scale_invariance_of_boundaries() {
        // Duplicating every sentence's tokens doubles all chain frequencies
        // and hence scores; cosine is scale-invariant so boundaries hold.
        let ss = two_block_sentences();
        let doubled: Vec<Sentence> = ss
            .iter()
            .map(|s| {
                let mut s2 = s.clone();
                let extra = s2.tokens.clone();
                s2.tokens.extend(extra);
                s2
            })
            .collect();
        let a = lcseg_segment(&refs(&ss), 3, &LcsegParams::default()).unwrap();
        let b = lcseg_segment(&refs(&doubled), 3, &LcsegParams::default()).unwrap();
        assert_eq!(a.topic_of, b.topic_of);
    }

    #[test]
    fn single_path_fqg_matches_plain_lcseg() {
        let body_a = "kernel scheduler tuning begins. kernel scheduler latency measured. \
                      scheduler tuning improves kernel."
            .to_string();
        let body_b = "garden tomatoes ripen slowly. watering tomatoes every evening. \
                      compost helps tomatoes ripen.";
        let doc = format!(
            r#"{{"id":"c","comments":[{{"id":"C1","author":"a","title":"t","body":"{body_a} {body_b}"}}]}}"#
        );
        let conv = parse_conversation(&doc, &LanguageResources::default()).unwrap();
        let fqg = build_fqg(&conv);
        assert_eq!(extract_paths(&fqg).unwrap().len(), 1);
        let params = LcsegParams::default();
        let plain = {
            let refs: Vec<&Sentence> = conv.sentences.iter().collect();
            lcseg_segment(&refs, 2, &params).unwrap()
        };
        let consolidated = lcseg_fqg_segment(&conv, &fqg, 2, &params).unwrap();
        assert_eq!(plain.topic_of, consolidated.topic_of);
    }

    #[test]
    fn consolidation_weights_symmetric_nonnegative() {
        let doc = r#"{"id":"c","comments":[
            {"id":"C1","author":"a","title":"t","body":"kernel scheduler tuning. garden tomatoes ripen."},
            {"id":"C2","parent_id":"C1","author":"b","title":"t","body":"kernel latency numbers. compost for tomatoes."}]}"#;
        let conv = parse_conversation(doc, &LanguageResources::default()).unwrap();
        let fqg = build_fqg(&conv);
        // Build the same graph the segmenter uses and check it by hand.
        let seg = lcseg_fqg_segment(&conv, &fqg, 2, &LcsegParams::default()).unwrap();
        assert_eq!(seg.len(), conv.n_sentences());
        assert_eq!(seg.k_effective(), 2);
    }
}
