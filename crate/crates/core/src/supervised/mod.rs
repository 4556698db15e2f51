//! Supervised topic segmentation: classify every sentence pair as same or
//! different topic with lexical, conversational and topic features, then
//! partition the complete probability-weighted sentence graph with the
//! normalized cut.

pub mod logreg;
pub mod lsa;

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};

use crate::corpus::{Conversation, LanguageResources, Sentence};
use crate::error::{Error, Result};
use crate::fqg::{build_fqg, FragmentQuotationGraph};
use crate::graphcut::{partition_ncut, WeightedGraph};
use crate::lexchain::{build_chains, lexcoh, LcsegParams, LexicalChain};
use crate::segmentation::Segmentation;

pub use logreg::{loss_and_gradient, train_classifier, train_with_cv, ClassifierModel};
pub use lsa::{compute_lsa, conversation_idf, default_rank, LsaSpace};

/// Fixed feature order shared by extraction, training and model files.
pub const FEATURE_NAMES: [&str; 19] = [
    "TFIDF1", "TFIDF2", "CueWords", "QA", "Greet", "Gap", "Speaker", "FQG1", "FQG2", "FQG3",
    "SameReply", "Name", "LSA1", "LSA2", "LDA", "LDA+FQG", "LCSeg", "LCSeg+FQG", "LexCoh",
];

pub fn feature_names() -> Vec<String> {
    FEATURE_NAMES.iter().map(|s| s.to_string()).collect()
}

const ANSWER_WORDS: [&str; 6] = ["yes", "yeah", "okay", "ok", "no", "nope"];
const GREETING_WORDS: [&str; 6] = ["hi", "hello", "thanks", "thx", "tnx", "thank"];

/// Everything feature extraction needs about one conversation, built once.
pub struct FeatureContext<'a> {
    pub conversation: &'a Conversation,
    pub fqg: FragmentQuotationGraph,
    chains: Vec<LexicalChain>,
    lsa: LsaSpace,
    idf: HashMap<String, f64>,
    /// Segmentation decisions of the unsupervised models, keyed by the
    /// feature name they feed.
    pub decisions: BTreeMap<String, Segmentation>,
    cue_words: HashSet<String>,
    fragment_of: Vec<usize>,
    author_first: Vec<String>,
}

impl<'a> FeatureContext<'a> {
    /// Build the context, running the four unsupervised segmenters with
    /// `k` topics each (their decisions become topic features).
    pub fn build(
        conversation: &'a Conversation,
        lang: &LanguageResources,
        k: usize,
        lcseg: &LcsegParams,
        lda_iterations: usize,
        lda_seed: u64,
        lda_lambda: f64,
    ) -> Result<Self> {
        let fqg = build_fqg(conversation);
        let refs: Vec<&Sentence> = conversation.sentences.iter().collect();
        let chains = build_chains(&refs, lcseg.hiatus);
        let lsa = compute_lsa(conversation, default_rank(conversation.comments.len()))?;
        let idf = conversation_idf(conversation);

        let mut decisions = BTreeMap::new();
        let k = k.clamp(1, conversation.n_sentences());
        decisions.insert(
            "LCSeg".to_string(),
            crate::lexchain::lcseg_segment(&refs, k, lcseg)?,
        );
        decisions.insert(
            "LCSeg+FQG".to_string(),
            crate::lexchain::lcseg_fqg_segment(conversation, &fqg, k, lcseg)?,
        );
        let alpha = 50.0 / k as f64;
        let beta = 0.01;
        decisions.insert(
            "LDA".to_string(),
            crate::topicmodel::lda_segment(
                conversation,
                k,
                None,
                alpha,
                beta,
                1.0,
                lda_iterations,
                lda_seed,
            )?,
        );
        decisions.insert(
            "LDA+FQG".to_string(),
            crate::topicmodel::lda_segment(
                conversation,
                k,
                Some(&fqg),
                alpha,
                beta,
                lda_lambda,
                lda_iterations,
                lda_seed,
            )?,
        );

        Ok(Self::assemble(conversation, lang, fqg, chains, lsa, idf, decisions))
    }

    /// Build without running the unsupervised segmenters (their decision
    /// features read as 0). Used by tests and lightweight tooling.
    pub fn build_basic(
        conversation: &'a Conversation,
        lang: &LanguageResources,
    ) -> Result<Self> {
        let fqg = build_fqg(conversation);
        let refs: Vec<&Sentence> = conversation.sentences.iter().collect();
        let chains = build_chains(&refs, LcsegParams::default().hiatus);
        let lsa = compute_lsa(conversation, default_rank(conversation.comments.len()))?;
        let idf = conversation_idf(conversation);
        Ok(Self::assemble(conversation, lang, fqg, chains, lsa, idf, BTreeMap::new()))
    }

    fn assemble(
        conversation: &'a Conversation,
        lang: &LanguageResources,
        fqg: FragmentQuotationGraph,
        chains: Vec<LexicalChain>,
        lsa: LsaSpace,
        idf: HashMap<String, f64>,
        decisions: BTreeMap<String, Segmentation>,
    ) -> Self {
        let fragment_of: Vec<usize> = (0..conversation.n_sentences())
            .map(|sid| fqg.fragment_of_sentence(sid).unwrap_or(0))
            .collect();
        let author_first: Vec<String> = (0..conversation.n_sentences())
            .map(|sid| {
                conversation
                    .author_of_sentence(sid)
                    .split_whitespace()
                    .next()
                    .unwrap_or("")
                    .to_lowercase()
            })
            .collect();
        FeatureContext {
            conversation,
            fqg,
            chains,
            lsa,
            idf,
            decisions,
            cue_words: lang.cue_words.clone(),
            fragment_of,
            author_first,
        }
    }

    fn window(&self, center: usize, before: bool, size: usize) -> Vec<usize> {
        let n = self.conversation.n_sentences();
        if before {
            (center.saturating_sub(size - 1)..=center).collect()
        } else {
            (center..(center + size).min(n)).collect()
        }
    }

    fn tfidf_cosine(&self, xs: &[usize], ys: &[usize]) -> f64 {
        let vector = |ids: &[usize]| -> BTreeMap<&str, f64> {
            let mut v: BTreeMap<&str, f64> = BTreeMap::new();
            for &sid in ids {
                for stem in self.conversation.sentences[sid].content_stems() {
                    *v.entry(stem).or_default() += self.idf.get(stem).copied().unwrap_or(0.0);
                }
            }
            v
        };
        cosine_maps(&vector(xs), &vector(ys))
    }

    fn lsa_cosine(&self, xs: &[usize], ys: &[usize]) -> f64 {
        let rank = self.lsa.rank;
        let sum = |ids: &[usize]| -> Vec<f64> {
            let mut acc = vec![0.0; rank];
            for &sid in ids {
                for (a, b) in acc.iter_mut().zip(&self.lsa.sentence_vectors[sid]) {
                    *a += b;
                }
            }
            acc
        };
        lsa::cosine(&sum(xs), &sum(ys))
    }

    fn fqg_directed_hops(&self, from: usize, to: usize) -> f64 {
        self.fqg_hops(from, to, false)
    }

    fn fqg_undirected_hops(&self, from: usize, to: usize) -> f64 {
        self.fqg_hops(from, to, true)
    }

    fn fqg_hops(&self, from: usize, to: usize, undirected: bool) -> f64 {
        if from == to {
            return 0.0;
        }
        let mut queue = VecDeque::from([(from, 0usize)]);
        let mut seen = HashSet::from([from]);
        while let Some((node, dist)) = queue.pop_front() {
            let mut neighbors: Vec<usize> = self.fqg.out_neighbors(node).collect();
            if undirected {
                neighbors.extend(self.fqg.in_neighbors(node));
            }
            for next in neighbors {
                if next == to {
                    return (dist + 1) as f64;
                }
                if seen.insert(next) {
                    queue.push_back((next, dist + 1));
                }
            }
        }
        -1.0 // unreachable sentinel, kept for the classifier to learn
    }
}

fn cosine_maps(a: &BTreeMap<&str, f64>, b: &BTreeMap<&str, f64>) -> f64 {
    let dot: f64 = a.iter().filter_map(|(k, x)| b.get(k).map(|y| x * y)).sum();
    let na: f64 = a.values().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.values().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// TF.IDF cosine between two sentences with precomputed idf weights.
pub fn cosine_tfidf(x: &Sentence, y: &Sentence, idf: &HashMap<String, f64>) -> f64 {
    fn vector<'a>(s: &'a Sentence, idf: &HashMap<String, f64>) -> BTreeMap<&'a str, f64> {
        let mut v: BTreeMap<&str, f64> = BTreeMap::new();
        for stem in s.content_stems() {
            *v.entry(stem).or_default() += idf.get(stem).copied().unwrap_or(0.0);
        }
        v
    }
    cosine_maps(&vector(x, idf), &vector(y, idf))
}

fn has_token(sentence: &Sentence, words: &[&str]) -> bool {
    sentence
        .tokens
        .iter()
        .any(|t| words.contains(&t.surface.to_lowercase().as_str()))
}

/// Compute the full Table-2-style feature vector for a sentence pair,
/// requiring x.id < y.id.
pub fn extract_pair_features(ctx: &FeatureContext, x: usize, y: usize) -> Result<Vec<f64>> {
    let n = ctx.conversation.n_sentences();
    if x >= n || y >= n {
        return Err(Error::SentenceOutOfRange(x.max(y)));
    }
    assert!(x < y, "pair features are defined for x.id < y.id");
    let sx = &ctx.conversation.sentences[x];
    let sy = &ctx.conversation.sentences[y];

    let mut features = Vec::with_capacity(FEATURE_NAMES.len());
    // Lexical: windowed TF.IDF similarities.
    for size in [1usize, 2] {
        features.push(ctx.tfidf_cosine(&ctx.window(x, true, size), &ctx.window(y, false, size)));
    }
    // Cue words in either sentence.
    let cue = sx
        .tokens
        .iter()
        .chain(&sy.tokens)
        .any(|t| ctx.cue_words.contains(&t.surface.to_lowercase()));
    features.push(f64::from(cue));
    // QA: x asks with '?', y answers with a yes/no word.
    features.push(f64::from(sx.has_question_mark() && has_token(sy, &ANSWER_WORDS)));
    // Greeting in either sentence.
    features.push(f64::from(has_token(sx, &GREETING_WORDS) || has_token(sy, &GREETING_WORDS)));

    // Conversational.
    features.push((y - x) as f64); // Gap
    let ax = ctx.conversation.author_of_sentence(x);
    let ay = ctx.conversation.author_of_sentence(y);
    features.push(f64::from(ax == ay)); // Speaker
    let (fx, fy) = (ctx.fragment_of[x], ctx.fragment_of[y]);
    features.push((fy as f64 - fx as f64).abs()); // FQG1
    features.push(ctx.fqg_directed_hops(fy, fx)); // FQG2
    features.push(ctx.fqg_undirected_hops(fy, fx)); // FQG3
    let same_comment = sx.comment_id == sy.comment_id;
    let reply = {
        let cx = ctx.conversation.comment(&sx.comment_id);
        let cy = ctx.conversation.comment(&sy.comment_id);
        let parent_of = |c: Option<&crate::corpus::Comment>| {
            c.and_then(|c| c.parent_id.clone())
        };
        parent_of(cx).as_deref() == Some(sy.comment_id.as_str())
            || parent_of(cy).as_deref() == Some(sx.comment_id.as_str())
    };
    features.push(f64::from(same_comment || reply)); // Same/Reply
    let name = sy.tokens.iter().any(|t| {
        !ctx.author_first[x].is_empty() && t.surface.to_lowercase() == ctx.author_first[x]
    }) || sx.tokens.iter().any(|t| {
        !ctx.author_first[y].is_empty() && t.surface.to_lowercase() == ctx.author_first[y]
    });
    features.push(f64::from(name)); // Name

    // Topic features.
    for size in [1usize, 2] {
        features.push(ctx.lsa_cosine(&ctx.window(x, true, size), &ctx.window(y, false, size)));
    }
    for key in ["LDA", "LDA+FQG", "LCSeg", "LCSeg+FQG"] {
        let same = ctx
            .decisions
            .get(key)
            .map(|seg| seg.same_topic(x, y))
            .unwrap_or(false);
        features.push(f64::from(same));
    }
    // LexCoh over (possibly non-consecutive) windows around x and y.
    let wx = ctx.window(x, true, 2);
    let wy = ctx.window(y, false, 2);
    features.push(lexcoh(
        (wx[0], *wx.last().unwrap()),
        (wy[0], *wy.last().unwrap()),
        &ctx.chains,
    ));

    debug_assert_eq!(features.len(), FEATURE_NAMES.len());
    Ok(features)
}

/// Expand gold-annotated conversations into labeled sentence pairs:
/// exactly n(n-1)/2 per conversation, labeled same when a strict majority
/// of annotators co-cluster the pair.
pub fn pair_expansion(
    ctx: &FeatureContext,
    annotations: &[Segmentation],
) -> Result<Vec<(Vec<f64>, bool)>> {
    let n = ctx.conversation.n_sentences();
    for seg in annotations {
        if seg.len() != n {
            return Err(Error::UniverseMismatch { a: seg.len(), b: n });
        }
    }
    let mut pairs = Vec::with_capacity(n * (n.saturating_sub(1)) / 2);
    for x in 0..n {
        for y in (x + 1)..n {
            let votes = annotations.iter().filter(|seg| seg.same_topic(x, y)).count();
            let label = 2 * votes > annotations.len();
            pairs.push((extract_pair_features(ctx, x, y)?, label));
        }
    }
    Ok(pairs)
}

/// Segment with a trained pairwise classifier: a complete sentence graph
/// weighted by predicted same-topic probabilities, cut into `k` clusters.
pub fn supervised_segment(
    ctx: &FeatureContext,
    model: &ClassifierModel,
    k: usize,
) -> Result<Segmentation> {
    let n = ctx.conversation.n_sentences();
    let mut graph = WeightedGraph::new(n);
    for x in 0..n {
        for y in (x + 1)..n {
            let features = extract_pair_features(ctx, x, y)?;
            graph.set(x, y, model.predict(&features));
        }
    }
    let partition = partition_ncut(&graph, k)?;
    Ok(Segmentation::from_assignment(&partition.cluster_of))
}

/// Segment from an explicit pairwise probability function (used by the
/// oracle-classifier check and degenerate-input tests).
pub fn segment_from_probabilities(
    n: usize,
    k: usize,
    prob: impl Fn(usize, usize) -> f64,
) -> Result<Segmentation> {
    let graph = WeightedGraph::from_fn(n, &prob);
    let partition = partition_ncut(&graph, k)?;
    Ok(Segmentation::from_assignment(&partition.cluster_of))
}
