//! LDA by collapsed Gibbs sampling, with an optional Dirichlet-tree prior
//! that encodes must-link word constraints derived from the fragment
//! quotation graph, plus sentence-level topic assignment.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Conversation;
use crate::error::{Error, Result};
use crate::fqg::FragmentQuotationGraph;
use crate::segmentation::Segmentation;

/// Undirected must-links over vocabulary stems.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WordNetwork {
    pub edges: BTreeSet<(String, String)>,
}

impl WordNetwork {
    pub fn link(&mut self, a: &str, b: &str) {
        if a == b {
            return;
        }
        let (x, y) = if a < b { (a, b) } else { (b, a) };
        self.edges.insert((x.to_string(), y.to_string()));
    }

    pub fn contains(&self, a: &str, b: &str) -> bool {
        let (x, y) = if a < b { (a, b) } else { (b, a) };
        self.edges.contains(&(x.to_string(), y.to_string()))
    }

    /// Connected components with at least two words, plus singleton count.
    fn components(&self, vocab: &[String]) -> Vec<Vec<usize>> {
        let index: HashMap<&str, usize> =
            vocab.iter().enumerate().map(|(i, w)| (w.as_str(), i)).collect();
        let mut parent: Vec<usize> = (0..vocab.len()).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for (a, b) in &self.edges {
            if let (Some(&ia), Some(&ib)) = (index.get(a.as_str()), index.get(b.as_str())) {
                let (ra, rb) = (find(&mut parent, ia), find(&mut parent, ib));
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for i in 0..vocab.len() {
            let root = find(&mut parent, i);
            groups.entry(root).or_default().push(i);
        }
        groups.into_values().filter(|g| g.len() >= 2).collect()
    }
}

/// Link words that sit in the same fragment or in fragments joined by an
/// FQG edge (viewed undirected for linking purposes, per the reply
/// relation's symmetry for topical similarity).
pub fn build_word_network(
    conversation: &Conversation,
    fqg: &FragmentQuotationGraph,
) -> WordNetwork {
    let mut stems_of: HashMap<usize, BTreeSet<&str>> = HashMap::new();
    for fragment in &fqg.nodes {
        let stems = stems_of.entry(fragment.id).or_default();
        for &sid in &fragment.sentence_ids {
            stems.extend(conversation.sentences[sid].content_stems());
        }
    }
    let mut network = WordNetwork::default();
    for fragment in &fqg.nodes {
        let stems = &stems_of[&fragment.id];
        for a in stems.iter() {
            for b in stems.iter() {
                if a < b {
                    network.link(a, b);
                }
            }
        }
    }
    for &(from, to) in &fqg.edges {
        for a in &stems_of[&from] {
            for b in &stems_of[&to] {
                network.link(a, b);
            }
        }
    }
    network
}

/// A depth-two Dirichlet tree: the root owns every singleton word directly
/// (edge weight beta) and one internal node per multi-word must-link group
/// (root edge |L(i)| x beta, leaf edges lambda x beta).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirichletTree {
    pub beta: f64,
    pub lambda: f64,
    /// Component index per vocabulary word, if the word sits under an
    /// internal node.
    pub component_of: Vec<Option<usize>>,
    /// Per internal node: in-edge weight from the root (|L(i)| x beta).
    pub in_weight: Vec<f64>,
    /// Per internal node: sum of its leaf edge weights (|L(i)| x lambda x beta).
    pub out_sum: Vec<f64>,
    /// Leaf edge weight under an internal node (lambda x beta).
    pub leaf_weight: f64,
}

impl DirichletTree {
    /// Delta(i) = in-degree minus out-degree weight of internal node `i`.
    /// Zero everywhere exactly when lambda = 1, where the tree collapses to
    /// the flat symmetric Dirichlet.
    pub fn delta(&self, i: usize) -> f64 {
        self.in_weight[i] - self.out_sum[i]
    }

    pub fn n_internal(&self) -> usize {
        self.in_weight.len()
    }

    fn flat(vocab_len: usize, beta: f64) -> Self {
        DirichletTree {
            beta,
            lambda: 1.0,
            component_of: vec![None; vocab_len],
            in_weight: Vec::new(),
            out_sum: Vec::new(),
            leaf_weight: beta,
        }
    }
}

/// Build the Dirichlet tree for a word network over the given vocabulary.
/// Each connected component with two or more words becomes one internal
/// node; the rest of the vocabulary attaches to the root directly.
pub fn build_dirichlet_tree(
    network: &WordNetwork,
    vocab: &[String],
    beta: f64,
    lambda_reg: f64,
) -> DirichletTree {
    let components = network.components(vocab);
    let mut component_of = vec![None; vocab.len()];
    let mut in_weight = Vec::with_capacity(components.len());
    let mut out_sum = Vec::with_capacity(components.len());
    let leaf_weight = lambda_reg * beta;
    for (ci, members) in components.iter().enumerate() {
        for &w in members {
            component_of[w] = Some(ci);
        }
        in_weight.push(members.len() as f64 * beta);
        out_sum.push(members.len() as f64 * leaf_weight);
    }
    DirichletTree { beta, lambda: lambda_reg, component_of, in_weight, out_sum, leaf_weight }
}

/// Fitted LDA posterior (single final Gibbs sample by default). The JSON
/// form carries {K, alpha, beta, vocab, topic_word, doc_topic, seed} plus
/// the final token assignments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaModel {
    #[serde(rename = "K")]
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub vocab: Vec<String>,
    /// K x V rows of P(word | topic), each summing to 1.
    pub topic_word: Vec<Vec<f64>>,
    /// D x K rows of P(topic | document), each summing to 1.
    pub doc_topic: Vec<Vec<f64>>,
    /// Final token-topic assignments, parallel to the token streams.
    pub z_samples: Vec<Vec<usize>>,
    pub seed: u64,
}

impl LdaModel {
    pub fn vocab_index(&self) -> HashMap<&str, usize> {
        self.vocab.iter().enumerate().map(|(i, w)| (w.as_str(), i)).collect()
    }

    pub fn save_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn load_json(text: &str) -> Result<LdaModel> {
        Ok(serde_json::from_str(text)?)
    }
}

pub struct LdaOptions {
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub iterations: usize,
    pub seed: u64,
    /// Posterior estimates average the last `average_last` iterations'
    /// count snapshots (so the burn-in is `iterations - average_last`).
    /// The default of 1 keeps the single-final-sample behavior; token
    /// assignments always come from the final iteration.
    pub average_last: usize,
    pub tree: Option<DirichletTree>,
}

impl LdaOptions {
    pub fn new(k: usize) -> Self {
        LdaOptions {
            k,
            alpha: 50.0 / k as f64,
            beta: 0.01,
            iterations: 2000,
            seed: 42,
            average_last: 1,
            tree: None,
        }
    }
}

/// Fit LDA on a conversation: documents are comments, tokens are non-stop
/// stems.
pub fn fit_lda(conversation: &Conversation, options: LdaOptions) -> Result<LdaModel> {
    let (docs, vocab) = conversation_docs(conversation);
    fit_lda_docs(&docs, vocab, options)
}

/// Token streams per comment over a dense stem vocabulary, built in first
/// occurrence order for determinism.
pub fn conversation_docs(conversation: &Conversation) -> (Vec<Vec<usize>>, Vec<String>) {
    let mut vocab: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let by_comment = conversation.sentences_by_comment();
    let mut docs = Vec::with_capacity(by_comment.len());
    for sentence_ids in &by_comment {
        let mut doc = Vec::new();
        for &sid in sentence_ids {
            for stem in conversation.sentences[sid].content_stems() {
                let id = *index.entry(stem.to_string()).or_insert_with(|| {
                    vocab.push(stem.to_string());
                    vocab.len() - 1
                });
                doc.push(id);
            }
        }
        docs.push(doc);
    }
    (docs, vocab)
}

/// Fit LDA on raw token-id documents.
pub fn fit_lda_docs(
    docs: &[Vec<usize>],
    vocab: Vec<String>,
    options: LdaOptions,
) -> Result<LdaModel> {
    let v = vocab.len();
    if v == 0 || docs.iter().all(|d| d.is_empty()) {
        return Err(Error::EmptyVocabulary);
    }
    let k = options.k;
    if k == 0 {
        return Err(Error::BadTopicCount { k, msg: "need at least one topic".into() });
    }
    let iterations = options.iterations.max(1);
    let tree = options.tree.unwrap_or_else(|| DirichletTree::flat(v, options.beta));
    assert_eq!(tree.component_of.len(), v, "tree built for a different vocabulary");

    let alpha = options.alpha;
    let beta = options.beta;
    let n_comp = tree.n_internal();
    // Vacuous internal nodes (Delta = 0) cancel exactly; skipping them keeps
    // the lambda = 1 tree bit-identical to the flat prior.
    let transparent: Vec<bool> =
        (0..n_comp).map(|i| tree.in_weight[i] == tree.out_sum[i]).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let d = docs.len();
    let mut z: Vec<Vec<usize>> = docs.iter().map(|doc| vec![0; doc.len()]).collect();
    let mut n_dk = vec![vec![0usize; k]; d];
    let mut n_kw = vec![vec![0usize; v]; k];
    let mut n_k = vec![0usize; k];
    let mut n_ck = vec![vec![0usize; k]; n_comp];

    for (di, doc) in docs.iter().enumerate() {
        for (ti, &w) in doc.iter().enumerate() {
            let topic = rng.gen_range(0..k);
            z[di][ti] = topic;
            n_dk[di][topic] += 1;
            n_kw[topic][w] += 1;
            n_k[topic] += 1;
            if let Some(c) = tree.component_of[w] {
                n_ck[c][topic] += 1;
            }
        }
    }

    debug_assert!(tree.beta == beta, "tree and sampler must share beta");
    let v_beta = v as f64 * tree.beta;
    let average_last = options.average_last.clamp(1, iterations);
    let mut topic_word_acc = vec![vec![0.0f64; v]; k];
    let mut doc_topic_acc = vec![vec![0.0f64; k]; d];
    let mut weights = vec![0.0f64; k];
    for iteration in 0..iterations {
        for (di, doc) in docs.iter().enumerate() {
            for (ti, &w) in doc.iter().enumerate() {
                let old = z[di][ti];
                n_dk[di][old] -= 1;
                n_kw[old][w] -= 1;
                n_k[old] -= 1;
                let comp = tree.component_of[w].filter(|&c| !transparent[c]);
                if let Some(c) = tree.component_of[w] {
                    n_ck[c][old] -= 1;
                }

                let mut total = 0.0;
                for (topic, weight) in weights.iter_mut().enumerate() {
                    let doc_term = n_dk[di][topic] as f64 + alpha;
                    // Word term: product over the root-to-leaf path of
                    // (count + weight) / (out-count + out-weight-sum).
                    // Words attached to the root directly (and members of
                    // vacuous Delta = 0 components, whose factors cancel
                    // exactly) use the single-edge form.
                    let word_term = match comp {
                        None => {
                            (n_kw[topic][w] as f64 + tree.beta)
                                / (n_k[topic] as f64 + v_beta)
                        }
                        Some(c) => {
                            let comp_count = n_ck[c][topic] as f64;
                            ((comp_count + tree.in_weight[c]) / (n_k[topic] as f64 + v_beta))
                                * ((n_kw[topic][w] as f64 + tree.leaf_weight)
                                    / (comp_count + tree.out_sum[c]))
                        }
                    };
                    *weight = doc_term * word_term;
                    total += *weight;
                }

                let mut target = rng.gen::<f64>() * total;
                let mut new = k - 1;
                for (topic, &weight) in weights.iter().enumerate() {
                    target -= weight;
                    if target <= 0.0 {
                        new = topic;
                        break;
                    }
                }

                z[di][ti] = new;
                n_dk[di][new] += 1;
                n_kw[new][w] += 1;
                n_k[new] += 1;
                if let Some(c) = tree.component_of[w] {
                    n_ck[c][new] += 1;
                }
            }
        }

        if iteration + average_last >= iterations {
            for topic in 0..k {
                for w in 0..v {
                    topic_word_acc[topic][w] +=
                        (n_kw[topic][w] as f64 + beta) / (n_k[topic] as f64 + v_beta);
                }
            }
            for di in 0..d {
                let n_d: usize = n_dk[di].iter().sum();
                for topic in 0..k {
                    doc_topic_acc[di][topic] +=
                        (n_dk[di][topic] as f64 + alpha) / (n_d as f64 + k as f64 * alpha);
                }
            }
        }
    }

    let samples = average_last as f64;
    let topic_word: Vec<Vec<f64>> = topic_word_acc
        .into_iter()
        .map(|row| row.into_iter().map(|x| x / samples).collect())
        .collect();
    let doc_topic: Vec<Vec<f64>> = doc_topic_acc
        .into_iter()
        .map(|row| row.into_iter().map(|x| x / samples).collect())
        .collect();

    Ok(LdaModel {
        k,
        alpha,
        beta,
        vocab,
        topic_word,
        doc_topic,
        z_samples: z,
        seed: options.seed,
    })
}

/// Assign one topic per sentence: the words of a sentence are assumed
/// independent, so log P(topic | sentence) sums per-token log posteriors
/// estimated from the token's sampled assignments across the conversation
/// (smoothed by beta). Sentences with no content tokens inherit the topic
/// of the previous sentence in the same comment, falling back to topic 0.
/// Exact ties break toward the lowest topic id.
pub fn assign_sentence_topics(
    model: &LdaModel,
    conversation: &Conversation,
) -> Segmentation {
    let index = model.vocab_index();
    let (docs, _) = conversation_docs(conversation);
    // Empirical assignment counts per word.
    let mut word_topic = vec![vec![0usize; model.k]; model.vocab.len()];
    for (doc, zs) in docs.iter().zip(&model.z_samples) {
        for (&w, &topic) in doc.iter().zip(zs) {
            word_topic[w][topic] += 1;
        }
    }

    let mut assignment = Vec::with_capacity(conversation.n_sentences());
    let mut last_in_comment: HashMap<&str, usize> = HashMap::new();
    for sentence in &conversation.sentences {
        let mut log_p = vec![0.0f64; model.k];
        let mut any = false;
        for stem in sentence.content_stems() {
            let Some(&w) = index.get(stem) else { continue };
            any = true;
            let total: usize = word_topic[w].iter().sum();
            for (topic, lp) in log_p.iter_mut().enumerate() {
                let p = (word_topic[w][topic] as f64 + model.beta)
                    / (total as f64 + model.k as f64 * model.beta);
                *lp += p.ln();
            }
        }
        let topic = if any {
            let mut best = 0;
            for t in 1..model.k {
                if log_p[t] > log_p[best] {
                    best = t;
                }
            }
            best
        } else {
            *last_in_comment.get(sentence.comment_id.as_str()).unwrap_or(&0)
        };
        last_in_comment.insert(sentence.comment_id.as_str(), topic);
        assignment.push(topic);
    }
    Segmentation::from_labeled_assignment(assignment)
}

/// Fit LDA (optionally FQG-regularized) and assign sentence topics,
/// renumbering densely for canonical output. Returns the fitted model for
/// persistence alongside the segmentation.
#[allow(clippy::too_many_arguments)]
pub fn lda_fit_and_segment(
    conversation: &Conversation,
    k: usize,
    fqg: Option<&FragmentQuotationGraph>,
    alpha: f64,
    beta: f64,
    lambda_reg: f64,
    iterations: usize,
    seed: u64,
) -> Result<(LdaModel, Segmentation)> {
    let (docs, vocab) = conversation_docs(conversation);
    let tree = fqg.map(|g| {
        let network = build_word_network(conversation, g);
        build_dirichlet_tree(&network, &vocab, beta, lambda_reg)
    });
    let model = fit_lda_docs(
        &docs,
        vocab,
        LdaOptions { k, alpha, beta, iterations, seed, average_last: 1, tree },
    )?;
    let seg = assign_sentence_topics(&model, conversation);
    let seg = Segmentation::from_assignment(&seg.topic_of);
    Ok((model, seg))
}

/// Segmentation-only convenience wrapper around `lda_fit_and_segment`.
#[allow(clippy::too_many_arguments)]
pub fn lda_segment(
    conversation: &Conversation,
    k: usize,
    fqg: Option<&FragmentQuotationGraph>,
    alpha: f64,
    beta: f64,
    lambda_reg: f64,
    iterations: usize,
    seed: u64,
) -> Result<Segmentation> {
    lda_fit_and_segment(conversation, k, fqg, alpha, beta, lambda_reg, iterations, seed)
        .map(|(_, seg)| seg)
}
