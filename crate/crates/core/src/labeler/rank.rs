//! Random-walk word ranking: the leading-sentence biased walk, the plain
//! co-occurrence walk, and co-ranking of fragments and words through their
//! bipartite occurrence graph.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::Sentence;
use crate::error::{Error, Result};
use crate::fqg::FragmentQuotationGraph;
use crate::labeler::WordGraph;

const RANK_TOL: f64 = 1e-8;
const RANK_MAX_ITERS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RankKind {
    Word,
    Fragment,
    WordCorank,
}

/// A probability vector over ranked items (sums to 1, entries >= 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankVector {
    pub kind: RankKind,
    pub scores: Vec<f64>,
}

impl RankVector {
    pub fn normalized(kind: RankKind, mut scores: Vec<f64>) -> Self {
        let sum: f64 = scores.iter().sum();
        if sum > 0.0 {
            for s in scores.iter_mut() {
                *s /= sum;
            }
        } else if !scores.is_empty() {
            let uniform = 1.0 / scores.len() as f64;
            scores.iter_mut().for_each(|s| *s = uniform);
        }
        RankVector { kind, scores }
    }
}

/// Normalize a row to a distribution; empty mass falls back to uniform.
fn stochastic_row(row: &[f64]) -> Vec<f64> {
    let sum: f64 = row.iter().sum();
    if sum > 0.0 {
        row.iter().map(|v| v / sum).collect()
    } else {
        vec![1.0 / row.len() as f64; row.len()]
    }
}

/// Mix the teleport component into a row-stochastic matrix:
/// d * T + (1 - d)/cols.
fn teleport_mix(rows: &mut [Vec<f64>], damping: f64) {
    for row in rows.iter_mut() {
        let cols = row.len() as f64;
        for v in row.iter_mut() {
            *v = damping * *v + (1.0 - damping) / cols;
        }
    }
}

/// x^T M for a row-stochastic matrix M (rows x cols).
fn apply_transpose(m: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    let cols = m.first().map_or(0, |r| r.len());
    let mut out = vec![0.0; cols];
    for (i, row) in m.iter().enumerate() {
        let xi = x[i];
        if xi == 0.0 {
            continue;
        }
        for (j, &v) in row.iter().enumerate() {
            out[j] += xi * v;
        }
    }
    out
}

fn l1_delta(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Stationary distribution of the biased random walk
/// A = lambda * Q + (1 - lambda) * R with teleport damping `d`, where every
/// row of Q is the normalized leading-sentence relevance and R row-
/// normalizes the co-occurrence weights. All-zero relevance falls back to
/// uniform Q rows.
pub fn biased_rank(graph: &WordGraph, lambda_bias: f64, damping: f64) -> Result<RankVector> {
    let n = graph.words.len();
    if n == 0 {
        return Err(Error::EmptyGraph("word graph has no candidate words"));
    }
    let q_row = stochastic_row(&graph.rho);
    let r_rows: Vec<Vec<f64>> = (0..n).map(|i| stochastic_row(graph.edge_row(i))).collect();

    let mut pi = vec![1.0 / n as f64; n];
    for _ in 0..RANK_MAX_ITERS {
        let next = step_biased(&pi, &q_row, &r_rows, lambda_bias, damping);
        let delta = l1_delta(&next, &pi);
        pi = next;
        if delta < RANK_TOL / 10.0 {
            break;
        }
    }
    Ok(RankVector { kind: RankKind::Word, scores: pi })
}

/// One dampened update pi' = [d A + (1-d)/N J]^T pi, using that every row
/// of Q equals `q_row` so pi^T Q = q_row for any distribution pi.
fn step_biased(
    pi: &[f64],
    q_row: &[f64],
    r_rows: &[Vec<f64>],
    lambda: f64,
    damping: f64,
) -> Vec<f64> {
    let n = pi.len();
    let via_r = apply_transpose(r_rows, pi);
    (0..n)
        .map(|j| {
            let a = lambda * q_row[j] + (1.0 - lambda) * via_r[j];
            damping * a + (1.0 - damping) / n as f64
        })
        .collect()
}

/// Residual of stationarity for verification: ||pi - A'^T pi||_1.
pub fn biased_rank_residual(
    graph: &WordGraph,
    pi: &[f64],
    lambda_bias: f64,
    damping: f64,
) -> f64 {
    let q_row = stochastic_row(&graph.rho);
    let r_rows: Vec<Vec<f64>> =
        (0..graph.words.len()).map(|i| stochastic_row(graph.edge_row(i))).collect();
    let next = step_biased(pi, &q_row, &r_rows, lambda_bias, damping);
    l1_delta(&next, pi)
}

/// Unbiased walk over raw co-occurrence counts (the whole-conversation
/// adjustment of the biased model, also the generic keyphrase baseline).
pub fn general_rank(graph: &WordGraph, damping: f64) -> Result<RankVector> {
    biased_rank(graph, 0.0, damping)
}

/// How the word-side transition of co-ranking is built.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CorankWordWalk {
    /// Plain row-normalized co-occurrence weights.
    General,
    /// Leading-sentence biased combination with the given lambda.
    Biased(f64),
}

pub struct CorankOutcome {
    pub fragment_rank: RankVector,
    pub word_rank: RankVector,
    /// True when the fragment graph was empty and the word rank fell back
    /// to the plain biased walk.
    pub fell_back: bool,
}

/// Co-ranking of a (projected) fragment quotation graph and a word graph,
/// coupled by word-in-fragment occurrence counts. `delta` balances the
/// intra-class walks against the coupled bipartite walk. Update steps are
///
///   f' = (1-d) F^T f + d WF^T (FW^T (WF^T w))
///   w' = (1-d) W^T w + d FW^T (WF^T (FW^T f))
///
/// with f and w renormalized to sum 1 after each step; all transition
/// matrices carry the teleport component.
pub fn corank(
    fragment_graph: &FragmentQuotationGraph,
    word_graph: &WordGraph,
    sentences: &[&Sentence],
    delta: f64,
    word_walk: CorankWordWalk,
    damping: f64,
) -> Result<CorankOutcome> {
    let n = word_graph.words.len();
    if n == 0 {
        return Err(Error::EmptyGraph("word graph has no candidate words"));
    }
    let m = fragment_graph.nodes.len();
    if m == 0 {
        let lambda = match word_walk {
            CorankWordWalk::General => 0.0,
            CorankWordWalk::Biased(lambda) => lambda,
        };
        let word_rank = biased_rank(word_graph, lambda, damping)?;
        return Ok(CorankOutcome {
            fragment_rank: RankVector { kind: RankKind::Fragment, scores: Vec::new() },
            word_rank,
            fell_back: true,
        });
    }

    // F: uniform over FQG out-edges, dangling rows uniform.
    let frag_ids: Vec<usize> = fragment_graph.nodes.iter().map(|f| f.id).collect();
    let frag_pos: HashMap<usize, usize> =
        frag_ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let mut f_rows = vec![vec![0.0; m]; m];
    for &(from, to) in &fragment_graph.edges {
        f_rows[frag_pos[&from]][frag_pos[&to]] = 1.0;
    }
    let mut f_rows: Vec<Vec<f64>> = f_rows.iter().map(|r| stochastic_row(r)).collect();
    teleport_mix(&mut f_rows, damping);

    // W: word transition per the requested walk.
    let q_row = stochastic_row(&word_graph.rho);
    let mut w_rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let r = stochastic_row(word_graph.edge_row(i));
            match word_walk {
                CorankWordWalk::General => r,
                CorankWordWalk::Biased(lambda) => (0..n)
                    .map(|j| lambda * q_row[j] + (1.0 - lambda) * r[j])
                    .collect(),
            }
        })
        .collect();
    teleport_mix(&mut w_rows, damping);

    // Bipartite occurrence counts: word tokens inside each fragment.
    let word_pos: HashMap<&str, usize> =
        word_graph.words.iter().enumerate().map(|(i, w)| (w.as_str(), i)).collect();
    let sentence_by_id: HashMap<usize, &Sentence> =
        sentences.iter().map(|s| (s.id, *s)).collect();
    let mut counts = vec![vec![0.0f64; n]; m];
    for (fi, fragment) in fragment_graph.nodes.iter().enumerate() {
        for sid in &fragment.sentence_ids {
            let Some(sentence) = sentence_by_id.get(sid) else { continue };
            for stem in sentence.content_stems() {
                if let Some(&wi) = word_pos.get(stem) {
                    counts[fi][wi] += 1.0;
                }
            }
        }
    }
    let mut fw_rows: Vec<Vec<f64>> = counts.iter().map(|r| stochastic_row(r)).collect();
    let mut wf_rows: Vec<Vec<f64>> = (0..n)
        .map(|wi| {
            let col: Vec<f64> = (0..m).map(|fi| counts[fi][wi]).collect();
            stochastic_row(&col)
        })
        .collect();
    teleport_mix(&mut fw_rows, damping);
    teleport_mix(&mut wf_rows, damping);

    let mut f = vec![1.0 / m as f64; m];
    let mut w = vec![1.0 / n as f64; n];
    for _ in 0..RANK_MAX_ITERS {
        let (next_f, next_w) =
            corank_step(&f, &w, &f_rows, &w_rows, &fw_rows, &wf_rows, delta);
        let df = l1_delta(&next_f, &f);
        let dw = l1_delta(&next_w, &w);
        f = next_f;
        w = next_w;
        if df < RANK_TOL && dw < RANK_TOL {
            break;
        }
    }

    Ok(CorankOutcome {
        fragment_rank: RankVector { kind: RankKind::Fragment, scores: f },
        word_rank: RankVector { kind: RankKind::WordCorank, scores: w },
        fell_back: false,
    })
}

#[allow(clippy::too_many_arguments)]
fn corank_step(
    f: &[f64],
    w: &[f64],
    f_rows: &[Vec<f64>],
    w_rows: &[Vec<f64>],
    fw_rows: &[Vec<f64>],
    wf_rows: &[Vec<f64>],
    delta: f64,
) -> (Vec<f64>, Vec<f64>) {
    // Inter-class chains: w -> f -> w -> f and f -> w -> f -> w.
    let w_to_f = apply_transpose(wf_rows, w);
    let back_to_w = apply_transpose(fw_rows, &w_to_f);
    let coupled_f = apply_transpose(wf_rows, &back_to_w);

    let f_to_w = apply_transpose(fw_rows, f);
    let back_to_f = apply_transpose(wf_rows, &f_to_w);
    let coupled_w = apply_transpose(fw_rows, &back_to_f);

    let intra_f = apply_transpose(f_rows, f);
    let intra_w = apply_transpose(w_rows, w);

    let next_f: Vec<f64> = intra_f
        .iter()
        .zip(&coupled_f)
        .map(|(a, b)| (1.0 - delta) * a + delta * b)
        .collect();
    let next_w: Vec<f64> = intra_w
        .iter()
        .zip(&coupled_w)
        .map(|(a, b)| (1.0 - delta) * a + delta * b)
        .collect();
    (
        RankVector::normalized(RankKind::Fragment, next_f).scores,
        RankVector::normalized(RankKind::WordCorank, next_w).scores,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labeler::WordGraph;

    fn graph(words: &[&str], rho: &[f64], edges: &[(usize, usize, f64)]) -> WordGraph {
        let mut g = WordGraph::new(words.iter().map(|w| w.to_string()).collect());
        g.rho = rho.to_vec();
        for &(i, j, w) in edges {
            g.set_edge(i, j, w);
        }
        g
    }

    #[test]
    fn lambda_one_matches_closed_form() {
        let g = graph(
            &["a", "b", "c"],
            &[3.0, 1.0, 0.0],
            &[(0, 1, 2.0), (1, 2, 1.0)],
        );
        let d = 0.85;
        let pi = biased_rank(&g, 1.0, d).unwrap();
        let rho_norm = [0.75, 0.25, 0.0];
        for (i, &score) in pi.scores.iter().enumerate() {
            let expect = (1.0 - d) / 3.0 + d * rho_norm[i];
            assert!((score - expect).abs() < 1e-10, "word {i}: {score} vs {expect}");
        }
    }

    #[test]
    fn symmetric_two_word_graph_is_uniform() {
        let g = graph(&["a", "b"], &[1.0, 1.0], &[(0, 1, 1.0)]);
        let pi = biased_rank(&g, 0.5, 0.85).unwrap();
        assert!((pi.scores[0] - 0.5).abs() < 1e-10);
        assert!((pi.scores[1] - 0.5).abs() < 1e-10);
    }

    #[test]
    fn stationarity_residual_small() {
        let g = graph(
            &["a", "b", "c", "d"],
            &[1.0, 2.0, 0.5, 0.0],
            &[(0, 1, 2.0), (1, 2, 1.0), (2, 3, 3.0), (0, 3, 0.5)],
        );
        let pi = biased_rank(&g, 0.85, 0.85).unwrap();
        assert!(biased_rank_residual(&g, &pi.scores, 0.85, 0.85) < 1e-8);
        let sum: f64 = pi.scores.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert!(pi.scores.iter().all(|&s| s >= 0.0));
    }

    /// Solve pi = [dA + (1-d)/N J]^T pi directly by Gaussian elimination:
    /// (I - d A^T) pi = (1-d)/N 1.
    fn direct_solve(a: &[Vec<f64>], d: f64) -> Vec<f64> {
        let n = a.len();
        let mut m = vec![vec![0.0; n + 1]; n];
        for i in 0..n {
            for j in 0..n {
                m[i][j] = (if i == j { 1.0 } else { 0.0 }) - d * a[j][i];
            }
            m[i][n] = (1.0 - d) / n as f64;
        }
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&x, &y| m[x][col].abs().partial_cmp(&m[y][col].abs()).unwrap())
                .unwrap();
            m.swap(col, pivot);
            for row in 0..n {
                if row != col && m[row][col] != 0.0 {
                    let factor = m[row][col] / m[col][col];
                    for k in col..=n {
                        m[row][k] -= factor * m[col][k];
                    }
                }
            }
        }
        (0..n).map(|i| m[i][n] / m[i][i]).collect()
    }

    #[test]
    fn three_word_graph_matches_direct_linear_solve() {
        let g = graph(
            &["a", "b", "c"],
            &[2.0, 1.0, 1.0],
            &[(0, 1, 1.0), (1, 2, 2.0), (0, 2, 0.5)],
        );
        let (lambda, d) = (0.85, 0.85);
        let q = stochastic_row(&g.rho);
        let a: Vec<Vec<f64>> = (0..3)
            .map(|i| {
                let r = stochastic_row(g.edge_row(i));
                (0..3).map(|j| lambda * q[j] + (1.0 - lambda) * r[j]).collect()
            })
            .collect();
        let expect = direct_solve(&a, d);
        let pi = biased_rank(&g, lambda, d).unwrap();
        for (got, want) in pi.scores.iter().zip(&expect) {
            assert!((got - want).abs() < 1e-8, "{got} vs {want}");
        }
    }

    #[test]
    fn general_rank_star_graph_hub_wins() {
        let mut g = WordGraph::new(
            ["hub", "s1", "s2", "s3", "s4"].iter().map(|s| s.to_string()).collect(),
        );
        for i in 1..5 {
            g.set_edge(0, i, 1.0);
        }
        let pi = general_rank(&g, 0.85).unwrap();
        for i in 1..5 {
            assert!(pi.scores[0] > pi.scores[i], "hub must outrank spokes");
        }
        // Symmetric co-occurrence: equal spokes get equal scores.
        for i in 2..5 {
            assert!((pi.scores[1] - pi.scores[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn all_zero_rho_falls_back_to_uniform_bias() {
        let g = graph(&["a", "b"], &[0.0, 0.0], &[(0, 1, 1.0)]);
        let pi = biased_rank(&g, 1.0, 0.85).unwrap();
        assert!((pi.scores[0] - 0.5).abs() < 1e-10);
    }

    #[test]
    fn empty_graph_is_error() {
        let g = WordGraph::new(Vec::new());
        assert!(biased_rank(&g, 0.5, 0.85).is_err());
    }

    fn toy_corank_instance() -> (crate::corpus::Conversation, WordGraph) {
        use crate::corpus::{parse_conversation, LanguageResources};
        // Two comments -> two fragments with a reply edge; three words
        // whose stems equal their surfaces.
        let doc = r#"{"id":"c","comments":[
            {"id":"C1","author":"a","title":"t","body":"alpha beta gamma"},
            {"id":"C2","parent_id":"C1","author":"b","title":"t","body":"alpha beta"}]}"#;
        let conversation = parse_conversation(doc, &LanguageResources::default()).unwrap();
        let mut graph = WordGraph::new(vec!["alpha".into(), "beta".into(), "gamma".into()]);
        graph.rho = vec![1.0, 2.0, 0.5];
        graph.set_edge(0, 1, 2.0);
        graph.set_edge(1, 2, 1.0);
        (conversation, graph)
    }

    #[test]
    fn corank_delta_one_ignores_intra_walks() {
        // At delta = 1 the intra-class terms vanish, so the word-walk
        // flavor (general vs biased) cannot change the fixed point.
        let (conversation, graph) = toy_corank_instance();
        let fqg = crate::fqg::build_fqg(&conversation);
        let sentences: Vec<&crate::corpus::Sentence> = conversation.sentences.iter().collect();
        let general =
            corank(&fqg, &graph, &sentences, 1.0, CorankWordWalk::General, 0.85).unwrap();
        let biased =
            corank(&fqg, &graph, &sentences, 1.0, CorankWordWalk::Biased(0.85), 0.85).unwrap();
        for (a, b) in general.word_rank.scores.iter().zip(&biased.word_rank.scores) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
        for (a, b) in general.fragment_rank.scores.iter().zip(&biased.fragment_rank.scores) {
            assert!((a - b).abs() < 1e-9);
        }
        // And the intra-class walks do matter away from the limit.
        let mid_general =
            corank(&fqg, &graph, &sentences, 0.4, CorankWordWalk::General, 0.85).unwrap();
        let mid_biased =
            corank(&fqg, &graph, &sentences, 0.4, CorankWordWalk::Biased(0.85), 0.85).unwrap();
        let diff: f64 = mid_general
            .word_rank
            .scores
            .iter()
            .zip(&mid_biased.word_rank.scores)
            .map(|(a, b)| (a - b).abs())
            .sum();
        assert!(diff > 1e-6);
    }

    #[test]
    fn corank_fixed_point_matches_direct_iteration_multi_start() {
        // Hand-built transition matrices following the documented
        // construction, iterated from two different starts: both must land
        // on the implementation's fixed point.
        let (conversation, graph) = toy_corank_instance();
        let fqg = crate::fqg::build_fqg(&conversation);
        let sentences: Vec<&crate::corpus::Sentence> = conversation.sentences.iter().collect();
        let (delta, d) = (0.4, 0.85);
        let reference =
            corank(&fqg, &graph, &sentences, delta, CorankWordWalk::General, d).unwrap();

        // F: fragment 0 dangling, fragment 1 -> 0; counts: frag0 holds one
        // of each word, frag1 holds wordx and wordy.
        let mix = |rows: Vec<Vec<f64>>| -> Vec<Vec<f64>> {
            rows.into_iter()
                .map(|row| {
                    let n = row.len() as f64;
                    let sum: f64 = row.iter().sum();
                    row.iter()
                        .map(|v| {
                            let s = if sum > 0.0 { v / sum } else { 1.0 / n };
                            d * s + (1.0 - d) / n
                        })
                        .collect()
                })
                .collect()
        };
        let f_rows = mix(vec![vec![0.0, 0.0], vec![1.0, 0.0]]);
        let w_rows = mix(vec![
            vec![0.0, 2.0, 0.0],
            vec![2.0, 0.0, 1.0],
            vec![0.0, 1.0, 0.0],
        ]);
        let fw_rows = mix(vec![vec![1.0, 1.0, 1.0], vec![1.0, 1.0, 0.0]]);
        let wf_rows = mix(vec![vec![1.0, 1.0], vec![1.0, 1.0], vec![1.0, 0.0]]);
        let tr = |m: &[Vec<f64>], x: &[f64]| -> Vec<f64> {
            let cols = m[0].len();
            let mut out = vec![0.0; cols];
            for (i, row) in m.iter().enumerate() {
                for (j, &v) in row.iter().enumerate() {
                    out[j] += x[i] * v;
                }
            }
            out
        };
        let norm = |mut x: Vec<f64>| -> Vec<f64> {
            let s: f64 = x.iter().sum();
            x.iter_mut().for_each(|v| *v /= s);
            x
        };
        let iterate = |mut f: Vec<f64>, mut w: Vec<f64>| -> (Vec<f64>, Vec<f64>) {
            for _ in 0..200_000 {
                let coupled_f = tr(&wf_rows, &tr(&fw_rows, &tr(&wf_rows, &w)));
                let coupled_w = tr(&fw_rows, &tr(&wf_rows, &tr(&fw_rows, &f)));
                let nf: Vec<f64> = tr(&f_rows, &f)
                    .iter()
                    .zip(&coupled_f)
                    .map(|(a, b)| (1.0 - delta) * a + delta * b)
                    .collect();
                let nw: Vec<f64> = tr(&w_rows, &w)
                    .iter()
                    .zip(&coupled_w)
                    .map(|(a, b)| (1.0 - delta) * a + delta * b)
                    .collect();
                let nf = norm(nf);
                let nw = norm(nw);
                let moved: f64 = nf.iter().zip(&f).map(|(a, b)| (a - b).abs()).sum::<f64>()
                    + nw.iter().zip(&w).map(|(a, b)| (a - b).abs()).sum::<f64>();
                f = nf;
                w = nw;
                if moved < 1e-12 {
                    break;
                }
            }
            (f, w)
        };

        let uniform = iterate(vec![0.5, 0.5], vec![1.0 / 3.0; 3]);
        let skewed = iterate(vec![1.0, 0.0], vec![1.0, 0.0, 0.0]);
        for ((a, b), c) in uniform.0.iter().zip(&skewed.0).zip(&reference.fragment_rank.scores) {
            assert!((a - b).abs() < 1e-7, "starts disagree: {a} vs {b}");
            assert!((a - c).abs() < 1e-7, "oracle vs implementation: {a} vs {c}");
        }
        for ((a, b), c) in uniform.1.iter().zip(&skewed.1).zip(&reference.word_rank.scores) {
            assert!((a - b).abs() < 1e-7, "starts disagree: {a} vs {b}");
            assert!((a - c).abs() < 1e-7, "oracle vs implementation: {a} vs {c}");
        }
    }

    #[test]
    fn teleport_rows_stay_stochastic() {
        let mut rows = vec![
            stochastic_row(&[1.0, 2.0, 0.0]),
            stochastic_row(&[0.0, 0.0, 0.0]), // dangling -> uniform
            stochastic_row(&[5.0, 0.0, 5.0]),
        ];
        teleport_mix(&mut rows, 0.85);
        for row in &rows {
            let sum: f64 = row.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12, "row sums to {sum}");
            assert!(row.iter().all(|&v| v > 0.0), "teleport leaves no zero entries");
        }
    }
}
