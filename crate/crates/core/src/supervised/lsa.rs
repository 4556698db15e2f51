//! Latent semantic analysis over the word-by-comment TF.IDF matrix:
//! truncated SVD via a cyclic Jacobi eigendecomposition of W^T W, word
//! vectors U_k Sigma_k = W V_k, and sentence vectors as tf-weighted sums of
//! word vectors.

use std::collections::HashMap;

use crate::corpus::Conversation;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct LsaSpace {
    pub rank: usize,
    pub vocab: Vec<String>,
    /// V x k word vectors (rows of U_k Sigma_k).
    pub word_vectors: Vec<Vec<f64>>,
    /// One k-vector per sentence.
    pub sentence_vectors: Vec<Vec<f64>>,
    pub singular_values: Vec<f64>,
    /// D x k right singular vectors (V_k), kept for verification.
    pub doc_vectors: Vec<Vec<f64>>,
}

/// Default LSA rank: a quarter of the comment count, at least 1.
pub fn default_rank(n_comments: usize) -> usize {
    (n_comments / 4).max(1)
}

/// Conversation-level inverse document frequencies over comments:
/// ln(D / df) per stem.
pub fn conversation_idf(conversation: &Conversation) -> HashMap<String, f64> {
    let by_comment = conversation.sentences_by_comment();
    let d = by_comment.len() as f64;
    let mut df: HashMap<String, usize> = HashMap::new();
    for sentence_ids in &by_comment {
        let mut seen: Vec<&str> = Vec::new();
        for &sid in sentence_ids {
            for stem in conversation.sentences[sid].content_stems() {
                if !seen.contains(&stem) {
                    seen.push(stem);
                }
            }
        }
        for stem in seen {
            *df.entry(stem.to_string()).or_default() += 1;
        }
    }
    df.into_iter().map(|(stem, count)| (stem, (d / count as f64).ln())).collect()
}

/// Build the LSA space at the given rank (clamped to min(V, D)).
pub fn compute_lsa(conversation: &Conversation, rank: usize) -> Result<LsaSpace> {
    let by_comment = conversation.sentences_by_comment();
    let d = by_comment.len();
    if d == 0 || conversation.sentences.is_empty() {
        return Err(Error::EmptyGraph("conversation has no comments"));
    }

    // Vocabulary in first occurrence order.
    let mut vocab: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for sentence in &conversation.sentences {
        for stem in sentence.content_stems() {
            if !index.contains_key(stem) {
                index.insert(stem.to_string(), vocab.len());
                vocab.push(stem.to_string());
            }
        }
    }
    let v = vocab.len();
    if v == 0 {
        return Err(Error::EmptyVocabulary);
    }

    let idf = conversation_idf(conversation);
    // W: V x D, W[i][j] = tf(word i, comment j) x idf(word i).
    let mut w = vec![vec![0.0f64; d]; v];
    for (j, sentence_ids) in by_comment.iter().enumerate() {
        for &sid in sentence_ids {
            for stem in conversation.sentences[sid].content_stems() {
                w[index[stem]][j] += 1.0;
            }
        }
    }
    for (i, word) in vocab.iter().enumerate() {
        let f = idf[word];
        for j in 0..d {
            w[i][j] *= f;
        }
    }

    let rank = rank.clamp(1, v.min(d));
    let (eigenvalues, eigenvectors) = jacobi_eigen(&gram(&w, v, d));

    // Sort eigenpairs by eigenvalue, descending.
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eigenvalues[b].partial_cmp(&eigenvalues[a]).unwrap());
    let singular_values: Vec<f64> =
        order.iter().take(rank).map(|&i| eigenvalues[i].max(0.0).sqrt()).collect();

    // Word vectors: rows of W V_k (= U_k Sigma_k).
    let mut word_vectors = vec![vec![0.0f64; rank]; v];
    let mut doc_vectors = vec![vec![0.0f64; rank]; d];
    for (col, &ei) in order.iter().take(rank).enumerate() {
        for i in 0..v {
            let mut acc = 0.0;
            for j in 0..d {
                acc += w[i][j] * eigenvectors[j][ei];
            }
            word_vectors[i][col] = acc;
        }
        for j in 0..d {
            doc_vectors[j][col] = eigenvectors[j][ei];
        }
    }

    // Sentence vectors: tf-weighted sums of word vectors.
    let mut sentence_vectors = Vec::with_capacity(conversation.sentences.len());
    for sentence in &conversation.sentences {
        let mut vec_s = vec![0.0f64; rank];
        for stem in sentence.content_stems() {
            let wi = index[stem];
            for (c, slot) in vec_s.iter_mut().enumerate() {
                *slot += word_vectors[wi][c];
            }
        }
        sentence_vectors.push(vec_s);
    }

    Ok(LsaSpace { rank, vocab, word_vectors, sentence_vectors, singular_values, doc_vectors })
}

/// W^T W (D x D Gram matrix).
fn gram(w: &[Vec<f64>], v: usize, d: usize) -> Vec<Vec<f64>> {
    let mut g = vec![vec![0.0f64; d]; d];
    for i in 0..v {
        for a in 0..d {
            let wia = w[i][a];
            if wia == 0.0 {
                continue;
            }
            for b in a..d {
                g[a][b] += wia * w[i][b];
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            g[a][b] = g[b][a];
        }
    }
    g
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns
/// (eigenvalues, eigenvectors as columns).
fn jacobi_eigen(matrix: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = matrix.len();
    let mut a: Vec<Vec<f64>> = matrix.to_vec();
    let mut v = vec![vec![0.0f64; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[p][q] * a[p][q];
            }
        }
        if off < 1e-24 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let eigenvalues: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    (eigenvalues, v)
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}
