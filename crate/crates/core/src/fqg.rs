//! Fragment Quotation Graph: nodes are distinct new/quoted text fragments,
//! directed edges approximate fine-grained reply relations (a new fragment
//! replies to the depth-1 quotations next to it). Paths through the graph
//! read as subconversations.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::corpus::Conversation;
use crate::error::{Error, Result};

/// Jaccard threshold above which two candidate fragments are the same text.
const SAME_THRESHOLD: f64 = 0.8;
/// Containment threshold above which the longer candidate is split.
const CONTAINMENT_THRESHOLD: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FragmentKind {
    New,
    Quoted,
}

/// Where a fragment's text first appeared.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FragmentSource {
    pub comment_id: String,
    pub kind: FragmentKind,
    pub depth: u32,
}

/// A distinct text span. `sentence_ids` covers every occurrence of the
/// span's text in the conversation (the original plus quoted copies), so
/// every conversation sentence lives in exactly one fragment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fragment {
    pub id: usize,
    pub sentence_ids: Vec<usize>,
    pub source: FragmentSource,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FragmentQuotationGraph {
    pub nodes: Vec<Fragment>,
    /// Directed edges (from, to): from a temporally later fragment to the
    /// earlier fragment it (likely) replies to.
    pub edges: BTreeSet<(usize, usize)>,
}

impl FragmentQuotationGraph {
    pub fn fragment(&self, id: usize) -> Option<&Fragment> {
        self.nodes.iter().find(|f| f.id == id)
    }

    /// Fragment id containing the given sentence, if any.
    pub fn fragment_of_sentence(&self, sentence_id: usize) -> Option<usize> {
        self.nodes.iter().find(|f| f.sentence_ids.contains(&sentence_id)).map(|f| f.id)
    }

    pub fn out_neighbors(&self, id: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().filter(move |(f, _)| *f == id).map(|(_, t)| *t)
    }

    pub fn in_neighbors(&self, id: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().filter(move |(_, t)| *t == id).map(|(f, _)| *f)
    }

    /// Graphviz DOT rendering for inspection; node label is the fragment id
    /// plus the first 40 characters of its text.
    pub fn to_dot(&self, conversation: &Conversation) -> String {
        let mut out = String::from("digraph fqg {\n");
        for frag in &self.nodes {
            let text: String = frag
                .sentence_ids
                .first()
                .map(|&s| conversation.sentences[s].text.clone())
                .unwrap_or_default();
            let snippet: String = text.chars().take(40).collect();
            let snippet = snippet.replace('"', "'");
            out.push_str(&format!("  f{} [label=\"{}: {}\"];\n", frag.id, frag.id, snippet));
        }
        for (from, to) in &self.edges {
            out.push_str(&format!("  f{from} -> f{to};\n"));
        }
        out.push_str("}\n");
        out
    }
}

// ---------------------------------------------------------------------------
// Construction
// ---------------------------------------------------------------------------

/// A candidate fragment: one maximal same-depth sentence run in a comment.
struct Candidate {
    comment_index: usize,
    sentence_ids: Vec<usize>,
    depth: u32,
}

/// A distinct fragment under construction.
struct Node {
    /// All occurrences, each an ordered sentence run.
    occurrences: Vec<Occurrence>,
    stems: HashSet<String>,
}

struct Occurrence {
    comment_index: usize,
    sentence_ids: Vec<usize>,
    depth: u32,
}

/// Build the conversation-level FQG.
///
/// Node step: contiguous same-depth line runs are candidate fragments;
/// candidates are matched across comments by stemmed-token overlap and
/// merged or split into distinct fragments. Edge step: each new fragment
/// links to the depth-1 quoted fragments immediately above and below it in
/// its comment; comments without quotations fall back to the reply-to
/// relation, linking their fragments to the parent comment's new fragments.
pub fn build_fqg(conversation: &Conversation) -> FragmentQuotationGraph {
    let by_comment = conversation.sentences_by_comment();
    let mut candidates = Vec::new();
    for (ci, sentence_ids) in by_comment.iter().enumerate() {
        for run in depth_runs(conversation, sentence_ids) {
            candidates.push(Candidate {
                comment_index: ci,
                depth: conversation.sentences[run[0]].quote_depth,
                sentence_ids: run,
            });
        }
    }

    let mut nodes: Vec<Node> = Vec::new();
    let mut pending: std::collections::VecDeque<Candidate> = candidates.into();
    while let Some(cand) = pending.pop_front() {
        absorb_candidate(conversation, &mut nodes, cand, &mut pending);
    }

    // Freeze fragments, ordered by the first sentence of their first
    // occurrence so ids follow temporal order.
    nodes.sort_by_key(|n| n.occurrences[0].sentence_ids[0]);
    let fragments: Vec<Fragment> = nodes
        .iter()
        .enumerate()
        .map(|(id, n)| {
            let mut sentence_ids: Vec<usize> =
                n.occurrences.iter().flat_map(|o| o.sentence_ids.iter().copied()).collect();
            sentence_ids.sort_unstable();
            let first = &n.occurrences[0];
            Fragment {
                id,
                sentence_ids,
                source: FragmentSource {
                    comment_id: conversation.comments[first.comment_index].id.clone(),
                    kind: if first.depth == 0 { FragmentKind::New } else { FragmentKind::Quoted },
                    depth: first.depth,
                },
            }
        })
        .collect();

    let edges = build_edges(conversation, &nodes, &fragments);
    FragmentQuotationGraph { nodes: fragments, edges }
}

/// Maximal runs of consecutive sentences with equal quote depth.
fn depth_runs(conversation: &Conversation, sentence_ids: &[usize]) -> Vec<Vec<usize>> {
    let mut runs: Vec<Vec<usize>> = Vec::new();
    for &sid in sentence_ids {
        let depth = conversation.sentences[sid].quote_depth;
        match runs.last_mut() {
            Some(run) if conversation.sentences[*run.last().unwrap()].quote_depth == depth => {
                run.push(sid)
            }
            _ => runs.push(vec![sid]),
        }
    }
    runs
}

/// Stems used for overlap comparison: non-stopword stems, falling back to
/// all stems for spans with no content words.
fn span_stems(conversation: &Conversation, sentence_ids: &[usize]) -> HashSet<String> {
    let content: HashSet<String> = sentence_ids
        .iter()
        .flat_map(|&s| conversation.sentences[s].content_stems())
        .map(|s| s.to_string())
        .collect();
    if !content.is_empty() {
        return content;
    }
    sentence_ids
        .iter()
        .flat_map(|&s| conversation.sentences[s].tokens.iter())
        .map(|t| t.stem.clone())
        .collect()
}

fn jaccard(a: &HashSet<String>, b: &HashSet<String>) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

fn containment_of_smaller(a: &HashSet<String>, b: &HashSet<String>) -> f64 {
    let inter = a.intersection(b).count();
    let smaller = a.len().min(b.len());
    if smaller == 0 {
        0.0
    } else {
        inter as f64 / smaller as f64
    }
}

/// Match a candidate against the distinct fragments found so far. Same text
/// (Jaccard >= 0.8) merges; near-containment (>= 0.8 of the shorter) splits
/// the longer side at the overlap boundary, queueing the pieces for
/// re-absorption; otherwise the candidate becomes a new distinct fragment.
///
/// A split must divide at least one sentence run at an internal boundary.
/// That keeps the total number of splits bounded by the sentence count
/// (every split strictly shrinks some run), so the work queue always
/// drains: coincidentally similar texts cannot bounce occurrences between
/// nodes forever.
fn absorb_candidate(
    conversation: &Conversation,
    nodes: &mut Vec<Node>,
    cand: Candidate,
    pending: &mut std::collections::VecDeque<Candidate>,
) {
    let cand_stems = span_stems(conversation, &cand.sentence_ids);
    for ni in 0..nodes.len() {
        if nodes[ni].occurrences[0].comment_index == cand.comment_index {
            continue; // candidates are compared across comments only
        }
        if jaccard(&cand_stems, &nodes[ni].stems) >= SAME_THRESHOLD {
            nodes[ni].occurrences.push(Occurrence {
                comment_index: cand.comment_index,
                sentence_ids: cand.sentence_ids,
                depth: cand.depth,
            });
            return;
        }
        if containment_of_smaller(&cand_stems, &nodes[ni].stems) < CONTAINMENT_THRESHOLD {
            continue;
        }
        let overlap: HashSet<String> =
            cand_stems.intersection(&nodes[ni].stems).cloned().collect();
        if cand_stems.len() > nodes[ni].stems.len() {
            // The candidate covers the existing fragment plus extra text:
            // split the candidate at the overlap boundary and re-absorb the
            // pieces (front of the queue, preserving their order).
            let pieces = split_run(conversation, &cand.sentence_ids, &overlap);
            if pieces.len() > 1 {
                for piece in pieces.into_iter().rev() {
                    pending.push_front(Candidate {
                        comment_index: cand.comment_index,
                        sentence_ids: piece,
                        depth: cand.depth,
                    });
                }
                return;
            }
        } else {
            // The existing fragment is the longer side: split each of its
            // occurrences, keep the overlap pieces here and re-queue the
            // remainder pieces as fresh candidates.
            let occurrences = std::mem::take(&mut nodes[ni].occurrences);
            let mut matched: Vec<Occurrence> = Vec::new();
            let mut leftovers: Vec<Occurrence> = Vec::new();
            let mut divided_a_run = false;
            for occ in &occurrences {
                let pieces = split_run(conversation, &occ.sentence_ids, &overlap);
                divided_a_run |= pieces.len() > 1;
                for piece in pieces {
                    let piece_stems = span_stems(conversation, &piece);
                    let target = if containment_of_smaller(&piece_stems, &overlap)
                        >= CONTAINMENT_THRESHOLD
                    {
                        &mut matched
                    } else {
                        &mut leftovers
                    };
                    target.push(Occurrence {
                        comment_index: occ.comment_index,
                        sentence_ids: piece,
                        depth: occ.depth,
                    });
                }
            }
            if matched.is_empty() || leftovers.is_empty() || !divided_a_run {
                // No run has an internal overlap boundary to cut at (the
                // containment signal comes from whole occurrences
                // disagreeing, not from mixed text): restore and move on.
                nodes[ni].occurrences = occurrences;
                continue;
            }
            matched.push(Occurrence {
                comment_index: cand.comment_index,
                sentence_ids: cand.sentence_ids,
                depth: cand.depth,
            });
            nodes[ni].stems = span_stems(conversation, &matched[0].sentence_ids);
            nodes[ni].occurrences = matched;
            for occ in leftovers.into_iter().rev() {
                pending.push_front(Candidate {
                    comment_index: occ.comment_index,
                    sentence_ids: occ.sentence_ids,
                    depth: occ.depth,
                });
            }
            return;
        }
    }
    nodes.push(Node {
        stems: cand_stems,
        occurrences: vec![Occurrence {
            comment_index: cand.comment_index,
            sentence_ids: cand.sentence_ids,
            depth: cand.depth,
        }],
    });
}

/// Split a sentence run into maximal sub-runs of sentences inside/outside
/// the overlap vocabulary. A sentence is "inside" when at least 80% of its
/// comparison stems fall in the overlap.
fn split_run(
    conversation: &Conversation,
    sentence_ids: &[usize],
    overlap: &HashSet<String>,
) -> Vec<Vec<usize>> {
    let mut pieces: Vec<(bool, Vec<usize>)> = Vec::new();
    for &sid in sentence_ids {
        let stems = span_stems(conversation, &[sid]);
        let inside = containment_of_smaller(&stems, overlap) >= CONTAINMENT_THRESHOLD
            && stems.len() <= overlap.len();
        match pieces.last_mut() {
            Some((last_inside, run)) if *last_inside == inside => run.push(sid),
            _ => pieces.push((inside, vec![sid])),
        }
    }
    pieces.into_iter().map(|(_, run)| run).collect()
}

/// Edge creation over the finalized fragments.
fn build_edges(
    conversation: &Conversation,
    nodes: &[Node],
    fragments: &[Fragment],
) -> BTreeSet<(usize, usize)> {
    // Layout of each comment: its occurrences in sentence order, tagged with
    // the final fragment id.
    let mut layout: Vec<Vec<(usize, u32, usize)>> = vec![Vec::new(); conversation.comments.len()];
    for (fid, node) in nodes.iter().enumerate() {
        for occ in &node.occurrences {
            layout[occ.comment_index].push((occ.sentence_ids[0], occ.depth, fid));
        }
    }
    for comment in layout.iter_mut() {
        comment.sort_unstable();
    }

    // Fragment ids follow first-occurrence order, so an edge is kept only
    // when it points from a later fragment to an earlier one. Merged
    // duplicate text can otherwise put an "old" fragment next to a newer
    // quotation and propose a forward edge, which would break acyclicity.
    let mut edges = BTreeSet::new();
    let mut propose = |from: usize, to: usize| {
        if from > to {
            edges.insert((from, to));
        }
    };
    for (ci, comment) in layout.iter().enumerate() {
        let has_quotation = comment.iter().any(|&(_, depth, _)| depth > 0);
        if has_quotation {
            for (pos, &(_, depth, fid)) in comment.iter().enumerate() {
                if depth != 0 {
                    continue;
                }
                for neighbor in [pos.checked_sub(1), pos.checked_add(1)] {
                    if let Some(&(_, ndepth, nfid)) = neighbor.and_then(|p| comment.get(p)) {
                        if ndepth == 1 && nfid != fid {
                            propose(fid, nfid);
                        }
                    }
                }
            }
        } else if let Some(parent_id) = &conversation.comments[ci].parent_id {
            if let Some(pi) = conversation.comment_index(parent_id) {
                let parent_new: Vec<usize> = layout[pi]
                    .iter()
                    .filter(|&&(_, depth, _)| depth == 0)
                    .map(|&(_, _, fid)| fid)
                    .collect();
                for &(_, _, fid) in comment {
                    for &pfid in &parent_new {
                        if pfid != fid {
                            propose(fid, pfid);
                        }
                    }
                }
            }
        }
    }

    debug_assert!(edges.iter().all(|&(f, t)| f < fragments.len() && t < fragments.len()));
    edges
}

// ---------------------------------------------------------------------------
// Paths and projection
// ---------------------------------------------------------------------------

/// All maximal root-to-leaf paths, roots being fragments nothing replies
/// from (no outgoing reply edge: the first comment's fragments and any
/// otherwise-unlinked fragment). Paths follow reversed reply edges, so they
/// run from the earliest fragment toward the latest. Isolated nodes emit
/// singleton paths.
pub fn extract_paths(fqg: &FragmentQuotationGraph) -> Result<Vec<Vec<usize>>> {
    let n = fqg.nodes.len();
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n]; // reversed edges
    let mut out_degree = vec![0usize; n];
    let index_of = |id: usize| fqg.nodes.iter().position(|f| f.id == id).expect("edge endpoint");
    for &(from, to) in &fqg.edges {
        children[index_of(to)].push(index_of(from));
        out_degree[index_of(from)] += 1;
    }
    for c in children.iter_mut() {
        c.sort_unstable();
    }

    let mut paths = Vec::new();
    for root in 0..n {
        if out_degree[root] > 0 {
            continue;
        }
        let mut stack = vec![(root, vec![root])];
        while let Some((node, path)) = stack.pop() {
            if children[node].is_empty() {
                paths.push(path.iter().map(|&i| fqg.nodes[i].id).collect());
                continue;
            }
            for &child in children[node].iter().rev() {
                if path.contains(&child) {
                    return Err(Error::FqgCycle(fqg.nodes[child].id));
                }
                let mut next = path.clone();
                next.push(child);
                stack.push((child, next));
            }
        }
    }
    // A cyclic component with no root would be silently skipped by the root
    // scan; temporal edge direction makes cycles impossible, but check.
    let mut covered = vec![false; n];
    for path in &paths {
        for &id in path {
            covered[index_of(id)] = true;
        }
    }
    if let Some(missing) = covered.iter().position(|&c| !c) {
        return Err(Error::FqgCycle(fqg.nodes[missing].id));
    }
    Ok(paths)
}

/// Restrict the FQG to the fragments intersecting a topic segment: each
/// fragment keeps only the segment's sentences, empty fragments are pruned,
/// and an edge survives only when both endpoints do. Fragment ids are kept.
pub fn project_fqg(
    fqg: &FragmentQuotationGraph,
    segment_sentence_ids: &BTreeSet<usize>,
) -> FragmentQuotationGraph {
    let nodes: Vec<Fragment> = fqg
        .nodes
        .iter()
        .filter_map(|f| {
            let kept: Vec<usize> = f
                .sentence_ids
                .iter()
                .copied()
                .filter(|s| segment_sentence_ids.contains(s))
                .collect();
            if kept.is_empty() {
                None
            } else {
                Some(Fragment { id: f.id, sentence_ids: kept, source: f.source.clone() })
            }
        })
        .collect();
    let alive: HashSet<usize> = nodes.iter().map(|f| f.id).collect();
    let edges = fqg
        .edges
        .iter()
        .filter(|(from, to)| alive.contains(from) && alive.contains(to))
        .copied()
        .collect();
    FragmentQuotationGraph { nodes, edges }
}
