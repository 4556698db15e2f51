//! The universal segmentation output: one topic id per sentence.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maps every sentence (by id) to a topic id in `0..k`.
///
/// Topic ids are dense over the sentences actually assigned: id `t` is used
/// only if some sentence carries it. Models asked for `k` topics may
/// legitimately produce fewer; `k_effective()` reports how many distinct
/// topics actually occur.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segmentation {
    pub topic_of: Vec<usize>,
    pub k: usize,
}

impl Segmentation {
    /// Build from a raw per-sentence assignment, renumbering topics densely
    /// in order of first appearance (sentence 0's topic becomes 0, the next
    /// previously unseen topic becomes 1, ...). The renumbering makes model
    /// outputs canonical and byte-stable across runs.
    pub fn from_assignment(assignment: &[usize]) -> Self {
        let mut remap: Vec<(usize, usize)> = Vec::new();
        let mut topic_of = Vec::with_capacity(assignment.len());
        for &raw in assignment {
            let id = match remap.iter().find(|(r, _)| *r == raw) {
                Some((_, id)) => *id,
                None => {
                    let id = remap.len();
                    remap.push((raw, id));
                    id
                }
            };
            topic_of.push(id);
        }
        Segmentation { topic_of, k: remap.len() }
    }

    /// Like `from_assignment` but keeps the caller's topic ids verbatim.
    /// Used for gold annotations where ids are meaningful label keys.
    pub fn from_labeled_assignment(assignment: Vec<usize>) -> Self {
        let k = assignment.iter().copied().max().map_or(0, |m| m + 1);
        Segmentation { topic_of: assignment, k }
    }

    pub fn len(&self) -> usize {
        self.topic_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.topic_of.is_empty()
    }

    /// Number of distinct topics that actually occur.
    pub fn k_effective(&self) -> usize {
        let mut seen = vec![false; self.k];
        for &t in &self.topic_of {
            if t < self.k {
                seen[t] = true;
            }
        }
        seen.iter().filter(|&&s| s).count()
    }

    /// Sentence ids belonging to topic `t`.
    pub fn sentences_of(&self, t: usize) -> Vec<usize> {
        (0..self.topic_of.len()).filter(|&s| self.topic_of[s] == t).collect()
    }

    /// True when both segmentations put `x` and `y` in the same topic.
    pub fn same_topic(&self, x: usize, y: usize) -> bool {
        self.topic_of[x] == self.topic_of[y]
    }

    pub fn check_universe(&self, other: &Segmentation) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::UniverseMismatch { a: self.len(), b: other.len() });
        }
        Ok(())
    }

    /// Restrict to the sentences selected by `keep` (in order), renumbering
    /// sentence positions but keeping topic ids.
    pub fn restrict(&self, keep: &[bool]) -> Segmentation {
        assert_eq!(keep.len(), self.topic_of.len());
        let topic_of: Vec<usize> = self
            .topic_of
            .iter()
            .zip(keep)
            .filter(|(_, &k)| k)
            .map(|(&t, _)| t)
            .collect();
        Segmentation { topic_of, k: self.k }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renumbers_by_first_appearance() {
        let seg = Segmentation::from_assignment(&[7, 7, 2, 7, 9]);
        assert_eq!(seg.topic_of, vec![0, 0, 1, 0, 2]);
        assert_eq!(seg.k, 3);
        assert_eq!(seg.k_effective(), 3);
    }

    #[test]
    fn k_effective_counts_used_topics_only() {
        let seg = Segmentation { topic_of: vec![0, 0, 2], k: 3 };
        assert_eq!(seg.k_effective(), 2);
    }
}
