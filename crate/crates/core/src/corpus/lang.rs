//! Bundled language resources: stopwords, abbreviations, a coarse POS
//! lexicon and discourse cue words. All four can be overridden from plain
//! text files (one entry per line, UTF-8; lexicon lines are `word<TAB>TAG`).

use std::collections::{HashMap, HashSet};
use std::path::Path;

use crate::corpus::PosTag;
use crate::error::{Error, Result};

const STOPWORDS: &str = include_str!("../../data/stopwords.txt");
const ABBREVIATIONS: &str = include_str!("../../data/abbreviations.txt");
const POS_LEXICON: &str = include_str!("../../data/pos_lexicon.tsv");
const CUE_WORDS: &str = include_str!("../../data/cue_words.txt");

#[derive(Debug, Clone)]
pub struct LanguageResources {
    pub stopwords: HashSet<String>,
    pub abbreviations: HashSet<String>,
    pub pos_lexicon: HashMap<String, PosTag>,
    pub cue_words: HashSet<String>,
}

impl Default for LanguageResources {
    fn default() -> Self {
        LanguageResources {
            stopwords: word_lines(STOPWORDS),
            abbreviations: word_lines(ABBREVIATIONS),
            pos_lexicon: parse_lexicon(POS_LEXICON).expect("bundled lexicon is valid"),
            cue_words: word_lines(CUE_WORDS),
        }
    }
}

impl LanguageResources {
    pub fn with_stopwords_file(mut self, path: &Path) -> Result<Self> {
        self.stopwords = word_lines(&read(path)?);
        Ok(self)
    }

    pub fn with_abbreviations_file(mut self, path: &Path) -> Result<Self> {
        self.abbreviations = word_lines(&read(path)?);
        Ok(self)
    }

    pub fn with_cue_words_file(mut self, path: &Path) -> Result<Self> {
        self.cue_words = word_lines(&read(path)?);
        Ok(self)
    }

    pub fn with_pos_lexicon_file(mut self, path: &Path) -> Result<Self> {
        self.pos_lexicon = parse_lexicon(&read(path)?)?;
        Ok(self)
    }

    pub fn is_stopword(&self, lower: &str) -> bool {
        self.stopwords.contains(lower)
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))
}

fn word_lines(text: &str) -> HashSet<String> {
    text.lines()
        .map(|l| l.trim().to_lowercase())
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect()
}

fn parse_lexicon(text: &str) -> Result<HashMap<String, PosTag>> {
    let mut map = HashMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (word, tag) = match (parts.next(), parts.next()) {
            (Some(w), Some(t)) => (w, t),
            _ => {
                return Err(Error::Config(format!(
                    "lexicon line {}: expected `word<TAB>TAG`, got {line:?}",
                    lineno + 1
                )))
            }
        };
        let tag = match tag {
            "NOUN" => PosTag::Noun,
            "ADJ" => PosTag::Adj,
            "VERB" => PosTag::Verb,
            "ADV" => PosTag::Adv,
            "OTHER" => PosTag::Other,
            other => {
                return Err(Error::Config(format!(
                    "lexicon line {}: unknown tag {other:?}",
                    lineno + 1
                )))
            }
        };
        map.insert(word.to_lowercase(), tag);
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_lists_load() {
        let lang = LanguageResources::default();
        assert!(lang.stopwords.len() >= 250);
        assert!(lang.is_stopword("the"));
        assert!(lang.abbreviations.contains("e.g"));
        assert_eq!(lang.pos_lexicon.get("releases"), Some(&PosTag::Verb));
        assert!(lang.cue_words.contains("anyway"));
    }
}
