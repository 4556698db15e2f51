//! Conversation parsing and normalization: threaded comments, quotation
//! depths, sentence splitting, tokenization, stemming and coarse POS tags.

pub mod lang;
pub mod split;
pub mod stem;
pub mod tag;

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::segmentation::Segmentation;

pub use lang::LanguageResources;
pub use split::split_sentences;
pub use stem::porter_stem;

/// Coarse part-of-speech tag; only the noun/adjective distinction matters
/// for the syntactic filters downstream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PosTag {
    Noun,
    Adj,
    Verb,
    Adv,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub stem: String,
    pub pos: PosTag,
    pub is_stopword: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    /// Global position in temporal order, consecutive from 0.
    pub id: usize,
    pub comment_id: String,
    pub text: String,
    pub tokens: Vec<Token>,
    /// Quotation depth of the lines this sentence came from (0 = new text).
    pub quote_depth: u32,
}

impl Sentence {
    /// Non-stopword stems, in order.
    pub fn content_stems(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().filter(|t| !t.is_stopword).map(|t| t.stem.as_str())
    }

    pub fn has_question_mark(&self) -> bool {
        self.text.contains('?')
    }
}

/// One body line with its quotation depth (count of leading `>` markers).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Line {
    pub text: String,
    pub quote_depth: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comment {
    pub id: String,
    pub parent_id: Option<String>,
    pub author: String,
    pub title: String,
    pub timestamp: Option<i64>,
    pub lines: Vec<Line>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conversation {
    pub id: String,
    /// Comments in temporal order.
    pub comments: Vec<Comment>,
    /// All sentences in temporal order across comments.
    pub sentences: Vec<Sentence>,
}

impl Conversation {
    pub fn n_sentences(&self) -> usize {
        self.sentences.len()
    }

    pub fn comment(&self, id: &str) -> Option<&Comment> {
        self.comments.iter().find(|c| c.id == id)
    }

    pub fn comment_index(&self, id: &str) -> Option<usize> {
        self.comments.iter().position(|c| c.id == id)
    }

    pub fn author_of_sentence(&self, sentence_id: usize) -> &str {
        let cid = &self.sentences[sentence_id].comment_id;
        &self.comment(cid).expect("sentence comment exists").author
    }

    /// Sentence ids per comment, in temporal order.
    pub fn sentences_by_comment(&self) -> Vec<Vec<usize>> {
        let mut by_comment = vec![Vec::new(); self.comments.len()];
        let index: HashMap<&str, usize> =
            self.comments.iter().enumerate().map(|(i, c)| (c.id.as_str(), i)).collect();
        for s in &self.sentences {
            by_comment[index[s.comment_id.as_str()]].push(s.id);
        }
        by_comment
    }
}

// ---------------------------------------------------------------------------
// Input document format
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
struct RawConversation {
    id: String,
    comments: Vec<RawComment>,
    /// Optional external-tagger output: lowercase word -> coarse tag name.
    #[serde(default)]
    pos_overrides: HashMap<String, String>,
}

#[derive(Debug, Deserialize)]
struct RawComment {
    id: String,
    #[serde(default)]
    parent_id: Option<String>,
    author: String,
    #[serde(default)]
    title: String,
    #[serde(default)]
    timestamp: Option<i64>,
    body: String,
}

/// Parse a conversation-record JSON document into the normalized model.
pub fn parse_conversation(document: &str, lang: &LanguageResources) -> Result<Conversation> {
    let raw: RawConversation = serde_json::from_str(document)?;

    let mut lexicon = lang.pos_lexicon.clone();
    for (word, tag) in &raw.pos_overrides {
        let tag = match tag.as_str() {
            "NOUN" => PosTag::Noun,
            "ADJ" => PosTag::Adj,
            "VERB" => PosTag::Verb,
            "ADV" => PosTag::Adv,
            "OTHER" => PosTag::Other,
            other => {
                return Err(Error::Parse {
                    comment: None,
                    msg: format!("unknown pos override tag {other:?} for {word:?}"),
                })
            }
        };
        lexicon.insert(word.to_lowercase(), tag);
    }

    let mut seen = HashSet::new();
    for c in &raw.comments {
        if !seen.insert(c.id.clone()) {
            return Err(Error::Parse {
                comment: Some(c.id.clone()),
                msg: "duplicate comment id".into(),
            });
        }
    }
    for c in &raw.comments {
        if let Some(p) = &c.parent_id {
            if !seen.contains(p) {
                return Err(Error::DanglingParent { comment: c.id.clone(), parent: p.clone() });
            }
        }
    }

    // Temporal order: by timestamp when every comment has one (stable sort
    // keeps document order on ties), document order otherwise.
    let mut order: Vec<usize> = (0..raw.comments.len()).collect();
    if raw.comments.iter().all(|c| c.timestamp.is_some()) {
        order.sort_by_key(|&i| raw.comments[i].timestamp.unwrap());
    }

    let mut comments = Vec::with_capacity(raw.comments.len());
    let mut sentences: Vec<Sentence> = Vec::new();
    let mut placed: HashSet<&str> = HashSet::new();
    for &i in &order {
        let rc = &raw.comments[i];
        if let Some(p) = &rc.parent_id {
            if !placed.contains(p.as_str()) {
                return Err(Error::Parse {
                    comment: Some(rc.id.clone()),
                    msg: format!("parent {p} is not an earlier comment in temporal order"),
                });
            }
        }
        placed.insert(rc.id.as_str());

        let lines = split_quote_lines(&rc.body);
        for run in depth_runs(&lines) {
            let body: String = run
                .iter()
                .map(|l| l.text.as_str())
                .collect::<Vec<_>>()
                .join(" ");
            for text in split_sentences(&body, &lang.abbreviations) {
                let tokens = tokenize_with_lexicon(&text, &lang.stopwords, &lexicon);
                sentences.push(Sentence {
                    id: sentences.len(),
                    comment_id: rc.id.clone(),
                    text,
                    tokens,
                    quote_depth: run[0].quote_depth,
                });
            }
        }
        comments.push(Comment {
            id: rc.id.clone(),
            parent_id: rc.parent_id.clone(),
            author: rc.author.clone(),
            title: rc.title.clone(),
            timestamp: rc.timestamp,
            lines,
        });
    }

    Ok(Conversation { id: raw.id, comments, sentences })
}

/// Strip leading `>` markers from each body line, recording the depth.
fn split_quote_lines(body: &str) -> Vec<Line> {
    body.lines()
        .map(|line| {
            let mut rest = line.trim_start();
            let mut depth = 0;
            while let Some(stripped) = rest.strip_prefix('>') {
                depth += 1;
                rest = stripped.trim_start();
            }
            Line { text: rest.to_string(), quote_depth: depth }
        })
        .collect()
}

/// Maximal runs of consecutive non-empty lines sharing a quote depth.
/// Empty lines are dropped and do not break a run.
fn depth_runs(lines: &[Line]) -> Vec<Vec<&Line>> {
    let mut runs: Vec<Vec<&Line>> = Vec::new();
    for line in lines {
        if line.text.trim().is_empty() {
            continue;
        }
        match runs.last_mut() {
            Some(run) if run[0].quote_depth == line.quote_depth => run.push(line),
            _ => runs.push(vec![line]),
        }
    }
    runs
}

/// Tokenize one sentence: maximal alphanumeric runs, Porter-stemmed,
/// coarse-tagged and stopword-flagged.
pub fn tokenize(sentence_text: &str, lang: &LanguageResources) -> Vec<Token> {
    tokenize_with_lexicon(sentence_text, &lang.stopwords, &lang.pos_lexicon)
}

fn tokenize_with_lexicon(
    sentence_text: &str,
    stopwords: &HashSet<String>,
    lexicon: &HashMap<String, PosTag>,
) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for c in sentence_text.chars().chain(std::iter::once(' ')) {
        if c.is_alphanumeric() {
            current.push(c);
        } else if !current.is_empty() {
            let surface = std::mem::take(&mut current);
            let lower = surface.to_lowercase();
            let pos = tag::tag_token(&surface, tokens.len(), lexicon);
            tokens.push(Token {
                stem: porter_stem(&lower),
                is_stopword: stopwords.contains(&lower),
                surface,
                pos,
            });
        }
    }
    tokens
}

// ---------------------------------------------------------------------------
// Gold annotations
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldAnnotation {
    pub conversation_id: String,
    pub annotators: Vec<Annotator>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotator {
    pub id: String,
    /// Topic id -> short human-authored label.
    pub labels: BTreeMap<String, String>,
    /// One topic id per sentence, in sentence-id order.
    pub assignment: Vec<usize>,
}

impl Annotator {
    pub fn segmentation(&self) -> Segmentation {
        Segmentation::from_labeled_assignment(self.assignment.clone())
    }

    pub fn label_of(&self, topic: usize) -> Option<&str> {
        self.labels.get(&topic.to_string()).map(|s| s.as_str())
    }

    /// Number of distinct topics used by this annotator.
    pub fn topic_count(&self) -> usize {
        self.segmentation().k_effective()
    }

    /// Sentences whose gold topic is labeled INTRO or END; these are
    /// excluded from metric computation.
    pub fn intro_end_sentences(&self) -> Vec<bool> {
        let excluded: HashSet<usize> = self
            .labels
            .iter()
            .filter(|(_, label)| {
                let l = label.trim().to_uppercase();
                l == "INTRO" || l == "END"
            })
            .filter_map(|(k, _)| k.parse().ok())
            .collect();
        self.assignment.iter().map(|t| excluded.contains(t)).collect()
    }
}

pub fn parse_gold(document: &str) -> Result<GoldAnnotation> {
    let gold: GoldAnnotation = serde_json::from_str(document)?;
    Ok(gold)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lang() -> LanguageResources {
        LanguageResources::default()
    }

    #[test]
    fn single_comment_degenerate_thread() {
        let doc = r#"{"id":"c","comments":[
            {"id":"C1","parent_id":null,"author":"a","title":"t","timestamp":null,
             "body":"Just one sentence here"}]}"#;
        let conv = parse_conversation(doc, &lang()).unwrap();
        assert_eq!(conv.comments.len(), 1);
        assert_eq!(conv.sentences.len(), 1);
        assert!(conv.sentences.iter().all(|s| s.quote_depth == 0));
    }

    #[test]
    fn quote_depth_counts_markers() {
        let doc = r#"{"id":"c","comments":[
            {"id":"C1","author":"a","title":"t","body":"original text line"},
            {"id":"C2","parent_id":"C1","author":"b","title":"t",
             "body":"> original text line\n>> deeper quote\nmy reply text"}]}"#;
        let conv = parse_conversation(doc, &lang()).unwrap();
        let c2 = conv.comment("C2").unwrap();
        assert_eq!(c2.lines[0].quote_depth, 1);
        assert_eq!(c2.lines[1].quote_depth, 2);
        assert_eq!(c2.lines[2].quote_depth, 0);
        let depths: Vec<u32> = conv
            .sentences
            .iter()
            .filter(|s| s.comment_id == "C2")
            .map(|s| s.quote_depth)
            .collect();
        assert_eq!(depths, vec![1, 2, 0]);
    }

    #[test]
    fn dangling_parent_is_structural_error() {
        let doc = r#"{"id":"c","comments":[
            {"id":"C1","parent_id":"C9","author":"a","title":"t","body":"hi"}]}"#;
        match parse_conversation(doc, &lang()) {
            Err(Error::DanglingParent { comment, parent }) => {
                assert_eq!(comment, "C1");
                assert_eq!(parent, "C9");
            }
            other => panic!("expected DanglingParent, got {other:?}"),
        }
    }

    #[test]
    fn comments_ordered_by_timestamp() {
        let doc = r#"{"id":"c","comments":[
            {"id":"C2","parent_id":"C1","author":"b","title":"t","timestamp":20,"body":"later"},
            {"id":"C1","author":"a","title":"t","timestamp":10,"body":"earlier"}]}"#;
        let conv = parse_conversation(doc, &lang()).unwrap();
        assert_eq!(conv.comments[0].id, "C1");
        assert_eq!(conv.sentences[0].text, "earlier");
    }

    #[test]
    fn tokenizer_examples() {
        let l = lang();
        let toks = tokenize("Releases", &l);
        assert_eq!(toks[0].stem, "releas");
        let toks = tokenize("the", &l);
        assert!(toks[0].is_stopword);
        let toks = tokenize("Daggerfall", &l);
        assert_eq!(toks[0].pos, PosTag::Noun);
    }

    #[test]
    fn token_surfaces_recover_alphanumeric_runs() {
        let toks = tokenize("Bethesda's 15th anniversary -- wow!", &lang());
        let surfaces: Vec<&str> = toks.iter().map(|t| t.surface.as_str()).collect();
        assert_eq!(surfaces, vec!["Bethesda", "s", "15th", "anniversary", "wow"]);
    }

    #[test]
    fn tokenizer_is_deterministic() {
        let l = lang();
        let a = tokenize("Some repeated Text with MixedCase", &l);
        let b = tokenize("Some repeated Text with MixedCase", &l);
        assert_eq!(a, b);
    }

    #[test]
    fn pos_overrides_beat_bundled_lexicon() {
        let doc = r#"{"id":"c","comments":[
            {"id":"C1","author":"a","title":"t","body":"The patch ships"}],
            "pos_overrides":{"ships":"VERB","patch":"NOUN"}}"#;
        let conv = parse_conversation(doc, &lang()).unwrap();
        let tokens = &conv.sentences[0].tokens;
        let tag_of = |surface: &str| {
            tokens.iter().find(|t| t.surface == surface).map(|t| t.pos).unwrap()
        };
        assert_eq!(tag_of("ships"), PosTag::Verb);
        assert_eq!(tag_of("patch"), PosTag::Noun);

        let bad = r#"{"id":"c","comments":[
            {"id":"C1","author":"a","title":"t","body":"hi"}],
            "pos_overrides":{"hi":"GREETING"}}"#;
        assert!(parse_conversation(bad, &lang()).is_err());
    }

    #[test]
    fn conversation_serde_round_trip() {
        let doc = r#"{"id":"c","comments":[
            {"id":"C1","author":"a","title":"t","body":"One sentence. Two sentences?"},
            {"id":"C2","parent_id":"C1","author":"b","title":"t","body":"> One sentence.\nReply."}]}"#;
        let conv = parse_conversation(doc, &lang()).unwrap();
        let json = serde_json::to_string(&conv).unwrap();
        let back: Conversation = serde_json::from_str(&json).unwrap();
        assert_eq!(conv, back);
    }

    #[test]
    fn sentence_ids_are_consecutive() {
        let doc = r#"{"id":"c","comments":[
            {"id":"C1","author":"a","title":"t","body":"First. Second. Third!"},
            {"id":"C2","parent_id":"C1","author":"b","title":"t","body":"Fourth?"}]}"#;
        let conv = parse_conversation(doc, &lang()).unwrap();
        for (i, s) in conv.sentences.iter().enumerate() {
            assert_eq!(s.id, i);
        }
    }

    #[test]
    fn gold_round_trip_and_intro_end() {
        let doc = r#"{"conversation_id":"c","annotators":[
            {"id":"a1","labels":{"0":"INTRO","1":"Main topic"},"assignment":[0,1,1]}]}"#;
        let gold = parse_gold(doc).unwrap();
        let ann = &gold.annotators[0];
        assert_eq!(ann.topic_count(), 2);
        assert_eq!(ann.intro_end_sentences(), vec![true, false, false]);
        assert_eq!(ann.label_of(1), Some("Main topic"));
    }
}
