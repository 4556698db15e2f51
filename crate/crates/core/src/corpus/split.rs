//! Rule-based sentence splitting with an abbreviation list.

use std::collections::HashSet;

/// Split `body` into sentences. A sentence ends at a run of `.`/`!`/`?`
/// followed by whitespace or end of input, unless the word holding a `.`
/// is a known abbreviation or a single initial ("J. Smith").
pub fn split_sentences(body: &str, abbreviations: &HashSet<String>) -> Vec<String> {
    let chars: Vec<char> = body.chars().collect();
    let mut sentences = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c == '.' || c == '!' || c == '?' {
            let mut end = i;
            while end + 1 < chars.len() && matches!(chars[end + 1], '.' | '!' | '?') {
                end += 1;
            }
            let followed_by_break = end + 1 >= chars.len() || chars[end + 1].is_whitespace();
            let suppressed = c == '.' && end == i && is_abbreviation(&chars, i, abbreviations);
            if followed_by_break && !suppressed {
                push_trimmed(&mut sentences, chars[start..=end].iter().collect());
                start = end + 1;
            }
            i = end + 1;
        } else {
            i += 1;
        }
    }
    if start < chars.len() {
        push_trimmed(&mut sentences, chars[start..].iter().collect());
    }
    sentences
}

fn push_trimmed(out: &mut Vec<String>, s: String) {
    let t = s.trim();
    if !t.is_empty() {
        out.push(t.to_string());
    }
}

/// The word immediately before the period at `dot`: an abbreviation-list
/// entry (periods inside it allowed, e.g. "e.g") or a lone initial.
fn is_abbreviation(chars: &[char], dot: usize, abbreviations: &HashSet<String>) -> bool {
    let mut begin = dot;
    while begin > 0 && !chars[begin - 1].is_whitespace() {
        begin -= 1;
    }
    let word: String = chars[begin..dot].iter().collect();
    let word = word.trim_matches(|c: char| !c.is_alphanumeric() && c != '.');
    if word.is_empty() {
        return false;
    }
    let lower = word.to_lowercase();
    if abbreviations.contains(lower.trim_end_matches('.')) || abbreviations.contains(&lower) {
        return true;
    }
    // Single-letter initials: "J. Smith".
    word.len() == 1 && word.chars().all(|c| c.is_alphabetic())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::lang::LanguageResources;

    fn abbr() -> HashSet<String> {
        LanguageResources::default().abbreviations
    }

    #[test]
    fn splits_on_terminals() {
        assert_eq!(split_sentences("Hi all. See below?", &abbr()), vec!["Hi all.", "See below?"]);
    }

    #[test]
    fn empty_input_gives_nothing() {
        assert!(split_sentences("", &abbr()).is_empty());
        assert!(split_sentences("   \n ", &abbr()).is_empty());
    }

    #[test]
    fn abbreviation_suppresses_split() {
        assert_eq!(split_sentences("e.g. the doc", &abbr()), vec!["e.g. the doc"]);
        assert_eq!(split_sentences("Ask Dr. Smith today.", &abbr()), vec!["Ask Dr. Smith today."]);
    }

    #[test]
    fn initials_do_not_split() {
        assert_eq!(split_sentences("I met J. Smith. He waved.", &abbr()).len(), 2);
    }

    #[test]
    fn terminal_runs_collapse() {
        assert_eq!(split_sentences("What?! Really...", &abbr()), vec!["What?!", "Really..."]);
    }

    #[test]
    fn no_split_inside_token() {
        assert_eq!(split_sentences("version 1.2 shipped", &abbr()), vec!["version 1.2 shipped"]);
    }

    #[test]
    fn trailing_text_without_terminal_kept() {
        assert_eq!(split_sentences("Done. more to come", &abbr()), vec!["Done.", "more to come"]);
    }
}
