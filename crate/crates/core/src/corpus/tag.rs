//! Coarse POS tagging: lexicon lookup, then capitalization, then suffix
//! rules, defaulting to NOUN. Only the NOUN/ADJ distinction matters
//! downstream (syntactic filters), so this deliberately stays small; real
//! tagger output can be supplied inline in the input file instead.

use std::collections::HashMap;

use crate::corpus::PosTag;

/// Tag one token. `position` is the token's index within its sentence:
/// capitalization only signals a proper noun away from sentence start.
pub fn tag_token(surface: &str, position: usize, lexicon: &HashMap<String, PosTag>) -> PosTag {
    let lower = surface.to_lowercase();
    if let Some(tag) = lexicon.get(&lower) {
        return *tag;
    }
    if position > 0 && surface.chars().next().is_some_and(|c| c.is_uppercase()) {
        return PosTag::Noun;
    }
    suffix_tag(&lower).unwrap_or(PosTag::Noun)
}

fn suffix_tag(lower: &str) -> Option<PosTag> {
    if lower.len() < 4 {
        return None;
    }
    if lower.ends_with("ly") {
        return Some(PosTag::Adv);
    }
    if lower.ends_with("ing") || lower.ends_with("ed") {
        return Some(PosTag::Verb);
    }
    for adj in ["ous", "ful", "ive", "able", "ible", "ish", "less", "ical"] {
        if lower.ends_with(adj) {
            return Some(PosTag::Adj);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::lang::LanguageResources;

    #[test]
    fn lexicon_beats_everything() {
        let lex = LanguageResources::default().pos_lexicon;
        assert_eq!(tag_token("Releases", 1, &lex), PosTag::Verb);
        assert_eq!(tag_token("free", 0, &lex), PosTag::Adj);
    }

    #[test]
    fn capitalized_unknown_is_proper_noun() {
        let lex = LanguageResources::default().pos_lexicon;
        assert_eq!(tag_token("Daggerfall", 2, &lex), PosTag::Noun);
        // Sentence-initial capitalization is not evidence by itself.
        assert_eq!(tag_token("Daggerfall", 0, &lex), PosTag::Noun);
    }

    #[test]
    fn suffix_rules() {
        let lex = HashMap::new();
        assert_eq!(tag_token("quickly", 0, &lex), PosTag::Adv);
        assert_eq!(tag_token("downloading", 0, &lex), PosTag::Verb);
        assert_eq!(tag_token("famous", 0, &lex), PosTag::Adj);
        assert_eq!(tag_token("firewall", 0, &lex), PosTag::Noun);
    }
}
