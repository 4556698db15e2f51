//! Porter stemming algorithm (the classic 1980 rule set).
//!
//! Works on lowercase ASCII; tokens containing anything else are returned
//! unchanged. Within each step the longest matching suffix is selected and
//! its condition tested; a failed condition ends the step without trying
//! shorter suffixes, per the original definition.

/// Stem a single lowercase token.
pub fn porter_stem(word: &str) -> String {
    if word.len() <= 2 || !word.bytes().all(|b| b.is_ascii_lowercase()) {
        return word.to_string();
    }
    let mut b = word.as_bytes().to_vec();
    step1a(&mut b);
    step1b(&mut b);
    step1c(&mut b);
    step2(&mut b);
    step3(&mut b);
    step4(&mut b);
    step5a(&mut b);
    step5b(&mut b);
    String::from_utf8(b).expect("ascii")
}

fn is_cons(w: &[u8], i: usize) -> bool {
    match w[i] {
        b'a' | b'e' | b'i' | b'o' | b'u' => false,
        b'y' => i == 0 || !is_cons(w, i - 1),
        _ => true,
    }
}

/// Porter's measure m of the word prefix `w[..len]`: the number of VC
/// sequences in the [C](VC)^m[V] decomposition.
fn measure(w: &[u8], len: usize) -> usize {
    let mut i = 0;
    while i < len && is_cons(w, i) {
        i += 1;
    }
    let mut m = 0;
    loop {
        while i < len && !is_cons(w, i) {
            i += 1;
        }
        if i >= len {
            return m;
        }
        m += 1;
        while i < len && is_cons(w, i) {
            i += 1;
        }
        if i >= len {
            return m;
        }
    }
}

fn has_vowel(w: &[u8], len: usize) -> bool {
    (0..len).any(|i| !is_cons(w, i))
}

fn ends_double_cons(w: &[u8]) -> bool {
    let n = w.len();
    n >= 2 && w[n - 1] == w[n - 2] && is_cons(w, n - 1)
}

/// *o: stem ends cvc where the final consonant is not w, x or y.
fn ends_cvc(w: &[u8], len: usize) -> bool {
    if len < 3 {
        return false;
    }
    let last = w[len - 1];
    is_cons(w, len - 3)
        && !is_cons(w, len - 2)
        && is_cons(w, len - 1)
        && last != b'w'
        && last != b'x'
        && last != b'y'
}

fn ends_with(w: &[u8], suffix: &[u8]) -> bool {
    w.len() >= suffix.len() && &w[w.len() - suffix.len()..] == suffix
}

fn step1a(b: &mut Vec<u8>) {
    if ends_with(b, b"sses") || ends_with(b, b"ies") {
        b.truncate(b.len() - 2);
    } else if ends_with(b, b"s") && !ends_with(b, b"ss") {
        b.pop();
    }
}

fn step1b(b: &mut Vec<u8>) {
    if ends_with(b, b"eed") {
        let stem = b.len() - 3;
        if measure(b, stem) > 0 {
            b.pop();
        }
        return;
    }
    let trimmed = if ends_with(b, b"ed") && has_vowel(b, b.len() - 2) {
        b.truncate(b.len() - 2);
        true
    } else if ends_with(b, b"ing") && has_vowel(b, b.len() - 3) {
        b.truncate(b.len() - 3);
        true
    } else {
        false
    };
    if !trimmed {
        return;
    }
    if ends_with(b, b"at") || ends_with(b, b"bl") || ends_with(b, b"iz") {
        b.push(b'e');
    } else if ends_double_cons(b) {
        let last = b[b.len() - 1];
        if last != b'l' && last != b's' && last != b'z' {
            b.pop();
        }
    } else if measure(b, b.len()) == 1 && ends_cvc(b, b.len()) {
        b.push(b'e');
    }
}

fn step1c(b: &mut [u8]) {
    let n = b.len();
    if n >= 2 && b[n - 1] == b'y' && has_vowel(b, n - 1) {
        b[n - 1] = b'i';
    }
}

/// Apply the first (longest) matching suffix rule whose stem passes the
/// measure condition `min_m`; checking stops at the first textual match.
fn apply_rules(b: &mut Vec<u8>, rules: &[(&[u8], &[u8])], min_m: usize) {
    for (suffix, replacement) in rules {
        if ends_with(b, suffix) {
            let stem = b.len() - suffix.len();
            if measure(b, stem) > min_m {
                b.truncate(stem);
                b.extend_from_slice(replacement);
            }
            return;
        }
    }
}

fn step2(b: &mut Vec<u8>) {
    const RULES: &[(&[u8], &[u8])] = &[
        (b"ational", b"ate"),
        (b"ization", b"ize"),
        (b"iveness", b"ive"),
        (b"fulness", b"ful"),
        (b"ousness", b"ous"),
        (b"tional", b"tion"),
        (b"biliti", b"ble"),
        (b"entli", b"ent"),
        (b"ousli", b"ous"),
        (b"ation", b"ate"),
        (b"alism", b"al"),
        (b"aliti", b"al"),
        (b"iviti", b"ive"),
        (b"enci", b"ence"),
        (b"anci", b"ance"),
        (b"izer", b"ize"),
        (b"abli", b"able"),
        (b"alli", b"al"),
        (b"ator", b"ate"),
        (b"eli", b"e"),
    ];
    apply_rules(b, RULES, 0);
}

fn step3(b: &mut Vec<u8>) {
    const RULES: &[(&[u8], &[u8])] = &[
        (b"icate", b"ic"),
        (b"ative", b""),
        (b"alize", b"al"),
        (b"iciti", b"ic"),
        (b"ical", b"ic"),
        (b"ful", b""),
        (b"ness", b""),
    ];
    apply_rules(b, RULES, 0);
}

fn step4(b: &mut Vec<u8>) {
    const SUFFIXES: &[&[u8]] = &[
        b"ement", b"ance", b"ence", b"able", b"ible", b"ment", b"ant", b"ent", b"ion", b"ism",
        b"ate", b"iti", b"ous", b"ive", b"ize", b"ou", b"er", b"ic", b"al",
    ];
    for suffix in SUFFIXES {
        if ends_with(b, suffix) {
            let stem = b.len() - suffix.len();
            if measure(b, stem) > 1 {
                if *suffix == b"ion" {
                    if stem == 0 {
                        return;
                    }
                    let last = b[stem - 1];
                    if last != b's' && last != b't' {
                        return;
                    }
                }
                b.truncate(stem);
            }
            return;
        }
    }
}

fn step5a(b: &mut Vec<u8>) {
    if !ends_with(b, b"e") {
        return;
    }
    let stem = b.len() - 1;
    let m = measure(b, stem);
    if m > 1 || (m == 1 && !ends_cvc(b, stem)) {
        b.pop();
    }
}

fn step5b(b: &mut Vec<u8>) {
    if ends_with(b, b"ll") && measure(b, b.len()) > 1 {
        b.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::porter_stem;

    #[test]
    fn canonical_vocabulary_samples() {
        // Hand-checked against the published rule set.
        let cases = [
            ("caresses", "caress"),
            ("ponies", "poni"),
            ("ties", "ti"),
            ("caress", "caress"),
            ("cats", "cat"),
            ("feed", "feed"),
            ("agreed", "agre"),
            ("plastered", "plaster"),
            ("bled", "bled"),
            ("motoring", "motor"),
            ("sing", "sing"),
            ("conflated", "conflat"),
            ("troubled", "troubl"),
            ("sized", "size"),
            ("hopping", "hop"),
            ("tanned", "tan"),
            ("falling", "fall"),
            ("hissing", "hiss"),
            ("fizzed", "fizz"),
            ("failing", "fail"),
            ("filing", "file"),
            ("happy", "happi"),
            ("sky", "sky"),
            ("relational", "relat"),
            ("conditional", "condit"),
            ("rational", "ration"),
            ("valenci", "valenc"),
            ("digitizer", "digit"),
            ("operator", "oper"),
            ("feudalism", "feudal"),
            ("decisiveness", "decis"),
            ("hopefulness", "hope"),
            ("formaliti", "formal"),
            ("formative", "form"),
            ("formalize", "formal"),
            ("electriciti", "electr"),
            ("electrical", "electr"),
            ("hopeful", "hope"),
            ("goodness", "good"),
            ("revival", "reviv"),
            ("allowance", "allow"),
            ("inference", "infer"),
            ("airliner", "airlin"),
            ("adjustable", "adjust"),
            ("defensible", "defens"),
            ("replacement", "replac"),
            ("adjustment", "adjust"),
            ("dependent", "depend"),
            ("adoption", "adopt"),
            ("communism", "commun"),
            ("activate", "activ"),
            ("effective", "effect"),
            ("probate", "probat"),
            ("rate", "rate"),
            ("cease", "ceas"),
            ("controll", "control"),
            ("roll", "roll"),
            ("agreement", "agreement"),
            ("releases", "releas"),
            ("meeting", "meet"),
            ("meetings", "meet"),
        ];
        for (input, expected) in cases {
            assert_eq!(porter_stem(input), expected, "stem({input})");
        }
    }

    #[test]
    fn non_alpha_tokens_pass_through() {
        assert_eq!(porter_stem("2009"), "2009");
        assert_eq!(porter_stem("x86"), "x86");
        assert_eq!(porter_stem("at"), "at");
    }
}
