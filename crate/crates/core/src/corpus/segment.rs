//! Rule-based sentence splitter.
//!
//! A boundary is a run of `.`, `?` or `!` (optionally followed by closing
//! quotes or brackets), then whitespace, then an uppercase letter or digit,
//! possibly behind an opening quote. A period directly after a known
//! abbreviation is not a boundary.

const ABBREVIATIONS: &[&str] = &[
    "mr", "mrs", "ms", "dr", "prof", "sr", "jr", "st", "mt", "ft", "gen", "gov", "sen", "rep",
    "rev", "col", "lt", "sgt", "capt", "cmdr", "adm", "inc", "ltd", "co", "corp", "bros", "vs",
    "etc", "no", "jan", "feb", "mar", "apr", "jun", "jul", "aug", "sep", "sept", "oct", "nov",
    "dec", "e.g", "i.e", "u.s", "u.k", "u.n", "a.m", "p.m", "approx", "dept", "est", "fig", "vol",
];

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'' | ')' | ']' | '\u{201d}' | '\u{2019}')
}

fn is_opener(c: char) -> bool {
    matches!(c, '"' | '\'' | '(' | '[' | '\u{201c}' | '\u{2018}')
}

fn ends_with_abbreviation(before: &str) -> bool {
    let word = before
        .rsplit(|c: char| c.is_whitespace() || is_opener(c))
        .next()
        .unwrap_or("");
    let word = word.to_lowercase();
    ABBREVIATIONS.contains(&word.as_str())
}

/// Split `text` into trimmed, non-empty sentences.
pub fn split_sentences(text: &str) -> Vec<String> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut start = 0usize;
    let mut i = 0usize;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if !matches!(c, '.' | '?' | '!') {
            i += 1;
            continue;
        }
        let mut j = i;
        while j + 1 < chars.len() && matches!(chars[j + 1].1, '.' | '?' | '!') {
            j += 1;
        }
        while j + 1 < chars.len() && is_closer(chars[j + 1].1) {
            j += 1;
        }
        let mut k = j + 1;
        let mut saw_space = false;
        while k < chars.len() && chars[k].1.is_whitespace() {
            saw_space = true;
            k += 1;
        }
        while k < chars.len() && is_opener(chars[k].1) {
            k += 1;
        }
        let next_starts =
            k < chars.len() && (chars[k].1.is_uppercase() || chars[k].1.is_ascii_digit());
        let abbrev = c == '.' && i == j && ends_with_abbreviation(&text[start..pos]);
        if saw_space && next_starts && !abbrev {
            let end = chars.get(j + 1).map_or(text.len(), |&(p, _)| p);
            push_trimmed(&mut out, &text[start..end]);
            start = end;
        }
        i = j + 1;
    }
    push_trimmed(&mut out, &text[start..]);
    out
}

fn push_trimmed(out: &mut Vec<String>, s: &str) {
    let s = s.trim();
    if !s.is_empty() {
        out.push(s.to_string());
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_simple() {
        assert_eq!(split_sentences("X. Y."), ["X.", "Y."]);
        assert_eq!(
            split_sentences("It rained. Was it cold? Yes! Very."),
            ["It rained.", "Was it cold?", "Yes!", "Very."]
        );
    }

    #[test]
    fn abbreviation_guard() {
        assert_eq!(
            split_sentences("Dr. Smith met Mr. Jones in the U.S. today. They talked."),
            ["Dr. Smith met Mr. Jones in the U.S. today.", "They talked."]
        );
    }

    #[test]
    fn lowercase_continuation_and_decimals() {
        assert_eq!(
            split_sentences("Pi is 3.14 roughly. ok then."),
            ["Pi is 3.14 roughly. ok then."]
        );
    }

    #[test]
    fn quotes_and_ellipses() {
        assert_eq!(
            split_sentences("He said \"stop.\" Then he left... \"Why?\" she asked."),
            [
                "He said \"stop.\"",
                "Then he left...",
                "\"Why?\" she asked."
            ]
        );
    }

    #[test]
    fn empty_and_whitespace() {
        assert!(split_sentences("").is_empty());
        assert!(split_sentences("   \n ").is_empty());
        assert_eq!(split_sentences("no terminator"), ["no terminator"]);
    }
}
