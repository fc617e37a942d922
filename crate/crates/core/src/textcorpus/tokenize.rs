fn is_punct(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(
            c,
            '\u{2018}' | '\u{2019}' | '\u{201C}' | '\u{201D}' | '\u{00AB}' | '\u{00BB}' | '\u{2026}' | '\u{2013}' | '\u{2014}'
        )
}

/// Lowercases `text`, splits it on whitespace and peels leading and trailing
/// punctuation off every chunk as single-character tokens.
///
/// Punctuation inside a word (`u.s`, `don't`) stays attached.
pub fn tokenize(text: &str) -> Vec<String> {
    let lowered = text.to_lowercase();
    let mut out = Vec::new();
    for chunk in lowered.split_whitespace() {
        let chars: Vec<char> = chunk.chars().collect();
        let mut start = 0;
        while start < chars.len() && is_punct(chars[start]) {
            start += 1;
        }
        let mut end = chars.len();
        while end > start && is_punct(chars[end - 1]) {
            end -= 1;
        }
        out.extend(chars[..start].iter().map(|c| c.to_string()));
        if start < end {
            out.push(chars[start..end].iter().collect());
        }
        out.extend(chars[end..].iter().map(|c| c.to_string()));
    }
    out
}

pub fn join_tokens<S: AsRef<str>>(tokens: &[S]) -> String {
    tokens
        .iter()
        .map(AsRef::as_ref)
        .collect::<Vec<_>>()
        .join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn whitespace_split_and_lowercase() {
        assert_eq!(tokenize("Yoga is good"), vec!["yoga", "is", "good"]);
    }

    #[test]
    fn empty_input() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("   \n\t").is_empty());
    }

    #[test]
    fn punctuation_is_peeled() {
        assert_eq!(tokenize("yoga, now!"), vec!["yoga", ",", "now", "!"]);
        assert_eq!(tokenize("\"Hi?!\""), vec!["\"", "hi", "?", "!", "\""]);
        assert_eq!(tokenize("..."), vec![".", ".", "."]);
        assert_eq!(tokenize("don't u.s."), vec!["don't", "u.s", "."]);
    }

    proptest! {
        #[test]
        fn tokenize_join_is_stable(text in "\\PC{0,60}") {
            let once = tokenize(&text);
            let twice = tokenize(&join_tokens(&once));
            prop_assert_eq!(once, twice);
        }
    }
}
