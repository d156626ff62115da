//! Tokenization and sentence splitting shared by attribute coding and the
//! built-in language models.

/// Lowercases and splits on any non-alphanumeric character, dropping empties.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Splits on '.', '!' or '?' followed by whitespace or end of text. A text
/// with no such boundary is a single sentence. Whitespace-only segments are
/// dropped.
pub fn split_sentences(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if matches!(c, '.' | '!' | '?') {
            let at_boundary = match chars.peek() {
                Some(&(_, next)) => next.is_whitespace(),
                None => true,
            };
            if at_boundary {
                let end = i + c.len_utf8();
                let sentence = text[start..end].trim();
                if !sentence.is_empty() {
                    out.push(sentence);
                }
                start = end;
            }
        }
    }
    let tail = text[start..].trim();
    if !tail.is_empty() {
        out.push(tail);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenize_lowercases_and_strips_punctuation() {
        assert_eq!(tokenize("I am HAPPY!!!"), vec!["i", "am", "happy"]);
        assert_eq!(tokenize("it's a test-case"), vec!["it", "s", "a", "test", "case"]);
        assert_eq!(tokenize("   "), Vec::<String>::new());
        assert_eq!(tokenize("x1 2y"), vec!["x1", "2y"]);
    }

    #[test]
    fn tokenize_is_punctuation_invariant() {
        assert_eq!(tokenize("happy"), tokenize("HAPPY!!!"));
        assert_eq!(tokenize("so happy"), tokenize("So, happy..."));
    }

    #[test]
    fn sentences_split_on_terminators() {
        assert_eq!(
            split_sentences("Hi! How are you? Good."),
            vec!["Hi!", "How are you?", "Good."]
        );
    }

    #[test]
    fn sentence_fallback_when_no_terminator() {
        assert_eq!(split_sentences("no terminator here"), vec!["no terminator here"]);
    }

    #[test]
    fn terminator_inside_word_does_not_split() {
        assert_eq!(split_sentences("see example.com for details"), vec![
            "see example.com for details"
        ]);
    }

    #[test]
    fn trailing_fragment_is_its_own_sentence() {
        assert_eq!(split_sentences("Done. and then"), vec!["Done.", "and then"]);
    }

    #[test]
    fn empty_and_whitespace_texts() {
        assert!(split_sentences("").is_empty());
        assert!(split_sentences("   ").is_empty());
        assert_eq!(split_sentences("..."), vec!["..."]);
    }

    #[test]
    fn multibyte_text_is_handled() {
        assert_eq!(split_sentences("Ça va? Oui!"), vec!["Ça va?", "Oui!"]);
        assert_eq!(tokenize("Ça va"), vec!["ça", "va"]);
    }
}
