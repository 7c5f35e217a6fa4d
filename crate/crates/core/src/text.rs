//! Tokenization shared by every text-consuming stage.
//!
//! A token is a maximal run of alphanumeric characters, lowercased with
//! Unicode case mapping. Everything else is a separator.

/// Splits `text` into lowercase alphanumeric tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            current.extend(ch.to_lowercase());
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Number of tokens in `text`; used by the paragraph length filter.
pub fn word_count(text: &str) -> usize {
    tokenize(text).len()
}

/// Appends `b` to `a` with a single separating space, skipping empty parts.
pub(crate) fn join_text(a: &str, b: &str) -> String {
    match (a.trim().is_empty(), b.trim().is_empty()) {
        (true, _) => b.trim().to_string(),
        (_, true) => a.trim().to_string(),
        _ => format!("{} {}", a.trim(), b.trim()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_on_punctuation_and_lowercases() {
        assert_eq!(
            tokenize("Leukocyte L1-Antigen, complex!"),
            vec!["leukocyte", "l1", "antigen", "complex"]
        );
    }

    #[test]
    fn whitespace_runs_do_not_create_tokens() {
        assert_eq!(tokenize("  a \t\n  b  "), tokenize("a b"));
        assert!(tokenize("   ").is_empty());
        assert!(tokenize("").is_empty());
    }

    #[test]
    fn unicode_lowercasing() {
        assert_eq!(tokenize("Äpfel ÉCOLE"), vec!["äpfel", "école"]);
    }

    #[test]
    fn join_skips_empty() {
        assert_eq!(join_text("Title", ""), "Title");
        assert_eq!(join_text("", " abs "), "abs");
        assert_eq!(join_text("T", "A"), "T A");
    }
}
