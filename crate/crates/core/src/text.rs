//! Tokenizers shared by the corpus filters, the content-word checks and BLEU.

use std::ops::Range;

/// Byte spans of maximal alphanumeric runs. Everything else (whitespace,
/// punctuation, symbols) is a token boundary.
pub fn word_spans(text: &str) -> Vec<Range<usize>> {
    let mut spans = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        match (c.is_alphanumeric(), start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                spans.push(s..i);
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        spans.push(s..text.len());
    }
    spans
}

pub fn word_tokens(text: &str) -> Vec<&str> {
    word_spans(text).into_iter().map(|r| &text[r]).collect()
}

/// Byte ranges in `text` where the token sequence of `word` occurs as a
/// contiguous, case-sensitive run of whole tokens. Each range runs from the
/// start of the first matched token to the end of the last one.
pub fn find_occurrences(text: &str, word: &str) -> Vec<Range<usize>> {
    let needle = word_tokens(word);
    if needle.is_empty() {
        return Vec::new();
    }
    let spans = word_spans(text);
    if spans.len() < needle.len() {
        return Vec::new();
    }
    (0..=spans.len() - needle.len())
        .filter(|&i| {
            needle
                .iter()
                .zip(&spans[i..i + needle.len()])
                .all(|(n, s)| &text[s.clone()] == *n)
        })
        .map(|i| spans[i].start..spans[i + needle.len() - 1].end)
        .collect()
}

pub fn count_occurrences(text: &str, word: &str) -> usize {
    find_occurrences(text, word).len()
}

/// Lowercased alphabetic tokens of length 2..=15, mirroring gensim's
/// `simple_preprocess`: a token is a maximal run of letters or underscores,
/// and tokens starting with an underscore are dropped.
pub fn simple_preprocess(text: &str) -> Vec<String> {
    let lower = text.to_lowercase();
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut flush = |current: &mut String| {
        let len = current.chars().count();
        if (2..=15).contains(&len) && !current.starts_with('_') {
            tokens.push(std::mem::take(current));
        } else {
            current.clear();
        }
    };
    for c in lower.chars() {
        if c.is_alphabetic() || c == '_' {
            current.push(c);
        } else {
            flush(&mut current);
        }
    }
    flush(&mut current);
    tokens
}

/// BLEU tokenization: lowercase, every punctuation or symbol character is a
/// token of its own, alphanumeric runs are split on whitespace.
pub fn bleu_tokens(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for c in text.to_lowercase().chars() {
        if c.is_alphanumeric() {
            current.push(c);
            continue;
        }
        if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
        if !c.is_whitespace() {
            tokens.push(c.to_string());
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}
