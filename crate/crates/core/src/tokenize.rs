//! Word tokenization used for chunk boundaries and TF-IDF terms.
//!
//! Tokens are maximal runs of alphanumerics/underscore, or a single
//! punctuation character. Each token owns the whitespace that follows it
//! (the first token also owns any leading whitespace), so token segments
//! partition the text exactly and chunks can be reassembled byte-for-byte.

use std::ops::Range;

/// Pluggable tokenizer. Implementations return the byte span of every
/// token, in order and non-overlapping.
pub trait Tokenizer: Send + Sync {
    fn token_spans(&self, text: &str) -> Vec<Range<usize>>;

    fn name(&self) -> &str;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct WordTokenizer;

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

impl Tokenizer for WordTokenizer {
    fn token_spans(&self, text: &str) -> Vec<Range<usize>> {
        let mut spans = Vec::new();
        let mut iter = text.char_indices().peekable();
        while let Some((i, c)) = iter.next() {
            if c.is_whitespace() {
                continue;
            }
            if is_word_char(c) {
                let mut end = i + c.len_utf8();
                while let Some(&(j, d)) = iter.peek() {
                    if !is_word_char(d) {
                        break;
                    }
                    end = j + d.len_utf8();
                    iter.next();
                }
                spans.push(i..end);
            } else {
                spans.push(i..i + c.len_utf8());
            }
        }
        spans
    }

    fn name(&self) -> &str {
        "word-v1"
    }
}

/// Segment boundaries of `text` under `tokenizer`: `bounds.len() == n + 1`,
/// segment `i` is `bounds[i]..bounds[i + 1]`.
pub fn segment_bounds(tokenizer: &dyn Tokenizer, text: &str) -> Vec<usize> {
    let spans = tokenizer.token_spans(text);
    if spans.is_empty() {
        return vec![0];
    }
    let mut bounds = Vec::with_capacity(spans.len() + 1);
    bounds.push(0);
    bounds.extend(spans.iter().skip(1).map(|s| s.start));
    bounds.push(text.len());
    bounds
}

/// Window start offsets for a `size`-token window advanced by `stride`.
///
/// A document no longer than one window yields a single window; otherwise a
/// window starts at every multiple of `stride` below the token count.
pub fn window_starts(n_tokens: usize, size: usize, stride: usize) -> Vec<usize> {
    assert!(size > 0 && stride > 0, "window size and stride must be positive");
    if n_tokens == 0 {
        return Vec::new();
    }
    if n_tokens <= size {
        return vec![0];
    }
    (0..n_tokens).step_by(stride).collect()
}

/// A window over a tokenized text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Window {
    pub token_start: usize,
    pub token_len: usize,
    pub byte_range: Range<usize>,
}

/// Splits `text` into overlapping token windows.
pub fn windows(tokenizer: &dyn Tokenizer, text: &str, size: usize, stride: usize) -> Vec<Window> {
    let bounds = segment_bounds(tokenizer, text);
    let n = bounds.len() - 1;
    window_starts(n, size, stride)
        .into_iter()
        .map(|start| {
            let end = (start + size).min(n);
            Window {
                token_start: start,
                token_len: end - start,
                byte_range: bounds[start]..bounds[end],
            }
        })
        .collect()
}

/// Lower-cased word tokens (punctuation dropped), used as retrieval terms.
pub fn terms(tokenizer: &dyn Tokenizer, text: &str) -> Vec<String> {
    tokenizer
        .token_spans(text)
        .into_iter()
        .map(|r| &text[r])
        .filter(|t| t.chars().next().is_some_and(is_word_char))
        .map(str::to_lowercase)
        .collect()
}

/// Identifier-like tokens (`[A-Za-z_][A-Za-z0-9_$]*`) in order of
/// appearance.
pub fn identifiers(text: &str) -> impl Iterator<Item = &str> {
    WordTokenizer
        .token_spans(text)
        .into_iter()
        .map(move |r| &text[r])
        .filter(|t| t.chars().next().is_some_and(|c| c.is_alphabetic() || c == '_'))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spans_words_and_punct() {
        let t = "assign y = a&b;";
        let toks: Vec<_> = WordTokenizer
            .token_spans(t)
            .into_iter()
            .map(|r| &t[r])
            .collect();
        assert_eq!(toks, ["assign", "y", "=", "a", "&", "b", ";"]);
    }

    #[test]
    fn segments_partition_text() {
        let t = "  hello,  world \n foo_bar ";
        let b = segment_bounds(&WordTokenizer, t);
        assert_eq!(b.first(), Some(&0));
        assert_eq!(b.last(), Some(&t.len()));
        let joined: String = b.windows(2).map(|w| &t[w[0]..w[1]]).collect();
        assert_eq!(joined, t);
    }

    #[test]
    fn window_start_arithmetic() {
        assert_eq!(window_starts(1000, 400, 300), vec![0, 300, 600, 900]);
        assert_eq!(window_starts(200, 100, 80), vec![0, 80, 160]);
        assert_eq!(window_starts(50, 50, 40), vec![0]);
        assert_eq!(window_starts(30, 400, 300), vec![0]);
        assert!(window_starts(0, 10, 5).is_empty());
    }

    #[test]
    fn terms_lowercase_words_only() {
        assert_eq!(terms(&WordTokenizer, "TX_Busy, goes HIGH."), ["tx_busy", "goes", "high"]);
    }
}
