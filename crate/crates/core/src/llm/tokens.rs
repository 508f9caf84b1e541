/// Token counting used for prompt budgets.
pub trait TokenCounter: Send + Sync {
    fn count(&self, text: &str) -> usize;
}

/// `max(words, ceil(chars / 4))`. Deterministic and dependency-free; tends
/// to over-count relative to BPE tokenizers on prose, which keeps budgets
/// conservative.
#[derive(Debug, Clone, Copy, Default)]
pub struct HeuristicCounter;

impl TokenCounter for HeuristicCounter {
    fn count(&self, text: &str) -> usize {
        let chars = text.chars().count();
        let words = text.split_whitespace().count();
        words.max(chars.div_ceil(4))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        let c = HeuristicCounter;
        assert_eq!(c.count(""), 0);
        assert_eq!(c.count("abcd"), 1);
        assert_eq!(c.count("abcde"), 2);
        // 59 three-letter words, a space, then a tail padding to 400 chars
        let mut text = vec!["abc"; 59].join(" ");
        text.push(' ');
        text.push_str(&"x".repeat(400 - text.len()));
        assert_eq!(text.chars().count(), 400);
        assert_eq!(text.split_whitespace().count(), 60);
        assert_eq!(c.count(&text), 100);
    }

    proptest! {
        #[test]
        fn monotone_under_concat(a in "[a-z ]{0,40}", b in "[a-z ]{0,40}") {
            let c = HeuristicCounter;
            let ab = format!("{a}{b}");
            prop_assert!(c.count(&ab) >= c.count(&a).max(c.count(&b)));
        }
    }
}
