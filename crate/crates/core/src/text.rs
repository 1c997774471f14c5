//! Tokenization shared by the full-text index, the hashing embedder and the
//! mock scorers.

use unicode_segmentation::UnicodeSegmentation;

/// Unicode word-boundary split, lowercased, no stemming.
pub fn tokenize(text: &str) -> Vec<String> {
    text.unicode_words().map(str::to_lowercase).collect()
}

/// Whitespace token count, used for context size budgeting.
pub fn whitespace_tokens(text: &str) -> usize {
    text.split_whitespace().count()
}

/// 64-bit FNV-1a. Stable across platforms and releases, unlike the std hasher.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
