//! Tokenization and the bundled word lists shared by several stages.

use std::collections::HashSet;
use std::sync::LazyLock;

const STOPWORDS_ASSET: &str = include_str!("../assets/stopwords.txt");
const ABBREVIATIONS_ASSET: &str = include_str!("../assets/abbreviations.txt");

static STOPWORDS: LazyLock<HashSet<&'static str>> = LazyLock::new(|| asset_lines(STOPWORDS_ASSET).collect());
static ABBREVIATIONS: LazyLock<HashSet<&'static str>> = LazyLock::new(|| asset_lines(ABBREVIATIONS_ASSET).collect());

/// Non-empty, non-comment lines of a bundled list.
pub(crate) fn asset_lines(asset: &str) -> impl Iterator<Item = &str> {
    asset
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
}

/// Lowercase and split on non-alphanumeric characters.
///
/// This is the one tokenizer used by the embedder, the metrics and the
/// noun-phrase chunker.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

pub fn is_stopword(token: &str) -> bool {
    STOPWORDS.contains(token)
}

/// Tokens of `text` with stopwords removed, in order, duplicates kept.
pub fn content_tokens(text: &str) -> Vec<String> {
    tokenize(text).into_iter().filter(|t| !is_stopword(t)).collect()
}

/// Case-insensitive membership in the sentence-splitter abbreviation list.
pub fn is_abbreviation(token: &str) -> bool {
    ABBREVIATIONS.contains(token.to_lowercase().as_str())
}
