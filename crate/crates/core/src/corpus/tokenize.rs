/// Lowercases, splits on whitespace and strips punctuation from token edges.
/// Tokens that are pure punctuation disappear.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|raw| {
            raw.trim_matches(|c: char| c.is_ascii_punctuation() || c.is_ascii_control())
                .to_lowercase()
        })
        .filter(|t| !t.is_empty())
        .collect()
}
