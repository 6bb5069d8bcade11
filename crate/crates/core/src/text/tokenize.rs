/// Lowercased alphanumeric runs of `text`, in source order.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// All contiguous n-grams for `n` in `lo..=hi`, grouped by `n` and in source
/// order within each group. Duplicates are kept.
pub fn ngrams(tokens: &[String], (lo, hi): (usize, usize)) -> Vec<String> {
    let mut out = Vec::new();
    for n in lo.max(1)..=hi {
        if n > tokens.len() {
            break;
        }
        out.extend(tokens.windows(n).map(|w| w.join(" ")));
    }
    out
}

pub fn tokenize_ngrams(text: &str, range: (usize, usize)) -> Vec<String> {
    ngrams(&tokenize(text), range)
}
