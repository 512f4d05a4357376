use unicode_normalization::UnicodeNormalization;

fn is_edge_punct(c: char) -> bool {
    c.is_ascii_punctuation() || matches!(c, '“' | '”' | '‘' | '’' | '…' | '–' | '—' | '«' | '»')
}

/// Canonical comparison form of a header: NFC, lowercase, trimmed of
/// whitespace and edge punctuation, internal whitespace collapsed.
pub fn normalize_header(s: &str) -> String {
    let lowered: String = s.to_lowercase().nfc().collect();
    let trimmed = lowered.trim_matches(|c: char| c.is_whitespace() || is_edge_punct(c));
    let mut out = String::with_capacity(trimmed.len());
    for word in trimmed.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}
