//! Deterministic sentence splitting, used in place of atomization when that
//! stage is ablated.

const ABBREVIATIONS: &[&str] = &[
    "mr", "mrs", "ms", "dr", "jr", "sr", "st", "vs", "prof", "gen", "col", "lt", "sgt", "capt",
    "inc", "ltd", "co", "corp", "mt", "ft", "no", "approx", "est", "dept",
];

/// Splits on `.`, `!` and `?` followed by whitespace or end of text, and on
/// line breaks. Decimals, single-letter initials (`J.R.`) and a fixed list of
/// abbreviations do not end a sentence.
pub fn split_sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for line in text.lines() {
        split_line(line, &mut out);
    }
    out
}

fn split_line(line: &str, out: &mut Vec<String>) {
    let chars: Vec<(usize, char)> = line.char_indices().collect();
    let mut start = 0;
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if matches!(c, '.' | '!' | '?') {
            // Closing quotes and brackets stay with the sentence.
            let mut j = i + 1;
            while j < chars.len() && matches!(chars[j].1, '"' | '\'' | ')' | ']' | '”' | '’') {
                j += 1;
            }
            let at_end = j == chars.len();
            let before_space = !at_end && chars[j].1.is_whitespace();
            if (at_end || before_space) && !(c == '.' && protected(&line[..pos], &chars[j..])) {
                let end = if at_end { line.len() } else { chars[j].0 };
                push(&line[start..end], out);
                start = end;
            }
            i = j;
            continue;
        }
        i += 1;
    }
    push(&line[start..], out);
}

fn push(s: &str, out: &mut Vec<String>) {
    let s = s.trim();
    if !s.is_empty() {
        out.push(s.to_string());
    }
}

fn protected(before: &str, after: &[(usize, char)]) -> bool {
    let word = before.rsplit(char::is_whitespace).next().unwrap_or("");
    let word = word.trim_start_matches(['(', '"', '\'']);
    // Initials: "J", "J.R", "U.S".
    if !word.is_empty() && word.split('.').all(|p| p.chars().count() == 1 && p.chars().all(char::is_alphabetic)) {
        return true;
    }
    if ABBREVIATIONS.contains(&word.to_ascii_lowercase().as_str()) {
        return true;
    }
    // A lowercase continuation means the period was not a sentence end.
    after
        .iter()
        .map(|(_, c)| *c)
        .find(|c| !c.is_whitespace())
        .is_some_and(char::is_lowercase)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_simple_sentences() {
        assert_eq!(split_sentences("A scored 3. B scored 4."), ["A scored 3.", "B scored 4."]);
    }

    #[test]
    fn protects_decimals_initials_and_abbreviations() {
        let text = "J.R. Smith shot 45.5 percent. Tim Hardaway, Jr. scored 13 points! Did Dr. Who play? Yes.";
        assert_eq!(
            split_sentences(text),
            [
                "J.R. Smith shot 45.5 percent.",
                "Tim Hardaway, Jr. scored 13 points!",
                "Did Dr. Who play?",
                "Yes.",
            ]
        );
    }

    #[test]
    fn scores_with_spaced_dashes_survive() {
        assert_eq!(
            split_sentences("The Thunder (16 - 17) won 137 - 134. Durant had 44."),
            ["The Thunder (16 - 17) won 137 - 134.", "Durant had 44."]
        );
    }

    #[test]
    fn newlines_split_and_quotes_attach() {
        assert_eq!(
            split_sentences("He said \"go.\" Then left\nNext line"),
            ["He said \"go.\"", "Then left", "Next line"]
        );
        assert!(split_sentences("  \n ").is_empty());
    }
}
