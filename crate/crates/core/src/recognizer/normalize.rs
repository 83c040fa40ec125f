use unicode_normalization::UnicodeNormalization;

/// Map Devanagari and Bengali digits to ASCII.
pub fn ascii_digit(c: char) -> char {
    match c {
        '\u{0966}'..='\u{096F}' => char::from(b'0' + (c as u32 - 0x0966) as u8),
        '\u{09E6}'..='\u{09EF}' => char::from(b'0' + (c as u32 - 0x09E6) as u8),
        _ => c,
    }
}

/// Invisible codepoints that carry no text. Zero-width joiners stay: they
/// select conjunct forms in Indic scripts.
fn is_non_printable(c: char) -> bool {
    (c.is_control() && !c.is_whitespace())
        || matches!(c, '\u{00AD}' | '\u{200B}' | '\u{2060}' | '\u{FEFF}' | '\u{FFFE}')
}

/// Trim, collapse whitespace runs, drop non-printable codepoints, map Indic
/// digits to ASCII and NFC-normalize.
pub fn normalize_text(text: &str) -> String {
    let cleaned: String = text
        .chars()
        .filter(|&c| !is_non_printable(c))
        .map(ascii_digit)
        .collect();
    let collapsed = cleaned.split_whitespace().collect::<Vec<_>>().join(" ");
    collapsed.nfc().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(normalize_text("  Guwahati\t25  km "), "Guwahati 25 km");
        assert_eq!(normalize_text("२५"), "25");
        assert_eq!(normalize_text("৪০ কিমি"), "40 কিমি");
        assert_eq!(normalize_text(""), "");
        assert_eq!(normalize_text("a\u{0007}b\u{200B}c"), "abc");
    }

    #[test]
    fn composes_to_nfc() {
        // e + combining acute
        assert_eq!(normalize_text("Cafe\u{0301}"), "Caf\u{00E9}");
    }

    proptest! {
        #[test]
        fn idempotent(s in "\\PC{0,24}|[ \t\n\u{0900}-\u{097F}\u{0980}-\u{09FF}a-z\u{0300}-\u{0302}\u{200B}\u{0007}]{0,24}") {
            let once = normalize_text(&s);
            prop_assert_eq!(normalize_text(&once), once);
        }
    }
}
