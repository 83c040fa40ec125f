//! Unicode-block script identification for the three panel scripts.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScriptTag {
    /// Bengali–Assamese block, U+0980–U+09FF.
    BengaliAssamese,
    /// Devanagari block, U+0900–U+097F.
    Devanagari,
    /// Basic Latin letters.
    Latin,
    /// Letters from more than one of the above.
    Mixed,
}

impl fmt::Display for ScriptTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScriptTag::BengaliAssamese => "bengali_assamese",
            ScriptTag::Devanagari => "devanagari",
            ScriptTag::Latin => "latin",
            ScriptTag::Mixed => "mixed",
        })
    }
}

/// Script of a single codepoint, `None` for digits, punctuation, spaces and
/// letters outside the three supported blocks.
pub fn char_script(c: char) -> Option<ScriptTag> {
    match c {
        // Devanagari digits and dandas
        '\u{0964}'..='\u{096F}' => None,
        '\u{0900}'..='\u{097F}' => Some(ScriptTag::Devanagari),
        // Bengali digits
        '\u{09E6}'..='\u{09EF}' => None,
        '\u{0980}'..='\u{09FF}' => Some(ScriptTag::BengaliAssamese),
        'A'..='Z' | 'a'..='z' => Some(ScriptTag::Latin),
        _ => None,
    }
}

/// Classify text by the Unicode blocks of its letters. Text without letters
/// is Latin by convention.
pub fn identify_script(text: &str) -> ScriptTag {
    let mut found: Option<ScriptTag> = None;
    for s in text.chars().filter_map(char_script) {
        match found {
            None => found = Some(s),
            Some(prev) if prev != s => return ScriptTag::Mixed,
            _ => {}
        }
    }
    found.unwrap_or(ScriptTag::Latin)
}

/// Letter counts per script, used to pick the dominant output language.
pub fn script_histogram(text: &str) -> [(ScriptTag, usize); 3] {
    let mut counts = [
        (ScriptTag::BengaliAssamese, 0),
        (ScriptTag::Devanagari, 0),
        (ScriptTag::Latin, 0),
    ];
    for s in text.chars().filter_map(char_script) {
        if let Some(slot) = counts.iter_mut().find(|(tag, _)| *tag == s) {
            slot.1 += 1;
        }
    }
    counts
}
