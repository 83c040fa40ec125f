//! From recognized lines to a spoken sentence: classify the panel, parse it
//! into a [`PanelMessage`], then fill the per-language template.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Category, Direction, Language};
use crate::recognizer::normalize::normalize_text;
use crate::recognizer::script::{script_histogram, ScriptTag};

const BUNDLED_TEMPLATES: &str = include_str!("../assets/templates.toml");

#[derive(Debug, Error, PartialEq)]
pub enum ComposeError {
    #[error("no text to compose from")]
    EmptyInput,
    #[error("line {0:?} has no place, number and distance unit")]
    ParseFailure(String),
    #[error("direction panel without a direction")]
    MissingDirection,
    #[error("no templates for {0:?}")]
    UnsupportedLanguage(Language),
    #[error("template table: {0}")]
    InvalidTemplates(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessageItem {
    pub place: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance_km: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<Direction>,
}

/// Structured content of a panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelMessage {
    pub category: Category,
    pub items: Vec<MessageItem>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caution_text: Option<String>,
    pub language: Language,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Utterance {
    pub text: String,
    pub language: Language,
    /// Whitespace-separated tokens in `text`.
    pub estimated_words: usize,
}

impl Utterance {
    pub fn new(text: impl Into<String>, language: Language) -> Self {
        let text = text.into();
        let estimated_words = text.split_whitespace().count();
        Self { text, language, estimated_words }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct LanguageTemplates {
    destination: String,
    direction: String,
    place: String,
    caution: String,
    left: String,
    right: String,
    straight: String,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct DirectionWords {
    left: Vec<String>,
    right: Vec<String>,
    straight: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct TemplateFile {
    distance_units: Vec<String>,
    caution_stems: Vec<String>,
    direction_words: DirectionWords,
    templates: BTreeMap<Language, LanguageTemplates>,
}

/// Template table plus lexicons. Loaded once and shared.
#[derive(Debug, Clone, PartialEq)]
pub struct Composer {
    table: TemplateFile,
}

fn require(template: &str, placeholders: &[&str], what: &str) -> Result<(), ComposeError> {
    for p in placeholders {
        if !template.contains(p) {
            return Err(ComposeError::InvalidTemplates(format!("{what} lacks {p}")));
        }
    }
    Ok(())
}

fn parse_number(token: &str) -> Option<f64> {
    let mut parts = token.split('.');
    let whole = parts.next()?;
    let frac = parts.next();
    let digits = |s: &str| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit());
    if !digits(whole) || parts.next().is_some() || frac.is_some_and(|f| !digits(f)) {
        return None;
    }
    token.parse().ok()
}

impl Composer {
    pub fn from_toml(text: &str) -> Result<Self, ComposeError> {
        let table: TemplateFile = toml::from_str(text).map_err(|e| ComposeError::InvalidTemplates(e.to_string()))?;
        for (lang, t) in &table.templates {
            let name = lang.name();
            require(&t.destination, &["{place}", "{distance}"], &format!("{name}.destination"))?;
            require(&t.direction, &["{place}", "{direction}"], &format!("{name}.direction"))?;
            require(&t.place, &["{place}"], &format!("{name}.place"))?;
            require(&t.caution, &["{text}"], &format!("{name}.caution"))?;
        }
        Ok(Self { table })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ComposeError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ComposeError::InvalidTemplates(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// The bundled table.
    pub fn builtin() -> &'static Composer {
        static BUILTIN: OnceLock<Composer> = OnceLock::new();
        BUILTIN.get_or_init(|| Composer::from_toml(BUNDLED_TEMPLATES).expect("bundled templates are valid"))
    }

    pub fn languages(&self) -> Vec<Language> {
        self.table.templates.keys().copied().collect()
    }

    fn is_unit(&self, token: &str) -> bool {
        self.table.distance_units.iter().any(|u| u == token)
    }

    fn is_caution(&self, token: &str) -> bool {
        let token = token.to_lowercase();
        self.table.caution_stems.iter().any(|stem| token.starts_with(&stem.to_lowercase()))
    }

    fn direction_of(&self, token: &str) -> Option<Direction> {
        let token = token.to_lowercase();
        let words = &self.table.direction_words;
        [(Direction::Left, &words.left), (Direction::Right, &words.right), (Direction::Straight, &words.straight)]
            .into_iter()
            .find(|(_, list)| list.iter().any(|w| w.to_lowercase() == token))
            .map(|(d, _)| d)
    }

    /// `<place tokens> <number> <unit>` at the first number token of `line`.
    fn split_destination(&self, line: &str) -> Option<MessageItem> {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let at = tokens.iter().position(|t| parse_number(t).is_some())?;
        if at == 0 || !tokens.get(at + 1).is_some_and(|u| self.is_unit(u)) {
            return None;
        }
        Some(MessageItem {
            place: tokens[..at].join(" "),
            distance_km: parse_number(tokens[at]),
            direction: None,
        })
    }

    fn text_direction(&self, lines: &[String]) -> Option<Direction> {
        lines.iter().flat_map(|l| l.split_whitespace()).find_map(|t| self.direction_of(t))
    }

    /// Category by rule cascade: a destination line makes it 1, a direction
    /// (hinted or printed) 2, a caution word 4, anything else 3.
    pub fn classify_category(&self, lines: &[String], direction_hint: Option<Direction>) -> Result<Category, ComposeError> {
        let lines = normalized(lines)?;
        if lines.iter().any(|l| self.split_destination(l).is_some()) {
            return Ok(Category::DestinationDistance);
        }
        let hinted = direction_hint.is_some_and(|d| d != Direction::Unknown);
        if hinted || self.text_direction(&lines).is_some() {
            return Ok(Category::LocationDirection);
        }
        if lines.iter().flat_map(|l| l.split_whitespace()).any(|t| self.is_caution(t)) {
            return Ok(Category::Caution);
        }
        Ok(Category::PlaceName)
    }

    /// Parse lines under a known category. Destination panels keep every line
    /// that parses and fail only when none does; direction panels take the
    /// hint, or a printed direction word, and fail without either.
    pub fn parse_message(
        &self,
        lines: &[String],
        category: Category,
        direction_hint: Option<Direction>,
        language: Language,
    ) -> Result<PanelMessage, ComposeError> {
        let lines = normalized(lines)?;
        let mut msg = PanelMessage { category, items: Vec::new(), caution_text: None, language };
        match category {
            Category::DestinationDistance => {
                msg.items = lines.iter().filter_map(|l| self.split_destination(l)).collect();
                if msg.items.is_empty() {
                    return Err(ComposeError::ParseFailure(lines.join(" / ")));
                }
            }
            Category::LocationDirection => {
                let direction = direction_hint
                    .filter(|d| *d != Direction::Unknown)
                    .or_else(|| self.text_direction(&lines))
                    .ok_or(ComposeError::MissingDirection)?;
                for line in &lines {
                    let place: Vec<&str> =
                        line.split_whitespace().filter(|t| self.direction_of(t).is_none()).collect();
                    // A line made only of direction words still names something.
                    let place = if place.is_empty() { line.clone() } else { place.join(" ") };
                    msg.items.push(MessageItem { place, distance_km: None, direction: Some(direction) });
                }
            }
            Category::PlaceName => {
                msg.items.push(MessageItem { place: lines.join(" "), distance_km: None, direction: None });
            }
            Category::Caution => msg.caution_text = Some(lines.join(" ")),
        }
        Ok(msg)
    }

    /// Fill the template for the message's category in `language`. Several
    /// items become several sentences.
    pub fn verbalize(&self, msg: &PanelMessage, language: Language) -> Result<Utterance, ComposeError> {
        let t = self.table.templates.get(&language).ok_or(ComposeError::UnsupportedLanguage(language))?;
        let sentences: Vec<String> = match msg.category {
            Category::DestinationDistance => msg
                .items
                .iter()
                .map(|item| {
                    let km = item.distance_km.unwrap_or_default();
                    t.destination.replace("{place}", &item.place).replace("{distance}", &format!("{km}"))
                })
                .collect(),
            Category::LocationDirection => msg
                .items
                .iter()
                .map(|item| {
                    let phrase = match item.direction {
                        Some(Direction::Left) => &t.left,
                        Some(Direction::Right) => &t.right,
                        _ => &t.straight,
                    };
                    t.direction.replace("{place}", &item.place).replace("{direction}", phrase)
                })
                .collect(),
            Category::PlaceName => msg.items.iter().map(|item| t.place.replace("{place}", &item.place)).collect(),
            Category::Caution => vec![t.caution.replace("{text}", msg.caution_text.as_deref().unwrap_or_default())],
        };
        Ok(Utterance::new(sentences.join(" "), language))
    }

    /// Classify, parse and verbalize in one go.
    pub fn compose(
        &self,
        lines: &[String],
        direction_hint: Option<Direction>,
        language: Language,
    ) -> Result<(PanelMessage, Utterance), ComposeError> {
        let category = self.classify_category(lines, direction_hint)?;
        let msg = self.parse_message(lines, category, direction_hint, language)?;
        let utt = self.verbalize(&msg, language)?;
        Ok((msg, utt))
    }
}

fn normalized(lines: &[String]) -> Result<Vec<String>, ComposeError> {
    let out: Vec<String> = lines.iter().map(|l| normalize_text(l)).filter(|l| !l.is_empty()).collect();
    if out.is_empty() {
        Err(ComposeError::EmptyInput)
    } else {
        Ok(out)
    }
}

/// Output language from the letters in `text`: the script with the most
/// letters, with a tie going to the regional script (Assamese, then Hindi)
/// over English. Text without letters is English.
pub fn dominant_language(text: &str) -> Language {
    let counts = script_histogram(text);
    let (tag, n) = counts
        .iter()
        .copied()
        .reduce(|best, next| if next.1 > best.1 { next } else { best })
        .expect("three scripts");
    match (tag, n) {
        (_, 0) | (ScriptTag::Latin, _) | (ScriptTag::Mixed, _) => Language::English,
        (ScriptTag::Devanagari, _) => Language::Hindi,
        (ScriptTag::BengaliAssamese, _) => Language::Assamese,
    }
}
