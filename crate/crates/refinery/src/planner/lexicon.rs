//! The closed vocabularies the rule grammar understands: colors, numerals,
//! relation phrases, style markers, and text markers. Fixed at build time;
//! all lookups are case-insensitive because callers lowercase first.

use crate::core::{Relation, COLORS};

/// The grammar's lookup tables, bundled so callers can hold one handle.
#[derive(Debug)]
pub struct GrammarLexicons {
    pub colors: &'static [&'static str],
    /// Number words recognized in counting prompts; digit strings are also
    /// accepted (see [`GrammarLexicons::numeral`]).
    pub numerals: &'static [(&'static str, u32)],
    /// Relation phrases as token sequences, longest first.
    pub relations: &'static [(&'static [&'static str], Relation)],
    pub style_markers: &'static [&'static str],
    /// Text markers as token sequences, longest first.
    pub text_markers: &'static [&'static [&'static str]],
}

const NUMERALS: &[(&str, u32)] = &[
    ("one", 1),
    ("two", 2),
    ("three", 3),
    ("four", 4),
    ("five", 5),
    ("six", 6),
    ("seven", 7),
    ("eight", 8),
    ("nine", 9),
    ("ten", 10),
];

const RELATIONS: &[(&[&str], Relation)] = &[
    (&["left", "of"], Relation::LeftOf),
    (&["right", "of"], Relation::RightOf),
    (&["above"], Relation::Above),
    (&["below"], Relation::Below),
];

const STYLE_MARKERS: &[&str] = &["style", "rendered in", "in the style of"];

const TEXT_MARKERS: &[&[&str]] = &[
    &["clearly", "reads"],
    &["that", "says"],
    &["reads"],
    &["says"],
];

/// Words that never start or extend a noun phrase. Includes articles (also
/// stripped earlier), prepositions, copulas, and the meta-words that show up
/// in checklist questions but never name a scene object.
const STOPWORDS: &[&str] = &[
    "a", "an", "the", "of", "in", "on", "at", "with", "to", "from", "by", "for", "over",
    "under", "near", "and", "or", "is", "are", "there", "does", "do", "exactly", "image",
    "picture", "photo", "scene", "that", "clearly", "say", "read", "written",
];

static LEXICONS: GrammarLexicons = GrammarLexicons {
    colors: &COLORS,
    numerals: NUMERALS,
    relations: RELATIONS,
    style_markers: STYLE_MARKERS,
    text_markers: TEXT_MARKERS,
};

impl GrammarLexicons {
    /// The one fixed lexicon set.
    pub fn standard() -> &'static GrammarLexicons {
        &LEXICONS
    }

    pub fn is_color(&self, token: &str) -> bool {
        self.colors.contains(&token)
    }

    /// Parse a number word or digit string.
    pub fn numeral(&self, token: &str) -> Option<u32> {
        if let Some(&(_, n)) = self.numerals.iter().find(|(w, _)| *w == token) {
            return Some(n);
        }
        if !token.is_empty() && token.bytes().all(|b| b.is_ascii_digit()) {
            return token.parse().ok();
        }
        None
    }

    /// If a relation phrase starts at `tokens[i]`, return it and its token
    /// length.
    pub fn relation_at(&self, tokens: &[&str], i: usize) -> Option<(Relation, usize)> {
        for (phrase, rel) in self.relations {
            if tokens.len() >= i + phrase.len() && &&tokens[i..i + phrase.len()] == phrase {
                return Some((*rel, phrase.len()));
            }
        }
        None
    }

    /// If a text marker starts at `tokens[i]`, return its token length.
    /// Longest marker wins ("that says" before "says").
    pub fn text_marker_at(&self, tokens: &[&str], i: usize) -> Option<usize> {
        for marker in self.text_markers {
            if tokens.len() >= i + marker.len() && &&tokens[i..i + marker.len()] == marker {
                return Some(marker.len());
            }
        }
        None
    }

    /// True if the token is part of any relation phrase ("left", "of", ...).
    pub fn is_relation_word(&self, token: &str) -> bool {
        self.relations
            .iter()
            .any(|(phrase, _)| phrase.contains(&token))
    }

    pub fn is_stopword(&self, token: &str) -> bool {
        STOPWORDS.contains(&token)
    }

    /// True for any token with reserved grammar meaning: such a token never
    /// begins or extends a noun phrase.
    pub fn is_reserved(&self, token: &str) -> bool {
        self.is_color(token)
            || self.numeral(token).is_some()
            || self.is_relation_word(token)
            || self.is_stopword(token)
            || token == "style"
            || token == "rendered"
            || self.text_markers.iter().any(|m| m.contains(&token))
    }
}
