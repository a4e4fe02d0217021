//! The deterministic rule grammar: lowercase, strip photo-prefixes and
//! articles, split clauses on "and"/commas, then per clause extract text
//! content, style, spatial relations, and finally modifier+noun runs.
//!
//! The grammar is deliberately naive — closed lexicons, no dependency
//! parsing — but total: a prompt it cannot structure at all yields a single
//! free-form constraint carrying the whole prompt instead of an error.

use super::lexicon::GrammarLexicons;
use super::PlanError;
use crate::core::{Checklist, Constraint};

/// Parse a prompt into an ordered, validated checklist without any model
/// call. Pure: the same prompt always yields byte-identical output.
pub fn plan_rule(prompt: &str) -> Result<Checklist, PlanError> {
    if prompt.trim().is_empty() {
        return Err(PlanError::EmptyPrompt);
    }
    let lex = GrammarLexicons::standard();

    let (normalized, quotes) = extract_quotes(prompt);
    let mut items: Vec<Constraint> = Vec::new();
    for clause in split_clauses(&normalized) {
        let tokens: Vec<&str> = clause.iter().map(|s| s.as_str()).collect();
        parse_tokens(&tokens, &quotes, lex, &mut items);
    }

    dedup(&mut items);
    if items.is_empty() {
        items.push(Constraint::free_form(
            0,
            &format!("Does the image match the prompt: \"{}\"?", prompt.trim()),
        ));
    }

    // Presence items first (surface order), then binding/count/spatial/
    // text/style/free-form; stable sort keeps surface order within a rank.
    items.sort_by_key(|c| c.kind.order_rank());
    for (index, item) in items.iter_mut().enumerate() {
        item.id = (index as u32) + 1;
    }

    let checklist = Checklist::new(prompt, items);
    debug_assert!(checklist.validate().is_ok());
    Ok(checklist)
}

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

/// Replace every double-quoted span with a placeholder token (`__quote0__`,
/// ...) so later lowercasing and tokenization cannot touch the literal text.
/// Returns the rewritten string and the extracted spans in order.
pub(crate) fn extract_quotes(text: &str) -> (String, Vec<String>) {
    let mut out = String::with_capacity(text.len());
    let mut quotes = Vec::new();
    let mut rest = text;
    loop {
        let Some(open) = rest.find('"') else {
            out.push_str(rest);
            break;
        };
        let Some(close_rel) = rest[open + 1..].find('"') else {
            out.push_str(rest);
            break;
        };
        let close = open + 1 + close_rel;
        out.push_str(&rest[..open]);
        out.push_str(&format!(" __quote{}__ ", quotes.len()));
        quotes.push(rest[open + 1..close].to_string());
        rest = &rest[close + 1..];
    }
    (out, quotes)
}

fn quote_index(token: &str) -> Option<usize> {
    token
        .strip_prefix("__quote")?
        .strip_suffix("__")?
        .parse()
        .ok()
}

/// Lowercase, strip leading "a photo of"/"an image of", drop articles and
/// punctuation, and split into clauses on commas/semicolons and "and"/"or".
pub(crate) fn split_clauses(text: &str) -> Vec<Vec<String>> {
    let mut lowered = text.to_lowercase();
    loop {
        let t = lowered.trim_start();
        if let Some(rest) = t
            .strip_prefix("a photo of ")
            .or_else(|| t.strip_prefix("an image of "))
        {
            lowered = rest.to_string();
        } else {
            break;
        }
    }

    let mut clauses: Vec<Vec<String>> = vec![Vec::new()];
    for raw in lowered.split_whitespace() {
        // Commas and semicolons break clauses even when glued to a word.
        let breaks = raw.ends_with(',') || raw.ends_with(';');
        let token: String = raw
            .chars()
            .filter(|ch| ch.is_alphanumeric() || *ch == '_')
            .collect();
        if token == "and" || token == "or" {
            clauses.push(Vec::new());
            continue;
        }
        if !token.is_empty() && !matches!(token.as_str(), "a" | "an" | "the") {
            clauses.last_mut().unwrap().push(token);
        }
        if breaks {
            clauses.push(Vec::new());
        }
    }
    clauses.retain(|c| !c.is_empty());
    clauses
}

/// Normalize one checklist line for classification: same tokenizer as the
/// grammar, but without clause splitting.
pub(crate) fn tokenize_line(text: &str) -> (Vec<String>, Vec<String>) {
    let (normalized, quotes) = extract_quotes(text);
    let tokens = normalized
        .to_lowercase()
        .split_whitespace()
        .map(|raw| {
            raw.chars()
                .filter(|ch| ch.is_alphanumeric() || *ch == '_')
                .collect::<String>()
        })
        .filter(|t| !t.is_empty() && !matches!(t.as_str(), "a" | "an" | "the"))
        .collect();
    (tokens, quotes)
}

// ---------------------------------------------------------------------------
// Clause parsing
// ---------------------------------------------------------------------------

fn parse_tokens(
    tokens: &[&str],
    quotes: &[String],
    lex: &GrammarLexicons,
    items: &mut Vec<Constraint>,
) {
    // Text content: a text marker followed by a quoted literal; the noun
    // phrase before the marker is the carrier. Tokens after the literal are
    // parsed in their own right ("... says \"hi\" in sketch style").
    if let Some((marker_idx, marker_len)) = find_text_marker(tokens, lex) {
        let after_marker = &tokens[marker_idx + marker_len..];
        let quote_rel = after_marker
            .iter()
            .position(|t| quote_index(t).is_some());
        if let Some(rel) = quote_rel {
            let qi = quote_index(after_marker[rel]).expect("position found a placeholder");
            let scanned = scan_noun_runs(&tokens[..marker_idx], lex);
            if let Some(subject) = scanned.nouns.last().cloned() {
                let text = quotes.get(qi).cloned().unwrap_or_default();
                items.extend(scanned.items);
                items.push(Constraint::text(0, &subject, &text));
                let remainder = &after_marker[rel + 1..];
                if !remainder.is_empty() {
                    parse_tokens(remainder, quotes, lex, items);
                }
                return;
            }
            // No carrier noun: unknown structure, fall through to the
            // generic scan (which ignores markers and placeholders).
        }
    }

    // Style: extract the style value and remove its tokens, letting the rest
    // of the clause (if any) parse normally.
    let mut working: Vec<&str> = tokens.to_vec();
    if let Some((style, remainder)) = extract_style(&working, lex) {
        items.push(Constraint::style(0, &style));
        working = remainder;
    }

    // Spatial relation: "<left> <relation phrase> <right>". Both sides parse
    // for modifiers/nouns; the first noun of each side anchors the relation.
    for i in 0..working.len() {
        if let Some((rel, len)) = lex.relation_at(&working, i) {
            let left = scan_noun_runs(&working[..i], lex);
            let right = scan_noun_runs(&working[i + len..], lex);
            let anchors = (left.nouns.first().cloned(), right.nouns.first().cloned());
            items.extend(left.items);
            items.extend(right.items);
            if let (Some(subject), Some(object)) = anchors {
                items.push(Constraint::spatial(0, &subject, rel, &object));
            }
            return;
        }
    }

    // Plain modifier+noun runs.
    items.extend(scan_noun_runs(&working, lex).items);
}

fn find_text_marker(tokens: &[&str], lex: &GrammarLexicons) -> Option<(usize, usize)> {
    (0..tokens.len()).find_map(|i| lex.text_marker_at(tokens, i).map(|len| (i, len)))
}

/// Recognize the style patterns and return (style value, remaining tokens).
///
/// Handled shapes (articles already stripped): "in style of X", "style of
/// X", "rendered in X [style]", and "... X style".
fn extract_style<'a>(tokens: &[&'a str], lex: &GrammarLexicons) -> Option<(String, Vec<&'a str>)> {
    // "style of <rest>" (with optional leading "in" from "in the style of").
    for i in 0..tokens.len() {
        if tokens[i] == "style" && tokens.get(i + 1) == Some(&"of") {
            let value = tokens[i + 2..].join(" ");
            if value.is_empty() {
                return None;
            }
            let mut rest: Vec<&str> = tokens[..i].to_vec();
            if rest.last() == Some(&"in") {
                rest.pop();
            }
            return Some((value, rest));
        }
    }
    // "rendered in <value tokens> [style]".
    for i in 0..tokens.len() {
        if tokens[i] == "rendered" && tokens.get(i + 1) == Some(&"in") {
            let mut value: Vec<&str> = tokens[i + 2..].to_vec();
            if value.last() == Some(&"style") {
                value.pop();
            }
            if value.is_empty() {
                return None;
            }
            return Some((value.join(" "), tokens[..i].to_vec()));
        }
    }
    // "<value tokens> style": contiguous unreserved tokens before "style",
    // optionally introduced by "in"/"with".
    if let Some(pos) = tokens.iter().position(|t| *t == "style") {
        let mut start = pos;
        while start > 0 && !lex.is_reserved(tokens[start - 1]) {
            start -= 1;
        }
        if start < pos {
            let value = tokens[start..pos].join(" ");
            let mut rest: Vec<&str> = tokens[..start].to_vec();
            if matches!(rest.last(), Some(&"in") | Some(&"with")) {
                rest.pop();
            }
            rest.extend_from_slice(&tokens[pos + 1..]);
            return Some((value, rest));
        }
    }
    None
}

/// Result of the generic modifier+noun scan over a token span.
pub(crate) struct ScannedRuns {
    pub items: Vec<Constraint>,
    /// Nouns in surface order (singularized where a count demanded it).
    pub nouns: Vec<String>,
}

/// Walk tokens left to right. Color and numeral tokens become pending
/// modifiers; an unreserved token starts a noun phrase that absorbs up to
/// two following unreserved tokens ("tv remote", "potted plant"). Each noun
/// emits an object-presence constraint plus one constraint per pending
/// modifier. Any other token clears the pending modifiers.
pub(crate) fn scan_noun_runs(tokens: &[&str], lex: &GrammarLexicons) -> ScannedRuns {
    let mut items = Vec::new();
    let mut nouns = Vec::new();
    let mut pending_color: Option<&str> = None;
    let mut pending_count: Option<u32> = None;
    let mut dangling_color: Option<&str> = None;

    let mut i = 0;
    while i < tokens.len() {
        let tok = tokens[i];
        if quote_index(tok).is_some() {
            pending_color = None;
            pending_count = None;
            i += 1;
            continue;
        }
        if lex.is_color(tok) {
            dangling_color = Some(tok);
            pending_color = Some(tok);
            i += 1;
            continue;
        }
        if let Some(n) = lex.numeral(tok) {
            pending_count = Some(n);
            i += 1;
            continue;
        }
        if lex.is_reserved(tok) {
            pending_color = None;
            pending_count = None;
            i += 1;
            continue;
        }

        // Noun phrase: head token plus up to two absorbable followers.
        let mut end = i + 1;
        while end < tokens.len()
            && end - i < 3
            && !lex.is_reserved(tokens[end])
            && quote_index(tokens[end]).is_none()
        {
            end += 1;
        }
        let mut noun = tokens[i..end].join(" ");
        if pending_count.is_some_and(|n| n > 1) {
            noun = singularize_phrase(&noun);
        }

        items.push(Constraint::presence(0, &noun));
        if let Some(color) = pending_color {
            items.push(Constraint::color(0, &noun, color));
        }
        if let Some(n) = pending_count {
            items.push(Constraint::count(0, &noun, n));
        }
        nouns.push(noun);
        pending_color = None;
        pending_count = None;
        dangling_color = None;
        i = end;
    }

    // A clause like "an orange" leaves a color token with no noun to bind
    // to; read it as the noun itself (the fruit reading).
    if nouns.is_empty() {
        if let Some(color) = dangling_color {
            items.push(Constraint::presence(0, color));
            nouns.push(color.to_string());
        }
    }

    ScannedRuns { items, nouns }
}

/// Singularize the head (last word) of a noun phrase. Naive suffix rules
/// tuned for the object-category nouns in play.
pub(crate) fn singularize_phrase(phrase: &str) -> String {
    let (head_start, head) = match phrase.rfind(' ') {
        Some(i) => (i + 1, &phrase[i + 1..]),
        None => (0, phrase),
    };
    let singular_head = singularize_word(head);
    format!("{}{}", &phrase[..head_start], singular_head)
}

fn singularize_word(word: &str) -> String {
    if word.len() >= 5 && word.ends_with("ies") {
        let stem = &word[..word.len() - 3];
        if !stem.ends_with(|c: char| matches!(c, 'a' | 'e' | 'i' | 'o' | 'u')) {
            return format!("{stem}y");
        }
    }
    for suffix in ["ses", "xes", "zes", "ches", "shes"] {
        if word.ends_with(suffix) {
            return word[..word.len() - 2].to_string();
        }
    }
    if word.ends_with("ss") {
        return word.to_string();
    }
    if let Some(stem) = word.strip_suffix('s') {
        return stem.to_string();
    }
    word.to_string()
}

// ---------------------------------------------------------------------------
// Post-processing
// ---------------------------------------------------------------------------

/// Drop exact semantic duplicates, keeping the first occurrence.
fn dedup(items: &mut Vec<Constraint>) {
    let mut seen: Vec<Constraint> = Vec::new();
    items.retain(|c| {
        let same = |s: &Constraint| {
            s.kind == c.kind
                && s.subject == c.subject
                && s.object == c.object
                && s.color == c.color
                && s.count == c.count
                && s.relation == c.relation
                && s.text == c.text
                && s.style == c.style
        };
        if seen.iter().any(same) {
            false
        } else {
            seen.push(c.clone());
            true
        }
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::{validate_constraint, ConstraintKind, Relation};

    fn kinds(c: &Checklist) -> Vec<ConstraintKind> {
        c.items.iter().map(|i| i.kind).collect()
    }

    #[test]
    fn counting_prompt_yields_presence_then_count() {
        let c = plan_rule("A photo of five pandas").unwrap();
        assert_eq!(
            kinds(&c),
            vec![ConstraintKind::ObjectPresence, ConstraintKind::ObjectCount]
        );
        assert_eq!(c.items[0].subject.as_deref(), Some("panda"));
        assert_eq!(c.items[1].subject.as_deref(), Some("panda"));
        assert_eq!(c.items[1].count, Some(5));
        assert_eq!(c.items[0].id, 1);
        assert_eq!(c.items[1].id, 2);
    }

    #[test]
    fn two_colored_objects_order_presences_before_bindings() {
        let c = plan_rule("A photo of a yellow chair and an orange tv remote").unwrap();
        assert_eq!(
            kinds(&c),
            vec![
                ConstraintKind::ObjectPresence,
                ConstraintKind::ObjectPresence,
                ConstraintKind::ColorBinding,
                ConstraintKind::ColorBinding,
            ]
        );
        assert_eq!(c.items[0].subject.as_deref(), Some("chair"));
        assert_eq!(c.items[1].subject.as_deref(), Some("tv remote"));
        assert_eq!(c.items[2].subject.as_deref(), Some("chair"));
        assert_eq!(c.items[2].color.as_deref(), Some("yellow"));
        assert_eq!(c.items[3].subject.as_deref(), Some("tv remote"));
        assert_eq!(c.items[3].color.as_deref(), Some("orange"));
    }

    #[test]
    fn spatial_prompt_yields_two_presences_and_relation() {
        let c = plan_rule("A photo of a tie right of a potted plant").unwrap();
        assert_eq!(
            kinds(&c),
            vec![
                ConstraintKind::ObjectPresence,
                ConstraintKind::ObjectPresence,
                ConstraintKind::SpatialRelation,
            ]
        );
        assert_eq!(c.items[0].subject.as_deref(), Some("tie"));
        assert_eq!(c.items[1].subject.as_deref(), Some("potted plant"));
        let rel = &c.items[2];
        assert_eq!(rel.subject.as_deref(), Some("tie"));
        assert_eq!(rel.object.as_deref(), Some("potted plant"));
        assert_eq!(rel.relation, Some(Relation::RightOf));
    }

    #[test]
    fn empty_prompt_is_an_error() {
        assert!(matches!(plan_rule(""), Err(PlanError::EmptyPrompt)));
        assert!(matches!(plan_rule("   "), Err(PlanError::EmptyPrompt)));
    }

    #[test]
    fn quoted_text_yields_text_content() {
        let c = plan_rule("a sign that says \"OPEN\"").unwrap();
        assert_eq!(
            kinds(&c),
            vec![ConstraintKind::ObjectPresence, ConstraintKind::TextContent]
        );
        assert_eq!(c.items[1].subject.as_deref(), Some("sign"));
        assert_eq!(c.items[1].text.as_deref(), Some("OPEN"));
        assert_eq!(c.items[1].question, "Does the sign read \"OPEN\"?");
    }

    #[test]
    fn tokens_after_quote_still_parse() {
        let c = plan_rule("a sign that says \"hi\" in sketch style").unwrap();
        assert_eq!(
            kinds(&c),
            vec![
                ConstraintKind::ObjectPresence,
                ConstraintKind::TextContent,
                ConstraintKind::Style,
            ]
        );
        assert_eq!(c.items[2].style.as_deref(), Some("sketch"));
    }

    #[test]
    fn style_clause_yields_style_item_and_keeps_nouns() {
        let c = plan_rule("a panda in watercolor style").unwrap();
        assert_eq!(
            kinds(&c),
            vec![ConstraintKind::ObjectPresence, ConstraintKind::Style]
        );
        assert_eq!(c.items[0].subject.as_deref(), Some("panda"));
        assert_eq!(c.items[1].style.as_deref(), Some("watercolor"));

        let c = plan_rule("a castle in the style of van gogh").unwrap();
        assert_eq!(c.items.last().unwrap().style.as_deref(), Some("van gogh"));

        let c = plan_rule("a boat rendered in oil painting style").unwrap();
        assert_eq!(
            c.items.last().unwrap().style.as_deref(),
            Some("oil painting")
        );
    }

    #[test]
    fn unparseable_prompt_falls_back_to_free_form() {
        let c = plan_rule("of the in with").unwrap();
        assert_eq!(kinds(&c), vec![ConstraintKind::FreeForm]);
        assert_eq!(
            c.items[0].question,
            "Does the image match the prompt: \"of the in with\"?"
        );
    }

    #[test]
    fn bare_color_reads_as_noun() {
        let c = plan_rule("A photo of an orange").unwrap();
        assert_eq!(kinds(&c), vec![ConstraintKind::ObjectPresence]);
        assert_eq!(c.items[0].subject.as_deref(), Some("orange"));
    }

    #[test]
    fn duplicate_mentions_collapse() {
        let c = plan_rule("a dog and a dog").unwrap();
        assert_eq!(kinds(&c), vec![ConstraintKind::ObjectPresence]);
    }

    #[test]
    fn every_item_validates_and_ids_are_contiguous() {
        let prompts = [
            "A photo of five pandas",
            "a red ball above a blue box and a sign that says \"hi\" in sketch style",
            "two wine glasses, a green bench and three butterflies",
        ];
        for p in prompts {
            let c = plan_rule(p).unwrap();
            c.validate().unwrap();
            for item in &c.items {
                validate_constraint(item).unwrap();
            }
        }
    }

    #[test]
    fn count_one_keeps_noun_verbatim() {
        let c = plan_rule("one bus").unwrap();
        assert_eq!(c.items[0].subject.as_deref(), Some("bus"));
        assert_eq!(c.items[1].count, Some(1));
    }

    #[test]
    fn plural_heads_singularize_under_counts() {
        for (prompt, subject) in [
            ("two buses", "bus"),
            ("three boxes", "box"),
            ("four butterflies", "butterfly"),
            ("two benches", "bench"),
            ("five ties", "tie"),
            ("two wine glasses", "wine glass"),
            ("three donkeys", "donkey"),
        ] {
            let c = plan_rule(prompt).unwrap();
            assert_eq!(c.items[0].subject.as_deref(), Some(subject), "for {prompt}");
        }
    }

    #[test]
    fn deterministic_across_calls() {
        let p = "a red ball above a blue box, two cats and a sign that says \"go\"";
        let a = serde_json::to_string(&plan_rule(p).unwrap()).unwrap();
        let b = serde_json::to_string(&plan_rule(p).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn presence_closure_holds() {
        let prompts = [
            "A photo of five pandas",
            "A photo of a yellow chair and an orange tv remote",
            "A photo of a tie right of a potted plant",
            "a red ball above a blue box and a sign that says \"hi\"",
        ];
        for p in prompts {
            let c = plan_rule(p).unwrap();
            for item in &c.items {
                for name in [item.subject.as_deref(), item.object.as_deref()]
                    .into_iter()
                    .flatten()
                {
                    let covered = c.items.iter().any(|other| {
                        other.id <= item.id
                            && other.kind == ConstraintKind::ObjectPresence
                            && other.subject.as_deref() == Some(name)
                    });
                    assert!(covered, "no presence at-or-before for `{name}` in `{p}`");
                }
            }
        }
    }
}
