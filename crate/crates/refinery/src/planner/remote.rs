//! Remote planning: send the planner instruction plus the user prompt to a
//! text backend, split the reply into numbered list items, and classify
//! each item into a constraint by keyword heuristics. Lines the heuristics
//! cannot structure become free-form constraints; the model's own wording
//! is always kept as the question.

use super::grammar::{scan_noun_runs, singularize_phrase, tokenize_line};
use super::lexicon::GrammarLexicons;
use super::PlanError;
use crate::backends::{prompts, BackendError, PlannerBackend};
use crate::core::{validate_constraint, Checklist, Constraint};

/// Plan through a remote backend. The response must contain at least one
/// numbered item ("1. ...", "2) ...", inline or one per line).
pub fn plan_remote(prompt: &str, backend: &dyn PlannerBackend) -> Result<Checklist, PlanError> {
    if prompt.trim().is_empty() {
        return Err(PlanError::EmptyPrompt);
    }
    let request_text = format!("{}\n\nUser prompt: {prompt}", prompts::PLANNER);
    let response = backend.complete(&request_text).map_err(|e| match e {
        BackendError::Unparseable(detail) => PlanError::UnparseableResponse(detail),
        other => PlanError::BackendUnreachable(other.to_string()),
    })?;

    let lines = split_numbered_items(&response);
    if lines.is_empty() {
        return Err(PlanError::UnparseableResponse(format!(
            "no numbered list items in: {}",
            response.chars().take(200).collect::<String>()
        )));
    }

    let items = lines
        .iter()
        .enumerate()
        .map(|(index, line)| classify_line(line, (index as u32) + 1))
        .collect();
    let checklist = Checklist::new(prompt, items);
    checklist
        .validate()
        .map_err(|e| PlanError::UnparseableResponse(e.to_string()))?;
    Ok(checklist)
}

/// Split "1. foo 2. bar" or one-item-per-line responses into item texts.
/// A marker is a run of digits followed by `.` or `)` at the start of a
/// line or after whitespace.
fn split_numbered_items(response: &str) -> Vec<String> {
    let bytes = response.as_bytes();
    let mut marker_spans: Vec<(usize, usize)> = Vec::new(); // (start, end) of marker
    let mut i = 0;
    while i < bytes.len() {
        let at_boundary = i == 0 || bytes[i - 1].is_ascii_whitespace();
        if at_boundary && bytes[i].is_ascii_digit() {
            let mut j = i;
            while j < bytes.len() && bytes[j].is_ascii_digit() {
                j += 1;
            }
            if j < bytes.len() && (bytes[j] == b'.' || bytes[j] == b')') {
                marker_spans.push((i, j + 1));
                i = j + 1;
                continue;
            }
            i = j;
            continue;
        }
        i += 1;
    }

    let mut items = Vec::new();
    for (idx, &(_, text_start)) in marker_spans.iter().enumerate() {
        let text_end = marker_spans
            .get(idx + 1)
            .map(|&(next_start, _)| next_start)
            .unwrap_or(response.len());
        let text = response[text_start..text_end].trim();
        if !text.is_empty() {
            items.push(text.to_string());
        }
    }
    items
}

/// Classify one checklist line. Keyword cascade: numeral+noun → count;
/// color token → color binding; relation phrase → spatial; quoted literal →
/// text; the word "style" → style; "is there ..." → presence; else
/// free-form. The line itself (as the model wrote it) is the question.
pub fn classify_line(line: &str, id: u32) -> Constraint {
    let lex = GrammarLexicons::standard();
    let (owned_tokens, quotes) = tokenize_line(line);
    let tokens: Vec<&str> = owned_tokens.iter().map(|s| s.as_str()).collect();

    let structured = try_classify(&tokens, &quotes, lex);
    match structured {
        Some(mut c) => {
            c.id = id;
            c.question = line.trim().to_string();
            if validate_constraint(&c).is_ok() {
                c
            } else {
                Constraint::free_form(id, line.trim())
            }
        }
        None => Constraint::free_form(id, line.trim()),
    }
}

fn try_classify(tokens: &[&str], quotes: &[String], lex: &GrammarLexicons) -> Option<Constraint> {
    let scanned = scan_noun_runs(tokens, lex);
    let first_noun = scanned.nouns.first().cloned();

    // Count: a numeral somewhere plus a noun to count.
    if let Some(n) = tokens.iter().find_map(|t| lex.numeral(t)) {
        let noun = noun_after(tokens, |t| lex.numeral(t).is_some(), lex)
            .or_else(|| first_noun.clone())?;
        let noun = if n > 1 { singularize_phrase(&noun) } else { noun };
        return Some(Constraint::count(0, &noun, n));
    }

    // Color binding: a color token plus a noun (after it if possible, as in
    // "a red ball"; otherwise before it, as in "is the ball red").
    if let Some(color) = tokens.iter().find(|t| lex.is_color(t)).copied() {
        let noun = noun_after(tokens, |t| lex.is_color(t), lex).or_else(|| first_noun.clone())?;
        return Some(Constraint::color(0, &noun, color));
    }

    // Spatial: relation phrase with nouns on both sides.
    for i in 0..tokens.len() {
        if let Some((rel, len)) = lex.relation_at(tokens, i) {
            let left = scan_noun_runs(&tokens[..i], lex).nouns.last().cloned()?;
            let right = scan_noun_runs(&tokens[i + len..], lex).nouns.first().cloned()?;
            return Some(Constraint::spatial(0, &left, rel, &right));
        }
    }

    // Text content: a quoted literal, carried by the nearest noun.
    if let Some(text) = quotes.first() {
        let noun = first_noun.clone()?;
        return Some(Constraint::text(0, &noun, text));
    }

    // Style: the word "style"; the value is the run just before it, or
    // after "style of".
    if let Some(pos) = tokens.iter().position(|t| *t == "style") {
        if tokens.get(pos + 1) == Some(&"of") && pos + 2 < tokens.len() {
            return Some(Constraint::style(0, &tokens[pos + 2..].join(" ")));
        }
        let mut start = pos;
        while start > 0 && !lex.is_reserved(tokens[start - 1]) {
            start -= 1;
        }
        if start < pos {
            return Some(Constraint::style(0, &tokens[start..pos].join(" ")));
        }
        return None;
    }

    // Presence: "is there a panda?"-shaped lines.
    if tokens.windows(2).any(|w| w == ["is", "there"]) {
        return Some(Constraint::presence(0, &first_noun?));
    }

    None
}

/// First noun phrase that starts strictly after the first token matching
/// `marker`.
fn noun_after(tokens: &[&str], marker: impl Fn(&str) -> bool, lex: &GrammarLexicons) -> Option<String> {
    let pos = tokens.iter().position(|t| marker(t))?;
    scan_noun_runs(&tokens[pos + 1..], lex).nouns.first().cloned()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::{ConstraintKind, Relation};

    struct CannedBackend(&'static str);

    impl PlannerBackend for CannedBackend {
        fn complete(&self, _prompt_text: &str) -> Result<String, BackendError> {
            Ok(self.0.to_string())
        }
    }

    struct DeadBackend;

    impl PlannerBackend for DeadBackend {
        fn complete(&self, _prompt_text: &str) -> Result<String, BackendError> {
            Err(BackendError::Unreachable("connection refused".to_string()))
        }
    }

    #[test]
    fn inline_numbered_fixture_classifies_presence_then_count() {
        let backend = CannedBackend("1. Is there a panda? 2. Are there exactly five pandas?");
        let c = plan_remote("A photo of five pandas", &backend).unwrap();
        assert_eq!(c.items.len(), 2);
        assert_eq!(c.items[0].kind, ConstraintKind::ObjectPresence);
        assert_eq!(c.items[0].subject.as_deref(), Some("panda"));
        assert_eq!(c.items[0].question, "Is there a panda?");
        assert_eq!(c.items[1].kind, ConstraintKind::ObjectCount);
        assert_eq!(c.items[1].subject.as_deref(), Some("panda"));
        assert_eq!(c.items[1].count, Some(5));
        assert_eq!(c.items[1].question, "Are there exactly five pandas?");
    }

    #[test]
    fn prose_without_numbers_is_unparseable() {
        let backend = CannedBackend("I think the image should contain a panda and be nice.");
        assert!(matches!(
            plan_remote("p", &backend),
            Err(PlanError::UnparseableResponse(_))
        ));
    }

    #[test]
    fn single_catch_all_line_becomes_free_form() {
        let backend = CannedBackend("1. Does the image match the prompt?");
        let c = plan_remote("p", &backend).unwrap();
        assert_eq!(c.items.len(), 1);
        assert_eq!(c.items[0].kind, ConstraintKind::FreeForm);
    }

    #[test]
    fn unreachable_backend_propagates() {
        assert!(matches!(
            plan_remote("p", &DeadBackend),
            Err(PlanError::BackendUnreachable(_))
        ));
    }

    #[test]
    fn per_line_classification_covers_all_kinds() {
        let cases: Vec<(&str, ConstraintKind)> = vec![
            ("Is there a panda?", ConstraintKind::ObjectPresence),
            ("Are there exactly 3 boxes?", ConstraintKind::ObjectCount),
            ("Is the chair yellow?", ConstraintKind::ColorBinding),
            (
                "Is the tie to the right of the potted plant?",
                ConstraintKind::SpatialRelation,
            ),
            ("Does the sign say \"open\"?", ConstraintKind::TextContent),
            ("Is the image in watercolor style?", ConstraintKind::Style),
            ("Is the mood cheerful?", ConstraintKind::FreeForm),
        ];
        for (line, want) in cases {
            let c = classify_line(line, 1);
            assert_eq!(c.kind, want, "line: {line}");
            assert_eq!(c.question, line);
            validate_constraint(&c).unwrap();
        }
    }

    #[test]
    fn classified_fields_extract() {
        let c = classify_line("Are there exactly 3 boxes?", 1);
        assert_eq!(c.subject.as_deref(), Some("box"));
        assert_eq!(c.count, Some(3));

        let c = classify_line("Is the chair yellow?", 1);
        assert_eq!(c.subject.as_deref(), Some("chair"));
        assert_eq!(c.color.as_deref(), Some("yellow"));

        let c = classify_line("Is the tie to the right of the potted plant?", 1);
        assert_eq!(c.subject.as_deref(), Some("tie"));
        assert_eq!(c.relation, Some(Relation::RightOf));
        assert_eq!(c.object.as_deref(), Some("potted plant"));

        let c = classify_line("Does the sign say \"open\"?", 1);
        assert_eq!(c.subject.as_deref(), Some("sign"));
        assert_eq!(c.text.as_deref(), Some("open"));

        let c = classify_line("Is the image in watercolor style?", 1);
        assert_eq!(c.style.as_deref(), Some("watercolor"));
    }

    #[test]
    fn multiline_numbering_also_parses() {
        let backend = CannedBackend("Here is the checklist:\n1) Is there a dog?\n2) Is the dog red?\n");
        let c = plan_remote("a red dog", &backend).unwrap();
        assert_eq!(c.items.len(), 2);
        assert_eq!(c.items[0].kind, ConstraintKind::ObjectPresence);
        assert_eq!(c.items[1].kind, ConstraintKind::ColorBinding);
    }
}
