//! Grammar-template prompt generator for simulator corpora.
//!
//! Every template is built from vocabulary the rule planner parses
//! losslessly, so generated prompts always yield fully evaluable
//! checklists (no free-form fallbacks).

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use refinery::core::{indefinite_article, pluralize, COLORS};

/// Categories with regular plurals that never collide with grammar
/// keywords (colors, numerals, relations, style markers).
pub const NOUNS: [&str; 20] = [
    "panda", "chair", "dog", "cat", "tie", "sign", "book", "table", "lamp", "cup", "balloon",
    "bench", "bird", "car", "tree", "house", "flower", "bottle", "clock", "boat",
];

pub const STYLES: [&str; 4] = ["watercolor", "sketch", "cartoon", "oil"];

pub const TEXTS: [&str; 4] = ["open", "go", "stop", "hi"];

const COUNT_WORDS: [&str; 4] = ["two", "three", "four", "five"];

const RELATIONS: [&str; 4] = ["left of", "right of", "above", "below"];

/// Number of distinct prompt shapes.
pub const TEMPLATE_COUNT: usize = 8;

/// Draw one prompt from a random template.
pub fn generate_prompt(rng: &mut ChaCha8Rng) -> String {
    let template = rng.gen_range(0..TEMPLATE_COUNT);
    prompt_from_template(template, rng)
}

/// Render a specific template with random vocabulary. Templates cover one
/// constraint kind each plus three mixed shapes:
/// presence, count, color, color pair, spatial, count+color, text, style.
pub fn prompt_from_template(template: usize, rng: &mut ChaCha8Rng) -> String {
    let noun = pick(&NOUNS, rng);
    match template % TEMPLATE_COUNT {
        0 => format!("A photo of {} {noun}", indefinite_article(noun)),
        1 => {
            let count = pick(&COUNT_WORDS, rng);
            format!("A photo of {count} {}", pluralize(noun))
        }
        2 => {
            let color = pick(&COLORS, rng);
            format!("A photo of {} {color} {noun}", indefinite_article(color))
        }
        3 => {
            let other = second_noun(noun, rng);
            let color = pick(&COLORS, rng);
            format!(
                "A photo of {} {noun} and {} {color} {other}",
                indefinite_article(noun),
                indefinite_article(color)
            )
        }
        4 => {
            let other = second_noun(noun, rng);
            let relation = pick(&RELATIONS, rng);
            format!(
                "A photo of {} {noun} {relation} {} {other}",
                indefinite_article(noun),
                indefinite_article(other)
            )
        }
        5 => {
            let other = second_noun(noun, rng);
            let count = pick(&COUNT_WORDS, rng);
            let color = pick(&COLORS, rng);
            format!(
                "A photo of {count} {} and {} {color} {other}",
                pluralize(noun),
                indefinite_article(color)
            )
        }
        6 => {
            let text = pick(&TEXTS, rng);
            format!("{} {noun} that says \"{text}\"", indefinite_article(noun))
        }
        _ => {
            let style = pick(&STYLES, rng);
            format!("A photo of {} {noun} in {style} style", indefinite_article(noun))
        }
    }
}

fn pick<'a>(table: &'a [&'a str], rng: &mut ChaCha8Rng) -> &'a str {
    table[rng.gen_range(0..table.len())]
}

/// A noun guaranteed different from `first`.
fn second_noun(first: &str, rng: &mut ChaCha8Rng) -> &'static str {
    loop {
        let candidate = NOUNS[rng.gen_range(0..NOUNS.len())];
        if candidate != first {
            return candidate;
        }
    }
}
