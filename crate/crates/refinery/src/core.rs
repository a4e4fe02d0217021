//! Shared domain types: constraints, checklists, checker verdicts, edit
//! instructions, image references, and loop configuration.
//!
//! Everything here is plain data with canonical serde shapes. The only
//! behavior is validation (kind/field consistency, id contiguity, budget
//! sanity) and a few constructors that render the standard yes/no question
//! for each constraint kind so that every construction path produces the
//! same checklist text.

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// The closed color vocabulary. Color fields on constraints, scene objects,
/// and edit operations must draw from this list.
pub const COLORS: [&str; 11] = [
    "red", "orange", "yellow", "green", "blue", "purple", "pink", "brown", "black", "white",
    "gray",
];

/// True if `word` is a member of the closed color vocabulary.
pub fn is_color(word: &str) -> bool {
    COLORS.contains(&word)
}

/// Sentinel color for scene objects whose color was never specified.
pub const UNCOLORED: &str = "uncolored";

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

/// Validation failures for the domain types in this module.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum CoreError {
    /// A constraint carries a field that its kind forbids, or is missing one
    /// that its kind requires.
    #[error("constraint {id} ({kind}): field `{field}` {problem}")]
    KindFieldMismatch {
        id: u32,
        kind: ConstraintKind,
        field: &'static str,
        problem: FieldProblem,
    },
    /// A checklist must contain at least one item.
    #[error("checklist has no items")]
    EmptyChecklist,
    /// Checklist ids must be 1..=n in order.
    #[error("checklist ids must be contiguous from 1; item at index {index} has id {id}")]
    NonContiguousIds { index: usize, id: u32 },
    /// A `reason` is required whenever a check fails.
    #[error("failed check result has an empty reason")]
    EmptyReason,
    /// An edit instruction needs human-readable surface text.
    #[error("edit instruction has an empty surface")]
    EmptySurface,
    /// A color field referenced a word outside the closed vocabulary.
    #[error("`{word}` is not in the color vocabulary")]
    UnknownColor { word: String },
    /// Loop budgets must permit at least one pass.
    #[error("invalid refine config: {detail}")]
    InvalidConfig { detail: &'static str },
    /// An image digest must be 64 lowercase hex characters (sha-256).
    #[error("image digest `{digest}` is not a lowercase sha-256 hex string")]
    BadDigest { digest: String },
}

/// What exactly is wrong with a constraint field.
#[derive(Debug, PartialEq, Eq)]
pub enum FieldProblem {
    Missing,
    Forbidden,
    Invalid(String),
}

impl fmt::Display for FieldProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldProblem::Missing => write!(f, "is required but missing"),
            FieldProblem::Forbidden => write!(f, "is not allowed for this kind"),
            FieldProblem::Invalid(detail) => write!(f, "is invalid: {detail}"),
        }
    }
}

// ---------------------------------------------------------------------------
// Constraints
// ---------------------------------------------------------------------------

/// The seven categories of verifiable constraint a prompt can decompose into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    /// An object of some category must appear at least once.
    ObjectPresence,
    /// Exactly `count` objects of the category must appear.
    ObjectCount,
    /// At least one object of the category must have the given color.
    ColorBinding,
    /// One category must sit in a spatial relation to another.
    SpatialRelation,
    /// An object must carry exact text.
    TextContent,
    /// The whole image must be rendered in a named style.
    Style,
    /// A constraint the structured vocabulary cannot express; checked
    /// holistically by an agent, never by the simulator oracle.
    FreeForm,
}

impl ConstraintKind {
    /// Sort rank used for checklist ordering: presence checks run first so
    /// that later attribute checks have something to bind to.
    pub fn order_rank(self) -> u8 {
        match self {
            ConstraintKind::ObjectPresence => 0,
            ConstraintKind::ColorBinding => 1,
            ConstraintKind::ObjectCount => 2,
            ConstraintKind::SpatialRelation => 3,
            ConstraintKind::TextContent => 4,
            ConstraintKind::Style => 5,
            ConstraintKind::FreeForm => 6,
        }
    }
}

impl ConstraintKind {
    /// The snake_case name used on the wire.
    pub fn name(self) -> &'static str {
        match self {
            ConstraintKind::ObjectPresence => "object_presence",
            ConstraintKind::ObjectCount => "object_count",
            ConstraintKind::ColorBinding => "color_binding",
            ConstraintKind::SpatialRelation => "spatial_relation",
            ConstraintKind::TextContent => "text_content",
            ConstraintKind::Style => "style",
            ConstraintKind::FreeForm => "free_form",
        }
    }
}

impl fmt::Display for ConstraintKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Spatial relations between two object categories, evaluated on centroids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Relation {
    LeftOf,
    RightOf,
    Above,
    Below,
}

impl Relation {
    /// English phrase used when rendering questions and edit surfaces.
    pub fn phrase(self) -> &'static str {
        match self {
            Relation::LeftOf => "to the left of",
            Relation::RightOf => "to the right of",
            Relation::Above => "above",
            Relation::Below => "below",
        }
    }

    /// The relation with subject and object swapped.
    pub fn inverse(self) -> Relation {
        match self {
            Relation::LeftOf => Relation::RightOf,
            Relation::RightOf => Relation::LeftOf,
            Relation::Above => Relation::Below,
            Relation::Below => Relation::Above,
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Relation::LeftOf => "left-of",
            Relation::RightOf => "right-of",
            Relation::Above => "above",
            Relation::Below => "below",
        };
        f.write_str(name)
    }
}

/// A grid position. Serialized as a `[x, y]` pair; `x` grows rightward and
/// `y` grows upward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "(i32, i32)", into = "(i32, i32)")]
pub struct Position {
    pub x: i32,
    pub y: i32,
}

impl Position {
    pub fn new(x: i32, y: i32) -> Self {
        Position { x, y }
    }
}

impl From<(i32, i32)> for Position {
    fn from((x, y): (i32, i32)) -> Self {
        Position { x, y }
    }
}

impl From<Position> for (i32, i32) {
    fn from(p: Position) -> Self {
        (p.x, p.y)
    }
}

/// One verifiable item on a checklist. Which optional fields are populated
/// depends on `kind`; [`validate_constraint`] enforces the pairing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    /// 1-based position in the checklist.
    pub id: u32,
    pub kind: ConstraintKind,
    /// Object category the constraint is about (absent for style/free-form).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject: Option<String>,
    /// Second category for spatial relations.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub color: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relation: Option<Relation>,
    /// Exact text an object must carry.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub style: Option<String>,
    /// The yes/no question a checker answers for this item.
    pub question: String,
}

impl Constraint {
    fn blank(id: u32, kind: ConstraintKind, question: String) -> Self {
        Constraint {
            id,
            kind,
            subject: None,
            object: None,
            color: None,
            count: None,
            relation: None,
            text: None,
            style: None,
            question,
        }
    }

    /// "Is there a panda?"
    pub fn presence(id: u32, subject: &str) -> Self {
        let question = format!("Is there {} {subject}?", indefinite_article(subject));
        let mut c = Self::blank(id, ConstraintKind::ObjectPresence, question);
        c.subject = Some(subject.to_string());
        c
    }

    /// "Are there exactly 5 pandas?"
    pub fn count(id: u32, subject: &str, count: u32) -> Self {
        let noun = if count == 1 {
            subject.to_string()
        } else {
            pluralize(subject)
        };
        let question = format!("Are there exactly {count} {noun}?");
        let mut c = Self::blank(id, ConstraintKind::ObjectCount, question);
        c.subject = Some(subject.to_string());
        c.count = Some(count);
        c
    }

    /// "Is the chair yellow?"
    pub fn color(id: u32, subject: &str, color: &str) -> Self {
        let question = format!("Is the {subject} {color}?");
        let mut c = Self::blank(id, ConstraintKind::ColorBinding, question);
        c.subject = Some(subject.to_string());
        c.color = Some(color.to_string());
        c
    }

    /// "Is the tie to the right of the potted plant?"
    pub fn spatial(id: u32, subject: &str, relation: Relation, object: &str) -> Self {
        let question = format!("Is the {subject} {} the {object}?", relation.phrase());
        let mut c = Self::blank(id, ConstraintKind::SpatialRelation, question);
        c.subject = Some(subject.to_string());
        c.object = Some(object.to_string());
        c.relation = Some(relation);
        c
    }

    /// "Does the sign read \"open\"?"
    pub fn text(id: u32, subject: &str, text: &str) -> Self {
        let question = format!("Does the {subject} read \"{text}\"?");
        let mut c = Self::blank(id, ConstraintKind::TextContent, question);
        c.subject = Some(subject.to_string());
        c.text = Some(text.to_string());
        c
    }

    /// "Is the image in watercolor style?"
    pub fn style(id: u32, style: &str) -> Self {
        let question = format!("Is the image in {style} style?");
        let mut c = Self::blank(id, ConstraintKind::Style, question);
        c.style = Some(style.to_string());
        c
    }

    /// A holistic catch-all item carrying its question verbatim.
    pub fn free_form(id: u32, question: &str) -> Self {
        Self::blank(id, ConstraintKind::FreeForm, question.to_string())
    }
}

/// Check that exactly the fields required by `constraint.kind` are present
/// and valid, and that no forbidden field is set.
pub fn validate_constraint(constraint: &Constraint) -> Result<(), CoreError> {
    use ConstraintKind::*;

    let id = constraint.id;
    let kind = constraint.kind;
    let mismatch = |field: &'static str, problem: FieldProblem| CoreError::KindFieldMismatch {
        id,
        kind,
        field,
        problem,
    };

    // Which optional fields each kind requires. Everything not required is
    // forbidden, except `subject`/`object` which some kinds simply ignore is
    // not the model here: the pairing is exact in both directions.
    let required: &[&str] = match kind {
        ObjectPresence => &["subject"],
        ObjectCount => &["subject", "count"],
        ColorBinding => &["subject", "color"],
        SpatialRelation => &["subject", "object", "relation"],
        TextContent => &["subject", "text"],
        Style => &["style"],
        FreeForm => &[],
    };

    let fields: [(&'static str, bool); 7] = [
        ("subject", constraint.subject.is_some()),
        ("object", constraint.object.is_some()),
        ("color", constraint.color.is_some()),
        ("count", constraint.count.is_some()),
        ("relation", constraint.relation.is_some()),
        ("text", constraint.text.is_some()),
        ("style", constraint.style.is_some()),
    ];
    for (name, present) in fields {
        let needed = required.contains(&name);
        if needed && !present {
            return Err(mismatch(name, FieldProblem::Missing));
        }
        if !needed && present {
            return Err(mismatch(name, FieldProblem::Forbidden));
        }
    }

    if let Some(color) = &constraint.color {
        if !is_color(color) {
            return Err(mismatch(
                "color",
                FieldProblem::Invalid(format!("`{color}` is not in the color vocabulary")),
            ));
        }
    }
    if constraint.count == Some(0) {
        return Err(mismatch(
            "count",
            FieldProblem::Invalid("count must be at least 1".to_string()),
        ));
    }
    if constraint.question.trim().is_empty() {
        return Err(mismatch(
            "question",
            FieldProblem::Invalid("question text is empty".to_string()),
        ));
    }
    Ok(())
}

/// An ordered checklist decomposed from a prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checklist {
    /// The prompt this checklist was decomposed from.
    pub prompt: String,
    pub items: Vec<Constraint>,
}

impl Checklist {
    pub fn new(prompt: &str, items: Vec<Constraint>) -> Self {
        Checklist {
            prompt: prompt.to_string(),
            items,
        }
    }

    /// Validate every item plus the checklist-level invariants: non-empty,
    /// ids contiguous from 1 in order.
    pub fn validate(&self) -> Result<(), CoreError> {
        if self.items.is_empty() {
            return Err(CoreError::EmptyChecklist);
        }
        for (index, item) in self.items.iter().enumerate() {
            if item.id != (index as u32) + 1 {
                return Err(CoreError::NonContiguousIds { index, id: item.id });
            }
            validate_constraint(item)?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

// ---------------------------------------------------------------------------
// Checker and verifier outputs
// ---------------------------------------------------------------------------

/// The checker's fused verdict for one constraint. On failure, `reason` is
/// an actionable edit instruction, not just a diagnosis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckResult {
    pub passed: bool,
    pub reason: String,
}

impl CheckResult {
    pub fn pass() -> Self {
        CheckResult {
            passed: true,
            reason: String::new(),
        }
    }

    pub fn fail(reason: impl Into<String>) -> Self {
        CheckResult {
            passed: false,
            reason: reason.into(),
        }
    }

    /// A failed check must say how to fix the image.
    pub fn validate(&self) -> Result<(), CoreError> {
        if !self.passed && self.reason.trim().is_empty() {
            return Err(CoreError::EmptyReason);
        }
        Ok(())
    }
}

/// The verifier's three-way comparison of a candidate against the incumbent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Better,
    Worse,
    Same,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Verdict::Better => "better",
            Verdict::Worse => "worse",
            Verdict::Same => "same",
        };
        f.write_str(name)
    }
}

// ---------------------------------------------------------------------------
// Edit instructions
// ---------------------------------------------------------------------------

/// A structured scene edit. Remote editors see only the surface text; the
/// simulator editor executes the ops.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum EditOp {
    /// Insert a new object of `category`, optionally colored and placed.
    Add {
        category: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        color: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        position: Option<Position>,
    },
    /// Delete one object matching the category selector.
    Remove { selector: String },
    /// Recolor one object matching the selector.
    SetColor { selector: String, color: String },
    /// Move one object matching the selector.
    Move { selector: String, position: Position },
    /// Replace the text carried by one object matching the selector.
    SetText { selector: String, text: String },
    /// Restyle the whole image.
    SetStyle { style: String },
}

/// What the editor is asked to do: readable surface text for language-model
/// editors, plus optional structured ops for the simulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditInstruction {
    /// Human-readable instruction, e.g. "Add 1 panda so there are exactly 5".
    pub surface: String,
    /// Structured equivalent of `surface`; may be empty for remote editors.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ops: Vec<EditOp>,
}

impl EditInstruction {
    pub fn new(surface: impl Into<String>, ops: Vec<EditOp>) -> Self {
        EditInstruction {
            surface: surface.into(),
            ops,
        }
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        if self.surface.trim().is_empty() {
            return Err(CoreError::EmptySurface);
        }
        for op in &self.ops {
            let color = match op {
                EditOp::Add {
                    color: Some(color), ..
                } => Some(color),
                EditOp::SetColor { color, .. } => Some(color),
                _ => None,
            };
            if let Some(color) = color {
                if !is_color(color) {
                    return Err(CoreError::UnknownColor {
                        word: color.clone(),
                    });
                }
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Image references
// ---------------------------------------------------------------------------

/// How an [`ImageRef`] locator should be resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImageMode {
    /// `locator` is a filesystem path to encoded image bytes.
    File,
    /// `locator` is a key into the in-process scene store.
    Scene,
}

/// An immutable handle to one image state. Edits never mutate in place; they
/// produce a new reference with a new digest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageRef {
    pub mode: ImageMode,
    /// Path (file mode) or store key (scene mode).
    pub locator: String,
    /// Lowercase sha-256 hex digest of the canonical content. Two refs with
    /// equal digests are the same image.
    pub digest: String,
}

impl ImageRef {
    pub fn scene(locator: impl Into<String>, digest: impl Into<String>) -> Self {
        ImageRef {
            mode: ImageMode::Scene,
            locator: locator.into(),
            digest: digest.into(),
        }
    }

    pub fn file(locator: impl Into<String>, digest: impl Into<String>) -> Self {
        ImageRef {
            mode: ImageMode::File,
            locator: locator.into(),
            digest: digest.into(),
        }
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        let ok = self.digest.len() == 64
            && self
                .digest
                .bytes()
                .all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b));
        if ok {
            Ok(())
        } else {
            Err(CoreError::BadDigest {
                digest: self.digest.clone(),
            })
        }
    }
}

/// Lowercase sha-256 hex digest of raw bytes — the digest convention used by
/// every [`ImageRef`] in the system.
pub fn digest_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(bytes))
}

// ---------------------------------------------------------------------------
// Loop configuration
// ---------------------------------------------------------------------------

/// Budgets and thresholds for the refinement loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefineConfig {
    /// Maximum full sweeps over the checklist.
    pub max_rounds: u32,
    /// Edit attempts per failed constraint per sweep before it is skipped.
    pub retry_budget_k: u32,
    /// Score margin for the scoring verifier: a candidate must beat the
    /// incumbent by more than this to count as better.
    pub verifier_epsilon: f64,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig {
            max_rounds: 5,
            retry_budget_k: 2,
            verifier_epsilon: 0.0,
        }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<(), CoreError> {
        if self.max_rounds == 0 {
            return Err(CoreError::InvalidConfig {
                detail: "max_rounds must be at least 1",
            });
        }
        if self.retry_budget_k == 0 {
            return Err(CoreError::InvalidConfig {
                detail: "retry_budget_k must be at least 1",
            });
        }
        if !(self.verifier_epsilon >= 0.0) || self.verifier_epsilon >= 1.0 {
            return Err(CoreError::InvalidConfig {
                detail: "verifier_epsilon must be in [0, 1)",
            });
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Word helpers
// ---------------------------------------------------------------------------

/// "a" or "an", chosen by the first letter of the following word.
pub fn indefinite_article(word: &str) -> &'static str {
    match word.chars().next() {
        Some('a' | 'e' | 'i' | 'o' | 'u') => "an",
        _ => "a",
    }
}

/// Naive English pluralization, good enough for the object-category nouns
/// used here. Operates on the head noun (last word) of a phrase.
pub fn pluralize(noun: &str) -> String {
    let (head_start, head) = match noun.rfind(' ') {
        Some(i) => (i + 1, &noun[i + 1..]),
        None => (0, noun),
    };
    let plural_head = if head.ends_with('s')
        || head.ends_with('x')
        || head.ends_with('z')
        || head.ends_with("ch")
        || head.ends_with("sh")
    {
        format!("{head}es")
    } else if let Some(stem) = head.strip_suffix('y') {
        let before = stem.chars().last();
        match before {
            Some('a' | 'e' | 'i' | 'o' | 'u') | None => format!("{head}s"),
            _ => format!("{stem}ies"),
        }
    } else {
        format!("{head}s")
    };
    format!("{}{}", &noun[..head_start], plural_head)
}
