//! Deterministic minimal-fix templates: for an unsatisfied constraint,
//! produce the structured ops (and a fixed surface sentence) that repair it
//! under exact editing.

use super::{eval_constraint, Scene, SimError, GRID};
use crate::core::{
    indefinite_article, pluralize, Constraint, ConstraintKind, EditInstruction, EditOp, Position,
    Relation,
};

/// Build the fix for a constraint the scene currently violates.
pub fn sim_refine_instruction(c: &Constraint, scene: &Scene) -> Result<EditInstruction, SimError> {
    if eval_constraint(scene, c)? {
        return Err(SimError::AlreadySatisfied { id: c.id });
    }

    let subject = c.subject.as_deref().unwrap_or_default();
    Ok(match c.kind {
        ConstraintKind::ObjectPresence => EditInstruction::new(
            format!("Add {} {subject}", indefinite_article(subject)),
            vec![add(subject, None, scene.first_free_interior_cell())],
        ),
        ConstraintKind::ObjectCount => {
            let want = c.count.expect("validated count constraint") as i64;
            let have = scene.count_of(subject) as i64;
            let deficit = want - have;
            let d = deficit.unsigned_abs();
            let noun = if d == 1 {
                subject.to_string()
            } else {
                pluralize(subject)
            };
            if deficit > 0 {
                let landings = landing_cells(scene, d);
                EditInstruction::new(
                    format!("Add {d} {noun} so there are exactly {want}"),
                    landings.into_iter().map(|p| add(subject, None, p)).collect(),
                )
            } else {
                EditInstruction::new(
                    format!("Remove {d} {noun} so there are exactly {want}"),
                    (0..d)
                        .map(|_| EditOp::Remove {
                            selector: subject.to_string(),
                        })
                        .collect(),
                )
            }
        }
        ConstraintKind::ColorBinding => {
            let color = c.color.as_deref().expect("validated color constraint");
            if scene.count_of(subject) > 0 {
                EditInstruction::new(
                    format!("Change the {subject} to {color}"),
                    vec![EditOp::SetColor {
                        selector: subject.to_string(),
                        color: color.to_string(),
                    }],
                )
            } else {
                EditInstruction::new(
                    format!("Add {} {color} {subject}", indefinite_article(color)),
                    vec![add(subject, Some(color), scene.first_free_interior_cell())],
                )
            }
        }
        ConstraintKind::SpatialRelation => spatial_fix(c, scene)?,
        ConstraintKind::TextContent => {
            let text = c.text.as_deref().expect("validated text constraint");
            let set_text = EditOp::SetText {
                selector: subject.to_string(),
                text: text.to_string(),
            };
            if scene.count_of(subject) > 0 {
                EditInstruction::new(format!("Make the {subject} read \"{text}\""), vec![set_text])
            } else {
                EditInstruction::new(
                    format!(
                        "Add {} {subject} that reads \"{text}\"",
                        indefinite_article(subject)
                    ),
                    vec![add(subject, None, scene.first_free_interior_cell()), set_text],
                )
            }
        }
        ConstraintKind::Style => {
            let style = c.style.as_deref().expect("validated style constraint");
            EditInstruction::new(
                format!("Render the image in {style} style"),
                vec![EditOp::SetStyle {
                    style: style.to_string(),
                }],
            )
        }
        ConstraintKind::FreeForm => return Err(SimError::UnsupportedKind(c.kind)),
    })
}

fn add(category: &str, color: Option<&str>, position: Option<Position>) -> EditOp {
    EditOp::Add {
        category: category.to_string(),
        color: color.map(str::to_string),
        position,
    }
}

/// Distinct free interior cells for `n` new objects, row-major. A `None`
/// entry (grid effectively full) defers to the editor's default placement.
fn landing_cells(scene: &Scene, n: u64) -> Vec<Option<Position>> {
    let mut picked: Vec<Position> = Vec::new();
    (0..n)
        .map(|_| {
            let cell = super::cell_scan(1, GRID - 2)
                .find(|p| !scene.is_occupied(*p) && !picked.contains(p));
            if let Some(p) = cell {
                picked.push(p);
            }
            cell
        })
        .collect()
}

/// The cell one step from `anchor` in the direction that makes
/// `subject rel anchor` hold, clamped to the grid. Clamping at the border
/// can land on an unsatisfying cell; callers that need guaranteed success
/// keep anchors away from the border.
fn step_cell(anchor: Position, rel: Relation) -> Position {
    let p = match rel {
        Relation::LeftOf => Position::new(anchor.x - 1, anchor.y),
        Relation::RightOf => Position::new(anchor.x + 1, anchor.y),
        Relation::Above => Position::new(anchor.x, anchor.y + 1),
        Relation::Below => Position::new(anchor.x, anchor.y - 1),
    };
    super::clamp_to_grid(p)
}

fn spatial_fix(c: &Constraint, scene: &Scene) -> Result<EditInstruction, SimError> {
    let subject = c.subject.as_deref().expect("validated spatial constraint");
    let object = c.object.as_deref().expect("validated spatial constraint");
    let rel = c.relation.expect("validated spatial constraint");
    let phrase = rel.phrase();

    let subject_anchor = scene.lowest_oid_of(subject).map(|o| o.position);
    let object_anchor = scene.lowest_oid_of(object).map(|o| o.position);

    Ok(match (subject_anchor, object_anchor) {
        (Some(_), Some(at)) => EditInstruction::new(
            format!("Move the {subject} {phrase} the {object}"),
            vec![EditOp::Move {
                selector: subject.to_string(),
                position: step_cell(at, rel),
            }],
        ),
        (None, Some(at)) => EditInstruction::new(
            format!("Add {} {subject} {phrase} the {object}", indefinite_article(subject)),
            vec![add(subject, None, Some(step_cell(at, rel)))],
        ),
        (Some(at), None) => EditInstruction::new(
            format!("Add {} {object}", indefinite_article(object)),
            // Place the object so the subject already sits in relation to
            // it: one step in the inverse direction.
            vec![add(object, None, Some(step_cell(at, rel.inverse())))],
        ),
        (None, None) => {
            let base = scene.first_free_interior_cell().ok_or(SimError::GridFull)?;
            EditInstruction::new(
                format!(
                    "Add {} {subject} and {} {object}",
                    indefinite_article(subject),
                    indefinite_article(object)
                ),
                vec![
                    add(object, None, Some(base)),
                    add(subject, None, Some(step_cell(base, rel))),
                ],
            )
        }
    })
}

/// Keep a margin from the border when building scenes so every spatial fix
/// has room to step without clamping.
pub(crate) const SAFE_MARGIN: i32 = 2;

pub(crate) fn interior_bounds() -> std::ops::RangeInclusive<i32> {
    SAFE_MARGIN..=(GRID - 1 - SAFE_MARGIN)
}
