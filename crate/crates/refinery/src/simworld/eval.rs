//! The constraint oracle: exact, total (over non-free-form kinds), pure.

use super::{Scene, SimError};
use crate::core::{Checklist, Constraint, ConstraintKind, Relation};

/// Evaluate one constraint against a scene. Free-form constraints are not
/// oracle-evaluable and return an error.
pub fn eval_constraint(scene: &Scene, c: &Constraint) -> Result<bool, SimError> {
    let subject = || c.subject.as_deref().unwrap_or_default();
    Ok(match c.kind {
        ConstraintKind::ObjectPresence => scene.count_of(subject()) > 0,
        ConstraintKind::ObjectCount => {
            scene.count_of(subject()) == c.count.unwrap_or_default() as usize
        }
        ConstraintKind::ColorBinding => {
            let want = c.color.as_deref().unwrap_or_default();
            scene
                .objects
                .iter()
                .any(|o| o.category == subject() && o.color == want)
        }
        ConstraintKind::SpatialRelation => {
            let object = c.object.as_deref().unwrap_or_default();
            let (Some(s), Some(o)) = (scene.lowest_oid_of(subject()), scene.lowest_oid_of(object))
            else {
                return Ok(false);
            };
            // Strict inequalities: boundary-touching (equal coordinate)
            // never satisfies.
            match c.relation.expect("validated spatial constraint") {
                Relation::LeftOf => s.position.x < o.position.x,
                Relation::RightOf => s.position.x > o.position.x,
                Relation::Above => s.position.y > o.position.y,
                Relation::Below => s.position.y < o.position.y,
            }
        }
        ConstraintKind::TextContent => {
            let want = c.text.as_deref().unwrap_or_default();
            scene.objects.iter().any(|o| o.text.as_deref() == Some(want))
        }
        ConstraintKind::Style => scene.style == c.style.as_deref().unwrap_or_default(),
        ConstraintKind::FreeForm => return Err(SimError::UnsupportedKind(c.kind)),
    })
}

/// Fraction of evaluable (non-free-form) constraints the scene satisfies.
pub fn alignment_score(scene: &Scene, checklist: &Checklist) -> Result<f64, SimError> {
    let mut evaluable = 0u32;
    let mut satisfied = 0u32;
    for item in &checklist.items {
        if item.kind == ConstraintKind::FreeForm {
            continue;
        }
        evaluable += 1;
        if eval_constraint(scene, item)? {
            satisfied += 1;
        }
    }
    if evaluable == 0 {
        return Err(SimError::NoEvaluableConstraints);
    }
    Ok(f64::from(satisfied) / f64::from(evaluable))
}
