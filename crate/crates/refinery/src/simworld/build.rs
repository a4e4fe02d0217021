//! Construct a scene that satisfies every evaluable constraint of a
//! checklist — the ground-truth starting point for corpus generation.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::refine::interior_bounds;
use super::{alignment_score, Scene, SimError};
use crate::core::{Checklist, Constraint, ConstraintKind, Position, Relation};

const MAX_ATTEMPTS: usize = 64;
const MAX_CELL_TRIES: usize = 200;

/// Per-category requirements harvested from a checklist.
#[derive(Default)]
struct CategoryNeed {
    exact_count: Option<u32>,
    colors: Vec<String>,
    texts: Vec<String>,
}

impl CategoryNeed {
    fn multiplicity(&self) -> u32 {
        let floor = self.colors.len().max(self.texts.len()).max(1) as u32;
        self.exact_count.unwrap_or(floor)
    }
}

/// Build a scene satisfying the checklist, placing objects at random
/// interior cells drawn from `rng`. Retries placement until a full
/// re-evaluation scores 1.0; an unsatisfiable checklist (conflicting
/// styles, impossible counts, degenerate relations) is an error.
pub fn build_satisfying_scene(
    checklist: &Checklist,
    rng: &mut ChaCha8Rng,
) -> Result<Scene, SimError> {
    fn need<'a>(
        needs: &'a mut BTreeMap<String, CategoryNeed>,
        cat: Option<&str>,
    ) -> &'a mut CategoryNeed {
        needs.entry(cat.unwrap_or_default().to_string()).or_default()
    }

    let mut needs: BTreeMap<String, CategoryNeed> = BTreeMap::new();
    let mut style: Option<String> = None;
    let mut spatial: Vec<&Constraint> = Vec::new();

    for c in &checklist.items {
        match c.kind {
            ConstraintKind::ObjectPresence => {
                need(&mut needs, c.subject.as_deref());
            }
            ConstraintKind::ObjectCount => {
                need(&mut needs, c.subject.as_deref()).exact_count = c.count;
            }
            ConstraintKind::ColorBinding => {
                let entry = need(&mut needs, c.subject.as_deref());
                let color = c.color.clone().unwrap_or_default();
                if !entry.colors.contains(&color) {
                    entry.colors.push(color);
                }
            }
            ConstraintKind::SpatialRelation => {
                need(&mut needs, c.subject.as_deref());
                need(&mut needs, c.object.as_deref());
                spatial.push(c);
            }
            ConstraintKind::TextContent => {
                let entry = need(&mut needs, c.subject.as_deref());
                let text = c.text.clone().unwrap_or_default();
                if !entry.texts.contains(&text) {
                    entry.texts.push(text);
                }
            }
            ConstraintKind::Style => {
                let token = c.style.clone().unwrap_or_default();
                match &style {
                    Some(existing) if *existing != token => {
                        return Err(SimError::Precondition(format!(
                            "conflicting style constraints: `{existing}` vs `{token}`"
                        )));
                    }
                    _ => style = Some(token),
                }
            }
            ConstraintKind::FreeForm => {}
        }
    }

    for _ in 0..MAX_ATTEMPTS {
        let mut scene = Scene::new();
        if let Some(s) = &style {
            scene.style = s.clone();
        }

        let mut placed_all = true;
        'place: for (cat, need) in &needs {
            for i in 0..need.multiplicity() as usize {
                let Some(pos) = random_free_cell(&scene, rng) else {
                    placed_all = false;
                    break 'place;
                };
                scene.add_object(
                    cat,
                    need.colors.get(i).map(String::as_str),
                    pos,
                    need.texts.get(i).map(String::as_str),
                );
            }
        }
        if !placed_all {
            continue;
        }

        // Drag each relation's subject anchor into a satisfying cell.
        // Moving subjects in checklist order handles chains; cycles simply
        // fail verification and trigger another attempt.
        let mut relations_ok = true;
        for c in &spatial {
            if !enforce_relation(&mut scene, c, rng) {
                relations_ok = false;
                break;
            }
        }
        if !relations_ok {
            continue;
        }

        if alignment_score(&scene, checklist)? == 1.0 {
            return Ok(scene);
        }
    }

    Err(SimError::Precondition(
        "could not construct a scene satisfying this checklist".to_string(),
    ))
}

fn random_free_cell(scene: &Scene, rng: &mut ChaCha8Rng) -> Option<Position> {
    let bounds = interior_bounds();
    for _ in 0..MAX_CELL_TRIES {
        let p = Position::new(
            rng.gen_range(*bounds.start()..=*bounds.end()),
            rng.gen_range(*bounds.start()..=*bounds.end()),
        );
        if !scene.is_occupied(p) {
            return Some(p);
        }
    }
    None
}

/// Move the subject anchor to a random free cell in the half-plane that
/// satisfies the relation against the object anchor.
fn enforce_relation(scene: &mut Scene, c: &Constraint, rng: &mut ChaCha8Rng) -> bool {
    let subject = c.subject.as_deref().unwrap_or_default();
    let object = c.object.as_deref().unwrap_or_default();
    let rel = c.relation.expect("validated spatial constraint");

    let Some(anchor) = scene.lowest_oid_of(object).map(|o| o.position) else {
        return false;
    };
    let Some(subject_oid) = scene.lowest_oid_of(subject).map(|o| o.oid) else {
        return false;
    };

    let bounds = interior_bounds();
    for _ in 0..MAX_CELL_TRIES {
        let p = Position::new(
            rng.gen_range(*bounds.start()..=*bounds.end()),
            rng.gen_range(*bounds.start()..=*bounds.end()),
        );
        let holds = match rel {
            Relation::LeftOf => p.x < anchor.x,
            Relation::RightOf => p.x > anchor.x,
            Relation::Above => p.y > anchor.y,
            Relation::Below => p.y < anchor.y,
        };
        if holds && !scene.is_occupied(p) {
            if let Some(obj) = scene.objects.iter_mut().find(|o| o.oid == subject_oid) {
                obj.position = p;
            }
            return true;
        }
    }
    false
}
