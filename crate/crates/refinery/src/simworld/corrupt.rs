//! Seeded corpus corruption: invert a chosen number of satisfied constraints
//! to manufacture refinement work with a known ground truth.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{eval_constraint, Scene, SimError};
use crate::core::{Checklist, Constraint, ConstraintKind, COLORS};

const MAX_ATTEMPTS: usize = 100;

/// Return a copy of `scene` that violates exactly `n_violations` of the
/// checklist's evaluable constraints.
///
/// Each attempt samples that many distinct constraints, applies a
/// kind-specific inversion to each, and keeps the result only if a full
/// re-evaluation confirms the violation count landed exactly on target
/// (inversions can collide — e.g. removing an object can break both a
/// presence and a count item). Resamples up to 100 times before giving up.
pub fn corrupt(
    scene: &Scene,
    checklist: &Checklist,
    n_violations: usize,
    rng_seed: u64,
) -> Result<Scene, SimError> {
    let evaluable: Vec<&Constraint> = checklist
        .items
        .iter()
        .filter(|c| c.kind != ConstraintKind::FreeForm)
        .collect();

    if n_violations == 0 || n_violations > evaluable.len() {
        return Err(SimError::Precondition(format!(
            "n_violations must be in 1..={}, got {n_violations}",
            evaluable.len()
        )));
    }
    for c in &evaluable {
        if !eval_constraint(scene, c)? {
            return Err(SimError::Precondition(format!(
                "input scene does not satisfy constraint {}",
                c.id
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    for _ in 0..MAX_ATTEMPTS {
        let mut chosen = rand::seq::index::sample(&mut rng, evaluable.len(), n_violations)
            .into_vec();
        // Apply in descending rank order so relation/text inversions still
        // find their anchors before any presence/count removal deletes them.
        chosen.sort_unstable_by(|a, b| b.cmp(a));

        let mut candidate = scene.clone();
        let mut feasible = true;
        for idx in chosen {
            if !invert(&mut candidate, evaluable[idx], &mut rng) {
                feasible = false;
                break;
            }
        }
        if !feasible {
            continue;
        }

        let mut violated = 0usize;
        for c in &evaluable {
            if !eval_constraint(&candidate, c)? {
                violated += 1;
            }
        }
        if violated == n_violations {
            return Ok(candidate);
        }
    }

    Err(SimError::CorruptionInfeasible(format!(
        "no corruption achieving exactly {n_violations} violation(s) after {MAX_ATTEMPTS} attempts"
    )))
}

/// Apply one kind-specific inversion; false means this attempt cannot
/// proceed (e.g. a full grid or a degenerate constraint).
fn invert(scene: &mut Scene, c: &Constraint, rng: &mut ChaCha8Rng) -> bool {
    let subject = c.subject.as_deref().unwrap_or_default();
    match c.kind {
        ConstraintKind::ObjectPresence => {
            // Satisfaction guarantees at least one object of the category.
            let oid = scene.lowest_oid_of(subject).map(|o| o.oid);
            match oid {
                Some(oid) => {
                    scene.remove_oid(oid);
                    true
                }
                None => false,
            }
        }
        ConstraintKind::ObjectCount => {
            let want = c.count.expect("validated count constraint");
            // Removing the sole object would also break any presence item on
            // the category, so a count of one is always perturbed upward.
            let grow = want == 1 || rng.gen_bool(0.5);
            if grow {
                match scene.first_free_cell() {
                    Some(pos) => {
                        scene.add_object(subject, None, pos, None);
                        true
                    }
                    None => false,
                }
            } else {
                let oid = scene
                    .objects
                    .iter()
                    .filter(|o| o.category == subject)
                    .map(|o| o.oid)
                    .max();
                match oid {
                    Some(oid) => {
                        scene.remove_oid(oid);
                        true
                    }
                    None => false,
                }
            }
        }
        ConstraintKind::ColorBinding => {
            let color = c.color.as_deref().expect("validated color constraint");
            let choices: Vec<&str> = COLORS.iter().copied().filter(|w| *w != color).collect();
            let wrong = choices[rng.gen_range(0..choices.len())].to_string();
            // The binding holds if any one object matches, so every match
            // must lose the color.
            for obj in scene
                .objects
                .iter_mut()
                .filter(|o| o.category == subject && o.color == color)
            {
                obj.color = wrong.clone();
            }
            true
        }
        ConstraintKind::SpatialRelation => {
            let object = c.object.as_deref().expect("validated spatial constraint");
            let a = scene.lowest_oid_of(subject).map(|o| (o.oid, o.position));
            let b = scene.lowest_oid_of(object).map(|o| (o.oid, o.position));
            match (a, b) {
                (Some((oa, pa)), Some((ob, pb))) if oa != ob => {
                    for obj in scene.objects.iter_mut() {
                        if obj.oid == oa {
                            obj.position = pb;
                        } else if obj.oid == ob {
                            obj.position = pa;
                        }
                    }
                    true
                }
                _ => false,
            }
        }
        ConstraintKind::TextContent => {
            let literal = c.text.as_deref().expect("validated text constraint");
            let garble: char = (b'a' + rng.gen_range(0..26u8)) as char;
            // The literal matches any carrier, so every carrier is garbled.
            for obj in scene.objects.iter_mut() {
                if obj.text.as_deref() == Some(literal) {
                    let mut t = literal.to_string();
                    t.push(garble);
                    obj.text = Some(t);
                }
            }
            true
        }
        ConstraintKind::Style => {
            let target = c.style.as_deref().expect("validated style constraint");
            scene.style = if target == "none" { "garbled".to_string() } else { "none".to_string() };
            true
        }
        ConstraintKind::FreeForm => false,
    }
}

#[cfg(test)]
mod tests {
    use super::super::alignment_score;
    use super::*;
    use crate::core::{Position, Relation};

    fn satisfied_pair() -> (Scene, Checklist) {
        let mut s = Scene::new();
        s.add_object("panda", None, Position::new(5, 5), None);
        s.add_object("chair", Some("yellow"), Position::new(9, 9), None);
        let cl = Checklist::new(
            "a panda and a yellow chair",
            vec![
                Constraint::presence(1, "panda"),
                Constraint::color(2, "chair", "yellow"),
            ],
        );
        (s, cl)
    }

    #[test]
    fn full_corruption_drives_alignment_to_zero() {
        let (s, cl) = satisfied_pair();
        let bad = corrupt(&s, &cl, 2, 7).unwrap();
        assert_eq!(alignment_score(&bad, &cl).unwrap(), 0.0);
    }

    #[test]
    fn zero_or_oversized_targets_are_rejected() {
        let (s, cl) = satisfied_pair();
        assert!(matches!(corrupt(&s, &cl, 0, 1), Err(SimError::Precondition(_))));
        assert!(matches!(corrupt(&s, &cl, 3, 1), Err(SimError::Precondition(_))));
    }

    #[test]
    fn unsatisfying_input_is_rejected() {
        let (_, cl) = satisfied_pair();
        let empty = Scene::new();
        assert!(matches!(corrupt(&empty, &cl, 1, 1), Err(SimError::Precondition(_))));
    }

    #[test]
    fn same_seed_gives_identical_scenes() {
        let (s, cl) = satisfied_pair();
        let a = corrupt(&s, &cl, 1, 42).unwrap();
        let b = corrupt(&s, &cl, 1, 42).unwrap();
        assert_eq!(a.digest(), b.digest());
    }

    #[test]
    fn violation_count_is_exact_across_kinds_and_seeds() {
        let mut s = Scene::new();
        for i in 0..3 {
            s.add_object("panda", None, Position::new(4 + i, 4), None);
        }
        s.add_object("chair", Some("yellow"), Position::new(10, 10), None);
        s.add_object("tie", None, Position::new(12, 8), None);
        s.add_object("potted plant", None, Position::new(8, 8), None);
        s.add_object("sign", None, Position::new(20, 20), Some("open"));
        s.style = "watercolor".to_string();

        let cl = Checklist::new(
            "mixed",
            vec![
                Constraint::presence(1, "panda"),
                Constraint::color(2, "chair", "yellow"),
                Constraint::count(3, "panda", 3),
                Constraint::spatial(4, "tie", Relation::RightOf, "potted plant"),
                Constraint::text(5, "sign", "open"),
                Constraint::style(6, "watercolor"),
            ],
        );
        assert_eq!(alignment_score(&s, &cl).unwrap(), 1.0);

        for seed in 0..20u64 {
            for n in 1..=3usize {
                let bad = corrupt(&s, &cl, n, seed).unwrap();
                let violated = cl
                    .items
                    .iter()
                    .filter(|c| !eval_constraint(&bad, c).unwrap())
                    .count();
                assert_eq!(violated, n, "seed {seed} n {n}");
            }
        }
    }

    #[test]
    fn style_none_target_garbles_instead_of_clearing() {
        let mut s = Scene::new();
        s.add_object("panda", None, Position::new(5, 5), None);
        let cl = Checklist::new(
            "plain",
            vec![Constraint::presence(1, "panda"), Constraint::style(2, "none")],
        );
        // Pick a corruption that hits the style item; n=2 must hit both.
        let bad = corrupt(&s, &cl, 2, 3).unwrap();
        assert_eq!(bad.style, "garbled");
    }
}
