//! The structured scene editor with seeded imperfection.
//!
//! Each primitive independently fails with probability `p_fail` under a
//! ChaCha stream seeded by the caller. A failed primitive is a no-op —
//! except SetColor, which applies a uniformly random *wrong* color so that
//! genuinely worse candidates (not just no-ops) are reachable in tests.

use super::{clamp_to_grid, Scene, SimError};
use crate::core::{EditOp, COLORS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Apply structured edit ops to a copy of the scene. Pure in all inputs
/// including the seed; the input scene is never touched.
pub fn apply_edit(
    scene: &Scene,
    ops: &[EditOp],
    rng_seed: u64,
    p_fail: f64,
) -> Result<Scene, SimError> {
    if ops.is_empty() {
        return Err(SimError::Precondition("edit has no ops".to_string()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut out = scene.clone();

    for op in ops {
        // One failure draw per primitive, taken before execution so the
        // stream position does not depend on op outcomes.
        let failed = p_fail > 0.0 && rng.gen_bool(p_fail.clamp(0.0, 1.0));
        apply_op(&mut out, op, failed, &mut rng)?;
    }
    Ok(out)
}

fn apply_op(
    scene: &mut Scene,
    op: &EditOp,
    failed: bool,
    rng: &mut ChaCha8Rng,
) -> Result<(), SimError> {
    let require = |scene: &Scene, selector: &str| -> Result<u32, SimError> {
        scene
            .lowest_oid_of(selector)
            .map(|o| o.oid)
            .ok_or_else(|| SimError::SelectorNotFound {
                selector: selector.to_string(),
            })
    };

    match op {
        EditOp::Add {
            category,
            color,
            position,
        } => {
            if failed {
                return Ok(());
            }
            let at = match position {
                Some(p) => clamp_to_grid(*p),
                None => scene.first_free_cell().ok_or(SimError::GridFull)?,
            };
            scene.add_object(category, color.as_deref(), at, None);
        }
        EditOp::Remove { selector } => {
            let oid = require(scene, selector)?;
            if !failed {
                scene.remove_oid(oid);
            }
        }
        EditOp::SetColor { selector, color } => {
            let oid = require(scene, selector)?;
            let applied = if failed {
                // Uniformly random wrong color: anything but the requested
                // one. May coincide with the current color.
                let wrong: Vec<&str> = COLORS.iter().filter(|c| **c != color).copied().collect();
                wrong[rng.gen_range(0..wrong.len())].to_string()
            } else {
                color.clone()
            };
            if let Some(obj) = scene.objects.iter_mut().find(|o| o.oid == oid) {
                obj.color = applied;
            }
        }
        EditOp::Move { selector, position } => {
            let oid = require(scene, selector)?;
            if !failed {
                if let Some(obj) = scene.objects.iter_mut().find(|o| o.oid == oid) {
                    obj.position = clamp_to_grid(*position);
                }
            }
        }
        EditOp::SetText { selector, text } => {
            let oid = require(scene, selector)?;
            if !failed {
                if let Some(obj) = scene.objects.iter_mut().find(|o| o.oid == oid) {
                    obj.text = Some(text.clone());
                }
            }
        }
        EditOp::SetStyle { style } => {
            if !failed {
                scene.style = style.clone();
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::Position;

    fn pandas(n: usize) -> Scene {
        let mut s = Scene::new();
        for i in 0..n {
            s.add_object("panda", None, Position::new(i as i32, 0), None);
        }
        s
    }

    fn add(category: &str) -> EditOp {
        EditOp::Add {
            category: category.to_string(),
            color: None,
            position: None,
        }
    }

    #[test]
    fn add_grows_count_and_leaves_input_untouched() {
        let four = pandas(4);
        let five = apply_edit(&four, &[add("panda")], 0, 0.0).unwrap();
        assert_eq!(five.count_of("panda"), 5);
        assert_eq!(four.count_of("panda"), 4);
        assert_ne!(four.digest(), five.digest());
    }

    #[test]
    fn add_places_at_first_free_cell_row_major() {
        let s = pandas(2); // occupies (0,0) and (1,0)
        let out = apply_edit(&s, &[add("dog")], 0, 0.0).unwrap();
        let dog = out.lowest_oid_of("dog").unwrap();
        assert_eq!(dog.position, Position::new(2, 0));
    }

    #[test]
    fn set_color_recolors_lowest_oid() {
        let mut s = Scene::new();
        s.add_object("chair", Some("orange"), Position::new(0, 0), None);
        s.add_object("chair", Some("orange"), Position::new(1, 0), None);
        let op = EditOp::SetColor {
            selector: "chair".to_string(),
            color: "yellow".to_string(),
        };
        let out = apply_edit(&s, &[op], 0, 0.0).unwrap();
        assert_eq!(out.objects[0].color, "yellow");
        assert_eq!(out.objects[1].color, "orange");
    }

    #[test]
    fn missing_selector_is_an_error() {
        let s = pandas(1);
        let op = EditOp::Remove {
            selector: "unicorn".to_string(),
        };
        assert!(matches!(
            apply_edit(&s, &[op], 0, 0.0),
            Err(SimError::SelectorNotFound { .. })
        ));
    }

    #[test]
    fn empty_ops_violate_the_precondition() {
        assert!(matches!(
            apply_edit(&pandas(1), &[], 0, 0.0),
            Err(SimError::Precondition(_))
        ));
    }

    #[test]
    fn seeded_failure_makes_add_a_noop() {
        let four = pandas(4);
        // With p_fail=1 every primitive fails; Add must be a no-op.
        let out = apply_edit(&four, &[add("panda")], 7, 1.0).unwrap();
        assert_eq!(out.count_of("panda"), 4);
        assert_eq!(out.digest(), four.digest());
    }

    #[test]
    fn failed_set_color_applies_a_wrong_color() {
        let mut s = Scene::new();
        s.add_object("chair", Some("orange"), Position::new(0, 0), None);
        let op = EditOp::SetColor {
            selector: "chair".to_string(),
            color: "yellow".to_string(),
        };
        for seed in 0..50 {
            let out = apply_edit(&s, &[op.clone()], seed, 1.0).unwrap();
            assert_ne!(out.objects[0].color, "yellow", "seed {seed}");
        }
    }

    #[test]
    fn same_seed_same_result() {
        let s = pandas(3);
        let ops = vec![
            add("dog"),
            EditOp::SetColor {
                selector: "dog".to_string(),
                color: "red".to_string(),
            },
        ];
        let a = apply_edit(&s, &ops, 99, 0.5).unwrap();
        let b = apply_edit(&s, &ops, 99, 0.5).unwrap();
        assert_eq!(a.digest(), b.digest());
    }

    #[test]
    fn move_clamps_to_grid() {
        let mut s = Scene::new();
        s.add_object("cat", None, Position::new(5, 5), None);
        let op = EditOp::Move {
            selector: "cat".to_string(),
            position: Position::new(99, -3),
        };
        let out = apply_edit(&s, &[op], 0, 0.0).unwrap();
        assert_eq!(out.objects[0].position, Position::new(31, 0));
    }
}
