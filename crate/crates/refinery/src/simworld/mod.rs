//! A deterministic scene-graph world standing in for a real image model.
//!
//! A [`Scene`] is a bag of single-cell objects on a 32×32 grid plus a
//! global style token. The module provides the oracle that evaluates
//! constraints against scenes ([`eval_constraint`]), an alignment score,
//! a structured editor with seeded imperfection ([`apply_edit`]), fixed
//! refinement templates ([`sim_refine_instruction`]), a corpus corruptor
//! ([`corrupt`]), a satisfying-scene builder, and agent-trait adapters
//! backed by a content-addressed [`SceneStore`].

mod agents;
mod build;
mod corrupt;
mod edit;
mod eval;
mod refine;

pub use agents::{SimChecker, SimEditor, SimScorer};
pub use build::build_satisfying_scene;
pub use corrupt::corrupt;
pub use edit::apply_edit;
pub use eval::{alignment_score, eval_constraint};
pub use refine::sim_refine_instruction;

use crate::core::{digest_hex, ConstraintKind, ImageRef, Position, UNCOLORED};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::Mutex;
use thiserror::Error;

/// Grid extent on each axis; positions run 0..=31 with x rightward and y
/// upward.
pub const GRID: i32 = 32;

/// Failures inside the simulator world.
#[derive(Debug, Error)]
pub enum SimError {
    /// The oracle cannot evaluate free-form constraints.
    #[error("constraint kind {0} is not oracle-evaluable")]
    UnsupportedKind(ConstraintKind),
    /// Alignment needs at least one evaluable (non-free-form) item.
    #[error("checklist has no evaluable constraints")]
    NoEvaluableConstraints,
    /// An edit selector matched nothing.
    #[error("no object matches selector `{selector}`")]
    SelectorNotFound { selector: String },
    /// Refinement was asked for a constraint the scene already satisfies.
    #[error("constraint {id} is already satisfied")]
    AlreadySatisfied { id: u32 },
    /// The corruptor could not reach the requested violation count.
    #[error("corruption infeasible: {0}")]
    CorruptionInfeasible(String),
    /// A caller-side precondition did not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),
    /// No free grid cell was available for placement.
    #[error("grid is full")]
    GridFull,
    /// A scene-mode image reference pointed at nothing in the store.
    #[error("scene `{0}` is not in the store")]
    SceneNotFound(String),
    /// Scene JSON could not be parsed.
    #[error("malformed scene: {0}")]
    Malformed(String),
}

/// One object in a scene: a category noun at a grid cell, optionally
/// colored and optionally carrying literal text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneObject {
    pub oid: u32,
    pub category: String,
    /// A color token, or "uncolored" when never specified.
    pub color: String,
    pub position: Position,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

/// An immutable-by-convention scene snapshot. Mutating operations clone
/// first; the canonical JSON (objects sorted by oid, compact) defines the
/// scene's digest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Scene {
    pub objects: Vec<SceneObject>,
    /// A style token, or "none" when unstyled.
    pub style: String,
    #[serde(skip)]
    next_oid: u32,
}

impl Default for Scene {
    fn default() -> Self {
        Scene::new()
    }
}

impl Scene {
    pub fn new() -> Self {
        Scene {
            objects: Vec::new(),
            style: "none".to_string(),
            next_oid: 1,
        }
    }

    /// Append a new object, assigning the next oid. Returns the oid.
    pub fn add_object(
        &mut self,
        category: &str,
        color: Option<&str>,
        position: Position,
        text: Option<&str>,
    ) -> u32 {
        let oid = self.next_oid;
        self.next_oid += 1;
        self.objects.push(SceneObject {
            oid,
            category: category.to_string(),
            color: color.unwrap_or(UNCOLORED).to_string(),
            position,
            text: text.map(str::to_string),
        });
        oid
    }

    /// Remove the object with the given oid, if present.
    pub fn remove_oid(&mut self, oid: u32) {
        self.objects.retain(|o| o.oid != oid);
    }

    /// Lowest-oid object of a category — the deterministic selector
    /// resolution used everywhere in the simulator.
    pub fn lowest_oid_of(&self, category: &str) -> Option<&SceneObject> {
        self.objects
            .iter()
            .filter(|o| o.category == category)
            .min_by_key(|o| o.oid)
    }

    pub fn lowest_oid_of_mut(&mut self, category: &str) -> Option<&mut SceneObject> {
        self.objects
            .iter_mut()
            .filter(|o| o.category == category)
            .min_by_key(|o| o.oid)
    }

    pub fn count_of(&self, category: &str) -> usize {
        self.objects.iter().filter(|o| o.category == category).count()
    }

    pub fn is_occupied(&self, position: Position) -> bool {
        self.objects.iter().any(|o| o.position == position)
    }

    /// First unoccupied cell in row-major order (y then x from the origin).
    pub fn first_free_cell(&self) -> Option<Position> {
        cell_scan(0, GRID - 1).find(|p| !self.is_occupied(*p))
    }

    /// First unoccupied cell away from the border, so relative placements
    /// next to it can never clamp out of satisfaction.
    pub fn first_free_interior_cell(&self) -> Option<Position> {
        cell_scan(1, GRID - 2).find(|p| !self.is_occupied(*p))
    }

    /// Canonical compact JSON: objects sorted by oid; `next_oid` is not
    /// part of the file format (it is recomputed on parse).
    pub fn canonical_json(&self) -> String {
        let mut copy = self.clone();
        copy.objects.sort_by_key(|o| o.oid);
        serde_json::to_string(&copy).expect("scene serialization cannot fail")
    }

    pub fn digest(&self) -> String {
        digest_hex(self.canonical_json().as_bytes())
    }

    /// Parse a scene file, recomputing `next_oid` and validating oid
    /// uniqueness and grid bounds.
    pub fn parse(json: &str) -> Result<Scene, SimError> {
        #[derive(Deserialize)]
        struct SceneFile {
            objects: Vec<SceneObject>,
            style: String,
        }
        let file: SceneFile =
            serde_json::from_str(json).map_err(|e| SimError::Malformed(e.to_string()))?;
        let mut scene = Scene {
            objects: file.objects,
            style: file.style,
            next_oid: 1,
        };
        scene.objects.sort_by_key(|o| o.oid);
        for pair in scene.objects.windows(2) {
            if pair[0].oid == pair[1].oid {
                return Err(SimError::Malformed(format!("duplicate oid {}", pair[0].oid)));
            }
        }
        for o in &scene.objects {
            let inside = (0..GRID).contains(&o.position.x) && (0..GRID).contains(&o.position.y);
            if !inside {
                return Err(SimError::Malformed(format!(
                    "object {} at ({}, {}) is outside the grid",
                    o.oid, o.position.x, o.position.y
                )));
            }
        }
        scene.next_oid = scene.objects.iter().map(|o| o.oid).max().unwrap_or(0) + 1;
        Ok(scene)
    }
}

/// Row-major cell iterator over the square lo..=hi on both axes.
pub(crate) fn cell_scan(lo: i32, hi: i32) -> impl Iterator<Item = Position> {
    (lo..=hi).flat_map(move |y| (lo..=hi).map(move |x| Position::new(x, y)))
}

/// Clamp a position onto the grid.
pub(crate) fn clamp_to_grid(p: Position) -> Position {
    Position::new(p.x.clamp(0, GRID - 1), p.y.clamp(0, GRID - 1))
}

/// Content-addressed scene storage: digest → scene. Scene-mode image
/// references use the digest as their locator, so resolution is a map
/// lookup and identical scenes share one entry.
#[derive(Default)]
pub struct SceneStore {
    scenes: Mutex<HashMap<String, Scene>>,
}

impl SceneStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Store a scene and return the image reference addressing it.
    pub fn insert(&self, scene: Scene) -> ImageRef {
        let digest = scene.digest();
        self.scenes
            .lock()
            .expect("scene store poisoned")
            .insert(digest.clone(), scene);
        ImageRef::scene(digest.clone(), digest)
    }

    pub fn get(&self, image: &ImageRef) -> Result<Scene, SimError> {
        self.scenes
            .lock()
            .expect("scene store poisoned")
            .get(&image.locator)
            .cloned()
            .ok_or_else(|| SimError::SceneNotFound(image.locator.clone()))
    }

    pub fn len(&self) -> usize {
        self.scenes.lock().expect("scene store poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Scene {
        let mut s = Scene::new();
        s.add_object("panda", None, Position::new(3, 4), None);
        s.add_object("chair", Some("orange"), Position::new(10, 5), None);
        s
    }

    #[test]
    fn canonical_json_shape_is_stable() {
        let s = sample();
        assert_eq!(
            s.canonical_json(),
            "{\"objects\":[\
             {\"oid\":1,\"category\":\"panda\",\"color\":\"uncolored\",\"position\":[3,4]},\
             {\"oid\":2,\"category\":\"chair\",\"color\":\"orange\",\"position\":[10,5]}],\
             \"style\":\"none\"}"
        );
    }

    #[test]
    fn digest_ignores_insertion_order() {
        let a = sample();
        let mut b = a.clone();
        b.objects.reverse();
        assert_eq!(a.digest(), b.digest());
    }

    #[test]
    fn parse_round_trips_and_recomputes_next_oid() {
        let s = sample();
        let parsed = Scene::parse(&s.canonical_json()).unwrap();
        assert_eq!(parsed, s);
        let mut grown = parsed;
        let oid = grown.add_object("dog", None, Position::new(0, 0), None);
        assert_eq!(oid, 3);
    }

    #[test]
    fn parse_rejects_duplicates_and_out_of_bounds() {
        let dup = r#"{"objects":[
            {"oid":1,"category":"a","color":"uncolored","position":[0,0]},
            {"oid":1,"category":"b","color":"uncolored","position":[1,1]}],"style":"none"}"#;
        assert!(matches!(Scene::parse(dup), Err(SimError::Malformed(_))));

        let oob = r#"{"objects":[
            {"oid":1,"category":"a","color":"uncolored","position":[32,0]}],"style":"none"}"#;
        assert!(matches!(Scene::parse(oob), Err(SimError::Malformed(_))));

        assert!(matches!(Scene::parse("not json"), Err(SimError::Malformed(_))));
    }

    #[test]
    fn store_is_content_addressed() {
        let store = SceneStore::new();
        let r1 = store.insert(sample());
        let r2 = store.insert(sample());
        assert_eq!(r1, r2);
        assert_eq!(store.len(), 1);
        assert_eq!(store.get(&r1).unwrap(), sample());

        let missing = ImageRef::scene("no-such", "no-such");
        assert!(matches!(store.get(&missing), Err(SimError::SceneNotFound(_))));
    }

    #[test]
    fn first_free_cell_scans_row_major() {
        let mut s = Scene::new();
        assert_eq!(s.first_free_cell(), Some(Position::new(0, 0)));
        s.add_object("a", None, Position::new(0, 0), None);
        s.add_object("b", None, Position::new(1, 0), None);
        assert_eq!(s.first_free_cell(), Some(Position::new(2, 0)));
        assert_eq!(s.first_free_interior_cell(), Some(Position::new(1, 1)));
    }
}
