//! Agent interfaces and their implementations.
//!
//! The refinement loop talks to four pluggable roles — checker, editor,
//! verifier, planner backend — through the traits here. Remote
//! implementations speak the chat wire protocol in [`wire`]; the simulator
//! implementations live in [`crate::simworld`]. [`score_verify`] is the
//! quantitative stand-in for a model verifier: compare alignment scores
//! under a margin.

mod parse;
pub mod prompts;
mod remote;
pub mod wire;

pub use parse::{parse_check_json, ParseCheckError};
pub use remote::{extract_verdict, RemoteChecker, RemoteEditor, RemotePlannerBackend, RemoteVerifier};
pub use wire::{AgentEndpointConfig, ChatClient, ChatMessage, ChatPart, ChatRequest, ChatResponse, Role};

use crate::core::{CheckResult, Constraint, EditInstruction, ImageRef, Verdict};
use std::sync::Arc;
use thiserror::Error;

/// Failures surfaced by agent backends.
#[derive(Debug, Error)]
pub enum BackendError {
    /// Transport-level failure after all transport retries.
    #[error("backend unreachable: {0}")]
    Unreachable(String),
    /// The backend answered, but the answer could not be interpreted.
    #[error("unparseable backend response: {0}")]
    Unparseable(String),
    /// The editor explicitly declined or failed to produce a candidate.
    /// Consumes a retry attempt but never aborts the run.
    #[error("edit rejected: {0}")]
    EditRejected(String),
    /// The alignment scorer could not score an image.
    #[error("scorer failure: {0}")]
    ScorerFailure(String),
    /// An image reference could not be resolved by this backend's mode.
    #[error("image unavailable: {0}")]
    ImageUnavailable(String),
    /// Invalid endpoint or client configuration.
    #[error("backend config error: {0}")]
    Config(String),
}

/// Checks one constraint against an image and, on failure, says how to fix
/// it. `instruction` carries the structured form when the backend has one
/// (the simulator does; remote checkers supply surface text only).
#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub result: CheckResult,
    pub instruction: Option<EditInstruction>,
}

impl CheckOutcome {
    pub fn pass() -> Self {
        CheckOutcome {
            result: CheckResult::pass(),
            instruction: None,
        }
    }

    pub fn fail(instruction: EditInstruction) -> Self {
        CheckOutcome {
            result: CheckResult::fail(instruction.surface.clone()),
            instruction: Some(instruction),
        }
    }
}

/// Answers one yes/no constraint question about an image.
pub trait Checker: Send + Sync {
    fn check(&self, image: &ImageRef, constraint: &Constraint) -> Result<CheckOutcome, BackendError>;
}

/// Produces a new image candidate from an edit instruction. Must never
/// mutate the input image.
pub trait Editor: Send + Sync {
    fn edit(&self, image: &ImageRef, instruction: &EditInstruction) -> Result<ImageRef, BackendError>;
}

/// Compares a candidate against the incumbent best for a prompt.
pub trait Verifier: Send + Sync {
    fn verify(
        &self,
        prompt: &str,
        best: &ImageRef,
        candidate: &ImageRef,
    ) -> Result<Verdict, BackendError>;
}

/// A raw text-completion backend used by the remote planner.
pub trait PlannerBackend: Send + Sync {
    fn complete(&self, prompt_text: &str) -> Result<String, BackendError>;
}

/// Scores how well an image satisfies a prompt, in [0, 1].
pub trait AlignmentScorer: Send + Sync {
    fn score(&self, prompt: &str, image: &ImageRef) -> Result<f64, BackendError>;
}

/// Verify with the identical-digest short-circuit: a candidate with the same
/// digest as the incumbent is `Same` without any backend call, so no-op
/// edits are always rejected.
pub fn verify(
    prompt: &str,
    best: &ImageRef,
    candidate: &ImageRef,
    backend: &dyn Verifier,
) -> Result<Verdict, BackendError> {
    if best.digest == candidate.digest {
        return Ok(Verdict::Same);
    }
    backend.verify(prompt, best, candidate)
}

/// Three-way verdict from two alignment scores under a margin: better iff
/// the candidate beats the incumbent by more than `epsilon`, same while the
/// difference stays within `epsilon`, worse otherwise.
pub fn score_verify(
    prompt: &str,
    best: &ImageRef,
    candidate: &ImageRef,
    scorer: &dyn AlignmentScorer,
    epsilon: f64,
) -> Result<Verdict, BackendError> {
    if best.digest == candidate.digest {
        return Ok(Verdict::Same);
    }
    let best_score = scorer.score(prompt, best)?;
    let candidate_score = scorer.score(prompt, candidate)?;
    let diff = candidate_score - best_score;
    Ok(if diff > epsilon {
        Verdict::Better
    } else if diff.abs() <= epsilon {
        Verdict::Same
    } else {
        Verdict::Worse
    })
}

/// A [`Verifier`] built from an [`AlignmentScorer`] and a margin — the
/// quantitative substitute for a model verifier.
pub struct ScoreVerifier {
    scorer: Arc<dyn AlignmentScorer>,
    pub epsilon: f64,
}

impl ScoreVerifier {
    pub fn new(scorer: Arc<dyn AlignmentScorer>, epsilon: f64) -> Self {
        ScoreVerifier { scorer, epsilon }
    }
}

impl Verifier for ScoreVerifier {
    fn verify(
        &self,
        prompt: &str,
        best: &ImageRef,
        candidate: &ImageRef,
    ) -> Result<Verdict, BackendError> {
        score_verify(prompt, best, candidate, self.scorer.as_ref(), self.epsilon)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::digest_hex;

    struct FixedScorer;

    impl AlignmentScorer for FixedScorer {
        fn score(&self, _prompt: &str, image: &ImageRef) -> Result<f64, BackendError> {
            // Score encoded in the locator for test purposes.
            image
                .locator
                .parse()
                .map_err(|e| BackendError::ScorerFailure(format!("{e}")))
        }
    }

    fn img(score: &str, tag: &str) -> ImageRef {
        ImageRef::scene(score, digest_hex(tag.as_bytes()))
    }

    #[test]
    fn score_verify_partitions_on_margin() {
        let s = FixedScorer;
        let cases = [
            ("0.80", "0.80", 0.0, Verdict::Same),
            ("0.50", "0.75", 0.1, Verdict::Better),
            ("0.50", "0.55", 0.1, Verdict::Same),
            ("0.75", "0.50", 0.1, Verdict::Worse),
            ("0.50", "1.00", 0.0, Verdict::Better),
            ("1.00", "0.50", 0.0, Verdict::Worse),
        ];
        for (best, cand, eps, want) in cases {
            let got = score_verify("p", &img(best, "a"), &img(cand, "b"), &s, eps).unwrap();
            assert_eq!(got, want, "best={best} cand={cand} eps={eps}");
        }
    }

    #[test]
    fn score_verify_is_antisymmetric() {
        let s = FixedScorer;
        let scores = ["0.0", "0.25", "0.5", "0.75", "1.0"];
        for a in scores {
            for b in scores {
                let fwd = score_verify("p", &img(a, "a"), &img(b, "b"), &s, 0.1).unwrap();
                let rev = score_verify("p", &img(b, "b"), &img(a, "a"), &s, 0.1).unwrap();
                let mirrored = match fwd {
                    Verdict::Better => Verdict::Worse,
                    Verdict::Worse => Verdict::Better,
                    Verdict::Same => Verdict::Same,
                };
                assert_eq!(rev, mirrored, "a={a} b={b}");
            }
        }
    }

    #[test]
    fn identical_digest_short_circuits_to_same() {
        struct PanicVerifier;
        impl Verifier for PanicVerifier {
            fn verify(&self, _: &str, _: &ImageRef, _: &ImageRef) -> Result<Verdict, BackendError> {
                panic!("must not be called for identical digests");
            }
        }
        let a = ImageRef::scene("x", digest_hex(b"same"));
        let b = ImageRef::scene("y", digest_hex(b"same"));
        assert_eq!(verify("p", &a, &b, &PanicVerifier).unwrap(), Verdict::Same);

        // The scorer path short-circuits too, before any scoring.
        let got = score_verify("p", &a, &b, &FixedScorer, 0.0).unwrap();
        assert_eq!(got, Verdict::Same);
    }
}
