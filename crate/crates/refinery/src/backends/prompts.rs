//! The fixed instruction texts sent to each remote agent role.

/// Sent with the user prompt appended on its own line.
pub const PLANNER: &str = "Given the user prompt, generate a numbered checklist of verifiable \
visual constraints. Each item should be a yes/no question about a specific compositional \
element (object, attribute, spatial relation, count, style, text content).";

/// Sent with the constraint question and the image under test.
pub const CHECKER: &str = "Given the image and the constraint below, determine if the \
constraint is satisfied. Respond with JSON: {\"passed\": true/false, \"reason\": \
\"explanation\"}. If false, the reason should be an actionable edit instruction.";

/// Sent with the edit instruction and the image to edit; the response
/// content must be the edited image as base64.
pub const EDITOR: &str = "Execute the edit instruction on the image to produce a new image. \
Respond with the edited image encoded as base64 and nothing else.";

/// Sent with the original prompt and two images, previous best first.
pub const VERIFIER: &str = "Given the original prompt, the previous-best image, and a \
candidate image, determine which better satisfies the prompt. The first image is the \
previous best; the second image is the candidate. Respond with: \"better\", \"worse\", or \
\"same\".";
