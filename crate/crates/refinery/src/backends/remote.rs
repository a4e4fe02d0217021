//! Remote agent adapters: each role is one chat call over the wire codec.

use super::prompts;
use super::wire::{ChatClient, ChatMessage, ChatPart, ChatRequest};
use super::{BackendError, CheckOutcome, Checker, Editor, PlannerBackend, Verifier};
use crate::backends::parse_check_json;
use crate::core::{digest_hex, Constraint, EditInstruction, ImageMode, ImageRef, Verdict};
use base64::Engine;
use std::path::{Path, PathBuf};

/// Load a file-mode image as an inline base64 chat part. Remote agents
/// cannot resolve scene-mode references — those live in-process.
fn image_part(image: &ImageRef) -> Result<ChatPart, BackendError> {
    if image.mode != ImageMode::File {
        return Err(BackendError::ImageUnavailable(format!(
            "remote backends need file-mode images, got scene `{}`",
            image.locator
        )));
    }
    let bytes = std::fs::read(&image.locator)
        .map_err(|e| BackendError::ImageUnavailable(format!("{}: {e}", image.locator)))?;
    let b64 = base64::engine::general_purpose::STANDARD.encode(&bytes);
    Ok(ChatPart::image(b64, media_type_for(&image.locator)))
}

fn media_type_for(path: &str) -> &'static str {
    match Path::new(path).extension().and_then(|e| e.to_str()) {
        Some("png") => "image/png",
        Some("jpg") | Some("jpeg") => "image/jpeg",
        Some("webp") => "image/webp",
        _ => "application/octet-stream",
    }
}

fn request(client: &ChatClient, messages: Vec<ChatMessage>) -> ChatRequest {
    ChatRequest {
        model_name: client.config().model_name.clone(),
        messages,
    }
}

// ---------------------------------------------------------------------------
// Checker
// ---------------------------------------------------------------------------

pub struct RemoteChecker {
    client: ChatClient,
}

impl RemoteChecker {
    pub fn new(client: ChatClient) -> Self {
        RemoteChecker { client }
    }
}

impl Checker for RemoteChecker {
    fn check(&self, image: &ImageRef, constraint: &Constraint) -> Result<CheckOutcome, BackendError> {
        let req = request(
            &self.client,
            vec![
                ChatMessage::system(prompts::CHECKER),
                ChatMessage::user(vec![
                    ChatPart::text(format!("Constraint: {}", constraint.question)),
                    image_part(image)?,
                ]),
            ],
        );
        let resp = self.client.chat(&req)?;
        let result = parse_check_json(&resp.content)
            .map_err(|e| BackendError::Unparseable(e.to_string()))?;
        // A remote checker's fix comes as surface text only; the editor
        // model interprets it.
        let instruction = (!result.passed)
            .then(|| EditInstruction::new(result.reason.clone(), Vec::new()));
        Ok(CheckOutcome { result, instruction })
    }
}

// ---------------------------------------------------------------------------
// Editor
// ---------------------------------------------------------------------------

pub struct RemoteEditor {
    client: ChatClient,
}

impl RemoteEditor {
    pub fn new(client: ChatClient) -> Self {
        RemoteEditor { client }
    }

    /// Candidate path: beside the input, suffixed with a digest prefix so
    /// repeated edits never collide.
    fn candidate_path(input: &str, digest: &str) -> PathBuf {
        let path = Path::new(input);
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("image");
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("bin");
        let name = format!("{stem}.cand-{}.{ext}", &digest[..12]);
        path.with_file_name(name)
    }
}

impl Editor for RemoteEditor {
    fn edit(&self, image: &ImageRef, instruction: &EditInstruction) -> Result<ImageRef, BackendError> {
        let req = request(
            &self.client,
            vec![
                ChatMessage::system(prompts::EDITOR),
                ChatMessage::user(vec![
                    ChatPart::text(format!("Edit instruction: {}", instruction.surface)),
                    image_part(image)?,
                ]),
            ],
        );
        let resp = self.client.chat(&req)?;
        let trimmed = resp.content.trim();
        if trimmed.is_empty() {
            return Err(BackendError::EditRejected("editor returned no image".to_string()));
        }
        let bytes = base64::engine::general_purpose::STANDARD
            .decode(trimmed)
            .map_err(|_| {
                let note: String = trimmed.chars().take(200).collect();
                BackendError::EditRejected(format!("editor did not return base64: {note}"))
            })?;
        let digest = digest_hex(&bytes);
        let out = Self::candidate_path(&image.locator, &digest);
        std::fs::write(&out, &bytes)
            .map_err(|e| BackendError::ImageUnavailable(format!("{}: {e}", out.display())))?;
        Ok(ImageRef::file(out.to_string_lossy(), digest))
    }
}

// ---------------------------------------------------------------------------
// Verifier
// ---------------------------------------------------------------------------

pub struct RemoteVerifier {
    client: ChatClient,
}

impl RemoteVerifier {
    pub fn new(client: ChatClient) -> Self {
        RemoteVerifier { client }
    }
}

/// Case-insensitive scan for "better"/"worse"/"same"; when several occur,
/// the last one wins — models conclude with their answer.
pub fn extract_verdict(text: &str) -> Option<Verdict> {
    let lowered = text.to_lowercase();
    let candidates = [
        (lowered.rfind("better"), Verdict::Better),
        (lowered.rfind("worse"), Verdict::Worse),
        (lowered.rfind("same"), Verdict::Same),
    ];
    candidates
        .into_iter()
        .filter_map(|(pos, v)| pos.map(|p| (p, v)))
        .max_by_key(|(p, _)| *p)
        .map(|(_, v)| v)
}

impl Verifier for RemoteVerifier {
    fn verify(
        &self,
        prompt: &str,
        best: &ImageRef,
        candidate: &ImageRef,
    ) -> Result<Verdict, BackendError> {
        let req = request(
            &self.client,
            vec![
                ChatMessage::system(prompts::VERIFIER),
                ChatMessage::user(vec![
                    ChatPart::text(format!("Original prompt: {prompt}")),
                    image_part(best)?,
                    image_part(candidate)?,
                ]),
            ],
        );
        let resp = self.client.chat(&req)?;
        extract_verdict(&resp.content).ok_or_else(|| {
            BackendError::Unparseable(format!(
                "verifier said neither better, worse nor same: {}",
                resp.content.chars().take(200).collect::<String>()
            ))
        })
    }
}

// ---------------------------------------------------------------------------
// Planner backend
// ---------------------------------------------------------------------------

pub struct RemotePlannerBackend {
    client: ChatClient,
}

impl RemotePlannerBackend {
    pub fn new(client: ChatClient) -> Self {
        RemotePlannerBackend { client }
    }
}

impl PlannerBackend for RemotePlannerBackend {
    fn complete(&self, prompt_text: &str) -> Result<String, BackendError> {
        let req = request(
            &self.client,
            vec![
                ChatMessage::system(prompts::PLANNER),
                ChatMessage::user(vec![ChatPart::text(prompt_text)]),
            ],
        );
        Ok(self.client.chat(&req)?.content)
    }
}
