//! Deterministic replay backend for tests and offline evaluation.
//!
//! A script is an ordered list of entries, each with an optional `match`
//! tag. A call consumes the first unconsumed entry whose tag either is
//! absent or occurs in some message of the request — so one script can serve
//! heterogeneous call sequences (control calls, final-answer calls, ReAct
//! turns) by tagging entries with the marker words the corresponding system
//! prompts contain. Each entry is consumed at most once; when no remaining
//! entry matches, the backend reports script exhaustion.
//!
//! Responses report `completion_tokens = estimate_tokens(text)`, prompt
//! tokens estimated the same way from the request, and zero latency, which
//! keeps scripted runs bit-deterministic.

use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{estimate_tokens, Backend, BackendError, BackendRequest, BackendResponse};

/// One scripted response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptEntry {
    /// Tag restricting which calls may consume this entry. `None` matches
    /// any call.
    #[serde(rename = "match", default, skip_serializing_if = "Option::is_none")]
    pub match_tag: Option<String>,
    pub text: String,
}

impl ScriptEntry {
    pub fn text_only(text: impl Into<String>) -> Self {
        ScriptEntry { match_tag: None, text: text.into() }
    }

    pub fn tagged(tag: impl Into<String>, text: impl Into<String>) -> Self {
        ScriptEntry { match_tag: Some(tag.into()), text: text.into() }
    }

    fn matches(&self, request: &BackendRequest) -> bool {
        match &self.match_tag {
            None => true,
            Some(tag) => request.messages.iter().any(|m| m.content.contains(tag.as_str())),
        }
    }
}

/// Reads a script file: a JSON array of `{"match": optional tag, "text": body}`.
pub fn load_script(path: impl AsRef<Path>) -> Result<Vec<ScriptEntry>, BackendError> {
    let raw = std::fs::read_to_string(path.as_ref())
        .map_err(|e| BackendError::InvalidScript(format!("{}: {e}", path.as_ref().display())))?;
    serde_json::from_str(&raw)
        .map_err(|e| BackendError::InvalidScript(format!("{}: {e}", path.as_ref().display())))
}

/// Replays a script. The cursor is interior-mutable so one episode can hold
/// the backend behind a shared reference.
pub struct ScriptedBackend {
    entries: Vec<ScriptEntry>,
    consumed: Mutex<Vec<bool>>,
}

impl ScriptedBackend {
    pub fn new(entries: Vec<ScriptEntry>) -> Self {
        let consumed = Mutex::new(vec![false; entries.len()]);
        ScriptedBackend { entries, consumed }
    }

    pub fn from_texts<S: AsRef<str>>(texts: &[S]) -> Self {
        ScriptedBackend::new(texts.iter().map(|t| ScriptEntry::text_only(t.as_ref())).collect())
    }

    /// Entries not yet consumed.
    pub fn remaining(&self) -> usize {
        self.consumed.lock().expect("cursor poisoned").iter().filter(|c| !**c).count()
    }
}

impl Backend for ScriptedBackend {
    fn complete(&self, request: &BackendRequest) -> Result<BackendResponse, BackendError> {
        request.validate()?;
        let mut consumed = self.consumed.lock().expect("cursor poisoned");
        let slot = self
            .entries
            .iter()
            .enumerate()
            .position(|(i, entry)| !consumed[i] && entry.matches(request))
            .ok_or(BackendError::ScriptExhausted)?;
        consumed[slot] = true;
        let text = self.entries[slot].text.clone();
        let prompt_tokens =
            request.messages.iter().map(|m| estimate_tokens(&m.content)).sum::<u64>();
        let completion_tokens = estimate_tokens(&text);
        Ok(BackendResponse { text, prompt_tokens, completion_tokens, latency_seconds: 0.0 })
    }
}
