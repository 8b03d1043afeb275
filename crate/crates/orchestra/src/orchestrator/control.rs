//! Shared plumbing between strategies: prompt construction, the control
//! protocol spoken with the backend, retrieval execution, and the ReAct
//! action grammar.
//!
//! Every prompt embeds a stable marker word (see [`tags`]) so scripted
//! backends can route canned replies to the right call site with `match`
//! tags. The markers are part of the crate's public contract: changing one
//! silently breaks existing script fixtures.

use crate::backend::{
    estimate_tokens, find_object_with_key, parse_signals, Backend, BackendError, BackendRequest,
    Message, SignalEstimate,
};
use crate::retriever::Bm25Index;
use crate::state::{AgentState, Observation, ObservationSource};

/// Marker words embedded in system prompts, one per call site.
///
/// A scripted backend entry tagged with one of these strings is only
/// consumed by the matching call, which lets a single script serve an
/// entire strategy grid.
pub mod tags {
    /// Control call: asks for expected gains, uncertainty, and arguments.
    pub const CONTROL: &str = "controller";
    /// Final-answer call.
    pub const ANSWER: &str = "final";
    /// Verification call (utility policy and the search+verify workflow).
    pub const VERIFY: &str = "verify";
    /// Query-reformulation call (search-twice workflow).
    pub const REFORMULATE: &str = "reformulate";
    /// ReAct turn call.
    pub const REACT: &str = "react";
}

const CONTROL_SYSTEM: &str = "You are the controller for a question-answering agent. \
Inspect the question, the evidence gathered so far, and the actions already taken, then \
estimate how useful each next action would be. Reply with exactly one JSON object with \
fields: \"expected_gain\" (a number in [0,1], or a map from action kind - respond, \
retrieve, tool_call, verify, stop - to numbers in [0,1]), \"uncertainty\" (a number in \
[0,1]), optional \"argument\" (a string, or a map with optional retrieve / tool_call / \
verify strings), and optional \"draft\" (your current best answer).";

const ANSWER_SYSTEM: &str = "You produce the final answer to the question. Reply with \
the answer only, as a short phrase, with no extra commentary.";

const VERIFY_SYSTEM: &str = "You verify a draft answer against the evidence. Check the \
draft for factual errors and reply with one JSON object: {\"draft\": the revised answer, \
\"note\": a short justification}.";

const REFORMULATE_SYSTEM: &str = "The first search did not settle the question. You \
reformulate the search query to surface the missing evidence. Reply with the new query \
text only.";

const WORKFLOW_VERIFY_SYSTEM: &str = "You verify a draft answer by searching for \
evidence. Identify the claim to check and reply with one JSON object: {\"claim\": the \
claim being checked, \"query\": a search query that would confirm or refute it}.";

const REACT_SYSTEM: &str = "You are a react-style question answering agent. At each \
turn, reply with a line \"Thought: ...\" followed by a line \"Action: Search[query]\" to \
look something up or \"Action: Finish[answer]\" to answer the question.";

/// Everything a control call yields: signal estimates, proposed arguments,
/// an optional draft answer, and the token/latency bill for the call.
#[derive(Debug, Clone)]
pub(crate) struct ControlOutcome {
    pub signals: SignalEstimate,
    pub arguments: ProposedArguments,
    pub draft: Option<String>,
    pub tokens: u64,
    pub latency_seconds: f64,
}

/// Arguments the control call proposed for argument-taking actions.
#[derive(Debug, Clone, Default)]
pub(crate) struct ProposedArguments {
    pub retrieve: Option<String>,
    pub tool_call: Option<String>,
    pub verify: Option<String>,
}

fn non_empty(text: &str) -> Option<String> {
    let trimmed = text.trim();
    (!trimmed.is_empty()).then(|| trimmed.to_string())
}

impl ProposedArguments {
    /// Extracts proposals from the control block's raw `argument` field.
    /// A bare string broadcasts to every argument-taking kind; a map is
    /// read per kind. Anything else proposes nothing.
    fn from_raw(raw: &serde_json::Map<String, serde_json::Value>) -> Self {
        match raw.get("argument") {
            Some(serde_json::Value::String(text)) => {
                let shared = non_empty(text);
                Self {
                    retrieve: shared.clone(),
                    tool_call: shared.clone(),
                    verify: shared,
                }
            }
            Some(serde_json::Value::Object(map)) => {
                let field = |key: &str| map.get(key).and_then(|v| v.as_str()).and_then(non_empty);
                Self {
                    retrieve: field("retrieve"),
                    tool_call: field("tool_call"),
                    verify: field("verify"),
                }
            }
            _ => Self::default(),
        }
    }
}

/// Renders the question, accumulated evidence, and action history into the
/// user message shared by the control, answer, and verify calls.
fn situation_text(question: &str, state: &AgentState) -> String {
    let mut text = format!("Question: {question}\n");
    if !state.working_context.is_empty() {
        text.push_str("Evidence:\n");
        for snippet in &state.working_context {
            text.push_str("- [");
            text.push_str(snippet.source.as_str());
            text.push_str("] ");
            text.push_str(&snippet.text);
            text.push('\n');
        }
    }
    let history = state.history();
    if !history.is_empty() {
        text.push_str("Actions so far: ");
        for (position, step) in history.iter().enumerate() {
            if position > 0 {
                text.push_str(", ");
            }
            text.push_str(step.action.kind().as_str());
            if let Some(argument) = step.action.argument() {
                text.push('(');
                text.push_str(argument);
                text.push(')');
            }
        }
        text.push('\n');
    }
    text
}

fn request(system: &str, user: String) -> BackendRequest {
    BackendRequest::new(vec![Message::system(system), Message::user(user)])
}

/// Asks the backend what to do next and parses the reply into signal
/// estimates plus proposed arguments. Malformed replies degrade to the
/// fallback estimate with `parse_ok = false`; transport errors surface.
pub(crate) fn control_call(
    backend: &dyn Backend,
    question: &str,
    state: &AgentState,
) -> Result<ControlOutcome, BackendError> {
    let mut user = situation_text(question, state);
    user.push_str("Reply with the JSON control object.");
    let response = backend.complete(&request(CONTROL_SYSTEM, user))?;
    let (signals, arguments, draft) = match find_object_with_key(&response.text, "expected_gain") {
        Some(_) => {
            let signals = parse_signals(&response.text);
            // parse_signals already located the first usable block; re-scan
            // the same text for the raw fields that ride alongside it.
            let raw = crate::backend::find_control_block(&response.text)
                .map(|block| block.raw)
                .unwrap_or_default();
            let arguments = ProposedArguments::from_raw(&raw);
            let draft = raw.get("draft").and_then(|v| v.as_str()).and_then(non_empty);
            (signals, arguments, draft)
        }
        None => (
            parse_signals(&response.text),
            ProposedArguments::default(),
            None,
        ),
    };
    Ok(ControlOutcome {
        signals,
        arguments,
        draft,
        tokens: response.total_tokens(),
        latency_seconds: response.latency_seconds,
    })
}

/// Asks the backend for the final answer. Returns the trimmed answer text
/// with the call's token and latency bill.
pub(crate) fn answer_call(
    backend: &dyn Backend,
    question: &str,
    state: &AgentState,
    draft: Option<&str>,
) -> Result<(String, u64, f64), BackendError> {
    let mut user = situation_text(question, state);
    if let Some(draft) = draft {
        user.push_str("Current draft answer: ");
        user.push_str(draft);
        user.push('\n');
    }
    user.push_str("Give the final answer.");
    let response = backend.complete(&request(ANSWER_SYSTEM, user))?;
    Ok((
        response.text.trim().to_string(),
        response.total_tokens(),
        response.latency_seconds,
    ))
}

/// Backend-checked verification used by the utility policy: sends the draft
/// plus evidence, reads back a possibly revised draft. Returns the revised
/// draft (if the reply carried one), the observation to record, and the bill.
pub(crate) fn verify_call(
    backend: &dyn Backend,
    question: &str,
    state: &AgentState,
    draft: Option<&str>,
) -> Result<(Option<String>, Observation, u64, f64), BackendError> {
    let mut user = situation_text(question, state);
    user.push_str("Draft answer: ");
    user.push_str(draft.unwrap_or("(none yet)"));
    user.push_str("\nVerify the draft against the evidence.");
    let response = backend.complete(&request(VERIFY_SYSTEM, user))?;
    let revised = find_object_with_key(&response.text, "draft")
        .and_then(|map| map.get("draft").and_then(|v| v.as_str()).and_then(non_empty));
    let content = response.text.trim().to_string();
    let tokens = estimate_tokens(&content);
    let observation = Observation::new(ObservationSource::Verification, content, tokens, 0.0)
        .expect("verification observations always carry a source");
    Ok((
        revised,
        observation,
        response.total_tokens(),
        response.latency_seconds,
    ))
}

/// Asks the backend to rewrite the search query (search-twice workflow).
/// Falls back to the original question when the reply is empty.
pub(crate) fn reformulate_call(
    backend: &dyn Backend,
    question: &str,
    state: &AgentState,
) -> Result<(String, u64, f64), BackendError> {
    let mut user = situation_text(question, state);
    user.push_str("Reformulate the search query.");
    let response = backend.complete(&request(REFORMULATE_SYSTEM, user))?;
    let query = non_empty(&response.text).unwrap_or_else(|| question.to_string());
    Ok((query, response.total_tokens(), response.latency_seconds))
}

/// Asks the backend what to verify (search+verify workflow). Returns the
/// claim under check (if stated) and the verification query, falling back
/// to the reply text or the question itself.
pub(crate) fn workflow_verify_call(
    backend: &dyn Backend,
    question: &str,
    state: &AgentState,
    draft: Option<&str>,
) -> Result<(Option<String>, String, u64, f64), BackendError> {
    let mut user = situation_text(question, state);
    user.push_str("Draft answer: ");
    user.push_str(draft.unwrap_or("(none yet)"));
    user.push_str("\nName the claim to verify and the search query to check it with.");
    let response = backend.complete(&request(WORKFLOW_VERIFY_SYSTEM, user))?;
    let block = find_object_with_key(&response.text, "query");
    let claim = block
        .as_ref()
        .and_then(|map| map.get("claim").and_then(|v| v.as_str()).and_then(non_empty));
    let query = block
        .as_ref()
        .and_then(|map| map.get("query").and_then(|v| v.as_str()).and_then(non_empty))
        .or_else(|| non_empty(&response.text))
        .unwrap_or_else(|| question.to_string());
    Ok((
        claim,
        query,
        response.total_tokens(),
        response.latency_seconds,
    ))
}

/// One ReAct turn: returns the raw reply text and the bill. Parsing is the
/// caller's job so malformed turns can be billed without being applied.
pub(crate) fn react_call(
    backend: &dyn Backend,
    question: &str,
    transcript: &[String],
) -> Result<(String, u64, f64), BackendError> {
    let mut user = format!("Question: {question}\n");
    for line in transcript {
        user.push_str(line);
        user.push('\n');
    }
    user.push_str("Next step?");
    let response = backend.complete(&request(REACT_SYSTEM, user))?;
    let tokens = response.total_tokens();
    Ok((response.text, tokens, response.latency_seconds))
}

/// A parsed ReAct action line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum ReactAction {
    /// `Action: Search[query]` with a non-empty query.
    Search(String),
    /// `Action: Finish[answer]`; an empty answer is allowed.
    Finish(String),
}

/// Parses the first `Action:` line of a ReAct reply. Returns `None` for
/// anything that does not match the `Search[...]` / `Finish[...]` grammar,
/// including `Search[]` with an empty query.
pub(crate) fn parse_react_action(text: &str) -> Option<ReactAction> {
    let action_line = text.lines().find_map(|line| {
        let trimmed = line.trim();
        trimmed.strip_prefix("Action:").map(str::trim)
    })?;
    let payload = |rest: &str| -> Option<String> {
        let open = rest.find('[')?;
        let close = rest.rfind(']')?;
        (open < close).then(|| rest[open + 1..close].trim().to_string())
    };
    if let Some(rest) = action_line.strip_prefix("Search") {
        let query = payload(rest)?;
        return (!query.is_empty()).then_some(ReactAction::Search(query));
    }
    if let Some(rest) = action_line.strip_prefix("Finish") {
        return payload(rest).map(ReactAction::Finish);
    }
    None
}

/// Runs a BM25 query and packages the hits as an observation. Local
/// retrieval bills zero latency and is always attributed to `source`
/// (retrieval for retrieve/tool_call steps, including verification-by-
/// retrieval in the search+verify workflow).
pub(crate) fn execute_retrieval(
    index: &Bm25Index,
    query: &str,
    k: usize,
    source: ObservationSource,
) -> Observation {
    let hits = index.retrieve_top_k(query, k);
    let content = if hits.is_empty() {
        "No documents matched the query.".to_string()
    } else {
        let mut text = String::new();
        for (position, hit) in hits.iter().enumerate() {
            if position > 0 {
                text.push('\n');
            }
            text.push('[');
            text.push_str(&hit.doc_id);
            text.push_str("] ");
            text.push_str(&hit.snippet);
        }
        text
    };
    let tokens = estimate_tokens(&content);
    Observation::new(source, content, tokens, 0.0)
        .expect("retrieval observations always carry a source")
}
