//! Extraction of heuristic control signals from model output.
//!
//! The control protocol asks the model to embed one JSON object in its reply
//! carrying `expected_gain` (a scalar, or a map keyed by action kind) and
//! `uncertainty`. [`parse_signals`] finds the first such well-formed block
//! anywhere in the text, clips every value into `[0, 1]`, and falls back to
//! neutral defaults with `parse_ok = false` when nothing usable is found —
//! signal extraction itself never errors.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::state::{ActionKind, ActionValues};

/// The model's self-reported decision signals for one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalEstimate {
    /// Expected gain per action kind, each clipped to `[0, 1]`.
    pub per_action_gain: ActionValues,
    /// Self-reported uncertainty about the current draft, clipped to `[0, 1]`.
    pub uncertainty: f64,
    /// False when the defaults below were substituted for unparseable output.
    pub parse_ok: bool,
}

impl SignalEstimate {
    /// Neutral defaults used when no signal block can be parsed.
    pub fn fallback() -> Self {
        SignalEstimate {
            per_action_gain: ActionValues::uniform(0.5),
            uncertainty: 0.5,
            parse_ok: false,
        }
    }
}

/// A successfully parsed control block: the signals plus the raw JSON map,
/// from which the orchestrator reads optional fields (proposed arguments,
/// draft answer).
pub(crate) struct ControlBlock {
    pub signals: SignalEstimate,
    pub raw: serde_json::Map<String, Value>,
}

fn clip01(value: f64) -> f64 {
    value.clamp(0.0, 1.0)
}

fn parse_gain(value: &Value) -> Option<ActionValues> {
    if let Some(scalar) = value.as_f64() {
        return Some(ActionValues::uniform(clip01(scalar)));
    }
    let map = value.as_object()?;
    // Kinds missing from an explicit map default to zero gain.
    let mut gains = ActionValues::uniform(0.0);
    for kind in ActionKind::ALL {
        if let Some(gain) = map.get(kind.as_str()).and_then(Value::as_f64) {
            gains.set(kind, clip01(gain));
        }
    }
    Some(gains)
}

/// Yields every JSON object that can be parsed starting at some `{` in the
/// text, in order of starting position (outermost blocks first).
fn json_objects(text: &str) -> impl Iterator<Item = serde_json::Map<String, Value>> + '_ {
    text.char_indices().filter(|(_, c)| *c == '{').filter_map(move |(start, _)| {
        let mut stream = serde_json::Deserializer::from_str(&text[start..]).into_iter::<Value>();
        match stream.next() {
            Some(Ok(Value::Object(map))) => Some(map),
            _ => None,
        }
    })
}

/// Finds the first JSON object in `text` with usable `expected_gain` and
/// `uncertainty` fields.
pub(crate) fn find_control_block(text: &str) -> Option<ControlBlock> {
    for map in json_objects(text) {
        let (Some(gain_value), Some(uncertainty_value)) =
            (map.get("expected_gain"), map.get("uncertainty"))
        else {
            continue;
        };
        let (Some(per_action_gain), Some(uncertainty)) =
            (parse_gain(gain_value), uncertainty_value.as_f64())
        else {
            continue;
        };
        return Some(ControlBlock {
            signals: SignalEstimate {
                per_action_gain,
                uncertainty: clip01(uncertainty),
                parse_ok: true,
            },
            raw: map,
        });
    }
    None
}

/// Parses control signals out of arbitrary model text. See the module docs
/// for the format; unusable input yields [`SignalEstimate::fallback`].
pub fn parse_signals(text: &str) -> SignalEstimate {
    find_control_block(text).map(|block| block.signals).unwrap_or_else(SignalEstimate::fallback)
}

/// Finds the first JSON object in `text` that carries `key`, scanning the
/// same way as control-block parsing. Used for lighter-weight structured
/// replies (verification drafts, workflow verification queries).
pub(crate) fn find_object_with_key(
    text: &str,
    key: &str,
) -> Option<serde_json::Map<String, Value>> {
    json_objects(text).find(|map| map.contains_key(key))
}
