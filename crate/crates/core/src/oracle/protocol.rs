//! Newline-delimited JSON messages exchanged with an external trainer.
//!
//! Every message is one UTF-8 JSON object per line with a `type` tag.
//! Requests carry monotonically increasing integer ids; each response echoes
//! the id of the request it answers. Unknown fields are ignored.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub const PROTOCOL_VERSION: &str = "slice-tuner/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Message {
    Hello {
        version: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<u64>,
    },
    Eval {
        id: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        fractions: Option<BTreeMap<String, f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sizes: Option<BTreeMap<String, u64>>,
        seed: u64,
    },
    Losses {
        id: u64,
        losses: BTreeMap<String, f64>,
    },
    Acquire {
        id: u64,
        counts: BTreeMap<String, u64>,
    },
    Ack {
        id: u64,
        realized: BTreeMap<String, u64>,
        #[serde(default)]
        pool_limited: bool,
    },
    Error {
        #[serde(default)]
        id: Option<u64>,
        code: String,
        message: String,
    },
}

impl Message {
    pub fn id(&self) -> Option<u64> {
        match self {
            Message::Hello { id, .. } | Message::Error { id, .. } => *id,
            Message::Eval { id, .. }
            | Message::Losses { id, .. }
            | Message::Acquire { id, .. }
            | Message::Ack { id, .. } => Some(*id),
        }
    }

    pub fn to_line(&self) -> String {
        let mut line = serde_json::to_string(self).expect("messages serialize");
        line.push('\n');
        line
    }
}
