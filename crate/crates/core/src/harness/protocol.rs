//! Messages exchanged with an agent adapter.
//!
//! Every message is one JSON object on one line with a `type` tag. The
//! harness opens with `hello`, the adapter answers `handshake`, then the
//! harness sends `request`s and the adapter answers each with a `response`
//! (or an `error`) carrying the same `request_id`. Responses may arrive in
//! any order. Requests carry only the current screen and instruction: there
//! is no field for earlier steps or actions.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::model::Dimension;

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImageMode {
    /// `screenshot_ref` holds a filesystem path.
    Path,
    /// `image_base64` holds the encoded image bytes.
    Inline,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Handshake {
    pub protocol_version: u32,
    pub agent_id: String,
    pub image_mode: ImageMode,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdapterRequest {
    pub request_id: String,
    pub instruction_id: String,
    pub instruction: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub low_level: Option<String>,
    pub dimension: Dimension,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub screenshot_ref: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_base64: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdapterResponse {
    pub request_id: String,
    pub raw: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Message {
    Hello {
        protocol_version: u32,
    },
    Handshake(Handshake),
    Request(AdapterRequest),
    Response(AdapterResponse),
    Error {
        #[serde(default)]
        request_id: Option<String>,
        message: String,
    },
}

impl Message {
    pub fn hello() -> Self {
        Message::Hello { protocol_version: PROTOCOL_VERSION }
    }

    pub fn to_line(&self) -> String {
        let mut s = serde_json::to_string(self).expect("protocol messages serialize");
        s.push('\n');
        s
    }

    pub fn from_line(line: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(line.trim_end())
    }
}

/// Runs the adapter side of the protocol over a pair of streams until the
/// input closes. Used by the bundled replay adapter binary and by tests.
pub fn serve<R: BufRead, W: Write>(
    input: R,
    mut output: W,
    handshake: Handshake,
    mut answer: impl FnMut(&AdapterRequest) -> Result<String, String>,
) -> std::io::Result<()> {
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let reply = match Message::from_line(&line) {
            Ok(Message::Hello { protocol_version }) if protocol_version == PROTOCOL_VERSION => {
                Message::Handshake(handshake.clone())
            }
            Ok(Message::Hello { protocol_version }) => Message::Error {
                request_id: None,
                message: format!("unsupported protocol version {protocol_version}"),
            },
            Ok(Message::Request(req)) => match answer(&req) {
                Ok(raw) => Message::Response(AdapterResponse { request_id: req.request_id, raw, latency_ms: None, model: None }),
                Err(message) => Message::Error { request_id: Some(req.request_id), message },
            },
            Ok(other) => Message::Error { request_id: None, message: format!("unexpected message {other:?}") },
            Err(e) => Message::Error { request_id: None, message: format!("unreadable message: {e}") },
        };
        output.write_all(reply.to_line().as_bytes())?;
        output.flush()?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wire_examples() {
        assert_eq!(Message::hello().to_line(), "{\"type\":\"hello\",\"protocol_version\":1}\n");
        let hs = Message::Handshake(Handshake { protocol_version: 1, agent_id: "a".into(), image_mode: ImageMode::Path });
        assert_eq!(hs.to_line(), "{\"type\":\"handshake\",\"protocol_version\":1,\"agent_id\":\"a\",\"image_mode\":\"path\"}\n");
        let req = Message::Request(AdapterRequest {
            request_id: "r1".into(),
            instruction_id: "i1".into(),
            instruction: "Open settings".into(),
            low_level: None,
            dimension: Dimension::Mwam,
            screenshot_ref: Some("s.png".into()),
            image_base64: None,
        });
        let line = req.to_line();
        assert_eq!(
            line,
            "{\"type\":\"request\",\"request_id\":\"r1\",\"instruction_id\":\"i1\",\"instruction\":\"Open settings\",\"dimension\":\"mwam\",\"screenshot_ref\":\"s.png\"}\n"
        );
        assert_eq!(Message::from_line(&line).unwrap(), req);
    }

    #[test]
    fn requests_reject_history() {
        let line = "{\"type\":\"request\",\"request_id\":\"r\",\"instruction_id\":\"i\",\"instruction\":\"x\",\"dimension\":\"uwiu\",\"history\":[]}";
        assert!(Message::from_line(line).is_err());
    }

    #[test]
    fn serve_loop() {
        let input = format!(
            "{}{}",
            Message::hello().to_line(),
            "{\"type\":\"request\",\"request_id\":\"7\",\"instruction_id\":\"i\",\"instruction\":\"x\",\"dimension\":\"uwiu\"}\n"
        );
        let mut out = Vec::new();
        let hs = Handshake { protocol_version: 1, agent_id: "t".into(), image_mode: ImageMode::Path };
        serve(input.as_bytes(), &mut out, hs, |r| Ok(format!("echo {}", r.instruction_id))).unwrap();
        let lines: Vec<Message> = String::from_utf8(out).unwrap().lines().map(|l| Message::from_line(l).unwrap()).collect();
        assert!(matches!(lines[0], Message::Handshake(_)));
        assert_eq!(
            lines[1],
            Message::Response(AdapterResponse { request_id: "7".into(), raw: "echo i".into(), latency_ms: None, model: None })
        );
    }
}
