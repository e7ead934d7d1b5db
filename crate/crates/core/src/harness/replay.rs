//! An in-process adapter that answers every instruction with its gold action.
//! Evaluating it must give EM 1 on every state.

use std::collections::HashMap;
use std::time::Duration;

use super::{Adapter, AdapterError, AdapterRequest, AdapterResponse, Handshake, ImageMode, PROTOCOL_VERSION};
use crate::grammar::serialize_action;
use crate::model::StateGroup;

pub const REPLAY_AGENT_ID: &str = "gold-replay";

pub struct ReplayAdapter {
    handshake: Handshake,
    answers: HashMap<String, String>,
}

impl ReplayAdapter {
    pub fn new(groups: &[StateGroup]) -> Self {
        let answers = groups
            .iter()
            .flat_map(|g| g.instructions.iter())
            .map(|i| (i.instruction_id().to_string(), serialize_action(&i.gold_action())))
            .collect();
        ReplayAdapter {
            handshake: Handshake { protocol_version: PROTOCOL_VERSION, agent_id: REPLAY_AGENT_ID.into(), image_mode: ImageMode::Path },
            answers,
        }
    }

    pub fn answer(&self, instruction_id: &str) -> Option<&str> {
        self.answers.get(instruction_id).map(String::as_str)
    }
}

impl Adapter for ReplayAdapter {
    fn handshake(&self) -> &Handshake {
        &self.handshake
    }

    fn call(&self, request: &AdapterRequest, _timeout: Duration) -> Result<AdapterResponse, AdapterError> {
        let raw = self
            .answer(&request.instruction_id)
            .ok_or_else(|| AdapterError::Remote(format!("unknown instruction {}", request.instruction_id)))?;
        Ok(AdapterResponse { request_id: request.request_id.clone(), raw: raw.to_string(), latency_ms: Some(0), model: None })
    }
}
