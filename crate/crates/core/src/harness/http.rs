//! Adapters behind an HTTP endpoint. Each protocol message is POSTed as a
//! JSON body and the reply message comes back as the response body.

use std::time::Duration;

use super::{check_handshake, Adapter, AdapterError, AdapterRequest, AdapterResponse, Handshake, Message};

pub struct HttpAdapter {
    agent: ureq::Agent,
    endpoint: String,
    handshake: Handshake,
}

impl HttpAdapter {
    pub fn connect(endpoint: impl Into<String>, timeout: Duration) -> Result<Self, AdapterError> {
        let endpoint = endpoint.into();
        let agent: ureq::Agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
        let handshake = match post(&agent, &endpoint, &Message::hello(), timeout)? {
            Message::Handshake(hs) => hs,
            Message::Error { message, .. } => return Err(AdapterError::Protocol(message)),
            other => return Err(AdapterError::Protocol(format!("expected a handshake, got {other:?}"))),
        };
        check_handshake(&handshake)?;
        log::info!("adapter {} connected at {endpoint}", handshake.agent_id);
        Ok(HttpAdapter { agent, endpoint, handshake })
    }
}

fn post(agent: &ureq::Agent, endpoint: &str, msg: &Message, timeout: Duration) -> Result<Message, AdapterError> {
    let sent = agent
        .post(endpoint)
        .config()
        .timeout_global(Some(timeout))
        .build()
        .header("content-type", "application/json")
        .send(serde_json::to_string(msg).expect("protocol messages serialize"));
    let mut resp = match sent {
        Ok(r) => r,
        Err(ureq::Error::Timeout(_)) => return Err(AdapterError::Timeout),
        Err(e @ (ureq::Error::ConnectionFailed | ureq::Error::HostNotFound | ureq::Error::Io(_))) => {
            return Err(AdapterError::Unreachable(e.to_string()))
        }
        Err(e) => return Err(AdapterError::Protocol(e.to_string())),
    };
    let status = resp.status().as_u16();
    let body = resp.body_mut().read_to_string().map_err(|e| match e {
        ureq::Error::Timeout(_) => AdapterError::Timeout,
        other => AdapterError::Protocol(other.to_string()),
    })?;
    if !(200..300).contains(&status) {
        return Err(AdapterError::Remote(format!("status {status}: {body}")));
    }
    Message::from_line(&body).map_err(|e| AdapterError::Protocol(format!("unreadable reply: {e}")))
}

impl Adapter for HttpAdapter {
    fn handshake(&self) -> &Handshake {
        &self.handshake
    }

    fn call(&self, request: &AdapterRequest, timeout: Duration) -> Result<AdapterResponse, AdapterError> {
        match post(&self.agent, &self.endpoint, &Message::Request(request.clone()), timeout)? {
            Message::Response(r) => Ok(r),
            Message::Error { message, .. } => Err(AdapterError::Remote(message)),
            other => Err(AdapterError::Protocol(format!("expected a response, got {other:?}"))),
        }
    }
}
