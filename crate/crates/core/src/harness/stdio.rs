//! Adapters running as a child process, one JSON message per line on
//! stdin and stdout. Stderr is passed through.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{channel, Receiver, RecvTimeoutError, Sender};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use super::{check_handshake, Adapter, AdapterError, AdapterRequest, AdapterResponse, Handshake, Message};

type Reply = Result<AdapterResponse, AdapterError>;
type Pending = Arc<Mutex<HashMap<String, Sender<Reply>>>>;

pub struct StdioAdapter {
    handshake: Handshake,
    child: Child,
    stdin: Mutex<Option<ChildStdin>>,
    pending: Pending,
    reader: Option<JoinHandle<()>>,
}

impl StdioAdapter {
    /// Runs `command` through `sh -c`.
    pub fn spawn(command: &str, handshake_timeout: Duration) -> Result<Self, AdapterError> {
        let mut cmd = Command::new("sh");
        cmd.arg("-c").arg(command);
        Self::from_command(cmd, handshake_timeout)
    }

    pub fn from_command(mut cmd: Command, handshake_timeout: Duration) -> Result<Self, AdapterError> {
        let mut child = cmd
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| AdapterError::Unreachable(format!("cannot start adapter: {e}")))?;
        let stdout = child.stdout.take().expect("stdout is piped");
        let mut stdin = child.stdin.take().expect("stdin is piped");
        let pending: Pending = Arc::default();
        let (hs_tx, hs_rx) = channel();
        let reader = {
            let pending = Arc::clone(&pending);
            std::thread::spawn(move || read_loop(BufReader::new(stdout), hs_tx, pending))
        };

        let started = stdin.write_all(Message::hello().to_line().as_bytes()).and_then(|_| stdin.flush());
        let handshake = match started {
            Ok(()) => wait_handshake(&hs_rx, handshake_timeout),
            Err(e) => Err(AdapterError::Unreachable(format!("adapter closed its input: {e}"))),
        };
        let handshake = match handshake.and_then(|hs| check_handshake(&hs).map(|_| hs)) {
            Ok(hs) => hs,
            Err(e) => {
                let _ = child.kill();
                let _ = child.wait();
                return Err(e);
            }
        };
        log::info!("adapter {} connected over stdio", handshake.agent_id);
        Ok(StdioAdapter { handshake, child, stdin: Mutex::new(Some(stdin)), pending, reader: Some(reader) })
    }
}

fn wait_handshake(rx: &Receiver<Result<Handshake, AdapterError>>, timeout: Duration) -> Result<Handshake, AdapterError> {
    match rx.recv_timeout(timeout) {
        Ok(r) => r,
        Err(RecvTimeoutError::Timeout) => Err(AdapterError::Timeout),
        Err(RecvTimeoutError::Disconnected) => Err(AdapterError::Unreachable("adapter exited before the handshake".into())),
    }
}

fn read_loop(out: impl BufRead, hs_tx: Sender<Result<Handshake, AdapterError>>, pending: Pending) {
    for line in out.lines() {
        let Ok(line) = line else { break };
        if line.trim().is_empty() {
            continue;
        }
        match Message::from_line(&line) {
            Ok(Message::Handshake(hs)) => {
                let _ = hs_tx.send(Ok(hs));
            }
            Ok(Message::Response(resp)) => {
                let tx = pending.lock().expect("pending lock").remove(&resp.request_id);
                match tx {
                    Some(tx) => {
                        let _ = tx.send(Ok(resp));
                    }
                    None => log::warn!("adapter answered unknown or expired request {}", resp.request_id),
                }
            }
            Ok(Message::Error { request_id: Some(id), message }) => {
                if let Some(tx) = pending.lock().expect("pending lock").remove(&id) {
                    let _ = tx.send(Err(AdapterError::Remote(message)));
                }
            }
            Ok(Message::Error { request_id: None, message }) => {
                log::warn!("adapter reported: {message}");
                let _ = hs_tx.send(Err(AdapterError::Protocol(message)));
            }
            Ok(other) => log::warn!("ignoring unexpected adapter message {other:?}"),
            Err(e) => log::warn!("ignoring unreadable adapter line: {e}"),
        }
    }
    // dropping the senders wakes every waiter with a disconnect
    pending.lock().expect("pending lock").clear();
}

impl Adapter for StdioAdapter {
    fn handshake(&self) -> &Handshake {
        &self.handshake
    }

    fn call(&self, request: &AdapterRequest, timeout: Duration) -> Result<AdapterResponse, AdapterError> {
        let (tx, rx) = channel();
        self.pending.lock().expect("pending lock").insert(request.request_id.clone(), tx);
        let line = Message::Request(request.clone()).to_line();
        let written = {
            let mut guard = self.stdin.lock().expect("stdin lock");
            match guard.as_mut() {
                Some(stdin) => stdin.write_all(line.as_bytes()).and_then(|_| stdin.flush()),
                None => Err(std::io::Error::from(std::io::ErrorKind::BrokenPipe)),
            }
        };
        if let Err(e) = written {
            self.pending.lock().expect("pending lock").remove(&request.request_id);
            return Err(AdapterError::Unreachable(format!("cannot write to adapter: {e}")));
        }
        match rx.recv_timeout(timeout) {
            Ok(reply) => reply,
            Err(RecvTimeoutError::Timeout) => {
                self.pending.lock().expect("pending lock").remove(&request.request_id);
                Err(AdapterError::Timeout)
            }
            Err(RecvTimeoutError::Disconnected) => Err(AdapterError::Unreachable("adapter exited".into())),
        }
    }
}

impl Drop for StdioAdapter {
    fn drop(&mut self) {
        // closing stdin lets a well-behaved adapter exit on its own
        self.stdin.lock().map(|mut s| s.take()).ok();
        let deadline = std::time::Instant::now() + Duration::from_secs(2);
        loop {
            match self.child.try_wait() {
                Ok(Some(_)) => break,
                Ok(None) if std::time::Instant::now() < deadline => std::thread::sleep(Duration::from_millis(10)),
                _ => {
                    let _ = self.child.kill();
                    let _ = self.child.wait();
                    break;
                }
            }
        }
        if let Some(r) = self.reader.take() {
            let _ = r.join();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Dimension;

    fn req(id: &str) -> AdapterRequest {
        AdapterRequest {
            request_id: id.into(),
            instruction_id: id.into(),
            instruction: "x".into(),
            low_level: None,
            dimension: Dimension::Uwiu,
            screenshot_ref: None,
            image_base64: None,
        }
    }

    // A shell adapter: handshake, then answer each request with its id.
    const ECHO: &str = r#"read hello; echo '{"type":"handshake","protocol_version":1,"agent_id":"sh","image_mode":"path"}';
while read line; do id=$(echo "$line" | sed 's/.*"request_id":"\([^"]*\)".*/\1/'); echo "{\"type\":\"response\",\"request_id\":\"$id\",\"raw\":\"WAIT\"}"; done"#;

    #[test]
    fn shell_adapter_round_trip() {
        let a = StdioAdapter::spawn(ECHO, Duration::from_secs(10)).unwrap();
        assert_eq!(a.handshake().agent_id, "sh");
        let r = a.call(&req("q1"), Duration::from_secs(10)).unwrap();
        assert_eq!((r.request_id.as_str(), r.raw.as_str()), ("q1", "WAIT"));
    }

    #[test]
    fn silent_adapter_times_out() {
        let a = StdioAdapter::spawn(
            r#"read hello; echo '{"type":"handshake","protocol_version":1,"agent_id":"mute","image_mode":"path"}'; cat > /dev/null"#,
            Duration::from_secs(10),
        )
        .unwrap();
        assert_eq!(a.call(&req("q"), Duration::from_millis(100)), Err(AdapterError::Timeout));
    }

    #[test]
    fn exiting_adapter_is_unreachable() {
        assert!(matches!(StdioAdapter::spawn("exit 0", Duration::from_secs(10)), Err(AdapterError::Unreachable(_))));
        let bad_version = r#"read hello; echo '{"type":"handshake","protocol_version":9,"agent_id":"x","image_mode":"path"}'"#;
        assert!(matches!(StdioAdapter::spawn(bad_version, Duration::from_secs(10)), Err(AdapterError::Protocol(_))));
    }
}
