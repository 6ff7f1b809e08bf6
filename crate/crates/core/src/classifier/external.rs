//! Subprocess provider speaking newline-delimited JSON over stdio.
//!
//! ```text
//! -> {"id": 7, "width": 2, "height": 1, "pixels": "<base64 RGB8, row-major>"}
//! <- {"id": 7, "label": 5, "confidence": 0.93}
//! ```
//!
//! One request is in flight at a time; the mutex around the session makes the
//! handle safe to share between threads.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::{ClassifierError, Classify, Label, Verdict};
use crate::imaging::Image;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Serialize)]
struct Request<'a> {
    id: u64,
    width: usize,
    height: usize,
    pixels: &'a str,
}

#[derive(Deserialize)]
struct Response {
    id: u64,
    label: Label,
    confidence: f64,
}

enum Line {
    Text(String),
    Eof,
    Failed(String),
}

struct Session {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<Line>,
    next_id: u64,
    // once set, the stream is out of sync and every later call fails fast
    poisoned: Option<ClassifierError>,
}

pub struct ExternalClassifier {
    command: String,
    timeout: Duration,
    session: Mutex<Session>,
}

impl ExternalClassifier {
    pub fn spawn(command: &str, timeout: Duration) -> Result<Self, ClassifierError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| ClassifierError::Spawn(format!("{command}: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::Builder::new()
            .name("classifier-stdout".into())
            .spawn(move || {
                let mut reader = BufReader::new(stdout);
                loop {
                    let mut buf = String::new();
                    let msg = match reader.read_line(&mut buf) {
                        Ok(0) => Line::Eof,
                        Ok(_) => Line::Text(buf),
                        Err(e) => Line::Failed(e.to_string()),
                    };
                    let done = !matches!(msg, Line::Text(_));
                    if tx.send(msg).is_err() || done {
                        break;
                    }
                }
            })
            .map_err(|e| ClassifierError::Spawn(e.to_string()))?;
        Ok(Self {
            command: command.to_owned(),
            timeout,
            session: Mutex::new(Session {
                child,
                stdin,
                lines: rx,
                next_id: 0,
                poisoned: None,
            }),
        })
    }

    fn exchange(&self, session: &mut Session, image: &Image) -> Result<Verdict, ClassifierError> {
        let id = session.next_id;
        session.next_id += 1;
        let pixels = STANDARD.encode(image.to_rgb_bytes());
        let request = Request {
            id,
            width: image.width(),
            height: image.height(),
            pixels: &pixels,
        };
        let mut line = serde_json::to_string(&request).expect("request serializes");
        line.push('\n');
        session
            .stdin
            .write_all(line.as_bytes())
            .and_then(|()| session.stdin.flush())
            .map_err(|e| ClassifierError::ProviderFailure(format!("writing request {id}: {e}")))?;

        let text = match session.lines.recv_timeout(self.timeout) {
            Ok(Line::Text(text)) => text,
            Ok(Line::Eof) | Err(RecvTimeoutError::Disconnected) => {
                return Err(ClassifierError::ProviderFailure(format!(
                    "process exited while answering request {id}"
                )))
            }
            Ok(Line::Failed(e)) => {
                return Err(ClassifierError::ProviderFailure(format!("reading response {id}: {e}")))
            }
            Err(RecvTimeoutError::Timeout) => return Err(ClassifierError::Timeout(self.timeout)),
        };
        let response: Response = serde_json::from_str(text.trim_end())
            .map_err(|e| ClassifierError::ProtocolViolation(format!("{e}: {:?}", text.trim_end())))?;
        if response.id != id {
            return Err(ClassifierError::ProtocolViolation(format!(
                "response id {} does not match request id {id}",
                response.id
            )));
        }
        if !(0.0..=1.0).contains(&response.confidence) {
            return Err(ClassifierError::ProtocolViolation(format!(
                "confidence {} outside [0, 1]",
                response.confidence
            )));
        }
        Ok(Verdict::new(response.label, response.confidence))
    }
}

impl Classify for ExternalClassifier {
    fn classify(&self, image: &Image) -> Result<Verdict, ClassifierError> {
        let mut session = self
            .session
            .lock()
            .map_err(|_| ClassifierError::ProviderFailure("session lock poisoned".into()))?;
        if let Some(err) = &session.poisoned {
            return Err(err.clone());
        }
        let result = self.exchange(&mut session, image);
        if let Err(err) = &result {
            session.poisoned = Some(err.clone());
        }
        result
    }

    fn describe(&self) -> String {
        format!("external:{}", self.command)
    }
}

impl Drop for ExternalClassifier {
    fn drop(&mut self) {
        if let Ok(session) = self.session.get_mut() {
            let _ = session.child.kill();
            let _ = session.child.wait();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // echoes the request id with a fixed label
    const ECHO: &str = r#"while IFS= read -r line; do
        id=$(printf '%s' "$line" | sed 's/^{"id":\([0-9]*\),.*/\1/')
        printf '{"id":%s,"label":5,"confidence":0.93}\n' "$id"
    done"#;

    fn img() -> Image {
        Image::filled(2, 1, [1, 2, 3])
    }

    #[test]
    fn round_trip_verdict() {
        let c = ExternalClassifier::spawn(ECHO, Duration::from_secs(10)).unwrap();
        for _ in 0..3 {
            assert_eq!(c.classify(&img()).unwrap(), Verdict::new(5, 0.93));
        }
    }

    #[test]
    fn request_wire_format() {
        let pixels = STANDARD.encode(img().to_rgb_bytes());
        let req = Request {
            id: 7,
            width: 2,
            height: 1,
            pixels: &pixels,
        };
        assert_eq!(
            serde_json::to_string(&req).unwrap(),
            r#"{"id":7,"width":2,"height":1,"pixels":"AQIDAQID"}"#
        );
    }

    #[test]
    fn mismatched_id_is_a_protocol_violation() {
        let cmd = r#"read -r line; echo '{"id":99,"label":1,"confidence":0.5}'; sleep 5"#;
        let c = ExternalClassifier::spawn(cmd, Duration::from_secs(10)).unwrap();
        assert!(matches!(c.classify(&img()), Err(ClassifierError::ProtocolViolation(_))));
        // the stream is out of sync from now on
        assert!(matches!(c.classify(&img()), Err(ClassifierError::ProtocolViolation(_))));
    }

    #[test]
    fn non_json_line_is_a_protocol_violation() {
        let cmd = r#"read -r line; echo 'loading weights...'; sleep 5"#;
        let c = ExternalClassifier::spawn(cmd, Duration::from_secs(10)).unwrap();
        assert!(matches!(c.classify(&img()), Err(ClassifierError::ProtocolViolation(_))));
    }

    #[test]
    fn out_of_range_confidence_is_rejected() {
        let cmd = r#"read -r line; echo '{"id":0,"label":1,"confidence":1.5}'; sleep 5"#;
        let c = ExternalClassifier::spawn(cmd, Duration::from_secs(10)).unwrap();
        assert!(matches!(c.classify(&img()), Err(ClassifierError::ProtocolViolation(_))));
    }

    #[test]
    fn exit_mid_call_is_a_provider_failure() {
        let c = ExternalClassifier::spawn("read -r line; exit 0", Duration::from_secs(10)).unwrap();
        assert!(matches!(c.classify(&img()), Err(ClassifierError::ProviderFailure(_))));
    }

    #[test]
    fn silent_process_times_out() {
        let c = ExternalClassifier::spawn("sleep 30", Duration::from_millis(200)).unwrap();
        assert_eq!(
            c.classify(&img()).unwrap_err(),
            ClassifierError::Timeout(Duration::from_millis(200))
        );
    }

    #[test]
    fn concurrent_callers_are_serialized() {
        let c = std::sync::Arc::new(ExternalClassifier::spawn(ECHO, Duration::from_secs(10)).unwrap());
        let handles: Vec<_> = (0..4)
            .map(|_| {
                let c = c.clone();
                thread::spawn(move || (0..5).map(|_| c.classify(&img()).unwrap().label).sum::<i64>())
            })
            .collect();
        let total: i64 = handles.into_iter().map(|h| h.join().unwrap()).sum();
        assert_eq!(total, 5 * 20);
    }
}
