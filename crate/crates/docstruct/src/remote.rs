//! Predictor backed by an HTTP text generation service.
//!
//! Each step POSTs `{"prompt", "max_new_tokens", "stop"}` as JSON and
//! expects `{"text": "<action lines>"}` back. Timeouts, transport errors,
//! 429 and 5xx responses are retried with exponential backoff; other
//! statuses fail at once.

use std::thread;
use std::time::{Duration, Instant};

use docstruct_core::{
    ActionPredictor, PredictionRequest, PredictionResponse, PredictorError, PredictorErrorKind,
};
use serde::{Deserialize, Serialize};

/// Environment variable holding an optional bearer token.
pub const API_KEY_ENV: &str = "DOCSTRUCT_API_KEY";

#[derive(Debug, Clone)]
pub struct RemoteConfig {
    pub url: String,
    /// Per-attempt deadline.
    pub timeout: Duration,
    /// Total attempts per step, including the first.
    pub max_attempts: u32,
    /// Delay before the first retry; doubles after each one.
    pub backoff: Duration,
    /// Fixed token budget; default is eight tokens per expected action.
    pub max_new_tokens: Option<usize>,
    pub api_key: Option<String>,
}

impl RemoteConfig {
    pub fn new(url: impl Into<String>) -> Self {
        RemoteConfig {
            url: url.into(),
            timeout: Duration::from_secs(30),
            max_attempts: 3,
            backoff: Duration::from_millis(200),
            max_new_tokens: None,
            api_key: std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()),
        }
    }
}

#[derive(Serialize)]
struct GenerateRequest<'a> {
    prompt: &'a str,
    max_new_tokens: usize,
    stop: [&'a str; 1],
}

#[derive(Deserialize)]
struct GenerateResponse {
    text: String,
}

pub struct RemotePredictor {
    config: RemoteConfig,
    agent: ureq::Agent,
}

impl RemotePredictor {
    pub fn new(config: RemoteConfig) -> Self {
        let agent = ureq::Agent::new_with_config(
            ureq::Agent::config_builder()
                .timeout_global(Some(config.timeout))
                .http_status_as_error(false)
                .build(),
        );
        RemotePredictor { config, agent }
    }

    /// One attempt. `Err((retryable, error))` on failure.
    fn attempt(&self, request: &PredictionRequest) -> Result<String, (bool, PredictorError)> {
        let body = GenerateRequest {
            prompt: &request.prompt,
            max_new_tokens: self
                .config
                .max_new_tokens
                .unwrap_or(8 * request.expected_actions.max(1)),
            stop: ["###"],
        };
        let mut post = self.agent.post(&self.config.url);
        if let Some(key) = &self.config.api_key {
            post = post.header("Authorization", format!("Bearer {key}"));
        }
        let mut response = post.send_json(&body).map_err(|e| match e {
            ureq::Error::Timeout(_) => (
                true,
                PredictorError::new(PredictorErrorKind::Timeout, e.to_string()),
            ),
            other => (
                true,
                PredictorError::new(PredictorErrorKind::Transport, other.to_string()),
            ),
        })?;
        let status = response.status().as_u16();
        if status != 200 {
            let retryable = status == 429 || status >= 500;
            let mut err =
                PredictorError::new(PredictorErrorKind::Backend, format!("HTTP status {status}"));
            err.status = Some(status);
            return Err((retryable, err));
        }
        let parsed: GenerateResponse = response.body_mut().read_json().map_err(|e| {
            let kind = match e {
                ureq::Error::Timeout(_) => PredictorErrorKind::Timeout,
                _ => PredictorErrorKind::Backend,
            };
            let mut err = PredictorError::new(kind, format!("bad response body: {e}"));
            err.status = Some(status);
            (kind == PredictorErrorKind::Timeout, err)
        })?;
        Ok(parsed.text)
    }
}

impl ActionPredictor for RemotePredictor {
    fn predict(
        &mut self,
        request: &PredictionRequest,
    ) -> Result<PredictionResponse, PredictorError> {
        let started = Instant::now();
        let mut delay = self.config.backoff;
        let max_attempts = self.config.max_attempts.max(1);
        for attempt in 1..=max_attempts {
            match self.attempt(request) {
                Ok(text) => {
                    let mut response = PredictionResponse::new(text);
                    response.latency_ms = started.elapsed().as_millis() as u64;
                    return Ok(response);
                }
                Err((retryable, mut err)) => {
                    if !retryable || attempt == max_attempts {
                        err.attempts = attempt;
                        return Err(err);
                    }
                    thread::sleep(delay);
                    delay = delay.saturating_mul(2);
                }
            }
        }
        unreachable!("loop returns on the last attempt")
    }
}

/// Minimal single-threaded HTTP server for exercising the client.
#[doc(hidden)]
pub mod stub {
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::{TcpListener, TcpStream};
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;
    use std::thread::{self, JoinHandle};

    /// What the stub does for one request: a status and body, or stalling
    /// for the given duration before closing.
    #[derive(Debug, Clone)]
    pub enum Reply {
        Json(u16, String),
        Stall(std::time::Duration),
    }

    pub struct StubServer {
        pub url: String,
        pub hits: Arc<AtomicUsize>,
        pub bodies: Arc<std::sync::Mutex<Vec<String>>>,
        _handle: JoinHandle<()>,
    }

    /// Serves replies produced by `respond(request_index, body)` until the
    /// process exits.
    pub fn serve<F>(respond: F) -> StubServer
    where
        F: Fn(usize, &str) -> Reply + Send + 'static,
    {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind loopback");
        let url = format!("http://{}/generate", listener.local_addr().unwrap());
        let hits = Arc::new(AtomicUsize::new(0));
        let bodies = Arc::new(std::sync::Mutex::new(Vec::new()));
        let (h, b) = (hits.clone(), bodies.clone());
        let handle = thread::spawn(move || {
            for stream in listener.incoming().flatten() {
                let index = h.fetch_add(1, Ordering::SeqCst);
                if let Some(body) = read_request(&stream) {
                    b.lock().unwrap().push(body.clone());
                    write_reply(stream, respond(index, &body));
                }
            }
        });
        StubServer {
            url,
            hits,
            bodies,
            _handle: handle,
        }
    }

    fn read_request(stream: &TcpStream) -> Option<String> {
        let mut reader = BufReader::new(stream);
        let mut length = 0usize;
        loop {
            let mut line = String::new();
            if reader.read_line(&mut line).ok()? == 0 {
                return None;
            }
            let line = line.trim_end();
            if line.is_empty() {
                break;
            }
            if let Some((name, value)) = line.split_once(':') {
                if name.eq_ignore_ascii_case("content-length") {
                    length = value.trim().parse().ok()?;
                }
            }
        }
        let mut body = vec![0; length];
        reader.read_exact(&mut body).ok()?;
        String::from_utf8(body).ok()
    }

    fn write_reply(mut stream: TcpStream, reply: Reply) {
        match reply {
            Reply::Json(status, body) => {
                let _ = write!(
                    stream,
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                );
            }
            Reply::Stall(d) => thread::sleep(d),
        }
    }

    pub fn text_reply(text: &str) -> Reply {
        Reply::Json(200, serde_json::json!({ "text": text }).to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::stub::{serve, text_reply, Reply};
    use super::*;
    use docstruct_core::predict::ConstraintHints;
    use std::sync::atomic::Ordering;

    fn request() -> PredictionRequest {
        PredictionRequest {
            prompt: "### STACK:\n\n### SEGMENT:\nx\n\n### ACTION:\n".into(),
            expected_actions: 1,
            commit_count: 1,
            hints: ConstraintHints::default(),
        }
    }

    fn client(url: &str, attempts: u32) -> RemotePredictor {
        let mut config = RemoteConfig::new(url);
        config.max_attempts = attempts;
        config.backoff = Duration::from_millis(1);
        config.timeout = Duration::from_millis(300);
        config.api_key = None;
        RemotePredictor::new(config)
    }

    #[test]
    fn returns_text_and_sends_budget() {
        let server = serve(|_, _| text_reply("*\n"));
        let response = client(&server.url, 3).predict(&request()).unwrap();
        assert_eq!(response.action_lines, "*\n");
        let body: serde_json::Value =
            serde_json::from_str(&server.bodies.lock().unwrap()[0]).unwrap();
        assert_eq!(body["max_new_tokens"], 8);
        assert_eq!(body["stop"][0], "###");
    }

    #[test]
    fn retries_server_errors() {
        let server = serve(|i, _| {
            if i < 2 {
                Reply::Json(503, "{}".into())
            } else {
                text_reply("=\n")
            }
        });
        let response = client(&server.url, 3).predict(&request()).unwrap();
        assert_eq!(response.action_lines, "=\n");
        assert_eq!(server.hits.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn gives_up_after_max_attempts() {
        let server = serve(|_, _| Reply::Json(500, "{}".into()));
        let err = client(&server.url, 3).predict(&request()).unwrap_err();
        assert_eq!(err.attempts, 3);
        assert_eq!(err.status, Some(500));
        assert_eq!(server.hits.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn client_errors_are_not_retried() {
        let server = serve(|_, _| Reply::Json(400, "{}".into()));
        let err = client(&server.url, 3).predict(&request()).unwrap_err();
        assert_eq!((err.attempts, err.status), (1, Some(400)));
    }

    #[test]
    fn timeouts_are_reported() {
        let server = serve(|_, _| Reply::Stall(Duration::from_millis(800)));
        let err = client(&server.url, 2).predict(&request()).unwrap_err();
        assert_eq!(err.kind, PredictorErrorKind::Timeout);
        assert_eq!(err.attempts, 2);
    }

    #[test]
    fn unreachable_host_is_transport_error() {
        let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/", listener.local_addr().unwrap());
        drop(listener);
        let err = client(&url, 1).predict(&request()).unwrap_err();
        assert_eq!(err.kind, PredictorErrorKind::Transport);
    }
}
