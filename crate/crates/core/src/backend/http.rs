//! HTTP client for an external generation endpoint.
//!
//! Wire format: `POST <base>/v1/generate` with a JSON body
//! `{model, system, prompt, max_tokens, temperature, request_id}`; the
//! endpoint answers `{"text": ...}`. Transport failures and 5xx responses are
//! retried with the configured backoff; 4xx responses fail immediately.

use std::time::{Duration, Instant};

use serde_json::{json, Value};

use super::{BackendError, GenerationBackend, GenerationRequest, GenerationResponse, InFlightLimit};

pub const URL_ENV: &str = "ORTHODOC_BACKEND_URL";
pub const KEY_ENV: &str = "ORTHODOC_BACKEND_KEY";

#[derive(Debug, Clone, PartialEq)]
pub struct HttpConfig {
    pub base_url: String,
    pub api_key: Option<String>,
    pub model: String,
    /// Sleep before retry `i` is `backoff[i]`; its length is the retry budget.
    pub backoff: Vec<Duration>,
    pub deadline: Duration,
    pub max_in_flight: usize,
}

impl HttpConfig {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            api_key: None,
            model: "orthodoc-report".to_string(),
            backoff: vec![
                Duration::from_millis(500),
                Duration::from_millis(1000),
                Duration::from_millis(2000),
            ],
            deadline: Duration::from_secs(60),
            max_in_flight: 4,
        }
    }

    /// Reads the endpoint from `ORTHODOC_BACKEND_URL` and the bearer token
    /// from `ORTHODOC_BACKEND_KEY`.
    pub fn from_env() -> Result<Self, BackendError> {
        let url = std::env::var(URL_ENV)
            .ok()
            .filter(|u| !u.trim().is_empty())
            .ok_or_else(|| BackendError::NotConfigured(format!("{URL_ENV} is not set")))?;
        let mut cfg = Self::new(url);
        cfg.api_key = std::env::var(KEY_ENV).ok().filter(|k| !k.is_empty());
        Ok(cfg)
    }

    pub fn endpoint(&self) -> String {
        format!("{}/v1/generate", self.base_url.trim_end_matches('/'))
    }
}

pub struct HttpBackend {
    config: HttpConfig,
    client: reqwest::blocking::Client,
    limit: InFlightLimit,
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Result<Self, BackendError> {
        if config.base_url.trim().is_empty() {
            return Err(BackendError::NotConfigured("empty endpoint URL".into()));
        }
        let client = reqwest::blocking::Client::builder()
            .build()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let limit = InFlightLimit::new(config.max_in_flight);
        Ok(Self {
            config,
            client,
            limit,
        })
    }

    pub fn config(&self) -> &HttpConfig {
        &self.config
    }

    /// One POST. `Ok(Err(e))` is a failure worth retrying.
    fn attempt(
        &self,
        body: &Value,
        budget: Duration,
    ) -> Result<Result<String, BackendError>, BackendError> {
        let mut req = self.client.post(self.config.endpoint()).json(body).timeout(budget);
        if let Some(key) = &self.config.api_key {
            req = req.bearer_auth(key);
        }
        let resp = match req.send() {
            Ok(r) => r,
            Err(e) => return Ok(Err(BackendError::Transport(e.to_string()))),
        };
        let status = resp.status();
        let text = match resp.text() {
            Ok(t) => t,
            Err(e) => return Ok(Err(BackendError::Transport(e.to_string()))),
        };
        if status.is_server_error() {
            return Ok(Err(BackendError::Status {
                status: status.as_u16(),
                body: text,
            }));
        }
        if !status.is_success() {
            return Err(BackendError::Status {
                status: status.as_u16(),
                body: text,
            });
        }
        let value: Value =
            serde_json::from_str(&text).map_err(|e| BackendError::InvalidResponse(e.to_string()))?;
        match value.get("text").and_then(Value::as_str) {
            Some(t) => Ok(Ok(t.to_string())),
            None => Err(BackendError::MissingField("text")),
        }
    }
}

impl GenerationBackend for HttpBackend {
    fn backend_id(&self) -> &str {
        "http"
    }

    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResponse, BackendError> {
        request.validate()?;
        let _permit = self.limit.acquire();
        let started = Instant::now();
        let deadline = self.config.deadline;
        let timeout = |attempts| BackendError::Timeout {
            deadline_ms: deadline.as_millis() as u64,
            attempts,
        };
        let body = json!({
            "model": self.config.model,
            "system": request.system_instruction,
            "prompt": request.prompt,
            "max_tokens": request.max_tokens,
            "temperature": request.temperature,
            "request_id": request.request_id,
        });

        let mut attempts = 0;
        loop {
            let budget = deadline
                .checked_sub(started.elapsed())
                .filter(|d| !d.is_zero())
                .ok_or_else(|| timeout(attempts))?;
            attempts += 1;
            let failure = match self.attempt(&body, budget)? {
                Ok(text) => {
                    return Ok(GenerationResponse {
                        text,
                        backend_id: self.backend_id().to_string(),
                        latency_ms: started.elapsed().as_millis() as u64,
                    })
                }
                Err(e) => e,
            };
            let Some(&wait) = self.config.backoff.get(attempts - 1) else {
                return Err(failure);
            };
            if started.elapsed() + wait >= deadline {
                return Err(timeout(attempts));
            }
            std::thread::sleep(wait);
        }
    }
}

/// Minimal scripted HTTP server for exercising [`HttpBackend`] without a
/// real model endpoint.
pub mod stub {
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::{TcpListener, TcpStream};
    use std::sync::{Arc, Mutex};
    use std::thread::JoinHandle;

    #[derive(Debug, Clone, PartialEq)]
    pub struct StubReply {
        pub status: u16,
        pub body: String,
    }

    impl StubReply {
        pub fn ok_text(text: &str) -> Self {
            Self {
                status: 200,
                body: serde_json::json!({ "text": text }).to_string(),
            }
        }

        pub fn status(status: u16, body: &str) -> Self {
            Self {
                status,
                body: body.to_string(),
            }
        }
    }

    #[derive(Debug, Clone, PartialEq)]
    pub struct RecordedRequest {
        pub path: String,
        pub authorization: Option<String>,
        pub body: String,
    }

    /// Answers requests with the scripted replies in order, repeating the
    /// last one once the script runs out.
    pub struct StubServer {
        pub base_url: String,
        requests: Arc<Mutex<Vec<RecordedRequest>>>,
        _handle: JoinHandle<()>,
    }

    impl StubServer {
        pub fn start(script: Vec<StubReply>) -> std::io::Result<Self> {
            assert!(!script.is_empty(), "stub needs at least one reply");
            let listener = TcpListener::bind("127.0.0.1:0")?;
            let base_url = format!("http://{}", listener.local_addr()?);
            let requests = Arc::new(Mutex::new(Vec::new()));
            let log = requests.clone();
            let handle = std::thread::spawn(move || {
                let mut served = 0usize;
                for stream in listener.incoming() {
                    let Ok(stream) = stream else { continue };
                    let reply = &script[served.min(script.len() - 1)];
                    served += 1;
                    if let Ok(req) = serve(stream, reply) {
                        log.lock().unwrap().push(req);
                    }
                }
            });
            Ok(Self {
                base_url,
                requests,
                _handle: handle,
            })
        }

        pub fn requests(&self) -> Vec<RecordedRequest> {
            self.requests.lock().unwrap().clone()
        }
    }

    fn serve(stream: TcpStream, reply: &StubReply) -> std::io::Result<RecordedRequest> {
        let mut reader = BufReader::new(stream.try_clone()?);
        let mut line = String::new();
        reader.read_line(&mut line)?;
        let path = line.split_whitespace().nth(1).unwrap_or("").to_string();
        let mut content_length = 0usize;
        let mut authorization = None;
        loop {
            line.clear();
            if reader.read_line(&mut line)? == 0 || line == "\r\n" {
                break;
            }
            if let Some((name, value)) = line.split_once(':') {
                let value = value.trim().to_string();
                match name.to_ascii_lowercase().as_str() {
                    "content-length" => content_length = value.parse().unwrap_or(0),
                    "authorization" => authorization = Some(value),
                    _ => {}
                }
            }
        }
        let mut body = vec![0u8; content_length];
        reader.read_exact(&mut body)?;
        let mut stream = stream;
        write!(
            stream,
            "HTTP/1.1 {} Stub\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
            reply.status,
            reply.body.len(),
            reply.body
        )?;
        stream.flush()?;
        Ok(RecordedRequest {
            path,
            authorization,
            body: String::from_utf8_lossy(&body).into_owned(),
        })
    }
}
