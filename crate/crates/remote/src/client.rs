use std::thread;
use std::time::{Duration, Instant};

use reqwest::blocking::Client;
use reqwest::header::CONTENT_TYPE;
use voxvid_core::{BackendError, Scalar, VideoSegmentRequest, VideoSegmentResponse, VideoSegmenter};

use crate::wire::{decode_response, encode_request, WireErrorBody, WireResponse};

pub const SEGMENT_PATH: &str = "/v1/segment_video";
pub const DEFAULT_DEADLINE: Duration = Duration::from_secs(60);

const RETRY_BACKOFF: Duration = Duration::from_millis(100);

/// Blocking client for a wire-protocol model server.
///
/// One instance may be shared across threads; each call is one HTTP
/// request (plus retries) bounded by `deadline` in total. Connection
/// failures and `503` replies are retried up to `retries` times while
/// time remains.
///
/// The underlying client runs its own I/O thread, so it must be created
/// outside of any async runtime.
#[derive(Debug, Clone)]
pub struct RemoteSegmenter {
    endpoint: String,
    client: Client,
    deadline: Duration,
    retries: u32,
}

impl RemoteSegmenter {
    /// `url` is either a base address or the full endpoint path.
    pub fn new(url: &str) -> Result<Self, BackendError> {
        let trimmed = url.trim_end_matches('/');
        let endpoint = if trimmed.ends_with(SEGMENT_PATH) {
            trimmed.to_string()
        } else {
            format!("{trimmed}{SEGMENT_PATH}")
        };
        reqwest::Url::parse(&endpoint).map_err(|e| BackendError::InvalidRequest(format!("bad backend url {url}: {e}")))?;
        let client = Client::builder()
            .pool_max_idle_per_host(16)
            .build()
            .map_err(|e| BackendError::BackendUnavailable {
                elapsed: Duration::ZERO,
                reason: e.to_string(),
            })?;
        Ok(Self {
            endpoint,
            client,
            deadline: DEFAULT_DEADLINE,
            retries: 0,
        })
    }

    pub fn with_deadline(mut self, deadline: Duration) -> Self {
        self.deadline = deadline;
        self
    }

    pub fn with_retries(mut self, retries: u32) -> Self {
        self.retries = retries;
        self
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    pub fn deadline(&self) -> Duration {
        self.deadline
    }

    fn unavailable(start: Instant, reason: impl Into<String>) -> BackendError {
        BackendError::BackendUnavailable {
            elapsed: start.elapsed(),
            reason: reason.into(),
        }
    }

    fn post_once(&self, body: &[u8], start: Instant) -> Result<WireResponse, BackendError> {
        let remaining = self.deadline.saturating_sub(start.elapsed());
        if remaining.is_zero() {
            return Err(Self::unavailable(start, format!("deadline of {:?} exceeded", self.deadline)));
        }
        let transport = |e: reqwest::Error| {
            if e.is_timeout() {
                Self::unavailable(start, format!("deadline of {:?} exceeded", self.deadline))
            } else {
                Self::unavailable(start, e.to_string())
            }
        };
        let reply = self
            .client
            .post(&self.endpoint)
            .header(CONTENT_TYPE, "application/json")
            .timeout(remaining)
            .body(body.to_vec())
            .send()
            .map_err(transport)?;
        let status = reply.status();
        let bytes = reply.bytes().map_err(transport)?;
        if !status.is_success() {
            let message = serde_json::from_slice::<WireErrorBody>(&bytes)
                .map(|b| b.error)
                .unwrap_or_else(|_| String::from_utf8_lossy(&bytes).into_owned());
            return Err(BackendError::RemoteFailure {
                status: status.as_u16(),
                message,
            });
        }
        serde_json::from_slice(&bytes).map_err(|e| BackendError::ProtocolError(format!("malformed response: {e}")))
    }

    fn retryable(error: &BackendError) -> bool {
        match error {
            BackendError::BackendUnavailable { reason, .. } => !reason.starts_with("deadline"),
            BackendError::RemoteFailure { status, .. } => *status == 503,
            _ => false,
        }
    }
}

impl<S: Scalar> VideoSegmenter<S> for RemoteSegmenter {
    fn segment_video(&self, request: &VideoSegmentRequest<S>) -> Result<VideoSegmentResponse, BackendError> {
        request.validate()?;
        let wire = encode_request(request);
        let (width, height) = (wire.width, wire.height);
        let body = serde_json::to_vec(&wire).map_err(|e| BackendError::InvalidRequest(e.to_string()))?;

        let start = Instant::now();
        let mut attempt = 0;
        let reply = loop {
            match self.post_once(&body, start) {
                Err(e) if attempt < self.retries && Self::retryable(&e) => {
                    attempt += 1;
                    let pause = RETRY_BACKOFF * attempt;
                    if start.elapsed() + pause >= self.deadline {
                        break Err(e);
                    }
                    thread::sleep(pause);
                }
                other => break other,
            }
        }?;
        decode_response(&reply, width, height)
            .map_err(|e| BackendError::ProtocolError(e.to_string()))?
            .conform(&request.frames)
    }
}
