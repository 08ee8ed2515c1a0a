//! Uniform generation interface over chat backends.

mod config;
#[cfg(feature = "remote")]
mod remote;
mod scripted;
mod transcript;

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::prompts::RenderedPrompt;

pub use config::{build_backend, BackendConfig, BackendKind, BackendSet, ConfigError, ScriptMode};
#[cfg(feature = "remote")]
pub use remote::RemoteChatBackend;
pub use scripted::{replay_key, scripted_backend, ScriptedBackend};
pub use transcript::{read_transcript, TranscriptEntry, TranscriptWriter};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationResult {
    pub text: String,
    pub backend: String,
    pub latency_ms: u64,
    pub attempts: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GatewayError {
    #[error("backend `{backend}` unreachable after {attempts} attempt(s): {message}")]
    BackendUnreachable {
        backend: String,
        attempts: u32,
        message: String,
    },
    #[error("backend `{backend}` refused the request with status {status}: {message}")]
    BackendRefused {
        backend: String,
        status: u16,
        message: String,
    },
    #[error("backend `{0}` returned an empty completion")]
    EmptyCompletion(String),
    #[error("scripted backend `{backend}` has no response left for call {call}")]
    ScriptExhausted { backend: String, call: usize },
    #[error("scripted backend `{backend}` has no response for template `{template_id}` with this input")]
    KeyNotScripted { backend: String, template_id: String },
    #[error("scripted backend `{backend}` injected a failure on call {call}")]
    InjectedFailure { backend: String, call: usize },
    #[error("backend `{backend}` is misconfigured: {message}")]
    Misconfigured { backend: String, message: String },
}

impl GatewayError {
    /// Transient failures are worth retrying.
    pub fn is_transient(&self) -> bool {
        matches!(self, GatewayError::BackendUnreachable { .. })
    }
}

pub trait Backend: Send + Sync {
    fn name(&self) -> &str;

    /// Generation parameters worth recording next to results.
    fn decoding(&self) -> Decoding {
        Decoding::default()
    }

    fn generate(&self, prompt: &RenderedPrompt) -> Result<GenerationResult, GatewayError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decoding {
    pub model_name: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
}

impl Default for Decoding {
    fn default() -> Self {
        Decoding {
            model_name: String::new(),
            temperature: 0.0,
            max_output_tokens: 2048,
        }
    }
}

/// Runs `attempt` until it succeeds, fails non-transiently, or `max_retries`
/// retries are used up. Delay doubles after each failure.
pub fn with_retries<T>(
    max_retries: u32,
    base_delay: Duration,
    mut attempt: impl FnMut(u32) -> Result<T, GatewayError>,
) -> Result<(T, u32), GatewayError> {
    let mut n = 1;
    loop {
        match attempt(n) {
            Ok(v) => return Ok((v, n)),
            Err(e) if e.is_transient() && n <= max_retries => {
                std::thread::sleep(base_delay.saturating_mul(1 << (n - 1).min(16)));
                n += 1;
            }
            Err(GatewayError::BackendUnreachable { backend, message, .. }) => {
                return Err(GatewayError::BackendUnreachable {
                    backend,
                    attempts: n,
                    message,
                })
            }
            Err(e) => return Err(e),
        }
    }
}

/// Counting semaphore bounding in-flight requests per backend.
#[derive(Debug)]
pub struct Limiter {
    free: Mutex<usize>,
    cv: Condvar,
}

pub struct Permit<'a>(&'a Limiter);

impl Limiter {
    pub fn new(permits: usize) -> Self {
        Limiter {
            free: Mutex::new(permits.max(1)),
            cv: Condvar::new(),
        }
    }

    pub fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut free = self.0.free.lock().unwrap_or_else(|e| e.into_inner());
        *free += 1;
        self.0.cv.notify_one();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    fn unreachable(n: u32) -> GatewayError {
        GatewayError::BackendUnreachable {
            backend: "b".into(),
            attempts: n,
            message: "down".into(),
        }
    }

    #[test]
    fn retries_until_success() {
        let got = with_retries(
            2,
            Duration::ZERO,
            |n| if n < 3 { Err(unreachable(n)) } else { Ok("ok") },
        );
        assert_eq!(got, Ok(("ok", 3)));
    }

    #[test]
    fn gives_up_after_budget() {
        let mut calls = 0;
        let got: Result<((), u32), _> = with_retries(2, Duration::ZERO, |n| {
            calls += 1;
            Err(unreachable(n))
        });
        assert_eq!(calls, 3);
        assert!(matches!(got, Err(GatewayError::BackendUnreachable { attempts: 3, .. })));
    }

    #[test]
    fn refusal_is_not_retried() {
        let mut calls = 0;
        let got: Result<((), u32), _> = with_retries(5, Duration::ZERO, |_| {
            calls += 1;
            Err(GatewayError::BackendRefused {
                backend: "b".into(),
                status: 400,
                message: String::new(),
            })
        });
        assert_eq!(calls, 1);
        assert!(got.is_err());
    }

    #[test]
    fn limiter_bounds_concurrency() {
        let limiter = Arc::new(Limiter::new(2));
        let active = Arc::new(AtomicUsize::new(0));
        let peak = Arc::new(AtomicUsize::new(0));
        std::thread::scope(|s| {
            for _ in 0..8 {
                let (limiter, active, peak) = (limiter.clone(), active.clone(), peak.clone());
                s.spawn(move || {
                    let _p = limiter.acquire();
                    let now = active.fetch_add(1, Ordering::SeqCst) + 1;
                    peak.fetch_max(now, Ordering::SeqCst);
                    std::thread::sleep(Duration::from_millis(5));
                    active.fetch_sub(1, Ordering::SeqCst);
                });
            }
        });
        assert!(peak.load(Ordering::SeqCst) <= 2);
    }
}
