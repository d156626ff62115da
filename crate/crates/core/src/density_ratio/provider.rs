//! HTTP client for an external prompted language model. The endpoint takes
//! {"prompt": str, "text": str} and returns {"token_logprobs": [number]}
//! for the tokens of the text given the prompt.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::corpus::Role;
use crate::density_ratio::{text_logprob, SentenceScorer};
use crate::error::{Error, Result};

/// Connection settings plus the two distribution-describing prompts.
#[derive(Debug, Clone)]
pub struct LmProviderConfig {
    endpoint: String,
    prompt_r: String,
    prompt_t: String,
    api_key: Option<String>,
    max_parallel: usize,
    attempts: usize,
    timeout: Duration,
}

impl LmProviderConfig {
    /// Validates that the prompts are nonempty and distinct.
    pub fn new(
        endpoint: impl Into<String>,
        prompt_r: impl Into<String>,
        prompt_t: impl Into<String>,
    ) -> Result<LmProviderConfig> {
        let endpoint = endpoint.into();
        let prompt_r = prompt_r.into();
        let prompt_t = prompt_t.into();
        if endpoint.is_empty() {
            return Err(Error::invalid("endpoint", "must be nonempty"));
        }
        if prompt_r.is_empty() || prompt_t.is_empty() {
            return Err(Error::invalid("prompts", "both prompts must be nonempty"));
        }
        if prompt_r == prompt_t {
            return Err(Error::invalid(
                "prompts",
                "source and target prompts must be distinct",
            ));
        }
        Ok(LmProviderConfig {
            endpoint,
            prompt_r,
            prompt_t,
            api_key: None,
            max_parallel: 4,
            attempts: 3,
            timeout: Duration::from_secs(30),
        })
    }

    pub fn with_api_key(mut self, key: Option<String>) -> Self {
        self.api_key = key;
        self
    }

    pub fn with_max_parallel(mut self, n: usize) -> Self {
        self.max_parallel = n.max(1);
        self
    }

    pub fn with_attempts(mut self, attempts: usize) -> Self {
        self.attempts = attempts.max(1);
        self
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    /// A provider scoring under the prompt for the chosen distribution.
    pub fn provider(&self, role: Role) -> HttpLmProvider {
        let prompt = match role {
            Role::Source => self.prompt_r.clone(),
            Role::Target => self.prompt_t.clone(),
        };
        HttpLmProvider {
            agent: ureq::Agent::config_builder()
                .timeout_global(Some(self.timeout))
                .build()
                .new_agent(),
            endpoint: self.endpoint.clone(),
            prompt,
            api_key: self.api_key.clone(),
            max_parallel: self.max_parallel,
            attempts: self.attempts,
        }
    }
}

/// Scores sentences against one prompt via the HTTP endpoint, with
/// exponential-backoff retries and index-ordered parallel batch scoring.
pub struct HttpLmProvider {
    agent: ureq::Agent,
    endpoint: String,
    prompt: String,
    api_key: Option<String>,
    max_parallel: usize,
    attempts: usize,
}

#[derive(Serialize)]
struct ScoreRequest<'a> {
    prompt: &'a str,
    text: &'a str,
}

#[derive(Deserialize)]
struct ScoreResponse {
    token_logprobs: Vec<f64>,
}

impl HttpLmProvider {
    fn try_once(&self, text: &str) -> std::result::Result<f64, String> {
        let mut request = self.agent.post(&self.endpoint);
        if let Some(key) = &self.api_key {
            request = request.header("Authorization", format!("Bearer {key}"));
        }
        let mut response = request
            .send_json(ScoreRequest {
                prompt: &self.prompt,
                text,
            })
            .map_err(|e| e.to_string())?;
        let parsed: ScoreResponse = response
            .body_mut()
            .read_json()
            .map_err(|e| format!("malformed response body: {e}"))?;
        if parsed.token_logprobs.is_empty() {
            return Err("response carried no token_logprobs".to_string());
        }
        if parsed.token_logprobs.iter().any(|lp| !lp.is_finite()) {
            return Err("response carried a non-finite token logprob".to_string());
        }
        Ok(parsed.token_logprobs.iter().sum())
    }
}

impl SentenceScorer for HttpLmProvider {
    fn sentence_logprob(&self, sentence: &str) -> Result<f64> {
        let mut last = String::new();
        for attempt in 0..self.attempts {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(100 << (attempt - 1)));
            }
            match self.try_once(sentence) {
                Ok(lp) => return Ok(lp),
                Err(message) => last = message,
            }
        }
        Err(Error::Provider {
            attempts: self.attempts as u32,
            message: last,
        })
    }

    /// Scores texts with up to max_parallel worker threads. Results are
    /// written by input index, so output is identical at any parallelism.
    fn text_logprobs(&self, texts: &[&str]) -> Result<Vec<f64>> {
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        let workers = self.max_parallel.clamp(1, texts.len());
        if workers == 1 {
            return texts.iter().map(|t| text_logprob(self, t)).collect();
        }
        let next = AtomicUsize::new(0);
        let slots: Vec<Mutex<Option<Result<f64>>>> =
            texts.iter().map(|_| Mutex::new(None)).collect();
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= texts.len() {
                        break;
                    }
                    let scored = text_logprob(self, texts[i]);
                    *slots[i].lock().expect("slot lock") = Some(scored);
                });
            }
        });
        let mut out = Vec::with_capacity(texts.len());
        for slot in slots {
            match slot.into_inner().expect("slot lock") {
                Some(Ok(lp)) => out.push(lp),
                Some(Err(e)) => return Err(e),
                None => unreachable!("every index is claimed by a worker"),
            }
        }
        Ok(out)
    }
}
