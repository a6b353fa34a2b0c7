//! Completion-style HTTP provider.
//!
//! Request: `{"prompt", "max_tokens": 1, "logprobs": N, "temperature": 0}`
//! (plus `"model"` when configured). The response must carry the top-N
//! logprobs of the first generated position at
//! `choices[0].logprobs.top_logprobs[0]`.

use std::collections::BTreeMap;
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{approx_token_count, prompt_hash, Generation, LogitResponse, ProbeIntent, Provider};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpConfig {
    pub url: String,
    pub model: Option<String>,
    /// Name of the environment variable holding the bearer token.
    pub api_key_env: Option<String>,
    pub top_logprobs: usize,
    pub timeout_secs: f64,
    pub max_in_flight: usize,
}

impl Default for HttpConfig {
    fn default() -> Self {
        Self {
            url: String::new(),
            model: None,
            api_key_env: None,
            top_logprobs: 20,
            timeout_secs: 60.0,
            max_in_flight: 8,
        }
    }
}

/// Counting gate bounding concurrent requests.
#[derive(Debug)]
struct Gate {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Gate {
    fn new(n: usize) -> Self {
        Self {
            free: Mutex::new(n.max(1)),
            cv: Condvar::new(),
        }
    }

    fn enter(&self) -> GateGuard<'_> {
        let mut free = self.free.lock().expect("gate poisoned");
        while *free == 0 {
            free = self.cv.wait(free).expect("gate poisoned");
        }
        *free -= 1;
        GateGuard(self)
    }
}

struct GateGuard<'a>(&'a Gate);

impl Drop for GateGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().expect("gate poisoned") += 1;
        self.0.cv.notify_one();
    }
}

#[derive(Debug)]
pub struct HttpProvider {
    cfg: HttpConfig,
    client: reqwest::blocking::Client,
    token: Option<String>,
    gate: Gate,
    id: String,
}

impl HttpProvider {
    pub fn new(cfg: HttpConfig) -> Result<Self> {
        if cfg.url.is_empty() {
            return Err(Error::Config("http provider needs a url".into()));
        }
        if cfg.top_logprobs == 0 {
            return Err(Error::Config("top_logprobs must be >= 1".into()));
        }
        if !(cfg.timeout_secs > 0.0) {
            return Err(Error::Config("timeout_secs must be > 0".into()));
        }
        let token = match &cfg.api_key_env {
            Some(var) => Some(
                std::env::var(var)
                    .map_err(|_| Error::Config(format!("environment variable {var} is not set")))?,
            ),
            None => None,
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(cfg.timeout_secs))
            .build()
            .map_err(|e| Error::Transport(e.to_string()))?;
        Ok(Self {
            id: format!("http:{}", cfg.model.as_deref().unwrap_or(&cfg.url)),
            gate: Gate::new(cfg.max_in_flight),
            client,
            token,
            cfg,
        })
    }

    fn post(&self, mut body: Value) -> Result<Value> {
        if let Some(model) = &self.cfg.model {
            body["model"] = json!(model);
        }
        let _slot = self.gate.enter();
        let mut req = self.client.post(&self.cfg.url).json(&body);
        if let Some(token) = &self.token {
            req = req.bearer_auth(token);
        }
        let resp = req.send().map_err(|e| Error::Transport(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| Error::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(Error::Transport(format!("HTTP {status}: {text}")));
        }
        serde_json::from_str(&text).map_err(|e| Error::MalformedResponse(e.to_string()))
    }
}

fn prompt_tokens(body: &Value, prompt: &str) -> u64 {
    body.pointer("/usage/prompt_tokens")
        .and_then(Value::as_u64)
        .unwrap_or_else(|| approx_token_count(prompt))
}

/// Extracts the top-N logprob map of the first generated position.
pub fn parse_completion_logprobs(body: &Value) -> Result<BTreeMap<String, f64>> {
    let top = body
        .pointer("/choices/0/logprobs/top_logprobs/0")
        .and_then(Value::as_object)
        .ok_or_else(|| {
            Error::MalformedResponse("missing choices[0].logprobs.top_logprobs[0]".into())
        })?;
    top.iter()
        .map(|(token, v)| {
            v.as_f64()
                .filter(|x| x.is_finite())
                .map(|x| (token.clone(), x))
                .ok_or_else(|| Error::MalformedResponse(format!("bad logprob for {token:?}")))
        })
        .collect()
}

pub fn parse_completion_text(body: &Value) -> Result<String> {
    body.pointer("/choices/0/text")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| Error::MalformedResponse("missing choices[0].text".into()))
}

impl Provider for HttpProvider {
    fn id(&self) -> &str {
        &self.id
    }

    fn raw_logits(&self, prompt: &str, _: &[String], _: &ProbeIntent) -> Result<LogitResponse> {
        let body = self.post(json!({
            "prompt": prompt,
            "max_tokens": 1,
            "logprobs": self.cfg.top_logprobs,
            "temperature": 0,
        }))?;
        Ok(LogitResponse {
            logits: parse_completion_logprobs(&body)?,
            provider_id: self.id.clone(),
            prompt_hash: prompt_hash(prompt),
            token_count: prompt_tokens(&body, prompt),
        })
    }

    fn generate(&self, prompt: &str, max_tokens: usize, _: &ProbeIntent) -> Result<Generation> {
        let body = self.post(json!({
            "prompt": prompt,
            "max_tokens": max_tokens,
            "temperature": 0,
        }))?;
        Ok(Generation {
            text: parse_completion_text(&body)?,
            provider_id: self.id.clone(),
            prompt_hash: prompt_hash(prompt),
            token_count: prompt_tokens(&body, prompt),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_top_logprobs() {
        let body = json!({"choices": [{"text": " Yes", "logprobs": {
            "tokens": [" Yes"],
            "top_logprobs": [{" Yes": -0.1, "Yes": -2.5, " No": -3.0}]
        }}]});
        let m = parse_completion_logprobs(&body).unwrap();
        assert_eq!(m.len(), 3);
        assert_eq!(m["Yes"], -2.5);
        assert_eq!(parse_completion_text(&body).unwrap(), " Yes");
    }

    #[test]
    fn malformed_shapes() {
        assert!(parse_completion_logprobs(&json!({"choices": []})).is_err());
        let bad = json!({"choices": [{"logprobs": {"top_logprobs": [{"Yes": "x"}]}}]});
        assert!(matches!(
            parse_completion_logprobs(&bad),
            Err(Error::MalformedResponse(_))
        ));
    }

    #[test]
    fn config_validation() {
        assert!(HttpProvider::new(HttpConfig::default()).is_err());
        let cfg = HttpConfig {
            url: "http://127.0.0.1:1/v1/completions".into(),
            api_key_env: Some("PREFPROBE_SURELY_UNSET_VAR".into()),
            ..HttpConfig::default()
        };
        assert!(matches!(HttpProvider::new(cfg), Err(Error::Config(_))));
    }
}
