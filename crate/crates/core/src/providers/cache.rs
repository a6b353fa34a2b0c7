//! JSONL record/replay cache keyed by prompt hash.
//!
//! One record per line:
//! `{"prompt_hash", "prompt", "logits": {token: value}, "provider_id", "token_count"}`.
//! Generation calls add a `"text"` field and leave `logits` empty.

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{Generation, LogitResponse, ProbeIntent, Provider};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheRecord {
    pub prompt_hash: String,
    pub prompt: String,
    pub logits: BTreeMap<String, f64>,
    pub provider_id: String,
    pub token_count: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

/// Append-only JSONL writer shared by recording providers.
#[derive(Debug)]
pub struct CacheSink {
    path: PathBuf,
    out: Mutex<BufWriter<File>>,
}

impl CacheSink {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|source| Error::UnreadableFile {
                path: path.clone(),
                source,
            })?;
        Ok(Self {
            path,
            out: Mutex::new(BufWriter::new(file)),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&self, record: &CacheRecord) -> Result<()> {
        let line = serde_json::to_string(record)?;
        let mut out = self.out.lock().expect("cache sink poisoned");
        out.write_all(line.as_bytes())?;
        out.write_all(b"\n")?;
        out.flush()?;
        Ok(())
    }
}

/// Forwards calls to `inner` and appends every response to the cache.
pub struct RecordingProvider<P> {
    inner: P,
    sink: std::sync::Arc<CacheSink>,
}

impl<P: Provider> RecordingProvider<P> {
    pub fn new(inner: P, sink: std::sync::Arc<CacheSink>) -> Self {
        Self { inner, sink }
    }

    pub fn open(inner: P, path: impl AsRef<Path>) -> Result<Self> {
        Ok(Self::new(
            inner,
            std::sync::Arc::new(CacheSink::open(path)?),
        ))
    }
}

impl<P: Provider> Provider for RecordingProvider<P> {
    fn id(&self) -> &str {
        self.inner.id()
    }

    fn raw_logits(
        &self,
        prompt: &str,
        watch: &[String],
        intent: &ProbeIntent,
    ) -> Result<LogitResponse> {
        let resp = self.inner.raw_logits(prompt, watch, intent)?;
        self.sink.append(&CacheRecord {
            prompt_hash: resp.prompt_hash.clone(),
            prompt: prompt.to_string(),
            logits: resp.logits.clone(),
            provider_id: resp.provider_id.clone(),
            token_count: resp.token_count,
            text: None,
        })?;
        Ok(resp)
    }

    fn generate(
        &self,
        prompt: &str,
        max_tokens: usize,
        intent: &ProbeIntent,
    ) -> Result<Generation> {
        let generation = self.inner.generate(prompt, max_tokens, intent)?;
        self.sink.append(&CacheRecord {
            prompt_hash: generation.prompt_hash.clone(),
            prompt: prompt.to_string(),
            logits: BTreeMap::new(),
            provider_id: generation.provider_id.clone(),
            token_count: generation.token_count,
            text: Some(generation.text.clone()),
        })?;
        Ok(generation)
    }
}

/// Serves responses from a recorded cache; a miss is an error.
#[derive(Debug, Default)]
pub struct ReplayProvider {
    logits: HashMap<String, LogitResponse>,
    generations: HashMap<String, Generation>,
}

impl ReplayProvider {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|source| Error::UnreadableFile {
            path: path.to_path_buf(),
            source,
        })?;
        let mut replay = Self::default();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line_no = i + 1;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: CacheRecord =
                serde_json::from_str(&line).map_err(|e| Error::CacheCorrupt {
                    line: line_no,
                    reason: e.to_string(),
                })?;
            if super::prompt_hash(&rec.prompt) != rec.prompt_hash {
                return Err(Error::CacheCorrupt {
                    line: line_no,
                    reason: "prompt_hash does not match prompt".into(),
                });
            }
            replay.insert(rec);
        }
        Ok(replay)
    }

    fn insert(&mut self, rec: CacheRecord) {
        // first record for a hash wins
        match rec.text {
            Some(text) => {
                self.generations
                    .entry(rec.prompt_hash.clone())
                    .or_insert(Generation {
                        text,
                        provider_id: rec.provider_id,
                        prompt_hash: rec.prompt_hash,
                        token_count: rec.token_count,
                    });
            }
            None => {
                self.logits
                    .entry(rec.prompt_hash.clone())
                    .or_insert(LogitResponse {
                        logits: rec.logits,
                        provider_id: rec.provider_id,
                        prompt_hash: rec.prompt_hash,
                        token_count: rec.token_count,
                    });
            }
        }
    }

    pub fn len(&self) -> usize {
        self.logits.len() + self.generations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl Provider for ReplayProvider {
    fn id(&self) -> &str {
        "replay"
    }

    fn raw_logits(&self, prompt: &str, _: &[String], _: &ProbeIntent) -> Result<LogitResponse> {
        let hash = super::prompt_hash(prompt);
        self.logits
            .get(&hash)
            .cloned()
            .ok_or(Error::CacheMiss(hash))
    }

    fn generate(&self, prompt: &str, _: usize, _: &ProbeIntent) -> Result<Generation> {
        let hash = super::prompt_hash(prompt);
        self.generations
            .get(&hash)
            .cloned()
            .ok_or(Error::CacheMiss(hash))
    }
}
