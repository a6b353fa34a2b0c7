//! (context, label) pairs for supervised fine-tuning, one JSON object per
//! line: `{"prompt": <history text>, "label": {<cluster>: <prob>, ...}}`.
//! Probabilities are rounded to 6 decimal places.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde_json::{Map, Value};

use super::{create_writer, render_history, EvalSample, HistoryStyle};
use crate::error::{Error, Result};
use crate::simplex::{ClusterSpace, PreferenceDistribution};

const SCALE: f64 = 1e6;

fn round6(p: f64) -> f64 {
    (p * SCALE).round() / SCALE
}

#[derive(Debug, Clone, PartialEq)]
pub struct SftPair {
    pub prompt: String,
    /// Values as written, aligned with the cluster space.
    pub label: Vec<f64>,
}

impl SftPair {
    /// The label rescaled to unit sum.
    pub fn distribution(&self, space: &ClusterSpace) -> Result<PreferenceDistribution> {
        PreferenceDistribution::normalized(space, self.label.clone())
    }
}

pub fn export_sft_pairs(
    samples: &[EvalSample],
    path: impl AsRef<Path>,
    style: HistoryStyle,
) -> Result<usize> {
    let mut w = create_writer(path.as_ref())?;
    for s in samples {
        let space = s.label.space();
        let label: Map<String, Value> = space
            .labels()
            .iter()
            .zip(s.label.probs())
            .map(|(name, &p)| (name.clone(), Value::from(round6(p))))
            .collect();
        let mut obj = Map::new();
        obj.insert(
            "prompt".into(),
            Value::from(render_history(&s.context, space, style)),
        );
        obj.insert("label".into(), Value::Object(label));
        serde_json::to_writer(&mut w, &obj)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(samples.len())
}

pub fn read_sft_pairs(path: impl AsRef<Path>, space: &ClusterSpace) -> Result<Vec<SftPair>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::UnreadableFile {
        path: path.to_path_buf(),
        source,
    })?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |why: &str| Error::SchemaMismatch(format!("SFT line {}: {why}", i + 1));
        let v: Value = serde_json::from_str(&line).map_err(|e| bad(&e.to_string()))?;
        let prompt = v
            .get("prompt")
            .and_then(Value::as_str)
            .ok_or_else(|| bad("missing prompt"))?
            .to_string();
        let obj = v
            .get("label")
            .and_then(Value::as_object)
            .ok_or_else(|| bad("missing label"))?;
        let mut label = vec![0.0; space.len()];
        for (name, p) in obj {
            let idx = space
                .index_of(name)
                .ok_or_else(|| bad(&format!("unknown cluster {name:?}")))?;
            label[idx] = p.as_f64().ok_or_else(|| bad("non-numeric probability"))?;
        }
        out.push(SftPair { prompt, label });
    }
    Ok(out)
}
