use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{Drift, ExperimentConfig};
use super::read_jsonl;
use crate::dataset::{write_corpus_jsonl, write_lines, InteractionRecord, SECONDS_PER_DAY};
use crate::error::{Error, Result};
use crate::simplex::{softmax, ClusterSpace};

/// Latent utility of one user from `day` (epoch day number) onwards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRow {
    pub user_id: String,
    pub day: i64,
    pub q: Vec<f64>,
}

/// Per-user utility trajectories, looked up by day.
#[derive(Debug, Clone, Default)]
pub struct TruthTable {
    by_user: HashMap<String, Vec<(i64, Vec<f64>)>>,
}

impl TruthTable {
    pub fn from_rows(rows: Vec<TruthRow>) -> Self {
        let mut by_user: HashMap<String, Vec<(i64, Vec<f64>)>> = HashMap::new();
        for r in rows {
            by_user.entry(r.user_id).or_default().push((r.day, r.q));
        }
        for v in by_user.values_mut() {
            v.sort_by_key(|(d, _)| *d);
        }
        Self { by_user }
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(Self::from_rows(read_jsonl(path)?))
    }

    /// Utility in force on `day`: the latest entry at or before it, else the
    /// earliest.
    pub fn at(&self, user: &str, day: i64) -> Result<&[f64]> {
        let rows = self
            .by_user
            .get(user)
            .ok_or_else(|| Error::JoinMismatch(format!("user {user:?} has no truth rows")))?;
        let i = rows.partition_point(|(d, _)| *d <= day);
        Ok(&rows[i.saturating_sub(1)].1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateSummary {
    pub users: usize,
    pub interactions: usize,
    pub corpus: PathBuf,
    pub clusters: PathBuf,
    pub truth: PathBuf,
}

fn user_rng(seed: u64, user: usize) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(b"simulate");
    h.update((user as u64).to_le_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

fn sample_index(rng: &mut impl Rng, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

fn rating(q: f64) -> f64 {
    (3.0 + q).round().clamp(1.0, 5.0)
}

/// Generates a synthetic corpus whose interactions are drawn from
/// `softmax(q_t)` of each user's latent utility.
pub fn cmd_simulate(cfg: &ExperimentConfig) -> Result<SimulateSummary> {
    let seed = cfg.require_seed()?;
    let sim = &cfg.simulate;
    if sim.interactions_per_day == 0 || sim.users == 0 || sim.days == 0 {
        return Err(Error::EmptyCorpus);
    }
    if !(sim.utility_scale >= 0.0 && sim.utility_scale.is_finite()) {
        return Err(Error::Config(
            "utility_scale must be finite and >= 0".into(),
        ));
    }
    if sim.start < 0 {
        return Err(Error::Config("start must be >= 0".into()));
    }
    if let Drift::RandomWalk { step_sigma } = sim.drift {
        if !(step_sigma >= 0.0 && step_sigma.is_finite()) {
            return Err(Error::Config("step_sigma must be finite and >= 0".into()));
        }
    }
    let space = if cfg.space.clusters.exists() {
        cfg.space()?
    } else {
        if sim.k == 0 {
            return Err(Error::Config("simulate.k must be >= 1".into()));
        }
        ClusterSpace::new((1..=sim.k).map(|i| format!("cluster_{i:02}")))?
    };
    let k = space.len();
    let width = sim.users.to_string().len().max(3);
    let scale = Normal::new(0.0, sim.utility_scale).map_err(|e| Error::Config(e.to_string()))?;
    let first_day = sim.start.div_euclid(SECONDS_PER_DAY);

    let mut records = Vec::with_capacity(sim.users * sim.days * sim.interactions_per_day);
    let mut truth = Vec::new();
    for u in 0..sim.users {
        let user_id = format!("u{u:0width$}");
        let mut rng = user_rng(seed, u);
        let start: Vec<f64> = (0..k).map(|_| scale.sample(&mut rng)).collect();
        let end: Vec<f64> = match sim.drift {
            Drift::LinearInterpolate => (0..k).map(|_| scale.sample(&mut rng)).collect(),
            _ => start.clone(),
        };
        let mut q = start.clone();
        let mut item = 0usize;
        for d in 0..sim.days {
            match sim.drift {
                Drift::Static => {}
                Drift::LinearInterpolate => {
                    let t = if sim.days > 1 {
                        d as f64 / (sim.days - 1) as f64
                    } else {
                        0.0
                    };
                    for i in 0..k {
                        q[i] = (1.0 - t) * start[i] + t * end[i];
                    }
                }
                Drift::RandomWalk { step_sigma } => {
                    if d > 0 {
                        let step = Normal::new(0.0, step_sigma)
                            .map_err(|e| Error::Config(e.to_string()))?;
                        for v in q.iter_mut() {
                            *v += step.sample(&mut rng);
                        }
                    }
                }
            }
            if d == 0 || sim.drift != Drift::Static {
                truth.push(TruthRow {
                    user_id: user_id.clone(),
                    day: first_day + d as i64,
                    q: q.clone(),
                });
            }
            let probs = softmax(&q, 1.0)?;
            let mut offsets: Vec<i64> = (0..sim.interactions_per_day)
                .map(|_| rng.random_range(0..SECONDS_PER_DAY))
                .collect();
            offsets.sort_unstable();
            for off in offsets {
                let c = sample_index(&mut rng, &probs);
                item += 1;
                records.push(InteractionRecord {
                    user_id: user_id.clone(),
                    item_id: format!("item-{item}"),
                    timestamp: sim.start + d as i64 * SECONDS_PER_DAY + off,
                    clusters: vec![c],
                    weight: rating(q[c]),
                    title: None,
                });
            }
        }
    }

    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir)?;
    let corpus = dir.join("corpus.jsonl");
    let clusters = dir.join("clusters.txt");
    let truth_path = dir.join("truth.jsonl");
    write_corpus_jsonl(&corpus, &records, &space)?;
    let mut vocab = String::new();
    for l in space.labels() {
        vocab.push_str(l);
        vocab.push('\n');
    }
    std::fs::write(&clusters, vocab)?;
    write_lines(&truth_path, &truth)?;
    Ok(SimulateSummary {
        users: sim.users,
        interactions: records.len(),
        corpus,
        clusters,
        truth: truth_path,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truth_lookup() {
        let t = TruthTable::from_rows(vec![
            TruthRow {
                user_id: "u".into(),
                day: 10,
                q: vec![1.0],
            },
            TruthRow {
                user_id: "u".into(),
                day: 12,
                q: vec![2.0],
            },
        ]);
        assert_eq!(t.at("u", 9).unwrap(), &[1.0]);
        assert_eq!(t.at("u", 11).unwrap(), &[1.0]);
        assert_eq!(t.at("u", 12).unwrap(), &[2.0]);
        assert_eq!(t.at("u", 99).unwrap(), &[2.0]);
        assert!(t.at("v", 1).is_err());
    }

    #[test]
    fn rating_clamps() {
        assert_eq!(rating(-7.0), 1.0);
        assert_eq!(rating(0.4), 3.0);
        assert_eq!(rating(9.0), 5.0);
    }
}
