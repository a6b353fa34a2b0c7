//! Synthetic latent-utility oracle.
//!
//! Yes/no probes get `yes = u + eps`, `no = baseline + eps'` for every
//! affirmative/negative token, with `eps, eps' ~ N(0, sigma^2)` drawn from a
//! stream keyed by (seed, prompt hash, side). Choice probes give each letter
//! `u + eps_letter`. At zero noise the yes-probability of a probe is
//! `logistic(u - baseline)`, a strictly increasing function of the utility.
//!
//! Generation emits the true descending order as letters, optionally
//! corrupted by adjacent swaps.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sha2::{Digest, Sha256};

use super::{
    approx_token_count, prompt_hash, ChoiceAlphabet, Generation, LogitResponse, ProbeIntent,
    ProbeTarget, Provider, TokenSet,
};
use crate::error::{Error, Result};
use crate::simplex::{argsort_descending, LatentUtility};

#[derive(Debug, Clone)]
pub struct OracleConfig {
    /// Utility per cluster; also serves `Child` targets.
    pub utility: LatentUtility,
    /// Utility per level-1 branch, for hierarchical probing.
    pub branch_utility: Option<Vec<f64>>,
    pub noise_sigma: f64,
    pub seed: u64,
    pub negative_baseline: f64,
    /// Per-position probability of swapping adjacent ranks when generating.
    pub p_swap: f64,
    pub tokens: TokenSet,
    pub alphabet: ChoiceAlphabet,
}

impl OracleConfig {
    pub fn new(utility: LatentUtility, seed: u64) -> Self {
        Self {
            utility,
            branch_utility: None,
            noise_sigma: 0.0,
            seed,
            negative_baseline: 0.0,
            p_swap: 0.0,
            tokens: TokenSet::default(),
            alphabet: ChoiceAlphabet::default(),
        }
    }

    pub fn with_noise(mut self, sigma: f64) -> Self {
        self.noise_sigma = sigma;
        self
    }

    pub fn with_branch_utility(mut self, branch: Vec<f64>) -> Self {
        self.branch_utility = Some(branch);
        self
    }

    pub fn with_swap(mut self, p_swap: f64) -> Self {
        self.p_swap = p_swap;
        self
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticOracle {
    cfg: OracleConfig,
    id: String,
}

impl SyntheticOracle {
    pub fn new(cfg: OracleConfig) -> Result<Self> {
        if !(cfg.noise_sigma >= 0.0 && cfg.noise_sigma.is_finite()) {
            return Err(Error::Config(format!(
                "noise_sigma must be >= 0, got {}",
                cfg.noise_sigma
            )));
        }
        if !(0.0..=1.0).contains(&cfg.p_swap) {
            return Err(Error::Config(format!(
                "p_swap must be in [0,1], got {}",
                cfg.p_swap
            )));
        }
        if !cfg.negative_baseline.is_finite() {
            return Err(Error::Config("negative_baseline must be finite".into()));
        }
        if let Some(b) = &cfg.branch_utility {
            if b.iter().any(|x| !x.is_finite()) {
                return Err(Error::Config("branch utilities must be finite".into()));
            }
        }
        Ok(Self {
            id: format!("oracle(seed={})", cfg.seed),
            cfg,
        })
    }

    pub fn config(&self) -> &OracleConfig {
        &self.cfg
    }

    fn utility(&self, target: ProbeTarget) -> Result<f64> {
        let q = self.cfg.utility.scores();
        let lookup = |i: usize, v: &[f64]| {
            v.get(i).copied().ok_or_else(|| {
                Error::MalformedResponse(format!("oracle has no utility for {target:?}"))
            })
        };
        match target {
            ProbeTarget::Cluster(i) | ProbeTarget::Child { child: i, .. } => lookup(i, q),
            ProbeTarget::Branch(j) => match &self.cfg.branch_utility {
                Some(b) => lookup(j, b),
                None => Err(Error::MalformedResponse(
                    "oracle has no branch utilities".into(),
                )),
            },
        }
    }

    fn stream(&self, hash: &str, key: &str) -> ChaCha8Rng {
        let mut h = Sha256::new();
        h.update(self.cfg.seed.to_le_bytes());
        h.update(hash.as_bytes());
        h.update([0u8]);
        h.update(key.as_bytes());
        let digest = h.finalize();
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&digest);
        ChaCha8Rng::from_seed(seed)
    }

    fn noise(&self, hash: &str, key: &str) -> f64 {
        if self.cfg.noise_sigma == 0.0 {
            return 0.0;
        }
        let normal = Normal::new(0.0, self.cfg.noise_sigma).expect("validated sigma");
        normal.sample(&mut self.stream(hash, key))
    }

    fn response(&self, prompt: &str, hash: String, logits: BTreeMap<String, f64>) -> LogitResponse {
        LogitResponse {
            logits,
            provider_id: self.id.clone(),
            prompt_hash: hash,
            token_count: approx_token_count(prompt),
        }
    }
}

impl Provider for SyntheticOracle {
    fn id(&self) -> &str {
        &self.id
    }

    fn raw_logits(
        &self,
        prompt: &str,
        watch: &[String],
        intent: &ProbeIntent,
    ) -> Result<LogitResponse> {
        let hash = prompt_hash(prompt);
        let mut logits = BTreeMap::new();
        match intent {
            ProbeIntent::YesNo(target) => {
                let u = self.utility(*target)?;
                let yes = u + self.noise(&hash, "affirmative");
                let no = self.cfg.negative_baseline + self.noise(&hash, "negative");
                for token in watch {
                    if self.cfg.tokens.affirmative().contains(token) {
                        logits.insert(token.clone(), yes);
                    } else if self.cfg.tokens.negative().contains(token) {
                        logits.insert(token.clone(), no);
                    }
                }
            }
            ProbeIntent::Choice(targets) => {
                for (token, target) in watch.iter().zip(targets) {
                    let u = self.utility(*target)?;
                    logits.insert(token.clone(), u + self.noise(&hash, token));
                }
            }
            ProbeIntent::Opaque | ProbeIntent::RankList { .. } => {
                return Err(Error::MalformedResponse(
                    "oracle needs a yes/no or choice intent to produce logits".into(),
                ))
            }
        }
        Ok(self.response(prompt, hash, logits))
    }

    fn generate(
        &self,
        prompt: &str,
        _max_tokens: usize,
        intent: &ProbeIntent,
    ) -> Result<Generation> {
        let ProbeIntent::RankList { targets, k } = intent else {
            return Err(Error::MalformedResponse(
                "oracle generation needs a rank-list intent".into(),
            ));
        };
        let hash = prompt_hash(prompt);
        let utilities = targets
            .iter()
            .map(|t| self.utility(*t))
            .collect::<Result<Vec<_>>>()?;
        let mut order = argsort_descending(&utilities);
        if self.cfg.p_swap > 0.0 && order.len() > 1 {
            let mut rng = self.stream(&hash, "generate");
            for pos in 0..order.len() - 1 {
                if rng.random::<f64>() < self.cfg.p_swap {
                    order.swap(pos, pos + 1);
                }
            }
        }
        let letters = order
            .iter()
            .take(*k)
            .map(|&i| {
                self.cfg
                    .alphabet
                    .letter(i)
                    .map(str::to_string)
                    .ok_or(Error::TooManyChoices {
                        k: targets.len(),
                        limit: self.cfg.alphabet.limit(),
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Generation {
            text: letters.join(", "),
            provider_id: self.id.clone(),
            prompt_hash: hash,
            token_count: approx_token_count(prompt),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simplex::ClusterSpace;

    fn oracle(q: &[f64], sigma: f64, seed: u64) -> SyntheticOracle {
        let space = ClusterSpace::new((0..q.len()).map(|i| format!("c{i}"))).unwrap();
        let u = LatentUtility::new(&space, q.to_vec()).unwrap();
        SyntheticOracle::new(OracleConfig::new(u, seed).with_noise(sigma)).unwrap()
    }

    #[test]
    fn zero_noise_yes_no_logits() {
        let o = oracle(&[2.0, 1.0, 0.0], 0.0, 1);
        let watch = TokenSet::default().watch_list();
        let r = o
            .raw_logits("p", &watch, &ProbeIntent::YesNo(ProbeTarget::Cluster(1)))
            .unwrap();
        for t in ["Yes", "yes", "Y", "y"] {
            assert_eq!(r.logits[t], 1.0);
        }
        for t in ["No", "no", "N", "n"] {
            assert_eq!(r.logits[t], 0.0);
        }
    }

    #[test]
    fn deterministic_per_prompt() {
        let o = oracle(&[2.0, 1.0, 0.0], 0.3, 9);
        let watch = TokenSet::default().watch_list();
        let intent = ProbeIntent::YesNo(ProbeTarget::Cluster(0));
        let a = o.raw_logits("prompt A", &watch, &intent).unwrap();
        let b = o.raw_logits("prompt A", &watch, &intent).unwrap();
        let c = o.raw_logits("prompt B", &watch, &intent).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.logits, c.logits);
        // the watch order does not change the draw
        let mut rev = watch.clone();
        rev.reverse();
        assert_eq!(o.raw_logits("prompt A", &rev, &intent).unwrap(), a);
    }

    #[test]
    fn exact_ranking_readout() {
        let o = oracle(&[2.0, 1.0, 0.0], 0.0, 1);
        let targets: Vec<_> = (0..3).map(ProbeTarget::Cluster).collect();
        let g = o
            .generate("p", 16, &ProbeIntent::RankList { targets, k: 3 })
            .unwrap();
        assert_eq!(g.text, "A, B, C");
        let o = oracle(&[0.5], 0.0, 1);
        let g = o
            .generate(
                "p",
                4,
                &ProbeIntent::RankList {
                    targets: vec![ProbeTarget::Cluster(0)],
                    k: 1,
                },
            )
            .unwrap();
        assert_eq!(g.text, "A");
    }

    #[test]
    fn branch_targets_need_branch_utilities() {
        let o = oracle(&[1.0, 0.0], 0.0, 1);
        let watch = TokenSet::default().watch_list();
        assert!(o
            .raw_logits("p", &watch, &ProbeIntent::YesNo(ProbeTarget::Branch(0)))
            .is_err());
    }

    #[test]
    fn rejects_bad_config() {
        let space = ClusterSpace::new(["a"]).unwrap();
        let u = LatentUtility::new(&space, vec![0.0]).unwrap();
        assert!(SyntheticOracle::new(OracleConfig::new(u.clone(), 0).with_noise(-1.0)).is_err());
        assert!(SyntheticOracle::new(OracleConfig::new(u, 0).with_swap(1.5)).is_err());
    }
}
