//! Two-level coarse-to-fine probing.
//!
//! Stage 1 probes the K1 level-1 branches with the likelihood template and
//! normalizes the scores into `P_L1`. Stage 2 probes the children of each
//! selected branch with the conditional template, normalizes within the
//! branch into `P_L2|L1`, and forms joint scores
//! `S_L2[k] = P_L2|L1[k] * P_L1[parent(k)]`. Clusters under unselected
//! branches get probability exactly 0.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{score_yes_no, Method, ProbeConfig, ProbeTrace, YesNoProbe};
use crate::error::{Error, Result};
use crate::providers::{render_prompt, ProbeTarget, PromptTarget, Provider};
use crate::simplex::{argsort_descending, softmax, ClusterSpace, PreferenceDistribution};

/// A partition of the level-2 clusters into level-1 branches.
#[derive(Debug, Clone, PartialEq)]
pub struct Taxonomy {
    l1: ClusterSpace,
    l2: ClusterSpace,
    children: Vec<Vec<usize>>,
    parent: Vec<usize>,
}

impl Taxonomy {
    pub fn new(l1: ClusterSpace, l2: ClusterSpace, children: Vec<Vec<usize>>) -> Result<Self> {
        if children.len() != l1.len() {
            return Err(Error::InvalidTaxonomy(format!(
                "{} branches but {} child lists",
                l1.len(),
                children.len()
            )));
        }
        let mut parent = vec![usize::MAX; l2.len()];
        for (j, kids) in children.iter().enumerate() {
            if kids.is_empty() {
                return Err(Error::InvalidTaxonomy(format!(
                    "branch {:?} has no children",
                    l1.labels()[j]
                )));
            }
            for &k in kids {
                l2.check_index(k)?;
                if parent[k] != usize::MAX {
                    return Err(Error::InvalidTaxonomy(format!(
                        "cluster {:?} assigned to more than one branch",
                        l2.labels()[k]
                    )));
                }
                parent[k] = j;
            }
        }
        if let Some(k) = parent.iter().position(|&p| p == usize::MAX) {
            return Err(Error::InvalidTaxonomy(format!(
                "cluster {:?} belongs to no branch",
                l2.labels()[k]
            )));
        }
        Ok(Self {
            l1,
            l2,
            children,
            parent,
        })
    }

    /// Parses `{"L1 name": ["L2 name", ...], ...}`, resolving names against
    /// `l2`. Branch order follows the JSON object.
    pub fn from_json(text: &str, l2: &ClusterSpace) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)
            .map_err(|e| Error::InvalidTaxonomy(format!("not valid JSON: {e}")))?;
        let obj = value
            .as_object()
            .ok_or_else(|| Error::InvalidTaxonomy("top level must be an object".into()))?;
        let mut names = Vec::with_capacity(obj.len());
        let mut children = Vec::with_capacity(obj.len());
        for (branch, kids) in obj {
            let kids = kids.as_array().ok_or_else(|| {
                Error::InvalidTaxonomy(format!("children of {branch:?} must be a list"))
            })?;
            let mut idx = Vec::with_capacity(kids.len());
            for kid in kids {
                let name = kid.as_str().ok_or_else(|| {
                    Error::InvalidTaxonomy(format!("non-string child under {branch:?}"))
                })?;
                idx.push(l2.index_of(name).ok_or_else(|| {
                    Error::InvalidTaxonomy(format!("unknown cluster {name:?} under {branch:?}"))
                })?);
            }
            names.push(branch.clone());
            children.push(idx);
        }
        let l1 = ClusterSpace::new(names)
            .map_err(|e| Error::InvalidTaxonomy(format!("branch names: {e}")))?;
        Self::new(l1, l2.clone(), children)
    }

    pub fn from_json_file(path: impl AsRef<Path>, l2: &ClusterSpace) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::UnreadableFile {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text, l2)
    }

    pub fn l1(&self) -> &ClusterSpace {
        &self.l1
    }

    pub fn l2(&self) -> &ClusterSpace {
        &self.l2
    }

    pub fn children(&self, branch: usize) -> &[usize] {
        &self.children[branch]
    }

    pub fn parent(&self, cluster: usize) -> usize {
        self.parent[cluster]
    }

    pub fn k1(&self) -> usize {
        self.l1.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BranchStrategy {
    /// The `b` most probable branches.
    TopB {
        b: usize,
    },
    /// Every branch with probability at least `p_min`.
    Threshold {
        p_min: f64,
    },
    /// The `b` least probable branches.
    LongTail {
        b: usize,
    },
    All,
}

impl BranchStrategy {
    pub fn validate(&self, k1: usize) -> Result<()> {
        match *self {
            BranchStrategy::TopB { b } | BranchStrategy::LongTail { b } => {
                if b == 0 || b > k1 {
                    return Err(Error::InvalidStrategy(format!("b = {b} outside 1..={k1}")));
                }
            }
            BranchStrategy::Threshold { p_min } => {
                if !(p_min > 0.0 && p_min < 1.0) {
                    return Err(Error::InvalidStrategy(format!(
                        "p_min = {p_min} outside (0, 1)"
                    )));
                }
            }
            BranchStrategy::All => {}
        }
        Ok(())
    }
}

/// Picks level-1 branches from their probabilities. Ties resolve by index.
pub fn select_branches(p_l1: &[f64], strategy: BranchStrategy) -> Result<Vec<usize>> {
    strategy.validate(p_l1.len())?;
    let selected: Vec<usize> = match strategy {
        BranchStrategy::TopB { b } => argsort_descending(p_l1).into_iter().take(b).collect(),
        BranchStrategy::LongTail { b } => {
            let mut order: Vec<usize> = (0..p_l1.len()).collect();
            order.sort_by(|&x, &y| p_l1[x].total_cmp(&p_l1[y]));
            order.into_iter().take(b).collect()
        }
        BranchStrategy::Threshold { p_min } => argsort_descending(p_l1)
            .into_iter()
            .filter(|&j| p_l1[j] >= p_min)
            .collect(),
        BranchStrategy::All => (0..p_l1.len()).collect(),
    };
    if selected.is_empty() {
        return Err(Error::EmptySelection);
    }
    Ok(selected)
}

/// How joint scores become the final distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CombineMode {
    /// `softmax(S_L2 / tau)` over probed clusters only.
    MaskedSoftmax,
    /// `S_L2[k] / sum of probed S_L2`.
    #[default]
    SumNormalize,
}

pub fn hierarchical_probe(
    provider: &dyn Provider,
    history: &str,
    taxonomy: &Taxonomy,
    strategy: BranchStrategy,
    combine: CombineMode,
    cfg: &ProbeConfig,
) -> Result<(PreferenceDistribution, ProbeTrace)> {
    cfg.validate()?;
    strategy.validate(taxonomy.k1())?;
    let alphabet = &cfg.prompts.alphabet;

    // stage 1: branch scoping
    let l1_probes = taxonomy
        .l1()
        .labels()
        .iter()
        .enumerate()
        .map(|(j, label)| {
            Ok(YesNoProbe {
                label: label.clone(),
                prompt: render_prompt(
                    &cfg.prompts.likelihood,
                    history,
                    PromptTarget::Cluster(label),
                    alphabet,
                )?,
                target: ProbeTarget::Branch(j),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let l1_scores = score_yes_no(provider, &l1_probes, cfg, |i| i)?;
    let s_l1: Vec<f64> = l1_scores.iter().map(|s| s.score).collect();
    let p_l1 = softmax(&s_l1, 1.0)?;

    let mut trace = ProbeTrace::new(Method::Hierarchical);
    trace.l1_calls = Some(l1_probes.len());
    trace.prompt_tokens_total = l1_scores.iter().map(|s| s.tokens).sum();
    let l1_failed = l1_scores.iter().filter(|s| s.failed).count();
    let l1_floored = l1_scores.iter().filter(|s| s.floored).count();

    let selected = select_branches(&p_l1, strategy)?;

    // stage 2: conditional probing inside the selected branches
    let l2 = taxonomy.l2();
    let mut l2_probes = Vec::new();
    let mut l2_index = Vec::new();
    for &j in &selected {
        let parent = &taxonomy.l1().labels()[j];
        for &k in taxonomy.children(j) {
            let label = &l2.labels()[k];
            l2_probes.push(YesNoProbe {
                label: label.clone(),
                prompt: render_prompt(
                    &cfg.prompts.conditional,
                    history,
                    PromptTarget::Conditional {
                        parent,
                        cluster: label,
                    },
                    alphabet,
                )?,
                target: ProbeTarget::Child {
                    parent: j,
                    child: k,
                },
            });
            l2_index.push(k);
        }
    }
    let l2_scores = score_yes_no(provider, &l2_probes, cfg, |i| l2_index[i])?;
    trace.l2_calls = Some(l2_probes.len());
    trace.calls = l1_probes.len() + l2_probes.len();
    trace.prompt_tokens_total += l2_scores.iter().map(|s| s.tokens).sum::<u64>();

    let mut joint = vec![0.0; l2.len()];
    let mut probed = vec![false; l2.len()];
    let mut floored = vec![false; l2.len()];
    let mut offset = 0;
    for &j in &selected {
        let kids = taxonomy.children(j);
        let block = &l2_scores[offset..offset + kids.len()];
        let subset: Vec<f64> = block.iter().map(|s| s.score).collect();
        let conditional = softmax(&subset, 1.0)?;
        for ((&k, p), s) in kids.iter().zip(conditional).zip(block) {
            joint[k] = p * p_l1[j];
            probed[k] = true;
            floored[k] = s.floored;
            if s.failed {
                trace.failed.push(k);
            }
        }
        offset += kids.len();
    }

    let probs = match combine {
        CombineMode::SumNormalize => {
            let total: f64 = joint.iter().sum();
            joint.iter().map(|s| s / total).collect::<Vec<_>>()
        }
        CombineMode::MaskedSoftmax => {
            let probed_idx: Vec<usize> = (0..l2.len()).filter(|&k| probed[k]).collect();
            let scores: Vec<f64> = probed_idx.iter().map(|&k| joint[k]).collect();
            let p = softmax(&scores, cfg.tau)?;
            let mut out = vec![0.0; l2.len()];
            for (k, v) in probed_idx.into_iter().zip(p) {
                out[k] = v;
            }
            out
        }
    };
    let dist = PreferenceDistribution::new(l2, probs)?;

    let unprobed = probed.iter().filter(|&&p| !p).count();
    if unprobed > 0 {
        trace.notes.push(format!(
            "{unprobed} cluster(s) under unselected branches set to 0"
        ));
    }
    if l1_failed + trace.failed.len() > 0 {
        trace.notes.push(format!(
            "{} probe(s) failed; neutral score substituted",
            l1_failed + trace.failed.len()
        ));
    }
    if l1_floored > 0 {
        trace
            .notes
            .push(format!("{l1_floored} branch probe(s) read floored tokens"));
    }
    trace.floored_flags = floored;
    trace.raw_scores = Some(joint);
    trace.l1_scores = Some(s_l1);
    trace.l1_distribution = Some(p_l1);
    trace.selected_branches = Some(selected);
    Ok((dist, trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn l2(k: usize) -> ClusterSpace {
        ClusterSpace::new((0..k).map(|i| format!("c{i}"))).unwrap()
    }

    #[test]
    fn select_examples() {
        let p = [0.5, 0.3, 0.2];
        assert_eq!(
            select_branches(&p, BranchStrategy::TopB { b: 2 }).unwrap(),
            vec![0, 1]
        );
        assert_eq!(
            select_branches(&p, BranchStrategy::LongTail { b: 1 }).unwrap(),
            vec![2]
        );
        assert!(matches!(
            select_branches(&p, BranchStrategy::Threshold { p_min: 0.6 }),
            Err(Error::EmptySelection)
        ));
        assert_eq!(
            select_branches(&p, BranchStrategy::Threshold { p_min: 0.25 }).unwrap(),
            vec![0, 1]
        );
        assert_eq!(
            select_branches(&p, BranchStrategy::All).unwrap(),
            vec![0, 1, 2]
        );
        assert!(select_branches(&p, BranchStrategy::TopB { b: 4 }).is_err());
        assert!(select_branches(&p, BranchStrategy::TopB { b: 0 }).is_err());
        // ties by index
        assert_eq!(
            select_branches(&[0.25, 0.5, 0.25], BranchStrategy::LongTail { b: 1 }).unwrap(),
            vec![0]
        );
    }

    #[test]
    fn taxonomy_partition_checks() {
        let space = l2(4);
        let ok = Taxonomy::from_json(r#"{"X": ["c0", "c2"], "Y": ["c1", "c3"]}"#, &space).unwrap();
        assert_eq!(ok.k1(), 2);
        assert_eq!(ok.children(1), &[1, 3]);
        assert_eq!(ok.parent(2), 0);
        assert!(
            Taxonomy::from_json(r#"{"X": ["c0", "c1"], "Y": ["c1", "c2", "c3"]}"#, &space).is_err()
        );
        assert!(Taxonomy::from_json(r#"{"X": ["c0", "c1"], "Y": ["c2"]}"#, &space).is_err());
        assert!(
            Taxonomy::from_json(r#"{"X": ["c0", "c1", "c2", "c3"], "Y": []}"#, &space).is_err()
        );
        assert!(Taxonomy::from_json(r#"{"X": ["c0", "c1", "c2", "zz"]}"#, &space).is_err());
        assert!(Taxonomy::from_json(r#"["c0"]"#, &space).is_err());
    }

    #[test]
    fn taxonomy_keeps_json_order() {
        let space = l2(2);
        let t = Taxonomy::from_json(r#"{"Zeta": ["c1"], "Alpha": ["c0"]}"#, &space).unwrap();
        assert_eq!(t.l1().labels(), &["Zeta".to_string(), "Alpha".to_string()]);
    }
}
