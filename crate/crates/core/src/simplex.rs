//! Preference-simplex primitives.
//!
//! A [`ClusterSpace`] fixes the ordered set of clusters for an experiment.
//! Everything downstream speaks in [`PreferenceDistribution`]s over that
//! space: the hidden truth `softmax(q)`, the empirical proxy built from a
//! future interaction window, and the inferred distribution read off a
//! model's logits. Rankings are always produced by [`rank_descending`] so the
//! tie rule travels with them.

use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the simplex sum constraint.
pub const SUM_TOLERANCE: f64 = 1e-9;

/// Ordered, fixed set of preference clusters. Cloning is cheap.
#[derive(Clone, PartialEq, Eq)]
pub struct ClusterSpace {
    labels: Arc<[String]>,
}

impl ClusterSpace {
    pub fn new<I, S>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(Error::InvalidSpace("at least one cluster required".into()));
        }
        let mut seen = HashSet::with_capacity(labels.len());
        for label in &labels {
            let folded = label.trim().to_lowercase();
            if folded.is_empty() {
                return Err(Error::InvalidSpace("empty cluster label".into()));
            }
            if !seen.insert(folded) {
                return Err(Error::InvalidSpace(format!(
                    "duplicate cluster label {label:?}"
                )));
            }
        }
        Ok(Self {
            labels: labels.into(),
        })
    }

    /// Reads a vocabulary file: one name per line, line number = index.
    /// Blank lines are skipped.
    pub fn from_vocabulary_file(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::UnreadableFile {
            path: path.to_path_buf(),
            source,
        })?;
        Self::new(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(str::to_string),
        )
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, index: usize) -> Option<&str> {
        self.labels.get(index).map(String::as_str)
    }

    /// Looks a label up after trimming and case-folding.
    pub fn index_of(&self, name: &str) -> Option<usize> {
        let folded = name.trim().to_lowercase();
        self.labels
            .iter()
            .position(|l| l.trim().to_lowercase() == folded)
    }

    pub fn check_index(&self, index: usize) -> Result<()> {
        if index < self.len() {
            Ok(())
        } else {
            Err(Error::ClusterIndexOutOfRange {
                index,
                k: self.len(),
            })
        }
    }

    /// Subspace over the given indices, keeping their order.
    pub fn subspace(&self, indices: &[usize]) -> Result<Self> {
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            self.check_index(i)?;
            labels.push(self.labels[i].clone());
        }
        Self::new(labels)
    }

    fn same_as(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.labels, &other.labels) || self.labels == other.labels
    }
}

impl fmt::Debug for ClusterSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ClusterSpace")
            .field("k", &self.len())
            .field("labels", &self.labels)
            .finish()
    }
}

/// A probability vector over a [`ClusterSpace`].
#[derive(Debug, Clone, PartialEq)]
pub struct PreferenceDistribution {
    probs: Vec<f64>,
    space: ClusterSpace,
}

impl PreferenceDistribution {
    pub fn new(space: &ClusterSpace, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != space.len() {
            return Err(Error::LengthMismatch {
                expected: space.len(),
                got: probs.len(),
            });
        }
        if let Some((i, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !p.is_finite() || **p < 0.0)
        {
            return Err(Error::InvalidDistribution(format!(
                "entry {i} is {p}, must be finite and >= 0"
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidDistribution(format!("entries sum to {sum}")));
        }
        Ok(Self {
            probs,
            space: space.clone(),
        })
    }

    /// Scales nonnegative masses to unit sum.
    pub fn normalized(space: &ClusterSpace, masses: Vec<f64>) -> Result<Self> {
        let total: f64 = masses.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::AllZeroWeights);
        }
        Self::new(space, masses.into_iter().map(|m| m / total).collect())
    }

    pub fn uniform(space: &ClusterSpace) -> Self {
        let k = space.len();
        Self {
            probs: vec![1.0 / k as f64; k],
            space: space.clone(),
        }
    }

    /// `softmax(scores / tau)` as a distribution over `space`.
    pub fn from_scores(space: &ClusterSpace, scores: &[f64], tau: f64) -> Result<Self> {
        if scores.len() != space.len() {
            return Err(Error::LengthMismatch {
                expected: space.len(),
                got: scores.len(),
            });
        }
        Ok(Self {
            probs: softmax(scores, tau)?,
            space: space.clone(),
        })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn space(&self) -> &ClusterSpace {
        &self.space
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn check_same_space(&self, other: &Self) -> Result<()> {
        if self.space.same_as(&other.space) {
            Ok(())
        } else {
            Err(Error::SpaceMismatch {
                left: self.len(),
                right: other.len(),
            })
        }
    }
}

/// Hidden attractiveness scores, one per cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentUtility {
    scores: Vec<f64>,
    space: ClusterSpace,
}

impl LatentUtility {
    pub fn new(space: &ClusterSpace, scores: Vec<f64>) -> Result<Self> {
        if scores.len() != space.len() {
            return Err(Error::LengthMismatch {
                expected: space.len(),
                got: scores.len(),
            });
        }
        check_finite(&scores)?;
        Ok(Self {
            scores,
            space: space.clone(),
        })
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn space(&self) -> &ClusterSpace {
        &self.space
    }

    /// The preference distribution this utility generates, `softmax(q)`.
    pub fn preference(&self) -> PreferenceDistribution {
        PreferenceDistribution {
            probs: softmax(&self.scores, 1.0).expect("finite scores"),
            space: self.space.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieRule {
    /// Exact ties broken by ascending cluster index.
    AscendingIndex,
    /// Order read from generated text; no scores, so no ties.
    Generated,
}

/// Cluster indices, highest preference first.
///
/// Sorted rankings cover all K clusters. Rankings parsed from generated text
/// may be a prefix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ranking {
    order: Vec<usize>,
    tie_rule: TieRule,
}

impl Ranking {
    /// Builds a (possibly partial) ranking from generated output. Indices must
    /// be distinct and below `k`.
    pub fn generated(order: Vec<usize>, k: usize) -> Result<Self> {
        let mut seen = vec![false; k];
        for &i in &order {
            if i >= k {
                return Err(Error::ClusterIndexOutOfRange { index: i, k });
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidDistribution(format!(
                    "ranking repeats cluster {i}"
                )));
            }
        }
        Ok(Self {
            order,
            tie_rule: TieRule::Generated,
        })
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn tie_rule(&self) -> TieRule {
        self.tie_rule
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Keeps only the clusters accepted by `keep`, preserving relative order.
    pub fn filtered(&self, keep: impl Fn(usize) -> bool) -> Self {
        Self {
            order: self.order.iter().copied().filter(|&i| keep(i)).collect(),
            tie_rule: self.tie_rule,
        }
    }

    /// Same ranking with every index remapped through `map`.
    pub fn remapped(&self, map: impl Fn(usize) -> usize) -> Self {
        Self {
            order: self.order.iter().map(|&i| map(i)).collect(),
            tie_rule: self.tie_rule,
        }
    }
}

fn check_finite(scores: &[f64]) -> Result<()> {
    match scores.iter().enumerate().find(|(_, s)| !s.is_finite()) {
        Some((index, &value)) => Err(Error::NonFiniteScore { index, value }),
        None => Ok(()),
    }
}

/// Temperature softmax, stabilized by subtracting the max scaled score.
pub fn softmax(scores: &[f64], tau: f64) -> Result<Vec<f64>> {
    if scores.is_empty() {
        return Err(Error::EmptyScores);
    }
    check_finite(scores)?;
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::NonPositiveTemperature(tau));
    }
    let scaled: Vec<f64> = scores.iter().map(|s| s / tau).collect();
    let max = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scaled.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

/// Normalized (optionally weighted) interaction frequency per cluster.
///
/// Each interaction contributes its full weight to every cluster it carries.
pub fn empirical_proxy<'a, I>(window: I, space: &ClusterSpace) -> Result<PreferenceDistribution>
where
    I: IntoIterator<Item = (&'a [usize], f64)>,
{
    let mut mass = vec![0.0; space.len()];
    let mut any = false;
    for (clusters, weight) in window {
        any = true;
        if !(weight.is_finite() && weight >= 0.0) {
            return Err(Error::InvalidWeight(weight));
        }
        for &c in clusters {
            space.check_index(c)?;
            mass[c] += weight;
        }
    }
    if !any {
        return Err(Error::EmptyWindow);
    }
    let total: f64 = mass.iter().sum();
    if total <= 0.0 {
        return Err(Error::AllZeroWeights);
    }
    Ok(PreferenceDistribution {
        probs: mass.into_iter().map(|m| m / total).collect(),
        space: space.clone(),
    })
}

/// Indices sorted by descending value; exact ties keep ascending index.
pub fn argsort_descending(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    // stable sort keeps ascending index among equal values
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    order
}

pub fn rank_descending(dist: &PreferenceDistribution) -> Ranking {
    rank_scores(dist.probs())
}

/// Ranks a raw score vector with the same rule as [`rank_descending`].
pub fn rank_scores(scores: &[f64]) -> Ranking {
    Ranking {
        order: argsort_descending(scores),
        tie_rule: TieRule::AscendingIndex,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space(k: usize) -> ClusterSpace {
        ClusterSpace::new((0..k).map(|i| format!("c{i}"))).unwrap()
    }

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn space_rejects_duplicates_after_folding() {
        assert!(ClusterSpace::new(["Action", " action "]).is_err());
        assert!(ClusterSpace::new(Vec::<String>::new()).is_err());
        assert!(ClusterSpace::new(["Action", " "]).is_err());
        let s = ClusterSpace::new(["Action", "Drama"]).unwrap();
        assert_eq!(s.index_of(" DRAMA"), Some(1));
    }

    #[test]
    fn softmax_uniform_and_analytic() {
        assert_close(
            &softmax(&[0.0, 0.0, 0.0], 1.0).unwrap(),
            &[1.0 / 3.0; 3],
            1e-15,
        );
        assert_close(
            &softmax(&[2f64.ln(), 0.0], 1.0).unwrap(),
            &[2.0 / 3.0, 1.0 / 3.0],
            1e-15,
        );
    }

    #[test]
    fn softmax_golden_half_temperature() {
        // 50-digit evaluation of exp(s/0.5) / sum
        let expected = [
            0.843_794_734_481_339_470_05,
            0.114_195_199_384_594_478_93,
            0.042_010_066_134_066_051_018,
        ];
        assert_close(&softmax(&[2.0, 1.0, 0.5], 0.5).unwrap(), &expected, 5e-13);
    }

    #[test]
    fn softmax_errors() {
        assert!(matches!(
            softmax(&[0.0, f64::NAN], 1.0),
            Err(Error::NonFiniteScore { index: 1, .. })
        ));
        assert!(matches!(
            softmax(&[f64::INFINITY], 1.0),
            Err(Error::NonFiniteScore { index: 0, .. })
        ));
        assert!(matches!(
            softmax(&[1.0], 0.0),
            Err(Error::NonPositiveTemperature(_))
        ));
        assert!(matches!(
            softmax(&[1.0], -2.0),
            Err(Error::NonPositiveTemperature(_))
        ));
    }

    #[test]
    fn softmax_survives_large_logits() {
        let p = softmax(&[1e4, -1e4, 9999.0], 1e-3).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(p[0], 1.0);
    }

    #[test]
    fn proxy_counts_and_durations() {
        let s = space(3);
        let w: Vec<(Vec<usize>, f64)> = vec![
            (vec![0], 1.0),
            (vec![0], 1.0),
            (vec![0], 1.0),
            (vec![1], 1.0),
        ];
        let p = empirical_proxy(w.iter().map(|(c, x)| (c.as_slice(), *x)), &s).unwrap();
        assert_eq!(p.probs(), &[0.75, 0.25, 0.0]);

        let one = [1usize];
        let p = empirical_proxy([(&one[..], 1.0)], &s).unwrap();
        assert_eq!(p.probs(), &[0.0, 1.0, 0.0]);

        let (a, b, c) = ([0usize], [1usize], [2usize]);
        let p = empirical_proxy([(&a[..], 120.0), (&b[..], 60.0), (&c[..], 20.0)], &s).unwrap();
        assert_close(p.probs(), &[0.6, 0.3, 0.1], 1e-15);
    }

    #[test]
    fn proxy_multi_label_full_weight() {
        let s = space(3);
        let ab = [0usize, 1];
        let c = [2usize];
        let p = empirical_proxy([(&ab[..], 1.0), (&c[..], 1.0)], &s).unwrap();
        assert_close(p.probs(), &[1.0 / 3.0; 3], 1e-15);
    }

    #[test]
    fn proxy_errors() {
        let s = space(3);
        let empty: Vec<(&[usize], f64)> = vec![];
        assert!(matches!(
            empirical_proxy(empty, &s),
            Err(Error::EmptyWindow)
        ));
        let a = [0usize];
        assert!(matches!(
            empirical_proxy([(&a[..], 0.0)], &s),
            Err(Error::AllZeroWeights)
        ));
        let bad = [3usize];
        assert!(matches!(
            empirical_proxy([(&bad[..], 1.0)], &s),
            Err(Error::ClusterIndexOutOfRange { index: 3, k: 3 })
        ));
        assert!(matches!(
            empirical_proxy([(&a[..], -1.0)], &s),
            Err(Error::InvalidWeight(_))
        ));
    }

    #[test]
    fn ranking_examples() {
        let s = space(3);
        let d = PreferenceDistribution::new(&s, vec![0.2, 0.5, 0.3]).unwrap();
        assert_eq!(rank_descending(&d).order(), &[1, 2, 0]);
        let d = PreferenceDistribution::new(&s, vec![0.25, 0.25, 0.5]).unwrap();
        let r = rank_descending(&d);
        assert_eq!(r.order(), &[2, 0, 1]);
        assert_eq!(r.tie_rule(), TieRule::AscendingIndex);
        let u = PreferenceDistribution::uniform(&space(4));
        assert_eq!(rank_descending(&u).order(), &[0, 1, 2, 3]);
    }

    #[test]
    fn distribution_validation() {
        let s = space(2);
        assert!(PreferenceDistribution::new(&s, vec![0.5, 0.6]).is_err());
        assert!(PreferenceDistribution::new(&s, vec![1.1, -0.1]).is_err());
        assert!(PreferenceDistribution::new(&s, vec![1.0]).is_err());
        assert!(PreferenceDistribution::new(&s, vec![0.5, 0.5 + 1e-10]).is_ok());
    }

    #[test]
    fn generated_ranking_rejects_repeats() {
        assert!(Ranking::generated(vec![1, 1], 3).is_err());
        assert!(Ranking::generated(vec![3], 3).is_err());
        assert_eq!(Ranking::generated(vec![2, 0], 3).unwrap().len(), 2);
    }
}
