//! Ranking and divergence metrics.
//!
//! * `DCG@k = sum_{r=1..k} gain[order[r-1]] / log2(r + 1)`, NDCG divides by the
//!   DCG of the ideal (descending-gain) order. IDCG = 0 gives NDCG = 0.
//! * `Precision@k = hits / k`.
//! * `Recall@k = hits / K` by default ([`RecallDenominator::ClusterCount`]); the
//!   usual `hits / |relevant|` is available as [`RecallDenominator::StandardR`].
//! * Jensen-Shannon divergence in bits, so it lies in `[0, 1]`.
//!
//! [`brute_force_best`] enumerates all K! orderings and is the optimality
//! oracle for the ranking rule.

use std::collections::BTreeMap;

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simplex::{PreferenceDistribution, Ranking};

/// Largest K accepted by [`brute_force_best`].
pub const BRUTE_FORCE_MAX_K: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RecallDenominator {
    /// Divide by the number of clusters K.
    #[default]
    ClusterCount,
    /// Divide by the number of relevant clusters.
    StandardR,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Ndcg,
    Precision,
    Recall(RecallDenominator),
}

/// Whether NDCG uses the proxy probabilities or 0/1 relevance as gains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GainMode {
    #[default]
    Graded,
    Binary,
}

fn check_k(k: usize, max: usize) -> Result<()> {
    if k == 0 || k > max {
        Err(Error::KOutOfRange { k, max })
    } else {
        Ok(())
    }
}

fn check_order(order: &[usize], k_total: usize) -> Result<()> {
    match order.iter().find(|&&i| i >= k_total) {
        Some(&index) => Err(Error::ClusterIndexOutOfRange { index, k: k_total }),
        None => Ok(()),
    }
}

fn check_gains(gains: &[f64]) -> Result<()> {
    match gains.iter().find(|g| !(g.is_finite() && **g >= 0.0)) {
        Some(g) => Err(Error::InvalidDistribution(format!(
            "gain {g} must be finite and >= 0"
        ))),
        None => Ok(()),
    }
}

fn discount(rank: usize) -> f64 {
    // rank is 1-based
    ((rank + 1) as f64).log2()
}

fn dcg(order: &[usize], gains: &[f64], k: usize) -> f64 {
    order
        .iter()
        .take(k)
        .enumerate()
        .map(|(r, &i)| gains[i] / discount(r + 1))
        .sum()
}

fn ideal_dcg(gains: &[f64], k: usize) -> f64 {
    let mut sorted = gains.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    sorted
        .iter()
        .take(k)
        .enumerate()
        .map(|(r, g)| g / discount(r + 1))
        .sum()
}

fn ndcg_order(order: &[usize], gains: &[f64], k: usize) -> f64 {
    let ideal = ideal_dcg(gains, k);
    if ideal == 0.0 {
        0.0
    } else {
        dcg(order, gains, k) / ideal
    }
}

fn hits(order: &[usize], relevant: &[bool], k: usize) -> usize {
    order.iter().take(k).filter(|&&i| relevant[i]).count()
}

fn score_order(
    order: &[usize],
    gains: &[f64],
    relevant: &[bool],
    k: usize,
    metric: MetricKind,
) -> Result<f64> {
    Ok(match metric {
        MetricKind::Ndcg => ndcg_order(order, gains, k),
        MetricKind::Precision => hits(order, relevant, k) as f64 / k as f64,
        MetricKind::Recall(RecallDenominator::ClusterCount) => {
            hits(order, relevant, k) as f64 / relevant.len() as f64
        }
        MetricKind::Recall(RecallDenominator::StandardR) => {
            let r = relevant.iter().filter(|&&x| x).count();
            if r == 0 {
                return Err(Error::NoRelevantItems);
            }
            hits(order, relevant, k) as f64 / r as f64
        }
    })
}

pub fn ndcg_at_k(ranking: &Ranking, gains: &[f64], k: usize) -> Result<f64> {
    check_k(k, gains.len())?;
    check_gains(gains)?;
    check_order(ranking.order(), gains.len())?;
    Ok(ndcg_order(ranking.order(), gains, k))
}

pub fn precision_at_k(ranking: &Ranking, relevant: &[bool], k: usize) -> Result<f64> {
    check_k(k, relevant.len())?;
    check_order(ranking.order(), relevant.len())?;
    score_order(ranking.order(), &[], relevant, k, MetricKind::Precision)
}

pub fn recall_at_k(
    ranking: &Ranking,
    relevant: &[bool],
    k: usize,
    denominator: RecallDenominator,
) -> Result<f64> {
    check_k(k, relevant.len())?;
    check_order(ranking.order(), relevant.len())?;
    score_order(
        ranking.order(),
        &[],
        relevant,
        k,
        MetricKind::Recall(denominator),
    )
}

/// Scores one ranking under `metric`.
pub fn score(
    ranking: &Ranking,
    gains: &[f64],
    relevant: &[bool],
    k: usize,
    metric: MetricKind,
) -> Result<f64> {
    match metric {
        MetricKind::Ndcg => ndcg_at_k(ranking, gains, k),
        MetricKind::Precision => precision_at_k(ranking, relevant, k),
        MetricKind::Recall(d) => recall_at_k(ranking, relevant, k, d),
    }
}

/// Jensen-Shannon divergence (base 2) between two distributions on the same
/// space.
pub fn js_divergence(p: &PreferenceDistribution, q: &PreferenceDistribution) -> Result<f64> {
    p.check_same_space(q)?;
    Ok(js_divergence_raw(p.probs(), q.probs()))
}

/// Base-2 JS divergence of two equal-length probability vectors.
pub fn js_divergence_raw(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len(), "js_divergence_raw: length mismatch");
    let half_kl = |a: f64, m: f64| {
        if a > 0.0 {
            0.5 * a * (a / m).log2()
        } else {
            0.0
        }
    };
    let js: f64 = p
        .iter()
        .zip(q)
        .map(|(&a, &b)| {
            let m = 0.5 * (a + b);
            half_kl(a, m) + half_kl(b, m)
        })
        .sum();
    js.clamp(0.0, 1.0)
}

/// Maximum of `metric` over every permutation of the K clusters, plus one
/// permutation achieving it (the first in lexicographic order).
pub fn brute_force_best(
    gains: &[f64],
    relevant: &[bool],
    k: usize,
    metric: MetricKind,
) -> Result<(f64, Vec<usize>)> {
    let n = gains.len().max(relevant.len());
    if n > BRUTE_FORCE_MAX_K {
        return Err(Error::KTooLargeForBruteForce(n, BRUTE_FORCE_MAX_K));
    }
    match metric {
        MetricKind::Ndcg => {
            check_gains(gains)?;
            check_k(k, gains.len())?;
        }
        _ => check_k(k, relevant.len())?,
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    for perm in (0..n).permutations(n) {
        let s = score_order(&perm, gains, relevant, k, metric)?;
        if best.as_ref().is_none_or(|(b, _)| s > *b) {
            best = Some((s, perm));
        }
    }
    Ok(best.expect("at least one permutation"))
}

/// `relevant[i] = dist[i] > threshold`.
pub fn relevance_from_proxy(dist: &PreferenceDistribution, threshold: f64) -> Vec<bool> {
    dist.probs().iter().map(|&p| p > threshold).collect()
}

/// Metrics of one sample at every cutoff.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMetrics {
    pub ndcg: BTreeMap<usize, f64>,
    pub precision: BTreeMap<usize, f64>,
    pub recall: BTreeMap<usize, f64>,
    pub js_div: Option<f64>,
    /// IDCG was zero for this sample.
    pub zero_idcg: bool,
}

/// Settings shared by every sample of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSettings {
    pub k_list: Vec<usize>,
    pub recall: RecallDenominator,
    pub gains: GainMode,
    pub relevance_threshold: f64,
}

impl Default for MetricSettings {
    fn default() -> Self {
        Self {
            k_list: vec![1, 5, 10, 20],
            recall: RecallDenominator::ClusterCount,
            gains: GainMode::Graded,
            relevance_threshold: 0.0,
        }
    }
}

/// Evaluates a ranking (and, when available, the predicted distribution)
/// against the proxy label.
pub fn evaluate_sample(
    ranking: &Ranking,
    predicted: Option<&PreferenceDistribution>,
    label: &PreferenceDistribution,
    settings: &MetricSettings,
) -> Result<SampleMetrics> {
    let relevant = relevance_from_proxy(label, settings.relevance_threshold);
    let gains: Vec<f64> = match settings.gains {
        GainMode::Graded => label.probs().to_vec(),
        GainMode::Binary => relevant
            .iter()
            .map(|&r| if r { 1.0 } else { 0.0 })
            .collect(),
    };
    let mut out = SampleMetrics {
        ndcg: BTreeMap::new(),
        precision: BTreeMap::new(),
        recall: BTreeMap::new(),
        js_div: predicted.map(|p| js_divergence(p, label)).transpose()?,
        zero_idcg: false,
    };
    for &k in &settings.k_list {
        out.ndcg.insert(k, ndcg_at_k(ranking, &gains, k)?);
        out.precision
            .insert(k, precision_at_k(ranking, &relevant, k)?);
        let recall = match recall_at_k(ranking, &relevant, k, settings.recall) {
            Err(Error::NoRelevantItems) => 0.0,
            other => other?,
        };
        out.recall.insert(k, recall);
        if ideal_dcg(&gains, k) == 0.0 {
            out.zero_idcg = true;
        }
    }
    Ok(out)
}

/// Mean metrics over samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub k_list: Vec<usize>,
    pub ndcg: BTreeMap<usize, f64>,
    pub precision: BTreeMap<usize, f64>,
    pub recall: BTreeMap<usize, f64>,
    /// Absent when no sample carried a distribution.
    pub js_div: Option<f64>,
    pub n_samples: usize,
    pub notes: Vec<String>,
}

impl MetricsReport {
    /// Unweighted mean over `samples`, summed in the given order.
    pub fn aggregate<'a, I>(k_list: &[usize], samples: I) -> Self
    where
        I: IntoIterator<Item = &'a SampleMetrics>,
    {
        let mut n = 0usize;
        let mut js_sum = 0.0;
        let mut js_n = 0usize;
        let mut zero_idcg = 0usize;
        let zeros = || k_list.iter().map(|&k| (k, 0.0)).collect::<BTreeMap<_, _>>();
        let (mut ndcg, mut precision, mut recall) = (zeros(), zeros(), zeros());
        for s in samples {
            n += 1;
            for &k in k_list {
                *ndcg.get_mut(&k).unwrap() += s.ndcg.get(&k).copied().unwrap_or(0.0);
                *precision.get_mut(&k).unwrap() += s.precision.get(&k).copied().unwrap_or(0.0);
                *recall.get_mut(&k).unwrap() += s.recall.get(&k).copied().unwrap_or(0.0);
            }
            if let Some(js) = s.js_div {
                js_sum += js;
                js_n += 1;
            }
            zero_idcg += usize::from(s.zero_idcg);
        }
        let mean = |m: BTreeMap<usize, f64>| {
            m.into_iter()
                .map(|(k, v)| (k, if n == 0 { 0.0 } else { v / n as f64 }))
                .collect()
        };
        let mut notes = Vec::new();
        if zero_idcg > 0 {
            notes.push(format!(
                "{zero_idcg} sample(s) had IDCG = 0; NDCG counted as 0"
            ));
        }
        Self {
            k_list: k_list.to_vec(),
            ndcg: mean(ndcg),
            precision: mean(precision),
            recall: mean(recall),
            js_div: (js_n > 0).then(|| js_sum / js_n as f64),
            n_samples: n,
            notes,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simplex::{rank_scores, ClusterSpace};

    fn ranking(order: &[usize], k: usize) -> Ranking {
        Ranking::generated(order.to_vec(), k).unwrap()
    }

    #[test]
    fn ndcg_reversed_three() {
        // brute-force 50-digit evaluation: DCG 3.76186, IDCG 4.76186
        let r = ranking(&[2, 1, 0], 3);
        let v = ndcg_at_k(&r, &[3.0, 2.0, 1.0], 3).unwrap();
        assert!((v - 0.789_998_004_246_035_9).abs() < 1e-12, "{v}");
    }

    #[test]
    fn ndcg_edge_cases() {
        let gains = [0.1, 0.7, 0.2];
        let ideal = rank_scores(&gains);
        for k in 1..=3 {
            assert!((ndcg_at_k(&ideal, &gains, k).unwrap() - 1.0).abs() < 1e-15);
        }
        assert_eq!(ndcg_at_k(&ideal, &[0.0; 3], 2).unwrap(), 0.0);
        assert!(matches!(
            ndcg_at_k(&ideal, &gains, 0),
            Err(Error::KOutOfRange { .. })
        ));
        assert!(matches!(
            ndcg_at_k(&ideal, &gains, 4),
            Err(Error::KOutOfRange { .. })
        ));
    }

    #[test]
    fn precision_examples() {
        let r = ranking(&[1, 0, 2], 3);
        assert_eq!(precision_at_k(&r, &[true, false, false], 2).unwrap(), 0.5);
        for k in 1..=3 {
            assert_eq!(precision_at_k(&r, &[true; 3], k).unwrap(), 1.0);
            assert_eq!(precision_at_k(&r, &[false; 3], k).unwrap(), 0.0);
        }
    }

    #[test]
    fn recall_variants() {
        let r = ranking(&[0, 2, 1, 3], 4);
        let rel = [true, true, false, false];
        assert_eq!(
            recall_at_k(&r, &rel, 2, RecallDenominator::ClusterCount).unwrap(),
            0.25
        );
        assert_eq!(
            recall_at_k(&r, &rel, 2, RecallDenominator::StandardR).unwrap(),
            0.5
        );
        assert_eq!(
            recall_at_k(&r, &rel, 4, RecallDenominator::ClusterCount).unwrap(),
            0.5
        );
        assert!(matches!(
            recall_at_k(&r, &[false; 4], 2, RecallDenominator::StandardR),
            Err(Error::NoRelevantItems)
        ));
    }

    #[test]
    fn js_examples() {
        let s = ClusterSpace::new(["a", "b"]).unwrap();
        let p = PreferenceDistribution::new(&s, vec![0.7, 0.3]).unwrap();
        let q = PreferenceDistribution::new(&s, vec![0.5, 0.5]).unwrap();
        assert_eq!(js_divergence(&p, &p).unwrap(), 0.0);
        // 50-digit evaluation
        let v = js_divergence(&p, &q).unwrap();
        assert!((v - 0.030_305_144_839_322_33).abs() < 5e-13, "{v}");
        let a = PreferenceDistribution::new(&s, vec![1.0, 0.0]).unwrap();
        let b = PreferenceDistribution::new(&s, vec![0.0, 1.0]).unwrap();
        assert_eq!(js_divergence(&a, &b).unwrap(), 1.0);
        let other = ClusterSpace::new(["x", "y"]).unwrap();
        let c = PreferenceDistribution::new(&other, vec![0.5, 0.5]).unwrap();
        assert!(matches!(
            js_divergence(&p, &c),
            Err(Error::SpaceMismatch { .. })
        ));
    }

    #[test]
    fn brute_force_examples() {
        let (best, perm) = brute_force_best(&[3.0, 2.0, 1.0], &[], 3, MetricKind::Ndcg).unwrap();
        assert!((best - 1.0).abs() < 1e-15);
        assert_eq!(perm, vec![0, 1, 2]);
        let (best, _) =
            brute_force_best(&[], &[false, false, true], 1, MetricKind::Precision).unwrap();
        assert_eq!(best, 1.0);
        assert!(matches!(
            brute_force_best(&[0.1; 9], &[], 1, MetricKind::Ndcg),
            Err(Error::KTooLargeForBruteForce(9, 8))
        ));
    }

    #[test]
    fn relevance_thresholds() {
        let s = ClusterSpace::new(["a", "b", "c"]).unwrap();
        let d = PreferenceDistribution::new(&s, vec![0.75, 0.25, 0.0]).unwrap();
        assert_eq!(relevance_from_proxy(&d, 0.0), vec![true, true, false]);
        assert_eq!(relevance_from_proxy(&d, 0.3), vec![true, false, false]);
        let u = PreferenceDistribution::uniform(&s);
        assert_eq!(relevance_from_proxy(&u, 1.0), vec![false; 3]);
    }

    #[test]
    fn aggregate_means() {
        let s = ClusterSpace::new(["a", "b"]).unwrap();
        let label = PreferenceDistribution::new(&s, vec![0.6, 0.4]).unwrap();
        let settings = MetricSettings {
            k_list: vec![1, 2],
            ..MetricSettings::default()
        };
        let good = evaluate_sample(&ranking(&[0, 1], 2), Some(&label), &label, &settings).unwrap();
        let bad = evaluate_sample(&ranking(&[1, 0], 2), None, &label, &settings).unwrap();
        assert_eq!(good.ndcg[&1], 1.0);
        let rep = MetricsReport::aggregate(&settings.k_list, [&good, &bad]);
        assert_eq!(rep.n_samples, 2);
        assert!((rep.ndcg[&1] - (1.0 + 0.4 / 0.6) / 2.0).abs() < 1e-15);
        assert_eq!(rep.js_div, Some(0.0));
    }

    #[test]
    fn partial_rankings_score_their_prefix() {
        let r = ranking(&[1], 3);
        let v = ndcg_at_k(&r, &[0.2, 0.5, 0.3], 2).unwrap();
        let ideal = 0.5 + 0.3 / 3f64.log2();
        assert!((v - 0.5 / ideal).abs() < 1e-15);
    }
}
