use super::{score_yes_no, Method, ProbeConfig, ProbeTrace, YesNoProbe};
use crate::error::Result;
use crate::providers::{render_prompt, ProbeTarget, PromptTarget, Provider};
use crate::simplex::{ClusterSpace, PreferenceDistribution};

/// Per-cluster yes/no probing.
///
/// For cluster j the affirmative and negative logits are averaged into
/// `s+` and `s-`; the cluster score is `S[j] = exp(s+) / (exp(s+) + exp(s-))`
/// and the output is `softmax(S / tau)`.
pub fn likelihood_probe(
    provider: &dyn Provider,
    history: &str,
    space: &ClusterSpace,
    cfg: &ProbeConfig,
) -> Result<(PreferenceDistribution, ProbeTrace)> {
    cfg.validate()?;
    let probes = space
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
                    &cfg.prompts.alphabet,
                )?,
                target: ProbeTarget::Cluster(j),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let scores = score_yes_no(provider, &probes, cfg, |i| i)?;

    let mut trace = ProbeTrace::new(Method::Likelihood);
    trace.calls = probes.len();
    trace.prompt_tokens_total = scores.iter().map(|s| s.tokens).sum();
    trace.floored_flags = scores.iter().map(|s| s.floored).collect();
    trace.failed = scores
        .iter()
        .enumerate()
        .filter_map(|(j, s)| s.failed.then_some(j))
        .collect();
    if !trace.failed.is_empty() {
        trace.notes.push(format!(
            "{} probe(s) failed; neutral score substituted",
            trace.failed.len()
        ));
    }
    if trace.floored_count() > 0 {
        trace.notes.push(format!(
            "{} probe(s) read floored tokens",
            trace.floored_count()
        ));
    }
    let raw: Vec<f64> = scores.iter().map(|s| s.score).collect();
    let dist = PreferenceDistribution::from_scores(space, &raw, cfg.tau)?;
    trace.raw_scores = Some(raw);
    Ok((dist, trace))
}
