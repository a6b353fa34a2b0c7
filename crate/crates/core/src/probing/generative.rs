use super::{Method, ProbeConfig, ProbeTrace};
use crate::error::Result;
use crate::providers::{
    next_token_logits, render_prompt, ProbeIntent, ProbeTarget, PromptTarget, Provider,
};
use crate::simplex::{ClusterSpace, PreferenceDistribution};

/// One multiple-choice prompt; `S[j]` is the logit of the j-th letter and the
/// output is `softmax(S / tau)`.
///
/// Fails with `TooManyChoices` before calling the provider when K exceeds the
/// choice alphabet.
pub fn generative_classify(
    provider: &dyn Provider,
    history: &str,
    space: &ClusterSpace,
    cfg: &ProbeConfig,
) -> Result<(PreferenceDistribution, ProbeTrace)> {
    cfg.validate()?;
    let alphabet = &cfg.prompts.alphabet;
    let letters = alphabet.take(space.len())?.to_vec();
    let prompt = render_prompt(
        &cfg.prompts.generative,
        history,
        PromptTarget::Choices(space.labels()),
        alphabet,
    )?;
    let intent = ProbeIntent::Choice((0..space.len()).map(ProbeTarget::Cluster).collect());

    let mut trace = ProbeTrace::new(Method::Generative);
    trace.calls = 1;
    let reading = next_token_logits(provider, &prompt, &letters, &intent, cfg.floor)?;
    trace.prompt_tokens_total = reading.response.token_count;
    trace.floored_flags = reading.floored.clone();
    let floored: Vec<&str> = letters
        .iter()
        .zip(&reading.floored)
        .filter(|(_, &f)| f)
        .map(|(l, _)| l.as_str())
        .collect();
    if !floored.is_empty() {
        trace.notes.push(format!(
            "letters outside returned top-N, floored at {}: {}",
            reading.floor,
            floored.join(" ")
        ));
    }
    let dist = PreferenceDistribution::from_scores(space, &reading.values, cfg.tau)?;
    trace.raw_scores = Some(reading.values);
    Ok((dist, trace))
}
