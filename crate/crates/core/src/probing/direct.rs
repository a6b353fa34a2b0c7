use super::{Method, ProbeConfig, ProbeTrace};
use crate::error::{Error, Result};
use crate::providers::{
    generate_text, render_prompt, ChoiceAlphabet, ProbeIntent, ProbeTarget, PromptTarget, Provider,
};
use crate::simplex::{ClusterSpace, Ranking};

/// Reads choice letters out of free text.
///
/// Pieces are split on commas and whitespace, stripped of surrounding
/// punctuation, upper-cased, and matched against the first `k_total` letters.
/// Repeats keep their first occurrence; at most `k` letters are returned.
pub fn parse_letter_ranking(
    text: &str,
    alphabet: &ChoiceAlphabet,
    k_total: usize,
    k: usize,
) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for piece in text.split(|c: char| c == ',' || c.is_whitespace()) {
        let piece = piece.trim_matches(|c: char| c.is_ascii_punctuation());
        if piece.chars().count() != 1 {
            continue;
        }
        let Some(i) = alphabet.index_of(&piece.to_uppercase()) else {
            continue;
        };
        if i < k_total && !out.contains(&i) {
            out.push(i);
            if out.len() == k {
                break;
            }
        }
    }
    if out.is_empty() {
        return Err(Error::UnparseableGeneration(text.to_string()));
    }
    Ok(out)
}

/// Direct-generation baseline: ask for a top-k lettered list and parse it.
/// Produces a ranking prefix but no distribution.
pub fn direct_generate_ranking(
    provider: &dyn Provider,
    history: &str,
    space: &ClusterSpace,
    k: usize,
    cfg: &ProbeConfig,
) -> Result<(Ranking, ProbeTrace)> {
    let alphabet = &cfg.prompts.alphabet;
    alphabet.take(space.len())?;
    if k == 0 || k > space.len() {
        return Err(Error::KOutOfRange {
            k,
            max: space.len(),
        });
    }
    let (template, target) = if k == 1 {
        (&cfg.prompts.top1, PromptTarget::Choices(space.labels()))
    } else {
        (
            &cfg.prompts.topk,
            PromptTarget::TopK {
                choices: space.labels(),
                k,
            },
        )
    };
    let prompt = render_prompt(template, history, target, alphabet)?;
    let intent = ProbeIntent::RankList {
        targets: (0..space.len()).map(ProbeTarget::Cluster).collect(),
        k,
    };
    let generation = generate_text(provider, &prompt, 3 * k + 2, &intent)?;

    let mut trace = ProbeTrace::new(Method::Direct);
    trace.calls = 1;
    trace.prompt_tokens_total = generation.token_count;
    let order = parse_letter_ranking(&generation.text, alphabet, space.len(), k)?;
    if order.len() < k {
        trace.notes.push(format!(
            "partial parse: {} of {k} letters recovered from {:?}",
            order.len(),
            generation.text
        ));
    }
    Ok((Ranking::generated(order, space.len())?, trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, k_total: usize, k: usize) -> Result<Vec<usize>> {
        parse_letter_ranking(text, &ChoiceAlphabet::default(), k_total, k)
    }

    #[test]
    fn parser_rules() {
        assert_eq!(parse("B, B, A", 3, 2).unwrap(), vec![1, 0]);
        assert_eq!(parse("a\nc b", 3, 3).unwrap(), vec![0, 2, 1]);
        assert_eq!(parse("A. Action\nB) Comedy", 3, 3).unwrap(), vec![0, 1]);
        assert_eq!(parse("A, Z, B", 3, 3).unwrap(), vec![0, 1]);
        assert!(matches!(
            parse("maybe?", 3, 2),
            Err(Error::UnparseableGeneration(_))
        ));
        assert!(matches!(
            parse("", 3, 2),
            Err(Error::UnparseableGeneration(_))
        ));
    }

    #[test]
    fn parser_truncates_to_k() {
        assert_eq!(parse("C, B, A", 3, 2).unwrap(), vec![2, 1]);
    }
}
