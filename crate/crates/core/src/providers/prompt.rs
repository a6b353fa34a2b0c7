//! Prompt templates.
//!
//! Template bodies use `{NAME}` placeholders. `{HORIZON}` is filled from the
//! template's horizon; the rest come from the history text and the
//! [`PromptTarget`]. Any placeholder left without a value is an error, as is
//! an empty history.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Horizon;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptKind {
    LikelihoodProbe,
    GenerativeClassify,
    DirectGenerateTop1,
    DirectGenerateTopk,
    HierarchicalConditional,
}

const LIKELIHOOD_BODY: &str = "User History:\n{HISTORY}\n\n\
Considering the user's {HORIZON} preferences from their movie rating history, \
do they like {GENRE} movies? Answer in \"Yes\" or \"No\".";

const GENERATIVE_BODY: &str = "User History:\n{HISTORY}\n\n\
Choices:\n{CHOICES}\n\n\
Considering the user's {HORIZON} preferences from their movie rating history, \
which genre do they like MOST? Answer with the letter only (A, B, C, etc.):";

const TOP1_BODY: &str = "User History:\n{HISTORY}\n\n\
Choices:\n{CHOICES}\n\n\
Question: Based on the user's {HORIZON} preferences from their entire history, \
tell me the cluster they like the MOST. Answer with the letter only (A, B, C, etc.):";

const TOPK_BODY: &str = "User History:\n{HISTORY}\n\n\
Choices:\n{CHOICES}\n\n\
Question: Based on the user's {HORIZON} preferences from their entire history, \
rank the top {K} genres they like the most. Answer with the letter only (A, B, C, etc.):";

const CONDITIONAL_BODY: &str = "User History:\n{HISTORY}\n\n\
Given the user is interested in {L1_PARENT}, considering their {HORIZON} preferences, \
do they like {GENRE}? Answer in \"Yes\" or \"No\".";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub kind: PromptKind,
    pub horizon: Horizon,
    pub body: String,
}

impl PromptTemplate {
    pub fn default_for(kind: PromptKind, horizon: Horizon) -> Self {
        let body = match kind {
            PromptKind::LikelihoodProbe => LIKELIHOOD_BODY,
            PromptKind::GenerativeClassify => GENERATIVE_BODY,
            PromptKind::DirectGenerateTop1 => TOP1_BODY,
            PromptKind::DirectGenerateTopk => TOPK_BODY,
            PromptKind::HierarchicalConditional => CONDITIONAL_BODY,
        };
        Self {
            kind,
            horizon,
            body: body.to_string(),
        }
    }
}

/// What a prompt asks about.
#[derive(Debug, Clone, Copy)]
pub enum PromptTarget<'a> {
    Cluster(&'a str),
    Choices(&'a [String]),
    TopK { choices: &'a [String], k: usize },
    Conditional { parent: &'a str, cluster: &'a str },
}

/// Single-token labels used to index choices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChoiceAlphabet {
    letters: Vec<String>,
}

impl ChoiceAlphabet {
    pub fn new<I: IntoIterator<Item = S>, S: Into<String>>(letters: I) -> Result<Self> {
        let letters: Vec<String> = letters.into_iter().map(Into::into).collect();
        if letters.is_empty() || letters.iter().any(String::is_empty) {
            return Err(Error::Config(
                "choice alphabet needs nonempty letters".into(),
            ));
        }
        for (i, l) in letters.iter().enumerate() {
            if letters[..i].contains(l) {
                return Err(Error::Config(format!("duplicate choice letter {l:?}")));
            }
        }
        Ok(Self { letters })
    }

    pub fn limit(&self) -> usize {
        self.letters.len()
    }

    pub fn letter(&self, index: usize) -> Option<&str> {
        self.letters.get(index).map(String::as_str)
    }

    /// First `k` letters, or `TooManyChoices`.
    pub fn take(&self, k: usize) -> Result<&[String]> {
        if k > self.limit() {
            return Err(Error::TooManyChoices {
                k,
                limit: self.limit(),
            });
        }
        Ok(&self.letters[..k])
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.letters.iter().position(|l| l == token)
    }
}

impl Default for ChoiceAlphabet {
    fn default() -> Self {
        Self {
            letters: ('A'..='Z').map(String::from).collect(),
        }
    }
}

/// One template per prompt kind, all sharing a horizon.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSet {
    pub likelihood: PromptTemplate,
    pub generative: PromptTemplate,
    pub top1: PromptTemplate,
    pub topk: PromptTemplate,
    pub conditional: PromptTemplate,
    pub alphabet: ChoiceAlphabet,
}

impl PromptSet {
    pub fn defaults(horizon: Horizon) -> Self {
        Self {
            likelihood: PromptTemplate::default_for(PromptKind::LikelihoodProbe, horizon),
            generative: PromptTemplate::default_for(PromptKind::GenerativeClassify, horizon),
            top1: PromptTemplate::default_for(PromptKind::DirectGenerateTop1, horizon),
            topk: PromptTemplate::default_for(PromptKind::DirectGenerateTopk, horizon),
            conditional: PromptTemplate::default_for(PromptKind::HierarchicalConditional, horizon),
            alphabet: ChoiceAlphabet::default(),
        }
    }
}

fn render_choices(choices: &[String], alphabet: &ChoiceAlphabet) -> Result<String> {
    let letters = alphabet.take(choices.len())?;
    Ok(letters
        .iter()
        .zip(choices)
        .map(|(l, c)| format!("{l}. {c}"))
        .collect::<Vec<_>>()
        .join("\n"))
}

/// Renders `template` for one target. Pure function of its inputs.
pub fn render_prompt(
    template: &PromptTemplate,
    history: &str,
    target: PromptTarget<'_>,
    alphabet: &ChoiceAlphabet,
) -> Result<String> {
    let mut values: Vec<(&str, String)> = vec![("HORIZON", template.horizon.as_phrase().into())];
    if !history.trim().is_empty() {
        values.push(("HISTORY", history.to_string()));
    }
    match target {
        PromptTarget::Cluster(name) => values.push(("GENRE", name.to_string())),
        PromptTarget::Choices(choices) => {
            values.push(("CHOICES", render_choices(choices, alphabet)?));
        }
        PromptTarget::TopK { choices, k } => {
            values.push(("CHOICES", render_choices(choices, alphabet)?));
            values.push(("K", k.to_string()));
        }
        PromptTarget::Conditional { parent, cluster } => {
            values.push(("L1_PARENT", parent.to_string()));
            values.push(("GENRE", cluster.to_string()));
        }
    }
    substitute(&template.body, &values)
}

fn substitute(body: &str, values: &[(&str, String)]) -> Result<String> {
    let mut out = String::with_capacity(body.len() + 256);
    let mut rest = body;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let name_len = after
            .find(|c: char| !(c.is_ascii_uppercase() || c.is_ascii_digit() || c == '_'))
            .unwrap_or(after.len());
        if name_len > 0 && after[name_len..].starts_with('}') {
            let name = &after[..name_len];
            match values.iter().find(|(k, _)| *k == name) {
                Some((_, v)) => out.push_str(v),
                None => return Err(Error::UnresolvedPlaceholder(name.to_string())),
            }
            rest = &after[name_len + 1..];
        } else {
            out.push('{');
            rest = after;
        }
    }
    out.push_str(rest);
    Ok(out)
}
