use prefprobe::dataset::{
    render_history, sessionize, HistoryStyle, InteractionRecord, SessionRule,
};
use prefprobe::providers::{
    render_prompt, ChoiceAlphabet, PromptKind, PromptTarget, PromptTemplate,
};
use prefprobe::{ClusterSpace, Horizon};

fn golden(name: &str) -> String {
    let path = format!("{}/tests/golden/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

fn history() -> String {
    let space = ClusterSpace::new(["Action", "Sci-Fi", "Crime", "Drama"]).unwrap();
    let rec = |title: &str, t, r, clusters: Vec<usize>| InteractionRecord {
        user_id: "u1".into(),
        item_id: title.to_lowercase(),
        timestamp: t,
        clusters,
        weight: r,
        title: Some(title.into()),
    };
    let records = vec![
        rec("Inception", 1_700_000_000, 5.0, vec![0, 1]),
        rec("The Godfather", 1_700_000_600, 4.5, vec![2, 3]),
    ];
    render_history(
        &sessionize(&records, SessionRule::CalendarDay),
        &space,
        HistoryStyle::Rating,
    )
}

fn render(kind: PromptKind, horizon: Horizon, target: PromptTarget<'_>) -> String {
    let t = PromptTemplate::default_for(kind, horizon);
    render_prompt(&t, &history(), target, &ChoiceAlphabet::default()).unwrap()
}

fn choices() -> Vec<String> {
    ["Action", "Crime", "Drama", "Sci-Fi"]
        .map(String::from)
        .to_vec()
}

#[test]
fn likelihood_probe_prompts() {
    for (h, file) in [
        (Horizon::LongTerm, "likelihood_long_term.txt"),
        (Horizon::ShortTerm, "likelihood_short_term.txt"),
    ] {
        let p = render(
            PromptKind::LikelihoodProbe,
            h,
            PromptTarget::Cluster("Drama"),
        );
        assert_eq!(p, golden(file), "{file}");
    }
}

#[test]
fn generative_prompt() {
    let c = choices();
    let p = render(
        PromptKind::GenerativeClassify,
        Horizon::LongTerm,
        PromptTarget::Choices(&c),
    );
    assert_eq!(p, golden("generative_long_term.txt"));
}

#[test]
fn direct_generation_prompts() {
    let c = choices();
    let p = render(
        PromptKind::DirectGenerateTop1,
        Horizon::LongTerm,
        PromptTarget::Choices(&c),
    );
    assert_eq!(p, golden("top1_long_term.txt"));
    let p = render(
        PromptKind::DirectGenerateTopk,
        Horizon::LongTerm,
        PromptTarget::TopK { choices: &c, k: 3 },
    );
    assert_eq!(p, golden("topk_long_term.txt"));
}

#[test]
fn conditional_prompt() {
    let p = render(
        PromptKind::HierarchicalConditional,
        Horizon::LongTerm,
        PromptTarget::Conditional {
            parent: "Restaurants",
            cluster: "Sushi Bars",
        },
    );
    assert_eq!(p, golden("conditional_long_term.txt"));
}

#[test]
fn required_endings() {
    assert!(golden("likelihood_long_term.txt").ends_with("Answer in \"Yes\" or \"No\"."));
    assert!(golden("generative_long_term.txt")
        .ends_with("Answer with the letter only (A, B, C, etc.):"));
}
