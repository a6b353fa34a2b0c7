//! HttpProvider against a local single-purpose server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};

use serde_json::Value;

use prefprobe::error::Error;
use prefprobe::probing::{direct_generate_ranking, likelihood_probe, ProbeConfig};
use prefprobe::providers::{
    next_token_logits, HttpConfig, HttpProvider, ProbeIntent, Provider, TokenSet,
};
use prefprobe::{ClusterSpace, Horizon};

const LOGPROBS: &str = include_str!("fixtures/completion_logprobs.json");
const TEXT: &str = include_str!("fixtures/completion_text.json");
const NO_LOGPROBS: &str = include_str!("fixtures/completion_missing_logprobs.json");

struct Fixture {
    url: String,
    requests: Arc<Mutex<Vec<(Option<String>, Value)>>>,
}

/// Serves `reply(body)` for every POST until the test process exits.
fn serve(reply: fn(&Value) -> (u16, String)) -> Fixture {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/completions", listener.local_addr().unwrap());
    let requests = Arc::new(Mutex::new(Vec::new()));
    let log = requests.clone();
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut length = 0usize;
            let mut auth = None;
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 {
                    break;
                }
                let line = line.trim_end();
                if line.is_empty() {
                    break;
                }
                let lower = line.to_ascii_lowercase();
                if let Some(v) = lower.strip_prefix("content-length:") {
                    length = v.trim().parse().unwrap();
                }
                if lower.starts_with("authorization:") {
                    auth = Some(line["authorization:".len()..].trim().to_string());
                }
            }
            let mut body = vec![0; length];
            if reader.read_exact(&mut body).is_err() {
                continue;
            }
            let body: Value = serde_json::from_slice(&body).unwrap_or(Value::Null);
            let (status, text) = reply(&body);
            log.lock().unwrap().push((auth, body));
            let reason = if status == 200 { "OK" } else { "Error" };
            let _ = write!(
                stream,
                "HTTP/1.1 {status} {reason}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{text}",
                text.len()
            );
        }
    });
    Fixture { url, requests }
}

fn provider(url: &str) -> HttpProvider {
    HttpProvider::new(HttpConfig {
        url: url.into(),
        model: Some("fixture-model".into()),
        timeout_secs: 10.0,
        ..HttpConfig::default()
    })
    .unwrap()
}

fn completions(body: &Value) -> (u16, String) {
    if body.get("logprobs").is_some() {
        (200, LOGPROBS.to_string())
    } else {
        (200, TEXT.to_string())
    }
}

#[test]
fn reads_top_logprobs_and_floors_missing_tokens() {
    let f = serve(completions);
    let p = provider(&f.url);
    let watch: Vec<String> = [" Yes", "Yes", "No", " No", "yes"]
        .map(String::from)
        .to_vec();
    let r = next_token_logits(&p, "Is it so?", &watch, &ProbeIntent::Opaque, -100.0).unwrap();
    assert_eq!(r.values[..4], [-0.31, -1.6, -2.2, -2.9]);
    assert_eq!(r.floored, vec![false, false, false, false, true]);
    assert_eq!(r.values[4], -100.0);
    assert_eq!(r.response.token_count, 57);

    let reqs = f.requests.lock().unwrap();
    let (_, body) = &reqs[0];
    assert_eq!(body["prompt"], "Is it so?");
    assert_eq!(body["max_tokens"], 1);
    assert_eq!(body["logprobs"], 20);
    assert_eq!(body["temperature"], 0);
    assert_eq!(body["model"], "fixture-model");
}

#[test]
fn likelihood_probe_over_http() {
    let f = serve(completions);
    let p = provider(&f.url);
    let space = ClusterSpace::new(["Action", "Drama", "Comedy"]).unwrap();
    let mut cfg = ProbeConfig::new(Horizon::LongTerm);
    cfg.tokens = TokenSet::new([" Yes", "Yes"], [" No", "No"]).unwrap();
    let (dist, trace) =
        likelihood_probe(&p, "Time 1: rated \"Heat\" 4/5 (Action)", &space, &cfg).unwrap();
    assert_eq!(trace.calls, 3);
    assert_eq!(trace.prompt_tokens_total, 3 * 57);
    assert_eq!(trace.floored_count(), 0);
    // identical responses give a uniform distribution
    for &v in dist.probs() {
        assert!((v - 1.0 / 3.0).abs() < 1e-12);
    }
    assert_eq!(f.requests.lock().unwrap().len(), 3);
}

#[test]
fn generation_over_http() {
    let f = serve(completions);
    let p = provider(&f.url);
    let space = ClusterSpace::new(["Action", "Drama", "Comedy"]).unwrap();
    let cfg = ProbeConfig::new(Horizon::LongTerm);
    let (ranking, trace) = direct_generate_ranking(&p, "history", &space, 3, &cfg).unwrap();
    assert_eq!(ranking.order(), &[2, 0, 1]);
    assert_eq!(trace.calls, 1);
    let reqs = f.requests.lock().unwrap();
    assert!(reqs[0].1.get("logprobs").is_none());
    assert_eq!(reqs[0].1["max_tokens"], 3 * 3 + 2);
}

#[test]
fn error_statuses_and_bad_bodies() {
    let f = serve(|_| (503, "{\"error\":\"overloaded\"}".into()));
    let r = provider(&f.url).raw_logits("p", &[], &ProbeIntent::Opaque);
    assert!(
        matches!(r, Err(Error::Transport(ref m)) if m.contains("503")),
        "{r:?}"
    );

    let f = serve(|_| (200, NO_LOGPROBS.into()));
    let r = provider(&f.url).raw_logits("p", &[], &ProbeIntent::Opaque);
    assert!(matches!(r, Err(Error::MalformedResponse(_))), "{r:?}");

    let f = serve(|_| (200, "not json".into()));
    let r = provider(&f.url).generate("p", 4, &ProbeIntent::Opaque);
    assert!(matches!(r, Err(Error::MalformedResponse(_))), "{r:?}");
}

#[test]
fn bearer_token_from_environment() {
    let f = serve(completions);
    std::env::set_var("PREFPROBE_FIXTURE_KEY", "sekrit");
    let p = HttpProvider::new(HttpConfig {
        url: f.url.clone(),
        api_key_env: Some("PREFPROBE_FIXTURE_KEY".into()),
        ..HttpConfig::default()
    })
    .unwrap();
    p.raw_logits("p", &[], &ProbeIntent::Opaque).unwrap();
    assert_eq!(
        f.requests.lock().unwrap()[0].0.as_deref(),
        Some("Bearer sekrit")
    );

    let missing = HttpProvider::new(HttpConfig {
        url: f.url.clone(),
        api_key_env: Some("PREFPROBE_FIXTURE_KEY_UNSET".into()),
        ..HttpConfig::default()
    });
    assert!(matches!(missing, Err(Error::Config(_))));
}

#[test]
fn unreachable_server_is_transport_error() {
    let port = TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let p = provider(&format!("http://127.0.0.1:{port}/v1/completions"));
    assert!(matches!(
        p.raw_logits("p", &[], &ProbeIntent::Opaque),
        Err(Error::Transport(_))
    ));
}
