//! HTTP responder: POST `{"prompt": ...}`, expect `{"reply": ...}`.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_MAX_IN_FLIGHT: usize = 4;
pub const DEFAULT_TIMEOUT_S: f64 = 30.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RemoteError {
    #[error("request to {0} timed out")]
    Timeout(String),
    #[error("{url} answered with status {status}")]
    Status { url: String, status: u16 },
    #[error("malformed reply body: {0}")]
    Malformed(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("invalid timeout {0}")]
    InvalidTimeout(f64),
}

#[derive(Serialize)]
struct PromptBody<'a> {
    prompt: &'a str,
}

#[derive(Deserialize)]
struct ReplyBody {
    reply: String,
}

pub fn remote_propose(endpoint_url: &str, prompt_text: &str, timeout_s: f64) -> Result<String, RemoteError> {
    if !(timeout_s.is_finite() && timeout_s > 0.0) {
        return Err(RemoteError::InvalidTimeout(timeout_s));
    }
    let client = reqwest::blocking::Client::builder()
        .timeout(Duration::from_secs_f64(timeout_s))
        .build()
        .map_err(|e| RemoteError::Transport(e.to_string()))?;
    let response = client
        .post(endpoint_url)
        .json(&PromptBody { prompt: prompt_text })
        .send()
        .map_err(|e| classify(endpoint_url, e))?;
    let status = response.status();
    if !status.is_success() {
        return Err(RemoteError::Status {
            url: endpoint_url.to_string(),
            status: status.as_u16(),
        });
    }
    let body = response.text().map_err(|e| classify(endpoint_url, e))?;
    serde_json::from_str::<ReplyBody>(&body)
        .map(|r| r.reply)
        .map_err(|e| RemoteError::Malformed(e.to_string()))
}

fn classify(url: &str, e: reqwest::Error) -> RemoteError {
    if e.is_timeout() {
        RemoteError::Timeout(url.to_string())
    } else {
        RemoteError::Transport(e.to_string())
    }
}

/// Runs `remote_propose` for every `(endpoint, prompt)` pair with at most
/// `max_in_flight` concurrent requests. Results come back in input order.
pub fn remote_propose_batch(
    requests: &[(String, String)],
    max_in_flight: usize,
    timeout_s: f64,
) -> Vec<Result<String, RemoteError>> {
    let slots: Vec<Mutex<Option<Result<String, RemoteError>>>> =
        requests.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = max_in_flight.max(1).min(requests.len());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some((url, prompt)) = requests.get(i) else { break };
                let r = remote_propose(url, prompt, timeout_s);
                *slots[i].lock().unwrap() = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|s| s.into_inner().unwrap().expect("every request ran"))
        .collect()
}


#[cfg(test)]
mod tests {
    use super::stub::serve;
    use super::*;
    use std::sync::atomic::Ordering;

    #[test]
    fn healthy_stub_round_trip() {
        let (url, _) = serve(200, r#"{"reply":"POWERS: 1,2\nDEFENSE: 50%"}"#.into(), 0);
        let reply = remote_propose(&url, "hello", 5.0).unwrap();
        assert_eq!(reply, "POWERS: 1,2\nDEFENSE: 50%");
    }

    #[test]
    fn non_success_status() {
        let (url, _) = serve(503, "{}".into(), 0);
        assert!(matches!(remote_propose(&url, "x", 5.0), Err(RemoteError::Status { status: 503, .. })));
    }

    #[test]
    fn malformed_body() {
        let (url, _) = serve(200, r#"{"text":"nope"}"#.into(), 0);
        assert!(matches!(remote_propose(&url, "x", 5.0), Err(RemoteError::Malformed(_))));
    }

    #[test]
    fn timeout_is_reported() {
        let (url, _) = serve(200, r#"{"reply":"late"}"#.into(), 1500);
        assert!(matches!(remote_propose(&url, "x", 0.2), Err(RemoteError::Timeout(_))));
    }

    #[test]
    fn unreachable_endpoint() {
        let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
        let url = format!("http://127.0.0.1:{port}/");
        assert!(matches!(remote_propose(&url, "x", 2.0), Err(RemoteError::Transport(_))));
        assert_eq!(remote_propose(&url, "x", 0.0), Err(RemoteError::InvalidTimeout(0.0)));
    }

    #[test]
    fn batch_respects_in_flight_limit_and_order() {
        let (url, peak) = serve(200, r#"{"reply":"ok"}"#.into(), 100);
        let requests: Vec<(String, String)> = (0..10).map(|i| (url.clone(), format!("p{i}"))).collect();
        let out = remote_propose_batch(&requests, 3, 5.0);
        assert_eq!(out.len(), 10);
        assert!(out.iter().all(|r| r.as_deref() == Ok("ok")));
        let peak = peak.load(Ordering::SeqCst);
        assert!((1..=3).contains(&peak), "peak {peak}");
    }
}
