//! A local HTTP server that plays back canned chat-completion replies.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

#[derive(Clone)]
pub struct Reply {
    pub status: u16,
    pub body: String,
    pub delay: Duration,
    pub retry_after: Option<u64>,
}

pub fn ok(text: &str) -> Reply {
    let body = serde_json::json!({
        "choices": [{"message": {"role": "assistant", "content": text}}],
        "usage": {"prompt_tokens": 11, "completion_tokens": 2}
    });
    Reply { status: 200, body: body.to_string(), delay: Duration::ZERO, retry_after: None }
}

pub fn status(code: u16) -> Reply {
    Reply { status: code, body: "{\"error\":\"busy\"}".into(), delay: Duration::ZERO, retry_after: None }
}

#[derive(Debug, Clone)]
pub struct Seen {
    pub at: Instant,
    pub headers: Vec<String>,
    pub body: Vec<u8>,
}

/// Serves the scripted replies in order (repeating the last one) and
/// records every request it receives.
pub struct Stub {
    pub url: String,
    pub seen: Arc<Mutex<Vec<Seen>>>,
}

pub fn stub(replies: Vec<Reply>) -> Stub {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = seen.clone();
    std::thread::spawn(move || {
        for (i, stream) in listener.incoming().enumerate() {
            let Ok(mut stream) = stream else { return };
            let at = Instant::now();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut headers = Vec::new();
            let mut len = 0usize;
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 {
                    break;
                }
                let line = line.trim_end().to_string();
                if line.is_empty() {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                headers.push(line);
            }
            let mut body = vec![0; len];
            reader.read_exact(&mut body).unwrap();
            log.lock().unwrap().push(Seen { at, headers, body });
            let reply = replies[i.min(replies.len() - 1)].clone();
            std::thread::sleep(reply.delay);
            let extra = reply.retry_after.map_or(String::new(), |s| format!("Retry-After: {s}\r\n"));
            let _ = write!(
                stream,
                "HTTP/1.1 {} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\n{extra}Connection: close\r\n\r\n{}",
                reply.status,
                reply.body.len(),
                reply.body
            );
        }
    });
    Stub { url, seen }
}
