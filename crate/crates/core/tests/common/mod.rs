//! Helpers shared by the integration tests: brute-force oracles written
//! independently of the library, and a scripted HTTP server standing in for
//! esearch.

#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use branchsearch_core::{IncidenceIndex, TermId};

/// H(p) evaluated directly, with 0·log 0 = 0.
pub fn entropy_oracle(p: f64) -> f64 {
    let term = |x: f64| if x <= 0.0 { 0.0 } else { -x * x.log2() };
    term(p) + term(1.0 - p)
}

/// Information gain of splitting `docs` on `term` when every document is
/// its own class: H(parent) − Σ (n_c/n) H(child), with H(m docs) = log2 m.
pub fn ig_oracle(index: &IncidenceIndex, docs: &[u32], term: usize) -> f64 {
    let posting = &index.all_postings()[term];
    let mut yes = 0usize;
    let mut no = 0usize;
    for &d in docs {
        if posting.contains(d as usize) {
            yes += 1;
        } else {
            no += 1;
        }
    }
    let n = docs.len() as f64;
    let child = |c: usize| if c == 0 { 0.0 } else { (c as f64 / n) * (c as f64).log2() };
    n.log2() - child(yes) - child(no)
}

/// Count of documents containing `term` among `docs`.
pub fn yes_count(index: &IncidenceIndex, docs: &[u32], term: usize) -> usize {
    let posting = &index.all_postings()[term];
    docs.iter().filter(|&&d| posting.contains(d as usize)).count()
}

/// The term a node should ask, found by scanning every candidate:
/// plain IG up to `scale_after`, local minus corpus entropy after that,
/// strictly positive scores only, ties (within 1e-12) to the smallest name
/// then id.
pub fn argmax_oracle(
    index: &IncidenceIndex,
    docs: &[u32],
    depth: u32,
    used: &[usize],
    scale_after: u32,
) -> Option<usize> {
    let n = docs.len();
    let n_all = index.n_docs() as f64;
    let mut scored: Vec<(f64, usize)> = Vec::new();
    for t in 0..index.n_terms() {
        if used.contains(&t) {
            continue;
        }
        let k = yes_count(index, docs, t);
        if k == 0 || k == n {
            continue;
        }
        let local = entropy_oracle(k as f64 / n as f64);
        let score = if depth <= scale_after {
            local
        } else {
            let df = index.all_postings()[t].iter().count() as f64;
            local - entropy_oracle(df / n_all)
        };
        if score > 1e-12 {
            scored.push((score, t));
        }
    }
    let best = scored.iter().map(|s| s.0).fold(f64::NEG_INFINITY, f64::max);
    scored
        .into_iter()
        .filter(|(s, _)| best - s <= 1e-12)
        .map(|(_, t)| t)
        .min_by(|&a, &b| index.terms()[a].cmp(&index.terms()[b]).then(a.cmp(&b)))
}

pub fn term_index(t: TermId) -> usize {
    t.0 as usize
}

#[derive(Debug, Clone)]
pub struct Reply {
    pub status: u16,
    pub body: String,
    pub delay: Duration,
}

impl Reply {
    pub fn ok(ids: &[&str]) -> Self {
        let list = ids.iter().map(|i| format!("\"{i}\"")).collect::<Vec<_>>().join(",");
        Reply {
            status: 200,
            body: format!(
                r#"{{"header":{{"type":"esearch"}},"esearchresult":{{"count":"{}","idlist":[{list}]}}}}"#,
                ids.len()
            ),
            delay: Duration::ZERO,
        }
    }

    pub fn status(status: u16, body: &str) -> Self {
        Reply { status, body: body.to_string(), delay: Duration::ZERO }
    }

    pub fn delayed(mut self, delay: Duration) -> Self {
        self.delay = delay;
        self
    }
}

#[derive(Debug, Clone)]
pub struct Received {
    pub at: Instant,
    pub method: String,
    pub path: String,
    pub body: String,
}

impl Received {
    /// Decoded value of one form field.
    pub fn form(&self, key: &str) -> Option<String> {
        self.body.split('&').find_map(|pair| {
            let (k, v) = pair.split_once('=')?;
            (k == key).then(|| decode_form(v))
        })
    }
}

fn decode_form(v: &str) -> String {
    let bytes = v.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'+' => out.push(b' '),
            b'%' if i + 2 < bytes.len() => {
                let hex = std::str::from_utf8(&bytes[i + 1..i + 3]).unwrap();
                out.push(u8::from_str_radix(hex, 16).unwrap());
                i += 2;
            }
            b => out.push(b),
        }
        i += 1;
    }
    String::from_utf8(out).unwrap()
}

/// Answers each connection with the next scripted reply; the last reply
/// repeats once the script runs out.
pub struct MockServer {
    pub base_url: String,
    received: Arc<Mutex<Vec<Received>>>,
}

impl MockServer {
    pub fn start(script: Vec<Reply>) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let base_url = format!("http://{}", listener.local_addr().unwrap());
        let received = Arc::new(Mutex::new(Vec::new()));
        let log = received.clone();
        thread::spawn(move || {
            let mut served = 0usize;
            for stream in listener.incoming() {
                let Ok(stream) = stream else { continue };
                let reply = script[served.min(script.len() - 1)].clone();
                served += 1;
                let log = log.clone();
                thread::spawn(move || serve(stream, reply, log));
            }
        });
        MockServer { base_url, received }
    }

    pub fn requests(&self) -> Vec<Received> {
        self.received.lock().unwrap().clone()
    }
}

fn serve(stream: TcpStream, reply: Reply, log: Arc<Mutex<Vec<Received>>>) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut request_line = String::new();
    if reader.read_line(&mut request_line).unwrap_or(0) == 0 {
        return;
    }
    let at = Instant::now();
    let mut length = 0usize;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
            break;
        }
        if let Some((k, v)) = line.split_once(':') {
            if k.eq_ignore_ascii_case("content-length") {
                length = v.trim().parse().unwrap_or(0);
            }
        }
    }
    let mut body = vec![0u8; length];
    let _ = reader.read_exact(&mut body);
    let mut parts = request_line.split_whitespace();
    log.lock().unwrap().push(Received {
        at,
        method: parts.next().unwrap_or_default().to_string(),
        path: parts.next().unwrap_or_default().to_string(),
        body: String::from_utf8_lossy(&body).into_owned(),
    });
    thread::sleep(reply.delay);
    let mut out = stream;
    let _ = write!(
        out,
        "HTTP/1.1 {} Mock\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
        reply.status,
        reply.body.len(),
        reply.body
    );
    let _ = out.flush();
}

/// Largest number of requests inside any window of length `window`.
pub fn max_in_window(times: &[Instant], window: Duration) -> usize {
    let mut times = times.to_vec();
    times.sort();
    (0..times.len())
        .map(|i| times[i..].iter().take_while(|&&t| t.duration_since(times[i]) < window).count())
        .max()
        .unwrap_or(0)
}
