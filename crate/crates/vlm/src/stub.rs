//! Minimal HTTP/1.1 chat-completions stand-in for tests and offline demos.

use std::io::{self, BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use serde_json::json;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StubReply {
    /// 200 with a completions body whose content is this text.
    Text(String),
    /// Any status with a verbatim body.
    Status(u16, String),
    /// Close the connection after reading the request, never answering.
    Hangup,
}

impl StubReply {
    pub fn text(s: impl Into<String>) -> Self {
        StubReply::Text(s.into())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StubRequest {
    pub method: String,
    pub path: String,
    pub headers: Vec<(String, String)>,
    pub body: String,
}

type Handler = dyn Fn(&StubRequest) -> StubReply + Send + Sync;

pub struct StubServer {
    addr: SocketAddr,
    hits: Arc<AtomicUsize>,
    requests: Arc<Mutex<Vec<StubRequest>>>,
    stop: Arc<AtomicBool>,
    worker: Option<JoinHandle<()>>,
}

fn read_request(stream: &mut TcpStream) -> io::Result<StubRequest> {
    let mut reader = BufReader::new(stream);
    let mut line = String::new();
    reader.read_line(&mut line)?;
    let mut parts = line.split_whitespace();
    let method = parts.next().unwrap_or_default().to_string();
    let path = parts.next().unwrap_or_default().to_string();
    let mut headers = Vec::new();
    let mut length = 0usize;
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            break;
        }
        let l = line.trim_end();
        if l.is_empty() {
            break;
        }
        if let Some((k, v)) = l.split_once(':') {
            let (k, v) = (k.trim().to_string(), v.trim().to_string());
            if k.eq_ignore_ascii_case("content-length") {
                length = v.parse().unwrap_or(0);
            }
            headers.push((k, v));
        }
    }
    let mut body = vec![0u8; length];
    reader.read_exact(&mut body)?;
    Ok(StubRequest { method, path, headers, body: String::from_utf8_lossy(&body).into_owned() })
}

fn respond(stream: &mut TcpStream, status: u16, body: &str) -> io::Result<()> {
    let head = format!(
        "HTTP/1.1 {status} Stub\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
        body.len()
    );
    stream.write_all(head.as_bytes())?;
    stream.write_all(body.as_bytes())?;
    stream.flush()
}

impl StubServer {
    /// Answers every request with `reply`.
    pub fn start(reply: StubReply) -> io::Result<Self> {
        Self::with_handler(move |_| reply.clone())
    }

    pub fn with_handler(handler: impl Fn(&StubRequest) -> StubReply + Send + Sync + 'static) -> io::Result<Self> {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?;
        let hits = Arc::new(AtomicUsize::new(0));
        let requests = Arc::new(Mutex::new(Vec::new()));
        let stop = Arc::new(AtomicBool::new(false));
        let handler: Box<Handler> = Box::new(handler);
        let worker = {
            let (hits, requests, stop) = (hits.clone(), requests.clone(), stop.clone());
            std::thread::spawn(move || {
                for conn in listener.incoming() {
                    if stop.load(Ordering::SeqCst) {
                        break;
                    }
                    let Ok(mut stream) = conn else { continue };
                    let Ok(req) = read_request(&mut stream) else { continue };
                    hits.fetch_add(1, Ordering::SeqCst);
                    let reply = handler(&req);
                    requests.lock().expect("stub log poisoned").push(req);
                    let _ = match reply {
                        StubReply::Text(t) => {
                            let body = json!({"choices": [{"index": 0, "message": {"role": "assistant", "content": t}}]});
                            respond(&mut stream, 200, &body.to_string())
                        }
                        StubReply::Status(code, body) => respond(&mut stream, code, &body),
                        StubReply::Hangup => Ok(()),
                    };
                }
            })
        };
        Ok(Self { addr, hits, requests, stop, worker: Some(worker) })
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Requests received so far.
    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }

    pub fn requests(&self) -> Vec<StubRequest> {
        self.requests.lock().expect("stub log poisoned").clone()
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(self.addr);
        if let Some(w) = self.worker.take() {
            let _ = w.join();
        }
    }
}
