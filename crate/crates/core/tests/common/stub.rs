//! A one-shot HTTP server speaking just enough HTTP/1.1 for the chat clients,
//! and a shell stand-in for the frame decoder.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};

use serde_json::{json, Value};

#[derive(Debug, Clone)]
pub struct Captured {
    pub method: String,
    pub path: String,
    pub headers: Vec<(String, String)>,
    pub body: Value,
}

impl Captured {
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }
}

pub struct StubServer {
    pub url: String,
    pub requests: Arc<Mutex<Vec<Captured>>>,
    handle: Option<JoinHandle<()>>,
}

impl StubServer {
    /// Serve `responses` in order, one per connection, then stop listening.
    pub fn spawn(responses: Vec<(u16, String)>) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind");
        let url = format!("http://{}", listener.local_addr().unwrap());
        let requests = Arc::new(Mutex::new(Vec::new()));
        let seen = Arc::clone(&requests);
        let handle = thread::spawn(move || {
            for (status, reply_body) in responses {
                let Ok((stream, _)) = listener.accept() else {
                    return;
                };
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let mut parts = line.split_whitespace();
                let method = parts.next().unwrap_or_default().to_owned();
                let path = parts.next().unwrap_or_default().to_owned();
                let mut headers = Vec::new();
                loop {
                    let mut h = String::new();
                    reader.read_line(&mut h).unwrap();
                    let h = h.trim_end();
                    if h.is_empty() {
                        break;
                    }
                    if let Some((k, v)) = h.split_once(':') {
                        headers.push((k.trim().to_owned(), v.trim().to_owned()));
                    }
                }
                let len: usize = headers
                    .iter()
                    .find(|(k, _)| k.eq_ignore_ascii_case("content-length"))
                    .and_then(|(_, v)| v.parse().ok())
                    .unwrap_or(0);
                let mut raw = vec![0; len];
                reader.read_exact(&mut raw).unwrap();
                let body = serde_json::from_slice(&raw).unwrap_or(Value::Null);
                seen.lock().unwrap().push(Captured {
                    method,
                    path,
                    headers,
                    body,
                });
                let mut stream = stream;
                let reply = format!(
                    "HTTP/1.1 {status} Stub\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply_body}",
                    reply_body.len()
                );
                let _ = stream.write_all(reply.as_bytes());
            }
        });
        StubServer {
            url,
            requests,
            handle: Some(handle),
        }
    }

    pub fn requests(&self) -> Vec<Captured> {
        self.requests.lock().unwrap().clone()
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        // The thread exits once its scripted responses are used up; a test
        // that sent fewer requests leaves it blocked in accept, so detach.
        if let Some(h) = self.handle.take() {
            if h.is_finished() {
                let _ = h.join();
            }
        }
    }
}

pub fn chat_reply(content: &str) -> String {
    json!({"choices": [{"index": 0, "message": {"role": "assistant", "content": content}}]})
        .to_string()
}

/// Writes an executable that mimics the decoder: it emits `-frames:v` PPM
/// frames of `width`x`height` next to the output pattern and logs its argv.
pub fn stub_decoder(dir: &Path, width: u32, height: u32) -> PathBuf {
    let path = dir.join("fake-ffmpeg");
    let log = dir.join("decoder-args.txt");
    let script = format!(
        r#"#!/bin/sh
echo "$@" >> '{log}'
n=1
out=""
while [ $# -gt 0 ]; do
  if [ "$1" = "-frames:v" ]; then n="$2"; fi
  out="$1"
  shift
done
d=$(dirname "$out")
i=1
while [ "$i" -le "$n" ]; do
  f=$(printf '%s/frame_%06d.ppm' "$d" "$i")
  printf 'P6\n{width} {height}\n255\n' > "$f"
  head -c {bytes} /dev/zero >> "$f"
  i=$((i+1))
done
"#,
        log = log.display(),
        bytes = width * height * 3,
    );
    std::fs::write(&path, script).unwrap();
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        std::fs::set_permissions(&path, std::fs::Permissions::from_mode(0o755)).unwrap();
    }
    path
}
