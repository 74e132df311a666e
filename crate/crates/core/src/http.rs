//! Minimal JSON key-value facade over a [`CacheManager`].
//!
//! Requests are handled one at a time on a single thread that owns the
//! manager, so an HTTP-driven run takes exactly the in-process code path.
//!
//! - `GET /kv/{key}`: read through the cache; `{"key", "values", "hit"}`
//! - `PUT /kv/{key}` with `{"values": [[field, value], ...]}`: write
//! - `DELETE /kv/{key}`: invalidate the cached copy
//! - `GET /stats`: live metrics
//! - `GET /ledger`: every closed metrics window

use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;
use tiny_http::{Header, Method, Response, Server};

use crate::cache::ResultSet;
use crate::error::{Error, Result};
use crate::manager::CacheManager;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PutBody {
    pub values: ResultSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GetBody {
    pub key: String,
    pub values: ResultSet,
    pub hit: bool,
}

/// Status code and JSON body for one request.
pub fn route(manager: &mut CacheManager, method: &Method, url: &str, body: &[u8]) -> (u16, serde_json::Value) {
    match handle(manager, method, url, body) {
        Ok(ok) => ok,
        Err(e) => {
            let status = match e {
                Error::NotFound(_) => 404,
                Error::InvalidArgument(_) | Error::Json(_) => 400,
                _ => 500,
            };
            (status, json!({ "error": e.to_string() }))
        }
    }
}

fn handle(manager: &mut CacheManager, method: &Method, url: &str, body: &[u8]) -> Result<(u16, serde_json::Value)> {
    let path = url.split('?').next().unwrap_or("");
    if let Some(key) = path.strip_prefix("/kv/") {
        if key.is_empty() || key.contains('/') {
            return Err(Error::InvalidArgument(format!("bad key in {path:?}")));
        }
        return match method {
            Method::Get => {
                let r = manager.read(key)?;
                let body = GetBody {
                    key: key.to_owned(),
                    values: r.values,
                    hit: r.hit,
                };
                Ok((200, serde_json::to_value(body)?))
            }
            Method::Put => {
                let parsed: PutBody = serde_json::from_slice(body)?;
                manager.write(key, parsed.values)?;
                Ok((200, json!({ "key": key })))
            }
            Method::Delete => {
                manager.delete(key)?;
                Ok((200, json!({ "key": key })))
            }
            _ => Ok((405, json!({ "error": "method not allowed" }))),
        };
    }
    match (method, path) {
        (Method::Get, "/stats") => Ok((200, serde_json::to_value(manager.live_stats())?)),
        (Method::Get, "/ledger") => Ok((200, serde_json::to_value(manager.ledger().windows())?)),
        _ => Ok((404, json!({ "error": format!("no route for {path}") }))),
    }
}

fn serve_one(manager: &mut CacheManager, mut request: tiny_http::Request) {
    let mut body = Vec::new();
    let (status, value) = match request.as_reader().read_to_end(&mut body) {
        Ok(_) => route(manager, &request.method().clone(), &request.url().to_owned(), &body),
        Err(e) => (400, json!({ "error": e.to_string() })),
    };
    let header = Header::from_bytes("Content-Type", "application/json").expect("static header");
    let response = Response::from_string(value.to_string())
        .with_status_code(status)
        .with_header(header);
    // The client may have gone away; nothing useful to do about it.
    let _ = request.respond(response);
}

/// A facade running on a background thread.
pub struct HttpHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    thread: JoinHandle<CacheManager>,
}

impl HttpHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Stops accepting requests and hands the manager back.
    pub fn stop(self) -> CacheManager {
        self.stop.store(true, Ordering::SeqCst);
        self.thread.join().expect("server thread panicked")
    }
}

fn bind(addr: &str) -> Result<Server> {
    Server::http(addr).map_err(|e| Error::InvalidArgument(format!("cannot bind {addr}: {e}")))
}

/// Serves on `addr` (port 0 picks a free one) until [`HttpHandle::stop`].
pub fn spawn(mut manager: CacheManager, addr: &str) -> Result<HttpHandle> {
    let server = bind(addr)?;
    let addr = server
        .server_addr()
        .to_ip()
        .ok_or_else(|| Error::InvalidArgument("not an IP listener".into()))?;
    let stop = Arc::new(AtomicBool::new(false));
    let flag = Arc::clone(&stop);
    let thread = std::thread::spawn(move || {
        while !flag.load(Ordering::SeqCst) {
            if let Ok(Some(request)) = server.recv_timeout(Duration::from_millis(50)) {
                serve_one(&mut manager, request);
            }
        }
        manager
    });
    Ok(HttpHandle { addr, stop, thread })
}

/// Serves on the calling thread forever.
pub fn serve(mut manager: CacheManager, addr: &str) -> Result<()> {
    let server = bind(addr)?;
    for request in server.incoming_requests() {
        serve_one(&mut manager, request);
    }
    Ok(())
}
