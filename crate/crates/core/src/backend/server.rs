use std::io;
use std::net::SocketAddr;
use std::sync::Arc;
use std::thread::JoinHandle;

use tiny_http::{Header, Method, Response, Server};

use super::wire::{self, HEALTH_PATH};
use super::{Backend, BackendError};

/// Routes one HTTP exchange. Returns the status code and JSON body.
pub fn handle_http(backend: &dyn Backend, method: &str, path: &str, body: &str) -> (u16, String) {
    let bare = path.split('?').next().unwrap_or(path).trim_end_matches('/');
    if bare == HEALTH_PATH {
        return (200, wire::health_ok());
    }
    let Some(op) = wire::op_for_path(path) else {
        return wire::encode_error(&BackendError::InvalidRequest(format!("no route for {path}")))
            .with_status(404);
    };
    if !method.eq_ignore_ascii_case("POST") {
        return wire::encode_error(&BackendError::InvalidRequest(format!(
            "{path} expects POST, got {method}"
        )))
        .with_status(405);
    }
    match wire::decode_request(op, body) {
        Ok(req) => wire::encode_response(&backend.call(&req)),
        Err(e) => wire::encode_error(&e),
    }
}

trait WithStatus {
    fn with_status(self, status: u16) -> Self;
}

impl WithStatus for (u16, String) {
    fn with_status(self, status: u16) -> Self {
        (status, self.1)
    }
}

/// A running HTTP front end for a backend. Stops when dropped.
pub struct ServerHandle {
    addr: SocketAddr,
    server: Arc<Server>,
    workers: Vec<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Blocks until every worker has exited (after [`ServerHandle::shutdown`]
    /// from another thread, or forever).
    pub fn join(mut self) {
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }

    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        for _ in &self.workers {
            self.server.unblock();
        }
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.stop();
    }
}

fn json_header() -> Header {
    Header::from_bytes(&b"Content-Type"[..], &b"application/json"[..]).expect("static header")
}

fn worker(server: Arc<Server>, backend: Arc<dyn Backend>) {
    loop {
        let mut request = match server.recv() {
            Ok(r) => r,
            Err(_) => break,
        };
        let mut body = String::new();
        let (status, text) = match request.as_reader().read_to_string(&mut body) {
            Ok(_) => {
                let method = match request.method() {
                    Method::Post => "POST",
                    Method::Get => "GET",
                    _ => "OTHER",
                };
                handle_http(backend.as_ref(), method, request.url(), &body)
            }
            Err(e) => wire::encode_error(&BackendError::InvalidRequest(format!(
                "unreadable body: {e}"
            ))),
        };
        let response = Response::from_string(text)
            .with_status_code(status)
            .with_header(json_header());
        if let Err(e) = request.respond(response) {
            log::warn!("failed to send response: {e}");
        }
    }
}

/// Serves `backend` on `addr` (for example `127.0.0.1:0`) with `workers`
/// threads.
pub fn serve(backend: Arc<dyn Backend>, addr: &str, workers: usize) -> io::Result<ServerHandle> {
    let server = Server::http(addr).map_err(|e| io::Error::other(e.to_string()))?;
    let local = server
        .server_addr()
        .to_ip()
        .ok_or_else(|| io::Error::other("server is not listening on an IP socket"))?;
    let server = Arc::new(server);
    let workers = (0..workers.max(1))
        .map(|_| {
            let server = Arc::clone(&server);
            let backend = Arc::clone(&backend);
            std::thread::spawn(move || worker(server, backend))
        })
        .collect();
    Ok(ServerHandle {
        addr: local,
        server,
        workers,
    })
}
