//! TCP front end: a listener thread feeding a bounded pool of worker
//! threads, each running a frame loop per connection. Malformed frames
//! get an error reply and the connection stays open; a failed read
//! closes it.

use std::io::Write;
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{sync_channel, Receiver, SyncSender};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use crate::error::{Result, ServerError};
use crate::service::Service;
use crate::store::FileStore;
use crate::wiremsg::WireMessage;

#[derive(Debug, Clone)]
pub struct ServerConfig {
    /// Listen address, e.g. "127.0.0.1:7700"; port 0 picks a free one.
    pub addr: String,
    pub data_dir: PathBuf,
    pub workers: usize,
}

impl ServerConfig {
    /// Environment overrides: DSCS_ADDR, DSCS_DATA_DIR, DSCS_WORKERS.
    /// Explicit configuration wins over the environment, which wins
    /// over the defaults (127.0.0.1:0, ./dscs-data, 4 workers).
    pub fn from_env() -> Self {
        ServerConfig {
            addr: std::env::var("DSCS_ADDR").unwrap_or_else(|_| "127.0.0.1:0".into()),
            data_dir: std::env::var("DSCS_DATA_DIR")
                .map(PathBuf::from)
                .unwrap_or_else(|_| PathBuf::from("dscs-data")),
            workers: std::env::var("DSCS_WORKERS")
                .ok()
                .and_then(|w| w.parse().ok())
                .unwrap_or(4),
        }
    }
}

pub struct ServerHandle {
    pub addr: SocketAddr,
    stop: Arc<AtomicBool>,
    accept_thread: Option<JoinHandle<()>>,
    workers: Vec<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn shutdown(mut self) {
        self.stop_inner();
    }

    fn stop_inner(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // Unblock accept() with a throwaway connection.
        let _ = TcpStream::connect(self.addr);
        if let Some(t) = self.accept_thread.take() {
            let _ = t.join();
        }
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        if !self.stop.load(Ordering::SeqCst) {
            self.stop_inner();
        }
    }
}

pub fn serve(config: ServerConfig) -> Result<ServerHandle> {
    let listener = TcpListener::bind(&config.addr)?;
    let addr = listener.local_addr()?;
    let service = Arc::new(Service::new(FileStore::open(&config.data_dir)?));
    let stop = Arc::new(AtomicBool::new(false));
    let workers = config.workers.max(1);
    let (tx, rx): (SyncSender<TcpStream>, Receiver<TcpStream>) = sync_channel(workers * 2);
    let rx = Arc::new(Mutex::new(rx));

    let worker_threads = (0..workers)
        .map(|_| {
            let rx = rx.clone();
            let service = service.clone();
            let stop = stop.clone();
            std::thread::spawn(move || loop {
                let conn = rx.lock().expect("worker queue poisoned").recv();
                match conn {
                    Ok(stream) => serve_connection(stream, &service, &stop),
                    Err(_) => break, // sender gone: shutting down
                }
            })
        })
        .collect();

    let accept_stop = stop.clone();
    let accept_thread = std::thread::spawn(move || {
        for stream in listener.incoming() {
            if accept_stop.load(Ordering::SeqCst) {
                break;
            }
            if let Ok(stream) = stream {
                // Blocks when all workers are busy and the queue is
                // full: natural backpressure.
                if tx.send(stream).is_err() {
                    break;
                }
            }
        }
        drop(tx);
    });

    Ok(ServerHandle {
        addr,
        stop,
        accept_thread: Some(accept_thread),
        workers: worker_threads,
    })
}

fn serve_connection(mut stream: TcpStream, service: &Service, stop: &AtomicBool) {
    loop {
        // Poll for the next frame so a shutdown can reclaim the worker
        // even while the peer keeps the connection open but idle.
        let _ = stream.set_read_timeout(Some(std::time::Duration::from_millis(50)));
        let mut probe = [0u8; 1];
        match stream.peek(&mut probe) {
            Ok(0) => return, // clean EOF
            Ok(_) => {}
            Err(e)
                if matches!(
                    e.kind(),
                    std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut
                ) =>
            {
                if stop.load(Ordering::SeqCst) {
                    return;
                }
                continue;
            }
            Err(_) => return,
        }
        // A frame has started; block until it is fully read.
        let _ = stream.set_read_timeout(None);
        match WireMessage::read_from(&mut stream) {
            Ok(Some(msg)) => {
                let reply = service.handle(&msg);
                if reply.write_to(&mut stream).is_err() {
                    return;
                }
            }
            Ok(None) => return, // clean EOF
            Err(e) => {
                // Framing failure: report and keep listening unless the
                // transport itself broke.
                let fatal = matches!(e, ServerError::Io(_));
                let _ = WireMessage::from_server_error(&e).write_to(&mut stream);
                let _ = stream.flush();
                if fatal {
                    return;
                }
            }
        }
    }
}

/// Blocking request/reply client over one connection.
pub struct WireClient {
    stream: TcpStream,
}

impl WireClient {
    pub fn connect(addr: &str) -> Result<Self> {
        Ok(WireClient {
            stream: TcpStream::connect(addr)?,
        })
    }

    pub fn request(&mut self, msg: &WireMessage) -> Result<WireMessage> {
        msg.write_to(&mut self.stream)?;
        WireMessage::read_from(&mut self.stream)?
            .ok_or_else(|| ServerError::Malformed("server closed the connection".into()))
    }

    /// Request and unwrap: error frames become Err with the remote
    /// code folded into the message.
    pub fn request_ok(&mut self, msg: &WireMessage) -> Result<Vec<u8>> {
        let reply = self.request(msg)?;
        if let Some((code, detail)) = reply.as_error() {
            return Err(ServerError::Malformed(format!(
                "server error {code}: {detail}"
            )));
        }
        Ok(reply.payload)
    }
}
