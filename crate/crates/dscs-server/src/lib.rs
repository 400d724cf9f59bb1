//! Storage server for the provable-storage protocols: durable per-file
//! records, the framed binary wire protocol, per-file read/write lock
//! discipline, and a TCP front end with a bounded worker pool.
//!
//! Also hosts the pluggable misbehavior layer (drop/misplace updates,
//! serve stale state, corrupt a fraction of blocks) that adversarial
//! tests and the bench harness run against.

pub mod behavior;
pub mod error;
pub mod net;
pub mod record;
pub mod service;
pub mod store;
pub mod wiremsg;

pub use behavior::{ServerBehavior, TestServerI};
pub use error::ServerError;
pub use net::{serve, ServerConfig, ServerHandle, WireClient};
pub use record::FileRecord;
pub use service::Service;
pub use store::{CrashPoint, FileStore};
pub use wiremsg::{MsgType, WireMessage};
