//! `dscs-server` — persistent storage daemon.
//!
//! Configuration comes from the environment (DSCS_ADDR, DSCS_DATA_DIR,
//! DSCS_WORKERS); see ServerConfig::from_env for defaults.

use dscs_server::{serve, ServerConfig};

fn main() {
    env_logger::init();
    let config = ServerConfig::from_env();
    match serve(config.clone()) {
        Ok(handle) => {
            log::info!("listening on {} (data in {})", handle.addr, config.data_dir.display());
            println!("dscs-server listening on {}", handle.addr);
            loop {
                std::thread::park();
            }
        }
        Err(e) => {
            eprintln!("dscs-server: {e}");
            std::process::exit(1);
        }
    }
}
