//! `dscs` — client and auditor for the DSCS storage protocols.
//!
//! Exit codes: 0 success, 1 verification failure, 2 transport or usage
//! error. Flags override environment variables (DSCS_SERVER,
//! DSCS_KEY_FILE, DSCS_FID, DSCS_PROTOCOL, DSCS_PROFILE), which
//! override built-in defaults.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dscs_cli::bench::{render_csv, render_json, render_table, run_bench, BenchConfig};
use dscs_cli::keyfile::{self, KeyFile};
use dscs_cli::ops;
use dscs_cli::{CliError, Protocol};
use dscs_core::dscs1::{keygen, outsource};
use dscs_core::dscs2::{keygen2, outsource2};
use dscs_core::skiplist::UpdateType;
use dscs_core::SecurityProfile;
use dscs_server::WireClient;
use rand::rngs::OsRng;

type Result<T> = std::result::Result<T, CliError>;

#[derive(Parser)]
#[command(name = "dscs", version, about = "DSCS storage client and auditor")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Remote {
    /// Server address host:port.
    #[arg(long, env = "DSCS_SERVER", default_value = "127.0.0.1:7700")]
    server: String,
    /// Client key file.
    #[arg(long, env = "DSCS_KEY_FILE")]
    key_file: PathBuf,
    /// File identifier on the server.
    #[arg(long, env = "DSCS_FID")]
    fid: String,
}

#[derive(Subcommand)]
enum Cmd {
    /// Create a fresh client key file.
    Keygen {
        #[arg(long, env = "DSCS_PROTOCOL", default_value = "dscs1")]
        protocol: String,
        #[arg(long, env = "DSCS_PROFILE", default_value = "test")]
        profile: String,
        /// Segments per block (n).
        #[arg(long, default_value_t = 16)]
        segments: usize,
        /// Initial block capacity (DSCS I only; outsourcing re-sizes).
        #[arg(long, default_value_t = 1)]
        blocks: usize,
        #[arg(long, env = "DSCS_KEY_FILE")]
        key_file: PathBuf,
    },
    /// Upload a file under the given fid.
    Outsource {
        #[command(flatten)]
        remote: Remote,
        /// Plaintext to store.
        #[arg(long)]
        file: PathBuf,
    },
    /// Authenticated read of one block.
    Read {
        #[command(flatten)]
        remote: Remote,
        #[arg(long)]
        index: usize,
        /// Write the verified block bytes here instead of summarizing.
        #[arg(long)]
        out_file: Option<PathBuf>,
    },
    /// Insert a block at an index (DSCS I).
    Insert {
        #[command(flatten)]
        remote: Remote,
        #[arg(long)]
        index: usize,
        #[arg(long)]
        data_file: PathBuf,
    },
    /// Replace the block at an index (DSCS I).
    Modify {
        #[command(flatten)]
        remote: Remote,
        #[arg(long)]
        index: usize,
        #[arg(long)]
        data_file: PathBuf,
    },
    /// Delete the block at an index (DSCS I).
    Delete {
        #[command(flatten)]
        remote: Remote,
        #[arg(long)]
        index: usize,
    },
    /// Append a block at the end (DSCS II).
    Append {
        #[command(flatten)]
        remote: Remote,
        #[arg(long)]
        data_file: PathBuf,
    },
    /// Spot-check the server with a random challenge.
    Audit {
        #[command(flatten)]
        remote: Remote,
        /// Challenge cardinality.
        #[arg(long, default_value_t = 10)]
        l: usize,
    },
    /// Run the benchmark / Monte-Carlo harness (in-process server).
    Bench {
        #[arg(long, env = "DSCS_PROTOCOL", default_value = "dscs1")]
        protocol: String,
        #[arg(long, env = "DSCS_PROFILE", default_value = "test")]
        profile: String,
        /// Plaintext size in bytes.
        #[arg(long, default_value_t = 65536)]
        file_size: usize,
        /// Block size n' in bytes.
        #[arg(long, default_value_t = 4096)]
        block_size: usize,
        #[arg(long, default_value_t = 10)]
        l: usize,
        /// Corrupted-block fraction for the detection experiment.
        #[arg(long, default_value_t = 0.0)]
        beta: f64,
        /// Monte-Carlo trials (0 skips the detection experiment).
        #[arg(long, default_value_t = 0)]
        trials: usize,
        /// Timed repetitions per phase.
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Output format: table, csv or json.
        #[arg(long, default_value = "table")]
        out: String,
    },
}

fn parse_protocol(s: &str) -> Result<Protocol> {
    Protocol::by_name(s).ok_or_else(|| CliError::Usage(format!("unknown protocol {s:?}")))
}

fn parse_profile(s: &str) -> Result<SecurityProfile> {
    SecurityProfile::by_name(s).ok_or_else(|| CliError::Usage(format!("unknown profile {s:?}")))
}

fn connect(remote: &Remote) -> Result<(WireClient, KeyFile, Vec<u8>)> {
    let key = keyfile::load(&remote.key_file)?;
    let conn = WireClient::connect(&remote.server)
        .map_err(|e| CliError::Transport(format!("{}: {e}", remote.server)))?;
    Ok((conn, key, remote.fid.clone().into_bytes()))
}

fn cmd_keygen(
    protocol: &str,
    profile: &str,
    segments: usize,
    blocks: usize,
    key_file: &PathBuf,
) -> Result<()> {
    let protocol = parse_protocol(protocol)?;
    let profile = parse_profile(profile)?;
    let key = match protocol {
        Protocol::Dscs1 => KeyFile::One(keygen(&profile, blocks.max(1), segments, &mut OsRng)?),
        Protocol::Dscs2 => KeyFile::Two(keygen2(&profile, segments, &mut OsRng)),
    };
    keyfile::save(key_file, &key)?;
    println!("wrote {protocol} key to {}", key_file.display());
    Ok(())
}

fn cmd_outsource(remote: &Remote, file: &PathBuf) -> Result<()> {
    let data = std::fs::read(file)
        .map_err(|e| CliError::Usage(format!("{}: {e}", file.display())))?;
    let (mut conn, key, fid) = connect(remote)?;
    match key {
        KeyFile::One(mut state) => {
            let bundle = outsource(&mut state, &data, &mut OsRng)?;
            let m = bundle.blocks.len();
            ops::upload1(&mut conn, &fid, &state, &bundle)?;
            keyfile::save(&remote.key_file, &KeyFile::One(state))?;
            println!("outsourced {} bytes as {m} blocks", data.len());
        }
        KeyFile::Two(mut state) => {
            let bundle = outsource2(&mut state, &data)?;
            let m = bundle.blocks.len();
            ops::upload2(&mut conn, &state, &bundle)?;
            keyfile::save(&remote.key_file, &KeyFile::Two(state))?;
            println!("outsourced {} bytes as {m} blocks", data.len());
        }
    }
    Ok(())
}

fn cmd_read(remote: &Remote, index: usize, out_file: Option<&PathBuf>) -> Result<()> {
    let (mut conn, key, fid) = connect(remote)?;
    let (bytes, segs) = match key {
        KeyFile::One(state) => {
            let block = ops::read1(&mut conn, &fid, &state, index)?;
            let seg = state.profile.segment_bytes();
            let mut out = Vec::with_capacity(block.len() * seg);
            for v in &block {
                let b = v.to_bytes_be();
                out.extend(std::iter::repeat(0u8).take(seg - b.len()));
                out.extend_from_slice(&b);
            }
            (out, block.len())
        }
        KeyFile::Two(state) => {
            let block = ops::read2(&mut conn, &state, index)?;
            let out: Vec<u8> = block
                .iter()
                .flat_map(|s| dscs_core::crypto::pairing::scalar_to_bytes(s))
                .collect();
            (out, block.len())
        }
    };
    match out_file {
        Some(p) => {
            std::fs::write(p, &bytes)?;
            println!("block {index}: verified, {segs} segments written to {}", p.display());
        }
        None => println!("block {index}: verified ({segs} segments, {} bytes)", bytes.len()),
    }
    Ok(())
}

fn cmd_update(remote: &Remote, index: usize, updtype: UpdateType, data_file: Option<&PathBuf>) -> Result<()> {
    let (mut conn, key, fid) = connect(remote)?;
    let KeyFile::One(mut state) = key else {
        return Err(CliError::Usage(
            "this key speaks the append-only protocol; only `append` can write".into(),
        ));
    };
    let block = match data_file {
        Some(p) => {
            let data = std::fs::read(p)
                .map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
            Some(ops::bytes_to_block1(
                &data,
                state.pk.snc.n(),
                state.profile.segment_bytes(),
            )?)
        }
        None => None,
    };
    ops::update1(&mut conn, &fid, &mut state, index, updtype, block.as_deref(), &mut OsRng)?;
    keyfile::save(&remote.key_file, &KeyFile::One(state))?;
    println!("{updtype:?} at {index}: verified and committed");
    Ok(())
}

fn cmd_append(remote: &Remote, data_file: &PathBuf) -> Result<()> {
    let (mut conn, key, _fid) = connect(remote)?;
    let KeyFile::Two(mut state) = key else {
        return Err(CliError::Usage(
            "append is an append-only-protocol operation; use insert/modify here".into(),
        ));
    };
    let data = std::fs::read(data_file)
        .map_err(|e| CliError::Usage(format!("{}: {e}", data_file.display())))?;
    let block = ops::bytes_to_block2(&data, state.pk.n(), state.profile.segment_bytes())?;
    ops::append2(&mut conn, &mut state, &block)?;
    let m = state.m;
    keyfile::save(&remote.key_file, &KeyFile::Two(state))?;
    println!("appended block {m}");
    Ok(())
}

fn cmd_audit(remote: &Remote, l: usize) -> Result<()> {
    let (mut conn, key, fid) = connect(remote)?;
    let proof_bytes = match key {
        KeyFile::One(state) => ops::audit1(&mut conn, &fid, &state, l, &mut OsRng)?,
        KeyFile::Two(state) => ops::audit2(&mut conn, &state, l, &mut OsRng)?,
    };
    println!("audit accepted (l={l}, proof {proof_bytes} bytes)");
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_bench(
    protocol: &str,
    profile: &str,
    file_size: usize,
    block_size: usize,
    l: usize,
    beta: f64,
    trials: usize,
    repeats: usize,
    seed: u64,
    out: &str,
) -> Result<()> {
    let config = BenchConfig {
        protocol: parse_protocol(protocol)?,
        profile: parse_profile(profile)?,
        file_size,
        block_bytes: block_size,
        l,
        beta,
        trials,
        repeats,
        seed,
    };
    let report = run_bench(&config)?;
    let rendered = match out {
        "table" => render_table(&report),
        "csv" => render_csv(&report),
        "json" => render_json(&report),
        other => return Err(CliError::Usage(format!("unknown output format {other:?}"))),
    };
    print!("{rendered}");
    Ok(())
}

fn run() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::Keygen {
            protocol,
            profile,
            segments,
            blocks,
            key_file,
        } => cmd_keygen(&protocol, &profile, segments, blocks, &key_file),
        Cmd::Outsource { remote, file } => cmd_outsource(&remote, &file),
        Cmd::Read {
            remote,
            index,
            out_file,
        } => cmd_read(&remote, index, out_file.as_ref()),
        Cmd::Insert {
            remote,
            index,
            data_file,
        } => cmd_update(&remote, index, UpdateType::Insert, Some(&data_file)),
        Cmd::Modify {
            remote,
            index,
            data_file,
        } => cmd_update(&remote, index, UpdateType::Modify, Some(&data_file)),
        Cmd::Delete { remote, index } => cmd_update(&remote, index, UpdateType::Delete, None),
        Cmd::Append { remote, data_file } => cmd_append(&remote, &data_file),
        Cmd::Audit { remote, l } => cmd_audit(&remote, l),
        Cmd::Bench {
            protocol,
            profile,
            file_size,
            block_size,
            l,
            beta,
            trials,
            repeats,
            seed,
            out,
        } => cmd_bench(
            &protocol, &profile, file_size, block_size, l, beta, trials, repeats, seed, &out,
        ),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dscs: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
