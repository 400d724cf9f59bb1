//! CLI and bench-harness tests: formula checks, Monte-Carlo agreement,
//! proof-size trends, key-file persistence, and binary exit codes.

use std::process::Command;

use dscs_cli::bench::{
    detection_probability, fit_log_curve, proof_size_curve, run_bench, BenchConfig,
};
use dscs_cli::keyfile::{self, KeyFile};
use dscs_cli::Protocol;
use dscs_core::dscs1::{challenge, keygen, outsource, verify_audit, ServerFileI};
use dscs_core::dscs2::keygen2;
use dscs_core::SecurityProfile;
use dscs_server::{ServerBehavior, TestServerI};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn detection_probability_formula() {
    for l in [1, 10, 112] {
        assert_eq!(detection_probability(0.0, l), 0.0);
        assert_eq!(detection_probability(1.0, l), 1.0);
    }
    assert!((detection_probability(0.01, 112) - 0.675).abs() < 5e-3);
    assert!((detection_probability(0.1, 10) - 0.651).abs() < 5e-3);
    assert!((detection_probability(0.5, 1) - 0.5).abs() < 1e-12);
}

/// Corrupted server at block count m; the challenge of size l should
/// catch it with frequency 1−(1−β)^l.
fn corrupted_setup(m: usize, beta: f64, seed: u64) -> (dscs_core::dscs1::ClientStateI, TestServerI) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let profile = SecurityProfile::test();
    let mut state = keygen(&profile, m, 1, &mut rng).unwrap();
    let file: Vec<u8> = (0..m * profile.segment_bytes() - 8).map(|_| rng.gen()).collect();
    let bundle = outsource(&mut state, &file, &mut rng).unwrap();
    let server = ServerFileI::ingest(state.pk.snc.clone(), bundle, state.pk.level_cap).unwrap();
    let mut double = TestServerI::new(server, ServerBehavior::CorruptFraction(beta));
    double.ensure_corrupted(&mut rng);
    (state, double)
}

#[test]
fn monte_carlo_matches_formula_across_grid() {
    for (beta, m) in [(0.5, 2000), (0.1, 2000), (0.01, 20000)] {
        let (state, double) = corrupted_setup(m, beta, 0x5eed ^ m as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(99 + m as u64);
        for l in [1usize, 10, 112] {
            // The 3σ normal band needs enough expected events at both
            // tails; scale trials up for near-0/near-1 probabilities.
            let p_cell = detection_probability(beta, l);
            let trials = if p_cell.min(1.0 - p_cell) < 0.2 { 2000 } else { 200 };
            let mut caught = 0usize;
            for _ in 0..trials {
                let ch = challenge(&state.pk, l, &mut rng).unwrap();
                let ok = double
                    .prove(&ch)
                    .map(|p| verify_audit(&state.pk, &ch, &p))
                    .unwrap_or(false);
                if !ok {
                    caught += 1;
                }
            }
            let p = detection_probability(beta, l);
            let freq = caught as f64 / trials as f64;
            let sigma = (p * (1.0 - p) / trials as f64).sqrt();
            assert!(
                (freq - p).abs() <= 3.0 * sigma + 1e-9,
                "beta={beta} l={l}: freq {freq:.3} vs p {p:.3} (3sigma {:.3})",
                3.0 * sigma
            );
        }
    }
}

#[test]
fn audit_proof_bytes_grow_logarithmically() {
    let ms: Vec<usize> = (4..=10).map(|k| 1usize << k).collect();
    let points = proof_size_curve(&SecurityProfile::test(), &ms, 10, 8, 10, 11).unwrap();
    let (a, b, worst) = fit_log_curve(&points);
    assert!(b > 0.0, "proof size should grow with log m (fit {a:.1} + {b:.1}·log2 m)");
    assert!(
        worst < 0.10,
        "worst relative residual {worst:.3} exceeds 10%: {points:?}"
    );
}

#[test]
fn bench_dscs1_report_is_sane_and_repeatable() {
    let config = BenchConfig {
        protocol: Protocol::Dscs1,
        profile: SecurityProfile::test(),
        file_size: 1 << 20,
        block_bytes: 4096,
        l: 2,
        beta: 0.0,
        trials: 0,
        repeats: 3,
        seed: 5,
    };
    let r1 = run_bench(&config).unwrap();
    let r2 = run_bench(&BenchConfig { seed: 6, ..config.clone() }).unwrap();
    assert_eq!(r1.m, 257); // 1 MiB + 8-byte header over 4 KiB blocks
    assert!(r1.storage_overhead_pct > 0.0);
    for t in [&r1.outsource, &r1.challenge, &r1.prove, &r1.verify, &r1.update] {
        assert!(t.mean_us >= 0.0 && t.median_us >= 0.0);
    }
    // Proof size is dominated by fixed-size components; across seeds it
    // should stay within a narrow band.
    let (lo, hi) = (r1.proof_bytes.min(r2.proof_bytes), r1.proof_bytes.max(r2.proof_bytes));
    assert!(
        (hi - lo) as f64 / hi as f64 <= 0.2,
        "proof bytes vary too much: {} vs {}",
        r1.proof_bytes,
        r2.proof_bytes
    );
}

#[test]
fn bench_dscs2_proof_bytes_constant_across_file_sizes() {
    let mut sizes = Vec::new();
    for file_size in [1 << 10, 1 << 13, 1 << 16] {
        let config = BenchConfig {
            protocol: Protocol::Dscs2,
            profile: SecurityProfile::test(),
            file_size,
            block_bytes: 64,
            l: 4,
            beta: 0.0,
            trials: 0,
            repeats: 2,
            seed: 5,
        };
        sizes.push(run_bench(&config).unwrap().proof_bytes);
    }
    assert!(
        sizes.windows(2).all(|w| w[0] == w[1]),
        "append-only proof sizes must not depend on file size: {sizes:?}"
    );
}

#[test]
fn bench_detection_phase_reports_rate() {
    let config = BenchConfig {
        protocol: Protocol::Dscs1,
        profile: SecurityProfile::test(),
        file_size: 1 << 14,
        block_bytes: 16,
        l: 10,
        beta: 0.5,
        trials: 60,
        repeats: 2,
        seed: 5,
    };
    let r = run_bench(&config).unwrap();
    let d = r.empirical_detection_rate.expect("detection phase ran");
    // p = 1-(1-0.5)^10 ≈ 0.999
    assert!(d > 0.9, "detection rate {d}");
}

#[test]
fn bench_rejects_invalid_configs() {
    let good = BenchConfig {
        protocol: Protocol::Dscs1,
        profile: SecurityProfile::test(),
        file_size: 1024,
        block_bytes: 16,
        l: 2,
        beta: 0.0,
        trials: 0,
        repeats: 1,
        seed: 0,
    };
    assert!(run_bench(&BenchConfig { block_bytes: 15, ..good.clone() }).is_err());
    assert!(run_bench(&BenchConfig { beta: 1.5, ..good.clone() }).is_err());
    assert!(run_bench(&BenchConfig { l: 0, ..good.clone() }).is_err());
    assert!(run_bench(&good).is_ok());
}

#[test]
fn key_files_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let profile = SecurityProfile::test();

    let mut s1 = keygen(&profile, 3, 2, &mut rng).unwrap();
    let file: Vec<u8> = (0..3 * 2 * profile.segment_bytes() - 8).map(|_| rng.gen()).collect();
    outsource(&mut s1, &file, &mut rng).unwrap();
    let KeyFile::One(back) = keyfile::decode(&keyfile::encode(&KeyFile::One(s1.clone()))).unwrap()
    else {
        panic!("wrong protocol")
    };
    assert_eq!(back.profile, s1.profile);
    assert_eq!(back.trapdoor.p, s1.trapdoor.p);
    assert_eq!(back.trapdoor.q, s1.trapdoor.q);
    assert_eq!(back.pk, s1.pk);

    let mut s2 = keygen2(&profile, 4, &mut rng);
    s2.m = 9;
    let KeyFile::Two(back) = keyfile::decode(&keyfile::encode(&KeyFile::Two(s2.clone()))).unwrap()
    else {
        panic!("wrong protocol")
    };
    assert_eq!(back.profile, s2.profile);
    assert_eq!(back.sk.alpha, s2.sk.alpha);
    assert_eq!(back.pk.encode(), s2.pk.encode());
    assert_eq!(back.fid, s2.fid);
    assert_eq!(back.m, 9);

    assert!(keyfile::decode(b"not a key file").is_err());
}

// ---- binary exit codes ----

fn dscs() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dscs"))
}

#[test]
fn binary_full_session_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let data_dir = dir.path().join("server-data");
    let handle = dscs_server::serve(dscs_server::ServerConfig {
        addr: "127.0.0.1:0".into(),
        data_dir: data_dir.clone(),
        workers: 2,
    })
    .unwrap();
    let server = handle.addr.to_string();

    let key1 = dir.path().join("k1.key");
    let key2 = dir.path().join("k2.key");
    let plain = dir.path().join("plain.bin");
    let blockfile = dir.path().join("block.bin");
    std::fs::write(&plain, vec![7u8; 1000]).unwrap();
    std::fs::write(&blockfile, vec![9u8; 8]).unwrap();

    let run = |args: &[&str]| {
        dscs()
            .args(args)
            .env("DSCS_SERVER", &server)
            .output()
            .unwrap()
    };
    let code = |o: &std::process::Output| o.status.code().unwrap();

    // keygen for both protocols.
    let o = run(&["keygen", "--protocol", "dscs1", "--segments", "4", "--key-file",
        key1.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = run(&["keygen", "--protocol", "dscs2", "--segments", "4", "--key-file",
        key2.to_str().unwrap()]);
    assert_eq!(code(&o), 0);

    // Happy path: outsource, read, modify, insert, delete, audit.
    let k1 = key1.to_str().unwrap();
    for args in [
        vec!["outsource", "--key-file", k1, "--fid", "f1", "--file", plain.to_str().unwrap()],
        vec!["read", "--key-file", k1, "--fid", "f1", "--index", "1"],
        vec!["modify", "--key-file", k1, "--fid", "f1", "--index", "2", "--data-file",
            blockfile.to_str().unwrap()],
        vec!["insert", "--key-file", k1, "--fid", "f1", "--index", "1", "--data-file",
            blockfile.to_str().unwrap()],
        vec!["delete", "--key-file", k1, "--fid", "f1", "--index", "1"],
        vec!["audit", "--key-file", k1, "--fid", "f1", "--l", "5"],
    ] {
        let o = run(&args);
        assert_eq!(code(&o), 0, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }

    // Stale verifier key: audits must fail with exit 1.
    let stale = dir.path().join("stale.key");
    std::fs::copy(&key1, &stale).unwrap();
    let o = run(&["modify", "--key-file", k1, "--fid", "f1", "--index", "1", "--data-file",
        blockfile.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let o = run(&["audit", "--key-file", stale.to_str().unwrap(), "--fid", "f1", "--l", "5"]);
    assert_eq!(code(&o), 1, "stale audit: {}", String::from_utf8_lossy(&o.stderr));

    // DSCS II session: outsource, append, read, audit; insert refused.
    let k2 = key2.to_str().unwrap();
    for args in [
        vec!["outsource", "--key-file", k2, "--fid", "f2", "--file", plain.to_str().unwrap()],
        vec!["append", "--key-file", k2, "--fid", "f2", "--data-file", blockfile.to_str().unwrap()],
        vec!["read", "--key-file", k2, "--fid", "f2", "--index", "1"],
        vec!["audit", "--key-file", k2, "--fid", "f2", "--l", "5"],
    ] {
        let o = run(&args);
        assert_eq!(code(&o), 0, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let o = run(&["insert", "--key-file", k2, "--fid", "f2", "--index", "1", "--data-file",
        blockfile.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(
        String::from_utf8_lossy(&o.stderr).contains("append-only"),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );

    // Unreachable server: transport error, exit 2.
    let o = dscs()
        .args(["audit", "--key-file", k1, "--fid", "f1"])
        .env("DSCS_SERVER", "127.0.0.1:1")
        .output()
        .unwrap();
    assert_eq!(o.status.code().unwrap(), 2);

    // Unknown flag/protocol: usage, exit 2.
    let o = run(&["keygen", "--protocol", "dscs3", "--key-file", k1]);
    assert_eq!(code(&o), 2);

    handle.shutdown();
}

#[test]
fn bench_subcommand_emits_all_formats() {
    for fmt in ["table", "csv", "json"] {
        let o = dscs()
            .args([
                "bench", "--protocol", "dscs1", "--file-size", "4096", "--block-size", "32",
                "--l", "2", "--repeats", "1", "--out", fmt,
            ])
            .output()
            .unwrap();
        assert_eq!(o.status.code().unwrap(), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let out = String::from_utf8_lossy(&o.stdout);
        match fmt {
            "json" => assert!(out.contains("\"proof_bytes\"")),
            "csv" => assert!(out.starts_with("protocol,")),
            _ => assert!(out.contains("storage overhead")),
        }
    }
}
