//! Benchmark and Monte-Carlo harness. Runs entirely in process with
//! per-run isolated server state; reports trends (proof-size shape,
//! overhead percentage, detection frequency), not absolute hardware
//! numbers.

use std::time::Instant;

use bls12_381::Scalar;
use dscs_core::dscs1::{
    challenge, init_update, keygen, outsource, verify_audit, verify_update, ServerFileI,
};
use dscs_core::dscs2::{append, challenge2, keygen2, outsource2, verify_audit2, ServerFileII};
use dscs_core::skiplist::UpdateType;
use dscs_core::SecurityProfile;
use dscs_server::{ServerBehavior, TestServerI};
use num_bigint::{BigUint, RandBigInt};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::{CliError, Protocol, Result};

/// Probability that an audit with l independent spot-checks catches a
/// server corrupting a β-fraction of blocks: 1 − (1−β)^l.
pub fn detection_probability(beta: f64, l: usize) -> f64 {
    1.0 - (1.0 - beta).powi(l as i32)
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub protocol: Protocol,
    pub profile: SecurityProfile,
    /// Plaintext size in bytes.
    pub file_size: usize,
    /// Block size n' in bytes; must be a multiple of the segment width.
    pub block_bytes: usize,
    /// Challenge cardinality per audit.
    pub l: usize,
    /// Fraction of blocks the simulated cheater corrupts (0 disables
    /// the Monte-Carlo phase).
    pub beta: f64,
    /// Monte-Carlo audit trials against the corrupted double.
    pub trials: usize,
    /// Timed repetitions per phase (one warm-up run is added and
    /// discarded).
    pub repeats: usize,
    pub seed: u64,
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        let seg = self.profile.segment_bytes();
        if self.block_bytes == 0 || self.block_bytes % seg != 0 {
            return Err(CliError::Usage(format!(
                "block size must be a positive multiple of the {seg}-byte segment width"
            )));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(CliError::Usage("beta must lie in [0,1]".into()));
        }
        if self.l == 0 || self.repeats == 0 || self.file_size == 0 {
            return Err(CliError::Usage("l, repeats and file size must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PhaseTiming {
    pub mean_us: f64,
    pub median_us: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub protocol: String,
    pub file_size: usize,
    pub block_bytes: usize,
    /// Resulting block count.
    pub m: usize,
    pub l: usize,
    /// Server-side authentication overhead (tags + index structure)
    /// relative to the plaintext, in percent.
    pub storage_overhead_pct: f64,
    /// Encoded audit-proof size; the raw blocks are not counted as
    /// communication.
    pub proof_bytes: usize,
    pub outsource: PhaseTiming,
    pub challenge: PhaseTiming,
    pub prove: PhaseTiming,
    pub verify: PhaseTiming,
    pub update: PhaseTiming,
    /// Fraction of Monte-Carlo audits that caught the cheater; absent
    /// when beta = 0 or trials = 0.
    pub empirical_detection_rate: Option<f64>,
}

/// Time `f` with one discarded warm-up round, then `repeats` measured
/// rounds; reports both mean and median.
fn time_phase<T>(repeats: usize, mut f: impl FnMut() -> T) -> PhaseTiming {
    let _ = f(); // warm-up
    let mut us: Vec<f64> = (0..repeats)
        .map(|_| {
            let t0 = Instant::now();
            let _ = f();
            t0.elapsed().as_secs_f64() * 1e6
        })
        .collect();
    us.sort_by(|a, b| a.total_cmp(b));
    let mean = us.iter().sum::<f64>() / us.len() as f64;
    let median = us[us.len() / 2];
    PhaseTiming {
        mean_us: mean,
        median_us: median,
    }
}

pub fn run_bench(config: &BenchConfig) -> Result<BenchReport> {
    config.validate()?;
    match config.protocol {
        Protocol::Dscs1 => run_bench1(config),
        Protocol::Dscs2 => run_bench2(config),
    }
}

fn run_bench1(config: &BenchConfig) -> Result<BenchReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let seg = config.profile.segment_bytes();
    let n = config.block_bytes / seg;
    let file: Vec<u8> = (0..config.file_size).map(|_| rng.gen()).collect();

    let mut state = keygen(&config.profile, 1, n, &mut rng)?;
    let outsource_t = time_phase(config.repeats, || {
        outsource(&mut state, &file, &mut rng).expect("outsource")
    });
    let bundle = outsource(&mut state, &file, &mut rng)?;
    let m = bundle.blocks.len();
    let tag_bytes: usize = bundle.tags.iter().map(|t| t.encode().len()).sum();
    let mut server = ServerFileI::ingest(state.pk.snc.clone(), bundle, state.pk.level_cap)?;
    let overhead = (tag_bytes + server.list.encode().len()) as f64 / config.file_size as f64;

    let l = config.l.min(m);
    let challenge_t = time_phase(config.repeats, || challenge(&state.pk, l, &mut rng).unwrap());
    let ch = challenge(&state.pk, l, &mut rng)?;
    let prove_t = time_phase(config.repeats, || server.prove(&ch).unwrap());
    let proof = server.prove(&ch)?;
    let proof_bytes = proof.encode().len();
    let verify_t = time_phase(config.repeats, || {
        assert!(verify_audit(&state.pk, &ch, &proof))
    });

    let e = state.pk.snc.e.clone();
    let update_t = time_phase(config.repeats, || {
        let nb: Vec<BigUint> = (0..n).map(|_| rng.gen_biguint_below(&e)).collect();
        let anchor = server.path_read(1).unwrap();
        let req =
            init_update(&mut state, 1, UpdateType::Modify, Some(&nb), &anchor, None, &mut rng)
                .unwrap();
        let resp = server.apply_update(&req).unwrap();
        assert!(verify_update(&mut state, &resp));
    });

    let detection = if config.beta > 0.0 && config.trials > 0 {
        let mut double = TestServerI::new(server, ServerBehavior::CorruptFraction(config.beta));
        double.ensure_corrupted(&mut rng);
        let mut caught = 0usize;
        for _ in 0..config.trials {
            let ch = challenge(&state.pk, l, &mut rng)?;
            let ok = double
                .prove(&ch)
                .map(|p| verify_audit(&state.pk, &ch, &p))
                .unwrap_or(false);
            if !ok {
                caught += 1;
            }
        }
        Some(caught as f64 / config.trials as f64)
    } else {
        None
    };

    Ok(BenchReport {
        protocol: config.protocol.to_string(),
        file_size: config.file_size,
        block_bytes: config.block_bytes,
        m,
        l,
        storage_overhead_pct: overhead * 100.0,
        proof_bytes,
        outsource: outsource_t,
        challenge: challenge_t,
        prove: prove_t,
        verify: verify_t,
        update: update_t,
        empirical_detection_rate: detection,
    })
}

fn run_bench2(config: &BenchConfig) -> Result<BenchReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let seg = config.profile.segment_bytes();
    let n = config.block_bytes / seg;
    let file: Vec<u8> = (0..config.file_size).map(|_| rng.gen()).collect();

    let mut state = keygen2(&config.profile, n, &mut rng);
    let outsource_t = time_phase(config.repeats, || {
        let mut s = state.clone();
        outsource2(&mut s, &file).expect("outsource")
    });
    let bundle = outsource2(&mut state, &file)?;
    let m = bundle.blocks.len();
    let tag_bytes: usize = bundle.tags.iter().map(|t| t.encode().len()).sum();
    let mut server = ServerFileII::ingest(state.pk.clone(), state.fid.clone(), bundle)?;
    let overhead = tag_bytes as f64 / config.file_size as f64;

    let l = config.l.min(m);
    let challenge_t = time_phase(config.repeats, || challenge2(m, l, &mut rng).unwrap());
    let ch = challenge2(m, l, &mut rng)?;
    let prove_t = time_phase(config.repeats, || server.prove2(&ch).unwrap());
    let proof = server.prove2(&ch)?;
    let proof_bytes = proof.encode().len();
    let verify_t = time_phase(config.repeats, || {
        assert!(verify_audit2(&state.pk, &state.fid, &ch, &proof))
    });

    let update_t = time_phase(config.repeats, || {
        let nb: Vec<Scalar> = (0..n)
            .map(|_| dscs_core::crypto::pairing::rand_scalar(&mut rng))
            .collect();
        let req = append(&mut state, &nb).unwrap();
        server.apply_append(&req);
    });

    let detection = if config.beta > 0.0 && config.trials > 0 {
        let mut bad = server.clone();
        let count = ((bad.m() as f64) * config.beta).round() as usize;
        let picks = rand::seq::index::sample(&mut rng, bad.m(), count.min(bad.m()));
        for i in picks.iter() {
            bad.blocks[i][0] += Scalar::one();
        }
        let mut caught = 0usize;
        let l2 = config.l.min(bad.m());
        for _ in 0..config.trials {
            let ch = challenge2(bad.m(), l2, &mut rng)?;
            let ok = bad
                .prove2(&ch)
                .map(|p| verify_audit2(&state.pk, &state.fid, &ch, &p))
                .unwrap_or(false);
            if !ok {
                caught += 1;
            }
        }
        Some(caught as f64 / config.trials as f64)
    } else {
        None
    };

    Ok(BenchReport {
        protocol: config.protocol.to_string(),
        file_size: config.file_size,
        block_bytes: config.block_bytes,
        m,
        l,
        storage_overhead_pct: overhead * 100.0,
        proof_bytes,
        outsource: outsource_t,
        challenge: challenge_t,
        prove: prove_t,
        verify: verify_t,
        update: update_t,
        empirical_detection_rate: detection,
    })
}

/// Mean audit-proof size across block counts (single-segment blocks,
/// fixed l), for asymptotic shape checks. Averages over `builds`
/// independently outsourced files per size and `audits` rounds per
/// file: both the tower-height draw of a particular file and the
/// challenged indices of a particular audit move individual proof
/// sizes around their logarithmic mean.
pub fn proof_size_curve(
    profile: &SecurityProfile,
    ms: &[usize],
    l: usize,
    builds: usize,
    audits: usize,
    seed: u64,
) -> Result<Vec<(usize, f64)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (builds, audits) = (builds.max(1), audits.max(1));
    let mut out = Vec::with_capacity(ms.len());
    for &m in ms {
        let mut total = 0usize;
        for _ in 0..builds {
            let mut state = keygen(profile, m, 1, &mut rng)?;
            let seg = profile.segment_bytes();
            let file: Vec<u8> = (0..m * seg - 8).map(|_| rng.gen()).collect();
            let bundle = outsource(&mut state, &file, &mut rng)?;
            assert_eq!(bundle.blocks.len(), m);
            let server = ServerFileI::ingest(state.pk.snc.clone(), bundle, state.pk.level_cap)?;
            for _ in 0..audits {
                let ch = challenge(&state.pk, l.min(m), &mut rng)?;
                let proof = server.prove(&ch)?;
                assert!(verify_audit(&state.pk, &ch, &proof));
                total += proof.encode().len();
            }
        }
        out.push((m, total as f64 / (builds * audits) as f64));
    }
    Ok(out)
}

/// Least-squares fit bytes ≈ a + b·log2(m); returns (a, b, worst
/// relative residual).
pub fn fit_log_curve(points: &[(usize, f64)]) -> (f64, f64, f64) {
    let xs: Vec<f64> = points.iter().map(|(m, _)| (*m as f64).log2()).collect();
    let ys: Vec<f64> = points.iter().map(|(_, b)| *b).collect();
    let k = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
    let b = (k * sxy - sx * sy) / (k * sxx - sx * sx);
    let a = (sy - b * sx) / k;
    let worst = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| ((a + b * x) - y).abs() / y)
        .fold(0.0f64, f64::max);
    (a, b, worst)
}

// ---- report rendering ----

pub fn render_json(report: &BenchReport) -> String {
    serde_json::to_string_pretty(report).expect("report serializes")
}

pub fn render_csv(report: &BenchReport) -> String {
    let mut out = String::from(
        "protocol,file_size,block_bytes,m,l,storage_overhead_pct,proof_bytes,\
         outsource_mean_us,outsource_median_us,challenge_mean_us,challenge_median_us,\
         prove_mean_us,prove_median_us,verify_mean_us,verify_median_us,\
         update_mean_us,update_median_us,empirical_detection_rate\n",
    );
    let det = report
        .empirical_detection_rate
        .map(|d| format!("{d:.4}"))
        .unwrap_or_default();
    out.push_str(&format!(
        "{},{},{},{},{},{:.3},{},{:.1},{:.1},{:.1},{:.1},{:.1},{:.1},{:.1},{:.1},{:.1},{:.1},{}\n",
        report.protocol,
        report.file_size,
        report.block_bytes,
        report.m,
        report.l,
        report.storage_overhead_pct,
        report.proof_bytes,
        report.outsource.mean_us,
        report.outsource.median_us,
        report.challenge.mean_us,
        report.challenge.median_us,
        report.prove.mean_us,
        report.prove.median_us,
        report.verify.mean_us,
        report.verify.median_us,
        report.update.mean_us,
        report.update.median_us,
        det,
    ));
    out
}

pub fn render_table(report: &BenchReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "protocol {}  file {} B  block {} B  m={}  l={}\n",
        report.protocol, report.file_size, report.block_bytes, report.m, report.l
    ));
    out.push_str(&format!(
        "storage overhead {:.2}%   proof {} B\n",
        report.storage_overhead_pct, report.proof_bytes
    ));
    out.push_str(&format!("{:<12}{:>14}{:>14}\n", "phase", "mean (us)", "median (us)"));
    for (name, t) in [
        ("outsource", &report.outsource),
        ("challenge", &report.challenge),
        ("prove", &report.prove),
        ("verify", &report.verify),
        ("update", &report.update),
    ] {
        out.push_str(&format!("{name:<12}{:>14.1}{:>14.1}\n", t.mean_us, t.median_us));
    }
    if let Some(d) = report.empirical_detection_rate {
        out.push_str(&format!("empirical detection rate {d:.4}\n"));
    }
    out
}
