//! BPSK over AWGN, frame generation and BER/FER sweeps.
//!
//! Randomness is ChaCha8: for a frame `f` the payload generator is
//! `ChaCha8Rng::seed_from_u64(seed ^ lane)` with stream `f`, where `lane`
//! separates payload and noise draws. The same frames (payload and unit
//! noise) are therefore seen by every decoder configuration and every SNR
//! point, and by any number of worker threads.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use thiserror::Error;

use crate::instrument::OpCounters;
use crate::kernel::{Kernel, MetricKernel};
use crate::ldpc::{code_stats, parity_check, LdpcConfig, LdpcDecodeError, LdpcDecoder, ParityCheckMatrix};
use crate::trellis::{turbo_encode, Permutation, Trellis, TrellisError};
use crate::turbo::{TurboConfig, TurboDecoder, TurboError, TurboLlrs};
use crate::{Bit, Llr};

/// Generator identity written into sweep metadata.
pub const RNG_ID: &str = "ChaCha8Rng (rand_chacha 0.9); key = seed_from_u64(seed ^ lane), stream = frame index";

const PAYLOAD_LANE: u64 = 0x7061_796c_6f61_6400;
const NOISE_LANE: u64 = 0x6e6f_6973_6500_0000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("sweep needs at least one Eb/N0 point")]
    NoPoints,
    #[error("frame budget must be at least 1")]
    ZeroFrames,
    #[error("batch size must be at least 1")]
    ZeroBatch,
    #[error("invalid channel: {0}")]
    InvalidChannel(String),
    #[error("parity-check matrix is rank deficient (rank {rank} < {m} rows)")]
    RankDeficient { rank: usize, m: usize },
    #[error("message length {actual} does not match code dimension {expected}")]
    MessageLength { expected: usize, actual: usize },
    #[error("worker pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Trellis(#[from] TrellisError),
    #[error(transparent)]
    Turbo(#[from] TurboError),
    #[error(transparent)]
    Ldpc(#[from] LdpcDecodeError),
}

pub fn bpsk_modulate(bits: &[Bit]) -> Vec<f64> {
    bits.iter().map(|&b| crate::convention::bit_sign(b)).collect()
}

/// Adds zero-mean Gaussian noise of variance `sigma2`.
pub fn awgn<R: Rng + ?Sized>(symbols: &[f64], sigma2: f64, rng: &mut R) -> Vec<f64> {
    let sigma = sigma2.sqrt();
    symbols
        .iter()
        .map(|&x| {
            let n: f64 = StandardNormal.sample(rng);
            x + sigma * n
        })
        .collect()
}

pub fn channel_llr(y: f64, sigma2: f64) -> Llr {
    2.0 * y / sigma2
}

pub fn channel_llrs(y: &[f64], sigma2: f64) -> Vec<Llr> {
    y.iter().map(|&v| channel_llr(v, sigma2)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSpec {
    pub ebn0_db: f64,
    pub code_rate: f64,
    pub seed: u64,
}

impl ChannelSpec {
    pub fn new(ebn0_db: f64, code_rate: f64, seed: u64) -> Result<Self, HarnessError> {
        if !(code_rate > 0.0 && code_rate <= 1.0) || !ebn0_db.is_finite() {
            return Err(HarnessError::InvalidChannel(format!(
                "Eb/N0 {ebn0_db} dB, rate {code_rate}"
            )));
        }
        Ok(Self {
            ebn0_db,
            code_rate,
            seed,
        })
    }

    /// Noise variance for unit-energy BPSK.
    pub fn sigma2(&self) -> f64 {
        1.0 / (2.0 * self.code_rate * 10f64.powf(self.ebn0_db / 10.0))
    }
}

/// Generator for one lane of one frame.
pub fn frame_rng(seed: u64, lane: u64, frame: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ lane);
    rng.set_stream(frame);
    rng
}

/// Systematic encoder derived from `H` by Gaussian elimination over GF(2).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LdpcEncoder {
    n: usize,
    /// Columns carrying message bits, ascending.
    free_cols: Vec<usize>,
    /// For each pivot: its column and the free-column positions it sums.
    pivots: Vec<(usize, Vec<usize>)>,
}

impl LdpcEncoder {
    pub fn new(h: &ParityCheckMatrix) -> Result<Self, HarnessError> {
        let n = h.n();
        let words = n.div_ceil(64);
        let mut rows: Vec<Vec<u64>> = h
            .rows()
            .iter()
            .map(|r| {
                let mut v = vec![0u64; words];
                for &c in r {
                    v[c / 64] |= 1 << (c % 64);
                }
                v
            })
            .collect();
        let bit = |row: &[u64], c: usize| (row[c / 64] >> (c % 64)) & 1 == 1;
        let mut pivot_cols = Vec::new();
        let mut rank = 0;
        for c in 0..n {
            let Some(p) = (rank..rows.len()).find(|&r| bit(&rows[r], c)) else {
                continue;
            };
            rows.swap(rank, p);
            let pivot = rows[rank].clone();
            for (r, row) in rows.iter_mut().enumerate() {
                if r != rank && bit(row, c) {
                    row.iter_mut().zip(&pivot).for_each(|(a, b)| *a ^= b);
                }
            }
            pivot_cols.push(c);
            rank += 1;
        }
        if rank < h.m() {
            return Err(HarnessError::RankDeficient { rank, m: h.m() });
        }
        let mut is_pivot = vec![false; n];
        pivot_cols.iter().for_each(|&c| is_pivot[c] = true);
        let free_cols: Vec<usize> = (0..n).filter(|&c| !is_pivot[c]).collect();
        let pivots = pivot_cols
            .iter()
            .enumerate()
            .map(|(r, &c)| {
                let deps = free_cols
                    .iter()
                    .enumerate()
                    .filter(|&(_, &f)| bit(&rows[r], f))
                    .map(|(i, _)| i)
                    .collect();
                (c, deps)
            })
            .collect();
        Ok(Self {
            n,
            free_cols,
            pivots,
        })
    }

    /// Number of message bits.
    pub fn dimension(&self) -> usize {
        self.free_cols.len()
    }

    pub fn encode(&self, msg: &[Bit]) -> Result<Vec<Bit>, HarnessError> {
        if msg.len() != self.dimension() {
            return Err(HarnessError::MessageLength {
                expected: self.dimension(),
                actual: msg.len(),
            });
        }
        let mut word = vec![0; self.n];
        for (&c, &b) in self.free_cols.iter().zip(msg) {
            word[c] = b & 1;
        }
        for (c, deps) in &self.pivots {
            word[*c] = deps.iter().fold(0, |acc, &i| acc ^ (msg[i] & 1));
        }
        Ok(word)
    }
}

/// LDPC codeword source.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum LdpcPayload {
    /// The all-zero codeword; exact for a symmetric channel and decoder.
    #[default]
    AllZero,
    Encode(LdpcEncoder),
}

/// All-zero word, or the encoding of `msg`.
pub fn ldpc_encode_or_zero(
    payload: &LdpcPayload,
    h: &ParityCheckMatrix,
    msg: &[Bit],
) -> Result<Vec<Bit>, HarnessError> {
    match payload {
        LdpcPayload::AllZero => Ok(vec![0; h.n()]),
        LdpcPayload::Encode(enc) => enc.encode(msg),
    }
}

/// Code and decoder under test.
#[derive(Debug, Clone)]
pub enum CodeSetup<'a> {
    Turbo {
        trellis: &'a Trellis,
        perm: &'a Permutation,
        config: TurboConfig,
    },
    Ldpc {
        h: &'a ParityCheckMatrix,
        config: LdpcConfig,
        payload: LdpcPayload,
    },
}

impl CodeSetup<'_> {
    /// Transmitted bits per information bit, tail included.
    pub fn code_rate(&self) -> f64 {
        match self {
            CodeSetup::Turbo { trellis, perm, .. } => {
                let k = perm.size() as f64;
                k / (3.0 * k + 4.0 * trellis.memory() as f64)
            }
            CodeSetup::Ldpc { h, payload, .. } => match payload {
                LdpcPayload::Encode(enc) => enc.dimension() as f64 / h.n() as f64,
                LdpcPayload::AllZero => code_stats(h).rate,
            },
        }
    }

    /// Bits compared per frame: the payload for turbo, the codeword for LDPC.
    pub fn bits_per_frame(&self) -> usize {
        match self {
            CodeSetup::Turbo { perm, .. } => perm.size(),
            CodeSetup::Ldpc { h, .. } => h.n(),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            CodeSetup::Turbo {
                trellis,
                perm,
                config,
            } => format!(
                "turbo {} K={} iterations={} window={} beta_init={:?} normalize={} extrinsic_scale={}",
                trellis.summary(),
                perm.size(),
                config.iterations,
                config.window.window_len,
                config.window.beta_init,
                config.normalize,
                config.extrinsic_scale
            ),
            CodeSetup::Ldpc { h, config, payload } => format!(
                "ldpc M={} N={} edges={} iterations={} early_stop={} payload={}",
                h.m(),
                h.n(),
                h.edges(),
                config.max_iters,
                config.early_stop,
                match payload {
                    LdpcPayload::AllZero => "all-zero",
                    LdpcPayload::Encode(_) => "encoded",
                }
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub ebn0_db: Vec<f64>,
    pub seed: u64,
    pub max_frames: u64,
    /// Stop a point early once this many frame errors are seen (checked
    /// after each batch).
    pub min_frame_errors: Option<u64>,
    pub batch: u64,
    /// Worker threads; 0 uses the rayon default.
    pub threads: usize,
    pub kernel: Kernel,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            ebn0_db: vec![1.0],
            seed: 1,
            max_frames: 1000,
            min_frame_errors: None,
            batch: 64,
            threads: 0,
            kernel: Kernel::default(),
        }
    }
}

/// Outcome of one simulated frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FrameOutcome {
    pub bit_errors: u64,
    pub frame_error: bool,
    pub iterations: u64,
    /// LDPC frames reported converged whose hard decision fails `H x^T = 0`.
    pub converged_parity_violation: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointResult {
    pub ebn0_db: f64,
    pub frames: u64,
    pub bits_per_frame: u64,
    pub bit_errors: u64,
    pub frame_errors: u64,
    pub iterations_total: u64,
    pub converged_parity_violations: u64,
    pub counters: OpCounters,
}

impl PointResult {
    pub fn ber(&self) -> f64 {
        self.bit_errors as f64 / (self.frames * self.bits_per_frame).max(1) as f64
    }

    pub fn fer(&self) -> f64 {
        self.frame_errors as f64 / self.frames.max(1) as f64
    }

    pub fn avg_iterations(&self) -> f64 {
        self.iterations_total as f64 / self.frames.max(1) as f64
    }

    fn absorb(&mut self, f: &FrameOutcome) {
        self.frames += 1;
        self.bit_errors += f.bit_errors;
        self.frame_errors += f.frame_error as u64;
        self.iterations_total += f.iterations;
        self.converged_parity_violations += f.converged_parity_violation as u64;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub points: Vec<PointResult>,
    /// `key: value` lines emitted as `#` comments ahead of the CSV.
    pub metadata: Vec<(String, String)>,
}

impl SweepResult {
    pub fn total_frames(&self) -> u64 {
        self.points.iter().map(|p| p.frames).sum()
    }

    pub fn total_frame_errors(&self) -> u64 {
        self.points.iter().map(|p| p.frame_errors).sum()
    }

    pub fn total_bit_errors(&self) -> u64 {
        self.points.iter().map(|p| p.bit_errors).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.metadata {
            let _ = writeln!(out, "# {k}: {v}");
        }
        out.push_str("ebn0_db,frames,bit_errors,ber,frame_errors,fer,avg_iterations\n");
        for p in &self.points {
            let _ = writeln!(
                out,
                "{},{},{},{:.6e},{},{:.6e},{:.4}",
                p.ebn0_db,
                p.frames,
                p.bit_errors,
                p.ber(),
                p.frame_errors,
                p.fer(),
                p.avg_iterations()
            );
        }
        out
    }
}

/// Simulates frame `frame` at one channel point.
pub fn simulate_frame<K: MetricKernel>(
    setup: &CodeSetup<'_>,
    kernel: &K,
    channel: &ChannelSpec,
    frame: u64,
    ops: &mut OpCounters,
) -> Result<FrameOutcome, HarnessError> {
    let sigma2 = channel.sigma2();
    let mut payload_rng = frame_rng(channel.seed, PAYLOAD_LANE, frame);
    let mut noise_rng = frame_rng(channel.seed, NOISE_LANE, frame);
    match setup {
        CodeSetup::Turbo {
            trellis,
            perm,
            config,
        } => {
            let bits: Vec<Bit> = (0..perm.size()).map(|_| payload_rng.random_range(0..2)).collect();
            let stream = turbo_encode(&bits, trellis, perm)?.to_stream();
            let y = awgn(&bpsk_modulate(&stream), sigma2, &mut noise_rng);
            let llrs = TurboLlrs::from_stream(&channel_llrs(&y, sigma2), bits.len(), trellis.memory())?;
            let r = TurboDecoder::new(trellis, perm, kernel, *config)?.decode(&llrs)?;
            ops.merge(&r.counters);
            let bit_errors = count_errors(&r.hard_bits, &bits);
            Ok(FrameOutcome {
                bit_errors,
                frame_error: bit_errors > 0,
                iterations: r.iterations_run as u64,
                converged_parity_violation: false,
            })
        }
        CodeSetup::Ldpc { h, config, payload } => {
            let msg: Vec<Bit> = match payload {
                LdpcPayload::AllZero => Vec::new(),
                LdpcPayload::Encode(enc) => {
                    (0..enc.dimension()).map(|_| payload_rng.random_range(0..2)).collect()
                }
            };
            let word = ldpc_encode_or_zero(payload, h, &msg)?;
            let y = awgn(&bpsk_modulate(&word), sigma2, &mut noise_rng);
            let r = LdpcDecoder::new(h, kernel, config.clone())?.decode(&channel_llrs(&y, sigma2))?;
            ops.merge(&r.counters);
            let bit_errors = count_errors(&r.hard_bits, &word);
            Ok(FrameOutcome {
                bit_errors,
                frame_error: bit_errors > 0,
                iterations: r.iterations_used as u64,
                converged_parity_violation: r.converged && !parity_check(h, &r.hard_bits),
            })
        }
    }
}

fn count_errors(a: &[Bit], b: &[Bit]) -> u64 {
    a.iter().zip(b).filter(|(x, y)| x != y).count() as u64
}

/// Runs every point of `cfg` in fixed-size batches of frames; batch
/// boundaries, and hence results, do not depend on the worker count.
pub fn run_sweep(setup: &CodeSetup<'_>, cfg: &SweepConfig) -> Result<SweepResult, HarnessError> {
    if cfg.ebn0_db.is_empty() {
        return Err(HarnessError::NoPoints);
    }
    if cfg.max_frames == 0 {
        return Err(HarnessError::ZeroFrames);
    }
    if cfg.batch == 0 {
        return Err(HarnessError::ZeroBatch);
    }
    let rate = setup.code_rate();
    let channels = cfg
        .ebn0_db
        .iter()
        .map(|&e| ChannelSpec::new(e, rate, cfg.seed))
        .collect::<Result<Vec<_>, _>>()?;
    // Surface configuration errors before spawning workers.
    simulate_frame(setup, &cfg.kernel, &channels[0], 0, &mut OpCounters::new())?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| HarnessError::Pool(e.to_string()))?;
    let points = pool.install(|| {
        channels
            .iter()
            .map(|ch| run_point(setup, cfg, ch))
            .collect::<Result<Vec<_>, _>>()
    })?;

    let mut metadata = vec![
        ("code".to_string(), setup.describe()),
        ("seed".to_string(), cfg.seed.to_string()),
        ("rng".to_string(), RNG_ID.to_string()),
        ("code_rate".to_string(), format!("{rate:.6}")),
        ("max_star".to_string(), format!("{:?}", cfg.kernel.mode)),
        (
            "quantization".to_string(),
            cfg.kernel
                .quant
                .map(|q| format!("{} bits, {} fractional", q.total_bits(), q.frac_bits()))
                .unwrap_or_else(|| "off".into()),
        ),
        ("max_frames".to_string(), cfg.max_frames.to_string()),
        (
            "min_frame_errors".to_string(),
            cfg.min_frame_errors.map_or("off".into(), |m| m.to_string()),
        ),
        ("batch".to_string(), cfg.batch.to_string()),
    ];
    metadata.push((
        "bits_compared".to_string(),
        match setup {
            CodeSetup::Turbo { .. } => "payload".into(),
            CodeSetup::Ldpc { .. } => "codeword".into(),
        },
    ));
    Ok(SweepResult { points, metadata })
}

fn run_point(setup: &CodeSetup<'_>, cfg: &SweepConfig, ch: &ChannelSpec) -> Result<PointResult, HarnessError> {
    let mut point = PointResult {
        ebn0_db: ch.ebn0_db,
        bits_per_frame: setup.bits_per_frame() as u64,
        ..Default::default()
    };
    let mut next = 0u64;
    while next < cfg.max_frames {
        if cfg.min_frame_errors.is_some_and(|m| point.frame_errors >= m) {
            break;
        }
        let end = (next + cfg.batch).min(cfg.max_frames);
        let outcomes = (next..end)
            .into_par_iter()
            .map(|f| {
                let mut ops = OpCounters::new();
                simulate_frame(setup, &cfg.kernel, ch, f, &mut ops).map(|o| (o, ops))
            })
            .collect::<Result<Vec<_>, _>>()?;
        for (o, ops) in &outcomes {
            point.absorb(o);
            point.counters.merge(ops);
        }
        next = end;
    }
    Ok(point)
}
