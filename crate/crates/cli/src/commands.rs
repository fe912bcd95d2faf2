use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use unidec::channel::{run_sweep, CodeSetup, LdpcEncoder, LdpcPayload, SweepConfig};
use unidec::convention::ideal_llr;
use unidec::instrument::{
    report as count_report, throughput_model, ReportContext, ThroughputCheck, LDPC_HARDWARE_REFERENCE,
    TURBO_HARDWARE_REFERENCE,
};
use unidec::kernel::Kernel;
use unidec::ldpc::{
    code_stats, expand_base_matrix, parse_alist, wlan_648_r12, BaseMatrix, LdpcConfig, LdpcDecoder,
    ParityCheckMatrix,
};
use unidec::trellis::{
    build_rsc_trellis, derive_butterflies, lte_qpp_params, qpp_interleaver, turbo_encode, Permutation,
    Trellis,
};
use unidec::turbo::{TurboConfig, TurboDecoder, TurboLlrs, WindowConfig};
use unidec::{Bit, Llr};

use crate::config::{CodeFormat, CodeSource, InterleaverSpec, Mode, RunConfig, BUILTIN_WLAN};
use crate::error::CliError;

pub struct Global {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
}

impl Global {
    fn load_config(&self) -> Result<RunConfig, CliError> {
        let path = self
            .config
            .as_ref()
            .ok_or_else(|| CliError::Usage("this command needs --config <path>".into()))?;
        let mut cfg = RunConfig::load(path)?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        Ok(cfg)
    }

    /// `--out`, else the config's `output.path`, else stdout.
    fn emit(&self, fallback: Option<&Path>, text: &str) -> Result<(), CliError> {
        match self.out.as_deref().or(fallback) {
            Some(path) => std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display()))),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }

    /// Where informational text goes: stdout unless stdout carries data.
    fn info(&self, fallback: Option<&Path>, text: &str) {
        if self.out.is_some() || fallback.is_some() {
            print!("{text}");
        } else {
            eprint!("{text}");
        }
    }
}

/// Trellis and interleaver of a turbo configuration.
pub struct TurboCode {
    pub trellis: Trellis,
    pub perm: Permutation,
}

fn build_turbo(cfg: &RunConfig) -> Result<TurboCode, CliError> {
    let t = &cfg.turbo;
    let trellis = build_rsc_trellis(t.feedback_oct, t.forward_oct, t.memory)
        .map_err(|e| CliError::Config(format!("trellis: {e}")))?;
    derive_butterflies(&trellis).map_err(|e| CliError::Config(format!("trellis: {e}")))?;
    let perm = match &t.interleaver {
        InterleaverSpec::Lte => {
            let (f1, f2) = lte_qpp_params(t.k).ok_or_else(|| {
                CliError::Config(format!(
                    "turbo.k = {} is not an LTE block size; set interleaver.kind = qpp or file",
                    t.k
                ))
            })?;
            qpp_interleaver(t.k, f1, f2)
        }
        InterleaverSpec::Qpp { f1, f2 } => qpp_interleaver(t.k, *f1, *f2),
        InterleaverSpec::File(path) => {
            let text = read(path)?;
            let p = Permutation::parse(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
            if p.size() != t.k {
                return Err(CliError::Config(format!(
                    "interleaver file has {} entries, turbo.k = {}",
                    p.size(),
                    t.k
                )));
            }
            Ok(p)
        }
    }
    .map_err(|e| CliError::Config(format!("interleaver: {e}")))?;
    Ok(TurboCode { trellis, perm })
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Loads an alist or base-matrix file, sniffing the format from the
/// extension or the first data line.
fn load_code_file(path: &Path, format: CodeFormat) -> Result<ParityCheckMatrix, CliError> {
    let text = read(path)?;
    let format = match format {
        CodeFormat::Auto => match path.extension().and_then(|e| e.to_str()) {
            Some("alist") => CodeFormat::Alist,
            Some("base") => CodeFormat::Base,
            _ => {
                let first = text
                    .lines()
                    .map(str::trim)
                    .find(|l| !l.is_empty() && !l.starts_with('#'))
                    .unwrap_or("");
                if first.split_whitespace().count() == 3 {
                    CodeFormat::Base
                } else {
                    CodeFormat::Alist
                }
            }
        },
        f => f,
    };
    let parsed = match format {
        CodeFormat::Base => BaseMatrix::parse(&text).map(|b| expand_base_matrix(&b)),
        _ => parse_alist(&text),
    };
    parsed.map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

fn load_ldpc(cfg: &RunConfig) -> Result<ParityCheckMatrix, CliError> {
    match &cfg.ldpc.code {
        CodeSource::Builtin(_) => Ok(wlan_648_r12()),
        CodeSource::File(path) => load_code_file(path, cfg.ldpc.format),
    }
}

fn kernel(cfg: &RunConfig) -> Kernel {
    Kernel::new(cfg.max_star).with_quant(cfg.quant)
}

fn turbo_config(cfg: &RunConfig) -> TurboConfig {
    TurboConfig {
        iterations: cfg.turbo.iterations,
        window: WindowConfig::new(cfg.turbo.window, cfg.turbo.beta_init),
        normalize: cfg.normalize,
        extrinsic_scale: cfg.turbo.extrinsic_scale,
    }
}

fn ldpc_config(cfg: &RunConfig) -> LdpcConfig {
    LdpcConfig {
        max_iters: cfg.ldpc.iterations,
        early_stop: cfg.ldpc.early_stop,
        row_order: None,
    }
}

/// Parses one value per line; blank lines and `#` comments are skipped.
fn read_values<T: std::str::FromStr>(path: &Path, what: &str) -> Result<Vec<T>, CliError>
where
    T::Err: std::fmt::Display,
{
    let text = read(path)?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        out.push(line.parse::<T>().map_err(|e| {
            CliError::Parse(format!("{}:{}: `{line}` is not a {what}: {e}", path.display(), n + 1))
        })?);
    }
    Ok(out)
}

fn read_bits(path: &Path) -> Result<Vec<Bit>, CliError> {
    let bits: Vec<u8> = read_values(path, "bit")?;
    if let Some(i) = bits.iter().position(|&b| b > 1) {
        return Err(CliError::Parse(format!("{}: entry {} is not 0 or 1", path.display(), i + 1)));
    }
    Ok(bits)
}

fn check_len(what: &str, expected: usize, actual: usize) -> Result<(), CliError> {
    if expected != actual {
        return Err(CliError::Config(format!("{what}: expected {expected} values, got {actual}")));
    }
    Ok(())
}

fn lines<T: std::fmt::Display>(values: &[T]) -> String {
    values.iter().fold(String::new(), |mut s, v| {
        let _ = writeln!(s, "{v}");
        s
    })
}

pub fn inspect(g: &Global, code: Option<&str>, format: Option<&str>) -> Result<(), CliError> {
    let format = match format {
        Some("alist") => CodeFormat::Alist,
        Some("base") => CodeFormat::Base,
        _ => CodeFormat::Auto,
    };
    let text = match code {
        Some(BUILTIN_WLAN) => code_stats(&wlan_648_r12()).to_string(),
        Some("lte") => describe_trellis(&Trellis::lte(), None)?,
        Some(path) => code_stats(&load_code_file(Path::new(path), format)?).to_string(),
        None => {
            let cfg = g.load_config()?;
            match cfg.mode {
                Mode::Ldpc => code_stats(&load_ldpc(&cfg)?).to_string(),
                Mode::Turbo => {
                    let tc = build_turbo(&cfg)?;
                    describe_trellis(&tc.trellis, Some(&tc.perm))?
                }
            }
        }
    };
    g.emit(None, &text)
}

fn describe_trellis(t: &Trellis, perm: Option<&Permutation>) -> Result<String, CliError> {
    let bf = derive_butterflies(t).map_err(|e| CliError::Config(e.to_string()))?;
    let mut s = format!("{}\nbutterflies: {}\n", t.summary(), bf.len());
    for b in &bf {
        let _ = writeln!(
            s,
            "  ({},{}) -> ({},{}) {:?} sign {:+} u_straight {}",
            b.prev_states.0, b.prev_states.1, b.next_states.0, b.next_states.1, b.gamma_kind, b.sign, b.u_straight
        );
    }
    if let Some(p) = perm {
        let _ = writeln!(s, "K: {}", p.size());
        let _ = writeln!(s, "stream length: {}", 3 * p.size() + 4 * t.memory());
        let _ = writeln!(s, "alpha calls per siso pass: {}", bf.len() * (p.size() + t.memory()));
    }
    Ok(s)
}

pub fn encode(g: &Global, input: &Path, llr: Option<f64>) -> Result<(), CliError> {
    let cfg = g.load_config()?;
    if let Some(m) = llr {
        if !(m > 0.0 && m.is_finite()) {
            return Err(CliError::Usage(format!("--llr {m} must be positive")));
        }
    }
    let bits = read_bits(input)?;
    let word = match cfg.mode {
        Mode::Turbo => {
            let tc = build_turbo(&cfg)?;
            check_len("payload bits", tc.perm.size(), bits.len())?;
            turbo_encode(&bits, &tc.trellis, &tc.perm)
                .map_err(|e| CliError::Config(e.to_string()))?
                .to_stream()
        }
        Mode::Ldpc => {
            let h = load_ldpc(&cfg)?;
            let enc = LdpcEncoder::new(&h).map_err(|e| CliError::Config(e.to_string()))?;
            check_len("message bits", enc.dimension(), bits.len())?;
            enc.encode(&bits).map_err(|e| CliError::Config(e.to_string()))?
        }
    };
    let text = match llr {
        Some(m) => lines(&word.iter().map(|&b| ideal_llr(b, m)).collect::<Vec<_>>()),
        None => lines(&word),
    };
    g.emit(None, &text)
}

pub fn decode(g: &Global, input: &Path, report_path: Option<&Path>) -> Result<(), CliError> {
    let cfg = g.load_config()?;
    let llrs: Vec<Llr> = read_values(input, "number")?;
    let (bits, info, report) = match cfg.mode {
        Mode::Turbo => {
            let tc = build_turbo(&cfg)?;
            let k = tc.perm.size();
            check_len("turbo LLR stream", 3 * k + 4 * tc.trellis.memory(), llrs.len())?;
            let split = TurboLlrs::from_stream(&llrs, k, tc.trellis.memory())
                .map_err(|e| CliError::Config(e.to_string()))?;
            let dec = TurboDecoder::new(&tc.trellis, &tc.perm, kernel(&cfg), turbo_config(&cfg))
                .map_err(|e| CliError::Config(e.to_string()))?;
            let r = dec.decode(&split).map_err(|e| CliError::Config(e.to_string()))?;
            let rep = count_report(
                &r.counters,
                ReportContext::Turbo {
                    block_len: k,
                    memory: tc.trellis.memory(),
                    butterflies: dec.siso().butterflies().len(),
                    siso_passes: r.siso_passes,
                },
            );
            let info = format!("iterations_used: {}\n", r.iterations_run);
            (r.hard_bits, info, rep)
        }
        Mode::Ldpc => {
            let h = load_ldpc(&cfg)?;
            check_len("LDPC LLRs", h.n(), llrs.len())?;
            let dec = LdpcDecoder::new(&h, kernel(&cfg), ldpc_config(&cfg))
                .map_err(|e| CliError::Config(e.to_string()))?;
            let r = dec.decode(&llrs).map_err(|e| CliError::Config(e.to_string()))?;
            let rep = count_report(
                &r.counters,
                ReportContext::Ldpc {
                    block_len: h.n(),
                    edges: h.edges(),
                    iterations: r.iterations_used as u64,
                },
            );
            let info = format!("iterations_used: {}\nconverged: {}\n", r.iterations_used, r.converged);
            (r.hard_bits, info, rep)
        }
    };
    g.emit(cfg.output.as_deref(), &lines(&bits))?;
    if let Some(path) = report_path {
        std::fs::write(path, report.to_csv()).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    }
    g.info(cfg.output.as_deref(), &format!("{info}{report}"));
    Ok(())
}

pub fn sweep(g: &Global) -> Result<(), CliError> {
    let cfg = g.load_config()?;
    let sweep_cfg = SweepConfig {
        ebn0_db: cfg.ebn0_db.clone(),
        seed: cfg.seed,
        max_frames: cfg.sweep.frames,
        min_frame_errors: cfg.sweep.min_frame_errors,
        batch: cfg.sweep.batch,
        threads: g.threads.unwrap_or(0),
        kernel: kernel(&cfg),
    };
    let result = match cfg.mode {
        Mode::Turbo => {
            let tc = build_turbo(&cfg)?;
            let setup = CodeSetup::Turbo {
                trellis: &tc.trellis,
                perm: &tc.perm,
                config: turbo_config(&cfg),
            };
            run_sweep(&setup, &sweep_cfg)
        }
        Mode::Ldpc => {
            let h = load_ldpc(&cfg)?;
            let payload = if cfg.ldpc.encode {
                LdpcPayload::Encode(LdpcEncoder::new(&h).map_err(|e| CliError::Config(e.to_string()))?)
            } else {
                LdpcPayload::AllZero
            };
            let setup = CodeSetup::Ldpc {
                h: &h,
                config: ldpc_config(&cfg),
                payload,
            };
            run_sweep(&setup, &sweep_cfg)
        }
    }
    .map_err(|e| CliError::Config(e.to_string()))?;

    let mut csv = String::new();
    for line in cfg.echo() {
        let _ = writeln!(csv, "# config: {line}");
    }
    csv.push_str(&result.to_csv());
    g.emit(cfg.output.as_deref(), &csv)?;
    if let Some(budget) = cfg.sweep.fail_budget {
        let failures = result.total_frame_errors();
        if failures > budget {
            return Err(CliError::Budget(format!(
                "decode-failure budget exceeded: {failures} frame errors > sweep.fail_budget = {budget}"
            )));
        }
    }
    Ok(())
}

pub fn report(g: &Global) -> Result<(), CliError> {
    let cfg = g.load_config()?;
    let mut text = match cfg.mode {
        Mode::Turbo => {
            let tc = build_turbo(&cfg)?;
            let k = tc.perm.size();
            let m = tc.trellis.memory();
            let llrs = TurboLlrs::from_stream(&vec![4.0; 3 * k + 4 * m], k, m)
                .map_err(|e| CliError::Config(e.to_string()))?;
            let dec = TurboDecoder::new(&tc.trellis, &tc.perm, kernel(&cfg), turbo_config(&cfg))
                .map_err(|e| CliError::Config(e.to_string()))?;
            let r = dec.decode(&llrs).map_err(|e| CliError::Config(e.to_string()))?;
            let passes = r.siso_passes;
            let mut s = count_report(
                &r.counters,
                ReportContext::Turbo {
                    block_len: k,
                    memory: m,
                    butterflies: dec.siso().butterflies().len(),
                    siso_passes: passes,
                },
            )
            .to_string();
            let _ = writeln!(
                s,
                "per siso pass: ALPHA {} BetaLLR {} (of which tail steps {})",
                r.counters.alpha / passes,
                r.counters.beta_llr / passes,
                dec.siso().butterflies().len() * m
            );
            s
        }
        Mode::Ldpc => {
            let h = load_ldpc(&cfg)?;
            let dec = LdpcDecoder::new(&h, kernel(&cfg), ldpc_config(&cfg))
                .map_err(|e| CliError::Config(e.to_string()))?;
            let r = dec.decode(&vec![4.0; h.n()]).map_err(|e| CliError::Config(e.to_string()))?;
            let iters = r.iterations_used as u64;
            let mut s = count_report(
                &r.counters,
                ReportContext::Ldpc {
                    block_len: h.n(),
                    edges: h.edges(),
                    iterations: iters,
                },
            )
            .to_string();
            let _ = writeln!(
                s,
                "per iteration: ALPHA {} BetaLLR {}",
                r.counters.alpha / iters,
                r.counters.beta_llr / iters
            );
            s
        }
    };
    text.push_str("throughput model:\n");
    for reference in [TURBO_HARDWARE_REFERENCE, LDPC_HARDWARE_REFERENCE] {
        let check = ThroughputCheck::evaluate(reference).map_err(|e| CliError::Config(e.to_string()))?;
        let _ = writeln!(text, "  {check}");
    }
    g.emit(None, &text)
}

pub fn throughput(g: &Global, bits: f64, clock: f64, cycles: f64, iterations: f64) -> Result<(), CliError> {
    let bps = throughput_model(bits, clock, cycles, iterations).map_err(|e| CliError::Usage(e.to_string()))?;
    g.emit(None, &format!("{:.4} Mbps\n", bps / 1e6))
}
