//! Flat `key = value` run configuration.
//!
//! ```text
//! # comment
//! mode = turbo
//! turbo.k = 1024
//! channel.ebn0_db = 0.5, 1.0, 1.5
//! ```
//!
//! Keys are dotted, values run to end of line (a trailing `# ...` is
//! stripped), lists are comma separated. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use unidec::kernel::{MaxStarMode, QuantSpec};
use unidec::turbo::{BetaInit, DEFAULT_WINDOW};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Turbo,
    Ldpc,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InterleaverSpec {
    /// QPP parameters looked up from the LTE table by block size.
    Lte,
    Qpp { f1: u64, f2: u64 },
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CodeSource {
    Builtin(&'static str),
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CodeFormat {
    Auto,
    Alist,
    Base,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TurboSection {
    pub k: usize,
    pub feedback_oct: u32,
    pub forward_oct: u32,
    pub memory: usize,
    pub interleaver: InterleaverSpec,
    pub iterations: usize,
    pub window: usize,
    pub beta_init: BetaInit,
    pub extrinsic_scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LdpcSection {
    pub code: CodeSource,
    pub format: CodeFormat,
    pub iterations: usize,
    pub early_stop: bool,
    pub encode: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSection {
    pub frames: u64,
    pub min_frame_errors: Option<u64>,
    pub batch: u64,
    pub fail_budget: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub turbo: TurboSection,
    pub ldpc: LdpcSection,
    pub max_star: MaxStarMode,
    pub normalize: bool,
    pub quant: Option<QuantSpec>,
    pub ebn0_db: Vec<f64>,
    pub seed: u64,
    pub sweep: SweepSection,
    pub output: Option<PathBuf>,
    /// Every key as written, for echoing into outputs.
    pub entries: BTreeMap<String, String>,
}

pub const BUILTIN_WLAN: &str = "wlan-648-r12";

const KEYS: &[&str] = &[
    "mode",
    "turbo.k",
    "trellis.feedback_oct",
    "trellis.forward_oct",
    "trellis.memory",
    "interleaver.kind",
    "interleaver.f1",
    "interleaver.f2",
    "interleaver.file",
    "turbo.iterations",
    "turbo.window",
    "turbo.beta_init",
    "turbo.extrinsic_scale",
    "ldpc.code",
    "ldpc.format",
    "ldpc.iterations",
    "ldpc.early_stop",
    "ldpc.encode",
    "decoder.max_star",
    "decoder.normalize",
    "quant.enabled",
    "quant.total_bits",
    "quant.frac_bits",
    "channel.ebn0_db",
    "channel.seed",
    "sweep.frames",
    "sweep.min_frame_errors",
    "sweep.batch",
    "sweep.fail_budget",
    "output.path",
];

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    /// Parses `text`; relative file paths resolve against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Config(format!("line {}: expected `key = value`", n + 1)));
            };
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(CliError::Config(format!("line {}: unknown key `{key}`", n + 1)));
            }
            if entries.insert(key.to_string(), value.to_string()).is_some() {
                return Err(CliError::Config(format!("line {}: duplicate key `{key}`", n + 1)));
            }
        }
        let v = Values {
            entries: &entries,
            base_dir,
        };

        let mode = match v.str("mode").ok_or_else(|| CliError::Config("missing `mode`".into()))? {
            "turbo" => Mode::Turbo,
            "ldpc" => Mode::Ldpc,
            other => return Err(CliError::Config(format!("mode `{other}`: expected turbo or ldpc"))),
        };

        let interleaver = match v.str("interleaver.kind").unwrap_or("lte") {
            "lte" => InterleaverSpec::Lte,
            "qpp" => InterleaverSpec::Qpp {
                f1: v.required("interleaver.f1")?,
                f2: v.required("interleaver.f2")?,
            },
            "file" => InterleaverSpec::File(
                v.path("interleaver.file")
                    .ok_or_else(|| CliError::Config("interleaver.kind = file needs interleaver.file".into()))?,
            ),
            other => {
                return Err(CliError::Config(format!(
                    "interleaver.kind `{other}`: expected lte, qpp or file"
                )))
            }
        };
        let turbo = TurboSection {
            k: v.num("turbo.k", 1024)?,
            feedback_oct: v.octal("trellis.feedback_oct", 0o13)?,
            forward_oct: v.octal("trellis.forward_oct", 0o15)?,
            memory: v.num("trellis.memory", 3)?,
            interleaver,
            iterations: v.num("turbo.iterations", 6)?,
            window: v.num("turbo.window", DEFAULT_WINDOW)?,
            beta_init: match v.str("turbo.beta_init").unwrap_or("acquisition") {
                "acquisition" => BetaInit::Acquisition,
                "termination" => BetaInit::Termination,
                other => {
                    return Err(CliError::Config(format!(
                        "turbo.beta_init `{other}`: expected acquisition or termination"
                    )))
                }
            },
            extrinsic_scale: v.num("turbo.extrinsic_scale", 1.0)?,
        };
        let ldpc = LdpcSection {
            code: match v.str("ldpc.code").unwrap_or(BUILTIN_WLAN) {
                BUILTIN_WLAN => CodeSource::Builtin(BUILTIN_WLAN),
                _ => CodeSource::File(v.path("ldpc.code").expect("key present")),
            },
            format: match v.str("ldpc.format").unwrap_or("auto") {
                "auto" => CodeFormat::Auto,
                "alist" => CodeFormat::Alist,
                "base" => CodeFormat::Base,
                other => {
                    return Err(CliError::Config(format!(
                        "ldpc.format `{other}`: expected auto, alist or base"
                    )))
                }
            },
            iterations: v.num("ldpc.iterations", 5)?,
            early_stop: v.flag("ldpc.early_stop", false)?,
            encode: v.flag("ldpc.encode", false)?,
        };
        let max_star = match v.str("decoder.max_star").unwrap_or("maxlog") {
            "maxlog" => MaxStarMode::MaxLog,
            "exact" => MaxStarMode::Exact,
            other => {
                return Err(CliError::Config(format!(
                    "decoder.max_star `{other}`: expected maxlog or exact"
                )))
            }
        };
        let quant = if v.flag("quant.enabled", false)? {
            Some(
                QuantSpec::new(v.num("quant.total_bits", 10)?, v.num("quant.frac_bits", 2)?)
                    .map_err(|e| CliError::Config(e.to_string()))?,
            )
        } else {
            None
        };
        let ebn0_db = match v.str("channel.ebn0_db") {
            Some(list) => list
                .split(',')
                .map(|x| {
                    x.trim()
                        .parse::<f64>()
                        .map_err(|e| CliError::Config(format!("channel.ebn0_db `{x}`: {e}")))
                })
                .collect::<Result<Vec<_>, _>>()?,
            None => vec![1.0],
        };
        let sweep = SweepSection {
            frames: v.num("sweep.frames", 1000)?,
            min_frame_errors: v.opt("sweep.min_frame_errors")?,
            batch: v.num("sweep.batch", 64)?,
            fail_budget: v.opt("sweep.fail_budget")?,
        };
        let cfg = RunConfig {
            mode,
            turbo,
            ldpc,
            max_star,
            normalize: v.flag("decoder.normalize", true)?,
            quant,
            ebn0_db,
            seed: v.num("channel.seed", 1)?,
            sweep,
            output: v.path("output.path"),
            entries: entries.clone(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        match self.mode {
            Mode::Turbo => {
                let t = &self.turbo;
                if t.k < 2 {
                    return bad(format!("turbo.k = {} must be at least 2", t.k));
                }
                if t.iterations == 0 || t.window == 0 {
                    return bad("turbo.iterations and turbo.window must be at least 1".into());
                }
                if !(t.extrinsic_scale > 0.0 && t.extrinsic_scale <= 1.0) {
                    return bad(format!("turbo.extrinsic_scale = {} outside (0, 1]", t.extrinsic_scale));
                }
                if let InterleaverSpec::File(p) = &t.interleaver {
                    if !p.is_file() {
                        return Err(CliError::Io(format!("interleaver file {} not found", p.display())));
                    }
                }
            }
            Mode::Ldpc => {
                if self.ldpc.iterations == 0 {
                    return bad("ldpc.iterations must be at least 1".into());
                }
                if let CodeSource::File(p) = &self.ldpc.code {
                    if !p.is_file() {
                        return Err(CliError::Io(format!("code file {} not found", p.display())));
                    }
                }
            }
        }
        if self.ebn0_db.is_empty() || self.ebn0_db.iter().any(|e| !e.is_finite()) {
            return bad("channel.ebn0_db needs finite values".into());
        }
        if self.sweep.frames == 0 || self.sweep.batch == 0 {
            return bad("sweep.frames and sweep.batch must be at least 1".into());
        }
        Ok(())
    }

    /// Config entries as `key = value` lines, for output metadata.
    pub fn echo(&self) -> Vec<String> {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}")).collect()
    }
}

struct Values<'a> {
    entries: &'a BTreeMap<String, String>,
    base_dir: &'a Path,
}

impl Values<'_> {
    fn str(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    fn opt<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.str(key)
            .map(|s| {
                s.parse::<T>()
                    .map_err(|e| CliError::Config(format!("{key} = `{s}`: {e}")))
            })
            .transpose()
    }

    fn num<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.opt(key)?.unwrap_or(default))
    }

    fn required<T: std::str::FromStr>(&self, key: &str) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.opt(key)?
            .ok_or_else(|| CliError::Config(format!("missing `{key}`")))
    }

    fn octal(&self, key: &str, default: u32) -> Result<u32, CliError> {
        self.str(key).map_or(Ok(default), |s| {
            u32::from_str_radix(s, 8).map_err(|e| CliError::Config(format!("{key} = `{s}` (octal): {e}")))
        })
    }

    fn flag(&self, key: &str, default: bool) -> Result<bool, CliError> {
        match self.str(key) {
            None => Ok(default),
            Some("true" | "on" | "yes" | "1") => Ok(true),
            Some("false" | "off" | "no" | "0") => Ok(false),
            Some(other) => Err(CliError::Config(format!("{key} = `{other}`: expected true or false"))),
        }
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.str(key).map(|s| self.base_dir.join(s))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig, CliError> {
        RunConfig::parse(text, Path::new("."))
    }

    #[test]
    fn defaults_and_overrides() {
        let c = parse("mode = turbo\nturbo.k = 40 # small\nchannel.ebn0_db = 0.5, 1.5\n").unwrap();
        assert_eq!(c.mode, Mode::Turbo);
        assert_eq!(c.turbo.k, 40);
        assert_eq!(c.turbo.feedback_oct, 0o13);
        assert_eq!(c.turbo.window, 64);
        assert_eq!(c.ebn0_db, vec![0.5, 1.5]);
        assert_eq!(c.max_star, MaxStarMode::MaxLog);
        assert!(c.normalize);
        assert_eq!(c.echo(), vec!["channel.ebn0_db = 0.5, 1.5", "mode = turbo", "turbo.k = 40"]);

        let c = parse("mode = ldpc\nldpc.early_stop = true\ndecoder.max_star = exact\nquant.enabled = on\n").unwrap();
        assert_eq!(c.ldpc.code, CodeSource::Builtin(BUILTIN_WLAN));
        assert!(c.ldpc.early_stop);
        assert_eq!(c.max_star, MaxStarMode::Exact);
        assert_eq!(c.quant.unwrap().total_bits(), 10);
    }

    #[test]
    fn rejects_bad_configs() {
        for text in [
            "",
            "mode = viterbi",
            "mode = turbo\nturbo.k = 1",
            "mode = turbo\nturbo.window = 0",
            "mode = turbo\nturbo.k = x",
            "mode = turbo\nbogus.key = 1",
            "mode = turbo\nmode = ldpc",
            "mode = turbo\ninterleaver.kind = qpp\ninterleaver.f1 = 3",
            "mode = ldpc\nldpc.iterations = 0",
            "mode = ldpc\nsweep.frames = 0",
            "mode = ldpc\nldpc.early_stop = maybe",
            "mode = turbo\ntrellis.feedback_oct = 19",
            "just text",
        ] {
            assert!(matches!(parse(text), Err(CliError::Config(_))), "{text:?}");
        }
        assert!(matches!(
            parse("mode = ldpc\nldpc.code = /nonexistent/code.alist"),
            Err(CliError::Io(_))
        ));
    }
}
