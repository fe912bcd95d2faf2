//! Sliding-window max-log-MAP SISO decoding and the iterative turbo loop.
//!
//! Each trellis step evaluates four butterflies on the 8-state LTE trellis:
//! one [`MetricKernel::alpha_step`] per butterfly in the forward sweep and
//! one [`MetricKernel::beta_llr_step`] per butterfly in the backward sweep.
//! The backward call returns two partial maxima per butterfly; adding and
//! subtracting the butterfly's branch value and taking `max*` across
//! butterflies gives the a-posteriori LLR of the step.
//!
//! Metrics live in the natural log-probability domain: a channel LLR `L`
//! contributes `+-L/2` to a branch, which keeps the `Exact` mode a true
//! log-MAP and makes `max0 - max1` an LLR without rescaling.

use thiserror::Error;

use crate::convention::hard_decision;
use crate::instrument::{OpCounters, OpKind};
use crate::kernel::{normalize_metrics, Kernel, KernelError, MetricKernel, MetricPair, NEG_INF};
use crate::trellis::{
    branch_metric_pair, derive_butterflies, ButterflyPair, Permutation, Trellis, TrellisError,
};
use crate::{Bit, Llr, Metric};

/// Default window length.
pub const DEFAULT_WINDOW: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TurboError {
    #[error("empty input block")]
    EmptyInput,
    #[error("{what}: expected length {expected}, got {actual}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("iteration count must be at least 1")]
    ZeroIterations,
    #[error("window length must be at least 1")]
    ZeroWindow,
    #[error(transparent)]
    Trellis(#[from] TrellisError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// How the backward metrics at an interior window boundary are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BetaInit {
    /// Warm up over the following `W` steps starting from equal metrics.
    #[default]
    Acquisition,
    /// Exact: every boundary is reached by the backward recursion from the
    /// terminated block end. The final window always uses termination.
    Termination,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowConfig {
    pub window_len: usize,
    pub beta_init: BetaInit,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            window_len: DEFAULT_WINDOW,
            beta_init: BetaInit::Acquisition,
        }
    }
}

impl WindowConfig {
    pub fn new(window_len: usize, beta_init: BetaInit) -> Self {
        Self {
            window_len,
            beta_init,
        }
    }

    /// One window spanning the whole block, terminated.
    pub fn full_block() -> Self {
        Self::new(usize::MAX, BetaInit::Termination)
    }
}

/// Soft inputs of one constituent decoder.
#[derive(Debug, Clone, Copy)]
pub struct SisoInput<'a> {
    pub l_sys: &'a [Llr],
    pub l_apriori: &'a [Llr],
    pub l_parity: &'a [Llr],
    pub tail_sys: &'a [Llr],
    pub tail_parity: &'a [Llr],
}

impl SisoInput<'_> {
    pub fn block_len(&self) -> usize {
        self.l_sys.len()
    }

    fn validate(&self, memory: usize) -> Result<(), TurboError> {
        let k = self.l_sys.len();
        if k == 0 {
            return Err(TurboError::EmptyInput);
        }
        for (what, len, want) in [
            ("a-priori LLRs", self.l_apriori.len(), k),
            ("parity LLRs", self.l_parity.len(), k),
            ("tail systematic LLRs", self.tail_sys.len(), memory),
            ("tail parity LLRs", self.tail_parity.len(), memory),
        ] {
            if len != want {
                return Err(TurboError::LengthMismatch {
                    what,
                    expected: want,
                    actual: len,
                });
            }
        }
        Ok(())
    }
}

/// Per-step branch values `(gamma1, gamma2)` in the log-probability domain,
/// data steps followed by tail steps.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchMetrics {
    gammas: Vec<(Metric, Metric)>,
    /// `l_sys + l_apriori` per data step.
    sys_apriori: Vec<Llr>,
}

impl BranchMetrics {
    pub fn block_len(&self) -> usize {
        self.sys_apriori.len()
    }

    pub fn steps(&self) -> usize {
        self.gammas.len()
    }

    pub fn gamma(&self, step: usize) -> (Metric, Metric) {
        self.gammas[step]
    }
}

/// Forward metrics `alpha_start ..= alpha_end` of one window, `num_states`
/// values per row.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaWindow {
    pub start: usize,
    num_states: usize,
    rows: Vec<Metric>,
}

impl AlphaWindow {
    /// Forward metrics at absolute step `k`.
    pub fn at(&self, k: usize) -> &[Metric] {
        let i = (k - self.start) * self.num_states;
        &self.rows[i..i + self.num_states]
    }

    /// Last step covered (inclusive).
    pub fn end(&self) -> usize {
        self.start + self.rows.len() / self.num_states - 1
    }
}

/// A-posteriori LLRs of one window and the backward metrics at its start.
#[derive(Debug, Clone, PartialEq)]
pub struct BackwardOutput {
    pub llr_app: Vec<Llr>,
    pub beta_start: Vec<Metric>,
}

/// One constituent SISO decoder bound to a trellis and a kernel.
#[derive(Debug, Clone)]
pub struct Siso<'t, K> {
    trellis: &'t Trellis,
    butterflies: Vec<ButterflyPair>,
    kernel: K,
    window: WindowConfig,
    normalize: bool,
    extrinsic_scale: f64,
}

impl<'t, K: MetricKernel> Siso<'t, K> {
    pub fn new(trellis: &'t Trellis, kernel: K, window: WindowConfig) -> Result<Self, TurboError> {
        if window.window_len == 0 {
            return Err(TurboError::ZeroWindow);
        }
        Ok(Self {
            trellis,
            butterflies: derive_butterflies(trellis)?,
            kernel,
            window,
            normalize: true,
            extrinsic_scale: 1.0,
        })
    }

    /// Enables or disables per-step metric normalization (on by default).
    pub fn with_normalization(mut self, on: bool) -> Self {
        self.normalize = on;
        self
    }

    pub fn with_extrinsic_scale(mut self, scale: f64) -> Self {
        self.extrinsic_scale = scale;
        self
    }

    pub fn butterflies(&self) -> &[ButterflyPair] {
        &self.butterflies
    }

    pub fn kernel(&self) -> &K {
        &self.kernel
    }

    fn num_states(&self) -> usize {
        self.trellis.num_states()
    }

    fn terminated_start(&self) -> Vec<Metric> {
        let mut v = vec![NEG_INF; self.num_states()];
        v[0] = 0.0;
        v
    }

    fn renormalize(&self, metrics: &mut [Metric], ops: &mut OpCounters) -> Result<(), TurboError> {
        if self.normalize {
            normalize_metrics(metrics)?;
            ops.record(OpKind::Max, metrics.len() as u64 - 1);
            ops.record(OpKind::Sub, metrics.len() as u64);
        }
        Ok(())
    }

    /// Halves the channel LLRs into log-probability units and forms the two
    /// branch values of every step.
    pub fn branch_metrics(
        &self,
        input: &SisoInput<'_>,
        ops: &mut OpCounters,
    ) -> Result<BranchMetrics, TurboError> {
        input.validate(self.trellis.memory())?;
        let k = input.block_len();
        let m = self.trellis.memory();
        let mut gammas = Vec::with_capacity(k + m);
        let mut sys_apriori = Vec::with_capacity(k);
        for i in 0..k {
            let a = input.l_sys[i] + input.l_apriori[i];
            sys_apriori.push(a);
            gammas.push(branch_metric_pair(0.5 * a, 0.5 * input.l_parity[i]));
        }
        for j in 0..m {
            gammas.push(branch_metric_pair(0.5 * input.tail_sys[j], 0.5 * input.tail_parity[j]));
        }
        ops.record(OpKind::Add, (2 * k + m) as u64);
        ops.record(OpKind::Sub, (k + m) as u64);
        Ok(BranchMetrics {
            gammas,
            sys_apriori,
        })
    }

    /// Forward recursion over `steps`, starting from `alpha_start` at
    /// `steps.start`. One `alpha_step` per butterfly per step.
    pub fn forward_sweep(
        &self,
        bm: &BranchMetrics,
        steps: std::ops::Range<usize>,
        alpha_start: &[Metric],
        ops: &mut OpCounters,
    ) -> Result<AlphaWindow, TurboError> {
        let s = self.num_states();
        let mut rows = Vec::with_capacity((steps.len() + 1) * s);
        rows.extend_from_slice(alpha_start);
        let mut next = vec![NEG_INF; s];
        for k in steps.clone() {
            let (g1, g2) = bm.gammas[k];
            let cur = &rows[rows.len() - s..];
            for b in &self.butterflies {
                let (p0, p1) = b.prev_states;
                let (n0, n1) = b.next_states;
                let out = self
                    .kernel
                    .alpha_step(MetricPair::new(cur[p0], cur[p1]), b.lam(g1, g2), ops);
                next[n0] = out.m0;
                next[n1] = out.m1;
            }
            self.renormalize(&mut next, ops)?;
            rows.extend_from_slice(&next);
        }
        Ok(AlphaWindow {
            start: steps.start,
            num_states: s,
            rows,
        })
    }

    /// Backward recursion over `steps` (processed last to first) fused with
    /// the a-posteriori LLR of every step. `beta_end` holds the backward
    /// metrics at `steps.end`; `alphas` must cover `steps`.
    pub fn backward_llr_sweep(
        &self,
        bm: &BranchMetrics,
        steps: std::ops::Range<usize>,
        alphas: &AlphaWindow,
        beta_end: &[Metric],
        ops: &mut OpCounters,
    ) -> Result<BackwardOutput, TurboError> {
        let s = self.num_states();
        let nb = self.butterflies.len() as u64;
        let mut beta = beta_end.to_vec();
        let mut prev = vec![NEG_INF; s];
        let mut llr_app = vec![0.0; steps.len()];
        for k in steps.clone().rev() {
            let (g1, g2) = bm.gammas[k];
            let alpha = alphas.at(k);
            let mut best0 = NEG_INF;
            let mut best1 = NEG_INF;
            for (i, b) in self.butterflies.iter().enumerate() {
                let (p0, p1) = b.prev_states;
                let (n0, n1) = b.next_states;
                let lam = b.lam(g1, g2);
                let r = self.kernel.beta_llr_step(
                    MetricPair::new(beta[n0], beta[n1]),
                    MetricPair::new(alpha[p0], alpha[p1]),
                    lam,
                    ops,
                );
                prev[p0] = r.beta_cur.m0;
                prev[p1] = r.beta_cur.m1;
                let straight = r.out1 + lam;
                let crossed = r.out2 - lam;
                let (c0, c1) = if b.u_straight == 0 {
                    (straight, crossed)
                } else {
                    (crossed, straight)
                };
                if i == 0 {
                    best0 = c0;
                    best1 = c1;
                } else {
                    best0 = self.kernel.max_star(best0, c0);
                    best1 = self.kernel.max_star(best1, c1);
                }
            }
            ops.record(OpKind::Add, nb);
            ops.record(OpKind::Sub, nb + 1);
            ops.record(OpKind::Max, 2 * (nb - 1));
            llr_app[k - steps.start] = best0 - best1;
            self.renormalize(&mut prev, ops)?;
            std::mem::swap(&mut beta, &mut prev);
        }
        Ok(BackwardOutput {
            llr_app,
            beta_start: beta,
        })
    }

    /// Backward recursion without outputs, charged to the acquisition tally.
    fn acquire(
        &self,
        bm: &BranchMetrics,
        steps: std::ops::Range<usize>,
        beta_end: &[Metric],
        ops: &mut OpCounters,
    ) -> Result<Vec<Metric>, TurboError> {
        let mut scratch = OpCounters::new();
        let mut beta = beta_end.to_vec();
        let mut prev = vec![NEG_INF; self.num_states()];
        for k in steps.rev() {
            let (g1, g2) = bm.gammas[k];
            for b in &self.butterflies {
                let (p0, p1) = b.prev_states;
                let (n0, n1) = b.next_states;
                let r = self
                    .kernel
                    .alpha_step(MetricPair::new(beta[n0], beta[n1]), b.lam(g1, g2), &mut scratch);
                prev[p0] = r.m0;
                prev[p1] = r.m1;
            }
            self.renormalize(&mut prev, &mut scratch)?;
            std::mem::swap(&mut beta, &mut prev);
        }
        ops.record(OpKind::Acquisition, scratch.alpha);
        ops.record(OpKind::Max, scratch.max);
        ops.record(OpKind::Sub, scratch.sub);
        Ok(beta)
    }

    /// A-posteriori LLRs of the data steps, window by window.
    pub fn decode_app(
        &self,
        input: &SisoInput<'_>,
        ops: &mut OpCounters,
    ) -> Result<(BranchMetrics, Vec<Llr>), TurboError> {
        let bm = self.branch_metrics(input, ops)?;
        let k_len = bm.block_len();
        let total = bm.steps();
        let w = self.window.window_len.min(k_len);
        let s = self.num_states();

        // Backward through the tail from the terminated end state.
        let mut beta_k = self.terminated_start();
        {
            let mut prev = vec![NEG_INF; s];
            let zero_alpha = vec![0.0; s];
            for k in (k_len..total).rev() {
                let (g1, g2) = bm.gammas[k];
                for b in &self.butterflies {
                    let (p0, p1) = b.prev_states;
                    let (n0, n1) = b.next_states;
                    let r = self.kernel.beta_llr_step(
                        MetricPair::new(beta_k[n0], beta_k[n1]),
                        MetricPair::new(zero_alpha[p0], zero_alpha[p1]),
                        b.lam(g1, g2),
                        ops,
                    );
                    prev[p0] = r.beta_cur.m0;
                    prev[p1] = r.beta_cur.m1;
                }
                self.renormalize(&mut prev, ops)?;
                std::mem::swap(&mut beta_k, &mut prev);
            }
        }

        let starts: Vec<usize> = (0..k_len).step_by(w).collect();
        let exact_boundaries = if self.window.beta_init == BetaInit::Termination && starts.len() > 1 {
            let mut bounds = vec![Vec::new(); starts.len()];
            let mut beta = beta_k.clone();
            for (i, &start) in starts.iter().enumerate().skip(1).rev() {
                let end = (start + w).min(k_len);
                beta = self.acquire(&bm, start..end, &beta, ops)?;
                bounds[i - 1] = beta.clone();
            }
            Some(bounds)
        } else {
            None
        };

        let mut llr_app = Vec::with_capacity(k_len);
        let mut alpha_start = self.terminated_start();
        for (i, &start) in starts.iter().enumerate() {
            let end = (start + w).min(k_len);
            let last = end == k_len;
            let fwd_end = if last { total } else { end };
            let alphas = self.forward_sweep(&bm, start..fwd_end, &alpha_start, ops)?;
            let beta_end = if last {
                beta_k.clone()
            } else if let Some(bounds) = &exact_boundaries {
                bounds[i].clone()
            } else {
                let from = (end + w).min(k_len);
                let init = if from == k_len {
                    beta_k.clone()
                } else {
                    vec![0.0; s]
                };
                self.acquire(&bm, end..from, &init, ops)?
            };
            let out = self.backward_llr_sweep(&bm, start..end, &alphas, &beta_end, ops)?;
            llr_app.extend_from_slice(&out.llr_app);
            alpha_start = alphas.at(end).to_vec();
        }
        Ok((bm, llr_app))
    }

    /// Extrinsic LLRs: `scale * (LLR_app - (l_sys + l_apriori))`.
    pub fn decode(&self, input: &SisoInput<'_>, ops: &mut OpCounters) -> Result<Vec<Llr>, TurboError> {
        let (bm, app) = self.decode_app(input, ops)?;
        ops.record(OpKind::Sub, app.len() as u64);
        Ok(app
            .iter()
            .zip(&bm.sys_apriori)
            .map(|(l, a)| self.extrinsic_scale * (l - a))
            .collect())
    }
}

/// Channel LLRs of one turbo codeword.
#[derive(Debug, Clone, PartialEq)]
pub struct TurboLlrs {
    pub sys: Vec<Llr>,
    pub par1: Vec<Llr>,
    pub par2: Vec<Llr>,
    pub tail1_sys: Vec<Llr>,
    pub tail1_par: Vec<Llr>,
    pub tail2_sys: Vec<Llr>,
    pub tail2_par: Vec<Llr>,
}

impl TurboLlrs {
    /// Splits a stream laid out as [`crate::trellis::TurboCodeword::to_stream`].
    pub fn from_stream(stream: &[Llr], block_len: usize, memory: usize) -> Result<Self, TurboError> {
        let want = 3 * block_len + 4 * memory;
        if stream.len() != want {
            return Err(TurboError::LengthMismatch {
                what: "turbo LLR stream",
                expected: want,
                actual: stream.len(),
            });
        }
        let mut rest = stream;
        let mut take = |n: usize| {
            let (head, tail) = rest.split_at(n);
            rest = tail;
            head.to_vec()
        };
        Ok(Self {
            sys: take(block_len),
            par1: take(block_len),
            par2: take(block_len),
            tail1_sys: take(memory),
            tail1_par: take(memory),
            tail2_sys: take(memory),
            tail2_par: take(memory),
        })
    }

    pub fn block_len(&self) -> usize {
        self.sys.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TurboConfig {
    pub iterations: usize,
    pub window: WindowConfig,
    pub normalize: bool,
    pub extrinsic_scale: f64,
}

impl Default for TurboConfig {
    fn default() -> Self {
        Self {
            iterations: 6,
            window: WindowConfig::default(),
            normalize: true,
            extrinsic_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TurboResult {
    pub hard_bits: Vec<Bit>,
    pub app_llrs: Vec<Llr>,
    pub iterations_run: usize,
    pub siso_passes: u64,
    pub counters: OpCounters,
}

/// Iterative decoder: two SISOs exchanging extrinsic information through
/// the interleaver.
#[derive(Debug, Clone)]
pub struct TurboDecoder<'a, K> {
    siso: Siso<'a, K>,
    perm: &'a Permutation,
    iterations: usize,
}

impl<'a, K: MetricKernel> TurboDecoder<'a, K> {
    pub fn new(
        trellis: &'a Trellis,
        perm: &'a Permutation,
        kernel: K,
        config: TurboConfig,
    ) -> Result<Self, TurboError> {
        if config.iterations == 0 {
            return Err(TurboError::ZeroIterations);
        }
        let siso = Siso::new(trellis, kernel, config.window)?
            .with_normalization(config.normalize)
            .with_extrinsic_scale(config.extrinsic_scale);
        Ok(Self {
            siso,
            perm,
            iterations: config.iterations,
        })
    }

    pub fn siso(&self) -> &Siso<'a, K> {
        &self.siso
    }

    pub fn decode(&self, llrs: &TurboLlrs) -> Result<TurboResult, TurboError> {
        let k = self.perm.size();
        let m = self.siso.trellis.memory();
        for (what, len, want) in [
            ("systematic LLRs", llrs.sys.len(), k),
            ("parity-1 LLRs", llrs.par1.len(), k),
            ("parity-2 LLRs", llrs.par2.len(), k),
            ("tail-1 systematic LLRs", llrs.tail1_sys.len(), m),
            ("tail-1 parity LLRs", llrs.tail1_par.len(), m),
            ("tail-2 systematic LLRs", llrs.tail2_sys.len(), m),
            ("tail-2 parity LLRs", llrs.tail2_par.len(), m),
        ] {
            if len != want {
                return Err(TurboError::LengthMismatch {
                    what,
                    expected: want,
                    actual: len,
                });
            }
        }

        let mut ops = OpCounters::new();
        let sys2 = self.perm.interleave(&llrs.sys);
        let mut apriori1 = vec![0.0; k];
        let mut apriori2 = vec![0.0; k];
        let mut ext2 = vec![0.0; k];
        for _ in 0..self.iterations {
            let ext1 = self.siso.decode(
                &SisoInput {
                    l_sys: &llrs.sys,
                    l_apriori: &apriori1,
                    l_parity: &llrs.par1,
                    tail_sys: &llrs.tail1_sys,
                    tail_parity: &llrs.tail1_par,
                },
                &mut ops,
            )?;
            apriori2 = self.perm.interleave(&ext1);
            ext2 = self.siso.decode(
                &SisoInput {
                    l_sys: &sys2,
                    l_apriori: &apriori2,
                    l_parity: &llrs.par2,
                    tail_sys: &llrs.tail2_sys,
                    tail_parity: &llrs.tail2_par,
                },
                &mut ops,
            )?;
            apriori1 = self.perm.deinterleave(&ext2);
        }
        let app2: Vec<Llr> = (0..k).map(|i| sys2[i] + apriori2[i] + ext2[i]).collect();
        ops.record(OpKind::Add, 2 * k as u64);
        let app_llrs = self.perm.deinterleave(&app2);
        let hard_bits: Vec<Bit> = app_llrs.iter().map(|&l| hard_decision(l)).collect();
        ops.record(OpKind::Stream, hard_bits.len() as u64);
        Ok(TurboResult {
            hard_bits,
            app_llrs,
            iterations_run: self.iterations,
            siso_passes: 2 * self.iterations as u64,
            counters: ops,
        })
    }
}

/// Convenience wrapper around [`TurboDecoder`] with the floating-point kernel.
pub fn turbo_decode(
    llrs: &TurboLlrs,
    perm: &Permutation,
    trellis: &Trellis,
    window: WindowConfig,
    iterations: usize,
    kernel: Kernel,
) -> Result<TurboResult, TurboError> {
    TurboDecoder::new(
        trellis,
        perm,
        kernel,
        TurboConfig {
            iterations,
            window,
            ..TurboConfig::default()
        },
    )?
    .decode(llrs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convention::ideal_llr;
    use crate::kernel::MaxStarMode;
    use crate::trellis::{edge_metric, qpp_interleaver, rsc_encode, turbo_encode};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    struct Owned {
        sys: Vec<Llr>,
        apr: Vec<Llr>,
        par: Vec<Llr>,
        tsys: Vec<Llr>,
        tpar: Vec<Llr>,
    }

    impl Owned {
        fn random(rng: &mut ChaCha8Rng, k: usize, m: usize, mag: f64) -> Self {
            let mut v = |n: usize| (0..n).map(|_| rng.random_range(-mag..mag)).collect::<Vec<_>>();
            Self {
                sys: v(k),
                apr: v(k),
                par: v(k),
                tsys: v(m),
                tpar: v(m),
            }
        }

        fn view(&self) -> SisoInput<'_> {
            SisoInput {
                l_sys: &self.sys,
                l_apriori: &self.apr,
                l_parity: &self.par,
                tail_sys: &self.tsys,
                tail_parity: &self.tpar,
            }
        }
    }

    /// Dense forward recursion over all edges, no butterflies, no kernel.
    fn dense_alpha(t: &Trellis, inp: &Owned, steps: usize) -> Vec<Vec<f64>> {
        let s = t.num_states();
        let mut alpha = vec![f64::NEG_INFINITY; s];
        alpha[0] = 0.0;
        let mut out = vec![alpha.clone()];
        for k in 0..steps {
            let (a, p) = if k < inp.sys.len() {
                (inp.sys[k] + inp.apr[k], inp.par[k])
            } else {
                let j = k - inp.sys.len();
                (inp.tsys[j], inp.tpar[j])
            };
            let mut next = vec![f64::NEG_INFINITY; s];
            for e in t.edges() {
                let v = alpha[e.start_state] + 0.5 * edge_metric(e, a, p);
                next[e.end_state] = next[e.end_state].max(v);
            }
            out.push(next.clone());
            alpha = next;
        }
        out
    }

    /// Max-log LLR by enumerating every terminated input sequence.
    #[allow(clippy::needless_range_loop)]
    fn exhaustive_app(t: &Trellis, inp: &Owned) -> Vec<f64> {
        let k = inp.sys.len();
        let mut best = vec![[f64::NEG_INFINITY; 2]; k];
        for word in 0u32..(1 << k) {
            let bits: Vec<Bit> = (0..k).map(|i| ((word >> i) & 1) as Bit).collect();
            let enc = rsc_encode(&bits, t, true).unwrap();
            let tail = enc.tail.unwrap();
            let mut metric = 0.0;
            for i in 0..k {
                metric += 0.5
                    * (ideal_llr(bits[i], inp.sys[i] + inp.apr[i])
                        + ideal_llr(enc.parity[i], inp.par[i]));
            }
            for j in 0..t.memory() {
                metric += 0.5
                    * (ideal_llr(tail.input[j], inp.tsys[j]) + ideal_llr(tail.parity[j], inp.tpar[j]));
            }
            for i in 0..k {
                let slot = &mut best[i][bits[i] as usize];
                *slot = slot.max(metric);
            }
        }
        best.iter().map(|b| b[0] - b[1]).collect()
    }

    #[test]
    fn forward_sweep_matches_dense_recursion() {
        let t = Trellis::lte();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let inp = Owned::random(&mut rng, 4, 3, 4.0);
            let siso = Siso::new(&t, Kernel::new(MaxStarMode::MaxLog), WindowConfig::full_block())
                .unwrap()
                .with_normalization(false);
            let mut ops = OpCounters::new();
            let bm = siso.branch_metrics(&inp.view(), &mut ops).unwrap();
            let start = siso.terminated_start();
            let aw = siso.forward_sweep(&bm, 0..7, &start, &mut ops).unwrap();
            let dense = dense_alpha(&t, &inp, 7);
            for (k, row) in dense.iter().enumerate() {
                for (s, &v) in row.iter().enumerate() {
                    let got = aw.at(k)[s];
                    if v == f64::NEG_INFINITY {
                        assert!(crate::kernel::is_neg_inf(got));
                    } else {
                        assert!((got - v).abs() < 1e-9, "k={k} s={s} {got} vs {v}");
                    }
                }
            }
            assert_eq!(ops.alpha, 4 * 7);
        }
    }

    #[test]
    fn zero_inputs_give_symmetric_alphas_and_zero_extrinsic() {
        let t = Trellis::lte();
        let z = Owned {
            sys: vec![0.0; 16],
            apr: vec![0.0; 16],
            par: vec![0.0; 16],
            tsys: vec![0.0; 3],
            tpar: vec![0.0; 3],
        };
        let siso = Siso::new(&t, Kernel::default(), WindowConfig::default()).unwrap();
        let mut ops = OpCounters::new();
        let bm = siso.branch_metrics(&z.view(), &mut ops).unwrap();
        let aw = siso.forward_sweep(&bm, 0..16, &siso.terminated_start(), &mut ops).unwrap();
        for k in 3..=16 {
            assert!(aw.at(k).iter().all(|&a| a == 0.0), "step {k}: {:?}", aw.at(k));
        }
        let ext = siso.decode(&z.view(), &mut ops).unwrap();
        assert!(ext.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn siso_matches_exhaustive_oracle() {
        let t = Trellis::lte();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..60 {
            let k = 1 + trial % 8;
            let inp = Owned::random(&mut rng, k, 3, 5.0);
            let want = exhaustive_app(&t, &inp);
            for window in [WindowConfig::full_block(), WindowConfig::new(3, BetaInit::Termination)] {
                let siso = Siso::new(&t, Kernel::default(), window).unwrap();
                let (_, app) = siso.decode_app(&inp.view(), &mut OpCounters::new()).unwrap();
                for (g, w) in app.iter().zip(&want) {
                    assert!((g - w).abs() < 1e-9, "k={k} {app:?} vs {want:?}");
                }
            }
        }
    }

    #[test]
    fn counter_law_per_pass() {
        let t = Trellis::lte();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (k, w) in [(10, 64), (100, 16), (97, 10)] {
            let inp = Owned::random(&mut rng, k, 3, 2.0);
            let siso = Siso::new(&t, Kernel::default(), WindowConfig::new(w, BetaInit::Acquisition)).unwrap();
            let mut ops = OpCounters::new();
            siso.decode(&inp.view(), &mut ops).unwrap();
            assert_eq!(ops.alpha, 4 * (k as u64 + 3));
            assert_eq!(ops.beta_llr, ops.alpha);
        }
    }

    #[test]
    fn extrinsic_signs_follow_codeword() {
        let t = Trellis::lte();
        let bits: Vec<Bit> = (0..30).map(|i| ((i * 7 + 3) % 5 < 2) as Bit).collect();
        let enc = rsc_encode(&bits, &t, true).unwrap();
        let tail = enc.tail.unwrap();
        let mag = 6.0;
        let llr = |b: &[Bit]| b.iter().map(|&x| ideal_llr(x, mag)).collect::<Vec<_>>();
        let inp = Owned {
            sys: llr(&bits),
            apr: vec![0.0; 30],
            par: llr(&enc.parity),
            tsys: llr(&tail.input),
            tpar: llr(&tail.parity),
        };
        let siso = Siso::new(&t, Kernel::default(), WindowConfig::new(8, BetaInit::Acquisition)).unwrap();
        let ext = siso.decode(&inp.view(), &mut OpCounters::new()).unwrap();
        for (e, b) in ext.iter().zip(&bits) {
            assert_eq!(hard_decision(*e), *b);
        }
    }

    #[test]
    fn half_window_matches_full_block_at_high_snr() {
        let t = Trellis::lte();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let bits: Vec<Bit> = (0..64).map(|_| rng.random_range(0..2)).collect();
        let enc = rsc_encode(&bits, &t, true).unwrap();
        let tail = enc.tail.unwrap();
        let noisy = |b: &[Bit], rng: &mut ChaCha8Rng| {
            b.iter()
                .map(|&x| ideal_llr(x, 12.0) + rng.random_range(-1.0..1.0))
                .collect::<Vec<_>>()
        };
        let inp = Owned {
            sys: noisy(&bits, &mut rng),
            apr: vec![0.0; 64],
            par: noisy(&enc.parity, &mut rng),
            tsys: noisy(&tail.input, &mut rng),
            tpar: noisy(&tail.parity, &mut rng),
        };
        let full = Siso::new(&t, Kernel::default(), WindowConfig::full_block()).unwrap();
        let half = Siso::new(&t, Kernel::default(), WindowConfig::new(32, BetaInit::Acquisition)).unwrap();
        let a = full.decode(&inp.view(), &mut OpCounters::new()).unwrap();
        let b = half.decode(&inp.view(), &mut OpCounters::new()).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-9, "{x} vs {y}");
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let t = Trellis::lte();
        let siso = Siso::new(&t, Kernel::default(), WindowConfig::default()).unwrap();
        let empty = SisoInput {
            l_sys: &[],
            l_apriori: &[],
            l_parity: &[],
            tail_sys: &[0.0; 3],
            tail_parity: &[0.0; 3],
        };
        assert_eq!(siso.decode(&empty, &mut OpCounters::new()), Err(TurboError::EmptyInput));
        let short = SisoInput {
            l_sys: &[1.0, 2.0],
            l_apriori: &[0.0],
            l_parity: &[0.0, 0.0],
            tail_sys: &[0.0; 3],
            tail_parity: &[0.0; 3],
        };
        assert!(matches!(
            siso.decode(&short, &mut OpCounters::new()),
            Err(TurboError::LengthMismatch { .. })
        ));
        assert_eq!(
            Siso::new(&t, Kernel::default(), WindowConfig::new(0, BetaInit::Acquisition)).err(),
            Some(TurboError::ZeroWindow)
        );
        let perm = qpp_interleaver(40, 3, 10).unwrap();
        assert_eq!(
            TurboDecoder::new(&t, &perm, Kernel::default(), TurboConfig { iterations: 0, ..Default::default() }).err(),
            Some(TurboError::ZeroIterations)
        );
    }

    #[test]
    fn turbo_round_trip_one_iteration() {
        let t = Trellis::lte();
        let perm = qpp_interleaver(40, 3, 10).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let bits: Vec<Bit> = (0..40).map(|_| rng.random_range(0..2)).collect();
        let cw = turbo_encode(&bits, &t, &perm).unwrap();
        let stream: Vec<Llr> = cw.to_stream().iter().map(|&b| ideal_llr(b, 8.0)).collect();
        let llrs = TurboLlrs::from_stream(&stream, 40, 3).unwrap();
        let r = turbo_decode(&llrs, &perm, &t, WindowConfig::default(), 1, Kernel::default()).unwrap();
        assert_eq!(r.hard_bits, bits);
        assert_eq!(r.counters.stream, 40);
        assert_eq!(r.siso_passes, 2);
        assert_eq!(r.counters.alpha, 2 * 4 * 43);
    }

    #[test]
    fn all_zero_llrs_decode_to_zero_bits() {
        let t = Trellis::lte();
        let perm = qpp_interleaver(48, 7, 12).unwrap();
        let llrs = TurboLlrs::from_stream(&vec![0.0; 3 * 48 + 12], 48, 3).unwrap();
        let r = turbo_decode(&llrs, &perm, &t, WindowConfig::default(), 3, Kernel::default()).unwrap();
        assert!(r.hard_bits.iter().all(|&b| b == 0));
        assert!(r.app_llrs.iter().all(|&l| l == 0.0));
    }

    proptest::proptest! {
        #[test]
        fn normalization_and_single_window_are_neutral(seed in 0u64..10_000, k in 1usize..=10) {
            let t = Trellis::lte();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let inp = Owned::random(&mut rng, k, 3, 4.0);
            let dense = Siso::new(&t, Kernel::default(), WindowConfig::full_block()).unwrap();
            let (_, want) = dense.decode_app(&inp.view(), &mut OpCounters::new()).unwrap();
            for siso in [
                dense.clone().with_normalization(false),
                Siso::new(&t, Kernel::default(), WindowConfig::new(k, BetaInit::Acquisition)).unwrap(),
            ] {
                let (_, got) = siso.decode_app(&inp.view(), &mut OpCounters::new()).unwrap();
                for (g, w) in got.iter().zip(&want) {
                    proptest::prop_assert!((g - w).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn stream_split_checks_length() {
        assert!(matches!(
            TurboLlrs::from_stream(&[0.0; 10], 40, 3),
            Err(TurboError::LengthMismatch { expected: 132, actual: 10, .. })
        ));
    }
}
