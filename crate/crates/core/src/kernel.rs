//! The shared numeric kernel.
//!
//! Two butterfly operations carry all state-metric work for both decoders:
//!
//! * [`alpha_step`] maps a metric pair across one two-state butterfly whose
//!   edges carry `+lam` on the straight branches and `-lam` on the crossed
//!   ones.
//! * [`beta_llr_step`] performs the same recursion backwards and, in the
//!   same call, forms the two output maxima that pair the forward metrics of
//!   the butterfly's start states with the backward metrics of its end
//!   states.
//!
//! The turbo decoder calls them once per butterfly per trellis step; the
//! LDPC decoder once per edge of every parity-check row. [`MetricKernel`] is
//! the seam both decoders are generic over, and [`Kernel`] is its one
//! production implementation.

use thiserror::Error;

use crate::instrument::{OpCounters, OpKind};
use crate::Metric;

/// Stand-in for `-inf` in floating-point metrics.
///
/// Large enough that adding any realistic metric leaves it below
/// [`NEG_INF_THRESHOLD`], small enough that sums of two sentinels stay finite.
pub const NEG_INF: Metric = -1.0e30;

/// Any metric at or below this value is treated as the sentinel.
pub const NEG_INF_THRESHOLD: Metric = -1.0e29;

#[inline]
pub fn is_neg_inf(x: Metric) -> bool {
    x <= NEG_INF_THRESHOLD
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("degenerate metric state: every metric is the -inf sentinel")]
    DegenerateMetrics,
    #[error("invalid quantization spec: need 0 < frac_bits ({frac}) < total_bits ({total}) <= 32")]
    InvalidQuant { total: u32, frac: u32 },
}

/// Selects the `max*` flavor for one decode job.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MaxStarMode {
    /// `max*(x, y) = max(x, y)`.
    #[default]
    MaxLog,
    /// `max*(x, y) = max(x, y) + ln(1 + e^-|x-y|)`.
    Exact,
}

/// State metrics of the two states on one side of a butterfly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricPair {
    pub m0: Metric,
    pub m1: Metric,
}

impl MetricPair {
    /// Known start in state 0: `(0, -inf)`.
    pub const KNOWN_ZERO: MetricPair = MetricPair { m0: 0.0, m1: NEG_INF };

    /// Both states equally likely.
    pub const UNIFORM: MetricPair = MetricPair { m0: 0.0, m1: 0.0 };

    #[inline]
    pub const fn new(m0: Metric, m1: Metric) -> Self {
        Self { m0, m1 }
    }

    #[inline]
    pub fn swapped(self) -> Self {
        Self::new(self.m1, self.m0)
    }

    #[inline]
    pub fn max(self) -> Metric {
        self.m0.max(self.m1)
    }
}

/// Result of one [`beta_llr_step`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaLlr {
    /// Backward metrics at the butterfly's start states.
    pub beta_cur: MetricPair,
    /// `max*` over the straight (`+lam`) edges: `alpha.m0 + beta.m0`, `alpha.m1 + beta.m1`.
    pub out1: Metric,
    /// `max*` over the crossed (`-lam`) edges: `alpha.m0 + beta.m1`, `alpha.m1 + beta.m0`.
    pub out2: Metric,
}

/// Two's-complement fixed-point format with `frac_bits` fractional bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuantSpec {
    total_bits: u32,
    frac_bits: u32,
}

impl QuantSpec {
    pub fn new(total_bits: u32, frac_bits: u32) -> Result<Self, KernelError> {
        if frac_bits == 0 || frac_bits >= total_bits || total_bits > 32 {
            return Err(KernelError::InvalidQuant {
                total: total_bits,
                frac: frac_bits,
            });
        }
        Ok(Self {
            total_bits,
            frac_bits,
        })
    }

    pub fn total_bits(&self) -> u32 {
        self.total_bits
    }

    pub fn frac_bits(&self) -> u32 {
        self.frac_bits
    }

    pub fn step(&self) -> f64 {
        (-(self.frac_bits as f64)).exp2()
    }

    pub fn max_value(&self) -> f64 {
        ((1i64 << (self.total_bits - 1)) - 1) as f64 * self.step()
    }

    pub fn min_value(&self) -> f64 {
        -((1i64 << (self.total_bits - 1)) as f64) * self.step()
    }
}

/// Jacobian logarithm (or its max-log approximation).
///
/// A sentinel input returns the other input unchanged, without correction.
#[inline]
pub fn max_star(x: Metric, y: Metric, mode: MaxStarMode) -> Metric {
    if is_neg_inf(x) {
        return if is_neg_inf(y) { NEG_INF } else { y };
    }
    if is_neg_inf(y) {
        return x;
    }
    match mode {
        MaxStarMode::MaxLog => x.max(y),
        MaxStarMode::Exact => x.max(y) + (-(x - y).abs()).exp().ln_1p(),
    }
}

/// Forward butterfly: `(max*(m0 + lam, m1 - lam), max*(m0 - lam, m1 + lam))`.
#[inline]
pub fn alpha_step(prev: MetricPair, lam: Metric, mode: MaxStarMode) -> MetricPair {
    MetricPair {
        m0: max_star(prev.m0 + lam, prev.m1 - lam, mode),
        m1: max_star(prev.m0 - lam, prev.m1 + lam, mode),
    }
}

/// Backward butterfly fused with the output maxima.
///
/// `beta_next` holds the backward metrics at the butterfly's end states and
/// `alpha_prev` the forward metrics at its start states; `lam` is the branch
/// value of the step being crossed. `beta_cur` uses the same recursion as
/// [`alpha_step`]. The outputs exclude `lam`, so the caller adds it back
/// when it needs a full a-posteriori value and leaves it out for an
/// extrinsic one.
#[inline]
pub fn beta_llr_step(
    beta_next: MetricPair,
    alpha_prev: MetricPair,
    lam: Metric,
    mode: MaxStarMode,
) -> BetaLlr {
    BetaLlr {
        beta_cur: alpha_step(beta_next, lam, mode),
        out1: max_star(alpha_prev.m0 + beta_next.m0, alpha_prev.m1 + beta_next.m1, mode),
        out2: max_star(alpha_prev.m0 + beta_next.m1, alpha_prev.m1 + beta_next.m0, mode),
    }
}

/// Subtracts the largest finite metric in the slice from every finite
/// metric. Sentinels stay at [`NEG_INF`]. Returns the subtracted maximum.
pub fn normalize_metrics(metrics: &mut [Metric]) -> Result<Metric, KernelError> {
    let top = metrics
        .iter()
        .copied()
        .filter(|m| !is_neg_inf(*m))
        .fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return Err(KernelError::DegenerateMetrics);
    }
    for m in metrics.iter_mut() {
        *m = if is_neg_inf(*m) { NEG_INF } else { *m - top };
    }
    Ok(top)
}

/// [`normalize_metrics`] over a set of pairs; the maximum is global to the set.
pub fn normalize(pairs: &mut [MetricPair]) -> Result<Metric, KernelError> {
    let mut flat: Vec<Metric> = pairs.iter().flat_map(|p| [p.m0, p.m1]).collect();
    let top = normalize_metrics(&mut flat)?;
    for (p, chunk) in pairs.iter_mut().zip(flat.chunks_exact(2)) {
        *p = MetricPair::new(chunk[0], chunk[1]);
    }
    Ok(top)
}

/// Rounds to the nearest representable value of `q`, saturating at both
/// extremes. The sentinel maps to the negative extreme.
pub fn quantize(x: Metric, q: QuantSpec) -> Metric {
    if is_neg_inf(x) {
        return q.min_value();
    }
    let step = q.step();
    ((x / step).round() * step).clamp(q.min_value(), q.max_value())
}

/// The kernel seam shared by both decoders.
///
/// Counters are passed per call so that every decode job owns its own
/// tallies.
pub trait MetricKernel {
    fn mode(&self) -> MaxStarMode;

    fn alpha_step(&self, prev: MetricPair, lam: Metric, ops: &mut OpCounters) -> MetricPair;

    fn beta_llr_step(
        &self,
        beta_next: MetricPair,
        alpha_prev: MetricPair,
        lam: Metric,
        ops: &mut OpCounters,
    ) -> BetaLlr;

    /// Plain `max*` used outside the butterfly units (turbo output assembly).
    fn max_star(&self, x: Metric, y: Metric) -> Metric {
        max_star(x, y, self.mode())
    }
}

impl<K: MetricKernel + ?Sized> MetricKernel for &K {
    fn mode(&self) -> MaxStarMode {
        (**self).mode()
    }

    fn alpha_step(&self, prev: MetricPair, lam: Metric, ops: &mut OpCounters) -> MetricPair {
        (**self).alpha_step(prev, lam, ops)
    }

    fn beta_llr_step(
        &self,
        beta_next: MetricPair,
        alpha_prev: MetricPair,
        lam: Metric,
        ops: &mut OpCounters,
    ) -> BetaLlr {
        (**self).beta_llr_step(beta_next, alpha_prev, lam, ops)
    }

    fn max_star(&self, x: Metric, y: Metric) -> Metric {
        (**self).max_star(x, y)
    }
}

/// Floating-point kernel with optional output quantization.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Kernel {
    pub mode: MaxStarMode,
    pub quant: Option<QuantSpec>,
}

impl Kernel {
    pub fn new(mode: MaxStarMode) -> Self {
        Self { mode, quant: None }
    }

    pub fn with_quant(mut self, quant: Option<QuantSpec>) -> Self {
        self.quant = quant;
        self
    }

    #[inline]
    fn q(&self, x: Metric) -> Metric {
        match self.quant {
            Some(q) => quantize(x, q),
            None => x,
        }
    }
}

impl MetricKernel for Kernel {
    fn mode(&self) -> MaxStarMode {
        self.mode
    }

    #[inline]
    fn alpha_step(&self, prev: MetricPair, lam: Metric, ops: &mut OpCounters) -> MetricPair {
        ops.record(OpKind::Alpha, 1);
        let out = alpha_step(prev, lam, self.mode);
        MetricPair::new(self.q(out.m0), self.q(out.m1))
    }

    #[inline]
    fn beta_llr_step(
        &self,
        beta_next: MetricPair,
        alpha_prev: MetricPair,
        lam: Metric,
        ops: &mut OpCounters,
    ) -> BetaLlr {
        ops.record(OpKind::BetaLlr, 1);
        let r = beta_llr_step(beta_next, alpha_prev, lam, self.mode);
        BetaLlr {
            beta_cur: MetricPair::new(self.q(r.beta_cur.m0), self.q(r.beta_cur.m1)),
            out1: self.q(r.out1),
            out2: self.q(r.out2),
        }
    }
}
