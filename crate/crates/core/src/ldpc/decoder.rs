//! Layered decoding: each check row is a two-state parity trellis, swept
//! forward with `alpha_step` and backward with `beta_llr_step`.
//!
//! Messages enter the kernel halved (`Li/2`), so the pair metrics are
//! log-probabilities and `out1 - out2` is the outgoing LLR directly. In
//! `Exact` mode this is the sum-product (tanh) rule; in `MaxLog` it is
//! min-sum.

use thiserror::Error;

use super::ParityCheckMatrix;
use crate::convention::hard_decision;
use crate::instrument::{OpCounters, OpKind};
use crate::kernel::{Kernel, MaxStarMode, MetricKernel, MetricPair};
use crate::{Bit, Llr};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LdpcDecodeError {
    #[error("check row {row} has weight {weight}; at least 2 is required")]
    DegenerateRow { row: usize, weight: usize },
    #[error("{what}: expected {expected}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("iteration count must be at least 1")]
    ZeroIterations,
    #[error("row order is not a permutation of 0..{0}")]
    BadRowOrder(usize),
}

/// Outgoing messages of one check node.
pub fn check_node_update(li: &[Llr], mode: MaxStarMode) -> Result<Vec<Llr>, LdpcDecodeError> {
    let mut lo = vec![0.0; li.len()];
    let mut scratch = Vec::new();
    check_node_update_with(&Kernel::new(mode), li, &mut lo, &mut scratch, &mut OpCounters::new())
        .map_err(|weight| LdpcDecodeError::DegenerateRow { row: 0, weight })?;
    Ok(lo)
}

/// `w` alpha calls build `alpha_1..alpha_w`; `w` fused backward calls then
/// produce `beta_{w-1}..beta_0` and every outgoing message. Returns the row
/// weight as the error when it is below 2.
pub fn check_node_update_with<K: MetricKernel>(
    kernel: &K,
    li: &[Llr],
    lo: &mut [Llr],
    alphas: &mut Vec<MetricPair>,
    ops: &mut OpCounters,
) -> Result<(), usize> {
    let w = li.len();
    if w < 2 {
        return Err(w);
    }
    alphas.clear();
    alphas.push(MetricPair::KNOWN_ZERO);
    for &l in li {
        let next = kernel.alpha_step(*alphas.last().unwrap(), 0.5 * l, ops);
        alphas.push(next);
    }
    let mut beta = MetricPair::KNOWN_ZERO;
    for k in (0..w).rev() {
        let r = kernel.beta_llr_step(beta, alphas[k], 0.5 * li[k], ops);
        lo[k] = r.out1 - r.out2;
        beta = r.beta_cur;
    }
    ops.record(OpKind::Sub, w as u64);
    Ok(())
}

/// Posterior accumulators `A`, per-edge stored messages `Lp` (row-major,
/// aligned with the row adjacency) and the iteration count.
#[derive(Debug, Clone, PartialEq)]
pub struct LdpcState {
    pub a: Vec<Llr>,
    pub lp: Vec<Llr>,
    pub iteration: usize,
}

impl LdpcState {
    pub fn new(lambda: &[Llr], h: &ParityCheckMatrix) -> Result<Self, LdpcDecodeError> {
        if lambda.len() != h.n() {
            return Err(LdpcDecodeError::DimensionMismatch {
                what: "channel LLRs",
                expected: h.n(),
                actual: lambda.len(),
            });
        }
        Ok(Self {
            a: lambda.to_vec(),
            lp: vec![0.0; h.edges()],
            iteration: 0,
        })
    }
}

/// One pass over the rows of `h` in `row_order` (ascending when `None`).
pub fn layered_iteration<K: MetricKernel>(
    state: &mut LdpcState,
    h: &ParityCheckMatrix,
    kernel: &K,
    row_order: Option<&[usize]>,
    ops: &mut OpCounters,
) -> Result<(), LdpcDecodeError> {
    if state.a.len() != h.n() || state.lp.len() != h.edges() {
        return Err(LdpcDecodeError::DimensionMismatch {
            what: "decoder state",
            expected: h.edges(),
            actual: state.lp.len(),
        });
    }
    let max_w = h.rows().iter().map(Vec::len).max().unwrap_or(0);
    let mut li = vec![0.0; max_w];
    let mut lo = vec![0.0; max_w];
    let mut alphas = Vec::with_capacity(max_w + 1);
    let mut process = |j: usize| -> Result<(), LdpcDecodeError> {
        let cols = h.row(j);
        let w = cols.len();
        let off = h.row_offset(j);
        for (k, &c) in cols.iter().enumerate() {
            li[k] = state.a[c] - state.lp[off + k];
        }
        check_node_update_with(kernel, &li[..w], &mut lo[..w], &mut alphas, ops)
            .map_err(|weight| LdpcDecodeError::DegenerateRow { row: j, weight })?;
        for (k, &c) in cols.iter().enumerate() {
            state.a[c] = li[k] + lo[k];
            state.lp[off + k] = lo[k];
        }
        ops.record(OpKind::Sub, w as u64);
        ops.record(OpKind::Add, w as u64);
        Ok(())
    };
    match row_order {
        Some(order) => order.iter().try_for_each(|&j| process(j))?,
        None => (0..h.m()).try_for_each(&mut process)?,
    }
    state.iteration += 1;
    Ok(())
}

/// True when every check has even parity over `bits`.
pub fn parity_check(h: &ParityCheckMatrix, bits: &[Bit]) -> bool {
    bits.len() == h.n()
        && h
            .rows()
            .iter()
            .all(|row| row.iter().fold(0u8, |p, &c| p ^ (bits[c] & 1)) == 0)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LdpcConfig {
    pub max_iters: usize,
    pub early_stop: bool,
    /// Row processing order; ascending when `None`.
    pub row_order: Option<Vec<usize>>,
}

impl Default for LdpcConfig {
    fn default() -> Self {
        Self {
            max_iters: 5,
            early_stop: false,
            row_order: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LdpcResult {
    pub hard_bits: Vec<Bit>,
    pub posterior: Vec<Llr>,
    pub iterations_used: usize,
    pub converged: bool,
    pub counters: OpCounters,
}

/// Decoder bound to one code and kernel; reusable across frames.
#[derive(Debug, Clone)]
pub struct LdpcDecoder<'h, K> {
    h: &'h ParityCheckMatrix,
    kernel: K,
    config: LdpcConfig,
}

impl<'h, K: MetricKernel> LdpcDecoder<'h, K> {
    pub fn new(h: &'h ParityCheckMatrix, kernel: K, config: LdpcConfig) -> Result<Self, LdpcDecodeError> {
        if config.max_iters == 0 {
            return Err(LdpcDecodeError::ZeroIterations);
        }
        if let Some(order) = &config.row_order {
            let mut seen = vec![false; h.m()];
            let ok = order.len() == h.m()
                && order
                    .iter()
                    .all(|&j| j < h.m() && !std::mem::replace(&mut seen[j], true));
            if !ok {
                return Err(LdpcDecodeError::BadRowOrder(h.m()));
            }
        }
        if let Some(j) = (0..h.m()).find(|&j| h.row(j).len() < 2) {
            return Err(LdpcDecodeError::DegenerateRow {
                row: j,
                weight: h.row(j).len(),
            });
        }
        Ok(Self { h, kernel, config })
    }

    pub fn code(&self) -> &ParityCheckMatrix {
        self.h
    }

    pub fn decode(&self, lambda: &[Llr]) -> Result<LdpcResult, LdpcDecodeError> {
        let mut state = LdpcState::new(lambda, self.h)?;
        let mut ops = OpCounters::new();
        let mut bits = vec![0; self.h.n()];
        let mut converged = false;
        for _ in 0..self.config.max_iters {
            layered_iteration(
                &mut state,
                self.h,
                &self.kernel,
                self.config.row_order.as_deref(),
                &mut ops,
            )?;
            if self.config.early_stop {
                harden(&state.a, &mut bits);
                if parity_check(self.h, &bits) {
                    converged = true;
                    break;
                }
            }
        }
        if !self.config.early_stop {
            harden(&state.a, &mut bits);
            converged = parity_check(self.h, &bits);
        }
        ops.record(OpKind::Stream, bits.len() as u64);
        Ok(LdpcResult {
            hard_bits: bits,
            posterior: state.a,
            iterations_used: state.iteration,
            converged,
            counters: ops,
        })
    }
}

fn harden(a: &[Llr], bits: &mut [Bit]) {
    for (b, &l) in bits.iter_mut().zip(a) {
        *b = hard_decision(l);
    }
}

/// Convenience wrapper with the floating-point kernel and ascending rows.
pub fn ldpc_decode(
    lambda: &[Llr],
    h: &ParityCheckMatrix,
    max_iters: usize,
    mode: MaxStarMode,
    early_stop: bool,
) -> Result<LdpcResult, LdpcDecodeError> {
    LdpcDecoder::new(
        h,
        Kernel::new(mode),
        LdpcConfig {
            max_iters,
            early_stop,
            row_order: None,
        },
    )?
    .decode(lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ldpc::{parse_alist, wlan_648_r12};
    use proptest::prelude::*;

    fn min_sum(li: &[f64]) -> Vec<f64> {
        (0..li.len())
            .map(|k| {
                let others = li.iter().enumerate().filter(|&(j, _)| j != k).map(|(_, &v)| v);
                let sign: f64 = others.clone().map(|v| if v < 0.0 { -1.0 } else { 1.0 }).product();
                sign * others.map(f64::abs).fold(f64::INFINITY, f64::min)
            })
            .collect()
    }

    fn tanh_rule(li: &[f64]) -> Vec<f64> {
        (0..li.len())
            .map(|k| {
                let p: f64 = li
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != k)
                    .map(|(_, &v)| (v / 2.0).tanh())
                    .product();
                2.0 * p.atanh()
            })
            .collect()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn check_node_examples() {
        assert_eq!(check_node_update(&[2.0, -3.0, 1.0], MaxStarMode::MaxLog).unwrap(), vec![-1.0, 1.0, -2.0]);
        assert_eq!(check_node_update(&[5.0, -7.0], MaxStarMode::MaxLog).unwrap(), vec![-7.0, 5.0]);
        let exact = check_node_update(&[2.0, -3.0, 1.0], MaxStarMode::Exact).unwrap();
        assert!(close(&exact, &tanh_rule(&[2.0, -3.0, 1.0]), 1e-9), "{exact:?}");
        assert_eq!(
            check_node_update(&[1.0], MaxStarMode::MaxLog),
            Err(LdpcDecodeError::DegenerateRow { row: 0, weight: 1 })
        );
    }

    #[test]
    fn check_node_call_counts() {
        let mut ops = OpCounters::new();
        let mut lo = [0.0; 7];
        check_node_update_with(&Kernel::default(), &[1.0; 7], &mut lo, &mut Vec::new(), &mut ops).unwrap();
        assert_eq!((ops.alpha, ops.beta_llr, ops.max), (7, 7, 0));
    }

    #[test]
    fn single_row_two_iterations() {
        let h = ParityCheckMatrix::from_rows(3, vec![vec![0, 1, 2]]).unwrap();
        let mut st = LdpcState::new(&[1.0, -2.0, 0.5], &h).unwrap();
        let k = Kernel::default();
        let mut ops = OpCounters::new();
        layered_iteration(&mut st, &h, &k, None, &mut ops).unwrap();
        assert_eq!(st.lp, vec![-0.5, 0.5, -1.0]);
        assert_eq!(st.a, vec![0.5, -1.5, -0.5]);
        // Li = A - Lp recovers the channel values, so the row is a fixed point.
        layered_iteration(&mut st, &h, &k, None, &mut ops).unwrap();
        assert_eq!(st.lp, vec![-0.5, 0.5, -1.0]);
        assert_eq!(st.a, vec![0.5, -1.5, -0.5]);
        assert_eq!(st.iteration, 2);
        assert_eq!(ops.alpha, 6);
    }

    #[test]
    fn zero_llrs_stay_zero() {
        let h = wlan_648_r12();
        let r = ldpc_decode(&vec![0.0; 648], &h, 3, MaxStarMode::MaxLog, false).unwrap();
        assert!(r.posterior.iter().all(|&a| a == 0.0));
        assert!(r.converged);
    }

    #[test]
    fn wlan_counter_law_and_noiseless_decode() {
        let h = wlan_648_r12();
        let r = ldpc_decode(&vec![8.0; 648], &h, 5, MaxStarMode::MaxLog, false).unwrap();
        assert_eq!(r.counters.alpha, 5 * 2376);
        assert_eq!(r.counters.beta_llr, 5 * 2376);
        assert_eq!(r.counters.max, 0);
        assert_eq!(r.counters.stream, 648);
        assert!(r.converged && r.hard_bits.iter().all(|&b| b == 0));
        let r = ldpc_decode(&vec![8.0; 648], &h, 5, MaxStarMode::MaxLog, true).unwrap();
        assert_eq!(r.iterations_used, 1);
        assert!(r.converged);
    }

    #[test]
    fn single_flip_is_corrected() {
        let h = wlan_648_r12();
        for pos in [0, 100, 333, 647] {
            let mut lambda = vec![6.0; 648];
            lambda[pos] = -6.0;
            let r = ldpc_decode(&lambda, &h, 2, MaxStarMode::MaxLog, true).unwrap();
            assert!(r.converged, "flip at {pos}");
            assert!(r.hard_bits.iter().all(|&b| b == 0));
        }
        let toy = parse_alist("3 2\n2 2\n1 2 1\n2 2\n1 0\n1 2\n2 0\n1 2\n2 3\n").unwrap();
        // codeword 111, bit 0 flipped
        let r = ldpc_decode(&[6.0, -6.0, -6.0], &toy, 2, MaxStarMode::MaxLog, true).unwrap();
        assert_eq!(r.hard_bits, vec![1, 1, 1]);
    }

    #[test]
    fn parity_examples() {
        let toy = parse_alist("3 2\n2 2\n1 2 1\n2 2\n1 0\n1 2\n2 0\n1 2\n2 3\n").unwrap();
        assert!(parity_check(&toy, &[0, 0, 0]));
        assert!(parity_check(&toy, &[1, 1, 1]));
        assert!(!parity_check(&toy, &[1, 0, 0]));
    }

    #[test]
    fn decoder_rejects_bad_setup() {
        let h = ParityCheckMatrix::from_rows(3, vec![vec![0, 1], vec![2]]).unwrap();
        assert_eq!(
            LdpcDecoder::new(&h, Kernel::default(), LdpcConfig::default()).err(),
            Some(LdpcDecodeError::DegenerateRow { row: 1, weight: 1 })
        );
        let h = wlan_648_r12();
        assert_eq!(
            ldpc_decode(&[0.0; 10], &h, 1, MaxStarMode::MaxLog, false).err(),
            Some(LdpcDecodeError::DimensionMismatch { what: "channel LLRs", expected: 648, actual: 10 })
        );
        assert_eq!(
            ldpc_decode(&[0.0; 648], &h, 0, MaxStarMode::MaxLog, false).err(),
            Some(LdpcDecodeError::ZeroIterations)
        );
        let cfg = LdpcConfig { row_order: Some(vec![0; 324]), ..Default::default() };
        assert_eq!(LdpcDecoder::new(&h, Kernel::default(), cfg).err(), Some(LdpcDecodeError::BadRowOrder(324)));
    }

    #[test]
    fn reversed_row_order_still_decodes() {
        let h = wlan_648_r12();
        let cfg = LdpcConfig {
            max_iters: 3,
            early_stop: true,
            row_order: Some((0..324).rev().collect()),
        };
        let mut lambda = vec![4.0; 648];
        lambda[5] = -3.0;
        let r = LdpcDecoder::new(&h, Kernel::default(), cfg).unwrap().decode(&lambda).unwrap();
        assert!(r.converged);
    }

    proptest! {
        #[test]
        fn max_log_is_min_sum(li in proptest::collection::vec(-10.0f64..10.0, 2..21)) {
            let got = check_node_update(&li, MaxStarMode::MaxLog).unwrap();
            prop_assert!(close(&got, &min_sum(&li), 1e-9), "{:?} vs {:?}", got, min_sum(&li));
        }

        #[test]
        fn exact_is_tanh_rule(li in proptest::collection::vec(-6.0f64..6.0, 2..21)) {
            let got = check_node_update(&li, MaxStarMode::Exact).unwrap();
            prop_assert!(close(&got, &tanh_rule(&li), 1e-6), "{:?} vs {:?}", got, tanh_rule(&li));
        }

        #[test]
        fn negation_and_scale(li in proptest::collection::vec(-10.0f64..10.0, 2..12), c in 0.1f64..5.0, k in 0usize..12) {
            let k = k % li.len();
            let mut neg = li.clone();
            neg[k] = -neg[k];
            let got = check_node_update(&neg, MaxStarMode::MaxLog).unwrap();
            prop_assert!(close(&got, &min_sum(&neg), 1e-9));
            let scaled: Vec<f64> = li.iter().map(|x| c * x).collect();
            let a = check_node_update(&scaled, MaxStarMode::MaxLog).unwrap();
            let b: Vec<f64> = check_node_update(&li, MaxStarMode::MaxLog).unwrap().iter().map(|x| c * x).collect();
            prop_assert!(close(&a, &b, 1e-9));
        }
    }
}
