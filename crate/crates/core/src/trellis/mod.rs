//! Recursive systematic convolutional (RSC) trellises and their butterfly
//! decomposition.
//!
//! States are numbered with the newest register bit as the most significant
//! bit, so a step maps `state -> (state >> 1) | (a << (memory - 1))` where
//! `a` is the bit entering the register. Under this numbering the two start
//! states of a butterfly differ only in bit 0 and its two end states only in
//! the top bit.
//!
//! Polynomials use the usual octal convention: the most significant of the
//! `memory + 1` bits is the `D^0` coefficient. The LTE pair `(13, 15)` is
//! `1 + D^2 + D^3` (feedback) and `1 + D + D^3` (forward).

mod encoder;
mod interleaver;

pub use encoder::{rsc_encode, turbo_encode, RscOutput, TailBits, TurboCodeword};
pub use interleaver::{lte_qpp_params, lte_qpp_table, qpp_interleaver, Permutation};

use thiserror::Error;

use crate::{Bit, Llr, Metric};

/// LTE feedback polynomial, octal 13.
pub const LTE_FEEDBACK_OCT: u32 = 0o13;
/// LTE forward polynomial, octal 15.
pub const LTE_FORWARD_OCT: u32 = 0o15;
pub const LTE_MEMORY: usize = 3;

/// Largest supported register length.
pub const MAX_MEMORY: usize = 16;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TrellisError {
    #[error("memory must be in 1..={MAX_MEMORY}, got {0}")]
    InvalidMemory(usize),
    #[error("{which} polynomial {poly:o} (octal) has degree above memory {memory}")]
    PolynomialDegree {
        which: &'static str,
        poly: u32,
        memory: usize,
    },
    #[error("feedback polynomial {0:o} (octal) lacks the constant term")]
    FeedbackConstant(u32),
    #[error("trellis is not decomposable into single-branch-metric butterflies: {0}")]
    NotButterflyDecomposable(String),
    #[error("input is empty")]
    EmptyInput,
    #[error("length mismatch: expected {expected}, got {actual}")]
    SizeMismatch { expected: usize, actual: usize },
    #[error("interleaver needs K >= 2, got {0}")]
    InterleaverTooSmall(usize),
    #[error("interleaver map is not a bijection on 0..{size}: {reason}")]
    NotBijective { size: usize, reason: String },
    #[error("interleaver file line {line}: {reason}")]
    InterleaverParse { line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrellisEdge {
    pub start_state: usize,
    pub end_state: usize,
    /// Systematic (input) bit label.
    pub u: Bit,
    /// Parity bit label.
    pub c: Bit,
}

/// Full state-transition structure of one RSC encoder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trellis {
    memory: usize,
    feedback: u32,
    forward: u32,
    /// Indexed by `state * 2 + u`.
    edges: Vec<TrellisEdge>,
}

#[inline]
fn coeff(poly: u32, memory: usize, i: usize) -> u32 {
    (poly >> (memory - i)) & 1
}

/// Builds the trellis of the RSC code with the given polynomials.
pub fn build_rsc_trellis(feedback: u32, forward: u32, memory: usize) -> Result<Trellis, TrellisError> {
    if memory == 0 || memory > MAX_MEMORY {
        return Err(TrellisError::InvalidMemory(memory));
    }
    let limit = 1u32 << (memory + 1);
    for (which, poly) in [("feedback", feedback), ("forward", forward)] {
        if poly >= limit {
            return Err(TrellisError::PolynomialDegree { which, poly, memory });
        }
    }
    if coeff(feedback, memory, 0) == 0 {
        return Err(TrellisError::FeedbackConstant(feedback));
    }

    let num_states = 1usize << memory;
    let mut edges = Vec::with_capacity(2 * num_states);
    for state in 0..num_states {
        for u in 0..2u32 {
            let reg = |i: usize| ((state >> (memory - i)) & 1) as u32;
            let fb = (1..=memory).fold(0, |acc, i| acc ^ (coeff(feedback, memory, i) & reg(i)));
            let a = u ^ fb;
            let c = (1..=memory).fold(coeff(forward, memory, 0) & a, |acc, i| {
                acc ^ (coeff(forward, memory, i) & reg(i))
            });
            let end_state = (state >> 1) | ((a as usize) << (memory - 1));
            edges.push(TrellisEdge {
                start_state: state,
                end_state,
                u: u as Bit,
                c: c as Bit,
            });
        }
    }
    Ok(Trellis {
        memory,
        feedback,
        forward,
        edges,
    })
}

impl Trellis {
    /// The LTE constituent code (octal 13/15, memory 3).
    pub fn lte() -> Trellis {
        build_rsc_trellis(LTE_FEEDBACK_OCT, LTE_FORWARD_OCT, LTE_MEMORY)
            .expect("LTE polynomials are valid")
    }

    pub fn memory(&self) -> usize {
        self.memory
    }

    pub fn num_states(&self) -> usize {
        1 << self.memory
    }

    pub fn feedback_poly(&self) -> u32 {
        self.feedback
    }

    pub fn forward_poly(&self) -> u32 {
        self.forward
    }

    pub fn edges(&self) -> &[TrellisEdge] {
        &self.edges
    }

    #[inline]
    pub fn edge(&self, state: usize, u: Bit) -> &TrellisEdge {
        &self.edges[state * 2 + u as usize]
    }

    /// Input bit that shifts a zero into the register from `state`.
    pub fn tail_input(&self, state: usize) -> Bit {
        let zero_edge = self
            .edges_from(state)
            .find(|e| e.end_state == state >> 1)
            .expect("one edge from every state shifts in a zero");
        zero_edge.u
    }

    pub fn edges_from(&self, state: usize) -> impl Iterator<Item = &TrellisEdge> {
        self.edges[state * 2..state * 2 + 2].iter()
    }

    /// Human-readable summary used by the CLI.
    pub fn summary(&self) -> String {
        format!(
            "rsc trellis: memory {}, {} states, {} edges, feedback {:o} forward {:o} (octal)",
            self.memory,
            self.num_states(),
            self.edges.len(),
            self.feedback,
            self.forward
        )
    }
}

/// Which of the two distinct branch metrics a butterfly carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GammaKind {
    /// Edges with `u == c`.
    Gamma1,
    /// Edges with `u != c`.
    Gamma2,
}

/// A 2x2 sub-graph of the trellis.
///
/// The straight edges `prev.0 -> next.0` and `prev.1 -> next.1` carry
/// `sign * gamma`; the crossed edges carry `-sign * gamma`. That is exactly
/// the shape [`crate::kernel::alpha_step`] evaluates with `lam = sign * gamma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ButterflyPair {
    pub prev_states: (usize, usize),
    pub next_states: (usize, usize),
    pub gamma_kind: GammaKind,
    /// `+1.0` or `-1.0`.
    pub sign: f64,
    /// Input label on the straight edges; the crossed edges carry `1 - u_straight`.
    pub u_straight: Bit,
}

impl ButterflyPair {
    /// Branch value handed to the kernel for this butterfly.
    #[inline]
    pub fn lam(&self, gamma1: Metric, gamma2: Metric) -> Metric {
        match self.gamma_kind {
            GammaKind::Gamma1 => self.sign * gamma1,
            GammaKind::Gamma2 => self.sign * gamma2,
        }
    }

    /// The four edges as `(start, end, straight)`.
    pub fn edges(&self) -> [(usize, usize, bool); 4] {
        let (p0, p1) = self.prev_states;
        let (n0, n1) = self.next_states;
        [(p0, n0, true), (p1, n1, true), (p0, n1, false), (p1, n0, false)]
    }
}

fn kind_of(e: &TrellisEdge) -> GammaKind {
    if e.u == e.c {
        GammaKind::Gamma1
    } else {
        GammaKind::Gamma2
    }
}

/// Partitions the trellis edges into butterflies.
///
/// Start states sharing the same pair of end states are grouped; each group
/// must hold exactly two states whose four edges use one branch-metric kind
/// in the cross pattern.
pub fn derive_butterflies(t: &Trellis) -> Result<Vec<ButterflyPair>, TrellisError> {
    let n = t.num_states();
    let mut claimed = vec![false; n];
    let mut out = Vec::with_capacity(n / 2);
    let targets = |s: usize| {
        let mut v = [t.edge(s, 0).end_state, t.edge(s, 1).end_state];
        v.sort_unstable();
        v
    };
    for p0 in 0..n {
        if claimed[p0] {
            continue;
        }
        let next = targets(p0);
        if next[0] == next[1] {
            return Err(TrellisError::NotButterflyDecomposable(format!(
                "state {p0} has parallel edges"
            )));
        }
        let partners: Vec<usize> = (p0 + 1..n).filter(|&s| targets(s) == next).collect();
        let p1 = match partners.as_slice() {
            [p1] => *p1,
            _ => {
                return Err(TrellisError::NotButterflyDecomposable(format!(
                    "state {p0} shares its end states with {} other states",
                    partners.len()
                )))
            }
        };
        claimed[p0] = true;
        claimed[p1] = true;

        let (n0, n1) = (next[0], next[1]);
        let find = |s: usize, e: usize| {
            *t.edges_from(s)
                .find(|x| x.end_state == e)
                .expect("target taken from this state's edges")
        };
        let straight = [find(p0, n0), find(p1, n1)];
        let crossed = [find(p0, n1), find(p1, n0)];
        let kind = kind_of(&straight[0]);
        if straight.iter().chain(&crossed).any(|e| kind_of(e) != kind) {
            return Err(TrellisError::NotButterflyDecomposable(format!(
                "butterfly {p0},{p1} -> {n0},{n1} mixes branch-metric kinds"
            )));
        }
        // Under a single kind the metric sign follows the parity label.
        let c = straight[0].c;
        if straight[1].c != c || crossed.iter().any(|e| e.c == c) {
            return Err(TrellisError::NotButterflyDecomposable(format!(
                "butterfly {p0},{p1} -> {n0},{n1} is not in cross pattern"
            )));
        }
        out.push(ButterflyPair {
            prev_states: (p0, p1),
            next_states: (n0, n1),
            gamma_kind: kind,
            sign: crate::convention::bit_sign(c),
            u_straight: straight[0].u,
        });
    }
    Ok(out)
}

/// The two distinct branch metrics of a trellis step: `(a + p, -a + p)`.
///
/// `sys_apriori` is the systematic channel LLR plus the a-priori LLR,
/// `parity` the decoder's own parity LLR. The other two metrics of the step
/// are the negations of these.
#[inline]
pub fn branch_metric_pair(sys_apriori: Llr, parity: Llr) -> (Metric, Metric) {
    (sys_apriori + parity, -sys_apriori + parity)
}

/// Metric of a single edge under [`branch_metric_pair`].
#[inline]
pub fn edge_metric(e: &TrellisEdge, sys_apriori: Llr, parity: Llr) -> Metric {
    let (g1, g2) = branch_metric_pair(sys_apriori, parity);
    let g = match kind_of(e) {
        GammaKind::Gamma1 => g1,
        GammaKind::Gamma2 => g2,
    };
    crate::convention::bit_sign(e.c) * g
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_state_toy() {
        let t = build_rsc_trellis(0b10, 0b11, 1).unwrap();
        assert_eq!(t.num_states(), 2);
        assert_eq!(t.edges().len(), 4);
        // feedback 1, forward 1 + D: a = u, c = a ^ s1
        assert_eq!(t.edge(0, 0), &TrellisEdge { start_state: 0, end_state: 0, u: 0, c: 0 });
        assert_eq!(t.edge(0, 1), &TrellisEdge { start_state: 0, end_state: 1, u: 1, c: 1 });
        assert_eq!(t.edge(1, 0), &TrellisEdge { start_state: 1, end_state: 0, u: 0, c: 1 });
        assert_eq!(t.edge(1, 1), &TrellisEdge { start_state: 1, end_state: 1, u: 1, c: 0 });
    }

    #[test]
    fn lte_structure() {
        let t = Trellis::lte();
        assert_eq!(t.num_states(), 8);
        assert_eq!(t.edges().len(), 16);
        for s in 0..8 {
            assert_eq!(t.edges_from(s).count(), 2);
            assert_eq!(t.edges().iter().filter(|e| e.end_state == s).count(), 2);
        }
        // zero state with zero input stays put and emits zero parity
        assert_eq!(t.edge(0, 0).end_state, 0);
        assert_eq!(t.edge(0, 0).c, 0);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert_eq!(build_rsc_trellis(1, 1, 0), Err(TrellisError::InvalidMemory(0)));
        assert!(matches!(
            build_rsc_trellis(0o23, 0o15, 3),
            Err(TrellisError::PolynomialDegree { which: "feedback", .. })
        ));
        assert!(matches!(
            build_rsc_trellis(0o13, 0o25, 3),
            Err(TrellisError::PolynomialDegree { which: "forward", .. })
        ));
        assert_eq!(build_rsc_trellis(0o3, 0o15, 3), Err(TrellisError::FeedbackConstant(0o3)));
    }

    #[test]
    fn lte_butterflies() {
        let t = Trellis::lte();
        let bf = derive_butterflies(&t).unwrap();
        assert_eq!(bf.len(), 4);
        // 1-based {1,2} -> {1,5}: the zero-state butterfly, carrying gamma1.
        let zero = bf.iter().find(|b| b.prev_states == (0, 1)).unwrap();
        assert_eq!(zero.next_states, (0, 4));
        assert_eq!(zero.gamma_kind, GammaKind::Gamma1);
        let g1 = bf.iter().filter(|b| b.gamma_kind == GammaKind::Gamma1).count();
        assert_eq!(g1, 2);
    }

    #[test]
    fn toy_butterflies() {
        // feedback 1 + D, forward 1 + D: a single butterfly of one kind
        let t = build_rsc_trellis(0b11, 0b11, 1).unwrap();
        let bf = derive_butterflies(&t).unwrap();
        assert_eq!(bf.len(), 1);
        assert_eq!(bf[0].prev_states, (0, 1));
        assert_eq!(bf[0].next_states, (0, 1));

        // non-recursive feedback 1 mixes gamma kinds inside the butterfly
        let t = build_rsc_trellis(0b10, 0b11, 1).unwrap();
        assert!(matches!(
            derive_butterflies(&t),
            Err(TrellisError::NotButterflyDecomposable(_))
        ));
    }

    fn assert_exact_cover(t: &Trellis, bf: &[ButterflyPair]) {
        let n = t.num_states();
        let mut edge_hits = vec![0; t.edges().len()];
        let mut prev_hits = vec![0; n];
        let mut next_hits = vec![0; n];
        for b in bf {
            prev_hits[b.prev_states.0] += 1;
            prev_hits[b.prev_states.1] += 1;
            next_hits[b.next_states.0] += 1;
            next_hits[b.next_states.1] += 1;
            for (s, e, straight) in b.edges() {
                let idx = t
                    .edges()
                    .iter()
                    .position(|x| x.start_state == s && x.end_state == e)
                    .unwrap();
                edge_hits[idx] += 1;
                let edge = &t.edges()[idx];
                let want_u = if straight { b.u_straight } else { 1 - b.u_straight };
                assert_eq!(edge.u, want_u);
                let m = edge_metric(edge, 0.7, -1.9);
                let lam = b.lam(0.7 + -1.9, -0.7 + -1.9);
                assert_eq!(m, if straight { lam } else { -lam });
            }
        }
        assert!(edge_hits.iter().all(|&h| h == 1));
        assert!(prev_hits.iter().all(|&h| h == 1));
        assert!(next_hits.iter().all(|&h| h == 1));
    }

    #[test]
    fn lte_butterflies_cover_every_edge_once() {
        let t = Trellis::lte();
        assert_exact_cover(&t, &derive_butterflies(&t).unwrap());
    }

    #[test]
    fn branch_metric_examples() {
        assert_eq!(branch_metric_pair(0.0, 0.0), (0.0, 0.0));
        assert_eq!(branch_metric_pair(2.0, 1.0), (3.0, -1.0));
        assert_eq!(branch_metric_pair(-1.0, 4.0), (3.0, 5.0));
    }

    proptest! {
        #[test]
        fn branch_metric_linear(a in -20.0f64..20.0, p in -20.0f64..20.0, b in -20.0f64..20.0) {
            let (g1, g2) = branch_metric_pair(a, p);
            let (n1, n2) = branch_metric_pair(-a, -p);
            prop_assert_eq!((n1, n2), (-g1, -g2));
            let (s1, s2) = branch_metric_pair(a + b, p);
            let (b1, b2) = branch_metric_pair(b, 0.0);
            prop_assert!((s1 - (g1 + b1)).abs() < 1e-12);
            prop_assert!((s2 - (g2 + b2)).abs() < 1e-12);
        }

        /// Any recursive code whose two polynomials share the `D^m` coefficient
        /// and whose forward polynomial has a constant term decomposes into
        /// single-kind butterflies covering every edge once.
        #[test]
        fn recursive_codes_decompose(memory in 1usize..6, fb_mid in 0u32..64, fw_low in 0u32..128) {
            let top = 1u32 << memory;
            let feedback = top | ((fb_mid << 1) & (top - 1)) | 1;
            let forward = (fw_low & (2 * top - 1)) | top | 1;
            let t = build_rsc_trellis(feedback, forward, memory).unwrap();
            let bf = derive_butterflies(&t).unwrap();
            prop_assert_eq!(bf.len(), t.num_states() / 2);
            assert_exact_cover(&t, &bf);
        }
    }
}
