//! Turbo and LDPC decoding built on one shared pair of trellis kernel
//! operations.
//!
//! Both decoders reduce their inner loops to two operations defined in
//! [`kernel`]: the forward butterfly step ([`kernel::alpha_step`]) and the
//! fused backward/output step ([`kernel::beta_llr_step`]). The turbo decoder
//! applies them to the four butterflies of an 8-state RSC trellis; the LDPC
//! decoder applies them to the two-state trellis of every parity-check row.
//!
//! Supporting modules build the codes ([`trellis`], [`ldpc::code`]), drive
//! channel simulations ([`channel`]) and count kernel invocations
//! ([`instrument`]).

pub mod channel;
pub mod instrument;
pub mod kernel;
pub mod ldpc;
pub mod trellis;
pub mod turbo;

/// Log-likelihood ratio, `ln P(bit = 0) / P(bit = 1)`.
pub type Llr = f64;

/// Log-domain state metric.
pub type Metric = f64;

/// A hard bit, always `0` or `1`.
pub type Bit = u8;

/// The single LLR sign convention used across the crate.
///
/// Bit 0 maps to a positive LLR and to the BPSK symbol `+1.0`.
pub mod convention {
    use crate::{Bit, Llr};

    /// Hard decision with the tie rule `llr >= 0 -> 0`.
    #[inline]
    pub fn hard_decision(llr: Llr) -> Bit {
        if llr >= 0.0 {
            0
        } else {
            1
        }
    }

    /// `+1.0` for bit 0, `-1.0` for bit 1.
    #[inline]
    pub fn bit_sign(bit: Bit) -> f64 {
        if bit == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// A noiseless LLR of the given magnitude for `bit`.
    #[inline]
    pub fn ideal_llr(bit: Bit, magnitude: f64) -> Llr {
        bit_sign(bit) * magnitude
    }

    #[cfg(test)]
    mod tests {
        use super::*;

        #[test]
        fn zero_is_positive() {
            assert_eq!(hard_decision(0.0), 0);
            assert_eq!(hard_decision(-0.0), 0);
            assert_eq!(hard_decision(-1e-12), 1);
            assert_eq!(bit_sign(0), 1.0);
            assert_eq!(bit_sign(1), -1.0);
            for b in [0, 1] {
                assert_eq!(hard_decision(ideal_llr(b, 3.0)), b);
            }
        }
    }
}
