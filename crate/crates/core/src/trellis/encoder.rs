use super::{Permutation, Trellis, TrellisError};
use crate::Bit;

/// Termination steps of one RSC encoder.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TailBits {
    pub input: Vec<Bit>,
    pub parity: Vec<Bit>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RscOutput {
    pub parity: Vec<Bit>,
    /// Present when the encoder was terminated.
    pub tail: Option<TailBits>,
    pub final_state: usize,
}

/// Runs the RSC encoder along the trellis from state 0.
pub fn rsc_encode(bits: &[Bit], t: &Trellis, terminate: bool) -> Result<RscOutput, TrellisError> {
    if bits.is_empty() {
        return Err(TrellisError::EmptyInput);
    }
    let mut state = 0usize;
    let mut parity = Vec::with_capacity(bits.len());
    for &u in bits {
        let e = t.edge(state, u & 1);
        parity.push(e.c);
        state = e.end_state;
    }
    let tail = terminate.then(|| {
        let mut tail = TailBits::default();
        for _ in 0..t.memory() {
            let u = t.tail_input(state);
            let e = t.edge(state, u);
            tail.input.push(u);
            tail.parity.push(e.c);
            state = e.end_state;
        }
        tail
    });
    Ok(RscOutput {
        parity,
        tail,
        final_state: state,
    })
}

/// Rate-1/3 parallel concatenation with independently terminated encoders.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TurboCodeword {
    pub systematic: Vec<Bit>,
    pub parity1: Vec<Bit>,
    pub parity2: Vec<Bit>,
    pub tail1: TailBits,
    pub tail2: TailBits,
}

impl TurboCodeword {
    pub fn block_len(&self) -> usize {
        self.systematic.len()
    }

    /// Transmission order: systematic, parity 1, parity 2, then encoder 1
    /// tail input and parity, then encoder 2 tail input and parity.
    pub fn to_stream(&self) -> Vec<Bit> {
        let mut out = Vec::with_capacity(self.stream_len());
        out.extend_from_slice(&self.systematic);
        out.extend_from_slice(&self.parity1);
        out.extend_from_slice(&self.parity2);
        for tail in [&self.tail1, &self.tail2] {
            out.extend_from_slice(&tail.input);
            out.extend_from_slice(&tail.parity);
        }
        out
    }

    pub fn stream_len(&self) -> usize {
        3 * self.systematic.len()
            + self.tail1.input.len()
            + self.tail1.parity.len()
            + self.tail2.input.len()
            + self.tail2.parity.len()
    }
}

/// Encodes `bits` with two copies of `t`, the second fed through `perm`.
pub fn turbo_encode(bits: &[Bit], t: &Trellis, perm: &Permutation) -> Result<TurboCodeword, TrellisError> {
    if bits.len() != perm.size() {
        return Err(TrellisError::SizeMismatch {
            expected: perm.size(),
            actual: bits.len(),
        });
    }
    let first = rsc_encode(bits, t, true)?;
    let second = rsc_encode(&perm.interleave(bits), t, true)?;
    Ok(TurboCodeword {
        systematic: bits.to_vec(),
        parity1: first.parity,
        parity2: second.parity,
        tail1: first.tail.unwrap_or_default(),
        tail2: second.tail.unwrap_or_default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trellis::{qpp_interleaver, LTE_FEEDBACK_OCT, LTE_FORWARD_OCT};

    /// Shift-register LTE encoder written directly from the polynomials,
    /// independent of the trellis tables.
    fn register_encode(bits: &[Bit]) -> (Vec<Bit>, [Bit; 3]) {
        assert_eq!((LTE_FEEDBACK_OCT, LTE_FORWARD_OCT), (0o13, 0o15));
        let mut d = [0u8; 3]; // d[0] = D, d[1] = D^2, d[2] = D^3
        let mut parity = Vec::new();
        for &u in bits {
            let a = u ^ d[1] ^ d[2];
            parity.push(a ^ d[0] ^ d[2]);
            d = [a, d[0], d[1]];
        }
        (parity, d)
    }

    #[test]
    fn zero_input_gives_zero_output() {
        let t = Trellis::lte();
        let out = rsc_encode(&[0; 20], &t, true).unwrap();
        assert!(out.parity.iter().all(|&b| b == 0));
        let tail = out.tail.unwrap();
        assert_eq!(tail.input, vec![0, 0, 0]);
        assert_eq!(tail.parity, vec![0, 0, 0]);
        assert_eq!(out.final_state, 0);
    }

    #[test]
    fn impulse_response_matches_register_model() {
        let t = Trellis::lte();
        let mut bits = vec![0u8; 24];
        bits[0] = 1;
        let out = rsc_encode(&bits, &t, false).unwrap();
        let (want, _) = register_encode(&bits);
        assert_eq!(out.parity, want);
        // 1 + D^2 + D^3 is primitive: the response recurs with period 7
        assert_eq!(out.parity[1..8], out.parity[8..15]);
        assert!(out.parity[1..8].contains(&1));
    }

    #[test]
    fn empty_input_rejected() {
        assert_eq!(rsc_encode(&[], &Trellis::lte(), true), Err(TrellisError::EmptyInput));
    }

    #[test]
    fn termination_is_exhaustive_to_k12() {
        let t = Trellis::lte();
        for k in 1..=12usize {
            for word in 0u32..(1 << k) {
                let bits: Vec<Bit> = (0..k).map(|i| ((word >> i) & 1) as Bit).collect();
                let out = rsc_encode(&bits, &t, true).unwrap();
                assert_eq!(out.final_state, 0, "k={k} word={word:b}");
            }
        }
    }

    #[test]
    fn random_words_match_register_model() {
        let t = Trellis::lte();
        let mut x = 0x9e37_79b9_7f4a_7c15u64;
        for _ in 0..50 {
            let bits: Vec<Bit> = (0..64)
                .map(|_| {
                    x ^= x << 13;
                    x ^= x >> 7;
                    x ^= x << 17;
                    (x & 1) as Bit
                })
                .collect();
            let (want, _) = register_encode(&bits);
            assert_eq!(rsc_encode(&bits, &t, false).unwrap().parity, want);
        }
    }

    #[test]
    fn turbo_encode_shapes() {
        let t = Trellis::lte();
        let perm = qpp_interleaver(40, 3, 10).unwrap();
        let cw = turbo_encode(&[0; 40], &t, &perm).unwrap();
        assert!(cw.to_stream().iter().all(|&b| b == 0));
        assert_eq!(cw.stream_len(), 3 * 40 + 4 * 3);

        let bits: Vec<Bit> = (0..40).map(|i| (i % 3 == 0) as Bit).collect();
        let cw = turbo_encode(&bits, &t, &perm).unwrap();
        assert_eq!(cw.systematic, bits);
        assert_eq!(cw.parity2, rsc_encode(&perm.interleave(&bits), &t, false).unwrap().parity);
        assert_eq!(cw.to_stream().len(), cw.stream_len());

        assert!(matches!(
            turbo_encode(&bits[..39], &t, &perm),
            Err(TrellisError::SizeMismatch { expected: 40, actual: 39 })
        ));
    }
}
