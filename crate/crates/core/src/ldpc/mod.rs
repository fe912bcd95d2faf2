//! Quasi-cyclic LDPC codes and the layered decoder built on the shared kernel.

mod code;
mod decoder;

pub use code::{
    code_stats, expand_base_matrix, parse_alist, wlan_648_r12, BaseMatrix, CodeStats, LdpcCodeError,
    ParityCheckMatrix, WLAN_648_R12_BASE,
};
pub use decoder::{
    check_node_update, check_node_update_with, layered_iteration, ldpc_decode, parity_check,
    LdpcConfig, LdpcDecodeError, LdpcDecoder, LdpcResult, LdpcState,
};
