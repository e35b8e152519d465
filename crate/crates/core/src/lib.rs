//! Antenna coding for pixel antennas.
//!
//! The crate covers the whole pipeline: the multi-port network model that maps
//! a binary switch coder to a radiation pattern ([`antenna`]), beamspace SISO
//! gain and MIMO capacity objectives ([`channel`]), search optimizers
//! ([`optimize`]), binary/Gray antenna-map codecs ([`coding`]), the
//! heterogeneous multi-head selection wrapper ([`hmsm`]), and dataset
//! generation, head training and evaluation ([`learn`]).

pub mod antenna;
pub mod bench;
pub mod channel;
pub mod coding;
pub mod error;
pub mod hmsm;
pub mod learn;
pub mod optimize;
mod textfmt;

pub use error::{Error, Result};

use sha2::{Digest, Sha256};

/// Hex SHA-256 of `bytes`, used for file digests in run manifests.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Derives an independent 64-bit seed for stream `index` (SplitMix64 finalizer).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
