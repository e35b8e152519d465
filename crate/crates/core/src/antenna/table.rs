use num_complex::Complex64;
use rayon::prelude::*;

use super::{index_to_bits, AntennaModel};
use crate::error::{Error, Result};

/// Largest number of stored complex entries (2^Q · 2K) a table may hold.
pub const MAX_TABLE_ENTRIES: usize = 1 << 23;

/// Every normalized pattern of an antenna, indexed by the coder's MSB-first
/// integer value. Coders that radiate nothing are marked infeasible.
#[derive(Clone, Debug)]
pub struct PatternTable {
    q_ports: usize,
    len: usize,
    patterns: Vec<Complex64>,
    feasible: Vec<bool>,
}

impl PatternTable {
    pub fn fits(model: &AntennaModel) -> bool {
        let q = model.q_ports();
        q < 32 && (1usize << q).saturating_mul(2 * model.k_samples()) <= MAX_TABLE_ENTRIES
    }

    pub fn build(model: &AntennaModel) -> Result<Self> {
        if !Self::fits(model) {
            return Err(Error::InvalidArgument(format!(
                "pattern table for Q={} K={} exceeds {MAX_TABLE_ENTRIES} entries",
                model.q_ports(),
                model.k_samples()
            )));
        }
        let q = model.q_ports();
        let len = 2 * model.k_samples();
        let count = 1usize << q;
        let mut patterns = vec![Complex64::new(0.0, 0.0); count * len];
        let feasible = patterns
            .par_chunks_mut(len)
            .enumerate()
            .map(|(index, slot)| match model.pattern(&index_to_bits(index as u64, q)) {
                Ok(e) => {
                    slot.copy_from_slice(e.as_slice());
                    Ok(true)
                }
                Err(Error::ZeroPattern { .. }) => Ok(false),
                Err(e) => Err(e),
            })
            .collect::<Result<Vec<bool>>>()?;
        Ok(PatternTable {
            q_ports: q,
            len,
            patterns,
            feasible,
        })
    }

    pub fn q_ports(&self) -> usize {
        self.q_ports
    }

    /// Pattern of the coder with integer value `index`, `None` if infeasible.
    pub fn get(&self, index: u64) -> Option<&[Complex64]> {
        let i = index as usize;
        if *self.feasible.get(i)? {
            Some(&self.patterns[i * self.len..(i + 1) * self.len])
        } else {
            None
        }
    }
}
