//! Search-based antenna coder optimizers over a generic [`Objective`].
//!
//! Bit vectors are compared as unsigned integers with bit 0 as the most
//! significant bit, so "smallest integer" equals lexicographic order.
//! All searches are deterministic given the objective, parameters and seed.

use std::collections::HashSet;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::antenna::{bits_to_index, index_to_bits, AntennaCoder};
use crate::channel::MimoInstance;
use crate::error::{Error, Result};

/// Largest arity (and SEBO block) enumerated exhaustively.
pub const EXHAUSTIVE_LIMIT: usize = 24;
pub const DEFAULT_MAX_SWEEPS: usize = 10;

const CHUNK: u64 = 256;

/// A maximization target over binary vectors of fixed length.
///
/// `evaluate` must be deterministic. Coders that are physically infeasible
/// return `-inf` rather than an error.
pub trait Objective: Sync {
    fn arity(&self) -> usize;
    fn evaluate(&self, bits: &[bool]) -> Result<f64>;
}

impl<T: Objective + ?Sized> Objective for &T {
    fn arity(&self) -> usize {
        (**self).arity()
    }

    fn evaluate(&self, bits: &[bool]) -> Result<f64> {
        (**self).evaluate(bits)
    }
}

/// Wraps an objective and counts every call.
pub struct CountingObjective<O> {
    inner: O,
    calls: AtomicU64,
}

impl<O: Objective> CountingObjective<O> {
    pub fn new(inner: O) -> Self {
        CountingObjective {
            inner,
            calls: AtomicU64::new(0),
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }
}

impl<O: Objective> Objective for CountingObjective<O> {
    fn arity(&self) -> usize {
        self.inner.arity()
    }

    fn evaluate(&self, bits: &[bool]) -> Result<f64> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.evaluate(bits)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best_bits: Vec<bool>,
    pub best_value: f64,
    pub evaluations: u64,
    #[serde(with = "duration_secs")]
    pub wall_time: Duration,
    /// Best value after each sweep (SEBO only).
    pub trace: Vec<f64>,
}

impl SearchResult {
    pub fn best_coder(&self) -> AntennaCoder {
        AntennaCoder::new(self.best_bits.clone())
    }
}

mod duration_secs {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_secs_f64(f64::deserialize(d)?))
    }
}

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

struct BlockScan {
    best_value: f64,
    best_index: u64,
    current_value: f64,
}

/// Evaluates every assignment of `bits[start..start + len]` with the other
/// bits held at `base`. Ties resolve to the smallest assignment index; the
/// reduction is in index order, so the parallel path gives the same answer.
fn scan_block<O: Objective + ?Sized>(
    obj: &O,
    base: &[bool],
    start: usize,
    len: usize,
    current: u64,
    parallel: bool,
) -> Result<BlockScan> {
    let count = 1u64 << len;
    let chunks = count.div_ceil(CHUNK);
    let run_chunk = |c: u64| -> Result<(f64, u64, Option<f64>)> {
        let mut buf = base.to_vec();
        let mut best = (f64::NEG_INFINITY, u64::MAX);
        let mut cur = None;
        for idx in c * CHUNK..((c + 1) * CHUNK).min(count) {
            for i in 0..len {
                buf[start + i] = (idx >> (len - 1 - i)) & 1 == 1;
            }
            let v = sanitize(obj.evaluate(&buf)?);
            if best.1 == u64::MAX || v > best.0 {
                best = (v, idx);
            }
            if idx == current {
                cur = Some(v);
            }
        }
        Ok((best.0, best.1, cur))
    };
    let partials: Vec<(f64, u64, Option<f64>)> = if parallel && chunks > 1 {
        (0..chunks).into_par_iter().map(run_chunk).collect::<Result<_>>()?
    } else {
        (0..chunks).map(run_chunk).collect::<Result<_>>()?
    };
    let mut scan = BlockScan {
        best_value: f64::NEG_INFINITY,
        best_index: u64::MAX,
        current_value: f64::NEG_INFINITY,
    };
    for (v, idx, cur) in partials {
        if scan.best_index == u64::MAX || v > scan.best_value {
            scan.best_value = v;
            scan.best_index = idx;
        }
        if let Some(c) = cur {
            scan.current_value = c;
        }
    }
    Ok(scan)
}

/// Global maximizer by full enumeration (arity ≤ [`EXHAUSTIVE_LIMIT`]).
pub fn exhaustive_search<O: Objective + ?Sized>(obj: &O, parallel: bool) -> Result<SearchResult> {
    let arity = obj.arity();
    if arity > EXHAUSTIVE_LIMIT {
        return Err(Error::ArityTooLarge {
            arity,
            limit: EXHAUSTIVE_LIMIT,
        });
    }
    let started = Instant::now();
    let base = vec![false; arity];
    let scan = scan_block(obj, &base, 0, arity, 0, parallel)?;
    Ok(SearchResult {
        best_bits: index_to_bits(scan.best_index, arity),
        best_value: scan.best_value,
        evaluations: 1 << arity,
        wall_time: started.elapsed(),
        trace: Vec::new(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeboParams {
    pub block_size: usize,
    pub max_sweeps: usize,
    /// Fan the 2^block candidates of a block out over the rayon pool.
    #[serde(default)]
    pub parallel: bool,
}

impl SeboParams {
    pub fn new(block_size: usize) -> Self {
        SeboParams {
            block_size,
            max_sweeps: DEFAULT_MAX_SWEEPS,
            parallel: false,
        }
    }
}

/// Consecutive index blocks of `block_size` (the last one may be shorter).
pub fn sebo_blocks(arity: usize, block_size: usize) -> Vec<(usize, usize)> {
    (0..arity)
        .step_by(block_size.max(1))
        .map(|s| (s, block_size.min(arity - s)))
        .collect()
}

/// Successive exhaustive Boolean optimization.
///
/// Blocks are visited in index order; each block is set to its best
/// assignment with the other bits fixed, keeping the current assignment on
/// ties. Sweeps repeat until one makes no change or `max_sweeps` is reached.
/// `evaluations` is `sweeps × Σ 2^{block len}`.
pub fn sebo<O: Objective + ?Sized>(obj: &O, params: &SeboParams, init: &[bool]) -> Result<SearchResult> {
    let arity = obj.arity();
    let limit = arity.min(EXHAUSTIVE_LIMIT);
    if params.block_size == 0 || params.block_size > limit {
        return Err(Error::BlockTooLarge {
            block_size: params.block_size,
            arity,
            limit,
        });
    }
    if params.max_sweeps == 0 {
        return Err(Error::InvalidArgument("max_sweeps must be >= 1".into()));
    }
    if init.len() != arity {
        return Err(Error::InvalidArgument(format!(
            "initial coder has {} bits, objective arity is {arity}",
            init.len()
        )));
    }
    let started = Instant::now();
    let blocks = sebo_blocks(arity, params.block_size);
    let mut bits = init.to_vec();
    let mut value = f64::NEG_INFINITY;
    let mut evaluations = 0u64;
    let mut trace = Vec::new();
    for _ in 0..params.max_sweeps {
        let mut changed = false;
        for &(start, len) in &blocks {
            let current = bits_to_index(&bits[start..start + len]);
            let scan = scan_block(obj, &bits, start, len, current, params.parallel)?;
            evaluations += 1 << len;
            let before = scan.current_value;
            if scan.best_value > scan.current_value {
                for i in 0..len {
                    bits[start + i] = (scan.best_index >> (len - 1 - i)) & 1 == 1;
                }
                value = scan.best_value;
                changed = true;
            } else {
                value = scan.current_value;
            }
            debug_assert!(value >= before, "SEBO block update decreased the objective");
        }
        trace.push(value);
        // with a single block the next sweep cannot change anything
        if !changed || blocks.len() == 1 {
            break;
        }
    }
    debug_assert!(trace.windows(2).all(|w| w[1] >= w[0]));
    Ok(SearchResult {
        best_bits: bits,
        best_value: value,
        evaluations,
        wall_time: started.elapsed(),
        trace,
    })
}

/// SEBO over the flattened joint MIMO coder with capacity as the objective.
pub fn sebo_mimo(inst: &MimoInstance, params: &SeboParams, init: &[bool]) -> Result<SearchResult> {
    sebo(inst, params, init)
}

/// Best of `codebook_size` uniformly sampled coders (without replacement
/// whenever the coder space is large enough).
pub fn codebook_search<O: Objective + ?Sized>(obj: &O, codebook_size: usize, seed: u64) -> Result<SearchResult> {
    if codebook_size == 0 {
        return Err(Error::InvalidArgument("codebook size must be >= 1".into()));
    }
    let started = Instant::now();
    let arity = obj.arity();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let space = (arity < 63).then(|| 1u64 << arity);
    let codebook: Vec<Vec<bool>> = match space {
        Some(n) if codebook_size as u64 <= n => {
            rand::seq::index::sample(&mut rng, n as usize, codebook_size)
                .into_iter()
                .map(|i| index_to_bits(i as u64, arity))
                .collect()
        }
        Some(_) => (0..codebook_size)
            .map(|_| (0..arity).map(|_| rng.gen()).collect())
            .collect(),
        None => {
            let mut seen = HashSet::with_capacity(codebook_size);
            let mut out = Vec::with_capacity(codebook_size);
            while out.len() < codebook_size {
                let b: Vec<bool> = (0..arity).map(|_| rng.gen()).collect();
                if seen.insert(b.clone()) {
                    out.push(b);
                }
            }
            out
        }
    };
    let mut best: Option<(f64, Vec<bool>)> = None;
    for b in codebook {
        let v = sanitize(obj.evaluate(&b)?);
        if best.as_ref().is_none_or(|(bv, _)| v > *bv) {
            best = Some((v, b));
        }
    }
    let (best_value, best_bits) = best.expect("codebook is non-empty");
    Ok(SearchResult {
        best_bits,
        best_value,
        evaluations: codebook_size as u64,
        wall_time: started.elapsed(),
        trace: Vec::new(),
    })
}

/// One seeded random coder: the fixed-configuration reference point.
pub fn random_baseline<O: Objective + ?Sized>(obj: &O, seed: u64) -> Result<SearchResult> {
    let started = Instant::now();
    let bits = random_bits(obj.arity(), seed);
    let value = sanitize(obj.evaluate(&bits)?);
    Ok(SearchResult {
        best_bits: bits,
        best_value: value,
        evaluations: 1,
        wall_time: started.elapsed(),
        trace: Vec::new(),
    })
}

/// Uniform random coder bits; also usable as a random SEBO start.
pub fn random_bits(arity: usize, seed: u64) -> Vec<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..arity).map(|_| rng.gen()).collect()
}
