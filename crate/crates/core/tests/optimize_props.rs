use std::sync::Arc;

use pixcode::antenna::{synthesize, AntennaCoder, PixelAntenna};
use pixcode::channel::{MimoInstance, SisoInstance, VirtualChannel};
use pixcode::optimize::{
    codebook_search, exhaustive_search, random_baseline, random_bits, sebo, sebo_mimo, CountingObjective, Objective,
    SeboParams,
};
use proptest::prelude::*;

fn siso(q: usize, k: usize, antenna_seed: u64, channel_seed: u64) -> SisoInstance {
    let rx = PixelAntenna::auto(Arc::new(synthesize(q, k, antenna_seed).unwrap())).unwrap();
    SisoInstance::isotropic(Arc::new(VirtualChannel::sample(k, channel_seed).unwrap()), rx).unwrap()
}

/// Plain enumeration: strictly better values replace, so the smallest
/// index wins ties.
fn brute_force(inst: &SisoInstance, q: usize) -> (u64, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for i in 0..(1u64 << q) {
        let v = inst.gain(&AntennaCoder::from_index(i, q)).unwrap();
        if v > best.1 {
            best = (i, v);
        }
    }
    best
}

#[test]
fn exhaustive_matches_brute_force_on_ten_bits() {
    for seed in 0..5 {
        let inst = siso(10, 8, 3, seed);
        let r = exhaustive_search(&inst, false).unwrap();
        let (index, value) = brute_force(&inst, 10);
        assert_eq!(r.best_coder().index(), Some(index));
        assert_eq!(r.best_value, value);
        assert_eq!(r.evaluations, 1024);
    }
}

#[test]
fn codebook_grows_with_size() {
    let (mut small, mut large) = (0.0, 0.0);
    for seed in 0..100 {
        let inst = siso(10, 8, 1, seed);
        small += codebook_search(&inst, 64, seed).unwrap().best_value;
        large += codebook_search(&inst, 1024, seed).unwrap().best_value;
    }
    assert!(large >= small, "{large} < {small}");
}

#[test]
fn codebook_of_one_is_that_coder() {
    let inst = siso(8, 4, 2, 2);
    let r = codebook_search(&inst, 1, 17).unwrap();
    assert_eq!(r.evaluations, 1);
    assert_eq!(r.best_value, inst.evaluate(&r.best_bits).unwrap());
}

#[test]
fn full_codebook_is_exhaustive() {
    let inst = siso(8, 4, 2, 9);
    let full = codebook_search(&inst, 256, 5).unwrap();
    assert_eq!(full.best_value, exhaustive_search(&inst, false).unwrap().best_value);
}

#[test]
fn two_by_one_mimo_sebo_is_close_to_exhaustive() {
    let mut ratio = 0.0;
    let params = SeboParams::new(6);
    for seed in 0..50 {
        let channel = Arc::new(VirtualChannel::sample(4, seed).unwrap());
        let ant = PixelAntenna::auto(Arc::new(synthesize(6, 4, 21).unwrap())).unwrap();
        let inst = MimoInstance::new(channel, vec![ant.clone()], vec![ant], 10.0).unwrap();
        let init = vec![false; 12];
        let r = sebo_mimo(&inst, &params, &init).unwrap();
        assert!(r.best_value >= inst.evaluate(&init).unwrap());
        let plain = sebo(&inst, &params, &init).unwrap();
        assert_eq!((&r.best_bits, r.best_value, &r.trace), (&plain.best_bits, plain.best_value, &plain.trace));
        ratio += r.best_value / exhaustive_search(&inst, false).unwrap().best_value;
    }
    assert!(ratio / 50.0 >= 0.95, "mean ratio {}", ratio / 50.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn single_block_sebo_is_exhaustive(q in 1usize..11, a in any::<u64>(), c in any::<u64>()) {
        let inst = siso(q, 4, a, c);
        let s = sebo(&inst, &SeboParams::new(q), &vec![false; q]).unwrap();
        let e = exhaustive_search(&inst, false).unwrap();
        prop_assert_eq!(s.best_bits, e.best_bits);
        prop_assert_eq!(s.best_value, e.best_value);
    }

    #[test]
    fn evaluations_count_objective_calls(q in 2usize..12, block in 1usize..12, a in any::<u64>(), c in any::<u64>(), init_seed in any::<u64>()) {
        let block = block.min(q);
        let counted = CountingObjective::new(siso(q, 4, a, c));
        let init = random_bits(q, init_seed);
        let r = sebo(&counted, &SeboParams::new(block), &init).unwrap();
        prop_assert_eq!(r.evaluations, counted.calls());
        let per_sweep: u64 = (0..q).step_by(block).map(|s| 1u64 << block.min(q - s)).sum();
        prop_assert_eq!(r.evaluations, r.trace.len() as u64 * per_sweep);
        prop_assert!(r.trace.windows(2).all(|w| w[1] >= w[0]));
        prop_assert!(r.best_value >= counted.evaluate(&init).unwrap());
    }

    #[test]
    fn searches_are_deterministic(q in 1usize..10, a in any::<u64>(), c in any::<u64>(), seed in any::<u64>()) {
        let inst = siso(q, 4, a, c);
        let x = sebo(&inst, &SeboParams::new(q.div_ceil(2)), &random_bits(q, seed)).unwrap();
        let y = sebo(&inst, &SeboParams { parallel: true, ..SeboParams::new(q.div_ceil(2)) }, &random_bits(q, seed)).unwrap();
        prop_assert_eq!((&x.best_bits, x.best_value, x.evaluations), (&y.best_bits, y.best_value, y.evaluations));
        let p = codebook_search(&inst, 50, seed).unwrap();
        let r = codebook_search(&inst, 50, seed).unwrap();
        prop_assert_eq!((p.best_bits, p.best_value), (r.best_bits, r.best_value));
        let best = exhaustive_search(&inst, true).unwrap().best_value;
        let rb = random_baseline(&inst, seed).unwrap();
        prop_assert!(rb.best_value <= best);
        prop_assert_eq!(rb.best_bits, random_baseline(&inst, seed).unwrap().best_bits);
    }
}
