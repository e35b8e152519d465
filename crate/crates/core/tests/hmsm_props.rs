mod common;

use std::sync::Arc;

use common::{ConstantHead, OracleHead, Search};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use pixcode::antenna::{synthesize, AntennaCoder, AntennaModel, PixelAntenna};
use pixcode::channel::{MimoInstance, SisoInstance, SystemInstance, VirtualChannel};
use pixcode::coding::{zip, CodingScheme};
use pixcode::hmsm::{decode_maps, FeatureTensor, HmsmEnsemble, Predictor};
use pixcode::optimize::{exhaustive_search, sebo, Objective, SeboParams};
use proptest::prelude::*;

fn binary() -> CodingScheme {
    CodingScheme::binary(3).unwrap()
}

fn gray() -> CodingScheme {
    CodingScheme::gray(3).unwrap()
}

fn antenna(q: usize, k: usize, seed: u64) -> PixelAntenna {
    PixelAntenna::auto(Arc::new(synthesize(q, k, seed).unwrap())).unwrap()
}

fn siso(ant: &PixelAntenna, channel_seed: u64) -> SystemInstance {
    let ch = Arc::new(VirtualChannel::sample(ant.k_samples(), channel_seed).unwrap());
    SystemInstance::Siso(SisoInstance::isotropic(ch, ant.clone()).unwrap())
}

fn constant(coder: &str, scheme: CodingScheme) -> Arc<dyn Predictor> {
    Arc::new(ConstantHead(vec![zip(&coder.parse().unwrap(), scheme)]))
}

#[test]
fn feature_maps() {
    let zero = FeatureTensor::new(&VirtualChannel::zeros(3), None);
    assert!(zero.as_array().iter().all(|&v| v == 0.0));
    let ch = VirtualChannel::sample(3, 1).unwrap();
    let ant = antenna(3, 3, 1);
    for (snr, factor) in [(1.0, 1.0), (10.0, 10.0)] {
        let mimo = SystemInstance::Mimo(MimoInstance::new(Arc::new(ch.clone()), vec![ant.clone()], vec![ant.clone()], snr).unwrap());
        let f = FeatureTensor::from_instance(&mimo);
        let h = ch.matrix();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(f.map(0)[(i, j)], h[(i, j)].re);
                assert_eq!(f.map(1)[(i, j)], h[(i, j)].im);
                assert_eq!(f.map(2)[(i, j)], factor * h[(i, j)].re);
            }
        }
    }
}

#[test]
fn singleton_ensemble_is_its_head() {
    let ant = antenna(7, 4, 3);
    let inst = siso(&ant, 5);
    let head = constant("1011001", binary());
    let ens = HmsmEnsemble::new(vec![head.clone()]).unwrap();
    let s = ens.select_best(&inst).unwrap();
    let bits = decode_maps(&head.predict(&FeatureTensor::from_instance(&inst)).unwrap(), &[7]).unwrap();
    assert_eq!(s.bits, bits);
    assert_eq!(s.head, 0);
    assert_eq!(s.value, inst.evaluate(&bits).unwrap());
}

#[test]
fn sebo_oracle_dominates_and_wins_with_equality() {
    let ant = antenna(8, 4, 2);
    let params = SeboParams::new(4);
    let oracle = Arc::new(OracleHead { antenna: ant.clone(), scheme: gray(), search: Search::Sebo(params) });
    let ens = HmsmEnsemble::new(vec![constant("00000000", binary()), oracle]).unwrap();
    for seed in 0..50 {
        let inst = siso(&ant, seed);
        let label = sebo(&inst, &params, &[false; 8]).unwrap().best_value;
        let s = ens.select_best(&inst).unwrap();
        assert!(s.value >= label);
        if s.head == 1 {
            assert_eq!(s.value, label);
        }
        assert_eq!(s.value, s.per_head_values().into_iter().fold(f64::NEG_INFINITY, f64::max));
    }
}

#[test]
fn exhaustive_oracles_reproduce_the_optimum() {
    let ant = antenna(12, 4, 8);
    let heads: Vec<Arc<dyn Predictor>> = [binary(), gray()]
        .into_iter()
        .map(|scheme| Arc::new(OracleHead { antenna: ant.clone(), scheme, search: Search::Exhaustive }) as Arc<dyn Predictor>)
        .collect();
    let ens = HmsmEnsemble::new(heads).unwrap();
    for seed in 0..10 {
        let inst = siso(&ant, seed);
        let best = exhaustive_search(&inst, false).unwrap();
        let s = ens.select_best(&inst).unwrap();
        assert_eq!(s.bits, best.best_bits);
        assert_eq!(s.value, best.best_value);
    }
}

#[test]
fn infeasible_candidates_lose_without_aborting() {
    // no column of E_oc radiates, so every coder is a zero pattern
    let k = 2;
    let z_pp = DMatrix::from_diagonal(&DVector::from_element(2, Complex64::new(50.0, 0.0)));
    let model = AntennaModel::new(Complex64::new(50.0, 0.0), z_pp, DVector::from_element(2, Complex64::new(1.0, 0.0)), DMatrix::zeros(2 * k, 3), 1e10).unwrap();
    let dead = PixelAntenna::new(Arc::new(model));
    let live = antenna(2, k, 1);
    let ch = Arc::new(VirtualChannel::sample(k, 4).unwrap());
    let inst = SystemInstance::Mimo(MimoInstance::new(ch, vec![live.clone()], vec![dead], 1.0).unwrap());
    let heads = vec![
        Arc::new(ConstantHead(vec![zip(&AntennaCoder::zeros(2), binary()), zip(&AntennaCoder::ones(2), binary())])) as Arc<dyn Predictor>,
        Arc::new(ConstantHead(vec![zip(&AntennaCoder::ones(2), gray()), zip(&AntennaCoder::zeros(2), gray())])),
    ];
    let s = HmsmEnsemble::new(heads).unwrap().select_best(&inst).unwrap();
    assert_eq!(s.value, f64::NEG_INFINITY);
    assert_eq!(s.head, 0);
}

#[test]
fn ensemble_rejects_empty_and_duplicate_heads() {
    assert!(HmsmEnsemble::new(vec![]).is_err());
    assert!(HmsmEnsemble::new(vec![constant("101", binary()), constant("011", binary())]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn adding_a_head_never_hurts(a in 0u64..1024, b in 0u64..1024, seed in any::<u64>()) {
        let ant = antenna(10, 4, 6);
        let inst = siso(&ant, seed);
        let ha = constant(&AntennaCoder::from_index(a, 10).to_string(), binary());
        let hb = constant(&AntennaCoder::from_index(b, 10).to_string(), gray());
        let one = HmsmEnsemble::new(vec![ha.clone()]).unwrap().select_best(&inst).unwrap();
        let two = HmsmEnsemble::new(vec![ha, hb]).unwrap().select_best(&inst).unwrap();
        prop_assert!(two.value >= one.value);
        // the reported value is the decision function of the returned coder
        prop_assert!((two.value - inst.evaluate(&two.bits).unwrap()).abs() <= 1e-12);
    }
}
