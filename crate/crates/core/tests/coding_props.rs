use pixcode::antenna::AntennaCoder;
use pixcode::coding::{gray_decode, gray_encode, unzip, zip, AntennaMap, CodingScheme, SchemeKind};
use pixcode::Error;
use proptest::prelude::*;

fn schemes(m: u32) -> [CodingScheme; 2] {
    [CodingScheme::binary(m).unwrap(), CodingScheme::gray(m).unwrap()]
}

#[test]
fn bijection_exhaustive_up_to_twelve_bits() {
    for q in 1..=12usize {
        for m in 1..=4u32 {
            for s in schemes(m) {
                for index in 0..(1u64 << q) {
                    let coder = AntennaCoder::from_index(index, q);
                    let map = zip(&coder, s);
                    assert_eq!(unzip(&map).unwrap(), coder, "q={q} {s}");
                    assert_eq!(zip(&unzip(&map).unwrap(), s), map);
                }
            }
        }
    }
}

#[test]
fn q39_has_thirteen_octal_elements() {
    let coder = AntennaCoder::ones(39);
    for s in schemes(3) {
        let map = zip(&coder, s);
        assert_eq!(map.elements().len(), 13);
        assert!(map.elements().iter().all(|&e| e < 8));
    }
}

#[test]
fn group_101_under_both_schemes() {
    let coder: AntennaCoder = "101".parse().unwrap();
    let [b, g] = schemes(3);
    assert_eq!(zip(&coder, b).elements(), &[5]);
    assert_eq!(zip(&coder, g).elements(), &[7]);
}

#[test]
fn zero_coder_is_zero_map() {
    for s in schemes(3) {
        assert!(zip(&AntennaCoder::zeros(39), s).elements().iter().all(|&e| e == 0));
    }
}

#[test]
fn short_last_group_drops_padding() {
    let map = AntennaMap::new(CodingScheme::binary(3).unwrap(), 5, vec![7, 0]).unwrap();
    assert_eq!(unzip(&map).unwrap().to_string(), "11100");
}

#[test]
fn out_of_range_element() {
    let map = AntennaMap::new(CodingScheme::binary(3).unwrap(), 6, vec![2, 8]).unwrap();
    assert!(matches!(unzip(&map), Err(Error::ElementOutOfRange { index: 1, value: 8, bits: 3 })));
}

#[test]
fn gray_neighbours_differ_in_one_bit() {
    for v in 0..u16::MAX as u32 {
        assert_eq!((gray_encode(v) ^ gray_encode(v + 1)).count_ones(), 1, "v={v}");
        assert_eq!(gray_decode(gray_encode(v)), v);
    }
}

fn coder_strategy(max_len: usize) -> impl Strategy<Value = AntennaCoder> {
    prop::collection::vec(any::<bool>(), 1..=max_len).prop_map(AntennaCoder::new)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn unzip_inverts_zip(coder in coder_strategy(80), m in 1u32..=16, gray in any::<bool>()) {
        let kind = if gray { SchemeKind::ReflectedGray } else { SchemeKind::NaturalBinary };
        let s = CodingScheme::new(kind, m).unwrap();
        let map = zip(&coder, s);
        prop_assert_eq!(map.elements().len(), coder.len().div_ceil(m as usize));
        prop_assert_eq!(unzip(&map).unwrap(), coder);
    }

    #[test]
    fn zip_inverts_unzip_on_canonical_maps(q in 1usize..60, m in 1u32..=8, gray in any::<bool>(), raw in prop::collection::vec(any::<u32>(), 60)) {
        let s = if gray { CodingScheme::gray(m) } else { CodingScheme::binary(m) }.unwrap();
        let n = s.elements_for(q);
        let pad = n * m as usize - q;
        let elements: Vec<u32> = raw[..n]
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let mut v = r % (1 << m);
                if i + 1 == n {
                    // canonical maps carry zero padding bits
                    v &= !((1u32 << pad) - 1);
                }
                if gray { gray_encode(v) } else { v }
            })
            .collect();
        let map = AntennaMap::new(s, q, elements).unwrap();
        prop_assert_eq!(zip(&unzip(&map).unwrap(), s), map);
    }

    #[test]
    fn schemes_carry_the_same_information(coder in coder_strategy(39), m in 1u32..=6) {
        let [b, g] = schemes(m);
        prop_assert_eq!(unzip(&zip(&coder, b)).unwrap(), unzip(&zip(&coder, g)).unwrap());
    }
}
