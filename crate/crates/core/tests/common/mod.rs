#![allow(dead_code)]

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use pixcode::antenna::{AntennaCoder, PixelAntenna};
use pixcode::channel::{SisoInstance, VirtualChannel};
use pixcode::coding::{zip, AntennaMap, CodingScheme};
use pixcode::hmsm::{FeatureTensor, Predictor};
use pixcode::optimize::{exhaustive_search, sebo, SeboParams};
use pixcode::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Recovers the virtual channel from the first two feature maps.
pub fn channel_from_features(f: &FeatureTensor) -> VirtualChannel {
    let (re, im) = (f.map(0), f.map(1));
    let n = f.side();
    VirtualChannel::new(DMatrix::from_fn(n, n, |i, j| Complex64::new(re[(i, j)], im[(i, j)]))).unwrap()
}

pub enum Search {
    Exhaustive,
    Sebo(SeboParams),
}

/// SISO head that solves the instance it is shown: its output is the label
/// the dataset would store.
pub struct OracleHead {
    pub antenna: PixelAntenna,
    pub scheme: CodingScheme,
    pub search: Search,
}

impl Predictor for OracleHead {
    fn scheme(&self) -> CodingScheme {
        self.scheme
    }

    fn predict(&self, f: &FeatureTensor) -> Result<Vec<AntennaMap>> {
        let inst = SisoInstance::isotropic(Arc::new(channel_from_features(f)), self.antenna.clone())?;
        let q = self.antenna.q_ports();
        let bits = match &self.search {
            Search::Exhaustive => exhaustive_search(&inst, false)?.best_bits,
            Search::Sebo(p) => sebo(&inst, p, &vec![false; q])?.best_bits,
        };
        Ok(vec![zip(&AntennaCoder::new(bits), self.scheme)])
    }
}

/// Always predicts the same maps.
pub struct ConstantHead(pub Vec<AntennaMap>);

impl Predictor for ConstantHead {
    fn scheme(&self) -> CodingScheme {
        self.0[0].scheme()
    }

    fn predict(&self, _: &FeatureTensor) -> Result<Vec<AntennaMap>> {
        Ok(self.0.clone())
    }
}

/// Uniformly random elements, seeded by the features so predictions are
/// reproducible.
pub struct RandomHead {
    pub scheme: CodingScheme,
    pub widths: Vec<usize>,
}

impl Predictor for RandomHead {
    fn scheme(&self) -> CodingScheme {
        self.scheme
    }

    fn predict(&self, f: &FeatureTensor) -> Result<Vec<AntennaMap>> {
        let seed = f.map(0).iter().fold(0u64, |h, v| h.rotate_left(7) ^ v.to_bits());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.widths
            .iter()
            .map(|&q| {
                let elements = (0..self.scheme.elements_for(q)).map(|_| rng.gen_range(0..self.scheme.classes() as u32)).collect();
                AntennaMap::new(self.scheme, q, elements)
            })
            .collect()
    }
}
