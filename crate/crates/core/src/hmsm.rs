//! Heterogeneous multi-head selection.
//!
//! Each head predicts antenna maps under its own coding scheme. The maps are
//! unzipped into candidate coders, every candidate is scored with the exact
//! decision function (SISO gain or MIMO capacity), and the best one wins.

use std::sync::Arc;

use ndarray::{Array3, ArrayView2};

use crate::antenna::AntennaCoder;
use crate::channel::{SystemInstance, VirtualChannel};
use crate::coding::{unzip, AntennaMap, CodingScheme};
use crate::error::{Error, Result};
use crate::optimize::Objective;

/// Three 2K×2K real feature maps: `Re{H_v}`, `Im{H_v}`, and `Re{H_v}` again
/// (SISO) or `snr·Re{H_v}` (MIMO, linear snr).
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureTensor {
    maps: Array3<f64>,
}

impl FeatureTensor {
    pub fn from_instance(instance: &SystemInstance) -> Self {
        Self::new(instance.channel(), instance.snr())
    }

    /// Features of a channel; `snr` is `None` for SISO.
    pub fn new(channel: &VirtualChannel, snr: Option<f64>) -> Self {
        let h = channel.matrix();
        let n = h.nrows();
        let third = snr.unwrap_or(1.0);
        let maps = Array3::from_shape_fn((3, n, n), |(c, i, j)| match c {
            0 => h[(i, j)].re,
            1 => h[(i, j)].im,
            _ => third * h[(i, j)].re,
        });
        FeatureTensor { maps }
    }

    pub fn side(&self) -> usize {
        self.maps.shape()[1]
    }

    pub fn map(&self, index: usize) -> ArrayView2<'_, f64> {
        self.maps.index_axis(ndarray::Axis(0), index)
    }

    pub fn as_array(&self) -> &Array3<f64> {
        &self.maps
    }
}

/// Anything that turns features into antenna maps, one per coded antenna in
/// flattening order.
pub trait Predictor: Send + Sync {
    fn scheme(&self) -> CodingScheme;
    fn predict(&self, features: &FeatureTensor) -> Result<Vec<AntennaMap>>;
}

/// Unzips per-antenna maps and concatenates them into a joint coder.
pub fn decode_maps(maps: &[AntennaMap], widths: &[usize]) -> Result<Vec<bool>> {
    if maps.len() != widths.len() {
        return Err(Error::InvalidArgument(format!(
            "predictor emitted {} maps for {} antennas",
            maps.len(),
            widths.len()
        )));
    }
    let mut bits = Vec::with_capacity(widths.iter().sum());
    for (map, &w) in maps.iter().zip(widths) {
        let coder = unzip(map)?;
        if coder.len() != w {
            return Err(Error::InvalidArgument(format!(
                "map decodes to {} bits, antenna has {w}",
                coder.len()
            )));
        }
        bits.extend_from_slice(coder.bits());
    }
    Ok(bits)
}

#[derive(Clone, Debug)]
pub struct HeadCandidate {
    pub maps: Vec<AntennaMap>,
    pub bits: Vec<bool>,
    pub value: f64,
}

#[derive(Clone, Debug)]
pub struct Selection {
    pub bits: Vec<bool>,
    pub value: f64,
    /// Index of the winning head.
    pub head: usize,
    pub candidates: Vec<HeadCandidate>,
}

impl Selection {
    pub fn per_head_values(&self) -> Vec<f64> {
        self.candidates.iter().map(|c| c.value).collect()
    }

    /// The winning joint coder split per antenna.
    pub fn coders(&self, widths: &[usize]) -> Vec<AntennaCoder> {
        let mut rest = self.bits.as_slice();
        widths
            .iter()
            .map(|&w| {
                let (head, tail) = rest.split_at(w);
                rest = tail;
                AntennaCoder::new(head.to_vec())
            })
            .collect()
    }
}

pub struct HmsmEnsemble {
    heads: Vec<Arc<dyn Predictor>>,
}

impl HmsmEnsemble {
    pub fn new(heads: Vec<Arc<dyn Predictor>>) -> Result<Self> {
        if heads.is_empty() {
            return Err(Error::InvalidArgument("an ensemble needs at least one head".into()));
        }
        for (i, a) in heads.iter().enumerate() {
            if heads[..i].iter().any(|b| b.scheme() == a.scheme()) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate head scheme {}",
                    a.scheme()
                )));
            }
        }
        Ok(HmsmEnsemble { heads })
    }

    pub fn heads(&self) -> &[Arc<dyn Predictor>] {
        &self.heads
    }

    pub fn len(&self) -> usize {
        self.heads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heads.is_empty()
    }

    pub fn select_best(&self, instance: &SystemInstance) -> Result<Selection> {
        let features = FeatureTensor::from_instance(instance);
        self.select_with_features(instance, &features)
    }

    /// Runs every head on precomputed features; ties go to the lower head index.
    pub fn select_with_features(&self, instance: &SystemInstance, features: &FeatureTensor) -> Result<Selection> {
        let widths = instance.antenna_widths();
        let mut candidates = Vec::with_capacity(self.heads.len());
        for head in &self.heads {
            let maps = head.predict(features)?;
            let bits = decode_maps(&maps, &widths)?;
            let value = instance.evaluate(&bits)?;
            let value = if value.is_nan() { f64::NEG_INFINITY } else { value };
            candidates.push(HeadCandidate { maps, bits, value });
        }
        let mut head = 0;
        for (i, c) in candidates.iter().enumerate() {
            if c.value > candidates[head].value {
                head = i;
            }
        }
        let value = candidates[head].value;
        assert!(candidates.iter().all(|c| value >= c.value));
        Ok(Selection {
            bits: candidates[head].bits.clone(),
            value,
            head,
            candidates,
        })
    }
}

/// `1 - (Π (1 - p_i))^alpha`: lower bound on the probability that at least
/// one head is right, for heads with accuracies `p` and error correlation
/// exponent `alpha`.
pub fn ensemble_lower_bound(p: &[f64], alpha: f64) -> Result<f64> {
    if p.is_empty() {
        return Err(Error::Domain("need at least one head accuracy".into()));
    }
    if let Some(bad) = p.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(Error::Domain(format!("accuracy {bad} outside [0, 1]")));
    }
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::Domain(format!("alpha must be positive, got {alpha}")));
    }
    let miss: f64 = p.iter().map(|x| 1.0 - x).product();
    Ok(1.0 - miss.powf(alpha))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lower_bound_values() {
        assert!((ensemble_lower_bound(&[0.5, 0.5], 1.0).unwrap() - 0.75).abs() < 1e-15);
        assert_eq!(ensemble_lower_bound(&[0.3, 1.0, 0.1], 0.7).unwrap(), 1.0);
        assert!((ensemble_lower_bound(&[0.9], 1.0).unwrap() - 0.9).abs() < 1e-15);
        assert!(ensemble_lower_bound(&[1.2], 1.0).is_err());
        assert!(ensemble_lower_bound(&[0.5], 0.0).is_err());
        assert!(ensemble_lower_bound(&[], 1.0).is_err());
    }
}
