//! Antenna maps: coders compressed into one decimal element per `M` bits.
//!
//! Format contract:
//! * bits are grouped left to right, MSB-first within a group; group 0 holds
//!   bits `b1..bM`;
//! * when `M` does not divide `Q` the last group is zero-padded on the right
//!   and [`unzip`] truncates back to `Q` bits;
//! * `ReflectedGray` encodes a group value `v` as `v ^ (v >> 1)` and decodes
//!   with the prefix-XOR inverse.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::antenna::AntennaCoder;
use crate::error::{Error, Result};

pub const MAX_GROUP_BITS: u32 = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeKind {
    #[serde(rename = "binary")]
    NaturalBinary,
    #[serde(rename = "gray")]
    ReflectedGray,
}

impl SchemeKind {
    pub fn tag(self) -> &'static str {
        match self {
            SchemeKind::NaturalBinary => "binary",
            SchemeKind::ReflectedGray => "gray",
        }
    }
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary" => Ok(SchemeKind::NaturalBinary),
            "gray" => Ok(SchemeKind::ReflectedGray),
            other => Err(Error::InvalidArgument(format!(
                "unknown coding scheme `{other}` (expected binary or gray)"
            ))),
        }
    }
}

/// A label encoding: scheme variant plus group width `M`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "SchemeRepr", into = "SchemeRepr")]
pub struct CodingScheme {
    kind: SchemeKind,
    group_bits: u32,
}

#[derive(Serialize, Deserialize)]
struct SchemeRepr {
    scheme: SchemeKind,
    m: u32,
}

impl TryFrom<SchemeRepr> for CodingScheme {
    type Error = Error;

    fn try_from(r: SchemeRepr) -> Result<Self> {
        CodingScheme::new(r.scheme, r.m)
    }
}

impl From<CodingScheme> for SchemeRepr {
    fn from(s: CodingScheme) -> Self {
        SchemeRepr {
            scheme: s.kind,
            m: s.group_bits,
        }
    }
}

impl CodingScheme {
    pub fn new(kind: SchemeKind, group_bits: u32) -> Result<Self> {
        if !(1..=MAX_GROUP_BITS).contains(&group_bits) {
            return Err(Error::InvalidArgument(format!(
                "group width M must be in 1..={MAX_GROUP_BITS}, got {group_bits}"
            )));
        }
        Ok(CodingScheme { kind, group_bits })
    }

    pub fn binary(group_bits: u32) -> Result<Self> {
        Self::new(SchemeKind::NaturalBinary, group_bits)
    }

    pub fn gray(group_bits: u32) -> Result<Self> {
        Self::new(SchemeKind::ReflectedGray, group_bits)
    }

    pub fn kind(&self) -> SchemeKind {
        self.kind
    }

    pub fn group_bits(&self) -> u32 {
        self.group_bits
    }

    /// Number of classes per map element, `2^M`.
    pub fn classes(&self) -> usize {
        1 << self.group_bits
    }

    /// Map length for a coder of `q` bits.
    pub fn elements_for(&self, q: usize) -> usize {
        q.div_ceil(self.group_bits as usize)
    }

    fn encode_group(&self, v: u32) -> u32 {
        match self.kind {
            SchemeKind::NaturalBinary => v,
            SchemeKind::ReflectedGray => gray_encode(v),
        }
    }

    fn decode_group(&self, v: u32) -> u32 {
        match self.kind {
            SchemeKind::NaturalBinary => v,
            SchemeKind::ReflectedGray => gray_decode(v),
        }
    }
}

impl fmt::Display for CodingScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind.tag(), self.group_bits)
    }
}

/// Parses `binary:3` / `gray:3`.
impl FromStr for CodingScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, m) = s.split_once(':').ok_or_else(|| {
            Error::InvalidArgument(format!("scheme `{s}` must look like `binary:3`"))
        })?;
        let m = m
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad group width in `{s}`")))?;
        CodingScheme::new(kind.parse()?, m)
    }
}

pub fn gray_encode(v: u32) -> u32 {
    v ^ (v >> 1)
}

pub fn gray_decode(mut g: u32) -> u32 {
    let mut shift = 1;
    while shift < 32 {
        g ^= g >> shift;
        shift <<= 1;
    }
    g
}

/// A coder compressed into decimal elements under a [`CodingScheme`].
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AntennaMap {
    #[serde(flatten)]
    scheme: CodingScheme,
    q: usize,
    elements: Vec<u32>,
}

impl AntennaMap {
    /// Wraps raw elements; ranges are checked by [`unzip`].
    pub fn new(scheme: CodingScheme, original_length: usize, elements: Vec<u32>) -> Result<Self> {
        if elements.len() != scheme.elements_for(original_length) {
            return Err(Error::InvalidArgument(format!(
                "map has {} elements, {} bits under M={} need {}",
                elements.len(),
                original_length,
                scheme.group_bits(),
                scheme.elements_for(original_length)
            )));
        }
        Ok(AntennaMap {
            scheme,
            q: original_length,
            elements,
        })
    }

    pub fn scheme(&self) -> CodingScheme {
        self.scheme
    }

    pub fn original_length(&self) -> usize {
        self.q
    }

    pub fn elements(&self) -> &[u32] {
        &self.elements
    }
}

/// Compresses `coder` into an antenna map.
pub fn zip(coder: &AntennaCoder, scheme: CodingScheme) -> AntennaMap {
    let m = scheme.group_bits() as usize;
    let bits = coder.bits();
    let elements = bits
        .chunks(m)
        .map(|group| {
            let mut v = 0u32;
            for i in 0..m {
                v = (v << 1) | group.get(i).copied().unwrap_or(false) as u32;
            }
            scheme.encode_group(v)
        })
        .collect();
    AntennaMap {
        scheme,
        q: bits.len(),
        elements,
    }
}

/// Expands an antenna map back into its coder.
pub fn unzip(map: &AntennaMap) -> Result<AntennaCoder> {
    let m = map.scheme.group_bits();
    let limit = 1u32 << m;
    let mut bits = Vec::with_capacity(map.elements.len() * m as usize);
    for (index, &value) in map.elements.iter().enumerate() {
        if value >= limit {
            return Err(Error::ElementOutOfRange {
                index,
                value,
                bits: m,
            });
        }
        let v = map.scheme.decode_group(value);
        bits.extend((0..m).rev().map(|shift| (v >> shift) & 1 == 1));
    }
    bits.truncate(map.q);
    Ok(AntennaCoder::new(bits))
}
