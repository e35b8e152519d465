//! Pixel antenna modeled as a (Q+1)-port network.
//!
//! Port 0 is the antenna (feed) port; ports 1..=Q are the pixel ports, each
//! terminated by an RF switch. A closed switch (bit 0) is a short circuit, an
//! open switch (bit 1) is approximated by the reactive load `j·gamma`.
//! Radiation patterns superpose the open-circuit patterns of all ports,
//! weighted by the port currents, and are returned normalized to unit norm.

use std::borrow::Cow;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub mod io;
mod synth;
mod table;

pub use synth::synthesize;
pub use table::PatternTable;

/// Reactance used for an open switch unless configured otherwise.
pub const DEFAULT_GAMMA: f64 = 1e10;

/// Relative residual accepted from the pixel-port solve.
pub const SOLVE_RESIDUAL_TOL: f64 = 1e-9;

/// Absolute symmetry tolerance applied to loaded impedance matrices.
pub const SYMMETRY_TOL: f64 = 1e-9;

const ZERO_PATTERN_NORM: f64 = 1e-12;

/// Switch states of a pixel antenna; `true` is an open (off) switch.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AntennaCoder(Vec<bool>);

impl AntennaCoder {
    pub fn new(bits: Vec<bool>) -> Self {
        AntennaCoder(bits)
    }

    pub fn zeros(len: usize) -> Self {
        AntennaCoder(vec![false; len])
    }

    pub fn ones(len: usize) -> Self {
        AntennaCoder(vec![true; len])
    }

    /// Builds a coder from 0/1 values, rejecting anything else.
    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        bits.iter()
            .enumerate()
            .map(|(i, &b)| match b {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(Error::InvalidArgument(format!(
                    "coder entry {i} is {other}, expected 0 or 1"
                ))),
            })
            .collect::<Result<Vec<_>>>()
            .map(AntennaCoder)
    }

    /// Coder whose bits spell `index` MSB-first (bit 0 is the most significant).
    pub fn from_index(index: u64, len: usize) -> Self {
        AntennaCoder(index_to_bits(index, len))
    }

    /// Inverse of [`AntennaCoder::from_index`]; `None` for coders longer than 64 bits.
    pub fn index(&self) -> Option<u64> {
        (self.0.len() <= 64).then(|| bits_to_index(&self.0))
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn into_bits(self) -> Vec<bool> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for AntennaCoder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for AntennaCoder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bits: Vec<u8> = s
            .trim()
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(Error::InvalidArgument(format!(
                    "coder string contains `{other}`"
                ))),
            })
            .collect::<Result<_>>()?;
        Self::from_bits(&bits)
    }
}

pub(crate) fn index_to_bits(index: u64, len: usize) -> Vec<bool> {
    (0..len)
        .map(|i| {
            let shift = len - 1 - i;
            shift < 64 && (index >> shift) & 1 == 1
        })
        .collect()
}

pub(crate) fn bits_to_index(bits: &[bool]) -> u64 {
    bits.iter().fold(0u64, |acc, &b| (acc << 1) | b as u64)
}

/// Electromagnetic description of one pixel antenna.
#[derive(Clone, Debug, PartialEq)]
pub struct AntennaModel {
    z_aa: Complex64,
    z_pp: DMatrix<Complex64>,
    z_pa: DVector<Complex64>,
    e_oc: DMatrix<Complex64>,
    gamma: f64,
}

impl AntennaModel {
    /// Assembles a model and checks shape, reciprocity and passivity.
    pub fn new(
        z_aa: Complex64,
        z_pp: DMatrix<Complex64>,
        z_pa: DVector<Complex64>,
        e_oc: DMatrix<Complex64>,
        gamma: f64,
    ) -> Result<Self> {
        let model = AntennaModel {
            z_aa,
            z_pp,
            z_pa,
            e_oc,
            gamma,
        };
        model.check_invariants()?;
        Ok(model)
    }

    pub fn q_ports(&self) -> usize {
        self.z_pa.len()
    }

    pub fn k_samples(&self) -> usize {
        self.e_oc.nrows() / 2
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn z_aa(&self) -> Complex64 {
        self.z_aa
    }

    pub fn z_pp(&self) -> &DMatrix<Complex64> {
        &self.z_pp
    }

    pub fn z_pa(&self) -> &DVector<Complex64> {
        &self.z_pa
    }

    pub fn e_oc(&self) -> &DMatrix<Complex64> {
        &self.e_oc
    }

    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        self.gamma = gamma;
        self.check_invariants()?;
        Ok(self)
    }

    /// The full (Q+1)×(Q+1) impedance matrix, antenna port first.
    pub fn impedance_matrix(&self) -> DMatrix<Complex64> {
        let q = self.q_ports();
        let mut z = DMatrix::zeros(q + 1, q + 1);
        z[(0, 0)] = self.z_aa;
        for i in 0..q {
            z[(0, i + 1)] = self.z_pa[i];
            z[(i + 1, 0)] = self.z_pa[i];
        }
        z.view_mut((1, 1), (q, q)).copy_from(&self.z_pp);
        z
    }

    pub fn check_invariants(&self) -> Result<()> {
        let q = self.q_ports();
        if q == 0 {
            return Err(Error::InvariantViolation("model has no pixel ports".into()));
        }
        if self.z_pp.shape() != (q, q) {
            return Err(Error::InvariantViolation(format!(
                "z_pp is {:?}, expected {q}x{q}",
                self.z_pp.shape()
            )));
        }
        let rows = self.e_oc.nrows();
        if rows == 0 || !rows.is_multiple_of(2) || self.e_oc.ncols() != q + 1 {
            return Err(Error::InvariantViolation(format!(
                "e_oc is {rows}x{}, expected 2K x {}",
                self.e_oc.ncols(),
                q + 1
            )));
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::InvariantViolation(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        let z = self.impedance_matrix();
        if z.iter().chain(self.e_oc.iter()).any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::InvariantViolation("non-finite entry".into()));
        }
        let asym = symmetry_defect(&z);
        if asym > SYMMETRY_TOL {
            return Err(Error::InvariantViolation(format!(
                "impedance matrix is not symmetric (max |Z - Z^T| = {asym:e})"
            )));
        }
        let min_eig = min_real_part_eigenvalue(&z);
        let scale = z.iter().map(|c| c.re.abs()).fold(1.0, f64::max);
        if min_eig < -1e-9 * scale {
            return Err(Error::InvariantViolation(format!(
                "real part of the impedance matrix is not positive semidefinite (min eigenvalue {min_eig:e})"
            )));
        }
        Ok(())
    }

    /// Pixel-port currents for antenna-port current `i_a`:
    /// `i_P = -(Z_PP + Z_L(b))^{-1} z_PA i_A`.
    pub fn pixel_port_currents(
        &self,
        coder: &AntennaCoder,
        i_a: Complex64,
    ) -> Result<DVector<Complex64>> {
        self.check_coder(coder)?;
        self.currents(coder.bits(), i_a)
    }

    pub(crate) fn currents(&self, bits: &[bool], i_a: Complex64) -> Result<DVector<Complex64>> {
        let q = self.q_ports();
        let rhs = self.z_pa.map(|z| -z * i_a);
        if i_a == Complex64::new(0.0, 0.0) {
            return Ok(DVector::zeros(q));
        }
        let mut a = self.z_pp.clone();
        for (i, &open) in bits.iter().enumerate() {
            if open {
                a[(i, i)] += Complex64::new(0.0, self.gamma);
            }
        }
        let lu = a.clone().lu();
        let mut x = lu
            .solve(&rhs)
            .ok_or_else(|| Error::SingularNetwork(format!("LU solve failed for coder {}", fmt_bits(bits))))?;
        let rhs_norm = rhs.norm();
        let mut residual = (&a * &x - &rhs).norm();
        if residual > SOLVE_RESIDUAL_TOL * rhs_norm {
            // one step of iterative refinement
            let r = &rhs - &a * &x;
            if let Some(dx) = lu.solve(&r) {
                x += dx;
            }
            residual = (&a * &x - &rhs).norm();
        }
        if !residual.is_finite() || residual > SOLVE_RESIDUAL_TOL * rhs_norm {
            return Err(Error::SingularNetwork(format!(
                "solve residual {residual:e} exceeds tolerance for coder {}",
                fmt_bits(bits)
            )));
        }
        Ok(x)
    }

    /// Normalized radiation pattern `e(b)`, theta block then phi block.
    pub fn radiation_pattern(&self, coder: &AntennaCoder) -> Result<RadiationPattern> {
        self.check_coder(coder)?;
        self.pattern(coder.bits()).map(|e| RadiationPattern { e })
    }

    pub(crate) fn pattern(&self, bits: &[bool]) -> Result<DVector<Complex64>> {
        let i_p = self.currents(bits, Complex64::new(1.0, 0.0))?;
        let mut e = self.e_oc.column(0).into_owned();
        for (q, i) in i_p.iter().enumerate() {
            e.axpy(*i, &self.e_oc.column(q + 1), Complex64::new(1.0, 0.0));
        }
        let norm = e.norm();
        // negated so a NaN norm is rejected too
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(norm >= ZERO_PATTERN_NORM) {
            return Err(Error::ZeroPattern {
                coder: fmt_bits(bits),
            });
        }
        e.unscale_mut(norm);
        Ok(e)
    }

    pub(crate) fn check_coder(&self, coder: &AntennaCoder) -> Result<()> {
        if coder.len() != self.q_ports() {
            return Err(Error::InvalidArgument(format!(
                "coder has {} bits, antenna has {} pixel ports",
                coder.len(),
                self.q_ports()
            )));
        }
        Ok(())
    }
}

fn fmt_bits(bits: &[bool]) -> String {
    AntennaCoder(bits.to_vec()).to_string()
}

pub(crate) fn symmetry_defect(z: &DMatrix<Complex64>) -> f64 {
    let n = z.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((z[(i, j)] - z[(j, i)]).norm());
        }
    }
    worst
}

pub(crate) fn min_real_part_eigenvalue(z: &DMatrix<Complex64>) -> f64 {
    let re = z.map(|c| c.re);
    let sym = (&re + re.transpose()) * 0.5;
    sym.symmetric_eigenvalues().min()
}

/// Load impedance matrix `Z_L(b)`: 0 for a closed switch, `j·gamma` for an open one.
pub fn load_impedance(coder: &AntennaCoder, gamma: f64) -> DMatrix<Complex64> {
    DMatrix::from_diagonal(&DVector::from_iterator(
        coder.len(),
        coder
            .bits()
            .iter()
            .map(|&open| if open { Complex64::new(0.0, gamma) } else { Complex64::new(0.0, 0.0) }),
    ))
}

/// A unit-norm radiation pattern over 2K samples (theta block, then phi block).
#[derive(Clone, Debug, PartialEq)]
pub struct RadiationPattern {
    e: DVector<Complex64>,
}

impl RadiationPattern {
    pub fn vector(&self) -> &DVector<Complex64> {
        &self.e
    }

    pub fn into_vector(self) -> DVector<Complex64> {
        self.e
    }

    pub fn k_samples(&self) -> usize {
        self.e.len() / 2
    }

    pub fn theta(&self) -> &[Complex64] {
        &self.e.as_slice()[..self.k_samples()]
    }

    pub fn phi(&self) -> &[Complex64] {
        &self.e.as_slice()[self.k_samples()..]
    }
}

/// An antenna model paired with an optional precomputed pattern table.
///
/// Objectives evaluate patterns through this type so that small antennas
/// (where every coder can be tabulated) skip the network solve entirely.
#[derive(Clone, Debug)]
pub struct PixelAntenna {
    model: Arc<AntennaModel>,
    table: Option<Arc<PatternTable>>,
}

impl PixelAntenna {
    pub fn new(model: Arc<AntennaModel>) -> Self {
        PixelAntenna { model, table: None }
    }

    /// Tabulates every coder of `model`; fails when Q is too large for a table.
    pub fn tabulated(model: Arc<AntennaModel>) -> Result<Self> {
        let table = PatternTable::build(&model)?;
        Ok(PixelAntenna {
            model,
            table: Some(Arc::new(table)),
        })
    }

    /// Tabulates when the table fits, otherwise solves on demand.
    pub fn auto(model: Arc<AntennaModel>) -> Result<Self> {
        if PatternTable::fits(&model) {
            Self::tabulated(model)
        } else {
            Ok(Self::new(model))
        }
    }

    pub fn model(&self) -> &Arc<AntennaModel> {
        &self.model
    }

    pub fn table(&self) -> Option<&Arc<PatternTable>> {
        self.table.as_ref()
    }

    pub fn q_ports(&self) -> usize {
        self.model.q_ports()
    }

    pub fn k_samples(&self) -> usize {
        self.model.k_samples()
    }

    /// Unit-norm pattern for `bits`, or `ZeroPattern`.
    pub fn pattern(&self, bits: &[bool]) -> Result<Cow<'_, [Complex64]>> {
        if bits.len() != self.q_ports() {
            return Err(Error::InvalidArgument(format!(
                "coder has {} bits, antenna has {} pixel ports",
                bits.len(),
                self.q_ports()
            )));
        }
        match &self.table {
            Some(t) => t
                .get(bits_to_index(bits))
                .map(Cow::Borrowed)
                .ok_or_else(|| Error::ZeroPattern {
                    coder: fmt_bits(bits),
                }),
            None => Ok(Cow::Owned(self.model.pattern(bits)?.as_slice().to_vec())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn scalar_model() -> AntennaModel {
        AntennaModel::new(
            c(50.0, 0.0),
            DMatrix::from_element(1, 1, c(50.0, 0.0)),
            DVector::from_element(1, c(10.0, 0.0)),
            DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 1.0), c(0.5, 0.0), c(0.0, 0.0)]),
            DEFAULT_GAMMA,
        )
        .unwrap()
    }

    #[test]
    fn load_impedance_cases() {
        assert_eq!(load_impedance(&AntennaCoder::zeros(3), 1e10), DMatrix::zeros(3, 3));
        let all_open = load_impedance(&AntennaCoder::ones(3), 1e10);
        assert_eq!(all_open, DMatrix::identity(3, 3) * c(0.0, 1e10));
        let mixed = load_impedance(&"101".parse().unwrap(), 1e10);
        assert_eq!(mixed[(0, 0)], c(0.0, 1e10));
        assert_eq!(mixed[(1, 1)], c(0.0, 0.0));
        assert_eq!(mixed[(2, 2)], c(0.0, 1e10));
        assert_eq!(mixed[(0, 2)], c(0.0, 0.0));
    }

    #[test]
    fn scalar_solve() {
        let m = scalar_model();
        let i = m.pixel_port_currents(&AntennaCoder::zeros(1), c(1.0, 0.0)).unwrap();
        assert!((i[0] - c(-0.2, 0.0)).norm() < 1e-15);
        let zero = m.pixel_port_currents(&AntennaCoder::zeros(1), c(0.0, 0.0)).unwrap();
        assert_eq!(zero[0], c(0.0, 0.0));
    }

    #[test]
    fn two_by_two_solve_matches_closed_form_inverse() {
        let z_pp = DMatrix::from_row_slice(2, 2, &[c(40.0, 5.0), c(3.0, -2.0), c(3.0, -2.0), c(30.0, 8.0)]);
        let z_pa = DVector::from_vec(vec![c(7.0, 1.0), c(-4.0, 2.0)]);
        let e_oc = DMatrix::from_fn(4, 3, |r, k| c((r + k) as f64, (r * k) as f64 - 1.0));
        let m = AntennaModel::new(c(60.0, 3.0), z_pp.clone(), z_pa.clone(), e_oc, 1e10).unwrap();
        let coder: AntennaCoder = "10".parse().unwrap();
        let got = m.pixel_port_currents(&coder, c(1.0, 0.0)).unwrap();

        // closed-form inverse of [[a, b], [c, d]]
        let a = z_pp[(0, 0)] + c(0.0, 1e10);
        let b = z_pp[(0, 1)];
        let cc = z_pp[(1, 0)];
        let d = z_pp[(1, 1)];
        let det = a * d - b * cc;
        let x0 = -(d * z_pa[0] - b * z_pa[1]) / det;
        let x1 = -(-cc * z_pa[0] + a * z_pa[1]) / det;
        assert!((got[0] - x0).norm() <= 1e-12 * x1.norm().max(1e-300));
        assert!((got[1] - x1).norm() <= 1e-12 * x1.norm());
    }

    #[test]
    fn rejects_asymmetric_and_active_networks() {
        let z_pp = DMatrix::from_row_slice(2, 2, &[c(40.0, 0.0), c(3.0, 0.0), c(3.1, 0.0), c(30.0, 0.0)]);
        let e_oc = DMatrix::from_element(2, 3, c(1.0, 0.0));
        let z_pa = DVector::from_element(2, c(1.0, 0.0));
        let err = AntennaModel::new(c(50.0, 0.0), z_pp, z_pa.clone(), e_oc.clone(), 1e10).unwrap_err();
        assert!(matches!(err, Error::InvariantViolation(_)));

        let active = DMatrix::from_row_slice(2, 2, &[c(-40.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(30.0, 0.0)]);
        let err = AntennaModel::new(c(50.0, 0.0), active, z_pa, e_oc, 1e10).unwrap_err();
        assert!(matches!(err, Error::InvariantViolation(_)));
    }

    #[test]
    fn zero_pattern_detected() {
        let m = AntennaModel::new(
            c(50.0, 0.0),
            DMatrix::from_element(1, 1, c(50.0, 0.0)),
            DVector::from_element(1, c(10.0, 0.0)),
            DMatrix::zeros(2, 2),
            1e10,
        )
        .unwrap();
        assert!(matches!(
            m.radiation_pattern(&AntennaCoder::zeros(1)),
            Err(Error::ZeroPattern { .. })
        ));
    }

    #[test]
    fn coder_index_round_trip() {
        let coder: AntennaCoder = "1011".parse().unwrap();
        assert_eq!(coder.index(), Some(0b1011));
        assert_eq!(AntennaCoder::from_index(0b1011, 4), coder);
        assert!(AntennaCoder::from_bits(&[0, 2]).is_err());
        assert_eq!(coder.to_string(), "1011");
    }

    #[test]
    fn wrong_coder_length_rejected() {
        let m = scalar_model();
        assert!(matches!(
            m.radiation_pattern(&AntennaCoder::zeros(2)),
            Err(Error::InvalidArgument(_))
        ));
    }
}
