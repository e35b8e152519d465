//! Beamspace channels and the two antenna-coding objectives.
//!
//! The virtual channel `H_v` is 2K×2K with θ/φ polarization blocks
//! `[[θθ, θφ], [φθ, φφ]]`. SISO gain is `|e_Rᵀ(b) H_v e_T|²`; MIMO capacity
//! is `log₂ det(I + (snr/N_T) H Hᴴ)` with `H = E_Rᵀ H_v E_T`.

use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DMatrixView, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::antenna::{AntennaCoder, PixelAntenna};
use crate::error::{Error, Result};
use crate::optimize::Objective;
use crate::textfmt::{TextReader, TextWriter};

pub const UNIT_NORM_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Polarization {
    Theta,
    Phi,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VirtualChannel {
    k: usize,
    h: DMatrix<Complex64>,
}

impl VirtualChannel {
    pub fn new(h: DMatrix<Complex64>) -> Result<Self> {
        let (r, c) = h.shape();
        if r != c || r == 0 || r % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "virtual channel must be 2K x 2K, got {r}x{c}"
            )));
        }
        Ok(VirtualChannel { k: r / 2, h })
    }

    /// Rich-scattering channel: iid CN(0, 1) entries, deterministic per seed.
    pub fn sample(k: usize, seed: u64) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("k_samples must be >= 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        // fill row by row so the draw order matches the file layout
        let mut h = DMatrix::zeros(2 * k, 2 * k);
        for i in 0..2 * k {
            for j in 0..2 * k {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                h[(i, j)] = Complex64::new(re * s, im * s);
            }
        }
        Ok(VirtualChannel { k, h })
    }

    pub fn zeros(k: usize) -> Self {
        VirtualChannel {
            k,
            h: DMatrix::zeros(2 * k, 2 * k),
        }
    }

    pub fn identity(k: usize) -> Self {
        VirtualChannel {
            k,
            h: DMatrix::identity(2 * k, 2 * k),
        }
    }

    pub fn k_samples(&self) -> usize {
        self.k
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.h
    }

    /// One K×K polarization block: `block(rx, tx)`.
    pub fn block(&self, rx: Polarization, tx: Polarization) -> DMatrixView<'_, Complex64> {
        let offset = |p| match p {
            Polarization::Theta => 0,
            Polarization::Phi => self.k,
        };
        self.h.view((offset(rx), offset(tx)), (self.k, self.k))
    }

    /// Channel sample file: header, K, seed (or `none`), then the 2K×2K
    /// matrix row-major as re/im pairs.
    pub fn to_text(&self, seed: Option<u64>) -> String {
        let mut w = TextWriter::new(CHANNEL_TAG, 1);
        w.field("k_samples", self.k);
        match seed {
            Some(s) => w.field("seed", s),
            None => w.field("seed", "none"),
        }
        let n = 2 * self.k;
        w.complexes("h_v", (0..n * n).map(|i| self.h[(i / n, i % n)]));
        w.finish()
    }

    pub fn from_text(text: &str) -> Result<(Self, Option<u64>)> {
        let mut r = TextReader::new(text);
        let version = r.header(CHANNEL_TAG)?;
        if version != 1 {
            return Err(Error::parse(1, "header", format!("unsupported version {version}")));
        }
        let k: usize = r.parse_field("k_samples")?;
        let seed = match r.parse_field::<String>("seed")?.as_str() {
            "none" => None,
            s => Some(s.parse().map_err(|_| Error::parse(3, "seed", format!("bad seed `{s}`")))?),
        };
        let values = r.complexes("h_v")?;
        r.finish()?;
        let n = 2 * k;
        if values.len() != n * n || k == 0 {
            return Err(Error::InvariantViolation(format!(
                "h_v has {} entries, expected {}",
                values.len(),
                n * n
            )));
        }
        Ok((VirtualChannel { k, h: DMatrix::from_row_slice(n, n, &values) }, seed))
    }

    pub fn save(&self, path: &Path, seed: Option<u64>) -> Result<()> {
        std::fs::write(path, self.to_text(seed)).map_err(|e| Error::file(path, e))
    }

    pub fn load(path: &Path) -> Result<(Self, Option<u64>)> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Self::from_text(&text)
    }
}

const CHANNEL_TAG: &str = "pixcode-channel";

/// Fixed transmit pattern used for SISO: `(1/√(2K))·1`.
pub fn isotropic_pattern(k: usize) -> DVector<Complex64> {
    DVector::from_element(2 * k, Complex64::new(1.0 / ((2 * k) as f64).sqrt(), 0.0))
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

fn unit_norm(v: &DVector<Complex64>, what: &str) -> Result<()> {
    let n = v.norm();
    if (n - 1.0).abs() > UNIT_NORM_TOL {
        return Err(Error::InvalidArgument(format!("{what} must have unit norm, got {n}")));
    }
    Ok(())
}

fn dot_t(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Pixel-antenna receiver facing a fixed conventional transmitter.
#[derive(Clone, Debug)]
pub struct SisoInstance {
    channel: Arc<VirtualChannel>,
    e_t: DVector<Complex64>,
    rx: PixelAntenna,
    // H_v e_T, shared by every coder evaluation
    illumination: DVector<Complex64>,
}

impl SisoInstance {
    pub fn new(channel: Arc<VirtualChannel>, e_t: DVector<Complex64>, rx: PixelAntenna) -> Result<Self> {
        let two_k = 2 * channel.k_samples();
        if e_t.len() != two_k || rx.k_samples() * 2 != two_k {
            return Err(Error::InvalidArgument(format!(
                "dimension mismatch: channel 2K={two_k}, e_T {}, antenna 2K={}",
                e_t.len(),
                2 * rx.k_samples()
            )));
        }
        unit_norm(&e_t, "transmit pattern")?;
        let illumination = channel.matrix() * &e_t;
        Ok(SisoInstance {
            channel,
            e_t,
            rx,
            illumination,
        })
    }

    /// Instance with the default isotropic transmit pattern.
    pub fn isotropic(channel: Arc<VirtualChannel>, rx: PixelAntenna) -> Result<Self> {
        let e_t = isotropic_pattern(channel.k_samples());
        Self::new(channel, e_t, rx)
    }

    pub fn channel(&self) -> &Arc<VirtualChannel> {
        &self.channel
    }

    pub fn e_t(&self) -> &DVector<Complex64> {
        &self.e_t
    }

    pub fn rx(&self) -> &PixelAntenna {
        &self.rx
    }

    /// Channel gain of `coder`; `-inf` when the coder radiates nothing.
    pub fn gain(&self, coder: &AntennaCoder) -> Result<f64> {
        self.gain_bits(coder.bits())
    }

    fn gain_bits(&self, bits: &[bool]) -> Result<f64> {
        match self.rx.pattern(bits) {
            Ok(e) => Ok(dot_t(&e, self.illumination.as_slice()).norm_sqr()),
            Err(Error::ZeroPattern { .. }) => Ok(f64::NEG_INFINITY),
            Err(e) => Err(e),
        }
    }
}

impl Objective for SisoInstance {
    fn arity(&self) -> usize {
        self.rx.q_ports()
    }

    fn evaluate(&self, bits: &[bool]) -> Result<f64> {
        self.gain_bits(bits)
    }
}

/// Pixel antennas at both ends; joint coders are flattened as all transmit
/// coders (antenna order) followed by all receive coders.
#[derive(Clone, Debug)]
pub struct MimoInstance {
    channel: Arc<VirtualChannel>,
    tx: Vec<PixelAntenna>,
    rx: Vec<PixelAntenna>,
    snr: f64,
}

impl MimoInstance {
    pub fn new(
        channel: Arc<VirtualChannel>,
        tx: Vec<PixelAntenna>,
        rx: Vec<PixelAntenna>,
        snr: f64,
    ) -> Result<Self> {
        if tx.is_empty() || rx.is_empty() {
            return Err(Error::InvalidArgument("MIMO needs N_T >= 1 and N_R >= 1".into()));
        }
        if !(snr.is_finite() && snr > 0.0) {
            return Err(Error::InvalidArgument(format!("snr must be positive, got {snr}")));
        }
        let k = channel.k_samples();
        if tx.iter().chain(&rx).any(|a| a.k_samples() != k) {
            return Err(Error::InvalidArgument(format!(
                "every antenna must have K={k} angular samples"
            )));
        }
        Ok(MimoInstance { channel, tx, rx, snr })
    }

    pub fn channel(&self) -> &Arc<VirtualChannel> {
        &self.channel
    }

    pub fn tx(&self) -> &[PixelAntenna] {
        &self.tx
    }

    pub fn rx(&self) -> &[PixelAntenna] {
        &self.rx
    }

    pub fn n_t(&self) -> usize {
        self.tx.len()
    }

    pub fn n_r(&self) -> usize {
        self.rx.len()
    }

    pub fn snr(&self) -> f64 {
        self.snr
    }

    /// Same antennas and channel at a different SNR.
    pub fn with_snr(&self, snr: f64) -> Result<Self> {
        Self::new(self.channel.clone(), self.tx.clone(), self.rx.clone(), snr)
    }

    /// Bit widths of every antenna in flattening order.
    pub fn antenna_widths(&self) -> Vec<usize> {
        self.tx.iter().chain(&self.rx).map(PixelAntenna::q_ports).collect()
    }

    /// Beamspace channel `H = E_Rᵀ H_v E_T` (N_R × N_T).
    pub fn channel_matrix(&self, b_t: &[AntennaCoder], b_r: &[AntennaCoder]) -> Result<DMatrix<Complex64>> {
        if b_t.len() != self.n_t() || b_r.len() != self.n_r() {
            return Err(Error::InvalidArgument(format!(
                "expected {} transmit and {} receive coders, got {} and {}",
                self.n_t(),
                self.n_r(),
                b_t.len(),
                b_r.len()
            )));
        }
        let t: Vec<&[bool]> = b_t.iter().map(AntennaCoder::bits).collect();
        let r: Vec<&[bool]> = b_r.iter().map(AntennaCoder::bits).collect();
        self.matrix_from_bits(&t, &r)
    }

    fn matrix_from_bits(&self, b_t: &[&[bool]], b_r: &[&[bool]]) -> Result<DMatrix<Complex64>> {
        let two_k = 2 * self.channel.k_samples();
        let mut e_t = DMatrix::zeros(two_k, self.n_t());
        for (n, (ant, bits)) in self.tx.iter().zip(b_t).enumerate() {
            e_t.column_mut(n).copy_from_slice(&ant.pattern(bits)?);
        }
        let mut e_r = DMatrix::zeros(two_k, self.n_r());
        for (n, (ant, bits)) in self.rx.iter().zip(b_r).enumerate() {
            e_r.column_mut(n).copy_from_slice(&ant.pattern(bits)?);
        }
        Ok(e_r.transpose() * (self.channel.matrix() * e_t))
    }

    /// Uniform-power capacity in bits/s/Hz.
    pub fn capacity(&self, b_t: &[AntennaCoder], b_r: &[AntennaCoder]) -> Result<f64> {
        let h = self.channel_matrix(b_t, b_r)?;
        Ok(capacity_from_channel(&h, self.snr))
    }

    /// Splits a flattened joint coder into per-antenna slices.
    pub fn split<'a>(&self, bits: &'a [bool]) -> Result<JointSlices<'a>> {
        if bits.len() != self.arity() {
            return Err(Error::InvalidArgument(format!(
                "joint coder has {} bits, expected {}",
                bits.len(),
                self.arity()
            )));
        }
        let mut rest = bits;
        let mut take = |n: usize| {
            let (head, tail) = rest.split_at(n);
            rest = tail;
            head
        };
        let t = self.tx.iter().map(|a| take(a.q_ports())).collect();
        let r = self.rx.iter().map(|a| take(a.q_ports())).collect();
        Ok((t, r))
    }
}

impl Objective for MimoInstance {
    fn arity(&self) -> usize {
        self.antenna_widths().iter().sum()
    }

    fn evaluate(&self, bits: &[bool]) -> Result<f64> {
        let (t, r) = self.split(bits)?;
        match self.matrix_from_bits(&t, &r) {
            Ok(h) => Ok(capacity_from_channel(&h, self.snr)),
            Err(Error::ZeroPattern { .. }) => Ok(f64::NEG_INFINITY),
            Err(e) => Err(e),
        }
    }
}

/// `log₂ det(I + (snr/N_T) H Hᴴ)` for an N_R × N_T channel.
///
/// Works on the smaller of `H Hᴴ` / `Hᴴ H` (same nonzero spectrum) and takes
/// the log-determinant from a Cholesky factor, so large SNR cannot overflow.
pub fn capacity_from_channel(h: &DMatrix<Complex64>, snr: f64) -> f64 {
    let n_t = h.ncols();
    let scale = snr / n_t as f64;
    let gram = if h.nrows() <= h.ncols() {
        h * h.adjoint()
    } else {
        h.adjoint() * h
    };
    let n = gram.nrows();
    let mut a = gram * Complex64::new(scale, 0.0);
    for i in 0..n {
        a[(i, i)] += Complex64::new(1.0, 0.0);
    }
    log2_det_hermitian_pd(a).max(0.0)
}

/// In-place Cholesky `A = L Lᴴ`; returns `log₂ det A = 2 Σ log₂ L_ii`.
fn log2_det_hermitian_pd(mut a: DMatrix<Complex64>) -> f64 {
    let n = a.nrows();
    let mut log2_det = 0.0;
    for j in 0..n {
        let mut d = a[(j, j)].re;
        for k in 0..j {
            d -= a[(j, k)].norm_sqr();
        }
        // I + PSD has every pivot >= 1 in exact arithmetic
        let ljj = d.max(f64::MIN_POSITIVE).sqrt();
        a[(j, j)] = Complex64::new(ljj, 0.0);
        log2_det += 2.0 * ljj.log2();
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= a[(i, k)] * a[(j, k)].conj();
            }
            a[(i, j)] = s / ljj;
        }
    }
    log2_det
}

/// Transmit and receive per-antenna slices of a joint coder.
pub type JointSlices<'a> = (Vec<&'a [bool]>, Vec<&'a [bool]>);

/// A SISO or MIMO problem instance.
#[derive(Clone, Debug)]
pub enum SystemInstance {
    Siso(SisoInstance),
    Mimo(MimoInstance),
}

impl SystemInstance {
    pub fn channel(&self) -> &Arc<VirtualChannel> {
        match self {
            SystemInstance::Siso(s) => s.channel(),
            SystemInstance::Mimo(m) => m.channel(),
        }
    }

    /// Bit widths of the coded antennas in flattening order.
    pub fn antenna_widths(&self) -> Vec<usize> {
        match self {
            SystemInstance::Siso(s) => vec![s.rx().q_ports()],
            SystemInstance::Mimo(m) => m.antenna_widths(),
        }
    }

    pub fn snr(&self) -> Option<f64> {
        match self {
            SystemInstance::Siso(_) => None,
            SystemInstance::Mimo(m) => Some(m.snr()),
        }
    }
}

impl Objective for SystemInstance {
    fn arity(&self) -> usize {
        match self {
            SystemInstance::Siso(s) => s.arity(),
            SystemInstance::Mimo(m) => m.arity(),
        }
    }

    fn evaluate(&self, bits: &[bool]) -> Result<f64> {
        match self {
            SystemInstance::Siso(s) => s.evaluate(bits),
            SystemInstance::Mimo(m) => m.evaluate(bits),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::antenna::{synthesize, AntennaModel};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn channel_sampling() {
        let a = VirtualChannel::sample(72, 5).unwrap();
        assert_eq!(a.matrix().shape(), (144, 144));
        assert_eq!(a, VirtualChannel::sample(72, 5).unwrap());
        assert_eq!(a.block(Polarization::Phi, Polarization::Theta)[(0, 0)], a.matrix()[(72, 0)]);
        assert_eq!(a.block(Polarization::Theta, Polarization::Phi)[(1, 2)], a.matrix()[(1, 74)]);
    }

    #[test]
    fn channel_file_round_trip() {
        let a = VirtualChannel::sample(3, 9).unwrap();
        let (b, seed) = VirtualChannel::from_text(&a.to_text(Some(9))).unwrap();
        assert_eq!(a, b);
        assert_eq!(seed, Some(9));
        let (_, none) = VirtualChannel::from_text(&a.to_text(None)).unwrap();
        assert_eq!(none, None);
    }

    #[test]
    fn capacity_closed_forms() {
        assert_eq!(capacity_from_channel(&DMatrix::zeros(2, 4), 10.0), 0.0);
        let eye = DMatrix::<Complex64>::identity(2, 2);
        assert!((capacity_from_channel(&eye, 2.0) - 2.0).abs() < 1e-12);
        let h = DMatrix::from_element(1, 1, c(0.5));
        assert!((capacity_from_channel(&h, 3.0) - (1.0 + 3.0 * 0.25f64).log2()).abs() < 1e-14);
    }

    #[test]
    fn engineered_unit_gain() {
        // single-port toy antenna whose pattern is e_oc column 0 when the switch is open
        let k = 2;
        let e_t = isotropic_pattern(k);
        let mut e_oc = DMatrix::zeros(2 * k, 2);
        e_oc.column_mut(0).copy_from(&e_t);
        let model = AntennaModel::new(
            c(50.0),
            DMatrix::from_element(1, 1, c(50.0)),
            DVector::from_element(1, c(0.0)),
            e_oc,
            1e10,
        )
        .unwrap();
        let inst = SisoInstance::isotropic(
            Arc::new(VirtualChannel::identity(k)),
            PixelAntenna::new(Arc::new(model)),
        )
        .unwrap();
        assert!((inst.gain(&AntennaCoder::ones(1)).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_channel_gives_zero_objectives() {
        let ant = PixelAntenna::new(Arc::new(synthesize(3, 2, 1).unwrap()));
        let ch = Arc::new(VirtualChannel::zeros(2));
        let siso = SisoInstance::isotropic(ch.clone(), ant.clone()).unwrap();
        let mimo = MimoInstance::new(ch, vec![ant.clone(); 2], vec![ant], 4.0).unwrap();
        for idx in 0..8 {
            let b = AntennaCoder::from_index(idx, 3);
            assert_eq!(siso.gain(&b).unwrap(), 0.0);
            let h = mimo.channel_matrix(&[b.clone(), b.clone()], std::slice::from_ref(&b)).unwrap();
            assert!(h.iter().all(|z| z.norm() == 0.0));
            assert_eq!(mimo.capacity(&[b.clone(), b.clone()], &[b]).unwrap(), 0.0);
        }
    }

    #[test]
    fn instance_validation() {
        let ant = PixelAntenna::new(Arc::new(synthesize(3, 2, 1).unwrap()));
        let ch = Arc::new(VirtualChannel::sample(2, 1).unwrap());
        let bad_e_t = DVector::from_element(4, c(1.0));
        assert!(SisoInstance::new(ch.clone(), bad_e_t, ant.clone()).is_err());
        assert!(MimoInstance::new(ch.clone(), vec![], vec![ant.clone()], 1.0).is_err());
        assert!(MimoInstance::new(ch.clone(), vec![ant.clone()], vec![ant.clone()], 0.0).is_err());
        let wrong_k = Arc::new(VirtualChannel::sample(3, 1).unwrap());
        assert!(SisoInstance::isotropic(wrong_k, ant).is_err());
    }

    #[test]
    fn db_conversion() {
        assert!((db_to_linear(10.0) - 10.0).abs() < 1e-12);
        assert!((linear_to_db(100.0) - 20.0).abs() < 1e-12);
    }
}
