#![allow(clippy::needless_range_loop)]

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use pixcode::antenna::{synthesize, AntennaCoder, AntennaModel, PixelAntenna};
use pixcode::channel::{capacity_from_channel, isotropic_pattern, MimoInstance, SisoInstance, VirtualChannel};
use pixcode::optimize::Objective;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<Complex64> {
    DMatrix::from_fn(rows, cols, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

fn antenna(q: usize, k: usize, seed: u64) -> PixelAntenna {
    PixelAntenna::new(Arc::new(synthesize(q, k, seed).unwrap()))
}

/// Capacity from the eigenvalues of `H Hᴴ`.
fn eigen_capacity(h: &DMatrix<Complex64>, snr: f64) -> f64 {
    let gram = h * h.adjoint();
    gram.symmetric_eigen()
        .eigenvalues
        .iter()
        .map(|&l| (1.0 + snr / h.ncols() as f64 * l.max(0.0)).log2())
        .sum()
}

/// Straight-line reimplementation of the SISO gain: Gaussian elimination
/// with partial pivoting, no shared solver or pattern code.
fn reference_gain(model: &AntennaModel, h: &DMatrix<Complex64>, bits: &[bool]) -> f64 {
    let q = model.q_ports();
    let mut a: Vec<Vec<Complex64>> = (0..q)
        .map(|i| {
            let mut row: Vec<Complex64> = (0..q).map(|j| model.z_pp()[(i, j)]).collect();
            if bits[i] {
                row[i] += c(0.0, model.gamma());
            }
            row.push(-model.z_pa()[i]);
            row
        })
        .collect();
    for col in 0..q {
        let pivot = (col..q).max_by(|&x, &y| a[x][col].norm().total_cmp(&a[y][col].norm())).unwrap();
        a.swap(col, pivot);
        for r in col + 1..q {
            let f = a[r][col] / a[col][col];
            for k in col..=q {
                let v = a[col][k];
                a[r][k] -= f * v;
            }
        }
    }
    let mut x = vec![c(0.0, 0.0); q];
    for r in (0..q).rev() {
        let mut s = a[r][q];
        for k in r + 1..q {
            s -= a[r][k] * x[k];
        }
        x[r] = s / a[r][r];
    }
    let n = model.e_oc().nrows();
    let mut e = vec![c(0.0, 0.0); n];
    for (row, ev) in e.iter_mut().enumerate() {
        *ev = model.e_oc()[(row, 0)];
        for p in 0..q {
            *ev += model.e_oc()[(row, p + 1)] * x[p];
        }
    }
    let norm = e.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let e_t = c(1.0 / (n as f64).sqrt(), 0.0);
    let mut y = c(0.0, 0.0);
    for i in 0..n {
        let mut hi = c(0.0, 0.0);
        for j in 0..n {
            hi += h[(i, j)] * e_t;
        }
        y += e[i] / norm * hi;
    }
    y.norm_sqr()
}

#[test]
fn siso_gain_matches_straight_line_oracle() {
    for seed in 0..5 {
        let model = synthesize(4, 8, seed).unwrap();
        let channel = Arc::new(VirtualChannel::sample(8, 100 + seed).unwrap());
        let inst = SisoInstance::isotropic(channel.clone(), PixelAntenna::new(Arc::new(model.clone()))).unwrap();
        for i in 0..16 {
            let coder = AntennaCoder::from_index(i, 4);
            let got = inst.gain(&coder).unwrap();
            let want = reference_gain(&model, channel.matrix(), coder.bits());
            assert!((got - want).abs() <= 1e-9 * want.max(1.0), "seed {seed} coder {coder}: {got} vs {want}");
        }
    }
}

#[test]
fn k72_channel_shape_and_moments() {
    let h = VirtualChannel::sample(72, 3).unwrap();
    assert_eq!(h.matrix().shape(), (144, 144));
    assert_eq!(h, VirtualChannel::sample(72, 3).unwrap());
    let entries: Vec<f64> = h.matrix().iter().take(10_000).map(|v| v.norm_sqr()).collect();
    let mean = entries.iter().sum::<f64>() / entries.len() as f64;
    assert!((mean - 1.0).abs() < 0.05, "mean |h|^2 = {mean}");
}

#[test]
fn engineered_identity_channel_has_unit_gain() {
    let k = 3;
    let e_t = isotropic_pattern(k);
    // the first column carries the whole pattern, so every coder radiates e_T
    let mut e_oc = DMatrix::zeros(2 * k, 3);
    e_oc.set_column(0, &e_t);
    let z_pp = DMatrix::from_diagonal(&DVector::from_element(2, c(50.0, 5.0)));
    let model = AntennaModel::new(c(50.0, 0.0), z_pp, DVector::from_element(2, c(3.0, 1.0)), e_oc, 1e10).unwrap();
    let inst = SisoInstance::new(Arc::new(VirtualChannel::identity(k)), e_t, PixelAntenna::new(Arc::new(model))).unwrap();
    for i in 0..4 {
        assert!((inst.gain(&AntennaCoder::from_index(i, 2)).unwrap() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn zero_channel_gives_zero_gain_and_capacity() {
    let inst = SisoInstance::isotropic(Arc::new(VirtualChannel::zeros(4)), antenna(5, 4, 1)).unwrap();
    for i in 0..32 {
        assert_eq!(inst.gain(&AntennaCoder::from_index(i, 5)).unwrap(), 0.0);
    }
    let mimo = MimoInstance::new(Arc::new(VirtualChannel::zeros(4)), vec![antenna(3, 4, 1); 2], vec![antenna(3, 4, 2)], 10.0).unwrap();
    let h = mimo.channel_matrix(&[AntennaCoder::zeros(3), AntennaCoder::ones(3)], &[AntennaCoder::zeros(3)]).unwrap();
    assert!(h.iter().all(|v| v.norm() == 0.0));
    assert_eq!(mimo.evaluate(&[false; 9]).unwrap(), 0.0);
}

#[test]
fn identity_capacity_closed_form() {
    let h = DMatrix::<Complex64>::identity(2, 2);
    assert!((capacity_from_channel(&h, 2.0) - 2.0).abs() < 1e-12);
    assert_eq!(capacity_from_channel(&DMatrix::zeros(2, 4), 100.0), 0.0);
}

#[test]
fn single_antenna_mimo_reduces_to_siso() {
    let channel = Arc::new(VirtualChannel::sample(6, 8).unwrap());
    let tx = antenna(5, 6, 1);
    let rx = antenna(4, 6, 2);
    let snr = 3.5;
    let mimo = MimoInstance::new(channel.clone(), vec![tx.clone()], vec![rx.clone()], snr).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20 {
        let b_t = AntennaCoder::from_index(rng.gen_range(0..32), 5);
        let b_r = AntennaCoder::from_index(rng.gen_range(0..16), 4);
        let e_t = tx.model().radiation_pattern(&b_t).unwrap().into_vector();
        let siso = SisoInstance::new(channel.clone(), e_t, rx.clone()).unwrap();
        let gain = siso.gain(&b_r).unwrap();
        let h = mimo.channel_matrix(std::slice::from_ref(&b_t), std::slice::from_ref(&b_r)).unwrap();
        assert!((h[(0, 0)].norm_sqr() - gain).abs() < 1e-12 * gain.max(1.0));
        let cap = mimo.capacity(&[b_t], &[b_r]).unwrap();
        assert!((cap - (1.0 + snr * gain).log2()).abs() < 1e-9);
    }
}

#[test]
fn antenna_order_permutes_channel_matrix() {
    let channel = Arc::new(VirtualChannel::sample(4, 2).unwrap());
    let (a, b, r) = (antenna(3, 4, 1), antenna(3, 4, 2), antenna(3, 4, 3));
    let bt = [AntennaCoder::from_index(5, 3), AntennaCoder::from_index(2, 3)];
    let br = [AntennaCoder::from_index(6, 3)];
    let m1 = MimoInstance::new(channel.clone(), vec![a.clone(), b.clone()], vec![r.clone()], 1.0).unwrap();
    let m2 = MimoInstance::new(channel, vec![b, a], vec![r], 1.0).unwrap();
    let h1 = m1.channel_matrix(&bt, &br).unwrap();
    let h2 = m2.channel_matrix(&[bt[1].clone(), bt[0].clone()], &br).unwrap();
    assert_eq!(h1.column(0), h2.column(1));
    assert_eq!(h1.column(1), h2.column(0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn capacity_matches_eigenvalue_sum(n_r in 1usize..5, n_t in 1usize..5, snr_db in -10.0f64..40.0, seed in any::<u64>()) {
        let h = random_matrix(n_r, n_t, &mut ChaCha8Rng::seed_from_u64(seed));
        let snr = 10f64.powf(snr_db / 10.0);
        let got = capacity_from_channel(&h, snr);
        let want = eigen_capacity(&h, snr);
        prop_assert!((got - want).abs() <= 1e-9 * want.max(1.0), "{got} vs {want}");
    }

    #[test]
    fn capacity_is_unitarily_invariant(n_r in 1usize..5, n_t in 1usize..5, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = random_matrix(n_r, n_t, &mut rng);
        let u = random_matrix(n_r, n_r, &mut rng).qr().q();
        let a = capacity_from_channel(&h, 5.0);
        let b = capacity_from_channel(&(u * &h), 5.0);
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
    }

    #[test]
    fn capacity_is_monotone_in_snr(n_r in 1usize..5, n_t in 1usize..5, seed in any::<u64>()) {
        let h = random_matrix(n_r, n_t, &mut ChaCha8Rng::seed_from_u64(seed));
        let mut last = 0.0;
        for i in 0..20 {
            let cap = capacity_from_channel(&h, 10f64.powf((-10.0 + 2.5 * i as f64) / 10.0));
            prop_assert!(cap >= last);
            last = cap;
        }
    }

    #[test]
    fn gain_ignores_global_phase_of_the_pattern(seed in any::<u64>(), phi in 0.0f64..std::f64::consts::TAU, idx in 0u64..32) {
        let model = synthesize(5, 4, seed).unwrap();
        let rotated = AntennaModel::new(model.z_aa(), model.z_pp().clone(), model.z_pa().clone(), model.e_oc() * Complex64::from_polar(1.0, phi), model.gamma()).unwrap();
        let channel = Arc::new(VirtualChannel::sample(4, seed ^ 1).unwrap());
        let a = SisoInstance::isotropic(channel.clone(), PixelAntenna::new(Arc::new(model))).unwrap();
        let b = SisoInstance::isotropic(channel, PixelAntenna::new(Arc::new(rotated))).unwrap();
        let coder = AntennaCoder::from_index(idx, 5);
        let (ga, gb) = (a.gain(&coder).unwrap(), b.gain(&coder).unwrap());
        prop_assert!((ga - gb).abs() <= 1e-12 * ga.max(1.0));
    }
}
