use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{AntennaModel, DEFAULT_GAMMA};
use crate::error::{Error, Result};

/// Scale of the resistive (Gram) part, in ohms.
const RESISTANCE_SCALE: f64 = 50.0;
/// Standard deviation of the reactive part, in ohms.
const REACTANCE_SCALE: f64 = 30.0;
/// Added to the antenna-port resistance so that `Re{z_aa} >= 1 ohm`.
const FEED_RESISTANCE_FLOOR: f64 = 1.0;

/// Draws a passive, reciprocal (Q+1)-port pixel network.
///
/// `Re{Z}` is a scaled Gram matrix `S Sᵀ` with `S` of size (Q+1)×2(Q+1),
/// so it is positive semidefinite and well conditioned; `Im{Z}` is a
/// symmetrized Gaussian matrix. Open-circuit patterns are iid CN(0, 1).
pub fn synthesize(q_ports: usize, k_samples: usize, seed: u64) -> Result<AntennaModel> {
    if q_ports == 0 || k_samples == 0 {
        return Err(Error::InvalidArgument(format!(
            "q_ports and k_samples must be >= 1 (got q={q_ports}, k={k_samples})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };

    let n = q_ports + 1;
    let s = DMatrix::<f64>::from_fn(n, 2 * n, |_, _| normal());
    let mut r = (&s * s.transpose()) * (RESISTANCE_SCALE / (2 * n) as f64);
    r[(0, 0)] += FEED_RESISTANCE_FLOOR;

    let x_raw = DMatrix::<f64>::from_fn(n, n, |_, _| normal() * REACTANCE_SCALE);
    let x = (&x_raw + x_raw.transpose()) * 0.5;

    let mut z = DMatrix::<Complex64>::from_fn(n, n, |i, j| Complex64::new(r[(i, j)], x[(i, j)]));
    // exact symmetry regardless of rounding in the products above
    for i in 0..n {
        for j in (i + 1)..n {
            z[(j, i)] = z[(i, j)];
        }
    }

    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let e_oc = DMatrix::<Complex64>::from_fn(2 * k_samples, n, |_, _| {
        Complex64::new(normal() * scale, normal() * scale)
    });

    let z_aa = z[(0, 0)];
    let z_pa = DVector::from_iterator(q_ports, (1..n).map(|i| z[(i, 0)]));
    let z_pp = z.view((1, 1), (q_ports, q_ports)).into_owned();
    AntennaModel::new(z_aa, z_pp, z_pa, e_oc, DEFAULT_GAMMA)
}
