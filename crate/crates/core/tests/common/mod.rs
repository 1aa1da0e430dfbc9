//! Oracles and generators shared by the integration tests.
#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;
use oam_turb::entanglement::BiphotonState;
use oam_turb::field::{ComplexField, GridSpec};
use oam_turb::linalg::CMatrix;
use oam_turb::rng::{stream, Domain};
use rand::Rng;
use rand_distr::StandardNormal;

pub const LAMBDA: f64 = 1064e-9;
pub const W0: f64 = 0.0735;

pub fn gaussian_c(rng: &mut impl Rng) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Smooth, well-sampled field: a few displaced, tilted Gaussians.
pub fn smooth_field(grid: GridSpec, seed: u64) -> ComplexField {
    let mut rng = stream(Domain::Test, seed, 0, 0);
    let blobs: Vec<(f64, f64, f64, f64, f64, Complex64)> = (0..3)
        .map(|_| {
            let e = grid.extent();
            (
                rng.random_range(-0.1..0.1) * e,
                rng.random_range(-0.1..0.1) * e,
                rng.random_range(0.05..0.1) * e,
                rng.random_range(-3.0..3.0) / e,
                rng.random_range(-3.0..3.0) / e,
                gaussian_c(&mut rng),
            )
        })
        .collect();
    let mut f = ComplexField::from_fn(grid, LAMBDA, |x, y| {
        blobs
            .iter()
            .map(|&(cx, cy, w, kx, ky, a)| {
                let r2 = (x - cx).powi(2) + (y - cy).powi(2);
                a * (-r2 / (w * w)).exp() * Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * (kx * x + ky * y))
            })
            .sum()
    });
    f.normalize();
    f
}

pub fn random_unitary(d: usize, rng: &mut impl Rng) -> CMatrix {
    let m = DMatrix::from_fn(d, d, |_, _| gaussian_c(rng));
    let qr = m.qr();
    let (q, r) = (qr.q(), qr.r());
    // fix column phases so the distribution is Haar
    let mut q = q;
    for k in 0..d {
        let ph = r[(k, k)] / r[(k, k)].norm();
        for i in 0..d {
            q[(i, k)] *= ph;
        }
    }
    q
}

pub fn random_state(d: usize, rng: &mut impl Rng, norm: f64) -> BiphotonState {
    let mut c: Vec<Complex64> = (0..d * d).map(|_| gaussian_c(rng)).collect();
    let s = c.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    c.iter_mut().for_each(|v| *v *= norm / s);
    BiphotonState::from_coefficients(d, c).unwrap()
}

/// Partial transpose built straight from the tensor indices, independent
/// of the library routine.
pub fn brute_negativity(rho: &CMatrix, d: usize) -> f64 {
    let mut pt = CMatrix::zeros(d * d, d * d);
    for a in 0..d {
        for b in 0..d {
            for a2 in 0..d {
                for b2 in 0..d {
                    pt[(a * d + b, a2 * d + b2)] = rho[(a * d + b2, a2 * d + b)];
                }
            }
        }
    }
    let h = (&pt + pt.adjoint()).scale(0.5);
    let neg: f64 = h.symmetric_eigenvalues().iter().filter(|v| **v < 0.0).map(|v| -v).sum();
    2.0 * neg / (d as f64 - 1.0)
}

pub fn werner(d: usize, p: f64) -> CMatrix {
    let psi = BiphotonState::maximally_entangled(d);
    let c = psi.coefficients();
    let n = d * d;
    CMatrix::from_fn(n, n, |i, j| {
        let mix = if i == j { (1.0 - p) / n as f64 } else { 0.0 };
        c[i] * c[j].conj() * p + mix
    })
}

/// CGLMP expression evaluated on deterministic outcome tables, enumerated
/// in the test itself rather than through the operator.
pub fn cglmp_deterministic_max(d: usize) -> f64 {
    let p = |x: usize, y: usize, k: i64| -> f64 {
        // indicator of x = y + k (mod d)
        (((x as i64 - y as i64 - k).rem_euclid(d as i64)) == 0) as u8 as f64
    };
    let mut best = f64::NEG_INFINITY;
    for a1 in 0..d {
        for a2 in 0..d {
            for b1 in 0..d {
                for b2 in 0..d {
                    let mut s = 0.0;
                    for k in 0..d / 2 {
                        let wgt = 1.0 - 2.0 * k as f64 / (d as f64 - 1.0);
                        let k = k as i64;
                        s += wgt
                            * (p(a1, b1, k) + p(b1, a2, k + 1) + p(a2, b2, k) + p(b2, a1, k)
                                - p(a1, b1, -k - 1)
                                - p(b1, a2, -k)
                                - p(a2, b2, -k - 1)
                                - p(b2, a1, -k - 1));
                    }
                    best = best.max(s);
                }
            }
        }
    }
    best
}

/// Locates a two-peaked spectrum for a positive `l0`: the largest value at
/// `l >= 1`, the largest at `l <= -1` lying within 2 of `-l0`, and a trough
/// between them that sits more than one combined standard error below both
/// peaks. Input is `(l, P, stderr)`. Returns `(secondary, trough, primary)`.
pub fn double_peak(points: &[(i32, f64, f64)], l0: i32) -> Option<(i32, i32, i32)> {
    let argmax = |pred: &dyn Fn(i32) -> bool| {
        points
            .iter()
            .filter(|p| pred(p.0))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .copied()
    };
    let primary = argmax(&|l| l >= 1)?;
    let secondary = argmax(&|l| l <= -1)?;
    if (secondary.0 + l0).abs() > 2 {
        return None;
    }
    let trough = points
        .iter()
        .filter(|p| p.0 > secondary.0 && p.0 < primary.0)
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .copied()?;
    let above = |peak: (i32, f64, f64)| peak.1 - trough.1 > (peak.2.powi(2) + trough.2.powi(2)).sqrt();
    (above(primary) && above(secondary)).then_some((secondary.0, trough.0, primary.0))
}
