//! CGLMP Bell operator for two qudits.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;

use crate::entanglement::DensityMatrix;
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigenvalues, kron, outer, CMatrix};

/// Bound obeyed by every local hidden-variable model.
pub const CLASSICAL_BOUND: f64 = 2.0;

const ALICE_SHIFT: [f64; 2] = [0.0, 0.5];
const BOB_SHIFT: [f64; 2] = [0.25, -0.25];

fn check_d(d: usize) -> Result<()> {
    if (2..=4).contains(&d) {
        Ok(())
    } else {
        Err(Error::UnsupportedDimension(d))
    }
}

/// Measurement vectors `|A_v>` for Alice's setting `a` (0 or 1).
pub fn alice_basis(d: usize, a: usize) -> Vec<Vec<Complex64>> {
    let s = 1.0 / (d as f64).sqrt();
    (0..d)
        .map(|v| {
            (0..d)
                .map(|j| Complex64::from_polar(s, 2.0 * PI / d as f64 * j as f64 * (v as f64 + ALICE_SHIFT[a])))
                .collect()
        })
        .collect()
}

/// Measurement vectors `|B_w>` for Bob's setting `b` (0 or 1).
pub fn bob_basis(d: usize, b: usize) -> Vec<Vec<Complex64>> {
    let s = 1.0 / (d as f64).sqrt();
    (0..d)
        .map(|w| {
            (0..d)
                .map(|j| Complex64::from_polar(s, 2.0 * PI / d as f64 * j as f64 * (-(w as f64) + BOB_SHIFT[b])))
                .collect()
        })
        .collect()
}

/// Operator whose expectation is `P(A_a - B_b = m mod d)`.
pub fn probability_operator(d: usize, a: usize, b: usize, m: i64) -> CMatrix {
    let alice: Vec<CMatrix> = alice_basis(d, a).iter().map(|v| outer(v)).collect();
    let bob: Vec<CMatrix> = bob_basis(d, b).iter().map(|v| outer(v)).collect();
    let di = d as i64;
    let mut out = CMatrix::zeros(d * d, d * d);
    for r in 0..d {
        let v = (r as i64 + m).rem_euclid(di) as usize;
        out += kron(&alice[v], &bob[r]);
    }
    out
}

/// `(weight, alice setting, bob setting, m)` with each term `weight * P(A - B = m)`.
fn terms(d: usize) -> Vec<(f64, usize, usize, i64)> {
    let mut t = Vec::new();
    for k in 0..(d / 2) as i64 {
        let w = 1.0 - 2.0 * k as f64 / (d as f64 - 1.0);
        t.extend([
            (w, 0, 0, k),
            (w, 1, 0, -(k + 1)),
            (w, 1, 1, k),
            (w, 0, 1, -k),
            (-w, 0, 0, -k - 1),
            (-w, 1, 0, k),
            (-w, 1, 1, -k - 1),
            (-w, 0, 1, k + 1),
        ]);
    }
    t
}

fn build_operator(d: usize) -> CMatrix {
    let mut s = CMatrix::zeros(d * d, d * d);
    for (w, a, b, m) in terms(d) {
        s += probability_operator(d, a, b, m).scale(w);
    }
    s
}

/// Bell operator `S_d`, built once per dimension.
pub fn bell_operator(d: usize) -> Result<&'static CMatrix> {
    check_d(d)?;
    static CACHE: OnceLock<Vec<CMatrix>> = OnceLock::new();
    let ops = CACHE.get_or_init(|| (2..=4).map(build_operator).collect());
    Ok(&ops[d - 2])
}

/// `Tr(S_d rho)`.
pub fn bell_parameter(rho: &DensityMatrix) -> Result<f64> {
    let s = bell_operator(rho.d)?;
    Ok((s * &rho.rho).trace().re)
}

/// Largest eigenvalue of `S_d`: the best quantum value.
pub fn max_quantum_value(d: usize) -> Result<f64> {
    let ev = hermitian_eigenvalues(bell_operator(d)?, 1e-10)?;
    Ok(*ev.last().expect("nonempty spectrum"))
}

/// Maximum of the same expression over deterministic local strategies.
pub fn deterministic_bound(d: usize) -> Result<f64> {
    check_d(d)?;
    let t = terms(d);
    let di = d as i64;
    let mut best = f64::NEG_INFINITY;
    for code in 0..d.pow(4) {
        let digits = [code % d, code / d % d, code / (d * d) % d, code / (d * d * d)];
        let (alice, bob) = ([digits[0], digits[1]], [digits[2], digits[3]]);
        let v: f64 = t
            .iter()
            .filter(|(_, a, b, m)| (alice[*a] as i64 - bob[*b] as i64 - m).rem_euclid(di) == 0)
            .map(|(w, ..)| w)
            .sum();
        best = best.max(v);
    }
    Ok(best)
}
