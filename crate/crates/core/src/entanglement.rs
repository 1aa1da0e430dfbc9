//! Two-photon output states, disorder-averaged density matrices and their
//! entanglement.
//!
//! Alice keeps one photon of `sum_j |j, j> / sqrt(d)` and Bob's photon
//! crosses the channel. Basis label `j` counts Alice's modes in ascending
//! order and Bob's in descending order, so Bob's `j` is the partner of
//! Alice's `j` in the input state. Vectors are indexed `j_alice * d + j_bob`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{clip_eigenvalue, hermitian_eigenvalues, outer, CMatrix};
use crate::modes::CrosstalkMatrix;
use crate::rng::{stream, Domain};

/// Tolerance on the anti-Hermitian part accepted by the measures.
pub const HERMITIAN_TOL: f64 = 1e-8;
pub const DEFAULT_BOOTSTRAP_RESAMPLES: usize = 200;
pub const MIN_BOOTSTRAP_REALIZATIONS: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<i32>", into = "Vec<i32>")]
pub struct EncodingSubspace {
    modes: Vec<i32>,
}

impl EncodingSubspace {
    pub fn new(mut modes: Vec<i32>) -> Result<Self> {
        modes.sort_unstable();
        let d = modes.len();
        modes.dedup();
        if modes.len() != d {
            return Err(Error::InvalidArgument("encoding modes must be distinct".into()));
        }
        if !(2..=4).contains(&d) {
            return Err(Error::UnsupportedDimension(d));
        }
        Ok(Self { modes })
    }

    /// `{-l0, l0}`
    pub fn qubit(l0: i32) -> Result<Self> {
        Self::new(vec![-l0, l0])
    }

    /// `{-l0, 0, l0}`
    pub fn qutrit(l0: i32) -> Result<Self> {
        Self::new(vec![-l0, 0, l0])
    }

    /// `{-l2, -l1, l1, l2}`
    pub fn ququart(l1: i32, l2: i32) -> Result<Self> {
        Self::new(vec![-l2, -l1, l1, l2])
    }

    pub fn dim(&self) -> usize {
        self.modes.len()
    }

    /// Modes in ascending order (Alice's labelling).
    pub fn modes(&self) -> &[i32] {
        &self.modes
    }

    /// Mode carried by Bob's basis state `j` (descending order).
    pub fn bob_mode(&self, j: usize) -> i32 {
        self.modes[self.modes.len() - 1 - j]
    }

    pub fn label(&self) -> String {
        let parts: Vec<String> = self.modes.iter().map(|m| m.to_string()).collect();
        parts.join(";")
    }
}

impl TryFrom<Vec<i32>> for EncodingSubspace {
    type Error = Error;

    fn try_from(v: Vec<i32>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<EncodingSubspace> for Vec<i32> {
    fn from(s: EncodingSubspace) -> Self {
        s.modes
    }
}

/// Unnormalized output state `M[j0][j] = c_{l(j), l0(j0)} / sqrt(d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BiphotonState {
    d: usize,
    coeffs: Vec<Complex64>,
}

impl BiphotonState {
    pub fn from_coefficients(d: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != d * d {
            return Err(Error::DimensionMismatch {
                expected: d * d,
                got: coeffs.len(),
            });
        }
        Ok(Self { d, coeffs })
    }

    /// Input state `sum_j |j, j> / sqrt(d)`.
    pub fn maximally_entangled(d: usize) -> Self {
        let mut coeffs = vec![Complex64::default(); d * d];
        let a = 1.0 / (d as f64).sqrt();
        for j in 0..d {
            coeffs[j * d + j] = Complex64::new(a, 0.0);
        }
        Self { d, coeffs }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Squared norm: this realization's contribution to the trace.
    pub fn norm_sqr(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Applies `alice (x) 1` for a `d x d` unitary on Alice's photon.
    pub fn with_alice_unitary(&self, alice: &CMatrix) -> Self {
        let d = self.d;
        let m = CMatrix::from_row_slice(d, d, &self.coeffs);
        let out = alice * m;
        let mut coeffs = Vec::with_capacity(d * d);
        for r in 0..d {
            for c in 0..d {
                coeffs.push(out[(r, c)]);
            }
        }
        Self { d, coeffs }
    }
}

/// Projects one realization's crosstalk onto the encoding subspace.
pub fn assemble_biphoton(ct: &CrosstalkMatrix, space: &EncodingSubspace) -> Result<BiphotonState> {
    let d = space.dim();
    let a = 1.0 / (d as f64).sqrt();
    let mut coeffs = Vec::with_capacity(d * d);
    for j0 in 0..d {
        let l0 = space.bob_mode(j0);
        for j in 0..d {
            let l = space.bob_mode(j);
            let c = ct.get(l, l0).ok_or_else(|| {
                if ct.input_indices.contains(&l0) {
                    Error::MissingMode(l)
                } else {
                    Error::MissingMode(l0)
                }
            })?;
            coeffs.push(c * a);
        }
    }
    Ok(BiphotonState { d, coeffs })
}

/// Disorder-averaged, trace-normalized two-photon state.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    pub d: usize,
    pub rho: CMatrix,
    /// Mean per-realization trace before normalization.
    pub trace: f64,
    pub trace_stderr: f64,
    pub n_realizations: usize,
    /// Standard errors of `Re rho` and `Im rho`, element-wise.
    pub stderr_re: DMatrix<f64>,
    pub stderr_im: DMatrix<f64>,
}

impl DensityMatrix {
    /// Wraps an already normalized matrix (no ensemble statistics).
    pub fn from_matrix(d: usize, rho: CMatrix) -> Result<Self> {
        if rho.nrows() != d * d || rho.ncols() != d * d {
            return Err(Error::DimensionMismatch {
                expected: d * d,
                got: rho.nrows(),
            });
        }
        Ok(Self {
            d,
            rho,
            trace: 1.0,
            trace_stderr: 0.0,
            n_realizations: 1,
            stderr_re: DMatrix::zeros(d * d, d * d),
            stderr_im: DMatrix::zeros(d * d, d * d),
        })
    }

    pub fn pure(state: &BiphotonState) -> Result<Self> {
        accumulate(std::slice::from_ref(state))
    }

    /// `p |psi0><psi0| + (1 - p) 1 / d^2`.
    pub fn werner(d: usize, p: f64) -> Self {
        let psi = BiphotonState::maximally_entangled(d);
        let n = d * d;
        let rho = outer(&psi.coeffs).scale(p)
            + CMatrix::identity(n, n).scale((1.0 - p) / n as f64);
        Self::from_matrix(d, rho).expect("dimensions match")
    }
}

/// Running sum for the disorder average; merges are order-independent up
/// to floating-point association.
///
/// Second moments are taken about the first sample added, so identical
/// realizations give exactly zero spread.
#[derive(Debug, Clone)]
pub struct Accumulator {
    d: usize,
    sum: CMatrix,
    shift: Option<(CMatrix, f64)>,
    dev_sum: CMatrix,
    dev_sq_re: DMatrix<f64>,
    dev_sq_im: DMatrix<f64>,
    trace_sum: f64,
    trace_dev_sum: f64,
    trace_dev_sq: f64,
    n: usize,
}

impl Accumulator {
    pub fn new(d: usize) -> Self {
        let n = d * d;
        Self {
            d,
            sum: CMatrix::zeros(n, n),
            shift: None,
            dev_sum: CMatrix::zeros(n, n),
            dev_sq_re: DMatrix::zeros(n, n),
            dev_sq_im: DMatrix::zeros(n, n),
            trace_sum: 0.0,
            trace_dev_sum: 0.0,
            trace_dev_sq: 0.0,
            n: 0,
        }
    }

    pub fn add(&mut self, state: &BiphotonState) -> Result<()> {
        if state.d != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: state.d,
            });
        }
        let o = outer(&state.coeffs);
        let t = state.norm_sqr();
        let (s, ts) = self.shift.get_or_insert_with(|| (o.clone(), t));
        for (k, v) in o.iter().enumerate() {
            let dv = v - s[k];
            self.dev_sum[k] += dv;
            self.dev_sq_re[k] += dv.re * dv.re;
            self.dev_sq_im[k] += dv.im * dv.im;
        }
        let dt = t - *ts;
        self.trace_dev_sum += dt;
        self.trace_dev_sq += dt * dt;
        self.sum += o;
        self.trace_sum += t;
        self.n += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: &Accumulator) -> Result<()> {
        if other.d != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: other.d,
            });
        }
        let Some((os, ots)) = &other.shift else {
            return Ok(());
        };
        let (s, ts) = self.shift.get_or_insert_with(|| (os.clone(), *ots));
        // re-centre the other's moments on our shift
        let m = other.n as f64;
        for k in 0..s.len() {
            let c = os[k] - s[k];
            let od = other.dev_sum[k];
            self.dev_sq_re[k] += other.dev_sq_re[k] + 2.0 * c.re * od.re + m * c.re * c.re;
            self.dev_sq_im[k] += other.dev_sq_im[k] + 2.0 * c.im * od.im + m * c.im * c.im;
            self.dev_sum[k] += od + c * m;
        }
        let c = ots - *ts;
        self.trace_dev_sq += other.trace_dev_sq + 2.0 * c * other.trace_dev_sum + m * c * c;
        self.trace_dev_sum += other.trace_dev_sum + m * c;
        self.sum += &other.sum;
        self.trace_sum += other.trace_sum;
        self.n += other.n;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn finish(&self) -> Result<DensityMatrix> {
        if self.n == 0 {
            return Err(Error::TooFewRealizations { min: 1, got: 0 });
        }
        let n = self.n as f64;
        let mean_trace = self.trace_sum / n;
        if mean_trace < 1e-12 {
            return Err(Error::LossyChannel(mean_trace));
        }
        let rho = self.sum.unscale(self.trace_sum);
        // standard error of the mean from shifted moments
        let se = |dev_sum: f64, dev_sq: f64| {
            if self.n < 2 {
                return 0.0;
            }
            let var = ((dev_sq - dev_sum * dev_sum / n) / (n - 1.0)).max(0.0);
            (var / n).sqrt()
        };
        let dim = self.d * self.d;
        // per-realization samples are |psi_i><psi_i| / mean_trace
        let stderr_re = DMatrix::from_fn(dim, dim, |i, j| {
            se(self.dev_sum[(i, j)].re, self.dev_sq_re[(i, j)]) / mean_trace
        });
        let stderr_im = DMatrix::from_fn(dim, dim, |i, j| {
            se(self.dev_sum[(i, j)].im, self.dev_sq_im[(i, j)]) / mean_trace
        });
        Ok(DensityMatrix {
            d: self.d,
            rho,
            trace: mean_trace,
            trace_stderr: se(self.trace_dev_sum, self.trace_dev_sq),
            n_realizations: self.n,
            stderr_re,
            stderr_im,
        })
    }
}

/// `rho = sum_i |psi_i><psi_i| / sum_i <psi_i|psi_i>`.
pub fn accumulate(states: &[BiphotonState]) -> Result<DensityMatrix> {
    let first = states.first().ok_or(Error::TooFewRealizations { min: 1, got: 0 })?;
    let mut acc = Accumulator::new(first.d);
    for s in states {
        acc.add(s)?;
    }
    acc.finish()
}

fn check_dim(rho: &DensityMatrix, d: usize) -> Result<()> {
    if rho.d != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: rho.d,
        });
    }
    Ok(())
}

/// Wootters concurrence of a two-qubit state.
pub fn concurrence(rho: &DensityMatrix) -> Result<f64> {
    check_dim(rho, 2)?;
    let r = &rho.rho;
    let dev = crate::linalg::hermiticity_error(r);
    if dev > HERMITIAN_TOL {
        return Err(Error::NotHermitian(dev));
    }
    // sigma_y (x) sigma_y is real: anti-diagonal (-1, 1, 1, -1)
    let mut yy = CMatrix::zeros(4, 4);
    for (i, s) in [-1.0, 1.0, 1.0, -1.0].into_iter().enumerate() {
        yy[(i, 3 - i)] = Complex64::new(s, 0.0);
    }
    // lambda_i are the singular values of V^T (Y (x) Y) V with V = U sqrt(P) from
    // rho = U P U^+; round-off in the null eigenvalues enters only at second order
    let eig = ((r + r.adjoint()).scale(0.5)).symmetric_eigen();
    let mut v = eig.eigenvectors;
    for (k, p) in eig.eigenvalues.iter().enumerate() {
        let w = clip_eigenvalue(*p)?.sqrt();
        v.column_mut(k).scale_mut(w);
    }
    let tau = v.transpose() * yy * v;
    let mut lambdas: Vec<f64> = tau.singular_values().iter().copied().collect();
    lambdas.sort_by(|a, b| b.total_cmp(a));
    Ok((lambdas[0] - lambdas[1] - lambdas[2] - lambdas[3]).max(0.0))
}

/// Partial transpose on Bob's index.
pub fn partial_transpose(rho: &CMatrix, d: usize) -> CMatrix {
    let n = d * d;
    CMatrix::from_fn(n, n, |r, c| {
        let (a, b) = (r / d, r % d);
        let (a2, b2) = (c / d, c % d);
        rho[(a * d + b2, a2 * d + b)]
    })
}

/// Negativity normalized to 1 for maximally entangled states:
/// `(||rho^PT||_1 - 1) / (d - 1)`.
pub fn negativity(rho: &DensityMatrix) -> Result<f64> {
    if !(2..=4).contains(&rho.d) {
        return Err(Error::UnsupportedDimension(rho.d));
    }
    let pt = partial_transpose(&rho.rho, rho.d);
    let ev = hermitian_eigenvalues(&pt, HERMITIAN_TOL)?;
    let trace_norm: f64 = ev.iter().map(|v| v.abs()).sum();
    let n_max = (rho.d as f64 - 1.0) / 2.0;
    Ok((trace_norm - 1.0) / (2.0 * n_max))
}

/// Standard error of `f(rho)` by nonparametric bootstrap over realizations.
/// Resamples whose statistic fails to evaluate are skipped.
pub fn bootstrap_stderr<F>(states: &[BiphotonState], f: F, resamples: usize, seed: u64) -> Result<f64>
where
    F: Fn(&DensityMatrix) -> Result<f64>,
{
    let n = states.len();
    if n < MIN_BOOTSTRAP_REALIZATIONS {
        return Err(Error::TooFewRealizations {
            min: MIN_BOOTSTRAP_REALIZATIONS,
            got: n,
        });
    }
    let d = states[0].d;
    let outers: Vec<(CMatrix, f64)> = states.iter().map(|s| (outer(&s.coeffs), s.norm_sqr())).collect();
    let mut values = Vec::with_capacity(resamples);
    for b in 0..resamples {
        let mut rng = stream(Domain::Bootstrap, seed, b as u64, n as u64);
        let mut sum = CMatrix::zeros(d * d, d * d);
        let mut tr = 0.0;
        for _ in 0..n {
            let (o, t) = &outers[rng.random_range(0..n)];
            sum += o;
            tr += t;
        }
        if tr / n as f64 <= 1e-12 {
            continue;
        }
        let mut dm = DensityMatrix::from_matrix(d, sum.unscale(tr))?;
        dm.trace = tr / n as f64;
        dm.n_realizations = n;
        if let Ok(v) = f(&dm) {
            values.push(v);
        }
    }
    if values.len() < 2 {
        return Ok(f64::NAN);
    }
    let m = values.iter().sum::<f64>() / values.len() as f64;
    let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64;
    Ok(var.sqrt())
}

/// First-order propagation of the element-wise standard errors through `f`,
/// using central differences on the independent real parameters of `rho`.
pub fn linear_stderr<F>(rho: &DensityMatrix, f: F) -> Result<f64>
where
    F: Fn(&DensityMatrix) -> Result<f64>,
{
    const H: f64 = 1e-6;
    let n = rho.d * rho.d;
    let eval = |i: usize, j: usize, delta: Complex64| -> Result<f64> {
        let mut p = rho.clone();
        p.rho[(i, j)] += delta;
        if i != j {
            p.rho[(j, i)] += delta.conj();
        }
        // a nudge can leave the PSD cone when rho is near its boundary
        p.rho = crate::linalg::project_psd(&p.rho);
        f(&p)
    };
    let mut var = 0.0;
    for i in 0..n {
        for j in i..n {
            let sr = rho.stderr_re[(i, j)];
            if sr > 0.0 {
                let step = Complex64::new(H, 0.0);
                let g = (eval(i, j, step)? - eval(i, j, -step)?) / (2.0 * H);
                var += g * g * sr * sr;
            }
            let si = rho.stderr_im[(i, j)];
            if i != j && si > 0.0 {
                let step = Complex64::new(0.0, H);
                let g = (eval(i, j, step)? - eval(i, j, -step)?) / (2.0 * H);
                var += g * g * si * si;
            }
        }
    }
    Ok(var.sqrt())
}
