//! Laguerre-Gaussian OAM modes (radial index 0), receiver projections,
//! crosstalk matrices and spiral spectra.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{inner_product, ComplexField, GridSpec};
use crate::turbulence::{beam_radius, rayleigh_range};

/// Default cap on `|l|`.
pub const MAX_ABS_L: u32 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LgModeSpec {
    pub l: i32,
    pub w0: f64,
    pub wavelength: f64,
}

impl LgModeSpec {
    pub fn new(l: i32, w0: f64, wavelength: f64) -> Result<Self> {
        Self::with_cap(l, w0, wavelength, MAX_ABS_L)
    }

    pub fn with_cap(l: i32, w0: f64, wavelength: f64, cap: u32) -> Result<Self> {
        if l.unsigned_abs() > cap {
            return Err(Error::InvalidArgument(format!("|l| = {} exceeds cap {cap}", l.abs())));
        }
        if !(w0 > 0.0 && wavelength > 0.0) {
            return Err(Error::InvalidArgument("w0 and wavelength must be positive".into()));
        }
        Ok(Self { l, w0, wavelength })
    }

    /// Unnormalized mode value at `(x, y, z)`.
    ///
    /// Curvature phase `+k rho^2 z / (2 (z^2 + zR^2))` and Gouy factor
    /// `exp(-i (|l| + 1) atan(z / zR))` both follow the sign convention of
    /// the paraxial transfer function `exp(-i dz kappa^2 / (2k))`.
    pub fn value(&self, x: f64, y: f64, z: f64) -> Complex64 {
        let zr = rayleigh_range(self.w0, self.wavelength);
        let w = beam_radius(self.w0, self.wavelength, z);
        let k = 2.0 * std::f64::consts::PI / self.wavelength;
        let rho2 = x * x + y * y;
        let abs_l = self.l.unsigned_abs() as i32;
        // (sqrt2 rho / w)^|l| exp(i l theta) = (sqrt2 (x +- i y) / w)^|l|
        let s = std::f64::consts::SQRT_2 / w;
        let helix = Complex64::new(s * x, s * y * self.l.signum() as f64).powi(abs_l);
        let gouy = (z / zr).atan();
        let phase = k * rho2 * z / (2.0 * (z * z + zr * zr)) - (abs_l + 1) as f64 * gouy;
        helix * (-rho2 / (w * w)).exp() * Complex64::from_polar(1.0 / w.sqrt(), phase)
    }
}

/// Mode `spec` at distance `z`, sampled on `grid` and renormalized to unit power.
pub fn lg_mode(grid: &GridSpec, spec: &LgModeSpec, z: f64) -> Result<ComplexField> {
    let w = beam_radius(spec.w0, spec.wavelength, z);
    let reach = w * ((spec.l.unsigned_abs() + 1) as f64).sqrt();
    if reach > grid.extent() / 4.0 {
        return Err(Error::Resolution(format!(
            "mode l = {} reaches {reach:.4} m, beyond extent/4 = {:.4} m",
            spec.l,
            grid.extent() / 4.0
        )));
    }
    grid.check_resolves(spec.w0)?;
    let mut f = ComplexField::from_fn(*grid, spec.wavelength, |x, y| spec.value(x, y, z)).with_z(z);
    f.normalize();
    Ok(f)
}

/// `<u_l(z)|field>` with the mode generated at the field's own `z`.
pub fn project_onto_mode(field: &ComplexField, spec: &LgModeSpec) -> Result<Complex64> {
    if spec.wavelength != field.wavelength() {
        return Err(Error::GridMismatch);
    }
    let mode = lg_mode(field.grid(), spec, field.z())?;
    inner_product(&mode, field)
}

/// Vacuum-propagated LG modes at the detection plane, built once and reused
/// for every projection.
#[derive(Debug, Clone)]
pub struct ReceiverBasis {
    z: f64,
    modes: Vec<(i32, ComplexField)>,
}

impl ReceiverBasis {
    pub fn new(grid: &GridSpec, w0: f64, wavelength: f64, z: f64, ls: &[i32]) -> Result<Self> {
        let mut sorted = ls.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        let modes = sorted
            .into_iter()
            .map(|l| Ok((l, lg_mode(grid, &LgModeSpec::new(l, w0, wavelength)?, z)?)))
            .collect::<Result<_>>()?;
        Ok(Self { z, modes })
    }

    pub fn indices(&self) -> Vec<i32> {
        self.modes.iter().map(|(l, _)| *l).collect()
    }

    pub fn mode(&self, l: i32) -> Option<&ComplexField> {
        self.modes.iter().find(|(m, _)| *m == l).map(|(_, f)| f)
    }

    pub fn project(&self, field: &ComplexField, l: i32) -> Result<Complex64> {
        let mode = self.mode(l).ok_or(Error::MissingMode(l))?;
        if (field.z() - self.z).abs() > 1e-6 * self.z.abs().max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "field at z = {} projected onto basis at z = {}",
                field.z(),
                self.z
            )));
        }
        inner_product(mode, field)
    }
}

/// Coefficients `c_{l, l0}` for one realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrosstalkMatrix {
    pub input_indices: Vec<i32>,
    pub output_indices: Vec<i32>,
    /// Row-major over outputs: `entries[out * inputs + in]`.
    pub entries: Vec<Complex64>,
}

impl CrosstalkMatrix {
    pub fn identity(indices: &[i32]) -> Self {
        let n = indices.len();
        let mut entries = vec![Complex64::default(); n * n];
        for i in 0..n {
            entries[i * n + i] = Complex64::new(1.0, 0.0);
        }
        Self {
            input_indices: indices.to_vec(),
            output_indices: indices.to_vec(),
            entries,
        }
    }

    /// Coefficient `c_{l, l0}` (output `l`, input `l0`).
    pub fn get(&self, l: i32, l0: i32) -> Option<Complex64> {
        let o = self.output_indices.iter().position(|&v| v == l)?;
        let i = self.input_indices.iter().position(|&v| v == l0)?;
        Some(self.entries[o * self.input_indices.len() + i])
    }

    /// `sum_l |c_{l, l0}|^2` over the tracked outputs.
    pub fn column_power(&self, l0: i32) -> Option<f64> {
        let i = self.input_indices.iter().position(|&v| v == l0)?;
        let n = self.input_indices.len();
        Some(
            (0..self.output_indices.len())
                .map(|o| self.entries[o * n + i].norm_sqr())
                .sum(),
        )
    }
}

/// Builds the crosstalk matrix from received fields `(l0, field)` that all
/// passed through the same realization.
pub fn crosstalk_matrix(
    received: &[(i32, ComplexField)],
    basis: &ReceiverBasis,
    output_indices: &[i32],
) -> Result<CrosstalkMatrix> {
    if let Some((_, first)) = received.first() {
        let tag = first.realization();
        if received.iter().any(|(_, f)| f.realization() != tag) {
            return Err(Error::RealizationMismatch);
        }
    }
    let n_in = received.len();
    let mut entries = vec![Complex64::default(); output_indices.len() * n_in];
    for (i, (_, field)) in received.iter().enumerate() {
        for (o, &l) in output_indices.iter().enumerate() {
            entries[o * n_in + i] = basis.project(field, l)?;
        }
    }
    Ok(CrosstalkMatrix {
        input_indices: received.iter().map(|(l, _)| *l).collect(),
        output_indices: output_indices.to_vec(),
        entries,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumPoint {
    pub l: i32,
    pub probability: f64,
    pub stderr: f64,
}

/// `P(l0 -> l) = mean_i |c_{l, l0}^(i)|^2` over every output index present
/// in the first matrix, with the standard error of the mean.
pub fn spiral_spectrum(realizations: &[CrosstalkMatrix], l0: i32) -> Result<Vec<SpectrumPoint>> {
    let first = realizations
        .first()
        .ok_or(Error::TooFewRealizations { min: 1, got: 0 })?;
    let n = realizations.len() as f64;
    first
        .output_indices
        .iter()
        .map(|&l| {
            let samples = realizations
                .iter()
                .map(|m| m.get(l, l0).map(|c| c.norm_sqr()).ok_or(Error::MissingMode(l)))
                .collect::<Result<Vec<f64>>>()?;
            let mean = samples.iter().sum::<f64>() / n;
            let stderr = if samples.len() > 1 {
                let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
                (var / n).sqrt()
            } else {
                0.0
            };
            Ok(SpectrumPoint {
                l,
                probability: mean,
                stderr,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{angular_spectrum_propagate, make_gaussian, total_power};
    use std::f64::consts::PI;

    const LAMBDA: f64 = 1064e-9;
    const W0: f64 = 0.0735;
    const Z: f64 = 3000.0;

    fn grid() -> GridSpec {
        GridSpec::new(256, 1.6).unwrap()
    }

    #[test]
    fn fundamental_mode_is_the_gaussian() {
        let g = GridSpec::new(256, 0.8).unwrap();
        let m = lg_mode(&g, &LgModeSpec::new(0, W0, LAMBDA).unwrap(), 0.0).unwrap();
        let gauss = make_gaussian(g, W0, LAMBDA).unwrap();
        for (a, b) in m.samples().iter().zip(gauss.samples()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn phase_winds_by_two_pi_l() {
        for l in [-3, -1, 1, 2, 5] {
            let spec = LgModeSpec::new(l, W0, LAMBDA).unwrap();
            let r = beam_radius(W0, LAMBDA, Z);
            let steps = 720;
            let mut acc = 0.0;
            let mut prev = spec.value(r, 0.0, Z).arg();
            for s in 1..=steps {
                let th = 2.0 * PI * s as f64 / steps as f64;
                let cur = spec.value(r * th.cos(), r * th.sin(), Z).arg();
                let mut d = cur - prev;
                d -= 2.0 * PI * (d / (2.0 * PI)).round();
                acc += d;
                prev = cur;
            }
            assert!((acc - 2.0 * PI * l as f64).abs() < 1e-6, "l = {l}: {acc}");
        }
    }

    #[test]
    fn gram_matrix_is_identity() {
        let g = GridSpec::new(256, 0.8).unwrap();
        let modes: Vec<ComplexField> = (-5..=5)
            .map(|l| lg_mode(&g, &LgModeSpec::new(l, W0 / 2.0, LAMBDA).unwrap(), 0.0).unwrap())
            .collect();
        for (i, a) in modes.iter().enumerate() {
            for (j, b) in modes.iter().enumerate() {
                let v = inner_product(a, b).unwrap();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((v - expect).norm() < 1e-6, "({i},{j}) -> {v}");
            }
        }
    }

    #[test]
    fn resolution_and_cap_checks() {
        let g = GridSpec::new(64, 0.3).unwrap();
        assert!(lg_mode(&g, &LgModeSpec::new(3, W0, LAMBDA).unwrap(), 0.0).is_err());
        assert!(LgModeSpec::new(17, W0, LAMBDA).is_err());
        assert!(LgModeSpec::with_cap(17, W0, LAMBDA, 20).is_ok());
    }

    #[test]
    fn vacuum_propagation_preserves_the_mode() {
        let g = grid();
        let outputs: Vec<i32> = (-4..=4).collect();
        let basis = ReceiverBasis::new(&g, W0, LAMBDA, Z, &outputs).unwrap();
        for l0 in [-3, 0, 2] {
            let m = lg_mode(&g, &LgModeSpec::new(l0, W0, LAMBDA).unwrap(), 0.0).unwrap();
            let out = angular_spectrum_propagate(&m, Z, true).unwrap();
            let mut bessel = 0.0;
            for &l in &outputs {
                let c = basis.project(&out, l).unwrap();
                bessel += c.norm_sqr();
                if l == l0 {
                    assert!((c.norm() - 1.0).abs() < 1e-3, "l0 = {l0}: |c| = {}", c.norm());
                } else {
                    assert!(c.norm() < 1e-3);
                }
            }
            assert!(bessel <= total_power(&out) + 1e-8);
        }
    }

    #[test]
    fn free_function_projection_matches_basis() {
        let g = grid();
        let spec = LgModeSpec::new(1, W0, LAMBDA).unwrap();
        let m = lg_mode(&g, &spec, 0.0).unwrap();
        let out = angular_spectrum_propagate(&m, Z, true).unwrap();
        let c = project_onto_mode(&out, &spec).unwrap();
        let basis = ReceiverBasis::new(&g, W0, LAMBDA, Z, &[1]).unwrap();
        assert!((c - basis.project(&out, 1).unwrap()).norm() < 1e-14);
    }

    fn tilted(l0: i32, alpha: f64) -> ComplexField {
        let g = GridSpec::new(256, 0.8).unwrap();
        let m = lg_mode(&g, &LgModeSpec::new(l0, W0, LAMBDA).unwrap(), 0.0).unwrap();
        let phase: Vec<f64> = g.points().map(|(_, x, _)| -alpha * x).collect();
        crate::field::apply_phase(&m, &phase).unwrap()
    }

    #[test]
    fn small_tilt_leaks_symmetrically_from_the_fundamental() {
        let f = tilted(0, 2.0);
        let g = *f.grid();
        let basis = ReceiverBasis::new(&g, W0, LAMBDA, 0.0, &[-1, 0, 1]).unwrap();
        let m = crosstalk_matrix(&[(0, f)], &basis, &[-1, 0, 1]).unwrap();
        let up = m.get(1, 0).unwrap().norm_sqr();
        let down = m.get(-1, 0).unwrap().norm_sqr();
        assert!(up > 1e-4);
        assert!((up / down - 1.0).abs() < 0.05);
        assert!(m.column_power(0).unwrap() <= 1.0 + 1e-6);
    }

    #[test]
    fn small_tilt_leak_ratio_follows_radial_overlaps() {
        // first order: |<l+1|rho e^{i theta}|l>|^2 / |<l-1|rho e^{-i theta}|l>|^2 = (l+1)/l
        let l0 = 2;
        let f = tilted(l0, 1.0);
        let g = *f.grid();
        let basis = ReceiverBasis::new(&g, W0, LAMBDA, 0.0, &[1, 2, 3]).unwrap();
        let up = basis.project(&f, 3).unwrap().norm_sqr();
        let down = basis.project(&f, 1).unwrap().norm_sqr();
        assert!((up / down - 1.5).abs() < 0.05 * 1.5, "ratio {}", up / down);
    }

    #[test]
    fn identity_channel_gives_identity_matrix_and_spectrum() {
        let g = grid();
        let idx = [-2, -1, 1, 2];
        let basis = ReceiverBasis::new(&g, W0, LAMBDA, Z, &idx).unwrap();
        let received: Vec<(i32, ComplexField)> = idx
            .iter()
            .map(|&l| {
                let m = lg_mode(&g, &LgModeSpec::new(l, W0, LAMBDA).unwrap(), 0.0).unwrap();
                (l, angular_spectrum_propagate(&m, Z, true).unwrap())
            })
            .collect();
        let m = crosstalk_matrix(&received, &basis, &idx).unwrap();
        let id = CrosstalkMatrix::identity(&idx);
        for (a, b) in m.entries.iter().zip(&id.entries) {
            assert!((a.norm() - b.norm()).abs() < 1e-3);
        }
        let spec = spiral_spectrum(&[m.clone(), m], 1).unwrap();
        for p in spec {
            if p.l == 1 {
                assert!((p.probability - 1.0).abs() < 2e-3);
            } else {
                assert!(p.probability < 1e-6);
            }
            assert!(p.stderr.abs() < 1e-15);
        }
    }

    #[test]
    fn mismatched_realizations_are_rejected() {
        let g = GridSpec::new(64, 0.8).unwrap();
        let a = ComplexField::zeros(g, LAMBDA);
        let mut b = a.clone();
        b.set_realization(Some(crate::field::RealizationTag {
            seed: 1,
            index: 2,
            strength_bits: 0,
        }));
        let basis = ReceiverBasis::new(&g, 0.1, LAMBDA, 0.0, &[0]).unwrap();
        assert!(matches!(
            crosstalk_matrix(&[(0, a), (1, b)], &basis, &[0]),
            Err(Error::RealizationMismatch)
        ));
    }

    #[test]
    fn empty_spectrum_input_is_an_error() {
        assert!(spiral_spectrum(&[], 0).is_err());
    }
}
