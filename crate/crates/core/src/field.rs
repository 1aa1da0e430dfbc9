//! Transverse-plane sampling, complex optical fields and vacuum diffraction.
//!
//! Fields are stored row-major (`iy * n + ix`) on a square grid centred on the
//! optical axis: sample `(ix, iy)` sits at `x = (ix - n/2) * pitch`,
//! `y = (iy - n/2) * pitch`. Amplitudes are scaled so that
//! [`total_power`] is `sum |a|^2 * pitch^2`.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::{signed_index, Fft2};

/// Fraction of the Nyquist radius kept by the spectral guard band.
pub const GUARD_KEEP_FRACTION: f64 = 7.0 / 8.0;

/// Relative spectral power inside the guard annulus above which a
/// propagated field is flagged as possibly aliased.
pub const ALIASING_WARN_FRACTION: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    n: usize,
    extent: f64,
}

impl GridSpec {
    pub fn new(n: usize, extent: f64) -> Result<Self> {
        if n < 64 || !n.is_power_of_two() {
            return Err(Error::config(
                "grid.n",
                format!("must be a power of two >= 64, got {n}"),
            ));
        }
        if !(extent.is_finite() && extent > 0.0) {
            return Err(Error::config(
                "grid.extent",
                format!("must be positive, got {extent}"),
            ));
        }
        Ok(Self { n, extent })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Sample spacing in metres.
    pub fn pitch(&self) -> f64 {
        self.extent / self.n as f64
    }

    /// Spatial-frequency spacing in cycles per metre.
    pub fn freq_pitch(&self) -> f64 {
        1.0 / self.extent
    }

    /// Physical coordinate of sample index `i` along either axis.
    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        (i as f64 - (self.n / 2) as f64) * self.pitch()
    }

    /// Angular spatial frequency (rad/m) of FFT bin `i`.
    #[inline]
    pub fn angular_freq(&self, i: usize) -> f64 {
        2.0 * PI * signed_index(i, self.n) / self.extent
    }

    /// Nyquist angular frequency `pi / pitch`.
    pub fn nyquist(&self) -> f64 {
        PI / self.pitch()
    }

    /// Fails unless the pitch is at most `w0 / 8`.
    pub fn check_resolves(&self, w0: f64) -> Result<()> {
        if self.pitch() > w0 / 8.0 {
            return Err(Error::Resolution(format!(
                "pitch {:.4e} m exceeds w0/8 = {:.4e} m",
                self.pitch(),
                w0 / 8.0
            )));
        }
        Ok(())
    }

    /// Iterator over `(index, x, y)` for every sample.
    pub fn points(&self) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        (0..self.len()).map(move |k| (k, self.coord(k % self.n), self.coord(k / self.n)))
    }
}

/// Identifies the turbulence realization a field was propagated through.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RealizationTag {
    pub seed: u64,
    pub index: u64,
    /// Bit pattern of the structure constant the screens were scaled to.
    pub strength_bits: u64,
}

#[derive(Debug, Clone)]
pub struct ComplexField {
    grid: GridSpec,
    wavelength: f64,
    z: f64,
    data: Vec<Complex64>,
    realization: Option<RealizationTag>,
    aliasing_warning: bool,
}

impl ComplexField {
    pub fn zeros(grid: GridSpec, wavelength: f64) -> Self {
        Self::from_samples(grid, wavelength, vec![Complex64::default(); grid.len()])
            .expect("length matches grid")
    }

    pub fn from_samples(grid: GridSpec, wavelength: f64, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::ShapeMismatch {
                expected: grid.len(),
                got: data.len(),
            });
        }
        Ok(Self {
            grid,
            wavelength,
            z: 0.0,
            data,
            realization: None,
            aliasing_warning: false,
        })
    }

    /// Samples `f(x, y)` over the grid.
    pub fn from_fn(grid: GridSpec, wavelength: f64, f: impl Fn(f64, f64) -> Complex64) -> Self {
        let data = grid.points().map(|(_, x, y)| f(x, y)).collect();
        Self::from_samples(grid, wavelength, data).expect("length matches grid")
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn with_z(mut self, z: f64) -> Self {
        self.z = z;
        self
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.data
    }

    pub fn samples_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.data
    }

    pub fn realization(&self) -> Option<RealizationTag> {
        self.realization
    }

    pub fn set_realization(&mut self, tag: Option<RealizationTag>) {
        self.realization = tag;
    }

    /// True if any propagation found significant power near the Nyquist edge.
    pub fn aliasing_warning(&self) -> bool {
        self.aliasing_warning
    }

    /// Scales the amplitude to unit total power. A zero field is left untouched.
    pub fn normalize(&mut self) {
        let p = total_power(self);
        if p > 0.0 {
            let s = 1.0 / p.sqrt();
            self.data.iter_mut().for_each(|v| *v *= s);
        }
    }

    pub fn same_plane(&self, other: &ComplexField) -> bool {
        self.grid == other.grid && self.wavelength == other.wavelength
    }

    pub fn apply_phase_in_place(&mut self, phase: &[f64]) -> Result<()> {
        self.apply_scaled_phase_in_place(phase, 1.0)
    }

    /// Multiplies by `exp(-i * scale * phase)`.
    pub fn apply_scaled_phase_in_place(&mut self, phase: &[f64], scale: f64) -> Result<()> {
        if phase.len() != self.data.len() {
            return Err(Error::ShapeMismatch {
                expected: self.data.len(),
                got: phase.len(),
            });
        }
        for (a, &p) in self.data.iter_mut().zip(phase) {
            *a *= Complex64::from_polar(1.0, -scale * p);
        }
        Ok(())
    }

    /// Multiplies pointwise by `factors` (used for precomputed unimodular corrections).
    pub fn multiply_in_place(&mut self, factors: &[Complex64]) -> Result<()> {
        if factors.len() != self.data.len() {
            return Err(Error::ShapeMismatch {
                expected: self.data.len(),
                got: factors.len(),
            });
        }
        self.data.iter_mut().zip(factors).for_each(|(a, f)| *a *= f);
        Ok(())
    }

    pub fn apply_aperture_in_place(&mut self, radius: f64) -> Result<()> {
        let half = self.grid.extent / 2.0;
        if !(radius > 0.0 && radius <= half) {
            return Err(Error::ApertureRadius {
                radius,
                half_extent: half,
            });
        }
        let r2 = radius * radius;
        let n = self.grid.n;
        for iy in 0..n {
            let y = self.grid.coord(iy);
            for ix in 0..n {
                let x = self.grid.coord(ix);
                if x * x + y * y > r2 {
                    self.data[iy * n + ix] = Complex64::default();
                }
            }
        }
        Ok(())
    }

    /// Writes a debugging raster with columns `x,y,re,im,intensity`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "x,y,re,im,intensity")?;
        for (k, x, y) in self.grid.points() {
            let a = self.data[k];
            writeln!(out, "{x:.9e},{y:.9e},{:.9e},{:.9e},{:.9e}", a.re, a.im, a.norm_sqr())?;
        }
        Ok(())
    }
}

/// Discrete `L^2` norm: `sum |a|^2 * pitch^2`.
pub fn total_power(field: &ComplexField) -> f64 {
    let d = field.grid.pitch();
    field.data.iter().map(|a| a.norm_sqr()).sum::<f64>() * d * d
}

/// Gaussian `exp(-rho^2 / w0^2)` at `z = 0`, normalized to unit power.
pub fn make_gaussian(grid: GridSpec, w0: f64, wavelength: f64) -> Result<ComplexField> {
    if !(w0 > 0.0) {
        return Err(Error::config("w0", format!("must be positive, got {w0}")));
    }
    if grid.extent() < 8.0 * w0 {
        return Err(Error::Resolution(format!(
            "extent {} m smaller than 8 * w0 = {} m",
            grid.extent(),
            8.0 * w0
        )));
    }
    grid.check_resolves(w0)?;
    let inv = 1.0 / (w0 * w0);
    let mut f = ComplexField::from_fn(grid, wavelength, |x, y| {
        Complex64::new((-(x * x + y * y) * inv).exp(), 0.0)
    });
    f.normalize();
    Ok(f)
}

/// Precomputed paraxial transfer function `exp(-i dz |kappa|^2 / (2k))` for
/// one grid, wavelength and step.
#[derive(Clone)]
pub struct Propagator {
    grid: GridSpec,
    wavelength: f64,
    dz: f64,
    guard_band: bool,
    transfer: Vec<Complex64>,
    guard_mask: Vec<bool>,
    fft: Arc<Fft2>,
}

impl Propagator {
    pub fn new(grid: GridSpec, wavelength: f64, dz: f64, guard_band: bool) -> Result<Self> {
        if dz < 0.0 || dz.is_nan() {
            return Err(Error::NegativeDistance(dz));
        }
        let n = grid.n();
        let k = 2.0 * PI / wavelength;
        let guard_radius = GUARD_KEEP_FRACTION * grid.nyquist();
        let mut transfer = Vec::with_capacity(grid.len());
        let mut guard_mask = Vec::with_capacity(grid.len());
        for iy in 0..n {
            let ky = grid.angular_freq(iy);
            for ix in 0..n {
                let kx = grid.angular_freq(ix);
                let k2 = kx * kx + ky * ky;
                let outside = k2.sqrt() > guard_radius;
                guard_mask.push(outside);
                if guard_band && outside {
                    transfer.push(Complex64::default());
                } else {
                    transfer.push(Complex64::from_polar(1.0, -dz * k2 / (2.0 * k)));
                }
            }
        }
        Ok(Self {
            grid,
            wavelength,
            dz,
            guard_band,
            transfer,
            guard_mask,
            fft: Fft2::for_size(n),
        })
    }

    pub fn dz(&self) -> f64 {
        self.dz
    }

    pub fn guard_band(&self) -> bool {
        self.guard_band
    }

    /// Advances `field` by `dz` in place. Returns the fraction of spectral
    /// power that sat inside the guard annulus (removed if the guard is on).
    pub fn apply(&self, field: &mut ComplexField) -> Result<f64> {
        if field.grid != self.grid || field.wavelength != self.wavelength {
            return Err(Error::GridMismatch);
        }
        let data = &mut field.data;
        self.fft.forward(data);
        let mut total = 0.0;
        let mut guarded = 0.0;
        for ((a, h), &g) in data.iter_mut().zip(&self.transfer).zip(&self.guard_mask) {
            let p = a.norm_sqr();
            total += p;
            if g {
                guarded += p;
            }
            *a *= h;
        }
        self.fft.inverse(data);
        field.z += self.dz;
        let fraction = if total > 0.0 { guarded / total } else { 0.0 };
        if fraction > ALIASING_WARN_FRACTION {
            field.aliasing_warning = true;
        }
        Ok(fraction)
    }
}

/// Vacuum paraxial propagation over `dz` (angular-spectrum method).
pub fn angular_spectrum_propagate(
    field: &ComplexField,
    dz: f64,
    guard_band: bool,
) -> Result<ComplexField> {
    let prop = Propagator::new(field.grid, field.wavelength, dz, guard_band)?;
    let mut out = field.clone();
    prop.apply(&mut out)?;
    Ok(out)
}

/// Pointwise multiplication by `exp(-i phase)`.
pub fn apply_phase(field: &ComplexField, phase: &[f64]) -> Result<ComplexField> {
    let mut out = field.clone();
    out.apply_phase_in_place(phase)?;
    Ok(out)
}

/// Hard-edged circular aperture centred on the axis.
pub fn apply_aperture(field: &ComplexField, radius: f64) -> Result<ComplexField> {
    let mut out = field.clone();
    out.apply_aperture_in_place(radius)?;
    Ok(out)
}

/// Second-moment (D4-sigma) beam radius; equals the 1/e^2 intensity radius
/// for a Gaussian.
pub fn second_moment_radius(field: &ComplexField) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (k, x, y) in field.grid.points() {
        let i = field.data[k].norm_sqr();
        num += i * (x * x + y * y);
        den += i;
    }
    (2.0 * num / den).sqrt()
}

/// Inner product `<a|b> = sum conj(a) b * pitch^2`.
pub fn inner_product(a: &ComplexField, b: &ComplexField) -> Result<Complex64> {
    if !a.same_plane(b) {
        return Err(Error::GridMismatch);
    }
    let d = a.grid.pitch();
    let s: Complex64 = a.data.iter().zip(&b.data).map(|(u, v)| u.conj() * v).sum();
    Ok(s * d * d)
}

#[cfg(test)]
mod tests {
    use super::*;

    const LAMBDA: f64 = 1064e-9;

    fn grid() -> GridSpec {
        GridSpec::new(256, 0.8).unwrap()
    }

    #[test]
    fn grid_rejects_bad_sizes() {
        assert!(GridSpec::new(32, 1.0).is_err());
        assert!(GridSpec::new(100, 1.0).is_err());
        assert!(GridSpec::new(128, 0.0).is_err());
        assert!(GridSpec::new(128, 1.0).is_ok());
    }

    #[test]
    fn gaussian_is_centred_symmetric_and_normalized() {
        let g = make_gaussian(grid(), 0.0735, LAMBDA).unwrap();
        assert!((total_power(&g) - 1.0).abs() < 1e-12);
        let n = 256;
        let peak = g
            .samples()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
            .unwrap()
            .0;
        assert_eq!(peak, (n / 2) * n + n / 2);
        let s = g.samples();
        for d in [3usize, 10, 40] {
            let c = n / 2;
            let right = s[c * n + c + d].norm();
            let left = s[c * n + c - d].norm();
            let up = s[(c + d) * n + c].norm();
            assert!((right - left).abs() < 1e-14 && (right - up).abs() < 1e-14);
        }
    }

    #[test]
    fn gaussian_intensity_at_waist_radius() {
        // choose w0 on a sample so the pixel sits exactly at rho = w0
        let gr = grid();
        let w0 = 24.0 * gr.pitch();
        let g = make_gaussian(gr, w0, LAMBDA).unwrap();
        let n = 256;
        let c = n / 2;
        let peak = g.samples()[c * n + c].norm_sqr();
        let at_w0 = g.samples()[c * n + c + 24].norm_sqr();
        let ratio = at_w0 / peak;
        assert!((ratio / (-2.0f64).exp() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn gaussian_rejects_small_grid() {
        assert!(make_gaussian(grid(), 0.2, LAMBDA).is_err());
        assert!(make_gaussian(grid(), -1.0, LAMBDA).is_err());
    }

    #[test]
    fn plane_wave_only_picks_up_global_phase() {
        let f = ComplexField::from_fn(grid(), LAMBDA, |_, _| Complex64::new(1.0, 0.0));
        let out = angular_spectrum_propagate(&f, 1234.0, true).unwrap();
        for a in out.samples() {
            assert!((a - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }
        assert!((out.z() - 1234.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_spreads_by_sqrt2_after_rayleigh_range() {
        let w0 = 0.0735;
        let g = make_gaussian(grid(), w0, LAMBDA).unwrap();
        let zr = PI * w0 * w0 / LAMBDA;
        let out = angular_spectrum_propagate(&g, zr, true).unwrap();
        let w = second_moment_radius(&out);
        assert!((w / (w0 * 2f64.sqrt()) - 1.0).abs() < 0.005, "w = {w}");
        assert!(!out.aliasing_warning());
    }

    #[test]
    fn negative_distance_is_rejected() {
        let g = make_gaussian(grid(), 0.0735, LAMBDA).unwrap();
        assert!(matches!(
            angular_spectrum_propagate(&g, -1.0, true),
            Err(Error::NegativeDistance(_))
        ));
    }

    #[test]
    fn checkerboard_trips_the_aliasing_flag() {
        let f = ComplexField::from_fn(grid(), LAMBDA, |x, y| {
            let p = grid().pitch();
            let s = ((x / p).round() + (y / p).round()) as i64;
            Complex64::new(if s % 2 == 0 { 1.0 } else { -1.0 }, 0.0)
        });
        let out = angular_spectrum_propagate(&f, 10.0, true).unwrap();
        assert!(out.aliasing_warning());
        assert!(total_power(&out) < 1e-20);
    }

    #[test]
    fn phase_zero_and_pi() {
        let g = make_gaussian(grid(), 0.0735, LAMBDA).unwrap();
        let zero = vec![0.0; g.grid().len()];
        let same = apply_phase(&g, &zero).unwrap();
        assert_eq!(same.samples(), g.samples());
        let pi = vec![PI; g.grid().len()];
        let neg = apply_phase(&g, &pi).unwrap();
        for (a, b) in neg.samples().iter().zip(g.samples()) {
            assert!((a + b).norm() <= 1e-15 * b.norm());
        }
        assert!((total_power(&neg) - total_power(&g)).abs() < 1e-14);
    }

    #[test]
    fn phase_shape_mismatch() {
        let g = make_gaussian(grid(), 0.0735, LAMBDA).unwrap();
        assert!(matches!(
            apply_phase(&g, &[0.0; 10]),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn aperture_edge_cases() {
        let g = make_gaussian(grid(), 0.0735, LAMBDA).unwrap();
        let full = apply_aperture(&g, 0.4).unwrap();
        assert!(1.0 - total_power(&full) < 1e-6);
        let tiny = apply_aperture(&g, 1e-6).unwrap();
        // only the on-axis sample survives
        assert!(total_power(&tiny) < 0.01);
        let tinier = apply_aperture(&g, 1e-9).unwrap();
        assert!(total_power(&tinier) <= total_power(&tiny));
        assert!(apply_aperture(&g, 0.41).is_err());
        assert!(apply_aperture(&g, 0.0).is_err());
    }

    #[test]
    fn aperture_keeps_narrow_gaussian() {
        // encircled energy 1 - exp(-2 R^2 / w^2) with R = 3 w
        let g = make_gaussian(grid(), 0.04, LAMBDA).unwrap();
        let kept = total_power(&apply_aperture(&g, 0.12).unwrap());
        let analytic = 1.0 - (-2.0f64 * 9.0).exp();
        assert!(kept > 0.999);
        assert!((kept - analytic).abs() < 1e-4);
    }

    #[test]
    fn power_of_zero_and_orthogonal_sum() {
        let z = ComplexField::zeros(grid(), LAMBDA);
        assert_eq!(total_power(&z), 0.0);
        // two unit modes with disjoint angular dependence: Gaussian and x-odd
        let a = make_gaussian(grid(), 0.05, LAMBDA).unwrap();
        let mut b = ComplexField::from_fn(grid(), LAMBDA, |x, y| {
            Complex64::new(x * (-(x * x + y * y) / 0.0025).exp(), 0.0)
        });
        b.normalize();
        assert!(inner_product(&a, &b).unwrap().norm() < 1e-12);
        let sum: Vec<Complex64> = a.samples().iter().zip(b.samples()).map(|(u, v)| u + v).collect();
        let s = ComplexField::from_samples(*a.grid(), LAMBDA, sum).unwrap();
        assert!((total_power(&s) - 2.0).abs() < 1e-10);
    }

    #[test]
    fn csv_dump_has_header_and_rows() {
        let g = GridSpec::new(64, 0.1).unwrap();
        let f = ComplexField::zeros(g, LAMBDA);
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("x,y,re,im,intensity\n"));
        assert_eq!(text.lines().count(), 64 * 64 + 1);
    }
}
