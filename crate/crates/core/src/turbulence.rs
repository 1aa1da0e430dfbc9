//! Kolmogorov turbulence: channel scales, split-step planning, phase-screen
//! synthesis and propagation through a sequence of screens.

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::{signed_index, Fft2};
use crate::field::{ComplexField, GridSpec, Propagator, RealizationTag};
use crate::rng::screen_stream;

/// Screen count used when the Rytov bound alone would allow fewer.
pub const DEFAULT_MIN_STEPS: usize = 21;
pub const DEFAULT_MAX_STEP_RYTOV: f64 = 0.5;
pub const DEFAULT_SUBHARMONIC_LEVELS: usize = 3;
/// Multiplier in the receiver aperture rule (see [`aperture_radius`]).
pub const DEFAULT_APERTURE_FACTOR: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TurbulenceParams {
    /// Refractive-index structure constant, m^(-2/3).
    pub cn2: f64,
    pub wavelength: f64,
    /// Path length, m.
    pub distance: f64,
    /// Transmitter beam waist, m.
    pub w0: f64,
}

impl TurbulenceParams {
    /// `cn2` may be zero (vacuum); everything else must be strictly positive.
    pub fn new(cn2: f64, wavelength: f64, distance: f64, w0: f64) -> Result<Self> {
        let p = Self {
            cn2,
            wavelength,
            distance,
            w0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let check = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(name, format!("must be positive, got {v}")))
            }
        };
        if !(self.cn2.is_finite() && self.cn2 >= 0.0) {
            return Err(Error::config("cn2", format!("must be >= 0, got {}", self.cn2)));
        }
        check("wavelength", self.wavelength)?;
        check("z", self.distance)?;
        check("w0", self.w0)
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    /// Same geometry with the turbulence strength chosen so that
    /// `w0 / r0 == strength`.
    pub fn with_strength(&self, strength: f64) -> Self {
        Self {
            cn2: cn2_for_strength(strength, self.w0, self.wavelength, self.distance),
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedChannelScales {
    pub r0: f64,
    pub rytov: f64,
    /// Propagation distance in Rayleigh ranges.
    pub t: f64,
    /// Turbulence strength `w0 / r0`.
    pub w: f64,
    pub rayleigh_range: f64,
}

pub fn rayleigh_range(w0: f64, wavelength: f64) -> f64 {
    PI * w0 * w0 / wavelength
}

/// Vacuum 1/e^2 beam radius after `z`.
pub fn beam_radius(w0: f64, wavelength: f64, z: f64) -> f64 {
    let zr = rayleigh_range(w0, wavelength);
    w0 * (1.0 + (z / zr).powi(2)).sqrt()
}

/// Plane-wave Fried parameter `(0.423 k^2 Cn2 z)^(-3/5)`; `+inf` without turbulence.
pub fn fried_parameter(p: &TurbulenceParams) -> f64 {
    let k = p.wavenumber();
    let x = 0.423 * k * k * p.cn2 * p.distance;
    if x <= 0.0 {
        f64::INFINITY
    } else {
        x.powf(-3.0 / 5.0)
    }
}

/// Rytov variance `1.23 Cn2 k^(7/6) z^(11/6)`.
pub fn rytov_variance(p: &TurbulenceParams) -> f64 {
    rytov_for(p.cn2, p.wavenumber(), p.distance)
}

fn rytov_for(cn2: f64, k: f64, z: f64) -> f64 {
    1.23 * cn2 * k.powf(7.0 / 6.0) * z.powf(11.0 / 6.0)
}

/// Rytov variance from the dimensionless pair: `1.63 W^(5/3) t^(5/6)`.
pub fn rytov_from_dimensionless(w: f64, t: f64) -> f64 {
    1.63 * w.powf(5.0 / 3.0) * t.powf(5.0 / 6.0)
}

/// Structure constant giving `w0 / r0 == strength` over `distance`.
pub fn cn2_for_strength(strength: f64, w0: f64, wavelength: f64, distance: f64) -> f64 {
    if strength <= 0.0 {
        return 0.0;
    }
    let k = 2.0 * PI / wavelength;
    let r0 = w0 / strength;
    r0.powf(-5.0 / 3.0) / (0.423 * k * k * distance)
}

pub fn dimensionless_scales(p: &TurbulenceParams) -> DerivedChannelScales {
    let r0 = fried_parameter(p);
    let zr = rayleigh_range(p.w0, p.wavelength);
    DerivedChannelScales {
        r0,
        rytov: rytov_variance(p),
        t: p.distance / zr,
        w: p.w0 / r0,
        rayleigh_range: zr,
    }
}

/// Receiver aperture radius `factor * w(z) * sqrt(|l|max / 2 + 1)`.
pub fn aperture_radius(w0: f64, wavelength: f64, z: f64, max_abs_l: u32, factor: f64) -> f64 {
    factor * beam_radius(w0, wavelength, z) * (max_abs_l as f64 / 2.0 + 1.0).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanOptions {
    pub max_step_rytov: f64,
    pub n_steps_override: Option<usize>,
    pub min_steps: usize,
    pub subharmonic_levels: usize,
    pub aperture_factor: f64,
    /// Largest azimuthal index the receiver must collect.
    pub max_abs_l: u32,
    pub guard_band: bool,
}

impl Default for PlanOptions {
    fn default() -> Self {
        Self {
            max_step_rytov: DEFAULT_MAX_STEP_RYTOV,
            n_steps_override: None,
            min_steps: DEFAULT_MIN_STEPS,
            subharmonic_levels: DEFAULT_SUBHARMONIC_LEVELS,
            aperture_factor: DEFAULT_APERTURE_FACTOR,
            max_abs_l: 1,
            guard_band: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelPlan {
    pub params: TurbulenceParams,
    pub n_steps: usize,
    pub step_length: f64,
    pub r0_screen: f64,
    pub aperture_radius: f64,
    pub subharmonic_levels: usize,
    pub guard_band: bool,
}

impl ChannelPlan {
    pub fn step_rytov(&self) -> f64 {
        rytov_for(self.params.cn2, self.params.wavenumber(), self.step_length)
    }

    pub fn is_vacuum(&self) -> bool {
        self.params.cn2 == 0.0
    }

    /// Amplitude applied to unit-`r0` screens: `r0_screen^(-5/6)`.
    pub fn screen_scale(&self) -> f64 {
        if self.r0_screen.is_infinite() {
            0.0
        } else {
            self.r0_screen.powf(-5.0 / 6.0)
        }
    }
}

pub fn plan_channel(params: &TurbulenceParams, opts: &PlanOptions) -> Result<ChannelPlan> {
    params.validate()?;
    if !(opts.max_step_rytov > 0.0) {
        return Err(Error::config(
            "turbulence.max_step_rytov",
            "must be positive",
        ));
    }
    let k = params.wavenumber();
    let n_steps = match opts.n_steps_override {
        Some(0) => return Err(Error::config("turbulence.n_steps", "must be >= 1")),
        Some(n) => n,
        None if params.cn2 == 0.0 => 1,
        None => {
            let total = rytov_variance(params);
            let mut n = ((total / opts.max_step_rytov).powf(6.0 / 11.0).floor() as usize).max(1);
            while rytov_for(params.cn2, k, params.distance / n as f64) >= opts.max_step_rytov {
                n += 1;
            }
            n.max(opts.min_steps.max(1))
        }
    };
    let step_length = params.distance / n_steps as f64;
    let step_rytov = rytov_for(params.cn2, k, step_length);
    if step_rytov >= opts.max_step_rytov {
        return Err(Error::StepBound {
            step_rytov,
            bound: opts.max_step_rytov,
            n_steps,
        });
    }
    let r0 = fried_parameter(params);
    Ok(ChannelPlan {
        params: *params,
        n_steps,
        step_length,
        r0_screen: r0 * (n_steps as f64).powf(3.0 / 5.0),
        aperture_radius: aperture_radius(
            params.w0,
            params.wavelength,
            params.distance,
            opts.max_abs_l,
            opts.aperture_factor,
        ),
        subharmonic_levels: opts.subharmonic_levels,
        guard_band: opts.guard_band,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseScreen {
    pub grid: GridSpec,
    /// Phase in radians, row-major.
    pub values: Vec<f64>,
    pub r0_screen: f64,
}

/// Cells within this many frequency steps of the origin use integrated weights.
const WEIGHTED_CELLS: i32 = 3;

/// Variance weight of the spectral cell of side `d` centred on `(a d, b d)`,
/// in units of `0.023 d^(-5/3)` (unit `r0`).
///
/// Point sampling the steep PSD at the cell centre loses power near the
/// origin. The weight is instead the cell integral of `|f|^2 PSD` divided by
/// `|f_c|^2`, which gives each cell the tilt power it holds; that is what
/// the structure function sees at separations far below `1 / |f|`.
fn cell_weight(a: i32, b: i32) -> f64 {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    let w = WEIGHTED_CELLS;
    let table = TABLE.get_or_init(|| {
        const M: usize = 64;
        let mut t = Vec::new();
        for b in -w..=w {
            for a in -w..=w {
                if a == 0 && b == 0 {
                    t.push(0.0);
                    continue;
                }
                let mut acc = 0.0;
                for j in 0..M {
                    let v = b as f64 - 0.5 + (j as f64 + 0.5) / M as f64;
                    for i in 0..M {
                        let u = a as f64 - 0.5 + (i as f64 + 0.5) / M as f64;
                        acc += (u * u + v * v).powf(-5.0 / 6.0);
                    }
                }
                t.push(acc / (M * M) as f64 / (a * a + b * b) as f64);
            }
        }
        t
    });
    table[((b + w) * (2 * w + 1) + a + w) as usize]
}

/// Per-axis variance of the random tilt (cycles per metre) carried by the
/// central cell of side `d`: `int fx^2 PSD` over the cell, unit `r0`.
fn central_tilt_variance(d: f64) -> f64 {
    static UNIT: OnceLock<f64> = OnceLock::new();
    // over the unit square, int ux^2 |u|^(-11/3) = 12 int_0^(pi/4) (2 cos t)^(-1/3) dt
    let unit = *UNIT.get_or_init(|| {
        const M: usize = 4096;
        let h = PI / 4.0 / M as f64;
        12.0 * (0..M).map(|k| (2.0 * ((k as f64 + 0.5) * h).cos()).powf(-1.0 / 3.0) * h).sum::<f64>()
    });
    0.023 * d.powf(1.0 / 3.0) * unit
}

/// Kolmogorov screen for `r0 = 1 m`; any other `r0` is this times `r0^(-5/6)`.
///
/// High frequencies come from an FFT sum with phase PSD
/// `0.023 r0^(-5/3) f^(-11/3)` (piston removed); `levels` rings of 3x3
/// subharmonics at spacing `df / 3^p` restore the low-frequency power, and
/// the cell left at the centre of the last ring contributes a random tilt.
pub fn unit_screen<R: Rng + ?Sized>(grid: &GridSpec, levels: usize, rng: &mut R) -> Vec<f64> {
    let n = grid.n();
    let df = grid.freq_pitch();
    let near = df.powf(-5.0 / 6.0) * 0.023f64.sqrt();
    let mut spec = Vec::with_capacity(grid.len());
    for iy in 0..n {
        let fy = signed_index(iy, n) * df;
        for ix in 0..n {
            let fx = signed_index(ix, n) * df;
            let f2 = fx * fx + fy * fy;
            let g = Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
            let (a, b) = (signed_index(ix, n) as i32, signed_index(iy, n) as i32);
            let amp = if f2 == 0.0 {
                0.0
            } else if levels > 0 && a.abs() <= WEIGHTED_CELLS && b.abs() <= WEIGHTED_CELLS {
                near * cell_weight(a, b).sqrt()
            } else {
                (0.023 * f2.powf(-11.0 / 6.0)).sqrt() * df
            };
            spec.push(g * amp);
        }
    }
    // inverse transform without the 1/n^2 factor: plain sum of exponentials
    Fft2::for_size(n).inverse(&mut spec);
    let norm = (n * n) as f64;
    let mut phase: Vec<f64> = spec.iter().map(|c| c.re * norm).collect();

    if levels > 0 {
        let coords: Vec<f64> = (0..n).map(|i| grid.coord(i)).collect();
        let mut low = vec![0.0; grid.len()];
        for p in 1..=levels {
            let dfp = df / 3f64.powi(p as i32);
            let scale = dfp.powf(-5.0 / 6.0) * 0.023f64.sqrt();
            // basis[a][i] = exp(i 2 pi a dfp x_i), a in {-1, 0, 1}
            let basis: Vec<Vec<Complex64>> = (-1..=1)
                .map(|a| {
                    coords
                        .iter()
                        .map(|&x| Complex64::from_polar(1.0, 2.0 * PI * a as f64 * dfp * x))
                        .collect()
                })
                .collect();
            let mut coef = [[Complex64::default(); 3]; 3];
            for (b, row) in coef.iter_mut().enumerate() {
                for (a, c) in row.iter_mut().enumerate() {
                    let g = Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
                    let (ia, ib) = (a as i32 - 1, b as i32 - 1);
                    if ia != 0 || ib != 0 {
                        *c = g * scale * cell_weight(ia, ib).sqrt();
                    }
                }
            }
            for iy in 0..n {
                // row factor r[a] = sum_b coef[b][a] * ey_b(y)
                let mut r = [Complex64::default(); 3];
                for (a, ra) in r.iter_mut().enumerate() {
                    for (b, row) in coef.iter().enumerate() {
                        *ra += row[a] * basis[b][iy];
                    }
                }
                let out = &mut low[iy * n..(iy + 1) * n];
                for (ix, o) in out.iter_mut().enumerate() {
                    let v = r[0] * basis[0][ix] + r[1] * basis[1][ix] + r[2] * basis[2][ix];
                    *o += v.re;
                }
            }
        }
        let sigma = central_tilt_variance(df / 3f64.powi(levels as i32)).sqrt();
        let tx: f64 = rng.sample::<f64, _>(StandardNormal) * sigma;
        let ty: f64 = rng.sample::<f64, _>(StandardNormal) * sigma;
        for iy in 0..n {
            for ix in 0..n {
                low[iy * n + ix] += 2.0 * PI * (tx * coords[ix] + ty * coords[iy]);
            }
        }
        let mean = low.iter().sum::<f64>() / low.len() as f64;
        for (p, l) in phase.iter_mut().zip(&low) {
            *p += l - mean;
        }
    }
    phase
}

/// One screen for a slab of the planned thickness.
pub fn generate_phase_screen<R: Rng + ?Sized>(
    plan: &ChannelPlan,
    grid: &GridSpec,
    rng: &mut R,
) -> PhaseScreen {
    let scale = plan.screen_scale();
    let values = if scale == 0.0 {
        vec![0.0; grid.len()]
    } else {
        unit_screen(grid, plan.subharmonic_levels, rng)
            .into_iter()
            .map(|v| v * scale)
            .collect()
    };
    PhaseScreen {
        grid: *grid,
        values,
        r0_screen: plan.r0_screen,
    }
}

/// Unit-strength screens of one realization; shared by every turbulence
/// strength and every beam propagated through that realization.
#[derive(Debug, Clone)]
pub struct UnitScreens {
    pub seed: u64,
    pub index: u64,
    pub grid: GridSpec,
    pub screens: Arc<Vec<Vec<f64>>>,
}

impl UnitScreens {
    pub fn draw(seed: u64, index: u64, grid: &GridSpec, n_screens: usize, levels: usize) -> Self {
        let screens = (0..n_screens)
            .map(|s| unit_screen(grid, levels, &mut screen_stream(seed, index, s as u64)))
            .collect();
        Self {
            seed,
            index,
            grid: *grid,
            screens: Arc::new(screens),
        }
    }
}

/// One realization of the channel: screens plus the scale for this plan.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    tag: RealizationTag,
    grid: GridSpec,
    r0_screen: f64,
    screens: Arc<Vec<Vec<f64>>>,
    scale: f64,
}

impl ChannelRealization {
    pub fn new(unit: &UnitScreens, plan: &ChannelPlan) -> Result<Self> {
        if unit.screens.len() != plan.n_steps && !plan.is_vacuum() {
            return Err(Error::InvalidArgument(format!(
                "realization has {} screens, plan needs {}",
                unit.screens.len(),
                plan.n_steps
            )));
        }
        Ok(Self {
            tag: RealizationTag {
                seed: unit.seed,
                index: unit.index,
                strength_bits: plan.params.cn2.to_bits(),
            },
            grid: unit.grid,
            r0_screen: plan.r0_screen,
            screens: unit.screens.clone(),
            scale: plan.screen_scale(),
        })
    }

    /// Draws fresh screens for `(seed, index)` under `plan`.
    pub fn draw(plan: &ChannelPlan, grid: &GridSpec, seed: u64, index: u64) -> Result<Self> {
        let unit = UnitScreens::draw(seed, index, grid, plan.n_steps, plan.subharmonic_levels);
        Self::new(&unit, plan)
    }

    pub fn tag(&self) -> RealizationTag {
        self.tag
    }

    pub fn n_screens(&self) -> usize {
        self.screens.len()
    }

    pub fn screen(&self, i: usize) -> PhaseScreen {
        PhaseScreen {
            grid: self.grid,
            values: self.screens[i].iter().map(|v| v * self.scale).collect(),
            r0_screen: self.r0_screen,
        }
    }
}

/// Propagators for the two step lengths of a split-step run.
pub struct SplitStep {
    plan: ChannelPlan,
    half: Propagator,
    full: Propagator,
}

impl SplitStep {
    pub fn new(plan: &ChannelPlan, grid: &GridSpec) -> Result<Self> {
        let wl = plan.params.wavelength;
        Ok(Self {
            plan: *plan,
            half: Propagator::new(*grid, wl, plan.step_length / 2.0, plan.guard_band)?,
            full: Propagator::new(*grid, wl, plan.step_length, plan.guard_band)?,
        })
    }

    pub fn plan(&self) -> &ChannelPlan {
        &self.plan
    }

    /// Vacuum half step, screen, vacuum half step; repeated `n_steps` times.
    /// Adjacent half steps are merged into one full step.
    pub fn propagate(
        &self,
        field: &mut ComplexField,
        realization: Option<&ChannelRealization>,
    ) -> Result<()> {
        let n = self.plan.n_steps;
        let apply_screens = realization.filter(|r| r.scale != 0.0);
        if n == 1 || apply_screens.is_none() {
            // nothing between the half steps, or no screens at all
            if let Some(r) = apply_screens {
                self.half.apply(field)?;
                field.apply_scaled_phase_in_place(&r.screens[0], r.scale)?;
                self.half.apply(field)?;
            } else {
                for _ in 0..n {
                    self.full.apply(field)?;
                }
            }
        } else {
            let r = apply_screens.expect("checked above");
            self.half.apply(field)?;
            for s in 0..n {
                field.apply_scaled_phase_in_place(&r.screens[s], r.scale)?;
                if s + 1 < n {
                    self.full.apply(field)?;
                }
            }
            self.half.apply(field)?;
        }
        field.set_realization(realization.map(|r| r.tag));
        Ok(())
    }
}

/// Propagates `field` through every screen of `realization` (or through
/// vacuum if `None`).
pub fn propagate_through(
    field: &ComplexField,
    plan: &ChannelPlan,
    realization: Option<&ChannelRealization>,
) -> Result<ComplexField> {
    let mut out = field.clone();
    SplitStep::new(plan, field.grid())?.propagate(&mut out, realization)?;
    Ok(out)
}

/// Ensemble structure function `D(r) = <[phi(x + r) - phi(x)]^2>` along both
/// axes, for integer pixel separations. Returns `(r_metres, D)` pairs.
pub fn structure_function(screens: &[PhaseScreen], separations: &[usize]) -> Vec<(f64, f64)> {
    let Some(first) = screens.first() else {
        return Vec::new();
    };
    let n = first.grid.n();
    let pitch = first.grid.pitch();
    separations
        .iter()
        .map(|&s| {
            let mut acc = 0.0;
            let mut count = 0usize;
            for sc in screens {
                let v = &sc.values;
                for iy in 0..n {
                    for ix in 0..n - s {
                        let dx = v[iy * n + ix + s] - v[iy * n + ix];
                        acc += dx * dx;
                    }
                }
                for iy in 0..n - s {
                    for ix in 0..n {
                        let dy = v[(iy + s) * n + ix] - v[iy * n + ix];
                        acc += dy * dy;
                    }
                }
                count += 2 * n * (n - s);
            }
            (s as f64 * pitch, acc / count as f64)
        })
        .collect()
}

/// Kolmogorov phase structure function `6.88 (r / r0)^(5/3)`.
pub fn kolmogorov_structure(r: f64, r0: f64) -> f64 {
    6.88 * (r / r0).powf(5.0 / 3.0)
}
