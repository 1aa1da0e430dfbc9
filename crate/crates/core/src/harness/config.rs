//! Experiment configuration: a single JSON document, validated with field
//! paths in every error.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ao::AoMode;
use crate::entanglement::{EncodingSubspace, DEFAULT_BOOTSTRAP_RESAMPLES};
use crate::error::{Error, Result};
use crate::field::GridSpec;
use crate::modes::MAX_ABS_L;
use crate::turbulence::{
    aperture_radius, cn2_for_strength, rayleigh_range, PlanOptions, TurbulenceParams,
    DEFAULT_APERTURE_FACTOR, DEFAULT_MAX_STEP_RYTOV, DEFAULT_MIN_STEPS,
    DEFAULT_SUBHARMONIC_LEVELS,
};

pub const DEFAULT_WAVELENGTH: f64 = 1064e-9;
pub const DEFAULT_W0: f64 = 0.0735;
pub const DEFAULT_DISTANCE: f64 = 3000.0;
pub const DEFAULT_GRID_N: usize = 512;
/// Grid side length in units of the receiver aperture diameter.
pub const DEFAULT_EXTENT_FACTOR: f64 = 4.0;
pub const DEFAULT_SPECTRUM_HALF_WIDTH: u32 = 8;

/// `count` evenly spaced strengths from 0 to `max` inclusive.
pub fn strength_ladder(max: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..count).map(|k| max * k as f64 / (count - 1) as f64).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    /// Side length in metres; derived from the aperture when absent.
    pub extent: Option<f64>,
    pub extent_factor: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            n: DEFAULT_GRID_N,
            extent: None,
            extent_factor: DEFAULT_EXTENT_FACTOR,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OpticsConfig {
    pub wavelength: f64,
    pub w0: f64,
    /// Link length in metres. Mutually exclusive with `t`.
    pub distance: Option<f64>,
    /// Link length in Rayleigh ranges.
    pub t: Option<f64>,
    /// Turbulence strengths `W = w0 / r0` to sweep.
    pub strengths: Vec<f64>,
}

impl Default for OpticsConfig {
    fn default() -> Self {
        Self {
            wavelength: DEFAULT_WAVELENGTH,
            w0: DEFAULT_W0,
            distance: None,
            t: None,
            strengths: strength_ladder(4.9, 20),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TurbulenceConfig {
    /// Explicit structure constants; replaces `optics.strengths` when set.
    pub cn2: Vec<f64>,
    pub n_steps: Option<usize>,
    pub min_steps: usize,
    pub max_step_rytov: f64,
    pub subharmonic_levels: usize,
    pub aperture_factor: f64,
    pub guard_band: bool,
}

impl Default for TurbulenceConfig {
    fn default() -> Self {
        Self {
            cn2: Vec::new(),
            n_steps: None,
            min_steps: DEFAULT_MIN_STEPS,
            max_step_rytov: DEFAULT_MAX_STEP_RYTOV,
            subharmonic_levels: DEFAULT_SUBHARMONIC_LEVELS,
            aperture_factor: DEFAULT_APERTURE_FACTOR,
            guard_band: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumConfig {
    /// Transmitted modes whose spiral spectra are reported.
    pub l0: Vec<i32>,
    /// Spectra cover `l0 - half_width ..= l0 + half_width`, clipped to the mode cap.
    pub half_width: u32,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            l0: Vec::new(),
            half_width: DEFAULT_SPECTRUM_HALF_WIDTH,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ErrorMethod {
    #[default]
    Bootstrap,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ErrorConfig {
    pub method: ErrorMethod,
    pub resamples: usize,
}

impl Default for ErrorConfig {
    fn default() -> Self {
        Self {
            method: ErrorMethod::Bootstrap,
            resamples: DEFAULT_BOOTSTRAP_RESAMPLES,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::config("output.format", format!("unknown format `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub path: Option<PathBuf>,
    pub format: OutputFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub grid: GridConfig,
    pub optics: OpticsConfig,
    pub turbulence: TurbulenceConfig,
    pub subspaces: Vec<EncodingSubspace>,
    pub spectrum: SpectrumConfig,
    pub ao_modes: Vec<AoMode>,
    /// Beacon waist; defaults to `optics.w0`.
    pub beacon_w0: Option<f64>,
    pub realizations: usize,
    pub seed: u64,
    pub errors: ErrorConfig,
    pub output: OutputConfig,
    /// Worker threads; never affects results.
    pub workers: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            grid: GridConfig::default(),
            optics: OpticsConfig::default(),
            turbulence: TurbulenceConfig::default(),
            subspaces: vec![EncodingSubspace::qubit(1).expect("valid preset")],
            spectrum: SpectrumConfig::default(),
            ao_modes: AoMode::ALL.to_vec(),
            beacon_w0: None,
            realizations: 500,
            seed: 1,
            errors: ErrorConfig::default(),
            output: OutputConfig::default(),
            workers: None,
        }
    }
}

/// Physical layout shared by every point of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Geometry {
    pub wavelength: f64,
    pub w0: f64,
    pub distance: f64,
    pub t: f64,
    pub rayleigh_range: f64,
    pub beacon_w0: f64,
    /// Largest transmitted `|l|`; sizes the aperture.
    pub max_abs_l: u32,
    pub aperture_factor: f64,
    pub aperture_radius: f64,
    pub grid_n: usize,
    pub extent: f64,
    pub pitch: f64,
}

impl Geometry {
    pub fn grid(&self) -> GridSpec {
        GridSpec::new(self.grid_n, self.extent).expect("validated geometry")
    }
}

fn positive(path: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::config(path, format!("must be positive and finite, got {v}")))
    }
}

impl ExperimentConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(s);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(if path == "." { String::new() } else { path }, e.inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.grid.n;
        if n < 64 || !n.is_power_of_two() {
            return Err(Error::config("grid.n", format!("must be a power of two >= 64, got {n}")));
        }
        if let Some(e) = self.grid.extent {
            positive("grid.extent", e)?;
        }
        positive("grid.extent_factor", self.grid.extent_factor)?;
        positive("optics.wavelength", self.optics.wavelength)?;
        positive("optics.w0", self.optics.w0)?;
        match (self.optics.distance, self.optics.t) {
            (Some(_), Some(_)) => {
                return Err(Error::config("optics.t", "give either `distance` or `t`, not both"))
            }
            (Some(z), None) => positive("optics.distance", z)?,
            (None, Some(t)) => positive("optics.t", t)?,
            (None, None) => {}
        }
        for (i, w) in self.optics.strengths.iter().enumerate() {
            if !(w.is_finite() && *w >= 0.0) {
                return Err(Error::config(format!("optics.strengths[{i}]"), format!("must be >= 0, got {w}")));
            }
        }
        for (i, c) in self.turbulence.cn2.iter().enumerate() {
            if !(c.is_finite() && *c >= 0.0) {
                return Err(Error::config(format!("turbulence.cn2[{i}]"), format!("must be >= 0, got {c}")));
            }
        }
        match (self.optics.strengths.is_empty(), self.turbulence.cn2.is_empty()) {
            (true, true) => return Err(Error::config("optics.strengths", "no sweep points")),
            (false, false) => {
                return Err(Error::config(
                    "turbulence.cn2",
                    "give either `optics.strengths` or `turbulence.cn2`, not both",
                ))
            }
            _ => {}
        }
        if self.turbulence.n_steps == Some(0) {
            return Err(Error::config("turbulence.n_steps", "must be >= 1"));
        }
        if self.turbulence.min_steps == 0 {
            return Err(Error::config("turbulence.min_steps", "must be >= 1"));
        }
        positive("turbulence.max_step_rytov", self.turbulence.max_step_rytov)?;
        positive("turbulence.aperture_factor", self.turbulence.aperture_factor)?;
        if self.subspaces.is_empty() && self.spectrum.l0.is_empty() {
            return Err(Error::config("subspaces", "nothing to compute: no subspaces and no spectrum.l0"));
        }
        for (i, s) in self.subspaces.iter().enumerate() {
            if let Some(m) = s.modes().iter().find(|m| m.unsigned_abs() > MAX_ABS_L) {
                return Err(Error::config(format!("subspaces[{i}]"), format!("|l| = {} above cap {MAX_ABS_L}", m.abs())));
            }
        }
        for (i, l) in self.spectrum.l0.iter().enumerate() {
            if l.unsigned_abs() > MAX_ABS_L {
                return Err(Error::config(format!("spectrum.l0[{i}]"), format!("|l| = {} above cap {MAX_ABS_L}", l.abs())));
            }
        }
        if self.ao_modes.is_empty() {
            return Err(Error::config("ao_modes", "at least one correction mode required"));
        }
        for (i, m) in self.ao_modes.iter().enumerate() {
            if self.ao_modes[..i].contains(m) {
                return Err(Error::config(format!("ao_modes[{i}]"), format!("duplicate mode `{m}`")));
            }
        }
        if let Some(b) = self.beacon_w0 {
            positive("beacon_w0", b)?;
        }
        if self.realizations == 0 {
            return Err(Error::config("realizations", "must be >= 1"));
        }
        if self.errors.resamples < 2 {
            return Err(Error::config("errors.resamples", "must be >= 2"));
        }
        if self.workers == Some(0) {
            return Err(Error::config("workers", "must be >= 1"));
        }
        Ok(())
    }

    pub fn distance(&self) -> f64 {
        match (self.optics.distance, self.optics.t) {
            (Some(z), _) => z,
            (None, Some(t)) => t * rayleigh_range(self.optics.w0, self.optics.wavelength),
            (None, None) => DEFAULT_DISTANCE,
        }
    }

    /// Every transmitted mode, ascending.
    pub fn input_modes(&self) -> Vec<i32> {
        let mut v: Vec<i32> = self
            .subspaces
            .iter()
            .flat_map(|s| s.modes().iter().copied())
            .chain(self.spectrum.l0.iter().copied())
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Output indices reported by the spectrum of `l0`.
    pub fn spectrum_window(&self, l0: i32) -> Vec<i32> {
        let h = self.spectrum.half_width as i32;
        let cap = MAX_ABS_L as i32;
        ((l0 - h).max(-cap)..=(l0 + h).min(cap)).collect()
    }

    /// Every mode projected onto at the receiver, ascending.
    pub fn output_modes(&self) -> Vec<i32> {
        let mut v: Vec<i32> = self
            .subspaces
            .iter()
            .flat_map(|s| s.modes().iter().copied())
            .chain(self.spectrum.l0.iter().flat_map(|&l| self.spectrum_window(l)))
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn plan_options(&self, max_abs_l: u32) -> PlanOptions {
        PlanOptions {
            max_step_rytov: self.turbulence.max_step_rytov,
            n_steps_override: self.turbulence.n_steps,
            min_steps: self.turbulence.min_steps,
            subharmonic_levels: self.turbulence.subharmonic_levels,
            aperture_factor: self.turbulence.aperture_factor,
            max_abs_l,
            guard_band: self.turbulence.guard_band,
        }
    }

    pub fn geometry(&self) -> Result<Geometry> {
        self.validate()?;
        let (wl, w0) = (self.optics.wavelength, self.optics.w0);
        let distance = self.distance();
        let zr = rayleigh_range(w0, wl);
        let max_abs_l = self.input_modes().iter().map(|l| l.unsigned_abs()).max().unwrap_or(0);
        let radius = aperture_radius(w0, wl, distance, max_abs_l, self.turbulence.aperture_factor);
        let extent = self
            .grid
            .extent
            .unwrap_or(self.grid.extent_factor * 2.0 * radius);
        let grid = GridSpec::new(self.grid.n, extent).map_err(|e| Error::config("grid", e.to_string()))?;
        if radius > extent / 2.0 {
            return Err(Error::config(
                "grid.extent",
                format!("aperture radius {radius:.4} m does not fit in extent {extent:.4} m"),
            ));
        }
        grid.check_resolves(w0).map_err(|e| Error::config("grid.n", e.to_string()))?;
        let beacon_w0 = self.beacon_w0.unwrap_or(w0);
        grid.check_resolves(beacon_w0).map_err(|e| Error::config("beacon_w0", e.to_string()))?;
        Ok(Geometry {
            wavelength: wl,
            w0,
            distance,
            t: distance / zr,
            rayleigh_range: zr,
            beacon_w0,
            max_abs_l,
            aperture_factor: self.turbulence.aperture_factor,
            aperture_radius: radius,
            grid_n: self.grid.n,
            extent,
            pitch: grid.pitch(),
        })
    }

    /// `(W, params)` for each sweep point, in configured order.
    pub fn sweep_params(&self) -> Result<Vec<(f64, TurbulenceParams)>> {
        let (wl, w0, z) = (self.optics.wavelength, self.optics.w0, self.distance());
        let base = TurbulenceParams::new(0.0, wl, z, w0)?;
        if self.turbulence.cn2.is_empty() {
            Ok(self
                .optics
                .strengths
                .iter()
                .map(|&w| {
                    let p = TurbulenceParams {
                        cn2: cn2_for_strength(w, w0, wl, z),
                        ..base
                    };
                    (w, p)
                })
                .collect())
        } else {
            self.turbulence
                .cn2
                .iter()
                .map(|&c| {
                    let p = TurbulenceParams { cn2: c, ..base };
                    let w = w0 / crate::turbulence::fried_parameter(&p);
                    Ok((w, p))
                })
                .collect()
        }
    }
}
