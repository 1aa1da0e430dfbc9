//! Beacon-driven phase correction.
//!
//! A Gaussian beacon travels through the same screens as the signal. Its
//! aberration phase (turbulent minus vacuum) drives either a full
//! pixel-by-pixel correction or a tip-tilt correction sensed from the
//! far-field spot centroid.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::Fft2;
use crate::field::{make_gaussian, total_power, ComplexField, GridSpec};
use crate::turbulence::{ChannelPlan, ChannelRealization, SplitStep};

/// Beacon pixels weaker than this fraction of the peak amplitude get no correction.
pub const BEACON_FLOOR: f64 = 1e-12;
/// Minimum beacon power for tip-tilt sensing.
pub const MIN_BEACON_POWER: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AoMode {
    None,
    TipTilt,
    Ideal,
}

impl AoMode {
    pub const ALL: [AoMode; 3] = [AoMode::None, AoMode::TipTilt, AoMode::Ideal];

    pub fn as_str(&self) -> &'static str {
        match self {
            AoMode::None => "none",
            AoMode::TipTilt => "tiptilt",
            AoMode::Ideal => "ideal",
        }
    }
}

impl fmt::Display for AoMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AoMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(AoMode::None),
            "tiptilt" | "tip-tilt" => Ok(AoMode::TipTilt),
            "ideal" => Ok(AoMode::Ideal),
            other => Err(Error::InvalidArgument(format!("unknown AO mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BeaconPair {
    pub turbulent: ComplexField,
    pub vacuum: ComplexField,
}

/// Propagates a Gaussian beacon of waist `beacon_w0` through `realization`
/// and through vacuum.
pub fn propagate_beacon(
    plan: &ChannelPlan,
    grid: &GridSpec,
    realization: &ChannelRealization,
    beacon_w0: f64,
) -> Result<BeaconPair> {
    let split = SplitStep::new(plan, grid)?;
    let start = make_gaussian(*grid, beacon_w0, plan.params.wavelength)?;
    let mut turbulent = start.clone();
    split.propagate(&mut turbulent, Some(realization))?;
    let mut vacuum = start;
    split.propagate(&mut vacuum, None)?;
    Ok(BeaconPair { turbulent, vacuum })
}

/// A phase-only correction ready to be applied to any number of signals.
#[derive(Debug, Clone)]
pub struct Correction {
    mode: AoMode,
    factors: Option<Vec<Complex64>>,
    tilt: (f64, f64),
    flagged: usize,
}

impl Correction {
    pub fn none() -> Self {
        Self {
            mode: AoMode::None,
            factors: None,
            tilt: (0.0, 0.0),
            flagged: 0,
        }
    }

    pub fn for_mode(mode: AoMode, beacon: &BeaconPair) -> Result<Self> {
        match mode {
            AoMode::None => Ok(Self::none()),
            AoMode::Ideal => Self::ideal(&beacon.turbulent, &beacon.vacuum),
            AoMode::TipTilt => Self::tip_tilt(&beacon.turbulent, &beacon.vacuum),
        }
    }

    /// `exp(-i phi_B)` with `phi_B = arg(turbulent) - arg(vacuum)` per pixel.
    pub fn ideal(turbulent: &ComplexField, vacuum: &ComplexField) -> Result<Self> {
        if !turbulent.same_plane(vacuum) {
            return Err(Error::GridMismatch);
        }
        let peak_t = turbulent.samples().iter().map(|a| a.norm()).fold(0.0, f64::max);
        let peak_v = vacuum.samples().iter().map(|a| a.norm()).fold(0.0, f64::max);
        let mut flagged = 0;
        let factors = turbulent
            .samples()
            .iter()
            .zip(vacuum.samples())
            .map(|(t, v)| {
                let (nt, nv) = (t.norm(), v.norm());
                if nt < BEACON_FLOOR * peak_t || nv < BEACON_FLOOR * peak_v || nt == 0.0 || nv == 0.0 {
                    flagged += 1;
                    Complex64::new(1.0, 0.0)
                } else {
                    (t.conj() / nt) * (v / nv)
                }
            })
            .collect();
        Ok(Self {
            mode: AoMode::Ideal,
            factors: Some(factors),
            tilt: (0.0, 0.0),
            flagged,
        })
    }

    /// Linear phase `exp(-i (kx x + ky y))` removing the far-field centroid
    /// offset of the turbulent beacon relative to the vacuum beacon.
    pub fn tip_tilt(turbulent: &ComplexField, vacuum: &ComplexField) -> Result<Self> {
        if !turbulent.same_plane(vacuum) {
            return Err(Error::GridMismatch);
        }
        let (tx, ty) = far_field_centroid(turbulent)?;
        let (vx, vy) = far_field_centroid(vacuum)?;
        let (ax, ay) = (tx - vx, ty - vy);
        let grid = turbulent.grid();
        let factors = grid
            .points()
            .map(|(_, x, y)| Complex64::from_polar(1.0, -(ax * x + ay * y)))
            .collect();
        Ok(Self {
            mode: AoMode::TipTilt,
            factors: Some(factors),
            tilt: (ax, ay),
            flagged: 0,
        })
    }

    pub fn mode(&self) -> AoMode {
        self.mode
    }

    /// Sensed tilt `(kx, ky)` in rad/m (zero unless tip-tilt).
    pub fn tilt(&self) -> (f64, f64) {
        self.tilt
    }

    /// Pixels left uncorrected because the beacon was too dim there.
    pub fn flagged(&self) -> usize {
        self.flagged
    }

    pub fn apply_in_place(&self, signal: &mut ComplexField) -> Result<()> {
        match &self.factors {
            Some(f) => signal.multiply_in_place(f),
            None => Ok(()),
        }
    }

    pub fn apply(&self, signal: &ComplexField) -> Result<ComplexField> {
        let mut out = signal.clone();
        self.apply_in_place(&mut out)?;
        Ok(out)
    }
}

/// Intensity centroid of the discrete Fourier transform, in rad/m.
pub fn far_field_centroid(field: &ComplexField) -> Result<(f64, f64)> {
    let power = total_power(field);
    if power < MIN_BEACON_POWER {
        return Err(Error::WeakBeacon(power));
    }
    let grid = field.grid();
    let n = grid.n();
    let mut spec = field.samples().to_vec();
    Fft2::for_size(n).forward(&mut spec);
    let (mut sx, mut sy, mut s) = (0.0, 0.0, 0.0);
    for iy in 0..n {
        let ky = grid.angular_freq(iy);
        for ix in 0..n {
            let p = spec[iy * n + ix].norm_sqr();
            sx += p * grid.angular_freq(ix);
            sy += p * ky;
            s += p;
        }
    }
    Ok((sx / s, sy / s))
}

/// Full phase conjugation of the beacon aberration. Returns the corrected
/// signal and the number of pixels left uncorrected.
pub fn ideal_correction(
    signal: &ComplexField,
    beacon_turb: &ComplexField,
    beacon_vac: &ComplexField,
) -> Result<(ComplexField, usize)> {
    let c = Correction::ideal(beacon_turb, beacon_vac)?;
    Ok((c.apply(signal)?, c.flagged()))
}

pub fn tip_tilt_correction(
    signal: &ComplexField,
    beacon_turb: &ComplexField,
    beacon_vac: &ComplexField,
) -> Result<ComplexField> {
    Correction::tip_tilt(beacon_turb, beacon_vac)?.apply(signal)
}
