//! Sweep recipes for the standard figures, at desk or full scale.

use std::str::FromStr;

use serde::Serialize;

use crate::ao::AoMode;
use crate::bell::CLASSICAL_BOUND;
use crate::entanglement::EncodingSubspace;
use crate::error::{Error, Result};

use super::config::{strength_ladder, ExperimentConfig};
use super::results::{BellRecord, Table};

pub const DESK_REALIZATIONS: usize = 50;
pub const DESK_GRID_N: usize = 256;
pub const DESK_STRENGTHS: usize = 8;
pub const FULL_REALIZATIONS: usize = 500;
pub const FULL_GRID_N: usize = 512;
pub const FULL_STRENGTHS: usize = 20;
pub const MAX_STRENGTH: f64 = 4.9;
/// Strengths at which spiral spectra are shown.
pub const SPECTRUM_STRENGTHS: [f64; 3] = [0.73, 2.45, 4.1];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Figure {
    /// Spiral spectra for `l0 = 3, 5`.
    Fig2,
    /// Qubit concurrence for `{-l0, l0}`, `l0 = 1..5`.
    Fig3,
    /// Qutrit negativity for `{-l0, 0, l0}`, `l0 = 1..5`.
    Fig4,
    /// CGLMP parameter for `d = 2, 3, 4`.
    Fig5,
}

impl Figure {
    pub const ALL: [Figure; 4] = [Figure::Fig2, Figure::Fig3, Figure::Fig4, Figure::Fig5];

    pub fn name(&self) -> &'static str {
        match self {
            Figure::Fig2 => "fig2",
            Figure::Fig3 => "fig3",
            Figure::Fig4 => "fig4",
            Figure::Fig5 => "fig5",
        }
    }

    /// Table that carries the figure's data.
    pub fn table(&self) -> Table {
        match self {
            Figure::Fig2 => Table::Spectrum,
            Figure::Fig3 | Figure::Fig4 => Table::Entanglement,
            Figure::Fig5 => Table::Bell,
        }
    }
}

impl FromStr for Figure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Figure::ALL
            .into_iter()
            .find(|f| f.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidArgument(format!("unknown figure `{s}` (fig2, fig3, fig4, fig5)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    #[default]
    Desk,
    Full,
}

impl FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "desk" => Ok(Scale::Desk),
            "full" => Ok(Scale::Full),
            other => Err(Error::InvalidArgument(format!("unknown scale `{other}` (desk, full)"))),
        }
    }
}

/// Configuration reproducing `figure` at `scale`.
pub fn figure_config(figure: Figure, scale: Scale) -> ExperimentConfig {
    let (n_real, grid_n, n_w) = match scale {
        Scale::Desk => (DESK_REALIZATIONS, DESK_GRID_N, DESK_STRENGTHS),
        Scale::Full => (FULL_REALIZATIONS, FULL_GRID_N, FULL_STRENGTHS),
    };
    let mut cfg = ExperimentConfig {
        realizations: n_real,
        ..Default::default()
    };
    cfg.grid.n = grid_n;
    cfg.optics.strengths = strength_ladder(MAX_STRENGTH, n_w);
    cfg.ao_modes = AoMode::ALL.to_vec();
    let presets = |f: fn(i32) -> Result<EncodingSubspace>| -> Vec<EncodingSubspace> {
        (1..=5).map(|l| f(l).expect("valid preset")).collect()
    };
    match figure {
        Figure::Fig2 => {
            cfg.subspaces.clear();
            cfg.spectrum.l0 = vec![3, 5];
            cfg.optics.strengths = SPECTRUM_STRENGTHS.to_vec();
            cfg.ao_modes = vec![AoMode::None];
        }
        Figure::Fig3 => cfg.subspaces = presets(EncodingSubspace::qubit),
        Figure::Fig4 => cfg.subspaces = presets(EncodingSubspace::qutrit),
        Figure::Fig5 => {
            cfg.subspaces = vec![
                EncodingSubspace::qubit(1).expect("valid preset"),
                EncodingSubspace::qutrit(1).expect("valid preset"),
                EncodingSubspace::ququart(1, 2).expect("valid preset"),
            ];
        }
    }
    cfg
}

/// Smallest strength at which `S_d` falls to the classical bound, linearly
/// interpolated between sweep points. `None` if it never does.
pub fn critical_strength(records: &[BellRecord], modes: &str, mode: AoMode) -> Option<f64> {
    let mut pts: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.modes == modes && r.correction_mode == mode)
        .map(|r| (r.w, r.s_d))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut prev: Option<(f64, f64)> = None;
    for (w, s) in pts {
        if !(s > CLASSICAL_BOUND) {
            return Some(match prev {
                Some((w0, s0)) if s.is_finite() => w0 + (s0 - CLASSICAL_BOUND) / (s0 - s) * (w - w0),
                _ => w,
            });
        }
        prev = Some((w, s));
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(w: f64, s: f64) -> BellRecord {
        BellRecord {
            w,
            d: 2,
            modes: "-1;1".into(),
            correction_mode: AoMode::None,
            s_d: s,
            stderr: 0.0,
            violated: s > 2.0,
            n: 1,
        }
    }

    #[test]
    fn recipes_validate() {
        for f in Figure::ALL {
            for s in [Scale::Desk, Scale::Full] {
                let c = figure_config(f, s);
                c.geometry().unwrap();
            }
        }
        let c = figure_config(Figure::Fig3, Scale::Desk);
        assert_eq!(c.optics.strengths.len(), 8);
        assert_eq!(c.realizations, 50);
        assert_eq!(c.grid.n, 256);
        let c = figure_config(Figure::Fig5, Scale::Full);
        assert_eq!(c.optics.strengths.len(), 20);
        assert_eq!(c.realizations, 500);
        assert_eq!("FIG4".parse::<Figure>().unwrap(), Figure::Fig4);
        assert!("fig9".parse::<Figure>().is_err());
    }

    #[test]
    fn crossing_is_interpolated() {
        let r = vec![rec(0.0, 2.8), rec(1.0, 2.4), rec(2.0, 1.6)];
        assert!((critical_strength(&r, "-1;1", AoMode::None).unwrap() - 1.5).abs() < 1e-12);
        let r = vec![rec(0.0, 2.8), rec(1.0, 2.4)];
        assert!(critical_strength(&r, "-1;1", AoMode::None).is_none());
        assert!(critical_strength(&r, "-2;2", AoMode::None).is_none());
    }
}
