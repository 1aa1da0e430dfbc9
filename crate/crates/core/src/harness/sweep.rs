//! Monte-Carlo orchestration: one task per realization, reduced in index
//! order so results never depend on the worker count.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::ao::{AoMode, BeaconPair, Correction};
use crate::error::{Error, Result};
use crate::field::{make_gaussian, ComplexField, GridSpec};
use crate::modes::{crosstalk_matrix, lg_mode, CrosstalkMatrix, LgModeSpec, ReceiverBasis};
use crate::parallel::Executor;
use crate::turbulence::{
    dimensionless_scales, plan_channel, ChannelPlan, ChannelRealization, DerivedChannelScales,
    SplitStep, UnitScreens,
};

use super::config::{ExperimentConfig, Geometry};

/// One turbulence strength of the sweep.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SweepPoint {
    #[serde(rename = "W")]
    pub strength: f64,
    pub cn2: f64,
    pub scales: DerivedChannelScales,
    pub n_steps: usize,
    pub r0_screen: f64,
    pub step_rytov: f64,
    #[serde(skip)]
    pub plan: ChannelPlan,
}

/// Everything that is identical across realizations, built once.
pub struct Prepared {
    pub config: ExperimentConfig,
    pub geometry: Geometry,
    pub grid: GridSpec,
    pub points: Vec<SweepPoint>,
    pub inputs: Vec<i32>,
    pub outputs: Vec<i32>,
    splits: Vec<SplitStep>,
    launched: Vec<ComplexField>,
    beacon_start: ComplexField,
    vacuum_beacons: Vec<ComplexField>,
    basis: ReceiverBasis,
}

/// Crosstalk matrices of one realization, indexed `point * n_ao + ao`.
#[derive(Debug, Clone)]
pub struct RealizationOutcome {
    pub index: u64,
    pub crosstalk: Vec<CrosstalkMatrix>,
    /// Pixels where the ideal correction fell back to no correction.
    pub flagged_pixels: usize,
    /// Propagated fields that tripped the aliasing flag.
    pub aliasing_warnings: usize,
}

impl Prepared {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        let geometry = config.geometry()?;
        let grid = geometry.grid();
        let opts = config.plan_options(geometry.max_abs_l);
        let points = config
            .sweep_params()?
            .into_iter()
            .enumerate()
            .map(|(i, (w, p))| {
                let plan = plan_channel(&p, &opts).map_err(|e| match e {
                    Error::Config { .. } => e,
                    other => Error::config(format!("optics.strengths[{i}]"), other.to_string()),
                })?;
                Ok(SweepPoint {
                    strength: w,
                    cn2: p.cn2,
                    scales: dimensionless_scales(&p),
                    n_steps: plan.n_steps,
                    r0_screen: plan.r0_screen,
                    step_rytov: plan.step_rytov(),
                    plan,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let splits = points
            .iter()
            .map(|p| SplitStep::new(&p.plan, &grid))
            .collect::<Result<Vec<_>>>()?;
        let (wl, w0) = (geometry.wavelength, geometry.w0);
        let inputs = config.input_modes();
        let outputs = config.output_modes();
        let launched = inputs
            .iter()
            .map(|&l| lg_mode(&grid, &LgModeSpec::new(l, w0, wl)?, 0.0))
            .collect::<Result<Vec<_>>>()?;
        let beacon_start = make_gaussian(grid, geometry.beacon_w0, wl)?;
        let vacuum_beacons = splits
            .iter()
            .map(|s| {
                let mut f = beacon_start.clone();
                s.propagate(&mut f, None)?;
                f.apply_aperture_in_place(geometry.aperture_radius)?;
                Ok(f)
            })
            .collect::<Result<Vec<_>>>()?;
        let basis = ReceiverBasis::new(&grid, w0, wl, geometry.distance, &outputs)?;
        Ok(Self {
            config: config.clone(),
            geometry,
            grid,
            points,
            inputs,
            outputs,
            splits,
            launched,
            beacon_start,
            vacuum_beacons,
            basis,
        })
    }

    pub fn ao_modes(&self) -> &[AoMode] {
        &self.config.ao_modes
    }

    pub fn slot(&self, point: usize, ao: usize) -> usize {
        point * self.config.ao_modes.len() + ao
    }

    /// Simulates realization `index` for every sweep point and AO mode.
    pub fn run_realization(&self, index: u64) -> Result<RealizationOutcome> {
        let seed = self.config.seed;
        let levels = self.config.turbulence.subharmonic_levels;
        // unit screens are shared by every strength with the same step count
        let mut units: BTreeMap<usize, UnitScreens> = BTreeMap::new();
        let mut crosstalk = Vec::with_capacity(self.points.len() * self.ao_modes().len());
        let mut flagged_pixels = 0;
        let mut aliasing_warnings = 0;
        for (pi, point) in self.points.iter().enumerate() {
            let split = &self.splits[pi];
            let realization = if point.plan.is_vacuum() {
                None
            } else {
                let unit = units
                    .entry(point.n_steps)
                    .or_insert_with(|| UnitScreens::draw(seed, index, &self.grid, point.n_steps, levels));
                Some(ChannelRealization::new(unit, &point.plan)?)
            };
            let mut turbulent_beacon = self.beacon_start.clone();
            split.propagate(&mut turbulent_beacon, realization.as_ref())?;
            // the sensor sits behind the receiving aperture
            turbulent_beacon.apply_aperture_in_place(self.geometry.aperture_radius)?;
            let beacon = BeaconPair {
                turbulent: turbulent_beacon,
                vacuum: self.vacuum_beacons[pi].clone(),
            };
            let corrections = self
                .ao_modes()
                .iter()
                .map(|&m| Correction::for_mode(m, &beacon))
                .collect::<Result<Vec<_>>>()?;
            flagged_pixels += corrections.iter().map(|c| c.flagged()).sum::<usize>();
            let received = self
                .launched
                .iter()
                .map(|start| {
                    let mut f = start.clone();
                    split.propagate(&mut f, realization.as_ref())?;
                    Ok(f)
                })
                .collect::<Result<Vec<_>>>()?;
            aliasing_warnings += received.iter().filter(|f| f.aliasing_warning()).count();
            for corr in &corrections {
                let corrected = received
                    .iter()
                    .zip(&self.inputs)
                    .map(|(f, &l0)| {
                        let mut g = corr.apply(f)?;
                        g.apply_aperture_in_place(self.geometry.aperture_radius)?;
                        Ok((l0, g))
                    })
                    .collect::<Result<Vec<_>>>()?;
                crosstalk.push(crosstalk_matrix(&corrected, &self.basis, &self.outputs)?);
            }
        }
        Ok(RealizationOutcome {
            index,
            crosstalk,
            flagged_pixels,
            aliasing_warnings,
        })
    }
}

/// Raw per-realization results of a sweep, in realization order.
pub struct Ensemble {
    pub prepared: Prepared,
    pub outcomes: Vec<RealizationOutcome>,
}

impl Ensemble {
    /// Crosstalk matrices of every realization for one (point, AO mode).
    pub fn crosstalk(&self, point: usize, ao: usize) -> Vec<CrosstalkMatrix> {
        let slot = self.prepared.slot(point, ao);
        self.outcomes.iter().map(|o| o.crosstalk[slot].clone()).collect()
    }

    pub fn flagged_pixels(&self) -> usize {
        self.outcomes.iter().map(|o| o.flagged_pixels).sum()
    }

    pub fn aliasing_warnings(&self) -> usize {
        self.outcomes.iter().map(|o| o.aliasing_warnings).sum()
    }
}

/// Runs every realization of `config`.
pub fn simulate(config: &ExperimentConfig, executor: Executor) -> Result<Ensemble> {
    let prepared = Prepared::new(config)?;
    let outcomes = executor.map(config.realizations, |i| prepared.run_realization(i as u64))?;
    Ok(Ensemble { prepared, outcomes })
}
