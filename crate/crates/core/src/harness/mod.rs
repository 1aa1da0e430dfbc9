//! Configuration, deterministic Monte-Carlo sweeps over turbulence
//! realizations, result records and figure recipes.
//!
//! Every realization is simulated independently from its own random
//! streams; the reduction runs in realization order. Output files are
//! therefore bit-identical for any worker count.

pub mod config;
pub mod figures;
pub mod results;
pub mod screens;
pub mod sweep;

pub use config::{ExperimentConfig, Geometry, OutputFormat};
pub use figures::{critical_strength, figure_config, Figure, Scale};
pub use results::{reduce, run_sweep, BellRecord, EntanglementRecord, Measure, SpectrumRecord, SweepResults, Table};
pub use screens::{validate_screens, ScreenReport, StructureRow};
pub use sweep::{simulate, Ensemble, Prepared, RealizationOutcome, SweepPoint};
