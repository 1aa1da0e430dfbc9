//! Result records, reduction of an ensemble into records, and CSV/JSON
//! writers.

use std::io::Write;

use serde::Serialize;

use crate::ao::AoMode;
use crate::bell::{bell_parameter, CLASSICAL_BOUND};
use crate::entanglement::{
    accumulate, assemble_biphoton, bootstrap_stderr, concurrence, linear_stderr, negativity,
    BiphotonState, DensityMatrix, EncodingSubspace, MIN_BOOTSTRAP_REALIZATIONS,
};
use crate::error::{Error, Result};
use crate::modes::spiral_spectrum;
use crate::parallel::Executor;

use super::config::{ErrorMethod, ExperimentConfig, Geometry, OutputFormat};
use super::sweep::{Ensemble, SweepPoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    Concurrence,
    Negativity,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumRecord {
    pub l0: i32,
    pub l: i32,
    #[serde(rename = "P")]
    pub p: f64,
    #[serde(rename = "stderr_P")]
    pub stderr_p: f64,
    #[serde(rename = "W")]
    pub w: f64,
    pub correction_mode: AoMode,
    #[serde(rename = "N")]
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntanglementRecord {
    #[serde(rename = "W")]
    pub w: f64,
    pub d: usize,
    /// Encoding modes joined by `;`.
    pub modes: String,
    pub correction_mode: AoMode,
    pub measure: Measure,
    pub value: f64,
    pub stderr: f64,
    pub trace: f64,
    pub trace_stderr: f64,
    #[serde(rename = "N")]
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BellRecord {
    #[serde(rename = "W")]
    pub w: f64,
    pub d: usize,
    #[serde(skip)]
    pub modes: String,
    pub correction_mode: AoMode,
    #[serde(rename = "S_d")]
    pub s_d: f64,
    pub stderr: f64,
    pub violated: bool,
    #[serde(rename = "N")]
    pub n: usize,
}

/// Bell record as written to JSON (carries the encoding modes too).
#[derive(Serialize)]
struct BellJson<'a> {
    modes: &'a str,
    #[serde(flatten)]
    record: &'a BellRecord,
}

/// Provenance shared by every record of a run.
#[derive(Debug, Clone, Serialize)]
pub struct Metadata {
    pub build_id: &'static str,
    pub version: &'static str,
    pub seed: u64,
    pub realizations: usize,
    pub geometry: Geometry,
    pub points: Vec<SweepPoint>,
    pub error_method: ErrorMethod,
    pub bootstrap_resamples: usize,
    pub beacon_flagged_pixels: usize,
    pub aliasing_warnings: usize,
    /// Full configuration, minus the fields that cannot affect results.
    pub config: ExperimentConfig,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResults {
    pub metadata: Metadata,
    pub spectrum: Vec<SpectrumRecord>,
    pub entanglement: Vec<EntanglementRecord>,
    pub bell: Vec<BellRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Table {
    Spectrum,
    Entanglement,
    Bell,
}

impl Table {
    pub fn name(&self) -> &'static str {
        match self {
            Table::Spectrum => "spectrum",
            Table::Entanglement => "entanglement",
            Table::Bell => "bell",
        }
    }
}

pub fn build_id() -> &'static str {
    option_env!("OAM_TURB_BUILD_ID").unwrap_or("unknown")
}

fn stderr_of<F>(
    cfg: &ExperimentConfig,
    states: &[BiphotonState],
    dm: &DensityMatrix,
    f: F,
    stream_id: u64,
) -> Result<f64>
where
    F: Fn(&DensityMatrix) -> Result<f64>,
{
    if cfg.errors.method == ErrorMethod::Bootstrap && states.len() >= MIN_BOOTSTRAP_REALIZATIONS {
        let seed = cfg.seed ^ stream_id.rotate_left(32);
        bootstrap_stderr(states, f, cfg.errors.resamples, seed)
    } else {
        linear_stderr(dm, f)
    }
}

struct SubspaceOutput {
    entanglement: Vec<EntanglementRecord>,
    bell: BellRecord,
}

fn reduce_subspace(
    cfg: &ExperimentConfig,
    point: &SweepPoint,
    mode: AoMode,
    space: &EncodingSubspace,
    states: &[BiphotonState],
    stream_id: u64,
) -> Result<SubspaceOutput> {
    let d = space.dim();
    let n = states.len();
    let measures: &[Measure] = if d == 2 {
        &[Measure::Concurrence, Measure::Negativity]
    } else {
        &[Measure::Negativity]
    };
    let mean_trace = states.iter().map(|s| s.norm_sqr()).sum::<f64>() / n as f64;
    let dm = match accumulate(states) {
        Ok(dm) => Some(dm),
        Err(Error::LossyChannel(_)) => None,
        Err(e) => return Err(e),
    };
    let mut entanglement = Vec::new();
    for (mi, &m) in measures.iter().enumerate() {
        let f = |dm: &DensityMatrix| match m {
            Measure::Concurrence => concurrence(dm),
            Measure::Negativity => negativity(dm),
        };
        let (value, stderr, trace_stderr) = match &dm {
            Some(dm) => (f(dm)?, stderr_of(cfg, states, dm, f, stream_id * 4 + mi as u64)?, dm.trace_stderr),
            None => (f64::NAN, f64::NAN, 0.0),
        };
        entanglement.push(EntanglementRecord {
            w: point.strength,
            d,
            modes: space.label(),
            correction_mode: mode,
            measure: m,
            value,
            stderr,
            trace: mean_trace,
            trace_stderr,
            n,
        });
    }
    let (s_d, stderr) = match &dm {
        Some(dm) => (bell_parameter(dm)?, stderr_of(cfg, states, dm, bell_parameter, stream_id * 4 + 3)?),
        None => (f64::NAN, f64::NAN),
    };
    Ok(SubspaceOutput {
        entanglement,
        bell: BellRecord {
            w: point.strength,
            d,
            modes: space.label(),
            correction_mode: mode,
            s_d,
            stderr,
            violated: s_d > CLASSICAL_BOUND,
            n,
        },
    })
}

/// Reduces an ensemble to records. Records come out in sweep order
/// (strength, AO mode, then subspace or `l0`); bootstrap streams are keyed
/// by that position, so the result is independent of `executor`.
pub fn reduce(ensemble: &Ensemble, executor: Executor) -> Result<SweepResults> {
    let prep = &ensemble.prepared;
    let cfg = &prep.config;
    let n_ao = cfg.ao_modes.len();
    let n_sub = cfg.subspaces.len();
    let mut spectrum = Vec::new();
    for (pi, point) in prep.points.iter().enumerate() {
        for (ai, &mode) in cfg.ao_modes.iter().enumerate() {
            if cfg.spectrum.l0.is_empty() {
                continue;
            }
            let cts = ensemble.crosstalk(pi, ai);
            for &l0 in &cfg.spectrum.l0 {
                let window = cfg.spectrum_window(l0);
                for sp in spiral_spectrum(&cts, l0)? {
                    if window.contains(&sp.l) {
                        spectrum.push(SpectrumRecord {
                            l0,
                            l: sp.l,
                            p: sp.probability,
                            stderr_p: sp.stderr,
                            w: point.strength,
                            correction_mode: mode,
                            n: cts.len(),
                        });
                    }
                }
            }
        }
    }
    let tasks = prep.points.len() * n_ao * n_sub;
    let outputs = executor.map(tasks, |task| {
        let (pi, rest) = (task / (n_ao * n_sub), task % (n_ao * n_sub));
        let (ai, si) = (rest / n_sub, rest % n_sub);
        let space = &cfg.subspaces[si];
        let slot = prep.slot(pi, ai);
        let states = ensemble
            .outcomes
            .iter()
            .map(|o| assemble_biphoton(&o.crosstalk[slot], space))
            .collect::<Result<Vec<_>>>()?;
        reduce_subspace(cfg, &prep.points[pi], cfg.ao_modes[ai], space, &states, task as u64)
    })?;
    let mut entanglement = Vec::new();
    let mut bell = Vec::new();
    for o in outputs {
        entanglement.extend(o.entanglement);
        bell.push(o.bell);
    }
    let mut config = cfg.clone();
    config.workers = None;
    config.output = Default::default();
    Ok(SweepResults {
        metadata: Metadata {
            build_id: build_id(),
            version: env!("CARGO_PKG_VERSION"),
            seed: cfg.seed,
            realizations: cfg.realizations,
            geometry: prep.geometry,
            points: prep.points.clone(),
            error_method: cfg.errors.method,
            bootstrap_resamples: cfg.errors.resamples,
            beacon_flagged_pixels: ensemble.flagged_pixels(),
            aliasing_warnings: ensemble.aliasing_warnings(),
            config,
        },
        spectrum,
        entanglement,
        bell,
    })
}

/// Simulates and reduces `config`.
pub fn run_sweep(config: &ExperimentConfig, executor: Executor) -> Result<SweepResults> {
    let ensemble = super::sweep::simulate(config, executor)?;
    reduce(&ensemble, executor)
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidArgument(format!("csv: {other:?}")),
    }
}

fn write_rows<W: Write, T: Serialize>(out: W, rows: &[T], header: &[&str]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(header).map_err(csv_error)?;
    for r in rows {
        w.serialize(r).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub const SPECTRUM_HEADER: [&str; 7] = ["l0", "l", "P", "stderr_P", "W", "correction_mode", "N"];
pub const ENTANGLEMENT_HEADER: [&str; 10] = [
    "W", "d", "modes", "correction_mode", "measure", "value", "stderr", "trace", "trace_stderr", "N",
];
pub const BELL_HEADER: [&str; 7] = ["W", "d", "correction_mode", "S_d", "stderr", "violated", "N"];

impl SweepResults {
    pub fn write_csv<W: Write>(&self, table: Table, out: W) -> Result<()> {
        match table {
            Table::Spectrum => write_rows(out, &self.spectrum, &SPECTRUM_HEADER),
            Table::Entanglement => write_rows(out, &self.entanglement, &ENTANGLEMENT_HEADER),
            Table::Bell => write_rows(out, &self.bell, &BELL_HEADER),
        }
    }

    /// Nested JSON document: metadata plus the requested tables.
    pub fn to_json(&self, tables: &[Table]) -> Result<serde_json::Value> {
        let mut doc = serde_json::Map::new();
        doc.insert("metadata".into(), serde_json::to_value(&self.metadata)?);
        for t in tables {
            let v = match t {
                Table::Spectrum => serde_json::to_value(&self.spectrum)?,
                Table::Entanglement => serde_json::to_value(&self.entanglement)?,
                Table::Bell => serde_json::to_value(
                    self.bell
                        .iter()
                        .map(|r| BellJson { modes: &r.modes, record: r })
                        .collect::<Vec<_>>(),
                )?,
            };
            doc.insert(t.name().into(), v);
        }
        Ok(serde_json::Value::Object(doc))
    }

    pub fn write(&self, tables: &[Table], format: OutputFormat, mut out: impl Write) -> Result<()> {
        match format {
            OutputFormat::Json => {
                serde_json::to_writer_pretty(&mut out, &self.to_json(tables)?)?;
                writeln!(out)?;
            }
            OutputFormat::Csv => {
                for (i, t) in tables.iter().enumerate() {
                    if i > 0 {
                        writeln!(out)?;
                    }
                    self.write_csv(*t, &mut out)?;
                }
            }
        }
        Ok(())
    }
}
