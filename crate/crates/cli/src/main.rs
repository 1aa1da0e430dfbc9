//! `oam-turb`: run turbulence sweeps and write plot-ready tables.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use oam_turb::ao::AoMode;
use oam_turb::entanglement::EncodingSubspace;
use oam_turb::harness::{
    critical_strength, figure_config, run_sweep, validate_screens, ExperimentConfig, Figure,
    OutputFormat, Scale, SweepResults, Table,
};
use oam_turb::parallel::Executor;
use oam_turb::Error;
use serde_json::json;

#[derive(Parser)]
#[command(name = "oam-turb", version, about = "Entangled OAM photons through turbulence with adaptive optics")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON experiment configuration; flags below override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    realizations: Option<usize>,
    /// Correction modes, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    ao: Option<Vec<AoMode>>,
    /// Beacon waist [m].
    #[arg(long = "beacon-w0", global = true)]
    beacon_w0: Option<f64>,
    #[arg(long = "grid-n", global = true)]
    grid_n: Option<usize>,
    /// Turbulence strengths W, comma separated.
    #[arg(long, global = true, value_delimiter = ',', allow_negative_numbers = true)]
    strengths: Option<Vec<f64>>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    format: Option<OutputFormat>,
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Spiral spectra P(l0 -> l).
    Spectrum {
        /// Transmitted modes, comma separated.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        l0: Option<Vec<i32>>,
        #[arg(long = "half-width")]
        half_width: Option<u32>,
    },
    /// Concurrence, negativity and trace of the received two-photon state.
    Entanglement {
        /// Encoding modes, comma separated; repeat for several subspaces.
        #[arg(long, allow_hyphen_values = true)]
        subspace: Vec<String>,
    },
    /// CGLMP Bell parameter S_d.
    Bell {
        #[arg(long, allow_hyphen_values = true)]
        subspace: Vec<String>,
    },
    /// Structure function of generated phase screens against the Kolmogorov law.
    ValidateScreens,
    /// Runs the sweep behind one of the standard figures.
    Reproduce {
        /// fig2, fig3, fig4 or fig5.
        figure: Figure,
        #[arg(long, default_value = "desk")]
        scale: Scale,
    },
    /// Prints the effective configuration as JSON.
    Config,
}

fn parse_subspace(s: &str, i: usize) -> Result<EncodingSubspace, Error> {
    let path = format!("subspaces[{i}]");
    let modes = s
        .split(',')
        .map(|p| p.trim().parse::<i32>().map_err(|e| Error::config(&path, format!("`{p}`: {e}"))))
        .collect::<Result<Vec<_>, _>>()?;
    EncodingSubspace::new(modes).map_err(|e| Error::config(path, e.to_string()))
}

fn apply_common(cfg: &mut ExperimentConfig, c: &Common) {
    if let Some(v) = c.seed {
        cfg.seed = v;
    }
    if let Some(v) = c.realizations {
        cfg.realizations = v;
    }
    if let Some(v) = &c.ao {
        cfg.ao_modes = v.clone();
    }
    if let Some(v) = c.beacon_w0 {
        cfg.beacon_w0 = Some(v);
    }
    if let Some(v) = c.grid_n {
        cfg.grid.n = v;
    }
    if let Some(v) = &c.strengths {
        cfg.optics.strengths = v.clone();
        cfg.turbulence.cn2.clear();
    }
    if let Some(v) = &c.out {
        cfg.output.path = Some(v.clone());
    }
    if let Some(v) = c.format {
        cfg.output.format = v;
    }
    if let Some(v) = c.workers {
        cfg.workers = Some(v);
    }
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, Error> {
    Ok(match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            Box::new(BufWriter::new(File::create(p)?))
        }
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// Writes `tables`; CSV files get a `.meta.json` sidecar with the provenance.
fn emit(results: &SweepResults, tables: &[Table], cfg: &ExperimentConfig) -> Result<usize, Error> {
    let path = cfg.output.path.as_deref();
    let mut out = open_output(path)?;
    results.write(tables, cfg.output.format, &mut out)?;
    out.flush()?;
    if let (Some(p), OutputFormat::Csv) = (path, cfg.output.format) {
        let mut meta = p.as_os_str().to_owned();
        meta.push(".meta.json");
        let file = BufWriter::new(File::create(PathBuf::from(meta))?);
        serde_json::to_writer_pretty(file, &results.to_json(&[])?)?;
    }
    Ok(tables
        .iter()
        .map(|t| match t {
            Table::Spectrum => results.spectrum.len(),
            Table::Entanglement => results.entanglement.len(),
            Table::Bell => results.bell.len(),
        })
        .sum())
}

fn run(cli: Cli) -> Result<serde_json::Value, Error> {
    let mut cfg = match (&cli.command, &cli.common.config) {
        (Command::Reproduce { figure, scale }, None) => figure_config(*figure, *scale),
        (Command::Reproduce { .. }, Some(_)) => {
            return Err(Error::InvalidArgument("`reproduce` builds its own configuration; drop --config".into()))
        }
        (_, Some(path)) => ExperimentConfig::load(path).map_err(|e| match e {
            Error::Io(io) => Error::config("--config", format!("{}: {io}", path.display())),
            other => other,
        })?,
        (_, None) => ExperimentConfig::default(),
    };
    apply_common(&mut cfg, &cli.common);
    match &cli.command {
        Command::Spectrum { l0, half_width } => {
            if let Some(v) = l0 {
                cfg.spectrum.l0 = v.clone();
            }
            if let Some(h) = half_width {
                cfg.spectrum.half_width = *h;
            }
            if cfg.spectrum.l0.is_empty() {
                return Err(Error::config("spectrum.l0", "no transmitted modes; pass --l0"));
            }
            cfg.subspaces.clear();
        }
        Command::Entanglement { subspace } | Command::Bell { subspace } => {
            if !subspace.is_empty() {
                cfg.subspaces = subspace
                    .iter()
                    .enumerate()
                    .map(|(i, s)| parse_subspace(s, i))
                    .collect::<Result<_, _>>()?;
            }
            if cfg.subspaces.is_empty() {
                return Err(Error::config("subspaces", "no encoding subspace; pass --subspace"));
            }
            cfg.spectrum.l0.clear();
        }
        _ => {}
    }
    cfg.validate()?;
    let executor = Executor::from_workers(cfg.workers);
    let tables: &[Table] = match &cli.command {
        Command::Config => {
            let text = cfg.to_json_pretty()?;
            match writeln!(io::stdout().lock(), "{text}") {
                Err(e) if e.kind() != io::ErrorKind::BrokenPipe => return Err(e.into()),
                _ => {}
            }
            return Ok(json!({"status": "ok"}));
        }
        Command::ValidateScreens => {
            let report = validate_screens(&cfg, executor)?;
            let mut out = open_output(cfg.output.path.as_deref())?;
            match cfg.output.format {
                OutputFormat::Csv => report.write_csv(&mut out)?,
                OutputFormat::Json => {
                    serde_json::to_writer_pretty(&mut out, &report)?;
                    writeln!(out)?;
                }
            }
            out.flush()?;
            let worst = report.rows.iter().map(|r| r.relative_error()).fold(0.0, f64::max);
            return Ok(json!({"status": "ok", "records": report.rows.len(), "max_relative_error": worst}));
        }
        Command::Spectrum { .. } => &[Table::Spectrum],
        Command::Entanglement { .. } => &[Table::Entanglement],
        Command::Bell { .. } => &[Table::Bell],
        Command::Reproduce { figure, .. } => match figure {
            Figure::Fig2 => &[Table::Spectrum],
            Figure::Fig3 | Figure::Fig4 => &[Table::Entanglement],
            Figure::Fig5 => &[Table::Bell],
        },
    };
    let results = run_sweep(&cfg, executor)?;
    let records = emit(&results, tables, &cfg)?;
    let mut status = json!({"status": "ok", "records": records});
    if matches!(cli.command, Command::Reproduce { figure: Figure::Fig5, .. } | Command::Bell { .. }) {
        let crit: Vec<_> = cfg
            .subspaces
            .iter()
            .flat_map(|s| {
                let label = s.label();
                let bell = &results.bell;
                cfg.ao_modes.iter().map(move |&m| {
                    json!({"modes": label, "correction_mode": m, "critical_W": critical_strength(bell, &label, m)})
                })
            })
            .collect();
        status["critical_strengths"] = json!(crit);
    }
    Ok(status)
}

fn report_error(kind: &str, path: Option<&str>, message: &str) {
    let doc = json!({"status": "error", "kind": kind, "path": path, "message": message});
    eprintln!("{doc}");
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            report_error("usage", None, e.to_string().trim());
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(status) => {
            eprintln!("{status}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            report_error(e.kind(), e.path(), &e.to_string());
            match e {
                Error::Config { .. } | Error::InvalidArgument(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
