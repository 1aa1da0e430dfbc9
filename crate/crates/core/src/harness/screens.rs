//! Ensemble structure function of generated phase screens against the
//! Kolmogorov law.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::parallel::Executor;
use crate::rng::screen_stream;
use crate::turbulence::{generate_phase_screen, kolmogorov_structure, plan_channel, structure_function};

use super::config::ExperimentConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StructureRow {
    pub r: f64,
    #[serde(rename = "D_measured")]
    pub d_measured: f64,
    #[serde(rename = "D_theory")]
    pub d_theory: f64,
}

impl StructureRow {
    pub fn relative_error(&self) -> f64 {
        (self.d_measured / self.d_theory - 1.0).abs()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScreenReport {
    #[serde(rename = "W")]
    pub strength: f64,
    pub r0_screen: f64,
    pub pitch: f64,
    pub extent: f64,
    pub screens: usize,
    pub rows: Vec<StructureRow>,
}

/// Pixel separations from 4 pitches up to an eighth of the grid, both ends
/// included.
pub fn default_separations(n: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut s = 4usize;
    while s < n / 8 {
        out.push(s);
        s = (s as f64 * 1.25).ceil() as usize;
    }
    out.push(n / 8);
    out
}

/// Draws `config.realizations` screens at the strongest configured
/// turbulence and compares their structure function with `6.88 (r/r0)^(5/3)`.
pub fn validate_screens(config: &ExperimentConfig, executor: Executor) -> Result<ScreenReport> {
    let geometry = config.geometry()?;
    let grid = geometry.grid();
    let (wi, (strength, params)) = config
        .sweep_params()?
        .into_iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.cn2.total_cmp(&b.1 .1.cn2))
        .expect("validated config has sweep points");
    if params.cn2 == 0.0 {
        return Err(Error::config("optics.strengths", "screen validation needs a nonzero strength"));
    }
    let plan = plan_channel(&params, &config.plan_options(geometry.max_abs_l))
        .map_err(|e| Error::config(format!("optics.strengths[{wi}]"), e.to_string()))?;
    let seps = default_separations(grid.n());
    let per_screen = executor.map(config.realizations, |i| {
        let mut rng = screen_stream(config.seed, i as u64, 0);
        let screen = generate_phase_screen(&plan, &grid, &mut rng);
        Ok(structure_function(std::slice::from_ref(&screen), &seps))
    })?;
    let n = per_screen.len() as f64;
    let rows = (0..seps.len())
        .map(|k| {
            let r = per_screen[0][k].0;
            let d = per_screen.iter().map(|s| s[k].1).sum::<f64>() / n;
            StructureRow {
                r,
                d_measured: d,
                d_theory: kolmogorov_structure(r, plan.r0_screen),
            }
        })
        .collect();
    Ok(ScreenReport {
        strength,
        r0_screen: plan.r0_screen,
        pitch: grid.pitch(),
        extent: grid.extent(),
        screens: per_screen.len(),
        rows,
    })
}

impl ScreenReport {
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(r).map_err(|e| Error::InvalidArgument(format!("csv: {e}")))?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separations_span_the_window() {
        let s = default_separations(256);
        assert_eq!(s.first(), Some(&4));
        assert_eq!(s.last(), Some(&32));
        assert!(s.windows(2).all(|w| w[1] > w[0]));
    }
}
