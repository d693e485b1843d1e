//! One-shot pipeline execution: simulate, extract the mode curve, score it
//! against the configured oracle, and write the requested artifacts. All
//! computation happens before any file is touched, so a failed run leaves no
//! partial outputs.

use crate::config::{Diagnostic, RunConfig};
use crate::density::DensityEstimate;
use crate::mppp::{
    compute_mppp, compute_mppp_observed, compute_mppp_streaming_observed, score_against_oracle,
    MpppError, MpppReport,
};
use crate::output::{write_mppp_csv, write_paths_csv, DensityCsvWriter};
use crate::sim::{simulate, SimError};
use crate::svg::render_mppp_svg;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("configuration invalid: {} problem(s)", .0.len())]
    Config(Vec<Diagnostic>),
    #[error(transparent)]
    Divergence(SimError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Pipeline(MpppError),
}

impl RunError {
    /// Process exit status: 2 config, 3 divergence, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Divergence(_) => 3,
            RunError::Io { .. } => 4,
            RunError::Pipeline(_) => 2,
        }
    }

    /// Stable one-word reason for machine-readable error lines.
    pub fn reason_code(&self) -> &'static str {
        match self {
            RunError::Config(_) => "config_invalid",
            RunError::Divergence(_) => "divergence_exceeded",
            RunError::Io { .. } => "io_error",
            RunError::Pipeline(_) => "pipeline_error",
        }
    }
}

fn lift_mppp(e: MpppError) -> RunError {
    match e {
        MpppError::Sim(err @ SimError::DivergenceExceeded { .. }) => RunError::Divergence(err),
        other => RunError::Pipeline(other),
    }
}

/// What a successful run produced.
#[derive(Debug)]
pub struct RunSummary {
    pub report: MpppReport,
    /// Files written, in write order.
    pub artifacts: Vec<PathBuf>,
    /// Informational notes: frozen paths, multimodal slices.
    pub warnings: Vec<String>,
}

fn write_file(
    path: &Path,
    write: impl FnOnce(&mut BufWriter<fs::File>) -> io::Result<()>,
) -> Result<(), RunError> {
    let io_err = |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = fs::File::create(path).map_err(io_err)?;
    let mut w = BufWriter::new(file);
    write(&mut w).map_err(io_err)?;
    w.flush().map_err(io_err)
}

/// Runs a validated configuration end to end.
///
/// The ensemble is kept in memory only when the raw-path dump needs it;
/// otherwise paths are simulated in lockstep and discarded slice by slice,
/// which produces the identical curve.
pub fn execute(cfg: &RunConfig) -> Result<RunSummary, RunError> {
    let want_density = cfg.outputs.density_csv.is_some();
    let mut density_slices: Vec<(usize, usize, DensityEstimate)> = Vec::new();
    let observer = |j: usize, coord: usize, est: &DensityEstimate| {
        density_slices.push((j, coord, est.clone()));
    };

    let mut ensemble = None;
    let curve = if cfg.outputs.paths_csv.is_some() {
        let ens = simulate(&cfg.system, &cfg.grid).map_err(|e| lift_mppp(e.into()))?;
        let curve = if want_density {
            compute_mppp_observed(&ens, &cfg.kde, observer)
        } else {
            compute_mppp(&ens, &cfg.kde)
        }
        .map_err(lift_mppp)?;
        ensemble = Some(ens);
        curve
    } else {
        compute_mppp_streaming_observed(&cfg.system, &cfg.grid, &cfg.kde, observer)
            .map_err(lift_mppp)?
    };

    let mut warnings = Vec::new();
    if curve.diverged_paths() > 0 {
        warnings.push(format!(
            "{} of {} paths diverged and were frozen at their last finite state",
            curve.diverged_paths(),
            cfg.grid.n_paths
        ));
    }
    let multi = curve.multimodal_count();
    if multi > 0 {
        warnings.push(format!(
            "{multi} of {} time slices had a second density peak within 5% of the maximum; \
             the reported mode follows the raw argmax",
            curve.n_slices()
        ));
    }

    let report = match &cfg.oracle {
        Some(oracle) => score_against_oracle(curve, oracle).map_err(lift_mppp)?,
        None => MpppReport {
            curve,
            oracle_curve: None,
            endpoint_rel_error: None,
            endpoint_abs_error: None,
            sup_abs_error: None,
            endpoint_relative_undefined: false,
        },
    };

    // Computation is done; now write artifacts.
    let dir = &cfg.outputs.dir;
    fs::create_dir_all(dir).map_err(|source| RunError::Io {
        path: dir.clone(),
        source,
    })?;
    let mut artifacts = Vec::new();

    if let Some(name) = &cfg.outputs.mppp_csv {
        let path = dir.join(name);
        write_file(&path, |w| {
            write_mppp_csv(w, cfg, &report.curve, report.oracle_curve.as_deref())
        })?;
        artifacts.push(path);
    }
    if let Some(name) = &cfg.outputs.paths_csv {
        let ens = ensemble
            .as_ref()
            .expect("ensemble retained when a path dump is requested");
        let path = dir.join(name);
        write_file(&path, |w| write_paths_csv(w, cfg, ens))?;
        artifacts.push(path);
    }
    if let Some(name) = &cfg.outputs.density_csv {
        let path = dir.join(name);
        write_file(&path, |w| {
            let mut dw = DensityCsvWriter::new(w, cfg)?;
            for (j, coord, est) in &density_slices {
                dw.record(cfg.grid.time_at(*j), *coord, est)?;
            }
            dw.finish().map(|_| ())
        })?;
        artifacts.push(path);
    }
    if let Some(name) = &cfg.outputs.svg {
        let path = dir.join(name);
        let svg = render_mppp_svg(
            &report.curve,
            report.oracle_curve.as_deref(),
            cfg.system.label(),
        );
        fs::write(&path, svg).map_err(|source| RunError::Io {
            path: path.clone(),
            source,
        })?;
        artifacts.push(path);
    }

    Ok(RunSummary {
        report,
        artifacts,
        warnings,
    })
}
