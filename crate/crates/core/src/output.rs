//! CSV artifacts. Every file opens with a `#`-comment block of the fully
//! resolved configuration, so an output is reproducible without the config
//! file that produced it. Numbers are written in Rust's shortest
//! round-trip decimal form, which keeps files byte-stable across runs.

use crate::config::RunConfig;
use crate::density::DensityEstimate;
use crate::mppp::MpppCurve;
use crate::sim::PathEnsemble;
use std::io::{self, Write};

/// The `# key = value` header block shared by all artifacts.
pub fn resolved_config_block(cfg: &RunConfig) -> String {
    let mut s = String::new();
    for (k, v) in cfg.resolved_entries() {
        s.push_str("# ");
        s.push_str(&k);
        s.push_str(" = ");
        s.push_str(&v);
        s.push('\n');
    }
    s
}

fn coord_suffix(i: usize) -> &'static str {
    if i == 0 {
        "x"
    } else {
        "y"
    }
}

/// Mode curve table: `t,mode_x[,mode_y][,oracle_x[,oracle_y]]`, one row per
/// time slice.
pub fn write_mppp_csv<W: Write>(
    w: &mut W,
    cfg: &RunConfig,
    curve: &MpppCurve,
    oracle_curve: Option<&[f64]>,
) -> io::Result<()> {
    w.write_all(resolved_config_block(cfg).as_bytes())?;
    let d = curve.dim();
    let mut header = String::from("t");
    for i in 0..d {
        header.push_str(",mode_");
        header.push_str(coord_suffix(i));
    }
    if oracle_curve.is_some() {
        for i in 0..d {
            header.push_str(",oracle_");
            header.push_str(coord_suffix(i));
        }
    }
    writeln!(w, "{header}")?;
    for (j, &t) in curve.times().iter().enumerate() {
        write!(w, "{t}")?;
        for &m in curve.mode_at(j) {
            write!(w, ",{m}")?;
        }
        if let Some(oracle) = oracle_curve {
            for &o in &oracle[j * d..(j + 1) * d] {
                write!(w, ",{o}")?;
            }
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Raw ensemble dump: `path,step,t,x[,y]`, one row per (path, step).
pub fn write_paths_csv<W: Write>(w: &mut W, cfg: &RunConfig, ens: &PathEnsemble) -> io::Result<()> {
    w.write_all(resolved_config_block(cfg).as_bytes())?;
    let mut header = String::from("path,step,t");
    for i in 0..ens.dim() {
        header.push(',');
        header.push_str(coord_suffix(i));
    }
    writeln!(w, "{header}")?;
    for path in 0..ens.n_paths() {
        for (j, &t) in ens.times().iter().enumerate() {
            write!(w, "{path},{j},{t}")?;
            for &v in ens.state(path, j) {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
    }
    Ok(())
}

/// Per-slice density dump, fed incrementally by the pipeline's density
/// observer. One row per grid point: `t,grid_point,density` in one
/// dimension, with a `coord` column inserted for two-dimensional systems.
pub struct DensityCsvWriter<W: Write> {
    out: W,
    dim: usize,
}

impl<W: Write> DensityCsvWriter<W> {
    pub fn new(mut out: W, cfg: &RunConfig) -> io::Result<Self> {
        out.write_all(resolved_config_block(cfg).as_bytes())?;
        let dim = cfg.system.dim();
        if dim == 1 {
            writeln!(out, "t,grid_point,density")?;
        } else {
            writeln!(out, "t,coord,grid_point,density")?;
        }
        Ok(DensityCsvWriter { out, dim })
    }

    pub fn record(&mut self, t: f64, coord: usize, est: &DensityEstimate) -> io::Result<()> {
        for (g, v) in est.grid.iter().zip(&est.values) {
            if self.dim == 1 {
                writeln!(self.out, "{t},{g},{v}")?;
            } else {
                writeln!(self.out, "{t},{},{g},{v}", coord_suffix(coord))?;
            }
        }
        Ok(())
    }

    pub fn finish(mut self) -> io::Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}
