//! The mode-curve pipeline: per-slice, per-coordinate kernel density
//! estimates over a simulated ensemble, one mode per slice, scored against a
//! closed-form maximizer when one applies.

use crate::density::{
    has_near_tied_modes, kde, mode_of, refined_mode, DensityError, DensityEstimate, KdeConfig,
};
use crate::oracle::{
    gbm_maximizer, ou_maximizer, rotation2d_most_probable, AdditiveLinearParams, GbmParams,
    Rotation2dParams,
};
use crate::sim::{simulate_streaming, PathEnsemble, SdeSystem, SimError, SimGrid};
use rayon::prelude::*;
use thiserror::Error;

/// Fewer paths than this make per-slice density modes statistically
/// meaningless, so the pipeline refuses to run.
pub const MIN_PATHS: usize = 100;

/// Two nearly tied peaks are flagged when the runner-up is within this
/// relative distance of the maximum.
pub const MULTIMODAL_REL_TOL: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MpppError {
    #[error("mode extraction needs at least {MIN_PATHS} paths, got {got}")]
    TooFewPaths { got: usize },
    #[error(transparent)]
    Density(#[from] DensityError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("oracle dimension {oracle} does not match curve dimension {curve}")]
    OracleDimensionMismatch { oracle: usize, curve: usize },
}

/// The most probable state per time slice. `modes[0]` is the initial state
/// itself: slice 0 is a point mass and needs no estimation.
#[derive(Debug, Clone, PartialEq)]
pub struct MpppCurve {
    times: Vec<f64>,
    /// Slice-major: `modes[j * dim + i]`.
    modes: Vec<f64>,
    /// Bandwidth used per slice and coordinate; NaN where no KDE ran
    /// (slice 0, and degenerate slices).
    bandwidths: Vec<f64>,
    /// Per slice: some coordinate had a second peak within
    /// [`MULTIMODAL_REL_TOL`] of its maximum.
    multimodal: Vec<bool>,
    dim: usize,
    diverged_paths: usize,
}

impl MpppCurve {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_slices(&self) -> usize {
        self.times.len()
    }

    pub fn mode_at(&self, j: usize) -> &[f64] {
        &self.modes[j * self.dim..(j + 1) * self.dim]
    }

    pub fn modes_flat(&self) -> &[f64] {
        &self.modes
    }

    pub fn bandwidth_at(&self, j: usize) -> &[f64] {
        &self.bandwidths[j * self.dim..(j + 1) * self.dim]
    }

    pub fn is_multimodal(&self, j: usize) -> bool {
        self.multimodal[j]
    }

    pub fn multimodal_count(&self) -> usize {
        self.multimodal.iter().filter(|&&b| b).count()
    }

    pub fn diverged_paths(&self) -> usize {
        self.diverged_paths
    }

    /// Bit-level equality. The derived `PartialEq` is useless for whole-curve
    /// comparison because slice 0's bandwidth is NaN by construction; this
    /// compares floats by their bit patterns instead.
    pub fn bits_eq(&self, other: &Self) -> bool {
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        self.dim == other.dim
            && self.diverged_paths == other.diverged_paths
            && self.multimodal == other.multimodal
            && bits(&self.times) == bits(&other.times)
            && bits(&self.modes) == bits(&other.modes)
            && bits(&self.bandwidths) == bits(&other.bandwidths)
    }
}

/// Mode curve with its oracle comparison. Error fields are present exactly
/// when an oracle curve is.
#[derive(Debug, Clone, PartialEq)]
pub struct MpppReport {
    pub curve: MpppCurve,
    /// Oracle maximizer per slice, same layout as the curve's modes.
    pub oracle_curve: Option<Vec<f64>>,
    /// Max over coordinates of |mode - oracle| / |oracle| at the final slice.
    /// None when no oracle applies, or when some oracle coordinate is 0 at
    /// the horizon (flagged below, absolute error still reported).
    pub endpoint_rel_error: Option<f64>,
    /// Max over coordinates of |mode - oracle| at the final slice.
    pub endpoint_abs_error: Option<f64>,
    /// Max over slices and coordinates of |mode - oracle|.
    pub sup_abs_error: Option<f64>,
    /// The relative endpoint error was undefined because the oracle vanishes
    /// at the horizon.
    pub endpoint_relative_undefined: bool,
}

/// A named closed-form reference with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum OracleSpec {
    AdditiveLinear(AdditiveLinearParams),
    Gbm(GbmParams),
    Rotation2d(Rotation2dParams),
}

impl OracleSpec {
    pub fn name(&self) -> &'static str {
        match self {
            OracleSpec::AdditiveLinear(_) => "ou",
            OracleSpec::Gbm(_) => "gbm",
            OracleSpec::Rotation2d(_) => "rotation2d",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            OracleSpec::AdditiveLinear(_) | OracleSpec::Gbm(_) => 1,
            OracleSpec::Rotation2d(_) => 2,
        }
    }

    /// The density maximizer at time `t`.
    pub fn most_probable_at(&self, t: f64) -> Vec<f64> {
        match self {
            OracleSpec::AdditiveLinear(p) => vec![ou_maximizer(p, t)],
            OracleSpec::Gbm(p) => vec![gbm_maximizer(p, t)],
            OracleSpec::Rotation2d(p) => rotation2d_most_probable(p, t).to_vec(),
        }
    }
}

/// Outcome of one slice-coordinate KDE: the degenerate (all-equal) case
/// reports the common value as the mode with no bandwidth.
fn slice_mode(samples: &[f64], kcfg: &KdeConfig) -> Result<(f64, f64, bool), DensityError> {
    match kde(samples, kcfg) {
        Ok(est) => {
            let mode = if kcfg.refine_mode {
                refined_mode(&est)
            } else {
                mode_of(&est)
            };
            Ok((
                mode,
                est.bandwidth,
                has_near_tied_modes(&est, MULTIMODAL_REL_TOL),
            ))
        }
        Err(DensityError::DegenerateSamples { value, .. }) => Ok((value, f64::NAN, false)),
        Err(e) => Err(e),
    }
}

fn slice_mode_observed(
    samples: &[f64],
    kcfg: &KdeConfig,
    j: usize,
    coord: usize,
    observer: &mut dyn FnMut(usize, usize, &DensityEstimate),
) -> Result<(f64, f64, bool), DensityError> {
    match kde(samples, kcfg) {
        Ok(est) => {
            observer(j, coord, &est);
            let mode = if kcfg.refine_mode {
                refined_mode(&est)
            } else {
                mode_of(&est)
            };
            Ok((
                mode,
                est.bandwidth,
                has_near_tied_modes(&est, MULTIMODAL_REL_TOL),
            ))
        }
        Err(DensityError::DegenerateSamples { value, .. }) => Ok((value, f64::NAN, false)),
        Err(e) => Err(e),
    }
}

struct CurveAccum {
    modes: Vec<f64>,
    bandwidths: Vec<f64>,
    multimodal: Vec<bool>,
}

impl CurveAccum {
    fn new(initial_state: &[f64], n_slices: usize) -> Self {
        let dim = initial_state.len();
        let mut modes = Vec::with_capacity(n_slices * dim);
        let mut bandwidths = Vec::with_capacity(n_slices * dim);
        modes.extend_from_slice(initial_state);
        bandwidths.extend(std::iter::repeat_n(f64::NAN, dim));
        let mut multimodal = Vec::with_capacity(n_slices);
        multimodal.push(false);
        CurveAccum {
            modes,
            bandwidths,
            multimodal,
        }
    }

    fn push_slice(&mut self, per_coord: &[(f64, f64, bool)]) {
        let mut any_multi = false;
        for &(mode, bw, multi) in per_coord {
            self.modes.push(mode);
            self.bandwidths.push(bw);
            any_multi |= multi;
        }
        self.multimodal.push(any_multi);
    }
}

/// Mode curve of a stored ensemble. Slices are processed independently (and
/// in parallel); the curve is identical under any scheduling.
pub fn compute_mppp(ens: &PathEnsemble, kcfg: &KdeConfig) -> Result<MpppCurve, MpppError> {
    if ens.n_paths() < MIN_PATHS {
        return Err(MpppError::TooFewPaths { got: ens.n_paths() });
    }
    let d = ens.dim();
    let n = ens.n_steps();
    let per_slice: Vec<Vec<(f64, f64, bool)>> = (1..=n)
        .into_par_iter()
        .map(|j| {
            (0..d)
                .map(|c| slice_mode(&ens.slice_component(j, c), kcfg))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut acc = CurveAccum::new(ens.state(0, 0), n + 1);
    for row in &per_slice {
        acc.push_slice(row);
    }
    Ok(MpppCurve {
        times: ens.times().to_vec(),
        modes: acc.modes,
        bandwidths: acc.bandwidths,
        multimodal: acc.multimodal,
        dim: d,
        diverged_paths: ens.diverged_count(),
    })
}

/// Like [`compute_mppp`], but every non-degenerate density estimate is handed
/// to `observer(slice, coordinate, estimate)` in ascending slice-major order.
/// Used for per-slice density dumps.
pub fn compute_mppp_observed(
    ens: &PathEnsemble,
    kcfg: &KdeConfig,
    mut observer: impl FnMut(usize, usize, &DensityEstimate),
) -> Result<MpppCurve, MpppError> {
    if ens.n_paths() < MIN_PATHS {
        return Err(MpppError::TooFewPaths { got: ens.n_paths() });
    }
    let d = ens.dim();
    let n = ens.n_steps();
    let mut acc = CurveAccum::new(ens.state(0, 0), n + 1);
    let mut row = Vec::with_capacity(d);
    for j in 1..=n {
        row.clear();
        for c in 0..d {
            row.push(slice_mode_observed(
                &ens.slice_component(j, c),
                kcfg,
                j,
                c,
                &mut observer,
            )?);
        }
        acc.push_slice(&row);
    }
    Ok(MpppCurve {
        times: ens.times().to_vec(),
        modes: acc.modes,
        bandwidths: acc.bandwidths,
        multimodal: acc.multimodal,
        dim: d,
        diverged_paths: ens.diverged_count(),
    })
}

/// Simulates and extracts modes slice by slice without storing the ensemble,
/// producing exactly the curve [`compute_mppp`] yields on the stored
/// ensemble of the same system and grid.
pub fn compute_mppp_streaming(
    system: &SdeSystem,
    grid: &SimGrid,
    kcfg: &KdeConfig,
) -> Result<MpppCurve, MpppError> {
    compute_mppp_streaming_observed(system, grid, kcfg, |_, _, _| {})
}

/// Streaming pipeline with a density observer, as in
/// [`compute_mppp_observed`].
pub fn compute_mppp_streaming_observed(
    system: &SdeSystem,
    grid: &SimGrid,
    kcfg: &KdeConfig,
    mut observer: impl FnMut(usize, usize, &DensityEstimate),
) -> Result<MpppCurve, MpppError> {
    if grid.n_paths < MIN_PATHS {
        return Err(MpppError::TooFewPaths { got: grid.n_paths });
    }
    let d = system.dim();
    let m = grid.n_paths;
    let mut acc = CurveAccum::new(system.initial_state(), grid.n_steps + 1);
    let mut failure: Option<DensityError> = None;
    let mut samples = vec![0.0; m];
    let mut row = Vec::with_capacity(d);
    let diverged = simulate_streaming(system, grid, |j, _t, states| {
        if j == 0 || failure.is_some() {
            return;
        }
        row.clear();
        for c in 0..d {
            for (path, sample) in samples.iter_mut().enumerate() {
                *sample = states[path * d + c];
            }
            match slice_mode_observed(&samples, kcfg, j, c, &mut observer) {
                Ok(outcome) => row.push(outcome),
                Err(e) => {
                    failure = Some(e);
                    return;
                }
            }
        }
        acc.push_slice(&row);
    })?;
    if let Some(e) = failure {
        return Err(e.into());
    }
    Ok(MpppCurve {
        times: (0..=grid.n_steps).map(|j| grid.time_at(j)).collect(),
        modes: acc.modes,
        bandwidths: acc.bandwidths,
        multimodal: acc.multimodal,
        dim: d,
        diverged_paths: diverged,
    })
}

/// Scores a curve against a closed-form maximizer: sup norm over all slices
/// plus the final-slice error, both per coordinate with max aggregation.
pub fn score_against_oracle(
    curve: MpppCurve,
    oracle: &OracleSpec,
) -> Result<MpppReport, MpppError> {
    if oracle.dim() != curve.dim() {
        return Err(MpppError::OracleDimensionMismatch {
            oracle: oracle.dim(),
            curve: curve.dim(),
        });
    }
    let d = curve.dim();
    let n_slices = curve.n_slices();
    let mut oracle_curve = Vec::with_capacity(n_slices * d);
    for &t in curve.times() {
        oracle_curve.extend(oracle.most_probable_at(t));
    }

    let mut sup_abs: f64 = 0.0;
    for (m, o) in curve.modes_flat().iter().zip(&oracle_curve) {
        sup_abs = sup_abs.max((m - o).abs());
    }

    let last = n_slices - 1;
    let modes_end = curve.mode_at(last);
    let oracle_end = &oracle_curve[last * d..(last + 1) * d];
    let mut endpoint_abs: f64 = 0.0;
    let mut endpoint_rel: f64 = 0.0;
    let mut undefined = false;
    for i in 0..d {
        let abs = (modes_end[i] - oracle_end[i]).abs();
        endpoint_abs = endpoint_abs.max(abs);
        if oracle_end[i] == 0.0 {
            undefined = true;
        } else {
            endpoint_rel = endpoint_rel.max(abs / oracle_end[i].abs());
        }
    }

    Ok(MpppReport {
        curve,
        oracle_curve: Some(oracle_curve),
        endpoint_rel_error: if undefined { None } else { Some(endpoint_rel) },
        endpoint_abs_error: Some(endpoint_abs),
        sup_abs_error: Some(sup_abs),
        endpoint_relative_undefined: undefined,
    })
}

/// Compares two same-seed-family curves: their sup distance should stay
/// within a few multiples of the single-run oracle error. Statistical sanity
/// only, so the outcome is a warning message rather than an error.
pub fn seed_stability_warning(
    a: &MpppCurve,
    b: &MpppCurve,
    reference_sup_error: f64,
) -> Option<String> {
    if a.dim() != b.dim() || a.n_slices() != b.n_slices() {
        return Some("curves have different shapes and cannot be compared".to_string());
    }
    let mut sup: f64 = 0.0;
    for (x, y) in a.modes_flat().iter().zip(b.modes_flat()) {
        sup = sup.max((x - y).abs());
    }
    if sup > 3.0 * reference_sup_error {
        Some(format!(
            "mode curves from different seeds differ by {sup:.6} in sup norm, over 3x the \
             single-run oracle error {reference_sup_error:.6}; the ensemble may be too small \
             for stable modes"
        ))
    } else {
        None
    }
}
