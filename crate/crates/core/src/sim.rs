//! Euler-Maruyama simulation of path ensembles.
//!
//! One step advances `state_i` by `f_i(state, t) dt + g_i(state, t) dB_i`
//! with drift and diffusion frozen at the step's left endpoint; in d >= 2
//! every component reads the same left-endpoint state (simultaneous update).
//! Noise is diagonal: component i is driven by its own Brownian substream.
//!
//! Paths are numerically independent: path m draws from the substreams
//! `(master_seed, path m, component c)`, so the ensemble is bit-identical no
//! matter how many workers simulate it or in which order.

use crate::expr::{Bindings, Expr, MAX_COORDS};
use crate::rng::{GaussianStream, SeedSpec};
use rayon::prelude::*;
use thiserror::Error;

/// Highest dimension the simulator supports (bounded by the expression
/// grammar's coordinate variables).
pub const MAX_DIM: usize = MAX_COORDS;

/// A d-dimensional SDE with diagonal noise and a fixed initial state.
#[derive(Debug, Clone)]
pub struct SdeSystem {
    dim: usize,
    drift: Vec<Expr>,
    diffusion: Vec<Expr>,
    initial_state: Vec<f64>,
    label: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("system needs {expected} {role} expressions for dimension {dim}, got {got}")]
    CoefficientCount {
        role: &'static str,
        expected: usize,
        got: usize,
        dim: usize,
    },
    #[error("dimension must be between 1 and {MAX_DIM}, got {0}")]
    DimensionOutOfRange(usize),
    #[error("{role} expression {index} references coordinate {coord} outside dimension {dim}")]
    VariableOutOfDimension {
        role: &'static str,
        index: usize,
        coord: usize,
        dim: usize,
    },
    #[error("initial state must have {dim} finite entries")]
    BadInitialState { dim: usize },
    #[error("invalid grid: {0}")]
    InvalidGrid(&'static str),
    #[error("{diverged} of {total} paths diverged, above the 1% threshold")]
    DivergenceExceeded { diverged: usize, total: usize },
}

impl SdeSystem {
    pub fn new(
        dim: usize,
        drift: Vec<Expr>,
        diffusion: Vec<Expr>,
        initial_state: Vec<f64>,
        label: impl Into<String>,
    ) -> Result<Self, SimError> {
        if dim == 0 || dim > MAX_DIM {
            return Err(SimError::DimensionOutOfRange(dim));
        }
        for (role, exprs) in [("drift", &drift), ("diffusion", &diffusion)] {
            if exprs.len() != dim {
                return Err(SimError::CoefficientCount {
                    role,
                    expected: dim,
                    got: exprs.len(),
                    dim,
                });
            }
            for (index, e) in exprs.iter().enumerate() {
                if let Some(coord) = e.max_coord_index() {
                    if usize::from(coord) >= dim {
                        return Err(SimError::VariableOutOfDimension {
                            role,
                            index,
                            coord: coord.into(),
                            dim,
                        });
                    }
                }
            }
        }
        if initial_state.len() != dim || initial_state.iter().any(|v| !v.is_finite()) {
            return Err(SimError::BadInitialState { dim });
        }
        Ok(SdeSystem {
            dim,
            drift,
            diffusion,
            initial_state,
            label: label.into(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn drift(&self) -> &[Expr] {
        &self.drift
    }

    pub fn diffusion(&self) -> &[Expr] {
        &self.diffusion
    }

    pub fn initial_state(&self) -> &[f64] {
        &self.initial_state
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

/// Discretization: `n_steps` uniform steps of width `horizon / n_steps` and
/// `n_paths` Monte Carlo paths under `master_seed`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimGrid {
    pub horizon: f64,
    pub n_steps: usize,
    pub n_paths: usize,
    pub master_seed: u64,
}

impl SimGrid {
    pub fn new(
        horizon: f64,
        n_steps: usize,
        n_paths: usize,
        master_seed: u64,
    ) -> Result<Self, SimError> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(SimError::InvalidGrid("horizon must be positive and finite"));
        }
        if n_steps == 0 {
            return Err(SimError::InvalidGrid("n_steps must be at least 1"));
        }
        if n_paths == 0 {
            return Err(SimError::InvalidGrid("n_paths must be at least 1"));
        }
        Ok(SimGrid {
            horizon,
            n_steps,
            n_paths,
            master_seed,
        })
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    /// Time of slice `j`, with `time_at(n_steps) == horizon` exactly.
    pub fn time_at(&self, j: usize) -> f64 {
        self.horizon * j as f64 / self.n_steps as f64
    }
}

/// A step produced a non-finite component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("state component {component} became non-finite")]
pub struct StepDivergence {
    pub component: usize,
}

/// One explicit Euler-Maruyama step from `state` at time `t`.
///
/// Every component is computed from the same left-endpoint `state`. A drift
/// or diffusion evaluation error (for example `log` leaving its domain) makes
/// the component non-finite and is reported as divergence of that component.
pub fn em_step(
    state: &[f64],
    t: f64,
    system: &SdeSystem,
    dt: f64,
    db: &[f64],
) -> Result<Vec<f64>, StepDivergence> {
    assert_eq!(state.len(), system.dim(), "state has wrong dimension");
    assert_eq!(db.len(), system.dim(), "dB has wrong dimension");
    assert!(dt > 0.0, "dt must be positive");
    let mut out = vec![0.0; system.dim()];
    em_step_into(state, t, system, dt, db, &mut out)?;
    Ok(out)
}

fn em_step_into(
    state: &[f64],
    t: f64,
    system: &SdeSystem,
    dt: f64,
    db: &[f64],
    out: &mut [f64],
) -> Result<(), StepDivergence> {
    let b = Bindings::new(state, t);
    for i in 0..system.dim() {
        let f = system.drift[i].eval(&b).unwrap_or(f64::NAN);
        let g = system.diffusion[i].eval(&b).unwrap_or(f64::NAN);
        let v = state[i] + f * dt + g * db[i];
        if !v.is_finite() {
            return Err(StepDivergence { component: i });
        }
        out[i] = v;
    }
    Ok(())
}

/// Advances one path by one step in place, drawing one increment per noise
/// component. Both the full-storage and the streaming simulation drive their
/// paths through this function, so the two modes are numerically identical.
fn advance_in_place(
    system: &SdeSystem,
    t: f64,
    dt: f64,
    sqrt_dt: f64,
    state: &mut [f64],
    streams: &mut [GaussianStream],
) -> Result<(), StepDivergence> {
    let d = system.dim();
    let mut db = [0.0; MAX_DIM];
    for (c, stream) in streams.iter_mut().enumerate() {
        db[c] = sqrt_dt * stream.sample();
    }
    let mut next = [0.0; MAX_DIM];
    em_step_into(&state[..d], t, system, dt, &db[..d], &mut next[..d])?;
    state[..d].copy_from_slice(&next[..d]);
    Ok(())
}

fn component_streams(system: &SdeSystem, grid: &SimGrid, path: u64) -> Vec<GaussianStream> {
    (0..system.dim())
        .map(|c| {
            GaussianStream::new(SeedSpec::for_path_component(
                grid.master_seed,
                path,
                c as u32,
            ))
        })
        .collect()
}

/// All simulated states of an ensemble, path-major:
/// `states[m * (n_steps+1) * dim + j * dim + i]`.
#[derive(Debug, Clone)]
pub struct PathEnsemble {
    times: Vec<f64>,
    states: Vec<f64>,
    diverged: Vec<bool>,
    dim: usize,
    grid: SimGrid,
    label: String,
}

impl PathEnsemble {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_paths(&self) -> usize {
        self.grid.n_paths
    }

    pub fn n_steps(&self) -> usize {
        self.grid.n_steps
    }

    pub fn grid(&self) -> &SimGrid {
        &self.grid
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// State of path `m` at slice `j`.
    pub fn state(&self, m: usize, j: usize) -> &[f64] {
        let stride = (self.grid.n_steps + 1) * self.dim;
        let base = m * stride + j * self.dim;
        &self.states[base..base + self.dim]
    }

    /// Coordinate `coord` of every path at slice `j`, in path order.
    pub fn slice_component(&self, j: usize, coord: usize) -> Vec<f64> {
        assert!(coord < self.dim);
        let stride = (self.grid.n_steps + 1) * self.dim;
        (0..self.grid.n_paths)
            .map(|m| self.states[m * stride + j * self.dim + coord])
            .collect()
    }

    pub fn is_path_diverged(&self, m: usize) -> bool {
        self.diverged[m]
    }

    pub fn diverged_count(&self) -> usize {
        self.diverged.iter().filter(|&&d| d).count()
    }
}

fn check_divergence(diverged: usize, total: usize) -> Result<(), SimError> {
    // Strictly more than 1% of paths diverged fails the run.
    if diverged * 100 > total {
        Err(SimError::DivergenceExceeded { diverged, total })
    } else {
        Ok(())
    }
}

/// Simulates the full ensemble, retaining every state.
///
/// A path whose next state is non-finite is frozen at its last finite state
/// for the remaining steps and flagged; if more than 1% of paths diverge the
/// whole run errors out with the count.
pub fn simulate(system: &SdeSystem, grid: &SimGrid) -> Result<PathEnsemble, SimError> {
    let d = system.dim();
    let n = grid.n_steps;
    let stride = (n + 1) * d;
    let mut states = vec![0.0; grid.n_paths * stride];
    let diverged: Vec<bool> = states
        .par_chunks_mut(stride)
        .enumerate()
        .map(|(m, out)| run_path_into(system, grid, m as u64, out))
        .collect();
    let n_diverged = diverged.iter().filter(|&&b| b).count();
    check_divergence(n_diverged, grid.n_paths)?;
    Ok(PathEnsemble {
        times: (0..=n).map(|j| grid.time_at(j)).collect(),
        states,
        diverged,
        dim: d,
        grid: *grid,
        label: system.label.clone(),
    })
}

fn run_path_into(system: &SdeSystem, grid: &SimGrid, path: u64, out: &mut [f64]) -> bool {
    let d = system.dim();
    let dt = grid.dt();
    let sqrt_dt = dt.sqrt();
    let mut state = [0.0; MAX_DIM];
    state[..d].copy_from_slice(&system.initial_state);
    let mut streams = component_streams(system, grid, path);
    out[..d].copy_from_slice(&state[..d]);
    let mut diverged = false;
    for j in 1..=grid.n_steps {
        if !diverged {
            let t = grid.time_at(j - 1);
            diverged =
                advance_in_place(system, t, dt, sqrt_dt, &mut state[..d], &mut streams).is_err();
            // A diverged path is frozen: it keeps its last finite state and
            // stops consuming its random substreams.
        }
        out[j * d..(j + 1) * d].copy_from_slice(&state[..d]);
    }
    diverged
}

/// Runs the ensemble in lockstep over time without retaining past slices.
///
/// `on_slice(j, t_j, states)` is called for every slice including slice 0;
/// `states` holds the current state of every live path, path-major
/// (`states[m * dim + coord]`), with diverged paths frozen at their last
/// finite state. Produces exactly the states of [`simulate`], in exchange for
/// O(n_paths * dim) memory instead of the full ensemble.
pub fn simulate_streaming<F>(
    system: &SdeSystem,
    grid: &SimGrid,
    mut on_slice: F,
) -> Result<usize, SimError>
where
    F: FnMut(usize, f64, &[f64]),
{
    let d = system.dim();
    let m = grid.n_paths;
    let dt = grid.dt();
    let sqrt_dt = dt.sqrt();
    let mut states = vec![0.0; m * d];
    for chunk in states.chunks_exact_mut(d) {
        chunk.copy_from_slice(&system.initial_state);
    }
    let mut streams: Vec<Vec<GaussianStream>> = (0..m)
        .map(|path| component_streams(system, grid, path as u64))
        .collect();
    let mut diverged = vec![false; m];

    on_slice(0, 0.0, &states);
    for j in 1..=grid.n_steps {
        let t = grid.time_at(j - 1);
        states
            .par_chunks_mut(d)
            .zip(streams.par_iter_mut())
            .zip(diverged.par_iter_mut())
            .for_each(|((state, streams), diverged)| {
                if !*diverged {
                    *diverged = advance_in_place(system, t, dt, sqrt_dt, state, streams).is_err();
                }
            });
        on_slice(j, grid.time_at(j), &states);
    }
    let n_diverged = diverged.iter().filter(|&&b| b).count();
    check_divergence(n_diverged, m)?;
    Ok(n_diverged)
}

/// Arithmetic mean over paths at every slice, accumulated in fixed path
/// order so the result is independent of how the ensemble was produced.
pub fn ensemble_mean_path(ens: &PathEnsemble) -> Vec<Vec<f64>> {
    let d = ens.dim;
    let n = ens.grid.n_steps;
    let m = ens.grid.n_paths;
    let stride = (n + 1) * d;
    let mut means = vec![vec![0.0; d]; n + 1];
    for path in 0..m {
        let base = path * stride;
        for (j, mean) in means.iter_mut().enumerate() {
            for (i, acc) in mean.iter_mut().enumerate() {
                *acc += ens.states[base + j * d + i];
            }
        }
    }
    let inv = 1.0 / m as f64;
    for mean in &mut means {
        for acc in mean.iter_mut() {
            *acc *= inv;
        }
    }
    means
}
