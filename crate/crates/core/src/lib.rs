//! Most probable phase portraits (MPPP) of stochastic differential equations.
//!
//! The pipeline: simulate a Monte Carlo ensemble of SDE paths with the
//! Euler-Maruyama scheme ([`sim`]), estimate the state density of every time
//! slice with a Gaussian kernel ([`density`]), extract the per-slice mode, and
//! assemble the mode curve ([`mppp`]). Closed-form maximizers for three
//! reference systems ([`oracle`]) score the numerical curve. Drift and
//! diffusion coefficients are supplied as expression text ([`expr`]), and
//! Brownian increments come from per-path seeded substreams ([`rng`]) so runs
//! are reproducible under any parallel schedule.
//!
//! [`config`], [`runner`], [`output`], and [`svg`] back the `mppp` command
//! line tool: INI-style run configuration, pipeline orchestration, CSV
//! artifacts, and a dependency-free SVG line chart.

pub mod config;
pub mod density;
pub mod expr;
pub mod mppp;
pub mod oracle;
pub mod output;
pub mod rng;
pub mod runner;
pub mod sim;
pub mod svg;
