//! Run configuration: INI-style files plus flag overrides, resolved into
//! validated pipeline inputs. Resolution never stops at the first problem;
//! every issue is reported as a [`Diagnostic`] with a stable machine-readable
//! code.
//!
//! Sections and keys (all names case-insensitive, later assignments win):
//!
//! ```ini
//! [system]
//! preset = ou            # or gbm, rotation2d; omit for a custom system
//! alpha = 1              # preset parameters: ou takes alpha/beta/x0,
//! beta = 1               # gbm takes mu/sigma/x0, rotation2d takes x0/y0
//! x0 = 1
//! # custom systems instead set dim, drift_x/drift_y, diffusion_x/
//! # diffusion_y, initial_x/initial_y, and an optional label
//!
//! [grid]
//! t = 1                  # time horizon
//! n = 128                # step count; or steps_per_unit (n = round(spu*t))
//! m = 32768              # path count
//! seed = 20140704
//!
//! [kde]
//! n_grid = 100
//! bandwidth = silverman  # or a positive number
//! grid_pad = 3
//! refine = false
//!
//! [outputs]
//! dir = .
//! mppp_csv = mppp.csv    # "none" disables any output
//! paths_csv = none
//! density_csv = none
//! svg = mppp.svg
//! oracle = ou            # defaults to the preset name; "none" disables
//! ```

use crate::density::{BandwidthRule, KdeConfig};
use crate::expr::{parse, Expr};
use crate::mppp::{OracleSpec, MIN_PATHS};
use crate::oracle::{AdditiveLinearParams, GbmParams, Rotation2dParams};
use crate::rng::DEFAULT_MASTER_SEED;
use crate::sim::{SdeSystem, SimGrid};
use std::fmt;
use std::path::PathBuf;

/// One configuration problem. The code is the stable identifier scripts can
/// match on; field names the offending setting as `section.key`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub code: &'static str,
    pub field: String,
    pub message: String,
}

impl Diagnostic {
    fn new(code: &'static str, field: impl Into<String>, message: impl Into<String>) -> Self {
        Diagnostic {
            code,
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} [{}] {}", self.code, self.field, self.message)
    }
}

/// Raw assignments in application order; nothing is interpreted yet.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    entries: Vec<RawEntry>,
}

#[derive(Debug, Clone)]
struct RawEntry {
    section: String,
    key: String,
    value: String,
    origin: String,
}

impl RawConfig {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn push(&mut self, section: &str, key: &str, value: &str, origin: &str) {
        self.entries.push(RawEntry {
            section: section.trim().to_ascii_lowercase(),
            key: key.trim().to_ascii_lowercase(),
            value: value.trim().to_string(),
            origin: origin.to_string(),
        });
    }

    /// Applies one `section.key=value` override.
    pub fn apply_set(&mut self, spec: &str) -> Result<(), Diagnostic> {
        let bad = |why: &str| {
            Diagnostic::new(
                "invalid_set_syntax",
                "--set",
                format!("{why}; expected section.key=value, got {spec:?}"),
            )
        };
        let (path, value) = spec.split_once('=').ok_or_else(|| bad("missing `=`"))?;
        let (section, key) = path.split_once('.').ok_or_else(|| bad("missing `.`"))?;
        if section.trim().is_empty() || key.trim().is_empty() {
            return Err(bad("empty section or key"));
        }
        self.push(section, key, value, "--set");
        Ok(())
    }

    /// Folds INI text in: `[section]` headers, `key = value` lines, blank
    /// lines and full-line `#`/`;` comments. All syntax problems are
    /// reported together.
    pub fn merge_ini(&mut self, text: &str, origin: &str) -> Result<(), Vec<Diagnostic>> {
        let mut diags = Vec::new();
        let mut section: Option<String> = None;
        for (idx, raw_line) in text.lines().enumerate() {
            let line = raw_line.trim();
            let lineno = idx + 1;
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(inner) = line.strip_prefix('[') {
                match inner.strip_suffix(']') {
                    Some(name) if !name.trim().is_empty() => {
                        section = Some(name.trim().to_ascii_lowercase());
                    }
                    _ => diags.push(Diagnostic::new(
                        "ini_syntax",
                        format!("{origin}:{lineno}"),
                        format!("malformed section header {line:?}"),
                    )),
                }
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                diags.push(Diagnostic::new(
                    "ini_syntax",
                    format!("{origin}:{lineno}"),
                    format!("expected key = value, got {line:?}"),
                ));
                continue;
            };
            match &section {
                Some(s) => self.push(s, key, value, &format!("{origin}:{lineno}")),
                None => diags.push(Diagnostic::new(
                    "ini_syntax",
                    format!("{origin}:{lineno}"),
                    "key assigned before any [section] header".to_string(),
                )),
            }
        }
        if diags.is_empty() {
            Ok(())
        } else {
            Err(diags)
        }
    }
}

/// Where each artifact goes; `None` means the artifact is disabled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub mppp_csv: Option<String>,
    pub paths_csv: Option<String>,
    pub density_csv: Option<String>,
    pub svg: Option<String>,
}

/// A fully validated run: the system, grid, and density settings are already
/// constructed, so execution cannot fail on configuration grounds.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub preset: Option<OracleSpec>,
    pub system: SdeSystem,
    pub grid: SimGrid,
    pub kde: KdeConfig,
    pub outputs: OutputConfig,
    pub oracle: Option<OracleSpec>,
    drift_texts: Vec<String>,
    diffusion_texts: Vec<String>,
}

impl RunConfig {
    /// Every resolved setting as `(key, value)` pairs in a fixed order, for
    /// self-describing output headers. Feeding these lines back through the
    /// INI parser reproduces the run.
    pub fn resolved_entries(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let mut kv = |k: &str, v: String| out.push((k.to_string(), v));
        match &self.preset {
            Some(OracleSpec::AdditiveLinear(p)) => {
                kv("system.preset", "ou".into());
                kv("system.alpha", format!("{}", p.alpha));
                kv("system.beta", format!("{}", p.beta));
                kv("system.x0", format!("{}", p.x0));
            }
            Some(OracleSpec::Gbm(p)) => {
                kv("system.preset", "gbm".into());
                kv("system.mu", format!("{}", p.mu));
                kv("system.sigma", format!("{}", p.sigma));
                kv("system.x0", format!("{}", p.x0));
            }
            Some(OracleSpec::Rotation2d(p)) => {
                kv("system.preset", "rotation2d".into());
                kv("system.x0", format!("{}", p.x0));
                kv("system.y0", format!("{}", p.y0));
            }
            None => {
                kv("system.dim", format!("{}", self.system.dim()));
            }
        }
        kv("system.label", self.system.label().to_string());
        if self.preset.is_none() {
            // A preset is fully determined by its parameters above; only
            // custom systems spell out their expressions.
            let coord = |i: usize| if i == 0 { "x" } else { "y" };
            for (i, text) in self.drift_texts.iter().enumerate() {
                kv(&format!("system.drift_{}", coord(i)), text.clone());
            }
            for (i, text) in self.diffusion_texts.iter().enumerate() {
                kv(&format!("system.diffusion_{}", coord(i)), text.clone());
            }
            for (i, v) in self.system.initial_state().iter().enumerate() {
                kv(&format!("system.initial_{}", coord(i)), format!("{v}"));
            }
        }
        kv("grid.t", format!("{}", self.grid.horizon));
        kv("grid.n", format!("{}", self.grid.n_steps));
        kv("grid.m", format!("{}", self.grid.n_paths));
        kv("grid.seed", format!("{}", self.grid.master_seed));
        kv("kde.n_grid", format!("{}", self.kde.n_grid));
        let bw = match self.kde.bandwidth_rule {
            BandwidthRule::SilvermanNormalReference => "silverman".to_string(),
            BandwidthRule::Fixed(h) => format!("{h}"),
        };
        kv("kde.bandwidth", bw);
        kv("kde.grid_pad", format!("{}", self.kde.grid_pad));
        kv("kde.refine", format!("{}", self.kde.refine_mode));
        let name_or_none = |o: &Option<String>| o.clone().unwrap_or_else(|| "none".to_string());
        kv("outputs.dir", self.outputs.dir.display().to_string());
        kv("outputs.mppp_csv", name_or_none(&self.outputs.mppp_csv));
        kv("outputs.paths_csv", name_or_none(&self.outputs.paths_csv));
        kv(
            "outputs.density_csv",
            name_or_none(&self.outputs.density_csv),
        );
        kv("outputs.svg", name_or_none(&self.outputs.svg));
        kv(
            "outputs.oracle",
            self.oracle
                .as_ref()
                .map(|o| o.name().to_string())
                .unwrap_or_else(|| "none".to_string()),
        );
        out
    }
}

type Slot = Option<(String, String)>;

#[derive(Debug, Default)]
struct Staged {
    preset: Slot,
    alpha: Slot,
    beta: Slot,
    mu: Slot,
    sigma: Slot,
    x0: Slot,
    y0: Slot,
    dim: Slot,
    drift_x: Slot,
    drift_y: Slot,
    diffusion_x: Slot,
    diffusion_y: Slot,
    initial_x: Slot,
    initial_y: Slot,
    label: Slot,
    t: Slot,
    n: Slot,
    steps_per_unit: Slot,
    m: Slot,
    seed: Slot,
    n_grid: Slot,
    bandwidth: Slot,
    grid_pad: Slot,
    refine: Slot,
    dir: Slot,
    mppp_csv: Slot,
    paths_csv: Slot,
    density_csv: Slot,
    svg: Slot,
    oracle: Slot,
}

impl Staged {
    fn slot(&mut self, section: &str, key: &str) -> Option<&mut Slot> {
        match (section, key) {
            ("system", "preset") => Some(&mut self.preset),
            ("system", "alpha") => Some(&mut self.alpha),
            ("system", "beta") => Some(&mut self.beta),
            ("system", "mu") => Some(&mut self.mu),
            ("system", "sigma") => Some(&mut self.sigma),
            ("system", "x0") => Some(&mut self.x0),
            ("system", "y0") => Some(&mut self.y0),
            ("system", "dim") => Some(&mut self.dim),
            ("system", "drift_x") => Some(&mut self.drift_x),
            ("system", "drift_y") => Some(&mut self.drift_y),
            ("system", "diffusion_x") => Some(&mut self.diffusion_x),
            ("system", "diffusion_y") => Some(&mut self.diffusion_y),
            ("system", "initial_x") => Some(&mut self.initial_x),
            ("system", "initial_y") => Some(&mut self.initial_y),
            ("system", "label") => Some(&mut self.label),
            ("grid", "t") => Some(&mut self.t),
            ("grid", "n") => Some(&mut self.n),
            ("grid", "steps_per_unit") => Some(&mut self.steps_per_unit),
            ("grid", "m") => Some(&mut self.m),
            ("grid", "seed") => Some(&mut self.seed),
            ("kde", "n_grid") => Some(&mut self.n_grid),
            ("kde", "bandwidth") => Some(&mut self.bandwidth),
            ("kde", "grid_pad") => Some(&mut self.grid_pad),
            ("kde", "refine") => Some(&mut self.refine),
            ("outputs", "dir") => Some(&mut self.dir),
            ("outputs", "mppp_csv") => Some(&mut self.mppp_csv),
            ("outputs", "paths_csv") => Some(&mut self.paths_csv),
            ("outputs", "density_csv") => Some(&mut self.density_csv),
            ("outputs", "svg") => Some(&mut self.svg),
            ("outputs", "oracle") => Some(&mut self.oracle),
            _ => None,
        }
    }
}

fn take_f64(slot: &Slot, field: &str, diags: &mut Vec<Diagnostic>) -> Option<f64> {
    let (text, origin) = slot.as_ref()?;
    match text.parse::<f64>() {
        Ok(v) if v.is_finite() => Some(v),
        _ => {
            diags.push(Diagnostic::new(
                "invalid_number",
                field,
                format!("{text:?} (from {origin}) is not a finite number"),
            ));
            None
        }
    }
}

fn take_usize(slot: &Slot, field: &str, diags: &mut Vec<Diagnostic>) -> Option<usize> {
    let (text, origin) = slot.as_ref()?;
    match text.parse::<usize>() {
        Ok(v) => Some(v),
        Err(_) => {
            diags.push(Diagnostic::new(
                "invalid_number",
                field,
                format!("{text:?} (from {origin}) is not a nonnegative integer"),
            ));
            None
        }
    }
}

fn take_u64(slot: &Slot, field: &str, diags: &mut Vec<Diagnostic>) -> Option<u64> {
    let (text, origin) = slot.as_ref()?;
    match text.parse::<u64>() {
        Ok(v) => Some(v),
        Err(_) => {
            diags.push(Diagnostic::new(
                "invalid_number",
                field,
                format!("{text:?} (from {origin}) is not an unsigned 64-bit integer"),
            ));
            None
        }
    }
}

fn take_bool(slot: &Slot, field: &str, diags: &mut Vec<Diagnostic>) -> Option<bool> {
    let (text, origin) = slot.as_ref()?;
    match text.to_ascii_lowercase().as_str() {
        "true" => Some(true),
        "false" => Some(false),
        _ => {
            diags.push(Diagnostic::new(
                "invalid_bool",
                field,
                format!("{text:?} (from {origin}) is not `true` or `false`"),
            ));
            None
        }
    }
}

/// Output filename slot: absent keeps `default`, the literal `none` disables.
fn take_path(slot: &Slot, default: Option<&str>) -> Option<String> {
    match slot {
        Some((text, _)) if text.eq_ignore_ascii_case("none") => None,
        Some((text, _)) => Some(text.clone()),
        None => default.map(str::to_string),
    }
}

struct PresetParts {
    spec: OracleSpec,
    drift: Vec<String>,
    diffusion: Vec<String>,
    initial: Vec<f64>,
    default_t: f64,
    label: String,
}

fn build_preset(name: &str, staged: &Staged, diags: &mut Vec<Diagnostic>) -> Option<PresetParts> {
    // Parameters that belong to a different preset are rejected, not ignored.
    let reject = |slot: &Slot, field: &str, diags: &mut Vec<Diagnostic>| {
        if slot.is_some() {
            diags.push(Diagnostic::new(
                "preset_param_unknown",
                field,
                format!("preset `{name}` does not take this parameter"),
            ));
        }
    };
    match name {
        "ou" => {
            reject(&staged.mu, "system.mu", diags);
            reject(&staged.sigma, "system.sigma", diags);
            reject(&staged.y0, "system.y0", diags);
            let alpha = take_f64(&staged.alpha, "system.alpha", diags).unwrap_or(1.0);
            let beta = take_f64(&staged.beta, "system.beta", diags).unwrap_or(1.0);
            let x0 = take_f64(&staged.x0, "system.x0", diags).unwrap_or(1.0);
            Some(PresetParts {
                spec: OracleSpec::AdditiveLinear(AdditiveLinearParams { alpha, beta, x0 }),
                drift: vec![format!("({alpha})*x")],
                diffusion: vec![format!("({beta})")],
                initial: vec![x0],
                default_t: 1.0,
                label: "ou".to_string(),
            })
        }
        "gbm" => {
            reject(&staged.alpha, "system.alpha", diags);
            reject(&staged.beta, "system.beta", diags);
            reject(&staged.y0, "system.y0", diags);
            let mu = take_f64(&staged.mu, "system.mu", diags).unwrap_or(1.0);
            let sigma = take_f64(&staged.sigma, "system.sigma", diags).unwrap_or(1.0);
            let x0 = take_f64(&staged.x0, "system.x0", diags).unwrap_or(1.0);
            if x0 == 0.0 {
                diags.push(Diagnostic::new(
                    "gbm_x0_nonzero",
                    "system.x0",
                    "geometric Brownian motion started at 0 stays at 0",
                ));
            }
            Some(PresetParts {
                spec: OracleSpec::Gbm(GbmParams { mu, sigma, x0 }),
                drift: vec![format!("({mu})*x")],
                diffusion: vec![format!("({sigma})*x")],
                initial: vec![x0],
                default_t: 1.0,
                label: "gbm".to_string(),
            })
        }
        "rotation2d" => {
            reject(&staged.alpha, "system.alpha", diags);
            reject(&staged.beta, "system.beta", diags);
            reject(&staged.mu, "system.mu", diags);
            reject(&staged.sigma, "system.sigma", diags);
            let x0 = take_f64(&staged.x0, "system.x0", diags).unwrap_or(1.0);
            let y0 = take_f64(&staged.y0, "system.y0", diags).unwrap_or(1.0);
            Some(PresetParts {
                spec: OracleSpec::Rotation2d(Rotation2dParams { x0, y0 }),
                drift: vec!["-y".to_string(), "x".to_string()],
                diffusion: vec!["1".to_string(), "1".to_string()],
                initial: vec![x0, y0],
                default_t: 2.0,
                label: "rotation2d".to_string(),
            })
        }
        other => {
            diags.push(Diagnostic::new(
                "unknown_preset",
                "system.preset",
                format!("`{other}` is not one of ou, gbm, rotation2d"),
            ));
            None
        }
    }
}

struct CustomParts {
    drift: Vec<String>,
    diffusion: Vec<String>,
    initial: Vec<f64>,
    label: String,
    dim: usize,
}

fn build_custom(staged: &Staged, diags: &mut Vec<Diagnostic>) -> Option<CustomParts> {
    let inferred_two =
        staged.drift_y.is_some() || staged.diffusion_y.is_some() || staged.initial_y.is_some();
    let dim = match take_usize(&staged.dim, "system.dim", diags) {
        Some(d @ 1..=2) => d,
        Some(d) => {
            diags.push(Diagnostic::new(
                "dim_out_of_range",
                "system.dim",
                format!("{d} is outside the supported range 1..=2"),
            ));
            return None;
        }
        None if staged.dim.is_some() => return None, // parse already diagnosed
        None => {
            if inferred_two {
                2
            } else {
                1
            }
        }
    };
    if dim == 1 && inferred_two {
        for (slot, field) in [
            (&staged.drift_y, "system.drift_y"),
            (&staged.diffusion_y, "system.diffusion_y"),
            (&staged.initial_y, "system.initial_y"),
        ] {
            if slot.is_some() {
                diags.push(Diagnostic::new(
                    "dim_field_mismatch",
                    field,
                    "set for a 1-dimensional system",
                ));
            }
        }
        return None;
    }

    let mut missing = false;
    let mut require = |slot: &Slot, field: &str, diags: &mut Vec<Diagnostic>| {
        if slot.is_none() {
            diags.push(Diagnostic::new(
                "system_missing_field",
                field,
                "required for a custom system",
            ));
            missing = true;
        }
    };
    require(&staged.drift_x, "system.drift_x", diags);
    require(&staged.diffusion_x, "system.diffusion_x", diags);
    if dim == 2 {
        require(&staged.drift_y, "system.drift_y", diags);
        require(&staged.diffusion_y, "system.diffusion_y", diags);
    }
    if missing {
        return None;
    }

    let text_of = |slot: &Slot| slot.as_ref().map(|(v, _)| v.clone()).unwrap_or_default();
    let mut drift = vec![text_of(&staged.drift_x)];
    let mut diffusion = vec![text_of(&staged.diffusion_x)];
    let mut initial = vec![take_f64(&staged.initial_x, "system.initial_x", diags).unwrap_or(1.0)];
    if dim == 2 {
        drift.push(text_of(&staged.drift_y));
        diffusion.push(text_of(&staged.diffusion_y));
        initial.push(take_f64(&staged.initial_y, "system.initial_y", diags).unwrap_or(1.0));
    }
    let label = staged
        .label
        .as_ref()
        .map(|(v, _)| v.clone())
        .unwrap_or_else(|| "custom".to_string());
    Some(CustomParts {
        drift,
        diffusion,
        initial,
        label,
        dim,
    })
}

/// Parses expressions and checks coordinate references against the
/// dimension. Either every expression is fine or `None` with diagnostics.
fn parse_system_exprs(
    texts: &[String],
    role: &str,
    dim: usize,
    diags: &mut Vec<Diagnostic>,
) -> Option<Vec<Expr>> {
    let coord = |i: usize| if i == 0 { "x" } else { "y" };
    let mut out = Vec::with_capacity(texts.len());
    let mut ok = true;
    for (i, text) in texts.iter().enumerate() {
        let field = format!("system.{role}_{}", coord(i));
        match parse(text) {
            Err(err) => {
                diags.push(Diagnostic::new(
                    "expr_syntax_error",
                    field,
                    format!("{text:?}: {err}"),
                ));
                ok = false;
            }
            Ok(e) => {
                if let Some(c) = e.max_coord_index() {
                    if usize::from(c) >= dim {
                        diags.push(Diagnostic::new(
                            "variable_out_of_dimension",
                            field,
                            format!(
                                "references coordinate {} but the system has dimension {dim}",
                                coord(usize::from(c))
                            ),
                        ));
                        ok = false;
                    }
                }
                out.push(e);
            }
        }
    }
    if ok {
        Some(out)
    } else {
        None
    }
}

/// Resolves raw assignments into a validated [`RunConfig`], collecting every
/// problem rather than stopping at the first.
///
/// Diagnostic codes: `unknown_key`, `ini_syntax`, `invalid_set_syntax`,
/// `invalid_number`, `invalid_bool`, `no_system_configured`,
/// `unknown_preset`, `preset_param_unknown`, `preset_conflicts_custom`,
/// `system_missing_field`, `dim_out_of_range`, `dim_field_mismatch`,
/// `expr_syntax_error`, `variable_out_of_dimension`, `gbm_x0_nonzero`,
/// `grid_horizon_positive`, `grid_steps_positive`,
/// `grid_steps_overspecified`, `grid_paths_positive`,
/// `grid_paths_below_minimum`, `kde_grid_too_small`, `bandwidth_invalid`,
/// `grid_pad_negative`, `unknown_oracle`, `oracle_requires_preset`,
/// `oracle_preset_mismatch`.
/// Drift texts, diffusion texts, initial state, label, dimension: the pieces
/// a system is assembled from once a preset or custom block has resolved.
type SystemParts = (Vec<String>, Vec<String>, Vec<f64>, String, usize);

pub fn resolve(raw: &RawConfig) -> Result<RunConfig, Vec<Diagnostic>> {
    let mut diags = Vec::new();
    let mut staged = Staged::default();
    for e in &raw.entries {
        match staged.slot(&e.section, &e.key) {
            Some(slot) => *slot = Some((e.value.clone(), e.origin.clone())),
            None => diags.push(Diagnostic::new(
                "unknown_key",
                format!("{}.{}", e.section, e.key),
                format!("not a recognized setting (from {})", e.origin),
            )),
        }
    }

    // System: a preset or a fully custom definition, never a mixture.
    let preset_name = staged.preset.as_ref().map(|(v, _)| v.to_ascii_lowercase());
    let mut preset: Option<OracleSpec> = None;
    let mut default_t = 1.0;
    let mut system_parts: Option<SystemParts> = None;
    match preset_name.as_deref() {
        Some(name) => {
            for (slot, field) in [
                (&staged.dim, "system.dim"),
                (&staged.drift_x, "system.drift_x"),
                (&staged.drift_y, "system.drift_y"),
                (&staged.diffusion_x, "system.diffusion_x"),
                (&staged.diffusion_y, "system.diffusion_y"),
                (&staged.initial_x, "system.initial_x"),
                (&staged.initial_y, "system.initial_y"),
            ] {
                if slot.is_some() {
                    diags.push(Diagnostic::new(
                        "preset_conflicts_custom",
                        field,
                        format!("preset `{name}` already defines the system; use its parameters"),
                    ));
                }
            }
            if let Some(parts) = build_preset(name, &staged, &mut diags) {
                default_t = parts.default_t;
                let dim = parts.spec.dim();
                preset = Some(parts.spec);
                let label = staged
                    .label
                    .as_ref()
                    .map(|(v, _)| v.clone())
                    .unwrap_or(parts.label);
                system_parts = Some((parts.drift, parts.diffusion, parts.initial, label, dim));
            }
        }
        None => {
            let any_custom = staged.dim.is_some()
                || staged.drift_x.is_some()
                || staged.diffusion_x.is_some()
                || staged.drift_y.is_some()
                || staged.diffusion_y.is_some();
            if !any_custom {
                diags.push(Diagnostic::new(
                    "no_system_configured",
                    "system",
                    "set system.preset or define drift/diffusion expressions",
                ));
            } else if let Some(parts) = build_custom(&staged, &mut diags) {
                system_parts = Some((
                    parts.drift,
                    parts.diffusion,
                    parts.initial,
                    parts.label,
                    parts.dim,
                ));
            }
        }
    }

    let mut system: Option<SdeSystem> = None;
    let mut drift_texts = Vec::new();
    let mut diffusion_texts = Vec::new();
    if let Some((drift, diffusion, initial, label, dim)) = system_parts {
        let parsed_drift = parse_system_exprs(&drift, "drift", dim, &mut diags);
        let parsed_diffusion = parse_system_exprs(&diffusion, "diffusion", dim, &mut diags);
        if let (Some(f), Some(g)) = (parsed_drift, parsed_diffusion) {
            // Canonical display keeps header blocks unambiguous regardless
            // of how the input was spaced or parenthesized.
            drift_texts = f.iter().map(|e| e.to_string()).collect();
            diffusion_texts = g.iter().map(|e| e.to_string()).collect();
            match SdeSystem::new(dim, f, g, initial, &label) {
                Ok(sys) => system = Some(sys),
                Err(err) => diags.push(Diagnostic::new(
                    "invalid_number",
                    "system.initial_x",
                    err.to_string(),
                )),
            }
        }
    }

    // Grid.
    let t = match take_f64(&staged.t, "grid.t", &mut diags) {
        Some(v) if v > 0.0 => v,
        Some(v) => {
            diags.push(Diagnostic::new(
                "grid_horizon_positive",
                "grid.t",
                format!("horizon must be positive, got {v}"),
            ));
            default_t
        }
        None => default_t,
    };
    if staged.n.is_some() && staged.steps_per_unit.is_some() {
        diags.push(Diagnostic::new(
            "grid_steps_overspecified",
            "grid.n",
            "set grid.n or grid.steps_per_unit, not both",
        ));
    }
    let n = if staged.n.is_some() {
        take_usize(&staged.n, "grid.n", &mut diags).unwrap_or(0)
    } else {
        let spu = match take_f64(&staged.steps_per_unit, "grid.steps_per_unit", &mut diags) {
            Some(v) if v > 0.0 => v,
            Some(v) => {
                diags.push(Diagnostic::new(
                    "grid_steps_positive",
                    "grid.steps_per_unit",
                    format!("steps per unit time must be positive, got {v}"),
                ));
                128.0
            }
            None => 128.0,
        };
        (spu * t).round() as usize
    };
    if n == 0 && staged.n.is_some() {
        diags.push(Diagnostic::new(
            "grid_steps_positive",
            "grid.n",
            "step count must be at least 1",
        ));
    }
    let m = match take_usize(&staged.m, "grid.m", &mut diags) {
        Some(0) => {
            diags.push(Diagnostic::new(
                "grid_paths_positive",
                "grid.m",
                "path count must be at least 1",
            ));
            0
        }
        Some(v) if v < MIN_PATHS => {
            diags.push(Diagnostic::new(
                "grid_paths_below_minimum",
                "grid.m",
                format!("mode extraction needs at least {MIN_PATHS} paths, got {v}"),
            ));
            v
        }
        Some(v) => v,
        None => 32768,
    };
    let seed = take_u64(&staged.seed, "grid.seed", &mut diags).unwrap_or(DEFAULT_MASTER_SEED);

    // KDE.
    let n_grid = match take_usize(&staged.n_grid, "kde.n_grid", &mut diags) {
        Some(v) if v < 16 => {
            diags.push(Diagnostic::new(
                "kde_grid_too_small",
                "kde.n_grid",
                format!("need at least 16 grid points, got {v}"),
            ));
            100
        }
        Some(v) => v,
        None => 100,
    };
    let bandwidth_rule = match &staged.bandwidth {
        None => BandwidthRule::SilvermanNormalReference,
        Some((text, origin)) => {
            if text.eq_ignore_ascii_case("silverman") {
                BandwidthRule::SilvermanNormalReference
            } else {
                match text.parse::<f64>() {
                    Ok(h) if h > 0.0 && h.is_finite() => BandwidthRule::Fixed(h),
                    _ => {
                        diags.push(Diagnostic::new(
                            "bandwidth_invalid",
                            "kde.bandwidth",
                            format!(
                                "{text:?} (from {origin}) is neither `silverman` nor a \
                                 positive number"
                            ),
                        ));
                        BandwidthRule::SilvermanNormalReference
                    }
                }
            }
        }
    };
    let grid_pad = match take_f64(&staged.grid_pad, "kde.grid_pad", &mut diags) {
        Some(v) if v >= 0.0 => v,
        Some(v) => {
            diags.push(Diagnostic::new(
                "grid_pad_negative",
                "kde.grid_pad",
                format!("padding must be nonnegative, got {v}"),
            ));
            3.0
        }
        None => 3.0,
    };
    let refine_mode = take_bool(&staged.refine, "kde.refine", &mut diags).unwrap_or(false);

    // Outputs.
    let dir = staged
        .dir
        .as_ref()
        .map(|(v, _)| PathBuf::from(v))
        .unwrap_or_else(|| PathBuf::from("."));
    let outputs = OutputConfig {
        dir,
        mppp_csv: take_path(&staged.mppp_csv, Some("mppp.csv")),
        paths_csv: take_path(&staged.paths_csv, None),
        density_csv: take_path(&staged.density_csv, None),
        svg: take_path(&staged.svg, Some("mppp.svg")),
    };

    // Oracle: tied to the preset, which carries its parameters.
    let oracle = match &staged.oracle {
        None => preset.clone(),
        Some((text, _)) if text.eq_ignore_ascii_case("none") => None,
        Some((text, origin)) => {
            let name = text.to_ascii_lowercase();
            if !matches!(name.as_str(), "ou" | "gbm" | "rotation2d") {
                diags.push(Diagnostic::new(
                    "unknown_oracle",
                    "outputs.oracle",
                    format!("{text:?} (from {origin}) is not one of ou, gbm, rotation2d, none"),
                ));
                None
            } else {
                match &preset {
                    None => {
                        diags.push(Diagnostic::new(
                            "oracle_requires_preset",
                            "outputs.oracle",
                            "closed-form references take their parameters from a preset; \
                             custom systems have none",
                        ));
                        None
                    }
                    Some(p) if p.name() != name => {
                        diags.push(Diagnostic::new(
                            "oracle_preset_mismatch",
                            "outputs.oracle",
                            format!("oracle `{name}` does not match preset `{}`", p.name()),
                        ));
                        None
                    }
                    Some(p) => Some(p.clone()),
                }
            }
        }
    };

    if !diags.is_empty() {
        return Err(diags);
    }
    // All inputs were validated above, so construction cannot fail; any
    // remaining error is a genuine diagnostic, not a panic.
    let system = match system {
        Some(s) => s,
        None => {
            return Err(vec![Diagnostic::new(
                "no_system_configured",
                "system",
                "system definition did not resolve",
            )])
        }
    };
    let grid = match SimGrid::new(t, n, m, seed) {
        Ok(g) => g,
        Err(e) => {
            return Err(vec![Diagnostic::new(
                "grid_steps_positive",
                "grid",
                e.to_string(),
            )])
        }
    };
    let kde = KdeConfig {
        n_grid,
        bandwidth_rule,
        grid_pad,
        refine_mode,
    };
    Ok(RunConfig {
        preset,
        system,
        grid,
        kde,
        outputs,
        oracle,
        drift_texts,
        diffusion_texts,
    })
}

/// All problems with `raw`, empty when it resolves cleanly.
pub fn validate(raw: &RawConfig) -> Vec<Diagnostic> {
    match resolve(raw) {
        Ok(_) => Vec::new(),
        Err(diags) => diags,
    }
}
