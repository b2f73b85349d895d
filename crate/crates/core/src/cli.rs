//! Command-line front end: layered configuration, per-command drivers,
//! deterministic sweeps and result serialization.
//!
//! Configuration keys are dotted (`model.n`, `mcmc.beta`, ...). Values are
//! resolved as flags > config file > defaults; a config file is flat or
//! nested TOML, JSON, or a previous run's `manifest.json`.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::classical::{analytic_gap, enumerate_spectrum, SpectrumOptions};
use crate::error::Error;
use crate::format::fmt_f64;
use crate::fss::{
    extrapolate_exponent, leave_one_out_systematics, lowest_gap, pairwise_scaling, phi_curve, Exponent,
    FssOptions, ModelFamily, PhiCurve,
};
use crate::graph::{build_pwr2_couplings_signed, build_ring_couplings, is_power_of_two, CouplingGraph, SignConvention};
use crate::lid::{mean_lid_with, LidOptions};
use crate::mcmc::{chain_seed, estimate_low_spectrum, InitialState, McmcPlan};
use crate::quantum::{
    build_hamiltonian, connected_structure_factor, correlations, entropy_profile, ground_state,
    lowest_eigenpairs, momentum_grid, second_moment_xi, HamiltonianSpec, LanczosOptions, SiteOrdering,
};
use crate::rydgeo::{rydberg_couplings, s_of_h, species_pattern, tambourine_positions, Species};

pub const SCHEMA_VERSION: u32 = 1;
pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn validation(message: impl Into<String>) -> Self {
        Self { code: EXIT_VALIDATION, message: message.into() }
    }
}

/// Numerical failures exit with 3, everything else with 2.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::ConvergenceFailure { .. }
        | Error::ManifoldNotExited(_)
        | Error::NotNormalized(_)
        | Error::NoCrossing
        | Error::AmbiguousCrossing(_)
        | Error::FitFailure(_) => EXIT_NUMERICAL,
        _ => EXIT_VALIDATION,
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        Self { code: exit_code(&e), message: e.to_string() }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::validation(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, ValueEnum, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandName {
    ClassicalGap,
    Enumerate,
    Mcmc,
    Lid,
    Ed,
    Fss,
    MapSOfH,
    Positions,
    Sweep,
}

impl CommandName {
    pub fn as_str(self) -> &'static str {
        match self {
            CommandName::ClassicalGap => "classical-gap",
            CommandName::Enumerate => "enumerate",
            CommandName::Mcmc => "mcmc",
            CommandName::Lid => "lid",
            CommandName::Ed => "ed",
            CommandName::Fss => "fss",
            CommandName::MapSOfH => "map-s-of-h",
            CommandName::Positions => "positions",
            CommandName::Sweep => "sweep",
        }
    }

    fn parse(s: &str) -> CliResult<Self> {
        <Self as ValueEnum>::from_str(s, false).map_err(|_| CliError::validation(format!("unknown command {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Kind {
    Int,
    Float,
    Str,
    Bool,
    Floats,
    Ints,
    Strs,
}

/// Every accepted key with its type and default (empty means unset).
const KEYS: &[(&str, Kind, &str)] = &[
    ("model.kind", Kind::Str, "pwr2"),
    ("model.n", Kind::Int, "16"),
    ("model.s", Kind::Float, ""),
    ("model.h", Kind::Float, ""),
    ("model.j", Kind::Float, "1"),
    ("model.b_field", Kind::Float, "0.1"),
    ("model.sign", Kind::Str, "afm-favoring"),
    ("model.distances", Kind::Ints, "1"),
    ("model.dual_species", Kind::Bool, "false"),
    ("model.detuning", Kind::Float, "0"),
    ("grid.s", Kind::Floats, ""),
    ("grid.h", Kind::Floats, ""),
    ("grid.b_field", Kind::Floats, ""),
    ("grid.n", Kind::Ints, ""),
    ("seed", Kind::Int, "0"),
    ("enumerate.max_levels", Kind::Int, ""),
    ("mcmc.beta", Kind::Float, "20"),
    ("mcmc.sweeps", Kind::Int, ""),
    ("mcmc.chains", Kind::Int, "32"),
    ("mcmc.burn_in", Kind::Int, ""),
    ("mcmc.init", Kind::Str, "random"),
    ("lid.k", Kind::Int, ""),
    ("lid.exponent", Kind::Float, "1"),
    ("ed.levels", Kind::Int, "4"),
    ("ed.tol", Kind::Float, "1e-8"),
    ("ed.max_krylov", Kind::Int, "120"),
    ("ed.max_restarts", Kind::Int, "60"),
    ("ed.ordering", Kind::Str, "euclidean"),
    ("fss.curves", Kind::Strs, ""),
    ("fss.sizes", Kind::Ints, "8,16"),
    ("fss.x_win", Kind::Float, "0.5"),
    ("fss.nu_guess", Kind::Float, "1"),
    ("fss.z_floor", Kind::Float, "0.01"),
    ("fss.extrapolate", Kind::Str, "none"),
    ("sweep.command", Kind::Str, "classical-gap"),
    ("sweep.axes", Kind::Strs, "s"),
    ("sweep.max_parallel", Kind::Int, "1"),
    ("sweep.max_points", Kind::Int, "100000"),
    ("output.dir", Kind::Str, "pwr2lab-out"),
    ("output.format", Kind::Str, "csv"),
    ("output.force", Kind::Bool, "false"),
];

fn key_kind(key: &str) -> Option<Kind> {
    KEYS.iter().find(|k| k.0 == key).map(|k| k.1)
}

/// `lo:hi:step` (inclusive) or a comma-separated list.
pub fn parse_grid(s: &str) -> std::result::Result<Vec<f64>, String> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(Vec::new());
    }
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() == 3 {
        let p = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}"));
        let (lo, hi, step) = (p(parts[0])?, p(parts[1])?, p(parts[2])?);
        if !(step > 0.0) || hi < lo {
            return Err(format!("grid {s:?} needs lo <= hi and step > 0"));
        }
        let m = ((hi - lo) / step + 1e-9).floor() as usize;
        return Ok((0..=m).map(|k| lo + step * k as f64).collect());
    }
    s.split(',').map(|x| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}"))).collect()
}

fn coerce(key: &str, v: &Value) -> CliResult<Value> {
    let kind = key_kind(key).ok_or_else(|| CliError::validation(format!("unknown config key {key:?}")))?;
    let bad = |why: &str| CliError::validation(format!("key {key:?}: {why} (got {v})"));
    if v.is_null() {
        return Ok(Value::Null);
    }
    if let Value::String(s) = v {
        return coerce_str(key, kind, s);
    }
    Ok(match kind {
        Kind::Int => json!(v.as_u64().ok_or_else(|| bad("expected a non-negative integer"))?),
        Kind::Float => json!(v.as_f64().ok_or_else(|| bad("expected a number"))?),
        Kind::Bool => json!(v.as_bool().ok_or_else(|| bad("expected a boolean"))?),
        Kind::Str => return Err(bad("expected a string")),
        Kind::Floats | Kind::Ints | Kind::Strs => {
            let arr = match v {
                Value::Array(a) => a.clone(),
                other => vec![other.clone()],
            };
            let items: CliResult<Vec<Value>> = arr
                .iter()
                .map(|x| match kind {
                    Kind::Floats => x.as_f64().map(|f| json!(f)).ok_or_else(|| bad("expected numbers")),
                    Kind::Ints => x.as_u64().map(|f| json!(f)).ok_or_else(|| bad("expected integers")),
                    _ => x.as_str().map(|f| json!(f)).ok_or_else(|| bad("expected strings")),
                })
                .collect();
            Value::Array(items?)
        }
    })
}

fn coerce_str(key: &str, kind: Kind, s: &str) -> CliResult<Value> {
    let bad = |e: String| CliError::validation(format!("key {key:?}: {e}"));
    let s = s.trim();
    Ok(match kind {
        Kind::Str => json!(s),
        Kind::Int => json!(s.parse::<u64>().map_err(|e| bad(format!("{s:?}: {e}")))?),
        Kind::Float => json!(s.parse::<f64>().map_err(|e| bad(format!("{s:?}: {e}")))?),
        Kind::Bool => json!(s.parse::<bool>().map_err(|e| bad(format!("{s:?}: {e}")))?),
        Kind::Floats => json!(parse_grid(s).map_err(bad)?),
        Kind::Ints => {
            let v: std::result::Result<Vec<u64>, _> =
                s.split(',').filter(|x| !x.trim().is_empty()).map(|x| x.trim().parse::<u64>()).collect();
            json!(v.map_err(|e| bad(e.to_string()))?)
        }
        Kind::Strs => json!(s.split(',').map(str::trim).filter(|x| !x.is_empty()).collect::<Vec<_>>()),
    })
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, Value)>) {
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                if key_kind(&key).is_some() {
                    out.push((key, x.clone()));
                } else {
                    flatten(&key, x, out);
                }
            }
        }
        other => out.push((prefix.to_string(), other.clone())),
    }
}

/// Resolved key/value configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    values: BTreeMap<String, Value>,
}

impl Config {
    pub fn defaults(cmd: CommandName) -> Self {
        let mut values = BTreeMap::new();
        for &(key, kind, default) in KEYS {
            let v = if default.is_empty() { Value::Null } else { coerce_str(key, kind, default).expect("default") };
            values.insert(key.to_string(), v);
        }
        if matches!(cmd, CommandName::MapSOfH | CommandName::Positions) {
            values.insert("model.kind".into(), json!("tambourine"));
        }
        Self { values }
    }

    pub fn set(&mut self, key: &str, v: &Value) -> CliResult<()> {
        let v = coerce(key, v)?;
        self.values.insert(key.to_string(), v);
        Ok(())
    }

    pub fn set_str(&mut self, key: &str, s: &str) -> CliResult<()> {
        self.set(key, &Value::String(s.to_string()))
    }

    /// Overlay a TOML or JSON file; a manifest contributes its `config`.
    pub fn merge_file(&mut self, path: &Path) -> CliResult<()> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::validation(format!("cannot read config {}: {e}", path.display())))?;
        let is_json = path.extension().is_some_and(|e| e == "json") || text.trim_start().starts_with('{');
        let mut root: Value = if is_json {
            serde_json::from_str(&text).map_err(|e| CliError::validation(format!("config: {e}")))?
        } else {
            let t: toml::Table = text.parse().map_err(|e| CliError::validation(format!("config: {e}")))?;
            serde_json::to_value(t).map_err(|e| CliError::validation(format!("config: {e}")))?
        };
        if root.get("schema_version").is_some() {
            root = root.get("config").cloned().unwrap_or(Value::Object(Map::new()));
        }
        let mut pairs = Vec::new();
        flatten("", &root, &mut pairs);
        for (k, v) in pairs {
            self.set(&k, &v)?;
        }
        Ok(())
    }

    pub fn as_json(&self) -> Value {
        Value::Object(self.values.iter().map(|(k, v)| (k.clone(), v.clone())).collect())
    }

    fn raw(&self, key: &str) -> &Value {
        self.values.get(key).unwrap_or(&Value::Null)
    }

    fn is_set(&self, key: &str) -> bool {
        !self.raw(key).is_null()
    }

    fn opt_f64(&self, key: &str) -> Option<f64> {
        self.raw(key).as_f64()
    }

    fn f64(&self, key: &str) -> CliResult<f64> {
        self.opt_f64(key).ok_or_else(|| CliError::validation(format!("{key} must be set")))
    }

    fn opt_usize(&self, key: &str) -> Option<usize> {
        self.raw(key).as_u64().map(|v| v as usize)
    }

    fn usize(&self, key: &str) -> CliResult<usize> {
        self.opt_usize(key).ok_or_else(|| CliError::validation(format!("{key} must be set")))
    }

    fn u64(&self, key: &str) -> u64 {
        self.raw(key).as_u64().unwrap_or(0)
    }

    fn str(&self, key: &str) -> &str {
        self.raw(key).as_str().unwrap_or("")
    }

    fn bool(&self, key: &str) -> bool {
        self.raw(key).as_bool().unwrap_or(false)
    }

    fn floats(&self, key: &str) -> Vec<f64> {
        self.raw(key).as_array().map(|a| a.iter().filter_map(Value::as_f64).collect()).unwrap_or_default()
    }

    fn usizes(&self, key: &str) -> Vec<usize> {
        self.raw(key).as_array().map(|a| a.iter().filter_map(|v| v.as_u64().map(|x| x as usize)).collect()).unwrap_or_default()
    }

    fn strs(&self, key: &str) -> Vec<String> {
        self.raw(key).as_array().map(|a| a.iter().filter_map(|v| v.as_str().map(String::from)).collect()).unwrap_or_default()
    }

    pub fn seed(&self) -> u64 {
        self.u64("seed")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ModelKind {
    Pwr2,
    Ring,
    Tambourine,
}

impl ModelKind {
    fn control_key(self) -> &'static str {
        match self {
            ModelKind::Tambourine => "h",
            _ => "s",
        }
    }
}

fn model_kind(cfg: &Config) -> CliResult<ModelKind> {
    match cfg.str("model.kind") {
        "pwr2" => Ok(ModelKind::Pwr2),
        "ring" => Ok(ModelKind::Ring),
        "tambourine" => Ok(ModelKind::Tambourine),
        other => Err(CliError::validation(format!("model.kind {other:?} is not one of pwr2, ring, tambourine"))),
    }
}

fn validate(cmd: CommandName, cfg: &Config) -> CliResult<()> {
    let kind = model_kind(cfg)?;
    let n = cfg.usize("model.n")?;
    if !is_power_of_two(n) {
        return Err(CliError::validation(format!("model.n = {n} must be a power of two")));
    }
    for m in cfg.usizes("grid.n").iter().chain(&cfg.usizes("fss.sizes")) {
        if !is_power_of_two(*m) {
            return Err(CliError::validation(format!("size {m} must be a power of two")));
        }
    }
    if cfg.is_set("model.s") && cfg.is_set("model.h") {
        return Err(CliError::validation("set only one of model.s and model.h"));
    }
    match kind {
        ModelKind::Tambourine if cfg.is_set("model.s") || !cfg.floats("grid.s").is_empty() => {
            return Err(CliError::validation("tambourine models are controlled by h, not s"));
        }
        ModelKind::Pwr2 | ModelKind::Ring if cfg.is_set("model.h") || !cfg.floats("grid.h").is_empty() => {
            return Err(CliError::validation("model.h only applies to model.kind = tambourine"));
        }
        _ => {}
    }
    sign(cfg)?;
    if !matches!(cfg.str("output.format"), "csv" | "json" | "both") {
        return Err(CliError::validation("output.format must be csv, json or both"));
    }
    if cmd == CommandName::ClassicalGap && kind != ModelKind::Pwr2 {
        return Err(CliError::validation("classical-gap is defined for model.kind = pwr2 only"));
    }
    Ok(())
}

fn sign(cfg: &Config) -> CliResult<SignConvention> {
    match cfg.str("model.sign") {
        "afm-favoring" => Ok(SignConvention::AfmFavoring),
        "fm-favoring" => Ok(SignConvention::FmFavoring),
        other => Err(CliError::validation(format!("model.sign {other:?} is not afm-favoring or fm-favoring"))),
    }
}

/// Control value (`s` or `h`) of a single-point configuration.
fn control(cfg: &Config) -> CliResult<f64> {
    let key = format!("model.{}", model_kind(cfg)?.control_key());
    cfg.f64(&key)
}

fn build_graph(cfg: &Config) -> CliResult<CouplingGraph> {
    let n = cfg.usize("model.n")?;
    let x = control(cfg)?;
    let j = cfg.f64("model.j")?;
    Ok(match model_kind(cfg)? {
        ModelKind::Pwr2 => build_pwr2_couplings_signed(n, x, j, sign(cfg)?)?,
        ModelKind::Ring => build_ring_couplings(n, &cfg.usizes("model.distances"), x, j, sign(cfg)?)?,
        ModelKind::Tambourine => {
            let pos = tambourine_positions(n, x)?;
            let species = if cfg.bool("model.dual_species") { Some(species_pattern(n)?) } else { None };
            rydberg_couplings(&pos, species.as_ref())?
        }
    })
}

fn lanczos(cfg: &Config) -> CliResult<LanczosOptions> {
    Ok(LanczosOptions {
        tol: cfg.f64("ed.tol")?,
        max_krylov: cfg.usize("ed.max_krylov")?,
        max_restarts: cfg.usize("ed.max_restarts")?,
        seed: cfg.seed(),
    })
}

fn mcmc_plan(cfg: &Config, seed: u64) -> CliResult<McmcPlan> {
    let mut plan = McmcPlan::default_for(cfg.usize("model.n")?).with_seed(seed);
    plan.beta = cfg.f64("mcmc.beta")?;
    plan.chains = cfg.usize("mcmc.chains")?;
    if let Some(s) = cfg.opt_usize("mcmc.sweeps") {
        plan.sweeps = s;
        plan.burn_in = s / 10;
    }
    if let Some(b) = cfg.opt_usize("mcmc.burn_in") {
        plan.burn_in = b;
    }
    plan.init = match cfg.str("mcmc.init") {
        "random" => InitialState::Random,
        "afm" => InitialState::Afm,
        "recursive" => InitialState::Recursive,
        other => return Err(CliError::validation(format!("mcmc.init {other:?} is not random, afm or recursive"))),
    };
    plan.validate()?;
    Ok(plan)
}

/// One output cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(u64),
    Float(f64),
    Text(String),
    Bool(bool),
    Empty,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => fmt_f64(*v),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Int(v) => json!(v),
            Cell::Float(v) if v.is_finite() => json!(v),
            Cell::Float(v) => json!(fmt_f64(*v)),
            Cell::Text(s) => json!(s),
            Cell::Bool(b) => json!(b),
            Cell::Empty => Value::Null,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    fn write(&self, dir: &Path, stem: &str, format: &str, files: &mut Vec<String>) -> CliResult<()> {
        if format != "json" {
            let name = format!("{stem}.csv");
            let mut w = csv::Writer::from_writer(BufWriter::new(File::create(dir.join(&name))?));
            let io = |e: csv::Error| CliError::validation(e.to_string());
            w.write_record(&self.columns).map_err(io)?;
            for r in &self.rows {
                w.write_record(r.iter().map(Cell::csv)).map_err(io)?;
            }
            w.flush()?;
            files.push(name);
        }
        if format != "csv" {
            let rows: Vec<Value> = self
                .rows
                .iter()
                .map(|r| Value::Object(self.columns.iter().cloned().zip(r.iter().map(Cell::json)).collect()))
                .collect();
            let name = format!("{stem}.json");
            write_json(&dir.join(&name), &Value::Array(rows))?;
            files.push(name);
        }
        Ok(())
    }
}

fn write_json(path: &Path, v: &Value) -> CliResult<()> {
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, v).map_err(|e| CliError::validation(e.to_string()))?;
    std::io::Write::write_all(&mut f, b"\n")?;
    Ok(())
}

fn columns(cmd: CommandName, control: &str) -> Vec<String> {
    let cols: Vec<&str> = match cmd {
        CommandName::ClassicalGap | CommandName::Enumerate => vec!["n", control, "phase", "gap", "E0", "degeneracy"],
        CommandName::Mcmc => vec!["n", control, "e0", "e1", "gap", "converged", "chains", "sweeps", "beta", "seed"],
        CommandName::Lid => vec!["n", control, "k", "lid_mean", "lid_min", "lid_max", "n_sentinels"],
        CommandName::MapSOfH => vec!["n", "h", "s2", "s4", "s8", "s_eff"],
        CommandName::Ed => vec!["n", control, "B", "e0", "gap", "half_cut_entropy", "xi"],
        _ => vec![],
    };
    cols.into_iter().map(String::from).collect()
}

/// Evaluates one point; the flag reports a soft failure (MCMC not converged).
fn point_row(cmd: CommandName, cfg: &Config, seed: u64) -> CliResult<(Vec<Cell>, bool)> {
    let n = cfg.usize("model.n")?;
    let x = control(cfg)?;
    let row = match cmd {
        CommandName::ClassicalGap => {
            let p = analytic_gap(n, x, cfg.f64("model.j")?)?;
            vec![Cell::Int(n as u64), Cell::Float(x), Cell::Text(p.phase.as_str().into()), Cell::Float(p.gap), Cell::Float(p.ground_energy), Cell::Empty]
        }
        CommandName::Enumerate => {
            let g = build_graph(cfg)?;
            let opts = SpectrumOptions { max_levels: cfg.opt_usize("enumerate.max_levels"), dedup_tol: None };
            let spec = enumerate_spectrum(&g, opts)?;
            let phase = if model_kind(cfg)? == ModelKind::Pwr2 && n >= 8 && cfg.f64("model.j")? > 0.0 && sign(cfg)? == SignConvention::AfmFavoring {
                Cell::Text(analytic_gap(n, x, cfg.f64("model.j")?)?.phase.as_str().into())
            } else {
                Cell::Empty
            };
            vec![
                Cell::Int(n as u64),
                Cell::Float(x),
                phase,
                spec.gap().map(Cell::Float).unwrap_or(Cell::Empty),
                Cell::Float(spec.ground_energy()),
                Cell::Int(spec.ground_degeneracy()),
            ]
        }
        CommandName::Mcmc => {
            let plan = mcmc_plan(cfg, seed)?;
            let est = estimate_low_spectrum(&build_graph(cfg)?, &plan)?;
            let row = vec![
                Cell::Int(n as u64),
                Cell::Float(x),
                Cell::Float(est.e0),
                Cell::Float(est.e1),
                Cell::Float(est.gap),
                Cell::Bool(est.converged),
                Cell::Int(plan.chains as u64),
                Cell::Int(plan.sweeps as u64),
                Cell::Float(plan.beta),
                Cell::Int(seed),
            ];
            return Ok((row, !est.converged));
        }
        CommandName::Lid => {
            let mut opts = LidOptions { k: cfg.opt_usize("lid.k"), ..LidOptions::default() };
            opts.metric.exponent = cfg.f64("lid.exponent")?;
            let r = mean_lid_with(&build_graph(cfg)?, &opts)?;
            vec![
                Cell::Int(n as u64),
                Cell::Float(x),
                Cell::Int(r.k as u64),
                Cell::Float(r.mean),
                Cell::Float(r.min()),
                Cell::Float(r.max()),
                Cell::Int(r.n_sentinels as u64),
            ]
        }
        CommandName::MapSOfH => {
            let m = s_of_h(n, x)?;
            let s = |k| m.s_at(k).map(Cell::Float).unwrap_or(Cell::Empty);
            vec![Cell::Int(n as u64), Cell::Float(x), s(2), s(4), s(8), Cell::Float(m.s_eff)]
        }
        CommandName::Ed => {
            let r = ed_point(cfg)?;
            vec![
                Cell::Int(n as u64),
                Cell::Float(x),
                Cell::Float(r.b_field),
                Cell::Float(r.energies[0]),
                Cell::Float(r.gap),
                Cell::Float(r.entropy_profile[n / 2 - 1]),
                Cell::Float(r.xi),
            ]
        }
        other => return Err(CliError::validation(format!("{} has no per-point table", other.as_str()))),
    };
    Ok((row, false))
}

struct EdPoint {
    b_field: f64,
    energies: Vec<f64>,
    gap: f64,
    entropy_profile: Vec<f64>,
    momenta: Vec<f64>,
    s_q: Vec<f64>,
    xi: f64,
    xi_flag: String,
}

fn ed_point(cfg: &Config) -> CliResult<EdPoint> {
    let b_field = cfg.f64("model.b_field")?;
    let spec = HamiltonianSpec::new(build_graph(cfg)?, b_field).with_detuning(cfg.f64("model.detuning")?);
    let opts = lanczos(cfg)?;
    let levels = cfg.usize("ed.levels")?.max(1);
    let energies = lowest_eigenpairs(&build_hamiltonian(&spec)?, levels, &opts)?.energies;
    let gap = lowest_gap(&spec, &opts)?;
    let (_, psi) = ground_state(&spec, &opts)?;
    let ordering = match cfg.str("ed.ordering") {
        "euclidean" => SiteOrdering::Euclidean,
        "monna" => SiteOrdering::Monna,
        other => return Err(CliError::validation(format!("ed.ordering {other:?} is not euclidean or monna"))),
    };
    let entropy_profile = entropy_profile(&psi, ordering)?;
    let corr = correlations(&psi)?;
    let momenta = momentum_grid(spec.graph.n_sites());
    let s_q = momenta.iter().map(|&q| connected_structure_factor(&corr, q)).collect::<crate::Result<Vec<_>>>()?;
    let xi = second_moment_xi(&corr, std::f64::consts::PI)?;
    Ok(EdPoint { b_field, energies, gap, entropy_profile, momenta, s_q, xi: xi.xi, xi_flag: format!("{:?}", xi.flag) })
}

fn with_control(cfg: &Config, key: &str, v: f64) -> Config {
    let mut c = cfg.clone();
    c.values.insert(format!("model.{key}"), json!(v));
    c
}

/// Grid of the control parameter, or the single configured value.
fn control_grid(cfg: &Config) -> CliResult<Vec<f64>> {
    let key = model_kind(cfg)?.control_key();
    let g = cfg.floats(&format!("grid.{key}"));
    if !g.is_empty() {
        return Ok(g);
    }
    Ok(vec![cfg.f64(&format!("model.{key}")).map_err(|_| CliError::validation(format!("set model.{key} or grid.{key}")))?])
}

struct RunOutput {
    files: Vec<String>,
    warnings: usize,
}

fn run_table_command(cmd: CommandName, cfg: &Config, dir: &Path) -> CliResult<RunOutput> {
    let key = model_kind(cfg)?.control_key();
    let grid = control_grid(cfg)?;
    let rows = grid
        .par_iter()
        .map(|&x| point_row(cmd, &with_control(cfg, key, x), cfg.seed()))
        .collect::<CliResult<Vec<_>>>()?;
    let warnings = rows.iter().filter(|r| r.1).count();
    let table = Table { columns: columns(cmd, key), rows: rows.into_iter().map(|r| r.0).collect() };
    let mut files = Vec::new();
    table.write(dir, cmd.as_str(), cfg.str("output.format"), &mut files)?;
    Ok(RunOutput { files, warnings })
}

fn run_ed(cfg: &Config, dir: &Path) -> CliResult<RunOutput> {
    if !cfg.floats("grid.s").is_empty() || !cfg.floats("grid.h").is_empty() {
        return Err(CliError::validation("ed evaluates one point; use sweep for grids"));
    }
    let n = cfg.usize("model.n")?;
    let kind = model_kind(cfg)?;
    let x = control(cfg)?;
    let r = ed_point(cfg)?;
    let mut files = Vec::new();
    let format = cfg.str("output.format");
    let mut record = Map::new();
    record.insert("n".into(), json!(n));
    record.insert(kind.control_key().into(), json!(x));
    record.insert("B".into(), json!(r.b_field));
    record.insert("energies".into(), json!(r.energies));
    record.insert("gap".into(), json!(r.gap));
    record.insert("entropy_profile".into(), json!(r.entropy_profile));
    record.insert("S_q".into(), json!(r.s_q));
    record.insert("xi".into(), if r.xi.is_finite() { json!(r.xi) } else { json!(fmt_f64(r.xi)) });
    record.insert("xi_flag".into(), json!(r.xi_flag));
    write_json(&dir.join("ed.json"), &Value::Object(record))?;
    files.push("ed.json".to_string());
    let energies = Table {
        columns: vec!["level".into(), "energy".into()],
        rows: r.energies.iter().enumerate().map(|(i, e)| vec![Cell::Int(i as u64), Cell::Float(*e)]).collect(),
    };
    let entropy = Table {
        columns: vec!["l".into(), "entropy".into()],
        rows: r.entropy_profile.iter().enumerate().map(|(i, e)| vec![Cell::Int(i as u64 + 1), Cell::Float(*e)]).collect(),
    };
    let sq = Table {
        columns: vec!["q".into(), "s_q".into()],
        rows: r.momenta.iter().zip(&r.s_q).map(|(q, s)| vec![Cell::Float(*q), Cell::Float(*s)]).collect(),
    };
    if format != "json" {
        energies.write(dir, "ed_energies", "csv", &mut files)?;
        entropy.write(dir, "ed_entropy", "csv", &mut files)?;
        sq.write(dir, "ed_structure_factor", "csv", &mut files)?;
    }
    Ok(RunOutput { files, warnings: 0 })
}

fn run_positions(cfg: &Config, dir: &Path) -> CliResult<RunOutput> {
    let n = cfg.usize("model.n")?;
    let h = cfg.opt_f64("model.h").unwrap_or(0.0);
    let pos = tambourine_positions(n, h)?;
    let species = if cfg.bool("model.dual_species") { Some(species_pattern(n)?) } else { None };
    let table = Table {
        columns: ["i", "x", "y", "z", "species"].iter().map(|s| s.to_string()).collect(),
        rows: pos
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let sp = species.as_ref().map(|s| s.pattern[i]).unwrap_or(Species::A);
                vec![Cell::Int(i as u64), Cell::Float(p[0]), Cell::Float(p[1]), Cell::Float(p[2]), Cell::Text(sp.as_str().into())]
            })
            .collect(),
    };
    let mut files = Vec::new();
    table.write(dir, "positions", cfg.str("output.format"), &mut files)?;
    Ok(RunOutput { files, warnings: 0 })
}

fn run_fss(cfg: &Config, dir: &Path) -> CliResult<RunOutput> {
    let mut files = Vec::new();
    let paths = cfg.strs("fss.curves");
    let mut curves: Vec<PhiCurve> = if !paths.is_empty() {
        paths.iter().map(|p| PhiCurve::load(Path::new(p))).collect::<crate::Result<_>>()?
    } else {
        let (family, axis) = match model_kind(cfg)? {
            ModelKind::Pwr2 => (ModelFamily::Pwr2S { b_field: cfg.f64("model.b_field")?, j: cfg.f64("model.j")? }, "grid.s"),
            ModelKind::Ring => (
                ModelFamily::RingField { distances: cfg.usizes("model.distances"), s: cfg.f64("model.s")?, j: cfg.f64("model.j")? },
                "grid.b_field",
            ),
            ModelKind::Tambourine => {
                (ModelFamily::TambourineH { b_field: cfg.f64("model.b_field")?, dual: cfg.bool("model.dual_species") }, "grid.h")
            }
        };
        let grid = cfg.floats(axis);
        if grid.len() < 2 {
            return Err(CliError::validation(format!("{axis} needs at least two points to build curves")));
        }
        let opts = lanczos(cfg)?;
        let mut out = Vec::new();
        for n in cfg.usizes("fss.sizes") {
            if n > 16 {
                return Err(CliError::validation(format!("curves are generated for n <= 16 only (got {n}); supply fss.curves")));
            }
            let c = phi_curve(&family, n, &grid, &opts)?;
            let name = format!("curve_n{n}.csv");
            c.save(&dir.join(&name))?;
            files.push(name);
            files.push(format!("curve_n{n}.json"));
            out.push(c);
        }
        out
    };
    curves.sort_by_key(|c| c.n);
    let opts = FssOptions { x_win: cfg.f64("fss.x_win")?, nu_guess: cfg.f64("fss.nu_guess")?, z_floor: cfg.f64("fss.z_floor")? };
    let pairs: Vec<_> = curves
        .windows(2)
        .filter(|w| w[1].n == 2 * w[0].n)
        .map(|w| pairwise_scaling(&w[0], &w[1], None, &opts))
        .collect::<crate::Result<_>>()?;
    if pairs.is_empty() {
        return Err(CliError::validation("need at least one pair of curves with sizes n and 2n"));
    }
    let mut report = Map::new();
    report.insert("pairs".into(), serde_json::to_value(&pairs).expect("serializable"));
    let which = match cfg.str("fss.extrapolate") {
        "none" => None,
        "nu" => Some(Exponent::Nu),
        "z" => Some(Exponent::Z),
        other => return Err(CliError::validation(format!("fss.extrapolate {other:?} is not none, nu or z"))),
    };
    if let Some(w) = which {
        let r = if pairs.len() >= 4 { leave_one_out_systematics(&pairs, w)? } else { extrapolate_exponent(&pairs, w)? };
        report.insert("extrapolation".into(), serde_json::to_value(&r).expect("serializable"));
    }
    write_json(&dir.join("fss.json"), &Value::Object(report))?;
    files.push("fss.json".into());
    Ok(RunOutput { files, warnings: 0 })
}

const SWEEP_AXES: [&str; 4] = ["s", "h", "b_field", "n"];

/// Row-major product of the sweep axes.
fn sweep_points(cfg: &Config) -> CliResult<(Vec<String>, Vec<Vec<f64>>)> {
    let axes = cfg.strs("sweep.axes");
    if axes.is_empty() || axes.len() > 2 {
        return Err(CliError::validation("sweep.axes takes one or two of s, h, b_field, n"));
    }
    let mut grids = Vec::new();
    for a in &axes {
        if !SWEEP_AXES.contains(&a.as_str()) {
            return Err(CliError::validation(format!("sweep axis {a:?} is not one of s, h, b_field, n")));
        }
        let g: Vec<f64> = if a == "n" {
            cfg.usizes("grid.n").iter().map(|&v| v as f64).collect()
        } else {
            cfg.floats(&format!("grid.{a}"))
        };
        if g.is_empty() {
            return Err(CliError::validation(format!("grid.{a} is empty")));
        }
        grids.push(g);
    }
    let mut points = vec![Vec::new()];
    for g in &grids {
        points = points.iter().flat_map(|p| g.iter().map(move |v| [p.clone(), vec![*v]].concat())).collect();
    }
    let cap = cfg.usize("sweep.max_points")?;
    if points.len() > cap {
        return Err(CliError::validation(format!("sweep has {} points, above sweep.max_points = {cap}", points.len())));
    }
    Ok((axes, points))
}

fn run_sweep(cfg: &Config, dir: &Path) -> CliResult<RunOutput> {
    let inner = CommandName::parse(cfg.str("sweep.command"))?;
    if !matches!(
        inner,
        CommandName::ClassicalGap | CommandName::Enumerate | CommandName::Mcmc | CommandName::Lid | CommandName::Ed | CommandName::MapSOfH
    ) {
        return Err(CliError::validation(format!("{} cannot be swept", inner.as_str())));
    }
    let (axes, points) = sweep_points(cfg)?;
    let control_key = model_kind(cfg)?.control_key();
    let threads = cfg.usize("sweep.max_parallel")?;
    if threads == 0 {
        return Err(CliError::validation("sweep.max_parallel must be positive"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::validation(e.to_string()))?;
    let master = cfg.seed();
    let evaluate = |index: usize, p: &Vec<f64>| -> (CliResult<(Vec<Cell>, bool)>, u64) {
        let seed = chain_seed(master, index as u64);
        let mut c = cfg.clone();
        for key in ["grid.s", "grid.h", "grid.b_field", "grid.n"] {
            c.values.insert(key.into(), Value::Null);
        }
        for (a, v) in axes.iter().zip(p) {
            let v = if a == "n" { json!(*v as u64) } else { json!(v) };
            c.values.insert(format!("model.{a}"), v);
        }
        c.values.insert("seed".into(), json!(seed));
        let r = validate(inner, &c).and_then(|_| point_row(inner, &c, seed));
        (r, seed)
    };
    let results: Vec<_> = pool.install(|| points.par_iter().enumerate().map(|(i, p)| evaluate(i, p)).collect());

    let inner_cols = columns(inner, control_key);
    let mut cols: Vec<String> = vec!["index".into()];
    cols.extend(axes.iter().cloned());
    cols.extend(["point_seed", "status", "error_code", "message"].iter().map(|s| s.to_string()));
    cols.extend(inner_cols.iter().cloned());
    let mut warnings = 0;
    let rows = results
        .into_iter()
        .zip(&points)
        .enumerate()
        .map(|(i, ((r, seed), p))| {
            let mut row = vec![Cell::Int(i as u64)];
            row.extend(axes.iter().zip(p).map(|(a, v)| if a == "n" { Cell::Int(*v as u64) } else { Cell::Float(*v) }));
            row.push(Cell::Int(seed));
            match r {
                Ok((vals, false)) => {
                    row.extend([Cell::Text("ok".into()), Cell::Empty, Cell::Empty]);
                    row.extend(vals);
                }
                Ok((vals, true)) => {
                    warnings += 1;
                    row.extend([Cell::Text("error".into()), Cell::Int(EXIT_NUMERICAL as u64), Cell::Text("not converged".into())]);
                    row.extend(vals);
                }
                Err(e) => {
                    warnings += 1;
                    row.extend([Cell::Text("error".into()), Cell::Int(e.code as u64), Cell::Text(e.message)]);
                    row.extend(inner_cols.iter().map(|_| Cell::Empty));
                }
            }
            row
        })
        .collect();
    let mut files = Vec::new();
    Table { columns: cols, rows }.write(dir, "sweep", cfg.str("output.format"), &mut files)?;
    Ok(RunOutput { files, warnings })
}

fn prepare_dir(cfg: &Config) -> CliResult<PathBuf> {
    let dir = PathBuf::from(cfg.str("output.dir"));
    if dir.exists() {
        let occupied = fs::read_dir(&dir)?.next().is_some();
        if occupied && !cfg.bool("output.force") {
            return Err(CliError::validation(format!(
                "output directory {} is not empty; pass --force to overwrite",
                dir.display()
            )));
        }
    }
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

/// Runs a resolved configuration and writes outputs plus `manifest.json`.
pub fn execute(cmd: CommandName, cfg: &Config) -> CliResult<Vec<String>> {
    validate(cmd, cfg)?;
    let dir = prepare_dir(cfg)?;
    let start = Instant::now();
    let out = match cmd {
        CommandName::ClassicalGap | CommandName::Enumerate | CommandName::Mcmc | CommandName::Lid | CommandName::MapSOfH => {
            run_table_command(cmd, cfg, &dir)?
        }
        CommandName::Ed => run_ed(cfg, &dir)?,
        CommandName::Fss => run_fss(cfg, &dir)?,
        CommandName::Positions => run_positions(cfg, &dir)?,
        CommandName::Sweep => run_sweep(cfg, &dir)?,
    };
    if out.warnings > 0 {
        eprintln!("warning: {} point(s) failed or did not converge", out.warnings);
    }
    let manifest = json!({
        "schema_version": SCHEMA_VERSION,
        "command": cmd.as_str(),
        "config": cfg.as_json(),
        "seed": cfg.seed(),
        "version": env!("CARGO_PKG_VERSION"),
        "wall_time_s": start.elapsed().as_secs_f64(),
        "outputs": out.files,
        "warnings": out.warnings,
    });
    write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(out.files)
}

#[derive(Parser, Debug)]
#[command(name = "pwr2lab", version, about = "PWR2 Ising chains, tambourine geometries and finite-size scaling")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Closed-form phase label and gap over an s grid.
    ClassicalGap(Opts),
    /// Exhaustive classical spectrum.
    Enumerate(Opts),
    /// Metropolis estimate of the two lowest levels.
    Mcmc(Opts),
    /// Mean local intrinsic dimensionality of the coupling metric.
    Lid(Opts),
    /// Exact diagonalization at one point.
    Ed(Opts),
    /// Crossing, nu, z and extrapolation from Phi curves.
    Fss(Opts),
    /// Effective exponent of the tambourine geometry.
    MapSOfH(Opts),
    /// Atom coordinates of the tambourine array.
    Positions(Opts),
    /// Grid sweep of another command.
    Sweep(Opts),
}

#[derive(clap::Args, Debug, Default)]
struct Opts {
    /// TOML or JSON config file (a manifest.json is accepted).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Any config key, as KEY=VALUE.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long = "out")]
    out: Option<String>,
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    force: bool,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    kind: Option<String>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    s: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    h: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    j: Option<String>,
    #[arg(long = "b-field", alias = "b")]
    b_field: Option<String>,
    #[arg(long)]
    sign: Option<String>,
    #[arg(long)]
    distances: Option<String>,
    #[arg(long)]
    dual: bool,
    #[arg(long = "s-grid", allow_hyphen_values = true)]
    s_grid: Option<String>,
    #[arg(long = "h-grid")]
    h_grid: Option<String>,
    #[arg(long = "b-grid")]
    b_grid: Option<String>,
    #[arg(long = "n-grid")]
    n_grid: Option<String>,
    #[arg(long)]
    beta: Option<String>,
    #[arg(long)]
    sweeps: Option<String>,
    #[arg(long)]
    chains: Option<String>,
    #[arg(long = "burn-in")]
    burn_in: Option<String>,
    #[arg(long)]
    k: Option<String>,
    #[arg(long)]
    levels: Option<String>,
    #[arg(long)]
    ordering: Option<String>,
    /// Phi-curve CSV files.
    #[arg(long = "curve")]
    curves: Vec<String>,
    #[arg(long)]
    sizes: Option<String>,
    #[arg(long)]
    extrapolate: Option<String>,
    /// Command evaluated by `sweep`.
    #[arg(long)]
    inner: Option<String>,
    #[arg(long)]
    axes: Option<String>,
    #[arg(long = "max-parallel")]
    max_parallel: Option<String>,
}

impl Opts {
    fn apply(&self, cfg: &mut Config) -> CliResult<()> {
        let pairs: [(&str, &Option<String>); 26] = [
            ("output.dir", &self.out),
            ("output.format", &self.format),
            ("seed", &self.seed),
            ("model.kind", &self.kind),
            ("model.n", &self.n),
            ("model.s", &self.s),
            ("model.h", &self.h),
            ("model.j", &self.j),
            ("model.b_field", &self.b_field),
            ("model.sign", &self.sign),
            ("model.distances", &self.distances),
            ("grid.s", &self.s_grid),
            ("grid.h", &self.h_grid),
            ("grid.b_field", &self.b_grid),
            ("grid.n", &self.n_grid),
            ("mcmc.beta", &self.beta),
            ("mcmc.sweeps", &self.sweeps),
            ("mcmc.chains", &self.chains),
            ("mcmc.burn_in", &self.burn_in),
            ("lid.k", &self.k),
            ("ed.levels", &self.levels),
            ("ed.ordering", &self.ordering),
            ("fss.sizes", &self.sizes),
            ("fss.extrapolate", &self.extrapolate),
            ("sweep.command", &self.inner),
            ("sweep.axes", &self.axes),
        ];
        for (key, v) in pairs {
            if let Some(v) = v {
                cfg.set_str(key, v)?;
            }
        }
        if let Some(v) = &self.max_parallel {
            cfg.set_str("sweep.max_parallel", v)?;
        }
        if self.force {
            cfg.set("output.force", &json!(true))?;
        }
        if self.dual {
            cfg.set("model.dual_species", &json!(true))?;
        }
        if !self.curves.is_empty() {
            cfg.set("fss.curves", &json!(self.curves))?;
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| CliError::validation(format!("--set expects KEY=VALUE, got {kv:?}")))?;
            cfg.set_str(k.trim(), v)?;
        }
        Ok(())
    }
}

/// Builds the resolved configuration: defaults, then file, then flags.
fn resolve(cmd: CommandName, opts: &Opts) -> CliResult<Config> {
    let mut cfg = Config::defaults(cmd);
    if let Some(path) = &opts.config {
        cfg.merge_file(path)?;
    }
    opts.apply(&mut cfg)?;
    Ok(cfg)
}

fn threads_from_env() -> CliResult<Option<usize>> {
    match std::env::var("PWR2LAB_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(t) if t > 0 => Ok(Some(t)),
            _ => Err(CliError::validation(format!("PWR2LAB_THREADS={v:?} is not a positive integer"))),
        },
        Err(_) => Ok(None),
    }
}

/// Parses `argv` and runs the command; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    let (cmd, opts) = match &cli.command {
        Cmd::ClassicalGap(o) => (CommandName::ClassicalGap, o),
        Cmd::Enumerate(o) => (CommandName::Enumerate, o),
        Cmd::Mcmc(o) => (CommandName::Mcmc, o),
        Cmd::Lid(o) => (CommandName::Lid, o),
        Cmd::Ed(o) => (CommandName::Ed, o),
        Cmd::Fss(o) => (CommandName::Fss, o),
        Cmd::MapSOfH(o) => (CommandName::MapSOfH, o),
        Cmd::Positions(o) => (CommandName::Positions, o),
        Cmd::Sweep(o) => (CommandName::Sweep, o),
    };
    let result = threads_from_env().and_then(|threads| {
        let cfg = resolve(cmd, opts)?;
        match threads {
            Some(t) => rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| CliError::validation(e.to_string()))?
                .install(|| execute(cmd, &cfg)),
            None => execute(cmd, &cfg),
        }
    });
    match result {
        Ok(_) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_in(dir: &Path, args: &[&str]) -> i32 {
        let mut argv = vec!["pwr2lab".to_string()];
        argv.extend(args.iter().map(|s| s.to_string()));
        argv.push("--out".into());
        argv.push(dir.to_string_lossy().into_owned());
        run(argv)
    }

    #[test]
    fn grid_syntax() {
        assert_eq!(parse_grid("-6:6:0.25").unwrap().len(), 49);
        assert_eq!(parse_grid("0:1:0.1").unwrap().len(), 11);
        assert_eq!(parse_grid("1, 2,3").unwrap(), vec![1.0, 2.0, 3.0]);
        assert!(parse_grid("1:0:0.1").is_err());
    }

    #[test]
    fn classical_gap_grid_has_49_rows() {
        let tmp = tempfile::tempdir().unwrap();
        let out = tmp.path().join("cg");
        assert_eq!(run_in(&out, &["classical-gap", "--n", "16", "--s-grid", "-6:6:0.25"]), 0);
        let text = fs::read_to_string(out.join("classical-gap.csv")).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "n,s,phase,gap,E0,degeneracy");
        assert_eq!(lines.count(), 49);
        let manifest: Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
        assert_eq!(manifest["schema_version"], json!(SCHEMA_VERSION));
        assert_eq!(manifest["command"], json!("classical-gap"));
    }

    #[test]
    fn validation_exit_codes() {
        let tmp = tempfile::tempdir().unwrap();
        let d = |s: &str| tmp.path().join(s);
        assert_eq!(run_in(&d("a"), &["ed", "--n", "9", "--s", "1"]), EXIT_VALIDATION);
        assert_eq!(run_in(&d("b"), &["enumerate", "--set", "model.nope=3"]), EXIT_VALIDATION);
        assert_eq!(run_in(&d("c"), &["enumerate", "--n", "8", "--s", "1", "--h", "1"]), EXIT_VALIDATION);
        let e = resolve(CommandName::Ed, &Opts { n: Some("9".into()), s: Some("1".into()), ..Opts::default() })
            .and_then(|c| validate(CommandName::Ed, &c))
            .unwrap_err();
        assert!(e.message.contains("power of two"));
        let e = resolve(CommandName::Lid, &Opts { set: vec!["lid.bogus=1".into()], ..Opts::default() }).unwrap_err();
        assert!(e.message.contains("lid.bogus"));
    }

    #[test]
    fn output_collision_needs_force() {
        let tmp = tempfile::tempdir().unwrap();
        let out = tmp.path().join("o");
        let args = ["map-s-of-h", "--n", "16", "--h-grid", "0:1:0.5"];
        assert_eq!(run_in(&out, &args), 0);
        assert_eq!(run_in(&out, &args), EXIT_VALIDATION);
        let mut forced = args.to_vec();
        forced.push("--force");
        assert_eq!(run_in(&out, &forced), 0);
    }

    #[test]
    fn config_file_precedence() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("run.toml");
        fs::write(&path, "model.n = 8\nmodel.s = -3.0\n[mcmc]\nbeta = 20.0\n").unwrap();
        let opts = Opts { config: Some(path.clone()), n: Some("16".into()), ..Opts::default() };
        let cfg = resolve(CommandName::Mcmc, &opts).unwrap();
        assert_eq!(cfg.usize("model.n").unwrap(), 16);
        assert_eq!(cfg.f64("model.s").unwrap(), -3.0);
        assert_eq!(cfg.f64("mcmc.beta").unwrap(), 20.0);
        fs::write(&path, "model.nn = 8\n").unwrap();
        assert!(resolve(CommandName::Mcmc, &Opts { config: Some(path), ..Opts::default() }).unwrap_err().message.contains("model.nn"));
    }

    #[test]
    fn manifest_reproduces_run() {
        let tmp = tempfile::tempdir().unwrap();
        let a = tmp.path().join("a");
        assert_eq!(run_in(&a, &["enumerate", "--n", "8", "--s-grid", "-2:2:1"]), 0);
        let m = a.join("manifest.json");
        let b = tmp.path().join("b");
        assert_eq!(run_in(&b, &["enumerate", "--config", m.to_str().unwrap()]), 0);
        assert_eq!(fs::read(a.join("enumerate.csv")).unwrap(), fs::read(b.join("enumerate.csv")).unwrap());
    }

    #[test]
    fn sweep_is_row_major_and_parallel_invariant() {
        let tmp = tempfile::tempdir().unwrap();
        let mk = |p: &str, par: &str| {
            let out = tmp.path().join(p);
            let args = [
                "sweep", "--inner", "mcmc", "--axes", "s,b_field", "--s-grid", "-4:0:1", "--b-grid", "0.1,0.2,0.3",
                "--n", "8", "--sweeps", "200", "--chains", "4", "--seed", "7", "--max-parallel", par,
            ];
            assert_eq!(run_in(&out, &args), 0);
            fs::read_to_string(out.join("sweep.csv")).unwrap()
        };
        let one = mk("p1", "1");
        let eight = mk("p8", "8");
        assert_eq!(one, eight);
        let rows: Vec<&str> = one.lines().skip(1).collect();
        assert_eq!(rows.len(), 15);
        assert!(rows[1].starts_with("1,-4.0000000000000000e0,2.0000000000000001e-1,"));
        assert!(rows[3].starts_with("3,-3.0000000000000000e0,1.0000000000000001e-1,"));
    }

    #[test]
    fn sweep_records_failing_points() {
        let tmp = tempfile::tempdir().unwrap();
        let out = tmp.path().join("s");
        // n = 4 is below the closed-form minimum, so that point fails
        let args = ["sweep", "--inner", "classical-gap", "--axes", "n", "--n-grid", "4,8,16", "--s", "1"];
        assert_eq!(run_in(&out, &args), 0);
        let text = fs::read_to_string(out.join("sweep.csv")).unwrap();
        let rows: Vec<&str> = text.lines().skip(1).collect();
        assert_eq!(rows.len(), 3);
        assert!(rows[0].contains(",error,2,"));
        assert!(rows[1].contains(",ok,,"));
        assert!(rows[2].contains(",ok,,"));
    }

    #[test]
    fn positions_and_ed_outputs() {
        let tmp = tempfile::tempdir().unwrap();
        let p = tmp.path().join("pos");
        assert_eq!(run_in(&p, &["positions", "--n", "8", "--h", "1", "--dual"]), 0);
        let text = fs::read_to_string(p.join("positions.csv")).unwrap();
        assert_eq!(text.lines().next().unwrap(), "i,x,y,z,species");
        let species: Vec<&str> = text.lines().skip(1).map(|l| l.rsplit(',').next().unwrap()).collect();
        assert_eq!(species, ["a", "b", "b", "a", "b", "a", "a", "b"]);

        let e = tmp.path().join("ed");
        assert_eq!(run_in(&e, &["ed", "--n", "8", "--s", "-3", "--b-field", "0.5", "--format", "both"]), 0);
        let v: Value = serde_json::from_str(&fs::read_to_string(e.join("ed.json")).unwrap()).unwrap();
        assert_eq!(v["entropy_profile"].as_array().unwrap().len(), 7);
        assert_eq!(v["S_q"].as_array().unwrap().len(), 8);
        assert!(v["gap"].as_f64().unwrap() > 0.0);
        assert!(e.join("ed_entropy.csv").exists());
    }
}
