//! Experiment configuration: types, TOML parsing and rendering.
//!
//! Parsing collects every problem (missing key, unknown key, bad value,
//! violated invariant) with its key path before giving up, so a broken file
//! is reported in one pass. [`render`] writes every field, defaults
//! included, and `parse(render(c)) == c`.

use std::fmt;
use std::str::FromStr;

use toml::{Table, Value};

use crate::channel::ChannelGeometry;
use crate::detection::{DetectorConfig, DetectorKind, SprtTargets, DEFAULT_LOG_FLOOR};
use crate::error::{Error, Result};
use crate::estimation::DEFAULT_SILENT_SAMPLES;
use crate::modulation::{scheme_grid, SchemeDescriptor, SchemeKind, DEFAULT_ALPHA};

/// Smallest bit count any reported BER point may rest on.
pub const MIN_REPORTED_BITS: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseSpec {
    /// SNR in dB; the noise rate follows from `M` and the sampling grid.
    SnrDb(f64),
    /// Noise rate `λ_s` per sample.
    Rate(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Precoder {
    None,
    /// Transmitter-side ISI pre-compensation for on-off keying.
    Atract,
    /// Two-type A−B pre-equalization; `delay` in samples.
    Ab { delay: usize, scale: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OptParam {
    Gamma,
    Alpha,
    Derivative,
    Ab,
}

impl OptParam {
    pub const ALL: [OptParam; 4] = [OptParam::Gamma, OptParam::Alpha, OptParam::Derivative, OptParam::Ab];

    pub fn name(&self) -> &'static str {
        match self {
            OptParam::Gamma => "gamma",
            OptParam::Alpha => "alpha",
            OptParam::Derivative => "m",
            OptParam::Ab => "ab",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepVar {
    M,
    Tau,
    SnrDb,
    Tb,
}

impl SweepVar {
    pub const ALL: [SweepVar; 4] = [SweepVar::M, SweepVar::Tau, SweepVar::SnrDb, SweepVar::Tb];

    pub fn name(&self) -> &'static str {
        match self {
            SweepVar::M => "m",
            SweepVar::Tau => "tau",
            SweepVar::SnrDb => "snr_db",
            SweepVar::Tb => "t_b",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArrivalModel {
    Poisson,
    Gaussian,
}

impl ArrivalModel {
    pub fn name(&self) -> &'static str {
        match self {
            ArrivalModel::Poisson => "poisson",
            ArrivalModel::Gaussian => "gaussian",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsiMode {
    /// Receiver knows the synchronized taps and noise rate exactly.
    Oracle,
    /// Receiver estimates them from a pilot block preceded by a silent prefix.
    Estimated,
}

impl CsiMode {
    pub fn name(&self) -> &'static str {
        match self {
            CsiMode::Oracle => "oracle",
            CsiMode::Estimated => "estimated",
        }
    }
}

macro_rules! named_from_str {
    ($ty:ty, $what:literal) => {
        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                Self::ALL
                    .iter()
                    .copied()
                    .find(|v| v.name() == s)
                    .ok_or_else(|| Error::Usage(format!("unknown {} '{s}'", $what)))
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }
    };
}

impl ArrivalModel {
    const ALL: [ArrivalModel; 2] = [ArrivalModel::Poisson, ArrivalModel::Gaussian];
}

impl CsiMode {
    const ALL: [CsiMode; 2] = [CsiMode::Oracle, CsiMode::Estimated];
}

named_from_str!(OptParam, "parameter");
named_from_str!(SweepVar, "sweep variable");
named_from_str!(ArrivalModel, "arrival model");
named_from_str!(CsiMode, "csi mode");

/// One transmitter/receiver pairing evaluated at every sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkSpec {
    pub label: String,
    pub scheme: SchemeDescriptor,
    pub detector: DetectorConfig,
    pub precoder: Precoder,
    /// Cross-antenna leakage fraction for MSSK.
    pub leakage: f64,
    pub optimize: Vec<OptParam>,
}

impl LinkSpec {
    pub fn new(label: &str, scheme: SchemeDescriptor, detector: DetectorConfig) -> Self {
        Self {
            label: label.to_string(),
            scheme,
            detector,
            precoder: Precoder::None,
            leakage: 0.0,
            optimize: Vec::new(),
        }
    }

    pub fn optimizing(mut self, params: &[OptParam]) -> Self {
        self.optimize = params.to_vec();
        self
    }

    pub fn with_precoder(mut self, precoder: Precoder) -> Self {
        self.precoder = precoder;
        self
    }

    pub fn optimizes(&self, p: OptParam) -> bool {
        self.optimize.contains(&p)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub var: SweepVar,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimSettings {
    /// Symbols per independent block (`S`).
    pub block_symbols: usize,
    pub seed: u64,
    /// A point stops once it has this many errors and at least `min_bits`.
    pub target_errors: u64,
    pub min_bits: u64,
    /// Hard cap on simulated bits per point.
    pub max_bits: u64,
    /// Blocks simulated between stopping checks.
    pub chunk_blocks: usize,
    pub arrivals: ArrivalModel,
    pub csi: CsiMode,
    pub pilot_symbols: usize,
    pub silent_samples: usize,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            block_symbols: 1000,
            seed: 1,
            target_errors: 100,
            min_bits: 100_000,
            max_bits: 2_000_000,
            chunk_blocks: 16,
            arrivals: ArrivalModel::Poisson,
            csi: CsiMode::Oracle,
            pilot_symbols: 0,
            silent_samples: DEFAULT_SILENT_SAMPLES,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerSettings {
    pub grid_points: usize,
    pub refine_rounds: usize,
    pub refine_points: usize,
    /// Bits simulated (on a separate seed) to evaluate each candidate.
    pub training_bits: u64,
    pub max_derivative: usize,
    pub alpha_grid: Vec<f64>,
    pub ab_max_delay: usize,
    pub ab_scales: Vec<f64>,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            grid_points: 41,
            refine_rounds: 3,
            refine_points: 11,
            training_bits: 100_000,
            max_derivative: 4,
            alpha_grid: vec![0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95],
            ab_max_delay: 10,
            ab_scales: vec![0.2, 0.4, 0.6, 0.8, 1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub geometry: ChannelGeometry,
    pub t_b: f64,
    /// Samples per slot (`N`); PPM-type symbols have `K` slots.
    pub samples_per_slot: usize,
    /// Channel memory `L` in symbols.
    pub memory: usize,
    pub tau: f64,
    /// Molecules per bit (`M`).
    pub m: f64,
    pub noise: NoiseSpec,
    pub sim: SimSettings,
    pub optimizer: OptimizerSettings,
    pub sweep: Sweep,
    pub links: Vec<LinkSpec>,
}

impl ExperimentConfig {
    /// Copy with the sweep variable set to `value`.
    pub fn at(&self, var: SweepVar, value: f64) -> Self {
        let mut c = self.clone();
        match var {
            SweepVar::M => c.m = value,
            SweepVar::Tau => c.tau = value,
            SweepVar::SnrDb => c.noise = NoiseSpec::SnrDb(value),
            SweepVar::Tb => c.t_b = value,
        }
        c
    }

    /// Current value of `var`; `NaN` for an SNR when the noise is given as a rate.
    pub fn value_of(&self, var: SweepVar) -> f64 {
        match var {
            SweepVar::M => self.m,
            SweepVar::Tau => self.tau,
            SweepVar::SnrDb => match self.noise {
                NoiseSpec::SnrDb(s) => s,
                NoiseSpec::Rate(_) => f64::NAN,
            },
            SweepVar::Tb => self.t_b,
        }
    }

    /// Checks every invariant, reporting all violations at once.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        self.collect_violations(&mut errs);
        finish(errs)
    }

    fn collect_violations(&self, errs: &mut Vec<(String, String)>) {
        let mut push = |k: &str, m: String| errs.push((k.to_string(), m));
        if let Err(e) = self.geometry.validate() {
            push("channel", e.to_string());
        }
        if !(self.t_b > 0.0 && self.t_b.is_finite()) {
            push("grid.t_b", format!("must be positive (got {})", self.t_b));
        }
        if self.samples_per_slot == 0 {
            push("grid.samples_per_slot", "must be at least 1".into());
        }
        if self.memory == 0 {
            push("grid.memory", "must be at least 1".into());
        }
        if !self.tau.is_finite() {
            push("grid.tau", "must be finite".into());
        }
        if !(self.m > 0.0 && self.m.is_finite()) {
            push("power.m", format!("must be positive (got {})", self.m));
        }
        match self.noise {
            NoiseSpec::SnrDb(s) if !s.is_finite() => push("power.snr_db", "must be finite".into()),
            NoiseSpec::Rate(l) if !(l >= 0.0 && l.is_finite()) => {
                push("power.lambda_s", format!("must be >= 0 (got {l})"))
            }
            _ => {}
        }
        let s = &self.sim;
        if s.block_symbols == 0 {
            push("harness.block_symbols", "must be at least 1".into());
        }
        if s.min_bits < MIN_REPORTED_BITS {
            push(
                "harness.min_bits",
                format!("must be at least {MIN_REPORTED_BITS} (got {})", s.min_bits),
            );
        }
        if s.max_bits < s.min_bits {
            push("harness.max_bits", "must be at least min_bits".into());
        }
        if s.chunk_blocks == 0 {
            push("harness.chunk_blocks", "must be at least 1".into());
        }
        if s.seed > i64::MAX as u64 {
            push("harness.seed", "must be below 2^63".into());
        }
        if s.csi == CsiMode::Estimated && s.silent_samples == 0 {
            push("harness.silent_samples", "must be at least 1 for estimated CSI".into());
        }
        let o = &self.optimizer;
        if o.grid_points < 2 {
            push("optimizer.grid_points", "must be at least 2".into());
        }
        if o.refine_points < 3 {
            push("optimizer.refine_points", "must be at least 3".into());
        }
        if o.training_bits == 0 {
            push("optimizer.training_bits", "must be positive".into());
        }
        if o.alpha_grid.is_empty() || o.alpha_grid.iter().any(|a| !(*a > 0.5 && *a < 1.0)) {
            push("optimizer.alpha_grid", "needs values with alpha ∈ (0.5, 1)".into());
        }
        if o.ab_max_delay == 0 {
            push("optimizer.ab_max_delay", "must be at least 1".into());
        }
        if o.ab_scales.is_empty() || o.ab_scales.iter().any(|v| !(*v >= 0.0)) {
            push("optimizer.ab_scales", "needs nonnegative values".into());
        }
        if self.sweep.values.is_empty() {
            push("sweep.values", "must not be empty".into());
        }
        for v in &self.sweep.values {
            let bad = match self.sweep.var {
                SweepVar::M | SweepVar::Tb => !(*v > 0.0 && v.is_finite()),
                _ => !v.is_finite(),
            };
            if bad {
                push("sweep.values", format!("invalid {} value {v}", self.sweep.var));
            }
        }
        if self.links.is_empty() {
            push("link", "at least one [[link]] is required".into());
        }
        let mut labels: Vec<&str> = self.links.iter().map(|l| l.label.as_str()).collect();
        labels.sort_unstable();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            push("link.label", "labels must be unique".into());
        }
        for (i, link) in self.links.iter().enumerate() {
            self.link_violations(i, link, errs);
        }
    }

    fn link_violations(&self, i: usize, link: &LinkSpec, errs: &mut Vec<(String, String)>) {
        let key = |k: &str| format!("link[{i}].{k}");
        let mut push = |k: String, m: String| errs.push((k, m));
        if link.label.is_empty() {
            push(key("label"), "must not be empty".into());
        }
        let scheme = &link.scheme;
        if let Err(e) = scheme.validate() {
            let msg = match e {
                Error::Config { msg, .. } => msg,
                e => e.to_string(),
            };
            push(key(scheme_key(scheme)), msg);
            return;
        }
        let kind = link.detector.kind;
        let binary = scheme.kind == SchemeKind::Bcsk;
        let ok = match scheme.kind {
            SchemeKind::Bcsk => !matches!(kind, DetectorKind::Mcd | DetectorKind::Mcpm2Stage),
            SchemeKind::Mcpm => kind == DetectorKind::Mcpm2Stage,
            SchemeKind::Dmosk | SchemeKind::Mcsk => kind == DetectorKind::Ftd,
            _ => kind == DetectorKind::Mcd,
        };
        if !ok {
            push(key("detector"), format!("{kind} cannot demodulate {}", scheme.kind));
        }
        if let Ok(grid) = scheme_grid(scheme, self.t_b.max(f64::MIN_POSITIVE), self.samples_per_slot.max(1), self.memory.max(1), 0.0) {
            if let Err(Error::Config { key: k, msg }) =
                link.detector.validate(grid.samples_per_symbol, self.memory)
            {
                let field = k.strip_prefix("detector.").unwrap_or(&k).to_string();
                push(key(&field), msg);
            }
        }
        if link.precoder != Precoder::None {
            if !binary {
                push(key("precoder"), "precoding needs bcsk".into());
            }
            if kind.needs_csi() {
                push(key("precoder"), format!("{kind} cannot run behind a precoder"));
            }
        }
        if let Precoder::Ab { delay, scale } = link.precoder {
            if delay == 0 {
                push(key("ab_delay"), "must be at least 1 sample".into());
            }
            if !(scale >= 0.0 && scale.is_finite()) {
                push(key("ab_scale"), "must be >= 0".into());
            }
        }
        if !(link.leakage >= 0.0 && link.leakage < 1.0) {
            push(key("leakage"), "must be in [0, 1)".into());
        }
        if link.leakage > 0.0 && self.sim.arrivals == ArrivalModel::Gaussian {
            push(key("leakage"), "coupled links need poisson arrivals".into());
        }
        let outer = [OptParam::Alpha, OptParam::Derivative, OptParam::Ab]
            .iter()
            .filter(|p| link.optimizes(**p))
            .count();
        if outer > 1 {
            push(key("optimize"), "at most one of alpha, m, ab".into());
        }
        if link.optimizes(OptParam::Gamma) && !kind.uses_gamma() {
            push(key("optimize"), format!("{kind} has no threshold"));
        }
        if link.optimizes(OptParam::Alpha) && scheme.kind != SchemeKind::Mcpm {
            push(key("optimize"), "alpha applies to mcpm only".into());
        }
        if link.optimizes(OptParam::Derivative) && kind != DetectorKind::DmAds {
            push(key("optimize"), "m applies to dm-ads only".into());
        }
        if link.optimizes(OptParam::Ab) && !matches!(link.precoder, Precoder::Ab { .. }) {
            push(key("optimize"), "ab needs precoder = \"ab\"".into());
        }
        if self.sim.csi == CsiMode::Estimated && kind.needs_csi() {
            let p = self.pilot_symbols();
            if p < self.memory {
                push(
                    "harness.pilot_symbols".into(),
                    format!("pilot length P={p} must be at least L={}", self.memory),
                );
            }
        }
    }

    /// Pilot length used for estimated CSI (default `4·L`).
    pub fn pilot_symbols(&self) -> usize {
        if self.sim.pilot_symbols == 0 {
            4 * self.memory
        } else {
            self.sim.pilot_symbols
        }
    }
}

fn scheme_key(s: &SchemeDescriptor) -> &'static str {
    match s.kind {
        SchemeKind::Mcpm if !(s.alpha > 0.5 && s.alpha < 1.0) => "alpha",
        SchemeKind::Gmosk if s.order.is_power_of_two() => "active",
        SchemeKind::Maaf if s.order.is_power_of_two() => "info_bits",
        _ => "order",
    }
}

fn finish(errs: Vec<(String, String)>) -> Result<()> {
    match errs.len() {
        0 => Ok(()),
        1 => {
            let (key, msg) = errs.into_iter().next().unwrap_or_default();
            Err(Error::Config { key, msg })
        }
        n => Err(Error::Config {
            key: errs[0].0.clone(),
            msg: format!(
                "{n} problems: {}",
                errs.iter()
                    .map(|(k, m)| format!("{k}: {m}"))
                    .collect::<Vec<_>>()
                    .join("; ")
            ),
        }),
    }
}

/// Parse problems found so far, with key paths.
#[derive(Default)]
struct Issues(Vec<(String, String)>);

impl Issues {
    fn add(&mut self, key: impl Into<String>, msg: impl Into<String>) {
        self.0.push((key.into(), msg.into()));
    }
}

/// Typed access to one TOML table, recording missing and unknown keys.
struct Section<'a> {
    path: String,
    table: Option<&'a Table>,
    seen: Vec<&'static str>,
}

impl<'a> Section<'a> {
    fn new(path: &str, table: Option<&'a Table>) -> Self {
        Self {
            path: path.to_string(),
            table,
            seen: Vec::new(),
        }
    }

    fn key(&self, k: &str) -> String {
        if self.path.is_empty() {
            k.to_string()
        } else {
            format!("{}.{k}", self.path)
        }
    }

    fn raw(&mut self, k: &'static str) -> Option<&'a Value> {
        self.seen.push(k);
        self.table.and_then(|t| t.get(k))
    }

    fn has(&self, k: &str) -> bool {
        self.table.is_some_and(|t| t.contains_key(k))
    }

    fn f64_opt(&mut self, k: &'static str, is: &mut Issues) -> Option<f64> {
        match self.raw(k)? {
            Value::Float(f) => Some(*f),
            Value::Integer(i) => Some(*i as f64),
            _ => {
                is.add(self.key(k), "expected a number");
                None
            }
        }
    }

    fn f64_req(&mut self, k: &'static str, is: &mut Issues) -> Option<f64> {
        let v = self.f64_opt(k, is);
        if v.is_none() && !self.has(k) {
            is.add(self.key(k), "missing required key");
        }
        v
    }

    fn f64_or(&mut self, k: &'static str, default: f64, is: &mut Issues) -> f64 {
        self.f64_opt(k, is).unwrap_or(default)
    }

    fn u64_opt(&mut self, k: &'static str, is: &mut Issues) -> Option<u64> {
        match self.raw(k)? {
            Value::Integer(i) if *i >= 0 => Some(*i as u64),
            _ => {
                is.add(self.key(k), "expected a nonnegative integer");
                None
            }
        }
    }

    fn usize_req(&mut self, k: &'static str, is: &mut Issues) -> Option<usize> {
        let v = self.u64_opt(k, is);
        if v.is_none() && !self.has(k) {
            is.add(self.key(k), "missing required key");
        }
        v.map(|v| v as usize)
    }

    fn usize_or(&mut self, k: &'static str, default: usize, is: &mut Issues) -> usize {
        self.u64_opt(k, is).map(|v| v as usize).unwrap_or(default)
    }

    fn u64_or(&mut self, k: &'static str, default: u64, is: &mut Issues) -> u64 {
        self.u64_opt(k, is).unwrap_or(default)
    }

    fn str_opt(&mut self, k: &'static str, is: &mut Issues) -> Option<&'a str> {
        match self.raw(k)? {
            Value::String(s) => Some(s.as_str()),
            _ => {
                is.add(self.key(k), "expected a string");
                None
            }
        }
    }

    fn str_req(&mut self, k: &'static str, is: &mut Issues) -> Option<&'a str> {
        let v = self.str_opt(k, is);
        if v.is_none() && !self.has(k) {
            is.add(self.key(k), "missing required key");
        }
        v
    }

    fn parsed<T: FromStr<Err = Error>>(&mut self, k: &'static str, req: bool, is: &mut Issues) -> Option<T> {
        let s = if req { self.str_req(k, is) } else { self.str_opt(k, is) }?;
        match s.parse() {
            Ok(v) => Some(v),
            Err(e) => {
                let msg = match e {
                    Error::Usage(m) | Error::Config { msg: m, .. } => m,
                    e => e.to_string(),
                };
                is.add(self.key(k), msg);
                None
            }
        }
    }

    fn f64_list(&mut self, k: &'static str, req: bool, is: &mut Issues) -> Option<Vec<f64>> {
        let Some(v) = self.raw(k) else {
            if req {
                is.add(self.key(k), "missing required key");
            }
            return None;
        };
        let out: Option<Vec<f64>> = v.as_array().and_then(|a| {
            a.iter()
                .map(|x| x.as_float().or_else(|| x.as_integer().map(|i| i as f64)))
                .collect()
        });
        if out.is_none() {
            is.add(self.key(k), "expected an array of numbers");
        }
        out
    }

    fn str_list(&mut self, k: &'static str, is: &mut Issues) -> Option<Vec<&'a str>> {
        let v = self.raw(k)?;
        let out: Option<Vec<&str>> = v
            .as_array()
            .and_then(|a| a.iter().map(|x| x.as_str()).collect());
        if out.is_none() {
            is.add(self.key(k), "expected an array of strings");
        }
        out
    }

    fn finish(self, is: &mut Issues) {
        if let Some(t) = self.table {
            for k in t.keys() {
                if !self.seen.contains(&k.as_str()) {
                    is.add(self.key(k), "unknown key");
                }
            }
        }
    }
}

const SECTIONS: [&str; 7] = ["channel", "grid", "power", "harness", "optimizer", "sweep", "link"];

fn sub<'a>(root: &'a Table, name: &str, is: &mut Issues, required: bool) -> Option<&'a Table> {
    match root.get(name) {
        Some(Value::Table(t)) => Some(t),
        Some(_) => {
            is.add(name, "expected a table");
            None
        }
        None => {
            if required {
                is.add(name, "missing required section");
            }
            None
        }
    }
}

/// Parses and validates a configuration.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let root: Table = text.parse().map_err(|e: toml::de::Error| Error::Config {
        key: "<file>".into(),
        msg: e.message().to_string(),
    })?;
    let mut is = Issues::default();
    for k in root.keys() {
        if k != "name" && !SECTIONS.contains(&k.as_str()) {
            is.add(k.as_str(), "unknown key");
        }
    }
    let name = match root.get("name") {
        None => String::new(),
        Some(Value::String(s)) => s.clone(),
        Some(_) => {
            is.add("name", "expected a string");
            String::new()
        }
    };

    let mut ch = Section::new("channel", sub(&root, "channel", &mut is, true));
    let r0 = ch.f64_req("r0", &mut is);
    let r_r = ch.f64_req("r_r", &mut is);
    let d = ch.f64_req("diff_coef", &mut is);
    ch.finish(&mut is);

    let mut gr = Section::new("grid", sub(&root, "grid", &mut is, true));
    let t_b = gr.f64_req("t_b", &mut is);
    let n = gr.usize_req("samples_per_slot", &mut is);
    let memory = gr.usize_req("memory", &mut is);
    let tau = gr.f64_or("tau", 0.0, &mut is);
    gr.finish(&mut is);

    let mut pw = Section::new("power", sub(&root, "power", &mut is, true));
    let m = pw.f64_req("m", &mut is);
    let snr = pw.f64_opt("snr_db", &mut is);
    let rate = pw.f64_opt("lambda_s", &mut is);
    let noise = match (snr, rate) {
        (Some(s), None) => Some(NoiseSpec::SnrDb(s)),
        (None, Some(l)) => Some(NoiseSpec::Rate(l)),
        (Some(_), Some(_)) => {
            is.add("power.snr_db", "give either snr_db or lambda_s, not both");
            None
        }
        (None, None) => {
            if !pw.has("snr_db") && !pw.has("lambda_s") {
                is.add("power.snr_db", "missing required key (or power.lambda_s)");
            }
            None
        }
    };
    pw.finish(&mut is);

    let sim = parse_sim(sub(&root, "harness", &mut is, false), &mut is);
    let optimizer = parse_optimizer(sub(&root, "optimizer", &mut is, false), &mut is);

    let mut sw = Section::new("sweep", sub(&root, "sweep", &mut is, true));
    let var = sw.parsed::<SweepVar>("var", true, &mut is);
    let values = sw.f64_list("values", true, &mut is);
    sw.finish(&mut is);

    let links = match root.get("link") {
        None => {
            is.add("link", "at least one [[link]] is required");
            Vec::new()
        }
        Some(Value::Array(items)) => items
            .iter()
            .enumerate()
            .filter_map(|(i, v)| match v {
                Value::Table(t) => parse_link(i, t, &mut is),
                _ => {
                    is.add(format!("link[{i}]"), "expected a table");
                    None
                }
            })
            .collect(),
        Some(_) => {
            is.add("link", "expected an array of tables ([[link]])");
            Vec::new()
        }
    };

    finish(is.0)?;
    let (Some(r0), Some(r_r), Some(d), Some(t_b), Some(n), Some(memory), Some(m), Some(noise), Some(var), Some(values)) =
        (r0, r_r, d, t_b, n, memory, m, noise, var, values)
    else {
        return Err(Error::config("<file>", "incomplete configuration"));
    };
    let cfg = ExperimentConfig {
        name,
        geometry: ChannelGeometry { r0, r_r, diff_coef: d },
        t_b,
        samples_per_slot: n,
        memory,
        tau,
        m,
        noise,
        sim,
        optimizer,
        sweep: Sweep { var, values },
        links,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn parse_sim(t: Option<&Table>, is: &mut Issues) -> SimSettings {
    let d = SimSettings::default();
    let mut s = Section::new("harness", t);
    let out = SimSettings {
        block_symbols: s.usize_or("block_symbols", d.block_symbols, is),
        seed: s.u64_or("seed", d.seed, is),
        target_errors: s.u64_or("target_errors", d.target_errors, is),
        min_bits: s.u64_or("min_bits", d.min_bits, is),
        max_bits: s.u64_or("max_bits", d.max_bits, is),
        chunk_blocks: s.usize_or("chunk_blocks", d.chunk_blocks, is),
        arrivals: s.parsed("arrivals", false, is).unwrap_or(d.arrivals),
        csi: s.parsed("csi", false, is).unwrap_or(d.csi),
        pilot_symbols: s.usize_or("pilot_symbols", d.pilot_symbols, is),
        silent_samples: s.usize_or("silent_samples", d.silent_samples, is),
    };
    s.finish(is);
    out
}

fn parse_optimizer(t: Option<&Table>, is: &mut Issues) -> OptimizerSettings {
    let d = OptimizerSettings::default();
    let mut s = Section::new("optimizer", t);
    let out = OptimizerSettings {
        grid_points: s.usize_or("grid_points", d.grid_points, is),
        refine_rounds: s.usize_or("refine_rounds", d.refine_rounds, is),
        refine_points: s.usize_or("refine_points", d.refine_points, is),
        training_bits: s.u64_or("training_bits", d.training_bits, is),
        max_derivative: s.usize_or("max_derivative", d.max_derivative, is),
        alpha_grid: s.f64_list("alpha_grid", false, is).unwrap_or(d.alpha_grid),
        ab_max_delay: s.usize_or("ab_max_delay", d.ab_max_delay, is),
        ab_scales: s.f64_list("ab_scales", false, is).unwrap_or(d.ab_scales),
    };
    s.finish(is);
    out
}

fn parse_link(i: usize, t: &Table, is: &mut Issues) -> Option<LinkSpec> {
    let mut s = Section::new(&format!("link[{i}]"), Some(t));
    let label = s.str_req("label", is).map(str::to_string);
    let kind = s.parsed::<SchemeKind>("scheme", true, is);
    let order = s.usize_or("order", 2, is);
    let active = s.usize_or("active", 1, is);
    let info_bits = s.usize_or("info_bits", 1, is);
    let alpha = s.f64_or("alpha", DEFAULT_ALPHA, is);
    let det = s.parsed::<DetectorKind>("detector", true, is);
    let gamma = s.f64_or("gamma", 0.0, is);
    let feedback = s.usize_or("feedback", usize::MAX, is);
    let derivative = s.usize_or("derivative", 0, is);
    let band = s.usize_or("band", 1, is);
    let sprt_d = SprtTargets::default();
    let p_d = s.f64_or("p_d", sprt_d.p_d, is);
    let p_fa = s.f64_or("p_fa", sprt_d.p_fa, is);
    let log_floor = s.f64_or("log_floor", DEFAULT_LOG_FLOOR, is);
    let precoder = match s.str_opt("precoder", is).unwrap_or("none") {
        "none" => Some(Precoder::None),
        "atract" => Some(Precoder::Atract),
        "ab" => Some(Precoder::Ab {
            delay: s.usize_or("ab_delay", 1, is),
            scale: s.f64_or("ab_scale", 0.5, is),
        }),
        other => {
            is.add(s.key("precoder"), format!("unknown precoder '{other}'"));
            None
        }
    };
    let leakage = s.f64_or("leakage", 0.0, is);
    let optimize: Vec<OptParam> = s
        .str_list("optimize", is)
        .unwrap_or_default()
        .into_iter()
        .filter_map(|p| match p.parse() {
            Ok(v) => Some(v),
            Err(_) => {
                is.add(s.key("optimize"), format!("unknown parameter '{p}'"));
                None
            }
        })
        .collect();
    s.finish(is);

    let scheme = SchemeDescriptor::of(kind?, order)
        .with_active(active)
        .with_info_bits(info_bits)
        .with_alpha(alpha);
    let detector = DetectorConfig {
        kind: det?,
        gamma,
        feedback_memory: feedback,
        derivative_order: derivative,
        sprt: SprtTargets { p_d, p_fa },
        band,
        log_floor,
    };
    Some(LinkSpec {
        label: label?,
        scheme,
        detector,
        precoder: precoder?,
        leakage,
        optimize,
    })
}

fn tbl(pairs: Vec<(&str, Value)>) -> Table {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

fn int(v: u64) -> Value {
    Value::Integer(v as i64)
}

fn floats(v: &[f64]) -> Value {
    Value::Array(v.iter().map(|x| Value::Float(*x)).collect())
}

/// Full TOML rendering of a configuration, defaults included.
pub fn render(cfg: &ExperimentConfig) -> String {
    let mut root = Table::new();
    root.insert("name".into(), Value::String(cfg.name.clone()));
    let g = &cfg.geometry;
    root.insert(
        "channel".into(),
        Value::Table(tbl(vec![
            ("r0", Value::Float(g.r0)),
            ("r_r", Value::Float(g.r_r)),
            ("diff_coef", Value::Float(g.diff_coef)),
        ])),
    );
    root.insert(
        "grid".into(),
        Value::Table(tbl(vec![
            ("t_b", Value::Float(cfg.t_b)),
            ("samples_per_slot", int(cfg.samples_per_slot as u64)),
            ("memory", int(cfg.memory as u64)),
            ("tau", Value::Float(cfg.tau)),
        ])),
    );
    let noise = match cfg.noise {
        NoiseSpec::SnrDb(s) => ("snr_db", Value::Float(s)),
        NoiseSpec::Rate(l) => ("lambda_s", Value::Float(l)),
    };
    root.insert(
        "power".into(),
        Value::Table(tbl(vec![("m", Value::Float(cfg.m)), noise])),
    );
    let s = &cfg.sim;
    root.insert(
        "harness".into(),
        Value::Table(tbl(vec![
            ("block_symbols", int(s.block_symbols as u64)),
            ("seed", int(s.seed)),
            ("target_errors", int(s.target_errors)),
            ("min_bits", int(s.min_bits)),
            ("max_bits", int(s.max_bits)),
            ("chunk_blocks", int(s.chunk_blocks as u64)),
            ("arrivals", Value::String(s.arrivals.name().into())),
            ("csi", Value::String(s.csi.name().into())),
            ("pilot_symbols", int(s.pilot_symbols as u64)),
            ("silent_samples", int(s.silent_samples as u64)),
        ])),
    );
    let o = &cfg.optimizer;
    root.insert(
        "optimizer".into(),
        Value::Table(tbl(vec![
            ("grid_points", int(o.grid_points as u64)),
            ("refine_rounds", int(o.refine_rounds as u64)),
            ("refine_points", int(o.refine_points as u64)),
            ("training_bits", int(o.training_bits)),
            ("max_derivative", int(o.max_derivative as u64)),
            ("alpha_grid", floats(&o.alpha_grid)),
            ("ab_max_delay", int(o.ab_max_delay as u64)),
            ("ab_scales", floats(&o.ab_scales)),
        ])),
    );
    root.insert(
        "sweep".into(),
        Value::Table(tbl(vec![
            ("var", Value::String(cfg.sweep.var.name().into())),
            ("values", floats(&cfg.sweep.values)),
        ])),
    );
    root.insert(
        "link".into(),
        Value::Array(cfg.links.iter().map(|l| Value::Table(render_link(l))).collect()),
    );
    toml::to_string(&root).unwrap_or_default()
}

fn render_link(l: &LinkSpec) -> Table {
    let d = &l.detector;
    let mut t = tbl(vec![
        ("label", Value::String(l.label.clone())),
        ("scheme", Value::String(l.scheme.kind.name().into())),
        ("order", int(l.scheme.order as u64)),
        ("active", int(l.scheme.active as u64)),
        ("info_bits", int(l.scheme.info_bits as u64)),
        ("alpha", Value::Float(l.scheme.alpha)),
        ("detector", Value::String(d.kind.name().into())),
        ("gamma", Value::Float(d.gamma)),
        ("derivative", int(d.derivative_order as u64)),
        ("band", int(d.band as u64)),
        ("p_d", Value::Float(d.sprt.p_d)),
        ("p_fa", Value::Float(d.sprt.p_fa)),
        ("log_floor", Value::Float(d.log_floor)),
        ("leakage", Value::Float(l.leakage)),
    ]);
    if d.feedback_memory != usize::MAX {
        t.insert("feedback".into(), int(d.feedback_memory as u64));
    }
    let precoder = match l.precoder {
        Precoder::None => "none",
        Precoder::Atract => "atract",
        Precoder::Ab { delay, scale } => {
            t.insert("ab_delay".into(), int(delay as u64));
            t.insert("ab_scale".into(), Value::Float(scale));
            "ab"
        }
    };
    t.insert("precoder".into(), Value::String(precoder.into()));
    t.insert(
        "optimize".into(),
        Value::Array(l.optimize.iter().map(|p| Value::String(p.name().into())).collect()),
    );
    t
}
