//! Experiment configuration: a single JSON document, parsed strictly.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde_json::{Map, Value};
use thiserror::Error;

use crate::model::{AppProfile, DegreeDistribution, FrameParams};
use crate::protocols::{Protocol, RapParams, SalohaParams};
use crate::traffic::TrafficConfig;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("syntax error at line {line}: {message}")]
    SyntaxError { line: usize, message: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("protocol `{protocol}` requires a `{section}` section")]
    MissingSection { protocol: &'static str, section: &'static str },
    #[error("invalid value for `{field}`: {reason}")]
    InvalidValue { field: String, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub protocol: Protocol,
    pub frame: FrameParams,
    pub dist: DegreeDistribution,
    pub rap: Option<RapParams>,
    pub saloha: SalohaParams,
    pub traffic: TrafficConfig,
    pub load_sweep: Vec<f64>,
    pub realizations: u64,
    pub sim_time_s: f64,
    pub seed: u64,
    /// Each user draws one profile uniformly from this list.
    pub app_profiles: Vec<AppProfile>,
    pub output_path: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Default parameters for `protocol` at the given loads.
    pub fn new(protocol: Protocol, load_sweep: Vec<f64>, seed: u64) -> Self {
        Self {
            protocol,
            frame: FrameParams::default(),
            dist: DegreeDistribution::lambda8(),
            rap: protocol.uses_cns().then(RapParams::default),
            saloha: SalohaParams::default(),
            traffic: TrafficConfig::default(),
            load_sweep,
            realizations: 100,
            sim_time_s: 10.0,
            seed,
            app_profiles: vec![AppProfile::lookup("AMI").expect("catalog entry")],
            output_path: None,
        }
    }

    /// Connecting-node parameters, or none for protocols without cNs.
    pub fn rap_params(&self) -> RapParams {
        self.rap.unwrap_or(RapParams { q: 0, eta: 0.0, p_vis: 0.0 })
    }

    /// Simulated horizon in slots.
    pub fn horizon_slots(&self) -> usize {
        (self.sim_time_s * 1000.0 / self.frame.slot_ms).round() as usize
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |field: &str, reason: String| ConfigError::InvalidValue { field: field.into(), reason };
        self.frame.validate().map_err(|e| bad("frame", e.to_string()))?;
        crate::model::validate_distribution(&self.dist)
            .map_err(|e| bad("degree_distribution", e.to_string()))?;
        if self.dist.d_max() as usize > self.frame.n_raf {
            return Err(bad("degree_distribution", "d_max exceeds frame.n_raf".into()));
        }
        if self.protocol.uses_cns() && self.rap.is_none() {
            return Err(ConfigError::MissingSection { protocol: self.protocol.name(), section: "rap" });
        }
        if let Some(rap) = &self.rap {
            rap.validate().map_err(|e| bad("rap", e.to_string()))?;
        }
        self.saloha.validate().map_err(|e| bad("saloha", e.to_string()))?;
        self.traffic.validate().map_err(|e| bad("traffic", e.to_string()))?;
        if self.load_sweep.is_empty() {
            return Err(bad("load_sweep", "must list at least one load".into()));
        }
        if let Some(g) = self.load_sweep.iter().find(|g| !(g.is_finite() && **g > 0.0)) {
            return Err(bad("load_sweep", format!("load {g} is not positive")));
        }
        if self.realizations < 1 {
            return Err(bad("realizations", "must be at least 1".into()));
        }
        if !(self.sim_time_s > 0.0) || self.horizon_slots() < self.frame.n_raf {
            return Err(bad("sim_time_s", "must cover at least one frame".into()));
        }
        if self.app_profiles.is_empty() {
            return Err(bad("app_profile", "must name at least one profile".into()));
        }
        Ok(())
    }
}

const TOP_KEYS: &[&str] = &[
    "protocol",
    "frame",
    "degree_distribution",
    "rap",
    "saloha",
    "traffic",
    "load_sweep",
    "realizations",
    "sim_time_s",
    "seed",
    "app_profile",
    "output_path",
];

/// Parses a JSON experiment description. Omitted fields take their
/// defaults; unknown keys are rejected at every level.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let root: Value = serde_json::from_str(text)
        .map_err(|e| ConfigError::SyntaxError { line: e.line(), message: e.to_string() })?;
    let obj = as_object(&root, "config")?;
    check_keys(obj, TOP_KEYS, "")?;

    let protocol_name = get_str(obj, "protocol", "protocol")?
        .ok_or_else(|| invalid("protocol", "missing"))?;
    let protocol = Protocol::parse(protocol_name)
        .ok_or_else(|| invalid("protocol", &format!("unknown protocol `{protocol_name}`")))?;
    let load_sweep = match obj.get("load_sweep") {
        None => return Err(invalid("load_sweep", "missing")),
        Some(Value::Array(a)) => a
            .iter()
            .map(|v| v.as_f64().ok_or_else(|| invalid("load_sweep", "expected numbers")))
            .collect::<Result<Vec<_>, _>>()?,
        Some(v) => vec![v.as_f64().ok_or_else(|| invalid("load_sweep", "expected numbers"))?],
    };
    let seed = get_u64(obj, "seed", "seed")?.unwrap_or(0);
    let mut cfg = ExperimentConfig::new(protocol, load_sweep, seed);
    cfg.rap = None;

    if let Some(v) = obj.get("frame") {
        let f = as_object(v, "frame")?;
        check_keys(f, &["n_raf", "slot_ms", "max_sic_iters"], "frame.")?;
        if let Some(n) = get_u64(f, "n_raf", "frame.n_raf")? {
            cfg.frame.n_raf = n as usize;
        }
        if let Some(x) = get_f64(f, "slot_ms", "frame.slot_ms")? {
            cfg.frame.slot_ms = x;
        }
        if let Some(n) = get_u64(f, "max_sic_iters", "frame.max_sic_iters")? {
            cfg.frame.max_sic_iters = u32::try_from(n).map_err(|_| invalid("frame.max_sic_iters", "too large"))?;
        }
    }

    if let Some(v) = obj.get("degree_distribution") {
        cfg.dist = parse_distribution(v)?;
    }

    match obj.get("rap") {
        Some(v) => {
            let r = as_object(v, "rap")?;
            check_keys(r, &["q", "eta", "p_vis"], "rap.")?;
            let mut rap = RapParams::default();
            if let Some(q) = get_u64(r, "q", "rap.q")? {
                rap.q = q as usize;
            }
            if let Some(x) = get_f64(r, "eta", "rap.eta")? {
                rap.eta = x;
            }
            if let Some(x) = get_f64(r, "p_vis", "rap.p_vis")? {
                rap.p_vis = x;
            }
            cfg.rap = Some(rap);
        }
        None if protocol.uses_cns() => {
            return Err(ConfigError::MissingSection { protocol: protocol.name(), section: "rap" });
        }
        None => {}
    }

    if let Some(v) = obj.get("saloha") {
        let s = as_object(v, "saloha")?;
        check_keys(s, &["backoff_limit", "fresh_only"], "saloha.")?;
        if let Some(b) = get_u64(s, "backoff_limit", "saloha.backoff_limit")? {
            cfg.saloha.backoff_limit =
                u32::try_from(b).map_err(|_| invalid("saloha.backoff_limit", "too large"))?;
        }
        if let Some(b) = s.get("fresh_only") {
            cfg.saloha.fresh_only = b.as_bool().ok_or_else(|| invalid("saloha.fresh_only", "expected a boolean"))?;
        }
    }

    if let Some(v) = obj.get("traffic") {
        cfg.traffic = parse_traffic(v)?;
    }
    if let Some(n) = get_u64(obj, "realizations", "realizations")? {
        cfg.realizations = n;
    }
    if let Some(x) = get_f64(obj, "sim_time_s", "sim_time_s")? {
        cfg.sim_time_s = x;
    }
    if let Some(v) = obj.get("app_profile") {
        cfg.app_profiles = match v {
            Value::Array(items) => items.iter().map(parse_profile).collect::<Result<_, _>>()?,
            other => vec![parse_profile(other)?],
        };
    }
    if let Some(p) = get_str(obj, "output_path", "output_path")? {
        cfg.output_path = Some(PathBuf::from(p));
    }

    cfg.validate()?;
    Ok(cfg)
}

fn parse_distribution(v: &Value) -> Result<DegreeDistribution, ConfigError> {
    let field = "degree_distribution";
    let m = as_object(v, field)?;
    let mut mass = BTreeMap::new();
    for (k, p) in m {
        let d: u32 = k
            .parse()
            .ok()
            .filter(|d| *d >= 1)
            .ok_or_else(|| invalid(field, &format!("degree key `{k}` is not a positive integer")))?;
        let p = p.as_f64().ok_or_else(|| invalid(field, "probabilities must be numbers"))?;
        mass.insert(d, p);
    }
    let d_max = *mass.keys().next_back().ok_or_else(|| invalid(field, "empty mapping"))?;
    DegreeDistribution::new(mass, d_max).map_err(|e| invalid(field, &e.to_string()))
}

fn parse_traffic(v: &Value) -> Result<TrafficConfig, ConfigError> {
    let t = as_object(v, "traffic")?;
    check_keys(
        t,
        &["model", "total_devices", "window_s", "beta_alpha", "beta_beta", "packet_size_bytes"],
        "traffic.",
    )?;
    let mut cfg = match get_str(t, "model", "traffic.model")? {
        None | Some("poisson") => TrafficConfig::poisson(),
        Some("beta") => TrafficConfig::beta(0),
        Some("uniform") => TrafficConfig::uniform(0),
        Some(other) => return Err(invalid("traffic.model", &format!("unknown model `{other}`"))),
    };
    if let Some(m) = get_u64(t, "total_devices", "traffic.total_devices")? {
        cfg.total_devices = m;
    }
    if let Some(x) = get_f64(t, "window_s", "traffic.window_s")? {
        cfg.window_s = x;
    }
    if let Some(x) = get_f64(t, "beta_alpha", "traffic.beta_alpha")? {
        cfg.beta_alpha = x;
    }
    if let Some(x) = get_f64(t, "beta_beta", "traffic.beta_beta")? {
        cfg.beta_beta = x;
    }
    if let Some(n) = get_u64(t, "packet_size_bytes", "traffic.packet_size_bytes")? {
        cfg.packet_size_bytes =
            u32::try_from(n).map_err(|_| invalid("traffic.packet_size_bytes", "too large"))?;
    }
    Ok(cfg)
}

fn parse_profile(v: &Value) -> Result<AppProfile, ConfigError> {
    match v {
        Value::String(name) => AppProfile::lookup(name)
            .ok_or_else(|| invalid("app_profile", &format!("unknown profile `{name}`"))),
        Value::Object(o) => {
            check_keys(o, &["name", "latency_ms", "priority"], "app_profile.")?;
            let name = get_str(o, "name", "app_profile.name")?.unwrap_or("custom");
            let latency = get_f64(o, "latency_ms", "app_profile.latency_ms")?
                .ok_or_else(|| invalid("app_profile.latency_ms", "missing"))?;
            let priority = get_u64(o, "priority", "app_profile.priority")?.unwrap_or(0);
            let priority = u32::try_from(priority).map_err(|_| invalid("app_profile.priority", "too large"))?;
            AppProfile::new(name, latency, priority).map_err(|e| invalid("app_profile", &e.to_string()))
        }
        _ => Err(invalid("app_profile", "expected a name, an object or a list")),
    }
}

fn invalid(field: &str, reason: &str) -> ConfigError {
    ConfigError::InvalidValue { field: field.to_string(), reason: reason.to_string() }
}

fn as_object<'a>(v: &'a Value, field: &str) -> Result<&'a Map<String, Value>, ConfigError> {
    v.as_object().ok_or_else(|| invalid(field, "expected an object"))
}

fn check_keys(obj: &Map<String, Value>, allowed: &[&str], prefix: &str) -> Result<(), ConfigError> {
    match obj.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(ConfigError::UnknownKey(format!("{prefix}{k}"))),
        None => Ok(()),
    }
}

fn get_str<'a>(obj: &'a Map<String, Value>, key: &str, field: &str) -> Result<Option<&'a str>, ConfigError> {
    obj.get(key)
        .map(|v| v.as_str().ok_or_else(|| invalid(field, "expected a string")))
        .transpose()
}

fn get_f64(obj: &Map<String, Value>, key: &str, field: &str) -> Result<Option<f64>, ConfigError> {
    obj.get(key)
        .map(|v| v.as_f64().ok_or_else(|| invalid(field, "expected a number")))
        .transpose()
}

fn get_u64(obj: &Map<String, Value>, key: &str, field: &str) -> Result<Option<u64>, ConfigError> {
    obj.get(key)
        .map(|v| v.as_u64().ok_or_else(|| invalid(field, "expected a non-negative integer")))
        .transpose()
}
