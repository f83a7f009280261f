//! Experiment configuration files.
//!
//! A configuration is a TOML document with the sections `[system]`,
//! `[channel]`, `[compute]`, `[agent]` and `[experiment]`. Every key is
//! optional; values are given in the units named by the key suffix and
//! converted to SI on load. Unknown keys are rejected.
//!
//! ```toml
//! [system]
//! n_devices = 7
//!
//! [channel]
//! bandwidth_mhz = 10
//!
//! [experiment]
//! preset = "consistent"
//! seeds = [1, 2, 3]
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};
use toml::Value;

use crate::agent::{AgentConfig, TargetMode};
use crate::channel::dbm_to_watts;
use crate::env::{EnvConfig, BITS_PER_MB};
use crate::error::{Error, Result};
use crate::oracle::MAX_CANDIDATES;
use crate::topology::{Bounds, Position3};

/// Base parameter set a configuration starts from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Preset {
    /// Published values verbatim.
    #[default]
    Table1,
    /// Published values with energy coefficients rescaled to the battery.
    Consistent,
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "table1" => Ok(Self::Table1),
            "consistent" => Ok(Self::Consistent),
            _ => Err(Error::Parse(format!("unknown preset `{s}` (expected table1 or consistent)"))),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Table1 => "table1",
            Self::Consistent => "consistent",
        })
    }
}

/// The small instance used by the optimality-gap study.
#[derive(Debug, Clone, PartialEq)]
pub struct GapConfig {
    pub n_devices: usize,
    pub n_uavs: usize,
    pub n_task_types: usize,
    /// Battery of every UAV, large enough never to bind.
    pub battery_init: f64,
    /// Slots evaluated per seed.
    pub slots: usize,
    /// Training episodes before the study.
    pub episodes: usize,
}

impl GapConfig {
    /// The study's environment: `base` resized to the small instance.
    pub fn env(&self, base: &EnvConfig) -> EnvConfig {
        EnvConfig {
            n_devices: self.n_devices,
            n_uavs: self.n_uavs,
            n_task_types: self.n_task_types,
            battery_init: self.battery_init,
            ..base.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub preset: Preset,
    pub env: EnvConfig,
    pub agent: AgentConfig,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    /// Device counts visited by the sweep.
    pub sweep_devices: Vec<usize>,
    /// Greedy evaluation episodes per (policy, seed).
    pub eval_episodes: usize,
    /// The random baseline samples over every action instead of the unmasked ones.
    pub random_all_actions: bool,
    pub gap: GapConfig,
}

impl ExperimentConfig {
    pub fn with_preset(preset: Preset) -> Self {
        let env = match preset {
            Preset::Table1 => EnvConfig::table1(),
            Preset::Consistent => EnvConfig::consistent(),
        };
        Self {
            preset,
            env,
            agent: AgentConfig::table2(),
            seeds: vec![0],
            out_dir: PathBuf::from("results"),
            sweep_devices: vec![3, 7, 10],
            eval_episodes: 10,
            random_all_actions: false,
            gap: GapConfig {
                n_devices: 4,
                n_uavs: 2,
                n_task_types: 2,
                battery_init: 1e12,
                slots: 100,
                episodes: 300,
            },
        }
    }

    /// Checks every invariant, naming the offending configuration key.
    pub fn validate(&self) -> Result<()> {
        for key in KEYS {
            if let Err(reason) = (key.set)(&mut self.clone(), &(key.get)(self)) {
                return Err(Error::Validation { field: key.name.into(), reason });
            }
        }
        let gap_space = (1u128 << self.gap.n_task_types).checked_pow(self.gap.n_uavs as u32);
        if gap_space.is_none_or(|n| n > MAX_CANDIDATES) {
            return Err(Error::Validation {
                field: "gap_uavs".into(),
                reason: "gap instance too large to enumerate".into(),
            });
        }
        self.env.validate()?;
        self.agent.validate()?;
        self.gap.env(&self.env).validate()
    }

    /// Canonical TOML rendering of every key except `out_dir`, in a fixed
    /// order. Runs written to different directories share a hash.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        let mut section = "";
        for key in KEYS.iter().filter(|k| k.name != "out_dir") {
            if key.section != section {
                if !section.is_empty() {
                    out.push('\n');
                }
                section = key.section;
                out.push_str(&format!("[{section}]\n"));
            }
            out.push_str(&format!("{} = {}\n", key.name, render(&(key.get)(self))));
        }
        out
    }

    /// SHA-256 of [`ExperimentConfig::canonical`], hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }

    /// `(key, value, source)` for every key. The source is `published` or
    /// `invented` for untouched defaults, `preset` for values set by the
    /// preset and `user` for values changed by the file or command line.
    pub fn provenance(&self) -> Vec<(String, String, &'static str)> {
        let table1 = Self::with_preset(Preset::Table1);
        let preset = Self::with_preset(self.preset);
        KEYS.iter()
            .map(|key| {
                let v = (key.get)(self);
                let source = if key.name == "preset" {
                    if self.preset == Preset::Table1 { key.source.label() } else { "user" }
                } else if v == (key.get)(&table1) {
                    key.source.label()
                } else if v == (key.get)(&preset) {
                    "preset"
                } else {
                    "user"
                };
                (format!("{}.{}", key.section, key.name), render(&v), source)
            })
            .collect()
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::with_preset(Preset::Table1)
    }
}

/// Reads and validates a configuration file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    load_config_with(path, None)
}

/// Like [`load_config`]; `preset` overrides the file's preset.
pub fn load_config_with(path: &Path, preset: Option<Preset>) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text, preset)
}

/// Parses configuration text. Keys are applied on top of the preset
/// defaults, then the whole configuration is validated.
pub fn parse_config(text: &str, preset: Option<Preset>) -> Result<ExperimentConfig> {
    let doc: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parse(e.message().to_string()))?;
    let mut entries = Vec::new();
    for (section, body) in &doc {
        let Value::Table(body) = body else {
            return Err(Error::Parse(format!("top-level key `{section}` must be a section")));
        };
        for (name, value) in body {
            let key = KEYS
                .iter()
                .find(|k| k.section == section && k.name == name)
                .ok_or_else(|| Error::Parse(format!("unknown key `{section}.{name}`")))?;
            entries.push((key, value));
        }
    }
    let file_preset = entries
        .iter()
        .find(|(k, _)| k.name == "preset")
        .map(|(_, v)| v.as_str().ok_or_else(|| invalid("preset", "expected a string")).and_then(str::parse))
        .transpose()?;
    let mut cfg = ExperimentConfig::with_preset(preset.or(file_preset).unwrap_or_default());
    for (key, value) in entries {
        if key.name != "preset" {
            (key.set)(&mut cfg, value).map_err(|reason| Error::Validation { field: key.name.into(), reason })?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Markdown table of every key with its default, unit and source.
pub fn reference_page() -> String {
    let table1 = ExperimentConfig::with_preset(Preset::Table1);
    let consistent = ExperimentConfig::with_preset(Preset::Consistent);
    let mut out = String::from(
        "# Configuration reference\n\n\
         Generated by `offload config-reference`. Defaults are those of the `table1` preset; \
         the `consistent` column lists values that preset changes. Source `published` marks published \
         values, `invented` marks values chosen here.\n",
    );
    let mut section = "";
    for key in KEYS {
        if key.section != section {
            section = key.section;
            out.push_str(&format!(
                "\n## [{section}]\n\n| key | default | consistent | unit | source | meaning |\n|---|---|---|---|---|---|\n"
            ));
        }
        let d = (key.get)(&table1);
        let c = (key.get)(&consistent);
        let alt = if c != d { render(&c) } else { String::new() };
        out.push_str(&format!(
            "| `{}` | `{}` | {} | {} | {} | {} |\n",
            key.name,
            render(&d),
            if alt.is_empty() { String::new() } else { format!("`{alt}`") },
            key.unit,
            key.source.label(),
            key.doc
        ));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Source {
    Published,
    Invented,
}

impl Source {
    fn label(self) -> &'static str {
        match self {
            Self::Published => "published",
            Self::Invented => "invented",
        }
    }
}

type Setter = fn(&mut ExperimentConfig, &Value) -> std::result::Result<(), String>;

struct Key {
    section: &'static str,
    name: &'static str,
    unit: &'static str,
    source: Source,
    doc: &'static str,
    get: fn(&ExperimentConfig) -> Value,
    set: Setter,
}

fn invalid(field: &str, reason: &str) -> Error {
    Error::Validation { field: field.into(), reason: reason.into() }
}

fn render(v: &Value) -> String {
    match v {
        Value::Float(f) => format!("{f:?}"),
        Value::Integer(i) => i.to_string(),
        Value::Boolean(b) => b.to_string(),
        Value::String(s) => format!("{s:?}"),
        Value::Array(items) => format!("[{}]", items.iter().map(render).collect::<Vec<_>>().join(", ")),
        other => other.to_string(),
    }
}

type R<T> = std::result::Result<T, String>;

fn num(v: &Value) -> R<f64> {
    match v {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        _ => Err("expected a number".into()),
    }
}

fn pos(v: &Value) -> R<f64> {
    let x = num(v)?;
    if x > 0.0 && x.is_finite() { Ok(x) } else { Err("must be positive".into()) }
}

fn nonneg(v: &Value) -> R<f64> {
    let x = num(v)?;
    if x >= 0.0 && x.is_finite() { Ok(x) } else { Err("must be non-negative".into()) }
}

fn unit_interval(v: &Value) -> R<f64> {
    let x = num(v)?;
    if (0.0..=1.0).contains(&x) { Ok(x) } else { Err("must lie in [0, 1]".into()) }
}

fn count(v: &Value) -> R<usize> {
    match v {
        Value::Integer(i) if *i > 0 => Ok(*i as usize),
        Value::Integer(_) => Err("must be positive".into()),
        _ => Err("expected an integer".into()),
    }
}

fn flag(v: &Value) -> R<bool> {
    v.as_bool().ok_or_else(|| "expected true or false".into())
}

fn list<T>(v: &Value, item: fn(&Value) -> R<T>) -> R<Vec<T>> {
    let items = v.as_array().ok_or("expected a list")?;
    if items.is_empty() {
        return Err("must not be empty".into());
    }
    items.iter().map(item).collect()
}

fn seed(v: &Value) -> R<u64> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as u64),
        _ => Err("seeds must be non-negative integers".into()),
    }
}

fn float(x: f64) -> Value {
    Value::Float(x)
}

fn int(x: usize) -> Value {
    Value::Integer(x as i64)
}

fn dbm(watts: f64) -> Value {
    Value::Float(10.0 * watts.log10() + 30.0)
}

macro_rules! key {
    ($section:literal, $name:literal, $unit:literal, $source:ident, $doc:literal, $get:expr, $set:expr) => {
        Key {
            section: $section,
            name: $name,
            unit: $unit,
            source: Source::$source,
            doc: $doc,
            get: $get,
            set: $set,
        }
    };
}

static KEYS: &[Key] = &[
    key!("system", "n_devices", "", Published, "IoT devices N", |c| int(c.env.n_devices), |c, v| {
        c.env.n_devices = count(v)?;
        Ok(())
    }),
    key!("system", "n_uavs", "", Published, "UAVs M", |c| int(c.env.n_uavs), |c, v| {
        c.env.n_uavs = count(v)?;
        Ok(())
    }),
    key!("system", "n_task_types", "", Published, "task types K", |c| int(c.env.n_task_types), |c, v| {
        c.env.n_task_types = count(v)?;
        Ok(())
    }),
    key!("system", "space_m", "m", Published, "side of the cubic deployment area", |c| float(c.env.bounds.x), |c, v| {
        c.env.bounds = Bounds::cube(pos(v)?);
        Ok(())
    }),
    key!(
        "system",
        "mec_position_m",
        "m",
        Invented,
        "MEC server position `[x, y, z]`, or `\"random\"` to sample it like a UAV",
        |c| match c.env.mec_position {
            None => Value::String("random".into()),
            Some(p) => Value::Array(vec![float(p.x), float(p.y), float(p.z)]),
        },
        |c, v| {
            c.env.mec_position = match v {
                Value::String(s) if s == "random" => None,
                _ => {
                    let xyz = list(v, num)?;
                    if xyz.len() != 3 {
                        return Err("expected three coordinates".into());
                    }
                    Some(Position3::new(xyz[0], xyz[1], xyz[2]))
                }
            };
            Ok(())
        }
    ),
    key!("system", "battery_j", "J", Published, "initial UAV battery B_m", |c| float(c.env.battery_init), |c, v| {
        c.env.battery_init = pos(v)?;
        Ok(())
    }),
    key!("system", "capacity_mb", "MB", Published, "UAV computational capacity C_m", |c| float(c.env.capacity_bits / BITS_PER_MB), |c, v| {
        c.env.capacity_bits = nonneg(v)? * BITS_PER_MB;
        Ok(())
    }),
    key!("system", "delay_threshold_s", "s", Invented, "task delay threshold t_th", |c| float(c.env.delay_threshold), |c, v| {
        c.env.delay_threshold = pos(v)?;
        Ok(())
    }),
    key!("system", "min_secrecy_mbps", "Mbit/s", Invented, "minimum secrecy rate R_min", |c| float(c.env.min_secrecy_rate / 1e6), |c, v| {
        c.env.min_secrecy_rate = nonneg(v)? * 1e6;
        Ok(())
    }),
    key!("system", "max_tx_energy_device_j", "J", Invented, "device transmit energy cap", |c| float(c.env.max_tx_energy_device), |c, v| {
        c.env.max_tx_energy_device = pos(v)?;
        Ok(())
    }),
    key!("system", "max_tx_energy_uav_j", "J", Invented, "UAV transmit energy cap", |c| float(c.env.max_tx_energy_uav), |c, v| {
        c.env.max_tx_energy_uav = pos(v)?;
        Ok(())
    }),
    key!("system", "max_proc_energy_uav_j", "J", Invented, "UAV processing energy cap per task", |c| float(c.env.max_proc_energy_uav), |c, v| {
        c.env.max_proc_energy_uav = pos(v)?;
        Ok(())
    }),
    key!("system", "max_proc_energy_edge_j", "J", Invented, "offload-target processing energy cap per task", |c| float(c.env.max_proc_energy_edge), |c, v| {
        c.env.max_proc_energy_edge = pos(v)?;
        Ok(())
    }),
    key!("system", "slots_per_episode", "", Invented, "slots per episode", |c| int(c.env.slots_per_episode), |c, v| {
        c.env.slots_per_episode = count(v)?;
        Ok(())
    }),
    key!("system", "data_mean_mb", "MB", Published, "task data size mean", |c| float(c.env.data_size.mean / BITS_PER_MB), |c, v| {
        c.env.data_size.mean = pos(v)? * BITS_PER_MB;
        Ok(())
    }),
    key!("system", "data_std_mb", "MB", Published, "task data size standard deviation", |c| float(c.env.data_size.std / BITS_PER_MB), |c, v| {
        c.env.data_size.std = nonneg(v)? * BITS_PER_MB;
        Ok(())
    }),
    key!("system", "cycles_mean_mc", "Megacycles", Published, "task CPU cycles mean", |c| float(c.env.cpu_cycles.mean / 1e6), |c, v| {
        c.env.cpu_cycles.mean = pos(v)? * 1e6;
        Ok(())
    }),
    key!("system", "cycles_std_mc", "Megacycles", Published, "task CPU cycles standard deviation", |c| float(c.env.cpu_cycles.std / 1e6), |c, v| {
        c.env.cpu_cycles.std = nonneg(v)? * 1e6;
        Ok(())
    }),
    key!(
        "system",
        "priorities",
        "",
        Published,
        "priority levels, drawn uniformly per task",
        |c| Value::Array(c.env.priority_set.iter().map(|&p| float(p)).collect()),
        |c, v| {
            c.env.priority_set = list(v, nonneg)?;
            Ok(())
        }
    ),
    key!("system", "violation_penalty", "", Invented, "reward penalty per penalised breach", |c| float(c.env.violation_penalty), |c, v| {
        c.env.violation_penalty = nonneg(v)?;
        Ok(())
    }),
    key!("system", "knapsack_gates_mask", "", Invented, "mask local processing of types the knapsack rejects", |c| Value::Boolean(c.env.knapsack_gates_mask), |c, v| {
        c.env.knapsack_gates_mask = flag(v)?;
        Ok(())
    }),
    key!("system", "resample_topology", "", Invented, "draw a new deployment at every episode reset", |c| Value::Boolean(c.env.resample_topology), |c, v| {
        c.env.resample_topology = flag(v)?;
        Ok(())
    }),
    key!("channel", "los_a", "", Published, "LoS probability parameter a (rural)", |c| float(c.env.channel.a), |c, v| {
        c.env.channel.a = pos(v)?;
        Ok(())
    }),
    key!("channel", "los_b", "", Published, "LoS probability parameter b (rural)", |c| float(c.env.channel.b), |c, v| {
        c.env.channel.b = pos(v)?;
        Ok(())
    }),
    key!("channel", "eta_los", "linear", Invented, "excess loss on LoS paths", |c| float(c.env.channel.eta_los), |c, v| {
        c.env.channel.eta_los = pos(v)?;
        Ok(())
    }),
    key!("channel", "eta_nlos", "linear", Invented, "excess loss on NLoS paths", |c| float(c.env.channel.eta_nlos), |c, v| {
        c.env.channel.eta_nlos = pos(v)?;
        Ok(())
    }),
    key!("channel", "carrier_ghz", "GHz", Published, "carrier frequency f_c", |c| float(c.env.channel.carrier_freq / 1e9), |c, v| {
        c.env.channel.carrier_freq = pos(v)? * 1e9;
        Ok(())
    }),
    key!("channel", "path_loss_exp", "", Published, "path loss exponent", |c| float(c.env.channel.path_loss_exp), |c, v| {
        c.env.channel.path_loss_exp = pos(v)?;
        Ok(())
    }),
    key!("channel", "bandwidth_mhz", "MHz", Published, "system bandwidth B", |c| float(c.env.channel.bandwidth / 1e6), |c, v| {
        c.env.channel.bandwidth = pos(v)? * 1e6;
        Ok(())
    }),
    key!("channel", "noise_dbm", "dBm", Published, "noise power N_0", |c| dbm(c.env.channel.noise_power), |c, v| {
        c.env.channel.noise_power = dbm_to_watts(num(v)?);
        Ok(())
    }),
    key!("channel", "p_device_dbm", "dBm", Published, "device transmit power", |c| dbm(c.env.channel.p_device), |c, v| {
        c.env.channel.p_device = dbm_to_watts(num(v)?);
        Ok(())
    }),
    key!("channel", "p_uav_dbm", "dBm", Published, "UAV transmit power", |c| dbm(c.env.channel.p_uav), |c, v| {
        c.env.channel.p_uav = dbm_to_watts(num(v)?);
        Ok(())
    }),
    key!("compute", "f_uav_mhz", "MHz", Published, "UAV CPU frequency", |c| float(c.env.compute.f_uav / 1e6), |c, v| {
        c.env.compute.f_uav = pos(v)? * 1e6;
        Ok(())
    }),
    key!("compute", "f_mec_mhz", "MHz", Published, "MEC CPU frequency", |c| float(c.env.compute.f_mec / 1e6), |c, v| {
        c.env.compute.f_mec = pos(v)? * 1e6;
        Ok(())
    }),
    key!("compute", "kappa_uav", "", Published, "UAV energy conversion coefficient", |c| float(c.env.compute.kappa_uav), |c, v| {
        c.env.compute.kappa_uav = nonneg(v)?;
        Ok(())
    }),
    key!("compute", "kappa_mec", "", Published, "MEC energy conversion coefficient", |c| float(c.env.compute.kappa_mec), |c, v| {
        c.env.compute.kappa_mec = nonneg(v)?;
        Ok(())
    }),
    key!("compute", "decision_time_s", "s", Invented, "decision time t_a", |c| float(c.env.compute.decision_time), |c, v| {
        c.env.compute.decision_time = nonneg(v)?;
        Ok(())
    }),
    key!("compute", "alpha", "", Invented, "delay weight", |c| float(c.env.compute.alpha), |c, v| {
        c.env.compute.alpha = nonneg(v)?;
        Ok(())
    }),
    key!("compute", "beta", "", Invented, "energy weight", |c| float(c.env.compute.beta), |c, v| {
        c.env.compute.beta = nonneg(v)?;
        Ok(())
    }),
    key!(
        "compute",
        "charge_first_hop_on_offload",
        "",
        Invented,
        "add the device uplink energy to offloaded tasks",
        |c| Value::Boolean(c.env.compute.charge_first_hop_on_offload),
        |c, v| {
            c.env.compute.charge_first_hop_on_offload = flag(v)?;
            Ok(())
        }
    ),
    key!("agent", "learning_rate", "", Published, "Adam step size", |c| float(c.agent.learning_rate), |c, v| {
        c.agent.learning_rate = pos(v)?;
        Ok(())
    }),
    key!("agent", "gamma", "", Published, "discount factor", |c| float(c.agent.gamma), |c, v| {
        let g = num(v)?;
        if !(0.0..1.0).contains(&g) {
            return Err("must lie in [0, 1)".into());
        }
        c.agent.gamma = g;
        Ok(())
    }),
    key!("agent", "batch_size", "", Published, "slot groups per mini-batch", |c| int(c.agent.batch_size), |c, v| {
        c.agent.batch_size = count(v)?;
        Ok(())
    }),
    key!("agent", "buffer_capacity", "", Published, "replay pool size in slot groups", |c| int(c.agent.buffer_capacity), |c, v| {
        c.agent.buffer_capacity = count(v)?;
        Ok(())
    }),
    key!("agent", "episodes", "", Published, "training episodes", |c| int(c.agent.episodes), |c, v| {
        c.agent.episodes = count(v)?;
        Ok(())
    }),
    key!(
        "agent",
        "hidden",
        "",
        Published,
        "hidden layer widths",
        |c| Value::Array(c.agent.hidden.iter().map(|&h| int(h)).collect()),
        |c, v| {
            c.agent.hidden = list(v, count)?;
            Ok(())
        }
    ),
    key!("agent", "target_sync", "", Invented, "gradient updates between target syncs", |c| int(c.agent.target_sync), |c, v| {
        c.agent.target_sync = count(v)?;
        Ok(())
    }),
    key!("agent", "epsilon_start", "", Invented, "initial exploration rate", |c| float(c.agent.epsilon_start), |c, v| {
        c.agent.epsilon_start = unit_interval(v)?;
        Ok(())
    }),
    key!("agent", "epsilon_end", "", Invented, "final exploration rate", |c| float(c.agent.epsilon_end), |c, v| {
        c.agent.epsilon_end = unit_interval(v)?;
        Ok(())
    }),
    key!("agent", "epsilon_decay_fraction", "", Invented, "share of episodes over which epsilon decays", |c| float(c.agent.epsilon_decay_fraction), |c, v| {
        c.agent.epsilon_decay_fraction = unit_interval(v)?;
        Ok(())
    }),
    key!("agent", "update_every", "slots", Invented, "slots between gradient updates", |c| int(c.agent.update_every), |c, v| {
        c.agent.update_every = count(v)?;
        Ok(())
    }),
    key!(
        "agent",
        "mode",
        "",
        Invented,
        "bootstrap target: `double` or `paper_eq24`",
        |c| Value::String(c.agent.mode.to_string()),
        |c, v| {
            c.agent.mode = v.as_str().ok_or("expected a string")?.parse::<TargetMode>().map_err(|e| e.to_string())?;
            Ok(())
        }
    ),
    key!("agent", "masking", "", Invented, "apply action masks during training and execution", |c| Value::Boolean(c.agent.masking), |c, v| {
        c.agent.masking = flag(v)?;
        Ok(())
    }),
    key!("agent", "share_parameters", "", Invented, "one network shared by all UAVs", |c| Value::Boolean(c.agent.share_parameters), |c, v| {
        c.agent.share_parameters = flag(v)?;
        Ok(())
    }),
    key!("agent", "reward_scale", "", Invented, "multiplier on rewards stored for learning", |c| float(c.agent.reward_scale), |c, v| {
        c.agent.reward_scale = pos(v)?;
        Ok(())
    }),
    key!(
        "experiment",
        "preset",
        "",
        Published,
        "base parameter set: `table1` or `consistent`",
        |c| Value::String(c.preset.to_string()),
        |c, v| {
            let p: Preset = v.as_str().ok_or("expected a string")?.parse().map_err(|e: Error| e.to_string())?;
            if p != c.preset {
                return Err("the preset is fixed when the configuration is created".into());
            }
            Ok(())
        }
    ),
    key!(
        "experiment",
        "seeds",
        "",
        Invented,
        "run seeds",
        |c| Value::Array(c.seeds.iter().map(|&s| Value::Integer(s as i64)).collect()),
        |c, v| {
            c.seeds = list(v, seed)?;
            Ok(())
        }
    ),
    key!(
        "experiment",
        "out_dir",
        "",
        Invented,
        "output directory",
        |c| Value::String(c.out_dir.display().to_string()),
        |c, v| {
            c.out_dir = PathBuf::from(v.as_str().ok_or("expected a string")?);
            Ok(())
        }
    ),
    key!(
        "experiment",
        "sweep_devices",
        "",
        Published,
        "device counts visited by the sweep",
        |c| Value::Array(c.sweep_devices.iter().map(|&n| int(n)).collect()),
        |c, v| {
            c.sweep_devices = list(v, count)?;
            Ok(())
        }
    ),
    key!("experiment", "eval_episodes", "", Invented, "greedy evaluation episodes per policy and seed", |c| int(c.eval_episodes), |c, v| {
        c.eval_episodes = count(v)?;
        Ok(())
    }),
    key!("experiment", "random_all_actions", "", Invented, "random baseline ignores action masks", |c| Value::Boolean(c.random_all_actions), |c, v| {
        c.random_all_actions = flag(v)?;
        Ok(())
    }),
    key!("experiment", "gap_devices", "", Invented, "devices in the gap-study instance", |c| int(c.gap.n_devices), |c, v| {
        c.gap.n_devices = count(v)?;
        Ok(())
    }),
    key!("experiment", "gap_uavs", "", Invented, "UAVs in the gap-study instance", |c| int(c.gap.n_uavs), |c, v| {
        c.gap.n_uavs = count(v)?;
        Ok(())
    }),
    key!("experiment", "gap_task_types", "", Invented, "task types in the gap-study instance", |c| int(c.gap.n_task_types), |c, v| {
        c.gap.n_task_types = count(v)?;
        Ok(())
    }),
    key!("experiment", "gap_battery_j", "J", Invented, "UAV battery in the gap-study instance", |c| float(c.gap.battery_init), |c, v| {
        c.gap.battery_init = pos(v)?;
        Ok(())
    }),
    key!("experiment", "gap_slots", "", Invented, "slots evaluated per seed in the gap study", |c| int(c.gap.slots), |c, v| {
        c.gap.slots = count(v)?;
        Ok(())
    }),
    key!("experiment", "gap_episodes", "", Invented, "training episodes before the gap study", |c| int(c.gap.episodes), |c, v| {
        c.gap.episodes = count(v)?;
        Ok(())
    }),
];
