//! Flat `section.key = value` experiment files. `#` starts a comment; blank
//! lines are ignored. Unknown or repeated keys are errors.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::csit::CsitBound;
use crate::linkmodel::SystemParams;
use crate::oracle::GridSpec;
use crate::sumrate::SolveMode;

/// A config problem, tied to a line and key where one exists.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{}{key}: {msg}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: String,
    pub msg: String,
}

impl ConfigError {
    fn new(line: Option<usize>, key: &str, msg: impl Into<String>) -> Self {
        Self { line, key: key.to_string(), msg: msg.into() }
    }
}

const KEYS: &[&str] = &[
    "system.p_max",
    "system.adc_a",
    "system.n_t",
    "system.n_r",
    "system.w_sub6_max",
    "system.w_m_max",
    "channel.mode",
    "channel.seed",
    "channel.gain_db",
    "channel.path",
    "channel.csit.lambda",
    "channel.csit.epsilon",
    "channel.csit.sigma_e2",
    "mmwave.gain",
    "mmwave.gain_db",
    "mmwave.k_factor",
    "mmwave.seed",
    "sweep.variable",
    "sweep.from",
    "sweep.to",
    "sweep.points",
    "sweep.log_scale",
    "solver.problem",
    "solver.mode",
    "solver.delta",
    "solver.csit_bound",
    "solver.p_cap",
    "oracle.points",
    "oracle.rounds",
    "oracle.shrink",
    "output.csv_path",
    "output.plot_script",
];

#[derive(Debug, Clone, PartialEq)]
pub enum ChannelSource {
    /// I.i.d. Rayleigh fading scaled by a path gain in dB.
    Rayleigh { gain_db: f64 },
    /// Line-of-sight mean plus bounded error.
    Compound { lambda: f64, epsilon: f64, sigma_e2: f64 },
    /// Matrix read from a text file.
    File { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq)]
pub enum MmWaveSource {
    /// Beamformed gain `A` given directly.
    Gain(f64),
    /// Rician draw with a per-element gain in dB.
    Rician { gain_db: f64, k_factor: f64, seed: Option<u64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVariable {
    AdcA,
    PMax,
    WmMax,
}

impl SweepVariable {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepVariable::AdcA => "adc_a",
            SweepVariable::PMax => "p_max",
            SweepVariable::WmMax => "w_m_max",
        }
    }

    /// `params` with this variable set to `value`.
    pub fn apply(&self, params: &SystemParams, value: f64) -> SystemParams {
        let mut p = *params;
        match self {
            SweepVariable::AdcA => p.adc_a = value,
            SweepVariable::PMax => p.p_max = value,
            SweepVariable::WmMax => p.w_m_max = value,
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub variable: SweepVariable,
    pub from: f64,
    pub to: f64,
    pub points: usize,
    pub log_scale: bool,
}

impl SweepConfig {
    pub fn values(&self) -> Vec<f64> {
        let n = self.points;
        (0..n)
            .map(|i| {
                let t = i as f64 / (n - 1) as f64;
                if i == 0 {
                    self.from
                } else if i + 1 == n {
                    self.to
                } else if self.log_scale {
                    (self.from.ln() + t * (self.to.ln() - self.from.ln())).exp()
                } else {
                    self.from + t * (self.to - self.from)
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Problem {
    SumRate,
    Ee,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub problem: Problem,
    pub mode: SolveMode,
    pub delta: Option<f64>,
    pub csit_bound: Option<CsitBound>,
    pub p_cap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub system: SystemParams,
    pub channel: ChannelSource,
    pub seed: u64,
    pub mmwave: MmWaveSource,
    pub sweep: Option<SweepConfig>,
    pub solver: SolverConfig,
    pub oracle: GridSpec,
    pub csv_path: Option<PathBuf>,
    pub plot_script: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            system: SystemParams::default(),
            channel: ChannelSource::Rayleigh { gain_db: 100.0 },
            seed: 0,
            mmwave: MmWaveSource::Rician { gain_db: 68.0, k_factor: 10.0, seed: None },
            sweep: None,
            solver: SolverConfig {
                problem: Problem::SumRate,
                mode: SolveMode::Auto,
                delta: None,
                csit_bound: None,
                p_cap: crate::eesolver::DEFAULT_P_CAP,
            },
            oracle: GridSpec::default(),
            csv_path: None,
            plot_script: false,
        }
    }
}

struct Entries {
    map: BTreeMap<String, (usize, String)>,
}

impl Entries {
    fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((k, v)) = content.split_once('=') else {
                return Err(ConfigError::new(Some(line), content, "expected `key = value`"));
            };
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(ConfigError::new(Some(line), k, "unknown key"));
            }
            if v.is_empty() {
                return Err(ConfigError::new(Some(line), k, "missing value"));
            }
            if let Some((first, _)) = map.insert(k.to_string(), (line, v.to_string())) {
                return Err(ConfigError::new(Some(line), k, format!("already set on line {first}")));
            }
        }
        Ok(Self { map })
    }

    fn has_prefix(&self, prefix: &str) -> bool {
        self.map.keys().any(|k| k.starts_with(prefix))
    }

    fn raw(&self, key: &str) -> Option<(usize, &str)> {
        self.map.get(key).map(|(l, v)| (*l, v.as_str()))
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse::<T>()
                .map(Some)
                .map_err(|_| ConfigError::new(Some(line), key, format!("cannot parse `{v}`"))),
        }
    }

    fn float(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        let v = self.get::<f64>(key)?;
        if let Some(x) = v {
            if !x.is_finite() {
                return Err(ConfigError::new(self.raw(key).map(|r| r.0), key, "must be finite"));
            }
        }
        Ok(v)
    }

    fn positive(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        let v = self.float(key)?;
        if let Some(x) = v {
            if !(x > 0.0) {
                return Err(ConfigError::new(self.raw(key).map(|r| r.0), key, "must be > 0"));
            }
        }
        Ok(v)
    }

    fn choice<T: Copy>(&self, key: &str, options: &[(&str, T)]) -> Result<Option<T>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some((line, v)) => options.iter().find(|(name, _)| *name == v).map(|(_, t)| Some(*t)).ok_or_else(|| {
                let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
                ConfigError::new(Some(line), key, format!("`{v}` is not one of {}", names.join(", ")))
            }),
        }
    }

    fn require<T>(&self, key: &str, v: Option<T>) -> Result<T, ConfigError> {
        v.ok_or_else(|| ConfigError::new(None, key, "required"))
    }
}

impl ExperimentConfig {
    /// Parses config text; relative paths resolve against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let e = Entries::parse(text)?;
        let mut cfg = ExperimentConfig::default();

        let s = &mut cfg.system;
        if let Some(v) = e.float("system.p_max")? {
            s.p_max = v;
        }
        if let Some(v) = e.float("system.adc_a")? {
            s.adc_a = v;
        }
        if let Some(v) = e.get::<usize>("system.n_t")? {
            s.n_t = v;
        }
        if let Some(v) = e.get::<usize>("system.n_r")? {
            s.n_r = v;
        }
        if let Some(v) = e.float("system.w_sub6_max")? {
            s.w_sub6_max = v;
        }
        if let Some(v) = e.float("system.w_m_max")? {
            s.w_m_max = v;
        }
        if let Err(err) = s.validate() {
            return Err(ConfigError::new(None, "system", err.to_string()));
        }

        cfg.seed = e.get::<u64>("channel.seed")?.unwrap_or(0);
        let mode = e.choice("channel.mode", &[("rayleigh", 0), ("compound", 1), ("file", 2)])?.unwrap_or(0);
        let stray = |key: &str, wanted: &str| -> Result<(), ConfigError> {
            match e.raw(key) {
                Some((line, _)) => Err(ConfigError::new(Some(line), key, format!("only used with channel.mode = {wanted}"))),
                None => Ok(()),
            }
        };
        cfg.channel = match mode {
            0 => {
                stray("channel.path", "file")?;
                stray("channel.csit.lambda", "compound")?;
                ChannelSource::Rayleigh { gain_db: e.float("channel.gain_db")?.unwrap_or(100.0) }
            }
            1 => {
                stray("channel.path", "file")?;
                stray("channel.gain_db", "rayleigh")?;
                let lambda = e.require("channel.csit.lambda", e.positive("channel.csit.lambda")?)?;
                let epsilon = e.float("channel.csit.epsilon")?.unwrap_or(0.0);
                let sigma_e2 = e.float("channel.csit.sigma_e2")?.unwrap_or(0.0);
                if epsilon < 0.0 || sigma_e2 < 0.0 {
                    return Err(ConfigError::new(None, "channel.csit", "epsilon and sigma_e2 must be >= 0"));
                }
                ChannelSource::Compound { lambda, epsilon, sigma_e2 }
            }
            _ => {
                stray("channel.gain_db", "rayleigh")?;
                stray("channel.csit.lambda", "compound")?;
                let path: String = e.require("channel.path", e.get("channel.path")?)?;
                ChannelSource::File { path: base_dir.join(path) }
            }
        };

        cfg.mmwave = match e.float("mmwave.gain")? {
            Some(g) => {
                if g < 0.0 {
                    return Err(ConfigError::new(e.raw("mmwave.gain").map(|r| r.0), "mmwave.gain", "must be >= 0"));
                }
                for k in ["mmwave.gain_db", "mmwave.k_factor", "mmwave.seed"] {
                    if let Some((line, _)) = e.raw(k) {
                        return Err(ConfigError::new(Some(line), k, "conflicts with mmwave.gain"));
                    }
                }
                MmWaveSource::Gain(g)
            }
            None => {
                let k_factor = e.float("mmwave.k_factor")?.unwrap_or(10.0);
                if k_factor < 0.0 {
                    return Err(ConfigError::new(e.raw("mmwave.k_factor").map(|r| r.0), "mmwave.k_factor", "must be >= 0"));
                }
                MmWaveSource::Rician {
                    gain_db: e.float("mmwave.gain_db")?.unwrap_or(68.0),
                    k_factor,
                    seed: e.get("mmwave.seed")?,
                }
            }
        };

        if e.has_prefix("sweep.") {
            let variable = e.require(
                "sweep.variable",
                e.choice("sweep.variable", &[("adc_a", SweepVariable::AdcA), ("p_max", SweepVariable::PMax), ("w_m_max", SweepVariable::WmMax)])?,
            )?;
            let from = e.require("sweep.from", e.positive("sweep.from")?)?;
            let to = e.require("sweep.to", e.positive("sweep.to")?)?;
            let points = e.get::<usize>("sweep.points")?.unwrap_or(20);
            if points < 2 {
                return Err(ConfigError::new(e.raw("sweep.points").map(|r| r.0), "sweep.points", "need at least 2 points"));
            }
            let log_scale = e.get::<bool>("sweep.log_scale")?.unwrap_or(false);
            cfg.sweep = Some(SweepConfig { variable, from, to, points, log_scale });
        }

        let sv = &mut cfg.solver;
        if let Some(p) = e.choice("solver.problem", &[("sumrate", Problem::SumRate), ("ee", Problem::Ee)])? {
            sv.problem = p;
        }
        if let Some(m) = e.choice(
            "solver.mode",
            &[("auto", SolveMode::Auto), ("high_snr", SolveMode::HighSnr), ("low_snr", SolveMode::LowSnr), ("numeric", SolveMode::Numeric)],
        )? {
            sv.mode = m;
        }
        sv.delta = e.positive("solver.delta")?;
        if let Some(c) = e.positive("solver.p_cap")? {
            sv.p_cap = c;
        }
        sv.csit_bound = e
            .choice("solver.csit_bound", &[("none", None), ("lower", Some(CsitBound::Lower)), ("upper", Some(CsitBound::Upper))])?
            .flatten();
        if sv.csit_bound.is_some() {
            let line = e.raw("solver.csit_bound").map(|r| r.0);
            if !matches!(cfg.channel, ChannelSource::Compound { .. }) {
                return Err(ConfigError::new(line, "solver.csit_bound", "needs channel.mode = compound"));
            }
            if sv.problem == Problem::Ee {
                return Err(ConfigError::new(line, "solver.csit_bound", "only supported with solver.problem = sumrate"));
            }
        }

        let o = &mut cfg.oracle;
        if let Some(v) = e.get::<usize>("oracle.points")? {
            o.points_per_axis = v;
        }
        if let Some(v) = e.get::<usize>("oracle.rounds")? {
            o.refinement_rounds = v;
        }
        if let Some(v) = e.float("oracle.shrink")? {
            o.shrink_factor = v;
        }
        if let Err(err) = o.validate() {
            return Err(ConfigError::new(None, "oracle", err.to_string()));
        }

        cfg.csv_path = e.get::<String>("output.csv_path")?.map(|p| base_dir.join(p));
        cfg.plot_script = e.get::<bool>("output.plot_script")?.unwrap_or(false);
        Ok(cfg)
    }
}
