//! Run configuration: preset defaults overlaid with a TOML file.

use std::path::PathBuf;

use hamlearn::autoencoder::{TrainConfig, DEFAULT_DROP_RATIO};
use hamlearn::protocols::{preset_spec, ProtocolSpec, PRESET_NAMES};
use hamlearn::reconstruct::{ReconstructConfig, Stage};
use serde::{Deserialize, Serialize};

use crate::Failure;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub threads: usize,
    pub n_sites: usize,
    pub protocol: ProtocolSpec,
    pub dataset: DatasetSection,
    pub autoencoder: AutoencoderSection,
    pub reconstruct: ReconstructConfig,
    pub beta: BetaSection,
    pub heating: HeatingSection,
    pub evolve: EvolveSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    pub max_support: usize,
    /// Inverse temperatures of static data, or of the initial states of driven data.
    pub beta_grid: Vec<f64>,
    /// Measurement cycles of driven data.
    pub cycles: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotation: Option<f64>,
    /// Typicality members per state; exact densities when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub typicality_samples: Option<usize>,
    pub train_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AutoencoderSection {
    pub widths: Vec<usize>,
    pub restarts: usize,
    pub drop_ratio: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub floor: Option<f64>,
    /// Bottleneck width of the network whose coordinates are exported.
    pub latent_width: usize,
    pub train: TrainConfig,
}

/// Effective temperature from early stroboscopic dynamics (driven data only).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetaSection {
    pub enabled: bool,
    pub cycles: Vec<usize>,
    pub grid_min: f64,
    pub grid_max: f64,
    pub grid_points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatingSection {
    /// First cycle of each averaging window.
    pub checkpoints: Vec<usize>,
    pub window: usize,
    pub max_support: usize,
    pub reconstruct: ReconstructConfig,
    /// Energy trajectory sampling: every `energy_step` cycles up to `energy_until`.
    pub energy_step: usize,
    pub energy_until: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveSection {
    /// Static protocols: domain-wall magnetization on `[0, t_max]` with step `dt`.
    pub t_max: f64,
    pub dt: f64,
    /// Driven protocols: energy every `cycle_step` cycles up to `n_cycles`.
    pub n_cycles: usize,
    pub cycle_step: usize,
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

fn reconstruct(s0: usize, k0: usize, steps: Vec<Stage>) -> ReconstructConfig {
    ReconstructConfig { s0, k0, steps, ..ReconstructConfig::default() }
}

/// Defaults for a named preset (chains scaled to exact-diagonalization size).
pub fn preset(name: &str) -> Result<RunConfig, Failure> {
    let protocol = preset_spec(name)
        .ok_or_else(|| Failure::Config(format!("unknown preset `{name}` (known: {})", PRESET_NAMES.join(", "))))?;
    let mut cfg = RunConfig {
        preset: Some(name.to_string()),
        out: None,
        seed: 0,
        threads: 1,
        n_sites: 10,
        protocol,
        dataset: DatasetSection {
            max_support: 3,
            beta_grid: linspace(0.05, 0.5, 10),
            cycles: Vec::new(),
            rotation: None,
            typicality_samples: None,
            train_fraction: 0.75,
        },
        autoencoder: AutoencoderSection {
            widths: vec![1, 2, 3],
            restarts: 3,
            drop_ratio: DEFAULT_DROP_RATIO,
            floor: None,
            latent_width: 1,
            train: TrainConfig { hidden: 64, learning_rate: 1e-3, epochs: 3000, ..TrainConfig::default() },
        },
        reconstruct: reconstruct(3, 20, Vec::new()),
        beta: BetaSection { enabled: false, cycles: (0..=5).collect(), grid_min: 0.005, grid_max: 1.0, grid_points: 200 },
        heating: HeatingSection {
            checkpoints: vec![0, 10, 20, 30, 40],
            window: 10,
            max_support: 5,
            reconstruct: reconstruct(4, 60, vec![Stage { support: 5, total: 160 }]),
            energy_step: 10,
            energy_until: 200,
        },
        evolve: EvolveSection { t_max: 5.0, dt: 0.1, n_cycles: 200, cycle_step: 10 },
    };
    match name {
        "local" => cfg.n_sites = 8,
        "fig2" => {
            cfg.dataset.max_support = 4;
            cfg.reconstruct = reconstruct(3, 20, vec![Stage { support: 4, total: 40 }]);
        }
        "fig3" => {
            cfg.dataset.beta_grid = linspace(0.05, 0.40, 8);
            cfg.dataset.cycles = vec![50];
            cfg.reconstruct = reconstruct(3, 30, Vec::new());
            cfg.beta.enabled = true;
            cfg.evolve.n_cycles = 100;
            cfg.evolve.cycle_step = 1;
        }
        "fig4-floquet" => {
            cfg.dataset.beta_grid = linspace(0.05, 0.45, 16);
            cfg.dataset.cycles = vec![180];
        }
        "fig4-rmd" => {
            cfg.dataset.beta_grid = linspace(0.05, 0.45, 16);
            cfg.dataset.cycles = vec![1000];
            cfg.heating.checkpoints = vec![0, 300, 600, 900, 1200];
            cfg.heating.reconstruct = reconstruct(4, 40, vec![Stage { support: 5, total: 120 }]);
            cfg.heating.energy_step = 100;
            cfg.heating.energy_until = 4000;
            cfg.evolve.n_cycles = 4000;
            cfg.evolve.cycle_step = 100;
        }
        _ => {}
    }
    Ok(cfg)
}

/// Later values win; tables merge key by key, except a protocol of another kind
/// which replaces the preset one.
fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o))
                if k != "protocol" || o.get("kind").is_none_or(|kind| Some(kind) == b.get("kind")) =>
            {
                merge(b, o)
            }
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Resolves the configuration from an optional TOML text and command-line overrides.
pub fn resolve(text: Option<&str>, preset_flag: Option<&str>, seed: Option<u64>, threads: Option<usize>) -> Result<RunConfig, Failure> {
    let user: toml::Table = match text {
        Some(t) => toml::from_str(t).map_err(|e| Failure::Config(format!("config: {}", e.message())))?,
        None => toml::Table::new(),
    };
    let named = preset_flag
        .map(str::to_string)
        .or_else(|| user.get("preset").and_then(|v| v.as_str()).map(str::to_string))
        .unwrap_or_else(|| "local".to_string());
    let base = preset(&named)?;
    let mut table = toml::Table::try_from(&base).map_err(|e| Failure::Config(e.to_string()))?;
    merge(&mut table, user);
    table.insert("preset".into(), toml::Value::String(named));
    // round-trip through text so errors carry the offending key
    let text = toml::to_string(&table).map_err(|e| Failure::Config(e.to_string()))?;
    let mut cfg: RunConfig = toml::from_str(&text).map_err(|e| Failure::Config(format!("config: {}", e.message())))?;
    if let Some(s) = seed {
        cfg.seed = s;
        cfg.autoencoder.train.seed = s;
    }
    if let Some(t) = threads {
        cfg.threads = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), Failure> {
        let bad = |m: String| Err(Failure::Config(m));
        if self.threads == 0 {
            return bad("threads must be at least 1".into());
        }
        if self.n_sites < 2 {
            return bad(format!("n_sites = {} is too small", self.n_sites));
        }
        if !(self.dataset.train_fraction > 0.0 && self.dataset.train_fraction < 1.0) {
            return bad(format!("dataset.train_fraction = {} must lie in (0, 1)", self.dataset.train_fraction));
        }
        if self.beta.enabled && (self.beta.grid_points < 2 || !(self.beta.grid_min > 0.0) || self.beta.grid_max <= self.beta.grid_min) {
            return bad("beta grid needs 2+ points on a positive increasing range".into());
        }
        if self.evolve.dt <= 0.0 || self.evolve.cycle_step == 0 || self.heating.energy_step == 0 {
            return bad("time and cycle steps must be positive".into());
        }
        self.protocol.validate().map_err(|e| Failure::Config(e.to_string()))?;
        self.autoencoder.train.validate().map_err(|e| Failure::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn beta_grid(&self) -> Vec<f64> {
        linspace(self.beta.grid_min, self.beta.grid_max, self.beta.grid_points)
    }
}
