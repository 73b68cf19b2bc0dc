//! Run configuration: JSON schema, loading and the identifying hash.

use std::path::PathBuf;

use anyhow::{Context, Result};
use boolperc::estimators::CriticalMethod;
use boolperc::ModelSpec;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

fn default_u_grid() -> usize {
    33
}

fn default_k() -> u32 {
    4
}

fn default_threshold() -> f64 {
    0.05
}

/// Command and its parameters, `{"command": "...", "params": {...}}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", content = "params", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Command {
    Theta {
        s_grid: Vec<f64>,
    },
    Crossing {
        r_list: Vec<f64>,
    },
    Critical {
        method: CriticalMethod,
        r_list: Vec<f64>,
        bracket: (f64, f64),
        #[serde(default = "default_threshold")]
        threshold: f64,
    },
    Osss {
        s_list: Vec<f64>,
        l: f64,
        r: f64,
    },
    Russo {
        r: f64,
        d_lambda: f64,
        #[serde(default = "default_k")]
        k: u32,
    },
    Renorm {
        r_list: Vec<f64>,
        alpha: f64,
        delta: f64,
        #[serde(default = "default_u_grid")]
        u_grid_size: usize,
    },
    HeavyTail {
        alpha: f64,
        eta_exp: f64,
        epsilon: f64,
        r0: f64,
        r: f64,
    },
    Ratio {
        r_grid: Vec<f64>,
    },
    DecayFit {
        s_grid: Vec<f64>,
        s_min: f64,
    },
    Sharpness {
        lambda_grid: Vec<f64>,
        lambda_c: f64,
        r_proxy: f64,
    },
    Vacant {
        r: f64,
        h: f64,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Theta { .. } => "theta",
            Command::Crossing { .. } => "crossing",
            Command::Critical { .. } => "critical",
            Command::Osss { .. } => "osss",
            Command::Russo { .. } => "russo",
            Command::Renorm { .. } => "renorm",
            Command::HeavyTail { .. } => "heavy-tail",
            Command::Ratio { .. } => "ratio",
            Command::DecayFit { .. } => "decay-fit",
            Command::Sharpness { .. } => "sharpness",
            Command::Vacant { .. } => "vacant",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub lambda: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub command: Command,
    pub seed: u64,
    pub n_reps: u64,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub sweep: Option<Sweep>,
}

/// Wire form: the command name and its parameters sit next to the other keys.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    model: ModelSpec,
    command: String,
    #[serde(default)]
    params: Value,
    #[serde(default)]
    seed: u64,
    n_reps: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    threads: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sweep: Option<Sweep>,
}

/// A configuration that failed to parse; maps to exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

/// `power_law_c1` laws may omit `d`; it defaults to the model dimension.
fn fill_law_dimension(law: &mut Value, d: &Value) {
    let Some(obj) = law.as_object_mut() else { return };
    match obj.get("kind").and_then(Value::as_str) {
        Some("power_law_c1") if !obj.contains_key("d") => {
            obj.insert("d".into(), d.clone());
        }
        Some("truncated_at") => {
            if let Some(inner) = obj.get_mut("inner") {
                fill_law_dimension(inner, d);
            }
        }
        _ => {}
    }
}

pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
    let mut value: Value = serde_json::from_str(text).map_err(|e| ConfigError(format!("invalid JSON: {e}")))?;
    if let Some(model) = value.get_mut("model").and_then(Value::as_object_mut) {
        if let Some(d) = model.get("d").cloned() {
            if let Some(law) = model.get_mut("law") {
                fill_law_dimension(law, &d);
            }
        }
    }
    let raw: RawConfig = serde_path_to_error::deserialize(value).map_err(path_error)?;
    let tagged = serde_json::json!({ "command": raw.command, "params": raw.params });
    let command: Command = serde_path_to_error::deserialize(tagged).map_err(path_error)?;
    Ok(RunConfig {
        model: raw.model,
        command,
        seed: raw.seed,
        n_reps: raw.n_reps,
        threads: raw.threads,
        out: raw.out,
        sweep: raw.sweep,
    })
}

fn path_error(e: serde_path_to_error::Error<serde_json::Error>) -> ConfigError {
    let path = e.path().to_string();
    ConfigError(format!("config error at `{path}`: {}", e.into_inner()))
}

pub fn load(path: &std::path::Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
    parse(&text).map_err(anyhow::Error::from).with_context(|| format!("in {}", path.display()))
}

impl RunConfig {
    /// One configuration per swept intensity, or just this one.
    pub fn expand(&self) -> Vec<RunConfig> {
        match &self.sweep {
            None => vec![self.clone()],
            Some(s) => s
                .lambda
                .iter()
                .map(|&l| RunConfig { model: self.model.with_lambda(l), sweep: None, ..self.clone() })
                .collect(),
        }
    }

    /// Canonical JSON of everything that determines the outputs: thread count
    /// and output location are left out.
    pub fn canonical(&self) -> String {
        let tagged = serde_json::to_value(&self.command).expect("command serializes");
        let raw = RawConfig {
            model: self.model.clone(),
            command: tagged["command"].as_str().expect("adjacent tag").to_string(),
            params: tagged["params"].clone(),
            seed: self.seed,
            n_reps: self.n_reps,
            threads: None,
            out: None,
            sweep: self.sweep.clone(),
        };
        // serde_json maps are ordered, so keys come out sorted
        let value = serde_json::to_value(&raw).expect("config serializes");
        serde_json::to_string(&value).expect("value serializes")
    }

    /// First 64 bits of the SHA-256 of the canonical JSON, as hex.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}
