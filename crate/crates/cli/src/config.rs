use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ssop_dynsys::SystemConfig;
use ssop_train::{ModelSpec, TrainConfig};

use crate::error::{CliError, Result};

/// Which generator family a config addresses.
#[derive(Debug, Clone)]
pub enum SystemChoice {
    /// Forcing-function-to-solution tasks driven by GRF inputs.
    Driven(SystemConfig),
    Izhikevich,
    /// Sine-forced systems with amplitude-partitioned splits.
    Forced(SystemConfig),
    LorenzIvp,
    Pkpd,
    /// Two-compartment kinetics alone, amounts as outputs.
    PkOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    Interpolation,
    LengthExtrapolation,
    ExSweep,
    LongTime,
    PkpdLimitedData,
    PkpdScheduleExt,
    PkpdPhysics,
}

impl Protocol {
    pub fn name(&self) -> &'static str {
        match self {
            Protocol::Interpolation => "interpolation",
            Protocol::LengthExtrapolation => "length-extrapolation",
            Protocol::ExSweep => "ex-sweep",
            Protocol::LongTime => "long-time",
            Protocol::PkpdLimitedData => "pkpd-limited-data",
            Protocol::PkpdScheduleExt => "pkpd-schedule-ext",
            Protocol::PkpdPhysics => "pkpd-physics",
        }
    }
}

/// A fully parsed experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    /// Flattened `section.key -> value` pairs, the hashing basis.
    pub raw: BTreeMap<String, String>,
    pub system_kind: String,
    pub system: SystemChoice,
    pub length_scale: f64,
    pub horizon: usize,
    pub seq_len: usize,
    pub forcing: String,
    pub model: ModelSpec,
    pub train: TrainConfig,
    pub protocol: Protocol,
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
    pub seeds: Vec<u64>,
    pub lengths: Vec<usize>,
    pub labeled: usize,
    pub unlabeled: usize,
    /// Labeled-budget ladder for the limited-data protocol.
    pub labeled_list: Vec<usize>,
    pub out_dir: PathBuf,
}

/// Parses the flat `key = value` format: `[section]` headers scope the keys,
/// `#` starts a comment, blank lines separate. Duplicate keys are rejected.
pub fn parse_flat(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    let mut section = String::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = match line.find('#') {
            Some(pos) => &line[..pos],
            None => line,
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            section = name.trim().to_string();
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Usage(format!(
                "config line {}: expected `key = value` or `[section]`, got `{line}`",
                lineno + 1
            )));
        };
        let full = if section.is_empty() {
            key.trim().to_string()
        } else {
            format!("{section}.{}", key.trim())
        };
        if map.insert(full.clone(), value.trim().to_string()).is_some() {
            return Err(CliError::Usage(format!(
                "config line {}: duplicate key `{full}`",
                lineno + 1
            )));
        }
    }
    Ok(map)
}

/// 64-bit FNV-1a over the canonical sorted `key=value` rendering, the
/// manifest's config fingerprint.
pub fn config_hash(raw: &BTreeMap<String, String>) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |bytes: &[u8]| {
        for &b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    };
    for (k, v) in raw {
        eat(k.as_bytes());
        eat(b"=");
        eat(v.as_bytes());
        eat(b"\n");
    }
    h
}

struct Reader<'a> {
    map: &'a BTreeMap<String, String>,
}

impl<'a> Reader<'a> {
    fn str_or(&self, key: &str, default: &str) -> String {
        self.map.get(key).cloned().unwrap_or_else(|| default.to_string())
    }

    fn parse<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.map.get(key) {
            None => Ok(default),
            Some(v) => v.parse::<T>().map_err(|_| {
                CliError::Usage(format!("config key `{key}`: cannot parse `{v}`"))
            }),
        }
    }

    fn list<T: std::str::FromStr>(&self, key: &str, default: Vec<T>) -> Result<Vec<T>> {
        match self.map.get(key) {
            None => Ok(default),
            Some(v) => v
                .split(',')
                .map(|item| {
                    item.trim().parse::<T>().map_err(|_| {
                        CliError::Usage(format!("config key `{key}`: cannot parse `{item}`"))
                    })
                })
                .collect(),
        }
    }

    fn bool_or(&self, key: &str, default: bool) -> Result<bool> {
        match self.map.get(key).map(String::as_str) {
            None => Ok(default),
            Some("true") | Some("1") => Ok(true),
            Some("false") | Some("0") => Ok(false),
            Some(v) => Err(CliError::Usage(format!(
                "config key `{key}`: expected true/false, got `{v}`"
            ))),
        }
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(CliError::MissingInput(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let raw = parse_flat(text)?;
        let r = Reader { map: &raw };

        let system_kind = r.str_or("system.kind", "antiderivative");
        let rho = r.parse("system.rho", 5.0)?;
        let damping = r.parse("system.damping", 0.0)?;
        let system = match system_kind.as_str() {
            "antiderivative" => SystemChoice::Driven(SystemConfig::Antiderivative),
            "nonlinear_ode" => SystemChoice::Driven(SystemConfig::NonlinearOde),
            "gravity_pendulum" => SystemChoice::Driven(SystemConfig::GravityPendulum),
            "izhikevich" => SystemChoice::Izhikevich,
            "forced_lorenz" => SystemChoice::Forced(SystemConfig::forced_lorenz(rho)),
            "duffing" => SystemChoice::Forced(SystemConfig::duffing(damping)),
            "driven_pendulum" => SystemChoice::Forced(SystemConfig::driven_pendulum(damping)),
            "lorenz_ivp" => SystemChoice::LorenzIvp,
            "pkpd" => SystemChoice::Pkpd,
            "pk_two_compartment" => SystemChoice::PkOnly,
            other => {
                return Err(CliError::Usage(format!("unknown system kind `{other}`")))
            }
        };

        let mut model = ModelSpec::by_name(&r.str_or("model.name", "mamba"))
            .map_err(|e| CliError::Usage(e.to_string()))?;
        match &mut model {
            ModelSpec::Linear => {}
            ModelSpec::Mamba { d_model, n_blocks } => {
                *d_model = r.parse("model.d_model", *d_model)?;
                *n_blocks = r.parse("model.n_blocks", *n_blocks)?;
            }
            ModelSpec::Gru { hidden } | ModelSpec::Lstm { hidden } => {
                *hidden = r.parse("model.hidden", *hidden)?;
            }
            ModelSpec::Transformer { d_model, n_blocks, heads, .. } => {
                *d_model = r.parse("model.d_model", *d_model)?;
                *n_blocks = r.parse("model.n_blocks", *n_blocks)?;
                *heads = r.parse("model.heads", *heads)?;
            }
            ModelSpec::DeepOnet { width } => {
                *width = r.parse("model.width", *width)?;
            }
            ModelSpec::Fno { width, n_layers, modes } => {
                *width = r.parse("model.width", *width)?;
                *n_layers = r.parse("model.n_layers", *n_layers)?;
                *modes = r.parse("model.modes", *modes)?;
            }
            ModelSpec::Lno { width, n_layers, poles, modes } => {
                *width = r.parse("model.width", *width)?;
                *n_layers = r.parse("model.n_layers", *n_layers)?;
                *poles = r.parse("model.poles", *poles)?;
                *modes = r.parse("model.modes", *modes)?;
            }
        }

        let defaults = TrainConfig::default();
        let target = match raw.get("train.target_train_mse") {
            None => None,
            Some(v) => Some(v.parse::<f64>().map_err(|_| {
                CliError::Usage(format!("config key `train.target_train_mse`: cannot parse `{v}`"))
            })?),
        };
        let seed = r.parse("protocol.seed", 0u64)?;
        let train = TrainConfig {
            epochs: r.parse("train.epochs", defaults.epochs)?,
            batch_size: r.parse("train.batch_size", defaults.batch_size)?,
            lr0: r.parse("train.lr0", defaults.lr0)?,
            seed,
            physics_weight: r.parse("train.physics_weight", 0.0)?,
            standardize_inputs: r.bool_or("train.standardize_inputs", true)?,
            standardize_outputs: r.bool_or(
                "train.standardize_outputs",
                // Physics-weighted runs need raw output units.
                !(r.parse("train.physics_weight", 0.0)? > 0.0),
            )?,
            shuffle: r.bool_or("train.shuffle", true)?,
            target_train_mse: target,
            labeled: None,
        };

        let protocol = match r.str_or("protocol.name", "interpolation").as_str() {
            "interpolation" => Protocol::Interpolation,
            "length-extrapolation" => Protocol::LengthExtrapolation,
            "ex-sweep" => Protocol::ExSweep,
            "long-time" => Protocol::LongTime,
            "pkpd-limited-data" => Protocol::PkpdLimitedData,
            "pkpd-schedule-ext" => Protocol::PkpdScheduleExt,
            "pkpd-physics" => Protocol::PkpdPhysics,
            other => return Err(CliError::Usage(format!("unknown protocol `{other}`"))),
        };
        if protocol == Protocol::LengthExtrapolation && !model.supports_variable_length() {
            return Err(CliError::Usage(format!(
                "protocol length-extrapolation cannot use fixed-discretization model `{}`",
                model.name()
            )));
        }

        let cfg = ExperimentConfig {
            system_kind,
            system,
            length_scale: r.parse("system.length_scale", 0.4)?,
            horizon: r.parse("system.horizon", 1usize)?,
            seq_len: r.parse("system.len", 100usize)?,
            forcing: r.str_or("system.forcing", "ood"),
            model,
            train,
            protocol,
            n_train: r.parse("protocol.n_train", 500usize)?,
            n_test: r.parse("protocol.n_test", 100usize)?,
            seed,
            seeds: r.list("protocol.seeds", vec![seed])?,
            lengths: r.list("protocol.lengths", vec![2048usize, 4096, 8192, 16384, 32768])?,
            labeled: r.parse("protocol.labeled", 5usize)?,
            unlabeled: r.parse("protocol.unlabeled", 45usize)?,
            labeled_list: r.list("protocol.labeled_list", vec![5usize, 10, 25, 45])?,
            out_dir: PathBuf::from(r.str_or("output.dir", "runs/experiment")),
            raw,
        };
        if !(cfg.length_scale > 0.0) {
            return Err(CliError::Usage(format!(
                "system.length_scale must be positive, got {}",
                cfg.length_scale
            )));
        }
        if cfg.horizon == 0 || cfg.seq_len == 0 {
            return Err(CliError::Usage("system.horizon and system.len must be positive".into()));
        }
        if cfg.n_train == 0 || cfg.n_test == 0 {
            return Err(CliError::Usage("protocol.n_train and n_test must be positive".into()));
        }
        if cfg.seeds.is_empty() {
            return Err(CliError::Usage("protocol.seeds must not be empty".into()));
        }
        if cfg.labeled == 0 || cfg.labeled_list.iter().any(|&c| c == 0) {
            return Err(CliError::Usage("labeled sample counts must be positive".into()));
        }
        Ok(cfg)
    }

    pub fn hash(&self) -> u64 {
        config_hash(&self.raw)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "
[system]
kind = gravity_pendulum
length_scale = 0.3

[model]
name = mamba
d_model = 8
n_blocks = 1

[train]
epochs = 40
lr0 = 2e-3

[protocol]
name = interpolation
n_train = 50
n_test = 10
seed = 7

[output]
dir = runs/pendulum
";

    #[test]
    fn sample_config_parses_with_overrides_and_defaults() {
        let cfg = ExperimentConfig::parse(SAMPLE).unwrap();
        assert_eq!(cfg.system_kind, "gravity_pendulum");
        assert_eq!(cfg.model, ModelSpec::Mamba { d_model: 8, n_blocks: 1 });
        assert_eq!(cfg.train.epochs, 40);
        assert_eq!(cfg.train.lr0, 2e-3);
        assert_eq!(cfg.train.batch_size, 128);
        assert_eq!(cfg.train.seed, 7);
        assert_eq!(cfg.seeds, vec![7]);
        assert_eq!(cfg.out_dir, PathBuf::from("runs/pendulum"));
    }

    #[test]
    fn hash_changes_with_any_field_and_ignores_formatting() {
        let a = ExperimentConfig::parse(SAMPLE).unwrap();
        let b = ExperimentConfig::parse(&SAMPLE.replace("epochs = 40", "epochs = 41")).unwrap();
        assert_ne!(a.hash(), b.hash());
        let c = ExperimentConfig::parse(&SAMPLE.replace("epochs = 40", "epochs   =   40 # same"))
            .unwrap();
        assert_eq!(a.hash(), c.hash());
    }

    #[test]
    fn duplicate_keys_and_bad_lines_are_rejected() {
        assert!(parse_flat("[a]\nx = 1\nx = 2").is_err());
        assert!(parse_flat("just words").is_err());
        assert!(ExperimentConfig::parse("[system]\nkind = maglev").is_err());
    }

    #[test]
    fn length_extrapolation_refuses_fixed_discretization_models() {
        let text = "[model]\nname = fno\n[protocol]\nname = length-extrapolation";
        match ExperimentConfig::parse(text) {
            Err(CliError::Usage(msg)) => assert!(msg.contains("fno")),
            other => panic!("expected usage error, got {other:?}"),
        }
    }

    #[test]
    fn physics_weight_defaults_to_raw_output_units() {
        let text = "[train]\nphysics_weight = 1.0";
        let cfg = ExperimentConfig::parse(text).unwrap();
        assert!(!cfg.train.standardize_outputs);
        assert!(cfg.train.validate().is_ok());
    }
}
