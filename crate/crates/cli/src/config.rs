//! Experiment configuration: one TOML file, overridden by command-line flags.

use std::path::{Path, PathBuf};

use impact_core::crossbar::{Geometry, ReadConfig};
use impact_core::data::{self, LabeledSet};
use impact_core::device::{DeviceConfig, DeviceModel, VariabilityConfig};
use impact_core::mapper::TuneConfig;
use impact_core::metrics::EnergyConstants;
use impact_core::pipeline::MapOptions;
use impact_core::trainer::Hyperparams;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    /// IDX files under `data_dir`.
    Mnist,
    /// `train_csv` / `test_csv` with a `label` column.
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub dataset: DatasetKind,
    pub data_dir: PathBuf,
    pub train_csv: Option<PathBuf>,
    pub test_csv: Option<PathBuf>,
    /// Feature bit is `value > threshold`.
    pub threshold: f64,
    pub train_limit: Option<usize>,
    pub test_limit: Option<usize>,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetKind::Mnist,
            data_dir: PathBuf::from("data/mnist"),
            train_csv: None,
            test_csv: None,
            threshold: f64::from(data::DEFAULT_THRESHOLD),
            train_limit: None,
            test_limit: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MappingConfig {
    pub exact: bool,
    pub skip_finetune: bool,
    /// Largest tolerated fraction of cells that hit the pulse cap.
    pub max_cost: f64,
    pub tune: TuneConfig,
    pub geometry: Geometry,
}

impl Default for MappingConfig {
    fn default() -> Self {
        Self {
            exact: false,
            skip_finetune: false,
            max_cost: 0.01,
            tune: TuneConfig::default(),
            geometry: Geometry::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    /// LCS-end C2C sigma; the HCS-end sigma keeps its ratio to it.
    C2cSigma,
    /// Sigma of the per-device erase-rail factor.
    D2dSigma,
    /// Standard deviation of the CSA input offset (A).
    CsaOffset,
    /// Fine-tune tolerance band (segments).
    FinetuneBand,
    /// Pre-tune tolerance band (segments).
    PretuneBand,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub param: Option<SweepParam>,
    pub values: Vec<f64>,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Root seed of every random stream.
    pub seed: u64,
    pub output_dir: PathBuf,
    pub data: DataConfig,
    pub train: Hyperparams,
    pub device: DeviceConfig,
    pub variability: VariabilityConfig,
    pub mapping: MappingConfig,
    pub read: ReadConfig,
    pub energy: EnergyConstants,
    pub sweep: SweepConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            output_dir: PathBuf::from("out"),
            data: DataConfig::default(),
            train: Hyperparams::default(),
            device: DeviceConfig::default(),
            variability: VariabilityConfig::default(),
            mapping: MappingConfig::default(),
            read: ReadConfig::default(),
            energy: EnergyConstants::default(),
            sweep: SweepConfig::default(),
        }
    }
}

/// The `[device]` and `[variability]` tables on their own.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct DeviceFile {
    pub device: DeviceConfig,
    pub variability: VariabilityConfig,
}

fn parse_toml<T: for<'de> Deserialize<'de>>(path: &Path, flag: &str) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{flag}: cannot read `{}`: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Usage(format!("{flag}: `{}`: {e}", path.display())))
}

impl ExperimentConfig {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        path.map_or_else(|| Ok(Self::default()), |p| parse_toml(p, "--config"))
    }

    pub fn apply_device_file(&mut self, path: &Path) -> CliResult<()> {
        let file: DeviceFile = parse_toml(path, "--device-config")?;
        self.device = file.device;
        self.variability = file.variability;
        Ok(())
    }

    /// Pushes the root seed into every component and validates the result.
    pub fn resolve(mut self) -> CliResult<Self> {
        self.train.seed = self.seed;
        self.variability.seed = self.seed;
        self.read.csa_seed = self.seed;
        self.train.validate()?;
        self.device.validate()?;
        self.variability.validate()?;
        self.mapping.tune.validate()?;
        self.read.validate()?;
        self.energy.validate()?;
        if !(0.0..=1.0).contains(&self.mapping.max_cost) {
            return Err(CliError::Usage(format!("mapping.max_cost must be in [0, 1], got {}", self.mapping.max_cost)));
        }
        Ok(self)
    }

    pub fn device_model(&self) -> CliResult<DeviceModel> {
        Ok(DeviceModel::new(self.device.clone(), self.variability.clone())?)
    }

    pub fn map_options(&self) -> MapOptions {
        MapOptions {
            exact: self.mapping.exact,
            skip_finetune: self.mapping.skip_finetune,
            tune: self.mapping.tune.clone(),
            read: self.read.clone(),
            geometry: self.mapping.geometry,
            seed: self.seed,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("configuration serializes to TOML")
    }

    /// Files the dataset is read from, checked to exist.
    pub fn dataset_files(&self, train: bool) -> CliResult<Vec<PathBuf>> {
        let d = &self.data;
        match d.dataset {
            DatasetKind::Mnist => {
                if !d.data_dir.is_dir() {
                    return Err(CliError::Usage(format!("--data-dir: directory `{}` does not exist", d.data_dir.display())));
                }
                let prefix = if train { "train" } else { "t10k" };
                Ok(["images-idx3-ubyte", "labels-idx1-ubyte"]
                    .iter()
                    .map(|suffix| d.data_dir.join(format!("{prefix}-{suffix}")))
                    .collect())
            }
            DatasetKind::Csv => {
                let (flag, path) = if train { ("--train-csv", &d.train_csv) } else { ("--test-csv", &d.test_csv) };
                match path {
                    Some(p) if p.is_file() => Ok(vec![p.clone()]),
                    Some(p) => Err(CliError::Usage(format!("{flag}: file `{}` does not exist", p.display()))),
                    None => Err(CliError::Usage(format!("{flag} is required for the csv dataset"))),
                }
            }
        }
    }

    pub fn load_split(&self, train: bool) -> CliResult<LabeledSet> {
        let files = self.dataset_files(train)?;
        let d = &self.data;
        let limit = if train { d.train_limit } else { d.test_limit };
        let set = match d.dataset {
            DatasetKind::Mnist => {
                if !(0.0..=255.0).contains(&d.threshold) {
                    return Err(CliError::Usage(format!("data.threshold must be in [0, 255] for MNIST, got {}", d.threshold)));
                }
                let raw = data::load_idx(&files[0], &files[1], 10)?;
                let raw = match limit {
                    Some(n) => raw.truncated(n),
                    None => raw,
                };
                data::booleanize(&raw, d.threshold as u8)
            }
            DatasetKind::Csv => {
                let table = data::load_csv(&files[0])?;
                let mut set = table.booleanize(d.threshold);
                if let Some(n) = limit {
                    set.samples.truncate(n);
                    set.labels.truncate(n);
                }
                set
            }
        };
        if set.is_empty() {
            return Err(CliError::Data("dataset has no samples".into()));
        }
        Ok(set)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_file_keeps_defaults() {
        let cfg: ExperimentConfig = toml::from_str("seed = 9\n[train]\nepochs = 3\n[mapping.tune]\nfinetune_band = 2\n").unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.train.epochs, 3);
        assert_eq!(cfg.train.clauses, Hyperparams::default().clauses);
        assert_eq!(cfg.mapping.tune.finetune_band, 2);
        assert_eq!(cfg.mapping.tune.pretune_band, TuneConfig::default().pretune_band);
    }

    #[test]
    fn resolved_config_round_trips() {
        let cfg = ExperimentConfig::default().resolve().unwrap();
        let back: ExperimentConfig = toml::from_str(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<ExperimentConfig>("[train]\nclause = 5\n").is_err());
    }

    #[test]
    fn root_seed_reaches_every_stream() {
        let cfg = ExperimentConfig { seed: 42, ..Default::default() }.resolve().unwrap();
        assert_eq!((cfg.train.seed, cfg.variability.seed, cfg.read.csa_seed, cfg.map_options().seed), (42, 42, 42, 42));
    }
}
