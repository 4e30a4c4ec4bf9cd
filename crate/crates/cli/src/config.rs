//! Experiment config file (JSON) and its resolution against the environment,
//! command-line flags and the dataset.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use powervar::data::{gen_synthetic, load_dataset, DataFormat, SyntheticConfig};
use powervar::{Baseline, Dataset, LoopConfig, Strategy};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SEED_VAR: &str = "POWERVAR_SEED";
pub const OUT_VAR: &str = "POWERVAR_OUT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSource {
    Synthetic(SyntheticConfig),
    File {
        path: PathBuf,
        /// Inferred from the extension when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        format: Option<DataFormat>,
    },
}

impl Default for DatasetSource {
    fn default() -> Self {
        DatasetSource::Synthetic(SyntheticConfig::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    #[serde(rename = "loop")]
    pub loop_config: LoopConfig,
    pub strategies: Vec<Strategy>,
    pub baselines: Vec<Baseline>,
    /// Explicit run seeds; `loop.base_seed .. + loop.runs` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetSource::default(),
            loop_config: LoopConfig::default(),
            strategies: Strategy::ALL.to_vec(),
            baselines: Baseline::ALL.to_vec(),
            seeds: None,
            output_dir: PathBuf::from("results"),
        }
    }
}

/// Command-line overrides; they win over the environment, which wins over
/// the file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seeds: Option<Vec<u64>>,
    pub strategies: Option<Vec<Strategy>>,
}

pub fn parse_seeds(s: &str) -> Result<Vec<u64>, String> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<u64>()
                .map_err(|_| format!("invalid seed {p:?}"))
        })
        .collect()
}

pub fn parse_strategies(s: &str) -> Result<Vec<Strategy>, String> {
    s.split(',')
        .map(|p| p.trim().parse::<Strategy>().map_err(|e| e.to_string()))
        .collect()
}

pub fn read_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg: ExperimentConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    // Dataset paths are relative to the config file.
    if let DatasetSource::File { path: data, .. } = &mut cfg.dataset {
        if data.is_relative() {
            if let Some(dir) = path.parent() {
                *data = dir.join(&*data);
            }
        }
    }
    Ok(cfg)
}

/// A config with every default filled in, plus the dataset it refers to.
pub struct Resolved {
    pub config: ExperimentConfig,
    pub dataset: Dataset,
}

impl Resolved {
    pub fn seeds(&self) -> &[u64] {
        self.config.seeds.as_deref().unwrap_or_default()
    }
}

pub fn apply_overrides(cfg: &mut ExperimentConfig, overrides: &Overrides) -> Result<(), CliError> {
    if let Ok(seed) = std::env::var(SEED_VAR) {
        cfg.loop_config.base_seed = seed
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("{SEED_VAR}={seed:?} is not a seed")))?;
        cfg.seeds = None;
    }
    if let Ok(out) = std::env::var(OUT_VAR) {
        cfg.output_dir = PathBuf::from(out);
    }
    if let Some(out) = &overrides.out {
        cfg.output_dir = out.clone();
    }
    if let Some(seeds) = &overrides.seeds {
        cfg.seeds = Some(seeds.clone());
    }
    if let Some(strategies) = &overrides.strategies {
        cfg.strategies = strategies.clone();
    }
    Ok(())
}

pub fn load_data(source: &DatasetSource) -> Result<Dataset, CliError> {
    match source {
        DatasetSource::Synthetic(cfg) => {
            gen_synthetic(cfg).map_err(|e| CliError::Config(format!("synthetic dataset: {e}")))
        }
        DatasetSource::File { path, format } => {
            let format = format.or_else(|| DataFormat::infer(path)).ok_or_else(|| {
                CliError::Config(format!(
                    "cannot infer the format of {}; set dataset.file.format to \"jsonl\" or \"csv\"",
                    path.display()
                ))
            })?;
            load_dataset(path, format).map_err(|e| CliError::Config(format!("dataset: {e}")))
        }
    }
}

/// Problems that make the config unrunnable, one message each.
pub fn findings(cfg: &ExperimentConfig, dataset: &Dataset) -> Vec<String> {
    let mut out = Vec::new();
    let lc = &cfg.loop_config;
    for check in [
        lc.acquisition.validate(),
        lc.regressor.validate(),
        lc.validate_for(dataset),
    ] {
        if let Err(e) = check {
            let msg = e.to_string();
            if !out.contains(&msg) {
                out.push(msg);
            }
        }
    }
    if cfg.strategies.is_empty() && cfg.baselines.is_empty() {
        out.push("nothing to run: strategies and baselines are both empty".into());
    }
    let distinct: BTreeSet<_> = cfg.strategies.iter().map(|s| s.name()).collect();
    if distinct.len() != cfg.strategies.len() {
        out.push("strategies contain duplicates".into());
    }
    if let Some(seeds) = &cfg.seeds {
        if seeds.is_empty() {
            out.push("seeds is empty".into());
        }
        if seeds.iter().collect::<BTreeSet<_>>().len() != seeds.len() {
            out.push("seeds contain duplicates".into());
        }
    }
    for &s in &cfg.strategies {
        let mut acq = lc.acquisition.clone();
        acq.strategy = s;
        if let Err(e) = acq.validate() {
            let msg = format!("{s}: {e}");
            if !out.iter().any(|m| m.ends_with(&e.to_string())) {
                out.push(msg);
            }
        }
    }
    out
}

/// Fills in seeds and the model input width, then checks the result.
pub fn resolve(mut cfg: ExperimentConfig) -> Result<Resolved, CliError> {
    let dataset = load_data(&cfg.dataset)?;
    if cfg.seeds.is_none() {
        cfg.seeds = Some(cfg.loop_config.run_seeds());
    }
    cfg.loop_config.runs = cfg.seeds.as_ref().map_or(0, Vec::len);
    cfg.loop_config.regressor.input_dim = dataset.dim();
    let problems = findings(&cfg, &dataset);
    if !problems.is_empty() {
        return Err(CliError::Invalid(problems));
    }
    Ok(Resolved {
        config: cfg,
        dataset,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_json() {
        let cfg = ExperimentConfig::default();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(
            serde_json::from_str::<ExperimentConfig>(&text).unwrap(),
            cfg
        );
        let minimal: ExperimentConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(minimal, cfg);
    }

    #[test]
    fn unknown_strategy_lists_the_valid_ones() {
        let err = parse_strategies("uniform,bald").unwrap_err();
        assert!(
            err.contains("uniform, topk_variance, powervariance"),
            "{err}"
        );
        let err =
            serde_json::from_str::<ExperimentConfig>(r#"{"strategies":["bald"]}"#).unwrap_err();
        assert!(err.to_string().contains("powervariance"), "{err}");
    }

    #[test]
    fn seed_lists() {
        assert_eq!(parse_seeds("3, 4,9").unwrap(), vec![3, 4, 9]);
        assert!(parse_seeds("1,x").is_err());
    }

    #[test]
    fn file_source_shape() {
        let cfg: ExperimentConfig =
            serde_json::from_str(r#"{"dataset":{"file":{"path":"d.jsonl.gz"}}}"#).unwrap();
        assert_eq!(
            cfg.dataset,
            DatasetSource::File {
                path: "d.jsonl.gz".into(),
                format: None
            }
        );
    }
}
