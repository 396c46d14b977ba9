//! Loading, or building and caching, the cost table and error surrogate.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use segbench_core::encoding::sample_random;
use segbench_core::lut::{default_scale_targets, generate_synthetic_table, CostTable};
use segbench_core::problems::Evaluators;
use segbench_core::surrogate::{train, ErrorOracle, SurrogateModel, TrainingConfig, TrainingReport};

pub const DATA_DIR_ENV: &str = "SEGBENCH_DATA_DIR";
pub const DEFAULT_DATA_DIR: &str = "segbench-data";
pub const TABLE_FILE: &str = "cost_table.json";
pub const SURROGATE_FILE: &str = "surrogate.json";
pub const REPORT_FILE: &str = "surrogate_report.json";

pub const TABLE_SEED: u64 = 0;
pub const ORACLE_SEED: u64 = 0;
pub const TRAINING_PAIRS: usize = 2048;
pub const TRAINING_SEED: u64 = 1;

/// `explicit`, else `$SEGBENCH_DATA_DIR`, else `./segbench-data`.
pub fn data_dir(explicit: Option<&Path>) -> PathBuf {
    if let Some(p) = explicit {
        return p.to_path_buf();
    }
    match std::env::var_os(DATA_DIR_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => PathBuf::from(DEFAULT_DATA_DIR),
    }
}

pub fn synthetic_table() -> Result<CostTable> {
    Ok(generate_synthetic_table(TABLE_SEED, &default_scale_targets())?)
}

/// Trains the surrogate on `pairs` genotypes labelled by the synthetic error
/// oracle.
pub fn train_surrogate(table: &CostTable, pairs: usize, seed: u64) -> Result<(SurrogateModel, TrainingReport)> {
    let oracle = ErrorOracle::new(table, ORACLE_SEED)?;
    let data: Vec<_> = sample_random(pairs, seed)?.into_iter().map(|g| (g, oracle.error(&g))).collect();
    Ok(train(&data, &TrainingConfig::default(), seed)?)
}

/// The default evaluators built in memory, without touching the disk.
pub fn synthetic_evaluators() -> Result<(Evaluators, TrainingReport)> {
    let table = synthetic_table()?;
    let (model, report) = train_surrogate(&table, TRAINING_PAIRS, TRAINING_SEED)?;
    Ok((Evaluators::new(table, model), report))
}

fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming {} into place", tmp.display()))
}

/// Reads the cost table and surrogate from `dir`, generating and saving
/// whichever is missing.
pub fn load_or_build(dir: &Path) -> Result<Evaluators> {
    fs::create_dir_all(dir).with_context(|| format!("creating data directory {}", dir.display()))?;
    let table_path = dir.join(TABLE_FILE);
    let table = if table_path.exists() {
        let s = fs::read_to_string(&table_path).with_context(|| format!("reading {}", table_path.display()))?;
        CostTable::from_json(&s).with_context(|| format!("parsing {}", table_path.display()))?
    } else {
        let t = synthetic_table()?;
        write_atomic(&table_path, &t.to_json())?;
        t
    };
    let model_path = dir.join(SURROGATE_FILE);
    let model = if model_path.exists() {
        let s = fs::read_to_string(&model_path).with_context(|| format!("reading {}", model_path.display()))?;
        SurrogateModel::from_json(&s).with_context(|| format!("parsing {}", model_path.display()))?
    } else {
        let (m, report) = train_surrogate(&table, TRAINING_PAIRS, TRAINING_SEED)?;
        write_atomic(&model_path, &m.to_json())?;
        write_atomic(&dir.join(REPORT_FILE), &serde_json::to_string_pretty(&report)?)?;
        m
    };
    Ok(Evaluators::new(table, model))
}
