use std::path::PathBuf;

use anyhow::{bail, Result};
use serde::{Deserialize, Serialize};
use segbench_core::moea::{population_size, Algorithm};
use segbench_core::problems::{get_problem, ProblemInstance};

pub const DEFAULT_RUNS: usize = 31;
pub const DEFAULT_EVALUATIONS: usize = 10_000;

/// One experiment: every listed algorithm on every listed problem, `runs`
/// times each with seeds `seed_base + run`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub problems: Vec<usize>,
    pub algorithms: Vec<Algorithm>,
    pub runs: usize,
    pub evaluations: usize,
    pub seed_base: u64,
    pub perturbation: bool,
    /// Not part of the serialized form, so summaries do not depend on where
    /// they were written.
    #[serde(skip)]
    pub out_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn new(problems: Vec<usize>, algorithms: Vec<Algorithm>, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            problems,
            algorithms,
            runs: DEFAULT_RUNS,
            evaluations: DEFAULT_EVALUATIONS,
            seed_base: 0,
            perturbation: true,
            out_dir: out_dir.into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.problems.is_empty() {
            bail!("no problems selected");
        }
        if self.algorithms.is_empty() {
            bail!("no algorithms selected");
        }
        if self.runs == 0 {
            bail!("runs must be at least 1");
        }
        for p in self.instances()? {
            let n = population_size(p.num_objectives)?.n;
            if self.evaluations < n {
                bail!("{} evaluations is below the population size {n} of {}", self.evaluations, p.name());
            }
        }
        Ok(())
    }

    /// Problem instances with the configured perturbation setting.
    pub fn instances(&self) -> Result<Vec<ProblemInstance>> {
        self.problems.iter().map(|&id| Ok(get_problem(id)?.with_perturbation(self.perturbation))).collect()
    }

    pub fn seed(&self, run: usize) -> u64 {
        self.seed_base + run as u64
    }
}

/// Parses a comma-separated list of problem ids, with `all` for every
/// problem and `a-b` ranges.
pub fn parse_problems(s: &str) -> Result<Vec<usize>> {
    if s.trim().eq_ignore_ascii_case("all") {
        return Ok((1..=segbench_core::problems::NUM_PROBLEMS).collect());
    }
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((a, b)) = part.split_once('-') {
            let (a, b): (usize, usize) = (a.trim().parse()?, b.trim().parse()?);
            if a > b {
                bail!("empty problem range {part}");
            }
            out.extend(a..=b);
        } else {
            out.push(part.parse()?);
        }
    }
    for &id in &out {
        get_problem(id)?;
    }
    out.dedup();
    Ok(out)
}

/// Parses a comma-separated list of algorithm names, with `all` for the six
/// in report order.
pub fn parse_algorithms(s: &str) -> Result<Vec<Algorithm>> {
    if s.trim().eq_ignore_ascii_case("all") {
        return Ok(Algorithm::ALL.to_vec());
    }
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let a: Algorithm = part.parse()?;
        if !out.contains(&a) {
            out.push(a);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn list_parsing() {
        assert_eq!(parse_problems("1, 6,15").unwrap(), vec![1, 6, 15]);
        assert_eq!(parse_problems("3-5").unwrap(), vec![3, 4, 5]);
        assert_eq!(parse_problems("all").unwrap().len(), 15);
        assert!(parse_problems("16").is_err());
        assert!(parse_problems("x").is_err());
        assert_eq!(parse_algorithms("all").unwrap(), Algorithm::ALL.to_vec());
        assert_eq!(parse_algorithms("NSGA-II,hype").unwrap(), vec![Algorithm::Nsga2, Algorithm::Hype]);
        assert!(parse_algorithms("smsemoa").is_err());
    }

    #[test]
    fn validation() {
        let mut cfg = ExperimentConfig::new(vec![1, 15], Algorithm::ALL.to_vec(), "out");
        assert!(cfg.validate().is_ok());
        cfg.evaluations = 200;
        assert!(cfg.validate().is_err());
        cfg.evaluations = 217;
        assert!(cfg.validate().is_ok());
        cfg.runs = 0;
        assert!(cfg.validate().is_err());
    }
}
