//! Multi-run execution with one JSONL file per run and resume by skipping
//! finished runs.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use segbench_core::encoding::Genotype;
use segbench_core::moea::{run, Algorithm, FrontMember, GenerationRecord};
use segbench_core::problems::{Evaluators, ProblemInstance};

use crate::config::ExperimentConfig;
use crate::report::{build_summary, save_config, write_plot_data, write_summary, Summary};

/// First line of a run file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunHeader {
    pub problem: usize,
    pub algorithm: Algorithm,
    pub run: usize,
    pub seed: u64,
    #[serde(rename = "M")]
    pub num_objectives: usize,
    pub population_size: usize,
    pub budget: usize,
    pub perturbation: bool,
}

/// Last line of a finished run file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFinal {
    pub hv: f64,
    pub generations: usize,
    pub front: Vec<FrontMember>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum RunLine {
    Run(RunHeader),
    Generation(GenerationRecord),
    Final(RunFinal),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoredRun {
    pub header: RunHeader,
    pub generations: Vec<GenerationRecord>,
    pub result: RunFinal,
}

impl StoredRun {
    pub fn hv_trace(&self) -> Vec<f64> {
        self.generations.iter().map(|g| g.hv).collect()
    }
}

pub fn run_path(out: &Path, problem: usize, algorithm: Algorithm, run: usize) -> PathBuf {
    out.join("runs").join(format!("mop{problem}")).join(algorithm.id()).join(format!("run{run:03}.jsonl"))
}

/// Parses a run file; `Ok(None)` when it is absent or was never finished.
pub fn load_run(path: &Path) -> Result<Option<StoredRun>> {
    let file = match fs::File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(e).with_context(|| format!("opening {}", path.display())),
    };
    let mut header = None;
    let mut generations = Vec::new();
    let mut result = None;
    for line in BufReader::new(file).lines() {
        let line = line.with_context(|| format!("reading {}", path.display()))?;
        match serde_json::from_str::<RunLine>(&line) {
            Ok(RunLine::Run(h)) => header = Some(h),
            Ok(RunLine::Generation(g)) => generations.push(g),
            Ok(RunLine::Final(f)) => result = Some(f),
            // a truncated trailing line means the run was interrupted
            Err(_) => return Ok(None),
        }
    }
    match (header, result) {
        (Some(header), Some(result)) => Ok(Some(StoredRun { header, generations, result })),
        _ => Ok(None),
    }
}

/// Runs one (problem, algorithm, run) triple and writes its file.
pub fn execute_run(
    problem: &ProblemInstance,
    algorithm: Algorithm,
    run_index: usize,
    seed: u64,
    budget: usize,
    evaluators: &Evaluators,
    path: &Path,
) -> Result<StoredRun> {
    let start = Instant::now();
    let record = run(algorithm, problem, budget, seed, evaluators)
        .with_context(|| format!("{} on {} run {run_index}", algorithm.display_name(), problem.name()))?;
    let seconds = start.elapsed().as_secs_f64();
    let header = RunHeader {
        problem: problem.id,
        algorithm,
        run: run_index,
        seed,
        num_objectives: problem.num_objectives,
        population_size: record.population_size,
        budget,
        perturbation: problem.perturbation,
    };
    let result = RunFinal {
        hv: record.final_hv(),
        generations: record.generations.len(),
        front: record.final_front,
        seconds,
    };
    let stored = StoredRun { header, generations: record.generations, result };
    write_run(path, &stored)?;
    Ok(stored)
}

fn write_run(path: &Path, run: &StoredRun) -> Result<()> {
    let dir = path.parent().ok_or_else(|| anyhow!("run path {} has no parent", path.display()))?;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut buf = Vec::new();
    let mut line = |l: RunLine| -> Result<()> {
        serde_json::to_writer(&mut buf, &l)?;
        buf.push(b'\n');
        Ok(())
    };
    line(RunLine::Run(run.header.clone()))?;
    for g in &run.generations {
        line(RunLine::Generation(g.clone()))?;
    }
    line(RunLine::Final(run.result.clone()))?;
    let tmp = path.with_extension("jsonl.tmp");
    let mut f = fs::File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
    f.write_all(&buf).with_context(|| format!("writing {}", tmp.display()))?;
    f.sync_all().ok();
    fs::rename(&tmp, path).with_context(|| format!("moving {} into place", path.display()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Task {
    pub problem: usize,
    pub algorithm: Algorithm,
    pub run: usize,
}

/// Every triple of the experiment, problem-major.
pub fn tasks(cfg: &ExperimentConfig) -> Vec<Task> {
    let mut out = Vec::new();
    for &problem in &cfg.problems {
        for &algorithm in &cfg.algorithms {
            for run in 0..cfg.runs {
                out.push(Task { problem, algorithm, run });
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub executed: usize,
    pub skipped: usize,
    pub summary: Summary,
}

/// Validates `cfg`, runs every unfinished triple on up to `jobs` threads,
/// then writes the summary files.
pub fn run_experiment(cfg: &ExperimentConfig, evaluators: &Evaluators, jobs: usize) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.out_dir).with_context(|| format!("creating output directory {}", cfg.out_dir.display()))?;
    save_config(cfg)?;
    let instances = cfg.instances()?;
    let all = tasks(cfg);
    let mut pending = Vec::new();
    for t in &all {
        let path = run_path(&cfg.out_dir, t.problem, t.algorithm, t.run);
        match load_run(&path)? {
            Some(stored) if matches_config(&stored.header, cfg, t) => {}
            Some(_) => bail!("{} was produced by a different configuration", path.display()),
            None => pending.push(*t),
        }
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build()?;
    pool.install(|| {
        pending.par_iter().try_for_each(|t| -> Result<()> {
            let problem = instances.iter().find(|p| p.id == t.problem).expect("instance of a listed problem");
            let path = run_path(&cfg.out_dir, t.problem, t.algorithm, t.run);
            execute_run(problem, t.algorithm, t.run, cfg.seed(t.run), cfg.evaluations, evaluators, &path)?;
            Ok(())
        })
    })?;
    let summary = build_summary(cfg)?;
    write_summary(&cfg.out_dir, &summary)?;
    write_plot_data(cfg)?;
    Ok(ExperimentOutcome { executed: pending.len(), skipped: all.len() - pending.len(), summary })
}

fn matches_config(h: &RunHeader, cfg: &ExperimentConfig, t: &Task) -> bool {
    h.problem == t.problem
        && h.algorithm == t.algorithm
        && h.run == t.run
        && h.seed == cfg.seed(t.run)
        && h.budget == cfg.evaluations
        && h.perturbation == cfg.perturbation
}

/// Genotypes stored in a run file, for validity checks.
pub fn stored_genotypes(run: &StoredRun) -> Vec<Genotype> {
    run.result.front.iter().map(|m| m.genotype).collect()
}
