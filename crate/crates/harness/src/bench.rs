//! Steady-state timing of batch evaluation.

use std::time::Instant;

use anyhow::{bail, Result};
use serde::{Deserialize, Serialize};
use segbench_core::encoding::sample_random;
use segbench_core::indicators::mean_std;
use segbench_core::lut::NoiseSource;
use segbench_core::problems::{evaluate_batch, Evaluators, ProblemInstance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub problem: usize,
    pub batch: usize,
    pub repeats: usize,
    pub mean_seconds: f64,
    pub std_seconds: f64,
    pub samples: Vec<f64>,
}

/// Times `repeats` evaluations of a batch of `batch` random genotypes on the
/// calling thread. Each repeat draws a fresh batch.
pub fn bench_eval(
    problem: &ProblemInstance,
    evaluators: &Evaluators,
    batch: usize,
    repeats: usize,
    seed: u64,
) -> Result<BenchResult> {
    if batch == 0 {
        bail!("batch size must be at least 1");
    }
    if repeats == 0 {
        bail!("repeats must be at least 1");
    }
    let mut samples = Vec::with_capacity(repeats);
    for r in 0..repeats {
        let genotypes = sample_random(batch, seed + r as u64)?;
        let mut noise = NoiseSource::new(seed + r as u64);
        let start = Instant::now();
        let out = evaluate_batch(problem, &genotypes, evaluators, &mut noise)?;
        samples.push(start.elapsed().as_secs_f64());
        std::hint::black_box(out);
    }
    let (mean, std) = mean_std(&samples);
    Ok(BenchResult { problem: problem.id, batch, repeats, mean_seconds: mean, std_seconds: std, samples })
}
