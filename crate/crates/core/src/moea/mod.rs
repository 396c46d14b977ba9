//! Evolutionary multi-objective optimizers over the integer search space.
//!
//! Every optimizer runs through [`run`], which owns the evaluation budget,
//! the random stream, and the per-generation record. Each optimizer only
//! supplies its generation step.

mod hype;
mod ibea;
mod moead;
mod nsga2;
mod nsga3;
pub mod refdirs;
mod rvea;
pub mod variation;

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoding::{random_genotype, Genotype};
use crate::indicators::{dominates_unchecked, hypervolume, non_dominated, non_dominated_sort};
use crate::lut::NoiseSource;
use crate::problems::{evaluate_batch, Evaluators, ProblemError, ProblemInstance};

pub use hype::{hype_fitness, hype_select, HYPE_SAMPLES};
pub use ibea::{ibea_select, EpsilonFitness};
pub use moead::tchebycheff;
pub use nsga2::{crowding_distance, nsga2_select};
pub use nsga3::nsga3_select;
pub use refdirs::{das_dennis, lattice_size, population_size, PopulationSize, ReferenceDirections};
pub use rvea::rvea_select;
pub use variation::VariationConfig;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MoeaError {
    #[error("no population size is defined for {0} objectives (expected 2..=7)")]
    UnsupportedObjectiveCount(usize),
    #[error("lattice resolution must be positive, got {0}")]
    InvalidLattice(usize),
    #[error("unknown algorithm {0:?}")]
    UnknownAlgorithm(String),
    #[error("selection pool of {pool} cannot fill {needed} survivors")]
    SelectionUnderflow { pool: usize, needed: usize },
    #[error("budget of {budget} evaluations is below the population size {population}")]
    BudgetTooSmall { budget: usize, population: usize },
    #[error("evaluator returned {got} vectors for {expected} genotypes")]
    EvaluatorArity { expected: usize, got: usize },
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    Nsga2,
    Nsga3,
    Moead,
    Rvea,
    Ibea,
    Hype,
}

impl Algorithm {
    /// Report column order.
    pub const ALL: [Algorithm; 6] =
        [Algorithm::Nsga2, Algorithm::Nsga3, Algorithm::Moead, Algorithm::Rvea, Algorithm::Ibea, Algorithm::Hype];

    /// Lower-case identifier used on the command line and in file names.
    pub fn id(self) -> &'static str {
        match self {
            Algorithm::Nsga2 => "nsga2",
            Algorithm::Nsga3 => "nsga3",
            Algorithm::Moead => "moead",
            Algorithm::Rvea => "rvea",
            Algorithm::Ibea => "ibea",
            Algorithm::Hype => "hype",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Algorithm::Nsga2 => "NSGA-II",
            Algorithm::Nsga3 => "NSGA-III",
            Algorithm::Moead => "MOEA/D",
            Algorithm::Rvea => "RVEA",
            Algorithm::Ibea => "IBEA",
            Algorithm::Hype => "HypE",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Algorithm {
    type Err = MoeaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase();
        let a = match key.as_str() {
            "nsga2" | "nsgaii" => Algorithm::Nsga2,
            "nsga3" | "nsgaiii" => Algorithm::Nsga3,
            "moead" => Algorithm::Moead,
            "rvea" | "rveaa" => Algorithm::Rvea,
            "ibea" => Algorithm::Ibea,
            "hype" => Algorithm::Hype,
            _ => return Err(MoeaError::UnknownAlgorithm(s.to_string())),
        };
        Ok(a)
    }
}

impl Serialize for Algorithm {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.id())
    }
}

impl<'de> Deserialize<'de> for Algorithm {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A genotype with its normalized objective vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub genotype: Genotype,
    pub objectives: Vec<f64>,
    /// Non-domination rank, 0 for the first front.
    pub rank: usize,
    /// Secondary selection key; its meaning depends on the optimizer.
    pub fitness: f64,
}

impl Individual {
    pub fn new(genotype: Genotype, objectives: Vec<f64>) -> Self {
        Self { genotype, objectives, rank: 0, fitness: 0.0 }
    }
}

/// Maps genotypes to normalized objective vectors.
pub trait Evaluate {
    fn evaluate(&mut self, genotypes: &[Genotype]) -> Result<Vec<Vec<f64>>, MoeaError>;
}

/// Evaluates a benchmark problem with its own noise stream.
pub struct ProblemEvaluator<'a> {
    problem: &'a ProblemInstance,
    evaluators: &'a Evaluators,
    noise: NoiseSource,
}

impl<'a> ProblemEvaluator<'a> {
    pub fn new(problem: &'a ProblemInstance, evaluators: &'a Evaluators, seed: u64) -> Self {
        Self { problem, evaluators, noise: NoiseSource::new(seed) }
    }
}

impl Evaluate for ProblemEvaluator<'_> {
    fn evaluate(&mut self, genotypes: &[Genotype]) -> Result<Vec<Vec<f64>>, MoeaError> {
        let out = evaluate_batch(self.problem, genotypes, self.evaluators, &mut self.noise)?;
        Ok(out.into_iter().map(|v| v.normalized).collect())
    }
}

impl<F> Evaluate for F
where
    F: FnMut(&Genotype) -> Vec<f64>,
{
    fn evaluate(&mut self, genotypes: &[Genotype]) -> Result<Vec<Vec<f64>>, MoeaError> {
        Ok(genotypes.iter().map(self).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub gen: usize,
    pub evals: usize,
    /// Objective vectors of the population's non-dominated members.
    pub front: Vec<Vec<f64>>,
    pub hv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontMember {
    pub genotype: Genotype,
    pub objectives: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub algorithm: Algorithm,
    pub num_objectives: usize,
    pub seed: u64,
    pub population_size: usize,
    pub budget: usize,
    pub generations: Vec<GenerationRecord>,
    /// Distinct non-dominated genotypes of the final population.
    pub final_front: Vec<FrontMember>,
}

impl RunRecord {
    pub fn final_hv(&self) -> f64 {
        self.generations.last().map_or(0.0, |g| g.hv)
    }
}

/// Shared state handed to each generation step.
pub(crate) struct Context<'e> {
    pub rng: ChaCha8Rng,
    pub evaluator: &'e mut dyn Evaluate,
    pub variation: VariationConfig,
    pub m: usize,
    pub n: usize,
    pub evals: usize,
    pub budget: usize,
    /// Index of the generation being produced, 1-based.
    pub gen: usize,
    pub max_gen: usize,
}

impl Context<'_> {
    pub fn evaluate(&mut self, genotypes: Vec<Genotype>) -> Result<Vec<Individual>, MoeaError> {
        debug_assert!(self.evals + genotypes.len() <= self.budget);
        let objs = self.evaluator.evaluate(&genotypes)?;
        if objs.len() != genotypes.len() {
            return Err(MoeaError::EvaluatorArity { expected: genotypes.len(), got: objs.len() });
        }
        self.evals += genotypes.len();
        Ok(genotypes.into_iter().zip(objs).map(|(g, f)| Individual::new(g, f)).collect())
    }

    pub fn remaining(&self) -> usize {
        self.budget - self.evals
    }

    /// Fraction of the budget consumed so far.
    pub fn progress(&self) -> f64 {
        self.evals as f64 / self.budget as f64
    }

    /// `k` offspring from the given parents, paired in order.
    pub fn breed(&mut self, parents: &[&Individual], k: usize) -> Vec<Genotype> {
        let gs: Vec<Genotype> = parents.iter().map(|p| p.genotype).collect();
        variation::offspring(&gs, k, &self.variation, &mut self.rng)
    }
}

pub(crate) trait Optimizer {
    fn initialize(&mut self, _ctx: &mut Context<'_>, _pop: &mut Vec<Individual>) -> Result<(), MoeaError> {
        Ok(())
    }

    /// Spends exactly `k` evaluations and returns the next population.
    fn step(&mut self, ctx: &mut Context<'_>, pop: Vec<Individual>, k: usize) -> Result<Vec<Individual>, MoeaError>;
}

/// Binary tournament over `pop` by `better(a, b)`; ties go to the first draw.
pub(crate) fn tournament<'p, R: Rng + ?Sized>(
    pop: &'p [Individual],
    count: usize,
    rng: &mut R,
    better: impl Fn(&Individual, &Individual) -> bool,
) -> Vec<&'p Individual> {
    (0..count)
        .map(|_| {
            let a = &pop[rng.gen_range(0..pop.len())];
            let b = &pop[rng.gen_range(0..pop.len())];
            if better(b, a) {
                b
            } else {
                a
            }
        })
        .collect()
}

/// Shuffles the pool so that index order breaks any remaining ties.
pub(crate) fn shuffled<R: Rng + ?Sized>(mut pool: Vec<Individual>, rng: &mut R) -> Vec<Individual> {
    pool.shuffle(rng);
    pool
}

pub(crate) fn objectives_of(pop: &[Individual]) -> Vec<Vec<f64>> {
    pop.iter().map(|i| i.objectives.clone()).collect()
}

pub(crate) fn non_dominated_sort_of(pop: &[Individual]) -> Vec<Vec<usize>> {
    non_dominated_sort(&objectives_of(pop))
}

/// Number of generations after the initial one: `ceil((budget - N) / N)`.
pub fn generations_after_initial(budget: usize, n: usize) -> usize {
    (budget - n).div_ceil(n)
}

fn hv_seed(seed: u64, gen: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ gen as u64
}

fn record(pop: &[Individual], gen: usize, evals: usize, seed: u64) -> GenerationRecord {
    let objs = objectives_of(pop);
    let mut front: Vec<Vec<f64>> = non_dominated(&objs).into_iter().map(|i| objs[i].clone()).collect();
    front.sort_by(|a, b| a.partial_cmp(b).expect("finite objectives"));
    front.dedup();
    let m = objs.first().map_or(0, Vec::len);
    let hv = hypervolume(&front, &vec![1.0; m], hv_seed(seed, gen)).map_or(0.0, |e| e.value);
    GenerationRecord { gen, evals, front, hv }
}

fn final_front(pop: &[Individual]) -> Vec<FrontMember> {
    let mut members: Vec<FrontMember> = pop
        .iter()
        .filter(|a| !pop.iter().any(|b| dominates_unchecked(&b.objectives, &a.objectives)))
        .map(|i| FrontMember { genotype: i.genotype, objectives: i.objectives.clone() })
        .collect();
    members.sort_by(|a, b| a.genotype.genes().cmp(b.genotype.genes()));
    members.dedup_by(|a, b| a.genotype == b.genotype);
    members
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub num_objectives: usize,
    pub budget: usize,
    pub seed: u64,
    pub variation: VariationConfig,
}

impl RunConfig {
    pub fn new(algorithm: Algorithm, num_objectives: usize, budget: usize, seed: u64) -> Self {
        Self { algorithm, num_objectives, budget, seed, variation: VariationConfig::default() }
    }
}

/// Runs one optimizer until exactly `cfg.budget` evaluations are spent.
///
/// Generation 0 is the random initial population; every later generation
/// produces `N` offspring except the last, which produces whatever remains.
pub fn run_with(cfg: &RunConfig, evaluator: &mut dyn Evaluate) -> Result<RunRecord, MoeaError> {
    let ps = population_size(cfg.num_objectives)?;
    let n = ps.n;
    if cfg.budget < n {
        return Err(MoeaError::BudgetTooSmall { budget: cfg.budget, population: n });
    }
    let mut ctx = Context {
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        evaluator,
        variation: cfg.variation,
        m: cfg.num_objectives,
        n,
        evals: 0,
        budget: cfg.budget,
        gen: 0,
        max_gen: generations_after_initial(cfg.budget, n),
    };
    let mut opt: Box<dyn Optimizer> = match cfg.algorithm {
        Algorithm::Nsga2 => Box::new(nsga2::Nsga2),
        Algorithm::Nsga3 => Box::new(nsga3::Nsga3::new(cfg.num_objectives, ps)?),
        Algorithm::Moead => Box::new(moead::Moead::new(cfg.num_objectives, ps)?),
        Algorithm::Rvea => Box::new(rvea::Rvea::new(cfg.num_objectives, ps)?),
        Algorithm::Ibea => Box::new(ibea::Ibea::default()),
        Algorithm::Hype => Box::new(hype::Hype::default()),
    };

    let initial: Vec<Genotype> = (0..n).map(|_| random_genotype(&mut ctx.rng)).collect();
    let mut pop = ctx.evaluate(initial)?;
    opt.initialize(&mut ctx, &mut pop)?;
    let mut generations = vec![record(&pop, 0, ctx.evals, cfg.seed)];
    while ctx.remaining() > 0 {
        ctx.gen += 1;
        let k = ctx.remaining().min(n);
        pop = opt.step(&mut ctx, pop, k)?;
        generations.push(record(&pop, ctx.gen, ctx.evals, cfg.seed));
    }
    debug_assert_eq!(ctx.evals, cfg.budget);

    Ok(RunRecord {
        algorithm: cfg.algorithm,
        num_objectives: cfg.num_objectives,
        seed: cfg.seed,
        population_size: n,
        budget: cfg.budget,
        generations,
        final_front: final_front(&pop),
    })
}

/// Runs `algorithm` on a benchmark problem. Evaluation noise is seeded with
/// the run seed.
pub fn run(
    algorithm: Algorithm,
    problem: &ProblemInstance,
    budget: usize,
    seed: u64,
    evaluators: &Evaluators,
) -> Result<RunRecord, MoeaError> {
    let mut evaluator = ProblemEvaluator::new(problem, evaluators, seed);
    run_with(&RunConfig::new(algorithm, problem.num_objectives, budget, seed), &mut evaluator)
}
