use rand::seq::SliceRandom;
use rand::Rng;

use super::refdirs::{das_dennis, PopulationSize};
use super::{Context, Individual, MoeaError, Optimizer};

const NEIGHBOURS: usize = 20;
const NEIGHBOUR_MATING: f64 = 0.9;
const MAX_REPLACED: usize = 2;

/// Weighted Tchebycheff scalarization. Zero weights count as `1e-6`.
pub fn tchebycheff(f: &[f64], weight: &[f64], ideal: &[f64]) -> f64 {
    f.iter()
        .zip(weight)
        .zip(ideal)
        .map(|((v, w), z)| w.max(1e-6) * (v - z).abs())
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Steady-state decomposition: one subproblem solution per weight vector.
pub(crate) struct Moead {
    weights: Vec<Vec<f64>>,
    neighbours: Vec<Vec<usize>>,
    ideal: Vec<f64>,
}

impl Moead {
    pub fn new(m: usize, ps: PopulationSize) -> Result<Self, MoeaError> {
        let weights = das_dennis(m, ps.h1, ps.h2)?.vectors;
        let t = NEIGHBOURS.min(weights.len());
        let neighbours = weights
            .iter()
            .map(|w| {
                let mut idx: Vec<usize> = (0..weights.len()).collect();
                let d = |j: usize| w.iter().zip(&weights[j]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
                idx.sort_by(|&a, &b| d(a).total_cmp(&d(b)));
                idx.truncate(t);
                idx
            })
            .collect();
        Ok(Self { weights, neighbours, ideal: vec![f64::INFINITY; m] })
    }

    fn update_ideal(&mut self, f: &[f64]) {
        for (z, v) in self.ideal.iter_mut().zip(f) {
            *z = z.min(*v);
        }
    }
}

impl Optimizer for Moead {
    fn initialize(&mut self, _ctx: &mut Context<'_>, pop: &mut Vec<Individual>) -> Result<(), MoeaError> {
        for ind in pop.iter() {
            self.update_ideal(&ind.objectives);
        }
        Ok(())
    }

    fn step(&mut self, ctx: &mut Context<'_>, mut pop: Vec<Individual>, k: usize) -> Result<Vec<Individual>, MoeaError> {
        let mut order: Vec<usize> = (0..pop.len()).collect();
        order.shuffle(&mut ctx.rng);
        for &i in order.iter().take(k) {
            let mut pool: Vec<usize> = if ctx.rng.gen::<f64>() < NEIGHBOUR_MATING {
                self.neighbours[i].clone()
            } else {
                (0..pop.len()).collect()
            };
            let a = pool[ctx.rng.gen_range(0..pool.len())];
            let mut b = pool[ctx.rng.gen_range(0..pool.len())];
            if b == a && pool.len() > 1 {
                b = pool[(pool.iter().position(|&p| p == a).unwrap() + 1) % pool.len()];
            }
            let child = ctx.breed(&[&pop[a], &pop[b]], 1);
            let child = ctx.evaluate(child)?.pop().expect("one child");
            self.update_ideal(&child.objectives);
            pool.shuffle(&mut ctx.rng);
            let mut replaced = 0;
            for j in pool {
                if replaced == MAX_REPLACED {
                    break;
                }
                let w = &self.weights[j];
                if tchebycheff(&child.objectives, w, &self.ideal) <= tchebycheff(&pop[j].objectives, w, &self.ideal) {
                    pop[j] = child.clone();
                    replaced += 1;
                }
            }
        }
        Ok(pop)
    }
}
