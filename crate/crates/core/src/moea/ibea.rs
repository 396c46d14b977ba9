use rand::Rng;

use super::{objectives_of, shuffled, tournament, Context, Individual, MoeaError, Optimizer};

const KAPPA: f64 = 0.05;

/// Additive-epsilon indicator fitness of a population, with incremental
/// removal.
#[derive(Debug, Clone)]
pub struct EpsilonFitness {
    /// `indicator[i][j]`: smallest shift making `i` weakly dominate `j`.
    indicator: Vec<Vec<f64>>,
    /// Largest absolute indicator value into each column.
    scale: Vec<f64>,
    pub fitness: Vec<f64>,
    kappa: f64,
}

impl EpsilonFitness {
    /// Objectives are rescaled to `[0, 1]` per dimension first.
    pub fn new(points: &[Vec<f64>], kappa: f64) -> Self {
        let n = points.len();
        let m = points.first().map_or(0, Vec::len);
        let lo: Vec<f64> = (0..m).map(|j| points.iter().map(|p| p[j]).fold(f64::INFINITY, f64::min)).collect();
        let hi: Vec<f64> = (0..m).map(|j| points.iter().map(|p| p[j]).fold(f64::NEG_INFINITY, f64::max)).collect();
        let scaled: Vec<Vec<f64>> = points
            .iter()
            .map(|p| (0..m).map(|j| if hi[j] > lo[j] { (p[j] - lo[j]) / (hi[j] - lo[j]) } else { 0.0 }).collect())
            .collect();
        let indicator: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| (0..m).map(|d| scaled[i][d] - scaled[j][d]).fold(f64::NEG_INFINITY, f64::max))
                    .collect()
            })
            .collect();
        let scale: Vec<f64> = (0..n)
            .map(|j| {
                let c = (0..n).map(|i| indicator[i][j].abs()).fold(0.0, f64::max);
                if c > 0.0 {
                    c
                } else {
                    1.0
                }
            })
            .collect();
        let fitness = (0..n)
            .map(|j| 1.0 - (0..n).map(|i| (-indicator[i][j] / scale[j] / kappa).exp()).sum::<f64>())
            .collect();
        Self { indicator, scale, fitness, kappa }
    }

    /// Removes `x`'s contribution from every other member's fitness.
    pub fn remove(&mut self, x: usize, alive: &[bool]) {
        for j in 0..self.fitness.len() {
            if alive[j] {
                self.fitness[j] += (-self.indicator[x][j] / self.scale[j] / self.kappa).exp();
            }
        }
    }
}

/// Drops the worst-fitness member one at a time until `n` remain.
pub fn ibea_select<R: Rng + ?Sized>(pool: Vec<Individual>, n: usize, rng: &mut R) -> Result<Vec<Individual>, MoeaError> {
    if pool.len() < n {
        return Err(MoeaError::SelectionUnderflow { pool: pool.len(), needed: n });
    }
    let pool = shuffled(pool, rng);
    let mut fit = EpsilonFitness::new(&objectives_of(&pool), KAPPA);
    let mut alive = vec![true; pool.len()];
    for _ in n..pool.len() {
        let worst = (0..pool.len())
            .filter(|&i| alive[i])
            .min_by(|&a, &b| fit.fitness[a].total_cmp(&fit.fitness[b]))
            .expect("members remain");
        alive[worst] = false;
        fit.remove(worst, &alive);
    }
    Ok(pool
        .into_iter()
        .zip(alive)
        .enumerate()
        .filter(|(_, (_, a))| *a)
        .map(|(i, (mut ind, _))| {
            ind.fitness = fit.fitness[i];
            ind
        })
        .collect())
}

#[derive(Default)]
pub(crate) struct Ibea;

impl Optimizer for Ibea {
    fn initialize(&mut self, ctx: &mut Context<'_>, pop: &mut Vec<Individual>) -> Result<(), MoeaError> {
        let n = pop.len();
        *pop = ibea_select(std::mem::take(pop), n, &mut ctx.rng)?;
        Ok(())
    }

    fn step(&mut self, ctx: &mut Context<'_>, pop: Vec<Individual>, k: usize) -> Result<Vec<Individual>, MoeaError> {
        let parents = tournament(&pop, k + k % 2, &mut ctx.rng, |a, b| a.fitness > b.fitness);
        let kids = ctx.breed(&parents, k);
        let mut pool = pop.clone();
        pool.extend(ctx.evaluate(kids)?);
        ibea_select(pool, ctx.n, &mut ctx.rng)
    }
}

#[cfg(test)]
mod tests {
    use super::super::testutil::individuals;
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dominated_points_go_first() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let pts = vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![0.5, 0.5], vec![0.9, 0.9], vec![0.8, 0.95]];
        let out = ibea_select(individuals(&pts), 3, &mut rng).unwrap();
        let mut objs = objectives_of(&out);
        objs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(objs, vec![vec![0.0, 1.0], vec![0.5, 0.5], vec![1.0, 0.0]]);
    }

    #[test]
    fn incremental_matches_recomputed() {
        let pts = vec![vec![0.1, 0.9], vec![0.4, 0.6], vec![0.7, 0.2], vec![0.8, 0.8]];
        let mut fit = EpsilonFitness::new(&pts, KAPPA);
        let alive = [true, true, false, true];
        fit.remove(2, &alive);
        // recomputing with the same scaling over the survivors gives the same values
        let full = EpsilonFitness::new(&pts, KAPPA);
        for j in [0, 1, 3] {
            let expected = 1.0
                - [0, 1, 3].iter().map(|&i| (-full.indicator[i][j] / full.scale[j] / KAPPA).exp()).sum::<f64>();
            assert!((fit.fitness[j] - expected).abs() < 1e-12);
        }
    }
}
