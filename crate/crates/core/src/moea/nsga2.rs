use rand::Rng;

use super::{objectives_of, shuffled, tournament, Context, Individual, MoeaError, Optimizer};
use crate::indicators::non_dominated_sort;

/// Crowding distance of each point within one front. Boundary points of
/// every objective get infinity.
pub fn crowding_distance(front: &[Vec<f64>]) -> Vec<f64> {
    let n = front.len();
    let mut dist = vec![0.0; n];
    if n == 0 {
        return dist;
    }
    let m = front[0].len();
    let mut order: Vec<usize> = (0..n).collect();
    for j in 0..m {
        order.sort_by(|&a, &b| front[a][j].total_cmp(&front[b][j]));
        let lo = front[order[0]][j];
        let hi = front[order[n - 1]][j];
        dist[order[0]] = f64::INFINITY;
        dist[order[n - 1]] = f64::INFINITY;
        if hi - lo <= 0.0 {
            continue;
        }
        for w in 1..n.saturating_sub(1) {
            dist[order[w]] += (front[order[w + 1]][j] - front[order[w - 1]][j]) / (hi - lo);
        }
    }
    dist
}

/// Rank-then-crowding truncation of `pool` to `n` survivors. Survivors carry
/// their rank and crowding distance (in `fitness`).
pub fn nsga2_select<R: Rng + ?Sized>(pool: Vec<Individual>, n: usize, rng: &mut R) -> Result<Vec<Individual>, MoeaError> {
    if pool.len() < n {
        return Err(MoeaError::SelectionUnderflow { pool: pool.len(), needed: n });
    }
    let pool = shuffled(pool, rng);
    let fronts = non_dominated_sort(&objectives_of(&pool));
    let mut slots: Vec<Option<Individual>> = pool.into_iter().map(Some).collect();
    let mut out = Vec::with_capacity(n);
    for (rank, front) in fronts.iter().enumerate() {
        if out.len() == n {
            break;
        }
        let objs: Vec<Vec<f64>> = front.iter().map(|&i| slots[i].as_ref().unwrap().objectives.clone()).collect();
        let cd = crowding_distance(&objs);
        let mut members: Vec<usize> = (0..front.len()).collect();
        if out.len() + front.len() > n {
            // stable: equal distances keep shuffled index order
            members.sort_by(|&a, &b| cd[b].total_cmp(&cd[a]));
            members.truncate(n - out.len());
        }
        for k in members {
            let mut ind = slots[front[k]].take().unwrap();
            ind.rank = rank;
            ind.fitness = cd[k];
            out.push(ind);
        }
    }
    Ok(out)
}

fn crowded_better(a: &Individual, b: &Individual) -> bool {
    a.rank < b.rank || (a.rank == b.rank && a.fitness > b.fitness)
}

pub(crate) struct Nsga2;

impl Optimizer for Nsga2 {
    fn initialize(&mut self, ctx: &mut Context<'_>, pop: &mut Vec<Individual>) -> Result<(), MoeaError> {
        let n = pop.len();
        *pop = nsga2_select(std::mem::take(pop), n, &mut ctx.rng)?;
        Ok(())
    }

    fn step(&mut self, ctx: &mut Context<'_>, pop: Vec<Individual>, k: usize) -> Result<Vec<Individual>, MoeaError> {
        let parents = tournament(&pop, k + k % 2, &mut ctx.rng, crowded_better);
        let kids = ctx.breed(&parents, k);
        let mut pool = pop.clone();
        pool.extend(ctx.evaluate(kids)?);
        nsga2_select(pool, ctx.n, &mut ctx.rng)
    }
}

#[cfg(test)]
mod tests {
    use super::super::testutil::{individuals, random_points};
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn crowding_boundaries_are_infinite() {
        let front = vec![vec![0.0, 1.0], vec![0.25, 0.5], vec![0.5, 0.4], vec![1.0, 0.0]];
        let cd = crowding_distance(&front);
        assert!(cd[0].is_infinite() && cd[3].is_infinite());
        assert!((cd[1] - (0.5 + 0.6)).abs() < 1e-12);
        assert!((cd[2] - (0.75 + 0.5)).abs() < 1e-12);
        assert!(crowding_distance(&[vec![0.3, 0.3]])[0].is_infinite());
    }

    #[test]
    fn exact_first_front_survives() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        // 10 points on a line form the first front, 10 dominated copies behind
        let mut pts: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64 / 9.0, 1.0 - i as f64 / 9.0]).collect();
        pts.extend((0..10).map(|i| vec![i as f64 / 9.0 + 0.1, 1.1 - i as f64 / 9.0]));
        let out = nsga2_select(individuals(&pts), 10, &mut rng).unwrap();
        let mut got = objectives_of(&out);
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(got, pts[..10].to_vec());
        assert!(out.iter().all(|i| i.rank == 0));
    }

    #[test]
    fn truncation_keeps_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64 / 29.0, 1.0 - i as f64 / 29.0]).collect();
        let out = nsga2_select(individuals(&pts), 5, &mut rng).unwrap();
        let objs = objectives_of(&out);
        assert!(objs.contains(&pts[0]) && objs.contains(&pts[29]));
    }

    #[test]
    fn underflow_is_reported() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let pool = individuals(&random_points(4, 2, 0));
        assert_eq!(nsga2_select(pool, 5, &mut rng), Err(MoeaError::SelectionUnderflow { pool: 4, needed: 5 }));
    }
}
