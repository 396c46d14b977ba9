use rand::seq::SliceRandom;
use rand::Rng;

use super::refdirs::{das_dennis, PopulationSize};
use super::{objectives_of, shuffled, Context, Individual, MoeaError, Optimizer};
use crate::indicators::non_dominated_sort;

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for c in col..n {
                a[row][c] -= f * a[col][c];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|c| a[row][c] * x[c]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Translates by the ideal point and divides by hyperplane intercepts.
/// Falls back to the per-objective maximum when the extreme points are
/// degenerate.
fn normalize(objs: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let m = objs[0].len();
    let ideal: Vec<f64> = (0..m).map(|j| objs.iter().map(|p| p[j]).fold(f64::INFINITY, f64::min)).collect();
    let shifted: Vec<Vec<f64>> = objs.iter().map(|p| p.iter().zip(&ideal).map(|(v, z)| v - z).collect()).collect();
    let asf = |p: &[f64], axis: usize| {
        p.iter().enumerate().map(|(j, v)| v / if j == axis { 1.0 } else { 1e-6 }).fold(f64::NEG_INFINITY, f64::max)
    };
    let extremes: Vec<Vec<f64>> = (0..m)
        .map(|axis| {
            let best = (0..shifted.len())
                .min_by(|&a, &b| asf(&shifted[a], axis).total_cmp(&asf(&shifted[b], axis)))
                .expect("non-empty");
            shifted[best].clone()
        })
        .collect();
    let worst: Vec<f64> = (0..m).map(|j| shifted.iter().map(|p| p[j]).fold(0.0, f64::max)).collect();
    let intercepts: Vec<f64> = match solve(extremes, vec![1.0; m]) {
        Some(b) if b.iter().all(|&v| v > 1e-10 && v.is_finite()) => {
            let a: Vec<f64> = b.iter().map(|v| 1.0 / v).collect();
            if a.iter().all(|&v| v > 1e-6) {
                a
            } else {
                worst.clone()
            }
        }
        _ => worst.clone(),
    };
    let intercepts: Vec<f64> = intercepts.into_iter().map(|v| if v > 1e-10 { v } else { 1.0 }).collect();
    shifted.into_iter().map(|p| p.iter().zip(&intercepts).map(|(v, a)| v / a).collect()).collect()
}

/// Nearest reference line of each point and the perpendicular distance to it.
fn associate(points: &[Vec<f64>], refs: &[Vec<f64>]) -> Vec<(usize, f64)> {
    let norms: Vec<f64> = refs.iter().map(|w| w.iter().map(|v| v * v).sum::<f64>()).collect();
    points
        .iter()
        .map(|p| {
            let pp: f64 = p.iter().map(|v| v * v).sum();
            let mut best = (0, f64::INFINITY);
            for (r, w) in refs.iter().enumerate() {
                let dot: f64 = p.iter().zip(w).map(|(a, b)| a * b).sum();
                let d2 = (pp - dot * dot / norms[r]).max(0.0);
                if d2 < best.1 {
                    best = (r, d2);
                }
            }
            (best.0, best.1.sqrt())
        })
        .collect()
}

/// Reference-point niching truncation of `pool` to `n` survivors.
pub fn nsga3_select<R: Rng + ?Sized>(
    pool: Vec<Individual>,
    n: usize,
    refs: &[Vec<f64>],
    rng: &mut R,
) -> Result<Vec<Individual>, MoeaError> {
    if pool.len() < n {
        return Err(MoeaError::SelectionUnderflow { pool: pool.len(), needed: n });
    }
    let pool = shuffled(pool, rng);
    let fronts = non_dominated_sort(&objectives_of(&pool));
    let mut chosen: Vec<usize> = Vec::with_capacity(n);
    let mut last: Vec<usize> = Vec::new();
    let mut rank_of = vec![0; pool.len()];
    for (rank, front) in fronts.iter().enumerate() {
        for &i in front {
            rank_of[i] = rank;
        }
        if chosen.len() + front.len() <= n {
            chosen.extend(front);
            if chosen.len() == n {
                break;
            }
        } else {
            last = front.clone();
            break;
        }
    }

    if chosen.len() < n {
        let members: Vec<usize> = chosen.iter().chain(&last).copied().collect();
        let objs: Vec<Vec<f64>> = members.iter().map(|&i| pool[i].objectives.clone()).collect();
        let assoc = associate(&normalize(&objs), refs);
        let mut niche = vec![0usize; refs.len()];
        for a in &assoc[..chosen.len()] {
            niche[a.0] += 1;
        }
        // candidates of the last front grouped by reference line
        let mut waiting: Vec<Vec<(usize, f64)>> = vec![Vec::new(); refs.len()];
        for (k, &i) in last.iter().enumerate() {
            let (r, d) = assoc[chosen.len() + k];
            waiting[r].push((i, d));
        }
        let mut open: Vec<usize> = (0..refs.len()).filter(|&r| !waiting[r].is_empty()).collect();
        while chosen.len() < n {
            let least = open.iter().map(|&r| niche[r]).min().expect("last front has members left");
            let ties: Vec<usize> = open.iter().copied().filter(|&r| niche[r] == least).collect();
            let r = *ties.choose(rng).unwrap();
            let pick = if niche[r] == 0 {
                (0..waiting[r].len()).min_by(|&a, &b| waiting[r][a].1.total_cmp(&waiting[r][b].1)).unwrap()
            } else {
                rng.gen_range(0..waiting[r].len())
            };
            chosen.push(waiting[r].remove(pick).0);
            niche[r] += 1;
            if waiting[r].is_empty() {
                open.retain(|&o| o != r);
            }
        }
    }

    let mut slots: Vec<Option<Individual>> = pool.into_iter().map(Some).collect();
    Ok(chosen
        .into_iter()
        .map(|i| {
            let mut ind = slots[i].take().unwrap();
            ind.rank = rank_of[i];
            ind
        })
        .collect())
}

pub(crate) struct Nsga3 {
    refs: Vec<Vec<f64>>,
}

impl Nsga3 {
    pub fn new(m: usize, ps: PopulationSize) -> Result<Self, MoeaError> {
        Ok(Self { refs: das_dennis(m, ps.h1, ps.h2)?.vectors })
    }
}

impl Optimizer for Nsga3 {
    fn step(&mut self, ctx: &mut Context<'_>, pop: Vec<Individual>, k: usize) -> Result<Vec<Individual>, MoeaError> {
        // uniform random mating
        let count = k + k % 2;
        let parents: Vec<&Individual> = (0..count).map(|_| &pop[ctx.rng.gen_range(0..pop.len())]).collect();
        let kids = ctx.breed(&parents, k);
        let mut pool = pop.clone();
        pool.extend(ctx.evaluate(kids)?);
        nsga3_select(pool, ctx.n, &self.refs, &mut ctx.rng)
    }
}

#[cfg(test)]
mod tests {
    use super::super::testutil::{individuals, random_points};
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn solve_small_system() {
        let x = solve(vec![vec![2.0, 1.0], vec![1.0, 3.0]], vec![3.0, 5.0]).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-12 && (x[1] - 1.4).abs() < 1e-12);
        assert!(solve(vec![vec![1.0, 2.0], vec![2.0, 4.0]], vec![1.0, 1.0]).is_none());
    }

    #[test]
    fn normalization_maps_simplex_front() {
        let objs = vec![vec![2.0, 3.0], vec![4.0, 1.0], vec![3.0, 2.0]];
        let norm = normalize(&objs);
        assert!((norm[0][0] - 0.0).abs() < 1e-12 && (norm[0][1] - 1.0).abs() < 1e-12);
        assert!((norm[1][0] - 1.0).abs() < 1e-12 && (norm[1][1] - 0.0).abs() < 1e-12);
        assert!((norm[2][0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn niching_spreads_survivors() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let refs = das_dennis(2, 4, 0).unwrap().vectors;
        // dense cluster near one end plus one point per other reference line
        let mut pts: Vec<Vec<f64>> = (0..20).map(|i| vec![0.01 * i as f64, 1.0 - 0.01 * i as f64]).collect();
        pts.extend([vec![0.5, 0.5], vec![0.75, 0.25], vec![1.0, 0.0]]);
        let out = nsga3_select(individuals(&pts), 5, &refs, &mut rng).unwrap();
        let objs = objectives_of(&out);
        for p in &pts[20..] {
            assert!(objs.contains(p), "{p:?} missing from {objs:?}");
        }
    }

    #[test]
    fn selection_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let refs = das_dennis(3, 13, 0).unwrap().vectors;
        let pool = individuals(&random_points(210, 3, 8));
        assert_eq!(nsga3_select(pool.clone(), 105, &refs, &mut rng).unwrap().len(), 105);
        assert!(matches!(
            nsga3_select(pool[..100].to_vec(), 105, &refs, &mut rng),
            Err(MoeaError::SelectionUnderflow { .. })
        ));
    }
}
