use rand::Rng;

use super::{non_dominated_sort_of, objectives_of, shuffled, tournament, Context, Individual, MoeaError, Optimizer};

/// Objective counts up to this use the exact recursion.
const EXACT_MAX_OBJECTIVES: usize = 3;
pub const HYPE_SAMPLES: usize = 10_000;

/// Weights `alpha_i = (1/i) * prod_{l<i} (k-l)/(n-l)` for `i = 1..=k`.
fn alphas(k: usize, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(k);
    let mut prod = 1.0;
    for i in 1..=k {
        if i > 1 {
            let l = (i - 1) as f64;
            prod *= (k as f64 - l) / (n as f64 - l);
        }
        out.push(prod / i as f64);
    }
    out
}

/// Two-objective slice: sweep by the second coordinate while keeping the
/// points seen so far ordered by the first.
fn exact_2d(acc: &mut [f64], pts: &mut [(usize, &[f64])], reference: &[f64], alpha: &[f64], factor: f64) {
    pts.sort_by(|a, b| a.1[1].total_cmp(&b.1[1]));
    let k = alpha.len();
    let mut by_x: Vec<(usize, f64)> = Vec::with_capacity(pts.len());
    let mut tail = Vec::with_capacity(pts.len());
    for i in 0..pts.len() {
        let x = pts[i].1[0];
        let pos = by_x.partition_point(|&(_, v)| v <= x);
        by_x.insert(pos, (pts[i].0, x));
        let next = if i + 1 < pts.len() { pts[i + 1].1[1] } else { reference[1] };
        let ext_y = next - pts[i].1[1];
        if ext_y <= 0.0 {
            continue;
        }
        // the strip right of the j-th smallest x is shared by the first j + 1 points
        let top = by_x.len().min(k);
        tail.clear();
        tail.resize(top + 1, 0.0);
        for j in (0..top).rev() {
            let nx = if j + 1 < by_x.len() { by_x[j + 1].1 } else { reference[0] };
            tail[j] = tail[j + 1] + (nx - by_x[j].1) * alpha[j];
        }
        for (j, &(idx, _)) in by_x.iter().take(top).enumerate() {
            acc[idx] += factor * ext_y * tail[j];
        }
    }
}

fn exact_rec(acc: &mut [f64], pts: &mut [(usize, &[f64])], d: usize, reference: &[f64], alpha: &[f64], factor: f64) {
    if d == 1 {
        let mut top = pts.to_vec();
        top.sort_by(|a, b| a.1[0].total_cmp(&b.1[0]));
        for i in 0..top.len().min(alpha.len()) {
            let next = if i + 1 < top.len() { top[i + 1].1[0] } else { reference[0] };
            for p in &top[..=i] {
                acc[p.0] += factor * (next - top[i].1[0]) * alpha[i];
            }
        }
        return;
    }
    if d == 2 {
        exact_2d(acc, pts, reference, alpha, factor);
        return;
    }
    let axis = d - 1;
    pts.sort_by(|a, b| a.1[axis].total_cmp(&b.1[axis]));
    for i in 0..pts.len() {
        let next = if i + 1 < pts.len() { pts[i + 1].1[axis] } else { reference[axis] };
        let extrusion = next - pts[i].1[axis];
        if extrusion > 0.0 {
            let mut sub = pts[..=i].to_vec();
            exact_rec(acc, &mut sub, d - 1, reference, alpha, factor * extrusion);
        }
    }
}

/// Domination structure of a fixed sample set, reused across removals.
struct Samples {
    dominators: Vec<Vec<u32>>,
    cell: f64,
}

impl Samples {
    fn draw<R: Rng + ?Sized>(points: &[Vec<f64>], reference: &[f64], count: usize, rng: &mut R) -> Self {
        let m = reference.len();
        let lower: Vec<f64> =
            (0..m).map(|j| points.iter().map(|p| p[j]).fold(reference[j], f64::min)).collect();
        let volume: f64 = lower.iter().zip(reference).map(|(l, r)| r - l).product();
        let mut u = vec![0.0; m];
        let mut dominators = Vec::with_capacity(count);
        for _ in 0..count {
            for j in 0..m {
                u[j] = if lower[j] < reference[j] { rng.gen_range(lower[j]..reference[j]) } else { lower[j] };
            }
            let d: Vec<u32> = points
                .iter()
                .enumerate()
                .filter(|(_, p)| p.iter().zip(&u).all(|(a, b)| a <= b))
                .map(|(i, _)| i as u32)
                .collect();
            if !d.is_empty() {
                dominators.push(d);
            }
        }
        Self { dominators, cell: if count > 0 { volume / count as f64 } else { 0.0 } }
    }

    fn fitness(&self, alive: &[bool], alpha: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; alive.len()];
        let mut live: Vec<u32> = Vec::new();
        for d in &self.dominators {
            live.clear();
            live.extend(d.iter().copied().filter(|&i| alive[i as usize]));
            let c = live.len();
            if c == 0 || c > alpha.len() {
                continue;
            }
            for &i in &live {
                out[i as usize] += alpha[c - 1] * self.cell;
            }
        }
        out
    }
}

fn clip(points: &[Vec<f64>], reference: &[f64]) -> Vec<Vec<f64>> {
    points.iter().map(|p| p.iter().zip(reference).map(|(v, r)| v.min(*r)).collect()).collect()
}

fn exact_fitness(points: &[Vec<f64>], alive: &[bool], k: usize, reference: &[f64]) -> Vec<f64> {
    let n = alive.iter().filter(|&&a| a).count();
    let alpha = alphas(k.min(n), n);
    let mut acc = vec![0.0; points.len()];
    let mut pts: Vec<(usize, &[f64])> =
        points.iter().enumerate().filter(|&(i, _)| alive[i]).map(|(i, p)| (i, p.as_slice())).collect();
    exact_rec(&mut acc, &mut pts, reference.len(), reference, &alpha, 1.0);
    acc
}

/// Expected hypervolume lost when `k` random members are removed, attributed
/// to each point. Points are clipped to `reference` first.
pub fn hype_fitness<R: Rng + ?Sized>(points: &[Vec<f64>], k: usize, reference: &[f64], rng: &mut R) -> Vec<f64> {
    if points.is_empty() {
        return Vec::new();
    }
    let pts = clip(points, reference);
    let alive = vec![true; pts.len()];
    if reference.len() <= EXACT_MAX_OBJECTIVES {
        exact_fitness(&pts, &alive, k, reference)
    } else {
        let n = pts.len();
        Samples::draw(&pts, reference, HYPE_SAMPLES, rng).fitness(&alive, &alphas(k.min(n), n))
    }
}

/// Non-dominated sorting, then iterative removal of the lowest-fitness member
/// of the split front.
pub fn hype_select<R: Rng + ?Sized>(
    pool: Vec<Individual>,
    n: usize,
    reference: &[f64],
    rng: &mut R,
) -> Result<Vec<Individual>, MoeaError> {
    if pool.len() < n {
        return Err(MoeaError::SelectionUnderflow { pool: pool.len(), needed: n });
    }
    let pool = shuffled(pool, rng);
    let fronts = non_dominated_sort_of(&pool);
    let mut keep = vec![false; pool.len()];
    let mut taken = 0;
    for front in &fronts {
        if taken + front.len() <= n {
            for &i in front {
                keep[i] = true;
            }
            taken += front.len();
            if taken == n {
                break;
            }
            continue;
        }
        let pts = clip(&front.iter().map(|&i| pool[i].objectives.clone()).collect::<Vec<_>>(), reference);
        let mut alive = vec![true; pts.len()];
        let samples = (reference.len() > EXACT_MAX_OBJECTIVES)
            .then(|| Samples::draw(&pts, reference, HYPE_SAMPLES, rng));
        let mut left = pts.len();
        while left > n - taken {
            let k = left - (n - taken);
            let fit = match &samples {
                Some(s) => s.fitness(&alive, &alphas(k, left)),
                None => exact_fitness(&pts, &alive, k, reference),
            };
            let worst = (0..pts.len())
                .filter(|&i| alive[i])
                .min_by(|&a, &b| fit[a].total_cmp(&fit[b]))
                .expect("members remain");
            alive[worst] = false;
            left -= 1;
        }
        for (j, &i) in front.iter().enumerate() {
            keep[i] = alive[j];
        }
        break;
    }
    Ok(pool.into_iter().zip(keep).filter(|(_, k)| *k).map(|(i, _)| i).collect())
}

#[derive(Default)]
pub(crate) struct Hype {
    fitness: Vec<f64>,
}

impl Hype {
    fn refresh(&mut self, ctx: &mut Context<'_>, pop: &[Individual]) {
        let reference = vec![1.0; ctx.m];
        self.fitness = hype_fitness(&objectives_of(pop), ctx.n.min(pop.len()), &reference, &mut ctx.rng);
    }
}

impl Optimizer for Hype {
    fn initialize(&mut self, ctx: &mut Context<'_>, pop: &mut Vec<Individual>) -> Result<(), MoeaError> {
        self.refresh(ctx, pop);
        Ok(())
    }

    fn step(&mut self, ctx: &mut Context<'_>, mut pop: Vec<Individual>, k: usize) -> Result<Vec<Individual>, MoeaError> {
        for (ind, f) in pop.iter_mut().zip(&self.fitness) {
            ind.fitness = *f;
        }
        let parents = tournament(&pop, k + k % 2, &mut ctx.rng, |a, b| a.fitness > b.fitness);
        let kids = ctx.breed(&parents, k);
        let mut pool = pop.clone();
        pool.extend(ctx.evaluate(kids)?);
        let reference = vec![1.0; ctx.m];
        let next = hype_select(pool, ctx.n, &reference, &mut ctx.rng)?;
        self.refresh(ctx, &next);
        Ok(next)
    }
}

#[cfg(test)]
mod tests {
    use super::super::testutil::{individuals, random_points};
    use super::*;
    use crate::indicators::exclusive_contributions;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn alpha_weights() {
        assert_eq!(alphas(1, 10), vec![1.0]);
        let a = alphas(3, 3);
        assert!((a[0] - 1.0).abs() < 1e-15 && (a[1] - 0.5).abs() < 1e-15 && (a[2] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn k1_is_exclusive_contribution() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = vec![1.0, 1.0, 1.0];
        for seed in 0..5 {
            let pts = random_points(25, 3, seed);
            let fit = hype_fitness(&pts, 1, &r, &mut rng);
            let exc = exclusive_contributions(&pts, &r).unwrap();
            for (a, b) in fit.iter().zip(&exc) {
                assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn full_k_partitions_hypervolume() {
        // with k = n every dominated cell is shared out in full
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let pts = random_points(12, 2, 3);
        let r = vec![1.0, 1.0];
        let fit = hype_fitness(&pts, 12, &r, &mut rng);
        let hv = crate::indicators::hypervolume_exact(&pts, &r).unwrap();
        assert!((fit.iter().sum::<f64>() - hv).abs() < 1e-12);
    }

    #[test]
    fn monte_carlo_tracks_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts = random_points(8, 3, 9);
        let r = vec![1.0; 3];
        let alive = vec![true; 8];
        let exact = exact_fitness(&pts, &alive, 3, &r);
        let mc = Samples::draw(&pts, &r, 200_000, &mut rng).fitness(&alive, &alphas(3, 8));
        for (a, b) in exact.iter().zip(&mc) {
            assert!((a - b).abs() < 0.01, "{a} vs {b}");
        }
    }

    #[test]
    fn selection_keeps_best_front() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for m in [2, 5] {
            let pool = individuals(&random_points(60, m, 4));
            let out = hype_select(pool, 30, &vec![1.0; m], &mut rng).unwrap();
            assert_eq!(out.len(), 30);
        }
        let pts: Vec<Vec<f64>> = (0..11).map(|i| vec![i as f64 / 10.0, 1.0 - i as f64 / 10.0]).collect();
        let out = hype_select(individuals(&pts), 9, &[1.1, 1.1], &mut rng).unwrap();
        assert_eq!(out.len(), 9);
    }
}
