use rand::Rng;

use super::refdirs::{das_dennis, PopulationSize};
use super::{shuffled, Context, Individual, MoeaError, Optimizer};

const ALPHA: f64 = 2.0;
const ADAPT_FRACTION: f64 = 0.1;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn unit(v: &[f64]) -> Vec<f64> {
    let n = norm(v);
    if n > 0.0 {
        v.iter().map(|x| x / n).collect()
    } else {
        vec![1.0 / (v.len() as f64).sqrt(); v.len()]
    }
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = norm(a);
    let nb = norm(b);
    if na == 0.0 || nb == 0.0 {
        return 1.0;
    }
    (a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb)).clamp(-1.0, 1.0)
}

fn translated(pool: &[Individual]) -> Vec<Vec<f64>> {
    let m = pool[0].objectives.len();
    let ideal: Vec<f64> =
        (0..m).map(|j| pool.iter().map(|p| p.objectives[j]).fold(f64::INFINITY, f64::min)).collect();
    pool.iter().map(|p| p.objectives.iter().zip(&ideal).map(|(v, z)| v - z).collect()).collect()
}

/// Angle-penalized distance selection: each reference vector keeps at most
/// its best associated candidate, so the result may be smaller than `pool`
/// by any amount. `theta` is the penalty weight, usually
/// `(progress)^alpha`.
pub fn rvea_select<R: Rng + ?Sized>(
    pool: Vec<Individual>,
    vectors: &[Vec<f64>],
    theta: f64,
    rng: &mut R,
) -> Result<Vec<Individual>, MoeaError> {
    if pool.is_empty() {
        return Err(MoeaError::SelectionUnderflow { pool: 0, needed: 1 });
    }
    let pool = shuffled(pool, rng);
    let m = pool[0].objectives.len() as f64;
    let objs = translated(&pool);
    // smallest angle between each vector and any other
    let gamma: Vec<f64> = vectors
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let g = vectors
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, w)| cosine(v, w).acos())
                .fold(f64::INFINITY, f64::min);
            if g.is_finite() {
                g.max(1e-12)
            } else {
                1.0
            }
        })
        .collect();
    let mut best: Vec<Option<(usize, f64)>> = vec![None; vectors.len()];
    for (i, f) in objs.iter().enumerate() {
        let (r, angle) = vectors
            .iter()
            .enumerate()
            .map(|(r, v)| (r, cosine(f, v).acos()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("at least one vector");
        let apd = (1.0 + m * theta * angle / gamma[r]) * norm(f);
        if best[r].map_or(true, |(_, b)| apd < b) {
            best[r] = Some((i, apd));
        }
    }
    let mut keep: Vec<usize> = best.into_iter().flatten().map(|(i, _)| i).collect();
    keep.sort_unstable();
    let mut slots: Vec<Option<Individual>> = pool.into_iter().map(Some).collect();
    Ok(keep.into_iter().map(|i| slots[i].take().unwrap()).collect())
}

/// Reference-vector guided search with the regenerated vector set of the
/// starred variant, which keeps the population size variable.
pub(crate) struct Rvea {
    base: Vec<Vec<f64>>,
    adapted: Vec<Vec<f64>>,
    regenerated: Vec<Vec<f64>>,
}

impl Rvea {
    pub fn new(m: usize, ps: PopulationSize) -> Result<Self, MoeaError> {
        let base: Vec<Vec<f64>> = das_dennis(m, ps.h1, ps.h2)?.vectors.iter().map(|v| unit(v)).collect();
        Ok(Self { adapted: base.clone(), base, regenerated: Vec::new() })
    }

    fn vectors(&self) -> Vec<Vec<f64>> {
        self.adapted.iter().chain(&self.regenerated).cloned().collect()
    }

    fn adapt(&mut self, pop: &[Individual]) {
        let m = self.base[0].len();
        let span: Vec<f64> = (0..m)
            .map(|j| {
                let hi = pop.iter().map(|p| p.objectives[j]).fold(f64::NEG_INFINITY, f64::max);
                let lo = pop.iter().map(|p| p.objectives[j]).fold(f64::INFINITY, f64::min);
                (hi - lo).max(1e-12)
            })
            .collect();
        self.adapted =
            self.base.iter().map(|v| unit(&v.iter().zip(&span).map(|(a, s)| a * s).collect::<Vec<f64>>())).collect();
    }

    /// Replaces regenerated vectors that attract no solution by random ones
    /// scaled to the current objective ranges.
    fn regenerate<R: Rng + ?Sized>(&mut self, pop: &[Individual], rng: &mut R) {
        let objs = translated(pop);
        let m = self.base[0].len();
        let hi: Vec<f64> = (0..m).map(|j| objs.iter().map(|p| p[j]).fold(0.0, f64::max)).collect();
        let mut used = vec![false; self.regenerated.len()];
        for f in &objs {
            if let Some((r, _)) = self
                .regenerated
                .iter()
                .enumerate()
                .map(|(r, v)| (r, cosine(f, v)))
                .max_by(|a, b| a.1.total_cmp(&b.1))
            {
                used[r] = true;
            }
        }
        for (v, u) in self.regenerated.iter_mut().zip(used) {
            if !u {
                *v = unit(&hi.iter().map(|h| rng.gen::<f64>() * h.max(1e-12)).collect::<Vec<f64>>());
            }
        }
    }
}

impl Optimizer for Rvea {
    fn initialize(&mut self, ctx: &mut Context<'_>, _pop: &mut Vec<Individual>) -> Result<(), MoeaError> {
        let m = ctx.m;
        self.regenerated =
            (0..self.base.len()).map(|_| unit(&(0..m).map(|_| ctx.rng.gen::<f64>()).collect::<Vec<f64>>())).collect();
        Ok(())
    }

    fn step(&mut self, ctx: &mut Context<'_>, pop: Vec<Individual>, k: usize) -> Result<Vec<Individual>, MoeaError> {
        let count = k + k % 2;
        let parents: Vec<&Individual> = (0..count).map(|_| &pop[ctx.rng.gen_range(0..pop.len())]).collect();
        let kids = ctx.breed(&parents, k);
        let mut pool = pop.clone();
        pool.extend(ctx.evaluate(kids)?);
        let theta = ctx.progress().powf(ALPHA);
        let next = rvea_select(pool, &self.vectors(), theta, &mut ctx.rng)?;
        let period = ((ADAPT_FRACTION * ctx.max_gen as f64).ceil() as usize).max(1);
        if ctx.gen % period == 0 {
            self.adapt(&next);
        }
        self.regenerate(&next, &mut ctx.rng);
        Ok(next)
    }
}
