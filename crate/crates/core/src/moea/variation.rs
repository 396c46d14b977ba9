//! Simulated binary crossover and polynomial mutation on integer genes.
//!
//! Genes are treated as reals on `[lower - 0.5, upper + 0.5]` so that every
//! integer value owns an equal-width interval, varied, then rounded to the
//! nearest integer and clipped to the gene bounds.

use rand::Rng;

use crate::encoding::{bounds, Genotype, GENOME_LENGTH, NUM_STAGES};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariationConfig {
    pub crossover_probability: f64,
    pub crossover_index: f64,
    pub mutation_index: f64,
    /// Expected number of mutated genes per offspring.
    pub mutation_genes: f64,
}

impl Default for VariationConfig {
    fn default() -> Self {
        Self { crossover_probability: 0.9, crossover_index: 20.0, mutation_index: 20.0, mutation_genes: 1.0 }
    }
}

struct Box {
    lower: [f64; GENOME_LENGTH],
    upper: [f64; GENOME_LENGTH],
}

fn real_box() -> Box {
    let (lo, hi) = bounds();
    let mut b = Box { lower: [0.0; GENOME_LENGTH], upper: [0.0; GENOME_LENGTH] };
    for i in 0..GENOME_LENGTH {
        b.lower[i] = lo[i] as f64 - 0.5;
        b.upper[i] = hi[i] as f64 + 0.5;
    }
    b
}

fn sbx<R: Rng + ?Sized>(p1: &[f64], p2: &[f64], cfg: &VariationConfig, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
    let mut c1 = p1.to_vec();
    let mut c2 = p2.to_vec();
    if rng.gen::<f64>() > cfg.crossover_probability {
        return (c1, c2);
    }
    let exp = 1.0 / (cfg.crossover_index + 1.0);
    for i in 0..p1.len() {
        let mu: f64 = rng.gen();
        let mut beta = if mu <= 0.5 { (2.0 * mu).powf(exp) } else { (2.0 - 2.0 * mu).powf(-exp) };
        if rng.gen::<bool>() {
            beta = -beta;
        }
        if rng.gen::<f64>() > 0.5 {
            beta = 1.0;
        }
        let mean = (p1[i] + p2[i]) / 2.0;
        let half = (p1[i] - p2[i]) / 2.0;
        c1[i] = mean + beta * half;
        c2[i] = mean - beta * half;
    }
    (c1, c2)
}

fn polynomial_mutation<R: Rng + ?Sized>(x: &mut [f64], b: &Box, cfg: &VariationConfig, rng: &mut R) {
    let rate = cfg.mutation_genes / x.len() as f64;
    let eta = cfg.mutation_index;
    for i in 0..x.len() {
        let (lo, hi) = (b.lower[i], b.upper[i]);
        x[i] = x[i].clamp(lo, hi);
        if rng.gen::<f64>() >= rate {
            continue;
        }
        let mu: f64 = rng.gen();
        let span = hi - lo;
        if mu <= 0.5 {
            let t = 2.0 * mu + (1.0 - 2.0 * mu) * (1.0 - (x[i] - lo) / span).powf(eta + 1.0);
            x[i] += span * (t.powf(1.0 / (eta + 1.0)) - 1.0);
        } else {
            let t = 2.0 * (1.0 - mu) + 2.0 * (mu - 0.5) * (1.0 - (hi - x[i]) / span).powf(eta + 1.0);
            x[i] += span * (1.0 - t.powf(1.0 / (eta + 1.0)));
        }
    }
}

/// Rounds, clips, and repairs an all-zero-depth string by setting one
/// randomly chosen stage depth to 1.
pub fn to_genotype<R: Rng + ?Sized>(x: &[f64], rng: &mut R) -> Genotype {
    let (lo, hi) = bounds();
    let mut genes: Vec<i64> = x.iter().zip(lo.iter().zip(&hi)).map(|(v, (&l, &h))| (v.round() as i64).clamp(l, h)).collect();
    repair(&mut genes, rng);
    Genotype::from_slice(&genes).expect("rounded, clipped and repaired genes are valid")
}

pub fn repair<R: Rng + ?Sized>(genes: &mut [i64], rng: &mut R) {
    if genes[..NUM_STAGES].iter().all(|&d| d == 0) {
        genes[rng.gen_range(0..NUM_STAGES)] = 1;
    }
}

fn as_reals(g: &Genotype) -> Vec<f64> {
    g.genes().iter().map(|&v| f64::from(v)).collect()
}

/// Two children of `p1` and `p2`.
pub fn crossover_and_mutate<R: Rng + ?Sized>(
    p1: &Genotype,
    p2: &Genotype,
    cfg: &VariationConfig,
    rng: &mut R,
) -> [Genotype; 2] {
    let b = real_box();
    let (mut c1, mut c2) = sbx(&as_reals(p1), &as_reals(p2), cfg, rng);
    polynomial_mutation(&mut c1, &b, cfg, rng);
    polynomial_mutation(&mut c2, &b, cfg, rng);
    [to_genotype(&c1, rng), to_genotype(&c2, rng)]
}

/// `count` offspring from consecutive parent pairs.
pub fn offspring<R: Rng + ?Sized>(
    parents: &[Genotype],
    count: usize,
    cfg: &VariationConfig,
    rng: &mut R,
) -> Vec<Genotype> {
    let mut out = Vec::with_capacity(count + 1);
    let mut k = 0;
    while out.len() < count {
        let p1 = &parents[k % parents.len()];
        let p2 = &parents[(k + 1) % parents.len()];
        out.extend(crossover_and_mutate(p1, p2, cfg, rng));
        k += 2;
    }
    out.truncate(count);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::sample_random;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn offspring_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let parents = sample_random(50, 2).unwrap();
        let kids = offspring(&parents, 1001, &VariationConfig::default(), &mut rng);
        assert_eq!(kids.len(), 1001);
        // identical-parent crossover without mutation reproduces the parent
        let cfg = VariationConfig { mutation_genes: 0.0, ..VariationConfig::default() };
        let [a, b] = crossover_and_mutate(&parents[0], &parents[0], &cfg, &mut rng);
        assert_eq!(a, parents[0]);
        assert_eq!(b, parents[0]);
    }

    #[test]
    fn variation_changes_something() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let parents = sample_random(40, 4).unwrap();
        let kids = offspring(&parents, 40, &VariationConfig::default(), &mut rng);
        let changed = kids.iter().zip(&parents).filter(|(k, p)| k != p).count();
        assert!(changed > 20);
    }

    #[test]
    fn repair_sets_one_depth() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let g = to_genotype(&[0.2; GENOME_LENGTH], &mut rng);
        let depths: Vec<usize> = (0..4).map(|s| g.depth(s)).collect();
        assert_eq!(depths.iter().sum::<usize>(), 1);
        let g = to_genotype(&[9.0; GENOME_LENGTH], &mut rng);
        assert_eq!(g.depth(0), 6);
        assert_eq!(g.width(0), 2);
    }
}
