//! Integer search space: stage depths, per-cell expansion ratios and per-stage widths.
//!
//! A genotype is a fixed-length string of 32 integer genes:
//!
//! | positions      | meaning                                   | domain   |
//! |----------------|-------------------------------------------|----------|
//! | `0..4`         | depth of stage `s`                        | `0..=6`  |
//! | `4 + 6s + i`   | expansion index of cell `i` in stage `s`  | `0..=2`  |
//! | `28..32`       | width index of stage `s`                  | `0..=2`  |
//!
//! Expansion genes of cells at or beyond the stage depth are inactive. The
//! canonical form zeroes them so that every architecture has exactly one key.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const NUM_STAGES: usize = 4;
pub const MAX_DEPTH: usize = 6;
pub const GENOME_LENGTH: usize = NUM_STAGES + NUM_STAGES * MAX_DEPTH + NUM_STAGES;

const EXPANSION_OFFSET: usize = NUM_STAGES;
const WIDTH_OFFSET: usize = NUM_STAGES + NUM_STAGES * MAX_DEPTH;

/// Expansion ratios selected by the expansion genes.
pub const EXPANSION_RATIOS: [f64; 3] = [2.0, 4.0, 6.0];
/// Channel multipliers selected by the width genes.
pub const WIDTH_MULTIPLIERS: [f64; 3] = [1.0, 1.25, 1.5];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodingError {
    #[error("genotype must have {GENOME_LENGTH} genes, got {0}")]
    Length(usize),
    #[error("gene {position} has out-of-domain value {value}")]
    Domain { position: usize, value: i64 },
    #[error("all stage depths are zero")]
    DegenerateArchitecture,
    #[error("sample count must be at least 1")]
    EmptySample,
}

/// What a gene position encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeneRole {
    Depth { stage: usize },
    Expansion { stage: usize, cell: usize },
    Width { stage: usize },
}

/// Static description of the search space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchSpace;

impl SearchSpace {
    pub const fn num_stages(self) -> usize {
        NUM_STAGES
    }

    pub const fn max_depth_per_stage(self) -> usize {
        MAX_DEPTH
    }

    pub const fn genome_length(self) -> usize {
        GENOME_LENGTH
    }

    pub fn role(self, position: usize) -> GeneRole {
        assert!(position < GENOME_LENGTH, "gene position {position} out of range");
        if position < EXPANSION_OFFSET {
            GeneRole::Depth { stage: position }
        } else if position < WIDTH_OFFSET {
            let k = position - EXPANSION_OFFSET;
            GeneRole::Expansion { stage: k / MAX_DEPTH, cell: k % MAX_DEPTH }
        } else {
            GeneRole::Width { stage: position - WIDTH_OFFSET }
        }
    }

    /// Inclusive upper bound of the gene at `position`; every lower bound is 0.
    pub fn upper(self, position: usize) -> u8 {
        match self.role(position) {
            GeneRole::Depth { .. } => MAX_DEPTH as u8,
            GeneRole::Expansion { .. } => (EXPANSION_RATIOS.len() - 1) as u8,
            GeneRole::Width { .. } => (WIDTH_MULTIPLIERS.len() - 1) as u8,
        }
    }
}

/// Per-gene inclusive `(lower, upper)` bounds.
pub fn bounds() -> (Vec<i64>, Vec<i64>) {
    let lower = vec![0; GENOME_LENGTH];
    let upper = (0..GENOME_LENGTH).map(|p| i64::from(SearchSpace.upper(p))).collect();
    (lower, upper)
}

/// One architecture in the search space.
///
/// Construction through [`Genotype::new`] or [`Genotype::from_slice`] always
/// validates, so a `Genotype` value is known to be in-domain and
/// non-degenerate.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(into = "Vec<i64>")]
pub struct Genotype([u8; GENOME_LENGTH]);

impl Genotype {
    pub fn new(genes: [u8; GENOME_LENGTH]) -> Result<Self, EncodingError> {
        validate(&genes.map(i64::from))?;
        Ok(Self(genes))
    }

    pub fn from_slice(genes: &[i64]) -> Result<Self, EncodingError> {
        validate(genes)?;
        let mut out = [0u8; GENOME_LENGTH];
        for (o, &g) in out.iter_mut().zip(genes) {
            *o = g as u8;
        }
        Ok(Self(out))
    }

    pub fn genes(&self) -> &[u8; GENOME_LENGTH] {
        &self.0
    }

    pub fn depth(&self, stage: usize) -> usize {
        usize::from(self.0[stage])
    }

    pub fn width(&self, stage: usize) -> usize {
        usize::from(self.0[WIDTH_OFFSET + stage])
    }

    pub fn expansion(&self, stage: usize, cell: usize) -> usize {
        usize::from(self.0[EXPANSION_OFFSET + stage * MAX_DEPTH + cell])
    }

    /// Iterates `(stage, width, expansion)` over every active cell.
    pub fn active_cells(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        (0..NUM_STAGES).flat_map(move |s| {
            (0..self.depth(s)).map(move |i| (s, self.width(s), self.expansion(s, i)))
        })
    }

    /// Returns the genotype with every inactive expansion gene set to 0.
    pub fn canonicalize(&self) -> Self {
        let mut genes = self.0;
        for s in 0..NUM_STAGES {
            let depth = usize::from(genes[s]);
            for cell in depth..MAX_DEPTH {
                genes[EXPANSION_OFFSET + s * MAX_DEPTH + cell] = 0;
            }
        }
        Self(genes)
    }

    pub fn is_canonical(&self) -> bool {
        *self == self.canonicalize()
    }

    pub fn to_vec(&self) -> Vec<i64> {
        self.0.iter().map(|&g| i64::from(g)).collect()
    }
}

impl fmt::Debug for Genotype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Genotype({:?})", &self.0[..])
    }
}

impl From<Genotype> for Vec<i64> {
    fn from(g: Genotype) -> Self {
        g.to_vec()
    }
}

impl<'de> Deserialize<'de> for Genotype {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let genes = Vec::<i64>::deserialize(de)?;
        Genotype::from_slice(&genes).map_err(serde::de::Error::custom)
    }
}

/// Checks length, per-gene domains and that at least one stage has cells.
pub fn validate(genes: &[i64]) -> Result<(), EncodingError> {
    if genes.len() != GENOME_LENGTH {
        return Err(EncodingError::Length(genes.len()));
    }
    for (position, &value) in genes.iter().enumerate() {
        if value < 0 || value > i64::from(SearchSpace.upper(position)) {
            return Err(EncodingError::Domain { position, value });
        }
    }
    if genes[..NUM_STAGES].iter().all(|&d| d == 0) {
        return Err(EncodingError::DegenerateArchitecture);
    }
    Ok(())
}

/// Validates and canonicalizes a raw gene vector.
pub fn canonicalize(genes: &[i64]) -> Result<Genotype, EncodingError> {
    Genotype::from_slice(genes).map(|g| g.canonicalize())
}

/// Draws one gene vector uniformly over the domains, rejecting all-zero depths.
pub fn random_genotype<R: Rng + ?Sized>(rng: &mut R) -> Genotype {
    loop {
        let mut genes = [0u8; GENOME_LENGTH];
        for (p, g) in genes.iter_mut().enumerate() {
            *g = rng.gen_range(0..=SearchSpace.upper(p));
        }
        if genes[..NUM_STAGES].iter().any(|&d| d > 0) {
            return Genotype(genes).canonicalize();
        }
    }
}

/// `n` valid canonical genotypes, deterministic in `seed`.
pub fn sample_random(n: usize, seed: u64) -> Result<Vec<Genotype>, EncodingError> {
    if n == 0 {
        return Err(EncodingError::EmptySample);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n).map(|_| random_genotype(&mut rng)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn genes_with_depths(depths: [i64; 4]) -> Vec<i64> {
        let mut g = vec![0; GENOME_LENGTH];
        g[..4].copy_from_slice(&depths);
        g
    }

    #[test]
    fn minimal_network_is_valid() {
        assert!(validate(&genes_with_depths([1, 0, 0, 0])).is_ok());
    }

    #[test]
    fn all_zero_depths_are_degenerate() {
        assert_eq!(
            validate(&genes_with_depths([0, 0, 0, 0])),
            Err(EncodingError::DegenerateArchitecture)
        );
    }

    #[test]
    fn depth_out_of_domain() {
        let g = genes_with_depths([1, 7, 0, 0]);
        assert_eq!(validate(&g), Err(EncodingError::Domain { position: 1, value: 7 }));
        let mut g = genes_with_depths([1, 0, 0, 0]);
        g[30] = 3;
        assert_eq!(validate(&g), Err(EncodingError::Domain { position: 30, value: 3 }));
        g[30] = -1;
        assert!(matches!(validate(&g), Err(EncodingError::Domain { position: 30, .. })));
    }

    #[test]
    fn wrong_length() {
        assert_eq!(validate(&[1; 31]), Err(EncodingError::Length(31)));
    }

    #[test]
    fn canonicalize_masks_inactive_cells() {
        let mut g = genes_with_depths([1, 0, 0, 0]);
        g[4..10].copy_from_slice(&[2, 1, 1, 1, 1, 1]);
        let c = canonicalize(&g).unwrap();
        assert_eq!(&c.genes()[4..10], &[2, 0, 0, 0, 0, 0]);
        assert_eq!(c.canonicalize(), c);
    }

    #[test]
    fn canonicalize_keeps_full_stage() {
        let mut g = genes_with_depths([6, 0, 0, 0]);
        g[4..10].copy_from_slice(&[2, 1, 0, 1, 2, 1]);
        let c = canonicalize(&g).unwrap();
        assert_eq!(c.to_vec(), g);
    }

    #[test]
    fn canonicalize_propagates_errors() {
        assert_eq!(
            canonicalize(&genes_with_depths([0, 0, 0, 0])),
            Err(EncodingError::DegenerateArchitecture)
        );
    }

    #[test]
    fn bounds_match_domains() {
        let (lo, hi) = bounds();
        assert_eq!(lo, vec![0; 32]);
        assert_eq!(&hi[0..4], &[6; 4]);
        assert_eq!(&hi[4..28], &[2; 24]);
        assert_eq!(&hi[28..32], &[2; 4]);
    }

    #[test]
    fn roles() {
        assert_eq!(SearchSpace.role(3), GeneRole::Depth { stage: 3 });
        assert_eq!(SearchSpace.role(4 + 6 * 2 + 5), GeneRole::Expansion { stage: 2, cell: 5 });
        assert_eq!(SearchSpace.role(31), GeneRole::Width { stage: 3 });
        assert_eq!(SearchSpace.genome_length(), 32);
    }

    #[test]
    fn sampling_is_deterministic_and_valid() {
        let a = sample_random(1000, 7).unwrap();
        let b = sample_random(1000, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 1000);
        for g in &a {
            assert!(validate(&g.to_vec()).is_ok());
            assert!(g.is_canonical());
        }
        assert_ne!(a, sample_random(1000, 8).unwrap());
        assert_eq!(sample_random(0, 1), Err(EncodingError::EmptySample));
    }

    #[test]
    fn json_is_plain_integer_array() {
        let g = sample_random(1, 3).unwrap()[0];
        let s = serde_json::to_string(&g).unwrap();
        assert!(s.starts_with('[') && s.matches(',').count() == 31);
        let back: Genotype = serde_json::from_str(&s).unwrap();
        assert_eq!(back, g);
        assert!(serde_json::from_str::<Genotype>(&format!("[{}]", ["0"; 32].join(","))).is_err());
    }
}
