//! Pareto dominance, hypervolume, and rank-sum statistics.

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IndicatorError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("algorithm {0:?} has {1} samples, expected {2}")]
    UnequalSamples(String, usize, usize),
    #[error("need at least {0} samples per group")]
    TooFewSamples(usize),
}

/// `a` weakly better everywhere and strictly better somewhere (minimization).
pub fn dominates(a: &[f64], b: &[f64]) -> Result<bool, IndicatorError> {
    if a.len() != b.len() {
        return Err(IndicatorError::Shape(format!("{} vs {} objectives", a.len(), b.len())));
    }
    Ok(dominates_unchecked(a, b))
}

pub(crate) fn dominates_unchecked(a: &[f64], b: &[f64]) -> bool {
    let mut strict = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        if x < y {
            strict = true;
        }
    }
    strict
}

fn check_arity(points: &[Vec<f64>], m: usize) -> Result<(), IndicatorError> {
    match points.iter().find(|p| p.len() != m) {
        Some(p) => Err(IndicatorError::Shape(format!("point with {} objectives, expected {m}", p.len()))),
        None => Ok(()),
    }
}

/// Fast non-dominated sorting; returns fronts of indices, best first.
pub fn non_dominated_sort(points: &[Vec<f64>]) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut dominated_by_count = vec![0usize; n];
    let mut dominates_list: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            if dominates_unchecked(&points[i], &points[j]) {
                dominates_list[i].push(j);
                dominated_by_count[j] += 1;
            } else if dominates_unchecked(&points[j], &points[i]) {
                dominates_list[j].push(i);
                dominated_by_count[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| dominated_by_count[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominates_list[i] {
                dominated_by_count[j] -= 1;
                if dominated_by_count[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }
    fronts
}

/// Indices of points not dominated by any other point.
pub fn non_dominated(points: &[Vec<f64>]) -> Vec<usize> {
    (0..points.len())
        .filter(|&i| !points.iter().any(|q| dominates_unchecked(q, &points[i])))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HvEstimate {
    pub value: f64,
    /// Zero for exact computations.
    pub std_error: f64,
    pub exact: bool,
}

/// Objective counts at or above this use Monte Carlo estimation.
pub const MONTE_CARLO_MIN_OBJECTIVES: usize = 5;
pub const MONTE_CARLO_SAMPLES: usize = 100_000;

fn prepare(front: &[Vec<f64>], reference: &[f64]) -> Result<Vec<Vec<f64>>, IndicatorError> {
    check_arity(front, reference.len())?;
    if let Some(p) = front.iter().find(|p| p.iter().any(|v| !v.is_finite())) {
        return Err(IndicatorError::Shape(format!("non-finite point {p:?}")));
    }
    // Clip into the reference box, drop points with zero volume, then keep the
    // unique non-dominated ones.
    let mut clipped: Vec<Vec<f64>> = front
        .iter()
        .map(|p| p.iter().zip(reference).map(|(v, r)| v.min(*r)).collect::<Vec<f64>>())
        .filter(|p| p.iter().zip(reference).all(|(v, r)| v < r))
        .collect();
    clipped.sort_by(|a, b| a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal));
    clipped.dedup();
    let keep = non_dominated(&clipped);
    Ok(keep.into_iter().map(|i| clipped[i].clone()).collect())
}

/// Hypervolume dominated by `front` and bounded by `reference`.
///
/// Exact for fewer than five objectives; otherwise a seeded Monte Carlo
/// estimate with [`MONTE_CARLO_SAMPLES`] samples.
pub fn hypervolume(front: &[Vec<f64>], reference: &[f64], seed: u64) -> Result<HvEstimate, IndicatorError> {
    if reference.len() < MONTE_CARLO_MIN_OBJECTIVES {
        Ok(HvEstimate { value: hypervolume_exact(front, reference)?, std_error: 0.0, exact: true })
    } else {
        hypervolume_monte_carlo(front, reference, MONTE_CARLO_SAMPLES, seed)
    }
}

/// Exact hypervolume by recursive exclusive-volume slicing.
pub fn hypervolume_exact(front: &[Vec<f64>], reference: &[f64]) -> Result<f64, IndicatorError> {
    let mut pts = prepare(front, reference)?;
    if pts.is_empty() {
        return Ok(0.0);
    }
    Ok(wfg(&mut pts, reference))
}

fn box_volume(p: &[f64], reference: &[f64]) -> f64 {
    p.iter().zip(reference).map(|(v, r)| r - v).product()
}

fn hv_2d(pts: &mut [Vec<f64>], reference: &[f64]) -> f64 {
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    let mut area = 0.0;
    let mut best_y = reference[1];
    for (i, p) in pts.iter().enumerate() {
        if p[1] >= best_y {
            continue;
        }
        let next_x = pts[i + 1..].iter().find(|q| q[1] < p[1]).map_or(reference[0], |q| q[0]);
        area += (next_x - p[0]) * (reference[1] - p[1]);
        best_y = p[1];
    }
    area
}

// `pts` must be mutually non-dominated.
fn wfg(pts: &mut [Vec<f64>], reference: &[f64]) -> f64 {
    match reference.len() {
        1 => reference[0] - pts.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min),
        2 => hv_2d(pts, reference),
        _ => {
            let last = reference.len() - 1;
            // Sorting worst-first on the last objective keeps limit sets small.
            pts.sort_by(|a, b| b[last].total_cmp(&a[last]));
            (0..pts.len()).map(|k| exclusive_hv(pts, k, reference)).sum()
        }
    }
}

fn exclusive_hv(pts: &[Vec<f64>], k: usize, reference: &[f64]) -> f64 {
    let p = &pts[k];
    let limited: Vec<Vec<f64>> =
        pts[k + 1..].iter().map(|q| q.iter().zip(p).map(|(a, b)| a.max(*b)).collect()).collect();
    let mut limited: Vec<Vec<f64>> = {
        let keep = non_dominated(&limited);
        let mut v: Vec<Vec<f64>> = keep.into_iter().map(|i| limited[i].clone()).collect();
        v.sort_by(|a, b| a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal));
        v.dedup();
        v
    };
    let own = box_volume(p, reference);
    if limited.is_empty() {
        own
    } else {
        own - wfg(&mut limited, reference)
    }
}

/// Exclusive contribution of each point: `HV(front) - HV(front without it)`.
pub fn exclusive_contributions(front: &[Vec<f64>], reference: &[f64]) -> Result<Vec<f64>, IndicatorError> {
    check_arity(front, reference.len())?;
    let clipped: Vec<Vec<f64>> =
        front.iter().map(|p| p.iter().zip(reference).map(|(v, r)| v.min(*r)).collect()).collect();
    let mut out = Vec::with_capacity(front.len());
    for (i, p) in clipped.iter().enumerate() {
        // weakly dominated points (including duplicates) own no exclusive volume
        let covered_by_other =
            clipped.iter().enumerate().any(|(j, q)| j != i && q.iter().zip(p).all(|(a, b)| a <= b));
        if covered_by_other || p.iter().zip(reference).any(|(v, r)| v >= r) {
            out.push(0.0);
            continue;
        }
        let limited: Vec<Vec<f64>> = clipped
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, q)| q.iter().zip(p).map(|(a, b)| a.max(*b)).collect())
            .collect();
        let own = box_volume(p, reference);
        let covered = hypervolume_exact(&limited, reference)?;
        out.push((own - covered).max(0.0));
    }
    Ok(out)
}

/// Uniform sampling of the box between the lower corner of the front (or the
/// origin, whichever is lower) and `reference`.
pub fn hypervolume_monte_carlo(
    front: &[Vec<f64>],
    reference: &[f64],
    samples: usize,
    seed: u64,
) -> Result<HvEstimate, IndicatorError> {
    let pts = prepare(front, reference)?;
    if pts.is_empty() || samples == 0 {
        return Ok(HvEstimate { value: 0.0, std_error: 0.0, exact: false });
    }
    let m = reference.len();
    let lower: Vec<f64> =
        (0..m).map(|j| pts.iter().map(|p| p[j]).fold(0.0f64, f64::min)).collect();
    let volume: f64 = lower.iter().zip(reference).map(|(l, r)| r - l).product();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = vec![0.0; m];
    let mut hits = 0usize;
    for _ in 0..samples {
        for j in 0..m {
            u[j] = rng.gen_range(lower[j]..reference[j]);
        }
        if pts.iter().any(|p| p.iter().zip(&u).all(|(a, b)| a <= b)) {
            hits += 1;
        }
    }
    let frac = hits as f64 / samples as f64;
    Ok(HvEstimate {
        value: volume * frac,
        std_error: volume * (frac * (1.0 - frac) / samples as f64).sqrt(),
        exact: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankSumResult {
    /// Mann-Whitney U of the first sample.
    pub u: f64,
    pub z: f64,
    pub p_value: f64,
    /// `p_value >= alpha`.
    pub same: bool,
}

/// Two-sided Wilcoxon rank-sum test, normal approximation with tie correction.
pub fn rank_sum_test(x: &[f64], y: &[f64], alpha: f64) -> Result<RankSumResult, IndicatorError> {
    rank_sum_test_with(x, y, alpha, false)
}

/// As [`rank_sum_test`], optionally shrinking `|U - mean|` by the 0.5 continuity correction.
pub fn rank_sum_test_with(
    x: &[f64],
    y: &[f64],
    alpha: f64,
    continuity_correction: bool,
) -> Result<RankSumResult, IndicatorError> {
    if x.len() < 2 || y.len() < 2 {
        return Err(IndicatorError::TooFewSamples(2));
    }
    let nx = x.len() as f64;
    let ny = y.len() as f64;
    let n = nx + ny;
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let ranks = crate::surrogate::average_ranks(&pooled);
    let rank_sum_x: f64 = ranks[..x.len()].iter().sum();
    let u = rank_sum_x - nx * (nx + 1.0) / 2.0;

    let mut sorted = pooled.clone();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        i = j;
    }
    let mean = nx * ny / 2.0;
    let var = nx * ny / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    let mut dev = (u - mean).abs();
    if continuity_correction {
        dev = (dev - 0.5).max(0.0);
    }
    let (z, p_value) = if var <= 0.0 {
        (0.0, 1.0)
    } else {
        let z = dev / var.sqrt();
        (z, erfc(z / std::f64::consts::SQRT_2).min(1.0))
    };
    Ok(RankSumResult { u, z, p_value, same: p_value >= alpha })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StatLabel {
    #[serde(rename = "+")]
    Best,
    #[serde(rename = "-")]
    Worst,
    #[serde(rename = "≈")]
    Tie,
}

impl StatLabel {
    pub fn symbol(self) -> &'static str {
        match self {
            StatLabel::Best => "+",
            StatLabel::Worst => "-",
            StatLabel::Tie => "≈",
        }
    }
}

impl fmt::Display for StatLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub mean: f64,
    pub std: f64,
    pub label: StatLabel,
    /// Rank-sum p-value against the best algorithm; 1 for the best itself.
    pub p_value: f64,
}

pub fn mean_std(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Labels each algorithm against the one with the highest mean.
///
/// Equal means are broken by algorithm name, so the result does not depend on
/// insertion order.
pub fn label_table(
    samples: &BTreeMap<String, Vec<f64>>,
    alpha: f64,
) -> Result<BTreeMap<String, CellStats>, IndicatorError> {
    let Some(count) = samples.values().next().map(Vec::len) else {
        return Ok(BTreeMap::new());
    };
    for (name, s) in samples {
        if s.len() != count {
            return Err(IndicatorError::UnequalSamples(name.clone(), s.len(), count));
        }
    }
    let stats: BTreeMap<&String, (f64, f64)> = samples.iter().map(|(k, v)| (k, mean_std(v))).collect();
    let best = stats
        .iter()
        .fold(None::<(&String, f64)>, |acc, (name, &(mean, _))| match acc {
            Some((_, m)) if m >= mean => acc,
            _ => Some((name, mean)),
        })
        .map(|(name, _)| name.clone())
        .expect("non-empty");
    let mut out = BTreeMap::new();
    for (name, s) in samples {
        let (mean, std) = stats[name];
        let (label, p_value) = if *name == best {
            (StatLabel::Best, 1.0)
        } else if count < 2 {
            (if mean == stats[&best].0 { StatLabel::Tie } else { StatLabel::Worst }, f64::NAN)
        } else {
            let t = rank_sum_test(s, &samples[&best], alpha)?;
            (if t.same { StatLabel::Tie } else { StatLabel::Worst }, t.p_value)
        };
        out.insert(name.clone(), CellStats { mean, std, label, p_value });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dominance_examples() {
        assert!(dominates(&[1.0, 2.0], &[2.0, 3.0]).unwrap());
        assert!(!dominates(&[1.0, 2.0], &[1.0, 2.0]).unwrap());
        assert!(!dominates(&[1.0, 3.0], &[2.0, 2.0]).unwrap());
        assert!(!dominates(&[2.0, 2.0], &[1.0, 3.0]).unwrap());
        assert!(dominates(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn sorting_small_case() {
        let pts = vec![vec![1.0, 4.0], vec![2.0, 2.0], vec![3.0, 3.0], vec![4.0, 1.0], vec![5.0, 5.0]];
        assert_eq!(non_dominated_sort(&pts), vec![vec![0, 1, 3], vec![2], vec![4]]);
        assert_eq!(non_dominated(&pts), vec![0, 1, 3]);
        assert!(non_dominated_sort(&[]).is_empty());
    }

    #[test]
    fn hv_examples() {
        assert_eq!(hypervolume_exact(&[vec![0.5, 0.5]], &[1.0, 1.0]).unwrap(), 0.25);
        let hv = hypervolume_exact(&[vec![0.25, 0.75], vec![0.75, 0.25]], &[1.0, 1.0]).unwrap();
        assert!((hv - 0.3125).abs() < 1e-15);
        assert_eq!(hypervolume_exact(&[], &[1.0, 1.0]).unwrap(), 0.0);
        // clipped points contribute nothing
        assert_eq!(hypervolume_exact(&[vec![0.5, 1.5]], &[1.0, 1.0]).unwrap(), 0.0);
        let hv3 = hypervolume_exact(&[vec![0.5, 0.5, 0.5]], &[1.0; 3]).unwrap();
        assert!((hv3 - 0.125).abs() < 1e-15);
        let e = hypervolume(&[vec![0.5; 4]], &[1.0; 4], 0).unwrap();
        assert!(e.exact && (e.value - 0.0625).abs() < 1e-15);
    }

    #[test]
    fn hv_3d_two_boxes() {
        // union of two boxes by inclusion-exclusion
        let a = vec![0.2, 0.6, 0.4];
        let b = vec![0.5, 0.3, 0.7];
        let va = 0.8 * 0.4 * 0.6;
        let vb = 0.5 * 0.7 * 0.3;
        let vab = 0.5 * 0.4 * 0.3;
        let hv = hypervolume_exact(&[a, b], &[1.0; 3]).unwrap();
        assert!((hv - (va + vb - vab)).abs() < 1e-14);
    }

    #[test]
    fn monte_carlo_single_box() {
        let e = hypervolume(&[vec![0.5; 5]], &[1.0; 5], 3).unwrap();
        assert!(!e.exact);
        let exact = 0.5f64.powi(5);
        assert!((e.value - exact).abs() < 4.0 * e.std_error.max(1e-4));
    }

    #[test]
    fn contributions() {
        let pts = vec![vec![0.25, 0.75], vec![0.75, 0.25], vec![0.8, 0.8], vec![0.25, 0.75]];
        let c = exclusive_contributions(&pts, &[1.0, 1.0]).unwrap();
        assert_eq!(c[2], 0.0);
        assert_eq!(c[0], 0.0);
        assert_eq!(c[3], 0.0);
        assert!((c[1] - 0.5 * 0.25 * 1.0).abs() < 1e-12, "{c:?}");
    }

    #[test]
    fn rank_sum_examples() {
        let x: Vec<f64> = (0..31).map(|i| 0.5 + i as f64 * 0.001).collect();
        let t = rank_sum_test(&x, &x, 0.05).unwrap();
        assert_eq!(t.p_value, 1.0);
        assert!(t.same);
        let hi: Vec<f64> = x.iter().map(|v| v + 1.0).collect();
        let t = rank_sum_test(&hi, &x, 0.05).unwrap();
        assert!(t.p_value < 1e-6 && !t.same);

        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let b = [6.0, 7.0, 8.0, 9.0, 10.0];
        let t = rank_sum_test_with(&a, &b, 0.05, true).unwrap();
        assert_eq!(t.u, 0.0);
        assert!((t.p_value - 0.0122).abs() < 5e-5, "{}", t.p_value);
        let t = rank_sum_test(&a, &b, 0.05).unwrap();
        assert!((t.p_value - 0.009023).abs() < 1e-5, "{}", t.p_value);
        assert!(rank_sum_test(&[1.0], &b, 0.05).is_err());
        let constant = [0.3; 6];
        assert_eq!(rank_sum_test(&constant, &constant, 0.05).unwrap().p_value, 1.0);
    }

    #[test]
    fn labels() {
        let same: Vec<f64> = (0..31).map(|i| (i as f64).sin()).collect();
        let names = ["nsga2", "nsga3", "moead", "rvea", "ibea", "hype"];
        let samples: BTreeMap<String, Vec<f64>> = names.iter().map(|n| (n.to_string(), same.clone())).collect();
        let t = label_table(&samples, 0.05).unwrap();
        assert_eq!(t.values().filter(|c| c.label == StatLabel::Best).count(), 1);
        assert_eq!(t.values().filter(|c| c.label == StatLabel::Tie).count(), 5);

        let mut samples = samples;
        samples.insert("hype".into(), same.iter().map(|v| v + 10.0).collect());
        let t = label_table(&samples, 0.05).unwrap();
        assert_eq!(t["hype"].label, StatLabel::Best);
        assert!(names[..5].iter().all(|n| t[*n].label == StatLabel::Worst));

        samples.insert("rvea".into(), vec![0.0; 3]);
        assert!(matches!(label_table(&samples, 0.05), Err(IndicatorError::UnequalSamples(..))));
    }
}
