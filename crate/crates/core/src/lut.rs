//! Look-up-table evaluation of complexity and hardware objectives.
//!
//! Whole-network metrics are the sum of a stem entry, one entry per active
//! cell keyed by `(stage, width, expansion)`, and a tail entry. Hardware
//! metrics can additionally be scaled by a bounded random factor that models
//! run-to-run fluctuation on the device.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoding::{Genotype, EXPANSION_RATIOS, MAX_DEPTH, NUM_STAGES, WIDTH_MULTIPLIERS};

const NUM_WIDTHS: usize = WIDTH_MULTIPLIERS.len();
const NUM_EXPANSIONS: usize = EXPANSION_RATIOS.len();
const NUM_METRICS: usize = 6;
const NUM_UNITS: usize = NUM_STAGES * NUM_WIDTHS * NUM_EXPANSIONS;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LutError {
    #[error("cost table has no entry for {0}")]
    IncompleteTable(TableKey),
    #[error("scale target for {0} must be strictly positive, got {1}")]
    InvalidScaleTarget(MetricKind, f64),
    #[error("missing scale target for {0}")]
    MissingScaleTarget(MetricKind),
    #[error("perturbation range [{0}, {1}] must satisfy 0 < low <= 1 <= high")]
    InvalidRange(f64, f64),
    #[error("unit key out of range: stage {stage}, width {width}, expansion {expansion}")]
    KeyOutOfRange { stage: usize, width: usize, expansion: usize },
    #[error("negative or non-finite cost {1} for {0}")]
    InvalidCost(TableKey, f64),
    #[error("unknown metric name {0:?}")]
    UnknownMetric(String),
    #[error("malformed cost table file: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum HardwarePlatform {
    /// Desktop GPU.
    H1,
    /// ARM edge accelerator.
    H2,
}

impl HardwarePlatform {
    pub const ALL: [HardwarePlatform; 2] = [HardwarePlatform::H1, HardwarePlatform::H2];

    pub fn description(self) -> &'static str {
        match self {
            HardwarePlatform::H1 => "NVIDIA GeForce RTX 4090",
            HardwarePlatform::H2 => "Huawei Atlas 200 DK",
        }
    }

    fn index(self) -> usize {
        match self {
            HardwarePlatform::H1 => 0,
            HardwarePlatform::H2 => 1,
        }
    }
}

/// A quantity stored in the cost table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MetricKind {
    Flops,
    Params,
    Latency(HardwarePlatform),
    Energy(HardwarePlatform),
}

impl MetricKind {
    pub const ALL: [MetricKind; NUM_METRICS] = [
        MetricKind::Flops,
        MetricKind::Params,
        MetricKind::Latency(HardwarePlatform::H1),
        MetricKind::Latency(HardwarePlatform::H2),
        MetricKind::Energy(HardwarePlatform::H1),
        MetricKind::Energy(HardwarePlatform::H2),
    ];

    pub fn index(self) -> usize {
        match self {
            MetricKind::Flops => 0,
            MetricKind::Params => 1,
            MetricKind::Latency(h) => 2 + h.index(),
            MetricKind::Energy(h) => 4 + h.index(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Flops => "flops",
            MetricKind::Params => "params",
            MetricKind::Latency(HardwarePlatform::H1) => "latency_h1",
            MetricKind::Latency(HardwarePlatform::H2) => "latency_h2",
            MetricKind::Energy(HardwarePlatform::H1) => "energy_h1",
            MetricKind::Energy(HardwarePlatform::H2) => "energy_h2",
        }
    }

    pub fn is_hardware(self) -> bool {
        matches!(self, MetricKind::Latency(_) | MetricKind::Energy(_))
    }

    /// Fluctuation range applied to hardware metrics; complexity metrics are exact.
    pub fn perturbation_range(self) -> Option<PerturbationRange> {
        match self {
            MetricKind::Latency(_) => Some(PerturbationRange::LATENCY),
            MetricKind::Energy(_) => Some(PerturbationRange::ENERGY),
            _ => None,
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricKind {
    type Err = LutError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MetricKind::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| LutError::UnknownMetric(s.to_string()))
    }
}

impl Serialize for MetricKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for MetricKind {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let s = String::deserialize(de)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Identifies one cost table entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableKey {
    Stem(MetricKind),
    Tail(MetricKind),
    Unit { stage: usize, width: usize, expansion: usize, metric: MetricKind },
}

impl fmt::Display for TableKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TableKey::Stem(m) => write!(f, "stem/{m}"),
            TableKey::Tail(m) => write!(f, "tail/{m}"),
            TableKey::Unit { stage, width, expansion, metric } => {
                write!(f, "unit(stage={stage}, width={width}, expansion={expansion})/{metric}")
            }
        }
    }
}

/// Multiplicative fluctuation interval for hardware measurements.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationRange {
    low: f64,
    high: f64,
}

impl PerturbationRange {
    pub const LATENCY: PerturbationRange = PerturbationRange { low: 0.95, high: 1.05 };
    pub const ENERGY: PerturbationRange = PerturbationRange { low: 0.98, high: 1.02 };
    pub const NONE: PerturbationRange = PerturbationRange { low: 1.0, high: 1.0 };

    pub fn new(low: f64, high: f64) -> Result<Self, LutError> {
        if low > 0.0 && low <= 1.0 && 1.0 <= high && high.is_finite() {
            Ok(Self { low, high })
        } else {
            Err(LutError::InvalidRange(low, high))
        }
    }

    pub fn low(&self) -> f64 {
        self.low
    }

    pub fn high(&self) -> f64 {
        self.high
    }
}

/// Scales `base` by a factor drawn uniformly from `range`.
pub fn perturb<R: Rng + ?Sized>(base: f64, range: PerturbationRange, rng: &mut R) -> f64 {
    if range.low == range.high {
        return base * range.low;
    }
    base * rng.gen_range(range.low..=range.high)
}

/// Per-evaluation random streams derived from a run seed and an evaluation counter.
///
/// Evaluation `k` of a run always draws from stream `k` of the run seed, so a
/// batch evaluated in one call or split across several calls sees the same
/// noise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NoiseSource {
    seed: u64,
    counter: u64,
}

impl NoiseSource {
    pub fn new(seed: u64) -> Self {
        Self { seed, counter: 0 }
    }

    pub fn evaluations(&self) -> u64 {
        self.counter
    }

    pub fn next_rng(&mut self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.counter);
        self.counter += 1;
        rng
    }
}

/// Per-unit metric table.
#[derive(Debug, Clone, PartialEq)]
pub struct CostTable {
    stem: [Option<f64>; NUM_METRICS],
    tail: [Option<f64>; NUM_METRICS],
    units: Vec<Option<f64>>,
}

fn unit_index(stage: usize, width: usize, expansion: usize, metric: MetricKind) -> usize {
    ((stage * NUM_WIDTHS + width) * NUM_EXPANSIONS + expansion) * NUM_METRICS + metric.index()
}

impl Default for CostTable {
    fn default() -> Self {
        Self::empty()
    }
}

impl CostTable {
    pub fn empty() -> Self {
        Self {
            stem: [None; NUM_METRICS],
            tail: [None; NUM_METRICS],
            units: vec![None; NUM_UNITS * NUM_METRICS],
        }
    }

    pub fn set(&mut self, key: TableKey, cost: f64) -> Result<(), LutError> {
        if !(cost >= 0.0 && cost.is_finite()) {
            return Err(LutError::InvalidCost(key, cost));
        }
        match key {
            TableKey::Stem(m) => self.stem[m.index()] = Some(cost),
            TableKey::Tail(m) => self.tail[m.index()] = Some(cost),
            TableKey::Unit { stage, width, expansion, metric } => {
                if stage >= NUM_STAGES || width >= NUM_WIDTHS || expansion >= NUM_EXPANSIONS {
                    return Err(LutError::KeyOutOfRange { stage, width, expansion });
                }
                self.units[unit_index(stage, width, expansion, metric)] = Some(cost);
            }
        }
        Ok(())
    }

    pub fn get(&self, key: TableKey) -> Result<f64, LutError> {
        let entry = match key {
            TableKey::Stem(m) => self.stem[m.index()],
            TableKey::Tail(m) => self.tail[m.index()],
            TableKey::Unit { stage, width, expansion, metric } => {
                if stage >= NUM_STAGES || width >= NUM_WIDTHS || expansion >= NUM_EXPANSIONS {
                    None
                } else {
                    self.units[unit_index(stage, width, expansion, metric)]
                }
            }
        };
        entry.ok_or(LutError::IncompleteTable(key))
    }

    pub fn unit(&self, stage: usize, width: usize, expansion: usize, metric: MetricKind) -> Result<f64, LutError> {
        self.get(TableKey::Unit { stage, width, expansion, metric })
    }

    pub fn keys() -> impl Iterator<Item = TableKey> {
        let stems = MetricKind::ALL.into_iter().map(TableKey::Stem);
        let tails = MetricKind::ALL.into_iter().map(TableKey::Tail);
        let units = (0..NUM_STAGES).flat_map(|stage| {
            (0..NUM_WIDTHS).flat_map(move |width| {
                (0..NUM_EXPANSIONS).flat_map(move |expansion| {
                    MetricKind::ALL
                        .into_iter()
                        .map(move |metric| TableKey::Unit { stage, width, expansion, metric })
                })
            })
        });
        stems.chain(tails).chain(units)
    }

    /// First missing entry, if any.
    pub fn check_complete(&self) -> Result<(), LutError> {
        Self::keys().try_for_each(|k| self.get(k).map(|_| ()))
    }

    /// Stem + active cells + tail, without perturbation.
    pub fn compose_cost(&self, g: &Genotype, metric: MetricKind) -> Result<f64, LutError> {
        let mut total = self.get(TableKey::Stem(metric))?;
        for (stage, width, expansion) in g.active_cells() {
            total += self.unit(stage, width, expansion, metric)?;
        }
        Ok(total + self.get(TableKey::Tail(metric))?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&CostTableFile::from(self)).expect("cost table serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, LutError> {
        let file: CostTableFile = serde_json::from_str(s).map_err(|e| LutError::Format(e.to_string()))?;
        file.try_into()
    }
}

#[derive(Serialize, Deserialize)]
struct UnitEntry {
    stage: usize,
    width: usize,
    expansion: usize,
    metric: MetricKind,
    cost: f64,
}

#[derive(Serialize, Deserialize)]
struct CostTableFile {
    stem: BTreeMap<MetricKind, f64>,
    tail: BTreeMap<MetricKind, f64>,
    units: Vec<UnitEntry>,
}

impl From<&CostTable> for CostTableFile {
    fn from(t: &CostTable) -> Self {
        let mut file = CostTableFile { stem: BTreeMap::new(), tail: BTreeMap::new(), units: Vec::new() };
        for key in CostTable::keys() {
            let Ok(cost) = t.get(key) else { continue };
            match key {
                TableKey::Stem(m) => {
                    file.stem.insert(m, cost);
                }
                TableKey::Tail(m) => {
                    file.tail.insert(m, cost);
                }
                TableKey::Unit { stage, width, expansion, metric } => {
                    file.units.push(UnitEntry { stage, width, expansion, metric, cost })
                }
            }
        }
        file
    }
}

impl TryFrom<CostTableFile> for CostTable {
    type Error = LutError;

    fn try_from(file: CostTableFile) -> Result<Self, LutError> {
        let mut t = CostTable::empty();
        for (m, c) in file.stem {
            t.set(TableKey::Stem(m), c)?;
        }
        for (m, c) in file.tail {
            t.set(TableKey::Tail(m), c)?;
        }
        for u in file.units {
            t.set(
                TableKey::Unit { stage: u.stage, width: u.width, expansion: u.expansion, metric: u.metric },
                u.cost,
            )?;
        }
        Ok(t)
    }
}

/// Whole-network values of the largest architecture, used both as calibration
/// targets for the synthetic table and as normalization bounds.
pub fn default_scale_targets() -> BTreeMap<MetricKind, f64> {
    use HardwarePlatform::*;
    BTreeMap::from([
        (MetricKind::Flops, 3.3107e8),
        (MetricKind::Params, 1.3251e5),
        (MetricKind::Latency(H1), 1.9741),
        (MetricKind::Latency(H2), 58.7465),
        (MetricKind::Energy(H1), 678.0692),
        (MetricKind::Energy(H2), 734.3339),
    ])
}

/// The genotype with every gene at its upper bound.
pub fn max_cost_genotype() -> Genotype {
    let (_, upper) = crate::encoding::bounds();
    Genotype::from_slice(&upper).expect("upper bounds form a valid genotype")
}

// Per-stage growth of unit cost. Later stages run at lower resolution with
// more channels: FLOPs grow moderately, parameters steeply.
const STAGE_GROWTH: [[f64; NUM_STAGES]; NUM_METRICS] = [
    [1.0, 1.5, 2.2, 250.0],   // flops
    [1.0, 4.0, 16.0, 64.0], // params
    [1.0, 1.4, 2.0, 5.0],   // latency h1
    [1.0, 1.8, 3.2, 9.0],   // latency h2
    [1.0, 1.5, 2.4, 7.0],   // energy h1
    [1.0, 1.7, 2.9, 8.5],   // energy h2
];

// Fixed per-cell overhead (kernel launch, memory traffic) relative to the
// stage-0 unit cost. Zero for the counting metrics.
const CELL_OVERHEAD: [f64; NUM_METRICS] = [0.0, 0.0, 3.0, 1.0, 1.5, 0.8];

fn raw_unit_cost(metric: MetricKind, stage: usize, width: usize, expansion: usize) -> f64 {
    let m = metric.index();
    let w = 1.0 + width as f64 / 4.0;
    let ratio = EXPANSION_RATIOS[expansion];
    let shape = match metric {
        MetricKind::Flops | MetricKind::Params => w * w * ratio,
        MetricKind::Latency(HardwarePlatform::H1) => w.powf(1.2) * ratio.powf(0.6),
        MetricKind::Latency(HardwarePlatform::H2) => w.powf(1.8) * ratio.powf(0.9),
        MetricKind::Energy(HardwarePlatform::H1) => w.powf(1.5) * ratio.powf(0.8),
        MetricKind::Energy(HardwarePlatform::H2) => w.powf(1.9) * ratio.powf(0.95),
    };
    STAGE_GROWTH[m][stage] * (CELL_OVERHEAD[m] + shape)
}

/// Deterministic synthetic table whose largest architecture composes to the
/// given per-metric targets.
///
/// Unit costs follow residual-bottleneck scaling (quadratic in width and
/// linear in expansion for FLOPs and parameters, sub-linear for the hardware
/// metrics), times a seeded jitter in `[0.97, 1.03]`. The stem and tail
/// contribute fixed fractions of the total. Every metric is then rescaled so
/// the all-maximum genotype hits its target.
pub fn generate_synthetic_table(seed: u64, scale_targets: &BTreeMap<MetricKind, f64>) -> Result<CostTable, LutError> {
    for m in MetricKind::ALL {
        match scale_targets.get(&m) {
            None => return Err(LutError::MissingScaleTarget(m)),
            Some(&v) if !(v > 0.0 && v.is_finite()) => return Err(LutError::InvalidScaleTarget(m, v)),
            Some(_) => {}
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut raw = CostTable::empty();
    for stage in 0..NUM_STAGES {
        for width in 0..NUM_WIDTHS {
            for expansion in 0..NUM_EXPANSIONS {
                for metric in MetricKind::ALL {
                    let jitter = rng.gen_range(0.97..=1.03);
                    let cost = raw_unit_cost(metric, stage, width, expansion) * jitter;
                    raw.set(TableKey::Unit { stage, width, expansion, metric }, cost)?;
                }
            }
        }
    }
    let max_g = max_cost_genotype();
    let top = NUM_WIDTHS - 1;
    for metric in MetricKind::ALL {
        let cells: f64 = (0..NUM_STAGES)
            .map(|s| MAX_DEPTH as f64 * raw.unit(s, top, NUM_EXPANSIONS - 1, metric).unwrap())
            .sum();
        raw.set(TableKey::Stem(metric), 0.03 * cells)?;
        raw.set(TableKey::Tail(metric), 0.01 * cells)?;
    }

    let mut table = CostTable::empty();
    for metric in MetricKind::ALL {
        let scale = scale_targets[&metric] / raw.compose_cost(&max_g, metric)?;
        for key in CostTable::keys() {
            let metric_of_key = match key {
                TableKey::Stem(m) | TableKey::Tail(m) | TableKey::Unit { metric: m, .. } => m,
            };
            if metric_of_key == metric {
                table.set(key, raw.get(key)? * scale)?;
            }
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::{sample_random, GENOME_LENGTH};

    fn table() -> CostTable {
        generate_synthetic_table(0, &default_scale_targets()).unwrap()
    }

    fn genotype(depths: [i64; 4], widths: [i64; 4], fill_expansion: i64) -> Genotype {
        let mut g = vec![fill_expansion; GENOME_LENGTH];
        g[..4].copy_from_slice(&depths);
        g[28..].copy_from_slice(&widths);
        Genotype::from_slice(&g).unwrap().canonicalize()
    }

    #[test]
    fn single_unit_sum() {
        let t = table();
        let g = genotype([1, 0, 0, 0], [0; 4], 0);
        for m in MetricKind::ALL {
            let want = t.get(TableKey::Stem(m)).unwrap() + t.unit(0, 0, 0, m).unwrap() + t.get(TableKey::Tail(m)).unwrap();
            assert_eq!(t.compose_cost(&g, m).unwrap(), want);
        }
    }

    #[test]
    fn repeated_cells_count_twice() {
        let t = table();
        let one = genotype([1, 0, 0, 0], [1; 4], 2);
        let two = genotype([2, 0, 0, 0], [1; 4], 2);
        let unit = t.unit(0, 1, 2, MetricKind::Flops).unwrap();
        let diff = t.compose_cost(&two, MetricKind::Flops).unwrap() - t.compose_cost(&one, MetricKind::Flops).unwrap();
        assert!((diff - unit).abs() <= 1e-9 * unit);
    }

    #[test]
    fn max_genotype_hits_targets() {
        let t = table();
        let g = max_cost_genotype();
        for (m, target) in default_scale_targets() {
            let v = t.compose_cost(&g, m).unwrap();
            assert!((v / target - 1.0).abs() < 0.01, "{m}: {v} vs {target}");
        }
        let flops = t.compose_cost(&g, MetricKind::Flops).unwrap();
        assert!((3.2776e8..=3.3438e8).contains(&flops));
        let ratio = t.compose_cost(&g, MetricKind::Latency(HardwarePlatform::H2)).unwrap()
            / t.compose_cost(&g, MetricKind::Latency(HardwarePlatform::H1)).unwrap();
        assert!((ratio / (58.7465 / 1.9741) - 1.0).abs() < 0.05);
    }

    #[test]
    fn synthetic_table_is_deterministic_and_complete() {
        let a = table();
        assert_eq!(a, table());
        assert_ne!(a, generate_synthetic_table(1, &default_scale_targets()).unwrap());
        a.check_complete().unwrap();
    }

    #[test]
    fn counting_metrics_strictly_increase() {
        let t = table();
        for m in [MetricKind::Flops, MetricKind::Params] {
            for s in 0..NUM_STAGES {
                for w in 0..NUM_WIDTHS {
                    for e in 1..NUM_EXPANSIONS {
                        assert!(t.unit(s, w, e, m).unwrap() > t.unit(s, w, e - 1, m).unwrap());
                    }
                }
                for e in 0..NUM_EXPANSIONS {
                    for w in 1..NUM_WIDTHS {
                        assert!(t.unit(s, w, e, m).unwrap() > t.unit(s, w - 1, e, m).unwrap());
                    }
                }
            }
        }
    }

    #[test]
    fn bad_scale_targets() {
        let mut targets = default_scale_targets();
        targets.insert(MetricKind::Flops, 0.0);
        assert!(matches!(
            generate_synthetic_table(0, &targets),
            Err(LutError::InvalidScaleTarget(MetricKind::Flops, _))
        ));
        targets.remove(&MetricKind::Flops);
        assert_eq!(generate_synthetic_table(0, &targets), Err(LutError::MissingScaleTarget(MetricKind::Flops)));
    }

    #[test]
    fn missing_entry_is_reported() {
        let mut t = CostTable::empty();
        for m in MetricKind::ALL {
            t.set(TableKey::Stem(m), 1.0).unwrap();
            t.set(TableKey::Tail(m), 1.0).unwrap();
        }
        let g = genotype([1, 0, 0, 0], [0; 4], 0);
        let key = TableKey::Unit { stage: 0, width: 0, expansion: 0, metric: MetricKind::Flops };
        assert_eq!(t.compose_cost(&g, MetricKind::Flops), Err(LutError::IncompleteTable(key)));
        assert!(t.check_complete().is_err());
        assert!(t.set(key, -1.0).is_err());
    }

    #[test]
    fn perturbation_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let v = perturb(10.0, PerturbationRange::LATENCY, &mut rng);
            assert!((9.5..=10.5).contains(&v));
            let v = perturb(100.0, PerturbationRange::ENERGY, &mut rng);
            assert!((98.0..=102.0).contains(&v));
            assert_eq!(perturb(0.0, PerturbationRange::LATENCY, &mut rng), 0.0);
        }
        assert_eq!(perturb(3.25, PerturbationRange::NONE, &mut rng), 3.25);
    }

    #[test]
    fn perturbation_range_validation() {
        assert!(PerturbationRange::new(0.95, 1.05).is_ok());
        assert!(PerturbationRange::new(1.0, 1.0).is_ok());
        assert!(PerturbationRange::new(1.01, 1.05).is_err());
        assert!(PerturbationRange::new(0.0, 1.05).is_err());
        assert!(PerturbationRange::new(0.9, 0.99).is_err());
        assert_eq!(MetricKind::Flops.perturbation_range(), None);
        assert_eq!(MetricKind::Energy(HardwarePlatform::H2).perturbation_range(), Some(PerturbationRange::ENERGY));
    }

    #[test]
    fn noise_streams_are_replayable() {
        let mut a = NoiseSource::new(9);
        let mut b = NoiseSource::new(9);
        let xa: Vec<f64> = (0..5).map(|_| a.next_rng().gen()).collect();
        let xb: Vec<f64> = (0..5).map(|_| b.next_rng().gen()).collect();
        assert_eq!(xa, xb);
        assert_eq!(a.evaluations(), 5);
        assert_ne!(xa[0], xa[1]);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let t = table();
        let back = CostTable::from_json(&t.to_json()).unwrap();
        assert_eq!(back, t);
        let g = sample_random(50, 2).unwrap();
        for g in &g {
            for m in MetricKind::ALL {
                assert_eq!(t.compose_cost(g, m).unwrap().to_bits(), back.compose_cost(g, m).unwrap().to_bits());
            }
        }
        let json: serde_json::Value = serde_json::from_str(&t.to_json()).unwrap();
        assert_eq!(json["units"].as_array().unwrap().len(), 36 * 6);
        assert!(json["stem"]["latency_h2"].is_number());
        assert!(CostTable::from_json("{\"stem\":{\"bogus\":1}}").is_err());
    }

    #[test]
    fn metric_names_parse() {
        for m in MetricKind::ALL {
            assert_eq!(m.name().parse::<MetricKind>().unwrap(), m);
        }
        assert!("latency_h3".parse::<MetricKind>().is_err());
    }
}
