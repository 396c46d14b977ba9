//! The fifteen benchmark instances and their batch evaluation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoding::{Genotype, GENOME_LENGTH};
use crate::lut::{perturb, CostTable, HardwarePlatform, LutError, MetricKind, NoiseSource};
use crate::surrogate::SurrogateModel;

pub const NUM_PROBLEMS: usize = 15;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error("unknown problem id {0} (expected 1..=15)")]
    UnknownProblem(usize),
    #[error("no evaluator loaded for objective {0}")]
    EvaluatorUnavailable(Objective),
    #[error("expected {expected} objective values, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("unknown objective name {0:?}")]
    UnknownObjective(String),
    #[error(transparent)]
    Lut(#[from] LutError),
}

/// One minimized objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Objective {
    /// Prediction error, `1 - mIoU`.
    Error,
    Cost(MetricKind),
}

impl Objective {
    pub fn name(self) -> &'static str {
        match self {
            Objective::Error => "error",
            Objective::Cost(m) => m.name(),
        }
    }

    /// Normalization bound: the value of the largest architecture, 1 for error.
    pub fn bound(self) -> f64 {
        use HardwarePlatform::*;
        match self {
            Objective::Error => 1.0,
            Objective::Cost(MetricKind::Flops) => 3.3107e8,
            Objective::Cost(MetricKind::Params) => 1.3251e5,
            Objective::Cost(MetricKind::Latency(H1)) => 1.9741,
            Objective::Cost(MetricKind::Latency(H2)) => 58.7465,
            Objective::Cost(MetricKind::Energy(H1)) => 678.0692,
            Objective::Cost(MetricKind::Energy(H2)) => 734.3339,
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Objective {
    type Err = ProblemError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "error" {
            return Ok(Objective::Error);
        }
        s.parse::<MetricKind>()
            .map(Objective::Cost)
            .map_err(|_| ProblemError::UnknownObjective(s.to_string()))
    }
}

impl Serialize for Objective {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Objective {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        String::deserialize(de)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveSpec {
    pub kind: Objective,
    pub bound: f64,
}

impl From<Objective> for ObjectiveSpec {
    fn from(kind: Objective) -> Self {
        Self { kind, bound: kind.bound() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemInstance {
    pub id: usize,
    #[serde(rename = "D")]
    pub dim: usize,
    #[serde(rename = "M")]
    pub num_objectives: usize,
    pub objectives: Vec<ObjectiveSpec>,
    pub perturbation: bool,
}

impl ProblemInstance {
    pub fn name(&self) -> String {
        format!("CitySeg/MOP{}", self.id)
    }

    pub fn with_perturbation(mut self, enabled: bool) -> Self {
        self.perturbation = enabled;
        self
    }

    pub fn objective_kinds(&self) -> Vec<Objective> {
        self.objectives.iter().map(|o| o.kind).collect()
    }

    pub fn bounds(&self) -> Vec<f64> {
        self.objectives.iter().map(|o| o.bound).collect()
    }

    /// Componentwise division of raw values by the normalization bounds.
    pub fn normalize(&self, raw: &[f64]) -> Result<Vec<f64>, ProblemError> {
        if raw.len() != self.num_objectives {
            return Err(ProblemError::Arity { expected: self.num_objectives, got: raw.len() });
        }
        Ok(raw.iter().zip(&self.objectives).map(|(v, o)| v / o.bound).collect())
    }

    /// Hypervolume reference point in normalized space.
    pub fn reference_point(&self) -> Vec<f64> {
        vec![1.0; self.num_objectives]
    }

    /// The same reference point expressed on the raw scale.
    pub fn raw_reference_point(&self) -> Vec<f64> {
        self.bounds()
    }
}

fn objective_table(id: usize) -> Option<Vec<Objective>> {
    use HardwarePlatform::*;
    use Objective::{Cost, Error};
    let lat = |h| Cost(MetricKind::Latency(h));
    let energy = |h| Cost(MetricKind::Energy(h));
    let flops = Cost(MetricKind::Flops);
    let params = Cost(MetricKind::Params);
    let all_hw = [Error, lat(H1), lat(H2), energy(H1), energy(H2)];
    let objectives = match id {
        1 => vec![Error, lat(H1)],
        2 => vec![Error, lat(H1), flops],
        3 => vec![Error, lat(H1), params],
        4 => vec![Error, lat(H1), energy(H1), flops],
        5 => vec![Error, lat(H1), energy(H1), flops, params],
        6 => vec![Error, lat(H2)],
        7 => vec![Error, lat(H2), flops],
        8 => vec![Error, lat(H2), params],
        9 => vec![Error, lat(H2), energy(H2), flops],
        10 => vec![Error, lat(H2), energy(H2), flops, params],
        11 => vec![Error, lat(H1), lat(H2)],
        12 => all_hw.to_vec(),
        13 => [&all_hw[..], &[flops]].concat(),
        14 => [&all_hw[..], &[params]].concat(),
        15 => [&all_hw[..], &[flops, params]].concat(),
        _ => return None,
    };
    Some(objectives)
}

/// Registry lookup; perturbation of hardware objectives is enabled.
pub fn get_problem(id: usize) -> Result<ProblemInstance, ProblemError> {
    let kinds = objective_table(id).ok_or(ProblemError::UnknownProblem(id))?;
    Ok(ProblemInstance {
        id,
        dim: GENOME_LENGTH,
        num_objectives: kinds.len(),
        objectives: kinds.into_iter().map(ObjectiveSpec::from).collect(),
        perturbation: true,
    })
}

pub fn all_problems() -> Vec<ProblemInstance> {
    (1..=NUM_PROBLEMS).map(|id| get_problem(id).unwrap()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveVector {
    pub raw: Vec<f64>,
    pub normalized: Vec<f64>,
}

/// Loaded fitness evaluators; either may be absent.
#[derive(Debug, Clone, Default)]
pub struct Evaluators {
    pub table: Option<CostTable>,
    pub model: Option<SurrogateModel>,
}

impl Evaluators {
    pub fn new(table: CostTable, model: SurrogateModel) -> Self {
        Self { table: Some(table), model: Some(model) }
    }

    fn check(&self, p: &ProblemInstance) -> Result<(), ProblemError> {
        for o in &p.objectives {
            let present = match o.kind {
                Objective::Error => self.model.is_some(),
                Objective::Cost(_) => self.table.is_some(),
            };
            if !present {
                return Err(ProblemError::EvaluatorUnavailable(o.kind));
            }
        }
        Ok(())
    }
}

/// Evaluates every genotype on every objective of `p`.
///
/// Each genotype consumes one stream of `noise`, whether or not perturbation
/// is enabled, so evaluation `k` of a run always sees the same fluctuation.
pub fn evaluate_batch(
    p: &ProblemInstance,
    genotypes: &[Genotype],
    evaluators: &Evaluators,
    noise: &mut NoiseSource,
) -> Result<Vec<ObjectiveVector>, ProblemError> {
    evaluators.check(p)?;
    let mut out = Vec::with_capacity(genotypes.len());
    for g in genotypes {
        let mut rng = noise.next_rng();
        let mut raw = Vec::with_capacity(p.num_objectives);
        for o in &p.objectives {
            let v = match o.kind {
                Objective::Error => evaluators.model.as_ref().expect("checked").predict(g),
                Objective::Cost(metric) => {
                    let base = evaluators.table.as_ref().expect("checked").compose_cost(g, metric)?;
                    match metric.perturbation_range() {
                        Some(range) if p.perturbation => perturb(base, range, &mut rng),
                        _ => base,
                    }
                }
            };
            raw.push(v);
        }
        let normalized = p.normalize(&raw)?;
        out.push(ObjectiveVector { raw, normalized });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::sample_random;
    use crate::lut::{default_scale_targets, generate_synthetic_table};

    fn evaluators() -> Evaluators {
        let table = generate_synthetic_table(0, &default_scale_targets()).unwrap();
        Evaluators::new(table, SurrogateModel::new(&[32, 8, 1], 0).unwrap())
    }

    #[test]
    fn registry_rows() {
        let p1 = get_problem(1).unwrap();
        assert_eq!(p1.num_objectives, 2);
        assert_eq!(p1.objective_kinds(), vec![Objective::Error, Objective::Cost(MetricKind::Latency(HardwarePlatform::H1))]);
        let p10 = get_problem(10).unwrap();
        let names: Vec<_> = p10.objectives.iter().map(|o| o.kind.name()).collect();
        assert_eq!(names, ["error", "latency_h2", "energy_h2", "flops", "params"]);
        assert_eq!(get_problem(15).unwrap().num_objectives, 7);
        let ms: Vec<_> = all_problems().iter().map(|p| p.num_objectives).collect();
        assert_eq!(ms, [2, 3, 3, 4, 5, 2, 3, 3, 4, 5, 3, 5, 6, 6, 7]);
        for p in all_problems() {
            assert_eq!(p.dim, 32);
            assert_eq!(p.objectives[0].kind, Objective::Error);
        }
        assert_eq!(get_problem(0), Err(ProblemError::UnknownProblem(0)));
        assert_eq!(get_problem(16), Err(ProblemError::UnknownProblem(16)));
    }

    #[test]
    fn normalization() {
        let p1 = get_problem(1).unwrap();
        let n = p1.normalize(&[0.3, 0.98705]).unwrap();
        assert_eq!(n[0], 0.3);
        assert!((n[1] - 0.5).abs() < 1e-12);
        assert_eq!(p1.normalize(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        let p2 = get_problem(2).unwrap();
        assert_eq!(p2.normalize(&[0.1, 1.0, 3.3107e8]).unwrap()[2], 1.0);
        assert!(matches!(p2.normalize(&[0.1]), Err(ProblemError::Arity { expected: 3, got: 1 })));
    }

    #[test]
    fn reference_points() {
        assert_eq!(get_problem(1).unwrap().reference_point(), vec![1.0, 1.0]);
        assert_eq!(get_problem(15).unwrap().reference_point(), vec![1.0; 7]);
        assert_eq!(get_problem(6).unwrap().raw_reference_point()[1], 58.7465);
    }

    #[test]
    fn registry_json_round_trip() {
        let json = serde_json::to_string(&all_problems()).unwrap();
        let back: Vec<ProblemInstance> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, all_problems());
        assert!(json.contains("\"M\":7"));
    }

    #[test]
    fn batch_shape_and_determinism() {
        let ev = evaluators();
        let g = sample_random(100, 1).unwrap();
        let p = get_problem(1).unwrap();
        let out = evaluate_batch(&p, &g, &ev, &mut NoiseSource::new(3)).unwrap();
        assert_eq!(out.len(), 100);
        assert!(out.iter().all(|v| v.raw.len() == 2 && v.normalized.len() == 2));
        assert!(out.iter().all(|v| v.normalized[0] > 0.0 && v.normalized[0] < 1.0));

        let p = get_problem(15).unwrap().with_perturbation(false);
        let a = evaluate_batch(&p, &g, &ev, &mut NoiseSource::new(1)).unwrap();
        let b = evaluate_batch(&p, &g, &ev, &mut NoiseSource::new(2)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn perturbed_components_follow_lut() {
        let ev = evaluators();
        let table = ev.table.as_ref().unwrap();
        let p = get_problem(5).unwrap();
        let g = sample_random(200, 2).unwrap();
        let out = evaluate_batch(&p, &g, &ev, &mut NoiseSource::new(4)).unwrap();
        for (g, v) in g.iter().zip(&out) {
            for (o, &value) in p.objectives.iter().zip(&v.raw).skip(1) {
                let Objective::Cost(m) = o.kind else { unreachable!() };
                let base = table.compose_cost(g, m).unwrap();
                match m.perturbation_range() {
                    Some(r) => {
                        let ratio = value / base;
                        assert!(ratio >= r.low() && ratio <= r.high(), "{m}: {ratio}");
                    }
                    None => assert_eq!(value, base),
                }
            }
        }
    }

    #[test]
    fn missing_evaluator() {
        let mut ev = evaluators();
        ev.model = None;
        let g = sample_random(1, 1).unwrap();
        let err = evaluate_batch(&get_problem(1).unwrap(), &g, &ev, &mut NoiseSource::new(0)).unwrap_err();
        assert_eq!(err, ProblemError::EvaluatorUnavailable(Objective::Error));
    }

    #[test]
    fn split_batches_see_same_noise() {
        let ev = evaluators();
        let g = sample_random(10, 1).unwrap();
        let p = get_problem(12).unwrap();
        let whole = evaluate_batch(&p, &g, &ev, &mut NoiseSource::new(8)).unwrap();
        let mut noise = NoiseSource::new(8);
        let mut parts = evaluate_batch(&p, &g[..4], &ev, &mut noise).unwrap();
        parts.extend(evaluate_batch(&p, &g[4..], &ev, &mut noise).unwrap());
        assert_eq!(whole, parts);
    }
}
