//! Raw metrics of randomly sampled architectures, for distribution and
//! correlation plots.

use std::io::Write;

use anyhow::{bail, Result};
use segbench_core::encoding::sample_random;
use segbench_core::lut::{CostTable, MetricKind};

/// Unperturbed metric values; row `i` belongs to the `i`-th sampled genotype.
pub fn sample_metrics(table: &CostTable, n: usize, seed: u64, metrics: &[MetricKind]) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        bail!("sample size must be at least 1");
    }
    let genotypes = sample_random(n, seed)?;
    genotypes
        .iter()
        .map(|g| metrics.iter().map(|&m| Ok(table.compose_cost(g, m)?)).collect())
        .collect()
}

/// Writes `index` plus one column per metric.
pub fn write_csv<W: Write>(out: W, metrics: &[MetricKind], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["index".to_string()];
    header.extend(metrics.iter().map(|m| m.name().to_string()));
    w.write_record(&header)?;
    for (i, row) in rows.iter().enumerate() {
        let mut rec = vec![i.to_string()];
        rec.extend(row.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn parse_metrics(s: &str) -> Result<Vec<MetricKind>> {
    if s.trim().eq_ignore_ascii_case("all") {
        return Ok(MetricKind::ALL.to_vec());
    }
    Ok(s.split(',').map(str::trim).filter(|p| !p.is_empty()).map(str::parse).collect::<Result<_, _>>()?)
}

/// Split of a one-dimensional sample at its widest empty interval.
#[derive(Debug, Clone, PartialEq)]
pub struct GapSplit {
    pub threshold: f64,
    pub left: usize,
    pub right: usize,
    /// Gap width over the sample range.
    pub gap_fraction: f64,
    /// Distance between the two cluster means in pooled standard deviations.
    pub separation: f64,
}

/// Two-cluster split at the largest gap between consecutive sorted values.
pub fn largest_gap_split(values: &[f64]) -> Option<GapSplit> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.len() < 2 {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let range = v[v.len() - 1] - v[0];
    if range <= 0.0 {
        return None;
    }
    let (cut, gap) = (1..v.len()).map(|i| (i, v[i] - v[i - 1])).max_by(|a, b| a.1.total_cmp(&b.1))?;
    let stats = |s: &[f64]| {
        let m = s.iter().sum::<f64>() / s.len() as f64;
        (m, s.iter().map(|x| (x - m) * (x - m)).sum::<f64>())
    };
    let (ml, ssl) = stats(&v[..cut]);
    let (mr, ssr) = stats(&v[cut..]);
    let pooled = ((ssl + ssr) / v.len() as f64).sqrt();
    Some(GapSplit {
        threshold: (v[cut - 1] + v[cut]) / 2.0,
        left: cut,
        right: v.len() - cut,
        gap_fraction: gap / range,
        separation: if pooled > 0.0 { (mr - ml) / pooled } else { f64::INFINITY },
    })
}

/// Counts per bin over `[min, max]`.
pub fn histogram(values: &[f64], bins: usize) -> Vec<usize> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = vec![0; bins];
    if bins == 0 || values.is_empty() {
        return out;
    }
    let width = (hi - lo) / bins as f64;
    for &v in values {
        let b = if width > 0.0 { ((v - lo) / width) as usize } else { 0 };
        out[b.min(bins - 1)] += 1;
    }
    out
}
