//! Per-problem statistics, the aligned hypervolume table, and plot data.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{anyhow, Context, Result};
use serde::{Deserialize, Serialize};
use segbench_core::indicators::{label_table, StatLabel};
use segbench_core::moea::Algorithm;
use segbench_core::problems::get_problem;

use crate::config::ExperimentConfig;
use crate::runner::{load_run, run_path, StoredRun};

pub const ALPHA: f64 = 0.05;
pub const CONFIG_FILE: &str = "experiment.json";
pub const SUMMARY_JSON: &str = "summary.json";
pub const SUMMARY_TEXT: &str = "summary.txt";
pub const HV_TRACE_CSV: &str = "hv_trace.csv";
pub const FRONTS_CSV: &str = "fronts.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub algorithm: Algorithm,
    pub mean: f64,
    pub std: f64,
    pub label: StatLabel,
    /// Rank-sum p-value against the best algorithm; absent for the best
    /// itself and when a single run leaves nothing to test.
    pub p_value: Option<f64>,
    /// Final hypervolume of each run, by run index.
    pub hv: Vec<f64>,
}

impl Cell {
    /// Best, or not distinguishable from the best.
    pub fn is_bold(&self) -> bool {
        self.label != StatLabel::Worst
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemRow {
    pub id: usize,
    pub name: String,
    #[serde(rename = "M")]
    pub num_objectives: usize,
    pub best: Algorithm,
    /// In the configured algorithm order.
    pub cells: Vec<Cell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub config: ExperimentConfig,
    pub alpha: f64,
    pub rows: Vec<ProblemRow>,
}

fn load_all(cfg: &ExperimentConfig, problem: usize, algorithm: Algorithm) -> Result<Vec<StoredRun>> {
    (0..cfg.runs)
        .map(|r| {
            let path = run_path(&cfg.out_dir, problem, algorithm, r);
            load_run(&path)?.ok_or_else(|| anyhow!("missing or unfinished run file {}", path.display()))
        })
        .collect()
}

/// Labels every problem from the run files under `cfg.out_dir`.
pub fn build_summary(cfg: &ExperimentConfig) -> Result<Summary> {
    let mut rows = Vec::with_capacity(cfg.problems.len());
    for &id in &cfg.problems {
        let problem = get_problem(id)?;
        let mut samples: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for &a in &cfg.algorithms {
            samples.insert(a.id().to_string(), load_all(cfg, id, a)?.iter().map(|r| r.result.hv).collect());
        }
        let stats = label_table(&samples, ALPHA)?;
        let cells: Vec<Cell> = cfg
            .algorithms
            .iter()
            .map(|&a| {
                let s = &stats[a.id()];
                Cell {
                    algorithm: a,
                    mean: s.mean,
                    std: s.std,
                    label: s.label,
                    p_value: (s.label != StatLabel::Best && s.p_value.is_finite()).then_some(s.p_value),
                    hv: samples[a.id()].clone(),
                }
            })
            .collect();
        let best = cells.iter().find(|c| c.label == StatLabel::Best).expect("one best per row").algorithm;
        rows.push(ProblemRow { id, name: problem.name(), num_objectives: problem.num_objectives, best, cells });
    }
    Ok(Summary { config: cfg.clone(), alpha: ALPHA, rows })
}

fn cell_text(c: &Cell) -> String {
    let body = format!("{:.4} ({:.4})", c.mean, c.std);
    if c.is_bold() {
        format!("**{body}**{}", c.label.symbol())
    } else {
        format!("{body}{}", c.label.symbol())
    }
}

/// Rows are problems and columns algorithms; each cell reads
/// `mean (std)` followed by its label, bold (`**`) when not worse than the
/// best.
pub fn render_table(summary: &Summary) -> String {
    let mut header = vec!["Problem".to_string(), "M".to_string()];
    header.extend(summary.config.algorithms.iter().map(|a| a.display_name().to_string()));
    let mut table = vec![header];
    for row in &summary.rows {
        let mut line = vec![row.name.clone(), row.num_objectives.to_string()];
        line.extend(row.cells.iter().map(cell_text));
        table.push(line);
    }
    let widths: Vec<usize> = (0..table[0].len())
        .map(|c| table.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for (i, r) in table.iter().enumerate() {
        let cells: Vec<String> = r
            .iter()
            .zip(&widths)
            .map(|(s, &w)| format!("{s}{}", " ".repeat(w - s.chars().count())))
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
        if i == 0 {
            out.push_str(&widths.iter().map(|&w| "-".repeat(w)).collect::<Vec<_>>().join("  "));
            out.push('\n');
        }
    }
    let _ = writeln!(
        out,
        "\nmean (std) of final hypervolume over {} runs; + best, - worse than best, ≈ not distinguishable \
         from best (rank-sum, alpha = {}); ** marks best and indistinguishable results",
        summary.config.runs, summary.alpha
    );
    out
}

pub fn write_summary(out: &Path, summary: &Summary) -> Result<()> {
    let json = serde_json::to_string_pretty(summary)? + "\n";
    fs::write(out.join(SUMMARY_JSON), json).with_context(|| format!("writing {}", out.join(SUMMARY_JSON).display()))?;
    fs::write(out.join(SUMMARY_TEXT), render_table(summary))
        .with_context(|| format!("writing {}", out.join(SUMMARY_TEXT).display()))
}

pub fn save_config(cfg: &ExperimentConfig) -> Result<()> {
    let path = cfg.out_dir.join(CONFIG_FILE);
    fs::write(&path, serde_json::to_string_pretty(cfg)? + "\n").with_context(|| format!("writing {}", path.display()))
}

pub fn load_config(out: &Path) -> Result<ExperimentConfig> {
    let path = out.join(CONFIG_FILE);
    let s = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let mut cfg: ExperimentConfig = serde_json::from_str(&s).with_context(|| format!("parsing {}", path.display()))?;
    cfg.out_dir = out.to_path_buf();
    Ok(cfg)
}

/// Writes the hypervolume traces of every run and the final fronts as CSV.
pub fn write_plot_data(cfg: &ExperimentConfig) -> Result<()> {
    let mut trace = csv::Writer::from_path(cfg.out_dir.join(HV_TRACE_CSV))?;
    trace.write_record(["problem", "algorithm", "run", "gen", "evals", "hv"])?;
    let mut fronts = csv::WriterBuilder::new().flexible(true).from_path(cfg.out_dir.join(FRONTS_CSV))?;
    fronts.write_record(["problem", "algorithm", "run", "objectives..."])?;
    for &p in &cfg.problems {
        for &a in &cfg.algorithms {
            for (r, run) in load_all(cfg, p, a)?.into_iter().enumerate() {
                for g in &run.generations {
                    trace.write_record(&[
                        p.to_string(),
                        a.id().to_string(),
                        r.to_string(),
                        g.gen.to_string(),
                        g.evals.to_string(),
                        g.hv.to_string(),
                    ])?;
                }
                for m in &run.result.front {
                    let mut rec = vec![p.to_string(), a.id().to_string(), r.to_string()];
                    rec.extend(m.objectives.iter().map(f64::to_string));
                    fronts.write_record(&rec)?;
                }
            }
        }
    }
    trace.flush()?;
    fronts.flush()?;
    Ok(())
}

/// Rebuilds the summary and plot data of an existing output directory.
pub fn report(out: &Path) -> Result<Summary> {
    let cfg = load_config(out)?;
    let summary = build_summary(&cfg)?;
    write_summary(out, &summary)?;
    write_plot_data(&cfg)?;
    Ok(summary)
}
