//! Parameter sweeps over grid size or agent count.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::metrics::MetricsReport;
use crate::parallel;
use crate::seed;

use super::config::{Algorithm, ExperimentConfig, MapSource, RawConfig};
use super::experiment::run_on_map;
use super::generate::MapSpec;

pub const CSV_HEADER: &str = "algorithm,axis,axis_value,rep,seed,mean_path_length,success_rate,\
min_agent_success_rate,expected_min_obstacle_distance,policy_updates,train_time_s,run_time_s,status";

const SUMMARY_HEADER: &str = "algorithm,axis,axis_value,reps,mean_path_length,success_rate,\
min_agent_success_rate,expected_min_obstacle_distance,policy_updates,train_time_s,run_time_s,total_time_s";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    GridSize,
    Agents,
    /// No sweep: a single experiment.
    Single,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::GridSize => "grid_size",
            Axis::Agents => "n_agents",
            Axis::Single => "single",
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grid_size" => Ok(Axis::GridSize),
            "n_agents" => Ok(Axis::Agents),
            "single" => Ok(Axis::Single),
            _ => Err(Error::config(format!("unknown sweep axis {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub axis: Axis,
    pub values: Vec<usize>,
    pub algorithms: Vec<Algorithm>,
    pub reps: usize,
}

impl SweepSpec {
    /// Reads `sweep.*` keys, falling back to `default_values`.
    pub fn from_raw(raw: &RawConfig, axis: Axis, default_values: &[usize]) -> Result<SweepSpec> {
        let spec = SweepSpec {
            axis,
            values: raw
                .get_list("sweep.values")?
                .unwrap_or_else(|| default_values.to_vec()),
            algorithms: raw
                .get_list("sweep.algorithms")?
                .unwrap_or_else(|| Algorithm::ALL.to_vec()),
            reps: raw.get("sweep.reps")?.unwrap_or(1),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.axis == Axis::Single {
            return Err(Error::config("a sweep needs the grid_size or n_agents axis"));
        }
        if self.values.is_empty() {
            return Err(Error::config("sweep.values must not be empty"));
        }
        if self.values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("sweep.values must be strictly increasing"));
        }
        if self.values.contains(&0) {
            return Err(Error::config("sweep.values must be positive"));
        }
        if self.algorithms.is_empty() {
            return Err(Error::config("sweep.algorithms must not be empty"));
        }
        let mut seen = self.algorithms.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.algorithms.len() {
            return Err(Error::config("sweep.algorithms lists an algorithm twice"));
        }
        if self.reps == 0 {
            return Err(Error::config("sweep.reps must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub algorithm: Algorithm,
    pub axis: Axis,
    pub axis_value: usize,
    pub rep: usize,
    pub seed: u64,
    pub outcome: std::result::Result<MetricsReport, Error>,
}

impl SweepRow {
    fn status(&self) -> String {
        match &self.outcome {
            Ok(r) if r.no_successes => "no_successes".into(),
            Ok(_) => "ok".into(),
            Err(e) => format!("error:{}", e.kind()),
        }
    }

    fn write_csv(&self, out: &mut String, timings: bool) {
        let _ = write!(
            out,
            "{},{},{},{},{},",
            self.algorithm, self.axis, self.axis_value, self.rep, self.seed
        );
        match &self.outcome {
            Ok(r) => {
                let _ = write!(
                    out,
                    "{:.6},{:.6},{:.6},{:.6},{},{},{},",
                    r.mean_path_length,
                    r.success_rate,
                    r.min_agent_success_rate,
                    r.expected_min_obstacle_distance,
                    r.policy_updates,
                    time_field(r.train_time_s, timings),
                    time_field(r.run_time_s, timings),
                );
            }
            Err(_) => out.push_str("NA,NA,NA,NA,NA,NA,NA,"),
        }
        out.push_str(&self.status());
        out.push('\n');
    }
}

fn time_field(t: f64, timings: bool) -> String {
    if timings {
        format!("{t:.6}")
    } else {
        "NA".into()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    pub csv: String,
    pub summary_csv: String,
}

/// Header plus one row for a standalone experiment (axis `single`).
pub fn report_csv(algorithm: Algorithm, seed: u64, outcome: &Result<MetricsReport>, timings: bool) -> String {
    let row = SweepRow {
        algorithm,
        axis: Axis::Single,
        axis_value: 0,
        rep: 0,
        seed,
        outcome: outcome.clone(),
    };
    let mut out = format!("{CSV_HEADER}\n");
    row.write_csv(&mut out, timings);
    out
}

/// Seed of one sweep cell; independent of every other cell.
pub fn cell_seed(master: u64, axis: Axis, value: usize, rep: usize) -> u64 {
    seed::derive(master, &[seed::label(axis.name()), value as u64, rep as u64])
}

fn cell_config(base: &ExperimentConfig, spec: &SweepSpec, value: usize, rep: usize) -> Result<ExperimentConfig> {
    let mut cfg = base.clone();
    cfg.seed = cell_seed(base.seed, spec.axis, value, rep);
    cfg.threads = 1;
    match spec.axis {
        Axis::GridSize => match &cfg.map {
            MapSource::Generated(s) => {
                cfg.map = MapSource::Generated(MapSpec {
                    width: value,
                    height: value,
                    ..*s
                });
                // A fixed generator seed would make every size share one layout
                // stream; derive per cell instead.
                cfg.map_seed = None;
            }
            MapSource::File(_) => return Err(Error::config("a grid-size sweep needs a generated map")),
        },
        Axis::Agents => cfg.n_agents = value,
        Axis::Single => {}
    }
    Ok(cfg)
}

/// Runs every (axis value, repetition) cell for every algorithm. Algorithms
/// in the same cell share its map and evaluation start sets. Failures become
/// rows with an error status.
pub fn run_sweep(spec: &SweepSpec, base: &ExperimentConfig) -> Result<SweepOutput> {
    spec.validate()?;
    let cells: Vec<(usize, usize)> = spec
        .values
        .iter()
        .flat_map(|&v| (0..spec.reps).map(move |r| (v, r)))
        .collect();
    let per_cell: Vec<Vec<SweepRow>> = parallel::with_threads(base.threads, || {
        parallel::map_slice(base.threads, &cells, |&(value, rep)| {
            let seed = cell_seed(base.seed, spec.axis, value, rep);
            let cfg = cell_config(base, spec, value, rep);
            let map = cfg.as_ref().map_err(Clone::clone).and_then(|c| c.load_map());
            spec.algorithms
                .iter()
                .map(|&algorithm| {
                    let outcome = match (&cfg, &map) {
                        (Ok(cfg), Ok(map)) => {
                            let cfg = ExperimentConfig {
                                algorithm,
                                ..cfg.clone()
                            };
                            run_on_map(&cfg, map)
                        }
                        (Err(e), _) | (_, Err(e)) => Err(e.clone()),
                    };
                    SweepRow {
                        algorithm,
                        axis: spec.axis,
                        axis_value: value,
                        rep,
                        seed,
                        outcome,
                    }
                })
                .collect()
        })
    });
    let mut rows: Vec<SweepRow> = per_cell.into_iter().flatten().collect();
    rows.sort_by_key(|r| (r.algorithm, r.axis_value, r.rep));

    let mut csv = String::with_capacity(128 * (rows.len() + 1));
    csv.push_str(CSV_HEADER);
    csv.push('\n');
    for row in &rows {
        row.write_csv(&mut csv, base.timings);
    }
    let summary_csv = summarize(&rows, base.timings);
    Ok(SweepOutput { rows, csv, summary_csv })
}

/// Per (algorithm, axis value) means over the rows that completed.
fn summarize(rows: &[SweepRow], timings: bool) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    let mut i = 0;
    while i < rows.len() {
        let key = (rows[i].algorithm, rows[i].axis_value);
        let mut j = i;
        while j < rows.len() && (rows[j].algorithm, rows[j].axis_value) == key {
            j += 1;
        }
        let done: Vec<&MetricsReport> = rows[i..j].iter().filter_map(|r| r.outcome.as_ref().ok()).collect();
        let _ = write!(out, "{},{},{},{},", key.0, rows[i].axis, key.1, done.len());
        if done.is_empty() {
            out.push_str("NA,NA,NA,NA,NA,NA,NA,NA\n");
        } else {
            let mean = |f: &dyn Fn(&MetricsReport) -> f64| done.iter().map(|r| f(r)).sum::<f64>() / done.len() as f64;
            let _ = writeln!(
                out,
                "{:.6},{:.6},{:.6},{:.6},{:.6},{},{},{}",
                mean(&|r| r.mean_path_length),
                mean(&|r| r.success_rate),
                mean(&|r| r.min_agent_success_rate),
                mean(&|r| r.expected_min_obstacle_distance),
                mean(&|r| r.policy_updates as f64),
                time_field(mean(&|r| r.train_time_s), timings),
                time_field(mean(&|r| r.run_time_s), timings),
                time_field(mean(&|r| r.total_time_s()), timings),
            );
        }
        i = j;
    }
    out
}
