//! Side-by-side runs of the optimizers on one seeded instance set.
//!
//! `rows_csv` holds only deterministic columns so repeated runs are
//! byte-identical; wall times live in `timing_csv`.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::derive_seed;
use crate::channel::SystemInstance;
use crate::error::{Error, Result};
use crate::hmsm::HmsmEnsemble;
use crate::learn::Testbed;
use crate::optimize::{codebook_search, random_baseline, sebo, Objective, SeboParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Random,
    Codebook,
    Sebo,
    Hmsm,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::Random, Algorithm::Codebook, Algorithm::Sebo, Algorithm::Hmsm];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Random => "random",
            Algorithm::Codebook => "codebook",
            Algorithm::Sebo => "sebo",
            Algorithm::Hmsm => "hmsm",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub codebook_size: usize,
    pub sebo: SeboParams,
    /// Root seed for the random and codebook baselines.
    pub seed: u64,
    /// Each run is repeated this many times and the median wall time kept.
    pub timing_repeats: usize,
}

impl BenchConfig {
    pub fn new(codebook_size: usize, sebo: SeboParams, seed: u64) -> Self {
        BenchConfig { codebook_size, sebo, seed, timing_repeats: 3 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchInstance {
    pub id: usize,
    pub channel_seed: u64,
    pub snr_db: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub instance: usize,
    pub channel_seed: u64,
    pub algorithm: Algorithm,
    /// `None` when the run failed or found only infeasible coders.
    pub value: Option<f64>,
    pub ratio_vs_sebo: Option<f64>,
    pub evaluations: u64,
    pub wall_time_s: f64,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    pub algorithm: Algorithm,
    pub instances: usize,
    pub failures: usize,
    pub mean_value: f64,
    pub mean_ratio_vs_sebo: f64,
    pub mean_wall_time_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub summary: Vec<BenchSummary>,
    /// Mean HMSM wall time over mean SEBO wall time.
    pub hmsm_sebo_time_ratio: Option<f64>,
}

struct Run {
    value: f64,
    evaluations: u64,
}

fn run_one(
    algorithm: Algorithm,
    instance: &SystemInstance,
    inst: &BenchInstance,
    ensemble: Option<&HmsmEnsemble>,
    config: &BenchConfig,
) -> Result<Run> {
    let instance = instance.clone();
    let seed = derive_seed(config.seed, inst.id as u64);
    Ok(match algorithm {
        Algorithm::Random => {
            let r = random_baseline(&instance, seed)?;
            Run { value: r.best_value, evaluations: r.evaluations }
        }
        Algorithm::Codebook => {
            let r = codebook_search(&instance, config.codebook_size, seed)?;
            Run { value: r.best_value, evaluations: r.evaluations }
        }
        Algorithm::Sebo => {
            let r = sebo(&instance, &config.sebo, &vec![false; instance.arity()])?;
            Run { value: r.best_value, evaluations: r.evaluations }
        }
        Algorithm::Hmsm => {
            let ens = ensemble.expect("hmsm rows require an ensemble");
            let s = ens.select_best(&instance)?;
            Run { value: s.value, evaluations: ens.len() as u64 }
        }
    })
}

/// Runs every algorithm on every instance, sequentially so timings are not
/// skewed by contention. HMSM rows are skipped when `ensemble` is `None`.
/// A failing run becomes an error row instead of aborting the bench.
pub fn run_bench(
    testbed: &Testbed,
    instances: &[BenchInstance],
    ensemble: Option<&HmsmEnsemble>,
    config: &BenchConfig,
) -> BenchReport {
    let algorithms: Vec<Algorithm> = Algorithm::ALL
        .into_iter()
        .filter(|a| *a != Algorithm::Hmsm || ensemble.is_some())
        .collect();
    let mut rows = Vec::with_capacity(instances.len() * algorithms.len());
    for inst in instances {
        let start = rows.len();
        let instance = testbed.instance(inst.channel_seed, inst.snr_db.map(crate::channel::db_to_linear));
        for &algorithm in &algorithms {
            let (outcome, wall_time_s) = match &instance {
                Ok(instance) => timed(config.timing_repeats, || run_one(algorithm, instance, inst, ensemble, config)),
                Err(e) => (Err(Error::InvalidArgument(format!("instance {}: {e}", inst.id))), 0.0),
            };
            let (value, evaluations, error) = match outcome {
                Ok(r) => (r.value.is_finite().then_some(r.value), r.evaluations, None),
                Err(e) => (None, 0, Some(e.to_string())),
            };
            rows.push(BenchRow {
                instance: inst.id,
                channel_seed: inst.channel_seed,
                algorithm,
                value,
                ratio_vs_sebo: None,
                evaluations,
                wall_time_s,
                error,
            });
        }
        let sebo_value = rows[start..]
            .iter()
            .find(|r| r.algorithm == Algorithm::Sebo)
            .and_then(|r| r.value)
            .filter(|v| *v > 0.0);
        for row in &mut rows[start..] {
            row.ratio_vs_sebo = row.value.zip(sebo_value).map(|(v, s)| v / s);
        }
    }
    let summary: Vec<BenchSummary> = algorithms.iter().map(|&a| summarize(a, &rows)).collect();
    let time = |a: Algorithm| summary.iter().find(|s| s.algorithm == a).map(|s| s.mean_wall_time_s);
    let hmsm_sebo_time_ratio = time(Algorithm::Hmsm).zip(time(Algorithm::Sebo)).map(|(h, s)| h / s);
    BenchReport { rows, summary, hmsm_sebo_time_ratio }
}

/// Runs `f` `repeats` times (at least once); returns the first outcome and
/// the median wall time.
fn timed<T>(repeats: usize, mut f: impl FnMut() -> Result<T>) -> (Result<T>, f64) {
    let mut times = Vec::with_capacity(repeats.max(1));
    let mut first = None;
    for _ in 0..repeats.max(1) {
        let t = Instant::now();
        let out = f();
        times.push(t.elapsed().as_secs_f64());
        let failed = out.is_err();
        first.get_or_insert(out);
        if failed {
            break;
        }
    }
    times.sort_by(f64::total_cmp);
    (first.expect("ran at least once"), times[times.len() / 2])
}

fn summarize(algorithm: Algorithm, rows: &[BenchRow]) -> BenchSummary {
    let mine: Vec<&BenchRow> = rows.iter().filter(|r| r.algorithm == algorithm).collect();
    let mean = |xs: Vec<f64>| if xs.is_empty() { f64::NAN } else { xs.iter().sum::<f64>() / xs.len() as f64 };
    BenchSummary {
        algorithm,
        instances: mine.len(),
        failures: mine.iter().filter(|r| r.error.is_some()).count(),
        mean_value: mean(mine.iter().filter_map(|r| r.value).collect()),
        mean_ratio_vs_sebo: mean(mine.iter().filter_map(|r| r.ratio_vs_sebo).collect()),
        mean_wall_time_s: mean(mine.iter().map(|r| r.wall_time_s).collect()),
    }
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

impl BenchReport {
    /// `instance,channel_seed,algorithm,value,ratio_vs_sebo,evaluations,error`
    pub fn rows_csv(&self) -> String {
        let mut out = String::from("instance,channel_seed,algorithm,value,ratio_vs_sebo,evaluations,error\n");
        for r in &self.rows {
            let error = r.error.as_deref().unwrap_or("").replace([',', '\n'], ";");
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.instance,
                r.channel_seed,
                r.algorithm.name(),
                cell(r.value),
                cell(r.ratio_vs_sebo),
                r.evaluations,
                error
            ));
        }
        out
    }

    /// `instance,algorithm,wall_time_s,time_ratio_vs_sebo`
    pub fn timing_csv(&self) -> String {
        let mut out = String::from("instance,algorithm,wall_time_s,time_ratio_vs_sebo\n");
        for r in &self.rows {
            let sebo = self
                .rows
                .iter()
                .find(|s| s.instance == r.instance && s.algorithm == Algorithm::Sebo)
                .map(|s| s.wall_time_s)
                .filter(|t| *t > 0.0);
            out.push_str(&format!(
                "{},{},{:e},{}\n",
                r.instance,
                r.algorithm.name(),
                r.wall_time_s,
                cell(sebo.map(|s| r.wall_time_s / s))
            ));
        }
        out
    }

    pub fn summary_json(&self) -> Vec<u8> {
        let body = serde_json::json!({
            "summary": self.summary,
            "hmsm_sebo_time_ratio": self.hmsm_sebo_time_ratio,
        });
        let mut v = serde_json::to_vec_pretty(&body).expect("summary serializes");
        v.push(b'\n');
        v
    }
}
