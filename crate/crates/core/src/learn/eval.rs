use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coding::CodingScheme;
use crate::error::{Error, Result};
use crate::hmsm::{ensemble_lower_bound, FeatureTensor, HmsmEnsemble};
use crate::optimize::{sebo, Objective};

use super::dataset::{Dataset, Record, Testbed};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    /// How many test records (from the start of the split) get a timed
    /// fresh SEBO run and a timed HMSM selection. 0 skips timing.
    pub timed_records: usize,
    /// Error-correlation exponent for the ensemble lower bound.
    pub alpha: f64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { timed_records: 100, alpha: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeadReport {
    pub scheme: CodingScheme,
    /// `confusion[e][true][predicted]` for element `e` (antennas in order).
    pub confusion: Vec<Vec<Vec<u64>>>,
    pub element_accuracy: Vec<f64>,
    pub mean_accuracy: f64,
    /// Mean objective over records with a feasible prediction.
    pub mean_value: f64,
    /// Mean of prediction / SEBO-label objective over feasible predictions.
    pub mean_ratio: f64,
    /// Predictions that decode to an infeasible coder (value -inf).
    pub infeasible: usize,
    /// Records on which this head's candidate was selected.
    pub wins: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordEval {
    pub index: usize,
    pub sebo_value: f64,
    /// `None` encodes an infeasible (-inf) candidate.
    pub head_values: Vec<Option<f64>>,
    pub selected_value: Option<f64>,
    pub winner: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TimingStats {
    pub count: usize,
    pub mean_s: f64,
    pub min_s: f64,
    pub max_s: f64,
}

impl TimingStats {
    pub fn from_samples(samples: &[f64]) -> Self {
        if samples.is_empty() {
            return TimingStats::default();
        }
        TimingStats {
            count: samples.len(),
            mean_s: samples.iter().sum::<f64>() / samples.len() as f64,
            min_s: samples.iter().copied().fold(f64::INFINITY, f64::min),
            max_s: samples.iter().copied().fold(0.0, f64::max),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub hmsm: TimingStats,
    pub sebo: TimingStats,
    /// Mean SEBO time over mean HMSM time on the same records.
    pub speedup: f64,
}

/// Everything but `timing` is a deterministic function of the dataset and
/// heads; timing is kept out of the serialized report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub test_records: usize,
    pub heads: Vec<HeadReport>,
    pub mean_sebo_value: f64,
    pub ensemble_mean_value: f64,
    pub ensemble_mean_ratio: f64,
    pub ensemble_infeasible: usize,
    pub mean_element_accuracy: f64,
    pub alpha: f64,
    /// `1 - Π(1 - p_i)^alpha` over the heads' mean accuracies.
    pub accuracy_lower_bound: f64,
    pub records: Vec<RecordEval>,
    #[serde(skip)]
    pub timing: TimingReport,
}

impl EvalReport {
    pub fn to_json(&self) -> Vec<u8> {
        let mut v = serde_json::to_vec_pretty(self).expect("report serializes");
        v.push(b'\n');
        v
    }

    /// `head,scheme,element,true_class,predicted_class,count`
    pub fn confusion_csv(&self) -> String {
        let mut out = String::from("head,scheme,element,true_class,predicted_class,count\n");
        for (h, head) in self.heads.iter().enumerate() {
            for (e, m) in head.confusion.iter().enumerate() {
                for (t, row) in m.iter().enumerate() {
                    for (p, c) in row.iter().enumerate() {
                        out.push_str(&format!("{h},{},{e},{t},{p},{c}\n", head.scheme));
                    }
                }
            }
        }
        out
    }

    /// `record,sebo_value,head0_value,...,selected_value,winner`; empty
    /// cells are infeasible candidates.
    pub fn records_csv(&self) -> String {
        let cell = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        let mut out = String::from("record,sebo_value");
        for h in 0..self.heads.len() {
            out.push_str(&format!(",head{h}_value"));
        }
        out.push_str(",selected_value,winner\n");
        for r in &self.records {
            out.push_str(&format!("{},{:e}", r.index, r.sebo_value));
            for v in &r.head_values {
                out.push(',');
                out.push_str(&cell(*v));
            }
            out.push_str(&format!(",{},{}\n", cell(r.selected_value), r.winner));
        }
        out
    }
}

struct Outcome {
    record: RecordEval,
    /// `elements[h]`: (true, predicted) per element.
    elements: Vec<Vec<(u32, u32)>>,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn score(ensemble: &HmsmEnsemble, testbed: &Testbed, dataset: &Dataset, record: &Record) -> Result<Outcome> {
    let instance = testbed.record_instance(record)?;
    let selection = ensemble.select_best(&instance)?;
    let mut elements = Vec::with_capacity(ensemble.len());
    for (head, cand) in ensemble.heads().iter().zip(&selection.candidates) {
        let truth = dataset.scheme_index(head.scheme()).map(|s| &record.labels[s])?;
        let pairs = truth
            .iter()
            .zip(&cand.maps)
            .flat_map(|(t, p)| t.elements().iter().copied().zip(p.elements().iter().copied()))
            .collect();
        elements.push(pairs);
    }
    Ok(Outcome {
        record: RecordEval {
            index: record.index,
            sebo_value: record.sebo_value,
            head_values: selection.candidates.iter().map(|c| finite(c.value)).collect(),
            selected_value: finite(selection.value),
            winner: selection.head,
        },
        elements,
    })
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 { f64::NAN } else { s / n as f64 }
}

fn ratio(value: Option<f64>, sebo: f64) -> Option<f64> {
    value.filter(|_| sebo > 0.0).map(|v| v / sebo)
}

/// Scores every head and the ensemble on the dataset's test split.
pub fn evaluate(ensemble: &HmsmEnsemble, dataset: &Dataset, testbed: &Testbed, options: EvalOptions) -> Result<EvalReport> {
    let records: Vec<&Record> = dataset.test_records().collect();
    if records.is_empty() {
        return Err(Error::InvalidArgument("test split is empty".into()));
    }
    let outcomes: Vec<Outcome> = records
        .par_iter()
        .map(|r| score(ensemble, testbed, dataset, r))
        .collect::<Result<_>>()?;

    let mut heads = Vec::with_capacity(ensemble.len());
    for (h, head) in ensemble.heads().iter().enumerate() {
        let scheme = head.scheme();
        let n_el = outcomes[0].elements[h].len();
        let classes = scheme.classes();
        let mut confusion = vec![vec![vec![0u64; classes]; classes]; n_el];
        for o in &outcomes {
            for (e, &(t, p)) in o.elements[h].iter().enumerate() {
                confusion[e][t as usize][p as usize] += 1;
            }
        }
        let element_accuracy: Vec<f64> = confusion
            .iter()
            .map(|m| (0..classes).map(|c| m[c][c]).sum::<u64>() as f64 / outcomes.len() as f64)
            .collect();
        let values = || outcomes.iter().map(|o| (o.record.head_values[h], o.record.sebo_value));
        heads.push(HeadReport {
            scheme,
            mean_accuracy: mean(element_accuracy.iter().copied()),
            element_accuracy,
            confusion,
            mean_value: mean(values().filter_map(|(v, _)| v)),
            mean_ratio: mean(values().filter_map(|(v, s)| ratio(v, s))),
            infeasible: values().filter(|(v, _)| v.is_none()).count(),
            wins: outcomes.iter().filter(|o| o.record.winner == h).count(),
        });
    }
    let accuracies: Vec<f64> = heads.iter().map(|h| h.mean_accuracy).collect();
    let selected = || outcomes.iter().map(|o| (o.record.selected_value, o.record.sebo_value));
    let timing = measure_timing(ensemble, testbed, dataset, &records, options.timed_records)?;
    Ok(EvalReport {
        test_records: outcomes.len(),
        mean_sebo_value: mean(outcomes.iter().map(|o| o.record.sebo_value)),
        ensemble_mean_value: mean(selected().filter_map(|(v, _)| v)),
        ensemble_mean_ratio: mean(selected().filter_map(|(v, s)| ratio(v, s))),
        ensemble_infeasible: selected().filter(|(v, _)| v.is_none()).count(),
        mean_element_accuracy: mean(accuracies.iter().copied()),
        alpha: options.alpha,
        accuracy_lower_bound: ensemble_lower_bound(&accuracies, options.alpha)?,
        heads,
        records: outcomes.into_iter().map(|o| o.record).collect(),
        timing,
    })
}

/// Times HMSM selection (features included) and a fresh SEBO run on the
/// same records, one at a time so neither competes for cores.
fn measure_timing(
    ensemble: &HmsmEnsemble,
    testbed: &Testbed,
    dataset: &Dataset,
    records: &[&Record],
    count: usize,
) -> Result<TimingReport> {
    let mut hmsm_s = Vec::new();
    let mut sebo_s = Vec::new();
    for record in records.iter().take(count) {
        let instance = testbed.record_instance(record)?;
        let t = Instant::now();
        let features = FeatureTensor::from_instance(&instance);
        std::hint::black_box(ensemble.select_with_features(&instance, &features)?);
        hmsm_s.push(t.elapsed().as_secs_f64());
        let init = vec![false; instance.arity()];
        let t = Instant::now();
        std::hint::black_box(sebo(&instance, &dataset.config.sebo, &init)?);
        sebo_s.push(t.elapsed().as_secs_f64());
    }
    let hmsm = TimingStats::from_samples(&hmsm_s);
    let sebo = TimingStats::from_samples(&sebo_s);
    let speedup = if hmsm.mean_s > 0.0 { sebo.mean_s / hmsm.mean_s } else { f64::NAN };
    Ok(TimingReport { hmsm, sebo, speedup })
}
