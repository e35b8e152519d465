use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::VirtualChannel;
use crate::coding::{AntennaMap, CodingScheme};
use crate::derive_seed;
use crate::error::{Error, Result};
use crate::hmsm::{FeatureTensor, Predictor};
use crate::textfmt::{TextReader, TextWriter};

use super::dataset::{Dataset, Record, SystemKind};

const MODEL_TAG: &str = "pixcode-head";
const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;
const STD_FLOOR: f64 = 1e-12;

/// Training and feature hyperparameters of one head.
///
/// Features are the three maps average-pooled over `pool_rows × pool_cols`
/// windows (0 means the full side), flattened and standardized with
/// training-split statistics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeadHyper {
    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub pool_rows: usize,
    pub pool_cols: usize,
}

impl HeadHyper {
    /// Desk-scale defaults. SISO features are the row means of each map:
    /// with an isotropic transmitter the receiver only sees `H_v e_T`, which
    /// is proportional to those means.
    pub fn default_for(system: SystemKind) -> Self {
        let (pool_rows, pool_cols) = match system {
            SystemKind::Siso => (1, 0),
            SystemKind::Mimo { .. } => (1, 1),
        };
        HeadHyper {
            hidden: 64,
            epochs: 15,
            batch_size: 32,
            learning_rate: 1e-3,
            seed: 0,
            pool_rows,
            pool_cols,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidArgument("hidden, epochs and batch_size must be >= 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }

    fn window(&self, side: usize) -> Result<(usize, usize)> {
        let full = |w: usize| if w == 0 { side } else { w };
        let (r, c) = (full(self.pool_rows), full(self.pool_cols));
        if !side.is_multiple_of(r) || !side.is_multiple_of(c) {
            return Err(Error::InvalidArgument(format!(
                "pool window {r}x{c} does not tile the {side}x{side} feature maps"
            )));
        }
        Ok((r, c))
    }
}

/// Average-pools and flattens the feature maps (map, row, column order).
pub fn pooled_features(features: &FeatureTensor, pool_rows: usize, pool_cols: usize) -> Result<Vec<f64>> {
    let side = features.side();
    let hyper = HeadHyper { pool_rows, pool_cols, ..HeadHyper::default_for(SystemKind::Siso) };
    let (r, c) = hyper.window(side)?;
    let mut out = Vec::with_capacity(3 * (side / r) * (side / c));
    for m in 0..3 {
        let map = features.map(m);
        for i in (0..side).step_by(r) {
            for j in (0..side).step_by(c) {
                out.push(map.slice(s![i..i + r, j..j + c]).mean().unwrap());
            }
        }
    }
    Ok(out)
}

/// One hidden ReLU layer and a softmax output.
#[derive(Clone, Debug, PartialEq)]
struct Mlp {
    w1: Array2<f64>,
    b1: Array1<f64>,
    w2: Array2<f64>,
    b2: Array1<f64>,
}

struct Grads {
    w1: Array2<f64>,
    b1: Array1<f64>,
    w2: Array2<f64>,
    b2: Array1<f64>,
}

impl Mlp {
    /// Uniform `±1/sqrt(fan_in)` initialization for weights and biases.
    fn init(inputs: usize, hidden: usize, classes: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut uniform = |rows: usize, cols: usize, fan_in: usize| {
            let a = 1.0 / (fan_in as f64).sqrt();
            Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-a..a))
        };
        let w1 = uniform(hidden, inputs, inputs);
        let b1 = uniform(1, hidden, inputs).remove_axis(Axis(0));
        let w2 = uniform(classes, hidden, hidden);
        let b2 = uniform(1, classes, hidden).remove_axis(Axis(0));
        Mlp { w1, b1, w2, b2 }
    }

    fn hidden(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut h = x.dot(&self.w1.t());
        h += &self.b1;
        h.mapv_inplace(|v| v.max(0.0));
        h
    }

    fn logits(&self, h: &Array2<f64>) -> Array2<f64> {
        let mut z = h.dot(&self.w2.t());
        z += &self.b2;
        z
    }

    /// Mean cross-entropy of a batch.
    fn loss(&self, x: ArrayView2<f64>, y: &[u32]) -> f64 {
        let z = self.logits(&self.hidden(x));
        let mut total = 0.0;
        for (row, &t) in z.outer_iter().zip(y) {
            total += log_sum_exp(row.as_slice().unwrap()) - row[t as usize];
        }
        total / y.len() as f64
    }

    fn grads(&self, x: ArrayView2<f64>, y: &[u32]) -> Grads {
        let h = self.hidden(x);
        let mut dz = self.logits(&h);
        let n = y.len() as f64;
        for (mut row, &t) in dz.outer_iter_mut().zip(y) {
            let lse = log_sum_exp(row.as_slice().unwrap());
            row.mapv_inplace(|v| (v - lse).exp() / n);
            row[t as usize] -= 1.0 / n;
        }
        let w2 = dz.t().dot(&h);
        let b2 = dz.sum_axis(Axis(0));
        let mut dh = dz.dot(&self.w2);
        dh.zip_mut_with(&h, |g, &a| {
            if a <= 0.0 {
                *g = 0.0;
            }
        });
        let w1 = dh.t().dot(&x);
        let b1 = dh.sum_axis(Axis(0));
        Grads { w1, b1, w2, b2 }
    }

    fn predict(&self, x: &[f64]) -> u32 {
        let x = ArrayView2::from_shape((1, x.len()), x).unwrap();
        let z = self.logits(&self.hidden(x));
        // first maximum wins so ties resolve to the smallest class
        let mut best = 0;
        for (i, &v) in z.row(0).iter().enumerate() {
            if v > z[(0, best)] {
                best = i;
            }
        }
        best as u32
    }

    fn params(&self) -> [&[f64]; 4] {
        [
            self.w1.as_slice().unwrap(),
            self.b1.as_slice().unwrap(),
            self.w2.as_slice().unwrap(),
            self.b2.as_slice().unwrap(),
        ]
    }
}

fn log_sum_exp(z: &[f64]) -> f64 {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

struct Adam {
    m: Grads,
    v: Grads,
    t: i32,
}

impl Adam {
    fn new(net: &Mlp) -> Self {
        let zeros = || Grads {
            w1: Array2::zeros(net.w1.raw_dim()),
            b1: Array1::zeros(net.b1.raw_dim()),
            w2: Array2::zeros(net.w2.raw_dim()),
            b2: Array1::zeros(net.b2.raw_dim()),
        };
        Adam { m: zeros(), v: zeros(), t: 0 }
    }

    fn step(&mut self, net: &mut Mlp, g: &Grads, lr: f64) {
        self.t += 1;
        let c1 = 1.0 - ADAM_BETA1.powi(self.t);
        let c2 = 1.0 - ADAM_BETA2.powi(self.t);
        let update = |p: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
            *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
            *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
        };
        ndarray::Zip::from(&mut net.w1).and(&mut self.m.w1).and(&mut self.v.w1).and(&g.w1).for_each(|p, m, v, &g| update(p, m, v, g));
        ndarray::Zip::from(&mut net.b1).and(&mut self.m.b1).and(&mut self.v.b1).and(&g.b1).for_each(|p, m, v, &g| update(p, m, v, g));
        ndarray::Zip::from(&mut net.w2).and(&mut self.m.w2).and(&mut self.v.w2).and(&g.w2).for_each(|p, m, v, &g| update(p, m, v, g));
        ndarray::Zip::from(&mut net.b2).and(&mut self.m.b2).and(&mut self.v.b2).and(&g.b2).for_each(|p, m, v, &g| update(p, m, v, g));
    }
}

/// Trains one element classifier; returns it with the full-split loss
/// before training and after every epoch.
fn fit_element(x: &Array2<f64>, y: &[u32], classes: usize, hyper: &HeadHyper, element: usize) -> Result<(Mlp, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(hyper.seed, element as u64));
    let mut net = Mlp::init(x.ncols(), hyper.hidden, classes, &mut rng);
    let mut adam = Adam::new(&net);
    let mut history = vec![net.loss(x.view(), y)];
    let mut order: Vec<usize> = (0..y.len()).collect();
    let mut xb = Array2::zeros((hyper.batch_size, x.ncols()));
    let mut yb = Vec::with_capacity(hyper.batch_size);
    for epoch in 1..=hyper.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(hyper.batch_size) {
            yb.clear();
            for (r, &i) in batch.iter().enumerate() {
                xb.row_mut(r).assign(&x.row(i));
                yb.push(y[i]);
            }
            let g = net.grads(xb.slice(s![..batch.len(), ..]), &yb);
            adam.step(&mut net, &g, hyper.learning_rate);
        }
        let loss = net.loss(x.view(), y);
        if !loss.is_finite() {
            return Err(Error::Divergence { element, epoch });
        }
        history.push(loss);
    }
    Ok((net, history))
}

/// A trained head: one classifier per map element, across all antennas.
#[derive(Clone, Debug, PartialEq)]
pub struct HeadModel {
    scheme: CodingScheme,
    widths: Vec<usize>,
    side: usize,
    hyper: HeadHyper,
    mean: Vec<f64>,
    std: Vec<f64>,
    classifiers: Vec<Mlp>,
    loss_history: Vec<Vec<f64>>,
}

fn record_features(dataset: &Dataset, records: &[&Record], hyper: &HeadHyper) -> Result<Array2<f64>> {
    let k = dataset.config.k_samples;
    let rows: Vec<Vec<f64>> = records
        .par_iter()
        .map(|r| {
            let channel = VirtualChannel::sample(k, r.channel_seed)?;
            pooled_features(&FeatureTensor::new(&channel, r.snr()), hyper.pool_rows, hyper.pool_cols)
        })
        .collect::<Result<_>>()?;
    let d = rows[0].len();
    Ok(Array2::from_shape_vec((rows.len(), d), rows.concat()).expect("rows share one length"))
}

/// Trains a head on the dataset's training split.
pub fn train_head(dataset: &Dataset, scheme: CodingScheme, hyper: HeadHyper) -> Result<HeadModel> {
    hyper.validate()?;
    let sidx = dataset.scheme_index(scheme)?;
    let records: Vec<&Record> = dataset.train_records().collect();
    if records.is_empty() {
        return Err(Error::InvalidArgument("training split is empty".into()));
    }
    let mut x = record_features(dataset, &records, &hyper)?;
    let n = x.nrows() as f64;
    let mean: Vec<f64> = x.mean_axis(Axis(0)).unwrap().to_vec();
    let std: Vec<f64> = x
        .axis_iter(Axis(1))
        .zip(&mean)
        .map(|(col, m)| {
            let sd = (col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n).sqrt();
            if sd < STD_FLOOR { 1.0 } else { sd }
        })
        .collect();
    standardize(x.view_mut(), &mean, &std);

    let maps = &records[0].labels[sidx];
    let widths: Vec<usize> = maps.iter().map(AntennaMap::original_length).collect();
    let per_antenna: Vec<usize> = widths.iter().map(|&q| scheme.elements_for(q)).collect();
    let targets: Vec<Vec<u32>> = (0..widths.len())
        .flat_map(|a| (0..per_antenna[a]).map(move |j| (a, j)))
        .map(|(a, j)| records.iter().map(|r| r.labels[sidx][a].elements()[j]).collect())
        .collect();
    let fitted: Vec<(Mlp, Vec<f64>)> = targets
        .par_iter()
        .enumerate()
        .map(|(e, y)| fit_element(&x, y, scheme.classes(), &hyper, e))
        .collect::<Result<_>>()?;
    let (classifiers, loss_history) = fitted.into_iter().unzip();
    Ok(HeadModel {
        scheme,
        widths,
        side: 2 * dataset.config.k_samples,
        hyper,
        mean,
        std,
        classifiers,
        loss_history,
    })
}

fn standardize(mut x: ndarray::ArrayViewMut2<f64>, mean: &[f64], std: &[f64]) {
    for mut row in x.outer_iter_mut() {
        for ((v, m), s) in row.iter_mut().zip(mean).zip(std) {
            *v = (*v - m) / s;
        }
    }
}

impl HeadModel {
    pub fn hyper(&self) -> &HeadHyper {
        &self.hyper
    }

    pub fn antenna_widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn element_count(&self) -> usize {
        self.classifiers.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.mean.len()
    }

    /// Per element: full-split training loss before training, then after each epoch.
    pub fn loss_history(&self) -> &[Vec<f64>] {
        &self.loss_history
    }

    /// Predicted class of every element, antennas in order.
    pub fn predict_elements(&self, features: &FeatureTensor) -> Result<Vec<u32>> {
        if features.side() != self.side {
            return Err(Error::InvalidArgument(format!(
                "head expects {0}x{0} feature maps, got {1}x{1}",
                self.side,
                features.side()
            )));
        }
        let mut x = pooled_features(features, self.hyper.pool_rows, self.hyper.pool_cols)?;
        for ((v, m), s) in x.iter_mut().zip(&self.mean).zip(&self.std) {
            *v = (*v - m) / s;
        }
        Ok(self.classifiers.iter().map(|c| c.predict(&x)).collect())
    }

    pub fn to_text(&self) -> String {
        let mut w = TextWriter::new(MODEL_TAG, 1);
        w.field("scheme", self.scheme);
        w.field("widths", join(&self.widths));
        w.field("side", self.side);
        let h = &self.hyper;
        w.field("hidden", h.hidden);
        w.field("epochs", h.epochs);
        w.field("batch_size", h.batch_size);
        w.real("learning_rate", h.learning_rate);
        w.field("seed", h.seed);
        w.field("pool", format!("{} {}", h.pool_rows, h.pool_cols));
        w.reals("mean", self.mean.iter());
        w.reals("std", self.std.iter());
        w.field("elements", self.classifiers.len());
        for (c, loss) in self.classifiers.iter().zip(&self.loss_history) {
            for (name, p) in ["w1", "b1", "w2", "b2"].iter().zip(c.params()) {
                w.reals(name, p.iter());
            }
            w.reals("loss", loss.iter());
        }
        w.finish()
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut r = TextReader::new(text);
        let version = r.header(MODEL_TAG)?;
        if version != 1 {
            return Err(Error::parse(1, "header", format!("unsupported version {version}")));
        }
        let scheme: CodingScheme = r.parse_field("scheme")?;
        let (line, toks) = r.field("widths")?;
        let widths = toks
            .iter()
            .map(|t| t.parse::<usize>().map_err(|_| Error::parse(line, "widths", format!("bad width `{t}`"))))
            .collect::<Result<Vec<_>>>()?;
        let side: usize = r.parse_field("side")?;
        let hidden = r.parse_field("hidden")?;
        let epochs = r.parse_field("epochs")?;
        let batch_size = r.parse_field("batch_size")?;
        let learning_rate = r.parse_field("learning_rate")?;
        let seed = r.parse_field("seed")?;
        let (line, toks) = r.field("pool")?;
        let pool: Vec<usize> = toks.iter().filter_map(|t| t.parse().ok()).collect();
        if pool.len() != 2 {
            return Err(Error::parse(line, "pool", "expected two window sizes"));
        }
        let hyper = HeadHyper {
            hidden,
            epochs,
            batch_size,
            learning_rate,
            seed,
            pool_rows: pool[0],
            pool_cols: pool[1],
        };
        hyper.validate()?;
        let mean = r.reals("mean")?;
        let std = r.reals("std")?;
        let elements: usize = r.parse_field("elements")?;
        let classes = scheme.classes();
        let d = mean.len();
        let shape_err = |what: &str| Error::InvariantViolation(format!("{what} has the wrong size"));
        let mut classifiers = Vec::with_capacity(elements);
        let mut loss_history = Vec::with_capacity(elements);
        for _ in 0..elements {
            let w1 = Array2::from_shape_vec((hidden, d), r.reals("w1")?).map_err(|_| shape_err("w1"))?;
            let b1 = Array1::from(r.reals("b1")?);
            let w2 = Array2::from_shape_vec((classes, hidden), r.reals("w2")?).map_err(|_| shape_err("w2"))?;
            let b2 = Array1::from(r.reals("b2")?);
            if b1.len() != hidden || b2.len() != classes {
                return Err(shape_err("bias"));
            }
            classifiers.push(Mlp { w1, b1, w2, b2 });
            loss_history.push(r.reals("loss")?);
        }
        r.finish()?;
        let expected: usize = widths.iter().map(|&q| scheme.elements_for(q)).sum();
        if elements != expected || std.len() != d || widths.is_empty() {
            return Err(Error::InvariantViolation(format!(
                "{elements} element classifiers for widths {widths:?} under {scheme}"
            )));
        }
        let model = HeadModel { scheme, widths, side, hyper, mean, std, classifiers, loss_history };
        let (r, c) = model.hyper.window(side)?;
        if 3 * (side / r) * (side / c) != d {
            return Err(Error::InvariantViolation(format!("feature dimension {d} does not match the pooling")));
        }
        Ok(model)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::file(path, e))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Self::from_text(&text)
    }
}

fn join(v: &[usize]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

impl Predictor for HeadModel {
    fn scheme(&self) -> CodingScheme {
        self.scheme
    }

    fn predict(&self, features: &FeatureTensor) -> Result<Vec<AntennaMap>> {
        let elements = self.predict_elements(features)?;
        let mut rest = elements.as_slice();
        self.widths
            .iter()
            .map(|&q| {
                let (head, tail) = rest.split_at(self.scheme.elements_for(q));
                rest = tail;
                AntennaMap::new(self.scheme, q, head.to_vec())
            })
            .collect()
    }
}
