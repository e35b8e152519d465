use std::fs::{File, OpenOptions};
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::antenna::{self, AntennaModel, PixelAntenna};
use crate::channel::{db_to_linear, MimoInstance, SisoInstance, SystemInstance, VirtualChannel};
use crate::coding::{zip, AntennaMap, CodingScheme};
use crate::error::{Error, Result};
use crate::optimize::{sebo, Objective, SeboParams};
use crate::{derive_seed, sha256_hex};

pub const DATASET_FORMAT: &str = "pixcode-dataset";
const CHECKPOINT_FORMAT: &str = "pixcode-dataset-checkpoint";
const CHECKPOINT_CHUNK: usize = 128;
const SPLIT_STREAM: u64 = u64::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SystemKind {
    Siso,
    Mimo { n_t: usize, n_r: usize },
}

impl SystemKind {
    pub fn antennas(&self) -> usize {
        match *self {
            SystemKind::Siso => 1,
            SystemKind::Mimo { n_t, n_r } => n_t + n_r,
        }
    }
}

/// Where the (shared) pixel antenna model comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum AntennaSource {
    Synthetic { q_ports: usize, seed: u64 },
    File { path: PathBuf, sha256: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub system: SystemKind,
    pub antenna: AntennaSource,
    pub k_samples: usize,
    /// Candidate SNRs in dB, one drawn per record (MIMO only).
    #[serde(default)]
    pub snr_db: Vec<f64>,
    pub n_samples: usize,
    pub sebo: SeboParams,
    pub schemes: Vec<CodingScheme>,
    pub seed: u64,
    pub train_fraction: f64,
}

impl DatasetConfig {
    /// SISO config with a synthetic antenna, binary and Gray labels with
    /// `M = 3`, and a 90/10 split.
    pub fn siso(q_ports: usize, k_samples: usize, n_samples: usize, block_size: usize, seed: u64) -> Self {
        DatasetConfig {
            system: SystemKind::Siso,
            antenna: AntennaSource::Synthetic {
                q_ports,
                seed: derive_seed(seed, u64::MAX - 1),
            },
            k_samples,
            snr_db: Vec::new(),
            n_samples,
            sebo: SeboParams::new(block_size),
            schemes: vec![CodingScheme::binary(3).unwrap(), CodingScheme::gray(3).unwrap()],
            seed,
            train_fraction: 0.9,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.n_samples == 0 {
            return bad("n_samples must be >= 1".into());
        }
        if self.k_samples == 0 {
            return bad("k_samples must be >= 1".into());
        }
        if self.schemes.is_empty() {
            return bad("at least one coding scheme is required".into());
        }
        for (i, s) in self.schemes.iter().enumerate() {
            if self.schemes[..i].contains(s) {
                return bad(format!("scheme {s} listed twice"));
            }
        }
        if !(self.train_fraction > 0.0 && self.train_fraction <= 1.0) {
            return bad(format!("train_fraction must be in (0, 1], got {}", self.train_fraction));
        }
        match self.system {
            SystemKind::Siso if !self.snr_db.is_empty() => bad("snr list only applies to MIMO".into()),
            SystemKind::Mimo { n_t, n_r } if n_t == 0 || n_r == 0 => bad("MIMO needs n_t, n_r >= 1".into()),
            SystemKind::Mimo { .. } if self.snr_db.is_empty() => bad("MIMO needs at least one snr value".into()),
            _ if self.snr_db.iter().any(|x| !x.is_finite()) => bad("snr values must be finite".into()),
            _ => Ok(()),
        }
    }

    pub fn digest(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("config serializes"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub index: usize,
    pub channel_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<f64>,
    pub sebo_value: f64,
    pub sebo_evaluations: u64,
    /// `labels[s][a]`: map of antenna `a` under configured scheme `s`.
    pub labels: Vec<Vec<AntennaMap>>,
}

impl Record {
    pub fn snr(&self) -> Option<f64> {
        self.snr_db.map(db_to_linear)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    /// Seeded shuffle; the first `round(n * fraction)` indices train.
    pub fn random(n: usize, train_fraction: f64, seed: u64) -> Self {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(seed, SPLIT_STREAM)));
        let n_train = ((n as f64 * train_fraction).round() as usize).clamp(1, n);
        let mut train = idx[..n_train].to_vec();
        let mut test = idx[n_train..].to_vec();
        train.sort_unstable();
        test.sort_unstable();
        Split { train, test }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub format: String,
    pub version: u32,
    pub config: DatasetConfig,
    pub records: Vec<Record>,
    pub split: Split,
}

impl Dataset {
    pub fn scheme_index(&self, scheme: CodingScheme) -> Result<usize> {
        self.config
            .schemes
            .iter()
            .position(|s| *s == scheme)
            .ok_or_else(|| Error::InvalidArgument(format!("dataset has no labels for scheme {scheme}")))
    }

    pub fn train_records(&self) -> impl Iterator<Item = &Record> {
        self.split.train.iter().map(move |&i| &self.records[i])
    }

    pub fn test_records(&self) -> impl Iterator<Item = &Record> {
        self.split.test.iter().map(move |&i| &self.records[i])
    }

    /// Keeps the test split and the first `n` training records.
    pub fn with_train_limit(&self, n: usize) -> Dataset {
        let mut d = self.clone();
        d.split.train.truncate(n);
        d
    }

    /// Structural checks: labels for every scheme and antenna, decodable to
    /// the right width and identical across schemes, and a disjoint,
    /// exhaustive split.
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        let widths = self.antenna_widths()?;
        let bad = |m: String| Err(Error::InvariantViolation(m));
        if self.format != DATASET_FORMAT || self.version != 1 {
            return bad(format!("unsupported dataset {} v{}", self.format, self.version));
        }
        for (i, r) in self.records.iter().enumerate() {
            if r.index != i {
                return bad(format!("record {i} carries index {}", r.index));
            }
            if r.labels.len() != self.config.schemes.len() {
                return bad(format!("record {i} has {} label sets", r.labels.len()));
            }
            let mut reference: Option<Vec<bool>> = None;
            for (maps, scheme) in r.labels.iter().zip(&self.config.schemes) {
                if maps.len() != widths.len() || maps.iter().any(|m| m.scheme() != *scheme) {
                    return bad(format!("record {i} has malformed {scheme} labels"));
                }
                let bits = crate::hmsm::decode_maps(maps, &widths)?;
                match &reference {
                    None => reference = Some(bits),
                    Some(b) if *b != bits => return bad(format!("record {i}: schemes decode differently")),
                    _ => {}
                }
            }
        }
        let mut seen = vec![false; self.records.len()];
        for &i in self.split.train.iter().chain(&self.split.test) {
            if i >= seen.len() || std::mem::replace(&mut seen[i], true) {
                return bad(format!("split index {i} out of range or repeated"));
            }
        }
        if seen.iter().any(|s| !s) {
            return bad("split does not cover every record".into());
        }
        Ok(())
    }

    fn antenna_widths(&self) -> Result<Vec<usize>> {
        let q = match (&self.config.antenna, self.records.first()) {
            (AntennaSource::Synthetic { q_ports, .. }, _) => *q_ports,
            (AntennaSource::File { .. }, Some(r)) => r.labels.first().and_then(|l| l.first()).map_or(0, |m| m.original_length()),
            (AntennaSource::File { .. }, None) => 0,
        };
        Ok(vec![q; self.config.system.antennas()])
    }

    pub fn to_json(&self) -> Vec<u8> {
        let mut v = serde_json::to_vec(self).expect("dataset serializes");
        v.push(b'\n');
        v
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::file(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::file(path, e))?;
        let d: Dataset = serde_json::from_slice(&bytes)?;
        d.validate()?;
        Ok(d)
    }

    /// Writes every record's channel as a channel file `channel_NNNNNN.txt`.
    pub fn materialize(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
        self.records
            .iter()
            .map(|r| {
                let path = dir.join(format!("channel_{:06}.txt", r.index));
                VirtualChannel::sample(self.config.k_samples, r.channel_seed)?.save(&path, Some(r.channel_seed))?;
                Ok(path)
            })
            .collect()
    }
}

/// Rebuilds problem instances from record descriptors.
#[derive(Clone, Debug)]
pub struct Testbed {
    system: SystemKind,
    k_samples: usize,
    antenna: PixelAntenna,
}

impl Testbed {
    pub fn from_config(config: &DatasetConfig) -> Result<Self> {
        config.validate()?;
        let model = match &config.antenna {
            AntennaSource::Synthetic { q_ports, seed } => antenna::synthesize(*q_ports, config.k_samples, *seed)?,
            AntennaSource::File { path, sha256 } => {
                let bytes = std::fs::read(path).map_err(|e| Error::file(path, e))?;
                let actual = sha256_hex(&bytes);
                if actual != *sha256 {
                    return Err(Error::InvalidArgument(format!(
                        "antenna file {} has digest {actual}, config expects {sha256}",
                        path.display()
                    )));
                }
                let text = String::from_utf8(bytes)
                    .map_err(|_| Error::parse(1, "header", "antenna file is not UTF-8"))?;
                antenna::io::from_text(&text)?
            }
        };
        if model.k_samples() != config.k_samples {
            return Err(Error::InvalidArgument(format!(
                "antenna has K={}, config says K={}",
                model.k_samples(),
                config.k_samples
            )));
        }
        Self::new(config.system, model)
    }

    pub fn new(system: SystemKind, model: AntennaModel) -> Result<Self> {
        let k_samples = model.k_samples();
        let antenna = PixelAntenna::auto(Arc::new(model))?;
        Ok(Testbed { system, k_samples, antenna })
    }

    pub fn system(&self) -> SystemKind {
        self.system
    }

    pub fn antenna(&self) -> &PixelAntenna {
        &self.antenna
    }

    pub fn antenna_widths(&self) -> Vec<usize> {
        vec![self.antenna.q_ports(); self.system.antennas()]
    }

    pub fn instance(&self, channel_seed: u64, snr: Option<f64>) -> Result<SystemInstance> {
        let channel = Arc::new(VirtualChannel::sample(self.k_samples, channel_seed)?);
        self.instance_for_channel(channel, snr)
    }

    pub fn instance_for_channel(&self, channel: Arc<VirtualChannel>, snr: Option<f64>) -> Result<SystemInstance> {
        Ok(match (self.system, snr) {
            (SystemKind::Siso, _) => SystemInstance::Siso(SisoInstance::isotropic(channel, self.antenna.clone())?),
            (SystemKind::Mimo { n_t, n_r }, Some(snr)) => SystemInstance::Mimo(MimoInstance::new(
                channel,
                vec![self.antenna.clone(); n_t],
                vec![self.antenna.clone(); n_r],
                snr,
            )?),
            (SystemKind::Mimo { .. }, None) => {
                return Err(Error::InvalidArgument("MIMO instance needs an snr".into()));
            }
        })
    }

    pub fn record_instance(&self, record: &Record) -> Result<SystemInstance> {
        self.instance(record.channel_seed, record.snr())
    }

    /// Largest absolute gap between a record's stored SEBO value and the
    /// objective of its decoded labels, over all schemes.
    pub fn label_error(&self, record: &Record) -> Result<f64> {
        let instance = self.record_instance(record)?;
        let widths = self.antenna_widths();
        let mut worst = 0.0f64;
        for maps in &record.labels {
            let bits = crate::hmsm::decode_maps(maps, &widths)?;
            worst = worst.max((instance.evaluate(&bits)? - record.sebo_value).abs());
        }
        Ok(worst)
    }
}

fn make_record(config: &DatasetConfig, testbed: &Testbed, index: usize) -> Result<Record> {
    let record_seed = derive_seed(config.seed, index as u64);
    let channel_seed = derive_seed(record_seed, 0);
    let snr_db = match config.system {
        SystemKind::Siso => None,
        SystemKind::Mimo { .. } => {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(record_seed, 1));
            Some(config.snr_db[rng.gen_range(0..config.snr_db.len())])
        }
    };
    let instance = testbed.instance(channel_seed, snr_db.map(db_to_linear))?;
    let result = sebo(&instance, &config.sebo, &vec![false; instance.arity()])?;
    if !result.best_value.is_finite() {
        return Err(Error::InvariantViolation(format!("record {index}: no feasible coder found")));
    }
    let widths = testbed.antenna_widths();
    let mut coders = Vec::with_capacity(widths.len());
    let mut rest = result.best_bits.as_slice();
    for w in widths {
        let (head, tail) = rest.split_at(w);
        coders.push(antenna::AntennaCoder::new(head.to_vec()));
        rest = tail;
    }
    let labels = config
        .schemes
        .iter()
        .map(|&s| coders.iter().map(|c| zip(c, s)).collect())
        .collect();
    Ok(Record {
        index,
        channel_seed,
        snr_db,
        sebo_value: result.best_value,
        sebo_evaluations: result.evaluations,
        labels,
    })
}

/// Generates every record in memory.
pub fn generate_dataset(config: &DatasetConfig) -> Result<Dataset> {
    generate_dataset_resumable(config, None, |_, _| {})
}

/// Generates a dataset, appending finished records to a JSON-lines
/// checkpoint so an interrupted run picks up where it stopped. Output does
/// not depend on chunking, thread count or interruptions.
pub fn generate_dataset_resumable(
    config: &DatasetConfig,
    checkpoint: Option<&Path>,
    mut progress: impl FnMut(usize, usize),
) -> Result<Dataset> {
    let testbed = Testbed::from_config(config)?;
    let mut records = match checkpoint {
        Some(path) if path.exists() => read_checkpoint(path, config)?,
        _ => Vec::new(),
    };
    let mut sink = match checkpoint {
        Some(path) => {
            if records.is_empty() {
                let mut f = File::create(path).map_err(|e| Error::file(path, e))?;
                let header = serde_json::json!({
                    "format": CHECKPOINT_FORMAT,
                    "version": 1,
                    "config_digest": config.digest(),
                });
                writeln!(f, "{header}").map_err(|e| Error::file(path, e))?;
                Some((path, f))
            } else {
                let f = OpenOptions::new().append(true).open(path).map_err(|e| Error::file(path, e))?;
                Some((path, f))
            }
        }
        None => None,
    };
    progress(records.len(), config.n_samples);
    while records.len() < config.n_samples {
        let start = records.len();
        let end = (start + CHECKPOINT_CHUNK).min(config.n_samples);
        let chunk: Vec<Record> = (start..end)
            .into_par_iter()
            .map(|i| make_record(config, &testbed, i))
            .collect::<Result<_>>()?;
        if let Some((path, f)) = sink.as_mut() {
            let mut buf = Vec::new();
            for r in &chunk {
                serde_json::to_writer(&mut buf, r)?;
                buf.push(b'\n');
            }
            f.write_all(&buf).and_then(|_| f.flush()).map_err(|e| Error::file(path, e))?;
        }
        records.extend(chunk);
        progress(records.len(), config.n_samples);
    }
    let split = Split::random(config.n_samples, config.train_fraction, config.seed);
    Ok(Dataset {
        format: DATASET_FORMAT.into(),
        version: 1,
        config: config.clone(),
        records,
        split,
    })
}

fn read_checkpoint(path: &Path, config: &DatasetConfig) -> Result<Vec<Record>> {
    let file = File::open(path).map_err(|e| Error::file(path, e))?;
    let text = std::io::read_to_string(BufReader::new(file)).map_err(|e| Error::file(path, e))?;
    // a line without its newline was cut off mid-write; drop it
    let complete = match text.rfind('\n') {
        Some(end) => &text[..=end],
        None => "",
    };
    let mut lines = complete.lines();
    let header: serde_json::Value = match lines.next() {
        Some(l) => serde_json::from_str(l)?,
        None => return Ok(Vec::new()),
    };
    if header["format"] != CHECKPOINT_FORMAT || header["config_digest"] != config.digest().as_str() {
        return Err(Error::InvalidArgument(format!(
            "checkpoint {} belongs to a different dataset config",
            path.display()
        )));
    }
    let mut records = Vec::new();
    for line in lines {
        let r: Record = serde_json::from_str(line)?;
        if r.index != records.len() {
            return Err(Error::InvariantViolation(format!(
                "checkpoint record {} out of order",
                r.index
            )));
        }
        records.push(r);
    }
    records.truncate(config.n_samples);
    // rewrite without the torn tail so appends stay line-aligned
    if complete.len() != text.len() {
        std::fs::write(path, complete).map_err(|e| Error::file(path, e))?;
    }
    Ok(records)
}
