use std::path::{Path, PathBuf};
use std::sync::Arc;

use pixcode::antenna::{self, AntennaModel};
use pixcode::bench::{run_bench, BenchConfig, BenchInstance};
use pixcode::channel::{db_to_linear, VirtualChannel};
use pixcode::hmsm::HmsmEnsemble;
use pixcode::learn::{
    evaluate, generate_dataset_resumable, load_ensemble, train_head, AntennaSource, Dataset, DatasetConfig,
    EnsembleManifest, EvalOptions, HeadEntry, HeadHyper, SystemKind, Testbed,
};
use pixcode::optimize::{codebook_search, exhaustive_search, random_baseline, random_bits, sebo, Objective, SeboParams};
use pixcode::{derive_seed, sha256_hex, Error, Result};
use serde_json::json;

use crate::args::*;
use crate::manifest::{Context, FileDigest, RunManifest};

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::File { path: path.to_path_buf(), source: e })
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

fn system_kind(s: &SystemArgs) -> Result<SystemKind> {
    Ok(match s.system {
        SystemArg::Siso => SystemKind::Siso,
        SystemArg::Mimo if s.n_t == 0 || s.n_r == 0 => return Err(invalid("--n-t and --n-r must be >= 1")),
        SystemArg::Mimo => SystemKind::Mimo { n_t: s.n_t, n_r: s.n_r },
    })
}

fn antenna_source(s: &SystemArgs) -> Result<AntennaSource> {
    match &s.antenna {
        Some(path) => Ok(AntennaSource::File {
            path: std::path::absolute(path)?,
            sha256: FileDigest::of(path)?.sha256,
        }),
        None if s.q == 0 => Err(invalid("--q must be >= 1")),
        None => Ok(AntennaSource::Synthetic { q_ports: s.q, seed: s.antenna_seed }),
    }
}

fn antenna_model(s: &SystemArgs) -> Result<AntennaModel> {
    match &s.antenna {
        Some(path) => antenna::io::import(path),
        None if s.q == 0 || s.k == 0 => Err(invalid("--q and --k must be >= 1")),
        None => antenna::synthesize(s.q, s.k, s.antenna_seed),
    }
}

pub fn gen_antenna(ctx: &Context, a: &GenAntennaArgs) -> Result<()> {
    let out_dir = ctx.out_dir.as_path();
    if a.q == 0 || a.k == 0 {
        return Err(invalid("--q and --k must be >= 1"));
    }
    let model = antenna::synthesize(a.q, a.k, a.seed)?.with_gamma(a.gamma)?;
    let path = out_dir.join(&a.out);
    antenna::io::export(&model, &path)?;
    let mut m = RunManifest::new(ctx, "gen-antenna", a);
    m.output(&path)?;
    m.write(out_dir)?;
    println!("{}", json!({ "path": path, "sha256": m.outputs[0].sha256 }));
    Ok(())
}

pub fn gen_channel(ctx: &Context, a: &GenChannelArgs) -> Result<()> {
    let out_dir = ctx.out_dir.as_path();
    if a.k == 0 || a.count == 0 {
        return Err(invalid("--k and --count must be >= 1"));
    }
    let mut m = RunManifest::new(ctx, "gen-channel", a);
    for i in 0..a.count {
        let seed = derive_seed(a.seed, i as u64);
        let path = out_dir.join(format!("channel_{i:06}.txt"));
        VirtualChannel::sample(a.k, seed)?.save(&path, Some(seed))?;
        m.output(&path)?;
    }
    m.write(out_dir)?;
    println!("{}", json!({ "channels": m.outputs }));
    Ok(())
}

pub fn gen_dataset(ctx: &Context, a: &GenDatasetArgs) -> Result<()> {
    let out_dir = ctx.out_dir.as_path();
    let system = system_kind(&a.system)?;
    let config = DatasetConfig {
        system,
        antenna: antenna_source(&a.system)?,
        k_samples: a.system.k,
        snr_db: if system == SystemKind::Siso { Vec::new() } else { a.snr_db.clone() },
        n_samples: a.samples,
        sebo: SeboParams { block_size: a.block, max_sweeps: a.max_sweeps, parallel: false },
        schemes: a.schemes.clone(),
        seed: a.seed,
        train_fraction: a.train_fraction,
    };
    config.validate()?;
    let arity = a.system.q * system.antennas();
    if a.system.antenna.is_none() && (a.block == 0 || a.block > arity.min(pixcode::optimize::EXHAUSTIVE_LIMIT)) {
        return Err(Error::BlockTooLarge { block_size: a.block, arity, limit: arity.min(pixcode::optimize::EXHAUSTIVE_LIMIT) });
    }
    let path = out_dir.join(&a.out);
    let checkpoint = PathBuf::from(format!("{}.partial.jsonl", path.display()));
    let mut last = 0;
    let dataset = generate_dataset_resumable(&config, Some(&checkpoint), |done, total| {
        if done == total || done >= last + total / 10 {
            eprintln!("gen-dataset: {done}/{total} records");
            last = done;
        }
    })?;
    dataset.save(&path)?;
    std::fs::remove_file(&checkpoint).map_err(|e| Error::File { path: checkpoint.clone(), source: e })?;
    let mut m = RunManifest::new(ctx, "gen-dataset", a);
    if let Some(p) = &a.system.antenna {
        m.input(p)?;
    }
    m.output(&path)?;
    if a.materialize {
        for p in dataset.materialize(&out_dir.join("channels"))? {
            m.output(&p)?;
        }
    }
    m.write(out_dir)?;
    println!(
        "{}",
        json!({ "path": path, "sha256": m.outputs[0].sha256, "train": dataset.split.train.len(), "test": dataset.split.test.len() })
    );
    Ok(())
}

pub fn train(ctx: &Context, a: &TrainArgs) -> Result<()> {
    let out_dir = ctx.out_dir.as_path();
    let mut dataset = Dataset::load(&a.dataset)?;
    if let Some(n) = a.train_limit {
        dataset = dataset.with_train_limit(n);
    }
    let schemes = if a.schemes.is_empty() { dataset.config.schemes.clone() } else { a.schemes.clone() };
    let defaults = HeadHyper::default_for(dataset.config.system);
    let mut m = RunManifest::new(ctx, "train", a);
    m.input(&a.dataset)?;
    let mut entries = Vec::new();
    for (i, &scheme) in schemes.iter().enumerate() {
        let hyper = HeadHyper {
            hidden: a.hidden,
            epochs: a.epochs,
            batch_size: a.batch_size,
            learning_rate: a.lr,
            seed: derive_seed(a.seed, i as u64),
            pool_rows: a.pool_rows.unwrap_or(defaults.pool_rows),
            pool_cols: a.pool_cols.unwrap_or(defaults.pool_cols),
        };
        let head = train_head(&dataset, scheme, hyper)?;
        let file = PathBuf::from(format!("head_{}{}.txt", scheme.kind().tag(), scheme.group_bits()));
        let path = out_dir.join(&file);
        let text = head.to_text();
        write(&path, &text)?;
        let final_loss: f64 = head.loss_history().iter().map(|l| l[l.len() - 1]).sum::<f64>() / head.element_count() as f64;
        eprintln!("train: {scheme} head, mean final loss {final_loss:.4}");
        m.output(&path)?;
        entries.push(HeadEntry { scheme, path: file, sha256: sha256_hex(text.as_bytes()) });
    }
    let path = out_dir.join(&a.out);
    EnsembleManifest::new(entries).save(&path)?;
    m.output(&path)?;
    m.write(out_dir)?;
    println!("{}", json!({ "ensemble": path, "heads": schemes.iter().map(|s| s.to_string()).collect::<Vec<_>>() }));
    Ok(())
}

pub fn optimize(ctx: &Context, a: &OptimizeArgs) -> Result<()> {
    let out_dir = ctx.out_dir.as_path();
    let system = system_kind(&a.system)?;
    let model = antenna_model(&a.system)?;
    let mut m = RunManifest::new(ctx, "optimize", a);
    let channel = match &a.channel {
        Some(p) => {
            m.input(p)?;
            VirtualChannel::load(p)?.0
        }
        None => VirtualChannel::sample(model.k_samples(), a.channel_seed)?,
    };
    if channel.k_samples() != model.k_samples() {
        return Err(invalid(format!(
            "channel has K={}, antenna has K={}",
            channel.k_samples(),
            model.k_samples()
        )));
    }
    if let Some(p) = &a.system.antenna {
        m.input(p)?;
    }
    let snr = (system != SystemKind::Siso).then(|| db_to_linear(a.snr_db));
    // exhaustive search refuses large arities before any work starts
    let arity = model.q_ports() * system.antennas();
    if a.algo == Algo::Exhaustive && arity > pixcode::optimize::EXHAUSTIVE_LIMIT {
        return Err(Error::ArityTooLarge { arity, limit: pixcode::optimize::EXHAUSTIVE_LIMIT });
    }
    let testbed = Testbed::new(system, model)?;
    let instance = testbed.instance_for_channel(Arc::new(channel), snr)?;
    let params = SeboParams { block_size: a.block, max_sweeps: a.max_sweeps, parallel: false };
    let (bits, value, evaluations, wall_time, extra) = match a.algo {
        Algo::Exhaustive => {
            let r = exhaustive_search(&instance, true)?;
            (r.best_bits, r.best_value, r.evaluations, r.wall_time, json!({}))
        }
        Algo::Sebo => {
            let init = match a.init_seed {
                Some(seed) => random_bits(instance.arity(), seed),
                None => vec![false; instance.arity()],
            };
            let r = sebo(&instance, &params, &init)?;
            let sweeps = r.trace.len();
            (r.best_bits, r.best_value, r.evaluations, r.wall_time, json!({ "sweeps": sweeps, "trace": r.trace }))
        }
        Algo::Codebook => {
            let r = codebook_search(&instance, a.codebook_size, a.seed)?;
            (r.best_bits, r.best_value, r.evaluations, r.wall_time, json!({}))
        }
        Algo::Random => {
            let r = random_baseline(&instance, a.seed)?;
            (r.best_bits, r.best_value, r.evaluations, r.wall_time, json!({}))
        }
        Algo::Hmsm => {
            let path = a.ensemble.as_ref().ok_or_else(|| invalid("--algo hmsm needs --ensemble"))?;
            m.input(path)?;
            let ensemble = load_ensemble(path)?;
            let t = std::time::Instant::now();
            let s = ensemble.select_best(&instance)?;
            let elapsed = t.elapsed();
            let values = s.per_head_values();
            (s.bits, s.value, ensemble.len() as u64, elapsed, json!({ "winner": s.head, "per_head_values": values }))
        }
    };
    let widths = instance.antenna_widths();
    let mut rest = bits.as_slice();
    let coders: Vec<String> = widths
        .iter()
        .map(|&w| {
            let (h, t) = rest.split_at(w);
            rest = t;
            h.iter().map(|&b| if b { '1' } else { '0' }).collect()
        })
        .collect();
    let result = json!({
        "instance": { "system": a.system.system, "channel_seed": if a.channel.is_none() { Some(a.channel_seed) } else { None }, "snr": snr },
        "algorithm": a.algo,
        "params": { "block_size": a.block, "max_sweeps": a.max_sweeps, "codebook_size": a.codebook_size, "seed": a.seed, "init_seed": a.init_seed },
        "best_value": value,
        "coders": coders,
        "evaluations": evaluations,
        "wall_time": wall_time.as_secs_f64(),
        "details": extra,
    });
    let path = out_dir.join(&a.out);
    write(&path, format!("{}\n", serde_json::to_string_pretty(&result)?))?;
    m.output(&path)?;
    m.write(out_dir)?;
    println!("{result}");
    Ok(())
}

pub fn eval(ctx: &Context, a: &EvalArgs) -> Result<()> {
    let out_dir = ctx.out_dir.as_path();
    let dataset = Dataset::load(&a.dataset)?;
    let testbed = Testbed::from_config(&dataset.config)?;
    let ensemble = load_ensemble(&a.ensemble)?;
    check_ensemble(&ensemble, &dataset)?;
    let report = evaluate(&ensemble, &dataset, &testbed, EvalOptions { timed_records: a.timed, alpha: a.alpha })?;
    let mut m = RunManifest::new(ctx, "eval", a);
    m.input(&a.dataset)?;
    m.input(&a.ensemble)?;
    let files = [
        (format!("{}_report.json", a.prefix), report.to_json()),
        (format!("{}_confusion.csv", a.prefix), report.confusion_csv().into_bytes()),
        (format!("{}_records.csv", a.prefix), report.records_csv().into_bytes()),
    ];
    for (name, bytes) in &files {
        let path = out_dir.join(name);
        write(&path, bytes)?;
        m.output(&path)?;
    }
    let timing = out_dir.join(format!("{}_timing.json", a.prefix));
    write(&timing, format!("{}\n", serde_json::to_string_pretty(&report.timing)?))?;
    m.write(out_dir)?;
    println!(
        "{}",
        json!({
            "test_records": report.test_records,
            "mean_element_accuracy": report.mean_element_accuracy,
            "head_ratios": report.heads.iter().map(|h| h.mean_ratio).collect::<Vec<_>>(),
            "ensemble_mean_ratio": report.ensemble_mean_ratio,
            "accuracy_lower_bound": report.accuracy_lower_bound,
            "speedup_vs_sebo": report.timing.speedup,
        })
    );
    Ok(())
}

/// Every head must carry a scheme the dataset has labels for.
fn check_ensemble(ensemble: &HmsmEnsemble, dataset: &Dataset) -> Result<()> {
    for head in ensemble.heads() {
        dataset.scheme_index(head.scheme())?;
    }
    Ok(())
}

pub fn bench(ctx: &Context, a: &BenchArgs) -> Result<()> {
    let out_dir = ctx.out_dir.as_path();
    let dataset = Dataset::load(&a.dataset)?;
    let testbed = Testbed::from_config(&dataset.config)?;
    let ensemble = a.ensemble.as_deref().map(load_ensemble).transpose()?;
    let mut m = RunManifest::new(ctx, "bench", a);
    m.input(&a.dataset)?;
    if let Some(p) = &a.ensemble {
        m.input(p)?;
    }
    let limit = a.limit.unwrap_or(usize::MAX);
    let instances: Vec<BenchInstance> = dataset
        .test_records()
        .take(limit)
        .map(|r| BenchInstance { id: r.index, channel_seed: r.channel_seed, snr_db: r.snr_db })
        .collect();
    if instances.is_empty() {
        return Err(invalid("no test records to benchmark"));
    }
    let mut sebo = dataset.config.sebo;
    if let Some(b) = a.block {
        sebo.block_size = b;
    }
    let config = BenchConfig { timing_repeats: a.repeats, ..BenchConfig::new(a.codebook_size, sebo, a.seed) };
    let report = run_bench(&testbed, &instances, ensemble.as_ref(), &config);
    let files = [
        (format!("{}.csv", a.prefix), report.rows_csv()),
        (format!("{}_timing.csv", a.prefix), report.timing_csv()),
    ];
    for (name, text) in &files {
        let path = out_dir.join(name);
        write(&path, text)?;
        m.output(&path)?;
    }
    let summary = out_dir.join(format!("{}_summary.json", a.prefix));
    write(&summary, report.summary_json())?;
    m.write(out_dir)?;
    println!("{}", String::from_utf8_lossy(&report.summary_json()).trim_end());
    Ok(())
}

