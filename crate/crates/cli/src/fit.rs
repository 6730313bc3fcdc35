use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cricrank::ingest::load_csv;
use cricrank::sampler::{Checkpoint, CheckpointPolicy};
use cricrank::{ChainOutput, Dataset, Sampler};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{read_pairs, FitSettings};
use crate::{FitArgs, Numerical};

pub fn chain_file(dir: &Path, k: usize) -> PathBuf {
    dir.join(format!("chain_{k}.jsonl"))
}

fn checkpoint_file(dir: &Path, k: usize) -> PathBuf {
    dir.join(format!("chain_{k}.ckpt"))
}

/// Resolve settings: defaults, then the settings file, then flags.
pub fn settings(a: &FitArgs) -> Result<FitSettings> {
    let mut s = FitSettings::default();
    if let Some(path) = &a.config {
        s.apply(&read_pairs(path)?)?;
    }
    let iters = a.iters.unwrap_or(s.iters());
    if let Some(b) = a.burnin {
        s.chain.burn_in = b;
    }
    s.set_iters(iters);
    if let Some(t) = a.thin {
        s.chain.thin = t;
    }
    if let Some(seed) = a.seed {
        s.chain.seed = seed;
    }
    if let Some(k) = a.chains {
        s.chains = k;
    }
    if let Some(n) = a.checkpoint_every {
        s.checkpoint_every = n;
    }
    if a.adapt {
        s.chain.adapt = true;
    }
    s.validate()?;
    Ok(s)
}

#[derive(Serialize)]
struct ChainReport {
    chain: usize,
    seed: u64,
    file: String,
    draws: usize,
    acceptance_rates: std::collections::BTreeMap<String, f64>,
    delta_fallbacks: u64,
}

#[derive(Serialize)]
struct FitReport {
    config_hash: String,
    dataset_fingerprint: String,
    n_iter: u64,
    burn_in: u64,
    thin: u64,
    chains: Vec<ChainReport>,
}

enum Finished {
    Done(Box<ChainOutput>),
    Stopped(u64),
}

fn run_one(ds: &Dataset, s: &FitSettings, a: &FitArgs, k: usize) -> Result<Finished> {
    let mut cfg = s.chain.clone();
    cfg.seed = s.chain.seed.wrapping_add(k as u64 - 1);
    let ckpt = checkpoint_file(&a.out, k);
    let mut sampler = if a.resume && ckpt.exists() {
        let c = Checkpoint::load(&ckpt)?;
        log::info!("chain {k}: resuming at iteration {}", c.iteration());
        Sampler::resume(ds, &s.prior, &cfg, c).with_context(|| format!("cannot resume from {}", ckpt.display()))?
    } else {
        if a.resume {
            log::warn!("chain {k}: no checkpoint at {}, starting afresh", ckpt.display());
        }
        Sampler::new(ds, &s.prior, &cfg)?
    };
    let policy = CheckpointPolicy {
        path: ckpt.clone(),
        every: s.checkpoint_every,
    };
    if let Some(n) = a.stop_after {
        let stop = sampler.iteration() + n;
        sampler.run_until(stop, Some(&policy))?;
        if !sampler.is_done() {
            sampler.checkpoint().save(&ckpt)?;
            return Ok(Finished::Stopped(sampler.iteration()));
        }
    } else {
        sampler.run(Some(&policy))?;
    }
    sampler
        .state()
        .validate()
        .map_err(|e| Numerical(format!("chain {k} ended in an invalid state: {e}")))?;
    let out = sampler.finish();
    out.save(&chain_file(&a.out, k))?;
    Ok(Finished::Done(Box::new(out)))
}

pub fn run(a: &FitArgs) -> Result<()> {
    let s = settings(a)?;
    let ds = load_csv(&a.data)?;
    for w in ds.validate() {
        log::warn!("{w}");
    }
    fs::create_dir_all(&a.out).with_context(|| format!("cannot create output directory {}", a.out.display()))?;
    let results: Vec<Result<Finished>> = (1..=s.chains).into_par_iter().map(|k| run_one(&ds, &s, a, k)).collect();
    let mut chains = Vec::new();
    let mut stopped = Vec::new();
    for (k, r) in (1..).zip(results) {
        match r.with_context(|| format!("chain {k}"))? {
            Finished::Done(out) => chains.push((k, out)),
            Finished::Stopped(it) => stopped.push((k, it)),
        }
    }
    if !stopped.is_empty() {
        for (k, it) in &stopped {
            println!("chain {k}: stopped at iteration {it} of {}; rerun with --resume", s.chain.n_iter);
        }
        return Ok(());
    }
    let Some((_, first)) = chains.first() else {
        bail!("no chains ran");
    };
    let report = FitReport {
        config_hash: first.config_hash.clone(),
        dataset_fingerprint: first.dataset_fingerprint.clone(),
        n_iter: s.chain.n_iter,
        burn_in: s.chain.burn_in,
        thin: s.chain.thin,
        chains: chains
            .iter()
            .map(|(k, c)| ChainReport {
                chain: *k,
                seed: c.config.seed,
                file: chain_file(&a.out, *k).display().to_string(),
                draws: c.draws.len(),
                acceptance_rates: c.acceptance_rates.iter().map(|(b, r)| (b.name().to_string(), *r)).collect(),
                delta_fallbacks: c.delta_fallbacks,
            })
            .collect(),
    };
    let path = a.out.join("fit.json");
    fs::write(&path, serde_json::to_string_pretty(&report)? + "\n")
        .with_context(|| format!("cannot write {}", path.display()))?;
    println!("config hash {}", report.config_hash);
    for c in &report.chains {
        let rates: Vec<String> = c.acceptance_rates.iter().map(|(b, r)| format!("{b} {r:.3}")).collect();
        println!(
            "chain {} (seed {}): {} draws -> {}; acceptance {}; year-effect fallbacks {}",
            c.chain,
            c.seed,
            c.draws,
            c.file,
            rates.join(", "),
            c.delta_fallbacks
        );
    }
    Ok(())
}
