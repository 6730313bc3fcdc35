use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cricrank::analysis::diagnostics::{ess, gelman_rubin};
use cricrank::analysis::{default_bins, ppc_duck, ppc_runs_intervals, CalibrationRow};
use cricrank::analysis::{adjusted_runs, ageing_profile, effect_summaries, rank_table, Reference};
use cricrank::ingest::load_csv;
use cricrank::{ChainOutput, Dataset, ParamState};
use serde::Serialize;

use crate::{ChainInputs, PpcArgs, SummarizeArgs};

fn chain_paths(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)
                .with_context(|| format!("cannot list {}", p.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| {
                    let name = f.file_name().and_then(|n| n.to_str()).unwrap_or("");
                    name.starts_with("chain_") && name.ends_with(".jsonl")
                })
                .collect();
            if found.is_empty() {
                bail!("no chain_*.jsonl files in {}", p.display());
            }
            found.sort();
            out.extend(found);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

/// The dataset and every chain, checked to share one configuration and
/// to belong to the dataset.
struct Loaded {
    ds: Dataset,
    chains: Vec<ChainOutput>,
    merged: ChainOutput,
}

fn load(inputs: &ChainInputs) -> Result<Loaded> {
    let ds = load_csv(&inputs.data)?;
    let mut chains = Vec::new();
    for path in chain_paths(&inputs.chains)? {
        let c = ChainOutput::load(&path).with_context(|| format!("cannot load chain {}", path.display()))?;
        if c.dataset_fingerprint != ds.fingerprint() {
            bail!("chain {} was fitted to different data than {}", path.display(), inputs.data.display());
        }
        if let Some(first) = chains.first() {
            let first: &ChainOutput = first;
            if first.config_hash != c.config_hash {
                bail!("chain {} has config hash {}, expected {}", path.display(), c.config_hash, first.config_hash);
            }
        }
        if c.draws.is_empty() {
            bail!("chain {} holds no draws", path.display());
        }
        chains.push(c);
    }
    let mut merged = chains[0].clone();
    for c in &chains[1..] {
        merged.draws.extend(c.draws.iter().cloned());
    }
    fs::create_dir_all(&inputs.out).with_context(|| format!("cannot create {}", inputs.out.display()))?;
    Ok(Loaded { ds, chains, merged })
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n").with_context(|| format!("cannot write {}", path.display()))
}

#[derive(Serialize)]
struct RankRow<'a> {
    rank: usize,
    player_id: &'a str,
    mean_peak_runs: f64,
    sd_peak_runs: f64,
    peak_age_mean: f64,
    zero_inflation_mean: f64,
    median_rank: f64,
    rank_lo: u32,
    rank_hi: u32,
}

#[derive(Serialize)]
struct LabelledPoint<'a> {
    player_id: &'a str,
    age: f64,
    mean: f64,
    lo: f64,
    hi: f64,
}

#[derive(Serialize)]
struct AdjustedRow<'a> {
    player_id: &'a str,
    age: i32,
    innings: usize,
    mean: f64,
}

#[derive(Serialize)]
struct ConvergenceRow {
    parameter: String,
    rhat: f64,
    ess: f64,
}

/// Scalar parameters monitored for convergence.
fn scalars(d: &ParamState) -> Vec<(String, f64)> {
    let mut v = vec![
        ("zeta2".to_string(), d.zeta2),
        ("nu2".to_string(), d.nu[0]),
        ("nu3".to_string(), d.nu[1]),
        ("nu4".to_string(), d.nu[2]),
        ("sigma2_delta".to_string(), d.sigma2_delta),
        ("mu_theta".to_string(), d.mu_theta),
        ("sigma2_theta".to_string(), d.sigma2_theta),
    ];
    v.extend(d.theta.iter().enumerate().map(|(p, t)| (format!("theta[{p}]"), *t)));
    v
}

fn convergence(chains: &[ChainOutput]) -> Vec<ConvergenceRow> {
    let names: Vec<String> = scalars(&chains[0].draws[0]).into_iter().map(|(n, _)| n).collect();
    let series: Vec<Vec<Vec<f64>>> = chains
        .iter()
        .map(|c| {
            let rows: Vec<Vec<(String, f64)>> = c.draws.iter().map(scalars).collect();
            (0..names.len()).map(|j| rows.iter().map(|r| r[j].1).collect()).collect()
        })
        .collect();
    names
        .into_iter()
        .enumerate()
        .map(|(j, parameter)| {
            let per_chain: Vec<Vec<f64>> = series.iter().map(|s| s[j].clone()).collect();
            ConvergenceRow {
                parameter,
                rhat: gelman_rubin(&per_chain),
                ess: per_chain.iter().map(|c| ess(c)).sum(),
            }
        })
        .collect()
}

fn age_grid(ds: &Dataset) -> Vec<f64> {
    let ages = ds.innings().iter().map(|i| i.age);
    let lo = ages.clone().fold(f64::INFINITY, f64::min).floor();
    let hi = ages.fold(f64::NEG_INFINITY, f64::max).ceil();
    let n = ((hi - lo) * 2.0) as usize;
    (0..=n).map(|k| lo + k as f64 * 0.5).collect()
}

#[derive(Serialize)]
struct SummaryJson<'a> {
    config_hash: &'a str,
    dataset_fingerprint: &'a str,
    chains: usize,
    draws: usize,
    ranks: &'a [cricrank::analysis::RankSummary],
    effects: &'a cricrank::analysis::EffectTable,
}

pub fn summarize(a: &SummarizeArgs) -> Result<()> {
    let Loaded { ds, chains, merged } = load(&a.inputs)?;
    let out = &a.inputs.out;
    let reference = a.reference.as_deref().map(|s| Reference::parse(&ds, s)).transpose()?;
    let mut ranks = rank_table(&merged, &ds)?;
    ranks.truncate(a.top);
    let rows: Vec<RankRow> = ranks
        .iter()
        .enumerate()
        .map(|(i, r)| RankRow {
            rank: i + 1,
            player_id: &r.player_id,
            mean_peak_runs: r.mean_peak_runs,
            sd_peak_runs: r.sd_peak_runs,
            peak_age_mean: r.peak_age_mean,
            zero_inflation_mean: r.zero_inflation_mean,
            median_rank: r.median_rank,
            rank_lo: r.rank_ci.0,
            rank_hi: r.rank_ci.1,
        })
        .collect();
    write_csv(&out.join("ranks.csv"), &rows)?;

    let effects = effect_summaries(&merged, &ds, reference)?;
    write_csv(&out.join("year_effects.csv"), &effects.year)?;
    write_csv(&out.join("venue_effects.csv"), &effects.venue)?;
    write_csv(&out.join("innings_effects.csv"), &effects.match_innings)?;
    write_csv(&out.join("opposition_effects.csv"), &effects.opposition)?;

    let grid = age_grid(&ds);
    let mut ageing = Vec::new();
    let mut adjusted = Vec::new();
    for r in &ranks {
        for pt in ageing_profile(&merged, &ds, &r.player_id, &grid)? {
            ageing.push(LabelledPoint {
                player_id: &r.player_id,
                age: pt.age,
                mean: pt.mean,
                lo: pt.lo,
                hi: pt.hi,
            });
        }
        for pt in adjusted_runs(&merged, &ds, &r.player_id)? {
            adjusted.push(AdjustedRow {
                player_id: &r.player_id,
                age: pt.age,
                innings: pt.innings,
                mean: pt.mean,
            });
        }
    }
    write_csv(&out.join("ageing.csv"), &ageing)?;
    write_csv(&out.join("adjusted_runs.csv"), &adjusted)?;
    if chains.len() > 1 {
        write_csv(&out.join("convergence.csv"), &convergence(&chains))?;
    }
    write_json(
        &out.join("summary.json"),
        &SummaryJson {
            config_hash: &merged.config_hash,
            dataset_fingerprint: &merged.dataset_fingerprint,
            chains: chains.len(),
            draws: merged.draws.len(),
            ranks: &ranks,
            effects: &effects,
        },
    )?;

    println!(
        "{} draws from {} chain(s), config hash {}",
        merged.draws.len(),
        chains.len(),
        merged.config_hash
    );
    println!("{:>4}  {:<16} {:>9} {:>7} {:>9} {:>6}  rank 95%", "rank", "player", "peak runs", "sd", "peak age", "pi");
    for r in &rows {
        println!(
            "{:>4}  {:<16} {:>9.1} {:>7.1} {:>9.1} {:>6.3}  ({}, {})",
            r.rank, r.player_id, r.mean_peak_runs, r.sd_peak_runs, r.peak_age_mean, r.zero_inflation_mean, r.rank_lo, r.rank_hi
        );
    }
    println!("tables written to {}", out.display());
    Ok(())
}

#[derive(Serialize)]
struct BinCalibrationRow<'a> {
    bin: &'a str,
    group: usize,
    lo: f64,
    hi: f64,
    midpoint: f64,
    mean_predicted: f64,
    observed: f64,
    n: usize,
}

#[derive(Serialize)]
struct TotalRow {
    total: u64,
    count: usize,
}

#[derive(Serialize)]
struct PpcJson {
    config_hash: String,
    dataset_fingerprint: String,
    draws: usize,
    observed_ducks: u64,
    predictive_mean_ducks: f64,
    predictive_interval_95: (f64, f64),
    duck_calibration_slope: f64,
    run_bin_calibration_slopes: Vec<BinSlope>,
}

#[derive(Serialize)]
struct BinSlope {
    bin: String,
    slope: f64,
}

fn slope(rows: &[CalibrationRow]) -> f64 {
    let x: Vec<f64> = rows.iter().map(|r| r.midpoint).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.observed).collect();
    cricrank::analysis::diagnostics::ls_slope(&x, &y)
}

pub fn ppc(a: &PpcArgs) -> Result<()> {
    let Loaded { ds, merged, .. } = load(&a.inputs)?;
    let out = &a.inputs.out;
    let duck = ppc_duck(&merged, &ds, a.seed)?;
    write_csv(&out.join("duck_calibration.csv"), &duck.calibration)?;
    let mut hist: BTreeMap<u64, usize> = BTreeMap::new();
    for &t in &duck.predictive_totals {
        *hist.entry(t).or_default() += 1;
    }
    let totals: Vec<TotalRow> = hist.into_iter().map(|(total, count)| TotalRow { total, count }).collect();
    write_csv(&out.join("duck_totals.csv"), &totals)?;

    let bins = default_bins();
    let runs = ppc_runs_intervals(&merged, &ds, &bins)?;
    let labels: Vec<String> = bins.iter().map(|b| b.label()).collect();
    let mut rows = Vec::new();
    for (label, table) in labels.iter().zip(&runs.calibration) {
        rows.extend(table.iter().map(|r| BinCalibrationRow {
            bin: label,
            group: r.group,
            lo: r.lo,
            hi: r.hi,
            midpoint: r.midpoint,
            mean_predicted: r.mean_predicted,
            observed: r.observed,
            n: r.n,
        }));
    }
    write_csv(&out.join("runs_calibration.csv"), &rows)?;

    let interval = duck.predictive_interval(0.95);
    let report = PpcJson {
        config_hash: merged.config_hash.clone(),
        dataset_fingerprint: merged.dataset_fingerprint.clone(),
        draws: merged.draws.len(),
        observed_ducks: duck.observed_total,
        predictive_mean_ducks: duck.predictive_totals.iter().sum::<u64>() as f64 / duck.predictive_totals.len() as f64,
        predictive_interval_95: interval,
        duck_calibration_slope: duck.calibration_slope(),
        run_bin_calibration_slopes: labels
            .iter()
            .zip(&runs.calibration)
            .map(|(l, t)| BinSlope {
                bin: l.clone(),
                slope: slope(t),
            })
            .collect(),
    };
    write_json(&out.join("ppc.json"), &report)?;
    println!(
        "ducks observed {} vs predictive mean {:.1}, 95% interval [{}, {}]; calibration slope {:.3}",
        report.observed_ducks, report.predictive_mean_ducks, interval.0, interval.1, report.duck_calibration_slope
    );
    for b in &report.run_bin_calibration_slopes {
        println!("  runs {}: calibration slope {:.3}", b.bin, b.slope);
    }
    println!("tables written to {}", out.display());
    Ok(())
}
