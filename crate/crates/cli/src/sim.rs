use std::fs;

use anyhow::{Context, Result};
use cricrank::ingest::write_csv;
use cricrank::simulate::{simulate_dataset, ScenarioSpec};

use crate::config::{parse_pairs, read_pairs};
use crate::SimulateArgs;

/// Build a scenario from `key = value` lines whose values are JSON, e.g.
/// `career_years = [4, 10]` or `innings_per_year = {"poisson": 8.0}`.
/// Values that are not valid JSON are taken as strings.
pub fn scenario_from_pairs(pairs: &[(usize, String, String)]) -> Result<ScenarioSpec> {
    let mut map = serde_json::Map::new();
    for (line, k, v) in pairs {
        let value = serde_json::from_str(v).unwrap_or_else(|_| serde_json::Value::String(v.clone()));
        map.insert(k.clone(), value);
        log::debug!("scenario line {line}: {k} = {v}");
    }
    serde_json::from_value(serde_json::Value::Object(map)).context("invalid scenario")
}

pub fn run(a: &SimulateArgs) -> Result<()> {
    let mut spec = match &a.config {
        Some(path) => scenario_from_pairs(&read_pairs(path)?).with_context(|| format!("in {}", path.display()))?,
        None => scenario_from_pairs(&parse_pairs("")?)?,
    };
    if let Some(seed) = a.seed {
        spec.seed = seed;
    }
    let scn = spec.build()?;
    let ds = simulate_dataset(&scn)?;
    let file = fs::File::create(&a.out).with_context(|| format!("cannot create {}", a.out.display()))?;
    write_csv(&ds, std::io::BufWriter::new(file))?;
    if let Some(path) = &a.truth {
        fs::write(path, serde_json::to_string_pretty(&scn.true_params)? + "\n")
            .with_context(|| format!("cannot write {}", path.display()))?;
    }
    let inn = ds.innings();
    let ducks = inn.iter().filter(|i| i.is_duck()).count();
    let not_outs = inn.iter().filter(|i| i.not_out()).count();
    println!(
        "seed {}: {} players, {} oppositions, {}-{}, {} innings ({} ducks, {} not out) -> {}",
        spec.seed,
        spec.players,
        spec.oppositions,
        ds.first_year(),
        ds.last_year(),
        inn.len(),
        ducks,
        not_outs,
        a.out.display()
    );
    Ok(())
}
