//! Posterior summaries: rankings, effect multipliers, ageing curves,
//! adjusted runs and predictive checks.

pub mod diagnostics;
mod ppc;

use serde::{Deserialize, Serialize};

use crate::error::AnalysisError;
use crate::ingest::{Dataset, Outcome};
use crate::model::ageing;
use crate::sampler::ChainOutput;

pub use diagnostics::{central_interval, Interval};
pub use ppc::{
    bin_probabilities, calibration_table, default_bins, ppc_duck, ppc_runs_intervals, validate_bins,
    CalibrationRow, DuckPpc, RunsPpc, ScoreBin,
};

/// Mass of every reported interval.
pub const INTERVAL_MASS: f64 = 0.95;

/// Check that `chain` has draws and was fitted to `ds`.
pub fn check_chain(chain: &ChainOutput, ds: &Dataset) -> Result<(), AnalysisError> {
    let first = chain.draws.first().ok_or(AnalysisError::EmptyChain)?;
    if chain.dataset_fingerprint != ds.fingerprint() {
        return Err(AnalysisError::Mismatch("dataset fingerprint differs".into()));
    }
    if first.dims != ds.dims() {
        return Err(AnalysisError::Mismatch(format!(
            "draw dims {:?} vs dataset {:?}",
            first.dims,
            ds.dims()
        )));
    }
    Ok(())
}

fn player(ds: &Dataset, id: &str) -> Result<usize, AnalysisError> {
    ds.player_index(id).ok_or_else(|| AnalysisError::UnknownPlayer(id.to_string()))
}

/// `(1 - pi) exp(theta)` per draw (rows) and player (columns).
pub fn ability_draws(chain: &ChainOutput) -> Result<Vec<Vec<f64>>, AnalysisError> {
    if chain.draws.is_empty() {
        return Err(AnalysisError::EmptyChain);
    }
    Ok(chain
        .draws
        .iter()
        .map(|d| (0..d.theta.len()).map(|p| d.peak_runs(p)).collect())
        .collect())
}

/// Marginal rank distribution of one player.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankStats {
    pub median_rank: f64,
    /// Equi-tailed 95% interval.
    pub rank_ci: (u32, u32),
}

/// Rank players within each draw (1 = largest, ties to the earlier
/// player) and summarize each player's marginal rank distribution.
pub fn rank_distribution(ability: &[Vec<f64>]) -> Result<Vec<RankStats>, AnalysisError> {
    let n_players = ability.first().ok_or(AnalysisError::EmptyChain)?.len();
    if n_players < 2 {
        return Err(AnalysisError::TooFewPlayers);
    }
    let mut ranks = vec![Vec::with_capacity(ability.len()); n_players];
    let mut order: Vec<usize> = (0..n_players).collect();
    for row in ability {
        if row.len() != n_players {
            return Err(AnalysisError::Mismatch("ragged ability matrix".into()));
        }
        order.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
        for (pos, &p) in order.iter().enumerate() {
            ranks[p].push(pos as u32 + 1);
        }
    }
    Ok(ranks
        .into_iter()
        .map(|mut r| {
            r.sort_unstable();
            let n = r.len();
            let median_rank = (r[(n - 1) / 2] as f64 + r[n / 2] as f64) / 2.0;
            let tail = (1.0 - INTERVAL_MASS) / 2.0;
            let lo = ((n - 1) as f64 * tail).floor() as usize;
            let hi = ((n - 1) as f64 * (1.0 - tail)).ceil() as usize;
            RankStats {
                median_rank,
                rank_ci: (r[lo], r[hi]),
            }
        })
        .collect())
}

/// One row of the ranking table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankSummary {
    pub player_id: String,
    /// Posterior mean of `(1 - pi) exp(theta)`.
    pub mean_peak_runs: f64,
    pub sd_peak_runs: f64,
    pub peak_age_mean: f64,
    pub zero_inflation_mean: f64,
    pub median_rank: f64,
    pub rank_ci: (u32, u32),
}

/// Ranking table ordered by posterior mean runs at peak age.
pub fn rank_table(chain: &ChainOutput, ds: &Dataset) -> Result<Vec<RankSummary>, AnalysisError> {
    check_chain(chain, ds)?;
    let ability = ability_draws(chain)?;
    let ranks = rank_distribution(&ability)?;
    let mut rows: Vec<RankSummary> = ds
        .player_ids()
        .iter()
        .enumerate()
        .map(|(p, id)| {
            let runs: Vec<f64> = ability.iter().map(|row| row[p]).collect();
            let a1: Vec<f64> = chain.draws.iter().map(|d| d.alpha1[p]).collect();
            let pi: Vec<f64> = chain.draws.iter().map(|d| d.pi[p]).collect();
            RankSummary {
                player_id: id.clone(),
                mean_peak_runs: diagnostics::mean(&runs),
                sd_peak_runs: diagnostics::sd(&runs),
                peak_age_mean: diagnostics::mean(&a1),
                zero_inflation_mean: diagnostics::mean(&pi),
                median_rank: ranks[p].median_rank,
                rank_ci: ranks[p].rank_ci,
            }
        })
        .collect();
    rows.sort_by(|a, b| b.mean_peak_runs.total_cmp(&a.mean_peak_runs));
    Ok(rows)
}

/// A multiplicative effect: posterior mean and central 95% band of `exp(effect)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectRow {
    pub label: String,
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OppositionRow {
    pub opposition: String,
    pub decade_start: i32,
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectTable {
    pub year: Vec<EffectRow>,
    /// Home, then away.
    pub venue: Vec<EffectRow>,
    /// Match innings 1 to 4.
    pub match_innings: Vec<EffectRow>,
    /// `exp(xi + omega)` per opposition and decade, relative to the reference.
    pub opposition: Vec<OppositionRow>,
    pub reference: (String, i32),
}

/// Baseline for opposition-by-decade multipliers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Reference {
    pub opposition: usize,
    pub decade: usize,
}

impl Reference {
    /// The model's own pin: first opposition, final decade.
    pub fn model_default(ds: &Dataset) -> Self {
        Reference {
            opposition: 0,
            decade: ds.dims().decades - 1,
        }
    }

    /// Parse `label,decade_start_year`, e.g. `England,1990`.
    pub fn parse(ds: &Dataset, spec: &str) -> Result<Self, AnalysisError> {
        let bad = || AnalysisError::Mismatch(format!("bad reference `{spec}`, expected TEAM,DECADE"));
        let (team, decade) = spec.rsplit_once(',').ok_or_else(bad)?;
        let opposition = ds
            .opposition_index(team.trim())
            .ok_or_else(|| AnalysisError::Mismatch(format!("unknown opposition `{}`", team.trim())))?;
        let year: i32 = decade.trim().parse().map_err(|_| bad())?;
        let decade = (0..ds.dims().decades)
            .find(|&d| ds.decade_start(d).div_euclid(10) == year.div_euclid(10))
            .ok_or_else(|| AnalysisError::Mismatch(format!("decade {year} outside the data")))?;
        Ok(Reference { opposition, decade })
    }
}

fn row(label: String, values: &[f64]) -> EffectRow {
    let i = central_interval(values, INTERVAL_MASS);
    EffectRow {
        label,
        mean: i.mean,
        lo: i.lo,
        hi: i.hi,
    }
}

pub fn effect_summaries(
    chain: &ChainOutput,
    ds: &Dataset,
    reference: Option<Reference>,
) -> Result<EffectTable, AnalysisError> {
    check_chain(chain, ds)?;
    let dims = ds.dims();
    let reference = reference.unwrap_or_else(|| Reference::model_default(ds));
    if reference.opposition >= dims.oppositions || reference.decade >= dims.decades {
        return Err(AnalysisError::Mismatch("reference out of range".into()));
    }
    let draws = &chain.draws;
    let collect = |f: &dyn Fn(&crate::model::ParamState) -> f64| -> Vec<f64> {
        draws.iter().map(|d| f(d).exp()).collect()
    };
    let year = (0..dims.years)
        .map(|y| row(ds.calendar_year(y).to_string(), &collect(&|d| d.year_effect(y))))
        .collect();
    let venue = vec![
        row("home".into(), &collect(&|_| 0.0)),
        row("away".into(), &collect(&|d| d.zeta2)),
    ];
    let match_innings = (1..=4u8)
        .map(|m| row(m.to_string(), &collect(&|d| d.innings_effect(m))))
        .collect();
    let mut opposition = Vec::new();
    for o in 0..dims.oppositions {
        for e in 0..dims.decades {
            let v = collect(&|d| {
                let base = d.opposition_effect(reference.opposition)
                    + d.interaction(reference.opposition, reference.decade);
                d.opposition_effect(o) + d.interaction(o, e) - base
            });
            let r = row(String::new(), &v);
            opposition.push(OppositionRow {
                opposition: ds.opposition_labels()[o].clone(),
                decade_start: ds.decade_start(e),
                mean: r.mean,
                lo: r.lo,
                hi: r.hi,
            });
        }
    }
    Ok(EffectTable {
        year,
        venue,
        match_innings,
        opposition,
        reference: (
            ds.opposition_labels()[reference.opposition].clone(),
            ds.decade_start(reference.decade),
        ),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgeingPoint {
    pub age: f64,
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
}

/// `(1 - pi) exp(theta + f(age))` over an age grid.
pub fn ageing_profile(
    chain: &ChainOutput,
    ds: &Dataset,
    player_id: &str,
    ages: &[f64],
) -> Result<Vec<AgeingPoint>, AnalysisError> {
    check_chain(chain, ds)?;
    let p = player(ds, player_id)?;
    Ok(ages
        .iter()
        .map(|&a| {
            let v: Vec<f64> = chain
                .draws
                .iter()
                .map(|d| (1.0 - d.pi[p]) * (d.theta[p] + ageing(d.alpha1[p], d.alpha2[p], a)).exp())
                .collect();
            let i = central_interval(&v, INTERVAL_MASS);
            AgeingPoint {
                age: a,
                mean: i.mean,
                lo: i.lo,
                hi: i.hi,
            }
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdjustedRuns {
    /// Completed years of age.
    pub age: i32,
    /// Completed innings at this age.
    pub innings: usize,
    pub mean: f64,
}

/// Posterior mean, per age, of completed scores discounted by their game
/// context: `sum x exp(-(year + venue + innings + opposition effects)) / n`.
/// Players with no completed innings give an empty result.
pub fn adjusted_runs(chain: &ChainOutput, ds: &Dataset, player_id: &str) -> Result<Vec<AdjustedRuns>, AnalysisError> {
    check_chain(chain, ds)?;
    let p = player(ds, player_id)?;
    let mut by_age: std::collections::BTreeMap<i32, Vec<usize>> = Default::default();
    for &r in ds.player_innings(p) {
        let inn = &ds.innings()[r];
        if !inn.outcome.is_censored() {
            by_age.entry(inn.age.floor() as i32).or_default().push(r);
        }
    }
    Ok(by_age
        .into_iter()
        .map(|(age, recs)| {
            let n = recs.len() as f64;
            let per_draw: Vec<f64> = chain
                .draws
                .iter()
                .map(|d| {
                    recs.iter()
                        .map(|&r| {
                            let inn = &ds.innings()[r];
                            let x = match inn.outcome {
                                Outcome::Completed(x) => x as f64,
                                _ => 0.0,
                            };
                            x * (-d.context_effect(inn)).exp()
                        })
                        .sum::<f64>()
                        / n
                })
                .collect();
            AdjustedRuns {
                age,
                innings: recs.len(),
                mean: diagnostics::mean(&per_draw),
            }
        })
        .collect())
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::ingest::{DatasetOptions, InningsRecord, Venue};
    use crate::model::{ParamState, PriorConfig};
    use crate::sampler::ChainConfig;
    use std::collections::BTreeMap;

    pub(crate) fn rec(player: &str, year: i32, age: f64, opp: &str, runs: u32, not_out: bool) -> InningsRecord {
        InningsRecord {
            player_id: player.into(),
            date: None,
            calendar_year: year,
            age,
            home: Venue::Away,
            match_innings: 2,
            opposition: opp.into(),
            runs,
            not_out,
        }
    }

    pub(crate) fn small() -> Dataset {
        let recs = vec![
            rec("a", 1998, 25.2, "X", 10, false),
            rec("a", 1999, 25.8, "Y", 30, false),
            rec("a", 2001, 26.1, "Y", 0, false),
            rec("a", 2001, 26.4, "X", 5, true),
            rec("b", 2001, 30.0, "X", 50, false),
            rec("c", 1999, 22.0, "Y", 7, false),
        ];
        Dataset::from_records(recs, &DatasetOptions::default()).unwrap()
    }

    pub(crate) fn chain_of(ds: &Dataset, draws: Vec<ParamState>) -> ChainOutput {
        ChainOutput {
            draws,
            acceptance_rates: BTreeMap::new(),
            config: ChainConfig::default(),
            prior: PriorConfig::default(),
            dataset_fingerprint: ds.fingerprint(),
            config_hash: String::new(),
            delta_fallbacks: 0,
        }
    }

    #[test]
    fn ability_is_peak_runs() {
        let ds = small();
        let mut s = ParamState::zeros(ds.dims());
        s.pi.fill(1e-300);
        s.theta[0] = 30f64.ln();
        s.pi[1] = 0.07;
        s.theta[1] = (93.7f64 / 0.93).ln();
        let a = ability_draws(&chain_of(&ds, vec![s])).unwrap();
        assert!((a[0][0] - 30.0).abs() < 1e-12);
        assert!((a[0][1] - 93.7).abs() < 1e-12);
        assert!(ability_draws(&chain_of(&ds, vec![])).is_err());
    }

    #[test]
    fn ranks_of_dominant_player() {
        let ab = vec![vec![5.0, 1.0], vec![3.0, 2.0], vec![9.0, 8.0]];
        let r = rank_distribution(&ab).unwrap();
        assert_eq!(r[0].median_rank, 1.0);
        assert_eq!(r[0].rank_ci, (1, 1));
        assert_eq!(r[1].rank_ci, (2, 2));
        assert_eq!(rank_distribution(&[vec![1.0]]), Err(AnalysisError::TooFewPlayers));
    }

    #[test]
    fn ties_go_to_earlier_player() {
        let r = rank_distribution(&[vec![1.0, 1.0, 1.0]]).unwrap();
        let m: Vec<f64> = r.iter().map(|s| s.median_rank).collect();
        assert_eq!(m, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn pinned_effects_are_exactly_one() {
        let ds = small();
        let mut s = ParamState::zeros(ds.dims());
        s.delta.fill(0.2);
        s.zeta2 = -0.1;
        s.nu = [0.1, 0.2, 0.3];
        s.xi.fill(0.4);
        s.omega.fill(0.3);
        let chain = chain_of(&ds, vec![s.clone(), s]);
        let t = effect_summaries(&chain, &ds, None).unwrap();
        let last = t.year.last().unwrap();
        assert_eq!((last.mean, last.lo, last.hi), (1.0, 1.0, 1.0));
        assert_eq!(t.venue[0].mean, 1.0);
        assert_eq!(t.match_innings[0].hi, 1.0);
        assert!((t.match_innings[3].mean - 0.3f64.exp()).abs() < 1e-15);
        let x_last = t.opposition.iter().find(|r| r.opposition == "X" && r.decade_start == 2000).unwrap();
        assert_eq!(x_last.mean, 1.0);
        let explicit = effect_summaries(&chain, &ds, Some(Reference::model_default(&ds))).unwrap();
        assert_eq!(explicit, t);
        // re-based to Y in the 1990s
        let r = Reference::parse(&ds, "Y,1990").unwrap();
        let t2 = effect_summaries(&chain, &ds, Some(r)).unwrap();
        let y90 = t2.opposition.iter().find(|r| r.opposition == "Y" && r.decade_start == 1990).unwrap();
        assert!((y90.mean - 1.0).abs() < 1e-15);
        let x00 = t2.opposition.iter().find(|r| r.opposition == "X" && r.decade_start == 2000).unwrap();
        assert!((x00.mean - (-0.7f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn ageing_peak_equals_ability() {
        let ds = small();
        let mut s = ParamState::zeros(ds.dims());
        s.theta[0] = 3.0;
        s.alpha1[0] = 29.0;
        s.alpha2[0] = 0.01;
        s.pi[0] = 0.1;
        let chain = chain_of(&ds, vec![s.clone(); 3]);
        let c = ageing_profile(&chain, &ds, "a", &[25.0, 29.0, 33.0]).unwrap();
        assert!((c[1].mean - 0.9 * 3f64.exp()).abs() < 1e-12);
        assert_eq!(c[1].lo, c[1].hi);
        assert!((c[0].mean - c[2].mean).abs() < 1e-12);
        assert!(c[0].mean < c[1].mean);
        assert_eq!(
            ageing_profile(&chain, &ds, "zz", &[30.0]),
            Err(AnalysisError::UnknownPlayer("zz".into()))
        );
    }

    #[test]
    fn adjusted_runs_identity_and_discount() {
        let ds = small();
        let s = ParamState::zeros(ds.dims());
        let chain = chain_of(&ds, vec![s.clone()]);
        let a = adjusted_runs(&chain, &ds, "a").unwrap();
        // age 25: 10 and 30; age 26: duck only (the not-out is excluded)
        assert_eq!(a.len(), 2);
        assert_eq!((a[0].age, a[0].innings, a[0].mean), (25, 2, 20.0));
        assert_eq!((a[1].age, a[1].innings, a[1].mean), (26, 1, 0.0));

        let mut t = s.clone();
        t.zeta2 = 0.1;
        t.nu[0] = -0.2;
        t.delta.fill(0.05);
        let chain = chain_of(&ds, vec![t.clone()]);
        let b = adjusted_runs(&chain, &ds, "b").unwrap();
        let inn = &ds.innings()[ds.player_innings(1)[0]];
        let want = 50.0 * (-(t.year_effect(inn.year) + 0.1 - 0.2)).exp();
        assert!((b[0].mean - want).abs() < 1e-12);
    }

    #[test]
    fn mismatched_dataset_rejected() {
        let ds = small();
        let mut chain = chain_of(&ds, vec![ParamState::zeros(ds.dims())]);
        chain.dataset_fingerprint = "other".into();
        assert!(matches!(rank_table(&chain, &ds), Err(AnalysisError::Mismatch(_))));
    }
}
