//! Posterior predictive checks for ducks and score intervals.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_chain, diagnostics};
use crate::error::AnalysisError;
use crate::ingest::{Dataset, Outcome};
use crate::model::{log_duck_kernel, log_rate, log_sf_kernel, softplus};
use crate::sampler::ChainOutput;

/// Number of equal-count groups in calibration tables.
pub const CALIBRATION_GROUPS: usize = 100;

/// Observed frequency against predicted probability within one group of
/// innings with similar predictions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRow {
    pub group: usize,
    /// Smallest and largest predicted probability in the group.
    pub lo: f64,
    pub hi: f64,
    /// `(lo + hi) / 2`, the plotting position.
    pub midpoint: f64,
    pub mean_predicted: f64,
    pub observed: f64,
    pub n: usize,
}

/// Sort innings by predicted probability, split into `groups` equal-count
/// groups and compare. Empty groups are omitted.
pub fn calibration_table(probs: &[f64], observed: &[bool], groups: usize) -> Vec<CalibrationRow> {
    assert_eq!(probs.len(), observed.len());
    let n = probs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| probs[a].total_cmp(&probs[b]).then(a.cmp(&b)));
    let mut rows = Vec::new();
    for g in 0..groups.max(1) {
        let (s, e) = (g * n / groups.max(1), (g + 1) * n / groups.max(1));
        if s == e {
            continue;
        }
        let idx = &order[s..e];
        let lo = probs[idx[0]];
        let hi = probs[idx[idx.len() - 1]];
        let mean_predicted = idx.iter().map(|&i| probs[i]).sum::<f64>() / idx.len() as f64;
        let observed = idx.iter().filter(|&&i| observed[i]).count() as f64 / idx.len() as f64;
        rows.push(CalibrationRow {
            group: g,
            lo,
            hi,
            midpoint: 0.5 * (lo + hi),
            mean_predicted,
            observed,
            n: idx.len(),
        });
    }
    rows
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DuckPpc {
    /// Posterior predictive duck probability of every innings, in dataset
    /// order (not-outs included).
    pub probabilities: Vec<f64>,
    /// Completed ducks among the completed innings.
    pub observed_total: u64,
    /// Simulated duck totals over completed innings, one per draw.
    pub predictive_totals: Vec<u64>,
    /// Completed innings only.
    pub calibration: Vec<CalibrationRow>,
}

impl DuckPpc {
    /// Central interval of the predictive totals.
    pub fn predictive_interval(&self, mass: f64) -> (f64, f64) {
        let t: Vec<f64> = self.predictive_totals.iter().map(|&v| v as f64).collect();
        let i = diagnostics::central_interval(&t, mass);
        (i.lo, i.hi)
    }

    /// Least-squares slope of observed proportion on group midpoint.
    pub fn calibration_slope(&self) -> f64 {
        let x: Vec<f64> = self.calibration.iter().map(|r| r.midpoint).collect();
        let y: Vec<f64> = self.calibration.iter().map(|r| r.observed).collect();
        diagnostics::ls_slope(&x, &y)
    }
}

/// Duck probabilities averaged over draws, a simulated predictive
/// distribution of the total number of ducks and a centile calibration
/// table. Not-outs are left out of the totals and the calibration.
pub fn ppc_duck(chain: &ChainOutput, ds: &Dataset, seed: u64) -> Result<DuckPpc, AnalysisError> {
    check_chain(chain, ds)?;
    let n = ds.len();
    let mut sum = vec![0.0; n];
    let base = ChaCha8Rng::seed_from_u64(seed);
    let mut predictive_totals = Vec::with_capacity(chain.draws.len());
    for (k, d) in chain.draws.iter().enumerate() {
        let mut rng = base.clone();
        rng.set_stream(k as u64);
        let mut total = 0u64;
        for (r, inn) in ds.innings().iter().enumerate() {
            let p = log_duck_kernel(d.pi[inn.player], d.eta[inn.player], log_rate(d, inn)).exp();
            sum[r] += p;
            if !inn.outcome.is_censored() && rng.random::<f64>() < p {
                total += 1;
            }
        }
        predictive_totals.push(total);
    }
    let m = chain.draws.len() as f64;
    let probabilities: Vec<f64> = sum.into_iter().map(|s| s / m).collect();
    let (probs, obs): (Vec<f64>, Vec<bool>) = ds
        .innings()
        .iter()
        .zip(&probabilities)
        .filter(|(inn, _)| !inn.outcome.is_censored())
        .map(|(inn, &p)| (p, inn.outcome == Outcome::Duck))
        .unzip();
    Ok(DuckPpc {
        observed_total: obs.iter().filter(|&&o| o).count() as u64,
        calibration: calibration_table(&probs, &obs, CALIBRATION_GROUPS),
        probabilities,
        predictive_totals,
    })
}

/// Inclusive score interval; `hi = None` is unbounded.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreBin {
    pub lo: u32,
    pub hi: Option<u32>,
}

impl ScoreBin {
    pub fn contains(&self, x: u32) -> bool {
        x >= self.lo && self.hi.is_none_or(|h| x <= h)
    }

    pub fn label(&self) -> String {
        match self.hi {
            Some(h) if h == self.lo => h.to_string(),
            Some(h) => format!("{}-{}", self.lo, h),
            None => format!("{}+", self.lo),
        }
    }
}

/// `{0}, 1-9, 10-19, ..., 90-99, 100+`.
pub fn default_bins() -> Vec<ScoreBin> {
    let mut b = vec![ScoreBin { lo: 0, hi: Some(0) }, ScoreBin { lo: 1, hi: Some(9) }];
    for k in 1..10 {
        b.push(ScoreBin {
            lo: 10 * k,
            hi: Some(10 * k + 9),
        });
    }
    b.push(ScoreBin { lo: 100, hi: None });
    b
}

/// Reject empty, inverted or overlapping bins.
pub fn validate_bins(bins: &[ScoreBin]) -> Result<(), AnalysisError> {
    if bins.is_empty() {
        return Err(AnalysisError::Bins("no bins".into()));
    }
    let mut sorted = bins.to_vec();
    sorted.sort_by_key(|b| b.lo);
    for b in &sorted {
        if b.hi.is_some_and(|h| h < b.lo) {
            return Err(AnalysisError::Bins(format!("bin {} is inverted", b.label())));
        }
    }
    for w in sorted.windows(2) {
        match w[0].hi {
            None => return Err(AnalysisError::Bins(format!("{} overlaps {}", w[0].label(), w[1].label()))),
            Some(h) if h >= w[1].lo => {
                return Err(AnalysisError::Bins(format!("{} overlaps {}", w[0].label(), w[1].label())))
            }
            _ => {}
        }
    }
    Ok(())
}

/// `P(X in bin)` for each bin under the zero-inflated negative binomial.
pub fn bin_probabilities(pi: f64, eta: f64, log_lambda: f64, bins: &[ScoreBin]) -> Vec<f64> {
    let mut edges: Vec<u32> = bins
        .iter()
        .flat_map(|b| [Some(b.lo), b.hi.map(|h| h + 1)])
        .flatten()
        .collect();
    edges.sort_unstable();
    edges.dedup();
    let sf = survival_at(&edges, eta, log_lambda);
    let at = |k: u32| sf[edges.binary_search(&k).expect("edge listed")];
    bins.iter()
        .map(|b| {
            let upper = b.hi.map_or(0.0, |h| at(h + 1));
            let base = (1.0 - pi) * (at(b.lo) - upper);
            if b.lo == 0 {
                base + pi
            } else {
                base
            }
        })
        .collect()
}

/// Edges up to this value are handled by summing the pmf.
const RECURRENCE_LIMIT: u32 = 256;

/// `P(X >= k)` of the negative binomial at sorted edges `k`. Small edges
/// accumulate the pmf by its ratio recurrence, which is much cheaper than
/// one incomplete beta per edge.
fn survival_at(edges: &[u32], eta: f64, log_lambda: f64) -> Vec<f64> {
    let log_beta = log_lambda - eta.ln();
    let mut p = (-eta * softplus(log_beta)).exp();
    if edges.last().is_some_and(|&k| k > RECURRENCE_LIMIT) || p < 1e-300 {
        return edges.iter().map(|&k| log_sf_kernel(k, eta, log_lambda).exp()).collect();
    }
    // beta / (1 + beta)
    let q = (-softplus(-log_beta)).exp();
    let (mut below, mut x) = (0.0, 0u32);
    edges
        .iter()
        .map(|&k| {
            while x < k {
                below += p;
                p *= q * (x as f64 + eta) / (x as f64 + 1.0);
                x += 1;
            }
            (1.0 - below).max(0.0)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunsPpc {
    pub bins: Vec<ScoreBin>,
    /// Dataset indices of the completed innings used.
    pub innings: Vec<usize>,
    /// Posterior predictive bin probabilities, per completed innings.
    pub probabilities: Vec<Vec<f64>>,
    /// One calibration table per bin.
    pub calibration: Vec<Vec<CalibrationRow>>,
}

/// Calibration of score intervals over completed innings.
pub fn ppc_runs_intervals(chain: &ChainOutput, ds: &Dataset, bins: &[ScoreBin]) -> Result<RunsPpc, AnalysisError> {
    check_chain(chain, ds)?;
    validate_bins(bins)?;
    let innings: Vec<usize> = (0..ds.len())
        .filter(|&r| !ds.innings()[r].outcome.is_censored())
        .collect();
    let m = chain.draws.len() as f64;
    let probabilities: Vec<Vec<f64>> = innings
        .iter()
        .map(|&r| {
            let inn = &ds.innings()[r];
            let mut acc = vec![0.0; bins.len()];
            for d in &chain.draws {
                let p = inn.player;
                for (a, v) in acc.iter_mut().zip(bin_probabilities(d.pi[p], d.eta[p], log_rate(d, inn), bins)) {
                    *a += v;
                }
            }
            acc.into_iter().map(|a| a / m).collect()
        })
        .collect();
    let calibration = (0..bins.len())
        .map(|b| {
            let probs: Vec<f64> = probabilities.iter().map(|row| row[b]).collect();
            let obs: Vec<bool> = innings
                .iter()
                .map(|&r| bins[b].contains(ds.innings()[r].runs()))
                .collect();
            calibration_table(&probs, &obs, CALIBRATION_GROUPS)
        })
        .collect();
    Ok(RunsPpc {
        bins: bins.to_vec(),
        innings,
        probabilities,
        calibration,
    })
}

#[cfg(test)]
mod tests {
    use super::super::tests::{chain_of, small};
    use super::*;
    use crate::model::ParamState;

    #[test]
    fn pi_one_chain_predicts_all_ducks() {
        let ds = small();
        let mut s = ParamState::zeros(ds.dims());
        s.pi.fill(1.0);
        let chain = chain_of(&ds, vec![s; 4]);
        let ppc = ppc_duck(&chain, &ds, 1).unwrap();
        assert!(ppc.probabilities.iter().all(|&p| p == 1.0));
        let completed = ds.innings().iter().filter(|i| !i.not_out()).count() as u64;
        assert!(ppc.predictive_totals.iter().all(|&t| t == completed));
        assert_eq!(ppc.observed_total, 1);
    }

    #[test]
    fn bins_partition_probability() {
        let bins = default_bins();
        validate_bins(&bins).unwrap();
        for &(pi, eta, lam) in &[(0.0, 0.3, 1.0), (0.07, 1.0, 30.0), (0.2, 3.0, 50.0), (0.01, 0.5, 200.0)] {
            let p = bin_probabilities(pi, eta, f64::ln(lam), &bins);
            let s: f64 = p.iter().sum();
            assert!((s - 1.0).abs() < 1e-10, "{s}");
            assert!(p.iter().all(|&v| v >= -1e-15));
        }
        let all = [ScoreBin { lo: 0, hi: None }];
        assert_eq!(bin_probabilities(0.1, 1.0, 2.0, &all), vec![1.0]);
    }

    #[test]
    fn overlapping_bins_rejected() {
        let b = [ScoreBin { lo: 0, hi: Some(10) }, ScoreBin { lo: 10, hi: Some(20) }];
        assert!(validate_bins(&b).is_err());
        let b = [ScoreBin { lo: 5, hi: None }, ScoreBin { lo: 50, hi: Some(60) }];
        assert!(validate_bins(&b).is_err());
        let b = [ScoreBin { lo: 5, hi: Some(2) }];
        assert!(validate_bins(&b).is_err());
    }

    #[test]
    fn calibration_groups_are_equal_count() {
        let probs: Vec<f64> = (0..250).map(|i| i as f64 / 250.0).collect();
        let obs: Vec<bool> = (0..250).map(|i| i % 2 == 0).collect();
        let rows = calibration_table(&probs, &obs, 100);
        assert_eq!(rows.iter().map(|r| r.n).sum::<usize>(), 250);
        assert!(rows.iter().all(|r| r.n == 2 || r.n == 3));
        let few = calibration_table(&probs[..7], &obs[..7], 100);
        assert_eq!(few.len(), 7);
        assert!(few.iter().all(|r| r.observed.is_finite()));
    }

    #[test]
    fn recurrence_matches_incomplete_beta() {
        let edges: Vec<u32> = (0..=200).step_by(7).collect();
        for (eta, lambda) in [(0.3, 1.0), (1.0, 10.0), (3.0, 50.0), (40.0, 120.0)] {
            let fast = survival_at(&edges, eta, f64::ln(lambda));
            for (&k, f) in edges.iter().zip(fast) {
                let slow = log_sf_kernel(k, eta, f64::ln(lambda)).exp();
                assert!((f - slow).abs() < 1e-12, "eta {eta} lambda {lambda} k {k}: {f} vs {slow}");
            }
        }
        let far = [10u32, 400];
        let sf = survival_at(&far, 2.0, 5f64.ln());
        assert!((sf[0] - log_sf_kernel(10, 2.0, 5f64.ln()).exp()).abs() < 1e-15);
    }

    #[test]
    fn runs_ppc_rows_sum_to_one() {
        let ds = small();
        let mut s = ParamState::zeros(ds.dims());
        s.theta.fill(3.0);
        s.alpha1.fill(28.0);
        s.alpha2.fill(0.01);
        let chain = chain_of(&ds, vec![s.clone(), s]);
        let r = ppc_runs_intervals(&chain, &ds, &default_bins()).unwrap();
        assert_eq!(r.innings.len(), 5);
        for row in &r.probabilities {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        }
    }
}
