//! Forward simulation of synthetic careers.
//!
//! Each innings draws a gamma frailty `v ~ Ga(eta, eta)` and a Poisson
//! score with mean `lambda v`. The score is then zeroed with probability
//! `pi`. Independently, with probability `censor_prob`, it is cut to
//! `floor(U x)` and marked not out.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Gamma, LogNormal, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::SimulateError;
use crate::ingest::{Dataset, DatasetOptions, Dims, Innings, InningsRecord, Outcome, Venue};
use crate::model::{log_rate, ParamState};

/// Innings played in each career year.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InningsPerYear {
    Fixed(u32),
    Poisson(f64),
}

impl InningsPerYear {
    fn draw<R: Rng>(self, rng: &mut R) -> u32 {
        match self {
            InningsPerYear::Fixed(n) => n,
            InningsPerYear::Poisson(m) if m > 0.0 => {
                Poisson::new(m).expect("positive mean").sample(rng) as u32
            }
            InningsPerYear::Poisson(_) => 0,
        }
    }
}

/// A fully specified generating process.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimScenario {
    pub true_params: ParamState,
    pub first_year: i32,
    /// Calendar year index of each player's debut.
    pub debut_year: Vec<usize>,
    /// Career length in years, per player.
    pub career_lengths: Vec<usize>,
    /// Age at the start of the debut year, per player.
    pub debut_age: Vec<f64>,
    pub innings_per_year: InningsPerYear,
    pub censor_prob: f64,
    pub seed: u64,
}

impl SimScenario {
    pub fn player_ids(&self) -> Vec<String> {
        (0..self.true_params.dims.players).map(|p| format!("P{p:04}")).collect()
    }

    pub fn opposition_labels(&self) -> Vec<String> {
        (0..self.true_params.dims.oppositions).map(|o| format!("T{o:02}")).collect()
    }

    pub fn validate(&self) -> Result<(), SimulateError> {
        let bad = |m: String| Err(SimulateError::Scenario(m));
        let d = self.true_params.dims;
        if let Err(e) = self.true_params.validate() {
            return bad(e.to_string());
        }
        if !(0.0..1.0).contains(&self.censor_prob) {
            return bad(format!("censor_prob must lie in [0, 1), got {}", self.censor_prob));
        }
        if d.years == 0 || d.oppositions == 0 {
            return bad("at least one year and one opposition are needed".into());
        }
        let last = self.first_year + d.years as i32 - 1;
        let decades = (last.div_euclid(10) - self.first_year.div_euclid(10) + 1) as usize;
        if decades != d.decades {
            return bad(format!("year range spans {decades} decades but dims say {}", d.decades));
        }
        for (name, n) in [
            ("debut_year", self.debut_year.len()),
            ("career_lengths", self.career_lengths.len()),
            ("debut_age", self.debut_age.len()),
        ] {
            if n != d.players {
                return bad(format!("{name} has {n} entries for {} players", d.players));
            }
        }
        for p in 0..d.players {
            if self.career_lengths[p] == 0 || self.debut_year[p] + self.career_lengths[p] > d.years {
                return bad(format!("career of player {p} does not fit the year range"));
            }
            let age = self.debut_age[p];
            if !(age > 10.0 && age + (self.career_lengths[p] as f64) < 60.0) {
                return bad(format!("ages of player {p} leave the supported range"));
            }
        }
        if let InningsPerYear::Poisson(m) = self.innings_per_year {
            if !(m >= 0.0 && m.is_finite()) {
                return bad(format!("innings per year mean must be non-negative, got {m}"));
            }
        }
        Ok(())
    }
}

const MATCH_INNINGS_WEIGHTS: [f64; 4] = [0.3, 0.3, 0.2, 0.2];

/// Draw one score from the zero-inflated, censored generator.
/// Returns `(runs, not_out)`.
pub fn draw_score<R: Rng>(log_lambda: f64, eta: f64, pi: f64, censor_prob: f64, rng: &mut R) -> (u32, bool) {
    let v: f64 = Gamma::new(eta, 1.0 / eta).expect("positive eta").sample(rng);
    let mean = log_lambda.exp() * v;
    let mut x = if mean > 0.0 && mean.is_finite() {
        Poisson::new(mean).expect("positive mean").sample(rng) as u32
    } else {
        0
    };
    if rng.random::<f64>() < pi {
        x = 0;
    }
    if rng.random::<f64>() < censor_prob {
        let u: f64 = rng.random();
        ((u * x as f64).floor() as u32, true)
    } else {
        (x, false)
    }
}

/// Generate a dataset from `scn`. Deterministic given the seed; each
/// player draws from their own stream.
pub fn simulate_dataset(scn: &SimScenario) -> Result<Dataset, SimulateError> {
    scn.validate()?;
    let truth = &scn.true_params;
    let dims = truth.dims;
    let ids = scn.player_ids();
    let opps = scn.opposition_labels();
    let base = ChaCha8Rng::seed_from_u64(scn.seed);
    let decade_of = |y: usize| {
        let cal = scn.first_year + y as i32;
        (cal.div_euclid(10) - scn.first_year.div_euclid(10)) as usize
    };
    let mut records = Vec::new();
    for p in 0..dims.players {
        let mut rng = base.clone();
        rng.set_stream(p as u64 + 1);
        for k in 0..scn.career_lengths[p] {
            let year = scn.debut_year[p] + k;
            let n = scn.innings_per_year.draw(&mut rng);
            for _ in 0..n {
                let age = scn.debut_age[p] + k as f64 + rng.random::<f64>();
                let home = if rng.random::<bool>() { Venue::Home } else { Venue::Away };
                let w: f64 = rng.random();
                let mut acc = 0.0;
                let mut match_innings = 4u8;
                for (i, wi) in MATCH_INNINGS_WEIGHTS.iter().enumerate() {
                    acc += wi;
                    if w < acc {
                        match_innings = i as u8 + 1;
                        break;
                    }
                }
                let opposition = rng.random_range(0..dims.oppositions);
                let inn = Innings {
                    player: p,
                    year,
                    decade: decade_of(year),
                    opposition,
                    home,
                    match_innings,
                    age,
                    outcome: Outcome::Duck,
                };
                let (runs, not_out) =
                    draw_score(log_rate(truth, &inn), truth.eta[p], truth.pi[p], scn.censor_prob, &mut rng);
                records.push(InningsRecord {
                    player_id: ids[p].clone(),
                    date: None,
                    calendar_year: scn.first_year + year as i32,
                    age,
                    home,
                    match_innings,
                    opposition: opps[opposition].clone(),
                    runs,
                    not_out,
                });
            }
        }
    }
    let opts = DatasetOptions {
        oppositions: Some(opps),
        year_span: Some((scn.first_year, scn.first_year + dims.years as i32 - 1)),
        players: Some(ids),
    };
    Ok(Dataset::from_records(records, &opts)?)
}

/// A compact scenario description. Missing fields take defaults; truths
/// are drawn from the stated distributions with the scenario seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSpec {
    pub players: usize,
    pub first_year: i32,
    pub years: usize,
    pub oppositions: usize,
    /// Inclusive range of career lengths in years.
    pub career_years: (usize, usize),
    pub innings_per_year: InningsPerYear,
    /// Uniform range of debut ages.
    pub debut_age: (f64, f64),
    pub censor_prob: f64,
    pub seed: u64,
    /// Abilities `theta ~ N(theta_mean, theta_sd^2)`.
    pub theta_mean: f64,
    pub theta_sd: f64,
    pub alpha1_mean: f64,
    pub alpha1_sd: f64,
    /// `ln alpha2 ~ N(alpha2_logmean, alpha2_logsd^2)`.
    pub alpha2_logmean: f64,
    pub alpha2_logsd: f64,
    /// `ln eta ~ N(eta_logmean, eta_logsd^2)`.
    pub eta_logmean: f64,
    pub eta_logsd: f64,
    /// `pi ~ Beta(pi_a, pi_b)`.
    pub pi_a: f64,
    pub pi_b: f64,
    /// Innovation sd of the backwards random walk of year effects.
    pub year_sd: f64,
    pub zeta2: f64,
    pub nu: [f64; 3],
    pub opposition_sd: f64,
    pub interaction_sd: f64,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        ScenarioSpec {
            players: 30,
            first_year: 1990,
            years: 15,
            oppositions: 6,
            career_years: (4, 10),
            innings_per_year: InningsPerYear::Poisson(8.0),
            debut_age: (19.0, 26.0),
            censor_prob: 0.12,
            seed: 1,
            theta_mean: 30f64.ln(),
            theta_sd: 0.35,
            alpha1_mean: 29.0,
            alpha1_sd: 2.0,
            alpha2_logmean: 0.004f64.ln(),
            alpha2_logsd: 0.4,
            eta_logmean: 0.0,
            eta_logsd: 0.3,
            pi_a: 1.0,
            pi_b: 9.0,
            year_sd: 0.05,
            zeta2: 0.9f64.ln(),
            nu: [0.95f64.ln(), 0.90f64.ln(), 0.84f64.ln()],
            opposition_sd: 0.15,
            interaction_sd: 0.1,
        }
    }
}

impl ScenarioSpec {
    pub fn dims(&self) -> Dims {
        let last = self.first_year + self.years as i32 - 1;
        Dims {
            players: self.players,
            years: self.years,
            decades: (last.div_euclid(10) - self.first_year.div_euclid(10) + 1) as usize,
            oppositions: self.oppositions,
        }
    }

    fn check(&self) -> Result<(), SimulateError> {
        let bad = |m: &str| Err(SimulateError::Scenario(m.to_string()));
        if self.years == 0 || self.oppositions == 0 {
            return bad("years and oppositions must be positive");
        }
        let (lo, hi) = self.career_years;
        if lo == 0 || lo > hi || hi > self.years {
            return bad("career_years must satisfy 1 <= min <= max <= years");
        }
        if !(self.debut_age.0 <= self.debut_age.1) {
            return bad("debut_age range is empty");
        }
        for (name, v) in [
            ("theta_sd", self.theta_sd),
            ("alpha1_sd", self.alpha1_sd),
            ("alpha2_logsd", self.alpha2_logsd),
            ("eta_logsd", self.eta_logsd),
            ("year_sd", self.year_sd),
            ("opposition_sd", self.opposition_sd),
            ("interaction_sd", self.interaction_sd),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(SimulateError::Scenario(format!("{name} must be non-negative")));
            }
        }
        if !(self.pi_a > 0.0 && self.pi_b > 0.0) {
            return bad("pi_a and pi_b must be positive");
        }
        Ok(())
    }

    /// Draw the truths and careers.
    pub fn build(&self) -> Result<SimScenario, SimulateError> {
        self.check()?;
        let dims = self.dims();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(u64::MAX);
        let normal = |m: f64, s: f64| Normal::new(m, s).expect("finite sd");
        let mut t = ParamState::zeros(dims);
        for p in 0..dims.players {
            t.theta[p] = normal(self.theta_mean, self.theta_sd).sample(&mut rng);
            t.alpha1[p] = normal(self.alpha1_mean, self.alpha1_sd).sample(&mut rng);
            t.alpha2[p] = LogNormal::new(self.alpha2_logmean, self.alpha2_logsd)
                .expect("finite sd")
                .sample(&mut rng);
            t.eta[p] = LogNormal::new(self.eta_logmean, self.eta_logsd)
                .expect("finite sd")
                .sample(&mut rng);
            let pi: f64 = Beta::new(self.pi_a, self.pi_b).expect("positive").sample(&mut rng);
            t.pi[p] = pi.clamp(1e-9, 1.0 - 1e-9);
        }
        // backwards walk from the pinned final year
        let n = t.delta.len();
        let mut next = 0.0;
        for l in (0..n).rev() {
            next += normal(0.0, self.year_sd).sample(&mut rng);
            t.delta[l] = next;
        }
        t.sigma2_delta = self.year_sd.powi(2).max(1e-12);
        t.zeta2 = self.zeta2;
        t.nu = self.nu;
        for x in &mut t.xi {
            *x = normal(0.0, self.opposition_sd).sample(&mut rng);
        }
        for w in &mut t.omega {
            *w = normal(0.0, self.interaction_sd).sample(&mut rng);
        }
        t.mu_theta = self.theta_mean;
        t.sigma2_theta = self.theta_sd.powi(2).max(1e-12);

        let (lo, hi) = self.career_years;
        let mut career_lengths = Vec::with_capacity(dims.players);
        let mut debut_year = Vec::with_capacity(dims.players);
        let mut debut_age = Vec::with_capacity(dims.players);
        for _ in 0..dims.players {
            let len = rng.random_range(lo..=hi);
            career_lengths.push(len);
            debut_year.push(rng.random_range(0..=dims.years - len));
            let (a, b) = self.debut_age;
            debut_age.push(if a < b { rng.random_range(a..b) } else { a });
        }
        Ok(SimScenario {
            true_params: t,
            first_year: self.first_year,
            debut_year,
            career_lengths,
            debut_age,
            innings_per_year: self.innings_per_year,
            censor_prob: self.censor_prob,
            seed: self.seed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario(players: usize) -> SimScenario {
        ScenarioSpec {
            players,
            ..ScenarioSpec::default()
        }
        .build()
        .unwrap()
    }

    #[test]
    fn deterministic_and_valid() {
        let scn = scenario(12);
        let a = simulate_dataset(&scn).unwrap();
        let b = simulate_dataset(&scn).unwrap();
        assert_eq!(a.records(), b.records());
        assert_eq!(a.dims(), scn.true_params.dims);
        assert!(a.len() > 100);
        let mut other = scn.clone();
        other.seed += 1;
        assert_ne!(simulate_dataset(&other).unwrap().records(), a.records());
    }

    #[test]
    fn pi_one_gives_zero_scores() {
        let mut scn = scenario(5);
        // largest value below 1; states require pi < 1
        scn.true_params.pi.fill(f64::from_bits(1.0f64.to_bits() - 1));
        let ds = simulate_dataset(&scn).unwrap();
        assert!(ds.records().iter().all(|r| r.runs == 0));
    }

    #[test]
    fn single_player_fixed_innings() {
        let mut scn = scenario(1);
        scn.career_lengths = vec![1];
        scn.debut_year = vec![0];
        scn.innings_per_year = InningsPerYear::Fixed(10);
        let ds = simulate_dataset(&scn).unwrap();
        assert_eq!(ds.len(), 10);
        let mut buf = Vec::new();
        crate::ingest::write_csv(&ds, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 11);
    }

    #[test]
    fn bad_scenarios_rejected() {
        let mut scn = scenario(3);
        scn.censor_prob = 1.0;
        assert!(simulate_dataset(&scn).is_err());
        let mut scn = scenario(3);
        scn.career_lengths[0] = 40;
        assert!(simulate_dataset(&scn).is_err());
        let spec = ScenarioSpec {
            career_years: (5, 3),
            ..ScenarioSpec::default()
        };
        assert!(spec.build().is_err());
    }

    #[test]
    fn censoring_cuts_below_full_score() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut censored = 0;
        for _ in 0..2000 {
            let (_, no) = draw_score(3.0, 2.0, 0.0, 0.3, &mut rng);
            censored += no as usize;
        }
        let f = censored as f64 / 2000.0;
        assert!((f - 0.3).abs() < 4.0 * (0.3 * 0.7 / 2000.0f64).sqrt());
    }
}
