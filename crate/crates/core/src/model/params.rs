use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::ingest::{Dataset, Dims, Innings, Venue};
use crate::model::PriorConfig;

/// One point in parameter space.
///
/// Identifiability pins are structural: the final year effect, the home
/// effect, the first-innings effect, the reference opposition and the
/// interaction row/column for the reference opposition and final decade
/// have no storage. Accessors return exact zeros for them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamState {
    pub dims: Dims,
    /// Log peak ability, one per player.
    pub theta: Vec<f64>,
    /// Year effects for every year except the last (pinned at 0).
    pub delta: Vec<f64>,
    pub sigma2_delta: f64,
    /// Peak age.
    pub alpha1: Vec<f64>,
    /// Ageing curvature, positive.
    pub alpha2: Vec<f64>,
    /// Away effect; home is the reference.
    pub zeta2: f64,
    /// Effects of match innings 2, 3 and 4.
    pub nu: [f64; 3],
    /// Opposition effects for every opposition except the reference.
    pub xi: Vec<f64>,
    /// Opposition x decade interactions, row-major over
    /// (opposition 1.., decade ..D-1).
    pub omega: Vec<f64>,
    /// Gamma random-effect heterogeneity, positive.
    pub eta: Vec<f64>,
    /// Zero-inflation probability in (0, 1).
    pub pi: Vec<f64>,
    pub mu_theta: f64,
    pub sigma2_theta: f64,
}

impl ParamState {
    /// Every effect at zero, positive parameters at 1 and `pi` at 0.1.
    pub fn zeros(dims: Dims) -> Self {
        let p = dims.players;
        ParamState {
            dims,
            theta: vec![0.0; p],
            delta: vec![0.0; dims.years.saturating_sub(1)],
            sigma2_delta: 1.0,
            alpha1: vec![0.0; p],
            alpha2: vec![1.0; p],
            zeta2: 0.0,
            nu: [0.0; 3],
            xi: vec![0.0; dims.oppositions.saturating_sub(1)],
            omega: vec![
                0.0;
                dims.oppositions.saturating_sub(1) * dims.decades.saturating_sub(1)
            ],
            eta: vec![1.0; p],
            pi: vec![0.1; p],
            mu_theta: 0.0,
            sigma2_theta: 1.0,
        }
    }

    /// Moment-based starting point: `theta` from each player's mean
    /// completed score, peak age and curvature at their prior centres,
    /// `eta = 1`, `pi = 0.1`, game effects 0, hyperparameters at prior means.
    pub fn initial(ds: &Dataset, prior: &PriorConfig) -> Self {
        let dims = ds.dims();
        let mut s = ParamState::zeros(dims);
        for p in 0..dims.players {
            let (sum, n) = ds
                .player_innings(p)
                .iter()
                .map(|&r| ds.innings()[r].outcome)
                .filter(|o| !o.is_censored())
                .fold((0.0, 0usize), |(s, n), o| (s + o.runs() as f64, n + 1));
            let mean = if n > 0 { sum / n as f64 } else { 0.0 };
            s.theta[p] = mean.max(1.0).ln();
        }
        s.alpha1.fill(prior.alpha1_mean);
        s.alpha2.fill(prior.alpha2_logmean.exp());
        s.eta.fill(1.0);
        s.pi.fill(0.1);
        s.mu_theta = prior.m_mu;
        s.sigma2_theta = prior.sigma2_theta_mean();
        s.sigma2_delta = prior.sigma2_delta_mean();
        s
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let d = self.dims;
        let lens = [
            ("theta", self.theta.len(), d.players),
            ("alpha1", self.alpha1.len(), d.players),
            ("alpha2", self.alpha2.len(), d.players),
            ("eta", self.eta.len(), d.players),
            ("pi", self.pi.len(), d.players),
            ("delta", self.delta.len(), d.years.saturating_sub(1)),
            ("xi", self.xi.len(), d.oppositions.saturating_sub(1)),
            (
                "omega",
                self.omega.len(),
                d.oppositions.saturating_sub(1) * d.decades.saturating_sub(1),
            ),
        ];
        for (name, got, want) in lens {
            if got != want {
                return Err(ModelError::Domain(format!("{name} has length {got}, expected {want}")));
            }
        }
        let pos = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ModelError::Domain(format!("{name} must be positive, got {v}")))
            }
        };
        pos("sigma2_delta", self.sigma2_delta)?;
        pos("sigma2_theta", self.sigma2_theta)?;
        for &a in &self.alpha2 {
            pos("alpha2", a)?;
        }
        for &e in &self.eta {
            pos("eta", e)?;
        }
        for &p in &self.pi {
            if !(p > 0.0 && p < 1.0) {
                return Err(ModelError::Domain(format!("pi must lie in (0, 1), got {p}")));
            }
        }
        Ok(())
    }

    pub fn year_effect(&self, year: usize) -> f64 {
        self.delta.get(year).copied().unwrap_or(0.0)
    }

    pub fn venue_effect(&self, home: Venue) -> f64 {
        match home {
            Venue::Home => 0.0,
            Venue::Away => self.zeta2,
        }
    }

    pub fn innings_effect(&self, match_innings: u8) -> f64 {
        match match_innings {
            2..=4 => self.nu[match_innings as usize - 2],
            _ => 0.0,
        }
    }

    pub fn opposition_effect(&self, opposition: usize) -> f64 {
        if opposition == 0 {
            0.0
        } else {
            self.xi[opposition - 1]
        }
    }

    /// Storage slot of an interaction, `None` when pinned.
    pub fn omega_index(&self, opposition: usize, decade: usize) -> Option<usize> {
        let free_decades = self.dims.decades.saturating_sub(1);
        if opposition == 0 || decade >= free_decades {
            None
        } else {
            Some((opposition - 1) * free_decades + decade)
        }
    }

    pub fn interaction(&self, opposition: usize, decade: usize) -> f64 {
        self.omega_index(opposition, decade)
            .map_or(0.0, |i| self.omega[i])
    }

    /// Sum of the year, venue, innings, opposition and interaction effects
    /// for one innings (everything in the log rate except ability and ageing).
    pub fn context_effect(&self, inn: &Innings) -> f64 {
        self.year_effect(inn.year)
            + self.venue_effect(inn.home)
            + self.innings_effect(inn.match_innings)
            + self.opposition_effect(inn.opposition)
            + self.interaction(inn.opposition, inn.decade)
    }

    /// Posterior-summary quantity `(1 - pi) exp(theta)`: expected runs at
    /// peak age in the reference context.
    pub fn peak_runs(&self, player: usize) -> f64 {
        (1.0 - self.pi[player]) * self.theta[player].exp()
    }
}
