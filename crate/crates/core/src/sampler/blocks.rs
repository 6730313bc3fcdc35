//! Scalar random-walk and conjugate updates.

use rand::Rng;
use rand_distr::{Gamma, StandardNormal};

use super::{Block, Sampler};
use crate::model::softplus;

/// Target acceptance for scalar random walks.
const TARGET_1D: f64 = 0.44;
/// Target acceptance for the joint two-parameter ageing move.
const TARGET_2D: f64 = 0.35;

/// `1 / Gamma(shape, 1) * rate`: an inverse-gamma draw.
pub(crate) fn inverse_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> f64 {
    let g: f64 = rng.sample(Gamma::new(shape, 1.0).expect("positive shape"));
    rate / g
}

impl Sampler<'_> {
    pub(super) fn update_theta(&mut self, t: u64) {
        let ds = self.ds;
        let (mu, s2) = (self.state.mu_theta, self.state.sigma2_theta);
        for p in 0..self.state.dims.players {
            let mut rng = self.rng(t, Block::Theta, p + 1);
            let z: f64 = rng.sample(StandardNormal);
            let u: f64 = rng.random();
            let step = self.scales.theta[p] * z;
            if step == 0.0 {
                self.record(Block::Theta, true);
                continue;
            }
            let old = self.state.theta[p];
            let new = old + step;
            let prior = -((new - mu).powi(2) - (old - mu).powi(2)) / (2.0 * s2);
            self.state.theta[p] = new;
            let acc = self.try_move(ds.player_innings(p), false, prior, u);
            if !acc {
                self.state.theta[p] = old;
            }
            self.record(Block::Theta, acc);
            if self.adapting() {
                Self::adapt(&mut self.scales.theta[p], t, acc, TARGET_1D);
            }
        }
    }

    pub(super) fn gibbs_sigma2_delta(&mut self, t: u64) {
        let mut rng = self.rng(t, Block::Sigma2Delta, 0);
        let n = self.state.delta.len();
        let quad = match &self.q {
            Some(q) => q.quad_form(&self.state.delta).expect("dimension fixed"),
            None => 0.0,
        };
        let shape = self.prior.a_delta + n as f64 / 2.0;
        let rate = self.prior.b_delta + quad / 2.0;
        self.state.sigma2_delta = inverse_gamma(shape, rate, &mut rng);
        self.record(Block::Sigma2Delta, true);
    }

    /// Joint move of peak age (normal walk) and curvature (walk on the log
    /// scale). Working with the density of `ln alpha2` absorbs the
    /// `alpha2* / alpha2` proposal Jacobian.
    pub(super) fn update_ageing(&mut self, t: u64) {
        let ds = self.ds;
        let pr = &self.prior;
        let (m1, v1, m2, v2) = (pr.alpha1_mean, pr.alpha1_var, pr.alpha2_logmean, pr.alpha2_logvar);
        for p in 0..self.state.dims.players {
            let mut rng = self.rng(t, Block::Ageing, p + 1);
            let z1: f64 = rng.sample(StandardNormal);
            let z2: f64 = rng.sample(StandardNormal);
            let u: f64 = rng.random();
            let (s1, s2) = (self.scales.alpha1[p] * z1, self.scales.alpha2[p] * z2);
            if s1 == 0.0 && s2 == 0.0 {
                self.record(Block::Ageing, true);
                continue;
            }
            let (a1, a2) = (self.state.alpha1[p], self.state.alpha2[p]);
            let la2 = a2.ln();
            let a1n = a1 + s1;
            let la2n = la2 + s2;
            let a2n = if s2 == 0.0 { a2 } else { la2n.exp() };
            let acc = if a2n > 0.0 && a2n.is_finite() {
                let prior = -((a1n - m1).powi(2) - (a1 - m1).powi(2)) / (2.0 * v1)
                    - ((la2n - m2).powi(2) - (la2 - m2).powi(2)) / (2.0 * v2);
                self.state.alpha1[p] = a1n;
                self.state.alpha2[p] = a2n;
                let acc = self.try_move(ds.player_innings(p), false, prior, u);
                if !acc {
                    self.state.alpha1[p] = a1;
                    self.state.alpha2[p] = a2;
                }
                acc
            } else {
                false
            };
            self.record(Block::Ageing, acc);
            if self.adapting() {
                Self::adapt(&mut self.scales.alpha1[p], t, acc, TARGET_2D);
                Self::adapt(&mut self.scales.alpha2[p], t, acc, TARGET_2D);
            }
        }
    }

    /// One-at-a-time walks over the away, innings, opposition and
    /// interaction effects, each with a centred normal prior.
    pub(super) fn update_game_effects(&mut self, t: u64) {
        let index = self.index.clone();
        let var = self.prior.game_effect_sd.powi(2);
        let mut rng = self.rng(t, Block::Game, 0);
        for (k, (slot, records)) in index.game.iter().enumerate() {
            let z: f64 = rng.sample(StandardNormal);
            let u: f64 = rng.random();
            let step = self.scales.game[k] * z;
            if step == 0.0 {
                self.record(Block::Game, true);
                continue;
            }
            let old = slot.get(&self.state);
            let new = old + step;
            let prior = -(new * new - old * old) / (2.0 * var);
            slot.set(&mut self.state, new);
            let acc = self.try_move(records, false, prior, u);
            if !acc {
                slot.set(&mut self.state, old);
            }
            self.record(Block::Game, acc);
            if self.adapting() {
                Self::adapt(&mut self.scales.game[k], t, acc, TARGET_1D);
            }
        }
    }

    /// Walk on `ln eta` against the normal prior of `ln eta`.
    pub(super) fn update_eta(&mut self, t: u64) {
        let ds = self.ds;
        let (m, v) = (self.prior.eta_logmean, self.prior.eta_logvar);
        for p in 0..self.state.dims.players {
            let mut rng = self.rng(t, Block::Eta, p + 1);
            let z: f64 = rng.sample(StandardNormal);
            let u: f64 = rng.random();
            let step = self.scales.eta[p] * z;
            if step == 0.0 {
                self.record(Block::Eta, true);
                continue;
            }
            let old = self.state.eta[p];
            let lo = old.ln();
            let ln = lo + step;
            let new = ln.exp();
            let acc = if new > 0.0 && new.is_finite() {
                let prior = -((ln - m).powi(2) - (lo - m).powi(2)) / (2.0 * v);
                self.state.eta[p] = new;
                let acc = self.try_move(ds.player_innings(p), true, prior, u);
                if !acc {
                    self.state.eta[p] = old;
                }
                acc
            } else {
                false
            };
            self.record(Block::Eta, acc);
            if self.adapting() {
                Self::adapt(&mut self.scales.eta[p], t, acc, TARGET_1D);
            }
        }
    }

    /// Walk on `logit pi`; on that scale the beta prior becomes
    /// `a ln pi + b ln(1 - pi)`.
    pub(super) fn update_pi(&mut self, t: u64) {
        let ds = self.ds;
        let (a, b) = (self.prior.a_pi, self.prior.b_pi);
        let log_target = |l: f64| -a * softplus(-l) - b * softplus(l);
        for p in 0..self.state.dims.players {
            let mut rng = self.rng(t, Block::Pi, p + 1);
            let z: f64 = rng.sample(StandardNormal);
            let u: f64 = rng.random();
            let step = self.scales.pi[p] * z;
            if step == 0.0 {
                self.record(Block::Pi, true);
                continue;
            }
            let old = self.state.pi[p];
            let lo = (old / (1.0 - old)).ln();
            let ln = lo + step;
            let new = 1.0 / (1.0 + (-ln).exp());
            let acc = if new > 0.0 && new < 1.0 {
                let prior = log_target(ln) - log_target(lo);
                self.state.pi[p] = new;
                let acc = self.try_move(ds.player_innings(p), false, prior, u);
                if !acc {
                    self.state.pi[p] = old;
                }
                acc
            } else {
                false
            };
            self.record(Block::Pi, acc);
            if self.adapting() {
                Self::adapt(&mut self.scales.pi[p], t, acc, TARGET_1D);
            }
        }
    }

    /// Conjugate draws of the ability mean, then the ability variance.
    pub(super) fn gibbs_hyper(&mut self, t: u64) {
        let mut rng = self.rng(t, Block::Hyper, 0);
        let pr = &self.prior;
        let n = self.state.theta.len() as f64;
        let sum: f64 = self.state.theta.iter().sum();
        let s2 = self.state.sigma2_theta;
        let sm2 = pr.s_mu * pr.s_mu;
        let denom = s2 + n * sm2;
        let mean = (pr.m_mu * s2 + sum * sm2) / denom;
        let var = s2 * sm2 / denom;
        let z: f64 = rng.sample(StandardNormal);
        let mu = mean + var.sqrt() * z;
        let ss: f64 = self.state.theta.iter().map(|th| (th - mu).powi(2)).sum();
        let sigma2 = inverse_gamma(pr.a_sigma + n / 2.0, pr.b_sigma + ss / 2.0, &mut rng);
        self.state.mu_theta = mu;
        self.state.sigma2_theta = sigma2;
        self.record(Block::Hyper, true);
    }
}
