//! Metropolis-within-Gibbs sampler.
//!
//! One iteration updates, in order: abilities, the year-effect block,
//! the year smoothing variance, ageing, game effects, heterogeneity,
//! zero inflation and the ability hyperparameters.
//!
//! Randomness is drawn from ChaCha8 streams keyed by (seed, iteration,
//! block, player), so a chain resumed from a checkpoint at iteration `t`
//! is bit-identical to one that never stopped.

mod blocks;
mod checkpoint;
mod delta;

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::SamplerError;
use crate::gmrf::{build_q, TridiagPrecision};
use crate::ingest::{Dataset, Innings, Outcome, Venue};
use crate::model::{innings_ll_kernel, log_binom_coef, log_rate, ParamState, PriorConfig};

pub use checkpoint::{Checkpoint, CheckpointPolicy};
pub use delta::{delta_grad_hess, delta_neg_log_fcd};

/// An update block, in iteration order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Block {
    Theta,
    Delta,
    Sigma2Delta,
    Ageing,
    Game,
    Eta,
    Pi,
    Hyper,
}

impl Block {
    pub const ALL: [Block; 8] = [
        Block::Theta,
        Block::Delta,
        Block::Sigma2Delta,
        Block::Ageing,
        Block::Game,
        Block::Eta,
        Block::Pi,
        Block::Hyper,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Block::Theta => "theta",
            Block::Delta => "delta",
            Block::Sigma2Delta => "sigma2_delta",
            Block::Ageing => "ageing",
            Block::Game => "game",
            Block::Eta => "eta",
            Block::Pi => "pi",
            Block::Hyper => "hyper",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Block::ALL.into_iter().find(|b| b.name() == s)
    }

    fn id(self) -> u64 {
        self as u64
    }
}

/// Random-walk proposal scales. Positive parameters move on the log
/// scale and `pi` on the logit scale.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepTarget {
    Theta,
    /// Componentwise fallback when the year-effect proposal cannot be built.
    Delta,
    Alpha1,
    Alpha2,
    Game,
    Eta,
    Pi,
}

impl StepTarget {
    pub const ALL: [StepTarget; 7] = [
        StepTarget::Theta,
        StepTarget::Delta,
        StepTarget::Alpha1,
        StepTarget::Alpha2,
        StepTarget::Game,
        StepTarget::Eta,
        StepTarget::Pi,
    ];

    pub fn default_step(self) -> f64 {
        match self {
            StepTarget::Theta => 0.1,
            StepTarget::Delta => 0.02,
            StepTarget::Alpha1 => 1.0,
            StepTarget::Alpha2 => 0.3,
            StepTarget::Game => 0.03,
            StepTarget::Eta => 0.3,
            StepTarget::Pi => 0.5,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            StepTarget::Theta => "theta",
            StepTarget::Delta => "delta",
            StepTarget::Alpha1 => "alpha1",
            StepTarget::Alpha2 => "alpha2",
            StepTarget::Game => "game",
            StepTarget::Eta => "eta",
            StepTarget::Pi => "pi",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        StepTarget::ALL.into_iter().find(|t| t.name() == s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    /// Total iterations, burn-in included.
    pub n_iter: u64,
    pub burn_in: u64,
    pub thin: u64,
    pub seed: u64,
    /// Overrides of [`StepTarget::default_step`].
    #[serde(default)]
    pub step_sizes: BTreeMap<StepTarget, f64>,
    /// Robbins-Monro scale adaptation during burn-in.
    #[serde(default)]
    pub adapt: bool,
    pub newton_max_iter: u32,
    pub newton_tol: f64,
    /// Blocks to run. Disabled blocks hold their parameters fixed.
    pub blocks: Vec<Block>,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            n_iter: 205_000,
            burn_in: 5_000,
            thin: 20,
            seed: 0,
            step_sizes: BTreeMap::new(),
            adapt: false,
            newton_max_iter: 20,
            newton_tol: 1e-8,
            blocks: Block::ALL.to_vec(),
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<(), SamplerError> {
        let bad = |m: String| Err(SamplerError::Config(m));
        if self.n_iter == 0 {
            return bad("n_iter must be positive".into());
        }
        if self.burn_in >= self.n_iter {
            return bad(format!("burn_in {} must be below n_iter {}", self.burn_in, self.n_iter));
        }
        if self.thin == 0 {
            return bad("thin must be positive".into());
        }
        if self.newton_max_iter == 0 {
            return bad("newton_max_iter must be positive".into());
        }
        if !(self.newton_tol > 0.0 && self.newton_tol.is_finite()) {
            return bad(format!("newton_tol must be positive, got {}", self.newton_tol));
        }
        for (t, &s) in &self.step_sizes {
            if !(s >= 0.0 && s.is_finite()) {
                return bad(format!("step size for {} must be non-negative, got {s}", t.name()));
            }
        }
        for (i, b) in self.blocks.iter().enumerate() {
            if self.blocks[..i].contains(b) {
                return bad(format!("block {} listed twice", b.name()));
            }
        }
        Ok(())
    }

    pub fn step(&self, t: StepTarget) -> f64 {
        self.step_sizes.get(&t).copied().unwrap_or_else(|| t.default_step())
    }

    pub fn enabled(&self, b: Block) -> bool {
        self.blocks.contains(&b)
    }

    /// Number of stored draws, `floor((n_iter - burn_in) / thin)`.
    pub fn n_draws(&self) -> u64 {
        (self.n_iter - self.burn_in) / self.thin
    }

    fn keeps(&self, t: u64) -> bool {
        t >= self.burn_in && (t - self.burn_in + 1) % self.thin == 0
    }
}

/// SHA-256 over the chain settings (seed excluded) and the prior, so that
/// chains differing only by seed share a hash.
pub fn config_hash(cfg: &ChainConfig, prior: &PriorConfig) -> String {
    let mut c = cfg.clone();
    c.seed = 0;
    let body = serde_json::to_string(&(c, prior)).expect("config serializes");
    let mut h = Sha256::new();
    h.update(body.as_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Thinned post-burn-in draws plus run metadata.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainOutput {
    pub draws: Vec<ParamState>,
    /// Post-burn-in acceptance rate per enabled block; Gibbs blocks report 1.
    pub acceptance_rates: BTreeMap<Block, f64>,
    pub config: ChainConfig,
    pub prior: PriorConfig,
    pub dataset_fingerprint: String,
    pub config_hash: String,
    /// Iterations where the year-effect proposal fell back to a
    /// componentwise random walk.
    pub delta_fallbacks: u64,
}

/// Run a chain from the default initial state.
pub fn run_chain(
    ds: &Dataset,
    prior: &PriorConfig,
    cfg: &ChainConfig,
) -> Result<ChainOutput, SamplerError> {
    let mut s = Sampler::new(ds, prior, cfg)?;
    s.run(None)?;
    Ok(s.finish())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub(crate) struct Scales {
    theta: Vec<f64>,
    delta: Vec<f64>,
    alpha1: Vec<f64>,
    alpha2: Vec<f64>,
    game: Vec<f64>,
    eta: Vec<f64>,
    pi: Vec<f64>,
}

impl Scales {
    fn new(cfg: &ChainConfig, state: &ParamState, n_game: usize) -> Self {
        let p = state.dims.players;
        Scales {
            theta: vec![cfg.step(StepTarget::Theta); p],
            delta: vec![cfg.step(StepTarget::Delta); state.delta.len()],
            alpha1: vec![cfg.step(StepTarget::Alpha1); p],
            alpha2: vec![cfg.step(StepTarget::Alpha2); p],
            game: vec![cfg.step(StepTarget::Game); n_game],
            eta: vec![cfg.step(StepTarget::Eta); p],
            pi: vec![cfg.step(StepTarget::Pi); p],
        }
    }
}

/// A free game-context effect and the records it touches.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum GameSlot {
    Zeta,
    Nu(usize),
    Xi(usize),
    Omega(usize),
}

impl GameSlot {
    fn get(self, s: &ParamState) -> f64 {
        match self {
            GameSlot::Zeta => s.zeta2,
            GameSlot::Nu(g) => s.nu[g],
            GameSlot::Xi(q) => s.xi[q],
            GameSlot::Omega(k) => s.omega[k],
        }
    }

    fn set(self, s: &mut ParamState, v: f64) {
        match self {
            GameSlot::Zeta => s.zeta2 = v,
            GameSlot::Nu(g) => s.nu[g] = v,
            GameSlot::Xi(q) => s.xi[q] = v,
            GameSlot::Omega(k) => s.omega[k] = v,
        }
    }
}

/// Record lists per covariate level.
#[derive(Debug)]
pub(crate) struct Index {
    /// Records per free year.
    by_year: Vec<Vec<usize>>,
    /// Records in any free year.
    free_years: Vec<usize>,
    game: Vec<(GameSlot, Vec<usize>)>,
}

impl Index {
    fn build(ds: &Dataset, state: &ParamState) -> Self {
        let n_free = state.delta.len();
        let mut by_year = vec![Vec::new(); n_free];
        let mut away = Vec::new();
        let mut nu = vec![Vec::new(); 3];
        let mut xi = vec![Vec::new(); state.xi.len()];
        let mut omega = vec![Vec::new(); state.omega.len()];
        for (r, inn) in ds.innings().iter().enumerate() {
            if inn.year < n_free {
                by_year[inn.year].push(r);
            }
            if inn.home == Venue::Away {
                away.push(r);
            }
            if (2..=4).contains(&inn.match_innings) {
                nu[inn.match_innings as usize - 2].push(r);
            }
            if inn.opposition > 0 {
                xi[inn.opposition - 1].push(r);
            }
            if let Some(k) = state.omega_index(inn.opposition, inn.decade) {
                omega[k].push(r);
            }
        }
        let free_years = by_year.iter().flatten().copied().collect::<Vec<_>>();
        let mut game = vec![(GameSlot::Zeta, away)];
        game.extend(nu.into_iter().enumerate().map(|(g, v)| (GameSlot::Nu(g), v)));
        game.extend(xi.into_iter().enumerate().map(|(q, v)| (GameSlot::Xi(q), v)));
        game.extend(omega.into_iter().enumerate().map(|(k, v)| (GameSlot::Omega(k), v)));
        let mut free_sorted = free_years;
        free_sorted.sort_unstable();
        Index {
            by_year,
            free_years: free_sorted,
            game,
        }
    }
}

/// Per-record log rate, log binomial coefficient and log-likelihood.
#[derive(Clone, Debug)]
pub(crate) struct Cache {
    log_lambda: Vec<f64>,
    log_coef: Vec<f64>,
    ll: Vec<f64>,
}

pub(crate) fn coef_for(inn: &Innings, eta: f64) -> f64 {
    match inn.outcome {
        Outcome::Completed(x) => log_binom_coef(x, eta),
        _ => 0.0,
    }
}

/// `(ln lambda, ll)` of one record given its binomial coefficient.
#[inline]
pub(crate) fn record_terms(state: &ParamState, inn: &Innings, log_coef: f64) -> (f64, f64) {
    let p = inn.player;
    let log_lambda = log_rate(state, inn);
    let ll = innings_ll_kernel(inn.outcome, state.eta[p], state.pi[p], log_lambda, log_coef);
    (log_lambda, ll)
}

impl Cache {
    fn build(ds: &Dataset, state: &ParamState) -> Self {
        let n = ds.len();
        let mut c = Cache {
            log_lambda: Vec::with_capacity(n),
            log_coef: Vec::with_capacity(n),
            ll: Vec::with_capacity(n),
        };
        for inn in ds.innings() {
            let coef = coef_for(inn, state.eta[inn.player]);
            let (l, ll) = record_terms(state, inn, coef);
            c.log_lambda.push(l);
            c.log_coef.push(coef);
            c.ll.push(ll);
        }
        c
    }

    fn total(&self) -> f64 {
        self.ll.iter().sum()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub(crate) struct Count {
    accepted: u64,
    proposed: u64,
}

const MAX_SUBSTREAMS: usize = (1 << 20) - 1;

/// A chain in progress.
pub struct Sampler<'a> {
    ds: &'a Dataset,
    prior: PriorConfig,
    cfg: ChainConfig,
    index: Arc<Index>,
    q: Option<TridiagPrecision>,
    base_rng: ChaCha8Rng,
    state: ParamState,
    cache: Cache,
    scales: Scales,
    tally: BTreeMap<Block, Count>,
    draws: Vec<ParamState>,
    iteration: u64,
    delta_fallbacks: u64,
    config_hash: String,
    fingerprint: String,
    scratch: Vec<(f64, f64, f64)>,
}

impl<'a> Sampler<'a> {
    /// Start from [`ParamState::initial`].
    pub fn new(ds: &'a Dataset, prior: &PriorConfig, cfg: &ChainConfig) -> Result<Self, SamplerError> {
        Self::with_state(ds, prior, cfg, ParamState::initial(ds, prior))
    }

    /// Start from a given state. Parameters of disabled blocks stay at
    /// their values in `state`.
    pub fn with_state(
        ds: &'a Dataset,
        prior: &PriorConfig,
        cfg: &ChainConfig,
        state: ParamState,
    ) -> Result<Self, SamplerError> {
        cfg.validate()?;
        prior.validate().map_err(SamplerError::Config)?;
        if state.dims != ds.dims() {
            return Err(SamplerError::Config(format!(
                "state dims {:?} do not match dataset {:?}",
                state.dims,
                ds.dims()
            )));
        }
        state.validate()?;
        let index = Index::build(ds, &state);
        if ds.dims().players > MAX_SUBSTREAMS || index.game.len() > MAX_SUBSTREAMS {
            return Err(SamplerError::Config("too many players or effects".into()));
        }
        let cache = Cache::build(ds, &state);
        if !cache.total().is_finite() {
            return Err(SamplerError::NonFiniteInit);
        }
        let q = if state.delta.is_empty() {
            None
        } else {
            Some(build_q(state.delta.len()).expect("non-empty"))
        };
        let scales = Scales::new(cfg, &state, index.game.len());
        Ok(Sampler {
            ds,
            prior: prior.clone(),
            cfg: cfg.clone(),
            index: Arc::new(index),
            q,
            base_rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            state,
            cache,
            scales,
            tally: BTreeMap::new(),
            draws: Vec::new(),
            iteration: 0,
            delta_fallbacks: 0,
            config_hash: config_hash(cfg, prior),
            fingerprint: ds.fingerprint(),
            scratch: Vec::new(),
        })
    }

    /// Continue a chain from a checkpoint written by the same
    /// configuration on the same data.
    pub fn resume(
        ds: &'a Dataset,
        prior: &PriorConfig,
        cfg: &ChainConfig,
        ckpt: Checkpoint,
    ) -> Result<Self, SamplerError> {
        ckpt.check(cfg, prior, ds)?;
        let mut s = Self::with_state(ds, prior, cfg, ckpt.state)?;
        if ckpt.scales.theta.len() != s.scales.theta.len()
            || ckpt.scales.game.len() != s.scales.game.len()
            || ckpt.scales.delta.len() != s.scales.delta.len()
        {
            return Err(SamplerError::CheckpointMismatch("proposal scale layout".into()));
        }
        s.scales = ckpt.scales;
        s.tally = ckpt.tally.into_iter().collect();
        s.draws = ckpt.draws;
        s.iteration = ckpt.iteration;
        s.delta_fallbacks = ckpt.delta_fallbacks;
        Ok(s)
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn state(&self) -> &ParamState {
        &self.state
    }

    pub fn config(&self) -> &ChainConfig {
        &self.cfg
    }

    /// Current total log-likelihood from the record cache.
    pub fn log_lik(&self) -> f64 {
        self.cache.total()
    }

    pub fn is_done(&self) -> bool {
        self.iteration >= self.cfg.n_iter
    }

    /// One full iteration.
    pub fn step(&mut self) {
        let t = self.iteration;
        for b in Block::ALL {
            if !self.cfg.enabled(b) {
                continue;
            }
            match b {
                Block::Theta => self.update_theta(t),
                Block::Delta => self.update_delta_block(t),
                Block::Sigma2Delta => self.gibbs_sigma2_delta(t),
                Block::Ageing => self.update_ageing(t),
                Block::Game => self.update_game_effects(t),
                Block::Eta => self.update_eta(t),
                Block::Pi => self.update_pi(t),
                Block::Hyper => self.gibbs_hyper(t),
            }
        }
        if self.cfg.keeps(t) {
            self.draws.push(self.state.clone());
        }
        self.iteration += 1;
    }

    /// Run up to `n_iter`, writing checkpoints per `policy`.
    pub fn run(&mut self, policy: Option<&CheckpointPolicy>) -> Result<(), SamplerError> {
        self.run_until(self.cfg.n_iter, policy)
    }

    /// Run until `iteration` reaches `stop` (capped at `n_iter`).
    pub fn run_until(&mut self, stop: u64, policy: Option<&CheckpointPolicy>) -> Result<(), SamplerError> {
        let stop = stop.min(self.cfg.n_iter);
        while self.iteration < stop {
            self.step();
            if let Some(p) = policy {
                if p.every > 0 && self.iteration % p.every == 0 {
                    self.checkpoint().save(&p.path)?;
                }
            }
        }
        Ok(())
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            format: checkpoint::FORMAT.to_string(),
            config_hash: self.config_hash.clone(),
            dataset_fingerprint: self.fingerprint.clone(),
            seed: self.cfg.seed,
            iteration: self.iteration,
            state: self.state.clone(),
            scales: self.scales.clone(),
            tally: self.tally.iter().map(|(b, c)| (*b, *c)).collect(),
            draws: self.draws.clone(),
            delta_fallbacks: self.delta_fallbacks,
        }
    }

    pub fn finish(self) -> ChainOutput {
        let acceptance_rates = self
            .tally
            .iter()
            .filter(|(_, c)| c.proposed > 0)
            .map(|(b, c)| (*b, c.accepted as f64 / c.proposed as f64))
            .collect();
        ChainOutput {
            draws: self.draws,
            acceptance_rates,
            config: self.cfg,
            prior: self.prior,
            dataset_fingerprint: self.fingerprint,
            config_hash: self.config_hash,
            delta_fallbacks: self.delta_fallbacks,
        }
    }

    /// Stream for one (iteration, block, sub-index) triple.
    fn rng(&self, t: u64, b: Block, sub: usize) -> ChaCha8Rng {
        let mut r = self.base_rng.clone();
        r.set_stream((t << 24) | (b.id() << 20) | sub as u64);
        r.set_word_pos(0);
        r
    }

    fn record(&mut self, b: Block, accepted: bool) {
        if self.iteration >= self.cfg.burn_in {
            let c = self.tally.entry(b).or_default();
            c.proposed += 1;
            c.accepted += accepted as u64;
        }
    }

    fn adapting(&self) -> bool {
        self.cfg.adapt && self.iteration < self.cfg.burn_in
    }

    /// Robbins-Monro step on a log proposal scale.
    fn adapt(scale: &mut f64, t: u64, accepted: bool, target: f64) {
        let gain = ((t + 1) as f64).powf(-0.6);
        let a = if accepted { 1.0 } else { 0.0 };
        *scale = (*scale * (gain * (a - target)).exp()).clamp(1e-6, 1e3);
    }

    /// Metropolis test for a proposal already written into `self.state`.
    ///
    /// Recomputes the terms of `records` (refreshing binomial coefficients
    /// when `new_coef` is set), adds `log_extra` (prior and proposal terms)
    /// and commits the cache on acceptance. The caller restores the state
    /// on rejection.
    fn try_move(&mut self, records: &[usize], new_coef: bool, log_extra: f64, u: f64) -> bool {
        self.scratch.clear();
        let mut diff = 0.0;
        for &r in records {
            let inn = &self.ds.innings()[r];
            let coef = if new_coef {
                coef_for(inn, self.state.eta[inn.player])
            } else {
                self.cache.log_coef[r]
            };
            let (l, ll) = record_terms(&self.state, inn, coef);
            diff += ll - self.cache.ll[r];
            self.scratch.push((l, coef, ll));
        }
        let log_alpha = diff + log_extra;
        let accept = u.ln() < log_alpha;
        if accept {
            for (&r, &(l, c, ll)) in records.iter().zip(&self.scratch) {
                self.cache.log_lambda[r] = l;
                self.cache.log_coef[r] = c;
                self.cache.ll[r] = ll;
            }
        }
        accept
    }
}
