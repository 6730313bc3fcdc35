//! Year-effect block: Gaussian independence proposal at the mode of a
//! simplified full conditional, accepted against the exact one.
//!
//! The simplified negative log conditional keeps the random-walk prior and
//! the completed non-duck innings only:
//!
//! `g(d) = d'Qd / (2 s2) - sum [x ln lambda - (eta + x) ln(eta + lambda)]`
//!
//! with gradient `s2^-1 Qd - sum eta (x - lambda) / (eta + lambda)` and
//! Hessian `s2^-1 Q + diag(sum eta lambda (eta + x) / (eta + lambda)^2)`,
//! which is positive definite everywhere.

use rand::Rng;
use rand_distr::StandardNormal;

use super::{Block, Sampler};
use crate::error::{ModelError, SamplerError};
use crate::gmrf::{build_q, TridiagPrecision};
use crate::ingest::{Dataset, Outcome};
use crate::model::{log_rate, ParamState};

/// Completed non-duck innings in free years, with the log rate net of
/// the year effect.
struct Term {
    year: usize,
    x: f64,
    eta: f64,
    base: f64,
}

struct Problem {
    q: TridiagPrecision,
    inv_s2: f64,
    terms: Vec<Term>,
}

impl Problem {
    fn new(
        state: &ParamState,
        ds: &Dataset,
        records: impl Iterator<Item = usize>,
        log_lambda: impl Fn(usize) -> f64,
    ) -> Self {
        let n = state.delta.len();
        let terms = records
            .filter_map(|r| {
                let inn = &ds.innings()[r];
                match inn.outcome {
                    Outcome::Completed(x) if inn.year < n => Some(Term {
                        year: inn.year,
                        x: x as f64,
                        eta: state.eta[inn.player],
                        base: log_lambda(r) - state.delta[inn.year],
                    }),
                    _ => None,
                }
            })
            .collect();
        Problem {
            q: build_q(n).expect("caller checks n > 0"),
            inv_s2: 1.0 / state.sigma2_delta,
            terms,
        }
    }

    fn value(&self, d: &[f64]) -> f64 {
        let mut g = 0.5 * self.inv_s2 * self.q.quad_form(d).expect("dimension fixed");
        for t in &self.terms {
            let ll = t.base + d[t.year];
            let lam = ll.exp();
            g -= t.x * ll - (t.eta + t.x) * (t.eta + lam).ln();
        }
        g
    }

    fn grad_hess(&self, d: &[f64]) -> (Vec<f64>, TridiagPrecision) {
        let mut grad = self.q.matvec(d).expect("dimension fixed");
        for v in &mut grad {
            *v *= self.inv_s2;
        }
        let mut c = vec![0.0; d.len()];
        for t in &self.terms {
            let lam = (t.base + d[t.year]).exp();
            let den = t.eta + lam;
            grad[t.year] -= t.eta * (t.x - lam) / den;
            c[t.year] += t.eta * lam * (t.eta + t.x) / (den * den);
        }
        let mut h = self.q.scaled(self.inv_s2);
        h.add_diag(&c).expect("dimension fixed");
        (grad, h)
    }

    /// Damped Newton from `start`. `None` if the iteration fails to
    /// converge or a factorization breaks down.
    fn mode(&self, start: &[f64], max_iter: u32, tol: f64) -> Option<Vec<f64>> {
        let mut x = start.to_vec();
        let mut gx = self.value(&x);
        for _ in 0..max_iter {
            let (grad, h) = self.grad_hess(&x);
            let step = h.cholesky().ok()?.solve(&grad).ok()?;
            let mut scale = 1.0;
            let (next, gn) = loop {
                let cand: Vec<f64> = x.iter().zip(&step).map(|(a, s)| a - scale * s).collect();
                let gc = self.value(&cand);
                if gc <= gx + 1e-12 * gx.abs() || scale < 1e-10 {
                    break (cand, gc);
                }
                scale *= 0.5;
            };
            if !gn.is_finite() {
                return None;
            }
            let moved = step.iter().fold(0.0f64, |m, s| m.max((scale * s).abs()));
            x = next;
            gx = gn;
            if moved < tol {
                return Some(x);
            }
        }
        None
    }
}

fn check_at(state: &ParamState, at: &[f64]) -> Result<(), SamplerError> {
    if at.len() != state.delta.len() {
        return Err(SamplerError::Model(ModelError::Domain(format!(
            "year-effect vector has length {}, expected {}",
            at.len(),
            state.delta.len()
        ))));
    }
    Ok(())
}

fn problem_at(state: &ParamState, ds: &Dataset) -> Problem {
    Problem::new(state, ds, 0..ds.len(), |r| log_rate(state, &ds.innings()[r]))
}

/// Simplified negative log full conditional of the year effects at `at`,
/// up to an additive constant. Ducks and not-outs are left out.
pub fn delta_neg_log_fcd(state: &ParamState, ds: &Dataset, at: &[f64]) -> Result<f64, SamplerError> {
    check_at(state, at)?;
    if at.is_empty() {
        return Ok(0.0);
    }
    Ok(problem_at(state, ds).value(at))
}

/// Gradient and Hessian of [`delta_neg_log_fcd`] at `at`.
pub fn delta_grad_hess(
    state: &ParamState,
    ds: &Dataset,
    at: &[f64],
) -> Result<(Vec<f64>, TridiagPrecision), SamplerError> {
    check_at(state, at)?;
    if at.is_empty() {
        let empty = TridiagPrecision {
            diag: Vec::new(),
            offdiag: Vec::new(),
        };
        return Ok((Vec::new(), empty));
    }
    Ok(problem_at(state, ds).grad_hess(at))
}

impl Sampler<'_> {
    pub(super) fn update_delta_block(&mut self, t: u64) {
        if self.state.delta.is_empty() {
            return;
        }
        let mut rng = self.rng(t, Block::Delta, 0);
        let index = self.index.clone();
        let cache = &self.cache;
        let problem = Problem::new(&self.state, self.ds, index.free_years.iter().copied(), |r| {
            cache.log_lambda[r]
        });
        let proposal = problem
            .mode(&self.state.delta, self.cfg.newton_max_iter, self.cfg.newton_tol)
            .and_then(|mode| {
                let (_, h) = problem.grad_hess(&mode);
                h.cholesky().ok().map(|l| (mode, l))
            });
        let Some((mode, chol)) = proposal else {
            log::warn!("iteration {t}: year-effect Newton step failed, using random walk");
            self.delta_fallbacks += 1;
            self.delta_random_walk(t, &mut rng);
            return;
        };
        let current = self.state.delta.clone();
        let cand = chol.sample(&mode, &mut rng).expect("dimension fixed");
        let u: f64 = rng.random();
        let q = self.q.as_ref().expect("non-empty");
        let inv_s2 = 1.0 / self.state.sigma2_delta;
        let prior = -0.5
            * inv_s2
            * (q.quad_form(&cand).expect("dimension fixed") - q.quad_form(&current).expect("dimension fixed"));
        let log_q_cur = chol.mvn_log_density(&mode, &current).expect("dimension fixed");
        let log_q_cand = chol.mvn_log_density(&mode, &cand).expect("dimension fixed");
        self.state.delta = cand;
        let acc = self.try_move(&index.free_years, false, prior + log_q_cur - log_q_cand, u);
        if !acc {
            self.state.delta = current;
        }
        self.record(Block::Delta, acc);
    }

    /// Componentwise random-walk sweep, used when no Gaussian proposal is
    /// available.
    fn delta_random_walk<R: Rng>(&mut self, t: u64, rng: &mut R) {
        let index = self.index.clone();
        let inv_s2 = 1.0 / self.state.sigma2_delta;
        for l in 0..self.state.delta.len() {
            let z: f64 = rng.sample(StandardNormal);
            let u: f64 = rng.random();
            let q = self.q.as_ref().expect("non-empty");
            let before = q.quad_form(&self.state.delta).expect("dimension fixed");
            let old = self.state.delta[l];
            self.state.delta[l] = old + self.scales.delta[l] * z;
            let after = q.quad_form(&self.state.delta).expect("dimension fixed");
            let prior = -0.5 * inv_s2 * (after - before);
            let acc = self.try_move(&index.by_year[l], false, prior, u);
            if !acc {
                self.state.delta[l] = old;
            }
            self.record(Block::Delta, acc);
            if self.adapting() {
                Self::adapt(&mut self.scales.delta[l], t, acc, 0.44);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{DatasetOptions, InningsRecord, Venue};
    use crate::model::PriorConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy(seed: u64, years: i32) -> (Dataset, ParamState) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut recs = Vec::new();
        for p in 0..4 {
            for _ in 0..40 {
                let year = 1990 + rng.random_range(0..years);
                recs.push(InningsRecord {
                    player_id: format!("p{p}"),
                    date: None,
                    calendar_year: year,
                    age: rng.random_range(20.0..38.0),
                    home: if rng.random::<bool>() { Venue::Home } else { Venue::Away },
                    match_innings: rng.random_range(1..=4),
                    opposition: ["X", "Y"][rng.random_range(0..2)].to_string(),
                    runs: rng.random_range(0..120),
                    not_out: rng.random::<f64>() < 0.1,
                });
            }
        }
        let opts = DatasetOptions {
            year_span: Some((1990, 1990 + years - 1)),
            ..DatasetOptions::default()
        };
        let ds = Dataset::from_records(recs, &opts).unwrap();
        let mut st = ParamState::initial(&ds, &PriorConfig::default());
        for d in &mut st.delta {
            *d = rng.random_range(-0.3..0.3);
        }
        for e in &mut st.eta {
            *e = rng.random_range(0.5..3.0);
        }
        st.sigma2_delta = rng.random_range(0.005..0.05);
        (ds, st)
    }

    #[test]
    fn gradient_and_hessian_match_finite_differences() {
        for seed in 0..5 {
            let (ds, st) = toy(seed, 10);
            let at = st.delta.clone();
            let (g, h) = delta_grad_hess(&st, &ds, &at).unwrap();
            let eps = 1e-5;
            for l in 0..at.len() {
                let mut up = at.clone();
                let mut dn = at.clone();
                up[l] += eps;
                dn[l] -= eps;
                let fd = (delta_neg_log_fcd(&st, &ds, &up).unwrap()
                    - delta_neg_log_fcd(&st, &ds, &dn).unwrap())
                    / (2.0 * eps);
                assert!((fd - g[l]).abs() <= 1e-5 * g[l].abs().max(1.0), "{fd} vs {}", g[l]);
                let (gu, _) = delta_grad_hess(&st, &ds, &up).unwrap();
                let (gd, _) = delta_grad_hess(&st, &ds, &dn).unwrap();
                let fd2 = (gu[l] - gd[l]) / (2.0 * eps);
                assert!((fd2 - h.diag[l]).abs() <= 1e-5 * h.diag[l].abs());
                if l + 1 < at.len() {
                    let off = (gu[l + 1] - gd[l + 1]) / (2.0 * eps);
                    assert!((off - h.offdiag[l]).abs() <= 1e-5 * h.offdiag[l].abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn prior_only_derivatives() {
        let ds = Dataset::prior_only(&["a"], (2000, 2009), &["X"]).unwrap();
        let mut st = ParamState::initial(&ds, &PriorConfig::default());
        st.sigma2_delta = 0.02;
        let at: Vec<f64> = (0..9).map(|i| (i as f64 * 0.37).sin() * 0.1).collect();
        let (g, h) = delta_grad_hess(&st, &ds, &at).unwrap();
        let q = build_q(9).unwrap();
        let qd = q.matvec(&at).unwrap();
        for l in 0..9 {
            assert!((g[l] - qd[l] / 0.02).abs() < 1e-12);
        }
        assert_eq!(h, q.scaled(1.0 / 0.02));
    }

    #[test]
    fn data_raise_hessian_diagonal() {
        let (ds, st) = toy(11, 10);
        let (_, h) = delta_grad_hess(&st, &ds, &st.delta).unwrap();
        let prior = build_q(9).unwrap().scaled(1.0 / st.sigma2_delta);
        let counts = (0..9).map(|l| {
            ds.innings()
                .iter()
                .filter(|i| i.year == l && matches!(i.outcome, Outcome::Completed(_)))
                .count()
        });
        for (l, n) in counts.enumerate() {
            if n > 0 {
                assert!(h.diag[l] > prior.diag[l]);
            }
        }
        assert_eq!(h.offdiag, prior.offdiag);
        h.cholesky().unwrap();
    }

    #[test]
    fn newton_reaches_zero_gradient() {
        let (ds, st) = toy(5, 12);
        let p = problem_at(&st, &ds);
        let mode = p.mode(&st.delta, 50, 1e-10).unwrap();
        let (g, _) = p.grad_hess(&mode);
        assert!(g.iter().all(|v| v.abs() < 1e-6), "{g:?}");
    }

    #[test]
    fn wrong_length_rejected() {
        let (ds, st) = toy(1, 10);
        assert!(delta_grad_hess(&st, &ds, &[0.0; 3]).is_err());
    }
}
