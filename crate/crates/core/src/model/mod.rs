//! Run-scoring model.
//!
//! The scoring rate of an innings is log-linear in player ability, a year
//! effect, a quadratic ageing curve and the game context (venue, match
//! innings, opposition, opposition-by-decade). Runs given the rate are
//! negative binomial (a gamma-mixed Poisson), a not-out contributes the
//! survival probability, and completed ducks carry an extra zero-inflation
//! mass `pi` per player.

mod params;
mod prior;

pub use params::ParamState;
pub use prior::PriorConfig;

use crate::error::ModelError;
use crate::ingest::{Dataset, Innings, Outcome};
use crate::special::{ln_beta_reg, ln_gamma, log_add_exp};

/// Quadratic ageing curve `-alpha2 (age - alpha1)^2`.
pub fn ageing(alpha1: f64, alpha2: f64, age: f64) -> f64 {
    let d = age - alpha1;
    -alpha2 * d * d
}

/// Log scoring rate of one innings.
///
/// Panics if the innings indices do not resolve against `state.dims`.
pub fn log_rate(state: &ParamState, inn: &Innings) -> f64 {
    let p = inn.player;
    state.theta[p] + ageing(state.alpha1[p], state.alpha2[p], inn.age) + state.context_effect(inn)
}

/// `ln(1 + e^z)` without overflow.
#[inline]
pub(crate) fn softplus(z: f64) -> f64 {
    if z > 35.0 {
        z
    } else if z < -35.0 {
        z.exp()
    } else {
        z.exp().ln_1p()
    }
}

/// Log of the generalized binomial coefficient `C(x + eta - 1, x)`.
#[inline]
pub fn log_binom_coef(x: u32, eta: f64) -> f64 {
    if x == 0 {
        return 0.0;
    }
    let x = x as f64;
    ln_gamma(x + eta) - ln_gamma(eta) - ln_gamma(x + 1.0)
}

/// Negative-binomial log pmf from `ln lambda`, given a precomputed
/// [`log_binom_coef`].
#[inline]
pub(crate) fn log_pmf_kernel(x: u32, eta: f64, log_lambda: f64, log_coef: f64) -> f64 {
    // beta = lambda / eta
    let log_beta = log_lambda - eta.ln();
    let log1p_beta = softplus(log_beta);
    let x = x as f64;
    let xb = if x == 0.0 { 0.0 } else { x * log_beta };
    log_coef + xb - (eta + x) * log1p_beta
}

/// `ln P(X >= x)` from `ln lambda`.
#[inline]
pub(crate) fn log_sf_kernel(x: u32, eta: f64, log_lambda: f64) -> f64 {
    if x == 0 {
        return 0.0;
    }
    // P(X >= x) = I_{1-p}(x, eta), p = eta / (eta + lambda) = 1 / (1 + beta)
    let log_beta = log_lambda - eta.ln();
    let ln_q = -softplus(-log_beta); // ln(1 - p)
    let ln_p = -softplus(log_beta);
    ln_beta_reg(x as f64, eta, ln_q.exp(), ln_p.exp())
}

/// `ln{pi + (1 - pi)(1 + beta)^(-eta)}`.
#[inline]
pub(crate) fn log_duck_kernel(pi: f64, eta: f64, log_lambda: f64) -> f64 {
    let log_zero = -eta * softplus(log_lambda - eta.ln());
    if pi <= 0.0 {
        log_zero
    } else if pi >= 1.0 {
        0.0
    } else {
        log_add_exp(pi.ln(), (-pi).ln_1p() + log_zero)
    }
}

/// Per-innings log-likelihood, censored zero-inflated negative binomial.
#[inline]
pub(crate) fn innings_ll_kernel(
    outcome: Outcome,
    eta: f64,
    pi: f64,
    log_lambda: f64,
    log_coef: f64,
) -> f64 {
    match outcome {
        Outcome::Duck => log_duck_kernel(pi, eta, log_lambda),
        Outcome::Completed(x) => (-pi).ln_1p() + log_pmf_kernel(x, eta, log_lambda, log_coef),
        Outcome::Censored(x) => (-pi).ln_1p() + log_sf_kernel(x, eta, log_lambda),
    }
}

fn check_nb(eta: f64, lambda: f64) -> Result<(), ModelError> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(ModelError::Domain(format!("eta must be positive, got {eta}")));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(ModelError::Domain(format!("lambda must be positive, got {lambda}")));
    }
    Ok(())
}

fn check_pi(pi: f64) -> Result<(), ModelError> {
    if (0.0..=1.0).contains(&pi) {
        Ok(())
    } else {
        Err(ModelError::Domain(format!("pi must lie in [0, 1], got {pi}")))
    }
}

/// Log pmf of `NB{eta, eta / (eta + lambda)}`: mean `lambda`, variance
/// `lambda (1 + lambda / eta)`.
pub fn nb_log_pmf(x: u32, eta: f64, lambda: f64) -> Result<f64, ModelError> {
    check_nb(eta, lambda)?;
    Ok(log_pmf_kernel(x, eta, lambda.ln(), log_binom_coef(x, eta)))
}

/// `ln P(X >= x)` for the same negative binomial, via the regularized
/// incomplete beta function.
pub fn nb_log_sf(x: u32, eta: f64, lambda: f64) -> Result<f64, ModelError> {
    check_nb(eta, lambda)?;
    Ok(log_sf_kernel(x, eta, lambda.ln()))
}

/// Probability of a completed duck: `pi + (1 - pi) / (1 + lambda/eta)^eta`.
pub fn duck_prob(pi: f64, eta: f64, lambda: f64) -> Result<f64, ModelError> {
    check_nb(eta, lambda)?;
    check_pi(pi)?;
    Ok(log_duck_kernel(pi, eta, lambda.ln()).exp())
}

/// Log-likelihood contribution of one innings.
///
/// A completed duck contributes the zero-inflated zero mass, a completed
/// score `ln(1 - pi) + ln pmf`, and a not-out `ln(1 - pi) + ln P(X >= x)`;
/// a not-out on zero therefore contributes `ln(1 - pi)`.
pub fn innings_log_lik(state: &ParamState, inn: &Innings) -> Result<f64, ModelError> {
    let p = inn.player;
    let (eta, pi) = (state.eta[p], state.pi[p]);
    let log_lambda = log_rate(state, inn);
    check_nb(eta, log_lambda.exp())?;
    check_pi(pi)?;
    let coef = match inn.outcome {
        Outcome::Completed(x) => log_binom_coef(x, eta),
        _ => 0.0,
    };
    Ok(innings_ll_kernel(inn.outcome, eta, pi, log_lambda, coef))
}

/// Sum of [`innings_log_lik`] over the dataset.
pub fn total_log_lik(state: &ParamState, ds: &Dataset) -> Result<f64, ModelError> {
    if state.dims != ds.dims() {
        return Err(ModelError::Domain(format!(
            "parameter dims {:?} do not match dataset {:?}",
            state.dims,
            ds.dims()
        )));
    }
    let mut total = 0.0;
    for inn in ds.innings() {
        total += innings_log_lik(state, inn)?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{Dims, Venue};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn ageing_values() {
        assert_eq!(ageing(30.0, 0.01, 30.0), 0.0);
        assert!(close(ageing(30.0, 0.01, 37.0), -0.49, 1e-15));
        for &a2 in &[0.001, 0.05, 2.0] {
            assert_eq!(ageing(28.0, a2, 35.0), ageing(28.0, a2, 21.0));
        }
    }

    #[test]
    fn geometric_special_cases() {
        // eta = 1, lambda = 1: geometric with beta = 1
        assert!(close(nb_log_pmf(0, 1.0, 1.0).unwrap(), 0.5f64.ln(), 1e-15));
        assert_eq!(nb_log_sf(0, 2.3, 7.0).unwrap(), 0.0);
        assert!(close(nb_log_sf(3, 1.0, 1.0).unwrap(), 3.0 * 0.5f64.ln(), 1e-13));
    }

    #[test]
    fn domain_errors() {
        assert!(nb_log_pmf(1, 0.0, 1.0).is_err());
        assert!(nb_log_pmf(1, 1.0, -1.0).is_err());
        assert!(nb_log_sf(1, -1.0, 1.0).is_err());
        assert!(duck_prob(1.5, 1.0, 1.0).is_err());
        assert!(duck_prob(0.1, 1.0, 0.0).is_err());
    }

    #[test]
    fn duck_prob_values() {
        let zero_mass = nb_log_pmf(0, 1.3, 8.0).unwrap().exp();
        assert!(close(duck_prob(0.0, 1.3, 8.0).unwrap(), zero_mass, 1e-15));
        assert!(close(duck_prob(1.0, 1.3, 8.0).unwrap(), 1.0, 1e-15));
        // independent arithmetic: 0.08 + 0.92 / 28
        let want = 0.08 + 0.92 / 28.0;
        assert!(close(duck_prob(0.08, 1.0, 27.0).unwrap(), want, 1e-15));
    }

    fn toy_state() -> (ParamState, Vec<Innings>) {
        let dims = Dims {
            players: 1,
            years: 3,
            decades: 1,
            oppositions: 2,
        };
        let mut s = ParamState::zeros(dims);
        s.theta[0] = 3.2;
        s.alpha1[0] = 29.0;
        s.alpha2[0] = 0.02;
        s.eta[0] = 0.9;
        s.pi[0] = 0.07;
        s.delta = vec![0.1, -0.05];
        s.zeta2 = -0.1;
        s.nu = [-0.05, -0.1, -0.17];
        s.xi = vec![0.2];
        let base = Innings {
            player: 0,
            year: 0,
            decade: 0,
            opposition: 0,
            home: Venue::Home,
            match_innings: 1,
            age: 29.0,
            outcome: Outcome::Duck,
        };
        let inns = vec![
            base,
            Innings {
                year: 1,
                home: Venue::Away,
                match_innings: 3,
                opposition: 1,
                age: 31.5,
                outcome: Outcome::Completed(42),
                ..base
            },
            Innings {
                year: 2,
                match_innings: 4,
                age: 33.0,
                outcome: Outcome::Censored(17),
                ..base
            },
        ];
        (s, inns)
    }

    #[test]
    fn log_rate_reduces_to_theta_in_reference_context() {
        let (mut s, inns) = toy_state();
        let inn = Innings {
            year: 2,
            age: s.alpha1[0],
            ..inns[0]
        };
        assert_eq!(log_rate(&s, &inn), s.theta[0]);
        // all non-ability parameters at zero
        s.delta.fill(0.0);
        s.zeta2 = 0.0;
        s.nu = [0.0; 3];
        s.xi.fill(0.0);
        s.alpha2[0] = 1e-300;
        for inn in &inns {
            assert_eq!(log_rate(&s, inn), s.theta[0]);
        }
    }

    #[test]
    fn log_rate_adds_effects() {
        let (s, inns) = toy_state();
        let want = 3.2 - 0.05 - 0.02 * 2.5f64.powi(2) - 0.1 - 0.1 + 0.2;
        assert!(close(log_rate(&s, &inns[1]), want, 1e-14));
    }

    #[test]
    fn three_innings_product_matches_hand_calculation() {
        let (s, inns) = toy_state();
        let (eta, pi) = (0.9f64, 0.07f64);
        let lam: Vec<f64> = inns.iter().map(|i| log_rate(&s, i).exp()).collect();

        // duck: pi + (1-pi)(1+beta)^-eta
        let l0 = pi + (1.0 - pi) * (1.0 + lam[0] / eta).powf(-eta);
        // completed 42 via the Gamma-function pmf
        let g = |x: f64| statrs_free_gamma(x);
        let beta1 = lam[1] / eta;
        let pmf42 = g(42.0 + eta) / (g(eta) * g(43.0)) * beta1.powi(42) / (1.0 + beta1).powf(eta + 42.0);
        let l1 = (1.0 - pi) * pmf42;
        // censored 17: 1 - sum_{k<17} pmf
        let beta2 = lam[2] / eta;
        let mut cdf = 0.0;
        for k in 0..17 {
            let kf = k as f64;
            cdf += g(kf + eta) / (g(eta) * g(kf + 1.0)) * beta2.powi(k) / (1.0 + beta2).powf(eta + kf);
        }
        let l2 = (1.0 - pi) * (1.0 - cdf);

        let total: f64 = inns.iter().map(|i| innings_log_lik(&s, i).unwrap()).sum();
        let want = (l0 * l1 * l2).ln();
        assert!(close(total, want, 1e-10), "{total} vs {want}");
    }

    /// Gamma function by a plain Stirling series with upward recurrence; an
    /// independent route from the Lanczos kernel used in the model.
    fn statrs_free_gamma(x: f64) -> f64 {
        let mut shift = 1.0;
        let mut z = x;
        while z < 60.0 {
            shift *= z;
            z += 1.0;
        }
        let series = 1.0 + 1.0 / (12.0 * z) + 1.0 / (288.0 * z * z)
            - 139.0 / (51840.0 * z.powi(3))
            - 571.0 / (2_488_320.0 * z.powi(4));
        (2.0 * std::f64::consts::PI / z).sqrt() * (z / std::f64::consts::E).powf(z) * series / shift
    }

    #[test]
    fn censored_zero_contributes_one_minus_pi() {
        let (s, inns) = toy_state();
        let inn = Innings {
            outcome: Outcome::Censored(0),
            ..inns[1]
        };
        assert!(close(innings_log_lik(&s, &inn).unwrap(), (1.0f64 - 0.07).ln(), 1e-15));
    }

    #[test]
    fn zero_inflation_off_reduces_to_censored_nb() {
        let (mut s, inns) = toy_state();
        s.pi[0] = 0.0;
        let lam = |i: &Innings| log_rate(&s, i).exp();
        assert!(close(
            innings_log_lik(&s, &inns[0]).unwrap(),
            nb_log_pmf(0, 0.9, lam(&inns[0])).unwrap(),
            1e-14
        ));
        assert!(close(
            innings_log_lik(&s, &inns[1]).unwrap(),
            nb_log_pmf(42, 0.9, lam(&inns[1])).unwrap(),
            1e-14
        ));
        assert!(close(
            innings_log_lik(&s, &inns[2]).unwrap(),
            nb_log_sf(17, 0.9, lam(&inns[2])).unwrap(),
            1e-14
        ));
    }
}
