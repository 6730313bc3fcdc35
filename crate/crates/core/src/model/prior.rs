use serde::{Deserialize, Serialize};

/// Every prior constant of the model.
///
/// Variances are variances, not standard deviations; the log-normal
/// entries are the mean and variance of the log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    /// Mean of the normal prior on the ability mean `mu_theta`.
    pub m_mu: f64,
    /// Standard deviation of the normal prior on `mu_theta`.
    pub s_mu: f64,
    /// Inverse-gamma shape and scale for `sigma2_theta`.
    pub a_sigma: f64,
    pub b_sigma: f64,
    /// Inverse-gamma shape and scale for the year-effect smoothing variance.
    pub a_delta: f64,
    pub b_delta: f64,
    /// Prior sd shared by the away, innings, opposition and interaction effects.
    pub game_effect_sd: f64,
    pub alpha1_mean: f64,
    pub alpha1_var: f64,
    pub alpha2_logmean: f64,
    pub alpha2_logvar: f64,
    pub eta_logmean: f64,
    pub eta_logvar: f64,
    pub a_pi: f64,
    pub b_pi: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        PriorConfig {
            m_mu: 20f64.ln(),
            s_mu: 0.25,
            a_sigma: 3.0,
            b_sigma: 1.0,
            a_delta: 2.0,
            b_delta: 0.01,
            game_effect_sd: 0.5,
            alpha1_mean: 30.0,
            alpha1_var: 4.0,
            alpha2_logmean: -3.0,
            alpha2_logvar: 9.0,
            eta_logmean: 0.0,
            eta_logvar: 1.0,
            a_pi: 1.0,
            b_pi: 9.0,
        }
    }
}

impl PriorConfig {
    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("s_mu", self.s_mu),
            ("a_sigma", self.a_sigma),
            ("b_sigma", self.b_sigma),
            ("a_delta", self.a_delta),
            ("b_delta", self.b_delta),
            ("game_effect_sd", self.game_effect_sd),
            ("alpha1_var", self.alpha1_var),
            ("alpha2_logvar", self.alpha2_logvar),
            ("eta_logvar", self.eta_logvar),
            ("a_pi", self.a_pi),
            ("b_pi", self.b_pi),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("prior `{name}` must be positive and finite, got {v}"));
            }
        }
        for (name, v) in [
            ("m_mu", self.m_mu),
            ("alpha1_mean", self.alpha1_mean),
            ("alpha2_logmean", self.alpha2_logmean),
            ("eta_logmean", self.eta_logmean),
        ] {
            if !v.is_finite() {
                return Err(format!("prior `{name}` must be finite, got {v}"));
            }
        }
        Ok(())
    }

    /// Set one constant by name, as used by configuration files.
    pub fn set(&mut self, key: &str, value: f64) -> Result<(), String> {
        let mut next = self.clone();
        let slot = match key {
            "m_mu" => &mut next.m_mu,
            "s_mu" => &mut next.s_mu,
            "a_sigma" => &mut next.a_sigma,
            "b_sigma" => &mut next.b_sigma,
            "a_delta" => &mut next.a_delta,
            "b_delta" => &mut next.b_delta,
            "game_effect_sd" => &mut next.game_effect_sd,
            "alpha1_mean" => &mut next.alpha1_mean,
            "alpha1_var" => &mut next.alpha1_var,
            "alpha2_logmean" => &mut next.alpha2_logmean,
            "alpha2_logvar" => &mut next.alpha2_logvar,
            "eta_logmean" => &mut next.eta_logmean,
            "eta_logvar" => &mut next.eta_logvar,
            "a_pi" => &mut next.a_pi,
            "b_pi" => &mut next.b_pi,
            _ => return Err(format!("unknown prior constant `{key}`")),
        };
        *slot = value;
        next.validate()?;
        *self = next;
        Ok(())
    }

    /// Prior mean of `sigma2_theta`.
    pub fn sigma2_theta_mean(&self) -> f64 {
        self.b_sigma / (self.a_sigma - 1.0)
    }

    /// Prior mean of the year-effect smoothing variance.
    pub fn sigma2_delta_mean(&self) -> f64 {
        self.b_delta / (self.a_delta - 1.0)
    }
}
