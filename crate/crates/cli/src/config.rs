//! Flat `key = value` settings files. Blank lines and `#` comments are
//! ignored.

use std::path::Path;

use anyhow::{bail, Context, Result};
use cricrank::sampler::StepTarget;
use cricrank::{Block, ChainConfig, PriorConfig};

/// Ordered `(line, key, value)` entries.
pub fn read_pairs(path: &Path) -> Result<Vec<(usize, String, String)>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
    parse_pairs(&text).with_context(|| format!("in config {}", path.display()))
}

pub fn parse_pairs(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!("line {}: expected `key = value`, got `{raw}`", i + 1);
        };
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            bail!("line {}: empty key", i + 1);
        }
        if out.iter().any(|(_, seen, _): &(usize, String, String)| seen == k) {
            bail!("line {}: `{k}` set twice", i + 1);
        }
        out.push((i + 1, k.to_string(), v.to_string()));
    }
    Ok(out)
}

/// Everything `fit` needs besides paths.
#[derive(Clone, Debug, PartialEq)]
pub struct FitSettings {
    pub chain: ChainConfig,
    pub prior: PriorConfig,
    pub chains: usize,
    pub checkpoint_every: u64,
}

impl Default for FitSettings {
    fn default() -> Self {
        FitSettings {
            chain: ChainConfig::default(),
            prior: PriorConfig::default(),
            chains: 1,
            checkpoint_every: 0,
        }
    }
}

fn num<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| anyhow::anyhow!("line {line}: `{key}` expects a number, got `{v}`"))
}

impl FitSettings {
    /// Apply settings-file entries. `iters` counts iterations after burn-in.
    pub fn apply(&mut self, pairs: &[(usize, String, String)]) -> Result<()> {
        let mut iters = self.iters();
        for (line, key, v) in pairs {
            let line = *line;
            match key.as_str() {
                "iters" => iters = num(line, key, v)?,
                "burnin" => self.chain.burn_in = num(line, key, v)?,
                "thin" => self.chain.thin = num(line, key, v)?,
                "seed" => self.chain.seed = num(line, key, v)?,
                "chains" => self.chains = num(line, key, v)?,
                "checkpoint_every" => self.checkpoint_every = num(line, key, v)?,
                "newton_max_iter" => self.chain.newton_max_iter = num(line, key, v)?,
                "newton_tol" => self.chain.newton_tol = num(line, key, v)?,
                "adapt" => {
                    self.chain.adapt = v
                        .parse()
                        .map_err(|_| anyhow::anyhow!("line {line}: `adapt` expects true or false, got `{v}`"))?
                }
                "blocks" => {
                    self.chain.blocks = v
                        .split(',')
                        .map(|s| {
                            Block::from_name(s.trim())
                                .ok_or_else(|| anyhow::anyhow!("line {line}: unknown block `{}`", s.trim()))
                        })
                        .collect::<Result<_>>()?
                }
                k if k.starts_with("step.") => {
                    let name = &k["step.".len()..];
                    let t = StepTarget::from_name(name)
                        .ok_or_else(|| anyhow::anyhow!("line {line}: unknown step target `{name}`"))?;
                    self.chain.step_sizes.insert(t, num(line, key, v)?);
                }
                k => {
                    let value: f64 = num(line, key, v)?;
                    self.prior
                        .set(k, value)
                        .map_err(|e| anyhow::anyhow!("line {line}: {e}"))?;
                }
            }
        }
        self.set_iters(iters);
        Ok(())
    }

    /// Post-burn-in iterations; total iterations follow the burn-in.
    pub fn set_iters(&mut self, iters: u64) {
        self.chain.n_iter = self.chain.burn_in + iters;
    }

    pub fn iters(&self) -> u64 {
        self.chain.n_iter.saturating_sub(self.chain.burn_in)
    }

    pub fn validate(&self) -> Result<()> {
        if self.chains == 0 {
            bail!("chains must be at least 1");
        }
        if self.iters() == 0 {
            bail!("iters must be positive");
        }
        self.chain.validate()?;
        self.prior.validate().map_err(anyhow::Error::msg)?;
        Ok(())
    }
}
