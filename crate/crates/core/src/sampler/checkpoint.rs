//! Checkpoints and chain files.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{config_hash, Block, ChainConfig, ChainOutput, Count, Scales};
use crate::error::SamplerError;
use crate::ingest::Dataset;
use crate::model::{ParamState, PriorConfig};

pub(crate) const FORMAT: &str = "cricrank-checkpoint-1";

/// Where and how often to checkpoint.
#[derive(Clone, Debug)]
pub struct CheckpointPolicy {
    pub path: PathBuf,
    /// Iterations between checkpoints; 0 disables them.
    pub every: u64,
}

/// Everything needed to continue a chain exactly. The random stream is a
/// function of the seed and iteration counter, so no generator state is
/// stored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub(crate) format: String,
    pub(crate) config_hash: String,
    pub(crate) dataset_fingerprint: String,
    pub(crate) seed: u64,
    pub(crate) iteration: u64,
    pub(crate) state: ParamState,
    pub(crate) scales: Scales,
    pub(crate) tally: Vec<(Block, Count)>,
    pub(crate) draws: Vec<ParamState>,
    pub(crate) delta_fallbacks: u64,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SamplerError + '_ {
    move |source| SamplerError::Io {
        path: path.to_path_buf(),
        source,
    }
}

impl Checkpoint {
    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn state(&self) -> &ParamState {
        &self.state
    }

    /// Write atomically: a sibling temporary file is renamed over `path`.
    pub fn save(&self, path: &Path) -> Result<(), SamplerError> {
        let mut tmp = path.as_os_str().to_owned();
        tmp.push(".tmp");
        let tmp = PathBuf::from(tmp);
        {
            let f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
            let mut w = BufWriter::new(f);
            serde_json::to_writer(&mut w, self)?;
            w.flush().map_err(io_err(&tmp))?;
        }
        fs::rename(&tmp, path).map_err(io_err(path))
    }

    pub fn load(path: &Path) -> Result<Self, SamplerError> {
        let f = fs::File::open(path).map_err(io_err(path))?;
        let c: Checkpoint = serde_json::from_reader(BufReader::new(f))?;
        if c.format != FORMAT {
            return Err(SamplerError::CheckpointMismatch(format!("unknown format `{}`", c.format)));
        }
        Ok(c)
    }

    pub(crate) fn check(&self, cfg: &ChainConfig, prior: &PriorConfig, ds: &Dataset) -> Result<(), SamplerError> {
        let mismatch = |m: &str| Err(SamplerError::CheckpointMismatch(m.to_string()));
        if self.config_hash != config_hash(cfg, prior) {
            return mismatch("chain configuration or prior differs");
        }
        if self.seed != cfg.seed {
            return mismatch("seed differs");
        }
        if self.dataset_fingerprint != ds.fingerprint() {
            return mismatch("dataset differs");
        }
        if self.iteration > cfg.n_iter {
            return mismatch("checkpoint is past the end of the chain");
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct ChainHeader {
    format: String,
    n_draws: usize,
    acceptance_rates: std::collections::BTreeMap<Block, f64>,
    config: ChainConfig,
    prior: PriorConfig,
    dataset_fingerprint: String,
    config_hash: String,
    delta_fallbacks: u64,
}

const CHAIN_FORMAT: &str = "cricrank-chain-1";

impl ChainOutput {
    /// JSON lines: a header, then one draw per line.
    pub fn write_jsonl<W: Write>(&self, w: W) -> Result<(), SamplerError> {
        let mut w = BufWriter::new(w);
        let header = ChainHeader {
            format: CHAIN_FORMAT.to_string(),
            n_draws: self.draws.len(),
            acceptance_rates: self.acceptance_rates.clone(),
            config: self.config.clone(),
            prior: self.prior.clone(),
            dataset_fingerprint: self.dataset_fingerprint.clone(),
            config_hash: self.config_hash.clone(),
            delta_fallbacks: self.delta_fallbacks,
        };
        let nl = |w: &mut BufWriter<W>| w.write_all(b"\n").map_err(|e| SamplerError::Json(serde_json::Error::io(e)));
        serde_json::to_writer(&mut w, &header)?;
        nl(&mut w)?;
        for d in &self.draws {
            serde_json::to_writer(&mut w, d)?;
            nl(&mut w)?;
        }
        w.flush().map_err(|e| SamplerError::Json(serde_json::Error::io(e)))
    }

    pub fn read_jsonl<R: Read>(r: R) -> Result<Self, SamplerError> {
        let mut lines = BufReader::new(r).lines();
        let bad = |m: &str| SamplerError::CheckpointMismatch(m.to_string());
        let first = lines
            .next()
            .ok_or_else(|| bad("empty chain file"))?
            .map_err(|e| SamplerError::Json(serde_json::Error::io(e)))?;
        let header: ChainHeader = serde_json::from_str(&first)?;
        if header.format != CHAIN_FORMAT {
            return Err(bad("not a chain file"));
        }
        let mut draws = Vec::with_capacity(header.n_draws);
        for line in lines {
            let line = line.map_err(|e| SamplerError::Json(serde_json::Error::io(e)))?;
            if line.trim().is_empty() {
                continue;
            }
            draws.push(serde_json::from_str(&line)?);
        }
        if draws.len() != header.n_draws {
            return Err(bad("chain file is truncated"));
        }
        Ok(ChainOutput {
            draws,
            acceptance_rates: header.acceptance_rates,
            config: header.config,
            prior: header.prior,
            dataset_fingerprint: header.dataset_fingerprint,
            config_hash: header.config_hash,
            delta_fallbacks: header.delta_fallbacks,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), SamplerError> {
        let f = fs::File::create(path).map_err(io_err(path))?;
        self.write_jsonl(f)
    }

    pub fn load(path: &Path) -> Result<Self, SamplerError> {
        let f = fs::File::open(path).map_err(io_err(path))?;
        Self::read_jsonl(f)
    }
}
