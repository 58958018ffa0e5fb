//! Versioned, checksummed checkpoint files for resumable runs.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::Dataset;
use crate::engine::{EngineState, RunConfig, Sampler};
use crate::error::{EssError, Result};

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &str = "ESS-CHECKPOINT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub n: usize,
    pub p: usize,
    pub config: RunConfig,
    pub state: EngineState,
}

impl Checkpoint {
    pub fn capture(sampler: &Sampler<'_>, ds: &Dataset) -> Self {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            n: ds.n(),
            p: ds.p(),
            config: sampler.config().clone(),
            state: sampler.state(),
        }
    }

    /// Header line `ESS-CHECKPOINT <version> <sha256 of body>` followed by the JSON body.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let body = serde_json::to_vec(self).map_err(|e| EssError::Checkpoint(e.to_string()))?;
        let digest = hex(&Sha256::digest(&body));
        let mut out = format!("{MAGIC} {} {digest}\n", self.version).into_bytes();
        out.extend_from_slice(&body);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let nl = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| EssError::Checkpoint("missing checkpoint header".into()))?;
        let header = std::str::from_utf8(&bytes[..nl]).map_err(|_| EssError::Checkpoint("malformed header".into()))?;
        let parts: Vec<&str> = header.split(' ').collect();
        if parts.len() != 3 || parts[0] != MAGIC {
            return Err(EssError::Checkpoint("not a checkpoint file".into()));
        }
        let version: u32 = parts[1].parse().map_err(|_| EssError::Checkpoint("malformed version".into()))?;
        if version != CHECKPOINT_VERSION {
            return Err(EssError::Checkpoint(format!(
                "unsupported checkpoint version {version} (expected {CHECKPOINT_VERSION})"
            )));
        }
        let body = &bytes[nl + 1..];
        if hex(&Sha256::digest(body)) != parts[2] {
            return Err(EssError::Checkpoint("checksum mismatch (file truncated or corrupted)".into()));
        }
        let ck: Checkpoint = serde_json::from_slice(body).map_err(|e| EssError::Checkpoint(e.to_string()))?;
        if ck.version != version {
            return Err(EssError::Checkpoint("header and body versions disagree".into()));
        }
        Ok(ck)
    }

    /// Written to a temporary sibling then renamed, so a crash never leaves a partial file.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, self.to_bytes()?).map_err(|e| io_err(&tmp, e))?;
        fs::rename(&tmp, path).map_err(|e| io_err(path, e))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path).map_err(|e| io_err(path, e))?)
    }

    /// Rebuild a sampler; the dataset must have the checkpoint's shape.
    pub fn into_sampler(self, ds: &Dataset) -> Result<Sampler<'_>> {
        if ds.n() != self.n || ds.p() != self.p {
            return Err(EssError::Checkpoint(format!(
                "checkpoint was written for n={}, p={} but the data has n={}, p={}",
                self.n,
                self.p,
                ds.n(),
                ds.p()
            )));
        }
        Sampler::resume(self.config, ds, self.state)
    }
}

fn io_err(path: &Path, source: std::io::Error) -> EssError {
    EssError::Io { path: path.to_path_buf(), source }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::priors::{OmegaHyper, PriorFamily, PriorSpec, TauMode};

    fn setup() -> (Dataset, RunConfig) {
        let n = 20;
        let x: Vec<f64> = (0..n * 4).map(|i| ((i * 37 % 11) as f64).sin()).collect();
        let y: Vec<f64> = (0..n).map(|i| x[i] + 0.1 * (i as f64).cos()).collect();
        let ds = Dataset::from_columns(y, x, 4).unwrap().center();
        let spec = PriorSpec::new(PriorFamily::GPrior, TauMode::Fixed(20.0), OmegaHyper { a: 1.0, b: 1.0, binomial_limit: false });
        (ds, RunConfig::new(spec, 300, 100, 4))
    }

    #[test]
    fn roundtrip_and_integrity() {
        let (ds, cfg) = setup();
        let mut s = Sampler::new(cfg, &ds).unwrap();
        s.run_to(150).unwrap();
        let ck = Checkpoint::capture(&s, &ds);
        let bytes = ck.to_bytes().unwrap();
        assert_eq!(Checkpoint::from_bytes(&bytes).unwrap(), ck);

        let truncated = &bytes[..bytes.len() - 10];
        assert!(matches!(Checkpoint::from_bytes(truncated), Err(EssError::Checkpoint(_))));
        let mut flipped = bytes.clone();
        let last = flipped.len() - 2;
        flipped[last] ^= 1;
        assert!(Checkpoint::from_bytes(&flipped).is_err());
        let mut wrong_version = bytes.clone();
        let pos = MAGIC.len() + 1;
        wrong_version[pos] = b'9';
        let err = Checkpoint::from_bytes(&wrong_version).unwrap_err();
        assert!(err.to_string().contains("version"));
    }

    #[test]
    fn shape_mismatch_rejected() {
        let (ds, cfg) = setup();
        let s = Sampler::new(cfg, &ds).unwrap();
        let ck = Checkpoint::capture(&s, &ds);
        let other = Dataset::from_columns(ds.y().to_vec(), ds.columns()[..3 * ds.n()].to_vec(), 3).unwrap().center();
        assert!(ck.into_sampler(&other).is_err());
    }
}
