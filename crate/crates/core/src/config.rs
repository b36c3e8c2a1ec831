//! Run configuration file (TOML). Every section is optional; unknown keys are
//! rejected.
//!
//! ```toml
//! out_dir = "runs/medium-pc"
//!
//! [data]
//! preset = "medium"
//! seed = 7
//!
//! [encoder]
//! layer_sizes = [32, 64, 32]
//!
//! [adam]
//! lr = 3.5e-4
//!
//! [train]
//! loss = "pc"
//! ladder = { lo = 0.4, hi = 0.6, delta = 0.05 }
//! epochs = 50
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{generate, read_dataset_dir, LabeledDataset, Preset, SynthConfig};
use crate::encoder::EncoderConfig;
use crate::error::{Error, Result};
use crate::numcore::Seed;
use crate::optim::AdamConfig;
use crate::train::TrainConfig;

pub const DEFAULT_HIDDEN: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub preset: Preset,
    pub seed: Seed,
    /// Full generator settings; replaces `preset` when present.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub synth: Option<SynthConfig>,
    /// Directory written by `generate`; replaces the generator when present.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            preset: Preset::Medium,
            seed: Seed(0),
            synth: None,
            dir: None,
        }
    }
}

impl DataConfig {
    pub fn synth_config(&self) -> SynthConfig {
        self.synth.clone().unwrap_or_else(|| self.preset.config(self.seed))
    }

    pub fn load(&self) -> Result<LabeledDataset> {
        match &self.dir {
            Some(dir) => read_dataset_dir(dir),
            None => generate(&self.synth_config()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EncoderSection {
    /// Defaults to `[D, 64, D]` for input dimension `D`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub layer_sizes: Option<Vec<usize>>,
    pub identity_mode: bool,
}

impl EncoderSection {
    pub fn resolve(&self, dim: usize) -> Result<EncoderConfig> {
        let cfg = if self.identity_mode {
            EncoderConfig {
                layer_sizes: self.layer_sizes.clone().unwrap_or_else(|| vec![dim, dim]),
                identity_mode: true,
            }
        } else {
            EncoderConfig::mlp(self.layer_sizes.clone().unwrap_or_else(|| vec![dim, DEFAULT_HIDDEN, dim]))
        };
        cfg.validate()?;
        if cfg.d_in() != dim {
            return Err(Error::config(format!("encoder input size {} does not match data dimension {dim}", cfg.d_in())));
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    pub data: DataConfig,
    pub encoder: EncoderSection,
    pub adam: AdamConfig,
    pub train: TrainConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::config(one_line(&e.to_string())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.adam.validate()?;
        self.train.validate()?;
        if let Some(s) = &self.data.synth {
            s.validate()?;
        }
        Ok(())
    }
}

fn one_line(msg: &str) -> String {
    msg.split('\n').map(str::trim).filter(|l| !l.is_empty()).collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::train::LossKind;

    #[test]
    fn defaults_follow_the_reference_setup() {
        let cfg = RunConfig::from_toml("").unwrap();
        assert_eq!(cfg.train.tau, 0.05);
        assert_eq!(cfg.train.gamma, 0.2);
        assert_eq!(cfg.train.ladder.to_string(), "0.4:0.6:0.05");
        assert_eq!((cfg.train.p_identities, cfg.train.k_instances, cfg.train.epochs), (16, 4, 50));
        assert_eq!(cfg.adam.weight_decay, 5e-4);
        assert_eq!(cfg.encoder.resolve(32).unwrap().layer_sizes, vec![32, 64, 32]);
    }

    #[test]
    fn parses_sections_and_rejects_unknown_keys() {
        let text = r#"
            out_dir = "x"
            [data]
            preset = "easy"
            seed = 3
            [encoder]
            layer_sizes = [32, 16, 8]
            [train]
            loss = "hcl"
            d = 0.3
            ladder = { lo = 0.1, hi = 0.2, delta = 0.05 }
        "#;
        let cfg = RunConfig::from_toml(text).unwrap();
        assert_eq!(cfg.data.preset, Preset::Easy);
        assert_eq!(cfg.data.seed, Seed(3));
        assert_eq!(cfg.train.loss, LossKind::Hcl);
        assert_eq!(cfg.train.ladder.t(), 3);
        assert_eq!(cfg.encoder.resolve(32).unwrap().d_out(), 8);
        assert!(cfg.encoder.resolve(16).is_err());
        let round = RunConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(round, cfg);

        for bad in ["colour = 1", "[train]\nlr = 1.0", "[data]\npreset = \"extreme\"", "[train]\ngamma = 2.0"] {
            let err = RunConfig::from_toml(bad).unwrap_err();
            assert!(!err.to_string().contains('\n'), "{err}");
            assert!(matches!(err, Error::ConfigInvalid(_) | Error::GammaOutOfRange(_)), "{bad}: {err}");
        }
    }
}
