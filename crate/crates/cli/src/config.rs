// SPDX-License-Identifier: Apache-2.0

//! Workspace parameters, read from `config.toml`.

use std::path::Path;

use anyhow::{bail, Context, Result};
use encsearch::aph::{AphConfig, Scramble};
use encsearch::ontology::OntologyConfig;
use encsearch::parsearch::Strategy;
use encsearch::siis::SiisConfig;
use encsearch::sknn::SknnParams;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    #[serde(rename = "Inv_max")]
    pub inv_max: u32,
    #[serde(rename = "NC")]
    pub nc: usize,
    #[serde(rename = "K")]
    pub k: u32,
    #[serde(rename = "X")]
    pub x: usize,
    pub x_concepts: usize,
    pub y_concepts: usize,
    #[serde(rename = "V")]
    pub v: u32,
    pub block_size: usize,
    pub scramble_x: u32,
    /// 0 turns scrambling off.
    pub scramble_y: u32,
    pub workers: usize,
    pub partitions: usize,
    /// `shared` or `partitioned`.
    pub strategy: String,
    pub seed: u64,
    pub he_prime_bits: u64,
    pub sknn_u: usize,
    pub epsilon_max: f64,
    pub alpha_density: f64,
    pub min_page_terms: usize,
    pub max_concepts_per_term: usize,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            inv_max: 100,
            nc: 20,
            k: 10,
            x: 20,
            x_concepts: 10,
            y_concepts: 15,
            v: 3,
            block_size: 256,
            scramble_x: 1,
            scramble_y: 3,
            workers: 1,
            partitions: 1,
            strategy: "shared".into(),
            seed: 1,
            he_prime_bits: 512,
            sknn_u: 4,
            epsilon_max: 0.0,
            alpha_density: 0.5,
            min_page_terms: 100,
            max_concepts_per_term: 5000,
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: Config = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.siis().validate()?;
        self.aph().validate()?;
        self.sknn_params().validate()?;
        self.strategy()?;
        if self.x_concepts == 0 || self.x_concepts > self.y_concepts {
            bail!("x_concepts must lie in [1, y_concepts]");
        }
        if self.workers == 0 {
            bail!("workers must be at least 1");
        }
        if self.he_prime_bits < 8 {
            bail!("he_prime_bits must be at least 8");
        }
        Ok(())
    }

    pub fn siis(&self) -> SiisConfig {
        SiisConfig {
            inv_max: self.inv_max,
            nc: self.nc,
            k_security: self.k,
            x_concepts: self.x,
            dummies_enabled: true,
        }
    }

    pub fn scramble(&self) -> Option<Scramble> {
        (self.scramble_y > 0).then_some(Scramble { x: self.scramble_x, y: self.scramble_y })
    }

    pub fn aph(&self) -> AphConfig {
        AphConfig { block_size: self.block_size, versions: self.v, scramble: self.scramble() }
    }

    pub fn sknn_params(&self) -> SknnParams {
        SknnParams { epsilon_max: self.epsilon_max, alpha_density: self.alpha_density, ..SknnParams::default() }
    }

    pub fn ontology(&self) -> OntologyConfig {
        OntologyConfig {
            min_page_terms: self.min_page_terms,
            max_concepts_per_term: self.max_concepts_per_term,
        }
    }

    pub fn strategy(&self) -> Result<Strategy> {
        parse_strategy(&self.strategy, self.partitions)
    }
}

pub fn parse_strategy(name: &str, partitions: usize) -> Result<Strategy> {
    match name {
        "shared" => Ok(Strategy::Shared),
        "partitioned" if partitions >= 1 => Ok(Strategy::Partitioned(partitions)),
        "partitioned" => bail!("partitions must be at least 1"),
        other => bail!("unknown strategy {other:?} (expected shared or partitioned)"),
    }
}
