//! Run configuration: JSON file, command-line overrides, validation and
//! hashing.

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use clap::ValueEnum;
use fieldmap_core::harmonize::{ImputerParams, FI_REG, SSI_REG};
use fieldmap_core::model::{Alignment, DEFAULT_C};
use fieldmap_core::montage::{template_17, Montage};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const BUILTIN_TEMPLATE: &str = "builtin-17";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Fi,
    Ssi,
    Dt,
    Comimp,
    Common,
    Calibration,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Fi,
        Method::Ssi,
        Method::Dt,
        Method::Comimp,
        Method::Common,
        Method::Calibration,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Fi => "fi",
            Method::Ssi => "ssi",
            Method::Dt => "dt",
            Method::Comimp => "comimp",
            Method::Common => "common",
            Method::Calibration => "calibration",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Align {
    Recenter,
    None,
}

impl From<Align> for Alignment {
    fn from(a: Align) -> Self {
        match a {
            Align::Recenter => Alignment::Recenter,
            Align::None => Alignment::None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub method: Method,
    pub align: Align,
    /// `builtin-17` or a JSON file holding a list of channel names.
    pub template: String,
    pub ssi_reg: f64,
    pub ssi_order: u32,
    pub fi_reg: f64,
    pub comimp: ImputerParams,
    pub c: f64,
    pub band: [f64; 2],
    pub filter_order: usize,
    pub resample: f64,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: None,
            method: Method::Fi,
            align: Align::Recenter,
            template: BUILTIN_TEMPLATE.into(),
            ssi_reg: SSI_REG,
            ssi_order: 4,
            fi_reg: FI_REG,
            comimp: ImputerParams::default(),
            c: DEFAULT_C,
            band: [8.0, 32.0],
            filter_order: 4,
            resample: 128.0,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        crate::io::read_json(path)
    }

    pub fn validate(&self) -> Result<()> {
        let [low, high] = self.band;
        if !(low > 0.0 && low < high) {
            bail!("band must satisfy 0 < low < high, got {low}-{high}");
        }
        if !(self.resample > 2.0 * high) {
            bail!("resample rate {} Hz is below twice the upper band edge", self.resample);
        }
        if self.filter_order == 0 {
            bail!("filter_order must be positive");
        }
        if !(self.c > 0.0) {
            bail!("c must be positive");
        }
        if !(self.fi_reg >= 0.0) || !(self.ssi_reg >= 0.0) {
            bail!("regularization must be non-negative");
        }
        if self.ssi_order < 2 {
            bail!("ssi_order must be at least 2");
        }
        let p = &self.comimp;
        if !(p.ridge >= 0.0) || !(p.tol > 0.0) {
            bail!("comimp ridge must be non-negative and tol positive");
        }
        if self.template != BUILTIN_TEMPLATE && !Path::new(&self.template).is_file() {
            bail!("template {} is neither {BUILTIN_TEMPLATE} nor an existing file", self.template);
        }
        if let Some(d) = &self.data {
            if !d.is_dir() {
                bail!("data directory {} does not exist", d.display());
            }
        }
        Ok(())
    }

    pub fn template_montage(&self) -> Result<Montage> {
        if self.template == BUILTIN_TEMPLATE {
            Ok(template_17())
        } else {
            crate::io::read_montage(Path::new(&self.template))
        }
    }

    /// SHA-256 over the settings that shape results. The data location is
    /// left out so relocated copies hash equal.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.data = None;
        let text = serde_json::to_string(&c).expect("config serializes");
        Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}
