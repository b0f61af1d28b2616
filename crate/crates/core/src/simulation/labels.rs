use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::sampling::{Scheme, SchemeSpec};

/// Sampling designs compared in the studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SchemeLabel {
    #[serde(rename = "SRS", alias = "srs")]
    Srs,
    /// Ranked set sampling with the first observer.
    #[serde(rename = "RSS", alias = "rss")]
    Rss,
    /// Ranked set sampling combining all observers.
    #[serde(rename = "MRS", alias = "mrs")]
    Mrs,
    /// Median ranked set sampling with the first observer.
    #[serde(rename = "MMRS", alias = "mmrs")]
    Mmrs,
    /// Median ranked set sampling combining all observers.
    #[serde(rename = "MMRM", alias = "mmrm", alias = "MMR", alias = "mmr")]
    Mmrm,
}

impl SchemeLabel {
    pub const ALL: [SchemeLabel; 5] = [Self::Srs, Self::Rss, Self::Mrs, Self::Mmrs, Self::Mmrm];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Srs => "SRS",
            Self::Rss => "RSS",
            Self::Mrs => "MRS",
            Self::Mmrs => "MMRS",
            Self::Mmrm => "MMRM",
        }
    }

    pub fn spec(self, set_size: usize, cycles: usize, tie_c: f64, rhos: &[f64]) -> SchemeSpec {
        let (scheme, observer_correlations) = match self {
            Self::Srs => (Scheme::Srs, Vec::new()),
            Self::Rss => (Scheme::Rss, rhos.to_vec()),
            Self::Mrs => (Scheme::Mrs, rhos.to_vec()),
            Self::Mmrs => (Scheme::Mmr, rhos.iter().take(1).copied().collect()),
            Self::Mmrm => (Scheme::Mmr, rhos.to_vec()),
        };
        SchemeSpec {
            scheme,
            set_size,
            cycles,
            tie_c,
            observer_correlations,
        }
    }
}

impl fmt::Display for SchemeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SchemeLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.to_ascii_uppercase().as_str() {
            "SRS" => Ok(Self::Srs),
            "RSS" => Ok(Self::Rss),
            "MRS" => Ok(Self::Mrs),
            "MMRS" => Ok(Self::Mmrs),
            "MMRM" | "MMR" => Ok(Self::Mmrm),
            _ => Err(Error::Config(format!("unknown sampling scheme `{s}`"))),
        }
    }
}

/// Estimators reported by the studies. `Ridge` and `LiuType` denote the
/// logistic versions inside a logistic study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    #[serde(alias = "LS")]
    Ls,
    #[serde(alias = "R")]
    Ridge,
    #[serde(alias = "LT")]
    LiuType,
    /// One-parameter Liu `(S + I)⁻¹(S + dI) beta_LS`.
    #[serde(alias = "LT1")]
    LiuOne,
    #[serde(alias = "ME")]
    Mixed,
    #[serde(alias = "MLIU")]
    MixedLiu,
    #[serde(alias = "SRL")]
    Srl,
    #[serde(alias = "MR")]
    MixedRidge,
    #[serde(alias = "SRR")]
    Srr,
    /// Logistic maximum likelihood.
    #[serde(alias = "ML")]
    Ml,
}

impl Estimator {
    pub const LINEAR: [Estimator; 4] = [Self::Ls, Self::Ridge, Self::LiuType, Self::LiuOne];
    pub const RESTRICTED: [Estimator; 9] = [
        Self::Ls,
        Self::Ridge,
        Self::LiuType,
        Self::LiuOne,
        Self::Mixed,
        Self::MixedLiu,
        Self::Srl,
        Self::MixedRidge,
        Self::Srr,
    ];
    pub const LOGISTIC: [Estimator; 3] = [Self::Ml, Self::Ridge, Self::LiuType];

    pub fn label(self) -> &'static str {
        match self {
            Self::Ls => "LS",
            Self::Ridge => "R",
            Self::LiuType => "LT",
            Self::LiuOne => "LT1",
            Self::Mixed => "ME",
            Self::MixedLiu => "MLIU",
            Self::Srl => "SRL",
            Self::MixedRidge => "MR",
            Self::Srr => "SRR",
            Self::Ml => "ML",
        }
    }

    pub fn needs_restriction(self) -> bool {
        matches!(self, Self::Mixed | Self::MixedLiu | Self::Srl | Self::MixedRidge | Self::Srr)
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let all = Self::RESTRICTED.iter().chain([Self::Ml].iter());
        for &e in all {
            let kebab = serde_json::to_value(e).ok().and_then(|v| v.as_str().map(str::to_owned));
            if e.label().eq_ignore_ascii_case(s) || kebab.as_deref() == Some(s) {
                return Ok(e);
            }
        }
        Err(Error::Config(format!("unknown estimator `{s}`")))
    }
}
