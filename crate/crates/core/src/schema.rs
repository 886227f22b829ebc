//! Feature schema: the partition of a running-profile vector into
//! controllable / uncontrollable / physical blocks, per-feature box bounds,
//! and the pairing between measured quantities and the setpoints that drive
//! them.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Which block of the profile vector a feature belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Block {
    /// Operator-commanded values (setpoints, schedules).
    Controllable,
    /// Measured or observed values (zone temperatures, occupancies).
    Uncontrollable,
    /// Exogenous physical values (outdoor temperature, radiation).
    Physical,
}

impl Block {
    /// Prefix used in serialized feature names.
    pub fn prefix(self) -> &'static str {
        match self {
            Block::Controllable => "c",
            Block::Uncontrollable => "uc",
            Block::Physical => "phy",
        }
    }
}

/// Closed interval [lower, upper] with lower strictly below upper.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Bounds {
    pub lower: f64,
    pub upper: f64,
}

impl Bounds {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite()) {
            return Err(Error::NonFinite("bounds"));
        }
        if lower >= upper {
            return Err(Error::InvalidConfig(format!(
                "bounds lower {lower} must be strictly below upper {upper}"
            )));
        }
        Ok(Bounds { lower, upper })
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains_strictly(&self, x: f64) -> bool {
        x > self.lower && x < self.upper
    }
}

/// One feature declaration.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Feature {
    pub name: String,
    pub block: Block,
    pub bounds: Option<Bounds>,
    /// For uncontrollable features: index of the controllable feature whose
    /// command this quantity follows (temperature measurement → setpoint).
    pub pairing: Option<usize>,
}

/// Ordered feature declarations for a profile vector.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FeatureSchema {
    features: Vec<Feature>,
}

impl FeatureSchema {
    pub fn new(features: Vec<Feature>) -> Result<Self> {
        let schema = FeatureSchema { features };
        schema.validate()?;
        Ok(schema)
    }

    fn validate(&self) -> Result<()> {
        let n = self.features.len();
        let mut seen_pairs: Vec<usize> = Vec::new();
        for (i, f) in self.features.iter().enumerate() {
            if f.block == Block::Controllable && f.bounds.is_none() {
                return Err(Error::InvalidConfig(format!(
                    "controllable feature `{}` needs finite bounds",
                    f.name
                )));
            }
            if let Some(p) = f.pairing {
                if f.block != Block::Uncontrollable {
                    return Err(Error::InvalidConfig(format!(
                        "feature `{}`: only uncontrollable features may be paired",
                        f.name
                    )));
                }
                if p >= n || self.features[p].block != Block::Controllable {
                    return Err(Error::InvalidConfig(format!(
                        "feature `{}` pairs to index {p}, which is not a controllable feature",
                        f.name
                    )));
                }
                if seen_pairs.contains(&p) {
                    return Err(Error::InvalidConfig(format!(
                        "controllable feature index {p} is paired more than once (pairing must be injective)"
                    )));
                }
                seen_pairs.push(p);
            } else if i != 0 && f.name.is_empty() {
                return Err(Error::InvalidConfig("empty feature name".to_string()));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn feature(&self, i: usize) -> &Feature {
        &self.features[i]
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn block(&self, i: usize) -> Block {
        self.features[i].block
    }

    pub fn bounds(&self, i: usize) -> Option<Bounds> {
        self.features[i].bounds
    }

    pub fn pairing(&self, i: usize) -> Option<usize> {
        self.features[i].pairing
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn indices_of(&self, block: Block) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.block(i) == block).collect()
    }

    /// Replace the bounds of one feature.
    pub fn set_bounds(&mut self, i: usize, bounds: Option<Bounds>) -> Result<()> {
        if self.features[i].block == Block::Controllable && bounds.is_none() {
            return Err(Error::InvalidConfig(format!(
                "controllable feature `{}` needs finite bounds",
                self.features[i].name
            )));
        }
        self.features[i].bounds = bounds;
        Ok(())
    }

    /// Names with block prefixes (`c:`, `uc:`, `phy:`) as used in CSV headers.
    pub fn prefixed_names(&self) -> Vec<String> {
        self.features
            .iter()
            .map(|f| format!("{}:{}", f.block.prefix(), f.name))
            .collect()
    }

    /// Rebuild a schema from prefixed names, recovering blocks from the
    /// prefixes and pairing by the `temp_<k>` / `set_<k>` naming convention.
    /// Bounds are not representable in a header and come back as `None`;
    /// callers re-apply them from configuration (controllable features get a
    /// placeholder bound so the schema stays valid until then).
    pub fn from_prefixed_names(names: &[&str]) -> Result<Self> {
        let mut features = Vec::with_capacity(names.len());
        for raw in names {
            let (prefix, name) = raw.split_once(':').ok_or_else(|| {
                Error::SchemaMismatch(format!("feature name `{raw}` lacks a block prefix"))
            })?;
            let block = match prefix {
                "c" => Block::Controllable,
                "uc" => Block::Uncontrollable,
                "phy" => Block::Physical,
                other => {
                    return Err(Error::SchemaMismatch(format!(
                        "unknown block prefix `{other}` in `{raw}`"
                    )))
                }
            };
            let bounds = if block == Block::Controllable {
                Some(Bounds {
                    lower: 0.0,
                    upper: 1.0,
                })
            } else {
                None
            };
            features.push(Feature {
                name: name.to_string(),
                block,
                bounds,
                pairing: None,
            });
        }
        // Pair uc `temp_<k>` to c `set_<k>` where both exist.
        for i in 0..features.len() {
            if features[i].block != Block::Uncontrollable {
                continue;
            }
            if let Some(suffix) = features[i].name.strip_prefix("temp_") {
                let target = format!("set_{suffix}");
                if let Some(j) = features
                    .iter()
                    .position(|f| f.block == Block::Controllable && f.name == target)
                {
                    features[i].pairing = Some(j);
                }
            }
        }
        FeatureSchema::new(features)
    }
}
