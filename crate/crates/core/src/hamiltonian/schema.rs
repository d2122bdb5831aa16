//! JSON problem documents: a Hamiltonian plus an optional bump.
//!
//! ```json
//! {
//!   "family": "quadratic_shifted",
//!   "pbar": [2.0],
//!   "potential": { "kind": "cosine", "params": { "amplitudes": [1.0] } },
//!   "bump": { "shape": "smooth", "amplitude": 1.0, "support_radius": 0.3 }
//! }
//! ```
//!
//! The full schema lives in `schema/problem.schema.json`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{BumpProfile, BumpShape, HamiltonianSpec, Interpolation, PotentialField};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemDoc {
    pub family: FamilyTag,
    pub pbar: Vec<f64>,
    #[serde(default)]
    pub potential: PotentialDoc,
    #[serde(default)]
    pub bump: Option<BumpDoc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyTag {
    QuadraticShifted,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialDoc {
    #[default]
    Zero,
    Cosine { params: CosineParams },
    Samples {
        n: usize,
        samples: Vec<f64>,
        #[serde(default)]
        interpolation: Interpolation,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CosineParams {
    pub amplitudes: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpDoc {
    pub shape: BumpShapeDoc,
    pub amplitude: f64,
    pub support_radius: f64,
    /// Radial samples, required when `shape` is `tabulated`.
    #[serde(default)]
    pub profile: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BumpShapeDoc {
    Tent,
    Smooth,
    Tabulated,
}

impl ProblemDoc {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("problem document: {e}")))
    }

    pub fn hamiltonian(&self) -> Result<HamiltonianSpec> {
        let dim = self.pbar.len();
        let potential = match &self.potential {
            PotentialDoc::Zero => PotentialField::zero(dim),
            PotentialDoc::Cosine { params } => PotentialField::cosine(params.amplitudes.clone())?,
            PotentialDoc::Samples { n, samples, interpolation } => {
                PotentialField::sampled(dim, *n, samples.clone(), *interpolation)?
            }
        };
        match self.family {
            FamilyTag::QuadraticShifted => HamiltonianSpec::quadratic(self.pbar.clone(), potential),
        }
        .map_err(|e| Error::Config(e.to_string()))
    }

    /// The bump, or the zero bump when none is given.
    pub fn bump(&self) -> Result<BumpProfile> {
        match &self.bump {
            None => Ok(BumpProfile::none()),
            Some(b) => b.build(),
        }
    }
}

impl BumpDoc {
    pub fn build(&self) -> Result<BumpProfile> {
        let shape = match (self.shape, &self.profile) {
            (BumpShapeDoc::Tent, _) => BumpShape::Tent,
            (BumpShapeDoc::Smooth, _) => BumpShape::Smooth,
            (BumpShapeDoc::Tabulated, Some(p)) => BumpShape::Tabulated(p.clone()),
            (BumpShapeDoc::Tabulated, None) => {
                return Err(Error::Config("tabulated bump requires a `profile` array".into()))
            }
        };
        BumpProfile::new(shape, self.amplitude, self.support_radius).map_err(|e| Error::Config(e.to_string()))
    }
}
