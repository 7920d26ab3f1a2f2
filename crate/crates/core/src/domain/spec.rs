use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::{make_perturbed_ball, ModeTerm, StarDomain, DIM};
use crate::error::{Error, Result};
use crate::geometry::P3;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    #[default]
    PerturbedBall,
    ShiftedSphere,
    Ellipsoid,
}

/// Domain description as stored in JSON configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub dim: usize,
    #[serde(default)]
    pub shape: ShapeKind,
    #[serde(default = "one")]
    pub base_radius: f64,
    #[serde(default)]
    pub modes: Vec<ModeTerm>,
    #[serde(default)]
    pub amplitude: f64,
    #[serde(default)]
    pub normalize: bool,
    /// Center of a shifted sphere.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semi_axes: Option<[f64; 3]>,
}

fn one() -> f64 {
    1.0
}

impl DomainSpec {
    pub fn ball(radius: f64, normalize: bool) -> Self {
        Self::perturbed(radius, Vec::new(), 0.0, normalize)
    }

    pub fn perturbed(base_radius: f64, modes: Vec<ModeTerm>, amplitude: f64, normalize: bool) -> Self {
        DomainSpec {
            dim: DIM,
            shape: ShapeKind::PerturbedBall,
            base_radius,
            modes,
            amplitude,
            normalize,
            center: None,
            semi_axes: None,
        }
    }

    pub fn build(&self) -> Result<StarDomain> {
        if self.dim != DIM {
            return Err(Error::invalid(alloc::format!(
                "dim = {} is not supported; only n = 2 (ambient R^3) is implemented",
                self.dim
            )));
        }
        let d = match self.shape {
            ShapeKind::PerturbedBall => {
                make_perturbed_ball(self.base_radius, self.modes.clone(), self.amplitude)?
            }
            ShapeKind::ShiftedSphere => {
                let c = self
                    .center
                    .ok_or_else(|| Error::invalid("shifted_sphere needs a center"))?;
                StarDomain::shifted_sphere(P3::new(c), self.base_radius)?
            }
            ShapeKind::Ellipsoid => {
                let a = self
                    .semi_axes
                    .ok_or_else(|| Error::invalid("ellipsoid needs semi_axes"))?;
                StarDomain::ellipsoid(a)?
            }
        };
        Ok(if self.normalize {
            d.normalize_to_unit_boundary_measure()
        } else {
            d
        })
    }
}
