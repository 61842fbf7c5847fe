use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `horizon` waypoints of `action_dim` coordinates each.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TrajShape {
    pub horizon: usize,
    pub action_dim: usize,
}

impl TrajShape {
    pub fn new(horizon: usize, action_dim: usize) -> Self {
        Self { horizon, action_dim }
    }

    /// A single point in `dim` dimensions.
    pub fn point(dim: usize) -> Self {
        Self::new(1, dim)
    }

    pub fn len(&self) -> usize {
        self.horizon * self.action_dim
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// The object being denoised: a flat row-major vector of waypoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    values: Vec<f64>,
    shape: TrajShape,
}

impl Trajectory {
    pub fn new(values: Vec<f64>, shape: TrajShape) -> Result<Self> {
        if values.len() != shape.len() {
            return Err(Error::ShapeMismatch {
                context: "trajectory",
                expected: shape.len(),
                found: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "trajectory entry {i} is not finite"
            )));
        }
        Ok(Self { values, shape })
    }

    /// Skips the finiteness scan; callers check state themselves.
    pub(crate) fn from_raw(values: Vec<f64>, shape: TrajShape) -> Self {
        debug_assert_eq!(values.len(), shape.len());
        Self { values, shape }
    }

    pub fn point(values: Vec<f64>) -> Result<Self> {
        let shape = TrajShape::point(values.len());
        Self::new(values, shape)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn shape(&self) -> TrajShape {
        self.shape
    }

    pub fn horizon(&self) -> usize {
        self.shape.horizon
    }

    pub fn action_dim(&self) -> usize {
        self.shape.action_dim
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn waypoint(&self, k: usize) -> &[f64] {
        let d = self.shape.action_dim;
        &self.values[k * d..(k + 1) * d]
    }

    pub fn final_waypoint(&self) -> &[f64] {
        self.waypoint(self.shape.horizon - 1)
    }
}

/// Observation features of one modality.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    modality_id: String,
    features: Vec<f64>,
}

impl Condition {
    pub fn new(modality_id: impl Into<String>, features: Vec<f64>) -> Result<Self> {
        let modality_id = modality_id.into();
        if modality_id.is_empty() {
            return Err(Error::InvalidParameter("modality_id must be non-empty".into()));
        }
        if features.iter().any(|f| !f.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "condition features for modality {modality_id} are not finite"
            )));
        }
        Ok(Self {
            modality_id,
            features,
        })
    }

    pub fn modality_id(&self) -> &str {
        &self.modality_id
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }
}
