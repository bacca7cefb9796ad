//! Risk functions under test and their grid ground truth.

mod cutin;
mod gaussian;
mod grid;

pub use cutin::{CutInObjective, CutInOutcome, CutInSpec};
pub use gaussian::{GaussianObjective, GaussianSpec};
pub use grid::{grid_oracle, GridIndexer, GroundTruth, DEFAULT_GRID_CAP};

use crate::error::Result;
use crate::space::{HazardBox, SearchSpace};

/// A black-box risk function over a bounded parameter space.
///
/// Implementations must be pure: the same point always yields the same value.
pub trait Objective {
    fn name(&self) -> &str;

    fn space(&self) -> &SearchSpace;

    /// Raw risk at `p`. Values outside the space's metric bounds are clamped
    /// by the caller.
    fn evaluate(&self, p: &[f64]) -> Result<f64>;

    /// Hazardous boxes known in closed form, if any.
    fn analytic_hazard_boxes(&self) -> Option<Vec<HazardBox>> {
        None
    }

    /// Whether the behavior classifier (and its losses) drive the search.
    /// Synthetic functions run with the risk surrogate only.
    fn uses_behavior_model(&self) -> bool {
        false
    }
}

impl<T: Objective + ?Sized> Objective for Box<T> {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn space(&self) -> &SearchSpace {
        (**self).space()
    }
    fn evaluate(&self, p: &[f64]) -> Result<f64> {
        (**self).evaluate(p)
    }
    fn analytic_hazard_boxes(&self) -> Option<Vec<HazardBox>> {
        (**self).analytic_hazard_boxes()
    }
    fn uses_behavior_model(&self) -> bool {
        (**self).uses_behavior_model()
    }
}

/// Adapts a closure into an [`Objective`].
pub struct FnObjective<F> {
    name: String,
    space: SearchSpace,
    behavior_model: bool,
    f: F,
}

impl<F> FnObjective<F>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    pub fn new(name: impl Into<String>, space: SearchSpace, f: F) -> Self {
        Self {
            name: name.into(),
            space,
            behavior_model: false,
            f,
        }
    }

    pub fn with_behavior_model(mut self, enabled: bool) -> Self {
        self.behavior_model = enabled;
        self
    }
}

impl<F> Objective for FnObjective<F>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    fn name(&self) -> &str {
        &self.name
    }
    fn space(&self) -> &SearchSpace {
        &self.space
    }
    fn evaluate(&self, p: &[f64]) -> Result<f64> {
        (self.f)(p)
    }
    fn uses_behavior_model(&self) -> bool {
        self.behavior_model
    }
}
