use std::fmt;

use serde::{Deserialize, Serialize};

use super::{PipelineSpec, TierTopology};
use crate::error::{PlanError, Result};

/// Share of one machine given to an operator. The grid is powers of two so
/// resource reductions can walk it one halving at a time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub enum Fraction {
    Eighth,
    Quarter,
    Half,
    Full,
}

impl Fraction {
    /// Grid from the largest share down.
    pub const GRID: [Fraction; 4] = [Fraction::Full, Fraction::Half, Fraction::Quarter, Fraction::Eighth];

    pub fn value(self) -> f64 {
        self.eighths() as f64 / 8.0
    }

    /// Share in units of 1/8 machine.
    pub fn eighths(self) -> u32 {
        match self {
            Fraction::Full => 8,
            Fraction::Half => 4,
            Fraction::Quarter => 2,
            Fraction::Eighth => 1,
        }
    }

    /// Next step down the grid, if any.
    pub fn halve(self) -> Option<Fraction> {
        match self {
            Fraction::Full => Some(Fraction::Half),
            Fraction::Half => Some(Fraction::Quarter),
            Fraction::Quarter => Some(Fraction::Eighth),
            Fraction::Eighth => None,
        }
    }

    pub fn from_value(v: f64) -> Result<Self> {
        Self::GRID
            .into_iter()
            .find(|f| f.value() == v)
            .ok_or(PlanError::OffGridFraction(v))
    }
}

impl TryFrom<f64> for Fraction {
    type Error = PlanError;

    fn try_from(v: f64) -> Result<Self> {
        Fraction::from_value(v)
    }
}

impl From<Fraction> for f64 {
    fn from(f: Fraction) -> f64 {
        f.value()
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Fraction::Full => write!(f, "1"),
            Fraction::Half => write!(f, "1/2"),
            Fraction::Quarter => write!(f, "1/4"),
            Fraction::Eighth => write!(f, "1/8"),
        }
    }
}

/// One concrete (configuration, placement, resources) choice for a pipeline.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PlanPoint {
    /// Knob option index per operator.
    pub configuration: Vec<usize>,
    /// Tier index per operator, non-decreasing along the operator order.
    pub placement: Vec<usize>,
    pub resources: Vec<Fraction>,
}

impl PlanPoint {
    /// Plan with every operator on a whole machine.
    pub fn over_provisioned(configuration: Vec<usize>, placement: Vec<usize>) -> Self {
        let n = configuration.len();
        Self {
            configuration,
            placement,
            resources: vec![Fraction::Full; n],
        }
    }

    pub fn with_resources(&self, resources: Vec<Fraction>) -> Self {
        Self {
            configuration: self.configuration.clone(),
            placement: self.placement.clone(),
            resources,
        }
    }

    pub fn is_monotone(&self) -> bool {
        self.placement.windows(2).all(|w| w[0] <= w[1])
    }

    pub fn validate(&self, pipeline: &PipelineSpec, topology: &TierTopology) -> Result<()> {
        let m = pipeline.len();
        if self.configuration.len() != m || self.placement.len() != m || self.resources.len() != m {
            return Err(PlanError::InvalidPlan(format!(
                "plan vectors must all have length {m}"
            )));
        }
        for (i, (&c, op)) in self.configuration.iter().zip(pipeline.operators()).enumerate() {
            if c >= op.option_count() {
                return Err(PlanError::InvalidPlan(format!(
                    "operator {i} option {c} out of range"
                )));
            }
        }
        if let Some(&p) = self.placement.iter().find(|&&p| p >= topology.len()) {
            return Err(PlanError::InvalidPlan(format!("tier {p} out of range")));
        }
        if !self.is_monotone() {
            return Err(PlanError::InvalidPlan(
                "placement moves back toward the device".into(),
            ));
        }
        Ok(())
    }

    /// Dollars per hour for the resources this plan occupies.
    pub fn hourly_cost(&self, topology: &TierTopology) -> f64 {
        self.placement
            .iter()
            .zip(&self.resources)
            .map(|(&t, f)| f.value() * topology.tier(t).machine_cost())
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fraction_grid() {
        assert_eq!(Fraction::from_value(0.25).unwrap(), Fraction::Quarter);
        assert!(Fraction::from_value(0.3).is_err());
        assert_eq!(Fraction::Full.halve(), Some(Fraction::Half));
        assert_eq!(Fraction::Eighth.halve(), None);
        assert!(Fraction::Eighth < Fraction::Full);
    }

    #[test]
    fn plan_json_uses_numeric_fractions() {
        let p = PlanPoint {
            configuration: vec![0, 2],
            placement: vec![0, 1],
            resources: vec![Fraction::Half, Fraction::Eighth],
        };
        let json = serde_json::to_string(&p).unwrap();
        assert!(json.contains("[0.5,0.125]"), "{json}");
        assert_eq!(serde_json::from_str::<PlanPoint>(&json).unwrap(), p);
        assert!(serde_json::from_str::<PlanPoint>(&json.replace("0.125", "0.3")).is_err());
    }

    #[test]
    fn monotonicity() {
        let p = PlanPoint::over_provisioned(vec![0, 0, 0], vec![0, 2, 1]);
        assert!(!p.is_monotone());
    }
}
