//! Kinematic cut-in scenario.
//!
//! The ego vehicle drives at a constant speed in its lane. A background
//! vehicle (BV1) starts `S1` metres ahead (bumper to bumper) in the adjacent
//! lane at constant speed `V1` and, at `t_start`, changes into the ego lane
//! along a quintic lateral profile lasting `T_lc`. Once BV1 intrudes into the
//! ego lane by more than `trigger_overlap` while ahead of the ego, the ego
//! brakes after `reaction_delay` until it matches BV1's speed.
//!
//! Risk is `max_t clamp(1 - clearance(t) / gap_ref, 0, 1)` where clearance is
//! the longitudinal bumper gap while BV1 occupies any part of the ego lane.
//! Overlapping vehicle footprints score exactly 1.
//!
//! This is a deterministic stand-in for a full traffic simulator and a
//! drivable-area risk metric; it reproduces the delayed-response mechanism,
//! not any simulator's numbers.

use serde::{Deserialize, Serialize};

use super::Objective;
use crate::error::{Error, Result};
use crate::space::SearchSpace;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CutInSpec {
    /// Ego speed, m/s.
    pub v0: f64,
    /// Lane-change start time, s.
    pub t_start: f64,
    pub s1_range: (f64, f64),
    pub v1_range: (f64, f64),
    pub t_lc_range: (f64, f64),
    pub reaction_delay: f64,
    pub max_decel: f64,
    pub lane_width: f64,
    pub vehicle_length: f64,
    pub vehicle_width: f64,
    /// Lateral intrusion into the ego lane that the ego reacts to, m.
    pub trigger_overlap: f64,
    pub gap_ref: f64,
    pub dt: f64,
    pub horizon: f64,
}

impl Default for CutInSpec {
    fn default() -> Self {
        Self {
            v0: 30.0,
            t_start: 3.0,
            s1_range: (30.0, 110.0),
            v1_range: (20.0, 30.0),
            t_lc_range: (2.0, 3.0),
            reaction_delay: 1.2,
            max_decel: 6.0,
            lane_width: 3.5,
            vehicle_length: 4.8,
            vehicle_width: 1.8,
            trigger_overlap: 0.3,
            gap_ref: 20.0,
            dt: 0.02,
            horizon: 12.0,
        }
    }
}

/// Summary of one simulated cut-in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutInOutcome {
    pub risk: f64,
    pub collision: bool,
    /// Smallest bumper gap observed while BV1 was in the ego lane
    /// (`f64::INFINITY` if it never entered).
    pub min_clearance: f64,
    /// Time the ego started braking, if it did.
    pub brake_start: Option<f64>,
}

impl CutInSpec {
    fn lateral_progress(tau: f64) -> f64 {
        let tau = tau.clamp(0.0, 1.0);
        tau * tau * tau * (10.0 - 15.0 * tau + 6.0 * tau * tau)
    }

    pub fn simulate(&self, s1: f64, v1: f64, t_lc: f64) -> CutInOutcome {
        let half_lane = 0.5 * self.lane_width;
        let half_width = 0.5 * self.vehicle_width;
        let len = self.vehicle_length;

        let mut x_ego = 0.0;
        let mut v_ego = self.v0;
        let mut x_bv = s1 + len;

        let mut trigger: Option<f64> = None;
        let mut min_clearance = f64::INFINITY;
        let mut risk: f64 = 0.0;

        let steps = (self.horizon / self.dt).round() as usize;
        for step in 0..=steps {
            let t = step as f64 * self.dt;
            let y_bv = self.lane_width * (1.0 - Self::lateral_progress((t - self.t_start) / t_lc));
            let dx = x_bv - x_ego;
            let intrusion = half_lane - (y_bv - half_width);

            if dx.abs() < len && y_bv < self.vehicle_width {
                return CutInOutcome {
                    risk: 1.0,
                    collision: true,
                    min_clearance: min_clearance.min(dx.abs() - len),
                    brake_start: trigger.map(|t| t + self.reaction_delay),
                };
            }
            if intrusion > 0.0 {
                let clearance = dx.abs() - len;
                min_clearance = min_clearance.min(clearance);
                risk = risk.max((1.0 - clearance / self.gap_ref).clamp(0.0, 1.0));
            }
            if trigger.is_none() && intrusion > self.trigger_overlap && dx > 0.0 {
                trigger = Some(t);
            }

            if let Some(t0) = trigger {
                if t >= t0 + self.reaction_delay && v_ego > v1 {
                    v_ego = (v_ego - self.max_decel * self.dt).max(v1).max(0.0);
                }
            }
            x_ego += v_ego * self.dt;
            x_bv += v1 * self.dt;
        }

        CutInOutcome {
            risk,
            collision: false,
            min_clearance,
            brake_start: trigger.map(|t| t + self.reaction_delay),
        }
    }

    pub fn space(&self) -> Result<SearchSpace> {
        SearchSpace::new(
            vec![self.s1_range.0, self.v1_range.0, self.t_lc_range.0],
            vec![self.s1_range.1, self.v1_range.1, self.t_lc_range.1],
            0.8,
            (0.0, 1.0),
        )
    }
}

/// The three-parameter cut-in logical scenario `(S1, V1, T_lc)`.
#[derive(Debug, Clone)]
pub struct CutInObjective {
    spec: CutInSpec,
    space: SearchSpace,
}

impl CutInObjective {
    pub fn new(spec: CutInSpec) -> Result<Self> {
        if !(spec.dt > 0.0 && spec.horizon > 0.0 && spec.gap_ref > 0.0) {
            return Err(Error::InvalidArgument(
                "cut-in dt, horizon and gap_ref must be positive".into(),
            ));
        }
        let space = spec.space()?;
        Ok(Self { spec, space })
    }

    pub fn spec(&self) -> &CutInSpec {
        &self.spec
    }
}

impl Objective for CutInObjective {
    fn name(&self) -> &str {
        "cutin-3d"
    }

    fn space(&self) -> &SearchSpace {
        &self.space
    }

    fn evaluate(&self, p: &[f64]) -> Result<f64> {
        Error::dims(3, p.len())?;
        Ok(self.spec.simulate(p[0], p[1], p[2]).risk)
    }

    fn uses_behavior_model(&self) -> bool {
        true
    }
}
