//! Chair rig model: lever-arm mapping from linear cues to chair rotations,
//! the safety envelope, and the virtual rod held between the two hands.
//!
//! Robot base frame: +x forward (longitudinal, toward the chair), +y left
//! (lateral), +z up. The chair pivots about a point `lever_arm_m` below the
//! rod midpoint; its swivel axis is vertical through that pivot.

use nalgebra::{Point3, Rotation3, Unit, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RigError {
    #[error("invalid rig geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid safety limits: {0}")]
    InvalidLimits(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RigGeometry {
    /// Distance from the chair pivot to the grip contact.
    pub lever_arm_m: f64,
    /// Half the distance between the two grasp points.
    pub grip_halfwidth_m: f64,
    /// Rod midpoint in the robot base frame.
    pub rod_midpoint: [f64; 3],
}

impl Default for RigGeometry {
    fn default() -> Self {
        Self {
            lever_arm_m: 0.5,
            grip_halfwidth_m: 0.25,
            rod_midpoint: [0.05, 0.0, -0.25],
        }
    }
}

impl RigGeometry {
    pub fn validate(&self) -> Result<(), RigError> {
        if !(self.lever_arm_m.is_finite() && self.lever_arm_m > 0.0) {
            return Err(RigError::InvalidGeometry("lever_arm_m must be > 0".into()));
        }
        if !(self.grip_halfwidth_m.is_finite() && self.grip_halfwidth_m > 0.0) {
            return Err(RigError::InvalidGeometry(
                "grip_halfwidth_m must be > 0".into(),
            ));
        }
        if self.rod_midpoint.iter().any(|v| !v.is_finite()) {
            return Err(RigError::InvalidGeometry(
                "rod_midpoint must be finite".into(),
            ));
        }
        Ok(())
    }

    pub fn midpoint(&self) -> Point3<f64> {
        Point3::from(self.rod_midpoint)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SafetyLimits {
    pub max_surge_m: f64,
    pub max_rot_rad: f64,
    /// Carried for downstream controllers; the pipeline cannot sense mass.
    pub max_user_mass_kg: f64,
}

impl Default for SafetyLimits {
    fn default() -> Self {
        Self {
            max_surge_m: 0.10,
            max_rot_rad: 20f64.to_radians(),
            max_user_mass_kg: 80.0,
        }
    }
}

impl SafetyLimits {
    pub fn validate(&self) -> Result<(), RigError> {
        for (name, v) in [
            ("max_surge_m", self.max_surge_m),
            ("max_rot_rad", self.max_rot_rad),
            ("max_user_mass_kg", self.max_user_mass_kg),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(RigError::InvalidLimits(format!(
                    "{name} must be > 0, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// How the longitudinal cue reaches the chair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LongitudinalRender {
    /// Chair pitch through the lever arm (filter-based synthesis).
    Pitch,
    /// Straight surge along the longitudinal axis (event-based synthesis).
    Surge,
}

/// Rig-space command. Positive pitch leans the chair back, positive yaw
/// turns it counter-clockwise seen from above, positive surge moves it forward.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ChairTarget {
    pub pitch_rad: f64,
    pub yaw_rad: f64,
    pub surge_m: f64,
    pub clamped: bool,
}

impl ChairTarget {
    pub fn within(&self, lim: &SafetyLimits) -> bool {
        self.pitch_rad.abs() <= lim.max_rot_rad
            && self.yaw_rad.abs() <= lim.max_rot_rad
            && self.surge_m.abs() <= lim.max_surge_m
    }
}

fn lever_angle(cue_m: f64, lever_m: f64) -> f64 {
    (cue_m / lever_m).clamp(-1.0, 1.0).asin()
}

/// Converts blended linear cues (meters at the lever) into an unclamped target.
pub fn cue_to_chair_target(
    pitch_cue_m: f64,
    yaw_cue_m: f64,
    geom: &RigGeometry,
    render: LongitudinalRender,
) -> ChairTarget {
    let (pitch_rad, surge_m) = match render {
        LongitudinalRender::Pitch => (lever_angle(pitch_cue_m, geom.lever_arm_m), 0.0),
        LongitudinalRender::Surge => (0.0, pitch_cue_m),
    };
    ChairTarget {
        pitch_rad,
        yaw_rad: lever_angle(yaw_cue_m, geom.lever_arm_m),
        surge_m,
        clamped: false,
    }
}

/// Clamps a target into the safety envelope, flagging any change.
pub fn clamp_target(t: ChairTarget, lim: &SafetyLimits) -> ChairTarget {
    let pitch_rad = t.pitch_rad.clamp(-lim.max_rot_rad, lim.max_rot_rad);
    let yaw_rad = t.yaw_rad.clamp(-lim.max_rot_rad, lim.max_rot_rad);
    let surge_m = t.surge_m.clamp(-lim.max_surge_m, lim.max_surge_m);
    let changed = pitch_rad != t.pitch_rad || yaw_rad != t.yaw_rad || surge_m != t.surge_m;
    ChairTarget {
        pitch_rad,
        yaw_rad,
        surge_m,
        clamped: t.clamped || changed,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RodPose {
    pub left_hand: Point3<f64>,
    pub right_hand: Point3<f64>,
}

impl RodPose {
    pub fn length(&self) -> f64 {
        (self.left_hand - self.right_hand).norm()
    }
}

/// Places the two hands for a (clamped) target.
///
/// Hands start at the midpoint +/- `grip_halfwidth_m` along y, are swung
/// about the vertical axis by yaw, then about the lateral axis through the
/// chair pivot by pitch, then translated along x by surge.
pub fn rod_pose_from_target(t: &ChairTarget, geom: &RigGeometry) -> RodPose {
    let mid = geom.midpoint();
    let pivot = mid - Vector3::z() * geom.lever_arm_m;
    let yaw = Rotation3::from_axis_angle(&Vector3::z_axis(), t.yaw_rad);
    // Rotating about -y makes positive pitch move the grip toward -x.
    let pitch = Rotation3::from_axis_angle(&Unit::new_unchecked(-Vector3::y()), t.pitch_rad);
    let surge = Vector3::x() * t.surge_m;
    let place = |side: f64| {
        let rel = mid + Vector3::y() * (side * geom.grip_halfwidth_m) - pivot;
        pivot + pitch * (yaw * rel) + surge
    };
    RodPose {
        left_hand: place(1.0),
        right_hand: place(-1.0),
    }
}
