//! Serial revolute-chain kinematics and damped-least-squares IK.
//!
//! Each joint rotates about its axis (expressed in the frame of the previous
//! link) and is followed by a fixed offset to the next joint. The hand is the
//! origin of the frame after the last offset. IK is position-only.

use nalgebra::{
    Isometry3, Matrix3, Matrix3xX, Point3, Translation3, Unit, UnitQuaternion, Vector3,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rig::RodPose;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("joint vector has {got} entries, chain has {expected} joints")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid chain: {0}")]
    InvalidChain(String),
    #[error("invalid IK parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Joint {
    pub axis: Unit<Vector3<f64>>,
    pub offset: Vector3<f64>,
    pub limit_lo: f64,
    pub limit_hi: f64,
}

/// File form of one joint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointSpec {
    pub axis: [f64; 3],
    pub offset: [f64; 3],
    pub limit_lo: f64,
    pub limit_hi: f64,
}

/// File form of a chain: shoulder placement plus ordered joint blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSpec {
    #[serde(default)]
    pub base_translation: [f64; 3],
    /// Roll, pitch, yaw of the shoulder frame in radians.
    #[serde(default)]
    pub base_rpy: [f64; 3],
    pub joints: Vec<JointSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArmChain {
    base: Isometry3<f64>,
    joints: Vec<Joint>,
}

impl ArmChain {
    pub fn new(base: Isometry3<f64>, joints: Vec<Joint>) -> Result<Self, KinematicsError> {
        if joints.len() < 2 {
            return Err(KinematicsError::InvalidChain(
                "need at least 2 joints".into(),
            ));
        }
        for (i, j) in joints.iter().enumerate() {
            if !(j.limit_lo < j.limit_hi) {
                return Err(KinematicsError::InvalidChain(format!(
                    "joint {i}: limit_lo must be < limit_hi"
                )));
            }
            if (j.axis.norm() - 1.0).abs() > 1e-9 || j.offset.iter().any(|v| !v.is_finite()) {
                return Err(KinematicsError::InvalidChain(format!(
                    "joint {i}: bad axis or offset"
                )));
            }
        }
        Ok(Self { base, joints })
    }

    pub fn from_spec(spec: &ChainSpec) -> Result<Self, KinematicsError> {
        let [r, p, y] = spec.base_rpy;
        let base = Isometry3::from_parts(
            Translation3::from(Vector3::from(spec.base_translation)),
            UnitQuaternion::from_euler_angles(r, p, y),
        );
        let joints = spec
            .joints
            .iter()
            .enumerate()
            .map(|(i, j)| {
                let axis = Vector3::from(j.axis);
                if !axis.iter().all(|v| v.is_finite()) || (axis.norm() - 1.0).abs() > 1e-9 {
                    return Err(KinematicsError::InvalidChain(format!(
                        "joint {i}: axis must be unit length, got norm {}",
                        axis.norm()
                    )));
                }
                Ok(Joint {
                    axis: Unit::new_unchecked(axis),
                    offset: Vector3::from(j.offset),
                    limit_lo: j.limit_lo,
                    limit_hi: j.limit_hi,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(base, joints)
    }

    pub fn to_spec(&self) -> ChainSpec {
        let (r, p, y) = self.base.rotation.euler_angles();
        ChainSpec {
            base_translation: self.base.translation.vector.into(),
            base_rpy: [r, p, y],
            joints: self
                .joints
                .iter()
                .map(|j| JointSpec {
                    axis: j.axis.into_inner().into(),
                    offset: j.offset.into(),
                    limit_lo: j.limit_lo,
                    limit_hi: j.limit_hi,
                })
                .collect(),
        }
    }

    /// Default 7-joint arm with 0.6 m reach; `side` is +1 for left, -1 for right.
    ///
    /// Shoulder pitch, shoulder yaw, upper-arm twist, elbow, forearm twist,
    /// wrist pitch, wrist yaw. Links: upper arm 0.28 m, forearm 0.22 m,
    /// hand 0.10 m, all along +x at zero angles.
    pub fn default_arm(side: f64) -> Self {
        let x = Vector3::x_axis();
        let y = Vector3::y_axis();
        let z = Vector3::z_axis();
        let j = |axis, off: [f64; 3], lo, hi| Joint {
            axis,
            offset: Vector3::from(off),
            limit_lo: lo,
            limit_hi: hi,
        };
        let joints = vec![
            j(y, [0.0, 0.0, 0.0], -2.6, 2.6),
            j(z, [0.0, 0.0, 0.0], -1.6, 1.6),
            j(x, [0.28, 0.0, 0.0], -2.6, 2.6),
            j(y, [0.22, 0.0, 0.0], -2.6, 0.0),
            j(x, [0.0, 0.0, 0.0], -1.9, 1.9),
            j(y, [0.0, 0.0, 0.0], -1.6, 1.6),
            j(z, [0.10, 0.0, 0.0], -1.6, 1.6),
        ];
        let base = Isometry3::translation(0.0, side * 0.2, 0.0);
        Self::new(base, joints).expect("default arm is valid")
    }

    pub fn default_left() -> Self {
        Self::default_arm(1.0)
    }

    pub fn default_right() -> Self {
        Self::default_arm(-1.0)
    }

    /// Bent-elbow starting posture for the default arm.
    pub fn home_posture(&self) -> Vec<f64> {
        let mut q = vec![0.0; self.dof()];
        if self.dof() == 7 {
            q[0] = 0.6;
            q[3] = -1.4;
            q[5] = 0.5;
        }
        self.project(&mut q);
        q
    }

    /// Planar chain in the xy-plane with joints about +z.
    pub fn planar(links: &[f64]) -> Result<Self, KinematicsError> {
        let joints = links
            .iter()
            .map(|&l| Joint {
                axis: Vector3::z_axis(),
                offset: Vector3::new(l, 0.0, 0.0),
                limit_lo: -std::f64::consts::PI,
                limit_hi: std::f64::consts::PI,
            })
            .collect();
        Self::new(Isometry3::identity(), joints)
    }

    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    pub fn joints(&self) -> &[Joint] {
        &self.joints
    }

    pub fn base(&self) -> &Isometry3<f64> {
        &self.base
    }

    /// Sum of link offset lengths.
    pub fn reach(&self) -> f64 {
        self.joints.iter().map(|j| j.offset.norm()).sum()
    }

    pub fn within_limits(&self, q: &[f64]) -> bool {
        q.len() == self.dof()
            && q.iter()
                .zip(&self.joints)
                .all(|(v, j)| *v >= j.limit_lo && *v <= j.limit_hi)
    }

    /// Projects `q` into the joint limits in place.
    pub fn project(&self, q: &mut [f64]) {
        for (v, j) in q.iter_mut().zip(&self.joints) {
            *v = v.clamp(j.limit_lo, j.limit_hi);
        }
    }

    fn check_dim(&self, q: &[f64]) -> Result<(), KinematicsError> {
        if q.len() == self.dof() {
            Ok(())
        } else {
            Err(KinematicsError::DimensionMismatch {
                expected: self.dof(),
                got: q.len(),
            })
        }
    }

    /// World-frame joint origins and axes, plus the hand position.
    fn frames(&self, q: &[f64]) -> (Vec<JointFrame>, Point3<f64>) {
        let mut frame = self.base;
        let mut joints = Vec::with_capacity(self.dof());
        for (j, &angle) in self.joints.iter().zip(q) {
            joints.push((
                Point3::from(frame.translation.vector),
                frame.rotation * j.axis.into_inner(),
            ));
            frame *= Isometry3::from_parts(
                Translation3::identity(),
                UnitQuaternion::from_axis_angle(&j.axis, angle),
            );
            frame *= Translation3::from(j.offset);
        }
        (joints, Point3::from(frame.translation.vector))
    }

    pub fn fk(&self, q: &[f64]) -> Result<Point3<f64>, KinematicsError> {
        self.check_dim(q)?;
        Ok(self.frames(q).1)
    }

    /// Positional geometric Jacobian, one column per joint.
    pub fn jacobian(&self, q: &[f64]) -> Result<Matrix3xX<f64>, KinematicsError> {
        self.check_dim(q)?;
        let (joints, hand) = self.frames(q);
        Ok(jacobian_columns(&joints, &hand))
    }
}

/// World-frame origin and axis of one joint.
type JointFrame = (Point3<f64>, Vector3<f64>);

fn jacobian_columns(joints: &[JointFrame], hand: &Point3<f64>) -> Matrix3xX<f64> {
    Matrix3xX::from_columns(
        &joints
            .iter()
            .map(|(origin, axis)| axis.cross(&(hand - origin)))
            .collect::<Vec<_>>(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IkParams {
    pub damping: f64,
    pub max_iters: usize,
    pub pos_tol_m: f64,
    pub step_clamp_rad: f64,
}

impl Default for IkParams {
    fn default() -> Self {
        Self {
            damping: 0.05,
            max_iters: 100,
            pos_tol_m: 1e-3,
            step_clamp_rad: 0.2,
        }
    }
}

impl IkParams {
    pub fn validate(&self) -> Result<(), KinematicsError> {
        if !(self.damping.is_finite() && self.damping > 0.0) {
            return Err(KinematicsError::InvalidParams("damping must be > 0".into()));
        }
        if !(self.pos_tol_m.is_finite() && self.pos_tol_m > 0.0) {
            return Err(KinematicsError::InvalidParams(
                "pos_tol_m must be > 0".into(),
            ));
        }
        if !(self.step_clamp_rad.is_finite() && self.step_clamp_rad > 0.0) {
            return Err(KinematicsError::InvalidParams(
                "step_clamp_rad must be > 0".into(),
            ));
        }
        Ok(())
    }
}

/// Outcome of one IK solve. An unconverged result is still a usable pose:
/// the best-residual iterate seen.
#[derive(Debug, Clone, PartialEq)]
pub struct IkSolution {
    pub q: Vec<f64>,
    pub residual_m: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl IkSolution {
    pub fn unreachable(&self) -> bool {
        !self.converged
    }
}

/// Step halvings tried before an iteration is declared stalled.
const MAX_HALVINGS: usize = 8;

/// Damped-least-squares position IK, warm-started from `q0`.
///
/// Each iteration takes `dq = J^T (J J^T + damping^2 I)^-1 e`, scales it so
/// no component exceeds `step_clamp_rad` and projects into the joint limits. A step
/// that does not lower the residual is halved until it does; near a
/// singularity this stops the elbow from oscillating across the straight pose.
/// Returns the first iterate within `pos_tol_m`, otherwise the best one seen.
pub fn ik_solve(
    chain: &ArmChain,
    target: &Point3<f64>,
    q0: &[f64],
    p: &IkParams,
) -> Result<IkSolution, KinematicsError> {
    chain.check_dim(q0)?;
    let mut q = q0.to_vec();
    chain.project(&mut q);
    let lambda_sq = p.damping * p.damping;

    let (mut joints, mut hand) = chain.frames(&q);
    let mut residual = (target - hand).norm();
    let mut iterations = 0;
    let mut trial = vec![0.0; q.len()];
    while residual >= p.pos_tol_m && iterations < p.max_iters {
        let err = target - hand;
        let jac = jacobian_columns(&joints, &hand);
        let damped: Matrix3<f64> = &jac * jac.transpose() + Matrix3::identity() * lambda_sq;
        let Some(y) = damped.cholesky().map(|c| c.solve(&err)) else {
            break;
        };
        // scale the whole step so no joint moves more than the clamp; clamping
        // components independently can turn it away from the error
        let mut dq = jac.transpose() * y;
        let peak = dq.amax();
        if peak > p.step_clamp_rad {
            dq *= p.step_clamp_rad / peak;
        }

        let mut improved = false;
        let mut scale = 1.0;
        for _ in 0..=MAX_HALVINGS {
            for ((t, v), d) in trial.iter_mut().zip(&q).zip(dq.iter()) {
                *t = v + scale * d;
            }
            chain.project(&mut trial);
            let (tj, th) = chain.frames(&trial);
            let r = (target - th).norm();
            if r < residual {
                q.copy_from_slice(&trial);
                joints = tj;
                hand = th;
                residual = r;
                improved = true;
                break;
            }
            scale *= 0.5;
        }
        iterations += 1;
        if !improved {
            break;
        }
    }
    Ok(IkSolution {
        q,
        residual_m: residual,
        iterations,
        converged: residual < p.pos_tol_m,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RodSolution {
    pub left: IkSolution,
    pub right: IkSolution,
}

/// Solves both arms against the rod's hand targets, each warm-started from
/// its previous joint vector.
pub fn solve_rod(
    left: &ArmChain,
    right: &ArmChain,
    rod: &RodPose,
    q_prev: (&[f64], &[f64]),
    p: &IkParams,
) -> Result<RodSolution, KinematicsError> {
    Ok(RodSolution {
        left: ik_solve(left, &rod.left_hand, q_prev.0, p)?,
        right: ik_solve(right, &rod.right_hand, q_prev.1, p)?,
    })
}
