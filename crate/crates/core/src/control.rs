//! Deterministic PD tracking controller.
//!
//! Plays the role of the imitation policy: given the current agent state and
//! the next reference pose it returns an [`Action`] that drives the agent
//! toward the reference. One gain set is shared by all agents.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::dynamics::{Action, SimState};
use crate::kinematics::{shortest_arc, JointGroup, PoseParams, ShapeVector};
use crate::{Error, Result, J_BODY};

/// Gains indexed by [`JointGroup::index`] (torso, limbs, extremities).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerGains {
    /// Proportional gain per group (N·m/rad).
    pub kp: [f64; 3],
    /// Derivative gain per group (N·m·s/rad).
    pub kd: [f64; 3],
    /// Joint torque limit per group (N·m).
    pub torque_limit: [f64; 3],
    /// Root position gain (N/m).
    pub root_kp: f64,
    /// Root linear damping (N·s/m).
    pub root_kd: f64,
    /// Root orientation gain (N·m/rad).
    pub root_rot_kp: f64,
    /// Root angular damping (N·m·s/rad).
    pub root_rot_kd: f64,
    /// Residual force magnitude limit (N).
    pub f_max: f64,
    /// Residual torque magnitude limit (N·m).
    pub root_torque_max: f64,
}

impl Default for ControllerGains {
    fn default() -> Self {
        let kp = [500.0, 300.0, 100.0];
        ControllerGains {
            kp,
            kd: kp.map(|k: f64| 2.0 * k.sqrt()),
            torque_limit: [400.0, 250.0, 80.0],
            root_kp: 2000.0,
            root_kd: 300.0,
            root_rot_kp: 300.0,
            root_rot_kd: 100.0,
            f_max: 500.0,
            root_torque_max: 300.0,
        }
    }
}

impl ControllerGains {
    pub fn validate(&self) -> Result<()> {
        let non_negative = self
            .kp
            .iter()
            .chain(&self.kd)
            .chain([
                &self.root_kp,
                &self.root_kd,
                &self.root_rot_kp,
                &self.root_rot_kd,
            ])
            .all(|g| g.is_finite() && *g >= 0.0);
        if !non_negative {
            return Err(Error::InvalidConfig(
                "gains must be finite and non-negative".into(),
            ));
        }
        let positive = self
            .torque_limit
            .iter()
            .chain([&self.f_max, &self.root_torque_max])
            .all(|l| l.is_finite() && *l > 0.0);
        if !positive {
            return Err(Error::InvalidConfig(
                "limits must be finite and positive".into(),
            ));
        }
        Ok(())
    }

    /// `(kp, kd, torque_limit)` of a group.
    pub fn joint(&self, group: JointGroup) -> (f64, f64, f64) {
        let i = group.index();
        (self.kp[i], self.kd[i], self.torque_limit[i])
    }
}

/// The representation of rotation `target` closest to the coordinates `near`.
///
/// All axis-angle vectors `a·(θ + 2πn)` describe the same rotation; the
/// difference to the returned vector is the coordinate-space tracking error.
pub fn nearest_equivalent(target: &Vector3<f64>, near: &Vector3<f64>) -> Vector3<f64> {
    let theta = target.norm();
    let axis = if theta > 1e-12 {
        target / theta
    } else if near.norm() > 1e-12 {
        near.normalize()
    } else {
        return *target;
    };
    let along = axis.dot(near);
    let n0 = ((along - theta) / (2.0 * PI)).round();
    [n0 - 1.0, n0, n0 + 1.0]
        .into_iter()
        .map(|n| axis * (theta + 2.0 * PI * n))
        .min_by(|a, b| (a - near).norm().total_cmp(&(b - near).norm()))
        .expect("three candidates")
}

fn clamp_components(v: Vector3<f64>, bound: f64) -> Vector3<f64> {
    v.map(|x| x.clamp(-bound, bound))
}

fn clamp_norm(v: Vector3<f64>, bound: f64) -> Vector3<f64> {
    let n = v.norm();
    if n > bound {
        v * (bound / n)
    } else {
        v
    }
}

/// Computes the action driving `state` toward `reference`.
///
/// The shape only enters through the simulated skeleton; gains are shared.
pub fn track(
    state: &SimState,
    reference: &PoseParams,
    _shape: &ShapeVector,
    gains: &ControllerGains,
) -> Action {
    let mut target_offsets = Vec::with_capacity(J_BODY);
    let mut joint_targets = Vec::with_capacity(J_BODY);
    let mut joint_torques = Vec::with_capacity(J_BODY);
    for k in 0..J_BODY {
        let (kp, kd, limit) = gains.joint(JointGroup::of_body_joint(k));
        let current = state.joint(k);
        let arc = shortest_arc(&current, &reference.body_pose[k]);
        joint_torques.push(clamp_components(kp * arc - kd * state.joint_vel(k), limit));
        let offset = clamp_components(
            nearest_equivalent(&reference.body_pose[k], &current) - current,
            FRAC_PI_2,
        );
        target_offsets.push(offset);
        joint_targets.push(current + offset);
    }

    let root_force = clamp_norm(
        gains.root_kp * (reference.root_trans - state.root_pos())
            - gains.root_kd * state.root_vel(),
        gains.f_max,
    );
    let orient = state.root_orient();
    let rot_err = nearest_equivalent(&reference.root_orient, &orient) - orient;
    let root_torque = clamp_norm(
        gains.root_rot_kp * rot_err - gains.root_rot_kd * state.root_ang_vel(),
        gains.root_torque_max,
    );

    Action {
        target_offsets,
        joint_targets,
        joint_torques,
        root_force,
        root_torque,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::state_from_pose;
    use crate::kinematics::{canonicalize_axis_angle, quat_from_axis_angle};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_vec(rng: &mut ChaCha8Rng, s: f64) -> Vector3<f64> {
        Vector3::new(
            rng.random_range(-s..s),
            rng.random_range(-s..s),
            rng.random_range(-s..s),
        )
    }

    fn random_state(rng: &mut ChaCha8Rng) -> SimState {
        let mut s = SimState::zeros();
        for x in s.q.iter_mut() {
            *x = rng.random_range(-4.0..4.0);
        }
        for x in s.qdot.iter_mut() {
            *x = rng.random_range(-100.0..100.0);
        }
        s
    }

    fn random_pose(rng: &mut ChaCha8Rng) -> PoseParams {
        let root = rand_vec(rng, 3.0);
        let body = (0..J_BODY).map(|_| rand_vec(rng, 3.0)).collect();
        PoseParams::new(root, body, rand_vec(rng, 5.0)).unwrap()
    }

    #[test]
    fn fixed_point_gives_zero_action() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pose = random_pose(&mut rng);
        let state = state_from_pose(&pose, None, 30.0);
        let a = track(
            &state,
            &pose,
            &ShapeVector::default(),
            &ControllerGains::default(),
        );
        assert!(a.joint_torques.iter().all(|v| v.norm() < 1e-9));
        assert!(a.target_offsets.iter().all(|v| v.norm() < 1e-12));
        assert_eq!(a.root_force, Vector3::zeros());
        assert!(a.root_torque.norm() < 1e-9);
    }

    #[test]
    fn single_joint_pd() {
        let pose = PoseParams::rest(Vector3::zeros());
        let state = state_from_pose(&pose, None, 30.0);
        let mut reference = pose.clone();
        reference.body_pose[4] = Vector3::new(0.1, 0.0, 0.0);
        let gains = ControllerGains {
            kp: [50.0; 3],
            kd: [0.0; 3],
            torque_limit: [1e9; 3],
            ..ControllerGains::default()
        };
        let a = track(&state, &reference, &ShapeVector::default(), &gains);
        assert!((a.joint_torques[4].x - 5.0).abs() < 1e-12);
        assert!(a.joint_torques[4].yz().norm() < 1e-12);
        assert!((a.target_offsets[4].x - 0.1).abs() < 1e-12);
    }

    #[test]
    fn root_residual_force() {
        let pose = PoseParams::rest(Vector3::zeros());
        let state = state_from_pose(&pose, None, 30.0);
        let reference = PoseParams::rest(Vector3::new(0.2, 0.0, 0.0));
        let gains = ControllerGains {
            root_kp: 400.0,
            root_kd: 0.0,
            f_max: 500.0,
            ..ControllerGains::default()
        };
        let a = track(&state, &reference, &ShapeVector::default(), &gains);
        assert!((a.root_force - Vector3::new(80.0, 0.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn nearest_equivalent_wraps() {
        let target = Vector3::new(0.0, 0.0, -3.0);
        let near = Vector3::new(0.0, 0.0, 3.1);
        let e = nearest_equivalent(&target, &near);
        assert!((e - Vector3::new(0.0, 0.0, 2.0 * PI - 3.0)).norm() < 1e-12);
        assert_eq!(
            nearest_equivalent(&Vector3::zeros(), &Vector3::zeros()),
            Vector3::zeros()
        );
    }

    #[test]
    fn actions_respect_bounds() {
        let gains = ControllerGains::default();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100_000 {
            let state = random_state(&mut rng);
            let reference = random_pose(&mut rng);
            let a = track(&state, &reference, &ShapeVector::default(), &gains);
            for k in 0..J_BODY {
                let (_, _, limit) = gains.joint(JointGroup::of_body_joint(k));
                assert!(a.target_offsets[k].iter().all(|x| x.abs() <= FRAC_PI_2));
                assert!(a.joint_torques[k].iter().all(|x| x.abs() <= limit));
            }
            assert!(a.root_force.norm() <= gains.f_max * (1.0 + 1e-12));
            assert!(a.root_torque.norm() <= gains.root_torque_max * (1.0 + 1e-12));
        }
    }

    #[test]
    fn perturbed_standing_agent_recovers() {
        use crate::dynamics::{Agent, AgentModel, PhysicsParams, WorldState};
        use crate::kinematics::Skeleton;
        use std::sync::Arc;

        let skel = Skeleton::default_template();
        let standing = crate::synth::standing_pose(&skel, Vector3::zeros(), 0.0, 0.0);
        let reference = PoseParams::rest(standing.root_trans);
        let model = Arc::new(AgentModel::new(skel, ShapeVector::default(), 0.02));
        let gains = ControllerGains::default();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..5 {
            let mut start = reference.clone();
            for v in start.body_pose.iter_mut() {
                let dir = rand_vec(&mut rng, 1.0).normalize();
                *v = dir * rng.random_range(0.0..0.2);
            }
            let agent = Agent {
                model: model.clone(),
                state: state_from_pose(&start, None, 30.0),
            };
            let mut world =
                WorldState::new(vec![agent], 0.0, PhysicsParams::default(), gains.clone());
            world.enforce_contacts();
            for _ in 0..30 {
                let action = track(
                    &world.agents[0].state,
                    &reference,
                    &ShapeVector::default(),
                    &gains,
                );
                for _ in 0..15 {
                    world
                        .step_mut(std::slice::from_ref(&action), 1.0 / 450.0)
                        .unwrap();
                }
            }
            let state = &world.agents[0].state;
            for k in 0..J_BODY {
                let err = shortest_arc(&state.joint(k), &reference.body_pose[k]).norm();
                assert!(err <= 0.05, "joint {k} error {err}");
            }
        }
    }

    proptest! {
        #[test]
        fn yaw_equivariance(seed in 0u64..1000, yaw in -3.0..3.0f64) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut state = random_state(&mut rng);
            for x in state.qdot.iter_mut() { *x *= 0.05; }
            let reference = random_pose(&mut rng);
            let g = quat_from_axis_angle(&Vector3::new(0.0, 0.0, yaw));
            let gains = ControllerGains { f_max: 1e9, ..ControllerGains::default() };

            let mut rs = state.clone();
            rs.set_root_pos(&(g * state.root_pos()));
            rs.set_root_vel(&(g * state.root_vel()));
            let r_orient = canonicalize_axis_angle((g * quat_from_axis_angle(&state.root_orient())).scaled_axis());
            rs.q[3..6].copy_from_slice(r_orient.as_slice());
            let mut rr = reference.clone();
            rr.root_trans = g * reference.root_trans;
            rr.root_orient = canonicalize_axis_angle((g * quat_from_axis_angle(&reference.root_orient)).scaled_axis());

            let a = track(&state, &reference, &ShapeVector::default(), &gains);
            let b = track(&rs, &rr, &ShapeVector::default(), &gains);
            prop_assert!((g * a.root_force - b.root_force).norm() < 1e-9 * (1.0 + a.root_force.norm()));
            for k in 0..J_BODY {
                prop_assert!((a.target_offsets[k] - b.target_offsets[k]).norm() < 1e-9);
                prop_assert!((a.joint_torques[k] - b.joint_torques[k]).norm() < 1e-9);
            }
        }
    }
}
