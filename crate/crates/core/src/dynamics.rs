//! The shared physics world.
//!
//! Each agent is a floating-base articulated capsule body described in
//! generalized coordinates `q = (root position, root axis-angle, 22 joint
//! axis-angles)`. Joint-space inertia is lumped into one diagonal entry per
//! DOF. Joints are driven by stable (implicit) PD actuators toward targets
//! carried in the [`Action`]; the root receives gravity plus the action's
//! residual force and torque. Contacts are resolved by sequential position
//! projection of whole agents along the contact normal, followed by an
//! inelastic velocity response with a friction proxy at ground contacts.

use std::sync::Arc;

use nalgebra::Vector3;

use crate::collision::{detect_contacts, Capsule, Contact, ContactSet};
use crate::control::ControllerGains;
use crate::kinematics::{fk_quats, shortest_arc, JointGroup, PoseParams, ShapeVector, Skeleton};
use crate::{Error, Result, J_BODY};

/// Generalized coordinates per agent.
pub const DOF_PER_AGENT: usize = 6 + 3 * J_BODY;
/// Componentwise bound on generalized velocities.
pub const VELOCITY_LIMIT: f64 = 100.0;
pub const MAX_DT: f64 = 0.05;

const ROOT_POS: usize = 0;
const ROOT_ROT: usize = 3;
const JOINTS: usize = 6;

/// Step used to estimate contact-point velocities by finite differences.
const CONTACT_VEL_H: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub q: Vec<f64>,
    pub qdot: Vec<f64>,
}

fn vec3(s: &[f64], at: usize) -> Vector3<f64> {
    Vector3::new(s[at], s[at + 1], s[at + 2])
}

fn set3(s: &mut [f64], at: usize, v: &Vector3<f64>) {
    s[at..at + 3].copy_from_slice(v.as_slice());
}

impl SimState {
    pub fn zeros() -> Self {
        SimState {
            q: vec![0.0; DOF_PER_AGENT],
            qdot: vec![0.0; DOF_PER_AGENT],
        }
    }

    pub fn root_pos(&self) -> Vector3<f64> {
        vec3(&self.q, ROOT_POS)
    }

    pub fn root_orient(&self) -> Vector3<f64> {
        vec3(&self.q, ROOT_ROT)
    }

    pub fn joint(&self, k: usize) -> Vector3<f64> {
        vec3(&self.q, JOINTS + 3 * k)
    }

    pub fn joints(&self) -> Vec<Vector3<f64>> {
        (0..J_BODY).map(|k| self.joint(k)).collect()
    }

    pub fn root_vel(&self) -> Vector3<f64> {
        vec3(&self.qdot, ROOT_POS)
    }

    pub fn root_ang_vel(&self) -> Vector3<f64> {
        vec3(&self.qdot, ROOT_ROT)
    }

    pub fn joint_vel(&self, k: usize) -> Vector3<f64> {
        vec3(&self.qdot, JOINTS + 3 * k)
    }

    pub fn set_root_pos(&mut self, v: &Vector3<f64>) {
        set3(&mut self.q, ROOT_POS, v);
    }

    pub fn set_root_vel(&mut self, v: &Vector3<f64>) {
        set3(&mut self.qdot, ROOT_POS, v);
    }

    pub fn set_root_ang_vel(&mut self, v: &Vector3<f64>) {
        set3(&mut self.qdot, ROOT_ROT, v);
    }

    pub fn set_joint_vel(&mut self, k: usize, v: &Vector3<f64>) {
        set3(&mut self.qdot, JOINTS + 3 * k, v);
    }

    /// Coordinates viewed as a pose (axis-angles are not canonicalized).
    pub fn as_pose(&self) -> PoseParams {
        PoseParams {
            root_orient: self.root_orient(),
            body_pose: self.joints(),
            root_trans: self.root_pos(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(&self.qdot).all(|x| x.is_finite())
    }

    fn validate_dims(&self) -> Result<()> {
        if self.q.len() != DOF_PER_AGENT || self.qdot.len() != DOF_PER_AGENT {
            return Err(Error::Dimension(format!(
                "state has {}/{} coordinates, expected {DOF_PER_AGENT}",
                self.q.len(),
                self.qdot.len()
            )));
        }
        Ok(())
    }
}

/// Initial simulation state for a kinematic pose.
///
/// Velocities are backward differences against `prev` at the given frame
/// rate (rotations use the shortest arc), or zero without a previous state.
pub fn state_from_pose(pose: &PoseParams, prev: Option<&SimState>, fps: f64) -> SimState {
    let mut state = SimState::zeros();
    set3(&mut state.q, ROOT_POS, &pose.root_trans);
    set3(&mut state.q, ROOT_ROT, &pose.root_orient);
    for (k, r) in pose.body_pose.iter().enumerate() {
        set3(&mut state.q, JOINTS + 3 * k, r);
    }
    if let Some(prev) = prev {
        let v = (pose.root_trans - prev.root_pos()) * fps;
        set3(&mut state.qdot, ROOT_POS, &v);
        let w = shortest_arc(&prev.root_orient(), &pose.root_orient) * fps;
        set3(&mut state.qdot, ROOT_ROT, &w);
        for (k, r) in pose.body_pose.iter().enumerate() {
            let w = shortest_arc(&prev.joint(k), r) * fps;
            set3(&mut state.qdot, JOINTS + 3 * k, &w);
        }
        for x in state.qdot.iter_mut() {
            *x = x.clamp(-VELOCITY_LIMIT, VELOCITY_LIMIT);
        }
    }
    state
}

/// Static description of one simulated humanoid.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentModel {
    pub skeleton: Skeleton,
    pub shape: ShapeVector,
    pub total_mass: f64,
    /// Lumped rotational inertia of the root DOFs (kg·m²).
    pub root_inertia: f64,
    /// Lumped inertia per body joint (kg·m²), shared by its three DOFs.
    pub joint_inertia: [f64; J_BODY],
}

impl AgentModel {
    /// Lumps bone masses into diagonal joint-space inertia at the rest pose.
    /// `armature` is added to every rotational DOF.
    pub fn new(skeleton: Skeleton, shape: ShapeVector, armature: f64) -> Self {
        let rest = fk_quats(
            &skeleton,
            &Vector3::zeros(),
            &[Vector3::zeros(); J_BODY],
            &Vector3::zeros(),
        )
        .0;
        let lumped = |pivot: usize, strict: bool| -> f64 {
            (0..skeleton.num_joints())
                .filter(|&b| skeleton.is_descendant(b, pivot) && !(strict && b == pivot))
                .map(|b| {
                    let c = skeleton.bone_center(b, &rest);
                    let moment = skeleton.inertia(b).mean();
                    skeleton.mass(b) * (c - rest[pivot]).norm_squared() + moment
                })
                .sum::<f64>()
                + armature
        };
        let mut joint_inertia = [0.0; J_BODY];
        for (k, slot) in joint_inertia.iter_mut().enumerate() {
            *slot = lumped(k + 1, true);
        }
        AgentModel {
            total_mass: skeleton.total_mass(),
            root_inertia: lumped(0, false),
            joint_inertia,
            skeleton,
            shape,
        }
    }

    pub fn inv_mass(&self) -> f64 {
        1.0 / self.total_mass
    }

    pub fn joint_positions(&self, state: &SimState) -> Vec<Vector3<f64>> {
        let joints = state.joints();
        fk_quats(
            &self.skeleton,
            &state.root_orient(),
            &joints,
            &state.root_pos(),
        )
        .0
    }

    pub fn capsules(&self, state: &SimState) -> Vec<Capsule> {
        self.skeleton.capsules(&self.joint_positions(state))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub model: Arc<AgentModel>,
    pub state: SimState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhysicsParams {
    pub gravity: Vector3<f64>,
    /// Maximum contact depth tolerated after a step (m).
    pub pen_tol: f64,
    /// Gauss–Seidel sweeps over the contact set per projection.
    pub solver_iterations: usize,
    /// Fraction of ground-contact tangential velocity removed per resolve.
    pub friction: f64,
    pub contacts_enabled: bool,
    /// Re-detection rounds used to drive residual depth below tolerance.
    pub max_projection_rounds: usize,
    pub armature: f64,
}

impl Default for PhysicsParams {
    fn default() -> Self {
        PhysicsParams {
            gravity: Vector3::new(0.0, 0.0, -9.81),
            pen_tol: 1e-3,
            solver_iterations: 8,
            friction: 0.9,
            contacts_enabled: true,
            max_projection_rounds: 32,
            armature: 0.02,
        }
    }
}

/// Control input for one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct Action {
    /// Target-pose offsets relative to the state the action was computed from (rad).
    pub target_offsets: Vec<Vector3<f64>>,
    /// Absolute PD targets in joint coordinates (state joints + offsets).
    pub joint_targets: Vec<Vector3<f64>>,
    /// PD command evaluated at the issuing state (N·m).
    pub joint_torques: Vec<Vector3<f64>>,
    /// Residual force on the root (N).
    pub root_force: Vector3<f64>,
    /// Residual torque on the root (N·m).
    pub root_torque: Vector3<f64>,
}

impl Action {
    /// Holds the current joint configuration with no root actuation.
    pub fn hold(state: &SimState) -> Self {
        Action {
            target_offsets: vec![Vector3::zeros(); J_BODY],
            joint_targets: state.joints(),
            joint_torques: vec![Vector3::zeros(); J_BODY],
            root_force: Vector3::zeros(),
            root_torque: Vector3::zeros(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.target_offsets.len() != J_BODY
            || self.joint_targets.len() != J_BODY
            || self.joint_torques.len() != J_BODY
        {
            return Err(Error::Dimension(format!(
                "action must carry {J_BODY} joint entries"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub agents: Vec<Agent>,
    pub ground_height: f64,
    pub time: f64,
    pub step_index: u64,
    pub params: PhysicsParams,
    /// Actuator gains shared by every agent.
    pub gains: ControllerGains,
}

impl WorldState {
    pub fn new(
        agents: Vec<Agent>,
        ground_height: f64,
        params: PhysicsParams,
        gains: ControllerGains,
    ) -> Self {
        WorldState {
            agents,
            ground_height,
            time: 0.0,
            step_index: 0,
            params,
            gains,
        }
    }

    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn capsules(&self) -> Vec<Vec<Capsule>> {
        self.agents
            .iter()
            .map(|a| a.model.capsules(&a.state))
            .collect()
    }

    pub fn detect(&self) -> ContactSet {
        detect_contacts(&self.capsules(), self.ground_height)
    }

    /// Kinetic plus gravitational potential energy (J).
    pub fn energy(&self) -> f64 {
        self.agents
            .iter()
            .map(|a| {
                let m = &a.model;
                let s = &a.state;
                let mut e = 0.5 * m.total_mass * s.root_vel().norm_squared()
                    + 0.5 * m.root_inertia * s.root_ang_vel().norm_squared()
                    - m.total_mass * self.params.gravity.dot(&s.root_pos());
                for k in 0..J_BODY {
                    e += 0.5 * m.joint_inertia[k] * s.joint_vel(k).norm_squared();
                }
                e
            })
            .sum()
    }

    pub fn total_linear_momentum(&self) -> Vector3<f64> {
        self.agents
            .iter()
            .map(|a| a.state.root_vel() * a.model.total_mass)
            .sum()
    }

    /// Advances every agent by `dt` and resolves contacts.
    pub fn step_mut(&mut self, actions: &[Action], dt: f64) -> Result<()> {
        if !(dt > 0.0 && dt <= MAX_DT) {
            return Err(Error::InvalidConfig(format!(
                "dt must lie in (0, {MAX_DT}], got {dt}"
            )));
        }
        if actions.len() != self.agents.len() {
            return Err(Error::Dimension(format!(
                "{} actions for {} agents",
                actions.len(),
                self.agents.len()
            )));
        }
        for (i, (agent, action)) in self.agents.iter_mut().zip(actions).enumerate() {
            action.validate()?;
            agent.state.validate_dims()?;
            integrate_agent(agent, action, &self.params.gravity, &self.gains, dt);
            if !agent.state.is_finite() {
                return Err(Error::SimDiverged {
                    frame: self.step_index as usize,
                    agent: i,
                    reason: "non-finite state after integration".into(),
                });
            }
        }
        if self.params.contacts_enabled {
            self.enforce_contacts();
        }
        self.time += dt;
        self.step_index += 1;
        Ok(())
    }

    /// One full resolve (positions and velocities), then extra
    /// position-only rounds until the residual depth is well under tolerance.
    pub fn enforce_contacts(&mut self) -> ContactSet {
        let mut contacts = self.detect();
        if contacts.is_empty() {
            return contacts;
        }
        let iterations = self.params.solver_iterations.max(1);
        self.resolve_contacts_mut(&contacts, iterations);
        let target = 0.01 * self.params.pen_tol;
        for _ in 0..self.params.max_projection_rounds {
            contacts = self.detect();
            if contacts.max_depth() <= target {
                break;
            }
            self.project_positions(&contacts, iterations);
        }
        contacts
    }

    /// Position projection followed by the velocity response.
    pub fn resolve_contacts_mut(&mut self, contacts: &ContactSet, iterations: usize) {
        if contacts.is_empty() {
            return;
        }
        self.project_positions(contacts, iterations.max(1));
        self.velocity_response(contacts);
    }

    /// Sequential projection: every penetrating contact pushes the two agents
    /// apart along its normal, split by inverse mass, until its depth is zero.
    fn project_positions(&mut self, contacts: &ContactSet, iterations: usize) {
        let inv_mass: Vec<f64> = self.agents.iter().map(|a| a.model.inv_mass()).collect();
        let mut shift = vec![Vector3::<f64>::zeros(); self.agents.len()];
        for _ in 0..iterations {
            let mut moved = false;
            for c in contacts.iter() {
                let (rel, wj) = if c.is_ground() {
                    (shift[c.agent_i], 0.0)
                } else {
                    (shift[c.agent_i] - shift[c.agent_j], inv_mass[c.agent_j])
                };
                let depth = c.depth - c.normal.dot(&rel);
                if depth <= 0.0 {
                    continue;
                }
                let wi = inv_mass[c.agent_i];
                let lambda = depth / (wi + wj);
                shift[c.agent_i] += c.normal * (wi * lambda);
                if !c.is_ground() {
                    shift[c.agent_j] -= c.normal * (wj * lambda);
                }
                moved = true;
            }
            if !moved {
                break;
            }
        }
        for (agent, s) in self.agents.iter_mut().zip(&shift) {
            let p = agent.state.root_pos() + s;
            agent.state.set_root_pos(&p);
        }
    }

    fn velocity_response(&mut self, contacts: &ContactSet) {
        let mu = self.params.friction;
        for (i, agent) in self.agents.iter_mut().enumerate() {
            let ground: Vec<&Contact> = contacts
                .iter()
                .filter(|c| c.is_ground() && c.agent_i == i)
                .collect();
            if ground.is_empty() {
                continue;
            }
            let mut v = agent.state.root_vel();
            if v.z < 0.0 {
                v.z = 0.0;
                agent.state.set_root_vel(&v);
            }
            let slip = mean_contact_velocity(agent, &ground);
            v.x -= mu * slip.x;
            v.y -= mu * slip.y;
            agent.state.set_root_vel(&v);
        }
        for c in contacts.iter().filter(|c| !c.is_ground()) {
            let (a, b) = (c.agent_i, c.agent_j);
            let wi = self.agents[a].model.inv_mass();
            let wj = self.agents[b].model.inv_mass();
            let vi = self.agents[a].state.root_vel();
            let vj = self.agents[b].state.root_vel();
            let vn = (vi - vj).dot(&c.normal);
            if vn >= 0.0 {
                continue;
            }
            let impulse = -vn / (wi + wj);
            self.agents[a]
                .state
                .set_root_vel(&(vi + c.normal * (wi * impulse)));
            self.agents[b]
                .state
                .set_root_vel(&(vj - c.normal * (wj * impulse)));
        }
    }
}

/// Mean velocity of the deepest material points of an agent's ground contacts.
fn mean_contact_velocity(agent: &Agent, contacts: &[&Contact]) -> Vector3<f64> {
    let model = &agent.model;
    let now = model.joint_positions(&agent.state);
    let mut before = agent.state.clone();
    for (q, qd) in before.q.iter_mut().zip(&agent.state.qdot) {
        *q -= qd * CONTACT_VEL_H;
    }
    let prev = model.joint_positions(&before);
    let cap_now = model.skeleton.capsules(&now);
    let cap_prev = model.skeleton.capsules(&prev);
    let sum: Vector3<f64> = contacts
        .iter()
        .map(|c| {
            (cap_now[c.bone_i].axis_point(c.param_i) - cap_prev[c.bone_i].axis_point(c.param_i))
                / CONTACT_VEL_H
        })
        .sum();
    sum / contacts.len() as f64
}

fn integrate_agent(
    agent: &mut Agent,
    action: &Action,
    gravity: &Vector3<f64>,
    gains: &ControllerGains,
    dt: f64,
) {
    let model = agent.model.clone();
    let s = &mut agent.state;

    // Root DOFs carry constant forces over the step; the trapezoidal
    // position update is exact for them.
    let v0 = s.root_vel();
    let v1 = v0 + (gravity + action.root_force / model.total_mass) * dt;
    let p = s.root_pos() + (v0 + v1) * (0.5 * dt);
    s.set_root_vel(&v1);
    s.set_root_pos(&p);

    let w0 = s.root_ang_vel();
    let w1 = w0 + action.root_torque / model.root_inertia * dt;
    let r = s.root_orient() + (w0 + w1) * (0.5 * dt);
    s.set_root_ang_vel(&w1);
    set3(&mut s.q, ROOT_ROT, &r);

    for k in 0..J_BODY {
        let group = JointGroup::of_body_joint(k);
        let (kp, kd, limit) = gains.joint(group);
        let inertia = model.joint_inertia[k];
        let denom = inertia + dt * kd + dt * dt * kp;
        for c in 0..3 {
            let idx = JOINTS + 3 * k + c;
            let err = action.joint_targets[k][c] - s.q[idx];
            let qd = s.qdot[idx];
            // Stable PD: gains act on the end-of-step state.
            let mut acc = (kp * (err - dt * qd) - kd * qd) / denom;
            let torque = inertia * acc;
            if torque.abs() > limit {
                acc = limit.copysign(torque) / inertia;
            }
            s.qdot[idx] = qd + acc * dt;
        }
    }
    for x in s.qdot.iter_mut() {
        *x = x.clamp(-VELOCITY_LIMIT, VELOCITY_LIMIT);
    }
    for idx in JOINTS..DOF_PER_AGENT {
        s.q[idx] += s.qdot[idx] * dt;
    }
}

/// Functional form of [`WorldState::step_mut`].
pub fn step(world: &WorldState, actions: &[Action], dt: f64) -> Result<WorldState> {
    let mut next = world.clone();
    next.step_mut(actions, dt)?;
    Ok(next)
}

/// Functional form of [`WorldState::resolve_contacts_mut`].
pub fn resolve_contacts(
    world: &WorldState,
    contacts: &ContactSet,
    iterations: usize,
) -> WorldState {
    let mut next = world.clone();
    next.resolve_contacts_mut(contacts, iterations);
    next
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::{PoseParams, Skeleton};
    use crate::synth;

    fn agent_at(pose: &PoseParams) -> Agent {
        let skel = Skeleton::default_template();
        Agent {
            model: Arc::new(AgentModel::new(skel, ShapeVector::default(), 0.02)),
            state: state_from_pose(pose, None, 30.0),
        }
    }

    fn world(agents: Vec<Agent>) -> WorldState {
        WorldState::new(
            agents,
            0.0,
            PhysicsParams::default(),
            ControllerGains::default(),
        )
    }

    fn holds(w: &WorldState) -> Vec<Action> {
        w.agents.iter().map(|a| Action::hold(&a.state)).collect()
    }

    #[test]
    fn free_fall_single_step() {
        let mut w = world(vec![agent_at(&PoseParams::rest(Vector3::new(
            0.0, 0.0, 10.0,
        )))]);
        let dt = 0.01;
        let z0 = w.agents[0].state.root_pos().z;
        let a = holds(&w);
        w.step_mut(&a, dt).unwrap();
        let s = &w.agents[0].state;
        assert!((s.root_vel().z + 0.0981).abs() < 1e-12);
        // Exact ballistic displacement g·dt²/2.
        assert!((s.root_pos().z - z0 + 0.5 * 9.81 * dt * dt).abs() < 1e-12);
    }

    #[test]
    fn resting_body_stays_put() {
        let skel = Skeleton::default_template();
        let pose = synth::standing_pose(&skel, Vector3::zeros(), 0.0, 0.0);
        let mut w = world(vec![agent_at(&pose)]);
        let p0 = w.agents[0].state.root_pos();
        for _ in 0..450 {
            let a = holds(&w);
            w.step_mut(&a, 1.0 / 450.0).unwrap();
        }
        assert!((w.agents[0].state.root_pos() - p0).norm() < 1e-9);
        assert!(w.detect().max_ground_depth() <= 1e-3);
    }

    #[test]
    fn empty_contact_set_is_noop() {
        let w = world(vec![agent_at(&PoseParams::rest(Vector3::new(
            0.0, 0.0, 3.0,
        )))]);
        assert_eq!(resolve_contacts(&w, &ContactSet::default(), 8), w);
    }

    #[test]
    fn ground_contact_raises_body() {
        let skel = Skeleton::default_template();
        let pose = synth::standing_pose(&skel, Vector3::zeros(), 0.0, -0.02);
        let w = world(vec![agent_at(&pose)]);
        let contacts = w.detect();
        assert!((contacts.max_ground_depth() - 0.02).abs() < 1e-9);
        let after = resolve_contacts(&w, &contacts, 8);
        let dz = after.agents[0].state.root_pos().z - w.agents[0].state.root_pos().z;
        assert!(dz >= 0.019);
    }

    #[test]
    fn symmetric_overlap_splits_evenly() {
        let skel = Skeleton::default_template();
        let poses = synth::back_to_back(&skel, 0.05, Vector3::zeros(), 0.0);
        let mut w = world(poses.iter().map(agent_at).collect());
        let before: Vec<_> = w.agents.iter().map(|a| a.state.root_pos()).collect();
        let contacts = w.detect();
        let depth = contacts.max_inter_depth();
        assert!((depth - 0.05).abs() < 1e-9);
        w.resolve_contacts_mut(&contacts, 64);
        let d0 = (w.agents[0].state.root_pos() - before[0]).norm();
        let d1 = (w.agents[1].state.root_pos() - before[1]).norm();
        assert!((d0 - d1).abs() < 1e-9, "{d0} vs {d1}");
        assert!((d0 - 0.025).abs() < 1e-6, "{d0}");
        assert!(w.detect().max_inter_depth() <= 1e-3);
    }

    #[test]
    fn overlapping_agents_separated_by_step() {
        let skel = Skeleton::default_template();
        let poses = synth::back_to_back(&skel, 0.05, Vector3::zeros(), 0.0);
        let mut w = world(poses.iter().map(agent_at).collect());
        let a = holds(&w);
        w.step_mut(&a, 1.0 / 450.0).unwrap();
        let c = w.detect();
        assert!(c.max_inter_depth() <= 1e-3 + 1e-6);
        assert!(c.max_ground_depth() <= 1e-3);
        // Separation velocities point away from each other along y.
        let v0 = w.agents[0].state.root_vel();
        let v1 = w.agents[1].state.root_vel();
        assert!(
            (v0 - v1).dot(&(w.agents[0].state.root_pos() - w.agents[1].state.root_pos())) >= 0.0
        );
    }

    #[test]
    fn state_from_pose_velocities() {
        let p0 = PoseParams::rest(Vector3::zeros());
        assert!(state_from_pose(&p0, None, 30.0)
            .qdot
            .iter()
            .all(|&x| x == 0.0));
        let s0 = state_from_pose(&p0, None, 30.0);
        assert!(state_from_pose(&p0, Some(&s0), 30.0)
            .qdot
            .iter()
            .all(|&x| x == 0.0));
        let p1 = PoseParams::rest(Vector3::new(0.01, 0.0, 0.0));
        let s1 = state_from_pose(&p1, Some(&s0), 30.0);
        assert!((s1.root_vel() - Vector3::new(0.3, 0.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn rejects_bad_dt() {
        let mut w = world(vec![agent_at(&PoseParams::rest(Vector3::new(
            0.0, 0.0, 3.0,
        )))]);
        let a = holds(&w);
        assert!(w.step_mut(&a, 0.0).is_err());
        assert!(w.step_mut(&a, 0.06).is_err());
    }

    #[test]
    fn nan_reports_divergence() {
        let mut w = world(vec![agent_at(&PoseParams::rest(Vector3::new(
            0.0, 0.0, 3.0,
        )))]);
        let mut a = holds(&w);
        a[0].root_force = Vector3::new(f64::NAN, 0.0, 0.0);
        assert!(matches!(
            w.step_mut(&a, 0.01),
            Err(Error::SimDiverged { agent: 0, .. })
        ));
    }
}
