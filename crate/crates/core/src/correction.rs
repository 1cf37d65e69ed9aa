//! Autoregressive physics-aware correction with the loop-N refinement.
//!
//! Every agent is initialized from the first kinematic frame. For each later
//! frame the reference pose is held fixed while the world runs `loop_n`
//! control iterations, each a fresh [`track`] call followed by `substeps`
//! physics steps; only the state after the last iteration becomes the output
//! frame.

use std::io::Write;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::control::{track, ControllerGains};
use crate::dynamics::{
    state_from_pose, Action, Agent, AgentModel, PhysicsParams, WorldState, MAX_DT,
};
use crate::kinematics::{
    build_skeleton, canonicalize_axis_angle, shortest_arc, MotionSequence, PersonTrack, PoseParams,
    Skeleton,
};
use crate::{Error, Result, J_BODY};

pub const MAX_LOOP_N: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DivergencePolicy {
    Abort,
    ResetToReference,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionConfig {
    /// Control iterations per video frame with the reference held fixed.
    pub loop_n: usize,
    /// Physics steps per control iteration.
    pub substeps: usize,
    /// Overrides the sequence frame rate when set.
    pub fps: Option<f64>,
    pub gains: ControllerGains,
    pub physics: PhysicsParams,
    pub ground_height: f64,
    /// Record the per-frame dynamics stream.
    pub diagnostics: bool,
    pub divergence: DivergencePolicy,
    /// Solver wall-clock budget per frame; exceeding it counts as divergence.
    pub frame_budget: Option<Duration>,
}

impl Default for CorrectionConfig {
    fn default() -> Self {
        CorrectionConfig {
            loop_n: 2,
            substeps: 15,
            fps: None,
            gains: ControllerGains::default(),
            physics: PhysicsParams::default(),
            ground_height: 0.0,
            diagnostics: false,
            divergence: DivergencePolicy::Abort,
            frame_budget: Some(Duration::from_millis(200)),
        }
    }
}

impl CorrectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_LOOP_N).contains(&self.loop_n) {
            return Err(Error::InvalidConfig(format!(
                "loop_n must lie in [1, {MAX_LOOP_N}], got {}",
                self.loop_n
            )));
        }
        if self.substeps == 0 {
            return Err(Error::InvalidConfig("substeps must be at least 1".into()));
        }
        if let Some(fps) = self.fps {
            if !(fps.is_finite() && fps > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "fps must be positive, got {fps}"
                )));
            }
        }
        let p = &self.physics;
        if !(p.pen_tol.is_finite() && p.pen_tol > 0.0) {
            return Err(Error::InvalidConfig("pen_tol must be positive".into()));
        }
        if p.solver_iterations == 0 {
            return Err(Error::InvalidConfig(
                "solver_iterations must be at least 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&p.friction) {
            return Err(Error::InvalidConfig("friction must lie in [0, 1]".into()));
        }
        if !self.ground_height.is_finite() {
            return Err(Error::InvalidConfig("ground_height must be finite".into()));
        }
        self.gains.validate()
    }

    pub fn dt(&self, sequence_fps: f64) -> f64 {
        1.0 / (self.fps.unwrap_or(sequence_fps) * self.substeps as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRow {
    pub frame: usize,
    pub agent: usize,
    pub max_ground_depth_m: f64,
    pub max_inter_depth_m: f64,
    pub tracking_err_rad: f64,
    pub residual_force_n: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsRow {
    pub frame: usize,
    pub max_depth_m: f64,
    pub residual_force_n: f64,
    pub energy_j: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DiagnosticsLog {
    pub loop_n: usize,
    pub substeps: usize,
    pub fps: f64,
    pub rows: Vec<DiagnosticsRow>,
    pub dynamics: Vec<DynamicsRow>,
    /// Divergence resets, one message per event.
    pub events: Vec<String>,
}

impl DiagnosticsLog {
    fn header(&self) -> String {
        format!(
            "# loop_n={} substeps={} fps={}",
            self.loop_n, self.substeps, self.fps
        )
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", self.header())?;
        writeln!(
            w,
            "frame,agent,max_ground_depth_m,max_inter_depth_m,tracking_err_rad,residual_force_N"
        )?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{:.9e},{:.9e},{:.9e},{:.9e}",
                r.frame,
                r.agent,
                r.max_ground_depth_m,
                r.max_inter_depth_m,
                r.tracking_err_rad,
                r.residual_force_n
            )?;
        }
        Ok(())
    }

    pub fn write_dynamics_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", self.header())?;
        writeln!(w, "frame,max_depth_m,residual_force_N,energy_J")?;
        for r in &self.dynamics {
            writeln!(
                w,
                "{},{:.9e},{:.9e},{:.9e}",
                r.frame, r.max_depth_m, r.residual_force_n, r.energy_j
            )?;
        }
        Ok(())
    }
}

/// Reads every agent's pose out of the world, canonicalizing rotations.
pub fn poses_from_world(world: &WorldState) -> Vec<PoseParams> {
    world
        .agents
        .iter()
        .map(|a| a.state.as_pose().map_rotations(canonicalize_axis_angle))
        .collect()
}

/// Runs `loop_n` control iterations toward fixed references and returns the
/// actions of the last iteration.
pub fn loop_n_advance_mut(
    world: &mut WorldState,
    references: &[PoseParams],
    config: &CorrectionConfig,
    dt: f64,
) -> Result<Vec<Action>> {
    if config.loop_n == 0 {
        return Err(Error::InvalidConfig("loop_n must be at least 1".into()));
    }
    if references.len() != world.num_agents() {
        return Err(Error::Dimension(format!(
            "{} references for {} agents",
            references.len(),
            world.num_agents()
        )));
    }
    let mut actions = Vec::new();
    for _ in 0..config.loop_n {
        actions = world
            .agents
            .iter()
            .zip(references)
            .map(|(a, r)| track(&a.state, r, &a.model.shape, &world.gains))
            .collect();
        for _ in 0..config.substeps {
            world.step_mut(&actions, dt)?;
        }
    }
    Ok(actions)
}

/// Functional form of [`loop_n_advance_mut`].
pub fn loop_n_advance(
    world: &WorldState,
    references: &[PoseParams],
    config: &CorrectionConfig,
    dt: f64,
) -> Result<WorldState> {
    let mut next = world.clone();
    loop_n_advance_mut(&mut next, references, config, dt)?;
    Ok(next)
}

/// Builds agent models for every person of a sequence.
pub fn agent_models(
    kinematic: &MotionSequence,
    template: &Skeleton,
    armature: f64,
) -> Result<Vec<Arc<AgentModel>>> {
    kinematic
        .persons
        .iter()
        .map(|p| {
            let skel = build_skeleton(&p.shape, template)?;
            Ok(Arc::new(AgentModel::new(skel, p.shape, armature)))
        })
        .collect()
}

/// A world seeded from poses at rest, with contacts resolved once.
pub fn world_from_poses(
    models: &[Arc<AgentModel>],
    poses: &[PoseParams],
    config: &CorrectionConfig,
) -> WorldState {
    let agents = models
        .iter()
        .zip(poses)
        .map(|(m, p)| Agent {
            model: m.clone(),
            state: state_from_pose(p, None, 1.0),
        })
        .collect();
    let mut world = WorldState::new(
        agents,
        config.ground_height,
        config.physics.clone(),
        config.gains.clone(),
    );
    if world.params.contacts_enabled {
        world.enforce_contacts();
    }
    world
}

/// Stepwise driver; its world can be checkpointed and resumed.
#[derive(Debug, Clone)]
pub struct Corrector<'a> {
    kinematic: &'a MotionSequence,
    config: CorrectionConfig,
    models: Vec<Arc<AgentModel>>,
    world: WorldState,
    frame: usize,
    dt: f64,
    last_actions: Vec<Action>,
}

impl<'a> Corrector<'a> {
    /// Validates inputs and seeds the world from kinematic frame 0.
    pub fn new(
        kinematic: &'a MotionSequence,
        template: &Skeleton,
        config: CorrectionConfig,
    ) -> Result<Self> {
        config.validate()?;
        kinematic.validate()?;
        if kinematic.num_frames() == 0 {
            return Err(Error::EmptySequence);
        }
        let models = agent_models(kinematic, template, config.physics.armature)?;
        let world = world_from_poses(&models, &kinematic.frame(0), &config);
        Corrector::resume(kinematic, config, models, world, 0)
    }

    /// Continues from a checkpointed world whose last output frame is `frame`.
    pub fn resume(
        kinematic: &'a MotionSequence,
        config: CorrectionConfig,
        models: Vec<Arc<AgentModel>>,
        world: WorldState,
        frame: usize,
    ) -> Result<Self> {
        config.validate()?;
        let dt = config.dt(kinematic.fps);
        if dt > MAX_DT {
            return Err(Error::InvalidConfig(format!(
                "physics step {dt} s exceeds {MAX_DT} s; raise fps or substeps"
            )));
        }
        let last_actions = world
            .agents
            .iter()
            .map(|a| Action::hold(&a.state))
            .collect();
        Ok(Corrector {
            kinematic,
            config,
            models,
            world,
            frame,
            dt,
            last_actions,
        })
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    pub fn models(&self) -> &[Arc<AgentModel>] {
        &self.models
    }

    /// Index of the frame the world currently represents.
    pub fn frame(&self) -> usize {
        self.frame
    }

    pub fn is_done(&self) -> bool {
        self.frame + 1 >= self.kinematic.num_frames()
    }

    pub fn last_actions(&self) -> &[Action] {
        &self.last_actions
    }

    pub fn poses(&self) -> Vec<PoseParams> {
        poses_from_world(&self.world)
    }

    /// Advances to the next frame; returns the events raised on the way.
    pub fn advance(&mut self) -> Result<Option<String>> {
        let next = self.frame + 1;
        let references = self.kinematic.frame(next);
        let start = Instant::now();
        let mut world = self.world.clone();
        let outcome = loop_n_advance_mut(&mut world, &references, &self.config, self.dt).and_then(
            |actions| match self.config.frame_budget {
                Some(budget) if start.elapsed() > budget => Err(Error::SimDiverged {
                    frame: next,
                    agent: 0,
                    reason: format!(
                        "frame solver time {:?} exceeded budget {budget:?}",
                        start.elapsed()
                    ),
                }),
                _ => Ok(actions),
            },
        );
        let event = match outcome {
            Ok(actions) => {
                self.world = world;
                self.last_actions = actions;
                None
            }
            Err(Error::SimDiverged { agent, reason, .. }) => match self.config.divergence {
                DivergencePolicy::Abort => {
                    return Err(Error::SimDiverged {
                        frame: next,
                        agent,
                        reason,
                    })
                }
                DivergencePolicy::ResetToReference => {
                    let mut reset = world_from_poses(&self.models, &references, &self.config);
                    reset.time = self.world.time
                        + self.dt * (self.config.substeps * self.config.loop_n) as f64;
                    reset.step_index = self.world.step_index;
                    self.world = reset;
                    self.last_actions = self
                        .world
                        .agents
                        .iter()
                        .map(|a| Action::hold(&a.state))
                        .collect();
                    Some(format!(
                        "frame {next}: agent {agent} reset to reference ({reason})"
                    ))
                }
            },
            Err(e) => return Err(e),
        };
        self.frame = next;
        Ok(event)
    }
}

/// Mean shortest-arc joint error (rad) between a state pose and a reference.
pub fn joint_tracking_error(pose: &PoseParams, reference: &PoseParams) -> f64 {
    pose.body_pose
        .iter()
        .zip(&reference.body_pose)
        .map(|(a, b)| shortest_arc(a, b).norm())
        .sum::<f64>()
        / J_BODY as f64
}

fn record_frame(
    log: &mut DiagnosticsLog,
    corrector: &Corrector,
    reference: &[PoseParams],
    diagnostics: bool,
) {
    let world = corrector.world();
    let contacts = world.detect();
    let poses = corrector.poses();
    let frame = corrector.frame();
    let mut max_force: f64 = 0.0;
    for (i, (pose, r)) in poses.iter().zip(reference).enumerate() {
        let force = corrector.last_actions()[i].root_force.norm();
        max_force = max_force.max(force);
        log.rows.push(DiagnosticsRow {
            frame,
            agent: i,
            max_ground_depth_m: contacts.agent_ground_depth(i),
            max_inter_depth_m: contacts.agent_inter_depth(i),
            tracking_err_rad: joint_tracking_error(pose, r),
            residual_force_n: force,
        });
    }
    if diagnostics {
        log.dynamics.push(DynamicsRow {
            frame,
            max_depth_m: contacts.max_depth(),
            residual_force_n: max_force,
            energy_j: world.energy(),
        });
    }
}

/// Corrects a whole kinematic sequence.
pub fn correct_sequence(
    kinematic: &MotionSequence,
    template: &Skeleton,
    config: &CorrectionConfig,
) -> Result<(MotionSequence, DiagnosticsLog)> {
    if kinematic.num_frames() < 2 {
        return Err(if kinematic.num_frames() == 0 {
            Error::EmptySequence
        } else {
            Error::TooShort {
                needed: 2,
                got: kinematic.num_frames(),
            }
        });
    }
    let mut corrector = Corrector::new(kinematic, template, config.clone())?;
    let mut log = DiagnosticsLog {
        loop_n: config.loop_n,
        substeps: config.substeps,
        fps: config.fps.unwrap_or(kinematic.fps),
        ..DiagnosticsLog::default()
    };
    let mut frames: Vec<Vec<PoseParams>> = vec![corrector.poses()];
    record_frame(
        &mut log,
        &corrector,
        &kinematic.frame(0),
        config.diagnostics,
    );
    while !corrector.is_done() {
        if let Some(event) = corrector.advance()? {
            log.events.push(event);
        }
        frames.push(corrector.poses());
        record_frame(
            &mut log,
            &corrector,
            &kinematic.frame(corrector.frame()),
            config.diagnostics,
        );
    }
    let persons = kinematic
        .persons
        .iter()
        .enumerate()
        .map(|(i, p)| PersonTrack {
            shape: p.shape,
            frames: frames.iter().map(|f| f[i].clone()).collect(),
        })
        .collect();
    Ok((
        MotionSequence {
            fps: kinematic.fps,
            persons,
        },
        log,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::{forward_kinematics, ShapeVector};
    use nalgebra::Vector3;

    fn standing_sequence(frames: usize) -> MotionSequence {
        let skel = Skeleton::default_template();
        let pose = crate::synth::standing_pose(&skel, Vector3::zeros(), 0.0, 0.0);
        MotionSequence::new(
            30.0,
            vec![PersonTrack {
                shape: ShapeVector::default(),
                frames: vec![pose; frames],
            }],
        )
        .unwrap()
    }

    #[test]
    fn poses_round_trip_through_world() {
        let skel = Skeleton::default_template();
        let mut pose = crate::synth::standing_pose(&skel, Vector3::new(0.3, -1.0, 0.0), 0.7, 0.0);
        pose.body_pose[3] = Vector3::new(0.0, 0.0, 3.5);
        let canonical = pose.canonical();
        let models = vec![Arc::new(AgentModel::new(
            skel,
            ShapeVector::default(),
            0.02,
        ))];
        let mut cfg = CorrectionConfig::default();
        cfg.physics.contacts_enabled = false;
        let world = world_from_poses(&models, &[pose], &cfg);
        let out = &poses_from_world(&world)[0];
        assert_eq!(out, &canonical);
        let expected = Vector3::new(0.0, 0.0, -(2.0 * std::f64::consts::PI - 3.5));
        assert!((out.body_pose[3] - expected).norm() < 1e-12);
    }

    #[test]
    fn loop_one_equals_single_batch() {
        let seq = standing_sequence(3);
        let template = Skeleton::default_template();
        let cfg = CorrectionConfig {
            loop_n: 1,
            ..CorrectionConfig::default()
        };
        let models = agent_models(&seq, &template, cfg.physics.armature).unwrap();
        let world = world_from_poses(&models, &seq.frame(0), &cfg);
        let dt = cfg.dt(30.0);
        let a = loop_n_advance(&world, &seq.frame(1), &cfg, dt).unwrap();
        let mut b = world.clone();
        let actions: Vec<_> = b
            .agents
            .iter()
            .zip(seq.frame(1))
            .map(|(ag, r)| track(&ag.state, &r, &ag.model.shape, &b.gains))
            .collect();
        for _ in 0..cfg.substeps {
            b.step_mut(&actions, dt).unwrap();
        }
        assert_eq!(a, b);
    }

    #[test]
    fn equilibrium_is_preserved_for_any_loop_n() {
        let seq = standing_sequence(2);
        let template = Skeleton::default_template();
        for loop_n in [1, 3, 7] {
            let cfg = CorrectionConfig {
                loop_n,
                ..CorrectionConfig::default()
            };
            let models = agent_models(&seq, &template, cfg.physics.armature).unwrap();
            let world = world_from_poses(&models, &seq.frame(0), &cfg);
            let next = loop_n_advance(&world, &seq.frame(1), &cfg, cfg.dt(30.0)).unwrap();
            for (a, b) in world.agents.iter().zip(&next.agents) {
                for (x, y) in a.state.q.iter().zip(&b.state.q) {
                    assert!((x - y).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn static_standing_is_preserved() {
        let seq = standing_sequence(30);
        let template = Skeleton::default_template();
        let (out, log) = correct_sequence(&seq, &template, &CorrectionConfig::default()).unwrap();
        assert_eq!(out.num_frames(), 30);
        assert_eq!(log.rows.len(), 30);
        for (a, b) in out.persons[0].frames.iter().zip(&seq.persons[0].frames) {
            let pa = forward_kinematics(&template, a).unwrap().positions;
            let pb = forward_kinematics(&template, b).unwrap().positions;
            for (x, y) in pa.iter().zip(&pb) {
                assert!((x - y).norm() <= 0.02);
            }
        }
    }

    fn assert_compliant(out: &MotionSequence, template: &Skeleton, tol: f64) {
        let skels = out.skeletons(template).unwrap();
        for t in 0..out.num_frames() {
            let caps: Vec<_> = out
                .frame(t)
                .iter()
                .zip(&skels)
                .map(|(p, s)| s.capsules(&forward_kinematics(s, p).unwrap().positions))
                .collect();
            let c = crate::collision::detect_contacts(&caps, 0.0);
            assert!(
                c.max_ground_depth() <= tol,
                "frame {t}: ground {}",
                c.max_ground_depth()
            );
            assert!(
                c.max_inter_depth() <= tol,
                "frame {t}: inter {}",
                c.max_inter_depth()
            );
        }
    }

    fn scenario(sc: crate::synth::Scenario, frames: usize, seed: u64) -> MotionSequence {
        let params = crate::synth::SynthParams {
            seed,
            frames,
            ..Default::default()
        };
        crate::synth::generate(sc, &params, &Skeleton::default_template()).unwrap()
    }

    #[test]
    fn overlap_and_sink_are_resolved() {
        use crate::synth::Scenario;
        let template = Skeleton::default_template();
        for sc in [Scenario::StaticOverlap, Scenario::GroundSink] {
            let seq = scenario(sc, 20, 3);
            let (out, _) = correct_sequence(&seq, &template, &CorrectionConfig::default()).unwrap();
            assert_eq!(out.num_frames(), seq.num_frames());
            assert_eq!(out.num_persons(), seq.num_persons());
            assert_compliant(&out, &template, 1e-3);
        }
    }

    #[test]
    fn first_frame_is_resolved_reference() {
        let template = Skeleton::default_template();
        let seq = scenario(crate::synth::Scenario::StaticOverlap, 4, 1);
        let cfg = CorrectionConfig::default();
        let (out, _) = correct_sequence(&seq, &template, &cfg).unwrap();
        let models = agent_models(&seq, &template, cfg.physics.armature).unwrap();
        let world = world_from_poses(&models, &seq.frame(0), &cfg);
        assert_eq!(out.frame(0), poses_from_world(&world));
    }

    #[test]
    fn more_loop_iterations_track_closer() {
        let skel = Skeleton::default_template();
        let start = crate::synth::standing_pose(&skel, Vector3::zeros(), 0.0, 0.0);
        let mut reference = start.clone();
        reference.body_pose[14].y -= 0.5;
        reference.body_pose[16] = Vector3::new(0.0, 0.0, 0.6);
        reference.body_pose[3] = Vector3::new(0.2, 0.0, 0.0);
        let models = vec![Arc::new(AgentModel::new(
            skel,
            ShapeVector::default(),
            0.02,
        ))];
        let error_after = |loop_n| {
            let cfg = CorrectionConfig {
                loop_n,
                ..CorrectionConfig::default()
            };
            let world = world_from_poses(&models, std::slice::from_ref(&start), &cfg);
            let next = loop_n_advance(&world, &[reference.clone()], &cfg, cfg.dt(30.0)).unwrap();
            joint_tracking_error(&poses_from_world(&next)[0], &reference)
        };
        assert!(error_after(4) <= error_after(1));
    }

    #[test]
    fn checkpoint_restart_is_bit_identical() {
        let template = Skeleton::default_template();
        let seq = scenario(crate::synth::Scenario::DynamicShove, 40, 2);
        let cfg = CorrectionConfig {
            frame_budget: None,
            ..CorrectionConfig::default()
        };
        let (full, _) = correct_sequence(&seq, &template, &cfg).unwrap();

        let mut first = Corrector::new(&seq, &template, cfg.clone()).unwrap();
        while first.frame() < 17 {
            first.advance().unwrap();
        }
        let checkpoint = first.world().clone();
        let models = first.models().to_vec();
        drop(first);
        let mut resumed = Corrector::resume(&seq, cfg, models, checkpoint, 17).unwrap();
        while !resumed.is_done() {
            resumed.advance().unwrap();
            assert_eq!(resumed.poses(), full.frame(resumed.frame()));
        }
    }

    #[test]
    fn agent_labels_are_equivariant() {
        let template = Skeleton::default_template();
        let seq = scenario(crate::synth::Scenario::WalkPast, 30, 4);
        let mut swapped = seq.clone();
        swapped.persons.reverse();
        let cfg = CorrectionConfig::default();
        let (a, _) = correct_sequence(&seq, &template, &cfg).unwrap();
        let (b, _) = correct_sequence(&swapped, &template, &cfg).unwrap();
        assert_eq!(a.persons[0], b.persons[1]);
        assert_eq!(a.persons[1], b.persons[0]);
    }

    #[test]
    fn rejects_short_and_bad_config() {
        let template = Skeleton::default_template();
        let seq = standing_sequence(1);
        assert!(matches!(
            correct_sequence(&seq, &template, &CorrectionConfig::default()),
            Err(Error::TooShort { .. })
        ));
        let seq = standing_sequence(3);
        let cfg = CorrectionConfig {
            loop_n: 17,
            ..CorrectionConfig::default()
        };
        assert!(matches!(
            correct_sequence(&seq, &template, &cfg),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn diagnostics_header_records_loop_n() {
        let seq = standing_sequence(3);
        let (_, log) = correct_sequence(
            &seq,
            &Skeleton::default_template(),
            &CorrectionConfig::default(),
        )
        .unwrap();
        let mut buf = Vec::new();
        log.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# loop_n=2 "));
        assert!(text.lines().nth(1).unwrap().starts_with("frame,agent,"));
    }
}
