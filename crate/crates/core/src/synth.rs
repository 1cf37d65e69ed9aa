//! Seeded synthetic scenarios with analytically known properties.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use nalgebra::{UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::kinematics::{
    joint_positions, MotionSequence, PersonTrack, PoseParams, ShapeVector, Skeleton,
};
use crate::{Error, Result, J_BODY};

pub const DEFAULT_FRAMES: usize = 150;
pub const DEFAULT_FPS: f64 = 30.0;

/// Depth of the torso overlap in `static-overlap` (m).
pub const STATIC_OVERLAP: f64 = 0.05;
/// Depth of the feet below ground in `ground-sink` (m).
pub const SINK_DEPTH: f64 = 0.03;
/// Horizontal displacement per frame in `slide` (m).
pub const SLIDE_STEP: f64 = 0.005;

const ARM_DROP: f64 = 70.0 * PI / 180.0;
const L_SHOULDER: usize = 14;
const R_SHOULDER: usize = 15;
const SPINE2: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    Standing,
    WalkPast,
    StaticOverlap,
    DynamicShove,
    GroundSink,
    Slide,
}

impl Scenario {
    pub const ALL: [Scenario; 6] = [
        Scenario::Standing,
        Scenario::WalkPast,
        Scenario::StaticOverlap,
        Scenario::DynamicShove,
        Scenario::GroundSink,
        Scenario::Slide,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Standing => "standing",
            Scenario::WalkPast => "walk-past",
            Scenario::StaticOverlap => "static-overlap",
            Scenario::DynamicShove => "dynamic-shove",
            Scenario::GroundSink => "ground-sink",
            Scenario::Slide => "slide",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| Error::UnknownScenario(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthParams {
    pub seed: u64,
    pub frames: usize,
    pub fps: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            seed: 0,
            frames: DEFAULT_FRAMES,
            fps: DEFAULT_FPS,
        }
    }
}

/// Periodic walking gait with planted stance feet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gait {
    /// Forward speed (m/s).
    pub speed: f64,
    /// Stride period (s).
    pub period: f64,
    /// Fraction of the period a foot is planted.
    pub stance: f64,
    /// Peak swing height (m).
    pub lift: f64,
    /// Pelvis height (m).
    pub root_height: f64,
}

impl Default for Gait {
    fn default() -> Self {
        Gait {
            speed: 1.0,
            period: 1.0,
            stance: 0.6,
            lift: 0.08,
            root_height: 0.88,
        }
    }
}

fn yaw_quat(yaw: f64) -> UnitQuaternion<f64> {
    UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw)
}

fn heading(yaw: f64) -> Vector3<f64> {
    yaw_quat(yaw) * Vector3::y()
}

fn arms_down(body: &mut [Vector3<f64>]) {
    body[L_SHOULDER] = Vector3::new(0.0, ARM_DROP, 0.0);
    body[R_SHOULDER] = Vector3::new(0.0, -ARM_DROP, 0.0);
}

fn lowest_point(skel: &Skeleton, pose: &PoseParams) -> f64 {
    skel.capsules(&joint_positions(skel, pose))
        .iter()
        .map(|c| c.lowest_z())
        .fold(f64::INFINITY, f64::min)
}

/// Upright pose at `position.xy`, its lowest point `dz` above `position.z`.
pub fn standing_pose(skel: &Skeleton, position: Vector3<f64>, yaw: f64, dz: f64) -> PoseParams {
    let mut body = vec![Vector3::zeros(); J_BODY];
    arms_down(&mut body);
    let mut pose = PoseParams {
        root_orient: Vector3::new(0.0, 0.0, yaw),
        body_pose: body,
        root_trans: Vector3::new(position.x, position.y, 0.0),
    };
    let floor = position.z + dz;
    pose.root_trans.z = floor - lowest_point(skel, &pose);
    while lowest_point(skel, &pose) < floor {
        pose.root_trans.z = pose.root_trans.z.next_up();
    }
    pose.canonical()
}

/// Two standing agents back to back whose upper-torso capsules overlap by
/// `overlap`, centred at `offset` and turned by `yaw`.
pub fn back_to_back(
    skel: &Skeleton,
    overlap: f64,
    offset: Vector3<f64>,
    yaw: f64,
) -> Vec<PoseParams> {
    let gap = 2.0 * skel.radius(SPINE2) - overlap;
    let dir = heading(yaw);
    let a = standing_pose(skel, offset + dir * (gap / 2.0), yaw, 0.0);
    let b = standing_pose(skel, offset - dir * (gap / 2.0), yaw + PI, 0.0);
    vec![a, b]
}

/// Planar two-link IK; returns (hip, knee) flexion angles about the lateral
/// axis for an ankle at `(dy, dz)` from the hip.
fn leg_ik(thigh: f64, shin: f64, dy: f64, dz: f64) -> (f64, f64) {
    let reach = (dy * dy + dz * dz).sqrt().clamp(1e-9, thigh + shin - 1e-9);
    let cos_knee = (thigh * thigh + shin * shin - reach * reach) / (2.0 * thigh * shin);
    let flex = PI - cos_knee.clamp(-1.0, 1.0).acos();
    let cos_hip = (thigh * thigh + reach * reach - shin * shin) / (2.0 * thigh * reach);
    let hip = dy.atan2(-dz) + cos_hip.clamp(-1.0, 1.0).acos();
    (hip, flex)
}

/// Along-path position and lift of a foot whose cycle is shifted by `phase`.
fn foot_track(gait: &Gait, t: f64, phase: f64) -> (f64, f64) {
    let tau = t / gait.period + phase;
    let k = tau.floor();
    let u = tau - k;
    let plant = gait.speed * gait.period * (k - phase + gait.stance / 2.0);
    if u < gait.stance {
        return (plant, 0.0);
    }
    let w = (u - gait.stance) / (1.0 - gait.stance);
    let stride = gait.speed * gait.period;
    let along = plant + stride * (w - (TAU * w).sin() / TAU);
    let lift = gait.lift * (1.0 - (TAU * w).cos()) / 2.0;
    (along, lift)
}

/// Walking pose at time `t` for a walker starting at `start` with heading `yaw`.
pub fn walking_pose(
    skel: &Skeleton,
    gait: &Gait,
    start: Vector3<f64>,
    yaw: f64,
    t: f64,
) -> PoseParams {
    let mut body = vec![Vector3::zeros(); J_BODY];
    arms_down(&mut body);
    let root_along = gait.speed * t;
    let clearance = skel.radius(7).max(skel.radius(9)) + 5e-4;
    for (hip, knee, ankle, phase) in [(1usize, 4usize, 7usize, 0.0), (2, 5, 8, 0.5)] {
        let (along, lift) = foot_track(gait, t, phase);
        let hip_off = skel.offset(hip);
        let dy = along - root_along - hip_off.y;
        let dz = clearance + lift - gait.root_height - hip_off.z;
        let (a, flex) = leg_ik(skel.offset(knee).norm(), skel.offset(ankle).norm(), dy, dz);
        body[hip - 1] = Vector3::new(a, 0.0, 0.0);
        body[knee - 1] = Vector3::new(-flex, 0.0, 0.0);
        body[ankle - 1] = Vector3::new(flex - a, 0.0, 0.0);
    }
    let root = start + heading(yaw) * root_along;
    PoseParams {
        root_orient: Vector3::new(0.0, 0.0, yaw),
        body_pose: body,
        root_trans: Vector3::new(root.x, root.y, start.z + gait.root_height),
    }
    .canonical()
}

fn random_shape(rng: &mut ChaCha8Rng) -> ShapeVector {
    let mut beta = [0.0; 16];
    for b in beta.iter_mut().skip(1) {
        *b = rng.random_range(-1.0..1.0);
    }
    ShapeVector(beta)
}

fn track(shape: ShapeVector, frames: Vec<PoseParams>) -> PersonTrack {
    PersonTrack { shape, frames }
}

/// Generates a scenario from the (unscaled) template; every shape has β₀ = 0,
/// so each person's skeleton equals the template.
pub fn generate(
    scenario: Scenario,
    params: &SynthParams,
    template: &Skeleton,
) -> Result<MotionSequence> {
    if params.frames == 0 {
        return Err(Error::EmptySequence);
    }
    if !(params.fps.is_finite() && params.fps > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "fps must be positive, got {}",
            params.fps
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let n = params.frames;
    let dt = 1.0 / params.fps;
    let skel = template;
    let mut jitter = |s: f64| rng.random_range(-s..s);
    let persons = match scenario {
        Scenario::Standing | Scenario::GroundSink => {
            let dz = if scenario == Scenario::GroundSink {
                -SINK_DEPTH
            } else {
                0.0
            };
            let poses: Vec<PoseParams> = [-1.0, 1.0]
                .into_iter()
                .map(|x| {
                    let pos = Vector3::new(x + jitter(0.1), jitter(0.1), 0.0);
                    standing_pose(skel, pos, jitter(PI), dz)
                })
                .collect();
            poses
                .into_iter()
                .map(|p| (p.clone(), vec![p; n]))
                .collect::<Vec<_>>()
        }
        Scenario::StaticOverlap => {
            let offset = Vector3::new(jitter(0.5), jitter(0.5), 0.0);
            back_to_back(skel, STATIC_OVERLAP, offset, jitter(PI))
                .into_iter()
                .map(|p| (p.clone(), vec![p; n]))
                .collect()
        }
        Scenario::Slide => {
            let poses: Vec<(PoseParams, Vector3<f64>)> = [-1.0, 1.0]
                .into_iter()
                .map(|x| {
                    let pos = Vector3::new(x + jitter(0.1), jitter(0.1), 0.0);
                    let dir = heading(jitter(PI));
                    (standing_pose(skel, pos, jitter(PI), 0.0), dir)
                })
                .collect();
            poses
                .into_iter()
                .map(|(p, dir)| {
                    let frames = (0..n)
                        .map(|t| {
                            let mut q = p.clone();
                            q.root_trans += dir * (SLIDE_STEP * t as f64);
                            q
                        })
                        .collect();
                    (p, frames)
                })
                .collect()
        }
        Scenario::WalkPast => {
            let gait = Gait {
                speed: 1.0 + jitter(0.1),
                ..Gait::default()
            };
            let half = gait.speed * n as f64 * dt / 2.0;
            let lanes = [(-0.75, 0.0), (0.75, PI)];
            lanes
                .into_iter()
                .map(|(x, yaw)| {
                    let start = Vector3::new(x, 0.0, 0.0) - heading(yaw) * (half + jitter(0.2));
                    let frames: Vec<PoseParams> = (0..n)
                        .map(|t| walking_pose(skel, &gait, start, yaw, t as f64 * dt))
                        .collect();
                    (frames[0].clone(), frames)
                })
                .collect()
        }
        Scenario::DynamicShove => {
            let gait = Gait {
                speed: 1.0 + jitter(0.1),
                ..Gait::default()
            };
            let yaw = jitter(PI);
            let half = gait.speed * n as f64 * dt / 2.0;
            let centre = Vector3::new(jitter(0.5), jitter(0.5), 0.0);
            let start = centre - heading(yaw) * half;
            let walker: Vec<PoseParams> = (0..n)
                .map(|t| walking_pose(skel, &gait, start, yaw, t as f64 * dt))
                .collect();
            let stander = standing_pose(skel, centre, yaw + PI, 0.0);
            vec![
                (walker[0].clone(), walker),
                (stander.clone(), vec![stander; n]),
            ]
        }
    };
    let persons = persons
        .into_iter()
        .map(|(_, frames)| track(random_shape(&mut rng), frames))
        .collect();
    MotionSequence::new(params.fps, persons)
}
