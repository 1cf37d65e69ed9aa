//! Pose parameters, shape-conditioned capsule skeletons and forward kinematics.

use std::f64::consts::PI;

use nalgebra::{Rotation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::collision::Capsule;
use crate::{Error, Result, J_BODY, NUM_JOINTS, SHAPE_DIM};

/// Tissue density used to derive bone masses from capsule volumes (kg/m³).
pub const BODY_DENSITY: f64 = 1000.0;

/// Bounds applied to shape coefficients on ingest.
pub const SHAPE_COEFF_LIMIT: f64 = 5.0;

/// Joint names of the 23-joint layout, in topological order.
pub const JOINT_NAMES: [&str; NUM_JOINTS] = [
    "pelvis",
    "l_hip",
    "r_hip",
    "spine1",
    "l_knee",
    "r_knee",
    "spine2",
    "l_ankle",
    "r_ankle",
    "l_foot",
    "r_foot",
    "neck",
    "l_collar",
    "r_collar",
    "head",
    "l_shoulder",
    "r_shoulder",
    "l_elbow",
    "r_elbow",
    "l_wrist",
    "r_wrist",
    "l_hand",
    "r_hand",
];

pub const LEFT_ANKLE: usize = 7;
pub const RIGHT_ANKLE: usize = 8;
/// Joints whose height and sliding define foot contact.
pub const FOOT_JOINTS: [usize; 2] = [LEFT_ANKLE, RIGHT_ANKLE];

/// Gain group of an actuated joint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JointGroup {
    Torso,
    Limb,
    Extremity,
}

impl JointGroup {
    pub const ALL: [JointGroup; 3] = [JointGroup::Torso, JointGroup::Limb, JointGroup::Extremity];

    pub fn index(self) -> usize {
        match self {
            JointGroup::Torso => 0,
            JointGroup::Limb => 1,
            JointGroup::Extremity => 2,
        }
    }

    /// Group of body joint `k` (0-based over the `J_BODY` actuated joints).
    pub fn of_body_joint(k: usize) -> JointGroup {
        match JOINT_NAMES[k + 1] {
            "l_hip" | "r_hip" | "spine1" | "spine2" | "neck" | "l_collar" | "r_collar" => {
                JointGroup::Torso
            }
            "l_knee" | "r_knee" | "l_shoulder" | "r_shoulder" | "l_elbow" | "r_elbow" | "head" => {
                JointGroup::Limb
            }
            _ => JointGroup::Extremity,
        }
    }
}

/// Maps an axis-angle vector onto the equivalent one with angle in `[0, π]`.
pub fn canonicalize_axis_angle(v: Vector3<f64>) -> Vector3<f64> {
    canonicalize_with_slack(v, 0.0)
}

/// Like [`canonicalize_axis_angle`], but leaves angles up to `π + slack` alone.
///
/// Used on ingest so values written at finite precision do not flip back and
/// forth across `π` between load/save cycles.
pub(crate) fn canonicalize_with_slack(v: Vector3<f64>, slack: f64) -> Vector3<f64> {
    let theta = v.norm();
    if theta <= PI + slack {
        return v;
    }
    let axis = v / theta;
    let wrapped = theta.rem_euclid(2.0 * PI);
    if wrapped <= PI {
        axis * wrapped
    } else {
        -axis * (2.0 * PI - wrapped)
    }
}

pub fn quat_from_axis_angle(v: &Vector3<f64>) -> UnitQuaternion<f64> {
    UnitQuaternion::from_scaled_axis(*v)
}

pub fn rotation_from_axis_angle(v: &Vector3<f64>) -> Rotation3<f64> {
    quat_from_axis_angle(v).to_rotation_matrix()
}

/// Rotation vector taking orientation `from` to orientation `to`, expressed in
/// the `from` frame, with angle in `[0, π]`.
pub fn shortest_arc(from: &Vector3<f64>, to: &Vector3<f64>) -> Vector3<f64> {
    let delta = quat_from_axis_angle(from).inverse() * quat_from_axis_angle(to);
    delta.scaled_axis()
}

/// One person's pose at one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseParams {
    /// Root orientation, axis-angle (rad).
    pub root_orient: Vector3<f64>,
    /// Per-joint rotations relative to the parent, axis-angle (rad).
    pub body_pose: Vec<Vector3<f64>>,
    /// Root translation in world coordinates (m).
    pub root_trans: Vector3<f64>,
}

impl PoseParams {
    /// Builds a validated pose; every axis-angle is canonicalized.
    pub fn new(
        root_orient: Vector3<f64>,
        body_pose: Vec<Vector3<f64>>,
        root_trans: Vector3<f64>,
    ) -> Result<Self> {
        let pose = PoseParams {
            root_orient,
            body_pose,
            root_trans,
        };
        pose.validate()?;
        Ok(pose.canonical())
    }

    /// Zero rotations at the given root translation.
    pub fn rest(root_trans: Vector3<f64>) -> Self {
        PoseParams {
            root_orient: Vector3::zeros(),
            body_pose: vec![Vector3::zeros(); J_BODY],
            root_trans,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.body_pose.len() != J_BODY {
            return Err(Error::Dimension(format!(
                "body_pose has {} joints, expected {J_BODY}",
                self.body_pose.len()
            )));
        }
        let finite = self.root_orient.iter().all(|x| x.is_finite())
            && self.root_trans.iter().all(|x| x.is_finite())
            && self.body_pose.iter().flatten().all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvalidPose("non-finite component".into()));
        }
        Ok(())
    }

    pub fn canonical(&self) -> Self {
        self.map_rotations(canonicalize_axis_angle)
    }

    pub(crate) fn map_rotations(&self, f: impl Fn(Vector3<f64>) -> Vector3<f64>) -> Self {
        PoseParams {
            root_orient: f(self.root_orient),
            body_pose: self.body_pose.iter().map(|v| f(*v)).collect(),
            root_trans: self.root_trans,
        }
    }
}

/// Per-person shape coefficients, constant over a sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeVector(pub [f64; SHAPE_DIM]);

impl Default for ShapeVector {
    fn default() -> Self {
        ShapeVector([0.0; SHAPE_DIM])
    }
}

impl ShapeVector {
    /// Raw coefficients; only finiteness is checked.
    pub fn new(coeffs: [f64; SHAPE_DIM]) -> Result<Self> {
        let shape = ShapeVector(coeffs);
        shape.validate()?;
        Ok(shape)
    }

    /// Coefficients read from an input file: checked and clamped to ±5.
    pub fn ingest(coeffs: &[f64]) -> Result<Self> {
        let coeffs: [f64; SHAPE_DIM] = coeffs.try_into().map_err(|_| {
            Error::InvalidShape(format!(
                "expected {SHAPE_DIM} coefficients, got {}",
                coeffs.len()
            ))
        })?;
        let shape = ShapeVector::new(coeffs)?;
        Ok(ShapeVector(
            shape
                .0
                .map(|b| b.clamp(-SHAPE_COEFF_LIMIT, SHAPE_COEFF_LIMIT)),
        ))
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(i) = self.0.iter().position(|b| !b.is_finite()) {
            return Err(Error::InvalidShape(format!(
                "coefficient {i} is not finite"
            )));
        }
        Ok(())
    }

    /// Isotropic body scale `1 + 0.05·β₀`, clamped to `[0.7, 1.3]`.
    pub fn scale_factor(&self) -> f64 {
        (1.0 + 0.05 * self.0[0]).clamp(0.7, 1.3)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointSpec {
    pub name: String,
    pub parent: Option<usize>,
    pub offset: [f64; 3],
    pub radius: f64,
}

/// Joint tree with one capsule per bone and derived mass properties.
///
/// Bone `j` spans from the parent of joint `j` to joint `j`; the root bone is
/// a sphere centred on the root joint.
#[derive(Debug, Clone, PartialEq)]
pub struct Skeleton {
    joints: Vec<JointSpec>,
    masses: Vec<f64>,
    /// Principal moments about the bone centre of mass: (transverse, transverse, axial).
    inertia: Vec<Vector3<f64>>,
}

impl Skeleton {
    pub fn from_joints(joints: Vec<JointSpec>) -> Result<Self> {
        if joints.len() != NUM_JOINTS {
            return Err(Error::InvalidSkeleton(format!(
                "expected {NUM_JOINTS} joints, got {}",
                joints.len()
            )));
        }
        for (j, joint) in joints.iter().enumerate() {
            if joint.name != JOINT_NAMES[j] {
                return Err(Error::InvalidSkeleton(format!(
                    "joint {j} is named '{}', expected '{}'",
                    joint.name, JOINT_NAMES[j]
                )));
            }
            match (j, joint.parent) {
                (0, None) => {}
                (0, Some(_)) => {
                    return Err(Error::InvalidSkeleton("root joint has a parent".into()))
                }
                (_, None) => {
                    return Err(Error::InvalidSkeleton(format!("joint {j} has no parent")))
                }
                (_, Some(p)) if p >= j => {
                    return Err(Error::InvalidSkeleton(format!(
                        "joint {j} has parent {p}; parents must precede children"
                    )))
                }
                _ => {}
            }
            if !joint.offset.iter().all(|x| x.is_finite()) {
                return Err(Error::InvalidSkeleton(format!(
                    "joint {j} offset not finite"
                )));
            }
            if !(joint.radius.is_finite() && joint.radius > 0.0) {
                return Err(Error::InvalidSkeleton(format!(
                    "joint {j} radius must be positive"
                )));
            }
        }
        let (masses, inertia) = joints
            .iter()
            .map(|j| capsule_mass_properties(j.radius, Vector3::from(j.offset).norm()))
            .unzip();
        Ok(Skeleton {
            joints,
            masses,
            inertia,
        })
    }

    /// The shipped 23-joint capsule template.
    pub fn default_template() -> Self {
        crate::motion_file::TemplateFile::builtin()
            .into_skeleton()
            .expect("builtin template is valid")
    }

    pub fn num_joints(&self) -> usize {
        self.joints.len()
    }

    pub fn joints(&self) -> &[JointSpec] {
        &self.joints
    }

    pub fn parent(&self, j: usize) -> Option<usize> {
        self.joints[j].parent
    }

    pub fn offset(&self, j: usize) -> Vector3<f64> {
        Vector3::from(self.joints[j].offset)
    }

    pub fn radius(&self, j: usize) -> f64 {
        self.joints[j].radius
    }

    pub fn mass(&self, j: usize) -> f64 {
        self.masses[j]
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn inertia(&self, j: usize) -> Vector3<f64> {
        self.inertia[j]
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    /// Whether `j` lies in the subtree rooted at `ancestor` (inclusive).
    pub fn is_descendant(&self, mut j: usize, ancestor: usize) -> bool {
        loop {
            if j == ancestor {
                return true;
            }
            match self.parent(j) {
                Some(p) => j = p,
                None => return false,
            }
        }
    }

    /// Bone capsules in world space for the given joint positions.
    pub fn capsules(&self, positions: &[Vector3<f64>]) -> Vec<Capsule> {
        (0..self.num_joints())
            .map(|j| {
                let a = self.parent(j).map_or(positions[j], |p| positions[p]);
                Capsule::new(a, positions[j], self.radius(j))
            })
            .collect()
    }

    /// Bone centre of mass for the given joint positions.
    pub fn bone_center(&self, j: usize, positions: &[Vector3<f64>]) -> Vector3<f64> {
        match self.parent(j) {
            Some(p) => 0.5 * (positions[p] + positions[j]),
            None => positions[j],
        }
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.parent(a) == Some(b) || self.parent(b) == Some(a)
    }
}

/// Mass (kg) and principal inertia about the centre of mass of a solid capsule.
fn capsule_mass_properties(radius: f64, length: f64) -> (f64, Vector3<f64>) {
    let r2 = radius * radius;
    let m_cyl = BODY_DENSITY * PI * r2 * length;
    let m_caps = BODY_DENSITY * 4.0 / 3.0 * PI * r2 * radius;
    let axial = m_cyl * r2 / 2.0 + m_caps * 2.0 * r2 / 5.0;
    let transverse = m_cyl * (length * length / 12.0 + r2 / 4.0)
        + m_caps * (2.0 * r2 / 5.0 + length * length / 4.0 + 3.0 * length * radius / 8.0);
    (m_cyl + m_caps, Vector3::new(transverse, transverse, axial))
}

/// Scales the template by the shape's isotropic factor and recomputes masses.
pub fn build_skeleton(shape: &ShapeVector, template: &Skeleton) -> Result<Skeleton> {
    shape.validate()?;
    let s = shape.scale_factor();
    let joints = template
        .joints
        .iter()
        .map(|j| JointSpec {
            name: j.name.clone(),
            parent: j.parent,
            offset: j.offset.map(|x| x * s),
            radius: j.radius * s,
        })
        .collect();
    Skeleton::from_joints(joints)
}

/// World-space joint positions and bone frames.
#[derive(Debug, Clone, PartialEq)]
pub struct FkResult {
    pub positions: Vec<Vector3<f64>>,
    pub frames: Vec<Rotation3<f64>>,
}

pub fn forward_kinematics(skeleton: &Skeleton, pose: &PoseParams) -> Result<FkResult> {
    if pose.body_pose.len() + 1 != skeleton.num_joints() {
        return Err(Error::Dimension(format!(
            "pose has {} body joints, skeleton has {}",
            pose.body_pose.len(),
            skeleton.num_joints() - 1
        )));
    }
    let (positions, quats) = fk_quats(
        skeleton,
        &pose.root_orient,
        &pose.body_pose,
        &pose.root_trans,
    );
    Ok(FkResult {
        positions,
        frames: quats.iter().map(|q| q.to_rotation_matrix()).collect(),
    })
}

/// FK core shared with the simulator; `body` must have `num_joints − 1` entries.
pub(crate) fn fk_quats(
    skeleton: &Skeleton,
    root_orient: &Vector3<f64>,
    body: &[Vector3<f64>],
    root_trans: &Vector3<f64>,
) -> (Vec<Vector3<f64>>, Vec<UnitQuaternion<f64>>) {
    let n = skeleton.num_joints();
    let mut positions = Vec::with_capacity(n);
    let mut frames: Vec<UnitQuaternion<f64>> = Vec::with_capacity(n);
    let root = quat_from_axis_angle(root_orient);
    positions.push(root_trans + root * skeleton.offset(0));
    frames.push(root);
    for j in 1..n {
        let p = skeleton.parent(j).expect("non-root joint has a parent");
        let parent_frame = frames[p];
        positions.push(positions[p] + parent_frame * skeleton.offset(j));
        frames.push(parent_frame * quat_from_axis_angle(&body[j - 1]));
    }
    (positions, frames)
}

/// Joint positions only.
pub(crate) fn joint_positions(skeleton: &Skeleton, pose: &PoseParams) -> Vec<Vector3<f64>> {
    fk_quats(
        skeleton,
        &pose.root_orient,
        &pose.body_pose,
        &pose.root_trans,
    )
    .0
}

#[derive(Debug, Clone, PartialEq)]
pub struct PersonTrack {
    pub shape: ShapeVector,
    pub frames: Vec<PoseParams>,
}

/// `T × N` poses at a fixed frame rate.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionSequence {
    pub fps: f64,
    pub persons: Vec<PersonTrack>,
}

impl MotionSequence {
    pub fn new(fps: f64, persons: Vec<PersonTrack>) -> Result<Self> {
        let seq = MotionSequence { fps, persons };
        seq.validate()?;
        Ok(seq)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(Error::Schema(format!(
                "fps must be positive, got {}",
                self.fps
            )));
        }
        let Some(first) = self.persons.first() else {
            return Err(Error::Schema("sequence has no persons".into()));
        };
        let t = first.frames.len();
        for (i, person) in self.persons.iter().enumerate() {
            if person.frames.len() != t {
                return Err(Error::Schema(format!(
                    "person {i} has {} frames, person 0 has {t}",
                    person.frames.len()
                )));
            }
            person.shape.validate()?;
            for (f, pose) in person.frames.iter().enumerate() {
                pose.validate()
                    .map_err(|e| Error::Schema(format!("person {i}, frame {f}: {e}")))?;
            }
        }
        Ok(())
    }

    pub fn num_frames(&self) -> usize {
        self.persons.first().map_or(0, |p| p.frames.len())
    }

    pub fn num_persons(&self) -> usize {
        self.persons.len()
    }

    pub fn skeletons(&self, template: &Skeleton) -> Result<Vec<Skeleton>> {
        self.persons
            .iter()
            .map(|p| build_skeleton(&p.shape, template))
            .collect()
    }

    /// Poses of every person at frame `t`.
    pub fn frame(&self, t: usize) -> Vec<PoseParams> {
        self.persons.iter().map(|p| p.frames[t].clone()).collect()
    }
}

/// Per-person `T × J` joint positions, indexed `[person][frame][joint]`.
pub type SequenceJoints = Vec<Vec<Vec<Vector3<f64>>>>;

pub fn sequence_joints(seq: &MotionSequence, skeletons: &[Skeleton]) -> Result<SequenceJoints> {
    if skeletons.len() != seq.num_persons() {
        return Err(Error::Dimension(format!(
            "{} skeletons for {} persons",
            skeletons.len(),
            seq.num_persons()
        )));
    }
    seq.persons
        .iter()
        .zip(skeletons)
        .map(|(person, skel)| {
            person
                .frames
                .iter()
                .map(|pose| forward_kinematics(skel, pose).map(|fk| fk.positions))
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn random_pose(seed: u64) -> PoseParams {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut v = || {
            Vector3::new(
                rng.random_range(-1.5..1.5),
                rng.random_range(-1.5..1.5),
                rng.random_range(-1.5..1.5),
            )
        };
        let root = v();
        let body = (0..J_BODY).map(|_| v()).collect();
        let trans = v();
        PoseParams::new(root, body, trans).unwrap()
    }

    #[test]
    fn template_is_a_valid_tree() {
        let skel = Skeleton::default_template();
        assert_eq!(skel.num_joints(), NUM_JOINTS);
        assert!(skel.parent(0).is_none());
        for j in 1..skel.num_joints() {
            assert!(skel.parent(j).unwrap() < j);
            assert!(skel.radius(j) > 0.0 && skel.mass(j) > 0.0);
        }
    }

    #[test]
    fn zero_shape_is_identity() {
        let t = Skeleton::default_template();
        assert_eq!(build_skeleton(&ShapeVector::default(), &t).unwrap(), t);
    }

    #[test]
    fn beta0_two_scales_by_1_1() {
        let t = Skeleton::default_template();
        let mut b = [0.0; SHAPE_DIM];
        b[0] = 2.0;
        let s = build_skeleton(&ShapeVector::new(b).unwrap(), &t).unwrap();
        for j in 0..t.num_joints() {
            assert!((s.offset(j) - t.offset(j) * 1.1).norm() < 1e-12);
            assert!((s.radius(j) - t.radius(j) * 1.1).abs() < 1e-12);
            // Direct recomputation of the capsule volume at the scaled size.
            let (r, l) = (t.radius(j) * 1.1, t.offset(j).norm() * 1.1);
            let direct = BODY_DENSITY * (PI * r * r * l + 4.0 / 3.0 * PI * r * r * r);
            assert!((s.mass(j) - direct).abs() < 1e-9 * direct);
            assert!((s.mass(j) - t.mass(j) * 1.1f64.powi(3)).abs() < 1e-9 * s.mass(j));
        }
    }

    #[test]
    fn huge_beta_clamps_scale() {
        let mut b = [0.0; SHAPE_DIM];
        b[0] = 100.0;
        assert_eq!(ShapeVector::new(b).unwrap().scale_factor(), 1.3);
        b[0] = -100.0;
        assert_eq!(ShapeVector::new(b).unwrap().scale_factor(), 0.7);
        // Ingest clamps the coefficient itself.
        let ingested = ShapeVector::ingest(&b).unwrap();
        assert_eq!(ingested.0[0], -5.0);
    }

    #[test]
    fn non_finite_shape_rejected() {
        let mut b = [0.0; SHAPE_DIM];
        b[3] = f64::NAN;
        let t = Skeleton::default_template();
        assert!(matches!(
            build_skeleton(&ShapeVector(b), &t),
            Err(Error::InvalidShape(_))
        ));
    }

    #[test]
    fn rest_pose_matches_template_offsets() {
        let t = Skeleton::default_template();
        let fk = forward_kinematics(&t, &PoseParams::rest(Vector3::zeros())).unwrap();
        for j in 1..t.num_joints() {
            let p = t.parent(j).unwrap();
            assert!((fk.positions[j] - fk.positions[p] - t.offset(j)).norm() < 1e-15);
        }
        let shifted =
            forward_kinematics(&t, &PoseParams::rest(Vector3::new(1.0, 2.0, 3.0))).unwrap();
        for (a, b) in shifted.positions.iter().zip(&fk.positions) {
            assert!((a - b - Vector3::new(1.0, 2.0, 3.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn quarter_turn_about_z_rotates_child_offset() {
        // l_collar (12) has child l_shoulder (15) with offset (0.12, 0, 0).
        let t = Skeleton::default_template();
        let mut pose = PoseParams::rest(Vector3::zeros());
        pose.body_pose[11] = Vector3::new(0.0, 0.0, PI / 2.0);
        let fk = forward_kinematics(&t, &pose).unwrap();
        let d = fk.positions[15] - fk.positions[12];
        assert!((d - Vector3::new(0.0, 0.12, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        let t = Skeleton::default_template();
        let mut pose = PoseParams::rest(Vector3::zeros());
        pose.body_pose.pop();
        assert!(matches!(
            forward_kinematics(&t, &pose),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn sequence_joints_linear_in_translation() {
        let t = Skeleton::default_template();
        let frames: Vec<_> = (0..5)
            .map(|k| PoseParams::rest(Vector3::new(0.1 * k as f64, 0.0, 1.0)))
            .collect();
        let seq = MotionSequence::new(
            30.0,
            vec![PersonTrack {
                shape: ShapeVector::default(),
                frames,
            }],
        )
        .unwrap();
        let joints = sequence_joints(&seq, &[t]).unwrap();
        for k in 1..5 {
            for (a, b) in joints[0][k].iter().zip(&joints[0][k - 1]) {
                assert!((a - b - Vector3::new(0.1, 0.0, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn canonicalize_examples() {
        let v = Vector3::new(0.0, 0.0, 3.5);
        let c = canonicalize_axis_angle(v);
        assert!((c - Vector3::new(0.0, 0.0, -(2.0 * PI - 3.5))).norm() < 1e-12);
        let big = Vector3::new(2.0 * PI + 0.5, 0.0, 0.0);
        assert!((canonicalize_axis_angle(big) - Vector3::new(0.5, 0.0, 0.0)).norm() < 1e-12);
    }

    proptest! {
        #[test]
        fn canonicalization_idempotent(x in -10.0..10.0f64, y in -10.0..10.0f64, z in -10.0..10.0f64) {
            let c = canonicalize_axis_angle(Vector3::new(x, y, z));
            prop_assert!(c.norm() <= PI + 1e-12);
            prop_assert_eq!(canonicalize_axis_angle(c), c);
            let r1 = rotation_from_axis_angle(&Vector3::new(x, y, z));
            let r2 = rotation_from_axis_angle(&c);
            prop_assert!((r1.matrix() - r2.matrix()).norm() < 1e-9);
        }

        #[test]
        fn fk_rigidity(seed in 0u64..1000, ox in -3.0..3.0f64, oy in -3.0..3.0f64, tz in -2.0..2.0f64) {
            let t = Skeleton::default_template();
            let pose = random_pose(seed);
            let mut moved = pose.clone();
            moved.root_orient = canonicalize_axis_angle(Vector3::new(ox, oy, 0.3));
            moved.root_trans += Vector3::new(0.5, -1.0, tz);
            let a = forward_kinematics(&t, &pose).unwrap().positions;
            let b = forward_kinematics(&t, &moved).unwrap().positions;
            for i in 0..a.len() {
                for j in 0..a.len() {
                    prop_assert!(((a[i] - a[j]).norm() - (b[i] - b[j]).norm()).abs() < 1e-9);
                }
            }
        }

        #[test]
        fn fk_global_rotation_composes(seed in 0u64..1000, gx in -2.0..2.0f64, gy in -2.0..2.0f64, gz in -2.0..2.0f64) {
            let t = Skeleton::default_template();
            let pose = random_pose(seed);
            let g = quat_from_axis_angle(&Vector3::new(gx, gy, gz));
            let mut rotated = pose.clone();
            rotated.root_orient = (g * quat_from_axis_angle(&pose.root_orient)).scaled_axis();
            let a = forward_kinematics(&t, &pose).unwrap().positions;
            let b = forward_kinematics(&t, &rotated).unwrap().positions;
            for (pa, pb) in a.iter().zip(&b) {
                let expected = pose.root_trans + g * (pa - pose.root_trans);
                prop_assert!((expected - pb).norm() < 1e-9);
            }
        }
    }
}
