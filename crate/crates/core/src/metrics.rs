//! Pose accuracy and physical plausibility metrics.

use nalgebra::{Matrix3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::collision::{penetration_sum, Capsule};
use crate::kinematics::{sequence_joints, MotionSequence, SequenceJoints, Skeleton, FOOT_JOINTS};
use crate::{Error, Result};

const MM: f64 = 1000.0;
pub const DEFAULT_CONTACT_HEIGHT: f64 = 0.05;

/// `x ↦ s·R·x + t`.
#[derive(Debug, Clone, PartialEq)]
pub struct RigidAlignment {
    pub rotation: Rotation3<f64>,
    pub translation: Vector3<f64>,
    pub scale: f64,
}

impl RigidAlignment {
    pub fn identity() -> Self {
        RigidAlignment {
            rotation: Rotation3::identity(),
            translation: Vector3::zeros(),
            scale: 1.0,
        }
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p * self.scale + self.translation
    }
}

fn centroid(points: &[Vector3<f64>]) -> Vector3<f64> {
    points.iter().sum::<Vector3<f64>>() / points.len() as f64
}

/// Least-squares similarity (or rigid) transform taking `source` onto `target`.
pub fn procrustes(
    source: &[Vector3<f64>],
    target: &[Vector3<f64>],
    with_scale: bool,
) -> Result<RigidAlignment> {
    if source.len() != target.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} source points, {} target points",
            source.len(),
            target.len()
        )));
    }
    if source.len() < 3 {
        return Err(Error::DegenerateAlignment(format!(
            "need at least 3 points, got {}",
            source.len()
        )));
    }
    let mu_s = centroid(source);
    let mu_t = centroid(target);
    let mut scatter = Matrix3::zeros();
    let mut cross = Matrix3::zeros();
    let mut var_s = 0.0;
    for (s, t) in source.iter().zip(target) {
        let ds = s - mu_s;
        scatter += ds * ds.transpose();
        cross += (t - mu_t) * ds.transpose();
        var_s += ds.norm_squared();
    }
    let sv = scatter.symmetric_eigenvalues();
    let (lo, hi) = sv.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &x| {
        (lo.min(x), hi.max(x))
    });
    let middle = sv.sum() - lo - hi;
    if hi <= 1e-18 || middle <= 1e-12 * hi {
        return Err(Error::DegenerateAlignment(
            "points are collinear or coincident".into(),
        ));
    }
    if source == target {
        return Ok(RigidAlignment::identity());
    }

    let svd = cross.svd(true, true);
    let u = svd.u.expect("svd computes u");
    let v_t = svd.v_t.expect("svd computes v");
    let mut d = Matrix3::identity();
    if (u * v_t).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    let r = u * d * v_t;
    let scale = if with_scale {
        (svd.singular_values.component_mul(&d.diagonal())).sum() / var_s
    } else {
        1.0
    };
    let rotation = Rotation3::from_matrix_unchecked(r);
    let translation = mu_t - rotation * mu_s * scale;
    Ok(RigidAlignment {
        rotation,
        translation,
        scale,
    })
}

fn check_shapes(pred: &SequenceJoints, gt: &SequenceJoints) -> Result<()> {
    let dims = |s: &SequenceJoints| {
        (
            s.len(),
            s.first().map_or(0, Vec::len),
            s.first().and_then(|p| p.first()).map_or(0, Vec::len),
        )
    };
    let consistent = |s: &SequenceJoints| {
        let (_, t, j) = dims(s);
        s.iter()
            .all(|p| p.len() == t && p.iter().all(|f| f.len() == j))
    };
    if !consistent(pred) || !consistent(gt) || dims(pred) != dims(gt) {
        return Err(Error::ShapeMismatch(format!(
            "prediction {:?} vs ground truth {:?} (persons, frames, joints)",
            dims(pred),
            dims(gt)
        )));
    }
    if dims(pred).1 == 0 {
        return Err(Error::EmptySequence);
    }
    Ok(())
}

fn flatten(s: &SequenceJoints) -> impl Iterator<Item = &Vector3<f64>> {
    s.iter().flatten().flatten()
}

fn mean_error_mm(pred: &SequenceJoints, gt: &SequenceJoints, align: &RigidAlignment) -> f64 {
    let (sum, n) = flatten(pred)
        .zip(flatten(gt))
        .fold((0.0, 0usize), |(sum, n), (p, g)| {
            (sum + (align.apply(p) - g).norm(), n + 1)
        });
    MM * sum / n as f64
}

/// Mean per-joint error without alignment (mm).
pub fn mpjpe(pred: &SequenceJoints, gt: &SequenceJoints) -> Result<f64> {
    check_shapes(pred, gt)?;
    Ok(mean_error_mm(pred, gt, &RigidAlignment::identity()))
}

/// Error after one rigid alignment fitted on every person's first frame (mm).
pub fn w_mpjpe(pred: &SequenceJoints, gt: &SequenceJoints) -> Result<f64> {
    check_shapes(pred, gt)?;
    let src: Vec<_> = pred.iter().flat_map(|p| p[0].iter().copied()).collect();
    let tgt: Vec<_> = gt.iter().flat_map(|p| p[0].iter().copied()).collect();
    let align = procrustes(&src, &tgt, false)?;
    Ok(mean_error_mm(pred, gt, &align))
}

/// Error after one rigid alignment fitted on all persons and frames (mm).
pub fn pa_mpjpe_joint(pred: &SequenceJoints, gt: &SequenceJoints) -> Result<f64> {
    check_shapes(pred, gt)?;
    let src: Vec<_> = flatten(pred).copied().collect();
    let tgt: Vec<_> = flatten(gt).copied().collect();
    let align = procrustes(&src, &tgt, false)?;
    Ok(mean_error_mm(pred, gt, &align))
}

/// Mean absolute difference of second-difference accelerations (mm/s²).
pub fn accel_error(pred: &SequenceJoints, gt: &SequenceJoints, fps: f64) -> Result<f64> {
    check_shapes(pred, gt)?;
    let frames = pred[0].len();
    if frames < 3 {
        return Err(Error::TooShort {
            needed: 3,
            got: frames,
        });
    }
    let accel = |s: &[Vec<Vector3<f64>>], t: usize, j: usize| {
        (s[t + 1][j] - s[t][j] * 2.0 + s[t - 1][j]) * (fps * fps)
    };
    let mut sum = 0.0;
    let mut n = 0usize;
    for (p, g) in pred.iter().zip(gt) {
        for t in 1..frames - 1 {
            for j in 0..p[t].len() {
                sum += (accel(p, t, j) - accel(g, t, j)).norm();
                n += 1;
            }
        }
    }
    Ok(MM * sum / n as f64)
}

/// Mean horizontal foot displacement per in-contact frame pair (mm).
///
/// A pair counts when the foot joint is within `h_thresh` of the ground in
/// both frames.
pub fn skating(joints: &SequenceJoints, _fps: f64, h_thresh: f64, ground_height: f64) -> f64 {
    let limit = ground_height + h_thresh;
    let mut total = 0.0;
    let mut pairs = 0usize;
    for person in joints {
        for w in person.windows(2) {
            for &f in &FOOT_JOINTS {
                let (a, b) = (&w[0][f], &w[1][f]);
                if a.z <= limit && b.z <= limit {
                    total += (b.xy() - a.xy()).norm();
                    pairs += 1;
                }
            }
        }
    }
    if pairs == 0 {
        0.0
    } else {
        MM * total / pairs as f64
    }
}

/// Capsules indexed `[person][frame][bone]`.
pub type SequenceCapsules = Vec<Vec<Vec<Capsule>>>;

pub fn sequence_capsules(joints: &SequenceJoints, skeletons: &[Skeleton]) -> SequenceCapsules {
    joints
        .iter()
        .zip(skeletons)
        .map(|(person, skel)| person.iter().map(|f| skel.capsules(f)).collect())
        .collect()
}

/// Per person, the mean over frames of the deepest capsule point below the
/// ground; averaged over persons (mm).
pub fn ground_penetration(capsules: &SequenceCapsules, ground_height: f64) -> f64 {
    if capsules.is_empty() {
        return 0.0;
    }
    let per_person = capsules.iter().map(|frames| {
        let sum: f64 = frames
            .iter()
            .map(|caps| {
                caps.iter()
                    .map(|c| ground_height - c.lowest_z())
                    .fold(0.0, f64::max)
            })
            .sum();
        sum / frames.len().max(1) as f64
    });
    MM * per_person.sum::<f64>() / capsules.len() as f64
}

/// Per person, `|SDF|` summed over its surface samples inside any other person,
/// accumulated over the sequence (m).
pub fn penetration_per_person(capsules: &SequenceCapsules) -> Vec<f64> {
    let frames = capsules.first().map_or(0, Vec::len);
    (0..capsules.len())
        .map(|i| {
            (0..frames)
                .map(|t| {
                    let others: Vec<Capsule> = capsules
                        .iter()
                        .enumerate()
                        .filter(|&(k, _)| k != i)
                        .flat_map(|(_, p)| p[t].iter().copied())
                        .collect();
                    penetration_sum(&others, &capsules[i][t])
                })
                .sum()
        })
        .collect()
}

fn mean_mm(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        MM * values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Inter-person penetration averaged over persons (mm).
pub fn inter_penetration(capsules: &SequenceCapsules) -> f64 {
    mean_mm(&penetration_per_person(capsules))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricParams {
    pub h_thresh: f64,
    pub ground_height: f64,
}

impl Default for MetricParams {
    fn default() -> Self {
        MetricParams {
            h_thresh: DEFAULT_CONTACT_HEIGHT,
            ground_height: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub pen_mm: f64,
    pub gnd_pen_mm: f64,
    pub skating_mm: f64,
    pub acc_err_mm_s2: f64,
    pub w_mpjpe_mm: f64,
    pub pa_mpjpe_joint_mm: f64,
}

impl MetricsReport {
    pub const CSV_HEADER: &'static str =
        "pen_mm,gnd_pen_mm,skating_mm,acc_err_mm_s2,w_mpjpe_mm,pa_mpjpe_joint_mm";
    /// Display labels in column order.
    pub const LABELS: [&'static str; 6] =
        ["Pen.", "Gnd Pen.", "Skating", "Acc.", "W-MPJPE", "PA-MPJPE"];

    pub fn values(&self) -> [f64; 6] {
        [
            self.pen_mm,
            self.gnd_pen_mm,
            self.skating_mm,
            self.acc_err_mm_s2,
            self.w_mpjpe_mm,
            self.pa_mpjpe_joint_mm,
        ]
    }

    pub fn csv_row(&self) -> String {
        self.values()
            .iter()
            .map(|v| format!("{v:.6}"))
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// Computes all six metrics; the physics metrics are taken on `pred`.
pub fn evaluate(
    pred: &MotionSequence,
    gt: &MotionSequence,
    template: &Skeleton,
    params: &MetricParams,
) -> Result<MetricsReport> {
    evaluate_with_templates(pred, template, gt, template, params)
}

/// Like [`evaluate`], with separate templates for prediction and ground truth.
pub fn evaluate_with_templates(
    pred: &MotionSequence,
    pred_template: &Skeleton,
    gt: &MotionSequence,
    gt_template: &Skeleton,
    params: &MetricParams,
) -> Result<MetricsReport> {
    if pred.num_persons() != gt.num_persons() || pred.num_frames() != gt.num_frames() {
        return Err(Error::ShapeMismatch(format!(
            "prediction has {} persons × {} frames, ground truth {} × {}",
            pred.num_persons(),
            pred.num_frames(),
            gt.num_persons(),
            gt.num_frames()
        )));
    }
    let pred_skel = pred.skeletons(pred_template)?;
    let gt_skel = gt.skeletons(gt_template)?;
    let pj = sequence_joints(pred, &pred_skel)?;
    let gj = sequence_joints(gt, &gt_skel)?;
    let caps = sequence_capsules(&pj, &pred_skel);
    Ok(MetricsReport {
        pen_mm: inter_penetration(&caps),
        gnd_pen_mm: ground_penetration(&caps, params.ground_height),
        skating_mm: skating(&pj, pred.fps, params.h_thresh, params.ground_height),
        acc_err_mm_s2: accel_error(&pj, &gj, pred.fps)?,
        w_mpjpe_mm: w_mpjpe(&pj, &gj)?,
        pa_mpjpe_joint_mm: pa_mpjpe_joint(&pj, &gj)?,
    })
}
