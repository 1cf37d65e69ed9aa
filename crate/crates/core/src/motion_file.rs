//! JSON motion and skeleton-template files.
//!
//! Saving is canonical: every float is rounded to nine significant digits and
//! written by `serde_json`, so a load/save cycle of a saved file reproduces it
//! byte for byte.

use std::fs;
use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::kinematics::{
    canonicalize_with_slack, JointSpec, MotionSequence, PersonTrack, PoseParams, ShapeVector,
    Skeleton,
};
use crate::{Error, Result, J_BODY};

pub const FORMAT_VERSION: u32 = 1;
pub const TEMPLATE_ENV: &str = "PHYSCORRECT_TEMPLATE";

const BUILTIN_TEMPLATE: &str = include_str!("../data/template_v1.json");
/// Angles this far past π are kept as written on ingest.
const INGEST_ANGLE_SLACK: f64 = 1e-6;

/// Rounds to nine significant digits.
pub fn round_sig9(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.8e}").parse().expect("formatted float parses")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemplateFile {
    #[serde(default = "default_version")]
    pub version: u32,
    pub joints: Vec<JointSpec>,
}

fn default_version() -> u32 {
    FORMAT_VERSION
}

impl TemplateFile {
    pub fn builtin() -> Self {
        serde_json::from_str(BUILTIN_TEMPLATE).expect("builtin template parses")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: TemplateFile =
            serde_json::from_str(text).map_err(|e| Error::Schema(format!("template: {e}")))?;
        if file.version != FORMAT_VERSION {
            return Err(Error::Schema(format!(
                "unsupported template version {}",
                file.version
            )));
        }
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json_str(&fs::read_to_string(path)?)
    }

    pub fn into_skeleton(self) -> Result<Skeleton> {
        Skeleton::from_joints(self.joints)
    }
}

/// The template named by `PHYSCORRECT_TEMPLATE`, or the builtin one.
pub fn default_template() -> Result<Skeleton> {
    match std::env::var_os(TEMPLATE_ENV) {
        Some(path) => TemplateFile::load(Path::new(&path))?.into_skeleton(),
        None => Ok(Skeleton::default_template()),
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SkeletonBlock {
    joints: Vec<JointSpec>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameDoc {
    root_orient: [f64; 3],
    body_pose: Vec<f64>,
    root_trans: [f64; 3],
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PersonDoc {
    shape: Vec<f64>,
    frames: Vec<FrameDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MotionDoc {
    version: u32,
    fps: f64,
    skeleton_template: SkeletonBlock,
    persons: Vec<PersonDoc>,
}

/// A motion sequence together with the template its skeletons derive from.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionFile {
    pub sequence: MotionSequence,
    pub template: Skeleton,
}

fn vec3(a: [f64; 3]) -> Vector3<f64> {
    Vector3::from(a)
}

fn ingest_rotation(v: Vector3<f64>) -> Vector3<f64> {
    canonicalize_with_slack(v, INGEST_ANGLE_SLACK)
}

fn round3(v: &Vector3<f64>) -> [f64; 3] {
    [round_sig9(v.x), round_sig9(v.y), round_sig9(v.z)]
}

impl MotionFile {
    pub fn new(sequence: MotionSequence, template: Skeleton) -> Self {
        MotionFile { sequence, template }
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let doc: MotionDoc =
            serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        if doc.version != FORMAT_VERSION {
            return Err(Error::Schema(format!(
                "unsupported version {}",
                doc.version
            )));
        }
        let template = Skeleton::from_joints(doc.skeleton_template.joints)
            .map_err(|e| Error::Schema(e.to_string()))?;
        let persons = doc
            .persons
            .into_iter()
            .enumerate()
            .map(|(i, p)| {
                let shape = ShapeVector::ingest(&p.shape)
                    .map_err(|e| Error::Schema(format!("person {i}: {e}")))?;
                let frames = p
                    .frames
                    .into_iter()
                    .enumerate()
                    .map(|(f, fr)| {
                        if fr.body_pose.len() != 3 * J_BODY {
                            return Err(Error::Schema(format!(
                                "person {i}, frame {f}: body_pose has {} values, expected {}",
                                fr.body_pose.len(),
                                3 * J_BODY
                            )));
                        }
                        let pose = PoseParams {
                            root_orient: vec3(fr.root_orient),
                            body_pose: fr
                                .body_pose
                                .chunks_exact(3)
                                .map(|c| Vector3::new(c[0], c[1], c[2]))
                                .collect(),
                            root_trans: vec3(fr.root_trans),
                        };
                        pose.validate()
                            .map_err(|e| Error::Schema(format!("person {i}, frame {f}: {e}")))?;
                        Ok(pose.map_rotations(ingest_rotation))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(PersonTrack { shape, frames })
            })
            .collect::<Result<Vec<_>>>()?;
        let sequence = MotionSequence::new(doc.fps, persons)?;
        Ok(MotionFile { sequence, template })
    }

    pub fn to_json_string(&self) -> String {
        let doc = MotionDoc {
            version: FORMAT_VERSION,
            fps: round_sig9(self.sequence.fps),
            skeleton_template: SkeletonBlock {
                joints: self
                    .template
                    .joints()
                    .iter()
                    .map(|j| JointSpec {
                        name: j.name.clone(),
                        parent: j.parent,
                        offset: j.offset.map(round_sig9),
                        radius: round_sig9(j.radius),
                    })
                    .collect(),
            },
            persons: self
                .sequence
                .persons
                .iter()
                .map(|p| PersonDoc {
                    shape: p.shape.0.iter().map(|&b| round_sig9(b)).collect(),
                    frames: p
                        .frames
                        .iter()
                        .map(|pose| FrameDoc {
                            root_orient: round3(&pose.root_orient),
                            body_pose: pose.body_pose.iter().flat_map(round3).collect(),
                            root_trans: round3(&pose.root_trans),
                        })
                        .collect(),
                })
                .collect(),
        };
        let mut text = serde_json::to_string_pretty(&doc).expect("motion document serializes");
        text.push('\n');
        text
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json_str(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json_string())?;
        Ok(())
    }
}
