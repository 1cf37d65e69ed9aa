//! Capsule distance queries and contact detection for the shared world.

use nalgebra::Vector3;

/// Surface samples per capsule used by the penetration metric.
pub const SAMPLES_PER_CAPSULE: usize = 64;

/// Sentinel agent/bone index for contacts against the ground plane.
pub const GROUND: usize = usize::MAX;

const GOLDEN_ANGLE: f64 = 2.399_963_229_728_653;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Capsule {
    pub a: Vector3<f64>,
    pub b: Vector3<f64>,
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vector3<f64>,
    pub max: Vector3<f64>,
}

impl Aabb {
    pub fn overlaps(&self, other: &Aabb) -> bool {
        (0..3).all(|k| self.min[k] <= other.max[k] && other.min[k] <= self.max[k])
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: self.min.inf(&other.min),
            max: self.max.sup(&other.max),
        }
    }
}

impl Capsule {
    pub fn new(a: Vector3<f64>, b: Vector3<f64>, radius: f64) -> Self {
        Capsule { a, b, radius }
    }

    pub fn sphere(center: Vector3<f64>, radius: f64) -> Self {
        Capsule::new(center, center, radius)
    }

    /// Signed distance to the surface, negative inside.
    pub fn sdf(&self, p: &Vector3<f64>) -> f64 {
        (p - closest_on_segment(&self.a, &self.b, p)).norm() - self.radius
    }

    pub fn aabb(&self) -> Aabb {
        let r = Vector3::repeat(self.radius);
        Aabb {
            min: self.a.inf(&self.b) - r,
            max: self.a.sup(&self.b) + r,
        }
    }

    pub fn lowest_z(&self) -> f64 {
        self.a.z.min(self.b.z) - self.radius
    }

    /// Axis parameter in `[0, 1]` of the lowest surface point.
    pub fn lowest_param(&self) -> f64 {
        let dz = self.b.z - self.a.z;
        if dz.abs() < 1e-12 {
            0.5
        } else if dz > 0.0 {
            0.0
        } else {
            1.0
        }
    }

    pub fn axis_point(&self, s: f64) -> Vector3<f64> {
        self.a + (self.b - self.a) * s
    }

    /// Equal-area golden-spiral samples on the capsule surface.
    ///
    /// Surface area of a capsule is linear in the axial coordinate (caps
    /// included), so uniform axial spacing gives equal area per sample.
    pub fn surface_samples(&self, n: usize) -> Vec<Vector3<f64>> {
        let axis = self.b - self.a;
        let length = axis.norm();
        let u = if length > 1e-12 {
            axis / length
        } else {
            Vector3::z()
        };
        let helper = if u.x.abs() < 0.9 {
            Vector3::x()
        } else {
            Vector3::y()
        };
        let e1 = u.cross(&helper).normalize();
        let e2 = u.cross(&e1);
        let r = self.radius;
        (0..n)
            .map(|i| {
                let s = -r + (i as f64 + 0.5) / n as f64 * (length + 2.0 * r);
                let (along, rho) = if s < 0.0 {
                    (s, (r * r - s * s).max(0.0).sqrt())
                } else if s > length {
                    let h = s - length;
                    (s, (r * r - h * h).max(0.0).sqrt())
                } else {
                    (s, r)
                };
                let phi = i as f64 * GOLDEN_ANGLE;
                self.a + u * along + (e1 * phi.cos() + e2 * phi.sin()) * rho
            })
            .collect()
    }
}

pub fn capsule_sdf(c: &Capsule, p: &Vector3<f64>) -> f64 {
    c.sdf(p)
}

pub fn closest_on_segment(a: &Vector3<f64>, b: &Vector3<f64>, p: &Vector3<f64>) -> Vector3<f64> {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 <= f64::EPSILON {
        return *a;
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    a + ab * t
}

/// Closest points between segments `p1q1` and `p2q2`: `(s, t, c1, c2)`.
pub fn closest_segment_segment(
    p1: &Vector3<f64>,
    q1: &Vector3<f64>,
    p2: &Vector3<f64>,
    q2: &Vector3<f64>,
) -> (f64, f64, Vector3<f64>, Vector3<f64>) {
    const EPS: f64 = 1e-14;
    let d1 = q1 - p1;
    let d2 = q2 - p2;
    let r = p1 - p2;
    let a = d1.norm_squared();
    let e = d2.norm_squared();
    let f = d2.dot(&r);
    let (s, t);
    if a <= EPS && e <= EPS {
        return (0.0, 0.0, *p1, *p2);
    }
    if a <= EPS {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = d1.dot(&r);
        if e <= EPS {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            let mut s0 = if denom > EPS * a * e {
                ((b * f - c * e) / denom).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let mut t0 = (b * s0 + f) / e;
            if t0 < 0.0 {
                t0 = 0.0;
                s0 = (-c / a).clamp(0.0, 1.0);
            } else if t0 > 1.0 {
                t0 = 1.0;
                s0 = ((b - c) / a).clamp(0.0, 1.0);
            }
            s = s0;
            t = t0;
        }
    }
    (s, t, p1 + d1 * s, p2 + d2 * t)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contact {
    pub agent_i: usize,
    pub bone_i: usize,
    /// Other agent, or [`GROUND`].
    pub agent_j: usize,
    /// Other bone, or [`GROUND`].
    pub bone_j: usize,
    pub point: Vector3<f64>,
    /// Unit normal pointing from `j` toward `i`.
    pub normal: Vector3<f64>,
    pub depth: f64,
    /// Axis parameter on bone `i` of the deepest point.
    pub param_i: f64,
}

impl Contact {
    pub fn is_ground(&self) -> bool {
        self.agent_j == GROUND
    }

    fn key(&self) -> (usize, usize, usize, usize) {
        (self.agent_i, self.bone_i, self.agent_j, self.bone_j)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ContactSet {
    pub contacts: Vec<Contact>,
}

impl ContactSet {
    pub fn is_empty(&self) -> bool {
        self.contacts.is_empty()
    }

    pub fn len(&self) -> usize {
        self.contacts.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Contact> {
        self.contacts.iter()
    }

    pub fn max_ground_depth(&self) -> f64 {
        self.max_depth_where(|c| c.is_ground())
    }

    pub fn max_inter_depth(&self) -> f64 {
        self.max_depth_where(|c| !c.is_ground())
    }

    pub fn max_depth(&self) -> f64 {
        self.max_depth_where(|_| true)
    }

    /// Deepest ground contact of one agent.
    pub fn agent_ground_depth(&self, agent: usize) -> f64 {
        self.max_depth_where(|c| c.is_ground() && c.agent_i == agent)
    }

    /// Deepest inter-agent contact involving one agent.
    pub fn agent_inter_depth(&self, agent: usize) -> f64 {
        self.max_depth_where(|c| !c.is_ground() && (c.agent_i == agent || c.agent_j == agent))
    }

    fn max_depth_where(&self, pred: impl Fn(&Contact) -> bool) -> f64 {
        self.contacts
            .iter()
            .filter(|c| pred(c))
            .map(|c| c.depth)
            .fold(0.0, f64::max)
    }
}

/// Inter-agent and ground contacts; bones of the same agent are never paired.
pub fn detect_contacts(capsules: &[Vec<Capsule>], ground_height: f64) -> ContactSet {
    let boxes: Vec<Vec<Aabb>> = capsules
        .iter()
        .map(|agent| agent.iter().map(Capsule::aabb).collect())
        .collect();
    let agent_boxes: Vec<Option<Aabb>> = boxes
        .iter()
        .map(|b| b.iter().copied().reduce(|x, y| x.union(&y)))
        .collect();

    let mut contacts = Vec::new();
    for (i, agent) in capsules.iter().enumerate() {
        for (bone, cap) in agent.iter().enumerate() {
            let lowest = cap.lowest_z();
            if lowest < ground_height {
                let s = cap.lowest_param();
                let axis = cap.axis_point(s);
                contacts.push(Contact {
                    agent_i: i,
                    bone_i: bone,
                    agent_j: GROUND,
                    bone_j: GROUND,
                    point: Vector3::new(axis.x, axis.y, lowest),
                    normal: Vector3::z(),
                    depth: ground_height - lowest,
                    param_i: s,
                });
            }
        }
        for j in (i + 1)..capsules.len() {
            match (&agent_boxes[i], &agent_boxes[j]) {
                (Some(bi), Some(bj)) if bi.overlaps(bj) => {}
                _ => continue,
            }
            for (bone_i, ci) in agent.iter().enumerate() {
                for (bone_j, cj) in capsules[j].iter().enumerate() {
                    if !boxes[i][bone_i].overlaps(&boxes[j][bone_j]) {
                        continue;
                    }
                    if let Some(c) = capsule_pair_contact(ci, cj) {
                        contacts.push(Contact {
                            agent_i: i,
                            bone_i,
                            agent_j: j,
                            bone_j,
                            ..c
                        });
                    }
                }
            }
        }
    }
    contacts.sort_by_key(Contact::key);
    ContactSet { contacts }
}

/// Contact between two capsules if they overlap; indices are left at zero.
pub fn capsule_pair_contact(ci: &Capsule, cj: &Capsule) -> Option<Contact> {
    let (s, _t, pi, pj) = closest_segment_segment(&ci.a, &ci.b, &cj.a, &cj.b);
    let delta = pi - pj;
    let dist = delta.norm();
    let depth = ci.radius + cj.radius - dist;
    if depth <= 0.0 {
        return None;
    }
    let normal = if dist > 1e-12 {
        delta / dist
    } else {
        fallback_normal(ci, cj)
    };
    let point = 0.5 * ((pi - normal * ci.radius) + (pj + normal * cj.radius));
    Some(Contact {
        agent_i: 0,
        bone_i: 0,
        agent_j: 0,
        bone_j: 0,
        point,
        normal,
        depth,
        param_i: s,
    })
}

/// Separation direction for intersecting axes: perpendicular to both axes
/// when they cross, otherwise along the offset between the capsule centres.
fn fallback_normal(ci: &Capsule, cj: &Capsule) -> Vector3<f64> {
    let cross = (ci.b - ci.a).cross(&(cj.b - cj.a));
    if cross.norm() > 1e-9 {
        let n = cross.normalize();
        // Orient from j toward i so the choice flips when the pair is swapped.
        let centre_offset = 0.5 * (ci.a + ci.b) - 0.5 * (cj.a + cj.b);
        return if n.dot(&centre_offset) < 0.0 { -n } else { n };
    }
    let centre_offset = 0.5 * (ci.a + ci.b) - 0.5 * (cj.a + cj.b);
    let axis = ci.b - ci.a;
    let perp = if axis.norm() > 1e-12 {
        let u = axis.normalize();
        centre_offset - u * centre_offset.dot(&u)
    } else {
        centre_offset
    };
    if perp.norm() > 1e-12 {
        return perp.normalize();
    }
    let helper = if axis.norm() > 1e-12 && axis.normalize().x.abs() > 0.9 {
        Vector3::y()
    } else {
        Vector3::x()
    };
    if axis.norm() > 1e-12 {
        axis.cross(&helper).normalize()
    } else {
        helper
    }
}

/// Minimum over `capsules` of the SDF at each sample point.
pub fn interpenetration_volume_proxy(capsules: &[Capsule], samples: &[Vector3<f64>]) -> Vec<f64> {
    samples
        .iter()
        .map(|p| {
            capsules
                .iter()
                .map(|c| c.sdf(p))
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// Sum of `|SDF|` over surface samples of `from` that lie inside `into`.
pub fn penetration_sum(into: &[Capsule], from: &[Capsule]) -> f64 {
    let into_boxes: Vec<Aabb> = into.iter().map(Capsule::aabb).collect();
    let mut total = 0.0;
    let mut candidates: Vec<&Capsule> = Vec::with_capacity(into.len());
    for cap in from {
        let bx = cap.aabb();
        candidates.clear();
        candidates.extend(
            into.iter()
                .zip(&into_boxes)
                .filter(|(_, b)| b.overlaps(&bx))
                .map(|(c, _)| c),
        );
        if candidates.is_empty() {
            continue;
        }
        for p in cap.surface_samples(SAMPLES_PER_CAPSULE) {
            let d = candidates
                .iter()
                .map(|c| c.sdf(&p))
                .fold(f64::INFINITY, f64::min);
            if d < 0.0 {
                total -= d;
            }
        }
    }
    total
}
