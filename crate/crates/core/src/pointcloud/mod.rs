//! Labeled point cloud model, CLOI-PTS / ASCII PLY I/O and subsampling.

mod fps;
mod ply;
mod pts;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use fps::{farthest_point_indices, farthest_point_indices_from, farthest_point_subsample};
pub use ply::{load_ascii_ply, parse_ascii_ply};
pub use pts::{load_pts, parse_pts, save_pts, save_pts_with, write_pts, PtsColumns};

/// A position in meters.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    #[inline]
    pub fn distance_squared(&self, other: &Point3) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        dx * dx + dy * dy + dz * dz
    }

    #[inline]
    pub fn distance(&self, other: &Point3) -> f64 {
        self.distance_squared(other).sqrt()
    }

    #[inline]
    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl From<[f64; 3]> for Point3 {
    fn from(a: [f64; 3]) -> Self {
        Point3::new(a[0], a[1], a[2])
    }
}

/// Semantic class of a point. Codes are fixed by the file format.
#[derive(
    Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum ClassLabel {
    Other = 0,
    Angle = 1,
    Channel = 2,
    Cylinder = 3,
    Elbow = 4,
    #[serde(rename = "ibeam")]
    IBeam = 5,
    Flange = 6,
    Valve = 7,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; 8] = [
        ClassLabel::Other,
        ClassLabel::Angle,
        ClassLabel::Channel,
        ClassLabel::Cylinder,
        ClassLabel::Elbow,
        ClassLabel::IBeam,
        ClassLabel::Flange,
        ClassLabel::Valve,
    ];

    /// The seven object classes; `Other` (clutter) is excluded.
    pub const CLOI: [ClassLabel; 7] = [
        ClassLabel::Angle,
        ClassLabel::Channel,
        ClassLabel::Cylinder,
        ClassLabel::Elbow,
        ClassLabel::IBeam,
        ClassLabel::Flange,
        ClassLabel::Valve,
    ];

    pub fn from_code(code: i64) -> Option<Self> {
        usize::try_from(code).ok().and_then(|c| Self::ALL.get(c).copied())
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn name(self) -> &'static str {
        match self {
            ClassLabel::Other => "other",
            ClassLabel::Angle => "angle",
            ClassLabel::Channel => "channel",
            ClassLabel::Cylinder => "cylinder",
            ClassLabel::Elbow => "elbow",
            ClassLabel::IBeam => "ibeam",
            ClassLabel::Flange => "flange",
            ClassLabel::Valve => "valve",
        }
    }

    pub fn is_cloi(self) -> bool {
        self != ClassLabel::Other
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown class `{s}`")))
    }
}

/// Predicted instance of a point after segmentation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Prediction {
    Instance(u32),
    Noise,
}

impl Prediction {
    pub fn instance(self) -> Option<u32> {
        match self {
            Prediction::Instance(id) => Some(id),
            Prediction::Noise => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointRecord {
    pub position: Point3,
    pub class_label: ClassLabel,
    pub gt_instance: Option<u32>,
    pub boundary: bool,
    pub pred_instance: Option<Prediction>,
}

impl PointRecord {
    pub fn new(position: Point3, class_label: ClassLabel, gt_instance: Option<u32>) -> Self {
        Self {
            position,
            class_label,
            gt_instance,
            boundary: false,
            pred_instance: None,
        }
    }
}

/// An ordered, validated set of labeled points.
///
/// Construction checks that every coordinate is finite and that every
/// ground-truth instance is class-pure, then renumbers ground-truth and
/// predicted instance ids canonically: ids are assigned in order of each
/// instance's smallest point index.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct LabeledPointCloud {
    points: Vec<PointRecord>,
}

impl LabeledPointCloud {
    pub fn new(points: Vec<PointRecord>) -> Result<Self> {
        for (i, p) in points.iter().enumerate() {
            if !p.position.is_finite() {
                return Err(Error::invalid(format!("point {i} has a non-finite coordinate")));
            }
        }
        let mut owner: HashMap<u32, (ClassLabel, usize)> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            if let Some(id) = p.gt_instance {
                let (class, first) = *owner.entry(id).or_insert((p.class_label, i));
                if class != p.class_label {
                    return Err(Error::invalid(format!(
                        "ground-truth instance {id} mixes classes {class} (point {first}) and {} (point {i})",
                        p.class_label
                    )));
                }
            }
        }
        let mut cloud = Self { points };
        cloud.canonicalize();
        Ok(cloud)
    }

    fn canonicalize(&mut self) {
        let gt = canonical_ids(self.points.iter().map(|p| p.gt_instance));
        let pred = canonical_ids(
            self.points
                .iter()
                .map(|p| p.pred_instance.and_then(Prediction::instance)),
        );
        for (p, (g, q)) in self.points.iter_mut().zip(gt.into_iter().zip(pred)) {
            p.gt_instance = g;
            if let Some(Prediction::Instance(_)) = p.pred_instance {
                p.pred_instance = q.map(Prediction::Instance);
            }
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[PointRecord] {
        &self.points
    }

    pub fn into_points(self) -> Vec<PointRecord> {
        self.points
    }

    pub fn positions(&self) -> Vec<Point3> {
        self.points.iter().map(|p| p.position).collect()
    }

    pub fn classes(&self) -> Vec<ClassLabel> {
        self.points.iter().map(|p| p.class_label).collect()
    }

    /// True when every point carries a ground-truth instance id.
    pub fn has_ground_truth(&self) -> bool {
        self.points.iter().all(|p| p.gt_instance.is_some())
    }

    pub fn has_predictions(&self) -> bool {
        !self.points.is_empty() && self.points.iter().all(|p| p.pred_instance.is_some())
    }

    /// Returns a copy with per-point predictions set (`None` = noise).
    pub fn with_predictions(&self, assignment: &[Option<u32>]) -> Result<Self> {
        if assignment.len() != self.len() {
            return Err(Error::invalid(format!(
                "{} predictions for {} points",
                assignment.len(),
                self.len()
            )));
        }
        let mut points = self.points.clone();
        for (p, a) in points.iter_mut().zip(assignment) {
            p.pred_instance = Some(a.map_or(Prediction::Noise, Prediction::Instance));
        }
        let mut cloud = Self { points };
        cloud.canonicalize();
        Ok(cloud)
    }

    pub fn with_boundary_flags(&self, flags: &[bool]) -> Result<Self> {
        if flags.len() != self.len() {
            return Err(Error::invalid(format!(
                "{} boundary flags for {} points",
                flags.len(),
                self.len()
            )));
        }
        let mut cloud = self.clone();
        for (p, &f) in cloud.points.iter_mut().zip(flags) {
            p.boundary = f;
        }
        Ok(cloud)
    }

    /// Points at `indices`, in that order, as a new cloud.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut points = Vec::with_capacity(indices.len());
        for &i in indices {
            let p = self
                .points
                .get(i)
                .ok_or_else(|| Error::invalid(format!("index {i} out of range")))?;
            points.push(*p);
        }
        let mut cloud = Self { points };
        cloud.canonicalize();
        Ok(cloud)
    }

    /// Ground-truth instances as sorted point-index sets, in canonical order.
    pub fn gt_instances(&self) -> Vec<Vec<usize>> {
        let mut sets: Vec<Vec<usize>> = Vec::new();
        for (i, p) in self.points.iter().enumerate() {
            if let Some(id) = p.gt_instance {
                let id = id as usize;
                if sets.len() <= id {
                    sets.resize_with(id + 1, Vec::new);
                }
                sets[id].push(i);
            }
        }
        sets
    }
}

/// Relabels ids so that they count up in order of first appearance.
fn canonical_ids(ids: impl Iterator<Item = Option<u32>>) -> Vec<Option<u32>> {
    let mut map: HashMap<u32, u32> = HashMap::new();
    ids.map(|id| {
        id.map(|id| {
            let next = map.len() as u32;
            *map.entry(id).or_insert(next)
        })
    })
    .collect()
}

/// Per-class (instance count, point count) of a ground-truth cloud.
///
/// Every class appears in the map, with zeros when absent.
pub fn class_histogram(cloud: &LabeledPointCloud) -> BTreeMap<ClassLabel, (usize, usize)> {
    let mut hist: BTreeMap<ClassLabel, (usize, usize)> =
        ClassLabel::ALL.iter().map(|&c| (c, (0, 0))).collect();
    let mut seen: HashSet<u32> = HashSet::new();
    for p in cloud.points() {
        let entry = hist.get_mut(&p.class_label).expect("all classes present");
        entry.1 += 1;
        if let Some(id) = p.gt_instance {
            if seen.insert(id) {
                entry.0 += 1;
            }
        }
    }
    hist
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(x: f64, class: ClassLabel, gt: Option<u32>) -> PointRecord {
        PointRecord::new(Point3::new(x, 0.0, 0.0), class, gt)
    }

    #[test]
    fn class_codes_round_trip() {
        for c in ClassLabel::ALL {
            assert_eq!(ClassLabel::from_code(c.code() as i64), Some(c));
            assert_eq!(c.name().parse::<ClassLabel>().unwrap(), c);
        }
        assert_eq!(ClassLabel::from_code(8), None);
        assert_eq!(ClassLabel::from_code(-1), None);
        assert_eq!(ClassLabel::CLOI.len(), 7);
        assert!(!ClassLabel::CLOI.contains(&ClassLabel::Other));
    }

    #[test]
    fn gt_ids_are_canonicalized_by_first_member() {
        let cloud = LabeledPointCloud::new(vec![
            rec(0.0, ClassLabel::Cylinder, Some(42)),
            rec(1.0, ClassLabel::Elbow, Some(7)),
            rec(2.0, ClassLabel::Cylinder, Some(42)),
        ])
        .unwrap();
        let ids: Vec<_> = cloud.points().iter().map(|p| p.gt_instance).collect();
        assert_eq!(ids, vec![Some(0), Some(1), Some(0)]);
        assert_eq!(cloud.gt_instances(), vec![vec![0, 2], vec![1]]);
    }

    #[test]
    fn mixed_class_instance_is_rejected() {
        let err = LabeledPointCloud::new(vec![
            rec(0.0, ClassLabel::Cylinder, Some(1)),
            rec(1.0, ClassLabel::Elbow, Some(1)),
        ])
        .unwrap_err();
        assert!(err.to_string().contains("mixes classes"), "{err}");
    }

    #[test]
    fn non_finite_is_rejected() {
        let mut p = rec(0.0, ClassLabel::Other, None);
        p.position.y = f64::INFINITY;
        assert!(LabeledPointCloud::new(vec![p]).is_err());
    }

    #[test]
    fn histogram_counts_instances_and_points() {
        let mut pts = Vec::new();
        for i in 0..500 {
            pts.push(rec(i as f64, ClassLabel::Cylinder, Some(3)));
        }
        for i in 0..500 {
            pts.push(rec(1000.0 + i as f64, ClassLabel::Cylinder, Some(9)));
        }
        let cloud = LabeledPointCloud::new(pts).unwrap();
        let hist = class_histogram(&cloud);
        assert_eq!(hist[&ClassLabel::Cylinder], (2, 1000));
        let total: usize = hist.values().map(|v| v.1).sum();
        assert_eq!(total, 1000);

        let empty = class_histogram(&LabeledPointCloud::default());
        assert!(empty.values().all(|&v| v == (0, 0)));
        assert_eq!(empty.len(), 8);
    }

    #[test]
    fn predictions_keep_noise() {
        let cloud = LabeledPointCloud::new(vec![
            rec(0.0, ClassLabel::Valve, None),
            rec(1.0, ClassLabel::Valve, None),
        ])
        .unwrap();
        let pred = cloud.with_predictions(&[None, Some(5)]).unwrap();
        assert_eq!(pred.points()[0].pred_instance, Some(Prediction::Noise));
        assert_eq!(pred.points()[1].pred_instance, Some(Prediction::Instance(0)));
        assert!(cloud.with_predictions(&[None]).is_err());
    }
}
