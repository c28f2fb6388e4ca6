//! Geometric boundary labeling.
//!
//! A point is a *class boundary* point when some other point within
//! `r_b` carries a different class label. The same test over ground-truth
//! instance ids gives instance boundaries, which are useful for analysing
//! labeled data but are not used by segmentation.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::pointcloud::LabeledPointCloud;
use crate::spatial_index::RadiusIndex;

pub const DEFAULT_BOUNDARY_RADIUS: f64 = 0.04;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryParams {
    radius: f64,
}

impl BoundaryParams {
    pub fn new(radius: f64) -> Result<Self> {
        if radius.is_finite() && radius > 0.0 {
            Ok(Self { radius })
        } else {
            Err(Error::invalid(format!("boundary radius must be positive, got {radius}")))
        }
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }
}

impl Default for BoundaryParams {
    fn default() -> Self {
        Self {
            radius: DEFAULT_BOUNDARY_RADIUS,
        }
    }
}

/// Flags every point that has a neighbor of another class within `r_b`.
///
/// # Panics
///
/// If `index` was not built over this cloud's positions.
pub fn detect_class_boundaries(
    cloud: &LabeledPointCloud,
    index: &RadiusIndex,
    params: BoundaryParams,
) -> Vec<bool> {
    assert_eq!(index.len(), cloud.len(), "index built over a different cloud");
    let points = cloud.points();
    flag_by(index, params.radius, |i, j| {
        points[i].class_label != points[j].class_label
    })
}

/// Flags every point that has a neighbor of another ground-truth instance
/// within `r_b`. Fails when any point lacks a ground-truth id.
pub fn detect_gt_instance_boundaries(
    cloud: &LabeledPointCloud,
    index: &RadiusIndex,
    params: BoundaryParams,
) -> Result<Vec<bool>> {
    if index.len() != cloud.len() {
        return Err(Error::invalid("index built over a different cloud"));
    }
    let ids: Vec<u32> = cloud
        .points()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            p.gt_instance
                .ok_or_else(|| Error::invalid(format!("point {i} has no ground-truth instance")))
        })
        .collect::<Result<_>>()?;
    Ok(flag_by(index, params.radius, |i, j| ids[i] != ids[j]))
}

fn flag_by(index: &RadiusIndex, radius: f64, differs: impl Fn(usize, usize) -> bool + Sync) -> Vec<bool> {
    (0..index.len())
        .into_par_iter()
        .map(|i| {
            let mut flagged = false;
            index.for_each_within(index.position(i).to_array(), radius, |j, _| {
                if !flagged && differs(i, j) {
                    flagged = true;
                }
            });
            flagged
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryStats {
    pub boundary: usize,
    pub interior: usize,
    /// Fraction of boundary points; 0 for an empty cloud.
    pub ratio: f64,
}

pub fn boundary_stats(flags: &[bool]) -> BoundaryStats {
    let boundary = flags.iter().filter(|&&f| f).count();
    let interior = flags.len() - boundary;
    let ratio = if flags.is_empty() {
        0.0
    } else {
        boundary as f64 / flags.len() as f64
    };
    BoundaryStats {
        boundary,
        interior,
        ratio,
    }
}
