//! Instance segmentation by graph connectivity over class-interior points.
//!
//! 1. class-boundary points are found with radius `r_b`;
//! 2. interior points of equal class within `epsilon` of each other are
//!    linked, and each connected component is a provisional instance;
//! 3. every boundary point joins the provisional instance of its own class
//!    owning the nearest interior point, searched up to `3 * epsilon`
//!    (farther boundary points become noise; equal distances go to the
//!    lower instance id);
//! 4. instances with fewer than `mu` points become noise;
//! 5. ids are renumbered by ascending smallest member index.
//!
//! Reattachment happens before the size filter, so boundary points can lift
//! a small interior core above `mu`. Reattachment never merges instances.

use std::collections::VecDeque;

use rayon::prelude::*;

use crate::boundary::{detect_class_boundaries, BoundaryParams};
use crate::error::{Error, Result};
use crate::pointcloud::{ClassLabel, LabeledPointCloud, Point3, Prediction};
use crate::spatial_index::RadiusIndex;

pub const DEFAULT_EPSILON: f64 = 0.04;
pub const DEFAULT_MU: usize = 20;
/// Reattachment search radius, as a multiple of `epsilon`.
pub const REATTACH_RADIUS_FACTOR: f64 = 3.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SegmentationParams {
    epsilon: f64,
    mu: usize,
    boundary_radius: f64,
}

impl SegmentationParams {
    /// `boundary_radius` defaults to `epsilon` when `None`.
    pub fn new(epsilon: f64, mu: usize, boundary_radius: Option<f64>) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::invalid(format!("epsilon must be positive, got {epsilon}")));
        }
        if mu < 1 {
            return Err(Error::invalid("mu must be at least 1"));
        }
        let boundary_radius = boundary_radius.unwrap_or(epsilon);
        BoundaryParams::new(boundary_radius)?;
        Ok(Self {
            epsilon,
            mu,
            boundary_radius,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn mu(&self) -> usize {
        self.mu
    }

    pub fn boundary_radius(&self) -> f64 {
        self.boundary_radius
    }

    pub fn boundary_params(&self) -> BoundaryParams {
        BoundaryParams::new(self.boundary_radius).expect("validated on construction")
    }
}

impl Default for SegmentationParams {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            mu: DEFAULT_MU,
            boundary_radius: DEFAULT_EPSILON,
        }
    }
}

/// A partition of point indices into class-pure instances plus noise.
///
/// Instance ids are canonical: instance `k` is the one whose smallest
/// member index is the `k`-th smallest.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InstanceLabeling {
    assignment: Vec<Option<u32>>,
    instances: Vec<Vec<usize>>,
    classes: Vec<ClassLabel>,
}

impl InstanceLabeling {
    /// Builds a canonical labeling from arbitrary per-point ids
    /// (`None` = noise). Fails if an instance mixes classes.
    pub fn from_assignment(assignment: &[Option<u32>], point_classes: &[ClassLabel]) -> Result<Self> {
        if assignment.len() != point_classes.len() {
            return Err(Error::invalid("assignment and class vectors differ in length"));
        }
        let mut remap = std::collections::HashMap::new();
        let mut instances: Vec<Vec<usize>> = Vec::new();
        let mut classes = Vec::new();
        let mut canonical = Vec::with_capacity(assignment.len());
        for (i, a) in assignment.iter().enumerate() {
            let id = a.map(|raw| {
                *remap.entry(raw).or_insert_with(|| {
                    instances.push(Vec::new());
                    classes.push(point_classes[i]);
                    (instances.len() - 1) as u32
                })
            });
            if let Some(id) = id {
                let k = id as usize;
                if classes[k] != point_classes[i] {
                    return Err(Error::invalid(format!(
                        "instance {} mixes classes {} and {} (point {i})",
                        a.unwrap(),
                        classes[k],
                        point_classes[i]
                    )));
                }
                instances[k].push(i);
            }
            canonical.push(id);
        }
        Ok(Self {
            assignment: canonical,
            instances,
            classes,
        })
    }

    /// Ground-truth instances of a cloud; points without an id are noise.
    pub fn ground_truth(cloud: &LabeledPointCloud) -> Self {
        let ids: Vec<Option<u32>> = cloud.points().iter().map(|p| p.gt_instance).collect();
        Self::from_assignment(&ids, &cloud.classes()).expect("cloud validates class purity")
    }

    /// Predicted instances stored in a cloud. Fails if any point lacks a
    /// prediction or a predicted instance mixes classes.
    pub fn predictions(cloud: &LabeledPointCloud) -> Result<Self> {
        let ids = cloud
            .points()
            .iter()
            .enumerate()
            .map(|(i, p)| {
                p.pred_instance
                    .map(Prediction::instance)
                    .ok_or_else(|| Error::invalid(format!("point {i} has no prediction")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_assignment(&ids, &cloud.classes())
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn num_instances(&self) -> usize {
        self.instances.len()
    }

    /// Per-point instance id, `None` for noise.
    pub fn assignment(&self) -> &[Option<u32>] {
        &self.assignment
    }

    /// Member indices of each instance, ascending.
    pub fn instances(&self) -> &[Vec<usize>] {
        &self.instances
    }

    pub fn instance_classes(&self) -> &[ClassLabel] {
        &self.classes
    }

    pub fn noise_count(&self) -> usize {
        self.assignment.iter().filter(|a| a.is_none()).count()
    }
}

/// Connected components of the graph whose vertices are `subset` and whose
/// edges join `i`, `j` with `d(i, j) <= epsilon` and `edge(i, j)`.
///
/// `edge` must be symmetric. Components are returned with ascending
/// members, ordered by their smallest member.
pub fn connected_components(
    subset: &[usize],
    index: &RadiusIndex,
    epsilon: f64,
    edge: impl Fn(usize, usize) -> bool,
) -> Result<Vec<Vec<usize>>> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::invalid(format!("epsilon must be positive, got {epsilon}")));
    }
    let n = index.len();
    let mut member = vec![false; n];
    for &i in subset {
        if i >= n {
            return Err(Error::invalid(format!("point index {i} out of range")));
        }
        member[i] = true;
    }
    let mut seeds: Vec<usize> = subset.to_vec();
    seeds.sort_unstable();
    seeds.dedup();

    let mut visited = vec![false; n];
    let mut queue = VecDeque::new();
    let mut components = Vec::new();
    for seed in seeds {
        if visited[seed] {
            continue;
        }
        visited[seed] = true;
        queue.push_back(seed);
        let mut component = Vec::new();
        while let Some(i) = queue.pop_front() {
            component.push(i);
            index.for_each_within(index.position(i).to_array(), epsilon, |j, _| {
                if member[j] && !visited[j] && edge(i, j) {
                    visited[j] = true;
                    queue.push_back(j);
                }
            });
        }
        component.sort_unstable();
        components.push(component);
    }
    Ok(components)
}

/// Segmentation state after reattachment but before the size filter.
///
/// Sweeps over `mu` reuse one of these instead of re-running the graph
/// search.
#[derive(Clone, Debug)]
pub struct ProvisionalSegmentation {
    boundary: Vec<bool>,
    /// Interior components, ordered by smallest member.
    components: Vec<Vec<usize>>,
    /// Provisional instance of every point; `None` for boundary points
    /// with no reachable interior point of their class.
    owner: Vec<Option<u32>>,
    point_classes: Vec<ClassLabel>,
}

impl ProvisionalSegmentation {
    pub fn boundary_flags(&self) -> &[bool] {
        &self.boundary
    }

    /// Interior components before reattachment and filtering.
    pub fn interior_components(&self) -> &[Vec<usize>] {
        &self.components
    }

    pub fn prefilter_count(&self) -> usize {
        self.components.len()
    }

    /// Provisional instance of each point after reattachment.
    pub fn owners(&self) -> &[Option<u32>] {
        &self.owner
    }

    /// Drops instances smaller than `mu` and returns the canonical labeling.
    pub fn finalize(&self, mu: usize) -> InstanceLabeling {
        let mut sizes = vec![0usize; self.components.len()];
        for o in self.owner.iter().flatten() {
            sizes[*o as usize] += 1;
        }
        let assignment: Vec<Option<u32>> = self
            .owner
            .iter()
            .map(|o| o.filter(|&k| sizes[k as usize] >= mu))
            .collect();
        InstanceLabeling::from_assignment(&assignment, &self.point_classes)
            .expect("components are class-pure")
    }
}

/// Runs boundary detection, interior graph components and reattachment.
pub fn segment_provisional(
    cloud: &LabeledPointCloud,
    index: &RadiusIndex,
    params: &SegmentationParams,
) -> Result<ProvisionalSegmentation> {
    if index.len() != cloud.len() {
        return Err(Error::invalid("index built over a different cloud"));
    }
    let boundary = detect_class_boundaries(cloud, index, params.boundary_params());
    provisional_from_flags(cloud, index, boundary, params.epsilon)
}

/// Steps 2-3 of segmentation with caller-supplied boundary flags.
pub fn provisional_from_flags(
    cloud: &LabeledPointCloud,
    index: &RadiusIndex,
    boundary: Vec<bool>,
    epsilon: f64,
) -> Result<ProvisionalSegmentation> {
    if boundary.len() != cloud.len() || index.len() != cloud.len() {
        return Err(Error::invalid("boundary flags, index and cloud differ in size"));
    }
    let classes = cloud.classes();
    let interior: Vec<usize> = (0..cloud.len()).filter(|&i| !boundary[i]).collect();
    let components = connected_components(&interior, index, epsilon, |i, j| {
        classes[i] == classes[j]
    })?;
    log::debug!(
        "{} interior points in {} components, {} boundary points",
        interior.len(),
        components.len(),
        cloud.len() - interior.len()
    );

    let mut owner: Vec<Option<u32>> = vec![None; cloud.len()];
    for (k, comp) in components.iter().enumerate() {
        for &i in comp {
            owner[i] = Some(k as u32);
        }
    }
    let search = REATTACH_RADIUS_FACTOR * epsilon;
    let attached: Vec<(usize, Option<u32>)> = (0..cloud.len())
        .into_par_iter()
        .filter(|&i| boundary[i])
        .map(|i| {
            let mut best: Option<(f64, u32)> = None;
            index.for_each_within(index.position(i).to_array(), search, |j, d2| {
                if boundary[j] || classes[j] != classes[i] {
                    return;
                }
                let k = owner[j].expect("interior points belong to a component");
                if best.is_none_or(|b| (d2, k) < b) {
                    best = Some((d2, k));
                }
            });
            (i, best.map(|(_, k)| k))
        })
        .collect();
    for (i, k) in attached {
        owner[i] = k;
    }
    Ok(ProvisionalSegmentation {
        boundary,
        components,
        owner,
        point_classes: classes,
    })
}

/// Segments a cloud into instances.
pub fn segment(cloud: &LabeledPointCloud, params: &SegmentationParams) -> InstanceLabeling {
    let index = RadiusIndex::build(&cloud.positions()).expect("cloud coordinates are finite");
    segment_with_index(cloud, &index, params).expect("index matches cloud")
}

pub fn segment_with_index(
    cloud: &LabeledPointCloud,
    index: &RadiusIndex,
    params: &SegmentationParams,
) -> Result<InstanceLabeling> {
    Ok(segment_provisional(cloud, index, params)?.finalize(params.mu))
}

/// How a single object's points fall apart at a link radius.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObjectFragmentation {
    pub points: usize,
    pub components: usize,
    pub largest: usize,
}

impl ObjectFragmentation {
    /// Share of the object's points in its largest component. Because the
    /// component is a subset of the object, this is also its IoU.
    pub fn largest_fraction(&self) -> f64 {
        self.largest as f64 / self.points as f64
    }
}

/// Connected components of one object's points with no class or boundary
/// constraint.
pub fn segment_single_object(points: &[Point3], epsilon: f64) -> Result<ObjectFragmentation> {
    if points.is_empty() {
        return Err(Error::invalid("object has no points"));
    }
    let index = RadiusIndex::build(points)?;
    fragmentation(&index, epsilon)
}

/// [`segment_single_object`] over a prebuilt index of the object's points.
pub fn fragmentation(index: &RadiusIndex, epsilon: f64) -> Result<ObjectFragmentation> {
    if index.is_empty() {
        return Err(Error::invalid("object has no points"));
    }
    let all: Vec<usize> = (0..index.len()).collect();
    let comps = connected_components(&all, index, epsilon, |_, _| true)?;
    Ok(ObjectFragmentation {
        points: index.len(),
        components: comps.len(),
        largest: comps.iter().map(Vec::len).max().unwrap_or(0),
    })
}
