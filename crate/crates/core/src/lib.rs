//! Instance segmentation for class-labeled industrial laser scans.
//!
//! The pipeline takes a point cloud whose points already carry a semantic
//! class (cylinder, elbow, I-beam, ...) and splits every class into
//! individual object instances:
//!
//! 1. points with a differently-labeled neighbor inside `r_b` are marked as
//!    class-boundary points ([`boundary`]);
//! 2. same-class interior points closer than `epsilon` are linked and the
//!    connected components of that graph become provisional instances
//!    ([`segmentation`]);
//! 3. boundary points join the nearest provisional instance of their own
//!    class, and instances below `mu` points are dropped to noise.
//!
//! [`evaluation`] scores a labeling against ground truth with IoU-matched
//! precision and recall, [`sweep`] runs the parameter studies, and
//! [`synth`] generates labeled test scenes.

pub mod boundary;
pub mod error;
pub mod evaluation;
pub mod pointcloud;
pub mod segmentation;
pub mod spatial_index;
pub mod sweep;
pub mod synth;

pub use boundary::{
    boundary_stats, detect_class_boundaries, detect_gt_instance_boundaries, BoundaryParams,
    BoundaryStats,
};
pub use error::{Error, Result};
pub use evaluation::{iou, match_instances, rec_ins, score, EvalReport, MatchResult};
pub use pointcloud::{
    class_histogram, farthest_point_subsample, load_pts, save_pts, ClassLabel, LabeledPointCloud,
    Point3, PointRecord,
};
pub use segmentation::{
    connected_components, segment, segment_single_object, InstanceLabeling, ObjectFragmentation,
    SegmentationParams,
};
pub use spatial_index::RadiusIndex;
