//! Deterministic synthetic scenes with exact ground truth.
//!
//! Shapes are sampled on a jittered parametric grid whose cell size is
//! `1 / sqrt(density)`, so neighboring samples are never far apart and the
//! count tracks `density * area`. `jitter` scales the random offset inside
//! each cell (0 = cell centers). Gaussian noise is applied along the
//! surface normal.
//!
//! Randomness comes from ChaCha8 (`rand_chacha`), which produces the same
//! stream on every platform. A scene with seed `s` samples shape `k` from
//! the ChaCha8 stream `k + 1` of key `s`; stream 0 feeds the clutter.
//!
//! # JSON scene schema
//!
//! ```json
//! {
//!   "seed": 7,
//!   "shapes": [
//!     {
//!       "class_label": "cylinder",
//!       "geometry": { "type": "cylinder", "radius": 0.05, "length": 1.0 },
//!       "pose": { "origin": {"x": 0, "y": 0, "z": 0}, "axis": {"x": 0, "y": 0, "z": 1} },
//!       "density": 10000,
//!       "noise_sigma": 0.001,
//!       "gaps": [[0.4, 0.45]],
//!       "jitter": 1.0
//!     }
//!   ],
//!   "clutter": { "min": {"x": -1, "y": -1, "z": 0}, "max": {"x": 1, "y": 1, "z": 1}, "count": 500 },
//!   "min_gap": 0.2
//! }
//! ```
//!
//! Lengths are meters and densities points per square meter. `gaps` are
//! intervals along the shape's length (the centerline arc for elbows) and
//! are only allowed on cylinders, elbows and extruded profiles. `noise_sigma`,
//! `gaps`, `jitter`, `clutter` and `min_gap` are optional.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pointcloud::{ClassLabel, LabeledPointCloud, Point3, PointRecord};

type V3 = [f64; 3];

fn add(a: V3, b: V3) -> V3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn scale(a: V3, s: f64) -> V3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn cross(a: V3, b: V3) -> V3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm(a: V3) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

fn normalize(a: V3) -> V3 {
    scale(a, 1.0 / norm(a))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub origin: Point3,
    /// Main axis of the shape; need not be unit length.
    pub axis: Point3,
}

impl Pose {
    pub fn new(origin: Point3, axis: Point3) -> Self {
        Self { origin, axis }
    }

    /// Right-handed frame `(u, v, w)` with `w` along the axis.
    fn frame(&self) -> Result<[V3; 3]> {
        let a = self.axis.to_array();
        let n = norm(a);
        if !(n.is_finite() && n > 0.0) || !self.origin.is_finite() {
            return Err(Error::invalid("pose axis must be a finite non-zero vector"));
        }
        let w = scale(a, 1.0 / n);
        let helper = if w[2].abs() < 0.9 { [0.0, 0.0, 1.0] } else { [1.0, 0.0, 0.0] };
        let u = normalize(cross(helper, w));
        let v = cross(w, u);
        Ok([u, v, w])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Geometry {
    /// Lateral surface, from the origin along the axis.
    Cylinder { radius: f64, length: f64 },
    /// Torus sector starting at the origin heading along the axis and
    /// bending towards the frame's `u` direction.
    Elbow {
        bend_radius: f64,
        tube_radius: f64,
        sweep_deg: f64,
    },
    #[serde(rename = "ibeam")]
    IBeam {
        height: f64,
        flange_width: f64,
        length: f64,
    },
    Angle { leg_a: f64, leg_b: f64, length: f64 },
    Channel {
        height: f64,
        flange_width: f64,
        length: f64,
    },
    /// Annulus in the plane through the origin plus a collar tube along
    /// the axis.
    Flange {
        bore_radius: f64,
        outer_radius: f64,
        collar_radius: f64,
        collar_length: f64,
    },
    /// Spherical body at the origin, stem along the axis, and a handwheel
    /// with four spokes on top of the stem.
    Valve {
        body_radius: f64,
        stem_radius: f64,
        stem_length: f64,
        wheel_radius: f64,
        wheel_tube_radius: f64,
    },
    /// Uniform points inside a box centered on the origin. The point count
    /// is `density * extent[0] * extent[1]`.
    Clutter { extent: [f64; 3] },
}

impl Geometry {
    pub fn class(&self) -> ClassLabel {
        match self {
            Geometry::Cylinder { .. } => ClassLabel::Cylinder,
            Geometry::Elbow { .. } => ClassLabel::Elbow,
            Geometry::IBeam { .. } => ClassLabel::IBeam,
            Geometry::Angle { .. } => ClassLabel::Angle,
            Geometry::Channel { .. } => ClassLabel::Channel,
            Geometry::Flange { .. } => ClassLabel::Flange,
            Geometry::Valve { .. } => ClassLabel::Valve,
            Geometry::Clutter { .. } => ClassLabel::Other,
        }
    }

    /// Length of the domain that `gaps` refer to, if gaps are supported.
    fn gap_domain(&self) -> Option<f64> {
        match *self {
            Geometry::Cylinder { length, .. }
            | Geometry::IBeam { length, .. }
            | Geometry::Angle { length, .. }
            | Geometry::Channel { length, .. } => Some(length),
            Geometry::Elbow {
                bend_radius,
                sweep_deg,
                ..
            } => Some(bend_radius * sweep_deg.to_radians()),
            _ => None,
        }
    }

    fn validate(&self) -> Result<()> {
        let positive = |vals: &[f64]| vals.iter().all(|v| v.is_finite() && *v > 0.0);
        let ok = match *self {
            Geometry::Cylinder { radius, length } => positive(&[radius, length]),
            Geometry::Elbow {
                bend_radius,
                tube_radius,
                sweep_deg,
            } => {
                positive(&[bend_radius, tube_radius, sweep_deg])
                    && tube_radius < bend_radius
                    && sweep_deg <= 360.0
            }
            Geometry::IBeam {
                height,
                flange_width,
                length,
            }
            | Geometry::Channel {
                height,
                flange_width,
                length,
            } => positive(&[height, flange_width, length]),
            Geometry::Angle {
                leg_a,
                leg_b,
                length,
            } => positive(&[leg_a, leg_b, length]),
            Geometry::Flange {
                bore_radius,
                outer_radius,
                collar_radius,
                collar_length,
            } => {
                positive(&[bore_radius, outer_radius, collar_radius, collar_length])
                    && bore_radius < outer_radius
                    && collar_radius >= bore_radius
                    && collar_radius <= outer_radius
            }
            Geometry::Valve {
                body_radius,
                stem_radius,
                stem_length,
                wheel_radius,
                wheel_tube_radius,
            } => {
                positive(&[
                    body_radius,
                    stem_radius,
                    stem_length,
                    wheel_radius,
                    wheel_tube_radius,
                ]) && stem_radius < body_radius
                    && wheel_tube_radius < wheel_radius
            }
            Geometry::Clutter { extent } => positive(&extent),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid dimensions for {self:?}")))
        }
    }
}

fn default_jitter() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeSpec {
    pub class_label: ClassLabel,
    pub geometry: Geometry,
    pub pose: Pose,
    /// Points per square meter.
    pub density: f64,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub gaps: Vec<[f64; 2]>,
    #[serde(default = "default_jitter")]
    pub jitter: f64,
}

impl ShapeSpec {
    /// A shape labeled with its geometry's natural class, no noise, no gaps
    /// and full jitter.
    pub fn new(geometry: Geometry, pose: Pose, density: f64) -> Self {
        Self {
            class_label: geometry.class(),
            geometry,
            pose,
            density,
            noise_sigma: 0.0,
            gaps: Vec::new(),
            jitter: 1.0,
        }
    }

    pub fn with_noise(mut self, sigma: f64) -> Self {
        self.noise_sigma = sigma;
        self
    }

    pub fn with_gaps(mut self, gaps: Vec<[f64; 2]>) -> Self {
        self.gaps = gaps;
        self
    }

    pub fn with_jitter(mut self, jitter: f64) -> Self {
        self.jitter = jitter;
        self
    }

    /// Grid cell size in meters.
    pub fn spacing(&self) -> f64 {
        1.0 / self.density.sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        if self.class_label != self.geometry.class() {
            return Err(Error::invalid(format!(
                "class {} is not supported by a {:?} sampler",
                self.class_label,
                self.geometry.class()
            )));
        }
        self.geometry.validate()?;
        if !(self.density.is_finite() && self.density > 0.0) {
            return Err(Error::invalid("density must be positive"));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::invalid("noise sigma must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.jitter) {
            return Err(Error::invalid("jitter must be in [0, 1]"));
        }
        self.pose.frame()?;
        if !self.gaps.is_empty() {
            let domain = self
                .geometry
                .gap_domain()
                .ok_or_else(|| Error::invalid("gaps are not supported on this shape"))?;
            for g in &self.gaps {
                if !(g[0].is_finite() && g[1].is_finite() && 0.0 <= g[0] && g[0] < g[1] && g[1] <= domain) {
                    return Err(Error::invalid(format!("gap {g:?} outside [0, {domain}]")));
                }
            }
        }
        Ok(())
    }

    /// Intervals of the length domain that keep their points.
    fn kept_intervals(&self, length: f64) -> Vec<(f64, f64)> {
        let mut gaps = self.gaps.clone();
        gaps.sort_by(|a, b| a[0].total_cmp(&b[0]));
        let mut out = Vec::new();
        let mut start = 0.0;
        for g in gaps {
            if g[0] > start {
                out.push((start, g[0]));
            }
            start = f64::max(start, g[1]);
        }
        if start < length {
            out.push((start, length));
        }
        out
    }
}

/// Number of cells of size at most `s` covering `len`.
fn cells(len: f64, s: f64) -> usize {
    ((len / s - 1e-9).ceil() as usize).max(1)
}

struct Sampler<'a> {
    rng: &'a mut ChaCha8Rng,
    frame: [V3; 3],
    origin: V3,
    spacing: f64,
    jitter: f64,
    sigma: f64,
    out: Vec<Point3>,
}

impl Sampler<'_> {
    /// Position of cell `i` of `n` in `[lo, hi]`, jittered.
    fn cell(&mut self, i: usize, n: usize, lo: f64, hi: f64) -> f64 {
        let off = 0.5 + self.jitter * (self.rng.random::<f64>() - 0.5);
        lo + (hi - lo) * (i as f64 + off) / n as f64
    }

    /// Emits a local-frame point with its local unit normal.
    fn emit(&mut self, local: V3, normal: V3) {
        let n: f64 = if self.sigma > 0.0 {
            self.rng.sample::<f64, _>(StandardNormal) * self.sigma
        } else {
            0.0
        };
        let l = add(local, scale(normal, n));
        let [u, v, w] = self.frame;
        let p = add(
            self.origin,
            add(add(scale(u, l[0]), scale(v, l[1])), scale(w, l[2])),
        );
        self.out.push(Point3::from(p));
    }

    /// Tube of `radius` around the segment `a → b` (local coordinates),
    /// restricted to the `along` sub-intervals of `[0, |b - a|]`.
    fn tube(&mut self, a: V3, b: V3, radius: f64, along: &[(f64, f64)]) {
        let d = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
        let len = norm(d);
        let t = scale(d, 1.0 / len);
        let helper = if t[2].abs() < 0.9 { [0.0, 0.0, 1.0] } else { [1.0, 0.0, 0.0] };
        let e1 = normalize(cross(helper, t));
        let e2 = cross(t, e1);
        let nc = cells(TAU * radius, self.spacing);
        for &(lo, hi) in along {
            let nl = cells(hi - lo, self.spacing);
            for i in 0..nl {
                for j in 0..nc {
                    let s = self.cell(i, nl, lo, hi);
                    let th = self.cell(j, nc, 0.0, TAU);
                    let normal = add(scale(e1, th.cos()), scale(e2, th.sin()));
                    let p = add(add(a, scale(t, s)), scale(normal, radius));
                    self.emit(p, normal);
                }
            }
        }
    }

    /// Flat strip from `a` to `b` in the local u-v plane, extruded along w.
    fn plate(&mut self, a: [f64; 2], b: [f64; 2], along: &[(f64, f64)]) {
        let d = [b[0] - a[0], b[1] - a[1]];
        let width = (d[0] * d[0] + d[1] * d[1]).sqrt();
        let normal = [-d[1] / width, d[0] / width, 0.0];
        let nw = cells(width, self.spacing);
        for &(lo, hi) in along {
            let nl = cells(hi - lo, self.spacing);
            for i in 0..nl {
                for j in 0..nw {
                    let z = self.cell(i, nl, lo, hi);
                    let f = self.cell(j, nw, 0.0, 1.0);
                    self.emit([a[0] + f * d[0], a[1] + f * d[1], z], normal);
                }
            }
        }
    }

    /// Ring of radii `[r0, r1]` in the plane `w = z`, one circle of cells
    /// per radial step.
    fn annulus(&mut self, r0: f64, r1: f64, z: f64) {
        let nr = cells(r1 - r0, self.spacing);
        for i in 0..nr {
            let mid = r0 + (r1 - r0) * (i as f64 + 0.5) / nr as f64;
            let nc = cells(TAU * mid, self.spacing);
            for j in 0..nc {
                let r = self.cell(i, nr, r0, r1);
                let th = self.cell(j, nc, 0.0, TAU);
                self.emit([r * th.cos(), r * th.sin(), z], [0.0, 0.0, 1.0]);
            }
        }
    }

    /// Torus sector: centerline circle of `bend` radius around the point
    /// `center`, lying in the plane spanned by local `e_a` and `e_b`,
    /// from angle 0 to `sweep`. The centerline at angle `a` is
    /// `center + bend * (cos(a) e_a + sin(a) e_b)`. Kept intervals are
    /// centerline arc lengths.
    #[allow(clippy::too_many_arguments)]
    fn torus(
        &mut self,
        center: V3,
        e_a: V3,
        e_b: V3,
        bend: f64,
        tube: f64,
        sweep: f64,
        along: &[(f64, f64)],
    ) {
        let binormal = cross(e_a, e_b);
        let stretch = (bend + tube) / bend;
        let nc = cells(TAU * tube, self.spacing);
        for &(lo, hi) in along {
            let nl = cells((hi - lo) * stretch, self.spacing);
            for i in 0..nl {
                for j in 0..nc {
                    let s = self.cell(i, nl, lo, hi);
                    let a = (s / bend).min(sweep);
                    let radial = add(scale(e_a, a.cos()), scale(e_b, a.sin()));
                    let psi = self.cell(j, nc, 0.0, TAU);
                    let normal = add(scale(radial, psi.cos()), scale(binormal, psi.sin()));
                    let p = add(add(center, scale(radial, bend)), scale(normal, tube));
                    self.emit(p, normal);
                }
            }
        }
    }

    /// Sphere of `radius` at the local origin, by latitude rings.
    fn sphere(&mut self, radius: f64) {
        let nt = cells(PI * radius, self.spacing);
        for i in 0..nt {
            let mid = PI * (i as f64 + 0.5) / nt as f64;
            let nc = cells(TAU * radius * mid.sin(), self.spacing);
            for j in 0..nc {
                let theta = self.cell(i, nt, 0.0, PI);
                let phi = self.cell(j, nc, 0.0, TAU);
                let n = [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()];
                self.emit(scale(n, radius), n);
            }
        }
    }
}

/// Samples one shape with its own seeded stream.
pub fn sample_shape(shape: &ShapeSpec, seed: u64) -> Result<Vec<Point3>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_with(shape, &mut rng)
}

fn sample_with(shape: &ShapeSpec, rng: &mut ChaCha8Rng) -> Result<Vec<Point3>> {
    shape.validate()?;
    let frame = shape.pose.frame()?;
    let mut s = Sampler {
        rng,
        frame,
        origin: shape.pose.origin.to_array(),
        spacing: shape.spacing(),
        jitter: shape.jitter,
        sigma: shape.noise_sigma,
        out: Vec::new(),
    };
    match shape.geometry {
        Geometry::Cylinder { radius, length } => {
            let kept = shape.kept_intervals(length);
            s.tube([0.0; 3], [0.0, 0.0, length], radius, &kept);
        }
        Geometry::Elbow {
            bend_radius,
            tube_radius,
            sweep_deg,
        } => {
            let sweep = sweep_deg.to_radians();
            let kept = shape.kept_intervals(bend_radius * sweep);
            // bend center at +u; the centerline starts at the origin heading along w
            s.torus(
                [bend_radius, 0.0, 0.0],
                [-1.0, 0.0, 0.0],
                [0.0, 0.0, 1.0],
                bend_radius,
                tube_radius,
                sweep,
                &kept,
            );
        }
        Geometry::IBeam {
            height,
            flange_width,
            length,
        } => {
            let kept = shape.kept_intervals(length);
            let (h, w) = (height / 2.0, flange_width / 2.0);
            s.plate([0.0, -h], [0.0, h], &kept);
            s.plate([-w, h], [w, h], &kept);
            s.plate([-w, -h], [w, -h], &kept);
        }
        Geometry::Angle {
            leg_a,
            leg_b,
            length,
        } => {
            let kept = shape.kept_intervals(length);
            s.plate([0.0, 0.0], [leg_a, 0.0], &kept);
            s.plate([0.0, 0.0], [0.0, leg_b], &kept);
        }
        Geometry::Channel {
            height,
            flange_width,
            length,
        } => {
            let kept = shape.kept_intervals(length);
            let h = height / 2.0;
            s.plate([0.0, -h], [0.0, h], &kept);
            s.plate([0.0, h], [flange_width, h], &kept);
            s.plate([0.0, -h], [flange_width, -h], &kept);
        }
        Geometry::Flange {
            bore_radius,
            outer_radius,
            collar_radius,
            collar_length,
        } => {
            s.annulus(bore_radius, outer_radius, 0.0);
            s.tube(
                [0.0; 3],
                [0.0, 0.0, collar_length],
                collar_radius,
                &[(0.0, collar_length)],
            );
        }
        Geometry::Valve {
            body_radius,
            stem_radius,
            stem_length,
            wheel_radius,
            wheel_tube_radius,
        } => {
            s.sphere(body_radius);
            let z0 = (body_radius * body_radius - stem_radius * stem_radius).sqrt();
            let top = z0 + stem_length;
            s.tube([0.0, 0.0, z0], [0.0, 0.0, top], stem_radius, &[(0.0, stem_length)]);
            s.torus(
                [0.0, 0.0, top],
                [1.0, 0.0, 0.0],
                [0.0, 1.0, 0.0],
                wheel_radius,
                wheel_tube_radius,
                TAU,
                &[(0.0, wheel_radius * TAU)],
            );
            for dir in [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]] {
                let end = [dir[0] * wheel_radius, dir[1] * wheel_radius, top];
                let spoke = wheel_radius;
                s.tube([0.0, 0.0, top], end, wheel_tube_radius, &[(0.0, spoke)]);
            }
        }
        Geometry::Clutter { extent } => {
            let count = (shape.density * extent[0] * extent[1]).round() as usize;
            for _ in 0..count {
                let p = [
                    (s.rng.random::<f64>() - 0.5) * extent[0],
                    (s.rng.random::<f64>() - 0.5) * extent[1],
                    (s.rng.random::<f64>() - 0.5) * extent[2],
                ];
                s.emit(p, [0.0, 0.0, 0.0]);
            }
        }
    }
    Ok(s.out)
}

/// Random "other" points spread uniformly over a box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClutterSpec {
    pub min: Point3,
    pub max: Point3,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub seed: u64,
    pub shapes: Vec<ShapeSpec>,
    #[serde(default)]
    pub clutter: Option<ClutterSpec>,
    /// Smallest surface gap between distinct shapes the author intends;
    /// bookkeeping for tests, not enforced.
    #[serde(default)]
    pub min_gap: Option<f64>,
}

impl SceneSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene specs serialize")
    }
}

/// Samples every shape and the clutter. Shape `k` becomes ground-truth
/// instance `k`; scattered clutter is one extra "other" instance.
pub fn generate_scene(spec: &SceneSpec) -> Result<LabeledPointCloud> {
    for (k, shape) in spec.shapes.iter().enumerate() {
        shape
            .validate()
            .map_err(|e| Error::invalid(format!("shape {k}: {e}")))?;
    }
    let mut records = Vec::new();
    for (k, shape) in spec.shapes.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(k as u64 + 1);
        for p in sample_with(shape, &mut rng)? {
            records.push(PointRecord::new(p, shape.class_label, Some(k as u32)));
        }
    }
    if let Some(c) = &spec.clutter {
        let (lo, hi) = (c.min.to_array(), c.max.to_array());
        if !(0..3).all(|a| lo[a].is_finite() && hi[a].is_finite() && lo[a] <= hi[a]) {
            return Err(Error::invalid("clutter box min must not exceed max"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(0);
        let id = spec.shapes.len() as u32;
        for _ in 0..c.count {
            let p = Point3::new(
                rng.random_range(lo[0]..=hi[0]),
                rng.random_range(lo[1]..=hi[1]),
                rng.random_range(lo[2]..=hi[2]),
            );
            records.push(PointRecord::new(p, ClassLabel::Other, Some(id)));
        }
    }
    LabeledPointCloud::new(records)
}

/// Outcome a benchmark scene is built to produce at the default parameters.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expectation {
    /// Every instance is recovered exactly.
    PerfectSegmentation,
    /// Scan gaps wider than epsilon split some objects.
    OverSegmentation,
    /// Same-class objects closer than epsilon merge.
    Merging,
    /// Scattered clutter yields small noise components.
    ClutterNoise,
    /// The radius rule should pick this epsilon (meters).
    SelectsEpsilon(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub profile: String,
    pub epsilon: f64,
    pub mu: usize,
    /// Smallest surface gap between distinct instances.
    pub min_inter_object_gap: f64,
    /// Largest deliberate gap inside one instance (0 if none).
    pub max_declared_intra_gap: f64,
    pub noise_sigma: f64,
    pub expectations: Vec<Expectation>,
}

pub const PROFILES: [&str; 6] = ["dense", "sparse", "close", "cluttered", "refinery-like", "gapped"];

/// Ready-made scenes with the properties they are expected to show.
///
/// Different seeds change shape choice, sizes, orientations and sampling,
/// but never the manifest.
pub fn make_benchmark_suite(profile: &str, seed: u64) -> Result<Vec<(SceneSpec, Manifest)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scenes = match profile {
        "dense" => vec![dense_scene(&mut rng, seed, 12)],
        "sparse" => vec![sparse_scene(&mut rng, seed)],
        "close" | "dense+close" => vec![close_scene(&mut rng, seed)],
        "cluttered" => vec![cluttered_scene(&mut rng, seed)],
        "refinery-like" => vec![refinery_scene(&mut rng, seed)],
        "gapped" => vec![gapped_scene(&mut rng, seed)],
        other => {
            return Err(Error::invalid(format!(
                "unknown profile `{other}` (expected one of {})",
                PROFILES.join(", ")
            )))
        }
    };
    Ok(scenes)
}

const DENSE: f64 = 10_000.0;
const SIGMA: f64 = 0.001;
const CELL: f64 = 1.0;

fn random_axis(rng: &mut ChaCha8Rng) -> Point3 {
    loop {
        let v: V3 = [
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ];
        let n = norm(v);
        if n > 0.2 && n <= 1.0 {
            return Point3::from(scale(v, 1.0 / n));
        }
    }
}

/// A random object of a random class fitting in a 0.35 m ball around
/// `center`.
fn random_object(rng: &mut ChaCha8Rng, center: V3, density: f64) -> ShapeSpec {
    let axis = random_axis(rng);
    let a = axis.to_array();
    let back = |len: f64| Point3::from(add(center, scale(a, -len / 2.0)));
    let class = ClassLabel::CLOI[rng.random_range(0..7)];
    let (geometry, origin) = match class {
        ClassLabel::Cylinder => {
            let length = rng.random_range(0.3..0.6);
            (
                Geometry::Cylinder {
                    radius: rng.random_range(0.03..0.1),
                    length,
                },
                back(length),
            )
        }
        ClassLabel::Elbow => (
            Geometry::Elbow {
                bend_radius: rng.random_range(0.12..0.2),
                tube_radius: rng.random_range(0.03..0.06),
                sweep_deg: if rng.random_bool(0.5) { 90.0 } else { 180.0 },
            },
            Point3::from(add(center, [-0.1, 0.0, -0.1])),
        ),
        ClassLabel::IBeam => {
            let length = rng.random_range(0.3..0.6);
            (
                Geometry::IBeam {
                    height: rng.random_range(0.1..0.25),
                    flange_width: rng.random_range(0.08..0.15),
                    length,
                },
                back(length),
            )
        }
        ClassLabel::Angle => {
            let length = rng.random_range(0.3..0.6);
            (
                Geometry::Angle {
                    leg_a: rng.random_range(0.05..0.12),
                    leg_b: rng.random_range(0.05..0.12),
                    length,
                },
                back(length),
            )
        }
        ClassLabel::Channel => {
            let length = rng.random_range(0.3..0.6);
            (
                Geometry::Channel {
                    height: rng.random_range(0.1..0.2),
                    flange_width: rng.random_range(0.05..0.1),
                    length,
                },
                back(length),
            )
        }
        ClassLabel::Flange => (
            Geometry::Flange {
                bore_radius: rng.random_range(0.04..0.07),
                outer_radius: rng.random_range(0.1..0.15),
                collar_radius: 0.075,
                collar_length: rng.random_range(0.05..0.1),
            },
            Point3::from(center),
        ),
        _ => (
            Geometry::Valve {
                body_radius: rng.random_range(0.06..0.1),
                stem_radius: 0.015,
                stem_length: rng.random_range(0.08..0.12),
                wheel_radius: rng.random_range(0.06..0.1),
                wheel_tube_radius: 0.008,
            },
            Point3::from(add(center, scale(a, -0.1))),
        ),
    };
    let geometry = match geometry {
        Geometry::Flange {
            bore_radius,
            outer_radius,
            collar_length,
            ..
        } => Geometry::Flange {
            bore_radius,
            outer_radius,
            collar_radius: (bore_radius + outer_radius) / 2.0,
            collar_length,
        },
        g => g,
    };
    ShapeSpec::new(geometry, Pose::new(origin, axis), density).with_noise(SIGMA)
}

fn grid_center(k: usize, cols: usize, jitter: V3) -> V3 {
    let (i, j) = (k % cols, k / cols);
    add([i as f64 * CELL, j as f64 * CELL, 0.0], jitter)
}

fn scene_offset(rng: &mut ChaCha8Rng) -> V3 {
    [
        rng.random_range(-10.0..10.0),
        rng.random_range(-10.0..10.0),
        rng.random_range(0.0..5.0),
    ]
}

/// Well separated objects sampled at 1 cm; every object should be
/// recovered exactly at epsilon = 4 cm.
fn dense_scene(rng: &mut ChaCha8Rng, seed: u64, count: usize) -> (SceneSpec, Manifest) {
    let offset = scene_offset(rng);
    let shapes = (0..count)
        .map(|k| random_object(rng, grid_center(k, 4, offset), DENSE))
        .collect();
    (
        SceneSpec {
            seed,
            shapes,
            clutter: None,
            min_gap: Some(CELL - 0.7),
        },
        Manifest {
            profile: "dense".into(),
            epsilon: 0.04,
            mu: 20,
            min_inter_object_gap: CELL - 0.7,
            max_declared_intra_gap: 0.0,
            noise_sigma: SIGMA,
            expectations: vec![Expectation::PerfectSegmentation],
        },
    )
}

fn straight(rng: &mut ChaCha8Rng, center: V3, length: f64, density: f64) -> (Geometry, Pose) {
    let axis = random_axis(rng);
    let origin = Point3::from(add(center, scale(axis.to_array(), -length / 2.0)));
    let geometry = match rng.random_range(0..4) {
        0 => Geometry::Cylinder {
            radius: rng.random_range(0.04..0.08),
            length,
        },
        1 => Geometry::IBeam {
            height: rng.random_range(0.1..0.2),
            flange_width: rng.random_range(0.08..0.12),
            length,
        },
        2 => Geometry::Angle {
            leg_a: rng.random_range(0.06..0.1),
            leg_b: rng.random_range(0.06..0.1),
            length,
        },
        _ => Geometry::Channel {
            height: rng.random_range(0.1..0.16),
            flange_width: rng.random_range(0.05..0.08),
            length,
        },
    };
    let _ = density;
    (geometry, Pose::new(origin, axis))
}

/// Sparse 2 cm sampling with 5 cm scan gaps in every straight object.
fn sparse_scene(rng: &mut ChaCha8Rng, seed: u64) -> (SceneSpec, Manifest) {
    let offset = scene_offset(rng);
    let density = 2_500.0;
    let shapes = (0..8)
        .map(|k| {
            let (g, pose) = straight(rng, grid_center(k, 4, offset), 0.6, density);
            ShapeSpec::new(g, pose, density)
                .with_noise(SIGMA)
                .with_gaps(vec![[0.27, 0.32]])
        })
        .collect();
    (
        SceneSpec {
            seed,
            shapes,
            clutter: None,
            min_gap: Some(CELL - 0.7),
        },
        Manifest {
            profile: "sparse".into(),
            epsilon: 0.04,
            mu: 20,
            min_inter_object_gap: CELL - 0.7,
            max_declared_intra_gap: 0.05,
            noise_sigma: SIGMA,
            expectations: vec![Expectation::OverSegmentation],
        },
    )
}

/// Bundles of parallel conduits 2 cm apart, as in a cable tray.
fn close_scene(rng: &mut ChaCha8Rng, seed: u64) -> (SceneSpec, Manifest) {
    let offset = scene_offset(rng);
    let mut shapes = Vec::new();
    for bundle in 0..3 {
        let radius = rng.random_range(0.02..0.04);
        let length = rng.random_range(0.8..1.2);
        let base = add(offset, [0.0, bundle as f64 * 1.5, 0.0]);
        for k in 0..4 {
            let x = k as f64 * (2.0 * radius + 0.02);
            shapes.push(
                ShapeSpec::new(
                    Geometry::Cylinder { radius, length },
                    Pose::new(Point3::from(add(base, [x, 0.0, 0.0])), Point3::new(0.0, 1.0, 0.0)),
                    DENSE,
                )
                .with_noise(SIGMA),
            );
        }
    }
    (
        SceneSpec {
            seed,
            shapes,
            clutter: None,
            min_gap: Some(0.02),
        },
        Manifest {
            profile: "close".into(),
            epsilon: 0.04,
            mu: 20,
            min_inter_object_gap: 0.02,
            max_declared_intra_gap: 0.0,
            noise_sigma: SIGMA,
            expectations: vec![Expectation::Merging],
        },
    )
}

/// Separated objects under a sparse haze of clutter points.
fn cluttered_scene(rng: &mut ChaCha8Rng, seed: u64) -> (SceneSpec, Manifest) {
    let (mut scene, _) = dense_scene(rng, seed, 8);
    let lo = scene
        .shapes
        .iter()
        .map(|s| s.pose.origin.to_array())
        .fold([f64::INFINITY; 3], |a, b| [a[0].min(b[0]), a[1].min(b[1]), a[2].min(b[2])]);
    let hi = scene
        .shapes
        .iter()
        .map(|s| s.pose.origin.to_array())
        .fold([f64::NEG_INFINITY; 3], |a, b| [a[0].max(b[0]), a[1].max(b[1]), a[2].max(b[2])]);
    scene.clutter = Some(ClutterSpec {
        min: Point3::from(add(lo, [-0.5; 3])),
        max: Point3::from(add(hi, [0.5; 3])),
        count: 3000,
    });
    (
        scene,
        Manifest {
            profile: "cluttered".into(),
            epsilon: 0.04,
            mu: 20,
            min_inter_object_gap: 0.0,
            max_declared_intra_gap: 0.0,
            noise_sigma: SIGMA,
            expectations: vec![Expectation::ClutterNoise],
        },
    )
}

/// Mixed plant section: separated objects, a close conduit bundle, pipes
/// butt-joined with no gap, flanges welded onto pipes and a scan gap.
fn refinery_scene(rng: &mut ChaCha8Rng, seed: u64) -> (SceneSpec, Manifest) {
    let (mut scene, _) = dense_scene(rng, seed, 6);
    let base = add(
        scene.shapes[0].pose.origin.to_array(),
        [0.0, 3.0 * CELL, 0.0],
    );
    let y = Point3::new(0.0, 1.0, 0.0);
    // conduit bundle, 2 cm apart
    for k in 0..3 {
        scene.shapes.push(
            ShapeSpec::new(
                Geometry::Cylinder {
                    radius: 0.025,
                    length: 1.0,
                },
                Pose::new(Point3::from(add(base, [k as f64 * 0.07, 0.0, 0.0])), y),
                DENSE,
            )
            .with_noise(SIGMA),
        );
    }
    // two pipes joined end to end with no gap
    let joint = add(base, [1.0, 0.0, 0.0]);
    for k in 0..2 {
        scene.shapes.push(
            ShapeSpec::new(
                Geometry::Cylinder {
                    radius: 0.06,
                    length: 0.5,
                },
                Pose::new(Point3::from(add(joint, [0.0, k as f64 * 0.5, 0.0])), y),
                DENSE,
            )
            .with_noise(SIGMA),
        );
    }
    // a pipe with a flange welded to its end
    let weld = add(base, [2.0, 0.0, 0.0]);
    scene.shapes.push(
        ShapeSpec::new(
            Geometry::Cylinder {
                radius: 0.05,
                length: 0.5,
            },
            Pose::new(Point3::from(weld), y),
            DENSE,
        )
        .with_noise(SIGMA),
    );
    scene.shapes.push(
        ShapeSpec::new(
            Geometry::Flange {
                bore_radius: 0.05,
                outer_radius: 0.12,
                collar_radius: 0.05,
                collar_length: 0.05,
            },
            Pose::new(Point3::from(add(weld, [0.0, 0.5, 0.0])), y),
            DENSE,
        )
        .with_noise(SIGMA),
    );
    // a pipe with a 6 cm scan gap in the middle
    scene.shapes.push(
        ShapeSpec::new(
            Geometry::Cylinder {
                radius: 0.05,
                length: 0.8,
            },
            Pose::new(Point3::from(add(base, [3.0, 0.0, 0.0])), y),
            DENSE,
        )
        .with_noise(SIGMA)
        .with_gaps(vec![[0.37, 0.43]]),
    );
    scene.min_gap = Some(0.0);
    (
        scene,
        Manifest {
            profile: "refinery-like".into(),
            epsilon: 0.04,
            mu: 20,
            min_inter_object_gap: 0.0,
            max_declared_intra_gap: 0.06,
            noise_sigma: SIGMA,
            expectations: vec![Expectation::Merging, Expectation::OverSegmentation],
        },
    )
}

/// Straight objects cut into thirds by two 3.5 cm gaps, sampled on a
/// regular 4 mm grid without noise.
fn gapped_scene(rng: &mut ChaCha8Rng, seed: u64) -> (SceneSpec, Manifest) {
    let offset = scene_offset(rng);
    let density = 1.0 / (0.004 * 0.004);
    let length = 0.6;
    let shapes = (0..8)
        .map(|k| {
            let (g, pose) = straight(rng, grid_center(k, 4, offset), length, density);
            let a = length / 3.0 - 0.0175;
            let b = 2.0 * length / 3.0 - 0.0175;
            ShapeSpec::new(g, pose, density)
                .with_jitter(0.0)
                .with_gaps(vec![[a, a + 0.035], [b, b + 0.035]])
        })
        .collect();
    (
        SceneSpec {
            seed,
            shapes,
            clutter: None,
            min_gap: Some(CELL - 0.7),
        },
        Manifest {
            profile: "gapped".into(),
            epsilon: 0.04,
            mu: 20,
            min_inter_object_gap: CELL - 0.7,
            max_declared_intra_gap: 0.035,
            noise_sigma: 0.0,
            expectations: vec![Expectation::SelectsEpsilon("0.04".into())],
        },
    )
}
