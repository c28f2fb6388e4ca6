//! Static k-d tree for fixed-radius neighbor queries.
//!
//! Queries use a closed ball (`d <= r`) and compare squared distances.

use crate::error::{Error, Result};
use crate::pointcloud::Point3;

const LEAF_SIZE: usize = 16;

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        start: u32,
        end: u32,
    },
    Split {
        axis: u8,
        value: f64,
        left: u32,
        right: u32,
    },
}

/// Immutable radius-search index over a sequence of positions.
///
/// The tree keeps its own copy of the coordinates, permuted into leaf
/// order so that leaf scans touch contiguous memory.
#[derive(Debug, Clone)]
pub struct RadiusIndex {
    nodes: Vec<Node>,
    /// Coordinates in leaf order.
    coords: Vec<[f64; 3]>,
    /// Original index of each entry of `coords`.
    order: Vec<u32>,
    /// Coordinates in original order.
    positions: Vec<[f64; 3]>,
}

impl RadiusIndex {
    pub fn build(positions: &[Point3]) -> Result<Self> {
        if positions.len() > u32::MAX as usize {
            return Err(Error::invalid("too many points for the index"));
        }
        if let Some(i) = positions.iter().position(|p| !p.is_finite()) {
            return Err(Error::invalid(format!("point {i} has a non-finite coordinate")));
        }
        let positions: Vec<[f64; 3]> = positions.iter().map(|p| p.to_array()).collect();
        let mut order: Vec<u32> = (0..positions.len() as u32).collect();
        let mut nodes = Vec::with_capacity(2 * positions.len() / LEAF_SIZE + 1);
        if !positions.is_empty() {
            build_node(&positions, &mut order, 0, &mut nodes);
        }
        let coords = order.iter().map(|&i| positions[i as usize]).collect();
        Ok(Self {
            nodes,
            coords,
            order,
            positions,
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn position(&self, i: usize) -> Point3 {
        self.positions[i].into()
    }

    /// Indices `j != i` with `d(P_i, P_j) <= r`, sorted ascending.
    pub fn radius_query(&self, i: usize, r: f64) -> Result<Vec<usize>> {
        if i >= self.len() {
            return Err(Error::invalid(format!(
                "point index {i} out of range for {} points",
                self.len()
            )));
        }
        check_radius(r)?;
        let mut out = Vec::new();
        self.for_each_within(self.positions[i], r, |j, _| {
            if j != i {
                out.push(j);
            }
        });
        out.sort_unstable();
        Ok(out)
    }

    /// Indices of all indexed points within `r` of an arbitrary location,
    /// sorted ascending.
    pub fn query_point(&self, center: Point3, r: f64) -> Result<Vec<usize>> {
        check_radius(r)?;
        let mut out = Vec::new();
        self.for_each_within(center.to_array(), r, |j, _| out.push(j));
        out.sort_unstable();
        Ok(out)
    }

    /// Calls `visit(j, d²)` for every indexed point with `d <= r` from
    /// `center`, in unspecified order. The caller validates `r`.
    pub fn for_each_within(&self, center: [f64; 3], r: f64, mut visit: impl FnMut(usize, f64)) {
        if self.nodes.is_empty() {
            return;
        }
        let r2 = r * r;
        let mut stack: Vec<u32> = Vec::with_capacity(64);
        stack.push(0);
        while let Some(n) = stack.pop() {
            match self.nodes[n as usize] {
                Node::Leaf { start, end } => {
                    let range = start as usize..end as usize;
                    for (k, c) in self.coords[range.clone()].iter().enumerate() {
                        let dx = c[0] - center[0];
                        let dy = c[1] - center[1];
                        let dz = c[2] - center[2];
                        let d2 = dx * dx + dy * dy + dz * dz;
                        if d2 <= r2 {
                            visit(self.order[range.start + k] as usize, d2);
                        }
                    }
                }
                Node::Split {
                    axis,
                    value,
                    left,
                    right,
                } => {
                    let diff = center[axis as usize] - value;
                    let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                    if diff * diff <= r2 {
                        stack.push(far);
                    }
                    stack.push(near);
                }
            }
        }
    }
}

fn check_radius(r: f64) -> Result<()> {
    if r.is_finite() && r > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("query radius must be positive, got {r}")))
    }
}

/// Splits `order[..]` (which starts at `offset` within the full permutation)
/// at the median of its widest axis. Left entries are `<=` the split value,
/// right entries `>=`.
fn build_node(positions: &[[f64; 3]], order: &mut [u32], offset: usize, nodes: &mut Vec<Node>) -> u32 {
    let id = nodes.len() as u32;
    if order.len() <= LEAF_SIZE {
        nodes.push(Node::Leaf {
            start: offset as u32,
            end: (offset + order.len()) as u32,
        });
        return id;
    }
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &i in order.iter() {
        let p = positions[i as usize];
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let axis = (0..3)
        .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
        .unwrap();
    if hi[axis] == lo[axis] {
        // all points coincide; a split cannot separate them
        nodes.push(Node::Leaf {
            start: offset as u32,
            end: (offset + order.len()) as u32,
        });
        return id;
    }
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        positions[a as usize][axis].total_cmp(&positions[b as usize][axis])
    });
    let value = positions[order[mid] as usize][axis];
    nodes.push(Node::Split {
        axis: axis as u8,
        value,
        left: 0,
        right: 0,
    });
    let (l, r) = order.split_at_mut(mid);
    let left = build_node(positions, l, offset, nodes);
    let right = build_node(positions, r, offset + mid, nodes);
    if let Node::Split {
        left: ref mut ls,
        right: ref mut rs,
        ..
    } = nodes[id as usize]
    {
        *ls = left;
        *rs = right;
    }
    id
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn brute_force(pts: &[Point3], i: usize, r: f64) -> Vec<usize> {
        (0..pts.len())
            .filter(|&j| j != i && pts[i].distance(&pts[j]) <= r)
            .collect()
    }

    #[test]
    fn empty_and_single() {
        let idx = RadiusIndex::build(&[]).unwrap();
        assert!(idx.is_empty());
        assert!(idx.radius_query(0, 1.0).is_err());
        assert!(idx.query_point(Point3::default(), 1.0).unwrap().is_empty());

        let idx = RadiusIndex::build(&[Point3::new(1.0, 2.0, 3.0)]).unwrap();
        assert!(idx.radius_query(0, 10.0).unwrap().is_empty());
    }

    #[test]
    fn two_points() {
        let near = [Point3::new(0.0, 0.0, 0.0), Point3::new(0.03, 0.0, 0.0)];
        let idx = RadiusIndex::build(&near).unwrap();
        assert_eq!(idx.radius_query(0, 0.04).unwrap(), vec![1]);
        assert_eq!(idx.radius_query(1, 0.04).unwrap(), vec![0]);

        let far = [Point3::new(0.0, 0.0, 0.0), Point3::new(0.05, 0.0, 0.0)];
        let idx = RadiusIndex::build(&far).unwrap();
        assert!(idx.radius_query(0, 0.04).unwrap().is_empty());
        assert!(idx.radius_query(1, 0.04).unwrap().is_empty());
    }

    #[test]
    fn exact_radius_is_included() {
        let pts = [Point3::new(0.0, 0.0, 0.0), Point3::new(0.0, 0.25, 0.0)];
        let idx = RadiusIndex::build(&pts).unwrap();
        assert_eq!(idx.radius_query(0, 0.25).unwrap(), vec![1]);
        assert!(idx.radius_query(0, 0.249_999_999).unwrap().is_empty());
    }

    #[test]
    fn bad_arguments() {
        let idx = RadiusIndex::build(&[Point3::default(), Point3::default()]).unwrap();
        assert!(idx.radius_query(2, 1.0).is_err());
        assert!(idx.radius_query(0, 0.0).is_err());
        assert!(idx.radius_query(0, f64::NAN).is_err());
        assert!(RadiusIndex::build(&[Point3::new(f64::NAN, 0.0, 0.0)]).is_err());
    }

    #[test]
    fn coincident_points() {
        let pts = vec![Point3::new(1.0, 1.0, 1.0); 100];
        let idx = RadiusIndex::build(&pts).unwrap();
        assert_eq!(idx.radius_query(5, 1e-9).unwrap().len(), 99);
    }

    #[test]
    fn uniform_cloud_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts: Vec<Point3> = (0..1000)
            .map(|_| Point3::new(rng.random(), rng.random(), rng.random()))
            .collect();
        let idx = RadiusIndex::build(&pts).unwrap();
        for _ in 0..50 {
            let i = rng.random_range(0..pts.len());
            let r = rng.random_range(0.01..0.3);
            assert_eq!(idx.radius_query(i, r).unwrap(), brute_force(&pts, i, r));
        }
    }
}
