use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{LabeledPointCloud, Point3};
use crate::error::{Error, Result};

/// Farthest point sampling from a fixed start index.
///
/// Each step picks the unselected point whose distance to the selected set
/// is largest; ties go to the lowest index.
pub fn farthest_point_indices_from(
    positions: &[Point3],
    k: usize,
    start: usize,
) -> Result<Vec<usize>> {
    let n = positions.len();
    if k == 0 || k > n {
        return Err(Error::invalid(format!("subsample size {k} not in [1, {n}]")));
    }
    if start >= n {
        return Err(Error::invalid(format!("start index {start} out of range")));
    }
    let mut selected = Vec::with_capacity(k);
    let mut taken = vec![false; n];
    let mut min_d2 = vec![f64::INFINITY; n];
    let mut current = start;
    loop {
        selected.push(current);
        taken[current] = true;
        if selected.len() == k {
            break;
        }
        let anchor = positions[current];
        let mut best: Option<(usize, f64)> = None;
        for (i, p) in positions.iter().enumerate() {
            if taken[i] {
                continue;
            }
            let d2 = p.distance_squared(&anchor);
            if d2 < min_d2[i] {
                min_d2[i] = d2;
            }
            if best.is_none_or(|(_, b)| min_d2[i] > b) {
                best = Some((i, min_d2[i]));
            }
        }
        current = best.expect("k <= n leaves a candidate").0;
    }
    Ok(selected)
}

/// Farthest point sampling with a seeded uniform choice of the first point.
pub fn farthest_point_indices(positions: &[Point3], k: usize, seed: u64) -> Result<Vec<usize>> {
    if positions.is_empty() {
        return Err(Error::invalid("cannot subsample an empty cloud"));
    }
    let start = ChaCha8Rng::seed_from_u64(seed).random_range(0..positions.len());
    farthest_point_indices_from(positions, k, start)
}

/// Returns `k` points chosen by farthest point sampling, in selection order,
/// with all labels carried over.
pub fn farthest_point_subsample(
    cloud: &LabeledPointCloud,
    k: usize,
    seed: u64,
) -> Result<LabeledPointCloud> {
    let indices = farthest_point_indices(&cloud.positions(), k, seed)?;
    cloud.select(&indices)
}
