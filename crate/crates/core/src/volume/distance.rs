//! Exact Euclidean distance transforms on voxel-center geometry.
//!
//! Each axis is processed with a pruned exact search. Voxels beyond the grid
//! edge count as outside. Every candidate is evaluated as
//! `(d·s)² + previous` in axis order, so results equal an exhaustive
//! nearest-outside scan bit for bit.

use super::Geometry;

/// Squared distance (mm²) from each inside voxel to the nearest outside voxel
/// center, restricted to the listed axes. Outside voxels get 0.
pub fn squared_distance_transform(
    dims: [usize; 3],
    inside: &[bool],
    spacing: [f64; 3],
    axes: &[usize],
) -> Vec<f64> {
    let len = dims[0] * dims[1] * dims[2];
    assert_eq!(inside.len(), len, "mask length must match dims");
    let mut g: Vec<f64> = inside
        .iter()
        .map(|&b| if b { f64::INFINITY } else { 0.0 })
        .collect();
    let strides = [1, dims[0], dims[0] * dims[1]];
    let mut line = Vec::new();
    let mut out = Vec::new();
    for &axis in axes {
        let n = dims[axis];
        let stride = strides[axis];
        let s = spacing[axis];
        for start in 0..len {
            // visit each line once, from its first voxel
            if (start / stride) % n != 0 {
                continue;
            }
            line.clear();
            line.extend((0..n).map(|k| g[start + k * stride]));
            out.clear();
            out.extend((0..n).map(|i| line_min(&line, i, s)));
            for (k, v) in out.iter().enumerate() {
                g[start + k * stride] = *v;
            }
        }
    }
    g
}

/// min over q in [-1, n] of (|i-q|·s)² + line[q], where the padding cells
/// at -1 and n are outside (value 0).
fn line_min(line: &[f64], i: usize, s: f64) -> f64 {
    let n = line.len() as isize;
    let i = i as isize;
    let mut best = line[i as usize];
    let mut d = 1isize;
    loop {
        let t = d as f64 * s;
        let term = t * t;
        if term >= best {
            break;
        }
        for q in [i - d, i + d] {
            let cand = if q == -1 || q == n {
                term
            } else if q >= 0 && q < n {
                term + line[q as usize]
            } else {
                continue;
            };
            if cand < best {
                best = cand;
            }
        }
        if i - d < -1 && i + d > n {
            break;
        }
        d += 1;
    }
    best
}

/// In-plane distance (mm) from each inside pixel to the nearest outside pixel center.
pub fn distance_transform_2d(mask: &[bool], dims: [usize; 2], spacing: [f64; 2]) -> Vec<f64> {
    squared_distance_transform([dims[0], dims[1], 1], mask, [spacing[0], spacing[1], 1.0], &[0, 1])
        .into_iter()
        .map(f64::sqrt)
        .collect()
}

/// 3D distance (mm) from each inside voxel to the nearest outside voxel center.
pub fn distance_transform_3d(geometry: &Geometry, inside: &[bool]) -> Vec<f64> {
    squared_distance_transform(geometry.dims, inside, geometry.spacing_mm, &[0, 1, 2])
        .into_iter()
        .map(f64::sqrt)
        .collect()
}
