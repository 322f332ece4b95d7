//! Geometric descriptors of voxel sets.
//!
//! Coordinates enter as integer offsets from the set's bounding-box corner, so
//! translating a set by whole voxels leaves every descriptor bit-identical.

use crate::volume::Geometry;

/// Exposed voxel faces per axis (faces whose neighbor is outside the set or
/// beyond the grid).
pub fn exposed_faces(geometry: &Geometry, voxels: &[usize], member: impl Fn(usize) -> bool) -> [u64; 3] {
    let [nx, ny, nz] = geometry.dims;
    let mut faces = [0u64; 3];
    for &i in voxels {
        let [x, y, z] = geometry.coords(i);
        let neighbors = [
            (0, x > 0, i.wrapping_sub(1)),
            (0, x + 1 < nx, i + 1),
            (1, y > 0, i.wrapping_sub(nx)),
            (1, y + 1 < ny, i + nx),
            (2, z > 0, i.wrapping_sub(nx * ny)),
            (2, z + 1 < nz, i + nx * ny),
        ];
        for (axis, inside_grid, j) in neighbors {
            if !inside_grid || !member(j) {
                faces[axis] += 1;
            }
        }
    }
    faces
}

/// Surface area in mm² from per-axis exposed face counts.
pub fn surface_area_mm2(geometry: &Geometry, faces: [u64; 3]) -> f64 {
    let [sx, sy, sz] = geometry.spacing_mm;
    faces[0] as f64 * (sy * sz) + faces[1] as f64 * (sx * sz) + faces[2] as f64 * (sx * sy)
}

/// Covariance (mm²) of voxel-center positions, from exact integer sums.
pub fn center_covariance(geometry: &Geometry, voxels: &[usize]) -> [[f64; 3]; 3] {
    let mut cov = [[0.0; 3]; 3];
    if voxels.is_empty() {
        return cov;
    }
    let lo = corner(geometry, voxels);
    let mut s1 = [0i128; 3];
    let mut s2 = [[0i128; 3]; 3];
    for &i in voxels {
        let c = geometry.coords(i);
        let d = [
            (c[0] - lo[0]) as i128,
            (c[1] - lo[1]) as i128,
            (c[2] - lo[2]) as i128,
        ];
        for a in 0..3 {
            s1[a] += d[a];
            for b in a..3 {
                s2[a][b] += d[a] * d[b];
            }
        }
    }
    let n = voxels.len() as i128;
    let n2 = (n * n) as f64;
    for a in 0..3 {
        for b in a..3 {
            let num = n * s2[a][b] - s1[a] * s1[b];
            let v = num as f64 / n2 * geometry.spacing_mm[a] * geometry.spacing_mm[b];
            cov[a][b] = v;
            cov[b][a] = v;
        }
    }
    cov
}

fn corner(geometry: &Geometry, voxels: &[usize]) -> [usize; 3] {
    let mut lo = [usize::MAX; 3];
    for &i in voxels {
        let c = geometry.coords(i);
        for a in 0..3 {
            lo[a] = lo[a].min(c[a]);
        }
    }
    lo
}

/// Eigenvalues of a symmetric 3×3 matrix, descending, by the closed-form
/// trigonometric method. Sign flips of off-diagonal pairs (reflections)
/// give identical results.
pub fn sym3_eigenvalues(a: [[f64; 3]; 3]) -> [f64; 3] {
    let p1 = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
    if p1 == 0.0 {
        let mut d = [a[0][0], a[1][1], a[2][2]];
        d.sort_by(|x, y| y.total_cmp(x));
        return d;
    }
    let q = (a[0][0] + a[1][1] + a[2][2]) / 3.0;
    let p2 = (a[0][0] - q).powi(2) + (a[1][1] - q).powi(2) + (a[2][2] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let mut b = a;
    for (i, row) in b.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let shifted = if i == j { *v - q } else { *v };
            *v = shifted / p;
        }
    }
    let det = b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[1][2])
        - b[0][1] * (b[0][1] * b[2][2] - b[1][2] * b[0][2])
        + b[0][2] * (b[0][1] * b[1][2] - b[1][1] * b[0][2]);
    let r = (det / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let e1 = q + 2.0 * p * phi.cos();
    let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
    let e2 = 3.0 * q - e1 - e3;
    let mut e = [e1, e2, e3];
    e.sort_by(|x, y| y.total_cmp(x));
    e
}

/// Largest center-to-center distance (mm) among the given voxels.
pub fn max_pairwise_distance(geometry: &Geometry, voxels: &[usize]) -> f64 {
    let coords: Vec<[usize; 3]> = voxels.iter().map(|&i| geometry.coords(i)).collect();
    let s = geometry.spacing_mm;
    let mut best = 0.0f64;
    for (k, a) in coords.iter().enumerate() {
        for b in &coords[k + 1..] {
            let mut d2 = 0.0;
            for ax in 0..3 {
                let t = a[ax].abs_diff(b[ax]) as f64 * s[ax];
                d2 += t * t;
            }
            if d2 > best {
                best = d2;
            }
        }
    }
    best.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenvalues_of_diagonal_and_rotated() {
        assert_eq!(
            sym3_eigenvalues([[1.0, 0.0, 0.0], [0.0, 3.0, 0.0], [0.0, 0.0, 2.0]]),
            [3.0, 2.0, 1.0]
        );
        // [[2,1,0],[1,2,0],[0,0,5]] has eigenvalues 5, 3, 1
        let e = sym3_eigenvalues([[2.0, 1.0, 0.0], [1.0, 2.0, 0.0], [0.0, 0.0, 5.0]]);
        for (got, want) in e.iter().zip([5.0, 3.0, 1.0]) {
            assert!((got - want).abs() < 1e-12, "{e:?}");
        }
    }

    #[test]
    fn reflection_gives_identical_eigenvalues() {
        let a = [[2.3, 0.7, -0.4], [0.7, 1.9, 0.25], [-0.4, 0.25, 0.8]];
        let r = [[2.3, -0.7, 0.4], [-0.7, 1.9, 0.25], [0.4, 0.25, 0.8]];
        assert_eq!(sym3_eigenvalues(a), sym3_eigenvalues(r));
    }

    #[test]
    fn cube_faces_and_covariance() {
        let g = Geometry::unit([12, 12, 12]).unwrap();
        let mut voxels = Vec::new();
        for z in 1..11 {
            for y in 1..11 {
                for x in 1..11 {
                    voxels.push(g.index(x, y, z));
                }
            }
        }
        let set: std::collections::HashSet<usize> = voxels.iter().copied().collect();
        let faces = exposed_faces(&g, &voxels, |i| set.contains(&i));
        assert_eq!(faces, [200, 200, 200]);
        assert_eq!(surface_area_mm2(&g, faces), 600.0);
        let cov = center_covariance(&g, &voxels);
        assert_eq!(cov[0][1], 0.0);
        assert_eq!(cov[0][0], cov[1][1]);
        assert!((cov[0][0] - 8.25).abs() < 1e-12);
    }

    #[test]
    fn max_distance_line() {
        let g = Geometry::new([5, 1, 1], [0.5, 1.0, 1.0], [0.0; 3]).unwrap();
        assert_eq!(max_pairwise_distance(&g, &[0, 2, 4]), 2.0);
        assert_eq!(max_pairwise_distance(&g, &[3]), 0.0);
    }
}
