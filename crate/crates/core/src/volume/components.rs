use std::collections::VecDeque;

use super::Geometry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Connectivity {
    Six,
    Eighteen,
    #[default]
    TwentySix,
}

impl Connectivity {
    /// Neighbor offsets whose Manhattan length is within the connectivity's reach.
    fn offsets(self) -> Vec<[isize; 3]> {
        let reach = match self {
            Connectivity::Six => 1,
            Connectivity::Eighteen => 2,
            Connectivity::TwentySix => 3,
        };
        let mut out = Vec::new();
        for dz in -1isize..=1 {
            for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    let m = dx.abs() + dy.abs() + dz.abs();
                    if m > 0 && m <= reach {
                        out.push([dx, dy, dz]);
                    }
                }
            }
        }
        out
    }
}

impl TryFrom<u8> for Connectivity {
    type Error = crate::error::Error;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            6 => Ok(Connectivity::Six),
            18 => Ok(Connectivity::Eighteen),
            26 => Ok(Connectivity::TwentySix),
            _ => Err(crate::error::Error::InvalidConfig(format!(
                "connectivity must be 6, 18 or 26, got {v}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    pub id: u32,
    /// Linear voxel indices, ascending.
    pub voxels: Vec<usize>,
}

impl Component {
    pub fn voxel_count(&self) -> usize {
        self.voxels.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentSet {
    /// Component id per voxel, 0 for voxels outside the set.
    pub label_map: Vec<u32>,
    pub components: Vec<Component>,
}

impl ComponentSet {
    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }
}

/// Labels maximal connected subsets of `set`.
///
/// Ids are assigned in ascending order of each component's smallest linear
/// voxel index, so the result does not depend on traversal order.
pub fn connected_components(
    geometry: &Geometry,
    set: &[bool],
    connectivity: Connectivity,
) -> ComponentSet {
    assert_eq!(set.len(), geometry.len(), "mask length must match geometry");
    let [nx, ny, nz] = geometry.dims;
    let offsets = connectivity.offsets();
    let mut label_map = vec![0u32; set.len()];
    let mut components = Vec::new();
    let mut queue = VecDeque::new();

    for start in 0..set.len() {
        if !set[start] || label_map[start] != 0 {
            continue;
        }
        let id = components.len() as u32 + 1;
        label_map[start] = id;
        queue.push_back(start);
        let mut voxels = Vec::new();
        while let Some(i) = queue.pop_front() {
            voxels.push(i);
            let [x, y, z] = geometry.coords(i);
            for off in &offsets {
                let xx = x as isize + off[0];
                let yy = y as isize + off[1];
                let zz = z as isize + off[2];
                if xx < 0 || yy < 0 || zz < 0 {
                    continue;
                }
                let (xx, yy, zz) = (xx as usize, yy as usize, zz as usize);
                if xx >= nx || yy >= ny || zz >= nz {
                    continue;
                }
                let j = geometry.index(xx, yy, zz);
                if set[j] && label_map[j] == 0 {
                    label_map[j] = id;
                    queue.push_back(j);
                }
            }
        }
        voxels.sort_unstable();
        components.push(Component { id, voxels });
    }

    ComponentSet {
        label_map,
        components,
    }
}
