//! Topology-preserving 3D medial-axis thinning.
//!
//! Iteratively peels border voxels from the six directions. A voxel is
//! deletable only when removal keeps the local Euler characteristic and the
//! 26-connectivity of its foreground neighborhood intact, so the number of
//! connected components, tunnels and cavities is preserved while structures
//! are pruned to one-voxel-thick curves.

use std::collections::HashSet;

use nalgebra::Point3;

use crate::error::{OrchardError, Result};
use crate::voxel::{Voxel, VoxelGrid, NEIGHBORS_26};

/// One-voxel-thick skeleton of a [`VoxelGrid`].
#[derive(Debug, Clone)]
pub struct Skeleton {
    pub voxels: Vec<Voxel>,
    set: HashSet<Voxel>,
    pub origin: Point3<f64>,
    pub voxel_edge: f64,
    pub dims: [usize; 3],
}

impl Skeleton {
    /// Assemble a skeleton from an explicit voxel list and grid geometry.
    pub fn from_parts(
        voxels: Vec<Voxel>,
        origin: Point3<f64>,
        voxel_edge: f64,
        dims: [usize; 3],
    ) -> Self {
        let set = voxels.iter().copied().collect();
        Skeleton {
            voxels,
            set,
            origin,
            voxel_edge,
            dims,
        }
    }

    pub fn contains(&self, v: Voxel) -> bool {
        self.set.contains(&v)
    }

    pub fn voxel_set(&self) -> &HashSet<Voxel> {
        &self.set
    }

    pub fn voxel_center(&self, v: Voxel) -> Point3<f64> {
        Point3::new(
            self.origin.x + (v[0] as f64 + 0.5) * self.voxel_edge,
            self.origin.y + (v[1] as f64 + 0.5) * self.voxel_edge,
            self.origin.z + (v[2] as f64 + 0.5) * self.voxel_edge,
        )
    }
}

/// Border directions examined per thinning pass, in fixed order.
const BORDER_DIRS: [[i32; 3]; 6] = [
    [0, 0, 1],
    [0, 0, -1],
    [0, 1, 0],
    [0, -1, 0],
    [1, 0, 0],
    [-1, 0, 0],
];

struct DenseGrid {
    dims: [i32; 3],
    data: Vec<u8>,
}

impl DenseGrid {
    fn idx(&self, v: Voxel) -> usize {
        ((v[0] * self.dims[1] + v[1]) * self.dims[2] + v[2]) as usize
    }

    #[inline]
    fn get(&self, v: Voxel) -> bool {
        if v[0] < 0
            || v[1] < 0
            || v[2] < 0
            || v[0] >= self.dims[0]
            || v[1] >= self.dims[1]
            || v[2] >= self.dims[2]
        {
            return false;
        }
        self.data[self.idx(v)] != 0
    }

    fn clear(&mut self, v: Voxel) {
        let i = self.idx(v);
        self.data[i] = 0;
    }
}

/// 3x3x3 foreground mask around a voxel, center included at bit 13.
#[inline]
fn neighborhood(grid: &DenseGrid, v: Voxel) -> u32 {
    let mut mask = 0u32;
    let mut bit = 0;
    for dx in -1..=1 {
        for dy in -1..=1 {
            for dz in -1..=1 {
                if grid.get([v[0] + dx, v[1] + dy, v[2] + dz]) {
                    mask |= 1 << bit;
                }
                bit += 1;
            }
        }
    }
    mask
}

#[inline]
fn mask_bit(dx: i32, dy: i32, dz: i32) -> u32 {
    (((dx + 1) * 3 + (dy + 1)) * 3 + (dz + 1)) as u32
}

#[inline]
fn neighbor_count(mask: u32) -> u32 {
    (mask & !(1 << 13)).count_ones()
}

/// Change in the Euler characteristic of the local cubical complex when the
/// center voxel is removed. Enumerates the 27 cells (vertices, edges, faces,
/// cube) of the center voxel and counts those not shared with any foreground
/// neighbor; invariance means the sum of their signed contributions is zero.
fn euler_invariant(mask: u32) -> bool {
    let mut delta: i32 = 0;
    // Cells of the center cube in doubled coordinates (a,b,c) in {0,1,2}^3.
    for a in 0..3i32 {
        for b in 0..3i32 {
            for c in 0..3i32 {
                let mut shared = false;
                'outer: for dx in -1..=1i32 {
                    if !(dx == 0 || (dx == -1 && a == 0) || (dx == 1 && a == 2)) {
                        continue;
                    }
                    for dy in -1..=1i32 {
                        if !(dy == 0 || (dy == -1 && b == 0) || (dy == 1 && b == 2)) {
                            continue;
                        }
                        for dz in -1..=1i32 {
                            if dx == 0 && dy == 0 && dz == 0 {
                                continue;
                            }
                            if !(dz == 0 || (dz == -1 && c == 0) || (dz == 1 && c == 2)) {
                                continue;
                            }
                            if mask & (1 << mask_bit(dx, dy, dz)) != 0 {
                                shared = true;
                                break 'outer;
                            }
                        }
                    }
                }
                if !shared {
                    let dim = (a % 2) + (b % 2) + (c % 2);
                    delta += if dim % 2 == 0 { 1 } else { -1 };
                }
            }
        }
    }
    delta == 0
}

/// The foreground 26-neighbors must stay a single 26-connected set when the
/// center is removed (connectivity may not route through the center).
fn is_simple(mask: u32) -> bool {
    let neigh = mask & !(1 << 13);
    if neigh == 0 {
        return false;
    }
    // Flood fill over bits within the 3x3x3 box minus the center.
    let start = neigh.trailing_zeros();
    let mut visited = 1u32 << start;
    let mut stack = vec![start];
    while let Some(bit) = stack.pop() {
        let b = bit as i32;
        let (dx, dy, dz) = (b / 9 - 1, (b / 3) % 3 - 1, b % 3 - 1);
        for off in NEIGHBORS_26 {
            let (nx, ny, nz) = (dx + off[0], dy + off[1], dz + off[2]);
            if nx < -1 || nx > 1 || ny < -1 || ny > 1 || nz < -1 || nz > 1 {
                continue;
            }
            if nx == 0 && ny == 0 && nz == 0 {
                continue;
            }
            let nb = mask_bit(nx, ny, nz);
            if neigh & (1 << nb) != 0 && visited & (1 << nb) == 0 {
                visited |= 1 << nb;
                stack.push(nb);
            }
        }
    }
    visited == neigh
}

#[inline]
fn deletable(mask: u32) -> bool {
    neighbor_count(mask) > 1 && euler_invariant(mask) && is_simple(mask)
}

/// Thin the occupied voxels of `grid` to a one-voxel-thick skeleton.
pub fn skeletonize(grid: &VoxelGrid) -> Result<Skeleton> {
    if grid.occupied_count() == 0 {
        return Err(OrchardError::EmptyInput("skeletonize"));
    }
    let dims = [
        grid.dims[0] as i32,
        grid.dims[1] as i32,
        grid.dims[2] as i32,
    ];
    let mut dense = DenseGrid {
        dims,
        data: vec![0u8; grid.dims[0] * grid.dims[1] * grid.dims[2]],
    };
    let mut active: Vec<Voxel> = grid.occupied().to_vec();
    for &v in &active {
        let i = dense.idx(v);
        dense.data[i] = 1;
    }

    let mut candidates: Vec<Voxel> = Vec::new();
    loop {
        let mut deleted_this_pass = 0usize;
        for dir in BORDER_DIRS {
            candidates.clear();
            for &v in &active {
                if !dense.get(v) {
                    continue;
                }
                if dense.get([v[0] + dir[0], v[1] + dir[1], v[2] + dir[2]]) {
                    continue; // not a border voxel for this direction
                }
                if deletable(neighborhood(&dense, v)) {
                    candidates.push(v);
                }
            }
            // Sequential recheck: earlier deletions in this subiteration can
            // invalidate later candidates.
            for &v in &candidates {
                if deletable(neighborhood(&dense, v)) {
                    dense.clear(v);
                    deleted_this_pass += 1;
                }
            }
        }
        if deleted_this_pass == 0 {
            break;
        }
        active.retain(|&v| dense.get(v));
    }

    active.sort_unstable();
    let set: HashSet<Voxel> = active.iter().copied().collect();
    Ok(Skeleton {
        voxels: active,
        set,
        origin: grid.origin,
        voxel_edge: grid.voxel_edge,
        dims: grid.dims,
    })
}
