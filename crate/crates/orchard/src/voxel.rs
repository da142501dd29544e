//! Voxelization, 26-connectivity component extraction and BFS shortest paths.

use std::collections::{HashMap, HashSet, VecDeque};

use nalgebra::Point3;

use crate::cloud::ColorPointCloud;
use crate::error::{OrchardError, Result};

/// Integer voxel coordinate (k, l, m) along (x, y, z).
pub type Voxel = [i32; 3];

/// The 26 neighbor offsets in fixed lexicographic order. BFS tie-breaking
/// relies on this order being stable.
pub const NEIGHBORS_26: [[i32; 3]; 26] = {
    let mut out = [[0i32; 3]; 26];
    let mut n = 0;
    let mut dx = -1i32;
    while dx <= 1 {
        let mut dy = -1i32;
        while dy <= 1 {
            let mut dz = -1i32;
            while dz <= 1 {
                if !(dx == 0 && dy == 0 && dz == 0) {
                    out[n] = [dx, dy, dz];
                    n += 1;
                }
                dz += 1;
            }
            dy += 1;
        }
        dx += 1;
    }
    out
};

/// Regular binary occupancy grid fit to a cloud's bounding box.
#[derive(Debug, Clone)]
pub struct VoxelGrid {
    pub origin: Point3<f64>,
    pub voxel_edge: f64,
    pub dims: [usize; 3],
    occupancy: Vec<bool>,
    occupied: Vec<Voxel>,
}

impl VoxelGrid {
    fn index(&self, v: Voxel) -> Option<usize> {
        if v[0] < 0 || v[1] < 0 || v[2] < 0 {
            return None;
        }
        let (k, l, m) = (v[0] as usize, v[1] as usize, v[2] as usize);
        if k >= self.dims[0] || l >= self.dims[1] || m >= self.dims[2] {
            return None;
        }
        Some((k * self.dims[1] + l) * self.dims[2] + m)
    }

    pub fn is_occupied(&self, v: Voxel) -> bool {
        self.index(v).map(|i| self.occupancy[i]).unwrap_or(false)
    }

    /// Occupied voxels in ascending (k, l, m) order.
    pub fn occupied(&self) -> &[Voxel] {
        &self.occupied
    }

    pub fn occupied_count(&self) -> usize {
        self.occupied.len()
    }

    /// Center of a voxel in world coordinates.
    pub fn voxel_center(&self, v: Voxel) -> Point3<f64> {
        Point3::new(
            self.origin.x + (v[0] as f64 + 0.5) * self.voxel_edge,
            self.origin.y + (v[1] as f64 + 0.5) * self.voxel_edge,
            self.origin.z + (v[2] as f64 + 0.5) * self.voxel_edge,
        )
    }

    /// Bin index of a world point; may fall outside the grid.
    pub fn bin_of(&self, p: &Point3<f64>) -> Voxel {
        [
            ((p.x - self.origin.x) / self.voxel_edge).floor() as i32,
            ((p.y - self.origin.y) / self.voxel_edge).floor() as i32,
            ((p.z - self.origin.z) / self.voxel_edge).floor() as i32,
        ]
    }
}

/// Fit a regular grid to the cloud bounding box and mark occupied voxels.
/// Grid dimension along each axis is floor((max-min)/edge) + 1.
pub fn voxelize(cloud: &ColorPointCloud, voxel_edge: f64) -> Result<VoxelGrid> {
    assert!(voxel_edge > 0.0, "voxel_edge must be positive");
    if cloud.is_empty() {
        return Err(OrchardError::EmptyInput("voxelize"));
    }
    let (min, max) = cloud.bounds()?;
    let dims = [
        ((max.x - min.x) / voxel_edge).floor() as usize + 1,
        ((max.y - min.y) / voxel_edge).floor() as usize + 1,
        ((max.z - min.z) / voxel_edge).floor() as usize + 1,
    ];
    let mut grid = VoxelGrid {
        origin: min,
        voxel_edge,
        dims,
        occupancy: vec![false; dims[0] * dims[1] * dims[2]],
        occupied: Vec::new(),
    };
    for p in &cloud.points {
        let mut v = grid.bin_of(p);
        // Points exactly at the max coordinate land in the last bin.
        for k in 0..3 {
            v[k] = v[k].min(dims[k] as i32 - 1).max(0);
        }
        let idx = grid.index(v).expect("bin inside grid");
        if !grid.occupancy[idx] {
            grid.occupancy[idx] = true;
        }
    }
    let mut occupied = Vec::new();
    for k in 0..dims[0] {
        for l in 0..dims[1] {
            for m in 0..dims[2] {
                if grid.occupancy[(k * dims[1] + l) * dims[2] + m] {
                    occupied.push([k as i32, l as i32, m as i32]);
                }
            }
        }
    }
    grid.occupied = occupied;
    Ok(grid)
}

/// Per-point voxel bins for an existing grid (used to map points to voxels).
pub fn bin_points(grid: &VoxelGrid, cloud: &ColorPointCloud) -> Vec<Voxel> {
    cloud
        .points
        .iter()
        .map(|p| {
            let mut v = grid.bin_of(p);
            for k in 0..3 {
                v[k] = v[k].min(grid.dims[k] as i32 - 1).max(0);
            }
            v
        })
        .collect()
}

/// 26-connected components of an arbitrary voxel set.
///
/// Components are ordered deterministically by their minimum (y, z, x) voxel;
/// voxels within a component are sorted ascending.
pub fn connected_components(voxels: &[Voxel]) -> Vec<Vec<Voxel>> {
    let set: HashSet<Voxel> = voxels.iter().copied().collect();
    let mut seen: HashSet<Voxel> = HashSet::with_capacity(set.len());
    let mut components = Vec::new();
    let mut sorted: Vec<Voxel> = set.iter().copied().collect();
    sorted.sort_unstable();
    for &start in &sorted {
        if seen.contains(&start) {
            continue;
        }
        let mut comp = Vec::new();
        let mut queue = VecDeque::new();
        queue.push_back(start);
        seen.insert(start);
        while let Some(v) = queue.pop_front() {
            comp.push(v);
            for off in NEIGHBORS_26 {
                let n = [v[0] + off[0], v[1] + off[1], v[2] + off[2]];
                if set.contains(&n) && seen.insert(n) {
                    queue.push_back(n);
                }
            }
        }
        comp.sort_unstable();
        components.push(comp);
    }
    components.sort_by_key(|c| {
        c.iter()
            .map(|v| (v[1], v[2], v[0]))
            .min()
            .expect("nonempty component")
    });
    components
}

/// BFS shortest path between two voxels of a set under 26-connectivity.
/// Ties are broken by the fixed neighbor-visit order of [`NEIGHBORS_26`].
pub fn shortest_path(set: &HashSet<Voxel>, start: Voxel, end: Voxel) -> Result<Vec<Voxel>> {
    assert!(set.contains(&start), "start voxel not in set");
    assert!(set.contains(&end), "end voxel not in set");
    if start == end {
        return Ok(vec![start]);
    }
    let mut parent: HashMap<Voxel, Voxel> = HashMap::new();
    let mut queue = VecDeque::new();
    queue.push_back(start);
    parent.insert(start, start);
    while let Some(v) = queue.pop_front() {
        for off in NEIGHBORS_26 {
            let n = [v[0] + off[0], v[1] + off[1], v[2] + off[2]];
            if set.contains(&n) && !parent.contains_key(&n) {
                parent.insert(n, v);
                if n == end {
                    let mut path = vec![end];
                    let mut cur = end;
                    while cur != start {
                        cur = parent[&cur];
                        path.push(cur);
                    }
                    path.reverse();
                    return Ok(path);
                }
                queue.push_back(n);
            }
        }
    }
    Err(OrchardError::NotConnected)
}

/// Euclidean arc length of a voxel path, in meters.
pub fn path_length(path: &[Voxel], voxel_edge: f64) -> f64 {
    path.windows(2)
        .map(|w| {
            let d = [
                (w[1][0] - w[0][0]) as f64,
                (w[1][1] - w[0][1]) as f64,
                (w[1][2] - w[0][2]) as f64,
            ];
            (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt() * voxel_edge
        })
        .sum()
}
