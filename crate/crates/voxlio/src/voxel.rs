//! Per-window voxelization and plane extraction.
//!
//! Every scan, the points of all window frames are re-expressed in the
//! global frame with the current pose estimates and pooled into a spatial
//! hash of root voxels (half-open cells `[i*s, (i+1)*s)` per axis, floor
//! indexing). Each cell accumulates one homogeneous point cluster per frame;
//! clusters are additive, so the window-level cluster is the sum of the
//! per-frame clusters. A cell whose pooled cluster is planar yields a plane
//! patch; otherwise the cell splits into its eight children (re-binning the
//! same points at the halved resolution) until `max_depth`.
//!
//! The build is deterministic: frames are processed in window order, root
//! cells in sorted index order, and children in a fixed octant order, so the
//! serial and parallel paths produce bit-identical clusters.

use nalgebra::Vector4;
use rayon::prelude::*;
use std::collections::HashMap;

use crate::geometry::{Mat3, Mat4, Pose, Vec3, Vec4};

/// Discrete voxel coordinates at a given octree depth.
///
/// Depth 0 cells have edge length `resolution`; each level halves it. The
/// half-open floor grid nests exactly: the depth `d+1` cells of a point stay
/// inside its depth `d` cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VoxelIndex {
    pub x: i64,
    pub y: i64,
    pub z: i64,
    pub depth: u8,
}

impl VoxelIndex {
    /// Cell containing `p` at `depth` for a given root resolution.
    pub fn of(p: &Vec3, resolution: f64, depth: u8) -> VoxelIndex {
        let size = resolution / f64::from(1u32 << depth);
        VoxelIndex {
            x: (p.x / size).floor() as i64,
            y: (p.y / size).floor() as i64,
            z: (p.z / size).floor() as i64,
            depth,
        }
    }

    /// Root-level (depth 0) cell key.
    pub fn root_key(p: &Vec3, resolution: f64) -> (i64, i64, i64) {
        let v = Self::of(p, resolution, 0);
        (v.x, v.y, v.z)
    }
}

/// Additive second-moment statistics of a point set, equivalent to the
/// homogeneous outer-product sum `C = sum [p;1][p;1]^T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointCluster {
    /// `sum p p^T`
    pub second_moment: Mat3,
    /// `sum p`
    pub sum: Vec3,
    pub count: usize,
}

impl Default for PointCluster {
    fn default() -> Self {
        Self::empty()
    }
}

impl PointCluster {
    pub fn empty() -> Self {
        PointCluster {
            second_moment: Mat3::zeros(),
            sum: Vec3::zeros(),
            count: 0,
        }
    }

    pub fn from_points(points: &[Vec3]) -> Self {
        let mut c = Self::empty();
        for p in points {
            c.add_point(p);
        }
        c
    }

    pub fn add_point(&mut self, p: &Vec3) {
        self.second_moment += p * p.transpose();
        self.sum += p;
        self.count += 1;
    }

    /// Merges disjoint point sets; exact because the statistics are sums.
    pub fn merge(&mut self, other: &PointCluster) {
        self.second_moment += other.second_moment;
        self.sum += other.sum;
        self.count += other.count;
    }

    /// The symmetric 4x4 homogeneous moment matrix `[[P, v], [v^T, n]]`.
    pub fn moment_matrix(&self) -> Mat4 {
        let mut m = Mat4::zeros();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.second_moment);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.sum);
        m.fixed_view_mut::<1, 3>(3, 0).copy_from(&self.sum.transpose());
        m[(3, 3)] = self.count as f64;
        m
    }

    pub fn centroid(&self) -> Option<Vec3> {
        (self.count > 0).then(|| self.sum / self.count as f64)
    }

    /// Sample scatter `P/n - c c^T`; `None` for an empty cluster.
    pub fn scatter(&self) -> Option<Mat3> {
        let n = self.count as f64;
        let c = self.centroid()?;
        Some(self.second_moment / n - c * c.transpose())
    }

    /// Re-expresses the cluster under a rigid transform of its points:
    /// statistics of `{R p + t}` from statistics of `{p}`.
    pub fn transformed(&self, pose: &Pose) -> PointCluster {
        let r = pose.rotation.matrix();
        let t = pose.position;
        let n = self.count as f64;
        let rp = r * self.sum;
        PointCluster {
            second_moment: r * self.second_moment * r.transpose()
                + rp * t.transpose()
                + t * rp.transpose()
                + t * t.transpose() * n,
            sum: rp + t * n,
            count: self.count,
        }
    }
}

/// A fitted plane with its spectral diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct PlanePatch {
    /// Unit normal, oriented so the origin-to-plane distance is nonnegative.
    pub normal: Vec3,
    /// Distance from the origin along `normal` (`d >= 0`).
    pub distance: f64,
    pub centroid: Vec3,
    /// Scatter eigenvalues, descending (`l1 >= l2 >= l3`).
    pub eigenvalues: [f64; 3],
    /// Scatter eigenvectors as columns, matching `eigenvalues`.
    pub basis: Mat3,
    pub point_count: usize,
}

impl PlanePatch {
    /// Homogeneous plane coordinates `[n; -d]`, so a point `p` on the plane
    /// satisfies `pi . [p; 1] = 0`.
    pub fn pi(&self) -> Vec4 {
        Vector4::new(self.normal.x, self.normal.y, self.normal.z, -self.distance)
    }

    /// The plane point closest to the origin, `d * n`.
    pub fn closest_point(&self) -> Vec3 {
        self.normal * self.distance
    }
}

/// Outcome of a planarity test on a pooled cluster.
#[derive(Debug, Clone)]
pub enum PlaneFit {
    Planar(PlanePatch),
    /// Smallest-to-middle eigenvalue ratio failed the threshold.
    NotPlanar { ratio: f64 },
    /// Too few points to attempt a fit.
    Degenerate { count: usize },
}

/// Fits a plane to a cluster; accepted when `l3 < ratio_threshold * l2`.
pub fn fit_plane(cluster: &PointCluster, ratio_threshold: f64, min_points: usize) -> PlaneFit {
    if cluster.count < min_points {
        return PlaneFit::Degenerate {
            count: cluster.count,
        };
    }
    let scatter = match cluster.scatter() {
        Some(s) => s,
        None => {
            return PlaneFit::Degenerate {
                count: cluster.count,
            }
        }
    };
    let eig = nalgebra::SymmetricEigen::new(scatter);
    // Sort eigenpairs descending.
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let values = [
        eig.eigenvalues[order[0]],
        eig.eigenvalues[order[1]],
        eig.eigenvalues[order[2]],
    ];
    let mut basis = Mat3::zeros();
    for (col, &src) in order.iter().enumerate() {
        basis.set_column(col, &eig.eigenvectors.column(src));
    }
    if !(values[2] < ratio_threshold * values[1]) {
        return PlaneFit::NotPlanar {
            ratio: if values[1] > 0.0 {
                values[2] / values[1]
            } else {
                f64::INFINITY
            },
        };
    }
    let centroid = cluster.centroid().expect("count >= min_points >= 1");
    let mut normal: Vec3 = basis.column(2).into_owned();
    let mut distance = normal.dot(&centroid);
    if distance.abs() <= 1e-9 {
        // Plane through the origin: orient the largest-magnitude component up.
        let k = (0..3)
            .max_by(|&a, &b| normal[a].abs().partial_cmp(&normal[b].abs()).unwrap())
            .unwrap();
        if normal[k] < 0.0 {
            normal = -normal;
            basis.set_column(2, &normal);
        }
        distance = normal.dot(&centroid);
    } else if distance < 0.0 {
        normal = -normal;
        distance = -distance;
        basis.set_column(2, &normal);
    }
    PlaneFit::Planar(PlanePatch {
        normal,
        distance,
        centroid,
        eigenvalues: values,
        basis,
        point_count: cluster.count,
    })
}

/// One window frame offered to the voxelization: its pose estimate and the
/// motion-compensated points in its body frame.
#[derive(Debug, Clone)]
pub struct WindowFrame {
    pub frame_id: u64,
    pub pose: Pose,
    pub points: Vec<Vec3>,
}

/// A frame's contribution to one extracted plane.
#[derive(Debug, Clone)]
pub struct PlaneObservation {
    pub frame_id: u64,
    /// Homogeneous cluster of the contributing points in the frame's body
    /// frame; this is the only per-frame quantity the measurement needs.
    pub local_cluster: PointCluster,
    /// The contributing body-frame points; populated only when the build is
    /// asked to keep them (per-point measurement mode and diagnostics).
    pub points: Vec<Vec3>,
}

/// A plane extracted from one (possibly subdivided) voxel cell.
#[derive(Debug, Clone)]
pub struct ExtractedPlane {
    pub patch: PlanePatch,
    /// The cell the plane was fit in (depth may be > 0).
    pub cell: VoxelIndex,
    /// Root-cell key of that cell, for per-window bookkeeping.
    pub root: (i64, i64, i64),
    /// Per-frame contributions, ordered oldest window frame first.
    pub observations: Vec<PlaneObservation>,
}

impl ExtractedPlane {
    pub fn total_points(&self) -> usize {
        self.observations.iter().map(|o| o.local_cluster.count).sum()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct VoxelizationParams {
    /// Root cell edge length in meters.
    pub resolution: f64,
    /// Maximum subdivision depth below the root.
    pub max_depth: u8,
    /// Minimum pooled points for a fit attempt.
    pub min_points: usize,
    /// Planarity acceptance ratio `l3 < ratio * l2`.
    pub planarity_ratio: f64,
    /// Keep per-observation point lists (needed by per-point measurements).
    pub keep_points: bool,
    /// Use the thread pool for frames and root cells.
    pub parallel: bool,
}

impl Default for VoxelizationParams {
    fn default() -> Self {
        VoxelizationParams {
            resolution: 3.0,
            max_depth: 3,
            min_points: 10,
            planarity_ratio: 0.01,
            keep_points: false,
            parallel: false,
        }
    }
}

/// Result of one window build.
#[derive(Debug, Clone)]
pub struct WindowVoxelization {
    pub planes: Vec<ExtractedPlane>,
    pub binned_points: usize,
    pub root_cells: usize,
    /// Cells abandoned for lack of points.
    pub degenerate_cells: usize,
    /// Cells that stayed non-planar at the maximum depth.
    pub rejected_cells: usize,
}

struct FrameBins {
    globals: Vec<Vec3>,
    cells: HashMap<(i64, i64, i64), Vec<u32>>,
}

fn bin_frame(frame: &WindowFrame, resolution: f64) -> FrameBins {
    let mut globals = Vec::with_capacity(frame.points.len());
    let mut cells: HashMap<(i64, i64, i64), Vec<u32>> = HashMap::new();
    for (i, p) in frame.points.iter().enumerate() {
        let g = frame.pose.transform_point(p);
        cells
            .entry(VoxelIndex::root_key(&g, resolution))
            .or_default()
            .push(i as u32);
        globals.push(g);
    }
    FrameBins { globals, cells }
}

/// Pools all window frames into voxels and extracts plane patches.
pub fn build_window_voxels(
    frames: &[WindowFrame],
    params: &VoxelizationParams,
) -> WindowVoxelization {
    let bins: Vec<FrameBins> = if params.parallel {
        frames
            .par_iter()
            .map(|f| bin_frame(f, params.resolution))
            .collect()
    } else {
        frames.iter().map(|f| bin_frame(f, params.resolution)).collect()
    };

    let mut keys: Vec<(i64, i64, i64)> = bins
        .iter()
        .flat_map(|b| b.cells.keys().copied())
        .collect();
    keys.sort_unstable();
    keys.dedup();

    let extract = |key: &(i64, i64, i64)| -> CellOutcome {
        let members: Vec<(usize, Vec<u32>)> = bins
            .iter()
            .enumerate()
            .filter_map(|(slot, b)| b.cells.get(key).map(|ids| (slot, ids.clone())))
            .collect();
        let mut outcome = CellOutcome::default();
        let cell = VoxelIndex {
            x: key.0,
            y: key.1,
            z: key.2,
            depth: 0,
        };
        extract_cell(cell, *key, members, frames, &bins, params, &mut outcome);
        outcome
    };

    let outcomes: Vec<CellOutcome> = if params.parallel {
        keys.par_iter().map(extract).collect()
    } else {
        keys.iter().map(extract).collect()
    };

    let mut result = WindowVoxelization {
        planes: Vec::new(),
        binned_points: frames.iter().map(|f| f.points.len()).sum(),
        root_cells: keys.len(),
        degenerate_cells: 0,
        rejected_cells: 0,
    };
    for o in outcomes {
        result.planes.extend(o.planes);
        result.degenerate_cells += o.degenerate;
        result.rejected_cells += o.rejected;
    }
    result
}

#[derive(Default)]
struct CellOutcome {
    planes: Vec<ExtractedPlane>,
    degenerate: usize,
    rejected: usize,
}

fn extract_cell(
    cell: VoxelIndex,
    root: (i64, i64, i64),
    members: Vec<(usize, Vec<u32>)>,
    frames: &[WindowFrame],
    bins: &[FrameBins],
    params: &VoxelizationParams,
    out: &mut CellOutcome,
) {
    let total: usize = members.iter().map(|(_, ids)| ids.len()).sum();
    if total < params.min_points {
        out.degenerate += 1;
        return;
    }
    // Pool the per-frame global clusters in window order.
    let mut pooled = PointCluster::empty();
    for (slot, ids) in &members {
        let globals = &bins[*slot].globals;
        let mut frame_cluster = PointCluster::empty();
        for &id in ids {
            frame_cluster.add_point(&globals[id as usize]);
        }
        pooled.merge(&frame_cluster);
    }
    match fit_plane(&pooled, params.planarity_ratio, params.min_points) {
        PlaneFit::Planar(patch) => {
            let observations = members
                .iter()
                .map(|(slot, ids)| {
                    let frame = &frames[*slot];
                    let mut local = PointCluster::empty();
                    let mut points = Vec::new();
                    if params.keep_points {
                        points.reserve(ids.len());
                    }
                    for &id in ids {
                        let p = &frame.points[id as usize];
                        local.add_point(p);
                        if params.keep_points {
                            points.push(*p);
                        }
                    }
                    PlaneObservation {
                        frame_id: frame.frame_id,
                        local_cluster: local,
                        points,
                    }
                })
                .collect();
            out.planes.push(ExtractedPlane {
                patch,
                cell,
                root,
                observations,
            });
        }
        PlaneFit::Degenerate { .. } => out.degenerate += 1,
        PlaneFit::NotPlanar { .. } => {
            if cell.depth >= params.max_depth {
                out.rejected += 1;
                return;
            }
            // Re-bin the same points at the halved resolution. Octant slot
            // encodes (dx, dy, dz) offsets from the doubled parent index.
            let child_depth = cell.depth + 1;
            let mut children: [Vec<(usize, Vec<u32>)>; 8] = Default::default();
            for (slot, ids) in &members {
                let globals = &bins[*slot].globals;
                let mut per_child: [Vec<u32>; 8] = Default::default();
                for &id in ids {
                    let g = &globals[id as usize];
                    let idx = VoxelIndex::of(g, params.resolution, child_depth);
                    let dx = (idx.x - 2 * cell.x).clamp(0, 1);
                    let dy = (idx.y - 2 * cell.y).clamp(0, 1);
                    let dz = (idx.z - 2 * cell.z).clamp(0, 1);
                    per_child[(dx * 4 + dy * 2 + dz) as usize].push(id);
                }
                for (octant, ids) in per_child.into_iter().enumerate() {
                    if !ids.is_empty() {
                        children[octant].push((*slot, ids));
                    }
                }
            }
            for (octant, child_members) in children.into_iter().enumerate() {
                if child_members.is_empty() {
                    continue;
                }
                let dx = (octant / 4) as i64;
                let dy = ((octant / 2) % 2) as i64;
                let dz = (octant % 2) as i64;
                let child = VoxelIndex {
                    x: 2 * cell.x + dx,
                    y: 2 * cell.y + dy,
                    z: 2 * cell.z + dz,
                    depth: child_depth,
                };
                extract_cell(child, root, child_members, frames, bins, params, out);
            }
        }
    }
}
