//! Lossless compression of point-to-plane measurements.
//!
//! A frame observing a plane contributes one scalar residual per point:
//! `z_j = pi^T T [b_j; 1]`, the signed distance of body point `b_j` from the
//! global plane `pi = [n; -d]` after mapping through the frame pose `T`.
//! Stacking the homogeneous points as rows of `Pbar` (m x 4) gives
//! `z = Pbar (T^T pi)` and Jacobians `H = Pbar D` for a shared 4 x k inner
//! derivative `D`. Since `Pbar^T Pbar = C = L L^T` is exactly the cluster
//! moment matrix, replacing `Pbar` with the 4 x 4 factor transpose `L^T`
//! preserves every Gram product (`H^T H`, `H^T z`, ...): the four-row system
//! `z'' = L^T (T^T pi)`, `H'' = L^T D` carries the same information as the
//! m-row system, independent of m.
//!
//! Plane coordinates are parametrized by the closest point `q = d n`, giving
//! a minimal 3-dof plane Jacobian. Planes passing near the sensor origin
//! (`d -> 0`) make that chart singular; the Jacobian then falls back to a
//! clamped denominator and reports it, so callers can drop the plane block.

use nalgebra::{DMatrix, DVector, SMatrix, Vector4};
use thiserror::Error;

use crate::geometry::{skew, HomogeneousTransform, Mat4, Pose, Vec3, Vec4};
use crate::linalg::{pivoted_cholesky4, FactorError};
use crate::voxel::PointCluster;

/// Jacobian rows map to `[rotation error (3), position error (3)]`.
pub type PoseJacobian = SMatrix<f64, 4, 6>;
/// Jacobian columns map to the plane's closest-point coordinates.
pub type PlaneJacobian = SMatrix<f64, 4, 3>;

/// Smallest plane-to-origin distance before the closest-point chart degrades.
pub const MIN_PLANE_DISTANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum CompressError {
    #[error("cluster cannot be factored: {0}")]
    BadCluster(#[from] FactorError),
    #[error("cannot compress an empty cluster")]
    EmptyCluster,
}

/// Cholesky factor of a cluster's homogeneous moment matrix (`C = L L^T`,
/// lower-trapezoidal with `rank` nonzero columns).
#[derive(Debug, Clone, Copy)]
pub struct ClusterFactor {
    l: Mat4,
    rank: usize,
    point_count: usize,
}

impl ClusterFactor {
    pub fn from_cluster(cluster: &PointCluster) -> Result<Self, CompressError> {
        if cluster.count == 0 {
            return Err(CompressError::EmptyCluster);
        }
        let (l, rank) = pivoted_cholesky4(&cluster.moment_matrix())?;
        Ok(ClusterFactor {
            l,
            rank,
            point_count: cluster.count,
        })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn point_count(&self) -> usize {
        self.point_count
    }

    /// `L^T w`: rows at and beyond `rank` are identically zero.
    pub fn transpose_apply(&self, w: &Vec4) -> Vec4 {
        self.l.transpose() * w
    }
}

/// The global plane expressed in the sensor frame, `T^T pi`.
pub fn plane_in_sensor(pose: &Pose, pi: &Vec4) -> Vec4 {
    HomogeneousTransform::from_pose(pose).transpose_apply(pi)
}

/// Signed point-to-plane offset of one homogeneous body point.
pub fn point_plane_offset(pi_sensor: &Vec4, body_point: &Vec3) -> f64 {
    pi_sensor.x * body_point.x
        + pi_sensor.y * body_point.y
        + pi_sensor.z * body_point.z
        + pi_sensor.w
}

/// Derivative of `T^T pi` with respect to the right-multiplicative pose
/// error `[d_theta; d_p]`: rotation rows `skew(R^T n)`, offset row `n^T`.
pub fn pose_error_jacobian(pose: &Pose, normal: &Vec3) -> PoseJacobian {
    let n_body = pose.rotation.rotate_transposed(normal);
    let mut d = PoseJacobian::zeros();
    d.fixed_view_mut::<3, 3>(0, 0).copy_from(&skew(&n_body));
    d.fixed_view_mut::<1, 3>(3, 3).copy_from(&normal.transpose());
    d
}

/// Derivative of `T^T pi` with respect to the plane's closest point
/// `q = d n`; second return is true when `d` was clamped.
pub fn plane_error_jacobian(pose: &Pose, normal: &Vec3, distance: f64) -> (PlaneJacobian, bool) {
    let clamped = distance < MIN_PLANE_DISTANCE;
    let d_eff = distance.max(MIN_PLANE_DISTANCE);
    let tangent = (nalgebra::Matrix3::identity() - normal * normal.transpose()) / d_eff;
    let mut dpi = SMatrix::<f64, 4, 3>::zeros();
    dpi.fixed_view_mut::<3, 3>(0, 0).copy_from(&tangent);
    dpi.fixed_view_mut::<1, 3>(3, 0).copy_from(&(-normal.transpose()));
    let t = HomogeneousTransform::from_pose(pose);
    let mut out = PlaneJacobian::zeros();
    for col in 0..3 {
        let c: Vec4 = dpi.column(col).into_owned();
        out.set_column(col, &t.transpose_apply(&c));
    }
    (out, clamped)
}

/// A plane observation reduced to at most four rows.
#[derive(Debug, Clone)]
pub struct CompressedMeasurement {
    /// `-z'' = -L^T T^T pi`; rows at and beyond `rank` are zero.
    pub residual: Vec4,
    pub h_pose: PoseJacobian,
    pub h_plane: PlaneJacobian,
    pub rank: usize,
    pub point_count: usize,
    /// True when the plane ran too close to the origin for its chart.
    pub plane_chart_clamped: bool,
}

/// Compresses one frame's observation of a global plane `[n; -d]`.
pub fn compress_observation(
    pose: &Pose,
    normal: &Vec3,
    distance: f64,
    cluster: &PointCluster,
) -> Result<CompressedMeasurement, CompressError> {
    let factor = ClusterFactor::from_cluster(cluster)?;
    let pi = Vector4::new(normal.x, normal.y, normal.z, -distance);
    let pi_sensor = plane_in_sensor(pose, &pi);
    let lt = factor.l.transpose();
    let (d_plane, clamped) = plane_error_jacobian(pose, normal, distance);
    Ok(CompressedMeasurement {
        residual: -(lt * pi_sensor),
        h_pose: lt * pose_error_jacobian(pose, normal),
        h_plane: lt * d_plane,
        rank: factor.rank,
        point_count: factor.point_count,
        plane_chart_clamped: clamped,
    })
}

/// The same observation kept at one row per point (the uncompressed form).
#[derive(Debug, Clone)]
pub struct PointMeasurement {
    /// `-z`, one entry per point.
    pub residual: DVector<f64>,
    pub h_pose: DMatrix<f64>,
    pub h_plane: DMatrix<f64>,
    pub point_count: usize,
    pub plane_chart_clamped: bool,
}

/// Builds the per-point rows for one frame's observation of a plane.
pub fn point_observation(
    pose: &Pose,
    normal: &Vec3,
    distance: f64,
    points: &[Vec3],
) -> PointMeasurement {
    let m = points.len();
    let pi = Vector4::new(normal.x, normal.y, normal.z, -distance);
    let pi_sensor = plane_in_sensor(pose, &pi);
    let d_pose = pose_error_jacobian(pose, normal);
    let (d_plane, clamped) = plane_error_jacobian(pose, normal, distance);
    let mut residual = DVector::zeros(m);
    let mut h_pose = DMatrix::zeros(m, 6);
    let mut h_plane = DMatrix::zeros(m, 3);
    for (j, p) in points.iter().enumerate() {
        let h = Vector4::new(p.x, p.y, p.z, 1.0);
        residual[j] = -point_plane_offset(&pi_sensor, p);
        h_pose.row_mut(j).copy_from(&(h.transpose() * d_pose));
        h_plane.row_mut(j).copy_from(&(h.transpose() * d_plane));
    }
    PointMeasurement {
        residual,
        h_pose,
        h_plane,
        point_count: m,
        plane_chart_clamped: clamped,
    }
}
