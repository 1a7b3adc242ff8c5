//! Plane-measurement stacking, null-space projection, and the EKF update.
//!
//! Each extracted plane yields one measurement block: the per-frame rows
//! (four compressed rows per frame, or one row per point in the
//! uncompressed mode) stacked in window order, with a shared 3-column
//! Jacobian against the plane's own error. The plane is never added to the
//! state; instead every block is multiplied by an orthonormal basis of the
//! left null space of that plane Jacobian, which removes the plane error
//! exactly while keeping the row noise isotropic.
//!
//! The update solves the information form: with `A = P^-1 + H^T H / s^2`
//! and `b = H^T r / s^2`, the correction is `dx = A^-1 b` and the posterior
//! covariance is exactly `A^-1`, which equals the Kalman form `(I - K H) P`.
//! Both factorizations are Cholesky; nothing is inverted before a solve.
//! An optional per-block Mahalanobis gate (chi-square on the projected
//! residual) drops outlier blocks before the solve; it is off by default.

use nalgebra::{Cholesky, DMatrix, DVector};
use thiserror::Error;

use crate::compress::{compress_observation, point_observation, CompressError};
use crate::geometry::{Pose, Vec3};
use crate::linalg::{min_symmetric_eigenvalue, symmetrize, LeftNullspace};
use crate::state::{FilterState, PoseAnchor, StateError, StateLayout};
use crate::voxel::PlaneObservation;

#[derive(Debug, Error)]
pub enum UpdateError {
    #[error("state covariance is not positive definite (min eigenvalue {min_eigenvalue:.3e})")]
    CovarianceNotInvertible { min_eigenvalue: f64 },
    #[error("information matrix of dimension {dim} is not positive definite (min eigenvalue {min_eigenvalue:.3e})")]
    InformationNotInvertible { min_eigenvalue: f64, dim: usize },
    #[error("measurement block has {got} state columns, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("per-point measurement mode requires stored observation points")]
    MissingPoints,
    #[error("a plane block must contain at least one observation")]
    NoObservations,
    #[error("update produced a non-finite correction")]
    NonFinite,
    #[error("cluster compression failed: {0}")]
    Compression(#[from] CompressError),
    #[error(transparent)]
    State(#[from] StateError),
}

/// How a plane observation becomes measurement rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasurementMode {
    /// Four rows per observing frame from the cluster factor.
    Cluster,
    /// One row per point (requires the voxelization to keep points).
    PerPoint,
}

/// One frame's plane observation tied to the state entry its pose error
/// lives in.
pub struct AnchoredObservation<'a> {
    pub anchor: PoseAnchor,
    /// Best current pose estimate; the residual is evaluated here.
    pub pose: Pose,
    /// Pose the Jacobian rows are linearized about. Held at the estimate
    /// from the frame's first measurement so that re-measuring the frame
    /// in later scans cannot manufacture information along directions the
    /// measurements do not actually observe.
    pub lin_pose: Pose,
    pub observation: &'a PlaneObservation,
}

/// Pre-projection stacked rows of one plane.
pub struct PlaneBlock {
    /// `-z`, stacked in frame order.
    pub residual: DVector<f64>,
    /// Rows x state-error-dim; each frame's 6 pose columns are the only
    /// nonzero entries of its rows.
    pub h_x: DMatrix<f64>,
    /// Rows x 3 Jacobian against the plane's closest-point error.
    pub h_plane: DMatrix<f64>,
    /// Raw points behind the rows (for measurement-size accounting).
    pub point_count: usize,
}

/// Stacks a plane's observations into one measurement block.
pub fn stack_plane_block(
    normal: &Vec3,
    distance: f64,
    observations: &[AnchoredObservation],
    layout: &StateLayout,
    mode: MeasurementMode,
) -> Result<PlaneBlock, UpdateError> {
    if observations.is_empty() {
        return Err(UpdateError::NoObservations);
    }
    let dim = layout.error_dim();
    let mut residuals: Vec<DVector<f64>> = Vec::with_capacity(observations.len());
    let mut pose_rows: Vec<DMatrix<f64>> = Vec::with_capacity(observations.len());
    let mut plane_rows: Vec<DMatrix<f64>> = Vec::with_capacity(observations.len());
    let mut point_count = 0usize;
    for obs in observations {
        point_count += obs.observation.local_cluster.count;
        match mode {
            MeasurementMode::Cluster => {
                let c = compress_observation(
                    &obs.pose,
                    normal,
                    distance,
                    &obs.observation.local_cluster,
                )?;
                let j = compress_observation(
                    &obs.lin_pose,
                    normal,
                    distance,
                    &obs.observation.local_cluster,
                )?;
                residuals.push(DVector::from_column_slice(c.residual.as_slice()));
                pose_rows.push(DMatrix::from_column_slice(4, 6, j.h_pose.as_slice()));
                plane_rows.push(DMatrix::from_column_slice(4, 3, j.h_plane.as_slice()));
            }
            MeasurementMode::PerPoint => {
                let points = &obs.observation.points;
                if points.len() != obs.observation.local_cluster.count {
                    return Err(UpdateError::MissingPoints);
                }
                let p = point_observation(&obs.pose, normal, distance, points);
                let j = point_observation(&obs.lin_pose, normal, distance, points);
                residuals.push(p.residual);
                pose_rows.push(j.h_pose);
                plane_rows.push(j.h_plane);
            }
        }
    }
    let rows: usize = residuals.iter().map(|r| r.len()).sum();
    let mut residual = DVector::zeros(rows);
    let mut h_x = DMatrix::zeros(rows, dim);
    let mut h_plane = DMatrix::zeros(rows, 3);
    let mut row = 0;
    for ((obs, r), (hp, hpi)) in observations
        .iter()
        .zip(residuals)
        .zip(pose_rows.into_iter().zip(plane_rows))
    {
        let m = r.len();
        residual.rows_mut(row, m).copy_from(&r);
        let col = layout.pose_cols(obs.anchor).start;
        h_x.view_mut((row, col), (m, 6)).copy_from(&hp);
        h_plane.rows_mut(row, m).copy_from(&hpi);
        row += m;
    }
    Ok(PlaneBlock {
        residual,
        h_x,
        h_plane,
        point_count,
    })
}

/// A plane block after its plane-error dependence has been projected out.
pub struct ProjectedBlock {
    pub residual: DVector<f64>,
    pub h_x: DMatrix<f64>,
    pub point_count: usize,
}

/// Multiplies the block by an orthonormal basis of the left null space of
/// `h_plane`. Returns `None` when no rows survive (the plane's own error
/// consumed every row) or when the stacked plane Jacobian does not expose
/// all three plane-error directions — a block that cannot observe the full
/// plane error (e.g. a single collinear stripe of points) is dropped rather
/// than half-projected, so every retained plane removes exactly three rows.
pub fn nullspace_project(block: &PlaneBlock) -> Option<ProjectedBlock> {
    // The left null space is invariant under column scaling; normalizing
    // evens out the huge column-magnitude spread the near-origin plane
    // chart produces and keeps the rank decision well conditioned.
    let mut balanced = block.h_plane.clone();
    for mut col in balanced.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col /= norm;
        }
    }
    let null = LeftNullspace::new(&balanced);
    if null.rank() != block.h_plane.ncols() || null.null_dim() == 0 {
        return None;
    }
    #[cfg(debug_assertions)]
    {
        let annihilated = null.project(&block.h_plane);
        let scale = block.h_plane.amax().max(1.0);
        debug_assert!(
            annihilated.amax() <= 1e-10 * scale,
            "null-space basis failed to annihilate the plane Jacobian"
        );
    }
    let h_x = null.project(&block.h_x);
    let residual_mat = null.project(&DMatrix::from_column_slice(
        block.residual.len(),
        1,
        block.residual.as_slice(),
    ));
    Some(ProjectedBlock {
        residual: DVector::from_column_slice(residual_mat.as_slice()),
        h_x,
        point_count: block.point_count,
    })
}


/// Outlier handling for the update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GatingMode {
    Off,
    /// Drop blocks whose Mahalanobis distance exceeds the chi-square
    /// quantile at this confidence (e.g. 0.95).
    Chi2 { confidence: f64 },
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct UpdateOutcome {
    pub rows_used: usize,
    pub blocks_used: usize,
    pub blocks_gated: usize,
    pub correction_norm: f64,
}

/// Information-form solve shared by the filter update and its tests:
/// given the prior covariance and stacked whitened-by-`sigma` rows, returns
/// the correction and the posterior covariance `A^-1`.
pub fn solve_information_form(
    prior_cov: &DMatrix<f64>,
    blocks: &[&ProjectedBlock],
    sigma: f64,
) -> Result<(DVector<f64>, DMatrix<f64>), UpdateError> {
    let dim = prior_cov.nrows();
    let prior_chol = Cholesky::new(prior_cov.clone()).ok_or_else(|| {
        UpdateError::CovarianceNotInvertible {
            min_eigenvalue: min_symmetric_eigenvalue(prior_cov),
        }
    })?;
    // A factorization can "succeed" on an exactly singular matrix when
    // rounding leaves tiny positive pivots (a duplicated pose block yields a
    // pivot ratio near 1e-8); the ratio test rejects condition numbers
    // beyond ~1e14, far outside anything a healthy covariance produces.
    let pivots: Vec<f64> = (0..dim).map(|i| prior_chol.l_dirty()[(i, i)]).collect();
    let max_pivot = pivots.iter().cloned().fold(0.0, f64::max);
    if pivots.iter().any(|&p| !(p > 1e-7 * max_pivot)) {
        return Err(UpdateError::CovarianceNotInvertible {
            min_eigenvalue: min_symmetric_eigenvalue(prior_cov),
        });
    }
    let inv_var = 1.0 / (sigma * sigma);
    let mut information = prior_chol.inverse();
    symmetrize(&mut information);
    let mut rhs = DVector::zeros(dim);
    for block in blocks {
        if block.h_x.ncols() != dim {
            return Err(UpdateError::DimensionMismatch {
                expected: dim,
                got: block.h_x.ncols(),
            });
        }
        information += block.h_x.transpose() * &block.h_x * inv_var;
        rhs += block.h_x.transpose() * &block.residual * inv_var;
    }
    symmetrize(&mut information);
    let info_chol = Cholesky::new(information.clone()).ok_or_else(|| {
        UpdateError::InformationNotInvertible {
            min_eigenvalue: min_symmetric_eigenvalue(&information),
            dim,
        }
    })?;
    let dx = info_chol.solve(&rhs);
    let mut posterior = info_chol.inverse();
    symmetrize(&mut posterior);
    if dx.iter().any(|v| !v.is_finite()) {
        return Err(UpdateError::NonFinite);
    }
    Ok((dx, posterior))
}

/// Applies projected plane blocks to the filter state.
///
/// Gating (when enabled) is evaluated per block against the prior:
/// `g = r^T (H P H^T + s^2 I)^-1 r` compared to the chi-square quantile at
/// the block's row count.
pub fn ekf_update(
    state: &mut FilterState,
    blocks: &[ProjectedBlock],
    sigma: f64,
    gating: GatingMode,
) -> Result<UpdateOutcome, UpdateError> {
    let mut kept: Vec<&ProjectedBlock> = Vec::with_capacity(blocks.len());
    let mut gated = 0usize;
    match gating {
        GatingMode::Off => kept.extend(blocks.iter()),
        GatingMode::Chi2 { confidence } => {
            for block in blocks {
                if block.h_x.ncols() != state.covariance().nrows() {
                    return Err(UpdateError::DimensionMismatch {
                        expected: state.covariance().nrows(),
                        got: block.h_x.ncols(),
                    });
                }
                let rows = block.residual.len();
                let mut s = &block.h_x * state.covariance() * block.h_x.transpose();
                for i in 0..rows {
                    s[(i, i)] += sigma * sigma;
                }
                symmetrize(&mut s);
                let distance = match Cholesky::new(s) {
                    Some(chol) => block.residual.dot(&chol.solve(&block.residual)),
                    None => f64::INFINITY,
                };
                if distance <= chi_square_quantile(rows, confidence) {
                    kept.push(block);
                } else {
                    gated += 1;
                }
            }
        }
    }
    if kept.is_empty() {
        return Ok(UpdateOutcome {
            blocks_gated: gated,
            ..UpdateOutcome::default()
        });
    }
    let (dx, posterior) = solve_information_form(state.covariance(), &kept, sigma)?;
    let outcome = UpdateOutcome {
        rows_used: kept.iter().map(|b| b.residual.len()).sum(),
        blocks_used: kept.len(),
        blocks_gated: gated,
        correction_norm: dx.norm(),
    };
    state.apply_correction(&dx)?;
    state.set_covariance(posterior)?;
    Ok(outcome)
}

/// Chi-square quantile via the Wilson-Hilferty cube-root transform, with
/// the standard normal quantile from Acklam's rational approximation.
/// Accurate to a fraction of a percent for the degrees of freedom used in
/// gating; not suitable as a general-purpose statistical function.
pub fn chi_square_quantile(dof: usize, p: f64) -> f64 {
    let k = dof as f64;
    let z = standard_normal_quantile(p);
    let a = 2.0 / (9.0 * k);
    k * (1.0 - a + z * a.sqrt()).powi(3)
}

/// Inverse standard-normal CDF (Acklam's rational approximation, relative
/// error below 1.2e-9 over (0, 1)).
pub fn standard_normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile needs p in (0, 1), got {p}");
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}
