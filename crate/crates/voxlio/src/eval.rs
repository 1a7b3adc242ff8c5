//! Trajectory accuracy and consistency metrics.
//!
//! Accuracy is length-normalized absolute pose error (translation as a
//! percentage of distance traveled, rotation in degrees per meter);
//! consistency is the average normalized estimation error squared (NEES)
//! of the 6-DOF pose against the filter's reported covariance, whose ideal
//! value is the error dimension, 6. Evaluation runs in the estimator's own
//! global frame by default — aligning first would mask drift — with an
//! optional rigid alignment for trajectories expressed in different frames.

use nalgebra::{Matrix3, Matrix6, Vector6};
use thiserror::Error;

use crate::dataset::{EstimateRecord, GroundTruthRecord};
use crate::geometry::{log_so3, Pose, Rotation, Vec3};

/// Maximum timestamp gap (s) when pairing estimates with ground truth.
pub const ASSOCIATION_TOLERANCE: f64 = 5e-3;
/// Average NEES of a perfectly consistent 6-DOF pose estimator.
pub const IDEAL_POSE_NEES: f64 = 6.0;
/// Ridge added to a pose covariance that fails to factor as-is.
const NEES_RIDGE: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(
        "no estimate timestamp within {ASSOCIATION_TOLERANCE} s of ground truth \
         ({estimates} estimates vs {ground_truth} ground-truth records)"
    )]
    NoOverlap {
        estimates: usize,
        ground_truth: usize,
    },
    #[error("trajectory length {0} m is too short to normalize by")]
    DegenerateLength(f64),
    #[error("every paired pose covariance was singular ({skipped} timesteps skipped)")]
    NothingUsable { skipped: usize },
}

/// Distance traveled: the sum of consecutive ground-truth position steps.
pub fn trajectory_length(ground_truth: &[GroundTruthRecord]) -> f64 {
    ground_truth
        .windows(2)
        .map(|w| (w[1].pose.position - w[0].pose.position).norm())
        .sum()
}

/// Whether to rigidly register the estimate onto the ground-truth frame
/// before scoring. `None` is the default: both trajectories share a global
/// frame in simulation, and alignment would hide drift.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Alignment {
    None,
    Rigid,
}

#[derive(Debug, Clone, Copy)]
pub struct ApeResult {
    /// RMS position error as a percentage of trajectory length.
    pub translation_percent: f64,
    /// RMS geodesic attitude error in degrees per meter of trajectory.
    pub rotation_deg_per_meter: f64,
    /// Number of estimate/ground-truth pairs scored.
    pub pairs: usize,
}

/// Length-normalized absolute pose error over timestamp-paired poses.
pub fn compute_ape(
    estimates: &[EstimateRecord],
    ground_truth: &[GroundTruthRecord],
    length: f64,
    alignment: Alignment,
) -> Result<ApeResult, EvalError> {
    if !(length > 1e-9) {
        return Err(EvalError::DegenerateLength(length));
    }
    let pairs = paired_indices(estimates, ground_truth);
    if pairs.is_empty() {
        return Err(EvalError::NoOverlap {
            estimates: estimates.len(),
            ground_truth: ground_truth.len(),
        });
    }
    let correction = match alignment {
        Alignment::None => Pose::identity(),
        Alignment::Rigid => rigid_registration(
            pairs
                .iter()
                .map(|&(i, j)| (estimates[i].pose.position, ground_truth[j].pose.position)),
        ),
    };
    let mut trans_sq = 0.0;
    let mut rot_sq = 0.0;
    for &(i, j) in &pairs {
        let est = align_pose(&correction, &estimates[i].pose);
        let gt = &ground_truth[j].pose;
        trans_sq += (gt.position - est.position).norm_squared();
        let angle = est.rotation.angle_to(&gt.rotation).to_degrees();
        rot_sq += angle * angle;
    }
    let n = pairs.len() as f64;
    Ok(ApeResult {
        translation_percent: (trans_sq / n).sqrt() / length * 100.0,
        rotation_deg_per_meter: (rot_sq / n).sqrt() / length,
        pairs: pairs.len(),
    })
}

#[derive(Debug, Clone, Copy)]
pub struct NeesResult {
    /// Mean NEES over the contributing timesteps.
    pub average: f64,
    /// Timesteps that contributed to the average.
    pub pairs: usize,
    /// Covariances that only factored after the ridge was added.
    pub regularized: usize,
    /// Timesteps dropped because the covariance stayed singular.
    pub skipped: usize,
}

/// Average pose NEES against each estimate's own reported 6x6 covariance.
pub fn compute_nees(
    estimates: &[EstimateRecord],
    ground_truth: &[GroundTruthRecord],
) -> Result<NeesResult, EvalError> {
    let matched = paired_indices(estimates, ground_truth);
    if matched.is_empty() {
        return Err(EvalError::NoOverlap {
            estimates: estimates.len(),
            ground_truth: ground_truth.len(),
        });
    }
    let mut sum = 0.0;
    let mut pairs = 0usize;
    let mut regularized = 0usize;
    let mut skipped = 0usize;
    for &(i, j) in &matched {
        let e = pose_error(&estimates[i].pose, &ground_truth[j].pose);
        let cov = &estimates[i].pose_covariance;
        if let Some(v) = nees_value(&e, cov) {
            sum += v;
            pairs += 1;
        } else if let Some(v) = nees_value(&e, &(cov + Matrix6::identity() * NEES_RIDGE)) {
            sum += v;
            pairs += 1;
            regularized += 1;
        } else {
            skipped += 1;
        }
    }
    if pairs == 0 {
        return Err(EvalError::NothingUsable { skipped });
    }
    Ok(NeesResult {
        average: sum / pairs as f64,
        pairs,
        regularized,
        skipped,
    })
}

/// Pose error in the filter's error chart: attitude error is the log of
/// `R_est^T R_gt` (right-multiplicative, body frame), position error is the
/// plain difference. This must match the chart behind the covariance
/// blocks, so the retraction is checked to reproduce the truth.
pub fn pose_error(estimate: &Pose, truth: &Pose) -> Vector6<f64> {
    let dtheta = log_so3(&estimate.rotation.inverse().compose(&truth.rotation));
    let dp = truth.position - estimate.position;
    debug_assert!(
        estimate
            .rotation
            .compose(&crate::geometry::exp_so3(&dtheta))
            .angle_to(&truth.rotation)
            < 1e-9,
        "attitude chart does not retract onto the truth"
    );
    Vector6::new(dtheta.x, dtheta.y, dtheta.z, dp.x, dp.y, dp.z)
}

/// Squared Mahalanobis norm of `error` under `covariance`, or `None` if the
/// covariance does not factor.
pub fn nees_value(error: &Vector6<f64>, covariance: &Matrix6<f64>) -> Option<f64> {
    let chol = nalgebra::Cholesky::new(*covariance)?;
    Some(error.dot(&chol.solve(error)))
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DimensionStats {
    /// Mean plane observations per scan.
    pub avg_planes_per_frame: f64,
    /// Mean measurement points per scan.
    pub avg_points_per_frame: f64,
    /// How much smaller the compressed measurement (4 rows per plane
    /// observation) is than the raw point stack, as a percentage.
    pub reduction_percent: f64,
}

/// Measurement-size statistics from per-frame `(plane observation count,
/// contributing point count)` logs.
pub fn dimension_stats(frames: &[(usize, usize)]) -> DimensionStats {
    if frames.is_empty() {
        return DimensionStats::default();
    }
    let total_planes: usize = frames.iter().map(|f| f.0).sum();
    let total_points: usize = frames.iter().map(|f| f.1).sum();
    let n = frames.len() as f64;
    let reduction = if total_points == 0 {
        0.0
    } else {
        ((1.0 - 4.0 * total_planes as f64 / total_points as f64) * 100.0).max(0.0)
    };
    DimensionStats {
        avg_planes_per_frame: total_planes as f64 / n,
        avg_points_per_frame: total_points as f64 / n,
        reduction_percent: reduction,
    }
}

/// Metrics for one run of the estimator.
#[derive(Debug, Clone)]
pub struct RunMetrics {
    pub seed: u64,
    pub trajectory_length: f64,
    pub ape: ApeResult,
    pub nees: NeesResult,
    pub dimensions: DimensionStats,
}

/// Per-run metrics plus the aggregates reported across a Monte Carlo batch.
#[derive(Debug, Clone, Default)]
pub struct MetricsReport {
    pub runs: Vec<RunMetrics>,
}

impl MetricsReport {
    pub fn push(&mut self, run: RunMetrics) {
        self.runs.push(run);
    }

    fn mean(&self, f: impl Fn(&RunMetrics) -> f64) -> f64 {
        if self.runs.is_empty() {
            return 0.0;
        }
        self.runs.iter().map(f).sum::<f64>() / self.runs.len() as f64
    }

    pub fn average_translation_percent(&self) -> f64 {
        self.mean(|r| r.ape.translation_percent)
    }

    pub fn average_rotation_deg_per_meter(&self) -> f64 {
        self.mean(|r| r.ape.rotation_deg_per_meter)
    }

    /// NEES averaged over time and runs (every run weighs equally).
    pub fn average_nees(&self) -> f64 {
        self.mean(|r| r.nees.average)
    }

    pub fn average_reduction_percent(&self) -> f64 {
        self.mean(|r| r.dimensions.reduction_percent)
    }

    /// Flat `(name, value)` rows for the metrics CSV: aggregates first,
    /// then per-run values.
    pub fn rows(&self) -> Vec<(String, f64)> {
        let mut rows = vec![
            ("runs".to_string(), self.runs.len() as f64),
            (
                "avg_translation_percent".to_string(),
                self.average_translation_percent(),
            ),
            (
                "avg_rotation_deg_per_meter".to_string(),
                self.average_rotation_deg_per_meter(),
            ),
            ("avg_nees".to_string(), self.average_nees()),
            (
                "avg_reduction_percent".to_string(),
                self.average_reduction_percent(),
            ),
            (
                "avg_planes_per_frame".to_string(),
                self.mean(|r| r.dimensions.avg_planes_per_frame),
            ),
            (
                "avg_points_per_frame".to_string(),
                self.mean(|r| r.dimensions.avg_points_per_frame),
            ),
        ];
        for (i, r) in self.runs.iter().enumerate() {
            rows.push((format!("run{i}_seed"), r.seed as f64));
            rows.push((
                format!("run{i}_translation_percent"),
                r.ape.translation_percent,
            ));
            rows.push((
                format!("run{i}_rotation_deg_per_meter"),
                r.ape.rotation_deg_per_meter,
            ));
            rows.push((format!("run{i}_nees"), r.nees.average));
            rows.push((
                format!("run{i}_reduction_percent"),
                r.dimensions.reduction_percent,
            ));
        }
        rows
    }

    /// Short human-readable summary.
    pub fn summary(&self) -> String {
        format!(
            "{} run(s): translation {:.4} %, rotation {:.6} deg/m, NEES {:.2} (ideal {}), \
             measurement reduction {:.1} %",
            self.runs.len(),
            self.average_translation_percent(),
            self.average_rotation_deg_per_meter(),
            self.average_nees(),
            IDEAL_POSE_NEES,
            self.average_reduction_percent(),
        )
    }
}

/// Pairs each estimate with the nearest ground-truth record within the
/// association tolerance. Ground truth must be sorted by time.
fn paired_indices(
    estimates: &[EstimateRecord],
    ground_truth: &[GroundTruthRecord],
) -> Vec<(usize, usize)> {
    if ground_truth.is_empty() {
        return Vec::new();
    }
    let mut out = Vec::new();
    for (i, est) in estimates.iter().enumerate() {
        let k = ground_truth.partition_point(|g| g.time < est.time);
        let j = if k == 0 {
            0
        } else if k == ground_truth.len() {
            ground_truth.len() - 1
        } else if ground_truth[k].time - est.time < est.time - ground_truth[k - 1].time {
            k
        } else {
            k - 1
        };
        if (ground_truth[j].time - est.time).abs() <= ASSOCIATION_TOLERANCE {
            out.push((i, j));
        }
    }
    out
}

/// Least-squares rigid transform mapping the first points of each pair onto
/// the second (rotation + translation, no scale), via the SVD of the
/// cross-covariance with a reflection guard.
fn rigid_registration(pairs: impl Iterator<Item = (Vec3, Vec3)> + Clone) -> Pose {
    let n = pairs.clone().count();
    if n == 0 {
        return Pose::identity();
    }
    let (mut ce, mut cg) = (Vec3::zeros(), Vec3::zeros());
    for (e, g) in pairs.clone() {
        ce += e;
        cg += g;
    }
    ce /= n as f64;
    cg /= n as f64;
    let mut h = Matrix3::zeros();
    for (e, g) in pairs {
        h += (e - ce) * (g - cg).transpose();
    }
    let svd = h.svd(true, true);
    let u = svd.u.expect("3x3 SVD always produces U");
    let v = svd.v_t.expect("3x3 SVD always produces V^T").transpose();
    let mut d = Matrix3::identity();
    d[(2, 2)] = (v * u.transpose()).determinant().signum();
    let r = v * d * u.transpose();
    let rotation = Rotation::from_unit_quaternion(nalgebra::UnitQuaternion::from_rotation_matrix(
        &nalgebra::Rotation3::from_matrix_unchecked(r),
    ));
    let translation = cg - rotation.rotate(&ce);
    Pose::new(rotation, translation)
}

fn align_pose(correction: &Pose, pose: &Pose) -> Pose {
    Pose::new(
        correction.rotation.compose(&pose.rotation),
        correction.transform_point(&pose.position),
    )
}
