//! The full odometry pipeline: IMU propagation, scan undistortion, windowed
//! plane extraction, compressed plane updates, and window maintenance.
//!
//! Per scan the loop is: propagate the filter (recording a pose track for
//! undistortion) to the scan end, re-express the scan's points in the body
//! frame at that time, voxelize the whole window, measure every extracted
//! plane against all of its observing frames in one stacked block, update,
//! then clone the corrected pose and drop the oldest window frame. Cloning
//! happens after the update on purpose: a fresh clone duplicates the
//! navigation pose block and the joint covariance stays singular until
//! process noise separates them.
//!
//! Window overlap means a frame's points contribute to several consecutive
//! updates (planes are refit and relinearized each scan); that reuse is a
//! deliberate approximation of this filter family and is not modeled as
//! correlated noise.

use std::collections::HashMap;
use std::time::Instant;

use nalgebra::DVector;
use rayon::prelude::*;
use thiserror::Error;

use crate::config::{Config, ConfigError, Threading};
use crate::dataset::{Dataset, EstimateRecord, GroundTruthRecord, ScanData};
use crate::eval::{
    compute_ape, compute_nees, dimension_stats, trajectory_length, Alignment, EvalError,
    MetricsReport, RunMetrics,
};
use crate::geometry::{exp_so3, log_so3, Pose, Vec3};
use crate::imu::{
    imu_transition_and_noise, propagate_covariance, propagate_mean, ImuError, ImuNoiseParams,
    ImuSample,
};
use crate::sim::Simulation;
use crate::state::{
    FilterState, ImuNavState, Matrix15, PoseAnchor, StateError, StateLayout, IMU_ERR_ACCEL_BIAS,
    IMU_ERR_GYRO_BIAS, IMU_ERR_POS, IMU_ERR_THETA, IMU_ERR_VEL,
};
use crate::update::{
    ekf_update, nullspace_project, stack_plane_block, AnchoredObservation, ProjectedBlock,
    UpdateError,
};
use crate::voxel::{build_window_voxels, WindowFrame};

/// Floors for the filter's process-noise densities. A literally
/// deterministic motion model makes the joint covariance exactly singular
/// one step after cloning (the clone block is a linear image of the
/// navigation block), so the filter never models zero process noise even
/// when the simulated sensors are noise-free.
const MIN_GYRO_NOISE: f64 = 1e-5;
const MIN_ACCEL_NOISE: f64 = 1e-4;
/// Floor for the initial bias variance, for the same reason: an exactly
/// known bias is a zero row in the covariance.
const BIAS_PRIOR_FLOOR: f64 = 1e-8;
/// Position variance (m^2) beyond which the run is declared diverged.
const POSITION_VARIANCE_LIMIT: f64 = 1e4;
/// Slack for emission times that fall a rounding error outside the track.
const TRACK_SLACK: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("IMU stream does not cover [{from:.4}, {to:.4}] s")]
    ImuCoverageGap { from: f64, to: f64 },
    #[error("emission time {emission:.6} s outside the propagated pose track [{from:.6}, {to:.6}]")]
    EmissionOutsideTrack { emission: f64, from: f64, to: f64 },
    #[error("dataset has no ground-truth record to initialize from")]
    MissingInitialState,
    #[error("filter diverged at scan {frame_id}: {diagnostic}")]
    Diverged { frame_id: u64, diagnostic: String },
    #[error("run with seed {seed} failed: {source}")]
    Run {
        seed: u64,
        #[source]
        source: Box<PipelineError>,
    },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Imu(#[from] ImuError),
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Update(#[from] UpdateError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Piecewise pose history recorded while integrating across a scan
/// interval; positions interpolate linearly and rotations geodesically
/// between knots.
#[derive(Debug, Clone)]
pub struct PoseTrack {
    knots: Vec<(f64, Pose)>,
}

impl PoseTrack {
    pub fn new(knots: Vec<(f64, Pose)>) -> Self {
        debug_assert!(knots.windows(2).all(|w| w[0].0 <= w[1].0));
        PoseTrack { knots }
    }

    pub fn start(&self) -> f64 {
        self.knots.first().map(|k| k.0).unwrap_or(f64::NAN)
    }

    pub fn end(&self) -> f64 {
        self.knots.last().map(|k| k.0).unwrap_or(f64::NAN)
    }

    /// Integrates the IMU stream from `(nav, start_time)` to `target`,
    /// returning the pose track and the final navigation state.
    pub fn from_imu(
        nav: &ImuNavState,
        start_time: f64,
        imu: &[ImuSample],
        target: f64,
        noise: &ImuNoiseParams,
    ) -> Result<(PoseTrack, ImuNavState), PipelineError> {
        let mut nav = *nav;
        let mut knots = vec![(start_time, nav.pose())];
        for_each_imu_interval(imu, start_time, target, |effective, dt, t1| {
            nav = propagate_mean(&nav, &effective, noise, dt)?;
            knots.push((t1, nav.pose()));
            Ok(())
        })?;
        Ok((PoseTrack::new(knots), nav))
    }

    /// Pose at `t`, or an error if `t` lies outside the recorded span.
    pub fn pose_at(&self, t: f64) -> Result<Pose, PipelineError> {
        let (first, last) = (self.start(), self.end());
        if self.knots.is_empty() || t < first - TRACK_SLACK || t > last + TRACK_SLACK {
            return Err(PipelineError::EmissionOutsideTrack {
                emission: t,
                from: first,
                to: last,
            });
        }
        let t = t.clamp(first, last);
        let k = self.knots.partition_point(|k| k.0 < t);
        if k == 0 {
            return Ok(self.knots[0].1);
        }
        let (t0, p0) = self.knots[k - 1];
        let (t1, p1) = self.knots[k.min(self.knots.len() - 1)];
        if t1 - t0 <= TRACK_SLACK {
            return Ok(p1);
        }
        let alpha = (t - t0) / (t1 - t0);
        let dtheta = log_so3(&p0.rotation.inverse().compose(&p1.rotation));
        Ok(Pose::new(
            p0.rotation.compose(&exp_so3(&(dtheta * alpha))),
            p0.position.lerp(&p1.position, alpha),
        ))
    }
}

/// Re-expresses every scan point in the body frame at the scan end time.
///
/// Each point is mapped to the global frame through the body pose at its
/// emission time (track pose composed with the sensor extrinsics) and
/// brought back through the scan-end body pose, which removes the motion
/// smear accumulated over the sweep.
pub fn undistort_scan(
    scan: &ScanData,
    track: &PoseTrack,
    extrinsics: &Pose,
) -> Result<Vec<Vec3>, PipelineError> {
    let reference = track.pose_at(scan.end_time)?;
    let mut out = Vec::with_capacity(scan.points.len());
    for point in &scan.points {
        let sensor_pose = track.pose_at(scan.end_time + point.offset)?.compose(extrinsics);
        let global = sensor_pose.transform_point(&point.position);
        out.push(reference.inverse_transform_point(&global));
    }
    Ok(out)
}

/// Wall-clock seconds per pipeline stage for one frame.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageTimings {
    /// Propagation, undistortion, cloning and window maintenance.
    pub pre_process: f64,
    /// Window voxelization, plane fitting, and measurement bookkeeping.
    pub data_association: f64,
    /// Compression, projection, gating, and the covariance update.
    pub state_update: f64,
    /// Everything else (logging, output assembly).
    pub other: f64,
}

impl StageTimings {
    pub fn total(&self) -> f64 {
        self.pre_process + self.data_association + self.state_update + self.other
    }
}

/// Per-scan record of what the update consumed.
#[derive(Debug, Clone, Default)]
pub struct FrameLog {
    pub frame_id: u64,
    pub time: f64,
    /// Plane-frame observation pairs measured this scan (N_pl).
    pub plane_observations: usize,
    /// Raw points behind those pairs (N_pt).
    pub point_count: usize,
    /// Distinct planes contributing blocks.
    pub planes_used: usize,
    /// Planes whose block could not expose the full plane error and was
    /// dropped before the update (excluded from every other count).
    pub planes_dropped: usize,
    /// Stacked rows before null-space projection (4 per pair in cluster
    /// mode, one per point otherwise).
    pub rows_pre_projection: usize,
    /// Rows actually entering the update.
    pub rows_post_projection: usize,
    pub blocks_gated: usize,
    /// Scan dropped because the IMU stream did not cover it.
    pub skipped_missing_imu: bool,
    pub timings: StageTimings,
}

/// Output of one odometry run.
#[derive(Debug, Clone)]
pub struct OdometryResult {
    /// One record per processed (non-skipped) scan.
    pub estimates: Vec<EstimateRecord>,
    /// One record per input scan, including skipped ones.
    pub logs: Vec<FrameLog>,
}

/// Error-space directions of a rigid motion of the whole world applied to
/// every window pose at once — rotations about the x and y axes through the
/// window centroid, then translations along x, y, z — built at the latest
/// estimates (the coordinates the covariance lives in). The configured
/// drift sigmas add coherent process noise along them after each update:
/// plane updates constrain only relative geometry, and window overlap
/// re-measures the same points against refit, relinearized planes every
/// scan, so consecutive world-frame registrations share errors the white
/// row-noise model cannot express. Without the coherent terms the reported
/// tilt and position uncertainty collapses several times below the error
/// that shared registration noise actually leaves behind, and the
/// overconfident tilt/accelerometer-bias covariance then mis-corrects both
/// during fast-turning stretches. The rotation about gravity gets no such
/// term: nothing replenishes heading information either, so its reported
/// uncertainty already grows at the honest rate, and heading noise would
/// instead drain through the small linearization mismatch and walk the
/// real estimate. An attitude error δθ is body-frame (`R = R̂·exp(δθ^)`),
/// so a world-axis rotation enters a pose block as `(R̂ᵀa, a × (p̂ −
/// centroid))`; velocity and bias entries stay zero because measurement
/// rows never touch those columns.
fn window_drift_directions(layout: &StateLayout, window: &[WindowFrame]) -> [DVector<f64>; 5] {
    let dim = layout.error_dim();
    let mut directions: [DVector<f64>; 5] = std::array::from_fn(|_| DVector::zeros(dim));
    let centroid = window
        .iter()
        .fold(Vec3::zeros(), |sum, frame| sum + frame.pose.position)
        / window.len().max(1) as f64;
    for (i, frame) in window.iter().enumerate() {
        let anchor = if i + 1 == window.len() {
            PoseAnchor::Nav
        } else {
            PoseAnchor::Clone(i)
        };
        let cols = layout.pose_cols(anchor).start;
        for a in 0..3 {
            let mut axis = Vec3::zeros();
            axis[a] = 1.0;
            if a < 2 {
                let theta = frame.pose.rotation.rotate_transposed(&axis);
                let lever = axis.cross(&(frame.pose.position - centroid));
                for k in 0..3 {
                    directions[a][cols + k] = theta[k];
                    directions[a][cols + 3 + k] = lever[k];
                }
            }
            directions[2 + a][cols + 3 + a] = 1.0;
        }
    }
    directions
}

/// Runs the full estimator over an IMU stream and a scan sequence,
/// initialized from a ground-truth record (position, attitude, velocity;
/// biases start at zero with the configured prior spread).
pub fn run_odometry(
    imu: &[ImuSample],
    scans: impl IntoIterator<Item = ScanData>,
    init: &GroundTruthRecord,
    cfg: &Config,
) -> Result<OdometryResult, PipelineError> {
    cfg.validate()?;
    let noise = filter_noise(cfg);
    let extrinsics = cfg.extrinsics()?;
    let vox_params = cfg.voxelization();
    let parallel = cfg.threading == Threading::Parallel;
    let gating = cfg.gating();
    let min_observations = cfg.min_observations.max(1);
    // A frame's points are re-measured in every scan they stay in the
    // window (planes are refit and relinearized each time), so a point
    // contributes ~window_size times. Scaling the row noise by the square
    // root of that factor keeps a point's lifetime information equal to a
    // single measurement, which keeps the covariance honest.
    let row_sigma = cfg.measurement_sigma * (cfg.window_size as f64).sqrt();

    let mut state = initial_state(init, cfg);
    let mut window: Vec<WindowFrame> = Vec::with_capacity(cfg.window_size + 1);
    // Jacobian linearization pose per window frame, pinned at the frame's
    // first measurement and never refreshed (see AnchoredObservation).
    let mut lin_poses: Vec<Pose> = Vec::with_capacity(cfg.window_size + 1);
    let mut estimates = Vec::new();
    let mut logs = Vec::new();

    for scan in scans {
        let mut log = FrameLog {
            frame_id: scan.frame_id,
            time: scan.end_time,
            ..FrameLog::default()
        };

        // Pre-process: propagate mean and covariance to the scan end,
        // recording the pose track the undistortion needs.
        let stage = Instant::now();
        let mut knots = vec![(state.nav_time(), state.nav().pose())];
        let propagated = for_each_imu_interval(
            imu,
            state.nav_time(),
            scan.end_time,
            |effective, dt, t1| {
                let before = *state.nav();
                let nav = propagate_mean(&before, &effective, &noise, dt)?;
                let (phi, q) = imu_transition_and_noise(&before, &effective, &noise, dt);
                let cov = propagate_covariance(state.covariance(), &phi, &q)?;
                state.set_nav(nav, t1);
                state.set_covariance(cov)?;
                knots.push((t1, nav.pose()));
                Ok(())
            },
        );
        let undistorted = match propagated {
            Ok(()) => undistort_scan(&scan, &PoseTrack::new(knots), &extrinsics),
            Err(e) => Err(e),
        };
        let points_body = match undistorted {
            Ok(points) => points,
            Err(
                PipelineError::ImuCoverageGap { .. } | PipelineError::EmissionOutsideTrack { .. },
            ) => {
                log.skipped_missing_imu = true;
                log.timings.pre_process = stage.elapsed().as_secs_f64();
                logs.push(log);
                continue;
            }
            Err(e) => return Err(e),
        };
        log.timings.pre_process = stage.elapsed().as_secs_f64();

        // Data association: refresh window poses to the latest estimates,
        // bring in the new frame anchored at the navigation block, and
        // extract planes from the pooled window.
        let stage = Instant::now();
        for (i, frame) in window.iter_mut().enumerate() {
            frame.pose = state.clones()[i].pose;
        }
        window.push(WindowFrame {
            frame_id: scan.frame_id,
            pose: state.nav().pose(),
            points: points_body,
        });
        lin_poses.push(state.nav().pose());
        let anchors: HashMap<u64, (PoseAnchor, Pose, Pose)> = window
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let anchor = if i + 1 == window.len() {
                    PoseAnchor::Nav
                } else {
                    PoseAnchor::Clone(i)
                };
                (f.frame_id, (anchor, f.pose, lin_poses[i]))
            })
            .collect();
        let vox = build_window_voxels(&window, &vox_params);
        // Every plane is measured against all of its observing frames; the
        // stacked block couples those frames' pose errors in one update.
        let candidates: Vec<(usize, Vec<AnchoredObservation>)> = vox
            .planes
            .iter()
            .enumerate()
            .filter_map(|(idx, plane)| {
                let stackable: Vec<AnchoredObservation> = plane
                    .observations
                    .iter()
                    .map(|obs| {
                        let (anchor, pose, lin_pose) = anchors[&obs.frame_id];
                        AnchoredObservation {
                            anchor,
                            pose,
                            lin_pose,
                            observation: obs,
                        }
                    })
                    .collect();
                (stackable.len() >= min_observations).then_some((idx, stackable))
            })
            .collect();
        log.timings.data_association = stage.elapsed().as_secs_f64();

        // State update: compress, project, and apply every plane block.
        let stage = Instant::now();
        let layout = state.layout();
        let stack_one = |(idx, observations): &(usize, Vec<AnchoredObservation>)| {
            let plane = &vox.planes[*idx];
            let block = stack_plane_block(
                &plane.patch.normal,
                plane.patch.distance,
                observations,
                &layout,
                cfg.measurement_mode,
            )?;
            let rows = block.residual.len();
            let points = block.point_count;
            Ok::<_, UpdateError>((rows, points, nullspace_project(&block)))
        };
        let stacked: Vec<(usize, usize, Option<ProjectedBlock>)> = if parallel {
            candidates
                .par_iter()
                .map(stack_one)
                .collect::<Result<_, _>>()?
        } else {
            candidates
                .iter()
                .map(stack_one)
                .collect::<Result<_, _>>()?
        };
        let mut blocks = Vec::with_capacity(stacked.len());
        for ((_, observations), (rows, points, projected)) in candidates.iter().zip(stacked) {
            // Only planes that survive projection enter the logged counts,
            // so the reported dimensions describe the applied update and
            // rows_post == 4*N_pl - 3*planes_used holds exactly.
            if let Some(block) = projected {
                log.rows_pre_projection += rows;
                log.point_count += points;
                log.plane_observations += observations.len();
                log.rows_post_projection += block.residual.len();
                log.planes_used += 1;
                blocks.push(block);
            } else {
                log.planes_dropped += 1;
            }
        }
        let outcome = ekf_update(&mut state, &blocks, row_sigma, gating)?;
        if !blocks.is_empty() {
            // Correlated registration drift left behind by this scan's
            // measurements: one coherent rank-one covariance increment per
            // world-motion direction (see `window_drift_directions`).
            let drift = window_drift_directions(&layout, &window);
            let mut cov = state.covariance().clone();
            for (a, direction) in drift.iter().enumerate() {
                let sigma = if a < 2 {
                    cfg.tilt_drift_sigma
                } else {
                    cfg.translation_drift_sigma
                };
                cov.ger(sigma * sigma, direction, direction, 1.0);
            }
            state.set_covariance(cov)?;
        }
        log.blocks_gated = outcome.blocks_gated;
        log.timings.state_update = stage.elapsed().as_secs_f64();

        // Post-update bookkeeping: divergence check, output, clone, trim.
        let stage = Instant::now();
        let nav_cov = state.pose_covariance(PoseAnchor::Nav);
        let position_variance = nav_cov[(3, 3)] + nav_cov[(4, 4)] + nav_cov[(5, 5)];
        if !position_variance.is_finite() || position_variance > POSITION_VARIANCE_LIMIT {
            return Err(PipelineError::Diverged {
                frame_id: scan.frame_id,
                diagnostic: format!("position variance reached {position_variance:.3e} m^2"),
            });
        }
        estimates.push(EstimateRecord {
            time: scan.end_time,
            pose: state.nav().pose(),
            velocity: state.nav().velocity,
            gyro_bias: state.nav().gyro_bias,
            accel_bias: state.nav().accel_bias,
            pose_covariance: nav_cov,
        });
        log.timings.other = stage.elapsed().as_secs_f64();

        let stage = Instant::now();
        state.augment_clone(scan.end_time)?;
        if state.clones().len() > cfg.window_size {
            state.marginalize_oldest()?;
            window.remove(0);
            lin_poses.remove(0);
        }
        log.timings.pre_process += stage.elapsed().as_secs_f64();
        logs.push(log);
    }
    Ok(OdometryResult { estimates, logs })
}

/// Runs the estimator over a stored dataset, initializing from its first
/// ground-truth record.
pub fn run_on_dataset(dataset: &Dataset, cfg: &Config) -> Result<OdometryResult, PipelineError> {
    let init = dataset
        .ground_truth
        .first()
        .ok_or(PipelineError::MissingInitialState)?;
    run_odometry(&dataset.imu, dataset.scans.iter().cloned(), init, cfg)
}

/// Simulates one run with the given seed, estimates, and scores it.
pub fn single_run(cfg: &Config, seed: u64) -> Result<(RunMetrics, OdometryResult), PipelineError> {
    let wrap = |e: PipelineError| PipelineError::Run {
        seed,
        source: Box::new(e),
    };
    let sim = Simulation::new(cfg, seed).map_err(|e| wrap(e.into()))?;
    let init = sim.ground_truth[0];
    let scans = (0..sim.scan_count()).map(|k| sim.scan(k));
    let result = run_odometry(&sim.imu, scans, &init, cfg).map_err(wrap)?;
    let length = trajectory_length(&sim.ground_truth);
    let ape = compute_ape(&result.estimates, &sim.ground_truth, length, Alignment::None)
        .map_err(|e| wrap(e.into()))?;
    let nees =
        compute_nees(&result.estimates, &sim.ground_truth).map_err(|e| wrap(e.into()))?;
    let frames: Vec<(usize, usize)> = result
        .logs
        .iter()
        .filter(|l| !l.skipped_missing_imu)
        .map(|l| (l.plane_observations, l.point_count))
        .collect();
    let metrics = RunMetrics {
        seed,
        trajectory_length: length,
        ape,
        nees,
        dimensions: dimension_stats(&frames),
    };
    Ok((metrics, result))
}

/// Chains simulate, estimate, and score over `runs` consecutive seeds
/// starting at the configured one.
pub fn monte_carlo(cfg: &Config, runs: usize) -> Result<MetricsReport, PipelineError> {
    let mut report = MetricsReport::default();
    for i in 0..runs {
        let (metrics, _) = single_run(cfg, cfg.seed + i as u64)?;
        report.push(metrics);
    }
    Ok(report)
}

/// Filter-model process noise: configured densities with the singularity
/// floors applied.
fn filter_noise(cfg: &Config) -> ImuNoiseParams {
    let n = cfg.imu_noise();
    ImuNoiseParams {
        gyro_noise: n.gyro_noise.max(MIN_GYRO_NOISE),
        accel_noise: n.accel_noise.max(MIN_ACCEL_NOISE),
        gyro_walk: n.gyro_walk,
        accel_walk: n.accel_walk,
        gravity: n.gravity,
    }
}

fn initial_state(init: &GroundTruthRecord, cfg: &Config) -> FilterState {
    let nav = ImuNavState {
        position: init.pose.position,
        orientation: init.pose.rotation,
        velocity: init.velocity,
        gyro_bias: Vec3::zeros(),
        accel_bias: Vec3::zeros(),
    };
    // A bias drawn uniformly on a sphere of radius m has per-axis variance
    // m^2 / 3.
    let gyro_bias_var = (cfg.init_gyro_bias_magnitude.powi(2) / 3.0).max(BIAS_PRIOR_FLOOR);
    let accel_bias_var = (cfg.init_accel_bias_magnitude.powi(2) / 3.0).max(BIAS_PRIOR_FLOOR);
    let mut prior = Matrix15::zeros();
    for k in 0..3 {
        prior[(IMU_ERR_THETA + k, IMU_ERR_THETA + k)] = cfg.init_attitude_prior;
        prior[(IMU_ERR_POS + k, IMU_ERR_POS + k)] = cfg.init_position_prior;
        prior[(IMU_ERR_VEL + k, IMU_ERR_VEL + k)] = cfg.init_velocity_prior;
        prior[(IMU_ERR_GYRO_BIAS + k, IMU_ERR_GYRO_BIAS + k)] = gyro_bias_var;
        prior[(IMU_ERR_ACCEL_BIAS + k, IMU_ERR_ACCEL_BIAS + k)] = accel_bias_var;
    }
    FilterState::new(nav, init.time, &prior)
}

/// Walks the IMU stream from `start` to `target`, calling `step` once per
/// integration interval with the interval's effective (endpoint-averaged)
/// sample, its length, and its end time. Sample values at interval
/// boundaries that fall between measurements are linearly interpolated.
fn for_each_imu_interval(
    imu: &[ImuSample],
    start: f64,
    target: f64,
    mut step: impl FnMut(ImuSample, f64, f64) -> Result<(), PipelineError>,
) -> Result<(), PipelineError> {
    let gap = || PipelineError::ImuCoverageGap {
        from: start,
        to: target,
    };
    if target <= start + TRACK_SLACK {
        return Ok(());
    }
    let upper = imu.partition_point(|s| s.time <= start);
    if upper == 0 {
        return Err(gap());
    }
    let mut idx = upper - 1;
    let mut t0 = start;
    let mut s0: Option<ImuSample> = None;
    while t0 + TRACK_SLACK < target {
        if idx + 1 >= imu.len() {
            return Err(gap());
        }
        let (a, b) = (&imu[idx], &imu[idx + 1]);
        let s_start = *s0.get_or_insert_with(|| sample_at(a, b, t0));
        let t1 = b.time.min(target);
        let s_end = if t1 >= b.time { *b } else { sample_at(a, b, t1) };
        let dt = t1 - t0;
        if dt > TRACK_SLACK {
            step(s_start.midpoint(&s_end), dt, t1)?;
        }
        t0 = t1;
        s0 = Some(s_end);
        if t1 >= b.time {
            idx += 1;
        }
    }
    Ok(())
}

/// Linear interpolation of the readings between two samples.
fn sample_at(a: &ImuSample, b: &ImuSample, t: f64) -> ImuSample {
    let alpha = ((t - a.time) / (b.time - a.time)).clamp(0.0, 1.0);
    ImuSample {
        time: t,
        gyro: a.gyro.lerp(&b.gyro, alpha),
        accel: a.accel.lerp(&b.accel, alpha),
    }
}
