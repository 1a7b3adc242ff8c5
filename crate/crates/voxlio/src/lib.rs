//! Map-free sliding-window LiDAR-inertial odometry.
//!
//! The estimator keeps a FIFO window of cloned IMU poses. Each incoming scan
//! is motion-compensated, the window's points are pooled into a spatial-hash
//! voxel grid with octree refinement, planes are fit per voxel from additive
//! point-cluster statistics, and each frame's point set on a plane is
//! compressed losslessly into a four-dimensional cluster measurement before a
//! null-space projection removes the plane error and an information-form EKF
//! update corrects the window. No persistent map is maintained.
//!
//! Crate layout:
//!
//! * [`geometry`] - rotations, poses, homogeneous transforms.
//! * [`state`] - sliding-window state, cloning, marginalization.
//! * [`imu`] - strapdown propagation and error-state transition.
//! * [`voxel`] - voxelization, point clusters, plane fitting.
//! * [`compress`] - cluster factorization and plane-measurement compression.
//! * [`update`] - measurement stacking, null-space projection, EKF update.
//! * [`pipeline`] - the per-scan odometry loop.
//! * [`sim`] - planar-world simulator and Monte Carlo harness.
//! * [`eval`] - trajectory error and consistency metrics.
//! * [`config`] / [`dataset`] - run configuration and on-disk formats.

pub mod compress;
pub mod config;
pub mod dataset;
pub mod eval;
pub mod geometry;
pub mod imu;
pub mod linalg;
pub mod pipeline;
pub mod sim;
pub mod state;
pub mod update;
pub mod voxel;
