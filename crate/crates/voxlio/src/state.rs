//! Sliding-window filter state: a FIFO of cloned IMU poses plus the current
//! inertial navigation block, with one joint error covariance.
//!
//! Error-state layout (dimension `6n + 15` for `n` clones):
//!
//! ```text
//! [ dtheta_0 dp_0 | dtheta_1 dp_1 | ... | dtheta_I dp_I dv db_g db_a ]
//!    clone 0 (6)     clone 1 (6)          IMU block (15, last)
//! ```
//!
//! Each pose error is ordered `(dtheta, dp)` and orientation errors attach on
//! the right: `R = R_hat * exp(skew(dtheta))`. Cloning duplicates the IMU
//! pose error into a new trailing clone slot; marginalization removes the
//! oldest clone's rows and columns.

use nalgebra::{DMatrix, DVector, Matrix6, SMatrix};
use std::ops::Range;
use thiserror::Error;

use crate::geometry::{exp_so3, Pose, Rotation, Vec3};

pub const CLONE_ERROR_DIM: usize = 6;
pub const IMU_ERROR_DIM: usize = 15;

/// Offsets of the sub-errors inside the 15-dimensional IMU error block.
pub const IMU_ERR_THETA: usize = 0;
pub const IMU_ERR_POS: usize = 3;
pub const IMU_ERR_VEL: usize = 6;
pub const IMU_ERR_GYRO_BIAS: usize = 9;
pub const IMU_ERR_ACCEL_BIAS: usize = 12;

pub type Matrix15 = SMatrix<f64, 15, 15>;

#[derive(Debug, Error)]
pub enum StateError {
    #[error("clone timestamp {new} is not after the newest clone {newest}")]
    NonMonotonicCloneTime { new: f64, newest: f64 },
    #[error("cannot marginalize: the clone window is empty")]
    EmptyWindow,
    #[error("correction dimension {got} does not match state dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite value in state update")]
    NonFinite,
}

/// Full inertial navigation state (pose, velocity, sensor biases).
#[derive(Debug, Clone, Copy)]
pub struct ImuNavState {
    pub position: Vec3,
    pub orientation: Rotation,
    pub velocity: Vec3,
    pub gyro_bias: Vec3,
    pub accel_bias: Vec3,
}

impl ImuNavState {
    pub fn identity() -> Self {
        ImuNavState {
            position: Vec3::zeros(),
            orientation: Rotation::identity(),
            velocity: Vec3::zeros(),
            gyro_bias: Vec3::zeros(),
            accel_bias: Vec3::zeros(),
        }
    }

    pub fn pose(&self) -> Pose {
        Pose::new(self.orientation, self.position)
    }
}

/// A cloned pose snapshot kept in the sliding window.
#[derive(Debug, Clone, Copy)]
pub struct CloneState {
    pub timestamp: f64,
    pub pose: Pose,
}

/// Identifies which pose block of the error state a measurement refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoseAnchor {
    /// A cloned pose, by window position (0 = oldest).
    Clone(usize),
    /// The current IMU pose block.
    Nav,
}

/// Column bookkeeping for the error state; cheap to copy around measurement
/// construction code without borrowing the full state.
#[derive(Debug, Clone, Copy)]
pub struct StateLayout {
    pub n_clones: usize,
}

impl StateLayout {
    pub fn error_dim(&self) -> usize {
        CLONE_ERROR_DIM * self.n_clones + IMU_ERROR_DIM
    }

    pub fn clone_cols(&self, index: usize) -> Range<usize> {
        let start = CLONE_ERROR_DIM * index;
        start..start + CLONE_ERROR_DIM
    }

    pub fn imu_cols(&self) -> Range<usize> {
        let start = CLONE_ERROR_DIM * self.n_clones;
        start..start + IMU_ERROR_DIM
    }

    /// Columns of the 6-dimensional `(dtheta, dp)` error of an anchored pose.
    pub fn pose_cols(&self, anchor: PoseAnchor) -> Range<usize> {
        match anchor {
            PoseAnchor::Clone(i) => {
                debug_assert!(i < self.n_clones);
                self.clone_cols(i)
            }
            PoseAnchor::Nav => {
                let start = self.imu_cols().start;
                start..start + CLONE_ERROR_DIM
            }
        }
    }
}

/// Sliding-window state with joint covariance.
#[derive(Debug, Clone)]
pub struct FilterState {
    nav: ImuNavState,
    nav_time: f64,
    clones: Vec<CloneState>,
    cov: DMatrix<f64>,
}

impl FilterState {
    /// Starts a window-less state from a navigation prior.
    pub fn new(nav: ImuNavState, time: f64, prior: &Matrix15) -> Self {
        let mut cov = DMatrix::zeros(IMU_ERROR_DIM, IMU_ERROR_DIM);
        cov.copy_from(prior);
        FilterState {
            nav,
            nav_time: time,
            clones: Vec::new(),
            cov,
        }
    }

    pub fn layout(&self) -> StateLayout {
        StateLayout {
            n_clones: self.clones.len(),
        }
    }

    pub fn error_dim(&self) -> usize {
        self.layout().error_dim()
    }

    pub fn nav(&self) -> &ImuNavState {
        &self.nav
    }

    pub fn nav_time(&self) -> f64 {
        self.nav_time
    }

    pub fn clones(&self) -> &[CloneState] {
        &self.clones
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Direct access for the propagation and update routines.
    pub fn set_nav(&mut self, nav: ImuNavState, time: f64) {
        self.nav = nav;
        self.nav_time = time;
    }

    pub fn set_covariance(&mut self, cov: DMatrix<f64>) -> Result<(), StateError> {
        if cov.nrows() != self.error_dim() || cov.ncols() != self.error_dim() {
            return Err(StateError::DimensionMismatch {
                expected: self.error_dim(),
                got: cov.nrows(),
            });
        }
        self.cov = cov;
        Ok(())
    }

    /// Pose of an anchor in the current estimate.
    pub fn anchor_pose(&self, anchor: PoseAnchor) -> Pose {
        match anchor {
            PoseAnchor::Clone(i) => self.clones[i].pose,
            PoseAnchor::Nav => self.nav.pose(),
        }
    }

    /// The 6x6 `(dtheta, dp)` covariance block of an anchored pose.
    pub fn pose_covariance(&self, anchor: PoseAnchor) -> Matrix6<f64> {
        let cols = self.layout().pose_cols(anchor);
        let mut out = Matrix6::zeros();
        out.copy_from(&self.cov.view((cols.start, cols.start), (6, 6)));
        out
    }

    /// Appends a clone of the current IMU pose at `timestamp`.
    ///
    /// The covariance grows by six rows and columns; the new block and its
    /// cross-covariances duplicate the IMU pose block exactly, which makes the
    /// joint covariance singular until fresh process noise is mixed in.
    pub fn augment_clone(&mut self, timestamp: f64) -> Result<(), StateError> {
        if let Some(last) = self.clones.last() {
            if timestamp <= last.timestamp {
                return Err(StateError::NonMonotonicCloneTime {
                    new: timestamp,
                    newest: last.timestamp,
                });
            }
        }
        let n = self.clones.len();
        let old_dim = self.error_dim();
        let new_dim = old_dim + CLONE_ERROR_DIM;
        let clone_start = CLONE_ERROR_DIM * n; // new clone slot
        let imu_old = CLONE_ERROR_DIM * n; // IMU block position before growth

        // Index map from old covariance to the grown one: clone rows stay,
        // the IMU block shifts down by one clone slot.
        let remap = |i: usize| if i < imu_old { i } else { i + CLONE_ERROR_DIM };

        let mut grown = DMatrix::zeros(new_dim, new_dim);
        for i in 0..old_dim {
            for j in 0..old_dim {
                grown[(remap(i), remap(j))] = self.cov[(i, j)];
            }
        }
        // New clone duplicates the IMU pose error (rows imu_old..imu_old+6).
        for a in 0..CLONE_ERROR_DIM {
            let src_row = imu_old + a;
            for j in 0..old_dim {
                grown[(clone_start + a, remap(j))] = self.cov[(src_row, j)];
                grown[(remap(j), clone_start + a)] = self.cov[(j, src_row)];
            }
            for b in 0..CLONE_ERROR_DIM {
                grown[(clone_start + a, clone_start + b)] =
                    self.cov[(imu_old + a, imu_old + b)];
            }
        }

        self.cov = grown;
        self.clones.push(CloneState {
            timestamp,
            pose: self.nav.pose(),
        });
        Ok(())
    }

    /// Removes the oldest clone and its covariance rows/columns.
    pub fn marginalize_oldest(&mut self) -> Result<CloneState, StateError> {
        if self.clones.is_empty() {
            return Err(StateError::EmptyWindow);
        }
        let removed = self.clones.remove(0);
        let old_dim = self.cov.nrows();
        let new_dim = old_dim - CLONE_ERROR_DIM;
        let mut shrunk = DMatrix::zeros(new_dim, new_dim);
        for i in 0..new_dim {
            for j in 0..new_dim {
                shrunk[(i, j)] = self.cov[(i + CLONE_ERROR_DIM, j + CLONE_ERROR_DIM)];
            }
        }
        self.cov = shrunk;
        Ok(removed)
    }

    /// Applies an error-state correction `dx` with the right-multiplicative
    /// retraction on each orientation.
    pub fn apply_correction(&mut self, dx: &DVector<f64>) -> Result<(), StateError> {
        let dim = self.error_dim();
        if dx.len() != dim {
            return Err(StateError::DimensionMismatch {
                expected: dim,
                got: dx.len(),
            });
        }
        if dx.iter().any(|v| !v.is_finite()) {
            return Err(StateError::NonFinite);
        }
        for (i, clone) in self.clones.iter_mut().enumerate() {
            let o = CLONE_ERROR_DIM * i;
            let dtheta = Vec3::new(dx[o], dx[o + 1], dx[o + 2]);
            let dp = Vec3::new(dx[o + 3], dx[o + 4], dx[o + 5]);
            clone.pose.rotation = clone.pose.rotation.compose(&exp_so3(&dtheta));
            clone.pose.position += dp;
        }
        let o = CLONE_ERROR_DIM * self.clones.len();
        let dtheta = Vec3::new(dx[o], dx[o + 1], dx[o + 2]);
        self.nav.orientation = self.nav.orientation.compose(&exp_so3(&dtheta));
        self.nav.position += Vec3::new(dx[o + 3], dx[o + 4], dx[o + 5]);
        self.nav.velocity += Vec3::new(dx[o + 6], dx[o + 7], dx[o + 8]);
        self.nav.gyro_bias += Vec3::new(dx[o + 9], dx[o + 10], dx[o + 11]);
        self.nav.accel_bias += Vec3::new(dx[o + 12], dx[o + 13], dx[o + 14]);
        Ok(())
    }

    /// Audit helper: worst covariance asymmetry.
    pub fn covariance_asymmetry(&self) -> f64 {
        crate::linalg::max_asymmetry(&self.cov)
    }

    /// One CSV snapshot row: time, pose quaternion (w-first), velocity,
    /// biases, and the IMU-block covariance diagonal.
    pub fn snapshot_row(&self) -> String {
        let q = self.nav.orientation.wxyz();
        let p = self.nav.position;
        let v = self.nav.velocity;
        let bg = self.nav.gyro_bias;
        let ba = self.nav.accel_bias;
        let imu = self.layout().imu_cols().start;
        let mut row = format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.nav_time,
            p.x, p.y, p.z,
            q[0], q[1], q[2], q[3],
            v.x, v.y, v.z,
            bg.x, bg.y, bg.z,
            ba.x, ba.y, ba.z
        );
        for k in 0..IMU_ERROR_DIM {
            row.push(',');
            row.push_str(&format!("{}", self.cov[(imu + k, imu + k)]));
        }
        row
    }

    /// Header matching [`FilterState::snapshot_row`].
    pub fn snapshot_header() -> &'static str {
        "t,px,py,pz,qw,qx,qy,qz,vx,vy,vz,bgx,bgy,bgz,bax,bay,baz,\
         c0,c1,c2,c3,c4,c5,c6,c7,c8,c9,c10,c11,c12,c13,c14"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::log_so3;
    use approx::assert_relative_eq;
    use nalgebra::Cholesky;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_psd(rng: &mut ChaCha8Rng, dim: usize) -> DMatrix<f64> {
        let a = DMatrix::from_fn(dim, dim, |_, _| rng.gen_range(-1.0..1.0));
        &a * a.transpose() + DMatrix::identity(dim, dim) * 0.1
    }

    fn random_state(rng: &mut ChaCha8Rng, n_clones: usize) -> FilterState {
        let nav = ImuNavState {
            position: Vec3::new(rng.gen(), rng.gen(), rng.gen()),
            orientation: exp_so3(&Vec3::new(rng.gen(), rng.gen(), rng.gen())),
            velocity: Vec3::new(rng.gen(), rng.gen(), rng.gen()),
            gyro_bias: Vec3::zeros(),
            accel_bias: Vec3::zeros(),
        };
        let mut state = FilterState::new(nav, 0.0, &Matrix15::identity());
        for k in 0..n_clones {
            state.augment_clone(k as f64 + 1.0).unwrap();
            // Mix the covariance so clones decorrelate like after propagation.
            let dim = state.error_dim();
            state.set_covariance(random_psd(rng, dim)).unwrap();
        }
        state
    }

    #[test]
    fn layout_offsets() {
        let layout = StateLayout { n_clones: 3 };
        assert_eq!(layout.error_dim(), 33);
        assert_eq!(layout.clone_cols(0), 0..6);
        assert_eq!(layout.clone_cols(2), 12..18);
        assert_eq!(layout.imu_cols(), 18..33);
        assert_eq!(layout.pose_cols(PoseAnchor::Nav), 18..24);
        assert_eq!(layout.pose_cols(PoseAnchor::Clone(1)), 6..12);
    }

    #[test]
    fn augment_duplicates_imu_pose_covariance_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut state = random_state(&mut rng, 1);
        let before = state.covariance().clone();
        let layout = state.layout();
        let imu = layout.imu_cols().start;
        state.augment_clone(10.0).unwrap();
        let after = state.covariance();
        let new_layout = state.layout();
        let nc = new_layout.clone_cols(1).start; // the new clone slot
        let imu_new = new_layout.imu_cols().start;
        for a in 0..6 {
            for b in 0..6 {
                // clone-clone block equals old IMU pose block
                assert_eq!(after[(nc + a, nc + b)], before[(imu + a, imu + b)]);
                // clone-IMU cross block equals old IMU pose rows
                assert_eq!(after[(nc + a, imu_new + b)], before[(imu + a, imu + b)]);
            }
            // cross-covariance against the surviving clone is copied through
            for j in 0..6 {
                assert_eq!(after[(nc + a, j)], before[(imu + a, j)]);
            }
        }
        assert_eq!(state.clones().len(), 2);
        assert_eq!(state.error_dim(), 27);
    }

    #[test]
    fn augment_then_marginalize_is_identity_on_empty_window() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let mut state = random_state(&mut rng, 0);
        let cov_before = state.covariance().clone();
        let nav_before = *state.nav();
        state.augment_clone(5.0).unwrap();
        state.marginalize_oldest().unwrap();
        assert_eq!(state.clones().len(), 0);
        assert_eq!(state.covariance(), &cov_before);
        assert_eq!(state.nav().position, nav_before.position);
        assert_eq!(
            state.nav().orientation.wxyz(),
            nav_before.orientation.wxyz()
        );
    }

    #[test]
    fn marginalize_removes_leading_rows_and_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let mut state = random_state(&mut rng, 2);
        let before = state.covariance().clone();
        let removed = state.marginalize_oldest().unwrap();
        assert_eq!(removed.timestamp, 1.0);
        let after = state.covariance();
        assert_eq!(after.nrows(), before.nrows() - 6);
        for i in 0..after.nrows() {
            for j in 0..after.ncols() {
                assert_eq!(after[(i, j)], before[(i + 6, j + 6)]);
            }
        }
    }

    #[test]
    fn marginalizing_empty_window_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        let mut state = random_state(&mut rng, 0);
        assert!(matches!(
            state.marginalize_oldest(),
            Err(StateError::EmptyWindow)
        ));
    }

    #[test]
    fn clone_timestamps_must_increase() {
        let mut rng = ChaCha8Rng::seed_from_u64(35);
        let mut state = random_state(&mut rng, 1);
        assert!(matches!(
            state.augment_clone(0.5),
            Err(StateError::NonMonotonicCloneTime { .. })
        ));
    }

    #[test]
    fn nees_of_surviving_substate_is_unchanged_by_marginalization() {
        let mut rng = ChaCha8Rng::seed_from_u64(36);
        for _ in 0..20 {
            let state = random_state(&mut rng, 3);
            let dim = state.error_dim();
            let err = DVector::from_fn(dim, |_, _| rng.gen_range(-1.0_f64..1.0));
            // NEES of the sub-state that survives marginalization, computed
            // from the full covariance by extracting the marginal block.
            let sub = state.covariance().view((6, 6), (dim - 6, dim - 6)).into_owned();
            let sub_err = err.rows(6, dim - 6).into_owned();
            let before = sub_err.transpose()
                * Cholesky::new(sub.clone()).unwrap().solve(&sub_err);

            let mut marginalized = state.clone();
            marginalized.marginalize_oldest().unwrap();
            let after_cov = marginalized.covariance().clone();
            let after = sub_err.transpose()
                * Cholesky::new(after_cov).unwrap().solve(&sub_err);
            assert_relative_eq!(before[(0, 0)], after[(0, 0)], max_relative = 1e-12);
        }
    }

    #[test]
    fn correction_retraction_is_first_order_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for _ in 0..50 {
            let mut state = random_state(&mut rng, 1);
            let before = *state.nav();
            let dim = state.error_dim();
            let mut dx = DVector::zeros(dim);
            let dtheta = Vec3::new(
                rng.gen_range(-1e-3..1e-3),
                rng.gen_range(-1e-3..1e-3),
                rng.gen_range(-1e-3..1e-3),
            );
            let imu = state.layout().imu_cols().start;
            for k in 0..3 {
                dx[imu + k] = dtheta[k];
            }
            dx[imu + 3] = 0.25;
            state.apply_correction(&dx).unwrap();
            // Recovered rotation error must equal the applied one well inside
            // a |dtheta|^2 bound.
            let recovered = log_so3(
                &before
                    .orientation
                    .inverse()
                    .compose(&state.nav().orientation),
            );
            assert!(
                (recovered - dtheta).norm() <= dtheta.norm_squared() + 1e-15,
                "retraction error {}",
                (recovered - dtheta).norm()
            );
            assert_relative_eq!(
                state.nav().position.x,
                before.position.x + 0.25,
                epsilon = 1e-15
            );
        }
    }

    #[test]
    fn correction_dimension_is_checked() {
        let mut rng = ChaCha8Rng::seed_from_u64(38);
        let mut state = random_state(&mut rng, 1);
        let dx = DVector::zeros(7);
        assert!(matches!(
            state.apply_correction(&dx),
            Err(StateError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn snapshot_row_roundtrips_through_text() {
        let mut rng = ChaCha8Rng::seed_from_u64(39);
        let state = random_state(&mut rng, 2);
        let row = state.snapshot_row();
        let fields: Vec<f64> = row.split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(fields.len(), 17 + 15);
        assert_eq!(fields[0], state.nav_time());
        assert_eq!(fields[1], state.nav().position.x);
        let q = state.nav().orientation.wxyz();
        for k in 0..4 {
            assert_eq!(fields[4 + k], q[k]);
        }
        let imu = state.layout().imu_cols().start;
        for k in 0..15 {
            assert_eq!(fields[17 + k], state.covariance()[(imu + k, imu + k)]);
        }
    }
}
