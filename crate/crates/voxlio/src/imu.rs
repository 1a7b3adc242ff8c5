//! Strapdown IMU propagation of the navigation state and its error
//! covariance.
//!
//! One propagation step treats the bias-corrected sample `(w, a)` as constant
//! over `dt` and integrates with the rotation midpoint:
//!
//! ```text
//! R+ = R * exp(skew(w dt))
//! f  = R * exp(skew(w dt/2)) * a + g          (g = -gravity * e_z)
//! v+ = v + f dt
//! p+ = p + v dt + f dt^2 / 2
//! ```
//!
//! The transition matrix returned by [`imu_transition_and_noise`] is the
//! exact Jacobian of this discrete step in the `(dtheta, dp, dv, dbg, dba)`
//! error coordinates with right-multiplicative orientation errors, so a
//! central-difference probe of the step reproduces it to first order in the
//! probe width.

use nalgebra::SMatrix;
use thiserror::Error;

use crate::geometry::{exp_so3, skew, so3_right_jacobian, Vec3};
use crate::state::{
    ImuNavState, Matrix15, IMU_ERR_ACCEL_BIAS, IMU_ERR_GYRO_BIAS, IMU_ERR_POS, IMU_ERR_THETA,
    IMU_ERR_VEL,
};
use nalgebra::DMatrix;

/// Longest accepted propagation step, in seconds.
pub const MAX_STEP: f64 = 0.1;

#[derive(Debug, Error)]
pub enum ImuError {
    #[error("propagation step {dt} s outside (0, {MAX_STEP}]")]
    InvalidTimeStep { dt: f64 },
    #[error("non-finite IMU sample")]
    NonFiniteSample,
    #[error("covariance dimension {dim} is smaller than the IMU block")]
    CovarianceTooSmall { dim: usize },
}

/// One gyroscope + accelerometer sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImuSample {
    pub time: f64,
    /// Angular rate, rad/s, body frame.
    pub gyro: Vec3,
    /// Specific force, m/s^2, body frame.
    pub accel: Vec3,
}

impl ImuSample {
    pub fn is_finite(&self) -> bool {
        self.time.is_finite()
            && self.gyro.iter().all(|v| v.is_finite())
            && self.accel.iter().all(|v| v.is_finite())
    }

    /// Component-wise average of two samples; used to form the effective
    /// constant sample over an interval from its endpoint readings.
    pub fn midpoint(&self, other: &ImuSample) -> ImuSample {
        ImuSample {
            time: 0.5 * (self.time + other.time),
            gyro: 0.5 * (self.gyro + other.gyro),
            accel: 0.5 * (self.accel + other.accel),
        }
    }
}

/// Continuous-time noise densities of the inertial sensor plus gravity.
///
/// White-noise densities have units `unit/sqrt(Hz)`; random-walk densities
/// `unit*sqrt(Hz)`. Discretization over a step `dt` scales the variances by
/// `1/dt` and `dt` respectively.
#[derive(Debug, Clone, Copy)]
pub struct ImuNoiseParams {
    pub gyro_noise: f64,
    pub accel_noise: f64,
    pub gyro_walk: f64,
    pub accel_walk: f64,
    pub gravity: f64,
}

impl Default for ImuNoiseParams {
    fn default() -> Self {
        ImuNoiseParams {
            gyro_noise: 5e-3,
            accel_noise: 1e-2,
            gyro_walk: 4e-6,
            accel_walk: 2e-4,
            gravity: 9.81,
        }
    }
}

impl ImuNoiseParams {
    pub fn gravity_vector(&self) -> Vec3 {
        Vec3::new(0.0, 0.0, -self.gravity)
    }
}

/// Propagates the navigation mean over `dt` with a constant sample.
pub fn propagate_mean(
    nav: &ImuNavState,
    sample: &ImuSample,
    noise: &ImuNoiseParams,
    dt: f64,
) -> Result<ImuNavState, ImuError> {
    if !(dt > 0.0 && dt <= MAX_STEP) {
        return Err(ImuError::InvalidTimeStep { dt });
    }
    if !sample.is_finite() {
        return Err(ImuError::NonFiniteSample);
    }
    let w = sample.gyro - nav.gyro_bias;
    let a = sample.accel - nav.accel_bias;
    let half_step = exp_so3(&(w * (0.5 * dt)));
    let full_step = exp_so3(&(w * dt));
    let r_mid = nav.orientation.compose(&half_step);
    let f = r_mid.rotate(&a) + noise.gravity_vector();
    Ok(ImuNavState {
        position: nav.position + nav.velocity * dt + f * (0.5 * dt * dt),
        orientation: nav.orientation.compose(&full_step),
        velocity: nav.velocity + f * dt,
        gyro_bias: nav.gyro_bias,
        accel_bias: nav.accel_bias,
    })
}

/// Error-state transition matrix and process noise for one step.
///
/// Row/column order follows the IMU error block layout
/// `(dtheta, dp, dv, dbg, dba)`. The noise is assembled as
/// `Q = G diag(sigma^2) G^T dt` from the continuous densities, which makes it
/// symmetric PSD by construction and exactly zero when all densities vanish.
pub fn imu_transition_and_noise(
    nav: &ImuNavState,
    sample: &ImuSample,
    noise: &ImuNoiseParams,
    dt: f64,
) -> (Matrix15, Matrix15) {
    let w = sample.gyro - nav.gyro_bias;
    let a = sample.accel - nav.accel_bias;
    let r_hat = nav.orientation.matrix();
    let full_step = exp_so3(&(w * dt)).matrix();
    let half_step = exp_so3(&(w * (0.5 * dt))).matrix();
    let r_mid = r_hat * half_step;
    let jr_full = so3_right_jacobian(&(w * dt));
    let jr_half = so3_right_jacobian(&(w * (0.5 * dt)));
    let m = half_step * a; // midpoint specific force in the start body frame

    let mut phi = Matrix15::identity();
    let set = |phi: &mut Matrix15, r: usize, c: usize, block: &nalgebra::Matrix3<f64>| {
        phi.fixed_view_mut::<3, 3>(r, c).copy_from(block);
    };

    // Orientation rows.
    set(&mut phi, IMU_ERR_THETA, IMU_ERR_THETA, &full_step.transpose());
    set(
        &mut phi,
        IMU_ERR_THETA,
        IMU_ERR_GYRO_BIAS,
        &(-jr_full * dt),
    );
    // Velocity rows.
    let dv_dtheta = -(r_hat * skew(&m)) * dt;
    let dv_dbg = r_hat * half_step * skew(&a) * jr_half * (0.5 * dt * dt);
    let dv_dba = -r_mid * dt;
    set(&mut phi, IMU_ERR_VEL, IMU_ERR_THETA, &dv_dtheta);
    set(&mut phi, IMU_ERR_VEL, IMU_ERR_GYRO_BIAS, &dv_dbg);
    set(&mut phi, IMU_ERR_VEL, IMU_ERR_ACCEL_BIAS, &dv_dba);
    // Position rows.
    set(&mut phi, IMU_ERR_POS, IMU_ERR_THETA, &(dv_dtheta * (0.5 * dt)));
    set(
        &mut phi,
        IMU_ERR_POS,
        IMU_ERR_VEL,
        &(nalgebra::Matrix3::identity() * dt),
    );
    set(&mut phi, IMU_ERR_POS, IMU_ERR_GYRO_BIAS, &(dv_dbg * (0.5 * dt)));
    set(&mut phi, IMU_ERR_POS, IMU_ERR_ACCEL_BIAS, &(dv_dba * (0.5 * dt)));

    // Noise input matrix; columns ordered (n_g, n_a, n_wg, n_wa).
    let mut g = SMatrix::<f64, 15, 12>::zeros();
    g.fixed_view_mut::<3, 3>(IMU_ERR_THETA, 0)
        .copy_from(&(-nalgebra::Matrix3::identity()));
    g.fixed_view_mut::<3, 3>(IMU_ERR_POS, 3)
        .copy_from(&(-r_mid * (0.5 * dt)));
    g.fixed_view_mut::<3, 3>(IMU_ERR_VEL, 3).copy_from(&(-r_mid));
    g.fixed_view_mut::<3, 3>(IMU_ERR_GYRO_BIAS, 6)
        .copy_from(&nalgebra::Matrix3::identity());
    g.fixed_view_mut::<3, 3>(IMU_ERR_ACCEL_BIAS, 9)
        .copy_from(&nalgebra::Matrix3::identity());

    let mut sigma = SMatrix::<f64, 12, 12>::zeros();
    for k in 0..3 {
        sigma[(k, k)] = noise.gyro_noise * noise.gyro_noise;
        sigma[(3 + k, 3 + k)] = noise.accel_noise * noise.accel_noise;
        sigma[(6 + k, 6 + k)] = noise.gyro_walk * noise.gyro_walk;
        sigma[(9 + k, 9 + k)] = noise.accel_walk * noise.accel_walk;
    }
    let mut q = g * sigma * g.transpose() * dt;
    // Force exact symmetry against rounding in the triple product.
    q = 0.5 * (q + q.transpose());

    (phi, q)
}

/// Propagates a joint sliding-window covariance whose trailing 15 rows and
/// columns are the IMU error block. Clone blocks are untouched; cross blocks
/// rotate by `phi`; the IMU block picks up `q`.
pub fn propagate_covariance(
    cov: &DMatrix<f64>,
    phi: &Matrix15,
    q: &Matrix15,
) -> Result<DMatrix<f64>, ImuError> {
    let dim = cov.nrows();
    if dim < 15 || cov.ncols() != dim {
        return Err(ImuError::CovarianceTooSmall { dim });
    }
    let nc = dim - 15;
    let mut out = cov.clone();
    // IMU block: Phi P Phi^T + Q.
    let p_ii = cov.view((nc, nc), (15, 15));
    let new_ii = phi * p_ii * phi.transpose() + q;
    out.view_mut((nc, nc), (15, 15)).copy_from(&new_ii);
    // Cross blocks: P_cI Phi^T and its transpose.
    if nc > 0 {
        let p_ci = cov.view((0, nc), (nc, 15));
        let new_ci = p_ci * phi.transpose();
        out.view_mut((0, nc), (nc, 15)).copy_from(&new_ci);
        out.view_mut((nc, 0), (15, nc)).copy_from(&new_ci.transpose());
    }
    crate::linalg::symmetrize(&mut out);
    Ok(out)
}
