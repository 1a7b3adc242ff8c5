//! Smooth closed-loop reference trajectory with analytic derivatives.
//!
//! Position follows a horizontal ellipse centered in the room with a
//! sinusoidal height wiggle, traversed at constant parameter rate for a
//! configurable number of loops; heading is a yaw sinusoid. Everything the
//! sensors need — velocity, acceleration, body angular rate — is available
//! in closed form, so the IMU synthesis is exact.

use crate::geometry::{Pose, Rotation, Vec3};

/// Fraction of the room half-extent left as clearance around the ellipse.
const WALL_CLEARANCE: f64 = 0.3;
/// Height wiggle amplitude (m), clipped to the available head-room.
const HEIGHT_AMPLITUDE: f64 = 1.0;
/// Yaw sinusoid amplitude (rad) and full periods over the run.
const YAW_AMPLITUDE: f64 = std::f64::consts::PI;
const YAW_CYCLES: f64 = 3.0;

#[derive(Debug, Clone)]
pub struct TrajectorySpec {
    center: Vec3,
    radius_x: f64,
    radius_y: f64,
    z_amp: f64,
    /// Loop parameter rate (rad/s): theta = rate * t.
    theta_rate: f64,
    duration: f64,
    length: f64,
}

impl TrajectorySpec {
    /// A closed loop inside the given room, sized so the total path length
    /// matches `target_length` at the given average speed.
    pub fn closed_loop(room: [f64; 3], target_length: f64, speed: f64) -> TrajectorySpec {
        let center = Vec3::new(room[0] / 2.0, room[1] / 2.0, room[2] / 2.0);
        let radius_x = room[0] / 2.0 * (1.0 - WALL_CLEARANCE);
        let radius_y = room[1] / 2.0 * (1.0 - WALL_CLEARANCE);
        let z_amp = HEIGHT_AMPLITUDE.min(room[2] / 2.0 * (1.0 - WALL_CLEARANCE));
        let duration = target_length / speed;
        // Arc length per quadrature step of |dp/dtheta| over one loop. The
        // path density varies around the loop, so the swept angle for a
        // given length comes from inverting the cumulative arc length, not
        // from assuming proportionality.
        let steps = 20_000;
        let dtheta = std::f64::consts::TAU / steps as f64;
        let segments: Vec<f64> = (0..steps)
            .map(|i| {
                let theta = (i as f64 + 0.5) * dtheta;
                let dx = -radius_x * theta.sin();
                let dy = radius_y * theta.cos();
                let dz = 2.0 * z_amp * (2.0 * theta).cos();
                (dx * dx + dy * dy + dz * dz).sqrt() * dtheta
            })
            .collect();
        let one_loop: f64 = segments.iter().sum();
        let full_loops = (target_length / one_loop).floor();
        let mut remainder = target_length - full_loops * one_loop;
        let mut theta_rem = std::f64::consts::TAU;
        for (i, &s) in segments.iter().enumerate() {
            if remainder <= s {
                theta_rem = (i as f64 + remainder / s) * dtheta;
                break;
            }
            remainder -= s;
        }
        let theta_rate = (full_loops * std::f64::consts::TAU + theta_rem) / duration;
        TrajectorySpec {
            center,
            radius_x,
            radius_y,
            z_amp,
            theta_rate,
            duration,
            length: target_length,
        }
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    fn theta(&self, t: f64) -> f64 {
        self.theta_rate * t
    }

    fn yaw(&self, t: f64) -> f64 {
        YAW_AMPLITUDE * (std::f64::consts::TAU * YAW_CYCLES * t / self.duration).sin()
    }

    fn yaw_rate(&self, t: f64) -> f64 {
        let w = std::f64::consts::TAU * YAW_CYCLES / self.duration;
        YAW_AMPLITUDE * w * (w * t).cos()
    }

    pub fn position(&self, t: f64) -> Vec3 {
        let th = self.theta(t);
        self.center
            + Vec3::new(
                self.radius_x * th.cos(),
                self.radius_y * th.sin(),
                self.z_amp * (2.0 * th).sin(),
            )
    }

    pub fn velocity(&self, t: f64) -> Vec3 {
        let th = self.theta(t);
        Vec3::new(
            -self.radius_x * th.sin(),
            self.radius_y * th.cos(),
            2.0 * self.z_amp * (2.0 * th).cos(),
        ) * self.theta_rate
    }

    pub fn acceleration(&self, t: f64) -> Vec3 {
        let th = self.theta(t);
        Vec3::new(
            -self.radius_x * th.cos(),
            -self.radius_y * th.sin(),
            -4.0 * self.z_amp * (2.0 * th).sin(),
        ) * self.theta_rate
            * self.theta_rate
    }

    pub fn pose(&self, t: f64) -> Pose {
        Pose::new(Rotation::from_yaw(self.yaw(t)), self.position(t))
    }

    /// Body-frame angular rate; for a yaw-only attitude the body and
    /// global z axes coincide, so this is `(0, 0, yaw_rate)`.
    pub fn body_angular_rate(&self, t: f64) -> Vec3 {
        Vec3::new(0.0, 0.0, self.yaw_rate(t))
    }
}
