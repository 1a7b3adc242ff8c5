//! Spinning multi-ring LiDAR synthesis.
//!
//! The sweep is azimuth-major and uniform in time over one scan period:
//! azimuth step `a` of `S` fires at `end_time - duration * (1 - a/S)`, so
//! per-point offsets span `[-duration, 0)` relative to the sweep end. Each
//! step fires every ring from the true sensor pose at that emission time;
//! range noise is added along the beam. Misses (beyond `max_range`) are
//! omitted. Draw order is fixed, so a scan is a pure function of its seed.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::config::Config;
use crate::dataset::{ScanData, ScanPoint};
use crate::geometry::{Pose, Vec3};
use crate::sim::world::PlanarWorld;

#[derive(Debug, Clone)]
pub struct LidarModel {
    pub rings: usize,
    pub vertical_resolution_deg: f64,
    pub horizontal_resolution_deg: f64,
    pub elevation_start_deg: f64,
    pub rate: f64,
    pub range_sigma: f64,
    pub max_range: f64,
}

impl LidarModel {
    pub fn from_config(cfg: &Config) -> LidarModel {
        LidarModel {
            rings: cfg.lidar_rings,
            vertical_resolution_deg: cfg.lidar_vertical_resolution_deg,
            horizontal_resolution_deg: cfg.lidar_horizontal_resolution_deg,
            elevation_start_deg: cfg.lidar_elevation_start_deg,
            rate: cfg.lidar_rate,
            range_sigma: cfg.lidar_range_sigma,
            max_range: cfg.lidar_max_range,
        }
    }

    pub fn duration(&self) -> f64 {
        1.0 / self.rate
    }

    pub fn azimuth_steps(&self) -> usize {
        (360.0 / self.horizontal_resolution_deg).round() as usize
    }

    /// Unit beam direction in the sensor frame.
    pub fn ray_direction(&self, ring: usize, azimuth_rad: f64) -> Vec3 {
        let elevation =
            (self.elevation_start_deg + ring as f64 * self.vertical_resolution_deg).to_radians();
        Vec3::new(
            elevation.cos() * azimuth_rad.cos(),
            elevation.cos() * azimuth_rad.sin(),
            elevation.sin(),
        )
    }
}

/// Simulates one sweep. `body_pose_at` is the true IMU-body pose as a
/// function of time; the sensor pose is `body_pose * extrinsics`.
pub fn sample_scan(
    world: &PlanarWorld,
    body_pose_at: impl Fn(f64) -> Pose,
    extrinsics: &Pose,
    frame_id: u64,
    end_time: f64,
    model: &LidarModel,
    rng: &mut ChaCha8Rng,
) -> ScanData {
    let duration = model.duration();
    let steps = model.azimuth_steps();
    let mut points = Vec::with_capacity(steps * model.rings);
    for a in 0..steps {
        let offset = -duration * (1.0 - a as f64 / steps as f64);
        let t_emit = end_time + offset;
        let sensor_pose = body_pose_at(t_emit).compose(extrinsics);
        let azimuth = (a as f64 * model.horizontal_resolution_deg).to_radians();
        for ring in 0..model.rings {
            let dir_sensor = model.ray_direction(ring, azimuth);
            let dir_global = sensor_pose.rotation.rotate(&dir_sensor);
            if let Some((range, _)) =
                world.cast_ray(&sensor_pose.position, &dir_global, model.max_range)
            {
                let noisy = range + model.range_sigma * rng.sample::<f64, _>(StandardNormal);
                points.push(ScanPoint {
                    offset,
                    position: dir_sensor * noisy,
                });
            }
        }
    }
    ScanData {
        frame_id,
        end_time,
        duration,
        points,
    }
}
