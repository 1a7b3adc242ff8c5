//! Synthetic dataset generation: world, trajectory, and sensor synthesis.
//!
//! Everything is a pure function of `(config, seed)`. One master seed fans
//! out into independent ChaCha streams: stream 0 draws the true initial
//! biases, stream 1 drives the IMU noise, and stream `2 + k` drives scan
//! `k` — so any scan can be generated on demand, in any order, without
//! generating the others.

pub mod lidar;
pub mod trajectory;
pub mod world;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::config::{Config, ConfigError};
use crate::dataset::{Dataset, GroundTruthRecord, ScanData};
use crate::geometry::{Pose, Rotation, Vec3};
use crate::imu::ImuSample;
use lidar::LidarModel;
use trajectory::TrajectorySpec;
use world::PlanarWorld;

const STREAM_BIAS: u64 = 0;
const STREAM_IMU: u64 = 1;
const STREAM_SCAN_BASE: u64 = 2;

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn standard_normal_vec3(rng: &mut ChaCha8Rng) -> Vec3 {
    Vec3::new(
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
    )
}

/// Uniform random direction scaled to the given magnitude.
fn random_bias(rng: &mut ChaCha8Rng, magnitude: f64) -> Vec3 {
    if magnitude == 0.0 {
        return Vec3::zeros();
    }
    loop {
        let v = standard_normal_vec3(rng);
        let n = v.norm();
        if n > 1e-6 {
            return v * (magnitude / n);
        }
    }
}

/// Noise-free IMU measurement model: the gyro reads the body rate plus
/// bias; the accelerometer reads the specific force `R^T (a + g e_z)` plus
/// bias, so hovering reads `(0, 0, +g)`.
pub fn imu_measurement(
    rotation: &Rotation,
    accel_world: &Vec3,
    omega_body: &Vec3,
    gyro_bias: &Vec3,
    accel_bias: &Vec3,
    gravity: f64,
) -> (Vec3, Vec3) {
    let specific_force = accel_world + Vec3::new(0.0, 0.0, gravity);
    (
        omega_body + gyro_bias,
        rotation.rotate_transposed(&specific_force) + accel_bias,
    )
}

/// The true (simulated) sensor imperfections behind one run.
#[derive(Debug, Clone, Copy)]
pub struct TrueBiases {
    pub gyro: Vec3,
    pub accel: Vec3,
}

/// A full simulated run: IMU stream and ground truth in memory, scans
/// generated lazily per frame.
pub struct Simulation {
    pub trajectory: TrajectorySpec,
    pub world: PlanarWorld,
    pub model: LidarModel,
    pub extrinsics: Pose,
    pub imu: Vec<ImuSample>,
    pub ground_truth: Vec<GroundTruthRecord>,
    pub initial_biases: TrueBiases,
    seed: u64,
    scan_count: usize,
}

impl Simulation {
    pub fn new(cfg: &Config, seed: u64) -> Result<Simulation, ConfigError> {
        cfg.validate()?;
        let trajectory =
            TrajectorySpec::closed_loop(cfg.room_size, cfg.trajectory_length, cfg.trajectory_speed);
        let world = PlanarWorld::room(cfg.room_size);
        let model = LidarModel::from_config(cfg);
        let extrinsics = cfg.extrinsics()?;

        let mut bias_rng = stream_rng(seed, STREAM_BIAS);
        let initial_biases = TrueBiases {
            gyro: random_bias(&mut bias_rng, cfg.init_gyro_bias_magnitude),
            accel: random_bias(&mut bias_rng, cfg.init_accel_bias_magnitude),
        };

        let duration = trajectory.duration();
        let dt = 1.0 / cfg.imu_rate;
        let n_samples = (duration * cfg.imu_rate).floor() as usize;
        let sqrt_dt = dt.sqrt();
        let mut imu = Vec::with_capacity(n_samples + 1);
        let mut ground_truth = Vec::with_capacity(n_samples + 1);
        let mut rng = stream_rng(seed, STREAM_IMU);
        let mut gyro_bias = initial_biases.gyro;
        let mut accel_bias = initial_biases.accel;
        for k in 0..=n_samples {
            let t = k as f64 * dt;
            let pose = trajectory.pose(t);
            let (omega_true, accel_true) = (
                trajectory.body_angular_rate(t),
                trajectory.acceleration(t),
            );
            let (mut gyro, mut accel) = imu_measurement(
                &pose.rotation,
                &accel_true,
                &omega_true,
                &gyro_bias,
                &accel_bias,
                cfg.gravity,
            );
            gyro += standard_normal_vec3(&mut rng) * (cfg.gyro_noise_density / sqrt_dt);
            accel += standard_normal_vec3(&mut rng) * (cfg.accel_noise_density / sqrt_dt);
            imu.push(ImuSample { time: t, gyro, accel });
            ground_truth.push(GroundTruthRecord {
                time: t,
                pose,
                velocity: trajectory.velocity(t),
            });
            gyro_bias += standard_normal_vec3(&mut rng) * (cfg.gyro_walk_density * sqrt_dt);
            accel_bias += standard_normal_vec3(&mut rng) * (cfg.accel_walk_density * sqrt_dt);
        }

        let scan_dt = model.duration();
        let last_imu_time = imu.last().map(|s| s.time).unwrap_or(0.0);
        let scan_count = (last_imu_time / scan_dt).floor() as usize;

        Ok(Simulation {
            trajectory,
            world,
            model,
            extrinsics,
            imu,
            ground_truth,
            initial_biases,
            seed,
            scan_count,
        })
    }

    pub fn scan_count(&self) -> usize {
        self.scan_count
    }

    /// Generates scan `k` (ending at `(k + 1) / rate`); a pure function of
    /// `(config, seed, k)`.
    pub fn scan(&self, k: usize) -> ScanData {
        assert!(k < self.scan_count, "scan index {k} out of range");
        let end_time = (k as f64 + 1.0) * self.model.duration();
        let mut rng = stream_rng(self.seed, STREAM_SCAN_BASE + k as u64);
        lidar::sample_scan(
            &self.world,
            |t| self.trajectory.pose(t),
            &self.extrinsics,
            k as u64,
            end_time,
            &self.model,
            &mut rng,
        )
    }

    /// Materializes every scan (for writing a dataset to disk).
    pub fn collect_dataset(&self) -> Dataset {
        Dataset {
            imu: self.imu.clone(),
            scans: (0..self.scan_count).map(|k| self.scan(k)).collect(),
            ground_truth: self.ground_truth.clone(),
        }
    }
}
