//! Line-oriented `key = value` configuration for the estimator and the
//! synthetic-world generator.
//!
//! The format is diff-friendly plain text: one key per line, `#` comments,
//! blank lines ignored. Unknown keys, duplicate keys, and malformed values
//! are errors carrying the offending line number. Writing a config and
//! reading it back reproduces the exact values (floats are printed with
//! Rust's shortest round-trip formatting). Keys missing from a file keep
//! their defaults, so partial configs are valid.
//!
//! All noise values are continuous-time densities in SI units: white-noise
//! densities in (unit)/sqrt(Hz), random-walk densities in (unit)*sqrt(Hz);
//! the IMU synthesis and the filter discretize them by the sample interval.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::geometry::{GeometryError, Pose, Rotation, Vec3};
use crate::imu::ImuNoiseParams;
use crate::update::{GatingMode, MeasurementMode};
use crate::voxel::VoxelizationParams;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: expected 'key = value', got '{text}'")]
    MalformedLine {
        path: PathBuf,
        line: usize,
        text: String,
    },
    #[error("{path}:{line}: unknown key '{key}'")]
    UnknownKey {
        path: PathBuf,
        line: usize,
        key: String,
    },
    #[error("{path}:{line}: duplicate key '{key}'")]
    DuplicateKey {
        path: PathBuf,
        line: usize,
        key: String,
    },
    #[error("{path}:{line}: invalid value for '{key}': {message}")]
    InvalidValue {
        path: PathBuf,
        line: usize,
        key: String,
        message: String,
    },
    #[error("invalid configuration: {0}")]
    OutOfRange(String),
    #[error("invalid extrinsic rotation: {0}")]
    Extrinsics(#[from] GeometryError),
}

/// How worker threads are used; serial mode must be bit-identical to
/// parallel mode, so this only changes scheduling, never results.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Threading {
    Serial,
    Parallel,
}

/// Full pipeline + simulation configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    // Estimator.
    pub voxel_resolution: f64,
    pub max_octree_depth: u8,
    pub planarity_ratio: f64,
    pub min_points_per_fit: usize,
    pub window_size: usize,
    pub measurement_sigma: f64,
    /// Per-scan coherent covariance increments, in radians about the two
    /// horizontal axes and meters along each axis, modeling the slow
    /// world-frame registration random walk that window overlap leaves in
    /// consecutive scans and the white row-noise model cannot express.
    pub tilt_drift_sigma: f64,
    pub translation_drift_sigma: f64,
    pub min_observations: usize,
    pub measurement_mode: MeasurementMode,
    pub threading: Threading,
    pub gating_enabled: bool,
    pub gating_confidence: f64,
    pub gravity: f64,
    // IMU model.
    pub imu_rate: f64,
    pub gyro_noise_density: f64,
    pub accel_noise_density: f64,
    pub gyro_walk_density: f64,
    pub accel_walk_density: f64,
    pub init_gyro_bias_magnitude: f64,
    pub init_accel_bias_magnitude: f64,
    // LiDAR-to-IMU extrinsics (identity by default).
    pub extrinsic_rotation: [f64; 4],
    pub extrinsic_translation: [f64; 3],
    // Initial state prior variances.
    pub init_attitude_prior: f64,
    pub init_position_prior: f64,
    pub init_velocity_prior: f64,
    // Simulated world and sensors.
    pub room_size: [f64; 3],
    pub trajectory_length: f64,
    pub trajectory_speed: f64,
    pub lidar_rings: usize,
    pub lidar_vertical_resolution_deg: f64,
    pub lidar_horizontal_resolution_deg: f64,
    pub lidar_elevation_start_deg: f64,
    pub lidar_rate: f64,
    pub lidar_range_sigma: f64,
    pub lidar_max_range: f64,
    pub seed: u64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            voxel_resolution: 3.0,
            max_octree_depth: 3,
            planarity_ratio: 0.01,
            min_points_per_fit: 10,
            window_size: 10,
            measurement_sigma: 0.03,
            tilt_drift_sigma: 1e-3,
            translation_drift_sigma: 2e-3,
            min_observations: 1,
            measurement_mode: MeasurementMode::Cluster,
            threading: Threading::Parallel,
            gating_enabled: false,
            gating_confidence: 0.95,
            gravity: 9.81,
            imu_rate: 250.0,
            gyro_noise_density: 0.005,
            accel_noise_density: 0.01,
            gyro_walk_density: 4e-6,
            accel_walk_density: 2e-4,
            init_gyro_bias_magnitude: 0.01,
            init_accel_bias_magnitude: 0.1,
            extrinsic_rotation: [1.0, 0.0, 0.0, 0.0],
            extrinsic_translation: [0.0, 0.0, 0.0],
            init_attitude_prior: 1e-4,
            init_position_prior: 1e-4,
            init_velocity_prior: 1e-2,
            room_size: [20.0, 15.0, 5.0],
            trajectory_length: 182.0,
            trajectory_speed: 1.5,
            lidar_rings: 8,
            lidar_vertical_resolution_deg: 3.0,
            lidar_horizontal_resolution_deg: 0.25,
            lidar_elevation_start_deg: -22.5,
            lidar_rate: 10.0,
            lidar_range_sigma: 0.03,
            lidar_max_range: 50.0,
            seed: 42,
        }
    }
}

impl Config {
    /// Zeroes every stochastic input: sensor noises, bias walks, and
    /// initial bias draws. Ground truth and geometry are unchanged.
    pub fn noise_free(mut self) -> Self {
        self.gyro_noise_density = 0.0;
        self.accel_noise_density = 0.0;
        self.gyro_walk_density = 0.0;
        self.accel_walk_density = 0.0;
        self.init_gyro_bias_magnitude = 0.0;
        self.init_accel_bias_magnitude = 0.0;
        self.lidar_range_sigma = 0.0;
        self.tilt_drift_sigma = 0.0;
        self.translation_drift_sigma = 0.0;
        self
    }

    pub fn imu_noise(&self) -> ImuNoiseParams {
        ImuNoiseParams {
            gyro_noise: self.gyro_noise_density,
            accel_noise: self.accel_noise_density,
            gyro_walk: self.gyro_walk_density,
            accel_walk: self.accel_walk_density,
            gravity: self.gravity,
        }
    }

    pub fn voxelization(&self) -> VoxelizationParams {
        VoxelizationParams {
            resolution: self.voxel_resolution,
            max_depth: self.max_octree_depth,
            min_points: self.min_points_per_fit,
            planarity_ratio: self.planarity_ratio,
            keep_points: self.measurement_mode == MeasurementMode::PerPoint,
            parallel: self.threading == Threading::Parallel,
        }
    }

    pub fn gating(&self) -> GatingMode {
        if self.gating_enabled {
            GatingMode::Chi2 {
                confidence: self.gating_confidence,
            }
        } else {
            GatingMode::Off
        }
    }

    /// LiDAR pose in the IMU frame.
    pub fn extrinsics(&self) -> Result<Pose, ConfigError> {
        let [w, x, y, z] = self.extrinsic_rotation;
        let rotation = Rotation::from_wxyz(w, x, y, z)?;
        let [tx, ty, tz] = self.extrinsic_translation;
        Ok(Pose::new(rotation, Vec3::new(tx, ty, tz)))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let check = |ok: bool, msg: &str| -> Result<(), ConfigError> {
            if ok {
                Ok(())
            } else {
                Err(ConfigError::OutOfRange(msg.to_string()))
            }
        };
        check(self.voxel_resolution > 0.0, "voxel_resolution must be > 0")?;
        check(self.max_octree_depth <= 8, "max_octree_depth must be <= 8")?;
        check(
            self.planarity_ratio > 0.0 && self.planarity_ratio < 1.0,
            "planarity_ratio must be in (0, 1)",
        )?;
        check(self.min_points_per_fit >= 3, "min_points_per_fit must be >= 3")?;
        check(self.window_size >= 2, "window_size must be >= 2")?;
        check(self.measurement_sigma > 0.0, "measurement_sigma must be > 0")?;
        check(
            self.tilt_drift_sigma >= 0.0 && self.translation_drift_sigma >= 0.0,
            "drift sigmas must be >= 0",
        )?;
        check(self.min_observations >= 1, "min_observations must be >= 1")?;
        check(
            self.gating_confidence > 0.0 && self.gating_confidence < 1.0,
            "gating_confidence must be in (0, 1)",
        )?;
        check(self.gravity > 0.0, "gravity must be > 0")?;
        check(self.imu_rate > 0.0, "imu_rate must be > 0")?;
        check(
            self.gyro_noise_density >= 0.0
                && self.accel_noise_density >= 0.0
                && self.gyro_walk_density >= 0.0
                && self.accel_walk_density >= 0.0
                && self.init_gyro_bias_magnitude >= 0.0
                && self.init_accel_bias_magnitude >= 0.0,
            "noise densities and bias magnitudes must be >= 0",
        )?;
        check(
            self.init_attitude_prior > 0.0
                && self.init_position_prior > 0.0
                && self.init_velocity_prior > 0.0,
            "initial prior variances must be > 0",
        )?;
        check(
            self.room_size.iter().all(|&s| s > 1.0),
            "room_size components must be > 1 m",
        )?;
        check(self.trajectory_length > 0.0, "trajectory_length must be > 0")?;
        check(self.trajectory_speed > 0.0, "trajectory_speed must be > 0")?;
        check(self.lidar_rings >= 1, "lidar_rings must be >= 1")?;
        check(
            self.lidar_horizontal_resolution_deg > 0.0
                && self.lidar_vertical_resolution_deg > 0.0,
            "lidar resolutions must be > 0",
        )?;
        check(self.lidar_rate > 0.0, "lidar_rate must be > 0")?;
        check(self.lidar_range_sigma >= 0.0, "lidar_range_sigma must be >= 0")?;
        check(self.lidar_max_range > 0.0, "lidar_max_range must be > 0")?;
        self.extrinsics()?;
        Ok(())
    }

    /// Serializes every key; parsing the output reproduces `self` exactly.
    pub fn to_file_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# odometry + simulation configuration");
        let _ = writeln!(s, "voxel_resolution = {}", self.voxel_resolution);
        let _ = writeln!(s, "max_octree_depth = {}", self.max_octree_depth);
        let _ = writeln!(s, "planarity_ratio = {}", self.planarity_ratio);
        let _ = writeln!(s, "min_points_per_fit = {}", self.min_points_per_fit);
        let _ = writeln!(s, "window_size = {}", self.window_size);
        let _ = writeln!(s, "measurement_sigma = {}", self.measurement_sigma);
        let _ = writeln!(s, "tilt_drift_sigma = {}", self.tilt_drift_sigma);
        let _ = writeln!(
            s,
            "translation_drift_sigma = {}",
            self.translation_drift_sigma
        );
        let _ = writeln!(s, "min_observations = {}", self.min_observations);
        let _ = writeln!(
            s,
            "measurement_mode = {}",
            match self.measurement_mode {
                MeasurementMode::Cluster => "cluster",
                MeasurementMode::PerPoint => "point",
            }
        );
        let _ = writeln!(
            s,
            "threading = {}",
            match self.threading {
                Threading::Serial => "serial",
                Threading::Parallel => "parallel",
            }
        );
        let _ = writeln!(s, "gating_enabled = {}", self.gating_enabled);
        let _ = writeln!(s, "gating_confidence = {}", self.gating_confidence);
        let _ = writeln!(s, "gravity = {}", self.gravity);
        let _ = writeln!(s, "imu_rate = {}", self.imu_rate);
        let _ = writeln!(s, "gyro_noise_density = {}", self.gyro_noise_density);
        let _ = writeln!(s, "accel_noise_density = {}", self.accel_noise_density);
        let _ = writeln!(s, "gyro_walk_density = {}", self.gyro_walk_density);
        let _ = writeln!(s, "accel_walk_density = {}", self.accel_walk_density);
        let _ = writeln!(
            s,
            "init_gyro_bias_magnitude = {}",
            self.init_gyro_bias_magnitude
        );
        let _ = writeln!(
            s,
            "init_accel_bias_magnitude = {}",
            self.init_accel_bias_magnitude
        );
        let _ = writeln!(
            s,
            "extrinsic_rotation = {} {} {} {}",
            self.extrinsic_rotation[0],
            self.extrinsic_rotation[1],
            self.extrinsic_rotation[2],
            self.extrinsic_rotation[3]
        );
        let _ = writeln!(
            s,
            "extrinsic_translation = {} {} {}",
            self.extrinsic_translation[0],
            self.extrinsic_translation[1],
            self.extrinsic_translation[2]
        );
        let _ = writeln!(s, "init_attitude_prior = {}", self.init_attitude_prior);
        let _ = writeln!(s, "init_position_prior = {}", self.init_position_prior);
        let _ = writeln!(s, "init_velocity_prior = {}", self.init_velocity_prior);
        let _ = writeln!(
            s,
            "room_size = {} {} {}",
            self.room_size[0], self.room_size[1], self.room_size[2]
        );
        let _ = writeln!(s, "trajectory_length = {}", self.trajectory_length);
        let _ = writeln!(s, "trajectory_speed = {}", self.trajectory_speed);
        let _ = writeln!(s, "lidar_rings = {}", self.lidar_rings);
        let _ = writeln!(
            s,
            "lidar_vertical_resolution_deg = {}",
            self.lidar_vertical_resolution_deg
        );
        let _ = writeln!(
            s,
            "lidar_horizontal_resolution_deg = {}",
            self.lidar_horizontal_resolution_deg
        );
        let _ = writeln!(
            s,
            "lidar_elevation_start_deg = {}",
            self.lidar_elevation_start_deg
        );
        let _ = writeln!(s, "lidar_rate = {}", self.lidar_rate);
        let _ = writeln!(s, "lidar_range_sigma = {}", self.lidar_range_sigma);
        let _ = writeln!(s, "lidar_max_range = {}", self.lidar_max_range);
        let _ = writeln!(s, "seed = {}", self.seed);
        s
    }

    pub fn to_file(&self, path: &Path) -> Result<(), ConfigError> {
        std::fs::write(path, self.to_file_string()).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn from_file(path: &Path) -> Result<Config, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path)
    }

    /// Parses config text; `path` is only used in error messages.
    pub fn parse(text: &str, path: &Path) -> Result<Config, ConfigError> {
        let mut cfg = Config::default();
        let mut seen: HashSet<String> = HashSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| {
                ConfigError::MalformedLine {
                    path: path.to_path_buf(),
                    line,
                    text: raw.to_string(),
                }
            })?;
            let key = key.trim();
            let value = value.trim();
            if !seen.insert(key.to_string()) {
                return Err(ConfigError::DuplicateKey {
                    path: path.to_path_buf(),
                    line,
                    key: key.to_string(),
                });
            }
            let invalid = |message: String| ConfigError::InvalidValue {
                path: path.to_path_buf(),
                line,
                key: key.to_string(),
                message,
            };
            let f64_of = |v: &str| v.parse::<f64>().map_err(|e| invalid(e.to_string()));
            let usize_of = |v: &str| v.parse::<usize>().map_err(|e| invalid(e.to_string()));
            match key {
                "voxel_resolution" => cfg.voxel_resolution = f64_of(value)?,
                "max_octree_depth" => {
                    cfg.max_octree_depth =
                        value.parse::<u8>().map_err(|e| invalid(e.to_string()))?
                }
                "planarity_ratio" => cfg.planarity_ratio = f64_of(value)?,
                "min_points_per_fit" => cfg.min_points_per_fit = usize_of(value)?,
                "window_size" => cfg.window_size = usize_of(value)?,
                "measurement_sigma" => cfg.measurement_sigma = f64_of(value)?,
                "tilt_drift_sigma" => cfg.tilt_drift_sigma = f64_of(value)?,
                "translation_drift_sigma" => cfg.translation_drift_sigma = f64_of(value)?,
                "min_observations" => cfg.min_observations = usize_of(value)?,
                "measurement_mode" => {
                    cfg.measurement_mode = match value {
                        "cluster" => MeasurementMode::Cluster,
                        "point" => MeasurementMode::PerPoint,
                        other => return Err(invalid(format!(
                            "expected 'cluster' or 'point', got '{other}'"
                        ))),
                    }
                }
                "threading" => {
                    cfg.threading = match value {
                        "serial" => Threading::Serial,
                        "parallel" => Threading::Parallel,
                        other => return Err(invalid(format!(
                            "expected 'serial' or 'parallel', got '{other}'"
                        ))),
                    }
                }
                "gating_enabled" => {
                    cfg.gating_enabled =
                        value.parse::<bool>().map_err(|e| invalid(e.to_string()))?
                }
                "gating_confidence" => cfg.gating_confidence = f64_of(value)?,
                "gravity" => cfg.gravity = f64_of(value)?,
                "imu_rate" => cfg.imu_rate = f64_of(value)?,
                "gyro_noise_density" => cfg.gyro_noise_density = f64_of(value)?,
                "accel_noise_density" => cfg.accel_noise_density = f64_of(value)?,
                "gyro_walk_density" => cfg.gyro_walk_density = f64_of(value)?,
                "accel_walk_density" => cfg.accel_walk_density = f64_of(value)?,
                "init_gyro_bias_magnitude" => cfg.init_gyro_bias_magnitude = f64_of(value)?,
                "init_accel_bias_magnitude" => cfg.init_accel_bias_magnitude = f64_of(value)?,
                "extrinsic_rotation" => {
                    cfg.extrinsic_rotation = parse_array::<4>(value).map_err(invalid)?
                }
                "extrinsic_translation" => {
                    cfg.extrinsic_translation = parse_array::<3>(value).map_err(invalid)?
                }
                "init_attitude_prior" => cfg.init_attitude_prior = f64_of(value)?,
                "init_position_prior" => cfg.init_position_prior = f64_of(value)?,
                "init_velocity_prior" => cfg.init_velocity_prior = f64_of(value)?,
                "room_size" => cfg.room_size = parse_array::<3>(value).map_err(invalid)?,
                "trajectory_length" => cfg.trajectory_length = f64_of(value)?,
                "trajectory_speed" => cfg.trajectory_speed = f64_of(value)?,
                "lidar_rings" => cfg.lidar_rings = usize_of(value)?,
                "lidar_vertical_resolution_deg" => {
                    cfg.lidar_vertical_resolution_deg = f64_of(value)?
                }
                "lidar_horizontal_resolution_deg" => {
                    cfg.lidar_horizontal_resolution_deg = f64_of(value)?
                }
                "lidar_elevation_start_deg" => cfg.lidar_elevation_start_deg = f64_of(value)?,
                "lidar_rate" => cfg.lidar_rate = f64_of(value)?,
                "lidar_range_sigma" => cfg.lidar_range_sigma = f64_of(value)?,
                "lidar_max_range" => cfg.lidar_max_range = f64_of(value)?,
                "seed" => cfg.seed = value.parse::<u64>().map_err(|e| invalid(e.to_string()))?,
                _ => {
                    return Err(ConfigError::UnknownKey {
                        path: path.to_path_buf(),
                        line,
                        key: key.to_string(),
                    })
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_array<const N: usize>(value: &str) -> Result<[f64; N], String> {
    let parts: Vec<&str> = value.split_whitespace().collect();
    if parts.len() != N {
        return Err(format!("expected {N} numbers, got {}", parts.len()));
    }
    let mut out = [0.0; N];
    for (i, p) in parts.iter().enumerate() {
        out[i] = p.parse::<f64>().map_err(|e| e.to_string())?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid_and_round_trips_losslessly() {
        let cfg = Config::default();
        cfg.validate().unwrap();
        let text = cfg.to_file_string();
        let parsed = Config::parse(&text, Path::new("mem")).unwrap();
        assert_eq!(parsed, cfg);
    }

    #[test]
    fn mutated_config_round_trips_exact_floats() {
        let cfg = Config {
            voxel_resolution: 2.718281828459045,
            measurement_sigma: 0.030000000000000002,
            trajectory_length: 181.99999999999997,
            measurement_mode: MeasurementMode::PerPoint,
            threading: Threading::Serial,
            gating_enabled: true,
            extrinsic_rotation: [0.9689124217106447, 0.0, 0.0, 0.247403959254523],
            extrinsic_translation: [0.1, -0.2, 0.05],
            seed: u64::MAX,
            ..Config::default()
        };
        let parsed = Config::parse(&cfg.to_file_string(), Path::new("mem")).unwrap();
        assert_eq!(parsed, cfg);
        assert_eq!(parsed.voxel_resolution.to_bits(), cfg.voxel_resolution.to_bits());
        assert_eq!(
            parsed.trajectory_length.to_bits(),
            cfg.trajectory_length.to_bits()
        );
    }

    #[test]
    fn partial_config_keeps_defaults_and_comments_are_ignored() {
        let text = "# comment only\n\nwindow_size = 4  # trailing comment\nseed = 7\n";
        let cfg = Config::parse(text, Path::new("mem")).unwrap();
        assert_eq!(cfg.window_size, 4);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.voxel_resolution, Config::default().voxel_resolution);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = Config::parse("window_size = 4\nbogus_key = 1\n", Path::new("mem"));
        match err {
            Err(ConfigError::UnknownKey { line, key, .. }) => {
                assert_eq!(line, 2);
                assert_eq!(key, "bogus_key");
            }
            other => panic!("expected unknown-key error, got {other:?}"),
        }
        let err = Config::parse("seed = 1\nseed = 2\n", Path::new("mem"));
        match err {
            Err(ConfigError::DuplicateKey { line, key, .. }) => {
                assert_eq!(line, 2);
                assert_eq!(key, "seed");
            }
            other => panic!("expected duplicate-key error, got {other:?}"),
        }
        let err = Config::parse("no equals sign here\n", Path::new("mem"));
        assert!(matches!(err, Err(ConfigError::MalformedLine { line: 1, .. })));
        let err = Config::parse("gravity = down\n", Path::new("mem"));
        match err {
            Err(ConfigError::InvalidValue { line, key, .. }) => {
                assert_eq!(line, 1);
                assert_eq!(key, "gravity");
            }
            other => panic!("expected invalid-value error, got {other:?}"),
        }
    }

    #[test]
    fn out_of_range_values_are_rejected() {
        for bad in [
            "voxel_resolution = 0",
            "planarity_ratio = 1.5",
            "window_size = 1",
            "measurement_sigma = -0.1",
            "room_size = 0.5 15 5",
            "extrinsic_rotation = 1 1 1 1",
        ] {
            let err = Config::parse(bad, Path::new("mem"));
            assert!(err.is_err(), "'{bad}' should fail validation");
        }
    }

    #[test]
    fn noise_free_zeroes_all_stochastic_inputs() {
        let cfg = Config::default().noise_free();
        assert_eq!(cfg.gyro_noise_density, 0.0);
        assert_eq!(cfg.accel_noise_density, 0.0);
        assert_eq!(cfg.gyro_walk_density, 0.0);
        assert_eq!(cfg.accel_walk_density, 0.0);
        assert_eq!(cfg.init_gyro_bias_magnitude, 0.0);
        assert_eq!(cfg.init_accel_bias_magnitude, 0.0);
        assert_eq!(cfg.lidar_range_sigma, 0.0);
        assert_eq!(cfg.tilt_drift_sigma, 0.0);
        assert_eq!(cfg.translation_drift_sigma, 0.0);
        assert_eq!(cfg.trajectory_length, 182.0, "geometry must be unchanged");
    }

    #[test]
    fn derived_parameter_views_match_fields() {
        let cfg = Config::default();
        let noise = cfg.imu_noise();
        assert_eq!(noise.gyro_noise, 0.005);
        assert_eq!(noise.gravity_vector(), Vec3::new(0.0, 0.0, -9.81));
        let vox = cfg.voxelization();
        assert_eq!(vox.resolution, 3.0);
        assert!(!vox.keep_points, "cluster mode needs no raw points");
        assert_eq!(cfg.gating(), GatingMode::Off);
        let point_cfg = Config {
            measurement_mode: MeasurementMode::PerPoint,
            gating_enabled: true,
            ..cfg
        };
        assert!(point_cfg.voxelization().keep_points);
        assert_eq!(
            point_cfg.gating(),
            GatingMode::Chi2 { confidence: 0.95 }
        );
        assert_eq!(point_cfg.extrinsics().unwrap(), Pose::identity());
    }
}
