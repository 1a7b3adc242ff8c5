//! On-disk dataset and result formats.
//!
//! A dataset directory contains:
//! - `imu.csv` — header `t,wx,wy,wz,ax,ay,az`, one IMU sample per row;
//! - `scans/NNNN.csv` — one file per LiDAR sweep: a header line
//!   `# scan frame=<id> end_time=<t> duration=<d>`, a column line
//!   `offset,x,y,z`, then one sensor-frame point per row with its emission
//!   offset (seconds, <= 0) relative to the sweep end;
//! - `groundtruth.csv` — header `t,px,py,pz,qw,qx,qy,qz,vx,vy,vz`;
//! - `config.txt` — the generating configuration, echoed.
//!
//! Estimator output is `estimates.csv` (`# trajectory-v1`): per scan the
//! nav state plus the row-major 6x6 pose covariance block (rotation error
//! first, then position). Metrics are `metrics.csv` (`# metrics-v1`) of
//! `metric,value` rows. Floats are written with shortest round-trip
//! formatting, so read(write(x)) is bit-identical.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::Matrix6;
use thiserror::Error;

use crate::geometry::{Pose, Rotation, Vec3};
use crate::imu::ImuSample;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("i/o on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

impl DatasetError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        DatasetError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    fn malformed(path: &Path, line: usize, message: impl Into<String>) -> Self {
        DatasetError::Malformed {
            path: path.to_path_buf(),
            line,
            message: message.into(),
        }
    }
}

/// One LiDAR return in the sensor frame with its emission-time offset
/// (seconds relative to the sweep end, always <= 0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanPoint {
    pub offset: f64,
    pub position: Vec3,
}

/// One LiDAR sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanData {
    pub frame_id: u64,
    /// Sweep end time; the scan's reference timestamp.
    pub end_time: f64,
    pub duration: f64,
    pub points: Vec<ScanPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTruthRecord {
    pub time: f64,
    pub pose: Pose,
    pub velocity: Vec3,
}

/// One estimator output row: nav state and pose covariance at a scan time.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateRecord {
    pub time: f64,
    pub pose: Pose,
    pub velocity: Vec3,
    pub gyro_bias: Vec3,
    pub accel_bias: Vec3,
    /// 6x6 covariance of (rotation error, position error) at this pose.
    pub pose_covariance: Matrix6<f64>,
}

/// A complete simulated dataset in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub imu: Vec<ImuSample>,
    pub scans: Vec<ScanData>,
    pub ground_truth: Vec<GroundTruthRecord>,
}

const IMU_HEADER: &str = "t,wx,wy,wz,ax,ay,az";
const GROUND_TRUTH_HEADER: &str = "t,px,py,pz,qw,qx,qy,qz,vx,vy,vz";
const SCAN_COLUMNS: &str = "offset,x,y,z";
const TRAJECTORY_MAGIC: &str = "# trajectory-v1";
const METRICS_MAGIC: &str = "# metrics-v1";

impl Dataset {
    /// Writes `imu.csv`, `groundtruth.csv`, and `scans/NNNN.csv` under
    /// `dir`, creating directories as needed.
    pub fn save(&self, dir: &Path) -> Result<(), DatasetError> {
        let scans_dir = dir.join("scans");
        std::fs::create_dir_all(&scans_dir).map_err(|e| DatasetError::io(&scans_dir, e))?;
        write_imu(&dir.join("imu.csv"), &self.imu)?;
        write_ground_truth(&dir.join("groundtruth.csv"), &self.ground_truth)?;
        for scan in &self.scans {
            write_scan(&scans_dir.join(format!("{:04}.csv", scan.frame_id)), scan)?;
        }
        Ok(())
    }

    /// Loads a dataset directory; scans are ordered by file name.
    pub fn load(dir: &Path) -> Result<Dataset, DatasetError> {
        let imu = read_imu(&dir.join("imu.csv"))?;
        let ground_truth = read_ground_truth(&dir.join("groundtruth.csv"))?;
        let scans_dir = dir.join("scans");
        let mut names: Vec<PathBuf> = std::fs::read_dir(&scans_dir)
            .map_err(|e| DatasetError::io(&scans_dir, e))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|ext| ext == "csv"))
            .collect();
        names.sort();
        let scans = names
            .iter()
            .map(|p| read_scan(p))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Dataset {
            imu,
            scans,
            ground_truth,
        })
    }
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>, DatasetError> {
    Ok(std::io::BufWriter::new(
        std::fs::File::create(path).map_err(|e| DatasetError::io(path, e))?,
    ))
}

fn read_lines(path: &Path) -> Result<Vec<String>, DatasetError> {
    Ok(std::fs::read_to_string(path)
        .map_err(|e| DatasetError::io(path, e))?
        .lines()
        .map(str::to_string)
        .collect())
}

fn parse_floats(
    path: &Path,
    line_no: usize,
    line: &str,
    expected: usize,
) -> Result<Vec<f64>, DatasetError> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() != expected {
        return Err(DatasetError::malformed(
            path,
            line_no,
            format!("expected {expected} fields, got {}", fields.len()),
        ));
    }
    fields
        .iter()
        .map(|f| {
            f.parse::<f64>().map_err(|e| {
                DatasetError::malformed(path, line_no, format!("bad number '{f}': {e}"))
            })
        })
        .collect()
}

fn rotation_from(
    path: &Path,
    line_no: usize,
    wxyz: &[f64],
) -> Result<Rotation, DatasetError> {
    Rotation::from_wxyz(wxyz[0], wxyz[1], wxyz[2], wxyz[3])
        .map_err(|e| DatasetError::malformed(path, line_no, e.to_string()))
}

pub fn write_imu(path: &Path, samples: &[ImuSample]) -> Result<(), DatasetError> {
    let mut w = create(path)?;
    let io = |e| DatasetError::io(path, e);
    writeln!(w, "{IMU_HEADER}").map_err(io)?;
    for s in samples {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            s.time, s.gyro.x, s.gyro.y, s.gyro.z, s.accel.x, s.accel.y, s.accel.z
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_imu(path: &Path) -> Result<Vec<ImuSample>, DatasetError> {
    let lines = read_lines(path)?;
    if lines.first().map(String::as_str) != Some(IMU_HEADER) {
        return Err(DatasetError::malformed(
            path,
            1,
            format!("expected header '{IMU_HEADER}'"),
        ));
    }
    lines[1..]
        .iter()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let v = parse_floats(path, i + 2, l, 7)?;
            Ok(ImuSample {
                time: v[0],
                gyro: Vec3::new(v[1], v[2], v[3]),
                accel: Vec3::new(v[4], v[5], v[6]),
            })
        })
        .collect()
}

pub fn write_scan(path: &Path, scan: &ScanData) -> Result<(), DatasetError> {
    let mut w = create(path)?;
    let io = |e| DatasetError::io(path, e);
    writeln!(
        w,
        "# scan frame={} end_time={} duration={}",
        scan.frame_id, scan.end_time, scan.duration
    )
    .map_err(io)?;
    writeln!(w, "{SCAN_COLUMNS}").map_err(io)?;
    for p in &scan.points {
        writeln!(
            w,
            "{},{},{},{}",
            p.offset, p.position.x, p.position.y, p.position.z
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_scan(path: &Path) -> Result<ScanData, DatasetError> {
    let lines = read_lines(path)?;
    let header = lines
        .first()
        .ok_or_else(|| DatasetError::malformed(path, 1, "empty scan file"))?;
    let rest = header
        .strip_prefix("# scan ")
        .ok_or_else(|| DatasetError::malformed(path, 1, "expected '# scan ...' header"))?;
    let mut frame_id: Option<u64> = None;
    let mut end_time: Option<f64> = None;
    let mut duration: Option<f64> = None;
    for token in rest.split_whitespace() {
        let (k, v) = token.split_once('=').ok_or_else(|| {
            DatasetError::malformed(path, 1, format!("bad header token '{token}'"))
        })?;
        let bad = |e: String| DatasetError::malformed(path, 1, format!("bad {k}: {e}"));
        match k {
            "frame" => frame_id = Some(v.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?),
            "end_time" => end_time = Some(v.parse().map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?),
            "duration" => duration = Some(v.parse().map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?),
            other => {
                return Err(DatasetError::malformed(
                    path,
                    1,
                    format!("unknown header field '{other}'"),
                ))
            }
        }
    }
    let (frame_id, end_time, duration) = match (frame_id, end_time, duration) {
        (Some(f), Some(e), Some(d)) => (f, e, d),
        _ => {
            return Err(DatasetError::malformed(
                path,
                1,
                "header must contain frame=, end_time=, duration=",
            ))
        }
    };
    if lines.get(1).map(String::as_str) != Some(SCAN_COLUMNS) {
        return Err(DatasetError::malformed(
            path,
            2,
            format!("expected column line '{SCAN_COLUMNS}'"),
        ));
    }
    let points = lines[2..]
        .iter()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let v = parse_floats(path, i + 3, l, 4)?;
            Ok(ScanPoint {
                offset: v[0],
                position: Vec3::new(v[1], v[2], v[3]),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ScanData {
        frame_id,
        end_time,
        duration,
        points,
    })
}

pub fn write_ground_truth(
    path: &Path,
    records: &[GroundTruthRecord],
) -> Result<(), DatasetError> {
    let mut w = create(path)?;
    let io = |e| DatasetError::io(path, e);
    writeln!(w, "{GROUND_TRUTH_HEADER}").map_err(io)?;
    for r in records {
        let q = r.pose.rotation.wxyz();
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.time,
            r.pose.position.x,
            r.pose.position.y,
            r.pose.position.z,
            q[0],
            q[1],
            q[2],
            q[3],
            r.velocity.x,
            r.velocity.y,
            r.velocity.z
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_ground_truth(path: &Path) -> Result<Vec<GroundTruthRecord>, DatasetError> {
    let lines = read_lines(path)?;
    if lines.first().map(String::as_str) != Some(GROUND_TRUTH_HEADER) {
        return Err(DatasetError::malformed(
            path,
            1,
            format!("expected header '{GROUND_TRUTH_HEADER}'"),
        ));
    }
    lines[1..]
        .iter()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let v = parse_floats(path, i + 2, l, 11)?;
            Ok(GroundTruthRecord {
                time: v[0],
                pose: Pose::new(
                    rotation_from(path, i + 2, &v[4..8])?,
                    Vec3::new(v[1], v[2], v[3]),
                ),
                velocity: Vec3::new(v[8], v[9], v[10]),
            })
        })
        .collect()
}

pub fn write_estimates(path: &Path, records: &[EstimateRecord]) -> Result<(), DatasetError> {
    let mut w = create(path)?;
    let io = |e| DatasetError::io(path, e);
    writeln!(w, "{TRAJECTORY_MAGIC}").map_err(io)?;
    let mut header = String::from("t,px,py,pz,qw,qx,qy,qz,vx,vy,vz,bgx,bgy,bgz,bax,bay,baz");
    for r in 0..6 {
        for c in 0..6 {
            header.push_str(&format!(",c{r}{c}"));
        }
    }
    writeln!(w, "{header}").map_err(io)?;
    for r in records {
        let q = r.pose.rotation.wxyz();
        let mut row = format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.time,
            r.pose.position.x,
            r.pose.position.y,
            r.pose.position.z,
            q[0],
            q[1],
            q[2],
            q[3],
            r.velocity.x,
            r.velocity.y,
            r.velocity.z,
            r.gyro_bias.x,
            r.gyro_bias.y,
            r.gyro_bias.z,
            r.accel_bias.x,
            r.accel_bias.y,
            r.accel_bias.z
        );
        for row_i in 0..6 {
            for col in 0..6 {
                row.push_str(&format!(",{}", r.pose_covariance[(row_i, col)]));
            }
        }
        writeln!(w, "{row}").map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_estimates(path: &Path) -> Result<Vec<EstimateRecord>, DatasetError> {
    let lines = read_lines(path)?;
    if lines.first().map(String::as_str) != Some(TRAJECTORY_MAGIC) {
        return Err(DatasetError::malformed(
            path,
            1,
            format!("expected '{TRAJECTORY_MAGIC}'"),
        ));
    }
    lines[2..]
        .iter()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let v = parse_floats(path, i + 3, l, 17 + 36)?;
            let mut cov = Matrix6::zeros();
            for row in 0..6 {
                for col in 0..6 {
                    cov[(row, col)] = v[17 + 6 * row + col];
                }
            }
            Ok(EstimateRecord {
                time: v[0],
                pose: Pose::new(
                    rotation_from(path, i + 3, &v[4..8])?,
                    Vec3::new(v[1], v[2], v[3]),
                ),
                velocity: Vec3::new(v[8], v[9], v[10]),
                gyro_bias: Vec3::new(v[11], v[12], v[13]),
                accel_bias: Vec3::new(v[14], v[15], v[16]),
                pose_covariance: cov,
            })
        })
        .collect()
}

pub fn write_metrics(path: &Path, metrics: &[(String, f64)]) -> Result<(), DatasetError> {
    let mut w = create(path)?;
    let io = |e| DatasetError::io(path, e);
    writeln!(w, "{METRICS_MAGIC}").map_err(io)?;
    writeln!(w, "metric,value").map_err(io)?;
    for (name, value) in metrics {
        writeln!(w, "{name},{value}").map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_metrics(path: &Path) -> Result<Vec<(String, f64)>, DatasetError> {
    let lines = read_lines(path)?;
    if lines.first().map(String::as_str) != Some(METRICS_MAGIC) {
        return Err(DatasetError::malformed(
            path,
            1,
            format!("expected '{METRICS_MAGIC}'"),
        ));
    }
    lines[2..]
        .iter()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let (name, value) = l.split_once(',').ok_or_else(|| {
                DatasetError::malformed(path, i + 3, "expected 'metric,value'")
            })?;
            let value = value.trim().parse::<f64>().map_err(|e| {
                DatasetError::malformed(path, i + 3, format!("bad value: {e}"))
            })?;
            Ok((name.trim().to_string(), value))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::exp_so3;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn awkward_float(rng: &mut ChaCha8Rng) -> f64 {
        // Values whose decimal representation exercises round-trip fidelity.
        rng.gen_range(-1.0..1.0) * 10f64.powi(rng.gen_range(-12..6))
    }

    #[test]
    fn imu_round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(91);
        let samples: Vec<ImuSample> = (0..100)
            .map(|i| ImuSample {
                time: i as f64 * 0.004 + awkward_float(&mut rng).abs() * 1e-15,
                gyro: Vec3::new(
                    awkward_float(&mut rng),
                    awkward_float(&mut rng),
                    awkward_float(&mut rng),
                ),
                accel: Vec3::new(
                    awkward_float(&mut rng),
                    awkward_float(&mut rng),
                    awkward_float(&mut rng),
                ),
            })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("imu.csv");
        write_imu(&path, &samples).unwrap();
        let back = read_imu(&path).unwrap();
        assert_eq!(back, samples);
        assert_eq!(back[5].gyro.x.to_bits(), samples[5].gyro.x.to_bits());
    }

    #[test]
    fn scan_round_trip_preserves_header_and_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(92);
        let scan = ScanData {
            frame_id: 37,
            end_time: 3.8000000000000003,
            duration: 0.1,
            points: (0..50)
                .map(|_| ScanPoint {
                    offset: -rng.gen_range(0.0..0.1),
                    position: Vec3::new(
                        awkward_float(&mut rng),
                        awkward_float(&mut rng),
                        awkward_float(&mut rng),
                    ),
                })
                .collect(),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("0037.csv");
        write_scan(&path, &scan).unwrap();
        assert_eq!(read_scan(&path).unwrap(), scan);

        let empty = ScanData {
            frame_id: 0,
            end_time: 0.1,
            duration: 0.1,
            points: vec![],
        };
        let path = dir.path().join("0000.csv");
        write_scan(&path, &empty).unwrap();
        assert_eq!(read_scan(&path).unwrap(), empty);
    }

    #[test]
    fn ground_truth_and_estimates_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(93);
        let gt: Vec<GroundTruthRecord> = (0..20)
            .map(|i| GroundTruthRecord {
                time: i as f64 * 0.1,
                pose: Pose::new(
                    exp_so3(&Vec3::new(
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                    )),
                    Vec3::new(rng.gen(), rng.gen(), rng.gen()),
                ),
                velocity: Vec3::new(rng.gen(), rng.gen(), rng.gen()),
            })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("groundtruth.csv");
        write_ground_truth(&path, &gt).unwrap();
        assert_eq!(read_ground_truth(&path).unwrap(), gt);

        let estimates: Vec<EstimateRecord> = gt
            .iter()
            .map(|r| EstimateRecord {
                time: r.time,
                pose: r.pose,
                velocity: r.velocity,
                gyro_bias: Vec3::new(awkward_float(&mut rng), rng.gen(), rng.gen()),
                accel_bias: Vec3::new(rng.gen(), awkward_float(&mut rng), rng.gen()),
                pose_covariance: {
                    let m = Matrix6::from_fn(|_, _| rng.gen_range(-1.0..1.0));
                    m * m.transpose()
                },
            })
            .collect();
        let path = dir.path().join("estimates.csv");
        write_estimates(&path, &estimates).unwrap();
        let back = read_estimates(&path).unwrap();
        assert_eq!(back, estimates);
        assert_eq!(
            back[3].pose_covariance[(4, 2)].to_bits(),
            estimates[3].pose_covariance[(4, 2)].to_bits()
        );
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# trajectory-v1\n"));
    }

    #[test]
    fn metrics_round_trip_and_magic_line() {
        let metrics = vec![
            ("ape_translation_percent".to_string(), 0.123456789),
            ("nees_pose".to_string(), 6.000000001),
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("metrics.csv");
        write_metrics(&path, &metrics).unwrap();
        assert_eq!(read_metrics(&path).unwrap(), metrics);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# metrics-v1\nmetric,value\n"));
    }

    #[test]
    fn malformed_rows_report_path_and_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("imu.csv");
        std::fs::write(&path, "t,wx,wy,wz,ax,ay,az\n0,0,0,0,0,0,0\n1,2,3\n").unwrap();
        match read_imu(&path) {
            Err(DatasetError::Malformed { line, message, .. }) => {
                assert_eq!(line, 3);
                assert!(message.contains("expected 7 fields"));
            }
            other => panic!("expected malformed error, got {other:?}"),
        }
        let missing = dir.path().join("nope.csv");
        match read_imu(&missing) {
            Err(DatasetError::Io { path, .. }) => assert!(path.ends_with("nope.csv")),
            other => panic!("expected io error, got {other:?}"),
        }
        let scan_path = dir.path().join("bad_scan.csv");
        std::fs::write(&scan_path, "# scan frame=1 end_time=0.1\noffset,x,y,z\n").unwrap();
        match read_scan(&scan_path) {
            Err(DatasetError::Malformed { line: 1, message, .. }) => {
                assert!(message.contains("duration"));
            }
            other => panic!("expected malformed header error, got {other:?}"),
        }
    }

    #[test]
    fn dataset_save_load_round_trips_in_frame_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(94);
        let dataset = Dataset {
            imu: (0..30)
                .map(|i| ImuSample {
                    time: i as f64 * 0.004,
                    gyro: Vec3::new(rng.gen(), rng.gen(), rng.gen()),
                    accel: Vec3::new(rng.gen(), rng.gen(), rng.gen()),
                })
                .collect(),
            scans: (0..12)
                .map(|k| ScanData {
                    frame_id: k,
                    end_time: 0.1 * (k + 1) as f64,
                    duration: 0.1,
                    points: (0..5)
                        .map(|_| ScanPoint {
                            offset: -rng.gen_range(0.0..0.1),
                            position: Vec3::new(rng.gen(), rng.gen(), rng.gen()),
                        })
                        .collect(),
                })
                .collect(),
            ground_truth: (0..30)
                .map(|i| GroundTruthRecord {
                    time: i as f64 * 0.004,
                    pose: Pose::identity(),
                    velocity: Vec3::zeros(),
                })
                .collect(),
        };
        let dir = tempfile::tempdir().unwrap();
        dataset.save(dir.path()).unwrap();
        let back = Dataset::load(dir.path()).unwrap();
        assert_eq!(back, dataset);
        // 12 scans means 0000.csv .. 0011.csv exist and sort correctly.
        assert!(dir.path().join("scans/0011.csv").exists());
    }
}
