//! End-to-end runs of the full estimator on short simulated datasets:
//! convergence, mode equivalence, determinism, and skip handling.

use std::sync::OnceLock;

use voxlio::config::{Config, Threading};
use voxlio::dataset::Dataset;
use voxlio::eval::{compute_ape, compute_nees, trajectory_length, Alignment};
use voxlio::pipeline::{run_odometry, run_on_dataset, OdometryResult};
use voxlio::sim::Simulation;
use voxlio::update::MeasurementMode;

/// Short world shared by every test in this binary: a 20 m loop with a
/// coarser azimuth grid so each run takes a couple of seconds.
fn short_config() -> Config {
    Config {
        trajectory_length: 20.0,
        lidar_horizontal_resolution_deg: 1.0,
        ..Config::default()
    }
}

fn noise_free_fixture() -> &'static (Simulation, OdometryResult) {
    static FIXTURE: OnceLock<(Simulation, OdometryResult)> = OnceLock::new();
    FIXTURE.get_or_init(|| {
        let cfg = short_config().noise_free();
        let sim = Simulation::new(&cfg, 7).expect("simulation must build");
        let init = sim.ground_truth[0];
        let scans = (0..sim.scan_count()).map(|k| sim.scan(k));
        let result = run_odometry(&sim.imu, scans, &init, &cfg).expect("noise-free run");
        (sim, result)
    })
}

fn noisy_dataset() -> &'static Dataset {
    static FIXTURE: OnceLock<Dataset> = OnceLock::new();
    FIXTURE.get_or_init(|| {
        Simulation::new(&short_config(), 7)
            .expect("simulation must build")
            .collect_dataset()
    })
}

#[test]
fn noise_free_run_tracks_the_trajectory() {
    let (sim, result) = noise_free_fixture();
    assert_eq!(result.estimates.len(), sim.scan_count());
    let last = result.estimates.last().unwrap();
    let true_end = sim.trajectory.position(last.time);
    let final_error = (last.pose.position - true_end).norm();
    assert!(
        final_error < 0.05,
        "final position error {final_error} m on a noise-free run"
    );
    let length = trajectory_length(&sim.ground_truth);
    let ape = compute_ape(
        &result.estimates,
        &sim.ground_truth,
        length,
        Alignment::None,
    )
    .unwrap();
    assert!(
        ape.translation_percent < 0.01,
        "noise-free translation APE {} %",
        ape.translation_percent
    );
}

#[test]
fn cluster_measurement_dimensions_never_depend_on_point_count() {
    let (_, result) = noise_free_fixture();
    let mut measured_frames = 0;
    for log in &result.logs {
        assert!(!log.skipped_missing_imu);
        // Four rows per plane-frame pair before projection, three fewer
        // per plane after projecting the plane error out.
        assert_eq!(log.rows_pre_projection, 4 * log.plane_observations);
        assert_eq!(
            log.rows_post_projection,
            log.rows_pre_projection - 3 * log.planes_used
        );
        if log.plane_observations > 0 {
            measured_frames += 1;
            assert!(log.point_count > log.plane_observations);
        }
    }
    assert!(
        measured_frames > result.logs.len() / 2,
        "only {measured_frames} of {} frames produced measurements",
        result.logs.len()
    );
}

#[test]
fn cluster_and_point_modes_produce_the_same_trajectory() {
    let dataset = noisy_dataset();
    let cluster_cfg = short_config();
    let point_cfg = Config {
        measurement_mode: MeasurementMode::PerPoint,
        ..short_config()
    };
    let cluster = run_on_dataset(dataset, &cluster_cfg).expect("cluster run");
    let point = run_on_dataset(dataset, &point_cfg).expect("point run");
    assert_eq!(cluster.estimates.len(), point.estimates.len());
    let mut worst = 0.0_f64;
    for (a, b) in cluster.estimates.iter().zip(&point.estimates) {
        worst = worst.max((a.pose.position - b.pose.position).norm());
    }
    assert!(
        worst < 1e-6,
        "cluster and point trajectories diverge by {worst} m"
    );
}

#[test]
fn serial_and_parallel_runs_are_bit_identical() {
    let dataset = noisy_dataset();
    let serial_cfg = Config {
        threading: Threading::Serial,
        ..short_config()
    };
    let parallel_cfg = Config {
        threading: Threading::Parallel,
        ..short_config()
    };
    let serial = run_on_dataset(dataset, &serial_cfg).expect("serial run");
    let parallel = run_on_dataset(dataset, &parallel_cfg).expect("parallel run");
    assert_eq!(serial.estimates.len(), parallel.estimates.len());
    for (a, b) in serial.estimates.iter().zip(&parallel.estimates) {
        assert_eq!(a.pose.position, b.pose.position);
        assert_eq!(a.pose.rotation.wxyz(), b.pose.rotation.wxyz());
        assert_eq!(a.pose_covariance, b.pose_covariance);
    }
}

#[test]
fn rerunning_the_same_input_is_bit_identical() {
    let dataset = noisy_dataset();
    let cfg = Config {
        threading: Threading::Serial,
        ..short_config()
    };
    let first = run_on_dataset(dataset, &cfg).expect("first run");
    let second = run_on_dataset(dataset, &cfg).expect("second run");
    for (a, b) in first.estimates.iter().zip(&second.estimates) {
        assert_eq!(a.pose.position, b.pose.position);
        assert_eq!(a.velocity, b.velocity);
        assert_eq!(a.pose_covariance, b.pose_covariance);
    }
}

#[test]
fn scans_without_imu_coverage_are_skipped_with_a_log_entry() {
    let dataset = noisy_dataset();
    let cfg = short_config();
    let cutoff = dataset.imu.last().unwrap().time / 2.0;
    let truncated: Vec<_> = dataset
        .imu
        .iter()
        .copied()
        .take_while(|s| s.time <= cutoff)
        .collect();
    let init = dataset.ground_truth[0];
    let result = run_odometry(&truncated, dataset.scans.iter().cloned(), &init, &cfg)
        .expect("truncated run");
    let skipped = result.logs.iter().filter(|l| l.skipped_missing_imu).count();
    let processed = result.logs.len() - skipped;
    assert!(skipped > 0, "no scan was skipped despite missing IMU data");
    assert_eq!(result.estimates.len(), processed);
    assert!(processed > 0);
    // Skipped scans are the trailing ones.
    assert!(result
        .logs
        .iter()
        .skip_while(|l| !l.skipped_missing_imu)
        .all(|l| l.skipped_missing_imu));
}

#[test]
fn noisy_short_run_stays_accurate_and_consistent() {
    let dataset = noisy_dataset();
    let cfg = short_config();
    let result = run_on_dataset(dataset, &cfg).expect("noisy run");
    let length = trajectory_length(&dataset.ground_truth);
    let ape = compute_ape(
        &result.estimates,
        &dataset.ground_truth,
        length,
        Alignment::None,
    )
    .unwrap();
    assert!(
        ape.translation_percent < 1.0,
        "translation APE {} % on a short noisy run",
        ape.translation_percent
    );
    let nees = compute_nees(&result.estimates, &dataset.ground_truth).unwrap();
    assert!(
        nees.average > 0.5 && nees.average < 60.0,
        "average NEES {} far from the consistent regime",
        nees.average
    );
    assert_eq!(nees.skipped, 0);
}
