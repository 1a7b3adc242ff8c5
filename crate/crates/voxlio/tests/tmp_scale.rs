use voxlio::config::Config;
use voxlio::eval::{nees_value, pose_error};
use voxlio::pipeline::{monte_carlo, run_on_dataset};
use voxlio::sim::Simulation;

#[test]
#[ignore]
fn mc_preview() {
    let runs: usize = std::env::var("MC_RUNS")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(5);
    let report = monte_carlo(&Config::default(), runs).expect("mc");
    for r in &report.runs {
        println!(
            "seed={} ape_t={:.4}% ape_r={:.5} deg/m nees={:.2} reduction={:.1}%",
            r.seed,
            r.ape.translation_percent,
            r.ape.rotation_deg_per_meter,
            r.nees.average,
            r.dimensions.reduction_percent,
        );
    }
    println!("{}", report.summary());
}

#[test]
fn probe_default_scale() {
    let cfg = Config::default();
    let seeds: Vec<u64> = std::env::var("PROBE_SEEDS")
        .map(|s| s.split(',').map(|t| t.parse().unwrap()).collect())
        .unwrap_or_else(|_| vec![42, 1, 2, 3, 4]);
    let mut grand = Vec::new();
    for &seed in &seeds {
        let sim = Simulation::new(&cfg, seed).expect("sim");
        let dataset = sim.collect_dataset();
        let result = run_on_dataset(&dataset, &cfg).expect("run");
        let gt = &dataset.ground_truth;

        let mut nees_sum = 0.0;
        let mut att_sum = 0.0;
        let mut pos_sum = 0.0;
        let mut n = 0usize;
        let mut max_yaw: f64 = 0.0;
        let mut max_rp: f64 = 0.0;
        let mut max_pos: f64 = 0.0;
        let mut worst_nees: f64 = 0.0;
        let mut end = (0.0, 0.0, 0.0, 0.0);
        let detail = std::env::var_os("PROBE_DETAIL").is_some();
        let true_bias = (sim.initial_biases.gyro, sim.initial_biases.accel);
        for (j, est) in result.estimates.iter().enumerate() {
            let idx = gt
                .binary_search_by(|r| r.time.partial_cmp(&est.time).unwrap())
                .unwrap_or_else(|i| i.min(gt.len() - 1));
            let e = pose_error(&est.pose, &gt[idx].pose);
            let cov = est.pose_covariance;
            let nees = nees_value(&e, &cov).unwrap_or(f64::NAN);
            let att = {
                let a = e.fixed_rows::<3>(0).into_owned();
                let c = cov.fixed_view::<3, 3>(0, 0).into_owned();
                c.cholesky()
                    .map(|ch| a.dot(&ch.solve(&a)))
                    .unwrap_or(f64::NAN)
            };
            let pos = {
                let p = e.fixed_rows::<3>(3).into_owned();
                let c = cov.fixed_view::<3, 3>(3, 3).into_owned();
                c.cholesky()
                    .map(|ch| p.dot(&ch.solve(&p)))
                    .unwrap_or(f64::NAN)
            };
            nees_sum += nees;
            att_sum += att;
            pos_sum += pos;
            n += 1;
            let rp = (e[0] * e[0] + e[1] * e[1]).sqrt();
            max_yaw = max_yaw.max(e[2].abs());
            max_rp = max_rp.max(rp);
            max_pos = max_pos.max(e.fixed_rows::<3>(3).norm());
            worst_nees = worst_nees.max(nees);
            end = (e[2], cov[(2, 2)].sqrt(), e.fixed_rows::<3>(3).norm(), nees);
            if detail && j % 100 == 0 {
                let gb = est.gyro_bias - true_bias.0;
                let ab = est.accel_bias - true_bias.1;
                let ax: Vec<f64> = (0..6).map(|k| e[k] / cov[(k, k)].sqrt()).collect();
                println!(
                    "  t={:6.1} ax=({:+5.1},{:+5.1},{:+5.1},{:+5.1},{:+5.1},{:+5.1}) rp={:.1e} yaw={:+.1e} pos={:.1e} | gb_z={:+.1e} ab_xy={:.1e} nees={:7.1}",
                    est.time, ax[0], ax[1], ax[2], ax[3], ax[4], ax[5],
                    (e[0]*e[0]+e[1]*e[1]).sqrt(), e[2], e.fixed_rows::<3>(3).norm(),
                    gb[2], (ab[0]*ab[0]+ab[1]*ab[1]).sqrt(), nees,
                );
            }
        }
        let avg = nees_sum / n as f64;
        println!(
            "seed={seed:3} avg_nees={avg:8.2} att={:7.2} pos={:7.2} worst={worst_nees:9.1} | max: yaw={max_yaw:.2e} rp={max_rp:.2e} pos={max_pos:.2e} | end: yaw={:+.2e} sig_y={:.2e} pos={:.2e} nees={:.1}",
            att_sum / n as f64,
            pos_sum / n as f64,
            end.0,
            end.1,
            end.2,
            end.3,
        );
        grand.push(avg);
    }
    let overall = grand.iter().sum::<f64>() / grand.len() as f64;
    println!("overall avg_nees={overall:.2}");
}
