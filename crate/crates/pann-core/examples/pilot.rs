//! Calibration pilot: prints the loss trajectory and timing for one
//! Study I run. Used to size the smoke-test thresholds and the
//! acceptance budget.

use pann_core::calib::{train, OptimizerKind, Study, TrainConfig};
use pann_core::dataset::Role;
use pann_core::matgen::{build_study1, ScalarCase};
use pann_core::picnn::{default_config, ArchitectureKind};
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let epochs: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(2000);
    let kind = match args.get(2).map(|s| s.as_str()) {
        Some("2") => ArchitectureKind::Type2,
        Some("3") => ArchitectureKind::Type3,
        _ => ArchitectureKind::Type1,
    };
    let case = ScalarCase::A;
    let t0 = Instant::now();
    let calib = build_study1::<f64>(case, Role::Calib).unwrap();
    let test = build_study1::<f64>(case, Role::Test).unwrap();
    eprintln!(
        "data built in {:.2}s ({} calib, {} test)",
        t0.elapsed().as_secs_f64(),
        calib.len(),
        test.len()
    );
    let cfg = TrainConfig {
        optimizer: OptimizerKind::Adam,
        learning_rate: 0.002,
        epochs,
        seed: 0,
        restarts: 1,
        normalize_stress: false,
        study: Study::I,
        normalisation_term: true,
    };
    let picnn_cfg = default_config(kind, 1).unwrap();
    let t1 = Instant::now();
    let (report, _model) = train(&cfg, &picnn_cfg, &calib, &test).unwrap();
    let wall = t1.elapsed().as_secs_f64();
    let h = &report.loss_history[0];
    for &e in &[0usize, 10, 50, 100, 200, 500, 1000, 2000, 3000, 5000, 6999] {
        if e < h.len() {
            eprintln!("epoch {e:5}: weighted loss {:.6e}", h[e]);
        }
    }
    eprintln!(
        "final: weighted {:.3e}, calib log10 {:.3}, test log10 {:.3}",
        report.records[0].final_weighted_mse,
        report.records[0].calib_log10_mse,
        report.records[0].test_log10_mse
    );
    eprintln!(
        "wall {wall:.1}s for {epochs} epochs => {:.1} ms/epoch",
        1e3 * wall / epochs as f64
    );
}
