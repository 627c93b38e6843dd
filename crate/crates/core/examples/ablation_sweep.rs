//! Sweeps iterations and the adaptive step over the standard corpus with
//! the analytic oracle and prints one summary line per configuration.

use sharpcontour::harness::{rows_to_csv, run_sweep, SweepConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut sweep = SweepConfig { oracle_tau: 1.0, ..SweepConfig::default() };
    sweep.set_axis("iterations=1,2,3,4")?;
    sweep.set_axis("adaptive_step=true,false")?;
    let corpus = sweep.corpus()?;
    let report = run_sweep(&corpus, &sweep)?;

    println!("{:>10} {:>8} {:>12} {:>12} {:>8} {:>10}", "iterations", "adaptive", "vertex_err", "mean_dist", "frozen", "ms");
    for ((cfg, s), t) in report.configs.iter().zip(&report.summaries).zip(&report.timings) {
        println!(
            "{:>10} {:>8} {:>12.4} {:>12.4} {:>7.1}% {:>10.0}",
            cfg.iterations,
            cfg.adaptive_step,
            s.mean_vertex_error,
            s.mean_distance,
            100.0 * s.frozen_fraction,
            t.runtime_ms
        );
    }
    let path = std::env::temp_dir().join("ablation_sweep.csv");
    std::fs::write(&path, rows_to_csv(&report.rows))?;
    println!("per-shape rows in {}", path.display());
    Ok(())
}
