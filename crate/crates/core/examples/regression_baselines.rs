//! Corner recovery on star shapes: learned classifier with evolution
//! against one-shot offset regression (`reg1`) and normal-distance
//! regression (`reg2`) trained on the same samples.

use sharpcontour::harness::{corner_experiment, standard_corpus, star_subset, CornerExperimentConfig, STANDARD_SEED};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = standard_corpus(STANDARD_SEED)?;
    let stars: Vec<_> = star_subset(&corpus).into_iter().take(5).collect();
    let rows = corner_experiment(&stars, &CornerExperimentConfig::default())?;
    println!("{:<10} {:<13} {:>12} {:>12} {:>10}", "shape", "method", "corner_mean", "corner_max", "mean_dist");
    for r in &rows {
        println!("{:<10} {:<13} {:>12.3} {:>12.3} {:>10.3}", r.shape, r.method, r.corner_error_mean, r.corner_error_max, r.mean_distance);
    }
    for m in ["initial", "sharpcontour", "reg1", "reg2"] {
        let v: Vec<f64> = rows.iter().filter(|r| r.method == m).map(|r| r.corner_error_mean).collect();
        println!("{m:<13} mean corner error {:.3} px", v.iter().sum::<f64>() / v.len() as f64);
    }
    Ok(())
}
