//! Fits a per-instance point classifier on synthetic features and uses it
//! as the probability field for evolution.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sharpcontour::evolution::evolve_rings;
use sharpcontour::fields::{synthetic_features, SyntheticFeatureConfig};
use sharpcontour::harness::{gen_shape, perturb, PerturbSpec, ShapeKind, ShapeSpec};
use sharpcontour::metrics::boundary_distance_stats;
use sharpcontour::raster::rasterize;
use sharpcontour::training::{accuracy, fit_instance, sample_boundary_points, TrainConfig};
use sharpcontour::{EvolutionConfig, InstanceContext, InstanceField, IpcParams, Point2};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = ShapeSpec {
        kind: ShapeKind::RoundedRect { aspect: 1.6, corner_radius: 0.1 },
        scale: 150.0,
        center: Point2::new(100.0, -100.0),
        rotation: 0.4,
        seed: 0,
    };
    let shape = gen_shape(&spec)?;
    let gt = &shape.region;
    let bbox = gt.bbox();

    let grid = synthetic_features(&rasterize(gt.rings(), 200, 200), &SyntheticFeatureConfig::default(), 3);
    let cfg = TrainConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let train = sample_boundary_points(gt, &grid, &bbox, &cfg, 0, &mut rng)?;
    let held_out = sample_boundary_points(gt, &grid, &bbox, &cfg, 0, &mut rng)?;

    let p0 = IpcParams::random(grid.channels(), cfg.hidden, &mut rng);
    let (params, log) = fit_instance(&p0, &train, &cfg)?;
    println!("loss {:.4} -> {:.4} over {} epochs", log[0].loss, log.last().unwrap().loss, log.len());
    println!("held-out band accuracy {:.3}", accuracy(&params, &held_out)?);

    let ctx = InstanceContext::new(bbox, params)?;
    let field = InstanceField::new(&grid, &ctx)?;
    let coarse = vec![perturb(&gt.rings()[0].resample(128)?, &PerturbSpec::smooth(5))?];
    let traces = evolve_rings(&coarse, &field, &EvolutionConfig::default())?;
    let refined = vec![traces[0].final_contour().clone()];
    let before = boundary_distance_stats(&coarse, gt.rings())?.mean;
    let after = boundary_distance_stats(&refined, gt.rings())?.mean;
    println!("mean boundary distance {before:.3} px -> {after:.3} px");
    Ok(())
}
