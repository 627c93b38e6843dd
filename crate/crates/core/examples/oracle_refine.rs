//! Refines a smoothed star against its exact indicator and reports the
//! boundary error after every iteration. Writes an SVG of the trace.

use sharpcontour::cli::{render_svg, ring_from_polygon, SvgInstance};
use sharpcontour::evolution::evolve;
use sharpcontour::geometry::Point2;
use sharpcontour::harness::{gen_shape, perturb, PerturbSpec, ShapeKind, ShapeSpec};
use sharpcontour::metrics::boundary_distance_stats;
use sharpcontour::{AnalyticOracle, EvolutionConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = ShapeSpec {
        kind: ShapeKind::Star { points: 5, ratio: 0.45 },
        scale: 180.0,
        center: Point2::new(125.0, -125.0),
        rotation: 0.2,
        seed: 0,
    };
    let shape = gen_shape(&spec)?;
    let gt = &shape.region.rings()[0];
    let coarse = perturb(&gt.resample(128)?, &PerturbSpec::smooth(6))?;

    let oracle = AnalyticOracle::hard(shape.region.clone());
    let cfg = EvolutionConfig { iterations: 5, ..EvolutionConfig::default() };
    let trace = evolve(&coarse, &oracle, &cfg)?;

    for (k, c) in trace.contours.iter().enumerate() {
        let d = boundary_distance_stats(std::slice::from_ref(c), shape.region.rings())?;
        println!("iteration {k}: mean distance {:.3} px, max {:.3} px", d.mean, d.max);
    }
    println!("frozen: {:.1}%", 100.0 * trace.frozen_fraction());

    let inst = SvgInstance {
        gt: vec![ring_from_polygon(gt)],
        stages: trace.contours.iter().map(|c| vec![ring_from_polygon(c)]).collect(),
    };
    let path = std::env::temp_dir().join("oracle_refine.svg");
    std::fs::write(&path, render_svg(250, 250, &[inst]))?;
    println!("wrote {}", path.display());
    Ok(())
}
