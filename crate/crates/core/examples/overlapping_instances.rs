//! Two overlapping blobs share one feature grid. Each instance gets its
//! own classifier weights, fitted directly or predicted by a hypernetwork
//! from a box embedding, and the overlap is labelled differently by each.

use sharpcontour::fields::SyntheticFeatureConfig;
use sharpcontour::harness::{instance_awareness, instance_awareness_hypernet, overlap_scene, AwarenessReport};
use sharpcontour::training::TrainConfig;

fn show(name: &str, r: &AwarenessReport) {
    println!(
        "{name:>12}: held-out accuracy A {:.3} B {:.3}, overlap probes with opposite labels {:.1}% of {}",
        r.heldout_accuracy[0],
        r.heldout_accuracy[1],
        100.0 * r.opposite_fraction,
        r.probes
    );
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scene = overlap_scene(7, &SyntheticFeatureConfig::default())?;
    let cfg = TrainConfig::default();
    let (direct, _) = instance_awareness(&scene, &cfg)?;
    show("direct fit", &direct);
    let (hyper, _) = instance_awareness_hypernet(&scene, &cfg)?;
    show("hypernetwork", &hyper);
    Ok(())
}
