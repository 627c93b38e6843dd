//! Mask in, mask out: a blocky low-resolution mask is upsampled, its
//! contours are extracted and refined against a soft probability raster,
//! and the result is rasterized and written as PGM.

use sharpcontour::evolution::evolve_rings;
use sharpcontour::geometry::{regular_polygon, Point2};
use sharpcontour::metrics::mask_iou;
use sharpcontour::raster::{mask_to_contours, rasterize, write_pgm, MaskGrid, PgmFormat};
use sharpcontour::{EvolutionConfig, GridField};

const SIZE: usize = 160;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let truth = regular_polygon(Point2::new(80.0, -80.0), 55.0, 7, 0.3);
    let gt_mask = rasterize(std::slice::from_ref(&truth), SIZE, SIZE);

    // Coarse segmentation: the truth at 1/8 resolution, nearest upsampled.
    let low = rasterize(&[regular_polygon(Point2::new(10.0, -10.0), 55.0 / 8.0, 7, 0.3)], SIZE / 8, SIZE / 8);
    let mut coarse = MaskGrid::zeros(SIZE, SIZE)?;
    for row in 0..SIZE {
        for col in 0..SIZE {
            coarse.set(col, row, low.get(col / 8, row / 8));
        }
    }

    // Soft foreground probability: a 3x3 box blur of the true mask.
    let mut soft = MaskGrid::zeros(SIZE, SIZE)?;
    for row in 0..SIZE {
        for col in 0..SIZE {
            let mut sum = 0.0;
            let mut n = 0.0;
            for dr in -1i64..=1 {
                for dc in -1i64..=1 {
                    let (r, c) = (row as i64 + dr, col as i64 + dc);
                    if (0..SIZE as i64).contains(&r) && (0..SIZE as i64).contains(&c) {
                        sum += gt_mask.get(c as usize, r as usize);
                        n += 1.0;
                    }
                }
            }
            soft.set(col, row, sum / n);
        }
    }

    let rings = mask_to_contours(&coarse);
    let field = GridField::foreground(&soft);
    let traces = evolve_rings(&rings, &field, &EvolutionConfig { iterations: 5, ..EvolutionConfig::default() })?;
    let refined: Vec<_> = traces.iter().map(|t| t.final_contour().clone()).collect();
    let out = rasterize(&refined, SIZE, SIZE);

    println!("coarse mask IoU  {:.4}", mask_iou(&coarse, &gt_mask)?);
    println!("refined mask IoU {:.4}", mask_iou(&out, &gt_mask)?);
    let path = std::env::temp_dir().join("mask_pipeline.pgm");
    write_pgm(&path, &out, PgmFormat::Binary)?;
    println!("wrote {}", path.display());
    Ok(())
}
