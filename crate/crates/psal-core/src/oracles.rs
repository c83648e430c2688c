//! Brute-force reference computations used only by tests.
//!
//! Everything here recomputes a quantity from first principles, by counting
//! raster cells or by re-deriving a formula with explicit loops, and never
//! calls the analytic implementations it is used to check. The module is
//! compiled for this crate's own tests and, behind the `oracles` feature,
//! for downstream test suites.

use crate::geometry::{Box2D, Point, Tube};

fn cell_center_inside(b: &Box2D, x: f64, y: f64) -> bool {
    x > b.xmin && x < b.xmax && y > b.ymin && y < b.ymax
}

/// Box IoU by counting raster cells of size `cell` whose centers fall inside
/// each box. Exact when all coordinates are multiples of `cell`, since no
/// cell center can then sit on a boundary.
pub fn raster_box_iou(a: &Box2D, b: &Box2D, cell: f64) -> f64 {
    let xmin = a.xmin.min(b.xmin);
    let ymin = a.ymin.min(b.ymin);
    let xmax = a.xmax.max(b.xmax);
    let ymax = a.ymax.max(b.ymax);
    let nx = ((xmax - xmin) / cell).ceil() as usize;
    let ny = ((ymax - ymin) / cell).ceil() as usize;

    let mut count_a = 0u64;
    let mut count_b = 0u64;
    let mut count_both = 0u64;
    for iy in 0..ny {
        let y = ymin + (iy as f64 + 0.5) * cell;
        for ix in 0..nx {
            let x = xmin + (ix as f64 + 0.5) * cell;
            let in_a = cell_center_inside(a, x, y);
            let in_b = cell_center_inside(b, x, y);
            count_a += in_a as u64;
            count_b += in_b as u64;
            count_both += (in_a && in_b) as u64;
        }
    }
    let union = count_a + count_b - count_both;
    if union == 0 {
        0.0
    } else {
        count_both as f64 / union as f64
    }
}

/// Tube IoU recomputed frame by frame with the raster box oracle over the
/// union of the two temporal extents.
pub fn raster_tube_iou(a: &Tube, b: &Tube, cell: f64) -> f64 {
    let start = a.start_frame.min(b.start_frame);
    let end = a.end_frame().max(b.end_frame());
    let mut total = 0.0;
    for frame in start..=end {
        if let (Some(ba), Some(bb)) = (a.box_at(frame), b.box_at(frame)) {
            total += raster_box_iou(ba, bb, cell);
        }
    }
    total / (end - start + 1) as f64
}

/// Box area by raster cell counting.
pub fn raster_box_area(b: &Box2D, cell: f64) -> f64 {
    let nx = ((b.xmax - b.xmin) / cell).ceil() as usize + 2;
    let ny = ((b.ymax - b.ymin) / cell).ceil() as usize + 2;
    let x0 = b.xmin - cell;
    let y0 = b.ymin - cell;
    let mut count = 0u64;
    for iy in 0..ny {
        let y = y0 + (iy as f64 + 0.5) * cell;
        for ix in 0..nx {
            let x = x0 + (ix as f64 + 0.5) * cell;
            count += cell_center_inside(b, x, y) as u64;
        }
    }
    count as f64 * cell * cell
}

/// Size regularizer recomputed from raster areas.
pub fn raster_size_regularizer(tube: &Tube, frame_w: u32, frame_h: u32, frame_count: u32, cell: f64) -> f64 {
    let tube_area: f64 = tube.boxes.iter().map(|b| raster_box_area(b, cell)).sum();
    let video_area = frame_w as f64 * frame_h as f64 * frame_count as f64;
    let ratio = tube_area / video_area;
    ratio * ratio
}

/// Per-frame center-bias term re-derived with explicit edge-midpoint loops.
pub fn reference_center_bias(b: &Box2D, point: Point, clamp_outside: bool) -> f64 {
    let cx = (b.xmin + b.xmax) / 2.0;
    let cy = (b.ymin + b.ymax) / 2.0;
    if clamp_outside
        && !(point.x >= b.xmin && point.x <= b.xmax && point.y >= b.ymin && point.y <= b.ymax)
    {
        return 0.0;
    }
    let midpoints = [
        (cx, b.ymin),
        (cx, b.ymax),
        (b.xmin, cy),
        (b.xmax, cy),
    ];
    let mut denom: f64 = 0.0;
    for (mx, my) in midpoints {
        let d = ((mx - cx).powi(2) + (my - cy).powi(2)).sqrt();
        if d > denom {
            denom = d;
        }
    }
    let dist = ((point.x - cx).powi(2) + (point.y - cy).powi(2)).sqrt();
    (1.0 - dist / denom).max(0.0)
}

/// Center match re-derived: mean of per-frame reference terms over all
/// annotated frames, zero where the tube is absent.
pub fn reference_center_match(
    tube: &Tube,
    annotations: &[(u32, Point)],
    clamp_outside: bool,
) -> f64 {
    if annotations.is_empty() {
        return 0.0;
    }
    let mut total = 0.0;
    for &(frame, point) in annotations {
        if let Some(b) = tube.box_at(frame) {
            total += reference_center_bias(b, point, clamp_outside);
        }
    }
    total / annotations.len() as f64
}

/// Center of mass over per-cell proposal coverage counts, rasterized at
/// `cell` resolution over the frame. Returns `None` when no box touches any
/// cell center.
pub fn raster_coverage_centroid(
    boxes: &[Box2D],
    frame_w: f64,
    frame_h: f64,
    cell: f64,
) -> Option<Point> {
    let nx = (frame_w / cell).ceil() as usize;
    let ny = (frame_h / cell).ceil() as usize;
    let mut mass_total = 0.0;
    let mut mx = 0.0;
    let mut my = 0.0;
    for iy in 0..ny {
        let y = (iy as f64 + 0.5) * cell;
        for ix in 0..nx {
            let x = (ix as f64 + 0.5) * cell;
            let count = boxes.iter().filter(|b| cell_center_inside(b, x, y)).count();
            if count > 0 {
                let m = count as f64;
                mass_total += m;
                mx += m * x;
                my += m * y;
            }
        }
    }
    if mass_total == 0.0 {
        None
    } else {
        Some(Point::new(mx / mass_total, my / mass_total))
    }
}

/// Average precision by brute force: for every positive, re-count true
/// positives above it from scratch. Input is (score, is_positive), unsorted.
pub fn brute_force_average_precision(labeled: &[(f64, bool)], n_gt: usize) -> f64 {
    if n_gt == 0 {
        return 0.0;
    }
    let mut sorted: Vec<(f64, bool)> = labeled.to_vec();
    sorted.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let mut ap = 0.0;
    for rank in 0..sorted.len() {
        if !sorted[rank].1 {
            continue;
        }
        let mut tp_at_rank = 0usize;
        for item in sorted.iter().take(rank + 1) {
            tp_at_rank += item.1 as usize;
        }
        ap += tp_at_rank as f64 / (rank + 1) as f64;
    }
    ap / n_gt as f64
}

/// AUC via the Mann-Whitney rank-sum identity instead of pair counting.
pub fn rank_sum_auc(labeled: &[(f64, bool)]) -> Option<f64> {
    let n_pos = labeled.iter().filter(|l| l.1).count();
    let n_neg = labeled.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut sorted: Vec<(f64, bool)> = labeled.to_vec();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    // average ranks over tie groups, ranks are 1-based
    let mut ranks = vec![0.0; sorted.len()];
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1].0 == sorted[i].0 {
            j += 1;
        }
        let avg = (i + 1 + j + 1) as f64 / 2.0;
        for r in ranks.iter_mut().take(j + 1).skip(i) {
            *r = avg;
        }
        i = j + 1;
    }
    let rank_sum_pos: f64 = sorted
        .iter()
        .zip(&ranks)
        .filter(|((_, pos), _)| *pos)
        .map(|(_, r)| r)
        .sum();
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos as f64 * n_neg as f64))
}
