//! Boxes, tubes, point tracks, and the overlap measures defined on them.
//!
//! All geometry is continuous (real-valued); pixel rasterization only ever
//! appears in test oracles. Frame indices are 1-based and a tube occupies a
//! contiguous frame range.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Axis-aligned box in frame coordinates, origin top-left.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Box2D {
    pub xmin: f64,
    pub ymin: f64,
    pub xmax: f64,
    pub ymax: f64,
}

impl Box2D {
    pub fn new(xmin: f64, ymin: f64, xmax: f64, ymax: f64) -> Result<Self> {
        let b = Box2D {
            xmin,
            ymin,
            xmax,
            ymax,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.xmin, self.ymin, self.xmax, self.ymax]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.xmin >= self.xmax || self.ymin >= self.ymax {
            return Err(Error::InvalidGeometry(format!(
                "degenerate box [{}, {}, {}, {}]",
                self.xmin, self.ymin, self.xmax, self.ymax
            )));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.xmax - self.xmin
    }

    pub fn height(&self) -> f64 {
        self.ymax - self.ymin
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> Point {
        Point {
            x: 0.5 * (self.xmin + self.xmax),
            y: 0.5 * (self.ymin + self.ymax),
        }
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.xmin && p.x <= self.xmax && p.y >= self.ymin && p.y <= self.ymax
    }

    /// Midpoints of the four edges.
    pub fn edge_midpoints(&self) -> [Point; 4] {
        let c = self.center();
        [
            Point { x: c.x, y: self.ymin },
            Point { x: c.x, y: self.ymax },
            Point { x: self.xmin, y: c.y },
            Point { x: self.xmax, y: c.y },
        ]
    }
}

/// 2D point in frame coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        (dx * dx + dy * dy).sqrt()
    }
}

/// Temporally contiguous sequence of per-frame boxes.
#[derive(Debug, Clone, PartialEq)]
pub struct Tube {
    pub start_frame: u32,
    pub boxes: Vec<Box2D>,
}

impl Tube {
    pub fn new(start_frame: u32, boxes: Vec<Box2D>) -> Result<Self> {
        if start_frame == 0 {
            return Err(Error::InvalidGeometry("tube start frame must be >= 1".into()));
        }
        if boxes.is_empty() {
            return Err(Error::InvalidGeometry("tube has no boxes".into()));
        }
        for b in &boxes {
            b.validate()?;
        }
        Ok(Tube { start_frame, boxes })
    }

    pub fn end_frame(&self) -> u32 {
        self.start_frame + self.boxes.len() as u32 - 1
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    pub fn covers(&self, frame: u32) -> bool {
        frame >= self.start_frame && frame <= self.end_frame()
    }

    pub fn box_at(&self, frame: u32) -> Option<&Box2D> {
        if self.covers(frame) {
            self.boxes.get((frame - self.start_frame) as usize)
        } else {
            None
        }
    }

    /// Temporal extent as a fraction of the video length.
    pub fn relative_extent(&self, meta: &VideoMeta) -> f64 {
        self.len() as f64 / meta.frame_count as f64
    }
}

/// Sparse per-frame point annotations for one video.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointTrack {
    entries: BTreeMap<u32, Point>,
}

impl PointTrack {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_entries(entries: impl IntoIterator<Item = (u32, Point)>) -> Self {
        PointTrack {
            entries: entries.into_iter().collect(),
        }
    }

    pub fn insert(&mut self, frame: u32, point: Point) {
        self.entries.insert(frame, point);
    }

    pub fn get(&self, frame: u32) -> Option<Point> {
        self.entries.get(&frame).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Annotated frames in increasing order.
    pub fn iter(&self) -> impl Iterator<Item = (u32, Point)> + '_ {
        self.entries.iter().map(|(&f, &p)| (f, p))
    }

    pub fn first_frame(&self) -> Option<u32> {
        self.entries.keys().next().copied()
    }

    pub fn last_frame(&self) -> Option<u32> {
        self.entries.keys().next_back().copied()
    }

    pub fn validate(&self, meta: &VideoMeta) -> Result<()> {
        for (&f, p) in &self.entries {
            if f == 0 || f > meta.frame_count {
                return Err(Error::InvalidGeometry(format!(
                    "point frame {f} outside [1, {}]",
                    meta.frame_count
                )));
            }
            if !p.x.is_finite() || !p.y.is_finite() {
                return Err(Error::InvalidGeometry(format!("non-finite point at frame {f}")));
            }
        }
        Ok(())
    }
}

/// Frame count and frame dimensions of one video.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct VideoMeta {
    pub frame_count: u32,
    pub width: u32,
    pub height: u32,
}

impl VideoMeta {
    pub fn new(frame_count: u32, width: u32, height: u32) -> Result<Self> {
        if frame_count == 0 || width == 0 || height == 0 {
            return Err(Error::InvalidGeometry(
                "video meta fields must be positive".into(),
            ));
        }
        Ok(VideoMeta {
            frame_count,
            width,
            height,
        })
    }

    pub fn frame_area(&self) -> f64 {
        self.width as f64 * self.height as f64
    }

    pub fn frame_center(&self) -> Point {
        Point {
            x: self.width as f64 / 2.0,
            y: self.height as f64 / 2.0,
        }
    }
}

/// How the per-frame center-bias term treats points outside the box.
///
/// The raw linear falloff can stay positive for points just outside an
/// elongated box; `ClampOutside` forces such terms to zero and is the
/// default. `Literal` keeps the raw formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MatchMode {
    #[default]
    ClampOutside,
    Literal,
}

/// Intersection-over-union of two boxes.
pub fn box_iou(a: &Box2D, b: &Box2D) -> f64 {
    let iw = a.xmax.min(b.xmax) - a.xmin.max(b.xmin);
    let ih = a.ymax.min(b.ymax) - a.ymin.max(b.ymin);
    if iw <= 0.0 || ih <= 0.0 {
        return 0.0;
    }
    let inter = iw * ih;
    inter / (a.area() + b.area() - inter)
}

/// Mean per-frame box IoU over the union of the two tubes' temporal extents.
/// Frames covered by only one tube contribute zero.
pub fn tube_iou(a: &Tube, b: &Tube) -> f64 {
    let start = a.start_frame.min(b.start_frame);
    let end = a.end_frame().max(b.end_frame());
    let mut total = 0.0;
    for frame in start..=end {
        if let (Some(ba), Some(bb)) = (a.box_at(frame), b.box_at(frame)) {
            total += box_iou(ba, bb);
        }
    }
    total / (end - start + 1) as f64
}

/// Per-frame center-bias term: 1 at the box center, falling off linearly with
/// distance, normalized by the farthest center-to-edge-midpoint distance.
pub fn center_bias_term(bbox: &Box2D, point: Point, mode: MatchMode) -> f64 {
    if mode == MatchMode::ClampOutside && !bbox.contains(point) {
        return 0.0;
    }
    let center = bbox.center();
    let norm = bbox
        .edge_midpoints()
        .iter()
        .map(|m| m.distance(center))
        .fold(0.0_f64, f64::max);
    (1.0 - point.distance(center) / norm).max(0.0)
}

/// Mean center-bias term over all annotated frames. Annotated frames outside
/// the tube's temporal span contribute zero while the normalizer stays the
/// full annotation count, so temporally short tubes are penalized.
pub fn center_match(tube: &Tube, points: &PointTrack, mode: MatchMode) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let mut total = 0.0;
    for (frame, point) in points.iter() {
        if let Some(bbox) = tube.box_at(frame) {
            total += center_bias_term(bbox, point, mode);
        }
    }
    total / points.len() as f64
}

/// Squared ratio of the tube's total box area to the video's total frame
/// area, penalizing oversized tubes.
pub fn size_regularizer(tube: &Tube, meta: &VideoMeta) -> f64 {
    let tube_area: f64 = tube.boxes.iter().map(Box2D::area).sum();
    let video_area = meta.frame_area() * meta.frame_count as f64;
    let ratio = tube_area / video_area;
    ratio * ratio
}

/// Overlap between a tube and a point track: center match minus size
/// regularizer. May be negative.
pub fn overlap(tube: &Tube, points: &PointTrack, meta: &VideoMeta, mode: MatchMode) -> f64 {
    center_match(tube, points, mode) - size_regularizer(tube, meta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn bx(xmin: f64, ymin: f64, xmax: f64, ymax: f64) -> Box2D {
        Box2D::new(xmin, ymin, xmax, ymax).unwrap()
    }

    fn single_frame_tube(frame: u32, b: Box2D) -> Tube {
        Tube::new(frame, vec![b]).unwrap()
    }

    #[test]
    fn box_iou_identity() {
        let a = bx(0.0, 0.0, 10.0, 10.0);
        assert_eq!(box_iou(&a, &a), 1.0);
    }

    #[test]
    fn box_iou_disjoint() {
        let a = bx(0.0, 0.0, 10.0, 10.0);
        let b = bx(20.0, 20.0, 30.0, 30.0);
        assert_eq!(box_iou(&a, &b), 0.0);
    }

    #[test]
    fn box_iou_half_shift_matches_raster_oracle() {
        let a = bx(0.0, 0.0, 10.0, 10.0);
        let b = bx(5.0, 0.0, 15.0, 10.0);
        let got = box_iou(&a, &b);
        // 50 / 150
        assert_relative_eq!(got, 1.0 / 3.0, max_relative = 1e-12);
        let oracle = oracles::raster_box_iou(&a, &b, 0.01);
        assert_relative_eq!(got, oracle, epsilon = 1e-9);
        assert!((got - 0.33333).abs() < 1e-4);
    }

    #[test]
    fn tube_iou_identity_and_disjoint() {
        let a = Tube::new(1, vec![bx(0.0, 0.0, 10.0, 10.0); 5]).unwrap();
        assert_eq!(tube_iou(&a, &a), 1.0);

        let b = Tube::new(10, vec![bx(0.0, 0.0, 10.0, 10.0); 5]).unwrap();
        assert_eq!(tube_iou(&a, &b), 0.0);
    }

    #[test]
    fn tube_iou_single_frame_matches_raster_oracle() {
        let a = single_frame_tube(3, bx(0.0, 0.0, 10.0, 10.0));
        let b = single_frame_tube(3, bx(5.0, 0.0, 15.0, 10.0));
        let got = tube_iou(&a, &b);
        let oracle = oracles::raster_tube_iou(&a, &b, 0.01);
        assert_relative_eq!(got, 1.0 / 3.0, max_relative = 1e-12);
        assert_relative_eq!(got, oracle, epsilon = 1e-9);
    }

    #[test]
    fn tube_iou_partial_temporal_overlap() {
        // Frames 1..=2 and 2..=3: only frame 2 has both, three frames in the union.
        let b = bx(0.0, 0.0, 10.0, 10.0);
        let a = Tube::new(1, vec![b, b]).unwrap();
        let c = Tube::new(2, vec![b, b]).unwrap();
        assert_relative_eq!(tube_iou(&a, &c), 1.0 / 3.0, max_relative = 1e-12);
    }

    #[test]
    fn center_bias_at_center_and_half_distance() {
        let b = bx(0.0, 0.0, 100.0, 100.0);
        assert_eq!(
            center_bias_term(&b, Point::new(50.0, 50.0), MatchMode::ClampOutside),
            1.0
        );
        // denominator max(w, h)/2 = 50, distance 25
        assert_relative_eq!(
            center_bias_term(&b, Point::new(75.0, 50.0), MatchMode::ClampOutside),
            0.5,
            max_relative = 1e-12
        );
    }

    #[test]
    fn center_bias_elongated_box() {
        // center (50, 10), farthest edge midpoint at distance 50
        let b = bx(0.0, 0.0, 100.0, 20.0);
        let got = center_bias_term(&b, Point::new(50.0, 15.0), MatchMode::ClampOutside);
        assert_relative_eq!(got, 0.9, max_relative = 1e-12);
        let oracle = oracles::reference_center_bias(&b, Point::new(50.0, 15.0), false);
        assert_relative_eq!(got, oracle, max_relative = 1e-12);
    }

    #[test]
    fn clamp_zeroes_points_outside_elongated_boxes() {
        // Just below the box: the literal formula stays positive, the clamp kills it.
        let b = bx(0.0, 0.0, 100.0, 20.0);
        let p = Point::new(50.0, 25.0);
        assert!(center_bias_term(&b, p, MatchMode::Literal) > 0.0);
        assert_eq!(center_bias_term(&b, p, MatchMode::ClampOutside), 0.0);
    }

    #[test]
    fn center_match_counts_uncovered_annotated_frames_in_normalizer() {
        let b = bx(0.0, 0.0, 100.0, 100.0);
        let tube = single_frame_tube(1, b);
        let points = PointTrack::from_entries([
            (1, Point::new(50.0, 50.0)),
            (2, Point::new(50.0, 50.0)),
        ]);
        // frame 2 is annotated but not covered: term 0, normalizer 2
        assert_relative_eq!(
            center_match(&tube, &points, MatchMode::ClampOutside),
            0.5,
            max_relative = 1e-12
        );
    }

    #[test]
    fn size_regularizer_full_and_small() {
        let meta = VideoMeta::new(10, 100, 100).unwrap();
        let full = Tube::new(1, vec![bx(0.0, 0.0, 100.0, 100.0); 10]).unwrap();
        assert_relative_eq!(size_regularizer(&full, &meta), 1.0, max_relative = 1e-12);

        let small = Tube::new(1, vec![bx(0.0, 0.0, 50.0, 50.0); 2]).unwrap();
        assert_relative_eq!(
            size_regularizer(&small, &meta),
            0.0025,
            max_relative = 1e-12
        );
    }

    #[test]
    fn overlap_composes_match_and_size() {
        let meta = VideoMeta::new(10, 100, 100).unwrap();
        // Elongated-box example (term 0.9) on two frames of a ten-frame video.
        let b = bx(0.0, 0.0, 100.0, 20.0);
        let tube = Tube::new(1, vec![b, b]).unwrap();
        let points = PointTrack::from_entries([
            (1, Point::new(50.0, 15.0)),
            (2, Point::new(50.0, 15.0)),
        ]);
        let m = center_match(&tube, &points, MatchMode::ClampOutside);
        let s = size_regularizer(&tube, &meta);
        let o = overlap(&tube, &points, &meta, MatchMode::ClampOutside);
        assert_relative_eq!(m, 0.9, max_relative = 1e-12);
        assert_eq!(o, m - s);
    }

    #[test]
    fn overlap_lower_bound_at_full_frame_tube() {
        // Zero match with a maximal tube drives the overlap to -1.
        let meta = VideoMeta::new(5, 100, 100).unwrap();
        let tube = Tube::new(1, vec![bx(0.0, 0.0, 100.0, 100.0); 5]).unwrap();
        let points = PointTrack::new();
        assert_eq!(overlap(&tube, &points, &meta, MatchMode::ClampOutside), -1.0);
    }

    fn arb_int_box(max_extent: i32) -> impl Strategy<Value = Box2D> {
        (0..max_extent, 0..max_extent, 1..20i32, 1..20i32).prop_map(|(x, y, w, h)| {
            bx(x as f64, y as f64, (x + w) as f64, (y + h) as f64)
        })
    }

    proptest! {
        #[test]
        fn box_iou_symmetric_bounded(a in arb_int_box(40), b in arb_int_box(40)) {
            let ab = box_iou(&a, &b);
            let ba = box_iou(&b, &a);
            prop_assert_eq!(ab, ba);
            prop_assert!((0.0..=1.0).contains(&ab));
        }

        #[test]
        fn box_iou_matches_integer_raster(a in arb_int_box(40), b in arb_int_box(40)) {
            let oracle = oracles::raster_box_iou(&a, &b, 1.0);
            prop_assert!((box_iou(&a, &b) - oracle).abs() < 1e-9);
        }

        #[test]
        fn center_bias_translation_invariant(
            a in arb_int_box(40),
            px in 0.0..60.0f64, py in 0.0..60.0f64,
            tx in -15.0..15.0f64, ty in -15.0..15.0f64,
        ) {
            let p = Point::new(px, py);
            let shifted = bx(a.xmin + tx, a.ymin + ty, a.xmax + tx, a.ymax + ty);
            let sp = Point::new(px + tx, py + ty);
            let t0 = center_bias_term(&a, p, MatchMode::ClampOutside);
            let t1 = center_bias_term(&shifted, sp, MatchMode::ClampOutside);
            prop_assert!((t0 - t1).abs() < 1e-9);
        }

        #[test]
        fn center_bias_scale_invariant(
            a in arb_int_box(40),
            px in 0.0..60.0f64, py in 0.0..60.0f64,
            scale in 0.1..10.0f64,
        ) {
            let p = Point::new(px, py);
            let scaled = bx(a.xmin * scale, a.ymin * scale, a.xmax * scale, a.ymax * scale);
            let sp = Point::new(px * scale, py * scale);
            let t0 = center_bias_term(&a, p, MatchMode::ClampOutside);
            let t1 = center_bias_term(&scaled, sp, MatchMode::ClampOutside);
            prop_assert!((t0 - t1).abs() < 1e-9);
        }

        #[test]
        fn size_regularizer_monotone_in_box_growth(
            a in arb_int_box(40),
            grow in 1.0..10.0f64,
            frames in 1..5usize,
        ) {
            let meta = VideoMeta::new(20, 100, 100).unwrap();
            let tube = Tube::new(1, vec![a; frames]).unwrap();
            let grown_box = bx(a.xmin, a.ymin, a.xmax + grow, a.ymax + grow);
            let grown = Tube::new(1, vec![grown_box; frames]).unwrap();
            let longer = Tube::new(1, vec![a; frames + 1]).unwrap();
            let s = size_regularizer(&tube, &meta);
            prop_assert!(size_regularizer(&grown, &meta) >= s);
            prop_assert!(size_regularizer(&longer, &meta) >= s);
        }

        #[test]
        fn overlap_is_exact_difference(
            a in arb_int_box(40),
            frames in 1..6usize,
            px in 0.0..60.0f64, py in 0.0..60.0f64,
        ) {
            let meta = VideoMeta::new(20, 100, 100).unwrap();
            let tube = Tube::new(1, vec![a; frames]).unwrap();
            let points = PointTrack::from_entries([(1, Point::new(px, py))]);
            let o = overlap(&tube, &points, &meta, MatchMode::ClampOutside);
            let m = center_match(&tube, &points, MatchMode::ClampOutside);
            let s = size_regularizer(&tube, &meta);
            prop_assert_eq!(o, m - s);
        }
    }
}
