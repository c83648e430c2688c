//! Pseudo-points: automatically generated per-frame cues that stand in for
//! manual point annotations at inference time.
//!
//! Five spatial cues are supported (training point statistics, proposal
//! self-supervision, person detections, independent motion, frame center)
//! plus a temporal-extent prior. Each spatial cue produces a track covering
//! every frame of a video; a weighting function calibrates each cue against
//! the manual annotations of the training set and the resulting weight both
//! selects the best cue and scales its influence when rescoring proposals.

use crate::error::{Error, Result};
use crate::geometry::{
    center_bias_term, overlap, Box2D, MatchMode, Point, PointTrack, Tube, VideoMeta,
};
use crate::mining::{FeatureMatrix, LinearModel};

/// The supported pseudo-point cues.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PseudoKind {
    TrainStats,
    SelfSupervision,
    Person,
    IndependentMotion,
    Center,
}

impl PseudoKind {
    pub const ALL: [PseudoKind; 5] = [
        PseudoKind::TrainStats,
        PseudoKind::SelfSupervision,
        PseudoKind::Person,
        PseudoKind::IndependentMotion,
        PseudoKind::Center,
    ];

    /// CLI name of the cue.
    pub fn name(&self) -> &'static str {
        match self {
            PseudoKind::TrainStats => "train_stats",
            PseudoKind::SelfSupervision => "self",
            PseudoKind::Person => "person",
            PseudoKind::IndependentMotion => "imotion",
            PseudoKind::Center => "center",
        }
    }

    pub fn parse(name: &str) -> Option<PseudoKind> {
        PseudoKind::ALL.iter().copied().find(|k| k.name() == name)
    }
}

impl std::fmt::Display for PseudoKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A cue evaluated on every frame of one video. Person tracks additionally
/// keep the underlying boxes, which the weighting step consumes; `points`
/// holds the box centers in that case.
#[derive(Debug, Clone)]
pub struct PseudoTrack {
    pub kind: PseudoKind,
    /// One entry per frame, frame 1 first.
    pub points: Vec<Point>,
    /// Person cue only: the selected detection box per frame.
    pub boxes: Option<Vec<Box2D>>,
    /// Frames where the cue degenerated and fell back to the frame center.
    pub degenerate_frames: Vec<u32>,
}

impl PseudoTrack {
    /// Dense point track over all frames (person boxes become centers).
    pub fn as_point_track(&self) -> PointTrack {
        PointTrack::from_entries(
            self.points
                .iter()
                .enumerate()
                .map(|(i, &p)| (i as u32 + 1, p)),
        )
    }
}

/// Per-frame independent-motion mass at a down-sampled grid resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct MassMap {
    pub downsample: u32,
    pub grid_width: u32,
    pub grid_height: u32,
    /// Frame-major, then row-major (y, then x) within a frame.
    pub frames: Vec<Vec<f32>>,
}

impl MassMap {
    pub fn validate(&self) -> Result<()> {
        let cells = (self.grid_width * self.grid_height) as usize;
        if self.downsample == 0 || self.grid_width == 0 || self.grid_height == 0 {
            return Err(Error::InvalidConfig("mass map dimensions must be positive".into()));
        }
        for (i, frame) in self.frames.iter().enumerate() {
            if frame.len() != cells {
                return Err(Error::InvalidConfig(format!(
                    "mass map frame {i} has {} cells, expected {cells}",
                    frame.len()
                )));
            }
            if frame.iter().any(|&m| m < 0.0 || !m.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "mass map frame {i} has negative or non-finite mass"
                )));
            }
        }
        Ok(())
    }
}

/// One record of a person-detection file.
#[derive(Debug, Clone, Copy)]
pub struct PersonDetection {
    pub frame: u32,
    pub bbox: Box2D,
    pub confidence: f64,
}

/// Calibrated weight of one cue.
#[derive(Debug, Clone, Copy)]
pub struct PseudoWeight {
    pub kind: PseudoKind,
    pub lambda_p: f64,
}

/// Mean relative temporal extent of an action's annotations, plus the
/// penalty weight applied when rescoring by extent.
#[derive(Debug, Clone, Copy)]
pub struct TemporalStats {
    pub mean_relative_extent: f64,
    pub lambda_t: f64,
}

/// Mean annotated point of the action's training videos, in coordinates
/// relative to the frame size. Videos first average their own annotations,
/// then the per-video means are averaged.
pub fn train_point_statistic(training: &[(&PointTrack, &VideoMeta)]) -> Result<(f64, f64)> {
    if training.is_empty() {
        return Err(Error::EmptyInput("training point track"));
    }
    let mut sx = 0.0;
    let mut sy = 0.0;
    for (track, meta) in training {
        if track.is_empty() {
            return Err(Error::EmptyInput("point annotation"));
        }
        let k = track.len() as f64;
        let (mut vx, mut vy) = (0.0, 0.0);
        for (_, p) in track.iter() {
            vx += p.x / meta.width as f64;
            vy += p.y / meta.height as f64;
        }
        sx += vx / k;
        sy += vy / k;
    }
    let n = training.len() as f64;
    Ok((sx / n, sy / n))
}

/// Constant pseudo-point from training point statistics, mapped into the
/// test video's frame size.
pub fn pp_train_stats(
    training: &[(&PointTrack, &VideoMeta)],
    test_meta: &VideoMeta,
) -> Result<PseudoTrack> {
    let (rx, ry) = train_point_statistic(training)?;
    let p = Point::new(rx * test_meta.width as f64, ry * test_meta.height as f64);
    Ok(PseudoTrack {
        kind: PseudoKind::TrainStats,
        points: vec![p; test_meta.frame_count as usize],
        boxes: None,
        degenerate_frames: Vec::new(),
    })
}

/// Center of mass of per-pixel proposal coverage, computed analytically.
///
/// The coverage count is a sum of box indicator functions, so its integral
/// decomposes box by box: the centroid is the area-weighted mean of the box
/// centers, exactly what an arrangement decomposition would give.
pub fn coverage_centroid(boxes: &[&Box2D]) -> Option<Point> {
    let mut mass = 0.0;
    let mut mx = 0.0;
    let mut my = 0.0;
    for b in boxes {
        let a = b.area();
        let c = b.center();
        mass += a;
        mx += a * c.x;
        my += a * c.y;
    }
    if mass > 0.0 {
        Some(Point::new(mx / mass, my / mass))
    } else {
        None
    }
}

/// Self-supervision cue: per frame, the coverage centroid of all proposals
/// present on that frame. Frames no proposal covers fall back to the frame
/// center and are flagged.
pub fn pp_self_supervision(proposals: &[Tube], meta: &VideoMeta) -> PseudoTrack {
    let mut points = Vec::with_capacity(meta.frame_count as usize);
    let mut degenerate = Vec::new();
    for frame in 1..=meta.frame_count {
        let boxes: Vec<&Box2D> = proposals.iter().filter_map(|t| t.box_at(frame)).collect();
        match coverage_centroid(&boxes) {
            Some(p) => points.push(p),
            None => {
                points.push(meta.frame_center());
                degenerate.push(frame);
            }
        }
    }
    PseudoTrack {
        kind: PseudoKind::SelfSupervision,
        points,
        boxes: None,
        degenerate_frames: degenerate,
    }
}

/// Person cue: the maximum-confidence detection per frame (ties to the
/// lowest record index). Frames without detections carry the most recent
/// box forward; frames before the first detection use a unit box at the
/// frame center and are flagged.
pub fn pp_person(detections: &[PersonDetection], meta: &VideoMeta) -> PseudoTrack {
    let mut per_frame: Vec<Option<Box2D>> = vec![None; meta.frame_count as usize];
    let mut best_conf: Vec<f64> = vec![f64::NEG_INFINITY; meta.frame_count as usize];
    for det in detections {
        if det.frame == 0 || det.frame > meta.frame_count {
            continue;
        }
        let idx = (det.frame - 1) as usize;
        if det.confidence > best_conf[idx] {
            best_conf[idx] = det.confidence;
            per_frame[idx] = Some(det.bbox);
        }
    }

    let c = meta.frame_center();
    let unit = Box2D {
        xmin: c.x - 0.5,
        ymin: c.y - 0.5,
        xmax: c.x + 0.5,
        ymax: c.y + 0.5,
    };
    let mut boxes = Vec::with_capacity(per_frame.len());
    let mut degenerate = Vec::new();
    let mut last: Option<Box2D> = None;
    for (idx, slot) in per_frame.iter().enumerate() {
        match slot {
            Some(b) => {
                last = Some(*b);
                boxes.push(*b);
            }
            None => match last {
                Some(b) => boxes.push(b),
                None => {
                    boxes.push(unit);
                    degenerate.push(idx as u32 + 1);
                }
            },
        }
    }
    let points = boxes.iter().map(Box2D::center).collect();
    PseudoTrack {
        kind: PseudoKind::Person,
        points,
        boxes: Some(boxes),
        degenerate_frames: degenerate,
    }
}

/// Centroid of one mass-map frame in pixel coordinates; cell `(ix, iy)` maps
/// to the pixel center `((ix + 0.5) * ds, (iy + 0.5) * ds)`.
fn mass_centroid(map: &MassMap, frame_idx: usize) -> Option<Point> {
    let grid = &map.frames[frame_idx];
    let ds = map.downsample as f64;
    let mut mass = 0.0;
    let mut mx = 0.0;
    let mut my = 0.0;
    for iy in 0..map.grid_height as usize {
        for ix in 0..map.grid_width as usize {
            let m = grid[iy * map.grid_width as usize + ix] as f64;
            if m > 0.0 {
                mass += m;
                mx += m * (ix as f64 + 0.5) * ds;
                my += m * (iy as f64 + 0.5) * ds;
            }
        }
    }
    if mass > 0.0 {
        Some(Point::new(mx / mass, my / mass))
    } else {
        None
    }
}

/// Independent-motion cue: per frame, the center of mass of the motion map.
/// All-zero frames fall back to the frame center and are flagged.
pub fn pp_independent_motion(map: &MassMap, meta: &VideoMeta) -> Result<PseudoTrack> {
    map.validate()?;
    if map.frames.len() != meta.frame_count as usize {
        return Err(Error::InvalidConfig(format!(
            "mass map has {} frames, video has {}",
            map.frames.len(),
            meta.frame_count
        )));
    }
    let mut points = Vec::with_capacity(map.frames.len());
    let mut degenerate = Vec::new();
    for idx in 0..map.frames.len() {
        match mass_centroid(map, idx) {
            Some(p) => points.push(p),
            None => {
                points.push(meta.frame_center());
                degenerate.push(idx as u32 + 1);
            }
        }
    }
    Ok(PseudoTrack {
        kind: PseudoKind::IndependentMotion,
        points,
        boxes: None,
        degenerate_frames: degenerate,
    })
}

/// Center-bias cue: the frame center on every frame.
pub fn pp_center(meta: &VideoMeta) -> PseudoTrack {
    PseudoTrack {
        kind: PseudoKind::Center,
        points: vec![meta.frame_center(); meta.frame_count as usize],
        boxes: None,
        degenerate_frames: Vec::new(),
    }
}

/// Distance from a point to the nearest frame border.
fn border_distance(p: Point, meta: &VideoMeta) -> f64 {
    let w = meta.width as f64;
    let h = meta.height as f64;
    p.x.min(w - p.x).min(p.y).min(h - p.y).max(0.0)
}

/// Per-frame quality of a pseudo-point against a manual annotation: the
/// center-bias term for person boxes, a border-normalized linear falloff for
/// point cues. The border distance is measured from the manual point.
fn frame_quality(
    track: &PseudoTrack,
    frame: u32,
    manual: Point,
    meta: &VideoMeta,
    mode: MatchMode,
) -> f64 {
    let idx = (frame - 1) as usize;
    if let Some(boxes) = &track.boxes {
        return center_bias_term(&boxes[idx], manual, mode);
    }
    let pseudo = track.points[idx];
    let norm = border_distance(manual, meta);
    if norm <= 0.0 {
        // annotation on the border: exact hits score 1, anything else 0
        return if manual.distance(pseudo) == 0.0 { 1.0 } else { 0.0 };
    }
    (1.0 - manual.distance(pseudo) / norm).max(0.0)
}

/// Calibrate one cue against the manual annotations: per video the quality
/// is averaged over annotated frames, then averaged over all training
/// videos. The result is both the selection score and the rescoring weight.
pub fn weight_pseudo(
    kind: PseudoKind,
    videos: &[(&PseudoTrack, &PointTrack, &VideoMeta)],
    mode: MatchMode,
) -> Result<PseudoWeight> {
    if videos.is_empty() {
        return Err(Error::EmptyInput("training video"));
    }
    let mut total = 0.0;
    for (track, manual, meta) in videos {
        if manual.is_empty() {
            return Err(Error::EmptyInput("point annotation"));
        }
        debug_assert_eq!(track.kind, kind);
        let mut video_sum = 0.0;
        for (frame, point) in manual.iter() {
            video_sum += frame_quality(track, frame, point, meta, mode);
        }
        total += video_sum / manual.len() as f64;
    }
    Ok(PseudoWeight {
        kind,
        lambda_p: total / videos.len() as f64,
    })
}

/// Model scores adjusted by the weighted overlap against a pseudo track.
pub fn spatial_adjusted_scores(
    model: &LinearModel,
    features: &FeatureMatrix,
    tubes: &[Tube],
    pseudo: &PseudoTrack,
    meta: &VideoMeta,
    lambda_p: f64,
    mode: MatchMode,
) -> Vec<f64> {
    let track = pseudo.as_point_track();
    tubes
        .iter()
        .enumerate()
        .map(|(i, tube)| {
            model.decision(features.row(i)) + lambda_p * overlap(tube, &track, meta, mode)
        })
        .collect()
}

fn argmax(scores: &[f64]) -> usize {
    let mut best = f64::NEG_INFINITY;
    let mut best_idx = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > best {
            best = s;
            best_idx = i;
        }
    }
    best_idx
}

/// Select the top proposal under pseudo-point rescoring; ties break to the
/// lowest index. `lambda_p == 0` reduces to the plain model argmax.
pub fn rescore_select(
    model: &LinearModel,
    features: &FeatureMatrix,
    tubes: &[Tube],
    pseudo: &PseudoTrack,
    meta: &VideoMeta,
    lambda_p: f64,
    mode: MatchMode,
) -> usize {
    argmax(&spatial_adjusted_scores(
        model, features, tubes, pseudo, meta, lambda_p, mode,
    ))
}

/// Mean relative temporal extent of the annotation span over an action's
/// training videos.
pub fn temporal_stats(
    training: &[(&PointTrack, &VideoMeta)],
    lambda_t: f64,
) -> Result<TemporalStats> {
    if training.is_empty() {
        return Err(Error::EmptyInput("training point track"));
    }
    let mut total = 0.0;
    for (track, meta) in training {
        let (first, last) = match (track.first_frame(), track.last_frame()) {
            (Some(f), Some(l)) => (f, l),
            _ => return Err(Error::EmptyInput("point annotation")),
        };
        total += (last - first + 1) as f64 / meta.frame_count as f64;
    }
    Ok(TemporalStats {
        mean_relative_extent: total / training.len() as f64,
        lambda_t,
    })
}

/// Scores adjusted by the temporal-extent penalty
/// `lambda_t * |mean_extent - extent| / mean_extent`.
pub fn temporal_adjusted_scores(
    scores: &[f64],
    relative_extents: &[f64],
    stats: &TemporalStats,
) -> Vec<f64> {
    let fy = stats.mean_relative_extent;
    scores
        .iter()
        .zip(relative_extents)
        .map(|(&s, &ft)| s - stats.lambda_t * (fy - ft).abs() / fy)
        .collect()
}

/// Select the top proposal under the temporal-extent penalty; ties break to
/// the lowest index. `lambda_t == 0` reduces to the plain argmax.
pub fn temporal_rescore(scores: &[f64], relative_extents: &[f64], stats: &TemporalStats) -> usize {
    argmax(&temporal_adjusted_scores(scores, relative_extents, stats))
}
