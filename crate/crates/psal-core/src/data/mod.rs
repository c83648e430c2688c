//! Dataset model: manifest, per-video artifacts, loading, and the
//! perturbations behind the annotation-budget experiments.

pub mod io;
mod synth;

pub use synth::{synth_generate, synth_generate_to_dir, SynthConfig};

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{tube_iou, Point, PointTrack, Tube, VideoMeta};
use crate::mining::FeatureMatrix;
use crate::pseudo::{MassMap, PersonDetection};
use crate::rng::DetRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// Relative paths of one video's artifact files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VideoFiles {
    pub proposals: String,
    pub features: String,
    pub points: String,
    pub ground_truth: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detections: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass_map: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestVideo {
    pub id: String,
    pub meta: VideoMeta,
    pub split: Split,
    pub labels: Vec<String>,
    pub files: VideoFiles,
}

/// Top-level dataset description, stored as `manifest.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub actions: Vec<String>,
    pub videos: Vec<ManifestVideo>,
}

/// One fully loaded video. Features are L2-normalized per row at load time;
/// the files on disk keep the raw values.
#[derive(Debug, Clone)]
pub struct VideoData {
    pub id: String,
    pub split: Split,
    pub labels: Vec<usize>,
    pub meta: VideoMeta,
    pub proposals: Vec<Tube>,
    pub features: FeatureMatrix,
    pub points: PointTrack,
    pub ground_truth: Vec<(usize, Tube)>,
    pub detections: Option<Vec<PersonDetection>>,
    pub mass_map: Option<MassMap>,
}

impl VideoData {
    pub fn has_label(&self, action: usize) -> bool {
        self.labels.contains(&action)
    }

    pub fn gt_tubes(&self, action: usize) -> Vec<&Tube> {
        self.ground_truth
            .iter()
            .filter(|(a, _)| *a == action)
            .map(|(_, t)| t)
            .collect()
    }
}

/// In-memory dataset.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub actions: Vec<String>,
    pub videos: Vec<VideoData>,
}

impl Dataset {
    pub fn action_index(&self, name: &str) -> Result<usize> {
        self.actions
            .iter()
            .position(|a| a == name)
            .ok_or_else(|| Error::UnknownAction(name.to_string()))
    }

    pub fn feature_dim(&self) -> usize {
        self.videos.first().map_or(0, |v| v.features.dim())
    }

    pub fn train_videos(&self) -> impl Iterator<Item = &VideoData> {
        self.videos.iter().filter(|v| v.split == Split::Train)
    }

    pub fn test_videos(&self) -> impl Iterator<Item = &VideoData> {
        self.videos.iter().filter(|v| v.split == Split::Test)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        let dim = self.feature_dim();
        for v in &self.videos {
            if !seen.insert(&v.id) {
                return Err(Error::InvalidConfig(format!("duplicate video id {}", v.id)));
            }
            if v.features.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: v.features.dim(),
                });
            }
            if v.features.rows() != v.proposals.len() {
                return Err(Error::InvalidConfig(format!(
                    "video {}: {} proposals but {} feature rows",
                    v.id,
                    v.proposals.len(),
                    v.features.rows()
                )));
            }
            for label in &v.labels {
                if *label >= self.actions.len() {
                    return Err(Error::InvalidConfig(format!(
                        "video {}: label index {label} out of range",
                        v.id
                    )));
                }
            }
            for tube in v.proposals.iter().chain(v.ground_truth.iter().map(|(_, t)| t)) {
                if tube.end_frame() > v.meta.frame_count {
                    return Err(Error::InvalidGeometry(format!(
                        "video {}: tube ends at frame {} beyond {}",
                        v.id,
                        tube.end_frame(),
                        v.meta.frame_count
                    )));
                }
            }
            v.points.validate(&v.meta)?;
        }
        Ok(())
    }

    /// Load a dataset directory written by the generator (or by hand,
    /// following the same manifest schema).
    pub fn load(dir: &Path) -> Result<Dataset> {
        let manifest: Manifest = io::read_json(&dir.join("manifest.json"))?;
        let mut videos = Vec::with_capacity(manifest.videos.len());
        for mv in &manifest.videos {
            let labels = mv
                .labels
                .iter()
                .map(|name| {
                    manifest
                        .actions
                        .iter()
                        .position(|a| a == name)
                        .ok_or_else(|| Error::UnknownAction(name.clone()))
                })
                .collect::<Result<Vec<_>>>()?;
            let proposals = io::read_tubes(&dir.join(&mv.files.proposals))?;
            let features = io::read_features(&dir.join(&mv.files.features))?.normalized();
            let points = io::read_points(&dir.join(&mv.files.points))?;
            let ground_truth = io::read_ground_truth(&dir.join(&mv.files.ground_truth))?
                .into_iter()
                .map(|(name, tube)| {
                    let idx = manifest
                        .actions
                        .iter()
                        .position(|a| a == &name)
                        .ok_or_else(|| Error::UnknownAction(name.clone()))?;
                    Ok((idx, tube))
                })
                .collect::<Result<Vec<_>>>()?;
            let detections = mv
                .files
                .detections
                .as_ref()
                .map(|p| io::read_detections(&dir.join(p)))
                .transpose()?;
            let mass_map = mv
                .files
                .mass_map
                .as_ref()
                .map(|p| io::read_mass_map(&dir.join(p)))
                .transpose()?;
            videos.push(VideoData {
                id: mv.id.clone(),
                split: mv.split,
                labels,
                meta: mv.meta,
                proposals,
                features,
                points,
                ground_truth,
                detections,
                mass_map,
            });
        }
        let dataset = Dataset {
            actions: manifest.actions,
            videos,
        };
        dataset.validate()?;
        Ok(dataset)
    }
}

/// Add seeded isotropic Gaussian noise to every point, clamping the result
/// to the frame. The clamp keeps extreme draws inside the video instead of
/// resampling them.
pub fn perturb_points(track: &PointTrack, sigma: f64, seed: u64, meta: &VideoMeta) -> PointTrack {
    if sigma == 0.0 {
        return track.clone();
    }
    let mut rng = DetRng::new(seed);
    PointTrack::from_entries(track.iter().map(|(frame, p)| {
        let x = (p.x + sigma * rng.gaussian()).clamp(0.0, meta.width as f64);
        let y = (p.y + sigma * rng.gaussian()).clamp(0.0, meta.height as f64);
        (frame, Point::new(x, y))
    }))
}

/// Keep annotated frames at the given stride, anchored on the first
/// annotated frame.
pub fn subsample_points(track: &PointTrack, stride: u32) -> PointTrack {
    if stride <= 1 {
        return track.clone();
    }
    let first = match track.first_frame() {
        Some(f) => f,
        None => return track.clone(),
    };
    PointTrack::from_entries(
        track
            .iter()
            .filter(|(frame, _)| (frame - first) % stride == 0),
    )
}

/// Drop a seeded `epsilon` fraction of the low-quality proposals (IoU to
/// ground truth at most 0.5); everything above stays. Returns the kept
/// indices in ascending order.
pub fn filter_low_quality(
    proposals: &[Tube],
    ground_truth: &[&Tube],
    epsilon: f64,
    seed: u64,
) -> Vec<usize> {
    let low: Vec<usize> = proposals
        .iter()
        .enumerate()
        .filter(|(_, p)| {
            ground_truth
                .iter()
                .map(|g| tube_iou(p, g))
                .fold(0.0_f64, f64::max)
                <= 0.5
        })
        .map(|(i, _)| i)
        .collect();
    let n_remove = (epsilon * low.len() as f64).floor() as usize;
    let mut rng = DetRng::new(seed);
    let removed: BTreeSet<usize> = rng
        .sample_indices(low.len(), n_remove)
        .into_iter()
        .map(|k| low[k])
        .collect();
    (0..proposals.len()).filter(|i| !removed.contains(i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Box2D;

    fn bx(xmin: f64, ymin: f64, xmax: f64, ymax: f64) -> Box2D {
        Box2D::new(xmin, ymin, xmax, ymax).unwrap()
    }

    #[test]
    fn perturb_zero_sigma_is_identity() {
        let meta = VideoMeta::new(10, 100, 100).unwrap();
        let track = PointTrack::from_entries([(1, Point::new(50.0, 50.0))]);
        assert_eq!(perturb_points(&track, 0.0, 7, &meta), track);
    }

    #[test]
    fn perturb_clamps_to_frame() {
        let meta = VideoMeta::new(10, 100, 100).unwrap();
        let track =
            PointTrack::from_entries((1..=10).map(|f| (f, Point::new(1.0, 99.0))));
        let noisy = perturb_points(&track, 500.0, 3, &meta);
        for (_, p) in noisy.iter() {
            assert!((0.0..=100.0).contains(&p.x));
            assert!((0.0..=100.0).contains(&p.y));
        }
    }

    #[test]
    fn perturb_empirical_sigma_within_5_percent() {
        // a frame large enough that the clamp never fires
        let meta = VideoMeta::new(10_000, 1_000_000, 1_000_000).unwrap();
        let center = Point::new(500_000.0, 500_000.0);
        let track = PointTrack::from_entries((1..=10_000).map(|f| (f, center)));
        let noisy = perturb_points(&track, 5.0, 11, &meta);
        let mut sq = 0.0;
        let mut n = 0usize;
        for (_, p) in noisy.iter() {
            sq += (p.x - center.x).powi(2) + (p.y - center.y).powi(2);
            n += 2;
        }
        let sd = (sq / n as f64).sqrt();
        assert!((sd - 5.0).abs() / 5.0 < 0.05, "empirical sd {sd}");
    }

    #[test]
    fn subsample_identity_and_single() {
        let track = PointTrack::from_entries((1..=60).map(|f| (f, Point::new(1.0, 1.0))));
        assert_eq!(subsample_points(&track, 1), track);

        let single = subsample_points(&track, 100);
        assert_eq!(single.len(), 1);
        assert_eq!(single.first_frame(), Some(1));
    }

    #[test]
    fn subsample_counts() {
        let track = PointTrack::from_entries((1..=60).map(|f| (f, Point::new(1.0, 1.0))));
        // frames 1, 21, 41
        assert_eq!(subsample_points(&track, 20).len(), 3);

        // anchored at the first annotated frame, not at frame 1
        let offset = PointTrack::from_entries((5..=24).map(|f| (f, Point::new(1.0, 1.0))));
        let sub = subsample_points(&offset, 10);
        let frames: Vec<u32> = sub.iter().map(|(f, _)| f).collect();
        assert_eq!(frames, vec![5, 15]);
    }

    fn stacked_tubes(n_low: usize, n_high: usize) -> (Vec<Tube>, Tube) {
        let gt = Tube::new(1, vec![bx(10.0, 10.0, 30.0, 30.0); 10]).unwrap();
        let mut tubes = Vec::new();
        for _ in 0..n_low {
            tubes.push(Tube::new(1, vec![bx(60.0, 60.0, 80.0, 80.0); 10]).unwrap());
        }
        for _ in 0..n_high {
            tubes.push(gt.clone());
        }
        (tubes, gt)
    }

    #[test]
    fn filter_epsilon_zero_keeps_everything() {
        let (tubes, gt) = stacked_tubes(10, 2);
        let kept = filter_low_quality(&tubes, &[&gt], 0.0, 1);
        assert_eq!(kept.len(), 12);
    }

    #[test]
    fn filter_epsilon_one_keeps_only_high_quality() {
        let (tubes, gt) = stacked_tubes(10, 2);
        let kept = filter_low_quality(&tubes, &[&gt], 1.0, 1);
        assert_eq!(kept, vec![10, 11]);
    }

    #[test]
    fn filter_half_removes_floor_of_low() {
        let (tubes, gt) = stacked_tubes(100, 7);
        let kept = filter_low_quality(&tubes, &[&gt], 0.5, 9);
        assert_eq!(kept.len(), 57);
        // all high-quality indices survive
        for i in 100..107 {
            assert!(kept.contains(&i));
        }
    }

    #[test]
    fn filter_is_deterministic() {
        let (tubes, gt) = stacked_tubes(20, 3);
        let a = filter_low_quality(&tubes, &[&gt], 0.4, 5);
        let b = filter_low_quality(&tubes, &[&gt], 0.4, 5);
        assert_eq!(a, b);
    }
}
